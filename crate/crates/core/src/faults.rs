//! Fault classification of single responses.

use std::fmt;

use crate::http::HttpResponse;
use crate::model::EndpointSpec;

pub const FAULT_SERVER_ERROR: u16 = 100;
pub const FAULT_SCHEMA_MISMATCH: u16 = 101;

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct Fault {
    pub code: u16,
    pub message: String,
}

impl Fault {
    /// Long description, as put next to the offending call in plans.
    pub fn headline(&self) -> String {
        let what = match self.code {
            FAULT_SERVER_ERROR => "Received A Server Error Status (5xx) From API",
            FAULT_SCHEMA_MISMATCH => {
                "Received A Response From API With A Structure/Data That Is Not Matching Its Schema"
            }
            _ => "Potential Fault",
        };
        format!("Fault{}. {what}. {}", self.code, self.message)
    }
}

impl fmt::Display for Fault {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.code, self.message)
    }
}

/// Classifies a response of `endpoint` (when known): 5xx is a server
/// error; a 2xx that is undeclared or does not fit its declared schema is a
/// schema mismatch.
pub fn classify_fault(endpoint: Option<&EndpointSpec>, response: &HttpResponse) -> Option<Fault> {
    let status = response.status;
    if status >= 500 {
        return Some(Fault {
            code: FAULT_SERVER_ERROR,
            message: format!("Status {status} returned"),
        });
    }
    if !response.is_success() {
        return None;
    }
    let ep = endpoint?;
    if ep.responses.is_empty() {
        return None;
    }
    let Some(declared) = ep.response_for(status) else {
        return Some(Fault {
            code: FAULT_SCHEMA_MISMATCH,
            message: format!("Type: validation.response.status. Status {status} is not declared in the schema"),
        });
    };
    let schema = declared.schema.as_ref()?;
    let mismatches = schema.validate(&response.body_json());
    let first = mismatches.first()?;
    let mut message = format!("Type: {}. {}", first.kind_label(), first.describe());
    if mismatches.len() > 1 {
        message.push_str(&format!(" (and {} more)", mismatches.len() - 1));
    }
    Some(Fault {
        code: FAULT_SCHEMA_MISMATCH,
        message,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::Method;
    use crate::model::{FieldSchema, ResponseSpec, StatusKey, ValueSchema};
    use std::collections::BTreeMap;

    fn ep() -> EndpointSpec {
        let schema = ValueSchema::object(vec![FieldSchema {
            name: "errrors".into(),
            schema: ValueSchema::string(),
            required: false,
        }]);
        EndpointSpec {
            verb: Method::Post,
            path: "/api/links/create".into(),
            params: vec![],
            request_bodies: vec![],
            body_required: false,
            responses: BTreeMap::from([(StatusKey::Code(200), ResponseSpec { schema: Some(schema), links: vec![] })]),
            tags: Default::default(),
            operation_id: None,
        }
    }

    #[test]
    fn server_error_is_100() {
        let f = classify_fault(None, &HttpResponse::new(500, "")).unwrap();
        assert_eq!(f.code, 100);
    }

    #[test]
    fn null_for_string_is_101_with_path() {
        let f = classify_fault(Some(&ep()), &HttpResponse::new(200, r#"{"errrors":null}"#)).unwrap();
        assert_eq!(f.code, 101);
        assert_eq!(
            f.headline(),
            r#"Fault101. Received A Response From API With A Structure/Data That Is Not Matching Its Schema. Type: validation.response.body.schema.type. [Path '/errrors'] Instance type (null) does not match any allowed primitive type (allowed: ["string"])"#
        );
    }

    #[test]
    fn conformant_body_is_clean() {
        assert_eq!(classify_fault(Some(&ep()), &HttpResponse::new(200, r#"{"errrors":"none"}"#)), None);
        assert_eq!(classify_fault(Some(&ep()), &HttpResponse::new(404, "nope")), None);
    }

    #[test]
    fn undeclared_success_status_is_101() {
        assert_eq!(classify_fault(Some(&ep()), &HttpResponse::new(201, "")).unwrap().code, 101);
    }
}
