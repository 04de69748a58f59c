//! Resource ids harvested from collection GETs, reused only by later GETs.

use std::collections::{BTreeMap, BTreeSet};
use std::time::Duration;

use crate::http::{HttpResponse, Method};
use crate::model::{path_template_params, ApiModel, EndpointKey, EndpointSpec, JsonValue};

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Provenance {
    pub endpoint: EndpointKey,
    pub extraction: String,
    pub at: Duration,
}

#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct ResponseDictionary {
    /// Templated path (e.g. `/products/{id}`) to harvested ids.
    pub entries: BTreeMap<String, BTreeSet<String>>,
    pub provenance: BTreeMap<String, Provenance>,
}

impl ResponseDictionary {
    pub fn ids_for(&self, template: &str) -> Option<&BTreeSet<String>> {
        self.entries.get(template).filter(|s| !s.is_empty())
    }

    pub fn contains_id(&self, id: &str) -> bool {
        self.provenance.contains_key(id)
    }

    pub fn is_empty(&self) -> bool {
        self.entries.values().all(BTreeSet::is_empty)
    }
}

/// Whether `ep` is a GET without path parameters whose success response
/// schema is an array, or an object wrapping one.
pub fn is_collection(ep: &EndpointSpec) -> bool {
    if ep.verb != Method::Get || !path_template_params(&ep.path).is_empty() {
        return false;
    }
    ep.responses.iter().any(|(status, r)| {
        status.matches(200)
            && r.schema.as_ref().is_some_and(|s| {
                s.type_name() == "array" || s.fields().iter().any(|f| f.schema.type_name() == "array")
            })
    })
}

pub fn singular(word: &str) -> String {
    if let Some(stem) = word.strip_suffix("ies") {
        format!("{stem}y")
    } else if word.ends_with("ses") || word.ends_with("xes") {
        word[..word.len() - 2].to_string()
    } else if word.ends_with('s') && !word.ends_with("ss") && !word.ends_with("us") {
        word[..word.len() - 1].to_string()
    } else {
        word.to_string()
    }
}

fn id_field(items: &[&indexmap::IndexMap<String, JsonValue>], collection: &str) -> Option<String> {
    let first = items.first()?;
    if first.contains_key("id") {
        return Some("id".into());
    }
    let named = format!("{}Id", singular(collection));
    if let Some(k) = first.keys().find(|k| k.eq_ignore_ascii_case(&named)) {
        return Some(k.clone());
    }
    let primitives: Vec<&String> = first
        .iter()
        .filter(|(_, v)| matches!(v, JsonValue::String(_) | JsonValue::Number(_)))
        .map(|(k, _)| k)
        .collect();
    let [only] = primitives.as_slice() else { return None };
    let values: BTreeSet<String> = items.iter().filter_map(|o| o.get(*only)).map(JsonValue::canonical_key).collect();
    (values.len() == items.len()).then(|| (*only).clone())
}

/// Harvests ids from a 2xx response of collection endpoint `ep`, storing
/// them under each sibling `{param}` path of the model. Best-effort.
pub fn harvest_dictionary(
    dict: &mut ResponseDictionary,
    ep: &EndpointSpec,
    response: &HttpResponse,
    model: &ApiModel,
    at: Duration,
) {
    if !response.is_success() || !is_collection(ep) {
        return;
    }
    let body = response.body_json();
    let (array, prefix) = match &body {
        JsonValue::Array(items) => (items, String::new()),
        JsonValue::Object(map) => match map.iter().find(|(_, v)| matches!(v, JsonValue::Array(_))) {
            Some((k, JsonValue::Array(items))) => (items, format!("/{k}")),
            _ => return,
        },
        _ => return,
    };
    let objects: Vec<_> = array
        .iter()
        .filter_map(|v| match v {
            JsonValue::Object(o) => Some(o),
            _ => None,
        })
        .collect();
    let collection = ep.path.rsplit('/').find(|s| !s.is_empty()).unwrap_or_default();
    let Some(field) = id_field(&objects, collection) else { return };
    let base = ep.path.trim_end_matches('/');
    let siblings: BTreeSet<&str> = model
        .endpoints
        .iter()
        .map(|e| e.path.as_str())
        .filter(|p| {
            p.strip_prefix(base)
                .and_then(|rest| rest.strip_prefix('/'))
                .is_some_and(|seg| seg.starts_with('{') && seg.ends_with('}') && !seg[1..].contains('{'))
        })
        .collect();
    for (i, o) in objects.iter().enumerate() {
        let Some(v) = o.get(&field).filter(|v| matches!(v, JsonValue::String(_) | JsonValue::Number(_))) else {
            continue;
        };
        let id = v.render_scalar();
        for s in &siblings {
            dict.entries.entry(s.to_string()).or_default().insert(id.clone());
        }
        if !siblings.is_empty() {
            dict.provenance.entry(id).or_insert_with(|| Provenance {
                endpoint: ep.key(),
                extraction: format!("{prefix}/{i}/{field}"),
                at,
            });
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{build_model, StatusKey};
    use crate::schema::{load_schema_with, MemoryFetcher, SchemaSource};

    const PRODUCTS: &str = r#"
openapi: 3.0.1
paths:
  /products:
    get:
      responses:
        '200':
          description: ok
          content:
            application/json:
              schema: {type: array, items: {type: object, properties: {id: {type: string}}}}
  /products/{id}:
    get:
      parameters: [{name: id, in: path, required: true, schema: {type: string}}]
      responses: {'200': {description: ok}}
    put:
      parameters: [{name: id, in: path, required: true, schema: {type: string}}]
      responses: {'200': {description: ok}}
"#;

    fn model() -> ApiModel {
        let mut f = MemoryFetcher::default();
        f.insert("http://h/p.yaml", PRODUCTS);
        let (g, _) = load_schema_with(&SchemaSource::parse("http://h/p.yaml").unwrap(), &mut f).unwrap();
        build_model(&g).0
    }

    #[test]
    fn products_ids_are_stored_for_item_path() {
        let m = model();
        assert!(m.endpoints[0].responses.contains_key(&StatusKey::Code(200)));
        let mut d = ResponseDictionary::default();
        harvest_dictionary(&mut d, &m.endpoints[0], &HttpResponse::new(200, r#"[{"id":"p1"},{"id":"p2"}]"#), &m, Duration::ZERO);
        let ids: Vec<_> = d.ids_for("/products/{id}").unwrap().iter().cloned().collect();
        assert_eq!(ids, ["p1", "p2"]);
        assert_eq!(d.provenance["p2"].extraction, "/1/id");
    }

    #[test]
    fn empty_array_changes_nothing() {
        let m = model();
        let mut d = ResponseDictionary::default();
        harvest_dictionary(&mut d, &m.endpoints[0], &HttpResponse::new(200, "[]"), &m, Duration::ZERO);
        assert_eq!(d, ResponseDictionary::default());
    }

    #[test]
    fn wrapped_arrays_and_named_ids() {
        let m = model();
        let mut d = ResponseDictionary::default();
        let body = r#"{"items":[{"productId":7,"name":"a"},{"productId":8,"name":"a"}]}"#;
        harvest_dictionary(&mut d, &m.endpoints[0], &HttpResponse::new(200, body), &m, Duration::ZERO);
        assert_eq!(d.ids_for("/products/{id}").unwrap().len(), 2);
    }

    #[test]
    fn singulars() {
        assert_eq!(singular("users"), "user");
        assert_eq!(singular("categories"), "category");
        assert_eq!(singular("boxes"), "box");
        assert_eq!(singular("status"), "status");
        assert_eq!(singular("user"), "user");
    }
}
