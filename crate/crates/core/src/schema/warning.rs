use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Severity {
    Info,
    Warn,
}

/// Identifiers for every warning class the loader, validator and model
/// builder can emit.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum WarningCode {
    UnknownVersion,
    UnreadableRef,
    UnparseableRef,
    InvalidRef,
    DanglingRef,
    MisplacedKey,
    UnknownKey,
    ExampleTypeMismatch,
    UnknownLinkOperation,
    DroppedLink,
    UnsupportedLinkExpression,
    UnsupportedParameter,
    MissingPathParameter,
    RecursiveSchema,
    InvalidEnum,
}

impl WarningCode {
    pub fn as_str(self) -> &'static str {
        match self {
            WarningCode::UnknownVersion => "unknown-version",
            WarningCode::UnreadableRef => "unreadable-ref",
            WarningCode::UnparseableRef => "unparseable-ref",
            WarningCode::InvalidRef => "invalid-ref",
            WarningCode::DanglingRef => "dangling-ref",
            WarningCode::MisplacedKey => "misplaced-key",
            WarningCode::UnknownKey => "unknown-key",
            WarningCode::ExampleTypeMismatch => "example-type-mismatch",
            WarningCode::UnknownLinkOperation => "unknown-link-operation",
            WarningCode::DroppedLink => "dropped-link",
            WarningCode::UnsupportedLinkExpression => "unsupported-link-expression",
            WarningCode::UnsupportedParameter => "unsupported-parameter",
            WarningCode::MissingPathParameter => "missing-path-parameter",
            WarningCode::RecursiveSchema => "recursive-schema",
            WarningCode::InvalidEnum => "invalid-enum",
        }
    }
}

impl fmt::Display for WarningCode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct WarningLocation {
    pub document: String,
    /// JSON pointer inside the document.
    pub path: String,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SchemaWarning {
    pub code: WarningCode,
    pub location: WarningLocation,
    pub message: String,
    pub severity: Severity,
}

impl SchemaWarning {
    pub fn warn(code: WarningCode, document: &str, path: &str, message: impl Into<String>) -> SchemaWarning {
        SchemaWarning {
            code,
            location: WarningLocation {
                document: document.to_string(),
                path: path.to_string(),
            },
            message: message.into(),
            severity: Severity::Warn,
        }
    }

    pub fn info(code: WarningCode, document: &str, path: &str, message: impl Into<String>) -> SchemaWarning {
        SchemaWarning {
            severity: Severity::Info,
            ..SchemaWarning::warn(code, document, path, message)
        }
    }
}

impl fmt::Display for SchemaWarning {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Info => "info",
            Severity::Warn => "warn",
        };
        let path = if self.location.path.is_empty() { "/" } else { &self.location.path };
        write!(
            f,
            "[{sev}] {} at {}#{}: {}",
            self.code, self.location.document, path, self.message
        )
    }
}

/// Human readable, one warning per line.
pub fn render_text(warnings: &[SchemaWarning]) -> String {
    let mut out = String::new();
    for w in warnings {
        out.push_str(&w.to_string());
        out.push('\n');
    }
    out
}

pub fn render_json(warnings: &[SchemaWarning]) -> String {
    serde_json::to_string_pretty(warnings).expect("warnings always serialize")
}
