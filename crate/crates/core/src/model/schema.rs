use serde::Serialize;

use super::value::JsonValue;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize)]
#[serde(rename_all = "camelCase")]
pub enum CompositeKind {
    OneOf,
    AnyOf,
    AllOf,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct FieldSchema {
    pub name: String,
    pub schema: ValueSchema,
    pub required: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub enum SchemaKind {
    String,
    Integer,
    Number,
    Boolean,
    Array(Box<ValueSchema>),
    Object(Vec<FieldSchema>),
    Composite(CompositeKind, Vec<ValueSchema>),
    /// No usable type information (untyped, dangling or cut recursion).
    Any,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize)]
pub struct Constraints {
    pub pattern: Option<String>,
    pub minimum: Option<f64>,
    pub maximum: Option<f64>,
    pub exclusive_minimum: bool,
    pub exclusive_maximum: bool,
    pub min_length: Option<usize>,
    pub max_length: Option<usize>,
    pub min_items: Option<usize>,
    pub max_items: Option<usize>,
    pub enum_values: Vec<JsonValue>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValueSchema {
    pub kind: SchemaKind,
    pub constraints: Constraints,
    pub nullable: bool,
    pub format: Option<String>,
    pub examples: Vec<JsonValue>,
}

/// One way a value fails its schema, localized by JSON pointer.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Mismatch {
    Type {
        path: String,
        found: &'static str,
        allowed: Vec<&'static str>,
    },
    MissingRequired {
        path: String,
        fields: Vec<String>,
    },
}

impl Mismatch {
    pub fn path(&self) -> &str {
        match self {
            Mismatch::Type { path, .. } | Mismatch::MissingRequired { path, .. } => path,
        }
    }

    pub fn kind_label(&self) -> &'static str {
        match self {
            Mismatch::Type { .. } => "validation.response.body.schema.type",
            Mismatch::MissingRequired { .. } => "validation.response.body.schema.required",
        }
    }

    pub fn describe(&self) -> String {
        match self {
            Mismatch::Type { path, found, allowed } => {
                let allowed: Vec<String> = allowed.iter().map(|a| format!("\"{a}\"")).collect();
                format!(
                    "[Path '{path}'] Instance type ({found}) does not match any allowed primitive type (allowed: [{}])",
                    allowed.join(",")
                )
            }
            Mismatch::MissingRequired { path, fields } => {
                let fields: Vec<String> = fields.iter().map(|f| format!("\"{f}\"")).collect();
                format!(
                    "[Path '{path}'] Object has missing required properties ([{}])",
                    fields.join(",")
                )
            }
        }
    }
}

impl ValueSchema {
    pub fn new(kind: SchemaKind) -> ValueSchema {
        ValueSchema {
            kind,
            constraints: Constraints::default(),
            nullable: false,
            format: None,
            examples: Vec::new(),
        }
    }

    pub fn string() -> ValueSchema {
        ValueSchema::new(SchemaKind::String)
    }

    pub fn integer() -> ValueSchema {
        ValueSchema::new(SchemaKind::Integer)
    }

    pub fn object(fields: Vec<FieldSchema>) -> ValueSchema {
        ValueSchema::new(SchemaKind::Object(fields))
    }

    pub fn with_enum(mut self, values: Vec<JsonValue>) -> ValueSchema {
        self.constraints.enum_values = values;
        self
    }

    pub fn with_examples(mut self, examples: Vec<JsonValue>) -> ValueSchema {
        self.examples = examples;
        self
    }

    pub fn type_name(&self) -> &'static str {
        match self.kind {
            SchemaKind::String => "string",
            SchemaKind::Integer => "integer",
            SchemaKind::Number => "number",
            SchemaKind::Boolean => "boolean",
            SchemaKind::Array(_) => "array",
            SchemaKind::Object(_) => "object",
            SchemaKind::Composite(..) => "composite",
            SchemaKind::Any => "any",
        }
    }

    pub fn fields(&self) -> &[FieldSchema] {
        match &self.kind {
            SchemaKind::Object(f) => f,
            _ => &[],
        }
    }

    pub fn field(&self, name: &str) -> Option<&FieldSchema> {
        self.fields().iter().find(|f| f.name == name)
    }

    /// Object schema obtained by merging `allOf` branches (later fields win);
    /// other schemas are returned unchanged.
    pub fn flattened(&self) -> ValueSchema {
        match &self.kind {
            SchemaKind::Composite(CompositeKind::AllOf, branches) => {
                let mut fields: Vec<FieldSchema> = Vec::new();
                let mut examples = self.examples.clone();
                for b in branches {
                    let b = b.flattened();
                    examples.extend(b.examples.iter().cloned());
                    match b.kind {
                        SchemaKind::Object(bf) => {
                            for f in bf {
                                if let Some(existing) = fields.iter_mut().find(|e| e.name == f.name) {
                                    *existing = f;
                                } else {
                                    fields.push(f);
                                }
                            }
                        }
                        _ if branches.len() == 1 => return b,
                        _ => {}
                    }
                }
                ValueSchema {
                    kind: SchemaKind::Object(fields),
                    constraints: self.constraints.clone(),
                    nullable: self.nullable,
                    format: self.format.clone(),
                    examples,
                }
            }
            _ => self.clone(),
        }
    }

    /// Type-level conformance: every present value has an allowed type.
    /// Missing required fields are not checked (partial examples are fine).
    pub fn accepts_type(&self, value: &JsonValue) -> bool {
        let mut out = Vec::new();
        self.collect_mismatches(value, String::new(), false, &mut out);
        out.is_empty()
    }

    /// Full response-body validation: type mismatches and missing required
    /// fields, with JSON pointer paths.
    pub fn validate(&self, value: &JsonValue) -> Vec<Mismatch> {
        let mut out = Vec::new();
        self.collect_mismatches(value, String::new(), true, &mut out);
        out
    }

    fn allowed_types(&self) -> Vec<&'static str> {
        let mut v = vec![self.type_name()];
        if self.nullable {
            v.push("null");
        }
        v
    }

    fn collect_mismatches(&self, value: &JsonValue, path: String, required: bool, out: &mut Vec<Mismatch>) {
        if value.is_undefined() {
            return;
        }
        if value.is_null() {
            if !self.nullable && !matches!(self.kind, SchemaKind::Any) {
                out.push(Mismatch::Type {
                    path,
                    found: "null",
                    allowed: self.allowed_types(),
                });
            }
            return;
        }
        let type_error = |out: &mut Vec<Mismatch>, path: String| {
            out.push(Mismatch::Type {
                path,
                found: value.type_name(),
                allowed: self.allowed_types(),
            })
        };
        match &self.kind {
            SchemaKind::Any => {}
            SchemaKind::String => {
                if !matches!(value, JsonValue::String(_)) {
                    type_error(out, path);
                }
            }
            SchemaKind::Boolean => {
                if !matches!(value, JsonValue::Bool(_)) {
                    type_error(out, path);
                }
            }
            SchemaKind::Number => {
                if !matches!(value, JsonValue::Number(_)) {
                    type_error(out, path);
                }
            }
            SchemaKind::Integer => match value {
                JsonValue::Number(n) if n.is_integral() => {}
                _ => type_error(out, path),
            },
            SchemaKind::Array(item) => match value {
                JsonValue::Array(items) => {
                    for (i, v) in items.iter().enumerate() {
                        item.collect_mismatches(v, format!("{path}/{i}"), required, out);
                    }
                }
                _ => type_error(out, path),
            },
            SchemaKind::Object(fields) => match value {
                JsonValue::Object(map) => {
                    let missing: Vec<String> = fields
                        .iter()
                        .filter(|f| f.required && map.get(&f.name).is_none_or(JsonValue::is_undefined))
                        .map(|f| f.name.clone())
                        .collect();
                    if required && !missing.is_empty() {
                        out.push(Mismatch::MissingRequired {
                            path: if path.is_empty() { "/".into() } else { path.clone() },
                            fields: missing,
                        });
                    }
                    for f in fields {
                        if let Some(v) = map.get(&f.name) {
                            let child = format!("{path}/{}", f.name.replace('~', "~0").replace('/', "~1"));
                            f.schema.collect_mismatches(v, child, required, out);
                        }
                    }
                }
                _ => type_error(out, path),
            },
            SchemaKind::Composite(CompositeKind::AllOf, _) => {
                self.flattened().collect_mismatches(value, path, required, out);
            }
            SchemaKind::Composite(_, branches) => {
                let mut best: Option<Vec<Mismatch>> = None;
                for b in branches {
                    let mut errs = Vec::new();
                    b.collect_mismatches(value, path.clone(), required, &mut errs);
                    if errs.is_empty() {
                        return;
                    }
                    if best.as_ref().is_none_or(|b| errs.len() < b.len()) {
                        best = Some(errs);
                    }
                }
                out.extend(best.unwrap_or_default());
            }
        }
    }
}
