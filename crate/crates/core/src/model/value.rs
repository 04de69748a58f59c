//! Tri-state JSON values.
//!
//! Unlike `serde_json::Value`, [`JsonValue`] can represent a field that is
//! *absent* ([`JsonValue::Undefined`]) separately from a field that is
//! explicitly `null`. The distinction matters for partial-update endpoints
//! (JSON merge patch uses `null` to delete a field and absence to keep it).

use std::fmt;

use indexmap::IndexMap;
use serde::de::{self, MapAccess, SeqAccess, Visitor};
use serde::ser::{SerializeMap, SerializeSeq};
use serde::{Deserialize, Deserializer, Serialize, Serializer};

use super::pointer::BodyPointer;

/// A JSON number kept as its decimal text, so that values survive a
/// parse/emit cycle without floating point drift.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct Number(String);

impl Number {
    /// Accepts any text that is a valid JSON number literal.
    pub fn parse(text: &str) -> Option<Number> {
        let text = text.trim();
        match serde_json::from_str::<serde_json::Value>(text) {
            Ok(serde_json::Value::Number(_)) => Some(Number(text.to_string())),
            _ => None,
        }
    }

    pub fn from_i64(v: i64) -> Number {
        Number(v.to_string())
    }

    /// Non-finite values cannot be represented in JSON and map to zero.
    pub fn from_f64(v: f64) -> Number {
        if v.is_finite() {
            Number(format!("{v}"))
        } else {
            Number("0".to_string())
        }
    }

    pub fn as_str(&self) -> &str {
        &self.0
    }

    pub fn as_f64(&self) -> f64 {
        self.0.parse().unwrap_or(f64::NAN)
    }

    pub fn as_i64(&self) -> Option<i64> {
        self.0.parse().ok()
    }

    /// True when the literal denotes an integral value (`3`, `-7`, `2.0`, `1e2`).
    pub fn is_integral(&self) -> bool {
        if self.0.parse::<i128>().is_ok() {
            return true;
        }
        let f = self.as_f64();
        f.is_finite() && f.fract() == 0.0
    }
}

impl fmt::Display for Number {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub enum JsonValue {
    #[default]
    Undefined,
    Null,
    Bool(bool),
    Number(Number),
    String(String),
    Array(Vec<JsonValue>),
    Object(IndexMap<String, JsonValue>),
}

static UNDEFINED: JsonValue = JsonValue::Undefined;

impl JsonValue {
    pub fn string(s: impl Into<String>) -> JsonValue {
        JsonValue::String(s.into())
    }

    pub fn int(v: i64) -> JsonValue {
        JsonValue::Number(Number::from_i64(v))
    }

    pub fn object<K: Into<String>>(fields: impl IntoIterator<Item = (K, JsonValue)>) -> JsonValue {
        JsonValue::Object(fields.into_iter().map(|(k, v)| (k.into(), v)).collect())
    }

    pub fn is_undefined(&self) -> bool {
        matches!(self, JsonValue::Undefined)
    }

    pub fn is_null(&self) -> bool {
        matches!(self, JsonValue::Null)
    }

    pub fn as_str(&self) -> Option<&str> {
        match self {
            JsonValue::String(s) => Some(s),
            _ => None,
        }
    }

    pub fn as_object(&self) -> Option<&IndexMap<String, JsonValue>> {
        match self {
            JsonValue::Object(m) => Some(m),
            _ => None,
        }
    }

    pub fn as_array(&self) -> Option<&Vec<JsonValue>> {
        match self {
            JsonValue::Array(a) => Some(a),
            _ => None,
        }
    }

    /// Field lookup on objects. Missing fields and non-objects yield `Undefined`.
    pub fn get(&self, key: &str) -> &JsonValue {
        match self {
            JsonValue::Object(m) => m.get(key).unwrap_or(&UNDEFINED),
            _ => &UNDEFINED,
        }
    }

    /// Walks `pointer` through objects (by key) and arrays (by index).
    /// Returns `None` if any segment is missing or the target is `Undefined`.
    pub fn pointer(&self, pointer: &BodyPointer) -> Option<&JsonValue> {
        let mut cur = self;
        for seg in pointer.segments() {
            cur = match cur {
                JsonValue::Object(m) => m.get(seg.as_str())?,
                JsonValue::Array(a) => a.get(seg.parse::<usize>().ok()?)?,
                _ => return None,
            };
        }
        if cur.is_undefined() {
            None
        } else {
            Some(cur)
        }
    }

    /// JSON type name as used in validation messages.
    pub fn type_name(&self) -> &'static str {
        match self {
            JsonValue::Undefined => "undefined",
            JsonValue::Null => "null",
            JsonValue::Bool(_) => "boolean",
            JsonValue::Number(n) if n.is_integral() => "integer",
            JsonValue::Number(_) => "number",
            JsonValue::String(_) => "string",
            JsonValue::Array(_) => "array",
            JsonValue::Object(_) => "object",
        }
    }

    /// Removes every `Undefined` object field, recursively. Array elements
    /// that are `Undefined` become `Null`, matching how they serialize.
    pub fn strip_undefined(&self) -> JsonValue {
        match self {
            JsonValue::Array(a) => JsonValue::Array(
                a.iter()
                    .map(|v| if v.is_undefined() { JsonValue::Null } else { v.strip_undefined() })
                    .collect(),
            ),
            JsonValue::Object(m) => JsonValue::Object(
                m.iter()
                    .filter(|(_, v)| !v.is_undefined())
                    .map(|(k, v)| (k.clone(), v.strip_undefined()))
                    .collect(),
            ),
            other => other.clone(),
        }
    }

    /// Compact JSON text. Object fields holding `Undefined` are omitted,
    /// `Null` fields are written as `null`. A top-level `Undefined` renders
    /// as the empty string (no payload at all).
    pub fn to_json_string(&self) -> String {
        let mut out = String::new();
        if !self.is_undefined() {
            write_json(self, &mut out);
        }
        out
    }

    pub fn from_json_str(text: &str) -> Result<JsonValue, serde_json::Error> {
        let v: serde_json::Value = serde_json::from_str(text)?;
        Ok(JsonValue::from(&v))
    }

    /// Canonical string form used when a value is substituted into a path,
    /// query or header slot.
    pub fn render_scalar(&self) -> String {
        match self {
            JsonValue::Undefined => String::new(),
            JsonValue::Null => "null".to_string(),
            JsonValue::Bool(b) => b.to_string(),
            JsonValue::Number(n) => n.to_string(),
            JsonValue::String(s) => s.clone(),
            other => other.to_json_string(),
        }
    }

    /// Key used to order and compare values in coverage targets.
    pub fn canonical_key(&self) -> String {
        match self {
            JsonValue::String(s) => s.clone(),
            other => other.to_json_string(),
        }
    }
}

fn write_json(v: &JsonValue, out: &mut String) {
    match v {
        JsonValue::Undefined | JsonValue::Null => out.push_str("null"),
        JsonValue::Bool(b) => out.push_str(if *b { "true" } else { "false" }),
        JsonValue::Number(n) => out.push_str(n.as_str()),
        JsonValue::String(s) => {
            out.push_str(&serde_json::to_string(s).expect("string serialization is infallible"))
        }
        JsonValue::Array(items) => {
            out.push('[');
            for (i, item) in items.iter().enumerate() {
                if i > 0 {
                    out.push(',');
                }
                write_json(item, out);
            }
            out.push(']');
        }
        JsonValue::Object(fields) => {
            out.push('{');
            let mut first = true;
            for (k, val) in fields {
                if val.is_undefined() {
                    continue;
                }
                if !first {
                    out.push(',');
                }
                first = false;
                out.push_str(&serde_json::to_string(k).expect("string serialization is infallible"));
                out.push(':');
                write_json(val, out);
            }
            out.push('}');
        }
    }
}

impl fmt::Display for JsonValue {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_json_string())
    }
}

impl From<&serde_json::Value> for JsonValue {
    fn from(v: &serde_json::Value) -> Self {
        match v {
            serde_json::Value::Null => JsonValue::Null,
            serde_json::Value::Bool(b) => JsonValue::Bool(*b),
            serde_json::Value::Number(n) => JsonValue::Number(Number(n.to_string())),
            serde_json::Value::String(s) => JsonValue::String(s.clone()),
            serde_json::Value::Array(a) => JsonValue::Array(a.iter().map(JsonValue::from).collect()),
            serde_json::Value::Object(m) => {
                JsonValue::Object(m.iter().map(|(k, v)| (k.clone(), JsonValue::from(v))).collect())
            }
        }
    }
}

impl From<&str> for JsonValue {
    fn from(s: &str) -> Self {
        JsonValue::String(s.to_string())
    }
}

impl From<bool> for JsonValue {
    fn from(b: bool) -> Self {
        JsonValue::Bool(b)
    }
}

impl From<i64> for JsonValue {
    fn from(v: i64) -> Self {
        JsonValue::int(v)
    }
}

// Serde support is used for YAML plan files. Numbers go through the native
// integer types when they fit, otherwise through f64 (whose Display is the
// shortest round-tripping form).
impl Serialize for Number {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        if let Ok(i) = self.0.parse::<i64>() {
            s.serialize_i64(i)
        } else if let Ok(u) = self.0.parse::<u64>() {
            s.serialize_u64(u)
        } else {
            s.serialize_f64(self.as_f64())
        }
    }
}

impl Serialize for JsonValue {
    fn serialize<S: Serializer>(&self, s: S) -> Result<S::Ok, S::Error> {
        match self {
            JsonValue::Undefined | JsonValue::Null => s.serialize_unit(),
            JsonValue::Bool(b) => s.serialize_bool(*b),
            JsonValue::Number(n) => n.serialize(s),
            JsonValue::String(v) => s.serialize_str(v),
            JsonValue::Array(items) => {
                let mut seq = s.serialize_seq(Some(items.len()))?;
                for item in items {
                    seq.serialize_element(item)?;
                }
                seq.end()
            }
            JsonValue::Object(fields) => {
                let present: Vec<_> = fields.iter().filter(|(_, v)| !v.is_undefined()).collect();
                let mut map = s.serialize_map(Some(present.len()))?;
                for (k, v) in present {
                    map.serialize_entry(k, v)?;
                }
                map.end()
            }
        }
    }
}

struct JsonValueVisitor;

impl<'de> Visitor<'de> for JsonValueVisitor {
    type Value = JsonValue;

    fn expecting(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str("any JSON-compatible value")
    }

    fn visit_unit<E: de::Error>(self) -> Result<JsonValue, E> {
        Ok(JsonValue::Null)
    }

    fn visit_none<E: de::Error>(self) -> Result<JsonValue, E> {
        Ok(JsonValue::Null)
    }

    fn visit_some<D: Deserializer<'de>>(self, d: D) -> Result<JsonValue, D::Error> {
        d.deserialize_any(self)
    }

    fn visit_bool<E: de::Error>(self, v: bool) -> Result<JsonValue, E> {
        Ok(JsonValue::Bool(v))
    }

    fn visit_i64<E: de::Error>(self, v: i64) -> Result<JsonValue, E> {
        Ok(JsonValue::int(v))
    }

    fn visit_u64<E: de::Error>(self, v: u64) -> Result<JsonValue, E> {
        Ok(JsonValue::Number(Number(v.to_string())))
    }

    fn visit_f64<E: de::Error>(self, v: f64) -> Result<JsonValue, E> {
        Ok(JsonValue::Number(Number::from_f64(v)))
    }

    fn visit_str<E: de::Error>(self, v: &str) -> Result<JsonValue, E> {
        Ok(JsonValue::String(v.to_string()))
    }

    fn visit_string<E: de::Error>(self, v: String) -> Result<JsonValue, E> {
        Ok(JsonValue::String(v))
    }

    fn visit_seq<A: SeqAccess<'de>>(self, mut seq: A) -> Result<JsonValue, A::Error> {
        let mut items = Vec::new();
        while let Some(item) = seq.next_element()? {
            items.push(item);
        }
        Ok(JsonValue::Array(items))
    }

    fn visit_map<A: MapAccess<'de>>(self, mut map: A) -> Result<JsonValue, A::Error> {
        let mut fields = IndexMap::new();
        while let Some((k, v)) = map.next_entry::<String, JsonValue>()? {
            fields.insert(k, v);
        }
        Ok(JsonValue::Object(fields))
    }
}

impl<'de> Deserialize<'de> for JsonValue {
    fn deserialize<D: Deserializer<'de>>(d: D) -> Result<JsonValue, D::Error> {
        d.deserialize_any(JsonValueVisitor)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn undefined_field_is_omitted_null_is_kept() {
        let v = JsonValue::object([("x", JsonValue::Undefined)]);
        assert_eq!(v.to_json_string(), "{}");
        let v = JsonValue::object([("x", JsonValue::Null)]);
        assert_eq!(v.to_json_string(), r#"{"x":null}"#);
    }

    #[test]
    fn numbers_keep_their_text() {
        let v = JsonValue::from_json_str(r#"{"big":123456789012345678901234567890,"f":0.1}"#).unwrap();
        assert_eq!(v.to_json_string(), r#"{"big":123456789012345678901234567890,"f":0.1}"#);
    }

    #[test]
    fn pointer_walks_objects_and_arrays() {
        let v = JsonValue::from_json_str(r#"{"data":{"items":[{"id":"a"},{"id":"b"}]}}"#).unwrap();
        let p = BodyPointer::parse("/data/items/1/id");
        assert_eq!(v.pointer(&p), Some(&JsonValue::string("b")));
        assert_eq!(v.pointer(&BodyPointer::parse("/data/nope")), None);
    }

    #[test]
    fn yaml_round_trip_keeps_null_and_drops_undefined() {
        let v = JsonValue::object([
            ("a", JsonValue::Null),
            ("b", JsonValue::Undefined),
            ("c", JsonValue::int(3)),
        ]);
        let text = serde_yaml::to_string(&v).unwrap();
        let back: JsonValue = serde_yaml::from_str(&text).unwrap();
        assert_eq!(back, v.strip_undefined());
    }

    fn arb_value() -> impl Strategy<Value = JsonValue> {
        let leaf = prop_oneof![
            Just(JsonValue::Undefined),
            Just(JsonValue::Null),
            any::<bool>().prop_map(JsonValue::Bool),
            any::<i64>().prop_map(JsonValue::int),
            (-1.0e6f64..1.0e6).prop_map(|f| JsonValue::Number(Number::from_f64(f))),
            "[a-z\\\\\"\u{e9} ]{0,8}".prop_map(JsonValue::String),
        ];
        leaf.prop_recursive(4, 32, 6, |inner| {
            prop_oneof![
                prop::collection::vec(inner.clone(), 0..5).prop_map(JsonValue::Array),
                prop::collection::vec(("[a-z]{1,4}", inner), 0..5)
                    .prop_map(|kv| JsonValue::Object(kv.into_iter().collect())),
            ]
        })
    }

    proptest! {
        #[test]
        fn serialize_then_parse_equals_value_without_undefined(v in arb_value()) {
            prop_assume!(!v.is_undefined());
            let parsed = JsonValue::from_json_str(&v.to_json_string()).unwrap();
            prop_assert_eq!(parsed, v.strip_undefined());
        }
    }
}
