//! Derived body fields: values computed from the rest of the payload by
//! registered transforms, applied in ascending order levels.

use std::collections::{BTreeMap, BTreeSet};
use std::path::Path;
use std::sync::Arc;

use base64::engine::general_purpose::STANDARD as B64;
use base64::Engine as _;
use hmac::{Hmac, KeyInit, Mac};
use serde::Deserialize;
use sha2::Sha256;
use thiserror::Error;

use crate::auth::ConfigFormat;
use crate::model::JsonValue;

/// `(param-name, serialized payload, endpoint path) -> replacement`.
pub type TransformFn = Arc<dyn Fn(&str, &str, &str) -> Result<String, String> + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DerivedContext {
    BodyPayload,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct DerivedParamRule {
    pub name: String,
    pub transform: String,
    pub context: DerivedContext,
    /// Endpoint paths the rule is limited to; `None` means every endpoint.
    pub endpoints: Option<BTreeSet<String>>,
    pub order: u32,
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum DerivedError {
    #[error("cannot read derived-params file `{path}`: {message}")]
    Io { path: String, message: String },
    #[error("derived-params file `{path}`: {message}")]
    Parse { path: String, message: String },
    #[error("derived param `{param}` uses unregistered transform `{transform}`")]
    UnknownTransform { param: String, transform: String },
    #[error("transform `{transform}` failed on `{param}`: {message}")]
    Transform { param: String, transform: String, message: String },
}

pub const MOCK_CIPHER_SECRET: &str = "apifuzz-mock-master";
pub const MOCK_SIGNING_SECRET: &str = "apifuzz-mock-signing";

/// Named transforms available to rules.
#[derive(Clone, Default)]
pub struct TransformRegistry {
    fns: BTreeMap<String, TransformFn>,
}

impl std::fmt::Debug for TransformRegistry {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_set().entries(self.fns.keys()).finish()
    }
}

fn field_text(payload: &serde_json::Value, name: &str) -> String {
    match payload.get(name) {
        Some(serde_json::Value::String(s)) => s.clone(),
        Some(serde_json::Value::Null) | None => String::new(),
        Some(other) => other.to_string(),
    }
}

fn parse_payload(text: &str) -> Result<serde_json::Value, String> {
    serde_json::from_str(text).map_err(|e| format!("payload is not JSON: {e}"))
}

pub fn xor_bytes(data: &[u8], key: &[u8]) -> Vec<u8> {
    if key.is_empty() {
        return data.to_vec();
    }
    data.iter().zip(key.iter().cycle()).map(|(d, k)| d ^ k).collect()
}

pub fn xor_encrypt(plain: &str, key: &str) -> String {
    B64.encode(xor_bytes(plain.as_bytes(), key.as_bytes()))
}

pub fn xor_decrypt(cipher: &str, key: &str) -> Option<String> {
    let raw = B64.decode(cipher).ok()?;
    String::from_utf8(xor_bytes(&raw, key.as_bytes())).ok()
}

/// Hex HMAC-SHA256 of `message`.
pub fn keyed_digest(secret: &str, message: &str) -> String {
    let mut mac = <Hmac<Sha256> as KeyInit>::new_from_slice(secret.as_bytes()).expect("any key length");
    mac.update(message.as_bytes());
    hex::encode(mac.finalize().into_bytes())
}

/// Text a signature covers: every other top-level field, sorted by name.
pub fn signing_text(payload: &serde_json::Value, excluded: &str) -> String {
    let Some(map) = payload.as_object() else {
        return String::new();
    };
    let mut keys: Vec<&String> = map.keys().filter(|k| *k != excluded).collect();
    keys.sort();
    keys.iter()
        .map(|k| format!("{k}={}", field_text(payload, k)))
        .collect::<Vec<_>>()
        .join("&")
}

impl TransformRegistry {
    pub fn empty() -> TransformRegistry {
        TransformRegistry::default()
    }

    /// `identity`, `base64`, `keyed-digest`, `xor-cipher` and `xor-session`.
    pub fn with_defaults(cipher_secret: &str, signing_secret: &str) -> TransformRegistry {
        let mut r = TransformRegistry::empty();
        r.register("identity", |name, payload, _| Ok(field_text(&parse_payload(payload)?, name)));
        r.register("base64", |name, payload, _| Ok(B64.encode(field_text(&parse_payload(payload)?, name))));
        let signing = signing_secret.to_string();
        r.register("keyed-digest", move |name, payload, _| {
            Ok(keyed_digest(&signing, &signing_text(&parse_payload(payload)?, name)))
        });
        let master = cipher_secret.to_string();
        r.register("xor-cipher", move |name, payload, _| {
            Ok(xor_encrypt(&field_text(&parse_payload(payload)?, name), &master))
        });
        // Encrypts with the payload's plain `key` value, so it must share
        // an order level with the rule that encrypts `key`.
        r.register("xor-session", |name, payload, _| {
            let p = parse_payload(payload)?;
            Ok(xor_encrypt(&field_text(&p, name), &field_text(&p, "key")))
        });
        r
    }

    pub fn register(
        &mut self,
        name: &str,
        f: impl Fn(&str, &str, &str) -> Result<String, String> + Send + Sync + 'static,
    ) {
        self.fns.insert(name.to_string(), Arc::new(f));
    }

    pub fn get(&self, name: &str) -> Option<&TransformFn> {
        self.fns.get(name)
    }

    /// Fails on the first rule naming an unregistered transform.
    pub fn check(&self, rules: &[DerivedParamRule]) -> Result<(), DerivedError> {
        match rules.iter().find(|r| !self.fns.contains_key(&r.transform)) {
            Some(r) => Err(DerivedError::UnknownTransform {
                param: r.name.clone(),
                transform: r.transform.clone(),
            }),
            None => Ok(()),
        }
    }
}

/// Rules plus the registry they were checked against.
#[derive(Debug, Clone)]
pub struct DerivedParams {
    rules: Vec<DerivedParamRule>,
    registry: TransformRegistry,
}

impl DerivedParams {
    pub fn new(mut rules: Vec<DerivedParamRule>, registry: TransformRegistry) -> Result<DerivedParams, DerivedError> {
        registry.check(&rules)?;
        rules.sort_by_key(|r| r.order);
        Ok(DerivedParams { rules, registry })
    }

    pub fn rules(&self) -> &[DerivedParamRule] {
        &self.rules
    }

    pub fn apply(&self, payload: &JsonValue, endpoint_path: &str) -> Result<JsonValue, DerivedError> {
        apply_derived_params(payload, &self.rules, &self.registry, endpoint_path)
    }
}

/// Replaces each matching top-level field by its transform's output. All
/// rules of one order level see the same payload; later levels see the
/// outputs of earlier ones.
pub fn apply_derived_params(
    payload: &JsonValue,
    rules: &[DerivedParamRule],
    registry: &TransformRegistry,
    endpoint_path: &str,
) -> Result<JsonValue, DerivedError> {
    let mut current = payload.clone();
    let levels: BTreeSet<u32> = rules.iter().map(|r| r.order).collect();
    for level in levels {
        let JsonValue::Object(fields) = &current else {
            return Ok(current);
        };
        let snapshot = current.to_json_string();
        let mut outputs = Vec::new();
        for rule in rules.iter().filter(|r| r.order == level) {
            let in_scope = rule.endpoints.as_ref().is_none_or(|e| e.contains(endpoint_path));
            if !in_scope || !fields.contains_key(&rule.name) {
                continue;
            }
            let f = registry.get(&rule.transform).ok_or_else(|| DerivedError::UnknownTransform {
                param: rule.name.clone(),
                transform: rule.transform.clone(),
            })?;
            let value = f(&rule.name, &snapshot, endpoint_path).map_err(|message| DerivedError::Transform {
                param: rule.name.clone(),
                transform: rule.transform.clone(),
                message,
            })?;
            outputs.push((rule.name.clone(), value));
        }
        if let JsonValue::Object(fields) = &mut current {
            for (name, value) in outputs {
                fields.insert(name, JsonValue::String(value));
            }
        }
    }
    Ok(current)
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawFile {
    #[serde(default)]
    derived: Vec<RawRule>,
}

#[derive(Deserialize)]
#[serde(deny_unknown_fields)]
struct RawRule {
    name: String,
    transform: String,
    #[serde(default)]
    order: u32,
    #[serde(default)]
    endpoints: Option<BTreeSet<String>>,
}

/// Reads rules from a TOML or YAML file with a `derived` list.
pub fn parse_derived_rules(path: &Path) -> Result<Vec<DerivedParamRule>, DerivedError> {
    let shown = path.display().to_string();
    let text = std::fs::read_to_string(path).map_err(|e| DerivedError::Io {
        path: shown.clone(),
        message: e.to_string(),
    })?;
    parse_derived_rules_str(&text, ConfigFormat::from_path(path), &shown)
}

pub fn parse_derived_rules_str(text: &str, format: ConfigFormat, origin: &str) -> Result<Vec<DerivedParamRule>, DerivedError> {
    let err = |message: String| DerivedError::Parse {
        path: origin.to_string(),
        message,
    };
    let raw: RawFile = match format {
        ConfigFormat::Toml => toml::from_str(text).map_err(|e| err(e.to_string()))?,
        ConfigFormat::Yaml => serde_yaml::from_str(text).map_err(|e| err(e.to_string()))?,
        ConfigFormat::Detect => match toml::from_str(text) {
            Ok(r) => r,
            Err(_) => serde_yaml::from_str(text).map_err(|e| err(e.to_string()))?,
        },
    };
    Ok(raw
        .derived
        .into_iter()
        .map(|r| DerivedParamRule {
            name: r.name,
            transform: r.transform,
            context: DerivedContext::BodyPayload,
            endpoints: r.endpoints,
            order: r.order,
        })
        .collect())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use std::sync::Mutex;

    fn rule(name: &str, transform: &str, order: u32) -> DerivedParamRule {
        DerivedParamRule {
            name: name.into(),
            transform: transform.into(),
            context: DerivedContext::BodyPayload,
            endpoints: None,
            order,
        }
    }

    fn payload() -> JsonValue {
        JsonValue::from_json_str(r#"{"key":"k1","data":"{\"card\":\"4111\"}","sign":"","other":1}"#).unwrap()
    }

    fn registry() -> TransformRegistry {
        TransformRegistry::with_defaults(MOCK_CIPHER_SECRET, MOCK_SIGNING_SECRET)
    }

    #[test]
    fn empty_rules_are_identity() {
        assert_eq!(apply_derived_params(&payload(), &[], &registry(), "/x").unwrap(), payload());
    }

    #[test]
    fn sign_sees_transformed_key_and_data() {
        let rules = [rule("key", "xor-cipher", 0), rule("data", "xor-session", 0), rule("sign", "keyed-digest", 1)];
        let out = apply_derived_params(&payload(), &rules, &registry(), "/x").unwrap();
        let json: serde_json::Value = serde_json::from_str(&out.to_json_string()).unwrap();
        let key = xor_decrypt(json["key"].as_str().unwrap(), MOCK_CIPHER_SECRET).unwrap();
        assert_eq!(key, "k1");
        assert_eq!(xor_decrypt(json["data"].as_str().unwrap(), &key).unwrap(), r#"{"card":"4111"}"#);
        assert_eq!(json["sign"], keyed_digest(MOCK_SIGNING_SECRET, &signing_text(&json, "sign")));
    }

    #[test]
    fn unregistered_transform_is_rejected_upfront() {
        let e = DerivedParams::new(vec![rule("sign", "rsa", 0)], registry()).unwrap_err();
        assert!(matches!(e, DerivedError::UnknownTransform { .. }));
    }

    #[test]
    fn scoped_rules_skip_other_endpoints() {
        let mut r = rule("key", "base64", 0);
        r.endpoints = Some(BTreeSet::from(["/a".to_string()]));
        let out = apply_derived_params(&payload(), &[r], &registry(), "/b").unwrap();
        assert_eq!(out, payload());
    }

    #[test]
    fn rules_file_parses() {
        let text = "[[derived]]\nname = \"key\"\ntransform = \"xor-cipher\"\n\n[[derived]]\nname = \"sign\"\ntransform = \"keyed-digest\"\norder = 1\n";
        let rules = parse_derived_rules_str(text, ConfigFormat::Toml, "d.toml").unwrap();
        assert_eq!(rules, vec![rule("key", "xor-cipher", 0), rule("sign", "keyed-digest", 1)]);
        let yaml = "derived:\n  - {name: key, transform: xor-cipher}\n  - {name: sign, transform: keyed-digest, order: 1}\n";
        assert_eq!(parse_derived_rules_str(yaml, ConfigFormat::Yaml, "d.yaml").unwrap(), rules);
    }

    proptest! {
        // Transforms at order k observe all outputs of lower orders and
        // none of their own level.
        #[test]
        fn levels_observe_lower_outputs(orders in proptest::collection::vec(0u32..4, 1..6)) {
            let seen: Arc<Mutex<Vec<(String, serde_json::Value)>>> = Arc::default();
            let mut reg = TransformRegistry::empty();
            let s = seen.clone();
            reg.register("record", move |name, payload, _| {
                s.lock().unwrap().push((name.to_string(), serde_json::from_str(payload).unwrap()));
                Ok(format!("out-{name}"))
            });
            let rules: Vec<_> = orders.iter().enumerate().map(|(i, o)| rule(&format!("f{i}"), "record", *o)).collect();
            let mut fields = indexmap::IndexMap::new();
            for i in 0..orders.len() {
                fields.insert(format!("f{i}"), JsonValue::string("in"));
            }
            apply_derived_params(&JsonValue::Object(fields), &rules, &reg, "/p").unwrap();
            for (name, snapshot) in seen.lock().unwrap().iter() {
                let me: usize = name[1..].parse().unwrap();
                for (j, o) in orders.iter().enumerate() {
                    let expected = if *o < orders[me] { format!("out-f{j}") } else { "in".to_string() };
                    prop_assert_eq!(snapshot[format!("f{j}")].as_str().unwrap(), expected);
                }
            }
        }
    }
}
