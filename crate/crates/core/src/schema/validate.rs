//! Checks for schema mistakes that editors accept silently but that make a
//! fuzzer ignore information: keys nested at the wrong level, examples of
//! the wrong type, links to unknown operations and dangling references.

use std::collections::BTreeSet;

use serde_json::Value;

use super::{collect_refs, escape_pointer_segment, SchemaGraph, SchemaWarning, WarningCode};

const VERBS: [&str; 8] = ["get", "put", "post", "delete", "options", "head", "patch", "trace"];

const PATH_ITEM_KEYS: [&str; 13] = [
    "get", "put", "post", "delete", "options", "head", "patch", "trace", "parameters", "summary",
    "description", "servers", "$ref",
];

const OPERATION_KEYS: [&str; 15] = [
    "tags", "summary", "description", "externalDocs", "operationId", "parameters", "requestBody",
    "responses", "callbacks", "deprecated", "security", "servers", "consumes", "produces", "schemes",
];

const RESPONSE_KEYS: [&str; 6] = ["description", "headers", "content", "links", "schema", "examples"];

const MEDIA_TYPE_KEYS: [&str; 4] = ["schema", "example", "examples", "encoding"];

/// Runs every check over the whole graph. Total: never fails, and the
/// returned list is sorted, so repeated calls give identical output.
pub fn validate_schema(graph: &SchemaGraph) -> Vec<SchemaWarning> {
    let mut v = Validator { graph, out: Vec::new() };
    v.check_structure();
    for doc in graph.nodes.keys() {
        let content = &graph.nodes[doc].content;
        v.check_examples(doc, content, "", None, 0);
    }
    v.check_links();
    v.check_refs();
    let mut out = v.out;
    out.sort();
    out.dedup();
    out
}

struct Validator<'a> {
    graph: &'a SchemaGraph,
    out: Vec<SchemaWarning>,
}

fn is_status_key(k: &str) -> bool {
    if k == "default" {
        return true;
    }
    let b = k.as_bytes();
    b.len() == 3
        && (b'1'..=b'5').contains(&b[0])
        && ((b[1].is_ascii_digit() && b[2].is_ascii_digit()) || (b[1] == b'X' && b[2] == b'X'))
}

fn is_extension(k: &str) -> bool {
    k.starts_with("x-")
}

impl Validator<'_> {
    fn warn(&mut self, code: WarningCode, doc: &str, path: &str, message: String) {
        self.out.push(SchemaWarning::warn(code, doc, path, message));
    }

    fn root_paths(&self) -> Option<&serde_json::Map<String, Value>> {
        self.graph.root_document().content.get("paths").and_then(Value::as_object)
    }

    fn check_structure(&mut self) {
        let root = self.graph.root.clone();
        let Some(paths) = self.root_paths() else { return };
        let paths = paths.clone();
        for (path, item) in &paths {
            let item_ptr = format!("/paths/{}", escape_pointer_segment(path));
            let Some(item) = item.as_object() else { continue };
            for (key, value) in item {
                let key_ptr = format!("{item_ptr}/{}", escape_pointer_segment(key));
                if !PATH_ITEM_KEYS.contains(&key.as_str()) && !is_extension(key) {
                    self.misplaced_or_unknown(&root, &key_ptr, key, &format!("path `{path}`"), "an operation");
                    continue;
                }
                if !VERBS.contains(&key.as_str()) {
                    continue;
                }
                let Some(op) = value.as_object() else { continue };
                let op_label = format!("{} {path}", key.to_uppercase());
                for (op_key, op_value) in op {
                    let op_key_ptr = format!("{key_ptr}/{}", escape_pointer_segment(op_key));
                    if !OPERATION_KEYS.contains(&op_key.as_str()) && !is_extension(op_key) {
                        self.misplaced_or_unknown(&root, &op_key_ptr, op_key, &op_label, "a response (status code)");
                    }
                    if op_key == "responses" {
                        self.check_responses(&root, &op_key_ptr, &op_label, op_value);
                    }
                }
            }
        }
    }

    fn misplaced_or_unknown(&mut self, doc: &str, ptr: &str, key: &str, owner: &str, belongs: &str) {
        let known_elsewhere = OPERATION_KEYS.contains(&key)
            || RESPONSE_KEYS.contains(&key)
            || MEDIA_TYPE_KEYS.contains(&key);
        if known_elsewhere {
            self.warn(
                WarningCode::MisplacedKey,
                doc,
                ptr,
                format!("`{key}` is declared directly under {owner} but belongs inside {belongs}; it will be ignored"),
            );
        } else {
            self.warn(
                WarningCode::UnknownKey,
                doc,
                ptr,
                format!("unknown key `{key}` under {owner} will be ignored"),
            );
        }
    }

    fn check_responses(&mut self, doc: &str, ptr: &str, op_label: &str, responses: &Value) {
        let Some(map) = responses.as_object() else { return };
        for (status, response) in map {
            let rptr = format!("{ptr}/{}", escape_pointer_segment(status));
            if is_extension(status) {
                continue;
            }
            if !is_status_key(status) {
                if RESPONSE_KEYS.contains(&status.as_str()) {
                    self.warn(
                        WarningCode::MisplacedKey,
                        doc,
                        &rptr,
                        format!(
                            "`{status}` is declared directly under `responses` of {op_label} instead of under a status code (e.g. '200'); it will be ignored"
                        ),
                    );
                } else {
                    self.warn(
                        WarningCode::UnknownKey,
                        doc,
                        &rptr,
                        format!("`{status}` under `responses` of {op_label} is not a status code"),
                    );
                }
                continue;
            }
            let Some((rdoc, resolved)) = self.graph.deref(doc, response) else { continue };
            let Some(obj) = resolved.as_object() else { continue };
            // Only report keys for inline responses; referenced ones are
            // reported at their own location.
            if rdoc != doc || response.get("$ref").is_some() {
                continue;
            }
            for (k, v) in obj {
                let kptr = format!("{rptr}/{}", escape_pointer_segment(k));
                if !RESPONSE_KEYS.contains(&k.as_str()) && !is_extension(k) {
                    self.misplaced_or_unknown(doc, &kptr, k, &format!("response {status} of {op_label}"), "a media type");
                }
                if k == "content" {
                    if let Some(media) = v.as_object() {
                        for (mt, body) in media {
                            let Some(body) = body.as_object() else { continue };
                            for bk in body.keys() {
                                if !MEDIA_TYPE_KEYS.contains(&bk.as_str()) && !is_extension(bk) {
                                    let bptr = format!(
                                        "{kptr}/{}/{}",
                                        escape_pointer_segment(mt),
                                        escape_pointer_segment(bk)
                                    );
                                    self.misplaced_or_unknown(
                                        doc,
                                        &bptr,
                                        bk,
                                        &format!("media type `{mt}` of response {status} of {op_label}"),
                                        "the response object",
                                    );
                                }
                            }
                        }
                    }
                }
            }
        }
    }

    fn check_examples(&mut self, doc: &str, node: &Value, path: &str, parent_key: Option<&str>, depth: usize) {
        if depth > 64 {
            return;
        }
        match node {
            Value::Object(map) => {
                let is_name_map = matches!(parent_key, Some("properties" | "examples" | "schemas" | "paths" | "content"));
                if !is_name_map {
                    self.check_node_examples(doc, node, path);
                }
                for (k, v) in map {
                    let child = format!("{path}/{}", escape_pointer_segment(k));
                    let key = if is_name_map { None } else { Some(k.as_str()) };
                    // An `example` value is data, not schema: never descend.
                    if !is_name_map && (k == "example" || (k == "examples" && v.is_array())) {
                        continue;
                    }
                    self.check_examples(doc, v, &child, key, depth + 1);
                }
            }
            Value::Array(items) => {
                for (i, v) in items.iter().enumerate() {
                    self.check_examples(doc, v, &format!("{path}/{i}"), None, depth + 1);
                }
            }
            _ => {}
        }
    }

    fn check_node_examples(&mut self, doc: &str, node: &Value, path: &str) {
        let looks_like_schema = ["type", "properties", "items", "enum"]
            .iter()
            .any(|k| node.get(*k).is_some());
        if let Some(schema) = node.get("schema").filter(|s| s.is_object()) {
            // Parameter, header or media type object.
            if let Some(ex) = node.get("example") {
                self.check_one(doc, schema, ex, &format!("{path}/example"));
            }
            if let Some(Value::Object(examples)) = node.get("examples") {
                for (name, ex) in examples {
                    let Some((_, ex)) = self.graph.deref(doc, ex) else { continue };
                    if let Some(value) = ex.get("value") {
                        let p = format!("{path}/examples/{}/value", escape_pointer_segment(name));
                        self.check_one(doc, schema, value, &p);
                    }
                }
            }
        } else if looks_like_schema {
            if let Some(ex) = node.get("example") {
                self.check_one(doc, node, ex, &format!("{path}/example"));
            }
            if let Some(Value::Array(examples)) = node.get("examples") {
                for (i, ex) in examples.iter().enumerate() {
                    self.check_one(doc, node, ex, &format!("{path}/examples/{i}"));
                }
            }
        }
    }

    fn check_one(&mut self, doc: &str, schema: &Value, example: &Value, path: &str) {
        if let Some(reason) = raw_mismatch(self.graph, doc, schema, example, 0) {
            self.warn(
                WarningCode::ExampleTypeMismatch,
                doc,
                path,
                format!("example {} {reason}; it will not be used", compact(example)),
            );
        }
    }

    fn check_links(&mut self) {
        let root = self.graph.root.clone();
        let Some(paths) = self.root_paths() else { return };
        let paths = paths.clone();
        let op_ids: BTreeSet<String> = paths
            .values()
            .filter_map(Value::as_object)
            .flat_map(|item| VERBS.iter().filter_map(move |v| item.get(*v)))
            .filter_map(|op| op.get("operationId").and_then(Value::as_str))
            .map(str::to_string)
            .collect();
        for (path, item) in &paths {
            for verb in VERBS {
                let Some(responses) = item.get(verb).and_then(|op| op.get("responses")).and_then(Value::as_object) else {
                    continue;
                };
                for (status, response) in responses {
                    if !is_status_key(status) {
                        continue;
                    }
                    let Some((_, response)) = self.graph.deref(&root, response) else { continue };
                    let Some(links) = response.get("links").and_then(Value::as_object) else { continue };
                    for (name, link) in links {
                        let Some((_, link)) = self.graph.deref(&root, link) else { continue };
                        let Some(target) = link.get("operationId").and_then(Value::as_str) else { continue };
                        if !op_ids.contains(target) {
                            let ptr = format!(
                                "/paths/{}/{verb}/responses/{}/links/{}",
                                escape_pointer_segment(path),
                                escape_pointer_segment(status),
                                escape_pointer_segment(name)
                            );
                            self.warn(
                                WarningCode::UnknownLinkOperation,
                                &root,
                                &ptr,
                                format!("link `{name}` targets unknown operationId `{target}`"),
                            );
                        }
                    }
                }
            }
        }
    }

    fn check_refs(&mut self) {
        let graph = self.graph;
        for (doc, node) in &graph.nodes {
            for (path, reference) in collect_refs(&node.content) {
                if graph.resolve(doc, &reference).is_some() {
                    continue;
                }
                let why = match graph.target_document(doc, &reference) {
                    Some(Ok(target)) if graph.dangling.contains(&target) => {
                        format!("document `{target}` could not be loaded")
                    }
                    Some(Err(())) => "reference is not a valid URI".to_string(),
                    _ => "target does not exist".to_string(),
                };
                self.warn(
                    WarningCode::DanglingRef,
                    doc,
                    &path,
                    format!("`$ref: {reference}` cannot be resolved: {why}"),
                );
            }
        }
    }
}

fn compact(v: &Value) -> String {
    let s = v.to_string();
    if s.len() > 60 {
        format!("{}...", &s[..s.char_indices().take(57).last().map(|(i, c)| i + c.len_utf8()).unwrap_or(0)])
    } else {
        s
    }
}

fn json_type_matches(ty: &str, value: &Value) -> bool {
    match ty {
        "string" => value.is_string(),
        "boolean" => value.is_boolean(),
        "integer" => match value {
            Value::Number(n) => {
                n.is_i64() || n.is_u64() || n.as_f64().map(|f| f.fract() == 0.0).unwrap_or(false)
            }
            _ => false,
        },
        "number" => value.is_number(),
        "array" => value.is_array(),
        "object" => value.is_object(),
        "null" => value.is_null(),
        _ => true,
    }
}

/// Describes why `value` does not fit `schema`'s declared types, looking
/// through `$ref`s, composites, array items and object properties.
pub(crate) fn raw_mismatch(graph: &SchemaGraph, doc: &str, schema: &Value, value: &Value, depth: usize) -> Option<String> {
    if depth > 16 {
        return None;
    }
    let (doc, schema) = graph.deref(doc, schema)?;
    let mut types: Vec<String> = match schema.get("type") {
        Some(Value::String(t)) => vec![t.clone()],
        Some(Value::Array(ts)) => ts.iter().filter_map(Value::as_str).map(str::to_string).collect(),
        _ => Vec::new(),
    };
    if types.is_empty() {
        if schema.get("properties").is_some() {
            types.push("object".into());
        } else if schema.get("items").is_some() {
            types.push("array".into());
        }
    }
    let nullable = schema.get("nullable").and_then(Value::as_bool).unwrap_or(false);
    if value.is_null() && (nullable || types.iter().any(|t| t == "null")) {
        return None;
    }
    if types.is_empty() {
        for key in ["oneOf", "anyOf"] {
            if let Some(Value::Array(branches)) = schema.get(key) {
                let reasons: Vec<String> = branches
                    .iter()
                    .filter_map(|b| raw_mismatch(graph, doc, b, value, depth + 1))
                    .collect();
                if !branches.is_empty() && reasons.len() == branches.len() {
                    return Some(format!("matches none of the `{key}` branches"));
                }
            }
        }
        if let Some(Value::Array(branches)) = schema.get("allOf") {
            for b in branches {
                if let Some(r) = raw_mismatch(graph, doc, b, value, depth + 1) {
                    return Some(r);
                }
            }
        }
        return None;
    }
    let Some(ty) = types.iter().find(|t| json_type_matches(t, value)) else {
        return Some(format!(
            "has type {} but the declared type is {}",
            value_type(value),
            types.join("|")
        ));
    };
    match ty.as_str() {
        "array" => {
            let items = schema.get("items")?;
            for item in value.as_array()? {
                if let Some(r) = raw_mismatch(graph, doc, items, item, depth + 1) {
                    return Some(format!("has an item that {r}"));
                }
            }
            None
        }
        "object" => {
            let props = schema.get("properties").and_then(Value::as_object)?;
            for (k, v) in value.as_object()? {
                if let Some(prop) = props.get(k) {
                    if let Some(r) = raw_mismatch(graph, doc, prop, v, depth + 1) {
                        return Some(format!("has field `{k}` that {r}"));
                    }
                }
            }
            None
        }
        _ => None,
    }
}

fn value_type(v: &Value) -> &'static str {
    match v {
        Value::Null => "null",
        Value::Bool(_) => "boolean",
        Value::Number(_) => "number",
        Value::String(_) => "string",
        Value::Array(_) => "array",
        Value::Object(_) => "object",
    }
}
