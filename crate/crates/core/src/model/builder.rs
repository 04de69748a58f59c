use std::collections::{BTreeMap, BTreeSet};

use serde_json::Value;

use super::{
    path_template_params, ApiModel, BodyPointer, CompositeKind, EndpointSpec, FieldSchema, JsonValue, LinkBinding,
    LinkSpec, ParamDesignator, ParamLocation, ParamSpec, RequestBody, ResponseSpec, SchemaKind, StatusKey,
    ValueSchema,
};
use crate::http::Method;
use crate::schema::{escape_pointer_segment, SchemaGraph, SchemaWarning, WarningCode};

const VERBS: [&str; 8] = ["get", "put", "post", "delete", "options", "head", "patch", "trace"];

/// Builds the typed model. Never fails: anything unusable is dropped with a
/// warning. Endpoint order follows the document.
pub fn build_model(graph: &SchemaGraph) -> (ApiModel, Vec<SchemaWarning>) {
    let mut b = Builder {
        graph,
        warnings: Vec::new(),
        stack: Vec::new(),
        recursion_reported: BTreeSet::new(),
    };
    let root = graph.root.as_str();
    let content = &graph.root_document().content;
    let swagger2 = content.get("swagger").is_some();
    let title = content
        .pointer("/info/title")
        .and_then(Value::as_str)
        .map(str::to_string);

    let op_ids: BTreeSet<String> = content
        .get("paths")
        .and_then(Value::as_object)
        .into_iter()
        .flat_map(|p| p.values())
        .filter_map(|item| graph.deref(root, item).map(|(_, v)| v))
        .flat_map(|item| VERBS.iter().filter_map(move |v| item.get(*v)))
        .filter_map(|op| op.get("operationId").and_then(Value::as_str))
        .map(str::to_string)
        .collect();

    let mut endpoints = Vec::new();
    if let Some(paths) = content.get("paths").and_then(Value::as_object) {
        for (path, item) in paths {
            let item_ptr = format!("/paths/{}", escape_pointer_segment(path));
            let Some((item_doc, item)) = graph.deref(root, item) else { continue };
            let Some(item_map) = item.as_object() else { continue };
            let shared = item.get("parameters");
            for (verb_key, op) in item_map {
                if !VERBS.contains(&verb_key.as_str()) {
                    continue;
                }
                let Ok(verb) = verb_key.parse::<Method>() else { continue };
                let ptr = format!("{item_ptr}/{verb_key}");
                let ctx = OpCtx {
                    doc: item_doc,
                    item_ptr: &item_ptr,
                    ptr: &ptr,
                    path,
                    verb,
                    swagger2,
                };
                endpoints.push(b.endpoint(&ctx, op, shared, &op_ids));
            }
        }
    }
    let mut warnings = b.warnings;
    warnings.sort();
    warnings.dedup();
    (ApiModel { title, endpoints }, warnings)
}

struct OpCtx<'a> {
    doc: &'a str,
    item_ptr: &'a str,
    ptr: &'a str,
    path: &'a str,
    verb: Method,
    swagger2: bool,
}

struct Builder<'g> {
    graph: &'g SchemaGraph,
    warnings: Vec<SchemaWarning>,
    /// `doc#pointer` of `$ref` targets currently being expanded.
    stack: Vec<String>,
    recursion_reported: BTreeSet<String>,
}

fn str_field<'a>(v: &'a Value, key: &str) -> Option<&'a str> {
    v.get(key).and_then(Value::as_str)
}

impl<'g> Builder<'g> {
    fn warn(&mut self, code: WarningCode, doc: &str, path: &str, message: String) {
        self.warnings.push(SchemaWarning::warn(code, doc, path, message));
    }

    fn endpoint(&mut self, ctx: &OpCtx<'_>, op: &Value, shared: Option<&Value>, op_ids: &BTreeSet<String>) -> EndpointSpec {
        let mut params: Vec<ParamSpec> = Vec::new();
        let mut request_bodies = Vec::new();
        let mut body_required = false;

        let raw_params = [
            (shared, format!("{}/parameters", ctx.item_ptr)),
            (op.get("parameters"), format!("{}/parameters", ctx.ptr)),
        ];
        for (list, list_ptr) in raw_params {
            let Some(list) = list.and_then(Value::as_array) else { continue };
            for (i, raw) in list.iter().enumerate() {
                let p_ptr = format!("{list_ptr}/{i}");
                let Some((pdoc, raw)) = self.graph.deref(ctx.doc, raw) else { continue };
                let name = str_field(raw, "name").unwrap_or_default().to_string();
                let location = str_field(raw, "in").unwrap_or_default();
                match ParamLocation::parse(location) {
                    Some(loc) => {
                        let spec = self.param(pdoc, &p_ptr, raw, name, loc);
                        // Operation-level parameters override path-level ones.
                        params.retain(|p| !(p.location == spec.location && p.name == spec.name));
                        params.push(spec);
                    }
                    None if location == "body" && ctx.swagger2 => {
                        let schema = raw
                            .get("schema")
                            .map(|s| self.schema(pdoc, &format!("{p_ptr}/schema"), s))
                            .unwrap_or_else(|| ValueSchema::new(SchemaKind::Any));
                        body_required = raw.get("required").and_then(Value::as_bool).unwrap_or(false);
                        request_bodies.push(RequestBody {
                            media_type: "application/json".into(),
                            schema,
                        });
                    }
                    None => self.warn(
                        WarningCode::UnsupportedParameter,
                        pdoc,
                        &p_ptr,
                        format!("parameter `{name}` in `{location}` is not supported and will be ignored"),
                    ),
                }
            }
        }

        for name in path_template_params(ctx.path) {
            match params
                .iter_mut()
                .find(|p| p.location == ParamLocation::Path && p.name == name)
            {
                Some(p) => p.required = true,
                None => {
                    self.warn(
                        WarningCode::MissingPathParameter,
                        ctx.doc,
                        ctx.ptr,
                        format!("path parameter `{name}` of {} {} is not declared; treating it as a string", ctx.verb, ctx.path),
                    );
                    params.push(ParamSpec {
                        name,
                        location: ParamLocation::Path,
                        required: true,
                        schema: ValueSchema::string(),
                        examples: Vec::new(),
                    });
                }
            }
        }
        let template = path_template_params(ctx.path);
        params.retain(|p| p.location != ParamLocation::Path || template.contains(&p.name));

        if let Some(rb) = op.get("requestBody") {
            let rb_ptr = format!("{}/requestBody", ctx.ptr);
            if let Some((rdoc, rb)) = self.graph.deref(ctx.doc, rb) {
                body_required = rb.get("required").and_then(Value::as_bool).unwrap_or(false);
                if let Some(content) = rb.get("content").and_then(Value::as_object) {
                    for (media, mt) in content {
                        let m_ptr = format!("{rb_ptr}/content/{}", escape_pointer_segment(media));
                        let mut schema = mt
                            .get("schema")
                            .map(|s| self.schema(rdoc, &format!("{m_ptr}/schema"), s))
                            .unwrap_or_else(|| ValueSchema::new(SchemaKind::Any));
                        let extra = self.examples_of(rdoc, mt, &schema);
                        schema.examples.extend(extra);
                        request_bodies.push(RequestBody {
                            media_type: media.clone(),
                            schema,
                        });
                    }
                }
            }
        }

        let mut responses = BTreeMap::new();
        if let Some(map) = op.get("responses").and_then(Value::as_object) {
            for (status, resp) in map {
                let Some(key) = StatusKey::parse(status) else { continue };
                let r_ptr = format!("{}/responses/{}", ctx.ptr, escape_pointer_segment(status));
                let Some((rdoc, resp)) = self.graph.deref(ctx.doc, resp) else { continue };
                let spec = self.response(rdoc, &r_ptr, resp, op_ids);
                responses.insert(key, spec);
            }
        }

        EndpointSpec {
            verb: ctx.verb,
            path: ctx.path.to_string(),
            params,
            request_bodies,
            body_required,
            responses,
            tags: op
                .get("tags")
                .and_then(Value::as_array)
                .into_iter()
                .flatten()
                .filter_map(Value::as_str)
                .map(str::to_string)
                .collect(),
            operation_id: str_field(op, "operationId").map(str::to_string),
        }
    }

    fn param(&mut self, doc: &str, ptr: &str, raw: &Value, name: String, location: ParamLocation) -> ParamSpec {
        let schema = match raw.get("schema") {
            Some(s) => self.schema(doc, &format!("{ptr}/schema"), s),
            // Swagger 2.0 puts the type on the parameter itself.
            None if raw.get("type").is_some() => self.schema(doc, ptr, raw),
            None => ValueSchema::string(),
        };
        let examples = self.examples_of(doc, raw, &schema);
        ParamSpec {
            name,
            location,
            required: location == ParamLocation::Path
                || raw.get("required").and_then(Value::as_bool).unwrap_or(false),
            schema,
            examples,
        }
    }

    /// `example` and the values of an `examples` map on a parameter or media
    /// type object; values of the wrong type are dropped.
    fn examples_of(&self, doc: &str, node: &Value, schema: &ValueSchema) -> Vec<JsonValue> {
        let mut out = Vec::new();
        if let Some(ex) = node.get("example") {
            out.push(JsonValue::from(ex));
        }
        if let Some(map) = node.get("examples").and_then(Value::as_object) {
            for ex in map.values() {
                if let Some((_, ex)) = self.graph.deref(doc, ex) {
                    if let Some(v) = ex.get("value") {
                        out.push(JsonValue::from(v));
                    }
                }
            }
        }
        out.retain(|v| schema.accepts_type(v));
        out
    }

    fn response(&mut self, doc: &str, ptr: &str, resp: &Value, op_ids: &BTreeSet<String>) -> ResponseSpec {
        let schema = match resp.get("content").and_then(Value::as_object) {
            Some(content) => content
                .iter()
                .find(|(m, _)| m.contains("json"))
                .or_else(|| content.iter().next())
                .and_then(|(m, mt)| {
                    let s = mt.get("schema")?;
                    let p = format!("{ptr}/content/{}/schema", escape_pointer_segment(m));
                    Some(self.schema(doc, &p, s))
                }),
            None => resp.get("schema").map(|s| self.schema(doc, &format!("{ptr}/schema"), s)),
        };
        let mut links = Vec::new();
        if let Some(map) = resp.get("links").and_then(Value::as_object) {
            for (name, link) in map {
                let l_ptr = format!("{ptr}/links/{}", escape_pointer_segment(name));
                let Some((ldoc, link)) = self.graph.deref(doc, link) else { continue };
                if let Some(l) = self.link(ldoc, &l_ptr, name, link, op_ids) {
                    links.push(l);
                }
            }
        }
        ResponseSpec { schema, links }
    }

    fn link(&mut self, doc: &str, ptr: &str, name: &str, link: &Value, op_ids: &BTreeSet<String>) -> Option<LinkSpec> {
        let Some(target) = str_field(link, "operationId") else {
            let why = if link.get("operationRef").is_some() {
                "`operationRef` links are not supported"
            } else {
                "link has no `operationId`"
            };
            self.warn(WarningCode::DroppedLink, doc, ptr, format!("link `{name}` dropped: {why}"));
            return None;
        };
        if !op_ids.contains(target) {
            self.warn(
                WarningCode::DroppedLink,
                doc,
                ptr,
                format!("link `{name}` dropped: unknown operationId `{target}`"),
            );
            return None;
        }
        if link.get("requestBody").is_some() {
            self.warn(
                WarningCode::UnsupportedLinkExpression,
                doc,
                &format!("{ptr}/requestBody"),
                format!("`requestBody` of link `{name}` is not supported and will be ignored"),
            );
        }
        let bindings = link
            .get("parameters")
            .and_then(Value::as_object)
            .into_iter()
            .flatten()
            .map(|(k, v)| (ParamDesignator::parse(k), parse_binding(v)))
            .collect();
        Some(LinkSpec {
            name: name.to_string(),
            target_operation_id: target.to_string(),
            bindings,
        })
    }

    fn schema(&mut self, doc: &str, ptr: &str, node: &Value) -> ValueSchema {
        if let Some(r) = str_field(node, "$ref") {
            let Some(res) = self.graph.resolve(doc, r) else {
                self.warn(
                    WarningCode::DanglingRef,
                    doc,
                    ptr,
                    format!("`$ref: {r}` cannot be resolved; schema treated as untyped"),
                );
                return ValueSchema::new(SchemaKind::Any);
            };
            let id = format!("{}#{}", res.document, res.pointer);
            if self.stack.contains(&id) {
                if self.recursion_reported.insert(id.clone()) {
                    self.warnings.push(SchemaWarning::info(
                        WarningCode::RecursiveSchema,
                        doc,
                        ptr,
                        format!("recursive schema `{r}` is cut at this depth"),
                    ));
                }
                let mut cut = ValueSchema::object(Vec::new());
                cut.nullable = true;
                return cut;
            }
            let (rdoc, value, rptr) = (res.document, res.value, res.pointer.clone());
            self.stack.push(id);
            let s = self.schema(rdoc, &rptr, value);
            self.stack.pop();
            return s;
        }

        let mut types: Vec<&str> = match node.get("type") {
            Some(Value::String(t)) => vec![t.as_str()],
            Some(Value::Array(ts)) => ts.iter().filter_map(Value::as_str).collect(),
            _ => Vec::new(),
        };
        let mut nullable = node.get("nullable").and_then(Value::as_bool).unwrap_or(false)
            || node.get("x-nullable").and_then(Value::as_bool).unwrap_or(false);
        if types.contains(&"null") {
            nullable = true;
            types.retain(|t| *t != "null");
        }

        let composite = [
            ("allOf", CompositeKind::AllOf),
            ("oneOf", CompositeKind::OneOf),
            ("anyOf", CompositeKind::AnyOf),
        ]
        .into_iter()
        .find_map(|(k, kind)| node.get(k).and_then(Value::as_array).map(|b| (k, kind, b)));

        let kind = if let Some((key, kind, branches)) = composite {
            let mut built: Vec<ValueSchema> = branches
                .iter()
                .enumerate()
                .map(|(i, b)| self.schema(doc, &format!("{ptr}/{key}/{i}"), b))
                .collect();
            if kind == CompositeKind::AllOf && node.get("properties").is_some() {
                let own = self.object_fields(doc, ptr, node);
                built.push(ValueSchema::object(own));
            }
            SchemaKind::Composite(kind, built)
        } else {
            let ty = types.first().copied().unwrap_or_else(|| {
                if node.get("properties").is_some() {
                    "object"
                } else if node.get("items").is_some() {
                    "array"
                } else {
                    ""
                }
            });
            match ty {
                "string" => SchemaKind::String,
                "integer" => SchemaKind::Integer,
                "number" => SchemaKind::Number,
                "boolean" => SchemaKind::Boolean,
                "array" => {
                    let item = match node.get("items") {
                        Some(i) => self.schema(doc, &format!("{ptr}/items"), i),
                        None => ValueSchema::new(SchemaKind::Any),
                    };
                    SchemaKind::Array(Box::new(item))
                }
                "object" => SchemaKind::Object(self.object_fields(doc, ptr, node)),
                _ => SchemaKind::Any,
            }
        };

        let mut s = ValueSchema::new(kind);
        s.nullable = nullable;
        s.format = str_field(node, "format").map(str::to_string);
        let c = &mut s.constraints;
        c.pattern = str_field(node, "pattern").map(str::to_string);
        c.minimum = node.get("minimum").and_then(Value::as_f64);
        c.maximum = node.get("maximum").and_then(Value::as_f64);
        match node.get("exclusiveMinimum") {
            Some(Value::Bool(b)) => c.exclusive_minimum = *b,
            Some(Value::Number(n)) => {
                c.minimum = n.as_f64();
                c.exclusive_minimum = true;
            }
            _ => {}
        }
        match node.get("exclusiveMaximum") {
            Some(Value::Bool(b)) => c.exclusive_maximum = *b,
            Some(Value::Number(n)) => {
                c.maximum = n.as_f64();
                c.exclusive_maximum = true;
            }
            _ => {}
        }
        let as_usize = |k: &str| node.get(k).and_then(Value::as_u64).map(|n| n as usize);
        c.min_length = as_usize("minLength");
        c.max_length = as_usize("maxLength");
        c.min_items = as_usize("minItems");
        c.max_items = as_usize("maxItems");

        if let Some(values) = node.get("enum").and_then(Value::as_array) {
            let mut kept = Vec::new();
            for v in values {
                let jv = JsonValue::from(v);
                if s.accepts_type(&jv) && !jv.is_null() {
                    kept.push(jv);
                } else if !jv.is_null() {
                    self.warn(
                        WarningCode::InvalidEnum,
                        doc,
                        &format!("{ptr}/enum"),
                        format!("enum value {v} does not match type `{}`; dropped", s.type_name()),
                    );
                }
            }
            s.constraints.enum_values = kept;
        }

        let mut examples = Vec::new();
        if let Some(ex) = node.get("example") {
            examples.push(JsonValue::from(ex));
        }
        if let Some(list) = node.get("examples").and_then(Value::as_array) {
            examples.extend(list.iter().map(JsonValue::from));
        }
        examples.retain(|v| s.accepts_type(v));
        s.examples = examples;
        s
    }

    fn object_fields(&mut self, doc: &str, ptr: &str, node: &Value) -> Vec<FieldSchema> {
        let required: BTreeSet<&str> = node
            .get("required")
            .and_then(Value::as_array)
            .into_iter()
            .flatten()
            .filter_map(Value::as_str)
            .collect();
        let Some(props) = node.get("properties").and_then(Value::as_object) else {
            return Vec::new();
        };
        props
            .iter()
            .map(|(name, p)| FieldSchema {
                name: name.clone(),
                schema: self.schema(doc, &format!("{ptr}/properties/{}", escape_pointer_segment(name)), p),
                required: required.contains(name.as_str()),
            })
            .collect()
    }
}

fn parse_binding(v: &Value) -> LinkBinding {
    match v {
        Value::String(s) if s.starts_with('$') => match s.strip_prefix("$response.body") {
            Some(rest) => match rest.strip_prefix('#') {
                Some(ptr) => LinkBinding::ResponseBody(BodyPointer::parse(ptr)),
                None if rest.is_empty() => LinkBinding::ResponseBody(BodyPointer::root()),
                None => LinkBinding::Unsupported(s.clone()),
            },
            None => LinkBinding::Unsupported(s.clone()),
        },
        other => LinkBinding::Constant(JsonValue::from(other)),
    }
}
