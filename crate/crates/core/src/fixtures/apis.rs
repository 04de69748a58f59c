use std::collections::{BTreeMap, BTreeSet};
use std::sync::{Arc, Mutex};
use std::time::Duration;

use percent_encoding::percent_decode_str;
use serde_json::{json, Value};

use super::Handler;
use crate::clock::Clock;
use crate::engine::{keyed_digest, signing_text, xor_decrypt, MOCK_CIPHER_SECRET, MOCK_SIGNING_SECRET};
use crate::http::{HttpRequest, HttpResponse, Method};

fn segments(path: &str) -> Vec<String> {
    path.split('/')
        .filter(|s| !s.is_empty())
        .map(|s| percent_decode_str(s).decode_utf8_lossy().into_owned())
        .collect()
}

fn query<'a>(r: &'a HttpRequest, name: &str) -> Option<&'a str> {
    r.query.iter().find(|(k, _)| k == name).map(|(_, v)| v.as_str())
}

fn json(status: u16, body: Value) -> HttpResponse {
    HttpResponse {
        status,
        headers: vec![("Content-Type".into(), "application/json".into())],
        body: body.to_string(),
    }
}

fn error(status: u16, message: &str) -> HttpResponse {
    json(status, json!({ "error": message }))
}

fn body_object(r: &HttpRequest) -> Option<serde_json::Map<String, Value>> {
    match serde_json::from_str(r.body.as_deref()?) {
        Ok(Value::Object(m)) => Some(m),
        _ => None,
    }
}

/// Users created by POST and read back through the link target. The
/// create response carries a null `errrors` although the schema declares
/// a string.
#[derive(Default)]
pub struct LinksApi {
    users: Mutex<Vec<(String, i64)>>,
}

impl Handler for LinksApi {
    fn handle(&self, r: &HttpRequest) -> HttpResponse {
        let seg = segments(&r.path);
        let seg: Vec<&str> = seg.iter().map(String::as_str).collect();
        match (r.method, seg.as_slice()) {
            (Method::Post, ["api", "links", "create"]) => {
                let mut users = self.users.lock().unwrap();
                let n = users.len() as i64 + 1;
                let (id, code) = (format!("user{n}"), 100 + n);
                users.push((id.clone(), code));
                json(200, json!({ "data": { "id": id, "code": code }, "errrors": null }))
            }
            (Method::Get, ["api", "links", "users", name, code]) => {
                let Ok(code) = code.parse::<i64>() else {
                    return error(400, "code must be an integer");
                };
                let users = self.users.lock().unwrap();
                if users.iter().any(|(n, c)| n == name && *c == code) {
                    json(200, json!({ "name": name, "code": code }))
                } else {
                    error(404, "no such user")
                }
            }
            _ => error(404, "not found"),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CheckRecord {
    pub authorization: Option<String>,
    pub status: u16,
}

#[derive(Default)]
struct TokenState {
    issued: Vec<(String, Duration)>,
    checks: Vec<CheckRecord>,
}

/// Login with `{"userId":"foo","password":"123"}` returns
/// `{"token":{"authToken":...}}`; `/check` wants it as a bearer token.
pub struct TokenApi {
    clock: Arc<dyn Clock>,
    lifetime: Option<Duration>,
    state: Mutex<TokenState>,
}

impl TokenApi {
    pub fn new(clock: Arc<dyn Clock>, lifetime: Option<Duration>) -> TokenApi {
        TokenApi {
            clock,
            lifetime,
            state: Mutex::default(),
        }
    }

    pub fn issued(&self) -> Vec<String> {
        self.state.lock().unwrap().issued.iter().map(|(t, _)| t.clone()).collect()
    }

    pub fn logins(&self) -> usize {
        self.state.lock().unwrap().issued.len()
    }

    pub fn checks(&self) -> Vec<CheckRecord> {
        self.state.lock().unwrap().checks.clone()
    }
}

impl Handler for TokenApi {
    fn handle(&self, r: &HttpRequest) -> HttpResponse {
        let mut state = self.state.lock().unwrap();
        match (r.method, r.path.as_str()) {
            (Method::Post, "/api/logintoken/login") => {
                let creds = body_object(r).unwrap_or_default();
                if creds.get("userId") != Some(&json!("foo")) || creds.get("password") != Some(&json!("123")) {
                    return error(401, "wrong credentials");
                }
                let token = format!("token-{}", state.issued.len() + 1);
                state.issued.push((token.clone(), self.clock.now()));
                json(200, json!({ "token": { "authToken": token } }))
            }
            (Method::Get, "/api/logintoken/check") => {
                let auth = r.header("Authorization").map(str::to_string);
                let now = self.clock.now();
                let valid = auth
                    .as_deref()
                    .and_then(|a| a.strip_prefix("Bearer "))
                    .and_then(|t| state.issued.iter().find(|(i, _)| i == t))
                    .is_some_and(|(_, at)| self.lifetime.is_none_or(|l| now < *at + l));
                let status = if valid { 200 } else { 401 };
                state.checks.push(CheckRecord {
                    authorization: auth,
                    status,
                });
                if valid {
                    HttpResponse::text(200, "OK")
                } else {
                    HttpResponse::text(401, "unauthorized")
                }
            }
            _ => error(404, "not found"),
        }
    }
}

/// Card binding with an encrypted envelope: `sign` must be the keyed
/// digest over the other fields, `key` decrypts with the master secret and
/// `data` with the decrypted key.
#[derive(Default)]
pub struct DerivedApi {
    decrypted: Mutex<Vec<String>>,
}

impl DerivedApi {
    pub fn decrypted(&self) -> Vec<String> {
        self.decrypted.lock().unwrap().clone()
    }
}

impl Handler for DerivedApi {
    fn handle(&self, r: &HttpRequest) -> HttpResponse {
        if (r.method, r.path.as_str()) != (Method::Post, "/api/derived/bind-card") {
            return error(404, "not found");
        }
        let Some(body) = body_object(r) else {
            return error(400, "body must be a JSON object");
        };
        let text = |k: &str| body.get(k).and_then(Value::as_str).unwrap_or_default().to_string();
        let payload = Value::Object(body.clone());
        if text("sign") != keyed_digest(MOCK_SIGNING_SECRET, &signing_text(&payload, "sign")) {
            return error(400, "signature does not match key and data");
        }
        let Some(key) = xor_decrypt(&text("key"), MOCK_CIPHER_SECRET) else {
            return error(400, "key is not a valid envelope");
        };
        let Some(data) = xor_decrypt(&text("data"), &key) else {
            return error(400, "data is not a valid envelope");
        };
        self.decrypted.lock().unwrap().push(data.clone());
        json(200, json!({ "decrypted": data }))
    }
}

#[derive(Default)]
struct CrudState {
    users: BTreeMap<String, String>,
    next_user: usize,
    products: Option<BTreeMap<String, String>>,
}

/// Users (client- or server-chosen ids, duplicates rejected) and
/// products (pre-seeded `p1`..`p5`, PUT creates or replaces).
#[derive(Default)]
pub struct CrudApi {
    state: Mutex<CrudState>,
    mutations: Mutex<Vec<(Method, String)>>,
}

impl CrudApi {
    pub fn user_ids(&self) -> BTreeSet<String> {
        self.state.lock().unwrap().users.keys().cloned().collect()
    }

    /// Every PUT/DELETE with the id it targeted.
    pub fn mutations(&self) -> Vec<(Method, String)> {
        self.mutations.lock().unwrap().clone()
    }
}

impl Handler for CrudApi {
    fn handle(&self, r: &HttpRequest) -> HttpResponse {
        let seg = segments(&r.path);
        let seg: Vec<&str> = seg.iter().map(String::as_str).collect();
        let mut guard = self.state.lock().unwrap();
        let st = &mut *guard;
        let products = st.products.get_or_insert_with(|| (1..=5).map(|i| (format!("p{i}"), format!("product {i}"))).collect());
        if matches!(r.method, Method::Put | Method::Delete) {
            if let Some(id) = seg.get(3) {
                self.mutations.lock().unwrap().push((r.method, id.to_string()));
            }
        }
        match (r.method, &seg[..]) {
            (Method::Get, ["api", "crud", "users"]) => {
                json(200, st.users.iter().map(|(id, name)| json!({ "id": id, "name": name })).collect())
            }
            (Method::Post, ["api", "crud", "users"]) => {
                let Some(body) = body_object(r) else {
                    return error(400, "body must be a JSON object");
                };
                let Some(name) = body.get("name").and_then(Value::as_str) else {
                    return error(400, "name is required");
                };
                let id = match body.get("id") {
                    None | Some(Value::Null) => loop {
                        st.next_user += 1;
                        let id = format!("user{}", st.next_user);
                        if !st.users.contains_key(&id) {
                            break id;
                        }
                    },
                    Some(Value::String(id)) if st.users.contains_key(id) => return error(400, "duplicate id"),
                    Some(Value::String(id)) => id.clone(),
                    Some(_) => return error(400, "id must be a string"),
                };
                st.users.insert(id.clone(), name.to_string());
                json(201, json!({ "id": id, "name": name }))
            }
            (Method::Get, ["api", "crud", "user", id]) => match st.users.get(*id) {
                Some(name) => json(200, json!({ "id": id, "name": name })),
                None => error(404, "no such user"),
            },
            (Method::Delete, ["api", "crud", "user", id]) => match st.users.remove(*id) {
                Some(_) => HttpResponse::new(204, ""),
                None => error(404, "no such user"),
            },
            (Method::Get, ["api", "crud", "products"]) => {
                json(200, products.iter().map(|(id, name)| json!({ "id": id, "name": name })).collect())
            }
            (Method::Get, ["api", "crud", "products", id]) => match products.get(*id) {
                Some(name) => json(200, json!({ "id": id, "name": name })),
                None => error(404, "no such product"),
            },
            (Method::Put, ["api", "crud", "products", id]) => {
                let name = body_object(r)
                    .and_then(|b| b.get("name").and_then(Value::as_str).map(str::to_string))
                    .unwrap_or_default();
                match products.insert(id.to_string(), name) {
                    Some(_) => HttpResponse::new(200, ""),
                    None => HttpResponse::new(201, ""),
                }
            }
            (Method::Delete, ["api", "crud", "products", id]) => match products.remove(*id) {
                Some(_) => HttpResponse::new(204, ""),
                None => error(404, "no such product"),
            },
            _ => error(404, "not found"),
        }
    }
}

pub const COLOURS: [&str; 10] = ["red", "orange", "yellow", "green", "blue", "indigo", "violet", "black", "white", "grey"];

/// `GET /api/enum/items?y=<colour>&x=<int>`: 400 unless `x` is a
/// non-negative integer and `y` a known colour.
pub struct EnumApi;

impl Handler for EnumApi {
    fn handle(&self, r: &HttpRequest) -> HttpResponse {
        if (r.method, r.path.as_str()) != (Method::Get, "/api/enum/items") {
            return error(404, "not found");
        }
        let Some(y) = query(r, "y").filter(|y| COLOURS.contains(y)) else {
            return error(400, "unknown colour");
        };
        match query(r, "x").and_then(|x| x.parse::<i64>().ok()) {
            Some(x) if x >= 0 => json(200, json!([format!("{y}-{x}")])),
            _ => error(400, "x must be a non-negative integer"),
        }
    }
}
