//! In-process fixture APIs for tests and demos, reachable through a
//! simulated transport or a real localhost server.

mod apis;
mod server;

use std::sync::atomic::{AtomicUsize, Ordering};
use std::sync::Arc;
use std::time::Duration;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::clock::{Clock, VirtualClock};
use crate::http::{HttpRequest, HttpResponse, Transport, TransportError};

pub use apis::{CheckRecord, CrudApi, DerivedApi, EnumApi, LinksApi, TokenApi};
pub use server::{serve, FixtureServer};

pub const LINKS_SCHEMA: &str = include_str!("../../fixtures/links.yaml");
pub const LINKS_FAULTY_SCHEMA: &str = include_str!("../../fixtures/links-faulty.yaml");
pub const LOGINTOKEN_SCHEMA: &str = include_str!("../../fixtures/logintoken.yaml");
pub const LOGINTOKEN_AUTH: &str = include_str!("../../fixtures/logintoken-auth.toml");
pub const DERIVED_SCHEMA: &str = include_str!("../../fixtures/derived.yaml");
pub const DERIVED_RULES: &str = include_str!("../../fixtures/derived-rules.toml");
pub const CRUD_SCHEMA: &str = include_str!("../../fixtures/crud.yaml");
pub const ENUM_SCHEMA: &str = include_str!("../../fixtures/enum.yaml");
pub const PING_SCHEMA: &str = include_str!("../../fixtures/ping.yaml");

/// Schemas served under `/openapi/<name>`.
pub const SCHEMAS: [(&str, &str); 7] = [
    ("links.yaml", LINKS_SCHEMA),
    ("links-faulty.yaml", LINKS_FAULTY_SCHEMA),
    ("logintoken.yaml", LOGINTOKEN_SCHEMA),
    ("derived.yaml", DERIVED_SCHEMA),
    ("crud.yaml", CRUD_SCHEMA),
    ("enum.yaml", ENUM_SCHEMA),
    ("ping.yaml", PING_SCHEMA),
];

pub trait Handler: Send + Sync {
    fn handle(&self, request: &HttpRequest) -> HttpResponse;
}

/// All fixture APIs under their path roots, plus a request counter at
/// `/_fixture/requests` (not counted itself).
pub struct FixtureApi {
    pub links: LinksApi,
    pub tokens: TokenApi,
    pub derived: DerivedApi,
    pub crud: CrudApi,
    pub enums: EnumApi,
    requests: AtomicUsize,
}

impl FixtureApi {
    pub fn new(clock: Arc<dyn Clock>) -> FixtureApi {
        FixtureApi::with_token_lifetime(clock, None)
    }

    /// Tokens expire server-side after `lifetime` when set.
    pub fn with_token_lifetime(clock: Arc<dyn Clock>, lifetime: Option<Duration>) -> FixtureApi {
        FixtureApi {
            links: LinksApi::default(),
            tokens: TokenApi::new(clock, lifetime),
            derived: DerivedApi::default(),
            crud: CrudApi::default(),
            enums: EnumApi,
            requests: AtomicUsize::new(0),
        }
    }

    pub fn request_count(&self) -> usize {
        self.requests.load(Ordering::SeqCst)
    }
}

impl Handler for FixtureApi {
    fn handle(&self, r: &HttpRequest) -> HttpResponse {
        if r.path == "/_fixture/requests" {
            return HttpResponse::text(200, self.request_count().to_string());
        }
        self.requests.fetch_add(1, Ordering::SeqCst);
        if let Some(name) = r.path.strip_prefix("/openapi/") {
            return match SCHEMAS.iter().find(|(n, _)| *n == name) {
                Some((_, text)) => HttpResponse {
                    status: 200,
                    headers: vec![("Content-Type".into(), "application/yaml".into())],
                    body: text.to_string(),
                },
                None => HttpResponse::text(404, "no such schema"),
            };
        }
        let routes: [(&str, &dyn Handler); 6] = [
            ("/api/links/", &self.links),
            ("/api/logintoken/", &self.tokens),
            ("/api/derived/", &self.derived),
            ("/api/crud/", &self.crud),
            ("/api/enum/", &self.enums),
            ("/api/ping", &Ping),
        ];
        match routes.iter().find(|(prefix, _)| r.path.starts_with(prefix)) {
            Some((_, h)) => h.handle(r),
            None => HttpResponse::text(404, "not found"),
        }
    }
}

struct Ping;

impl Handler for Ping {
    fn handle(&self, r: &HttpRequest) -> HttpResponse {
        match (r.method, r.path.as_str()) {
            (crate::http::Method::Get, "/api/ping") => HttpResponse::text(200, "pong"),
            _ => HttpResponse::text(405, "method not allowed"),
        }
    }
}

/// Calls a handler in-process, advancing a virtual clock by a seeded
/// latency per request.
pub struct SimTransport {
    handler: Arc<dyn Handler>,
    clock: Arc<VirtualClock>,
    rng: ChaCha8Rng,
    pub latency: Duration,
    pub jitter: Duration,
}

impl SimTransport {
    pub fn new(handler: Arc<dyn Handler>, clock: Arc<VirtualClock>, seed: u64) -> SimTransport {
        SimTransport {
            handler,
            clock,
            rng: ChaCha8Rng::seed_from_u64(seed),
            latency: Duration::from_millis(20),
            jitter: Duration::from_millis(10),
        }
    }
}

impl Transport for SimTransport {
    fn send(&mut self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let jitter = self.rng.gen_range(0..=self.jitter.as_micros() as u64);
        self.clock.advance(self.latency + Duration::from_micros(jitter));
        Ok(self.handler.handle(request))
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::http::Method;

    fn api() -> FixtureApi {
        FixtureApi::new(Arc::new(VirtualClock::new()))
    }

    #[test]
    fn counter_and_schema_routes() {
        let a = api();
        assert_eq!(a.handle(&HttpRequest::new(Method::Get, "/api/ping")).body, "pong");
        assert_eq!(a.handle(&HttpRequest::new(Method::Get, "/openapi/links.yaml")).status, 200);
        assert_eq!(a.handle(&HttpRequest::new(Method::Get, "/nowhere")).status, 404);
        assert_eq!(a.handle(&HttpRequest::new(Method::Get, "/_fixture/requests")).body, "3");
    }

    #[test]
    fn sim_transport_advances_clock() {
        let clock = Arc::new(VirtualClock::new());
        let mut t = SimTransport::new(Arc::new(api()), clock.clone(), 1);
        t.send(&HttpRequest::new(Method::Get, "/api/ping")).unwrap();
        let d = clock.now();
        assert!(d >= Duration::from_millis(20) && d <= Duration::from_millis(30));
    }
}
