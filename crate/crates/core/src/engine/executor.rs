//! Sequential execution of test cases: binding evaluation, auth, rate
//! limiting and the action log.

use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use crate::auth::{attach_auth, AuthSpec, TokenCache};
use crate::clock::Clock;
use crate::http::{HttpRequest, HttpResponse, Method, Transport, TransportError};
use crate::links::extract_value;
use crate::model::JsonValue;
use crate::testcase::{ActionKind, Exchange, Outcome, Slot, TestCase};

/// Pause before the next request under a rate of `rate_per_minute`, given
/// that the previous request took `last`.
pub fn throttle(rate_per_minute: u32, last: Duration) -> Duration {
    (Duration::from_secs(60) / rate_per_minute.max(1)).saturating_sub(last)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LogKind {
    Fuzz,
    Link,
    Cleanup,
    Login,
}

impl LogKind {
    fn of(kind: &ActionKind) -> LogKind {
        match kind {
            ActionKind::Fuzz => LogKind::Fuzz,
            ActionKind::Link { .. } => LogKind::Link,
            ActionKind::Cleanup { .. } => LogKind::Cleanup,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            LogKind::Fuzz => "fuzz",
            LogKind::Link => "link",
            LogKind::Cleanup => "cleanup",
            LogKind::Login => "login",
        }
    }
}

/// One issued (or attempted) HTTP request.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LogEntry {
    pub test: usize,
    pub kind: LogKind,
    pub verb: Method,
    /// Path template; the login path for logins.
    pub path: String,
    pub target: String,
    pub status: Option<u16>,
    pub started_at: Duration,
    pub duration: Duration,
    pub waited: Duration,
    pub dictionary_sourced: bool,
}

impl fmt::Display for LogEntry {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let status = self.status.map_or_else(|| "ERR".to_string(), |s| s.to_string());
        write!(
            f,
            "#{} t={}ms wait={}ms took={}ms {} {} {} -> {}{}",
            self.test,
            self.started_at.as_millis(),
            self.waited.as_millis(),
            self.duration.as_millis(),
            self.kind.as_str(),
            self.verb,
            self.target,
            status,
            if self.dictionary_sourced { " [dict]" } else { "" }
        )
    }
}

struct RequestMeta {
    kind: LogKind,
    path: String,
    dictionary_sourced: bool,
}

struct Core {
    transport: Box<dyn Transport>,
    clock: Arc<dyn Clock>,
    rate: Option<u32>,
    last_duration: Option<Duration>,
    log: Vec<LogEntry>,
    test: usize,
}

impl Core {
    /// Sends after the rate-limit pause. `None` when the pause would reach
    /// `deadline`; the clock is then advanced to the deadline.
    fn send(
        &mut self,
        request: &HttpRequest,
        meta: RequestMeta,
        deadline: Option<Duration>,
    ) -> Option<Result<HttpResponse, TransportError>> {
        let waited = match (self.rate, self.last_duration) {
            (Some(n), Some(x)) => throttle(n, x),
            _ => Duration::ZERO,
        };
        let now = self.clock.now();
        if let Some(d) = deadline {
            if now + waited >= d {
                self.clock.sleep(d.saturating_sub(now));
                return None;
            }
        }
        self.clock.sleep(waited);
        let started_at = self.clock.now();
        let result = self.transport.send(request);
        let duration = self.clock.now().saturating_sub(started_at);
        self.last_duration = Some(duration);
        self.log.push(LogEntry {
            test: self.test,
            kind: meta.kind,
            verb: request.method,
            path: meta.path,
            target: request.target(),
            status: result.as_ref().ok().map(|r| r.status),
            started_at,
            duration,
            waited,
            dictionary_sourced: meta.dictionary_sourced,
        });
        Some(result)
    }
}

/// Routes login requests through the throttled, logged channel.
struct LoginChannel<'a>(&'a mut Core);

impl Transport for LoginChannel<'_> {
    fn send(&mut self, request: &HttpRequest) -> Result<HttpResponse, TransportError> {
        let meta = RequestMeta {
            kind: LogKind::Login,
            path: request.path.clone(),
            dictionary_sourced: false,
        };
        self.0.send(request, meta, None).expect("no deadline")
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ExecStatus {
    Completed,
    DeadlineReached,
}

pub struct Executor {
    core: Core,
    auth: Option<AuthSpec>,
    tokens: TokenCache,
    consecutive_failures: usize,
    last_failure: Option<String>,
}

impl Executor {
    pub fn new(transport: Box<dyn Transport>, clock: Arc<dyn Clock>, rate: Option<u32>, auth: Option<AuthSpec>) -> Executor {
        Executor {
            core: Core {
                transport,
                clock,
                rate,
                last_duration: None,
                log: Vec::new(),
                test: 0,
            },
            auth,
            tokens: TokenCache::default(),
            consecutive_failures: 0,
            last_failure: None,
        }
    }

    pub fn clock(&self) -> &Arc<dyn Clock> {
        &self.core.clock
    }

    pub fn log(&self) -> &[LogEntry] {
        &self.core.log
    }

    pub fn into_log(self) -> Vec<LogEntry> {
        self.core.log
    }

    /// Index recorded in log entries of subsequent requests.
    pub fn set_test_index(&mut self, index: usize) {
        self.core.test = index;
    }

    pub fn consecutive_failures(&self) -> usize {
        self.consecutive_failures
    }

    pub fn last_failure(&self) -> Option<&str> {
        self.last_failure.as_deref()
    }

    fn failed(&mut self, message: String) -> Outcome {
        self.consecutive_failures += 1;
        self.last_failure = Some(message.clone());
        Outcome::NetworkError(message)
    }

    /// Executes the actions of `test` that have no exchange yet, appending
    /// one exchange per action.
    pub fn execute(&mut self, test: &TestCase, exchanges: &mut Vec<Exchange>, deadline: Option<Duration>) -> ExecStatus {
        while exchanges.len() < test.actions.len() {
            let j = exchanges.len();
            let mut action = test.actions[j].clone();
            let mut broken = None;
            for b in test.bindings_into(j) {
                let body = match exchanges.get(b.source_action).and_then(Exchange::response) {
                    Some(r) => r.body_json(),
                    None => {
                        broken = Some(format!("action {} has no response to extract `{}` from", b.source_action, b.extraction));
                        break;
                    }
                };
                match extract_value(&body, &b.extraction) {
                    Ok(v) => {
                        let v = match b.slot {
                            Slot::BodyField(_) => v.clone(),
                            _ => JsonValue::String(v.render_scalar()),
                        };
                        action.set_slot(&b.slot, v);
                    }
                    Err(e) => {
                        broken = Some(e.to_string());
                        break;
                    }
                }
            }
            if let Some(message) = broken {
                exchanges.push(Exchange {
                    request: None,
                    outcome: Outcome::LinkBroken(message),
                });
                continue;
            }
            let mut request = action.to_request();
            if let Some(spec) = &self.auth {
                let clock = self.core.clock.clone();
                match attach_auth(request, spec, &self.tokens, &mut LoginChannel(&mut self.core), &*clock) {
                    Ok(r) => request = r,
                    Err(e) => {
                        let outcome = self.failed(format!("authentication failed: {e}"));
                        exchanges.push(Exchange { request: None, outcome });
                        continue;
                    }
                }
            }
            let meta = RequestMeta {
                kind: LogKind::of(&action.kind),
                path: action.path.clone(),
                dictionary_sourced: action.meta.dictionary_sourced,
            };
            let outcome = match self.core.send(&request, meta, deadline) {
                None => {
                    while exchanges.len() < test.actions.len() {
                        exchanges.push(Exchange {
                            request: None,
                            outcome: Outcome::NotExecuted,
                        });
                    }
                    return ExecStatus::DeadlineReached;
                }
                Some(Ok(resp)) => {
                    self.consecutive_failures = 0;
                    Outcome::Response(resp)
                }
                Some(Err(e)) => self.failed(e.to_string()),
            };
            exchanges.push(Exchange {
                request: Some(request),
                outcome,
            });
        }
        ExecStatus::Completed
    }
}
