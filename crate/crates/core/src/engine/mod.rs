//! The fuzzing session: target-directed generation, execution, coverage
//! recording and the stop conditions.

mod cleanup;
mod derived;
mod dictionary;
mod executor;

use std::collections::VecDeque;
use std::fmt;
use std::sync::Arc;
use std::time::Duration;

use rand::Rng;
use thiserror::Error;

use crate::auth::AuthSpec;
use crate::clock::Clock;
use crate::coverage::{derive_targets, Archive, CoverageTarget, TargetKind};
use crate::gen::{enum_and_optional_combinations, optional_query_params, GenConfig, Generator, InputAssignment};
use crate::http::{Method, Transport};
use crate::links::expand_link;
use crate::model::{path_template_params, ApiModel, EndpointSpec, JsonValue, ParamDesignator};
use crate::testcase::{Action, Body, Exchange, Slot, TestCase};

pub use cleanup::{find_delete_endpoint, plan_cleanup};
pub use derived::{
    apply_derived_params, keyed_digest, parse_derived_rules, parse_derived_rules_str, signing_text, xor_decrypt,
    xor_encrypt, DerivedContext, DerivedError, DerivedParamRule, DerivedParams, TransformFn, TransformRegistry,
    MOCK_CIPHER_SECRET, MOCK_SIGNING_SECRET,
};
pub use dictionary::{harvest_dictionary, is_collection, singular, Provenance, ResponseDictionary};
pub use executor::{throttle, ExecStatus, Executor, LogEntry, LogKind};

/// Consecutive failed requests after which a session gives up.
pub const MAX_CONSECUTIVE_FAILURES: usize = 30;
/// Seed assignments per endpoint queued before target-directed search.
pub const SEED_ASSIGNMENTS: usize = 64;
const MAX_REGENERATIONS: usize = 16;

#[derive(Debug, Clone, PartialEq)]
pub struct SessionConfig {
    pub max_time: Duration,
    pub premature_stop: Option<Duration>,
    pub rate_per_minute: Option<u32>,
    pub seed: u64,
    pub base_url: String,
    pub cleanup: bool,
    pub dictionary: bool,
    /// Links followed at most this many times in a row per test.
    pub max_link_depth: usize,
    pub generation: GenConfig,
}

impl SessionConfig {
    pub fn new(base_url: impl Into<String>, max_time: Duration) -> SessionConfig {
        SessionConfig {
            max_time,
            premature_stop: None,
            rate_per_minute: None,
            seed: 0,
            base_url: base_url.into(),
            cleanup: true,
            dictionary: true,
            max_link_depth: 3,
            generation: GenConfig::default(),
        }
    }

    pub fn validate(&self) -> Result<(), SessionError> {
        if let Some(p) = self.premature_stop {
            if p > self.max_time {
                return Err(SessionError::Config(format!(
                    "premature stop ({}s) exceeds max time ({}s)",
                    p.as_secs_f64(),
                    self.max_time.as_secs_f64()
                )));
            }
        }
        if self.rate_per_minute == Some(0) {
            return Err(SessionError::Config("rate per minute must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StopReason {
    Budget,
    Premature,
    AllCovered,
}

impl fmt::Display for StopReason {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            StopReason::Budget => "budget",
            StopReason::Premature => "premature",
            StopReason::AllCovered => "all-covered",
        })
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct SessionStats {
    pub stop_reason: StopReason,
    pub elapsed: Duration,
    pub tests: usize,
    pub requests: usize,
    pub logins: usize,
    /// Session time of the last newly covered target.
    pub last_new_coverage: Duration,
}

#[derive(Debug, Error)]
pub enum SessionError {
    #[error("invalid session configuration: {0}")]
    Config(String),
    #[error("no endpoints to fuzz")]
    EmptyModel,
    #[error("API unreachable: {attempts} consecutive requests failed; last error: {last}")]
    Unreachable { attempts: usize, last: String },
}

/// What a session runs against.
pub struct SessionEnv {
    pub transport: Box<dyn Transport>,
    pub clock: Arc<dyn Clock>,
    pub auth: Option<AuthSpec>,
    pub derived: Option<DerivedParams>,
}

pub struct SessionOutcome {
    pub archive: Archive,
    pub stats: SessionStats,
    pub log: Vec<LogEntry>,
    pub dictionary: ResponseDictionary,
    pub warnings: Vec<String>,
}

struct Session<'m> {
    model: &'m ApiModel,
    cfg: &'m SessionConfig,
    gen: Generator,
    dictionary: ResponseDictionary,
    derived: Option<DerivedParams>,
    warnings: Vec<String>,
}

/// Runs generate, execute and record until the time budget is spent, no
/// target was newly covered for the premature-stop window, or every
/// derived target is covered.
pub fn run_session(model: &ApiModel, cfg: &SessionConfig, env: SessionEnv) -> Result<SessionOutcome, SessionError> {
    cfg.validate()?;
    if model.endpoints.is_empty() {
        return Err(SessionError::EmptyModel);
    }
    let clock = env.clock.clone();
    let mut executor = Executor::new(env.transport, env.clock, cfg.rate_per_minute, env.auth);
    let mut session = Session {
        model,
        cfg,
        gen: Generator::new(GenConfig {
            seed: cfg.seed,
            ..cfg.generation.clone()
        }),
        dictionary: ResponseDictionary::default(),
        derived: env.derived,
        warnings: Vec::new(),
    };
    let mut archive = Archive::new(derive_targets(model));
    let mut seeds: VecDeque<(usize, InputAssignment)> = model
        .endpoints
        .iter()
        .enumerate()
        .flat_map(|(i, ep)| enum_and_optional_combinations(ep, SEED_ASSIGNMENTS).into_iter().map(move |a| (i, a)))
        .collect();

    let start = clock.now();
    let since = |c: &Arc<dyn Clock>| c.now().saturating_sub(start);
    let mut last_new = Duration::ZERO;
    let mut tests = 0;
    let stop_reason = loop {
        let now = since(&clock);
        if archive.pending.is_empty() {
            break StopReason::AllCovered;
        }
        if now >= cfg.max_time {
            break StopReason::Budget;
        }
        if cfg.premature_stop.is_some_and(|p| now >= last_new + p) {
            break StopReason::Premature;
        }
        let mut deadline = cfg.max_time;
        if let Some(p) = cfg.premature_stop {
            deadline = deadline.min(last_new + p);
        }
        let deadline = Some(start + deadline);

        executor.set_test_index(tests);
        let mut test = match seeds.pop_front() {
            Some((i, a)) => TestCase::single(session.action_for(&model.endpoints[i], Some(&a))),
            None => session.directed_test(&archive),
        };
        let mut exchanges = Vec::new();
        let mut status = executor.execute(&test, &mut exchanges, deadline);
        if status == ExecStatus::Completed {
            status = session.follow_links(&mut test, &mut exchanges, &archive, &mut executor, deadline);
        }
        if status == ExecStatus::Completed && cfg.cleanup {
            let cleaned = plan_cleanup(&test, &exchanges, model);
            if cleaned.len() > test.len() {
                test = cleaned;
                executor.execute(&test, &mut exchanges, deadline);
            }
        }
        if cfg.dictionary {
            session.harvest(&test, &exchanges, since(&clock));
        }
        let at = since(&clock);
        if !archive.record_execution(&test, &exchanges, model, at).is_empty() {
            last_new = at;
        }
        tests += 1;
        session.warnings.extend(session.gen.take_warnings());
        if executor.consecutive_failures() >= MAX_CONSECUTIVE_FAILURES {
            return Err(SessionError::Unreachable {
                attempts: executor.consecutive_failures(),
                last: executor.last_failure().unwrap_or_default().to_string(),
            });
        }
    };

    let elapsed = since(&clock);
    let log = executor.into_log();
    let mut warnings = session.warnings;
    warnings.sort();
    warnings.dedup();
    Ok(SessionOutcome {
        stats: SessionStats {
            stop_reason,
            elapsed,
            tests,
            requests: log.len(),
            logins: log.iter().filter(|l| l.kind == LogKind::Login).count(),
            last_new_coverage: last_new,
        },
        archive,
        log,
        dictionary: session.dictionary,
        warnings,
    })
}

impl Session<'_> {
    /// Generated action with dictionary ids (GET only) and derived fields.
    fn action_for(&mut self, ep: &EndpointSpec, assignment: Option<&InputAssignment>) -> Action {
        let mut a = Action::generate(ep, assignment, &mut self.gen);
        // Mutations never touch harvested ids, even by chance.
        let mutating = matches!(ep.verb, Method::Delete | Method::Put | Method::Patch);
        for _ in 0..MAX_REGENERATIONS {
            if !mutating || !self.uses_harvested_id(&a) {
                break;
            }
            a = Action::generate(ep, assignment, &mut self.gen);
        }
        if ep.verb == Method::Get && self.cfg.dictionary {
            if let Some(last) = path_template_params(&ep.path).pop() {
                if let Some(ids) = self.dictionary.ids_for(&ep.path) {
                    if self.gen.chance(0.5) {
                        let i = self.gen.rng().gen_range(0..ids.len());
                        let id = ids.iter().nth(i).cloned().unwrap_or_default();
                        a.path_params.insert(last, JsonValue::String(id));
                        a.meta.dictionary_sourced = true;
                    }
                }
            }
        }
        self.apply_derived(&mut a);
        a
    }

    fn uses_harvested_id(&self, a: &Action) -> bool {
        a.path_params.values().any(|v| self.dictionary.contains_id(&v.render_scalar()))
    }

    fn apply_derived(&mut self, a: &mut Action) {
        let (Some(d), Some(body)) = (&self.derived, &mut a.body) else { return };
        match d.apply(&body.value, &a.path) {
            Ok(v) => body.value = v,
            Err(e) => self.warnings.push(e.to_string()),
        }
    }

    fn pick_endpoint(&mut self) -> &'_ EndpointSpec {
        let n = self.model.endpoints.len();
        &self.model.endpoints[self.gen.rng().gen_range(0..n)]
    }

    /// A one-action test aimed at a random pending target (or, one time in
    /// five, at a random endpoint).
    fn directed_test(&mut self, archive: &Archive) -> TestCase {
        let target = if !archive.pending.is_empty() && self.gen.chance(0.8) {
            let i = self.gen.rng().gen_range(0..archive.pending.len());
            archive.pending.iter().nth(i).cloned()
        } else {
            None
        };
        let model = self.model;
        let ep = target
            .as_ref()
            .and_then(|t| model.endpoints.iter().find(|e| e.key().to_string() == t.kind.endpoint()));
        let Some((ep, target)) = ep.zip(target) else {
            let ep = self.pick_endpoint();
            let ep = model.endpoint(&ep.key()).expect("own endpoint");
            return TestCase::single(self.action_for(ep, None));
        };
        TestCase::single(self.aimed_action(ep, &target))
    }

    fn aimed_action(&mut self, ep: &EndpointSpec, target: &CoverageTarget) -> Action {
        match &target.kind {
            TargetKind::OptionalCombo { mask, .. } => {
                let a = InputAssignment {
                    mask: mask.clone(),
                    fixed: Vec::new(),
                };
                self.action_for(ep, Some(&a))
            }
            TargetKind::EnumValue { param, value, .. } => {
                let designator = ParamDesignator::parse(param);
                let Some(p) = ep.param_for(&designator) else {
                    return self.action_for(ep, None);
                };
                let v = p.schema.constraints.enum_values.iter().find(|v| v.canonical_key() == *value).cloned();
                let optional = optional_query_params(ep);
                let mut mask: Vec<u8> = (0..optional.len()).map(|_| if self.gen.chance(0.5) { b'1' } else { b'0' }).collect();
                if let Some(i) = optional.iter().position(|o| std::ptr::eq(*o, p)) {
                    mask[i] = b'1';
                }
                let a = InputAssignment {
                    mask: String::from_utf8(mask).expect("ascii"),
                    fixed: v.map(|v| vec![(p.location, p.name.clone(), v)]).unwrap_or_default(),
                };
                self.action_for(ep, Some(&a))
            }
            TargetKind::ExampleUsed { slot, index, .. } => {
                let mut a = self.action_for(ep, None);
                self.use_example(ep, &mut a, slot, *index);
                a
            }
            _ => self.action_for(ep, None),
        }
    }

    fn use_example(&mut self, ep: &EndpointSpec, a: &mut Action, slot: &str, index: usize) {
        if slot == "body" {
            let Some(b) = ep.json_body() else { return };
            let Some(example) = b.schema.examples.get(index) else { return };
            let value = match example {
                JsonValue::Object(_) => self.gen.complete_example_object(&b.schema, example),
                other => other.clone(),
            };
            a.body = Some(Body {
                media_type: b.media_type.clone(),
                value,
            });
            self.apply_derived(a);
        } else {
            let Some(p) = ep.param_for(&ParamDesignator::parse(slot)) else { return };
            let Some(value) = p.all_examples().get(index).cloned() else { return };
            a.set_slot(&Slot::for_param(p.location, &p.name), value);
        }
        a.meta.examples_used.retain(|(s, _)| s != slot);
        a.meta.examples_used.push((slot.to_string(), index));
    }

    /// Follows links from the last action while its response declares
    /// some: always when the link's target is pending, otherwise with
    /// probability one half.
    fn follow_links(
        &mut self,
        test: &mut TestCase,
        exchanges: &mut Vec<Exchange>,
        archive: &Archive,
        executor: &mut Executor,
        deadline: Option<Duration>,
    ) -> ExecStatus {
        let model = self.model;
        for _ in 0..self.cfg.max_link_depth {
            let cur = test.len() - 1;
            let Some(status) = exchanges[cur].status() else { break };
            let source = test.actions[cur].endpoint();
            let Some(ep) = model.endpoint(&source) else { break };
            let links: Vec<_> = ep.links().filter(|(k, _)| k.matches(status)).collect();
            if links.is_empty() {
                break;
            }
            let pending: Vec<_> = links
                .iter()
                .filter(|(k, l)| {
                    CoverageTarget::both(TargetKind::LinkFollowed {
                        endpoint: source.to_string(),
                        status: k.to_string(),
                        link: l.name.clone(),
                    })
                    .iter()
                    .any(|t| archive.pending.contains(t))
                })
                .collect();
            let (key, link) = if !pending.is_empty() {
                *pending[self.gen.rng().gen_range(0..pending.len())]
            } else if self.gen.chance(0.5) {
                links[self.gen.rng().gen_range(0..links.len())]
            } else {
                break;
            };
            match expand_link(test, cur, &key.to_string(), link, model, &mut self.gen) {
                Ok((mut next, warnings)) => {
                    self.warnings.extend(warnings);
                    let last = next.actions.last_mut().expect("appended action");
                    self.apply_derived(last);
                    *test = next;
                }
                Err(e) => {
                    self.warnings.push(e.to_string());
                    break;
                }
            }
            if executor.execute(test, exchanges, deadline) == ExecStatus::DeadlineReached {
                return ExecStatus::DeadlineReached;
            }
        }
        ExecStatus::Completed
    }

    fn harvest(&mut self, test: &TestCase, exchanges: &[Exchange], at: Duration) {
        for (a, ex) in test.actions.iter().zip(exchanges) {
            if a.verb != Method::Get {
                continue;
            }
            let (Some(ep), Some(resp)) = (self.model.endpoint(&a.endpoint()), ex.response()) else { continue };
            harvest_dictionary(&mut self.dictionary, ep, resp, self.model, at);
        }
    }
}
