use std::collections::{BTreeMap, BTreeSet};
use std::fmt::Write as _;
use std::time::Duration;

use serde::Serialize;

use super::{evidence, ActionFault, CoverageTarget, Qualifier, TargetKind};
use crate::model::ApiModel;
use crate::testcase::{Exchange, TestCase};

#[derive(Debug, Clone)]
pub struct ExecutedTest {
    pub test: TestCase,
    pub exchanges: Vec<Exchange>,
    pub targets: BTreeSet<CoverageTarget>,
    pub faults: Vec<ActionFault>,
}

impl ExecutedTest {
    pub fn new(test: TestCase, exchanges: Vec<Exchange>, model: &ApiModel) -> ExecutedTest {
        let (targets, faults) = evidence(&test, &exchanges, model);
        ExecutedTest {
            test,
            exchanges,
            targets,
            faults,
        }
    }

    fn order_key(&self) -> (String, String, u8) {
        let (path, verb) = self
            .test
            .actions
            .first()
            .map(|a| (a.path.clone(), a.verb.as_str().to_string()))
            .unwrap_or_default();
        let rank = self.targets.iter().map(|t| t.kind.rank()).min().unwrap_or(u8::MAX);
        (path, verb, rank)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct CoveredBy {
    pub test: usize,
    pub at: Duration,
}

/// Tests kept for their coverage, and which targets they cover.
#[derive(Debug, Default, Clone)]
pub struct Archive {
    pub tests: Vec<ExecutedTest>,
    pub covered: BTreeMap<CoverageTarget, CoveredBy>,
    pub pending: BTreeSet<CoverageTarget>,
    derived: BTreeSet<CoverageTarget>,
}

impl Archive {
    pub fn new(targets: BTreeSet<CoverageTarget>) -> Archive {
        Archive {
            pending: targets.clone(),
            derived: targets,
            ..Archive::default()
        }
    }

    pub fn derived(&self) -> &BTreeSet<CoverageTarget> {
        &self.derived
    }

    pub fn is_covered(&self, target: &CoverageTarget) -> bool {
        self.covered.contains_key(target)
    }

    /// Records an executed test. It is archived when it covers something
    /// new or is strictly shorter than a test currently covering one of its
    /// targets. Returns the newly covered targets.
    pub fn record_execution(
        &mut self,
        test: &TestCase,
        exchanges: &[Exchange],
        model: &ApiModel,
        at: Duration,
    ) -> BTreeSet<CoverageTarget> {
        let executed = ExecutedTest::new(test.clone(), exchanges.to_vec(), model);
        let useful = executed.targets.iter().any(|t| match self.covered.get(t) {
            None => true,
            Some(c) => executed.test.len() < self.tests[c.test].test.len(),
        });
        if useful {
            self.archive(executed, at)
        } else {
            BTreeSet::new()
        }
    }

    /// Adds a test unconditionally.
    pub fn archive(&mut self, executed: ExecutedTest, at: Duration) -> BTreeSet<CoverageTarget> {
        let index = self.tests.len();
        let len = executed.test.len();
        let mut newly = BTreeSet::new();
        for t in &executed.targets {
            match self.covered.get_mut(t) {
                None => {
                    self.covered.insert(t.clone(), CoveredBy { test: index, at });
                    self.pending.remove(t);
                    newly.insert(t.clone());
                }
                Some(c) if len < self.tests[c.test].test.len() => c.test = index,
                Some(_) => {}
            }
        }
        self.tests.push(executed);
        newly
    }

    pub fn faults(&self) -> impl Iterator<Item = (&ExecutedTest, &ActionFault)> {
        self.tests.iter().flat_map(|t| t.faults.iter().map(move |f| (t, f)))
    }

    pub fn report(&self, model: &ApiModel) -> CoverageReport {
        let mut endpoints = Vec::new();
        for ep in &model.endpoints {
            let key = ep.key().to_string();
            let mine = |t: &&CoverageTarget| t.kind.endpoint() == key;
            let derived: Vec<_> = self.derived.iter().filter(mine).collect();
            let mut statuses = BTreeSet::new();
            for t in &self.tests {
                for (a, ex) in t.test.actions.iter().zip(&t.exchanges) {
                    if a.endpoint().to_string() == key {
                        statuses.extend(ex.status());
                    }
                }
            }
            let faults = self
                .covered
                .keys()
                .filter(mine)
                .filter_map(|t| match t.kind {
                    TargetKind::FaultFound { code, .. } => Some(code),
                    _ => None,
                })
                .collect();
            endpoints.push(EndpointCoverage {
                endpoint: key.clone(),
                total: derived.len(),
                covered: derived.iter().filter(|t| self.is_covered(t)).count(),
                covered_2xx: derived
                    .iter()
                    .filter(|t| t.qualifier == Some(Qualifier::Success2xx) && self.is_covered(t))
                    .count(),
                statuses,
                faults,
            });
        }
        CoverageReport {
            total: endpoints.iter().map(|e| e.total).sum(),
            covered: endpoints.iter().map(|e| e.covered).sum(),
            covered_2xx: endpoints.iter().map(|e| e.covered_2xx).sum(),
            faults: self.faults().count(),
            endpoints,
        }
    }
}

/// Archived tests reduced greedily: a test is dropped when everything it
/// covers is covered by the tests still kept. Smaller tests (by target
/// count, then longer by actions) are considered for removal first. The
/// result is ordered by path, verb and target kind.
pub fn minimized_suite(archive: &Archive) -> Vec<&ExecutedTest> {
    let mut candidates: Vec<usize> = (0..archive.tests.len()).collect();
    candidates.sort_by_key(|&i| {
        let t = &archive.tests[i];
        (t.targets.len(), std::cmp::Reverse(t.test.len()), std::cmp::Reverse(i))
    });
    let mut kept: BTreeSet<usize> = candidates.iter().copied().collect();
    for i in candidates {
        let others: BTreeSet<&CoverageTarget> = kept
            .iter()
            .filter(|&&j| j != i)
            .flat_map(|&j| archive.tests[j].targets.iter())
            .collect();
        if archive.tests[i].targets.iter().all(|t| others.contains(t)) {
            kept.remove(&i);
        }
    }
    let mut out: Vec<(usize, &ExecutedTest)> = kept.into_iter().map(|i| (i, &archive.tests[i])).collect();
    out.sort_by_key(|(i, t)| (t.order_key(), *i));
    out.into_iter().map(|(_, t)| t).collect()
}

#[derive(Debug, Clone, Serialize)]
pub struct EndpointCoverage {
    pub endpoint: String,
    pub total: usize,
    pub covered: usize,
    pub covered_2xx: usize,
    pub statuses: BTreeSet<u16>,
    pub faults: BTreeSet<u16>,
}

#[derive(Debug, Clone, Serialize)]
pub struct CoverageReport {
    pub total: usize,
    pub covered: usize,
    pub covered_2xx: usize,
    pub faults: usize,
    pub endpoints: Vec<EndpointCoverage>,
}

impl CoverageReport {
    pub fn to_json(&self) -> String {
        serde_json::to_string_pretty(self).expect("report serializes")
    }

    pub fn to_table(&self) -> String {
        let width = self.endpoints.iter().map(|e| e.endpoint.len()).max().unwrap_or(0).max(8);
        let mut s = String::new();
        let _ = writeln!(s, "{:<width$}  {:>6}  {:>7}  {:>7}  statuses  faults", "endpoint", "total", "covered", "2xx");
        for e in &self.endpoints {
            let join = |set: &BTreeSet<u16>| set.iter().map(u16::to_string).collect::<Vec<_>>().join(",");
            let _ = writeln!(
                s,
                "{:<width$}  {:>6}  {:>7}  {:>7}  {:<8}  {}",
                e.endpoint,
                e.total,
                e.covered,
                e.covered_2xx,
                join(&e.statuses),
                join(&e.faults)
            );
        }
        let _ = writeln!(s, "{:<width$}  {:>6}  {:>7}  {:>7}", "TOTAL", self.total, self.covered, self.covered_2xx);
        s
    }
}

#[cfg(test)]
mod tests {
    use super::super::derive_targets;
    use super::super::tests::{enum_model, run};
    use super::*;
    use proptest::prelude::*;

    fn ms(n: u64) -> Duration {
        Duration::from_millis(n)
    }

    #[test]
    fn rerun_covers_nothing_new() {
        let m = enum_model();
        let mut a = Archive::new(derive_targets(&m));
        let (t, ex) = run("v1", 200);
        assert!(!a.record_execution(&t, &ex, &m, ms(1)).is_empty());
        assert!(a.record_execution(&t, &ex, &m, ms(2)).is_empty());
        assert_eq!(a.tests.len(), 1);
    }

    #[test]
    fn later_success_covers_second_qualification() {
        let m = enum_model();
        let mut a = Archive::new(derive_targets(&m));
        let (t, ex) = run("v2", 400);
        a.record_execution(&t, &ex, &m, ms(1));
        let (t, ex) = run("v2", 200);
        let newly = a.record_execution(&t, &ex, &m, ms(2));
        let kind = TargetKind::EnumValue {
            endpoint: "GET:/e".into(),
            param: "query.y".into(),
            value: "v2".into(),
        };
        assert!(newly.contains(&CoverageTarget::success(kind.clone())));
        assert!(!newly.contains(&CoverageTarget::any(kind)));
    }

    #[test]
    fn identical_tests_minimize_to_one() {
        let m = enum_model();
        let mut a = Archive::default();
        let (t, ex) = run("v1", 200);
        a.archive(ExecutedTest::new(t.clone(), ex.clone(), &m), ms(1));
        a.archive(ExecutedTest::new(t, ex, &m), ms(2));
        assert_eq!(minimized_suite(&a).len(), 1);
    }

    #[test]
    fn disjoint_tests_are_kept() {
        let m = enum_model();
        let mut a = Archive::default();
        for (v, s) in [("v1", 200), ("v2", 404), ("v3", 500)] {
            let (t, ex) = run(v, s);
            a.archive(ExecutedTest::new(t, ex, &m), ms(1));
        }
        assert_eq!(minimized_suite(&a).len(), 3);
    }

    #[test]
    fn first_cover_kept_unless_shorter() {
        let m = enum_model();
        let mut a = Archive::new(derive_targets(&m));
        let (t1, ex1) = run("v1", 200);
        let mut long = t1.clone();
        long.actions.push(long.actions[0].clone());
        let ex_long = vec![ex1[0].clone(), ex1[0].clone()];
        a.record_execution(&long, &ex_long, &m, ms(1));
        let target = a.covered.keys().next().unwrap().clone();
        assert_eq!(a.covered[&target].test, 0);
        a.record_execution(&t1, &ex1, &m, ms(5));
        assert_eq!(a.covered[&target], CoveredBy { test: 1, at: ms(1) });
    }

    #[test]
    fn report_counts() {
        let m = enum_model();
        let mut a = Archive::new(derive_targets(&m));
        let (t, ex) = run("v1", 200);
        a.record_execution(&t, &ex, &m, ms(1));
        let r = a.report(&m);
        assert_eq!(r.total, 23);
        assert_eq!(r.covered, 3);
        assert_eq!(r.covered_2xx, 1);
        assert!(r.to_table().contains("GET:/e"));
        assert!(r.to_json().contains("\"covered_2xx\": 1"));
    }

    proptest! {
        #[test]
        fn minimization_preserves_union(runs in proptest::collection::vec((0usize..10, prop_oneof![Just(200u16), Just(400), Just(500)]), 1..50)) {
            let m = enum_model();
            let mut a = Archive::default();
            for (i, (v, s)) in runs.iter().enumerate() {
                let (t, ex) = run(&format!("v{v}"), *s);
                a.archive(ExecutedTest::new(t, ex, &m), ms(i as u64));
            }
            let all: BTreeSet<_> = a.tests.iter().flat_map(|t| t.targets.iter().cloned()).collect();
            let suite = minimized_suite(&a);
            let kept: BTreeSet<_> = suite.iter().flat_map(|t| t.targets.iter().cloned()).collect();
            prop_assert_eq!(all, kept);
            for t in a.covered.keys().filter(|t| t.qualifier == Some(Qualifier::Success2xx)) {
                prop_assert!(a.is_covered(&CoverageTarget::any(t.kind.clone())));
            }
        }
    }
}
