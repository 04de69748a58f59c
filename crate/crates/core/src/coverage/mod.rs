//! Black-box coverage targets and the evidence a run provides for them.

mod archive;

use std::collections::BTreeSet;
use std::fmt;

use serde::Serialize;

use crate::faults::{classify_fault, Fault, FAULT_SERVER_ERROR};
use crate::gen::{optional_query_params, presence_masks};
use crate::model::{ApiModel, EndpointKey, EndpointSpec, ParamLocation};
use crate::testcase::{ActionKind, Exchange, TestCase};

pub use archive::{minimized_suite, Archive, CoverageReport, EndpointCoverage, ExecutedTest};

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(tag = "type", rename_all = "kebab-case")]
pub enum TargetKind {
    EndpointStatus { endpoint: String, family: String },
    OptionalCombo { endpoint: String, mask: String },
    EnumValue { endpoint: String, param: String, value: String },
    ExampleUsed { endpoint: String, slot: String, index: usize },
    LinkFollowed { endpoint: String, status: String, link: String },
    FaultFound { endpoint: String, code: u16 },
}

impl TargetKind {
    pub fn endpoint(&self) -> &str {
        match self {
            TargetKind::EndpointStatus { endpoint, .. }
            | TargetKind::OptionalCombo { endpoint, .. }
            | TargetKind::EnumValue { endpoint, .. }
            | TargetKind::ExampleUsed { endpoint, .. }
            | TargetKind::LinkFollowed { endpoint, .. }
            | TargetKind::FaultFound { endpoint, .. } => endpoint,
        }
    }

    fn rank(&self) -> u8 {
        match self {
            TargetKind::EndpointStatus { .. } => 0,
            TargetKind::OptionalCombo { .. } => 1,
            TargetKind::EnumValue { .. } => 2,
            TargetKind::ExampleUsed { .. } => 3,
            TargetKind::LinkFollowed { .. } => 4,
            TargetKind::FaultFound { .. } => 5,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
#[serde(rename_all = "kebab-case")]
pub enum Qualifier {
    AnyStatus,
    Success2xx,
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize)]
pub struct CoverageTarget {
    #[serde(flatten)]
    pub kind: TargetKind,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub qualifier: Option<Qualifier>,
}

impl CoverageTarget {
    pub fn plain(kind: TargetKind) -> CoverageTarget {
        CoverageTarget { kind, qualifier: None }
    }

    pub fn any(kind: TargetKind) -> CoverageTarget {
        CoverageTarget {
            kind,
            qualifier: Some(Qualifier::AnyStatus),
        }
    }

    pub fn success(kind: TargetKind) -> CoverageTarget {
        CoverageTarget {
            kind,
            qualifier: Some(Qualifier::Success2xx),
        }
    }

    /// Both qualifications of a parameter-condition target.
    pub fn both(kind: TargetKind) -> [CoverageTarget; 2] {
        [CoverageTarget::any(kind.clone()), CoverageTarget::success(kind)]
    }

    pub fn sort_key(&self) -> (&str, u8, &Self) {
        (self.kind.endpoint(), self.kind.rank(), self)
    }
}

impl fmt::Display for CoverageTarget {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match &self.kind {
            TargetKind::EndpointStatus { endpoint, family } => write!(f, "{endpoint} status {family}")?,
            TargetKind::OptionalCombo { endpoint, mask } => write!(f, "{endpoint} optional {mask}")?,
            TargetKind::EnumValue { endpoint, param, value } => write!(f, "{endpoint} enum {param}={value}")?,
            TargetKind::ExampleUsed { endpoint, slot, index } => write!(f, "{endpoint} example {slot}[{index}]")?,
            TargetKind::LinkFollowed { endpoint, status, link } => write!(f, "{endpoint} link {status}:{link}")?,
            TargetKind::FaultFound { endpoint, code } => write!(f, "{endpoint} fault {code}")?,
        }
        match self.qualifier {
            Some(Qualifier::AnyStatus) => f.write_str(" [any]"),
            Some(Qualifier::Success2xx) => f.write_str(" [2xx]"),
            None => Ok(()),
        }
    }
}

pub const FAMILIES: [&str; 3] = ["2xx", "4xx", "5xx"];

pub fn status_family(status: u16) -> String {
    format!("{}xx", status / 100)
}

/// Every coverage target the model declares.
pub fn derive_targets(model: &ApiModel) -> BTreeSet<CoverageTarget> {
    let mut out = BTreeSet::new();
    for ep in &model.endpoints {
        let key = ep.key().to_string();
        for family in FAMILIES {
            out.insert(CoverageTarget::plain(TargetKind::EndpointStatus {
                endpoint: key.clone(),
                family: family.into(),
            }));
        }
        for mask in presence_masks(optional_query_params(ep).len()) {
            out.extend(CoverageTarget::both(TargetKind::OptionalCombo {
                endpoint: key.clone(),
                mask,
            }));
        }
        for p in &ep.params {
            for v in &p.schema.constraints.enum_values {
                out.extend(CoverageTarget::both(TargetKind::EnumValue {
                    endpoint: key.clone(),
                    param: p.designator(),
                    value: v.canonical_key(),
                }));
            }
            for index in 0..p.all_examples().len() {
                out.extend(CoverageTarget::both(TargetKind::ExampleUsed {
                    endpoint: key.clone(),
                    slot: p.designator(),
                    index,
                }));
            }
        }
        if let Some(body) = ep.json_body() {
            for index in 0..body.schema.examples.len() {
                out.extend(CoverageTarget::both(TargetKind::ExampleUsed {
                    endpoint: key.clone(),
                    slot: "body".into(),
                    index,
                }));
            }
        }
        for (status, link) in ep.links() {
            out.extend(CoverageTarget::both(TargetKind::LinkFollowed {
                endpoint: key.clone(),
                status: status.to_string(),
                link: link.name.clone(),
            }));
        }
    }
    out
}

/// A fault attributed to one action of a test.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ActionFault {
    pub action: usize,
    pub endpoint: EndpointKey,
    pub fault: Fault,
}

/// Targets evidenced by one executed test, plus the faults it exposed.
pub fn evidence(test: &TestCase, exchanges: &[Exchange], model: &ApiModel) -> (BTreeSet<CoverageTarget>, Vec<ActionFault>) {
    let mut targets = BTreeSet::new();
    let mut faults = Vec::new();
    for (i, (action, ex)) in test.actions.iter().zip(exchanges).enumerate() {
        let Some(resp) = ex.response() else { continue };
        let status = resp.status;
        let success = resp.is_success();
        let key = action.endpoint();
        let key_s = key.to_string();
        let ep = model.endpoint(&key);
        let mut qualified = |kind: TargetKind| {
            targets.insert(CoverageTarget::any(kind.clone()));
            if success {
                targets.insert(CoverageTarget::success(kind));
            }
        };

        if let Some(ep) = ep {
            param_evidence(ep, action, &key_s, &mut qualified);
        }
        if let ActionKind::Link { source, status: declared, link } = &action.kind {
            if let Some(src) = test.actions.get(*source) {
                qualified(TargetKind::LinkFollowed {
                    endpoint: src.endpoint().to_string(),
                    status: declared.clone(),
                    link: link.clone(),
                });
            }
        }
        targets.insert(CoverageTarget::plain(TargetKind::EndpointStatus {
            endpoint: key_s.clone(),
            family: status_family(status),
        }));
        let fault = classify_fault(ep, resp);
        if let Some(f) = &fault {
            targets.insert(CoverageTarget::plain(TargetKind::FaultFound {
                endpoint: key_s.clone(),
                code: f.code,
            }));
        }
        if status >= 500 {
            targets.insert(CoverageTarget::plain(TargetKind::FaultFound {
                endpoint: key_s.clone(),
                code: FAULT_SERVER_ERROR,
            }));
        }
        if let Some(fault) = fault {
            faults.push(ActionFault {
                action: i,
                endpoint: key,
                fault,
            });
        }
    }
    (targets, faults)
}

fn param_evidence(ep: &EndpointSpec, action: &crate::testcase::Action, key: &str, add: &mut impl FnMut(TargetKind)) {
    let k = optional_query_params(ep).len();
    if k > 0 {
        let mask = action.optional_mask(ep);
        if k <= crate::gen::MAX_FULL_OPTIONALS || presence_masks(k).contains(&mask) {
            add(TargetKind::OptionalCombo {
                endpoint: key.to_string(),
                mask,
            });
        }
    }
    for p in &ep.params {
        let enums = &p.schema.constraints.enum_values;
        if enums.is_empty() {
            continue;
        }
        let hit = match p.location {
            ParamLocation::Header => action
                .headers
                .get(&p.name)
                .and_then(|h| enums.iter().find(|e| e.render_scalar() == *h)),
            loc => action
                .param_value(loc, &p.name)
                .and_then(|v| enums.iter().find(|e| e.canonical_key() == v.canonical_key())),
        };
        if let Some(v) = hit {
            add(TargetKind::EnumValue {
                endpoint: key.to_string(),
                param: p.designator(),
                value: v.canonical_key(),
            });
        }
    }
    for (slot, index) in &action.meta.examples_used {
        add(TargetKind::ExampleUsed {
            endpoint: key.to_string(),
            slot: slot.clone(),
            index: *index,
        });
    }
}
