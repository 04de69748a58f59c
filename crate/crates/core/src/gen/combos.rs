use crate::model::{EndpointSpec, JsonValue, ParamLocation, ParamSpec};

/// Above this many optional query parameters, presence masks are reduced
/// to all-off, all-on, each-on and each-off.
pub const MAX_FULL_OPTIONALS: usize = 8;

/// One input seed for an endpoint: which optional query parameters are
/// sent, plus values pinned by an enum sweep.
#[derive(Debug, Clone, PartialEq)]
pub struct InputAssignment {
    /// One `0`/`1` per optional query parameter, in declaration order.
    pub mask: String,
    pub fixed: Vec<(ParamLocation, String, JsonValue)>,
}

impl InputAssignment {
    pub fn fixed_value(&self, location: ParamLocation, name: &str) -> Option<&JsonValue> {
        self.fixed
            .iter()
            .find(|(l, n, _)| *l == location && n == name)
            .map(|(_, _, v)| v)
    }
}

pub fn optional_query_params(ep: &EndpointSpec) -> Vec<&ParamSpec> {
    ep.params
        .iter()
        .filter(|p| p.location == ParamLocation::Query && !p.required)
        .collect()
}

/// Presence masks for `k` optional parameters, ascending as binary numbers
/// (first parameter is the most significant digit). Empty when `k == 0`.
pub fn presence_masks(k: usize) -> Vec<String> {
    if k == 0 {
        return Vec::new();
    }
    if k <= MAX_FULL_OPTIONALS {
        return (0..1u32 << k).map(|m| format!("{m:0k$b}")).collect();
    }
    let mut out = vec!["0".repeat(k), "1".repeat(k)];
    for i in 0..k {
        let mut on = vec!['0'; k];
        on[i] = '1';
        out.push(on.into_iter().collect());
    }
    for i in 0..k {
        let mut off = vec!['1'; k];
        off[i] = '0';
        out.push(off.into_iter().collect());
    }
    out
}

/// Candidate sweep values: the enum, then examples not already in it.
fn sweep_values(p: &ParamSpec) -> Vec<JsonValue> {
    let mut values = p.schema.constraints.enum_values.clone();
    if values.is_empty() {
        return values;
    }
    for ex in p.all_examples() {
        if !values.contains(&ex) {
            values.push(ex);
        }
    }
    values
}

/// Cross product of presence masks and per-parameter enum sweeps, masks as
/// the major key. Enum parameters absent under a mask are not swept for it.
/// Truncated to `cap` entries.
pub fn enum_and_optional_combinations(ep: &EndpointSpec, cap: usize) -> Vec<InputAssignment> {
    let optional = optional_query_params(ep);
    let mut masks = presence_masks(optional.len());
    if masks.is_empty() {
        masks.push(String::new());
    }
    let sweeps: Vec<(&ParamSpec, Vec<JsonValue>)> = ep
        .params
        .iter()
        .map(|p| (p, sweep_values(p)))
        .filter(|(_, v)| !v.is_empty())
        .collect();

    let mut out = Vec::new();
    for mask in masks {
        let present = |p: &ParamSpec| match optional.iter().position(|o| std::ptr::eq(*o, p)) {
            Some(i) => mask.as_bytes()[i] == b'1',
            None => true,
        };
        let mut any = false;
        for (p, values) in &sweeps {
            if !present(p) {
                continue;
            }
            for v in values {
                any = true;
                out.push(InputAssignment {
                    mask: mask.clone(),
                    fixed: vec![(p.location, p.name.clone(), v.clone())],
                });
                if out.len() >= cap {
                    return out;
                }
            }
        }
        if !any {
            out.push(InputAssignment {
                mask: mask.clone(),
                fixed: Vec::new(),
            });
            if out.len() >= cap {
                return out;
            }
        }
    }
    out
}
