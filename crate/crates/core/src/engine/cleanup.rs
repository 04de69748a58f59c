//! DELETE actions appended after successful creations.

use crate::http::Method;
use crate::model::{path_template_params, ApiModel, BodyPointer, EndpointSpec, JsonValue};
use crate::testcase::{Action, ActionKind, Binding, Exchange, Slot, TestCase};

use super::dictionary::singular;

fn segments(path: &str) -> Vec<&str> {
    path.split('/').filter(|s| !s.is_empty()).collect()
}

fn is_param(seg: &str) -> bool {
    seg.starts_with('{') && seg.ends_with('}')
}

fn same_noun(a: &str, b: &str) -> bool {
    a == b || singular(a) == singular(b)
}

/// The DELETE endpoint most likely removing what a creation on `path`
/// created. `path` is the collection path for POST and the item path for
/// PUT. An exact `{path}/{id}` (or identical item path) wins over a
/// singular/plural-tolerant match.
pub fn find_delete_endpoint<'m>(model: &'m ApiModel, verb: Method, path: &str) -> Option<&'m EndpointSpec> {
    let created = segments(path);
    let item: Vec<&str> = match verb {
        Method::Post => created.clone(),
        Method::Put if created.last().is_some_and(|s| is_param(s)) => created[..created.len() - 1].to_vec(),
        _ => return None,
    };
    let deletes = model.endpoints.iter().filter(|e| e.verb == Method::Delete);
    let candidates: Vec<(&EndpointSpec, Vec<&str>)> = deletes
        .map(|e| (e, segments(&e.path)))
        .filter(|(_, s)| s.len() == item.len() + 1 && s.last().is_some_and(|l| is_param(l)))
        .collect();
    let exact = candidates.iter().find(|(_, s)| s[..item.len()] == item[..]);
    if let Some((e, _)) = exact {
        return Some(e);
    }
    candidates
        .iter()
        .find(|(_, s)| {
            s[..item.len()]
                .iter()
                .zip(&item)
                .all(|(a, b)| (is_param(a) && is_param(b)) || same_noun(a, b))
        })
        .map(|(e, _)| *e)
}

fn is_creation(action: &Action, status: u16) -> bool {
    match action.verb {
        Method::Post => (200..300).contains(&status),
        Method::Put => status == 201,
        _ => false,
    }
}

fn id_candidates(param: &str, noun: &str) -> Vec<String> {
    let mut out = vec![param.to_string(), "id".to_string(), format!("{}Id", singular(noun))];
    out.dedup();
    out
}

/// Appends, for every 2xx creation in `test`, a DELETE on the matching
/// endpoint. The id comes from the creation response when it has one,
/// otherwise from the id the client chose in the request.
pub fn plan_cleanup(test: &TestCase, exchanges: &[Exchange], model: &ApiModel) -> TestCase {
    let mut out = test.clone();
    for (i, (action, ex)) in test.actions.iter().zip(exchanges).enumerate() {
        if matches!(action.kind, ActionKind::Cleanup { .. }) {
            continue;
        }
        let Some(resp) = ex.response() else { continue };
        if !is_creation(action, resp.status) {
            continue;
        }
        let Some(del) = find_delete_endpoint(model, action.verb, &action.path) else {
            continue;
        };
        let Some(param) = path_template_params(&del.path).into_iter().last() else {
            continue;
        };
        let noun = segments(&del.path).iter().rev().nth(1).copied().unwrap_or_default().to_string();
        let body = resp.body_json();
        let keys = id_candidates(&param, &noun);
        let slot = Slot::PathParam(param.clone());
        let mut cleanup = Action::new(Method::Delete, del.path.clone());
        cleanup.kind = ActionKind::Cleanup { created_by: i };
        // Path parameters the DELETE shares with the creation path.
        for (k, v) in &action.path_params {
            if k != &param && del.path.contains(&format!("{{{k}}}")) {
                cleanup.path_params.insert(k.clone(), v.clone());
            }
        }
        let target = out.actions.len();
        let from_response = keys.iter().find(|k| {
            let v = body.get(k);
            !v.is_undefined() && !v.is_null()
        });
        if let Some(k) = from_response {
            let pointer = BodyPointer::root().child(k);
            out.bindings.push(Binding {
                id: format!("created_{i}__{}", pointer.ident()),
                source_action: i,
                extraction: pointer,
                target_action: target,
                slot: slot.clone(),
            });
            cleanup.set_slot(&slot, body.get(k).clone());
        } else if let Some(v) = client_chosen_id(action, &keys) {
            cleanup.set_slot(&slot, v);
        } else {
            continue;
        }
        out.actions.push(cleanup);
    }
    out
}

fn client_chosen_id(action: &Action, keys: &[String]) -> Option<JsonValue> {
    if action.verb == Method::Put {
        let last = path_template_params(&action.path).into_iter().last()?;
        return action.path_params.get(&last).cloned();
    }
    let body = &action.body.as_ref()?.value;
    keys.iter()
        .map(|k| body.get(k))
        .find(|v| !v.is_undefined() && !v.is_null())
        .cloned()
}
