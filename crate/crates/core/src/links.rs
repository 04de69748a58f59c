//! Following OpenAPI links: appending the linked call to a test case with
//! bindings that extract values from the earlier response at run time.

use thiserror::Error;

use crate::gen::Generator;
use crate::model::{ApiModel, BodyPointer, JsonValue, LinkBinding, LinkSpec};
use crate::testcase::{Action, ActionKind, Binding, Slot, TestCase};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum LinkError {
    #[error("no action {0} in test case")]
    NoSourceAction(usize),
    #[error("link `{link}` targets unknown operationId `{operation}`")]
    UnknownOperation { link: String, operation: String },
}

#[derive(Debug, Error, PartialEq, Eq)]
#[error("response body has no value at `{path}`")]
pub struct BindingFailure {
    pub path: String,
}

/// Variable name for a value extracted from action `source`.
pub fn binding_id(source: usize, pointer: &BodyPointer) -> String {
    format!("link_{source}__{}", pointer.ident())
}

/// Appends the call `link` leads to after action `action_index`, which
/// must have received a response declared under `status`. Returns the new
/// test and warnings for bindings that were skipped.
pub fn expand_link(
    test: &TestCase,
    action_index: usize,
    status: &str,
    link: &LinkSpec,
    model: &ApiModel,
    gen: &mut Generator,
) -> Result<(TestCase, Vec<String>), LinkError> {
    if action_index >= test.actions.len() {
        return Err(LinkError::NoSourceAction(action_index));
    }
    let target = model
        .by_operation_id(&link.target_operation_id)
        .ok_or_else(|| LinkError::UnknownOperation {
            link: link.name.clone(),
            operation: link.target_operation_id.clone(),
        })?;
    let mut warnings = Vec::new();
    let mut out = test.clone();
    let target_index = out.actions.len();
    let mut action = Action::generate(target, None, gen);
    action.kind = ActionKind::Link {
        source: action_index,
        status: status.to_string(),
        link: link.name.clone(),
    };
    for (designator, binding) in &link.bindings {
        let Some(param) = target.param_for(designator) else {
            warnings.push(format!(
                "link `{}`: target {} has no parameter `{designator}`; binding skipped",
                link.name,
                target.key()
            ));
            continue;
        };
        let slot = Slot::for_param(param.location, &param.name);
        // A bound slot never keeps an example-derived marker.
        action.meta.examples_used.retain(|(d, _)| *d != param.designator());
        match binding {
            LinkBinding::Constant(v) => action.set_slot(&slot, v.clone()),
            LinkBinding::ResponseBody(pointer) => {
                let id = binding_id(action_index, pointer);
                out.bindings.push(Binding {
                    id,
                    source_action: action_index,
                    extraction: pointer.clone(),
                    target_action: target_index,
                    slot: slot.clone(),
                });
                // Placeholder until the binding is evaluated; also makes an
                // optional parameter present.
                if action.param_value(param.location, &param.name).is_none() {
                    let (v, _) = gen.slot(&param.schema, &[]);
                    action.set_slot(&slot, v);
                }
            }
            LinkBinding::Unsupported(expr) => warnings.push(format!(
                "link `{}`: runtime expression `{expr}` is not supported; binding skipped",
                link.name
            )),
        }
    }
    out.actions.push(action);
    Ok((out, warnings))
}

/// The raw value at `extraction` in `body`.
pub fn extract_value<'a>(body: &'a JsonValue, extraction: &BodyPointer) -> Result<&'a JsonValue, BindingFailure> {
    body.pointer(extraction)
        .filter(|v| !v.is_undefined())
        .ok_or_else(|| BindingFailure {
            path: extraction.to_string(),
        })
}

/// The value at `extraction`, rendered for substitution into a request.
pub fn evaluate_binding(body: &JsonValue, extraction: &BodyPointer) -> Result<String, BindingFailure> {
    extract_value(body, extraction).map(JsonValue::render_scalar)
}
