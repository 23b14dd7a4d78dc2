use serde::Serialize;

use super::{test_class, Assertion, Check, MachineSuite};
use crate::executor::{ActionResponse, Executor, ExecutorError, PlannedAction, Transport};
use crate::fitness::{classify_execution, ExecutionResultClass};
use crate::schema::RpcSchema;

#[derive(Debug, thiserror::Error)]
pub enum ReplayError {
    #[error("malformed suite: {0}")]
    Format(String),
    #[error("test {test}: function '{function}' is not in the schema")]
    UnknownFunction { test: String, function: String },
    #[error("transport unavailable: {0}")]
    Transport(String),
}

/// A test whose observed classes differ from the recorded ones.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct Mismatch {
    pub test: String,
    /// First differing action; `None` when only the test-level class differs.
    pub action: Option<usize>,
    pub expected: ExecutionResultClass,
    pub observed: ExecutionResultClass,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ReplayReport {
    pub tests: usize,
    pub mismatches: Vec<Mismatch>,
    /// Active assertions that did not hold, as `test: description`.
    pub assertion_failures: Vec<String>,
    pub schema_hash_matches: bool,
}

/// Runs every test of `suite` and compares execution classes.
pub fn replay_suite(
    suite: &MachineSuite,
    schema: &RpcSchema,
    transport: &mut dyn Transport,
) -> Result<ReplayReport, ReplayError> {
    let mut report = ReplayReport {
        tests: suite.tests.len(),
        schema_hash_matches: schema.content_hash() == suite.meta.schema_hash,
        ..ReplayReport::default()
    };
    if !report.schema_hash_matches {
        log::warn!("suite was generated from a different schema");
    }
    let mut executor = Executor::new(schema, &suite.auth_settings, transport);
    for case in &suite.tests {
        let mut planned = Vec::with_capacity(case.actions.len());
        for a in &case.actions {
            let function = schema.find_function(&a.function).ok_or_else(|| ReplayError::UnknownFunction {
                test: case.id.clone(),
                function: a.function.clone(),
            })?;
            planned.push(PlannedAction {
                function,
                args: a.args.clone(),
                auth: a.auth,
            });
        }
        let exec = executor.execute_test(&case.env, &planned).map_err(|e| match e {
            ExecutorError::TransportUnavailable(m) => ReplayError::Transport(m),
        })?;
        let observed: Vec<ExecutionResultClass> = planned
            .iter()
            .zip(&exec.responses)
            .map(|(p, r)| classify_execution(r, schema.function(p.function), None).er_class)
            .collect();
        let expected = &case.expected.action_classes;
        let first_diff = (0..expected.len().max(observed.len())).find(|&i| expected.get(i) != observed.get(i));
        if let Some(i) = first_diff {
            report.mismatches.push(Mismatch {
                test: case.id.clone(),
                action: Some(i),
                expected: expected.get(i).copied().unwrap_or(case.expected.er_class),
                observed: observed.get(i).copied().unwrap_or(ExecutionResultClass::Handled),
            });
        } else if test_class(&observed) != case.expected.er_class {
            report.mismatches.push(Mismatch {
                test: case.id.clone(),
                action: None,
                expected: case.expected.er_class,
                observed: test_class(&observed),
            });
        }
        for a in case.expected.assertions.iter().filter(|a| !a.masked) {
            if let Err(msg) = check_assertion(a, &exec.responses) {
                report.assertion_failures.push(format!("{}: {msg}", case.id));
            }
        }
    }
    Ok(report)
}

/// Evaluates one assertion against replayed responses.
pub fn check_assertion(a: &Assertion, responses: &[ActionResponse]) -> Result<(), String> {
    let resp = responses
        .get(a.action)
        .ok_or_else(|| format!("action {} did not run", a.action))?;
    if let Check::Throws { exception } = &a.check {
        return match &resp.exception_info {
            Some(info) if &info.exception_name == exception => Ok(()),
            Some(info) => Err(format!("expected {exception}, got {}", info.exception_name)),
            None => Err(format!("expected {exception}, call returned")),
        };
    }
    let root = resp.response_phenotype.as_ref().ok_or_else(|| format!("action {} has no response", a.action))?;
    let v = root
        .pointer(&a.path)
        .ok_or_else(|| format!("action {}: no value at '{}'", a.action, a.path))?;
    let ok = match &a.check {
        Check::Equals { value } => v == value,
        Check::Approx { value, rel_tol } => v.as_f64().is_some_and(|x| numbers_match(*value, x, *rel_tol)),
        Check::Size { value } => match v {
            serde_json::Value::Array(items) => items.len() == *value,
            serde_json::Value::Object(map) => map.len() == *value,
            _ => false,
        },
        Check::IsNull => v.is_null(),
        Check::Throws { .. } => unreachable!("handled above"),
    };
    if ok {
        Ok(())
    } else {
        Err(format!("action {} at '{}': {:?} does not match {v}", a.action, a.path, a.check))
    }
}

/// Equal within `rel_tol` of the larger magnitude; NaN matches NaN.
pub fn numbers_match(expected: f64, actual: f64, rel_tol: f64) -> bool {
    if expected.is_nan() || actual.is_nan() {
        return expected.is_nan() && actual.is_nan();
    }
    if expected == actual {
        return true;
    }
    (expected - actual).abs() <= rel_tol * expected.abs().max(actual.abs())
}
