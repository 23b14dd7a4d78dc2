//! Test execution over a pluggable transport.
//!
//! An [`Executor`] resets the SUT, applies environment setup, handles static
//! and dynamic (login-based) authentication and runs each action in order,
//! turning raw transport outcomes into [`ActionResponse`] records.

mod http;

use std::collections::{BTreeMap, BTreeSet};
use std::time::{Duration, Instant};

use serde::{Deserialize, Serialize};
use serde_json::Value;

pub use http::{HttpJsonTransport, DEFAULT_HTTP_TIMEOUT, WIRE_FORMAT};

use crate::fitness::{ExceptionCategory, ExceptionType};
use crate::genes::Phenotype;
use crate::harness::ProbeReading;
use crate::schema::{AuthMode, AuthSpec, FunctionRef, FunctionSpec, RpcSchema};

/// Details of an exception raised by a call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ExceptionInfo {
    pub exception_name: String,
    pub exception_message: String,
    #[serde(rename = "type")]
    pub exception_type: ExceptionType,
    pub category: ExceptionCategory,
    /// The reported exception was unwrapped from a wrapper exception.
    pub is_wrapped: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Phenotype>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack_top: Option<String>,
}

impl ExceptionInfo {
    pub fn new(name: impl Into<String>, message: impl Into<String>, exception_type: ExceptionType) -> Self {
        ExceptionInfo {
            exception_name: name.into(),
            exception_message: message.into(),
            exception_type,
            category: exception_type.category(),
            is_wrapped: false,
            payload: None,
            stack_top: None,
        }
    }
}

/// Side data of a call that never feeds outcome comparison.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct TransportMeta {
    /// Branch readings, present only for instrumented transports.
    pub coverage: Vec<ProbeReading>,
    /// Auth fields sent with the call.
    pub injected_auth: BTreeMap<String, Value>,
}

/// Outcome of one call: an exception, a value, or neither for void calls.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ActionResponse {
    pub exception_info: Option<ExceptionInfo>,
    pub response_phenotype: Option<Phenotype>,
    #[serde(skip)]
    pub latency: Duration,
    #[serde(skip)]
    pub meta: TransportMeta,
}

impl ActionResponse {
    pub fn returned(value: Option<Phenotype>) -> Self {
        ActionResponse {
            exception_info: None,
            response_phenotype: value,
            latency: Duration::ZERO,
            meta: TransportMeta::default(),
        }
    }

    pub fn raised(info: ExceptionInfo) -> Self {
        ActionResponse {
            exception_info: Some(info),
            ..Self::returned(None)
        }
    }

    /// Equality on the observable outcome, ignoring latency and metadata.
    pub fn same_outcome(&self, other: &ActionResponse) -> bool {
        self.exception_info == other.exception_info && self.response_phenotype == other.response_phenotype
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ResponseFlags {
    pub is_null: bool,
    /// Defined only for collection response types.
    pub is_empty_collection: Option<bool>,
}

/// Null and emptiness flags of a handled response.
pub fn extract_response_flags(resp: &ActionResponse, f: &FunctionSpec) -> ResponseFlags {
    let value = resp.response_phenotype.as_ref().filter(|v| !v.is_null());
    let collection = f.response_type.as_ref().is_some_and(|t| t.kind.is_collection());
    let is_empty_collection = match value {
        Some(Value::Array(a)) if collection => Some(a.is_empty()),
        Some(Value::Object(o)) if collection => Some(o.is_empty()),
        _ => None,
    };
    ResponseFlags {
        is_null: value.is_none(),
        is_empty_collection,
    }
}

/// Exception as reported by a transport, before classification.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RawException {
    pub name: String,
    pub message: String,
    /// Wire spelling of a recognized type, e.g. `APP_INTERNAL_ERROR`.
    #[serde(default, rename = "type", skip_serializing_if = "Option::is_none")]
    pub type_name: Option<String>,
    #[serde(default)]
    pub is_wrapper: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub cause: Option<Box<RawException>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub payload: Option<Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub stack_top: Option<String>,
}

impl RawException {
    pub fn new(name: impl Into<String>, message: impl Into<String>) -> Self {
        RawException {
            name: name.into(),
            message: message.into(),
            type_name: None,
            is_wrapper: false,
            cause: None,
            payload: None,
            stack_top: None,
        }
    }

    pub fn typed(name: impl Into<String>, message: impl Into<String>, t: ExceptionType) -> Self {
        RawException {
            type_name: Some(t.name()),
            ..Self::new(name, message)
        }
    }

    pub fn at(mut self, frame: impl Into<String>) -> Self {
        self.stack_top = Some(frame.into());
        self
    }

    pub fn with_payload(mut self, payload: Value) -> Self {
        self.payload = Some(payload);
        self
    }

    pub fn wrapping(name: impl Into<String>, cause: RawException) -> Self {
        RawException {
            is_wrapper: true,
            cause: Some(Box::new(cause)),
            ..Self::new(name, "wrapped")
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub enum RawOutcome {
    Returned(Option<Value>),
    Raised(RawException),
}

#[derive(Debug, Clone, PartialEq)]
pub struct CallResult {
    pub outcome: RawOutcome,
    pub coverage: Vec<ProbeReading>,
}

pub struct CallRequest<'a> {
    pub interface_id: &'a str,
    pub action_name: &'a str,
    pub args: &'a [Value],
    pub auth: &'a BTreeMap<String, Value>,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum TransportError {
    #[error("transport unavailable: {0}")]
    Unavailable(String),
    #[error("operation not supported by this transport: {0}")]
    Unsupported(String),
}

/// Store-seeding command applied before the first action of a test.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "op", rename_all = "camelCase")]
pub enum EnvCommand {
    Insert { table: String, row: BTreeMap<String, Value> },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TransportKind {
    InProcess,
    HttpJson,
}

pub trait Transport {
    fn kind(&self) -> TransportKind;

    fn call(&mut self, request: &CallRequest<'_>) -> Result<CallResult, TransportError>;

    fn supports_reset(&self) -> bool;

    fn reset(&mut self) -> Result<(), TransportError>;

    fn apply_env(&mut self, env: &[EnvCommand]) -> Result<(), TransportError> {
        if env.is_empty() {
            Ok(())
        } else {
            Err(TransportError::Unsupported("environment setup".into()))
        }
    }

    /// Hash of the SUT state, when observable.
    fn state_hash(&self) -> Option<String> {
        None
    }
}

/// One call to make: function, concrete arguments and auth setting.
#[derive(Debug, Clone, PartialEq)]
pub struct PlannedAction {
    pub function: FunctionRef,
    pub args: Vec<Value>,
    pub auth: Option<usize>,
}

/// A login performed on behalf of later actions.
#[derive(Debug, Clone, PartialEq)]
pub struct LoginCall {
    pub auth: usize,
    pub response: ActionResponse,
    pub token: Option<Value>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TestExecution {
    pub responses: Vec<ActionResponse>,
    pub logins: Vec<LoginCall>,
    /// RPC calls made, logins included.
    pub calls: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, thiserror::Error)]
pub enum ExecutorError {
    #[error("SUT unreachable: {0}")]
    TransportUnavailable(String),
}

/// Maps a raw outcome to a response, unwrapping one wrapper level.
pub fn to_action_response(outcome: RawOutcome, f: Option<&FunctionSpec>) -> ActionResponse {
    match outcome {
        RawOutcome::Returned(v) => ActionResponse::returned(v),
        RawOutcome::Raised(raw) => {
            let (e, wrapped) = match raw.cause {
                Some(cause) if raw.is_wrapper => (*cause, true),
                cause => (RawException { cause, ..raw }, false),
            };
            let declared = f.is_some_and(|f| f.declares(&e.name));
            let exception_type = e.type_name.as_deref().and_then(ExceptionType::from_name).unwrap_or(if declared {
                ExceptionType::CustomizedException
            } else {
                ExceptionType::UnexpectedException
            });
            let mut info = ExceptionInfo::new(e.name, e.message, exception_type);
            info.is_wrapped = wrapped;
            info.payload = e.payload;
            info.stack_top = e.stack_top;
            ActionResponse::raised(info)
        }
    }
}

/// Reads a dotted path such as `data.token` from a value.
pub fn extract_path<'v>(value: &'v Value, path: &str) -> Option<&'v Value> {
    if path.is_empty() {
        return Some(value);
    }
    path.split('.').try_fold(value, |v, seg| match v {
        Value::Object(o) => o.get(seg),
        Value::Array(a) => a.get(seg.parse::<usize>().ok()?),
        _ => None,
    })
}

fn auth_applies(spec: &AuthSpec, f: &FunctionSpec) -> bool {
    spec.scope.applies_to(&f.action_name) || spec.scope.applies_to(&f.qualified_name())
}

/// Calls a plan will make, logins included.
pub fn planned_calls(schema: &RpcSchema, auth: &[AuthSpec], actions: &[PlannedAction]) -> u64 {
    actions.len() as u64 + needed_logins(schema, auth, actions).len() as u64
}

fn needed_logins(schema: &RpcSchema, auth: &[AuthSpec], actions: &[PlannedAction]) -> BTreeSet<usize> {
    actions
        .iter()
        .filter_map(|a| {
            let i = a.auth?;
            let spec = auth.get(i)?;
            (spec.mode == AuthMode::Dynamic && auth_applies(spec, schema.function(a.function))).then_some(i)
        })
        .collect()
}

pub struct Executor<'a> {
    schema: &'a RpcSchema,
    auth: &'a [AuthSpec],
    transport: &'a mut dyn Transport,
    warned_no_reset: bool,
}

impl<'a> Executor<'a> {
    pub fn new(schema: &'a RpcSchema, auth: &'a [AuthSpec], transport: &'a mut dyn Transport) -> Self {
        Executor {
            schema,
            auth,
            transport,
            warned_no_reset: false,
        }
    }

    pub fn transport(&mut self) -> &mut dyn Transport {
        self.transport
    }

    /// Resets the SUT, applies `env`, then runs every action in order.
    pub fn execute_test(&mut self, env: &[EnvCommand], actions: &[PlannedAction]) -> Result<TestExecution, ExecutorError> {
        if self.transport.supports_reset() {
            self.transport
                .reset()
                .map_err(|e| ExecutorError::TransportUnavailable(e.to_string()))?;
        } else if !self.warned_no_reset {
            log::warn!("transport has no reset hook; tests may depend on execution order");
            self.warned_no_reset = true;
        }
        if let Err(e) = self.transport.apply_env(env) {
            log::warn!("environment setup skipped: {e}");
        }
        let mut exec = TestExecution {
            responses: Vec::with_capacity(actions.len()),
            logins: Vec::new(),
            calls: 0,
        };
        let mut tokens: BTreeMap<usize, Option<Value>> = BTreeMap::new();
        for (i, action) in actions.iter().enumerate() {
            let f = self.schema.function(action.function);
            let fields = match self.auth_fields(action, f, &mut tokens, &mut exec) {
                Ok(fields) => fields,
                Err(e) if exec.calls == 0 => return Err(ExecutorError::TransportUnavailable(e.to_string())),
                Err(_) => BTreeMap::new(),
            };
            match self.execute_action(action, f, fields) {
                Ok(r) => exec.responses.push(r),
                Err(e) if i == 0 && exec.calls == 0 => return Err(ExecutorError::TransportUnavailable(e.to_string())),
                Err(e) => exec.responses.push(ActionResponse::raised(ExceptionInfo::new(
                    "TTransportException",
                    e.to_string(),
                    ExceptionType::TransportNotOpen,
                ))),
            }
            exec.calls += 1;
        }
        Ok(exec)
    }

    fn auth_fields(
        &mut self,
        action: &PlannedAction,
        f: &FunctionSpec,
        tokens: &mut BTreeMap<usize, Option<Value>>,
        exec: &mut TestExecution,
    ) -> Result<BTreeMap<String, Value>, TransportError> {
        let Some(idx) = action.auth else {
            return Ok(BTreeMap::new());
        };
        let Some(spec) = self.auth.get(idx).filter(|s| auth_applies(s, f)) else {
            return Ok(BTreeMap::new());
        };
        match spec.mode {
            AuthMode::Static => Ok(spec.static_fields.clone()),
            AuthMode::Dynamic => {
                let Some(login) = &spec.login else {
                    return Ok(BTreeMap::new());
                };
                if let std::collections::btree_map::Entry::Vacant(slot) = tokens.entry(idx) {
                    let login_fn = self.schema.find_any_function(&login.interface_id, &login.action_name);
                    let empty = BTreeMap::new();
                    let started = Instant::now();
                    let result = self.transport.call(&CallRequest {
                        interface_id: &login.interface_id,
                        action_name: &login.action_name,
                        args: &login.args,
                        auth: &empty,
                    })?;
                    exec.calls += 1;
                    let mut response = to_action_response(result.outcome, login_fn);
                    response.latency = started.elapsed();
                    let token = response
                        .response_phenotype
                        .as_ref()
                        .and_then(|v| extract_path(v, &login.token_extraction_path))
                        .filter(|v| !v.is_null())
                        .cloned();
                    if token.is_none() {
                        log::debug!("login {}.{} yielded no token", login.interface_id, login.action_name);
                    }
                    exec.logins.push(LoginCall {
                        auth: idx,
                        response,
                        token: token.clone(),
                    });
                    slot.insert(token);
                }
                Ok(match tokens.get(&idx).cloned().flatten() {
                    Some(t) => BTreeMap::from([(login.token_injection_path.clone(), t)]),
                    None => BTreeMap::new(),
                })
            }
        }
    }

    /// One call with the given auth fields.
    pub fn execute_action(
        &mut self,
        action: &PlannedAction,
        f: &FunctionSpec,
        auth: BTreeMap<String, Value>,
    ) -> Result<ActionResponse, TransportError> {
        let started = Instant::now();
        let result = self.transport.call(&CallRequest {
            interface_id: &f.interface_id,
            action_name: &f.action_name,
            args: &action.args,
            auth: &auth,
        })?;
        let mut r = to_action_response(result.outcome, Some(f));
        if r.exception_info.is_none() && f.response_type.is_none() {
            r.response_phenotype = None;
        } else if r.exception_info.is_none() && r.response_phenotype.is_none() {
            r.response_phenotype = Some(Value::Null);
        }
        r.latency = started.elapsed();
        r.meta = TransportMeta {
            coverage: result.coverage,
            injected_auth: auth,
        };
        Ok(r)
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{SupportedDataType as K, TypeSpec};
    use serde_json::json;

    fn function(response: Option<TypeSpec>) -> FunctionSpec {
        FunctionSpec {
            interface_id: "Svc".into(),
            action_name: "op".into(),
            request_params: vec![],
            response_type: response,
            declared_exceptions: vec!["QuotaExceeded".into()],
            is_authorized: false,
            auth_setup: None,
        }
    }

    #[test]
    fn declared_exception_info() {
        let r = to_action_response(RawOutcome::Raised(RawException::new("QuotaExceeded", "x")), Some(&function(None)));
        let e = r.exception_info.unwrap();
        assert_eq!(e.exception_type, ExceptionType::CustomizedException);
        assert_eq!(e.category, ExceptionCategory::Unclassified);
    }

    #[test]
    fn wrapper_is_unwrapped_once() {
        let inner = RawException::typed("TApplicationException", "bad", ExceptionType::AppInternalError);
        let r = to_action_response(
            RawOutcome::Raised(RawException::wrapping("UndeclaredThrowableException", inner)),
            Some(&function(None)),
        );
        let e = r.exception_info.unwrap();
        assert!(e.is_wrapped);
        assert_eq!(e.exception_name, "TApplicationException");
        assert_eq!(e.exception_type, ExceptionType::AppInternalError);
    }

    #[test]
    fn response_flags() {
        let list = function(Some(TypeSpec::sequence(K::List, TypeSpec::simple(K::Int, "Integer"))));
        let map = function(Some(TypeSpec::map(
            TypeSpec::simple(K::String, "String"),
            TypeSpec::simple(K::Int, "Integer"),
        )));
        let flags = |v: Value, f: &FunctionSpec| extract_response_flags(&ActionResponse::returned(Some(v)), f);
        assert_eq!(flags(Value::Null, &list), ResponseFlags { is_null: true, is_empty_collection: None });
        assert_eq!(flags(json!([1, 2, 3]), &list), ResponseFlags { is_null: false, is_empty_collection: Some(false) });
        assert_eq!(flags(json!({}), &map), ResponseFlags { is_null: false, is_empty_collection: Some(true) });
    }

    #[test]
    fn dotted_paths() {
        let v = json!({"data": {"token": "abc", "list": [1, 2]}});
        assert_eq!(extract_path(&v, "data.token"), Some(&json!("abc")));
        assert_eq!(extract_path(&v, "data.list.1"), Some(&json!(2)));
        assert_eq!(extract_path(&v, "data.missing"), None);
        assert_eq!(extract_path(&json!("t"), ""), Some(&json!("t")));
    }
}
