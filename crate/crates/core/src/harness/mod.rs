//! Deterministic in-process services with hand-placed branch probes.
//!
//! Three services ship with the crate: `ncs` (numeric branching), `scs`
//! (string branching) and `shop` (a small store-backed API with login,
//! declared exceptions and functions that need existing rows). Each one is
//! described by a Thrift IDL file and implements [`Transport`] directly.

// Handler errors are full service exceptions.
#![allow(clippy::result_large_err)]

mod ncs;
mod probe;
mod scs;
mod shop;
mod store;

use std::collections::BTreeMap;

use serde::Serialize;
use serde_json::Value;

pub use probe::{
    java_compare, normalize, numeric_distances, string_distance, BranchProbe, CmpOp, ProbeReading, ProbeSet, K,
    MAX_DISTANCE, STRING_LENGTH_WEIGHT,
};
pub use store::{ResetReport, Row, SimTableStore, StoreError};

use crate::executor::{
    CallRequest, CallResult, EnvCommand, RawException, RawOutcome, Transport, TransportError, TransportKind,
};
use crate::fitness::ExceptionType;
use crate::schema::{parse_thrift_idl, AuthSpec, FunctionSpec, RpcSchema};

/// What a function body sees during one call.
pub struct HarnessCtx<'a> {
    function: &'a str,
    pub probes: &'a mut ProbeSet,
    pub store: &'a mut SimTableStore,
    pub auth: &'a BTreeMap<String, Value>,
}

impl HarnessCtx<'_> {
    fn id(&self, local: &str) -> String {
        format!("{}.{}", self.function, local)
    }

    pub fn int(&mut self, probe: &str, lhs: i64, op: CmpOp, rhs: i64) -> bool {
        let id = self.id(probe);
        self.probes.cmp_int(&id, lhs, rhs, op)
    }

    pub fn num(&mut self, probe: &str, lhs: f64, op: CmpOp, rhs: f64) -> bool {
        let id = self.id(probe);
        self.probes.cmp_numeric(&id, lhs, rhs, op)
    }

    pub fn str_eq(&mut self, probe: &str, lhs: &str, rhs: &str) -> bool {
        let id = self.id(probe);
        self.probes.cmp_string(&id, lhs, rhs)
    }

    /// `lhs.compareTo(rhs) <op> 0`.
    pub fn str_ord(&mut self, probe: &str, lhs: &str, op: CmpOp, rhs: &str) -> bool {
        let id = self.id(probe);
        self.probes.cmp_string_order(&id, lhs, rhs, op)
    }

    pub fn flag(&mut self, probe: &str, value: bool) -> bool {
        let id = self.id(probe);
        self.probes.flag(&id, value)
    }
}

pub type FunctionBody = fn(&mut HarnessCtx<'_>, &[Value]) -> Result<Value, RawException>;

fn invalid_data(message: String) -> RawException {
    RawException::typed("TProtocolException", message, ExceptionType::ProtocolInvalidData)
}

pub(crate) fn int_arg(args: &[Value], i: usize) -> Result<i64, RawException> {
    args.get(i)
        .and_then(Value::as_i64)
        .ok_or_else(|| invalid_data(format!("argument {} is not an integer", i + 1)))
}

pub(crate) fn num_arg(args: &[Value], i: usize) -> Result<f64, RawException> {
    args.get(i)
        .and_then(Value::as_f64)
        .ok_or_else(|| invalid_data(format!("argument {} is not a number", i + 1)))
}

pub(crate) fn str_arg(args: &[Value], i: usize) -> Result<&str, RawException> {
    args.get(i)
        .and_then(Value::as_str)
        .ok_or_else(|| invalid_data(format!("argument {} is not a string", i + 1)))
}

/// An undeclared exception thrown by service code.
pub(crate) fn thrown(name: &str, message: impl Into<String>, frame: &str) -> RawException {
    RawException::new(name, message).at(frame)
}

/// Catalog entry for listing.
#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct HarnessInfo {
    pub name: &'static str,
    /// Long form, also accepted by [`build_harness`].
    pub label: &'static str,
    pub interface: String,
    pub functions: usize,
    pub description: &'static str,
}

pub struct SimulatedService {
    name: &'static str,
    description: &'static str,
    idl: &'static str,
    schema: RpcSchema,
    bodies: BTreeMap<String, FunctionBody>,
    default_auth: Vec<AuthSpec>,
    probes: ProbeSet,
    store: SimTableStore,
}

impl SimulatedService {
    /// Panics when the bundled IDL does not parse or a body has no function.
    fn new(
        name: &'static str,
        description: &'static str,
        idl: &'static str,
        bodies: &[(&str, FunctionBody)],
        store: SimTableStore,
    ) -> Self {
        let schema = parse_thrift_idl(idl).unwrap_or_else(|e| panic!("bundled {name} IDL: {e}"));
        let bodies: BTreeMap<String, FunctionBody> = bodies.iter().map(|(n, b)| (n.to_string(), *b)).collect();
        for f in schema.functions() {
            assert!(bodies.contains_key(&f.action_name), "{name}: no body for {}", f.action_name);
        }
        SimulatedService {
            name,
            description,
            idl,
            schema,
            bodies,
            default_auth: Vec::new(),
            probes: ProbeSet::new(),
            store,
        }
    }

    pub fn name(&self) -> &'static str {
        self.name
    }

    pub fn idl(&self) -> &'static str {
        self.idl
    }

    pub fn schema(&self) -> &RpcSchema {
        &self.schema
    }

    /// Auth settings used when none are configured.
    pub fn default_auth(&self) -> &[AuthSpec] {
        &self.default_auth
    }

    pub fn store(&self) -> &SimTableStore {
        &self.store
    }

    pub fn store_mut(&mut self) -> &mut SimTableStore {
        &mut self.store
    }

    pub fn probes(&self) -> &ProbeSet {
        &self.probes
    }

    pub fn info(&self) -> HarnessInfo {
        HarnessInfo {
            name: self.name,
            label: harness_label(self.name),
            interface: self.schema.interfaces[0].interface_id.clone(),
            functions: self.schema.function_count(),
            description: self.description,
        }
    }

    fn check_args(f: &FunctionSpec, args: &[Value]) -> Result<(), RawException> {
        if args.len() != f.request_params.len() {
            return Err(invalid_data(format!(
                "{} expects {} arguments, got {}",
                f.action_name,
                f.request_params.len(),
                args.len()
            )));
        }
        for (p, a) in f.request_params.iter().zip(args) {
            if a.is_null() && !p.is_nullable {
                return Err(invalid_data(format!("Required field '{}' was not present", p.name)));
            }
        }
        Ok(())
    }

    /// Runs one call and returns its outcome and probe trace.
    pub fn invoke(&mut self, action: &str, args: &[Value], auth: &BTreeMap<String, Value>) -> CallResult {
        self.probes.begin_call();
        let f = self.schema.functions().find(|f| f.action_name == action);
        let outcome = match (f, self.bodies.get(action)) {
            (Some(f), Some(body)) => match Self::check_args(f, args) {
                Ok(()) => {
                    let mut ctx = HarnessCtx {
                        function: action,
                        probes: &mut self.probes,
                        store: &mut self.store,
                        auth,
                    };
                    match body(&mut ctx, args) {
                        Ok(_) if f.response_type.is_none() => RawOutcome::Returned(None),
                        Ok(v) => RawOutcome::Returned(Some(v)),
                        Err(e) => RawOutcome::Raised(e),
                    }
                }
                Err(e) => RawOutcome::Raised(e),
            },
            _ => RawOutcome::Raised(RawException::typed(
                "TApplicationException",
                format!("Invalid method name: '{action}'"),
                ExceptionType::AppUnknownMethod,
            )),
        };
        CallResult {
            outcome,
            coverage: self.probes.take_trace(),
        }
    }
}

impl Transport for SimulatedService {
    fn kind(&self) -> TransportKind {
        TransportKind::InProcess
    }

    fn call(&mut self, request: &CallRequest<'_>) -> Result<CallResult, TransportError> {
        if self.schema.interfaces.iter().all(|i| i.interface_id != request.interface_id) {
            return Ok(CallResult {
                outcome: RawOutcome::Raised(RawException::typed(
                    "TApplicationException",
                    format!("unknown service '{}'", request.interface_id),
                    ExceptionType::AppUnknownMethod,
                )),
                coverage: Vec::new(),
            });
        }
        Ok(self.invoke(request.action_name, request.args, request.auth))
    }

    fn supports_reset(&self) -> bool {
        true
    }

    fn reset(&mut self) -> Result<(), TransportError> {
        self.store.smart_reset();
        Ok(())
    }

    fn apply_env(&mut self, env: &[EnvCommand]) -> Result<(), TransportError> {
        for cmd in env {
            match cmd {
                EnvCommand::Insert { table, row } => {
                    self.store
                        .insert(table, row.clone())
                        .map_err(|e| TransportError::Unsupported(e.to_string()))?;
                }
            }
        }
        Ok(())
    }

    fn state_hash(&self) -> Option<String> {
        Some(self.store.state_hash())
    }
}

pub const HARNESS_NAMES: [&str; 3] = ["ncs", "scs", "shop"];

pub fn build_ncs_analog() -> SimulatedService {
    ncs::build()
}

pub fn build_scs_analog() -> SimulatedService {
    scs::build()
}

pub fn build_shop() -> SimulatedService {
    shop::build()
}

fn harness_label(name: &'static str) -> &'static str {
    match name {
        "ncs" => "ncs-analog",
        "scs" => "scs-analog",
        other => other,
    }
}

/// By short name or label, e.g. `ncs` or `ncs-analog`.
pub fn build_harness(name: &str) -> Option<SimulatedService> {
    match name {
        "ncs" | "ncs-analog" => Some(build_ncs_analog()),
        "scs" | "scs-analog" => Some(build_scs_analog()),
        "shop" => Some(build_shop()),
        _ => None,
    }
}

pub fn harness_catalog() -> Vec<HarnessInfo> {
    HARNESS_NAMES.iter().filter_map(|n| build_harness(n)).map(|s| s.info()).collect()
}
