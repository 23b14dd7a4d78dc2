//! Testing targets, outcome classification and response heuristics.
//!
//! Each function owns HANDLED and ERROR targets, SUCCESS and FAIL when a
//! result categorizer is configured, NULL and NOT_NULL when it returns a
//! value, and EMPTY and NOT_EMPTY when that value is a collection. Branch
//! targets come from harness probes. FAULT targets are created on demand
//! when an outcome flagged as a potential fault is observed.

mod categorizer;
mod taxonomy;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};

pub use categorizer::{builtin_categorizer, ResultCategorizer, StatusFieldCategorizer, BUILTIN_CATEGORIZERS};
pub use taxonomy::{CallResultCode, ExceptionCategory, ExceptionType, ExecutionResultClass};

use crate::executor::{ActionResponse, ExceptionInfo, ResponseFlags};
use crate::schema::FunctionSpec;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum TargetKind {
    Branch,
    Line,
    Handled,
    Error,
    Success,
    Fail,
    NotNull,
    Null,
    NotEmpty,
    Empty,
    Fault,
}

impl TargetKind {
    pub fn name(self) -> &'static str {
        match self {
            Self::Branch => "BRANCH",
            Self::Line => "LINE",
            Self::Handled => "HANDLED",
            Self::Error => "ERROR",
            Self::Success => "SUCCESS",
            Self::Fail => "FAIL",
            Self::NotNull => "NOT_NULL",
            Self::Null => "NULL",
            Self::NotEmpty => "NOT_EMPTY",
            Self::Empty => "EMPTY",
            Self::Fault => "FAULT",
        }
    }

    /// Targets scored from call outcomes rather than code probes.
    pub fn is_rpc(self) -> bool {
        !matches!(self, Self::Branch | Self::Line)
    }
}

impl fmt::Display for TargetKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct TestingTarget {
    pub id: String,
    pub kind: TargetKind,
    /// Qualified function name or probe id.
    pub owner: String,
}

impl TestingTarget {
    pub fn rpc(kind: TargetKind, f: &FunctionSpec) -> Self {
        let owner = f.qualified_name();
        TestingTarget {
            id: format!("{}:{owner}", kind.name()),
            kind,
            owner,
        }
    }

    pub fn branch(probe: &str, outcome: bool) -> Self {
        TestingTarget {
            id: format!("BRANCH:{probe}:{}", if outcome { "T" } else { "F" }),
            kind: TargetKind::Branch,
            owner: probe.to_string(),
        }
    }
}

/// Per-target heuristic values, keyed by target id.
pub type FitnessVector = BTreeMap<String, f64>;

/// Outcome-derived targets of one function.
pub fn register_targets_for_function(f: &FunctionSpec, categorizer_present: bool) -> Vec<TestingTarget> {
    let mut kinds = vec![TargetKind::Handled, TargetKind::Error];
    if categorizer_present {
        kinds.extend([TargetKind::Success, TargetKind::Fail]);
    }
    if let Some(t) = &f.response_type {
        kinds.extend([TargetKind::NotNull, TargetKind::Null]);
        if t.kind.is_collection() {
            kinds.extend([TargetKind::NotEmpty, TargetKind::Empty]);
        }
    }
    kinds.into_iter().map(|k| TestingTarget::rpc(k, f)).collect()
}

/// The FAULT target for one distinguishable fault of a function.
pub fn register_fault_target(f: &FunctionSpec, distinguisher: &str) -> TestingTarget {
    let owner = f.qualified_name();
    TestingTarget {
        id: format!("FAULT:{owner}:{distinguisher}"),
        kind: TargetKind::Fault,
        owner,
    }
}

/// One row of the response heuristic table.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct HeuristicRow {
    pub row: u8,
    pub outcome: &'static str,
    pub first: (TargetKind, f64),
    pub second: (TargetKind, f64),
    pub is_fault: bool,
}

const fn row(n: u8, outcome: &'static str, a: TargetKind, ha: f64, b: TargetKind, hb: f64, is_fault: bool) -> HeuristicRow {
    HeuristicRow {
        row: n,
        outcome,
        first: (a, ha),
        second: (b, hb),
        is_fault,
    }
}

use TargetKind::{Empty as EM, Error as ER, Fail as FA, Handled as HA, NotEmpty as NE, NotNull as NN, Null as NU, Success as SU};

pub const HEURISTIC_TABLE: [HeuristicRow; 12] = [
    row(1, "internal error", HA, 0.5, ER, 1.0, true),
    row(2, "user error", HA, 0.1, ER, 0.1, false),
    row(3, "other exception", HA, 0.5, ER, 1.0, false),
    row(4, "unexpected/declared exception", HA, 0.5, ER, 1.0, true),
    row(5, "handled", HA, 1.0, ER, 0.5, false),
    row(6, "success", SU, 1.0, FA, 0.5, false),
    row(7, "server error", SU, 0.5, FA, 1.0, true),
    row(8, "other error", SU, 0.1, FA, 0.1, false),
    row(9, "null response", NN, 0.5, NU, 1.0, false),
    row(10, "non-null response", NN, 1.0, NU, 0.5, false),
    row(11, "empty collection", NE, 0.5, EM, 1.0, false),
    row(12, "non-empty collection", NE, 1.0, EM, 0.5, false),
];

fn table_row(n: u8) -> &'static HeuristicRow {
    &HEURISTIC_TABLE[n as usize - 1]
}

/// The heuristic row for an execution class; ER3 has none.
pub fn row_for_class(er: ExecutionResultClass) -> Option<&'static HeuristicRow> {
    use ExecutionResultClass::*;
    Some(table_row(match er {
        InternalError => 1,
        UserError => 2,
        TransportError => return None,
        OtherException => 3,
        DeclaredException | UnexpectedException => 4,
        Handled => 5,
    }))
}

pub fn row_for_code(code: CallResultCode) -> &'static HeuristicRow {
    table_row(match code {
        CallResultCode::Success => 6,
        CallResultCode::ServiceError => 7,
        CallResultCode::OtherError => 8,
    })
}

pub fn row_for_nullness(is_null: bool) -> &'static HeuristicRow {
    table_row(if is_null { 9 } else { 10 })
}

pub fn row_for_emptiness(is_empty: bool) -> &'static HeuristicRow {
    table_row(if is_empty { 11 } else { 12 })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Classification {
    pub er_class: ExecutionResultClass,
    pub category: Option<ExceptionCategory>,
    pub exception_type: Option<ExceptionType>,
    pub result_code: Option<CallResultCode>,
}

/// Maps a call outcome to exactly one execution class.
///
/// Declared exceptions win over any recognized type; then internal errors,
/// user (protocol) errors, transport errors and remaining application types;
/// anything else raised is unexpected. A normal return is handled and may be
/// refined by `categorizer`.
pub fn classify_execution(
    response: &ActionResponse,
    f: &FunctionSpec,
    categorizer: Option<&dyn ResultCategorizer>,
) -> Classification {
    match &response.exception_info {
        Some(info) => Classification {
            er_class: classify_exception(info, f),
            category: Some(info.category),
            exception_type: Some(info.exception_type),
            result_code: None,
        },
        None => Classification {
            er_class: ExecutionResultClass::Handled,
            category: None,
            exception_type: None,
            result_code: categorizer.and_then(|c| c.categorize(response.response_phenotype.as_ref().unwrap_or(&serde_json::Value::Null))),
        },
    }
}

fn classify_exception(info: &ExceptionInfo, f: &FunctionSpec) -> ExecutionResultClass {
    use ExecutionResultClass as E;
    if f.declares(&info.exception_name) {
        return E::DeclaredException;
    }
    match info.exception_type.category() {
        ExceptionCategory::Application if info.exception_type == ExceptionType::AppInternalError => E::InternalError,
        ExceptionCategory::Application => E::OtherException,
        ExceptionCategory::User => E::UserError,
        ExceptionCategory::Transport => E::TransportError,
        ExceptionCategory::Unclassified => E::UnexpectedException,
    }
}

/// Fault identity within a function, when the outcome is a potential fault.
pub fn fault_distinguisher(c: &Classification, exception: Option<&ExceptionInfo>) -> Option<String> {
    use ExecutionResultClass as E;
    match c.er_class {
        E::InternalError => Some(E::InternalError.code().to_string()),
        E::DeclaredException | E::UnexpectedException => {
            let info = exception?;
            let frame = info.stack_top.as_deref().unwrap_or("-");
            Some(format!("{}:{}@{frame}", c.er_class.code(), info.exception_name))
        }
        E::Handled if c.result_code == Some(CallResultCode::ServiceError) => Some("SERVICE_ERROR".to_string()),
        _ => None,
    }
}

/// Heuristic values of every outcome target touched by one call, including
/// a covered FAULT target when the outcome is flagged as a potential fault.
pub fn fitness_for_result(
    f: &FunctionSpec,
    c: &Classification,
    flags: Option<ResponseFlags>,
    exception: Option<&ExceptionInfo>,
) -> FitnessVector {
    let mut out = FitnessVector::new();
    let mut put = |row: &HeuristicRow| {
        for (kind, h) in [row.first, row.second] {
            out.insert(TestingTarget::rpc(kind, f).id, h);
        }
    };
    let Some(main) = row_for_class(c.er_class) else {
        return out;
    };
    put(main);
    if c.er_class == ExecutionResultClass::Handled {
        if let Some(code) = c.result_code {
            put(row_for_code(code));
        }
        if let (Some(flags), Some(_)) = (flags, f.response_type.as_ref()) {
            put(row_for_nullness(flags.is_null));
            if let Some(empty) = flags.is_empty_collection {
                put(row_for_emptiness(empty));
            }
        }
    }
    if let Some(d) = fault_distinguisher(c, exception) {
        out.insert(register_fault_target(f, &d).id, 1.0);
    }
    out
}

/// Append-only target set with dense indices.
#[derive(Debug, Clone, Default)]
pub struct TargetRegistry {
    targets: Vec<TestingTarget>,
    index: BTreeMap<String, usize>,
}

impl TargetRegistry {
    pub fn new() -> Self {
        Self::default()
    }

    /// Index of the target, registering it on first sight.
    pub fn register(&mut self, t: TestingTarget) -> usize {
        if let Some(&i) = self.index.get(&t.id) {
            return i;
        }
        let i = self.targets.len();
        self.index.insert(t.id.clone(), i);
        self.targets.push(t);
        i
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.index.get(id).copied()
    }

    pub fn get(&self, i: usize) -> &TestingTarget {
        &self.targets[i]
    }

    pub fn len(&self) -> usize {
        self.targets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.targets.is_empty()
    }

    pub fn iter(&self) -> impl Iterator<Item = &TestingTarget> {
        self.targets.iter()
    }
}

/// Coverage of one target at the end of a run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct TargetStat {
    pub target: String,
    pub kind: TargetKind,
    pub best_h: f64,
    pub covering_test: Option<String>,
}

pub fn stats_to_csv(stats: &[TargetStat]) -> String {
    let mut out = String::from("target,kind,best_h,covering_test\n");
    for s in stats {
        let target = if s.target.contains([',', '"', '\n']) {
            format!("\"{}\"", s.target.replace('"', "\"\""))
        } else {
            s.target.clone()
        };
        out.push_str(&format!(
            "{target},{},{},{}\n",
            s.kind,
            s.best_h,
            s.covering_test.as_deref().unwrap_or("")
        ));
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::schema::{SupportedDataType as K, TypeSpec};

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

    fn kinds(ts: &[TestingTarget]) -> Vec<TargetKind> {
        ts.iter().map(|t| t.kind).collect()
    }

    #[test]
    fn targets_per_function_shape() {
        use TargetKind::*;
        let dto = function(Some(TypeSpec::simple(K::CustomObject, "Dto")));
        assert_eq!(kinds(&register_targets_for_function(&dto, false)), [Handled, Error, NotNull, Null]);
        assert_eq!(kinds(&register_targets_for_function(&function(None), false)), [Handled, Error]);
        let list = function(Some(TypeSpec::sequence(K::List, TypeSpec::simple(K::Int, "Integer"))));
        assert_eq!(register_targets_for_function(&list, true).len(), 8);
    }

    fn exception(name: &str, ty: ExceptionType, frame: Option<&str>) -> ExceptionInfo {
        let mut e = ExceptionInfo::new(name, "boom", ty);
        e.stack_top = frame.map(str::to_string);
        e
    }

    fn classify(e: Option<ExceptionInfo>) -> Classification {
        let r = ActionResponse {
            exception_info: e,
            ..ActionResponse::returned(None)
        };
        classify_execution(&r, &function(None), None)
    }

    #[test]
    fn classification_examples() {
        let c = classify(Some(exception("TApplicationException", ExceptionType::AppInternalError, None)));
        assert_eq!(
            (c.er_class, c.category, c.exception_type, c.result_code),
            (
                ExecutionResultClass::InternalError,
                Some(ExceptionCategory::Application),
                Some(ExceptionType::AppInternalError),
                None
            )
        );
        assert_eq!(classify(None).er_class, ExecutionResultClass::Handled);
        let c = classify(Some(exception("QuotaExceeded", ExceptionType::CustomizedException, None)));
        assert_eq!(c.er_class, ExecutionResultClass::DeclaredException);
        assert_eq!(c.category, Some(ExceptionCategory::Unclassified));
        let c = classify(Some(exception("IllegalState", ExceptionType::UnexpectedException, None)));
        assert_eq!(c.er_class, ExecutionResultClass::UnexpectedException);
        let c = classify(Some(exception("TProtocolException", ExceptionType::ProtocolInvalidData, None)));
        assert_eq!(c.er_class, ExecutionResultClass::UserError);
        let c = classify(Some(exception("TTransportException", ExceptionType::TransportTimedOut, None)));
        assert_eq!(c.er_class, ExecutionResultClass::TransportError);
        let c = classify(Some(exception("TApplicationException", ExceptionType::AppMissingResult, None)));
        assert_eq!(c.er_class, ExecutionResultClass::OtherException);
    }

    #[test]
    fn transport_errors_score_nothing() {
        let f = function(None);
        let e = exception("TTransportException", ExceptionType::TransportTimedOut, None);
        let c = classify(Some(e.clone()));
        assert!(fitness_for_result(&f, &c, None, Some(&e)).is_empty());
    }

    #[test]
    fn fault_dedup() {
        let f = function(None);
        let ids = |e: ExceptionInfo| {
            let c = classify(Some(e.clone()));
            fitness_for_result(&f, &c, None, Some(&e))
                .into_keys()
                .filter(|k| k.starts_with("FAULT"))
                .collect::<Vec<_>>()
        };
        let a = ids(exception("NullPointer", ExceptionType::UnexpectedException, Some("Svc.op:10")));
        let a2 = ids(exception("NullPointer", ExceptionType::UnexpectedException, Some("Svc.op:10")));
        let b = ids(exception("IndexOutOfBounds", ExceptionType::UnexpectedException, Some("Svc.op:10")));
        assert_eq!(a.len(), 1);
        assert_eq!(a, a2);
        assert_ne!(a, b);
        assert!(ids(exception("TProtocolException", ExceptionType::ProtocolInvalidData, None)).is_empty());
    }

    #[test]
    fn registry_dedups() {
        let mut r = TargetRegistry::new();
        let f = function(None);
        let a = r.register(TestingTarget::rpc(TargetKind::Handled, &f));
        let b = r.register(TestingTarget::rpc(TargetKind::Handled, &f));
        assert_eq!(a, b);
        assert_eq!(r.len(), 1);
    }

    #[test]
    fn csv_layout() {
        let csv = stats_to_csv(&[TargetStat {
            target: "HANDLED:Svc.op".into(),
            kind: TargetKind::Handled,
            best_h: 1.0,
            covering_test: Some("t3".into()),
        }]);
        assert_eq!(csv, "target,kind,best_h,covering_test\nHANDLED:Svc.op,HANDLED,1,t3\n");
    }
}
