//! Branch-distance probes placed by hand inside simulated services.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

/// Largest normalized distance; 1.0 itself is never produced.
pub const MAX_DISTANCE: f64 = 1.0 - f64::EPSILON / 2.0;
/// Added to strict inequalities so that equality still has a distance.
pub const K: f64 = 1.0;
/// Weight of each character of length difference in string distance.
pub const STRING_LENGTH_WEIGHT: f64 = 65535.0;

/// `d / (d + 1)`, clamped below 1.
pub fn normalize(d: f64) -> f64 {
    if d.is_nan() || d == f64::INFINITY {
        return MAX_DISTANCE;
    }
    if d <= 0.0 {
        return 0.0;
    }
    (d / (d + 1.0)).min(MAX_DISTANCE)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CmpOp {
    Eq,
    Ne,
    Lt,
    Le,
    Gt,
    Ge,
}

impl CmpOp {
    pub fn eval(self, lhs: f64, rhs: f64) -> bool {
        match self {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }
}

/// Raw (unnormalized) distances to making the predicate true and false.
pub fn numeric_distances(lhs: f64, rhs: f64, op: CmpOp) -> (f64, f64) {
    let diff = (lhs - rhs).abs();
    let eq = (diff, if lhs == rhs { K } else { 0.0 });
    let lt = (if lhs < rhs { 0.0 } else { lhs - rhs + K }, if lhs >= rhs { 0.0 } else { rhs - lhs });
    let le = (if lhs <= rhs { 0.0 } else { lhs - rhs }, if lhs > rhs { 0.0 } else { rhs - lhs + K });
    match op {
        CmpOp::Eq => eq,
        CmpOp::Ne => (eq.1, eq.0),
        CmpOp::Lt => lt,
        CmpOp::Ge => (lt.1, lt.0),
        CmpOp::Le => le,
        CmpOp::Gt => (le.1, le.0),
    }
}

/// Left-aligned distance: weighted length difference plus codepoint deltas
/// over the common prefix length.
pub fn string_distance(lhs: &str, rhs: &str) -> f64 {
    let a: Vec<char> = lhs.chars().collect();
    let b: Vec<char> = rhs.chars().collect();
    let mut d = a.len().abs_diff(b.len()) as f64 * STRING_LENGTH_WEIGHT;
    for (x, y) in a.iter().zip(b.iter()) {
        d += (*x as i64 - *y as i64).unsigned_abs() as f64;
    }
    d
}

/// Java `String.compareTo`: first codepoint difference, else length difference.
pub fn java_compare(lhs: &str, rhs: &str) -> i64 {
    for (x, y) in lhs.chars().zip(rhs.chars()) {
        if x != y {
            return x as i64 - y as i64;
        }
    }
    lhs.chars().count() as i64 - rhs.chars().count() as i64
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct BranchProbe {
    pub probe_id: String,
    pub last_distance_true: f64,
    pub last_distance_false: f64,
    pub covered_true: bool,
    pub covered_false: bool,
}

/// Best distances a probe reached during one call.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct ProbeReading {
    pub probe: String,
    pub d_true: f64,
    pub d_false: f64,
}

/// Probe state of one service instance plus the trace of the current call.
#[derive(Debug, Clone, Default)]
pub struct ProbeSet {
    probes: BTreeMap<String, BranchProbe>,
    trace: BTreeMap<String, (f64, f64)>,
}

impl ProbeSet {
    pub fn new() -> Self {
        Self::default()
    }

    fn record(&mut self, id: &str, d_true: f64, d_false: f64) {
        let (dt, df) = (normalize(d_true), normalize(d_false));
        let p = self.probes.entry(id.to_string()).or_insert_with(|| BranchProbe {
            probe_id: id.to_string(),
            last_distance_true: 1.0,
            last_distance_false: 1.0,
            covered_true: false,
            covered_false: false,
        });
        p.last_distance_true = dt;
        p.last_distance_false = df;
        p.covered_true |= dt == 0.0;
        p.covered_false |= df == 0.0;
        let t = self.trace.entry(id.to_string()).or_insert((dt, df));
        t.0 = t.0.min(dt);
        t.1 = t.1.min(df);
    }

    pub fn cmp_numeric(&mut self, id: &str, lhs: f64, rhs: f64, op: CmpOp) -> bool {
        let (dt, df) = numeric_distances(lhs, rhs, op);
        self.record(id, dt, df);
        op.eval(lhs, rhs)
    }

    pub fn cmp_int(&mut self, id: &str, lhs: i64, rhs: i64, op: CmpOp) -> bool {
        let (dt, df) = numeric_distances(lhs as f64, rhs as f64, op);
        self.record(id, dt, df);
        match op {
            CmpOp::Eq => lhs == rhs,
            CmpOp::Ne => lhs != rhs,
            CmpOp::Lt => lhs < rhs,
            CmpOp::Le => lhs <= rhs,
            CmpOp::Gt => lhs > rhs,
            CmpOp::Ge => lhs >= rhs,
        }
    }

    /// String equality.
    pub fn cmp_string(&mut self, id: &str, lhs: &str, rhs: &str) -> bool {
        let d = string_distance(lhs, rhs);
        let eq = lhs == rhs;
        self.record(id, d, if eq { K } else { 0.0 });
        eq
    }

    /// `lhs.compareTo(rhs) <op> 0`.
    pub fn cmp_string_order(&mut self, id: &str, lhs: &str, rhs: &str, op: CmpOp) -> bool {
        self.cmp_int(id, java_compare(lhs, rhs), 0, op)
    }

    /// A predicate without a gradient.
    pub fn flag(&mut self, id: &str, value: bool) -> bool {
        self.record(id, if value { 0.0 } else { K }, if value { K } else { 0.0 });
        value
    }

    pub fn probe(&self, id: &str) -> Option<&BranchProbe> {
        self.probes.get(id)
    }

    pub fn begin_call(&mut self) {
        self.trace.clear();
    }

    /// Readings of the current call, ordered by probe id.
    pub fn take_trace(&mut self) -> Vec<ProbeReading> {
        std::mem::take(&mut self.trace)
            .into_iter()
            .map(|(probe, (d_true, d_false))| ProbeReading { probe, d_true, d_false })
            .collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn equality_examples() {
        let mut p = ProbeSet::new();
        assert!(p.cmp_numeric("a", 5.0, 5.0, CmpOp::Eq));
        assert_eq!(p.probe("a").unwrap().last_distance_true, 0.0);
        assert_eq!(p.probe("a").unwrap().last_distance_false, 0.5);
        assert!(!p.cmp_numeric("a", 3.0, 5.0, CmpOp::Eq));
        assert!((p.probe("a").unwrap().last_distance_true - 2.0 / 3.0).abs() < 1e-15);
        assert!(!p.cmp_numeric("b", 5.0, 5.0, CmpOp::Lt));
        assert_eq!(p.probe("b").unwrap().last_distance_true, 0.5);
    }

    #[test]
    fn string_examples() {
        let mut p = ProbeSet::new();
        assert!(p.cmp_string("s", "abc", "abc"));
        assert_eq!(p.probe("s").unwrap().last_distance_true, 0.0);
        assert!(!p.cmp_string("s", "abd", "abc"));
        assert_eq!(p.probe("s").unwrap().last_distance_true, 0.5);
        assert!(!p.cmp_string("s", "", "a"));
        assert!(p.probe("s").unwrap().last_distance_true > 0.0);
    }

    #[test]
    fn trace_keeps_best_per_call() {
        let mut p = ProbeSet::new();
        p.begin_call();
        p.cmp_int("loop", 10, 0, CmpOp::Eq);
        p.cmp_int("loop", 1, 0, CmpOp::Eq);
        p.cmp_int("loop", 4, 0, CmpOp::Eq);
        let t = p.take_trace();
        assert_eq!(t.len(), 1);
        assert_eq!(t[0].d_true, 0.5);
        assert!(p.take_trace().is_empty());
    }

    #[test]
    fn normalization_bounds() {
        assert_eq!(normalize(0.0), 0.0);
        assert!(normalize(f64::INFINITY) < 1.0);
        assert!(normalize(1e300) < 1.0);
        assert!(normalize(f64::NAN) < 1.0);
    }

    #[test]
    fn compare_to() {
        assert_eq!(java_compare("abc", "abd"), -1);
        assert_eq!(java_compare("ab", "abc"), -1);
        assert_eq!(java_compare("b", "a"), 1);
    }
}
