//! Independent oracles and generators shared by the integration tests.
//!
//! Nothing here calls into the code under test to decide what is correct:
//! constraint checks, closures and expected classes are re-derived from
//! their definitions.

#![allow(dead_code)]

use std::collections::{BTreeMap, BTreeSet};
use std::io::{BufRead, BufReader, Read, Write};
use std::net::{TcpListener, TcpStream};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;
use std::time::Duration;

use proptest::prelude::*;
use serde_json::{json, Number, Value};

use rpcfuzz::executor::RawOutcome;
use rpcfuzz::fitness::{ExceptionType, ExecutionResultClass};
use rpcfuzz::harness::SimulatedService;
use rpcfuzz::schema::{ParamSpec, RpcSchema, SupportedDataType as K, TypeSpec};

// ---------------------------------------------------------------------------
// Response heuristic table, transcribed row by row.

/// `(row, first target, h, second target, h, is_fault)`.
pub const EXPECTED_HEURISTICS: [(u8, &str, f64, &str, f64, bool); 12] = [
    (1, "HANDLED", 0.5, "ERROR", 1.0, true),
    (2, "HANDLED", 0.1, "ERROR", 0.1, false),
    (3, "HANDLED", 0.5, "ERROR", 1.0, false),
    (4, "HANDLED", 0.5, "ERROR", 1.0, true),
    (5, "HANDLED", 1.0, "ERROR", 0.5, false),
    (6, "SUCCESS", 1.0, "FAIL", 0.5, false),
    (7, "SUCCESS", 0.5, "FAIL", 1.0, true),
    (8, "SUCCESS", 0.1, "FAIL", 0.1, false),
    (9, "NOT_NULL", 0.5, "NULL", 1.0, false),
    (10, "NOT_NULL", 1.0, "NULL", 0.5, false),
    (11, "NOT_EMPTY", 0.5, "EMPTY", 1.0, false),
    (12, "NOT_EMPTY", 1.0, "EMPTY", 0.5, false),
];

// ---------------------------------------------------------------------------
// Execution classes from their definition.

pub fn expected_er_class(
    exception: Option<(&str, ExceptionType)>,
    declared: &[String],
) -> ExecutionResultClass {
    use ExecutionResultClass as E;
    let Some((name, t)) = exception else {
        return E::Handled;
    };
    let simple = name.rsplit(['.', '$']).next().unwrap();
    if declared.iter().any(|d| d == name || d == simple) {
        return E::DeclaredException;
    }
    let wire = serde_json::to_value(t).unwrap();
    let wire = wire.as_str().unwrap();
    if wire == "APP_INTERNAL_ERROR" {
        E::InternalError
    } else if wire.starts_with("APP_") {
        E::OtherException
    } else if wire.starts_with("PROTOCOL_") {
        E::UserError
    } else if wire.starts_with("TRANSPORT_") {
        E::TransportError
    } else {
        E::UnexpectedException
    }
}

// ---------------------------------------------------------------------------
// Foreign-key closure via union-find.

pub fn fk_components(tables: &[String], edges: &[(String, String)], seeds: &BTreeSet<String>) -> BTreeSet<String> {
    let idx: BTreeMap<&str, usize> = tables.iter().enumerate().map(|(i, t)| (t.as_str(), i)).collect();
    let mut parent: Vec<usize> = (0..tables.len()).collect();
    fn find(p: &mut [usize], x: usize) -> usize {
        let mut r = x;
        while p[r] != r {
            r = p[r];
        }
        let mut c = x;
        while p[c] != r {
            let n = p[c];
            p[c] = r;
            c = n;
        }
        r
    }
    for (a, b) in edges {
        let (ra, rb) = (find(&mut parent, idx[a.as_str()]), find(&mut parent, idx[b.as_str()]));
        parent[ra] = rb;
    }
    let roots: BTreeSet<usize> = seeds.iter().map(|s| find(&mut parent, idx[s.as_str()])).collect();
    tables
        .iter()
        .enumerate()
        .filter(|(i, _)| roots.contains(&find(&mut parent, *i)))
        .map(|(_, t)| t.clone())
        .collect()
}

// ---------------------------------------------------------------------------
// Parameter constraint oracle.

fn in_bounds(v: f64, spec: &ParamSpec) -> bool {
    let lo = spec.min_value.as_ref().and_then(Number::as_f64);
    let hi = spec.max_value.as_ref().and_then(Number::as_f64);
    let lo_ok = lo.is_none_or(|m| if spec.min_inclusive { v >= m } else { v > m });
    let hi_ok = hi.is_none_or(|m| if spec.max_inclusive { v <= m } else { v < m });
    lo_ok && hi_ok
}

fn in_int_bounds(v: i128, spec: &ParamSpec) -> bool {
    let as_i = |n: &Number| n.as_i64().map(i128::from).or_else(|| n.as_u64().map(i128::from));
    let lo_ok = match spec.min_value.as_ref() {
        Some(n) => match as_i(n) {
            Some(m) => if spec.min_inclusive { v >= m } else { v > m },
            None => in_bounds(v as f64, spec),
        },
        None => true,
    };
    let hi_ok = match spec.max_value.as_ref() {
        Some(n) => match as_i(n) {
            Some(m) => if spec.max_inclusive { v <= m } else { v < m },
            None => in_bounds(v as f64, spec),
        },
        None => true,
    };
    lo_ok && hi_ok
}

fn size_ok(n: usize, spec: &ParamSpec) -> bool {
    spec.min_size.is_none_or(|m| n as u64 >= m) && spec.max_size.is_none_or(|m| n as u64 <= m)
}

fn valid_date(s: &str) -> bool {
    let b = s.as_bytes();
    if b.len() != 19 || b[4] != b'-' || b[7] != b'-' || b[10] != b'T' || b[13] != b':' || b[16] != b':' {
        return false;
    }
    let num = |r: std::ops::Range<usize>| s[r].parse::<u32>().ok();
    let (Some(y), Some(mo), Some(d), Some(h), Some(mi), Some(se)) =
        (num(0..4), num(5..7), num(8..10), num(11..13), num(14..16), num(17..19))
    else {
        return false;
    };
    let leap = (y % 4 == 0 && y % 100 != 0) || y % 400 == 0;
    let days = match mo {
        1 | 3 | 5 | 7 | 8 | 10 | 12 => 31,
        4 | 6 | 9 | 11 => 30,
        2 if leap => 29,
        2 => 28,
        _ => return false,
    };
    (1..=days).contains(&d) && h < 24 && mi < 60 && se < 60
}

fn decimal_ok(s: &str, spec: &ParamSpec) -> Result<(), String> {
    let body = s.strip_prefix('-').unwrap_or(s);
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() || !int.bytes().all(|c| c.is_ascii_digit()) || !frac.bytes().all(|c| c.is_ascii_digit()) {
        return Err(format!("'{s}' is not a plain decimal"));
    }
    if let Some(scale) = spec.scale {
        if frac.len() > scale as usize {
            return Err(format!("'{s}' has more than {scale} fraction digits"));
        }
    }
    if let Some(p) = spec.precision {
        let digits = int.trim_start_matches('0').len() + frac.len();
        if digits > p as usize {
            return Err(format!("'{s}' has more than {p} digits"));
        }
    }
    let v: f64 = s.parse().unwrap();
    if !in_bounds(v, spec) {
        return Err(format!("{s} out of bounds"));
    }
    Ok(())
}

/// Constraint violations of `value` against `spec`; empty when admissible.
pub fn violations(schema: &RpcSchema, spec: &ParamSpec, value: &Value) -> Vec<String> {
    let mut out = Vec::new();
    check(schema, spec, value, &spec.name, &mut out);
    out
}

fn check(schema: &RpcSchema, spec: &ParamSpec, value: &Value, path: &str, out: &mut Vec<String>) {
    let mut bad = |m: String| out.push(format!("{path}: {m}"));
    if !spec.is_mutable {
        if let Some(d) = &spec.default_value {
            if value != d {
                bad(format!("immutable value {value} differs from default {d}"));
            }
        }
        return;
    }
    if value.is_null() {
        if !spec.is_nullable {
            bad("null for a non-nullable parameter".into());
        }
        return;
    }
    let int_range = |k: K| -> (i128, i128) {
        match k {
            K::Byte => (i8::MIN as i128, i8::MAX as i128),
            K::Short => (i16::MIN as i128, i16::MAX as i128),
            K::Int => (i32::MIN as i128, i32::MAX as i128),
            _ => (i64::MIN as i128, i64::MAX as i128),
        }
    };
    match spec.kind() {
        k @ (K::Int | K::Short | K::Byte | K::Long) => {
            let Some(v) = value.as_i64() else {
                return bad(format!("{value} is not an integer"));
            };
            let (lo, hi) = int_range(k);
            if !(lo..=hi).contains(&(v as i128)) {
                bad(format!("{v} outside the {k:?} range"));
            }
            if !in_int_bounds(v as i128, spec) {
                bad(format!("{v} out of bounds"));
            }
        }
        k @ (K::Double | K::Float) => {
            let Some(v) = value.as_f64() else {
                return bad(format!("{value} is not a number"));
            };
            if !v.is_finite() {
                bad(format!("{v} not finite"));
            }
            if k == K::Float && format!("{}", v as f32).parse::<f64>().ok() != Some(v) {
                bad(format!("{v} is not the shortest spelling of an f32"));
            }
            if !in_bounds(v, spec) {
                bad(format!("{v} out of bounds"));
            }
            if let Some(s) = spec.scale {
                let text = value.to_string();
                let frac = text.split_once('.').map_or(0, |(_, f)| f.trim_end_matches('0').len());
                if text.contains(['e', 'E']) {
                    let scaled = v * 10f64.powi(s as i32);
                    if (scaled - scaled.round()).abs() > 1e-6 * scaled.abs().max(1.0) {
                        bad(format!("{v} has more than {s} decimals"));
                    }
                } else if frac > s as usize {
                    bad(format!("{v} has more than {s} decimals"));
                }
            }
        }
        K::BigInteger => {
            let Some(s) = value.as_str() else {
                return bad(format!("{value} is not a decimal string"));
            };
            let Ok(v) = s.parse::<i128>() else {
                return bad(format!("'{s}' is not an integer"));
            };
            if !in_int_bounds(v, spec) {
                bad(format!("{v} out of bounds"));
            }
            if let Some(p) = spec.precision {
                if v.unsigned_abs().to_string().len() > p as usize {
                    bad(format!("{v} has more than {p} digits"));
                }
            }
        }
        K::BigDecimal => match value.as_str() {
            Some(s) => {
                if let Err(m) = decimal_ok(s, spec) {
                    bad(m);
                }
            }
            None => bad(format!("{value} is not a decimal string")),
        },
        K::Boolean => {
            if !value.is_boolean() {
                bad(format!("{value} is not a boolean"));
            }
        }
        K::Date => match value.as_str() {
            Some(s) if valid_date(s) => {}
            _ => bad(format!("{value} is not a valid date-time")),
        },
        K::Char => match value.as_str() {
            Some(s) if s.chars().count() == 1 => {}
            _ => bad(format!("{value} is not one character")),
        },
        K::String | K::ByteBuffer => {
            let Some(s) = value.as_str() else {
                return bad(format!("{value} is not a string"));
            };
            if let Some(p) = &spec.pattern {
                let re = regex::Regex::new(&format!("^(?:{p})$")).unwrap();
                if !re.is_match(s) {
                    bad(format!("'{s}' does not match /{p}/"));
                }
            } else if spec.min_value.is_some() || spec.max_value.is_some() {
                match s.parse::<f64>() {
                    Ok(v) if in_bounds(v, spec) => {}
                    _ => bad(format!("'{s}' is not a number within bounds")),
                }
                return;
            }
            if !size_ok(s.chars().count(), spec) {
                bad(format!("length {} outside size bounds", s.chars().count()));
            }
        }
        K::Enum => {
            let items = &schema.resolve(&spec.type_spec.type_name).unwrap().enum_items;
            if !value.as_str().is_some_and(|s| items.iter().any(|i| i == s)) {
                bad(format!("{value} is not one of {items:?}"));
            }
        }
        K::List | K::Set | K::Array => {
            let Some(items) = value.as_array() else {
                return bad(format!("{value} is not an array"));
            };
            if !size_ok(items.len(), spec) {
                bad(format!("size {} outside size bounds", items.len()));
            }
            if spec.kind() == K::Set {
                let distinct: BTreeSet<String> = items.iter().map(Value::to_string).collect();
                if distinct.len() != items.len() {
                    bad("set with duplicate elements".into());
                }
            }
            let elem = spec.inner_content.first().cloned().unwrap_or_else(|| {
                ParamSpec::new("elem", spec.type_spec.example.as_deref().unwrap().clone())
            });
            for (i, v) in items.iter().enumerate() {
                check(schema, &elem, v, &format!("{path}[{i}]"), out);
            }
        }
        K::Map => {
            let Some(map) = value.as_object() else {
                return bad(format!("{value} is not an object"));
            };
            if !size_ok(map.len(), spec) {
                bad(format!("size {} outside size bounds", map.len()));
            }
            let (kspec, vspec) = (&spec.inner_content[0], &spec.inner_content[1]);
            for (k, v) in map {
                let key = match kspec.kind() {
                    K::Int | K::Long | K::Short | K::Byte => match k.parse::<i64>() {
                        Ok(n) => json!(n),
                        Err(_) => {
                            out.push(format!("{path}: key '{k}' is not an integer"));
                            continue;
                        }
                    },
                    _ => Value::String(k.clone()),
                };
                check(schema, kspec, &key, &format!("{path}.key"), out);
                check(schema, vspec, v, &format!("{path}[{k}]"), out);
            }
        }
        K::CustomObject => {
            let Some(obj) = value.as_object() else {
                return bad(format!("{value} is not an object"));
            };
            let fields = if spec.inner_content.is_empty() {
                &schema.resolve(&spec.type_spec.type_name).unwrap().fields
            } else {
                &spec.inner_content
            };
            let expected: BTreeSet<&str> = fields.iter().map(|f| f.name.as_str()).collect();
            let actual: BTreeSet<&str> = obj.keys().map(String::as_str).collect();
            if expected != actual {
                out.push(format!("{path}: fields {actual:?} differ from {expected:?}"));
                return;
            }
            for f in fields {
                check(schema, f, &obj[&f.name], &format!("{path}.{}", f.name), out);
            }
        }
    }
}

// ---------------------------------------------------------------------------
// Random parameter specs.

pub const ENUM_NAME: &str = "Color";

/// Schema holding the named types referenced by [`param_spec`].
pub fn param_schema() -> RpcSchema {
    rpcfuzz::schema::parse_thrift_idl("enum Color { RED, GREEN, BLUE }\nservice S { void f() }").unwrap()
}

/// Regular expressions inside the supported subset.
pub const PATTERNS: [&str; 10] = [
    "[a-z]{3}",
    "\\d{2,4}",
    "(foo|bar)-[0-9]+",
    "[A-Z][a-z]*",
    "a?b+c*",
    "x{2}(y|z){1,3}",
    "[0-9a-f]{8}",
    "(ab)+|cd",
    "[^a-z]{1,2}",
    "\\w+@\\w+\\.com",
];

fn bounds<T: Copy + PartialOrd>(a: T, b: T) -> (T, T) {
    if a <= b {
        (a, b)
    } else {
        (b, a)
    }
}

fn int_spec() -> impl Strategy<Value = ParamSpec> {
    (
        prop_oneof![Just((K::Int, "i32")), Just((K::Long, "i64")), Just((K::Short, "i16")), Just((K::Byte, "byte"))],
        proptest::option::of((-120i64..120, -120i64..120)),
        any::<bool>(),
        any::<bool>(),
    )
        .prop_map(|((k, name), b, lo_inc, hi_inc)| {
            let mut p = ParamSpec::new("n", TypeSpec::simple(k, name));
            if let Some((a, b)) = b {
                let (lo, hi) = bounds(a, b);
                let wide = hi - lo >= 2;
                p.min_value = Some(lo.into());
                p.max_value = Some(hi.into());
                p.min_inclusive = lo_inc || !wide;
                p.max_inclusive = hi_inc || !wide;
            }
            p
        })
}

fn float_spec() -> impl Strategy<Value = ParamSpec> {
    (
        prop_oneof![Just((K::Double, "double")), Just((K::Float, "float"))],
        proptest::option::of((-1e6f64..1e6, 1.0f64..1e5)),
        proptest::option::of(0u32..4),
        any::<bool>(),
    )
        .prop_map(|((k, name), b, scale, exclusive)| {
            let mut p = ParamSpec::new("x", TypeSpec::simple(k, name));
            if let Some((lo, width)) = b {
                let (lo, hi) = (lo.round(), (lo + width).round() + 1.0);
                p.min_value = Number::from_f64(lo);
                p.max_value = Number::from_f64(hi);
                p.min_inclusive = !exclusive;
            }
            p.scale = scale;
            p
        })
}

fn decimal_spec() -> impl Strategy<Value = ParamSpec> {
    (1u32..18, 0u32..6, proptest::option::of((-1000i64..1000, 1i64..1000))).prop_map(|(precision, scale, b)| {
        let scale = scale.min(precision - 1);
        let mut p = ParamSpec::new("d", TypeSpec::simple(K::BigDecimal, "BigDecimal"));
        p.precision = Some(precision);
        p.scale = Some(scale);
        if let Some((lo, w)) = b {
            let cap = 10f64.powi((precision - scale) as i32) - 1.0;
            let lo = (lo as f64).clamp(-cap, cap);
            let hi = (lo + w as f64).clamp(-cap, cap);
            p.min_value = Number::from_f64(lo.min(hi));
            p.max_value = Number::from_f64(hi.max(lo));
        }
        p
    })
}

fn big_integer_spec() -> impl Strategy<Value = ParamSpec> {
    (proptest::option::of(1u32..30), proptest::option::of((-10_000i64..10_000, 0i64..10_000))).prop_map(|(precision, b)| {
        let mut p = ParamSpec::new("b", TypeSpec::simple(K::BigInteger, "BigInteger"));
        p.precision = precision;
        if let Some((lo, w)) = b {
            let cap = precision.map_or(i64::MAX, |d| 10i64.saturating_pow(d).saturating_sub(1));
            let lo = lo.clamp(-cap, cap);
            p.min_value = Some(lo.into());
            p.max_value = Some(lo.saturating_add(w).min(cap).into());
        }
        p
    })
}

fn string_spec() -> impl Strategy<Value = ParamSpec> {
    prop_oneof![
        (0u64..5, 0u64..20).prop_map(|(min, extra)| {
            let mut p = ParamSpec::new("s", TypeSpec::simple(K::String, "string"));
            p.min_size = Some(min);
            p.max_size = Some(min + extra);
            p
        }),
        Just(ParamSpec::new("s", TypeSpec::simple(K::String, "string"))),
        proptest::sample::select(PATTERNS.to_vec()).prop_map(|pat| {
            let mut p = ParamSpec::new("s", TypeSpec::simple(K::String, "string"));
            p.pattern = Some(pat.to_string());
            p
        }),
        (-500i64..500, 0i64..500).prop_map(|(lo, w)| {
            let mut p = ParamSpec::new("s", TypeSpec::simple(K::String, "string"));
            p.min_value = Some(lo.into());
            p.max_value = Some((lo + w).into());
            p
        }),
        Just(ParamSpec::new("c", TypeSpec::simple(K::Char, "char"))),
        Just(ParamSpec::new("bb", TypeSpec::simple(K::ByteBuffer, "binary"))),
    ]
}

fn leaf_spec() -> impl Strategy<Value = ParamSpec> {
    prop_oneof![
        int_spec(),
        float_spec(),
        decimal_spec(),
        big_integer_spec(),
        string_spec(),
        Just(ParamSpec::new("flag", TypeSpec::simple(K::Boolean, "bool"))),
        Just(ParamSpec::new("when", TypeSpec::simple(K::Date, "Date"))),
        Just(ParamSpec::new("color", TypeSpec::simple(K::Enum, ENUM_NAME))),
    ]
}

fn nullable(p: BoxedStrategy<ParamSpec>) -> BoxedStrategy<ParamSpec> {
    (p, proptest::bool::weighted(0.3))
        .prop_map(|(mut p, n)| {
            p.is_nullable = n;
            p
        })
        .boxed()
}

fn collection_sizes(mut p: ParamSpec, sizes: Option<(u64, u64)>) -> ParamSpec {
    if let Some((min, extra)) = sizes {
        p.min_size = Some(min);
        p.max_size = Some(min + extra);
    }
    p
}

/// Random specs up to three levels deep, covering every data type.
pub fn param_spec() -> BoxedStrategy<ParamSpec> {
    let leaf = nullable(leaf_spec().boxed());
    leaf.prop_recursive(3, 24, 4, |inner| {
        let sizes = proptest::option::of((0u64..3, 0u64..5));
        let set_elem = prop_oneof![
            (-1000i64..0, 100i64..1000).prop_map(|(lo, hi)| {
                let mut p = ParamSpec::new("e", TypeSpec::simple(K::Int, "i32"));
                p.min_value = Some(lo.into());
                p.max_value = Some(hi.into());
                p
            }),
            Just({
                let mut p = ParamSpec::new("e", TypeSpec::simple(K::String, "string"));
                p.min_size = Some(4);
                p.max_size = Some(12);
                p
            }),
        ];
        let key = prop_oneof![
            Just(ParamSpec::new("k", TypeSpec::simple(K::String, "string"))),
            Just(ParamSpec::new("k", TypeSpec::simple(K::Int, "i32"))),
        ];
        nullable(
            prop_oneof![
                (inner.clone(), prop_oneof![Just(K::List), Just(K::Array)], sizes.clone()).prop_map(|(e, k, s)| {
                    let mut p = ParamSpec::new("list", TypeSpec::sequence(k, e.type_spec.clone()));
                    p.inner_content = vec![e];
                    collection_sizes(p, s)
                }),
                (set_elem, proptest::option::of((0u64..3, 0u64..3))).prop_map(|(e, s)| {
                    let mut p = ParamSpec::new("set", TypeSpec::sequence(K::Set, e.type_spec.clone()));
                    p.inner_content = vec![e];
                    collection_sizes(p, s)
                }),
                (key, inner.clone(), proptest::option::of((0u64..2, 0u64..4))).prop_map(|(k, v, s)| {
                    let mut p = ParamSpec::new("map", TypeSpec::map(k.type_spec.clone(), v.type_spec.clone()));
                    p.inner_content = vec![k, v];
                    collection_sizes(p, s)
                }),
                (proptest::collection::vec(inner, 1..4), any::<u64>()).prop_map(|(fields, id)| {
                    let fields: Vec<ParamSpec> = fields
                        .into_iter()
                        .enumerate()
                        .map(|(i, mut f)| {
                            f.name = format!("f{i}");
                            f
                        })
                        .collect();
                    let mut p = ParamSpec::new("obj", TypeSpec::simple(K::CustomObject, format!("Obj{id}")));
                    p.inner_content = fields;
                    p
                }),
            ]
            .boxed(),
        )
    })
    .boxed()
}

// ---------------------------------------------------------------------------
// Minimal HTTP front end for a simulated service.

/// Behaviour of the test server, chosen by request path.
///
/// `/rpc` serves the wrapped harness, `/reset` smart-resets it (204),
/// `/status500` answers 500 with a text body, `/garbage` answers 200 with
/// non-JSON, `/slow` sleeps before answering.
pub struct HarnessServer {
    pub base: String,
    stop: Arc<AtomicBool>,
    handle: Option<JoinHandle<()>>,
    pub resets: Arc<std::sync::atomic::AtomicUsize>,
}

impl HarnessServer {
    pub fn start(mut sut: SimulatedService, slow: Duration) -> Self {
        let listener = TcpListener::bind("127.0.0.1:0").unwrap();
        let base = format!("http://{}", listener.local_addr().unwrap());
        listener.set_nonblocking(true).unwrap();
        let stop = Arc::new(AtomicBool::new(false));
        let resets = Arc::new(std::sync::atomic::AtomicUsize::new(0));
        let (stop2, resets2) = (stop.clone(), resets.clone());
        let handle = std::thread::spawn(move || {
            while !stop2.load(Ordering::SeqCst) {
                match listener.accept() {
                    Ok((stream, _)) => {
                        stream.set_nonblocking(false).unwrap();
                        serve(stream, &mut sut, slow, &resets2);
                    }
                    Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                        std::thread::sleep(Duration::from_millis(2));
                    }
                    Err(_) => break,
                }
            }
        });
        HarnessServer {
            base,
            stop,
            handle: Some(handle),
            resets,
        }
    }

    pub fn url(&self, path: &str) -> String {
        format!("{}{path}", self.base)
    }
}

impl Drop for HarnessServer {
    fn drop(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        if let Some(h) = self.handle.take() {
            let _ = h.join();
        }
    }
}

fn respond(stream: &mut TcpStream, status: &str, content_type: &str, body: &str) {
    let head = format!(
        "HTTP/1.1 {status}\r\nContent-Type: {content_type}\r\nContent-Length: {}\r\nConnection: close\r\n\r\n",
        body.len()
    );
    let _ = stream.write_all(head.as_bytes());
    let _ = stream.write_all(body.as_bytes());
    let _ = stream.flush();
}

fn serve(mut stream: TcpStream, sut: &mut SimulatedService, slow: Duration, resets: &std::sync::atomic::AtomicUsize) {
    let mut reader = BufReader::new(stream.try_clone().unwrap());
    let mut line = String::new();
    if reader.read_line(&mut line).is_err() {
        return;
    }
    let path = line.split_whitespace().nth(1).unwrap_or("/").to_string();
    let mut len = 0usize;
    loop {
        let mut h = String::new();
        if reader.read_line(&mut h).is_err() || h == "\r\n" || h.is_empty() {
            break;
        }
        if let Some((k, v)) = h.split_once(':') {
            if k.eq_ignore_ascii_case("content-length") {
                len = v.trim().parse().unwrap_or(0);
            }
        }
    }
    let mut body = vec![0u8; len];
    if reader.read_exact(&mut body).is_err() {
        return;
    }
    match path.as_str() {
        "/reset" => {
            resets.fetch_add(1, Ordering::SeqCst);
            sut.store_mut().smart_reset();
            respond(&mut stream, "204 No Content", "text/plain", "");
        }
        "/status500" => respond(&mut stream, "500 Internal Server Error", "text/plain", "boom"),
        "/garbage" => respond(&mut stream, "200 OK", "application/json", "{not json"),
        "/slow" => {
            std::thread::sleep(slow);
            respond(&mut stream, "200 OK", "application/json", r#"{"ok":true,"result":1}"#);
        }
        _ => {
            let req: Value = serde_json::from_slice(&body).unwrap_or(Value::Null);
            let action = req["actionName"].as_str().unwrap_or("").to_string();
            let args = req["args"].as_array().cloned().unwrap_or_default();
            let auth: BTreeMap<String, Value> = serde_json::from_value(req["auth"].clone()).unwrap_or_default();
            let reply = match sut.invoke(&action, &args, &auth).outcome {
                RawOutcome::Returned(v) => json!({"ok": true, "result": v}),
                RawOutcome::Raised(e) => json!({"ok": false, "error": e}),
            };
            respond(&mut stream, "200 OK", "application/json", &reply.to_string());
        }
    }
}

// ---------------------------------------------------------------------------
// Random schemas and a transport that answers every call.

const PARAM_TYPES: [&str; 10] = [
    "i32",
    "i64",
    "double",
    "bool",
    "string",
    "binary",
    "list<i32>",
    "set<string>",
    "map<string, double>",
    "Item",
];

const RETURN_TYPES: [&str; 5] = ["void", "i32", "string", "Item", "list<Item>"];

/// Thrift text for one service with `n` functions, plus `n`.
pub fn thrift_service() -> impl Strategy<Value = (String, usize)> {
    proptest::collection::vec(
        (
            proptest::sample::select(RETURN_TYPES.to_vec()),
            proptest::collection::vec(proptest::sample::select(PARAM_TYPES.to_vec()), 0..4),
        ),
        1..9,
    )
    .prop_map(|fns| {
        let mut text = String::from("struct Item {\n    1: i32 id,\n    2: string label\n}\n\nservice Rand {\n");
        for (i, (ret, params)) in fns.iter().enumerate() {
            let params: Vec<String> = params.iter().enumerate().map(|(j, t)| format!("{}: {t} p{j}", j + 1)).collect();
            text.push_str(&format!("    {ret} f{i}({})\n", params.join(", ")));
        }
        text.push_str("}\n");
        (text, fns.len())
    })
}

/// Returns `null` for every call.
pub struct NullTransport {
    pub calls: u64,
}

impl rpcfuzz::executor::Transport for NullTransport {
    fn kind(&self) -> rpcfuzz::executor::TransportKind {
        rpcfuzz::executor::TransportKind::InProcess
    }

    fn call(
        &mut self,
        _request: &rpcfuzz::executor::CallRequest<'_>,
    ) -> Result<rpcfuzz::executor::CallResult, rpcfuzz::executor::TransportError> {
        self.calls += 1;
        Ok(rpcfuzz::executor::CallResult {
            outcome: RawOutcome::Returned(None),
            coverage: Vec::new(),
        })
    }

    fn supports_reset(&self) -> bool {
        true
    }

    fn reset(&mut self) -> Result<(), rpcfuzz::executor::TransportError> {
        Ok(())
    }
}

/// A static auth setting named `name`.
pub fn static_auth(name: &str) -> rpcfuzz::schema::AuthSpec {
    rpcfuzz::schema::AuthSpec {
        name: name.to_string(),
        mode: rpcfuzz::schema::AuthMode::Static,
        static_fields: [("apiKey".to_string(), json!(format!("key-{name}")))].into_iter().collect(),
        login: None,
        scope: rpcfuzz::schema::AuthScope::AllFunctions,
    }
}

pub fn fixture_dir() -> std::path::PathBuf {
    std::path::Path::new(env!("CARGO_MANIFEST_DIR")).join("tests/fixtures/idl")
}

/// Every `.thrift` file of the fixture corpus, sorted by name.
pub fn fixture_files() -> Vec<std::path::PathBuf> {
    let mut files: Vec<_> = std::fs::read_dir(fixture_dir())
        .unwrap()
        .map(|e| e.unwrap().path())
        .filter(|p| p.extension().is_some_and(|x| x == "thrift"))
        .collect();
    files.sort();
    files
}
