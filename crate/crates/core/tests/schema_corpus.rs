mod common;

use std::collections::BTreeSet;

use proptest::prelude::*;
use serde_json::Value;

use rpcfuzz::schema::{
    detect_cycles, load_json_schema, parse_thrift_idl, to_json_string, validate_schema, ParamSpec, RpcSchema,
    SchemaError, SupportedDataType as K, TypeSpec,
};

use common::{fixture_dir, fixture_files};

fn fixture(name: &str) -> RpcSchema {
    let text = std::fs::read_to_string(fixture_dir().join(name)).unwrap();
    parse_thrift_idl(&text).unwrap_or_else(|e| panic!("{name}: {e}"))
}

fn param<'a>(s: &'a RpcSchema, function: &str, name: &str) -> &'a ParamSpec {
    s.functions()
        .find(|f| f.action_name == function)
        .and_then(|f| f.request_params.iter().find(|p| p.name == name))
        .unwrap_or_else(|| panic!("{function}.{name}"))
}

fn field<'a>(s: &'a RpcSchema, ty: &str, name: &str) -> &'a ParamSpec {
    s.resolve(ty).unwrap().fields.iter().find(|f| f.name == name).unwrap()
}

#[test]
fn corpus_parses_cleanly_and_deterministically() {
    let files = fixture_files();
    assert!(files.len() >= 10);
    for path in files {
        let text = std::fs::read_to_string(&path).unwrap();
        let a = parse_thrift_idl(&text).unwrap_or_else(|e| panic!("{}: {e}", path.display()));
        let b = parse_thrift_idl(&text).unwrap();
        assert_eq!(a, b, "{}", path.display());
        assert_eq!(a.content_hash(), b.content_hash());
        assert!(validate_schema(&a).is_empty(), "{}: {:?}", path.display(), validate_schema(&a));
    }
}

#[test]
fn required_and_optional_fields() {
    let s = fixture("calendar.thrift");
    let start = field(&s, "Slot", "start");
    assert_eq!(start.kind(), K::Long, "typedef Millis resolves to i64");
    assert!(!start.is_nullable);
    assert!(field(&s, "Slot", "end").is_nullable);
    let weekday = s.resolve("Weekday").unwrap();
    assert_eq!(weekday.enum_items, ["MON", "TUE", "WED", "THU", "FRI", "SAT", "SUN"]);
    let attendees = field(&s, "Slot", "attendees");
    assert_eq!((attendees.min_size, attendees.max_size), (Some(0), Some(8)));
    let minutes = param(&s, "freeSlots", "minutes");
    assert_eq!(minutes.min_value.as_ref().and_then(|n| n.as_i64()), Some(15));
    assert_eq!(minutes.max_value.as_ref().and_then(|n| n.as_i64()), Some(480));
    let clear = s.functions().find(|f| f.action_name == "clear").unwrap();
    assert!(clear.response_type.is_none());
}

#[test]
fn constraint_annotations_in_corpus() {
    let s = fixture("bank.thrift");
    let balance = field(&s, "Account", "balance");
    assert_eq!((balance.precision, balance.scale), (Some(14), Some(2)));
    let amount = param(&s, "transfer", "amount");
    assert_eq!((amount.precision, amount.scale), (Some(11), Some(2)));
    assert_eq!(amount.min_value.as_ref().and_then(|n| n.as_i64()), Some(0));
    assert!(!amount.min_inclusive);
    let owner = param(&s, "open", "owner");
    assert_eq!((owner.min_size, owner.max_size), (Some(1), Some(40)));
    assert!(!owner.is_nullable);
    assert_eq!(field(&s, "Account", "iban").pattern.as_deref(), Some("[A-Z]{2}[0-9]{2}[A-Z0-9]{4,12}"));
    let transfer = s.functions().find(|f| f.action_name == "transfer").unwrap();
    assert_eq!(transfer.declared_exceptions, ["InsufficientFunds", "AccountLocked"]);

    let survey = fixture("survey.thrift");
    let consent = field(&survey, "Submission", "consent");
    assert!(!consent.is_mutable);
    assert_eq!(consent.default_value, Some(Value::Bool(true)));

    let media = fixture("media.thrift");
    let seconds = field(&media, "Clip", "seconds");
    assert!(!seconds.min_inclusive && seconds.max_inclusive);
}

#[test]
fn containers_and_keys() {
    let s = fixture("inventory.thrift");
    let by_slot = field(&s, "Warehouse", "bySlot");
    assert_eq!(by_slot.kind(), K::Map);
    assert_eq!(by_slot.type_spec.key_type.as_ref().unwrap().kind, K::Int);
    assert_eq!(by_slot.type_spec.value_type.as_ref().unwrap().type_name, "Item");
    assert_eq!(field(&s, "Item", "tags").kind(), K::Set);
    assert_eq!(field(&s, "Item", "shelf").kind(), K::Short);
    assert_eq!(field(&s, "Item", "bin").kind(), K::Byte);
    let low = s.functions().find(|f| f.action_name == "lowStock").unwrap();
    let ret = low.response_type.as_ref().unwrap();
    assert_eq!((ret.kind, ret.example.as_ref().unwrap().kind), (K::Set, K::Long));
}

#[test]
fn cycles_in_corpus() {
    let pairs = |v: &[(&str, &str)]| -> BTreeSet<(String, String)> {
        v.iter().map(|(a, b)| (a.to_string(), b.to_string())).collect()
    };
    assert_eq!(detect_cycles(&fixture("graph.thrift")), pairs(&[("Node", "children"), ("Node", "parent")]));
    for name in ["bank.thrift", "calendar.thrift", "inventory.thrift", "survey.thrift", "ncs_full.thrift"] {
        assert!(detect_cycles(&fixture(name)).is_empty(), "{name}");
    }
}

#[test]
fn two_services_in_one_file() {
    let s = fixture("multi.thrift");
    let ids: Vec<&str> = s.interfaces.iter().map(|i| i.interface_id.as_str()).collect();
    assert_eq!(ids, ["MathService", "EchoService"]);
    assert_eq!(s.function_count(), 4);
    assert!(s.find_function("EchoService.repeat").is_some());
    assert!(s.find_function("MathService.repeat").is_none());
}

#[test]
fn errors_carry_positions() {
    match parse_thrift_idl("service S {\n  void f(1: i32 a\n}") {
        Err(SchemaError::Syntax { line, column, .. }) => assert_eq!((line, column), (3, 1)),
        other => panic!("{other:?}"),
    }
    match parse_thrift_idl("union U { 1: i32 a }\nservice S { void f() }") {
        Err(SchemaError::UnsupportedConstruct { line, .. }) => assert_eq!(line, 1),
        other => panic!("{other:?}"),
    }
    assert!(matches!(parse_thrift_idl("service S {}"), Err(SchemaError::Validation(_))));
}

#[test]
fn json_form_of_the_reference_param() {
    let s = fixture("ncs_excerpt.thrift");
    let doc: Value = serde_json::from_str(&to_json_string(&s)).unwrap();
    let n = &doc["interfaces"][0]["functions"][0]["requestParams"][0];
    assert_eq!(n["name"], "n");
    assert_eq!(n["type"]["kind"], "INT");
    let mut expected = ParamSpec::new("n", TypeSpec::simple(K::Int, "int"));
    expected.is_nullable = false;
    assert_eq!(s.functions().next().unwrap().request_params[0], expected);
}

/// One edit to a schema document: a path into the JSON tree and a new value
/// (or removal when `None`).
fn mutate_doc(doc: &mut Value, choice: usize, replacement: Option<Value>) {
    let mut leaves = Vec::new();
    collect_paths(doc, &mut Vec::new(), &mut leaves);
    let path = &leaves[choice % leaves.len()];
    let (last, parents) = path.split_last().unwrap();
    let mut node = &mut *doc;
    for seg in parents {
        node = match node {
            Value::Object(m) => m.get_mut(seg).unwrap(),
            Value::Array(a) => &mut a[seg.parse::<usize>().unwrap()],
            _ => unreachable!(),
        };
    }
    match (node, replacement) {
        (Value::Object(m), Some(v)) => {
            m.insert(last.clone(), v);
        }
        (Value::Object(m), None) => {
            m.remove(last);
        }
        (Value::Array(a), Some(v)) => a[last.parse::<usize>().unwrap()] = v,
        (Value::Array(a), None) => {
            a.remove(last.parse::<usize>().unwrap());
        }
        _ => unreachable!(),
    }
}

fn collect_paths(v: &Value, prefix: &mut Vec<String>, out: &mut Vec<Vec<String>>) {
    match v {
        Value::Object(m) => {
            for (k, child) in m {
                prefix.push(k.clone());
                out.push(prefix.clone());
                collect_paths(child, prefix, out);
                prefix.pop();
            }
        }
        Value::Array(a) => {
            for (i, child) in a.iter().enumerate() {
                prefix.push(i.to_string());
                out.push(prefix.clone());
                collect_paths(child, prefix, out);
                prefix.pop();
            }
        }
        _ => {}
    }
}

fn replacement() -> impl Strategy<Value = Option<Value>> {
    proptest::option::weighted(
        0.8,
        prop_oneof![
            Just(Value::Null),
            any::<bool>().prop_map(Value::Bool),
            (-5i64..40).prop_map(Value::from),
            proptest::sample::select(vec!["INT", "MAP", "LIST", "CUSTOM_OBJECT", "Dto", "Missing", "", "[a-"])
                .prop_map(Value::from),
            Just(Value::Array(Vec::new())),
        ],
    )
}

/// Invariants every accepted schema must satisfy, checked independently of
/// the validator.
fn invariant_breaches(s: &RpcSchema) -> Vec<String> {
    let mut out = Vec::new();
    if s.interfaces.is_empty() {
        out.push("no interfaces".into());
    }
    fn walk(s: &RpcSchema, p: &ParamSpec, out: &mut Vec<String>) {
        if let (Some(a), Some(b)) = (p.min_size, p.max_size) {
            if a > b {
                out.push(format!("{}: size interval empty", p.name));
            }
        }
        if let (Some(a), Some(b)) = (p.min_value.as_ref(), p.max_value.as_ref()) {
            if a.as_f64() > b.as_f64() {
                out.push(format!("{}: value interval empty", p.name));
            }
        }
        if let (Some(prec), Some(scale)) = (p.precision, p.scale) {
            if scale > prec {
                out.push(format!("{}: scale above precision", p.name));
            }
        }
        let t = &p.type_spec;
        if t.kind.is_named() && t.fields.is_empty() && t.enum_items.is_empty() && s.resolve(&t.type_name).is_none() {
            out.push(format!("{}: unresolved {}", p.name, t.type_name));
        }
        for c in &p.inner_content {
            walk(s, c, out);
        }
    }
    for i in &s.interfaces {
        if i.functions.is_empty() {
            out.push(format!("{} has no functions", i.interface_id));
        }
        let names: BTreeSet<&str> = i.functions.iter().map(|f| f.action_name.as_str()).collect();
        if names.len() != i.functions.len() {
            out.push(format!("{}: duplicate function names", i.interface_id));
        }
        for f in &i.functions {
            for p in &f.request_params {
                walk(s, p, &mut out);
            }
        }
    }
    for t in s.type_defs.values() {
        for f in &t.fields {
            walk(s, f, &mut out);
        }
    }
    out
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(400))]

    #[test]
    fn accepted_documents_satisfy_invariants(
        file in 0usize..64,
        edits in proptest::collection::vec((any::<usize>(), replacement()), 1..4),
    ) {
        let files = fixture_files();
        let text = std::fs::read_to_string(&files[file % files.len()]).unwrap();
        let mut doc: Value = serde_json::from_str(&to_json_string(&parse_thrift_idl(&text).unwrap())).unwrap();
        for (choice, v) in edits {
            mutate_doc(&mut doc, choice, v);
        }
        if let Ok(s) = load_json_schema(&doc.to_string()) {
            prop_assert!(validate_schema(&s).is_empty());
            let breaches = invariant_breaches(&s);
            prop_assert!(breaches.is_empty(), "{:?}", breaches);
            let again = load_json_schema(&to_json_string(&s)).unwrap();
            prop_assert_eq!(again, s);
        }
    }
}
