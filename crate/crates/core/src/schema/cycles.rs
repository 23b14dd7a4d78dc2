use std::collections::{BTreeMap, BTreeSet, VecDeque};

use super::{RpcSchema, SupportedDataType, TypeSpec};

/// Object types referenced by a type, looking through containers.
pub(crate) fn referenced_objects(t: &TypeSpec, out: &mut Vec<String>) {
    if t.kind == SupportedDataType::CustomObject {
        out.push(t.type_name.clone());
    }
    for inner in [&t.example, &t.key_type, &t.value_type].into_iter().flatten() {
        referenced_objects(inner, out);
    }
}

/// Every `(typeName, fieldName)` whose field type lies on a reference cycle
/// back to its owner.
pub fn detect_cycles(schema: &RpcSchema) -> BTreeSet<(String, String)> {
    let mut edges: BTreeMap<&str, Vec<(String, String)>> = BTreeMap::new();
    for (name, def) in &schema.type_defs {
        for f in &def.fields {
            let mut targets = Vec::new();
            referenced_objects(&f.type_spec, &mut targets);
            for t in targets {
                edges.entry(name.as_str()).or_default().push((f.name.clone(), t));
            }
        }
    }
    let reaches = |from: &str, to: &str| -> bool {
        let mut seen = BTreeSet::new();
        let mut queue = VecDeque::from([from.to_string()]);
        while let Some(n) = queue.pop_front() {
            if n == to {
                return true;
            }
            if !seen.insert(n.clone()) {
                continue;
            }
            for (_, next) in edges.get(n.as_str()).into_iter().flatten() {
                queue.push_back(next.clone());
            }
        }
        false
    };
    let mut out = BTreeSet::new();
    for (owner, fields) in &edges {
        for (field, target) in fields {
            if reaches(target, owner) {
                out.insert((owner.to_string(), field.clone()));
            }
        }
    }
    out
}
