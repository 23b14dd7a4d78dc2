//! Turns a search result into replayable artifacts.
//!
//! The machine suite (`suite.json`, format `rpcfuzz-suite/1`) carries every
//! action with its rendered arguments, the expected execution classes and
//! the assertions derived from observed responses. The same assertions are
//! rendered as test text through a [`SuiteTemplate`]; tests that end in an
//! exception go to a separate file.
//!
//! Assertions on values that look run-dependent (names or values matching
//! a keyword such as `time` or `token`) are kept but commented out. Large
//! collections get a size assertion plus a few sampled elements.

mod replay;
mod template;

use std::collections::BTreeMap;
use std::io;
use std::path::Path;

use rand::seq::index;
use rand::SeedableRng;
use serde::{Deserialize, Serialize};
use serde_json::Value;
use sha2::{Digest, Sha256};

pub use replay::{check_assertion, numbers_match, replay_suite, Mismatch, ReplayError, ReplayReport};
pub use template::{ActionView, AssertionView, Hook, PseudoTemplate, SuiteTemplate, TestView};

use crate::executor::{ActionResponse, EnvCommand};
use crate::fitness::ExecutionResultClass;
use crate::schema::{AuthSpec, RpcSchema, SupportedDataType, TypeSpec};
use crate::search::{SuiteTest, TestSuite};
use crate::SearchRng;

pub const SUITE_FORMAT: &str = "rpcfuzz-suite/1";
pub const SUITE_FILE: &str = "suite.json";
pub const MAIN_TESTS_FILE: &str = "tests_main.txt";
pub const EXCEPTIONAL_TESTS_FILE: &str = "tests_exceptional.txt";
pub const STATS_FILE: &str = "stats.csv";

pub const DEFAULT_FLAKY_KEYWORDS: [&str; 6] = ["date", "time", "token", "timestamp", "random", "uuid"];
pub const DEFAULT_COLLECTION_SAMPLE: usize = 2;
pub const DEFAULT_REL_TOLERANCE: f64 = 1e-9;

/// Nesting depth below which response values are not asserted.
const MAX_ASSERTION_DEPTH: usize = 8;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SuiteMeta {
    pub seed: u64,
    pub schema_hash: String,
    pub budget: u64,
    pub algorithm: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum Check {
    Equals { value: Value },
    /// Floating-point equality within a relative tolerance.
    Approx {
        value: f64,
        #[serde(rename = "relTol")]
        rel_tol: f64,
    },
    Size { value: usize },
    IsNull,
    Throws { exception: String },
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Assertion {
    /// Index of the action whose response is checked.
    pub action: usize,
    /// JSON pointer into the response; empty for the response itself.
    pub path: String,
    #[serde(flatten)]
    pub check: Check,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub masked: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteAction {
    /// `Interface.function`.
    #[serde(rename = "fn")]
    pub function: String,
    pub args: Vec<Value>,
    pub auth: Option<usize>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct Expected {
    pub er_class: ExecutionResultClass,
    pub action_classes: Vec<ExecutionResultClass>,
    pub assertions: Vec<Assertion>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SuiteCase {
    pub id: String,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub covers: Vec<String>,
    #[serde(default)]
    pub env: Vec<EnvCommand>,
    pub actions: Vec<SuiteAction>,
    pub expected: Expected,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct MachineSuite {
    pub format: String,
    pub meta: SuiteMeta,
    #[serde(default)]
    pub auth_settings: Vec<AuthSpec>,
    pub tests: Vec<SuiteCase>,
}

impl MachineSuite {
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("suite serializes");
        s.push('\n');
        s
    }

    pub fn from_json(text: &str) -> Result<Self, ReplayError> {
        let suite: MachineSuite = serde_json::from_str(text).map_err(|e| ReplayError::Format(e.to_string()))?;
        if suite.format != SUITE_FORMAT {
            return Err(ReplayError::Format(format!(
                "unsupported format '{}' (expected {SUITE_FORMAT})",
                suite.format
            )));
        }
        Ok(suite)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct WriterConfig {
    pub seed: u64,
    pub budget: u64,
    pub algorithm: String,
    /// Elements asserted per collection.
    pub collection_sample: usize,
    /// Case-insensitive substrings marking run-dependent values.
    pub flaky_keywords: Vec<String>,
    pub rel_tolerance: f64,
}

impl Default for WriterConfig {
    fn default() -> Self {
        WriterConfig {
            seed: 0,
            budget: 0,
            algorithm: "mio".to_string(),
            collection_sample: DEFAULT_COLLECTION_SAMPLE,
            flaky_keywords: DEFAULT_FLAKY_KEYWORDS.iter().map(|s| s.to_string()).collect(),
            rel_tolerance: DEFAULT_REL_TOLERANCE,
        }
    }
}

/// Output files by name, plus the machine suite they were rendered from.
#[derive(Debug, Clone, PartialEq)]
pub struct RenderedSuite {
    pub files: BTreeMap<String, String>,
    pub machine_suite: MachineSuite,
}

impl RenderedSuite {
    pub fn write_to_dir(&self, dir: &Path) -> io::Result<()> {
        std::fs::create_dir_all(dir)?;
        for (name, text) in &self.files {
            std::fs::write(dir.join(name), text)?;
        }
        Ok(())
    }
}

/// The class a test is filed under: its first exceptional action, otherwise
/// its last action.
pub fn test_class(classes: &[ExecutionResultClass]) -> ExecutionResultClass {
    classes
        .iter()
        .copied()
        .find(|c| c.is_exceptional())
        .or_else(|| classes.last().copied())
        .unwrap_or(ExecutionResultClass::Handled)
}

/// Whether a field name, declared type name or string value hits a keyword.
pub fn is_flaky(keywords: &[String], field: Option<&str>, type_name: Option<&str>, value: Option<&Value>) -> bool {
    let hit = |s: &str| {
        let s = s.to_lowercase();
        keywords.iter().any(|k| !k.is_empty() && s.contains(&k.to_lowercase()))
    };
    field.is_some_and(hit) || type_name.is_some_and(hit) || matches!(value, Some(Value::String(s)) if hit(s))
}

/// Indices of the elements asserted in a collection of `len`: all of them
/// when `len <= n`, otherwise `n` drawn with `rng`, ascending.
pub fn sample_indices(len: usize, n: usize, rng: &mut SearchRng) -> Vec<usize> {
    if len <= n {
        return (0..len).collect();
    }
    let mut picked = index::sample(rng, len, n).into_vec();
    picked.sort_unstable();
    picked
}

fn sampling_rng(seed: u64, test: &str, action: usize, pointer: &str) -> SearchRng {
    let digest = Sha256::digest(format!("{seed}/{test}/{action}/{pointer}").as_bytes());
    let mut bytes = [0u8; 32];
    bytes.copy_from_slice(&digest);
    SearchRng::from_seed(bytes)
}

fn escape_pointer(segment: &str) -> String {
    segment.replace('~', "~0").replace('/', "~1")
}

/// An assertion plus the expression used when rendering it.
struct Generated {
    assertion: Assertion,
    expr: String,
}

struct AssertionBuilder<'a> {
    schema: &'a RpcSchema,
    config: &'a WriterConfig,
    test_id: &'a str,
    action: usize,
    out: Vec<Generated>,
}

impl AssertionBuilder<'_> {
    fn push(&mut self, pointer: &str, expr: String, check: Check, masked: bool) {
        self.out.push(Generated {
            assertion: Assertion {
                action: self.action,
                path: pointer.to_string(),
                check,
                masked,
            },
            expr,
        });
    }

    /// Object definition behind a reference, if any.
    fn resolve<'t>(&'t self, ty: Option<&'t TypeSpec>) -> Option<&'t TypeSpec> {
        let ty = ty?;
        if ty.kind.is_named() && ty.fields.is_empty() && ty.enum_items.is_empty() {
            self.schema.resolve(&ty.type_name).or(Some(ty))
        } else {
            Some(ty)
        }
    }

    fn walk(&mut self, value: &Value, ty: Option<&TypeSpec>, pointer: &str, expr: &str, field: Option<&str>, depth: usize) {
        if depth > MAX_ASSERTION_DEPTH {
            return;
        }
        let type_name = ty.map(|t| t.type_name.as_str());
        let kw = &self.config.flaky_keywords;
        match value {
            Value::Null => {
                let masked = is_flaky(kw, field, type_name, None);
                self.push(pointer, expr.to_string(), Check::IsNull, masked);
            }
            Value::Number(n) if !n.is_i64() && !n.is_u64() => {
                let masked = is_flaky(kw, field, type_name, None);
                let check = Check::Approx {
                    value: n.as_f64().unwrap_or(f64::NAN),
                    rel_tol: self.config.rel_tolerance,
                };
                self.push(pointer, expr.to_string(), check, masked);
            }
            Value::Bool(_) | Value::Number(_) | Value::String(_) => {
                let masked = is_flaky(kw, field, type_name, Some(value));
                self.push(pointer, expr.to_string(), Check::Equals { value: value.clone() }, masked);
            }
            Value::Array(items) => {
                let masked = is_flaky(kw, field, type_name, None);
                self.push(pointer, format!("{expr}.size()"), Check::Size { value: items.len() }, masked);
                let element = ty.and_then(|t| t.example.as_deref());
                let mut rng = sampling_rng(self.config.seed, self.test_id, self.action, pointer);
                for i in sample_indices(items.len(), self.config.collection_sample, &mut rng) {
                    self.walk(&items[i], element, &format!("{pointer}/{i}"), &format!("{expr}[{i}]"), field, depth + 1);
                }
            }
            Value::Object(map) => {
                let ty = self.resolve(ty).cloned();
                if ty.as_ref().is_some_and(|t| t.kind == SupportedDataType::Map) {
                    let masked = is_flaky(kw, field, type_name, None);
                    self.push(pointer, format!("{expr}.size()"), Check::Size { value: map.len() }, masked);
                    let keys: Vec<&String> = map.keys().collect();
                    let element = ty.as_ref().and_then(|t| t.value_type.as_deref());
                    let mut rng = sampling_rng(self.config.seed, self.test_id, self.action, pointer);
                    for i in sample_indices(keys.len(), self.config.collection_sample, &mut rng) {
                        let k = keys[i];
                        let key_expr = serde_json::to_string(k).expect("string serializes");
                        let p = format!("{pointer}/{}", escape_pointer(k));
                        self.walk(&map[k], element, &p, &format!("{expr}[{key_expr}]"), field, depth + 1);
                    }
                    return;
                }
                let declared: Vec<(String, Option<TypeSpec>)> = match &ty {
                    Some(t) if !t.fields.is_empty() => t
                        .fields
                        .iter()
                        .filter(|f| map.contains_key(&f.name))
                        .map(|f| (f.name.clone(), Some(f.type_spec.clone())))
                        .collect(),
                    _ => map.keys().map(|k| (k.clone(), None)).collect(),
                };
                for (name, fty) in declared {
                    let p = format!("{pointer}/{}", escape_pointer(&name));
                    self.walk(&map[&name], fty.as_ref(), &p, &format!("{expr}.{name}"), Some(&name), depth + 1);
                }
            }
        }
    }
}

fn response_assertions(
    schema: &RpcSchema,
    config: &WriterConfig,
    test_id: &str,
    action: usize,
    response_type: Option<&TypeSpec>,
    resp: &ActionResponse,
) -> Vec<Generated> {
    let mut b = AssertionBuilder {
        schema,
        config,
        test_id,
        action,
        out: Vec::new(),
    };
    let var = format!("res_{}", action + 1);
    if let Some(info) = &resp.exception_info {
        b.push(
            "",
            var,
            Check::Throws {
                exception: info.exception_name.clone(),
            },
            false,
        );
    } else if let Some(v) = &resp.response_phenotype {
        b.walk(v, response_type, "", &var, None, 0);
    }
    b.out
}

fn auth_label(settings: &[AuthSpec], i: usize) -> String {
    settings
        .get(i)
        .map(|s| s.name.clone())
        .filter(|n| !n.is_empty())
        .unwrap_or_else(|| format!("auth#{i}"))
}

/// Renders `suite` with the default pseudo-test template.
pub fn write_suite(suite: &TestSuite, schema: &RpcSchema, auth: &[AuthSpec], config: &WriterConfig) -> RenderedSuite {
    write_suite_with(suite, schema, auth, config, &PseudoTemplate)
}

pub fn write_suite_with(
    suite: &TestSuite,
    schema: &RpcSchema,
    auth: &[AuthSpec],
    config: &WriterConfig,
    template: &dyn SuiteTemplate,
) -> RenderedSuite {
    let meta = SuiteMeta {
        seed: config.seed,
        schema_hash: schema.content_hash(),
        budget: config.budget,
        algorithm: config.algorithm.clone(),
    };
    let mut cases = Vec::with_capacity(suite.tests.len());
    let mut main = Vec::new();
    let mut exceptional = Vec::new();
    for t in &suite.tests {
        let (case, generated) = build_case(t, schema, config);
        let view = test_view(&case, &generated, auth);
        let text = template.test(&view);
        if case.expected.er_class.is_exceptional() {
            exceptional.push(text);
        } else {
            main.push(text);
        }
        cases.push(case);
    }
    let machine_suite = MachineSuite {
        format: SUITE_FORMAT.to_string(),
        meta,
        auth_settings: auth.to_vec(),
        tests: cases,
    };
    let mut files = BTreeMap::new();
    files.insert(SUITE_FILE.to_string(), machine_suite.to_json());
    files.insert(MAIN_TESTS_FILE.to_string(), render_file(template, "main", &machine_suite.meta, &main));
    if !exceptional.is_empty() {
        files.insert(
            EXCEPTIONAL_TESTS_FILE.to_string(),
            render_file(template, "exceptional", &machine_suite.meta, &exceptional),
        );
    }
    RenderedSuite { files, machine_suite }
}

fn render_file(template: &dyn SuiteTemplate, title: &str, meta: &SuiteMeta, tests: &[String]) -> String {
    let mut out = template.header(title, meta);
    for hook in Hook::ALL {
        out.push_str(&template.hook(hook));
    }
    for t in tests {
        out.push_str(t);
    }
    out.push_str(&template.footer());
    out
}

fn build_case(t: &SuiteTest, schema: &RpcSchema, config: &WriterConfig) -> (SuiteCase, Vec<Vec<Generated>>) {
    let classes: Vec<ExecutionResultClass> = t.classifications.iter().map(|c| c.er_class).collect();
    let mut generated = Vec::with_capacity(t.test.actions.len());
    let mut actions = Vec::with_capacity(t.test.actions.len());
    for (i, (a, resp)) in t.test.actions.iter().zip(&t.execution.responses).enumerate() {
        let f = schema.function(a.function);
        generated.push(response_assertions(schema, config, &t.id, i, f.response_type.as_ref(), resp));
        actions.push(SuiteAction {
            function: f.qualified_name(),
            args: a.plan().args,
            auth: a.auth,
        });
    }
    let case = SuiteCase {
        id: t.id.clone(),
        covers: t.covers.clone(),
        env: t.test.env.clone(),
        actions,
        expected: Expected {
            er_class: test_class(&classes),
            action_classes: classes,
            assertions: generated.iter().flatten().map(|g| g.assertion.clone()).collect(),
        },
    };
    (case, generated)
}

fn test_view<'a>(case: &'a SuiteCase, generated: &'a [Vec<Generated>], auth: &[AuthSpec]) -> TestView<'a> {
    let actions = case
        .actions
        .iter()
        .zip(generated)
        .enumerate()
        .map(|(i, (a, gens))| ActionView {
            var: format!("res_{}", i + 1),
            function: &a.function,
            args: &a.args,
            auth: a.auth.map(|k| auth_label(auth, k)),
            class: case.expected.action_classes.get(i).copied(),
            assertions: gens
                .iter()
                .map(|g| AssertionView {
                    expr: g.expr.clone(),
                    check: &g.assertion.check,
                    masked: g.assertion.masked,
                })
                .collect(),
        })
        .collect();
    TestView {
        id: &case.id,
        covers: &case.covers,
        er_class: case.expected.er_class,
        env: &case.env,
        actions,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    fn kw() -> Vec<String> {
        WriterConfig::default().flaky_keywords
    }

    #[test]
    fn keyword_matching() {
        assert!(is_flaky(&kw(), Some("createdTime"), None, None));
        assert!(!is_flaky(&kw(), Some("resultAsInt"), None, None));
        assert!(is_flaky(&kw(), Some("msg"), None, Some(&json!("token=abc"))));
        assert!(is_flaky(&kw(), Some("at"), Some("Timestamp"), None));
    }

    #[test]
    fn class_of_a_test() {
        use ExecutionResultClass as E;
        assert_eq!(test_class(&[E::Handled, E::UnexpectedException, E::Handled]), E::UnexpectedException);
        assert_eq!(test_class(&[E::Handled, E::UserError]), E::UserError);
        assert_eq!(test_class(&[]), E::Handled);
    }

    #[test]
    fn sampling_is_bounded_and_sorted() {
        let mut rng = sampling_rng(1, "t1", 0, "");
        assert_eq!(sample_indices(1, 2, &mut rng), vec![0]);
        let s = sample_indices(470, 2, &mut rng);
        assert_eq!(s.len(), 2);
        assert!(s[0] < s[1] && s[1] < 470);
    }

    #[test]
    fn pointer_escaping() {
        assert_eq!(escape_pointer("a/b~c"), "a~1b~0c");
        let v = json!({"a/b~c": 1});
        assert_eq!(v.pointer(&format!("/{}", escape_pointer("a/b~c"))), Some(&json!(1)));
    }
}
