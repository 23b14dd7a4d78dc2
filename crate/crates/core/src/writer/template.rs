use serde_json::Value;

use super::{Check, SuiteMeta};
use crate::executor::EnvCommand;
use crate::fitness::ExecutionResultClass;

/// Scaffolding sections emitted once per file.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Hook {
    /// Start the SUT before any test.
    InitClass,
    /// Stop the SUT after all tests.
    TearDown,
    /// Reset SUT state before each test.
    InitTest,
}

impl Hook {
    pub const ALL: [Hook; 3] = [Hook::InitClass, Hook::TearDown, Hook::InitTest];
}

pub struct AssertionView<'a> {
    /// Expression under test, e.g. `res_1.resultAsInt` or `res_2.items.size()`.
    pub expr: String,
    pub check: &'a Check,
    pub masked: bool,
}

pub struct ActionView<'a> {
    pub var: String,
    /// `Interface.function`.
    pub function: &'a str,
    pub args: &'a [Value],
    /// Name of the auth setting used, if any.
    pub auth: Option<String>,
    pub class: Option<ExecutionResultClass>,
    pub assertions: Vec<AssertionView<'a>>,
}

pub struct TestView<'a> {
    pub id: &'a str,
    pub covers: &'a [String],
    pub er_class: ExecutionResultClass,
    pub env: &'a [EnvCommand],
    pub actions: Vec<ActionView<'a>>,
}

/// Text rendering of a suite. Implement this to target a concrete test
/// framework; every method returns complete lines.
pub trait SuiteTemplate {
    fn header(&self, title: &str, meta: &SuiteMeta) -> String;
    fn hook(&self, hook: Hook) -> String;
    fn test(&self, test: &TestView<'_>) -> String;
    fn footer(&self) -> String {
        String::new()
    }
}

/// Framework-neutral pseudo-test text. Masked assertions are prefixed
/// with `// `.
pub struct PseudoTemplate;

const INDENT: &str = "    ";

fn json(v: &Value) -> String {
    serde_json::to_string(v).expect("value serializes")
}

fn assertion_line(a: &AssertionView<'_>) -> String {
    match a.check {
        Check::Equals { value } => format!("assertEquals({}, {})", json(value), a.expr),
        Check::Approx { value, rel_tol } => format!("assertNumbersMatch({value:?}, {}, {rel_tol:e})", a.expr),
        Check::Size { value } => format!("assertEquals({value}, {})", a.expr),
        Check::IsNull => format!("assertNull({})", a.expr),
        Check::Throws { exception } => format!("assertThrows({})", json(&Value::String(exception.clone()))),
    }
}

impl SuiteTemplate for PseudoTemplate {
    fn header(&self, title: &str, meta: &SuiteMeta) -> String {
        format!(
            "// rpcfuzz {title} tests\n// algorithm {} | seed {} | budget {}\n// schema sha256 {}\n\n",
            meta.algorithm, meta.seed, meta.budget, meta.schema_hash
        )
    }

    fn hook(&self, hook: Hook) -> String {
        let (name, body) = match hook {
            Hook::InitClass => ("initClass", "startSut()"),
            Hook::TearDown => ("tearDown", "stopSut()"),
            Hook::InitTest => ("initTest", "resetSutState()"),
        };
        format!("{name} {{\n{INDENT}{body}\n}}\n\n")
    }

    fn test(&self, t: &TestView<'_>) -> String {
        let mut out = format!("test {} {{\n", t.id);
        out.push_str(&format!("{INDENT}// expected {}\n", t.er_class));
        if !t.covers.is_empty() {
            out.push_str(&format!("{INDENT}// covers {}\n", t.covers.join(", ")));
        }
        for cmd in t.env {
            match cmd {
                EnvCommand::Insert { table, row } => {
                    let row = serde_json::to_string(row).expect("row serializes");
                    out.push_str(&format!("{INDENT}insertRow({}, {row})\n", json(&Value::String(table.clone()))));
                }
            }
        }
        for a in &t.actions {
            let args: Vec<String> = a.args.iter().map(json).collect();
            let call = format!("{}({})", a.function, args.join(", "));
            let auth = a.auth.as_ref().map(|n| format!(" with auth {}", json(&Value::String(n.clone())))).unwrap_or_default();
            let throws = a.assertions.iter().find_map(|x| match x.check {
                Check::Throws { exception } => Some(exception),
                _ => None,
            });
            match throws {
                Some(e) => out.push_str(&format!(
                    "{INDENT}expectThrows({}, {call}){auth}\n",
                    json(&Value::String(e.clone()))
                )),
                None if a.assertions.is_empty() => out.push_str(&format!("{INDENT}{call}{auth}\n")),
                None => out.push_str(&format!("{INDENT}{} = {call}{auth}\n", a.var)),
            }
            for x in a.assertions.iter().filter(|x| !matches!(x.check, Check::Throws { .. })) {
                let marker = if x.masked { "// " } else { "" };
                out.push_str(&format!("{INDENT}{marker}{}\n", assertion_line(x)));
            }
        }
        out.push_str("}\n\n");
        out
    }
}
