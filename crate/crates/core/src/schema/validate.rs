use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use super::{AuthMode, AuthSpec, FunctionSpec, ParamSpec, RpcSchema, SupportedDataType as K, TypeSpec};
use crate::genes::regex::RegexAst;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Severity {
    Error,
    Warning,
}

/// One finding from [`validate_schema`], with a `/`-separated path.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Diagnostic {
    pub severity: Severity,
    pub path: String,
    pub message: String,
}

impl Diagnostic {
    pub fn error(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Error,
            path: path.into(),
            message: message.into(),
        }
    }

    pub fn warning(path: impl Into<String>, message: impl Into<String>) -> Self {
        Diagnostic {
            severity: Severity::Warning,
            path: path.into(),
            message: message.into(),
        }
    }
}

impl fmt::Display for Diagnostic {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let sev = match self.severity {
            Severity::Error => "error",
            Severity::Warning => "warning",
        };
        write!(f, "{sev}: {}: {}", self.path, self.message)
    }
}

/// Checks every schema invariant. An empty result means the schema is valid.
pub fn validate_schema(schema: &RpcSchema) -> Vec<Diagnostic> {
    let mut v = Validator {
        schema,
        out: Vec::new(),
    };
    v.run();
    v.out
}

struct Validator<'a> {
    schema: &'a RpcSchema,
    out: Vec<Diagnostic>,
}

impl Validator<'_> {
    fn err(&mut self, path: &str, msg: impl Into<String>) {
        self.out.push(Diagnostic::error(path, msg));
    }

    fn run(&mut self) {
        if self.schema.interfaces.is_empty() {
            self.err("interfaces", "schema must declare at least one interface");
        }
        let mut iface_ids = BTreeSet::new();
        for iface in &self.schema.interfaces {
            let ipath = format!("interfaces/{}", iface.interface_id);
            if !iface_ids.insert(iface.interface_id.clone()) {
                self.err(&ipath, format!("duplicate interface id '{}'", iface.interface_id));
            }
            if iface.functions.is_empty() {
                self.err(&ipath, "interface must declare at least one function");
            }
            let mut names = BTreeSet::new();
            for f in &iface.functions {
                let fpath = format!("{ipath}/functions/{}", f.action_name);
                if !names.insert(f.action_name.clone()) {
                    self.err(&fpath, format!("duplicate function name '{}'", f.action_name));
                }
                if f.interface_id != iface.interface_id {
                    self.err(
                        &fpath,
                        format!("function belongs to '{}' but is listed under '{}'", f.interface_id, iface.interface_id),
                    );
                }
                self.function(f, &fpath);
            }
            for f in &iface.auth_functions {
                let fpath = format!("{ipath}/authFunctions/{}", f.action_name);
                self.function(f, &fpath);
            }
            for t in &iface.types {
                if t.kind.is_named() && self.schema.resolve(&t.type_name).is_none() {
                    self.err(&format!("{ipath}/types/{}", t.type_name), format!("unresolved type '{}'", t.type_name));
                }
            }
        }
        for (name, def) in &self.schema.type_defs {
            let tpath = format!("typeDefs/{name}");
            if &def.type_name != name {
                self.err(&tpath, format!("registry key '{name}' does not match typeName '{}'", def.type_name));
            }
            match def.kind {
                K::CustomObject => {
                    let mut fields = BTreeSet::new();
                    for p in &def.fields {
                        if !fields.insert(p.name.clone()) {
                            self.err(&tpath, format!("duplicate field '{}'", p.name));
                        }
                        self.param(p, &format!("{tpath}/fields/{}", p.name));
                    }
                }
                K::Enum => {
                    if def.enum_items.is_empty() {
                        self.err(&tpath, "enum declares no items");
                    }
                    let unique: BTreeSet<_> = def.enum_items.iter().collect();
                    if unique.len() != def.enum_items.len() {
                        self.err(&tpath, "enum declares duplicate items");
                    }
                }
                other => self.err(&tpath, format!("type registry entries must be CUSTOM_OBJECT or ENUM, found {other:?}")),
            }
        }
    }

    fn function(&mut self, f: &FunctionSpec, fpath: &str) {
        let mut params = BTreeSet::new();
        for p in &f.request_params {
            if !params.insert(p.name.clone()) {
                self.err(fpath, format!("duplicate parameter '{}'", p.name));
            }
            self.param(p, &format!("{fpath}/requestParams/{}", p.name));
        }
        if let Some(r) = &f.response_type {
            self.type_spec(r, &format!("{fpath}/responseType"));
        }
        let unique: BTreeSet<_> = f.declared_exceptions.iter().collect();
        if unique.len() != f.declared_exceptions.len() {
            self.err(fpath, "declaredExceptions contains duplicates");
        }
        if let Some(auth) = &f.auth_setup {
            self.auth(auth, &format!("{fpath}/authSetup"));
        }
    }

    fn auth(&mut self, a: &AuthSpec, path: &str) {
        match a.mode {
            AuthMode::Static => {
                if a.static_fields.is_empty() {
                    self.err(path, "STATIC auth requires non-empty staticFields");
                }
            }
            AuthMode::Dynamic => match &a.login {
                None => self.err(path, "DYNAMIC auth requires a login function"),
                Some(l) => {
                    if self.schema.find_any_function(&l.interface_id, &l.action_name).is_none() {
                        self.err(
                            path,
                            format!("login function '{}.{}' does not resolve", l.interface_id, l.action_name),
                        );
                    }
                }
            },
        }
    }

    fn type_spec(&mut self, t: &TypeSpec, path: &str) {
        match t.kind {
            K::Map => match (&t.key_type, &t.value_type) {
                (Some(k), Some(v)) => {
                    if !matches!(k.kind, K::Int | K::Short | K::Byte | K::Long | K::String | K::Char | K::Enum) {
                        self.err(path, format!("unsupported map key type {:?}", k.kind));
                    }
                    self.type_spec(k, &format!("{path}/keyType"));
                    self.type_spec(v, &format!("{path}/valueType"));
                }
                _ => self.err(path, "MAP requires keyType and valueType"),
            },
            K::List | K::Set | K::Array => match &t.example {
                Some(e) => self.type_spec(e, &format!("{path}/example")),
                None => self.err(path, format!("{:?} requires an element type (example)", t.kind)),
            },
            K::CustomObject | K::Enum => match self.schema.resolve(&t.type_name) {
                None => self.err(path, format!("unresolved type '{}'", t.type_name)),
                Some(def) if def.kind != t.kind => self.err(
                    path,
                    format!("'{}' is declared as {:?} but referenced as {:?}", t.type_name, def.kind, t.kind),
                ),
                Some(_) => {}
            },
            _ => {}
        }
    }

    fn param(&mut self, p: &ParamSpec, path: &str) {
        self.type_spec(&p.type_spec, path);
        if p.type_spec.is_primitive() && p.is_nullable {
            self.err(path, format!("primitive type '{}' cannot be nullable", p.type_spec.type_name));
        }
        if let (Some(lo), Some(hi)) = (p.min_size, p.max_size) {
            if lo > hi {
                self.err(path, format!("minSize {lo} exceeds maxSize {hi}"));
            }
        }
        if let (Some(pr), Some(sc)) = (p.precision, p.scale) {
            if sc > pr {
                self.err(path, format!("scale {sc} exceeds precision {pr}"));
            }
        }
        if !interval_nonempty(p) {
            self.err(path, "numeric interval [minValue, maxValue] is empty");
        }
        if let Some(pattern) = &p.pattern {
            if !p.kind().is_textual() {
                self.err(path, "pattern applies only to textual types");
            } else {
                match RegexAst::parse(pattern) {
                    Ok(_) => {}
                    Err(e) if e.is_unsupported() => self.out.push(Diagnostic::warning(
                        path,
                        format!("pattern uses an unsupported construct ({e}); values are generated as plain strings"),
                    )),
                    Err(e) => self.err(path, format!("invalid pattern: {e}")),
                }
                if p.min_size.is_some() || p.max_size.is_some() {
                    self.out.push(Diagnostic::warning(path, "size bounds are not enforced together with a pattern"));
                }
            }
        }
        if p.kind() == K::String && (p.min_value.is_some() || p.max_value.is_some()) && (p.min_size.is_some() || p.max_size.is_some()) {
            self.out.push(Diagnostic::warning(path, "size bounds are not enforced on numeric strings"));
        }
        if p.kind().is_sequence() && p.inner_content.len() > 1 {
            self.err(path, "sequence innerContent holds at most one element prototype");
        }
        if p.kind() == K::Map && !matches!(p.inner_content.len(), 0 | 2) {
            self.err(path, "map innerContent holds exactly a key and a value prototype");
        }
        for (i, inner) in p.inner_content.iter().enumerate() {
            if p.kind().is_collection() {
                self.param(inner, &format!("{path}/innerContent/{i}"));
            }
        }
    }
}

/// True if some value satisfies the min/max bounds under their inclusivity.
pub(crate) fn interval_nonempty(p: &ParamSpec) -> bool {
    let (Some(lo), Some(hi)) = (p.min_value.as_ref(), p.max_value.as_ref()) else {
        return true;
    };
    if p.kind().is_integral() {
        if let (Some(lo), Some(hi)) = (lo.as_i64(), hi.as_i64()) {
            let lo = lo as i128 + i128::from(!p.min_inclusive);
            let hi = hi as i128 - i128::from(!p.max_inclusive);
            return lo <= hi;
        }
        let (lo, hi) = (lo.as_f64().unwrap_or(f64::NAN), hi.as_f64().unwrap_or(f64::NAN));
        let lo = if p.min_inclusive { lo.ceil() } else { lo.floor() + 1.0 };
        let hi = if p.max_inclusive { hi.floor() } else { hi.ceil() - 1.0 };
        return lo <= hi;
    }
    let (lo, hi) = (lo.as_f64().unwrap_or(f64::NAN), hi.as_f64().unwrap_or(f64::NAN));
    if p.min_inclusive && p.max_inclusive {
        lo <= hi
    } else {
        lo < hi
    }
}
