//! RPC schema model: interfaces, functions, parameters and types.
//!
//! Schemas come from two sources, a Thrift IDL subset ([`parse_thrift_idl`])
//! and the native JSON document format ([`load_json_schema`]). Both produce
//! the same validated [`RpcSchema`].

mod cycles;
mod json;
mod thrift;
mod validate;

use std::collections::BTreeMap;
use std::fmt;

use serde::{Deserialize, Serialize};
use serde_json::Number;
use sha2::{Digest, Sha256};

pub use cycles::detect_cycles;
pub use json::{load_json_schema, to_json_string, SCHEMA_FORMAT};
pub use thrift::parse_thrift_idl;
pub use validate::{validate_schema, Diagnostic, Severity};

/// Errors raised while reading a schema from text.
#[derive(Debug, thiserror::Error)]
pub enum SchemaError {
    #[error("syntax error at {line}:{column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
    #[error("unsupported construct at {line}:{column}: {construct}")]
    UnsupportedConstruct {
        line: usize,
        column: usize,
        construct: String,
    },
    #[error("malformed schema document at {path}: {message}")]
    Format { path: String, message: String },
    #[error("schema validation failed: {}", summarize(.0))]
    Validation(Vec<Diagnostic>),
}

fn summarize(diags: &[Diagnostic]) -> String {
    diags
        .iter()
        .map(|d| d.to_string())
        .collect::<Vec<_>>()
        .join("; ")
}

/// The closed set of data types a parameter may carry.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum SupportedDataType {
    Array,
    ByteBuffer,
    Date,
    Enum,
    List,
    Map,
    Set,
    String,
    Int,
    Boolean,
    Double,
    Float,
    Long,
    Char,
    Byte,
    Short,
    BigInteger,
    BigDecimal,
    CustomObject,
}

impl SupportedDataType {
    pub fn is_collection(self) -> bool {
        matches!(self, Self::Array | Self::List | Self::Set | Self::Map)
    }

    pub fn is_sequence(self) -> bool {
        matches!(self, Self::Array | Self::List | Self::Set)
    }

    pub fn is_integral(self) -> bool {
        matches!(
            self,
            Self::Int | Self::Long | Self::Byte | Self::Short | Self::BigInteger
        )
    }

    pub fn is_numeric(self) -> bool {
        self.is_integral() || matches!(self, Self::Double | Self::Float | Self::BigDecimal)
    }

    pub fn is_textual(self) -> bool {
        matches!(self, Self::String | Self::Char | Self::ByteBuffer)
    }

    /// Types whose definition lives in the schema's type registry.
    pub fn is_named(self) -> bool {
        matches!(self, Self::CustomObject | Self::Enum)
    }
}

/// JVM primitive type names; parameters of these types can never be null.
pub const PRIMITIVE_TYPE_NAMES: [&str; 8] = [
    "int", "long", "double", "float", "boolean", "byte", "short", "char",
];

/// Data type of a parameter or return value.
///
/// Reference entries (`kind` + `typeName`) point into the schema's
/// `typeDefs` for objects and enums; registry entries carry `fields` or
/// `enumItems`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct TypeSpec {
    pub kind: SupportedDataType,
    pub type_name: String,
    /// Element type for lists, sets and arrays.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub example: Option<Box<TypeSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub key_type: Option<Box<TypeSpec>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub value_type: Option<Box<TypeSpec>>,
    /// Fields of a custom object definition.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub fields: Vec<ParamSpec>,
    /// Items of an enum definition.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub enum_items: Vec<String>,
}

impl TypeSpec {
    pub fn simple(kind: SupportedDataType, type_name: impl Into<String>) -> Self {
        TypeSpec {
            kind,
            type_name: type_name.into(),
            example: None,
            key_type: None,
            value_type: None,
            fields: Vec::new(),
            enum_items: Vec::new(),
        }
    }

    pub fn sequence(kind: SupportedDataType, element: TypeSpec) -> Self {
        let name = match kind {
            SupportedDataType::Set => "Set",
            SupportedDataType::Array => "Array",
            _ => "List",
        };
        TypeSpec {
            example: Some(Box::new(element)),
            ..TypeSpec::simple(kind, name)
        }
    }

    pub fn map(key: TypeSpec, value: TypeSpec) -> Self {
        TypeSpec {
            key_type: Some(Box::new(key)),
            value_type: Some(Box::new(value)),
            ..TypeSpec::simple(SupportedDataType::Map, "Map")
        }
    }

    pub fn is_primitive(&self) -> bool {
        PRIMITIVE_TYPE_NAMES.contains(&self.type_name.as_str())
    }

    /// A copy without definition payload, suitable as a reference.
    pub fn as_reference(&self) -> TypeSpec {
        TypeSpec {
            fields: Vec::new(),
            enum_items: Vec::new(),
            ..self.clone()
        }
    }
}

/// One parameter, object field, or element prototype with its constraints.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct ParamSpec {
    pub name: String,
    #[serde(rename = "type")]
    pub type_spec: TypeSpec,
    #[serde(default)]
    pub is_nullable: bool,
    #[serde(default = "default_true")]
    pub is_mutable: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub default_value: Option<serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub min_size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub max_size: Option<u64>,
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "min")]
    pub min_value: Option<Number>,
    #[serde(default, skip_serializing_if = "Option::is_none", alias = "max")]
    pub max_value: Option<Number>,
    #[serde(default = "default_true")]
    pub min_inclusive: bool,
    #[serde(default = "default_true")]
    pub max_inclusive: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub precision: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scale: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub pattern: Option<String>,
    /// Element prototype (sequences) or key and value prototypes (maps).
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub inner_content: Vec<ParamSpec>,
}

fn default_true() -> bool {
    true
}

impl ParamSpec {
    pub fn new(name: impl Into<String>, type_spec: TypeSpec) -> Self {
        ParamSpec {
            name: name.into(),
            type_spec,
            is_nullable: false,
            is_mutable: true,
            default_value: None,
            min_size: None,
            max_size: None,
            min_value: None,
            max_value: None,
            min_inclusive: true,
            max_inclusive: true,
            precision: None,
            scale: None,
            pattern: None,
            inner_content: Vec::new(),
        }
    }

    pub fn kind(&self) -> SupportedDataType {
        self.type_spec.kind
    }

    /// Element prototype for sequences, explicit or derived from the type.
    pub fn element_spec(&self) -> Option<ParamSpec> {
        if let Some(p) = self.inner_content.first().filter(|_| self.kind().is_sequence()) {
            return Some(p.clone());
        }
        self.type_spec
            .example
            .as_deref()
            .map(|t| ParamSpec::new(format!("{}[]", self.name), t.clone()))
    }

    /// Key and value prototypes for maps.
    pub fn map_specs(&self) -> Option<(ParamSpec, ParamSpec)> {
        if self.kind() != SupportedDataType::Map {
            return None;
        }
        if self.inner_content.len() == 2 {
            return Some((self.inner_content[0].clone(), self.inner_content[1].clone()));
        }
        let k = self.type_spec.key_type.as_deref()?;
        let v = self.type_spec.value_type.as_deref()?;
        Some((
            ParamSpec::new(format!("{}.key", self.name), k.clone()),
            ParamSpec::new(format!("{}.value", self.name), v.clone()),
        ))
    }
}

/// How authentication is supplied for a call.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuthMode {
    Static,
    Dynamic,
}

/// Which functions an auth setting applies to.
#[derive(Debug, Clone, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum AuthScope {
    #[default]
    AllFunctions,
    Functions(Vec<String>),
}

impl AuthScope {
    pub fn applies_to(&self, action_name: &str) -> bool {
        match self {
            AuthScope::AllFunctions => true,
            AuthScope::Functions(names) => names.iter().any(|n| n == action_name),
        }
    }
}

/// Login call used to obtain a dynamic token.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct LoginSpec {
    pub interface_id: String,
    pub action_name: String,
    #[serde(default)]
    pub args: Vec<serde_json::Value>,
    /// Dotted path into the login response holding the token.
    pub token_extraction_path: String,
    /// Auth field name receiving the token on subsequent calls.
    pub token_injection_path: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct AuthSpec {
    #[serde(default)]
    pub name: String,
    pub mode: AuthMode,
    #[serde(default, skip_serializing_if = "BTreeMap::is_empty")]
    pub static_fields: BTreeMap<String, serde_json::Value>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub login: Option<LoginSpec>,
    #[serde(default)]
    pub scope: AuthScope,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct FunctionSpec {
    pub interface_id: String,
    pub action_name: String,
    #[serde(default)]
    pub request_params: Vec<ParamSpec>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub response_type: Option<TypeSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub declared_exceptions: Vec<String>,
    #[serde(default)]
    pub is_authorized: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub auth_setup: Option<AuthSpec>,
}

impl FunctionSpec {
    /// `Interface.action`, the identifier used in suites and targets.
    pub fn qualified_name(&self) -> String {
        format!("{}.{}", self.interface_id, self.action_name)
    }

    pub fn declares(&self, exception_name: &str) -> bool {
        let short = exception_name.rsplit(['.', '$']).next().unwrap_or(exception_name);
        self.declared_exceptions
            .iter()
            .any(|d| d == exception_name || d == short)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
pub struct InterfaceSchema {
    pub interface_id: String,
    pub functions: Vec<FunctionSpec>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub auth_functions: Vec<FunctionSpec>,
    /// References to the types this interface employs.
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub types: Vec<TypeSpec>,
}

/// A whole RPC API: one or more interfaces plus the named type registry.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct RpcSchema {
    pub interfaces: Vec<InterfaceSchema>,
    #[serde(default)]
    pub type_defs: BTreeMap<String, TypeSpec>,
}

/// Index of a function inside a schema, stable for the schema's lifetime.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct FunctionRef {
    pub interface: usize,
    pub function: usize,
}

impl fmt::Display for FunctionRef {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}:{}", self.interface, self.function)
    }
}

impl RpcSchema {
    pub fn function(&self, r: FunctionRef) -> &FunctionSpec {
        &self.interfaces[r.interface].functions[r.function]
    }

    /// All callable (non-auth) functions in declaration order.
    pub fn function_refs(&self) -> Vec<FunctionRef> {
        self.interfaces
            .iter()
            .enumerate()
            .flat_map(|(i, iface)| {
                (0..iface.functions.len()).map(move |f| FunctionRef {
                    interface: i,
                    function: f,
                })
            })
            .collect()
    }

    pub fn functions(&self) -> impl Iterator<Item = &FunctionSpec> {
        self.interfaces.iter().flat_map(|i| i.functions.iter())
    }

    pub fn function_count(&self) -> usize {
        self.interfaces.iter().map(|i| i.functions.len()).sum()
    }

    pub fn find_function(&self, qualified: &str) -> Option<FunctionRef> {
        let (iface, action) = qualified.split_once('.')?;
        self.function_refs().into_iter().find(|r| {
            let f = self.function(*r);
            f.interface_id == iface && f.action_name == action
        })
    }

    /// Searches functions and auth functions of an interface.
    pub fn find_any_function(&self, interface_id: &str, action: &str) -> Option<&FunctionSpec> {
        self.interfaces
            .iter()
            .filter(|i| i.interface_id == interface_id)
            .flat_map(|i| i.functions.iter().chain(i.auth_functions.iter()))
            .find(|f| f.action_name == action)
    }

    pub fn resolve(&self, type_name: &str) -> Option<&TypeSpec> {
        self.type_defs.get(type_name)
    }

    /// SHA-256 over the canonical JSON form.
    pub fn content_hash(&self) -> String {
        let text = to_json_string(self);
        let digest = Sha256::digest(text.as_bytes());
        digest.iter().map(|b| format!("{b:02x}")).collect()
    }
}
