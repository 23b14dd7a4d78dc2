//! Native JSON schema document (`rpcfuzz-schema/1`).

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::{validate_schema, InterfaceSchema, RpcSchema, SchemaError, Severity, TypeSpec};

pub const SCHEMA_FORMAT: &str = "rpcfuzz-schema/1";

#[derive(Serialize)]
#[serde(rename_all = "camelCase")]
struct DocumentOut<'a> {
    format: &'static str,
    interfaces: &'a [InterfaceSchema],
    type_defs: &'a BTreeMap<String, TypeSpec>,
}

#[derive(Deserialize)]
#[serde(rename_all = "camelCase", deny_unknown_fields)]
struct DocumentIn {
    #[serde(default)]
    format: Option<String>,
    interfaces: Vec<InterfaceSchema>,
    #[serde(default)]
    type_defs: BTreeMap<String, TypeSpec>,
}

/// Pretty-printed JSON document for a schema.
pub fn to_json_string(schema: &RpcSchema) -> String {
    let doc = DocumentOut {
        format: SCHEMA_FORMAT,
        interfaces: &schema.interfaces,
        type_defs: &schema.type_defs,
    };
    serde_json::to_string_pretty(&doc).expect("schema serializes")
}

/// Loads and validates a schema document.
pub fn load_json_schema(source: &str) -> Result<RpcSchema, SchemaError> {
    let value: serde_json::Value = serde_json::from_str(source).map_err(|e| SchemaError::Format {
        path: format!("line {} column {}", e.line(), e.column()),
        message: e.to_string(),
    })?;
    let doc: DocumentIn = serde_path_to_error::deserialize(value).map_err(|e| {
        let path = e.path().to_string();
        let message = e.inner().to_string();
        if message.starts_with("unknown variant") {
            SchemaError::Validation(vec![super::Diagnostic::error(path, message)])
        } else {
            SchemaError::Format { path, message }
        }
    })?;
    if let Some(f) = doc.format.as_deref() {
        if f != SCHEMA_FORMAT {
            return Err(SchemaError::Format {
                path: "format".into(),
                message: format!("unsupported format tag '{f}', expected '{SCHEMA_FORMAT}'"),
            });
        }
    }
    let schema = RpcSchema {
        interfaces: doc.interfaces,
        type_defs: doc.type_defs,
    };
    let errors: Vec<_> = validate_schema(&schema)
        .into_iter()
        .filter(|d| d.severity == Severity::Error)
        .collect();
    if errors.is_empty() {
        Ok(schema)
    } else {
        Err(SchemaError::Validation(errors))
    }
}
