use serde_json::Value;

use super::CallResultCode;
use crate::genes::Phenotype;

/// Refines handled calls into business-level result codes.
pub trait ResultCategorizer: Send + Sync {
    fn name(&self) -> &str;

    /// `None` leaves the call uncategorized.
    fn categorize(&self, response: &Phenotype) -> Option<CallResultCode>;
}

pub const BUILTIN_CATEGORIZERS: [&str; 1] = ["status-field"];

pub fn builtin_categorizer(name: &str) -> Option<Box<dyn ResultCategorizer>> {
    match name {
        "status-field" => Some(Box::new(StatusFieldCategorizer)),
        _ => None,
    }
}

/// Reads a `code` (numeric) or `status` (text) field of an object response.
///
/// Codes 0 and 200..=299 are successes, 500..=599 service errors. Status
/// strings `OK`/`SUCCESS` and `ERROR`/`SERVICE_ERROR` map likewise. Any
/// other value is an other error; responses without either field are left
/// uncategorized.
#[derive(Debug, Clone, Copy, Default)]
pub struct StatusFieldCategorizer;

impl ResultCategorizer for StatusFieldCategorizer {
    fn name(&self) -> &str {
        "status-field"
    }

    fn categorize(&self, response: &Phenotype) -> Option<CallResultCode> {
        let obj = response.as_object()?;
        if let Some(code) = obj.get("code").and_then(Value::as_i64) {
            return Some(match code {
                0 | 200..=299 => CallResultCode::Success,
                500..=599 => CallResultCode::ServiceError,
                _ => CallResultCode::OtherError,
            });
        }
        let status = obj.get("status")?.as_str()?.to_ascii_uppercase();
        Some(match status.as_str() {
            "OK" | "SUCCESS" => CallResultCode::Success,
            "ERROR" | "SERVICE_ERROR" => CallResultCode::ServiceError,
            _ => CallResultCode::OtherError,
        })
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use serde_json::json;

    #[test]
    fn status_field() {
        let c = StatusFieldCategorizer;
        assert_eq!(c.categorize(&json!({"code": 0})), Some(CallResultCode::Success));
        assert_eq!(c.categorize(&json!({"code": 503})), Some(CallResultCode::ServiceError));
        assert_eq!(c.categorize(&json!({"code": 404})), Some(CallResultCode::OtherError));
        assert_eq!(c.categorize(&json!({"status": "ok"})), Some(CallResultCode::Success));
        assert_eq!(c.categorize(&json!({"value": 1})), None);
        assert_eq!(c.categorize(&json!([1, 2])), None);
        assert!(builtin_categorizer("status-field").is_some());
        assert!(builtin_categorizer("nope").is_none());
    }
}
