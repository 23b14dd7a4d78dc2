use std::fmt;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum ExecutionResultClass {
    #[serde(rename = "ER1_INTERNAL_ERROR")]
    InternalError,
    #[serde(rename = "ER2_USER_ERROR")]
    UserError,
    #[serde(rename = "ER3_TRANSPORT_ERROR")]
    TransportError,
    #[serde(rename = "ER4_OTHER_EXCEPTION")]
    OtherException,
    #[serde(rename = "ER5_DECLARED_EXCEPTION")]
    DeclaredException,
    #[serde(rename = "ER6_UNEXPECTED_EXCEPTION")]
    UnexpectedException,
    #[serde(rename = "ER7_HANDLED")]
    Handled,
}

impl ExecutionResultClass {
    pub const ALL: [ExecutionResultClass; 7] = [
        Self::InternalError,
        Self::UserError,
        Self::TransportError,
        Self::OtherException,
        Self::DeclaredException,
        Self::UnexpectedException,
        Self::Handled,
    ];

    /// `ER1` .. `ER7`.
    pub fn code(self) -> &'static str {
        match self {
            Self::InternalError => "ER1",
            Self::UserError => "ER2",
            Self::TransportError => "ER3",
            Self::OtherException => "ER4",
            Self::DeclaredException => "ER5",
            Self::UnexpectedException => "ER6",
            Self::Handled => "ER7",
        }
    }

    /// Outcomes whose tests go to the exceptional suite file.
    pub fn is_exceptional(self) -> bool {
        matches!(
            self,
            Self::InternalError | Self::OtherException | Self::DeclaredException | Self::UnexpectedException
        )
    }
}

impl fmt::Display for ExecutionResultClass {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.code())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExceptionCategory {
    Application,
    Transport,
    User,
    Unclassified,
}

/// Thrift application, protocol and transport exception types, plus the two
/// generic types for declared and unrecognized exceptions.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum ExceptionType {
    AppUnknown,
    AppUnknownMethod,
    AppInvalidMessageType,
    AppWrongMethodName,
    AppBadSequenceId,
    AppMissingResult,
    AppInternalError,
    AppProtocolError,
    AppInvalidTransform,
    AppInvalidProtocol,
    AppUnsupportedClientType,
    ProtocolUnknown,
    ProtocolInvalidData,
    ProtocolNegativeSize,
    ProtocolSizeLimit,
    ProtocolBadVersion,
    ProtocolNotImplemented,
    ProtocolDepthLimit,
    TransportUnknown,
    TransportNotOpen,
    TransportAlreadyOpen,
    TransportTimedOut,
    TransportEndOfFile,
    TransportCorruptedData,
    CustomizedException,
    UnexpectedException,
}

impl ExceptionType {
    pub const ALL: [ExceptionType; 26] = [
        Self::AppUnknown,
        Self::AppUnknownMethod,
        Self::AppInvalidMessageType,
        Self::AppWrongMethodName,
        Self::AppBadSequenceId,
        Self::AppMissingResult,
        Self::AppInternalError,
        Self::AppProtocolError,
        Self::AppInvalidTransform,
        Self::AppInvalidProtocol,
        Self::AppUnsupportedClientType,
        Self::ProtocolUnknown,
        Self::ProtocolInvalidData,
        Self::ProtocolNegativeSize,
        Self::ProtocolSizeLimit,
        Self::ProtocolBadVersion,
        Self::ProtocolNotImplemented,
        Self::ProtocolDepthLimit,
        Self::TransportUnknown,
        Self::TransportNotOpen,
        Self::TransportAlreadyOpen,
        Self::TransportTimedOut,
        Self::TransportEndOfFile,
        Self::TransportCorruptedData,
        Self::CustomizedException,
        Self::UnexpectedException,
    ];

    pub fn category(self) -> ExceptionCategory {
        use ExceptionType::*;
        match self {
            AppUnknown | AppUnknownMethod | AppInvalidMessageType | AppWrongMethodName | AppBadSequenceId
            | AppMissingResult | AppInternalError | AppProtocolError | AppInvalidTransform | AppInvalidProtocol
            | AppUnsupportedClientType => ExceptionCategory::Application,
            ProtocolUnknown | ProtocolInvalidData | ProtocolNegativeSize | ProtocolSizeLimit | ProtocolBadVersion
            | ProtocolNotImplemented | ProtocolDepthLimit => ExceptionCategory::User,
            TransportUnknown | TransportNotOpen | TransportAlreadyOpen | TransportTimedOut | TransportEndOfFile
            | TransportCorruptedData => ExceptionCategory::Transport,
            CustomizedException | UnexpectedException => ExceptionCategory::Unclassified,
        }
    }

    /// Parses the wire spelling, e.g. `APP_INTERNAL_ERROR`.
    pub fn from_name(name: &str) -> Option<ExceptionType> {
        serde_json::from_value(serde_json::Value::from(name)).ok()
    }

    pub fn name(self) -> String {
        serde_json::to_value(self)
            .ok()
            .and_then(|v| v.as_str().map(str::to_string))
            .unwrap_or_default()
    }
}

/// Business-level outcome of a handled call, assigned by a categorizer.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum CallResultCode {
    Success,
    ServiceError,
    OtherError,
}
