//! HTTP_JSON transport for services fronted by a thin JSON adapter.
//!
//! Request: `POST <endpoint>` with
//! `{"format":"rpcfuzz-wire/1","interfaceId":..,"actionName":..,"args":[..],"auth":{..}}`.
//! Response: `{"ok":true,"result":..}` or
//! `{"ok":false,"error":{"name":..,"message":..,"type":..}}`.
//! The optional reset hook is `POST <reset-url>` with an empty body,
//! answered by 204.

use std::io;
use std::time::Duration;

use serde_json::{json, Value};

use super::{CallRequest, CallResult, RawException, RawOutcome, Transport, TransportError, TransportKind};
use crate::fitness::ExceptionType;

pub const WIRE_FORMAT: &str = "rpcfuzz-wire/1";
pub const DEFAULT_HTTP_TIMEOUT: Duration = Duration::from_secs(30);

pub struct HttpJsonTransport {
    agent: ureq::Agent,
    endpoint: String,
    reset_url: Option<String>,
}

impl HttpJsonTransport {
    pub fn new(endpoint: impl Into<String>, reset_url: Option<String>, timeout: Duration) -> Self {
        HttpJsonTransport {
            agent: ureq::AgentBuilder::new().timeout(timeout).build(),
            endpoint: endpoint.into(),
            reset_url,
        }
    }
}

fn transport_exception(message: String, t: ExceptionType) -> RawOutcome {
    RawOutcome::Raised(RawException::typed("TTransportException", message, t))
}

fn is_timeout(e: &ureq::Transport) -> bool {
    let mut source = std::error::Error::source(e);
    while let Some(s) = source {
        if let Some(io) = s.downcast_ref::<io::Error>() {
            return matches!(io.kind(), io::ErrorKind::TimedOut | io::ErrorKind::WouldBlock);
        }
        source = s.source();
    }
    e.to_string().contains("timed out")
}

fn parse_reply(body: Value) -> RawOutcome {
    match body.get("ok").and_then(Value::as_bool) {
        Some(true) => RawOutcome::Returned(body.get("result").cloned()),
        Some(false) => match body.get("error").cloned().map(serde_json::from_value::<RawException>) {
            Some(Ok(e)) => RawOutcome::Raised(e),
            _ => transport_exception("malformed error object".into(), ExceptionType::TransportCorruptedData),
        },
        None => transport_exception("reply lacks 'ok'".into(), ExceptionType::TransportCorruptedData),
    }
}

impl Transport for HttpJsonTransport {
    fn kind(&self) -> TransportKind {
        TransportKind::HttpJson
    }

    fn call(&mut self, request: &CallRequest<'_>) -> Result<CallResult, TransportError> {
        let body = json!({
            "format": WIRE_FORMAT,
            "interfaceId": request.interface_id,
            "actionName": request.action_name,
            "args": request.args,
            "auth": request.auth,
        });
        let outcome = match self.agent.post(&self.endpoint).send_json(body) {
            Ok(resp) => match resp.into_json::<Value>() {
                Ok(v) => parse_reply(v),
                Err(e) => transport_exception(format!("unreadable reply: {e}"), ExceptionType::TransportCorruptedData),
            },
            Err(ureq::Error::Status(code, resp)) => match resp.into_json::<Value>().map(parse_reply) {
                Ok(RawOutcome::Raised(e)) => RawOutcome::Raised(e),
                _ => transport_exception(format!("HTTP status {code}"), ExceptionType::TransportUnknown),
            },
            Err(ureq::Error::Transport(t)) => {
                if is_timeout(&t) {
                    transport_exception(format!("no reply: {t}"), ExceptionType::TransportTimedOut)
                } else {
                    return Err(TransportError::Unavailable(t.to_string()));
                }
            }
        };
        Ok(CallResult {
            outcome,
            coverage: Vec::new(),
        })
    }

    fn supports_reset(&self) -> bool {
        self.reset_url.is_some()
    }

    fn reset(&mut self) -> Result<(), TransportError> {
        let Some(url) = &self.reset_url else {
            return Err(TransportError::Unsupported("reset".into()));
        };
        match self.agent.post(url).call() {
            Ok(r) if r.status() == 204 => Ok(()),
            Ok(r) => {
                log::warn!("reset hook answered {} instead of 204", r.status());
                Ok(())
            }
            Err(ureq::Error::Status(code, _)) => {
                log::warn!("reset hook failed with status {code}");
                Ok(())
            }
            Err(e) => Err(TransportError::Unavailable(e.to_string())),
        }
    }
}
