//! JSON bodies exchanged over `/turn`.
//!
//! Request:
//!
//! ```json
//! {"conversation_id": "abc", "user_text": "let's talk about music", "trace": false}
//! ```
//!
//! Reply: a [`TurnReply`]. With `?stream=true` the body is newline-delimited
//! JSON: an optional `{"type":"ground","text":...}` line as soon as the
//! ground is known, then `{"type":"reply", ...}` with the full reply.

use parley_core::dm::TurnTrace;
use parley_core::TurnResult;
use serde::{Deserialize, Serialize};

pub const MAX_ID_LEN: usize = 128;
pub const MAX_TEXT_LEN: usize = 2000;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct TurnRequest {
    pub conversation_id: String,
    pub user_text: String,
    #[serde(default)]
    pub trace: bool,
}

impl TurnRequest {
    pub fn parse(body: &[u8]) -> Result<TurnRequest, String> {
        let req: TurnRequest = serde_json::from_slice(body).map_err(|e| format!("malformed turn request: {e}"))?;
        req.validate()?;
        Ok(req)
    }

    fn validate(&self) -> Result<(), String> {
        let id = &self.conversation_id;
        if id.is_empty() || id.len() > MAX_ID_LEN {
            return Err(format!("conversation_id must be 1..={MAX_ID_LEN} bytes"));
        }
        if !id.bytes().all(|b| b.is_ascii_alphanumeric() || b == b'-' || b == b'_') {
            return Err("conversation_id may only hold letters, digits, `-` and `_`".into());
        }
        if self.user_text.len() > MAX_TEXT_LEN {
            return Err(format!("user_text longer than {MAX_TEXT_LEN} bytes"));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TurnReply {
    pub conversation_id: String,
    pub turn_index: u64,
    pub response: String,
    pub ssml: Option<String>,
    pub ground: Option<String>,
    pub rg: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub trace: Option<TurnTrace>,
}

impl TurnReply {
    pub fn from_result(r: &TurnResult, with_trace: bool) -> TurnReply {
        TurnReply {
            conversation_id: r.trace.conversation_id.clone(),
            turn_index: r.trace.turn_index,
            response: r.response.text(),
            ssml: r.response.ssml.clone(),
            ground: r.response.ground.clone(),
            rg: r.response.source_rg.clone(),
            trace: with_trace.then(|| r.trace.clone()),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "type", rename_all = "snake_case")]
pub enum StreamEvent {
    Ground { text: String },
    Reply(TurnReply),
    Error { message: String },
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn request_checks() {
        assert!(TurnRequest::parse(br#"{"conversation_id":"a-1","user_text":"hi"}"#).is_ok());
        assert!(TurnRequest::parse(br#"{"conversation_id":"","user_text":"hi"}"#).is_err());
        assert!(TurnRequest::parse(br#"{"conversation_id":"../x","user_text":"hi"}"#).is_err());
        assert!(TurnRequest::parse(br#"{"conversation_id":"a","user_text":"hi","x":1}"#).is_err());
        assert!(TurnRequest::parse(br#"{"conversation_id":"a"}"#).is_err());
        assert!(TurnRequest::parse(b"not json").is_err());
        let long = format!(r#"{{"conversation_id":"a","user_text":"{}"}}"#, "x".repeat(MAX_TEXT_LEN + 1));
        assert!(TurnRequest::parse(long.as_bytes()).is_err());
    }

    #[test]
    fn stream_event_tags() {
        let s = serde_json::to_string(&StreamEvent::Ground { text: "Ok.".into() }).unwrap();
        assert_eq!(s, r#"{"type":"ground","text":"Ok."}"#);
    }
}
