//! Messages of the external trainer protocol.
//!
//! Newline-delimited JSON over the child's stdin/stdout, one request and one
//! response per line:
//!
//! | request | response |
//! |---|---|
//! | `{"cmd":"init","config":{..},"seed":N,"protocol":1}` | `{"ok":true,"name":str}` |
//! | `{"cmd":"train_stage","stage":k,"examples":[{"text":str,"label":0\|1}]}` | `{"ok":true}` |
//! | `{"cmd":"score","texts":[str]}` | `{"ok":true,"scores":[float]}` |
//! | `{"cmd":"reset"}` | `{"ok":true}` |
//! | `{"cmd":"shutdown"}` | `{"ok":true}`, then exit 0 |
//!
//! Any `{"ok":false,"error":str}` is a failure. Unknown fields are ignored and
//! unknown commands are errors. Stages are numbered from 1 and restart after `reset`.

use serde::{Deserialize, Serialize};
use topicforge_core::TrainExample;

pub const PROTOCOL_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(tag = "cmd", rename_all = "snake_case")]
pub enum Request {
    Init {
        config: serde_json::Value,
        seed: u64,
        protocol: u32,
    },
    TrainStage {
        stage: usize,
        examples: Vec<TrainExample>,
    },
    Score {
        texts: Vec<String>,
    },
    Reset {},
    Shutdown {},
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct Response {
    pub ok: bool,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub name: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scores: Option<Vec<f64>>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

impl Response {
    pub fn ok() -> Self {
        Response {
            ok: true,
            ..Response::default()
        }
    }

    pub fn error(msg: impl Into<String>) -> Self {
        Response {
            ok: false,
            error: Some(msg.into()),
            ..Response::default()
        }
    }
}
