//! Protocol server wrapping the built-in trainer.
//!
//! `topicforge serve-builtin` runs this over stdin/stdout. It is the reference
//! implementation of the server side of [`crate::protocol`] and lets the
//! external trainer path be exercised without any other runtime.

use std::io::{self, BufRead, Write};

use topicforge_core::trainer::TrainerKind;
use topicforge_core::{LinearTrainer, Trainer, TrainerConfig};

use crate::protocol::{Request, Response, PROTOCOL_VERSION};

pub const SERVER_NAME: &str = "topicforge-builtin";

/// Serves requests until `shutdown` or end of input.
///
/// Malformed or failing requests get an `ok:false` response and the loop continues.
pub fn serve<R: BufRead, W: Write>(input: R, mut output: W) -> io::Result<()> {
    let mut trainer: Option<LinearTrainer> = None;
    for line in input.lines() {
        let line = line?;
        let (resp, done) = match serde_json::from_str::<Request>(&line) {
            Ok(req) => {
                let done = matches!(req, Request::Shutdown {});
                (handle(&mut trainer, req), done)
            }
            Err(e) => (Response::error(format!("bad request: {e}")), false),
        };
        serde_json::to_writer(&mut output, &resp)?;
        output.write_all(b"\n")?;
        output.flush()?;
        if done {
            break;
        }
    }
    Ok(())
}

fn handle(trainer: &mut Option<LinearTrainer>, req: Request) -> Response {
    match req {
        Request::Init {
            config,
            seed,
            protocol,
        } => {
            if protocol != PROTOCOL_VERSION {
                return Response::error(format!("unsupported protocol version {protocol}"));
            }
            let mut cfg: TrainerConfig = match serde_json::from_value(config) {
                Ok(c) => c,
                Err(e) => return Response::error(format!("bad config: {e}")),
            };
            cfg.kind = TrainerKind::Builtin;
            cfg.external_cmd = None;
            cfg.seed = seed;
            match LinearTrainer::new(cfg) {
                Ok(t) => {
                    *trainer = Some(t);
                    Response {
                        name: Some(SERVER_NAME.into()),
                        ..Response::ok()
                    }
                }
                Err(e) => Response::error(e.to_string()),
            }
        }
        Request::Shutdown {} => Response::ok(),
        Request::TrainStage { stage, examples } => with_trainer(trainer, |t| {
            let expected = t.stages_trained() + 1;
            if stage != expected {
                return Ok(Response::error(format!(
                    "expected stage {expected}, got {stage}"
                )));
            }
            t.train_stage(&examples).map(|()| Response::ok())
        }),
        Request::Score { texts } => with_trainer(trainer, |t| {
            let refs: Vec<&str> = texts.iter().map(String::as_str).collect();
            t.score(&refs).map(|scores| Response {
                scores: Some(scores),
                ..Response::ok()
            })
        }),
        Request::Reset {} => with_trainer(trainer, |t| t.reset().map(|()| Response::ok())),
    }
}

fn with_trainer(
    trainer: &mut Option<LinearTrainer>,
    f: impl FnOnce(&mut LinearTrainer) -> Result<Response, topicforge_core::TrainerError>,
) -> Response {
    match trainer.as_mut() {
        Some(t) => f(t).unwrap_or_else(|e| Response::error(e.to_string())),
        None => Response::error("not initialized"),
    }
}
