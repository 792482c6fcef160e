//! Client side of the external trainer protocol (see [`crate::protocol`]).
//!
//! The trainer command runs through `sh -c`. Its stderr is inherited so that
//! trainer logs reach the user.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};
use std::time::{Duration, Instant};

use topicforge_core::seed::{derive_seed, Tag};
use topicforge_core::trainer::TrainerFactory;
use topicforge_core::{TrainExample, Trainer, TrainerConfig, TrainerError};

use crate::protocol::{Request, Response, PROTOCOL_VERSION};

/// How long a child may take to exit after `shutdown` before it is killed.
const EXIT_GRACE: Duration = Duration::from_secs(5);

/// A trainer living in a child process.
#[derive(Debug)]
pub struct ExternalTrainer {
    child: Child,
    stdin: Option<ChildStdin>,
    stdout: BufReader<ChildStdout>,
    name: String,
    stages: usize,
    /// Set after any failed exchange; the child is then killed instead of shut down.
    poisoned: bool,
}

impl ExternalTrainer {
    /// Starts `cmd` and performs the `init` handshake.
    pub fn spawn(cmd: &str, config: &TrainerConfig, seed: u64) -> Result<Self, TrainerError> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(cmd)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| TrainerError::SpawnFailure(format!("`{cmd}`: {e}")))?;
        let (Some(stdin), Some(stdout)) = (child.stdin.take(), child.stdout.take()) else {
            let _ = child.kill();
            return Err(TrainerError::SpawnFailure("child pipes unavailable".into()));
        };
        let mut trainer = ExternalTrainer {
            child,
            stdin: Some(stdin),
            stdout: BufReader::new(stdout),
            name: String::new(),
            stages: 0,
            poisoned: false,
        };
        let config = serde_json::to_value(config)
            .map_err(|e| TrainerError::HandshakeFailure(e.to_string()))?;
        let init = Request::Init {
            config,
            seed,
            protocol: PROTOCOL_VERSION,
        };
        let resp = trainer
            .call(&init)
            .map_err(|e| TrainerError::HandshakeFailure(e.to_string()))?;
        trainer.name = resp.name.unwrap_or_default();
        log::debug!("external trainer `{}` ready (seed {seed})", trainer.name);
        Ok(trainer)
    }

    /// Name reported by the child during the handshake.
    pub fn name(&self) -> &str {
        &self.name
    }

    /// Sends one request and reads exactly one response line.
    fn call(&mut self, req: &Request) -> Result<Response, TrainerError> {
        let out = self.exchange(req);
        if out.is_err() {
            self.poisoned = true;
        }
        out
    }

    fn exchange(&mut self, req: &Request) -> Result<Response, TrainerError> {
        let proto = |m: String| TrainerError::Protocol(m);
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| proto("trainer already shut down".into()))?;
        let mut line = serde_json::to_string(req).map_err(|e| proto(e.to_string()))?;
        line.push('\n');
        stdin
            .write_all(line.as_bytes())
            .and_then(|()| stdin.flush())
            .map_err(|e| proto(format!("write failed: {e}")))?;
        let mut reply = String::new();
        let n = self
            .stdout
            .read_line(&mut reply)
            .map_err(|e| proto(format!("read failed: {e}")))?;
        if n == 0 {
            return Err(proto("trainer closed its output".into()));
        }
        let resp: Response = serde_json::from_str(reply.trim_end())
            .map_err(|e| proto(format!("malformed response `{}`: {e}", reply.trim_end())))?;
        if !resp.ok {
            return Err(proto(
                resp.error.unwrap_or_else(|| "unspecified error".into()),
            ));
        }
        Ok(resp)
    }

    /// Sends `shutdown` and waits for the child to exit with status 0.
    pub fn shutdown(mut self) -> Result<(), TrainerError> {
        self.close()
    }

    fn close(&mut self) -> Result<(), TrainerError> {
        if self.stdin.is_none() {
            return Ok(());
        }
        if self.poisoned {
            self.stdin = None;
            let _ = self.child.kill();
            let _ = self.child.wait();
            return Ok(());
        }
        let reply = self.call(&Request::Shutdown {});
        self.stdin = None;
        let deadline = Instant::now() + EXIT_GRACE;
        let status = loop {
            match self.child.try_wait() {
                Ok(Some(status)) => break status,
                Ok(None) if Instant::now() < deadline => {
                    std::thread::sleep(Duration::from_millis(5))
                }
                _ => {
                    let _ = self.child.kill();
                    let _ = self.child.wait();
                    return Err(TrainerError::Protocol(
                        "trainer did not exit after shutdown".into(),
                    ));
                }
            }
        };
        reply?;
        if status.success() {
            Ok(())
        } else {
            Err(TrainerError::Protocol(format!(
                "trainer exited with {status}"
            )))
        }
    }
}

impl Drop for ExternalTrainer {
    fn drop(&mut self) {
        if let Err(e) = self.close() {
            log::warn!("external trainer shutdown: {e}");
        }
    }
}

impl Trainer for ExternalTrainer {
    fn train_stage(&mut self, examples: &[TrainExample]) -> Result<(), TrainerError> {
        if examples.is_empty() {
            return Err(TrainerError::EmptyStage);
        }
        self.call(&Request::TrainStage {
            stage: self.stages + 1,
            examples: examples.to_vec(),
        })?;
        self.stages += 1;
        Ok(())
    }

    fn score(&mut self, texts: &[&str]) -> Result<Vec<f64>, TrainerError> {
        let resp = self.call(&Request::Score {
            texts: texts.iter().map(|t| t.to_string()).collect(),
        })?;
        let scores = resp
            .scores
            .ok_or_else(|| TrainerError::Protocol("score response without scores".into()))?;
        if scores.len() != texts.len() {
            return Err(TrainerError::Protocol(format!(
                "expected {} scores, got {}",
                texts.len(),
                scores.len()
            )));
        }
        if let Some(s) = scores.iter().find(|s| !(0.0..=1.0).contains(*s)) {
            return Err(TrainerError::Protocol(format!("score {s} outside [0, 1]")));
        }
        Ok(scores)
    }

    fn reset(&mut self) -> Result<(), TrainerError> {
        self.call(&Request::Reset {})?;
        self.stages = 0;
        Ok(())
    }

    fn stages_trained(&self) -> usize {
        self.stages
    }
}

/// Spawns one external process per target run.
///
/// The seed sent in `init` mixes the config seed with the run seed exactly as
/// the built-in factory does, so a server wrapping the built-in trainer
/// reproduces built-in results.
#[derive(Debug, Clone)]
pub struct ExternalTrainerFactory {
    pub config: TrainerConfig,
}

impl TrainerFactory for ExternalTrainerFactory {
    type Trainer = ExternalTrainer;

    fn create(&self, seed: u64) -> Result<ExternalTrainer, TrainerError> {
        let cmd = self.config.external_cmd.as_deref().ok_or_else(|| {
            TrainerError::InvalidConfig("external trainer needs external_cmd".into())
        })?;
        ExternalTrainer::spawn(
            cmd,
            &self.config,
            derive_seed(self.config.seed, &[Tag::Num(seed)]),
        )
    }
}
