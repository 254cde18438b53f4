//! Next-token model served by a child process over JSON lines.
//!
//! Each step writes one request line to the child's stdin:
//!
//! ```text
//! {"tokens":[1,4,1410],"offsets":[4.0,4.0,3.0],"valence":0.8,"arousal":null}
//! ```
//!
//! `tokens` are vocabulary ids, `offsets` the boundary offset in seconds
//! after each token, and an unspecified valence or arousal is `null`. The
//! child answers with one line holding a JSON array of probabilities, one
//! per vocabulary id.

use std::io::{BufRead, BufReader, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use cuechord_core::error::{Error, Result};
use cuechord_core::generate::{ModelContext, NextTokenModel};
use serde::Serialize;

#[derive(Serialize)]
struct Request {
    tokens: Vec<u32>,
    offsets: Vec<f64>,
    valence: Option<f64>,
    arousal: Option<f64>,
}

pub struct ExternalModel {
    child: Child,
    stdin: ChildStdin,
    stdout: BufReader<ChildStdout>,
    line: String,
}

impl ExternalModel {
    /// Run `command` through the shell.
    pub fn spawn(command: &str) -> Result<Self> {
        let mut child = Command::new("sh")
            .arg("-c")
            .arg(command)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Generation(format!("cannot start model `{command}`: {e}")))?;
        let stdin = child.stdin.take().expect("stdin is piped");
        let stdout = BufReader::new(child.stdout.take().expect("stdout is piped"));
        Ok(ExternalModel {
            child,
            stdin,
            stdout,
            line: String::new(),
        })
    }
}

impl NextTokenModel for ExternalModel {
    fn next_distribution(&mut self, ctx: &ModelContext<'_>) -> Result<Vec<f64>> {
        let req = Request {
            tokens: ctx.tokens.iter().map(|t| t.id()).collect(),
            offsets: ctx.offsets_ms.iter().map(|&o| o as f64 / 1000.0).collect(),
            valence: ctx.va.valence,
            arousal: ctx.va.arousal,
        };
        let io = |e: std::io::Error| Error::Generation(format!("model process: {e}"));
        let mut body = serde_json::to_vec(&req).map_err(|e| Error::Generation(e.to_string()))?;
        body.push(b'\n');
        self.stdin.write_all(&body).map_err(io)?;
        self.stdin.flush().map_err(io)?;
        self.line.clear();
        if self.stdout.read_line(&mut self.line).map_err(io)? == 0 {
            return Err(Error::Generation("model process closed its output".into()));
        }
        serde_json::from_str(self.line.trim())
            .map_err(|e| Error::Generation(format!("model reply is not a JSON array of numbers: {e}")))
    }
}

impl Drop for ExternalModel {
    fn drop(&mut self) {
        let _ = self.child.kill();
        let _ = self.child.wait();
    }
}
