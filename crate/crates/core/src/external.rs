//! Line-framed subprocess protocol for out-of-process predictors.
//!
//! Requests, one per line: `HELLO <version>`, `RESET`, `RANK <token-id>`,
//! `TOKEN <rank>`. Responses, exactly one per request and in order:
//! `OK vocab=<N>`, `OK`, `R <rank>`, `T <token-id>`, or `ERR <message>`.
//! `RANK` and `TOKEN` both advance the plugin's context with the token
//! involved, so an encoder issuing `RANK` and a decoder issuing `TOKEN`
//! walk through identical states.

use std::io::{BufRead, BufReader, BufWriter, Write};
use std::process::{Child, ChildStdin, ChildStdout, Command, Stdio};

use crate::error::{Error, Result};
use crate::predictor::Predictor;
use crate::tokenizer::Token;

pub const PROTOCOL_VERSION: u32 = 1;

/// Client end of the protocol, driving a spawned plugin process.
pub struct ExternalPredictor {
    child: Child,
    stdin: Option<BufWriter<ChildStdin>>,
    stdout: BufReader<ChildStdout>,
    vocab_size: u32,
    line: String,
}

/// Splits a `--predictor-cmd` string with POSIX shell quoting rules.
pub fn split_command(cmd: &str) -> Result<Vec<String>> {
    match shlex::split(cmd) {
        Some(argv) if !argv.is_empty() => Ok(argv),
        _ => Err(Error::Config(format!("cannot parse predictor command {cmd:?}"))),
    }
}

impl ExternalPredictor {
    /// Launches `argv`, performs the handshake and resets the plugin.
    /// The plugin must report exactly `vocab_size` tokens.
    pub fn spawn(argv: &[String], vocab_size: u32) -> Result<Self> {
        let (program, args) = argv
            .split_first()
            .ok_or_else(|| Error::Config("empty predictor command".into()))?;
        let mut child = Command::new(program)
            .args(args)
            .stdin(Stdio::piped())
            .stdout(Stdio::piped())
            .stderr(Stdio::inherit())
            .spawn()
            .map_err(|e| Error::Protocol(format!("cannot launch predictor {program:?}: {e}")))?;
        let stdin = child.stdin.take().map(BufWriter::new);
        let stdout = BufReader::new(child.stdout.take().expect("piped stdout"));
        let mut p = ExternalPredictor {
            child,
            stdin,
            stdout,
            vocab_size,
            line: String::new(),
        };

        let reply = p.request(&format!("HELLO {PROTOCOL_VERSION}"))?;
        let vocab = reply
            .strip_prefix("OK vocab=")
            .and_then(|n| n.parse::<u32>().ok())
            .ok_or_else(|| Error::Protocol(format!("bad handshake reply {reply:?}")))?;
        if vocab != vocab_size {
            return Err(Error::Protocol(format!(
                "vocabulary mismatch: plugin serves {vocab} tokens, stream uses {vocab_size}"
            )));
        }
        let reply = p.request("RESET")?;
        if reply != "OK" {
            return Err(Error::Protocol(format!("bad RESET reply {reply:?}")));
        }
        Ok(p)
    }

    fn request(&mut self, frame: &str) -> Result<String> {
        let stdin = self
            .stdin
            .as_mut()
            .ok_or_else(|| Error::Protocol("predictor input closed".into()))?;
        writeln!(stdin, "{frame}")
            .and_then(|_| stdin.flush())
            .map_err(|e| Error::Protocol(format!("writing {frame:?}: {e}")))?;
        self.line.clear();
        let n = self
            .stdout
            .read_line(&mut self.line)
            .map_err(|e| Error::Protocol(format!("reading reply to {frame:?}: {e}")))?;
        if n == 0 {
            return Err(Error::Protocol(format!("predictor exited before replying to {frame:?}")));
        }
        let reply = self.line.trim_end_matches(['\n', '\r']);
        if let Some(msg) = reply.strip_prefix("ERR") {
            return Err(Error::Protocol(format!("predictor rejected {frame:?}:{msg}")));
        }
        Ok(reply.to_string())
    }

    fn numeric_reply(&mut self, frame: &str, tag: &str) -> Result<u32> {
        let reply = self.request(frame)?;
        let value = reply
            .strip_prefix(tag)
            .and_then(|v| v.parse::<u32>().ok())
            .ok_or_else(|| Error::Protocol(format!("bad reply {reply:?} to {frame:?}")))?;
        if value >= self.vocab_size {
            return Err(Error::Protocol(format!(
                "reply {reply:?} outside vocabulary of {}",
                self.vocab_size
            )));
        }
        Ok(value)
    }
}

impl Predictor for ExternalPredictor {
    fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    fn encode(&mut self, token: Token) -> Result<u32> {
        if token >= self.vocab_size {
            return Err(Error::Contract(format!(
                "token {token} outside vocabulary of {}",
                self.vocab_size
            )));
        }
        self.numeric_reply(&format!("RANK {token}"), "R ")
    }

    fn decode(&mut self, rank: u32) -> Result<Token> {
        if rank >= self.vocab_size {
            return Err(Error::MalformedStream(format!(
                "rank {rank} outside vocabulary of {}",
                self.vocab_size
            )));
        }
        self.numeric_reply(&format!("TOKEN {rank}"), "T ")
    }
}

impl Drop for ExternalPredictor {
    fn drop(&mut self) {
        // Closing stdin ends the plugin's serve loop.
        self.stdin.take();
        let _ = self.child.wait();
    }
}

/// Server end of the protocol. `fresh` builds a new model state, used at
/// start-up and on every `RESET`. Returns when input ends; an unsupported
/// `HELLO` version is answered with `ERR` and reported as an error.
pub fn serve<R, W, F>(input: R, mut output: W, mut fresh: F) -> Result<()>
where
    R: BufRead,
    W: Write,
    F: FnMut() -> Box<dyn Predictor>,
{
    let mut model = fresh();
    for line in input.lines() {
        let line = line?;
        let mut parts = line.split_whitespace();
        let cmd = parts.next().unwrap_or("");
        let arg = parts.next().map(str::parse::<u32>);
        let extra = parts.next().is_some();
        let reply = match (cmd, arg, extra) {
            ("HELLO", Some(Ok(PROTOCOL_VERSION)), false) => {
                format!("OK vocab={}", model.vocab_size())
            }
            ("HELLO", Some(Ok(v)), false) => {
                writeln!(output, "ERR unsupported protocol version {v}")?;
                output.flush()?;
                return Err(Error::Protocol(format!("client requested version {v}")));
            }
            ("RESET", None, false) => {
                model = fresh();
                "OK".to_string()
            }
            ("RANK", Some(Ok(t)), false) => match model.encode(t) {
                Ok(r) => format!("R {r}"),
                Err(e) => format!("ERR {e}"),
            },
            ("TOKEN", Some(Ok(r)), false) => match model.decode(r) {
                Ok(t) => format!("T {t}"),
                Err(e) => format!("ERR {e}"),
            },
            _ => format!("ERR malformed frame {line:?}"),
        };
        writeln!(output, "{reply}")?;
        output.flush()?;
    }
    Ok(())
}

/// Identity model: rank of `t` is `t`. Used for protocol conformance.
#[derive(Debug, Clone)]
pub struct EchoModel {
    vocab_size: u32,
}

impl EchoModel {
    pub fn new(vocab_size: u32) -> Self {
        EchoModel { vocab_size }
    }
}

impl Predictor for EchoModel {
    fn vocab_size(&self) -> u32 {
        self.vocab_size
    }

    fn encode(&mut self, token: Token) -> Result<u32> {
        if token >= self.vocab_size {
            return Err(Error::Contract(format!("token {token} out of range")));
        }
        Ok(token)
    }

    fn decode(&mut self, rank: u32) -> Result<Token> {
        if rank >= self.vocab_size {
            return Err(Error::MalformedStream(format!("rank {rank} out of range")));
        }
        Ok(rank)
    }
}
