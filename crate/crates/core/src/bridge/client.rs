//! Client-side adapter that makes a remote environment look local.

use std::io::{BufReader, BufWriter};
use std::net::{TcpStream, ToSocketAddrs};
use std::time::Duration;

use super::protocol::{read_message, write_message, ProtocolError, WireMessage};
use crate::env::{Env, EnvError, Space, StepResult};

pub const HANDSHAKE_TIMEOUT: Duration = Duration::from_secs(10);

pub struct RemoteEnv {
    reader: BufReader<TcpStream>,
    writer: BufWriter<TcpStream>,
    observation_space: Space,
    action_space: Space,
    active: bool,
    broken: bool,
}

fn transport(e: ProtocolError) -> EnvError {
    EnvError::Transport(e.to_string())
}

impl RemoteEnv {
    pub fn connect(address: &str) -> Result<Self, EnvError> {
        Self::connect_with_timeout(address, HANDSHAKE_TIMEOUT)
    }

    /// Connects, says hello and waits for the space description. Every step
    /// of the handshake must finish within `timeout`.
    pub fn connect_with_timeout(address: &str, timeout: Duration) -> Result<Self, EnvError> {
        let addrs: Vec<_> = address
            .to_socket_addrs()
            .map_err(|e| EnvError::Transport(format!("cannot resolve {address}: {e}")))?
            .collect();
        let mut last_err = None;
        let mut stream = None;
        for addr in addrs {
            match TcpStream::connect_timeout(&addr, timeout) {
                Ok(s) => {
                    stream = Some(s);
                    break;
                }
                Err(e) => last_err = Some(e),
            }
        }
        let stream = stream.ok_or_else(|| {
            EnvError::Transport(match last_err {
                Some(e) => format!("cannot connect to {address}: {e}"),
                None => format!("{address} resolved to no addresses"),
            })
        })?;
        let io = |e: std::io::Error| EnvError::Transport(e.to_string());
        stream.set_nodelay(true).map_err(io)?;
        stream.set_read_timeout(Some(timeout)).map_err(io)?;
        let mut reader = BufReader::new(stream.try_clone().map_err(io)?);
        let mut writer = BufWriter::new(stream);

        write_message(&mut writer, &WireMessage::Hello).map_err(transport)?;
        let handshake = |reader: &mut BufReader<TcpStream>| -> Result<WireMessage, EnvError> {
            match read_message(reader) {
                Ok(WireMessage::Error { code, message }) => Err(EnvError::Remote { code, message }),
                Ok(m) => Ok(m),
                Err(ProtocolError::Io(e))
                    if matches!(e.kind(), std::io::ErrorKind::WouldBlock | std::io::ErrorKind::TimedOut) =>
                {
                    Err(EnvError::Transport(format!(
                        "handshake with {address} timed out after {timeout:?}"
                    )))
                }
                Err(e) => Err(transport(e)),
            }
        };
        match handshake(&mut reader)? {
            WireMessage::Hello => {}
            other => {
                return Err(EnvError::Transport(format!(
                    "expected hello, got {}",
                    other.type_name()
                )))
            }
        }
        let (observation_space, action_space) = match handshake(&mut reader)? {
            WireMessage::Spaces {
                observation_space,
                action_space,
            } => (observation_space, action_space),
            other => {
                return Err(EnvError::Transport(format!(
                    "expected spaces, got {}",
                    other.type_name()
                )))
            }
        };
        reader.get_ref().set_read_timeout(None).map_err(io)?;
        Ok(Self {
            reader,
            writer,
            observation_space,
            action_space,
            active: false,
            broken: false,
        })
    }

    fn request(&mut self, message: &WireMessage) -> Result<WireMessage, EnvError> {
        if self.broken {
            return Err(EnvError::Transport("connection is no longer usable".into()));
        }
        let reply = write_message(&mut self.writer, message)
            .and_then(|_| read_message(&mut self.reader));
        match reply {
            Ok(WireMessage::Error { code, message }) => {
                self.broken = true;
                Err(EnvError::Remote { code, message })
            }
            Ok(m) => Ok(m),
            Err(e) => {
                self.broken = true;
                Err(transport(e))
            }
        }
    }

    fn unexpected(&mut self, expected: &str, got: &WireMessage) -> EnvError {
        self.broken = true;
        EnvError::Transport(format!("expected {expected}, got {}", got.type_name()))
    }
}

impl Env for RemoteEnv {
    fn observation_space(&self) -> &Space {
        &self.observation_space
    }

    fn action_space(&self) -> &Space {
        &self.action_space
    }

    fn reset(&mut self, seed: Option<u64>) -> Result<Vec<f64>, EnvError> {
        match self.request(&WireMessage::Reset { seed })? {
            WireMessage::ResetResult { observation } => {
                self.active = true;
                Ok(observation)
            }
            other => Err(self.unexpected("reset_result", &other)),
        }
    }

    fn step(&mut self, action: &[f64]) -> Result<StepResult, EnvError> {
        if !self.active {
            return Err(EnvError::Usage("step called on a finished or unreset episode".into()));
        }
        let reply = self.request(&WireMessage::Step {
            action: action.to_vec(),
        });
        let reply = match reply {
            Ok(r) => r,
            Err(e) => {
                self.active = false;
                return Err(e);
            }
        };
        match reply {
            WireMessage::StepResult {
                observation,
                reward,
                terminated,
                truncated,
            } => {
                self.active = !(terminated || truncated);
                Ok(StepResult {
                    observation,
                    reward,
                    terminated,
                    truncated,
                    final_observation: None,
                })
            }
            other => Err(self.unexpected("step_result", &other)),
        }
    }
}

impl Drop for RemoteEnv {
    fn drop(&mut self) {
        if !self.broken {
            let _ = write_message(&mut self.writer, &WireMessage::Close);
        }
    }
}
