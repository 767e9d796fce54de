//! Reference server that hosts local environments over TCP.

use std::io::{BufReader, BufWriter};
use std::net::{SocketAddr, TcpListener, TcpStream, ToSocketAddrs};
use std::sync::atomic::{AtomicBool, Ordering};
use std::sync::Arc;
use std::thread::JoinHandle;

use super::protocol::{read_message, write_message, ProtocolError, WireMessage};
use crate::env::{Env, EnvError};

pub type EnvFactory = dyn Fn() -> Result<Box<dyn Env>, EnvError> + Send + Sync;

pub const CODE_BAD_STATE: &str = "bad_state";
pub const CODE_PROTOCOL: &str = "protocol";
pub const CODE_VERSION_MISMATCH: &str = "version_mismatch";
pub const CODE_ENV_ERROR: &str = "env_error";

/// A running server. Dropping the handle stops accepting new sessions;
/// sessions already in progress run to completion.
pub struct ServerHandle {
    local_addr: SocketAddr,
    stop: Arc<AtomicBool>,
    accept_thread: Option<JoinHandle<()>>,
}

impl ServerHandle {
    pub fn local_addr(&self) -> SocketAddr {
        self.local_addr
    }

    pub fn shutdown(mut self) {
        self.stop_accepting();
    }

    /// Blocks until the accept loop exits, which only happens after
    /// [`ServerHandle::shutdown`] is called from elsewhere. Used by the CLI.
    pub fn wait(mut self) {
        if let Some(t) = self.accept_thread.take() {
            let _ = t.join();
        }
    }

    fn stop_accepting(&mut self) {
        self.stop.store(true, Ordering::SeqCst);
        // Wake the blocking accept.
        let _ = TcpStream::connect(self.local_addr);
        if let Some(t) = self.accept_thread.take() {
            let _ = t.join();
        }
    }
}

impl Drop for ServerHandle {
    fn drop(&mut self) {
        if self.accept_thread.is_some() {
            self.stop_accepting();
        }
    }
}

/// Binds `bind` and serves one fresh environment per connection, each on its
/// own thread.
pub fn serve_env<A: ToSocketAddrs>(
    factory: Arc<EnvFactory>,
    bind: A,
) -> std::io::Result<ServerHandle> {
    let listener = TcpListener::bind(bind)?;
    let local_addr = listener.local_addr()?;
    let stop = Arc::new(AtomicBool::new(false));
    let stop_flag = Arc::clone(&stop);
    let accept_thread = std::thread::Builder::new()
        .name("env-server".into())
        .spawn(move || {
            for conn in listener.incoming() {
                if stop_flag.load(Ordering::SeqCst) {
                    break;
                }
                let stream = match conn {
                    Ok(s) => s,
                    Err(e) => {
                        log::warn!("accept failed: {e}");
                        continue;
                    }
                };
                let factory = Arc::clone(&factory);
                let spawned = std::thread::Builder::new()
                    .name("env-session".into())
                    .spawn(move || {
                        let peer = stream.peer_addr().ok();
                        if let Err(e) = run_session(stream, factory.as_ref()) {
                            log::debug!("session {peer:?} ended: {e}");
                        }
                    });
                if let Err(e) = spawned {
                    log::warn!("could not spawn session thread: {e}");
                }
            }
        })?;
    Ok(ServerHandle {
        local_addr,
        stop,
        accept_thread: Some(accept_thread),
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum SessionState {
    AwaitHello,
    Idle,
    InEpisode,
}

fn run_session(stream: TcpStream, factory: &EnvFactory) -> Result<(), ProtocolError> {
    stream.set_nodelay(true)?;
    let mut reader = BufReader::new(stream.try_clone()?);
    let mut writer = BufWriter::new(stream);
    let mut state = SessionState::AwaitHello;
    let mut env: Option<Box<dyn Env>> = None;

    let fail = |writer: &mut BufWriter<TcpStream>, code: &str, text: String| {
        let _ = write_message(writer, &WireMessage::error(code, text));
        Ok(())
    };

    loop {
        let message = match read_message(&mut reader) {
            Ok(m) => m,
            Err(ProtocolError::ConnectionClosed) => return Ok(()),
            Err(ProtocolError::VersionMismatch { expected, got }) => {
                return fail(
                    &mut writer,
                    CODE_VERSION_MISMATCH,
                    format!("server speaks v{expected}, client sent v{got}"),
                );
            }
            Err(ProtocolError::Io(e)) => return Err(ProtocolError::Io(e)),
            Err(e) => return fail(&mut writer, CODE_PROTOCOL, e.to_string()),
        };

        match (state, message) {
            (SessionState::Idle | SessionState::InEpisode, WireMessage::Close) => return Ok(()),
            (SessionState::AwaitHello, WireMessage::Hello) => {
                let fresh = match factory() {
                    Ok(e) => e,
                    Err(e) => return fail(&mut writer, CODE_ENV_ERROR, e.to_string()),
                };
                write_message(&mut writer, &WireMessage::Hello)?;
                write_message(
                    &mut writer,
                    &WireMessage::Spaces {
                        observation_space: fresh.observation_space().clone(),
                        action_space: fresh.action_space().clone(),
                    },
                )?;
                env = Some(fresh);
                state = SessionState::Idle;
            }
            (SessionState::Idle | SessionState::InEpisode, WireMessage::Reset { seed }) => {
                let env = env.as_mut().expect("env exists after hello");
                match env.reset(seed) {
                    Ok(observation) => {
                        write_message(&mut writer, &WireMessage::ResetResult { observation })?;
                        state = SessionState::InEpisode;
                    }
                    Err(e) => return fail(&mut writer, CODE_ENV_ERROR, e.to_string()),
                }
            }
            (SessionState::InEpisode, WireMessage::Step { action }) => {
                let env = env.as_mut().expect("env exists after hello");
                match env.step(&action) {
                    Ok(r) => {
                        if r.done() {
                            state = SessionState::Idle;
                        }
                        write_message(
                            &mut writer,
                            &WireMessage::StepResult {
                                observation: r.observation,
                                reward: r.reward,
                                terminated: r.terminated,
                                truncated: r.truncated,
                            },
                        )?;
                    }
                    Err(e) => return fail(&mut writer, CODE_ENV_ERROR, e.to_string()),
                }
            }
            (state, other) => {
                return fail(
                    &mut writer,
                    CODE_BAD_STATE,
                    format!("unexpected {} in state {state:?}", other.type_name()),
                );
            }
        }
    }
}
