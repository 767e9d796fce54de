//! Remote environments over TCP.
//!
//! A session runs `hello -> spaces -> (reset -> step*)* -> close`. Anything
//! else gets an error message and the connection is closed.

mod client;
pub mod protocol;
mod server;

pub use client::{RemoteEnv, HANDSHAKE_TIMEOUT};
pub use protocol::{
    decode_message, encode_message, read_message, write_message, Decoded, ProtocolError,
    WireMessage, PROTOCOL_VERSION,
};
pub use server::{
    serve_env, EnvFactory, ServerHandle, CODE_BAD_STATE, CODE_ENV_ERROR, CODE_PROTOCOL,
    CODE_VERSION_MISMATCH,
};
