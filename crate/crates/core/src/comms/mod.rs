//! Standardized communication node and wire protocol.
//!
//! Every component speaks the same length-prefixed JSON protocol over a duplex
//! byte stream, either an in-process pipe or TCP. Servers answer
//! `SCHEMA_REQ`/`QUERY_REQ`; clients hold [`Link`]s created through a
//! [`CommNode`], which may cap how many downstream links it holds.

mod frame;
mod node;
mod server;
mod transport;

#[cfg(test)]
mod tests;

pub use frame::{
    decode_message, encode_message, read_frame, Body, ComponentType, CorrelationId, ErrorPayload, FrameError, Hello,
    Message, MsgType, MAX_FRAME_LEN, PROTOCOL_VERSION,
};
pub use node::{CommError, CommNode, Link, DEFAULT_TIMEOUT};
pub use server::{serve_memory, serve_tcp, ServerHandle, Service};
pub use transport::{BoxedStream, DuplexIo, Endpoint, MemoryEndpoint};

/// Env var overriding the listen address of served components.
pub const BIND_ADDR_ENV: &str = "MMW_BIND_ADDR";
