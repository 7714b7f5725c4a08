//! Live steering service: one simulation loop steps a policy in real time
//! and fans frames out to WebSocket clients, which may change the
//! preference, reset, pause, resume or change the pacing.

pub mod protocol;
pub mod server;
pub mod session;

pub use protocol::{decode_frame, encode_error, encode_frame, parse_command, ClientCommand, ProtocolError, StateFrame};
pub use server::{ServeError, ServeOptions, SteerServer};
pub use session::Session;
