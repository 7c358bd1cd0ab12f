//! Local HTTP gateway that runs the literacy layer between a chat client and
//! an upstream chat-completion endpoint.

pub mod commands;
pub mod http;
pub mod metrics_file;
pub mod service;
pub mod transport;
pub mod upstream;

pub use http::router;
pub use service::{Decision, Gateway, GatewayError, Stage, TurnOutcome};
pub use transport::{RecordingTransport, ReqwestTransport, Transport};
