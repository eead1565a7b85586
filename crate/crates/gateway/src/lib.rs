//! Network side of safegate: encrypted frame ingestion, persistence of
//! profiles, events and recordings, and the HTTP API.

pub mod config;
pub mod error;
pub mod pipeline;
pub mod server;
pub mod store;
pub mod token;

pub use config::GatewayConfig;
pub use error::{GatewayError, Result};
pub use pipeline::{Engine, FrameReport};
pub use token::{TokenError, TokenKey};
