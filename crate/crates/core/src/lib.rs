//! Frame analysis, recognition, messaging and door control for safegate.
//!
//! Everything here is synchronous and free of I/O except PNG helpers and
//! the file outbox; the network service lives in `safegate-gateway`.

pub mod access;
pub mod change;
pub mod error;
pub mod guidance;
pub mod illumination;
pub mod imaging;
pub mod messaging;
pub mod perception;
pub mod synth;

pub use change::{detect_changes, ChangeConfig, ChangeResult, Position, Strategy};
pub use error::{Error, Result};
pub use imaging::{BBox, Frame};
