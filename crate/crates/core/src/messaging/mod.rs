//! Message composition, rate limiting and delivery.

mod compose;
mod outbox;
mod throttle;

pub use compose::{
    compose_message, sentence_count, ComposeOptions, HarmfulLexicon, MessageShape,
    POOR_LIGHTING_MESSAGE,
};
pub use outbox::{
    Channel, DeliveryStatus, Dispatcher, FailingOutbox, FileOutbox, MemoryOutbox, NotificationEvent,
    OutboxAdapter, OutboxRecord,
};
pub use throttle::{Throttle, ThrottleDecision, DEFAULT_NOTIFY_INTERVAL_MS};
