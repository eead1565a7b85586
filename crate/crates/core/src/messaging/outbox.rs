use std::collections::HashMap;
use std::fmt;
use std::path::{Path, PathBuf};
use std::str::FromStr;
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Channel {
    Mms,
    Call,
}

impl Channel {
    pub fn as_str(&self) -> &'static str {
        match self {
            Channel::Mms => "mms",
            Channel::Call => "call",
        }
    }
}

impl fmt::Display for Channel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Channel {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mms" => Ok(Channel::Mms),
            "call" => Ok(Channel::Call),
            other => Err(Error::UnknownChannel(other.to_string())),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DeliveryStatus {
    Pending,
    Sent,
    Suppressed,
    Failed,
}

/// A composed message waiting to be (or already) delivered.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationEvent {
    pub camera_id: String,
    pub message: String,
    /// Key of the recorded frame the message describes.
    pub snapshot_ref: String,
    pub created_at: u64,
    pub channel: Channel,
    pub status: DeliveryStatus,
}

impl NotificationEvent {
    pub fn new(camera_id: impl Into<String>, message: impl Into<String>, snapshot_ref: impl Into<String>, created_at: u64) -> Self {
        Self {
            camera_id: camera_id.into(),
            message: message.into(),
            snapshot_ref: snapshot_ref.into(),
            created_at,
            channel: Channel::Mms,
            status: DeliveryStatus::Pending,
        }
    }
}

/// What an adapter hands to the carrier: the message doubles as the
/// transcript of the attached image.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct OutboxRecord {
    pub channel: Channel,
    pub recipient: String,
    pub subject: String,
    pub attachment: String,
    pub created_at: u64,
    pub camera_id: String,
    pub status: DeliveryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

/// Delivery backend for one channel.
pub trait OutboxAdapter: Send + Sync {
    fn deliver(&self, record: &OutboxRecord) -> Result<()>;
}

/// Writes each record to `<dir>/<created_at>-<camera>.json`.
#[derive(Debug, Clone)]
pub struct FileOutbox {
    dir: PathBuf,
}

impl FileOutbox {
    pub fn new(dir: impl Into<PathBuf>) -> Self {
        Self { dir: dir.into() }
    }

    pub fn dir(&self) -> &Path {
        &self.dir
    }

    /// Records currently in the outbox, oldest first.
    pub fn records(&self) -> Result<Vec<OutboxRecord>> {
        let mut paths: Vec<_> = match std::fs::read_dir(&self.dir) {
            Ok(rd) => rd
                .filter_map(|e| e.ok().map(|e| e.path()))
                .filter(|p| p.extension().is_some_and(|x| x == "json"))
                .collect(),
            Err(e) if e.kind() == std::io::ErrorKind::NotFound => return Ok(Vec::new()),
            Err(e) => return Err(e.into()),
        };
        paths.sort();
        paths
            .iter()
            .map(|p| Ok(serde_json::from_slice(&std::fs::read(p)?)?))
            .collect()
    }
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

impl OutboxAdapter for FileOutbox {
    fn deliver(&self, record: &OutboxRecord) -> Result<()> {
        std::fs::create_dir_all(&self.dir)?;
        let stem = format!("{:013}-{}", record.created_at, file_safe(&record.camera_id));
        let mut path = self.dir.join(format!("{stem}.json"));
        let mut n = 1;
        while path.exists() {
            path = self.dir.join(format!("{stem}-{n}.json"));
            n += 1;
        }
        let mut sent = record.clone();
        sent.status = DeliveryStatus::Sent;
        std::fs::write(&path, serde_json::to_vec_pretty(&sent)?)?;
        Ok(())
    }
}

/// Keeps delivered records in memory.
#[derive(Debug, Clone, Default)]
pub struct MemoryOutbox {
    records: Arc<Mutex<Vec<OutboxRecord>>>,
}

impl MemoryOutbox {
    pub fn records(&self) -> Vec<OutboxRecord> {
        self.records.lock().unwrap_or_else(|e| e.into_inner()).clone()
    }
}

impl OutboxAdapter for MemoryOutbox {
    fn deliver(&self, record: &OutboxRecord) -> Result<()> {
        let mut sent = record.clone();
        sent.status = DeliveryStatus::Sent;
        self.records.lock().unwrap_or_else(|e| e.into_inner()).push(sent);
        Ok(())
    }
}

/// Adapter that always fails; stands in for an unreachable carrier.
#[derive(Debug, Clone, Default)]
pub struct FailingOutbox {
    pub reason: String,
}

impl OutboxAdapter for FailingOutbox {
    fn deliver(&self, _: &OutboxRecord) -> Result<()> {
        Err(Error::BackendUnavailable(self.reason.clone()))
    }
}

/// Routes events to the adapter registered for their channel.
#[derive(Clone, Default)]
pub struct Dispatcher {
    adapters: HashMap<Channel, Arc<dyn OutboxAdapter>>,
}

impl fmt::Debug for Dispatcher {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("Dispatcher")
            .field("channels", &self.adapters.keys().collect::<Vec<_>>())
            .finish()
    }
}

impl Dispatcher {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn with_adapter(mut self, channel: Channel, adapter: Arc<dyn OutboxAdapter>) -> Self {
        self.adapters.insert(channel, adapter);
        self
    }

    /// Deliver `event` to `recipient`.
    ///
    /// An unregistered channel is an error. An adapter failure is not: the
    /// returned record is marked `Failed` with the reason attached.
    pub fn dispatch(&self, event: &NotificationEvent, recipient: &str) -> Result<OutboxRecord> {
        let adapter = self
            .adapters
            .get(&event.channel)
            .ok_or_else(|| Error::UnknownChannel(event.channel.to_string()))?;
        if event.status != DeliveryStatus::Pending {
            return Err(Error::InvalidParameter(format!(
                "event is {:?}, not pending",
                event.status
            )));
        }
        let mut record = OutboxRecord {
            channel: event.channel,
            recipient: recipient.to_string(),
            subject: event.message.clone(),
            attachment: event.snapshot_ref.clone(),
            created_at: event.created_at,
            camera_id: event.camera_id.clone(),
            status: DeliveryStatus::Pending,
            error: None,
        };
        match adapter.deliver(&record) {
            Ok(()) => record.status = DeliveryStatus::Sent,
            Err(e) => {
                record.status = DeliveryStatus::Failed;
                record.error = Some(e.to_string());
            }
        }
        Ok(record)
    }
}
