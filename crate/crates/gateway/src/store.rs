//! On-disk state under `store_dir`.
//!
//! ```text
//! safegate.json              metadata (profiles, model versions, events, segments)
//! profiles/<id>/<nnn>.png    enrollment face crops
//! models/model-<v>.json      trained models, newest three kept
//! recordings/<camera>/<ts>.png
//! ```
//!
//! Metadata is rewritten atomically (temp file + rename) after every change.

use std::path::{Path, PathBuf};

use parking_lot::Mutex;
use serde::{Deserialize, Serialize};

use safegate_core::imaging::{write_png, Frame};
use safegate_core::messaging::{Channel, DeliveryStatus};
use safegate_core::perception::ProfileModel;

use crate::error::{GatewayError, Result};

pub const SCHEMA_VERSION: u32 = 1;
pub const KEPT_MODEL_VERSIONS: usize = 3;
const META_FILE: &str = "safegate.json";

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ProfileEntry {
    pub person_id: String,
    pub name: String,
    pub contact: String,
    /// Paths relative to the store root.
    pub images: Vec<String>,
    pub enrolled_at: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ModelVersion {
    pub version: u64,
    pub created_at: u64,
    pub path: String,
    pub persons: usize,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoredEvent {
    pub id: u64,
    pub camera_id: String,
    pub message: String,
    pub snapshot_ref: String,
    pub created_at: u64,
    pub channel: Channel,
    pub status: DeliveryStatus,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recipient: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct RecordingSegment {
    pub id: u64,
    pub camera_id: String,
    pub start_ms: u64,
    pub end_ms: u64,
    /// Activity frames only, relative to the store root.
    pub frames: Vec<String>,
    pub snapshot: String,
    pub closed: bool,
}

impl RecordingSegment {
    pub fn overlaps(&self, from_ms: u64, to_ms: u64) -> bool {
        self.start_ms < to_ms && self.end_ms >= from_ms
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StoreData {
    pub schema: u32,
    pub profiles: Vec<ProfileEntry>,
    pub models: Vec<ModelVersion>,
    pub model_version: u64,
    pub events: Vec<StoredEvent>,
    pub recordings: Vec<RecordingSegment>,
    next_id: u64,
}

impl Default for StoreData {
    fn default() -> Self {
        Self {
            schema: SCHEMA_VERSION,
            profiles: Vec::new(),
            models: Vec::new(),
            model_version: 0,
            events: Vec::new(),
            recordings: Vec::new(),
            next_id: 1,
        }
    }
}

impl StoreData {
    fn take_id(&mut self) -> u64 {
        let id = self.next_id;
        self.next_id += 1;
        id
    }
}

#[derive(Debug)]
pub struct Store {
    root: PathBuf,
    data: Mutex<StoreData>,
}

fn write_atomic(path: &Path, bytes: &[u8]) -> Result<()> {
    let tmp = path.with_extension("json.tmp");
    std::fs::write(&tmp, bytes)?;
    std::fs::rename(&tmp, path)?;
    Ok(())
}

fn file_safe(s: &str) -> String {
    s.chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

impl Store {
    pub fn open(root: impl Into<PathBuf>) -> Result<Self> {
        let root = root.into();
        std::fs::create_dir_all(&root)?;
        let meta = root.join(META_FILE);
        let data = if meta.exists() {
            let d: StoreData = serde_json::from_slice(&std::fs::read(&meta)?)?;
            if d.schema != SCHEMA_VERSION {
                return Err(GatewayError::Store(format!("unsupported schema {}", d.schema)));
            }
            d
        } else {
            StoreData::default()
        };
        Ok(Self {
            root,
            data: Mutex::new(data),
        })
    }

    pub fn root(&self) -> &Path {
        &self.root
    }

    pub fn path_of(&self, rel: &str) -> PathBuf {
        self.root.join(rel)
    }

    pub fn snapshot(&self) -> StoreData {
        self.data.lock().clone()
    }

    fn persist(&self, data: &StoreData) -> Result<()> {
        write_atomic(&self.root.join(META_FILE), &serde_json::to_vec_pretty(data)?)
    }

    /// Apply `f` and persist the result; on write failure the change is
    /// rolled back.
    fn update<T>(&self, f: impl FnOnce(&mut StoreData) -> Result<T>) -> Result<T> {
        let mut guard = self.data.lock();
        let mut next = guard.clone();
        let out = f(&mut next)?;
        self.persist(&next)?;
        *guard = next;
        Ok(out)
    }

    // --- profiles -------------------------------------------------------

    pub fn profiles(&self) -> Vec<ProfileEntry> {
        self.data.lock().profiles.clone()
    }

    pub fn profile_by_name(&self, name: &str) -> Option<ProfileEntry> {
        self.data.lock().profiles.iter().find(|p| p.name == name).cloned()
    }

    /// Save crops under the person's directory and upsert the metadata.
    /// The same name always maps to the same id.
    pub fn add_profile_images(&self, name: &str, contact: &str, crops: &[Frame], now_ms: u64) -> Result<ProfileEntry> {
        self.update(|d| {
            let idx = match d.profiles.iter().position(|p| p.name == name) {
                Some(i) => i,
                None => {
                    let id = format!("p{:04}", d.take_id());
                    d.profiles.push(ProfileEntry {
                        person_id: id,
                        name: name.to_string(),
                        contact: contact.to_string(),
                        images: Vec::new(),
                        enrolled_at: now_ms,
                    });
                    d.profiles.len() - 1
                }
            };
            let entry = &mut d.profiles[idx];
            if !contact.is_empty() {
                entry.contact = contact.to_string();
            }
            entry.enrolled_at = now_ms;
            let dir = format!("profiles/{}", file_safe(&entry.person_id));
            std::fs::create_dir_all(self.root.join(&dir))?;
            for crop in crops {
                let rel = format!("{dir}/{:03}.png", entry.images.len());
                write_png(crop, self.root.join(&rel))?;
                entry.images.push(rel);
            }
            Ok(entry.clone())
        })
    }

    // --- models ---------------------------------------------------------

    pub fn model_version(&self) -> u64 {
        self.data.lock().model_version
    }

    /// Persist `model` as the next version and prune old ones.
    pub fn save_model(&self, model: &ProfileModel, now_ms: u64) -> Result<u64> {
        self.update(|d| {
            let version = d.model_version + 1;
            let rel = format!("models/model-{version}.json");
            std::fs::create_dir_all(self.root.join("models"))?;
            std::fs::write(self.root.join(&rel), serde_json::to_vec(model)?)?;
            d.model_version = version;
            d.models.push(ModelVersion {
                version,
                created_at: now_ms,
                path: rel,
                persons: model.persons().len(),
            });
            while d.models.len() > KEPT_MODEL_VERSIONS {
                let old = d.models.remove(0);
                let _ = std::fs::remove_file(self.root.join(&old.path));
            }
            Ok(version)
        })
    }

    pub fn load_latest_model(&self) -> Result<Option<ProfileModel>> {
        let latest = self.data.lock().models.last().cloned();
        latest
            .map(|m| Ok(serde_json::from_slice(&std::fs::read(self.root.join(&m.path))?)?))
            .transpose()
    }

    // --- events ---------------------------------------------------------

    pub fn add_event(&self, mut event: StoredEvent) -> Result<StoredEvent> {
        self.update(|d| {
            event.id = d.take_id();
            d.events.push(event.clone());
            Ok(event)
        })
    }

    /// Events created strictly after `since`, newest first.
    pub fn events_since(&self, since: u64, limit: usize) -> Vec<StoredEvent> {
        let d = self.data.lock();
        let mut out: Vec<_> = d.events.iter().filter(|e| e.created_at > since).cloned().collect();
        out.sort_by_key(|e| std::cmp::Reverse((e.created_at, e.id)));
        out.truncate(limit);
        out
    }

    // --- recordings -----------------------------------------------------

    /// Store an activity frame, extending the camera's open segment or
    /// starting a new one when the last activity is more than `gap_ms` old.
    /// Returns the frame's store-relative path.
    pub fn record_frame(&self, camera_id: &str, ts_ms: u64, frame: &Frame, gap_ms: u64) -> Result<String> {
        self.update(|d| {
            let dir = format!("recordings/{}", file_safe(camera_id));
            std::fs::create_dir_all(self.root.join(&dir))?;
            let mut rel = format!("{dir}/{ts_ms:013}.png");
            let mut n = 1;
            while self.root.join(&rel).exists() {
                rel = format!("{dir}/{ts_ms:013}-{n}.png");
                n += 1;
            }
            write_png(frame, self.root.join(&rel))?;

            let open = d
                .recordings
                .iter_mut()
                .rev()
                .find(|s| s.camera_id == camera_id && !s.closed);
            match open {
                Some(seg) if ts_ms <= seg.end_ms.saturating_add(gap_ms) => {
                    seg.end_ms = seg.end_ms.max(ts_ms);
                    seg.frames.push(rel.clone());
                }
                other => {
                    if let Some(seg) = other {
                        seg.closed = true;
                    }
                    let id = d.take_id();
                    d.recordings.push(RecordingSegment {
                        id,
                        camera_id: camera_id.to_string(),
                        start_ms: ts_ms,
                        end_ms: ts_ms,
                        frames: vec![rel.clone()],
                        snapshot: rel.clone(),
                        closed: false,
                    });
                }
            }
            Ok(rel)
        })
    }

    /// Close the camera's open segment once `now_ms` is past its gap.
    pub fn close_stale_segment(&self, camera_id: &str, now_ms: u64, gap_ms: u64) -> Result<bool> {
        let stale = self.data.lock().recordings.iter().any(|s| {
            s.camera_id == camera_id && !s.closed && now_ms > s.end_ms.saturating_add(gap_ms)
        });
        if !stale {
            return Ok(false);
        }
        self.update(|d| {
            for s in d.recordings.iter_mut().filter(|s| s.camera_id == camera_id && !s.closed) {
                s.closed = true;
            }
            Ok(true)
        })
    }

    /// Segments overlapping `[from_ms, to_ms)`, ordered by start.
    pub fn recordings_between(&self, from_ms: u64, to_ms: u64) -> Vec<RecordingSegment> {
        let d = self.data.lock();
        let mut out: Vec<_> = d.recordings.iter().filter(|s| s.overlaps(from_ms, to_ms)).cloned().collect();
        out.sort_by_key(|s| (s.start_ms, s.id));
        out
    }

    pub fn recordings(&self) -> Vec<RecordingSegment> {
        self.data.lock().recordings.clone()
    }
}
