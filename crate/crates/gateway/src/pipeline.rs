//! Per-frame processing shared by the HTTP service and `safegate simulate`.

use std::collections::HashMap;
use std::sync::Arc;

use parking_lot::{Mutex, RwLock};
use serde::{Deserialize, Serialize};

use safegate_core::change::{detect_changes, ChangeConfig};
use safegate_core::guidance::{face_position, FaceBox, PositionLabel};
use safegate_core::illumination::{assess_lighting, normalize_illumination, LightingCondition};
use safegate_core::imaging::{BBox, Frame};
use safegate_core::messaging::{
    compose_message, Channel, ComposeOptions, DeliveryStatus, Dispatcher, FileOutbox, NotificationEvent,
    OutboxAdapter, Throttle, ThrottleDecision, POOR_LIGHTING_MESSAGE,
};
use safegate_core::perception::{
    enroll, Describer, DetectionContext, FrameManifest, PersonInfo, PersonObservation, ProfileModel,
};

use crate::config::GatewayConfig;
use crate::error::{GatewayError, Result};
use crate::store::{ProfileEntry, Store, StoredEvent};

/// Fallback recipient when neither config nor profiles name one.
pub const DEFAULT_RECIPIENT: &str = "resident";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct NotificationOutcome {
    pub message: String,
    pub decision: ThrottleDecision,
    pub status: DeliveryStatus,
    pub event_id: u64,
}

/// What happened to one ingested frame.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FrameReport {
    pub camera_id: String,
    pub timestamp_ms: u64,
    pub has_activity: bool,
    pub regions: usize,
    pub lighting: LightingCondition,
    pub observations: Vec<PersonObservation>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub recorded: Option<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub notification: Option<NotificationOutcome>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub advisory: Option<NotificationOutcome>,
    /// Perception failure; the frame is still recorded.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub error: Option<String>,
}

#[derive(Debug, Default)]
struct CameraState {
    prev: Option<Frame>,
}

/// Enrollment image with an optional face box from the client's detector.
#[derive(Debug, Clone)]
pub struct EnrollImage {
    pub frame: Frame,
    pub face: Option<BBox>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrollOutcome {
    pub person_id: String,
    pub model_version: u64,
    pub accepted: usize,
    /// Guidance label per submitted image (`None` for pre-cropped faces).
    pub labels: Vec<Option<String>>,
}

#[derive(Debug, thiserror::Error)]
pub enum EnrollError {
    #[error("no usable face in {} image(s)", labels.len())]
    NoUsableFace { labels: Vec<Option<String>> },
    #[error(transparent)]
    Other(#[from] GatewayError),
}

pub struct Engine {
    change: ChangeConfig,
    compose: ComposeOptions,
    gap_ms: u64,
    recipient: Option<String>,
    store: Arc<Store>,
    model: RwLock<Arc<ProfileModel>>,
    enroll_lock: Mutex<()>,
    describer: Describer,
    dispatcher: Dispatcher,
    throttle: Mutex<Throttle>,
    cameras: Mutex<HashMap<String, Arc<Mutex<CameraState>>>>,
}

impl std::fmt::Debug for Engine {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Engine")
            .field("change", &self.change)
            .field("store", &self.store.root())
            .finish_non_exhaustive()
    }
}

pub struct EngineBuilder {
    config: GatewayConfig,
    describer: Describer,
    outbox: Option<Arc<dyn OutboxAdapter>>,
}

impl EngineBuilder {
    pub fn describer(mut self, describer: Describer) -> Self {
        self.describer = describer;
        self
    }

    /// Deliver through `adapter` instead of the configured outbox directory.
    pub fn outbox(mut self, adapter: Arc<dyn OutboxAdapter>) -> Self {
        self.outbox = Some(adapter);
        self
    }

    pub fn build(self) -> Result<Engine> {
        let c = &self.config;
        let store = Arc::new(Store::open(&c.store_dir)?);
        let model = store.load_latest_model()?.unwrap_or_default();
        let outbox = self
            .outbox
            .unwrap_or_else(|| Arc::new(FileOutbox::new(&c.outbox_dir)));
        let dispatcher = Dispatcher::new()
            .with_adapter(Channel::Mms, outbox.clone())
            .with_adapter(Channel::Call, outbox);
        Ok(Engine {
            change: c.change_config()?,
            compose: c.compose_options(),
            gap_ms: c.segment_gap_s * 1000,
            recipient: c.recipient.clone(),
            store,
            model: RwLock::new(Arc::new(model)),
            enroll_lock: Mutex::new(()),
            describer: self.describer,
            dispatcher,
            throttle: Mutex::new(Throttle::new(c.notify_interval_s * 1000)),
            cameras: Mutex::new(HashMap::new()),
        })
    }
}

/// Key under which lighting advisories are throttled, apart from activity.
fn advisory_key(camera: &str) -> String {
    format!("{camera}#lighting")
}

impl Engine {
    pub fn builder(config: GatewayConfig) -> EngineBuilder {
        EngineBuilder {
            config,
            describer: Describer::default(),
            outbox: None,
        }
    }

    pub fn store(&self) -> &Arc<Store> {
        &self.store
    }

    pub fn change_config(&self) -> &ChangeConfig {
        &self.change
    }

    /// The current model; never a half-trained one.
    pub fn model(&self) -> Arc<ProfileModel> {
        self.model.read().clone()
    }

    fn recipient(&self) -> String {
        if let Some(r) = &self.recipient {
            return r.clone();
        }
        let contacts: Vec<String> = self
            .store
            .profiles()
            .into_iter()
            .map(|p| p.contact)
            .filter(|c| !c.is_empty())
            .collect();
        if contacts.is_empty() {
            DEFAULT_RECIPIENT.to_string()
        } else {
            contacts.join(",")
        }
    }

    fn camera(&self, id: &str) -> Arc<Mutex<CameraState>> {
        self.cameras.lock().entry(id.to_string()).or_default().clone()
    }

    /// Throttle, dispatch and log one composed message.
    fn notify(&self, throttle_key: &str, camera: &str, message: String, snapshot: &str, ts_ms: u64, channel: Channel) -> Result<NotificationOutcome> {
        let decision = self.throttle.lock().check(throttle_key, ts_ms);
        let mut event = NotificationEvent::new(camera, message.clone(), snapshot, ts_ms);
        event.channel = channel;
        let (status, recipient) = match decision {
            ThrottleDecision::Suppress => (DeliveryStatus::Suppressed, None),
            ThrottleDecision::Dispatch => {
                let recipient = self.recipient();
                let record = self.dispatcher.dispatch(&event, &recipient)?;
                if let Some(err) = &record.error {
                    tracing::warn!(camera, error = %err, "notification delivery failed");
                }
                (record.status, Some(recipient))
            }
        };
        let stored = self.store.add_event(StoredEvent {
            id: 0,
            camera_id: camera.to_string(),
            message: message.clone(),
            snapshot_ref: snapshot.to_string(),
            created_at: ts_ms,
            channel,
            status,
            recipient,
        })?;
        Ok(NotificationOutcome {
            message,
            decision,
            status,
            event_id: stored.id,
        })
    }

    /// Run one frame through change detection, description, messaging and
    /// recording. Frames of one camera must arrive in order; different
    /// cameras may be processed concurrently.
    pub fn process_frame(
        &self,
        camera_id: &str,
        ts_ms: u64,
        frame: Frame,
        manifest: Option<&FrameManifest>,
    ) -> Result<FrameReport> {
        let cam = self.camera(camera_id);
        let mut cam = cam.lock();

        let lighting = assess_lighting(&frame).condition;
        let mut report = FrameReport {
            camera_id: camera_id.to_string(),
            timestamp_ms: ts_ms,
            has_activity: false,
            regions: 0,
            lighting,
            observations: Vec::new(),
            recorded: None,
            notification: None,
            advisory: None,
            error: None,
        };
        if lighting == LightingCondition::Poor {
            report.advisory = Some(self.notify(
                &advisory_key(camera_id),
                camera_id,
                POOR_LIGHTING_MESSAGE.to_string(),
                "",
                ts_ms,
                Channel::Mms,
            )?);
        }

        let Some(prev) = cam.prev.replace(frame.clone()) else {
            return Ok(report);
        };
        let change = match detect_changes(&prev, &frame, &self.change) {
            Ok(c) => c,
            Err(e @ safegate_core::Error::DimensionMismatch { .. }) => {
                tracing::warn!(camera_id, error = %e, "frame size changed; starting over");
                return Ok(report);
            }
            Err(e) => return Err(e.into()),
        };
        report.has_activity = change.has_activity;
        report.regions = change.regions.len();
        if !change.has_activity {
            self.store.close_stale_segment(camera_id, ts_ms, self.gap_ms)?;
            return Ok(report);
        }

        let snapshot = self.store.record_frame(camera_id, ts_ms, &frame, self.gap_ms)?;
        report.recorded = Some(snapshot.clone());

        let scene = if lighting == LightingCondition::Poor && frame.channels() == 3 {
            normalize_illumination(&frame)?
        } else {
            frame
        };
        let ctx = DetectionContext {
            manifest,
            regions: &change.regions,
            area_threshold: self.change.area_threshold,
        };
        let model = self.model();
        match self.describer.describe_scene(&scene, &model, &ctx) {
            Ok(obs) => report.observations = obs,
            Err(e) => {
                tracing::warn!(camera_id, error = %e, "description failed");
                report.error = Some(e.to_string());
            }
        }
        if !report.observations.is_empty() {
            let message = compose_message(&report.observations, &self.compose)?;
            report.notification = Some(self.notify(camera_id, camera_id, message, &snapshot, ts_ms, Channel::Mms)?);
        }
        Ok(report)
    }

    /// Add face images for `name` and retrain.
    ///
    /// Images with a face box must pass the capture guidance (centred, not
    /// small); images without one are taken as already-cropped faces.
    pub fn enroll(&self, name: &str, contact: &str, images: &[EnrollImage], now_ms: u64) -> Result<EnrollOutcome, EnrollError> {
        if name.trim().is_empty() {
            return Err(GatewayError::BadRequest("name is empty".into()).into());
        }
        let mut labels = Vec::with_capacity(images.len());
        let mut crops = Vec::new();
        for img in images {
            match img.face {
                None => {
                    labels.push(None);
                    crops.push(img.frame.clone());
                }
                Some(b) => {
                    let label = FaceBox::try_from(b)
                        .and_then(|fb| face_position(img.frame.width().into(), img.frame.height().into(), fb));
                    match label {
                        Ok(l) => {
                            labels.push(Some(l.to_string()));
                            if l == PositionLabel::Center && b.fits_in(img.frame.width(), img.frame.height()) {
                                crops.push(img.frame.crop(b).map_err(GatewayError::from)?);
                            }
                        }
                        Err(e) => labels.push(Some(format!("invalid face box: {e}"))),
                    }
                }
            }
        }
        if crops.is_empty() {
            return Err(EnrollError::NoUsableFace { labels });
        }

        let _guard = self.enroll_lock.lock();
        let entry: ProfileEntry = self.store.add_profile_images(name, contact, &crops, now_ms)?;
        let info = PersonInfo {
            id: entry.person_id.clone(),
            name: entry.name.clone(),
            contact: entry.contact.clone(),
        };
        let current = self.model();
        let next = enroll(&info, &crops, &current).map_err(GatewayError::from)?;
        let version = self.store.save_model(&next, now_ms)?;
        *self.model.write() = Arc::new(next);
        Ok(EnrollOutcome {
            person_id: entry.person_id,
            model_version: version,
            accepted: crops.len(),
            labels,
        })
    }

    /// Stub for the emergency-call action: writes a call record.
    pub fn emergency_call(&self, camera_id: &str, message: &str, ts_ms: u64) -> Result<NotificationOutcome> {
        let mut event = NotificationEvent::new(camera_id, message, "", ts_ms);
        event.channel = Channel::Call;
        let recipient = "emergency-services".to_string();
        let record = self.dispatcher.dispatch(&event, &recipient)?;
        let stored = self.store.add_event(StoredEvent {
            id: 0,
            camera_id: camera_id.to_string(),
            message: message.to_string(),
            snapshot_ref: String::new(),
            created_at: ts_ms,
            channel: Channel::Call,
            status: record.status,
            recipient: Some(recipient),
        })?;
        Ok(NotificationOutcome {
            message: message.to_string(),
            decision: ThrottleDecision::Dispatch,
            status: record.status,
            event_id: stored.id,
        })
    }
}
