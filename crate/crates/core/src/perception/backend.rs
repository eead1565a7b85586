//! Pluggable detectors.
//!
//! The deep person/face/attribute models of a full deployment sit behind
//! these traits. Two detector backends ship with the crate: one that echoes
//! boxes from a per-frame manifest, and one that promotes tall motion regions
//! to person boxes.

use serde::{Deserialize, Serialize};

use crate::change::ActivityRegion;
use crate::error::{Error, Result};
use crate::imaging::{BBox, Frame};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum DetectionKind {
    Person,
    Face,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionBox {
    pub kind: DetectionKind,
    pub bbox: BBox,
    pub confidence: f32,
}

/// One annotated box of a simulation manifest.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestBox {
    pub kind: DetectionKind,
    /// `[x, y, w, h]`
    pub bbox: [u32; 4],
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person: Option<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub attributes: Vec<String>,
    #[serde(default, skip_serializing_if = "Vec::is_empty")]
    pub items: Vec<String>,
}

impl ManifestBox {
    pub fn bbox(&self) -> BBox {
        let [x, y, w, h] = self.bbox;
        BBox::new(x, y, w, h)
    }
}

/// Per-frame annotations, `{"boxes": [...]}`.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct FrameManifest {
    #[serde(default)]
    pub boxes: Vec<ManifestBox>,
}

impl FrameManifest {
    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }
}

/// What a backend may look at besides the pixels.
#[derive(Debug, Clone, Copy, Default)]
pub struct DetectionContext<'a> {
    pub manifest: Option<&'a FrameManifest>,
    pub regions: &'a [ActivityRegion],
    pub area_threshold: u64,
}

pub trait DetectorBackend: Send + Sync {
    fn name(&self) -> &str;

    fn detect_persons(&self, frame: &Frame, ctx: &DetectionContext<'_>) -> Result<Vec<DetectionBox>>;

    fn detect_faces(&self, frame: &Frame, ctx: &DetectionContext<'_>) -> Result<Vec<DetectionBox>>;
}

fn clamp_box(b: BBox, frame: &Frame) -> Option<BBox> {
    let (fw, fh) = (frame.width(), frame.height());
    if b.x >= fw || b.y >= fh || b.w == 0 || b.h == 0 {
        return None;
    }
    Some(BBox::new(b.x, b.y, b.w.min(fw - b.x), b.h.min(fh - b.y)))
}

/// Echoes the boxes of the frame's manifest.
#[derive(Debug, Clone, Copy, Default)]
pub struct OracleBackend;

impl OracleBackend {
    fn boxes(&self, frame: &Frame, ctx: &DetectionContext<'_>, kind: DetectionKind) -> Vec<DetectionBox> {
        ctx.manifest
            .map(|m| {
                m.boxes
                    .iter()
                    .filter(|b| b.kind == kind)
                    .filter_map(|b| clamp_box(b.bbox(), frame))
                    .map(|bbox| DetectionBox { kind, bbox, confidence: 1.0 })
                    .collect()
            })
            .unwrap_or_default()
    }
}

impl DetectorBackend for OracleBackend {
    fn name(&self) -> &str {
        "oracle"
    }

    fn detect_persons(&self, frame: &Frame, ctx: &DetectionContext<'_>) -> Result<Vec<DetectionBox>> {
        Ok(self.boxes(frame, ctx, DetectionKind::Person))
    }

    fn detect_faces(&self, frame: &Frame, ctx: &DetectionContext<'_>) -> Result<Vec<DetectionBox>> {
        Ok(self.boxes(frame, ctx, DetectionKind::Face))
    }
}

/// Promotes activity regions shaped like a standing person.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MotionBackend {
    pub min_aspect: f64,
    pub max_aspect: f64,
    /// Region area must reach this multiple of the change area threshold.
    pub area_factor: u64,
}

impl Default for MotionBackend {
    fn default() -> Self {
        Self {
            min_aspect: 1.2,
            max_aspect: 4.0,
            area_factor: 2,
        }
    }
}

impl MotionBackend {
    pub fn promotes(&self, region: &ActivityRegion, area_threshold: u64) -> bool {
        let aspect = f64::from(region.bbox.h) / f64::from(region.bbox.w.max(1));
        (self.min_aspect..=self.max_aspect).contains(&aspect)
            && region.area >= self.area_factor * area_threshold
    }
}

impl DetectorBackend for MotionBackend {
    fn name(&self) -> &str {
        "motion"
    }

    fn detect_persons(&self, _frame: &Frame, ctx: &DetectionContext<'_>) -> Result<Vec<DetectionBox>> {
        Ok(ctx
            .regions
            .iter()
            .filter(|r| self.promotes(r, ctx.area_threshold))
            .map(|r| DetectionBox {
                kind: DetectionKind::Person,
                bbox: r.bbox,
                confidence: 0.5,
            })
            .collect())
    }

    fn detect_faces(&self, _frame: &Frame, _ctx: &DetectionContext<'_>) -> Result<Vec<DetectionBox>> {
        Ok(Vec::new())
    }
}

/// Manifest boxes first, motion heuristics when the frame has no manifest.
#[derive(Debug, Clone, Copy, Default)]
pub struct SimulationBackend {
    pub oracle: OracleBackend,
    pub motion: MotionBackend,
}

impl DetectorBackend for SimulationBackend {
    fn name(&self) -> &str {
        "simulation"
    }

    fn detect_persons(&self, frame: &Frame, ctx: &DetectionContext<'_>) -> Result<Vec<DetectionBox>> {
        match ctx.manifest {
            Some(_) => self.oracle.detect_persons(frame, ctx),
            None => self.motion.detect_persons(frame, ctx),
        }
    }

    fn detect_faces(&self, frame: &Frame, ctx: &DetectionContext<'_>) -> Result<Vec<DetectionBox>> {
        self.oracle.detect_faces(frame, ctx)
    }
}

/// Stand-in for a remote model server that is not reachable.
#[derive(Debug, Clone, Default)]
pub struct UnavailableBackend {
    pub reason: String,
}

impl DetectorBackend for UnavailableBackend {
    fn name(&self) -> &str {
        "unavailable"
    }

    fn detect_persons(&self, _: &Frame, _: &DetectionContext<'_>) -> Result<Vec<DetectionBox>> {
        Err(Error::BackendUnavailable(self.reason.clone()))
    }

    fn detect_faces(&self, _: &Frame, _: &DetectionContext<'_>) -> Result<Vec<DetectionBox>> {
        Err(Error::BackendUnavailable(self.reason.clone()))
    }
}

/// Facial attributes and carried items for a detected person.
pub trait AttributeBackend: Send + Sync {
    fn attributes(
        &self,
        frame: &Frame,
        person: &BBox,
        face: Option<&BBox>,
        ctx: &DetectionContext<'_>,
    ) -> Result<Vec<String>>;
}

fn overlap(a: &BBox, b: &BBox) -> u64 {
    let x0 = a.x.max(b.x);
    let y0 = a.y.max(b.y);
    let x1 = (a.x + a.w).min(b.x + b.w);
    let y1 = (a.y + a.h).min(b.y + b.h);
    if x1 <= x0 || y1 <= y0 {
        0
    } else {
        u64::from(x1 - x0) * u64::from(y1 - y0)
    }
}

/// Reads `attributes` then `items` from the manifest box overlapping the
/// person the most.
#[derive(Debug, Clone, Copy, Default)]
pub struct ManifestAttributes;

impl AttributeBackend for ManifestAttributes {
    fn attributes(
        &self,
        _frame: &Frame,
        person: &BBox,
        face: Option<&BBox>,
        ctx: &DetectionContext<'_>,
    ) -> Result<Vec<String>> {
        let Some(manifest) = ctx.manifest else {
            return Ok(Vec::new());
        };
        let score = |b: &ManifestBox| {
            let bb = b.bbox();
            overlap(&bb, person) + face.map_or(0, |f| overlap(&bb, f))
        };
        let best = manifest
            .boxes
            .iter()
            .filter(|b| !b.attributes.is_empty() || !b.items.is_empty())
            .map(|b| (score(b), b))
            .filter(|(s, _)| *s > 0)
            .max_by_key(|(s, _)| *s);
        Ok(best
            .map(|(_, b)| b.attributes.iter().chain(&b.items).cloned().collect())
            .unwrap_or_default())
    }
}
