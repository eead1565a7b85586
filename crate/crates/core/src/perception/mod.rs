//! Person detection, face recognition and appearance description.

pub mod backend;
mod hair;
pub mod lbp;
mod profile;

use std::sync::Arc;

use serde::{Deserialize, Serialize};

pub use backend::{
    AttributeBackend, DetectionBox, DetectionContext, DetectionKind, DetectorBackend,
    FrameManifest, ManifestAttributes, ManifestBox, MotionBackend, OracleBackend,
    SimulationBackend, UnavailableBackend,
};
pub use hair::{classify_hair_color, HairColor, HairColorRule};
pub use lbp::{chi_square, extract_lbp_histogram, FeatureVector};
pub use profile::{
    enroll, enroll_features, recognize_face, recognize_features, EnrolledPerson, PersonInfo,
    ProfileModel, Recognition, DEFAULT_UNKNOWN_THRESHOLD, UNKNOWN,
};

use crate::change::Position;
use crate::error::Result;
use crate::imaging::{BBox, Frame};

/// Who was seen, where, and what they look like.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PersonObservation {
    /// Enrolled name or `"unknown"`; never empty.
    pub name: String,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub person_id: Option<String>,
    pub position: Position,
    pub desc_words: Vec<String>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub distance: Option<f64>,
}

impl PersonObservation {
    pub fn unknown(position: Position, desc_words: Vec<String>) -> Self {
        Self {
            name: UNKNOWN.to_string(),
            person_id: None,
            position,
            desc_words,
            distance: None,
        }
    }

    pub fn is_known(&self) -> bool {
        self.person_id.is_some()
    }
}

/// Top fifth of a face box, where a frontal detector's box meets the hair.
pub fn head_patch(face: &BBox) -> BBox {
    BBox::new(face.x, face.y, face.w, (face.h / 5).max(1))
}

/// Assemble one observation. `attributes` are the words reported by the
/// attribute backend; a hair word is classified from the face box when the
/// backend supplied none.
pub fn describe_person(
    frame: &Frame,
    person_box: &BBox,
    face_box: Option<&BBox>,
    model: &ProfileModel,
    rule: &HairColorRule,
    attributes: &[String],
) -> Result<PersonObservation> {
    let position = Position::of(person_box, frame.width());
    let mut desc_words: Vec<String> = attributes.to_vec();

    let Some(face) = face_box else {
        return Ok(PersonObservation::unknown(position, desc_words));
    };
    let crop = frame.crop(*face)?;

    if !desc_words.iter().any(|w| w.ends_with(" hair")) {
        let patch = frame.crop(head_patch(face))?;
        desc_words.insert(0, classify_hair_color(&patch, rule).word());
    }

    if model.is_empty() {
        return Ok(PersonObservation::unknown(position, desc_words));
    }
    let recognition = recognize_face(&crop, model)?;
    Ok(PersonObservation {
        name: recognition.name,
        person_id: recognition.person_id,
        position,
        desc_words,
        distance: Some(recognition.distance),
    })
}

/// Detector and attribute backends plus the hair rule.
#[derive(Clone)]
pub struct Describer {
    pub detector: Arc<dyn DetectorBackend>,
    pub attributes: Arc<dyn AttributeBackend>,
    pub hair_rule: HairColorRule,
}

impl Default for Describer {
    fn default() -> Self {
        Self {
            detector: Arc::new(SimulationBackend::default()),
            attributes: Arc::new(ManifestAttributes),
            hair_rule: HairColorRule::default(),
        }
    }
}

impl std::fmt::Debug for Describer {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Describer")
            .field("detector", &self.detector.name())
            .field("hair_rule", &self.hair_rule)
            .finish_non_exhaustive()
    }
}

fn center_inside(inner: &BBox, outer: &BBox) -> bool {
    let cx = inner.x + inner.w / 2;
    let cy = inner.y + inner.h / 2;
    outer.contains(cx, cy)
}

impl Describer {
    /// Observations for every person in the frame, ordered left to right.
    ///
    /// Faces are attached to the person box containing their centre; a face
    /// with no enclosing person box stands for a person on its own.
    pub fn describe_scene(
        &self,
        frame: &Frame,
        model: &ProfileModel,
        ctx: &DetectionContext<'_>,
    ) -> Result<Vec<PersonObservation>> {
        let persons = self.detector.detect_persons(frame, ctx)?;
        let faces = self.detector.detect_faces(frame, ctx)?;

        let mut claimed = vec![false; faces.len()];
        let mut pairs: Vec<(BBox, Option<BBox>)> = Vec::new();
        for p in &persons {
            let face = faces
                .iter()
                .enumerate()
                .find(|(i, f)| !claimed[*i] && center_inside(&f.bbox, &p.bbox));
            if let Some((i, f)) = face {
                claimed[i] = true;
                pairs.push((p.bbox, Some(f.bbox)));
            } else {
                pairs.push((p.bbox, None));
            }
        }
        for (f, _) in faces.iter().zip(&claimed).filter(|(_, c)| !**c) {
            pairs.push((f.bbox, Some(f.bbox)));
        }
        pairs.sort_by_key(|(b, _)| (b.x, b.y));

        pairs
            .iter()
            .map(|(person, face)| {
                let words = self.attributes.attributes(frame, person, face.as_ref(), ctx)?;
                describe_person(frame, person, face.as_ref(), model, &self.hair_rule, &words)
            })
            .collect()
    }
}
