use serde::{Deserialize, Serialize};

use super::lbp::{chi_square, extract_lbp_histogram, FeatureVector};
use crate::error::{Error, Result};
use crate::imaging::Frame;

/// Name reported for faces that match no enrolled person.
pub const UNKNOWN: &str = "unknown";

/// Floor for the calibrated unknown threshold, in chi-square units.
pub const DEFAULT_UNKNOWN_THRESHOLD: f64 = 0.5;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PersonInfo {
    pub id: String,
    pub name: String,
    pub contact: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EnrolledPerson {
    pub info: PersonInfo,
    pub samples: Vec<FeatureVector>,
    pub centroid: FeatureVector,
}

/// Nearest-centroid face model over LBP descriptors.
///
/// Models are immutable values: [`enroll`] returns a new model, so readers
/// holding an `Arc<ProfileModel>` never observe a half-trained state.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ProfileModel {
    persons: Vec<EnrolledPerson>,
    unknown_threshold: f64,
}

impl Default for ProfileModel {
    fn default() -> Self {
        Self {
            persons: Vec::new(),
            unknown_threshold: DEFAULT_UNKNOWN_THRESHOLD,
        }
    }
}

impl ProfileModel {
    pub fn persons(&self) -> &[EnrolledPerson] {
        &self.persons
    }

    pub fn is_empty(&self) -> bool {
        self.persons.is_empty()
    }

    pub fn unknown_threshold(&self) -> f64 {
        self.unknown_threshold
    }

    pub fn person(&self, id: &str) -> Option<&EnrolledPerson> {
        self.persons.iter().find(|p| p.info.id == id)
    }

    pub fn find_by_name(&self, name: &str) -> Option<&EnrolledPerson> {
        self.persons.iter().find(|p| p.info.name == name)
    }

    /// Threshold = mean + 2 std of the intra-class distances, never below
    /// [`DEFAULT_UNKNOWN_THRESHOLD`].
    ///
    /// Each sample is measured against the centroid of its person's other
    /// samples. Including the sample would pull the centroid towards it and
    /// bias the threshold low; sample-to-sample distances overshoot, since a
    /// fresh capture is compared with an averaged centroid, not a single shot.
    fn recalibrate(&mut self) {
        let mut dists = Vec::new();
        for p in &self.persons {
            for i in 0..p.samples.len() {
                let others = p.samples.iter().enumerate().filter(|(j, _)| *j != i).map(|(_, v)| v);
                if let Some(rest) = FeatureVector::mean(others) {
                    dists.push(chi_square(&p.samples[i], &rest));
                }
            }
        }
        if dists.is_empty() {
            self.unknown_threshold = DEFAULT_UNKNOWN_THRESHOLD;
            return;
        }
        let n = dists.len() as f64;
        let mean = dists.iter().sum::<f64>() / n;
        let var = dists.iter().map(|d| (d - mean).powi(2)).sum::<f64>() / n;
        self.unknown_threshold = (mean + 2.0 * var.sqrt()).max(DEFAULT_UNKNOWN_THRESHOLD);
    }
}

/// Add `crops` to `person` (creating it if the id is new) and retrain.
pub fn enroll(person: &PersonInfo, crops: &[Frame], model: &ProfileModel) -> Result<ProfileModel> {
    if crops.is_empty() {
        return Err(Error::Empty("enrollment crops"));
    }
    let features = crops
        .iter()
        .map(extract_lbp_histogram)
        .collect::<Result<Vec<_>>>()?;
    enroll_features(person, features, model)
}

pub fn enroll_features(
    person: &PersonInfo,
    features: Vec<FeatureVector>,
    model: &ProfileModel,
) -> Result<ProfileModel> {
    if features.is_empty() {
        return Err(Error::Empty("enrollment crops"));
    }
    let mut next = model.clone();
    match next.persons.iter_mut().find(|p| p.info.id == person.id) {
        Some(existing) => {
            existing.info = person.clone();
            existing.samples.extend(features);
            existing.centroid = FeatureVector::mean(&existing.samples).expect("non-empty");
        }
        None => {
            let centroid = FeatureVector::mean(&features).expect("non-empty");
            next.persons.push(EnrolledPerson {
                info: person.clone(),
                samples: features,
                centroid,
            });
        }
    }
    next.recalibrate();
    Ok(next)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Recognition {
    /// Enrolled name, or [`UNKNOWN`].
    pub name: String,
    pub person_id: Option<String>,
    /// Chi-square distance to the nearest centroid.
    pub distance: f64,
}

impl Recognition {
    pub fn is_known(&self) -> bool {
        self.person_id.is_some()
    }
}

pub fn recognize_features(features: &FeatureVector, model: &ProfileModel) -> Result<Recognition> {
    let (best, distance) = model
        .persons
        .iter()
        .map(|p| (p, chi_square(features, &p.centroid)))
        .min_by(|a, b| a.1.total_cmp(&b.1))
        .ok_or(Error::Empty("profile model"))?;
    if distance > model.unknown_threshold {
        return Ok(Recognition {
            name: UNKNOWN.to_string(),
            person_id: None,
            distance,
        });
    }
    Ok(Recognition {
        name: best.info.name.clone(),
        person_id: Some(best.info.id.clone()),
        distance,
    })
}

pub fn recognize_face(crop: &Frame, model: &ProfileModel) -> Result<Recognition> {
    if model.is_empty() {
        return Err(Error::Empty("profile model"));
    }
    recognize_features(&extract_lbp_histogram(crop)?, model)
}
