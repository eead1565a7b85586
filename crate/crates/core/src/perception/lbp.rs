use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{to_grayscale, Frame};

/// Side of the square crop that features are computed on.
pub const CROP_SIZE: u32 = 96;
/// Side of one histogram cell.
pub const CELL_SIZE: u32 = 16;
pub const GRID: u32 = CROP_SIZE / CELL_SIZE;
pub const FEATURE_LEN: usize = (GRID * GRID) as usize * 256;
/// Smallest crop side accepted before resampling.
pub const MIN_CROP_SIDE: u32 = 8;

const CHI_EPS: f64 = 1e-10;

// Clockwise from the top-left neighbour; neighbour i sets bit i.
const NEIGHBOURS: [(isize, isize); 8] = [
    (-1, -1),
    (0, -1),
    (1, -1),
    (1, 0),
    (1, 1),
    (0, 1),
    (-1, 1),
    (-1, 0),
];

/// Concatenated per-cell LBP histograms, each cell L1-normalized.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureVector {
    values: Vec<f32>,
}

impl FeatureVector {
    pub fn from_values(values: Vec<f32>) -> Result<Self> {
        if values.len() != FEATURE_LEN {
            return Err(Error::InvalidParameter(format!(
                "feature vector has {} values, expected {FEATURE_LEN}",
                values.len()
            )));
        }
        if values.iter().any(|v| !v.is_finite() || *v < 0.0) {
            return Err(Error::InvalidParameter("feature values must be finite and >= 0".into()));
        }
        Ok(Self { values })
    }

    pub fn values(&self) -> &[f32] {
        &self.values
    }

    pub fn cell(&self, index: usize) -> &[f32] {
        &self.values[index * 256..(index + 1) * 256]
    }

    /// Element-wise mean of `vectors`.
    pub fn mean<'a>(vectors: impl IntoIterator<Item = &'a FeatureVector>) -> Option<Self> {
        let mut acc = vec![0f64; FEATURE_LEN];
        let mut n = 0usize;
        for v in vectors {
            for (a, &x) in acc.iter_mut().zip(&v.values) {
                *a += f64::from(x);
            }
            n += 1;
        }
        if n == 0 {
            return None;
        }
        Some(Self {
            values: acc.into_iter().map(|a| (a / n as f64) as f32).collect(),
        })
    }

    pub fn scaled(&self, k: f32) -> Self {
        Self {
            values: self.values.iter().map(|v| v * k).collect(),
        }
    }
}

/// Chi-square histogram distance `sum (a-b)^2 / (a+b+eps)`.
pub fn chi_square(a: &FeatureVector, b: &FeatureVector) -> f64 {
    a.values
        .iter()
        .zip(&b.values)
        .map(|(&x, &y)| {
            let (x, y) = (f64::from(x), f64::from(y));
            let d = x - y;
            d * d / (x + y + CHI_EPS)
        })
        .sum()
}

/// LBP code of every interior pixel of a single-channel frame; border
/// pixels are `None`.
pub fn lbp_codes(gray: &Frame) -> Vec<Option<u8>> {
    let (w, h) = (gray.width() as isize, gray.height() as isize);
    let src = gray.data();
    let mut codes = vec![None; src.len()];
    for y in 1..h - 1 {
        for x in 1..w - 1 {
            let center = src[(y * w + x) as usize];
            let mut code = 0u8;
            for (bit, (dx, dy)) in NEIGHBOURS.iter().enumerate() {
                if src[((y + dy) * w + x + dx) as usize] >= center {
                    code |= 1 << bit;
                }
            }
            codes[(y * w + x) as usize] = Some(code);
        }
    }
    codes
}

/// LBP descriptor of a face crop: grayscale, resample to 96×96, then a 6×6
/// grid of 256-bin code histograms.
pub fn extract_lbp_histogram(face_crop: &Frame) -> Result<FeatureVector> {
    if face_crop.width() < MIN_CROP_SIDE || face_crop.height() < MIN_CROP_SIDE {
        return Err(Error::InvalidParameter(format!(
            "face crop {}x{} is smaller than {MIN_CROP_SIDE}x{MIN_CROP_SIDE}",
            face_crop.width(),
            face_crop.height()
        )));
    }
    let gray = to_grayscale(face_crop).resize(CROP_SIZE, CROP_SIZE)?;
    let codes = lbp_codes(&gray);

    let mut counts = vec![0u32; FEATURE_LEN];
    for y in 0..CROP_SIZE {
        for x in 0..CROP_SIZE {
            if let Some(code) = codes[(y * CROP_SIZE + x) as usize] {
                let cell = ((y / CELL_SIZE) * GRID + x / CELL_SIZE) as usize;
                counts[cell * 256 + code as usize] += 1;
            }
        }
    }
    let mut values = vec![0f32; FEATURE_LEN];
    for (cell_counts, cell_values) in counts.chunks_exact(256).zip(values.chunks_exact_mut(256)) {
        let total: u32 = cell_counts.iter().sum();
        if total == 0 {
            continue;
        }
        for (c, v) in cell_counts.iter().zip(cell_values.iter_mut()) {
            *v = *c as f32 / total as f32;
        }
    }
    Ok(FeatureVector { values })
}
