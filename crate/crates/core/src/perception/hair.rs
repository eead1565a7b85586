use std::fmt;

use serde::{Deserialize, Serialize};

use crate::imaging::{rgb_to_hsv, Frame, Histogram256, Hsv};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum HairColor {
    Black,
    Brown,
    Blond,
    Gray,
}

impl HairColor {
    pub fn as_str(&self) -> &'static str {
        match self {
            HairColor::Black => "black",
            HairColor::Brown => "brown",
            HairColor::Blond => "blond",
            HairColor::Gray => "gray",
        }
    }

    /// Description word, e.g. `"gray hair"`.
    pub fn word(&self) -> String {
        format!("{} hair", self.as_str())
    }
}

impl fmt::Display for HairColor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Thresholds for [`classify_hair_color`]. HSV bounds are inclusive with hue
/// in half-degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct HairColorRule {
    pub brown_lo: [u8; 3],
    pub brown_hi: [u8; 3],
    pub blond_lo: [u8; 3],
    pub blond_hi: [u8; 3],
    /// Fraction of patch pixels that must fall inside a chroma range.
    pub pixel_fraction: f64,
    /// Brightness bins `0..black_bins` count as dark.
    pub black_bins: u16,
    pub black_fraction: f64,
}

impl Default for HairColorRule {
    fn default() -> Self {
        Self {
            brown_lo: [10, 100, 20],
            brown_hi: [20, 255, 200],
            blond_lo: [8, 15, 50],
            blond_hi: [20, 240, 230],
            pixel_fraction: 0.60,
            black_bins: 100,
            black_fraction: 0.50,
        }
    }
}

fn hsv(v: [u8; 3]) -> Hsv {
    Hsv { h: v[0], s: v[1], v: v[2] }
}

/// Black, then brown, then blond, falling back to gray.
///
/// The brightness histogram is taken over the HSV value channel.
pub fn classify_hair_color(head_patch: &Frame, rule: &HairColorRule) -> HairColor {
    let pixels = rgb_to_hsv(head_patch);
    let n = pixels.len() as f64;
    let value_hist = Histogram256::from_samples(pixels.iter().map(|p| &p.v));
    let dark = value_hist.bins[..usize::from(rule.black_bins).min(256)]
        .iter()
        .sum::<u64>() as f64;
    if dark / n >= rule.black_fraction {
        return HairColor::Black;
    }
    let share = |lo: [u8; 3], hi: [u8; 3]| {
        pixels.iter().filter(|p| p.within(hsv(lo), hsv(hi))).count() as f64 / n
    };
    if share(rule.brown_lo, rule.brown_hi) >= rule.pixel_fraction {
        HairColor::Brown
    } else if share(rule.blond_lo, rule.blond_hi) >= rule.pixel_fraction {
        HairColor::Blond
    } else {
        HairColor::Gray
    }
}
