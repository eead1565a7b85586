//! Lighting assessment and non-uniform illumination correction.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{
    intensity_histogram, lab_to_rgb, lightness_channel, require_gray, rgb_to_lab, Frame,
    Histogram256,
};

/// Histogram bins treated as "dark" (inclusive).
pub const DARK_BINS: std::ops::RangeInclusive<u8> = 0..=74;
/// Histogram bins treated as "over-exposed" (inclusive).
pub const BRIGHT_BINS: std::ops::RangeInclusive<u8> = 181..=255;
/// Dark-pixel fraction at which lighting is reported as poor.
pub const POOR_LIGHT_FRACTION: f64 = 0.75;

pub const GAMMA_DARK: f64 = 1.5;
pub const GAMMA_OVEREXPOSED: f64 = 0.7;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum LightingCondition {
    Good,
    Poor,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LightingAssessment {
    pub condition: LightingCondition,
    pub dark_fraction: f64,
}

pub fn assess_lighting(frame: &Frame) -> LightingAssessment {
    let dark_fraction = intensity_histogram(frame).fraction_in(DARK_BINS);
    let condition = if dark_fraction >= POOR_LIGHT_FRACTION {
        LightingCondition::Poor
    } else {
        LightingCondition::Good
    };
    LightingAssessment {
        condition,
        dark_fraction,
    }
}

/// Exponent of the power-law transform `O = I^(1/gamma)` on normalized
/// intensities. Values above 1 brighten, below 1 darken.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GammaParams {
    gamma: f64,
}

impl GammaParams {
    pub fn new(gamma: f64) -> Result<Self> {
        if !(gamma.is_finite() && gamma > 0.0) {
            return Err(Error::InvalidParameter(format!("gamma must be > 0, got {gamma}")));
        }
        Ok(Self { gamma })
    }

    pub fn gamma(&self) -> f64 {
        self.gamma
    }

    pub fn is_identity(&self) -> bool {
        self.gamma == 1.0
    }

    pub fn lut(&self) -> [u8; 256] {
        let mut lut = [0u8; 256];
        let inv = 1.0 / self.gamma;
        for (i, out) in lut.iter_mut().enumerate() {
            *out = (255.0 * (i as f64 / 255.0).powf(inv)).round().clamp(0.0, 255.0) as u8;
        }
        lut
    }
}

/// Gamma for a frame from its lightness histogram: dark frames get 1.5,
/// over-exposed frames 0.7, anything else 1.0.
pub fn select_gamma(frame: &Frame) -> GammaParams {
    let hist = if frame.is_gray() {
        intensity_histogram(frame)
    } else {
        Histogram256::from_samples(lightness_channel(frame).data())
    };
    let gamma = if hist.fraction_in(DARK_BINS) > 0.5 {
        GAMMA_DARK
    } else if hist.fraction_in(BRIGHT_BINS) > 0.5 {
        GAMMA_OVEREXPOSED
    } else {
        1.0
    };
    GammaParams { gamma }
}

pub fn gamma_correct(frame: &Frame, params: GammaParams) -> Result<Frame> {
    // Re-validate: the field is private but deserialization bypasses `new`.
    let params = GammaParams::new(params.gamma)?;
    if params.is_identity() {
        return Ok(frame.clone());
    }
    let lut = params.lut();
    let data = frame.data().iter().map(|&v| lut[v as usize]).collect();
    Ok(frame.derive(frame.channels(), data))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ClaheParams {
    pub clip_limit: f64,
    pub tiles_x: u32,
    pub tiles_y: u32,
}

impl Default for ClaheParams {
    fn default() -> Self {
        Self {
            clip_limit: 2.0,
            tiles_x: 8,
            tiles_y: 8,
        }
    }
}

/// Clip `hist` at `limit` and spread the excess evenly over all bins; the
/// remainder goes one count at a time to evenly spaced bins.
pub fn clip_histogram(hist: &mut [u32; 256], limit: u32) {
    let mut excess: u64 = 0;
    for bin in hist.iter_mut() {
        if *bin > limit {
            excess += u64::from(*bin - limit);
            *bin = limit;
        }
    }
    let share = (excess / 256) as u32;
    let remainder = (excess % 256) as usize;
    for bin in hist.iter_mut() {
        *bin += share;
    }
    if let Some(step) = 256usize.checked_div(remainder) {
        let step = step.max(1);
        for i in (0..256).step_by(step).take(remainder) {
            hist[i] += 1;
        }
    }
}

fn tile_bounds(len: u32, tiles: u32) -> Vec<(usize, usize)> {
    (0..tiles)
        .map(|t| {
            let start = (u64::from(t) * u64::from(len) / u64::from(tiles)) as usize;
            let end = (u64::from(t + 1) * u64::from(len) / u64::from(tiles)) as usize;
            (start, end)
        })
        .collect()
}

/// Contrast-limited adaptive histogram equalization of a single channel.
///
/// Each tile gets its own clipped equalization map; output pixels blend the
/// maps of the four nearest tile centres bilinearly.
pub fn clahe(channel: &Frame, params: ClaheParams) -> Result<Frame> {
    require_gray(channel, "clahe")?;
    let ClaheParams {
        clip_limit,
        tiles_x,
        tiles_y,
    } = params;
    if tiles_x == 0 || tiles_y == 0 {
        return Err(Error::InvalidParameter("clahe needs at least one tile per axis".into()));
    }
    if !(clip_limit.is_finite() && clip_limit > 0.0) {
        return Err(Error::InvalidParameter(format!("clip limit must be > 0, got {clip_limit}")));
    }
    let (w, h) = (channel.width(), channel.height());
    if tiles_x > w || tiles_y > h {
        return Err(Error::InvalidParameter(format!(
            "{tiles_x}x{tiles_y} tiles do not fit a {w}x{h} channel"
        )));
    }
    let xs = tile_bounds(w, tiles_x);
    let ys = tile_bounds(h, tiles_y);
    let src = channel.data();
    let stride = w as usize;

    let mut luts: Vec<[u8; 256]> = Vec::with_capacity((tiles_x * tiles_y) as usize);
    for &(y0, y1) in &ys {
        for &(x0, x1) in &xs {
            let mut hist = [0u32; 256];
            for y in y0..y1 {
                for &v in &src[y * stride + x0..y * stride + x1] {
                    hist[v as usize] += 1;
                }
            }
            let area = ((x1 - x0) * (y1 - y0)) as u32;
            let limit = ((clip_limit * f64::from(area) / 256.0) as u32).max(1);
            clip_histogram(&mut hist, limit);
            let scale = 255.0 / f64::from(area);
            let mut lut = [0u8; 256];
            let mut cdf = 0u64;
            for (v, out) in lut.iter_mut().enumerate() {
                cdf += u64::from(hist[v]);
                *out = (cdf as f64 * scale).round().min(255.0) as u8;
            }
            luts.push(lut);
        }
    }

    let centers = |bounds: &[(usize, usize)]| -> Vec<f32> {
        bounds.iter().map(|&(a, b)| (a + b) as f32 / 2.0 - 0.5).collect()
    };
    let cx = centers(&xs);
    let cy = centers(&ys);
    // Neighbouring tile indices and blend weight along one axis.
    let locate = |c: &[f32], p: f32| -> (usize, usize, f32) {
        let n = c.len();
        if p <= c[0] {
            return (0, 0, 0.0);
        }
        if p >= c[n - 1] {
            return (n - 1, n - 1, 0.0);
        }
        let i = c.partition_point(|&v| v <= p) - 1;
        let t = (p - c[i]) / (c[i + 1] - c[i]);
        (i, i + 1, t)
    };
    let col: Vec<(usize, usize, f32)> = (0..w).map(|x| locate(&cx, x as f32)).collect();

    let tx = tiles_x as usize;
    let mut out = vec![0u8; src.len()];
    for y in 0..h as usize {
        let (r0, r1, ty) = locate(&cy, y as f32);
        for x in 0..w as usize {
            let (c0, c1, txw) = col[x];
            let v = src[y * stride + x] as usize;
            let m = |r: usize, c: usize| f32::from(luts[r * tx + c][v]);
            let top = m(r0, c0) * (1.0 - txw) + m(r0, c1) * txw;
            let bottom = m(r1, c0) * (1.0 - txw) + m(r1, c1) * txw;
            out[y * stride + x] = (top * (1.0 - ty) + bottom * ty).round().clamp(0.0, 255.0) as u8;
        }
    }
    Ok(channel.derive(1, out))
}

/// Gamma correction chosen by [`select_gamma`] followed by CLAHE on the
/// lightness channel, keeping chroma.
pub fn normalize_illumination(frame: &Frame) -> Result<Frame> {
    normalize_illumination_with(frame, ClaheParams::default())
}

pub fn normalize_illumination_with(frame: &Frame, params: ClaheParams) -> Result<Frame> {
    if frame.is_gray() {
        let corrected = gamma_correct(frame, select_gamma(frame))?;
        return clahe(&corrected, params);
    }
    let corrected = gamma_correct(frame, select_gamma(frame))?;
    let labs: Vec<_> = corrected
        .data()
        .chunks_exact(3)
        .map(|p| rgb_to_lab([p[0], p[1], p[2]]))
        .collect();
    let l_bytes = labs
        .iter()
        .map(|lab| (lab.l * 255.0 / 100.0).round().clamp(0.0, 255.0) as u8)
        .collect();
    let l_channel = corrected.derive(1, l_bytes);
    let equalized = clahe(&l_channel, params)?;
    let mut data = Vec::with_capacity(corrected.data().len());
    for (lab, &l) in labs.iter().zip(equalized.data()) {
        let mut lab = *lab;
        lab.l = f32::from(l) * 100.0 / 255.0;
        data.extend_from_slice(&lab_to_rgb(lab));
    }
    Ok(corrected.derive(3, data))
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn mixed(w: u32, h: u32, parts: &[(u8, f64)], channels: u8) -> Frame {
        let n = (w * h) as usize;
        let mut data = Vec::with_capacity(n * channels as usize);
        let mut filled = 0;
        for (i, &(v, frac)) in parts.iter().enumerate() {
            let count = if i + 1 == parts.len() { n - filled } else { (n as f64 * frac) as usize };
            filled += count;
            data.extend(std::iter::repeat_n(v, count * channels as usize));
        }
        Frame::new(w, h, channels, data).unwrap()
    }

    #[test]
    fn lighting_extremes() {
        let black = Frame::filled(10, 10, 3, 0).unwrap();
        let a = assess_lighting(&black);
        assert_eq!((a.condition, a.dark_fraction), (LightingCondition::Poor, 1.0));
        let white = Frame::filled(10, 10, 3, 255).unwrap();
        let a = assess_lighting(&white);
        assert_eq!((a.condition, a.dark_fraction), (LightingCondition::Good, 0.0));
    }

    #[test]
    fn lighting_eighty_percent_dark() {
        let f = mixed(10, 10, &[(30, 0.8), (200, 0.2)], 1);
        let a = assess_lighting(&f);
        assert!((a.dark_fraction - 0.8).abs() < 1e-12);
        assert_eq!(a.condition, LightingCondition::Poor);
    }

    #[test]
    fn lighting_threshold_is_inclusive() {
        let f = mixed(10, 10, &[(74, 0.75), (75, 0.25)], 1);
        assert_eq!(assess_lighting(&f).condition, LightingCondition::Poor);
        let f = mixed(10, 10, &[(74, 0.74), (75, 0.26)], 1);
        assert_eq!(assess_lighting(&f).condition, LightingCondition::Good);
    }

    #[test]
    fn gamma_selection() {
        // L of gray 40 is ~16.5 -> 42 on the 0..255 scale; 230 -> ~91 -> 232.
        let dark = mixed(10, 10, &[(40, 0.6), (230, 0.4)], 3);
        assert_eq!(select_gamma(&dark).gamma(), GAMMA_DARK);
        let bright = mixed(10, 10, &[(230, 0.6), (40, 0.4)], 3);
        assert_eq!(select_gamma(&bright).gamma(), GAMMA_OVEREXPOSED);
        let mid = mixed(10, 10, &[(119, 1.0)], 3);
        assert_eq!(select_gamma(&mid).gamma(), 1.0);
    }

    #[test]
    fn gamma_identity_and_reference() {
        let f = Frame::rgb(4, 1, (0..12).map(|v| v * 21).collect()).unwrap();
        let g1 = GammaParams::new(1.0).unwrap();
        assert_eq!(gamma_correct(&f, g1).unwrap(), f);
        let lut = GammaParams::new(2.0).unwrap().lut();
        assert_eq!(lut[64], 128);
        for g in [0.3, 0.7, 1.5, 2.0, 5.0] {
            let lut = GammaParams::new(g).unwrap().lut();
            assert_eq!((lut[0], lut[255]), (0, 255));
        }
        assert!(GammaParams::new(0.0).is_err());
        assert!(GammaParams::new(-1.0).is_err());
    }

    #[test]
    fn clahe_constant_channel_stays_constant() {
        let f = Frame::filled(64, 64, 1, 100).unwrap();
        let out = clahe(&f, ClaheParams::default()).unwrap();
        let first = out.data()[0];
        assert!(out.data().iter().all(|&v| v == first));
    }

    #[test]
    fn clahe_single_tile_is_global_equalization() {
        let data: Vec<u8> = (0..48 * 32).map(|i| ((i * 37 + i / 7) % 97 + 60) as u8).collect();
        let f = Frame::gray(48, 32, data).unwrap();
        let out = clahe(&f, ClaheParams { clip_limit: 1e6, tiles_x: 1, tiles_y: 1 }).unwrap();
        // Direct global equalization.
        let mut counts = [0u64; 256];
        for &v in f.data() {
            counts[v as usize] += 1;
        }
        let n = f.pixel_count() as f64;
        let mut map = [0u8; 256];
        let mut acc = 0u64;
        for v in 0..256 {
            acc += counts[v];
            map[v] = (acc as f64 * 255.0 / n).round() as u8;
        }
        for (&i, &o) in f.data().iter().zip(out.data()) {
            assert_eq!(o, map[i as usize]);
        }
    }

    fn tile_std(f: &Frame, x0: u32, y0: u32, size: u32) -> f64 {
        let vals: Vec<f64> = (y0..y0 + size)
            .flat_map(|y| (x0..x0 + size).map(move |x| (x, y)))
            .map(|(x, y)| f64::from(f.at(x, y)))
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        (vals.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / vals.len() as f64).sqrt()
    }

    #[test]
    fn clahe_stretches_a_split_gradient() {
        let (w, h) = (64u32, 64u32);
        let data = (0..h)
            .flat_map(|_| {
                (0..w).map(move |x| {
                    if x < w / 2 {
                        20 + (x % 8) as u8
                    } else {
                        180 + (x % 8) as u8
                    }
                })
            })
            .collect();
        let f = Frame::gray(w, h, data).unwrap();
        let out = clahe(&f, ClaheParams { clip_limit: 2.0, tiles_x: 4, tiles_y: 4 }).unwrap();
        for ty in 0..4 {
            for tx in 0..4 {
                let before = tile_std(&f, tx * 16, ty * 16, 16);
                let after = tile_std(&out, tx * 16, ty * 16, 16);
                assert!(after + 1e-9 >= before, "tile {tx},{ty}: {before} -> {after}");
            }
        }
    }

    #[test]
    fn clahe_rejects_bad_params() {
        let f = Frame::filled(16, 16, 1, 1).unwrap();
        assert!(clahe(&f, ClaheParams { clip_limit: 2.0, tiles_x: 0, tiles_y: 1 }).is_err());
        assert!(clahe(&f, ClaheParams { clip_limit: 0.0, tiles_x: 2, tiles_y: 2 }).is_err());
        assert!(clahe(&f, ClaheParams { clip_limit: 2.0, tiles_x: 32, tiles_y: 2 }).is_err());
    }

    fn gradient_rgb(w: u32, h: u32, lo: u8, hi: u8) -> Frame {
        let span = f64::from(hi - lo);
        let data = (0..h)
            .flat_map(|y| {
                (0..w).flat_map(move |x| {
                    let t = f64::from(x + y) / f64::from(w + h - 2);
                    let v = lo + (t * span) as u8;
                    [v, v.saturating_sub(5), v.saturating_add(3)]
                })
            })
            .collect();
        Frame::rgb(w, h, data).unwrap()
    }

    #[test]
    fn normalize_brightens_dark_frames() {
        let f = gradient_rgb(64, 48, 5, 60);
        assert_eq!(select_gamma(&f).gamma(), GAMMA_DARK);
        let out = normalize_illumination(&f).unwrap();
        assert!(out.mean() > f.mean(), "{} -> {}", f.mean(), out.mean());
    }

    #[test]
    fn normalize_darkens_overexposed_frames() {
        let f = gradient_rgb(64, 48, 200, 250);
        assert_eq!(select_gamma(&f).gamma(), GAMMA_OVEREXPOSED);
        let out = normalize_illumination(&f).unwrap();
        assert!(out.mean() < f.mean(), "{} -> {}", f.mean(), out.mean());
    }

    #[test]
    fn normalize_balanced_frame_skips_gamma() {
        let f = gradient_rgb(64, 48, 60, 200);
        assert_eq!(select_gamma(&f).gamma(), 1.0);
        let out = normalize_illumination(&f).unwrap();
        assert_eq!(out.dims(), f.dims());
    }

    #[test]
    fn darkening_first_is_lossy() {
        let fwd = GammaParams::new(0.7).unwrap().lut();
        // Inputs 0..=3 all map to 0 at gamma 0.7.
        assert_eq!(&fwd[0..4], &[0, 0, 0, 0]);
        let back = GammaParams::new(1.0 / 0.7).unwrap().lut();
        assert_eq!(back[fwd[3] as usize], 0);
    }

    proptest! {
        #[test]
        fn gamma_is_monotone_with_fixed_direction(g in 0.1f64..5.0) {
            let lut = GammaParams::new(g).unwrap().lut();
            for i in 1..256 {
                prop_assert!(lut[i] >= lut[i - 1]);
                if g < 1.0 {
                    prop_assert!(lut[i] <= i as u8);
                } else {
                    prop_assert!(lut[i] >= i as u8);
                }
            }
        }

        // Brightening first keeps every input distinguishable, so undoing it
        // lands within rounding. The darkening direction merges the darkest
        // inputs (see `darkening_first_is_lossy`).
        #[test]
        fn gamma_inverse_roundtrip(g in 1.0f64..2.0) {
            let fwd = GammaParams::new(g).unwrap().lut();
            let back = GammaParams::new(1.0 / g).unwrap().lut();
            for i in 0..256usize {
                prop_assert!(back[fwd[i] as usize].abs_diff(i as u8) <= 2, "g={} i={}", g, i);
            }
        }

        #[test]
        fn lighting_ignores_pixel_order(mut data in proptest::collection::vec(any::<u8>(), 64)) {
            let a = assess_lighting(&Frame::gray(8, 8, data.clone()).unwrap());
            data.reverse();
            data.rotate_left(13);
            let b = assess_lighting(&Frame::gray(8, 8, data).unwrap());
            prop_assert_eq!(a, b);
        }

        #[test]
        fn clipped_histogram_respects_bound(
            raw in proptest::collection::vec(0u32..500, 256),
            limit in 1u32..300,
        ) {
            let mut hist = [0u32; 256];
            hist.copy_from_slice(&raw);
            let total: u64 = hist.iter().map(|&v| u64::from(v)).sum();
            let excess: u64 = hist.iter().map(|&v| u64::from(v.saturating_sub(limit))).sum();
            clip_histogram(&mut hist, limit);
            let bound = u64::from(limit) + excess / 256 + 1;
            prop_assert!(hist.iter().all(|&v| u64::from(v) <= bound));
            prop_assert_eq!(hist.iter().map(|&v| u64::from(v)).sum::<u64>(), total);
        }
    }
}
