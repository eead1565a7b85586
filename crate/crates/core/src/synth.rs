//! Deterministic synthetic data: face-like crops for enrollment tests,
//! labelled change-detection corpora and simulation scenes.
//!
//! All generators are seeded with ChaCha8 so their output is stable across
//! platforms and runs.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::change::LabeledPair;
use crate::imaging::Frame;

fn rng(seed: u64, stream: u64) -> ChaCha8Rng {
    let mut r = ChaCha8Rng::seed_from_u64(seed);
    r.set_stream(stream);
    r
}

/// Per-capture variation applied when rendering a face.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FaceJitter {
    pub dx: f32,
    pub dy: f32,
    pub scale: f32,
    pub brightness: f32,
    pub noise_sigma: f32,
    pub seed: u64,
}

impl FaceJitter {
    pub fn none() -> Self {
        Self {
            dx: 0.0,
            dy: 0.0,
            scale: 1.0,
            brightness: 0.0,
            noise_sigma: 0.0,
            seed: 0,
        }
    }

    /// Small random pose/exposure change: up to 2 px shift, 3% scale,
    /// 12 levels of brightness and sensor noise of sigma 2.
    pub fn seeded(seed: u64) -> Self {
        let mut r = rng(seed, 7);
        Self {
            dx: r.random_range(-2.0..=2.0),
            dy: r.random_range(-2.0..=2.0),
            scale: r.random_range(0.97..=1.03),
            brightness: r.random_range(-12.0..=12.0),
            noise_sigma: 2.0,
            seed,
        }
    }
}

struct Blob {
    cx: f32,
    cy: f32,
    sx: f32,
    sy: f32,
    amp: f32,
}

/// Geometry and texture that make one synthetic identity.
struct FaceModel {
    skin: f32,
    rx: f32,
    ry: f32,
    hair: f32,
    hairline: f32,
    features: Vec<Blob>,
    tint: [f32; 3],
}

impl FaceModel {
    fn new(identity: u64) -> Self {
        let mut r = rng(identity, 1);
        let eye_y = r.random_range(0.36..0.46);
        let eye_dx = r.random_range(0.13..0.2);
        let eye_size = r.random_range(0.035..0.06);
        let mut features = vec![
            Blob { cx: 0.5 - eye_dx, cy: eye_y, sx: eye_size * 1.4, sy: eye_size, amp: -90.0 },
            Blob { cx: 0.5 + eye_dx, cy: eye_y, sx: eye_size * 1.4, sy: eye_size, amp: -90.0 },
            Blob {
                cx: 0.5,
                cy: r.random_range(0.68..0.76),
                sx: r.random_range(0.08..0.16),
                sy: 0.025,
                amp: -70.0,
            },
            Blob {
                cx: 0.5,
                cy: r.random_range(0.52..0.6),
                sx: 0.03,
                sy: r.random_range(0.05..0.09),
                amp: -35.0,
            },
        ];
        for _ in 0..14 {
            features.push(Blob {
                cx: r.random_range(0.2..0.8),
                cy: r.random_range(0.25..0.85),
                sx: r.random_range(0.02..0.07),
                sy: r.random_range(0.02..0.07),
                amp: r.random_range(-70.0..70.0),
            });
        }
        Self {
            skin: r.random_range(140.0..190.0),
            rx: r.random_range(0.32..0.4),
            ry: r.random_range(0.4..0.47),
            hair: r.random_range(20.0..120.0),
            hairline: r.random_range(0.2..0.3),
            features,
            tint: [r.random_range(8.0..20.0), 0.0, r.random_range(-20.0..-5.0)],
        }
    }

    /// Intensity at normalized face coordinates.
    fn intensity(&self, u: f32, v: f32) -> f32 {
        let (du, dv) = ((u - 0.5) / self.rx, (v - 0.55) / self.ry);
        let inside = du * du + dv * dv <= 1.0;
        if !inside {
            return if v < 0.5 && (u - 0.5).abs() < self.rx + 0.06 { self.hair } else { 100.0 };
        }
        if v < self.hairline {
            return self.hair;
        }
        let mut value = self.skin;
        for b in &self.features {
            let (x, y) = ((u - b.cx) / b.sx, (v - b.cy) / b.sy);
            value += b.amp * (-(x * x + y * y) / 2.0).exp();
        }
        value
    }
}

/// Render identity `identity` into a `size`×`size` RGB patch.
pub fn face_patch(identity: u64, jitter: &FaceJitter, size: u32) -> Frame {
    let model = FaceModel::new(identity);
    let mut noise_rng = rng(jitter.seed, 11 + identity);
    let noise = Normal::new(0.0f32, jitter.noise_sigma.max(1e-6)).expect("sigma > 0");
    let s = size as f32;
    let mut data = Vec::with_capacity((size * size * 3) as usize);
    for y in 0..size {
        for x in 0..size {
            let u = ((x as f32 + 0.5 - jitter.dx) / s - 0.5) / jitter.scale + 0.5;
            let v = ((y as f32 + 0.5 - jitter.dy) / s - 0.5) / jitter.scale + 0.5;
            let mut value = model.intensity(u, v) + jitter.brightness;
            if jitter.noise_sigma > 0.0 {
                value += noise.sample(&mut noise_rng);
            }
            for t in model.tint {
                data.push((value + t).round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Frame::rgb(size, size, data).expect("consistent buffer")
}

/// 96×96 crop of a synthetic identity.
pub fn face_crop(identity: u64, jitter: &FaceJitter) -> Frame {
    face_patch(identity, jitter, 96)
}

/// Uniform random gray frame.
pub fn noise_frame(width: u32, height: u32, seed: u64) -> Frame {
    let mut r = rng(seed, 3);
    let data = (0..width * height).map(|_| r.random::<u8>()).collect();
    Frame::gray(width, height, data).expect("consistent buffer")
}

/// Copy `patch` into `frame` with its top-left corner at `(x, y)`, clipping
/// at the frame border. Channel counts must match.
pub fn paste(frame: &mut Frame, patch: &Frame, x: u32, y: u32) {
    assert_eq!(frame.channels(), patch.channels(), "paste needs matching channels");
    let c = frame.channels() as usize;
    let fw = frame.width();
    let fh = frame.height();
    for py in 0..patch.height() {
        let ty = y + py;
        if ty >= fh {
            break;
        }
        let cols = patch.width().min(fw.saturating_sub(x)) as usize;
        let src = (py * patch.width()) as usize * c;
        let dst = (ty * fw + x) as usize * c;
        frame.data_mut()[dst..dst + cols * c].copy_from_slice(&patch.data()[src..src + cols * c]);
    }
}

/// Static textured background shared by both frames of a pair.
pub fn background(width: u32, height: u32, channels: u8, seed: u64) -> Frame {
    let mut r = rng(seed, 5);
    let (fx, fy) = (r.random_range(0.01..0.05f32), r.random_range(0.01..0.05f32));
    let base = r.random_range(80.0..140.0f32);
    let mut data = Vec::with_capacity((width * height) as usize * channels as usize);
    for y in 0..height {
        for x in 0..width {
            let v = base
                + 25.0 * (x as f32 * fx).sin() * (y as f32 * fy).cos()
                + 10.0 * ((x + 2 * y) as f32 * 0.11).sin();
            for _ in 0..channels {
                data.push(v.round().clamp(0.0, 255.0) as u8);
            }
        }
    }
    Frame::new(width, height, channels, data).expect("consistent buffer")
}

/// Add zero-mean Gaussian sensor noise.
pub fn add_noise(frame: &mut Frame, sigma: f32, seed: u64) {
    if sigma <= 0.0 {
        return;
    }
    let mut r = rng(seed, 9);
    let normal = Normal::new(0.0f32, sigma).expect("sigma > 0");
    for v in frame.data_mut() {
        *v = (f32::from(*v) + normal.sample(&mut r)).round().clamp(0.0, 255.0) as u8;
    }
}

/// Parameters of the labelled change corpus.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CorpusSpec {
    pub pairs: usize,
    pub width: u32,
    pub height: u32,
    pub min_blob: u32,
    pub max_blob: u32,
    pub noise_sigma: f32,
    /// Fraction of pairs that contain no blob at all.
    pub quiet_fraction: f64,
    /// Blobs with at least this many pixels are labelled as activity.
    pub active_area: u64,
    pub seed: u64,
}

impl Default for CorpusSpec {
    fn default() -> Self {
        Self {
            pairs: 240,
            width: 160,
            height: 120,
            min_blob: 10,
            max_blob: 60,
            noise_sigma: 5.0,
            quiet_fraction: 0.25,
            active_area: 400,
            seed: 2021,
        }
    }
}

/// One labelled pair plus the blob that was injected, if any.
#[derive(Debug, Clone)]
pub struct CorpusEntry {
    pub pair: LabeledPair,
    pub blob: Option<(u32, u32)>,
}

/// Pairs of noisy frames over a static background; the second frame of some
/// pairs carries a rectangular blob whose sides are drawn from
/// `min_blob..=max_blob`. A pair is labelled active iff its blob covers at
/// least `active_area` pixels.
pub fn change_corpus(spec: &CorpusSpec) -> Vec<CorpusEntry> {
    let mut r = rng(spec.seed, 13);
    (0..spec.pairs)
        .map(|i| {
            let bg = background(spec.width, spec.height, 1, spec.seed ^ (i as u64 / 8));
            let mut prev = bg.clone();
            let mut curr = bg;
            let blob = if r.random_bool(spec.quiet_fraction) {
                None
            } else {
                let w = r.random_range(spec.min_blob..=spec.max_blob);
                let h = (w as f32 * r.random_range(0.8..1.25f32)).round() as u32;
                let h = h.clamp(spec.min_blob, spec.max_blob);
                let x = r.random_range(0..=spec.width - w);
                let y = r.random_range(0..=spec.height - h);
                let delta: i16 = r.random_range(45..=100) * if r.random_bool(0.5) { 1 } else { -1 };
                let fw = spec.width;
                for yy in y..y + h {
                    for xx in x..x + w {
                        let p = &mut curr.data_mut()[(yy * fw + xx) as usize];
                        let base = i16::from(*p);
                        // Reflect instead of clipping so the contrast survives.
                        let v = if (0..=255).contains(&(base + delta)) { base + delta } else { base - delta };
                        *p = v as u8;
                    }
                }
                Some((w, h))
            };
            add_noise(&mut prev, spec.noise_sigma, spec.seed.wrapping_mul(31).wrapping_add(2 * i as u64));
            add_noise(&mut curr, spec.noise_sigma, spec.seed.wrapping_mul(31).wrapping_add(2 * i as u64 + 1));
            let active = blob.is_some_and(|(w, h)| u64::from(w) * u64::from(h) >= spec.active_area);
            CorpusEntry {
                pair: LabeledPair { prev, curr, active },
                blob,
            }
        })
        .collect()
}
