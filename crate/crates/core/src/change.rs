//! Activity detection by consecutive-frame differencing.
//!
//! The pipeline is: absolute difference, pixel-level threshold, 3×3 closing,
//! 8-connected labelling, then an area filter that drops components smaller
//! than [`ChangeConfig::area_threshold`].

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{
    adaptive_threshold_gaussian, binary_closing, binary_threshold, connected_components,
    otsu_threshold, to_grayscale, BBox, Frame,
};

/// Pixel-level threshold applied to the difference image.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Strategy {
    Binary(u8),
    AdaptiveGaussian { block: u32, c: i32 },
    Otsu,
}

impl Default for Strategy {
    fn default() -> Self {
        Strategy::Binary(20)
    }
}

impl fmt::Display for Strategy {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            Strategy::Binary(t) => write!(f, "binary:{t}"),
            Strategy::AdaptiveGaussian { block, c } => write!(f, "adaptive:{block}:{c}"),
            Strategy::Otsu => write!(f, "otsu"),
        }
    }
}

impl FromStr for Strategy {
    type Err = Error;

    /// `binary[:t]`, `adaptive[:block[:c]]` or `otsu`.
    fn from_str(s: &str) -> Result<Self> {
        let mut parts = s.trim().split(':');
        let kind = parts.next().unwrap_or_default().to_ascii_lowercase();
        let bad = |what: &str| Error::InvalidParameter(format!("strategy {s:?}: {what}"));
        let strategy = match kind.as_str() {
            "binary" => Strategy::Binary(match parts.next() {
                Some(t) => t.parse().map_err(|_| bad("threshold must be 0..=255"))?,
                None => 20,
            }),
            "adaptive" => {
                let block = match parts.next() {
                    Some(b) => b.parse().map_err(|_| bad("bad block size"))?,
                    None => 11,
                };
                let c = match parts.next() {
                    Some(c) => c.parse().map_err(|_| bad("bad offset"))?,
                    None => -10,
                };
                if block < 3 || block % 2 == 0 {
                    return Err(bad("block must be odd and >= 3"));
                }
                Strategy::AdaptiveGaussian { block, c }
            }
            "otsu" => Strategy::Otsu,
            _ => return Err(bad("unknown kind")),
        };
        if parts.next().is_some() {
            return Err(bad("trailing fields"));
        }
        Ok(strategy)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeConfig {
    pub strategy: Strategy,
    /// Minimum component area in pixels; components at or above it count.
    pub area_threshold: u64,
    pub closing_iterations: u32,
}

impl Default for ChangeConfig {
    fn default() -> Self {
        Self {
            strategy: Strategy::default(),
            area_threshold: 400,
            closing_iterations: 1,
        }
    }
}

impl ChangeConfig {
    pub fn with_area(mut self, area_threshold: u64) -> Self {
        self.area_threshold = area_threshold;
        self
    }

    pub fn validate(&self) -> Result<()> {
        if self.area_threshold == 0 {
            return Err(Error::InvalidParameter("area_threshold must be >= 1".into()));
        }
        if let Strategy::AdaptiveGaussian { block, .. } = self.strategy {
            if block < 3 || block % 2 == 0 {
                return Err(Error::InvalidParameter(format!("bad adaptive block {block}")));
            }
        }
        Ok(())
    }
}

/// Horizontal position of a region within the frame, by thirds of the width.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Position {
    Left,
    Center,
    Right,
}

impl Position {
    pub fn of(bbox: &BBox, frame_width: u32) -> Position {
        let cx = bbox.center_x();
        let third = f64::from(frame_width) / 3.0;
        if cx < third {
            Position::Left
        } else if cx < 2.0 * third {
            Position::Center
        } else {
            Position::Right
        }
    }

    pub fn as_str(&self) -> &'static str {
        match self {
            Position::Left => "left",
            Position::Center => "center",
            Position::Right => "right",
        }
    }
}

impl fmt::Display for Position {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActivityRegion {
    pub bbox: BBox,
    pub area: u64,
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeResult {
    pub has_activity: bool,
    pub regions: Vec<ActivityRegion>,
    /// Foreground pixels after thresholding and closing.
    pub changed_pixels: u64,
    pub strategy: Strategy,
    /// Pixel threshold actually applied (Otsu picks its own; adaptive has none).
    pub pixel_threshold: Option<u8>,
}

/// `|curr - prev|` per pixel.
pub fn frame_diff(prev: &Frame, curr: &Frame) -> Result<Frame> {
    if prev.dims() != curr.dims() {
        return Err(Error::DimensionMismatch {
            left: prev.dims(),
            right: curr.dims(),
        });
    }
    let data = prev
        .data()
        .iter()
        .zip(curr.data())
        .map(|(&a, &b)| a.abs_diff(b))
        .collect();
    Ok(curr.derive(curr.channels(), data))
}

pub fn detect_changes(prev: &Frame, curr: &Frame, config: &ChangeConfig) -> Result<ChangeResult> {
    config.validate()?;
    if (prev.width(), prev.height()) != (curr.width(), curr.height()) {
        return Err(Error::DimensionMismatch {
            left: prev.dims(),
            right: curr.dims(),
        });
    }
    let diff = frame_diff(&to_grayscale(prev), &to_grayscale(curr))?;

    let (mask, pixel_threshold) = match config.strategy {
        Strategy::Binary(t) => (binary_threshold(&diff, t)?, Some(t)),
        Strategy::AdaptiveGaussian { block, c } => {
            (adaptive_threshold_gaussian(&diff, block, c)?, None)
        }
        Strategy::Otsu => {
            let (t, mask) = otsu_threshold(&diff)?;
            (mask, Some(t))
        }
    };
    let closed = binary_closing(&mask, config.closing_iterations)?;
    let changed_pixels = closed.data().iter().filter(|&&v| v != 0).count() as u64;
    let labels = connected_components(&closed)?;

    let regions: Vec<ActivityRegion> = labels
        .regions
        .iter()
        .filter(|r| r.area >= config.area_threshold)
        .map(|r| ActivityRegion {
            bbox: r.bbox,
            area: r.area,
        })
        .collect();

    Ok(ChangeResult {
        has_activity: !regions.is_empty(),
        regions,
        changed_pixels,
        strategy: config.strategy,
        pixel_threshold,
    })
}

/// A frame pair with its ground-truth activity label.
#[derive(Debug, Clone)]
pub struct LabeledPair {
    pub prev: Frame,
    pub curr: Frame,
    pub active: bool,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Evaluation {
    pub precision: f64,
    pub recall: f64,
    pub true_pos: u64,
    pub false_pos: u64,
    pub false_neg: u64,
    pub true_neg: u64,
}

impl Evaluation {
    /// Precision and recall from raw counts. An empty denominator yields 1.0:
    /// no positive calls means no false alarms, no positives means nothing missed.
    pub fn from_counts(true_pos: u64, false_pos: u64, false_neg: u64, true_neg: u64) -> Self {
        let ratio = |num: u64, den: u64| if den == 0 { 1.0 } else { num as f64 / den as f64 };
        Self {
            precision: ratio(true_pos, true_pos + false_pos),
            recall: ratio(true_pos, true_pos + false_neg),
            true_pos,
            false_pos,
            false_neg,
            true_neg,
        }
    }
}

/// Precision/recall of `has_activity` against the labels of `pairs`.
pub fn evaluate_strategy<'a, I>(pairs: I, config: &ChangeConfig) -> Result<Evaluation>
where
    I: IntoIterator<Item = &'a LabeledPair>,
{
    let (mut tp, mut fp, mut fneg, mut tn) = (0, 0, 0, 0);
    let mut seen = 0usize;
    for pair in pairs {
        seen += 1;
        let predicted = detect_changes(&pair.prev, &pair.curr, config)?.has_activity;
        match (predicted, pair.active) {
            (true, true) => tp += 1,
            (true, false) => fp += 1,
            (false, true) => fneg += 1,
            (false, false) => tn += 1,
        }
    }
    if seen == 0 {
        return Err(Error::Empty("evaluation corpus"));
    }
    Ok(Evaluation::from_counts(tp, fp, fneg, tn))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn with_block(base: &Frame, x0: u32, y0: u32, side: u32, value: u8) -> Frame {
        let mut f = base.clone();
        let w = f.width();
        for y in y0..y0 + side {
            for x in x0..x0 + side {
                f.data_mut()[(y * w + x) as usize] = value;
            }
        }
        f
    }

    #[test]
    fn diff_reference_points() {
        let a = Frame::filled(4, 4, 1, 0).unwrap();
        assert!(frame_diff(&a, &a).unwrap().data().iter().all(|&v| v == 0));
        let b = Frame::filled(4, 4, 1, 255).unwrap();
        assert!(frame_diff(&a, &b).unwrap().data().iter().all(|&v| v == 255));
        let p = Frame::gray(1, 1, vec![200]).unwrap();
        let c = Frame::gray(1, 1, vec![150]).unwrap();
        assert_eq!(frame_diff(&p, &c).unwrap().data(), &[50]);
    }

    #[test]
    fn diff_rejects_mismatched_frames() {
        let a = Frame::filled(4, 4, 1, 0).unwrap();
        let b = Frame::filled(4, 5, 1, 0).unwrap();
        assert!(matches!(frame_diff(&a, &b), Err(Error::DimensionMismatch { .. })));
        assert!(detect_changes(&a, &b, &ChangeConfig::default()).is_err());
    }

    #[test]
    fn identical_frames_have_no_activity() {
        let f = Frame::filled(64, 48, 3, 77).unwrap();
        let r = detect_changes(&f, &f, &ChangeConfig::default()).unwrap();
        assert!(!r.has_activity);
        assert!(r.regions.is_empty());
    }

    #[test]
    fn block_of_25_is_detected() {
        let bg = Frame::filled(100, 80, 1, 60).unwrap();
        let curr = with_block(&bg, 30, 20, 25, 160);
        let r = detect_changes(&bg, &curr, &ChangeConfig::default()).unwrap();
        assert!(r.has_activity);
        assert_eq!(r.regions.len(), 1);
        assert_eq!(r.regions[0].area, 625);
        assert_eq!(r.regions[0].bbox, BBox::new(30, 20, 25, 25));
    }

    #[test]
    fn block_of_15_is_filtered() {
        let bg = Frame::filled(100, 80, 1, 60).unwrap();
        let curr = with_block(&bg, 30, 20, 15, 160);
        let r = detect_changes(&bg, &curr, &ChangeConfig::default()).unwrap();
        assert!(!r.has_activity);
        assert_eq!(r.changed_pixels, 225);
    }

    #[test]
    fn area_boundary_is_inclusive() {
        let bg = Frame::filled(60, 60, 1, 0).unwrap();
        let curr = with_block(&bg, 10, 10, 20, 90);
        assert!(detect_changes(&bg, &curr, &ChangeConfig::default()).unwrap().has_activity);
        let strict = ChangeConfig::default().with_area(401);
        assert!(!detect_changes(&bg, &curr, &strict).unwrap().has_activity);
    }

    #[test]
    fn otsu_and_adaptive_strategies_run() {
        let bg = Frame::filled(80, 60, 1, 40).unwrap();
        let curr = with_block(&bg, 10, 10, 30, 200);
        let otsu = ChangeConfig {
            strategy: Strategy::Otsu,
            ..ChangeConfig::default()
        };
        let r = detect_changes(&bg, &curr, &otsu).unwrap();
        assert_eq!(r.pixel_threshold, Some(0));
        assert_eq!(r.regions.len(), 1);
        assert_eq!(r.regions[0].area, 900);

        // A flat blob only exceeds its local mean near its edges, so the
        // adaptive mask is a ring inside the blob.
        let adaptive = ChangeConfig {
            strategy: "adaptive:11:-10".parse().unwrap(),
            ..ChangeConfig::default()
        }
        .with_area(100);
        let r = detect_changes(&bg, &curr, &adaptive).unwrap();
        assert!(r.has_activity);
        assert!(r.regions[0].area < 900);
        assert_eq!(r.regions[0].bbox, BBox::new(10, 10, 30, 30));
    }

    #[test]
    fn strategy_parsing() {
        assert_eq!("binary:20".parse::<Strategy>().unwrap(), Strategy::Binary(20));
        assert_eq!("binary".parse::<Strategy>().unwrap(), Strategy::Binary(20));
        assert_eq!("OTSU".parse::<Strategy>().unwrap(), Strategy::Otsu);
        assert_eq!(
            "adaptive:7:-3".parse::<Strategy>().unwrap(),
            Strategy::AdaptiveGaussian { block: 7, c: -3 }
        );
        assert!("adaptive:8".parse::<Strategy>().is_err());
        assert!("binary:300".parse::<Strategy>().is_err());
        assert!("median".parse::<Strategy>().is_err());
        for s in [Strategy::Binary(7), Strategy::Otsu, Strategy::AdaptiveGaussian { block: 5, c: 2 }] {
            assert_eq!(s.to_string().parse::<Strategy>().unwrap(), s);
        }
    }

    #[test]
    fn position_thirds() {
        assert_eq!(Position::of(&BBox::new(0, 0, 20, 10), 200), Position::Left);
        assert_eq!(Position::of(&BBox::new(90, 0, 20, 10), 200), Position::Center);
        assert_eq!(Position::of(&BBox::new(180, 0, 20, 10), 200), Position::Right);
    }

    #[test]
    fn evaluation_counts() {
        let bg = Frame::filled(50, 50, 1, 10).unwrap();
        let big = with_block(&bg, 5, 5, 25, 100);
        let small = with_block(&bg, 5, 5, 10, 100);
        let pairs = vec![
            LabeledPair { prev: bg.clone(), curr: big.clone(), active: true },
            LabeledPair { prev: bg.clone(), curr: small.clone(), active: true },
            LabeledPair { prev: bg.clone(), curr: big, active: false },
            LabeledPair { prev: bg.clone(), curr: small, active: false },
            LabeledPair { prev: bg.clone(), curr: bg.clone(), active: false },
        ];
        let e = evaluate_strategy(&pairs, &ChangeConfig::default()).unwrap();
        assert_eq!((e.true_pos, e.false_pos, e.false_neg, e.true_neg), (1, 1, 1, 2));
        assert_eq!(e.precision, 0.5);
        assert_eq!(e.recall, 0.5);
        assert!(evaluate_strategy(&[], &ChangeConfig::default()).is_err());
    }

    #[test]
    fn perfect_detector_scores_one() {
        let bg = Frame::filled(50, 50, 1, 10).unwrap();
        let big = with_block(&bg, 5, 5, 25, 100);
        let pairs = vec![
            LabeledPair { prev: bg.clone(), curr: big, active: true },
            LabeledPair { prev: bg.clone(), curr: bg.clone(), active: false },
        ];
        let e = evaluate_strategy(&pairs, &ChangeConfig::default()).unwrap();
        assert_eq!((e.precision, e.recall), (1.0, 1.0));
    }
}
