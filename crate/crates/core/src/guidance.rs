//! Capture guidance for enrollment photos.
//!
//! Tells the person in front of the camera where their face sits in the
//! window, warns about turning the phone too fast, and picks usable frames
//! out of an enrollment video.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::imaging::{BBox, Frame};

/// Faces with `w·h` at or below this many pixels are too far away.
pub const SMALL_FACE_AREA: i64 = 1024;
/// Fastest acceptable rotation, degrees per second.
pub const MAX_ROTATION_DEG_PER_S: f64 = 20.0;
/// Cap on crops taken from one enrollment video.
pub const MAX_ENROLLMENT_FRAMES: usize = 50;

/// Detected face, top-left corner plus size. All four fields are positive.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct FaceBox {
    pub x: i64,
    pub y: i64,
    pub width: i64,
    pub height: i64,
}

impl FaceBox {
    pub fn new(x: i64, y: i64, width: i64, height: i64) -> Result<Self> {
        if x <= 0 || y <= 0 || width <= 0 || height <= 0 {
            return Err(Error::InvalidParameter(format!(
                "face box ({x}, {y}, {width}, {height}) must be strictly positive"
            )));
        }
        Ok(Self { x, y, width, height })
    }
}

impl TryFrom<BBox> for FaceBox {
    type Error = Error;

    fn try_from(b: BBox) -> Result<Self> {
        FaceBox::new(b.x.into(), b.y.into(), b.w.into(), b.h.into())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum PositionLabel {
    Small,
    TopLeft,
    TopRight,
    BottomLeft,
    BottomRight,
    LeftEdge,
    TopEdge,
    RightEdge,
    BottomEdge,
    Center,
}

impl PositionLabel {
    pub const ALL: [PositionLabel; 10] = [
        PositionLabel::Small,
        PositionLabel::TopLeft,
        PositionLabel::TopRight,
        PositionLabel::BottomLeft,
        PositionLabel::BottomRight,
        PositionLabel::LeftEdge,
        PositionLabel::TopEdge,
        PositionLabel::RightEdge,
        PositionLabel::BottomEdge,
        PositionLabel::Center,
    ];

    pub fn as_str(&self) -> &'static str {
        match self {
            PositionLabel::Small => "Face is small. come closer",
            PositionLabel::TopLeft => "Face in top left",
            PositionLabel::TopRight => "Face in top right",
            PositionLabel::BottomLeft => "Face in bottom left",
            PositionLabel::BottomRight => "Face in bottom right",
            PositionLabel::LeftEdge => "Face in left edge",
            PositionLabel::TopEdge => "Face in top edge",
            PositionLabel::RightEdge => "Face in right edge",
            PositionLabel::BottomEdge => "Face in bottom edge",
            PositionLabel::Center => "Face in center",
        }
    }
}

impl fmt::Display for PositionLabel {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// Where the face sits in a `window_w × window_h` preview.
///
/// Margins are the face box grown by half its size; a margin crossing the
/// window border means the face is too close to that side. Branches are
/// checked in a fixed order (small, corners, edges, centre), so a small face
/// in a corner is still reported as small. Halving floors.
pub fn face_position(window_w: i64, window_h: i64, face: FaceBox) -> Result<PositionLabel> {
    if window_w <= 0 || window_h <= 0 {
        return Err(Error::InvalidParameter(format!(
            "window {window_w}x{window_h} must be positive"
        )));
    }
    let FaceBox { x, y, width, height } = FaceBox::new(face.x, face.y, face.width, face.height)?;
    let (w, h) = (window_w, window_h);

    let x1 = x - width / 2;
    let y1 = y - height / 2;
    let x2 = x1 + 3 * width / 2;
    let y2 = y - height / 2;
    let x3 = x - width / 2;
    let y3 = y + 3 * height / 2;
    let x4 = x + 3 * width / 2;
    let y4 = y + 3 * height / 2;

    let label = if width * height <= SMALL_FACE_AREA {
        PositionLabel::Small
    } else if x1 <= 0 && y1 <= 0 {
        PositionLabel::TopLeft
    } else if x2 >= w && y2 <= 0 {
        PositionLabel::TopRight
    } else if x3 <= 0 && y3 >= h {
        PositionLabel::BottomLeft
    } else if x4 >= w && y4 >= h {
        PositionLabel::BottomRight
    } else if x1 <= 0 {
        PositionLabel::LeftEdge
    } else if y1 <= 0 {
        PositionLabel::TopEdge
    } else if x2 >= w {
        PositionLabel::RightEdge
    } else if y4 >= h {
        PositionLabel::BottomEdge
    } else {
        PositionLabel::Center
    };
    Ok(label)
}

/// Device orientation reading.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct OrientationSample {
    pub t_ms: u64,
    pub angle_deg: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RotationVerdict {
    Ok,
    TooFast,
}

/// `TooFast` when any two consecutive readings turn faster than 20°/s.
/// Angle differences wrap, so 359° → 1° is a 2° turn.
pub fn rotation_speed_check(samples: &[OrientationSample]) -> Result<RotationVerdict> {
    if samples.len() < 2 {
        return Err(Error::InvalidParameter("need at least two orientation samples".into()));
    }
    let mut verdict = RotationVerdict::Ok;
    for pair in samples.windows(2) {
        let (a, b) = (pair[0], pair[1]);
        if b.t_ms <= a.t_ms {
            return Err(Error::InvalidParameter("orientation timestamps must increase".into()));
        }
        let delta = (b.angle_deg - a.angle_deg + 180.0).rem_euclid(360.0) - 180.0;
        let rate = delta.abs() / ((b.t_ms - a.t_ms) as f64 / 1000.0);
        if rate > MAX_ROTATION_DEG_PER_S {
            verdict = RotationVerdict::TooFast;
        }
    }
    Ok(verdict)
}

/// Face crops for enrollment from a video.
///
/// `detect` returns the face box of frame `i`, if any. Only centred faces
/// that are not small are eligible; at most 50 are kept, spread evenly over
/// the eligible frames. An empty result means the video is unusable.
pub fn select_enrollment_frames<F>(frames: &[Frame], mut detect: F) -> Result<Vec<Frame>>
where
    F: FnMut(usize, &Frame) -> Result<Option<BBox>>,
{
    let mut eligible = Vec::new();
    for (i, frame) in frames.iter().enumerate() {
        let Some(b) = detect(i, frame)? else { continue };
        let Ok(face) = FaceBox::try_from(b) else { continue };
        let label = face_position(frame.width().into(), frame.height().into(), face)?;
        if label == PositionLabel::Center && b.fits_in(frame.width(), frame.height()) {
            eligible.push((i, b));
        }
    }
    let stride = eligible.len().div_ceil(MAX_ENROLLMENT_FRAMES).max(1);
    eligible
        .iter()
        .step_by(stride)
        .take(MAX_ENROLLMENT_FRAMES)
        .map(|&(i, b)| frames[i].crop(b))
        .collect()
}
