//! Raster primitives shared by every analysis stage.
//!
//! Frames are plain row-major 8-bit buffers. A "binary" frame is a
//! single-channel frame whose samples are restricted to `{0, 255}`.

mod color;
mod components;
mod io;
mod morphology;
mod threshold;

pub use color::{lab_to_rgb, lightness_channel, rgb_to_hsv, rgb_to_lab, to_grayscale, Hsv, Lab};
pub use components::{connected_components, LabelMap, RegionStats};
pub use io::{decode_png, encode_png, read_png, write_png};
pub use morphology::{binary_closing, dilate, erode};
pub use threshold::{
    adaptive_threshold_gaussian, binary_threshold, otsu_level, otsu_threshold,
};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Axis-aligned box in pixel coordinates; `x`/`y` is the top-left corner.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct BBox {
    pub x: u32,
    pub y: u32,
    pub w: u32,
    pub h: u32,
}

impl BBox {
    pub fn new(x: u32, y: u32, w: u32, h: u32) -> Self {
        Self { x, y, w, h }
    }

    pub fn area(&self) -> u64 {
        u64::from(self.w) * u64::from(self.h)
    }

    pub fn center_x(&self) -> f64 {
        f64::from(self.x) + f64::from(self.w) / 2.0
    }

    pub fn contains(&self, px: u32, py: u32) -> bool {
        px >= self.x && py >= self.y && px < self.x + self.w && py < self.y + self.h
    }

    pub fn fits_in(&self, width: u32, height: u32) -> bool {
        self.w > 0
            && self.h > 0
            && u64::from(self.x) + u64::from(self.w) <= u64::from(width)
            && u64::from(self.y) + u64::from(self.h) <= u64::from(height)
    }
}

/// An 8-bit raster with 1 (intensity) or 3 (RGB) interleaved channels.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Frame {
    width: u32,
    height: u32,
    channels: u8,
    data: Vec<u8>,
    /// Milliseconds since the Unix epoch.
    pub timestamp_ms: u64,
    pub camera_id: String,
}

impl Frame {
    pub fn new(width: u32, height: u32, channels: u8, data: Vec<u8>) -> Result<Self> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidFrame(format!("{width}x{height} has no pixels")));
        }
        if channels != 1 && channels != 3 {
            return Err(Error::InvalidFrame(format!("unsupported channel count {channels}")));
        }
        let expected = width as usize * height as usize * channels as usize;
        if data.len() != expected {
            return Err(Error::InvalidFrame(format!(
                "buffer holds {} bytes, {width}x{height}x{channels} needs {expected}",
                data.len()
            )));
        }
        Ok(Self {
            width,
            height,
            channels,
            data,
            timestamp_ms: 0,
            camera_id: String::new(),
        })
    }

    pub fn gray(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 1, data)
    }

    pub fn rgb(width: u32, height: u32, data: Vec<u8>) -> Result<Self> {
        Self::new(width, height, 3, data)
    }

    /// A frame with every sample set to `value`.
    pub fn filled(width: u32, height: u32, channels: u8, value: u8) -> Result<Self> {
        let len = width as usize * height as usize * channels as usize;
        Self::new(width, height, channels, vec![value; len])
    }

    pub fn with_meta(mut self, camera_id: impl Into<String>, timestamp_ms: u64) -> Self {
        self.camera_id = camera_id.into();
        self.timestamp_ms = timestamp_ms;
        self
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn channels(&self) -> u8 {
        self.channels
    }

    pub fn dims(&self) -> (u32, u32, u8) {
        (self.width, self.height, self.channels)
    }

    pub fn pixel_count(&self) -> usize {
        self.width as usize * self.height as usize
    }

    pub fn data(&self) -> &[u8] {
        &self.data
    }

    pub fn data_mut(&mut self) -> &mut [u8] {
        &mut self.data
    }

    pub fn into_data(self) -> Vec<u8> {
        self.data
    }

    pub fn is_gray(&self) -> bool {
        self.channels == 1
    }

    /// Sample at `(x, y)` for single-channel frames.
    #[inline]
    pub fn at(&self, x: u32, y: u32) -> u8 {
        debug_assert!(self.channels == 1);
        self.data[y as usize * self.width as usize + x as usize]
    }

    /// RGB triple at `(x, y)`; single-channel frames replicate the sample.
    pub fn rgb_at(&self, x: u32, y: u32) -> [u8; 3] {
        let idx = (y as usize * self.width as usize + x as usize) * self.channels as usize;
        if self.channels == 1 {
            let v = self.data[idx];
            [v, v, v]
        } else {
            [self.data[idx], self.data[idx + 1], self.data[idx + 2]]
        }
    }

    /// Same shape and metadata, new samples.
    pub(crate) fn derive(&self, channels: u8, data: Vec<u8>) -> Frame {
        debug_assert_eq!(data.len(), self.pixel_count() * channels as usize);
        Frame {
            width: self.width,
            height: self.height,
            channels,
            data,
            timestamp_ms: self.timestamp_ms,
            camera_id: self.camera_id.clone(),
        }
    }

    pub fn crop(&self, bbox: BBox) -> Result<Frame> {
        if !bbox.fits_in(self.width, self.height) {
            return Err(Error::InvalidParameter(format!(
                "crop {bbox:?} outside {}x{} frame",
                self.width, self.height
            )));
        }
        let c = self.channels as usize;
        let mut data = Vec::with_capacity(bbox.area() as usize * c);
        for y in bbox.y..bbox.y + bbox.h {
            let start = (y as usize * self.width as usize + bbox.x as usize) * c;
            data.extend_from_slice(&self.data[start..start + bbox.w as usize * c]);
        }
        Ok(Frame {
            width: bbox.w,
            height: bbox.h,
            channels: self.channels,
            data,
            timestamp_ms: self.timestamp_ms,
            camera_id: self.camera_id.clone(),
        })
    }

    /// Bilinear resample to `width` x `height`.
    pub fn resize(&self, width: u32, height: u32) -> Result<Frame> {
        if width == 0 || height == 0 {
            return Err(Error::InvalidParameter("resize target has no pixels".into()));
        }
        if width == self.width && height == self.height {
            return Ok(self.clone());
        }
        let c = self.channels as usize;
        let sx = self.width as f32 / width as f32;
        let sy = self.height as f32 / height as f32;
        let max_x = (self.width - 1) as f32;
        let max_y = (self.height - 1) as f32;
        let mut data = Vec::with_capacity(width as usize * height as usize * c);
        for y in 0..height {
            let fy = ((y as f32 + 0.5) * sy - 0.5).clamp(0.0, max_y);
            let y0 = fy.floor() as usize;
            let y1 = (y0 + 1).min(self.height as usize - 1);
            let wy = fy - y0 as f32;
            for x in 0..width {
                let fx = ((x as f32 + 0.5) * sx - 0.5).clamp(0.0, max_x);
                let x0 = fx.floor() as usize;
                let x1 = (x0 + 1).min(self.width as usize - 1);
                let wx = fx - x0 as f32;
                for ch in 0..c {
                    let p = |xx: usize, yy: usize| {
                        self.data[(yy * self.width as usize + xx) * c + ch] as f32
                    };
                    let top = p(x0, y0) * (1.0 - wx) + p(x1, y0) * wx;
                    let bottom = p(x0, y1) * (1.0 - wx) + p(x1, y1) * wx;
                    let v = top * (1.0 - wy) + bottom * wy;
                    data.push(v.round().clamp(0.0, 255.0) as u8);
                }
            }
        }
        Ok(Frame {
            width,
            height,
            channels: self.channels,
            data,
            timestamp_ms: self.timestamp_ms,
            camera_id: self.camera_id.clone(),
        })
    }

    /// Mean over all samples.
    pub fn mean(&self) -> f64 {
        self.data.iter().map(|&v| f64::from(v)).sum::<f64>() / self.data.len() as f64
    }
}

/// 256-bin count histogram of a single channel.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Histogram256 {
    pub bins: [u64; 256],
    pub total: u64,
}

impl Histogram256 {
    pub fn from_samples<'a>(samples: impl IntoIterator<Item = &'a u8>) -> Self {
        let mut bins = [0u64; 256];
        let mut total = 0;
        for &v in samples {
            bins[v as usize] += 1;
            total += 1;
        }
        Self { bins, total }
    }

    /// Pixels whose value lies in `range` (inclusive bounds).
    pub fn count_in(&self, range: std::ops::RangeInclusive<u8>) -> u64 {
        let (lo, hi) = (*range.start() as usize, *range.end() as usize);
        self.bins[lo..=hi].iter().sum()
    }

    pub fn fraction_in(&self, range: std::ops::RangeInclusive<u8>) -> f64 {
        if self.total == 0 {
            return 0.0;
        }
        self.count_in(range) as f64 / self.total as f64
    }
}

/// Histogram of a single-channel frame. RGB input is converted to luma first.
pub fn intensity_histogram(frame: &Frame) -> Histogram256 {
    if frame.is_gray() {
        Histogram256::from_samples(frame.data())
    } else {
        Histogram256::from_samples(to_grayscale(frame).data())
    }
}

/// Fail unless `frame` has a single channel.
pub(crate) fn require_gray(frame: &Frame, op: &str) -> Result<()> {
    if frame.is_gray() {
        Ok(())
    } else {
        Err(Error::InvalidParameter(format!("{op} needs a single-channel frame")))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn frame_rejects_bad_buffers() {
        assert!(Frame::gray(0, 4, vec![]).is_err());
        assert!(Frame::gray(2, 2, vec![0; 3]).is_err());
        assert!(Frame::new(2, 2, 2, vec![0; 8]).is_err());
        assert!(Frame::rgb(2, 2, vec![0; 12]).is_ok());
    }

    #[test]
    fn histogram_of_constant_frame() {
        let f = Frame::filled(2, 2, 1, 7).unwrap();
        let h = intensity_histogram(&f);
        assert_eq!(h.bins[7], 4);
        assert_eq!(h.total, 4);
        assert_eq!(h.bins.iter().sum::<u64>(), 4);
    }

    #[test]
    fn histogram_sums_to_pixel_count() {
        let data: Vec<u8> = (0..64 * 64).map(|i| ((i * 7919) % 251) as u8).collect();
        let f = Frame::gray(64, 64, data).unwrap();
        let h = intensity_histogram(&f);
        assert_eq!(h.bins.iter().sum::<u64>(), 4096);
        assert_eq!(h.total, 4096);
    }

    #[test]
    fn crop_and_resize() {
        let data: Vec<u8> = (0..16).collect();
        let f = Frame::gray(4, 4, data).unwrap();
        let c = f.crop(BBox::new(1, 1, 2, 2)).unwrap();
        assert_eq!(c.data(), &[5, 6, 9, 10]);
        assert!(f.crop(BBox::new(3, 3, 2, 2)).is_err());
        let r = Frame::filled(10, 10, 3, 90).unwrap().resize(96, 96).unwrap();
        assert!(r.data().iter().all(|&v| v == 90));
    }
}
