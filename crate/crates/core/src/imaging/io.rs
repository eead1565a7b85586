use std::path::Path;

use image::{DynamicImage, GrayImage, ImageFormat, RgbImage};

use super::Frame;
use crate::error::{Error, Result};

fn from_dynamic(img: DynamicImage) -> Result<Frame> {
    match img {
        DynamicImage::ImageLuma8(g) => {
            let (w, h) = g.dimensions();
            Frame::gray(w, h, g.into_raw())
        }
        other => {
            let rgb = other.into_rgb8();
            let (w, h) = rgb.dimensions();
            Frame::rgb(w, h, rgb.into_raw())
        }
    }
}

pub fn decode_png(bytes: &[u8]) -> Result<Frame> {
    from_dynamic(image::load_from_memory_with_format(bytes, ImageFormat::Png)?)
}

pub fn encode_png(frame: &Frame) -> Result<Vec<u8>> {
    let mut out = std::io::Cursor::new(Vec::new());
    let (w, h) = (frame.width(), frame.height());
    let img = if frame.is_gray() {
        DynamicImage::ImageLuma8(
            GrayImage::from_raw(w, h, frame.data().to_vec())
                .ok_or_else(|| Error::InvalidFrame("gray buffer size".into()))?,
        )
    } else {
        DynamicImage::ImageRgb8(
            RgbImage::from_raw(w, h, frame.data().to_vec())
                .ok_or_else(|| Error::InvalidFrame("rgb buffer size".into()))?,
        )
    };
    img.write_to(&mut out, ImageFormat::Png)?;
    Ok(out.into_inner())
}

pub fn read_png(path: impl AsRef<Path>) -> Result<Frame> {
    decode_png(&std::fs::read(path)?)
}

pub fn write_png(frame: &Frame, path: impl AsRef<Path>) -> Result<()> {
    std::fs::write(path, encode_png(frame)?)?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn png_roundtrip_preserves_samples() {
        let rgb = Frame::rgb(3, 2, (0..18).map(|v| v * 13).collect()).unwrap();
        assert_eq!(decode_png(&encode_png(&rgb).unwrap()).unwrap(), rgb);
        let gray = Frame::gray(3, 2, vec![0, 50, 100, 150, 200, 250]).unwrap();
        assert_eq!(decode_png(&encode_png(&gray).unwrap()).unwrap(), gray);
    }

    #[test]
    fn garbage_is_an_error() {
        assert!(decode_png(b"not a png").is_err());
    }
}
