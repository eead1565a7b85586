use super::{require_gray, Frame};
use crate::error::Result;

/// Sliding 3-wide reduction along rows then columns. `edge` stands in for
/// samples outside the frame.
fn square3(src: &Frame, edge: u8, pick: fn(u8, u8) -> u8) -> Frame {
    let (w, h) = (src.width() as usize, src.height() as usize);
    let data = src.data();
    let mut rows = vec![0u8; data.len()];
    for y in 0..h {
        let row = &data[y * w..(y + 1) * w];
        let out = &mut rows[y * w..(y + 1) * w];
        for x in 0..w {
            let left = if x > 0 { row[x - 1] } else { edge };
            let right = if x + 1 < w { row[x + 1] } else { edge };
            out[x] = pick(pick(left, row[x]), right);
        }
    }
    let mut out = vec![0u8; data.len()];
    for y in 0..h {
        for x in 0..w {
            let up = if y > 0 { rows[(y - 1) * w + x] } else { edge };
            let down = if y + 1 < h { rows[(y + 1) * w + x] } else { edge };
            out[y * w + x] = pick(pick(up, rows[y * w + x]), down);
        }
    }
    src.derive(1, out)
}

/// 3×3 square dilation; pixels beyond the border count as background.
pub fn dilate(bin: &Frame) -> Result<Frame> {
    require_gray(bin, "dilate")?;
    Ok(square3(bin, 0, u8::max))
}

/// 3×3 square erosion; pixels beyond the border count as foreground so
/// shapes touching the edge are not eaten away.
pub fn erode(bin: &Frame) -> Result<Frame> {
    require_gray(bin, "erode")?;
    Ok(square3(bin, 255, u8::min))
}

/// Morphological closing with a 3×3 square: `iterations` dilations followed
/// by the same number of erosions.
pub fn binary_closing(bin: &Frame, iterations: u32) -> Result<Frame> {
    require_gray(bin, "binary_closing")?;
    let mut out = bin.clone();
    for _ in 0..iterations {
        out = square3(&out, 0, u8::max);
    }
    for _ in 0..iterations {
        out = square3(&out, 255, u8::min);
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn block_frame(w: u32, h: u32, x0: u32, y0: u32, bw: u32, bh: u32) -> Frame {
        let mut f = Frame::filled(w, h, 1, 0).unwrap();
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                f.data_mut()[(y * w + x) as usize] = 255;
            }
        }
        f
    }

    #[test]
    fn closing_empty_stays_empty() {
        let f = Frame::filled(12, 12, 1, 0).unwrap();
        assert_eq!(binary_closing(&f, 1).unwrap(), f);
    }

    #[test]
    fn closing_solid_block_unchanged() {
        let f = block_frame(20, 20, 5, 5, 10, 10);
        assert_eq!(binary_closing(&f, 1).unwrap(), f);
    }

    #[test]
    fn closing_fills_pinhole() {
        let mut f = block_frame(20, 20, 5, 5, 10, 10);
        f.data_mut()[(9 * 20 + 9) as usize] = 0;
        assert_eq!(binary_closing(&f, 1).unwrap(), block_frame(20, 20, 5, 5, 10, 10));
    }

    #[test]
    fn closing_bridges_one_pixel_gap() {
        let mut f = block_frame(20, 10, 2, 2, 5, 5);
        for y in 2..7 {
            for x in 8..13 {
                f.data_mut()[y * 20 + x] = 255;
            }
        }
        let c = binary_closing(&f, 1).unwrap();
        for y in 2..7 {
            assert_eq!(c.data()[y * 20 + 7], 255);
        }
    }

    #[test]
    fn zero_iterations_is_identity() {
        let f = block_frame(9, 9, 1, 1, 3, 2);
        assert_eq!(binary_closing(&f, 0).unwrap(), f);
    }

    proptest! {
        #[test]
        fn closing_is_idempotent(
            w in 1u32..24,
            h in 1u32..24,
            seed in proptest::collection::vec(any::<bool>(), 576),
        ) {
            let data = (0..(w * h) as usize).map(|i| if seed[i] { 255 } else { 0 }).collect();
            let f = Frame::gray(w, h, data).unwrap();
            let once = binary_closing(&f, 1).unwrap();
            let twice = binary_closing(&once, 1).unwrap();
            prop_assert_eq!(once, twice);
        }

        #[test]
        fn closing_is_extensive(
            seed in proptest::collection::vec(any::<bool>(), 256),
        ) {
            let data = seed.iter().map(|&b| if b { 255 } else { 0 }).collect();
            let f = Frame::gray(16, 16, data).unwrap();
            let c = binary_closing(&f, 1).unwrap();
            for (&a, &b) in f.data().iter().zip(c.data()) {
                prop_assert!(b >= a);
            }
        }
    }
}
