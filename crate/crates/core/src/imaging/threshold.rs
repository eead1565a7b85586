use super::{intensity_histogram, require_gray, Frame, Histogram256};
use crate::error::{Error, Result};

/// `255` where the sample is strictly greater than `t`, else `0`.
pub fn binary_threshold(gray: &Frame, t: u8) -> Result<Frame> {
    require_gray(gray, "binary_threshold")?;
    let data = gray
        .data()
        .iter()
        .map(|&v| if v > t { 255 } else { 0 })
        .collect();
    Ok(gray.derive(1, data))
}

fn gaussian_kernel(block: usize) -> Vec<f32> {
    // Same sigma heuristic as the usual block-size driven adaptive threshold.
    let sigma = 0.3 * ((block as f32 - 1.0) * 0.5 - 1.0) + 0.8;
    let half = (block / 2) as isize;
    let mut k: Vec<f32> = (-half..=half)
        .map(|i| (-((i * i) as f32) / (2.0 * sigma * sigma)).exp())
        .collect();
    let sum: f32 = k.iter().sum();
    k.iter_mut().for_each(|w| *w /= sum);
    k
}

/// Local threshold against the Gaussian-weighted mean of each `block`×`block`
/// neighbourhood minus `c`. Borders replicate the edge sample.
pub fn adaptive_threshold_gaussian(gray: &Frame, block: u32, c: i32) -> Result<Frame> {
    require_gray(gray, "adaptive_threshold_gaussian")?;
    if block < 3 || block.is_multiple_of(2) {
        return Err(Error::InvalidParameter(format!(
            "adaptive block size must be odd and >= 3, got {block}"
        )));
    }
    let kernel = gaussian_kernel(block as usize);
    let half = (block / 2) as isize;
    let (w, h) = (gray.width() as isize, gray.height() as isize);
    let src = gray.data();

    let mut horiz = vec![0f32; src.len()];
    for y in 0..h {
        let row = &src[(y * w) as usize..((y + 1) * w) as usize];
        for x in 0..w {
            let mut acc = 0f32;
            for (k, &wt) in kernel.iter().enumerate() {
                let xx = (x + k as isize - half).clamp(0, w - 1);
                acc += wt * f32::from(row[xx as usize]);
            }
            horiz[(y * w + x) as usize] = acc;
        }
    }

    let mut out = vec![0u8; src.len()];
    for y in 0..h {
        for x in 0..w {
            let mut mean = 0f32;
            for (k, &wt) in kernel.iter().enumerate() {
                let yy = (y + k as isize - half).clamp(0, h - 1);
                mean += wt * horiz[(yy * w + x) as usize];
            }
            let idx = (y * w + x) as usize;
            if f32::from(src[idx]) > mean - c as f32 {
                out[idx] = 255;
            }
        }
    }
    Ok(gray.derive(1, out))
}

/// Otsu level for a histogram: the `t` maximizing between-class variance
/// when the classes are `v <= t` and `v > t`. Ties resolve to the smallest
/// `t`, so a constant histogram yields `0`.
pub fn otsu_level(hist: &Histogram256) -> u8 {
    let n = hist.total;
    let sum: u64 = hist
        .bins
        .iter()
        .enumerate()
        .map(|(v, &c)| v as u64 * c)
        .sum();

    // Between-class variance scaled by n^2 is (n*s0 - n0*S)^2 / (n0*n1).
    // Comparing those fractions by cross-multiplication is exact in u128 for
    // frames up to 2^19 pixels; larger frames fall back to f64.
    let exact = n <= 1 << 19;

    let mut best_t = 0u8;
    let mut best_num = 0u128;
    let mut best_den = 1u128;
    let mut best_f = 0f64;

    let mut n0 = 0u64;
    let mut s0 = 0u64;
    for t in 0..256usize {
        n0 += hist.bins[t];
        s0 += t as u64 * hist.bins[t];
        let n1 = n - n0;
        if n0 == 0 || n1 == 0 {
            continue;
        }
        let diff = (u128::from(n) * u128::from(s0)).abs_diff(u128::from(n0) * u128::from(sum));
        if exact {
            let num = diff * diff;
            let den = u128::from(n0) * u128::from(n1);
            if num * best_den > best_num * den {
                best_num = num;
                best_den = den;
                best_t = t as u8;
            }
        } else {
            let d = diff as f64;
            let val = d * d / (n0 as f64 * n1 as f64);
            if val > best_f {
                best_f = val;
                best_t = t as u8;
            }
        }
    }
    best_t
}

/// Otsu's global threshold and the binarization it induces.
pub fn otsu_threshold(gray: &Frame) -> Result<(u8, Frame)> {
    require_gray(gray, "otsu_threshold")?;
    let t = otsu_level(&intensity_histogram(gray));
    Ok((t, binary_threshold(gray, t)?))
}
