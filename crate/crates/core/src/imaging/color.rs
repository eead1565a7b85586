use super::Frame;

/// Luma with ITU-R BT.601 weights. Single-channel input is returned as-is.
pub fn to_grayscale(frame: &Frame) -> Frame {
    if frame.is_gray() {
        return frame.clone();
    }
    let data = frame
        .data()
        .chunks_exact(3)
        .map(|p| luma(p[0], p[1], p[2]))
        .collect();
    frame.derive(1, data)
}

#[inline]
pub(crate) fn luma(r: u8, g: u8, b: u8) -> u8 {
    // Fixed-point 0.299/0.587/0.114 scaled by 2^16, rounded half up.
    let y = 19595 * u32::from(r) + 38470 * u32::from(g) + 7471 * u32::from(b);
    ((y + 32768) >> 16).min(255) as u8
}

/// HSV sample with hue in half-degrees `[0, 180)` and S, V in `[0, 255]`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Hsv {
    pub h: u8,
    pub s: u8,
    pub v: u8,
}

impl Hsv {
    pub fn from_rgb(r: u8, g: u8, b: u8) -> Hsv {
        let max = r.max(g).max(b);
        let min = r.min(g).min(b);
        let v = max;
        if max == 0 {
            return Hsv { h: 0, s: 0, v };
        }
        let delta = f32::from(max - min);
        let s = (255.0 * delta / f32::from(max)).round() as u8;
        if delta == 0.0 {
            return Hsv { h: 0, s, v };
        }
        let (r, g, b) = (f32::from(r), f32::from(g), f32::from(b));
        let mut deg = if max as f32 == r {
            60.0 * (g - b) / delta
        } else if max as f32 == g {
            120.0 + 60.0 * (b - r) / delta
        } else {
            240.0 + 60.0 * (r - g) / delta
        };
        if deg < 0.0 {
            deg += 360.0;
        }
        let h = (deg / 2.0).round() as u32 % 180;
        Hsv { h: h as u8, s, v }
    }

    pub fn to_rgb(self) -> [u8; 3] {
        let v = f32::from(self.v);
        let s = f32::from(self.s) / 255.0;
        let deg = f32::from(self.h) * 2.0;
        let c = v * s;
        let hp = deg / 60.0;
        let x = c * (1.0 - ((hp % 2.0) - 1.0).abs());
        let (r, g, b) = match hp as u32 {
            0 => (c, x, 0.0),
            1 => (x, c, 0.0),
            2 => (0.0, c, x),
            3 => (0.0, x, c),
            4 => (x, 0.0, c),
            _ => (c, 0.0, x),
        };
        let m = v - c;
        let q = |t: f32| (t + m).round().clamp(0.0, 255.0) as u8;
        [q(r), q(g), q(b)]
    }

    /// Component-wise inclusive range check.
    pub fn within(self, lo: Hsv, hi: Hsv) -> bool {
        (lo.h..=hi.h).contains(&self.h)
            && (lo.s..=hi.s).contains(&self.s)
            && (lo.v..=hi.v).contains(&self.v)
    }
}

/// Per-pixel HSV conversion of an RGB frame.
pub fn rgb_to_hsv(frame: &Frame) -> Vec<Hsv> {
    (0..frame.height())
        .flat_map(|y| (0..frame.width()).map(move |x| (x, y)))
        .map(|(x, y)| {
            let [r, g, b] = frame.rgb_at(x, y);
            Hsv::from_rgb(r, g, b)
        })
        .collect()
}

/// CIE L*a*b* under D65 with L in `[0, 100]`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Lab {
    pub l: f32,
    pub a: f32,
    pub b: f32,
}

const WHITE_X: f32 = 0.950_47;
const WHITE_Z: f32 = 1.088_83;
const DELTA: f32 = 6.0 / 29.0;

fn srgb_to_linear(c: u8) -> f32 {
    static LUT: std::sync::OnceLock<[f32; 256]> = std::sync::OnceLock::new();
    LUT.get_or_init(|| std::array::from_fn(|i| srgb_to_linear_exact(i as u8)))[c as usize]
}

fn srgb_to_linear_exact(c: u8) -> f32 {
    let c = f32::from(c) / 255.0;
    if c <= 0.040_45 {
        c / 12.92
    } else {
        ((c + 0.055) / 1.055).powf(2.4)
    }
}

/// Same result as [`linear_to_srgb_exact`] via the smallest linear value
/// that encodes to each level, found once by bisecting on the float bits.
fn linear_to_srgb(c: f32) -> u8 {
    static BOUNDS: std::sync::OnceLock<[f32; 255]> = std::sync::OnceLock::new();
    let bounds = BOUNDS.get_or_init(|| {
        std::array::from_fn(|i| {
            let level = i as u8 + 1;
            let (mut lo, mut hi) = (0u32, 1.0f32.to_bits());
            while lo < hi {
                let mid = lo + (hi - lo) / 2;
                if linear_to_srgb_exact(f32::from_bits(mid)) >= level {
                    hi = mid;
                } else {
                    lo = mid + 1;
                }
            }
            f32::from_bits(lo)
        })
    });
    bounds.partition_point(|&b| b <= c) as u8
}

fn linear_to_srgb_exact(c: f32) -> u8 {
    let c = c.clamp(0.0, 1.0);
    let s = if c <= 0.003_130_8 {
        12.92 * c
    } else {
        1.055 * c.powf(1.0 / 2.4) - 0.055
    };
    (s * 255.0).round().clamp(0.0, 255.0) as u8
}

fn lab_f(t: f32) -> f32 {
    if t > DELTA * DELTA * DELTA {
        t.cbrt()
    } else {
        t / (3.0 * DELTA * DELTA) + 4.0 / 29.0
    }
}

fn lab_f_inv(t: f32) -> f32 {
    if t > DELTA {
        t * t * t
    } else {
        3.0 * DELTA * DELTA * (t - 4.0 / 29.0)
    }
}

pub fn rgb_to_lab(rgb: [u8; 3]) -> Lab {
    let [r, g, b] = rgb.map(srgb_to_linear);
    let x = 0.412_456_4 * r + 0.357_576_1 * g + 0.180_437_5 * b;
    let y = 0.212_672_9 * r + 0.715_152_2 * g + 0.072_175 * b;
    let z = 0.019_333_9 * r + 0.119_192 * g + 0.950_304_1 * b;
    let (fx, fy, fz) = (lab_f(x / WHITE_X), lab_f(y), lab_f(z / WHITE_Z));
    Lab {
        l: (116.0 * fy - 16.0).max(0.0),
        a: 500.0 * (fx - fy),
        b: 200.0 * (fy - fz),
    }
}

pub fn lab_to_rgb(lab: Lab) -> [u8; 3] {
    let fy = (lab.l + 16.0) / 116.0;
    let fx = fy + lab.a / 500.0;
    let fz = fy - lab.b / 200.0;
    let x = WHITE_X * lab_f_inv(fx);
    let y = lab_f_inv(fy);
    let z = WHITE_Z * lab_f_inv(fz);
    let r = 3.240_454_2 * x - 1.537_138_5 * y - 0.498_531_4 * z;
    let g = -0.969_266 * x + 1.876_010_8 * y + 0.041_556 * z;
    let b = 0.055_643_4 * x - 0.204_025_9 * y + 1.057_225_2 * z;
    [linear_to_srgb(r), linear_to_srgb(g), linear_to_srgb(b)]
}

/// L* of every pixel rescaled from `[0, 100]` to `[0, 255]`.
pub fn lightness_channel(frame: &Frame) -> Frame {
    let data = (0..frame.height())
        .flat_map(|y| (0..frame.width()).map(move |x| (x, y)))
        .map(|(x, y)| {
            let l = rgb_to_lab(frame.rgb_at(x, y)).l;
            (l * 255.0 / 100.0).round().clamp(0.0, 255.0) as u8
        })
        .collect();
    frame.derive(1, data)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn lookup_tables_match_the_formulas() {
        for c in 0..=255u8 {
            assert_eq!(srgb_to_linear(c), srgb_to_linear_exact(c));
        }
        for i in -1000..=101_000 {
            let c = i as f32 / 100_000.0;
            assert_eq!(linear_to_srgb(c), linear_to_srgb_exact(c), "{c}");
        }
        for c in 0..=255u8 {
            let lin = srgb_to_linear_exact(c);
            for x in [lin, f32::from_bits(lin.to_bits().saturating_sub(1)), f32::from_bits(lin.to_bits() + 1)] {
                assert_eq!(linear_to_srgb(x), linear_to_srgb_exact(x), "{x}");
            }
        }
        assert_eq!(linear_to_srgb(f32::NAN), linear_to_srgb_exact(f32::NAN));
    }

    fn px(r: u8, g: u8, b: u8) -> Frame {
        Frame::rgb(1, 1, vec![r, g, b]).unwrap()
    }

    #[test]
    fn grayscale_reference_points() {
        assert_eq!(to_grayscale(&px(0, 0, 0)).data(), &[0]);
        assert_eq!(to_grayscale(&px(255, 255, 255)).data(), &[255]);
        // 0.299*100 + 0.587*50 + 0.114*200 = 82.05
        assert_eq!(to_grayscale(&px(100, 50, 200)).data(), &[82]);
    }

    #[test]
    fn grayscale_matches_float_weights_everywhere() {
        for r in (0..=255u16).step_by(5) {
            for g in (0..=255u16).step_by(7) {
                for b in (0..=255u16).step_by(11) {
                    let want =
                        (0.299 * r as f64 + 0.587 * g as f64 + 0.114 * b as f64).round() as u8;
                    let got = luma(r as u8, g as u8, b as u8);
                    assert!(want.abs_diff(got) <= 1, "{r},{g},{b}: {got} vs {want}");
                }
            }
        }
    }

    #[test]
    fn grayscale_is_idempotent_on_gray() {
        let f = Frame::gray(2, 1, vec![3, 9]).unwrap();
        assert_eq!(to_grayscale(&f), f);
    }

    #[test]
    fn hsv_reference_points() {
        assert_eq!(Hsv::from_rgb(128, 128, 128).s, 0);
        assert_eq!(Hsv::from_rgb(255, 0, 0), Hsv { h: 0, s: 255, v: 255 });
        assert_eq!(Hsv::from_rgb(0, 0, 255), Hsv { h: 120, s: 255, v: 255 });
        assert_eq!(Hsv::from_rgb(0, 255, 0), Hsv { h: 60, s: 255, v: 255 });
    }

    #[test]
    fn hsv_roundtrip_is_close() {
        for h in (0..180u8).step_by(3) {
            let hsv = Hsv { h, s: 200, v: 180 };
            let back = {
                let [r, g, b] = hsv.to_rgb();
                Hsv::from_rgb(r, g, b)
            };
            assert!(back.h.abs_diff(hsv.h) <= 1 || back.h.abs_diff(hsv.h) == 179);
            assert!(back.s.abs_diff(hsv.s) <= 2);
            assert_eq!(back.v, hsv.v);
        }
    }

    #[test]
    fn lightness_reference_points() {
        assert_eq!(lightness_channel(&px(0, 0, 0)).data(), &[0]);
        assert_eq!(lightness_channel(&px(255, 255, 255)).data(), &[255]);
        let mid = lightness_channel(&px(119, 119, 119)).data()[0];
        assert!(mid.abs_diff(128) <= 2, "L of 119 gray = {mid}");
    }

    #[test]
    fn lab_roundtrip() {
        for &rgb in &[[10u8, 200, 30], [250, 250, 250], [0, 0, 0], [128, 64, 32], [90, 90, 250]] {
            let back = lab_to_rgb(rgb_to_lab(rgb));
            for i in 0..3 {
                assert!(back[i].abs_diff(rgb[i]) <= 1, "{rgb:?} -> {back:?}");
            }
        }
    }
}
