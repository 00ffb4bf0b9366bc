//! Dense optical flow (Horn–Schunck) and its mean magnitude.

use serde::{Deserialize, Serialize};

use super::SignalError;

/// Per-pixel flow in pixels/frame, row-major.
#[derive(Debug, Clone, PartialEq)]
pub struct FlowField {
    pub width: usize,
    pub height: usize,
    pub u: Vec<f64>,
    pub v: Vec<f64>,
}

impl FlowField {
    pub fn zeros(width: usize, height: usize) -> Self {
        FlowField {
            width,
            height,
            u: vec![0.0; width * height],
            v: vec![0.0; width * height],
        }
    }

    pub fn new(width: usize, height: usize, u: Vec<f64>, v: Vec<f64>) -> Self {
        assert_eq!(u.len(), width * height);
        assert_eq!(v.len(), width * height);
        FlowField {
            width,
            height,
            u,
            v,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FlowConfig {
    /// Smoothness weight; the regulariser is alpha^2 (|grad u|^2 + |grad v|^2).
    pub alpha: f64,
    pub iterations: usize,
}

impl Default for FlowConfig {
    fn default() -> Self {
        FlowConfig {
            alpha: 1.0,
            iterations: 100,
        }
    }
}

/// Mean Euclidean flow length over all pixels.
pub fn flow_magnitude(field: &FlowField) -> f64 {
    let n = field.u.len();
    if n == 0 {
        return 0.0;
    }
    let sum: f64 = field
        .u
        .iter()
        .zip(&field.v)
        .map(|(u, v)| u.hypot(*v))
        .sum();
    sum / n as f64
}

struct Plane<'a> {
    data: &'a [f64],
    w: usize,
    h: usize,
}

impl Plane<'_> {
    // replicate border
    #[inline]
    fn at(&self, x: usize, y: usize) -> f64 {
        self.data[y.min(self.h - 1) * self.w + x.min(self.w - 1)]
    }
}

/// Brightness derivatives averaged over the 2x2x2 cube spanned by the two
/// frames at each pixel.
fn derivatives(prev: &Plane, next: &Plane) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
    let (w, h) = (prev.w, prev.h);
    let mut ex = vec![0.0; w * h];
    let mut ey = vec![0.0; w * h];
    let mut et = vec![0.0; w * h];
    for y in 0..h {
        for x in 0..w {
            let (a, b) = (prev, next);
            let a00 = a.at(x, y);
            let a10 = a.at(x + 1, y);
            let a01 = a.at(x, y + 1);
            let a11 = a.at(x + 1, y + 1);
            let b00 = b.at(x, y);
            let b10 = b.at(x + 1, y);
            let b01 = b.at(x, y + 1);
            let b11 = b.at(x + 1, y + 1);
            let i = y * w + x;
            ex[i] = 0.25 * ((a10 - a00) + (a11 - a01) + (b10 - b00) + (b11 - b01));
            ey[i] = 0.25 * ((a01 - a00) + (a11 - a10) + (b01 - b00) + (b11 - b10));
            et[i] = 0.25 * ((b00 - a00) + (b10 - a10) + (b01 - a01) + (b11 - a11));
        }
    }
    (ex, ey, et)
}

/// Weighted neighbourhood mean: 1/6 for edge neighbours, 1/12 for diagonals.
fn local_mean(src: &[f64], w: usize, h: usize, dst: &mut [f64]) {
    let at = |x: isize, y: isize| -> f64 {
        let xc = x.clamp(0, w as isize - 1) as usize;
        let yc = y.clamp(0, h as isize - 1) as usize;
        src[yc * w + xc]
    };
    for y in 0..h as isize {
        for x in 0..w as isize {
            let edge = at(x - 1, y) + at(x + 1, y) + at(x, y - 1) + at(x, y + 1);
            let diag = at(x - 1, y - 1) + at(x + 1, y - 1) + at(x - 1, y + 1) + at(x + 1, y + 1);
            dst[y as usize * w + x as usize] = edge / 6.0 + diag / 12.0;
        }
    }
}

/// Horn–Schunck dense flow from `prev` to `next` (luma, row-major).
///
/// Jacobi iterations from a zero field; intensities are used on the raw
/// 0..255 scale.
pub fn dense_flow(
    prev: &[u8],
    next: &[u8],
    width: usize,
    height: usize,
    config: &FlowConfig,
) -> Result<FlowField, SignalError> {
    let n = width * height;
    if prev.len() != n || next.len() != n {
        return Err(SignalError::DimensionMismatch {
            expected: n,
            prev: prev.len(),
            next: next.len(),
        });
    }
    if width < 2 || height < 2 {
        return Err(SignalError::FrameTooSmall { width, height });
    }
    let a: Vec<f64> = prev.iter().map(|&p| f64::from(p)).collect();
    let b: Vec<f64> = next.iter().map(|&p| f64::from(p)).collect();
    let pa = Plane {
        data: &a,
        w: width,
        h: height,
    };
    let pb = Plane {
        data: &b,
        w: width,
        h: height,
    };
    let (ex, ey, et) = derivatives(&pa, &pb);
    let alpha2 = config.alpha * config.alpha;
    let denom: Vec<f64> = ex
        .iter()
        .zip(&ey)
        .map(|(x, y)| alpha2 + x * x + y * y)
        .collect();

    let mut u = vec![0.0; n];
    let mut v = vec![0.0; n];
    let mut u_bar = vec![0.0; n];
    let mut v_bar = vec![0.0; n];
    for _ in 0..config.iterations {
        local_mean(&u, width, height, &mut u_bar);
        local_mean(&v, width, height, &mut v_bar);
        for i in 0..n {
            let residual = (ex[i] * u_bar[i] + ey[i] * v_bar[i] + et[i]) / denom[i];
            u[i] = u_bar[i] - ex[i] * residual;
            v[i] = v_bar[i] - ey[i] * residual;
        }
    }
    Ok(FlowField {
        width,
        height,
        u,
        v,
    })
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    /// Smooth textured pattern sampled at a horizontal offset.
    pub(crate) fn pattern(w: usize, h: usize, shift: f64) -> Vec<u8> {
        let mut out = Vec::with_capacity(w * h);
        for y in 0..h {
            for x in 0..w {
                let xf = x as f64 - shift;
                let yf = y as f64;
                let val = 128.0
                    + 50.0 * (2.0 * std::f64::consts::PI * xf / 24.0).sin()
                    + 40.0 * (2.0 * std::f64::consts::PI * yf / 20.0).cos()
                    + 20.0 * (2.0 * std::f64::consts::PI * (xf + yf) / 32.0).sin();
                out.push(val.round().clamp(0.0, 255.0) as u8);
            }
        }
        out
    }

    #[test]
    fn identical_frames_give_zero_flow() {
        let f = pattern(32, 32, 0.0);
        let field = dense_flow(&f, &f, 32, 32, &FlowConfig::default()).unwrap();
        assert!(field.u.iter().chain(&field.v).all(|&x| x == 0.0));
        assert_eq!(flow_magnitude(&field), 0.0);
    }

    #[test]
    fn textureless_frames_give_zero_flow() {
        let f = vec![77u8; 64];
        let field = dense_flow(&f, &f, 8, 8, &FlowConfig::default()).unwrap();
        assert!(field.u.iter().chain(&field.v).all(|&x| x == 0.0));
    }

    #[test]
    fn one_pixel_translation() {
        let (w, h) = (64, 64);
        let prev = pattern(w, h, 0.0);
        let next = pattern(w, h, 1.0);
        let field = dense_flow(&prev, &next, w, h, &FlowConfig::default()).unwrap();
        let n = (w * h) as f64;
        let mean_u = field.u.iter().sum::<f64>() / n;
        let mean_abs_v = field.v.iter().map(|v| v.abs()).sum::<f64>() / n;
        let epe = field
            .u
            .iter()
            .zip(&field.v)
            .map(|(u, v)| (u - 1.0).hypot(*v))
            .sum::<f64>()
            / n;
        assert!((0.8..=1.2).contains(&mean_u), "mean u {mean_u}");
        assert!(mean_abs_v < 0.2, "mean |v| {mean_abs_v}");
        assert!(epe <= 0.5, "endpoint error {epe}");
    }

    #[test]
    fn dimension_errors() {
        assert!(matches!(
            dense_flow(&[0; 4], &[0; 6], 2, 2, &FlowConfig::default()),
            Err(SignalError::DimensionMismatch { .. })
        ));
        assert!(matches!(
            dense_flow(&[0; 3], &[0; 3], 3, 1, &FlowConfig::default()),
            Err(SignalError::FrameTooSmall { .. })
        ));
    }

    #[test]
    fn three_four_five() {
        let f = FlowField::new(3, 2, vec![3.0; 6], vec![4.0; 6]);
        assert_eq!(flow_magnitude(&f), 5.0);
        assert_eq!(flow_magnitude(&FlowField::zeros(4, 4)), 0.0);
    }

    fn brute_magnitude(f: &FlowField) -> f64 {
        let mut total = 0.0;
        for i in 0..f.width {
            for j in 0..f.height {
                let k = j * f.width + i;
                total += (f.u[k] * f.u[k] + f.v[k] * f.v[k]).sqrt();
            }
        }
        total / (f.width * f.height) as f64
    }

    proptest! {
        #[test]
        fn magnitude_matches_double_loop(w in 1usize..20, h in 1usize..20, seed in any::<u64>()) {
            use rand::{Rng, SeedableRng};
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let u = (0..w * h).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let v = (0..w * h).map(|_| rng.gen_range(-10.0..10.0)).collect();
            let f = FlowField::new(w, h, u, v);
            let a = flow_magnitude(&f);
            let b = brute_magnitude(&f);
            prop_assert!((a - b).abs() <= 1e-12 * b.abs().max(1e-300));
            let neg = FlowField::new(w, h, f.u.iter().map(|x| -x).collect(), f.v.iter().map(|x| -x).collect());
            prop_assert_eq!(flow_magnitude(&neg), a);
        }
    }
}
