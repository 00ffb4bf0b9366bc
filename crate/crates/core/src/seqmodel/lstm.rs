//! LSTM cell with gate order `[input, forget, candidate, output]`.

use super::loss::sigmoid;
use super::tensor::{mat_vec_acc, outer_acc, vec_mat_acc};

/// Borrowed view of the recurrent weights.
#[derive(Clone, Copy)]
pub struct LstmWeights<'a> {
    /// `(input_dim, 4 * hidden)`
    pub w_x: &'a [f64],
    /// `(hidden, 4 * hidden)`
    pub w_h: &'a [f64],
    /// `4 * hidden`
    pub b: &'a [f64],
    pub input_dim: usize,
    pub hidden: usize,
}

/// Result of one cell step. `h` feeds the recurrence, `out` (h with the
/// output dropout mask applied) feeds the heads.
#[derive(Debug, Clone, PartialEq)]
pub struct StepOutput {
    pub h: Vec<f64>,
    pub c: Vec<f64>,
    pub out: Vec<f64>,
    /// Post-activation gates, `4 * hidden`.
    pub gates: Vec<f64>,
}

/// One LSTM step. Masks are inverted-dropout multipliers (0 or 1/keep);
/// `None` means identity.
pub fn lstm_step(
    w: LstmWeights<'_>,
    x: &[f64],
    h_prev: &[f64],
    c_prev: &[f64],
    in_mask: Option<&[f64]>,
    out_mask: Option<&[f64]>,
) -> StepOutput {
    let hd = w.hidden;
    let mut z = w.b.to_vec();
    match in_mask {
        Some(m) => {
            let xm: Vec<f64> = x.iter().zip(m).map(|(a, b)| a * b).collect();
            vec_mat_acc(&xm, w.w_x, 4 * hd, &mut z);
        }
        None => vec_mat_acc(x, w.w_x, 4 * hd, &mut z),
    }
    vec_mat_acc(h_prev, w.w_h, 4 * hd, &mut z);
    for (j, zj) in z.iter_mut().enumerate() {
        *zj = if (2 * hd..3 * hd).contains(&j) {
            zj.tanh()
        } else {
            sigmoid(*zj)
        };
    }
    let mut c = vec![0.0; hd];
    let mut h = vec![0.0; hd];
    for k in 0..hd {
        let (i, f, g, o) = (z[k], z[hd + k], z[2 * hd + k], z[3 * hd + k]);
        c[k] = f * c_prev[k] + i * g;
        h[k] = o * c[k].tanh();
    }
    let out = match out_mask {
        Some(m) => h.iter().zip(m).map(|(a, b)| a * b).collect(),
        None => h.clone(),
    };
    StepOutput {
        h,
        c,
        out,
        gates: z,
    }
}

/// Activations of a forward pass over the unmasked rows of one sequence.
pub(crate) struct SeqCache {
    /// Source row of each processed step.
    pub rows: Vec<usize>,
    /// Masked inputs, `steps x input_dim`.
    pub x_in: Vec<f64>,
    pub gates: Vec<f64>,
    pub c: Vec<f64>,
    pub h: Vec<f64>,
    pub out: Vec<f64>,
}

impl SeqCache {
    pub fn steps(&self) -> usize {
        self.rows.len()
    }
}

/// Runs the cell over rows of `x` (row-major, `input_dim` wide) whose mask
/// is true, in order. Masked rows are skipped entirely.
pub(crate) fn forward_seq(
    w: LstmWeights<'_>,
    x: &[f64],
    mask: &[bool],
    in_masks: Option<&[f64]>,
    out_masks: Option<&[f64]>,
) -> SeqCache {
    let (d, hd) = (w.input_dim, w.hidden);
    let rows: Vec<usize> = (0..mask.len()).filter(|&r| mask[r]).collect();
    let n = rows.len();
    let mut cache = SeqCache {
        rows,
        x_in: Vec::with_capacity(n * d),
        gates: Vec::with_capacity(n * 4 * hd),
        c: Vec::with_capacity(n * hd),
        h: Vec::with_capacity(n * hd),
        out: Vec::with_capacity(n * hd),
    };
    let mut h_prev = vec![0.0; hd];
    let mut c_prev = vec![0.0; hd];
    for s in 0..n {
        let r = cache.rows[s];
        let xr = &x[r * d..(r + 1) * d];
        let x_in: Vec<f64> = match in_masks {
            Some(m) => xr.iter().zip(&m[r * d..(r + 1) * d]).map(|(a, b)| a * b).collect(),
            None => xr.to_vec(),
        };
        let om = out_masks.map(|m| &m[r * hd..(r + 1) * hd]);
        let step = lstm_step(w, &x_in, &h_prev, &c_prev, None, om);
        cache.x_in.extend_from_slice(&x_in);
        cache.gates.extend_from_slice(&step.gates);
        cache.c.extend_from_slice(&step.c);
        cache.h.extend_from_slice(&step.h);
        cache.out.extend_from_slice(&step.out);
        h_prev = step.h;
        c_prev = step.c;
    }
    cache
}

/// Gradient accumulators for the recurrent weights.
pub(crate) struct LstmGrads<'a> {
    pub w_x: &'a mut [f64],
    pub w_h: &'a mut [f64],
    pub b: &'a mut [f64],
}

/// Backpropagation through time. `d_out` is dL/d(out) per processed step.
/// If `dx` is given (`mask.len() x input_dim`), input gradients are
/// written to the processed rows; other rows are left untouched.
#[allow(clippy::too_many_arguments)]
pub(crate) fn backward_seq(
    w: LstmWeights<'_>,
    cache: &SeqCache,
    d_out: &[f64],
    in_masks: Option<&[f64]>,
    out_masks: Option<&[f64]>,
    grads: LstmGrads<'_>,
    mut dx: Option<&mut [f64]>,
) {
    let (d, hd) = (w.input_dim, w.hidden);
    let n = cache.steps();
    let mut dh_next = vec![0.0; hd];
    let mut dc_next = vec![0.0; hd];
    let mut dz = vec![0.0; 4 * hd];
    let zeros = vec![0.0; hd];
    for s in (0..n).rev() {
        let r = cache.rows[s];
        let gates = &cache.gates[s * 4 * hd..(s + 1) * 4 * hd];
        let c = &cache.c[s * hd..(s + 1) * hd];
        let c_prev = if s == 0 {
            &zeros[..]
        } else {
            &cache.c[(s - 1) * hd..s * hd]
        };
        let h_prev = if s == 0 {
            &zeros[..]
        } else {
            &cache.h[(s - 1) * hd..s * hd]
        };
        for k in 0..hd {
            let mut dh = d_out[s * hd + k];
            if let Some(m) = out_masks {
                dh *= m[r * hd + k];
            }
            dh += dh_next[k];
            let (i, f, g, o) = (gates[k], gates[hd + k], gates[2 * hd + k], gates[3 * hd + k]);
            let tc = c[k].tanh();
            let dc = dc_next[k] + dh * o * (1.0 - tc * tc);
            dz[k] = dc * g * i * (1.0 - i);
            dz[hd + k] = dc * c_prev[k] * f * (1.0 - f);
            dz[2 * hd + k] = dc * i * (1.0 - g * g);
            dz[3 * hd + k] = dh * tc * o * (1.0 - o);
            dc_next[k] = dc * f;
        }
        for (gb, z) in grads.b.iter_mut().zip(&dz) {
            *gb += z;
        }
        outer_acc(&cache.x_in[s * d..(s + 1) * d], &dz, grads.w_x);
        outer_acc(h_prev, &dz, grads.w_h);
        dh_next.fill(0.0);
        mat_vec_acc(w.w_h, &dz, &mut dh_next);
        if let Some(dx) = dx.as_deref_mut() {
            let row = &mut dx[r * d..(r + 1) * d];
            row.fill(0.0);
            mat_vec_acc(w.w_x, &dz, row);
            if let Some(m) = in_masks {
                for (g, mk) in row.iter_mut().zip(&m[r * d..(r + 1) * d]) {
                    *g *= mk;
                }
            }
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn zero_weights(d: usize, hd: usize, forget_bias: f64) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut b = vec![0.0; 4 * hd];
        b[hd..2 * hd].fill(forget_bias);
        (vec![0.0; d * 4 * hd], vec![0.0; hd * 4 * hd], b)
    }

    #[test]
    fn zero_state_stays_zero() {
        let (wx, wh, b) = zero_weights(3, 4, 1.0);
        let w = LstmWeights {
            w_x: &wx,
            w_h: &wh,
            b: &b,
            input_dim: 3,
            hidden: 4,
        };
        let s = lstm_step(w, &[0.0; 3], &[0.0; 4], &[0.0; 4], None, None);
        assert_eq!(s.h, vec![0.0; 4]);
        assert_eq!(s.c, vec![0.0; 4]);
    }

    #[test]
    fn forget_bias_carries_cell() {
        let (wx, wh, b) = zero_weights(3, 4, 1.0);
        let w = LstmWeights {
            w_x: &wx,
            w_h: &wh,
            b: &b,
            input_dim: 3,
            hidden: 4,
        };
        let s = lstm_step(w, &[0.0; 3], &[0.0; 4], &[1.0; 4], None, None);
        // hand evaluation: f = sigmoid(1), i = o = 1/2, g = tanh(0) = 0
        let f = 1.0 / (1.0 + (-1.0f64).exp());
        for k in 0..4 {
            assert!((s.c[k] - f).abs() < 1e-15);
            assert!((s.c[k] - 0.7310585786300049).abs() < 1e-15);
            assert!((s.h[k] - 0.5 * f.tanh()).abs() < 1e-15);
        }
    }

    #[test]
    fn identity_masks_match_no_masks() {
        let d = 5;
        let hd = 3;
        let wx: Vec<f64> = (0..d * 4 * hd).map(|i| ((i * 37 % 17) as f64 - 8.0) / 10.0).collect();
        let wh: Vec<f64> = (0..hd * 4 * hd).map(|i| ((i * 11 % 13) as f64 - 6.0) / 10.0).collect();
        let b: Vec<f64> = (0..4 * hd).map(|i| i as f64 / 20.0).collect();
        let w = LstmWeights {
            w_x: &wx,
            w_h: &wh,
            b: &b,
            input_dim: d,
            hidden: hd,
        };
        let x = [0.3, -1.0, 2.0, 0.0, 0.5];
        let (h, c) = ([0.1, -0.2, 0.3], [0.5, 0.0, -0.5]);
        let plain = lstm_step(w, &x, &h, &c, None, None);
        let masked = lstm_step(w, &x, &h, &c, Some(&[1.0; 5]), Some(&[1.0; 3]));
        assert_eq!(plain, masked);
    }
}
