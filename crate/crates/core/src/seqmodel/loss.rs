//! Numerically stable classification losses.

/// Logistic function that does not overflow for large |z|.
#[inline]
pub fn sigmoid(z: f64) -> f64 {
    if z >= 0.0 {
        1.0 / (1.0 + (-z).exp())
    } else {
        let e = z.exp();
        e / (1.0 + e)
    }
}

/// Element loss `max(z, 0) - z t + ln(1 + e^{-|z|})`.
#[inline]
pub fn sigmoid_ce_elem(z: f64, t: f64) -> f64 {
    z.max(0.0) - z * t + (-z.abs()).exp().ln_1p()
}

/// Weighted mean of the element losses over entries with positive weight.
/// Returns 0 when every weight is 0.
pub fn sigmoid_ce(logits: &[f64], targets: &[f64], weights: &[f64]) -> f64 {
    assert_eq!(logits.len(), targets.len());
    assert_eq!(logits.len(), weights.len());
    let total: f64 = weights.iter().sum();
    if total <= 0.0 {
        return 0.0;
    }
    logits
        .iter()
        .zip(targets)
        .zip(weights)
        .filter(|(_, &w)| w > 0.0)
        .map(|((&z, &t), &w)| w * sigmoid_ce_elem(z, t))
        .sum::<f64>()
        / total
}

pub fn log_sum_exp(z: &[f64]) -> f64 {
    let m = z.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if !m.is_finite() {
        return m;
    }
    m + z.iter().map(|x| (x - m).exp()).sum::<f64>().ln()
}

pub fn softmax(z: &[f64]) -> Vec<f64> {
    let lse = log_sum_exp(z);
    z.iter().map(|x| (x - lse).exp()).collect()
}

/// Cross entropy of the softmax of `logits` against class `target`;
/// zero when the class is unknown.
pub fn softmax_ce(logits: &[f64], target: Option<usize>) -> f64 {
    match target {
        Some(y) => log_sum_exp(logits) - logits[y],
        None => 0.0,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn anchors() {
        assert!((sigmoid_ce(&[0.0], &[0.5], &[1.0]) - std::f64::consts::LN_2).abs() < 1e-12);
        assert!(sigmoid_ce(&[50.0], &[1.0], &[1.0]) < 1e-20);
        let uniform = [0.0; 38];
        assert!((softmax_ce(&uniform, Some(7)) - 38f64.ln()).abs() < 1e-12);
        let mut peaked = [0.0; 38];
        peaked[4] = 50.0;
        assert!(softmax_ce(&peaked, Some(4)) < 1e-20);
        assert_eq!(softmax_ce(&peaked, None), 0.0);
    }

    #[test]
    fn zero_weights() {
        assert_eq!(sigmoid_ce(&[1.0, 2.0], &[0.0, 1.0], &[0.0, 0.0]), 0.0);
        // weight 0 entries are excluded from both numerator and denominator
        let a = sigmoid_ce(&[1.0, 99.0], &[0.0, 0.0], &[1.0, 0.0]);
        assert_eq!(a, sigmoid_ce_elem(1.0, 0.0));
    }

    #[test]
    fn extreme_inputs_finite() {
        for z in [-1e6, -700.0, 0.0, 700.0, 1e6] {
            for t in [0.0, 0.3, 1.0] {
                assert!(sigmoid_ce_elem(z, t).is_finite());
            }
            assert!(sigmoid(z).is_finite());
        }
        assert!(softmax_ce(&[1e6, -1e6, 0.0], Some(1)).is_finite());
    }

    proptest! {
        // naive -t ln s - (1-t) ln(1-s), with s and 1-s each formed directly so
        // neither side cancels; the range keeps both logs well conditioned
        #[test]
        fn matches_naive_sigmoid_ce(z in -8.0f64..8.0, t in 0.0f64..=1.0) {
            let s = 1.0 / (1.0 + (-z).exp());
            let one_minus_s = 1.0 / (1.0 + z.exp());
            let naive = -t * s.ln() - (1.0 - t) * one_minus_s.ln();
            let stable = sigmoid_ce_elem(z, t);
            prop_assert!((naive - stable).abs() <= 1e-10 * naive.abs(), "{} vs {}", naive, stable);
        }

        #[test]
        fn matches_direct_softmax_ce(z in proptest::collection::vec(-5.0f64..5.0, 38), y in 0usize..38) {
            let denom: f64 = z.iter().map(|x| x.exp()).sum();
            let direct = -(z[y].exp() / denom).ln();
            let stable = softmax_ce(&z, Some(y));
            prop_assert!((direct - stable).abs() <= 1e-10 * direct.abs());
        }
    }
}
