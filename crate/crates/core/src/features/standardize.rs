use serde::{Deserialize, Serialize};

use super::{FeatureError, VideoTensor};

/// Smallest divisor used for near-constant dimensions.
pub const SCALE_FLOOR: f64 = 1e-6;

/// Per-dimension z-scoring fit on training frames only.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Standardizer {
    pub mean: Vec<f64>,
    pub scale: Vec<f64>,
}

impl Standardizer {
    /// Fits mean and (population) standard deviation over every frame of
    /// every video.
    pub fn fit(videos: &[&VideoTensor]) -> Result<Self, FeatureError> {
        let dim = videos.first().ok_or(FeatureError::EmptyDataset)?.dim;
        let mut n = 0usize;
        let mut sum = vec![0.0; dim];
        for v in videos {
            if v.dim != dim {
                return Err(FeatureError::Dimension {
                    expected: dim,
                    actual: v.dim,
                });
            }
            for t in 0..v.n_frames() {
                for (s, x) in sum.iter_mut().zip(v.row(t)) {
                    *s += x;
                }
                n += 1;
            }
        }
        if n == 0 {
            return Err(FeatureError::EmptyDataset);
        }
        let mean: Vec<f64> = sum.iter().map(|s| s / n as f64).collect();
        // second pass keeps the variance well conditioned
        let mut sq = vec![0.0; dim];
        for v in videos {
            for t in 0..v.n_frames() {
                for ((q, x), m) in sq.iter_mut().zip(v.row(t)).zip(&mean) {
                    *q += (x - m) * (x - m);
                }
            }
        }
        let scale = sq
            .iter()
            .map(|q| (q / n as f64).sqrt().max(SCALE_FLOOR))
            .collect();
        Ok(Standardizer { mean, scale })
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn apply_row(&self, row: &mut [f64]) {
        for ((x, m), s) in row.iter_mut().zip(&self.mean).zip(&self.scale) {
            *x = (*x - m) / s;
        }
    }

    pub fn apply(&self, video: &VideoTensor) -> VideoTensor {
        let mut out = video.clone();
        for row in out.data.chunks_mut(out.dim) {
            self.apply_row(row);
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::features::Labels;

    fn tensor(rows: &[[f64; 2]]) -> VideoTensor {
        VideoTensor {
            video_id: "v".into(),
            dim: 2,
            data: rows.iter().flatten().copied().collect(),
            labels: Labels {
                sentiment_votes: [0; 30],
                topic: None,
                climax_marks: None,
            },
        }
    }

    #[test]
    fn constant_dimension_maps_to_zero() {
        let t = tensor(&[[3.0, 1.0], [3.0, 2.0], [3.0, 6.0]]);
        let s = Standardizer::fit(&[&t]).unwrap();
        assert_eq!(s.scale[0], SCALE_FLOOR);
        let z = s.apply(&t);
        assert!(z.data.iter().all(|x| x.is_finite()));
        assert_eq!(z.row(1)[0], 0.0);
    }

    #[test]
    fn train_mean_is_zero() {
        let a = tensor(&[[1.0, 10.0], [2.0, 20.0]]);
        let b = tensor(&[[7.0, -4.0], [0.5, 1e3]]);
        let s = Standardizer::fit(&[&a, &b]).unwrap();
        let (za, zb) = (s.apply(&a), s.apply(&b));
        for d in 0..2 {
            let m = (0..2).map(|t| za.row(t)[d] + zb.row(t)[d]).sum::<f64>() / 4.0;
            assert!(m.abs() < 1e-9);
        }
    }

    #[test]
    fn validation_uses_training_parameters() {
        let train = tensor(&[[0.0, 0.0], [2.0, 2.0]]);
        let val = tensor(&[[10.0, 10.0], [12.0, 12.0]]);
        let s = Standardizer::fit(&[&train]).unwrap();
        let z = s.apply(&val);
        // train mean 1, std 1: the shifted split stays shifted
        assert_eq!(z.row(0), &[9.0, 9.0]);
        assert_eq!(z.row(1), &[11.0, 11.0]);
    }

    #[test]
    fn empty() {
        assert!(matches!(Standardizer::fit(&[]), Err(FeatureError::EmptyDataset)));
        let t = tensor(&[]);
        assert!(matches!(Standardizer::fit(&[&t]), Err(FeatureError::EmptyDataset)));
    }
}
