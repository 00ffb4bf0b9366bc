//! Shot-boundary votes from luma histogram differences.

use serde::{Deserialize, Serialize};

pub const HIST_BINS: usize = 64;
pub const N_SHOT_THRESHOLDS: usize = 5;

pub type ShotVotes = [u8; N_SHOT_THRESHOLDS];

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ShotConfig {
    /// One detector per threshold on the histogram distance, from most to
    /// least sensitive.
    pub thresholds: [f64; N_SHOT_THRESHOLDS],
}

impl Default for ShotConfig {
    fn default() -> Self {
        ShotConfig {
            thresholds: [0.15, 0.25, 0.35, 0.50, 0.65],
        }
    }
}

/// Normalised 64-bin luma histogram.
pub fn luma_histogram(plane: &[u8]) -> [f64; HIST_BINS] {
    let mut counts = [0u64; HIST_BINS];
    for &p in plane {
        counts[usize::from(p >> 2)] += 1;
    }
    let n = plane.len().max(1) as f64;
    counts.map(|c| c as f64 / n)
}

/// Half the L1 distance between two normalised histograms, in [0, 1].
pub fn histogram_distance(a: &[f64; HIST_BINS], b: &[f64; HIST_BINS]) -> f64 {
    0.5 * a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum::<f64>()
}

/// Per-frame 5-way boundary votes. Frame 0 has no predecessor and gets zeros.
pub fn shot_boundaries(frames: &[Vec<u8>], config: &ShotConfig) -> Vec<ShotVotes> {
    let hists: Vec<_> = frames.iter().map(|f| luma_histogram(f)).collect();
    let mut out = Vec::with_capacity(frames.len());
    if !frames.is_empty() {
        out.push([0; N_SHOT_THRESHOLDS]);
    }
    for pair in hists.windows(2) {
        let d = histogram_distance(&pair[0], &pair[1]);
        out.push(config.thresholds.map(|t| u8::from(d > t)));
    }
    out
}
