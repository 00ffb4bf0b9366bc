//! Shared fixtures for the kernel benchmarks.

use adarc_core::seqmodel::{Example, ModelConfig, SeqModel, Target, Task};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// Two smooth luma frames, the second shifted one pixel right.
pub fn frame_pair(width: usize, height: usize) -> (Vec<u8>, Vec<u8>) {
    let frame = |shift: f64| -> Vec<u8> {
        (0..height)
            .flat_map(|y| {
                (0..width).map(move |x| {
                    let v = ((x as f64 - shift) * 0.3).sin() * ((y as f64) * 0.2).cos();
                    (128.0 + 100.0 * v).round() as u8
                })
            })
            .collect()
    };
    (frame(0.0), frame(1.0))
}

/// Climax sequences of `frames` rows with `dim` inputs.
pub struct SeqFixture {
    pub model: SeqModel,
    pub xs: Vec<Vec<f64>>,
    pub masks: Vec<Vec<bool>>,
    pub targets: Vec<Vec<f64>>,
}

impl SeqFixture {
    pub fn climax(batch: usize, frames: usize, dim: usize) -> Self {
        let mut rng = ChaCha8Rng::seed_from_u64(7);
        let model = SeqModel::init(ModelConfig::new(Task::Climax, dim), 7);
        let xs = (0..batch)
            .map(|_| (0..frames * dim).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let targets = (0..batch)
            .map(|_| (0..frames).map(|_| f64::from(rng.gen_bool(0.1) as u8)).collect())
            .collect();
        SeqFixture {
            model,
            xs,
            masks: vec![vec![true; frames]; batch],
            targets,
        }
    }

    pub fn examples(&self) -> Vec<Example<'_>> {
        self.xs
            .iter()
            .zip(&self.masks)
            .zip(&self.targets)
            .map(|((x, mask), t)| Example {
                x,
                mask,
                target: Target::Climax {
                    targets: t.clone(),
                    weights: vec![1.0; t.len()],
                },
                dropout: None,
            })
            .collect()
    }
}

/// `(score, video_id, positive)` triples with roughly 20% positives.
pub fn ap_items(n: usize) -> Vec<(f64, String, bool)> {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    (0..n)
        .map(|i| {
            let positive = rng.gen_bool(0.2);
            let score = rng.gen_range(0.0..1.0) + if positive { 0.3 } else { 0.0 };
            (score, format!("v{i:05}"), positive)
        })
        .collect()
}
