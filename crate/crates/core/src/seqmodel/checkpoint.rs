//! Checkpoint container.
//!
//! ```text
//! magic "ADARCCKP" | u32 version | u32 meta_len | meta JSON
//! | u32 n_tensors | per tensor: u32 name_len | name | u32 ndim | ndim*u64 | f64 data
//! ```
//! Parameters come first, then `std.mean`/`std.scale` and the optimizer slots
//! `opt.ms.*`/`opt.mom.*` when present. Little-endian throughout.

use std::path::Path;

use serde::{Deserialize, Serialize};

use super::model::{ModelConfig, SeqModel, Task};
use super::rmsprop::{RmsProp, RmsPropConfig};
use super::tensor::{ParamSet, Tensor};
use super::ModelError;
use crate::features::{Block, FeatureLayout, Standardizer};

const MAGIC: &[u8; 8] = b"ADARCCKP";
pub const CHECKPOINT_VERSION: u32 = 1;

/// A trained model with everything needed to apply or resume it.
#[derive(Debug, Clone, PartialEq)]
pub struct ModelCheckpoint {
    pub model: SeqModel,
    /// Layout hash of the full feature vectors the model was trained on.
    pub layout_hash: u64,
    /// Blocks selected from that layout, in layout order.
    pub blocks: Vec<Block>,
    /// Fit on the selected columns of the training split.
    pub standardizer: Option<Standardizer>,
    pub optimizer: Option<RmsProp>,
    pub seed: u64,
    pub step: u64,
    pub keep_prob: f64,
}

impl ModelCheckpoint {
    pub fn task(&self) -> Task {
        self.model.config.task
    }

    pub fn check_layout(&self, layout: &FeatureLayout) -> Result<(), ModelError> {
        if layout.hash() != self.layout_hash {
            return Err(ModelError::LayoutMismatch {
                found: self.layout_hash,
                expected: layout.hash(),
            });
        }
        Ok(())
    }
}

#[derive(Serialize, Deserialize)]
struct Meta {
    format_version: u32,
    model: ModelConfig,
    layout_hash: u64,
    blocks: Vec<Block>,
    seed: u64,
    step: u64,
    keep_prob: f64,
    has_standardizer: bool,
    rmsprop: Option<RmsPropConfig>,
}

fn put_tensor(out: &mut Vec<u8>, name: &str, shape: &[usize], data: &[f64]) {
    out.extend_from_slice(&(name.len() as u32).to_le_bytes());
    out.extend_from_slice(name.as_bytes());
    out.extend_from_slice(&(shape.len() as u32).to_le_bytes());
    for &d in shape {
        out.extend_from_slice(&(d as u64).to_le_bytes());
    }
    for x in data {
        out.extend_from_slice(&x.to_le_bytes());
    }
}

pub fn encode_checkpoint(ckpt: &ModelCheckpoint) -> Vec<u8> {
    let meta = Meta {
        format_version: CHECKPOINT_VERSION,
        model: ckpt.model.config,
        layout_hash: ckpt.layout_hash,
        blocks: ckpt.blocks.clone(),
        seed: ckpt.seed,
        step: ckpt.step,
        keep_prob: ckpt.keep_prob,
        has_standardizer: ckpt.standardizer.is_some(),
        rmsprop: ckpt.optimizer.as_ref().map(|o| o.config),
    };
    let meta = serde_json::to_vec(&meta).expect("metadata serializes");
    let mut tensors: Vec<(String, Vec<usize>, &[f64])> = Vec::new();
    for t in &ckpt.model.params.tensors {
        tensors.push((t.name.clone(), t.shape.clone(), &t.data));
    }
    if let Some(s) = &ckpt.standardizer {
        tensors.push(("std.mean".into(), vec![s.mean.len()], &s.mean));
        tensors.push(("std.scale".into(), vec![s.scale.len()], &s.scale));
    }
    if let Some(o) = &ckpt.optimizer {
        for (slot, set) in [("ms", &o.ms), ("mom", &o.mom)] {
            for t in &set.tensors {
                tensors.push((format!("opt.{slot}.{}", t.name), t.shape.clone(), &t.data));
            }
        }
    }

    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&CHECKPOINT_VERSION.to_le_bytes());
    out.extend_from_slice(&(meta.len() as u32).to_le_bytes());
    out.extend_from_slice(&meta);
    out.extend_from_slice(&(tensors.len() as u32).to_le_bytes());
    for (name, shape, data) in &tensors {
        put_tensor(&mut out, name, shape, data);
    }
    out
}

struct Reader<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Reader<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], ModelError> {
        if self.data.len() - self.pos < n {
            return Err(ModelError::Truncated { offset: self.pos });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, ModelError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, ModelError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn tensor(&mut self) -> Result<Tensor, ModelError> {
        let n = self.u32()? as usize;
        let name = std::str::from_utf8(self.take(n)?)
            .map_err(|_| ModelError::Format("tensor name is not utf-8".into()))?
            .to_string();
        let ndim = self.u32()? as usize;
        let mut shape = Vec::with_capacity(ndim.min(8));
        for _ in 0..ndim {
            shape.push(self.u64()? as usize);
        }
        let len = shape
            .iter()
            .try_fold(1usize, |a, &d| a.checked_mul(d))
            .filter(|&l| l <= (self.data.len() - self.pos) / 8)
            .ok_or(ModelError::Truncated { offset: self.pos })?;
        let bytes = self.take(len * 8)?;
        let data = bytes
            .chunks_exact(8)
            .map(|c| f64::from_le_bytes(c.try_into().unwrap()))
            .collect();
        Ok(Tensor { name, shape, data })
    }
}

/// Decodes a checkpoint; `expected` rejects checkpoints of the other task.
pub fn decode_checkpoint(data: &[u8], expected: Option<Task>) -> Result<ModelCheckpoint, ModelError> {
    let mut r = Reader { data, pos: 0 };
    if r.take(MAGIC.len()).map_err(|_| ModelError::BadMagic)? != MAGIC {
        return Err(ModelError::BadMagic);
    }
    let version = r.u32()?;
    if version != CHECKPOINT_VERSION {
        return Err(ModelError::Version {
            found: version,
            expected: CHECKPOINT_VERSION,
        });
    }
    let meta_len = r.u32()? as usize;
    let meta: Meta = serde_json::from_slice(r.take(meta_len)?)
        .map_err(|e| ModelError::Format(format!("metadata: {e}")))?;
    if let Some(task) = expected {
        if meta.model.task != task {
            return Err(ModelError::WrongTask {
                expected: task,
                found: meta.model.task,
            });
        }
    }
    let n = r.u32()? as usize;
    let mut tensors = std::collections::HashMap::new();
    for _ in 0..n {
        let t = r.tensor()?;
        tensors.insert(t.name.clone(), t);
    }
    let mut take = |name: &str, shape: &[usize]| -> Result<Tensor, ModelError> {
        let t = tensors
            .remove(name)
            .ok_or_else(|| ModelError::Format(format!("missing tensor {name}")))?;
        if t.shape != shape {
            return Err(ModelError::Format(format!(
                "tensor {name} has shape {:?}, expected {shape:?}",
                t.shape
            )));
        }
        Ok(t)
    };

    let config = meta.model;
    let mut params = Vec::new();
    for (name, shape) in config.shapes() {
        params.push(take(name, &shape)?);
    }
    let params = ParamSet { tensors: params };
    let standardizer = if meta.has_standardizer {
        let d = [config.input_dim];
        Some(Standardizer {
            mean: take("std.mean", &d)?.data,
            scale: take("std.scale", &d)?.data,
        })
    } else {
        None
    };
    let optimizer = match meta.rmsprop {
        Some(cfg) => {
            let mut opt = RmsProp::new(cfg, &params);
            for (slot, set) in [("ms", &mut opt.ms), ("mom", &mut opt.mom)] {
                for t in &mut set.tensors {
                    t.data = take(&format!("opt.{slot}.{}", t.name), &t.shape.clone())?.data;
                }
            }
            Some(opt)
        }
        None => None,
    };
    Ok(ModelCheckpoint {
        model: SeqModel { config, params },
        layout_hash: meta.layout_hash,
        blocks: meta.blocks,
        standardizer,
        optimizer,
        seed: meta.seed,
        step: meta.step,
        keep_prob: meta.keep_prob,
    })
}

pub fn save_checkpoint(path: impl AsRef<Path>, ckpt: &ModelCheckpoint) -> Result<(), ModelError> {
    let path = path.as_ref();
    std::fs::write(path, encode_checkpoint(ckpt)).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn load_checkpoint(
    path: impl AsRef<Path>,
    expected: Option<Task>,
) -> Result<ModelCheckpoint, ModelError> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|source| ModelError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_checkpoint(&data, expected)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;
    use crate::seqmodel::RmsPropConfig;

    fn sample(task: Task) -> ModelCheckpoint {
        let model = SeqModel::init(ModelConfig::new(task, 7), 3);
        let mut opt = RmsProp::new(RmsPropConfig::default(), &model.params);
        let mut params = model.params.clone();
        let grads = {
            let mut g = params.zeros_like();
            for t in &mut g.tensors {
                for (i, x) in t.data.iter_mut().enumerate() {
                    *x = (i as f64 * 0.1).sin();
                }
            }
            g
        };
        opt.update(&mut params, &grads);
        ModelCheckpoint {
            model: SeqModel {
                config: model.config,
                params,
            },
            layout_hash: FeatureLayout::base().hash(),
            blocks: vec![Block::Flow, Block::Shots, Block::Audio],
            standardizer: Some(Standardizer {
                mean: (0..7).map(|i| i as f64 / 3.0).collect(),
                scale: vec![1.5; 7],
            }),
            optimizer: Some(opt),
            seed: 42,
            step: 1,
            keep_prob: 0.5,
        }
    }

    #[test]
    fn round_trip_reproduces_outputs() {
        for task in [Task::Climax, Task::Sentiment] {
            let ckpt = sample(task);
            let back = decode_checkpoint(&encode_checkpoint(&ckpt), Some(task)).unwrap();
            assert_eq!(back, ckpt);
            let mut rng = ChaCha8Rng::seed_from_u64(5);
            for _ in 0..5 {
                let rows = rng.gen_range(1..8);
                let x: Vec<f64> = (0..rows * 7).map(|_| rng.gen_range(-2.0..2.0)).collect();
                let mask = vec![true; rows];
                match task {
                    Task::Climax => assert_eq!(
                        ckpt.model.forward_climax(&x, &mask).unwrap(),
                        back.model.forward_climax(&x, &mask).unwrap()
                    ),
                    Task::Sentiment => assert_eq!(
                        ckpt.model.forward_sentiment(&x, &mask).unwrap(),
                        back.model.forward_sentiment(&x, &mask).unwrap()
                    ),
                }
            }
        }
    }

    #[test]
    fn wrong_magic() {
        let mut bytes = encode_checkpoint(&sample(Task::Climax));
        bytes[0] = b'X';
        assert!(matches!(decode_checkpoint(&bytes, None), Err(ModelError::BadMagic)));
        assert!(matches!(decode_checkpoint(b"ADA", None), Err(ModelError::BadMagic)));
    }

    #[test]
    fn task_tag_checked() {
        let bytes = encode_checkpoint(&sample(Task::Climax));
        assert!(matches!(
            decode_checkpoint(&bytes, Some(Task::Sentiment)),
            Err(ModelError::WrongTask { .. })
        ));
    }

    #[test]
    fn version_checked() {
        let mut bytes = encode_checkpoint(&sample(Task::Climax));
        bytes[8] = 9;
        assert!(matches!(
            decode_checkpoint(&bytes, None),
            Err(ModelError::Version { found: 9, .. })
        ));
    }

    #[test]
    fn truncation_detected() {
        let bytes = encode_checkpoint(&sample(Task::Sentiment));
        for cut in [12, 40, bytes.len() / 2, bytes.len() - 1] {
            assert!(matches!(
                decode_checkpoint(&bytes[..cut], None),
                Err(ModelError::Truncated { .. } | ModelError::Format(_))
            ));
        }
    }

    #[test]
    fn layout_checked() {
        let ckpt = sample(Task::Climax);
        assert!(ckpt.check_layout(&FeatureLayout::base()).is_ok());
        assert!(matches!(
            ckpt.check_layout(&FeatureLayout::with_climax()),
            Err(ModelError::LayoutMismatch { .. })
        ));
    }
}
