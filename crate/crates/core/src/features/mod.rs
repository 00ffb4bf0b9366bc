//! Fused per-second feature vectors for the recurrent models.
//!
//! Layout (v1): `[resnet 2048 | flow 1 | shots 5 | audio 1 | places 365 |
//! objects 80 | faces 10]` = 2510 values, optionally followed by one climax
//! probability for the sentiment task.

mod container;
mod standardize;

use std::collections::HashMap;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::climax::aggregate_per_second;
use crate::hash::Fnv1a;
use crate::ingest::{
    FeatureRecord, VideoRecord, FACES_DIM, OBJECTS_DIM, PLACES_DIM, RESNET_DIM,
};
use crate::signals::{SignalTrack, N_SHOT_THRESHOLDS};
use crate::vocab::N_SENTIMENTS;

pub use container::{decode_dataset, encode_dataset, read_dataset, write_dataset};
pub use standardize::Standardizer;

pub const LAYOUT_VERSION: u32 = 1;
pub const BASE_DIM: usize = 2510;
pub const MAX_SEQ_LEN: usize = 60;

#[derive(Debug, Error)]
pub enum FeatureError {
    #[error("video {video_id}: no feature frame for second {second}")]
    MissingSecond { video_id: String, second: usize },
    #[error("video {video_id}: no {what}")]
    MissingVideo { video_id: String, what: &'static str },
    #[error("feature vector has {actual} values, expected {expected}")]
    Dimension { expected: usize, actual: usize },
    #[error("{frames} frames but {probs} climax probabilities")]
    LengthMismatch { frames: usize, probs: usize },
    #[error("cannot standardize an empty dataset")]
    EmptyDataset,
    #[error("tensor container: not a dataset file (bad magic)")]
    BadMagic,
    #[error("tensor container: version {found}, expected {expected}")]
    Version { found: u32, expected: u32 },
    #[error("tensor container: layout hash {found:#018x} does not match {expected:#018x}")]
    LayoutMismatch { found: u64, expected: u64 },
    #[error("tensor container: truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Block {
    Resnet,
    Flow,
    Shots,
    Audio,
    Places,
    Objects,
    Faces,
    Climax,
}

impl Block {
    pub const BASE: [Block; 7] = [
        Block::Resnet,
        Block::Flow,
        Block::Shots,
        Block::Audio,
        Block::Places,
        Block::Objects,
        Block::Faces,
    ];

    pub fn len(self) -> usize {
        match self {
            Block::Resnet => RESNET_DIM,
            Block::Flow | Block::Audio | Block::Climax => 1,
            Block::Shots => N_SHOT_THRESHOLDS,
            Block::Places => PLACES_DIM,
            Block::Objects => OBJECTS_DIM,
            Block::Faces => FACES_DIM,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Block::Resnet => "resnet",
            Block::Flow => "flow",
            Block::Shots => "shots",
            Block::Audio => "audio",
            Block::Places => "places",
            Block::Objects => "objects",
            Block::Faces => "faces",
            Block::Climax => "climax",
        }
    }
}

impl fmt::Display for Block {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for Block {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Block::BASE
            .iter()
            .chain(&[Block::Climax])
            .copied()
            .find(|b| b.name() == s)
            .ok_or_else(|| format!("unknown feature block '{s}'"))
    }
}

/// Ordered block descriptor of a feature vector.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FeatureLayout {
    blocks: Vec<Block>,
}

impl FeatureLayout {
    pub fn base() -> Self {
        FeatureLayout {
            blocks: Block::BASE.to_vec(),
        }
    }

    pub fn with_climax() -> Self {
        let mut blocks = Block::BASE.to_vec();
        blocks.push(Block::Climax);
        FeatureLayout { blocks }
    }

    pub fn for_dim(dim: usize) -> Option<Self> {
        match dim {
            BASE_DIM => Some(Self::base()),
            d if d == BASE_DIM + 1 => Some(Self::with_climax()),
            _ => None,
        }
    }

    pub fn blocks(&self) -> &[Block] {
        &self.blocks
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(|b| b.len()).sum()
    }

    pub fn has(&self, block: Block) -> bool {
        self.blocks.contains(&block)
    }

    /// `(offset, len)` of a block.
    pub fn span(&self, block: Block) -> Option<(usize, usize)> {
        let mut off = 0;
        for &b in &self.blocks {
            if b == block {
                return Some((off, b.len()));
            }
            off += b.len();
        }
        None
    }

    /// Stable fingerprint of the version and every `(name, offset, len)`.
    pub fn hash(&self) -> u64 {
        let mut h = Fnv1a::default();
        h.update(&LAYOUT_VERSION.to_le_bytes());
        let mut off = 0;
        for b in &self.blocks {
            h.update(format!("{}:{}:{};", b.name(), off, b.len()).as_bytes());
            off += b.len();
        }
        h.finish()
    }

    /// Column indices covering `selected` blocks, in layout order.
    pub fn columns(&self, selected: &[Block]) -> Vec<usize> {
        let mut cols = Vec::new();
        let mut off = 0;
        for &b in &self.blocks {
            if selected.contains(&b) {
                cols.extend(off..off + b.len());
            }
            off += b.len();
        }
        cols
    }
}

/// One second's fused feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameFeatures {
    pub t_sec: f64,
    pub vector: Vec<f64>,
}

impl FrameFeatures {
    pub fn block(&self, block: Block) -> Option<&[f64]> {
        let layout = FeatureLayout::for_dim(self.vector.len())?;
        let (off, len) = layout.span(block)?;
        Some(&self.vector[off..off + len])
    }
}

/// Builds one base-layout vector per second of `signals`.
///
/// `features` are the semantic records of this video sorted by frame; each
/// second uses the first record whose timestamp falls inside it. Signals are
/// aggregated per second like the unsupervised predictor does, with shot
/// votes reduced by element-wise max.
pub fn assemble(
    video_id: &str,
    features: &[FeatureRecord],
    signals: &SignalTrack,
) -> Result<Vec<FrameFeatures>, FeatureError> {
    let agg = aggregate_per_second(signals);
    let n_sec = signals.n_seconds();
    let mut by_second: Vec<Option<&FeatureRecord>> = vec![None; n_sec];
    for rec in features {
        let s = rec.t_sec.floor() as usize;
        if s < n_sec && by_second[s].is_none() {
            by_second[s] = Some(rec);
        }
    }
    let mut out = Vec::with_capacity(n_sec);
    for (s, rec) in by_second.into_iter().enumerate() {
        let rec = rec.ok_or_else(|| FeatureError::MissingSecond {
            video_id: video_id.to_string(),
            second: s,
        })?;
        let mut v = Vec::with_capacity(BASE_DIM);
        v.extend_from_slice(&rec.resnet);
        v.push(agg.flow.values[s]);
        v.extend(agg.shot_votes[s].iter().map(|&b| f64::from(b)));
        v.push(agg.audio.values[s]);
        v.extend_from_slice(&rec.places);
        v.extend_from_slice(&rec.objects);
        v.extend_from_slice(&rec.faces);
        if v.len() != BASE_DIM {
            return Err(FeatureError::Dimension {
                expected: BASE_DIM,
                actual: v.len(),
            });
        }
        out.push(FrameFeatures {
            t_sec: s as f64,
            vector: v,
        });
    }
    Ok(out)
}

/// Appends one climax probability per second.
pub fn inject_climax(
    mut frames: Vec<FrameFeatures>,
    climax_probs: &[f64],
) -> Result<Vec<FrameFeatures>, FeatureError> {
    if frames.len() != climax_probs.len() {
        return Err(FeatureError::LengthMismatch {
            frames: frames.len(),
            probs: climax_probs.len(),
        });
    }
    for (f, &p) in frames.iter_mut().zip(climax_probs) {
        if f.vector.len() != BASE_DIM {
            return Err(FeatureError::Dimension {
                expected: BASE_DIM,
                actual: f.vector.len(),
            });
        }
        f.vector.push(p);
    }
    Ok(frames)
}

/// One base-layout tensor per annotated video, in annotation order.
///
/// Every record needs signals and feature frames covering its signal
/// duration; extra features or signals for unannotated videos are ignored.
pub fn build_tensors(
    records: &[VideoRecord],
    features: &[FeatureRecord],
    signals: &[(String, SignalTrack)],
) -> Result<Vec<VideoTensor>, FeatureError> {
    let mut by_video: HashMap<&str, Vec<&FeatureRecord>> = HashMap::new();
    for f in features {
        by_video.entry(f.video_id.as_str()).or_default().push(f);
    }
    let tracks: HashMap<&str, &SignalTrack> =
        signals.iter().map(|(id, t)| (id.as_str(), t)).collect();
    records
        .iter()
        .map(|rec| {
            let id = rec.video_id.as_str();
            let missing = |what| FeatureError::MissingVideo {
                video_id: id.to_string(),
                what,
            };
            let track = tracks.get(id).ok_or_else(|| missing("signals"))?;
            let mut feats: Vec<FeatureRecord> = by_video
                .get(id)
                .ok_or_else(|| missing("feature frames"))?
                .iter()
                .map(|f| (*f).clone())
                .collect();
            feats.sort_by_key(|f| f.frame_idx);
            let frames = assemble(id, &feats, track)?;
            Ok(VideoTensor::new(id, &frames, Labels::from_record(rec)))
        })
        .collect()
}

/// Supervision attached to a video.
#[derive(Debug, Clone, PartialEq)]
pub struct Labels {
    pub sentiment_votes: [u8; N_SENTIMENTS],
    pub topic: Option<usize>,
    /// Accepted climax marks; `None` when the video has no climax annotation.
    pub climax_marks: Option<Vec<f64>>,
}

impl Labels {
    pub fn from_record(rec: &VideoRecord) -> Self {
        Labels {
            sentiment_votes: rec.sentiment_votes,
            topic: rec.topic,
            climax_marks: if rec.workers.is_empty() {
                None
            } else {
                Some(rec.accepted_marks())
            },
        }
    }
}

/// A video's per-second feature matrix (row-major) plus labels.
#[derive(Debug, Clone, PartialEq)]
pub struct VideoTensor {
    pub video_id: String,
    pub dim: usize,
    pub data: Vec<f64>,
    pub labels: Labels,
}

impl VideoTensor {
    /// Stacks frames, truncating to [`MAX_SEQ_LEN`] seconds.
    pub fn new(video_id: impl Into<String>, frames: &[FrameFeatures], labels: Labels) -> Self {
        let dim = frames.first().map_or(BASE_DIM, |f| f.vector.len());
        let data = frames
            .iter()
            .take(MAX_SEQ_LEN)
            .flat_map(|f| f.vector.iter().copied())
            .collect();
        VideoTensor {
            video_id: video_id.into(),
            dim,
            data,
            labels,
        }
    }

    pub fn n_frames(&self) -> usize {
        self.data.len().checked_div(self.dim).unwrap_or(0)
    }

    pub fn row(&self, t: usize) -> &[f64] {
        &self.data[t * self.dim..(t + 1) * self.dim]
    }

    /// Appends a climax column (one value per stored frame).
    pub fn inject_climax(&mut self, probs: &[f64]) -> Result<(), FeatureError> {
        let n = self.n_frames();
        if probs.len() != n {
            return Err(FeatureError::LengthMismatch {
                frames: n,
                probs: probs.len(),
            });
        }
        if self.dim != BASE_DIM {
            return Err(FeatureError::Dimension {
                expected: BASE_DIM,
                actual: self.dim,
            });
        }
        let mut data = Vec::with_capacity(n * (self.dim + 1));
        for (t, &p) in probs.iter().enumerate() {
            data.extend_from_slice(self.row(t));
            data.push(p);
        }
        self.data = data;
        self.dim += 1;
        Ok(())
    }

    /// Copy restricted to the given columns.
    pub fn select(&self, columns: &[usize]) -> VideoTensor {
        let mut data = Vec::with_capacity(self.n_frames() * columns.len());
        for t in 0..self.n_frames() {
            let row = self.row(t);
            data.extend(columns.iter().map(|&c| row[c]));
        }
        VideoTensor {
            video_id: self.video_id.clone(),
            dim: columns.len(),
            data,
            labels: self.labels.clone(),
        }
    }
}
