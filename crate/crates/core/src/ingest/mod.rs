//! Parsers for the external inputs: Y4M video, PCM WAV audio, annotation
//! JSONL and per-frame feature JSONL.
//!
//! All readers are pure functions of the input bytes. The `*_from_bytes` /
//! `parse_*` variants take in-memory data; the path variants only add IO.

mod annotations;
mod features;
mod wav;
mod y4m;

use std::path::Path;

use thiserror::Error;

pub use annotations::{
    encode_annotation, parse_annotations, read_annotations, write_annotations, VideoRecord,
    WorkerMark,
};
pub use features::{
    parse_features, read_features, write_features, FeatureRecord, FACES_DIM, OBJECTS_DIM,
    PLACES_DIM, RESNET_DIM,
};
pub use wav::{encode_wav, parse_wav, read_wav, write_wav, AudioTrack};
pub use y4m::{encode_y4m, parse_y4m, read_y4m, write_y4m, Chroma, FrameSeq, Rational};

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("y4m: malformed header at byte {offset}: {msg}")]
    Y4mHeader { offset: usize, msg: String },
    #[error("y4m: unsupported chroma '{tag}' at byte {offset}")]
    Y4mChroma { offset: usize, tag: String },
    #[error("y4m: truncated frame at byte {offset}: expected {expected} bytes, found {actual}")]
    Y4mTruncated {
        offset: usize,
        expected: usize,
        actual: usize,
    },
    #[error("wav: malformed at byte {offset}: {msg}")]
    WavMalformed { offset: usize, msg: String },
    #[error("wav: unsupported codec (format tag {format:#06x}), only PCM is accepted")]
    NonPcm { format: u16 },
    #[error("wav: unsupported sample layout: {bits} bits, {channels} channels")]
    WavLayout { bits: u16, channels: u16 },
    #[error("wav: missing data chunk")]
    MissingDataChunk,
    #[error("wav: zero sample rate")]
    ZeroSampleRate,
    #[error("line {line}: invalid json: {source}")]
    Json {
        line: usize,
        #[source]
        source: serde_json::Error,
    },
    #[error("line {line}: unknown sentiment '{name}'")]
    UnknownSentiment { line: usize, name: String },
    #[error("line {line}: unknown topic '{name}'")]
    UnknownTopic { line: usize, name: String },
    #[error("line {line}: video {video_id}: {what}")]
    InvalidRecord {
        line: usize,
        video_id: String,
        what: String,
    },
    #[error("line {line}: duplicate video_id '{video_id}'")]
    DuplicateVideo { line: usize, video_id: String },
    #[error("line {line}: {block}: expected {expected}, got {actual}")]
    Dimension {
        line: usize,
        block: &'static str,
        expected: usize,
        actual: usize,
    },
    #[error("line {line}: {block}[{index}] = {value} out of range")]
    OutOfRange {
        line: usize,
        block: &'static str,
        index: usize,
        value: f64,
    },
    #[error("line {line}: places distribution sums to {sum}, expected 1 within 1e-3")]
    NotNormalized { line: usize, sum: f64 },
    #[error("line {line}: video {video_id}: frame_idx {frame_idx} does not increase")]
    NonMonotoneFrame {
        line: usize,
        video_id: String,
        frame_idx: u64,
    },
}

pub(crate) fn read_file(path: &Path) -> Result<Vec<u8>, IngestError> {
    std::fs::read(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub(crate) fn write_file(path: &Path, bytes: &[u8]) -> Result<(), IngestError> {
    std::fs::write(path, bytes).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })
}
