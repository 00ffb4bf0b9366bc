//! Loading of the on-disk dataset layout shared by the subcommands.
//!
//! A data directory holds `annotations.jsonl`, `features.jsonl` and the
//! `signals.jsonl` written by `extract --data-dir`.

use std::collections::HashMap;
use std::path::Path;

use adarc_core::features::{assemble, build_tensors, FeatureLayout, Labels};
use adarc_core::ingest::{read_annotations, read_features, FeatureRecord, VideoRecord};
use adarc_core::seqmodel::{load_checkpoint, ModelCheckpoint, Task};
use adarc_core::signals::{read_signals, SignalTrack};
use adarc_core::trainer::predict_climax;
use adarc_core::VideoTensor;

use crate::error::CliError;
use crate::manifest::ManifestBuilder;

pub const ANNOTATIONS: &str = "annotations.jsonl";
pub const FEATURES: &str = "features.jsonl";
pub const SIGNALS: &str = "signals.jsonl";

pub fn load_records(path: &Path, mb: &mut ManifestBuilder) -> Result<Vec<VideoRecord>, CliError> {
    let records = read_annotations(path).map_err(|e| CliError::at(path, e))?;
    if records.is_empty() {
        return Err(CliError::input(format!("{}: no videos", path.display())));
    }
    mb.input(path);
    Ok(records)
}

pub fn load_signals(
    path: &Path,
    mb: &mut ManifestBuilder,
) -> Result<Vec<(String, SignalTrack)>, CliError> {
    if !path.exists() {
        return Err(CliError::input(format!(
            "{}: not found (run `adarc extract` first)",
            path.display()
        )));
    }
    let signals = read_signals(path).map_err(|e| CliError::at(path, e))?;
    mb.input(path);
    Ok(signals)
}

pub fn load_features(path: &Path, mb: &mut ManifestBuilder) -> Result<Vec<FeatureRecord>, CliError> {
    let features = read_features(path).map_err(|e| CliError::at(path, e))?;
    mb.input(path);
    Ok(features)
}

pub fn load_model(
    path: &Path,
    task: Option<Task>,
    mb: &mut ManifestBuilder,
) -> Result<ModelCheckpoint, CliError> {
    let ckpt = load_checkpoint(path, task).map_err(|e| CliError::at(path, e))?;
    mb.input(path);
    Ok(ckpt)
}

/// Labelled base-layout tensors for every annotated video.
pub fn labelled_tensors(
    records: &[VideoRecord],
    features: &[FeatureRecord],
    signals: &[(String, SignalTrack)],
) -> Result<Vec<VideoTensor>, CliError> {
    Ok(build_tensors(records, features, signals)?)
}

/// Base-layout tensors for every video in the signals file, without labels.
pub fn unlabelled_tensors(
    features: &[FeatureRecord],
    signals: &[(String, SignalTrack)],
) -> Result<Vec<VideoTensor>, CliError> {
    let mut by_video: HashMap<&str, Vec<FeatureRecord>> = HashMap::new();
    for f in features {
        by_video.entry(f.video_id.as_str()).or_default().push(f.clone());
    }
    signals
        .iter()
        .map(|(id, track)| {
            let mut feats = by_video.remove(id.as_str()).unwrap_or_default();
            feats.sort_by_key(|f| f.frame_idx);
            let frames = assemble(id, &feats, track)?;
            let labels = Labels {
                sentiment_votes: [0; adarc_core::vocab::N_SENTIMENTS],
                topic: None,
                climax_marks: None,
            };
            Ok(VideoTensor::new(id.clone(), &frames, labels))
        })
        .collect()
}

/// Appends the climax column predicted by `climax` to every tensor.
pub fn inject_climax(tensors: &mut [VideoTensor], climax: &ModelCheckpoint) -> Result<(), CliError> {
    for t in tensors {
        let probs = predict_climax(climax, t)?;
        t.inject_climax(&probs)?;
    }
    Ok(())
}

/// Whether a sentiment checkpoint expects the climax column.
pub fn wants_climax_slot(ckpt: &ModelCheckpoint) -> bool {
    ckpt.layout_hash == FeatureLayout::with_climax().hash()
}

/// Adds the climax column when `ckpt` was trained with it.
pub fn match_layout(
    tensors: &mut [VideoTensor],
    ckpt: &ModelCheckpoint,
    climax: Option<&ModelCheckpoint>,
) -> Result<(), CliError> {
    if ckpt.task() != Task::Sentiment || !wants_climax_slot(ckpt) {
        return Ok(());
    }
    let climax = climax.ok_or_else(|| {
        CliError::input("this sentiment checkpoint uses climax probabilities; pass --climax-checkpoint")
    })?;
    inject_climax(tensors, climax)
}
