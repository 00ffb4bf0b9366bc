//! Per-frame climax indicators: audio amplitude, shot-boundary votes and
//! optical-flow magnitude.

mod audio;
mod flow;
mod shots;

use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::{AudioTrack, FrameSeq, Rational};

pub use audio::audio_amplitude;
pub use flow::{dense_flow, flow_magnitude, FlowConfig, FlowField};
pub use shots::{
    histogram_distance, luma_histogram, shot_boundaries, ShotConfig, ShotVotes, HIST_BINS,
    N_SHOT_THRESHOLDS,
};

#[derive(Debug, Error)]
pub enum SignalError {
    #[error("frame size mismatch: expected {expected} samples, got {prev} and {next}")]
    DimensionMismatch {
        expected: usize,
        prev: usize,
        next: usize,
    },
    #[error("flow needs at least 2x2 frames, got {width}x{height}")]
    FrameTooSmall { width: usize, height: usize },
    #[error("video has no frames")]
    NoFrames,
    #[error("video lasts {video:.3}s but audio lasts {audio:.3}s")]
    DurationMismatch { video: f64, audio: f64 },
    #[error("signals line {line}: {what}")]
    Format { line: usize, what: String },
    #[error("cannot access {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize, Deserialize)]
pub struct SignalConfig {
    pub flow: FlowConfig,
    pub shots: ShotConfig,
}

/// Per-frame indicators of one video; all tracks have one entry per frame.
#[derive(Debug, Clone, PartialEq)]
pub struct SignalTrack {
    pub fps: Rational,
    pub audio: Vec<f64>,
    pub shots: Vec<ShotVotes>,
    pub flow: Vec<f64>,
}

impl SignalTrack {
    pub fn len(&self) -> usize {
        self.audio.len()
    }

    pub fn is_empty(&self) -> bool {
        self.audio.is_empty()
    }

    /// Whole seconds covered: ceil(n_frames / fps).
    pub fn n_seconds(&self) -> usize {
        let n = self.len() as u64 * u64::from(self.fps.den);
        n.div_ceil(u64::from(self.fps.num)) as usize
    }

    /// Second that frame `k` falls in.
    pub fn second_of(&self, k: usize) -> usize {
        (k as u64 * u64::from(self.fps.den) / u64::from(self.fps.num)) as usize
    }
}

/// Computes all three indicators for one video. Flow for frame 0 is 0.
///
/// Frame pairs are independent, so flow is computed in parallel; the result
/// does not depend on the thread count.
pub fn extract_signals(
    frames: &FrameSeq,
    audio: &AudioTrack,
    config: &SignalConfig,
) -> Result<SignalTrack, SignalError> {
    if frames.is_empty() {
        return Err(SignalError::NoFrames);
    }
    let video_sec = frames.time_of(frames.len());
    let audio_sec = audio.duration_sec();
    if (video_sec - audio_sec).abs() >= 1.0 {
        return Err(SignalError::DurationMismatch {
            video: video_sec,
            audio: audio_sec,
        });
    }
    let n = frames.len();
    let amplitude = audio_amplitude(audio, frames.fps, n);
    let shots = shot_boundaries(&frames.frames, &config.shots);
    let mut flow = vec![0.0];
    let rest: Result<Vec<f64>, SignalError> = frames
        .frames
        .par_windows(2)
        .map(|pair| {
            dense_flow(&pair[0], &pair[1], frames.width, frames.height, &config.flow)
                .map(|f| flow_magnitude(&f))
        })
        .collect();
    flow.extend(rest?);
    Ok(SignalTrack {
        fps: frames.fps,
        audio: amplitude,
        shots,
        flow,
    })
}

#[derive(Serialize, Deserialize)]
struct SignalLine {
    video_id: String,
    frame_idx: usize,
    a: f64,
    b: ShotVotes,
    o: f64,
    fps_num: u32,
    fps_den: u32,
}

/// One JSON object per frame.
pub fn encode_signals(video_id: &str, track: &SignalTrack) -> String {
    let mut out = String::new();
    for k in 0..track.len() {
        let line = SignalLine {
            video_id: video_id.to_string(),
            frame_idx: k,
            a: track.audio[k],
            b: track.shots[k],
            o: track.flow[k],
            fps_num: track.fps.num,
            fps_den: track.fps.den,
        };
        out.push_str(&serde_json::to_string(&line).expect("signal line serialises"));
        out.push('\n');
    }
    out
}

/// Parses a signals cache (possibly holding several videos) into tracks in
/// first-appearance order.
pub fn parse_signals(text: &str) -> Result<Vec<(String, SignalTrack)>, SignalError> {
    let mut out: Vec<(String, SignalTrack)> = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let s: SignalLine = serde_json::from_str(raw).map_err(|e| SignalError::Format {
            line,
            what: e.to_string(),
        })?;
        if s.fps_num == 0 || s.fps_den == 0 {
            return Err(SignalError::Format {
                line,
                what: "fps must be positive".into(),
            });
        }
        if !(s.a.is_finite() && (0.0..=1.0).contains(&s.a) && s.o.is_finite() && s.o >= 0.0)
            || s.b.iter().any(|&x| x > 1)
        {
            return Err(SignalError::Format {
                line,
                what: "indicator out of range".into(),
            });
        }
        let idx = match out.iter().position(|(id, _)| *id == s.video_id) {
            Some(i) => i,
            None => {
                out.push((
                    s.video_id.clone(),
                    SignalTrack {
                        fps: Rational::new(s.fps_num, s.fps_den),
                        audio: vec![],
                        shots: vec![],
                        flow: vec![],
                    },
                ));
                out.len() - 1
            }
        };
        let track = &mut out[idx].1;
        if s.frame_idx != track.len() {
            return Err(SignalError::Format {
                line,
                what: format!("expected frame_idx {}, got {}", track.len(), s.frame_idx),
            });
        }
        track.audio.push(s.a);
        track.shots.push(s.b);
        track.flow.push(s.o);
    }
    Ok(out)
}

pub fn read_signals(path: impl AsRef<Path>) -> Result<Vec<(String, SignalTrack)>, SignalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|source| SignalError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_signals(&text)
}
