//! Synthetic corpora with planted ground truth.
//!
//! Climax corpus: every video carries a loud audio burst and a hard scene
//! cut at its climax second, and the annotators mark that second. Climax
//! seconds are assigned stratified (each second of the video appears equally
//! often, up to `n mod duration`) in a seeded random order.
//!
//! Sentiment corpus: classes [`PLANTED`] are positive exactly when their
//! feature dimension is active in some frame.

use std::collections::BTreeMap;
use std::f64::consts::PI;
use std::path::Path;

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::ingest::{
    self, AudioTrack, FeatureRecord, FrameSeq, IngestError, Rational, VideoRecord, WorkerMark,
    FACES_DIM, OBJECTS_DIM, PLACES_DIM, RESNET_DIM,
};
use crate::vocab::{sentiments, N_SENTIMENTS};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum SynthKind {
    Climax,
    Sentiment,
}

impl std::str::FromStr for SynthKind {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "climax" => Ok(SynthKind::Climax),
            "sentiment" => Ok(SynthKind::Sentiment),
            _ => Err(format!("unknown corpus kind '{s}'")),
        }
    }
}

/// Feature block a planted class is wired to.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PlantedBlock {
    Places,
    Objects,
    Faces,
}

/// `(sentiment class, block, dimension)`
pub const PLANTED: [(usize, PlantedBlock, usize); 3] = [
    (7, PlantedBlock::Places, 3),
    (12, PlantedBlock::Objects, 5),
    (20, PlantedBlock::Faces, 0),
];

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub kind: SynthKind,
    pub n: usize,
    pub seed: u64,
    pub duration_sec: usize,
    pub fps: u32,
    pub width: usize,
    pub height: usize,
    pub sample_rate: u32,
    pub workers: usize,
    /// Peak amplitude of the climax burst; background audio stays below
    /// `background_amplitude`.
    pub spike_amplitude: f64,
    pub background_amplitude: f64,
}

impl SynthConfig {
    pub fn new(kind: SynthKind, n: usize, seed: u64) -> Self {
        let (duration_sec, fps, side) = match kind {
            SynthKind::Climax => (25, 4, 32),
            SynthKind::Sentiment => (8, 2, 16),
        };
        SynthConfig {
            kind,
            n,
            seed,
            duration_sec,
            fps,
            width: side,
            height: side * 3 / 4,
            sample_rate: 4000,
            workers: 3,
            spike_amplitude: 0.9,
            background_amplitude: 0.2,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthVideo {
    pub record: VideoRecord,
    pub frames: FrameSeq,
    pub audio: AudioTrack,
    pub features: Vec<FeatureRecord>,
    pub climax_second: Option<usize>,
}

/// Generator parameters and the planted truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthManifest {
    pub config: SynthConfig,
    pub video_ids: Vec<String>,
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub climax_seconds: BTreeMap<String, usize>,
    /// Planted class name -> positive video ids.
    #[serde(skip_serializing_if = "BTreeMap::is_empty", default)]
    pub planted_positives: BTreeMap<String, Vec<String>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SynthCorpus {
    pub config: SynthConfig,
    pub videos: Vec<SynthVideo>,
}

impl SynthCorpus {
    pub fn manifest(&self) -> SynthManifest {
        let mut planted_positives = BTreeMap::new();
        if self.config.kind == SynthKind::Sentiment {
            for (class, _, _) in PLANTED {
                let ids = self
                    .videos
                    .iter()
                    .filter(|v| v.record.sentiment_votes[class] > 0)
                    .map(|v| v.record.video_id.clone())
                    .collect();
                planted_positives.insert(sentiments()[class].to_string(), ids);
            }
        }
        SynthManifest {
            config: self.config.clone(),
            video_ids: self.videos.iter().map(|v| v.record.video_id.clone()).collect(),
            climax_seconds: self
                .videos
                .iter()
                .filter_map(|v| v.climax_second.map(|c| (v.record.video_id.clone(), c)))
                .collect(),
            planted_positives,
        }
    }

    pub fn records(&self) -> Vec<VideoRecord> {
        self.videos.iter().map(|v| v.record.clone()).collect()
    }

    /// Writes `video/<id>.y4m`, `audio/<id>.wav`, `annotations.jsonl`,
    /// `features.jsonl` and `synth.json` under `dir`.
    pub fn write(&self, dir: impl AsRef<Path>) -> Result<(), IngestError> {
        let dir = dir.as_ref();
        let mkdir = |p: &Path| {
            std::fs::create_dir_all(p).map_err(|source| IngestError::Io {
                path: p.display().to_string(),
                source,
            })
        };
        mkdir(&dir.join("video"))?;
        mkdir(&dir.join("audio"))?;
        self.videos.par_iter().try_for_each(|v| {
            let id = &v.record.video_id;
            ingest::write_y4m(dir.join("video").join(format!("{id}.y4m")), &v.frames)?;
            ingest::write_wav(dir.join("audio").join(format!("{id}.wav")), &v.audio)
        })?;
        ingest::write_annotations(dir.join("annotations.jsonl"), &self.records())?;
        let feats: Vec<FeatureRecord> =
            self.videos.iter().flat_map(|v| v.features.iter().cloned()).collect();
        ingest::write_features(dir.join("features.jsonl"), &feats)?;
        let manifest = serde_json::to_string_pretty(&self.manifest()).expect("manifest serializes");
        let path = dir.join("synth.json");
        std::fs::write(&path, manifest + "\n").map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })
    }
}

/// Generates a corpus; identical for identical configs.
pub fn generate(config: &SynthConfig) -> SynthCorpus {
    assert!(config.n > 0 && config.duration_sec > 0 && config.fps > 0);
    let mut master = ChaCha8Rng::seed_from_u64(config.seed);
    let mut climax: Vec<usize> = (0..config.n).map(|i| i % config.duration_sec).collect();
    climax.shuffle(&mut master);
    let seeds: Vec<u64> = (0..config.n).map(|_| master.gen()).collect();
    let videos = (0..config.n)
        .into_par_iter()
        .map(|i| {
            let mut rng = ChaCha8Rng::seed_from_u64(seeds[i]);
            match config.kind {
                SynthKind::Climax => climax_video(config, i, climax[i], &mut rng),
                SynthKind::Sentiment => sentiment_video(config, i, &mut rng),
            }
        })
        .collect();
    SynthCorpus {
        config: config.clone(),
        videos,
    }
}

fn video_id(kind: SynthKind, i: usize) -> String {
    match kind {
        SynthKind::Climax => format!("clx{i:04}"),
        SynthKind::Sentiment => format!("snt{i:04}"),
    }
}

/// Periodic texture; a horizontal shift by whole periods leaves the
/// histogram unchanged, so drifting never trips the shot detector.
fn texture(w: usize, h: usize, shift: usize, base: f64) -> Vec<u8> {
    let mut f = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let v = base
                + 30.0 * (2.0 * PI * (x + shift) as f64 / 8.0).sin() * (2.0 * PI * y as f64 / 6.0).cos();
            f.push(v.round().clamp(0.0, 255.0) as u8);
        }
    }
    f
}

fn frames(config: &SynthConfig, cut_at: Option<usize>) -> FrameSeq {
    let n = config.duration_sec * config.fps as usize;
    let frames = (0..n)
        .map(|k| {
            let after = cut_at.is_some_and(|c| k >= c);
            let base = if after { 180.0 } else { 60.0 };
            texture(config.width, config.height, k, base)
        })
        .collect();
    FrameSeq::new(config.width, config.height, Rational::new(config.fps, 1), frames)
}

fn background_audio(config: &SynthConfig, rng: &mut impl Rng) -> Vec<f64> {
    let sr = config.sample_rate as f64;
    let n = config.duration_sec * config.sample_rate as usize;
    let a = config.background_amplitude * 0.75;
    let tone: f64 = rng.gen_range(110.0..440.0);
    (0..n)
        .map(|j| {
            let t = j as f64 / sr;
            let env = 0.5 + 0.5 * (2.0 * PI * 0.3 * t).sin();
            a * env * (2.0 * PI * tone * t).sin() + rng.gen_range(-0.2..0.2) * a
        })
        .collect()
}

// distractor mass lands on a small pool of recurring scenes, like a real classifier
const SCENE_POOL: usize = 24;

fn places_dist(rng: &mut impl Rng, planted: Option<usize>, avoid: usize) -> Vec<f64> {
    let mut p = vec![0.0; PLACES_DIM];
    let mut masses = vec![0.5, 0.3, 0.2];
    if let Some(d) = planted {
        p[d] = 0.6;
        masses = vec![0.25, 0.15];
    }
    for m in masses {
        let d = loop {
            let d = rng.gen_range(0..SCENE_POOL);
            if d != avoid && p[d] == 0.0 {
                break d;
            }
        };
        p[d] = m;
    }
    p
}

fn round3(x: f64) -> f64 {
    (x * 1000.0).round() / 1000.0
}

fn feature_records(
    id: &str,
    config: &SynthConfig,
    rng: &mut impl Rng,
    mut active: impl FnMut(usize, PlantedBlock) -> Option<usize>,
) -> Vec<FeatureRecord> {
    let avoid = |b: PlantedBlock| {
        PLANTED
            .iter()
            .find(|p| p.1 == b)
            .map(|p| p.2)
            .unwrap()
    };
    (0..config.duration_sec)
        .map(|s| {
            let mut resnet = vec![0.0; RESNET_DIM];
            for _ in 0..16 {
                resnet[rng.gen_range(0..RESNET_DIM)] = round3(rng.gen_range(0.0..2.0));
            }
            let places = places_dist(rng, active(s, PlantedBlock::Places), avoid(PlantedBlock::Places));
            let objects_avoid = avoid(PlantedBlock::Objects);
            let mut objects: Vec<f64> = (0..OBJECTS_DIM)
                .map(|d| if d == objects_avoid { 0.0 } else { round3(rng.gen_range(0.0..0.1)) })
                .collect();
            if let Some(d) = active(s, PlantedBlock::Objects) {
                objects[d] = 0.9;
            }
            let mut faces = vec![0.0; FACES_DIM];
            if let Some(d) = active(s, PlantedBlock::Faces) {
                faces[d] = 0.9;
                faces[1] = 0.1;
                faces[8] = 0.5;
                faces[9] = 0.3;
            } else if rng.gen_bool(0.3) {
                // a face with some other expression
                let e = rng.gen_range(1..8);
                faces[e] = 1.0;
                faces[8] = round3(rng.gen_range(-1.0..1.0));
                faces[9] = round3(rng.gen_range(-1.0..1.0));
            }
            FeatureRecord {
                video_id: id.to_string(),
                frame_idx: s as u64,
                t_sec: s as f64,
                resnet,
                places,
                objects,
                faces,
            }
        })
        .collect()
}

fn climax_video(config: &SynthConfig, i: usize, c: usize, rng: &mut ChaCha8Rng) -> SynthVideo {
    let id = video_id(config.kind, i);
    let fps = config.fps as usize;
    let frames = frames(config, (c > 0).then_some(c * fps));

    let mut samples = background_audio(config, rng);
    let sr = config.sample_rate as usize;
    let burst = sr / 20;
    let start = c * sr + rng.gen_range(0..sr - burst);
    for (j, s) in samples[start..start + burst].iter_mut().enumerate() {
        let env = (PI * j as f64 / burst as f64).sin();
        *s = config.spike_amplitude * env * if j % 2 == 0 { 1.0 } else { -0.8 };
    }
    // guarantee the exact peak value regardless of the envelope sampling
    samples[start + burst / 2] = config.spike_amplitude;

    let mut workers: Vec<WorkerMark> = (0..config.workers)
        .map(|_| WorkerMark {
            has_climax: true,
            t_sec: Some(c as f64 + round3(rng.gen_range(0.05..0.95))),
            rejected: false,
        })
        .collect();
    // one rejected worker pointing somewhere else
    workers.push(WorkerMark {
        has_climax: true,
        t_sec: Some(rng.gen_range(0..config.duration_sec) as f64),
        rejected: true,
    });
    let record = VideoRecord {
        video_id: id.clone(),
        duration_sec: config.duration_sec as f64,
        fps: config.fps as f64,
        workers,
        sentiment_votes: [0; N_SENTIMENTS],
        topic: None,
    };
    let features = feature_records(&id, config, rng, |_, _| None);
    SynthVideo {
        record,
        frames,
        audio: AudioTrack {
            sample_rate: config.sample_rate,
            samples,
        },
        features,
        climax_second: Some(c),
    }
}

fn sentiment_video(config: &SynthConfig, i: usize, rng: &mut ChaCha8Rng) -> SynthVideo {
    let id = video_id(config.kind, i);
    let d = config.duration_sec;
    let mut votes = [0u8; N_SENTIMENTS];
    for (c, v) in votes.iter_mut().enumerate() {
        if PLANTED.iter().all(|p| p.0 != c) {
            *v = [0, 0, 0, 1][rng.gen_range(0..4)];
        }
    }
    // seconds at which each planted block fires, empty for negatives
    let mut fire: Vec<(PlantedBlock, usize, Vec<usize>)> = Vec::new();
    for (class, block, dim) in PLANTED {
        let positive = rng.gen_bool(0.5);
        let mut secs = Vec::new();
        if positive {
            votes[class] = rng.gen_range(3..=5);
            let k = rng.gen_range(1..=3.min(d));
            secs = rand::seq::index::sample(rng, d, k).into_vec();
        }
        fire.push((block, dim, secs));
    }
    let features = feature_records(&id, config, rng, |s, b| {
        fire.iter()
            .find(|(block, _, secs)| *block == b && secs.contains(&s))
            .map(|(_, dim, _)| *dim)
    });
    let record = VideoRecord {
        video_id: id.clone(),
        duration_sec: d as f64,
        fps: config.fps as f64,
        workers: vec![WorkerMark {
            has_climax: false,
            t_sec: None,
            rejected: false,
        }],
        sentiment_votes: votes,
        topic: None,
    };
    SynthVideo {
        record,
        frames: frames(config, None),
        audio: AudioTrack {
            sample_rate: config.sample_rate,
            samples: background_audio(config, rng),
        },
        features,
        climax_second: None,
    }
}
