//! Dramatic-structure analysis for video advertisements.
//!
//! The crate is organised along the processing pipeline:
//!
//! * [`ingest`] parses Y4M video, PCM WAV audio, annotation and feature files.
//! * [`signals`] computes per-frame climax indicators (audio amplitude,
//!   shot-boundary votes, optical-flow magnitude).
//! * [`climax`] aggregates them per second and picks unsupervised climax
//!   candidates.
//! * [`features`] fuses per-second feature vectors for the recurrent models.
//! * [`seqmodel`] is a from-scratch LSTM with climax and topic/sentiment heads.
//! * [`trainer`] builds targets, folds and runs the training loop.
//! * [`eval`] implements recall@k and agreement-based mAP / acc@1.
//! * [`synth`] generates synthetic corpora with planted ground truth.

pub mod climax;
pub mod error;
pub mod eval;
pub mod features;
pub mod hash;
pub mod ingest;
pub mod seqmodel;
pub mod signals;
pub mod synth;
pub mod trainer;
pub mod vocab;

pub use climax::{ClimaxPrediction, Method, PerSecondSeries};
pub use error::{Error, Result};
pub use features::{FeatureLayout, FrameFeatures, VideoTensor};
pub use ingest::{AudioTrack, FeatureRecord, FrameSeq, VideoRecord, WorkerMark};
pub use seqmodel::{ModelCheckpoint, SeqModel, Task};
pub use signals::{FlowField, SignalTrack};
pub use trainer::{SplitPlan, TrainConfig};
