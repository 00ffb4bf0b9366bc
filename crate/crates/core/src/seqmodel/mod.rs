//! LSTM sequence model with a per-frame climax head and a topic→sentiment
//! head stack, trained by exact backpropagation through time.

mod checkpoint;
pub mod loss;
pub mod lstm;
mod model;
mod rmsprop;
pub mod tensor;

use thiserror::Error;

pub use checkpoint::{
    decode_checkpoint, encode_checkpoint, load_checkpoint, save_checkpoint, ModelCheckpoint,
    CHECKPOINT_VERSION,
};
pub use model::{
    BatchGrad, DropoutMasks, Example, ModelConfig, SentimentOutput, SeqModel, Target, Task,
    TopicConcat, HIDDEN,
};
pub use rmsprop::{RmsProp, RmsPropConfig};
pub use tensor::{ParamSet, Tensor};

#[derive(Debug, Error)]
pub enum ModelError {
    #[error("input dimension: expected {expected}, got {actual}")]
    InputDim { expected: usize, actual: usize },
    #[error("sequence has no unmasked frames")]
    EmptySequence,
    #[error("model is for task {found}, expected {expected}")]
    WrongTask { expected: Task, found: Task },
    #[error("not a checkpoint file (bad magic)")]
    BadMagic,
    #[error("checkpoint version {found}, this build reads {expected}")]
    Version { found: u32, expected: u32 },
    #[error("checkpoint feature layout {found:#018x} does not match {expected:#018x}")]
    LayoutMismatch { found: u64, expected: u64 },
    #[error("checkpoint truncated at byte {offset}")]
    Truncated { offset: usize },
    #[error("checkpoint format: {0}")]
    Format(String),
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}
