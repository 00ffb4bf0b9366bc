//! Targets, negative sampling, fold construction and the training loop.

mod log;

use std::time::Instant;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::climax::{top_k_peaks, Method, PerSecondSeries};
use crate::eval::{climax_hit, sentiment_metrics_votes};
use crate::features::{Block, FeatureError, FeatureLayout, Standardizer, VideoTensor};
use crate::hash::Fnv1a;
use crate::seqmodel::{
    DropoutMasks, Example, ModelCheckpoint, ModelConfig, RmsProp, RmsPropConfig, SeqModel,
    Target, Task, TopicConcat, HIDDEN,
};
use crate::vocab::{sentiments, N_SENTIMENTS};

pub use log::{LogRow, TrainLog};

pub const N_FOLDS: usize = 5;
/// Votes at which a sentiment target saturates.
pub const SOFT_TARGET_DIVISOR: f64 = 3.0;
/// Agreement level and window of the model-selection metrics.
pub const SELECT_AGREEMENT: u8 = 2;
pub const SELECT_WINDOW: u32 = 2;

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("training split is empty")]
    EmptyTrainSplit,
    #[error("need at least {N_FOLDS} videos to build folds, got {0}")]
    TooFewVideos(usize),
    #[error("fold {0} out of range")]
    BadFold(usize),
    #[error("non-finite loss at step {step} (last finite loss: {last_finite:?})")]
    NonFiniteLoss { step: u64, last_finite: Option<f64> },
    #[error("videos have {found} columns, expected {expected}")]
    UnknownLayout { expected: String, found: usize },
    #[error("invalid config: {0}")]
    Config(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct TrainConfig {
    pub task: Task,
    pub steps: u64,
    pub batch: usize,
    pub lr: f64,
    pub decay: f64,
    pub momentum: f64,
    pub epsilon: f64,
    pub keep_prob: f64,
    pub neg_ratio: usize,
    pub seed: u64,
    pub eval_every: u64,
    /// Feature blocks fed to the model; `None` uses every block present.
    pub blocks: Option<Vec<Block>>,
    /// Redraw the negative sample every step instead of once per run.
    pub resample_negatives: bool,
    pub topic_concat: TopicConcat,
    pub hidden: usize,
}

impl Default for TrainConfig {
    fn default() -> Self {
        let opt = RmsPropConfig::default();
        TrainConfig {
            task: Task::Climax,
            steps: 20_000,
            batch: 32,
            lr: opt.lr,
            decay: opt.decay,
            momentum: opt.momentum,
            epsilon: opt.epsilon,
            keep_prob: 0.5,
            neg_ratio: 5,
            seed: 0,
            eval_every: 500,
            blocks: None,
            resample_negatives: false,
            topic_concat: TopicConcat::Logits,
            hidden: HIDDEN,
        }
    }
}

impl TrainConfig {
    pub fn rmsprop(&self) -> RmsPropConfig {
        RmsPropConfig {
            lr: self.lr,
            decay: self.decay,
            momentum: self.momentum,
            epsilon: self.epsilon,
        }
    }

    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.into()));
        if self.batch == 0 {
            return bad("batch must be positive");
        }
        if !(self.keep_prob > 0.0 && self.keep_prob <= 1.0) {
            return bad("keep_prob must be in (0, 1]");
        }
        if !(self.lr > 0.0) || !(0.0..1.0).contains(&self.decay) || self.epsilon <= 0.0 {
            return bad("optimizer hyperparameters out of range");
        }
        if self.eval_every == 0 {
            return bad("eval_every must be positive");
        }
        if self.hidden == 0 {
            return bad("hidden must be positive");
        }
        Ok(())
    }
}

/// 1 at every second containing an accepted mark, else 0.
pub fn climax_targets(marks: &[f64], n_seconds: usize) -> Vec<f64> {
    let mut t = vec![0.0; n_seconds];
    for &m in marks {
        let s = m.floor();
        if s >= 0.0 && (s as usize) < n_seconds {
            t[s as usize] = 1.0;
        }
    }
    t
}

pub fn sentiment_soft_targets(votes: &[u8; N_SENTIMENTS]) -> [f64; N_SENTIMENTS] {
    votes.map(|v| (v as f64 / SOFT_TARGET_DIVISOR).min(1.0))
}

/// Per-class loss weights: every positive, plus at most `ratio * n_pos`
/// negatives drawn uniformly with a generator seeded by `seed`.
#[derive(Debug, Clone, PartialEq)]
pub struct NegativeSample {
    /// `videos x 30`
    pub weights: Vec<[f64; N_SENTIMENTS]>,
    /// Classes without positives (all weights 0).
    pub empty_classes: Vec<usize>,
}

pub fn negative_sampling_weights(
    targets: &[[f64; N_SENTIMENTS]],
    ratio: usize,
    seed: u64,
) -> NegativeSample {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut weights = vec![[0.0; N_SENTIMENTS]; targets.len()];
    let mut empty_classes = Vec::new();
    for c in 0..N_SENTIMENTS {
        let (pos, neg): (Vec<usize>, Vec<usize>) =
            (0..targets.len()).partition(|&v| targets[v][c] > 0.0);
        if pos.is_empty() {
            empty_classes.push(c);
            continue;
        }
        for &v in &pos {
            weights[v][c] = 1.0;
        }
        let keep = (ratio * pos.len()).min(neg.len());
        for &v in neg.choose_multiple(&mut rng, keep) {
            weights[v][c] = 1.0;
        }
    }
    NegativeSample {
        weights,
        empty_classes,
    }
}

/// Train/val/test assignment for one fold.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SplitPlan {
    pub fold: usize,
    pub train: Vec<String>,
    pub val: Vec<String>,
    pub test: Vec<String>,
}

/// Five rotated folds: ids are ordered by a seeded hash, cut into five
/// contiguous chunks; fold `f` tests on chunk `f`, validates on `f + 1`.
pub fn make_splits(video_ids: &[String], seed: u64) -> Result<Vec<SplitPlan>, TrainError> {
    let mut ids: Vec<&String> = video_ids.iter().collect();
    ids.sort();
    ids.dedup();
    if ids.len() < N_FOLDS {
        return Err(TrainError::TooFewVideos(ids.len()));
    }
    let key = |id: &str| {
        Fnv1a::default()
            .update(&seed.to_le_bytes())
            .update(id.as_bytes())
            .finish()
    };
    ids.sort_by_cached_key(|id| (key(id), (*id).clone()));
    let n = ids.len();
    let chunks: Vec<Vec<String>> = (0..N_FOLDS)
        .map(|i| {
            ids[i * n / N_FOLDS..(i + 1) * n / N_FOLDS]
                .iter()
                .map(|s| (*s).clone())
                .collect()
        })
        .collect();
    Ok((0..N_FOLDS)
        .map(|f| {
            let v = (f + 1) % N_FOLDS;
            let mut train: Vec<String> = (0..N_FOLDS)
                .filter(|&i| i != f && i != v)
                .flat_map(|i| chunks[i].iter().cloned())
                .collect();
            train.sort();
            let mut val = chunks[v].clone();
            val.sort();
            let mut test = chunks[f].clone();
            test.sort();
            SplitPlan {
                fold: f,
                train,
                val,
                test,
            }
        })
        .collect())
}

impl SplitPlan {
    /// Partitions `videos` by this plan; videos not named are dropped.
    pub fn apply(&self, videos: &[VideoTensor]) -> [Vec<VideoTensor>; 3] {
        let pick = |ids: &[String]| -> Vec<VideoTensor> {
            videos
                .iter()
                .filter(|v| ids.binary_search(&v.video_id).is_ok())
                .cloned()
                .collect()
        };
        [pick(&self.train), pick(&self.val), pick(&self.test)]
    }
}

/// Column selection plus standardization applied before the model.
#[derive(Debug, Clone, PartialEq)]
pub struct FeaturePipeline {
    pub layout: FeatureLayout,
    pub blocks: Vec<Block>,
    pub columns: Vec<usize>,
    pub standardizer: Option<Standardizer>,
}

impl FeaturePipeline {
    pub fn new(source_dim: usize, blocks: Option<&[Block]>) -> Result<Self, TrainError> {
        let layout = FeatureLayout::for_dim(source_dim).ok_or_else(|| {
            TrainError::UnknownLayout {
                expected: format!("{} or {}", FeatureLayout::base().dim(), FeatureLayout::with_climax().dim()),
                found: source_dim,
            }
        })?;
        let blocks: Vec<Block> = match blocks {
            Some(sel) => layout
                .blocks()
                .iter()
                .copied()
                .filter(|b| sel.contains(b))
                .collect(),
            None => layout.blocks().to_vec(),
        };
        if blocks.is_empty() {
            return Err(TrainError::Config("no selected feature block is present".into()));
        }
        let columns = layout.columns(&blocks);
        Ok(FeaturePipeline {
            layout,
            blocks,
            columns,
            standardizer: None,
        })
    }

    pub fn from_checkpoint(ckpt: &ModelCheckpoint, source_dim: usize) -> Result<Self, TrainError> {
        let mut p = Self::new(source_dim, Some(&ckpt.blocks))?;
        if p.layout.hash() != ckpt.layout_hash {
            return Err(TrainError::UnknownLayout {
                expected: format!("layout {:#018x}", ckpt.layout_hash),
                found: source_dim,
            });
        }
        p.standardizer = ckpt.standardizer.clone();
        Ok(p)
    }

    pub fn fit(&mut self, train: &[VideoTensor]) -> Result<(), TrainError> {
        let selected: Vec<VideoTensor> = train.iter().map(|v| v.select(&self.columns)).collect();
        let refs: Vec<&VideoTensor> = selected.iter().collect();
        self.standardizer = Some(Standardizer::fit(&refs)?);
        Ok(())
    }

    pub fn prepare(&self, video: &VideoTensor) -> VideoTensor {
        let v = video.select(&self.columns);
        match &self.standardizer {
            Some(s) => s.apply(&v),
            None => v,
        }
    }
}

/// Per-second climax probabilities of a checkpoint on a raw video tensor.
pub fn predict_climax(
    ckpt: &ModelCheckpoint,
    video: &VideoTensor,
) -> Result<Vec<f64>, crate::Error> {
    let p = FeaturePipeline::from_checkpoint(ckpt, video.dim)?;
    let x = p.prepare(video);
    Ok(ckpt.model.forward_climax(&x.data, &vec![true; x.n_frames()])?)
}

/// Sentiment probabilities and topic logits of a checkpoint.
pub fn predict_sentiment(
    ckpt: &ModelCheckpoint,
    video: &VideoTensor,
) -> Result<(Vec<f64>, Vec<f64>), crate::Error> {
    let p = FeaturePipeline::from_checkpoint(ckpt, video.dim)?;
    let x = p.prepare(video);
    let out = ckpt.model.forward_sentiment(&x.data, &vec![true; x.n_frames()])?;
    let probs = out
        .sentiment_logits
        .iter()
        .map(|&z| crate::seqmodel::loss::sigmoid(z))
        .collect();
    Ok((probs, out.topic_logits))
}

struct Prepared {
    videos: Vec<VideoTensor>,
    masks: Vec<Vec<bool>>,
}

impl Prepared {
    fn new(pipeline: &FeaturePipeline, videos: &[&VideoTensor]) -> Self {
        let videos: Vec<VideoTensor> = videos.iter().map(|v| pipeline.prepare(v)).collect();
        let masks = videos.iter().map(|v| vec![true; v.n_frames()]).collect();
        Prepared { videos, masks }
    }
}

fn eligible(task: Task, v: &VideoTensor) -> bool {
    v.n_frames() > 0
        && match task {
            Task::Climax => v.labels.climax_marks.is_some(),
            Task::Sentiment => true,
        }
}

/// Validation metric used for model selection.
fn val_metric(model: &SeqModel, val: &Prepared) -> f64 {
    match model.config.task {
        Task::Climax => {
            let mut hits = 0usize;
            let mut n = 0usize;
            for (v, mask) in val.videos.iter().zip(&val.masks) {
                let marks = v.labels.climax_marks.as_deref().unwrap_or(&[]);
                if marks.is_empty() {
                    continue;
                }
                n += 1;
                let probs = model.forward_climax(&v.data, mask).expect("checked dims");
                let pred = top_k_peaks(&PerSecondSeries::new(probs), 1, Method::Lstm);
                if climax_hit(&pred.timestamps_sec, marks, 1, SELECT_WINDOW) {
                    hits += 1;
                }
            }
            if n == 0 {
                0.0
            } else {
                hits as f64 / n as f64
            }
        }
        Task::Sentiment => {
            if val.videos.is_empty() {
                return 0.0;
            }
            let scores: Vec<Vec<f64>> = val
                .videos
                .iter()
                .zip(&val.masks)
                .map(|(v, m)| {
                    model
                        .forward_sentiment(&v.data, m)
                        .expect("non-empty, checked dims")
                        .sentiment_logits
                })
                .collect();
            let ids: Vec<&str> = val.videos.iter().map(|v| v.video_id.as_str()).collect();
            let votes: Vec<_> = val.videos.iter().map(|v| v.labels.sentiment_votes).collect();
            let levels = sentiment_metrics_votes(&scores, &ids, &votes).expect("finite scores");
            levels
                .iter()
                .find(|m| m.agreement == SELECT_AGREEMENT)
                .map_or(0.0, |m| m.map)
        }
    }
}

/// Runs `config.steps` RMSprop updates and returns the checkpoint with the
/// best validation metric (earliest on ties) together with the log.
///
/// Videos are ordered by id before anything else, so the input order does
/// not matter.
pub fn train(
    config: &TrainConfig,
    train: &[VideoTensor],
    val: &[VideoTensor],
) -> Result<(ModelCheckpoint, TrainLog), TrainError> {
    config.validate()?;
    let mut train_set: Vec<&VideoTensor> =
        train.iter().filter(|v| eligible(config.task, v)).collect();
    if train_set.is_empty() {
        return Err(TrainError::EmptyTrainSplit);
    }
    train_set.sort_by(|a, b| a.video_id.cmp(&b.video_id));
    let mut val_set: Vec<&VideoTensor> = val.iter().filter(|v| eligible(config.task, v)).collect();
    val_set.sort_by(|a, b| a.video_id.cmp(&b.video_id));

    let source_dim = train_set[0].dim;
    let mut pipeline = FeaturePipeline::new(source_dim, config.blocks.as_deref())?;
    for v in train_set.iter().chain(&val_set) {
        if v.dim != source_dim {
            return Err(FeatureError::Dimension {
                expected: source_dim,
                actual: v.dim,
            }
            .into());
        }
    }
    let owned: Vec<VideoTensor> = train_set.iter().map(|v| (*v).clone()).collect();
    pipeline.fit(&owned)?;
    let tr = Prepared::new(&pipeline, &train_set);
    let va = Prepared::new(&pipeline, &val_set);

    let mut mcfg = ModelConfig::new(config.task, pipeline.columns.len());
    mcfg.hidden = config.hidden;
    mcfg.topic_concat = config.topic_concat;
    let mut model = SeqModel::init(mcfg, config.seed);
    let mut opt = RmsProp::new(config.rmsprop(), &model.params);

    let soft: Vec<[f64; N_SENTIMENTS]> = tr
        .videos
        .iter()
        .map(|v| sentiment_soft_targets(&v.labels.sentiment_votes))
        .collect();
    let mut neg = negative_sampling_weights(&soft, config.neg_ratio, config.seed);
    let mut log = TrainLog::default();
    if config.task == Task::Sentiment {
        log.empty_classes = neg
            .empty_classes
            .iter()
            .map(|&c| sentiments()[c].to_string())
            .collect();
    }

    let snapshot = |model: &SeqModel, opt: &RmsProp, step: u64| ModelCheckpoint {
        model: model.clone(),
        layout_hash: pipeline.layout.hash(),
        blocks: pipeline.blocks.clone(),
        standardizer: pipeline.standardizer.clone(),
        optimizer: Some(opt.clone()),
        seed: config.seed,
        step,
        keep_prob: config.keep_prob,
    };
    let mut best = snapshot(&model, &opt, 0);
    let mut best_metric = f64::NEG_INFINITY;

    let mut rng = ChaCha8Rng::seed_from_u64(config.seed ^ 0x9e37_79b9_7f4a_7c15);
    let mut order: Vec<usize> = Vec::new();
    let mut last_finite = None;
    let started = Instant::now();
    for step in 1..=config.steps {
        if config.resample_negatives && step > 1 {
            neg = negative_sampling_weights(&soft, config.neg_ratio, config.seed.wrapping_add(step));
        }
        let mut batch_idx = Vec::with_capacity(config.batch);
        while batch_idx.len() < config.batch {
            if order.is_empty() {
                order = (0..tr.videos.len()).collect();
                order.shuffle(&mut rng);
                order.reverse();
            }
            batch_idx.push(order.pop().unwrap());
        }
        let batch: Vec<Example> = batch_idx
            .iter()
            .map(|&i| {
                let v = &tr.videos[i];
                let rows = v.n_frames();
                let target = match config.task {
                    Task::Climax => Target::Climax {
                        targets: climax_targets(
                            v.labels.climax_marks.as_deref().unwrap_or(&[]),
                            rows,
                        ),
                        weights: vec![1.0; rows],
                    },
                    Task::Sentiment => Target::Sentiment {
                        targets: soft[i].to_vec(),
                        weights: neg.weights[i].to_vec(),
                        topic: v.labels.topic,
                    },
                };
                let dropout = (config.keep_prob < 1.0).then(|| {
                    DropoutMasks::sample(&mut rng, rows, v.dim, config.hidden, config.keep_prob)
                });
                Example {
                    x: &v.data,
                    mask: &tr.masks[i],
                    target,
                    dropout,
                }
            })
            .collect();
        let g = model.loss_and_grad(&batch, false);
        if !g.loss.is_finite() || !g.grads.all_finite() {
            return Err(TrainError::NonFiniteLoss { step, last_finite });
        }
        last_finite = Some(g.loss);
        opt.update(&mut model.params, &g.grads);

        let val_metric = (step % config.eval_every == 0 || step == config.steps)
            .then(|| val_metric(&model, &va));
        if let Some(m) = val_metric {
            if m > best_metric {
                best_metric = m;
                best = snapshot(&model, &opt, step);
            }
        }
        log.rows.push(LogRow {
            step,
            train_loss: g.loss,
            val_metric,
            wall_ms: started.elapsed().as_millis() as u64,
        });
    }
    if best_metric.is_finite() {
        log.best_step = Some(best.step);
        log.best_metric = Some(best_metric);
    }
    Ok((best, log))
}
