use std::fmt;
use std::str::FromStr;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::loss::{sigmoid, sigmoid_ce_elem, softmax, softmax_ce};
use super::lstm::{backward_seq, forward_seq, LstmGrads, LstmWeights, SeqCache};
use super::tensor::{mat_vec_acc, outer_acc, vec_mat_acc, ParamSet, Tensor};
use super::ModelError;
use crate::vocab::{N_SENTIMENTS, N_TOPICS};

pub const HIDDEN: usize = 64;
/// Examples per gradient worker. Fixed so the reduction order does not
/// depend on the thread count.
const GRAD_CHUNK: usize = 4;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Task {
    Climax,
    Sentiment,
}

impl fmt::Display for Task {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Task::Climax => "climax",
            Task::Sentiment => "sentiment",
        })
    }
}

impl FromStr for Task {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "climax" => Ok(Task::Climax),
            "sentiment" => Ok(Task::Sentiment),
            _ => Err(format!("unknown task '{s}'")),
        }
    }
}

/// What the sentiment head sees of the topic branch.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum TopicConcat {
    #[default]
    Logits,
    Probs,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ModelConfig {
    pub task: Task,
    pub input_dim: usize,
    pub hidden: usize,
    pub topic_concat: TopicConcat,
    pub forget_bias: f64,
    /// Weight of the topic term in the sentiment loss.
    pub topic_weight: f64,
}

impl ModelConfig {
    pub fn new(task: Task, input_dim: usize) -> Self {
        ModelConfig {
            task,
            input_dim,
            hidden: HIDDEN,
            topic_concat: TopicConcat::Logits,
            forget_bias: 1.0,
            topic_weight: 1.0,
        }
    }

    /// `(name, shape)` of every parameter tensor, in storage order.
    pub fn shapes(&self) -> Vec<(&'static str, Vec<usize>)> {
        let (d, h) = (self.input_dim, self.hidden);
        let mut v = vec![
            ("lstm.w_x", vec![d, 4 * h]),
            ("lstm.w_h", vec![h, 4 * h]),
            ("lstm.b", vec![4 * h]),
        ];
        match self.task {
            Task::Climax => {
                v.push(("climax.w", vec![h]));
                v.push(("climax.b", vec![1]));
            }
            Task::Sentiment => {
                v.push(("topic.w", vec![h, N_TOPICS]));
                v.push(("topic.b", vec![N_TOPICS]));
                v.push(("sentiment.w", vec![h + N_TOPICS, N_SENTIMENTS]));
                v.push(("sentiment.b", vec![N_SENTIMENTS]));
            }
        }
        v
    }
}

/// Inverted-dropout multipliers for one sequence, one per row.
#[derive(Debug, Clone, PartialEq)]
pub struct DropoutMasks {
    /// `rows x input_dim`
    pub input: Vec<f64>,
    /// `rows x hidden`
    pub output: Vec<f64>,
}

impl DropoutMasks {
    pub fn sample(
        rng: &mut impl Rng,
        rows: usize,
        input_dim: usize,
        hidden: usize,
        keep_prob: f64,
    ) -> Self {
        let mut draw = |n: usize| -> Vec<f64> {
            (0..n)
                .map(|_| {
                    if rng.gen::<f64>() < keep_prob {
                        1.0 / keep_prob
                    } else {
                        0.0
                    }
                })
                .collect()
        };
        let input = draw(rows * input_dim);
        let output = draw(rows * hidden);
        DropoutMasks { input, output }
    }
}

/// Supervision for one sequence.
#[derive(Debug, Clone, PartialEq)]
pub enum Target {
    /// Per-row targets and weights (rows = mask length).
    Climax { targets: Vec<f64>, weights: Vec<f64> },
    /// Soft sentiment targets and per-class weights.
    Sentiment {
        targets: Vec<f64>,
        weights: Vec<f64>,
        topic: Option<usize>,
    },
}

#[derive(Debug, Clone)]
pub struct Example<'a> {
    /// `mask.len() x input_dim`, row-major.
    pub x: &'a [f64],
    pub mask: &'a [bool],
    pub target: Target,
    pub dropout: Option<DropoutMasks>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SentimentOutput {
    pub topic_logits: Vec<f64>,
    pub sentiment_logits: Vec<f64>,
}

/// Loss, parameter gradients and (optionally) input gradients of a batch.
#[derive(Debug, Clone)]
pub struct BatchGrad {
    pub loss: f64,
    pub grads: ParamSet,
    pub input_grads: Option<Vec<Vec<f64>>>,
}

/// LSTM with 64 hidden units plus a task head.
#[derive(Debug, Clone, PartialEq)]
pub struct SeqModel {
    pub config: ModelConfig,
    pub params: ParamSet,
}

struct Norms {
    climax: f64,
    sentiment: f64,
    topic: f64,
}

impl SeqModel {
    /// Zero weights; biases zero except the forget gate.
    pub fn zeros(config: ModelConfig) -> Self {
        let tensors = config
            .shapes()
            .into_iter()
            .map(|(name, shape)| Tensor::zeros(name, &shape))
            .collect();
        let mut m = SeqModel {
            config,
            params: ParamSet { tensors },
        };
        let h = config.hidden;
        m.params.tensors[2].data[h..2 * h].fill(config.forget_bias);
        m
    }

    /// Uniform(-s, s) weights with s = 1/sqrt(fan_in).
    pub fn init(config: ModelConfig, seed: u64) -> Self {
        let mut m = Self::zeros(config);
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        for t in &mut m.params.tensors {
            if t.name.ends_with(".b") {
                continue;
            }
            // rows are the fan-in for every weight, including the 1-D climax.w
            let s = 1.0 / (t.shape[0] as f64).sqrt();
            for x in &mut t.data {
                *x = rng.gen_range(-s..s);
            }
        }
        m
    }

    pub fn task(&self) -> Task {
        self.config.task
    }

    fn lstm(&self) -> LstmWeights<'_> {
        LstmWeights {
            w_x: &self.params.tensors[0].data,
            w_h: &self.params.tensors[1].data,
            b: &self.params.tensors[2].data,
            input_dim: self.config.input_dim,
            hidden: self.config.hidden,
        }
    }

    fn check(&self, x: &[f64], mask: &[bool], task: Task) -> Result<(), ModelError> {
        if self.config.task != task {
            return Err(ModelError::WrongTask {
                expected: task,
                found: self.config.task,
            });
        }
        if x.len() != mask.len() * self.config.input_dim {
            return Err(ModelError::InputDim {
                expected: self.config.input_dim,
                actual: x.len().checked_div(mask.len()).unwrap_or(x.len()),
            });
        }
        Ok(())
    }

    fn head(&self, i: usize) -> &[f64] {
        &self.params.tensors[i].data
    }

    fn climax_logit(&self, out: &[f64]) -> f64 {
        self.head(4)[0] + out.iter().zip(self.head(3)).map(|(a, b)| a * b).sum::<f64>()
    }

    /// Per-row climax logits; masked rows get 0.
    pub fn climax_logits(&self, x: &[f64], mask: &[bool]) -> Result<Vec<f64>, ModelError> {
        self.check(x, mask, Task::Climax)?;
        let cache = forward_seq(self.lstm(), x, mask, None, None);
        let h = self.config.hidden;
        let mut out = vec![0.0; mask.len()];
        for (s, &r) in cache.rows.iter().enumerate() {
            out[r] = self.climax_logit(&cache.out[s * h..(s + 1) * h]);
        }
        Ok(out)
    }

    /// Per-row climax probabilities in (0, 1); masked rows get 0.
    pub fn forward_climax(&self, x: &[f64], mask: &[bool]) -> Result<Vec<f64>, ModelError> {
        let logits = self.climax_logits(x, mask)?;
        Ok(logits
            .iter()
            .zip(mask)
            .map(|(&z, &m)| if m { sigmoid(z) } else { 0.0 })
            .collect())
    }

    fn topic_features(&self, topic: &[f64]) -> Vec<f64> {
        match self.config.topic_concat {
            TopicConcat::Logits => topic.to_vec(),
            TopicConcat::Probs => softmax(topic),
        }
    }

    fn sentiment_head(&self, h_last: &[f64]) -> (Vec<f64>, Vec<f64>, Vec<f64>) {
        let mut topic = self.head(4).to_vec();
        vec_mat_acc(h_last, self.head(3), N_TOPICS, &mut topic);
        let mut u = h_last.to_vec();
        u.extend(self.topic_features(&topic));
        let mut sent = self.head(6).to_vec();
        vec_mat_acc(&u, self.head(5), N_SENTIMENTS, &mut sent);
        (topic, u, sent)
    }

    /// Topic and sentiment logits from the last unmasked hidden state.
    pub fn forward_sentiment(
        &self,
        x: &[f64],
        mask: &[bool],
    ) -> Result<SentimentOutput, ModelError> {
        self.check(x, mask, Task::Sentiment)?;
        let cache = forward_seq(self.lstm(), x, mask, None, None);
        let n = cache.steps();
        if n == 0 {
            return Err(ModelError::EmptySequence);
        }
        let h = self.config.hidden;
        let (topic, _, sent) = self.sentiment_head(&cache.out[(n - 1) * h..n * h]);
        Ok(SentimentOutput {
            topic_logits: topic,
            sentiment_logits: sent,
        })
    }

    fn norms(batch: &[Example]) -> Norms {
        let mut n = Norms {
            climax: 0.0,
            sentiment: 0.0,
            topic: 0.0,
        };
        for ex in batch {
            match &ex.target {
                Target::Climax { weights, .. } => {
                    n.climax += weights
                        .iter()
                        .zip(ex.mask)
                        .filter(|(_, &m)| m)
                        .map(|(w, _)| w)
                        .sum::<f64>();
                }
                Target::Sentiment { weights, topic, .. } => {
                    n.sentiment += weights.iter().sum::<f64>();
                    if topic.is_some() {
                        n.topic += 1.0;
                    }
                }
            }
        }
        n
    }

    /// Loss and gradients of one example, accumulated into `grads`.
    fn example_grad(
        &self,
        ex: &Example,
        norms: &Norms,
        grads: &mut ParamSet,
        dx: Option<&mut [f64]>,
    ) -> f64 {
        let h = self.config.hidden;
        let in_m = ex.dropout.as_ref().map(|d| &d.input[..]);
        let out_m = ex.dropout.as_ref().map(|d| &d.output[..]);
        let cache: SeqCache = forward_seq(self.lstm(), ex.x, ex.mask, in_m, out_m);
        let n = cache.steps();
        let mut d_out = vec![0.0; n * h];
        let (lstm_g, head_g) = grads.tensors.split_at_mut(3);
        let mut loss = 0.0;
        match &ex.target {
            Target::Climax { targets, weights } => {
                if norms.climax <= 0.0 {
                    return 0.0;
                }
                let w_head = self.head(3);
                for (s, &r) in cache.rows.iter().enumerate() {
                    let wt = weights[r];
                    if wt <= 0.0 {
                        continue;
                    }
                    let out = &cache.out[s * h..(s + 1) * h];
                    let z = self.climax_logit(out);
                    loss += wt * sigmoid_ce_elem(z, targets[r]) / norms.climax;
                    let dz = wt * (sigmoid(z) - targets[r]) / norms.climax;
                    for k in 0..h {
                        d_out[s * h + k] = dz * w_head[k];
                        head_g[0].data[k] += dz * out[k];
                    }
                    head_g[1].data[0] += dz;
                }
            }
            Target::Sentiment {
                targets,
                weights,
                topic: topic_label,
            } => {
                if n == 0 {
                    return 0.0;
                }
                let h_last = &cache.out[(n - 1) * h..n * h];
                let (topic, u, sent) = self.sentiment_head(h_last);
                let mut d_sent = vec![0.0; N_SENTIMENTS];
                if norms.sentiment > 0.0 {
                    for c in 0..N_SENTIMENTS {
                        let wt = weights[c];
                        if wt <= 0.0 {
                            continue;
                        }
                        loss += wt * sigmoid_ce_elem(sent[c], targets[c]) / norms.sentiment;
                        d_sent[c] = wt * (sigmoid(sent[c]) - targets[c]) / norms.sentiment;
                    }
                }
                outer_acc(&u, &d_sent, &mut head_g[2].data);
                for (g, d) in head_g[3].data.iter_mut().zip(&d_sent) {
                    *g += d;
                }
                let mut du = vec![0.0; h + N_TOPICS];
                mat_vec_acc(self.head(5), &d_sent, &mut du);
                let d_phi = &du[h..];
                let mut d_topic = match self.config.topic_concat {
                    TopicConcat::Logits => d_phi.to_vec(),
                    TopicConcat::Probs => {
                        let p = softmax(&topic);
                        let dot: f64 = p.iter().zip(d_phi).map(|(a, b)| a * b).sum();
                        p.iter().zip(d_phi).map(|(pj, dj)| pj * (dj - dot)).collect()
                    }
                };
                if let (Some(y), true) = (topic_label, norms.topic > 0.0) {
                    let tw = self.config.topic_weight;
                    loss += tw * softmax_ce(&topic, Some(*y)) / norms.topic;
                    let p = softmax(&topic);
                    for (j, dt) in d_topic.iter_mut().enumerate() {
                        let onehot = if j == *y { 1.0 } else { 0.0 };
                        *dt += tw * (p[j] - onehot) / norms.topic;
                    }
                }
                outer_acc(h_last, &d_topic, &mut head_g[0].data);
                for (g, d) in head_g[1].data.iter_mut().zip(&d_topic) {
                    *g += d;
                }
                let d_h = &mut d_out[(n - 1) * h..n * h];
                d_h.copy_from_slice(&du[..h]);
                mat_vec_acc(self.head(3), &d_topic, d_h);
            }
        }
        let (gx, rest) = lstm_g.split_at_mut(1);
        let (gh, gb) = rest.split_at_mut(1);
        backward_seq(
            self.lstm(),
            &cache,
            &d_out,
            in_m,
            out_m,
            LstmGrads {
                w_x: &mut gx[0].data,
                w_h: &mut gh[0].data,
                b: &mut gb[0].data,
            },
            dx,
        );
        loss
    }

    /// Exact batch loss and gradients by backpropagation through time.
    ///
    /// Examples are processed in parallel in fixed-size chunks whose partial
    /// results are summed in chunk order, so the output is bit-identical for
    /// any thread count.
    pub fn loss_and_grad(&self, batch: &[Example], input_grads: bool) -> BatchGrad {
        let norms = Self::norms(batch);
        let d = self.config.input_dim;
        let partials: Vec<(f64, ParamSet, Vec<Vec<f64>>)> = batch
            .par_chunks(GRAD_CHUNK)
            .map(|chunk| {
                let mut grads = self.params.zeros_like();
                let mut loss = 0.0;
                let mut dxs = Vec::new();
                for ex in chunk {
                    if input_grads {
                        let mut dx = vec![0.0; ex.mask.len() * d];
                        loss += self.example_grad(ex, &norms, &mut grads, Some(&mut dx));
                        dxs.push(dx);
                    } else {
                        loss += self.example_grad(ex, &norms, &mut grads, None);
                    }
                }
                (loss, grads, dxs)
            })
            .collect();
        let mut grads = self.params.zeros_like();
        let mut loss = 0.0;
        let mut dxs = Vec::new();
        for (l, g, dx) in partials {
            loss += l;
            grads.add_assign(&g);
            dxs.extend(dx);
        }
        BatchGrad {
            loss,
            grads,
            input_grads: input_grads.then_some(dxs),
        }
    }

    /// Batch loss only (same definition as [`Self::loss_and_grad`]).
    pub fn loss(&self, batch: &[Example]) -> f64 {
        self.loss_and_grad(batch, false).loss
    }
}
