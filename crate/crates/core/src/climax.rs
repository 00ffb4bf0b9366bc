//! Unsupervised climax prediction: per-second aggregation of the frame
//! signals, top-k peak picking, longest-run centres for shot boundaries and
//! the fixed-time heuristic baseline.

use std::cmp::Ordering;
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::signals::SignalTrack;

/// One value per whole second of video.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PerSecondSeries {
    pub values: Vec<f64>,
}

impl PerSecondSeries {
    pub fn new(values: Vec<f64>) -> Self {
        PerSecondSeries { values }
    }

    pub fn duration_sec(&self) -> usize {
        self.values.len()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct SecondAggregates {
    /// Max amplitude in each second.
    pub audio: PerSecondSeries,
    /// Mean flow magnitude in each second.
    pub flow: PerSecondSeries,
    /// Number of frames with any boundary vote in each second.
    pub shots: PerSecondSeries,
    /// Element-wise max of the boundary votes in each second.
    pub shot_votes: Vec<[u8; 5]>,
}

pub fn aggregate_per_second(track: &SignalTrack) -> SecondAggregates {
    let n_sec = track.n_seconds();
    let mut audio = vec![0.0f64; n_sec];
    let mut flow_sum = vec![0.0f64; n_sec];
    let mut flow_n = vec![0usize; n_sec];
    let mut shots = vec![0.0f64; n_sec];
    let mut votes = vec![[0u8; 5]; n_sec];
    for k in 0..track.len() {
        let s = track.second_of(k);
        audio[s] = audio[s].max(track.audio[k]);
        flow_sum[s] += track.flow[k];
        flow_n[s] += 1;
        if track.shots[k].iter().any(|&b| b > 0) {
            shots[s] += 1.0;
        }
        for (v, &b) in votes[s].iter_mut().zip(&track.shots[k]) {
            *v = (*v).max(b);
        }
    }
    let flow = flow_sum
        .iter()
        .zip(&flow_n)
        .map(|(&s, &n)| if n == 0 { 0.0 } else { s / n as f64 })
        .collect();
    SecondAggregates {
        audio: PerSecondSeries::new(audio),
        flow: PerSecondSeries::new(flow),
        shots: PerSecondSeries::new(shots),
        shot_votes: votes,
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Audio,
    Flow,
    Shots,
    Baseline,
    Lstm,
}

impl Method {
    pub const ALL: [Method; 5] = [
        Method::Baseline,
        Method::Audio,
        Method::Shots,
        Method::Flow,
        Method::Lstm,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            Method::Audio => "audio",
            Method::Flow => "flow",
            Method::Shots => "shots",
            Method::Baseline => "baseline",
            Method::Lstm => "lstm",
        }
    }
}

impl fmt::Display for Method {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Method {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Method::ALL
            .into_iter()
            .find(|m| m.as_str() == s)
            .ok_or_else(|| format!("unknown method '{s}'"))
    }
}

/// Ranked climax seconds, best first.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ClimaxPrediction {
    pub method: Method,
    pub timestamps_sec: Vec<u32>,
}

/// All seconds ordered by value descending, earlier second first on ties.
pub fn rank_seconds(series: &PerSecondSeries) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..series.values.len()).collect();
    idx.sort_by(|&a, &b| {
        series.values[b]
            .partial_cmp(&series.values[a])
            .unwrap_or(Ordering::Equal)
            .then(a.cmp(&b))
    });
    idx
}

/// Extends `picks` to length `k` by cycling through it.
fn pad_cyclic(mut picks: Vec<u32>, k: usize) -> Vec<u32> {
    if picks.is_empty() {
        return vec![0; k];
    }
    let base = picks.len();
    for i in 0..k.saturating_sub(base) {
        picks.push(picks[i % base]);
    }
    picks
}

/// The `k` highest seconds. Series shorter than `k` are padded by cycling
/// through the ranking again, so every timestamp stays in range.
pub fn top_k_peaks(series: &PerSecondSeries, k: usize, method: Method) -> ClimaxPrediction {
    let picks = rank_seconds(series)
        .into_iter()
        .take(k)
        .map(|s| s as u32)
        .collect();
    ClimaxPrediction {
        method,
        timestamps_sec: pad_cyclic(picks, k),
    }
}

/// Maximal runs `(start, end)` (inclusive) of seconds with a positive value.
pub fn positive_runs(series: &PerSecondSeries) -> Vec<(usize, usize)> {
    let mut runs = Vec::new();
    let mut start = None;
    for (i, &v) in series.values.iter().enumerate() {
        match (v > 0.0, start) {
            (true, None) => start = Some(i),
            (false, Some(s)) => {
                runs.push((s, i - 1));
                start = None;
            }
            _ => {}
        }
    }
    if let Some(s) = start {
        runs.push((s, series.values.len() - 1));
    }
    runs
}

/// Centres of the `k` longest boundary runs (longer first, earlier start on
/// ties). Missing slots are filled with the highest remaining seconds.
pub fn longest_run_centers(shots: &PerSecondSeries, k: usize) -> ClimaxPrediction {
    let mut runs = positive_runs(shots);
    runs.sort_by(|a, b| (b.1 - b.0).cmp(&(a.1 - a.0)).then(a.0.cmp(&b.0)));
    let mut picks: Vec<u32> = runs
        .iter()
        .take(k)
        .map(|&(s, e)| ((s + e) / 2) as u32)
        .collect();
    if picks.len() < k {
        let fill: Vec<u32> = rank_seconds(shots)
            .into_iter()
            .map(|s| s as u32)
            .filter(|s| !picks.contains(s))
            .take(k - picks.len())
            .collect();
        picks.extend(fill);
    }
    ClimaxPrediction {
        method: Method::Shots,
        timestamps_sec: pad_cyclic(picks, k),
    }
}

/// Fixed guesses at 5, 15, 25, ... seconds, clamped to the last second.
pub fn heuristic_baseline(duration_sec: usize, k: usize) -> ClimaxPrediction {
    let last = duration_sec.saturating_sub(1) as u32;
    ClimaxPrediction {
        method: Method::Baseline,
        timestamps_sec: (0..k as u32).map(|i| (5 + 10 * i).min(last)).collect(),
    }
}

/// Unsupervised prediction for a video's signals.
pub fn predict_unsupervised(track: &SignalTrack, method: Method, k: usize) -> ClimaxPrediction {
    let agg = aggregate_per_second(track);
    match method {
        Method::Audio => top_k_peaks(&agg.audio, k, Method::Audio),
        Method::Flow => top_k_peaks(&agg.flow, k, Method::Flow),
        Method::Shots => longest_run_centers(&agg.shots, k),
        Method::Baseline => heuristic_baseline(track.n_seconds(), k),
        Method::Lstm => panic!("the lstm method needs a trained model"),
    }
}

/// One line of the predictions JSONL.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PredictionRecord {
    pub video_id: String,
    pub method: Method,
    pub k: usize,
    pub timestamps_sec: Vec<u32>,
}

impl PredictionRecord {
    pub fn new(video_id: impl Into<String>, k: usize, pred: ClimaxPrediction) -> Self {
        PredictionRecord {
            video_id: video_id.into(),
            method: pred.method,
            k,
            timestamps_sec: pred.timestamps_sec,
        }
    }
}
