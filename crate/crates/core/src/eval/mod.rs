//! Climax recall@k within a window and agreement-based sentiment metrics.

mod report;

use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::ingest::VideoRecord;
use crate::vocab::{sentiments, N_SENTIMENTS};

pub use report::{
    climax_table, parse_predictions, parse_scores, plot_csv, read_predictions, read_report,
    read_scores, sentiment_table, write_predictions, write_report, write_scores, ClimaxReport,
    ClimaxRow, EvalReport, ScoreRecord, REPORT_SCHEMA_VERSION,
};

pub const WINDOWS: [u32; 3] = [0, 1, 2];
pub const KS: [usize; 2] = [1, 3];
pub const AGREEMENTS: [u8; 3] = [1, 2, 3];
/// Recall levels of interpolated AP.
pub const AP_POINTS: usize = 11;

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("prediction for unknown video '{video_id}'")]
    UnknownVideo { video_id: String },
    #[error("score matrix: expected {expected} columns, got {actual} (row {row})")]
    Shape {
        row: usize,
        expected: usize,
        actual: usize,
    },
    #[error("{rows} score rows for {records} videos")]
    RowCount { rows: usize, records: usize },
    #[error("non-finite score for video '{video_id}', class {class}")]
    NonFinite { video_id: String, class: usize },
    #[error("average precision of an empty ranking")]
    EmptyScores,
    #[error("average precision needs at least one positive")]
    NoPositives,
    #[error("line {line}: {msg}")]
    Line { line: usize, msg: String },
    #[error("io error on {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
}

impl EvalError {
    pub(crate) fn io(path: &Path, source: std::io::Error) -> Self {
        EvalError::Io {
            path: path.display().to_string(),
            source,
        }
    }
}

/// True when one of the first `k` predicted seconds lies within `window`
/// seconds of a mark, both sides floored to whole seconds.
pub fn climax_hit(preds: &[u32], marks: &[f64], k: usize, window: u32) -> bool {
    preds.iter().take(k).any(|&p| {
        marks
            .iter()
            .any(|&g| (p as i64 - g.floor() as i64).unsigned_abs() <= window as u64)
    })
}

/// `(correct, eligible)` counts behind [`climax_recall`].
pub fn climax_recall_counts(
    predictions: &HashMap<String, Vec<u32>>,
    records: &[VideoRecord],
    k: usize,
    window: u32,
) -> Result<(usize, usize), EvalError> {
    let known: HashMap<&str, &VideoRecord> =
        records.iter().map(|r| (r.video_id.as_str(), r)).collect();
    if let Some(id) = predictions.keys().find(|id| !known.contains_key(id.as_str())) {
        return Err(EvalError::UnknownVideo {
            video_id: id.clone(),
        });
    }
    let mut correct = 0;
    let mut eligible = 0;
    for rec in records {
        if rec.accepted_marks().is_empty() {
            continue;
        }
        eligible += 1;
        let Some(preds) = predictions.get(&rec.video_id) else {
            continue;
        };
        if climax_hit(preds, &rec.accepted_marks(), k, window) {
            correct += 1;
        }
    }
    Ok((correct, eligible))
}

/// Fraction of videos with at least one accepted mark for which one of the
/// top-`k` predictions lies within `window` seconds of some mark. Videos
/// without a prediction count as misses; 0 when no video is eligible.
pub fn climax_recall(
    predictions: &HashMap<String, Vec<u32>>,
    records: &[VideoRecord],
    k: usize,
    window: u32,
) -> Result<f64, EvalError> {
    let (c, n) = climax_recall_counts(predictions, records, k, window)?;
    Ok(if n == 0 { 0.0 } else { c as f64 / n as f64 })
}

/// Per-video ground-truth sentiment sets at one agreement level, as bitmasks.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct AgreementLabels {
    pub k: u8,
    pub sets: Vec<u32>,
}

impl AgreementLabels {
    pub fn contains(&self, video: usize, class: usize) -> bool {
        self.sets[video] >> class & 1 == 1
    }

    pub fn is_empty(&self, video: usize) -> bool {
        self.sets[video] == 0
    }
}

pub fn agreement_labels(records: &[VideoRecord], k: u8) -> AgreementLabels {
    let votes: Vec<[u8; N_SENTIMENTS]> = records.iter().map(|r| r.sentiment_votes).collect();
    agreement_from_votes(&votes, k)
}

pub fn agreement_from_votes(votes: &[[u8; N_SENTIMENTS]], k: u8) -> AgreementLabels {
    let sets = votes
        .iter()
        .map(|v| {
            v.iter()
                .enumerate()
                .filter(|(_, &v)| v >= k)
                .fold(0u32, |acc, (s, _)| acc | 1 << s)
        })
        .collect();
    AgreementLabels { k, sets }
}

/// One entry of a ranking for [`average_precision`].
#[derive(Debug, Clone, Copy)]
pub struct Scored<'a> {
    pub score: f64,
    pub video_id: &'a str,
    pub positive: bool,
}

/// 11-point interpolated average precision. Ranking is by descending score,
/// ties broken by ascending video id.
pub fn average_precision(items: &[Scored]) -> Result<f64, EvalError> {
    if items.is_empty() {
        return Err(EvalError::EmptyScores);
    }
    let n_pos = items.iter().filter(|s| s.positive).count();
    if n_pos == 0 {
        return Err(EvalError::NoPositives);
    }
    let mut order: Vec<&Scored> = items.iter().collect();
    order.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.video_id.cmp(b.video_id)));

    // (true positives, precision) after each rank
    let mut pr = Vec::with_capacity(order.len());
    let mut tp = 0usize;
    for (i, s) in order.iter().enumerate() {
        if s.positive {
            tp += 1;
        }
        pr.push((tp, tp as f64 / (i + 1) as f64));
    }
    // max precision at recall >= r, via a suffix maximum
    let mut best = vec![0.0f64; pr.len() + 1];
    for i in (0..pr.len()).rev() {
        best[i] = best[i + 1].max(pr[i].1);
    }
    let mut total = 0.0;
    let mut j = 0;
    for level in 0..AP_POINTS {
        // first rank with tp/n_pos >= level/10, compared in integers
        while j < pr.len() && pr[j].0 * (AP_POINTS - 1) < level * n_pos {
            j += 1;
        }
        total += best[j];
    }
    Ok(total / AP_POINTS as f64)
}

/// Metrics at one agreement level.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AgreementMetrics {
    pub agreement: u8,
    pub map: f64,
    pub acc_at_1: f64,
    /// Videos with a non-empty label set (the acc@1 denominator).
    pub n_eval: usize,
    /// AP per class; `None` for classes without positives.
    pub per_class_ap: Vec<Option<f64>>,
    pub skipped_classes: Vec<String>,
}

/// mAP and acc@1 at agreement levels 1, 2 and 3.
pub fn sentiment_metrics(
    scores: &[Vec<f64>],
    records: &[VideoRecord],
) -> Result<Vec<AgreementMetrics>, EvalError> {
    let ids: Vec<&str> = records.iter().map(|r| r.video_id.as_str()).collect();
    let votes: Vec<[u8; N_SENTIMENTS]> = records.iter().map(|r| r.sentiment_votes).collect();
    sentiment_metrics_votes(scores, &ids, &votes)
}

pub fn sentiment_metrics_votes(
    scores: &[Vec<f64>],
    ids: &[&str],
    votes: &[[u8; N_SENTIMENTS]],
) -> Result<Vec<AgreementMetrics>, EvalError> {
    if scores.len() != votes.len() || ids.len() != votes.len() {
        return Err(EvalError::RowCount {
            rows: scores.len(),
            records: votes.len(),
        });
    }
    for (row, (s, id)) in scores.iter().zip(ids).enumerate() {
        if s.len() != N_SENTIMENTS {
            return Err(EvalError::Shape {
                row,
                expected: N_SENTIMENTS,
                actual: s.len(),
            });
        }
        if let Some(class) = s.iter().position(|x| !x.is_finite()) {
            return Err(EvalError::NonFinite {
                video_id: id.to_string(),
                class,
            });
        }
    }
    let top1: Vec<usize> = scores
        .iter()
        .map(|s| {
            // first index of the maximum
            (0..N_SENTIMENTS).fold(0, |b, c| if s[c] > s[b] { c } else { b })
        })
        .collect();

    AGREEMENTS
        .iter()
        .map(|&k| {
            let labels = agreement_from_votes(votes, k);
            let mut per_class_ap = Vec::with_capacity(N_SENTIMENTS);
            let mut skipped = Vec::new();
            for c in 0..N_SENTIMENTS {
                let items: Vec<Scored> = ids
                    .iter()
                    .enumerate()
                    .map(|(v, id)| Scored {
                        score: scores[v][c],
                        video_id: id,
                        positive: labels.contains(v, c),
                    })
                    .collect();
                match average_precision(&items) {
                    Ok(ap) => per_class_ap.push(Some(ap)),
                    Err(EvalError::NoPositives | EvalError::EmptyScores) => {
                        per_class_ap.push(None);
                        skipped.push(sentiments()[c].to_string());
                    }
                    Err(e) => return Err(e),
                }
            }
            let aps: Vec<f64> = per_class_ap.iter().flatten().copied().collect();
            let map = if aps.is_empty() {
                0.0
            } else {
                aps.iter().sum::<f64>() / aps.len() as f64
            };
            let eval: Vec<usize> = (0..votes.len()).filter(|&v| !labels.is_empty(v)).collect();
            let hits = eval.iter().filter(|&&v| labels.contains(v, top1[v])).count();
            Ok(AgreementMetrics {
                agreement: k,
                map,
                acc_at_1: if eval.is_empty() {
                    0.0
                } else {
                    hits as f64 / eval.len() as f64
                },
                n_eval: eval.len(),
                per_class_ap,
                skipped_classes: skipped,
            })
        })
        .collect()
}

#[cfg(test)]
pub(crate) mod tests {
    use proptest::prelude::*;

    use super::*;
    use crate::ingest::WorkerMark;

    pub(crate) fn record(id: &str, marks: &[Option<f64>], votes: [u8; 30]) -> VideoRecord {
        VideoRecord {
            video_id: id.into(),
            duration_sec: 60.0,
            fps: 1.0,
            workers: marks
                .iter()
                .map(|m| WorkerMark {
                    has_climax: m.is_some(),
                    t_sec: *m,
                    rejected: false,
                })
                .collect(),
            sentiment_votes: votes,
            topic: None,
        }
    }

    fn preds(p: &[(&str, &[u32])]) -> HashMap<String, Vec<u32>> {
        p.iter().map(|(k, v)| (k.to_string(), v.to_vec())).collect()
    }

    fn ranking(flags: &[bool]) -> Vec<Scored<'static>> {
        const IDS: [&str; 8] = ["a", "b", "c", "d", "e", "f", "g", "h"];
        flags
            .iter()
            .enumerate()
            .map(|(i, &p)| Scored {
                score: -(i as f64),
                video_id: IDS[i],
                positive: p,
            })
            .collect()
    }

    #[test]
    fn window_boundaries() {
        let recs = [record("v", &[Some(7.0)], [0; 30])];
        assert_eq!(climax_recall(&preds(&[("v", &[5])]), &recs, 1, 2).unwrap(), 1.0);
        let recs = [record("v", &[Some(8.0)], [0; 30])];
        assert_eq!(climax_recall(&preds(&[("v", &[5])]), &recs, 1, 2).unwrap(), 0.0);
    }

    #[test]
    fn fractional_marks_are_floored() {
        let recs = [record("v", &[Some(10.9)], [0; 30])];
        assert_eq!(climax_recall(&preds(&[("v", &[10])]), &recs, 1, 0).unwrap(), 1.0);
    }

    #[test]
    fn videos_without_marks_are_not_counted() {
        let recs = [
            record("a", &[Some(3.0)], [0; 30]),
            record("b", &[None, None], [0; 30]),
        ];
        let p = preds(&[("a", &[3]), ("b", &[0])]);
        assert_eq!(climax_recall_counts(&p, &recs, 1, 0).unwrap(), (1, 1));
    }

    #[test]
    fn rejected_marks_are_ignored() {
        let mut rec = record("a", &[Some(3.0)], [0; 30]);
        rec.workers[0].rejected = true;
        let p = preds(&[("a", &[3])]);
        assert_eq!(climax_recall_counts(&p, &[rec], 1, 0).unwrap(), (0, 0));
    }

    #[test]
    fn unknown_video_is_an_error() {
        let recs = [record("a", &[Some(3.0)], [0; 30])];
        assert!(matches!(
            climax_recall(&preds(&[("zz", &[1])]), &recs, 1, 0),
            Err(EvalError::UnknownVideo { .. })
        ));
    }

    #[test]
    fn agreement_examples() {
        let mut votes = [0u8; 30];
        votes[crate::vocab::sentiment_index("alarmed").unwrap()] = 3;
        votes[crate::vocab::sentiment_index("cheerful").unwrap()] = 1;
        let recs = [record("a", &[], votes)];
        let l2 = agreement_labels(&recs, 2);
        let l1 = agreement_labels(&recs, 1);
        assert_eq!(l2.sets[0].count_ones(), 1);
        assert!(l2.contains(0, crate::vocab::sentiment_index("alarmed").unwrap()));
        assert_eq!(l1.sets[0].count_ones(), 2);
    }

    #[test]
    fn ap_anchor() {
        let ap = average_precision(&ranking(&[true, false, true])).unwrap();
        assert!((ap - 28.0 / 33.0).abs() < 1e-12);
    }

    #[test]
    fn ap_perfect_and_errors() {
        assert_eq!(average_precision(&ranking(&[true, true, false])).unwrap(), 1.0);
        assert!(matches!(average_precision(&[]), Err(EvalError::EmptyScores)));
        assert!(matches!(
            average_precision(&ranking(&[false, false])),
            Err(EvalError::NoPositives)
        ));
    }

    #[test]
    fn ap_ties_use_video_id() {
        let items = [
            Scored { score: 1.0, video_id: "b", positive: false },
            Scored { score: 1.0, video_id: "a", positive: true },
        ];
        assert_eq!(average_precision(&items).unwrap(), 1.0);
    }

    /// Direct evaluation of the 11 levels, one full scan per level.
    fn ap_oracle(items: &[Scored]) -> f64 {
        let mut v: Vec<&Scored> = items.iter().collect();
        v.sort_by(|a, b| b.score.total_cmp(&a.score).then(a.video_id.cmp(b.video_id)));
        let n_pos = v.iter().filter(|s| s.positive).count();
        (0..=10)
            .map(|level| {
                let mut best = 0.0f64;
                for cut in 1..=v.len() {
                    let tp = v[..cut].iter().filter(|s| s.positive).count();
                    if 10 * tp >= level * n_pos {
                        best = best.max(tp as f64 / cut as f64);
                    }
                }
                best
            })
            .sum::<f64>()
            / 11.0
    }

    proptest! {
        #[test]
        fn ap_matches_oracle(raw in prop::collection::vec((0u8..6, any::<bool>()), 1..40)) {
            let ids: Vec<String> = (0..raw.len()).map(|i| format!("v{i:03}")).collect();
            let mut items: Vec<Scored> = raw
                .iter()
                .zip(&ids)
                .map(|(&(s, p), id)| Scored { score: s as f64, video_id: id, positive: p })
                .collect();
            items[0].positive = true;
            let ap = average_precision(&items).unwrap();
            prop_assert!((ap - ap_oracle(&items)).abs() < 1e-12);
        }

        #[test]
        fn agreement_sets_nest(votes in prop::array::uniform30(0u8..=5)) {
            let recs = [record("a", &[], votes)];
            let s: Vec<u32> = (1..=3).map(|k| agreement_labels(&recs, k).sets[0]).collect();
            prop_assert_eq!(s[1] & !s[0], 0);
            prop_assert_eq!(s[2] & !s[1], 0);
        }

        #[test]
        fn metrics_rank_invariant(
            raw in prop::collection::vec((prop::array::uniform30(0u8..=5), prop::collection::vec(-3.0f64..3.0, 30)), 2..8)
        ) {
            let recs: Vec<VideoRecord> = raw.iter().enumerate()
                .map(|(i, (v, _))| record(&format!("v{i}"), &[], *v)).collect();
            let scores: Vec<Vec<f64>> = raw.iter().map(|(_, s)| s.clone()).collect();
            let warped: Vec<Vec<f64>> = scores.iter()
                .map(|r| r.iter().map(|x| (2.0 * x).exp() + 7.0).collect()).collect();
            let a = sentiment_metrics(&scores, &recs).unwrap();
            let b = sentiment_metrics(&warped, &recs).unwrap();
            prop_assert_eq!(a, b);
        }
    }
}
