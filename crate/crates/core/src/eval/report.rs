//! Report rendering and the prediction / score JSONL files.

use std::collections::HashMap;
use std::fmt::Write as _;
use std::path::Path;

use serde::de::DeserializeOwned;
use serde::{Deserialize, Serialize};

use super::{climax_recall_counts, AgreementMetrics, EvalError, KS, WINDOWS};
use crate::climax::{PredictionRecord, SecondAggregates};
use crate::ingest::VideoRecord;

pub const REPORT_SCHEMA_VERSION: u32 = 1;

/// Recall grid of one climax method.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimaxRow {
    pub method: String,
    /// Videos with at least one accepted mark.
    pub n_videos: usize,
    /// `recall[i][j]` for `k = KS[i]` and `window = WINDOWS[j]`.
    pub recall: Vec<Vec<f64>>,
}

impl ClimaxRow {
    pub fn compute(
        method: impl Into<String>,
        predictions: &HashMap<String, Vec<u32>>,
        records: &[VideoRecord],
    ) -> Result<Self, EvalError> {
        let mut n_videos = 0;
        let mut recall = Vec::new();
        for &k in &KS {
            let mut row = Vec::new();
            for &w in &WINDOWS {
                let (c, n) = climax_recall_counts(predictions, records, k, w)?;
                n_videos = n;
                row.push(if n == 0 { 0.0 } else { c as f64 / n as f64 });
            }
            recall.push(row);
        }
        Ok(ClimaxRow {
            method: method.into(),
            n_videos,
            recall,
        })
    }

    pub fn get(&self, k: usize, window: u32) -> Option<f64> {
        let i = KS.iter().position(|&x| x == k)?;
        let j = WINDOWS.iter().position(|&x| x == window)?;
        Some(self.recall[i][j])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClimaxReport {
    pub rows: Vec<ClimaxRow>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub schema_version: u32,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub climax: Option<ClimaxReport>,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub sentiment: Option<Vec<AgreementMetrics>>,
}

impl EvalReport {
    pub fn new() -> Self {
        EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            climax: None,
            sentiment: None,
        }
    }

    /// Every metric lies in [0, 1] and every grid is fully populated.
    pub fn is_consistent(&self) -> bool {
        let unit = |x: f64| (0.0..=1.0).contains(&x);
        let climax_ok = self.climax.as_ref().map_or(true, |c| {
            c.rows.iter().all(|r| {
                r.recall.len() == KS.len()
                    && r.recall.iter().all(|row| row.len() == WINDOWS.len())
                    && r.recall.iter().flatten().all(|&x| unit(x))
            })
        });
        let sentiment_ok = self.sentiment.as_ref().map_or(true, |levels| {
            levels.iter().all(|m| {
                unit(m.map)
                    && unit(m.acc_at_1)
                    && m.per_class_ap.len() == crate::vocab::N_SENTIMENTS
                    && m.per_class_ap.iter().flatten().all(|&x| unit(x))
            })
        });
        climax_ok && sentiment_ok
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        if let Some(c) = &self.climax {
            out.push_str(&climax_table(c));
        }
        if let Some(s) = &self.sentiment {
            if !out.is_empty() {
                out.push('\n');
            }
            out.push_str(&sentiment_table(s));
        }
        out
    }
}

impl Default for EvalReport {
    fn default() -> Self {
        Self::new()
    }
}

/// Methods as rows, the k x window grid as columns.
pub fn climax_table(report: &ClimaxReport) -> String {
    let mut header = vec![format!("{:<10}", "method"), format!("{:>5}", "n")];
    for k in KS {
        for w in WINDOWS {
            header.push(format!("{:>8}", format!("@{k}/{w}s")));
        }
    }
    let mut out = header.join(" ").trim_end().to_string();
    out.push('\n');
    for row in &report.rows {
        let mut cells = vec![format!("{:<10}", row.method), format!("{:>5}", row.n_videos)];
        for r in row.recall.iter().flatten() {
            cells.push(format!("{r:>8.4}"));
        }
        out.push_str(&cells.join(" "));
        out.push('\n');
    }
    out
}

pub fn sentiment_table(levels: &[AgreementMetrics]) -> String {
    let mut out = format!(
        "{:<9} {:>8} {:>8} {:>6} {:>8}\n",
        "agreement", "mAP", "acc@1", "n_eval", "classes"
    );
    for m in levels {
        let _ = writeln!(
            out,
            "{:<9} {:>8.4} {:>8.4} {:>6} {:>8}",
            m.agreement,
            m.map,
            m.acc_at_1,
            m.n_eval,
            m.per_class_ap.iter().flatten().count()
        );
    }
    out
}

/// Writes `path` as JSON and a text rendering next to it (`.txt`).
pub fn write_report(path: impl AsRef<Path>, report: &EvalReport) -> Result<(), EvalError> {
    let path = path.as_ref();
    let json = serde_json::to_string_pretty(report).expect("report serializes");
    std::fs::write(path, json + "\n").map_err(|e| EvalError::io(path, e))?;
    let txt = path.with_extension("txt");
    std::fs::write(&txt, report.to_text()).map_err(|e| EvalError::io(&txt, e))
}

pub fn read_report(path: impl AsRef<Path>) -> Result<EvalReport, EvalError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))?;
    serde_json::from_str(&text).map_err(|e| EvalError::Line {
        line: e.line(),
        msg: e.to_string(),
    })
}

/// Per-second series for plotting: `second,audio,shots,flow,climax_prob`.
/// `climax_prob` is left empty when absent.
pub fn plot_csv(agg: &SecondAggregates, climax_prob: Option<&[f64]>) -> String {
    let mut out = String::from("second,audio,shots,flow,climax_prob\n");
    for s in 0..agg.audio.duration_sec() {
        let p = climax_prob
            .and_then(|p| p.get(s))
            .map(|p| p.to_string())
            .unwrap_or_default();
        let _ = writeln!(
            out,
            "{s},{},{},{},{p}",
            agg.audio.values[s], agg.shots.values[s], agg.flow.values[s]
        );
    }
    out
}

/// Per-video sentiment and topic scores, one JSONL line each.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ScoreRecord {
    pub video_id: String,
    pub sentiment_scores: Vec<f64>,
    #[serde(default)]
    pub topic_logits: Vec<f64>,
}

fn parse_jsonl<T: DeserializeOwned>(text: &str) -> Result<Vec<T>, EvalError> {
    text.lines()
        .enumerate()
        .filter(|(_, l)| !l.trim().is_empty())
        .map(|(i, l)| {
            serde_json::from_str(l).map_err(|e| EvalError::Line {
                line: i + 1,
                msg: e.to_string(),
            })
        })
        .collect()
}

fn write_jsonl<T: Serialize>(path: &Path, items: &[T]) -> Result<(), EvalError> {
    let mut out = String::new();
    for it in items {
        out.push_str(&serde_json::to_string(it).expect("record serializes"));
        out.push('\n');
    }
    std::fs::write(path, out).map_err(|e| EvalError::io(path, e))
}

fn read_text(path: &Path) -> Result<String, EvalError> {
    std::fs::read_to_string(path).map_err(|e| EvalError::io(path, e))
}

pub fn parse_predictions(text: &str) -> Result<Vec<PredictionRecord>, EvalError> {
    parse_jsonl(text)
}

pub fn read_predictions(path: impl AsRef<Path>) -> Result<Vec<PredictionRecord>, EvalError> {
    parse_predictions(&read_text(path.as_ref())?)
}

pub fn write_predictions(
    path: impl AsRef<Path>,
    records: &[PredictionRecord],
) -> Result<(), EvalError> {
    write_jsonl(path.as_ref(), records)
}

pub fn parse_scores(text: &str) -> Result<Vec<ScoreRecord>, EvalError> {
    parse_jsonl(text)
}

pub fn read_scores(path: impl AsRef<Path>) -> Result<Vec<ScoreRecord>, EvalError> {
    parse_scores(&read_text(path.as_ref())?)
}

pub fn write_scores(path: impl AsRef<Path>, records: &[ScoreRecord]) -> Result<(), EvalError> {
    write_jsonl(path.as_ref(), records)
}

#[cfg(test)]
mod tests {
    use super::super::sentiment_metrics;
    use super::super::tests::record;
    use super::*;
    use crate::climax::{aggregate_per_second, Method};
    use crate::ingest::Rational;
    use crate::signals::SignalTrack;

    fn sample_report() -> EvalReport {
        let recs = vec![
            record("a", &[Some(3.0)], [2; 30]),
            record("b", &[Some(10.5)], [1; 30]),
        ];
        let preds: HashMap<String, Vec<u32>> = [("a".to_string(), vec![3, 9, 1])].into();
        let row = ClimaxRow::compute("audio", &preds, &recs).unwrap();
        let scores: Vec<Vec<f64>> = (0..2)
            .map(|v| (0..30).map(|c| ((v * 30 + c) as f64 * 0.37).sin()).collect())
            .collect();
        EvalReport {
            schema_version: REPORT_SCHEMA_VERSION,
            climax: Some(ClimaxReport { rows: vec![row] }),
            sentiment: Some(sentiment_metrics(&scores, &recs).unwrap()),
        }
    }

    #[test]
    fn json_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("report.json");
        let r = sample_report();
        write_report(&path, &r).unwrap();
        assert_eq!(read_report(&path).unwrap(), r);
        assert!(path.with_extension("txt").exists());
        assert!(r.is_consistent());
    }

    #[test]
    fn climax_table_layout() {
        let r = sample_report();
        let table = climax_table(r.climax.as_ref().unwrap());
        let lines: Vec<&str> = table.lines().collect();
        assert_eq!(lines.len(), 2);
        assert!(lines[0].starts_with("method"));
        assert!(lines[0].contains("@1/0s") && lines[0].contains("@3/2s"));
        assert!(lines[1].starts_with("audio"));
        assert_eq!(lines[1].split_whitespace().count(), 2 + 6);
        assert_eq!(r.climax.unwrap().rows[0].get(1, 0), Some(0.5));
    }

    #[test]
    fn plot_rows_match_duration() {
        let track = SignalTrack {
            fps: Rational::new(2, 1),
            audio: vec![0.1; 7],
            shots: vec![[0; 5]; 7],
            flow: vec![0.0; 7],
        };
        let agg = aggregate_per_second(&track);
        let csv = plot_csv(&agg, Some(&[0.5, 0.25, 0.0, 1.0]));
        assert_eq!(csv.lines().count(), 1 + 4);
        assert!(csv.lines().nth(2).unwrap().ends_with(",0.25"));
    }

    #[test]
    fn predictions_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("p.jsonl");
        let recs = vec![PredictionRecord {
            video_id: "x".into(),
            method: Method::Flow,
            k: 3,
            timestamps_sec: vec![4, 1, 9],
        }];
        write_predictions(&path, &recs).unwrap();
        assert_eq!(read_predictions(&path).unwrap(), recs);
        assert!(matches!(
            parse_predictions("{\"video_id\":1}\n"),
            Err(EvalError::Line { line: 1, .. })
        ));
    }
}
