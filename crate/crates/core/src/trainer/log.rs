use std::fmt::Write as _;
use std::path::Path;

use serde::{Deserialize, Serialize};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LogRow {
    pub step: u64,
    pub train_loss: f64,
    /// Only set on evaluation steps.
    pub val_metric: Option<f64>,
    pub wall_ms: u64,
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct TrainLog {
    pub rows: Vec<LogRow>,
    pub best_step: Option<u64>,
    pub best_metric: Option<f64>,
    /// Sentiment classes without a positive in the training split.
    pub empty_classes: Vec<String>,
}

impl TrainLog {
    pub fn losses(&self) -> Vec<f64> {
        self.rows.iter().map(|r| r.train_loss).collect()
    }

    /// `(step, metric)` of every evaluation.
    pub fn evaluations(&self) -> Vec<(u64, f64)> {
        self.rows
            .iter()
            .filter_map(|r| r.val_metric.map(|m| (r.step, m)))
            .collect()
    }

    /// `step,train_loss,val_metric,wall_ms`
    pub fn to_csv(&self) -> String {
        let mut out = String::from("step,train_loss,val_metric,wall_ms\n");
        for r in &self.rows {
            let m = r.val_metric.map(|m| m.to_string()).unwrap_or_default();
            let _ = writeln!(out, "{},{},{},{}", r.step, r.train_loss, m, r.wall_ms);
        }
        out
    }

    pub fn write_csv(&self, path: impl AsRef<Path>) -> std::io::Result<()> {
        std::fs::write(path, self.to_csv())
    }
}
