use std::collections::HashMap;

use adarc_core::climax::{top_k_peaks, Method};
use adarc_core::eval::{
    read_predictions, read_scores, sentiment_metrics, write_report, ClimaxReport, ClimaxRow,
    EvalError, EvalReport, KS,
};
use adarc_core::ingest::VideoRecord;
use adarc_core::seqmodel::ModelCheckpoint;
use adarc_core::trainer::{make_splits, predict_climax, predict_sentiment, TrainError};
use adarc_core::{PerSecondSeries, Task};

use crate::data::{
    labelled_tensors, load_features, load_model, load_records, load_signals, match_layout,
    ANNOTATIONS, FEATURES, SIGNALS,
};
use crate::error::CliError;
use crate::manifest::{manifest_path, ManifestBuilder};
use crate::{EvaluateArgs, Globals, SplitName};

#[derive(serde::Serialize)]
struct EvalConfig {
    task: Task,
    fold: Option<usize>,
    split: &'static str,
}

fn split_name(s: SplitName) -> &'static str {
    match s {
        SplitName::Train => "train",
        SplitName::Val => "val",
        SplitName::Test => "test",
    }
}

/// Climax rows per method, methods in order of first appearance.
fn climax_from_predictions(
    path: &std::path::Path,
    records: &[VideoRecord],
    mb: &mut ManifestBuilder,
) -> Result<ClimaxReport, CliError> {
    let preds = read_predictions(path).map_err(|e| CliError::at(path, e))?;
    mb.input(path);
    let mut methods: Vec<Method> = Vec::new();
    let mut grouped: HashMap<Method, HashMap<String, Vec<u32>>> = HashMap::new();
    for p in preds {
        if !methods.contains(&p.method) {
            methods.push(p.method);
        }
        grouped.entry(p.method).or_default().insert(p.video_id, p.timestamps_sec);
    }
    let rows = methods
        .iter()
        .map(|m| ClimaxRow::compute(m.as_str(), &grouped[m], records))
        .collect::<Result<Vec<_>, EvalError>>()?;
    Ok(ClimaxReport { rows })
}

fn sentiment_from_scores(
    path: &std::path::Path,
    records: &[VideoRecord],
    mb: &mut ManifestBuilder,
) -> Result<EvalReport, CliError> {
    let scores = read_scores(path).map_err(|e| CliError::at(path, e))?;
    mb.input(path);
    let mut by_id: HashMap<String, Vec<f64>> = HashMap::new();
    for s in scores {
        if !records.iter().any(|r| r.video_id == s.video_id) {
            return Err(EvalError::UnknownVideo { video_id: s.video_id }.into());
        }
        by_id.insert(s.video_id, s.sentiment_scores);
    }
    // only scored videos take part, so a fold's test predictions can be
    // checked against the full annotation file
    let scored: Vec<VideoRecord> = records
        .iter()
        .filter(|r| by_id.contains_key(&r.video_id))
        .cloned()
        .collect();
    let rows: Vec<Vec<f64>> = scored.iter().map(|r| by_id[&r.video_id].clone()).collect();
    let mut report = EvalReport::new();
    report.sentiment = Some(sentiment_metrics(&rows, &scored)?);
    Ok(report)
}

fn from_checkpoint(
    g: &Globals,
    a: &EvaluateArgs,
    records: Vec<VideoRecord>,
    mb: &mut ManifestBuilder,
) -> Result<EvalReport, CliError> {
    let dir = a.data_dir.as_ref().expect("clap requires --data-dir");
    let ckpt_path = a.checkpoint.as_ref().expect("checked by caller");
    let ckpt: ModelCheckpoint = load_model(ckpt_path, Some(a.task), mb)?;
    let records = match a.fold {
        Some(fold) => {
            let ids: Vec<String> = records.iter().map(|r| r.video_id.clone()).collect();
            let plans = make_splits(&ids, ckpt.seed)?;
            let plan = plans.get(fold).ok_or(TrainError::BadFold(fold))?;
            let keep = match a.split {
                SplitName::Train => &plan.train,
                SplitName::Val => &plan.val,
                SplitName::Test => &plan.test,
            };
            records.into_iter().filter(|r| keep.contains(&r.video_id)).collect()
        }
        None => records,
    };
    g.say(format!("scoring {} on {} videos", ckpt_path.display(), records.len()));
    let features = load_features(&dir.join(FEATURES), mb)?;
    let signals = load_signals(&dir.join(SIGNALS), mb)?;
    let mut tensors = labelled_tensors(&records, &features, &signals)?;
    let climax = match &a.climax_checkpoint {
        Some(p) => Some(load_model(p, Some(Task::Climax), mb)?),
        None => None,
    };
    match_layout(&mut tensors, &ckpt, climax.as_ref())?;

    let mut report = EvalReport::new();
    match a.task {
        Task::Climax => {
            let k = *KS.iter().max().expect("KS is not empty");
            let preds = tensors
                .iter()
                .map(|t| {
                    let probs = predict_climax(&ckpt, t)?;
                    let top = top_k_peaks(&PerSecondSeries::new(probs), k, Method::Lstm);
                    Ok((t.video_id.clone(), top.timestamps_sec))
                })
                .collect::<Result<HashMap<_, _>, CliError>>()?;
            let row = ClimaxRow::compute(Method::Lstm.as_str(), &preds, &records)?;
            report.climax = Some(ClimaxReport { rows: vec![row] });
        }
        Task::Sentiment => {
            let scores = tensors
                .iter()
                .map(|t| Ok(predict_sentiment(&ckpt, t)?.0))
                .collect::<Result<Vec<_>, CliError>>()?;
            report.sentiment = Some(sentiment_metrics(&scores, &records)?);
        }
    }
    Ok(report)
}

pub fn run(g: &Globals, a: EvaluateArgs) -> Result<(), CliError> {
    let mut mb = ManifestBuilder::new("evaluate");
    mb.config(EvalConfig {
        task: a.task,
        fold: a.fold,
        split: split_name(a.split),
    });
    let annotations = match (&a.annotations, &a.data_dir) {
        (Some(p), _) => p.clone(),
        (None, Some(d)) => d.join(ANNOTATIONS),
        (None, None) => return Err(CliError::input("pass --annotations or --data-dir")),
    };
    let records = load_records(&annotations, &mut mb)?;
    let report = match (&a.predictions, a.task) {
        (Some(p), Task::Climax) => {
            let mut r = EvalReport::new();
            r.climax = Some(climax_from_predictions(p, &records, &mut mb)?);
            r
        }
        (Some(p), Task::Sentiment) => sentiment_from_scores(p, &records, &mut mb)?,
        (None, _) => from_checkpoint(g, &a, records, &mut mb)?,
    };
    write_report(&a.out, &report).map_err(|e| CliError::at(&a.out, e))?;
    mb.output(&a.out);
    mb.output(a.out.with_extension("txt"));
    mb.finish(&manifest_path(&a.out, false))?;
    if !g.quiet {
        eprint!("{}", report.to_text());
    }
    if !report.is_consistent() {
        return Err(CliError::Numeric(format!(
            "{}: report failed its range checks",
            a.out.display()
        )));
    }
    Ok(())
}
