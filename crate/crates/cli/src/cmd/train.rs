use std::path::Path;

use adarc_core::seqmodel::save_checkpoint;
use adarc_core::trainer::{make_splits, train, TrainConfig, TrainError};
use adarc_core::Task;

use super::create_dir;
use crate::data::{
    inject_climax, labelled_tensors, load_features, load_model, load_records, load_signals,
    ANNOTATIONS, FEATURES, SIGNALS,
};
use crate::error::CliError;
use crate::manifest::{manifest_path, ManifestBuilder};
use crate::{Globals, TrainArgs};

pub const CHECKPOINT: &str = "checkpoint.ckpt";
pub const LOG: &str = "train_log.csv";

pub fn load_config(path: &Path, mb: &mut ManifestBuilder) -> Result<TrainConfig, CliError> {
    let text = std::fs::read_to_string(path).map_err(|e| CliError::io(path, e))?;
    let config = toml::from_str(&text)
        .map_err(|e| CliError::input(format!("{}: {e}", path.display())))?;
    mb.input(path);
    Ok(config)
}

/// Config file values with command-line flags on top.
fn resolve_config(g: &Globals, a: &TrainArgs, mb: &mut ManifestBuilder) -> Result<TrainConfig, CliError> {
    let mut c = match &g.config {
        Some(p) => load_config(p, mb)?,
        None => TrainConfig::default(),
    };
    if let Some(t) = a.task {
        c.task = t;
    }
    if let Some(s) = g.seed {
        c.seed = s;
    }
    if let Some(v) = a.steps {
        c.steps = v;
    }
    if let Some(v) = a.batch {
        c.batch = v;
    }
    if let Some(v) = a.lr {
        c.lr = v;
    }
    if let Some(v) = a.keep_prob {
        c.keep_prob = v;
    }
    if let Some(v) = a.eval_every {
        c.eval_every = v;
    }
    if let Some(b) = &a.blocks {
        c.blocks = Some(b.clone());
    }
    c.validate()?;
    Ok(c)
}

pub fn run(g: &Globals, a: TrainArgs) -> Result<(), CliError> {
    let mut mb = ManifestBuilder::new("train");
    let config = resolve_config(g, &a, &mut mb)?;
    mb.config(&config);
    mb.seed(config.seed);

    let records = load_records(&a.data_dir.join(ANNOTATIONS), &mut mb)?;
    let features = load_features(&a.data_dir.join(FEATURES), &mut mb)?;
    let signals = load_signals(&a.data_dir.join(SIGNALS), &mut mb)?;
    let mut tensors = labelled_tensors(&records, &features, &signals)?;
    if let Some(p) = &a.climax_checkpoint {
        if config.task != Task::Climax {
            let climax = load_model(p, Some(Task::Climax), &mut mb)?;
            inject_climax(&mut tensors, &climax)?;
        }
    }

    let ids: Vec<String> = records.iter().map(|r| r.video_id.clone()).collect();
    let plans = make_splits(&ids, config.seed)?;
    let plan = plans.get(a.fold).ok_or(TrainError::BadFold(a.fold))?;
    let [train_set, val_set, _] = plan.apply(&tensors);
    g.say(format!(
        "training {} model: fold {}, {} train / {} val videos, {} steps",
        config.task,
        a.fold,
        train_set.len(),
        val_set.len(),
        config.steps
    ));
    let (ckpt, log) = train(&config, &train_set, &val_set)?;

    create_dir(&a.out)?;
    let ckpt_path = a.out.join(CHECKPOINT);
    save_checkpoint(&ckpt_path, &ckpt).map_err(|e| CliError::at(&ckpt_path, e))?;
    let log_path = a.out.join(LOG);
    log.write_csv(&log_path).map_err(|e| CliError::io(&log_path, e))?;
    mb.output(&ckpt_path);
    mb.output(&log_path);
    mb.finish(&manifest_path(&a.out, true))?;
    match (log.best_step, log.best_metric) {
        (Some(step), Some(m)) => g.say(format!("best validation metric {m:.4} at step {step}")),
        _ => g.say("no validation metric was computed; kept the final weights"),
    }
    g.say(format!("wrote {}", ckpt_path.display()));
    Ok(())
}
