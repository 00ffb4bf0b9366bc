use adarc_core::climax::{predict_unsupervised, top_k_peaks, Method, PredictionRecord};
use adarc_core::eval::{write_predictions, write_scores, ScoreRecord};
use adarc_core::trainer::{predict_climax, predict_sentiment};
use adarc_core::{PerSecondSeries, Task};

use crate::data::{load_features, load_model, load_signals, match_layout, unlabelled_tensors};
use crate::error::CliError;
use crate::manifest::{manifest_path, ManifestBuilder};
use crate::{Globals, PredictArgs};

#[derive(serde::Serialize)]
struct PredictConfig {
    method: Method,
    k: usize,
}

pub fn run(g: &Globals, a: PredictArgs) -> Result<(), CliError> {
    if a.k == 0 {
        return Err(CliError::input("--k must be at least 1"));
    }
    let mut mb = ManifestBuilder::new("predict");
    mb.config(PredictConfig { method: a.method, k: a.k });
    let signals = load_signals(&a.signals, &mut mb)?;

    if a.method != Method::Lstm {
        let records: Vec<PredictionRecord> = signals
            .iter()
            .map(|(id, track)| PredictionRecord::new(id, a.k, predict_unsupervised(track, a.method, a.k)))
            .collect();
        write_predictions(&a.out, &records)?;
    } else {
        let ckpt_path = a.checkpoint.as_ref().expect("clap requires --checkpoint");
        let features_path = a
            .features
            .as_ref()
            .ok_or_else(|| CliError::input("the lstm method needs --features"))?;
        let ckpt = load_model(ckpt_path, None, &mut mb)?;
        let features = load_features(features_path, &mut mb)?;
        let mut tensors = unlabelled_tensors(&features, &signals)?;
        let climax = match &a.climax_checkpoint {
            Some(p) => Some(load_model(p, Some(Task::Climax), &mut mb)?),
            None => None,
        };
        match_layout(&mut tensors, &ckpt, climax.as_ref())?;
        match ckpt.task() {
            Task::Climax => {
                let records = tensors
                    .iter()
                    .map(|t| {
                        let probs = predict_climax(&ckpt, t)?;
                        let pred = top_k_peaks(&PerSecondSeries::new(probs), a.k, Method::Lstm);
                        Ok(PredictionRecord::new(&t.video_id, a.k, pred))
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                write_predictions(&a.out, &records)?;
            }
            Task::Sentiment => {
                let records = tensors
                    .iter()
                    .map(|t| {
                        let (probs, topics) = predict_sentiment(&ckpt, t)?;
                        Ok(ScoreRecord {
                            video_id: t.video_id.clone(),
                            sentiment_scores: probs,
                            topic_logits: topics,
                        })
                    })
                    .collect::<Result<Vec<_>, CliError>>()?;
                write_scores(&a.out, &records)?;
            }
        }
    }
    mb.output(&a.out);
    mb.finish(&manifest_path(&a.out, false))?;
    g.say(format!("wrote {}", a.out.display()));
    Ok(())
}
