use adarc_core::climax::aggregate_per_second;
use adarc_core::eval::plot_csv;
use adarc_core::trainer::predict_climax;
use adarc_core::Task;

use super::{create_dir, write_file};
use crate::data::{load_features, load_model, load_signals, unlabelled_tensors};
use crate::error::CliError;
use crate::manifest::{manifest_path, ManifestBuilder};
use crate::{EmitPlotsArgs, Globals};

pub fn run(g: &Globals, a: EmitPlotsArgs) -> Result<(), CliError> {
    let mut mb = ManifestBuilder::new("emit-plots");
    let signals = load_signals(&a.signals, &mut mb)?;
    let probs: Option<Vec<Vec<f64>>> = match (&a.checkpoint, &a.features) {
        (Some(c), Some(f)) => {
            let ckpt = load_model(c, Some(Task::Climax), &mut mb)?;
            let features = load_features(f, &mut mb)?;
            let tensors = unlabelled_tensors(&features, &signals)?;
            Some(
                tensors
                    .iter()
                    .map(|t| predict_climax(&ckpt, t).map_err(CliError::from))
                    .collect::<Result<_, _>>()?,
            )
        }
        _ => None,
    };
    create_dir(&a.out)?;
    for (i, (id, track)) in signals.iter().enumerate() {
        let csv = plot_csv(&aggregate_per_second(track), probs.as_ref().map(|p| p[i].as_slice()));
        let path = a.out.join(format!("{id}.csv"));
        write_file(&path, csv)?;
        mb.output(path);
    }
    mb.finish(&manifest_path(&a.out, true))?;
    g.say(format!("wrote {} plot file(s) to {}", signals.len(), a.out.display()));
    Ok(())
}
