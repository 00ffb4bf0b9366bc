use adarc_core::synth::{generate, SynthConfig};

use super::create_dir;
use crate::error::CliError;
use crate::manifest::{manifest_path, ManifestBuilder};
use crate::{Globals, SynthArgs};

pub const MIN_VIDEOS: usize = 5;

pub fn run(g: &Globals, a: SynthArgs) -> Result<(), CliError> {
    if a.n < MIN_VIDEOS {
        return Err(CliError::input(format!("--n must be at least {MIN_VIDEOS}, got {}", a.n)));
    }
    let seed = g.seed.unwrap_or(0);
    let config = SynthConfig::new(a.kind, a.n, seed);
    let mut mb = ManifestBuilder::new("synth");
    mb.config(&config);
    mb.seed(seed);
    let corpus = generate(&config);
    create_dir(&a.out)?;
    corpus.write(&a.out).map_err(|e| CliError::at(&a.out, e))?;
    for name in ["annotations.jsonl", "features.jsonl", "synth.json", "video", "audio"] {
        mb.output(a.out.join(name));
    }
    mb.finish(&manifest_path(&a.out, true))?;
    g.say(format!("wrote {} synthetic videos to {}", a.n, a.out.display()));
    Ok(())
}
