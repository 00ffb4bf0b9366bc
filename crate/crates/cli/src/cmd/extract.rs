use std::path::{Path, PathBuf};

use adarc_core::ingest::{read_wav, read_y4m};
use adarc_core::signals::{encode_signals, extract_signals, SignalConfig};
use rayon::prelude::*;

use super::write_file;
use crate::data::SIGNALS;
use crate::error::CliError;
use crate::manifest::{manifest_path, ManifestBuilder};
use crate::{ExtractArgs, Globals};

struct Job {
    id: String,
    video: PathBuf,
    audio: PathBuf,
}

fn stem(path: &Path) -> String {
    path.file_stem().unwrap_or_default().to_string_lossy().into_owned()
}

/// `video/*.y4m` in name order, each paired with `audio/<stem>.wav`.
fn batch_jobs(dir: &Path) -> Result<Vec<Job>, CliError> {
    let video_dir = dir.join("video");
    let entries = std::fs::read_dir(&video_dir).map_err(|e| CliError::io(&video_dir, e))?;
    let mut videos: Vec<PathBuf> = entries
        .filter_map(|e| e.ok().map(|e| e.path()))
        .filter(|p| p.extension().is_some_and(|x| x == "y4m"))
        .collect();
    videos.sort();
    if videos.is_empty() {
        return Err(CliError::input(format!("{}: no .y4m files", video_dir.display())));
    }
    Ok(videos
        .into_iter()
        .map(|video| {
            let id = stem(&video);
            let audio = dir.join("audio").join(format!("{id}.wav"));
            Job { id, video, audio }
        })
        .collect())
}

fn extract_one(job: &Job, config: &SignalConfig) -> Result<String, CliError> {
    if !job.audio.exists() {
        return Err(CliError::input(format!("{}: audio file not found", job.audio.display())));
    }
    let frames = read_y4m(&job.video).map_err(|e| CliError::at(&job.video, e))?;
    let audio = read_wav(&job.audio).map_err(|e| CliError::at(&job.audio, e))?;
    let track = extract_signals(&frames, &audio, config).map_err(|e| CliError::at(&job.video, e))?;
    Ok(encode_signals(&job.id, &track))
}

pub fn run(g: &Globals, a: ExtractArgs) -> Result<(), CliError> {
    let mut mb = ManifestBuilder::new("extract");
    let config = SignalConfig::default();
    mb.config(config);
    let (jobs, out) = match (&a.video, &a.audio, &a.data_dir) {
        (Some(video), Some(audio), _) => {
            let id = a.video_id.clone().unwrap_or_else(|| stem(video));
            let job = Job {
                id,
                video: video.clone(),
                audio: audio.clone(),
            };
            (vec![job], a.out.clone().expect("clap requires --out"))
        }
        (_, _, Some(dir)) => (batch_jobs(dir)?, a.out.clone().unwrap_or_else(|| dir.join(SIGNALS))),
        _ => return Err(CliError::input("pass --video and --audio, or --data-dir")),
    };
    g.say(format!("extracting signals for {} video(s)", jobs.len()));
    let parts: Vec<String> = jobs
        .par_iter()
        .map(|j| extract_one(j, &config))
        .collect::<Result<_, _>>()?;
    write_file(&out, parts.concat())?;
    for j in &jobs {
        mb.input(&j.video);
        mb.input(&j.audio);
    }
    mb.output(&out);
    mb.finish(&manifest_path(&out, false))?;
    g.say(format!("wrote {}", out.display()));
    Ok(())
}
