use crate::ingest::{AudioTrack, Rational};

/// Max absolute sample value inside each frame's time window
/// `[k/fps, (k+1)/fps)`. Frames past the end of the audio get 0.
///
/// Window boundaries are computed in exact integer arithmetic so that
/// samples on a boundary are attributed consistently.
pub fn audio_amplitude(audio: &AudioTrack, fps: Rational, n_frames: usize) -> Vec<f64> {
    let sr = u128::from(audio.sample_rate);
    let num = u128::from(fps.num);
    let den = u128::from(fps.den);
    let n = audio.samples.len();
    // first sample index j with j / sr >= k * den / num
    let first_sample = |k: usize| -> usize {
        let t = k as u128 * den * sr;
        t.div_ceil(num).min(n as u128) as usize
    };
    (0..n_frames)
        .map(|k| {
            let (lo, hi) = (first_sample(k), first_sample(k + 1));
            audio.samples[lo..hi]
                .iter()
                .fold(0.0f64, |m, s| m.max(s.abs()))
        })
        .collect()
}
