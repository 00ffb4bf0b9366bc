use std::path::Path;

use super::{read_file, write_file, IngestError};

/// Mono PCM audio normalised to [-1, 1].
#[derive(Debug, Clone, PartialEq)]
pub struct AudioTrack {
    pub sample_rate: u32,
    pub samples: Vec<f64>,
}

impl AudioTrack {
    pub fn duration_sec(&self) -> f64 {
        self.samples.len() as f64 / f64::from(self.sample_rate)
    }
}

fn malformed(offset: usize, msg: &str) -> IngestError {
    IngestError::WavMalformed {
        offset,
        msg: msg.to_string(),
    }
}

fn u16_at(data: &[u8], at: usize) -> u16 {
    u16::from_le_bytes([data[at], data[at + 1]])
}

fn u32_at(data: &[u8], at: usize) -> u32 {
    u32::from_le_bytes([data[at], data[at + 1], data[at + 2], data[at + 3]])
}

struct Format {
    channels: u16,
    sample_rate: u32,
    bits: u16,
}

/// Parses a RIFF/WAVE file holding 16-bit PCM, mono or stereo.
///
/// Stereo is downmixed by the per-sample mean of both channels.
pub fn parse_wav(data: &[u8]) -> Result<AudioTrack, IngestError> {
    if data.len() < 12 || &data[0..4] != b"RIFF" || &data[8..12] != b"WAVE" {
        return Err(malformed(0, "missing RIFF/WAVE signature"));
    }
    let mut pos = 12;
    let mut format: Option<Format> = None;
    while pos + 8 <= data.len() {
        let id = &data[pos..pos + 4];
        let size = u32_at(data, pos + 4) as usize;
        let body = pos + 8;
        match id {
            b"fmt " => {
                if size < 16 || body + 16 > data.len() {
                    return Err(malformed(pos, "fmt chunk too short"));
                }
                let tag = u16_at(data, body);
                if tag != 1 {
                    return Err(IngestError::NonPcm { format: tag });
                }
                let sample_rate = u32_at(data, body + 4);
                if sample_rate == 0 {
                    return Err(IngestError::ZeroSampleRate);
                }
                format = Some(Format {
                    channels: u16_at(data, body + 2),
                    sample_rate,
                    bits: u16_at(data, body + 14),
                });
            }
            b"data" => {
                let fmt = format.ok_or_else(|| malformed(pos, "data chunk before fmt chunk"))?;
                if fmt.bits != 16 || !(1..=2).contains(&fmt.channels) {
                    return Err(IngestError::WavLayout {
                        bits: fmt.bits,
                        channels: fmt.channels,
                    });
                }
                // tolerate writers that leave the size at 0 or oversize it when streaming
                let end = if size == 0 || body + size > data.len() {
                    data.len()
                } else {
                    body + size
                };
                let frame = 2 * fmt.channels as usize;
                let n = (end - body) / frame;
                let mut samples = Vec::with_capacity(n);
                for i in 0..n {
                    let at = body + i * frame;
                    let left = f64::from(u16_at(data, at) as i16) / 32768.0;
                    let s = if fmt.channels == 2 {
                        let right = f64::from(u16_at(data, at + 2) as i16) / 32768.0;
                        0.5 * (left + right)
                    } else {
                        left
                    };
                    samples.push(s);
                }
                return Ok(AudioTrack {
                    sample_rate: fmt.sample_rate,
                    samples,
                });
            }
            _ => {}
        }
        // chunks are word aligned
        pos = body + size + (size & 1);
    }
    if format.is_none() {
        return Err(malformed(12, "missing fmt chunk"));
    }
    Err(IngestError::MissingDataChunk)
}

pub fn read_wav(path: impl AsRef<Path>) -> Result<AudioTrack, IngestError> {
    parse_wav(&read_file(path.as_ref())?)
}

/// Encodes mono 16-bit PCM. Samples are clamped to [-1, 1].
pub fn encode_wav(track: &AudioTrack) -> Vec<u8> {
    let data_len = (track.samples.len() * 2) as u32;
    let mut out = Vec::with_capacity(44 + data_len as usize);
    out.extend_from_slice(b"RIFF");
    out.extend_from_slice(&(36 + data_len).to_le_bytes());
    out.extend_from_slice(b"WAVEfmt ");
    out.extend_from_slice(&16u32.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&1u16.to_le_bytes());
    out.extend_from_slice(&track.sample_rate.to_le_bytes());
    out.extend_from_slice(&(track.sample_rate * 2).to_le_bytes());
    out.extend_from_slice(&2u16.to_le_bytes());
    out.extend_from_slice(&16u16.to_le_bytes());
    out.extend_from_slice(b"data");
    out.extend_from_slice(&data_len.to_le_bytes());
    for &s in &track.samples {
        let v = (s.clamp(-1.0, 1.0) * 32768.0).round().clamp(-32768.0, 32767.0) as i16;
        out.extend_from_slice(&v.to_le_bytes());
    }
    out
}

pub fn write_wav(path: impl AsRef<Path>, track: &AudioTrack) -> Result<(), IngestError> {
    write_file(path.as_ref(), &encode_wav(track))
}
