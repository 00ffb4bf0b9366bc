//! Binary cache for assembled datasets.
//!
//! ```text
//! magic "ADARCTEN" | u32 version | u64 layout hash | u32 dim | u64 n_videos
//! per video: u32 id_len | id | u32 n_frames | n_frames*dim f64
//!            | 30 u8 votes | i32 topic (-1 = none)
//!            | u8 has_marks | u32 n_marks | n_marks f64
//! ```
//! All integers and floats little-endian.

use std::path::Path;

use super::{FeatureError, FeatureLayout, Labels, VideoTensor};
use crate::vocab::N_SENTIMENTS;

const MAGIC: &[u8; 8] = b"ADARCTEN";
const VERSION: u32 = 1;

pub fn encode_dataset(videos: &[VideoTensor], layout: &FeatureLayout) -> Vec<u8> {
    let mut out = Vec::new();
    out.extend_from_slice(MAGIC);
    out.extend_from_slice(&VERSION.to_le_bytes());
    out.extend_from_slice(&layout.hash().to_le_bytes());
    out.extend_from_slice(&(layout.dim() as u32).to_le_bytes());
    out.extend_from_slice(&(videos.len() as u64).to_le_bytes());
    for v in videos {
        assert_eq!(v.dim, layout.dim(), "video dim must match layout");
        out.extend_from_slice(&(v.video_id.len() as u32).to_le_bytes());
        out.extend_from_slice(v.video_id.as_bytes());
        out.extend_from_slice(&(v.n_frames() as u32).to_le_bytes());
        for x in &v.data {
            out.extend_from_slice(&x.to_le_bytes());
        }
        out.extend_from_slice(&v.labels.sentiment_votes);
        let topic = v.labels.topic.map_or(-1, |t| t as i32);
        out.extend_from_slice(&topic.to_le_bytes());
        match &v.labels.climax_marks {
            Some(marks) => {
                out.push(1);
                out.extend_from_slice(&(marks.len() as u32).to_le_bytes());
                for m in marks {
                    out.extend_from_slice(&m.to_le_bytes());
                }
            }
            None => {
                out.push(0);
                out.extend_from_slice(&0u32.to_le_bytes());
            }
        }
    }
    out
}

struct Cursor<'a> {
    data: &'a [u8],
    pos: usize,
}

impl<'a> Cursor<'a> {
    fn take(&mut self, n: usize) -> Result<&'a [u8], FeatureError> {
        if self.data.len() - self.pos < n {
            return Err(FeatureError::Truncated { offset: self.pos });
        }
        let s = &self.data[self.pos..self.pos + n];
        self.pos += n;
        Ok(s)
    }

    fn u32(&mut self) -> Result<u32, FeatureError> {
        Ok(u32::from_le_bytes(self.take(4)?.try_into().unwrap()))
    }

    fn u64(&mut self) -> Result<u64, FeatureError> {
        Ok(u64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }

    fn f64(&mut self) -> Result<f64, FeatureError> {
        Ok(f64::from_le_bytes(self.take(8)?.try_into().unwrap()))
    }
}

/// Decodes a dataset, checking the layout hash against `expected`.
pub fn decode_dataset(
    data: &[u8],
    expected: &FeatureLayout,
) -> Result<Vec<VideoTensor>, FeatureError> {
    let mut c = Cursor { data, pos: 0 };
    if c.take(8).map_err(|_| FeatureError::BadMagic)? != MAGIC {
        return Err(FeatureError::BadMagic);
    }
    let version = c.u32()?;
    if version != VERSION {
        return Err(FeatureError::Version {
            found: version,
            expected: VERSION,
        });
    }
    let hash = c.u64()?;
    if hash != expected.hash() {
        return Err(FeatureError::LayoutMismatch {
            found: hash,
            expected: expected.hash(),
        });
    }
    let dim = c.u32()? as usize;
    let n = c.u64()?;
    let mut videos = Vec::new();
    for _ in 0..n {
        let id_len = c.u32()? as usize;
        let id = String::from_utf8_lossy(c.take(id_len)?).into_owned();
        let frames = c.u32()? as usize;
        let count = frames
            .checked_mul(dim)
            .ok_or(FeatureError::Truncated { offset: c.pos })?;
        let raw = c.take(count.checked_mul(8).ok_or(FeatureError::Truncated { offset: c.pos })?)?;
        let values = raw
            .chunks_exact(8)
            .map(|b| f64::from_le_bytes(b.try_into().unwrap()))
            .collect();
        let mut votes = [0u8; N_SENTIMENTS];
        votes.copy_from_slice(c.take(N_SENTIMENTS)?);
        let topic = i32::from_le_bytes(c.take(4)?.try_into().unwrap());
        let has_marks = c.take(1)?[0] == 1;
        let n_marks = c.u32()? as usize;
        let mut marks = Vec::with_capacity(n_marks.min(64));
        for _ in 0..n_marks {
            marks.push(c.f64()?);
        }
        videos.push(VideoTensor {
            video_id: id,
            dim,
            data: values,
            labels: Labels {
                sentiment_votes: votes,
                topic: usize::try_from(topic).ok(),
                climax_marks: has_marks.then_some(marks),
            },
        });
    }
    Ok(videos)
}

pub fn write_dataset(
    path: impl AsRef<Path>,
    videos: &[VideoTensor],
    layout: &FeatureLayout,
) -> Result<(), FeatureError> {
    let path = path.as_ref();
    std::fs::write(path, encode_dataset(videos, layout)).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })
}

pub fn read_dataset(
    path: impl AsRef<Path>,
    layout: &FeatureLayout,
) -> Result<Vec<VideoTensor>, FeatureError> {
    let path = path.as_ref();
    let data = std::fs::read(path).map_err(|source| FeatureError::Io {
        path: path.display().to_string(),
        source,
    })?;
    decode_dataset(&data, layout)
}
