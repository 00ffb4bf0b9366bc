use std::path::Path;

use super::{read_file, write_file, IngestError};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Rational {
    pub num: u32,
    pub den: u32,
}

impl Rational {
    pub fn new(num: u32, den: u32) -> Self {
        Rational { num, den }
    }

    pub fn as_f64(self) -> f64 {
        f64::from(self.num) / f64::from(self.den)
    }
}

/// Chroma layouts accepted on input. Only the luma plane is kept.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Chroma {
    C420,
    C444,
    Mono,
}

impl Chroma {
    fn chroma_bytes(self, width: usize, height: usize) -> usize {
        match self {
            Chroma::C420 => 2 * width.div_ceil(2) * height.div_ceil(2),
            Chroma::C444 => 2 * width * height,
            Chroma::Mono => 0,
        }
    }
}

/// Decoded video: luma planes plus timing.
#[derive(Debug, Clone, PartialEq)]
pub struct FrameSeq {
    pub width: usize,
    pub height: usize,
    pub fps: Rational,
    pub frames: Vec<Vec<u8>>,
}

impl FrameSeq {
    pub fn new(width: usize, height: usize, fps: Rational, frames: Vec<Vec<u8>>) -> Self {
        assert!(fps.num > 0 && fps.den > 0, "fps must be positive");
        assert!(
            frames.iter().all(|f| f.len() == width * height),
            "every frame must have width*height samples"
        );
        FrameSeq {
            width,
            height,
            fps,
            frames,
        }
    }

    pub fn len(&self) -> usize {
        self.frames.len()
    }

    pub fn is_empty(&self) -> bool {
        self.frames.is_empty()
    }

    pub fn fps(&self) -> f64 {
        self.fps.as_f64()
    }

    /// Timestamp in seconds of frame `k`.
    pub fn time_of(&self, k: usize) -> f64 {
        k as f64 * f64::from(self.fps.den) / f64::from(self.fps.num)
    }
}

fn header_err(offset: usize, msg: impl Into<String>) -> IngestError {
    IngestError::Y4mHeader {
        offset,
        msg: msg.into(),
    }
}

/// Returns the index of the first `\n` at or after `start`.
fn line_end(data: &[u8], start: usize) -> Option<usize> {
    data[start..].iter().position(|&b| b == b'\n').map(|p| start + p)
}

pub fn parse_y4m(data: &[u8]) -> Result<FrameSeq, IngestError> {
    const MAGIC: &[u8] = b"YUV4MPEG2";
    if !data.starts_with(MAGIC) {
        return Err(header_err(0, "missing YUV4MPEG2 signature"));
    }
    let end = line_end(data, 0).ok_or_else(|| header_err(data.len(), "unterminated header"))?;
    let header = std::str::from_utf8(&data[MAGIC.len()..end])
        .map_err(|_| header_err(MAGIC.len(), "header is not ascii"))?;

    let mut width = None;
    let mut height = None;
    let mut fps = None;
    let mut chroma = Chroma::C420;
    let mut offset = MAGIC.len();
    for token in header.split(' ') {
        let tok_offset = offset;
        offset += token.len() + 1;
        if token.is_empty() {
            continue;
        }
        let (tag, value) = token.split_at(1);
        match tag {
            "W" => {
                width = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| header_err(tok_offset, format!("bad width '{value}'")))?,
                )
            }
            "H" => {
                height = Some(
                    value
                        .parse::<usize>()
                        .map_err(|_| header_err(tok_offset, format!("bad height '{value}'")))?,
                )
            }
            "F" => {
                let (n, d) = value
                    .split_once(':')
                    .ok_or_else(|| header_err(tok_offset, format!("bad frame rate '{value}'")))?;
                let n: u32 = n
                    .parse()
                    .map_err(|_| header_err(tok_offset, format!("bad frame rate '{value}'")))?;
                let d: u32 = d
                    .parse()
                    .map_err(|_| header_err(tok_offset, format!("bad frame rate '{value}'")))?;
                if n == 0 || d == 0 {
                    return Err(header_err(tok_offset, "frame rate must be positive"));
                }
                fps = Some(Rational::new(n, d));
            }
            "C" => {
                chroma = match value {
                    "420" | "420jpeg" | "420paldv" | "420mpeg2" => Chroma::C420,
                    "444" => Chroma::C444,
                    "mono" => Chroma::Mono,
                    other => {
                        return Err(IngestError::Y4mChroma {
                            offset: tok_offset,
                            tag: other.to_string(),
                        })
                    }
                }
            }
            // interlacing, aspect ratio and extensions do not affect the payload size
            "I" | "A" | "X" => {}
            _ => return Err(header_err(tok_offset, format!("unknown header tag '{token}'"))),
        }
    }
    let width = width.ok_or_else(|| header_err(end, "missing W"))?;
    let height = height.ok_or_else(|| header_err(end, "missing H"))?;
    let fps = fps.ok_or_else(|| header_err(end, "missing F"))?;
    if width == 0 || height == 0 {
        return Err(header_err(end, "zero frame dimension"));
    }

    let luma = width * height;
    let frame_bytes = luma + chroma.chroma_bytes(width, height);
    let mut frames = Vec::new();
    let mut pos = end + 1;
    while pos < data.len() {
        if !data[pos..].starts_with(b"FRAME") {
            return Err(header_err(pos, "expected FRAME marker"));
        }
        let marker_end = line_end(data, pos).ok_or_else(|| header_err(pos, "unterminated FRAME"))?;
        let payload = marker_end + 1;
        let available = data.len() - payload;
        if available < frame_bytes {
            return Err(IngestError::Y4mTruncated {
                offset: payload,
                expected: frame_bytes,
                actual: available,
            });
        }
        frames.push(data[payload..payload + luma].to_vec());
        pos = payload + frame_bytes;
    }

    Ok(FrameSeq {
        width,
        height,
        fps,
        frames,
    })
}

pub fn read_y4m(path: impl AsRef<Path>) -> Result<FrameSeq, IngestError> {
    parse_y4m(&read_file(path.as_ref())?)
}

/// Serialises as 4:2:0 with neutral chroma so the file stays playable.
pub fn encode_y4m(seq: &FrameSeq) -> Vec<u8> {
    let chroma = Chroma::C420.chroma_bytes(seq.width, seq.height);
    let mut out = format!(
        "YUV4MPEG2 W{} H{} F{}:{} Ip A1:1 C420jpeg\n",
        seq.width, seq.height, seq.fps.num, seq.fps.den
    )
    .into_bytes();
    out.reserve(seq.frames.len() * (6 + seq.width * seq.height + chroma));
    for frame in &seq.frames {
        out.extend_from_slice(b"FRAME\n");
        out.extend_from_slice(frame);
        out.extend(std::iter::repeat_n(128u8, chroma));
    }
    out
}

pub fn write_y4m(path: impl AsRef<Path>, seq: &FrameSeq) -> Result<(), IngestError> {
    write_file(path.as_ref(), &encode_y4m(seq))
}
