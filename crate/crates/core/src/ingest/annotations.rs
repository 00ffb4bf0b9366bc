use std::collections::{BTreeMap, HashSet};
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, write_file, IngestError};
use crate::vocab::{self, N_SENTIMENTS};

/// Max votes a sentiment can get: one per sentiment annotator.
pub const MAX_VOTES: u8 = 5;

/// One worker's climax annotation.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WorkerMark {
    pub has_climax: bool,
    pub t_sec: Option<f64>,
    pub rejected: bool,
}

impl WorkerMark {
    pub fn accepted_time(&self) -> Option<f64> {
        if self.rejected || !self.has_climax {
            None
        } else {
            self.t_sec
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct VideoRecord {
    pub video_id: String,
    pub duration_sec: f64,
    pub fps: f64,
    pub workers: Vec<WorkerMark>,
    /// Indexed by the sentiment vocabulary.
    pub sentiment_votes: [u8; N_SENTIMENTS],
    /// Index into the topic vocabulary.
    pub topic: Option<usize>,
}

impl VideoRecord {
    /// Climax times of non-rejected workers who reported a climax.
    pub fn accepted_marks(&self) -> Vec<f64> {
        self.workers
            .iter()
            .filter_map(WorkerMark::accepted_time)
            .collect()
    }
}

#[derive(Serialize, Deserialize)]
struct RawRecord {
    video_id: String,
    duration_sec: f64,
    fps: f64,
    workers: Vec<WorkerMark>,
    #[serde(default)]
    sentiment_votes: BTreeMap<String, u32>,
    #[serde(default)]
    topic: Option<String>,
}

fn invalid(line: usize, video_id: &str, what: impl Into<String>) -> IngestError {
    IngestError::InvalidRecord {
        line,
        video_id: video_id.to_string(),
        what: what.into(),
    }
}

fn validate(raw: RawRecord, line: usize) -> Result<VideoRecord, IngestError> {
    let id = raw.video_id.as_str();
    if id.is_empty() {
        return Err(invalid(line, id, "empty video_id"));
    }
    if !(raw.duration_sec.is_finite() && raw.duration_sec > 0.0) {
        return Err(invalid(line, id, format!("bad duration {}", raw.duration_sec)));
    }
    if !(raw.fps.is_finite() && raw.fps > 0.0) {
        return Err(invalid(line, id, format!("bad fps {}", raw.fps)));
    }
    for w in &raw.workers {
        match w.t_sec {
            Some(t) if !(0.0..=raw.duration_sec).contains(&t) => {
                return Err(invalid(
                    line,
                    id,
                    format!("t_sec {t} outside [0, {}]", raw.duration_sec),
                ))
            }
            None if w.has_climax && !w.rejected => {
                return Err(invalid(line, id, "climax reported without t_sec"))
            }
            _ => {}
        }
    }
    let mut votes = [0u8; N_SENTIMENTS];
    for (name, &count) in &raw.sentiment_votes {
        let idx = vocab::sentiment_index(name).ok_or_else(|| IngestError::UnknownSentiment {
            line,
            name: name.clone(),
        })?;
        if count > u32::from(MAX_VOTES) {
            return Err(invalid(
                line,
                id,
                format!("{count} votes for '{name}' exceeds {MAX_VOTES} annotators"),
            ));
        }
        votes[idx] = count as u8;
    }
    let topic = match raw.topic.as_deref() {
        None => None,
        Some(name) => Some(vocab::topic_index(name).ok_or_else(|| IngestError::UnknownTopic {
            line,
            name: name.to_string(),
        })?),
    };
    Ok(VideoRecord {
        video_id: raw.video_id,
        duration_sec: raw.duration_sec,
        fps: raw.fps,
        workers: raw.workers,
        sentiment_votes: votes,
        topic,
    })
}

/// Parses annotation JSONL. Blank lines are ignored; line numbers are 1-based.
pub fn parse_annotations(text: &str) -> Result<Vec<VideoRecord>, IngestError> {
    let mut seen = HashSet::new();
    let mut out = Vec::new();
    for (i, raw_line) in text.lines().enumerate() {
        let line = i + 1;
        if raw_line.trim().is_empty() {
            continue;
        }
        let raw: RawRecord = serde_json::from_str(raw_line)
            .map_err(|source| IngestError::Json { line, source })?;
        let rec = validate(raw, line)?;
        if !seen.insert(rec.video_id.clone()) {
            return Err(IngestError::DuplicateVideo {
                line,
                video_id: rec.video_id,
            });
        }
        out.push(rec);
    }
    Ok(out)
}

pub fn read_annotations(path: impl AsRef<Path>) -> Result<Vec<VideoRecord>, IngestError> {
    let bytes = read_file(path.as_ref())?;
    let text = String::from_utf8_lossy(&bytes);
    parse_annotations(&text)
}

pub fn encode_annotation(rec: &VideoRecord) -> String {
    let names = vocab::sentiments();
    let raw = RawRecord {
        video_id: rec.video_id.clone(),
        duration_sec: rec.duration_sec,
        fps: rec.fps,
        workers: rec.workers.clone(),
        sentiment_votes: rec
            .sentiment_votes
            .iter()
            .enumerate()
            .filter(|(_, &v)| v > 0)
            .map(|(i, &v)| (names[i].to_string(), u32::from(v)))
            .collect(),
        topic: rec.topic.map(|t| vocab::topics()[t].to_string()),
    };
    serde_json::to_string(&raw).expect("annotation serialises")
}

pub fn write_annotations(
    path: impl AsRef<Path>,
    records: &[VideoRecord],
) -> Result<(), IngestError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&encode_annotation(r));
        text.push('\n');
    }
    write_file(path.as_ref(), text.as_bytes())
}

#[cfg(test)]
mod tests {
    use super::*;

    const ONE: &str = r#"{"video_id":"v1","duration_sec":30.0,"fps":25.0,"workers":[{"has_climax":true,"t_sec":10.0,"rejected":false},{"has_climax":true,"t_sec":10.0,"rejected":false},{"has_climax":false,"t_sec":null,"rejected":false},{"has_climax":true,"t_sec":3.0,"rejected":true}],"sentiment_votes":{"alarmed":3,"cheerful":1},"topic":"cars"}"#;

    #[test]
    fn parses_workers_and_votes() {
        let recs = parse_annotations(ONE).unwrap();
        assert_eq!(recs.len(), 1);
        let r = &recs[0];
        assert_eq!(r.workers.len(), 4);
        assert_eq!(r.accepted_marks(), vec![10.0, 10.0]);
        assert_eq!(r.sentiment_votes[vocab::sentiment_index("alarmed").unwrap()], 3);
        assert_eq!(r.topic, vocab::topic_index("cars"));
    }

    #[test]
    fn unknown_sentiment_is_named() {
        let text = ONE.replace("cheerful", "bored");
        match parse_annotations(&text) {
            Err(IngestError::UnknownSentiment { line: 1, name }) => assert_eq!(name, "bored"),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn unknown_topic() {
        let text = ONE.replace("\"cars\"", "\"spaceships\"");
        assert!(matches!(
            parse_annotations(&text),
            Err(IngestError::UnknownTopic { .. })
        ));
    }

    #[test]
    fn mark_out_of_range() {
        let text = ONE.replace("\"t_sec\":10.0", "\"t_sec\":31.0");
        assert!(matches!(
            parse_annotations(&text),
            Err(IngestError::InvalidRecord { line: 1, .. })
        ));
    }

    #[test]
    fn duplicate_ids() {
        let text = format!("{ONE}\n\n{ONE}\n");
        assert!(matches!(
            parse_annotations(&text),
            Err(IngestError::DuplicateVideo { line: 3, .. })
        ));
    }

    #[test]
    fn three_videos_round_trip() {
        let base = &parse_annotations(ONE).unwrap()[0];
        let recs: Vec<VideoRecord> = (0..3)
            .map(|i| VideoRecord {
                video_id: format!("vid{i}"),
                topic: if i == 1 { None } else { base.topic },
                ..base.clone()
            })
            .collect();
        let text: String = recs.iter().map(|r| encode_annotation(r) + "\n").collect();
        let back = parse_annotations(&text).unwrap();
        assert_eq!(back.len(), 3);
        assert_eq!(back, recs);
    }

    #[test]
    fn bad_json_has_line_number() {
        let text = format!("{ONE}\n{{not json\n");
        assert!(matches!(
            parse_annotations(&text),
            Err(IngestError::Json { line: 2, .. })
        ));
    }
}
