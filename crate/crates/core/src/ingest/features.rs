use std::collections::HashMap;
use std::path::Path;

use serde::{Deserialize, Serialize};

use super::{read_file, write_file, IngestError};

pub const RESNET_DIM: usize = 2048;
pub const PLACES_DIM: usize = 365;
pub const OBJECTS_DIM: usize = 80;
pub const FACES_DIM: usize = 10;
/// Leading expression-probability block of the faces vector; the rest is
/// valence and arousal.
pub const FACE_EXPRESSIONS: usize = 8;

const PLACES_TOLERANCE: f64 = 1e-3;

/// Per-frame semantic features produced by the offline extractor.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureRecord {
    pub video_id: String,
    pub frame_idx: u64,
    pub t_sec: f64,
    pub resnet: Vec<f64>,
    pub places: Vec<f64>,
    pub objects: Vec<f64>,
    pub faces: Vec<f64>,
}

fn check_dim(line: usize, block: &'static str, v: &[f64], expected: usize) -> Result<(), IngestError> {
    if v.len() != expected {
        return Err(IngestError::Dimension {
            line,
            block,
            expected,
            actual: v.len(),
        });
    }
    Ok(())
}

fn check_range(
    line: usize,
    block: &'static str,
    v: &[f64],
    offset: usize,
    lo: f64,
    hi: f64,
) -> Result<(), IngestError> {
    match v.iter().position(|x| !(lo..=hi).contains(x)) {
        Some(i) => Err(IngestError::OutOfRange {
            line,
            block,
            index: offset + i,
            value: v[i],
        }),
        None => Ok(()),
    }
}

impl FeatureRecord {
    /// Checks dimensions, ranges and place normalisation. `line` is only
    /// used to label errors.
    pub fn validate(&self, line: usize) -> Result<(), IngestError> {
        check_dim(line, "resnet", &self.resnet, RESNET_DIM)?;
        check_dim(line, "places", &self.places, PLACES_DIM)?;
        check_dim(line, "objects", &self.objects, OBJECTS_DIM)?;
        check_dim(line, "faces", &self.faces, FACES_DIM)?;
        if let Some(i) = self.resnet.iter().position(|x| !x.is_finite()) {
            return Err(IngestError::OutOfRange {
                line,
                block: "resnet",
                index: i,
                value: self.resnet[i],
            });
        }
        check_range(line, "places", &self.places, 0, 0.0, 1.0)?;
        let sum: f64 = self.places.iter().sum();
        if (sum - 1.0).abs() > PLACES_TOLERANCE {
            return Err(IngestError::NotNormalized { line, sum });
        }
        check_range(line, "objects", &self.objects, 0, 0.0, 1.0)?;
        check_range(line, "faces", &self.faces[..FACE_EXPRESSIONS], 0, 0.0, 1.0)?;
        check_range(
            line,
            "faces",
            &self.faces[FACE_EXPRESSIONS..],
            FACE_EXPRESSIONS,
            -1.0,
            1.0,
        )?;
        if !(self.t_sec.is_finite() && self.t_sec >= 0.0) {
            return Err(IngestError::InvalidRecord {
                line,
                video_id: self.video_id.clone(),
                what: format!("bad t_sec {}", self.t_sec),
            });
        }
        Ok(())
    }
}

/// Parses feature JSONL and returns records sorted by `(video_id, frame_idx)`.
///
/// Videos may interleave in the file, but each video's `frame_idx` must
/// strictly increase in file order.
pub fn parse_features(text: &str) -> Result<Vec<FeatureRecord>, IngestError> {
    let mut last_idx: HashMap<String, u64> = HashMap::new();
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = i + 1;
        if raw.trim().is_empty() {
            continue;
        }
        let rec: FeatureRecord =
            serde_json::from_str(raw).map_err(|source| IngestError::Json { line, source })?;
        rec.validate(line)?;
        if let Some(&prev) = last_idx.get(&rec.video_id) {
            if rec.frame_idx <= prev {
                return Err(IngestError::NonMonotoneFrame {
                    line,
                    video_id: rec.video_id,
                    frame_idx: rec.frame_idx,
                });
            }
        }
        last_idx.insert(rec.video_id.clone(), rec.frame_idx);
        out.push(rec);
    }
    out.sort_by(|a, b| {
        a.video_id
            .cmp(&b.video_id)
            .then(a.frame_idx.cmp(&b.frame_idx))
    });
    Ok(out)
}

pub fn read_features(path: impl AsRef<Path>) -> Result<Vec<FeatureRecord>, IngestError> {
    let bytes = read_file(path.as_ref())?;
    parse_features(&String::from_utf8_lossy(&bytes))
}

pub fn write_features(
    path: impl AsRef<Path>,
    records: &[FeatureRecord],
) -> Result<(), IngestError> {
    let mut text = String::new();
    for r in records {
        text.push_str(&serde_json::to_string(r).expect("feature record serialises"));
        text.push('\n');
    }
    write_file(path.as_ref(), text.as_bytes())
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use proptest::prelude::*;

    pub(crate) fn valid_record(video: &str, frame: u64) -> FeatureRecord {
        FeatureRecord {
            video_id: video.to_string(),
            frame_idx: frame,
            t_sec: frame as f64,
            resnet: vec![0.5; RESNET_DIM],
            places: vec![1.0 / PLACES_DIM as f64; PLACES_DIM],
            objects: vec![0.0; OBJECTS_DIM],
            faces: vec![0.0; FACES_DIM],
        }
    }

    fn jsonl(recs: &[FeatureRecord]) -> String {
        recs.iter()
            .map(|r| serde_json::to_string(r).unwrap() + "\n")
            .collect()
    }

    #[test]
    fn uniform_places_accepted() {
        assert!(valid_record("a", 0).validate(1).is_ok());
    }

    #[test]
    fn short_places_vector() {
        let mut r = valid_record("a", 0);
        r.places.pop();
        let err = parse_features(&jsonl(&[r])).unwrap_err();
        assert!(err.to_string().contains("places: expected 365"), "{err}");
    }

    #[test]
    fn unnormalised_places() {
        let mut r = valid_record("a", 0);
        r.places[0] += 0.01;
        assert!(matches!(
            r.validate(4),
            Err(IngestError::NotNormalized { line: 4, .. })
        ));
    }

    #[test]
    fn valence_range() {
        let mut r = valid_record("a", 0);
        r.faces[8] = -1.0;
        r.faces[9] = 1.0;
        assert!(r.validate(1).is_ok());
        r.faces[9] = 1.5;
        assert!(matches!(
            r.validate(1),
            Err(IngestError::OutOfRange { block: "faces", index: 9, .. })
        ));
    }

    #[test]
    fn groups_and_sorts() {
        let mut recs = Vec::new();
        for f in 0..5 {
            recs.push(valid_record("vb", f));
            recs.push(valid_record("va", f));
        }
        let parsed = parse_features(&jsonl(&recs)).unwrap();
        assert_eq!(parsed.len(), 10);
        assert!(parsed[..5].iter().all(|r| r.video_id == "va"));
        assert!(parsed[5..].iter().all(|r| r.video_id == "vb"));
        assert_eq!(
            parsed[..5].iter().map(|r| r.frame_idx).collect::<Vec<_>>(),
            vec![0, 1, 2, 3, 4]
        );
    }

    #[test]
    fn non_monotone_frames() {
        let recs = [valid_record("a", 1), valid_record("a", 1)];
        assert!(matches!(
            parse_features(&jsonl(&recs)),
            Err(IngestError::NonMonotoneFrame { line: 2, .. })
        ));
    }

    fn arb_record() -> impl Strategy<Value = FeatureRecord> {
        (
            proptest::collection::vec(0.0f64..1.0, PLACES_DIM - 2..PLACES_DIM + 2),
            proptest::collection::vec(-0.2f64..1.2, OBJECTS_DIM),
            proptest::collection::vec(-1.2f64..1.2, FACES_DIM),
            any::<bool>(),
        )
            .prop_map(|(mut places, objects, faces, normalise)| {
                if normalise {
                    let s: f64 = places.iter().sum();
                    places.iter_mut().for_each(|p| *p /= s);
                }
                FeatureRecord {
                    video_id: "p".into(),
                    frame_idx: 0,
                    t_sec: 0.0,
                    resnet: vec![1.0; RESNET_DIM],
                    places,
                    objects,
                    faces,
                }
            })
    }

    proptest! {
        #[test]
        fn accepted_records_satisfy_invariants(rec in arb_record()) {
            let text = serde_json::to_string(&rec).unwrap();
            if let Ok(parsed) = parse_features(&text) {
                let r = &parsed[0];
                prop_assert_eq!(r.places.len(), PLACES_DIM);
                prop_assert_eq!(r.objects.len(), OBJECTS_DIM);
                prop_assert_eq!(r.faces.len(), FACES_DIM);
                prop_assert!((r.places.iter().sum::<f64>() - 1.0).abs() <= 1e-3);
                prop_assert!(r.places.iter().chain(&r.objects).all(|x| (0.0..=1.0).contains(x)));
                prop_assert!(r.faces[..8].iter().all(|x| (0.0..=1.0).contains(x)));
                prop_assert!(r.faces[8..].iter().all(|x| (-1.0..=1.0).contains(x)));
            }
        }
    }
}
