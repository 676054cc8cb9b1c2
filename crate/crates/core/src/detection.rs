//! File-based control detection: parsing and serializing annotation documents,
//! plus optional detector-noise simulation for robustness experiments.
//!
//! The engine is detector-agnostic. Any object detector (or a human annotator)
//! can produce the annotation document; this module only validates it:
//!
//! ```json
//! {
//!   "image": { "width": 1920, "height": 1080 },
//!   "controls": [
//!     { "id": 0, "bbox": [10, 10, 90, 40], "category": "BUTTON", "text": null }
//!   ]
//! }
//! ```
//!
//! `id` is optional; when no control carries an id they are assigned `0..N-1`
//! in document order. Mixing explicit and implicit ids is rejected.

use crate::model::{BBox, Control, ControlCategory, DetectionSet, ModelError};
use rand::Rng;
use serde::Deserialize;
use serde_json::json;
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum DetectionError {
    /// Document is malformed: bad JSON, missing fields, negative or
    /// degenerate bboxes, or inconsistent id assignment.
    #[error("annotation schema error: {0}")]
    Schema(String),
    /// A bbox exceeds the declared image dimensions.
    #[error("annotation bounds error: {0}")]
    Bounds(ModelError),
    /// The category label is not one of the known control classes.
    #[error("annotation category error: unknown label `{0}`")]
    Category(String),
    #[error("cannot read annotations from {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
}

#[derive(Deserialize)]
struct RawDocument {
    image: RawImage,
    controls: Vec<RawControl>,
}

#[derive(Deserialize)]
struct RawImage {
    width: u32,
    height: u32,
}

#[derive(Deserialize)]
struct RawControl {
    #[serde(default)]
    id: Option<u32>,
    bbox: [i64; 4],
    category: String,
    #[serde(default)]
    text: Option<String>,
}

fn convert_bbox(raw: [i64; 4]) -> Result<BBox, DetectionError> {
    if raw.iter().any(|&v| v < 0 || v > i64::from(u32::MAX)) {
        return Err(DetectionError::Schema(format!(
            "bbox coordinates out of range: {raw:?}"
        )));
    }
    let [x1, y1, x2, y2] = raw.map(|v| v as u32);
    BBox::new(x1, y1, x2, y2)
        .map_err(|e| DetectionError::Schema(e.to_string()))
}

/// Parse an annotation document into a validated [`DetectionSet`].
pub fn load_annotations_str(document: &str) -> Result<DetectionSet, DetectionError> {
    let raw: RawDocument = serde_json::from_str(document)
        .map_err(|e| DetectionError::Schema(e.to_string()))?;

    let with_ids = raw.controls.iter().filter(|c| c.id.is_some()).count();
    if with_ids != 0 && with_ids != raw.controls.len() {
        return Err(DetectionError::Schema(
            "either all controls or none may carry explicit ids".to_string(),
        ));
    }

    let mut controls = Vec::with_capacity(raw.controls.len());
    for (index, c) in raw.controls.into_iter().enumerate() {
        let category: ControlCategory = c
            .category
            .parse()
            .map_err(|_| DetectionError::Category(c.category.clone()))?;
        controls.push(Control {
            id: c.id.unwrap_or(index as u32),
            bbox: convert_bbox(c.bbox)?,
            category,
            text: c.text,
        });
    }

    DetectionSet::new(raw.image.width, raw.image.height, controls).map_err(|e| match e {
        ModelError::OutOfBounds { .. } => DetectionError::Bounds(e),
        other => DetectionError::Schema(other.to_string()),
    })
}

pub fn load_annotations_path(path: &Path) -> Result<DetectionSet, DetectionError> {
    let text = std::fs::read_to_string(path).map_err(|source| DetectionError::Io {
        path: path.to_path_buf(),
        source,
    })?;
    load_annotations_str(&text)
}

/// Serialize a detection set back to the annotation document format.
/// `load_annotations_str(&serialize_annotations(d))` reproduces `d` exactly.
pub fn serialize_annotations(dets: &DetectionSet) -> String {
    let controls: Vec<_> = dets
        .controls()
        .iter()
        .map(|c| {
            json!({
                "id": c.id,
                "bbox": [c.bbox.x1, c.bbox.y1, c.bbox.x2, c.bbox.y2],
                "category": c.category.as_str(),
                "text": c.text,
            })
        })
        .collect();
    let doc = json!({
        "image": { "width": dets.image_width(), "height": dets.image_height() },
        "controls": controls,
    });
    let mut out = serde_json::to_string_pretty(&doc).expect("annotation document serializes");
    out.push('\n');
    out
}

/// Where a detection set comes from: a sidecar annotation file on disk, or a
/// set already in memory (e.g. the stored ground truth of a generated pair).
#[derive(Debug, Clone)]
pub enum DetectorSource {
    AnnotationFile(PathBuf),
    GroundTruth(DetectionSet),
}

impl DetectorSource {
    pub fn resolve(&self) -> Result<DetectionSet, DetectionError> {
        match self {
            DetectorSource::AnnotationFile(path) => load_annotations_path(path),
            DetectorSource::GroundTruth(dets) => Ok(dets.clone()),
        }
    }
}

/// Simulate an imperfect detector: drop each control with probability
/// `drop_prob` and jitter each surviving bbox edge by up to `jitter_px`,
/// clamped so boxes stay valid and inside the image. Ids are preserved, so
/// the result is still a valid [`DetectionSet`]. Off by default everywhere;
/// exposed for robustness experiments only.
pub fn apply_detector_noise<R: Rng>(
    dets: &DetectionSet,
    drop_prob: f64,
    jitter_px: u32,
    rng: &mut R,
) -> DetectionSet {
    let (w, h) = (dets.image_width(), dets.image_height());
    let mut kept = Vec::with_capacity(dets.len());
    for c in dets.controls() {
        if drop_prob > 0.0 && rng.gen_bool(drop_prob.min(1.0)) {
            continue;
        }
        let mut c = c.clone();
        if jitter_px > 0 {
            let j = i64::from(jitter_px);
            let shift = |v: u32, lo: i64, hi: i64, rng: &mut R| -> u32 {
                (i64::from(v) + rng.gen_range(-j..=j)).clamp(lo, hi) as u32
            };
            let x1 = shift(c.bbox.x1, 0, i64::from(c.bbox.x2) - 1, rng);
            let y1 = shift(c.bbox.y1, 0, i64::from(c.bbox.y2) - 1, rng);
            let x2 = shift(c.bbox.x2, i64::from(x1) + 1, i64::from(w), rng);
            let y2 = shift(c.bbox.y2, i64::from(y1) + 1, i64::from(h), rng);
            c.bbox = BBox::new(x1, y1, x2, y2).expect("jitter keeps boxes valid");
        }
        kept.push(c);
    }
    DetectionSet::new(w, h, kept).expect("noise preserves id order and bounds")
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    const VALID: &str = r#"{
        "image": { "width": 200, "height": 100 },
        "controls": [
            { "id": 0, "bbox": [10, 10, 60, 30], "category": "BUTTON" },
            { "id": 3, "bbox": [70, 10, 190, 26], "category": "TEXT", "text": "hello" }
        ]
    }"#;

    #[test]
    fn parses_valid_document() {
        let d = load_annotations_str(VALID).unwrap();
        assert_eq!(d.image_width(), 200);
        assert_eq!(d.len(), 2);
        assert_eq!(d.controls()[1].id, 3);
        assert_eq!(d.controls()[1].text.as_deref(), Some("hello"));
        assert_eq!(d.controls()[0].category, ControlCategory::Button);
    }

    #[test]
    fn assigns_sequential_ids_when_absent() {
        let doc = r#"{
            "image": { "width": 100, "height": 100 },
            "controls": [
                { "bbox": [0, 0, 10, 10], "category": "ICON" },
                { "bbox": [20, 0, 30, 10], "category": "ICON" }
            ]
        }"#;
        let d = load_annotations_str(doc).unwrap();
        assert_eq!(d.controls()[0].id, 0);
        assert_eq!(d.controls()[1].id, 1);
    }

    #[test]
    fn rejects_unknown_category() {
        let doc = r#"{
            "image": { "width": 100, "height": 100 },
            "controls": [ { "bbox": [0, 0, 10, 10], "category": "WIDGET" } ]
        }"#;
        assert!(matches!(
            load_annotations_str(doc),
            Err(DetectionError::Category(label)) if label == "WIDGET"
        ));
    }

    #[test]
    fn rejects_out_of_bounds_bbox() {
        let doc = r#"{
            "image": { "width": 100, "height": 100 },
            "controls": [ { "bbox": [90, 0, 110, 10], "category": "ICON" } ]
        }"#;
        assert!(matches!(
            load_annotations_str(doc),
            Err(DetectionError::Bounds(_))
        ));
    }

    #[test]
    fn rejects_malformed_documents() {
        for doc in [
            "not json",
            r#"{ "controls": [] }"#,
            // negative coordinate
            r#"{ "image": {"width":100,"height":100},
                 "controls": [ { "bbox": [-1, 0, 10, 10], "category": "ICON" } ] }"#,
            // degenerate bbox
            r#"{ "image": {"width":100,"height":100},
                 "controls": [ { "bbox": [10, 0, 10, 10], "category": "ICON" } ] }"#,
            // mixed id presence
            r#"{ "image": {"width":100,"height":100},
                 "controls": [ { "id": 0, "bbox": [0,0,10,10], "category": "ICON" },
                               { "bbox": [20,0,30,10], "category": "ICON" } ] }"#,
            // non-increasing explicit ids
            r#"{ "image": {"width":100,"height":100},
                 "controls": [ { "id": 5, "bbox": [0,0,10,10], "category": "ICON" },
                               { "id": 5, "bbox": [20,0,30,10], "category": "ICON" } ] }"#,
        ] {
            assert!(
                matches!(load_annotations_str(doc), Err(DetectionError::Schema(_))),
                "expected schema rejection for {doc}"
            );
        }
    }

    #[test]
    fn noise_with_zero_parameters_is_identity() {
        let d = load_annotations_str(VALID).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        assert_eq!(apply_detector_noise(&d, 0.0, 0, &mut rng), d);
    }

    #[test]
    fn noise_output_stays_valid() {
        let d = load_annotations_str(VALID).unwrap();
        for seed in 0..50 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let noisy = apply_detector_noise(&d, 0.3, 4, &mut rng);
            // DetectionSet::new inside apply_detector_noise would have
            // panicked on invalid output; spot-check bounds anyway.
            for c in noisy.controls() {
                assert!(c.bbox.x2 <= d.image_width() && c.bbox.y2 <= d.image_height());
            }
        }
    }

    fn arb_detection_set() -> impl Strategy<Value = DetectionSet> {
        let control = (0u32..20, 0u32..180, 0u32..80, 1u32..40, 1u32..20, 0usize..24)
            .prop_map(|(_, x1, y1, w, h, cat)| {
                let category = ControlCategory::ALL[cat];
                Control {
                    id: 0,
                    bbox: BBox::new(x1, y1, (x1 + w).min(220), (y1 + h).min(100)).unwrap(),
                    category,
                    text: category
                        .is_text()
                        .then(|| "sample text".to_string()),
                }
            });
        proptest::collection::vec(control, 0..12).prop_map(|mut cs| {
            for (i, c) in cs.iter_mut().enumerate() {
                c.id = (i * 2) as u32; // strictly increasing, with gaps
            }
            DetectionSet::new(220, 100, cs).unwrap()
        })
    }

    proptest! {
        #[test]
        fn serialization_round_trips(d in arb_detection_set()) {
            let text = serialize_annotations(&d);
            let back = load_annotations_str(&text).unwrap();
            prop_assert_eq!(back, d);
        }
    }
}
