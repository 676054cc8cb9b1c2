//! Scoring harness: precision/recall/F at IOU 0.25/0.5/0.75, dataset-level
//! micro-averaged evaluation of the three detectors, and the one-at-a-time
//! hyperparameter sweep.
//!
//! Predicted regions are matched to ground-truth regions once, greedily by
//! descending IOU over all overlapping pairs; a matched pair counts as a
//! true positive at every threshold its IOU clears. Because all thresholds
//! filter the same matching, TP@0.25 >= TP@0.5 >= TP@0.75 by construction.

use crate::baselines::{BaselineOutcome, pixel_wise_detect, region_based_detect};
use crate::changes::{ChangesError, PipelineParams, detect_changes};
use crate::datagen::{DatagenError, GeneratedPair, TruthFile, load_image, load_manifest, load_truth};
use crate::detection::{DetectionError, load_annotations_path};
use crate::model::{BBox, DetectionSet, Raster, iou};
use rand::SeedableRng;
use rand::seq::SliceRandom;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use thiserror::Error;

pub const IOU_THRESHOLDS: [f64; 3] = [0.25, 0.5, 0.75];

#[derive(Debug, Error)]
pub enum EvalError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error(transparent)]
    Dataset(#[from] DatagenError),
    #[error(transparent)]
    Annotations(#[from] DetectionError),
    #[error(transparent)]
    Params(#[from] ChangesError),
    #[error("unknown method {0:?} (expected gvcd, pwc, or rcd)")]
    UnknownMethod(String),
    #[error("unknown sweep parameter {0:?} (expected k, h, ts, or ns)")]
    UnknownParam(String),
    #[error("bad sweep value {value} for {param}: {reason}")]
    BadSweepValue {
        param: &'static str,
        value: f64,
        reason: &'static str,
    },
}

/// Counts plus the derived metrics at one IOU threshold.
#[derive(Debug, Clone, Copy, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ScoreTriple {
    pub iou_threshold: f64,
    pub true_positives: u64,
    pub false_positives: u64,
    pub false_negatives: u64,
    pub precision: f64,
    pub recall: f64,
    pub fscore: f64,
}

impl ScoreTriple {
    /// Empty-case conventions: a zero denominator means the metric is
    /// vacuously perfect (no predictions to be wrong / no truth to miss);
    /// F is zero whenever P + R is.
    pub fn from_counts(iou_threshold: f64, tp: u64, fp: u64, fn_: u64) -> Self {
        let precision = if tp + fp == 0 {
            1.0
        } else {
            tp as f64 / (tp + fp) as f64
        };
        let recall = if tp + fn_ == 0 {
            1.0
        } else {
            tp as f64 / (tp + fn_) as f64
        };
        let fscore = if precision + recall == 0.0 {
            0.0
        } else {
            2.0 * precision * recall / (precision + recall)
        };
        ScoreTriple {
            iou_threshold,
            true_positives: tp,
            false_positives: fp,
            false_negatives: fn_,
            precision,
            recall,
            fscore,
        }
    }
}

/// Greedy one-to-one assignment of predictions to ground truth by
/// descending IOU over all overlapping pairs. Ties break by ascending
/// prediction index, then ascending gt index, so the result is stable.
/// Returns (prediction index, gt index, iou).
pub fn match_boxes(preds: &[BBox], gt: &[BBox]) -> Vec<(usize, usize, f64)> {
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for (i, p) in preds.iter().enumerate() {
        for (j, g) in gt.iter().enumerate() {
            let v = iou(p, g);
            if v > 0.0 {
                candidates.push((i, j, v));
            }
        }
    }
    candidates.sort_by(|a, b| {
        b.2.partial_cmp(&a.2)
            .expect("iou is finite")
            .then(a.0.cmp(&b.0))
            .then(a.1.cmp(&b.1))
    });
    let mut pred_used = vec![false; preds.len()];
    let mut gt_used = vec![false; gt.len()];
    let mut matched = Vec::new();
    for (i, j, v) in candidates {
        if !pred_used[i] && !gt_used[j] {
            pred_used[i] = true;
            gt_used[j] = true;
            matched.push((i, j, v));
        }
    }
    matched
}

/// (TP, FP, FN) for a fixed matching filtered at `threshold`.
fn counts_at(
    matches: &[(usize, usize, f64)],
    n_pred: usize,
    n_gt: usize,
    threshold: f64,
) -> (u64, u64, u64) {
    let tp = matches.iter().filter(|&&(_, _, v)| v >= threshold).count() as u64;
    (tp, n_pred as u64 - tp, n_gt as u64 - tp)
}

/// Score one image pair: match each side independently, pool the counts,
/// then derive P/R/F.
pub fn score_pair(
    pred_original: &[BBox],
    pred_changed: &[BBox],
    gt_original: &[BBox],
    gt_changed: &[BBox],
    iou_threshold: f64,
) -> ScoreTriple {
    let m_orig = match_boxes(pred_original, gt_original);
    let m_chg = match_boxes(pred_changed, gt_changed);
    let (tp_o, fp_o, fn_o) = counts_at(&m_orig, pred_original.len(), gt_original.len(), iou_threshold);
    let (tp_c, fp_c, fn_c) = counts_at(&m_chg, pred_changed.len(), gt_changed.len(), iou_threshold);
    ScoreTriple::from_counts(iou_threshold, tp_o + tp_c, fp_o + fp_c, fn_o + fn_c)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Gvcd,
    Pwc,
    Rcd,
}

impl Method {
    pub fn as_str(self) -> &'static str {
        match self {
            Method::Gvcd => "gvcd",
            Method::Pwc => "pwc",
            Method::Rcd => "rcd",
        }
    }

    pub fn parse(s: &str) -> Result<Self, EvalError> {
        match s {
            "gvcd" => Ok(Method::Gvcd),
            "pwc" => Ok(Method::Pwc),
            "rcd" => Ok(Method::Rcd),
            other => Err(EvalError::UnknownMethod(other.to_string())),
        }
    }
}

/// One evaluation-ready pair: both screenshots, annotations, ground truth.
#[derive(Debug, Clone)]
pub struct LoadedPair {
    pub id: String,
    pub original_img: Raster,
    pub original_dets: DetectionSet,
    pub changed_img: Raster,
    pub changed_dets: DetectionSet,
    pub truth: TruthFile,
}

/// Wrap in-memory generated pairs for evaluation.
pub fn pairs_from_generated(pairs: &[GeneratedPair]) -> Vec<LoadedPair> {
    pairs
        .iter()
        .enumerate()
        .map(|(i, p)| LoadedPair {
            id: format!("pair_{i:04}"),
            original_img: p.original_img.clone(),
            original_dets: p.original_dets.clone(),
            changed_img: p.changed_img.clone(),
            changed_dets: p.changed_dets.clone(),
            truth: TruthFile {
                original: p.gt_original.clone(),
                changed: p.gt_changed.clone(),
            },
        })
        .collect()
}

/// Load every pair referenced by a manifest; paths resolve relative to the
/// manifest file.
pub fn load_pairs(manifest_path: &Path) -> Result<Vec<LoadedPair>, EvalError> {
    let manifest = load_manifest(manifest_path)?;
    let root = manifest_path.parent().unwrap_or(Path::new("."));
    manifest
        .pairs
        .par_iter()
        .map(|entry| {
            Ok(LoadedPair {
                id: entry.id.clone(),
                original_img: load_image(&root.join(&entry.original_image))?,
                original_dets: load_annotations_path(&root.join(&entry.original_annotations))?,
                changed_img: load_image(&root.join(&entry.changed_image))?,
                changed_dets: load_annotations_path(&root.join(&entry.changed_annotations))?,
                truth: load_truth(&root.join(&entry.ground_truth))?,
            })
        })
        .collect()
}

/// Predictions for one pair, already arranged for scoring. Pixel-wise
/// comparison cannot attribute a change to a side (it reports the same
/// regions for both images), so its predictions are scored once against the
/// deduplicated union of both sides' ground truth instead of per side.
enum Predictions {
    PerSide {
        original: Vec<BBox>,
        changed: Vec<BBox>,
    },
    Pooled {
        regions: Vec<BBox>,
        dimension_mismatch: bool,
    },
}

fn predict(pair: &LoadedPair, method: Method, params: &PipelineParams) -> Predictions {
    match method {
        Method::Gvcd => {
            let report = detect_changes(
                &pair.original_img,
                &pair.original_dets,
                &pair.changed_img,
                &pair.changed_dets,
                params,
            );
            Predictions::PerSide {
                original: report.changes_in_original.iter().map(|r| r.bbox).collect(),
                changed: report.changes_in_changed.iter().map(|r| r.bbox).collect(),
            }
        }
        Method::Rcd => {
            let report = region_based_detect(
                &pair.original_img,
                &pair.original_dets,
                &pair.changed_img,
                &pair.changed_dets,
            );
            Predictions::PerSide {
                original: report.changes_in_original.iter().map(|r| r.bbox).collect(),
                changed: report.changes_in_changed.iter().map(|r| r.bbox).collect(),
            }
        }
        Method::Pwc => match pixel_wise_detect(&pair.original_img, &pair.changed_img) {
            BaselineOutcome::Compared(report) => Predictions::Pooled {
                regions: report.changes_in_original.iter().map(|r| r.bbox).collect(),
                dimension_mismatch: false,
            },
            BaselineOutcome::DimensionMismatch { .. } => Predictions::Pooled {
                regions: Vec::new(),
                dimension_mismatch: true,
            },
        },
    }
}

/// Union of both sides' truth with exact duplicates removed (regions that
/// appear identically on both sides, e.g. an in-place recolor).
fn pooled_truth(truth: &TruthFile) -> Vec<BBox> {
    let mut pool = truth.original.clone();
    for b in &truth.changed {
        if !pool.contains(b) {
            pool.push(*b);
        }
    }
    pool
}

/// Per-pair counts at every threshold, for the CSV breakdown.
#[derive(Debug, Clone, serde::Serialize)]
pub struct PairBreakdown {
    pub id: String,
    pub dimension_mismatch: bool,
    /// (TP, FP, FN) per entry of [`IOU_THRESHOLDS`].
    pub counts: [(u64, u64, u64); 3],
}

#[derive(Debug, Clone, serde::Serialize)]
pub struct EvalReport {
    pub method: Method,
    pub pair_count: usize,
    pub scores: [ScoreTriple; 3],
    pub per_pair: Vec<PairBreakdown>,
}

impl EvalReport {
    pub fn score_at(&self, threshold: f64) -> &ScoreTriple {
        self.scores
            .iter()
            .find(|s| s.iou_threshold == threshold)
            .expect("threshold is one of the standard three")
    }
}

fn breakdown(pair: &LoadedPair, method: Method, params: &PipelineParams) -> PairBreakdown {
    let (counts, mismatch) = match predict(pair, method, params) {
        Predictions::PerSide { original, changed } => {
            let m_orig = match_boxes(&original, &pair.truth.original);
            let m_chg = match_boxes(&changed, &pair.truth.changed);
            let counts = IOU_THRESHOLDS.map(|t| {
                let (tp_o, fp_o, fn_o) =
                    counts_at(&m_orig, original.len(), pair.truth.original.len(), t);
                let (tp_c, fp_c, fn_c) =
                    counts_at(&m_chg, changed.len(), pair.truth.changed.len(), t);
                (tp_o + tp_c, fp_o + fp_c, fn_o + fn_c)
            });
            (counts, false)
        }
        Predictions::Pooled {
            regions,
            dimension_mismatch,
        } => {
            let pool = pooled_truth(&pair.truth);
            let matches = match_boxes(&regions, &pool);
            let counts =
                IOU_THRESHOLDS.map(|t| counts_at(&matches, regions.len(), pool.len(), t));
            (counts, dimension_mismatch)
        }
    };
    PairBreakdown {
        id: pair.id.clone(),
        dimension_mismatch: mismatch,
        counts,
    }
}

/// Run `method` on every pair and micro-average the counts.
pub fn evaluate_pairs(
    pairs: &[LoadedPair],
    method: Method,
    params: &PipelineParams,
) -> Result<EvalReport, EvalError> {
    params.validate()?;
    let per_pair: Vec<PairBreakdown> = pairs
        .par_iter()
        .map(|p| breakdown(p, method, params))
        .collect();
    let scores = std::array::from_fn(|i| {
        let (mut tp, mut fp, mut fn_) = (0, 0, 0);
        for b in &per_pair {
            tp += b.counts[i].0;
            fp += b.counts[i].1;
            fn_ += b.counts[i].2;
        }
        ScoreTriple::from_counts(IOU_THRESHOLDS[i], tp, fp, fn_)
    });
    Ok(EvalReport {
        method,
        pair_count: pairs.len(),
        scores,
        per_pair,
    })
}

/// Stable JSON for the dataset-level scores (no per-pair rows; those go to
/// the CSV).
pub fn scores_json(report: &EvalReport, params: &PipelineParams) -> String {
    #[derive(serde::Serialize)]
    struct Doc<'a> {
        method: &'a str,
        params: ParamsEcho,
        pair_count: usize,
        scores: &'a [ScoreTriple; 3],
    }
    #[derive(serde::Serialize)]
    struct ParamsEcho {
        k: usize,
        h: u32,
        ts: f64,
        ns: f64,
    }
    let doc = Doc {
        method: report.method.as_str(),
        params: ParamsEcho {
            k: params.graph.k,
            h: params.similarity.max_hash_diff,
            ts: params.similarity.min_text_sim,
            ns: params.similarity.min_neighbor_sim,
        },
        pair_count: report.pair_count,
        scores: &report.scores,
    };
    let mut out = serde_json::to_string_pretty(&doc).expect("score serialization is infallible");
    out.push('\n');
    out
}

/// Per-pair CSV: one row per pair and threshold.
pub fn breakdown_csv(report: &EvalReport) -> String {
    let mut out = String::from("pair_id,iou_threshold,tp,fp,fn,precision,recall,fscore\n");
    for pair in &report.per_pair {
        for (i, t) in IOU_THRESHOLDS.iter().enumerate() {
            let (tp, fp, fn_) = pair.counts[i];
            let s = ScoreTriple::from_counts(*t, tp, fp, fn_);
            writeln!(
                out,
                "{},{t},{tp},{fp},{fn_},{:.4},{:.4},{:.4}",
                pair.id, s.precision, s.recall, s.fscore
            )
            .expect("writing to a String cannot fail");
        }
    }
    out
}

/// Deterministic 70/30 split: shuffle pair indices with the given seed and
/// keep the first 70% (floor) as the tuning set, returned sorted.
pub fn tuning_split(n: usize, seed: u64) -> Vec<usize> {
    let mut indices: Vec<usize> = (0..n).collect();
    indices.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let take = n * 7 / 10;
    let mut tuning = indices[..take].to_vec();
    tuning.sort_unstable();
    tuning
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SweepParam {
    K,
    H,
    Ts,
    Ns,
}

impl SweepParam {
    pub fn as_str(self) -> &'static str {
        match self {
            SweepParam::K => "k",
            SweepParam::H => "h",
            SweepParam::Ts => "ts",
            SweepParam::Ns => "ns",
        }
    }

    pub fn parse(s: &str) -> Result<Self, EvalError> {
        match s {
            "k" => Ok(SweepParam::K),
            "h" => Ok(SweepParam::H),
            "ts" => Ok(SweepParam::Ts),
            "ns" => Ok(SweepParam::Ns),
            other => Err(EvalError::UnknownParam(other.to_string())),
        }
    }

    /// Produce the parameter set with this knob set to `value`, all others
    /// taken from `base`. Integer knobs reject fractional values.
    pub fn apply(self, value: f64, base: &PipelineParams) -> Result<PipelineParams, EvalError> {
        let mut params = *base;
        let integral = value.fract() == 0.0 && value >= 0.0;
        match self {
            SweepParam::K => {
                if !integral || value < 1.0 {
                    return Err(EvalError::BadSweepValue {
                        param: "k",
                        value,
                        reason: "must be a positive integer",
                    });
                }
                params.graph.k = value as usize;
            }
            SweepParam::H => {
                if !integral || value > 64.0 {
                    return Err(EvalError::BadSweepValue {
                        param: "h",
                        value,
                        reason: "must be an integer in 0..=64",
                    });
                }
                params.similarity.max_hash_diff = value as u32;
            }
            SweepParam::Ts => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(EvalError::BadSweepValue {
                        param: "ts",
                        value,
                        reason: "must fall in [0, 1]",
                    });
                }
                params.similarity.min_text_sim = value;
            }
            SweepParam::Ns => {
                if !(0.0..=1.0).contains(&value) {
                    return Err(EvalError::BadSweepValue {
                        param: "ns",
                        value,
                        reason: "must fall in [0, 1]",
                    });
                }
                params.similarity.min_neighbor_sim = value;
            }
        }
        params.validate()?;
        Ok(params)
    }
}

#[derive(Debug, Clone)]
pub struct SweepRow {
    pub value: f64,
    pub scores: [ScoreTriple; 3],
}

#[derive(Debug, Clone)]
pub struct SweepTable {
    pub param: SweepParam,
    pub rows: Vec<SweepRow>,
    /// Index of the row with the highest F@0.5 (earliest wins ties).
    pub best_index: usize,
}

impl SweepTable {
    pub fn best(&self) -> &SweepRow {
        &self.rows[self.best_index]
    }
}

/// Evaluate the graph engine on the tuning split of `pairs` for each value
/// of one parameter, holding the others at `base`.
pub fn sweep(
    pairs: &[LoadedPair],
    split_seed: u64,
    param: SweepParam,
    values: &[f64],
    base: &PipelineParams,
) -> Result<SweepTable, EvalError> {
    assert!(!values.is_empty(), "sweep needs at least one value");
    let tuning: Vec<LoadedPair> = tuning_split(pairs.len(), split_seed)
        .into_iter()
        .map(|i| pairs[i].clone())
        .collect();
    let mut rows = Vec::with_capacity(values.len());
    for &value in values {
        let params = param.apply(value, base)?;
        let report = evaluate_pairs(&tuning, Method::Gvcd, &params)?;
        rows.push(SweepRow {
            value,
            scores: report.scores,
        });
    }
    let best_index = rows
        .iter()
        .enumerate()
        .max_by(|(ia, a), (ib, b)| {
            a.scores[1]
                .fscore
                .partial_cmp(&b.scores[1].fscore)
                .expect("fscore is finite")
                .then(ib.cmp(ia))
        })
        .map(|(i, _)| i)
        .expect("values is non-empty");
    Ok(SweepTable {
        param,
        rows,
        best_index,
    })
}

/// Sweep table CSV: rows = parameter values, columns = P/R/F per threshold.
pub fn sweep_csv(table: &SweepTable) -> String {
    let mut out = format!(
        "{},p_at_025,r_at_025,f_at_025,p_at_050,r_at_050,f_at_050,p_at_075,r_at_075,f_at_075,best\n",
        table.param.as_str()
    );
    for (i, row) in table.rows.iter().enumerate() {
        let mut line = format_value(table.param, row.value);
        for s in &row.scores {
            write!(line, ",{:.4},{:.4},{:.4}", s.precision, s.recall, s.fscore)
                .expect("writing to a String cannot fail");
        }
        writeln!(out, "{line},{}", if i == table.best_index { 1 } else { 0 })
            .expect("writing to a String cannot fail");
    }
    out
}

fn format_value(param: SweepParam, value: f64) -> String {
    match param {
        SweepParam::K | SweepParam::H => format!("{}", value as u64),
        SweepParam::Ts | SweepParam::Ns => format!("{value}"),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x1: u32, y1: u32, x2: u32, y2: u32) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn three_true_one_false_positive_one_miss_gives_three_quarters() {
        let s = ScoreTriple::from_counts(0.5, 3, 1, 1);
        assert_eq!(s.precision, 0.75);
        assert_eq!(s.recall, 0.75);
        assert_eq!(s.fscore, 0.75);
    }

    #[test]
    fn perfect_prediction_scores_one() {
        let gt = vec![bb(0, 0, 10, 10), bb(20, 20, 40, 40)];
        for &t in &IOU_THRESHOLDS {
            let s = score_pair(&gt, &[], &gt, &[], t);
            assert_eq!((s.precision, s.recall, s.fscore), (1.0, 1.0, 1.0));
        }
    }

    #[test]
    fn empty_everything_is_vacuously_perfect() {
        let s = score_pair(&[], &[], &[], &[], 0.5);
        assert_eq!((s.precision, s.recall, s.fscore), (1.0, 1.0, 1.0));
    }

    #[test]
    fn no_predictions_with_truth_is_vacuous_precision_zero_recall() {
        let s = score_pair(&[], &[], &[bb(0, 0, 10, 10)], &[], 0.5);
        assert_eq!(s.precision, 1.0);
        assert_eq!(s.recall, 0.0);
        assert_eq!(s.fscore, 0.0);
    }

    #[test]
    fn half_overlap_counts_only_at_low_threshold() {
        // Identical 10x10 boxes shifted by 5: IOU = 50/150 = 1/3.
        let pred = vec![bb(0, 0, 10, 10)];
        let gt = vec![bb(5, 0, 15, 10)];
        let lo = score_pair(&pred, &[], &gt, &[], 0.25);
        assert_eq!(lo.true_positives, 1);
        let hi = score_pair(&pred, &[], &gt, &[], 0.5);
        assert_eq!(hi.true_positives, 0);
        assert_eq!(hi.false_positives, 1);
        assert_eq!(hi.false_negatives, 1);
    }

    #[test]
    fn matching_prefers_higher_iou_and_stays_one_to_one() {
        // One gt, two predictions: the tighter one wins, the loose one is FP.
        let gt = vec![bb(0, 0, 10, 10)];
        let preds = vec![bb(0, 0, 12, 10), bb(0, 0, 10, 10)];
        let m = match_boxes(&preds, &gt);
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].0, m[0].1), (1, 0));
    }

    #[test]
    fn equal_iou_ties_go_to_the_lower_prediction_index() {
        let gt = vec![bb(0, 0, 10, 10), bb(100, 0, 110, 10)];
        // Both predictions overlap gt0 identically; pred0 must take it.
        let preds = vec![bb(0, 0, 10, 5), bb(0, 5, 10, 10)];
        let m = match_boxes(&preds, &gt);
        assert_eq!(m.len(), 1);
        assert_eq!((m[0].0, m[0].1), (0, 0));
    }

    #[test]
    fn iou_hand_cases() {
        assert!((iou(&bb(0, 0, 10, 10), &bb(0, 0, 10, 10)) - 1.0).abs() < 1e-12);
        assert_eq!(iou(&bb(0, 0, 10, 10), &bb(20, 20, 30, 30)), 0.0);
        assert!((iou(&bb(0, 0, 10, 10), &bb(5, 0, 15, 10)) - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn tuning_split_is_deterministic_and_seventy_percent() {
        let a = tuning_split(20, 7);
        let b = tuning_split(20, 7);
        assert_eq!(a, b);
        assert_eq!(a.len(), 14);
        assert!(a.windows(2).all(|w| w[0] < w[1]));
        let c = tuning_split(20, 8);
        assert_ne!(a, c, "different seeds should split differently");
    }

    #[test]
    fn sweep_param_validation() {
        let base = PipelineParams::default();
        assert!(SweepParam::K.apply(0.0, &base).is_err());
        assert!(SweepParam::K.apply(2.5, &base).is_err());
        assert_eq!(SweepParam::K.apply(3.0, &base).unwrap().graph.k, 3);
        assert!(SweepParam::H.apply(65.0, &base).is_err());
        assert!(SweepParam::Ns.apply(1.5, &base).is_err());
        assert_eq!(
            SweepParam::Ns.apply(0.25, &base).unwrap().similarity.min_neighbor_sim,
            0.25
        );
    }

    proptest! {
        #[test]
        fn counts_always_partition_predictions_and_truth(
            preds in proptest::collection::vec((0u32..80, 0u32..80, 1u32..20, 1u32..20), 0..8),
            gt in proptest::collection::vec((0u32..80, 0u32..80, 1u32..20, 1u32..20), 0..8),
        ) {
            let preds: Vec<BBox> =
                preds.into_iter().map(|(x, y, w, h)| bb(x, y, x + w, y + h)).collect();
            let gt: Vec<BBox> =
                gt.into_iter().map(|(x, y, w, h)| bb(x, y, x + w, y + h)).collect();
            for &t in &IOU_THRESHOLDS {
                let s = score_pair(&preds, &[], &gt, &[], t);
                prop_assert_eq!(s.true_positives + s.false_positives, preds.len() as u64);
                prop_assert_eq!(s.true_positives + s.false_negatives, gt.len() as u64);
            }
        }

        #[test]
        fn true_positives_never_increase_with_the_threshold(
            preds in proptest::collection::vec((0u32..80, 0u32..80, 1u32..20, 1u32..20), 0..8),
            gt in proptest::collection::vec((0u32..80, 0u32..80, 1u32..20, 1u32..20), 0..8),
        ) {
            let preds: Vec<BBox> =
                preds.into_iter().map(|(x, y, w, h)| bb(x, y, x + w, y + h)).collect();
            let gt: Vec<BBox> =
                gt.into_iter().map(|(x, y, w, h)| bb(x, y, x + w, y + h)).collect();
            let tps: Vec<u64> = IOU_THRESHOLDS
                .iter()
                .map(|&t| score_pair(&preds, &[], &gt, &[], t).true_positives)
                .collect();
            prop_assert!(tps[0] >= tps[1] && tps[1] >= tps[2]);
        }

        #[test]
        fn fscore_lies_between_precision_and_recall(
            tp in 0u64..20, fp in 0u64..20, fn_ in 0u64..20,
        ) {
            let s = ScoreTriple::from_counts(0.5, tp, fp, fn_);
            let lo = s.precision.min(s.recall);
            let hi = s.precision.max(s.recall);
            if s.precision == 0.0 || s.recall == 0.0 {
                prop_assert_eq!(s.fscore, 0.0);
            } else {
                prop_assert!(s.fscore >= lo - 1e-12 && s.fscore <= hi + 1e-12);
            }
        }
    }

    // Dataset-level behaviors need generated pairs; keep them small.
    mod datasets {
        use super::*;
        use crate::datagen::{generate_dataset, synthesize_bases};

        fn loaded(seed: u64, cut: bool) -> Vec<LoadedPair> {
            let bases = synthesize_bases(2, (640, 480), seed);
            let pairs = generate_dataset(&bases, 2, cut, seed + 1);
            pairs_from_generated(&pairs)
        }

        #[test]
        fn self_pairs_score_perfect_under_gvcd() {
            let mut pairs = loaded(20, false);
            for p in &mut pairs {
                p.changed_img = p.original_img.clone();
                p.changed_dets = p.original_dets.clone();
                p.truth = TruthFile {
                    original: vec![],
                    changed: vec![],
                };
            }
            let report =
                evaluate_pairs(&pairs, Method::Gvcd, &PipelineParams::default()).unwrap();
            for s in &report.scores {
                assert_eq!((s.precision, s.recall, s.fscore), (1.0, 1.0, 1.0));
            }
        }

        #[test]
        fn pixel_baseline_is_perfectly_precise_on_clean_pairs() {
            let report = evaluate_pairs(
                &loaded(21, false),
                Method::Pwc,
                &PipelineParams::default(),
            )
            .unwrap();
            for s in &report.scores {
                assert_eq!(s.false_positives, 0, "stray component at {}", s.iou_threshold);
                assert_eq!(s.precision, 1.0);
            }
        }

        #[test]
        fn breakdown_csv_has_one_row_per_pair_and_threshold() {
            let pairs = loaded(22, false);
            let report =
                evaluate_pairs(&pairs, Method::Rcd, &PipelineParams::default()).unwrap();
            let csv = breakdown_csv(&report);
            assert_eq!(csv.lines().count(), 1 + pairs.len() * 3);
            assert!(csv.starts_with("pair_id,iou_threshold,"));
        }

        #[test]
        fn single_point_sweep_equals_direct_evaluation_on_the_split() {
            let pairs = loaded(23, false);
            let base = PipelineParams::default();
            let table = sweep(&pairs, 9, SweepParam::K, &[8.0], &base).unwrap();
            assert_eq!(table.rows.len(), 1);
            assert_eq!(table.best_index, 0);

            let tuning: Vec<LoadedPair> = tuning_split(pairs.len(), 9)
                .into_iter()
                .map(|i| pairs[i].clone())
                .collect();
            let direct = evaluate_pairs(&tuning, Method::Gvcd, &base).unwrap();
            for (a, b) in table.rows[0].scores.iter().zip(&direct.scores) {
                assert_eq!(a.true_positives, b.true_positives);
                assert_eq!(a.false_positives, b.false_positives);
                assert_eq!(a.false_negatives, b.false_negatives);
            }
        }

        #[test]
        fn scores_json_is_stable() {
            let pairs = loaded(24, false);
            let params = PipelineParams::default();
            let r1 = evaluate_pairs(&pairs, Method::Gvcd, &params).unwrap();
            let r2 = evaluate_pairs(&pairs, Method::Gvcd, &params).unwrap();
            assert_eq!(scores_json(&r1, &params), scores_json(&r2, &params));
            assert!(scores_json(&r1, &params).contains("\"method\": \"gvcd\""));
        }
    }
}
