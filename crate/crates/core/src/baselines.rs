//! Reference change detectors the graph engine is compared against:
//!
//! * **Pixel-wise comparison** (`pwc`): exact per-pixel inequality mask,
//!   4-connected components, small components dropped. Requires both images
//!   to share a canvas; mismatched canvases are a reported outcome.
//! * **Region-based detection** (`rcd`): controls paired across images purely
//!   by bbox location (IOU), paired controls compared by perceptual hash,
//!   unpaired controls reported as changes. Categories are ignored.

use crate::changes::{ChangeRegion, ChangesError, Heatmap, RenderedOutputs, render_outputs};
use crate::model::{BBox, DetectionSet, Raster, iou};
use crate::similarity::{average_hash, hash_difference};
use serde::{Deserialize, Serialize};
use std::collections::VecDeque;
use std::path::Path;

/// Diff-mask components smaller than this many pixels are treated as noise.
pub const PWC_MIN_COMPONENT_AREA: usize = 16;
/// Controls are "in the same location" when their bboxes overlap this much.
pub const RCD_MIN_IOU: f64 = 0.5;
/// Paired controls whose hash difference exceeds this are flagged as changed.
pub const RCD_HASH_THRESHOLD: u32 = 10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BaselineMethod {
    Pwc,
    Rcd,
}

impl BaselineMethod {
    pub fn as_str(self) -> &'static str {
        match self {
            BaselineMethod::Pwc => "pwc",
            BaselineMethod::Rcd => "rcd",
        }
    }
}

/// Same shape as a graph-engine report, minus matching internals.
#[derive(Debug, Clone, PartialEq)]
pub struct BaselineReport {
    pub method: BaselineMethod,
    pub changes_in_original: Vec<ChangeRegion>,
    pub changes_in_changed: Vec<ChangeRegion>,
    pub heatmap_original: Heatmap,
    pub heatmap_changed: Heatmap,
}

/// Pixel-wise comparison is undefined across canvases of different sizes;
/// that case is an outcome to report, not a crash.
#[derive(Debug, Clone, PartialEq)]
pub enum BaselineOutcome {
    Compared(BaselineReport),
    DimensionMismatch {
        original: (u32, u32),
        changed: (u32, u32),
    },
}

impl BaselineOutcome {
    pub fn report(&self) -> Option<&BaselineReport> {
        match self {
            BaselineOutcome::Compared(r) => Some(r),
            BaselineOutcome::DimensionMismatch { .. } => None,
        }
    }
}

fn region(bbox: BBox) -> ChangeRegion {
    ChangeRegion {
        bbox,
        control_id: None,
        category: None,
    }
}

fn report_from_regions(
    method: BaselineMethod,
    dims_a: (u32, u32),
    dims_b: (u32, u32),
    changes_in_original: Vec<ChangeRegion>,
    changes_in_changed: Vec<ChangeRegion>,
) -> BaselineReport {
    let heatmap_original = Heatmap::from_regions(
        dims_a.0,
        dims_a.1,
        changes_in_original.iter().map(|r| &r.bbox),
    );
    let heatmap_changed = Heatmap::from_regions(
        dims_b.0,
        dims_b.1,
        changes_in_changed.iter().map(|r| &r.bbox),
    );
    BaselineReport {
        method,
        changes_in_original,
        changes_in_changed,
        heatmap_original,
        heatmap_changed,
    }
}

/// Boxes of all 4-connected components of the exact-inequality mask, with
/// components under `PWC_MIN_COMPONENT_AREA` pixels discarded. Since the mask
/// is side-symmetric, the same regions are reported for both images.
pub fn pixel_wise_detect(img_a: &Raster, img_b: &Raster) -> BaselineOutcome {
    if img_a.dimensions() != img_b.dimensions() {
        return BaselineOutcome::DimensionMismatch {
            original: img_a.dimensions(),
            changed: img_b.dimensions(),
        };
    }
    let (w, h) = img_a.dimensions();
    let mask: Vec<bool> = img_a
        .pixels()
        .zip(img_b.pixels())
        .map(|(a, b)| a != b)
        .collect();
    let boxes = component_boxes(&mask, w, h);
    let regions: Vec<ChangeRegion> = boxes.into_iter().map(region).collect();
    BaselineOutcome::Compared(report_from_regions(
        BaselineMethod::Pwc,
        (w, h),
        (w, h),
        regions.clone(),
        regions,
    ))
}

/// BFS component labeling; returns each surviving component's bounding box
/// in row-major discovery order.
fn component_boxes(mask: &[bool], w: u32, h: u32) -> Vec<BBox> {
    let (wu, hu) = (w as usize, h as usize);
    let mut seen = vec![false; mask.len()];
    let mut queue = VecDeque::new();
    let mut boxes = Vec::new();
    for start in 0..mask.len() {
        if !mask[start] || seen[start] {
            continue;
        }
        seen[start] = true;
        queue.push_back(start);
        let (mut min_x, mut min_y) = (wu, hu);
        let (mut max_x, mut max_y) = (0usize, 0usize);
        let mut area = 0usize;
        while let Some(idx) = queue.pop_front() {
            let (x, y) = (idx % wu, idx / wu);
            min_x = min_x.min(x);
            min_y = min_y.min(y);
            max_x = max_x.max(x);
            max_y = max_y.max(y);
            area += 1;
            let mut push = |n: usize| {
                if mask[n] && !seen[n] {
                    seen[n] = true;
                    queue.push_back(n);
                }
            };
            if x > 0 {
                push(idx - 1);
            }
            if x + 1 < wu {
                push(idx + 1);
            }
            if y > 0 {
                push(idx - wu);
            }
            if y + 1 < hu {
                push(idx + wu);
            }
        }
        if area >= PWC_MIN_COMPONENT_AREA {
            boxes.push(
                BBox::new(
                    min_x as u32,
                    min_y as u32,
                    max_x as u32 + 1,
                    max_y as u32 + 1,
                )
                .expect("component extent is non-degenerate"),
            );
        }
    }
    boxes
}

/// Pair controls by location (greedy descending IOU, `RCD_MIN_IOU` floor,
/// one-to-one), flag paired controls whose patches hash too far apart, and
/// report every unpaired control as a change in its own image.
pub fn region_based_detect(
    img_a: &Raster,
    dets_a: &DetectionSet,
    img_b: &Raster,
    dets_b: &DetectionSet,
) -> BaselineReport {
    let a = dets_a.controls();
    let b = dets_b.controls();
    let mut candidates: Vec<(usize, usize, f64)> = Vec::new();
    for (i, ca) in a.iter().enumerate() {
        for (j, cb) in b.iter().enumerate() {
            let overlap = iou(&ca.bbox, &cb.bbox);
            if overlap >= RCD_MIN_IOU {
                candidates.push((i, j, overlap));
            }
        }
    }
    candidates.sort_by(|x, y| {
        y.2.total_cmp(&x.2)
            .then_with(|| a[x.0].id.cmp(&a[y.0].id))
            .then_with(|| b[x.1].id.cmp(&b[y.1].id))
    });
    let mut used_a = vec![false; a.len()];
    let mut used_b = vec![false; b.len()];
    let mut changes_in_original = Vec::new();
    let mut changes_in_changed = Vec::new();
    for (i, j, _) in candidates {
        if used_a[i] || used_b[j] {
            continue;
        }
        used_a[i] = true;
        used_b[j] = true;
        let ha = average_hash(img_a, a[i].bbox);
        let hb = average_hash(img_b, b[j].bbox);
        if hash_difference(ha, hb) > RCD_HASH_THRESHOLD {
            changes_in_original.push(ChangeRegion {
                bbox: a[i].bbox,
                control_id: Some(a[i].id),
                category: Some(a[i].category),
            });
            changes_in_changed.push(ChangeRegion {
                bbox: b[j].bbox,
                control_id: Some(b[j].id),
                category: Some(b[j].category),
            });
        }
    }
    for (i, c) in a.iter().enumerate() {
        if !used_a[i] {
            changes_in_original.push(ChangeRegion {
                bbox: c.bbox,
                control_id: Some(c.id),
                category: Some(c.category),
            });
        }
    }
    for (j, c) in b.iter().enumerate() {
        if !used_b[j] {
            changes_in_changed.push(ChangeRegion {
                bbox: c.bbox,
                control_id: Some(c.id),
                category: Some(c.category),
            });
        }
    }
    changes_in_original.sort_by_key(|r| r.control_id);
    changes_in_changed.sort_by_key(|r| r.control_id);
    report_from_regions(
        BaselineMethod::Rcd,
        img_a.dimensions(),
        img_b.dimensions(),
        changes_in_original,
        changes_in_changed,
    )
}

#[derive(Serialize, Deserialize)]
struct BaselineDoc {
    method: BaselineMethod,
    outcome: String,
    original_size: [u32; 2],
    changed_size: [u32; 2],
    changes_in_original: Vec<ChangeRegion>,
    changes_in_changed: Vec<ChangeRegion>,
}

impl BaselineReport {
    pub fn to_json(&self) -> String {
        let doc = BaselineDoc {
            method: self.method,
            outcome: "compared".to_string(),
            original_size: [self.heatmap_original.width(), self.heatmap_original.height()],
            changed_size: [self.heatmap_changed.width(), self.heatmap_changed.height()],
            changes_in_original: self.changes_in_original.clone(),
            changes_in_changed: self.changes_in_changed.clone(),
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn render_outputs(
        &self,
        img_a: &Raster,
        img_b: &Raster,
        out_dir: &Path,
    ) -> Result<RenderedOutputs, ChangesError> {
        render_outputs(
            img_a,
            img_b,
            &self.changes_in_original,
            &self.changes_in_changed,
            &self.heatmap_original,
            &self.heatmap_changed,
            &self.to_json(),
            out_dir,
        )
    }
}

impl BaselineOutcome {
    pub fn to_json(&self) -> String {
        match self {
            BaselineOutcome::Compared(report) => report.to_json(),
            BaselineOutcome::DimensionMismatch { original, changed } => {
                let doc = BaselineDoc {
                    method: BaselineMethod::Pwc,
                    outcome: "dimension_mismatch".to_string(),
                    original_size: [original.0, original.1],
                    changed_size: [changed.0, changed.1],
                    changes_in_original: Vec::new(),
                    changes_in_changed: Vec::new(),
                };
                let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
                out.push('\n');
                out
            }
        }
    }

    /// Write the standard output set. A dimension mismatch still produces
    /// the full file layout: all-black heatmaps, untouched overlays, and a
    /// report tagged `dimension_mismatch`.
    pub fn render_outputs(
        &self,
        img_a: &Raster,
        img_b: &Raster,
        out_dir: &Path,
    ) -> Result<RenderedOutputs, ChangesError> {
        match self {
            BaselineOutcome::Compared(report) => report.render_outputs(img_a, img_b, out_dir),
            BaselineOutcome::DimensionMismatch { .. } => render_outputs(
                img_a,
                img_b,
                &[],
                &[],
                &Heatmap::zeros(img_a.width(), img_a.height()),
                &Heatmap::zeros(img_b.width(), img_b.height()),
                &self.to_json(),
                out_dir,
            ),
        }
    }
}
