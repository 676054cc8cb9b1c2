//! End-to-end change detection on an image pair, plus rendering of heatmaps,
//! overlays, and the JSON change report.
//!
//! Changes are reported at control granularity: every node that stays
//! unmatched after graph matching becomes a change region in its own image.
//! The binary heatmap of each image starts at zero and sets exactly the cells
//! covered by that image's change regions.

use crate::graph::{GraphError, GraphParams, build_graph};
use crate::matching::{MatchResult, assign_matches};
use crate::model::{BBox, ControlCategory, DetectionSet, Raster};
use crate::similarity::{SimilarityError, SimilarityParams};
use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};
use thiserror::Error;

#[derive(Debug, Error)]
pub enum ChangesError {
    #[error(transparent)]
    Graph(#[from] GraphError),
    #[error(transparent)]
    Similarity(#[from] SimilarityError),
    #[error("malformed change report: {0}")]
    Report(String),
    #[error("cannot write {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("cannot encode {path}: {source}")]
    Encode {
        path: PathBuf,
        source: image::ImageError,
    },
}

/// Full parameter set of the graph pipeline.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct PipelineParams {
    pub graph: GraphParams,
    pub similarity: SimilarityParams,
}

impl PipelineParams {
    pub fn validate(&self) -> Result<(), ChangesError> {
        GraphParams::new(self.graph.k)?;
        self.similarity.validate()?;
        Ok(())
    }
}

/// Screen-modality presets; they differ only in neighbor count.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Profile {
    Desktop,
    Cut,
    Mobile,
}

impl Profile {
    pub fn default_k(self) -> usize {
        match self {
            Profile::Desktop => 8,
            Profile::Cut => 6,
            Profile::Mobile => 5,
        }
    }

    pub fn params(self) -> PipelineParams {
        PipelineParams {
            graph: GraphParams { k: self.default_k() },
            similarity: SimilarityParams::default(),
        }
    }
}

/// One reported change. Regions produced by the graph engine carry the
/// control's identity; pixel-level baselines leave it empty.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ChangeRegion {
    pub bbox: BBox,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub control_id: Option<u32>,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub category: Option<ControlCategory>,
}

/// Binary change mask with the dimensions of its source image.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Heatmap {
    width: u32,
    height: u32,
    cells: Vec<u8>,
}

impl Heatmap {
    pub fn zeros(width: u32, height: u32) -> Self {
        Heatmap {
            width,
            height,
            cells: vec![0; width as usize * height as usize],
        }
    }

    /// All-zero map with the given regions' cells set to one.
    pub fn from_regions<'a>(
        width: u32,
        height: u32,
        regions: impl IntoIterator<Item = &'a BBox>,
    ) -> Self {
        let mut map = Heatmap::zeros(width, height);
        for bbox in regions {
            for y in bbox.y1..bbox.y2.min(height) {
                let row = y as usize * width as usize;
                for x in bbox.x1..bbox.x2.min(width) {
                    map.cells[row + x as usize] = 1;
                }
            }
        }
        map
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn is_set(&self, x: u32, y: u32) -> bool {
        self.cells[y as usize * self.width as usize + x as usize] == 1
    }

    pub fn ones(&self) -> usize {
        self.cells.iter().filter(|&&c| c == 1).count()
    }

    /// Black/white rendering: changed cells white, untouched cells black.
    pub fn to_gray_image(&self) -> image::GrayImage {
        image::GrayImage::from_vec(
            self.width,
            self.height,
            self.cells.iter().map(|&c| if c == 1 { 255 } else { 0 }).collect(),
        )
        .expect("cell buffer matches dimensions")
    }
}

/// Result of comparing two screenshots with the graph engine.
#[derive(Debug, Clone, PartialEq)]
pub struct ChangeReport {
    pub params: PipelineParams,
    pub changes_in_original: Vec<ChangeRegion>,
    pub changes_in_changed: Vec<ChangeRegion>,
    pub heatmap_original: Heatmap,
    pub heatmap_changed: Heatmap,
    pub match_result: MatchResult,
}

impl ChangeReport {
    pub fn is_empty(&self) -> bool {
        self.changes_in_original.is_empty() && self.changes_in_changed.is_empty()
    }
}

fn regions_for(dets: &DetectionSet, unmatched: &[u32]) -> Vec<ChangeRegion> {
    unmatched
        .iter()
        .filter_map(|&id| dets.by_id(id))
        .map(|c| ChangeRegion {
            bbox: c.bbox,
            control_id: Some(c.id),
            category: Some(c.category),
        })
        .collect()
}

/// Compare two screenshots and report every control that could not be
/// matched across them. `dets_a`/`dets_b` must describe `img_a`/`img_b`.
pub fn detect_changes(
    img_a: &Raster,
    dets_a: &DetectionSet,
    img_b: &Raster,
    dets_b: &DetectionSet,
    params: &PipelineParams,
) -> ChangeReport {
    let ga = build_graph(dets_a, &params.graph);
    let gb = build_graph(dets_b, &params.graph);
    let match_result = assign_matches(&ga, img_a, &gb, img_b, &params.similarity);
    let changes_in_original = regions_for(dets_a, &match_result.unmatched_source);
    let changes_in_changed = regions_for(dets_b, &match_result.unmatched_target);
    let heatmap_original = Heatmap::from_regions(
        img_a.width(),
        img_a.height(),
        changes_in_original.iter().map(|r| &r.bbox),
    );
    let heatmap_changed = Heatmap::from_regions(
        img_b.width(),
        img_b.height(),
        changes_in_changed.iter().map(|r| &r.bbox),
    );
    ChangeReport {
        params: *params,
        changes_in_original,
        changes_in_changed,
        heatmap_original,
        heatmap_changed,
        match_result,
    }
}

/// Serialized form of [`ChangeReport`]. Heatmaps are fully determined by the
/// image dimensions and the change regions, so only the dimensions are
/// stored and the cells are rebuilt on load.
#[derive(Serialize, Deserialize)]
struct ReportDoc {
    method: String,
    params: ParamsDoc,
    original_size: [u32; 2],
    changed_size: [u32; 2],
    changes_in_original: Vec<ChangeRegion>,
    changes_in_changed: Vec<ChangeRegion>,
    match_result: MatchResult,
}

#[derive(Serialize, Deserialize)]
struct ParamsDoc {
    k: usize,
    h: u32,
    ts: f64,
    ns: f64,
}

impl ChangeReport {
    pub fn to_json(&self) -> String {
        let doc = ReportDoc {
            method: "gvcd".to_string(),
            params: ParamsDoc {
                k: self.params.graph.k,
                h: self.params.similarity.max_hash_diff,
                ts: self.params.similarity.min_text_sim,
                ns: self.params.similarity.min_neighbor_sim,
            },
            original_size: [self.heatmap_original.width, self.heatmap_original.height],
            changed_size: [self.heatmap_changed.width, self.heatmap_changed.height],
            changes_in_original: self.changes_in_original.clone(),
            changes_in_changed: self.changes_in_changed.clone(),
            match_result: self.match_result.clone(),
        };
        let mut out = serde_json::to_string_pretty(&doc).expect("report serializes");
        out.push('\n');
        out
    }

    pub fn from_json(text: &str) -> Result<Self, ChangesError> {
        let doc: ReportDoc =
            serde_json::from_str(text).map_err(|e| ChangesError::Report(e.to_string()))?;
        Ok(ChangeReport {
            params: PipelineParams {
                graph: GraphParams { k: doc.params.k },
                similarity: SimilarityParams {
                    max_hash_diff: doc.params.h,
                    min_text_sim: doc.params.ts,
                    min_neighbor_sim: doc.params.ns,
                },
            },
            heatmap_original: Heatmap::from_regions(
                doc.original_size[0],
                doc.original_size[1],
                doc.changes_in_original.iter().map(|r| &r.bbox),
            ),
            heatmap_changed: Heatmap::from_regions(
                doc.changed_size[0],
                doc.changed_size[1],
                doc.changes_in_changed.iter().map(|r| &r.bbox),
            ),
            changes_in_original: doc.changes_in_original,
            changes_in_changed: doc.changes_in_changed,
            match_result: doc.match_result,
        })
    }

    /// Write `heatmap_a.png`, `heatmap_b.png`, `overlay_a.png`,
    /// `overlay_b.png`, and `report.json` into `out_dir`.
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

/// Paths written by [`render_outputs`].
#[derive(Debug, Clone)]
pub struct RenderedOutputs {
    pub heatmap_a: PathBuf,
    pub heatmap_b: PathBuf,
    pub overlay_a: PathBuf,
    pub overlay_b: PathBuf,
    pub report: PathBuf,
}

pub const OVERLAY_BORDER_PX: u32 = 3;
const OVERLAY_COLOR: image::Rgb<u8> = image::Rgb([255, 0, 0]);

/// Copy of `img` with a red border drawn just inside each region's bbox.
pub fn draw_overlay(img: &Raster, regions: &[ChangeRegion]) -> Raster {
    let mut out = img.clone();
    for region in regions {
        let b = &region.bbox;
        for inset in 0..OVERLAY_BORDER_PX {
            let (x1, y1) = (b.x1 + inset, b.y1 + inset);
            let (x2, y2) = (b.x2.saturating_sub(inset + 1), b.y2.saturating_sub(inset + 1));
            if x1 > x2 || y1 > y2 {
                break;
            }
            for x in x1..=x2.min(out.width() - 1) {
                out.put_pixel(x, y1.min(out.height() - 1), OVERLAY_COLOR);
                out.put_pixel(x, y2.min(out.height() - 1), OVERLAY_COLOR);
            }
            for y in y1..=y2.min(out.height() - 1) {
                out.put_pixel(x1.min(out.width() - 1), y, OVERLAY_COLOR);
                out.put_pixel(x2.min(out.width() - 1), y, OVERLAY_COLOR);
            }
        }
    }
    out
}

/// Shared renderer for graph-engine and baseline reports.
#[allow(clippy::too_many_arguments)]
pub(crate) fn render_outputs(
    img_a: &Raster,
    img_b: &Raster,
    regions_a: &[ChangeRegion],
    regions_b: &[ChangeRegion],
    heatmap_a: &Heatmap,
    heatmap_b: &Heatmap,
    report_json: &str,
    out_dir: &Path,
) -> Result<RenderedOutputs, ChangesError> {
    std::fs::create_dir_all(out_dir).map_err(|source| ChangesError::Io {
        path: out_dir.to_path_buf(),
        source,
    })?;
    let save_png = |path: PathBuf, img: &dyn Fn(&PathBuf) -> Result<(), image::ImageError>| {
        img(&path).map_err(|source| ChangesError::Encode {
            path: path.clone(),
            source,
        })?;
        Ok::<PathBuf, ChangesError>(path)
    };

    let heatmap_a_path = save_png(out_dir.join("heatmap_a.png"), &|p| {
        heatmap_a.to_gray_image().save(p)
    })?;
    let heatmap_b_path = save_png(out_dir.join("heatmap_b.png"), &|p| {
        heatmap_b.to_gray_image().save(p)
    })?;
    let overlay_a_path = save_png(out_dir.join("overlay_a.png"), &|p| {
        draw_overlay(img_a, regions_a).save(p)
    })?;
    let overlay_b_path = save_png(out_dir.join("overlay_b.png"), &|p| {
        draw_overlay(img_b, regions_b).save(p)
    })?;
    let report_path = out_dir.join("report.json");
    std::fs::write(&report_path, report_json).map_err(|source| ChangesError::Io {
        path: report_path.clone(),
        source,
    })?;

    Ok(RenderedOutputs {
        heatmap_a: heatmap_a_path,
        heatmap_b: heatmap_b_path,
        overlay_a: overlay_a_path,
        overlay_b: overlay_b_path,
        report: report_path,
    })
}
