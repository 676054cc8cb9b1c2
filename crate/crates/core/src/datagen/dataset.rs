//! Dataset assembly: synthesize base screens, derive changed variants with
//! 1-4 mutations each (optionally followed by a cut), and read/write the
//! whole thing on disk with a manifest.
//!
//! Generation is deterministic for a given master seed: per-pair sub-seeds
//! are drawn up front from one seeded stream, so pairs can then be built in
//! parallel without perturbing each other.

use super::cut::{CUT_AMOUNTS, CutSide, CutSpec, cut_and_shift};
use super::mutate::{AppliedChange, ChangeKind, ScreenState, apply_change};
use super::synth::{BaseScreen, synthesize_base};
use crate::detection::serialize_annotations;
use crate::model::{BBox, DetectionSet, Raster};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;
use std::path::{Path, PathBuf};
use thiserror::Error;

/// Canvas used when generating synthetic screens unless overridden.
pub const DEFAULT_CANVAS: (u32, u32) = (1024, 768);

/// Kind redraws per mutation slot before the pair generator gives up on
/// that slot (it then falls through; a pair always ends with >= 1 change).
const KIND_REDRAWS: u32 = 64;

#[derive(Debug, Error)]
pub enum DatagenError {
    #[error("io error at {path}: {source}")]
    Io {
        path: PathBuf,
        source: std::io::Error,
    },
    #[error("image error at {path}: {source}")]
    Image {
        path: PathBuf,
        source: image::ImageError,
    },
    #[error("bad manifest: {0}")]
    Manifest(String),
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> DatagenError + '_ {
    move |source| DatagenError::Io {
        path: path.to_path_buf(),
        source,
    }
}

/// One original/changed pair held in memory, with per-side ground truth.
#[derive(Debug, Clone)]
pub struct GeneratedPair {
    pub original_img: Raster,
    pub original_dets: DetectionSet,
    pub changed_img: Raster,
    pub changed_dets: DetectionSet,
    pub applied: Vec<AppliedChange>,
    pub gt_original: Vec<BBox>,
    pub gt_changed: Vec<BBox>,
    pub cut: Option<CutSpec>,
    pub seed: u64,
}

/// Synthesize `count` independent base screens, in parallel.
pub fn synthesize_bases(count: usize, canvas: (u32, u32), seed: u64) -> Vec<BaseScreen> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let seeds: Vec<u64> = (0..count).map(|_| master.r#gen()).collect();
    seeds
        .into_par_iter()
        .map(|s| synthesize_base(canvas, &mut ChaCha8Rng::seed_from_u64(s)))
        .collect()
}

/// Derive one changed variant of `base` using `seed`: 1-4 mutations, then
/// an optional random cut applied to the changed side only.
pub fn generate_pair(base: &BaseScreen, cut: bool, seed: u64) -> GeneratedPair {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut state = ScreenState::new(base.img.clone(), &base.dets);
    let planned = rng.gen_range(1..=4usize);
    let mut applied: Vec<AppliedChange> = Vec::new();
    for _ in 0..planned {
        for _ in 0..KIND_REDRAWS {
            let kind = ChangeKind::ALL[rng.gen_range(0..ChangeKind::ALL.len())];
            if let Ok(change) = apply_change(&mut state, kind, &mut rng) {
                applied.push(change);
                break;
            }
        }
    }
    if applied.is_empty() {
        // AddControl only needs free space, which a fresh screen has.
        let change = apply_change(&mut state, ChangeKind::AddControl, &mut rng)
            .expect("a fresh screen accepts an added control");
        applied.push(change);
    }
    let gt_original: Vec<BBox> = applied.iter().flat_map(|c| c.gt_original.clone()).collect();
    let mut gt_changed: Vec<BBox> = applied.iter().flat_map(|c| c.gt_changed.clone()).collect();
    let (changed_img, changed_dets) = state.into_parts();

    let (changed_img, changed_dets, gt_changed, cut_spec) = if cut {
        let side = CutSide::ALL[rng.gen_range(0..CutSide::ALL.len())];
        let limit = match side {
            CutSide::Left | CutSide::Right => changed_img.width(),
            CutSide::Top | CutSide::Bottom => changed_img.height(),
        };
        let amounts: Vec<u32> = CUT_AMOUNTS.iter().copied().filter(|&a| a < limit).collect();
        assert!(!amounts.is_empty(), "canvas too small for any cut amount");
        let spec = CutSpec {
            side,
            amount: amounts[rng.gen_range(0..amounts.len())],
        };
        let (img, dets, gt) = cut_and_shift(&changed_img, &changed_dets, &gt_changed, spec);
        (img, dets, gt, Some(spec))
    } else {
        gt_changed.sort_unstable_by_key(|b| (b.y1, b.x1, b.x2, b.y2));
        (changed_img, changed_dets, gt_changed, None)
    };

    let mut gt_original = gt_original;
    gt_original.sort_unstable_by_key(|b| (b.y1, b.x1, b.x2, b.y2));

    GeneratedPair {
        original_img: base.img.clone(),
        original_dets: base.dets.clone(),
        changed_img,
        changed_dets,
        applied,
        gt_original,
        gt_changed,
        cut: cut_spec,
        seed,
    }
}

/// Generate `variants` changed screens from each base, in parallel.
/// Pair order is row-major: all variants of base 0, then base 1, ...
pub fn generate_dataset(
    bases: &[BaseScreen],
    variants: usize,
    cut: bool,
    seed: u64,
) -> Vec<GeneratedPair> {
    let mut master = ChaCha8Rng::seed_from_u64(seed);
    let jobs: Vec<(usize, u64)> = (0..bases.len() * variants)
        .map(|i| (i / variants, master.r#gen()))
        .collect();
    jobs.into_par_iter()
        .map(|(base_idx, s)| generate_pair(&bases[base_idx], cut, s))
        .collect()
}

/// Ground-truth file contents: change regions per side.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct TruthFile {
    pub original: Vec<BBox>,
    pub changed: Vec<BBox>,
}

/// Manifest entry for one stored pair; paths are relative to the manifest.
#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct PairEntry {
    pub id: String,
    pub original_image: String,
    pub original_annotations: String,
    pub changed_image: String,
    pub changed_annotations: String,
    pub ground_truth: String,
    pub seed: u64,
    pub mutations: Vec<String>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub cut: Option<CutSpec>,
}

#[derive(Debug, Clone, serde::Serialize, serde::Deserialize)]
pub struct Manifest {
    pub seed: u64,
    pub cut: bool,
    pub pairs: Vec<PairEntry>,
}

/// Write a generated dataset under `root`: one directory per pair plus a
/// `manifest.json`. Output bytes are a pure function of the pairs.
pub fn write_dataset(
    root: &Path,
    pairs: &[GeneratedPair],
    seed: u64,
    cut: bool,
) -> Result<Manifest, DatagenError> {
    std::fs::create_dir_all(root).map_err(io_err(root))?;
    let mut entries = Vec::with_capacity(pairs.len());
    for (i, pair) in pairs.iter().enumerate() {
        let id = format!("pair_{i:04}");
        let dir = root.join(&id);
        std::fs::create_dir_all(&dir).map_err(io_err(&dir))?;

        let save_png = |name: &str, img: &Raster| -> Result<(), DatagenError> {
            let path = dir.join(name);
            img.save_with_format(&path, image::ImageFormat::Png)
                .map_err(|source| DatagenError::Image { path, source })
        };
        let save_text = |name: &str, text: &str| -> Result<(), DatagenError> {
            let path = dir.join(name);
            std::fs::write(&path, text).map_err(io_err(&path))
        };

        save_png("original.png", &pair.original_img)?;
        save_png("changed.png", &pair.changed_img)?;
        save_text("original.json", &serialize_annotations(&pair.original_dets))?;
        save_text("changed.json", &serialize_annotations(&pair.changed_dets))?;
        let truth = TruthFile {
            original: pair.gt_original.clone(),
            changed: pair.gt_changed.clone(),
        };
        let mut truth_json =
            serde_json::to_string_pretty(&truth).expect("truth serialization is infallible");
        truth_json.push('\n');
        save_text("truth.json", &truth_json)?;

        entries.push(PairEntry {
            original_image: format!("{id}/original.png"),
            original_annotations: format!("{id}/original.json"),
            changed_image: format!("{id}/changed.png"),
            changed_annotations: format!("{id}/changed.json"),
            ground_truth: format!("{id}/truth.json"),
            id,
            seed: pair.seed,
            mutations: pair.applied.iter().map(|c| c.kind.as_str().to_string()).collect(),
            cut: pair.cut,
        });
    }
    let manifest = Manifest {
        seed,
        cut,
        pairs: entries,
    };
    let mut doc =
        serde_json::to_string_pretty(&manifest).expect("manifest serialization is infallible");
    doc.push('\n');
    let path = root.join("manifest.json");
    std::fs::write(&path, doc).map_err(io_err(&path))?;
    Ok(manifest)
}

pub fn load_manifest(path: &Path) -> Result<Manifest, DatagenError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DatagenError::Manifest(e.to_string()))
}

pub fn load_truth(path: &Path) -> Result<TruthFile, DatagenError> {
    let text = std::fs::read_to_string(path).map_err(io_err(path))?;
    serde_json::from_str(&text).map_err(|e| DatagenError::Manifest(e.to_string()))
}

/// Load a PNG as an RGB raster.
pub fn load_image(path: &Path) -> Result<Raster, DatagenError> {
    let img = image::open(path).map_err(|source| DatagenError::Image {
        path: path.to_path_buf(),
        source,
    })?;
    Ok(img.to_rgb8())
}
