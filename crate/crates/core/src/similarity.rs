//! Visual and textual similarity of individual controls: 64-bit average
//! hashes over control patches, Levenshtein-based text similarity, and the
//! gated combination of the two that the matcher uses as its base score.

use crate::model::{BBox, Control, Raster};
use image::imageops::{self, FilterType};
use image::{ImageBuffer, Luma};
use serde::{Deserialize, Serialize};
use std::fmt;
use thiserror::Error;

pub const HASH_BITS: u32 = 64;

#[derive(Debug, Error, Clone, PartialEq)]
pub enum SimilarityError {
    #[error("max hash difference must be in 0..=64, got {0}")]
    InvalidHashDifference(u32),
    #[error("{name} must be in [0, 1], got {value}")]
    InvalidThreshold { name: &'static str, value: f64 },
}

/// 8x8 average hash of a grayscale control patch. Bit `row * 8 + col` is set
/// when that cell's luma is at least the patch mean, so a uniform patch hashes
/// to all ones.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct PerceptualHash(pub u64);

impl PerceptualHash {
    pub fn bits(self) -> u64 {
        self.0
    }

    pub fn bit(self, cell: u32) -> bool {
        debug_assert!(cell < HASH_BITS);
        self.0 >> cell & 1 == 1
    }
}

impl fmt::Display for PerceptualHash {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{:016x}", self.0)
    }
}

/// Rec. 601 luma of an RGB pixel, normalized to [0, 1]. Float resampling in
/// [`imageops::resize`] clamps samples to 1.0, so luma must be normalized
/// before resampling (a no-op for in-range values since the triangle filter
/// cannot overshoot).
fn luma(p: &image::Rgb<u8>) -> f32 {
    (0.299 * f32::from(p.0[0]) + 0.587 * f32::from(p.0[1]) + 0.114 * f32::from(p.0[2])) / 255.0
}

/// Average hash of the patch of `img` covered by `bbox`.
///
/// The patch is converted to grayscale, resampled bilinearly to 8x8, and each
/// cell is compared against the mean of the 64 cells. The bbox must lie inside
/// the image; a valid [`BBox`] can never be empty.
pub fn average_hash(img: &Raster, bbox: BBox) -> PerceptualHash {
    assert!(
        bbox.x2 <= img.width() && bbox.y2 <= img.height(),
        "bbox {bbox} outside {}x{} image",
        img.width(),
        img.height()
    );
    let (w, h) = (bbox.width(), bbox.height());
    let mut patch: ImageBuffer<Luma<f32>, Vec<f32>> = ImageBuffer::new(w, h);
    for y in 0..h {
        for x in 0..w {
            patch.put_pixel(x, y, Luma([luma(img.get_pixel(bbox.x1 + x, bbox.y1 + y))]));
        }
    }
    let resampled = if (w, h) == (8, 8) {
        patch
    } else {
        imageops::resize(&patch, 8, 8, FilterType::Triangle)
    };
    // Quantize back to 8-bit gray so a constant patch yields 64 identical
    // cells (float resampling leaves sub-quantum jitter between cells).
    let cells: Vec<f32> = resampled
        .pixels()
        .map(|p| (p.0[0] * 255.0).round())
        .collect();
    let mean = cells.iter().sum::<f32>() / HASH_BITS as f32;
    let mut bits = 0u64;
    for (i, &c) in cells.iter().enumerate() {
        if c >= mean {
            bits |= 1 << i;
        }
    }
    PerceptualHash(bits)
}

/// Hamming distance between two hashes, in `0..=64`.
pub fn hash_difference(a: PerceptualHash, b: PerceptualHash) -> u32 {
    (a.0 ^ b.0).count_ones()
}

fn levenshtein(a: &str, b: &str) -> usize {
    let a: Vec<char> = a.chars().collect();
    let b: Vec<char> = b.chars().collect();
    if a.is_empty() {
        return b.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitution = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitution.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

/// Normalized edit similarity over Unicode scalar values:
/// `1 - levenshtein(a, b) / max(|a|, |b|)`.
///
/// Two absent (or two empty) texts are identical (1.0); exactly one absent
/// text matches nothing (0.0).
pub fn text_similarity(a: Option<&str>, b: Option<&str>) -> f64 {
    match (a, b) {
        (None, None) => 1.0,
        (None, Some(_)) | (Some(_), None) => 0.0,
        (Some(a), Some(b)) => {
            let max_len = a.chars().count().max(b.chars().count());
            if max_len == 0 {
                return 1.0;
            }
            1.0 - levenshtein(a, b) as f64 / max_len as f64
        }
    }
}

/// Thresholds governing when two controls may correspond at all.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SimilarityParams {
    /// H: largest acceptable hash difference between corresponding controls.
    pub max_hash_diff: u32,
    /// TS: smallest acceptable text similarity between corresponding TEXT controls.
    pub min_text_sim: f64,
    /// NS: smallest neighborhood score at which a pair becomes a match candidate.
    pub min_neighbor_sim: f64,
}

impl Default for SimilarityParams {
    fn default() -> Self {
        SimilarityParams {
            max_hash_diff: 10,
            min_text_sim: 0.7,
            min_neighbor_sim: 0.8,
        }
    }
}

impl SimilarityParams {
    pub fn validate(&self) -> Result<(), SimilarityError> {
        if self.max_hash_diff > HASH_BITS {
            return Err(SimilarityError::InvalidHashDifference(self.max_hash_diff));
        }
        for (name, value) in [
            ("min text similarity", self.min_text_sim),
            ("min neighbor similarity", self.min_neighbor_sim),
        ] {
            if !(0.0..=1.0).contains(&value) {
                return Err(SimilarityError::InvalidThreshold { name, value });
            }
        }
        Ok(())
    }
}

/// Direct similarity of two controls, in `[0, 1]`.
///
/// Zero when the categories differ, when the hash difference exceeds H, or
/// when both controls are TEXT and their text similarity falls below TS
/// (missing text on a TEXT control fails closed against present text).
/// Otherwise TEXT pairs score the even blend of text similarity and hash
/// agreement, and all other pairs score hash agreement `1 - hamming / 64`.
pub fn base_similarity(
    a: &Control,
    b: &Control,
    img_a: &Raster,
    img_b: &Raster,
    params: &SimilarityParams,
) -> f64 {
    if a.category != b.category {
        return 0.0;
    }
    let ha = average_hash(img_a, a.bbox);
    let hb = average_hash(img_b, b.bbox);
    base_similarity_hashed(a, ha, b, hb, params)
}

/// [`base_similarity`] with precomputed patch hashes.
pub fn base_similarity_hashed(
    a: &Control,
    ha: PerceptualHash,
    b: &Control,
    hb: PerceptualHash,
    params: &SimilarityParams,
) -> f64 {
    if a.category != b.category {
        return 0.0;
    }
    let diff = hash_difference(ha, hb);
    if diff > params.max_hash_diff {
        return 0.0;
    }
    let hash_score = 1.0 - f64::from(diff) / f64::from(HASH_BITS);
    if a.category.is_text() {
        let text_score = text_similarity(a.text.as_deref(), b.text.as_deref());
        if text_score < params.min_text_sim {
            return 0.0;
        }
        0.5 * text_score + 0.5 * hash_score
    } else {
        hash_score
    }
}
