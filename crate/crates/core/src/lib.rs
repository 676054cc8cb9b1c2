//! Context-aware visual change detection for UI screenshots.
//!
//! The pipeline compares two screenshots of the same interface by building a
//! K-nearest-neighbor graph over the detected UI controls of each image and
//! matching nodes across the two graphs by the similarity of their
//! neighborhoods, not by their absolute pixel positions. Controls left
//! unmatched on either side are reported as changes. Two classical baselines
//! (exact pixel comparison and region-based hash comparison), a synthetic
//! benchmark generator, and precision/recall/F scoring are included so the
//! graph engine can be evaluated end to end.

pub mod baselines;
pub mod changes;
pub mod datagen;
pub mod detection;
pub mod eval;
pub mod graph;
pub mod matching;
pub mod model;
pub mod similarity;
