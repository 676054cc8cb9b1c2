//! Synthetic screenshot-pair generator with pixel-exact ground truth.
//!
//! A procedural layout synthesizer paints flat-background screens from a
//! small sprite bank ([`sprites`], [`synth`]). Eight mutation operators
//! ([`mutate`]) derive a changed screen plus ground-truth change regions, an
//! optional crop-and-recenter transform ([`cut`]) simulates window resizing,
//! and [`dataset`] assembles seeded, reproducible benchmark datasets on disk.
//!
//! Sprite interiors carry a deterministic per-pixel texture keyed by
//! instance seed *and* render size. Two consequences the test suites rely
//! on: distinct instances almost never agree on any pixel, and any rescale
//! of a control re-keys its texture. Together with mutation placement that
//! avoids all prior scars, every mutation's differing pixels form one
//! 4-connected region per ground-truth box, which is what lets the
//! pixel-diff baseline score perfect precision on generated data.

pub mod cut;
pub mod dataset;
pub mod mutate;
pub mod sprites;
pub mod synth;

pub use cut::{CUT_AMOUNTS, CutSide, CutSpec, cut_and_shift};
pub use dataset::{
    DEFAULT_CANVAS, DatagenError, GeneratedPair, Manifest, PairEntry, TruthFile, generate_dataset,
    generate_pair, load_image, load_manifest, load_truth, synthesize_bases, write_dataset,
};
pub use mutate::{AppliedChange, ChangeKind, MutateError, ScreenState, apply_change};
pub use sprites::{BACKGROUND, SpriteInstance, SpriteKind, draw_sprite, random_instance};
pub use synth::{BaseScreen, synthesize_base};
