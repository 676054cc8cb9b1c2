//! The eight mutation operators that derive a changed screen from a base
//! screen, together with pixel-exact ground-truth change regions.
//!
//! Mutations are pixel-block operations (copy, nearest-neighbor scale,
//! recolor, fill), so they work on any annotated screenshot, not only
//! synthesized ones. Placement for new content avoids every existing
//! control *and* every prior mutation scar by a 2px margin, keeping each
//! mutation's diff pixels inside its own ground-truth boxes and keeping the
//! diff regions of distinct mutations disconnected from one another.

use super::sprites::{random_instance, random_instance_of};
use crate::model::{BBox, Control, ControlCategory, DetectionSet, Raster};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use std::collections::BTreeMap;
use thiserror::Error;

/// Placement margin around obstacles, in pixels.
const PLACEMENT_MARGIN: u32 = 2;
/// Random placement attempts before a mutation gives up.
const PLACEMENT_ATTEMPTS: u32 = 100;
/// Window around the anchor control for nearby placement, per axis.
const NEAR_WINDOW_X: u32 = 260;
const NEAR_WINDOW_Y: u32 = 150;
/// Preferred center distance between distinct change footprints, in pixels.
/// Changes spread across the screen keep their ground-truth regions visually
/// distinct instead of blurring into one ambiguous blob.
const FOOTPRINT_SEPARATION: u64 = 600;
/// Width of the ring sampled for vacancy fill color.
const RING: u32 = 5;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ChangeKind {
    AddControl,
    ChangeLocation,
    ChangeColor,
    Duplicate,
    Remove,
    ResizeSmaller,
    ResizeLarger,
    SwapControls,
}

impl ChangeKind {
    pub const ALL: [ChangeKind; 8] = [
        ChangeKind::AddControl,
        ChangeKind::ChangeLocation,
        ChangeKind::ChangeColor,
        ChangeKind::Duplicate,
        ChangeKind::Remove,
        ChangeKind::ResizeSmaller,
        ChangeKind::ResizeLarger,
        ChangeKind::SwapControls,
    ];

    pub fn as_str(self) -> &'static str {
        match self {
            ChangeKind::AddControl => "add_control",
            ChangeKind::ChangeLocation => "change_location",
            ChangeKind::ChangeColor => "change_color",
            ChangeKind::Duplicate => "duplicate",
            ChangeKind::Remove => "remove",
            ChangeKind::ResizeSmaller => "resize_smaller",
            ChangeKind::ResizeLarger => "resize_larger",
            ChangeKind::SwapControls => "swap_controls",
        }
    }
}

#[derive(Debug, Error)]
pub enum MutateError {
    #[error("no free placement found for {0:?} after {PLACEMENT_ATTEMPTS} attempts")]
    PlacementFailed(ChangeKind),
    #[error("no eligible control for {0:?}")]
    NoEligibleControl(ChangeKind),
}

/// One applied mutation with its ground-truth change regions per image.
#[derive(Debug, Clone)]
pub struct AppliedChange {
    pub kind: ChangeKind,
    pub control_ids: Vec<u32>,
    pub gt_original: Vec<BBox>,
    pub gt_changed: Vec<BBox>,
}

#[derive(Debug, Clone)]
struct Entry {
    id: u32,
    bbox: BBox,
    category: ControlCategory,
    text: Option<String>,
    /// Set once a mutation involves this control; touched controls are
    /// never picked again, so scars stay disjoint.
    touched: bool,
}

/// The changed screen being built: pixels plus live control records.
#[derive(Debug, Clone)]
pub struct ScreenState {
    img: Raster,
    entries: Vec<Entry>,
    scars: Vec<BBox>,
    next_id: u32,
}

impl ScreenState {
    pub fn new(img: Raster, dets: &DetectionSet) -> Self {
        let entries = dets
            .controls()
            .iter()
            .map(|c| Entry {
                id: c.id,
                bbox: c.bbox,
                category: c.category,
                text: c.text.clone(),
                touched: false,
            })
            .collect();
        let next_id = dets.controls().iter().map(|c| c.id + 1).max().unwrap_or(0);
        ScreenState {
            img,
            entries,
            scars: Vec::new(),
            next_id,
        }
    }

    pub fn into_parts(self) -> (Raster, DetectionSet) {
        let (w, h) = self.img.dimensions();
        let controls = self
            .entries
            .into_iter()
            .map(|e| Control {
                id: e.id,
                bbox: e.bbox,
                category: e.category,
                text: e.text,
            })
            .collect();
        let dets = DetectionSet::new(w, h, controls)
            .expect("mutations preserve annotation validity");
        (self.img, dets)
    }

    fn untouched(&self) -> Vec<usize> {
        (0..self.entries.len())
            .filter(|&i| !self.entries[i].touched)
            .collect()
    }

    fn remote_from_scars(&self, b: &BBox) -> bool {
        self.scars
            .iter()
            .all(|s| center_gap(s, b) >= FOOTPRINT_SEPARATION)
    }

    /// Keep the candidates that sit away from every earlier change footprint;
    /// when none qualify, keep them all rather than fail the mutation.
    fn preferring_remote(&self, cands: Vec<usize>) -> Vec<usize> {
        let remote: Vec<usize> = cands
            .iter()
            .copied()
            .filter(|&i| self.remote_from_scars(&self.entries[i].bbox))
            .collect();
        if remote.is_empty() {
            cands
        } else {
            remote
        }
    }

    /// Random free spot for a `w x h` box: no overlap with any control or
    /// scar expanded by the placement margin. The first round of attempts
    /// also keeps away from earlier footprints; the second drops that
    /// preference so crowded screens still place.
    fn place(&self, w: u32, h: u32, rng: &mut ChaCha8Rng) -> Option<BBox> {
        let (cw, ch) = self.img.dimensions();
        if w + 2 > cw || h + 2 > ch {
            return None;
        }
        for round in 0..2 {
            for _ in 0..PLACEMENT_ATTEMPTS {
                let x = rng.gen_range(1..=cw - w - 1);
                let y = rng.gen_range(1..=ch - h - 1);
                let candidate = BBox::new(x, y, x + w, y + h).unwrap();
                if round == 0 && !self.remote_from_scars(&candidate) {
                    continue;
                }
                let blocked = self
                    .entries
                    .iter()
                    .map(|e| &e.bbox)
                    .chain(self.scars.iter())
                    .any(|b| candidate.intersects_expanded(b, PLACEMENT_MARGIN));
                if !blocked {
                    return Some(candidate);
                }
            }
        }
        None
    }

    /// Like `place`, but sample inside a window around an anchor box, so an
    /// addition lands next to an existing group the way a new icon joins its
    /// toolbar. `None` when the window is exhausted; callers fall back to
    /// `place`.
    fn place_near(&self, w: u32, h: u32, anchor: BBox, rng: &mut ChaCha8Rng) -> Option<BBox> {
        let (cw, ch) = self.img.dimensions();
        if w + 2 > cw || h + 2 > ch {
            return None;
        }
        let lo_x = anchor.x1.saturating_sub(NEAR_WINDOW_X).max(1);
        let hi_x = (anchor.x2 + NEAR_WINDOW_X).min(cw - w - 1);
        let lo_y = anchor.y1.saturating_sub(NEAR_WINDOW_Y).max(1);
        let hi_y = (anchor.y2 + NEAR_WINDOW_Y).min(ch - h - 1);
        if lo_x > hi_x || lo_y > hi_y {
            return None;
        }
        for round in 0..2 {
            for _ in 0..PLACEMENT_ATTEMPTS {
                let x = rng.gen_range(lo_x..=hi_x);
                let y = rng.gen_range(lo_y..=hi_y);
                let candidate = BBox::new(x, y, x + w, y + h).unwrap();
                if round == 0 && !self.remote_from_scars(&candidate) {
                    continue;
                }
                let blocked = self
                    .entries
                    .iter()
                    .map(|e| &e.bbox)
                    .chain(self.scars.iter())
                    .any(|b| candidate.intersects_expanded(b, PLACEMENT_MARGIN));
                if !blocked {
                    return Some(candidate);
                }
            }
        }
        None
    }

    fn crop(&self, b: BBox) -> Vec<[u8; 3]> {
        let mut buf = Vec::with_capacity((b.width() * b.height()) as usize);
        for y in b.y1..b.y2 {
            for x in b.x1..b.x2 {
                buf.push(self.img.get_pixel(x, y).0);
            }
        }
        buf
    }

    fn blit(&mut self, buf: &[[u8; 3]], src_w: u32, dst: BBox) {
        debug_assert_eq!(buf.len() as u32, src_w * dst.height());
        for dy in 0..dst.height() {
            for dx in 0..dst.width() {
                let px = buf[(dy * src_w + dx) as usize];
                self.img.put_pixel(dst.x1 + dx, dst.y1 + dy, image::Rgb(px));
            }
        }
    }

    fn fill(&mut self, b: BBox, color: [u8; 3]) {
        for y in b.y1..b.y2 {
            for x in b.x1..b.x2 {
                self.img.put_pixel(x, y, image::Rgb(color));
            }
        }
    }

    /// Most frequent color in the ring around `b`; ties go to the smallest
    /// RGB triple so the choice is deterministic.
    fn ring_modal_color(&self, b: BBox) -> [u8; 3] {
        let (w, h) = self.img.dimensions();
        let x1 = b.x1.saturating_sub(RING);
        let y1 = b.y1.saturating_sub(RING);
        let x2 = (b.x2 + RING).min(w);
        let y2 = (b.y2 + RING).min(h);
        let mut counts: BTreeMap<[u8; 3], u32> = BTreeMap::new();
        for y in y1..y2 {
            for x in x1..x2 {
                let inside = x >= b.x1 && x < b.x2 && y >= b.y1 && y < b.y2;
                if !inside {
                    *counts.entry(self.img.get_pixel(x, y).0).or_insert(0) += 1;
                }
            }
        }
        let mut best = ([0, 0, 0], 0);
        for (color, n) in counts {
            if n > best.1 {
                best = (color, n);
            }
        }
        best.0
    }

    /// Nearest-neighbor rescale of `src` pixels into `dst` (both in image
    /// coordinates; caller guarantees `dst` was vacated or covers `src`).
    fn scale_block(&mut self, src: BBox, dst: BBox) {
        let buf = self.crop(src);
        let (sw, sh) = (src.width(), src.height());
        for dy in 0..dst.height() {
            for dx in 0..dst.width() {
                let sx = (dx as u64 * sw as u64 / dst.width() as u64) as u32;
                let sy = (dy as u64 * sh as u64 / dst.height() as u64) as u32;
                let px = buf[(sy * sw + sx) as usize];
                self.img.put_pixel(dst.x1 + dx, dst.y1 + dy, image::Rgb(px));
            }
        }
    }
}

/// Color remap with no fixed point: every input triple maps to a different
/// output triple, so a recolored region differs at every pixel.
pub fn rotate_complement(px: [u8; 3]) -> [u8; 3] {
    [255 - px[1], 255 - px[2], 255 - px[0]]
}

fn center_gap(a: &BBox, b: &BBox) -> u64 {
    let dx = i64::from(a.x1 + a.x2) - i64::from(b.x1 + b.x2);
    let dy = i64::from(a.y1 + a.y2) - i64::from(b.y1 + b.y2);
    ((dx * dx + dy * dy) as u64).isqrt() / 2
}

/// Apply one mutation of the given kind, updating pixels, control records,
/// and scar list, and returning the ground-truth regions it produced.
/// Errors mean "this kind is not applicable right now" and the caller is
/// expected to redraw the kind.
pub fn apply_change(
    state: &mut ScreenState,
    kind: ChangeKind,
    rng: &mut ChaCha8Rng,
) -> Result<AppliedChange, MutateError> {
    match kind {
        ChangeKind::AddControl => {
            // New controls join an existing group: draw an instance of a
            // random anchor's kind and place it alongside, falling back to
            // anywhere-free placement on a crowded screen.
            let anchor = (!state.entries.is_empty()).then(|| {
                let pool = state.preferring_remote((0..state.entries.len()).collect());
                let e = &state.entries[pool[rng.gen_range(0..pool.len())]];
                (e.category, e.bbox)
            });
            let inst = match anchor.and_then(|(c, _)| super::sprites::kind_of_category(c)) {
                Some(kind) => random_instance_of(rng, kind),
                None => random_instance(rng),
            };
            let bbox = anchor
                .and_then(|(_, near)| state.place_near(inst.width, inst.height, near, rng))
                .or_else(|| state.place(inst.width, inst.height, rng))
                .ok_or(MutateError::PlacementFailed(kind))?;
            super::sprites::draw_sprite(&mut state.img, bbox.x1, bbox.y1, &inst);
            let id = state.next_id;
            state.next_id += 1;
            state.entries.push(Entry {
                id,
                bbox,
                category: inst.category(),
                text: inst.text(),
                touched: true,
            });
            state.scars.push(bbox);
            Ok(AppliedChange {
                kind,
                control_ids: vec![id],
                gt_original: vec![],
                gt_changed: vec![bbox],
            })
        }
        ChangeKind::ChangeLocation => {
            let candidates = state.preferring_remote(state.untouched());
            if candidates.is_empty() {
                return Err(MutateError::NoEligibleControl(kind));
            }
            let idx = candidates[rng.gen_range(0..candidates.len())];
            let old = state.entries[idx].bbox;
            let new = state
                .place(old.width(), old.height(), rng)
                .ok_or(MutateError::PlacementFailed(kind))?;
            let buf = state.crop(old);
            let vacancy = state.ring_modal_color(old);
            state.fill(old, vacancy);
            state.blit(&buf, old.width(), new);
            state.entries[idx].bbox = new;
            state.entries[idx].touched = true;
            state.scars.push(old);
            state.scars.push(new);
            Ok(AppliedChange {
                kind,
                control_ids: vec![state.entries[idx].id],
                gt_original: vec![old],
                gt_changed: vec![new],
            })
        }
        ChangeKind::ChangeColor => {
            let candidates = state.preferring_remote(state.untouched());
            if candidates.is_empty() {
                return Err(MutateError::NoEligibleControl(kind));
            }
            let idx = candidates[rng.gen_range(0..candidates.len())];
            let bbox = state.entries[idx].bbox;
            for y in bbox.y1..bbox.y2 {
                for x in bbox.x1..bbox.x2 {
                    let px = state.img.get_pixel(x, y).0;
                    state.img.put_pixel(x, y, image::Rgb(rotate_complement(px)));
                }
            }
            state.entries[idx].touched = true;
            state.scars.push(bbox);
            Ok(AppliedChange {
                kind,
                control_ids: vec![state.entries[idx].id],
                gt_original: vec![bbox],
                gt_changed: vec![bbox],
            })
        }
        ChangeKind::Duplicate => {
            let candidates = state.preferring_remote(state.untouched());
            if candidates.is_empty() {
                return Err(MutateError::NoEligibleControl(kind));
            }
            let idx = candidates[rng.gen_range(0..candidates.len())];
            let src = state.entries[idx].bbox;
            // Copies land next to their original (a repeated list row or
            // toolbar item), falling back to anywhere-free placement.
            let dst = state
                .place_near(src.width(), src.height(), src, rng)
                .or_else(|| state.place(src.width(), src.height(), rng))
                .ok_or(MutateError::PlacementFailed(kind))?;
            let buf = state.crop(src);
            state.blit(&buf, src.width(), dst);
            let id = state.next_id;
            state.next_id += 1;
            let copy = Entry {
                id,
                bbox: dst,
                category: state.entries[idx].category,
                text: state.entries[idx].text.clone(),
                touched: true,
            };
            state.entries[idx].touched = true;
            let source_id = state.entries[idx].id;
            state.entries.push(copy);
            state.scars.push(dst);
            Ok(AppliedChange {
                kind,
                control_ids: vec![source_id, id],
                gt_original: vec![],
                gt_changed: vec![dst],
            })
        }
        ChangeKind::Remove => {
            let candidates = state.preferring_remote(state.untouched());
            if candidates.is_empty() {
                return Err(MutateError::NoEligibleControl(kind));
            }
            let idx = candidates[rng.gen_range(0..candidates.len())];
            let bbox = state.entries[idx].bbox;
            let id = state.entries[idx].id;
            let vacancy = state.ring_modal_color(bbox);
            state.fill(bbox, vacancy);
            state.entries.remove(idx);
            state.scars.push(bbox);
            Ok(AppliedChange {
                kind,
                control_ids: vec![id],
                gt_original: vec![bbox],
                gt_changed: vec![],
            })
        }
        ChangeKind::ResizeSmaller => {
            let eligible: Vec<usize> = state
                .untouched()
                .into_iter()
                .filter(|&i| {
                    let b = &state.entries[i].bbox;
                    b.width() >= 14 && b.height() >= 14
                })
                .collect();
            if eligible.is_empty() {
                return Err(MutateError::NoEligibleControl(kind));
            }
            let candidates = state.preferring_remote(eligible);
            let idx = candidates[rng.gen_range(0..candidates.len())];
            let old = state.entries[idx].bbox;
            let factor = rng.gen_range(0.3..=0.8);
            let new_w = ((old.width() as f64 * factor).round() as u32).max(4);
            let new_h = ((old.height() as f64 * factor).round() as u32).max(4);
            let new = BBox::new(old.x1, old.y1, old.x1 + new_w, old.y1 + new_h).unwrap();
            let vacancy = state.ring_modal_color(old);
            state.scale_block(old, new);
            // Clear the vacated L-shape outside the shrunk control.
            for y in old.y1..old.y2 {
                for x in old.x1..old.x2 {
                    if x >= new.x2 || y >= new.y2 {
                        state.img.put_pixel(x, y, image::Rgb(vacancy));
                    }
                }
            }
            state.entries[idx].bbox = new;
            state.entries[idx].touched = true;
            state.scars.push(old);
            Ok(AppliedChange {
                kind,
                control_ids: vec![state.entries[idx].id],
                gt_original: vec![old],
                gt_changed: vec![old],
            })
        }
        ChangeKind::ResizeLarger => {
            let candidates = state.preferring_remote(state.untouched());
            if candidates.is_empty() {
                return Err(MutateError::NoEligibleControl(kind));
            }
            let idx = candidates[rng.gen_range(0..candidates.len())];
            let old = state.entries[idx].bbox;
            let (cw, ch) = state.img.dimensions();
            let mut grown = None;
            for _ in 0..PLACEMENT_ATTEMPTS {
                let factor = rng.gen_range(1.3..=1.8);
                let new_w = (old.width() as f64 * factor).round() as u32;
                let new_h = (old.height() as f64 * factor).round() as u32;
                if old.x1 + new_w > cw || old.y1 + new_h > ch {
                    continue;
                }
                let candidate =
                    BBox::new(old.x1, old.y1, old.x1 + new_w, old.y1 + new_h).unwrap();
                let blocked = state
                    .entries
                    .iter()
                    .enumerate()
                    .filter(|(i, _)| *i != idx)
                    .map(|(_, e)| &e.bbox)
                    .chain(state.scars.iter())
                    .any(|b| candidate.intersects_expanded(b, PLACEMENT_MARGIN));
                if !blocked {
                    grown = Some(candidate);
                    break;
                }
            }
            let new = grown.ok_or(MutateError::PlacementFailed(kind))?;
            state.scale_block(old, new);
            state.entries[idx].bbox = new;
            state.entries[idx].touched = true;
            state.scars.push(new);
            Ok(AppliedChange {
                kind,
                control_ids: vec![state.entries[idx].id],
                gt_original: vec![new],
                gt_changed: vec![new],
            })
        }
        ChangeKind::SwapControls => {
            // Swapping requires identical footprints (so no overlap can
            // result) and distinct categories (so the change is observable
            // rather than an exchange of near-identical twins).
            let untouched = state.untouched();
            let mut pairs = Vec::new();
            for (pos, &i) in untouched.iter().enumerate() {
                for &j in &untouched[pos + 1..] {
                    let (a, b) = (&state.entries[i], &state.entries[j]);
                    if a.bbox.width() == b.bbox.width()
                        && a.bbox.height() == b.bbox.height()
                        && a.category != b.category
                    {
                        pairs.push((i, j));
                    }
                }
            }
            if pairs.is_empty() {
                return Err(MutateError::NoEligibleControl(kind));
            }
            // Prefer swaps that span the screen (panels exchanged across a
            // layout) over swaps of adjacent cells, so the two disturbed
            // neighborhoods do not overlap each other or earlier footprints.
            let spans = |&(i, j): &(usize, usize)| {
                let (a, b) = (&state.entries[i].bbox, &state.entries[j].bbox);
                center_gap(a, b) >= FOOTPRINT_SEPARATION
            };
            let remote = |&(i, j): &(usize, usize)| {
                state.remote_from_scars(&state.entries[i].bbox)
                    && state.remote_from_scars(&state.entries[j].bbox)
            };
            let best: Vec<(usize, usize)> = pairs
                .iter()
                .copied()
                .filter(|p| spans(p) && remote(p))
                .collect();
            let far: Vec<(usize, usize)>;
            let pool = if !best.is_empty() {
                &best
            } else {
                far = pairs.iter().copied().filter(spans).collect();
                if far.is_empty() { &pairs } else { &far }
            };
            let (i, j) = pool[rng.gen_range(0..pool.len())];
            let (box_i, box_j) = (state.entries[i].bbox, state.entries[j].bbox);
            let buf_i = state.crop(box_i);
            let buf_j = state.crop(box_j);
            state.blit(&buf_i, box_i.width(), box_j);
            state.blit(&buf_j, box_j.width(), box_i);
            state.entries[i].bbox = box_j;
            state.entries[j].bbox = box_i;
            state.entries[i].touched = true;
            state.entries[j].touched = true;
            state.scars.push(box_i);
            state.scars.push(box_j);
            Ok(AppliedChange {
                kind,
                control_ids: vec![state.entries[i].id, state.entries[j].id],
                gt_original: vec![box_i, box_j],
                gt_changed: vec![box_i, box_j],
            })
        }
    }
}
