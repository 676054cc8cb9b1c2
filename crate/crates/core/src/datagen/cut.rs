//! Cut-and-shift: remove a strip from one side of a screenshot and recenter
//! what remains on the same-size canvas.
//!
//! Cutting `a` pixels from the left moves surviving content left by `a` and
//! then right again by the margin `m = a / 2`, i.e. every kept x becomes
//! `x - a + m`. A 1920-wide screen cut by 100 on the left maps x = 200 to
//! 200 - 100 + 50 = 150. Both margins (width `m` and `a - m`) are filled
//! with the modal color of the original 1-pixel canvas perimeter. Boxes
//! losing more than half their area to the cut are dropped; the rest are
//! clipped and translated.

use crate::model::{BBox, Control, DetectionSet, Raster};
use std::collections::BTreeMap;

/// Strip widths used for cut variants.
pub const CUT_AMOUNTS: [u32; 5] = [100, 200, 300, 400, 500];

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CutSide {
    Left,
    Right,
    Top,
    Bottom,
}

impl CutSide {
    pub const ALL: [CutSide; 4] = [CutSide::Left, CutSide::Right, CutSide::Top, CutSide::Bottom];

    pub fn as_str(self) -> &'static str {
        match self {
            CutSide::Left => "left",
            CutSide::Right => "right",
            CutSide::Top => "top",
            CutSide::Bottom => "bottom",
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct CutSpec {
    pub side: CutSide,
    pub amount: u32,
}

/// Modal color of the outermost pixel ring; ties go to the smallest RGB
/// triple.
fn border_modal_color(img: &Raster) -> [u8; 3] {
    let (w, h) = img.dimensions();
    let mut counts: BTreeMap<[u8; 3], u32> = BTreeMap::new();
    let tally = |x: u32, y: u32, counts: &mut BTreeMap<[u8; 3], u32>| {
        *counts.entry(img.get_pixel(x, y).0).or_insert(0) += 1;
    };
    for x in 0..w {
        tally(x, 0, &mut counts);
        if h > 1 {
            tally(x, h - 1, &mut counts);
        }
    }
    for y in 1..h.saturating_sub(1) {
        tally(0, y, &mut counts);
        if w > 1 {
            tally(w - 1, y, &mut counts);
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

/// The rectangle of source pixels that survives the cut.
fn kept_window(w: u32, h: u32, spec: CutSpec) -> BBox {
    let a = spec.amount;
    match spec.side {
        CutSide::Left => BBox::new(a, 0, w, h),
        CutSide::Right => BBox::new(0, 0, w - a, h),
        CutSide::Top => BBox::new(0, a, w, h),
        CutSide::Bottom => BBox::new(0, 0, w, h - a),
    }
    .expect("cut amount smaller than canvas")
}

/// Translation applied to surviving pixels, as (dx, dy) in i64.
fn shift(spec: CutSpec) -> (i64, i64) {
    let a = spec.amount as i64;
    let m = a / 2;
    match spec.side {
        CutSide::Left => (m - a, 0),
        CutSide::Right => (m, 0),
        CutSide::Top => (0, m - a),
        CutSide::Bottom => (0, m),
    }
}

/// Clip a box to the kept window and translate it; returns `None` when the
/// cut removes more than half of the box's area.
fn transform_box(b: &BBox, window: &BBox, dx: i64, dy: i64) -> Option<BBox> {
    let kept = b.intersection(window)?;
    if kept.area() * 2 < b.area() {
        return None;
    }
    BBox::new(
        (kept.x1 as i64 + dx) as u32,
        (kept.y1 as i64 + dy) as u32,
        (kept.x2 as i64 + dx) as u32,
        (kept.y2 as i64 + dy) as u32,
    )
    .ok()
}

/// Apply a cut to an annotated screenshot plus its ground-truth regions.
/// The canvas size is preserved; only content moves.
pub fn cut_and_shift(
    img: &Raster,
    dets: &DetectionSet,
    gt: &[BBox],
    spec: CutSpec,
) -> (Raster, DetectionSet, Vec<BBox>) {
    let (w, h) = img.dimensions();
    assert!(
        match spec.side {
            CutSide::Left | CutSide::Right => spec.amount < w,
            CutSide::Top | CutSide::Bottom => spec.amount < h,
        },
        "cut amount must leave some content"
    );
    if spec.amount == 0 {
        return (img.clone(), dets.clone(), gt.to_vec());
    }
    let fill = border_modal_color(img);
    let window = kept_window(w, h, spec);
    let (dx, dy) = shift(spec);

    let mut out = Raster::from_pixel(w, h, image::Rgb(fill));
    for y in window.y1..window.y2 {
        for x in window.x1..window.x2 {
            let nx = (x as i64 + dx) as u32;
            let ny = (y as i64 + dy) as u32;
            out.put_pixel(nx, ny, *img.get_pixel(x, y));
        }
    }

    let controls = dets
        .controls()
        .iter()
        .filter_map(|c| {
            transform_box(&c.bbox, &window, dx, dy).map(|bbox| Control {
                id: c.id,
                bbox,
                category: c.category,
                text: c.text.clone(),
            })
        })
        .collect();
    let new_dets =
        DetectionSet::new(w, h, controls).expect("cut preserves id order and bounds");
    let new_gt = gt
        .iter()
        .filter_map(|b| transform_box(b, &window, dx, dy))
        .collect();
    (out, new_dets, new_gt)
}
