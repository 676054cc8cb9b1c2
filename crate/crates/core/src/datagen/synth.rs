//! Procedural base-screen synthesizer: a jittered grid of sprites on a flat
//! background, emitted together with its exact detection annotations.

use super::sprites::{BACKGROUND, draw_sprite, random_instance_of, random_kind};
use crate::model::{Control, DetectionSet, Raster};
use rand::Rng;
use rand_chacha::ChaCha8Rng;

/// Grid pitch; one cell can hold any sprite from the bank plus jitter room.
/// The pitch is rectangular so control density approaches a real page: the
/// matcher reads identity from neighborhood context, and sparse layouts make
/// every neighbor list churn whenever anything moves.
const CELL_W: u32 = 128;
const CELL_H: u32 = 72;
/// Outer margin around the grid.
const MARGIN: u32 = 12;
/// Probability that a grid cell holds a control.
const FILL_PERCENT: u32 = 86;
/// Zones span this many grid cells per axis, placed on a fixed lattice.
const ZONE_SPAN: u32 = 3;
/// Probability that a cell takes its zone's dominant kind instead of a
/// fresh draw. Real pages cluster like controls (icon toolbars, form
/// columns, button rows), so neighborhoods are kind-correlated.
const ZONE_BIAS: u32 = 80;

/// A synthesized screenshot with ground-truth annotations.
#[derive(Debug, Clone)]
pub struct BaseScreen {
    pub img: Raster,
    pub dets: DetectionSet,
}

/// Synthesize one base screen. The canvas must be at least one grid cell
/// plus margins (152x96).
pub fn synthesize_base(canvas: (u32, u32), rng: &mut ChaCha8Rng) -> BaseScreen {
    let (w, h) = canvas;
    assert!(
        w >= CELL_W + 2 * MARGIN && h >= CELL_H + 2 * MARGIN,
        "canvas {w}x{h} is smaller than one {CELL_W}x{CELL_H} grid cell"
    );
    let cols = (w - 2 * MARGIN) / CELL_W;
    let rows = (h - 2 * MARGIN) / CELL_H;
    let zone_cols = cols.div_ceil(ZONE_SPAN);
    let zone_rows = rows.div_ceil(ZONE_SPAN);
    let dominant_kinds: Vec<_> = (0..zone_cols * zone_rows)
        .map(|_| random_kind(rng))
        .collect();
    let mut img = Raster::from_pixel(w, h, image::Rgb(BACKGROUND));
    let mut placed: Vec<(crate::model::BBox, &'static str, Option<String>)> = Vec::new();
    let mut boxes = Vec::new();

    // Two passes: a sparse one for layout variety, then a forced pass over
    // leading cells if the first left the screen nearly empty.
    for forced in [false, true] {
        if forced && boxes.len() >= 4 {
            break;
        }
        for row in 0..rows {
            for col in 0..cols {
                if forced && boxes.len() >= 4 {
                    break;
                }
                if !forced && rng.gen_range(0..100) >= FILL_PERCENT {
                    continue;
                }
                let cell_x = MARGIN + col * CELL_W;
                let cell_y = MARGIN + row * CELL_H;
                if forced
                    && boxes
                        .iter()
                        .any(|b: &crate::model::BBox| b.x1 >= cell_x && b.x1 < cell_x + CELL_W && b.y1 >= cell_y && b.y1 < cell_y + CELL_H)
                {
                    continue;
                }
                let zone = ((row / ZONE_SPAN) * zone_cols + col / ZONE_SPAN) as usize;
                let kind = if rng.gen_range(0..100) < ZONE_BIAS {
                    dominant_kinds[zone]
                } else {
                    random_kind(rng)
                };
                let inst = random_instance_of(rng, kind);
                let x = cell_x + rng.gen_range(2..=CELL_W - inst.width - 2);
                let y = cell_y + rng.gen_range(2..=CELL_H - inst.height - 2);
                draw_sprite(&mut img, x, y, &inst);
                let bbox =
                    crate::model::BBox::new(x, y, x + inst.width, y + inst.height).unwrap();
                boxes.push(bbox);
                placed.push((bbox, inst.category().as_str(), inst.text()));
            }
        }
    }

    // Reading order, then sequential ids.
    placed.sort_by_key(|(b, _, _)| (b.y1, b.x1, b.x2, b.y2));
    let controls: Vec<Control> = placed
        .into_iter()
        .enumerate()
        .map(|(i, (bbox, category, text))| Control {
            id: i as u32,
            bbox,
            category: category.parse().expect("sprite categories are valid"),
            text,
        })
        .collect();
    let dets = DetectionSet::new(w, h, controls).expect("synthesized layout is valid");
    BaseScreen { img, dets }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;

    #[test]
    fn layout_is_within_bounds_and_non_overlapping() {
        let mut rng = ChaCha8Rng::seed_from_u64(17);
        let base = synthesize_base((1024, 768), &mut rng);
        let controls = base.dets.controls();
        assert!(controls.len() >= 10, "only {} controls", controls.len());
        for (i, a) in controls.iter().enumerate() {
            assert!(a.bbox.x2 <= 1024 && a.bbox.y2 <= 768);
            for b in &controls[i + 1..] {
                assert_eq!(
                    a.bbox.intersection_area(&b.bbox),
                    0,
                    "{} overlaps {}",
                    a.id,
                    b.id
                );
            }
        }
    }

    #[test]
    fn controls_sit_on_an_untouched_background() {
        let mut rng = ChaCha8Rng::seed_from_u64(23);
        let base = synthesize_base((600, 400), &mut rng);
        let inside = |x: u32, y: u32| {
            base.dets
                .controls()
                .iter()
                .any(|c| x >= c.bbox.x1 && x < c.bbox.x2 && y >= c.bbox.y1 && y < c.bbox.y2)
        };
        for y in 0..400 {
            for x in 0..600 {
                let px = base.img.get_pixel(x, y).0;
                if inside(x, y) {
                    assert_ne!(px, BACKGROUND, "background pixel inside control at ({x},{y})");
                } else {
                    assert_eq!(px, BACKGROUND, "stray paint at ({x},{y})");
                }
            }
        }
    }

    #[test]
    fn same_seed_reproduces_the_same_screen() {
        let a = synthesize_base((800, 600), &mut ChaCha8Rng::seed_from_u64(99));
        let b = synthesize_base((800, 600), &mut ChaCha8Rng::seed_from_u64(99));
        assert_eq!(a.img, b.img);
        assert_eq!(
            serde_json::to_string(&a.dets).unwrap(),
            serde_json::to_string(&b.dets).unwrap()
        );
    }

    #[test]
    fn ids_follow_reading_order() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let base = synthesize_base((1024, 768), &mut rng);
        let controls = base.dets.controls();
        for pair in controls.windows(2) {
            assert!(
                (pair[0].bbox.y1, pair[0].bbox.x1) <= (pair[1].bbox.y1, pair[1].bbox.x1),
                "reading order violated"
            );
        }
    }
}
