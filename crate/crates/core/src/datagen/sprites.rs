//! Procedural control sprites.
//!
//! Every sprite is drawn from a dark border/structure color and a light fill
//! color, plus a per-pixel texture in [-NOISE_AMPLITUDE, +NOISE_AMPLITUDE]
//! keyed by `(instance seed, render width, render height, x, y)`. Channel
//! ranges keep every sprite pixel strictly darker than [`BACKGROUND`] in all
//! channels, so a sprite never blends into the canvas.
//!
//! Instances of the same kind share their structural geometry (like controls
//! sharing a widget style on a real page) and differ in palette, noise, and
//! small seeded accents. Identity-sensitive comparisons therefore see two
//! distinct same-kind controls as near misses rather than as unrelated
//! patches, while pixel-exact comparison still distinguishes them.

use crate::model::ControlCategory;
use crate::model::Raster;
use rand::Rng;

/// Flat canvas color; all sprite pixels stay below it in every channel.
pub const BACKGROUND: [u8; 3] = [240, 242, 245];

/// Per-channel texture amplitude.
pub const NOISE_AMPLITUDE: i32 = 8;

const BORDER_MIN: u8 = 25;
const BORDER_MAX: u8 = 85;
const FILL_MIN: u8 = 150;
const FILL_MAX: u8 = 225;

const WIDE_WIDTHS: [u32; 5] = [56, 72, 88, 104, 120];
const WIDE_HEIGHTS: [u32; 3] = [28, 36, 44];
const SQUARE_SIZES: [u32; 3] = [28, 36, 44];
const PANEL_WIDTHS: [u32; 4] = [72, 88, 104, 120];
const PANEL_HEIGHTS: [u32; 3] = [36, 44, 52];

const WORDS: [&str; 20] = [
    "save", "open", "edit", "view", "close", "apply", "cancel", "search", "name", "date", "file",
    "home", "user", "settings", "help", "info", "total", "next", "back", "done",
];

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SpriteKind {
    Button,
    TextLabel,
    Icon,
    Input,
    Checkbox,
    Radio,
    Dropdown,
    Image,
    Menu,
    Chart,
}

impl SpriteKind {
    pub const ALL: [SpriteKind; 10] = [
        SpriteKind::Button,
        SpriteKind::TextLabel,
        SpriteKind::Icon,
        SpriteKind::Input,
        SpriteKind::Checkbox,
        SpriteKind::Radio,
        SpriteKind::Dropdown,
        SpriteKind::Image,
        SpriteKind::Menu,
        SpriteKind::Chart,
    ];

    fn size_pools(self) -> (&'static [u32], &'static [u32]) {
        match self {
            SpriteKind::Icon | SpriteKind::Checkbox | SpriteKind::Radio => {
                (&SQUARE_SIZES, &SQUARE_SIZES)
            }
            SpriteKind::Image | SpriteKind::Chart => (&PANEL_WIDTHS, &PANEL_HEIGHTS),
            _ => (&WIDE_WIDTHS, &WIDE_HEIGHTS),
        }
    }
}

/// A concrete control to paint: identity (seed + palette) plus render size.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct SpriteInstance {
    pub kind: SpriteKind,
    pub width: u32,
    pub height: u32,
    pub border: [u8; 3],
    pub fill: [u8; 3],
    pub seed: u64,
}

impl SpriteInstance {
    pub fn category(&self) -> ControlCategory {
        match self.kind {
            SpriteKind::Button => ControlCategory::Button,
            SpriteKind::TextLabel => ControlCategory::Text,
            SpriteKind::Icon => ControlCategory::Icon,
            SpriteKind::Input => ControlCategory::Input,
            SpriteKind::Checkbox => {
                if self.flag() {
                    ControlCategory::CheckboxChecked
                } else {
                    ControlCategory::CheckboxUnchecked
                }
            }
            SpriteKind::Radio => {
                if self.flag() {
                    ControlCategory::RadioSelected
                } else {
                    ControlCategory::RadioUnselected
                }
            }
            SpriteKind::Dropdown => ControlCategory::Dropdown,
            SpriteKind::Image => ControlCategory::Image,
            SpriteKind::Menu => ControlCategory::Menu,
            SpriteKind::Chart => ControlCategory::Chart,
        }
    }

    /// Seeded words for text-bearing controls; `None` elsewhere.
    pub fn text(&self) -> Option<String> {
        if self.kind != SpriteKind::TextLabel {
            return None;
        }
        let count = 1 + (mix(self.seed ^ 0x7e57) % 3) as usize;
        let words: Vec<&str> = (0..count)
            .map(|i| WORDS[(mix(self.seed.wrapping_add(i as u64 + 1)) % WORDS.len() as u64) as usize])
            .collect();
        Some(words.join(" "))
    }

    /// Checked/selected state for two-state kinds.
    fn flag(&self) -> bool {
        mix(self.seed ^ 0xf1a6) & 1 == 1
    }
}

/// splitmix64 finalizer; the workhorse behind all seeded sprite detail.
fn mix(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Texture offsets for one pixel. Keyed by render size so that redrawing or
/// rescaling an instance re-textures every pixel.
fn noise3(seed: u64, w: u32, h: u32, x: u32, y: u32) -> [i32; 3] {
    let key = ((w as u64) << 48) | ((h as u64) << 32) | ((x as u64) << 16) | y as u64;
    let v = mix(seed ^ mix(key));
    let span = (2 * NOISE_AMPLITUDE + 1) as u64;
    [
        (v % span) as i32 - NOISE_AMPLITUDE,
        ((v >> 16) % span) as i32 - NOISE_AMPLITUDE,
        ((v >> 32) % span) as i32 - NOISE_AMPLITUDE,
    ]
}

fn in_border(dx: u32, dy: u32, w: u32, h: u32, t: u32) -> bool {
    dx < t || dy < t || dx >= w - t || dy >= h - t
}

/// Base color of one sprite pixel before texture is applied.
fn base_color(inst: &SpriteInstance, dx: u32, dy: u32) -> [u8; 3] {
    let (w, h) = (inst.width, inst.height);
    let s = inst.seed;
    let structure = match inst.kind {
        SpriteKind::Button => {
            if in_border(dx, dy, w, h, 2) {
                true
            } else {
                // Centered label bar, proportional to the render size.
                let bar_w = w * 55 / 100;
                let bar_x = (w - bar_w) / 2;
                let bar_h = h / 5 + 1;
                let bar_y = (h - bar_h) / 2;
                dx >= bar_x && dx < bar_x + bar_w && dy >= bar_y && dy < bar_y + bar_h
            }
        }
        SpriteKind::TextLabel => {
            // Borderless rows of dashes with seeded gaps.
            let in_band = dy >= 2 && dy < h - 2 && (dy - 2) % 7 < 3;
            let pad = dx >= 2 && dx < w - 2;
            in_band && pad && mix(s ^ ((dy / 7) as u64) << 8 ^ (dx / 9) as u64) % 4 != 0
        }
        SpriteKind::Icon => {
            if in_border(dx, dy, w, h, 1) {
                true
            } else {
                // Shared glyph blob (a centered disc) plus an accent dot at
                // each quadrant center; identity comes from the palette.
                let cx = w as i64 / 2;
                let cy = h as i64 / 2;
                let r = w.min(h) as i64 * 32 / 100;
                let d2 = (dx as i64 - cx).pow(2) + (dy as i64 - cy).pow(2);
                if d2 <= r * r {
                    true
                } else {
                    let qw = (w / 2).max(1);
                    let qh = (h / 2).max(1);
                    let dot_x = (dx / qw).min(1) * qw + qw / 2;
                    let dot_y = (dy / qh).min(1) * qh + qh / 2;
                    dx.abs_diff(dot_x) <= 1 && dy.abs_diff(dot_y) <= 1
                }
            }
        }
        SpriteKind::Input => {
            if in_border(dx, dy, w, h, 2) {
                true
            } else {
                // Entered-text bar, vertically centered.
                let bar_w = w.saturating_sub(10) * 45 / 100;
                let bar_y = h / 2 - 2;
                dx >= 5 && dx < 5 + bar_w && dy >= bar_y && dy < bar_y + 4
            }
        }
        SpriteKind::Checkbox => {
            if in_border(dx, dy, w, h, 2) {
                true
            } else if inst.flag() {
                dx >= w / 4 && dx < w - w / 4 && dy >= h / 4 && dy < h - h / 4
            } else {
                false
            }
        }
        SpriteKind::Radio => {
            let cx = w as i64 / 2;
            let cy = h as i64 / 2;
            let r = (w.min(h) as i64 / 2) - 2;
            let d2 = (dx as i64 - cx).pow(2) + (dy as i64 - cy).pow(2);
            let ring = d2 <= r * r && d2 >= (r - 2).max(0).pow(2);
            let dot = inst.flag() && d2 <= (r / 2).pow(2);
            ring || dot
        }
        SpriteKind::Dropdown => {
            if in_border(dx, dy, w, h, 2) {
                true
            } else {
                // Selected-value bar on the left, down-arrow on the right.
                let bar_w = w.saturating_sub(h + 8) * 40 / 100;
                let bar_y = h / 2 - 2;
                let bar = dx >= 5 && dx < 5 + bar_w && dy >= bar_y && dy < bar_y + 4;
                let apex_x = (w - h / 2) as i64;
                let spread = (2 * h as i64 / 3) - dy as i64;
                let arrow = dy >= h / 3
                    && dy < 2 * h / 3
                    && (dx as i64 - apex_x).abs() <= spread.max(0);
                bar || arrow
            }
        }
        SpriteKind::Image => in_border(dx, dy, w, h, 2),
        SpriteKind::Menu => {
            // Borderless row of four item blocks.
            let items = 4;
            let slot = (w / items).max(1);
            let within = dx % slot;
            let item = dx / slot;
            let item_w = slot * 55 / 100;
            dy >= h / 3 && dy < 2 * h / 3 && item < items && within >= 3 && within < 3 + item_w
        }
        SpriteKind::Chart => {
            if in_border(dx, dy, w, h, 1) || dy >= h - 4 {
                true
            } else {
                // Four-bar chart rising from the bottom axis; bar heights are
                // the seeded part.
                let bars = 4;
                let slot = (w - 4) / bars;
                let bar = (dx.saturating_sub(2)) / slot.max(1);
                let within = (dx.saturating_sub(2)) % slot.max(1);
                let bar_h = (h - 8) * (45 + (mix(s ^ (8 + u64::from(bar))) % 30) as u32) / 100;
                bar < bars && within >= 1 && within + 2 < slot && dy >= h - 4 - bar_h
            }
        }
    };
    if structure {
        inst.border
    } else if inst.kind == SpriteKind::Image {
        // Mosaic interior: a fixed diagonal shading gradient over the fill,
        // so thumbnails differ in hue but share their luminance layout.
        let cx = (dx * 4 / w).min(3) as i32;
        let cy = (dy * 4 / h).min(3) as i32;
        let shade = 10 * ((cx + cy) % 4);
        [
            (inst.fill[0] as i32 - shade) as u8,
            (inst.fill[1] as i32 - shade) as u8,
            (inst.fill[2] as i32 - shade) as u8,
        ]
    } else {
        inst.fill
    }
}

/// Paint `inst` with its top-left corner at `(x, y)`. The caller must ensure
/// the sprite fits inside the canvas.
pub fn draw_sprite(img: &mut Raster, x: u32, y: u32, inst: &SpriteInstance) {
    assert!(
        x + inst.width <= img.width() && y + inst.height <= img.height(),
        "sprite exceeds canvas"
    );
    for dy in 0..inst.height {
        for dx in 0..inst.width {
            let base = base_color(inst, dx, dy);
            let n = noise3(inst.seed, inst.width, inst.height, dx, dy);
            let px = [
                (base[0] as i32 + n[0]).clamp(10, 233) as u8,
                (base[1] as i32 + n[1]).clamp(10, 233) as u8,
                (base[2] as i32 + n[2]).clamp(10, 233) as u8,
            ];
            img.put_pixel(x + dx, y + dy, image::Rgb(px));
        }
    }
}

/// Kind frequencies, loosely modeled on how often each widget appears on a
/// typical page (buttons, icons, and inputs dominate; toggles are rare).
const KIND_WEIGHTS: [(SpriteKind, u32); 10] = [
    (SpriteKind::Button, 18),
    (SpriteKind::TextLabel, 12),
    (SpriteKind::Icon, 14),
    (SpriteKind::Input, 12),
    (SpriteKind::Checkbox, 6),
    (SpriteKind::Radio, 5),
    (SpriteKind::Dropdown, 9),
    (SpriteKind::Image, 8),
    (SpriteKind::Menu, 8),
    (SpriteKind::Chart, 8),
];

/// The sprite kind that renders controls of a given category; `None` for
/// categories the bank has no sprite for.
pub fn kind_of_category(category: ControlCategory) -> Option<SpriteKind> {
    Some(match category {
        ControlCategory::Button => SpriteKind::Button,
        ControlCategory::Text => SpriteKind::TextLabel,
        ControlCategory::Icon => SpriteKind::Icon,
        ControlCategory::Input => SpriteKind::Input,
        ControlCategory::CheckboxChecked | ControlCategory::CheckboxUnchecked => {
            SpriteKind::Checkbox
        }
        ControlCategory::RadioSelected | ControlCategory::RadioUnselected => SpriteKind::Radio,
        ControlCategory::Dropdown => SpriteKind::Dropdown,
        ControlCategory::Image => SpriteKind::Image,
        ControlCategory::Menu => SpriteKind::Menu,
        ControlCategory::Chart => SpriteKind::Chart,
        _ => return None,
    })
}

/// Draw a kind from the page-frequency distribution.
pub fn random_kind<R: Rng>(rng: &mut R) -> SpriteKind {
    let total: u32 = KIND_WEIGHTS.iter().map(|(_, w)| w).sum();
    let mut roll = rng.gen_range(0..total);
    for &(kind, weight) in &KIND_WEIGHTS {
        if roll < weight {
            return kind;
        }
        roll -= weight;
    }
    SpriteKind::Button
}

/// Fresh instance with random kind, size, palette, and detail seed.
pub fn random_instance<R: Rng>(rng: &mut R) -> SpriteInstance {
    let kind = random_kind(rng);
    random_instance_of(rng, kind)
}

pub fn random_instance_of<R: Rng>(rng: &mut R, kind: SpriteKind) -> SpriteInstance {
    let (widths, heights) = kind.size_pools();
    let width = widths[rng.gen_range(0..widths.len())];
    let height = heights[rng.gen_range(0..heights.len())];
    let border = [
        rng.gen_range(BORDER_MIN..=BORDER_MAX),
        rng.gen_range(BORDER_MIN..=BORDER_MAX),
        rng.gen_range(BORDER_MIN..=BORDER_MAX),
    ];
    let fill = [
        rng.gen_range(FILL_MIN..=FILL_MAX),
        rng.gen_range(FILL_MIN..=FILL_MAX),
        rng.gen_range(FILL_MIN..=FILL_MAX),
    ];
    SpriteInstance {
        kind,
        width,
        height,
        border,
        fill,
        seed: rng.gen(),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::SeedableRng;
    use rand_chacha::ChaCha8Rng;

    fn canvas(w: u32, h: u32) -> Raster {
        Raster::from_pixel(w, h, image::Rgb(BACKGROUND))
    }

    fn all_instances(seed: u64) -> Vec<SpriteInstance> {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        SpriteKind::ALL
            .iter()
            .map(|&k| random_instance_of(&mut rng, k))
            .collect()
    }

    #[test]
    fn sprites_never_contain_background_pixels() {
        for inst in all_instances(7) {
            let mut img = canvas(inst.width, inst.height);
            draw_sprite(&mut img, 0, 0, &inst);
            for p in img.pixels() {
                assert!(
                    p.0[0] < BACKGROUND[0] && p.0[1] < BACKGROUND[1] && p.0[2] < BACKGROUND[2],
                    "pixel {:?} not darker than background",
                    p.0
                );
            }
        }
    }

    #[test]
    fn drawing_is_deterministic_and_position_independent() {
        for inst in all_instances(21) {
            let mut at_origin = canvas(inst.width + 20, inst.height + 20);
            draw_sprite(&mut at_origin, 0, 0, &inst);
            let mut offset = canvas(inst.width + 20, inst.height + 20);
            draw_sprite(&mut offset, 13, 9, &inst);
            for dy in 0..inst.height {
                for dx in 0..inst.width {
                    assert_eq!(
                        at_origin.get_pixel(dx, dy),
                        offset.get_pixel(13 + dx, 9 + dy),
                        "{:?} differs at ({dx}, {dy})",
                        inst.kind
                    );
                }
            }
        }
    }

    #[test]
    fn distinct_instances_share_almost_no_pixels() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut a = random_instance_of(&mut rng, SpriteKind::Button);
        let mut b = random_instance_of(&mut rng, SpriteKind::Button);
        a.width = 88;
        a.height = 36;
        b.width = 88;
        b.height = 36;
        let mut img_a = canvas(88, 36);
        let mut img_b = canvas(88, 36);
        draw_sprite(&mut img_a, 0, 0, &a);
        draw_sprite(&mut img_b, 0, 0, &b);
        let equal = img_a
            .pixels()
            .zip(img_b.pixels())
            .filter(|(p, q)| p == q)
            .count();
        // Texture keying makes agreement a ~1/4913 per-pixel event.
        assert!(equal < 20, "{equal} coincident pixels of {}", 88 * 36);
    }

    #[test]
    fn same_instance_at_another_size_is_retextured_everywhere() {
        let mut rng = ChaCha8Rng::seed_from_u64(11);
        let inst = random_instance_of(&mut rng, SpriteKind::Image);
        let shrunk = SpriteInstance {
            width: inst.width - 16,
            height: inst.height - 8,
            ..inst
        };
        let mut img_a = canvas(inst.width, inst.height);
        let mut img_b = canvas(inst.width, inst.height);
        draw_sprite(&mut img_a, 0, 0, &inst);
        draw_sprite(&mut img_b, 0, 0, &shrunk);
        let overlap_equal = (0..shrunk.height)
            .flat_map(|y| (0..shrunk.width).map(move |x| (x, y)))
            .filter(|&(x, y)| img_a.get_pixel(x, y) == img_b.get_pixel(x, y))
            .count();
        assert!(overlap_equal < 10, "{overlap_equal} pixels survived resize");
    }

    #[test]
    fn two_state_kinds_expose_their_state_as_category() {
        let mut seen = std::collections::BTreeSet::new();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..40 {
            let inst = random_instance_of(&mut rng, SpriteKind::Checkbox);
            seen.insert(inst.category().as_str());
        }
        assert!(seen.contains("CHECKBOX_CHECKED") && seen.contains("CHECKBOX_UNCHECKED"));
    }

    #[test]
    fn text_is_seeded_and_only_on_text_labels() {
        let mut rng = ChaCha8Rng::seed_from_u64(9);
        let label = random_instance_of(&mut rng, SpriteKind::TextLabel);
        let text = label.text().unwrap();
        assert!(!text.is_empty());
        assert_eq!(label.text().unwrap(), text);
        let button = random_instance_of(&mut rng, SpriteKind::Button);
        assert_eq!(button.text(), None);
    }
}
