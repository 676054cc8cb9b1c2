//! Core domain types: bounding boxes, control categories, detection sets, and
//! the geometric primitives (Euclidean bbox distance, IOU) everything else is
//! built on.

use serde::{Deserialize, Serialize};
use std::fmt;
use std::str::FromStr;
use thiserror::Error;

/// Row-major RGB8 screenshot buffer used throughout the pipeline.
pub type Raster = image::RgbImage;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum ModelError {
    #[error("invalid bbox [{0}, {1}, {2}, {3}]: coordinates must satisfy x1 < x2 and y1 < y2")]
    InvalidBBox(u32, u32, u32, u32),
    #[error("unknown control category `{0}`")]
    UnknownCategory(String),
    #[error("control ids must be strictly increasing: id {id} at position {position}")]
    NonIncreasingIds { id: u32, position: usize },
    #[error("control {id} bbox {bbox} exceeds image bounds {width}x{height}")]
    OutOfBounds {
        id: u32,
        bbox: BBox,
        width: u32,
        height: u32,
    },
}

/// Axis-aligned pixel rectangle with exclusive lower-right corner.
/// Invariant: `x1 < x2` and `y1 < y2`, enforced at construction.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(into = "[u32; 4]", try_from = "[u32; 4]")]
pub struct BBox {
    pub x1: u32,
    pub y1: u32,
    pub x2: u32,
    pub y2: u32,
}

impl BBox {
    pub fn new(x1: u32, y1: u32, x2: u32, y2: u32) -> Result<Self, ModelError> {
        if x1 >= x2 || y1 >= y2 {
            return Err(ModelError::InvalidBBox(x1, y1, x2, y2));
        }
        Ok(BBox { x1, y1, x2, y2 })
    }

    pub fn width(&self) -> u32 {
        self.x2 - self.x1
    }

    pub fn height(&self) -> u32 {
        self.y2 - self.y1
    }

    pub fn area(&self) -> u64 {
        u64::from(self.width()) * u64::from(self.height())
    }

    /// Overlapping rectangle of `self` and `other`, if any.
    pub fn intersection(&self, other: &BBox) -> Option<BBox> {
        let x1 = self.x1.max(other.x1);
        let y1 = self.y1.max(other.y1);
        let x2 = self.x2.min(other.x2);
        let y2 = self.y2.min(other.y2);
        (x1 < x2 && y1 < y2).then_some(BBox { x1, y1, x2, y2 })
    }

    pub fn intersection_area(&self, other: &BBox) -> u64 {
        self.intersection(other).map_or(0, |b| b.area())
    }

    /// True when `self` and `other` overlap after growing `other` by `margin`
    /// pixels on every side. Used for collision checks during placement.
    pub fn intersects_expanded(&self, other: &BBox, margin: u32) -> bool {
        let ox1 = other.x1.saturating_sub(margin);
        let oy1 = other.y1.saturating_sub(margin);
        let ox2 = other.x2.saturating_add(margin);
        let oy2 = other.y2.saturating_add(margin);
        self.x1 < ox2 && ox1 < self.x2 && self.y1 < oy2 && oy1 < self.y2
    }

    pub fn contains(&self, other: &BBox) -> bool {
        self.x1 <= other.x1 && self.y1 <= other.y1 && self.x2 >= other.x2 && self.y2 >= other.y2
    }
}

impl fmt::Display for BBox {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "[{}, {}, {}, {}]", self.x1, self.y1, self.x2, self.y2)
    }
}

impl From<BBox> for [u32; 4] {
    fn from(b: BBox) -> Self {
        [b.x1, b.y1, b.x2, b.y2]
    }
}

impl TryFrom<[u32; 4]> for BBox {
    type Error = ModelError;

    fn try_from(v: [u32; 4]) -> Result<Self, Self::Error> {
        BBox::new(v[0], v[1], v[2], v[3])
    }
}

/// Distance between two boxes treated as points in 4-D coordinate space.
pub fn euclidean_distance(a: &BBox, b: &BBox) -> f64 {
    let d = |p: u32, q: u32| {
        let diff = f64::from(p) - f64::from(q);
        diff * diff
    };
    (d(a.x1, b.x1) + d(a.y1, b.y1) + d(a.x2, b.x2) + d(a.y2, b.y2)).sqrt()
}

/// Intersection over union of two boxes, in `[0, 1]`.
pub fn iou(a: &BBox, b: &BBox) -> f64 {
    let inter = a.intersection_area(b);
    if inter == 0 {
        return 0.0;
    }
    let union = a.area() + b.area() - inter;
    inter as f64 / union as f64
}

macro_rules! categories {
    ($($variant:ident => $label:literal),+ $(,)?) => {
        /// The 24 UI control classes a detector can assign.
        #[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
        pub enum ControlCategory {
            $(#[serde(rename = $label)] $variant),+
        }

        impl ControlCategory {
            pub const ALL: &'static [ControlCategory] = &[$(ControlCategory::$variant),+];

            pub fn as_str(&self) -> &'static str {
                match self {
                    $(ControlCategory::$variant => $label),+
                }
            }
        }

        impl FromStr for ControlCategory {
            type Err = ModelError;

            fn from_str(s: &str) -> Result<Self, Self::Err> {
                match s {
                    $($label => Ok(ControlCategory::$variant),)+
                    other => Err(ModelError::UnknownCategory(other.to_string())),
                }
            }
        }
    };
}

categories! {
    Icon => "ICON",
    Dropdown => "DROPDOWN",
    Button => "BUTTON",
    Menu => "MENU",
    Input => "INPUT",
    List => "LIST",
    Tabbar => "TABBAR",
    Table => "TABLE",
    RadioSelected => "RADIO_SELECTED",
    RadioUnselected => "RADIO_UNSELECTED",
    CheckboxUnchecked => "CHECKBOX_UNCHECKED",
    CheckboxChecked => "CHECKBOX_CHECKED",
    Tree => "TREE",
    Image => "IMAGE",
    Text => "TEXT",
    LabelOfTextArea => "LABEL_OF_TEXT_AREA",
    DescriptionList => "DESCRIPTION_LIST",
    Legend => "LEGEND",
    HorizontalAxis => "HORIZONTAL_AXIS",
    Chart => "CHART",
    PlotTitle => "PLOT_TITLE",
    Graph => "GRAPH",
    VerticalAxis => "VERTICAL_AXIS",
    DateArea => "DATE_AREA",
}

impl ControlCategory {
    /// Text-bearing classes participate in the text-similarity gate.
    pub fn is_text(&self) -> bool {
        matches!(self, ControlCategory::Text)
    }
}

impl fmt::Display for ControlCategory {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

/// A single detected UI control.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Control {
    pub id: u32,
    pub bbox: BBox,
    pub category: ControlCategory,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub text: Option<String>,
}

/// All controls detected in one screenshot, ordered by strictly increasing id,
/// with every bbox inside the declared image bounds.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "DetectionSetRepr", into = "DetectionSetRepr")]
pub struct DetectionSet {
    image_width: u32,
    image_height: u32,
    controls: Vec<Control>,
}

#[derive(Serialize, Deserialize)]
struct DetectionSetRepr {
    image_width: u32,
    image_height: u32,
    controls: Vec<Control>,
}

impl From<DetectionSet> for DetectionSetRepr {
    fn from(d: DetectionSet) -> Self {
        DetectionSetRepr {
            image_width: d.image_width,
            image_height: d.image_height,
            controls: d.controls,
        }
    }
}

impl TryFrom<DetectionSetRepr> for DetectionSet {
    type Error = ModelError;

    fn try_from(r: DetectionSetRepr) -> Result<Self, Self::Error> {
        DetectionSet::new(r.image_width, r.image_height, r.controls)
    }
}

impl DetectionSet {
    pub fn new(
        image_width: u32,
        image_height: u32,
        controls: Vec<Control>,
    ) -> Result<Self, ModelError> {
        let mut prev: Option<u32> = None;
        for (position, c) in controls.iter().enumerate() {
            if prev.is_some_and(|p| c.id <= p) {
                return Err(ModelError::NonIncreasingIds {
                    id: c.id,
                    position,
                });
            }
            prev = Some(c.id);
            if c.bbox.x2 > image_width || c.bbox.y2 > image_height {
                return Err(ModelError::OutOfBounds {
                    id: c.id,
                    bbox: c.bbox,
                    width: image_width,
                    height: image_height,
                });
            }
        }
        Ok(DetectionSet {
            image_width,
            image_height,
            controls,
        })
    }

    pub fn image_width(&self) -> u32 {
        self.image_width
    }

    pub fn image_height(&self) -> u32 {
        self.image_height
    }

    pub fn controls(&self) -> &[Control] {
        &self.controls
    }

    pub fn len(&self) -> usize {
        self.controls.len()
    }

    pub fn is_empty(&self) -> bool {
        self.controls.is_empty()
    }

    /// Position of the control with the given id, if present.
    pub fn index_of(&self, id: u32) -> Option<usize> {
        self.controls.binary_search_by_key(&id, |c| c.id).ok()
    }

    pub fn by_id(&self, id: u32) -> Option<&Control> {
        self.index_of(id).map(|i| &self.controls[i])
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn bb(x1: u32, y1: u32, x2: u32, y2: u32) -> BBox {
        BBox::new(x1, y1, x2, y2).unwrap()
    }

    #[test]
    fn bbox_rejects_degenerate_rectangles() {
        assert!(BBox::new(5, 5, 5, 10).is_err());
        assert!(BBox::new(5, 5, 10, 5).is_err());
        assert!(BBox::new(10, 5, 5, 10).is_err());
        assert!(BBox::new(0, 0, 1, 1).is_ok());
    }

    #[test]
    fn distance_of_shifted_corner_is_five() {
        // 3-4-5 triangle split across the two top-left coordinates.
        let a = bb(0, 0, 10, 10);
        let b = bb(3, 4, 10, 10);
        assert_eq!(euclidean_distance(&a, &b), 5.0);
    }

    #[test]
    fn distance_of_identical_boxes_is_zero() {
        let a = bb(7, 9, 20, 31);
        assert_eq!(euclidean_distance(&a, &a), 0.0);
    }

    #[test]
    fn iou_hand_cases() {
        let a = bb(0, 0, 10, 10);
        assert_eq!(iou(&a, &a), 1.0);
        assert_eq!(iou(&a, &bb(20, 20, 30, 30)), 0.0);
        // Half-overlapping congruent squares: 50 / (100 + 100 - 50).
        let third = iou(&a, &bb(5, 0, 15, 10));
        assert!((third - 1.0 / 3.0).abs() < 1e-12);
    }

    #[test]
    fn iou_ignores_touching_edges() {
        assert_eq!(iou(&bb(0, 0, 10, 10), &bb(10, 0, 20, 10)), 0.0);
    }

    #[test]
    fn category_labels_round_trip() {
        assert_eq!(ControlCategory::ALL.len(), 24);
        for cat in ControlCategory::ALL {
            assert_eq!(cat.as_str().parse::<ControlCategory>().unwrap(), *cat);
        }
        assert!("WIDGET".parse::<ControlCategory>().is_err());
    }

    #[test]
    fn detection_set_enforces_increasing_ids() {
        let c = |id| Control {
            id,
            bbox: bb(0, 0, 5, 5),
            category: ControlCategory::Icon,
            text: None,
        };
        assert!(DetectionSet::new(100, 100, vec![c(0), c(1), c(5)]).is_ok());
        let err = DetectionSet::new(100, 100, vec![c(0), c(2), c(2)]).unwrap_err();
        assert!(matches!(err, ModelError::NonIncreasingIds { id: 2, position: 2 }));
        assert!(DetectionSet::new(100, 100, vec![c(3), c(1)]).is_err());
    }

    #[test]
    fn detection_set_enforces_image_bounds() {
        let c = Control {
            id: 0,
            bbox: bb(90, 90, 101, 100),
            category: ControlCategory::Button,
            text: None,
        };
        let err = DetectionSet::new(100, 100, vec![c]).unwrap_err();
        assert!(matches!(err, ModelError::OutOfBounds { id: 0, .. }));
    }

    #[test]
    fn index_lookup_by_id() {
        let c = |id| Control {
            id,
            bbox: bb(0, 0, 5, 5),
            category: ControlCategory::Icon,
            text: None,
        };
        let d = DetectionSet::new(50, 50, vec![c(2), c(7), c(9)]).unwrap();
        assert_eq!(d.index_of(7), Some(1));
        assert_eq!(d.index_of(8), None);
        assert_eq!(d.by_id(9).unwrap().id, 9);
    }

    fn arb_bbox(max: u32) -> impl Strategy<Value = BBox> {
        (0..max - 1, 0..max - 1).prop_flat_map(move |(x1, y1)| {
            (x1 + 1..=max, y1 + 1..=max)
                .prop_map(move |(x2, y2)| BBox { x1, y1, x2, y2 })
        })
    }

    proptest! {
        #[test]
        fn distance_is_a_metric(a in arb_bbox(200), b in arb_bbox(200), c in arb_bbox(200)) {
            let ab = euclidean_distance(&a, &b);
            let ba = euclidean_distance(&b, &a);
            prop_assert_eq!(ab, ba);
            prop_assert!(ab >= 0.0);
            prop_assert_eq!(euclidean_distance(&a, &a), 0.0);
            // Triangle inequality with float headroom.
            let ac = euclidean_distance(&a, &c);
            let cb = euclidean_distance(&c, &b);
            prop_assert!(ab <= ac + cb + 1e-9);
        }

        #[test]
        fn iou_is_symmetric_and_bounded(a in arb_bbox(200), b in arb_bbox(200)) {
            let ab = iou(&a, &b);
            prop_assert_eq!(ab, iou(&b, &a));
            prop_assert!((0.0..=1.0).contains(&ab));
            prop_assert_eq!(iou(&a, &a), 1.0);
        }

        #[test]
        fn bbox_serde_round_trips(a in arb_bbox(500)) {
            let json = serde_json::to_string(&a).unwrap();
            let back: BBox = serde_json::from_str(&json).unwrap();
            prop_assert_eq!(a, back);
        }
    }
}
