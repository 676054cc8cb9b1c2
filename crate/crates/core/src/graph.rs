//! Per-image control graph: every control is a node, connected to its K
//! nearest neighbors by Euclidean distance between the bbox coordinate
//! 4-vectors. Neighbor lists are exact top-K (full sort, ties broken by
//! ascending control id), so graph construction is order-independent and
//! deterministic.

use crate::model::{Control, DetectionSet, euclidean_distance};
use serde_json::json;
use std::collections::BTreeSet;
use thiserror::Error;

#[derive(Debug, Error, Clone, PartialEq, Eq)]
pub enum GraphError {
    #[error("neighbor count K must be at least 1")]
    InvalidK,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct GraphParams {
    pub k: usize,
}

impl GraphParams {
    pub fn new(k: usize) -> Result<Self, GraphError> {
        if k == 0 {
            return Err(GraphError::InvalidK);
        }
        Ok(GraphParams { k })
    }
}

impl Default for GraphParams {
    fn default() -> Self {
        GraphParams { k: 8 }
    }
}

/// Undirected control graph of one screenshot.
///
/// Node order equals detection order. `neighbors` holds, per node, the
/// indices of its K nearest neighbors ordered by ascending distance (ties by
/// ascending control id); the edge set is the deduplicated union of all
/// neighbor links and is closed under endpoint swap.
#[derive(Debug, Clone, PartialEq)]
pub struct UiGraph {
    controls: Vec<Control>,
    neighbors: Vec<Vec<usize>>,
    edges: BTreeSet<(usize, usize)>,
}

impl UiGraph {
    pub fn node_count(&self) -> usize {
        self.controls.len()
    }

    pub fn node(&self, index: usize) -> &Control {
        &self.controls[index]
    }

    pub fn nodes(&self) -> &[Control] {
        &self.controls
    }

    /// Neighbor indices of a node, nearest first.
    pub fn neighbors_of(&self, index: usize) -> &[usize] {
        &self.neighbors[index]
    }

    pub fn neighbor_ids(&self, index: usize) -> Vec<u32> {
        self.neighbors[index]
            .iter()
            .map(|&n| self.controls[n].id)
            .collect()
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    pub fn has_edge(&self, a: usize, b: usize) -> bool {
        self.edges.contains(&(a.min(b), a.max(b)))
    }

    /// Adjacency dump for debugging; not a stability contract.
    pub fn to_adjacency_json(&self) -> serde_json::Value {
        let nodes: Vec<_> = self
            .controls
            .iter()
            .map(|c| {
                json!({
                    "id": c.id,
                    "bbox": [c.bbox.x1, c.bbox.y1, c.bbox.x2, c.bbox.y2],
                    "category": c.category.as_str(),
                })
            })
            .collect();
        let neighbors: Vec<_> = (0..self.node_count())
            .map(|i| json!({ "id": self.controls[i].id, "neighbors": self.neighbor_ids(i) }))
            .collect();
        json!({ "nodes": nodes, "neighbors": neighbors })
    }
}

/// Ids of the K controls nearest to `dets.controls()[target]`, nearest first.
/// Returns fewer than K when the image has fewer than K other controls.
pub fn nearest_neighbors(dets: &DetectionSet, target: usize, k: usize) -> Vec<u32> {
    nearest_neighbor_indices(dets.controls(), target, k)
        .into_iter()
        .map(|i| dets.controls()[i].id)
        .collect()
}

fn nearest_neighbor_indices(controls: &[Control], target: usize, k: usize) -> Vec<usize> {
    let target_box = &controls[target].bbox;
    let mut order: Vec<usize> = (0..controls.len()).filter(|&i| i != target).collect();
    order.sort_by(|&a, &b| {
        euclidean_distance(target_box, &controls[a].bbox)
            .total_cmp(&euclidean_distance(target_box, &controls[b].bbox))
            .then(controls[a].id.cmp(&controls[b].id))
    });
    order.truncate(k);
    order
}

pub fn build_graph(dets: &DetectionSet, params: &GraphParams) -> UiGraph {
    let controls = dets.controls().to_vec();
    let neighbors: Vec<Vec<usize>> = (0..controls.len())
        .map(|i| nearest_neighbor_indices(&controls, i, params.k))
        .collect();
    let mut edges = BTreeSet::new();
    for (i, list) in neighbors.iter().enumerate() {
        for &n in list {
            edges.insert((i.min(n), i.max(n)));
        }
    }
    UiGraph {
        controls,
        neighbors,
        edges,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::model::{BBox, ControlCategory};
    use proptest::prelude::*;

    fn control(id: u32, x: u32) -> Control {
        Control {
            id,
            bbox: BBox::new(x, 0, x + 1, 1).unwrap(),
            category: ControlCategory::Icon,
            text: None,
        }
    }

    fn dets(controls: Vec<Control>) -> DetectionSet {
        DetectionSet::new(10_000, 10_000, controls).unwrap()
    }

    #[test]
    fn params_reject_zero_k() {
        assert_eq!(GraphParams::new(0), Err(GraphError::InvalidK));
        assert_eq!(GraphParams::default().k, 8);
    }

    #[test]
    fn collinear_boxes_pick_the_closer_neighbor() {
        // Unit boxes at x = 0, 10, 30: the offset-10 box is nearest to the first.
        let d = dets(vec![control(0, 0), control(1, 10), control(2, 30)]);
        assert_eq!(nearest_neighbors(&d, 0, 1), vec![1]);
        assert_eq!(nearest_neighbors(&d, 0, 2), vec![1, 2]);
    }

    #[test]
    fn equidistant_neighbors_tie_break_by_id() {
        // Boxes at x = 10 and x = 30 are equidistant from the box at x = 20.
        let d = dets(vec![control(0, 10), control(1, 20), control(2, 30)]);
        assert_eq!(nearest_neighbors(&d, 1, 1), vec![0]);
    }

    #[test]
    fn k_larger_than_graph_returns_everyone() {
        let d = dets(vec![control(0, 0), control(1, 5)]);
        assert_eq!(nearest_neighbors(&d, 0, 8), vec![1]);
    }

    #[test]
    fn single_node_graph_has_no_edges() {
        let g = build_graph(&dets(vec![control(0, 0)]), &GraphParams { k: 3 });
        assert_eq!(g.node_count(), 1);
        assert_eq!(g.edge_count(), 0);
        assert!(g.neighbors_of(0).is_empty());
    }

    #[test]
    fn neighbor_links_become_undirected_edges() {
        let d = dets(vec![control(0, 0), control(1, 10), control(2, 30)]);
        let g = build_graph(&d, &GraphParams { k: 1 });
        // 0 -> 1, 1 -> 0, 2 -> 1 collapse to two undirected edges.
        assert_eq!(g.edge_count(), 2);
        assert!(g.has_edge(0, 1) && g.has_edge(1, 0));
        assert!(g.has_edge(1, 2) && g.has_edge(2, 1));
        assert!(!g.has_edge(0, 2));
    }

    fn arb_scene() -> impl Strategy<Value = (DetectionSet, usize)> {
        let control = (0u32..400, 0u32..400, 1u32..60, 1u32..60)
            .prop_map(|(x1, y1, w, h)| (x1, y1, x1 + w, y1 + h));
        (proptest::collection::vec(control, 1..50), 1usize..=10).prop_map(|(boxes, k)| {
            let controls: Vec<Control> = boxes
                .into_iter()
                .enumerate()
                .map(|(i, (x1, y1, x2, y2))| Control {
                    id: i as u32,
                    bbox: BBox::new(x1, y1, x2, y2).unwrap(),
                    category: ControlCategory::Icon,
                    text: None,
                })
                .collect();
            (DetectionSet::new(500, 500, controls).unwrap(), k)
        })
    }

    proptest! {
        // Oracle: the neighbor list must equal the truncated full sort by
        // (distance, id), independently recomputed here.
        #[test]
        fn neighbor_lists_match_full_sort_oracle((d, k) in arb_scene()) {
            let g = build_graph(&d, &GraphParams { k });
            for i in 0..d.len() {
                let mut expected: Vec<usize> = (0..d.len()).filter(|&j| j != i).collect();
                expected.sort_by(|&a, &b| {
                    euclidean_distance(&d.controls()[i].bbox, &d.controls()[a].bbox)
                        .total_cmp(&euclidean_distance(
                            &d.controls()[i].bbox,
                            &d.controls()[b].bbox,
                        ))
                        .then(d.controls()[a].id.cmp(&d.controls()[b].id))
                });
                expected.truncate(k);
                prop_assert_eq!(g.neighbors_of(i), &expected[..]);
                prop_assert_eq!(g.neighbors_of(i).len(), k.min(d.len() - 1));
            }
        }

        #[test]
        fn edges_are_symmetric_and_construction_is_deterministic((d, k) in arb_scene()) {
            let g = build_graph(&d, &GraphParams { k });
            for a in 0..g.node_count() {
                for b in 0..g.node_count() {
                    prop_assert_eq!(g.has_edge(a, b), g.has_edge(b, a));
                }
                for &n in g.neighbors_of(a) {
                    prop_assert!(g.has_edge(a, n));
                }
            }
            prop_assert_eq!(build_graph(&d, &GraphParams { k }), g);
        }
    }
}
