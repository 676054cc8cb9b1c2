//! Cross-image node matching by neighborhood similarity.
//!
//! A pair of nodes is scored not by where the controls sit on the canvas but
//! by how similar their graph neighborhoods are, which makes the score
//! invariant to global translation (scrolled, cut, or shifted screens). The
//! recursion follows neighbor pairs outward, sharing one visited record per
//! top-level pair so it terminates, and falls back to the direct visual
//! similarity of a pair once either node has already been traversed.
//!
//! Scores live in `[0, 1]`. A node pair evaluates to the best one-to-one
//! greedy alignment of its neighbor pairs, normalized by the larger
//! neighbor-list length, so two nodes whose neighborhoods agree perfectly
//! score exactly 1.0 — in particular, matching an image against itself
//! produces a complete matching at any threshold below one.

use crate::graph::UiGraph;
use crate::model::{BBox, Raster};
use crate::similarity::{
    PerceptualHash, SimilarityParams, average_hash, base_similarity_hashed, hash_difference,
    text_similarity,
};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

/// Largest per-axis size ratio at which two controls may still correspond.
/// The 8x8 hash is scale-normalized, so without this gate a control resized
/// in place would keep both its appearance score and its neighborhood score.
pub const MAX_DIM_RATIO: f64 = 1.15;

/// One matched node pair with its neighborhood score.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PairScore {
    pub source: u32,
    pub target: u32,
    pub score: f64,
}

/// Outcome of matching two control graphs. `pairs` maps source ids to target
/// ids injectively; every node appears either in a pair or in its side's
/// unmatched list.
#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct MatchResult {
    pub pairs: Vec<PairScore>,
    pub unmatched_source: Vec<u32>,
    pub unmatched_target: Vec<u32>,
}

impl MatchResult {
    pub fn target_of(&self, source: u32) -> Option<u32> {
        self.pairs
            .iter()
            .find(|p| p.source == source)
            .map(|p| p.target)
    }
}

/// Tracks which nodes a single top-level pair evaluation has traversed,
/// per side.
#[derive(Debug)]
pub struct VisitedRecord {
    left: Vec<bool>,
    right: Vec<bool>,
}

impl VisitedRecord {
    pub fn new(left_nodes: usize, right_nodes: usize) -> Self {
        VisitedRecord {
            left: vec![false; left_nodes],
            right: vec![false; right_nodes],
        }
    }

    /// Clear all marks so the record can serve another top-level pair.
    pub fn reset(&mut self) {
        self.left.fill(false);
        self.right.fill(false);
    }
}

/// Neighbor lists fit this many cells on the stack; larger cross-products
/// (K > 10) spill to the heap.
const CELL_STACK: usize = 100;

/// Immutable scoring context: both graphs plus precomputed patch hashes,
/// the direct-similarity matrix, and per-pair cell evaluation orders,
/// shareable across threads.
pub struct ScoreContext<'a> {
    ga: &'a UiGraph,
    gb: &'a UiGraph,
    params: SimilarityParams,
    hashes_a: Vec<PerceptualHash>,
    hashes_b: Vec<PerceptualHash>,
    base: Vec<f64>,
    /// For each same-category `(i, j)`: the neighbor cross-product cells in
    /// ascending direct-similarity order, ties broken toward size-compatible
    /// pairs, packed as `same_category << 15 | pi << 7 | qi`. The order
    /// depends only on static node data, so it is shared by every traversal.
    orders: Vec<Box<[u16]>>,
}

fn pack_cell(same_category: bool, pi: usize, qi: usize) -> u16 {
    debug_assert!(pi < 128 && qi < 128);
    (u16::from(same_category) << 15) | ((pi as u16) << 7) | qi as u16
}

impl<'a> ScoreContext<'a> {
    pub fn new(
        ga: &'a UiGraph,
        img_a: &Raster,
        gb: &'a UiGraph,
        img_b: &Raster,
        params: &SimilarityParams,
    ) -> Self {
        let hashes_a: Vec<_> = ga
            .nodes()
            .iter()
            .map(|c| average_hash(img_a, c.bbox))
            .collect();
        let hashes_b: Vec<_> = gb
            .nodes()
            .iter()
            .map(|c| average_hash(img_b, c.bbox))
            .collect();
        let m = gb.node_count();
        let mut base = vec![0.0; ga.node_count() * m];
        for (i, a) in ga.nodes().iter().enumerate() {
            for (j, b) in gb.nodes().iter().enumerate() {
                base[i * m + j] =
                    base_similarity_hashed(a, hashes_a[i], b, hashes_b[j], params);
            }
        }
        let dim_penalty = |p: usize, q: usize| {
            let (pb, qb) = (&ga.node(p).bbox, &gb.node(q).bbox);
            let ratio = |x: u32, y: u32| f64::from(x.max(y)) / f64::from(x.min(y));
            ratio(pb.width(), qb.width()) + ratio(pb.height(), qb.height())
        };
        let mut orders: Vec<Box<[u16]>> = Vec::with_capacity(ga.node_count() * m);
        let mut cells: Vec<(f64, f64, usize, usize)> = Vec::new();
        for (i, a) in ga.nodes().iter().enumerate() {
            for (j, b) in gb.nodes().iter().enumerate() {
                if a.category != b.category {
                    orders.push(Box::default());
                    continue;
                }
                let na = ga.neighbors_of(i);
                let nb = gb.neighbors_of(j);
                cells.clear();
                for (pi, &p) in na.iter().enumerate() {
                    for (qi, &q) in nb.iter().enumerate() {
                        cells.push((base[p * m + q], dim_penalty(p, q), pi, qi));
                    }
                }
                // Within a similarity tier, geometry-compatible pairs recurse
                // first: a restyled control keeps its box, so its twin cell
                // wins the traversal over look-alike cross-pairings that
                // would otherwise mark the nodes it needs.
                cells.sort_unstable_by(|a, b| {
                    a.0.total_cmp(&b.0)
                        .then(a.1.total_cmp(&b.1))
                        .then(a.2.cmp(&b.2))
                        .then(a.3.cmp(&b.3))
                });
                orders.push(
                    cells
                        .iter()
                        .map(|&(_, _, pi, qi)| {
                            let same =
                                ga.node(na[pi]).category == gb.node(nb[qi]).category;
                            pack_cell(same, pi, qi)
                        })
                        .collect(),
                );
            }
        }
        ScoreContext {
            ga,
            gb,
            params: *params,
            hashes_a,
            hashes_b,
            base,
            orders,
        }
    }

    /// Direct (appearance-level) similarity of nodes `i` and `j`.
    pub fn base(&self, i: usize, j: usize) -> f64 {
        self.base[i * self.gb.node_count() + j]
    }

    /// Whether the pair itself is visually admissible as a correspondence:
    /// hash difference within H, text similarity within TS for TEXT pairs,
    /// and compatible bbox dimensions.
    pub fn root_compatible(&self, i: usize, j: usize) -> bool {
        let a = self.ga.node(i);
        let b = self.gb.node(j);
        if hash_difference(self.hashes_a[i], self.hashes_b[j]) > self.params.max_hash_diff {
            return false;
        }
        if a.category.is_text()
            && text_similarity(a.text.as_deref(), b.text.as_deref()) < self.params.min_text_sim
        {
            return false;
        }
        dims_compatible(&a.bbox, &b.bbox)
    }

    /// Neighborhood similarity score for a fresh evaluation of `(i, j)`.
    pub fn score_pair(&self, i: usize, j: usize) -> f64 {
        let mut visited = VisitedRecord::new(self.ga.node_count(), self.gb.node_count());
        self.neighbor_similarity(i, j, &mut visited)
    }

    /// Recursive neighborhood similarity.
    ///
    /// Base case: once either node has been traversed, the pair contributes
    /// its direct similarity. Otherwise both nodes are marked and every
    /// neighbor pair is evaluated (zero without recursion when categories
    /// differ), in ascending order of direct similarity, ties toward
    /// size-compatible pairs then earlier list positions: pairs that already
    /// look alike lose nothing by short-circuiting later, while
    /// low-similarity same-category pairs are exactly where traversal adds
    /// information — a recolored control in an intact neighborhood redeems
    /// its slot through context before a look-alike cross-pairing can mark
    /// the nodes it needs. The resulting
    /// score matrix is reduced by a greedy one-to-one alignment (highest
    /// score first, ties toward earlier list positions) normalized by the
    /// larger neighbor count. Nodes without neighbors fall back to direct
    /// similarity. Each non-base call permanently marks one fresh node per
    /// side, so the recursion always terminates.
    pub fn neighbor_similarity(&self, i: usize, j: usize, visited: &mut VisitedRecord) -> f64 {
        if visited.left[i] || visited.right[j] {
            return self.base(i, j);
        }
        visited.left[i] = true;
        visited.right[j] = true;

        let na = self.ga.neighbors_of(i);
        let nb = self.gb.neighbors_of(j);
        if na.is_empty() || nb.is_empty() {
            return self.base(i, j);
        }

        let order = &self.orders[i * self.gb.node_count() + j];
        let need = order.len();
        let mut stack_buf = [(0.0f64, 0usize, 0usize); CELL_STACK];
        let mut heap_buf = Vec::new();
        let cells: &mut [(f64, usize, usize)] = if need <= CELL_STACK {
            &mut stack_buf[..need]
        } else {
            heap_buf.resize(need, (0.0, 0, 0));
            &mut heap_buf
        };

        // Cells are visited in ascending direct similarity: traversal is
        // spent where appearance alone says the least, and look-alike pairs
        // short-circuit at their direct similarity.
        for (slot, &packed) in cells.iter_mut().zip(order.iter()) {
            let (pi, qi) = (usize::from((packed >> 7) & 0x7f), usize::from(packed & 0x7f));
            let score = if packed >> 15 == 1 {
                self.neighbor_similarity(na[pi], nb[qi], visited)
            } else {
                0.0
            };
            *slot = (score, pi, qi);
        }
        cells.sort_unstable_by(|a, b| {
            b.0.total_cmp(&a.0)
                .then(a.1.cmp(&b.1))
                .then(a.2.cmp(&b.2))
        });
        debug_assert!(na.len() <= 128 && nb.len() <= 128);
        let (mut used_p, mut used_q) = (0u128, 0u128);
        let mut total = 0.0;
        for &(score, pi, qi) in cells.iter() {
            if used_p & (1 << pi) == 0 && used_q & (1 << qi) == 0 {
                used_p |= 1 << pi;
                used_q |= 1 << qi;
                total += score;
            }
        }
        total / na.len().max(nb.len()) as f64
    }
}

fn dims_compatible(a: &BBox, b: &BBox) -> bool {
    let ratio = |x: u32, y: u32| f64::from(x.max(y)) / f64::from(x.min(y));
    ratio(a.width(), b.width()) < MAX_DIM_RATIO && ratio(a.height(), b.height()) < MAX_DIM_RATIO
}

/// Match the nodes of two control graphs.
///
/// Scores are computed for every same-category pair (computation is never
/// short-circuited by the appearance gates). A pair becomes a candidate when
/// its neighborhood score strictly exceeds NS and the pair is root-compatible;
/// candidates are then accepted greedily in order of descending score (ties by
/// ascending source id, then target id), each acceptance consuming both
/// endpoints, which resolves conflicts in favor of the higher-scoring pair.
pub fn assign_matches(
    ga: &UiGraph,
    img_a: &Raster,
    gb: &UiGraph,
    img_b: &Raster,
    params: &SimilarityParams,
) -> MatchResult {
    let ctx = ScoreContext::new(ga, img_a, gb, img_b, params);

    let same_category: Vec<(usize, usize)> = (0..ga.node_count())
        .flat_map(|i| (0..gb.node_count()).map(move |j| (i, j)))
        .filter(|&(i, j)| ga.node(i).category == gb.node(j).category)
        .collect();

    let mut candidates: Vec<(f64, usize, usize)> = same_category
        .par_iter()
        .map_init(
            || VisitedRecord::new(ga.node_count(), gb.node_count()),
            |visited, &(i, j)| {
                visited.reset();
                (ctx.neighbor_similarity(i, j, visited), i, j)
            },
        )
        .filter(|&(score, i, j)| score > params.min_neighbor_sim && ctx.root_compatible(i, j))
        .collect();

    candidates.sort_unstable_by(|a, b| {
        b.0.total_cmp(&a.0)
            .then(ga.node(a.1).id.cmp(&ga.node(b.1).id))
            .then(gb.node(a.2).id.cmp(&gb.node(b.2).id))
    });

    let mut used_left = vec![false; ga.node_count()];
    let mut used_right = vec![false; gb.node_count()];
    let mut pairs = Vec::new();
    for (score, i, j) in candidates {
        if !used_left[i] && !used_right[j] {
            used_left[i] = true;
            used_right[j] = true;
            pairs.push(PairScore {
                source: ga.node(i).id,
                target: gb.node(j).id,
                score,
            });
        }
    }
    pairs.sort_unstable_by_key(|p| p.source);

    let unmatched_source = (0..ga.node_count())
        .filter(|&i| !used_left[i])
        .map(|i| ga.node(i).id)
        .collect();
    let unmatched_target = (0..gb.node_count())
        .filter(|&j| !used_right[j])
        .map(|j| gb.node(j).id)
        .collect();

    MatchResult {
        pairs,
        unmatched_source,
        unmatched_target,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{GraphParams, build_graph};
    use crate::model::ControlCategory;
    use crate::testutil::{Scene, bb, scene};

    fn match_scenes(a: &Scene, b: &Scene, k: usize, params: &SimilarityParams) -> MatchResult {
        let ga = build_graph(&a.dets, &GraphParams { k });
        let gb = build_graph(&b.dets, &GraphParams { k });
        assign_matches(&ga, &a.img, &gb, &b.img, params)
    }

    /// Three-control layout with visually distinct patches.
    fn three_controls() -> Scene {
        scene(
            (300, 200),
            &[
                (0, ControlCategory::Button, bb(10, 10, 70, 40), 11),
                (1, ControlCategory::Button, bb(120, 10, 180, 40), 22),
                (2, ControlCategory::Icon, bb(10, 120, 40, 150), 33),
            ],
        )
    }

    #[test]
    fn identical_graphs_score_one_for_corresponding_nodes() {
        let s = three_controls();
        let ga = build_graph(&s.dets, &GraphParams { k: 2 });
        let gb = ga.clone();
        let ctx = ScoreContext::new(&ga, &s.img, &gb, &s.img, &SimilarityParams::default());
        for i in 0..ga.node_count() {
            assert_eq!(ctx.score_pair(i, i), 1.0, "node {i}");
        }
    }

    #[test]
    fn single_node_graphs_fall_back_to_direct_similarity() {
        let a = scene((100, 100), &[(0, ControlCategory::Image, bb(10, 10, 50, 50), 7)]);
        let b = scene((100, 100), &[(0, ControlCategory::Image, bb(30, 40, 70, 80), 7)]);
        let ga = build_graph(&a.dets, &GraphParams::default());
        let gb = build_graph(&b.dets, &GraphParams::default());
        let ctx = ScoreContext::new(&ga, &a.img, &gb, &b.img, &SimilarityParams::default());
        assert_eq!(ctx.score_pair(0, 0), 1.0);
    }

    #[test]
    fn self_match_is_complete_even_with_distinct_looking_controls() {
        let s = three_controls();
        for ns in [0.5, 0.8, 0.95, 0.999] {
            let params = SimilarityParams {
                min_neighbor_sim: ns,
                ..Default::default()
            };
            let result = match_scenes(&s, &s, 2, &params);
            assert_eq!(result.pairs.len(), 3, "ns={ns}");
            assert!(result.unmatched_source.is_empty());
            assert!(result.unmatched_target.is_empty());
            for p in &result.pairs {
                assert_eq!(p.source, p.target);
                assert_eq!(p.score, 1.0);
            }
        }
    }

    #[test]
    fn candidate_threshold_is_strict() {
        let s = three_controls();
        let exact = SimilarityParams {
            min_neighbor_sim: 1.0,
            ..Default::default()
        };
        let result = match_scenes(&s, &s, 2, &exact);
        assert!(result.pairs.is_empty());
        assert_eq!(result.unmatched_source.len(), 3);
        assert_eq!(result.unmatched_target.len(), 3);
    }

    #[test]
    fn category_mismatch_never_matches() {
        let a = scene((100, 100), &[(0, ControlCategory::Button, bb(10, 10, 50, 40), 5)]);
        let b = scene((100, 100), &[(0, ControlCategory::Input, bb(10, 10, 50, 40), 5)]);
        let result = match_scenes(&a, &b, 2, &SimilarityParams::default());
        assert!(result.pairs.is_empty());
        assert_eq!(result.unmatched_source, vec![0]);
        assert_eq!(result.unmatched_target, vec![0]);
    }

    #[test]
    fn recolored_control_is_unmatched_by_the_hash_gate() {
        let a = scene(
            (300, 200),
            &[
                (0, ControlCategory::Button, bb(10, 10, 70, 40), 11),
                (1, ControlCategory::Button, bb(120, 10, 180, 40), 22),
                (2, ControlCategory::Icon, bb(10, 120, 40, 150), 33),
            ],
        );
        // Same layout, but control 1 gets a completely different patch. Its
        // neighborhood still agrees, so only the root hash gate can unmatch it.
        let b = scene(
            (300, 200),
            &[
                (0, ControlCategory::Button, bb(10, 10, 70, 40), 11),
                (1, ControlCategory::Button, bb(120, 10, 180, 40), 99),
                (2, ControlCategory::Icon, bb(10, 120, 40, 150), 33),
            ],
        );
        // On a 3-node graph every node neighbors every other, so the recolor
        // drags its neighbors' context scores to ~0.5; relax NS so the gate,
        // not the context loss, is what unmatches control 1: its own score
        // clears the threshold but its hashes disagree.
        let relaxed = SimilarityParams {
            min_neighbor_sim: 0.45,
            ..Default::default()
        };
        let result = match_scenes(&a, &b, 2, &relaxed);
        assert_eq!(result.target_of(0), Some(0));
        assert_eq!(result.target_of(2), Some(2));
        assert_eq!(result.unmatched_source, vec![1]);
        assert_eq!(result.unmatched_target, vec![1]);
    }

    #[test]
    fn resized_control_is_unmatched_by_the_size_gate() {
        let a = scene(
            (300, 200),
            &[
                (0, ControlCategory::Button, bb(10, 10, 70, 40), 11),
                (1, ControlCategory::Button, bb(120, 10, 180, 40), 22),
                (2, ControlCategory::Icon, bb(10, 120, 40, 150), 33),
            ],
        );
        // Control 1 shrinks to 60% width/height; the patch keeps its structure
        // (noise is anchored to the bbox origin, close enough for the hash).
        let b = scene(
            (300, 200),
            &[
                (0, ControlCategory::Button, bb(10, 10, 70, 40), 11),
                (1, ControlCategory::Button, bb(120, 10, 156, 28), 22),
                (2, ControlCategory::Icon, bb(10, 120, 40, 150), 33),
            ],
        );
        let result = match_scenes(&a, &b, 2, &SimilarityParams::default());
        assert!(result.unmatched_source.contains(&1));
        assert!(result.unmatched_target.contains(&1));
    }

    #[test]
    fn dims_compatible_boundaries() {
        let base = bb(0, 0, 100, 40);
        assert!(dims_compatible(&base, &bb(0, 0, 100, 40)));
        assert!(dims_compatible(&base, &bb(0, 0, 110, 44)));
        // 0.8x and 1.3x resize factors fall outside the ratio bound.
        assert!(!dims_compatible(&base, &bb(0, 0, 80, 32)));
        assert!(!dims_compatible(&base, &bb(0, 0, 130, 52)));
        // One incompatible axis is enough.
        assert!(!dims_compatible(&base, &bb(0, 0, 100, 80)));
    }

    #[test]
    fn conflicting_candidates_consume_the_target_once() {
        // Sources 0 and 1 are pixel-identical buttons; the target keeps only
        // one. Both candidate pairs clear the (relaxed) threshold with equal
        // scores, so the deterministic tie rule must award the target to the
        // lower source id and leave the twin unmatched.
        let a = scene(
            (400, 200),
            &[
                (0, ControlCategory::Button, bb(10, 10, 70, 40), 11),
                (1, ControlCategory::Button, bb(200, 10, 260, 40), 11),
                (2, ControlCategory::Icon, bb(10, 120, 40, 150), 33),
                (3, ControlCategory::Icon, bb(200, 120, 230, 150), 44),
            ],
        );
        let b = scene(
            (400, 200),
            &[
                (0, ControlCategory::Button, bb(10, 10, 70, 40), 11),
                (2, ControlCategory::Icon, bb(10, 120, 40, 150), 33),
                (3, ControlCategory::Icon, bb(200, 120, 230, 150), 44),
            ],
        );
        let relaxed = SimilarityParams {
            min_neighbor_sim: 0.45,
            ..Default::default()
        };
        let result = match_scenes(&a, &b, 2, &relaxed);
        assert_eq!(result.target_of(0), Some(0));
        assert!(result.unmatched_source.contains(&1));
        // The target side must be fully consumed exactly once.
        let mut targets: Vec<u32> = result.pairs.iter().map(|p| p.target).collect();
        targets.sort_unstable();
        targets.dedup();
        assert_eq!(targets.len(), result.pairs.len());
    }

    #[test]
    fn matching_is_deterministic_and_injective() {
        let a = three_controls();
        let b = scene(
            (300, 200),
            &[
                (0, ControlCategory::Button, bb(10, 10, 70, 40), 11),
                (1, ControlCategory::Button, bb(120, 10, 180, 40), 22),
                (2, ControlCategory::Icon, bb(40, 120, 70, 150), 33),
            ],
        );
        let r1 = match_scenes(&a, &b, 2, &SimilarityParams::default());
        let r2 = match_scenes(&a, &b, 2, &SimilarityParams::default());
        assert_eq!(r1, r2);
        let mut targets: Vec<u32> = r1.pairs.iter().map(|p| p.target).collect();
        targets.sort_unstable();
        targets.dedup();
        assert_eq!(targets.len(), r1.pairs.len(), "targets must be unique");
        // Every node appears exactly once across pairs and unmatched lists.
        assert_eq!(r1.pairs.len() + r1.unmatched_source.len(), a.dets.len());
        assert_eq!(r1.pairs.len() + r1.unmatched_target.len(), b.dets.len());
    }

    #[test]
    fn scores_stay_in_unit_interval() {
        let a = three_controls();
        let ga = build_graph(&a.dets, &GraphParams { k: 2 });
        let ctx = ScoreContext::new(&ga, &a.img, &ga, &a.img, &SimilarityParams::default());
        for i in 0..3 {
            for j in 0..3 {
                let s = ctx.score_pair(i, j);
                assert!((0.0..=1.0).contains(&s), "score({i},{j}) = {s}");
            }
        }
    }
}
