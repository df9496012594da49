//! Balanced K-way edge-cut partitioning.
//!
//! Parts are grown one at a time by breadth-first search from a
//! pseudo-peripheral root until they hold their share of the nodes, which
//! gives a perfectly balanced start. A Kernighan-Lin style refinement then
//! applies single-node moves and pairwise swaps with strictly positive cut
//! gain, rejecting any move that would push a part above the size cap
//! `floor((1 + epsilon) * n / K)`.

use std::collections::VecDeque;

use rand::seq::SliceRandom;

use crate::error::{Result, SdssError};
use crate::graph::Graph;
use crate::rng::rng_from_seed;

const MAX_PASSES: usize = 16;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Partition {
    pub labels: Vec<usize>,
    pub parts: usize,
    pub cut: usize,
    /// Edge cut after the initial growth and after every accepted move.
    pub cut_history: Vec<usize>,
}

impl Partition {
    pub fn part_sizes(&self) -> Vec<usize> {
        part_sizes(&self.labels, self.parts)
    }
}

pub fn part_sizes(labels: &[usize], parts: usize) -> Vec<usize> {
    let mut sizes = vec![0; parts];
    for &l in labels {
        sizes[l] += 1;
    }
    sizes
}

/// `K * max|C_i| / n`.
pub fn balance_ratio(labels: &[usize], parts: usize) -> f64 {
    let max = part_sizes(labels, parts).into_iter().max().unwrap_or(0);
    (parts * max) as f64 / labels.len() as f64
}

/// Largest part size allowed by `K * size / n <= 1 + epsilon`.
pub fn max_part_size(n: usize, parts: usize, epsilon: f64) -> usize {
    // the slack absorbs rounding in (1 + eps) * n / K for exactly representable bounds
    ((1.0 + epsilon) * n as f64 / parts as f64 + 1e-9).floor() as usize
}

/// Whether any K-way partition of `n` nodes can meet the balance bound.
pub fn balance_feasible(n: usize, parts: usize, epsilon: f64) -> bool {
    max_part_size(n, parts, epsilon) >= n.div_ceil(parts)
}

/// Partitions `g` into `parts` nonempty sets satisfying the epsilon balance bound.
pub fn partition(g: &Graph, parts: usize, epsilon: f64, seed: u64) -> Result<Partition> {
    let n = g.num_nodes();
    if parts == 0 || parts > n {
        return Err(SdssError::InvalidParameter(format!(
            "partition needs 1 <= K <= n, got K = {parts}, n = {n}"
        )));
    }
    if !(epsilon > 0.0 && epsilon < 1.0) {
        return Err(SdssError::InvalidParameter(format!(
            "balance epsilon must be in (0, 1), got {epsilon}"
        )));
    }
    if !balance_feasible(n, parts, epsilon) {
        return Err(SdssError::InfeasibleBalance {
            n,
            k: parts,
            epsilon,
        });
    }

    let mut labels = grow_parts(g, parts, seed);
    let cap = max_part_size(n, parts, epsilon);
    let mut state = RefineState::new(g, &labels, parts);
    let mut cut_history = vec![state.cut];
    for _ in 0..MAX_PASSES {
        let moved = state.move_pass(g, &mut labels, cap, &mut cut_history)
            + state.swap_pass(g, &mut labels, &mut cut_history);
        if moved == 0 {
            break;
        }
    }
    debug_assert_eq!(state.cut, g.edge_cut(&labels));
    debug_assert!(part_sizes(&labels, parts)
        .iter()
        .all(|&s| s >= 1 && s <= cap));
    Ok(Partition {
        cut: state.cut,
        labels,
        parts,
        cut_history,
    })
}

/// Sequential BFS growth. Part `p` receives exactly `n / K` nodes (plus one for
/// the first `n % K` parts).
fn grow_parts(g: &Graph, parts: usize, seed: u64) -> Vec<usize> {
    let n = g.num_nodes();
    let mut order: Vec<usize> = (0..n).collect();
    order.shuffle(&mut rng_from_seed(seed));

    let mut labels = vec![usize::MAX; n];
    let mut cursor = 0;
    let mut queue = VecDeque::new();
    for p in 0..parts {
        let target = n / parts + usize::from(p < n % parts);
        let mut size = 0;
        queue.clear();
        while size < target {
            let v = match queue.pop_front() {
                Some(v) => v,
                None => {
                    while labels[order[cursor]] != usize::MAX {
                        cursor += 1;
                    }
                    peripheral_root(g, order[cursor], &labels)
                }
            };
            if labels[v] != usize::MAX {
                continue;
            }
            labels[v] = p;
            size += 1;
            for &u in g.neighbors(v) {
                if labels[u] == usize::MAX {
                    queue.push_back(u);
                }
            }
        }
    }
    labels
}

/// Last node reached by a BFS from `start` over unassigned nodes.
fn peripheral_root(g: &Graph, start: usize, labels: &[usize]) -> usize {
    let mut seen = vec![false; g.num_nodes()];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    let mut last = start;
    while let Some(v) = queue.pop_front() {
        last = v;
        for &u in g.neighbors(v) {
            if !seen[u] && labels[u] == usize::MAX {
                seen[u] = true;
                queue.push_back(u);
            }
        }
    }
    last
}

struct RefineState {
    parts: usize,
    sizes: Vec<usize>,
    cut: usize,
    /// Scratch: neighbor count per part for one node.
    counts: Vec<usize>,
}

impl RefineState {
    fn new(g: &Graph, labels: &[usize], parts: usize) -> Self {
        RefineState {
            parts,
            sizes: part_sizes(labels, parts),
            cut: g.edge_cut(labels),
            counts: vec![0; parts],
        }
    }

    fn fill_counts(&mut self, g: &Graph, labels: &[usize], v: usize) {
        self.counts.iter_mut().for_each(|c| *c = 0);
        for &u in g.neighbors(v) {
            self.counts[labels[u]] += 1;
        }
    }

    /// Moves single boundary nodes to the neighboring part with the best
    /// positive gain, when the destination has room.
    fn move_pass(
        &mut self,
        g: &Graph,
        labels: &mut [usize],
        cap: usize,
        history: &mut Vec<usize>,
    ) -> usize {
        let mut moved = 0;
        for v in 0..g.num_nodes() {
            let from = labels[v];
            if self.sizes[from] <= 1 {
                continue;
            }
            self.fill_counts(g, labels, v);
            let internal = self.counts[from];
            let mut best: Option<(usize, usize)> = None;
            for q in 0..self.parts {
                if q == from || self.sizes[q] + 1 > cap || self.counts[q] <= internal {
                    continue;
                }
                let gain = self.counts[q] - internal;
                if best.is_none_or(|(_, g)| gain > g) {
                    best = Some((q, gain));
                }
            }
            if let Some((to, gain)) = best {
                labels[v] = to;
                self.sizes[from] -= 1;
                self.sizes[to] += 1;
                self.cut -= gain;
                history.push(self.cut);
                moved += 1;
            }
        }
        moved
    }

    /// Exchanges a boundary node with a node of a neighboring part when the
    /// combined gain `D_a + D_b - 2 w(a, b)` is positive. Sizes are unchanged.
    fn swap_pass(&mut self, g: &Graph, labels: &mut [usize], history: &mut Vec<usize>) -> usize {
        let n = g.num_nodes();
        let mut members: Vec<Vec<usize>> = vec![Vec::new(); self.parts];
        for v in 0..n {
            members[labels[v]].push(v);
        }
        let mut moved = 0;
        for a in 0..n {
            let pa = labels[a];
            self.fill_counts(g, labels, a);
            let a_counts = self.counts.clone();
            for q in 0..self.parts {
                if q == pa || a_counts[q] == 0 {
                    continue;
                }
                // gain of moving a alone into q
                let da = a_counts[q] as i64 - a_counts[pa] as i64;
                let mut best: Option<(usize, usize, i64)> = None;
                for (slot, &b) in members[q].iter().enumerate() {
                    let mut to_pa = 0i64;
                    let mut in_q = 0i64;
                    for &u in g.neighbors(b) {
                        if labels[u] == pa {
                            to_pa += 1;
                        } else if labels[u] == q {
                            in_q += 1;
                        }
                    }
                    let w = i64::from(g.has_edge(a, b));
                    let gain = da + (to_pa - in_q) - 2 * w;
                    if gain > 0 && best.is_none_or(|(_, _, g)| gain > g) {
                        best = Some((slot, b, gain));
                    }
                }
                if let Some((slot, b, gain)) = best {
                    labels[a] = q;
                    labels[b] = pa;
                    members[q][slot] = a;
                    let pos = members[pa]
                        .iter()
                        .position(|&x| x == a)
                        .expect("a is a member of its part");
                    members[pa][pos] = b;
                    self.cut -= gain as usize;
                    history.push(self.cut);
                    moved += 1;
                    break;
                }
            }
        }
        moved
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn path(n: usize) -> Graph {
        let edges: Vec<_> = (1..n).map(|i| (i - 1, i)).collect();
        Graph::new(n, &edges).unwrap()
    }

    /// Minimum cut over all 2-partitions meeting the balance bound.
    fn brute_force_balanced_cut(g: &Graph, epsilon: f64) -> usize {
        let n = g.num_nodes();
        let cap = max_part_size(n, 2, epsilon);
        (1u32..(1 << n) - 1)
            .filter_map(|mask| {
                let labels: Vec<usize> = (0..n).map(|i| ((mask >> i) & 1) as usize).collect();
                let ones = mask.count_ones() as usize;
                (ones <= cap && n - ones <= cap).then(|| g.edge_cut(&labels))
            })
            .min()
            .unwrap()
    }

    #[test]
    fn disjoint_triangles_split_cleanly() {
        let g = Graph::new(6, &[(0, 1), (1, 2), (0, 2), (3, 4), (4, 5), (3, 5)]).unwrap();
        for seed in 0..10 {
            let p = partition(&g, 2, 0.1, seed).unwrap();
            assert_eq!(p.cut, 0);
            assert_eq!(p.labels[0], p.labels[1]);
            assert_eq!(p.labels[1], p.labels[2]);
            assert_ne!(p.labels[0], p.labels[3]);
        }
    }

    #[test]
    fn path_of_six_matches_exhaustive_optimum() {
        let g = path(6);
        let best = brute_force_balanced_cut(&g, 0.1);
        assert_eq!(best, 1);
        for seed in 0..20 {
            assert_eq!(
                partition(&g, 2, 0.1, seed).unwrap().cut,
                best,
                "seed {seed}"
            );
        }
    }

    #[test]
    fn four_nodes_two_parts_cap() {
        assert_eq!(max_part_size(4, 2, 0.1), 2);
        let g = Graph::new(4, &[(0, 1), (1, 2), (2, 3), (0, 3), (0, 2)]).unwrap();
        let p = partition(&g, 2, 0.1, 1).unwrap();
        assert!(p.part_sizes().iter().all(|&s| s <= 2));
    }

    #[test]
    fn cut_history_is_nonincreasing() {
        let ds = crate::dataset::generate_planted_partition(&crate::dataset::PlantedPartition {
            blocks: 4,
            per_block: 40,
            p_in: 0.15,
            p_out: 0.02,
            ..Default::default()
        })
        .unwrap();
        for seed in 0..5 {
            let p = partition(&ds.graph, 4, 0.1, seed).unwrap();
            for w in p.cut_history.windows(2) {
                assert!(w[1] < w[0]);
            }
            assert_eq!(p.cut, ds.graph.edge_cut(&p.labels));
        }
    }

    #[test]
    fn infeasible_bound_is_an_error() {
        // 3 parts of 5 nodes need a part of 2: 3 * 2 / 5 = 1.2 > 1.1
        let g = path(5);
        assert!(!balance_feasible(5, 3, 0.1));
        assert!(matches!(
            partition(&g, 3, 0.1, 0),
            Err(SdssError::InfeasibleBalance { .. })
        ));
    }

    #[test]
    fn every_part_is_used() {
        let g = Graph::new(9, &[]).unwrap();
        let p = partition(&g, 3, 0.1, 4).unwrap();
        assert_eq!(p.part_sizes(), vec![3, 3, 3]);
    }

    #[test]
    fn argument_validation() {
        let g = path(4);
        assert!(partition(&g, 5, 0.1, 0).is_err());
        assert!(partition(&g, 2, 0.0, 0).is_err());
        assert!(partition(&g, 2, 1.0, 0).is_err());
    }
}
