//! Approximate nearest neighbours over descriptor rows.
//!
//! A small forest of randomised k-d trees searched best-bin-first with a
//! shared priority queue. The heap key is a true lower bound on the
//! distance (sum of squared splits crossed), so the search is exact
//! whenever the check budget is not exhausted; sets no larger than the
//! budget are scanned exhaustively.

use std::cmp::Reverse;
use std::collections::BinaryHeap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::keypoints::DESCRIPTOR_WIDTH;

const TREES: usize = 6;
const LEAF_SIZE: usize = 8;
/// Fixed build seed: matching must be reproducible run to run.
const BUILD_SEED: u64 = 0x6b64_666f_7265_7374;

fn check_budget(n: usize) -> usize {
    (n / 8).max(128)
}

enum TreeNode {
    Split { dim: usize, value: f64, left: u32, right: u32 },
    Leaf { start: u32, end: u32 },
}

struct Tree {
    nodes: Vec<TreeNode>,
    order: Vec<u32>,
}

pub(crate) struct NearestForest<'a> {
    data: &'a [f64],
    n: usize,
    trees: Vec<Tree>,
}

/// Two nearest neighbours of a query (squared distances).
#[derive(Debug, Clone, Copy)]
pub(crate) struct Neighbours {
    pub best: usize,
    pub best_d2: f64,
    pub second_d2: Option<f64>,
}

#[derive(Clone, Copy, PartialEq)]
struct HeapKey(f64);
impl Eq for HeapKey {}
impl PartialOrd for HeapKey {
    fn partial_cmp(&self, other: &Self) -> Option<std::cmp::Ordering> {
        Some(self.cmp(other))
    }
}
impl Ord for HeapKey {
    fn cmp(&self, other: &Self) -> std::cmp::Ordering {
        self.0.partial_cmp(&other.0).unwrap()
    }
}

impl<'a> NearestForest<'a> {
    /// `data` holds `n` rows of [`DESCRIPTOR_WIDTH`] values each.
    pub fn build(data: &'a [f64], n: usize) -> Self {
        assert_eq!(data.len(), n * DESCRIPTOR_WIDTH);
        let mut rng = ChaCha8Rng::seed_from_u64(BUILD_SEED);
        let trees = if n > check_budget(n) {
            (0..TREES).map(|_| build_tree(data, n, &mut rng)).collect()
        } else {
            Vec::new()
        };
        NearestForest { data, n, trees }
    }

    fn row(&self, i: usize) -> &[f64] {
        &self.data[i * DESCRIPTOR_WIDTH..(i + 1) * DESCRIPTOR_WIDTH]
    }

    /// Two nearest rows to `query`; `None` when the set is empty.
    pub fn top2(&self, query: &[f64], scratch: &mut QueryScratch) -> Option<Neighbours> {
        if self.n == 0 {
            return None;
        }
        if self.trees.is_empty() {
            return Some(self.exhaustive(query));
        }
        scratch.begin(self.n);
        let mut best = (usize::MAX, f64::INFINITY);
        let mut second = f64::INFINITY;
        let mut checked = 0usize;
        let budget = check_budget(self.n);

        let mut heap: BinaryHeap<Reverse<(HeapKey, u32, u32)>> = BinaryHeap::new();
        for t in 0..self.trees.len() {
            heap.push(Reverse((HeapKey(0.0), t as u32, 0)));
        }
        while let Some(Reverse((HeapKey(bound), t, node))) = heap.pop() {
            if bound >= second || checked >= budget {
                break;
            }
            let tree = &self.trees[t as usize];
            let mut cur = node;
            loop {
                match tree.nodes[cur as usize] {
                    TreeNode::Split { dim, value, left, right } => {
                        let diff = query[dim] - value;
                        let (near, far) = if diff <= 0.0 { (left, right) } else { (right, left) };
                        // The near branch inherits this entry's bound; the
                        // far branch additionally crosses this split.
                        let far_bound = bound + diff * diff;
                        if far_bound < second {
                            heap.push(Reverse((HeapKey(far_bound), t, far)));
                        }
                        cur = near;
                    }
                    TreeNode::Leaf { start, end } => {
                        for &idx in &tree.order[start as usize..end as usize] {
                            let idx = idx as usize;
                            if !scratch.visit(idx) {
                                continue;
                            }
                            checked += 1;
                            let d2 = dist2(query, self.row(idx));
                            if d2 < best.1 || (d2 == best.1 && idx < best.0) {
                                second = best.1;
                                best = (idx, d2);
                            } else if d2 < second {
                                second = d2;
                            }
                        }
                        break;
                    }
                }
            }
        }
        Some(Neighbours {
            best: best.0,
            best_d2: best.1,
            second_d2: if second.is_finite() { Some(second) } else { None },
        })
    }

    fn exhaustive(&self, query: &[f64]) -> Neighbours {
        let mut best = (usize::MAX, f64::INFINITY);
        let mut second = f64::INFINITY;
        for i in 0..self.n {
            let d2 = dist2(query, self.row(i));
            if d2 < best.1 {
                second = best.1;
                best = (i, d2);
            } else if d2 < second {
                second = d2;
            }
        }
        Neighbours {
            best: best.0,
            best_d2: best.1,
            second_d2: if second.is_finite() { Some(second) } else { None },
        }
    }
}

/// Per-query visited marks, reusable across queries without clearing.
pub(crate) struct QueryScratch {
    stamp: Vec<u32>,
    epoch: u32,
}

impl QueryScratch {
    pub fn new() -> Self {
        QueryScratch { stamp: Vec::new(), epoch: 0 }
    }

    fn begin(&mut self, n: usize) {
        if self.stamp.len() < n {
            self.stamp.resize(n, 0);
        }
        self.epoch += 1;
        if self.epoch == 0 {
            self.stamp.iter_mut().for_each(|s| *s = 0);
            self.epoch = 1;
        }
    }

    /// True the first time `idx` is seen in the current query.
    fn visit(&mut self, idx: usize) -> bool {
        if self.stamp[idx] == self.epoch {
            false
        } else {
            self.stamp[idx] = self.epoch;
            true
        }
    }
}

fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn build_tree(data: &[f64], n: usize, rng: &mut ChaCha8Rng) -> Tree {
    let mut order: Vec<u32> = (0..n as u32).collect();
    let mut nodes = Vec::new();
    build_node(data, &mut order, 0, n, &mut nodes, rng);
    Tree { nodes, order }
}

fn build_node(
    data: &[f64],
    order: &mut [u32],
    start: usize,
    end: usize,
    nodes: &mut Vec<TreeNode>,
    rng: &mut ChaCha8Rng,
) -> u32 {
    let id = nodes.len() as u32;
    if end - start <= LEAF_SIZE {
        nodes.push(TreeNode::Leaf { start: start as u32, end: end as u32 });
        return id;
    }
    // Split on a random dimension among the five of highest variance.
    let subset = &order[start..end];
    let mut stats = [(0.0f64, 0.0f64); DESCRIPTOR_WIDTH];
    for &i in subset {
        let row = &data[i as usize * DESCRIPTOR_WIDTH..(i as usize + 1) * DESCRIPTOR_WIDTH];
        for (s, &v) in stats.iter_mut().zip(row) {
            s.0 += v;
            s.1 += v * v;
        }
    }
    let m = subset.len() as f64;
    let mut by_var: Vec<(f64, usize)> = stats
        .iter()
        .enumerate()
        .map(|(d, &(s, ss))| (ss / m - (s / m) * (s / m), d))
        .collect();
    by_var.sort_by(|a, b| b.0.partial_cmp(&a.0).unwrap().then(a.1.cmp(&b.1)));
    let dim = by_var[rng.random_range(0..5)].1;
    let value = stats[dim].0 / m;

    // Partition around the mean value on the chosen dimension.
    let slice = &mut order[start..end];
    slice.sort_by(|&a, &b| {
        let va = data[a as usize * DESCRIPTOR_WIDTH + dim];
        let vb = data[b as usize * DESCRIPTOR_WIDTH + dim];
        va.partial_cmp(&vb).unwrap().then(a.cmp(&b))
    });
    let mut mid = slice.partition_point(|&i| data[i as usize * DESCRIPTOR_WIDTH + dim] <= value);
    // Guard against degenerate splits on constant dimensions.
    mid = mid.clamp(1, slice.len() - 1);

    nodes.push(TreeNode::Split { dim, value, left: 0, right: 0 });
    let left = build_node(data, order, start, start + mid, nodes, rng);
    let right = build_node(data, order, start + mid, end, nodes, rng);
    if let TreeNode::Split { left: l, right: r, .. } = &mut nodes[id as usize] {
        *l = left;
        *r = right;
    }
    id
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand_chacha::ChaCha8Rng as TestRng;

    fn unit_row(rng: &mut TestRng, centre: Option<&[f64]>, noise: f64) -> Vec<f64> {
        let mut row: Vec<f64> = (0..DESCRIPTOR_WIDTH)
            .map(|d| {
                let base = centre.map_or(0.0, |c| c[d]);
                base + noise * rng.random_range(-1.0..1.0)
            })
            .collect();
        if centre.is_none() {
            for v in row.iter_mut() {
                *v = rng.random_range(0.0..1.0);
            }
        }
        let norm: f64 = row.iter().map(|v| v * v).sum::<f64>().sqrt();
        row.iter_mut().for_each(|v| *v /= norm);
        row
    }

    /// Clustered corpus with a fraction of scattered outliers, the texture
    /// real descriptor sets have.
    fn corpus(n: usize, clusters: usize, seed: u64) -> Vec<f64> {
        let mut rng = TestRng::seed_from_u64(seed);
        let centres: Vec<Vec<f64>> =
            (0..clusters).map(|_| unit_row(&mut rng, None, 0.0)).collect();
        let mut data = Vec::with_capacity(n * DESCRIPTOR_WIDTH);
        for i in 0..n {
            let row = if i % 5 == 4 {
                unit_row(&mut rng, None, 0.0)
            } else {
                unit_row(&mut rng, Some(&centres[i % clusters]), 0.05)
            };
            data.extend(row);
        }
        data
    }

    fn exact_top2(data: &[f64], n: usize, query: &[f64]) -> (usize, f64, f64) {
        let mut best = (usize::MAX, f64::INFINITY);
        let mut second = f64::INFINITY;
        for i in 0..n {
            let row = &data[i * DESCRIPTOR_WIDTH..(i + 1) * DESCRIPTOR_WIDTH];
            let d2 = dist2(query, row);
            if d2 < best.1 {
                second = best.1;
                best = (i, d2);
            } else if d2 < second {
                second = d2;
            }
        }
        (best.0, best.1, second)
    }

    #[test]
    fn small_sets_are_searched_exhaustively() {
        let n = 100;
        let data = corpus(n, 10, 7);
        let forest = NearestForest::build(&data, n);
        let mut scratch = QueryScratch::new();
        for i in 0..n {
            let q = &data[i * DESCRIPTOR_WIDTH..(i + 1) * DESCRIPTOR_WIDTH];
            let got = forest.top2(q, &mut scratch).unwrap();
            assert_eq!(got.best, i);
            assert!(got.best_d2 < 1e-12);
        }
    }

    #[test]
    fn agreement_with_exhaustive_search_above_95_percent() {
        let mut rng = TestRng::seed_from_u64(99);
        for (n, clusters, seed) in [(2000, 40, 11), (4000, 25, 13)] {
            let data = corpus(n, clusters, seed);
            let forest = NearestForest::build(&data, n);
            let mut scratch = QueryScratch::new();
            let mut agree = 0;
            let queries = 400;
            for _ in 0..queries {
                let base = rng.random_range(0..n);
                let mut q =
                    data[base * DESCRIPTOR_WIDTH..(base + 1) * DESCRIPTOR_WIDTH].to_vec();
                for v in q.iter_mut() {
                    *v += rng.random_range(-0.02..0.02);
                }
                let got = forest.top2(&q, &mut scratch).unwrap();
                let (want, want_d2, _) = exact_top2(&data, n, &q);
                if got.best == want || got.best_d2 <= want_d2 {
                    agree += 1;
                }
            }
            let rate = agree as f64 / queries as f64;
            assert!(rate >= 0.95, "agreement {rate} on n = {n}");
        }
    }

    #[test]
    fn search_is_deterministic() {
        let n = 1500;
        let data = corpus(n, 30, 21);
        let mut rng = TestRng::seed_from_u64(5);
        let queries: Vec<Vec<f64>> = (0..50).map(|_| unit_row(&mut rng, None, 0.0)).collect();
        let run = || {
            let forest = NearestForest::build(&data, n);
            let mut scratch = QueryScratch::new();
            queries
                .iter()
                .map(|q| {
                    let r = forest.top2(q, &mut scratch).unwrap();
                    (r.best, r.best_d2.to_bits())
                })
                .collect::<Vec<_>>()
        };
        assert_eq!(run(), run());
    }

    #[test]
    fn second_neighbour_is_absent_for_singletons() {
        let data = corpus(1, 1, 3);
        let forest = NearestForest::build(&data, 1);
        let mut scratch = QueryScratch::new();
        let got = forest.top2(&data, &mut scratch).unwrap();
        assert_eq!(got.best, 0);
        assert!(got.second_d2.is_none());
    }

    #[test]
    fn empty_set_yields_none() {
        let forest = NearestForest::build(&[], 0);
        let mut scratch = QueryScratch::new();
        assert!(forest.top2(&vec![0.0; DESCRIPTOR_WIDTH], &mut scratch).is_none());
    }
}
