//! Fill-reducing orderings for sparse symmetric matrices.
//!
//! Nested dissection with breadth-first level-set separators, minimum degree
//! on the leaves, and dense rows deferred to the end. The result is a
//! permutation `perm` with `perm[k]` = original index eliminated at step `k`.

use std::collections::BTreeSet;

use super::sparse::CscMatrix;
use crate::scalar::Real;

const LEAF_SIZE: usize = 96;

/// Ordering for the symmetric pattern of `a` (the diagonal is ignored).
pub fn nested_dissection<T: Real>(a: &CscMatrix<T>) -> Vec<usize> {
    let n = a.ncols();
    let mut adj: Vec<Vec<usize>> = vec![Vec::new(); n];
    for j in 0..n {
        for (i, _) in a.col(j) {
            if i != j {
                adj[j].push(i);
                adj[i].push(j);
            }
        }
    }
    for list in &mut adj {
        list.sort_unstable();
        list.dedup();
    }
    order_graph(&adj)
}

/// Ordering for an adjacency-list graph.
pub fn order_graph(adj: &[Vec<usize>]) -> Vec<usize> {
    let n = adj.len();
    let dense_cut = 16usize.max((10.0 * (n as f64).sqrt()) as usize);
    let mut dense: Vec<usize> = (0..n).filter(|&v| adj[v].len() > dense_cut).collect();
    let mut is_dense = vec![false; n];
    for &v in &dense {
        is_dense[v] = true;
    }
    let graph: Vec<Vec<usize>> = adj
        .iter()
        .map(|l| l.iter().copied().filter(|&u| !is_dense[u]).collect())
        .collect();

    let mut ctx = Dissection {
        adj: &graph,
        stamp: vec![0; n],
        seen: vec![0; n],
        level: vec![0; n],
        local: vec![0; n],
        next_stamp: 1,
        order: Vec::with_capacity(n),
    };
    let sparse_nodes: Vec<usize> = (0..n).filter(|&v| !is_dense[v]).collect();
    ctx.dissect(sparse_nodes);
    dense.sort_by_key(|&v| (adj[v].len(), v));
    let mut order = ctx.order;
    order.extend(dense);
    debug_assert_eq!(order.len(), n);
    order
}

struct Dissection<'a> {
    adj: &'a [Vec<usize>],
    stamp: Vec<usize>,
    seen: Vec<usize>,
    level: Vec<usize>,
    local: Vec<usize>,
    next_stamp: usize,
    order: Vec<usize>,
}

impl Dissection<'_> {
    fn fresh(&mut self) -> usize {
        self.next_stamp += 1;
        self.next_stamp
    }

    fn dissect(&mut self, nodes: Vec<usize>) {
        if nodes.len() <= LEAF_SIZE {
            self.minimum_degree(&nodes);
            return;
        }
        let set = self.fresh();
        for &v in &nodes {
            self.stamp[v] = set;
        }
        let comps = self.components(&nodes, set);
        if comps.len() > 1 {
            for c in comps {
                self.dissect(c);
            }
            return;
        }
        let levels = self.level_structure(&nodes, set);
        if levels.len() < 3 {
            self.minimum_degree(&nodes);
            return;
        }
        let half = nodes.len() / 2;
        let mut cum = 0;
        let mut split = 1;
        for (s, lv) in levels.iter().enumerate() {
            cum += lv.len();
            if cum >= half {
                split = s;
                break;
            }
        }
        let split = split.clamp(1, levels.len() - 2);
        // Only level-`split` nodes touching the next level separate the halves.
        let next_level = self.fresh();
        for &v in &levels[split + 1] {
            self.level[v] = next_level;
        }
        let mut left = Vec::new();
        let mut sep = Vec::new();
        for lv in &levels[..split] {
            left.extend_from_slice(lv);
        }
        for &v in &levels[split] {
            if self.adj[v].iter().any(|&u| self.level[u] == next_level) {
                sep.push(v);
            } else {
                left.push(v);
            }
        }
        let right: Vec<usize> = levels[split + 1..].iter().flatten().copied().collect();
        if left.len() == nodes.len() || right.len() == nodes.len() {
            self.minimum_degree(&nodes);
            return;
        }
        self.dissect(left);
        self.dissect(right);
        sep.sort_unstable();
        self.order.extend(sep);
    }

    fn components(&mut self, nodes: &[usize], set: usize) -> Vec<Vec<usize>> {
        let mark = self.fresh();
        let mut comps = Vec::new();
        for &s in nodes {
            if self.seen[s] == mark {
                continue;
            }
            self.seen[s] = mark;
            let mut comp = vec![s];
            let mut head = 0;
            while head < comp.len() {
                let v = comp[head];
                head += 1;
                for &u in &self.adj[v] {
                    if self.stamp[u] == set && self.seen[u] != mark {
                        self.seen[u] = mark;
                        comp.push(u);
                    }
                }
            }
            comps.push(comp);
        }
        comps
    }

    fn bfs(&mut self, root: usize, set: usize) -> Vec<Vec<usize>> {
        let mark = self.fresh();
        self.seen[root] = mark;
        let mut levels = vec![vec![root]];
        loop {
            let mut next = Vec::new();
            for &v in levels.last().unwrap() {
                for &u in &self.adj[v] {
                    if self.stamp[u] == set && self.seen[u] != mark {
                        self.seen[u] = mark;
                        next.push(u);
                    }
                }
            }
            if next.is_empty() {
                break;
            }
            levels.push(next);
        }
        levels
    }

    fn level_structure(&mut self, nodes: &[usize], set: usize) -> Vec<Vec<usize>> {
        let degree_in = |adj: &[Vec<usize>], stamp: &[usize], v: usize| {
            adj[v].iter().filter(|&&u| stamp[u] == set).count()
        };
        let root = *nodes.iter().min().unwrap();
        let mut levels = self.bfs(root, set);
        for _ in 0..6 {
            let last = levels.last().unwrap();
            let cand = *last
                .iter()
                .min_by_key(|&&v| (degree_in(self.adj, &self.stamp, v), v))
                .unwrap();
            let trial = self.bfs(cand, set);
            if trial.len() > levels.len() {
                levels = trial;
            } else {
                break;
            }
        }
        levels
    }

    /// Exact minimum degree on the induced subgraph (small inputs only).
    fn minimum_degree(&mut self, nodes: &[usize]) {
        if nodes.is_empty() {
            return;
        }
        let set = self.fresh();
        for (k, &v) in nodes.iter().enumerate() {
            self.stamp[v] = set;
            self.local[v] = k;
        }
        let mut g: Vec<BTreeSet<usize>> = nodes
            .iter()
            .map(|&v| {
                self.adj[v]
                    .iter()
                    .filter(|&&u| self.stamp[u] == set)
                    .map(|&u| self.local[u])
                    .collect()
            })
            .collect();
        let mut alive = vec![true; nodes.len()];
        for _ in 0..nodes.len() {
            let v = (0..nodes.len())
                .filter(|&k| alive[k])
                .min_by_key(|&k| (g[k].len(), nodes[k]))
                .unwrap();
            alive[v] = false;
            let nbrs: Vec<usize> = std::mem::take(&mut g[v]).into_iter().collect();
            for &a in &nbrs {
                g[a].remove(&v);
                for &b in &nbrs {
                    if a != b {
                        g[a].insert(b);
                    }
                }
            }
            self.order.push(nodes[v]);
        }
    }
}
