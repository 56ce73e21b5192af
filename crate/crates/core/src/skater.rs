//! Minimum-spanning-tree regionalization.
//!
//! Edges of the contiguity graph are weighted by the Euclidean distance
//! between feature rows, a minimum spanning tree is extracted, and the tree
//! is cut greedily: each step removes the edge, over all current subtrees,
//! whose removal most decreases the within-group sum of squared deviations
//! (SSD). Removing a tree edge always leaves connected pieces, so every group
//! is contiguous in the underlying graph.
//!
//! Ties are broken by the smaller `(min endpoint, max endpoint)` pair after
//! regions are put in canonical (sorted `region_id`) order, which makes the
//! resulting set partition independent of input row order.

use std::cmp::Ordering;
use std::collections::HashMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contiguity::ContiguityGraph;
use crate::ingest::FeatureMatrix;

#[derive(Debug, Error)]
pub enum SkaterError {
    #[error("graph has {nodes} nodes but the feature matrix has {rows} rows")]
    DimensionMismatch { nodes: usize, rows: usize },
    #[error("graph node {index} is {node:?} but feature row {index} is {row:?}")]
    Misaligned { index: usize, node: String, row: String },
    #[error("graph has {components} connected components; run repair_connectivity first")]
    Disconnected { components: usize },
    #[error("empty member set")]
    EmptyMembers,
    #[error("no cut available: tree has no edges")]
    NoCut,
    #[error("group count {k} is outside 1..={n}")]
    InvalidK { k: usize, n: usize },
    #[error("cut sequence only reaches {max} groups, {k} requested")]
    BeyondSequence { k: usize, max: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct WeightedEdge {
    pub a: usize,
    pub b: usize,
    pub cost: f64,
}

/// Contiguity graph with per-edge feature-space costs, aligned with
/// [`ContiguityGraph::edges`].
#[derive(Debug, Clone)]
pub struct WeightedGraph {
    pub base: ContiguityGraph,
    pub edges: Vec<WeightedEdge>,
}

pub fn euclidean(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt()
}

fn check_alignment(graph: &ContiguityGraph, features: &FeatureMatrix) -> Result<(), SkaterError> {
    if graph.len() != features.n_rows() {
        return Err(SkaterError::DimensionMismatch {
            nodes: graph.len(),
            rows: features.n_rows(),
        });
    }
    for (index, (node, row)) in graph.node_ids().iter().zip(&features.region_ids).enumerate() {
        if node != row {
            return Err(SkaterError::Misaligned {
                index,
                node: node.clone(),
                row: row.clone(),
            });
        }
    }
    Ok(())
}

pub fn edge_costs(graph: &ContiguityGraph, features: &FeatureMatrix) -> Result<WeightedGraph, SkaterError> {
    check_alignment(graph, features)?;
    let edges = graph
        .edges()
        .map(|e| WeightedEdge {
            a: e.a,
            b: e.b,
            cost: euclidean(features.row(e.a), features.row(e.b)),
        })
        .collect();
    Ok(WeightedGraph {
        base: graph.clone(),
        edges,
    })
}

/// Disjoint-set forest with path halving and union by size.
#[derive(Debug, Clone)]
pub(crate) struct DisjointSets {
    parent: Vec<usize>,
    size: Vec<usize>,
}

impl DisjointSets {
    pub(crate) fn new(n: usize) -> Self {
        Self {
            parent: (0..n).collect(),
            size: vec![1; n],
        }
    }

    pub(crate) fn find(&mut self, mut x: usize) -> usize {
        while self.parent[x] != x {
            self.parent[x] = self.parent[self.parent[x]];
            x = self.parent[x];
        }
        x
    }

    pub(crate) fn union(&mut self, a: usize, b: usize) -> bool {
        let (mut ra, mut rb) = (self.find(a), self.find(b));
        if ra == rb {
            return false;
        }
        if self.size[ra] < self.size[rb] {
            std::mem::swap(&mut ra, &mut rb);
        }
        self.parent[rb] = ra;
        self.size[ra] += self.size[rb];
        true
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SpanningTree {
    pub n: usize,
    /// Tree edges in the order they were accepted.
    pub edges: Vec<WeightedEdge>,
}

impl SpanningTree {
    pub fn total_weight(&self) -> f64 {
        self.edges.iter().map(|e| e.cost).sum()
    }
}

/// Kruskal's algorithm over edges sorted by `(cost, min endpoint, max endpoint)`.
pub fn mst(wg: &WeightedGraph) -> Result<SpanningTree, SkaterError> {
    let n = wg.base.len();
    let mut order: Vec<&WeightedEdge> = wg.edges.iter().collect();
    order.sort_by(|x, y| {
        x.cost
            .total_cmp(&y.cost)
            .then(x.a.min(x.b).cmp(&y.a.min(y.b)))
            .then(x.a.max(x.b).cmp(&y.a.max(y.b)))
    });
    let mut sets = DisjointSets::new(n);
    let mut edges = Vec::with_capacity(n.saturating_sub(1));
    for e in order {
        if sets.union(e.a, e.b) {
            edges.push(*e);
            if edges.len() + 1 == n {
                break;
            }
        }
    }
    if n > 0 && edges.len() + 1 != n {
        return Err(SkaterError::Disconnected {
            components: wg.base.component_count(),
        });
    }
    Ok(SpanningTree { n, edges })
}

/// Sum of squared deviations of `members`' rows about their centroid.
pub fn ssd(features: &FeatureMatrix, members: &[usize]) -> Result<f64, SkaterError> {
    if members.is_empty() {
        return Err(SkaterError::EmptyMembers);
    }
    let m = features.n_features();
    let mut mean = vec![0.0; m];
    for &i in members {
        for (acc, v) in mean.iter_mut().zip(features.row(i)) {
            *acc += v;
        }
    }
    let count = members.len() as f64;
    for v in &mut mean {
        *v /= count;
    }
    Ok(members
        .iter()
        .map(|&i| {
            features
                .row(i)
                .iter()
                .zip(&mean)
                .map(|(x, mu)| (x - mu) * (x - mu))
                .sum::<f64>()
        })
        .sum())
}

/// A removed tree edge (`a < b`) and the SSD decrease it achieved.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Cut {
    pub a: usize,
    pub b: usize,
    pub delta: f64,
}

impl Cut {
    fn new(u: usize, v: usize, delta: f64) -> Self {
        Self {
            a: u.min(v),
            b: u.max(v),
            delta,
        }
    }

    /// Greedy preference: larger decrease first, then the smaller endpoint pair.
    pub fn preference(&self, other: &Cut) -> Ordering {
        other
            .delta
            .total_cmp(&self.delta)
            .then(self.a.cmp(&other.a))
            .then(self.b.cmp(&other.b))
    }

    fn better(self, other: Cut) -> Cut {
        if self.preference(&other) == Ordering::Greater {
            other
        } else {
            self
        }
    }
}

/// Best single edge removal for the tree spanned by `tree` (edge list over
/// global row indices).
///
/// For an edge splitting the tree into sides of sizes `n1`, `n2` with
/// centroids `c1`, `c2`, the SSD decrease is `n1·n2/(n1+n2)·‖c1 − c2‖²`.
/// Side sums come from one rooted traversal, with every row shifted by the
/// root's row so identical rows cancel exactly.
pub fn best_cut(tree: &[(usize, usize)], features: &FeatureMatrix) -> Result<Cut, SkaterError> {
    if tree.is_empty() {
        return Err(SkaterError::NoCut);
    }
    let mut local: HashMap<usize, usize> = HashMap::new();
    let mut members = Vec::new();
    let mut adj: Vec<Vec<usize>> = Vec::new();
    let mut slot = |g: usize, members: &mut Vec<usize>, adj: &mut Vec<Vec<usize>>| {
        *local.entry(g).or_insert_with(|| {
            members.push(g);
            adj.push(Vec::new());
            members.len() - 1
        })
    };
    for &(u, v) in tree {
        let (lu, lv) = (slot(u, &mut members, &mut adj), slot(v, &mut members, &mut adj));
        adj[lu].push(lv);
        adj[lv].push(lu);
    }

    let n = members.len();
    let m = features.n_features();
    let root = (0..n).min_by_key(|&l| members[l]).unwrap();
    let origin = features.row(members[root]);

    let mut parent = vec![usize::MAX; n];
    let mut order = Vec::with_capacity(n);
    let mut stack = vec![root];
    parent[root] = root;
    while let Some(u) = stack.pop() {
        order.push(u);
        for &v in &adj[u] {
            if parent[v] == usize::MAX {
                parent[v] = u;
                stack.push(v);
            }
        }
    }

    let mut sums = vec![0.0; n * m];
    let mut counts = vec![1usize; n];
    for l in 0..n {
        for (s, (x, o)) in sums[l * m..(l + 1) * m].iter_mut().zip(features.row(members[l]).iter().zip(origin)) {
            *s = x - o;
        }
    }
    for &u in order.iter().rev() {
        let p = parent[u];
        if p != u {
            counts[p] += counts[u];
            for g in 0..m {
                sums[p * m + g] += sums[u * m + g];
            }
        }
    }

    let total = &sums[root * m..(root + 1) * m];
    let n_total = counts[root] as f64;
    let best = (0..n)
        .into_par_iter()
        .filter(|&l| l != root)
        .map(|l| {
            let n1 = counts[l] as f64;
            let n2 = n_total - n1;
            let side = &sums[l * m..(l + 1) * m];
            let dist2: f64 = side
                .iter()
                .zip(total)
                .map(|(s, t)| {
                    let d = s / n1 - (t - s) / n2;
                    d * d
                })
                .sum();
            Cut::new(members[l], members[parent[l]], n1 * n2 / n_total * dist2)
        })
        .reduce_with(Cut::better);
    best.ok_or(SkaterError::NoCut)
}

/// Assignment of every region to one of `k` contiguous groups.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Partition {
    pub k: usize,
    /// Group label in `1..=k` per region, numbered by smallest member index.
    pub assignment: Vec<usize>,
    pub cut_sequence: Vec<Cut>,
    pub within_ssd: f64,
}

impl Partition {
    /// Member indices of each group, label order.
    pub fn groups(&self) -> Vec<Vec<usize>> {
        let mut groups = vec![Vec::new(); self.k];
        for (i, &label) in self.assignment.iter().enumerate() {
            groups[label - 1].push(i);
        }
        groups
    }
}

/// The nested greedy cut sequence: the first `k − 1` cuts of the spanning
/// tree give the `k`-group partition.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutSequence {
    pub tree: SpanningTree,
    pub cuts: Vec<Cut>,
}

impl CutSequence {
    pub fn max_groups(&self) -> usize {
        self.cuts.len() + 1
    }

    pub fn partition(&self, features: &FeatureMatrix, k: usize) -> Result<Partition, SkaterError> {
        let n = self.tree.n;
        if k == 0 || k > n {
            return Err(SkaterError::InvalidK { k, n });
        }
        if k > self.max_groups() {
            return Err(SkaterError::BeyondSequence {
                k,
                max: self.max_groups(),
            });
        }
        let removed = &self.cuts[..k - 1];
        let mut sets = DisjointSets::new(n);
        for e in &self.tree.edges {
            let (a, b) = (e.a.min(e.b), e.a.max(e.b));
            if !removed.iter().any(|c| c.a == a && c.b == b) {
                sets.union(a, b);
            }
        }
        let mut label_of_root = HashMap::new();
        let assignment: Vec<usize> = (0..n)
            .map(|i| {
                let root = sets.find(i);
                let next = label_of_root.len() + 1;
                *label_of_root.entry(root).or_insert(next)
            })
            .collect();
        let mut partition = Partition {
            k,
            assignment,
            cut_sequence: removed.to_vec(),
            within_ssd: 0.0,
        };
        partition.within_ssd = partition
            .groups()
            .iter()
            .map(|g| ssd(features, g))
            .sum::<Result<f64, _>>()?;
        Ok(partition)
    }
}

/// Builds the spanning tree and performs up to `max_groups − 1` greedy cuts.
pub fn greedy_cuts(
    graph: &ContiguityGraph,
    features: &FeatureMatrix,
    max_groups: usize,
) -> Result<CutSequence, SkaterError> {
    check_alignment(graph, features)?;
    let n = graph.len();
    if max_groups == 0 || max_groups > n {
        return Err(SkaterError::InvalidK { k: max_groups, n });
    }
    if !graph.is_connected() {
        return Err(SkaterError::Disconnected {
            components: graph.component_count(),
        });
    }

    // Work in canonical order; `canon[c]` is the original index of canonical row c.
    let mut canon: Vec<usize> = (0..n).collect();
    canon.sort_by(|&x, &y| features.region_ids[x].cmp(&features.region_ids[y]));
    let sorted_ids: Vec<String> = canon.iter().map(|&i| features.region_ids[i].clone()).collect();
    let cgraph = graph.align_to(&sorted_ids).expect("ids come from the graph itself");
    let cfeatures = features.permuted(&canon);

    let tree = mst(&edge_costs(&cgraph, &cfeatures)?)?;
    let cuts = cut_tree(&tree, &cfeatures, max_groups)?;

    let back = |e: (usize, usize)| (canon[e.0], canon[e.1]);
    Ok(CutSequence {
        tree: SpanningTree {
            n,
            edges: tree
                .edges
                .iter()
                .map(|e| {
                    let (a, b) = back((e.a, e.b));
                    WeightedEdge {
                        a: a.min(b),
                        b: a.max(b),
                        cost: e.cost,
                    }
                })
                .collect(),
        },
        cuts: cuts
            .into_iter()
            .map(|c| {
                let (a, b) = back((c.a, c.b));
                Cut::new(a, b, c.delta)
            })
            .collect(),
    })
}

struct Subtree {
    edges: Vec<(usize, usize)>,
    best: Option<Cut>,
}

impl Subtree {
    fn new(edges: Vec<(usize, usize)>, features: &FeatureMatrix) -> Result<Self, SkaterError> {
        let best = if edges.is_empty() {
            None
        } else {
            Some(best_cut(&edges, features)?)
        };
        Ok(Self { edges, best })
    }
}

fn cut_tree(tree: &SpanningTree, features: &FeatureMatrix, max_groups: usize) -> Result<Vec<Cut>, SkaterError> {
    let all: Vec<(usize, usize)> = tree.edges.iter().map(|e| (e.a.min(e.b), e.a.max(e.b))).collect();
    let mut subtrees = vec![Subtree::new(all, features)?];
    let mut cuts = Vec::with_capacity(max_groups - 1);

    while cuts.len() + 1 < max_groups {
        let (idx, cut) = subtrees
            .iter()
            .enumerate()
            .filter_map(|(i, s)| s.best.map(|c| (i, c)))
            .min_by(|x, y| x.1.preference(&y.1))
            .ok_or(SkaterError::NoCut)?;
        let parent = subtrees.swap_remove(idx);
        let (left, right) = split(&parent.edges, (cut.a, cut.b));
        subtrees.push(Subtree::new(left, features)?);
        subtrees.push(Subtree::new(right, features)?);
        cuts.push(cut);
    }
    Ok(cuts)
}

type EdgeList = Vec<(usize, usize)>;

/// Removes `cut` from a tree's edge list and returns the edges on each side.
fn split(edges: &[(usize, usize)], cut: (usize, usize)) -> (EdgeList, EdgeList) {
    let rest: EdgeList = edges.iter().copied().filter(|&e| e != cut).collect();
    let mut adj: HashMap<usize, Vec<usize>> = HashMap::new();
    for &(u, v) in &rest {
        adj.entry(u).or_default().push(v);
        adj.entry(v).or_default().push(u);
    }
    let mut side = std::collections::HashSet::from([cut.0]);
    let mut stack = vec![cut.0];
    while let Some(u) = stack.pop() {
        for &v in adj.get(&u).into_iter().flatten() {
            if side.insert(v) {
                stack.push(v);
            }
        }
    }
    rest.into_iter().partition(|(u, _)| side.contains(u))
}

/// `k`-group greedy partition of a connected graph.
pub fn partition(graph: &ContiguityGraph, features: &FeatureMatrix, k: usize) -> Result<Partition, SkaterError> {
    greedy_cuts(graph, features, k)?.partition(features, k)
}
