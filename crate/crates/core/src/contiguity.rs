//! Region adjacency graphs: construction from polygons or explicit pairs,
//! connectivity repair and optional nearest-neighbour augmentation.

use std::collections::{BTreeMap, BTreeSet, HashMap, VecDeque};
use std::fmt;
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{GeometryError, RegionGeometry};
use crate::ingest::Point;

/// Coordinates are snapped to this grid before vertex matching.
const SNAP: f64 = 1e9;

#[derive(Debug, Error)]
pub enum ContiguityError {
    #[error("unknown region id {0:?}")]
    UnknownRegion(String),
    #[error("self-loop on region {0:?}")]
    SelfLoop(String),
    #[error("duplicate node id {0:?}")]
    DuplicateNode(String),
    #[error("cannot repair: graph has {components} components and region {region_id:?} has no centroid")]
    CannotRepair { components: usize, region_id: String },
    #[error("missing centroid for region {0:?}")]
    MissingCentroid(String),
    #[error("{got} centroids supplied for {expected} nodes")]
    CentroidCount { expected: usize, got: usize },
    #[error("neighbour count must be at least 1")]
    ZeroNeighbors,
    #[error("cannot read adjacency file {path}: {reason}")]
    AdjacencyFile { path: String, reason: String },
    #[error(transparent)]
    Geometry(#[from] GeometryError),
}

/// How an edge entered the graph.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Provenance {
    PolygonAdjacency,
    Explicit,
    Repair,
    Knn,
}

impl fmt::Display for Provenance {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Provenance::PolygonAdjacency => "polygon-adjacency",
            Provenance::Explicit => "explicit",
            Provenance::Repair => "repair",
            Provenance::Knn => "knn",
        })
    }
}

/// Rook counts shared boundary segments only; queen also counts shared vertices.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum ContiguityRule {
    #[default]
    Rook,
    Queen,
}

/// Undirected edge with `a < b`.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Edge {
    pub a: usize,
    pub b: usize,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ContiguityGraph {
    node_ids: Vec<String>,
    edges: BTreeMap<(usize, usize), Provenance>,
}

impl ContiguityGraph {
    /// Graph over `node_ids` with no edges.
    pub fn isolated(node_ids: Vec<String>) -> Result<Self, ContiguityError> {
        let mut seen = BTreeSet::new();
        for id in &node_ids {
            if !seen.insert(id.as_str()) {
                return Err(ContiguityError::DuplicateNode(id.clone()));
            }
        }
        Ok(Self {
            node_ids,
            edges: BTreeMap::new(),
        })
    }

    pub fn node_ids(&self) -> &[String] {
        &self.node_ids
    }

    pub fn len(&self) -> usize {
        self.node_ids.len()
    }

    pub fn is_empty(&self) -> bool {
        self.node_ids.is_empty()
    }

    pub fn index_of(&self, id: &str) -> Option<usize> {
        self.node_ids.iter().position(|n| n == id)
    }

    pub fn edge_count(&self) -> usize {
        self.edges.len()
    }

    /// Edges in ascending `(a, b)` order.
    pub fn edges(&self) -> impl Iterator<Item = Edge> + '_ {
        self.edges.iter().map(|(&(a, b), &provenance)| Edge { a, b, provenance })
    }

    pub fn edges_with(&self, provenance: Provenance) -> Vec<Edge> {
        self.edges().filter(|e| e.provenance == provenance).collect()
    }

    pub fn has_edge(&self, u: usize, v: usize) -> bool {
        self.edges.contains_key(&(u.min(v), u.max(v)))
    }

    /// Inserts `u–v` unless present; returns whether it was added.
    /// Panics on a self-loop or out-of-range index.
    pub fn add_edge(&mut self, u: usize, v: usize, provenance: Provenance) -> bool {
        assert!(u != v, "self-loop on node {u}");
        assert!(u < self.len() && v < self.len(), "edge endpoint out of range");
        let key = (u.min(v), u.max(v));
        if self.edges.contains_key(&key) {
            return false;
        }
        self.edges.insert(key, provenance);
        true
    }

    /// Sorted neighbour lists.
    pub fn adjacency(&self) -> Vec<Vec<usize>> {
        let mut adj = vec![Vec::new(); self.len()];
        for &(a, b) in self.edges.keys() {
            adj[a].push(b);
            adj[b].push(a);
        }
        for list in &mut adj {
            list.sort_unstable();
        }
        adj
    }

    pub fn degrees(&self) -> Vec<usize> {
        let mut deg = vec![0; self.len()];
        for &(a, b) in self.edges.keys() {
            deg[a] += 1;
            deg[b] += 1;
        }
        deg
    }

    /// Component label per node; labels are numbered by smallest member.
    pub fn components(&self) -> Vec<usize> {
        let adj = self.adjacency();
        let mut label = vec![usize::MAX; self.len()];
        let mut next = 0;
        for start in 0..self.len() {
            if label[start] != usize::MAX {
                continue;
            }
            label[start] = next;
            let mut queue = VecDeque::from([start]);
            while let Some(u) = queue.pop_front() {
                for &v in &adj[u] {
                    if label[v] == usize::MAX {
                        label[v] = next;
                        queue.push_back(v);
                    }
                }
            }
            next += 1;
        }
        label
    }

    pub fn component_count(&self) -> usize {
        self.components().into_iter().max().map_or(0, |m| m + 1)
    }

    pub fn is_connected(&self) -> bool {
        self.component_count() <= 1
    }

    /// Whether `members` induce a connected subgraph.
    pub fn induces_connected(&self, members: &[usize]) -> bool {
        if members.is_empty() {
            return false;
        }
        let inside: BTreeSet<usize> = members.iter().copied().collect();
        let adj = self.adjacency();
        let mut seen = BTreeSet::from([members[0]]);
        let mut queue = VecDeque::from([members[0]]);
        while let Some(u) = queue.pop_front() {
            for &v in &adj[u] {
                if inside.contains(&v) && seen.insert(v) {
                    queue.push_back(v);
                }
            }
        }
        seen.len() == inside.len()
    }

    /// Re-indexes the graph onto `ids`: nodes not listed are dropped together
    /// with their edges. Every listed id must be a node.
    pub fn align_to(&self, ids: &[String]) -> Result<Self, ContiguityError> {
        let index: HashMap<&str, usize> = self
            .node_ids
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let mut old_to_new = vec![None; self.len()];
        for (new, id) in ids.iter().enumerate() {
            let old = *index
                .get(id.as_str())
                .ok_or_else(|| ContiguityError::UnknownRegion(id.clone()))?;
            old_to_new[old] = Some(new);
        }
        let mut out = Self::isolated(ids.to_vec())?;
        for e in self.edges() {
            if let (Some(a), Some(b)) = (old_to_new[e.a], old_to_new[e.b]) {
                out.add_edge(a, b, e.provenance);
            }
        }
        Ok(out)
    }

    /// Builds a graph from id pairs; pairs are symmetrised and deduplicated.
    pub fn from_adjacency_list(
        pairs: &[(String, String)],
        nodes: &[String],
    ) -> Result<Self, ContiguityError> {
        let mut graph = Self::isolated(nodes.to_vec())?;
        let index: HashMap<&str, usize> = nodes
            .iter()
            .enumerate()
            .map(|(i, id)| (id.as_str(), i))
            .collect();
        let lookup = |id: &String| {
            index
                .get(id.as_str())
                .copied()
                .ok_or_else(|| ContiguityError::UnknownRegion(id.clone()))
        };
        for (a, b) in pairs {
            let (u, v) = (lookup(a)?, lookup(b)?);
            if u == v {
                return Err(ContiguityError::SelfLoop(a.clone()));
            }
            graph.add_edge(u, v, Provenance::Explicit);
        }
        Ok(graph)
    }

    /// Adjacency from polygon footprints. Node order follows `regions`.
    pub fn from_polygons(
        regions: &[RegionGeometry],
        rule: ContiguityRule,
    ) -> Result<Self, ContiguityError> {
        for r in regions {
            r.validate()?;
        }
        let mut graph = Self::isolated(regions.iter().map(|r| r.region_id.clone()).collect())?;
        let mut shared: HashMap<Key, Vec<usize>> = HashMap::new();
        for (i, region) in regions.iter().enumerate() {
            for ring in region.polygons.iter().flat_map(|p| p.rings()) {
                for w in ring.windows(2) {
                    let (p, q) = (snap(w[0]), snap(w[1]));
                    match rule {
                        ContiguityRule::Rook if p != q => {
                            let key = Key::Segment(p.min(q), p.max(q));
                            push_unique(shared.entry(key).or_default(), i);
                        }
                        ContiguityRule::Rook => {}
                        ContiguityRule::Queen => push_unique(shared.entry(Key::Vertex(p)).or_default(), i),
                    }
                }
            }
        }
        for owners in shared.values().filter(|o| o.len() > 1) {
            for (x, &u) in owners.iter().enumerate() {
                for &v in &owners[x + 1..] {
                    graph.add_edge(u, v, Provenance::PolygonAdjacency);
                }
            }
        }
        Ok(graph)
    }

    /// Joins components by repeatedly adding the shortest centroid-distance
    /// edge between two different components. Ties go to the smaller
    /// `(min index, max index)` pair.
    pub fn repair_connectivity(&self, centroids: &[Option<Point>]) -> Result<Self, ContiguityError> {
        self.check_centroid_len(centroids)?;
        let mut graph = self.clone();
        loop {
            let labels = graph.components();
            let components = labels.iter().max().map_or(0, |m| m + 1);
            if components <= 1 {
                return Ok(graph);
            }
            if let Some(i) = centroids.iter().position(Option::is_none) {
                return Err(ContiguityError::CannotRepair {
                    components,
                    region_id: self.node_ids[i].clone(),
                });
            }
            let pts: Vec<Point> = centroids.iter().map(|c| c.unwrap()).collect();
            let mut best: Option<(f64, usize, usize)> = None;
            for i in 0..pts.len() {
                for j in i + 1..pts.len() {
                    if labels[i] == labels[j] {
                        continue;
                    }
                    let d = pts[i].distance(&pts[j]);
                    if best.is_none_or(|(bd, _, _)| d < bd) {
                        best = Some((d, i, j));
                    }
                }
            }
            let (d, i, j) = best.expect("two components imply a cross pair");
            log::debug!("repair edge {}–{} (distance {d})", self.node_ids[i], self.node_ids[j]);
            graph.add_edge(i, j, Provenance::Repair);
        }
    }

    /// Raises every node's degree to at least `k` by linking to its nearest
    /// centroids. Nodes are visited in index order; candidates are ordered by
    /// `(distance, index)`.
    pub fn knn_augment(&self, centroids: &[Option<Point>], k: usize) -> Result<Self, ContiguityError> {
        if k == 0 {
            return Err(ContiguityError::ZeroNeighbors);
        }
        self.check_centroid_len(centroids)?;
        let mut graph = self.clone();
        let mut degree = graph.degrees();
        for u in 0..graph.len() {
            if degree[u] >= k {
                continue;
            }
            let pu = centroids[u].ok_or_else(|| ContiguityError::MissingCentroid(self.node_ids[u].clone()))?;
            let mut candidates = Vec::with_capacity(graph.len());
            for (v, c) in centroids.iter().enumerate() {
                if v == u || graph.has_edge(u, v) {
                    continue;
                }
                let pv = c.ok_or_else(|| ContiguityError::MissingCentroid(self.node_ids[v].clone()))?;
                candidates.push((pu.distance(&pv), v));
            }
            candidates.sort_by(|a, b| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1)));
            for (_, v) in candidates {
                if degree[u] >= k {
                    break;
                }
                graph.add_edge(u, v, Provenance::Knn);
                degree[u] += 1;
                degree[v] += 1;
            }
        }
        Ok(graph)
    }

    fn check_centroid_len(&self, centroids: &[Option<Point>]) -> Result<(), ContiguityError> {
        if centroids.len() != self.len() {
            return Err(ContiguityError::CentroidCount {
                expected: self.len(),
                got: centroids.len(),
            });
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
enum Key {
    Segment((i64, i64), (i64, i64)),
    Vertex((i64, i64)),
}

fn snap(p: Point) -> (i64, i64) {
    ((p.x * SNAP).round() as i64, (p.y * SNAP).round() as i64)
}

fn push_unique(owners: &mut Vec<usize>, i: usize) {
    if owners.last() != Some(&i) && !owners.contains(&i) {
        owners.push(i);
    }
}

/// Reads a two-column `region_a,region_b` file with a header row.
pub fn load_adjacency(path: impl AsRef<Path>) -> Result<Vec<(String, String)>, ContiguityError> {
    let path = path.as_ref();
    let fail = |reason: String| ContiguityError::AdjacencyFile {
        path: path.display().to_string(),
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;
    let mut pairs = Vec::new();
    for record in rdr.records() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        if record.len() != 2 {
            let line = record.position().map_or(0, |p| p.line());
            return Err(fail(format!("line {line}: expected 2 columns")));
        }
        pairs.push((record[0].to_string(), record[1].to_string()));
    }
    Ok(pairs)
}
