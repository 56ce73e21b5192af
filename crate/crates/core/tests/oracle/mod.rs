//! Slow, direct reference implementations used only by the tests. Nothing
//! here calls into the library's algorithms.

#![allow(dead_code)]

use std::collections::{BTreeSet, VecDeque};

/// Squared Euclidean distance.
pub fn sq_dist(x: &[f64], y: &[f64]) -> f64 {
    x.iter().zip(y).map(|(a, b)| (a - b) * (a - b)).sum()
}

pub fn centroid(rows: &[Vec<f64>], members: &[usize]) -> Vec<f64> {
    let m = rows[0].len();
    let mut c = vec![0.0; m];
    for &i in members {
        for g in 0..m {
            c[g] += rows[i][g];
        }
    }
    for v in &mut c {
        *v /= members.len() as f64;
    }
    c
}

/// Sum of squared deviations from the members' own centroid.
pub fn ssd(rows: &[Vec<f64>], members: &[usize]) -> f64 {
    let c = centroid(rows, members);
    members.iter().map(|&i| sq_dist(&rows[i], &c)).sum()
}

/// Pseudo-F written straight from the definition: between-group scatter of
/// the group centroids around the grand centroid over within-group scatter.
pub fn calinski_harabasz(rows: &[Vec<f64>], labels: &[usize]) -> f64 {
    let n = rows.len();
    let all: Vec<usize> = (0..n).collect();
    let grand = centroid(rows, &all);
    let distinct: BTreeSet<usize> = labels.iter().copied().collect();
    let k = distinct.len();
    let (mut b, mut w) = (0.0, 0.0);
    for &label in &distinct {
        let members: Vec<usize> = (0..n).filter(|&i| labels[i] == label).collect();
        let c = centroid(rows, &members);
        b += members.len() as f64 * sq_dist(&c, &grand);
        w += members.iter().map(|&i| sq_dist(&rows[i], &c)).sum::<f64>();
    }
    (b / (k - 1) as f64) / (w / (n - k) as f64)
}

/// Prim's algorithm on a dense cost matrix; returns edges as `(min, max)`.
pub fn prim(n: usize, edges: &[(usize, usize, f64)]) -> Vec<(usize, usize)> {
    let mut cost = vec![vec![f64::INFINITY; n]; n];
    for &(a, b, c) in edges {
        cost[a][b] = c;
        cost[b][a] = c;
    }
    let mut in_tree = vec![false; n];
    let mut best = vec![(f64::INFINITY, usize::MAX); n];
    in_tree[0] = true;
    for v in 1..n {
        best[v] = (cost[0][v], 0);
    }
    let mut tree = Vec::new();
    for _ in 1..n {
        let v = (0..n)
            .filter(|&v| !in_tree[v])
            .min_by(|&x, &y| best[x].0.total_cmp(&best[y].0))
            .unwrap();
        assert!(best[v].0.is_finite(), "graph is disconnected");
        in_tree[v] = true;
        let u = best[v].1;
        tree.push((u.min(v), u.max(v)));
        for w in 0..n {
            if !in_tree[w] && cost[v][w] < best[w].0 {
                best[w] = (cost[v][w], v);
            }
        }
    }
    tree.sort();
    tree
}

fn reachable(n: usize, edges: &[(usize, usize)], start: usize) -> Vec<usize> {
    let mut seen = vec![false; n];
    let mut queue = VecDeque::from([start]);
    seen[start] = true;
    while let Some(v) = queue.pop_front() {
        for &(a, b) in edges {
            let next = if a == v {
                b
            } else if b == v {
                a
            } else {
                continue;
            };
            if !seen[next] {
                seen[next] = true;
                queue.push_back(next);
            }
        }
    }
    (0..n).filter(|&v| seen[v]).collect()
}

/// Greedy tree cutting by brute force: at every step try removing each
/// remaining tree edge, recompute the SSD of the component it lives in and
/// of the two halves from scratch, keep the largest decrease (ties to the
/// smaller endpoint pair).
pub fn greedy_cuts(n: usize, tree: &[(usize, usize)], rows: &[Vec<f64>], cuts: usize) -> Vec<(usize, usize, f64)> {
    let mut forest: Vec<(usize, usize)> = tree.to_vec();
    let mut out = Vec::new();
    for _ in 0..cuts {
        let mut best: Option<(f64, usize, usize)> = None;
        for (idx, &(a, b)) in forest.iter().enumerate() {
            let whole = reachable(n, &forest, a);
            let mut rest = forest.clone();
            rest.remove(idx);
            let left = reachable(n, &rest, a);
            let right = reachable(n, &rest, b);
            let delta = ssd(rows, &whole) - ssd(rows, &left) - ssd(rows, &right);
            let better = match best {
                None => true,
                Some((d, ba, bb)) => delta > d || (delta == d && (a, b) < (ba, bb)),
            };
            if better {
                best = Some((delta, a, b));
            }
        }
        let (delta, a, b) = best.expect("no edge left to cut");
        forest.retain(|&e| e != (a, b));
        out.push((a, b, delta));
    }
    out
}

/// Minimum total weight over every spanning tree, by enumerating all
/// `(n − 1)`-edge subsets and keeping the connected ones.
pub fn min_spanning_weight(n: usize, edges: &[(usize, usize, f64)]) -> f64 {
    fn walk(n: usize, edges: &[(usize, usize, f64)], from: usize, chosen: &mut Vec<usize>, best: &mut f64) {
        if chosen.len() == n - 1 {
            let picked: Vec<(usize, usize)> = chosen.iter().map(|&i| (edges[i].0, edges[i].1)).collect();
            if reachable(n, &picked, 0).len() == n {
                *best = best.min(chosen.iter().map(|&i| edges[i].2).sum());
            }
            return;
        }
        for i in from..edges.len() {
            chosen.push(i);
            walk(n, edges, i + 1, chosen, best);
            chosen.pop();
        }
    }
    let mut best = f64::INFINITY;
    walk(n, edges, 0, &mut Vec::new(), &mut best);
    best
}

/// Whether `members` induce a connected subgraph of the undirected `edges`
/// on `n` nodes.
pub fn induces_connected(n: usize, edges: &[(usize, usize)], members: &[usize]) -> bool {
    let Some(&start) = members.first() else {
        return false;
    };
    let set: BTreeSet<usize> = members.iter().copied().collect();
    let inner: Vec<(usize, usize)> = edges
        .iter()
        .copied()
        .filter(|(a, b)| set.contains(a) && set.contains(b))
        .collect();
    reachable(n, &inner, start).len() == set.len()
}

#[cfg(test)]
mod self_checks {
    use super::*;

    #[test]
    fn spanning_weight_on_triangle() {
        let edges = [(0, 1, 1.0), (1, 2, 2.0), (0, 2, 3.0)];
        assert_eq!(min_spanning_weight(3, &edges), 3.0);
        assert_eq!(prim(3, &edges), vec![(0, 1), (1, 2)]);
    }

    #[test]
    fn spanning_weight_on_square_with_diagonal() {
        let edges = [(0, 1, 4.0), (1, 2, 1.0), (2, 3, 4.0), (0, 3, 1.0), (0, 2, 2.0)];
        assert_eq!(min_spanning_weight(4, &edges), 4.0);
    }

    #[test]
    fn connectivity_ignores_outside_nodes() {
        let edges = [(0, 1), (1, 2)];
        assert!(induces_connected(3, &edges, &[0, 1]));
        assert!(!induces_connected(3, &edges, &[0, 2]));
    }

    #[test]
    fn ch_hand_example() {
        // B = 4 · 5.025², W = 2 · 0.05², n − k = 2.
        let rows = vec![vec![0.0], vec![0.0], vec![10.0], vec![10.1]];
        let ch = calinski_harabasz(&rows, &[1, 1, 2, 2]);
        assert!((ch - 40401.0).abs() < 1e-9 * 40401.0, "{ch}");
    }

    #[test]
    fn greedy_on_path_cuts_the_jump() {
        let rows = vec![vec![0.0], vec![0.1], vec![5.0], vec![5.2]];
        let cuts = greedy_cuts(4, &[(0, 1), (1, 2), (2, 3)], &rows, 1);
        assert_eq!((cuts[0].0, cuts[0].1), (1, 2));
    }
}
