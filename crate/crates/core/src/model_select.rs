//! Calinski-Harabasz pseudo F-statistic and group-count selection.

use std::cmp::Ordering;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::contiguity::ContiguityGraph;
use crate::ingest::FeatureMatrix;
use crate::skater::{greedy_cuts, ssd, CutSequence, SkaterError};

#[derive(Debug, Error)]
pub enum SelectError {
    #[error("pseudo-F is undefined for k = {k} with n = {n} (needs 2 <= k <= n - 1)")]
    Undefined { k: usize, n: usize },
    #[error("{labels} labels for {rows} rows")]
    LengthMismatch { labels: usize, rows: usize },
    #[error("labels must cover 1..={k} with every group non-empty; group {missing} is empty")]
    EmptyGroup { k: usize, missing: usize },
    #[error("invalid k range {k_min}..={k_max} for n = {n}")]
    Range { k_min: usize, k_max: usize, n: usize },
    #[error(transparent)]
    Skater(#[from] SkaterError),
}

/// Between- and within-group sums of squares for one assignment.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Dispersion {
    pub between: f64,
    pub within: f64,
    pub total: f64,
}

/// Splits the total SSD about the grand centroid into within-group `W`
/// (sum of group SSDs) and between-group `B = total − W`.
pub fn dispersion(features: &FeatureMatrix, labels: &[usize]) -> Result<Dispersion, SelectError> {
    let n = features.n_rows();
    if labels.len() != n {
        return Err(SelectError::LengthMismatch {
            labels: labels.len(),
            rows: n,
        });
    }
    let k = labels.iter().copied().max().unwrap_or(0);
    let mut groups = vec![Vec::new(); k];
    for (i, &label) in labels.iter().enumerate() {
        if label == 0 {
            return Err(SelectError::EmptyGroup { k, missing: 0 });
        }
        groups[label - 1].push(i);
    }
    if let Some(missing) = groups.iter().position(Vec::is_empty) {
        return Err(SelectError::EmptyGroup { k, missing: missing + 1 });
    }
    let all: Vec<usize> = (0..n).collect();
    let total = ssd(features, &all)?;
    let within = groups.iter().map(|g| ssd(features, g)).sum::<Result<f64, _>>()?;
    Ok(Dispersion {
        between: total - within,
        within,
        total,
    })
}

/// `CH = (B / (k − 1)) / (W / (n − k))` for labels in `1..=k`.
///
/// Returns `0.0` when `B` vanishes and `+∞` when `B > 0` and `W` vanishes
/// (degenerate perfect separation). "Vanishes" means at most `1e-12` times
/// the total sum of squares.
pub fn calinski_harabasz(features: &FeatureMatrix, labels: &[usize]) -> Result<f64, SelectError> {
    let n = features.n_rows();
    let k = labels.iter().copied().max().unwrap_or(0);
    if k < 2 || k + 1 > n {
        return Err(SelectError::Undefined { k, n });
    }
    let d = dispersion(features, labels)?;
    let scale: f64 = features.rows().flatten().map(|x| x * x).sum::<f64>() * 1e-12;
    if d.between <= scale {
        return Ok(0.0);
    }
    if d.within <= scale {
        return Ok(f64::INFINITY);
    }
    Ok((d.between / (k - 1) as f64) / (d.within / (n - k) as f64))
}

mod ch_value {
    use serde::{Deserialize, Deserializer, Serialize, Serializer};

    #[derive(Serialize, Deserialize)]
    #[serde(untagged)]
    enum Repr {
        Finite(f64),
        Tag(String),
    }

    pub fn serialize<S: Serializer>(v: &f64, s: S) -> Result<S::Ok, S::Error> {
        if v.is_infinite() && *v > 0.0 {
            Repr::Tag("+inf".into()).serialize(s)
        } else {
            Repr::Finite(*v).serialize(s)
        }
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<f64, D::Error> {
        match Repr::deserialize(d)? {
            Repr::Finite(v) => Ok(v),
            Repr::Tag(t) if t == "+inf" => Ok(f64::INFINITY),
            Repr::Tag(t) => Err(serde::de::Error::custom(format!("bad ch value {t:?}"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FStatEntry {
    pub k: usize,
    /// Pseudo-F; `+∞` is serialized as the string `"+inf"`.
    #[serde(with = "ch_value")]
    pub ch: f64,
    pub within_ssd: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FStatSeries {
    pub entries: Vec<FStatEntry>,
    pub best_k: usize,
    pub second_best_k: Option<usize>,
    /// Set when some entry is `+∞` (zero within-group dispersion).
    pub degenerate: bool,
}

impl FStatSeries {
    pub fn from_entries(entries: Vec<FStatEntry>) -> Option<Self> {
        let (best_k, second_best_k) = select_best(&entries)?;
        let degenerate = entries.iter().any(|e| e.ch.is_infinite());
        Some(Self {
            entries,
            best_k,
            second_best_k,
            degenerate,
        })
    }

    pub fn get(&self, k: usize) -> Option<&FStatEntry> {
        self.entries.iter().find(|e| e.k == k)
    }
}

/// Ranking: higher CH first (`+∞` above everything), then smaller `k`.
fn rank(x: &FStatEntry, y: &FStatEntry) -> Ordering {
    y.ch.total_cmp(&x.ch).then(x.k.cmp(&y.k))
}

/// Best and runner-up `k`. `None` only for an empty series.
pub fn select_best(entries: &[FStatEntry]) -> Option<(usize, Option<usize>)> {
    let mut sorted: Vec<&FStatEntry> = entries.iter().collect();
    sorted.sort_by(|x, y| rank(x, y));
    let best = sorted.first()?.k;
    Some((best, sorted.get(1).map(|e| e.k)))
}

/// Result of a k scan: the series plus the nested cut sequence it was
/// evaluated on.
#[derive(Debug, Clone)]
pub struct Scan {
    pub series: FStatSeries,
    pub cuts: CutSequence,
}

/// Runs one greedy cut sequence to `k_max` groups and evaluates CH on each
/// nested partition with `k_min <= k <= k_max`.
pub fn scan_k(
    graph: &ContiguityGraph,
    features: &FeatureMatrix,
    k_min: usize,
    k_max: usize,
) -> Result<Scan, SelectError> {
    let n = features.n_rows();
    if k_min < 2 || k_min > k_max || k_max + 1 > n {
        return Err(SelectError::Range { k_min, k_max, n });
    }
    let cuts = greedy_cuts(graph, features, k_max)?;
    let entries = (k_min..=k_max)
        .into_par_iter()
        .map(|k| {
            let p = cuts.partition(features, k)?;
            Ok(FStatEntry {
                k,
                ch: calinski_harabasz(features, &p.assignment)?,
                within_ssd: p.within_ssd,
            })
        })
        .collect::<Result<Vec<_>, SelectError>>()?;
    let series = FStatSeries::from_entries(entries).expect("range is non-empty");
    Ok(Scan { series, cuts })
}
