//! Planted-partition datasets on a grid of unit squares, and the adjusted
//! Rand index for scoring recovery.
//!
//! Draws use `ChaCha8Rng` (crate `rand_chacha`) seeded with
//! `seed_from_u64(seed)`. Cells are generated in row-major order; per cell
//! the total is Poisson(`base_total`) (floored at 1) and the per-game counts
//! are a multinomial realised as sequential binomials in game order.

use std::collections::HashMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Binomial, Distribution, Poisson};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::RegionGeometry;
use crate::ingest::{CountTable, RegionRecord, TotalSource};

pub const GENERATOR: &str = "ChaCha8Rng (rand_chacha 0.9), seed_from_u64";

#[derive(Debug, Error)]
pub enum SynthError {
    #[error("degenerate scenario: {0}")]
    Degenerate(String),
    #[error("label vectors differ in length ({0} vs {1})")]
    LengthMismatch(usize, usize),
    #[error("need at least 2 labels, got {0}")]
    TooShort(usize),
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PlantedScenario {
    pub width: usize,
    pub height: usize,
    pub k_true: usize,
    pub signature_games_per_group: usize,
    /// Games that belong to no group; they only receive the off-signature mass.
    #[serde(default)]
    pub background_games: usize,
    pub base_total: f64,
    /// Probability mass a cell puts on its own group's signature games.
    pub concentration: f64,
    pub seed: u64,
}

impl Default for PlantedScenario {
    fn default() -> Self {
        Self {
            width: 12,
            height: 12,
            k_true: 5,
            signature_games_per_group: 3,
            background_games: 0,
            base_total: 10_000.0,
            concentration: 0.8,
            seed: 0,
        }
    }
}

impl PlantedScenario {
    pub fn cells(&self) -> usize {
        self.width * self.height
    }

    pub fn game_count(&self) -> usize {
        self.k_true * self.signature_games_per_group + self.background_games
    }

    pub fn validate(&self) -> Result<(), SynthError> {
        let fail = |m: String| Err(SynthError::Degenerate(m));
        if self.width == 0 || self.height == 0 {
            return fail("grid must be at least 1×1".into());
        }
        if self.k_true == 0 || self.k_true > self.cells() {
            return fail(format!("k_true = {} with {} cells", self.k_true, self.cells()));
        }
        if self.signature_games_per_group == 0 {
            return fail("each group needs at least one signature game".into());
        }
        if !(self.base_total.is_finite() && self.base_total > 0.0) {
            return fail(format!("base_total = {}", self.base_total));
        }
        let own_share = self.signature_games_per_group as f64 / self.game_count() as f64;
        let off_games = self.game_count() - self.signature_games_per_group;
        let floor = if off_games == 0 { 1.0 } else { own_share };
        let lower_ok = if off_games == 0 {
            self.concentration == 1.0
        } else {
            self.concentration > floor
        };
        if !(lower_ok && self.concentration <= 1.0) {
            return fail(format!(
                "concentration {} must lie in ({floor}, 1]",
                self.concentration
            ));
        }
        Ok(())
    }

    pub fn game_names(&self) -> Vec<String> {
        let mut names = Vec::with_capacity(self.game_count());
        for g in 1..=self.k_true {
            for s in 1..=self.signature_games_per_group {
                names.push(format!("group{g}_game{s}"));
            }
        }
        names.extend((1..=self.background_games).map(|b| format!("background{b}")));
        names
    }

    pub fn region_id(&self, x: usize, y: usize) -> String {
        format!("cell_{:04}", y * self.width + x)
    }
}

/// Axis-aligned blocks `(x0, y0, w, h)` tiling the grid.
///
/// When `k` fits along the longer side the grid is cut into `k` bands across
/// that side, widths differing by at most one (wider bands first). Otherwise
/// the block with the largest area (first on ties) is halved along its longer
/// side until there are `k` blocks.
pub fn planted_blocks(width: usize, height: usize, k: usize) -> Vec<(usize, usize, usize, usize)> {
    let long = width.max(height);
    if k <= long {
        let (base, extra) = (long / k, long % k);
        let mut start = 0;
        return (0..k)
            .map(|b| {
                let len = base + usize::from(b < extra);
                let block = if width >= height {
                    (start, 0, len, height)
                } else {
                    (0, start, width, len)
                };
                start += len;
                block
            })
            .collect();
    }
    let mut blocks = vec![(0, 0, width, height)];
    while blocks.len() < k {
        let (i, _) = blocks
            .iter()
            .enumerate()
            .filter(|(_, b)| b.2 * b.3 > 1)
            .max_by(|x, y| (x.1 .2 * x.1 .3).cmp(&(y.1 .2 * y.1 .3)).then(y.0.cmp(&x.0)))
            .expect("k <= cells leaves a splittable block");
        let (x0, y0, w, h) = blocks[i];
        if w >= h {
            let left = w / 2;
            blocks[i] = (x0, y0, left, h);
            blocks.insert(i + 1, (x0 + left, y0, w - left, h));
        } else {
            let top = h / 2;
            blocks[i] = (x0, y0, w, top);
            blocks.insert(i + 1, (x0, y0 + top, w, h - top));
        }
    }
    blocks
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticDataset {
    pub scenario: PlantedScenario,
    pub geometry: Vec<RegionGeometry>,
    pub table: CountTable,
    /// Planted group per cell in `1..=k_true`, numbered by smallest cell index.
    pub truth: Vec<usize>,
}

impl SyntheticDataset {
    pub fn region_ids(&self) -> Vec<String> {
        self.table.regions.iter().map(|r| r.region_id.clone()).collect()
    }
}

pub fn generate(scenario: &PlantedScenario) -> Result<SyntheticDataset, SynthError> {
    scenario.validate()?;
    let (w, h) = (scenario.width, scenario.height);

    let mut block_of = vec![0; w * h];
    for (b, &(x0, y0, bw, bh)) in planted_blocks(w, h, scenario.k_true).iter().enumerate() {
        for y in y0..y0 + bh {
            for x in x0..x0 + bw {
                block_of[y * w + x] = b;
            }
        }
    }
    let mut label_of_block = HashMap::new();
    let truth: Vec<usize> = block_of
        .iter()
        .map(|b| {
            let next = label_of_block.len() + 1;
            *label_of_block.entry(*b).or_insert(next)
        })
        .collect();

    let games = scenario.game_names();
    let sig = scenario.signature_games_per_group;
    let off_games = games.len() - sig;
    let own_p = scenario.concentration / sig as f64;
    let off_p = if off_games == 0 {
        0.0
    } else {
        (1.0 - scenario.concentration) / off_games as f64
    };

    let mut rng = ChaCha8Rng::seed_from_u64(scenario.seed);
    let poisson = Poisson::new(scenario.base_total).map_err(|e| SynthError::Degenerate(e.to_string()))?;
    let mut regions = Vec::with_capacity(w * h);
    let mut geometry = Vec::with_capacity(w * h);
    let mut totals = Vec::with_capacity(w * h);
    let mut counts = Vec::with_capacity(w * h);
    for y in 0..h {
        for x in 0..w {
            let cell = y * w + x;
            let id = scenario.region_id(x, y);
            let cell_geom = RegionGeometry::rectangle(id.clone(), x as f64, y as f64, x as f64 + 1.0, y as f64 + 1.0);
            let mut record = RegionRecord::new(id);
            record.centroid = cell_geom.centroid();
            regions.push(record);
            geometry.push(cell_geom);

            let group = truth[cell] - 1;
            let probs: Vec<f64> = (0..games.len())
                .map(|g| if g / sig == group && g < scenario.k_true * sig { own_p } else { off_p })
                .collect();
            let total = (poisson.sample(&mut rng) as u64).max(1);
            counts.push(multinomial(&mut rng, total, &probs));
            totals.push(total);
        }
    }

    Ok(SyntheticDataset {
        scenario: scenario.clone(),
        geometry,
        table: CountTable {
            regions,
            totals,
            games,
            counts,
            total_source: TotalSource::Column,
        },
        truth,
    })
}

fn multinomial(rng: &mut ChaCha8Rng, trials: u64, probs: &[f64]) -> Vec<u64> {
    let mut out = vec![0; probs.len()];
    let mut remaining = trials;
    let mut mass: f64 = probs.iter().sum();
    for (g, &p) in probs.iter().enumerate() {
        if remaining == 0 {
            break;
        }
        if g + 1 == probs.len() {
            out[g] = remaining;
            break;
        }
        let q = if mass > 0.0 { (p / mass).clamp(0.0, 1.0) } else { 0.0 };
        let draw = if q <= 0.0 {
            0
        } else if q >= 1.0 {
            remaining
        } else {
            Binomial::new(remaining, q).expect("q in (0, 1)").sample(rng)
        };
        out[g] = draw;
        remaining -= draw;
        mass -= p;
    }
    out
}

/// Pair-counting adjusted Rand index. Two partitions whose expected and
/// maximum indices coincide (both trivial in the same way) score 1.
pub fn adjusted_rand_index<A, B>(truth: &[A], predicted: &[B]) -> Result<f64, SynthError>
where
    A: Eq + std::hash::Hash,
    B: Eq + std::hash::Hash,
{
    if truth.len() != predicted.len() {
        return Err(SynthError::LengthMismatch(truth.len(), predicted.len()));
    }
    if truth.len() < 2 {
        return Err(SynthError::TooShort(truth.len()));
    }
    let pairs = |c: u64| (c * c.saturating_sub(1) / 2) as f64;
    let mut cells: HashMap<(&A, &B), u64> = HashMap::new();
    let mut rows: HashMap<&A, u64> = HashMap::new();
    let mut cols: HashMap<&B, u64> = HashMap::new();
    for (a, b) in truth.iter().zip(predicted) {
        *cells.entry((a, b)).or_default() += 1;
        *rows.entry(a).or_default() += 1;
        *cols.entry(b).or_default() += 1;
    }
    let index: f64 = cells.values().map(|&c| pairs(c)).sum();
    let sum_rows: f64 = rows.values().map(|&c| pairs(c)).sum();
    let sum_cols: f64 = cols.values().map(|&c| pairs(c)).sum();
    let expected = sum_rows * sum_cols / pairs(truth.len() as u64);
    let max = (sum_rows + sum_cols) / 2.0;
    if max == expected {
        return Ok(1.0);
    }
    Ok((index - expected) / (max - expected))
}
