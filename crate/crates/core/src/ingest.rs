//! Count-table ingestion, proportion normalization and region exclusion.
//!
//! The count table is a wide CSV: one row per region, a `region` key column,
//! an optional `total` column holding players across *all* games, and one
//! integer column per game. The reserved columns `name`, `province`, `cx` and
//! `cy` carry display metadata and an optional centroid.

use std::collections::{HashMap, HashSet};
use std::fs::File;
use std::io::{BufRead, BufReader, Read};
use std::path::Path;

use serde::{Deserialize, Serialize};
use thiserror::Error;

const RESERVED: [&str; 6] = ["region", "total", "name", "province", "cx", "cy"];

#[derive(Debug, Error)]
pub enum IngestError {
    #[error("cannot read {path}: {source}")]
    Io {
        path: String,
        #[source]
        source: std::io::Error,
    },
    #[error("line {line}: malformed row: {reason}")]
    Malformed { line: u64, reason: String },
    #[error("line {line}: duplicate region id {region_id:?}")]
    DuplicateRegion { line: u64, region_id: String },
    #[error("line {line}: negative count {value:?} in column {column:?}")]
    NegativeCount {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: non-integer count {value:?} in column {column:?}")]
    NonInteger {
        line: u64,
        column: String,
        value: String,
    },
    #[error("line {line}: count exceeds total for game {game:?} ({count} > {total})")]
    CountExceedsTotal {
        line: u64,
        game: String,
        count: u64,
        total: u64,
    },
    #[error("unknown game {0:?}")]
    UnknownGame(String),
    #[error("empty matrix: no regions left")]
    EmptyMatrix,
}

/// Planar (or lon/lat) coordinate pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub fn new(x: f64, y: f64) -> Self {
        Self { x, y }
    }

    pub fn distance(&self, other: &Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionRecord {
    pub region_id: String,
    pub name: String,
    pub province: Option<String>,
    pub centroid: Option<Point>,
}

impl RegionRecord {
    pub fn new(region_id: impl Into<String>) -> Self {
        let region_id = region_id.into();
        Self {
            name: region_id.clone(),
            region_id,
            province: None,
            centroid: None,
        }
    }
}

/// Where the per-region denominator came from.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum TotalSource {
    /// Dedicated `total` column (players across all games).
    Column,
    /// No `total` column: row sum over the listed games.
    RowSum,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CountTable {
    pub regions: Vec<RegionRecord>,
    pub totals: Vec<u64>,
    pub games: Vec<String>,
    /// `counts[i][g]` is the player count of game `g` in region `i`.
    pub counts: Vec<Vec<u64>>,
    pub total_source: TotalSource,
}

impl CountTable {
    pub fn len(&self) -> usize {
        self.regions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.regions.is_empty()
    }

    pub fn game_index(&self, game: &str) -> Option<usize> {
        self.games.iter().position(|g| g == game)
    }

    pub fn region_index(&self, region_id: &str) -> Option<usize> {
        self.regions.iter().position(|r| r.region_id == region_id)
    }

    /// Writes the table in the wide CSV format read by [`parse_counts`].
    pub fn write_csv<W: std::io::Write>(&self, writer: W) -> csv::Result<()> {
        let mut w = csv::Writer::from_writer(writer);
        let with_centroids = self.regions.iter().all(|r| r.centroid.is_some());
        let mut header = vec!["region".to_string(), "name".to_string()];
        if with_centroids {
            header.push("cx".into());
            header.push("cy".into());
        }
        if self.total_source == TotalSource::Column {
            header.push("total".into());
        }
        header.extend(self.games.iter().cloned());
        w.write_record(&header)?;
        for (i, region) in self.regions.iter().enumerate() {
            let mut row = vec![region.region_id.clone(), region.name.clone()];
            if let (true, Some(c)) = (with_centroids, region.centroid) {
                row.push(c.x.to_string());
                row.push(c.y.to_string());
            }
            if self.total_source == TotalSource::Column {
                row.push(self.totals[i].to_string());
            }
            row.extend(self.counts[i].iter().map(|c| c.to_string()));
            w.write_record(&row)?;
        }
        w.flush()?;
        Ok(())
    }
}

/// Row-major matrix of play-count proportions, one row per region.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureMatrix {
    pub region_ids: Vec<String>,
    pub feature_names: Vec<String>,
    values: Vec<f64>,
    /// Region ids removed by [`filter_regions`], in removal order.
    pub excluded: Vec<String>,
}

impl FeatureMatrix {
    /// Builds a matrix from explicit rows. Every row must have
    /// `feature_names.len()` finite entries.
    pub fn from_rows(
        region_ids: Vec<String>,
        feature_names: Vec<String>,
        rows: Vec<Vec<f64>>,
    ) -> Result<Self, IngestError> {
        if rows.len() != region_ids.len() {
            return Err(IngestError::Malformed {
                line: 0,
                reason: format!("{} ids for {} rows", region_ids.len(), rows.len()),
            });
        }
        let m = feature_names.len();
        let mut values = Vec::with_capacity(rows.len() * m);
        for (row, id) in rows.iter().zip(&region_ids) {
            if row.len() != m || row.iter().any(|v| !v.is_finite()) {
                return Err(IngestError::Malformed {
                    line: 0,
                    reason: format!("row {id:?} must hold {m} finite values"),
                });
            }
            values.extend_from_slice(row);
        }
        Ok(Self {
            region_ids,
            feature_names,
            values,
            excluded: Vec::new(),
        })
    }

    pub fn n_rows(&self) -> usize {
        self.region_ids.len()
    }

    pub fn n_features(&self) -> usize {
        self.feature_names.len()
    }

    pub fn row(&self, i: usize) -> &[f64] {
        let m = self.n_features();
        &self.values[i * m..(i + 1) * m]
    }

    pub fn get(&self, i: usize, g: usize) -> f64 {
        self.row(i)[g]
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        // chunks_exact panics on 0, and a zero-feature matrix still has rows.
        (0..self.n_rows()).map(move |i| self.row(i))
    }

    /// Returns a copy whose rows follow `order` (a permutation of row indices).
    pub fn permuted(&self, order: &[usize]) -> Self {
        let mut values = Vec::with_capacity(self.values.len());
        for &i in order {
            values.extend_from_slice(self.row(i));
        }
        Self {
            region_ids: order.iter().map(|&i| self.region_ids[i].clone()).collect(),
            feature_names: self.feature_names.clone(),
            values,
            excluded: self.excluded.clone(),
        }
    }
}

/// A region dropped during normalization, with the reason.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct DroppedRegion {
    pub region_id: String,
    pub reason: String,
}

#[derive(Debug, Clone)]
pub struct Normalized {
    pub matrix: FeatureMatrix,
    pub dropped: Vec<DroppedRegion>,
    pub notes: Vec<String>,
}

#[derive(Debug, Clone)]
pub struct Filtered {
    pub matrix: FeatureMatrix,
    /// Requested ids that matched no row.
    pub not_found: Vec<String>,
}

pub fn load_counts(path: impl AsRef<Path>) -> Result<CountTable, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    parse_counts(BufReader::new(file))
}

pub fn parse_counts<R: Read>(reader: R) -> Result<CountTable, IngestError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);

    let header = rdr
        .headers()
        .map_err(|e| csv_error(e, 1))?
        .iter()
        .map(str::to_string)
        .collect::<Vec<_>>();
    let col = |name: &str| header.iter().position(|h| h == name);
    let region_col = col("region").ok_or_else(|| IngestError::Malformed {
        line: 1,
        reason: "header has no \"region\" column".into(),
    })?;
    let total_col = col("total");
    let name_col = col("name");
    let province_col = col("province");
    let cx_col = col("cx");
    let cy_col = col("cy");
    if cx_col.is_some() != cy_col.is_some() {
        return Err(IngestError::Malformed {
            line: 1,
            reason: "\"cx\" and \"cy\" must appear together".into(),
        });
    }
    let game_cols: Vec<usize> = (0..header.len())
        .filter(|&c| !RESERVED.contains(&header[c].as_str()))
        .collect();
    let games: Vec<String> = game_cols.iter().map(|&c| header[c].clone()).collect();
    let mut seen_games = HashSet::new();
    for g in &games {
        if g.is_empty() || !seen_games.insert(g) {
            return Err(IngestError::Malformed {
                line: 1,
                reason: format!("empty or repeated game column {g:?}"),
            });
        }
    }

    let mut table = CountTable {
        regions: Vec::new(),
        totals: Vec::new(),
        games,
        counts: Vec::new(),
        total_source: if total_col.is_some() {
            TotalSource::Column
        } else {
            TotalSource::RowSum
        },
    };
    let mut ids = HashSet::new();

    for result in rdr.records() {
        let record = result.map_err(|e| csv_error(e, 0))?;
        let line = record.position().map_or(0, |p| p.line());
        let region_id = record[region_col].to_string();
        if region_id.is_empty() {
            return Err(IngestError::Malformed {
                line,
                reason: "empty region id".into(),
            });
        }
        if !ids.insert(region_id.clone()) {
            return Err(IngestError::DuplicateRegion { line, region_id });
        }

        let counts = game_cols
            .iter()
            .map(|&c| parse_count(&record[c], &header[c], line))
            .collect::<Result<Vec<_>, _>>()?;
        let total = match total_col {
            Some(c) => {
                let total = parse_count(&record[c], "total", line)?;
                for (g, &count) in counts.iter().enumerate() {
                    if count > total {
                        return Err(IngestError::CountExceedsTotal {
                            line,
                            game: table.games[g].clone(),
                            count,
                            total,
                        });
                    }
                }
                total
            }
            None => counts.iter().sum(),
        };

        let centroid = match (cx_col, cy_col) {
            (Some(cx), Some(cy)) if !record[cx].is_empty() || !record[cy].is_empty() => {
                let x = parse_coord(&record[cx], "cx", line)?;
                let y = parse_coord(&record[cy], "cy", line)?;
                Some(Point::new(x, y))
            }
            _ => None,
        };
        let name = name_col
            .map(|c| record[c].to_string())
            .filter(|n| !n.is_empty())
            .unwrap_or_else(|| region_id.clone());
        let province = province_col
            .map(|c| record[c].to_string())
            .filter(|p| !p.is_empty());

        table.regions.push(RegionRecord {
            region_id,
            name,
            province,
            centroid,
        });
        table.totals.push(total);
        table.counts.push(counts);
    }
    Ok(table)
}

fn csv_error(err: csv::Error, fallback_line: u64) -> IngestError {
    let line = err.position().map_or(fallback_line, |p| p.line());
    IngestError::Malformed {
        line,
        reason: err.to_string(),
    }
}

fn parse_count(raw: &str, column: &str, line: u64) -> Result<u64, IngestError> {
    if raw.is_empty() {
        // An empty cell means the feed reported no players.
        return Ok(0);
    }
    match raw.parse::<i128>() {
        Ok(v) if v < 0 => Err(IngestError::NegativeCount {
            line,
            column: column.into(),
            value: raw.into(),
        }),
        Ok(v) => u64::try_from(v).map_err(|_| IngestError::NonInteger {
            line,
            column: column.into(),
            value: raw.into(),
        }),
        Err(_) if raw.starts_with('-') && raw[1..].parse::<f64>().is_ok() => {
            Err(IngestError::NegativeCount {
                line,
                column: column.into(),
                value: raw.into(),
            })
        }
        Err(_) => Err(IngestError::NonInteger {
            line,
            column: column.into(),
            value: raw.into(),
        }),
    }
}

fn parse_coord(raw: &str, column: &str, line: u64) -> Result<f64, IngestError> {
    raw.parse::<f64>()
        .ok()
        .filter(|v| v.is_finite())
        .ok_or_else(|| IngestError::Malformed {
            line,
            reason: format!("column {column:?} needs a finite number, got {raw:?}"),
        })
}

/// Divides each selected game's count by the region's total across all games.
///
/// Regions with a zero total are dropped and listed in [`Normalized::dropped`].
pub fn normalize(table: &CountTable, selected_games: &[String]) -> Result<Normalized, IngestError> {
    let columns = selected_games
        .iter()
        .map(|g| {
            table
                .game_index(g)
                .ok_or_else(|| IngestError::UnknownGame(g.clone()))
        })
        .collect::<Result<Vec<_>, _>>()?;

    let mut region_ids = Vec::with_capacity(table.len());
    let mut values = Vec::with_capacity(table.len() * columns.len());
    let mut dropped = Vec::new();
    for (i, region) in table.regions.iter().enumerate() {
        let total = table.totals[i];
        if total == 0 {
            log::warn!("dropping region {:?}: zero total", region.region_id);
            dropped.push(DroppedRegion {
                region_id: region.region_id.clone(),
                reason: "zero total".into(),
            });
            continue;
        }
        region_ids.push(region.region_id.clone());
        let denom = total as f64;
        values.extend(columns.iter().map(|&g| table.counts[i][g] as f64 / denom));
    }
    if region_ids.is_empty() {
        return Err(IngestError::EmptyMatrix);
    }

    let mut notes = Vec::new();
    if table.total_source == TotalSource::RowSum {
        notes.push("no total column: denominators are row sums over all listed games".into());
    }
    Ok(Normalized {
        matrix: FeatureMatrix {
            region_ids,
            feature_names: selected_games.to_vec(),
            values,
            excluded: Vec::new(),
        },
        dropped,
        notes,
    })
}

/// Removes the rows named in `exclude`, preserving the order of the rest.
pub fn filter_regions(matrix: &FeatureMatrix, exclude: &[String]) -> Result<Filtered, IngestError> {
    let wanted: HashSet<&str> = exclude.iter().map(String::as_str).collect();
    let present: HashMap<&str, usize> = matrix
        .region_ids
        .iter()
        .enumerate()
        .map(|(i, id)| (id.as_str(), i))
        .collect();

    let mut not_found = Vec::new();
    let mut seen = HashSet::new();
    for id in exclude {
        if !present.contains_key(id.as_str()) && seen.insert(id.as_str()) {
            not_found.push(id.clone());
        }
    }

    let keep: Vec<usize> = (0..matrix.n_rows())
        .filter(|&i| !wanted.contains(matrix.region_ids[i].as_str()))
        .collect();
    if keep.is_empty() {
        return Err(IngestError::EmptyMatrix);
    }
    let mut out = matrix.permuted(&keep);
    out.excluded.extend(
        matrix
            .region_ids
            .iter()
            .filter(|id| wanted.contains(id.as_str()))
            .cloned(),
    );
    Ok(Filtered {
        matrix: out,
        not_found,
    })
}

/// Reads a one-item-per-line list file; blank lines and `#` comments are skipped.
pub fn read_list(path: impl AsRef<Path>) -> Result<Vec<String>, IngestError> {
    let path = path.as_ref();
    let file = File::open(path).map_err(|source| IngestError::Io {
        path: path.display().to_string(),
        source,
    })?;
    let mut items = Vec::new();
    for line in BufReader::new(file).lines() {
        let line = line.map_err(|source| IngestError::Io {
            path: path.display().to_string(),
            source,
        })?;
        let item = line.split('#').next().unwrap_or("").trim();
        if !item.is_empty() {
            items.push(item.to_string());
        }
    }
    Ok(items)
}
