//! Contiguity-constrained regionalization of per-region count data.
//!
//! The pipeline turns a table of per-region play counts into contiguous
//! groups of regions:
//!
//! 1. [`ingest`]: load the count table, divide each selected game's count by
//!    the region's total, drop excluded regions.
//! 2. [`contiguity`]: build the region adjacency graph from polygons (rook or
//!    queen) or an explicit pair list, then join stray components.
//! 3. [`skater`]: weight edges by Euclidean feature distance, take the
//!    minimum spanning tree and cut it greedily into `k` groups.
//! 4. [`model_select`]: score each `k` with the Calinski-Harabasz pseudo
//!    F-statistic and pick the best and runner-up.
//!
//! [`synth`] generates planted-partition grids for testing recovery, and
//! [`report`] wires everything into a single run with JSON, GeoJSON, CSV and
//! SVG outputs. Runnable walkthroughs live in the crate's `examples/`.

pub mod contiguity;
pub mod error;
pub mod geometry;
pub mod ingest;
pub mod model_select;
pub mod report;
pub mod skater;
pub mod synth;

pub use contiguity::{ContiguityGraph, ContiguityRule, Provenance};
pub use error::{Error, ErrorKind, Result};
pub use ingest::{CountTable, FeatureMatrix, Point, RegionRecord};
pub use model_select::{calinski_harabasz, scan_k, select_best, FStatSeries};
pub use report::{run_cluster, ClusterConfig, RunReport};
pub use skater::{greedy_cuts, partition, CutSequence, Partition};
pub use synth::{adjusted_rand_index, generate, PlantedScenario};
