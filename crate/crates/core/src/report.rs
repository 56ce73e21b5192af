//! End-to-end clustering runs and their outputs: the JSON run report, the
//! labeled GeoJSON map, the assignment file and the pseudo-F plot.

use std::collections::{BTreeMap, HashMap, HashSet};
use std::fmt::Write as _;
use std::fs;
use std::io::Write as _;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;
use thiserror::Error;

use crate::contiguity::{load_adjacency, ContiguityError, ContiguityGraph, ContiguityRule, Edge, Provenance};
use crate::error::{Error, Result};
use crate::geometry::{feature_region_id, load_geojson, to_geojson};
use crate::ingest::{filter_regions, load_counts, normalize, read_list, FeatureMatrix, Point};
use crate::model_select::{scan_k, FStatSeries};
use crate::skater::{greedy_cuts, Partition};
use crate::synth::{SyntheticDataset, GENERATOR};

pub const REPORT_SCHEMA: &str = "regionkit.report/v1";

#[derive(Debug, Error)]
pub enum ExportError {
    #[error("geometry region {0:?} has no cluster label")]
    Unlabeled(String),
    #[error("feature {0} has no region_id")]
    MissingId(usize),
    #[error("document is not a FeatureCollection")]
    NotCollection,
    #[error("label file {path}: {reason}")]
    LabelFile { path: String, reason: String },
}

fn default_k_min() -> usize {
    2
}

fn default_k_max() -> usize {
    15
}

fn default_true() -> bool {
    true
}

/// Every parameter of a clustering run. Serialized verbatim into the report
/// as `config_echo`; feeding it back reproduces the run.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClusterConfig {
    pub counts: PathBuf,
    #[serde(default)]
    pub games: Option<PathBuf>,
    #[serde(default)]
    pub exclude: Option<PathBuf>,
    #[serde(default)]
    pub geojson_in: Option<PathBuf>,
    #[serde(default)]
    pub adjacency: Option<PathBuf>,
    #[serde(default)]
    pub queen: bool,
    /// Fixed group count; disables the scan when set.
    #[serde(default)]
    pub k: Option<usize>,
    #[serde(default = "default_k_min")]
    pub k_min: usize,
    #[serde(default = "default_k_max")]
    pub k_max: usize,
    /// Nearest-neighbour augmentation target degree; 0 disables it.
    #[serde(default)]
    pub neighbors: usize,
    #[serde(default = "default_true")]
    pub repair: bool,
    #[serde(default)]
    pub out: Option<PathBuf>,
    #[serde(default)]
    pub geojson_out: Option<PathBuf>,
    #[serde(default)]
    pub assignments: Option<PathBuf>,
    #[serde(default)]
    pub plot: Option<PathBuf>,
}

impl ClusterConfig {
    pub fn new(counts: impl Into<PathBuf>) -> Self {
        Self {
            counts: counts.into(),
            games: None,
            exclude: None,
            geojson_in: None,
            adjacency: None,
            queen: false,
            k: None,
            k_min: default_k_min(),
            k_max: default_k_max(),
            neighbors: 0,
            repair: true,
            out: None,
            geojson_out: None,
            assignments: None,
            plot: None,
        }
    }

    /// Accepts either a bare config or a full run report carrying `config_echo`.
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        let inner = value.get("config_echo").cloned().unwrap_or(value);
        serde_json::from_value(inner).map_err(|e| Error::Config(e.to_string()))
    }

    fn rule(&self) -> ContiguityRule {
        if self.queen {
            ContiguityRule::Queen
        } else {
            ContiguityRule::Rook
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RegionNote {
    pub region_id: String,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EdgeRecord {
    pub a: String,
    pub b: String,
    pub provenance: Provenance,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CutRecord {
    pub a: String,
    pub b: String,
    pub delta: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum AssignmentRole {
    Best,
    SecondBest,
    Fixed,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AssignmentRecord {
    pub k: usize,
    pub role: AssignmentRole,
    /// Group label per entry of `RunReport::region_ids`.
    pub labels: Vec<usize>,
    pub within_ssd: f64,
    pub cut_sequence: Vec<CutRecord>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub schema: String,
    pub n_regions: usize,
    pub n_features: usize,
    pub region_ids: Vec<String>,
    pub feature_names: Vec<String>,
    pub dropped_regions: Vec<RegionNote>,
    pub excluded_regions: Vec<RegionNote>,
    pub repair_edges: Vec<EdgeRecord>,
    pub knn_edges: Vec<EdgeRecord>,
    pub series: Option<FStatSeries>,
    pub assignments: Vec<AssignmentRecord>,
    pub warnings: Vec<String>,
    pub notes: Vec<String>,
    pub config_echo: ClusterConfig,
}

impl RunReport {
    /// The assignment written to the map and the assignment file.
    pub fn primary(&self) -> &AssignmentRecord {
        &self.assignments[0]
    }
}

/// Everything a run computes, before any file is written.
#[derive(Debug, Clone)]
pub struct RunOutcome {
    pub report: RunReport,
    pub graph: ContiguityGraph,
    pub features: FeatureMatrix,
    pub geojson: Option<Value>,
}

/// Runs the pipeline and writes every configured output atomically. On
/// failure nothing is left behind.
pub fn run_cluster(config: &ClusterConfig) -> Result<RunReport> {
    let outcome = compute(config)?;
    let mut outputs = Outputs::default();

    let mut report_bytes = serde_json::to_vec_pretty(&outcome.report).map_err(|e| Error::Internal(e.to_string()))?;
    report_bytes.push(b'\n');
    match &config.out {
        Some(path) => outputs.add(path, report_bytes),
        None => std::io::stdout()
            .write_all(&report_bytes)
            .map_err(|source| Error::Io { path: "<stdout>".into(), source })?,
    }

    let primary = outcome.report.primary();
    if let Some(path) = &config.assignments {
        outputs.add(path, labels_csv(&outcome.report.region_ids, &primary.labels, "cluster").into_bytes());
    }
    if let Some(path) = &config.geojson_out {
        let document = outcome.geojson.as_ref().ok_or_else(|| {
            Error::Config("--geojson-out needs --geojson-in".into())
        })?;
        let labels: HashMap<String, usize> = outcome
            .report
            .region_ids
            .iter()
            .cloned()
            .zip(primary.labels.iter().copied())
            .collect();
        let skipped: HashSet<String> = outcome
            .report
            .dropped_regions
            .iter()
            .chain(&outcome.report.excluded_regions)
            .map(|r| r.region_id.clone())
            .collect();
        let labeled = export_geojson(document, &labels, &skipped)?;
        let mut bytes = serde_json::to_vec_pretty(&labeled).map_err(|e| Error::Internal(e.to_string()))?;
        bytes.push(b'\n');
        outputs.add(path, bytes);
    }
    if let Some(path) = &config.plot {
        match &outcome.report.series {
            Some(series) => outputs.add(path, plot_fstat(series).into_bytes()),
            None => log::warn!("--plot ignored: fixed k run has no pseudo-F series"),
        }
    }
    outputs.commit()?;
    Ok(outcome.report)
}

/// Runs the pipeline without writing anything.
pub fn compute(config: &ClusterConfig) -> Result<RunOutcome> {
    if config.geojson_in.is_some() == config.adjacency.is_some() {
        return Err(Error::Config("supply exactly one of --geojson-in and --adjacency".into()));
    }
    let table = load_counts(&config.counts)?;
    let games = match &config.games {
        Some(path) => read_list(path)?,
        None => table.games.clone(),
    };
    let normalized = normalize(&table, &games)?;
    let exclude = match &config.exclude {
        Some(path) => read_list(path)?,
        None => Vec::new(),
    };
    let filtered = filter_regions(&normalized.matrix, &exclude)?;
    let features = filtered.matrix;
    let ids = features.region_ids.clone();

    let mut warnings: Vec<String> = filtered
        .not_found
        .iter()
        .map(|id| format!("excluded region {id:?} not found"))
        .collect();
    let mut notes = normalized.notes.clone();

    let (graph, centroids, geojson) = if let Some(path) = &config.geojson_in {
        let collection = load_geojson(path)?;
        let full = ContiguityGraph::from_polygons(&collection.regions, config.rule())?;
        let graph = full.align_to(&ids).map_err(|e| match e {
            ContiguityError::UnknownRegion(id) => Error::Config(format!("region {id:?} has no geometry in {}", path.display())),
            other => other.into(),
        })?;
        let by_id: HashMap<&str, Option<Point>> = collection
            .regions
            .iter()
            .map(|r| (r.region_id.as_str(), r.centroid()))
            .collect();
        let centroids: Vec<Option<Point>> = ids.iter().map(|id| by_id[id.as_str()]).collect();
        (graph, centroids, Some(collection.document))
    } else {
        let path = config.adjacency.as_ref().expect("checked above");
        let known: Vec<String> = table.regions.iter().map(|r| r.region_id.clone()).collect();
        let pairs = load_adjacency(path)?;
        let full = ContiguityGraph::from_adjacency_list(&pairs, &known)?;
        let graph = full.align_to(&ids)?;
        let by_id: HashMap<&str, Option<Point>> =
            table.regions.iter().map(|r| (r.region_id.as_str(), r.centroid)).collect();
        let centroids: Vec<Option<Point>> = ids.iter().map(|id| by_id[id.as_str()]).collect();
        (graph, centroids, None)
    };

    let mut graph = graph;
    if config.neighbors > 0 {
        graph = graph.knn_augment(&centroids, config.neighbors)?;
    }
    if config.repair {
        graph = graph.repair_connectivity(&centroids)?;
    } else if !graph.is_connected() {
        return Err(crate::skater::SkaterError::Disconnected {
            components: graph.component_count(),
        }
        .into());
    }

    let n = features.n_rows();
    let mut assignments = Vec::new();
    let series = match config.k {
        Some(k) => {
            let seq = greedy_cuts(&graph, &features, k)?;
            assignments.push((AssignmentRole::Fixed, seq.partition(&features, k)?));
            None
        }
        None => {
            let k_max = config.k_max.min(n.saturating_sub(1));
            if k_max < config.k_max {
                warnings.push(format!("k_max lowered from {} to {k_max} (n = {n})", config.k_max));
            }
            let scan = scan_k(&graph, &features, config.k_min, k_max)?;
            let series = scan.series;
            assignments.push((AssignmentRole::Best, scan.cuts.partition(&features, series.best_k)?));
            if let Some(second) = series.second_best_k {
                assignments.push((AssignmentRole::SecondBest, scan.cuts.partition(&features, second)?));
            }
            if series.degenerate {
                warnings.push("pseudo-F is infinite for some k: zero within-group dispersion".into());
            }
            Some(series)
        }
    };

    for (_, p) in &assignments {
        check_contiguity(&graph, p)?;
    }
    notes.push(format!("contiguity rule: {:?}", config.rule()).to_lowercase());

    let edge_records = |prov: Provenance| -> Vec<EdgeRecord> {
        graph
            .edges_with(prov)
            .into_iter()
            .map(|Edge { a, b, provenance }| EdgeRecord {
                a: ids[a].clone(),
                b: ids[b].clone(),
                provenance,
            })
            .collect()
    };

    let report = RunReport {
        schema: REPORT_SCHEMA.into(),
        n_regions: n,
        n_features: features.n_features(),
        region_ids: ids.clone(),
        feature_names: features.feature_names.clone(),
        dropped_regions: normalized
            .dropped
            .iter()
            .map(|d| RegionNote {
                region_id: d.region_id.clone(),
                reason: d.reason.clone(),
            })
            .collect(),
        excluded_regions: features
            .excluded
            .iter()
            .map(|id| RegionNote {
                region_id: id.clone(),
                reason: "exclusion list".into(),
            })
            .collect(),
        repair_edges: edge_records(Provenance::Repair),
        knn_edges: edge_records(Provenance::Knn),
        series,
        assignments: assignments
            .into_iter()
            .map(|(role, p)| AssignmentRecord {
                k: p.k,
                role,
                cut_sequence: p
                    .cut_sequence
                    .iter()
                    .map(|c| CutRecord {
                        a: ids[c.a].clone(),
                        b: ids[c.b].clone(),
                        delta: c.delta,
                    })
                    .collect(),
                labels: p.assignment,
                within_ssd: p.within_ssd,
            })
            .collect(),
        warnings,
        notes,
        config_echo: config.clone(),
    };
    Ok(RunOutcome {
        report,
        graph,
        features,
        geojson,
    })
}

/// Final gate: every group must induce a connected subgraph.
pub fn check_contiguity(graph: &ContiguityGraph, partition: &Partition) -> Result<()> {
    for (label, group) in partition.groups().iter().enumerate() {
        if !graph.induces_connected(group) {
            return Err(Error::Internal(format!(
                "group {} of the k = {} partition is not contiguous",
                label + 1,
                partition.k
            )));
        }
    }
    Ok(())
}

/// Adds an integer `cluster` property to every feature. Features whose
/// region is in `skipped` get `"cluster": null`; any other unlabeled feature
/// is an error.
pub fn export_geojson(
    document: &Value,
    assignment: &HashMap<String, usize>,
    skipped: &HashSet<String>,
) -> Result<Value, ExportError> {
    let mut out = document.clone();
    let features = out
        .get_mut("features")
        .and_then(Value::as_array_mut)
        .ok_or(ExportError::NotCollection)?;
    for (index, feature) in features.iter_mut().enumerate() {
        let id = feature_region_id(feature).ok_or(ExportError::MissingId(index))?;
        let cluster = match assignment.get(&id) {
            Some(&label) => Value::from(label),
            None if skipped.contains(&id) => Value::Null,
            None => return Err(ExportError::Unlabeled(id)),
        };
        let props = feature
            .get_mut("properties")
            .and_then(Value::as_object_mut)
            .ok_or(ExportError::MissingId(index))?;
        props.insert("cluster".into(), cluster);
    }
    Ok(out)
}

/// `region_id,<column>` CSV.
pub fn labels_csv(ids: &[String], labels: &[usize], column: &str) -> String {
    let mut text = format!("region_id,{column}\n");
    for (id, label) in ids.iter().zip(labels) {
        writeln!(text, "{id},{label}").unwrap();
    }
    text
}

/// Reads a two-column label file with a header row, keyed by region id.
pub fn read_labels(path: impl AsRef<Path>) -> Result<BTreeMap<String, String>, ExportError> {
    let path = path.as_ref();
    let fail = |reason: String| ExportError::LabelFile {
        path: path.display().to_string(),
        reason,
    };
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| fail(e.to_string()))?;
    let mut labels = BTreeMap::new();
    for record in rdr.records() {
        let record = record.map_err(|e| fail(e.to_string()))?;
        if record.len() != 2 {
            return Err(fail("expected 2 columns".into()));
        }
        if labels.insert(record[0].to_string(), record[1].to_string()).is_some() {
            return Err(fail(format!("duplicate region id {:?}", &record[0])));
        }
    }
    Ok(labels)
}

/// ARI between two label files over their shared region ids, which must be
/// identical sets.
pub fn score_label_files(truth: impl AsRef<Path>, predicted: impl AsRef<Path>) -> Result<f64> {
    let a = read_labels(&truth)?;
    let b = read_labels(&predicted)?;
    if a.len() != b.len() || a.keys().any(|k| !b.contains_key(k)) {
        return Err(Error::Config("label files cover different region ids".into()));
    }
    let truth: Vec<&String> = a.values().collect();
    let predicted: Vec<&String> = a.keys().map(|k| &b[k]).collect();
    Ok(crate::synth::adjusted_rand_index(&truth, &predicted)?)
}

const PLOT_W: f64 = 640.0;
const PLOT_H: f64 = 400.0;
const MARGIN_L: f64 = 70.0;
const MARGIN_R: f64 = 20.0;
const MARGIN_T: f64 = 30.0;
const MARGIN_B: f64 = 50.0;

/// Pseudo-F against k as SVG: hollow markers for every k, one solid marker
/// at `best_k`. Infinite values are pinned to the top edge.
pub fn plot_fstat(series: &FStatSeries) -> String {
    let entries = &series.entries;
    let k_lo = entries.iter().map(|e| e.k).min().unwrap_or(0) as f64;
    let k_hi = entries.iter().map(|e| e.k).max().unwrap_or(0) as f64;
    let finite_max = entries
        .iter()
        .map(|e| e.ch)
        .filter(|v| v.is_finite())
        .fold(0.0f64, f64::max);
    let y_top = if finite_max > 0.0 { finite_max * 1.1 } else { 1.0 };

    let inner_w = PLOT_W - MARGIN_L - MARGIN_R;
    let inner_h = PLOT_H - MARGIN_T - MARGIN_B;
    let x_of = |k: usize| {
        if k_hi > k_lo {
            MARGIN_L + (k as f64 - k_lo) / (k_hi - k_lo) * inner_w
        } else {
            MARGIN_L + inner_w / 2.0
        }
    };
    let y_of = |ch: f64| {
        let v = if ch.is_finite() { ch.max(0.0) } else { y_top };
        MARGIN_T + inner_h - v / y_top * inner_h
    };

    let mut svg = String::new();
    let _ = writeln!(
        svg,
        r#"<svg xmlns="http://www.w3.org/2000/svg" width="{PLOT_W}" height="{PLOT_H}" viewBox="0 0 {PLOT_W} {PLOT_H}">"#
    );
    let _ = writeln!(svg, r#"<rect x="0" y="0" width="{PLOT_W}" height="{PLOT_H}" fill="white"/>"#);
    let (x0, y0, x1, y1) = (MARGIN_L, PLOT_H - MARGIN_B, PLOT_W - MARGIN_R, MARGIN_T);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x1}" y2="{y0}" stroke="black"/>"#);
    let _ = writeln!(svg, r#"<line x1="{x0}" y1="{y0}" x2="{x0}" y2="{y1}" stroke="black"/>"#);
    for e in entries {
        let x = x_of(e.k);
        let _ = writeln!(
            svg,
            r#"<text x="{x:.2}" y="{:.2}" font-size="12" text-anchor="middle">{}</text>"#,
            y0 + 18.0,
            e.k
        );
    }
    for t in 0..=4 {
        let v = y_top * t as f64 / 4.0;
        let _ = writeln!(
            svg,
            r#"<text x="{:.2}" y="{:.2}" font-size="12" text-anchor="end">{}</text>"#,
            x0 - 6.0,
            y_of(v) + 4.0,
            format_tick(v)
        );
    }
    let _ = writeln!(
        svg,
        r#"<text x="{:.2}" y="{:.2}" font-size="13" text-anchor="middle">number of groups (k)</text>"#,
        MARGIN_L + inner_w / 2.0,
        PLOT_H - 10.0
    );
    let _ = writeln!(
        svg,
        r#"<text x="16" y="{:.2}" font-size="13" text-anchor="middle" transform="rotate(-90 16 {:.2})">pseudo F-statistic</text>"#,
        MARGIN_T + inner_h / 2.0,
        MARGIN_T + inner_h / 2.0
    );

    let mut sorted: Vec<_> = entries.iter().collect();
    sorted.sort_by_key(|e| e.k);
    if sorted.len() > 1 {
        let points: Vec<String> = sorted
            .iter()
            .map(|e| format!("{:.2},{:.2}", x_of(e.k), y_of(e.ch)))
            .collect();
        let _ = writeln!(
            svg,
            r#"<polyline points="{}" fill="none" stroke="gray" stroke-width="1"/>"#,
            points.join(" ")
        );
    }
    for e in sorted {
        let (x, y) = (x_of(e.k), y_of(e.ch));
        let (class, fill) = if e.k == series.best_k {
            ("fstat-best", "black")
        } else {
            ("fstat-point", "white")
        };
        let _ = writeln!(
            svg,
            r#"<circle class="{class}" data-k="{}" cx="{x:.2}" cy="{y:.2}" r="5" fill="{fill}" stroke="black" stroke-width="1.5"><title>k = {}: {}</title></circle>"#,
            e.k,
            e.k,
            format_ch(e.ch)
        );
    }
    svg.push_str("</svg>\n");
    svg
}

fn format_tick(v: f64) -> String {
    if v >= 100.0 {
        format!("{v:.0}")
    } else {
        format!("{v:.2}")
    }
}

fn format_ch(v: f64) -> String {
    if v.is_finite() {
        format!("{v:.4}")
    } else {
        "+inf".into()
    }
}

/// Writes `counts.csv`, `grid.geojson`, `truth.csv` and `scenario.json`
/// under `dir`.
pub fn write_synthetic(data: &SyntheticDataset, dir: impl AsRef<Path>) -> Result<()> {
    let dir = dir.as_ref();
    fs::create_dir_all(dir).map_err(|source| Error::Io {
        path: dir.display().to_string(),
        source,
    })?;
    let mut counts = Vec::new();
    data.table
        .write_csv(&mut counts)
        .map_err(|e| Error::Internal(e.to_string()))?;
    let mut grid = serde_json::to_vec_pretty(&to_geojson(&data.geometry)).map_err(|e| Error::Internal(e.to_string()))?;
    grid.push(b'\n');
    let manifest = serde_json::json!({
        "scenario": data.scenario,
        "generator": GENERATOR,
        "files": {"counts": "counts.csv", "geometry": "grid.geojson", "truth": "truth.csv"},
    });
    let mut manifest = serde_json::to_vec_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    manifest.push(b'\n');

    let mut outputs = Outputs::default();
    outputs.add(dir.join("counts.csv"), counts);
    outputs.add(dir.join("grid.geojson"), grid);
    outputs.add(dir.join("truth.csv"), labels_csv(&data.region_ids(), &data.truth, "group").into_bytes());
    outputs.add(dir.join("scenario.json"), manifest);
    outputs.commit()
}

/// Files staged in memory and published together via temp file + rename.
#[derive(Default)]
struct Outputs {
    files: Vec<(PathBuf, Vec<u8>)>,
}

impl Outputs {
    fn add(&mut self, path: impl Into<PathBuf>, bytes: Vec<u8>) {
        self.files.push((path.into(), bytes));
    }

    fn commit(self) -> Result<()> {
        let io = |path: &Path, source: std::io::Error| Error::Io {
            path: path.display().to_string(),
            source,
        };
        let mut staged = Vec::with_capacity(self.files.len());
        for (path, bytes) in &self.files {
            let dir = match path.parent() {
                Some(p) if !p.as_os_str().is_empty() => p,
                _ => Path::new("."),
            };
            let mut tmp = tempfile::NamedTempFile::new_in(dir).map_err(|e| io(path, e))?;
            tmp.write_all(bytes).map_err(|e| io(path, e))?;
            staged.push((path, tmp));
        }
        let mut published: Vec<&PathBuf> = Vec::new();
        for (path, tmp) in staged {
            if let Err(e) = tmp.persist(path) {
                for done in published {
                    let _ = fs::remove_file(done);
                }
                return Err(io(path, e.error));
            }
            published.push(path);
        }
        Ok(())
    }
}
