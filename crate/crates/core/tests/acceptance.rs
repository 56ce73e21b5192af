//! Acceptance suite. Every criterion prints a single `PASS`/`FAIL` line;
//! run with `cargo test --test acceptance -- --nocapture` to see them.

mod oracle;

use std::collections::HashMap;
use std::path::{Path, PathBuf};
use std::process::Command;
use std::sync::OnceLock;
use std::time::{Duration, Instant};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use regionkit::ingest::{normalize, parse_counts, FeatureMatrix};
use regionkit::report::{compute, write_synthetic, RunOutcome};
use regionkit::skater::{greedy_cuts, mst, WeightedEdge, WeightedGraph};
use regionkit::{
    adjusted_rand_index, calinski_harabasz, generate, partition, run_cluster, ClusterConfig, ContiguityGraph,
    ContiguityRule, PlantedScenario, Provenance,
};
use serde_json::Value;

const FIXTURE: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/fixtures/planted5");
const SCHEMA: &str = concat!(env!("CARGO_MANIFEST_DIR"), "/schema/report.schema.json");

fn verdict(id: u32, name: &str, pass: bool, detail: impl std::fmt::Display) {
    let tag = if pass { "PASS" } else { "FAIL" };
    println!("[{tag}] criterion {id}: {name}: {detail}");
    assert!(pass, "criterion {id} ({name}) failed: {detail}");
}

/// Labels of one emitted clustering plus the graph it must respect.
struct Emitted {
    n: usize,
    edges: Vec<(usize, usize)>,
    labels: Vec<usize>,
}

impl Emitted {
    fn from_graph(graph: &ContiguityGraph, labels: Vec<usize>) -> Self {
        Self {
            n: graph.len(),
            edges: graph.edges().map(|e| (e.a, e.b)).collect(),
            labels,
        }
    }

    fn violations(&self) -> usize {
        let mut groups: HashMap<usize, Vec<usize>> = HashMap::new();
        for (i, &l) in self.labels.iter().enumerate() {
            groups.entry(l).or_default().push(i);
        }
        groups
            .values()
            .filter(|members| !oracle::induces_connected(self.n, &self.edges, members))
            .count()
    }
}

fn gate(emitted: &[Emitted]) -> (usize, usize) {
    let violations = emitted.iter().map(Emitted::violations).sum();
    (emitted.len(), violations)
}

fn outcome_emitted(outcome: &RunOutcome) -> Vec<Emitted> {
    outcome
        .report
        .assignments
        .iter()
        .map(|a| Emitted::from_graph(&outcome.graph, a.labels.clone()))
        .collect()
}

fn random_rows(rng: &mut ChaCha8Rng, n: usize, m: usize) -> Vec<Vec<f64>> {
    (0..n).map(|_| (0..m).map(|_| rng.random::<f64>()).collect()).collect()
}

fn feature_matrix(ids: &[String], rows: &[Vec<f64>]) -> FeatureMatrix {
    let names = (0..rows[0].len()).map(|g| format!("f{g}")).collect();
    FeatureMatrix::from_rows(ids.to_vec(), names, rows.to_vec()).unwrap()
}

/// Random connected graph: a random labelled tree plus extra edges.
fn random_connected_graph(rng: &mut ChaCha8Rng, n: usize, extra_p: f64) -> ContiguityGraph {
    let ids: Vec<String> = (0..n).map(|i| format!("r{i:02}")).collect();
    let mut graph = ContiguityGraph::isolated(ids).unwrap();
    let mut perm: Vec<usize> = (0..n).collect();
    for i in (1..n).rev() {
        perm.swap(i, rng.random_range(0..=i));
    }
    for i in 1..n {
        let j = rng.random_range(0..i);
        graph.add_edge(perm[i], perm[j], Provenance::Explicit);
    }
    for a in 0..n {
        for b in a + 1..n {
            if rng.random_bool(extra_p) {
                graph.add_edge(a, b, Provenance::Explicit);
            }
        }
    }
    graph
}

// Criterion 1 ---------------------------------------------------------------

struct GreedyCheck {
    mismatches: Vec<String>,
    emitted: Vec<Emitted>,
    elapsed: Duration,
}

fn greedy_check() -> &'static GreedyCheck {
    static CELL: OnceLock<GreedyCheck> = OnceLock::new();
    CELL.get_or_init(|| {
        let start = Instant::now();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0001);
        let mut mismatches = Vec::new();
        let mut emitted = Vec::new();
        for case in 0..200 {
            let n = rng.random_range(3..=9);
            let m = rng.random_range(1..=3);
            let k = rng.random_range(2..=3);
            let graph = random_connected_graph(&mut rng, n, 0.3);
            let rows = random_rows(&mut rng, n, m);
            let features = feature_matrix(graph.node_ids(), &rows);

            let seq = greedy_cuts(&graph, &features, k).unwrap();
            let got: Vec<(usize, usize)> = seq.cuts.iter().map(|c| (c.a, c.b)).collect();

            let costs: Vec<(usize, usize, f64)> = graph
                .edges()
                .map(|e| (e.a, e.b, oracle::sq_dist(&rows[e.a], &rows[e.b]).sqrt()))
                .collect();
            let tree = oracle::prim(n, &costs);
            let want = oracle::greedy_cuts(n, &tree, &rows, k - 1);
            let want_edges: Vec<(usize, usize)> = want.iter().map(|&(a, b, _)| (a, b)).collect();
            let delta_ok = seq
                .cuts
                .iter()
                .zip(&want)
                .all(|(c, w)| (c.delta - w.2).abs() <= 1e-9 * w.2.abs().max(1e-12));
            if got != want_edges || !delta_ok {
                mismatches.push(format!("case {case}: n={n} k={k} got {got:?} want {want_edges:?}"));
            }
            let p = partition(&graph, &features, k).unwrap();
            emitted.push(Emitted::from_graph(&graph, p.assignment));
        }
        GreedyCheck {
            mismatches,
            emitted,
            elapsed: start.elapsed(),
        }
    })
}

#[test]
fn criterion_1_greedy_cuts_match_brute_force() {
    let check = greedy_check();
    let pass = check.mismatches.is_empty() && check.elapsed < Duration::from_secs(10);
    verdict(
        1,
        "greedy cuts vs brute-force oracle",
        pass,
        format!(
            "{}/200 sequences identical in {:.2?}{}",
            200 - check.mismatches.len(),
            check.elapsed,
            check.mismatches.first().map(|m| format!("; first mismatch {m}")).unwrap_or_default()
        ),
    );
}

// Criterion 2 ---------------------------------------------------------------

#[test]
fn criterion_2_mst_matches_enumeration() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0002);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(2..=6);
        let graph = random_connected_graph(&mut rng, n, 0.5);
        // Half the instances use small integer costs to force ties.
        let integer = rng.random_bool(0.5);
        let edges: Vec<WeightedEdge> = graph
            .edges()
            .map(|e| WeightedEdge {
                a: e.a,
                b: e.b,
                cost: if integer {
                    rng.random_range(1..=4) as f64
                } else {
                    rng.random::<f64>()
                },
            })
            .collect();
        let triples: Vec<(usize, usize, f64)> = edges.iter().map(|e| (e.a, e.b, e.cost)).collect();
        let tree = mst(&WeightedGraph { base: graph, edges }).unwrap();
        let exhaustive = oracle::min_spanning_weight(n, &triples);
        worst = worst.max((tree.total_weight() - exhaustive).abs());
        assert_eq!(tree.edges.len(), n - 1);
    }
    let elapsed = start.elapsed();
    verdict(
        2,
        "MST vs exhaustive spanning trees",
        worst <= 1e-12 && elapsed < Duration::from_secs(5),
        format!("100 graphs, max |difference| {worst:.3e} in {elapsed:.2?}"),
    );
}

// Criterion 3 ---------------------------------------------------------------

#[test]
fn criterion_3_ch_matches_definition() {
    let start = Instant::now();
    let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0003);
    let mut worst: f64 = 0.0;
    for _ in 0..100 {
        let n = rng.random_range(4..=60);
        let m = rng.random_range(1..=8);
        let k = rng.random_range(2..n);
        let rows = random_rows(&mut rng, n, m);
        // Every label used at least once, then shuffled.
        let mut labels: Vec<usize> = (0..n).map(|i| if i < k { i + 1 } else { rng.random_range(1..=k) }).collect();
        for i in (1..n).rev() {
            labels.swap(i, rng.random_range(0..=i));
        }
        let ids: Vec<String> = (0..n).map(|i| format!("r{i:02}")).collect();
        let got = calinski_harabasz(&feature_matrix(&ids, &rows), &labels).unwrap();
        let want = oracle::calinski_harabasz(&rows, &labels);
        worst = worst.max((got - want).abs() / want.abs());
    }
    let elapsed = start.elapsed();
    verdict(
        3,
        "pseudo-F vs direct definition",
        worst <= 1e-9 && elapsed < Duration::from_secs(1),
        format!("100 instances, max relative error {worst:.3e} in {elapsed:.2?}"),
    );
}

// Criterion 4 ---------------------------------------------------------------

fn truth_by_id(data: &regionkit::synth::SyntheticDataset) -> HashMap<String, usize> {
    data.region_ids().into_iter().zip(data.truth.iter().copied()).collect()
}

fn ari_against(truth: &HashMap<String, usize>, outcome: &RunOutcome) -> f64 {
    let ids = &outcome.report.region_ids;
    let t: Vec<usize> = ids.iter().map(|id| truth[id]).collect();
    adjusted_rand_index(&t, &outcome.report.primary().labels).unwrap()
}

fn synth_config(dir: &Path) -> ClusterConfig {
    let mut config = ClusterConfig::new(dir.join("counts.csv"));
    config.geojson_in = Some(dir.join("grid.geojson"));
    config
}

struct PlantedCheck {
    exact_ari: usize,
    best_is_5: usize,
    slowest: Duration,
    emitted: Vec<Emitted>,
}

fn planted_check() -> &'static PlantedCheck {
    static CELL: OnceLock<PlantedCheck> = OnceLock::new();
    CELL.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let (mut exact_ari, mut best_is_5) = (0, 0);
        let mut slowest = Duration::ZERO;
        let mut emitted = Vec::new();
        for seed in 0..100 {
            let start = Instant::now();
            let data = generate(&PlantedScenario { seed, ..PlantedScenario::default() }).unwrap();
            let dir = tmp.path().join(format!("seed{seed}"));
            write_synthetic(&data, &dir).unwrap();
            let truth = truth_by_id(&data);

            let mut fixed = synth_config(&dir);
            fixed.k = Some(5);
            let fixed = compute(&fixed).unwrap();
            if ari_against(&truth, &fixed) == 1.0 {
                exact_ari += 1;
            }

            let mut scan = synth_config(&dir);
            scan.k_min = 2;
            scan.k_max = 10;
            let scan = compute(&scan).unwrap();
            if scan.report.series.as_ref().unwrap().best_k == 5 {
                best_is_5 += 1;
            }
            slowest = slowest.max(start.elapsed());
            emitted.extend(outcome_emitted(&fixed));
            emitted.extend(outcome_emitted(&scan));
        }
        PlantedCheck {
            exact_ari,
            best_is_5,
            slowest,
            emitted,
        }
    })
}

#[test]
fn criterion_4_planted_recovery() {
    let check = planted_check();
    let pass = check.exact_ari >= 95 && check.best_is_5 >= 90 && check.slowest < Duration::from_secs(5);
    verdict(
        4,
        "planted recovery, 12×12, k = 5, concentration 0.8",
        pass,
        format!(
            "ARI = 1 on {}/100, best k = 5 on {}/100, slowest seed {:.2?}",
            check.exact_ari, check.best_is_5, check.slowest
        ),
    );
}

// Criterion 5 ---------------------------------------------------------------

struct NoiselessCheck {
    seeded_exact: usize,
    seeded_failures: Vec<String>,
    sweep_runs: usize,
    sweep_failures: Vec<String>,
    emitted: Vec<Emitted>,
}

fn noiseless_check() -> &'static NoiselessCheck {
    static CELL: OnceLock<NoiselessCheck> = OnceLock::new();
    CELL.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(0x5eed_0005);
        let mut check = NoiselessCheck {
            seeded_exact: 0,
            seeded_failures: Vec::new(),
            sweep_runs: 0,
            sweep_failures: Vec::new(),
            emitted: Vec::new(),
        };

        // 100 seeds, each on a random grid and group count, through the
        // file-based pipeline.
        for seed in 0..100u64 {
            let (width, height) = loop {
                let w = rng.random_range(1..=20);
                let h = rng.random_range(1..=20);
                if w * h >= 2 {
                    break (w, h);
                }
            };
            let k_true = rng.random_range(1..=8.min(width * height));
            let scenario = PlantedScenario {
                width,
                height,
                k_true,
                concentration: 1.0,
                seed,
                ..PlantedScenario::default()
            };
            let data = generate(&scenario).unwrap();
            let dir = tmp.path().join(format!("seed{seed}"));
            write_synthetic(&data, &dir).unwrap();
            let mut config = synth_config(&dir);
            config.k = Some(k_true);
            let outcome = compute(&config).unwrap();
            if ari_against(&truth_by_id(&data), &outcome) == 1.0 {
                check.seeded_exact += 1;
            } else {
                check.seeded_failures.push(format!("{width}×{height} k={k_true} seed={seed}"));
            }
            check.emitted.extend(outcome_emitted(&outcome));
        }

        // Every grid up to 20×20 with every feasible k ≤ 8, one signature
        // game per group, in memory.
        for width in 1..=20 {
            for height in 1..=20 {
                for k_true in 1..=8.min(width * height) {
                    if width * height < 2 {
                        continue;
                    }
                    let scenario = PlantedScenario {
                        width,
                        height,
                        k_true,
                        signature_games_per_group: 1,
                        concentration: 1.0,
                        seed: (width * 1000 + height * 10 + k_true) as u64,
                        ..PlantedScenario::default()
                    };
                    let data = generate(&scenario).unwrap();
                    let features = normalize(&data.table, &data.table.games).unwrap().matrix;
                    let graph = ContiguityGraph::from_polygons(&data.geometry, ContiguityRule::Rook).unwrap();
                    let p = partition(&graph, &features, k_true).unwrap();
                    check.sweep_runs += 1;
                    if adjusted_rand_index(&data.truth, &p.assignment).unwrap() != 1.0 {
                        check.sweep_failures.push(format!("{width}×{height} k={k_true}"));
                    }
                    check.emitted.push(Emitted::from_graph(&graph, p.assignment));
                }
            }
        }
        check
    })
}

#[test]
fn criterion_5_noiseless_identity() {
    let check = noiseless_check();
    let pass = check.seeded_exact == 100 && check.sweep_failures.is_empty();
    verdict(
        5,
        "noiseless recovery, grids up to 20×20, k ≤ 8",
        pass,
        format!(
            "ARI = 1 on {}/100 seeds and {}/{} grid sweep runs{}",
            check.seeded_exact,
            check.sweep_runs - check.sweep_failures.len(),
            check.sweep_runs,
            check
                .seeded_failures
                .iter()
                .chain(&check.sweep_failures)
                .next()
                .map(|f| format!("; first failure {f}"))
                .unwrap_or_default()
        ),
    );
}

// Criterion 6 ---------------------------------------------------------------

#[test]
fn criterion_6_normalization_anchors() {
    let csv = "region,total,ShanghaiMahjong,SichuanMahjong\n\
               shanghai,272730,12127,0\n\
               chongqing,208271,0,20791\n";
    let table = parse_counts(csv.as_bytes()).unwrap();
    let m = normalize(&table, &table.games).unwrap().matrix;
    let shanghai = m.get(0, 0);
    let chongqing = m.get(1, 1);
    let pass = (shanghai - 0.044465).abs() <= 1e-6 && (chongqing - 0.099827).abs() <= 1e-6;
    verdict(
        6,
        "count shares",
        pass,
        format!("12127/272730 = {shanghai:.7}, 20791/208271 = {chongqing:.7}"),
    );
}

// Criterion 9 (run before 7 needs it) ---------------------------------------

struct CliGolden {
    schema_errors: Vec<String>,
    features: usize,
    labeled_in_range: usize,
    solid_markers: Vec<String>,
    best_k: usize,
    elapsed: Duration,
    emitted: Vec<Emitted>,
}

fn cli_golden() -> &'static CliGolden {
    static CELL: OnceLock<CliGolden> = OnceLock::new();
    CELL.get_or_init(|| {
        let tmp = tempfile::tempdir().unwrap();
        let out = tmp.path();
        let fixture = PathBuf::from(FIXTURE);
        let start = Instant::now();
        let status = Command::new(env!("CARGO_BIN_EXE_regionkit"))
            .arg("cluster")
            .arg("--counts")
            .arg(fixture.join("counts.csv"))
            .arg("--geojson-in")
            .arg(fixture.join("grid.geojson"))
            .args(["--k-min", "2", "--k-max", "10"])
            .arg("--out")
            .arg(out.join("report.json"))
            .arg("--geojson-out")
            .arg(out.join("clusters.geojson"))
            .arg("--assignments")
            .arg(out.join("assignments.csv"))
            .arg("--plot")
            .arg(out.join("fstat.svg"))
            .status()
            .unwrap();
        let elapsed = start.elapsed();
        assert!(status.success(), "cluster exited with {status}");

        let read_json = |p: &Path| -> Value { serde_json::from_slice(&std::fs::read(p).unwrap()).unwrap() };
        let schema = read_json(Path::new(SCHEMA));
        let report = read_json(&out.join("report.json"));
        let validator = jsonschema::validator_for(&schema).unwrap();
        let schema_errors = validator.iter_errors(&report).map(|e| e.to_string()).collect();

        let geo = read_json(&out.join("clusters.geojson"));
        let features = geo["features"].as_array().unwrap();
        let labeled_in_range = features
            .iter()
            .filter(|f| {
                f["properties"]["cluster"]
                    .as_u64()
                    .is_some_and(|c| (1..=5).contains(&c))
            })
            .count();

        let svg = std::fs::read_to_string(out.join("fstat.svg")).unwrap();
        let solid_markers = svg
            .lines()
            .filter(|l| l.contains("<circle") && l.contains(r#"fill="black""#))
            .filter_map(|l| l.split(r#"data-k=""#).nth(1)?.split('"').next().map(str::to_string))
            .collect();

        // Gate input: the repaired graph is rebuilt independently from the
        // fixture polygons, which are a full grid and need no repair.
        let best = &report["assignments"][0];
        let ids: Vec<String> = report["region_ids"]
            .as_array()
            .unwrap()
            .iter()
            .map(|v| v.as_str().unwrap().to_string())
            .collect();
        let geometry = regionkit::geometry::load_geojson(fixture.join("grid.geojson")).unwrap();
        let graph = ContiguityGraph::from_polygons(&geometry.regions, ContiguityRule::Rook)
            .unwrap()
            .align_to(&ids)
            .unwrap();
        let emitted = report["assignments"]
            .as_array()
            .unwrap()
            .iter()
            .map(|a| {
                let labels = a["labels"].as_array().unwrap().iter().map(|v| v.as_u64().unwrap() as usize).collect();
                Emitted::from_graph(&graph, labels)
            })
            .collect();

        CliGolden {
            schema_errors,
            features: features.len(),
            labeled_in_range,
            solid_markers,
            best_k: best["k"].as_u64().unwrap() as usize,
            elapsed,
            emitted,
        }
    })
}

#[test]
fn criterion_9_cli_golden_run() {
    let g = cli_golden();
    let pass = g.schema_errors.is_empty()
        && g.features == 144
        && g.labeled_in_range == 144
        && g.solid_markers == ["5"]
        && g.best_k == 5
        && g.elapsed < Duration::from_secs(10);
    verdict(
        9,
        "CLI golden run on the planted-5 fixture",
        pass,
        format!(
            "{} schema errors, {}/{} features labeled in 1..=5, solid markers at k = {:?}, best k = {}, {:.2?}",
            g.schema_errors.len(),
            g.labeled_in_range,
            g.features,
            g.solid_markers,
            g.best_k,
            g.elapsed
        ),
    );
}

// Criterion 7 ---------------------------------------------------------------

#[test]
fn criterion_7_contiguity_gate() {
    let sources: [(&str, &[Emitted]); 4] = [
        ("greedy oracle cases", &greedy_check().emitted),
        ("planted runs", &planted_check().emitted),
        ("noiseless runs", &noiseless_check().emitted),
        ("CLI golden run", &cli_golden().emitted),
    ];
    let mut total = 0;
    let mut violations = 0;
    let mut detail = Vec::new();
    for (name, emitted) in sources {
        let (runs, bad) = gate(emitted);
        total += runs;
        violations += bad;
        detail.push(format!("{name} {runs}"));
    }
    verdict(
        7,
        "every emitted group is connected",
        violations == 0,
        format!("{violations} violations over {total} clusterings ({})", detail.join(", ")),
    );
}

// Criterion 8 ---------------------------------------------------------------

fn snapshot(paths: &[&Path]) -> Vec<Vec<u8>> {
    paths.iter().map(|p| std::fs::read(p).unwrap()).collect()
}

#[test]
fn criterion_8_determinism() {
    let tmp = tempfile::tempdir().unwrap();
    let out = tmp.path();
    let fixture = PathBuf::from(FIXTURE);
    let mut config = ClusterConfig::new(fixture.join("counts.csv"));
    config.geojson_in = Some(fixture.join("grid.geojson"));
    config.k_max = 10;
    config.out = Some(out.join("report.json"));
    config.geojson_out = Some(out.join("clusters.geojson"));
    config.assignments = Some(out.join("assignments.csv"));
    config.plot = Some(out.join("fstat.svg"));
    let files = [
        out.join("report.json"),
        out.join("clusters.geojson"),
        out.join("assignments.csv"),
        out.join("fstat.svg"),
    ];
    let paths: Vec<&Path> = files.iter().map(PathBuf::as_path).collect();

    let pool = |threads| rayon::ThreadPoolBuilder::new().num_threads(threads).build().unwrap();
    pool(4).install(|| run_cluster(&config)).unwrap();
    let first = snapshot(&paths);

    // Replay from the echoed config, once single-threaded and once wide.
    let echoed = ClusterConfig::from_json(&String::from_utf8(first[0].clone()).unwrap()).unwrap();
    let mut identical = 0;
    let mut reruns = 0;
    for threads in [1, 8] {
        pool(threads).install(|| run_cluster(&echoed)).unwrap();
        reruns += 1;
        if snapshot(&paths) == first {
            identical += 1;
        }
    }

    // The CLI replays the same report through --config.
    let status = Command::new(env!("CARGO_BIN_EXE_regionkit"))
        .args(["cluster", "--config"])
        .arg(&files[0])
        .status()
        .unwrap();
    reruns += 1;
    if status.success() && snapshot(&paths) == first {
        identical += 1;
    }

    // Synthetic datasets are reproducible from their scenario.
    let scenario = PlantedScenario { seed: 99, ..PlantedScenario::default() };
    let synth_files = ["counts.csv", "grid.geojson", "truth.csv", "scenario.json"];
    let dumps: Vec<Vec<Vec<u8>>> = ["a", "b"]
        .iter()
        .map(|d| {
            let dir = out.join(d);
            write_synthetic(&generate(&scenario).unwrap(), &dir).unwrap();
            synth_files.iter().map(|f| std::fs::read(dir.join(f)).unwrap()).collect()
        })
        .collect();
    let synth_same = dumps[0] == dumps[1];

    verdict(
        8,
        "byte-identical reruns",
        identical == reruns && synth_same,
        format!(
            "{identical}/{reruns} replays identical across 1, 4 and 8 threads and the CLI; synthetic dataset {}",
            if synth_same { "identical" } else { "differs" }
        ),
    );
}
