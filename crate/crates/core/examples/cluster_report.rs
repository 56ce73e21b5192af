// Full run on the bundled planted fixture: report JSON, labeled GeoJSON,
// assignment CSV and pseudo-F SVG.
//
// ```bash
// cargo run -p regionkit --example cluster_report -- out/
// ```

use std::path::PathBuf;

use regionkit::{run_cluster, ClusterConfig};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    run(None)
}

fn run(out_dir: Option<String>) -> Result<(), Box<dyn std::error::Error>> {
    let fixture = PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("fixtures/planted5");
    let scratch = tempfile::tempdir()?;
    let out_dir = out_dir
        .map(PathBuf::from)
        .unwrap_or_else(|| scratch.path().to_path_buf());
    std::fs::create_dir_all(&out_dir)?;

    let mut config = ClusterConfig::new(fixture.join("counts.csv"));
    config.geojson_in = Some(fixture.join("grid.geojson"));
    config.k_max = 10;
    config.out = Some(out_dir.join("report.json"));
    config.geojson_out = Some(out_dir.join("clusters.geojson"));
    config.assignments = Some(out_dir.join("assignments.csv"));
    config.plot = Some(out_dir.join("fstat.svg"));

    let report = run_cluster(&config)?;
    let series = report.series.as_ref().expect("scan run");
    println!("best k = {}, runner-up = {:?}", series.best_k, series.second_best_k);
    for a in &report.assignments {
        println!("{:?} k = {}: within SSD {:.6}", a.role, a.k, a.within_ssd);
    }
    println!("outputs in {}", out_dir.display());
    Ok(())
}

fn main() {
    if let Err(e) = run(std::env::args().nth(1)) {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
