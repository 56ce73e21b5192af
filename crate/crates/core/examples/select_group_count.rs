// Pseudo-F scan over k on a planted grid, with an SVG plot.
//
// ```bash
// cargo run -p regionkit --example select_group_count -- fstat.svg
// ```

use regionkit::ingest::normalize;
use regionkit::report::plot_fstat;
use regionkit::{generate, scan_k, ContiguityGraph, ContiguityRule, PlantedScenario};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    run(None)
}

fn run(plot_path: Option<String>) -> Result<(), Box<dyn std::error::Error>> {
    let data = generate(&PlantedScenario {
        width: 10,
        height: 8,
        k_true: 4,
        seed: 7,
        ..PlantedScenario::default()
    })?;
    let features = normalize(&data.table, &data.table.games)?.matrix;
    let graph = ContiguityGraph::from_polygons(&data.geometry, ContiguityRule::Rook)?;

    let scan = scan_k(&graph, &features, 2, 9)?;
    for e in &scan.series.entries {
        let mark = if e.k == scan.series.best_k { "*" } else { " " };
        println!("{mark} k = {:>2}  CH = {:>12.4}  W = {:.6}", e.k, e.ch, e.within_ssd);
    }
    println!("best k = {}, runner-up = {:?}", scan.series.best_k, scan.series.second_best_k);

    if let Some(path) = plot_path {
        std::fs::write(&path, plot_fstat(&scan.series))?;
        println!("plot written to {path}");
    }
    Ok(())
}

fn main() {
    if let Err(e) = run(std::env::args().nth(1)) {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
