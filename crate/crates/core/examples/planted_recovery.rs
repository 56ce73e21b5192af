// Recovery of a planted partition across seeds, scored by ARI.
//
// ```bash
// cargo run --release -p regionkit --example planted_recovery -- 20
// ```

use regionkit::ingest::normalize;
use regionkit::{adjusted_rand_index, generate, partition, ContiguityGraph, ContiguityRule, PlantedScenario};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    run(None)
}

fn run(seeds: Option<String>) -> Result<(), Box<dyn std::error::Error>> {
    let seeds: u64 = seeds.map_or(Ok(5), |s| s.parse())?;
    let mut exact = 0;
    for seed in 0..seeds {
        let scenario = PlantedScenario { seed, ..PlantedScenario::default() };
        let data = generate(&scenario)?;
        let features = normalize(&data.table, &data.table.games)?.matrix;
        let graph = ContiguityGraph::from_polygons(&data.geometry, ContiguityRule::Rook)?;
        let p = partition(&graph, &features, scenario.k_true)?;
        let ari = adjusted_rand_index(&data.truth, &p.assignment)?;
        if ari == 1.0 {
            exact += 1;
        }
        println!("seed {seed:>3}: ARI {ari:.4}");
    }
    println!("exact recovery on {exact}/{seeds} seeds");
    Ok(())
}

fn main() {
    if let Err(e) = run(std::env::args().nth(1)) {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
