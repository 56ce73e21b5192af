// Spanning tree and greedy tree cutting on a strip of regions.
//
// ```bash
// cargo run -p regionkit --example skater_partition
// ```

use regionkit::ingest::FeatureMatrix;
use regionkit::skater::{edge_costs, greedy_cuts, mst};
use regionkit::{ContiguityGraph, Provenance};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // Eight regions in a row; two games. Three regimes along the strip.
    let rows = vec![
        vec![0.30, 0.02],
        vec![0.28, 0.03],
        vec![0.31, 0.02],
        vec![0.05, 0.22],
        vec![0.04, 0.25],
        vec![0.02, 0.04],
        vec![0.03, 0.05],
        vec![0.02, 0.03],
    ];
    let ids: Vec<String> = (0..rows.len()).map(|i| format!("city{i}")).collect();
    let features = FeatureMatrix::from_rows(ids.clone(), vec!["A".into(), "B".into()], rows)?;

    let mut graph = ContiguityGraph::isolated(ids.clone())?;
    for i in 1..ids.len() {
        graph.add_edge(i - 1, i, Provenance::Explicit);
    }
    graph.add_edge(2, 5, Provenance::Explicit);

    let tree = mst(&edge_costs(&graph, &features)?)?;
    println!("spanning tree weight {:.4}", tree.total_weight());

    let seq = greedy_cuts(&graph, &features, 4)?;
    for (step, cut) in seq.cuts.iter().enumerate() {
        println!("cut {}: {} - {} (SSD decrease {:.5})", step + 1, ids[cut.a], ids[cut.b], cut.delta);
    }
    for k in 1..=4 {
        let p = seq.partition(&features, k)?;
        println!("k = {k}: labels {:?}, within SSD {:.5}", p.assignment, p.within_ssd);
    }
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
