// Adjacency from polygons, plus connectivity repair for an offshore island.
//
// ```bash
// cargo run -p regionkit --example contiguity_graph
// ```

use regionkit::geometry::RegionGeometry;
use regionkit::{ContiguityGraph, ContiguityRule, Provenance};

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    // A 3×2 block of unit squares and one island to the east.
    let mut regions = Vec::new();
    for y in 0..2 {
        for x in 0..3 {
            let (x, y) = (x as f64, y as f64);
            regions.push(RegionGeometry::rectangle(format!("r{}{}", x, y), x, y, x + 1.0, y + 1.0));
        }
    }
    regions.push(RegionGeometry::rectangle("island", 6.0, 0.0, 7.0, 1.0));

    let rook = ContiguityGraph::from_polygons(&regions, ContiguityRule::Rook)?;
    let queen = ContiguityGraph::from_polygons(&regions, ContiguityRule::Queen)?;
    println!("rook: {} edges, queen: {} edges", rook.edge_count(), queen.edge_count());
    println!("rook components: {}", rook.component_count());

    let centroids: Vec<_> = regions.iter().map(RegionGeometry::centroid).collect();
    let repaired = rook.repair_connectivity(&centroids)?;
    for e in repaired.edges_with(Provenance::Repair) {
        println!("repair edge {} - {}", repaired.node_ids()[e.a], repaired.node_ids()[e.b]);
    }

    let knn = repaired.knn_augment(&centroids, 4)?;
    println!("knn(4) added {} edges", knn.edges_with(Provenance::Knn).len());
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
