// Count table -> proportion matrix.
//
// Loads a small wide-format count table, turns counts into shares of each
// city's total players, and drops regions by id.
//
// ```bash
// cargo run -p regionkit --example normalize_counts
// ```

use regionkit::ingest::{filter_regions, normalize, parse_counts};

const COUNTS: &str = "\
region,name,total,ShanghaiMahjong,SichuanMahjong,GuizhouMahjong
shanghai,Shanghai,272730,12127,1521,80
chongqing,Chongqing,208271,310,20791,1204
guiyang,Guiyang,95502,51,3380,10472
sansha,Sansha,0,0,0,0
";

pub fn run_example() -> Result<(), Box<dyn std::error::Error>> {
    let table = parse_counts(COUNTS.as_bytes())?;
    println!("{} regions, {} games", table.len(), table.games.len());

    let selected = vec!["ShanghaiMahjong".to_string(), "SichuanMahjong".to_string()];
    let normalized = normalize(&table, &selected)?;
    for dropped in &normalized.dropped {
        println!("dropped {} ({})", dropped.region_id, dropped.reason);
    }
    let m = &normalized.matrix;
    for (i, id) in m.region_ids.iter().enumerate() {
        println!("{id:>10}: {:?}", m.row(i).iter().map(|v| format!("{v:.6}")).collect::<Vec<_>>());
    }

    let filtered = filter_regions(m, &["guiyang".to_string(), "lhasa".to_string()])?;
    println!(
        "after exclusion: {:?}, not found: {:?}",
        filtered.matrix.region_ids, filtered.not_found
    );
    Ok(())
}

fn main() {
    if let Err(e) = run_example() {
        eprintln!("{e}");
        std::process::exit(1);
    }
}
