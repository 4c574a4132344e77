//! Outliers among strings under edit distance.
//!
//!     cargo run --release --example edit_distance_words

use dodgraph::synth::words;
use dodgraph::{brute_force_outliers, build_graph, detect, BuildParams, DodParams, GraphKind};

fn main() -> dodgraph::Result<()> {
    let ds = words(3_000, 0.01, 11)?;
    let (r, k) = (3.0, 5);
    let g = build_graph(&ds, GraphKind::Mrpg, &BuildParams::new(8).with_seed(11))?.graph;
    let res = detect(&ds, &g, None, &DodParams::new(r, k))?;
    println!(
        "{} outliers among {} words (r={r}, k={k}); f={} verified={} shortcut={}",
        res.outlier_count,
        ds.len(),
        res.false_positive_count,
        res.candidates.len(),
        res.shortcut_outliers.len()
    );
    for &id in res.outliers.iter().take(10) {
        println!("  {}", ds.string(id).unwrap());
    }
    assert_eq!(res.outliers, brute_force_outliers(&ds, r, k).outliers);
    println!("matches brute force");
    Ok(())
}
