//! Persisting a graph, loading it back, and the dataset binding check.
//!
//!     cargo run --release --example graph_file

use dodgraph::io::{check_graph_matches, read_graph, write_graph};
use dodgraph::synth::{radius_for_outlier_ratio, MixtureSpec};
use dodgraph::{build_mrpg, detect, BuildParams, DodParams, MetricKind};

fn main() -> dodgraph::Result<()> {
    let dir = std::env::temp_dir().join(format!("dodgraph-example-{}", std::process::id()));
    std::fs::create_dir_all(&dir).map_err(|e| dodgraph::Error::io(&dir, e))?;
    let path = dir.join("graph.bin");

    let ds = MixtureSpec::new(5_000, 4, 3).dataset(MetricKind::L2)?;
    let g = build_mrpg(&ds, &BuildParams::new(10).with_seed(3))?;
    write_graph(&path, &g, ds.checksum())?;
    let size = std::fs::metadata(&path).map(|m| m.len()).unwrap_or(0);
    println!("wrote {} ({size} bytes)", path.display());

    let (header, loaded) = read_graph(&path)?;
    check_graph_matches(&header, &ds)?;
    println!(
        "loaded {} graph: n={} K={} K'={} identical: {}",
        header.kind,
        header.n,
        header.k,
        header.k_prime,
        loaded == g
    );
    let r = radius_for_outlier_ratio(&ds, 10, 0.01, 1_000, 3);
    let res = detect(&ds, &loaded, None, &DodParams::new(r, 10))?;
    println!("{} outliers with the loaded graph (r={r:.3}, k=10)", res.outlier_count);

    let other = MixtureSpec::new(5_000, 4, 4).dataset(MetricKind::L2)?;
    match check_graph_matches(&header, &other) {
        Err(e) => println!("other dataset refused: {e} (exit code {})", e.exit_code()),
        Ok(()) => println!("unexpectedly accepted"),
    }
    std::fs::remove_dir_all(&dir).ok();
    Ok(())
}
