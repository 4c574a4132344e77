//! A benchmark sweep over sampling rate and k, written as CSV to stdout.
//!
//!     cargo run --release --example bench_sweep

use dodgraph::cli::{bench_rows, write_bench_csv, ConfigFile, RunArgs, RunConfig, SweepGrid};
use dodgraph::io::{write_dataset, DataFormat};
use dodgraph::synth::MixtureSpec;
use dodgraph::MetricKind;

fn main() -> dodgraph::Result<()> {
    let path = std::env::temp_dir().join(format!("dodgraph-bench-{}.fvecs", std::process::id()));
    let ds = MixtureSpec::new(40_000, 4, 5).dataset(MetricKind::L2)?;
    write_dataset(&path, &ds, DataFormat::Fvecs)?;

    let args = RunArgs {
        dataset: Some(path.clone()),
        ..RunArgs::default()
    };
    let config = RunConfig::merge(&args, &ConfigFile::default())?;
    let grid = SweepGrid {
        sampling: vec![0.125, 0.25, 0.5, 1.0],
        ks: vec![10, 40],
        // Empty: one radius per cell, chosen for a 1% outlier ratio.
        rs: vec![],
        threads: vec![1],
    };
    let rows = bench_rows(&config, &grid)?;
    write_bench_csv(&rows, &mut std::io::stdout()).map_err(|e| dodgraph::Error::io("<stdout>", e))?;
    std::fs::remove_file(&path).ok();
    Ok(())
}
