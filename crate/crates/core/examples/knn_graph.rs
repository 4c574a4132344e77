//! Approximate K-NN graphs: plain NNDescent against NNDescent+, scored
//! against exact neighbors.
//!
//!     cargo run --release --example knn_graph -- [n] [K]

use std::time::Instant;

use dodgraph::knn::{exact_knn, recall};
use dodgraph::synth::MixtureSpec;
use dodgraph::{nndescent, nndescent_plus, BuildParams, MetricKind, ObjectId};

fn main() -> dodgraph::Result<()> {
    let mut args = std::env::args().skip(1);
    let n: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(5_000);
    let k: usize = args.next().and_then(|a| a.parse().ok()).unwrap_or(10);
    let ds = MixtureSpec::new(n, 8, 1).dataset(MetricKind::L2)?;

    let truth: Vec<Vec<ObjectId>> = ds.ids().map(|p| exact_knn(&ds, p, k).ids().collect()).collect();

    let started = Instant::now();
    let plain = nndescent(&ds, k, 12, 1)?;
    println!(
        "NNDescent   recall {:.4}  iterations {:>2}  distance evals {:>10}  {:.2}s",
        recall(&plain, &truth),
        plain.iterations,
        plain.dist_evals,
        started.elapsed().as_secs_f64()
    );

    let started = Instant::now();
    let plus = nndescent_plus(&ds, &BuildParams::new(k).with_seed(1))?;
    println!(
        "NNDescent+  recall {:.4}  iterations {:>2}  distance evals {:>10}  {:.2}s",
        recall(&plus.graph, &truth),
        plus.graph.iterations,
        plus.graph.dist_evals,
        started.elapsed().as_secs_f64()
    );
    println!(
        "            {} pivots, {} objects with exact {}-NN lists",
        plus.pivots.len(),
        plus.exact_flagged.len(),
        4 * k
    );
    Ok(())
}
