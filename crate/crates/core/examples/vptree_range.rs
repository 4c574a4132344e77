//! VP-tree range counting with early termination, checked against a scan.
//!
//!     cargo run --release --example vptree_range

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use dodgraph::metric::DistCounter;
use dodgraph::synth::uniform;
use dodgraph::vptree::partition_for_init;
use dodgraph::{MetricKind, VpTree};

fn main() -> dodgraph::Result<()> {
    let ds = uniform(20_000, 3, MetricKind::L2, 4)?;
    let tree = VpTree::build(&ds, 16, &mut ChaCha8Rng::seed_from_u64(4))?;
    println!("{} objects in {} leaves", tree.len(), tree.leaves().len());

    for (r, k) in [(0.02, 5), (0.05, 20), (0.1, usize::MAX)] {
        let mut counter = DistCounter::new();
        let mut total = 0;
        for q in 0..100 {
            total += tree.range_count_counted(&ds, q, r, k, &mut counter);
        }
        let scanned: usize = (0..100)
            .map(|q| ds.ids().filter(|&x| x != q && ds.distance(q, x) <= r).count().min(k))
            .sum();
        println!(
            "r={r:<5} k={:<6} counts agree: {}  distance evals per query: {}",
            if k == usize::MAX { "inf".to_string() } else { k.to_string() },
            total == scanned,
            counter.evals / 100
        );
    }

    let parts = partition_for_init(&ds, 20, 3, &mut ChaCha8Rng::seed_from_u64(4))?;
    println!(
        "partitioning: {} groups, {} pivots, {} objects never grouped",
        parts.groups.len(),
        parts.pivots.len(),
        parts.uncovered.len()
    );
    Ok(())
}
