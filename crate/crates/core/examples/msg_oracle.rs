//! Monotonic-path density of the symmetrized K-NN graph, after detour
//! removal, and for the exact monotonic search graph.
//!
//!     cargo run --release --example msg_oracle

use dodgraph::mrpg::{build_msg_oracle, remove_detours, symmetrize, DetourParams};
use dodgraph::oracle::monotone_density;
use dodgraph::synth::{radius_for_outlier_ratio, MixtureSpec};
use dodgraph::{build_mrpg, nndescent_plus, BuildParams, MetricKind};

fn main() -> dodgraph::Result<()> {
    let ds = MixtureSpec::new(400, 3, 2).dataset(MetricKind::L2)?;
    let params = BuildParams::new(5).with_seed(2);
    let r = radius_for_outlier_ratio(&ds, 20, 0.5, usize::MAX, 0);

    let plus = nndescent_plus(&ds, &params)?;
    let base = symmetrize(&plus.graph, &plus.exact_flagged);
    let mut is_pivot = vec![false; ds.len()];
    plus.pivots.iter().for_each(|&p| is_pivot[p as usize] = true);
    let mut exact = vec![false; ds.len()];
    plus.exact_flagged.iter().for_each(|&p| exact[p as usize] = true);

    let mut detoured = base.clone();
    let detours = DetourParams {
        sample_size: params.sample_size_for(ds.len()),
        pivot_sample_size: params.pivot_sample_size_for(),
        cap: params.detour_cap_for(),
    };
    let (added, _) = remove_detours(&mut detoured, &ds, &is_pivot, &exact, &detours, 2);
    let msg = build_msg_oracle(&ds, &base)?;
    let full = build_mrpg(&ds, &params)?;

    println!("monotonic-path density of pairs within r={r:.3}:");
    for (name, adj) in [
        ("symmetrized K-NN", &base),
        ("+ detour removal", &detoured),
        ("MRPG (links pruned)", &full.adjacency),
        ("exact MSG", &msg),
    ] {
        println!(
            "  {name:<20} {:.4}  ({} edges)",
            monotone_density(adj, &ds, r),
            adj.edge_count()
        );
    }
    println!("detour removal added {added} links");
    println!("pruned MRPG links are reachable through pivots, which this density does not credit");
    Ok(())
}
