//! Exact distance-based outlier detection in metric spaces.
//!
//! An object is an outlier when fewer than `k` other objects lie within
//! distance `r` of it. Detection filters most inliers by counting neighbors
//! along a proximity graph, then verifies the remaining candidates exactly.
//!
//! ```
//! use dodgraph::{build_graph, detect, BuildParams, Dataset, DodParams, GraphKind, MetricKind};
//!
//! let points = vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]];
//! let ds = Dataset::from_vectors(points, MetricKind::L1).unwrap();
//! let graph = build_graph(&ds, GraphKind::Mrpg, &BuildParams::new(2)).unwrap().graph;
//! let result = detect(&ds, &graph, None, &DodParams::new(1.5, 1)).unwrap();
//! assert_eq!(result.outliers, vec![3]);
//! ```

pub mod cli;
pub mod dod;
pub mod error;
pub mod graph;
pub mod io;
pub mod knn;
pub mod metric;
pub mod mrpg;
pub mod oracle;
pub mod synth;
pub mod visit;
pub mod vptree;

pub use dod::{detect, detect_partitioned, DodParams, DodResult, VerifyMode};
pub use error::{Error, Result};
pub use graph::Adjacency;
pub use knn::{nndescent, nndescent_plus, AknnGraph, BuildParams, Neighbor, NeighborList};
pub use metric::{Dataset, MetricKind, ObjectId};
pub use mrpg::{build_graph, build_mrpg, BuildReport, GraphKind, Mrpg};
pub use oracle::brute_force_outliers;
pub use vptree::VpTree;
