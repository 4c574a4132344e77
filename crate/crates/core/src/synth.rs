//! Seeded synthetic datasets.

use rand::seq::{IndexedRandom, SliceRandom};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::metric::{Dataset, MetricKind, ObjectId};

/// Gaussian clusters plus sparse halos and uniformly planted outliers.
#[derive(Clone, Debug)]
pub struct MixtureSpec {
    pub n: usize,
    pub dim: usize,
    pub clusters: usize,
    /// Standard deviation of each dense cluster.
    pub cluster_std: f64,
    /// Cluster centers are drawn uniformly from `[-spread, spread]^dim`.
    pub spread: f64,
    /// Fraction of objects drawn from wide, sparse Gaussians.
    pub sparse_fraction: f64,
    /// Fraction of objects drawn uniformly from the bounding box.
    pub outlier_fraction: f64,
    pub seed: u64,
}

impl MixtureSpec {
    pub fn new(n: usize, dim: usize, seed: u64) -> Self {
        MixtureSpec {
            n,
            dim,
            clusters: 8,
            cluster_std: 1.0,
            spread: 10.0,
            sparse_fraction: 0.05,
            outlier_fraction: 0.01,
            seed,
        }
    }

    pub fn rows(&self) -> Result<Vec<Vec<f64>>> {
        if self.n == 0 || self.dim == 0 || self.clusters == 0 {
            return Err(Error::Config("mixture needs n, dim and clusters > 0".into()));
        }
        if !(0.0..=1.0).contains(&(self.sparse_fraction + self.outlier_fraction)) {
            return Err(Error::Config("sparse and outlier fractions must sum to at most 1".into()));
        }
        let mut rng = ChaCha8Rng::seed_from_u64(self.seed);
        let centers: Vec<Vec<f64>> = (0..self.clusters)
            .map(|_| {
                (0..self.dim)
                    .map(|_| rng.random_range(-self.spread..=self.spread))
                    .collect()
            })
            .collect();
        let dense = Normal::new(0.0, self.cluster_std)
            .map_err(|e| Error::Config(format!("cluster_std: {e}")))?;
        let sparse = Normal::new(0.0, self.cluster_std * 5.0).unwrap();
        let outliers = (self.n as f64 * self.outlier_fraction).round() as usize;
        let sparse_n = (self.n as f64 * self.sparse_fraction).round() as usize;
        let bound = self.spread + 5.0 * self.cluster_std;
        let mut rows = Vec::with_capacity(self.n);
        for i in 0..self.n {
            let row = if i < outliers {
                (0..self.dim).map(|_| rng.random_range(-bound..=bound)).collect()
            } else {
                let center = centers.choose(&mut rng).unwrap();
                let noise = if i < outliers + sparse_n { &sparse } else { &dense };
                center.iter().map(|c| c + noise.sample(&mut rng)).collect()
            };
            rows.push(row);
        }
        rows.shuffle(&mut rng);
        Ok(rows)
    }

    pub fn dataset(&self, metric: MetricKind) -> Result<Dataset> {
        Dataset::from_vectors(self.rows()?, metric)
    }
}

/// `n` points uniform in the unit cube.
pub fn uniform(n: usize, dim: usize, metric: MetricKind, seed: u64) -> Result<Dataset> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let values = (0..n * dim).map(|_| rng.random::<f64>()).collect();
    Dataset::from_flat(values, dim, metric)
}

const ALPHABET: &[u8] = b"abcdefghijklmnopqrstuvwxyz";

/// Word families (a root and its 1–3 edit variants) plus random strings that
/// act as outliers.
pub fn words(n: usize, outlier_fraction: f64, seed: u64) -> Result<Dataset> {
    if n == 0 {
        return Err(Error::Config("n must be positive".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let random_word = |rng: &mut ChaCha8Rng, len: usize| -> Vec<u8> {
        (0..len).map(|_| *ALPHABET.choose(rng).unwrap()).collect()
    };
    let roots: Vec<Vec<u8>> = (0..(n / 40).max(1))
        .map(|_| {
            let len = rng.random_range(5..=10);
            random_word(&mut rng, len)
        })
        .collect();
    let outliers = (n as f64 * outlier_fraction).round() as usize;
    let mut out = Vec::with_capacity(n);
    for i in 0..n {
        if i < outliers {
            let len = rng.random_range(8..=16);
            out.push(random_word(&mut rng, len));
            continue;
        }
        let mut w = roots.choose(&mut rng).unwrap().clone();
        for _ in 0..rng.random_range(0..=3) {
            let c = *ALPHABET.choose(&mut rng).unwrap();
            match rng.random_range(0..3) {
                0 => {
                    let at = rng.random_range(0..=w.len());
                    w.insert(at, c);
                }
                1 if w.len() > 1 => {
                    let at = rng.random_range(0..w.len());
                    w.remove(at);
                }
                _ => {
                    let at = rng.random_range(0..w.len());
                    w[at] = c;
                }
            }
        }
        out.push(w);
    }
    out.shuffle(&mut rng);
    let strings: Vec<String> = out.into_iter().map(|w| String::from_utf8(w).unwrap()).collect();
    Dataset::from_strings(&strings)
}

/// Distance of every sampled object to its `k`-th nearest neighbor (sampling
/// all objects when `sample >= n`).
pub fn kth_neighbor_distances(ds: &Dataset, k: usize, sample: usize, seed: u64) -> Vec<f64> {
    let mut ids: Vec<ObjectId> = ds.ids().collect();
    if sample < ids.len() {
        ids.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
        ids.truncate(sample);
    }
    ids.par_iter()
        .map(|&p| {
            let mut d: Vec<f64> = ds
                .ids()
                .filter(|&q| q != p)
                .map(|q| ds.distance(p, q))
                .collect();
            if k == 0 || d.len() < k {
                return f64::INFINITY;
            }
            let (_, kth, _) = d.select_nth_unstable_by(k - 1, f64::total_cmp);
            *kth
        })
        .collect()
}

/// A radius at which roughly `ratio` of the objects have fewer than `k`
/// neighbors. An object is an outlier exactly when its `k`-th neighbor lies
/// beyond `r`, so `r` is the `(1 - ratio)` quantile of those distances.
pub fn radius_for_outlier_ratio(ds: &Dataset, k: usize, ratio: f64, sample: usize, seed: u64) -> f64 {
    let mut d = kth_neighbor_distances(ds, k, sample, seed);
    d.sort_by(f64::total_cmp);
    let at = ((1.0 - ratio.clamp(0.0, 1.0)) * d.len() as f64).floor() as usize;
    let at = at.min(d.len() - 1);
    let r = d[at];
    if r.is_finite() {
        r
    } else {
        d.iter().rev().find(|v| v.is_finite()).copied().unwrap_or(0.0)
    }
}
