//! Objects, datasets, and the metric distance functions over them.
//!
//! A [`Dataset`] is immutable once constructed. Object ids are dense indices
//! `0..n` and stay stable for the lifetime of the dataset, so every other
//! structure in the crate refers to objects by [`ObjectId`] alone.

use std::fmt;
use std::str::FromStr;

use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Dense index of an object inside its [`Dataset`].
pub type ObjectId = u32;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub enum MetricKind {
    L1,
    L2,
    L4,
    /// Angle between two vectors, in radians.
    Angular,
    /// Levenshtein distance between strings.
    Edit,
}

impl MetricKind {
    pub fn is_vector(self) -> bool {
        !matches!(self, MetricKind::Edit)
    }

    pub fn name(self) -> &'static str {
        match self {
            MetricKind::L1 => "l1",
            MetricKind::L2 => "l2",
            MetricKind::L4 => "l4",
            MetricKind::Angular => "angular",
            MetricKind::Edit => "edit",
        }
    }

    fn tag(self) -> u8 {
        match self {
            MetricKind::L1 => 1,
            MetricKind::L2 => 2,
            MetricKind::L4 => 4,
            MetricKind::Angular => 8,
            MetricKind::Edit => 16,
        }
    }
}

impl fmt::Display for MetricKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for MetricKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "l1" => Ok(MetricKind::L1),
            "l2" => Ok(MetricKind::L2),
            "l4" => Ok(MetricKind::L4),
            "angular" => Ok(MetricKind::Angular),
            "edit" => Ok(MetricKind::Edit),
            other => Err(Error::Config(format!("unknown metric `{other}`"))),
        }
    }
}

/// Per-run tally of distance evaluations.
///
/// Counters are owned by a single worker and merged with [`DistCounter::merge`]
/// at the end of a parallel section.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct DistCounter {
    pub evals: u64,
}

impl DistCounter {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn merge(&mut self, other: DistCounter) {
        self.evals += other.evals;
    }
}

#[derive(Clone, Debug)]
enum Storage {
    Dense {
        dim: usize,
        values: Vec<f64>,
        /// Unit-normalized copy, only present for the angular metric.
        unit: Option<Vec<f64>>,
    },
    Strings(Vec<Vec<char>>),
}

#[derive(Clone, Debug)]
pub struct Dataset {
    metric: MetricKind,
    storage: Storage,
    n: usize,
}

impl Dataset {
    /// Builds a vector dataset. All rows must share one dimensionality.
    pub fn from_vectors(rows: Vec<Vec<f64>>, metric: MetricKind) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Input("dataset must contain at least one object".into()));
        }
        let dim = rows[0].len();
        if dim == 0 {
            return Err(Error::Input("vectors must have at least one component".into()));
        }
        let mut values = Vec::with_capacity(rows.len() * dim);
        for (i, row) in rows.iter().enumerate() {
            if row.len() != dim {
                return Err(Error::Input(format!(
                    "object {i} has dimension {} but the dataset dimension is {dim}",
                    row.len()
                )));
            }
            if let Some(bad) = row.iter().find(|v| !v.is_finite()) {
                return Err(Error::Input(format!("object {i} has non-finite component {bad}")));
            }
            values.extend_from_slice(row);
        }
        Self::from_flat(values, dim, metric)
    }

    /// Builds a vector dataset from a row-major buffer of `n * dim` values.
    pub fn from_flat(values: Vec<f64>, dim: usize, metric: MetricKind) -> Result<Self> {
        if metric == MetricKind::Edit {
            return Err(Error::Config("edit distance requires string objects".into()));
        }
        if dim == 0 || values.is_empty() || !values.len().is_multiple_of(dim) {
            return Err(Error::Input(format!(
                "buffer of {} values is not a positive multiple of dimension {dim}",
                values.len()
            )));
        }
        let n = values.len() / dim;
        let unit = if metric == MetricKind::Angular {
            let mut unit = values.clone();
            for (i, row) in unit.chunks_exact_mut(dim).enumerate() {
                let norm = row.iter().map(|v| v * v).sum::<f64>().sqrt();
                if norm == 0.0 || !norm.is_finite() {
                    return Err(Error::Input(format!(
                        "object {i} has zero norm, angular distance is undefined"
                    )));
                }
                row.iter_mut().for_each(|v| *v /= norm);
            }
            Some(unit)
        } else {
            None
        };
        Ok(Dataset {
            metric,
            storage: Storage::Dense { dim, values, unit },
            n,
        })
    }

    /// Builds a string dataset for the edit-distance metric.
    pub fn from_strings<S: AsRef<str>>(words: &[S]) -> Result<Self> {
        if words.is_empty() {
            return Err(Error::Input("dataset must contain at least one object".into()));
        }
        let strings = words.iter().map(|w| w.as_ref().chars().collect()).collect();
        Ok(Dataset {
            metric: MetricKind::Edit,
            storage: Storage::Strings(strings),
            n: words.len(),
        })
    }

    pub fn metric(&self) -> MetricKind {
        self.metric
    }

    pub fn len(&self) -> usize {
        self.n
    }

    pub fn is_empty(&self) -> bool {
        self.n == 0
    }

    /// Vector dimensionality, or `None` for string data.
    pub fn dim(&self) -> Option<usize> {
        match &self.storage {
            Storage::Dense { dim, .. } => Some(*dim),
            Storage::Strings(_) => None,
        }
    }

    pub fn vector(&self, id: ObjectId) -> Option<&[f64]> {
        match &self.storage {
            Storage::Dense { dim, values, .. } => {
                let start = id as usize * dim;
                values.get(start..start + dim)
            }
            Storage::Strings(_) => None,
        }
    }

    pub fn string(&self, id: ObjectId) -> Option<String> {
        match &self.storage {
            Storage::Strings(s) => s.get(id as usize).map(|c| c.iter().collect()),
            Storage::Dense { .. } => None,
        }
    }

    pub fn ids(&self) -> impl Iterator<Item = ObjectId> + '_ {
        0..self.n as ObjectId
    }

    /// Distance between two objects of this dataset.
    #[inline]
    pub fn distance(&self, a: ObjectId, b: ObjectId) -> f64 {
        if a == b {
            return 0.0;
        }
        match &self.storage {
            Storage::Dense { dim, values, unit } => {
                let dim = *dim;
                let (a, b) = (a as usize * dim, b as usize * dim);
                match self.metric {
                    MetricKind::L1 => l1(&values[a..a + dim], &values[b..b + dim]),
                    MetricKind::L2 => l2(&values[a..a + dim], &values[b..b + dim]),
                    MetricKind::L4 => l4(&values[a..a + dim], &values[b..b + dim]),
                    MetricKind::Angular => {
                        let unit = unit.as_deref().expect("angular dataset keeps unit vectors");
                        angular_unit(&unit[a..a + dim], &unit[b..b + dim])
                    }
                    MetricKind::Edit => unreachable!("edit metric on dense storage"),
                }
            }
            Storage::Strings(s) => levenshtein(&s[a as usize], &s[b as usize]) as f64,
        }
    }

    #[inline]
    pub fn distance_counted(&self, a: ObjectId, b: ObjectId, counter: &mut DistCounter) -> f64 {
        counter.evals += 1;
        self.distance(a, b)
    }

    /// Dataset restricted to `ids`, renumbered densely in the given order.
    pub fn subset(&self, ids: &[ObjectId]) -> Result<Self> {
        match &self.storage {
            Storage::Dense { dim, values, .. } => {
                let mut out = Vec::with_capacity(ids.len() * dim);
                for &id in ids {
                    let start = id as usize * dim;
                    out.extend_from_slice(&values[start..start + dim]);
                }
                Self::from_flat(out, *dim, self.metric)
            }
            Storage::Strings(s) => {
                let words: Vec<String> =
                    ids.iter().map(|&id| s[id as usize].iter().collect()).collect();
                Self::from_strings(&words)
            }
        }
    }

    /// Content checksum binding graph files to the data they were built on.
    pub fn checksum(&self) -> u64 {
        let mut hasher = Sha256::new();
        hasher.update([self.metric.tag()]);
        hasher.update((self.n as u64).to_le_bytes());
        match &self.storage {
            Storage::Dense { dim, values, .. } => {
                hasher.update((*dim as u64).to_le_bytes());
                for v in values {
                    hasher.update(v.to_le_bytes());
                }
            }
            Storage::Strings(s) => {
                for word in s {
                    hasher.update((word.len() as u64).to_le_bytes());
                    for c in word {
                        hasher.update((*c as u32).to_le_bytes());
                    }
                }
            }
        }
        let digest = hasher.finalize();
        let mut bytes = [0u8; 8];
        bytes.copy_from_slice(&digest[..8]);
        u64::from_le_bytes(bytes)
    }
}

#[inline]
fn l1(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).sum()
}

#[inline]
fn l2(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = x - y;
            d * d
        })
        .sum::<f64>()
        .sqrt()
}

#[inline]
fn l4(a: &[f64], b: &[f64]) -> f64 {
    a.iter()
        .zip(b)
        .map(|(x, y)| {
            let d = (x - y) * (x - y);
            d * d
        })
        .sum::<f64>()
        .sqrt()
        .sqrt()
}

/// Angle between two unit vectors.
///
/// Equal to `acos(<a, b>)` but evaluated as `2 atan2(|a - b|, |a + b|)`,
/// which stays accurate for nearly parallel vectors where `acos` loses
/// half of the available digits.
#[inline]
fn angular_unit(a: &[f64], b: &[f64]) -> f64 {
    let (mut diff, mut sum) = (0.0, 0.0);
    for (x, y) in a.iter().zip(b) {
        diff += (x - y) * (x - y);
        sum += (x + y) * (x + y);
    }
    2.0 * diff.sqrt().atan2(sum.sqrt())
}

/// Angular distance between two arbitrary nonzero vectors.
pub fn angular(a: &[f64], b: &[f64]) -> f64 {
    let na = a.iter().map(|v| v * v).sum::<f64>().sqrt();
    let nb = b.iter().map(|v| v * v).sum::<f64>().sqrt();
    let ua: Vec<f64> = a.iter().map(|v| v / na).collect();
    let ub: Vec<f64> = b.iter().map(|v| v / nb).collect();
    angular_unit(&ua, &ub)
}

/// Levenshtein distance with unit costs, full quadratic table (two rows kept).
pub fn levenshtein(a: &[char], b: &[char]) -> usize {
    let (a, b) = if a.len() < b.len() { (b, a) } else { (a, b) };
    if b.is_empty() {
        return a.len();
    }
    let mut prev: Vec<usize> = (0..=b.len()).collect();
    let mut cur = vec![0usize; b.len() + 1];
    for (i, ca) in a.iter().enumerate() {
        cur[0] = i + 1;
        for (j, cb) in b.iter().enumerate() {
            let substitute = prev[j] + usize::from(ca != cb);
            cur[j + 1] = substitute.min(prev[j + 1] + 1).min(cur[j] + 1);
        }
        std::mem::swap(&mut prev, &mut cur);
    }
    prev[b.len()]
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn pair(a: Vec<f64>, b: Vec<f64>, metric: MetricKind) -> f64 {
        Dataset::from_vectors(vec![a, b], metric).unwrap().distance(0, 1)
    }

    /// Full edit matrix, kept separate from the two-row version above.
    fn edit_matrix(a: &str, b: &str) -> usize {
        let a: Vec<char> = a.chars().collect();
        let b: Vec<char> = b.chars().collect();
        let mut m = vec![vec![0usize; b.len() + 1]; a.len() + 1];
        for (i, row) in m.iter_mut().enumerate() {
            row[0] = i;
        }
        for j in 0..=b.len() {
            m[0][j] = j;
        }
        for i in 1..=a.len() {
            for j in 1..=b.len() {
                let cost = usize::from(a[i - 1] != b[j - 1]);
                m[i][j] = (m[i - 1][j] + 1).min(m[i][j - 1] + 1).min(m[i - 1][j - 1] + cost);
            }
        }
        m[a.len()][b.len()]
    }

    #[test]
    fn l2_pythagorean() {
        assert_eq!(pair(vec![0.0, 0.0], vec![3.0, 4.0], MetricKind::L2), 5.0);
    }

    #[test]
    fn l1_and_l4() {
        assert_eq!(pair(vec![0.0, 0.0], vec![3.0, 4.0], MetricKind::L1), 7.0);
        let d = pair(vec![0.0, 0.0], vec![3.0, 4.0], MetricKind::L4);
        assert!((d - (81.0f64 + 256.0).powf(0.25)).abs() < 1e-12);
    }

    #[test]
    fn kitten_sitting() {
        assert_eq!(edit_matrix("kitten", "sitting"), 3);
        let ds = Dataset::from_strings(&["kitten", "sitting"]).unwrap();
        assert_eq!(ds.distance(0, 1), 3.0);
    }

    #[test]
    fn orthogonal_angle() {
        let d = pair(vec![1.0, 0.0], vec![0.0, 1.0], MetricKind::Angular);
        assert!((d - std::f64::consts::FRAC_PI_2).abs() < 1e-15);
        let opposite = pair(vec![2.0, 0.0], vec![-1.0, 0.0], MetricKind::Angular);
        assert!((opposite - std::f64::consts::PI).abs() < 1e-15);
    }

    #[test]
    fn angular_rejects_zero_vector() {
        let err = Dataset::from_vectors(vec![vec![0.0, 0.0]], MetricKind::Angular).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn dimension_mismatch_is_input_error() {
        let err =
            Dataset::from_vectors(vec![vec![0.0, 0.0], vec![1.0]], MetricKind::L2).unwrap_err();
        assert!(matches!(err, Error::Input(_)));
    }

    #[test]
    fn counted_distance() {
        let ds = Dataset::from_vectors(vec![vec![0.0, 0.0], vec![3.0, 4.0]], MetricKind::L2)
            .unwrap();
        let mut counter = DistCounter::new();
        let d = ds.distance_counted(0, 1, &mut counter);
        assert_eq!(counter.evals, 1);
        let again = ds.distance_counted(0, 1, &mut counter);
        assert_eq!(counter.evals, 2);
        assert_eq!(d.to_bits(), ds.distance(0, 1).to_bits());
        assert_eq!(again.to_bits(), d.to_bits());
    }

    #[test]
    fn subset_renumbers() {
        let ds = Dataset::from_vectors(
            vec![vec![0.0], vec![1.0], vec![2.0], vec![10.0]],
            MetricKind::L1,
        )
        .unwrap();
        let sub = ds.subset(&[3, 1]).unwrap();
        assert_eq!(sub.len(), 2);
        assert_eq!(sub.distance(0, 1), 9.0);
        assert_ne!(sub.checksum(), ds.checksum());
    }

    fn vec3() -> impl Strategy<Value = Vec<f64>> {
        prop::collection::vec(-100.0f64..100.0, 3)
    }

    fn word() -> impl Strategy<Value = String> {
        "[abc]{0,8}"
    }

    proptest! {
        #[test]
        fn vector_metric_axioms(x in vec3(), y in vec3(), z in vec3()) {
            for metric in [MetricKind::L1, MetricKind::L2, MetricKind::L4, MetricKind::Angular] {
                if metric == MetricKind::Angular
                    && [&x, &y, &z].iter().any(|v| v.iter().all(|c| *c == 0.0))
                {
                    continue;
                }
                let ds = Dataset::from_vectors(vec![x.clone(), y.clone(), z.clone()], metric)
                    .unwrap();
                let (xy, yz, xz) = (ds.distance(0, 1), ds.distance(1, 2), ds.distance(0, 2));
                let bound = xy + yz;
                prop_assert!(xz <= bound + 1e-9 * bound.max(f64::MIN_POSITIVE), "{metric}");
                prop_assert!(xy >= 0.0);
                let yx = ds.distance(1, 0);
                prop_assert!((xy - yx).abs() <= 1e-9 * xy.max(1.0));
                prop_assert_eq!(ds.distance(0, 0), 0.0);
            }
        }

        #[test]
        fn edit_metric_axioms(x in word(), y in word(), z in word()) {
            let ds = Dataset::from_strings(&[&x, &y, &z]).unwrap();
            let (xy, yz, xz) = (ds.distance(0, 1), ds.distance(1, 2), ds.distance(0, 2));
            prop_assert!(xz <= xy + yz);
            prop_assert_eq!(xy, ds.distance(1, 0));
            prop_assert_eq!(xy == 0.0, x == y);
            prop_assert_eq!(xy as usize, edit_matrix(&x, &y));
        }
    }
}
