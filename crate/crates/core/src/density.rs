//! Brute-force k-nearest-neighbour queries and the digamma of neighbour
//! counts.
//!
//! Memories hold at most one entry per environment step, so a linear scan
//! with partial selection is the whole search strategy.

use std::sync::OnceLock;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Euler–Mascheroni constant.
pub const EULER_GAMMA: f64 = 0.577_215_664_901_532_9;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Metric {
    Euclidean,
    Chebyshev,
}

impl Metric {
    #[inline]
    pub fn distance(self, a: &[f64], b: &[f64]) -> f64 {
        debug_assert_eq!(a.len(), b.len());
        match self {
            Metric::Euclidean => a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum::<f64>().sqrt(),
            Metric::Chebyshev => a.iter().zip(b).fold(0.0f64, |m, (x, y)| m.max((x - y).abs())),
        }
    }
}

/// Read access to an ordered collection of equal-width points.
pub trait PointView {
    fn len(&self) -> usize;
    fn dim(&self) -> usize;
    fn metric(&self) -> Metric;
    fn point(&self, i: usize) -> &[f64];

    fn is_empty(&self) -> bool {
        self.len() == 0
    }
}

/// Append-only point store in insertion order.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    metric: Metric,
    data: Vec<f64>,
}

impl PointSet {
    pub fn new(dim: usize, metric: Metric) -> Self {
        Self {
            dim,
            metric,
            data: Vec::new(),
        }
    }

    pub fn from_points<I, P>(dim: usize, metric: Metric, points: I) -> Result<Self>
    where
        I: IntoIterator<Item = P>,
        P: AsRef<[f64]>,
    {
        let mut set = Self::new(dim, metric);
        for p in points {
            set.push(p.as_ref())?;
        }
        Ok(set)
    }

    pub fn push(&mut self, point: &[f64]) -> Result<()> {
        Error::check_dim("point set entry", self.dim, point.len())?;
        self.data.extend_from_slice(point);
        Ok(())
    }

    pub fn clear(&mut self) {
        self.data.clear();
    }

    /// The `width` coordinates starting at `offset` of every stored point.
    pub fn block(&self, offset: usize, width: usize) -> BlockView<'_> {
        assert!(offset + width <= self.dim, "block outside point dimension");
        BlockView {
            set: self,
            offset,
            width,
        }
    }

    pub fn iter(&self) -> impl Iterator<Item = &[f64]> {
        self.data.chunks_exact(self.dim.max(1))
    }
}

impl PointView for PointSet {
    fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    fn dim(&self) -> usize {
        self.dim
    }

    fn metric(&self) -> Metric {
        self.metric
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }
}

/// Coordinate sub-block of a [`PointSet`], e.g. one agent's slice of every
/// joint embedding.
#[derive(Clone, Copy, Debug)]
pub struct BlockView<'a> {
    set: &'a PointSet,
    offset: usize,
    width: usize,
}

impl PointView for BlockView<'_> {
    fn len(&self) -> usize {
        self.set.len()
    }

    fn dim(&self) -> usize {
        self.width
    }

    fn metric(&self) -> Metric {
        self.set.metric
    }

    fn point(&self, i: usize) -> &[f64] {
        &self.set.point(i)[self.offset..self.offset + self.width]
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KnnQueryResult {
    /// Distance to the k-th nearest point (after k is capped at the set size).
    pub radius: f64,
    /// Indices of the nearest points, closest first; ties by insertion order.
    pub neighbors: Vec<usize>,
}

/// The `k` nearest points of `query`. When fewer than `k` points exist,
/// all of them are used.
pub fn k_nearest<V: PointView + ?Sized>(query: &[f64], points: &V, k: usize) -> Result<KnnQueryResult> {
    if k == 0 {
        return Err(Error::Config("k must be positive".into()));
    }
    Error::check_dim("k-NN query", points.dim(), query.len())?;
    let n = points.len();
    if n == 0 {
        return Err(Error::InsufficientMemory);
    }
    let k = k.min(n);
    let metric = points.metric();
    let mut dists: Vec<(f64, usize)> = (0..n).map(|i| (metric.distance(query, points.point(i)), i)).collect();
    let order = |a: &(f64, usize), b: &(f64, usize)| a.0.total_cmp(&b.0).then(a.1.cmp(&b.1));
    if k < n {
        dists.select_nth_unstable_by(k - 1, order);
        dists.truncate(k);
    }
    dists.sort_unstable_by(order);
    Ok(KnnQueryResult {
        radius: dists[k - 1].0,
        neighbors: dists.iter().map(|d| d.1).collect(),
    })
}

pub fn kth_nearest_radius<V: PointView + ?Sized>(query: &[f64], points: &V, k: usize) -> Result<f64> {
    k_nearest(query, points, k).map(|r| r.radius)
}

/// Number of points strictly closer than `radius`.
pub fn count_within_radius<V: PointView + ?Sized>(query: &[f64], points: &V, radius: f64) -> usize {
    debug_assert_eq!(query.len(), points.dim());
    let metric = points.metric();
    (0..points.len())
        .filter(|&i| metric.distance(query, points.point(i)) < radius)
        .count()
}

const HARMONIC_TABLE_LEN: usize = 1 << 14;

/// Neumaier-compensated running sum of 1/j.
fn harmonic_from(start_sum: f64, start_comp: f64, from: usize, to: usize) -> (f64, f64) {
    let (mut sum, mut comp) = (start_sum, start_comp);
    for j in from..=to {
        let term = 1.0 / j as f64;
        let t = sum + term;
        if sum.abs() >= term.abs() {
            comp += (sum - t) + term;
        } else {
            comp += (term - t) + sum;
        }
        sum = t;
    }
    (sum, comp)
}

fn harmonic_table() -> &'static [(f64, f64)] {
    static TABLE: OnceLock<Vec<(f64, f64)>> = OnceLock::new();
    TABLE.get_or_init(|| {
        let mut t = Vec::with_capacity(HARMONIC_TABLE_LEN);
        t.push((0.0, 0.0));
        for n in 1..HARMONIC_TABLE_LEN {
            let (s, c) = t[n - 1];
            t.push(harmonic_from(s, c, n, n));
        }
        t
    })
}

/// Harmonic number H_n, correctly rounded up to compensated-sum accuracy.
pub fn harmonic(n: usize) -> f64 {
    let table = harmonic_table();
    if n < table.len() {
        let (s, c) = table[n];
        return s + c;
    }
    let (s, c) = table[table.len() - 1];
    let (s, c) = harmonic_from(s, c, table.len(), n);
    s + c
}

/// ψ(n + 1) = −γ + H_n.
pub fn digamma_of_count(n: usize) -> f64 {
    harmonic(n) - EULER_GAMMA
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng as _, SeedableRng};

    fn line(points: &[f64]) -> PointSet {
        PointSet::from_points(1, Metric::Euclidean, points.iter().map(|p| [*p])).unwrap()
    }

    #[test]
    fn nearest_on_a_line() {
        assert_eq!(kth_nearest_radius(&[1.0], &line(&[0.0, 10.0]), 1).unwrap(), 1.0);
    }

    #[test]
    fn chebyshev_second_neighbour() {
        let set = PointSet::from_points(2, Metric::Chebyshev, [[0.0, 0.0], [3.0, 4.0]]).unwrap();
        assert_eq!(kth_nearest_radius(&[1.0, 1.0], &set, 2).unwrap(), 3.0);
    }

    #[test]
    fn k_is_capped_and_empty_is_reported() {
        let set = line(&[0.0, 2.0]);
        assert_eq!(kth_nearest_radius(&[0.0], &set, 7).unwrap(), 2.0);
        assert!(matches!(
            kth_nearest_radius(&[0.0], &line(&[]), 3),
            Err(Error::InsufficientMemory)
        ));
    }

    #[test]
    fn ties_resolve_by_insertion_order() {
        let set = line(&[1.0, -1.0, 1.0, 5.0]);
        let r = k_nearest(&[0.0], &set, 3).unwrap();
        assert_eq!(r.neighbors, vec![0, 1, 2]);
    }

    #[test]
    fn strict_counts() {
        let set = line(&[0.0, 1.0, 2.0]);
        assert_eq!(count_within_radius(&[0.0], &set, 0.0), 0);
        assert_eq!(count_within_radius(&[0.0], &set, 1.5), 2);
        assert_eq!(count_within_radius(&[0.0], &set, 1.0), 1);
    }

    #[test]
    fn matches_full_sort_oracle() {
        let mut rng = crate::rng::Rng::seed_from_u64(8);
        for metric in [Metric::Euclidean, Metric::Chebyshev] {
            let pts: Vec<Vec<f64>> = (0..200)
                .map(|_| (0..8).map(|_| rng.random_range(-1.0..1.0)).collect())
                .collect();
            let set = PointSet::from_points(8, metric, &pts).unwrap();
            let q: Vec<f64> = (0..8).map(|_| rng.random_range(-1.0..1.0)).collect();
            let mut all: Vec<f64> = pts
                .iter()
                .map(|p| match metric {
                    Metric::Euclidean => p.iter().zip(&q).map(|(a, b)| (a - b).powi(2)).sum::<f64>().sqrt(),
                    Metric::Chebyshev => p.iter().zip(&q).map(|(a, b)| (a - b).abs()).fold(0.0, f64::max),
                })
                .collect();
            all.sort_by(|a, b| a.partial_cmp(b).unwrap());
            assert_eq!(kth_nearest_radius(&q, &set, 5).unwrap(), all[4]);
            let r = 0.9;
            assert_eq!(count_within_radius(&q, &set, r), all.iter().filter(|d| **d < r).count());
        }
    }

    #[test]
    fn block_view_reads_sub_coordinates() {
        let set = PointSet::from_points(4, Metric::Chebyshev, [[1.0, 2.0, 3.0, 4.0], [5.0, 6.0, 7.0, 8.0]]).unwrap();
        let b = set.block(2, 2);
        assert_eq!(b.point(1), &[7.0, 8.0]);
        assert_eq!(b.len(), 2);
    }

    #[test]
    fn digamma_values() {
        assert_eq!(digamma_of_count(1) - digamma_of_count(0), 1.0);
        assert!((digamma_of_count(0) + 0.577_215_664_9).abs() < 1e-10);
        let h10 = 7381.0 / 2520.0;
        assert!((digamma_of_count(10) - (h10 - EULER_GAMMA)).abs() < 1e-14);
        // past the table
        let n = HARMONIC_TABLE_LEN + 10;
        let direct: f64 = (1..=n).rev().map(|j| 1.0 / j as f64).sum();
        assert!((harmonic(n) - direct).abs() < 1e-12);
    }

    fn arb_points(dim: usize) -> impl Strategy<Value = Vec<Vec<f64>>> {
        proptest::collection::vec(proptest::collection::vec(-5.0f64..5.0, dim), 1..40)
    }

    proptest! {
        #[test]
        fn radius_monotone_in_k(pts in arb_points(3), q in proptest::collection::vec(-5.0f64..5.0, 3)) {
            let set = PointSet::from_points(3, Metric::Chebyshev, &pts).unwrap();
            let mut prev = 0.0;
            for k in 1..=pts.len() {
                let r = kth_nearest_radius(&q, &set, k).unwrap();
                prop_assert!(r >= prev);
                prop_assert!(count_within_radius(&q, &set, r) <= k - 1);
                prev = r;
            }
        }

        #[test]
        fn metric_axioms(a in proptest::collection::vec(-5.0f64..5.0, 4),
                         b in proptest::collection::vec(-5.0f64..5.0, 4),
                         c in proptest::collection::vec(-5.0f64..5.0, 4)) {
            for m in [Metric::Euclidean, Metric::Chebyshev] {
                prop_assert!((m.distance(&a, &b) - m.distance(&b, &a)).abs() <= 1e-12);
                prop_assert!(m.distance(&a, &c) <= m.distance(&a, &b) + m.distance(&b, &c) + 1e-12);
            }
        }

        #[test]
        fn digamma_strictly_increasing(n in 0usize..5000) {
            prop_assert!(digamma_of_count(n + 1) > digamma_of_count(n));
        }
    }
}
