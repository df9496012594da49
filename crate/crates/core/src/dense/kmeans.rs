//! Lloyd's k-means with k-means++ seeding and best-of-restarts selection.

use rand::Rng as _;

use super::{squared_distance, Matrix};
use crate::error::{Result, SdssError};
use crate::rng::{derive_seed, rng_from_seed, Rng};

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    /// `k x f` centroids.
    pub centroids: Matrix,
    /// Sum of squared distances of each point to its assigned centroid.
    pub inertia: f64,
}

/// Clusters the rows of `x` into `k` groups.
///
/// Each restart draws a k-means++ initialization from a seed derived from
/// `seed` and runs Lloyd iterations until assignments stop changing or
/// `max_iter` is reached. The restart with the lowest inertia wins; ties go
/// to the earlier restart.
pub fn kmeans(
    x: &Matrix,
    k: usize,
    restarts: usize,
    max_iter: usize,
    seed: u64,
) -> Result<KMeansResult> {
    let n = x.rows();
    if k == 0 || k > n {
        return Err(SdssError::InvalidParameter(format!(
            "k-means needs 1 <= k <= n, got k = {k}, n = {n}"
        )));
    }
    let mut best: Option<KMeansResult> = None;
    for r in 0..restarts.max(1) {
        let mut rng = rng_from_seed(derive_seed(seed, r as u64));
        let init = plus_plus_init(x, k, &mut rng);
        let (result, _) = lloyd(x, init, max_iter);
        if best.as_ref().is_none_or(|b| result.inertia < b.inertia) {
            best = Some(result);
        }
    }
    Ok(best.expect("at least one restart"))
}

/// k-means++: first centroid uniform, each next one sampled proportional to
/// squared distance from the nearest chosen centroid.
fn plus_plus_init(x: &Matrix, k: usize, rng: &mut Rng) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    let first = rng.random_range(0..n);
    centroids.row_mut(0).copy_from_slice(x.row(first));
    let mut nearest: Vec<f64> = (0..n)
        .map(|i| squared_distance(x.row(i), x.row(first)))
        .collect();
    for c in 1..k {
        let total: f64 = nearest.iter().sum();
        let pick = if total > 0.0 {
            let mut target = rng.random_range(0.0..total);
            let mut chosen = n - 1;
            for (i, &d) in nearest.iter().enumerate() {
                if target < d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            // all points coincide with chosen centroids
            rng.random_range(0..n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in nearest.iter_mut().enumerate() {
            *d = d.min(squared_distance(x.row(i), x.row(pick)));
        }
    }
    centroids
}

fn assign(x: &Matrix, centroids: &Matrix, assignments: &mut [usize]) -> f64 {
    let mut inertia = 0.0;
    for (i, a) in assignments.iter_mut().enumerate() {
        let row = x.row(i);
        let mut best = 0;
        let mut best_d = f64::INFINITY;
        for c in 0..centroids.rows() {
            let d = squared_distance(row, centroids.row(c));
            if d < best_d {
                best_d = d;
                best = c;
            }
        }
        *a = best;
        inertia += best_d;
    }
    inertia
}

/// Runs Lloyd iterations from `centroids`; returns the result and the inertia
/// after every assignment step.
pub(crate) fn lloyd(
    x: &Matrix,
    mut centroids: Matrix,
    max_iter: usize,
) -> (KMeansResult, Vec<f64>) {
    let (n, f) = x.shape();
    let k = centroids.rows();
    let mut assignments = vec![usize::MAX; n];
    let mut next = vec![0usize; n];
    let mut history = Vec::new();
    let mut inertia = assign(x, &centroids, &mut next);
    history.push(inertia);
    for _ in 0..max_iter.max(1) {
        if next == assignments {
            break;
        }
        assignments.copy_from_slice(&next);

        let mut sums = Matrix::zeros(k, f);
        let mut counts = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            counts[a] += 1;
            for (s, &v) in sums.row_mut(a).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for (c, &count) in counts.iter().enumerate() {
            if count > 0 {
                let inv = 1.0 / count as f64;
                for (dst, &s) in centroids.row_mut(c).iter_mut().zip(sums.row(c)) {
                    *dst = s * inv;
                }
            }
        }
        // empty clusters move onto the point farthest from its own centroid
        let empty: Vec<usize> = (0..k).filter(|&c| counts[c] == 0).collect();
        for c in empty {
            let far = (0..n)
                .map(|i| (i, squared_distance(x.row(i), centroids.row(assignments[i]))))
                .fold((0, f64::NEG_INFINITY), |acc, cur| {
                    if cur.1 > acc.1 {
                        cur
                    } else {
                        acc
                    }
                })
                .0;
            let point = x.row(far).to_vec();
            centroids.row_mut(c).copy_from_slice(&point);
        }
        inertia = assign(x, &centroids, &mut next);
        history.push(inertia);
    }
    let assignments = if next == assignments {
        assignments
    } else {
        next
    };
    (
        KMeansResult {
            assignments,
            centroids,
            inertia,
        },
        history,
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dense::standard_normal;

    fn two_clouds() -> Matrix {
        let noise = standard_normal(40, 2, 9).scale(0.1);
        let mut x = noise;
        for i in 20..40 {
            x.set(i, 0, x.get(i, 0) + 10.0);
            x.set(i, 1, x.get(i, 1) + 10.0);
        }
        x
    }

    #[test]
    fn separable_clouds_are_recovered() {
        let x = two_clouds();
        let res = kmeans(&x, 2, 10, 100, 3).unwrap();
        let a = res.assignments[0];
        assert!(res.assignments[..20].iter().all(|&c| c == a));
        assert!(res.assignments[20..].iter().all(|&c| c != a));
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let x = standard_normal(30, 3, 5);
        let res = kmeans(&x, 1, 3, 50, 0).unwrap();
        let mean = x.column_means();
        for (c, m) in res.centroids.row(0).iter().zip(&mean) {
            assert!((c - m).abs() < 1e-12);
        }
        let total: f64 = (0..30).map(|i| squared_distance(x.row(i), &mean)).sum();
        assert!((res.inertia - total).abs() < 1e-9);
    }

    #[test]
    fn k_larger_than_n_is_rejected() {
        let x = Matrix::zeros(3, 2);
        assert!(kmeans(&x, 4, 1, 10, 0).is_err());
        assert!(kmeans(&x, 0, 1, 10, 0).is_err());
    }

    #[test]
    fn inertia_never_increases_across_iterations() {
        for seed in 0..20 {
            let x = standard_normal(60, 3, seed);
            let mut rng = rng_from_seed(seed);
            let init = plus_plus_init(&x, 5, &mut rng);
            let (_, history) = lloyd(&x, init, 100);
            for w in history.windows(2) {
                assert!(w[1] <= w[0] * (1.0 + 1e-12) + 1e-12, "{history:?}");
            }
        }
    }

    #[test]
    fn empty_cluster_is_reseeded() {
        // centroid 1 starts far away from all data, so it loses every point
        let x = Matrix::from_rows(&[[0.0], [0.1], [5.0], [5.1]]).unwrap();
        let init = Matrix::from_rows(&[[2.5], [100.0]]).unwrap();
        let (res, _) = lloyd(&x, init, 50);
        let used: std::collections::BTreeSet<_> = res.assignments.iter().copied().collect();
        assert_eq!(used.len(), 2);
        assert!((res.inertia - 0.01).abs() < 1e-9);
    }

    #[test]
    fn deterministic_under_seed() {
        let x = standard_normal(50, 4, 11);
        assert_eq!(
            kmeans(&x, 3, 5, 100, 8).unwrap(),
            kmeans(&x, 3, 5, 100, 8).unwrap()
        );
    }
}
