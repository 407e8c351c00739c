//! Lloyd's k-means with seeded k-means++ initialization.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::model::IndexParams;

#[derive(Debug, Clone, PartialEq)]
pub struct ClusteringResult {
    pub centroids: Vec<Vec<f64>>,
    /// Nearest centroid of every input point under the final centroids.
    pub assignments: Vec<usize>,
    /// Within-cluster sum of squared distances under the final centroids.
    pub sse: f64,
    /// Number of Lloyd iterations performed.
    pub iterations: usize,
}

/// State reported after each Lloyd iteration.
#[derive(Debug)]
pub struct Iteration<'a> {
    /// One-based iteration counter.
    pub iteration: usize,
    /// Assignments computed against the previous centroids.
    pub assignments: &'a [usize],
    /// SSE of `assignments` against the previous centroids.
    pub sse: f64,
    /// Centroids after the update step.
    pub centroids: &'a [Vec<f64>],
}

pub(crate) fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the closest centroid, ties going to the lowest index.
pub(crate) fn nearest(centroids: &[Vec<f64>], point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.iter().enumerate() {
        let d = squared_distance(c, point);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

fn check_points(points: &[Vec<f64>], k: usize) -> Result<usize> {
    if k == 0 {
        return Err(Error::validation("k must be at least 1"));
    }
    if points.len() < k {
        return Err(Error::InsufficientData(format!(
            "{} points cannot form {k} clusters",
            points.len()
        )));
    }
    let dim = points[0].len();
    if dim == 0 || points.iter().any(|p| p.len() != dim) {
        return Err(Error::validation("all points must share the same non-zero dimension"));
    }
    if points.iter().flatten().any(|v| !v.is_finite()) {
        return Err(Error::validation("points must be finite"));
    }
    Ok(dim)
}

/// k-means++ seeding: the first centroid is drawn uniformly, each following
/// one with probability proportional to its squared distance to the closest
/// centroid chosen so far.
pub fn kmeans_plus_plus(points: &[Vec<f64>], k: usize, seed: u64) -> Result<Vec<Vec<f64>>> {
    check_points(points, k)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n = points.len();
    let mut centroids = vec![points[rng.random_range(0..n)].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| squared_distance(p, &centroids[0])).collect();

    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let target = rng.random::<f64>() * total;
            let mut acc = 0.0;
            let mut chosen = None;
            for (i, &d) in d2.iter().enumerate() {
                acc += d;
                if d > 0.0 {
                    chosen = Some(i);
                    if acc > target {
                        break;
                    }
                }
            }
            chosen.expect("positive total implies a positive weight")
        } else {
            rng.random_range(0..n)
        };
        let c = points[pick].clone();
        for (d, p) in d2.iter_mut().zip(points) {
            *d = d.min(squared_distance(p, &c));
        }
        centroids.push(c);
    }
    Ok(centroids)
}

/// Clusters `points` into `params.k` groups.
///
/// Iterates until the largest centroid displacement drops below
/// `params.convergence_eps` or `params.max_iterations` is reached. The
/// result depends only on the inputs and the seed.
pub fn kmeans(points: &[Vec<f64>], params: &IndexParams) -> Result<ClusteringResult> {
    kmeans_observed(points, params, |_| {})
}

/// [`kmeans`] with a callback invoked after every iteration.
pub fn kmeans_observed(
    points: &[Vec<f64>],
    params: &IndexParams,
    observer: impl FnMut(&Iteration<'_>),
) -> Result<ClusteringResult> {
    let init = kmeans_plus_plus(points, params.k, params.seed)?;
    lloyd(points, init, params.max_iterations, params.convergence_eps, observer)
}

/// Lloyd iterations from explicit initial centroids.
///
/// A cluster that loses all its points is reseeded with the point farthest
/// from its own centroid (ties to the lowest index), so exactly `k`
/// centroids always survive.
pub fn lloyd(
    points: &[Vec<f64>],
    initial: Vec<Vec<f64>>,
    max_iterations: usize,
    convergence_eps: f64,
    mut observer: impl FnMut(&Iteration<'_>),
) -> Result<ClusteringResult> {
    let dim = check_points(points, initial.len())?;
    if initial.iter().any(|c| c.len() != dim) {
        return Err(Error::validation("initial centroids must match the point dimension"));
    }
    if max_iterations == 0 {
        return Err(Error::validation("maxIterations must be at least 1"));
    }
    if convergence_eps.is_nan() || convergence_eps <= 0.0 {
        return Err(Error::validation("convergenceEps must be positive"));
    }

    let k = initial.len();
    let mut centroids = initial;
    let mut iterations = 0;
    for iteration in 1..=max_iterations {
        let (assignments, mut dist) = assign_all(points, &centroids);
        let sse = dist.iter().sum();

        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assignments) {
            counts[a] += 1;
            for (s, v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut updated = Vec::with_capacity(k);
        for (j, (sum, count)) in sums.into_iter().zip(&counts).enumerate() {
            if *count > 0 {
                updated.push(sum.into_iter().map(|s| s / *count as f64).collect());
            } else {
                updated.push(centroids[j].clone());
            }
        }
        for j in (0..k).filter(|&j| counts[j] == 0) {
            let mut far = 0;
            for i in 1..dist.len() {
                if dist[i] > dist[far] {
                    far = i;
                }
            }
            updated[j] = points[far].clone();
            dist[far] = f64::NEG_INFINITY;
        }

        let displacement = centroids
            .iter()
            .zip(&updated)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0, f64::max);
        observer(&Iteration {
            iteration,
            assignments: &assignments,
            sse,
            centroids: &updated,
        });
        centroids = updated;
        iterations = iteration;
        if displacement < convergence_eps {
            break;
        }
    }

    let (assignments, dist) = assign_all(points, &centroids);
    Ok(ClusteringResult {
        centroids,
        assignments,
        sse: dist.iter().sum(),
        iterations,
    })
}

fn assign_all(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, Vec<f64>) {
    points.par_iter().map(|p| nearest(centroids, p)).unzip()
}

#[cfg(test)]
mod tests {
    use super::*;

    fn params(k: usize, seed: u64) -> IndexParams {
        IndexParams {
            k,
            max_iterations: 100,
            convergence_eps: 1e-9,
            seed,
        }
    }

    #[test]
    fn single_cluster_is_the_mean() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, -2.0], vec![5.0, 6.0], vec![-1.0, 0.0]];
        let r = kmeans(&pts, &params(1, 3)).unwrap();
        assert!((r.centroids[0][0] - 2.0).abs() < 1e-12);
        assert!((r.centroids[0][1] - 1.5).abs() < 1e-12);
        // Total variance sum around the mean.
        let tv: f64 = pts.iter().map(|p| (p[0] - 2.0).powi(2) + (p[1] - 1.5).powi(2)).sum();
        assert!((r.sse - tv).abs() < 1e-12);
    }

    #[test]
    fn separable_pair() {
        let pts = vec![vec![0.0; 64], vec![10.0; 64]];
        let r = kmeans(&pts, &params(2, 0)).unwrap();
        let mut c = r.centroids.clone();
        c.sort_by(|a, b| a[0].total_cmp(&b[0]));
        assert_eq!(c, pts);
        assert_eq!(r.sse, 0.0);
    }

    #[test]
    fn too_few_points() {
        let pts = vec![vec![0.0, 1.0]; 3];
        assert!(matches!(kmeans(&pts, &params(4, 0)), Err(Error::InsufficientData(_))));
    }

    #[test]
    fn mismatched_dimensions() {
        let pts = vec![vec![0.0, 1.0], vec![0.0]];
        assert!(matches!(kmeans(&pts, &params(1, 0)), Err(Error::Validation(_))));
    }

    #[test]
    fn duplicate_points_keep_k_centroids() {
        // Four identical points and one outlier: seeding must fall back to
        // uniform draws and repair must keep three centroids alive.
        let mut pts = vec![vec![1.0, 1.0]; 4];
        pts.push(vec![5.0, 5.0]);
        let r = kmeans(&pts, &params(3, 11)).unwrap();
        assert_eq!(r.centroids.len(), 3);
        assert_eq!(r.sse, 0.0);
    }

    #[test]
    fn empty_cluster_is_reseeded_to_farthest_point() {
        let pts = vec![vec![0.0], vec![1.0], vec![10.0]];
        // Centroid 1 starts far away and captures nothing.
        let init = vec![vec![0.5], vec![100.0]];
        let mut first = None;
        lloyd(&pts, init, 1, 1e-9, |it| first = Some(it.centroids.to_vec())).unwrap();
        // All points go to centroid 0 (mean 11/3); point 2 is farthest from 0.5.
        let c = first.unwrap();
        assert!((c[0][0] - 11.0 / 3.0).abs() < 1e-12);
        assert_eq!(c[1], vec![10.0]);
    }

    #[test]
    fn seeding_is_deterministic() {
        let pts: Vec<Vec<f64>> = (0..50).map(|i| vec![(i * 7 % 13) as f64, (i * 3 % 5) as f64]).collect();
        assert_eq!(kmeans_plus_plus(&pts, 5, 42).unwrap(), kmeans_plus_plus(&pts, 5, 42).unwrap());
        assert_eq!(kmeans(&pts, &params(5, 42)).unwrap(), kmeans(&pts, &params(5, 42)).unwrap());
    }
}
