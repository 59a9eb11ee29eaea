//! Seeded k-means++ initialization and Lloyd iterations over dense points.
//!
//! Assignment breaks ties toward the lowest centroid index and centroid
//! updates sum in input order, so a fixed seed gives bit-identical output.

use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use thiserror::Error;

#[derive(Debug, Error)]
pub enum KmeansError {
    #[error("k must be at least 1")]
    ZeroK,
    #[error("need at least {k} distinct points, got {distinct}")]
    TooFewDistinct { k: usize, distinct: usize },
    #[error("points have inconsistent dimensions")]
    RaggedInput,
}

pub fn squared_distance(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid; ties resolve to the lowest index.
pub fn nearest_centroid(point: &[f64], centroids: &[Vec<f64>]) -> usize {
    let mut best = 0;
    let mut best_d = f64::INFINITY;
    for (i, c) in centroids.iter().enumerate() {
        let d = squared_distance(point, c);
        if d < best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

/// Within-cluster sum of squared Euclidean distances to the nearest
/// centroid — the quantity Lloyd iterations monotonically decrease.
pub fn objective(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> f64 {
    points
        .iter()
        .map(|p| squared_distance(p, &centroids[nearest_centroid(p, centroids)]))
        .sum()
}

fn count_distinct(points: &[Vec<f64>]) -> usize {
    let mut sorted: Vec<&Vec<f64>> = points.iter().collect();
    sorted.sort_by(|a, b| a.partial_cmp(b).unwrap());
    sorted.dedup_by(|a, b| a == b);
    sorted.len()
}

fn kmeanspp_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let mut centroids = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..n)].clone());
    let mut d2: Vec<f64> = points
        .iter()
        .map(|p| squared_distance(p, &centroids[0]))
        .collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total <= 0.0 {
            // all mass on existing centroids; take the first point not yet chosen
            (0..n).find(|&i| d2[i] > 0.0).unwrap_or(0)
        } else {
            let mut target = rng.gen::<f64>() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                target -= d;
                if target <= 0.0 {
                    chosen = i;
                    break;
                }
            }
            chosen
        };
        centroids.push(points[next].clone());
        for (i, p) in points.iter().enumerate() {
            let d = squared_distance(p, centroids.last().unwrap());
            if d < d2[i] {
                d2[i] = d;
            }
        }
    }
    centroids
}

/// k-means++ seeding followed by Lloyd iterations. Stops when the largest
/// centroid movement falls below `tol` or after `max_iters` rounds.
/// Returns the centroids and the objective trace (one value per
/// iteration, after the update).
pub fn fit_kmeans(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    max_iters: usize,
    tol: f64,
) -> Result<(Vec<Vec<f64>>, Vec<f64>), KmeansError> {
    if k == 0 {
        return Err(KmeansError::ZeroK);
    }
    let dim = points.first().map(|p| p.len()).unwrap_or(0);
    if points.iter().any(|p| p.len() != dim) {
        return Err(KmeansError::RaggedInput);
    }
    let distinct = count_distinct(points);
    if distinct < k {
        return Err(KmeansError::TooFewDistinct { k, distinct });
    }

    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centroids = kmeanspp_init(points, k, &mut rng);
    let mut trace = Vec::new();

    for _ in 0..max_iters {
        // assignment
        let assign: Vec<usize> = points.iter().map(|p| nearest_centroid(p, &centroids)).collect();

        // update: fixed-order summation per centroid
        let mut sums = vec![vec![0.0f64; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &a) in points.iter().zip(&assign) {
            counts[a] += 1;
            for (s, &v) in sums[a].iter_mut().zip(p) {
                *s += v;
            }
        }
        // an empty cluster takes the point farthest from its centroid
        // (lowest index on ties)
        let mut new_centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
        for i in 0..k {
            if counts[i] == 0 {
                let mut far_idx = 0;
                let mut far_d = -1.0;
                for (j, p) in points.iter().enumerate() {
                    let d = squared_distance(p, &centroids[assign[j]]);
                    if d > far_d {
                        far_d = d;
                        far_idx = j;
                    }
                }
                new_centroids.push(points[far_idx].clone());
            } else {
                new_centroids.push(
                    sums[i]
                        .iter()
                        .map(|&s| s / counts[i] as f64)
                        .collect(),
                );
            }
        }

        let movement = centroids
            .iter()
            .zip(&new_centroids)
            .map(|(a, b)| squared_distance(a, b).sqrt())
            .fold(0.0f64, f64::max);
        centroids = new_centroids;
        trace.push(objective(points, &centroids));
        if movement < tol {
            break;
        }
    }
    Ok((centroids, trace))
}

/// Best of `restarts` seeded runs by final objective.
pub fn fit_kmeans_restarts(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
    restarts: usize,
    max_iters: usize,
    tol: f64,
) -> Result<(Vec<Vec<f64>>, f64), KmeansError> {
    let mut best: Option<(Vec<Vec<f64>>, f64)> = None;
    for r in 0..restarts.max(1) {
        let (c, _) = fit_kmeans(points, k, seed.wrapping_add(r as u64), max_iters, tol)?;
        let obj = objective(points, &c);
        if best.as_ref().map_or(true, |(_, b)| obj < *b) {
            best = Some((c, obj));
        }
    }
    Ok(best.unwrap())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_clusters_in_1d() {
        let pts: Vec<Vec<f64>> = [0.0, 1.0, 10.0, 11.0].iter().map(|&v| vec![v]).collect();
        let (mut c, _) = fit_kmeans(&pts, 2, 7, 100, 1e-9).unwrap();
        c.sort_by(|a, b| a[0].partial_cmp(&b[0]).unwrap());
        assert!((c[0][0] - 0.5).abs() < 1e-12);
        assert!((c[1][0] - 10.5).abs() < 1e-12);
    }

    #[test]
    fn k_equals_distinct_points_gives_zero_objective() {
        let pts = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let (c, _) = fit_kmeans(&pts, 3, 1, 100, 1e-9).unwrap();
        assert!(objective(&pts, &c) < 1e-18);
    }

    #[test]
    fn k1_is_the_mean() {
        let pts = vec![vec![1.0, 2.0], vec![3.0, 4.0], vec![5.0, 0.0]];
        let (c, _) = fit_kmeans(&pts, 1, 1, 100, 1e-9).unwrap();
        assert!((c[0][0] - 3.0).abs() < 1e-12);
        assert!((c[0][1] - 2.0).abs() < 1e-12);
    }

    #[test]
    fn too_few_distinct_points() {
        let pts = vec![vec![1.0], vec![1.0], vec![2.0]];
        assert!(matches!(
            fit_kmeans(&pts, 3, 1, 100, 1e-9),
            Err(KmeansError::TooFewDistinct { .. })
        ));
    }

    #[test]
    fn objective_trace_is_non_increasing() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(2);
        let pts: Vec<Vec<f64>> = (0..200)
            .map(|_| (0..4).map(|_| rng.gen_range(-1.0..1.0)).collect())
            .collect();
        let (_, trace) = fit_kmeans(&pts, 5, 3, 50, 0.0).unwrap();
        for w in trace.windows(2) {
            assert!(
                w[1] <= w[0] + 1e-9,
                "objective increased: {} -> {}",
                w[0],
                w[1]
            );
        }
    }

    #[test]
    fn fixed_seed_is_deterministic() {
        use rand::Rng;
        let mut rng = ChaCha8Rng::seed_from_u64(8);
        let pts: Vec<Vec<f64>> = (0..60)
            .map(|_| (0..3).map(|_| rng.gen_range(0.0..1.0)).collect())
            .collect();
        let (a, _) = fit_kmeans(&pts, 4, 5, 100, 1e-9).unwrap();
        let (b, _) = fit_kmeans(&pts, 4, 5, 100, 1e-9).unwrap();
        assert_eq!(a, b);
    }
}
