use super::TrainError;
use crate::autodiff::RngStream;
use crate::linalg::Matrix;
use crate::parallel::{self, Execution};

const RESTARTS: usize = 10;
const MAX_ITERS: usize = 300;
const TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansResult {
    pub assignments: Vec<usize>,
    pub centroids: Matrix,
    pub inertia: f64,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn nearest(x: &[f64], centroids: &Matrix) -> (usize, f64) {
    (0..centroids.rows())
        .map(|c| (c, sq_dist(x, centroids.row(c))))
        .fold((0, f64::INFINITY), |best, cur| if cur.1 < best.1 { cur } else { best })
}

/// k-means++ seeding: the first centre uniformly, each later one with
/// probability proportional to its squared distance from the chosen set.
fn seed_centroids(x: &Matrix, k: usize, rng: &mut RngStream) -> Matrix {
    let n = x.rows();
    let mut centroids = Matrix::zeros(k, x.cols());
    centroids.row_mut(0).copy_from_slice(x.row(rng.below(n)));
    let mut d2: Vec<f64> = (0..n).map(|i| sq_dist(x.row(i), centroids.row(0))).collect();
    for c in 1..k {
        let total: f64 = d2.iter().sum();
        let pick = if total > 0.0 {
            let mut r = rng.uniform() * total;
            let mut chosen = n - 1;
            for (i, &d) in d2.iter().enumerate() {
                if r < d {
                    chosen = i;
                    break;
                }
                r -= d;
            }
            chosen
        } else {
            rng.below(n)
        };
        centroids.row_mut(c).copy_from_slice(x.row(pick));
        for (i, d) in d2.iter_mut().enumerate() {
            *d = d.min(sq_dist(x.row(i), centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(x: &Matrix, k: usize, rng: &mut RngStream) -> KMeansResult {
    let (n, d) = x.shape();
    let mut centroids = seed_centroids(x, k, rng);
    let mut assignments = vec![0; n];
    for _ in 0..MAX_ITERS {
        for (i, a) in assignments.iter_mut().enumerate() {
            *a = nearest(x.row(i), &centroids).0;
        }
        let mut sums = Matrix::zeros(k, d);
        let mut sizes = vec![0usize; k];
        for (i, &a) in assignments.iter().enumerate() {
            sizes[a] += 1;
            for (s, &v) in sums.row_mut(a).iter_mut().zip(x.row(i)) {
                *s += v;
            }
        }
        for c in 0..k {
            if sizes[c] == 0 {
                // an empty cluster takes the point farthest from its centre
                // among clusters that can spare one
                let far = (0..n)
                    .filter(|&i| sizes[assignments[i]] > 1)
                    .map(|i| (i, sq_dist(x.row(i), centroids.row(assignments[i]))))
                    .fold((0, -1.0), |b, cur| if cur.1 > b.1 { cur } else { b })
                    .0;
                sums.row_mut(c).copy_from_slice(x.row(far));
                sizes[c] = 1;
                let old = assignments[far];
                sizes[old] -= 1;
                for (s, &v) in sums.row_mut(old).iter_mut().zip(x.row(far)) {
                    *s -= v;
                }
                assignments[far] = c;
            }
        }
        let mut shift: f64 = 0.0;
        for c in 0..k {
            let inv = 1.0 / sizes[c].max(1) as f64;
            let new: Vec<f64> = sums.row(c).iter().map(|s| s * inv).collect();
            shift = shift.max(sq_dist(&new, centroids.row(c)).sqrt());
            centroids.row_mut(c).copy_from_slice(&new);
        }
        if shift < TOLERANCE {
            break;
        }
    }
    let mut inertia = 0.0;
    for (i, a) in assignments.iter_mut().enumerate() {
        let (c, dist) = nearest(x.row(i), &centroids);
        *a = c;
        inertia += dist;
    }
    KMeansResult {
        assignments,
        centroids,
        inertia,
    }
}

/// Best-of-ten k-means++/Lloyd runs by inertia. Restart `r` draws from
/// stream `r` of `seed`, so the result does not depend on thread count.
pub fn kmeans(x: &Matrix, k: usize, seed: u64, exec: Execution) -> Result<KMeansResult, TrainError> {
    if k == 0 || k > x.rows() {
        return Err(TrainError::Clusters { k, n: x.rows() });
    }
    let runs = parallel::map_indices(exec, RESTARTS, |r| lloyd(x, k, &mut RngStream::with_stream(seed, r as u64)));
    Ok(runs
        .into_iter()
        .reduce(|best, cur| if cur.inertia < best.inertia { cur } else { best })
        .expect("at least one restart"))
}
