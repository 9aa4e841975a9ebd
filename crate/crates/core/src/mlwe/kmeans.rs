use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

pub const MAX_ITERATIONS: usize = 100;
pub const SHIFT_TOLERANCE: f64 = 1e-6;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct KMeansParams {
    pub k: usize,
    pub seed: u64,
    /// Independent k-means++ restarts; the lowest-SSE run wins.
    pub restarts: usize,
    pub max_iterations: usize,
}

impl KMeansParams {
    pub fn new(k: usize, seed: u64) -> Self {
        Self {
            k,
            seed,
            restarts: 10,
            max_iterations: MAX_ITERATIONS,
        }
    }

    pub fn with_restarts(mut self, restarts: usize) -> Self {
        self.restarts = restarts.max(1);
        self
    }
}

#[derive(Debug, Clone)]
pub struct KMeansFit {
    /// Cluster id per row; ids are numbered by first appearance.
    pub assignment: Vec<usize>,
    pub centroids: DMatrix<f64>,
    /// Within-cluster sum of squared distances.
    pub sse: f64,
    pub iterations: usize,
    /// SSE after each assignment step of the winning run.
    pub sse_history: Vec<f64>,
    /// Cluster count actually used (may be below the request when rows
    /// repeat).
    pub k: usize,
}

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn row_vec(m: &DMatrix<f64>, r: usize) -> Vec<f64> {
    m.row(r).iter().copied().collect()
}

fn distinct_rows(points: &[Vec<f64>]) -> usize {
    let mut seen: Vec<&Vec<f64>> = Vec::new();
    for p in points {
        if !seen.iter().any(|q| *q == p) {
            seen.push(p);
        }
    }
    seen.len()
}

/// Lloyd's algorithm with k-means++ seeding.
///
/// The requested `k` is capped to the number of distinct rows; fewer than
/// two rows, or fewer than two distinct rows, is `DegenerateInput`. Empty
/// clusters are re-seeded with the point farthest from its centroid.
/// Results are deterministic for a fixed seed.
pub fn kmeans(matrix: &DMatrix<f64>, params: KMeansParams) -> Result<KMeansFit> {
    let t = matrix.nrows();
    if t < 2 {
        return Err(Error::DegenerateInput(format!("{t} rows cannot be clustered")));
    }
    let points: Vec<Vec<f64>> = (0..t).map(|r| row_vec(matrix, r)).collect();
    let distinct = distinct_rows(&points);
    if distinct < 2 {
        return Err(Error::DegenerateInput("all rows are identical".into()));
    }
    let k = params.k.clamp(1, distinct);
    if k < 2 {
        return Err(Error::DegenerateInput(format!("k = {} is below 2", params.k)));
    }

    let mut rng = ChaCha8Rng::seed_from_u64(params.seed);
    let mut best: Option<KMeansFit> = None;
    for _ in 0..params.restarts.max(1) {
        let fit = lloyd(&points, k, params.max_iterations, &mut rng);
        if best.as_ref().map_or(true, |b| fit.sse < b.sse) {
            best = Some(fit);
        }
    }
    let mut fit = best.expect("at least one run");
    relabel_by_first_appearance(&mut fit);
    Ok(fit)
}

fn plus_plus_init(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let mut centroids = vec![points[rng.random_range(0..points.len())].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centroids[0])).collect();
    while centroids.len() < k {
        let total: f64 = d2.iter().sum();
        let next = if total > 0.0 {
            let mut target = rng.random::<f64>() * total;
            let mut chosen = d2.iter().rposition(|d| *d > 0.0).unwrap_or(0);
            for (i, d) in d2.iter().enumerate() {
                if *d <= 0.0 {
                    continue;
                }
                if target < *d {
                    chosen = i;
                    break;
                }
                target -= d;
            }
            chosen
        } else {
            rng.random_range(0..points.len())
        };
        let c = points[next].clone();
        for (p, d) in points.iter().zip(d2.iter_mut()) {
            *d = d.min(sq_dist(p, &c));
        }
        centroids.push(c);
    }
    centroids
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut sse = 0.0;
    let assignment = points
        .iter()
        .map(|p| {
            let (best, d) = centroids
                .iter()
                .enumerate()
                .map(|(i, c)| (i, sq_dist(p, c)))
                .fold((0, f64::INFINITY), |acc, x| if x.1 < acc.1 { x } else { acc });
            sse += d;
            best
        })
        .collect();
    (assignment, sse)
}

fn lloyd(points: &[Vec<f64>], k: usize, max_iterations: usize, rng: &mut ChaCha8Rng) -> KMeansFit {
    let dim = points[0].len();
    let mut centroids = plus_plus_init(points, k, rng);
    let (mut assignment, mut sse) = assign(points, &centroids);
    let mut history = vec![sse];
    let mut iterations = 0;

    while iterations < max_iterations {
        iterations += 1;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&assignment) {
            counts[c] += 1;
            for (s, v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        let mut next: Vec<Vec<f64>> = sums
            .into_iter()
            .zip(&counts)
            .map(|(s, &n)| s.into_iter().map(|v| v / n.max(1) as f64).collect())
            .collect();

        // Re-seed empty clusters with the worst-served points.
        let mut taken: Vec<usize> = Vec::new();
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..points.len())
                .filter(|i| !taken.contains(i))
                .max_by(|&a, &b| {
                    let da = sq_dist(&points[a], &next[assignment[a]]);
                    let db = sq_dist(&points[b], &next[assignment[b]]);
                    da.total_cmp(&db).then(b.cmp(&a))
                })
                .expect("more points than clusters");
            taken.push(far);
            next[c] = points[far].clone();
        }

        let shift = centroids
            .iter()
            .zip(&next)
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = next;
        let (a, s) = assign(points, &centroids);
        assignment = a;
        sse = s;
        history.push(sse);
        if shift <= SHIFT_TOLERANCE {
            break;
        }
    }

    KMeansFit {
        assignment,
        centroids: DMatrix::from_fn(k, dim, |r, c| centroids[r][c]),
        sse,
        iterations,
        sse_history: history,
        k,
    }
}

fn relabel_by_first_appearance(fit: &mut KMeansFit) {
    let k = fit.centroids.nrows();
    let mut map = vec![usize::MAX; k];
    let mut order = Vec::with_capacity(k);
    for &c in &fit.assignment {
        if map[c] == usize::MAX {
            map[c] = order.len();
            order.push(c);
        }
    }
    // clusters left empty are dropped
    let dim = fit.centroids.ncols();
    fit.centroids = DMatrix::from_fn(order.len(), dim, |r, c| fit.centroids[(order[r], c)]);
    fit.k = order.len();
    for c in &mut fit.assignment {
        *c = map[*c];
    }
}

/// Within-cluster SSE of an arbitrary assignment, using cluster means.
pub fn partition_sse(matrix: &DMatrix<f64>, assignment: &[usize]) -> f64 {
    let k = assignment.iter().max().map_or(0, |m| m + 1);
    let dim = matrix.ncols();
    let mut sums = vec![vec![0.0; dim]; k];
    let mut counts = vec![0usize; k];
    for (r, &c) in assignment.iter().enumerate() {
        counts[c] += 1;
        for (s, v) in sums[c].iter_mut().zip(matrix.row(r).iter()) {
            *s += v;
        }
    }
    assignment
        .iter()
        .enumerate()
        .map(|(r, &c)| {
            let mean: Vec<f64> = sums[c].iter().map(|s| s / counts[c] as f64).collect();
            sq_dist(&row_vec(matrix, r), &mean)
        })
        .sum()
}
