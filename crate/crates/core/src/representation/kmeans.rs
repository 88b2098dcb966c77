//! Lloyd's k-means with k-means++ seeding and restarts.

use ndarray::{Array2, ArrayView1, ArrayView2, Axis};
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::Rng;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::seed::RngSeed;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
#[serde(deny_unknown_fields)]
pub struct KMeansConfig {
    pub max_iter: usize,
    /// Stop once no centroid moves farther than this.
    pub tol: f64,
    /// Independent k-means++ initializations; the lowest inertia wins.
    pub restarts: usize,
}

impl Default for KMeansConfig {
    fn default() -> Self {
        KMeansConfig {
            max_iter: 300,
            tol: 1e-6,
            restarts: 10,
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct KMeansFit {
    pub centroids: Array2<f64>,
    pub assignments: Vec<usize>,
    pub inertia: f64,
    /// Inertia after every assignment step, starting with the seeding.
    pub inertia_history: Vec<f64>,
    pub iterations: usize,
}

pub(crate) fn sq_dist(a: ArrayView1<f64>, b: ArrayView1<f64>) -> f64 {
    a.iter().zip(b.iter()).map(|(x, y)| (x - y) * (x - y)).sum()
}

/// Index of the nearest centroid (lowest index on ties) and its squared distance.
pub(crate) fn nearest(x: ArrayView1<f64>, centroids: &Array2<f64>) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (j, c) in centroids.outer_iter().enumerate() {
        let d = sq_dist(x, c);
        if d < best.1 {
            best = (j, d);
        }
    }
    best
}

/// Number of distinct rows, compared bitwise.
pub fn distinct_rows(x: ArrayView2<f64>) -> usize {
    let mut rows: Vec<Vec<u64>> = x
        .outer_iter()
        .map(|r| r.iter().map(|v| (v + 0.0).to_bits()).collect())
        .collect();
    rows.sort_unstable();
    rows.dedup();
    rows.len()
}

fn assign(x: ArrayView2<f64>, centroids: &Array2<f64>, labels: &mut [usize], dists: &mut [f64]) -> f64 {
    let mut inertia = 0.0;
    for (i, row) in x.outer_iter().enumerate() {
        let (j, d) = nearest(row, centroids);
        labels[i] = j;
        dists[i] = d;
        inertia += d;
    }
    inertia
}

fn plus_plus_init<R: Rng>(x: ArrayView2<f64>, k: usize, rng: &mut R) -> Array2<f64> {
    let n = x.nrows();
    let mut centroids = Array2::zeros((k, x.ncols()));
    let first = rng.random_range(0..n);
    centroids.row_mut(0).assign(&x.row(first));
    let mut d2: Vec<f64> = x.outer_iter().map(|r| sq_dist(r, centroids.row(0))).collect();
    for c in 1..k {
        let pick = match WeightedIndex::new(&d2) {
            Ok(w) => w.sample(rng),
            // every point already coincides with a centroid; caller guarantees k distinct rows
            Err(_) => rng.random_range(0..n),
        };
        centroids.row_mut(c).assign(&x.row(pick));
        for (i, r) in x.outer_iter().enumerate() {
            d2[i] = d2[i].min(sq_dist(r, centroids.row(c)));
        }
    }
    centroids
}

fn lloyd(x: ArrayView2<f64>, k: usize, cfg: &KMeansConfig, seed: RngSeed) -> KMeansFit {
    let n = x.nrows();
    let mut rng = seed.rng();
    let mut centroids = plus_plus_init(x, k, &mut rng);
    let mut labels = vec![0; n];
    let mut dists = vec![0.0; n];
    let mut inertia = assign(x, &centroids, &mut labels, &mut dists);
    let mut history = vec![inertia];
    let mut iterations = 0;

    while iterations < cfg.max_iter {
        iterations += 1;
        let mut sums = Array2::<f64>::zeros(centroids.dim());
        let mut counts = vec![0usize; k];
        for (i, row) in x.outer_iter().enumerate() {
            sums.row_mut(labels[i]).scaled_add(1.0, &row);
            counts[labels[i]] += 1;
        }
        let mut updated = centroids.clone();
        let mut taken = vec![false; n];
        for j in 0..k {
            if counts[j] > 0 {
                updated.row_mut(j).assign(&(&sums.row(j) / counts[j] as f64));
            } else {
                // reseed an empty cluster at the point farthest from its assigned centroid
                let far = (0..n)
                    .filter(|&i| !taken[i])
                    .fold(None, |best: Option<usize>, i| match best {
                        Some(b) if dists[b] >= dists[i] => Some(b),
                        _ => Some(i),
                    })
                    .expect("n >= k");
                taken[far] = true;
                updated.row_mut(j).assign(&x.row(far));
            }
        }
        let shift = centroids
            .outer_iter()
            .zip(updated.outer_iter())
            .map(|(a, b)| sq_dist(a, b).sqrt())
            .fold(0.0, f64::max);
        centroids = updated;
        inertia = assign(x, &centroids, &mut labels, &mut dists);
        history.push(inertia);
        if shift < cfg.tol {
            break;
        }
    }

    KMeansFit {
        centroids,
        assignments: labels,
        inertia,
        inertia_history: history,
        iterations,
    }
}

/// Runs `cfg.restarts` seeded k-means fits and keeps the lowest inertia
/// (ties to the earliest restart). Requires at least `k` distinct rows.
pub fn kmeans(x: ArrayView2<f64>, k: usize, cfg: &KMeansConfig, seed: RngSeed) -> KMeansFit {
    assert!(k > 0 && distinct_rows(x) >= k, "k-means needs at least k distinct rows");
    let restarts = cfg.restarts.max(1);
    let fits: Vec<KMeansFit> = (0..restarts)
        .into_par_iter()
        .map(|r| lloyd(x, k, cfg, seed.derive_index(r as u64)))
        .collect();
    fits.into_iter()
        .reduce(|best, f| if f.inertia < best.inertia { f } else { best })
        .expect("at least one restart")
}

/// Within-cluster sum of squares of an arbitrary assignment.
pub fn inertia_of(x: ArrayView2<f64>, assignments: &[usize], k: usize) -> f64 {
    let mut total = 0.0;
    for j in 0..k {
        let members: Vec<usize> = (0..x.nrows()).filter(|&i| assignments[i] == j).collect();
        if members.is_empty() {
            continue;
        }
        let sub = x.select(Axis(0), &members);
        let mean = sub.mean_axis(Axis(0)).expect("non-empty");
        total += sub.outer_iter().map(|r| sq_dist(r, mean.view())).sum::<f64>();
    }
    total
}
