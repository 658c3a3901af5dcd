use super::{check_points, sq_dist, ClusterError};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

pub const MAX_LLOYD_ITERATIONS: usize = 300;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct KMeansModel {
    pub k: usize,
    pub centers: Vec<Vec<f64>>,
    /// Sum of squared distances from points to their assigned centre.
    pub inertia: f64,
    pub seed: u64,
    pub iterations: usize,
}

impl KMeansModel {
    pub fn dim(&self) -> usize {
        self.centers.first().map_or(0, Vec::len)
    }

    pub fn assign(&self, point: &[f64]) -> Result<usize, ClusterError> {
        assign(self, point)
    }

    pub fn labels(&self, points: &[Vec<f64>]) -> Result<Vec<usize>, ClusterError> {
        points.iter().map(|p| assign(self, p)).collect()
    }
}

/// Nearest centre by Euclidean distance; ties go to the lower index.
pub fn assign(model: &KMeansModel, point: &[f64]) -> Result<usize, ClusterError> {
    if point.len() != model.dim() {
        return Err(ClusterError::DimensionMismatch {
            expected: model.dim(),
            found: point.len(),
        });
    }
    Ok(nearest(&model.centers, point).0)
}

fn nearest(centers: &[Vec<f64>], point: &[f64]) -> (usize, f64) {
    let mut best = (0, f64::INFINITY);
    for (i, c) in centers.iter().enumerate() {
        let d = sq_dist(c, point);
        if d < best.1 {
            best = (i, d);
        }
    }
    best
}

pub fn kmeans_fit(points: &[Vec<f64>], k: usize, seed: u64) -> Result<KMeansModel, ClusterError> {
    kmeans_fit_traced(points, k, seed).map(|(m, _)| m)
}

/// Like [`kmeans_fit`], also returning the inertia measured after each
/// assignment step.
pub fn kmeans_fit_traced(
    points: &[Vec<f64>],
    k: usize,
    seed: u64,
) -> Result<(KMeansModel, Vec<f64>), ClusterError> {
    if k == 0 || points.len() < k {
        return Err(ClusterError::TooFewPoints {
            needed: k.max(1),
            found: points.len(),
        });
    }
    let dim = check_points(points)?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut centers = plus_plus_seeds(points, k, &mut rng);

    let n = points.len();
    let mut labels = vec![usize::MAX; n];
    let mut trace = Vec::new();
    let mut iterations = 0;

    loop {
        let mut next = vec![0usize; n];
        let mut inertia = 0.0;
        let mut dists = vec![0.0; n];
        for (i, p) in points.iter().enumerate() {
            let (l, d) = nearest(&centers, p);
            next[i] = l;
            dists[i] = d;
            inertia += d;
        }

        // empty clusters take the point farthest from its own centre
        let mut counts = vec![0usize; k];
        for &l in &next {
            counts[l] += 1;
        }
        for c in 0..k {
            if counts[c] > 0 {
                continue;
            }
            let far = (0..n)
                .filter(|&i| counts[next[i]] > 1)
                .max_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(b.cmp(&a)));
            let Some(far) = far else { break };
            counts[next[far]] -= 1;
            counts[c] = 1;
            next[far] = c;
            centers[c] = points[far].clone();
            inertia -= dists[far];
            dists[far] = 0.0;
        }
        trace.push(inertia);
        let changed = next != labels;
        labels = next;

        if !changed || iterations >= MAX_LLOYD_ITERATIONS {
            break;
        }
        iterations += 1;

        let mut sums = vec![vec![0.0; dim]; k];
        for (p, &l) in points.iter().zip(&labels) {
            for (s, v) in sums[l].iter_mut().zip(p) {
                *s += v;
            }
        }
        for (c, (sum, &cnt)) in centers.iter_mut().zip(sums.iter().zip(&counts)) {
            if cnt > 0 {
                *c = sum.iter().map(|s| s / cnt as f64).collect();
            }
        }
    }

    let inertia = points
        .iter()
        .zip(&labels)
        .map(|(p, &l)| sq_dist(p, &centers[l]))
        .sum();
    Ok((
        KMeansModel {
            k,
            centers,
            inertia,
            seed,
            iterations,
        },
        trace,
    ))
}

/// Draws an index with probability proportional to `weights`.
fn sample_weighted(weights: &[f64], total: f64, rng: &mut ChaCha8Rng) -> usize {
    let n = weights.len();
    if !(total > 0.0) {
        return rng.random_range(0..n);
    }
    let mut target = rng.random::<f64>() * total;
    let mut pick = n - 1;
    for (i, &w) in weights.iter().enumerate() {
        if w > 0.0 && target < w {
            pick = i;
            break;
        }
        target -= w;
    }
    // guard against rounding walking past the last positive weight
    if weights[pick] == 0.0 {
        pick = weights.iter().rposition(|&w| w > 0.0).unwrap_or(pick);
    }
    pick
}

/// Greedy K-Means++ seeding: first centre uniform; each later centre is the
/// best of `2 + ln k` candidates drawn proportionally to squared distance
/// from the nearest chosen centre, scored by the resulting potential.
fn plus_plus_seeds(points: &[Vec<f64>], k: usize, rng: &mut ChaCha8Rng) -> Vec<Vec<f64>> {
    let n = points.len();
    let trials = 2 + (k as f64).ln().floor() as usize;
    let first = rng.random_range(0..n);
    let mut centers = vec![points[first].clone()];
    let mut d2: Vec<f64> = points.iter().map(|p| sq_dist(p, &centers[0])).collect();
    while centers.len() < k {
        let total: f64 = d2.iter().sum();
        let mut best: Option<(f64, usize, Vec<f64>)> = None;
        for _ in 0..trials {
            let idx = sample_weighted(&d2, total, rng);
            let cand: Vec<f64> = points
                .iter()
                .zip(&d2)
                .map(|(p, &w)| w.min(sq_dist(p, &points[idx])))
                .collect();
            let potential: f64 = cand.iter().sum();
            if best.as_ref().is_none_or(|(b, _, _)| potential < *b) {
                best = Some((potential, idx, cand));
            }
        }
        let (_, idx, cand) = best.expect("at least one trial");
        centers.push(points[idx].clone());
        d2 = cand;
    }
    centers
}
