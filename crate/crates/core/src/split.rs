//! Seeded train/test splits and cross-validation folds.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct Split {
    pub train: Vec<usize>,
    pub test: Vec<usize>,
}

/// Test-set size for a held-out fraction, rounded up.
pub fn test_count(n: usize, test_fraction: f64) -> usize {
    ((n as f64 * test_fraction).ceil() as usize).min(n)
}

/// Uniformly shuffled split; index lists are returned sorted.
pub fn random_split(n: usize, test_fraction: f64, seed: u64) -> Split {
    let mut idx: Vec<usize> = (0..n).collect();
    idx.shuffle(&mut ChaCha8Rng::seed_from_u64(seed));
    let n_test = test_count(n, test_fraction);
    let mut test = idx[..n_test].to_vec();
    let mut train = idx[n_test..].to_vec();
    test.sort_unstable();
    train.sort_unstable();
    Split { train, test }
}

/// Split preserving the class balance of `labels`. Per-class test counts are
/// floored, then the remainder goes to the classes with the largest
/// fractional parts (ties to the `false` class).
pub fn stratified_split(labels: &[bool], test_fraction: f64, seed: u64) -> Split {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let n_test = test_count(labels.len(), test_fraction);
    let mut classes: Vec<Vec<usize>> = [false, true]
        .iter()
        .map(|&c| (0..labels.len()).filter(|&i| labels[i] == c).collect())
        .collect();
    for c in classes.iter_mut() {
        c.shuffle(&mut rng);
    }
    let exact: Vec<f64> = classes
        .iter()
        .map(|c| c.len() as f64 * test_fraction)
        .collect();
    let mut take: Vec<usize> = exact.iter().map(|e| e.floor() as usize).collect();
    let mut order = [0usize, 1];
    order.sort_by(|&a, &b| {
        let fa = exact[a] - exact[a].floor();
        let fb = exact[b] - exact[b].floor();
        fb.total_cmp(&fa).then(a.cmp(&b))
    });
    let mut remaining = n_test.saturating_sub(take.iter().sum());
    for &c in order.iter().cycle().take(4) {
        if remaining == 0 {
            break;
        }
        if take[c] < classes[c].len() {
            take[c] += 1;
            remaining -= 1;
        }
    }
    let mut train = Vec::new();
    let mut test = Vec::new();
    for (c, members) in classes.iter().enumerate() {
        test.extend_from_slice(&members[..take[c]]);
        train.extend_from_slice(&members[take[c]..]);
    }
    test.sort_unstable();
    train.sort_unstable();
    Split { train, test }
}

/// Stratified k-fold assignment: returns the fold index of every sample.
/// Each class is shuffled and dealt round-robin across folds.
pub fn stratified_folds(labels: &[bool], k: usize, seed: u64) -> Vec<usize> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut fold = vec![0; labels.len()];
    let mut offset = 0;
    for c in [false, true] {
        let mut members: Vec<usize> = (0..labels.len()).filter(|&i| labels[i] == c).collect();
        members.shuffle(&mut rng);
        for (r, &i) in members.iter().enumerate() {
            fold[i] = (r + offset) % k;
        }
        offset += members.len();
    }
    fold
}
