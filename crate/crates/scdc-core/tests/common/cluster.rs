//! Raw-space reference baselines: k-means (Lloyd with k-means++ seeding,
//! multiple restarts) and the nearest-centroid rule.

use rand::Rng;
use scdc_core::rng::RngState;

fn sq_dist(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn assign(points: &[Vec<f64>], centroids: &[Vec<f64>]) -> (Vec<usize>, f64) {
    let mut ids = Vec::with_capacity(points.len());
    let mut inertia = 0.0;
    for p in points {
        let mut best = (0usize, f64::INFINITY);
        for (k, c) in centroids.iter().enumerate() {
            let d = sq_dist(p, c);
            if d < best.1 {
                best = (k, d);
            }
        }
        ids.push(best.0);
        inertia += best.1;
    }
    (ids, inertia)
}

fn kmeans_once(points: &[Vec<f64>], k: usize, rng: &mut scdc_core::rng::Stream) -> (Vec<usize>, f64) {
    // k-means++ seeding.
    let mut centroids: Vec<Vec<f64>> = Vec::with_capacity(k);
    centroids.push(points[rng.gen_range(0..points.len())].clone());
    while centroids.len() < k {
        let d2: Vec<f64> = points
            .iter()
            .map(|p| centroids.iter().map(|c| sq_dist(p, c)).fold(f64::INFINITY, f64::min))
            .collect();
        let total: f64 = d2.iter().sum();
        let mut target = rng.gen_range(0.0..total.max(1e-30));
        let mut chosen = points.len() - 1;
        for (i, &d) in d2.iter().enumerate() {
            target -= d;
            if target <= 0.0 {
                chosen = i;
                break;
            }
        }
        centroids.push(points[chosen].clone());
    }

    let dim = points[0].len();
    let mut ids = vec![0usize; points.len()];
    for _ in 0..100 {
        let (new_ids, _) = assign(points, &centroids);
        if new_ids == ids {
            break;
        }
        ids = new_ids;
        let mut sums = vec![vec![0.0; dim]; k];
        let mut counts = vec![0usize; k];
        for (p, &c) in points.iter().zip(&ids) {
            counts[c] += 1;
            for (s, &v) in sums[c].iter_mut().zip(p) {
                *s += v;
            }
        }
        for c in 0..k {
            if counts[c] > 0 {
                for v in sums[c].iter_mut() {
                    *v /= counts[c] as f64;
                }
                centroids[c] = sums[c].clone();
            }
        }
    }
    let (ids, inertia) = assign(points, &centroids);
    (ids, inertia)
}

/// Deterministic k-means: best of `restarts` k-means++ runs by inertia.
pub fn kmeans(points: &[Vec<f64>], k: usize, rng: &RngState, restarts: usize) -> Vec<usize> {
    let mut best: Option<(Vec<usize>, f64)> = None;
    for r in 0..restarts {
        let mut stream = rng.stream("kmeans", r as u64);
        let (ids, inertia) = kmeans_once(points, k, &mut stream);
        if best.as_ref().map_or(true, |(_, bi)| inertia < *bi) {
            best = Some((ids, inertia));
        }
    }
    best.unwrap().0
}

/// Class centroids from labeled training rows.
pub fn centroids(rows: &[Vec<f64>], labels: &[usize], classes: usize) -> Vec<Vec<f64>> {
    let dim = rows[0].len();
    let mut sums = vec![vec![0.0; dim]; classes];
    let mut counts = vec![0usize; classes];
    for (r, &l) in rows.iter().zip(labels) {
        counts[l] += 1;
        for (s, &v) in sums[l].iter_mut().zip(r) {
            *s += v;
        }
    }
    for c in 0..classes {
        for v in sums[c].iter_mut() {
            *v /= counts[c].max(1) as f64;
        }
    }
    sums
}

/// Nearest-centroid accuracy of `eval_rows` against train-set centroids.
pub fn nearest_centroid_accuracy(
    train_rows: &[Vec<f64>],
    train_labels: &[usize],
    eval_rows: &[Vec<f64>],
    eval_labels: &[usize],
    classes: usize,
) -> f64 {
    let cents = centroids(train_rows, train_labels, classes);
    let (preds, _) = assign(eval_rows, &cents);
    let correct = preds.iter().zip(eval_labels).filter(|(p, l)| p == l).count();
    correct as f64 / eval_rows.len() as f64
}
