//! Brute-force oracles for the evaluation metrics.

use std::collections::BTreeMap;

/// Minimum assignment cost by enumerating all permutations (K <= ~8).
pub fn exhaustive_min_assignment(cost: &[Vec<f64>]) -> f64 {
    let n = cost.len();
    let mut cols: Vec<usize> = (0..n).collect();
    let mut best = f64::INFINITY;
    permute(&mut cols, 0, &mut |perm| {
        let total: f64 = perm.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
        if total < best {
            best = total;
        }
    });
    best
}

/// Best matched fraction over all cluster-to-class permutations.
pub fn exhaustive_clustering_accuracy(truth: &[usize], ids: &[usize]) -> f64 {
    let remap = |v: &[usize]| -> (Vec<usize>, usize) {
        let mut seen: BTreeMap<usize, usize> = BTreeMap::new();
        let mapped = v
            .iter()
            .map(|x| {
                let next = seen.len();
                *seen.entry(*x).or_insert(next)
            })
            .collect::<Vec<_>>();
        (mapped, seen.len())
    };
    let (t, nt) = remap(truth);
    let (k, nk) = remap(ids);
    let size = nt.max(nk);
    let mut table = vec![vec![0usize; size]; size];
    for (&ti, &ki) in t.iter().zip(&k) {
        table[ti][ki] += 1;
    }
    // Assign each cluster column to a class row; maximize matches.
    let mut rows: Vec<usize> = (0..size).collect();
    let mut best = 0usize;
    permute(&mut rows, 0, &mut |perm| {
        let matched: usize = perm.iter().enumerate().map(|(col, &row)| table[row][col]).sum();
        if matched > best {
            best = matched;
        }
    });
    best as f64 / truth.len() as f64
}

fn permute(items: &mut [usize], k: usize, visit: &mut impl FnMut(&[usize])) {
    if k == items.len() {
        visit(items);
        return;
    }
    for i in k..items.len() {
        items.swap(k, i);
        permute(items, k + 1, visit);
        items.swap(k, i);
    }
}

/// Fowlkes-Mallows via explicit O(n^2) pair enumeration.
pub fn pairwise_fmi(truth: &[usize], ids: &[usize]) -> f64 {
    let n = truth.len();
    let (mut tp, mut fp, mut fn_) = (0f64, 0f64, 0f64);
    for i in 0..n {
        for j in i + 1..n {
            let same_true = truth[i] == truth[j];
            let same_pred = ids[i] == ids[j];
            match (same_true, same_pred) {
                (true, true) => tp += 1.0,
                (false, true) => fp += 1.0,
                (true, false) => fn_ += 1.0,
                _ => {}
            }
        }
    }
    if tp + fp == 0.0 || tp + fn_ == 0.0 {
        return 0.0;
    }
    tp / ((tp + fp) * (tp + fn_)).sqrt()
}

/// Binary one-vs-rest AUROC by counting concordant and tied pairs.
pub fn pairwise_auroc(labels: &[usize], scores: &[f64], class: usize) -> Option<f64> {
    let pos: Vec<f64> = labels
        .iter()
        .zip(scores)
        .filter(|(&l, _)| l == class)
        .map(|(_, &s)| s)
        .collect();
    let neg: Vec<f64> = labels
        .iter()
        .zip(scores)
        .filter(|(&l, _)| l != class)
        .map(|(_, &s)| s)
        .collect();
    if pos.is_empty() || neg.is_empty() {
        return None;
    }
    let mut total = 0.0;
    for &p in &pos {
        for &q in &neg {
            total += match p.partial_cmp(&q).unwrap() {
                std::cmp::Ordering::Greater => 1.0,
                std::cmp::Ordering::Equal => 0.5,
                std::cmp::Ordering::Less => 0.0,
            };
        }
    }
    Some(total / (pos.len() * neg.len()) as f64)
}

/// NMI straight from the contingency-table formula with arithmetic-mean
/// normalization.
pub fn direct_nmi(truth: &[usize], ids: &[usize]) -> f64 {
    let n = truth.len() as f64;
    let mut joint: BTreeMap<(usize, usize), f64> = BTreeMap::new();
    let mut pt: BTreeMap<usize, f64> = BTreeMap::new();
    let mut pk: BTreeMap<usize, f64> = BTreeMap::new();
    for (&t, &k) in truth.iter().zip(ids) {
        *joint.entry((t, k)).or_insert(0.0) += 1.0;
        *pt.entry(t).or_insert(0.0) += 1.0;
        *pk.entry(k).or_insert(0.0) += 1.0;
    }
    let h = |m: &BTreeMap<usize, f64>| -> f64 {
        m.values().map(|&c| -(c / n) * (c / n).ln()).sum()
    };
    let mut mi = 0.0;
    for (&(t, k), &c) in &joint {
        let pij = c / n;
        mi += pij * (pij / ((pt[&t] / n) * (pk[&k] / n))).ln();
    }
    let denom = 0.5 * (h(&pt) + h(&pk));
    if denom <= 0.0 {
        0.0
    } else {
        (mi / denom).clamp(0.0, 1.0)
    }
}
