//! Scalar-enumeration oracles for every training objective.
//!
//! Plain f64 loops over the loss definitions: anchors enumerated one by
//! one, similarities via a direct cosine, no tensors, no masks. These stay
//! deliberately naive so they share nothing with the graph implementation.

const FLOOR: f64 = 1e-12;

pub fn cosine(u: &[f64], v: &[f64]) -> f64 {
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    dot / (nu.max(1e-12) * nv.max(1e-12))
}

/// Mean over the 2B anchors of -log(exp(sim(anchor, partner)/tau) /
/// sum over the other 2B-1 embeddings of exp(sim/tau)).
pub fn nt_xent(zs: &[Vec<f64>], zw: &[Vec<f64>], tau: f64) -> f64 {
    let b = zs.len();
    let all: Vec<&[f64]> = zs.iter().chain(zw.iter()).map(|v| v.as_slice()).collect();
    let a = 2 * b;
    let mut total = 0.0;
    for i in 0..a {
        let partner = (i + b) % a;
        let num = (cosine(all[i], all[partner]) / tau).exp();
        let mut den = 0.0;
        for j in 0..a {
            if j != i {
                den += (cosine(all[i], all[j]) / tau).exp();
            }
        }
        total += -(num / den).ln();
    }
    total / a as f64
}

/// Entropy of the column-mass distribution of a probability matrix.
pub fn class_mass_entropy(y: &[Vec<f64>]) -> f64 {
    let b = y.len() as f64;
    let c = y[0].len();
    let mut eta = 0.0;
    for col in 0..c {
        let p: f64 = y.iter().map(|row| row[col]).sum::<f64>() / b;
        eta -= p * p.max(FLOOR).ln();
    }
    eta
}

/// Column-anchored NT-Xent over the 2C class columns, minus both views'
/// class-mass entropies.
pub fn category_contrast(ys: &[Vec<f64>], yw: &[Vec<f64>], tau: f64) -> f64 {
    let c = ys[0].len();
    let column = |m: &[Vec<f64>], j: usize| -> Vec<f64> { m.iter().map(|r| r[j]).collect() };
    let mut cols: Vec<Vec<f64>> = (0..c).map(|j| column(ys, j)).collect();
    cols.extend((0..c).map(|j| column(yw, j)));
    let a = 2 * c;
    let mut total = 0.0;
    for i in 0..a {
        let partner = (i + c) % a;
        let num = (cosine(&cols[i], &cols[partner]) / tau).exp();
        let mut den = 0.0;
        for j in 0..a {
            if j != i {
                den += (cosine(&cols[i], &cols[j]) / tau).exp();
            }
        }
        total += -(num / den).ln();
    }
    total / a as f64 - class_mass_entropy(ys) - class_mass_entropy(yw)
}

/// Pseudo-label selection: argmax where the row max clears epsilon.
pub fn select_labels(yw: &[Vec<f64>], epsilon: f64) -> Vec<Option<usize>> {
    yw.iter()
        .map(|row| {
            let mut best = (0usize, row[0]);
            for (j, &p) in row.iter().enumerate().skip(1) {
                if p > best.1 {
                    best = (j, p);
                }
            }
            (best.1 >= epsilon).then_some(best.0)
        })
        .collect()
}

/// Calibrated embedding loss: confident anchors pull same-label
/// embeddings (numerator) against different-label-or-unconfident ones
/// (denominator), skipping anchors with no negatives; unconfident anchors
/// use the instance term. Returns (loss, contributing anchors).
pub fn calibrated(
    zs: &[Vec<f64>],
    zw: &[Vec<f64>],
    labels: &[Option<usize>],
    tau_e: f64,
) -> (f64, usize) {
    let b = zs.len();
    let all: Vec<&[f64]> = zs.iter().chain(zw.iter()).map(|v| v.as_slice()).collect();
    let a = 2 * b;
    let mut total = 0.0;
    let mut contributing = 0usize;
    for i in 0..a {
        let li = labels[i % b];
        match li {
            Some(lab) => {
                let mut num = 0.0;
                let mut den = 0.0;
                let mut has_negative = false;
                for j in 0..a {
                    match labels[j % b] {
                        Some(l) if l == lab => {
                            if j != i {
                                num += (cosine(all[i], all[j]) / tau_e).exp();
                            }
                        }
                        _ => {
                            den += (cosine(all[i], all[j]) / tau_e).exp();
                            has_negative = true;
                        }
                    }
                }
                if has_negative {
                    total += -(num / den).ln();
                    contributing += 1;
                }
            }
            None => {
                let partner = (i + b) % a;
                let num = (cosine(all[i], all[partner]) / tau_e).exp();
                let mut den = 0.0;
                for j in 0..a {
                    if j != i {
                        den += (cosine(all[i], all[j]) / tau_e).exp();
                    }
                }
                total += -(num / den).ln();
                contributing += 1;
            }
        }
    }
    if contributing == 0 {
        (0.0, 0)
    } else {
        (total / contributing as f64, contributing)
    }
}

/// Mean cross-entropy of integer labels against probability rows.
pub fn supervised(pred: &[Vec<f64>], labels: &[usize]) -> f64 {
    let total: f64 = pred
        .iter()
        .zip(labels)
        .map(|(row, &l)| -row[l].max(FLOOR).ln())
        .sum();
    total / pred.len() as f64
}

/// Mean cross-entropy over the confident samples only; 0 when none.
pub fn pseudo_supervision(pred: &[Vec<f64>], labels: &[Option<usize>]) -> f64 {
    let confident: Vec<(usize, usize)> = labels
        .iter()
        .enumerate()
        .filter_map(|(i, l)| l.map(|l| (i, l)))
        .collect();
    if confident.is_empty() {
        return 0.0;
    }
    let total: f64 = confident.iter().map(|&(i, l)| -pred[i][l].max(FLOOR).ln()).sum();
    total / confident.len() as f64
}

/// L_uns = L_cat + L'_emb + L_pse from the same inputs the library gets.
pub fn unsupervised(
    zs: &[Vec<f64>],
    zw: &[Vec<f64>],
    ys: &[Vec<f64>],
    yw: &[Vec<f64>],
    tau: f64,
    tau_e: f64,
    epsilon: f64,
) -> f64 {
    let labels = select_labels(yw, epsilon);
    let (emb, _) = calibrated(zs, zw, &labels, tau_e);
    category_contrast(ys, yw, tau) + emb + pseudo_supervision(ys, &labels)
}
