//! Training objectives: supervised cross-entropy, instance-level and
//! category-level contrastive losses, pseudo-label selection, the
//! calibrated (pseudo-label-aware) embedding loss, pseudo supervision,
//! and their unsupervised/semi-supervised sums.
//!
//! Every loss is built from recorded tensor primitives plus constant masks,
//! so gradients flow through the same graph machinery as the model layers.
//! Probabilities are floored at 1e-12 before any logarithm.

use serde::{Deserialize, Serialize};

use crate::autodiff::ops;
use crate::autodiff::Tensor;
use crate::error::{Error, Result};

pub const PROB_FLOOR: f64 = 1e-12;

/// Temperatures and the pseudo-label confidence threshold.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct ContrastConfig {
    /// Contrastive temperature for both instance and category contrasting.
    pub tau: f64,
    /// Temperature of the calibrated embedding loss (defaults to `tau`).
    pub tau_e: f64,
    /// Confidence threshold for accepting a pseudo-label.
    pub epsilon: f64,
}

impl Default for ContrastConfig {
    fn default() -> Self {
        ContrastConfig { tau: 0.2, tau_e: 0.2, epsilon: 0.2 }
    }
}

impl ContrastConfig {
    pub fn validate(&self) -> Result<()> {
        if self.tau <= 0.0 || self.tau_e <= 0.0 {
            return Err(Error::config("temperatures must be positive"));
        }
        if !(self.epsilon > 0.0 && self.epsilon <= 1.0) {
            return Err(Error::config("epsilon must be in (0, 1]"));
        }
        Ok(())
    }
}

/// Per-sample pseudo-label assignments from weak-view predictions.
///
/// A class index is present exactly when the row's max probability reached
/// the threshold; confidences are recorded for every sample.
#[derive(Debug, Clone, PartialEq)]
pub struct PseudoLabels {
    labels: Vec<Option<usize>>,
    confidences: Vec<f64>,
}

impl PseudoLabels {
    /// All-absent assignment (used by tests and the degenerate path).
    pub fn all_absent(batch: usize) -> Self {
        PseudoLabels { labels: vec![None; batch], confidences: vec![0.0; batch] }
    }

    pub fn label(&self, i: usize) -> Option<usize> {
        self.labels[i]
    }

    pub fn confidence(&self, i: usize) -> f64 {
        self.confidences[i]
    }

    pub fn len(&self) -> usize {
        self.labels.len()
    }

    pub fn is_empty(&self) -> bool {
        self.labels.is_empty()
    }

    /// M: how many samples carry a pseudo-label.
    pub fn confident_count(&self) -> usize {
        self.labels.iter().filter(|l| l.is_some()).count()
    }
}

/// Plain cosine similarity between two vectors.
pub fn cosine_similarity(u: &[f64], v: &[f64]) -> Result<f64> {
    if u.len() != v.len() {
        return Err(Error::shape("cosine_similarity: length mismatch"));
    }
    let dot: f64 = u.iter().zip(v).map(|(a, b)| a * b).sum();
    let nu: f64 = u.iter().map(|a| a * a).sum::<f64>().sqrt();
    let nv: f64 = v.iter().map(|a| a * a).sum::<f64>().sqrt();
    if nu == 0.0 || nv == 0.0 {
        return Err(Error::data("cosine_similarity: zero vector"));
    }
    Ok(dot / (nu * nv))
}

/// Mean cross-entropy between integer labels and predicted probability rows.
pub fn supervised_loss(predictions: &Tensor, labels: &[usize]) -> Result<Tensor> {
    let shape = predictions.shape();
    assert_eq!(shape.len(), 2, "supervised_loss expects [B, C]");
    let (b, c) = (shape[0], shape[1]);
    if labels.len() != b {
        return Err(Error::shape(format!("{} labels for batch of {b}", labels.len())));
    }
    if let Some(&bad) = labels.iter().find(|&&l| l >= c) {
        return Err(Error::data(format!("label {bad} out of range for {c} classes")));
    }
    let mut mask = vec![0.0; b * c];
    for (i, &l) in labels.iter().enumerate() {
        mask[i * c + l] = 1.0;
    }
    let lnp = ops::ln(&ops::clamp_min(predictions, PROB_FLOOR));
    Ok(ops::scale(&ops::sum_all(&ops::mul_mask(&lnp, &mask)), -1.0 / b as f64))
}

/// Shared machinery: anchors-by-rows NT-Xent terms.
///
/// `rows` is [A, D]; anchor `a`'s positive is row `partner(a)`; the
/// denominator sums over every other row. Returns the per-anchor term
/// vector `ln(den) - ln(num)` of length A.
fn nt_xent_terms(rows: &Tensor, tau: f64) -> Tensor {
    let a = rows.shape()[0];
    let half = a / 2;
    let normalized = ops::l2_normalize_rows(rows);
    let sims = ops::scale(&ops::matmul(&normalized, &ops::transpose(&normalized)), 1.0 / tau);
    let exps = ops::exp(&sims);
    let mut pos = vec![0.0; a * a];
    let mut off_diag = vec![1.0; a * a];
    for i in 0..a {
        off_diag[i * a + i] = 0.0;
        let partner = (i + half) % a;
        pos[i * a + partner] = 1.0;
    }
    let num = ops::sum_axis1(&ops::mul_mask(&exps, &pos));
    let den = ops::sum_axis1(&ops::mul_mask(&exps, &off_diag));
    ops::sub(&ops::ln(&den), &ops::ln(&num))
}

/// Instance-level contrastive loss over the two view batches [B, E].
///
/// Each of the 2B embeddings anchors one term: the positive is the other
/// view of the same sample, the denominator runs over the other 2B-1
/// embeddings from both views. Returns the mean term.
pub fn nt_xent_instance(zs: &Tensor, zw: &Tensor, tau: f64) -> Result<Tensor> {
    let b = check_view_pair(zs, zw)?;
    if b < 2 {
        return Err(Error::data("nt_xent_instance: no negatives available (batch < 2)"));
    }
    let all = ops::concat_rows(zs, zw);
    Ok(ops::mean_all(&nt_xent_terms(&all, tau)))
}

fn check_view_pair(a: &Tensor, b: &Tensor) -> Result<usize> {
    let (sa, sb) = (a.shape(), b.shape());
    if sa.len() != 2 || sb.len() != 2 || sa != sb {
        return Err(Error::shape(format!("view batches must share [B, D]: {sa:?} vs {sb:?}")));
    }
    Ok(sa[0])
}

/// Entropy of the per-class column-mass distribution of one probability
/// matrix [B, C]: eta(Y) = -sum_i p_i ln p_i with p_i = colmass_i / B.
fn class_mass_entropy(y: &Tensor) -> Tensor {
    let b = y.shape()[0];
    let p = ops::scale(&ops::sum_axis0(y), 1.0 / b as f64);
    let plogp = ops::mul(&p, &ops::ln(&ops::clamp_min(&p, PROB_FLOOR)));
    ops::scale(&ops::sum_all(&plogp), -1.0)
}

/// Category-level contrastive loss over the probability matrices [B, C].
///
/// Anchors are the 2C class columns; the positive is the same column of the
/// other view; the denominator runs over the other 2C-1 columns from both
/// views. The class-mass entropy of each view is subtracted to penalize
/// mode collapse.
pub fn category_contrast(ys: &Tensor, yw: &Tensor, tau: f64) -> Result<Tensor> {
    let _b = check_view_pair(ys, yw)?;
    let c = ys.shape()[1];
    if c < 2 {
        return Err(Error::data("category_contrast: needs at least 2 classes"));
    }
    let cols = ops::concat_rows(&ops::transpose(ys), &ops::transpose(yw));
    let contrast = ops::mean_all(&nt_xent_terms(&cols, tau));
    let eta_s = class_mass_entropy(ys);
    let eta_w = class_mass_entropy(yw);
    Ok(ops::sub(&ops::sub(&contrast, &eta_s), &eta_w))
}

/// Pseudo-labels from weak-view probability rows: argmax where the max
/// probability clears `epsilon`. Reads values only, so no gradient flows.
pub fn select_pseudo_labels(yw: &Tensor, epsilon: f64) -> PseudoLabels {
    let shape = yw.shape();
    assert_eq!(shape.len(), 2, "select_pseudo_labels expects [B, C]");
    let (b, c) = (shape[0], shape[1]);
    let mut labels = Vec::with_capacity(b);
    let mut confidences = Vec::with_capacity(b);
    yw.with_values(|v| {
        for i in 0..b {
            let row = &v[i * c..(i + 1) * c];
            let mut best = (0usize, row[0]);
            for (j, &p) in row.iter().enumerate().skip(1) {
                if p > best.1 {
                    best = (j, p);
                }
            }
            confidences.push(best.1);
            labels.push(if best.1 >= epsilon { Some(best.0) } else { None });
        }
    });
    PseudoLabels { labels, confidences }
}

/// The calibrated embedding loss and its diagnostics.
pub struct CalibratedLoss {
    pub loss: Tensor,
    /// Anchors that contributed a term (confident anchors with a non-empty
    /// negative set, plus all instance-fallback anchors).
    pub contributing_anchors: usize,
    /// Confident anchors skipped because every other sample shared their
    /// pseudo-label (empty denominator).
    pub skipped_anchors: usize,
}

/// Pseudo-label-aware contrastive loss over the two view batches [B, E].
///
/// Confident anchors pull together every embedding sharing their
/// pseudo-label (numerator) and push against embeddings with a different
/// label or no label (denominator); anchors with an empty denominator are
/// skipped. Unconfident anchors fall back to the instance-level term. The
/// loss is the mean over contributing anchors, or 0 if none contribute.
pub fn calibrated_embedding_loss(
    zs: &Tensor,
    zw: &Tensor,
    pseudo: &PseudoLabels,
    tau_e: f64,
) -> Result<CalibratedLoss> {
    let b = check_view_pair(zs, zw)?;
    if b < 2 {
        return Err(Error::data("calibrated_embedding_loss: no negatives available (batch < 2)"));
    }
    if pseudo.len() != b {
        return Err(Error::shape(format!(
            "pseudo labels cover {} samples, batch is {b}",
            pseudo.len()
        )));
    }
    let a = 2 * b;
    let sample = |row: usize| row % b;

    let mut num_mask = vec![0.0; a * a];
    let mut den_mask = vec![0.0; a * a];
    let mut anchor_mask = vec![0.0; a];
    let mut skipped = 0usize;

    for anchor in 0..a {
        let ai = sample(anchor);
        match pseudo.label(ai) {
            Some(lab) => {
                let mut has_negative = false;
                for j in 0..a {
                    let ji = sample(j);
                    match pseudo.label(ji) {
                        Some(l) if l == lab => {
                            if j != anchor {
                                num_mask[anchor * a + j] = 1.0;
                            }
                        }
                        _ => {
                            den_mask[anchor * a + j] = 1.0;
                            has_negative = true;
                        }
                    }
                }
                if has_negative {
                    anchor_mask[anchor] = 1.0;
                } else {
                    // Keep the row's logs finite; the anchor mask zeroes the
                    // term and its gradient.
                    den_mask[anchor * a..(anchor + 1) * a].fill(0.0);
                    den_mask[anchor * a + anchor] = 1.0;
                    num_mask[anchor * a..(anchor + 1) * a].fill(0.0);
                    num_mask[anchor * a + anchor] = 1.0;
                    skipped += 1;
                }
            }
            None => {
                // Instance-level fallback: positive is the counterpart view,
                // negatives are everything else.
                let partner = (anchor + b) % a;
                num_mask[anchor * a + partner] = 1.0;
                for j in 0..a {
                    if j != anchor {
                        den_mask[anchor * a + j] = 1.0;
                    }
                }
                anchor_mask[anchor] = 1.0;
            }
        }
    }

    let contributing = anchor_mask.iter().filter(|&&m| m > 0.0).count();
    if contributing == 0 {
        log::debug!("calibrated embedding loss: no negatives for any anchor, loss is 0");
        return Ok(CalibratedLoss {
            loss: Tensor::scalar(0.0),
            contributing_anchors: 0,
            skipped_anchors: skipped,
        });
    }

    let all = ops::concat_rows(zs, zw);
    let normalized = ops::l2_normalize_rows(&all);
    let sims = ops::scale(&ops::matmul(&normalized, &ops::transpose(&normalized)), 1.0 / tau_e);
    let exps = ops::exp(&sims);
    let num = ops::sum_axis1(&ops::mul_mask(&exps, &num_mask));
    let den = ops::sum_axis1(&ops::mul_mask(&exps, &den_mask));
    let terms = ops::sub(&ops::ln(&den), &ops::ln(&num));
    let masked = ops::mul_mask(&terms, &anchor_mask);
    let loss = ops::scale(&ops::sum_all(&masked), 1.0 / contributing as f64);
    Ok(CalibratedLoss { loss, contributing_anchors: contributing, skipped_anchors: skipped })
}

/// Mean cross-entropy between detached pseudo-labels and the strong-view
/// probability rows, over the M confident samples; 0 when M = 0.
pub fn pseudo_supervision_loss(ys_pred: &Tensor, pseudo: &PseudoLabels) -> Tensor {
    let shape = ys_pred.shape();
    assert_eq!(shape.len(), 2, "pseudo_supervision_loss expects [B, C]");
    let (b, c) = (shape[0], shape[1]);
    assert_eq!(pseudo.len(), b, "pseudo labels cover the batch");
    let m = pseudo.confident_count();
    if m == 0 {
        return Tensor::scalar(0.0);
    }
    let mut mask = vec![0.0; b * c];
    for i in 0..b {
        if let Some(l) = pseudo.label(i) {
            mask[i * c + l] = 1.0;
        }
    }
    let lnp = ops::ln(&ops::clamp_min(ys_pred, PROB_FLOOR));
    ops::scale(&ops::sum_all(&ops::mul_mask(&lnp, &mask)), -1.0 / m as f64)
}

/// The unsupervised objective and its reported components.
pub struct UnsupervisedLoss {
    pub total: Tensor,
    pub l_cat: Tensor,
    pub l_emb: Tensor,
    pub l_pse: Tensor,
    pub m_confident: usize,
    pub skipped_anchors: usize,
}

/// L_cat + L'_emb + L_pse from the two views' embeddings and predictions.
pub fn unsupervised_objective(
    zs: &Tensor,
    zw: &Tensor,
    ys: &Tensor,
    yw: &Tensor,
    cfg: &ContrastConfig,
) -> Result<UnsupervisedLoss> {
    let l_cat = category_contrast(ys, yw, cfg.tau)?;
    let pseudo = select_pseudo_labels(yw, cfg.epsilon);
    let calibrated = calibrated_embedding_loss(zs, zw, &pseudo, cfg.tau_e)?;
    let l_pse = pseudo_supervision_loss(ys, &pseudo);
    let total = ops::add(&ops::add(&l_cat, &calibrated.loss), &l_pse);
    Ok(UnsupervisedLoss {
        total,
        l_cat,
        l_emb: calibrated.loss,
        l_pse,
        m_confident: pseudo.confident_count(),
        skipped_anchors: calibrated.skipped_anchors,
    })
}

/// L_semi = L_sup + L_uns (unweighted).
pub fn semi_objective(l_sup: &Tensor, l_uns: &Tensor) -> Tensor {
    ops::add(l_sup, l_uns)
}
