//! Clustering metrics (NMI, clustering accuracy, Fowlkes-Mallows) and
//! classification metrics (accuracy, macro-F1, macro-AUROC).
//!
//! Degenerate cases follow fixed conventions so report files are stable:
//! any 0/0 ratio is reported as 0.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Rows are true classes, columns are predictions.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ConfusionMatrix {
    counts: Vec<Vec<usize>>,
}

impl ConfusionMatrix {
    pub fn from_pairs(true_labels: &[usize], predicted: &[usize], classes: usize) -> Result<Self> {
        if true_labels.len() != predicted.len() {
            return Err(Error::shape("label/prediction length mismatch"));
        }
        let mut counts = vec![vec![0usize; classes]; classes];
        for (&t, &p) in true_labels.iter().zip(predicted) {
            if t >= classes || p >= classes {
                return Err(Error::data(format!(
                    "label pair ({t}, {p}) out of range for {classes} classes"
                )));
            }
            counts[t][p] += 1;
        }
        Ok(ConfusionMatrix { counts })
    }

    pub fn classes(&self) -> usize {
        self.counts.len()
    }

    pub fn count(&self, true_class: usize, predicted: usize) -> usize {
        self.counts[true_class][predicted]
    }

    pub fn total(&self) -> usize {
        self.counts.iter().map(|r| r.iter().sum::<usize>()).sum()
    }
}

/// trace / total; 0 for an empty matrix.
pub fn accuracy(confusion: &ConfusionMatrix) -> f64 {
    let total = confusion.total();
    if total == 0 {
        return 0.0;
    }
    let trace: usize = (0..confusion.classes()).map(|i| confusion.count(i, i)).sum();
    trace as f64 / total as f64
}

/// Unweighted mean of per-class F1; a class with no predictions and no
/// positives counts as 0.
pub fn macro_f1(confusion: &ConfusionMatrix) -> f64 {
    let c = confusion.classes();
    if c == 0 {
        return 0.0;
    }
    let mut sum = 0.0;
    for k in 0..c {
        sum += per_class_prf(confusion, k).2;
    }
    sum / c as f64
}

/// (precision, recall, f1) for one class, 0 conventions on empty slices.
pub fn per_class_prf(confusion: &ConfusionMatrix, class: usize) -> (f64, f64, f64) {
    let c = confusion.classes();
    let tp = confusion.count(class, class);
    let pred: usize = (0..c).map(|i| confusion.count(i, class)).sum();
    let actual: usize = (0..c).map(|j| confusion.count(class, j)).sum();
    let precision = if pred == 0 { 0.0 } else { tp as f64 / pred as f64 };
    let recall = if actual == 0 { 0.0 } else { tp as f64 / actual as f64 };
    let f1 =
        if precision + recall == 0.0 { 0.0 } else { 2.0 * precision * recall / (precision + recall) };
    (precision, recall, f1)
}

/// Minimum-cost assignment on a square matrix (Kuhn-Munkres with
/// potentials, O(n^3)). Returns the column assigned to each row and the
/// total cost.
pub fn hungarian_match(cost: &[Vec<f64>]) -> Result<(Vec<usize>, f64)> {
    let n = cost.len();
    if n == 0 {
        return Err(Error::data("hungarian_match: empty matrix"));
    }
    for row in cost {
        if row.len() != n {
            return Err(Error::shape("hungarian_match: matrix not square"));
        }
        if row.iter().any(|v| !v.is_finite()) {
            return Err(Error::data("hungarian_match: non-finite cost"));
        }
    }

    // 1-based with a sentinel column 0.
    let mut u = vec![0.0f64; n + 1];
    let mut v = vec![0.0f64; n + 1];
    let mut matched_row = vec![0usize; n + 1]; // matched_row[j]: row using column j
    let mut way = vec![0usize; n + 1];
    for i in 1..=n {
        matched_row[0] = i;
        let mut j0 = 0usize;
        let mut minv = vec![f64::INFINITY; n + 1];
        let mut used = vec![false; n + 1];
        loop {
            used[j0] = true;
            let i0 = matched_row[j0];
            let mut delta = f64::INFINITY;
            let mut j1 = 0usize;
            for j in 1..=n {
                if !used[j] {
                    let cur = cost[i0 - 1][j - 1] - u[i0] - v[j];
                    if cur < minv[j] {
                        minv[j] = cur;
                        way[j] = j0;
                    }
                    if minv[j] < delta {
                        delta = minv[j];
                        j1 = j;
                    }
                }
            }
            for j in 0..=n {
                if used[j] {
                    u[matched_row[j]] += delta;
                    v[j] -= delta;
                } else {
                    minv[j] -= delta;
                }
            }
            j0 = j1;
            if matched_row[j0] == 0 {
                break;
            }
        }
        loop {
            let j1 = way[j0];
            matched_row[j0] = matched_row[j1];
            j0 = j1;
            if j0 == 0 {
                break;
            }
        }
    }

    let mut assignment = vec![0usize; n];
    for j in 1..=n {
        assignment[matched_row[j] - 1] = j - 1;
    }
    let total: f64 = assignment.iter().enumerate().map(|(i, &j)| cost[i][j]).sum();
    Ok((assignment, total))
}

fn index_map(values: &[usize]) -> (Vec<usize>, usize) {
    let mut distinct: Vec<usize> = values.to_vec();
    distinct.sort_unstable();
    distinct.dedup();
    let mapped = values
        .iter()
        .map(|v| distinct.binary_search(v).expect("value present"))
        .collect();
    (mapped, distinct.len())
}

fn contingency(true_labels: &[usize], cluster_ids: &[usize]) -> (Vec<Vec<usize>>, usize, usize) {
    let (t, nt) = index_map(true_labels);
    let (k, nk) = index_map(cluster_ids);
    let mut table = vec![vec![0usize; nk]; nt];
    for (&ti, &ki) in t.iter().zip(&k) {
        table[ti][ki] += 1;
    }
    (table, nt, nk)
}

/// Best matched fraction over cluster-to-class assignments (contingency
/// table negated and padded square for the Hungarian solver).
pub fn clustering_accuracy(true_labels: &[usize], cluster_ids: &[usize]) -> f64 {
    assert_eq!(true_labels.len(), cluster_ids.len());
    if true_labels.is_empty() {
        return 0.0;
    }
    let (table, nt, nk) = contingency(true_labels, cluster_ids);
    let k = nt.max(nk);
    let mut cost = vec![vec![0.0f64; k]; k];
    for (i, row) in table.iter().enumerate() {
        for (j, &n) in row.iter().enumerate() {
            cost[i][j] = -(n as f64);
        }
    }
    let (_, total) = hungarian_match(&cost).expect("square finite matrix");
    -total / true_labels.len() as f64
}

/// Normalized mutual information with arithmetic-mean normalization and
/// natural logs; 0 when either partition carries no information.
pub fn nmi(true_labels: &[usize], cluster_ids: &[usize]) -> f64 {
    assert_eq!(true_labels.len(), cluster_ids.len());
    let n = true_labels.len();
    if n == 0 {
        return 0.0;
    }
    let (table, nt, nk) = contingency(true_labels, cluster_ids);
    let nf = n as f64;
    let row_sums: Vec<usize> = table.iter().map(|r| r.iter().sum()).collect();
    let col_sums: Vec<usize> = (0..nk).map(|j| table.iter().map(|r| r[j]).sum()).collect();

    let entropy = |sums: &[usize]| -> f64 {
        sums.iter()
            .filter(|&&s| s > 0)
            .map(|&s| {
                let p = s as f64 / nf;
                -p * p.ln()
            })
            .sum()
    };
    let h_t = entropy(&row_sums);
    let h_k = entropy(&col_sums);
    let mut mi = 0.0;
    for i in 0..nt {
        for j in 0..nk {
            let nij = table[i][j];
            if nij > 0 {
                let pij = nij as f64 / nf;
                mi += pij * (pij * nf * nf / (row_sums[i] as f64 * col_sums[j] as f64)).ln();
            }
        }
    }
    let denom = 0.5 * (h_t + h_k);
    if denom <= 0.0 {
        return 0.0;
    }
    (mi / denom).clamp(0.0, 1.0)
}

/// Fowlkes-Mallows index: TP / sqrt((TP+FP)(TP+FN)) over sample pairs;
/// 0 when either factor is 0.
pub fn fmi(true_labels: &[usize], cluster_ids: &[usize]) -> f64 {
    assert_eq!(true_labels.len(), cluster_ids.len());
    if true_labels.is_empty() {
        return 0.0;
    }
    let (table, nt, nk) = contingency(true_labels, cluster_ids);
    let choose2 = |x: usize| (x * x.saturating_sub(1) / 2) as f64;
    let tp: f64 = table.iter().flatten().map(|&nij| choose2(nij)).sum();
    let pred_pairs: f64 = (0..nk).map(|j| choose2(table.iter().map(|r| r[j]).sum())).sum();
    let true_pairs: f64 = (0..nt).map(|i| choose2(table[i].iter().sum())).sum();
    if pred_pairs == 0.0 || true_pairs == 0.0 {
        return 0.0;
    }
    tp / (pred_pairs * true_pairs).sqrt()
}

/// One-vs-rest AUROC per class via the midrank statistic, macro-averaged.
/// Classes absent from the labels (or covering every sample) are skipped
/// and reported in the second return value.
pub fn macro_auroc(true_labels: &[usize], probability_rows: &[Vec<f64>]) -> (f64, Vec<usize>) {
    assert_eq!(true_labels.len(), probability_rows.len());
    if probability_rows.is_empty() {
        return (0.0, Vec::new());
    }
    let classes = probability_rows[0].len();
    let mut aucs = Vec::new();
    let mut skipped = Vec::new();
    for c in 0..classes {
        let n_pos = true_labels.iter().filter(|&&t| t == c).count();
        let n_neg = true_labels.len() - n_pos;
        if n_pos == 0 || n_neg == 0 {
            skipped.push(c);
            continue;
        }
        aucs.push(binary_auroc_midrank(true_labels, probability_rows, c, n_pos, n_neg));
    }
    if aucs.is_empty() {
        return (0.0, skipped);
    }
    (aucs.iter().sum::<f64>() / aucs.len() as f64, skipped)
}

fn binary_auroc_midrank(
    labels: &[usize],
    rows: &[Vec<f64>],
    class: usize,
    n_pos: usize,
    n_neg: usize,
) -> f64 {
    let mut order: Vec<usize> = (0..labels.len()).collect();
    order.sort_by(|&a, &b| rows[a][class].partial_cmp(&rows[b][class]).unwrap());
    let mut ranks = vec![0.0f64; labels.len()];
    let mut i = 0;
    while i < order.len() {
        let mut j = i;
        while j + 1 < order.len() && rows[order[j + 1]][class] == rows[order[i]][class] {
            j += 1;
        }
        // Midrank over the tie group; ranks are 1-based.
        let midrank = (i + 1 + j + 1) as f64 / 2.0;
        for &ix in &order[i..=j] {
            ranks[ix] = midrank;
        }
        i = j + 1;
    }
    let rank_sum_pos: f64 = labels
        .iter()
        .zip(&ranks)
        .filter(|(&t, _)| t == class)
        .map(|(_, &r)| r)
        .sum();
    (rank_sum_pos - (n_pos * (n_pos + 1)) as f64 / 2.0) / (n_pos as f64 * n_neg as f64)
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClusteringReport {
    pub nmi: f64,
    pub cac: f64,
    pub fmi: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct PerClassMetrics {
    pub class: usize,
    pub precision: f64,
    pub recall: f64,
    pub f1: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct ClassificationReport {
    pub rac: f64,
    pub f1_macro: f64,
    pub auroc_macro: f64,
    pub per_class: Vec<PerClassMetrics>,
    /// Classes with no positives (or no negatives) in the test labels,
    /// excluded from the AUROC macro average.
    pub auroc_skipped_classes: Vec<usize>,
}

/// Builds the clustering report, treating predicted ids as cluster labels.
pub fn clustering_report(true_labels: &[usize], cluster_ids: &[usize]) -> ClusteringReport {
    ClusteringReport {
        nmi: nmi(true_labels, cluster_ids),
        cac: clustering_accuracy(true_labels, cluster_ids),
        fmi: fmi(true_labels, cluster_ids),
    }
}

/// Builds the classification report from labels, argmax predictions, and
/// the full probability rows.
pub fn classification_report(
    true_labels: &[usize],
    predicted: &[usize],
    probability_rows: &[Vec<f64>],
    classes: usize,
) -> Result<ClassificationReport> {
    let confusion = ConfusionMatrix::from_pairs(true_labels, predicted, classes)?;
    let (auroc_macro, auroc_skipped_classes) = macro_auroc(true_labels, probability_rows);
    let per_class = (0..classes)
        .map(|c| {
            let (precision, recall, f1) = per_class_prf(&confusion, c);
            PerClassMetrics { class: c, precision, recall, f1 }
        })
        .collect();
    Ok(ClassificationReport {
        rac: accuracy(&confusion),
        f1_macro: macro_f1(&confusion),
        auroc_macro,
        per_class,
        auroc_skipped_classes,
    })
}

/// Plain-text table, metrics as rows and datasets as columns.
pub fn render_table(columns: &[(String, Vec<(String, f64)>)]) -> String {
    let metric_names: Vec<String> = columns
        .first()
        .map(|(_, metrics)| metrics.iter().map(|(n, _)| n.clone()).collect())
        .unwrap_or_default();
    let mut out = String::new();
    out.push_str(&format!("{:<10}", "metric"));
    for (name, _) in columns {
        out.push_str(&format!(" {name:>12}"));
    }
    out.push('\n');
    for (i, metric) in metric_names.iter().enumerate() {
        out.push_str(&format!("{metric:<10}"));
        for (_, metrics) in columns {
            out.push_str(&format!(" {:>12.4}", metrics[i].1));
        }
        out.push('\n');
    }
    out
}
