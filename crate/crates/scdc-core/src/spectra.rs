//! Spectral data model, CSV ingestion, preprocessing, and annotation splits.
//!
//! A [`Spectrum`] is one intensity sequence over a strictly increasing
//! wavenumber axis. Datasets move through the pipeline as collections of
//! [`LabeledSpectrum`] and are partitioned into a [`SplitDataset`] holding
//! the annotated subset, the unannotated subset, and the test set.

use std::collections::BTreeSet;
use std::io::Read;
use std::path::Path;

use rand::seq::SliceRandom;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// One spectrum: intensities over a strictly increasing wavenumber axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Spectrum {
    pub id: String,
    pub axis: Vec<f64>,
    pub intensities: Vec<f64>,
}

impl Spectrum {
    /// Validates the type invariants on construction.
    pub fn new(id: impl Into<String>, axis: Vec<f64>, intensities: Vec<f64>) -> Result<Self> {
        let id = id.into();
        if axis.len() != intensities.len() {
            return Err(Error::data(format!(
                "spectrum {id}: axis length {} != intensity length {}",
                axis.len(),
                intensities.len()
            )));
        }
        if axis.len() < 2 {
            return Err(Error::data(format!("spectrum {id}: needs at least 2 points")));
        }
        if axis.windows(2).any(|w| w[1] <= w[0]) {
            return Err(Error::data(format!("spectrum {id}: axis not strictly increasing")));
        }
        if !intensities.iter().all(|v| v.is_finite()) {
            return Err(Error::data(format!("spectrum {id}: non-finite intensity")));
        }
        Ok(Spectrum { id, axis, intensities })
    }

    pub fn len(&self) -> usize {
        self.intensities.len()
    }

    pub fn is_empty(&self) -> bool {
        self.intensities.is_empty()
    }

    /// max(x) - min(x) over the intensities.
    pub fn intensity_range(&self) -> f64 {
        let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
        for &v in &self.intensities {
            lo = lo.min(v);
            hi = hi.max(v);
        }
        hi - lo
    }
}

/// A spectrum with its integer class label.
#[derive(Debug, Clone, PartialEq)]
pub struct LabeledSpectrum {
    pub spectrum: Spectrum,
    pub label: usize,
}

/// One CSV row: a spectrum plus an optional label.
#[derive(Debug, Clone)]
pub struct CsvRecord {
    pub spectrum: Spectrum,
    pub label: Option<usize>,
}

/// The annotated subset, unannotated subset, and test set of one experiment.
#[derive(Debug, Clone, Default)]
pub struct SplitDataset {
    pub annotated: Vec<LabeledSpectrum>,
    pub unannotated: Vec<Spectrum>,
    pub test: Vec<LabeledSpectrum>,
    pub class_count: usize,
    pub annotation_fraction: f64,
}

impl SplitDataset {
    /// Checks that the three parts are disjoint by id and that labels fit
    /// the declared class count.
    pub fn validate(&self) -> Result<()> {
        let mut seen = BTreeSet::new();
        let ids = self
            .annotated
            .iter()
            .map(|l| &l.spectrum.id)
            .chain(self.unannotated.iter().map(|s| &s.id))
            .chain(self.test.iter().map(|l| &l.spectrum.id));
        for id in ids {
            if !seen.insert(id.clone()) {
                return Err(Error::data(format!("duplicate id across splits: {id}")));
            }
        }
        for l in self.annotated.iter().chain(self.test.iter()) {
            if l.label >= self.class_count {
                return Err(Error::data(format!(
                    "label {} out of range for class count {}",
                    l.label, self.class_count
                )));
            }
        }
        Ok(())
    }
}

/// Preprocessing surface shared by the trainer and the CLI.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
#[serde(deny_unknown_fields, default)]
pub struct PreprocessConfig {
    pub target_length: usize,
    pub normalize: bool,
}

impl Default for PreprocessConfig {
    fn default() -> Self {
        PreprocessConfig { target_length: 1024, normalize: true }
    }
}

impl PreprocessConfig {
    pub fn validate(&self) -> Result<()> {
        if self.target_length < 8 {
            return Err(Error::config(format!(
                "target_length must be >= 8, got {}",
                self.target_length
            )));
        }
        Ok(())
    }
}

/// CSV column layout: id column, optional label column, then one column per
/// axis value with the wavenumber as the header.
#[derive(Debug, Clone)]
pub struct CsvSchema {
    pub id_column: String,
    pub label_column: String,
}

impl Default for CsvSchema {
    fn default() -> Self {
        CsvSchema { id_column: "id".into(), label_column: "label".into() }
    }
}

/// Reads a spectra CSV (`id,label,<axis_1>,...,<axis_L>`).
///
/// The label column is optional; rows with an empty label cell become
/// unlabeled records. Data rows are numbered from 1 in error messages.
pub fn load_csv(path: &Path, schema: &CsvSchema) -> Result<Vec<CsvRecord>> {
    let file = std::fs::File::open(path)
        .map_err(|e| Error::data(format!("cannot open {}: {e}", path.display())))?;
    read_csv(file, schema)
}

/// Reader-based variant of [`load_csv`].
pub fn read_csv(reader: impl Read, schema: &CsvSchema) -> Result<Vec<CsvRecord>> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).from_reader(reader);
    let headers = rdr.headers().map_err(|e| Error::data(format!("header: {e}")))?.clone();
    let mut cols = headers.iter();

    let first = cols.next().ok_or_else(|| Error::data("empty header"))?;
    if first != schema.id_column {
        return Err(Error::data(format!(
            "expected first column '{}', found '{first}'",
            schema.id_column
        )));
    }
    let mut rest: Vec<&str> = cols.collect();
    let has_label = rest.first() == Some(&schema.label_column.as_str());
    if has_label {
        rest.remove(0);
    }
    let axis: Vec<f64> = rest
        .iter()
        .map(|h| {
            h.trim()
                .parse::<f64>()
                .map_err(|_| Error::data(format!("non-numeric axis header '{h}'")))
        })
        .collect::<Result<_>>()?;
    if axis.len() < 2 {
        return Err(Error::data("header must declare at least 2 axis columns"));
    }
    if axis.windows(2).any(|w| w[1] <= w[0]) {
        return Err(Error::data("axis columns not strictly increasing"));
    }

    let mut records = Vec::new();
    for (i, row) in rdr.records().enumerate() {
        let row_no = i + 1;
        let row = row.map_err(|e| Error::data(format!("row {row_no}: {e}")))?;
        let expected = 1 + usize::from(has_label) + axis.len();
        if row.len() != expected {
            return Err(Error::data(format!(
                "row {row_no}: expected {expected} cells, found {}",
                row.len()
            )));
        }
        let mut cells = row.iter();
        let id = cells.next().unwrap().to_string();
        let label = if has_label {
            let cell = cells.next().unwrap().trim();
            if cell.is_empty() {
                None
            } else {
                Some(cell.parse::<usize>().map_err(|_| {
                    Error::data(format!("row {row_no}: non-integer label '{cell}'"))
                })?)
            }
        } else {
            None
        };
        let intensities: Vec<f64> = cells
            .map(|c| {
                c.trim()
                    .parse::<f64>()
                    .map_err(|_| Error::data(format!("row {row_no}: non-numeric intensity")))
            })
            .collect::<Result<_>>()?;
        let spectrum = Spectrum::new(id, axis.clone(), intensities)
            .map_err(|e| Error::data(format!("row {row_no}: {e}")))?;
        records.push(CsvRecord { spectrum, label });
    }
    Ok(records)
}

/// Writes records in the same CSV layout that [`load_csv`] reads.
pub fn write_csv(path: &Path, records: &[CsvRecord]) -> Result<()> {
    let axis = match records.first() {
        Some(r) => &r.spectrum.axis,
        None => return Err(Error::data("refusing to write empty corpus")),
    };
    let mut wtr = csv::Writer::from_path(path)?;
    let mut header: Vec<String> = vec!["id".into(), "label".into()];
    header.extend(axis.iter().map(|v| v.to_string()));
    wtr.write_record(&header)?;
    for r in records {
        if r.spectrum.axis != *axis {
            return Err(Error::data(format!(
                "spectrum {} has a different axis than the corpus",
                r.spectrum.id
            )));
        }
        let mut row: Vec<String> = Vec::with_capacity(2 + axis.len());
        row.push(r.spectrum.id.clone());
        row.push(r.label.map(|l| l.to_string()).unwrap_or_default());
        row.extend(r.spectrum.intensities.iter().map(|v| v.to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

/// Linear interpolation onto `target_length` points uniformly spaced between
/// the axis endpoints. Endpoints are preserved exactly.
pub fn resample_to_length(s: &Spectrum, target_length: usize) -> Result<Spectrum> {
    if target_length < 2 {
        return Err(Error::config(format!("target length must be >= 2, got {target_length}")));
    }
    let n = s.len();
    let (lo, hi) = (s.axis[0], s.axis[n - 1]);
    let mut axis = Vec::with_capacity(target_length);
    let mut intensities = Vec::with_capacity(target_length);
    let step = (hi - lo) / (target_length - 1) as f64;
    let mut seg = 0usize; // current source segment, axis[seg] <= x <= axis[seg+1]
    for i in 0..target_length {
        let x = if i == target_length - 1 { hi } else { lo + step * i as f64 };
        while seg + 2 < n && s.axis[seg + 1] < x {
            seg += 1;
        }
        let (x0, x1) = (s.axis[seg], s.axis[seg + 1]);
        let (y0, y1) = (s.intensities[seg], s.intensities[seg + 1]);
        let y = if x <= x0 {
            y0
        } else if x >= x1 {
            y1
        } else {
            y0 + (y1 - y0) * (x - x0) / (x1 - x0)
        };
        axis.push(x);
        intensities.push(y);
    }
    Spectrum::new(s.id.clone(), axis, intensities)
}

/// Max-min normalization: `(x - min) / (max - min)`.
///
/// A constant spectrum cannot be normalized; it comes back as all zeros with
/// the degenerate flag set, and the loaders drop flagged samples instead of
/// aborting the batch.
pub fn minmax_normalize(s: &Spectrum) -> (Spectrum, bool) {
    let (mut lo, mut hi) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in &s.intensities {
        lo = lo.min(v);
        hi = hi.max(v);
    }
    if hi == lo {
        let zeros = vec![0.0; s.len()];
        let out = Spectrum { id: s.id.clone(), axis: s.axis.clone(), intensities: zeros };
        return (out, true);
    }
    let scale = 1.0 / (hi - lo);
    let intensities = s.intensities.iter().map(|&v| (v - lo) * scale).collect();
    let out = Spectrum { id: s.id.clone(), axis: s.axis.clone(), intensities };
    (out, false)
}

/// Stratified annotation split: per class, `round(fraction * class_size)`
/// samples (minimum 1) go to the annotated set; the rest lose their labels
/// and form the unannotated set. Deterministic under `seed`.
pub fn split_annotated(
    data: &[LabeledSpectrum],
    fraction: f64,
    seed: u64,
) -> Result<SplitDataset> {
    if !(fraction > 0.0 && fraction <= 1.0) {
        return Err(Error::config(format!("fraction must be in (0, 1], got {fraction}")));
    }
    if data.is_empty() {
        return Err(Error::data("cannot split an empty dataset"));
    }
    let class_count = data.iter().map(|l| l.label).max().unwrap() + 1;
    let mut by_class: Vec<Vec<usize>> = vec![Vec::new(); class_count];
    for (i, l) in data.iter().enumerate() {
        by_class[l.label].push(i);
    }
    if let Some(c) = by_class.iter().position(|v| v.is_empty()) {
        return Err(Error::data(format!("class {c} has no samples")));
    }

    let root = crate::rng::seed_rng(seed);
    let mut annotated = Vec::new();
    let mut unannotated = Vec::new();
    for (class, indices) in by_class.iter().enumerate() {
        let mut order = indices.clone();
        let mut stream = root.stream("split", class as u64);
        order.shuffle(&mut stream);
        let take = ((fraction * order.len() as f64).round() as usize).max(1).min(order.len());
        for (pos, &ix) in order.iter().enumerate() {
            if pos < take {
                annotated.push(data[ix].clone());
            } else {
                unannotated.push(data[ix].spectrum.clone());
            }
        }
    }
    // Stable presentation order regardless of shuffle internals.
    annotated.sort_by(|a, b| a.spectrum.id.cmp(&b.spectrum.id));
    unannotated.sort_by(|a, b| a.id.cmp(&b.id));

    let split = SplitDataset {
        annotated,
        unannotated,
        test: Vec::new(),
        class_count,
        annotation_fraction: fraction,
    };
    split.validate()?;
    Ok(split)
}
