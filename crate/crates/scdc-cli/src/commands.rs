//! Subcommand implementations shared by the binary and its tests.

use std::path::{Path, PathBuf};

use serde::Serialize;

use scdc_core::checkpoint;
use scdc_core::config::{DatasetSource, ExperimentConfig};
use scdc_core::error::{Error, Result};
use scdc_core::metrics::render_table;
use scdc_core::spectra::{
    load_csv, minmax_normalize, resample_to_length, split_annotated, write_csv, CsvRecord,
    CsvSchema, LabeledSpectrum, SplitDataset, Spectrum,
};
use scdc_core::synth::generate_dataset;
use scdc_core::train::{self, evaluate_model, preprocess_split};

#[derive(Serialize)]
struct Sidecar<'a> {
    command: &'a str,
    config: &'a ExperimentConfig,
}

fn write_sidecar(primary: &Path, command: &str, config: &ExperimentConfig) -> Result<()> {
    let mut path = primary.as_os_str().to_owned();
    path.push(".meta.json");
    let doc = serde_json::to_string_pretty(&Sidecar { command, config })?;
    std::fs::write(PathBuf::from(path), doc)?;
    Ok(())
}

/// Materializes the configured dataset source as CSV-style records.
fn resolve_corpus(config: &ExperimentConfig) -> Result<Vec<CsvRecord>> {
    match &config.dataset {
        DatasetSource::Csv(path) => load_csv(path, &CsvSchema::default()),
        DatasetSource::Synth(synth) => Ok(generate_dataset(synth)?
            .into_iter()
            .map(|l| CsvRecord { spectrum: l.spectrum, label: Some(l.label) })
            .collect()),
    }
}

fn dataset_name(config: &ExperimentConfig) -> String {
    match &config.dataset {
        DatasetSource::Csv(path) => path
            .file_stem()
            .map(|s| s.to_string_lossy().into_owned())
            .unwrap_or_else(|| "csv".into()),
        DatasetSource::Synth(_) => "synth".into(),
    }
}

pub fn cmd_synth(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut config = ExperimentConfig::from_path(config_path)?;
    let DatasetSource::Synth(synth) = &mut config.dataset else {
        return Err(Error::config("synth subcommand requires a synth dataset source"));
    };
    if let Some(s) = seed {
        synth.seed = s;
    }
    let corpus = generate_dataset(synth)?;
    let records: Vec<CsvRecord> = corpus
        .into_iter()
        .map(|l| CsvRecord { spectrum: l.spectrum, label: Some(l.label) })
        .collect();
    let out = out.unwrap_or(Path::new("synth.csv"));
    write_csv(out, &records)?;
    write_sidecar(out, "synth", &config)?;
    log::info!("wrote {} spectra to {}", records.len(), out.display());
    Ok(())
}

/// Splits the corpus into annotated/unannotated per the config and checks
/// labels against the declared class count.
fn build_split(config: &ExperimentConfig, records: Vec<CsvRecord>) -> Result<SplitDataset> {
    let mut labeled = Vec::new();
    let mut unlabeled = Vec::new();
    for r in records {
        match r.label {
            Some(label) => labeled.push(LabeledSpectrum { spectrum: r.spectrum, label }),
            None => unlabeled.push(r.spectrum),
        }
    }
    let derived = labeled.iter().map(|l| l.label + 1).max();
    let class_count = match (config.train.class_count, derived) {
        (Some(declared), Some(derived)) => {
            if derived > declared {
                return Err(Error::config(format!(
                    "labels require {derived} classes, config declares {declared}"
                )));
            }
            declared
        }
        (Some(declared), None) => declared,
        (None, Some(derived)) => derived,
        (None, None) => {
            return Err(Error::config(
                "corpus has no labels; set train.class_count for unsupervised runs",
            ))
        }
    };

    let mut split = if labeled.is_empty() {
        SplitDataset {
            annotation_fraction: config.train.annotation_fraction,
            ..Default::default()
        }
    } else {
        split_annotated(&labeled, config.train.annotation_fraction, config.train.seed)?
    };
    split.class_count = class_count;
    split.unannotated.extend(unlabeled);
    split.validate()?;
    Ok(split)
}

pub fn cmd_train(config_path: &Path, seed: Option<u64>) -> Result<()> {
    let mut config = ExperimentConfig::from_path(config_path)?;
    if let Some(s) = seed {
        config.train.seed = s;
    }
    let records = resolve_corpus(&config)?;
    let split = build_split(&config, records)?;
    let prepared = preprocess_split(&split, &config.preprocess)?;
    let train_cfg = config.train_config();
    let outcome = train::train(&prepared, &train_cfg)?;
    write_sidecar(&config.train.checkpoint_path, "train", &config)?;
    let last = outcome.reports.last().expect("at least one epoch");
    log::info!(
        "training complete: {} epochs, final mean loss {:.4}, checkpoint {}",
        outcome.reports.len(),
        last.mean_total,
        config.train.checkpoint_path.display()
    );
    Ok(())
}

/// Loads the checkpoint named by the config and preprocesses the configured
/// dataset to the checkpoint's input length.
fn load_model_and_rows(
    config: &ExperimentConfig,
) -> Result<(scdc_core::model::ScdcModel, Vec<(String, Option<usize>, Vec<f64>)>)> {
    let model = checkpoint::load(&config.train.checkpoint_path)?;
    let target = model.config().input_length;
    if config.preprocess.target_length != target {
        log::warn!(
            "config target_length {} != checkpoint input length {target}; using {target}",
            config.preprocess.target_length
        );
    }
    let records = resolve_corpus(config)?;
    let mut rows = Vec::with_capacity(records.len());
    for r in records {
        let resampled = resample_to_length(&r.spectrum, target)?;
        let spectrum = if config.preprocess.normalize {
            let (normalized, degenerate) = minmax_normalize(&resampled);
            if degenerate {
                log::warn!("skipping degenerate spectrum {}", r.spectrum.id);
                continue;
            }
            normalized
        } else {
            resampled
        };
        rows.push((spectrum.id, r.label, spectrum.intensities));
    }
    if rows.is_empty() {
        return Err(Error::data("no usable spectra in dataset"));
    }
    Ok((model, rows))
}

#[derive(Serialize)]
struct EvalDocument<'a> {
    dataset: String,
    classification: &'a scdc_core::metrics::ClassificationReport,
    clustering: &'a scdc_core::metrics::ClusteringReport,
    config: &'a ExperimentConfig,
}

pub fn cmd_eval(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut config = ExperimentConfig::from_path(config_path)?;
    if let (Some(s), DatasetSource::Synth(synth)) = (seed, &mut config.dataset) {
        synth.seed = s;
    }
    let (mut model, rows) = load_model_and_rows(&config)?;
    let test: Vec<LabeledSpectrum> = rows
        .into_iter()
        .filter_map(|(id, label, intensities)| {
            label.map(|label| LabeledSpectrum {
                spectrum: Spectrum {
                    id,
                    axis: (0..intensities.len()).map(|i| i as f64).collect(),
                    intensities,
                },
                label,
            })
        })
        .collect();
    if test.is_empty() {
        return Err(Error::config("eval requires labeled rows"));
    }
    let (classification, clustering) = evaluate_model(&mut model, &test)?;

    let name = dataset_name(&config);
    let doc = EvalDocument {
        dataset: name.clone(),
        classification: &classification,
        clustering: &clustering,
        config: &config,
    };
    let json = serde_json::to_string_pretty(&doc)?;
    let out = out.unwrap_or(Path::new("report.json"));
    std::fs::write(out, &json)?;

    let column = vec![(
        name,
        vec![
            ("rac".to_string(), classification.rac),
            ("f1_macro".to_string(), classification.f1_macro),
            ("auroc".to_string(), classification.auroc_macro),
            ("nmi".to_string(), clustering.nmi),
            ("cac".to_string(), clustering.cac),
            ("fmi".to_string(), clustering.fmi),
        ],
    )];
    print!("{}", render_table(&column));
    Ok(())
}

pub fn cmd_predict(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut config = ExperimentConfig::from_path(config_path)?;
    if let (Some(s), DatasetSource::Synth(synth)) = (seed, &mut config.dataset) {
        synth.seed = s;
    }
    let (mut model, rows) = load_model_and_rows(&config)?;
    let inputs: Vec<Vec<f64>> = rows.iter().map(|(_, _, v)| v.clone()).collect();
    let predictions = model.predict_class(&inputs)?;

    let out = out.unwrap_or(Path::new("predictions.csv"));
    let mut wtr = csv::Writer::from_path(out)?;
    wtr.write_record(["id", "label", "confidence"])?;
    for ((id, _, _), (label, confidence)) in rows.iter().zip(&predictions) {
        wtr.write_record([id.as_str(), &label.to_string(), &confidence.to_string()])?;
    }
    wtr.flush()?;
    write_sidecar(out, "predict", &config)?;
    log::info!("wrote {} predictions to {}", predictions.len(), out.display());
    Ok(())
}

pub fn cmd_embed(config_path: &Path, out: Option<&Path>, seed: Option<u64>) -> Result<()> {
    let mut config = ExperimentConfig::from_path(config_path)?;
    if let (Some(s), DatasetSource::Synth(synth)) = (seed, &mut config.dataset) {
        synth.seed = s;
    }
    let (mut model, rows) = load_model_and_rows(&config)?;
    let inputs: Vec<Vec<f64>> = rows.iter().map(|(_, _, v)| v.clone()).collect();
    let embeddings = model.embed_rows(&inputs)?;
    let dim = model.config().embed_dim;

    let out = out.unwrap_or(Path::new("embeddings.csv"));
    let mut wtr = csv::Writer::from_path(out)?;
    let mut header = vec!["id".to_string()];
    header.extend((1..=dim).map(|i| format!("z_{i}")));
    wtr.write_record(&header)?;
    for ((id, _, _), z) in rows.iter().zip(&embeddings) {
        let mut record = vec![id.clone()];
        record.extend(z.iter().map(|v| v.to_string()));
        wtr.write_record(&record)?;
    }
    wtr.flush()?;
    write_sidecar(out, "embed", &config)?;
    log::info!("wrote {} embeddings to {}", embeddings.len(), out.display());
    Ok(())
}
