// temporary: time full criterion-5-style runs
use scdc_core::rng::seed_rng;
use scdc_core::spectra::{split_annotated, PreprocessConfig};
use scdc_core::synth::{default_benchmark, generate_dataset};
use scdc_core::train::{evaluate_model, preprocess_split, train, TrainConfig, TrainMode};
use std::time::Instant;

fn main() {
    let mode = match std::env::args().nth(1).as_deref() {
        Some("uns") => TrainMode::Unsupervised,
        Some("sup") => TrainMode::Supervised,
        _ => TrainMode::Semi,
    };
    let epochs: usize = std::env::args().nth(2).and_then(|s| s.parse().ok()).unwrap_or(50);
    let train_data = generate_dataset(&default_benchmark(20260810)).unwrap();
    let mut tcfg = default_benchmark(20260810 + 1_000_000);
    tcfg.samples_per_class = 50;
    let test_data = generate_dataset(&tcfg).unwrap();
    let mut split = split_annotated(&train_data, 0.05, 20260810).unwrap();
    split.test = test_data;
    let prepared = preprocess_split(&split, &PreprocessConfig::default()).unwrap();

    let mut cfg = TrainConfig::new(mode, 1);
    cfg.epochs = epochs;
    let t = Instant::now();
    let outcome = train(&prepared, &cfg).unwrap();
    let train_secs = t.elapsed().as_secs_f64();
    let mut model = outcome.model;
    let (cls, clus) = evaluate_model(&mut model, &prepared.test).unwrap();
    let last = outcome.reports.last().unwrap();
    println!(
        "mode {:?} epochs {epochs}: {train_secs:.0}s train | final loss {:.3} M/B {:.2} | RAC {:.3} F1 {:.3} AUROC {:.3} | NMI {:.3} CAC {:.3} FMI {:.3}",
        mode, last.mean_total, last.confident_rate, cls.rac, cls.f1_macro, cls.auroc_macro, clus.nmi, clus.cac, clus.fmi
    );
}
