// temporary training smoke probe
use scdc_core::rng::seed_rng;
use scdc_core::spectra::{split_annotated, PreprocessConfig};
use scdc_core::synth::{default_benchmark, generate_dataset};
use scdc_core::train::{evaluate_model, preprocess_split, train, TrainConfig, TrainMode};

fn main() {
    let t0 = std::time::Instant::now();
    let train_data = generate_dataset(&default_benchmark(42)).unwrap();
    let mut test_cfg = default_benchmark(42 + 1_000_000);
    test_cfg.samples_per_class = 50;
    let test_data = generate_dataset(&test_cfg).unwrap();

    let mut split = split_annotated(&train_data, 0.05, 42).unwrap();
    split.test = test_data;
    let prepared = preprocess_split(&split, &PreprocessConfig::default()).unwrap();
    println!("prep: {:?} annotated={} unannotated={} test={}", t0.elapsed(),
        prepared.annotated.len(), prepared.unannotated.len(), prepared.test.len());

    let mut cfg = TrainConfig::new(TrainMode::Semi, 42);
    cfg.epochs = 3;
    let t1 = std::time::Instant::now();
    let outcome = train(&prepared, &cfg).unwrap();
    println!("3 epochs: {:?} ({:.2} s/epoch)", t1.elapsed(), t1.elapsed().as_secs_f64() / 3.0);
    for r in &outcome.reports {
        println!("epoch {}: total {:.4} sup {:.4} cat {:.4} emb {:.4} pse {:.4} M/B {:.2} steps {}",
            r.epoch, r.mean_total, r.mean_l_sup, r.mean_l_cat, r.mean_l_emb, r.mean_l_pse, r.confident_rate, r.steps);
    }
    let mut model = outcome.model;
    let (cls, clus) = evaluate_model(&mut model, &prepared.test).unwrap();
    println!("after 3 epochs: RAC {:.3} F1 {:.3} AUROC {:.3} | NMI {:.3} CAC {:.3} FMI {:.3}",
        cls.rac, cls.f1_macro, cls.auroc_macro, clus.nmi, clus.cac, clus.fmi);
}
