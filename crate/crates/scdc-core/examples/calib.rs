// temporary calibration probe
use scdc_core::synth::{default_benchmark, generate_dataset};
use scdc_core::spectra::LabeledSpectrum;

fn centroids(data: &[LabeledSpectrum]) -> Vec<Vec<f64>> {
    let classes = data.iter().map(|l| l.label).max().unwrap() + 1;
    let len = data[0].spectrum.len();
    let mut cents = vec![vec![0.0f64; len]; classes];
    let mut counts = vec![0usize; classes];
    for l in data {
        counts[l.label] += 1;
        for (acc, &v) in cents[l.label].iter_mut().zip(&l.spectrum.intensities) { *acc += v; }
    }
    for (c, n) in cents.iter_mut().zip(&counts) { for v in c.iter_mut() { *v /= *n as f64; } }
    cents
}

fn nc_acc(data: &[LabeledSpectrum], cents: &[Vec<f64>]) -> f64 {
    let mut correct = 0usize;
    for l in data {
        let mut best = (f64::INFINITY, 0usize);
        for (k, c) in cents.iter().enumerate() {
            let d: f64 = c.iter().zip(&l.spectrum.intensities).map(|(a, b)| (a - b) * (a - b)).sum();
            if d < best.0 { best = (d, k); }
        }
        if best.1 == l.label { correct += 1; }
    }
    correct as f64 / data.len() as f64
}

fn main() {
    for sigma in [0.8f64, 1.0, 1.1, 1.3, 1.5] {
        let mut accs = vec![];
        for seed in [1u64, 42, 20260810] {
            let mut cfg = default_benchmark(seed);
            cfg.noise_sigma = sigma;
            let train = generate_dataset(&cfg).unwrap();
            let mut tcfg = cfg.clone();
            tcfg.seed = seed + 1_000_000;
            tcfg.samples_per_class = 50;
            let test = generate_dataset(&tcfg).unwrap();
            accs.push(nc_acc(&test, &centroids(&train)));
        }
        println!("sigma={sigma:4}  held-out NC acc = {:.3} {:.3} {:.3}", accs[0], accs[1], accs[2]);
    }
}
