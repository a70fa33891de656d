// temporary step profiler
use scdc_core::autodiff::nn::Mode;
use scdc_core::autodiff::{backward, adam::AdamState};
use scdc_core::losses;
use scdc_core::model::{ModelConfig, ScdcModel};
use scdc_core::rng::seed_rng;
use std::time::Instant;

fn main() {
    let cfg = ModelConfig { class_count: 6, ..Default::default() };
    let mut model = ScdcModel::new(cfg, &seed_rng(1)).unwrap();
    let params = model.parameters();
    let mut adam = AdamState::new(&params, 1e-3);
    let rows: Vec<Vec<f64>> = (0..32)
        .map(|r| (0..1024).map(|i| (((i * (r + 3)) as f64) * 0.01).sin() * 0.5 + 0.5).collect())
        .collect();
    let labels: Vec<usize> = (0..32).map(|i| i % 6).collect();
    let ccfg = losses::ContrastConfig::default();

    for iter in 0..6 {
        let verbose = iter >= 3;
        let mut t = Instant::now();
        let mut lap = |name: &str, t: &mut Instant| {
            if verbose { println!("  {name:<28} {:7.2} ms", t.elapsed().as_secs_f64() * 1e3); }
            *t = Instant::now();
        };
        for p in &params { p.zero_grad(); }
        lap("zero_grad", &mut t);

        let x = model.input_from_rows(&rows).unwrap();
        let h = model.encode(&x, Mode::Train).unwrap();
        let y = model.category_head(&h);
        let l_sup = losses::supervised_loss(&y, &labels).unwrap();
        lap("labeled forward", &mut t);

        let xw = model.input_from_rows(&rows).unwrap();
        let hw = model.encode(&xw, Mode::Train).unwrap();
        let xs = model.input_from_rows(&rows).unwrap();
        let hs = model.encode(&xs, Mode::Train).unwrap();
        lap("view encodes", &mut t);
        let zw = model.embed_head(&hw);
        let zs = model.embed_head(&hs);
        let yw = model.category_head(&hw);
        let ys = model.category_head(&hs);
        lap("view heads", &mut t);
        let uns = losses::unsupervised_objective(&zs, &zw, &ys, &yw, &ccfg).unwrap();
        lap("unsup losses", &mut t);
        let total = losses::semi_objective(&l_sup, &uns.total);
        let _ = total.item();
        lap("total", &mut t);
        backward(&total).unwrap();
        lap("backward", &mut t);
        adam.step(&params);
        lap("adam", &mut t);
        drop(total); drop(uns); drop(l_sup);
        drop((x, h, y, xw, hw, xs, hs, zw, zs, yw, ys));
        lap("graph drop", &mut t);
        if verbose { println!("---"); }
    }
}
