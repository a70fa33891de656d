//! Finite-difference gradient checks for every layer, every primitive, and
//! every loss, on random small shapes.

mod common;

use common::fd::check_gradients;
use common::uniform;
use scdc_core::autodiff::nn::{self, Mode, RunningStats};
use scdc_core::autodiff::{ops, Tensor};
use scdc_core::losses::{self, PseudoLabels};
use scdc_core::model::{ModelConfig, ScdcModel};
use scdc_core::rng::seed_rng;

const STEP: f64 = 1e-4;
const LAYER_TOL: f64 = 1e-4;
const LOSS_TOL: f64 = 1e-3;

/// Projects a tensor to a scalar with fixed pseudo-random weights so the
/// checked gradient has non-trivial structure.
fn project(t: &Tensor, salt: u64) -> Tensor {
    let mut rng = seed_rng(salt).stream("proj", 0);
    let mask = uniform(&mut rng, t.len(), -1.0, 1.0);
    ops::sum_all(&ops::mul_mask(t, &mask))
}

#[test]
fn conv1d_gradients() {
    let mut rng = seed_rng(10).stream("conv-fd", 0);
    for (stride, padding) in [(1usize, 1usize), (1, 0), (2, 1)] {
        let x = Tensor::parameter(vec![2, 2, 8], uniform(&mut rng, 32, -1.0, 1.0));
        let w = Tensor::parameter(vec![3, 2, 3], uniform(&mut rng, 18, -1.0, 1.0));
        let b = Tensor::parameter(vec![3], uniform(&mut rng, 3, -1.0, 1.0));
        check_gradients(
            &[("input", x.clone()), ("weight", w.clone()), ("bias", b.clone())],
            || project(&nn::conv1d(&x, &w, &b, stride, padding).unwrap(), 1),
            STEP,
            LAYER_TOL,
        );
    }
}

#[test]
fn conv1d_wide_kernel_gradients() {
    let mut rng = seed_rng(11).stream("conv-fd7", 0);
    let x = Tensor::parameter(vec![2, 1, 12], uniform(&mut rng, 24, -1.0, 1.0));
    let w = Tensor::parameter(vec![2, 1, 7], uniform(&mut rng, 14, -1.0, 1.0));
    let b = Tensor::parameter(vec![2], uniform(&mut rng, 2, -1.0, 1.0));
    check_gradients(
        &[("input", x.clone()), ("weight", w.clone()), ("bias", b.clone())],
        || project(&nn::conv1d(&x, &w, &b, 1, 3).unwrap(), 2),
        STEP,
        LAYER_TOL,
    );
}

#[test]
fn batchnorm_gradients_train_and_eval() {
    let mut rng = seed_rng(12).stream("bn-fd", 0);
    let x = Tensor::parameter(vec![2, 3, 4], uniform(&mut rng, 24, -2.0, 2.0));
    let gamma = Tensor::parameter(vec![3], uniform(&mut rng, 3, 0.5, 1.5));
    let beta = Tensor::parameter(vec![3], uniform(&mut rng, 3, -0.5, 0.5));
    for mode in [Mode::Train, Mode::Eval] {
        // Fresh stats per probe; train-mode outputs depend only on batch
        // statistics, eval-mode on these fixed running values.
        check_gradients(
            &[("input", x.clone()), ("gamma", gamma.clone()), ("beta", beta.clone())],
            || {
                let mut stats = RunningStats::new(3);
                stats.mean = vec![0.1, -0.2, 0.3];
                stats.var = vec![1.2, 0.8, 1.0];
                project(&nn::batchnorm1d(&x, &gamma, &beta, &mut stats, mode).unwrap(), 3)
            },
            STEP,
            LAYER_TOL,
        );
    }
}

#[test]
fn maxpool_gradients() {
    let mut rng = seed_rng(13).stream("pool-fd", 0);
    let x = Tensor::parameter(vec![2, 2, 8], uniform(&mut rng, 32, -1.0, 1.0));
    check_gradients(
        &[("input", x.clone())],
        || project(&nn::maxpool1d(&x, 2).unwrap(), 4),
        STEP,
        LAYER_TOL,
    );
}

#[test]
fn linear_gradients() {
    let mut rng = seed_rng(14).stream("lin-fd", 0);
    let x = Tensor::parameter(vec![3, 5], uniform(&mut rng, 15, -1.0, 1.0));
    let w = Tensor::parameter(vec![5, 4], uniform(&mut rng, 20, -1.0, 1.0));
    let b = Tensor::parameter(vec![4], uniform(&mut rng, 4, -1.0, 1.0));
    check_gradients(
        &[("input", x.clone()), ("weight", w.clone()), ("bias", b.clone())],
        || project(&nn::linear(&x, &w, &b), 5),
        STEP,
        LAYER_TOL,
    );
}

#[test]
fn relu_and_softmax_gradients() {
    let mut rng = seed_rng(15).stream("act-fd", 0);
    // Keep values away from the ReLU kink so finite differences are valid.
    let vals: Vec<f64> =
        uniform(&mut rng, 12, -1.0, 1.0).into_iter().map(|v| if v.abs() < 0.05 { 0.1 } else { v }).collect();
    let x = Tensor::parameter(vec![3, 4], vals);
    check_gradients(&[("input", x.clone())], || project(&nn::relu(&x), 6), STEP, LAYER_TOL);

    let y = Tensor::parameter(vec![3, 4], uniform(&mut rng, 12, -2.0, 2.0));
    check_gradients(&[("input", y.clone())], || project(&nn::softmax_rows(&y), 7), STEP, LAYER_TOL);
}

#[test]
fn primitive_op_gradients() {
    let mut rng = seed_rng(16).stream("ops-fd", 0);
    let a = Tensor::parameter(vec![3, 4], uniform(&mut rng, 12, 0.2, 2.0));
    let b = Tensor::parameter(vec![3, 4], uniform(&mut rng, 12, 0.2, 2.0));
    let pairs: Vec<(&str, Box<dyn Fn() -> Tensor>)> = vec![
        ("add", { let (a, b) = (a.clone(), b.clone()); Box::new(move || project(&ops::add(&a, &b), 10)) }),
        ("sub", { let (a, b) = (a.clone(), b.clone()); Box::new(move || project(&ops::sub(&a, &b), 11)) }),
        ("mul", { let (a, b) = (a.clone(), b.clone()); Box::new(move || project(&ops::mul(&a, &b), 12)) }),
        ("scale", { let a = a.clone(); Box::new(move || project(&ops::scale(&a, -1.7), 13)) }),
        ("exp", { let a = a.clone(); Box::new(move || project(&ops::exp(&a), 14)) }),
        ("ln", { let a = a.clone(); Box::new(move || project(&ops::ln(&a), 15)) }),
        ("clamp", { let a = a.clone(); Box::new(move || project(&ops::clamp_min(&a, 0.5), 16)) }),
        ("transpose", { let a = a.clone(); Box::new(move || project(&ops::transpose(&a), 17)) }),
        ("concat", { let (a, b) = (a.clone(), b.clone()); Box::new(move || project(&ops::concat_rows(&a, &b), 18)) }),
        ("sum_axis1", { let a = a.clone(); Box::new(move || project(&ops::sum_axis1(&a), 19)) }),
        ("sum_axis0", { let a = a.clone(); Box::new(move || project(&ops::sum_axis0(&a), 20)) }),
        ("normalize", { let a = a.clone(); Box::new(move || project(&ops::l2_normalize_rows(&a), 21)) }),
        ("mean", { let a = a.clone(); Box::new(move || ops::mean_all(&a)) }),
    ];
    for (name, build) in pairs {
        let params = [("a", a.clone()), ("b", b.clone())];
        let worst = check_gradients(&params, build, STEP, LAYER_TOL);
        assert!(worst.is_finite(), "{name}");
    }

    let m = Tensor::parameter(vec![2, 3], uniform(&mut rng, 6, -1.0, 1.0));
    let n = Tensor::parameter(vec![3, 4], uniform(&mut rng, 12, -1.0, 1.0));
    check_gradients(
        &[("m", m.clone()), ("n", n.clone())],
        || project(&ops::matmul(&m, &n), 22),
        STEP,
        LAYER_TOL,
    );
}

fn random_embeddings(salt: u64, b: usize, e: usize) -> (Tensor, Tensor) {
    let mut rng = seed_rng(salt).stream("emb", 0);
    (
        Tensor::parameter(vec![b, e], uniform(&mut rng, b * e, -1.5, 1.5)),
        Tensor::parameter(vec![b, e], uniform(&mut rng, b * e, -1.5, 1.5)),
    )
}

fn random_probs(salt: u64, b: usize, c: usize) -> Tensor {
    let mut rng = seed_rng(salt).stream("probs", 0);
    let rows = common::random_prob_rows(&mut rng, b, c);
    Tensor::parameter(vec![b, c], common::flatten(&rows))
}

#[test]
fn loss_gradients_match_finite_differences() {
    let (zs, zw) = random_embeddings(20, 4, 3);
    check_gradients(
        &[("zs", zs.clone()), ("zw", zw.clone())],
        || losses::nt_xent_instance(&zs, &zw, 0.4).unwrap(),
        STEP,
        LOSS_TOL,
    );

    let ys = random_probs(21, 4, 3);
    let yw = random_probs(22, 4, 3);
    check_gradients(
        &[("ys", ys.clone()), ("yw", yw.clone())],
        || losses::category_contrast(&ys, &yw, 0.4).unwrap(),
        STEP,
        LOSS_TOL,
    );

    // Calibrated loss with a fixed mixed assignment: two share a label, one
    // differs, one unconfident.
    let (zs2, zw2) = random_embeddings(23, 4, 3);
    let pseudo = losses::select_pseudo_labels(
        &Tensor::constant(
            vec![4, 2],
            vec![0.9, 0.1, 0.8, 0.2, 0.2, 0.8, 0.55, 0.45],
        ),
        0.6,
    );
    assert_eq!(pseudo.confident_count(), 3);
    check_gradients(
        &[("zs", zs2.clone()), ("zw", zw2.clone())],
        || losses::calibrated_embedding_loss(&zs2, &zw2, &pseudo, 0.3).unwrap().loss,
        STEP,
        LOSS_TOL,
    );

    let pred = random_probs(24, 4, 3);
    check_gradients(
        &[("pred", pred.clone())],
        || losses::supervised_loss(&pred, &[0, 2, 1, 1]).unwrap(),
        STEP,
        LOSS_TOL,
    );

    let pse_labels = PseudoLabels::all_absent(4);
    let l = losses::pseudo_supervision_loss(&pred, &pse_labels);
    assert_eq!(l.item(), 0.0);
    let pseudo2 = losses::select_pseudo_labels(
        &Tensor::constant(vec![4, 3], vec![0.8, 0.1, 0.1, 0.3, 0.4, 0.3, 0.1, 0.1, 0.8, 0.2, 0.6, 0.2]),
        0.5,
    );
    check_gradients(
        &[("pred", pred.clone())],
        || losses::pseudo_supervision_loss(&pred, &pseudo2),
        STEP,
        LOSS_TOL,
    );

    // The full unsupervised objective end to end.
    let (zs3, zw3) = random_embeddings(25, 4, 3);
    let ys3 = random_probs(26, 4, 3);
    let yw3 = random_probs(27, 4, 3);
    let cfg = losses::ContrastConfig { tau: 0.5, tau_e: 0.35, epsilon: 0.4 };
    check_gradients(
        &[("zs", zs3.clone()), ("zw", zw3.clone()), ("ys", ys3.clone()), ("yw", yw3.clone())],
        || losses::unsupervised_objective(&zs3, &zw3, &ys3, &yw3, &cfg).unwrap().total,
        STEP,
        LOSS_TOL,
    );
}

/// Every parameter of a small model against central differences through the
/// full semi-supervised objective on a 4-sample batch.
#[test]
fn full_model_semi_loss_gradients() {
    let cfg = ModelConfig {
        input_length: 32,
        class_count: 3,
        conv_channels: vec![2, 3],
        conv_kernels: vec![3, 3],
        pool_window: 2,
        hidden_dim: 8,
        embed_dim: 4,
    };
    let mut model = ScdcModel::new(cfg, &seed_rng(30)).unwrap();
    let mut rng = seed_rng(31).stream("data", 0);
    let labeled: Vec<Vec<f64>> = (0..4).map(|_| uniform(&mut rng, 32, 0.0, 1.0)).collect();
    let labels = [0usize, 1, 2, 1];
    let weak: Vec<Vec<f64>> = (0..4).map(|_| uniform(&mut rng, 32, 0.0, 1.0)).collect();
    let strong: Vec<Vec<f64>> = (0..4).map(|_| uniform(&mut rng, 32, 0.0, 1.0)).collect();
    let contrast = losses::ContrastConfig { tau: 0.4, tau_e: 0.4, epsilon: 0.3 };

    let named = model.named_parameters();
    let params: Vec<(&str, scdc_core::autodiff::Tensor)> =
        named.iter().map(|(n, t)| (n.as_str(), t.clone())).collect();
    // encode takes &mut self (running stats); RefCell lets the rebuild
    // closure borrow the model mutably per probe.
    let model_cell = std::cell::RefCell::new(model);
    let build = || {
        let mut model = model_cell.borrow_mut();
        let x = model.input_from_rows(&labeled).unwrap();
        let h = model.encode(&x, Mode::Train).unwrap();
        let y = model.category_head(&h);
        let l_sup = losses::supervised_loss(&y, &labels).unwrap();

        let xw = model.input_from_rows(&weak).unwrap();
        let hw = model.encode(&xw, Mode::Train).unwrap();
        let xs = model.input_from_rows(&strong).unwrap();
        let hs = model.encode(&xs, Mode::Train).unwrap();
        let zw = model.embed_head(&hw);
        let zs = model.embed_head(&hs);
        let yw = model.category_head(&hw);
        let ys = model.category_head(&hs);
        let uns = losses::unsupervised_objective(&zs, &zw, &ys, &yw, &contrast).unwrap();
        losses::semi_objective(&l_sup, &uns.total)
    };
    let worst = check_gradients(&params, build, STEP, LOSS_TOL);
    println!("full-model semi loss: worst relative gradient error {worst:.3e}");
}
