//! Every loss against its scalar-enumeration oracle on randomized fixtures.

mod common;

use common::oracles;
use common::{flatten, random_prob_rows, uniform};
use scdc_core::autodiff::Tensor;
use scdc_core::losses::{self, ContrastConfig};
use scdc_core::rng::seed_rng;

const TOL: f64 = 1e-9;

struct Fixture {
    b: usize,
    zs: Vec<Vec<f64>>,
    zw: Vec<Vec<f64>>,
    ys: Vec<Vec<f64>>,
    yw: Vec<Vec<f64>>,
    labels: Vec<usize>,
    tau: f64,
    tau_e: f64,
    epsilon: f64,
}

fn fixture(ix: u64) -> Fixture {
    use rand::Rng;
    let mut rng = seed_rng(1000 + ix).stream("fixture", ix);
    let b = rng.gen_range(2..=6);
    let c = rng.gen_range(2..=4);
    let e = rng.gen_range(2..=8);
    let embed = |rng: &mut scdc_core::rng::Stream| -> Vec<Vec<f64>> {
        (0..b).map(|_| uniform(rng, e, -2.0, 2.0)).collect()
    };
    Fixture {
        b,
        zs: embed(&mut rng),
        zw: embed(&mut rng),
        ys: random_prob_rows(&mut rng, b, c),
        yw: random_prob_rows(&mut rng, b, c),
        labels: (0..b).map(|_| rng.gen_range(0..c)).collect(),
        tau: rng.gen_range(0.1..1.5),
        tau_e: rng.gen_range(0.1..1.5),
        epsilon: rng.gen_range(0.2..0.9),
    }
}

fn tensor(rows: &[Vec<f64>]) -> Tensor {
    Tensor::constant(vec![rows.len(), rows[0].len()], flatten(rows))
}

#[test]
fn cosine_similarity_matches_oracle() {
    let mut rng = seed_rng(7).stream("cos", 0);
    for _ in 0..20 {
        let u = uniform(&mut rng, 5, -2.0, 2.0);
        let v = uniform(&mut rng, 5, -2.0, 2.0);
        let got = losses::cosine_similarity(&u, &v).unwrap();
        assert!((got - oracles::cosine(&u, &v)).abs() < TOL);
        assert!((-1.0 - TOL..=1.0 + TOL).contains(&got));
    }
}

#[test]
fn instance_loss_matches_enumeration_oracle() {
    for ix in 0..20 {
        let f = fixture(ix);
        let got = losses::nt_xent_instance(&tensor(&f.zs), &tensor(&f.zw), f.tau)
            .unwrap()
            .item();
        let want = oracles::nt_xent(&f.zs, &f.zw, f.tau);
        assert!((got - want).abs() < TOL, "fixture {ix}: {got} vs {want}");
    }
}

#[test]
fn category_loss_matches_enumeration_oracle() {
    for ix in 0..20 {
        let f = fixture(ix);
        let got = losses::category_contrast(&tensor(&f.ys), &tensor(&f.yw), f.tau)
            .unwrap()
            .item();
        let want = oracles::category_contrast(&f.ys, &f.yw, f.tau);
        assert!((got - want).abs() < TOL, "fixture {ix}: {got} vs {want}");
    }
}

#[test]
fn pseudo_label_selection_matches_oracle() {
    for ix in 0..20 {
        let f = fixture(ix);
        let got = losses::select_pseudo_labels(&tensor(&f.yw), f.epsilon);
        let want = oracles::select_labels(&f.yw, f.epsilon);
        for i in 0..f.b {
            assert_eq!(got.label(i), want[i], "fixture {ix} sample {i}");
        }
        assert_eq!(got.confident_count(), want.iter().flatten().count());
    }
}

#[test]
fn calibrated_loss_matches_enumeration_oracle() {
    for ix in 0..20 {
        let f = fixture(ix);
        let pseudo = losses::select_pseudo_labels(&tensor(&f.yw), f.epsilon);
        let labels: Vec<Option<usize>> = (0..f.b).map(|i| pseudo.label(i)).collect();
        let got = losses::calibrated_embedding_loss(
            &tensor(&f.zs),
            &tensor(&f.zw),
            &pseudo,
            f.tau_e,
        )
        .unwrap();
        let (want, contributing) = oracles::calibrated(&f.zs, &f.zw, &labels, f.tau_e);
        assert!(
            (got.loss.item() - want).abs() < TOL,
            "fixture {ix}: {} vs {want}",
            got.loss.item()
        );
        assert_eq!(got.contributing_anchors, contributing, "fixture {ix}");
    }
}

#[test]
fn supervision_losses_match_enumeration_oracle() {
    for ix in 0..20 {
        let f = fixture(ix);
        let got = losses::supervised_loss(&tensor(&f.ys), &f.labels).unwrap().item();
        let want = oracles::supervised(&f.ys, &f.labels);
        assert!((got - want).abs() < TOL, "fixture {ix}");

        let pseudo = losses::select_pseudo_labels(&tensor(&f.yw), f.epsilon);
        let labels: Vec<Option<usize>> = (0..f.b).map(|i| pseudo.label(i)).collect();
        let got = losses::pseudo_supervision_loss(&tensor(&f.ys), &pseudo).item();
        let want = oracles::pseudo_supervision(&f.ys, &labels);
        assert!((got - want).abs() < TOL, "fixture {ix}");
    }
}

#[test]
fn objectives_match_component_oracles() {
    for ix in 0..20 {
        let f = fixture(ix);
        let cfg = ContrastConfig { tau: f.tau, tau_e: f.tau_e, epsilon: f.epsilon };
        let uns = losses::unsupervised_objective(
            &tensor(&f.zs),
            &tensor(&f.zw),
            &tensor(&f.ys),
            &tensor(&f.yw),
            &cfg,
        )
        .unwrap();
        let want =
            oracles::unsupervised(&f.zs, &f.zw, &f.ys, &f.yw, f.tau, f.tau_e, f.epsilon);
        assert!((uns.total.item() - want).abs() < TOL, "fixture {ix}");

        let l_sup = losses::supervised_loss(&tensor(&f.ys), &f.labels).unwrap();
        let semi = losses::semi_objective(&l_sup, &uns.total).item();
        let want_semi = oracles::supervised(&f.ys, &f.labels) + want;
        assert!((semi - want_semi).abs() < TOL, "fixture {ix}");
    }
}
