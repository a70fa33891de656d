// temporary op microbenchmark
use scdc_core::autodiff::{backward, nn, ops, Tensor};
use scdc_core::autodiff::nn::{Mode, RunningStats};
use std::time::Instant;

fn timeit(name: &str, iters: usize, mut f: impl FnMut()) {
    let t = Instant::now();
    for _ in 0..iters { f(); }
    let per = t.elapsed().as_secs_f64() / iters as f64;
    println!("{name:<34} {:8.3} ms", per * 1e3);
}

fn rnd(n: usize, s: f64) -> Vec<f64> { (0..n).map(|i| ((i as f64) * s).sin()).collect() }

fn main() {
    let b = 32usize;
    // conv shapes: (cin, cout, l, k)
    for (cin, cout, l, k) in [(1usize, 16usize, 1024usize, 7usize), (16, 32, 256, 5), (32, 64, 64, 3)] {
        let x = Tensor::parameter(vec![b, cin, l], rnd(b * cin * l, 0.13));
        let w = Tensor::parameter(vec![cout, cin, k], rnd(cout * cin * k, 0.7));
        let bias = Tensor::parameter(vec![cout], rnd(cout, 0.3));
        timeit(&format!("conv fwd {cin}x{l} -> {cout} k{k}"), 20, || {
            let _ = nn::conv1d(&x, &w, &bias, 1, (k - 1) / 2).unwrap();
        });
        timeit(&format!("conv fwd+bwd {cin}x{l} -> {cout} k{k}"), 20, || {
            x.zero_grad(); w.zero_grad(); bias.zero_grad();
            let y = nn::conv1d(&x, &w, &bias, 1, (k - 1) / 2).unwrap();
            let loss = ops::mean_all(&ops::mul(&y, &y));
            backward(&loss).unwrap();
        });
    }
    // BN at block shapes
    for (c, l) in [(16usize, 1024usize), (32, 256), (64, 64)] {
        let x = Tensor::parameter(vec![b, c, l], rnd(b * c * l, 0.21));
        let g = Tensor::parameter(vec![c], vec![1.0; c]);
        let be = Tensor::parameter(vec![c], vec![0.0; c]);
        let mut rs = RunningStats::new(c);
        timeit(&format!("bn fwd+bwd {c}x{l}"), 20, || {
            x.zero_grad();
            let y = nn::batchnorm1d(&x, &g, &be, &mut rs, Mode::Train).unwrap();
            let loss = ops::mean_all(&ops::mul(&y, &y));
            backward(&loss).unwrap();
        });
    }
    // linear at head shapes
    for (d, e) in [(1024usize, 256usize), (256, 128), (256, 6)] {
        let x = Tensor::parameter(vec![b, d], rnd(b * d, 0.1));
        let w = Tensor::parameter(vec![d, e], rnd(d * e, 0.05));
        let bias = Tensor::parameter(vec![e], rnd(e, 0.4));
        timeit(&format!("linear fwd+bwd {d}->{e}"), 50, || {
            x.zero_grad(); w.zero_grad(); bias.zero_grad();
            let y = nn::linear(&x, &w, &bias);
            let loss = ops::mean_all(&ops::mul(&y, &y));
            backward(&loss).unwrap();
        });
    }
    // relu/pool at big shape
    let x = Tensor::parameter(vec![b, 16, 1024], rnd(b * 16 * 1024, 0.3));
    timeit("relu fwd+bwd 16x1024", 20, || {
        x.zero_grad();
        let y = nn::relu(&x);
        let loss = ops::mean_all(&ops::mul(&y, &y));
        backward(&loss).unwrap();
    });
    timeit("maxpool fwd+bwd 16x1024 w4", 20, || {
        x.zero_grad();
        let y = nn::maxpool1d(&x, 4).unwrap();
        let loss = ops::mean_all(&ops::mul(&y, &y));
        backward(&loss).unwrap();
    });
    // loss graph at real sizes
    let zs = Tensor::parameter(vec![b, 128], rnd(b * 128, 0.11));
    let zw = Tensor::parameter(vec![b, 128], rnd(b * 128, 0.17));
    timeit("nt_xent 32x128 fwd+bwd", 50, || {
        zs.zero_grad(); zw.zero_grad();
        let l = scdc_core::losses::nt_xent_instance(&zs, &zw, 0.2).unwrap();
        backward(&l).unwrap();
    });
}
