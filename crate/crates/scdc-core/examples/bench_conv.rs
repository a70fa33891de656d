// temporary conv micro-profile
use scdc_core::autodiff::kernels;
use std::time::Instant;

fn rnd(n: usize, s: f64) -> Vec<f64> { (0..n).map(|i| ((i as f64) * s).sin()).collect() }

fn main() {
    let b = 32;
    for (cin, cout, l, k) in [(1usize, 16usize, 1024usize, 7usize), (16, 32, 256, 5), (32, 64, 64, 3)] {
        let pad = (k - 1) / 2;
        let lout = l; // same padding
        let x = rnd(b * cin * l, 0.17);
        let w = rnd(cout * cin * k, 0.71);
        let dy = rnd(b * cout * lout, 0.31);

        let iters = 30;
        // forward-style stencil
        let mut out = vec![0.0; b * cout * lout];
        let t = Instant::now();
        for _ in 0..iters {
            for bi in 0..b { for co in 0..cout {
                let orow = &mut out[(bi * cout + co) * lout..][..lout];
                for ci in 0..cin {
                    kernels::conv_row_add_dyn(&w[(co * cin + ci) * k..][..k], &x[(bi * cin + ci) * l..][..l], orow, pad);
                }
            }}
        }
        let fwd = t.elapsed().as_secs_f64() / iters as f64 * 1e3;

        // dW
        let mut dw = vec![0.0; cout * cin * k];
        let t = Instant::now();
        for _ in 0..iters {
            for bi in 0..b { for co in 0..cout {
                let dyrow = &dy[(bi * cout + co) * lout..][..lout];
                for ci in 0..cin {
                    kernels::conv_row_dw_dyn(dyrow, &x[(bi * cin + ci) * l..][..l], &mut dw[(co * cin + ci) * k..][..k], pad);
                }
            }}
        }
        let dwt = t.elapsed().as_secs_f64() / iters as f64 * 1e3;

        // dX
        let mut dx = vec![0.0; b * cin * l];
        let mut wrev = vec![0.0; k];
        let t = Instant::now();
        for _ in 0..iters {
            for bi in 0..b { for co in 0..cout {
                let dyrow = &dy[(bi * cout + co) * lout..][..lout];
                for ci in 0..cin {
                    let wrow = &w[(co * cin + ci) * k..][..k];
                    for (r, &wv) in wrev.iter_mut().zip(wrow.iter().rev()) { *r = wv; }
                    kernels::conv_row_add_dyn(&wrev, dyrow, &mut dx[(bi * cin + ci) * l..][..l], k - 1 - pad);
                }
            }}
        }
        let dxt = t.elapsed().as_secs_f64() / iters as f64 * 1e3;
        let gflop = 2.0 * (b * cout * cin * k * lout) as f64 / 1e9;
        println!("conv {cin:>2}x{l:<4} -> {cout:<2} k{k}: fwd {fwd:6.2} ms ({:4.1} GF/s)  dW {dwt:6.2} ms ({:4.1})  dX {dxt:6.2} ms ({:4.1})",
            gflop / (fwd / 1e3), gflop / (dwt / 1e3), gflop / (dxt / 1e3));
    }
}
