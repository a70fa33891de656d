//! Hot-loop primitives shared by the tensor operations.
//!
//! Reductions use fixed 8-way accumulator splitting: the summation order is
//! part of the numeric contract (bitwise reproducibility), and independent
//! accumulators let LLVM vectorize without reassociating floats itself.
//! Multiply-adds are written as `mul_add` so the backend emits FMA where
//! the target has it.

/// y += alpha * x
#[inline]
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    debug_assert_eq!(x.len(), y.len());
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi = alpha.mul_add(*xi, *yi);
    }
}

/// Dot product with deterministic 8-lane accumulation.
#[inline]
pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    debug_assert_eq!(a.len(), b.len());
    let mut acc = [0.0f64; 8];
    let n8 = a.len() - a.len() % 8;
    let (a8, at) = a.split_at(n8);
    let (b8, bt) = b.split_at(n8);
    for (ca, cb) in a8.chunks_exact(8).zip(b8.chunks_exact(8)) {
        for k in 0..8 {
            acc[k] = ca[k].mul_add(cb[k], acc[k]);
        }
    }
    let mut tail = 0.0;
    for (x, y) in at.iter().zip(bt) {
        tail = x.mul_add(*y, tail);
    }
    acc.iter().sum::<f64>() + tail
}

/// Sum with deterministic 8-lane accumulation.
#[inline]
pub fn sum(a: &[f64]) -> f64 {
    let mut acc = [0.0f64; 8];
    let n8 = a.len() - a.len() % 8;
    let (a8, at) = a.split_at(n8);
    for ca in a8.chunks_exact(8) {
        for k in 0..8 {
            acc[k] += ca[k];
        }
    }
    acc.iter().sum::<f64>() + at.iter().sum::<f64>()
}

/// Sum of squared deviations from `mu`, 8-lane deterministic.
#[inline]
pub fn sum_sq_diff(a: &[f64], mu: f64) -> f64 {
    let mut acc = [0.0f64; 8];
    let n8 = a.len() - a.len() % 8;
    let (a8, at) = a.split_at(n8);
    for ca in a8.chunks_exact(8) {
        for k in 0..8 {
            let d = ca[k] - mu;
            acc[k] = d.mul_add(d, acc[k]);
        }
    }
    let mut tail = 0.0;
    for &x in at {
        let d = x - mu;
        tail = d.mul_add(d, tail);
    }
    acc.iter().sum::<f64>() + tail
}

/// y += a0*x0 + a1*x1 + a2*x2 + a3*x3 (four fused axpy passes in one sweep).
#[inline]
pub fn axpy4(a: [f64; 4], x: [&[f64]; 4], y: &mut [f64]) {
    let n = y.len();
    let (x0, x1, x2, x3) = (&x[0][..n], &x[1][..n], &x[2][..n], &x[3][..n]);
    for i in 0..n {
        let acc = a[0].mul_add(x0[i], y[i]);
        let acc = a[1].mul_add(x1[i], acc);
        let acc = a[2].mul_add(x2[i], acc);
        y[i] = a[3].mul_add(x3[i], acc);
    }
}

/// Four dot products against a shared left operand in one sweep.
#[inline]
pub fn dot4(a: &[f64], b: [&[f64]; 4]) -> [f64; 4] {
    let n = a.len();
    let (b0, b1, b2, b3) = (&b[0][..n], &b[1][..n], &b[2][..n], &b[3][..n]);
    let mut acc = [[0.0f64; 4]; 4];
    let n4 = n - n % 4;
    for i in (0..n4).step_by(4) {
        for lane in 0..4 {
            let av = a[i + lane];
            acc[lane][0] = av.mul_add(b0[i + lane], acc[lane][0]);
            acc[lane][1] = av.mul_add(b1[i + lane], acc[lane][1]);
            acc[lane][2] = av.mul_add(b2[i + lane], acc[lane][2]);
            acc[lane][3] = av.mul_add(b3[i + lane], acc[lane][3]);
        }
    }
    let mut out = [0.0f64; 4];
    for j in 0..4 {
        out[j] = acc[0][j] + acc[1][j] + acc[2][j] + acc[3][j];
    }
    for i in n4..n {
        out[0] = a[i].mul_add(b0[i], out[0]);
        out[1] = a[i].mul_add(b1[i], out[1]);
        out[2] = a[i].mul_add(b2[i], out[2]);
        out[3] = a[i].mul_add(b3[i], out[3]);
    }
    out
}

/// Interior bounds for a stride-1 correlation row: outputs in this range
/// have every tap inside the input.
#[inline]
fn row_interior(k: usize, pad: usize, lx: usize, n: usize) -> (usize, usize) {
    let interior_lo = pad.min(n);
    let interior_hi = (lx + pad + 1).saturating_sub(k).clamp(interior_lo, n);
    (interior_lo, interior_hi)
}

#[inline]
fn row_edges_add(w: &[f64], x: &[f64], y: &mut [f64], pad: usize, range: std::ops::Range<usize>) {
    let lx = x.len() as isize;
    for lo in range {
        let mut acc = y[lo];
        for (kk, &wv) in w.iter().enumerate() {
            let xi = lo as isize + kk as isize - pad as isize;
            if (0..lx).contains(&xi) {
                acc = wv.mul_add(x[xi as usize], acc);
            }
        }
        y[lo] = acc;
    }
}

/// One cross-correlation row pass: y[lo] += sum_k w[k] * x[lo + k - pad],
/// taps outside x skipped. K is the compile-time kernel width so the tap
/// loop unrolls; the interior runs without bounds logic.
pub fn conv_row_add<const K: usize>(w: &[f64], x: &[f64], y: &mut [f64], pad: usize) {
    debug_assert_eq!(w.len(), K);
    let mut wk = [0.0f64; K];
    wk.copy_from_slice(w);
    let (interior_lo, interior_hi) = row_interior(K, pad, x.len(), y.len());
    conv_row_add_inner::<K>(&wk, x, y, pad, interior_lo, interior_hi);
}

#[inline]
fn conv_row_add_inner<const K: usize>(
    wk: &[f64; K],
    x: &[f64],
    y: &mut [f64],
    pad: usize,
    interior_lo: usize,
    interior_hi: usize,
) {
    row_edges_add(wk, x, y, pad, 0..interior_lo);
    row_edges_add(wk, x, y, pad, interior_hi..y.len());
    if interior_lo < interior_hi {
        let len = interior_hi - interior_lo;
        let xs = &x[interior_lo - pad..interior_lo - pad + len + K - 1];
        let ys = &mut y[interior_lo..interior_hi];
        for i in 0..len {
            let mut acc = ys[i];
            for kk in 0..K {
                acc = wk[kk].mul_add(xs[i + kk], acc);
            }
            ys[i] = acc;
        }
    }
}

/// Weight-gradient row pass: dw[kk] += sum_lo dy[lo] * x[lo + kk - pad]
/// over the taps' valid ranges.
pub fn conv_row_dw<const K: usize>(dy: &[f64], x: &[f64], dw: &mut [f64], pad: usize) {
    debug_assert_eq!(dw.len(), K);
    let (interior_lo, interior_hi) = row_interior(K, pad, x.len(), dy.len());
    conv_row_dw_inner::<K>(dy, x, dw, pad, interior_lo, interior_hi);
}

#[inline]
fn conv_row_dw_inner<const K: usize>(
    dy: &[f64],
    x: &[f64],
    dw: &mut [f64],
    pad: usize,
    interior_lo: usize,
    interior_hi: usize,
) {
    let lx = x.len() as isize;
    let mut guarded = |range: std::ops::Range<usize>| {
        for lo in range {
            let g = dy[lo];
            for (kk, w) in dw.iter_mut().enumerate() {
                let xi = lo as isize + kk as isize - pad as isize;
                if (0..lx).contains(&xi) {
                    *w = g.mul_add(x[xi as usize], *w);
                }
            }
        }
    };
    guarded(0..interior_lo);
    guarded(interior_hi..dy.len());

    if interior_lo < interior_hi {
        let len = interior_hi - interior_lo;
        let xs = &x[interior_lo - pad..interior_lo - pad + len + K - 1];
        let dys = &dy[interior_lo..interior_hi];
        // Rows are L1-resident; one dot pass per tap beats a fused
        // multi-accumulator sweep here.
        for (kk, w) in dw.iter_mut().enumerate() {
            *w += dot(dys, &xs[kk..kk + len]);
        }
    }
}

/// Dynamic-width dispatch for [`conv_row_dw`].
#[inline]
pub fn conv_row_dw_dyn(dy: &[f64], x: &[f64], dw: &mut [f64], pad: usize) {
    match dw.len() {
        1 => conv_row_dw::<1>(dy, x, dw, pad),
        3 => conv_row_dw::<3>(dy, x, dw, pad),
        5 => conv_row_dw::<5>(dy, x, dw, pad),
        7 => conv_row_dw::<7>(dy, x, dw, pad),
        9 => conv_row_dw::<9>(dy, x, dw, pad),
        k => {
            // Same math without the compile-time unroll.
            for lo in 0..dy.len() {
                let g = dy[lo];
                for kk in 0..k {
                    let xi = lo as isize + kk as isize - pad as isize;
                    if (0..x.len() as isize).contains(&xi) {
                        dw[kk] = g.mul_add(x[xi as usize], dw[kk]);
                    }
                }
            }
        }
    }
}

/// Stride-1 whole-tensor convolution passes: one kernel-width dispatch per
/// call, weight taps hoisted per (co, ci), batch loop innermost.
pub struct ConvShape {
    pub batch: usize,
    pub cin: usize,
    pub cout: usize,
    pub l: usize,
    pub lout: usize,
    pub pad: usize,
}

macro_rules! conv_dispatch {
    ($k:expr, $fn:ident, $($arg:expr),*) => {
        match $k {
            1 => $fn::<1>($($arg),*),
            3 => $fn::<3>($($arg),*),
            5 => $fn::<5>($($arg),*),
            7 => $fn::<7>($($arg),*),
            9 => $fn::<9>($($arg),*),
            11 => $fn::<11>($($arg),*),
            _ => $fn::<0>($($arg),*), // K = 0 marks the dynamic fallback
        }
    };
}

fn conv_fwd_pass<const K: usize>(x: &[f64], w: &[f64], out: &mut [f64], s: &ConvShape, k: usize) {
    if K == 0 {
        for bi in 0..s.batch {
            for co in 0..s.cout {
                let orow = &mut out[(bi * s.cout + co) * s.lout..][..s.lout];
                for ci in 0..s.cin {
                    let wrow = &w[(co * s.cin + ci) * k..][..k];
                    let xrow = &x[(bi * s.cin + ci) * s.l..][..s.l];
                    conv_row_add_generic(wrow, xrow, orow, s.pad);
                }
            }
        }
        return;
    }
    let (interior_lo, interior_hi) = row_interior(K, s.pad, s.l, s.lout);
    // Output row stays hot across the ci accumulation.
    for bi in 0..s.batch {
        for co in 0..s.cout {
            let orow = &mut out[(bi * s.cout + co) * s.lout..][..s.lout];
            for ci in 0..s.cin {
                let mut wk = [0.0f64; K];
                wk.copy_from_slice(&w[(co * s.cin + ci) * k..][..k]);
                let xrow = &x[(bi * s.cin + ci) * s.l..][..s.l];
                conv_row_add_inner::<K>(&wk, xrow, orow, s.pad, interior_lo, interior_hi);
            }
        }
    }
}

/// out[b,co,lo] += sum_ci sum_k w[co,ci,k] * x[b,ci,lo+k-pad]
pub fn conv_fwd_stride1(x: &[f64], w: &[f64], out: &mut [f64], s: &ConvShape, k: usize) {
    conv_dispatch!(k, conv_fwd_pass, x, w, out, s, k)
}

fn conv_dx_pass<const K: usize>(dy: &[f64], w: &[f64], dx: &mut [f64], s: &ConvShape, k: usize) {
    let flipped_pad = k - 1 - s.pad;
    if K == 0 {
        let mut wrev = vec![0.0; k];
        for bi in 0..s.batch {
            for ci in 0..s.cin {
                let xg = &mut dx[(bi * s.cin + ci) * s.l..][..s.l];
                for co in 0..s.cout {
                    let wrow = &w[(co * s.cin + ci) * k..][..k];
                    for (r, &wv) in wrev.iter_mut().zip(wrow.iter().rev()) {
                        *r = wv;
                    }
                    let dyrow = &dy[(bi * s.cout + co) * s.lout..][..s.lout];
                    conv_row_add_generic(&wrev, dyrow, xg, flipped_pad);
                }
            }
        }
        return;
    }
    let (interior_lo, interior_hi) = row_interior(K, flipped_pad, s.lout, s.l);
    // Input-gradient row stays hot across the co accumulation.
    for bi in 0..s.batch {
        for ci in 0..s.cin {
            let xg = &mut dx[(bi * s.cin + ci) * s.l..][..s.l];
            for co in 0..s.cout {
                let wrow = &w[(co * s.cin + ci) * k..][..k];
                let mut wrev = [0.0f64; K];
                for (r, &wv) in wrev.iter_mut().zip(wrow.iter().rev()) {
                    *r = wv;
                }
                let dyrow = &dy[(bi * s.cout + co) * s.lout..][..s.lout];
                conv_row_add_inner::<K>(&wrev, dyrow, xg, flipped_pad, interior_lo, interior_hi);
            }
        }
    }
}

/// dx[b,ci,li] += sum_co sum_k w[co,ci,k] * dy[b,co,li-k+pad]
/// (requires pad < k, which same-padding always satisfies).
pub fn conv_dx_stride1(dy: &[f64], w: &[f64], dx: &mut [f64], s: &ConvShape, k: usize) {
    debug_assert!(s.pad < k);
    conv_dispatch!(k, conv_dx_pass, dy, w, dx, s, k)
}

fn conv_dw_pass<const K: usize>(dy: &[f64], x: &[f64], dw: &mut [f64], s: &ConvShape, k: usize) {
    if K == 0 {
        for co in 0..s.cout {
            for ci in 0..s.cin {
                let wg = &mut dw[(co * s.cin + ci) * k..][..k];
                for bi in 0..s.batch {
                    let dyrow = &dy[(bi * s.cout + co) * s.lout..][..s.lout];
                    let xrow = &x[(bi * s.cin + ci) * s.l..][..s.l];
                    conv_row_dw_dyn(dyrow, xrow, wg, s.pad);
                }
            }
        }
        return;
    }
    let (interior_lo, interior_hi) = row_interior(K, s.pad, s.l, s.lout);
    for co in 0..s.cout {
        for ci in 0..s.cin {
            let wg = &mut dw[(co * s.cin + ci) * k..][..k];
            for bi in 0..s.batch {
                let dyrow = &dy[(bi * s.cout + co) * s.lout..][..s.lout];
                let xrow = &x[(bi * s.cin + ci) * s.l..][..s.l];
                conv_row_dw_inner::<K>(dyrow, xrow, wg, s.pad, interior_lo, interior_hi);
            }
        }
    }
}

/// dw[co,ci,k] += sum_b sum_lo dy[b,co,lo] * x[b,ci,lo+k-pad]
pub fn conv_dw_stride1(dy: &[f64], x: &[f64], dw: &mut [f64], s: &ConvShape, k: usize) {
    conv_dispatch!(k, conv_dw_pass, dy, x, dw, s, k)
}

/// Dynamic-width dispatch for [`conv_row_add`].
#[inline]
pub fn conv_row_add_dyn(w: &[f64], x: &[f64], y: &mut [f64], pad: usize) {
    match w.len() {
        1 => conv_row_add::<1>(w, x, y, pad),
        3 => conv_row_add::<3>(w, x, y, pad),
        5 => conv_row_add::<5>(w, x, y, pad),
        7 => conv_row_add::<7>(w, x, y, pad),
        9 => conv_row_add::<9>(w, x, y, pad),
        _ => conv_row_add_generic(w, x, y, pad),
    }
}

fn conv_row_add_generic(w: &[f64], x: &[f64], y: &mut [f64], pad: usize) {
    let lx = x.len() as isize;
    for (lo, o) in y.iter_mut().enumerate() {
        let mut acc = *o;
        for (kk, &wv) in w.iter().enumerate() {
            let xi = lo as isize + kk as isize - pad as isize;
            if (0..lx).contains(&xi) {
                acc = wv.mul_add(x[xi as usize], acc);
            }
        }
        *o = acc;
    }
}
