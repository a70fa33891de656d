//! Network layers: 1-D convolution, batch norm, max pooling, linear,
//! ReLU, and row softmax.

use serde::{Deserialize, Serialize};

use super::{kernels, pool, Tensor};
use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Train,
    Eval,
}

/// Per-channel running statistics for batch normalization.
#[derive(Debug, Clone, Serialize, Deserialize, PartialEq)]
pub struct RunningStats {
    pub mean: Vec<f64>,
    pub var: Vec<f64>,
}

impl RunningStats {
    pub fn new(channels: usize) -> Self {
        RunningStats { mean: vec![0.0; channels], var: vec![1.0; channels] }
    }
}

fn dims3(t: &Tensor) -> Result<(usize, usize, usize)> {
    let s = t.shape();
    if s.len() != 3 {
        return Err(Error::shape(format!("expected a 3-D tensor, got shape {s:?}")));
    }
    Ok((s[0], s[1], s[2]))
}

// Valid output range for tap `kk` at stride 1: the input index
// lo + kk - padding must stay inside [0, l).
#[inline]
fn stride1_span(kk: usize, padding: usize, l: usize, lout: usize) -> (usize, usize, isize) {
    let off = kk as isize - padding as isize;
    let lo0 = (-off).max(0) as usize;
    let lo1 = (l as isize - off).clamp(0, lout as isize) as usize;
    (lo0, lo1, off)
}

/// Cross-correlation of `input` [B,Cin,L] with `weight` [Cout,Cin,K] plus
/// `bias` [Cout]; output is [B,Cout,L'] with L' = (L + 2p - K)/stride + 1.
pub fn conv1d(
    input: &Tensor,
    weight: &Tensor,
    bias: &Tensor,
    stride: usize,
    padding: usize,
) -> Result<Tensor> {
    let (b, cin, l) = dims3(input)?;
    let (cout, cin_w, k) = dims3(weight)?;
    if cin != cin_w {
        return Err(Error::shape(format!(
            "conv1d: input channels {cin} != weight channels {cin_w}"
        )));
    }
    if bias.shape() != [cout] {
        return Err(Error::shape(format!("conv1d: bias shape {:?} != [{cout}]", bias.shape())));
    }
    if stride == 0 {
        return Err(Error::shape("conv1d: stride must be >= 1".to_string()));
    }
    if l + 2 * padding < k {
        return Err(Error::shape(format!(
            "conv1d: kernel {k} larger than padded input {}",
            l + 2 * padding
        )));
    }
    let lout = (l + 2 * padding - k) / stride + 1;

    let shape = kernels::ConvShape { batch: b, cin, cout, l, lout, pad: padding };
    let values = input.with_values(|x| {
        weight.with_values(|w| {
            bias.with_values(|bs| {
                let mut out = pool::take_uninit(b * cout * lout);
                for bi in 0..b {
                    for co in 0..cout {
                        out[(bi * cout + co) * lout..][..lout].fill(bs[co]);
                    }
                }
                if stride == 1 {
                    kernels::conv_fwd_stride1(x, w, &mut out, &shape, k);
                } else {
                    for bi in 0..b {
                        for co in 0..cout {
                            let orow = &mut out[(bi * cout + co) * lout..][..lout];
                            for ci in 0..cin {
                                let xrow = &x[(bi * cin + ci) * l..][..l];
                                let wrow = &w[(co * cin + ci) * k..][..k];
                                for (lo, o) in orow.iter_mut().enumerate() {
                                    let base = (lo * stride) as isize - padding as isize;
                                    for (kk, &wv) in wrow.iter().enumerate() {
                                        let xi = base + kk as isize;
                                        if (0..l as isize).contains(&xi) {
                                            *o += wv * xrow[xi as usize];
                                        }
                                    }
                                }
                            }
                        }
                    }
                }
                out
            })
        })
    });

    Ok(Tensor::from_op(
        vec![b, cout, lout],
        values,
        vec![input.clone(), weight.clone(), bias.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let input = node.parent(0);
                let weight = node.parent(1);
                let bias = node.parent(2);

                let mut db = pool::take_zeroed(cout);
                for bi in 0..b {
                    for co in 0..cout {
                        db[co] += kernels::sum(&dy[(bi * cout + co) * lout..][..lout]);
                    }
                }
                bias.accumulate_grad_owned(db);

                let shape = kernels::ConvShape { batch: b, cin, cout, l, lout, pad: padding };
                let dw = input.with_values(|x| {
                    let mut dw = pool::take_zeroed(cout * cin * k);
                    if stride == 1 {
                        kernels::conv_dw_stride1(&dy, x, &mut dw, &shape, k);
                    } else {
                        for bi in 0..b {
                            for co in 0..cout {
                                let dyrow = &dy[(bi * cout + co) * lout..][..lout];
                                for ci in 0..cin {
                                    let xrow = &x[(bi * cin + ci) * l..][..l];
                                    let wg = &mut dw[(co * cin + ci) * k..][..k];
                                    for (lo, &g) in dyrow.iter().enumerate() {
                                        let base = (lo * stride) as isize - padding as isize;
                                        for (kk, wgk) in wg.iter_mut().enumerate() {
                                            let xi = base + kk as isize;
                                            if (0..l as isize).contains(&xi) {
                                                *wgk += g * xrow[xi as usize];
                                            }
                                        }
                                    }
                                }
                            }
                        }
                    }
                    dw
                });
                weight.accumulate_grad_owned(dw);

                if input.requires_grad() {
                    let dx = weight.with_values(|w| {
                        let mut dx = pool::take_zeroed(b * cin * l);
                        if stride == 1 && padding < k {
                            // dx is the correlation of dy with the reversed
                            // kernel at flipped padding.
                            kernels::conv_dx_stride1(&dy, w, &mut dx, &shape, k);
                        } else {
                            for bi in 0..b {
                                for co in 0..cout {
                                    let dyrow = &dy[(bi * cout + co) * lout..][..lout];
                                    for ci in 0..cin {
                                        let xg = &mut dx[(bi * cin + ci) * l..][..l];
                                        let wrow = &w[(co * cin + ci) * k..][..k];
                                        for (lo, &g) in dyrow.iter().enumerate() {
                                            let base =
                                                (lo * stride) as isize - padding as isize;
                                            for (kk, &wv) in wrow.iter().enumerate() {
                                                let xi = base + kk as isize;
                                                if (0..l as isize).contains(&xi) {
                                                    xg[xi as usize] += g * wv;
                                                }
                                            }
                                        }
                                    }
                                }
                            }
                        }
                        dx
                    });
                    input.accumulate_grad_owned(dx);
                }
            });
        }),
    ))
}

/// Batch normalization over (B, L) per channel.
///
/// Train mode normalizes with biased batch variance (eps 1e-5) and updates
/// the running statistics in place with momentum 0.1 (running variance uses
/// the unbiased estimate). Eval mode normalizes with the running statistics.
pub fn batchnorm1d(
    input: &Tensor,
    gamma: &Tensor,
    beta: &Tensor,
    running: &mut RunningStats,
    mode: Mode,
) -> Result<Tensor> {
    const EPS: f64 = 1e-5;
    const MOMENTUM: f64 = 0.1;
    let (b, c, l) = dims3(input)?;
    if gamma.shape() != [c] || beta.shape() != [c] {
        return Err(Error::shape(format!(
            "batchnorm1d: gamma/beta must be [{c}], got {:?}/{:?}",
            gamma.shape(),
            beta.shape()
        )));
    }
    if running.mean.len() != c {
        return Err(Error::shape(format!(
            "batchnorm1d: running stats have {} channels, input has {c}",
            running.mean.len()
        )));
    }
    let m = b * l;
    if mode == Mode::Train && m < 2 {
        return Err(Error::shape(format!("batchnorm1d: train mode needs B*L >= 2, got {m}")));
    }

    let (mean, var) = match mode {
        Mode::Train => {
            let mut mean = vec![0.0; c];
            let mut var = vec![0.0; c];
            input.with_values(|x| {
                for ci in 0..c {
                    let mut acc = 0.0;
                    for bi in 0..b {
                        acc += kernels::sum(&x[(bi * c + ci) * l..][..l]);
                    }
                    let mu = acc / m as f64;
                    mean[ci] = mu;
                    let mut vacc = 0.0;
                    for bi in 0..b {
                        vacc += kernels::sum_sq_diff(&x[(bi * c + ci) * l..][..l], mu);
                    }
                    var[ci] = vacc / m as f64;
                }
            });
            for ci in 0..c {
                running.mean[ci] = (1.0 - MOMENTUM) * running.mean[ci] + MOMENTUM * mean[ci];
                let unbiased = if m > 1 { var[ci] * m as f64 / (m - 1) as f64 } else { var[ci] };
                running.var[ci] = (1.0 - MOMENTUM) * running.var[ci] + MOMENTUM * unbiased;
            }
            (mean, var)
        }
        Mode::Eval => (running.mean.clone(), running.var.clone()),
    };

    let inv_std: Vec<f64> = var.iter().map(|v| 1.0 / (v + EPS).sqrt()).collect();
    let mut normalized = pool::take_uninit(b * c * l);
    let values = input.with_values(|x| {
        gamma.with_values(|g| {
            beta.with_values(|bt| {
                let mut out = pool::take_uninit(b * c * l);
                for bi in 0..b {
                    for ci in 0..c {
                        let base = (bi * c + ci) * l;
                        let (mu, is) = (mean[ci], inv_std[ci]);
                        // out = x * (is * gm) + (bv - mu * is * gm)
                        let a = is * g[ci];
                        let shift = bt[ci] - mu * a;
                        let xs = &x[base..base + l];
                        for ((n, o), &xv) in normalized[base..base + l]
                            .iter_mut()
                            .zip(&mut out[base..base + l])
                            .zip(xs)
                        {
                            *n = is.mul_add(xv, -mu * is);
                            *o = a.mul_add(xv, shift);
                        }
                    }
                }
                out
            })
        })
    });

    let train = mode == Mode::Train;
    Ok(Tensor::from_op(
        vec![b, c, l],
        values,
        vec![input.clone(), gamma.clone(), beta.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let input = node.parent(0);
                let gamma = node.parent(1);
                let beta = node.parent(2);

                let mut dgamma = pool::take_zeroed(c);
                let mut dbeta = pool::take_zeroed(c);
                for bi in 0..b {
                    for ci in 0..c {
                        let base = (bi * c + ci) * l;
                        dgamma[ci] +=
                            kernels::dot(&dy[base..base + l], &normalized[base..base + l]);
                        dbeta[ci] += kernels::sum(&dy[base..base + l]);
                    }
                }

                if input.requires_grad() {
                    let dx = gamma.with_values(|g| {
                        let mut dx = pool::take_uninit(b * c * l);
                        for ci in 0..c {
                            let coef = g[ci] * inv_std[ci];
                            if train {
                                // dx = coef*dy - coef*mean(dy) - coef*mean(dy.xn)*xn
                                let shift = -coef * dbeta[ci] / m as f64;
                                let xn_coef = -coef * dgamma[ci] / m as f64;
                                for bi in 0..b {
                                    let base = (bi * c + ci) * l;
                                    for ((d, &gv), &xn) in dx[base..base + l]
                                        .iter_mut()
                                        .zip(&dy[base..base + l])
                                        .zip(&normalized[base..base + l])
                                    {
                                        *d = coef.mul_add(gv, xn_coef.mul_add(xn, shift));
                                    }
                                }
                            } else {
                                for bi in 0..b {
                                    let base = (bi * c + ci) * l;
                                    for (d, &gv) in
                                        dx[base..base + l].iter_mut().zip(&dy[base..base + l])
                                    {
                                        *d = coef * gv;
                                    }
                                }
                            }
                        }
                        dx
                    });
                    input.accumulate_grad_owned(dx);
                }
                gamma.accumulate_grad_owned(dgamma);
                beta.accumulate_grad_owned(dbeta);
            });
        }),
    ))
}

/// Non-overlapping max pooling; the gradient routes to the first maximal
/// element of each window.
pub fn maxpool1d(input: &Tensor, window: usize) -> Result<Tensor> {
    let (b, c, l) = dims3(input)?;
    if window == 0 || l < window {
        return Err(Error::shape(format!("maxpool1d: window {window} invalid for length {l}")));
    }
    let lout = l / window;
    let mut argmax = vec![0usize; b * c * lout];
    let values = input.with_values(|x| {
        let mut out = pool::take_uninit(b * c * lout);
        for bc in 0..b * c {
            let row = &x[bc * l..][..l];
            for lo in 0..lout {
                let start = lo * window;
                let mut best = row[start];
                let mut best_ix = start;
                for (j, &v) in row[start..start + window].iter().enumerate().skip(1) {
                    if v > best {
                        best = v;
                        best_ix = start + j;
                    }
                }
                out[bc * lout + lo] = best;
                argmax[bc * lout + lo] = bc * l + best_ix;
            }
        }
        out
    });
    Ok(Tensor::from_op(
        vec![b, c, lout],
        values,
        vec![input.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let mut dx = pool::take_zeroed(b * c * l);
                for (g, &ix) in dy.iter().zip(&argmax) {
                    dx[ix] += g;
                }
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    ))
}

/// Affine map: [B,D] x [D,E] + [E] -> [B,E].
pub fn linear(input: &Tensor, weight: &Tensor, bias: &Tensor) -> Tensor {
    let s = input.shape();
    assert_eq!(s.len(), 2, "linear expects a 2-D input");
    let (b, d) = (s[0], s[1]);
    let ws = weight.shape();
    assert_eq!(ws.len(), 2, "linear expects a 2-D weight");
    assert_eq!(ws[0], d, "linear: input dim {d} != weight rows {}", ws[0]);
    let e = ws[1];
    assert_eq!(bias.shape(), [e], "linear: bias shape mismatch");

    let values = input.with_values(|x| {
        weight.with_values(|w| {
            bias.with_values(|bs| {
                let mut out = pool::take_uninit(b * e);
                for bi in 0..b {
                    let orow = &mut out[bi * e..][..e];
                    orow.copy_from_slice(bs);
                    let xrow = &x[bi * d..][..d];
                    let d4 = d - d % 4;
                    for p in (0..d4).step_by(4) {
                        kernels::axpy4(
                            [xrow[p], xrow[p + 1], xrow[p + 2], xrow[p + 3]],
                            [
                                &w[p * e..][..e],
                                &w[(p + 1) * e..][..e],
                                &w[(p + 2) * e..][..e],
                                &w[(p + 3) * e..][..e],
                            ],
                            orow,
                        );
                    }
                    for p in d4..d {
                        kernels::axpy(xrow[p], &w[p * e..][..e], orow);
                    }
                }
                out
            })
        })
    });

    Tensor::from_op(
        vec![b, e],
        values,
        vec![input.clone(), weight.clone(), bias.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let input = node.parent(0);
                let weight = node.parent(1);
                let bias = node.parent(2);

                let mut db = pool::take_zeroed(e);
                for bi in 0..b {
                    kernels::axpy(1.0, &dy[bi * e..][..e], &mut db);
                }
                bias.accumulate_grad_owned(db);

                let dw = input.with_values(|x| {
                    let mut dw = pool::take_zeroed(d * e);
                    let b4 = b - b % 4;
                    for bi in (0..b4).step_by(4) {
                        let dyr = [
                            &dy[bi * e..][..e],
                            &dy[(bi + 1) * e..][..e],
                            &dy[(bi + 2) * e..][..e],
                            &dy[(bi + 3) * e..][..e],
                        ];
                        for p in 0..d {
                            kernels::axpy4(
                                [
                                    x[bi * d + p],
                                    x[(bi + 1) * d + p],
                                    x[(bi + 2) * d + p],
                                    x[(bi + 3) * d + p],
                                ],
                                dyr,
                                &mut dw[p * e..][..e],
                            );
                        }
                    }
                    for bi in b4..b {
                        let dyrow = &dy[bi * e..][..e];
                        for (p, &xv) in x[bi * d..][..d].iter().enumerate() {
                            kernels::axpy(xv, dyrow, &mut dw[p * e..][..e]);
                        }
                    }
                    dw
                });
                weight.accumulate_grad_owned(dw);

                if input.requires_grad() {
                    let dx = weight.with_values(|w| {
                        let mut dx = pool::take_uninit(b * d);
                        let b4 = b - b % 4;
                        for bi in (0..b4).step_by(4) {
                            let dyr = [
                                &dy[bi * e..][..e],
                                &dy[(bi + 1) * e..][..e],
                                &dy[(bi + 2) * e..][..e],
                                &dy[(bi + 3) * e..][..e],
                            ];
                            for p in 0..d {
                                let wrow = &w[p * e..][..e];
                                let got = kernels::dot4(wrow, dyr);
                                dx[bi * d + p] = got[0];
                                dx[(bi + 1) * d + p] = got[1];
                                dx[(bi + 2) * d + p] = got[2];
                                dx[(bi + 3) * d + p] = got[3];
                            }
                        }
                        for bi in b4..b {
                            let dyrow = &dy[bi * e..][..e];
                            for p in 0..d {
                                dx[bi * d + p] = kernels::dot(dyrow, &w[p * e..][..e]);
                            }
                        }
                        dx
                    });
                    input.accumulate_grad_owned(dx);
                }
            });
        }),
    )
}

pub fn relu(input: &Tensor) -> Tensor {
    let values = input.with_values(|x| {
        let mut out = pool::take_uninit(x.len());
        for (o, &v) in out.iter_mut().zip(x) {
            *o = if v > 0.0 { v } else { 0.0 };
        }
        out
    });
    Tensor::from_op(
        input.shape().to_vec(),
        values,
        vec![input.clone()],
        Box::new(|node| {
            node.with_grad(|dy| {
                let dx = node.parent(0).with_values(|x| {
                    let mut dx = pool::take_uninit(dy.len());
                    for ((d, &g), &v) in dx.iter_mut().zip(dy).zip(x) {
                        *d = if v > 0.0 { g } else { 0.0 };
                    }
                    dx
                });
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    )
}

/// Row-wise softmax with max subtraction for stability; rows sum to 1.
pub fn softmax_rows(input: &Tensor) -> Tensor {
    let s = input.shape();
    assert_eq!(s.len(), 2, "softmax_rows expects a 2-D input");
    let (b, c) = (s[0], s[1]);
    let values = input.with_values(|x| {
        let mut out = pool::take_uninit(b * c);
        for bi in 0..b {
            let row = &x[bi * c..][..c];
            let max = row.iter().cloned().fold(f64::NEG_INFINITY, f64::max);
            let orow = &mut out[bi * c..][..c];
            let mut total = 0.0;
            for (o, &v) in orow.iter_mut().zip(row) {
                let e = (v - max).exp();
                *o = e;
                total += e;
            }
            let inv = 1.0 / total;
            for o in orow.iter_mut() {
                *o *= inv;
            }
        }
        out
    });
    let saved = values.clone();
    Tensor::from_op(
        vec![b, c],
        values,
        vec![input.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let mut dx = pool::take_uninit(b * c);
                for bi in 0..b {
                    let y = &saved[bi * c..][..c];
                    let g = &dy[bi * c..][..c];
                    let inner = kernels::dot(y, g);
                    for ((d, &yv), &gv) in dx[bi * c..][..c].iter_mut().zip(y).zip(g) {
                        *d = yv * (gv - inner);
                    }
                }
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    )
}

/// Reinterprets the buffer under a new shape (same element count).
pub fn reshape(input: &Tensor, shape: Vec<usize>) -> Tensor {
    assert_eq!(shape.iter().product::<usize>(), input.len(), "reshape must preserve element count");
    let values = input.with_values(|x| {
        let mut out = pool::take_uninit(x.len());
        out.copy_from_slice(x);
        out
    });
    Tensor::from_op(
        shape,
        values,
        vec![input.clone()],
        Box::new(|node| {
            node.with_grad(|dy| {
                node.parent(0).accumulate_grad(dy);
            });
        }),
    )
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::{backward, ops};

    fn close(a: &[f64], b: &[f64], tol: f64) {
        assert_eq!(a.len(), b.len());
        for (x, y) in a.iter().zip(b) {
            assert!((x - y).abs() <= tol, "{x} vs {y}");
        }
    }

    #[test]
    fn conv_identity_kernel() {
        // K=1, Cout=Cin, diagonal weight: output equals input.
        let x = Tensor::constant(vec![1, 2, 4], (0..8).map(|i| i as f64).collect());
        let w = Tensor::constant(vec![2, 2, 1], vec![1.0, 0.0, 0.0, 1.0]);
        let b = Tensor::constant(vec![2], vec![0.0, 0.0]);
        let y = conv1d(&x, &w, &b, 1, 0).unwrap();
        assert_eq!(y.values(), x.values());
    }

    #[test]
    fn conv_zero_input_broadcasts_bias() {
        let x = Tensor::constant(vec![2, 1, 5], vec![0.0; 10]);
        let w = Tensor::constant(vec![3, 1, 3], vec![0.5; 9]);
        let b = Tensor::constant(vec![3], vec![1.0, -2.0, 0.25]);
        let y = conv1d(&x, &w, &b, 1, 1).unwrap();
        assert_eq!(y.shape(), &[2, 3, 5]);
        let v = y.values();
        for bi in 0..2 {
            for (co, expect) in [1.0, -2.0, 0.25].iter().enumerate() {
                for lo in 0..5 {
                    assert_eq!(v[(bi * 3 + co) * 5 + lo], *expect);
                }
            }
        }
    }

    /// Direct nested-loop cross-correlation, independent of the axpy layout.
    fn conv_oracle(
        x: &[f64],
        w: &[f64],
        bias: &[f64],
        (b, cin, l): (usize, usize, usize),
        (cout, k): (usize, usize),
        stride: usize,
        padding: usize,
    ) -> Vec<f64> {
        let lout = (l + 2 * padding - k) / stride + 1;
        let mut out = vec![0.0; b * cout * lout];
        for bi in 0..b {
            for co in 0..cout {
                for lo in 0..lout {
                    let mut acc = bias[co];
                    for ci in 0..cin {
                        for kk in 0..k {
                            let xi = (lo * stride + kk) as isize - padding as isize;
                            if xi >= 0 && (xi as usize) < l {
                                acc += w[(co * cin + ci) * k + kk]
                                    * x[(bi * cin + ci) * l + xi as usize];
                            }
                        }
                    }
                    out[(bi * cout + co) * lout + lo] = acc;
                }
            }
        }
        out
    }

    #[test]
    fn conv_matches_nested_loop_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::seed_rng(3).stream("conv-oracle", 0);
        let (b, cin, cout, l, k) = (2, 2, 3, 8, 3);
        let x: Vec<f64> = (0..b * cin * l).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let w: Vec<f64> = (0..cout * cin * k).map(|_| rng.gen_range(-1.0..1.0)).collect();
        let bs: Vec<f64> = (0..cout).map(|_| rng.gen_range(-1.0..1.0)).collect();
        for (stride, padding) in [(1, 1), (1, 0), (2, 1)] {
            let xt = Tensor::constant(vec![b, cin, l], x.clone());
            let wt = Tensor::constant(vec![cout, cin, k], w.clone());
            let bt = Tensor::constant(vec![cout], bs.clone());
            let y = conv1d(&xt, &wt, &bt, stride, padding).unwrap();
            let expect = conv_oracle(&x, &w, &bs, (b, cin, l), (cout, k), stride, padding);
            close(&y.values(), &expect, 1e-10);
        }
    }

    #[test]
    fn conv_rejects_channel_mismatch() {
        let x = Tensor::constant(vec![1, 2, 4], vec![0.0; 8]);
        let w = Tensor::constant(vec![1, 3, 3], vec![0.0; 9]);
        let b = Tensor::constant(vec![1], vec![0.0]);
        assert!(conv1d(&x, &w, &b, 1, 1).is_err());
    }

    #[test]
    fn batchnorm_train_standardizes_channels() {
        use rand::Rng;
        let mut rng = crate::rng::seed_rng(4).stream("bn", 0);
        let (b, c, l) = (4, 3, 5);
        let x: Vec<f64> = (0..b * c * l).map(|_| rng.gen_range(-4.0..4.0)).collect();
        let xt = Tensor::constant(vec![b, c, l], x);
        let gamma = Tensor::constant(vec![c], vec![1.0; c]);
        let beta = Tensor::constant(vec![c], vec![0.0; c]);
        let mut stats = RunningStats::new(c);
        let y = batchnorm1d(&xt, &gamma, &beta, &mut stats, Mode::Train).unwrap();
        let v = y.values();
        let m = (b * l) as f64;
        for ci in 0..c {
            let mut mean = 0.0;
            let mut var = 0.0;
            for bi in 0..b {
                for j in 0..l {
                    mean += v[(bi * c + ci) * l + j];
                }
            }
            mean /= m;
            for bi in 0..b {
                for j in 0..l {
                    let d = v[(bi * c + ci) * l + j] - mean;
                    var += d * d;
                }
            }
            var /= m;
            assert!(mean.abs() < 1e-6, "channel {ci} mean {mean}");
            assert!((var - 1.0).abs() < 1e-3, "channel {ci} var {var}");
        }
    }

    #[test]
    fn batchnorm_constant_channel_goes_to_zero() {
        let x = Tensor::constant(vec![2, 1, 3], vec![5.0; 6]);
        let gamma = Tensor::constant(vec![1], vec![1.0]);
        let beta = Tensor::constant(vec![1], vec![0.0]);
        let mut stats = RunningStats::new(1);
        let y = batchnorm1d(&x, &gamma, &beta, &mut stats, Mode::Train).unwrap();
        for v in y.values() {
            assert!(v.abs() < 1e-9);
        }
    }

    #[test]
    fn batchnorm_train_needs_two_elements() {
        let x = Tensor::constant(vec![1, 2, 1], vec![1.0, 2.0]);
        let gamma = Tensor::constant(vec![2], vec![1.0, 1.0]);
        let beta = Tensor::constant(vec![2], vec![0.0, 0.0]);
        let mut stats = RunningStats::new(2);
        assert!(batchnorm1d(&x, &gamma, &beta, &mut stats, Mode::Train).is_err());
        assert!(batchnorm1d(&x, &gamma, &beta, &mut stats, Mode::Eval).is_ok());
    }

    #[test]
    fn maxpool_basic_and_tie_break() {
        let x = Tensor::parameter(vec![1, 1, 4], vec![1.0, 3.0, 2.0, 4.0]);
        let y = maxpool1d(&x, 2).unwrap();
        assert_eq!(y.values(), vec![3.0, 4.0]);

        let c = Tensor::parameter(vec![1, 1, 4], vec![7.0, 7.0, 7.0, 7.0]);
        let yc = maxpool1d(&c, 2).unwrap();
        assert_eq!(yc.values(), vec![7.0, 7.0]);
        let loss = ops::sum_all(&yc);
        backward(&loss).unwrap();
        // First element of each window takes the gradient on ties.
        assert_eq!(c.grad(), vec![1.0, 0.0, 1.0, 0.0]);
    }

    #[test]
    fn maxpool_rejects_window_larger_than_input() {
        let x = Tensor::constant(vec![1, 1, 3], vec![1.0, 2.0, 3.0]);
        assert!(maxpool1d(&x, 4).is_err());
    }

    #[test]
    fn linear_identity_and_bias_only() {
        let x = Tensor::constant(vec![2, 2], vec![1.0, 2.0, 3.0, 4.0]);
        let eye = Tensor::constant(vec![2, 2], vec![1.0, 0.0, 0.0, 1.0]);
        let zero_b = Tensor::constant(vec![2], vec![0.0, 0.0]);
        assert_eq!(linear(&x, &eye, &zero_b).values(), x.values());

        let zero_w = Tensor::constant(vec![2, 2], vec![0.0; 4]);
        let bias = Tensor::constant(vec![2], vec![5.0, -1.0]);
        assert_eq!(linear(&x, &zero_w, &bias).values(), vec![5.0, -1.0, 5.0, -1.0]);
    }

    #[test]
    fn linear_matches_nested_loop_oracle() {
        use rand::Rng;
        let mut rng = crate::rng::seed_rng(5).stream("lin", 0);
        let (b, d, e) = (3, 4, 2);
        let x: Vec<f64> = (0..b * d).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let w: Vec<f64> = (0..d * e).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let bs: Vec<f64> = (0..e).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y = linear(
            &Tensor::constant(vec![b, d], x.clone()),
            &Tensor::constant(vec![d, e], w.clone()),
            &Tensor::constant(vec![e], bs.clone()),
        );
        let mut expect = vec![0.0; b * e];
        for bi in 0..b {
            for ei in 0..e {
                let mut acc = bs[ei];
                for di in 0..d {
                    acc += x[bi * d + di] * w[di * e + ei];
                }
                expect[bi * e + ei] = acc;
            }
        }
        close(&y.values(), &expect, 1e-12);
    }

    #[test]
    fn softmax_rows_contract() {
        let x = Tensor::constant(vec![2, 2], vec![0.0, 0.0, 1000.0, 0.0]);
        let y = softmax_rows(&x);
        let v = y.values();
        close(&v[..2], &[0.5, 0.5], 1e-12);
        assert!(v[2] > 1.0 - 1e-12 && v[3] < 1e-12);
        assert!(v.iter().all(|p| p.is_finite()));
    }

    #[test]
    fn softmax_matches_direct_evaluation_at_low_magnitude() {
        use rand::Rng;
        let mut rng = crate::rng::seed_rng(6).stream("sm", 0);
        let row: Vec<f64> = (0..5).map(|_| rng.gen_range(-2.0..2.0)).collect();
        let y = softmax_rows(&Tensor::constant(vec![1, 5], row.clone()));
        let total: f64 = row.iter().map(|v| v.exp()).sum();
        let expect: Vec<f64> = row.iter().map(|v| v.exp() / total).collect();
        close(&y.values(), &expect, 1e-12);
    }
}
