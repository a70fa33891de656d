//! Elementwise, matrix, and reduction operations with recorded gradients.
//!
//! These are the primitives the loss graphs are composed from. Shape
//! mismatches are programmer errors and assert; operations with
//! spec-visible failure modes live in [`super::nn`] and return `Result`.

use super::{kernels, pool, Tensor};

fn same_shape(a: &Tensor, b: &Tensor) {
    assert_eq!(a.shape(), b.shape(), "elementwise op on mismatched shapes");
}

fn map2(a: &Tensor, b: &Tensor, f: impl Fn(f64, f64) -> f64) -> Vec<f64> {
    a.with_values(|av| {
        b.with_values(|bv| {
            let mut out = pool::take_uninit(av.len());
            for ((o, &x), &y) in out.iter_mut().zip(av).zip(bv) {
                *o = f(x, y);
            }
            out
        })
    })
}

fn map1(a: &Tensor, f: impl Fn(f64) -> f64) -> Vec<f64> {
    a.with_values(|av| {
        let mut out = pool::take_uninit(av.len());
        for (o, &x) in out.iter_mut().zip(av) {
            *o = f(x);
        }
        out
    })
}

pub fn add(a: &Tensor, b: &Tensor) -> Tensor {
    same_shape(a, b);
    let values = map2(a, b, |x, y| x + y);
    Tensor::from_op(
        a.shape().to_vec(),
        values,
        vec![a.clone(), b.clone()],
        Box::new(|node| {
            node.with_grad(|dy| {
                node.parent(0).accumulate_grad(dy);
                node.parent(1).accumulate_grad(dy);
            });
        }),
    )
}

pub fn sub(a: &Tensor, b: &Tensor) -> Tensor {
    same_shape(a, b);
    let values = map2(a, b, |x, y| x - y);
    Tensor::from_op(
        a.shape().to_vec(),
        values,
        vec![a.clone(), b.clone()],
        Box::new(|node| {
            node.with_grad(|dy| {
                node.parent(0).accumulate_grad(dy);
                let mut neg = pool::take_uninit(dy.len());
                for (n, &g) in neg.iter_mut().zip(dy) {
                    *n = -g;
                }
                node.parent(1).accumulate_grad_owned(neg);
            });
        }),
    )
}

pub fn mul(a: &Tensor, b: &Tensor) -> Tensor {
    same_shape(a, b);
    let values = map2(a, b, |x, y| x * y);
    Tensor::from_op(
        a.shape().to_vec(),
        values,
        vec![a.clone(), b.clone()],
        Box::new(|node| {
            node.with_grad(|dy| {
                let da = node.parent(1).with_values(|bv| {
                    let mut da = pool::take_uninit(dy.len());
                    for ((d, &g), &y) in da.iter_mut().zip(dy).zip(bv) {
                        *d = g * y;
                    }
                    da
                });
                let db = node.parent(0).with_values(|av| {
                    let mut db = pool::take_uninit(dy.len());
                    for ((d, &g), &x) in db.iter_mut().zip(dy).zip(av) {
                        *d = g * x;
                    }
                    db
                });
                node.parent(0).accumulate_grad_owned(da);
                node.parent(1).accumulate_grad_owned(db);
            });
        }),
    )
}

pub fn scale(a: &Tensor, c: f64) -> Tensor {
    let values = map1(a, |x| c * x);
    Tensor::from_op(
        a.shape().to_vec(),
        values,
        vec![a.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let mut dx = pool::take_uninit(dy.len());
                for (d, &g) in dx.iter_mut().zip(dy) {
                    *d = c * g;
                }
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    )
}

pub fn exp(a: &Tensor) -> Tensor {
    let values = map1(a, f64::exp);
    let saved = values.clone();
    Tensor::from_op(
        a.shape().to_vec(),
        values,
        vec![a.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let mut dx = pool::take_uninit(dy.len());
                for ((d, &g), &y) in dx.iter_mut().zip(dy).zip(&saved) {
                    *d = g * y;
                }
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    )
}

pub fn ln(a: &Tensor) -> Tensor {
    let values = map1(a, f64::ln);
    Tensor::from_op(
        a.shape().to_vec(),
        values,
        vec![a.clone()],
        Box::new(|node| {
            node.with_grad(|dy| {
                let dx = node.parent(0).with_values(|av| {
                    let mut dx = pool::take_uninit(dy.len());
                    for ((d, &g), &x) in dx.iter_mut().zip(dy).zip(av) {
                        *d = g / x;
                    }
                    dx
                });
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    )
}

/// max(x, floor); gradient passes only where x > floor.
pub fn clamp_min(a: &Tensor, floor: f64) -> Tensor {
    let values = map1(a, |x| x.max(floor));
    Tensor::from_op(
        a.shape().to_vec(),
        values,
        vec![a.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let dx = node.parent(0).with_values(|av| {
                    let mut dx = pool::take_uninit(dy.len());
                    for ((d, &g), &x) in dx.iter_mut().zip(dy).zip(av) {
                        *d = if x > floor { g } else { 0.0 };
                    }
                    dx
                });
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    )
}

/// Elementwise product with a constant mask (no gradient into the mask).
pub fn mul_mask(a: &Tensor, mask: &[f64]) -> Tensor {
    assert_eq!(a.len(), mask.len(), "mask length mismatch");
    let values = a.with_values(|av| {
        let mut out = pool::take_uninit(av.len());
        for ((o, &x), &m) in out.iter_mut().zip(av).zip(mask) {
            *o = x * m;
        }
        out
    });
    let mask = mask.to_vec();
    Tensor::from_op(
        a.shape().to_vec(),
        values,
        vec![a.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let mut dx = pool::take_uninit(dy.len());
                for ((d, &g), &m) in dx.iter_mut().zip(dy).zip(&mask) {
                    *d = g * m;
                }
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    )
}

fn dims2(t: &Tensor) -> (usize, usize) {
    let s = t.shape();
    assert_eq!(s.len(), 2, "expected a 2-D tensor, got shape {s:?}");
    (s[0], s[1])
}

/// [m,k] x [k,n] -> [m,n]
pub fn matmul(a: &Tensor, b: &Tensor) -> Tensor {
    let (m, k) = dims2(a);
    let (k2, n) = dims2(b);
    assert_eq!(k, k2, "matmul inner dimensions differ: {k} vs {k2}");
    let values = a.with_values(|av| {
        b.with_values(|bv| {
            let mut out = pool::take_zeroed(m * n);
            for i in 0..m {
                let out_row = &mut out[i * n..(i + 1) * n];
                for (p, &aip) in av[i * k..(i + 1) * k].iter().enumerate() {
                    kernels::axpy(aip, &bv[p * n..(p + 1) * n], out_row);
                }
            }
            out
        })
    });
    Tensor::from_op(
        vec![m, n],
        values,
        vec![a.clone(), b.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                // dA = dY . B^T ; dB = A^T . dY
                let da = node.parent(1).with_values(|bv| {
                    let mut da = pool::take_uninit(m * k);
                    for i in 0..m {
                        let dy_row = &dy[i * n..(i + 1) * n];
                        for p in 0..k {
                            da[i * k + p] = kernels::dot(dy_row, &bv[p * n..(p + 1) * n]);
                        }
                    }
                    da
                });
                let db = node.parent(0).with_values(|av| {
                    let mut db = pool::take_zeroed(k * n);
                    for i in 0..m {
                        let dy_row = &dy[i * n..(i + 1) * n];
                        for (p, &aip) in av[i * k..(i + 1) * k].iter().enumerate() {
                            kernels::axpy(aip, dy_row, &mut db[p * n..(p + 1) * n]);
                        }
                    }
                    db
                });
                node.parent(0).accumulate_grad_owned(da);
                node.parent(1).accumulate_grad_owned(db);
            });
        }),
    )
}

pub fn transpose(a: &Tensor) -> Tensor {
    let (m, n) = dims2(a);
    let values = a.with_values(|av| {
        let mut out = pool::take_uninit(m * n);
        for i in 0..m {
            for j in 0..n {
                out[j * m + i] = av[i * n + j];
            }
        }
        out
    });
    Tensor::from_op(
        vec![n, m],
        values,
        vec![a.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let mut dx = pool::take_uninit(m * n);
                for j in 0..n {
                    for i in 0..m {
                        dx[i * n + j] = dy[j * m + i];
                    }
                }
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    )
}

/// Stacks two matrices with equal column counts: [m1,n] + [m2,n] -> [m1+m2,n].
pub fn concat_rows(a: &Tensor, b: &Tensor) -> Tensor {
    let (m1, n) = dims2(a);
    let (m2, n2) = dims2(b);
    assert_eq!(n, n2, "concat_rows column counts differ");
    let values = a.with_values(|av| {
        b.with_values(|bv| {
            let mut out = pool::take_uninit((m1 + m2) * n);
            out[..m1 * n].copy_from_slice(av);
            out[m1 * n..].copy_from_slice(bv);
            out
        })
    });
    Tensor::from_op(
        vec![m1 + m2, n],
        values,
        vec![a.clone(), b.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                node.parent(0).accumulate_grad(&dy[..m1 * n]);
                node.parent(1).accumulate_grad(&dy[m1 * n..]);
            });
        }),
    )
}

/// Row sums: [m,n] -> [m]
pub fn sum_axis1(a: &Tensor) -> Tensor {
    let (m, n) = dims2(a);
    let values = a.with_values(|av| {
        let mut out = pool::take_uninit(m);
        for i in 0..m {
            out[i] = kernels::sum(&av[i * n..(i + 1) * n]);
        }
        out
    });
    Tensor::from_op(
        vec![m],
        values,
        vec![a.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let mut dx = pool::take_uninit(m * n);
                for i in 0..m {
                    dx[i * n..(i + 1) * n].fill(dy[i]);
                }
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    )
}

/// Column sums: [m,n] -> [n]
pub fn sum_axis0(a: &Tensor) -> Tensor {
    let (m, n) = dims2(a);
    let values = a.with_values(|av| {
        let mut out = pool::take_zeroed(n);
        for i in 0..m {
            kernels::axpy(1.0, &av[i * n..(i + 1) * n], &mut out);
        }
        out
    });
    Tensor::from_op(
        vec![n],
        values,
        vec![a.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let mut dx = pool::take_uninit(m * n);
                for i in 0..m {
                    dx[i * n..(i + 1) * n].copy_from_slice(dy);
                }
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    )
}

pub fn sum_all(a: &Tensor) -> Tensor {
    let total = a.with_values(kernels::sum);
    Tensor::from_op(
        vec![1],
        vec![total],
        vec![a.clone()],
        Box::new(|node| {
            node.with_grad(|dy| {
                let n = node.parent(0).len();
                let mut dx = pool::take_uninit(n);
                dx.fill(dy[0]);
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    )
}

pub fn mean_all(a: &Tensor) -> Tensor {
    let n = a.len();
    scale(&sum_all(a), 1.0 / n as f64)
}

/// Rows scaled to unit Euclidean norm; rows with norm below `1e-12` are
/// treated as having that floor norm (keeps collapsed rows finite).
pub fn l2_normalize_rows(a: &Tensor) -> Tensor {
    const FLOOR: f64 = 1e-12;
    let (m, n) = dims2(a);
    let mut norms = vec![0.0; m];
    let values = a.with_values(|av| {
        let mut out = pool::take_uninit(m * n);
        for i in 0..m {
            let row = &av[i * n..(i + 1) * n];
            let norm = kernels::dot(row, row).sqrt().max(FLOOR);
            norms[i] = norm;
            let inv = 1.0 / norm;
            for (o, &x) in out[i * n..(i + 1) * n].iter_mut().zip(row) {
                *o = x * inv;
            }
        }
        out
    });
    let normalized = values.clone();
    Tensor::from_op(
        vec![m, n],
        values,
        vec![a.clone()],
        Box::new(move |node| {
            node.with_grad(|dy| {
                let mut dx = pool::take_uninit(m * n);
                for i in 0..m {
                    let nr = &normalized[i * n..(i + 1) * n];
                    let gr = &dy[i * n..(i + 1) * n];
                    let proj = kernels::dot(nr, gr);
                    let inv = 1.0 / norms[i];
                    for ((d, &g), &u) in dx[i * n..(i + 1) * n].iter_mut().zip(gr).zip(nr) {
                        *d = (g - u * proj) * inv;
                    }
                }
                node.parent(0).accumulate_grad_owned(dx);
            });
        }),
    )
}
