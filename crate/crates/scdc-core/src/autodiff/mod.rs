//! Minimal reverse-mode automatic differentiation over dense f64 tensors.
//!
//! Each operation records a node (parents + backward closure) on the output
//! tensor; [`backward`] walks the graph in reverse topological order and
//! accumulates gradients into every reachable tensor that requires them.
//! The engine is single-threaded and everything is 64-bit.

pub mod adam;
pub mod kernels;
pub mod nn;
pub mod ops;
pub mod pool;

use std::cell::{Cell, RefCell};
use std::collections::HashSet;
use std::rc::Rc;

use crate::error::{Error, Result};

pub use adam::AdamState;

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

fn grad_enabled() -> bool {
    GRAD_ENABLED.with(|c| c.get())
}

/// Disables graph recording until dropped (eval-mode forward passes).
pub struct NoGradGuard {
    prev: bool,
}

pub fn no_grad() -> NoGradGuard {
    let prev = GRAD_ENABLED.with(|c| c.replace(false));
    NoGradGuard { prev }
}

impl Drop for NoGradGuard {
    fn drop(&mut self) {
        let prev = self.prev;
        GRAD_ENABLED.with(|c| c.set(prev));
    }
}

type BackwardFn = Box<dyn Fn(&TensorData)>;

pub struct TensorData {
    id: u64,
    shape: Vec<usize>,
    values: RefCell<Vec<f64>>,
    grad: RefCell<Option<Vec<f64>>>,
    parents: Vec<Tensor>,
    backward_fn: Option<BackwardFn>,
    requires_grad: bool,
}

impl Drop for TensorData {
    fn drop(&mut self) {
        pool::give(std::mem::take(&mut *self.values.borrow_mut()));
        if let Some(g) = self.grad.borrow_mut().take() {
            pool::give(g);
        }
    }
}

/// A shared handle to one node of the computation graph.
#[derive(Clone)]
pub struct Tensor {
    data: Rc<TensorData>,
}

impl std::fmt::Debug for Tensor {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("Tensor")
            .field("id", &self.data.id)
            .field("shape", &self.data.shape)
            .field("requires_grad", &self.data.requires_grad)
            .finish()
    }
}

impl Tensor {
    /// A constant leaf; no gradient tracked.
    pub fn constant(shape: Vec<usize>, values: Vec<f64>) -> Tensor {
        assert_eq!(
            shape.iter().product::<usize>(),
            values.len(),
            "shape product must equal buffer length"
        );
        Tensor {
            data: Rc::new(TensorData {
                id: next_id(),
                shape,
                values: RefCell::new(values),
                grad: RefCell::new(None),
                parents: Vec::new(),
                backward_fn: None,
                requires_grad: false,
            }),
        }
    }

    /// A trainable leaf; gradients accumulate here across backward calls.
    pub fn parameter(shape: Vec<usize>, values: Vec<f64>) -> Tensor {
        assert_eq!(shape.iter().product::<usize>(), values.len());
        Tensor {
            data: Rc::new(TensorData {
                id: next_id(),
                shape,
                values: RefCell::new(values),
                grad: RefCell::new(None),
                parents: Vec::new(),
                backward_fn: None,
                requires_grad: true,
            }),
        }
    }

    pub fn scalar(v: f64) -> Tensor {
        Tensor::constant(vec![1], vec![v])
    }

    pub fn zeros(shape: Vec<usize>) -> Tensor {
        let n = shape.iter().product();
        Tensor::constant(shape, vec![0.0; n])
    }

    pub(crate) fn from_op(
        shape: Vec<usize>,
        values: Vec<f64>,
        parents: Vec<Tensor>,
        backward_fn: BackwardFn,
    ) -> Tensor {
        debug_assert_eq!(shape.iter().product::<usize>(), values.len());
        let track = grad_enabled() && parents.iter().any(|p| p.data.requires_grad);
        Tensor {
            data: Rc::new(TensorData {
                id: next_id(),
                shape,
                values: RefCell::new(values),
                grad: RefCell::new(None),
                parents: if track { parents } else { Vec::new() },
                backward_fn: if track { Some(backward_fn) } else { None },
                requires_grad: track,
            }),
        }
    }

    pub fn shape(&self) -> &[usize] {
        &self.data.shape
    }

    pub fn len(&self) -> usize {
        self.data.values.borrow().len()
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn requires_grad(&self) -> bool {
        self.data.requires_grad
    }

    /// Copy of the value buffer.
    pub fn values(&self) -> Vec<f64> {
        self.data.values.borrow().clone()
    }

    /// Runs `f` over the value buffer without copying.
    pub fn with_values<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R {
        f(&self.data.values.borrow())
    }

    /// Overwrites the value buffer (same length). Used by the optimizer and
    /// by finite-difference probes.
    pub fn set_values(&self, values: &[f64]) {
        let mut buf = self.data.values.borrow_mut();
        assert_eq!(buf.len(), values.len());
        buf.copy_from_slice(values);
    }

    /// Mutable access to the value buffer (in-place parameter updates).
    pub fn with_values_mut<R>(&self, f: impl FnOnce(&mut [f64]) -> R) -> R {
        f(&mut self.data.values.borrow_mut())
    }

    pub fn item(&self) -> f64 {
        let v = self.data.values.borrow();
        assert_eq!(v.len(), 1, "item() on non-scalar tensor");
        v[0]
    }

    /// Copy of the gradient buffer; zeros if no gradient reached this tensor.
    pub fn grad(&self) -> Vec<f64> {
        match self.data.grad.borrow().as_ref() {
            Some(g) => g.clone(),
            None => vec![0.0; self.len()],
        }
    }

    /// Runs `f` over the gradient buffer without copying; zeros are passed
    /// when no gradient has reached this tensor.
    pub fn with_grad<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R {
        let slot = self.data.grad.borrow();
        match slot.as_ref() {
            Some(g) => f(g),
            None => f(&vec![0.0; self.len()]),
        }
    }

    pub fn zero_grad(&self) {
        if let Some(g) = self.data.grad.borrow_mut().take() {
            pool::give(g);
        }
    }

    pub(crate) fn accumulate_grad(&self, delta: &[f64]) {
        let mut slot = self.data.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                debug_assert_eq!(g.len(), delta.len());
                kernels::axpy(1.0, delta, g);
            }
            None => {
                let mut buf = pool::take_uninit(delta.len());
                buf.copy_from_slice(delta);
                *slot = Some(buf);
            }
        }
    }

    /// Accumulates by moving `delta` in when this is the first contribution.
    pub(crate) fn accumulate_grad_owned(&self, delta: Vec<f64>) {
        let mut slot = self.data.grad.borrow_mut();
        match slot.as_mut() {
            Some(g) => {
                debug_assert_eq!(g.len(), delta.len());
                kernels::axpy(1.0, &delta, g);
                pool::give(delta);
            }
            None => *slot = Some(delta),
        }
    }

    fn id(&self) -> u64 {
        self.data.id
    }
}

impl TensorData {
    pub fn shape(&self) -> &[usize] {
        &self.shape
    }

    /// Runs `f` over the gradient flowing into this node. Backward closures
    /// are only invoked when a gradient is present.
    pub fn with_grad<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R {
        let slot = self.grad.borrow();
        match slot.as_ref() {
            Some(g) => f(g),
            None => f(&vec![0.0; self.values.borrow().len()]),
        }
    }

    pub fn with_values<R>(&self, f: impl FnOnce(&[f64]) -> R) -> R {
        f(&self.values.borrow())
    }

    pub fn parent(&self, i: usize) -> &Tensor {
        &self.parents[i]
    }
}

/// Populates gradient buffers of every tensor reachable from `loss`.
///
/// `loss` must be a scalar. Interior (op-produced) gradient buffers are
/// cleared at the start of each pass; leaf gradients accumulate across
/// repeated calls until `zero_grad`.
pub fn backward(loss: &Tensor) -> Result<()> {
    if loss.len() != 1 {
        return Err(Error::shape(format!(
            "backward requires a scalar loss, got shape {:?}",
            loss.shape()
        )));
    }
    // Iterative DFS post-order: parents land before their consumers.
    let mut order: Vec<Tensor> = Vec::new();
    let mut visited: HashSet<u64> = HashSet::new();
    let mut stack: Vec<(Tensor, usize)> = vec![(loss.clone(), 0)];
    visited.insert(loss.id());
    while let Some((node, child_ix)) = stack.pop() {
        if child_ix < node.data.parents.len() {
            let next = node.data.parents[child_ix].clone();
            stack.push((node, child_ix + 1));
            if visited.insert(next.id()) {
                stack.push((next, 0));
            }
        } else {
            order.push(node);
        }
    }

    // Interior grads are per-pass scratch; only leaves accumulate across
    // passes.
    for node in &order {
        if node.data.backward_fn.is_some() {
            if let Some(g) = node.data.grad.borrow_mut().take() {
                pool::give(g);
            }
        }
    }

    loss.accumulate_grad(&[1.0]);
    for node in order.iter().rev() {
        if node.data.grad.borrow().is_none() {
            continue;
        }
        if let Some(f) = &node.data.backward_fn {
            f(&node.data);
        }
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::ops;
    use super::*;

    #[test]
    fn backward_of_sum_is_ones() {
        let p = Tensor::parameter(vec![3], vec![1.0, 2.0, 3.0]);
        let loss = ops::sum_all(&p);
        backward(&loss).unwrap();
        assert_eq!(p.grad(), vec![1.0, 1.0, 1.0]);
    }

    #[test]
    fn backward_of_sum_of_squares_is_two_v() {
        let p = Tensor::parameter(vec![3], vec![1.0, -2.0, 0.5]);
        let sq = ops::mul(&p, &p);
        let loss = ops::sum_all(&sq);
        backward(&loss).unwrap();
        assert_eq!(p.grad(), vec![2.0, -4.0, 1.0]);
    }

    #[test]
    fn backward_rejects_non_scalar() {
        let p = Tensor::parameter(vec![2], vec![1.0, 2.0]);
        assert!(backward(&p).is_err());
    }

    #[test]
    fn repeated_backward_accumulates() {
        let p = Tensor::parameter(vec![2], vec![1.0, 1.0]);
        let loss = ops::sum_all(&p);
        backward(&loss).unwrap();
        backward(&loss).unwrap();
        assert_eq!(p.grad(), vec![2.0, 2.0]);
    }

    #[test]
    fn shared_node_gradients_accumulate_across_paths() {
        // loss = sum(p + p) = 2 sum(p)
        let p = Tensor::parameter(vec![2], vec![3.0, 4.0]);
        let s = ops::add(&p, &p);
        let loss = ops::sum_all(&s);
        backward(&loss).unwrap();
        assert_eq!(p.grad(), vec![2.0, 2.0]);
    }

    #[test]
    fn no_grad_suppresses_graph() {
        let p = Tensor::parameter(vec![2], vec![1.0, 2.0]);
        let guard = no_grad();
        let s = ops::mul(&p, &p);
        drop(guard);
        assert!(!s.requires_grad());
        assert!(s.data.backward_fn.is_none());
    }

    #[test]
    fn constants_do_not_record_nodes() {
        let a = Tensor::constant(vec![2], vec![1.0, 2.0]);
        let b = Tensor::constant(vec![2], vec![3.0, 4.0]);
        let c = ops::add(&a, &b);
        assert!(!c.requires_grad());
        assert_eq!(c.values(), vec![4.0, 6.0]);
    }
}
