use std::cell::{Cell, Ref, RefCell, RefMut};
use std::collections::HashSet;
use std::fmt;
use std::rc::Rc;

use crate::error::{Result, TensorError};

thread_local! {
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
}

fn fresh_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

/// Backward function of a graph node: receives the gradient flowing into the
/// node's output and the node's parent tensors, and accumulates gradients
/// into whichever parents require them.
pub type BackwardFn = Box<dyn Fn(&[f64], &[Tensor])>;

struct Node {
    parents: Vec<Tensor>,
    backward: BackwardFn,
}

struct Inner {
    id: u64,
    shape: Vec<usize>,
    storage: Rc<RefCell<Vec<f64>>>,
    requires_grad: bool,
    grad: RefCell<Option<Vec<f64>>>,
    node: RefCell<Option<Node>>,
}

/// A dense, row-major tensor of `f64` values participating in a dynamic
/// reverse-mode autodiff graph.
///
/// `Tensor` is a cheap handle (`Rc` clone). Results of operations on tensors
/// that require gradients record a graph node holding their parents and a
/// backward closure; [`Tensor::backward`] walks the recorded graph once in
/// reverse topological order. Scalars are tensors of shape `[]` (one
/// element).
///
/// The graph is single-use: backward consumes the recorded nodes as it walks
/// them, which releases intermediate buffers eagerly. Leaf tensors keep
/// their accumulated gradients until [`Tensor::zero_grad`] is called.
#[derive(Clone)]
pub struct Tensor {
    inner: Rc<Inner>,
}

impl Tensor {
    fn new_inner(
        storage: Rc<RefCell<Vec<f64>>>,
        shape: Vec<usize>,
        requires_grad: bool,
        node: Option<Node>,
    ) -> Tensor {
        Tensor {
            inner: Rc::new(Inner {
                id: fresh_id(),
                shape,
                storage,
                requires_grad,
                grad: RefCell::new(None),
                node: RefCell::new(node),
            }),
        }
    }

    /// Leaf tensor from data; does not require gradients.
    pub fn from_vec(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(TensorError::shape(
                "from_vec",
                format!("data length {} != product of shape {:?}", data.len(), shape),
            ));
        }
        Ok(Self::new_inner(
            Rc::new(RefCell::new(data)),
            shape.to_vec(),
            false,
            None,
        ))
    }

    /// Leaf tensor that requires gradients (a trainable parameter).
    pub fn param(data: Vec<f64>, shape: &[usize]) -> Result<Tensor> {
        let numel: usize = shape.iter().product();
        if data.len() != numel {
            return Err(TensorError::shape(
                "param",
                format!("data length {} != product of shape {:?}", data.len(), shape),
            ));
        }
        Ok(Self::new_inner(
            Rc::new(RefCell::new(data)),
            shape.to_vec(),
            true,
            None,
        ))
    }

    /// All-zeros leaf.
    pub fn zeros(shape: &[usize]) -> Tensor {
        let numel: usize = shape.iter().product();
        Self::new_inner(
            Rc::new(RefCell::new(vec![0.0; numel])),
            shape.to_vec(),
            false,
            None,
        )
    }

    /// Leaf filled with a constant.
    pub fn full(shape: &[usize], value: f64) -> Tensor {
        let numel: usize = shape.iter().product();
        Self::new_inner(
            Rc::new(RefCell::new(vec![value; numel])),
            shape.to_vec(),
            false,
            None,
        )
    }

    /// Scalar leaf (shape `[]`).
    pub fn scalar(value: f64) -> Tensor {
        Self::new_inner(Rc::new(RefCell::new(vec![value])), Vec::new(), false, None)
    }

    /// Leaf built by evaluating `f` at each flat index.
    pub fn from_fn(shape: &[usize], mut f: impl FnMut(usize) -> f64) -> Tensor {
        let numel: usize = shape.iter().product();
        let data: Vec<f64> = (0..numel).map(&mut f).collect();
        Self::new_inner(Rc::new(RefCell::new(data)), shape.to_vec(), false, None)
    }

    /// Non-leaf tensor produced by an operation. `backward` receives the
    /// output gradient and `parents`, and must accumulate into each parent
    /// that requires a gradient. If no parent requires gradients the node is
    /// not recorded and the result is a constant.
    pub fn from_op(
        data: Vec<f64>,
        shape: Vec<usize>,
        parents: Vec<Tensor>,
        backward: impl Fn(&[f64], &[Tensor]) + 'static,
    ) -> Tensor {
        let numel: usize = shape.iter().product();
        assert_eq!(data.len(), numel, "from_op: data/shape mismatch");
        Self::from_op_shared(Rc::new(RefCell::new(data)), shape, parents, backward)
    }

    /// Like [`Tensor::from_op`] but takes ownership of an existing storage
    /// cell, so the backward closure may capture a clone of it (e.g. to read
    /// the op's own output during the backward pass).
    pub fn from_op_shared(
        storage: Rc<RefCell<Vec<f64>>>,
        shape: Vec<usize>,
        parents: Vec<Tensor>,
        backward: impl Fn(&[f64], &[Tensor]) + 'static,
    ) -> Tensor {
        let numel: usize = shape.iter().product();
        assert_eq!(storage.borrow().len(), numel, "from_op_shared: data/shape mismatch");
        let requires_grad = parents.iter().any(|p| p.requires_grad());
        let node = if requires_grad {
            Some(Node {
                parents,
                backward: Box::new(backward),
            })
        } else {
            None
        };
        Self::new_inner(storage, shape, requires_grad, node)
    }

    /// View sharing this tensor's storage but cut off from the graph:
    /// no gradient requirement, no recorded node.
    pub fn detach(&self) -> Tensor {
        Self::new_inner(
            Rc::clone(&self.inner.storage),
            self.inner.shape.clone(),
            false,
            None,
        )
    }

    pub(crate) fn storage_rc(&self) -> Rc<RefCell<Vec<f64>>> {
        Rc::clone(&self.inner.storage)
    }

    pub fn id(&self) -> u64 {
        self.inner.id
    }

    pub fn shape(&self) -> &[usize] {
        &self.inner.shape
    }

    pub fn ndim(&self) -> usize {
        self.inner.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.inner.shape.iter().product()
    }

    pub fn requires_grad(&self) -> bool {
        self.inner.requires_grad
    }

    /// Borrow the underlying data (row-major).
    pub fn data(&self) -> Ref<'_, Vec<f64>> {
        self.inner.storage.borrow()
    }

    /// Mutably borrow the underlying data. Intended for leaf updates
    /// (optimizer steps, buffer refills) between graph constructions;
    /// mutating a tensor that a live graph depends on invalidates that
    /// graph's gradients.
    pub fn data_mut(&self) -> RefMut<'_, Vec<f64>> {
        self.inner.storage.borrow_mut()
    }

    /// Copy of the underlying data.
    pub fn to_vec(&self) -> Vec<f64> {
        self.data().clone()
    }

    /// Overwrite the data in place (length must match).
    pub fn set_data(&self, values: &[f64]) -> Result<()> {
        let mut d = self.data_mut();
        if values.len() != d.len() {
            return Err(TensorError::shape(
                "set_data",
                format!("got {} values for tensor of {} elements", values.len(), d.len()),
            ));
        }
        d.copy_from_slice(values);
        Ok(())
    }

    /// Value of a single-element tensor.
    pub fn item(&self) -> Result<f64> {
        if self.numel() != 1 {
            return Err(TensorError::usage(
                "item",
                format!("tensor of shape {:?} is not a scalar", self.shape()),
            ));
        }
        Ok(self.data()[0])
    }

    /// Element at a multi-dimensional index (bounds-checked).
    pub fn at(&self, idx: &[usize]) -> Result<f64> {
        if idx.len() != self.ndim() {
            return Err(TensorError::usage(
                "at",
                format!("index {:?} for shape {:?}", idx, self.shape()),
            ));
        }
        let mut flat = 0usize;
        for (i, (&ix, &dim)) in idx.iter().zip(self.shape()).enumerate() {
            if ix >= dim {
                return Err(TensorError::usage(
                    "at",
                    format!("index {} out of bounds at dim {} (size {})", ix, i, dim),
                ));
            }
            flat = flat * dim + ix;
        }
        Ok(self.data()[flat])
    }

    /// Shape as `(n, c, h, w)`, erroring unless the tensor is 4-D.
    pub fn dims4(&self) -> Result<(usize, usize, usize, usize)> {
        match *self.shape() {
            [n, c, h, w] => Ok((n, c, h, w)),
            _ => Err(TensorError::shape(
                "dims4",
                format!("expected 4-D tensor, got shape {:?}", self.shape()),
            )),
        }
    }

    /// Shape as `(rows, cols)`, erroring unless the tensor is 2-D.
    pub fn dims2(&self) -> Result<(usize, usize)> {
        match *self.shape() {
            [r, c] => Ok((r, c)),
            _ => Err(TensorError::shape(
                "dims2",
                format!("expected 2-D tensor, got shape {:?}", self.shape()),
            )),
        }
    }

    /// Accumulated gradient, if any (same flat layout as the data).
    pub fn grad(&self) -> Option<Vec<f64>> {
        self.inner.grad.borrow().clone()
    }

    /// Drop any accumulated gradient.
    pub fn zero_grad(&self) {
        *self.inner.grad.borrow_mut() = None;
    }

    /// Add `delta` into this tensor's gradient buffer (allocating zeros
    /// first if absent). No-op unless the tensor requires gradients.
    pub fn accumulate_grad(&self, delta: &[f64]) {
        if !self.requires_grad() {
            return;
        }
        self.with_grad_mut(|g| {
            for (gi, di) in g.iter_mut().zip(delta) {
                *gi += *di;
            }
        });
    }

    /// Run `f` on this tensor's gradient buffer, zero-initializing it first
    /// if absent. No-op unless the tensor requires gradients. `f` must add
    /// into the buffer, not overwrite it.
    pub fn with_grad_mut(&self, f: impl FnOnce(&mut [f64])) {
        if !self.requires_grad() {
            return;
        }
        let mut slot = self.inner.grad.borrow_mut();
        let g = slot.get_or_insert_with(|| vec![0.0; self.numel()]);
        f(g);
    }

    /// Error with the first non-finite element, if any.
    pub fn assert_finite(&self) -> Result<()> {
        let data = self.data();
        for (i, &v) in data.iter().enumerate() {
            if !v.is_finite() {
                return Err(TensorError::NonFinite {
                    value: v,
                    index: i,
                    shape: self.shape().to_vec(),
                });
            }
        }
        Ok(())
    }

    /// Reverse-mode sweep from a scalar root: seeds d(root)/d(root) = 1 and
    /// walks the recorded graph once in reverse topological order, leaving
    /// d(root)/d(leaf) in each gradient-requiring leaf.
    ///
    /// Each node is visited exactly once and its record is consumed, so a
    /// graph supports a single backward pass.
    pub fn backward(&self) -> Result<()> {
        if self.numel() != 1 {
            return Err(TensorError::usage(
                "backward",
                format!("root must be a scalar, got shape {:?}", self.shape()),
            ));
        }
        if !self.requires_grad() {
            return Err(TensorError::usage(
                "backward",
                "root does not require gradients (no graph was recorded)",
            ));
        }
        let order = self.topo_order();
        self.accumulate_grad(&[1.0]);
        for t in order.iter().rev() {
            let node = t.inner.node.borrow_mut().take();
            let Some(node) = node else { continue };
            let g = t.inner.grad.borrow_mut().take().ok_or_else(|| {
                TensorError::usage(
                    "backward",
                    "node reached without an accumulated gradient; was this graph already consumed?",
                )
            })?;
            (node.backward)(&g, &node.parents);
        }
        Ok(())
    }

    /// Post-order over the gradient-requiring subgraph; reversing it yields
    /// a valid processing order (every consumer before its inputs).
    fn topo_order(&self) -> Vec<Tensor> {
        let mut order = Vec::new();
        let mut visited: HashSet<u64> = HashSet::new();
        let mut stack: Vec<(Tensor, bool)> = vec![(self.clone(), false)];
        while let Some((t, expanded)) = stack.pop() {
            if expanded {
                order.push(t);
                continue;
            }
            if !t.requires_grad() || !visited.insert(t.id()) {
                continue;
            }
            stack.push((t.clone(), true));
            if let Some(node) = t.inner.node.borrow().as_ref() {
                for p in &node.parents {
                    if p.requires_grad() && !visited.contains(&p.id()) {
                        stack.push((p.clone(), false));
                    }
                }
            }
        }
        order
    }
}

impl fmt::Debug for Tensor {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let data = self.data();
        let preview: Vec<f64> = data.iter().take(8).copied().collect();
        let ell = if data.len() > 8 { ", ..." } else { "" };
        write!(
            f,
            "Tensor(shape={:?}, requires_grad={}, data={:?}{})",
            self.shape(),
            self.requires_grad(),
            preview,
            ell
        )
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn from_vec_rejects_bad_length() {
        assert!(Tensor::from_vec(vec![1.0, 2.0], &[3]).is_err());
    }

    #[test]
    fn scalar_has_empty_shape_and_one_element() {
        let s = Tensor::scalar(2.5);
        assert_eq!(s.shape(), &[] as &[usize]);
        assert_eq!(s.numel(), 1);
        assert_eq!(s.item().unwrap(), 2.5);
    }

    #[test]
    fn detach_shares_storage_but_not_graph() {
        let p = Tensor::param(vec![1.0, 2.0], &[2]).unwrap();
        let d = p.detach();
        assert!(!d.requires_grad());
        p.data_mut()[0] = 7.0;
        assert_eq!(d.to_vec(), vec![7.0, 2.0]);
    }

    #[test]
    fn backward_rejects_non_scalar_root() {
        let p = Tensor::param(vec![1.0, 2.0], &[2]).unwrap();
        assert!(p.backward().is_err());
    }

    #[test]
    fn assert_finite_reports_first_offender() {
        let t = Tensor::from_vec(vec![0.0, f64::NAN, f64::INFINITY], &[3]).unwrap();
        match t.assert_finite() {
            Err(TensorError::NonFinite { index, .. }) => assert_eq!(index, 1),
            other => panic!("expected NonFinite, got {other:?}"),
        }
    }

    #[test]
    fn ids_are_monotonic() {
        let a = Tensor::scalar(0.0);
        let b = Tensor::scalar(0.0);
        assert!(b.id() > a.id());
    }
}
