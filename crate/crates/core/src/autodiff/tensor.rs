use std::cell::{Cell, RefCell};
use std::fmt;
use std::rc::Rc;

use super::error::{Result, TensorError};
use crate::scalar::Scalar;

thread_local! {
    static GRAD_ENABLED: Cell<bool> = const { Cell::new(true) };
    static NAN_CHECK: Cell<bool> = const { Cell::new(true) };
    static NEXT_ID: Cell<u64> = const { Cell::new(0) };
}

fn next_id() -> u64 {
    NEXT_ID.with(|c| {
        let id = c.get();
        c.set(id + 1);
        id
    })
}

pub fn is_grad_enabled() -> bool {
    GRAD_ENABLED.with(|c| c.get())
}

/// Runs `f` with graph recording switched to `enabled`, restoring the previous mode afterwards.
pub fn with_grad_mode<R>(enabled: bool, f: impl FnOnce() -> R) -> R {
    struct Restore(bool);
    impl Drop for Restore {
        fn drop(&mut self) {
            GRAD_ENABLED.with(|c| c.set(self.0));
        }
    }
    let _restore = Restore(GRAD_ENABLED.with(|c| c.replace(enabled)));
    f()
}

/// Evaluates `f` without recording any graph.
pub fn no_grad<R>(f: impl FnOnce() -> R) -> R {
    with_grad_mode(false, f)
}

/// Whether backward passes reject NaN/Inf gradients (on by default).
pub fn set_nan_check(enabled: bool) {
    NAN_CHECK.with(|c| c.set(enabled));
}

pub fn nan_check_enabled() -> bool {
    NAN_CHECK.with(|c| c.get())
}

pub(crate) type BackwardFn<T> =
    Box<dyn Fn(&[Tensor<T>], &[bool], &Tensor<T>) -> Result<Vec<Option<Tensor<T>>>>>;

pub(crate) struct GradFn<T: Scalar> {
    pub(crate) name: &'static str,
    pub(crate) inputs: Vec<Tensor<T>>,
    pub(crate) backward: BackwardFn<T>,
}

pub(crate) struct Node<T: Scalar> {
    pub(crate) id: u64,
    pub(crate) data: Vec<T>,
    pub(crate) shape: Vec<usize>,
    pub(crate) requires_grad: bool,
    pub(crate) grad_fn: Option<GradFn<T>>,
    pub(crate) grad: RefCell<Option<Vec<T>>>,
}

/// Dense row-major array that participates in a reverse-mode differentiation graph.
///
/// Cloning is cheap (reference counted); the values are immutable once created.
pub struct Tensor<T: Scalar> {
    pub(crate) node: Rc<Node<T>>,
}

impl<T: Scalar> Clone for Tensor<T> {
    fn clone(&self) -> Self {
        Tensor {
            node: Rc::clone(&self.node),
        }
    }
}

impl<T: Scalar> fmt::Debug for Tensor<T> {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let mut s = f.debug_struct("Tensor");
        s.field("shape", &self.node.shape);
        if self.node.data.len() <= 16 {
            s.field("data", &self.node.data);
        }
        if let Some(g) = &self.node.grad_fn {
            s.field("grad_fn", &g.name);
        }
        s.field("requires_grad", &self.node.requires_grad).finish()
    }
}

pub(crate) fn check_shape(shape: &[usize], len: usize) -> Result<()> {
    if shape.iter().any(|&d| d == 0) || shape.iter().product::<usize>() != len {
        return Err(TensorError::InvalidShape {
            shape: shape.to_vec(),
            len,
        });
    }
    Ok(())
}

impl<T: Scalar> Tensor<T> {
    fn from_parts(data: Vec<T>, shape: Vec<usize>, requires_grad: bool, grad_fn: Option<GradFn<T>>) -> Self {
        Tensor {
            node: Rc::new(Node {
                id: next_id(),
                data,
                shape,
                requires_grad,
                grad_fn,
                grad: RefCell::new(None),
            }),
        }
    }

    /// Constant tensor (no gradient tracking).
    pub fn from_vec(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self::from_parts(data, shape.to_vec(), false, None))
    }

    /// Trainable leaf: gradients accumulate into its grad buffer on `backward`.
    pub fn parameter(data: Vec<T>, shape: &[usize]) -> Result<Self> {
        check_shape(shape, data.len())?;
        Ok(Self::from_parts(data, shape.to_vec(), true, None))
    }

    pub fn scalar(v: T) -> Self {
        Self::from_parts(vec![v], Vec::new(), false, None)
    }

    pub fn full(shape: &[usize], v: T) -> Result<Self> {
        let n = shape.iter().product();
        Self::from_vec(vec![v; n], shape)
    }

    pub fn zeros(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::zero())
    }

    pub fn ones(shape: &[usize]) -> Result<Self> {
        Self::full(shape, T::one())
    }

    /// Same values, cut from the graph.
    pub fn detach(&self) -> Self {
        if !self.node.requires_grad {
            return self.clone();
        }
        Self::from_parts(self.node.data.clone(), self.node.shape.clone(), false, None)
    }

    /// Same values as a fresh gradient-tracking leaf.
    pub fn leaf(&self) -> Self {
        Self::from_parts(self.node.data.clone(), self.node.shape.clone(), true, None)
    }

    pub fn shape(&self) -> &[usize] {
        &self.node.shape
    }

    pub fn rank(&self) -> usize {
        self.node.shape.len()
    }

    pub fn numel(&self) -> usize {
        self.node.data.len()
    }

    pub fn data(&self) -> &[T] {
        &self.node.data
    }

    pub fn to_vec(&self) -> Vec<T> {
        self.node.data.clone()
    }

    pub fn id(&self) -> u64 {
        self.node.id
    }

    /// Value of a one-element tensor.
    pub fn item(&self) -> Result<T> {
        if self.numel() != 1 {
            return Err(TensorError::NonScalarLoss {
                shape: self.shape().to_vec(),
            });
        }
        Ok(self.node.data[0])
    }

    pub fn requires_grad(&self) -> bool {
        self.node.requires_grad
    }

    pub fn is_leaf(&self) -> bool {
        self.node.grad_fn.is_none()
    }

    pub fn op_name(&self) -> Option<&'static str> {
        self.node.grad_fn.as_ref().map(|g| g.name)
    }

    /// Accumulated gradient of a leaf, if any backward pass reached it.
    pub fn grad(&self) -> Option<Tensor<T>> {
        self.node
            .grad
            .borrow()
            .as_ref()
            .map(|g| Self::from_parts(g.clone(), self.node.shape.clone(), false, None))
    }

    pub fn zero_grad(&self) {
        *self.node.grad.borrow_mut() = None;
    }

    pub fn all_finite(&self) -> bool {
        self.node.data.iter().all(|v| v.is_finite())
    }

    /// Records the result of an op. The node joins the graph only when grad mode is on
    /// and at least one input tracks gradients.
    pub(crate) fn record(
        data: Vec<T>,
        shape: Vec<usize>,
        name: &'static str,
        inputs: &[&Tensor<T>],
        backward: impl Fn(&[Tensor<T>], &[bool], &Tensor<T>) -> Result<Vec<Option<Tensor<T>>>> + 'static,
    ) -> Self {
        debug_assert_eq!(shape.iter().product::<usize>(), data.len());
        let track = is_grad_enabled() && inputs.iter().any(|t| t.requires_grad());
        if !track {
            return Self::from_parts(data, shape, false, None);
        }
        let grad_fn = GradFn {
            name,
            inputs: inputs.iter().map(|t| (*t).clone()).collect(),
            backward: Box::new(backward),
        };
        Self::from_parts(data, shape, true, Some(grad_fn))
    }

    pub(crate) fn constant(data: Vec<T>, shape: Vec<usize>) -> Self {
        Self::from_parts(data, shape, false, None)
    }
}

/// Elementwise comparison helper for tests and invariants.
impl<T: Scalar> PartialEq for Tensor<T> {
    fn eq(&self, other: &Self) -> bool {
        self.shape() == other.shape() && self.data() == other.data()
    }
}
