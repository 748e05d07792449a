//! Dense f64 tensors with reverse-mode automatic differentiation.
//!
//! Every loss in the training objective is computed on these tensors and
//! differentiated by replaying a [`Tape`] of recorded operations in reverse.
//! The engine is deliberately small: row-major buffers, 1-D/2-D shapes,
//! single-threaded kernels, and one tape per training step. All arithmetic
//! is 64-bit so gradients can be verified tightly against central finite
//! differences.

mod tape;

pub mod gradcheck;

pub use tape::Tape;

use thiserror::Error;

/// Identifies a node on a specific tape. The tape id guards against using a
/// tensor produced by one tape with another.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NodeId {
    pub(crate) tape: u64,
    pub(crate) index: usize,
}

/// An n-dimensional numeric array (1-D or 2-D in practice), row-major.
///
/// Tensors produced by tape operations carry a `node_id` linking them to the
/// recording tape; detached tensors (constants, fresh data) have `None` and
/// are registered as no-grad leaves when first consumed by a tape op.
#[derive(Debug, Clone)]
pub struct Tensor {
    pub shape: Vec<usize>,
    pub values: Vec<f64>,
    pub requires_grad: bool,
    pub node_id: Option<NodeId>,
}

impl Tensor {
    /// A detached constant tensor.
    pub fn new(values: Vec<f64>, shape: Vec<usize>) -> Self {
        assert_eq!(
            values.len(),
            shape.iter().product::<usize>(),
            "tensor values (len {}) do not match shape {:?}",
            values.len(),
            shape
        );
        Tensor { shape, values, requires_grad: false, node_id: None }
    }

    pub fn scalar(v: f64) -> Self {
        Tensor::new(vec![v], vec![1])
    }

    pub fn zeros(shape: Vec<usize>) -> Self {
        let n = shape.iter().product();
        Tensor::new(vec![0.0; n], shape)
    }

    pub fn numel(&self) -> usize {
        self.values.len()
    }

    pub fn ndim(&self) -> usize {
        self.shape.len()
    }

    /// Number of rows when viewed as a matrix (1 for 1-D tensors).
    pub fn rows(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[0]
        } else {
            1
        }
    }

    /// Number of columns when viewed as a matrix (the full length for 1-D).
    pub fn cols(&self) -> usize {
        if self.shape.len() == 2 {
            self.shape[1]
        } else {
            self.values.len()
        }
    }

    /// Extract the single value of a scalar tensor.
    pub fn item(&self) -> f64 {
        assert_eq!(self.numel(), 1, "item() on non-scalar tensor {:?}", self.shape);
        self.values[0]
    }
}

/// Errors surfaced by tensor operations. Structural misuse (shape or axis
/// mismatches) panics instead, as in other Rust numerics crates.
#[derive(Debug, Error)]
pub enum TensorError {
    #[error("cosine similarity is undefined for a zero-norm vector")]
    ZeroNorm,
    #[error("backward requires a scalar loss, got {numel} elements")]
    NotScalar { numel: usize },
    #[error("tensor was not produced by the active tape")]
    NotOnTape,
    #[error("loss has no non-pad target positions")]
    NoValidTargets,
}
