//! Differentiable objectives.
//!
//! Two model families are provided: multi-layer perceptrons ([`MlpSpec`])
//! and explicit quadratics ([`QuadraticProblem`]). Both expose loss,
//! gradient and an exact Hessian-vector product; the [`Objective`] trait
//! unifies them for the optimisers and the experiment harness.

mod mlp;
mod quadratic;

pub use mlp::{Activation, Batch, LossKind, MlpObjective, MlpSpec, ParamVector, Targets};
pub use quadratic::QuadraticProblem;

use crate::error::{Error, Result};
use crate::linalg::{DenseMatrix, SymMatrix, Vector};

/// Parameter-count ceiling for dense Hessian assembly.
pub const DENSE_HESSIAN_CAP: usize = 500;

/// A twice-differentiable scalar objective over a flat parameter vector.
pub trait Objective {
    /// Number of parameters.
    fn dim(&self) -> usize;

    fn loss(&self, x: &Vector) -> Result<f64>;

    fn gradient(&self, x: &Vector) -> Result<Vector>;

    /// Exact Hessian-vector product at `x`, computed without materialising
    /// the Hessian.
    fn hvp(&self, x: &Vector, v: &Vector) -> Result<Vector>;

    /// Dense Hessian assembled column-by-column from `hvp(e_i)` and
    /// symmetrised as `(H + H^T) / 2`. Guarded by [`DENSE_HESSIAN_CAP`].
    fn dense_hessian(&self, x: &Vector) -> Result<SymMatrix> {
        let n = self.dim();
        if n > DENSE_HESSIAN_CAP {
            return Err(Error::Capacity {
                limit: DENSE_HESSIAN_CAP,
                got: n,
            });
        }
        let mut columns = DenseMatrix::zeros(n, n);
        for j in 0..n {
            let col = self.hvp(x, &Vector::basis(n, j))?;
            for i in 0..n {
                columns[(i, j)] = col[i];
            }
        }
        Ok(SymMatrix::symmetrized(&columns))
    }
}
