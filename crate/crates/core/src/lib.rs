//! Saddle-free Newton optimisation through a truncated series of
//! Hessian-vector products.
//!
//! A saddle-free Newton step preconditions the gradient by the Hessian with
//! every eigenvalue replaced by its absolute value, which repels the iterate
//! from saddle points instead of attracting it. Since `|H| = (H^2)^{1/2}`,
//! the preconditioner `|H|^{-1} g = (H^2)^{-1/2} g` can be expanded as a
//! binomial series in `I - H^2/V` and evaluated with nothing but
//! Hessian-vector products, so the Hessian is never materialised. This crate
//! provides:
//!
//! - [`linalg`]: dense vectors, symmetric matrices and a Jacobi
//!   eigendecomposition, sized for desk-scale exact oracles;
//! - [`model`]: differentiable objectives (MLPs and explicit quadratics)
//!   exposing loss, gradient and exact Hessian-vector products;
//! - [`series`]: the truncated inverse-square-root series with its adaptive
//!   scaling factor `V`;
//! - [`accel`]: vector sequence acceleration (Wynn's epsilon algorithm with
//!   the Sablonniere multiplier and the Samelson vector inverse);
//! - [`oracle`]: dense eigendecomposition-based ground truth for validation
//!   and exact baselines;
//! - [`optim`]: optimiser step rules (SGD, Adam, series and exact saddle-free
//!   Newton, adaptive damping).

pub mod accel;
pub mod error;
pub mod linalg;
pub mod model;
pub mod optim;
pub mod oracle;
pub mod rng;
pub mod series;

pub use error::Error;
pub use linalg::{DenseMatrix, EigenDecomposition, SymMatrix, Vector};
