use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, Vector};
use crate::model::Objective;

/// Explicit quadratic objective `f(x) = x^T A x / 2 + b^T x`.
///
/// The Hessian is `A` everywhere, which makes these problems the reference
/// fixtures for saddle dynamics: an indefinite `A` gives a non-degenerate
/// saddle at the stationary point.
#[derive(Debug, Clone)]
pub struct QuadraticProblem {
    a: SymMatrix,
    b: Vector,
}

impl QuadraticProblem {
    pub fn new(a: SymMatrix, b: Vector) -> Result<Self> {
        if a.dim() != b.len() {
            return Err(Error::Dimension {
                context: "QuadraticProblem linear term",
                expected: a.dim(),
                got: b.len(),
            });
        }
        Ok(Self { a, b })
    }

    pub fn matrix(&self) -> &SymMatrix {
        &self.a
    }

    pub fn linear_term(&self) -> &Vector {
        &self.b
    }

    /// Stationary point `-A^{-1} b` via the dense eigendecomposition.
    pub fn stationary_point(&self) -> Result<Vector> {
        let solved = crate::oracle::newton_update(&self.a, &self.b)?;
        Ok(solved.scaled(-1.0))
    }
}

impl Objective for QuadraticProblem {
    fn dim(&self) -> usize {
        self.a.dim()
    }

    fn loss(&self, x: &Vector) -> Result<f64> {
        check_dim(self.a.dim(), x, "quadratic loss input")?;
        Ok(0.5 * x.dot(&self.a.matvec(x)) + self.b.dot(x))
    }

    fn gradient(&self, x: &Vector) -> Result<Vector> {
        check_dim(self.a.dim(), x, "quadratic gradient input")?;
        Ok(self.a.matvec(x).add(&self.b))
    }

    fn hvp(&self, x: &Vector, v: &Vector) -> Result<Vector> {
        check_dim(self.a.dim(), x, "quadratic hvp input")?;
        check_dim(self.a.dim(), v, "quadratic hvp direction")?;
        Ok(self.a.matvec(v))
    }

    fn dense_hessian(&self, _x: &Vector) -> Result<SymMatrix> {
        Ok(self.a.clone())
    }
}

fn check_dim(expected: usize, v: &Vector, context: &'static str) -> Result<()> {
    if v.len() != expected {
        return Err(Error::Dimension {
            context,
            expected,
            got: v.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identity_quadratic_values() {
        let p = QuadraticProblem::new(SymMatrix::identity(2), Vector::zeros(2)).unwrap();
        let x = Vector::from_vec(vec![3.0, 4.0]);
        assert_eq!(p.loss(&x).unwrap(), 12.5);
        let g = p.gradient(&x).unwrap();
        assert_eq!(g.as_slice(), &[3.0, 4.0]);
    }

    #[test]
    fn hvp_is_matrix_product() {
        let p = QuadraticProblem::new(SymMatrix::diag(&[2.0, -1.0]), Vector::zeros(2)).unwrap();
        let hv = p
            .hvp(&Vector::zeros(2), &Vector::from_vec(vec![1.0, 1.0]))
            .unwrap();
        assert_eq!(hv.as_slice(), &[2.0, -1.0]);
    }

    #[test]
    fn dense_hessian_returns_matrix() {
        let a = SymMatrix::diag(&[4.0, 1.0]);
        let p = QuadraticProblem::new(a.clone(), Vector::zeros(2)).unwrap();
        assert_eq!(p.dense_hessian(&Vector::zeros(2)).unwrap(), a);
    }

    #[test]
    fn dimension_mismatch_rejected() {
        let p = QuadraticProblem::new(SymMatrix::identity(2), Vector::zeros(2)).unwrap();
        assert!(p.loss(&Vector::zeros(3)).is_err());
        assert!(QuadraticProblem::new(SymMatrix::identity(2), Vector::zeros(3)).is_err());
    }
}
