//! Dense eigendecomposition-based ground truth.
//!
//! Everything here materialises the full matrix and eigendecomposes it, so
//! it is restricted to desk scale. These routines serve two purposes: they
//! are the oracles the series implementation is validated against, and they
//! power the exact saddle-free Newton baselines.

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, DenseMatrix, EigenDecomposition, SymMatrix, Vector};
use crate::series::series_coefficient;

/// Relative eigenvalue floor below which a matrix is treated as singular.
pub const SINGULARITY_REL_TOL: f64 = 1e-12;

/// Dense-assembly dimension guard, matching the model-side Hessian cap.
pub const DENSE_DIM_CAP: usize = 500;

/// Settings for the exact saddle-free update: eigenvalues with magnitude
/// below `eig_threshold` are replaced by `eig_replacement` (applied after
/// taking absolute values), and `damping` is added on top.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SfnOracleConfig {
    pub eig_threshold: f64,
    pub eig_replacement: f64,
    pub damping: f64,
}

impl Default for SfnOracleConfig {
    fn default() -> Self {
        Self {
            eig_threshold: 0.0,
            eig_replacement: 0.0,
            damping: 0.0,
        }
    }
}

impl SfnOracleConfig {
    pub fn validate(&self) -> Result<()> {
        for (name, x) in [
            ("eig_threshold", self.eig_threshold),
            ("eig_replacement", self.eig_replacement),
            ("damping", self.damping),
        ] {
            if !x.is_finite() || x < 0.0 {
                return Err(Error::InvalidConfig(format!(
                    "{name} must be finite and non-negative, got {x}"
                )));
            }
        }
        // a positive threshold with a zero replacement would map small
        // eigenvalues onto an exact singularity
        if self.eig_threshold > 0.0 && self.eig_replacement == 0.0 && self.damping == 0.0 {
            return Err(Error::InvalidConfig(
                "eig_threshold > 0 requires a positive eig_replacement or damping".into(),
            ));
        }
        Ok(())
    }
}

fn guard_invertible(eig: &EigenDecomposition) -> Result<()> {
    let max_abs = eig.max_abs_eigenvalue();
    let min_abs = eig.min_abs_eigenvalue();
    if min_abs <= SINGULARITY_REL_TOL * max_abs || max_abs == 0.0 {
        return Err(Error::SingularMatrix {
            min_abs,
            max_abs,
        });
    }
    Ok(())
}

/// Newton step `H^{-1} g` (the quantity subtracted from the iterate).
pub fn newton_update(h: &SymMatrix, g: &Vector) -> Result<Vector> {
    check_dims(h, g, "newton_update")?;
    let eig = eig_sym(h)?;
    guard_invertible(&eig)?;
    Ok(eig.apply_mapped(|l| 1.0 / l, g))
}

/// `(sqrt(H^2))^{-1} = Q |L|^{-1} Q^T`: the inverse of the Hessian with all
/// eigenvalues replaced by their absolute values.
pub fn exact_abs_inv_sqrt(h: &SymMatrix) -> Result<SymMatrix> {
    let eig = eig_sym(h)?;
    guard_invertible(&eig)?;
    Ok(eig.map_eigenvalues(|l| 1.0 / l.abs()))
}

/// Applies `(sqrt(H^2))^{-1}` to a vector without assembling the matrix.
pub fn exact_abs_inv_sqrt_apply(h: &SymMatrix, g: &Vector) -> Result<Vector> {
    check_dims(h, g, "exact_abs_inv_sqrt_apply")?;
    let eig = eig_sym(h)?;
    guard_invertible(&eig)?;
    Ok(eig.apply_mapped(|l| 1.0 / l.abs(), g))
}

/// Exact saddle-free update: eigenvalues are mapped to `|l|`, magnitudes
/// below the threshold are replaced by the configured constant, damping is
/// added, and the result is `Q diag(1 / (|l|' + damping)) Q^T g`.
pub fn exact_sfn_update(h: &SymMatrix, g: &Vector, cfg: &SfnOracleConfig) -> Result<Vector> {
    check_dims(h, g, "exact_sfn_update")?;
    cfg.validate()?;
    let eig = eig_sym(h)?;
    Ok(eig.apply_mapped(
        |l| {
            let mut a = l.abs();
            if a < cfg.eig_threshold {
                a = cfg.eig_replacement;
            }
            1.0 / (a + cfg.damping)
        },
        g,
    ))
}

/// The `K`-term truncation of the inverse-square-root series assembled as a
/// dense matrix:
/// `V^{-1/2} sum_{k<K} binom(2k,k)/4^k (I - H^2/V)^k`.
///
/// With `V` above the largest eigenvalue of `H^2` every truncation is
/// positive semi-definite, which is what makes the limit the principal
/// (rather than an arbitrary) square root.
pub fn matrix_series_truncated(h: &SymMatrix, v: f64, terms: usize) -> Result<SymMatrix> {
    if h.dim() > DENSE_DIM_CAP {
        return Err(Error::Capacity {
            limit: DENSE_DIM_CAP,
            got: h.dim(),
        });
    }
    if !(v.is_finite() && v > 0.0) {
        return Err(Error::InvalidConfig(format!(
            "scaling factor must be positive, got {v}"
        )));
    }
    if terms == 0 {
        return Err(Error::InvalidConfig("series needs at least one term".into()));
    }
    let n = h.dim();
    let hd = h.to_dense();
    // Z = I - H^2 / V
    let mut z = hd.matmul(&hd);
    for (i, x) in z.as_mut_slice().iter_mut().enumerate() {
        *x = -*x / v;
        if i % (n + 1) == 0 {
            *x += 1.0;
        }
    }

    let mut acc = DenseMatrix::identity(n); // c_0 = 1
    let mut power = DenseMatrix::identity(n);
    for k in 1..terms {
        power = power.matmul(&z);
        let c = series_coefficient(k);
        for (a, p) in acc.as_mut_slice().iter_mut().zip(power.as_slice()) {
            *a += c * p;
        }
    }
    let scale = 1.0 / v.sqrt();
    for a in acc.as_mut_slice() {
        *a *= scale;
    }
    Ok(SymMatrix::symmetrized(&acc))
}

/// Exponentially decaying curvature average `beta * current + (1 - beta) *
/// previous`.
pub fn curvature_ema(current: &SymMatrix, previous: &SymMatrix, beta: f64) -> Result<SymMatrix> {
    if !(0.0..=1.0).contains(&beta) {
        return Err(Error::InvalidConfig(format!(
            "EMA decay must lie in [0, 1], got {beta}"
        )));
    }
    current.linear_combination(beta, 1.0 - beta, previous)
}

fn check_dims(h: &SymMatrix, g: &Vector, context: &'static str) -> Result<()> {
    if h.dim() != g.len() {
        return Err(Error::Dimension {
            context,
            expected: h.dim(),
            got: g.len(),
        });
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{random_symmetric, random_vector, spectral_norm};
    use crate::rng::SplitMix64;

    #[test]
    fn newton_identity_and_diagonal() {
        let g = Vector::from_vec(vec![5.0, -2.0]);
        let x = newton_update(&SymMatrix::identity(2), &g).unwrap();
        assert_eq!(x.as_slice(), &[5.0, -2.0]);

        let h = SymMatrix::diag(&[2.0, -1.0]);
        let x = newton_update(&h, &Vector::from_vec(vec![2.0, 1.0])).unwrap();
        assert!((x[0] - 1.0).abs() < 1e-14);
        assert!((x[1] + 1.0).abs() < 1e-14);
    }

    #[test]
    fn newton_residual_on_random_spd() {
        let mut rng = SplitMix64::new(7);
        let base = random_symmetric(8, &mut rng);
        // shift to positive definite
        let shift = spectral_norm(&base).unwrap() + 1.0;
        let spd = base
            .linear_combination(1.0, shift, &SymMatrix::identity(8))
            .unwrap();
        let g = random_vector(8, &mut rng);
        let x = newton_update(&spd, &g).unwrap();
        let residual = spd.matvec(&x).sub(&g).norm2() / g.norm2();
        assert!(residual < 1e-8, "residual {residual:.3e}");
    }

    #[test]
    fn newton_rejects_singular() {
        let h = SymMatrix::diag(&[1.0, 0.0]);
        assert!(matches!(
            newton_update(&h, &Vector::from_vec(vec![1.0, 1.0])),
            Err(Error::SingularMatrix { .. })
        ));
    }

    #[test]
    fn abs_inv_sqrt_diagonal() {
        let h = SymMatrix::diag(&[2.0, -1.0]);
        let m = exact_abs_inv_sqrt(&h).unwrap();
        assert!((m[(0, 0)] - 0.5).abs() < 1e-14);
        assert!((m[(1, 1)] - 1.0).abs() < 1e-14);
        assert!(m[(0, 1)].abs() < 1e-14);
    }

    #[test]
    fn abs_inv_sqrt_is_plain_inverse_on_spd() {
        let mut rng = SplitMix64::new(21);
        let base = random_symmetric(6, &mut rng);
        let shift = spectral_norm(&base).unwrap() + 0.5;
        let spd = base
            .linear_combination(1.0, shift, &SymMatrix::identity(6))
            .unwrap();
        let inv_abs = exact_abs_inv_sqrt(&spd).unwrap();
        let prod = inv_abs.to_dense().matmul(&spd.to_dense());
        for i in 0..6 {
            for j in 0..6 {
                let target = if i == j { 1.0 } else { 0.0 };
                assert!((prod[(i, j)] - target).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn abs_inv_sqrt_squares_back_to_h2() {
        let mut rng = SplitMix64::new(33);
        let h = random_symmetric(16, &mut rng);
        let m = exact_abs_inv_sqrt(&h).unwrap();
        // (m^{-1})^2 should reconstruct H^2
        let m_inv = eig_sym(&m)
            .unwrap()
            .map_eigenvalues(|l| 1.0 / l);
        let back = m_inv.to_dense().matmul(&m_inv.to_dense());
        let h2 = h.to_dense().matmul(&h.to_dense());
        let mut num = 0.0;
        let mut den = 0.0;
        for (a, b) in back.as_slice().iter().zip(h2.as_slice()) {
            num += (a - b) * (a - b);
            den += b * b;
        }
        let rel = (num / den).sqrt();
        assert!(rel < 1e-7, "relative reconstruction error {rel:.3e}");
    }

    #[test]
    fn sfn_update_with_replacement() {
        // |eigenvalues| = (3, 2, 1e-9); the smallest is replaced by 1e-2
        let h = SymMatrix::diag(&[3.0, -2.0, 1e-9]);
        let cfg = SfnOracleConfig {
            eig_threshold: 1e-4,
            eig_replacement: 1e-2,
            damping: 0.0,
        };
        let g = Vector::from_vec(vec![3.0, 2.0, 1e-2]);
        let u = exact_sfn_update(&h, &g, &cfg).unwrap();
        for i in 0..3 {
            assert!((u[i] - 1.0).abs() < 1e-9, "component {i}: {}", u[i]);
        }
    }

    #[test]
    fn sfn_update_zero_threshold_matches_abs_inverse() {
        let mut rng = SplitMix64::new(77);
        let h = random_symmetric(10, &mut rng);
        let g = random_vector(10, &mut rng);
        let u = exact_sfn_update(&h, &g, &SfnOracleConfig::default()).unwrap();
        let direct = exact_abs_inv_sqrt_apply(&h, &g).unwrap();
        let err = u.sub(&direct).norm2() / direct.norm2();
        assert!(err < 1e-9, "mismatch {err:.3e}");
    }

    #[test]
    fn sfn_update_reverses_concave_direction() {
        // on a saddle the convex component descends and the concave one is
        // negated rather than followed
        let h = SymMatrix::diag(&[1.0, -1.0]);
        let g = Vector::from_vec(vec![1.0, 1.0]);
        let u = exact_sfn_update(&h, &g, &SfnOracleConfig::default()).unwrap();
        assert!((u[0] - 1.0).abs() < 1e-12);
        assert!((u[1] - 1.0).abs() < 1e-12);
        // Newton, by contrast, solves H x = g exactly toward the saddle
        let newton = newton_update(&h, &g).unwrap();
        assert!((newton[0] - 1.0).abs() < 1e-12);
        assert!((newton[1] + 1.0).abs() < 1e-12);
    }

    #[test]
    fn saddle_iteration_zeroes_convex_and_doubles_concave() {
        // pure quadratic with H = diag(l+, -l-): one exact step maps the
        // convex coordinate to zero and doubles the concave one
        let h = SymMatrix::diag(&[1.7, -0.6]);
        let mut x = Vector::from_vec(vec![0.9, -0.4]);
        let g = h.matvec(&x);
        let u = exact_sfn_update(&h, &g, &SfnOracleConfig::default()).unwrap();
        x = x.sub(&u);
        assert!(x[0].abs() < 1e-12);
        assert!((x[1] - 2.0 * -0.4).abs() < 1e-12);
        // and again: the concave coordinate keeps doubling
        let g = h.matvec(&x);
        let u = exact_sfn_update(&h, &g, &SfnOracleConfig::default()).unwrap();
        x = x.sub(&u);
        assert!((x[1] - 4.0 * -0.4).abs() < 1e-12);
    }

    #[test]
    fn truncated_series_single_term() {
        let h = SymMatrix::diag(&[3.0, 1.0]);
        let v = 25.0;
        let m = matrix_series_truncated(&h, v, 1).unwrap();
        for i in 0..2 {
            assert!((m[(i, i)] - 0.2).abs() < 1e-14);
        }
        assert!(m[(0, 1)].abs() < 1e-15);
    }

    #[test]
    fn truncated_series_is_psd_above_threshold() {
        let mut rng = SplitMix64::new(404);
        for _ in 0..5 {
            let h = random_symmetric(8, &mut rng);
            let v = 1.05 * spectral_norm(&h).unwrap().powi(2);
            for terms in [1, 2, 5, 20] {
                let m = matrix_series_truncated(&h, v, terms).unwrap();
                let min_eig = eig_sym(&m).unwrap().eigenvalues[0];
                assert!(min_eig > -1e-10, "terms {terms}: min eigenvalue {min_eig:.3e}");
            }
        }
    }

    #[test]
    fn truncated_series_converges_to_exact() {
        let mut rng = SplitMix64::new(505);
        let h = crate::linalg::random_sym_bounded_spectrum(8, 1.0, 2.0, &mut rng);
        let v = 1.5 * spectral_norm(&h).unwrap().powi(2);
        let exact = exact_abs_inv_sqrt(&h).unwrap();
        let mut last_err = f64::INFINITY;
        for terms in [4, 16, 64] {
            let m = matrix_series_truncated(&h, v, terms).unwrap();
            let err = m
                .linear_combination(1.0, -1.0, &exact)
                .unwrap()
                .frobenius_norm()
                / exact.frobenius_norm();
            assert!(err < last_err, "error must decrease: {err:.3e} vs {last_err:.3e}");
            last_err = err;
        }
        assert!(last_err < 1e-4, "final error {last_err:.3e}");
    }

    #[test]
    fn curvature_ema_endpoints() {
        let cur = SymMatrix::identity(3);
        let prev = SymMatrix::zeros(3);
        assert_eq!(curvature_ema(&cur, &prev, 1.0).unwrap(), cur);
        assert_eq!(curvature_ema(&cur, &prev, 0.0).unwrap(), prev);
        let mixed = curvature_ema(&cur, &prev, 0.95).unwrap();
        assert!((mixed[(0, 0)] - 0.95).abs() < 1e-15);
    }

    #[test]
    fn oracle_config_validation() {
        assert!(SfnOracleConfig::default().validate().is_ok());
        let bad = SfnOracleConfig {
            eig_threshold: 1e-4,
            eig_replacement: 0.0,
            damping: 0.0,
        };
        assert!(bad.validate().is_err());
        // replacement below the threshold is a legitimate configuration
        let loose = SfnOracleConfig {
            eig_threshold: 5.2e-4,
            eig_replacement: 1.54e-4,
            damping: 0.0,
        };
        assert!(loose.validate().is_ok());
    }
}
