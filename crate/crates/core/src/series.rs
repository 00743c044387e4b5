//! Truncated inverse-square-root series of Hessian-vector products.
//!
//! The saddle-free preconditioned gradient `(H^2)^{-1/2} g` expands, for a
//! scaling factor `V` exceeding half the largest eigenvalue of `H^2`, as
//!
//! ```text
//! (H^2)^{-1/2} g = V^{-1/2} * sum_k  binom(2k, k) / 4^k * (I - H^2 / V)^k g
//! ```
//!
//! Each term follows from the previous one with two Hessian-vector products,
//! so a `K`-term truncation costs `2(K-1)` oracle calls and never touches
//! the Hessian itself. An optional Tikhonov term replaces `H^2` by
//! `H^2 + damping * I`, so the series targets `(H^2 + damping I)^{-1/2} g`,
//! which keeps every truncation positive semi-definite and bounds the
//! condition number.
//!
//! `V` is adapted with the cheap lower bound `|H^2 g| / |g|` and can only
//! grow during a run ([`SeriesState::update_v`]). Partial sums are
//! optionally extrapolated with the modified epsilon algorithm from
//! [`crate::accel`].

use std::collections::VecDeque;

use crate::accel;
use crate::error::{Error, Result};
use crate::linalg::{SymMatrix, Vector};

/// Abort threshold: a step fails once a term norm exceeds this multiple of
/// the gradient norm.
pub const DIVERGENCE_FACTOR: f64 = 1e6;

/// Default initial scaling factor.
pub const DEFAULT_V_INIT: f64 = 100.0;

/// The only Hessian access the series is allowed: `v -> H v` at the current
/// parameters.
pub trait HvpOracle {
    fn apply(&mut self, v: &Vector) -> Result<Vector>;
}

impl<F> HvpOracle for F
where
    F: FnMut(&Vector) -> Result<Vector>,
{
    fn apply(&mut self, v: &Vector) -> Result<Vector> {
        self(v)
    }
}

/// Hessian-vector products against an explicit symmetric matrix; the
/// reference oracle for tests and desk-scale experiments.
#[derive(Debug, Clone)]
pub struct DenseHvp<'a> {
    matrix: &'a SymMatrix,
}

impl<'a> DenseHvp<'a> {
    pub fn new(matrix: &'a SymMatrix) -> Self {
        Self { matrix }
    }
}

impl HvpOracle for DenseHvp<'_> {
    fn apply(&mut self, v: &Vector) -> Result<Vector> {
        if v.len() != self.matrix.dim() {
            return Err(Error::Dimension {
                context: "dense hvp",
                expected: self.matrix.dim(),
                got: v.len(),
            });
        }
        Ok(self.matrix.matvec(v))
    }
}

/// `H (H v) + damping * v` — two oracle calls.
pub fn damped_squared_hvp(
    oracle: &mut impl HvpOracle,
    v: &Vector,
    damping: f64,
) -> Result<Vector> {
    let hv = oracle.apply(v)?;
    let mut h2v = oracle.apply(&hv)?;
    if damping != 0.0 {
        h2v.axpy(damping, v);
    }
    Ok(h2v)
}

/// Series truncation and acceleration settings.
#[derive(Debug, Clone, PartialEq)]
pub struct SeriesConfig {
    /// Number of series terms `K` (counting the leading `g` term).
    pub terms: usize,
    /// Acceleration order `N`; `0` disables extrapolation.
    pub accel_order: usize,
    /// Tikhonov damping added to `H^2` inside the oracle.
    pub damping: f64,
    /// Initial scaling factor.
    pub v_init: f64,
}

impl Default for SeriesConfig {
    fn default() -> Self {
        Self {
            terms: 10,
            accel_order: 0,
            damping: 0.0,
            v_init: DEFAULT_V_INIT,
        }
    }
}

impl SeriesConfig {
    pub fn validate(&self) -> Result<()> {
        if self.terms < 1 {
            return Err(Error::InvalidConfig("series needs at least one term".into()));
        }
        if self.terms - 1 < 2 * self.accel_order {
            return Err(Error::InvalidConfig(format!(
                "acceleration order {} needs at least {} terms, got {}",
                self.accel_order,
                2 * self.accel_order + 1,
                self.terms
            )));
        }
        if !(self.v_init.is_finite() && self.v_init > 0.0) {
            return Err(Error::InvalidConfig("v_init must be positive".into()));
        }
        if !(self.damping.is_finite() && self.damping >= 0.0) {
            return Err(Error::InvalidConfig("damping must be non-negative".into()));
        }
        Ok(())
    }
}

/// Running state of the series across optimisation steps: the scaling
/// factor (monotone within a run) plus the last step's term index, final
/// term, term norms and trailing partial-sum window.
#[derive(Debug, Clone)]
pub struct SeriesState {
    v: f64,
    term_index: usize,
    current_term: Option<Vector>,
    sums_window: VecDeque<Vector>,
    last_term_norms: Vec<f64>,
}

impl SeriesState {
    pub fn new(v_init: f64) -> Self {
        assert!(v_init > 0.0, "scaling factor must be positive");
        Self {
            v: v_init,
            term_index: 0,
            current_term: None,
            sums_window: VecDeque::new(),
            last_term_norms: Vec::new(),
        }
    }

    pub fn v(&self) -> f64 {
        self.v
    }

    /// `V <- max(V, bound)`: the scaling factor never decreases in a run.
    pub fn update_v(&mut self, bound: f64) {
        if bound.is_finite() {
            self.v = self.v.max(bound);
        }
    }

    pub fn term_index(&self) -> usize {
        self.term_index
    }

    pub fn current_term(&self) -> Option<&Vector> {
        self.current_term.as_ref()
    }

    pub fn sums_window(&self) -> &VecDeque<Vector> {
        &self.sums_window
    }
}

/// Coefficient `binom(2k, k) / 4^k` of the binomial expansion of
/// `(1 - z)^{-1/2}`, evaluated by the overflow-free ratio recurrence
/// `c_k = c_{k-1} (2k - 1) / (2k)`.
pub fn series_coefficient(k: usize) -> f64 {
    let mut c = 1.0;
    for i in 1..=k {
        let i = i as f64;
        c *= (2.0 * i - 1.0) / (2.0 * i);
    }
    c
}

/// One recursion step: from `a_{k-1}` to
/// `a_k = (2k - 1)/(2k) * (a_{k-1} - (H^2 a_{k-1} + damping a_{k-1}) / V)`.
///
/// With zero damping this is exactly the term recursion of the series; the
/// coefficient ratio `2k(2k-1)/(4k^2)` simplifies to `(2k-1)/(2k)`.
pub fn next_term(
    a_prev: &Vector,
    k: usize,
    v: f64,
    oracle: &mut impl HvpOracle,
    damping: f64,
) -> Result<Vector> {
    debug_assert!(k >= 1, "term recursion starts at k = 1");
    debug_assert!(v > 0.0);
    let h2a = damped_squared_hvp(oracle, a_prev, damping)?;
    let kf = k as f64;
    let ratio = (2.0 * kf - 1.0) / (2.0 * kf);
    let mut term = a_prev.clone();
    term.axpy(-1.0 / v, &h2a);
    term.scale_in_place(ratio);
    if !term.all_finite() {
        return Err(Error::NumericFailure {
            term: k,
            prev_norm: a_prev.norm2(),
        });
    }
    Ok(term)
}

/// Lower bound on the largest eigenvalue of `H^2` from a product the
/// algorithm already has: `|H^2 g| / |g|`. Sub-multiplicativity guarantees
/// the bound never exceeds the true largest eigenvalue.
pub fn v_lower_bound(g: &Vector, h2g: &Vector) -> Result<f64> {
    let gn = g.norm2();
    if gn == 0.0 {
        return Err(Error::GradientVanished);
    }
    Ok(h2g.norm2() / gn)
}

/// All partial sums `s_0 .. s_{K-1}` with `s_0 = a_0 = g`.
///
/// Sums are pre-scaling: the `1/sqrt(V)` factor is applied by
/// [`sfn_direction`] when the final update is formed. Expects `state.v` to
/// be already updated for this step.
pub fn partial_sums(
    g: &Vector,
    cfg: &SeriesConfig,
    state: &mut SeriesState,
    oracle: &mut impl HvpOracle,
) -> Result<Vec<Vector>> {
    cfg.validate()?;
    let mut sums = Vec::with_capacity(cfg.terms);
    run_terms(g, cfg, state, oracle, |s| sums.push(s.clone()))?;
    Ok(sums)
}

/// Diagnostics captured while computing one direction.
#[derive(Debug, Clone)]
pub struct SeriesDiagnostics {
    /// Scaling factor actually used.
    pub v: f64,
    pub terms: usize,
    pub accel_order: usize,
    /// `|a_k|` for `k = 0 .. K-1`.
    pub term_norms: Vec<f64>,
    /// Acceleration failed numerically and the unaccelerated sum was used.
    pub accel_fallback: bool,
}

/// A computed update direction with its diagnostics.
#[derive(Debug, Clone)]
pub struct SfnDirection {
    /// Approximation of `(H^2 + damping I)^{-1/2} g`, including the
    /// `1/sqrt(V)` factor.
    pub direction: Vector,
    pub diagnostics: SeriesDiagnostics,
}

/// Computes the saddle-free update direction: `K` series terms, optional
/// order-`N` epsilon acceleration over the trailing `2N + 1` partial sums,
/// then the `1/sqrt(V)` scaling.
///
/// Expects `state.v` to be already updated for this step (the caller owns
/// the `|H^2 g| / |g|` bound through [`v_lower_bound`] and
/// [`SeriesState::update_v`]). A zero gradient short-circuits to a zero
/// direction without touching the oracle or `V`. If acceleration fails
/// numerically the unaccelerated sum `s_{K-1}` is used and the fallback is
/// flagged in the diagnostics.
pub fn sfn_direction(
    g: &Vector,
    cfg: &SeriesConfig,
    state: &mut SeriesState,
    oracle: &mut impl HvpOracle,
) -> Result<SfnDirection> {
    cfg.validate()?;
    if g.norm2() == 0.0 {
        return Ok(SfnDirection {
            direction: Vector::zeros(g.len()),
            diagnostics: SeriesDiagnostics {
                v: state.v,
                terms: cfg.terms,
                accel_order: cfg.accel_order,
                term_norms: vec![0.0],
                accel_fallback: false,
            },
        });
    }

    run_terms(g, cfg, state, oracle, |_| {})?;
    let scale = 1.0 / state.v.sqrt();

    let window: Vec<Vector> = state.sums_window.iter().cloned().collect();
    let unaccelerated = window.last().expect("window is non-empty").clone();

    let (estimate, fallback) = if cfg.accel_order == 0 {
        (unaccelerated, false)
    } else {
        match accel::epsilon_accelerate(&window, cfg.accel_order) {
            Ok(v) if v.all_finite() => (v, false),
            _ => (unaccelerated, true),
        }
    };

    Ok(SfnDirection {
        direction: estimate.scaled(scale),
        diagnostics: SeriesDiagnostics {
            v: state.v,
            terms: cfg.terms,
            accel_order: cfg.accel_order,
            term_norms: state.last_term_norms.clone(),
            accel_fallback: fallback,
        },
    })
}

/// Shared term loop: resets the per-step state, walks `a_0 .. a_{K-1}`
/// maintaining partial sums and the trailing window, and reports every sum
/// to `visit`.
fn run_terms(
    g: &Vector,
    cfg: &SeriesConfig,
    state: &mut SeriesState,
    oracle: &mut impl HvpOracle,
    mut visit: impl FnMut(&Vector),
) -> Result<()> {
    let window_len = 2 * cfg.accel_order + 1;
    let g_norm = g.norm2();

    state.term_index = 0;
    state.sums_window.clear();
    state.last_term_norms.clear();

    let mut term = g.clone();
    let mut sum = g.clone();
    state.last_term_norms.push(term.norm2());
    state.sums_window.push_back(sum.clone());
    visit(&sum);

    for k in 1..cfg.terms {
        term = next_term(&term, k, state.v, oracle, cfg.damping)?;
        let norm = term.norm2();
        if norm > DIVERGENCE_FACTOR * g_norm {
            return Err(Error::NumericFailure {
                term: k,
                prev_norm: norm,
            });
        }
        state.last_term_norms.push(norm);
        sum = sum.add(&term);
        state.sums_window.push_back(sum.clone());
        if state.sums_window.len() > window_len {
            state.sums_window.pop_front();
        }
        visit(&sum);
    }

    state.term_index = cfg.terms - 1;
    state.current_term = Some(term);
    Ok(())
}
