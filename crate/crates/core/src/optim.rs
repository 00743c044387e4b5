//! Optimiser step rules.
//!
//! First-order baselines (SGD with heavy-ball momentum, Adam), the
//! series-based saddle-free Newton step in plain and adaptive forms, and the
//! dense exact baselines (absolute-eigenvalue update with and without a
//! curvature average, plain Newton). The adaptive variants solve a 2x2
//! local-model system for the learning rate and momentum each step and adapt
//! the Tikhonov damping with the Levenberg-Marquardt rule.

use crate::error::{Error, Result};
use crate::linalg::{eig_sym, SymMatrix, Vector};
use crate::model::Objective;
use crate::oracle::{curvature_ema, newton_update, SfnOracleConfig};
use crate::series::{
    damped_squared_hvp, sfn_direction, v_lower_bound, HvpOracle, SeriesConfig, SeriesState,
};
use std::cell::Cell;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum OptimizerKind {
    Sgd,
    Adam,
    /// Series-based saddle-free Newton with fixed learning rate and momentum.
    Sfn,
    /// Series-based saddle-free Newton with adaptive learning rate, momentum
    /// and damping.
    SfnAdaptive,
    /// Dense absolute-eigenvalue baseline.
    ExactSfn,
    /// Dense baseline with curvature averaging and adaptive step sizes.
    ExactSfnAdaptive,
    ExactNewton,
}

impl OptimizerKind {
    pub fn is_adaptive(self) -> bool {
        matches!(self, OptimizerKind::SfnAdaptive | OptimizerKind::ExactSfnAdaptive)
    }

    pub fn name(self) -> &'static str {
        match self {
            OptimizerKind::Sgd => "sgd",
            OptimizerKind::Adam => "adam",
            OptimizerKind::Sfn => "sfn",
            OptimizerKind::SfnAdaptive => "sfn_adaptive",
            OptimizerKind::ExactSfn => "exact_sfn",
            OptimizerKind::ExactSfnAdaptive => "exact_sfn_adaptive",
            OptimizerKind::ExactNewton => "exact_newton",
        }
    }
}

#[derive(Debug, Clone)]
pub struct OptimizerConfig {
    pub kind: OptimizerKind,
    pub lr: f64,
    pub momentum: f64,
    pub adam_beta1: f64,
    pub adam_beta2: f64,
    pub adam_eps: f64,
    pub series: SeriesConfig,
    /// Levenberg-Marquardt adjustment factor in (0, 1).
    pub lm_omega: f64,
    /// Starting damping for the adaptive variants.
    pub initial_damping: f64,
    pub oracle: SfnOracleConfig,
    /// Curvature EMA decay for the dense adaptive baseline.
    pub ema_beta: f64,
}

impl Default for OptimizerConfig {
    fn default() -> Self {
        Self {
            kind: OptimizerKind::Sgd,
            lr: 0.01,
            momentum: 0.0,
            adam_beta1: 0.9,
            adam_beta2: 0.999,
            adam_eps: 1e-8,
            series: SeriesConfig::default(),
            lm_omega: 0.95,
            initial_damping: 0.0,
            oracle: SfnOracleConfig::default(),
            ema_beta: 0.95,
        }
    }
}

impl OptimizerConfig {
    pub fn validate(&self) -> Result<()> {
        use OptimizerKind::*;
        if !self.kind.is_adaptive() && !(self.lr.is_finite() && self.lr > 0.0) {
            return Err(Error::InvalidConfig(format!(
                "{} requires a positive learning rate",
                self.kind.name()
            )));
        }
        if !(0.0..1.0).contains(&self.momentum) {
            return Err(Error::InvalidConfig("momentum must lie in [0, 1)".into()));
        }
        if matches!(self.kind, Adam) {
            for (name, b) in [("beta1", self.adam_beta1), ("beta2", self.adam_beta2)] {
                if !(0.0..1.0).contains(&b) {
                    return Err(Error::InvalidConfig(format!("{name} must lie in [0, 1)")));
                }
            }
            if !(self.adam_eps.is_finite() && self.adam_eps > 0.0) {
                return Err(Error::InvalidConfig("adam_eps must be positive".into()));
            }
        }
        if matches!(self.kind, Sfn | SfnAdaptive) {
            self.series.validate()?;
        }
        if matches!(self.kind, ExactSfn | ExactSfnAdaptive) {
            self.oracle.validate()?;
        }
        if self.kind.is_adaptive() {
            if !(self.lm_omega > 0.0 && self.lm_omega < 1.0) {
                return Err(Error::InvalidConfig("lm_omega must lie in (0, 1)".into()));
            }
            if !(self.initial_damping.is_finite() && self.initial_damping >= 0.0) {
                return Err(Error::InvalidConfig("initial_damping must be non-negative".into()));
            }
            if !(0.0..=1.0).contains(&self.ema_beta) {
                return Err(Error::InvalidConfig("ema_beta must lie in [0, 1]".into()));
            }
        }
        Ok(())
    }
}

/// Per-run optimiser state. `velocity` doubles as the previous update
/// `x_t - x_{t-1}` used by the adaptive momentum solve.
#[derive(Debug, Clone)]
pub struct TrainerState {
    pub params: Vector,
    pub velocity: Vector,
    pub lambda: f64,
    pub series: SeriesState,
    pub adam_m: Vector,
    pub adam_v: Vector,
    pub step: usize,
    pub rng_seed: u64,
    /// Running curvature average for the dense adaptive baseline.
    pub curvature: Option<SymMatrix>,
}

impl TrainerState {
    pub fn new(params: Vector, cfg: &OptimizerConfig, rng_seed: u64) -> Self {
        let dim = params.len();
        Self {
            params,
            velocity: Vector::zeros(dim),
            lambda: cfg.initial_damping,
            series: SeriesState::new(cfg.series.v_init),
            adam_m: Vector::zeros(dim),
            adam_v: Vector::zeros(dim),
            step: 0,
            rng_seed,
            curvature: None,
        }
    }
}

/// Events worth logging that occurred inside a step.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepFlag {
    /// Epsilon acceleration failed numerically; unaccelerated sum used.
    AccelFallback,
    /// The series diverged; the step was skipped and damping grew.
    SeriesFailureSkipped,
    /// The 2x2 step-size system was singular; fell back to the 1x1 solve.
    AdaptiveFallback,
    /// The local model predicted no change; damping grew.
    DegenerateModel,
}

impl StepFlag {
    pub fn as_str(self) -> &'static str {
        match self {
            StepFlag::AccelFallback => "accel_fallback",
            StepFlag::SeriesFailureSkipped => "series_failure_skipped",
            StepFlag::AdaptiveFallback => "adaptive_fallback",
            StepFlag::DegenerateModel => "degenerate_model",
        }
    }
}

/// What a step did: the effective step sizes, current damping and scaling
/// factor, flags, the number of Hessian-vector products consumed, and the
/// series diagnostics when a series direction was computed.
#[derive(Debug, Clone)]
pub struct StepInfo {
    pub v: f64,
    pub lambda: f64,
    pub eta: f64,
    pub mu: f64,
    pub flags: Vec<StepFlag>,
    pub oracle_calls: usize,
    pub series_diagnostics: Option<crate::series::SeriesDiagnostics>,
}

impl StepInfo {
    fn plain(eta: f64, mu: f64) -> Self {
        Self {
            v: f64::NAN,
            lambda: f64::NAN,
            eta,
            mu,
            flags: Vec::new(),
            oracle_calls: 0,
            series_diagnostics: None,
        }
    }
}

/// Heavy-ball update on a descent direction `d`:
/// `v' = momentum v - lr d; x' = x + v'`.
pub fn heavy_ball_update(state: &mut TrainerState, direction: &Vector, lr: f64, momentum: f64) {
    state.velocity.scale_in_place(momentum);
    state.velocity.axpy(-lr, direction);
    state.params = state.params.add(&state.velocity);
}

/// Plain SGD with heavy-ball momentum.
pub fn sgd_step(state: &mut TrainerState, g: &Vector, cfg: &OptimizerConfig) -> StepInfo {
    heavy_ball_update(state, g, cfg.lr, cfg.momentum);
    state.step += 1;
    StepInfo::plain(cfg.lr, cfg.momentum)
}

/// Bias-corrected Adam.
pub fn adam_step(state: &mut TrainerState, g: &Vector, cfg: &OptimizerConfig) -> StepInfo {
    let t = (state.step + 1) as i32;
    let (b1, b2) = (cfg.adam_beta1, cfg.adam_beta2);
    for i in 0..g.len() {
        state.adam_m[i] = b1 * state.adam_m[i] + (1.0 - b1) * g[i];
        state.adam_v[i] = b2 * state.adam_v[i] + (1.0 - b2) * g[i] * g[i];
        let m_hat = state.adam_m[i] / (1.0 - b1.powi(t));
        let v_hat = state.adam_v[i] / (1.0 - b2.powi(t));
        state.params[i] -= cfg.lr * m_hat / (v_hat.sqrt() + cfg.adam_eps);
    }
    state.velocity = Vector::zeros(g.len()); // not used by Adam
    state.step += 1;
    StepInfo::plain(cfg.lr, 0.0)
}

/// Result of the adaptive learning-rate/momentum solve.
#[derive(Debug, Clone, Copy)]
pub struct AdaptiveSolve {
    pub eta: f64,
    pub mu: f64,
    /// The 2x2 system was singular and only `eta` was solved for.
    pub fallback_1x1: bool,
    /// Change of the local quadratic model at the solution,
    /// `g . d + d^T C d / 2` for `d = eta delta + mu prev`.
    pub predicted_change: f64,
}

/// Solves the local quadratic model for the step size along the proposed
/// update `delta` and the previous update `prev_step`:
///
/// ```text
/// [eta; mu] = -[[d^T C d, d^T C p], [d^T C p, p^T C p]]^{-1} [g^T d; g^T p]
/// ```
///
/// With no previous step (first iteration) the system degenerates to the
/// 1x1 solve for `eta` alone. A singular 2x2 system falls back to the 1x1
/// solve and is flagged.
pub fn adaptive_lr_momentum(
    delta: &Vector,
    prev_step: &Vector,
    g: &Vector,
    curvature: &mut impl HvpOracle,
) -> Result<AdaptiveSolve> {
    let c_delta = curvature.apply(delta)?;
    let dcd = delta.dot(&c_delta);
    let gd = g.dot(delta);

    let solve_1x1 = |fallback: bool| -> AdaptiveSolve {
        let eta = if dcd > 0.0 { -gd / dcd } else { 0.0 };
        AdaptiveSolve {
            eta,
            mu: 0.0,
            fallback_1x1: fallback,
            predicted_change: eta * gd + 0.5 * eta * eta * dcd,
        }
    };

    if prev_step.norm2() == 0.0 {
        return Ok(solve_1x1(false));
    }

    let c_prev = curvature.apply(prev_step)?;
    let dcp = delta.dot(&c_prev);
    let pcp = prev_step.dot(&c_prev);
    let gp = g.dot(prev_step);

    let det = dcd * pcp - dcp * dcp;
    let scale = dcd.abs().max(pcp.abs()).max(dcp.abs());
    if !det.is_finite() || det.abs() <= 1e-12 * scale * scale || scale == 0.0 {
        return Ok(solve_1x1(true));
    }

    let eta = -(pcp * gd - dcp * gp) / det;
    let mu = -(dcd * gp - dcp * gd) / det;
    let predicted =
        eta * gd + mu * gp + 0.5 * (eta * eta * dcd + 2.0 * eta * mu * dcp + mu * mu * pcp);
    Ok(AdaptiveSolve {
        eta,
        mu,
        fallback_1x1: false,
        predicted_change: predicted,
    })
}

/// Ratio of actual to model-predicted loss change.
pub fn reduction_ratio(f_new: f64, f_old: f64, model_new: f64, model_old: f64) -> Result<f64> {
    let model_change = model_new - model_old;
    if model_change == 0.0 {
        return Err(Error::DegenerateModel);
    }
    Ok((f_new - f_old) / model_change)
}

/// Levenberg-Marquardt damping rule: grow `lambda` by `1/omega` when the
/// model over-promises (`rho < 1/4`), shrink by `omega` when it matches
/// well (`rho > 3/4`), hold otherwise.
pub fn lm_damping_update(rho: f64, lambda: f64, omega: f64) -> f64 {
    debug_assert!(omega > 0.0 && omega < 1.0);
    if rho < 0.25 {
        lambda / omega
    } else if rho > 0.75 {
        omega * lambda
    } else {
        lambda
    }
}

/// One optimisation step of the configured kind.
pub fn optimizer_step(
    state: &mut TrainerState,
    objective: &impl Objective,
    cfg: &OptimizerConfig,
) -> Result<StepInfo> {
    match cfg.kind {
        OptimizerKind::Sgd => {
            let g = objective.gradient(&state.params)?;
            Ok(sgd_step(state, &g, cfg))
        }
        OptimizerKind::Adam => {
            let g = objective.gradient(&state.params)?;
            Ok(adam_step(state, &g, cfg))
        }
        OptimizerKind::Sfn | OptimizerKind::SfnAdaptive => sfn_optimizer_step(state, objective, cfg),
        OptimizerKind::ExactSfn | OptimizerKind::ExactSfnAdaptive | OptimizerKind::ExactNewton => {
            exact_step(state, objective, cfg)
        }
    }
}

/// Series-based saddle-free Newton step.
///
/// Computes the gradient, refreshes the scaling-factor bound from the damped
/// product `H^2 g + damping g`, runs the truncated accelerated series, and
/// applies either a fixed heavy-ball update or the adaptive step-size solve.
/// A numeric failure in the series skips the step, grows the damping one
/// notch and reports [`StepFlag::SeriesFailureSkipped`].
pub fn sfn_optimizer_step(
    state: &mut TrainerState,
    objective: &impl Objective,
    cfg: &OptimizerConfig,
) -> Result<StepInfo> {
    cfg.validate()?;
    let adaptive = cfg.kind.is_adaptive();
    let damping = if adaptive {
        state.lambda
    } else {
        cfg.series.damping
    };

    let x = state.params.clone();
    let g = objective.gradient(&x)?;
    let calls = Cell::new(0usize);
    let xr = &x;
    let obj = &objective;

    let mut flags = Vec::new();
    let mut series_cfg = cfg.series.clone();
    series_cfg.damping = damping;

    let mut diagnostics = None;
    let direction = if g.norm2() == 0.0 {
        Vector::zeros(g.len())
    } else {
        let mut oracle = |u: &Vector| {
            calls.set(calls.get() + 1);
            obj.hvp(xr, u)
        };
        let h2g = damped_squared_hvp(&mut oracle, &g, damping)?;
        let bound = v_lower_bound(&g, &h2g)?;
        state.series.update_v(bound);

        match sfn_direction(&g, &series_cfg, &mut state.series, &mut oracle) {
            Ok(out) => {
                if out.diagnostics.accel_fallback {
                    flags.push(StepFlag::AccelFallback);
                }
                diagnostics = Some(out.diagnostics);
                out.direction
            }
            Err(Error::NumericFailure { .. }) => {
                state.lambda = lm_damping_update(0.0, state.lambda, cfg.lm_omega);
                state.step += 1;
                return Ok(StepInfo {
                    v: state.series.v(),
                    lambda: state.lambda,
                    eta: 0.0,
                    mu: 0.0,
                    flags: vec![StepFlag::SeriesFailureSkipped],
                    oracle_calls: calls.get(),
                    series_diagnostics: None,
                });
            }
            Err(e) => return Err(e),
        }
    };

    let (eta, mu) = if !adaptive {
        heavy_ball_update(state, &direction, cfg.lr, cfg.momentum);
        (cfg.lr, cfg.momentum)
    } else {
        let f_old = objective.loss(&x)?;
        let proposed = direction.scaled(-1.0);
        let prev = state.velocity.clone();

        // Curvature operator (H^2 + damping I)^{1/2} applied through the
        // series: invert with the series, multiply back by H^2 + damping I.
        let v_now = state.series.v();
        let mut scratch = SeriesState::new(v_now);
        let mut curvature = |w: &Vector| -> Result<Vector> {
            let mut oracle = |u: &Vector| {
                calls.set(calls.get() + 1);
                obj.hvp(xr, u)
            };
            let inv_half = sfn_direction(w, &series_cfg, &mut scratch, &mut oracle)?;
            damped_squared_hvp(&mut oracle, &inv_half.direction, damping)
        };

        let solve = adaptive_lr_momentum(&proposed, &prev, &g, &mut curvature)?;
        if solve.fallback_1x1 && prev.norm2() > 0.0 {
            flags.push(StepFlag::AdaptiveFallback);
        }

        let mut update = proposed.scaled(solve.eta);
        update.axpy(solve.mu, &prev);
        state.params = state.params.add(&update);
        state.velocity = update;

        let f_new = objective.loss(&state.params)?;
        match reduction_ratio(f_new, f_old, f_old + solve.predicted_change, f_old) {
            Ok(rho) => state.lambda = lm_damping_update(rho, state.lambda, cfg.lm_omega),
            Err(Error::DegenerateModel) => {
                state.lambda = lm_damping_update(0.0, state.lambda, cfg.lm_omega);
                flags.push(StepFlag::DegenerateModel);
            }
            Err(e) => return Err(e),
        }
        (solve.eta, solve.mu)
    };

    state.step += 1;
    Ok(StepInfo {
        v: state.series.v(),
        lambda: state.lambda,
        eta,
        mu,
        flags,
        oracle_calls: calls.get(),
        series_diagnostics: diagnostics,
    })
}

/// Dense-oracle baselines: exact saddle-free update (optionally with a
/// curvature EMA and adaptive step sizes) and plain Newton.
fn exact_step(
    state: &mut TrainerState,
    objective: &impl Objective,
    cfg: &OptimizerConfig,
) -> Result<StepInfo> {
    cfg.validate()?;
    let x = state.params.clone();
    let g = objective.gradient(&x)?;
    let hessian = objective.dense_hessian(&x)?;
    let mut flags = Vec::new();

    let (eta, mu, lambda) = match cfg.kind {
        OptimizerKind::ExactNewton => {
            let update = newton_update(&hessian, &g)?;
            heavy_ball_update(state, &update, cfg.lr, cfg.momentum);
            (cfg.lr, cfg.momentum, state.lambda)
        }
        OptimizerKind::ExactSfn => {
            let update = crate::oracle::exact_sfn_update(&hessian, &g, &cfg.oracle)?;
            heavy_ball_update(state, &update, cfg.lr, cfg.momentum);
            (cfg.lr, cfg.momentum, state.lambda)
        }
        OptimizerKind::ExactSfnAdaptive => {
            let f_old = objective.loss(&x)?;
            // Smooth the curvature, then build the damped saddle-free
            // operator from one eigendecomposition.
            let smoothed = match &state.curvature {
                Some(prev) => curvature_ema(&hessian, prev, cfg.ema_beta)?,
                None => hessian,
            };
            state.curvature = Some(smoothed.clone());
            let eig = eig_sym(&smoothed)?;
            let map_abs = |l: f64| {
                let mut a = l.abs();
                if a < cfg.oracle.eig_threshold {
                    a = cfg.oracle.eig_replacement;
                }
                a + state.lambda
            };
            let proposed = eig.apply_mapped(|l| -1.0 / map_abs(l), &g);
            let prev = state.velocity.clone();
            let mut curvature_op =
                |w: &Vector| -> Result<Vector> { Ok(eig.apply_mapped(map_abs, w)) };
            let solve = adaptive_lr_momentum(&proposed, &prev, &g, &mut curvature_op)?;
            if solve.fallback_1x1 && prev.norm2() > 0.0 {
                flags.push(StepFlag::AdaptiveFallback);
            }

            let mut update = proposed.scaled(solve.eta);
            update.axpy(solve.mu, &prev);
            state.params = state.params.add(&update);
            state.velocity = update;

            let f_new = objective.loss(&state.params)?;
            let lambda = match reduction_ratio(f_new, f_old, f_old + solve.predicted_change, f_old)
            {
                Ok(rho) => lm_damping_update(rho, state.lambda, cfg.lm_omega),
                Err(Error::DegenerateModel) => {
                    flags.push(StepFlag::DegenerateModel);
                    lm_damping_update(0.0, state.lambda, cfg.lm_omega)
                }
                Err(e) => return Err(e),
            };
            state.lambda = lambda;
            (solve.eta, solve.mu, lambda)
        }
        _ => unreachable!("exact_step called with a non-dense optimizer kind"),
    };

    state.step += 1;
    Ok(StepInfo {
        v: state.series.v(),
        lambda,
        eta,
        mu,
        flags,
        oracle_calls: 0,
        series_diagnostics: None,
    })
}
