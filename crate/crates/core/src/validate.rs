//! Parameter derivation and validation.
//!
//! The matrix conditions on `P̂ = diag(η_i I)` and `Q̂ = diag(η'_j I)` are
//! discharged through per-block scalar bounds. Each bound is sufficient, so
//! an accepted config always satisfies the matrix condition it stands for.

use serde::Serialize;

use crate::engine::{Regime, SolverConfig};
use crate::error::{Error, Result};
use crate::linalg::norm2;
use crate::problem::ConstrainedProblem;
use crate::stochastic::{check_stochastic_problem, schedule_check, StepSchedule, FEASIBLE_START_TOL};

/// Inflation applied to every power-iteration eigenvalue estimate.
pub const SAFETY: f64 = 1.01;

/// Relative slack when comparing a weight with its bound.
const REL_TOL: f64 = 1e-12;

pub const COND_SAMPLE_SIZE: &str = "sample-size";
pub const COND_REGIME_SHAPE: &str = "regime-shape";
pub const COND_NONNEGATIVE: &str = "nonnegative-parameters";
pub const COND_RHO_RATIO: &str = "penalty-ratio";
pub const COND_EQUAL_THETA: &str = "equal-sampling-ratio";
pub const COND_FULL_Y: &str = "full-y-sampling";
pub const COND_X_WEIGHT: &str = "x-weight-bound";
pub const COND_Y_WEIGHT: &str = "y-weight-bound";
pub const COND_FEASIBLE_START: &str = "feasible-start";
pub const COND_SINGLE_PENALTY: &str = "single-penalty";

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct Violation {
    pub condition: String,
    pub lhs: f64,
    pub rhs: f64,
    pub message: String,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ValidationReport {
    pub regime: Regime,
    pub ok: bool,
    pub violations: Vec<Violation>,
    pub warnings: Vec<String>,
    pub suggested: Option<SolverConfig>,
}

impl ValidationReport {
    fn new(regime: Regime) -> Self {
        Self {
            regime,
            ok: true,
            violations: Vec::new(),
            warnings: Vec::new(),
            suggested: None,
        }
    }

    fn push(&mut self, condition: impl Into<String>, lhs: f64, rhs: f64, message: impl Into<String>) {
        self.ok = false;
        self.violations.push(Violation {
            condition: condition.into(),
            lhs,
            rhs,
            message: message.into(),
        });
    }

    /// `lhs ≥ rhs` up to rounding.
    fn require_ge(&mut self, condition: String, lhs: f64, rhs: f64, message: impl FnOnce() -> String) {
        if !(lhs >= rhs - REL_TOL * rhs.abs()) {
            self.push(condition, lhs, rhs, message());
        }
    }

    fn require_eq(&mut self, condition: &str, lhs: f64, rhs: f64, message: impl FnOnce() -> String) {
        if !((lhs - rhs).abs() <= REL_TOL * lhs.abs().max(rhs.abs())) {
            self.push(condition, lhs, rhs, message());
        }
    }
}

/// `(2−θ)((1−θ)/θ² + 1)`
pub fn multi_x_coefficient(theta: f64) -> f64 {
    (2.0 - theta) * ((1.0 - theta) / (theta * theta) + 1.0)
}

/// `(2−θ)/θ²`
pub fn multi_y_coefficient(theta: f64) -> f64 {
    (2.0 - theta) / (theta * theta)
}

/// `ρ/θ⁴ − ρ/θ² + ρ_y`
pub fn single_y_coefficient(theta: f64, rho: f64, rho_y: f64) -> f64 {
    rho / theta.powi(4) - rho / (theta * theta) + rho_y
}

/// Spectral quantities the bounds depend on, computed once per problem.
#[derive(Debug, Clone, PartialEq)]
pub struct SpectralData {
    /// ‖A_i‖² per x block
    pub a_block: Vec<f64>,
    /// ‖B_j‖² per y block
    pub b_block: Vec<f64>,
    /// λ_max(AᵀA)
    pub a_full: f64,
    /// λ_max(BᵀB)
    pub b_full: f64,
}

impl SpectralData {
    pub fn of(problem: &ConstrainedProblem) -> Result<Self> {
        let xm = problem.x_map();
        let a_block = (0..problem.num_x_blocks())
            .map(|i| xm.spectral_norm_sq(i))
            .collect::<Result<Vec<_>>>()?;
        let (b_block, b_full) = match problem.y_map() {
            Some(ym) => (
                (0..problem.num_y_blocks())
                    .map(|j| ym.spectral_norm_sq(j))
                    .collect::<Result<Vec<_>>>()?,
                ym.spectral_norm_sq_full(),
            ),
            None => (vec![], 0.0),
        };
        Ok(Self {
            a_block,
            b_block,
            a_full: xm.spectral_norm_sq_full(),
            b_full,
        })
    }
}

/// Smallest admissible weights for a regime, given the penalties.
#[allow(clippy::too_many_arguments)]
fn weight_bounds(
    problem: &ConstrainedProblem,
    spec: &SpectralData,
    regime: Regime,
    n: usize,
    m: usize,
    rho_x: f64,
    rho_y: f64,
    rho: f64,
) -> (Vec<f64>, Vec<f64>) {
    let big_n = problem.num_x_blocks() as f64;
    let theta = n as f64 / big_n;
    let lf = problem.f().lipschitz;
    let lg = problem.g().lipschitz;
    match regime {
        Regime::NoY => {
            let x = spec
                .a_block
                .iter()
                .map(|a| lf + n as f64 * rho_x * SAFETY * a)
                .collect();
            (x, vec![])
        }
        Regime::SingleY => {
            let xb = lf + rho_x * SAFETY * spec.a_full;
            let yb = lg / theta + single_y_coefficient(theta, rho, rho_y) * SAFETY * spec.b_full;
            (vec![xb; spec.a_block.len()], vec![yb; spec.b_block.len()])
        }
        Regime::MultiXY => {
            let cx = multi_x_coefficient(theta);
            let cy = multi_y_coefficient(theta);
            let x = spec
                .a_block
                .iter()
                .map(|a| cx * n as f64 * rho_x * SAFETY * a + lf)
                .collect();
            let y = spec
                .b_block
                .iter()
                .map(|b| cy * m as f64 * rho_y * SAFETY * b + lg)
                .collect();
            (x, y)
        }
    }
}

fn check_regime_shape(problem: &ConstrainedProblem, regime: Regime, n: usize, m: usize) -> Result<()> {
    let big_n = problem.num_x_blocks();
    let big_m = problem.num_y_blocks();
    crate::sampler::check_sample_size(big_n, n)?;
    match regime {
        Regime::NoY if problem.has_y() => Err(Error::param("regime no-y given a problem with y blocks")),
        Regime::SingleY | Regime::MultiXY if !problem.has_y() => Err(Error::param(format!(
            "regime {} needs y blocks; the problem has none",
            regime.name()
        ))),
        Regime::SingleY if m != big_m => Err(Error::param(format!(
            "regime single-y updates every y block: m = {m} must equal M = {big_m}"
        ))),
        Regime::MultiXY => {
            crate::sampler::check_sample_size(big_m, m)?;
            if n * big_m != m * big_n {
                return Err(Error::param(format!(
                    "regime multi-xy needs equal sampling ratios: n/N = {n}/{big_n} differs from m/M = {m}/{big_m}"
                )));
            }
            Ok(())
        }
        _ => Ok(()),
    }
}

/// Penalties from the regime's ratio rule and the smallest scalar weights
/// meeting its bounds. `max_iters` and `seed` are left at zero.
pub fn derive_params(
    problem: &ConstrainedProblem,
    regime: Regime,
    n: usize,
    m: usize,
    rho_x: f64,
) -> Result<SolverConfig> {
    derive_with(problem, &SpectralData::of(problem)?, regime, n, m, rho_x)
}

pub fn derive_with(
    problem: &ConstrainedProblem,
    spec: &SpectralData,
    regime: Regime,
    n: usize,
    m: usize,
    rho_x: f64,
) -> Result<SolverConfig> {
    if !(rho_x > 0.0) || !rho_x.is_finite() {
        return Err(Error::param(format!("rhoX must be positive and finite, got {rho_x}")));
    }
    let m = if regime == Regime::NoY { 0 } else { m };
    check_regime_shape(problem, regime, n, m)?;
    let theta = n as f64 / problem.num_x_blocks() as f64;
    let rho = theta * rho_x;
    let rho_y = match regime {
        Regime::NoY => 0.0,
        Regime::SingleY => rho,
        // ρ = mρ_y/M
        Regime::MultiXY => rho * problem.num_y_blocks() as f64 / m as f64,
    };
    let (eta_x, eta_y) = weight_bounds(problem, spec, regime, n, m, rho_x, rho_y, rho);
    Ok(SolverConfig {
        regime,
        n,
        m,
        rho_x,
        rho_y,
        rho,
        eta_x,
        eta_y,
        max_iters: 0,
        seed: 0,
    })
}

pub fn validate_config(problem: &ConstrainedProblem, config: &SolverConfig) -> Result<ValidationReport> {
    validate_with(problem, &SpectralData::of(problem)?, config)
}

pub fn validate_with(
    problem: &ConstrainedProblem,
    spec: &SpectralData,
    config: &SolverConfig,
) -> Result<ValidationReport> {
    let mut rep = ValidationReport::new(config.regime);
    let big_n = problem.num_x_blocks();
    let big_m = problem.num_y_blocks();
    let regime = config.regime;

    if config.n < 1 || config.n > big_n {
        rep.push(
            COND_SAMPLE_SIZE,
            config.n as f64,
            big_n as f64,
            format!(
                "n = {} violates 1 <= n <= N = {big_n} required by uniform subset sampling",
                config.n
            ),
        );
    }
    if regime != Regime::NoY && (config.m < 1 || config.m > big_m) {
        rep.push(
            COND_SAMPLE_SIZE,
            config.m as f64,
            big_m as f64,
            format!(
                "m = {} violates 1 <= m <= M = {big_m} required by uniform subset sampling",
                config.m
            ),
        );
    }
    match regime {
        Regime::NoY if problem.has_y() => rep.push(
            COND_REGIME_SHAPE,
            big_m as f64,
            0.0,
            "regime no-y given a problem with y blocks",
        ),
        Regime::SingleY | Regime::MultiXY if !problem.has_y() => rep.push(
            COND_REGIME_SHAPE,
            0.0,
            1.0,
            format!("regime {} needs y blocks; the problem has none", regime.name()),
        ),
        _ => {}
    }
    if config.eta_x.len() != big_n || (regime != Regime::NoY && config.eta_y.len() != big_m) {
        rep.push(
            COND_REGIME_SHAPE,
            config.eta_x.len() as f64,
            big_n as f64,
            format!(
                "weight lists have lengths {}/{} but the problem has {big_n} x and {big_m} y blocks",
                config.eta_x.len(),
                config.eta_y.len()
            ),
        );
    }
    for (what, v) in [("rhoX", config.rho_x), ("rhoY", config.rho_y), ("rho", config.rho)] {
        if !(v >= 0.0) || !v.is_finite() {
            rep.push(COND_NONNEGATIVE, v, 0.0, format!("{what} must be finite and nonnegative"));
        }
    }
    for (i, e) in config.eta_x.iter().chain(&config.eta_y).enumerate() {
        if !(*e > 0.0) || !e.is_finite() {
            rep.push(COND_NONNEGATIVE, *e, 0.0, format!("proximal weight #{i} must be positive"));
        }
    }
    if !rep.ok {
        return Ok(rep);
    }
    if config.rho == 0.0 {
        rep.warnings
            .push("rho = 0: the multiplier never moves and the constraint is not enforced".into());
    }

    let theta = config.theta(problem);
    match regime {
        Regime::NoY => {
            rep.require_eq(COND_RHO_RATIO, config.rho, theta * config.rho_x, || {
                format!("rho must equal (n/N)·rhoX = {}", theta * config.rho_x)
            });
        }
        Regime::SingleY => {
            if config.m != big_m {
                rep.push(
                    COND_FULL_Y,
                    config.m as f64,
                    big_m as f64,
                    "regime single-y updates every y block (m = M)",
                );
            }
            rep.require_eq(COND_RHO_RATIO, config.rho, theta * config.rho_x, || {
                format!("rho must equal (n/N)·rhoX = {}", theta * config.rho_x)
            });
            rep.require_eq(COND_RHO_RATIO, config.rho_y, config.rho, || {
                "rhoY must equal rho".to_string()
            });
        }
        Regime::MultiXY => {
            let theta_y = config.m as f64 / big_m as f64;
            if config.n * big_m != config.m * big_n {
                rep.push(
                    COND_EQUAL_THETA,
                    theta,
                    theta_y,
                    format!(
                        "sampling ratios differ: n/N = {}/{big_n}, m/M = {}/{big_m}",
                        config.n, config.m
                    ),
                );
            }
            rep.require_eq(COND_RHO_RATIO, config.rho, theta * config.rho_x, || {
                format!("rho must equal n·rhoX/N = {}", theta * config.rho_x)
            });
            rep.require_eq(COND_RHO_RATIO, config.rho, theta_y * config.rho_y, || {
                format!("rho must equal m·rhoY/M = {}", theta_y * config.rho_y)
            });
        }
    }

    let (bx, by) = weight_bounds(
        problem,
        spec,
        regime,
        config.n,
        config.m,
        config.rho_x,
        config.rho_y,
        config.rho,
    );
    for (i, (eta, bound)) in config.eta_x.iter().zip(&bx).enumerate() {
        rep.require_ge(format!("{COND_X_WEIGHT}[{i}]"), *eta, *bound, || {
            format!("etaX[{i}] = {eta} is below the required {bound}")
        });
    }
    for (j, (eta, bound)) in config.eta_y.iter().zip(&by).enumerate() {
        rep.require_ge(format!("{COND_Y_WEIGHT}[{j}]"), *eta, *bound, || {
            format!("etaY[{j}] = {eta} is below the required {bound}")
        });
    }

    if !rep.ok {
        let m = if regime == Regime::NoY { 0 } else { config.m };
        if let Ok(mut s) = derive_with(problem, spec, regime, config.n, m, config.rho_x.max(f64::MIN_POSITIVE)) {
            s.max_iters = config.max_iters;
            s.seed = config.seed;
            rep.suggested = Some(s);
        }
    }
    Ok(rep)
}

/// Stochastic-engine parameters: `ρ_x = ρ` and `η_i = L_f + ρ·λ_max(AᵀA)`.
pub fn derive_stochastic_params(problem: &ConstrainedProblem, n: usize, rho: f64) -> Result<SolverConfig> {
    check_stochastic_problem(problem)?;
    crate::sampler::check_sample_size(problem.num_x_blocks(), n)?;
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::param(format!("rho must be positive and finite, got {rho}")));
    }
    let bound = stochastic_weight_bound(problem, rho);
    Ok(SolverConfig {
        regime: Regime::NoY,
        n,
        m: 0,
        rho_x: rho,
        rho_y: 0.0,
        rho,
        eta_x: vec![bound; problem.num_x_blocks()],
        eta_y: vec![],
        max_iters: 0,
        seed: 0,
    })
}

fn stochastic_weight_bound(problem: &ConstrainedProblem, rho: f64) -> f64 {
    problem.f().lipschitz + rho * SAFETY * problem.x_map().spectral_norm_sq_full()
}

/// Checks the stochastic engine's requirements: x-only problem, one penalty,
/// the weight bound, a feasible start and the step-size conditions up to
/// `t_max`.
pub fn validate_stochastic(
    problem: &ConstrainedProblem,
    config: &SolverConfig,
    schedule: &StepSchedule,
    t_max: usize,
) -> Result<(ValidationReport, Option<crate::stochastic::ScheduleReport>)> {
    let mut rep = ValidationReport::new(Regime::NoY);
    if let Err(e) = check_stochastic_problem(problem) {
        rep.push(COND_REGIME_SHAPE, problem.num_y_blocks() as f64, 0.0, e.to_string());
        return Ok((rep, None));
    }
    let big_n = problem.num_x_blocks();
    if config.n < 1 || config.n > big_n {
        rep.push(
            COND_SAMPLE_SIZE,
            config.n as f64,
            big_n as f64,
            format!(
                "n = {} violates 1 <= n <= N = {big_n} required by uniform subset sampling",
                config.n
            ),
        );
        return Ok((rep, None));
    }
    if config.eta_x.len() != big_n {
        rep.push(
            COND_REGIME_SHAPE,
            config.eta_x.len() as f64,
            big_n as f64,
            "etaX length differs from the number of x blocks",
        );
        return Ok((rep, None));
    }
    if !(config.rho > 0.0) || !config.rho.is_finite() {
        rep.push(COND_NONNEGATIVE, config.rho, 0.0, "rho must be positive");
        return Ok((rep, None));
    }
    rep.require_eq(COND_SINGLE_PENALTY, config.rho_x, config.rho, || {
        "the stochastic engine needs rhoX = rho".to_string()
    });
    let bound = stochastic_weight_bound(problem, config.rho);
    for (i, eta) in config.eta_x.iter().enumerate() {
        rep.require_ge(format!("{COND_X_WEIGHT}[{i}]"), *eta, bound, || {
            format!("etaX[{i}] = {eta} is below the required {bound}")
        });
    }
    let (x0, _) = crate::engine::default_start(problem)?;
    let infeas = norm2(&problem.residual(&x0, &problem.zero_y())?);
    if !(infeas <= FEASIBLE_START_TOL) {
        rep.push(
            COND_FEASIBLE_START,
            infeas,
            FEASIBLE_START_TOL,
            "the starting point must satisfy Ax0 = b",
        );
    }
    let sched = schedule_check(schedule, t_max, config.theta(problem), config.rho)?;
    if !sched.ok {
        let msg = sched.first_violation.clone().unwrap_or_default();
        rep.push(crate::stochastic::COND_SCHEDULE_TERMINAL, t_max as f64, 0.0, msg);
    }
    if !rep.ok {
        if let Ok(mut s) = derive_stochastic_params(problem, config.n, config.rho) {
            s.max_iters = config.max_iters;
            s.seed = config.seed;
            rep.suggested = Some(s);
        }
    }
    Ok((rep, Some(sched)))
}
