//! Stochastic-gradient variant (RPDBUS).
//!
//! Only x blocks; the gradient is replaced by a noisy estimate `G^k`, each
//! sampled block gets the extra proximal weight `1/α_k`, and the multiplier
//! step is damped by `1 − (N−n)α_{k+1}/(Nα_k)`.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use rand::{Rng, RngCore};
use rand_distr::StandardNormal;
use serde::{Deserialize, Serialize};

use crate::engine::{
    begin_iteration, commit_x, default_start, dual_direction, end_iteration, init_state, prox_linear_x, Exec,
    IterateState, Regime, SolverConfig,
};
use crate::error::{Error, Result};
use crate::linalg::{axpy, BlockVector};
use crate::problem::ConstrainedProblem;
use crate::rng::{stream_rng, SolverRng, Stream};
use crate::sampler::sample_subset;

/// Tolerance on `‖Ax⁰ − b‖` for the feasible start.
pub const FEASIBLE_START_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum ScheduleKind {
    /// `α_k = α₀/√k`, `α_0 = α₀`
    SqrtK,
    /// `α_k = α₀/√t` for every k
    FixedHorizon { t: usize },
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct StepSchedule {
    #[serde(flatten)]
    pub kind: ScheduleKind,
    pub alpha0: f64,
}

impl StepSchedule {
    pub fn sqrt_k(alpha0: f64) -> Result<Self> {
        check_alpha0(alpha0)?;
        Ok(Self {
            kind: ScheduleKind::SqrtK,
            alpha0,
        })
    }

    pub fn fixed_horizon(t: usize, alpha0: f64) -> Result<Self> {
        check_alpha0(alpha0)?;
        if t == 0 {
            return Err(Error::param("fixed-horizon schedule needs a horizon t >= 1"));
        }
        Ok(Self {
            kind: ScheduleKind::FixedHorizon { t },
            alpha0,
        })
    }

    pub fn alpha_at(&self, k: usize) -> f64 {
        alpha_at(self, k)
    }
}

fn check_alpha0(a: f64) -> Result<()> {
    if !(a > 0.0) || !a.is_finite() {
        return Err(Error::param(format!("alpha0 must be positive and finite, got {a}")));
    }
    Ok(())
}

pub fn alpha_at(schedule: &StepSchedule, k: usize) -> f64 {
    match schedule.kind {
        ScheduleKind::SqrtK if k == 0 => schedule.alpha0,
        ScheduleKind::SqrtK => schedule.alpha0 / (k as f64).sqrt(),
        ScheduleKind::FixedHorizon { t } => schedule.alpha0 / (t as f64).sqrt(),
    }
}

/// `1 − (N−n)α_{k+1}/(Nα_k)`
pub fn multiplier_factor(schedule: &StepSchedule, k: usize, big_n: usize, n: usize) -> f64 {
    let ratio = alpha_at(schedule, k + 1) / alpha_at(schedule, k);
    1.0 - (big_n - n) as f64 * ratio / big_n as f64
}

/// Source of the gradient error `δ = G − ∇f(x)` on a coordinate range.
pub trait NoiseSampler: Send + Sync + fmt::Debug {
    fn sample(&self, rng: &mut dyn RngCore, x: &[f64], range: Range<usize>) -> Result<Vec<f64>>;
}

#[derive(Debug, Clone)]
pub enum NoiseKind {
    /// i.i.d. normal coordinates with `E‖δ‖² = σ²`
    Gaussian { sigma: f64 },
    Custom(Arc<dyn NoiseSampler>),
}

/// Noisy gradient oracle with its own random stream, so switching noise on
/// or off never changes which blocks are sampled.
#[derive(Debug, Clone)]
pub struct StochasticOracle {
    pub noise: NoiseKind,
    rng: SolverRng,
}

impl StochasticOracle {
    pub fn gaussian(sigma: f64, seed: u64) -> Result<Self> {
        if !(sigma >= 0.0) || !sigma.is_finite() {
            return Err(Error::param(format!("sigma must be finite and nonnegative, got {sigma}")));
        }
        Ok(Self {
            noise: NoiseKind::Gaussian { sigma },
            rng: stream_rng(seed, Stream::Noise),
        })
    }

    pub fn custom(sampler: Arc<dyn NoiseSampler>, seed: u64) -> Self {
        Self {
            noise: NoiseKind::Custom(sampler),
            rng: stream_rng(seed, Stream::Noise),
        }
    }

    /// `∇_range f(x) + δ_range`
    pub fn block_gradient(&mut self, problem: &ConstrainedProblem, x: &[f64], range: Range<usize>) -> Result<Vec<f64>> {
        let mut g = problem.f().block_gradient(x, range.clone())?;
        let delta = self.noise_block(x, range)?;
        axpy(1.0, &delta, &mut g);
        Ok(g)
    }

    fn noise_block(&mut self, x: &[f64], range: Range<usize>) -> Result<Vec<f64>> {
        match &self.noise {
            NoiseKind::Gaussian { sigma } => {
                if *sigma == 0.0 {
                    return Ok(vec![0.0; range.len()]);
                }
                let sd = sigma / (x.len() as f64).sqrt();
                Ok(range.map(|_| sd * self.rng.sample::<f64, _>(StandardNormal)).collect())
            }
            NoiseKind::Custom(s) => {
                let d = s
                    .sample(&mut self.rng, x, range.clone())
                    .map_err(|e| Error::Oracle(format!("custom noise on {range:?}: {e}")))?;
                if d.len() != range.len() {
                    return Err(Error::Oracle(format!(
                        "custom noise returned {} entries for range of {}",
                        d.len(),
                        range.len()
                    )));
                }
                Ok(d)
            }
        }
    }
}

/// Compensated (Neumaier) running sum.
#[derive(Debug, Clone, Copy, Default, PartialEq)]
pub struct CompensatedSum {
    sum: f64,
    comp: f64,
}

impl CompensatedSum {
    pub fn add(&mut self, v: f64) {
        let t = self.sum + v;
        if self.sum.abs() >= v.abs() {
            self.comp += (self.sum - t) + v;
        } else {
            self.comp += (v - t) + self.sum;
        }
        self.sum = t;
    }

    pub fn value(&self) -> f64 {
        self.sum + self.comp
    }
}

#[derive(Debug, Clone)]
pub struct StochasticState {
    pub inner: IterateState,
    /// `Σ_{κ=1}^{k−1} α_κ x^κ`
    pub wsum_x: Vec<f64>,
    /// `Σ_{κ=1}^{k−1} α_κ`
    pub wsum_alpha: CompensatedSum,
}

pub fn check_stochastic_problem(problem: &ConstrainedProblem) -> Result<()> {
    if problem.has_y() || !problem.g().is_zero() {
        return Err(Error::Unsupported(
            "the stochastic engine handles x blocks only (g = v = 0); use rpdbu for problems with y".into(),
        ));
    }
    Ok(())
}

/// Requires `‖Ax⁰ − b‖ ≤ 1e-9`; `λ⁰ = 0`.
pub fn init_stochastic(problem: &ConstrainedProblem, x0: BlockVector) -> Result<StochasticState> {
    check_stochastic_problem(problem)?;
    let inner = init_state(problem, x0, problem.zero_y())?;
    let infeas = crate::linalg::norm2(&inner.r);
    if !(infeas <= FEASIBLE_START_TOL) {
        return Err(Error::param(format!(
            "stochastic engine needs a feasible start with Ax0 = b; ‖Ax0 − b‖ = {infeas:e} exceeds {FEASIBLE_START_TOL:e}"
        )));
    }
    Ok(StochasticState {
        wsum_x: vec![0.0; inner.x.len()],
        wsum_alpha: CompensatedSum::default(),
        inner,
    })
}

fn check_config(problem: &ConstrainedProblem, config: &SolverConfig) -> Result<()> {
    config.check_shape(problem)?;
    if config.regime != Regime::NoY {
        return Err(Error::param("the stochastic engine runs in the no-y regime"));
    }
    if config.rho_x != config.rho {
        return Err(Error::param(format!(
            "the stochastic engine uses a single penalty: rhoX ({}) must equal rho ({})",
            config.rho_x, config.rho
        )));
    }
    Ok(())
}

/// One iteration of the stochastic method.
#[allow(clippy::too_many_arguments)]
pub fn stochastic_step(
    state: &mut StochasticState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
    schedule: &StepSchedule,
    oracle: &mut StochasticOracle,
    rng: &mut SolverRng,
    exec: &Exec,
) -> Result<()> {
    let k = state.inner.k;
    if k >= 1 {
        let a = alpha_at(schedule, k);
        axpy(a, state.inner.x.as_slice(), &mut state.wsum_x);
        state.wsum_alpha.add(a);
    }
    begin_iteration(&mut state.inner);

    let big_n = problem.num_x_blocks();
    let sample = sample_subset(rng, big_n, config.n)?;
    let part = problem.x_partition().clone();
    let x_now = state.inner.x.as_slice();
    let grads = sample
        .indices
        .iter()
        .map(|&i| oracle.block_gradient(problem, x_now, part.range(i)))
        .collect::<Result<Vec<_>>>()?;

    let inv_alpha = 1.0 / alpha_at(schedule, k);
    let dual = dual_direction(config.rho_x, &state.inner.r, &state.inner.lambda);
    let frozen = &state.inner;
    let pos: Vec<usize> = (0..sample.len()).collect();
    let new_x = exec.map(&pos, |p| {
        let i = sample.indices[p];
        prox_linear_x(problem, i, frozen.x.block(i), &grads[p], &dual, config.eta_x[i] + inv_alpha)
    })?;
    commit_x(&mut state.inner, problem, &sample.indices, new_x);

    let factor = multiplier_factor(schedule, k, big_n, config.n);
    axpy(-factor * config.rho, &state.inner.r, &mut state.inner.lambda);
    end_iteration(&mut state.inner, problem)
}

/// `(α_{t+1} x^{t+1} + θ Σ α_k x^k) / (α_{t+1} + θ Σ α_k)` with `t = k − 1`.
pub fn weighted_ergodic(
    state: &StochasticState,
    schedule: &StepSchedule,
    theta: f64,
) -> Result<crate::engine::ErgodicPoint> {
    let k = state.inner.k;
    if k == 0 {
        return Err(Error::param("ergodic point requested before the first iteration"));
    }
    let a_last = alpha_at(schedule, k);
    let mut norm = CompensatedSum::default();
    norm.add(a_last);
    norm.add(theta * state.wsum_alpha.sum);
    norm.add(theta * state.wsum_alpha.comp);
    let denom = norm.value();
    let x_hat: Vec<f64> = state
        .inner
        .x
        .as_slice()
        .iter()
        .zip(&state.wsum_x)
        .map(|(x, s)| (a_last * x + theta * s) / denom)
        .collect();
    Ok(crate::engine::ErgodicPoint {
        x_hat: BlockVector::from_vec(state.inner.x.partition().clone(), x_hat)?,
        y_hat: state.inner.y.clone(),
        t: k - 1,
    })
}

/// Stochastic solver bound to one problem.
#[derive(Debug, Clone)]
pub struct Rpdbus<'a> {
    pub problem: &'a ConstrainedProblem,
    pub config: SolverConfig,
    pub schedule: StepSchedule,
    pub state: StochasticState,
    pub oracle: StochasticOracle,
    rng: SolverRng,
    exec: Exec,
}

impl<'a> Rpdbus<'a> {
    pub fn new(
        problem: &'a ConstrainedProblem,
        config: SolverConfig,
        schedule: StepSchedule,
        oracle: StochasticOracle,
        exec: Exec,
    ) -> Result<Self> {
        let (x0, _) = default_start(problem)?;
        Self::with_start(problem, config, schedule, oracle, exec, x0)
    }

    pub fn with_start(
        problem: &'a ConstrainedProblem,
        config: SolverConfig,
        schedule: StepSchedule,
        oracle: StochasticOracle,
        exec: Exec,
        x0: BlockVector,
    ) -> Result<Self> {
        check_stochastic_problem(problem)?;
        check_config(problem, &config)?;
        let state = init_stochastic(problem, x0)?;
        Ok(Self {
            rng: stream_rng(config.seed, Stream::Sampling),
            problem,
            config,
            schedule,
            state,
            oracle,
            exec,
        })
    }

    pub fn step(&mut self) -> Result<()> {
        stochastic_step(
            &mut self.state,
            self.problem,
            &self.config,
            &self.schedule,
            &mut self.oracle,
            &mut self.rng,
            &self.exec,
        )
    }

    pub fn ergodic(&self) -> Result<crate::engine::ErgodicPoint> {
        weighted_ergodic(&self.state, &self.schedule, self.config.theta(self.problem))
    }
}

/// Condition identifiers used in reports.
pub const COND_SCHEDULE_MONOTONE: &str = "schedule-beta-monotone";
pub const COND_SCHEDULE_TERMINAL: &str = "schedule-terminal-bound";

#[derive(Debug, Clone, PartialEq, Serialize)]
#[serde(rename_all = "camelCase")]
pub struct ScheduleReport {
    pub t_max: usize,
    /// iterations k ∈ [1, tMax] where the monotonicity condition on β fails
    pub monotone_failures: Vec<usize>,
    /// horizons t ∈ [1, tMax] where the terminal bound fails
    pub terminal_failures: Vec<usize>,
    /// terminal bound at `t = tMax`
    pub terminal_ok: bool,
    /// both conditions hold at horizon `tMax`
    pub ok: bool,
    pub first_violation: Option<String>,
}

/// Numerical check of the two step-size conditions
///
/// ```text
/// (c)  α_{k−1}β_k/(2α_k) + (1−θ)β_{k+1}/2 − α_kβ_{k+1}/(2α_{k+1}) − (1−θ)β_k/2 ≥ 0,  k = 1..tMax
/// (d)  α_t/(2ρ) ≥ | α_{t−1}β_t/α_t − (1−θ)β_t − α_t/ρ |
/// ```
///
/// with `β_k = α_k / ((1 − α_k(1−θ)/α_{k−1}) ρ)`. Under the `√k` schedule the
/// checks take `α_0 = +∞` (so `β_1 = α_1/ρ`), which is the convention under
/// which the closed-form analysis of this schedule is written. Condition (d)
/// is evaluated at every `t ≤ tMax` so the report lists where it fails.
pub fn schedule_check(schedule: &StepSchedule, t_max: usize, theta: f64, rho: f64) -> Result<ScheduleReport> {
    if t_max < 1 {
        return Err(Error::param("schedule check needs tMax >= 1"));
    }
    if !(theta > 0.0 && theta <= 1.0) {
        return Err(Error::param(format!("theta must lie in (0, 1], got {theta}")));
    }
    if !(rho > 0.0) || !rho.is_finite() {
        return Err(Error::param(format!("rho must be positive, got {rho}")));
    }
    let alpha = |k: usize| -> f64 {
        match schedule.kind {
            ScheduleKind::SqrtK if k == 0 => f64::INFINITY,
            _ => alpha_at(schedule, k),
        }
    };
    let beta = |k: usize| -> f64 { alpha(k) / ((1.0 - alpha(k) * (1.0 - theta) / alpha(k - 1)) * rho) };
    // α_{k−1}β_k/α_k, written to stay finite-safe when α_{k−1} = ∞
    let lead = |k: usize| -> f64 {
        let (a_prev, a) = (alpha(k - 1), alpha(k));
        if a_prev.is_infinite() {
            f64::INFINITY
        } else {
            a_prev * beta(k) / a
        }
    };

    let mut monotone_failures = Vec::new();
    for k in 1..=t_max {
        let terms = [
            lead(k) / 2.0,
            (1.0 - theta) * beta(k + 1) / 2.0,
            -(alpha(k) * beta(k + 1) / alpha(k + 1)) / 2.0,
            -(1.0 - theta) * beta(k) / 2.0,
        ];
        let lhs: f64 = terms.iter().sum();
        let scale = terms.iter().map(|v| v.abs()).fold(0.0, f64::max);
        if !(lhs >= -1e-12 * scale) {
            monotone_failures.push(k);
        }
    }

    let terminal = |t: usize| -> bool {
        let a = alpha(t);
        let rhs = (lead(t) - (1.0 - theta) * beta(t) - a / rho).abs();
        a / (2.0 * rho) >= rhs - 1e-12 * (a / rho)
    };
    let terminal_failures: Vec<usize> = (1..=t_max).filter(|&t| !terminal(t)).collect();
    let terminal_ok = terminal(t_max);
    let monotone_ok = monotone_failures.is_empty();
    let first_violation = if let Some(k) = monotone_failures.first() {
        Some(format!("{COND_SCHEDULE_MONOTONE} fails at k = {k}"))
    } else if !terminal_ok {
        Some(format!("{COND_SCHEDULE_TERMINAL} fails at t = {t_max}"))
    } else {
        terminal_failures
            .first()
            .map(|t| format!("{COND_SCHEDULE_TERMINAL} fails at t = {t}"))
    };
    Ok(ScheduleReport {
        t_max,
        monotone_failures,
        terminal_failures,
        terminal_ok,
        ok: monotone_ok && terminal_ok,
        first_violation,
    })
}
