//! Randomized primal-dual block coordinate update (RPDBU).
//!
//! Each iteration samples `I_k ⊂ [N]`, `J_k ⊂ [M]` uniformly, applies a
//! prox-linear update to the sampled blocks, refreshes the residual
//! `r = Ax + By − b` incrementally and moves the multiplier `λ ← λ − ρ r`.
//! With the block-diagonal weights `P^k = η_I·I − ρ_x A_IᵀA_I` every sampled
//! block has the closed form
//!
//! ```text
//! x_i ← prox_{u_i, η_i}( x_i − (∇_i f(x) − A_iᵀλ + ρ_x A_iᵀ r) / η_i )
//! ```

use std::sync::Arc;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::linalg::{axpy, norm2, BlockVector};
use crate::problem::ConstrainedProblem;
use crate::rng::{stream_rng, SolverRng, Stream};
use crate::sampler::{check_sample_size, sample_subset};

/// The residual audit recomputes `Ax + By − b` this often.
pub const AUDIT_EVERY: usize = 100;
pub const AUDIT_TOL: f64 = 1e-9;

pub const TILDE_Y_MAX_ITERS: usize = 100_000;
pub const TILDE_Y_TOL: f64 = 1e-10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Regime {
    /// no y variable
    NoY,
    /// one y block, fully updated each iteration
    SingleY,
    /// sampled x and y blocks with `n/N = m/M`
    MultiXY,
}

impl Regime {
    /// Default regime from the number of y blocks.
    pub fn infer(problem: &ConstrainedProblem) -> Self {
        match problem.num_y_blocks() {
            0 => Regime::NoY,
            1 => Regime::SingleY,
            _ => Regime::MultiXY,
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            Regime::NoY => "no-y",
            Regime::SingleY => "single-y",
            Regime::MultiXY => "multi-xy",
        }
    }
}

impl std::str::FromStr for Regime {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "no-y" => Ok(Regime::NoY),
            "single-y" => Ok(Regime::SingleY),
            "multi-xy" => Ok(Regime::MultiXY),
            other => Err(Error::param(format!("unknown regime `{other}`"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase")]
pub struct SolverConfig {
    pub regime: Regime,
    pub n: usize,
    #[serde(default)]
    pub m: usize,
    pub rho_x: f64,
    #[serde(default)]
    pub rho_y: f64,
    pub rho: f64,
    pub eta_x: Vec<f64>,
    #[serde(default)]
    pub eta_y: Vec<f64>,
    pub max_iters: usize,
    #[serde(default)]
    pub seed: u64,
}

impl SolverConfig {
    /// θ = n/N
    pub fn theta(&self, problem: &ConstrainedProblem) -> f64 {
        self.n as f64 / problem.num_x_blocks() as f64
    }

    /// Structural checks the engine cannot run without. Theory-derived
    /// conditions live in the validator.
    pub fn check_shape(&self, problem: &ConstrainedProblem) -> Result<()> {
        let big_n = problem.num_x_blocks();
        let big_m = problem.num_y_blocks();
        check_sample_size(big_n, self.n)?;
        if self.eta_x.len() != big_n {
            return Err(Error::DimensionMismatch {
                what: "etaX",
                block: None,
                expected: big_n,
                found: self.eta_x.len(),
            });
        }
        match self.regime {
            Regime::NoY => {
                if problem.has_y() {
                    return Err(Error::param("regime no-y given a problem with y blocks"));
                }
            }
            Regime::SingleY | Regime::MultiXY => {
                if !problem.has_y() {
                    return Err(Error::param(format!(
                        "regime {} needs y blocks; the problem has none",
                        self.regime.name()
                    )));
                }
                check_sample_size(big_m, self.m)?;
                if self.eta_y.len() != big_m {
                    return Err(Error::DimensionMismatch {
                        what: "etaY",
                        block: None,
                        expected: big_m,
                        found: self.eta_y.len(),
                    });
                }
            }
        }
        for (what, v) in [("rhoX", self.rho_x), ("rhoY", self.rho_y), ("rho", self.rho)] {
            if !(v >= 0.0) || !v.is_finite() {
                return Err(Error::param(format!("{what} must be finite and nonnegative, got {v}")));
            }
        }
        let y_weights = if problem.has_y() { &self.eta_y[..] } else { &[] };
        for (i, e) in self.eta_x.iter().chain(y_weights).enumerate() {
            if !(*e > 0.0) || !e.is_finite() {
                return Err(Error::param(format!("proximal weight #{i} must be positive, got {e}")));
            }
        }
        Ok(())
    }

    pub fn updates_y(&self) -> bool {
        self.regime != Regime::NoY
    }
}

/// Periodic comparison of the maintained residual with a fresh `Ax + By − b`.
#[derive(Debug, Clone, Copy, Default, PartialEq, Serialize)]
pub struct ResidualAudit {
    pub checks: u64,
    pub violations: u64,
    pub max_drift: f64,
}

impl ResidualAudit {
    pub fn record(&mut self, drift: f64) {
        self.checks += 1;
        if !(drift <= AUDIT_TOL) {
            self.violations += 1;
        }
        if drift > self.max_drift || drift.is_nan() {
            self.max_drift = drift;
        }
    }

    pub fn merge(&mut self, other: &ResidualAudit) {
        self.checks += other.checks;
        self.violations += other.violations;
        self.max_drift = self.max_drift.max(other.max_drift);
    }
}

#[derive(Debug, Clone)]
pub struct IterateState {
    pub x: BlockVector,
    pub y: BlockVector,
    pub lambda: Vec<f64>,
    /// `Ax + By − b`, maintained incrementally
    pub r: Vec<f64>,
    pub k: usize,
    /// `Σ_{κ=1}^{k−1} x^κ`
    pub erg_sum_x: Vec<f64>,
    pub erg_sum_y: Vec<f64>,
    /// `y^{k−1}` and `λ^{k−1}` (for the single-y ergodic correction)
    pub prev_y: BlockVector,
    pub prev_lambda: Vec<f64>,
    pub audit: ResidualAudit,
}

impl IterateState {
    pub fn audit_now(&mut self, problem: &ConstrainedProblem) -> Result<f64> {
        let fresh = problem.residual(&self.x, &self.y)?;
        let drift = self
            .r
            .iter()
            .zip(&fresh)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        self.audit.record(drift);
        if drift > AUDIT_TOL {
            log::warn!("residual drift {drift:e} at k = {}", self.k);
        }
        Ok(drift)
    }

    /// Adds the current iterate to the ergodic sums (called before stepping
    /// away from `x^k`, `k ≥ 1`).
    pub(crate) fn push_ergodic(&mut self) {
        if self.k >= 1 {
            axpy(1.0, self.x.as_slice(), &mut self.erg_sum_x);
            axpy(1.0, self.y.as_slice(), &mut self.erg_sum_y);
        }
    }
}

/// `λ⁰ = 0`, `r⁰ = Ax⁰ + By⁰ − b`.
pub fn init_state(problem: &ConstrainedProblem, x0: BlockVector, y0: BlockVector) -> Result<IterateState> {
    let r = problem.residual(&x0, &y0)?;
    let p = problem.row_dim();
    Ok(IterateState {
        erg_sum_x: vec![0.0; x0.len()],
        erg_sum_y: vec![0.0; y0.len()],
        prev_y: y0.clone(),
        prev_lambda: vec![0.0; p],
        x: x0,
        y: y0,
        lambda: vec![0.0; p],
        r,
        k: 0,
        audit: ResidualAudit::default(),
    })
}

/// Starting point: the problem's attached `x0` if any, else zero; `y⁰ = 0`.
pub fn default_start(problem: &ConstrainedProblem) -> Result<(BlockVector, BlockVector)> {
    let x = match problem.initial_x() {
        Some(x0) => BlockVector::from_vec(problem.x_partition().clone(), x0.to_vec())?,
        None => problem.zero_x(),
    };
    Ok((x, problem.zero_y()))
}

/// Runs sampled block updates on a dedicated pool. Results come back in
/// index order, so the outcome does not depend on the worker count.
#[derive(Clone, Default)]
pub struct Exec {
    pool: Option<Arc<rayon::ThreadPool>>,
}

impl std::fmt::Debug for Exec {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        write!(f, "Exec({} workers)", self.workers())
    }
}

impl Exec {
    pub fn serial() -> Self {
        Self { pool: None }
    }

    pub fn with_workers(workers: usize) -> Result<Self> {
        if workers <= 1 {
            return Ok(Self::serial());
        }
        let pool = rayon::ThreadPoolBuilder::new()
            .num_threads(workers)
            .build()
            .map_err(|e| Error::param(format!("cannot start {workers} workers: {e}")))?;
        Ok(Self {
            pool: Some(Arc::new(pool)),
        })
    }

    pub fn workers(&self) -> usize {
        self.pool.as_ref().map_or(1, |p| p.current_num_threads())
    }

    pub fn map<T, F>(&self, items: &[usize], f: F) -> Result<Vec<T>>
    where
        T: Send,
        F: Fn(usize) -> Result<T> + Sync + Send,
    {
        match &self.pool {
            Some(pool) if items.len() > 1 => pool.install(|| items.par_iter().map(|&i| f(i)).collect()),
            _ => items.iter().map(|&i| f(i)).collect(),
        }
    }
}

/// `prox_{u_i, w}( x_i − (g_i + A_iᵀ(ρ_x r − λ)) / w )` for a given block
/// gradient `g_i` and weight `w`.
pub(crate) fn prox_linear_x(
    problem: &ConstrainedProblem,
    i: usize,
    x_i: &[f64],
    grad_i: &[f64],
    dual_dir: &[f64],
    weight: f64,
) -> Result<Vec<f64>> {
    let mut d = problem.x_map().apply_adjoint_block(i, dual_dir)?;
    axpy(1.0, grad_i, &mut d);
    let v: Vec<f64> = x_i.iter().zip(&d).map(|(x, di)| x - di / weight).collect();
    problem.x_prox()[i]
        .prox(&v, weight)
        .map_err(|e| block_context(e, "x", i))
}

pub(crate) fn prox_linear_y(
    problem: &ConstrainedProblem,
    j: usize,
    y_j: &[f64],
    grad_j: &[f64],
    dual_dir: &[f64],
    weight: f64,
) -> Result<Vec<f64>> {
    let ym = problem
        .y_map()
        .ok_or_else(|| Error::param("y update on a problem without y blocks"))?;
    let mut d = ym.apply_adjoint_block(j, dual_dir)?;
    axpy(1.0, grad_j, &mut d);
    let v: Vec<f64> = y_j.iter().zip(&d).map(|(y, dj)| y - dj / weight).collect();
    problem.y_prox()[j]
        .prox(&v, weight)
        .map_err(|e| block_context(e, "y", j))
}

fn block_context(e: Error, side: &str, i: usize) -> Error {
    match e {
        Error::Oracle(m) => Error::Oracle(format!("{side} block {i}: {m}")),
        other => other,
    }
}

/// `ρ r − λ`
pub(crate) fn dual_direction(rho: f64, r: &[f64], lambda: &[f64]) -> Vec<f64> {
    r.iter().zip(lambda).map(|(ri, li)| rho * ri - li).collect()
}

/// New value of x block `i` from the state at the start of the iteration.
pub fn x_block_update(
    state: &IterateState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
    i: usize,
) -> Result<Vec<f64>> {
    problem.x_partition().check_index(i)?;
    let dual = dual_direction(config.rho_x, &state.r, &state.lambda);
    x_update_with(state, problem, config, i, &dual)
}

pub(crate) fn x_update_with(
    state: &IterateState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
    i: usize,
    dual: &[f64],
) -> Result<Vec<f64>> {
    let range = problem.x_partition().range(i);
    let grad = problem.f().block_gradient(state.x.as_slice(), range)?;
    prox_linear_x(problem, i, state.x.block(i), &grad, dual, config.eta_x[i])
}

/// New value of y block `j`, using the half-step residual `r^{k+½}`.
pub fn y_block_update(
    state: &IterateState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
    j: usize,
    r_half: &[f64],
) -> Result<Vec<f64>> {
    problem.y_partition().check_index(j)?;
    let dual = dual_direction(config.rho_y, r_half, &state.lambda);
    y_update_with(state, problem, config, j, &dual)
}

pub(crate) fn y_update_with(
    state: &IterateState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
    j: usize,
    dual: &[f64],
) -> Result<Vec<f64>> {
    let range = problem.y_partition().range(j);
    let grad = problem.g().block_gradient(state.y.as_slice(), range)?;
    prox_linear_y(problem, j, state.y.block(j), &grad, dual, config.eta_y[j])
}

/// Writes new x blocks into the state and adds `A_i Δx_i` to `r`, in
/// ascending block order.
pub(crate) fn commit_x(state: &mut IterateState, problem: &ConstrainedProblem, idx: &[usize], new: Vec<Vec<f64>>) {
    for (&i, v) in idx.iter().zip(new) {
        let delta: Vec<f64> = v.iter().zip(state.x.block(i)).map(|(a, b)| a - b).collect();
        problem.x_map().apply_block_acc(i, &delta, &mut state.r);
        state.x.set_block(i, &v);
    }
}

pub(crate) fn commit_y(state: &mut IterateState, problem: &ConstrainedProblem, idx: &[usize], new: Vec<Vec<f64>>) {
    let ym = problem.y_map().expect("y blocks present");
    for (&j, v) in idx.iter().zip(new) {
        let delta: Vec<f64> = v.iter().zip(state.y.block(j)).map(|(a, b)| a - b).collect();
        ym.apply_block_acc(j, &delta, &mut state.r);
        state.y.set_block(j, &v);
    }
}

/// Bookkeeping shared by every iteration: ergodic sums and the values
/// `y^k`, `λ^k` needed later for the single-y correction.
pub(crate) fn begin_iteration(state: &mut IterateState) {
    state.push_ergodic();
    state.prev_y.as_mut_slice().copy_from_slice(state.y.as_slice());
    state.prev_lambda.copy_from_slice(&state.lambda);
}

pub(crate) fn end_iteration(state: &mut IterateState, problem: &ConstrainedProblem) -> Result<()> {
    state.k += 1;
    if state.k.is_multiple_of(AUDIT_EVERY) {
        state.audit_now(problem)?;
    }
    Ok(())
}

/// One iteration of the method.
pub fn step(
    state: &mut IterateState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
    rng: &mut SolverRng,
    exec: &Exec,
) -> Result<()> {
    let sample_x = sample_subset(rng, problem.num_x_blocks(), config.n)?;
    let sample_y = if config.updates_y() {
        Some(sample_subset(rng, problem.num_y_blocks(), config.m)?)
    } else {
        None
    };
    step_with_samples(
        state,
        problem,
        config,
        &sample_x.indices,
        sample_y.as_ref().map(|s| &s.indices[..]),
        exec,
    )
}

/// One iteration on given block index sets (ascending, distinct).
pub fn step_with_samples(
    state: &mut IterateState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
    x_blocks: &[usize],
    y_blocks: Option<&[usize]>,
    exec: &Exec,
) -> Result<()> {
    begin_iteration(state);

    let dual = dual_direction(config.rho_x, &state.r, &state.lambda);
    let frozen = &*state;
    let new_x = exec.map(x_blocks, |i| x_update_with(frozen, problem, config, i, &dual))?;
    commit_x(state, problem, x_blocks, new_x);

    if let Some(yb) = y_blocks {
        let dual = dual_direction(config.rho_y, &state.r, &state.lambda);
        let frozen = &*state;
        let new_y = exec.map(yb, |j| y_update_with(frozen, problem, config, j, &dual))?;
        commit_y(state, problem, yb, new_y);
    }

    axpy(-config.rho, &state.r, &mut state.lambda);
    end_iteration(state, problem)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ErgodicPoint {
    pub x_hat: BlockVector,
    pub y_hat: BlockVector,
    pub t: usize,
}

/// `(z^{t+1} + θ Σ_{k=1}^t z^k)/(1 + θt)` from the running sum.
pub(crate) fn average(last: &[f64], sum: &[f64], theta: f64, t: usize) -> Vec<f64> {
    let denom = 1.0 + theta * t as f64;
    last.iter().zip(sum).map(|(l, s)| (l + theta * s) / denom).collect()
}

/// Ergodic point with `t = k − 1`. The single-y regime replaces `y^{t+1}`
/// by the corrected point from [`compute_tilde_y`].
pub fn ergodic_point(
    state: &IterateState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
) -> Result<ErgodicPoint> {
    if state.k == 0 {
        return Err(Error::param("ergodic point requested before the first iteration"));
    }
    let t = state.k - 1;
    let theta = config.theta(problem);
    let x_hat = average(state.x.as_slice(), &state.erg_sum_x, theta, t);
    let y_last = match config.regime {
        Regime::SingleY => compute_tilde_y(state, problem, config)?,
        _ => state.y.clone(),
    };
    let y_hat = average(y_last.as_slice(), &state.erg_sum_y, theta, t);
    Ok(ErgodicPoint {
        x_hat: BlockVector::from_vec(problem.x_partition().clone(), x_hat)?,
        y_hat: BlockVector::from_vec(problem.y_partition().clone(), y_hat)?,
        t,
    })
}

/// Minimizer over y of
///
/// ```text
/// ⟨∇g(y^t) − Bᵀλ^t, y⟩ + v(y) + (ρ_x/2)‖Ax^{t+1} + By − b‖² + (θ/2)‖y − y^t‖²_{Q̂ − ρ_y BᵀB}
/// ```
///
/// by proximal gradient descent, stopping when the natural residual
/// `‖y − prox(y − s∇)‖` drops to [`TILDE_Y_TOL`].
pub fn compute_tilde_y(
    state: &IterateState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
) -> Result<BlockVector> {
    if config.regime != Regime::SingleY {
        return Err(Error::param("the corrected y point is defined for the single-y regime only"));
    }
    if state.k == 0 {
        return Err(Error::param("corrected y point requested before the first iteration"));
    }
    let ym = problem
        .y_map()
        .ok_or_else(|| Error::param("single-y regime on a problem without y"))?;
    let part = problem.y_partition().clone();
    let theta = config.theta(problem);
    let y_t = state.prev_y.as_slice();

    let mut lin = problem.g().gradient(y_t)?;
    let mut bt_lambda = vec![0.0; lin.len()];
    ym.t_apply_acc(&state.prev_lambda, &mut bt_lambda);
    axpy(-1.0, &bt_lambda, &mut lin);

    // A x^{t+1} − b
    let mut ax_b = problem.x_map().apply(&state.x)?;
    axpy(-1.0, problem.b(), &mut ax_b);

    let b_norm_sq = 1.01 * ym.spectral_norm_sq_full();
    let eta_max = config.eta_y.iter().cloned().fold(0.0, f64::max);
    let lip = problem.g().lipschitz + config.rho_x * b_norm_sq + theta * eta_max;
    if !(lip > 0.0) {
        return Err(Error::Numerical("corrected y subproblem has zero curvature bound".into()));
    }
    let s = 1.0 / lip;

    let mut y = state.y.clone();
    let mut residual = f64::INFINITY;
    for _ in 0..TILDE_Y_MAX_ITERS {
        let ys = y.as_slice();
        let diff: Vec<f64> = ys.iter().zip(y_t).map(|(a, b)| a - b).collect();
        // ρ_x Bᵀ(Ax − b + By) − θρ_y BᵀB(y − y^t)
        let mut coupled = ax_b.clone();
        ym.apply_acc(ys, &mut coupled);
        let mut b_diff = vec![0.0; ax_b.len()];
        ym.apply_acc(&diff, &mut b_diff);
        let w: Vec<f64> = coupled
            .iter()
            .zip(&b_diff)
            .map(|(c, d)| config.rho_x * c - theta * config.rho_y * d)
            .collect();
        let mut grad = lin.clone();
        ym.t_apply_acc(&w, &mut grad);

        let mut next = Vec::with_capacity(ys.len());
        for j in 0..part.num_blocks() {
            let range = part.range(j);
            let eta = config.eta_y[j];
            let v: Vec<f64> = range
                .clone()
                .map(|c| ys[c] - s * (grad[c] + theta * eta * diff[c]))
                .collect();
            next.extend(problem.y_prox()[j].prox(&v, 1.0 / s)?);
        }
        residual = next
            .iter()
            .zip(ys)
            .map(|(a, b)| (a - b) * (a - b))
            .sum::<f64>()
            .sqrt();
        y = BlockVector::from_vec(part.clone(), next)?;
        if residual <= TILDE_Y_TOL {
            return Ok(y);
        }
    }
    Err(Error::Numerical(format!(
        "corrected y subproblem did not converge in {TILDE_Y_MAX_ITERS} iterations (residual {residual:e})"
    )))
}

/// RPDBU solver bound to one problem.
#[derive(Debug, Clone)]
pub struct Rpdbu<'a> {
    pub problem: &'a ConstrainedProblem,
    pub config: SolverConfig,
    pub state: IterateState,
    rng: SolverRng,
    exec: Exec,
}

impl<'a> Rpdbu<'a> {
    pub fn new(problem: &'a ConstrainedProblem, config: SolverConfig, exec: Exec) -> Result<Self> {
        let (x0, y0) = default_start(problem)?;
        Self::with_start(problem, config, exec, x0, y0)
    }

    pub fn with_start(
        problem: &'a ConstrainedProblem,
        config: SolverConfig,
        exec: Exec,
        x0: BlockVector,
        y0: BlockVector,
    ) -> Result<Self> {
        config.check_shape(problem)?;
        let state = init_state(problem, x0, y0)?;
        let rng = stream_rng(config.seed, Stream::Sampling);
        Ok(Self {
            problem,
            config,
            state,
            rng,
            exec,
        })
    }

    pub fn step(&mut self) -> Result<()> {
        step(&mut self.state, self.problem, &self.config, &mut self.rng, &self.exec)
    }

    pub fn ergodic(&self) -> Result<ErgodicPoint> {
        ergodic_point(&self.state, self.problem, &self.config)
    }
}

/// Runs the randomized method with a fixed configuration and records a
/// trace (see [`crate::harness::run_algorithm`]).
pub fn run(
    problem: &ConstrainedProblem,
    config: SolverConfig,
    opts: &crate::harness::RunOptions,
    exec_workers: usize,
) -> Result<crate::harness::RunOutcome> {
    let params = crate::algorithm::AlgoParams {
        config: Some(config),
        workers: Some(exec_workers),
        ..Default::default()
    };
    let mut algo = crate::algorithm::AlgorithmRegistry::standard().build("rpdbu", problem, &params)?;
    Ok(crate::harness::run_algorithm(
        algo.as_mut(),
        problem,
        opts,
        &mut |_| crate::harness::Control::Continue,
    ))
}

/// `‖r‖` for reporting.
pub fn residual_norm(state: &IterateState) -> f64 {
    norm2(&state.r)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{BlockLinearMap, BlockPartition, DenseMatrix};
    use crate::prox::ProxOracle;
    use crate::smooth::SmoothOracle;

    fn scalar(a: f64, b: f64, prox: ProxOracle, f: SmoothOracle) -> ConstrainedProblem {
        let part = Arc::new(BlockPartition::new(vec![1]).unwrap());
        let map = BlockLinearMap::new(part, 1, vec![DenseMatrix::from_rows(&[vec![a]]).unwrap()]).unwrap();
        ConstrainedProblem::new(map, None, vec![b], f, SmoothOracle::zero(), vec![prox], vec![]).unwrap()
    }

    fn cfg(eta: f64, rho_x: f64, rho: f64) -> SolverConfig {
        SolverConfig {
            regime: Regime::NoY,
            n: 1,
            m: 0,
            rho_x,
            rho_y: 0.0,
            rho,
            eta_x: vec![eta],
            eta_y: vec![],
            max_iters: 10,
            seed: 0,
        }
    }

    fn xv(p: &ConstrainedProblem, v: Vec<f64>) -> BlockVector {
        BlockVector::from_vec(p.x_partition().clone(), v).unwrap()
    }

    #[test]
    fn init_residual_scalar() {
        let p = scalar(2.0, 3.0, ProxOracle::Zero, SmoothOracle::zero());
        let s = init_state(&p, xv(&p, vec![1.0]), p.zero_y()).unwrap();
        assert_eq!(s.r, vec![-1.0]);
        assert_eq!(s.lambda, vec![0.0]);
        assert_eq!(s.k, 0);
    }

    #[test]
    fn x_update_scalar_l1() {
        let p = scalar(1.0, 0.0, ProxOracle::l1(1.0).unwrap(), SmoothOracle::zero());
        let mut s = init_state(&p, xv(&p, vec![1.0]), p.zero_y()).unwrap();
        s.lambda = vec![0.5];
        s.r = vec![0.2];
        let out = x_block_update(&s, &p, &cfg(2.0, 1.0, 1.0), 0).unwrap();
        assert!((out[0] - 0.65).abs() < 1e-15);
    }

    #[test]
    fn x_update_gradient_step_on_identity_quadratic() {
        let f = SmoothOracle::quadratic(DenseMatrix::identity(1), vec![0.0], 0.0).unwrap();
        let p = scalar(0.0, 0.0, ProxOracle::Zero, f);
        let s = init_state(&p, xv(&p, vec![3.0]), p.zero_y()).unwrap();
        assert_eq!(x_block_update(&s, &p, &cfg(1.0, 1.0, 1.0), 0).unwrap(), vec![0.0]);
    }

    #[test]
    fn one_iteration_scalar_sequence() {
        // A = 2, b = 3, x⁰ = 1, f = 0, η = 4, ρ_x = 1, ρ = 1:
        // r⁰ = −1, x¹ = 1 − (2·(−1))/4 = 1.5, r¹ = 0, λ¹ = 0
        let p = scalar(2.0, 3.0, ProxOracle::Zero, SmoothOracle::zero());
        let mut solver = Rpdbu::with_start(&p, cfg(4.0, 1.0, 1.0), Exec::serial(), xv(&p, vec![1.0]), p.zero_y())
            .unwrap();
        solver.step().unwrap();
        assert_eq!(solver.state.x.as_slice(), &[1.5]);
        assert_eq!(solver.state.r, vec![0.0]);
        assert_eq!(solver.state.lambda, vec![0.0]);
        // η = 8: x¹ = 1.25, r¹ = −0.5, λ¹ = 0.5
        let mut solver = Rpdbu::with_start(&p, cfg(8.0, 1.0, 1.0), Exec::serial(), xv(&p, vec![1.0]), p.zero_y())
            .unwrap();
        solver.step().unwrap();
        assert_eq!(solver.state.x.as_slice(), &[1.25]);
        assert_eq!(solver.state.r, vec![-0.5]);
        assert_eq!(solver.state.lambda, vec![0.5]);
    }

    #[test]
    fn zero_rho_freezes_multiplier() {
        let p = scalar(2.0, 3.0, ProxOracle::Zero, SmoothOracle::zero());
        let mut solver =
            Rpdbu::with_start(&p, cfg(8.0, 1.0, 0.0), Exec::serial(), xv(&p, vec![1.0]), p.zero_y()).unwrap();
        for _ in 0..5 {
            solver.step().unwrap();
        }
        assert_eq!(solver.state.lambda, vec![0.0]);
    }

    #[test]
    fn ergodic_scalar_example() {
        let p = scalar(1.0, 0.0, ProxOracle::Zero, SmoothOracle::zero());
        let mut s = init_state(&p, xv(&p, vec![0.0]), p.zero_y()).unwrap();
        // iterates x¹ = 1, x² = 2, x³ = 3 with θ = 0.5 (N = 2 not needed: use average directly)
        for v in [1.0, 2.0, 3.0] {
            s.push_ergodic();
            s.x = xv(&p, vec![v]);
            s.k += 1;
        }
        assert_eq!(average(s.x.as_slice(), &s.erg_sum_x, 0.5, s.k - 1), vec![2.25]);
        let c = cfg(1.0, 1.0, 1.0);
        assert_eq!(ergodic_point(&s, &p, &c).unwrap().x_hat.as_slice(), &[2.0]);
    }

    #[test]
    fn ergodic_requires_a_step() {
        let p = scalar(1.0, 0.0, ProxOracle::Zero, SmoothOracle::zero());
        let s = init_state(&p, p.zero_x(), p.zero_y()).unwrap();
        assert!(ergodic_point(&s, &p, &cfg(1.0, 1.0, 1.0)).is_err());
    }

    #[test]
    fn shape_checks() {
        let p = scalar(1.0, 0.0, ProxOracle::Zero, SmoothOracle::zero());
        let mut c = cfg(1.0, 1.0, 1.0);
        c.n = 2;
        let err = c.check_shape(&p).unwrap_err().to_string();
        assert!(err.contains("uniform subset sampling"), "{err}");
        let mut c = cfg(1.0, 1.0, 1.0);
        c.regime = Regime::SingleY;
        assert!(c.check_shape(&p).is_err());
        let c = cfg(-1.0, 1.0, 1.0);
        assert!(c.check_shape(&p).is_err());
    }
}
