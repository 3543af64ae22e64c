//! Deterministic reference methods.
//!
//! * linearized ALM: every block updated from the same point, then the
//!   multiplier (the full-sampling case of the randomized method);
//! * cyclic linearized ADMM: blocks in ascending order, residual refreshed
//!   after each block;
//! * proximal Jacobian ADMM with multiplier damping γ;
//! * classic two-block ADMM for orthonormal-column maps;
//! * the parameter mapping that turns the randomized primal-dual
//!   saddle-point scheme into an instance of the randomized method.

use serde::{Deserialize, Serialize};

use crate::engine::{
    begin_iteration, commit_x, commit_y, dual_direction, end_iteration, prox_linear_x, step_with_samples,
    x_update_with, y_update_with, Exec, IterateState, Regime, SolverConfig,
};
use crate::error::{Error, Result};
use crate::linalg::axpy;
use crate::problem::ConstrainedProblem;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "camelCase")]
pub enum BaselineKind {
    LinearizedAlm,
    CyclicLinearizedAdmm,
    ProxJadmm { gamma: f64 },
    TwoBlockAdmm,
    Pds { q: f64, eta: f64, tau: f64 },
}

impl BaselineKind {
    pub fn check(&self) -> Result<()> {
        match *self {
            BaselineKind::ProxJadmm { gamma } if !(gamma >= 0.0) || !gamma.is_finite() => {
                Err(Error::param(format!("damping gamma must be finite and nonnegative, got {gamma}")))
            }
            BaselineKind::Pds { q, eta, tau } if !(0.0..=1.0).contains(&q) || !(eta > 0.0) || !(tau > 0.0) => {
                Err(Error::param(format!(
                    "primal-dual scheme needs q in [0, 1] and eta, tau > 0 (got q = {q}, eta = {eta}, tau = {tau})"
                )))
            }
            _ => Ok(()),
        }
    }
}

fn require_full(problem: &ConstrainedProblem, config: &SolverConfig) -> Result<()> {
    if config.n != problem.num_x_blocks() || (config.updates_y() && config.m != problem.num_y_blocks()) {
        return Err(Error::param(
            "full-sweep baselines need n = N (and m = M when y is present)",
        ));
    }
    Ok(())
}

/// All blocks from the same point: the randomized step with `I_k = [N]`,
/// `J_k = [M]` and no random draws.
pub fn linearized_alm_step(
    state: &mut IterateState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
    exec: &Exec,
) -> Result<()> {
    require_full(problem, config)?;
    let xs: Vec<usize> = (0..problem.num_x_blocks()).collect();
    let ys: Vec<usize> = (0..problem.num_y_blocks()).collect();
    step_with_samples(
        state,
        problem,
        config,
        &xs,
        config.updates_y().then_some(&ys[..]),
        exec,
    )
}

/// Gauss–Seidel sweep: block `i` sees the blocks before it already
/// updated, through both the gradient and the refreshed residual.
pub fn cyclic_linearized_admm_step(
    state: &mut IterateState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
) -> Result<()> {
    cyclic_sweep(state, problem, config, &mut |_| Ok(()))
}

/// Cyclic sweep with a hook called after each block commit (used to audit
/// the residual between blocks).
pub fn cyclic_sweep(
    state: &mut IterateState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
    after_block: &mut dyn FnMut(&IterateState) -> Result<()>,
) -> Result<()> {
    require_full(problem, config)?;
    begin_iteration(state);
    for i in 0..problem.num_x_blocks() {
        let dual = dual_direction(config.rho_x, &state.r, &state.lambda);
        let v = x_update_with(state, problem, config, i, &dual)?;
        commit_x(state, problem, &[i], vec![v]);
        after_block(state)?;
    }
    if config.updates_y() {
        for j in 0..problem.num_y_blocks() {
            let dual = dual_direction(config.rho_y, &state.r, &state.lambda);
            let v = y_update_with(state, problem, config, j, &dual)?;
            commit_y(state, problem, &[j], vec![v]);
            after_block(state)?;
        }
    }
    axpy(-config.rho, &state.r, &mut state.lambda);
    end_iteration(state, problem)
}

/// Proximal Jacobian ADMM: every block from `x^k` against the residual
/// `Ax^k − b` (recomputed), then `λ ← λ − γρ(Ax^{k+1} − b)`. A smooth `f`
/// is linearized at `x^k`.
pub fn prox_jadmm_step(
    state: &mut IterateState,
    problem: &ConstrainedProblem,
    config: &SolverConfig,
    gamma: f64,
    exec: &Exec,
) -> Result<()> {
    if problem.has_y() {
        return Err(Error::Unsupported("proximal Jacobian ADMM is implemented for x blocks only".into()));
    }
    require_full(problem, config)?;
    begin_iteration(state);
    let r = problem.residual(&state.x, &state.y)?;
    let dual = dual_direction(config.rho_x, &r, &state.lambda);
    let idx: Vec<usize> = (0..problem.num_x_blocks()).collect();
    let frozen = &*state;
    let new_x = exec.map(&idx, |i| {
        let grad = problem
            .f()
            .block_gradient(frozen.x.as_slice(), problem.x_partition().range(i))?;
        prox_linear_x(problem, i, frozen.x.block(i), &grad, &dual, config.eta_x[i])
    })?;
    for (i, v) in new_x.into_iter().enumerate() {
        state.x.set_block(i, &v);
    }
    state.r = problem.residual(&state.x, &state.y)?;
    axpy(-gamma * config.rho, &state.r, &mut state.lambda);
    end_iteration(state, problem)
}

/// Classic two-block ADMM for `min u(x) + v(y)  s.t.  Ax + By = b` when `A`
/// and `B` have orthonormal columns, so each exact block minimization is a
/// single prox:
///
/// ```text
/// x ← prox_{u,ρ}( Aᵀ(b − By + λ/ρ) )
/// y ← prox_{v,ρ}( Bᵀ(b − Ax + λ/ρ) )
/// λ ← λ − ρ(Ax + By − b)
/// ```
#[derive(Debug, Clone)]
pub struct TwoBlockAdmm<'a> {
    problem: &'a ConstrainedProblem,
    pub rho: f64,
    pub x: Vec<f64>,
    pub y: Vec<f64>,
    pub lambda: Vec<f64>,
}

impl<'a> TwoBlockAdmm<'a> {
    pub fn new(problem: &'a ConstrainedProblem, rho: f64, x0: Vec<f64>, y0: Vec<f64>) -> Result<Self> {
        if problem.num_x_blocks() != 1 || problem.num_y_blocks() != 1 {
            return Err(Error::Unsupported("two-block ADMM needs exactly one x and one y block".into()));
        }
        if !problem.f().is_zero() || !problem.g().is_zero() {
            return Err(Error::Unsupported("two-block ADMM here assumes f = g = 0".into()));
        }
        if !(rho > 0.0) {
            return Err(Error::param("two-block ADMM needs rho > 0"));
        }
        for (what, m) in [("A", problem.x_map().block(0)), ("B", problem.y_map().expect("y").block(0))] {
            let g = m.gram();
            let mut dev: f64 = 0.0;
            for r in 0..g.rows() {
                for c in 0..g.cols() {
                    let target = if r == c { 1.0 } else { 0.0 };
                    dev = dev.max((g.get(r, c) - target).abs());
                }
            }
            if dev > 1e-10 {
                return Err(Error::Unsupported(format!(
                    "two-block ADMM needs orthonormal columns; {what}ᵀ{what} deviates from I by {dev:e}"
                )));
            }
        }
        let p = problem.row_dim();
        Ok(Self {
            problem,
            rho,
            x: x0,
            y: y0,
            lambda: vec![0.0; p],
        })
    }

    pub fn step(&mut self) -> Result<()> {
        let a = self.problem.x_map().block(0);
        let b = self.problem.y_map().expect("checked").block(0);
        let rho = self.rho;
        let target = |other: &[f64], lambda: &[f64]| -> Vec<f64> {
            self.problem
                .b()
                .iter()
                .zip(other)
                .zip(lambda)
                .map(|((bi, oi), li)| bi - oi + li / rho)
                .collect()
        };
        let by = b.matvec(&self.y);
        let x = self.problem.x_prox()[0].prox(&a.t_matvec(&target(&by, &self.lambda)), rho)?;
        let ax = a.matvec(&x);
        let y = self.problem.y_prox()[0].prox(&b.t_matvec(&target(&ax, &self.lambda)), rho)?;
        let by = b.matvec(&y);
        for ((l, (axi, byi)), bi) in self.lambda.iter_mut().zip(ax.iter().zip(&by)).zip(self.problem.b()) {
            *l -= rho * (axi + byi - bi);
        }
        self.x = x;
        self.y = y;
        Ok(())
    }
}

/// Configuration under which the randomized method coincides with
/// two-block ADMM on orthonormal-column maps: `θ = 1`, `ρ_x = ρ_y = ρ`,
/// `η = ρ‖A‖²`, `η' = ρ‖B‖²` (so `P^k = Q^k = 0`).
pub fn two_block_admm_config(problem: &ConstrainedProblem, rho: f64) -> Result<SolverConfig> {
    if problem.num_x_blocks() != 1 || problem.num_y_blocks() != 1 {
        return Err(Error::Unsupported("two-block ADMM needs exactly one x and one y block".into()));
    }
    let a = problem.x_map().spectral_norm_sq(0)?;
    let b = problem.y_map().expect("y").spectral_norm_sq(0)?;
    Ok(SolverConfig {
        regime: Regime::SingleY,
        n: 1,
        m: 1,
        rho_x: rho,
        rho_y: rho,
        rho,
        eta_x: vec![rho * a],
        eta_y: vec![rho * b],
        max_iters: 0,
        seed: 0,
    })
}

/// Maps the randomized primal-dual saddle-point scheme with parameters
/// `(q, η, τ)` onto the randomized method for problems of the form
/// `min Σ u_i(x_i) + g(y)  s.t.  Ax + y = 0` (one y block, `B = I`,
/// `b = 0`, `g` given as the y prox): one x block per iteration,
/// `ρ_x = q/η`, `ρ = ρ_y = 1/η`, `η_i = τ`, `η' = 1/η` (so `Q^k = 0`).
pub fn pds_config(problem: &ConstrainedProblem, q: f64, eta: f64, tau: f64) -> Result<SolverConfig> {
    BaselineKind::Pds { q, eta, tau }.check()?;
    let shape_err = |why: &str| Error::Unsupported(format!("problem is not in the saddle-point form: {why}"));
    let ym = problem.y_map().ok_or_else(|| shape_err("no y block"))?;
    if problem.num_y_blocks() != 1 {
        return Err(shape_err("more than one y block"));
    }
    let bm = ym.block(0);
    if bm.rows() != bm.cols() || *bm != crate::linalg::DenseMatrix::identity(bm.rows()) {
        return Err(shape_err("B is not the identity"));
    }
    if problem.b().iter().any(|v| *v != 0.0) {
        return Err(shape_err("b is not zero"));
    }
    if !problem.f().is_zero() || !problem.g().is_zero() {
        return Err(shape_err("smooth terms must be zero (g enters through the y prox)"));
    }
    Ok(SolverConfig {
        regime: Regime::SingleY,
        n: 1,
        m: 1,
        rho_x: q / eta,
        rho_y: 1.0 / eta,
        rho: 1.0 / eta,
        eta_x: vec![tau; problem.num_x_blocks()],
        eta_y: vec![1.0 / eta],
        max_iters: 0,
        seed: 0,
    })
}

/// Block Lipschitz constants `λ_max(Q_ii)` of a quadratic f (for the
/// unconstrained coordinate-descent reduction).
pub fn block_lipschitz(problem: &ConstrainedProblem) -> Result<Vec<f64>> {
    match &problem.f().kind {
        crate::smooth::SmoothKind::Quadratic { q, .. } => {
            let part = problem.x_partition();
            Ok((0..part.num_blocks())
                .map(|i| {
                    let r = part.range(i);
                    let mut sub = crate::linalg::DenseMatrix::zeros(r.len(), r.len());
                    for (a, ra) in r.clone().enumerate() {
                        for (b, rb) in r.clone().enumerate() {
                            sub.set(a, b, q.get(ra, rb));
                        }
                    }
                    sub.largest_eigenvalue_sym()
                })
                .collect())
        }
        crate::smooth::SmoothKind::Zero => Ok(vec![0.0; problem.num_x_blocks()]),
        crate::smooth::SmoothKind::Custom(_) => Ok(vec![problem.f().lipschitz; problem.num_x_blocks()]),
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::engine::init_state;
    use crate::linalg::{BlockLinearMap, BlockPartition, DenseMatrix};
    use crate::prox::ProxOracle;
    use crate::smooth::SmoothOracle;
    use std::sync::Arc;

    fn two_scalar_blocks() -> ConstrainedProblem {
        // x1 + x2 = 2, f = 0, no prox
        let part = Arc::new(BlockPartition::new(vec![1, 1]).unwrap());
        let map = BlockLinearMap::from_dense(part, &DenseMatrix::from_rows(&[vec![1.0, 1.0]]).unwrap()).unwrap();
        ConstrainedProblem::new(
            map,
            None,
            vec![2.0],
            SmoothOracle::zero(),
            SmoothOracle::zero(),
            vec![ProxOracle::Zero; 2],
            vec![],
        )
        .unwrap()
    }

    fn cfg(eta: f64) -> SolverConfig {
        SolverConfig {
            regime: Regime::NoY,
            n: 2,
            m: 0,
            rho_x: 1.0,
            rho_y: 0.0,
            rho: 1.0,
            eta_x: vec![eta; 2],
            eta_y: vec![],
            max_iters: 0,
            seed: 0,
        }
    }

    #[test]
    fn cyclic_two_block_hand_computed() {
        // x⁰ = 0, r⁰ = −2, η = 2:
        // x1 = 0 − (1·(−2))/2 = 1, r = −1; x2 = 0 − (−1)/2 = 0.5, r = −0.5; λ = 0.5
        let p = two_scalar_blocks();
        let mut s = init_state(&p, p.zero_x(), p.zero_y()).unwrap();
        cyclic_linearized_admm_step(&mut s, &p, &cfg(2.0)).unwrap();
        assert_eq!(s.x.as_slice(), &[1.0, 0.5]);
        assert_eq!(s.r, vec![-0.5]);
        assert_eq!(s.lambda, vec![0.5]);
    }

    #[test]
    fn cyclic_residual_matches_after_each_block() {
        let p = two_scalar_blocks();
        let mut s = init_state(&p, p.zero_x(), p.zero_y()).unwrap();
        for _ in 0..5 {
            cyclic_sweep(&mut s, &p, &cfg(3.0), &mut |st| {
                let fresh = p.residual(&st.x, &st.y)?;
                assert!((fresh[0] - st.r[0]).abs() <= 1e-9);
                Ok(())
            })
            .unwrap();
        }
    }

    #[test]
    fn lalm_hand_computed() {
        // both blocks see r⁰ = −2: x = (1, 1), r = 0, λ = 0
        let p = two_scalar_blocks();
        let mut s = init_state(&p, p.zero_x(), p.zero_y()).unwrap();
        linearized_alm_step(&mut s, &p, &cfg(2.0), &Exec::serial()).unwrap();
        assert_eq!(s.x.as_slice(), &[1.0, 1.0]);
        assert_eq!(s.r, vec![0.0]);
        assert_eq!(s.lambda, vec![0.0]);
    }

    #[test]
    fn pjadmm_hand_computed_and_frozen_multiplier() {
        // η = 4: x = (0.5, 0.5), r = −1, λ = γ·1
        let p = two_scalar_blocks();
        let mut s = init_state(&p, p.zero_x(), p.zero_y()).unwrap();
        prox_jadmm_step(&mut s, &p, &cfg(4.0), 0.5, &Exec::serial()).unwrap();
        assert_eq!(s.x.as_slice(), &[0.5, 0.5]);
        assert_eq!(s.lambda, vec![0.5]);
        let mut s = init_state(&p, p.zero_x(), p.zero_y()).unwrap();
        for _ in 0..4 {
            prox_jadmm_step(&mut s, &p, &cfg(4.0), 0.0, &Exec::serial()).unwrap();
        }
        assert_eq!(s.lambda, vec![0.0]);
    }

    #[test]
    fn single_block_cyclic_equals_lalm() {
        let part = Arc::new(BlockPartition::new(vec![2]).unwrap());
        let map = BlockLinearMap::from_dense(part, &DenseMatrix::from_rows(&[vec![1.0, -2.0]]).unwrap()).unwrap();
        let f = SmoothOracle::quadratic(DenseMatrix::diag(&[1.0, 3.0]), vec![0.5, -1.0], 0.0).unwrap();
        let p = ConstrainedProblem::new(
            map,
            None,
            vec![1.0],
            f,
            SmoothOracle::zero(),
            vec![ProxOracle::Nonneg],
            vec![],
        )
        .unwrap();
        let c = SolverConfig {
            n: 1,
            eta_x: vec![10.0],
            ..cfg(10.0)
        };
        let mut a = init_state(&p, p.zero_x(), p.zero_y()).unwrap();
        let mut b = a.clone();
        for _ in 0..20 {
            linearized_alm_step(&mut a, &p, &c, &Exec::serial()).unwrap();
            cyclic_linearized_admm_step(&mut b, &p, &c).unwrap();
        }
        assert_eq!(a.x, b.x);
        assert_eq!(a.lambda, b.lambda);
    }

    #[test]
    fn parameter_checks() {
        assert!(BaselineKind::ProxJadmm { gamma: -1.0 }.check().is_err());
        assert!(BaselineKind::Pds { q: 1.5, eta: 1.0, tau: 1.0 }.check().is_err());
        assert!(pds_config(&two_scalar_blocks(), 0.5, 1.0, 1.0).is_err());
    }
}
