//! Name-keyed registry of solvers behind a common trait object, so drivers
//! (the harness, the CLI) select an algorithm with a string.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::baselines::{cyclic_linearized_admm_step, linearized_alm_step, prox_jadmm_step, BaselineKind};
use crate::engine::{
    average, default_start, ergodic_point, init_state, step, ErgodicPoint, Exec, IterateState, Regime,
    ResidualAudit, SolverConfig,
};
use crate::error::{Error, Result};
use crate::linalg::BlockVector;
use crate::problem::ConstrainedProblem;
use crate::rng::{stream_rng, SolverRng, Stream};
use crate::stochastic::{Rpdbus, StepSchedule, StochasticOracle};
use crate::validate::{derive_params, derive_stochastic_params};

/// A solver bound to a problem, advanced one iteration at a time.
pub trait Algorithm: Send {
    fn name(&self) -> &str;
    fn step(&mut self) -> Result<()>;
    /// iterations taken so far
    fn iteration(&self) -> usize;
    /// blocks updated per iteration on the x side
    fn sample_size(&self) -> usize;
    /// `k·n/N`
    fn epoch(&self) -> f64;
    fn last_point(&self) -> (&BlockVector, &BlockVector);
    fn ergodic_point(&self) -> Result<ErgodicPoint>;
    fn audit(&self) -> ResidualAudit;
    fn state(&self) -> &IterateState;
    fn config(&self) -> &SolverConfig;
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum ScheduleChoice {
    /// `α_k = α₀/√k`
    #[default]
    SqrtK,
    /// `α_k = α₀/√t` for a horizon `t` equal to the iteration budget
    Fixed,
}

impl std::str::FromStr for ScheduleChoice {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "sqrtk" => Ok(ScheduleChoice::SqrtK),
            "fixed" => Ok(ScheduleChoice::Fixed),
            other => Err(Error::param(format!("unknown schedule `{other}` (expected sqrtk or fixed)"))),
        }
    }
}

/// Options shared by every factory. Unset fields fall back to per-algorithm
/// defaults; `config` replaces the derived parameters entirely.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "camelCase", default, deny_unknown_fields)]
pub struct AlgoParams {
    pub regime: Option<Regime>,
    pub n: Option<usize>,
    pub m: Option<usize>,
    pub rho_x: Option<f64>,
    pub seed: Option<u64>,
    /// iteration budget (sets the fixed-horizon step size)
    pub iters: Option<usize>,
    pub workers: Option<usize>,
    pub schedule: Option<ScheduleChoice>,
    pub alpha0: Option<f64>,
    pub sigma: Option<f64>,
    pub gamma: Option<f64>,
    pub config: Option<SolverConfig>,
}

impl AlgoParams {
    pub fn resolved_seed(&self) -> u64 {
        self.seed.or(self.config.as_ref().map(|c| c.seed)).unwrap_or(0)
    }

    fn exec(&self) -> Result<Exec> {
        Exec::with_workers(self.workers.unwrap_or(1))
    }

    fn rho_x(&self) -> f64 {
        self.rho_x.unwrap_or(1.0)
    }

    /// `m` for a given regime: all y blocks in single-y, `nM/N` in multi-xy.
    fn m_for(&self, problem: &ConstrainedProblem, regime: Regime, n: usize) -> Result<usize> {
        if let Some(m) = self.m {
            return Ok(m);
        }
        let (big_n, big_m) = (problem.num_x_blocks(), problem.num_y_blocks());
        match regime {
            Regime::NoY => Ok(0),
            Regime::SingleY => Ok(big_m),
            Regime::MultiXY => {
                if !(n * big_m).is_multiple_of(big_n) {
                    return Err(Error::param(format!(
                        "cannot infer m: n·M/N = {n}·{big_m}/{big_n} is not an integer; pass m explicitly"
                    )));
                }
                Ok(n * big_m / big_n)
            }
        }
    }

    /// Derived configuration with `n` defaulting to `default_n`.
    fn derived(&self, problem: &ConstrainedProblem, default_n: usize) -> Result<SolverConfig> {
        let mut cfg = match &self.config {
            Some(c) => c.clone(),
            None => {
                let regime = self.regime.unwrap_or_else(|| Regime::infer(problem));
                let n = self.n.unwrap_or(default_n);
                let m = self.m_for(problem, regime, n)?;
                derive_params(problem, regime, n, m, self.rho_x())?
            }
        };
        cfg.seed = self.resolved_seed();
        if let Some(t) = self.iters {
            cfg.max_iters = t;
        }
        Ok(cfg)
    }

    /// Full-sweep configuration for the deterministic baselines. Without y
    /// (or with one y block) the single-y bounds at θ = 1 are used.
    fn full_sweep(&self, problem: &ConstrainedProblem) -> Result<SolverConfig> {
        let full = AlgoParams {
            n: Some(problem.num_x_blocks()),
            m: Some(problem.num_y_blocks()),
            regime: Some(self.regime.unwrap_or(if problem.has_y() {
                Regime::SingleY
            } else {
                Regime::NoY
            })),
            ..self.clone()
        };
        full.derived(problem, problem.num_x_blocks())
    }
}

pub trait AlgorithmFactory: Send + Sync {
    fn description(&self) -> &str;
    fn build<'a>(&self, problem: &'a ConstrainedProblem, params: &AlgoParams) -> Result<Box<dyn Algorithm + 'a>>;
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum DetKind {
    Rpdbu,
    Lalm,
    Ladmm,
    Pjadmm { gamma: f64 },
}

/// Every method that shares [`IterateState`]: the randomized method and the
/// deterministic baselines.
struct DeterministicFamily<'a> {
    name: &'static str,
    kind: DetKind,
    problem: &'a ConstrainedProblem,
    config: SolverConfig,
    state: IterateState,
    rng: SolverRng,
    exec: Exec,
}

impl<'a> DeterministicFamily<'a> {
    fn new(
        name: &'static str,
        kind: DetKind,
        problem: &'a ConstrainedProblem,
        config: SolverConfig,
        exec: Exec,
    ) -> Result<Self> {
        config.check_shape(problem)?;
        let (x0, y0) = default_start(problem)?;
        Ok(Self {
            name,
            kind,
            problem,
            state: init_state(problem, x0, y0)?,
            rng: stream_rng(config.seed, Stream::Sampling),
            config,
            exec,
        })
    }
}

impl Algorithm for DeterministicFamily<'_> {
    fn name(&self) -> &str {
        self.name
    }

    fn step(&mut self) -> Result<()> {
        let (s, p, c) = (&mut self.state, self.problem, &self.config);
        match self.kind {
            DetKind::Rpdbu => step(s, p, c, &mut self.rng, &self.exec),
            DetKind::Lalm => linearized_alm_step(s, p, c, &self.exec),
            DetKind::Ladmm => cyclic_linearized_admm_step(s, p, c),
            DetKind::Pjadmm { gamma } => prox_jadmm_step(s, p, c, gamma, &self.exec),
        }
    }

    fn iteration(&self) -> usize {
        self.state.k
    }

    fn sample_size(&self) -> usize {
        self.config.n
    }

    fn epoch(&self) -> f64 {
        self.state.k as f64 * self.config.n as f64 / self.problem.num_x_blocks() as f64
    }

    fn last_point(&self) -> (&BlockVector, &BlockVector) {
        (&self.state.x, &self.state.y)
    }

    fn ergodic_point(&self) -> Result<ErgodicPoint> {
        match self.kind {
            DetKind::Rpdbu | DetKind::Lalm => ergodic_point(&self.state, self.problem, &self.config),
            // plain running average
            DetKind::Ladmm | DetKind::Pjadmm { .. } => {
                let s = &self.state;
                if s.k == 0 {
                    return Err(Error::param("ergodic point requested before the first iteration"));
                }
                let t = s.k - 1;
                Ok(ErgodicPoint {
                    x_hat: BlockVector::from_vec(
                        self.problem.x_partition().clone(),
                        average(s.x.as_slice(), &s.erg_sum_x, 1.0, t),
                    )?,
                    y_hat: BlockVector::from_vec(
                        self.problem.y_partition().clone(),
                        average(s.y.as_slice(), &s.erg_sum_y, 1.0, t),
                    )?,
                    t,
                })
            }
        }
    }

    fn audit(&self) -> ResidualAudit {
        self.state.audit
    }

    fn state(&self) -> &IterateState {
        &self.state
    }

    fn config(&self) -> &SolverConfig {
        &self.config
    }
}

struct StochasticAlgo<'a> {
    inner: Rpdbus<'a>,
}

impl Algorithm for StochasticAlgo<'_> {
    fn name(&self) -> &str {
        "rpdbus"
    }

    fn step(&mut self) -> Result<()> {
        self.inner.step()
    }

    fn iteration(&self) -> usize {
        self.inner.state.inner.k
    }

    fn sample_size(&self) -> usize {
        self.inner.config.n
    }

    fn epoch(&self) -> f64 {
        self.iteration() as f64 * self.inner.config.n as f64 / self.inner.problem.num_x_blocks() as f64
    }

    fn last_point(&self) -> (&BlockVector, &BlockVector) {
        (&self.inner.state.inner.x, &self.inner.state.inner.y)
    }

    fn ergodic_point(&self) -> Result<ErgodicPoint> {
        self.inner.ergodic()
    }

    fn audit(&self) -> ResidualAudit {
        self.inner.state.inner.audit
    }

    fn state(&self) -> &IterateState {
        &self.inner.state.inner
    }

    fn config(&self) -> &SolverConfig {
        &self.inner.config
    }
}

struct RpdbuFactory;
struct RpdbusFactory;
struct LalmFactory;
struct LadmmFactory;
struct PjadmmFactory;

impl AlgorithmFactory for RpdbuFactory {
    fn description(&self) -> &str {
        "randomized primal-dual block coordinate update (n sampled x blocks per iteration)"
    }

    fn build<'a>(&self, problem: &'a ConstrainedProblem, params: &AlgoParams) -> Result<Box<dyn Algorithm + 'a>> {
        let cfg = params.derived(problem, 1)?;
        Ok(Box::new(DeterministicFamily::new("rpdbu", DetKind::Rpdbu, problem, cfg, params.exec()?)?))
    }
}

impl AlgorithmFactory for RpdbusFactory {
    fn description(&self) -> &str {
        "stochastic-gradient variant for x-only problems with a feasible start"
    }

    fn build<'a>(&self, problem: &'a ConstrainedProblem, params: &AlgoParams) -> Result<Box<dyn Algorithm + 'a>> {
        let mut cfg = match &params.config {
            Some(c) => c.clone(),
            None => derive_stochastic_params(problem, params.n.unwrap_or(1), params.rho_x())?,
        };
        cfg.seed = params.resolved_seed();
        let alpha0 = params.alpha0.unwrap_or(1.0);
        let schedule = match params.schedule.unwrap_or_default() {
            ScheduleChoice::SqrtK => StepSchedule::sqrt_k(alpha0)?,
            ScheduleChoice::Fixed => {
                let t = params
                    .iters
                    .ok_or_else(|| Error::param("the fixed schedule needs the iteration budget"))?;
                StepSchedule::fixed_horizon(t, alpha0)?
            }
        };
        if let Some(t) = params.iters {
            cfg.max_iters = t;
        }
        let oracle = StochasticOracle::gaussian(params.sigma.unwrap_or(0.0), cfg.seed)?;
        let inner = Rpdbus::new(problem, cfg, schedule, oracle, params.exec()?)?;
        Ok(Box::new(StochasticAlgo { inner }))
    }
}

impl AlgorithmFactory for LalmFactory {
    fn description(&self) -> &str {
        "linearized augmented Lagrangian (all blocks from the same point)"
    }

    fn build<'a>(&self, problem: &'a ConstrainedProblem, params: &AlgoParams) -> Result<Box<dyn Algorithm + 'a>> {
        let cfg = params.full_sweep(problem)?;
        Ok(Box::new(DeterministicFamily::new("lalm", DetKind::Lalm, problem, cfg, params.exec()?)?))
    }
}

impl AlgorithmFactory for LadmmFactory {
    fn description(&self) -> &str {
        "cyclic linearized ADMM (Gauss-Seidel over blocks)"
    }

    fn build<'a>(&self, problem: &'a ConstrainedProblem, params: &AlgoParams) -> Result<Box<dyn Algorithm + 'a>> {
        let cfg = params.full_sweep(problem)?;
        Ok(Box::new(DeterministicFamily::new("ladmm", DetKind::Ladmm, problem, cfg, Exec::serial())?))
    }
}

impl AlgorithmFactory for PjadmmFactory {
    fn description(&self) -> &str {
        "proximal Jacobian ADMM with damped multiplier step (gamma, default 1)"
    }

    fn build<'a>(&self, problem: &'a ConstrainedProblem, params: &AlgoParams) -> Result<Box<dyn Algorithm + 'a>> {
        let gamma = params.gamma.unwrap_or(1.0);
        BaselineKind::ProxJadmm { gamma }.check()?;
        if problem.has_y() {
            return Err(Error::Unsupported("pjadmm is implemented for x-only problems".into()));
        }
        let cfg = params.full_sweep(problem)?;
        Ok(Box::new(DeterministicFamily::new(
            "pjadmm",
            DetKind::Pjadmm { gamma },
            problem,
            cfg,
            params.exec()?,
        )?))
    }
}

pub struct AlgorithmRegistry {
    entries: BTreeMap<String, Box<dyn AlgorithmFactory>>,
}

impl AlgorithmRegistry {
    pub fn empty() -> Self {
        Self {
            entries: BTreeMap::new(),
        }
    }

    /// rpdbu, rpdbus, lalm, ladmm, pjadmm
    pub fn standard() -> Self {
        let mut r = Self::empty();
        r.register("rpdbu", Box::new(RpdbuFactory));
        r.register("rpdbus", Box::new(RpdbusFactory));
        r.register("lalm", Box::new(LalmFactory));
        r.register("ladmm", Box::new(LadmmFactory));
        r.register("pjadmm", Box::new(PjadmmFactory));
        r
    }

    /// Adds or replaces an entry.
    pub fn register(&mut self, name: &str, factory: Box<dyn AlgorithmFactory>) {
        self.entries.insert(name.to_string(), factory);
    }

    pub fn names(&self) -> Vec<&str> {
        self.entries.keys().map(String::as_str).collect()
    }

    pub fn get(&self, name: &str) -> Result<&dyn AlgorithmFactory> {
        self.entries.get(name).map(|b| b.as_ref()).ok_or_else(|| {
            Error::param(format!(
                "unknown algorithm `{name}` (available: {})",
                self.names().join(", ")
            ))
        })
    }

    pub fn build<'a>(
        &self,
        name: &str,
        problem: &'a ConstrainedProblem,
        params: &AlgoParams,
    ) -> Result<Box<dyn Algorithm + 'a>> {
        self.get(name)?.build(problem, params)
    }
}

impl Default for AlgorithmRegistry {
    fn default() -> Self {
        Self::standard()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::generate::{gen_ncqp, NcqpSpec};

    fn ncqp() -> ConstrainedProblem {
        gen_ncqp(NcqpSpec {
            m: 3,
            n: 8,
            blocks: 4,
            rank_deficit: 0,
            seed: 5,
        })
        .unwrap()
    }

    #[test]
    fn registry_lists_and_rejects() {
        let reg = AlgorithmRegistry::standard();
        assert_eq!(reg.names(), vec!["ladmm", "lalm", "pjadmm", "rpdbu", "rpdbus"]);
        let p = ncqp();
        let err = reg.build("nope", &p, &AlgoParams::default()).err().unwrap();
        assert!(err.to_string().contains("available: ladmm"));
    }

    #[test]
    fn every_algorithm_steps_on_ncqp() {
        let reg = AlgorithmRegistry::standard();
        let p = ncqp();
        let params = AlgoParams {
            iters: Some(10),
            ..Default::default()
        };
        for name in reg.names() {
            let mut a = reg.build(name, &p, &params).unwrap();
            for _ in 0..10 {
                a.step().unwrap();
            }
            assert_eq!(a.iteration(), 10);
            let e = a.ergodic_point().unwrap();
            assert!(e.x_hat.as_slice().iter().all(|v| v.is_finite()), "{name}");
        }
    }

    #[test]
    fn multi_xy_m_inference() {
        let params = AlgoParams {
            n: Some(1),
            ..Default::default()
        };
        let p = crate::generate::gen_classo(&crate::generate::random_classo_data(6, 4, 3, 1), 0.1, 2).unwrap();
        // one y block: single-y with m = M
        let cfg = params.derived(&p, 1).unwrap();
        assert_eq!((cfg.regime, cfg.m), (Regime::SingleY, 1));
        let bad = AlgoParams {
            regime: Some(Regime::MultiXY),
            n: Some(1),
            ..Default::default()
        };
        assert!(bad.derived(&p, 1).unwrap_err().to_string().contains("not an integer"));
    }

    #[test]
    fn seed_from_override_config() {
        let p = ncqp();
        let mut cfg = derive_params(&p, Regime::NoY, 2, 0, 1.0).unwrap();
        cfg.seed = 99;
        let params = AlgoParams {
            config: Some(cfg),
            ..Default::default()
        };
        assert_eq!(params.resolved_seed(), 99);
        let a = AlgorithmRegistry::standard().build("rpdbu", &p, &params).unwrap();
        assert_eq!(a.sample_size(), 2);
    }
}
