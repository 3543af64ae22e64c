//! Proximal oracles for the separable part `u_i + ι_{X_i}` of each block.
//!
//! Every catalog kind has a closed-form prox:
//! `prox(v, η) = argmin_z u(z) + ι_X(z) + (η/2)‖z − v‖²`.

use std::fmt;
use std::sync::Arc;

use crate::error::{Error, Result};

/// Absolute tolerance used when testing set membership in objective values.
pub const SET_MEMBERSHIP_TOL: f64 = 1e-9;

/// User-supplied prox and value callbacks.
pub trait CustomProx: Send + Sync + fmt::Debug {
    fn prox(&self, v: &[f64], eta: f64) -> Result<Vec<f64>>;
    /// `u(z) + ι_X(z)`; `+∞` outside the set.
    fn value(&self, z: &[f64]) -> f64;
}

#[derive(Debug, Clone)]
pub enum ProxOracle {
    Zero,
    L1 { tau: f64 },
    Nonneg,
    Box { lo: f64, hi: f64 },
    L1Nonneg { tau: f64 },
    Custom(Arc<dyn CustomProx>),
}

impl PartialEq for ProxOracle {
    fn eq(&self, other: &Self) -> bool {
        use ProxOracle::*;
        match (self, other) {
            (Zero, Zero) | (Nonneg, Nonneg) => true,
            (L1 { tau: a }, L1 { tau: b }) | (L1Nonneg { tau: a }, L1Nonneg { tau: b }) => a == b,
            (Box { lo: a, hi: b }, Box { lo: c, hi: d }) => a == c && b == d,
            (Custom(a), Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

impl ProxOracle {
    pub fn l1(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(ProxOracle::L1 { tau })
    }

    pub fn l1_nonneg(tau: f64) -> Result<Self> {
        check_tau(tau)?;
        Ok(ProxOracle::L1Nonneg { tau })
    }

    pub fn boxed(lo: f64, hi: f64) -> Result<Self> {
        if lo.is_nan() || hi.is_nan() || lo > hi {
            return Err(Error::param(format!("box bounds [{lo}, {hi}] are empty")));
        }
        Ok(ProxOracle::Box { lo, hi })
    }

    pub fn kind_name(&self) -> &'static str {
        match self {
            ProxOracle::Zero => "zero",
            ProxOracle::L1 { .. } => "l1",
            ProxOracle::Nonneg => "nonneg",
            ProxOracle::Box { .. } => "box",
            ProxOracle::L1Nonneg { .. } => "l1nonneg",
            ProxOracle::Custom(_) => "custom",
        }
    }

    /// True when the oracle is a pure set indicator (its prox is a projection).
    pub fn is_indicator(&self) -> bool {
        matches!(self, ProxOracle::Zero | ProxOracle::Nonneg | ProxOracle::Box { .. })
    }

    /// Exact minimizer of `u(z) + ι_X(z) + (η/2)‖z − v‖²`.
    ///
    /// At the kink of the l1 terms (`|v|·η == τ`) the result is 0.
    pub fn prox(&self, v: &[f64], eta: f64) -> Result<Vec<f64>> {
        if !(eta > 0.0) || !eta.is_finite() {
            return Err(Error::param(format!("prox weight must be positive and finite, got {eta}")));
        }
        let out = match self {
            ProxOracle::Zero => v.to_vec(),
            ProxOracle::L1 { tau } => {
                let t = tau / eta;
                v.iter()
                    .map(|x| {
                        let m = x.abs() - t;
                        if m > 0.0 {
                            m.copysign(*x)
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            ProxOracle::Nonneg => v.iter().map(|x| x.max(0.0)).collect(),
            ProxOracle::Box { lo, hi } => v.iter().map(|x| x.clamp(*lo, *hi)).collect(),
            ProxOracle::L1Nonneg { tau } => {
                let t = tau / eta;
                v.iter()
                    .map(|x| {
                        let m = x - t;
                        if m > 0.0 {
                            m
                        } else {
                            0.0
                        }
                    })
                    .collect()
            }
            ProxOracle::Custom(c) => {
                let z = c.prox(v, eta)?;
                if z.len() != v.len() {
                    return Err(Error::Oracle(format!(
                        "custom prox returned {} entries for a block of {}",
                        z.len(),
                        v.len()
                    )));
                }
                z
            }
        };
        Ok(out)
    }

    /// `u(z) + ι_X(z)`, with set membership tested to [`SET_MEMBERSHIP_TOL`].
    pub fn value(&self, z: &[f64]) -> f64 {
        let tol = SET_MEMBERSHIP_TOL;
        match self {
            ProxOracle::Zero => 0.0,
            ProxOracle::L1 { tau } => tau * z.iter().map(|x| x.abs()).sum::<f64>(),
            ProxOracle::Nonneg => {
                if z.iter().all(|x| *x >= -tol) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxOracle::Box { lo, hi } => {
                if z.iter().all(|x| *x >= lo - tol && *x <= hi + tol) {
                    0.0
                } else {
                    f64::INFINITY
                }
            }
            ProxOracle::L1Nonneg { tau } => {
                if z.iter().all(|x| *x >= -tol) {
                    tau * z.iter().map(|x| x.abs()).sum::<f64>()
                } else {
                    f64::INFINITY
                }
            }
            ProxOracle::Custom(c) => c.value(z),
        }
    }
}

fn check_tau(tau: f64) -> Result<()> {
    if !(tau >= 0.0) || !tau.is_finite() {
        return Err(Error::param(format!("l1 weight must be finite and nonnegative, got {tau}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn soft_threshold() {
        let p = ProxOracle::l1(1.0).unwrap();
        assert_eq!(p.prox(&[3.0], 1.0).unwrap(), vec![2.0]);
        assert_eq!(p.prox(&[-3.0], 1.0).unwrap(), vec![-2.0]);
        // kink: |v|·η == τ
        assert_eq!(p.prox(&[0.5], 2.0).unwrap(), vec![0.0]);
    }

    #[test]
    fn nonneg_projection() {
        assert_eq!(ProxOracle::Nonneg.prox(&[-1.0, 2.0], 0.3).unwrap(), vec![0.0, 2.0]);
        assert_eq!(ProxOracle::Nonneg.prox(&[-1.0, 2.0], 7.0).unwrap(), vec![0.0, 2.0]);
    }

    /// 1-D grid search oracle over `u(z) + ι(z) + (η/2)(z − v)²`.
    fn grid_argmin(p: &ProxOracle, v: f64, eta: f64, lo: f64, hi: f64, step: f64) -> f64 {
        let n = ((hi - lo) / step).round() as usize;
        let mut best = (f64::INFINITY, lo);
        for k in 0..=n {
            let z = lo + k as f64 * step;
            let obj = p.value(&[z]) + 0.5 * eta * (z - v) * (z - v);
            if obj < best.0 {
                best = (obj, z);
            }
        }
        best.1
    }

    #[test]
    fn l1_nonneg_matches_grid_oracle() {
        let p = ProxOracle::l1_nonneg(0.5).unwrap();
        let oracle = grid_argmin(&p, 0.75, 2.0, -1.0, 2.0, 1e-6);
        assert!((oracle - 0.5).abs() < 2e-6);
        let got = p.prox(&[0.75], 2.0).unwrap()[0];
        assert!((got - oracle).abs() < 2e-6);
        assert_eq!(got, 0.5);
    }

    #[test]
    fn rejects_nonpositive_weight() {
        assert!(ProxOracle::Zero.prox(&[1.0], 0.0).is_err());
        assert!(ProxOracle::Zero.prox(&[1.0], -1.0).is_err());
        assert!(ProxOracle::l1(-1.0).is_err());
        assert!(ProxOracle::boxed(1.0, 0.0).is_err());
    }

    #[test]
    fn values_with_indicator() {
        assert_eq!(ProxOracle::l1(1.0).unwrap().value(&[1.0, -2.0]), 3.0);
        assert_eq!(ProxOracle::Nonneg.value(&[-1e-10, 3.0]), 0.0);
        assert!(ProxOracle::Nonneg.value(&[-1e-8]).is_infinite());
        assert!(ProxOracle::Box { lo: 0.0, hi: 1.0 }.value(&[1.5]).is_infinite());
    }

    fn catalog() -> impl Strategy<Value = ProxOracle> {
        prop_oneof![
            Just(ProxOracle::Zero),
            (0.0..3.0f64).prop_map(|tau| ProxOracle::L1 { tau }),
            Just(ProxOracle::Nonneg),
            (-2.0..0.0f64, 0.0..2.0f64).prop_map(|(lo, hi)| ProxOracle::Box { lo, hi }),
            (0.0..3.0f64).prop_map(|tau| ProxOracle::L1Nonneg { tau }),
        ]
    }

    proptest! {
        #[test]
        fn prox_satisfies_minimality(
            p in catalog(),
            v in prop::collection::vec(-5.0..5.0f64, 1..4),
            eta in 0.05..10.0f64,
            zs in prop::collection::vec(prop::collection::vec(-6.0..6.0f64, 4), 16),
        ) {
            let z_star = p.prox(&v, eta).unwrap();
            let obj = |z: &[f64]| {
                p.value(z) + 0.5 * eta * z.iter().zip(&v).map(|(a, b)| (a - b) * (a - b)).sum::<f64>()
            };
            let best = obj(&z_star);
            prop_assert!(best.is_finite());
            for z in &zs {
                let z = &z[..v.len()];
                prop_assert!(best <= obj(z) + 1e-9);
            }
        }

        #[test]
        fn projections_are_idempotent(
            p in catalog().prop_filter("indicator", |p| p.is_indicator()),
            v in prop::collection::vec(-5.0..5.0f64, 1..6),
            eta in 0.05..10.0f64,
        ) {
            let once = p.prox(&v, eta).unwrap();
            let twice = p.prox(&once, eta).unwrap();
            prop_assert_eq!(once, twice);
        }
    }
}
