//! Instance generators.

use std::sync::Arc;

use rand::Rng;
use rand_distr::StandardNormal;

use crate::error::{Error, Result};
use crate::linalg::{dot, BlockLinearMap, BlockPartition, BlockVector, DenseMatrix};
use crate::problem::ConstrainedProblem;
use crate::prox::ProxOracle;
use crate::rng::{stream_rng, Stream};
use crate::smooth::SmoothOracle;

/// Shape of a random nonnegativity-constrained QP
/// `min ½xᵀQx + cᵀx  s.t.  Ax = b, x ≥ 0`.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct NcqpSpec {
    /// rows of A
    pub m: usize,
    /// number of variables
    pub n: usize,
    pub blocks: usize,
    /// `Q = HHᵀ` with `H ∈ R^{n×(n − rank_deficit)}`
    pub rank_deficit: usize,
    pub seed: u64,
}

/// Random NCQP. Draw order from the generator stream: H, A, c, then the
/// feasible point `x_feas ∈ [0,1)ⁿ` with `b = A x_feas`. The feasible point
/// is attached as the problem's initial x.
pub fn gen_ncqp(spec: NcqpSpec) -> Result<ConstrainedProblem> {
    let NcqpSpec {
        m,
        n,
        blocks,
        rank_deficit,
        seed,
    } = spec;
    if n == 0 || blocks == 0 || n % blocks != 0 {
        return Err(Error::param(format!(
            "variable count {n} must be divisible by the block count {blocks}"
        )));
    }
    if rank_deficit >= n {
        return Err(Error::param(format!("rank deficit {rank_deficit} must be below n = {n}")));
    }
    let mut rng = stream_rng(seed, Stream::Generator);
    let h_cols = n - rank_deficit;
    let h = gaussian_matrix(&mut rng, n, h_cols);
    let a = gaussian_matrix(&mut rng, m, n);
    let c: Vec<f64> = (0..n).map(|_| rng.sample(StandardNormal)).collect();
    let x_feas: Vec<f64> = (0..n).map(|_| rng.random::<f64>()).collect();

    let mut q = DenseMatrix::zeros(n, n);
    for i in 0..n {
        for j in i..n {
            let v = dot(h.row(i), h.row(j));
            q.set(i, j, v);
            q.set(j, i, v);
        }
    }

    let part = Arc::new(BlockPartition::uniform(n, blocks)?);
    let a_map = BlockLinearMap::from_dense(part.clone(), &a)?;
    let b = a_map.apply(&BlockVector::from_vec(part, x_feas.clone())?)?;
    let f = SmoothOracle::quadratic(q, c, 0.0)?;
    ConstrainedProblem::new(
        a_map,
        None,
        b,
        f,
        SmoothOracle::zero(),
        vec![ProxOracle::Nonneg; blocks],
        vec![],
    )?
    .with_initial_x(x_feas)
}

/// Data of a constrained lasso `min ½‖Ax − b‖² + τ‖x‖₁  s.t.  Cx ≤ d`.
#[derive(Debug, Clone)]
pub struct ClassoData {
    pub a: DenseMatrix,
    pub b_obs: Vec<f64>,
    pub c: DenseMatrix,
    pub d: Vec<f64>,
}

/// Slack reformulation `Σ C_i x_i + y = d, y ≥ 0` with l1 on each x block,
/// `f(x) = ½‖Ax − b‖²` and a single nonnegative y block.
pub fn gen_classo(data: &ClassoData, tau: f64, blocks: usize) -> Result<ConstrainedProblem> {
    let p = data.a.cols();
    if data.b_obs.len() != data.a.rows() {
        return Err(Error::DimensionMismatch {
            what: "classo observations",
            block: None,
            expected: data.a.rows(),
            found: data.b_obs.len(),
        });
    }
    if data.c.cols() != p {
        return Err(Error::DimensionMismatch {
            what: "classo constraint columns",
            block: None,
            expected: p,
            found: data.c.cols(),
        });
    }
    if data.d.len() != data.c.rows() {
        return Err(Error::DimensionMismatch {
            what: "classo constraint rhs",
            block: None,
            expected: data.c.rows(),
            found: data.d.len(),
        });
    }
    let part = Arc::new(BlockPartition::uniform(p, blocks)?);
    let x_map = BlockLinearMap::from_dense(part, &data.c)?;
    let k = data.c.rows();
    let y_part = Arc::new(BlockPartition::new(vec![k])?);
    let y_map = BlockLinearMap::new(y_part, k, vec![DenseMatrix::identity(k)])?;

    // ½‖Ax − b‖² = ½ xᵀ(AᵀA)x − (Aᵀb)ᵀx + ½‖b‖²
    let q = data.a.gram();
    let lin: Vec<f64> = data.a.t_matvec(&data.b_obs).into_iter().map(|v| -v).collect();
    let offset = 0.5 * dot(&data.b_obs, &data.b_obs);
    let f = SmoothOracle::quadratic(q, lin, offset)?;
    ConstrainedProblem::new(
        x_map,
        Some(y_map),
        data.d.clone(),
        f,
        SmoothOracle::zero(),
        vec![ProxOracle::l1(tau)?; blocks],
        vec![ProxOracle::Nonneg],
    )
}

/// Random classo data: sparse ground truth, noisy observations, and a
/// constraint set that contains the ground truth with positive slack.
pub fn random_classo_data(obs: usize, dim: usize, cons: usize, seed: u64) -> ClassoData {
    let mut rng = stream_rng(seed, Stream::Generator);
    let a = gaussian_matrix(&mut rng, obs, dim);
    let truth: Vec<f64> = (0..dim)
        .map(|_| {
            if rng.random::<f64>() < 0.2 {
                rng.sample::<f64, _>(StandardNormal)
            } else {
                0.0
            }
        })
        .collect();
    let mut b_obs = a.matvec(&truth);
    for v in b_obs.iter_mut() {
        *v += 0.1 * rng.sample::<f64, _>(StandardNormal);
    }
    let c = gaussian_matrix(&mut rng, cons, dim);
    let mut d = c.matvec(&truth);
    for v in d.iter_mut() {
        *v += rng.random::<f64>();
    }
    ClassoData { a, b_obs, c, d }
}

fn gaussian_matrix<R: Rng>(rng: &mut R, rows: usize, cols: usize) -> DenseMatrix {
    let data = (0..rows * cols).map(|_| rng.sample(StandardNormal)).collect();
    DenseMatrix::from_row_major(rows, cols, data).expect("sized by construction")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn ncqp_partition_shape() {
        let p = gen_ncqp(NcqpSpec {
            m: 20,
            n: 100,
            blocks: 20,
            rank_deficit: 0,
            seed: 3,
        })
        .unwrap();
        assert_eq!(p.num_x_blocks(), 20);
        assert!(p.x_partition().dims().iter().all(|d| *d == 5));
        assert_eq!(p.row_dim(), 20);
        assert!(!p.has_y());
    }

    #[test]
    fn ncqp_is_deterministic_and_feasible() {
        let spec = NcqpSpec {
            m: 4,
            n: 12,
            blocks: 3,
            rank_deficit: 2,
            seed: 11,
        };
        let a = gen_ncqp(spec).unwrap();
        let b = gen_ncqp(spec).unwrap();
        assert_eq!(a, b);
        let x0 = BlockVector::from_vec(a.x_partition().clone(), a.initial_x().unwrap().to_vec()).unwrap();
        assert_eq!(a.feas_violation(&x0, &a.zero_y()).unwrap(), 0.0);
        assert!(x0.as_slice().iter().all(|v| *v >= 0.0));
        let other = gen_ncqp(NcqpSpec { seed: 12, ..spec }).unwrap();
        assert_ne!(a, other);
    }

    #[test]
    fn ncqp_rejects_bad_shapes() {
        let base = NcqpSpec {
            m: 2,
            n: 10,
            blocks: 3,
            rank_deficit: 0,
            seed: 0,
        };
        assert!(gen_ncqp(base).is_err());
        assert!(gen_ncqp(NcqpSpec {
            blocks: 5,
            rank_deficit: 10,
            ..base
        })
        .is_err());
    }

    #[test]
    fn classo_scalar_reformulation() {
        let data = ClassoData {
            a: DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            b_obs: vec![0.5],
            c: DenseMatrix::from_rows(&[vec![1.0]]).unwrap(),
            d: vec![2.0],
        };
        let pr = gen_classo(&data, 0.0, 1).unwrap();
        let x = BlockVector::from_vec(pr.x_partition().clone(), vec![1.0]).unwrap();
        let y = BlockVector::from_vec(pr.y_partition().clone(), vec![2.0 - 1.0]).unwrap();
        assert_eq!(y.as_slice(), &[1.0]);
        assert_eq!(pr.feas_violation(&x, &y).unwrap(), 0.0);
        // τ = 0: objective is ½‖Ax − b‖²
        assert!((pr.objective(&x, &y).unwrap() - 0.125).abs() < 1e-15);
    }

    #[test]
    fn classo_feasible_points_map_to_nonnegative_slack() {
        let data = random_classo_data(8, 6, 4, 5);
        let pr = gen_classo(&data, 0.3, 3).unwrap();
        let x = vec![0.0; 6];
        let slack: Vec<f64> = data.d.iter().zip(data.c.matvec(&x)).map(|(d, cx)| d - cx).collect();
        if slack.iter().all(|s| *s >= 0.0) {
            let xb = BlockVector::from_vec(pr.x_partition().clone(), x).unwrap();
            let yb = BlockVector::from_vec(pr.y_partition().clone(), slack).unwrap();
            assert!(pr.feas_violation(&xb, &yb).unwrap() < 1e-12);
            assert!(pr.objective(&xb, &yb).unwrap().is_finite());
        }
        assert!(gen_classo(&data, 0.3, 4).is_err());
    }
}
