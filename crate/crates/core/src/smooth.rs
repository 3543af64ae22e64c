//! Smooth coupled terms `f(x)` / `g(y)` with block partial gradients.

use std::fmt;
use std::ops::Range;
use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{dot, BlockVector, DenseMatrix};

pub trait CustomSmooth: Send + Sync + fmt::Debug {
    fn value(&self, x: &[f64]) -> Result<f64>;
    fn gradient(&self, x: &[f64]) -> Result<Vec<f64>>;

    /// Gradient restricted to `range`, evaluated at the full point.
    fn block_gradient(&self, x: &[f64], range: Range<usize>) -> Result<Vec<f64>> {
        Ok(self.gradient(x)?[range].to_vec())
    }
}

#[derive(Debug, Clone)]
pub enum SmoothKind {
    Zero,
    /// `½ xᵀQx + cᵀx + offset`
    Quadratic {
        q: DenseMatrix,
        c: Vec<f64>,
        offset: f64,
    },
    Custom(Arc<dyn CustomSmooth>),
}

impl PartialEq for SmoothKind {
    fn eq(&self, other: &Self) -> bool {
        match (self, other) {
            (SmoothKind::Zero, SmoothKind::Zero) => true,
            (
                SmoothKind::Quadratic { q, c, offset },
                SmoothKind::Quadratic {
                    q: q2,
                    c: c2,
                    offset: o2,
                },
            ) => q == q2 && c == c2 && offset == o2,
            (SmoothKind::Custom(a), SmoothKind::Custom(b)) => Arc::ptr_eq(a, b),
            _ => false,
        }
    }
}

/// A smooth convex function together with an upper bound on the Lipschitz
/// constant of its partial gradients.
#[derive(Debug, Clone, PartialEq)]
pub struct SmoothOracle {
    pub kind: SmoothKind,
    pub lipschitz: f64,
}

impl SmoothOracle {
    pub fn zero() -> Self {
        Self {
            kind: SmoothKind::Zero,
            lipschitz: 0.0,
        }
    }

    /// Quadratic with the Lipschitz constant set to λ_max(Q) by power iteration.
    pub fn quadratic(q: DenseMatrix, c: Vec<f64>, offset: f64) -> Result<Self> {
        let lipschitz = q.largest_eigenvalue_sym();
        Self::quadratic_with_lipschitz(q, c, offset, lipschitz)
    }

    pub fn quadratic_with_lipschitz(q: DenseMatrix, c: Vec<f64>, offset: f64, lipschitz: f64) -> Result<Self> {
        if q.rows() != q.cols() {
            return Err(Error::DimensionMismatch {
                what: "quadratic Q (square)",
                block: None,
                expected: q.rows(),
                found: q.cols(),
            });
        }
        if c.len() != q.rows() {
            return Err(Error::DimensionMismatch {
                what: "quadratic c",
                block: None,
                expected: q.rows(),
                found: c.len(),
            });
        }
        let asym = q.max_asymmetry();
        if asym > 1e-12 {
            return Err(Error::param(format!("quadratic Q is not symmetric (max |Q - Qᵀ| = {asym:e})")));
        }
        check_lipschitz(lipschitz)?;
        Ok(Self {
            kind: SmoothKind::Quadratic { q, c, offset },
            lipschitz,
        })
    }

    pub fn custom(f: Arc<dyn CustomSmooth>, lipschitz: f64) -> Result<Self> {
        check_lipschitz(lipschitz)?;
        Ok(Self {
            kind: SmoothKind::Custom(f),
            lipschitz,
        })
    }

    pub fn is_zero(&self) -> bool {
        matches!(self.kind, SmoothKind::Zero)
    }

    pub fn value(&self, x: &[f64]) -> Result<f64> {
        match &self.kind {
            SmoothKind::Zero => Ok(0.0),
            SmoothKind::Quadratic { q, c, offset } => {
                self.check_dim(x.len(), q.rows())?;
                let qx = q.matvec(x);
                Ok(0.5 * dot(x, &qx) + dot(c, x) + offset)
            }
            SmoothKind::Custom(f) => f
                .value(x)
                .map_err(|e| Error::Oracle(format!("custom smooth value: {e}"))),
        }
    }

    pub fn gradient(&self, x: &[f64]) -> Result<Vec<f64>> {
        self.block_gradient(x, 0..x.len())
    }

    /// `∇_range f(x)` at the full point `x`.
    pub fn block_gradient(&self, x: &[f64], range: Range<usize>) -> Result<Vec<f64>> {
        match &self.kind {
            SmoothKind::Zero => Ok(vec![0.0; range.len()]),
            SmoothKind::Quadratic { q, c, .. } => {
                self.check_dim(x.len(), q.rows())?;
                Ok(range.map(|r| dot(q.row(r), x) + c[r]).collect())
            }
            SmoothKind::Custom(f) => {
                let g = f
                    .block_gradient(x, range.clone())
                    .map_err(|e| Error::Oracle(format!("custom gradient on {range:?}: {e}")))?;
                if g.len() != range.len() {
                    return Err(Error::Oracle(format!(
                        "custom gradient returned {} entries for range of {}",
                        g.len(),
                        range.len()
                    )));
                }
                Ok(g)
            }
        }
    }

    /// `∇_i f(x)` for each `i` in `indices`.
    pub fn partial_grad(&self, point: &BlockVector, indices: &[usize]) -> Result<Vec<Vec<f64>>> {
        let part = point.partition();
        indices
            .iter()
            .map(|&i| {
                part.check_index(i)?;
                self.block_gradient(point.as_slice(), part.range(i))
            })
            .collect()
    }

    fn check_dim(&self, found: usize, expected: usize) -> Result<()> {
        if found != expected {
            return Err(Error::DimensionMismatch {
                what: "smooth oracle argument",
                block: None,
                expected,
                found,
            });
        }
        Ok(())
    }
}

fn check_lipschitz(l: f64) -> Result<()> {
    if !(l >= 0.0) || !l.is_finite() {
        return Err(Error::param(format!("lipschitz constant must be finite and nonnegative, got {l}")));
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::BlockPartition;

    fn point(dims: &[usize], v: Vec<f64>) -> BlockVector {
        BlockVector::from_vec(Arc::new(BlockPartition::new(dims.to_vec()).unwrap()), v).unwrap()
    }

    #[test]
    fn identity_quadratic_gradient_is_restriction() {
        let f = SmoothOracle::quadratic(DenseMatrix::identity(4), vec![0.0; 4], 0.0).unwrap();
        let x = point(&[1, 2, 1], vec![1.0, 2.0, 3.0, 4.0]);
        let g = f.partial_grad(&x, &[0, 2]).unwrap();
        assert_eq!(g, vec![vec![1.0], vec![4.0]]);
    }

    #[test]
    fn zero_kind_gives_zero_blocks() {
        let x = point(&[2, 1], vec![1.0, 2.0, 3.0]);
        let g = SmoothOracle::zero().partial_grad(&x, &[0, 1]).unwrap();
        assert_eq!(g, vec![vec![0.0, 0.0], vec![0.0]]);
    }

    #[test]
    fn coupled_quadratic_block_gradient() {
        let q = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![1.0, 2.0]]).unwrap();
        let f = SmoothOracle::quadratic(q.clone(), vec![1.0, 0.0], 0.0).unwrap();
        let x = point(&[1, 1], vec![1.0, 1.0]);
        // full gradient Qx + c, then slice
        let mut full = q.matvec(x.as_slice());
        full[0] += 1.0;
        let g = f.partial_grad(&x, &[0]).unwrap();
        assert_eq!(g, vec![vec![full[0]]]);
        assert_eq!(g[0][0], 4.0);
        assert!((f.lipschitz - 3.0).abs() < 1e-7);
    }

    #[test]
    fn rejects_asymmetric_q() {
        let q = DenseMatrix::from_rows(&[vec![2.0, 1.0], vec![0.0, 2.0]]).unwrap();
        assert!(SmoothOracle::quadratic(q, vec![0.0; 2], 0.0).is_err());
    }

    #[test]
    fn bad_index_is_reported() {
        let f = SmoothOracle::zero();
        let x = point(&[1, 1], vec![0.0, 0.0]);
        assert!(matches!(f.partial_grad(&x, &[2]), Err(Error::IndexOutOfRange { .. })));
    }

    #[derive(Debug)]
    struct Failing;
    impl CustomSmooth for Failing {
        fn value(&self, _: &[f64]) -> Result<f64> {
            Err(Error::Numerical("nan".into()))
        }
        fn gradient(&self, _: &[f64]) -> Result<Vec<f64>> {
            Err(Error::Numerical("nan".into()))
        }
    }

    #[test]
    fn custom_failure_carries_context() {
        let f = SmoothOracle::custom(Arc::new(Failing), 1.0).unwrap();
        let x = point(&[1], vec![0.0]);
        let err = f.partial_grad(&x, &[0]).unwrap_err().to_string();
        assert!(err.contains("custom gradient"), "{err}");
    }

    #[test]
    fn finite_difference_check() {
        let q = DenseMatrix::from_rows(&[
            vec![4.0, 1.0, 0.5],
            vec![1.0, 3.0, -0.2],
            vec![0.5, -0.2, 2.0],
        ])
        .unwrap();
        let f = SmoothOracle::quadratic(q, vec![0.3, -1.0, 2.0], 1.5).unwrap();
        let x = vec![0.7, -1.3, 2.1];
        let g = f.gradient(&x).unwrap();
        let h = 1e-6;
        for i in 0..3 {
            let mut xp = x.clone();
            let mut xm = x.clone();
            xp[i] += h;
            xm[i] -= h;
            let fd = (f.value(&xp).unwrap() - f.value(&xm).unwrap()) / (2.0 * h);
            assert!((fd - g[i]).abs() <= 1e-4 * g[i].abs().max(1.0));
        }
    }
}
