//! Problem instances:
//!
//! ```text
//! min  f(x) + Σ u_i(x_i) + g(y) + Σ v_j(y_j)
//! s.t. Σ A_i x_i + Σ B_j y_j = b,  x_i ∈ X_i,  y_j ∈ Y_j
//! ```

use std::sync::Arc;

use crate::error::{Error, Result};
use crate::linalg::{norm2, BlockLinearMap, BlockPartition, BlockVector};
use crate::prox::ProxOracle;
use crate::smooth::SmoothOracle;

#[derive(Debug, Clone, PartialEq)]
pub struct ConstrainedProblem {
    x_map: BlockLinearMap,
    y_map: Option<BlockLinearMap>,
    b: Vec<f64>,
    f: SmoothOracle,
    g: SmoothOracle,
    x_prox: Vec<ProxOracle>,
    y_prox: Vec<ProxOracle>,
    initial_x: Option<Vec<f64>>,
    empty_y: Arc<BlockPartition>,
}

impl ConstrainedProblem {
    pub fn new(
        x_map: BlockLinearMap,
        y_map: Option<BlockLinearMap>,
        b: Vec<f64>,
        f: SmoothOracle,
        g: SmoothOracle,
        x_prox: Vec<ProxOracle>,
        y_prox: Vec<ProxOracle>,
    ) -> Result<Self> {
        let p = x_map.row_dim();
        if b.len() != p {
            return Err(Error::DimensionMismatch {
                what: "right-hand side b",
                block: None,
                expected: p,
                found: b.len(),
            });
        }
        if x_prox.len() != x_map.partition().num_blocks() {
            return Err(Error::DimensionMismatch {
                what: "x prox list",
                block: None,
                expected: x_map.partition().num_blocks(),
                found: x_prox.len(),
            });
        }
        let m_blocks = y_map.as_ref().map_or(0, |m| m.partition().num_blocks());
        if let Some(ym) = &y_map {
            if ym.row_dim() != p {
                return Err(Error::DimensionMismatch {
                    what: "y map rows",
                    block: None,
                    expected: p,
                    found: ym.row_dim(),
                });
            }
        }
        if y_prox.len() != m_blocks {
            return Err(Error::DimensionMismatch {
                what: "y prox list",
                block: None,
                expected: m_blocks,
                found: y_prox.len(),
            });
        }
        if y_map.is_none() && !g.is_zero() {
            return Err(Error::param("smooth g given without any y blocks"));
        }
        Ok(Self {
            x_map,
            y_map,
            b,
            f,
            g,
            x_prox,
            y_prox,
            initial_x: None,
            empty_y: Arc::new(BlockPartition::empty()),
        })
    }

    /// Attaches a suggested starting point for `x` (used by solvers that need
    /// `Ax⁰ = b`, such as the stochastic engine).
    pub fn with_initial_x(mut self, x0: Vec<f64>) -> Result<Self> {
        if x0.len() != self.x_map.partition().total_dim() {
            return Err(Error::DimensionMismatch {
                what: "initial x",
                block: None,
                expected: self.x_map.partition().total_dim(),
                found: x0.len(),
            });
        }
        self.initial_x = Some(x0);
        Ok(self)
    }

    pub fn x_map(&self) -> &BlockLinearMap {
        &self.x_map
    }

    pub fn y_map(&self) -> Option<&BlockLinearMap> {
        self.y_map.as_ref()
    }

    pub fn b(&self) -> &[f64] {
        &self.b
    }

    pub fn f(&self) -> &SmoothOracle {
        &self.f
    }

    pub fn g(&self) -> &SmoothOracle {
        &self.g
    }

    pub fn x_prox(&self) -> &[ProxOracle] {
        &self.x_prox
    }

    pub fn y_prox(&self) -> &[ProxOracle] {
        &self.y_prox
    }

    pub fn initial_x(&self) -> Option<&[f64]> {
        self.initial_x.as_deref()
    }

    pub fn row_dim(&self) -> usize {
        self.x_map.row_dim()
    }

    pub fn x_partition(&self) -> &Arc<BlockPartition> {
        self.x_map.partition()
    }

    pub fn y_partition(&self) -> &Arc<BlockPartition> {
        self.y_map.as_ref().map_or(&self.empty_y, |m| m.partition())
    }

    /// N
    pub fn num_x_blocks(&self) -> usize {
        self.x_partition().num_blocks()
    }

    /// M (0 without y)
    pub fn num_y_blocks(&self) -> usize {
        self.y_partition().num_blocks()
    }

    pub fn has_y(&self) -> bool {
        self.num_y_blocks() > 0
    }

    pub fn zero_x(&self) -> BlockVector {
        BlockVector::zeros(self.x_partition().clone())
    }

    pub fn zero_y(&self) -> BlockVector {
        BlockVector::zeros(self.y_partition().clone())
    }

    /// `Ax + By − b`
    pub fn residual(&self, x: &BlockVector, y: &BlockVector) -> Result<Vec<f64>> {
        let mut r = self.x_map.apply(x)?;
        if let Some(ym) = &self.y_map {
            if !y.same_partition(ym.partition()) {
                return Err(Error::DimensionMismatch {
                    what: "y vector partition",
                    block: None,
                    expected: ym.partition().total_dim(),
                    found: y.len(),
                });
            }
            ym.apply_acc(y.as_slice(), &mut r);
        } else if !y.is_empty() {
            return Err(Error::DimensionMismatch {
                what: "y vector for a problem without y",
                block: None,
                expected: 0,
                found: y.len(),
            });
        }
        for (ri, bi) in r.iter_mut().zip(&self.b) {
            *ri -= bi;
        }
        Ok(r)
    }

    /// `‖Ax + By − b‖₂`
    pub fn feas_violation(&self, x: &BlockVector, y: &BlockVector) -> Result<f64> {
        Ok(norm2(&self.residual(x, y)?))
    }

    /// `F(x) + G(y)`; `+∞` if a block leaves its set.
    pub fn objective(&self, x: &BlockVector, y: &BlockVector) -> Result<f64> {
        Ok(self.objective_x(x)? + self.objective_y(y)?)
    }

    /// `F(x) = f(x) + Σ u_i(x_i)`
    pub fn objective_x(&self, x: &BlockVector) -> Result<f64> {
        if !x.same_partition(self.x_partition()) {
            return Err(Error::DimensionMismatch {
                what: "x vector partition",
                block: None,
                expected: self.x_partition().total_dim(),
                found: x.len(),
            });
        }
        let mut total = self.f.value(x.as_slice())?;
        for (i, p) in self.x_prox.iter().enumerate() {
            total += p.value(x.block(i));
        }
        Ok(total)
    }

    /// `G(y) = g(y) + Σ v_j(y_j)`
    pub fn objective_y(&self, y: &BlockVector) -> Result<f64> {
        if !self.has_y() {
            return Ok(0.0);
        }
        if !y.same_partition(self.y_partition()) {
            return Err(Error::DimensionMismatch {
                what: "y vector partition",
                block: None,
                expected: self.y_partition().total_dim(),
                found: y.len(),
            });
        }
        let mut total = self.g.value(y.as_slice())?;
        for (j, p) in self.y_prox.iter().enumerate() {
            total += p.value(y.block(j));
        }
        Ok(total)
    }
}
