//! Block-partitioned dense vectors and block-column linear maps.
//!
//! Everything here is dense and row-major. Reductions over blocks always run
//! in ascending block order so that serial and parallel callers observe the
//! same floating point results.

use std::sync::Arc;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

pub const POWER_MAX_ITERS: usize = 1000;
pub const POWER_REL_TOL: f64 = 1e-8;

pub fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

pub fn norm2(a: &[f64]) -> f64 {
    dot(a, a).sqrt()
}

/// `y += alpha * x`
pub fn axpy(alpha: f64, x: &[f64], y: &mut [f64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        *yi += alpha * xi;
    }
}

pub fn sub(a: &[f64], b: &[f64]) -> Vec<f64> {
    a.iter().zip(b).map(|(x, y)| x - y).collect()
}

/// Dense row-major matrix.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DenseMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl DenseMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self {
            rows,
            cols,
            data: vec![0.0; rows * cols],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut m = Self::zeros(n, n);
        for i in 0..n {
            m.data[i * n + i] = 1.0;
        }
        m
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch {
                what: "matrix data",
                block: None,
                expected: rows * cols,
                found: data.len(),
            });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_rows(rows: &[Vec<f64>]) -> Result<Self> {
        let r = rows.len();
        let c = rows.first().map_or(0, Vec::len);
        let mut data = Vec::with_capacity(r * c);
        for row in rows {
            if row.len() != c {
                return Err(Error::DimensionMismatch {
                    what: "matrix row",
                    block: None,
                    expected: c,
                    found: row.len(),
                });
            }
            data.extend_from_slice(row);
        }
        Ok(Self {
            rows: r,
            cols: c,
            data,
        })
    }

    pub fn diag(d: &[f64]) -> Self {
        let mut m = Self::zeros(d.len(), d.len());
        for (i, v) in d.iter().enumerate() {
            m.data[i * d.len() + i] = *v;
        }
        m
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn data(&self) -> &[f64] {
        &self.data
    }

    pub fn get(&self, r: usize, c: usize) -> f64 {
        self.data[r * self.cols + c]
    }

    pub fn set(&mut self, r: usize, c: usize, v: f64) {
        self.data[r * self.cols + c] = v;
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    /// `out += self * v`
    pub fn matvec_acc(&self, v: &[f64], out: &mut [f64]) {
        debug_assert_eq!(v.len(), self.cols);
        debug_assert_eq!(out.len(), self.rows);
        for (r, o) in out.iter_mut().enumerate() {
            *o += dot(self.row(r), v);
        }
    }

    pub fn matvec(&self, v: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.rows];
        self.matvec_acc(v, &mut out);
        out
    }

    /// `out += self^T * w`
    pub fn t_matvec_acc(&self, w: &[f64], out: &mut [f64]) {
        debug_assert_eq!(w.len(), self.rows);
        debug_assert_eq!(out.len(), self.cols);
        for (r, wr) in w.iter().enumerate() {
            if *wr != 0.0 {
                axpy(*wr, self.row(r), out);
            }
        }
    }

    pub fn t_matvec(&self, w: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.cols];
        self.t_matvec_acc(w, &mut out);
        out
    }

    pub fn transpose(&self) -> Self {
        let mut t = Self::zeros(self.cols, self.rows);
        for r in 0..self.rows {
            for c in 0..self.cols {
                t.data[c * self.rows + r] = self.get(r, c);
            }
        }
        t
    }

    /// `self * other`
    pub fn matmul(&self, other: &DenseMatrix) -> Result<DenseMatrix> {
        if self.cols != other.rows {
            return Err(Error::DimensionMismatch {
                what: "matmul",
                block: None,
                expected: self.cols,
                found: other.rows,
            });
        }
        let mut out = Self::zeros(self.rows, other.cols);
        for r in 0..self.rows {
            for k in 0..self.cols {
                let a = self.get(r, k);
                if a == 0.0 {
                    continue;
                }
                let orow = other.row(k);
                let dst = &mut out.data[r * other.cols..(r + 1) * other.cols];
                axpy(a, orow, dst);
            }
        }
        Ok(out)
    }

    /// `self^T * self`
    pub fn gram(&self) -> DenseMatrix {
        let mut g = Self::zeros(self.cols, self.cols);
        for r in 0..self.rows {
            let row = self.row(r);
            for i in 0..self.cols {
                if row[i] == 0.0 {
                    continue;
                }
                let dst = &mut g.data[i * self.cols..(i + 1) * self.cols];
                axpy(row[i], row, dst);
            }
        }
        g
    }

    pub fn max_asymmetry(&self) -> f64 {
        let mut worst: f64 = 0.0;
        for r in 0..self.rows {
            for c in 0..self.cols.min(self.rows) {
                worst = worst.max((self.get(r, c) - self.get(c, r)).abs());
            }
        }
        worst
    }

    /// λ_max(selfᵀ self) by power iteration.
    pub fn spectral_norm_sq(&self) -> f64 {
        let mut tmp = vec![0.0; self.rows];
        largest_eigenvalue_psd(self.cols, |v, out| {
            tmp.iter_mut().for_each(|t| *t = 0.0);
            self.matvec_acc(v, &mut tmp);
            out.iter_mut().for_each(|o| *o = 0.0);
            self.t_matvec_acc(&tmp, out);
        })
    }

    /// Largest eigenvalue of a symmetric PSD matrix by power iteration.
    pub fn largest_eigenvalue_sym(&self) -> f64 {
        largest_eigenvalue_psd(self.cols, |v, out| {
            out.iter_mut().for_each(|o| *o = 0.0);
            self.matvec_acc(v, out);
        })
    }
}

/// Power iteration for the top eigenvalue of a symmetric PSD operator.
///
/// Runs from the all-ones vector, and again from a fixed low-discrepancy
/// vector in case the first start is orthogonal to the dominant eigenspace.
/// Returns the larger Rayleigh quotient.
pub fn largest_eigenvalue_psd(dim: usize, mut op: impl FnMut(&[f64], &mut [f64])) -> f64 {
    if dim == 0 {
        return 0.0;
    }
    let ones = vec![1.0; dim];
    // golden-ratio sequence, centred
    let phi = 0.618_033_988_749_894_9_f64;
    let spread: Vec<f64> = (0..dim)
        .map(|j| ((j as f64 + 1.0) * phi).fract() - 0.5)
        .collect();
    let a = power_iterate(&ones, &mut op);
    let b = power_iterate(&spread, &mut op);
    a.max(b)
}

fn power_iterate(start: &[f64], op: &mut impl FnMut(&[f64], &mut [f64])) -> f64 {
    let n0 = norm2(start);
    if n0 == 0.0 {
        return 0.0;
    }
    let mut v: Vec<f64> = start.iter().map(|x| x / n0).collect();
    let mut w = vec![0.0; v.len()];
    let mut lambda = 0.0;
    for it in 0..POWER_MAX_ITERS {
        op(&v, &mut w);
        let next = dot(&v, &w);
        let nw = norm2(&w);
        if nw == 0.0 {
            return 0.0;
        }
        for (vi, wi) in v.iter_mut().zip(&w) {
            *vi = wi / nw;
        }
        if it > 0 && (next - lambda).abs() <= POWER_REL_TOL * next.abs() {
            return next.max(0.0);
        }
        lambda = next;
    }
    lambda.max(0.0)
}

/// Sizes of the contiguous blocks a variable is split into.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
#[serde(try_from = "Vec<usize>", into = "Vec<usize>")]
pub struct BlockPartition {
    dims: Vec<usize>,
    offsets: Vec<usize>,
}

impl BlockPartition {
    pub fn new(dims: Vec<usize>) -> Result<Self> {
        if let Some(i) = dims.iter().position(|d| *d == 0) {
            return Err(Error::param(format!("block {i} has dimension 0")));
        }
        let mut offsets = Vec::with_capacity(dims.len() + 1);
        let mut acc = 0;
        offsets.push(0);
        for d in &dims {
            acc += d;
            offsets.push(acc);
        }
        Ok(Self { dims, offsets })
    }

    pub fn uniform(total: usize, blocks: usize) -> Result<Self> {
        if blocks == 0 || !total.is_multiple_of(blocks) {
            return Err(Error::param(format!(
                "dimension {total} is not divisible into {blocks} equal blocks"
            )));
        }
        Self::new(vec![total / blocks; blocks])
    }

    pub fn empty() -> Self {
        Self {
            dims: Vec::new(),
            offsets: vec![0],
        }
    }

    pub fn num_blocks(&self) -> usize {
        self.dims.len()
    }

    pub fn is_empty(&self) -> bool {
        self.dims.is_empty()
    }

    pub fn dims(&self) -> &[usize] {
        &self.dims
    }

    pub fn dim(&self, i: usize) -> usize {
        self.dims[i]
    }

    pub fn total_dim(&self) -> usize {
        *self.offsets.last().unwrap_or(&0)
    }

    pub fn offset(&self, i: usize) -> usize {
        self.offsets[i]
    }

    pub fn range(&self, i: usize) -> std::ops::Range<usize> {
        self.offsets[i]..self.offsets[i + 1]
    }

    pub(crate) fn check_index(&self, i: usize) -> Result<()> {
        if i >= self.dims.len() {
            return Err(Error::IndexOutOfRange {
                what: "block",
                index: i,
                len: self.dims.len(),
            });
        }
        Ok(())
    }
}

impl TryFrom<Vec<usize>> for BlockPartition {
    type Error = Error;
    fn try_from(dims: Vec<usize>) -> Result<Self> {
        Self::new(dims)
    }
}

impl From<BlockPartition> for Vec<usize> {
    fn from(p: BlockPartition) -> Self {
        p.dims
    }
}

/// A dense vector split into the blocks of a [`BlockPartition`].
#[derive(Debug, Clone, PartialEq)]
pub struct BlockVector {
    partition: Arc<BlockPartition>,
    data: Vec<f64>,
}

impl BlockVector {
    pub fn zeros(partition: Arc<BlockPartition>) -> Self {
        let n = partition.total_dim();
        Self {
            partition,
            data: vec![0.0; n],
        }
    }

    pub fn from_vec(partition: Arc<BlockPartition>, data: Vec<f64>) -> Result<Self> {
        if data.len() != partition.total_dim() {
            return Err(Error::DimensionMismatch {
                what: "block vector",
                block: None,
                expected: partition.total_dim(),
                found: data.len(),
            });
        }
        Ok(Self { partition, data })
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn as_mut_slice(&mut self) -> &mut [f64] {
        &mut self.data
    }

    pub fn into_vec(self) -> Vec<f64> {
        self.data
    }

    pub fn block(&self, i: usize) -> &[f64] {
        &self.data[self.partition.range(i)]
    }

    pub fn block_mut(&mut self, i: usize) -> &mut [f64] {
        let r = self.partition.range(i);
        &mut self.data[r]
    }

    pub fn set_block(&mut self, i: usize, values: &[f64]) {
        self.block_mut(i).copy_from_slice(values);
    }

    pub fn len(&self) -> usize {
        self.data.len()
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    pub fn same_partition(&self, other: &BlockPartition) -> bool {
        std::ptr::eq(Arc::as_ptr(&self.partition), other) || *self.partition == *other
    }
}

/// Block-column linear map `v ↦ Σ_i A_i v_i` with dense blocks.
#[derive(Debug, Clone, PartialEq)]
pub struct BlockLinearMap {
    partition: Arc<BlockPartition>,
    row_dim: usize,
    blocks: Vec<DenseMatrix>,
}

impl BlockLinearMap {
    pub fn new(partition: Arc<BlockPartition>, row_dim: usize, blocks: Vec<DenseMatrix>) -> Result<Self> {
        if blocks.len() != partition.num_blocks() {
            return Err(Error::DimensionMismatch {
                what: "number of map blocks",
                block: None,
                expected: partition.num_blocks(),
                found: blocks.len(),
            });
        }
        for (i, b) in blocks.iter().enumerate() {
            if b.rows() != row_dim {
                return Err(Error::DimensionMismatch {
                    what: "map block rows",
                    block: Some(i),
                    expected: row_dim,
                    found: b.rows(),
                });
            }
            if b.cols() != partition.dim(i) {
                return Err(Error::DimensionMismatch {
                    what: "map block columns",
                    block: Some(i),
                    expected: partition.dim(i),
                    found: b.cols(),
                });
            }
        }
        Ok(Self {
            partition,
            row_dim,
            blocks,
        })
    }

    /// Splits a dense `row_dim × total_dim` matrix column-wise along `partition`.
    pub fn from_dense(partition: Arc<BlockPartition>, m: &DenseMatrix) -> Result<Self> {
        if m.cols() != partition.total_dim() {
            return Err(Error::DimensionMismatch {
                what: "dense map columns",
                block: None,
                expected: partition.total_dim(),
                found: m.cols(),
            });
        }
        let blocks = (0..partition.num_blocks())
            .map(|i| {
                let range = partition.range(i);
                let mut data = Vec::with_capacity(m.rows() * range.len());
                for r in 0..m.rows() {
                    data.extend_from_slice(&m.row(r)[range.clone()]);
                }
                DenseMatrix::from_row_major(m.rows(), range.len(), data)
            })
            .collect::<Result<Vec<_>>>()?;
        Self::new(partition, m.rows(), blocks)
    }

    /// All blocks zero.
    pub fn zeros(partition: Arc<BlockPartition>, row_dim: usize) -> Self {
        let blocks = partition
            .dims()
            .iter()
            .map(|d| DenseMatrix::zeros(row_dim, *d))
            .collect();
        Self {
            partition,
            row_dim,
            blocks,
        }
    }

    pub fn partition(&self) -> &Arc<BlockPartition> {
        &self.partition
    }

    pub fn row_dim(&self) -> usize {
        self.row_dim
    }

    pub fn blocks(&self) -> &[DenseMatrix] {
        &self.blocks
    }

    pub fn block(&self, i: usize) -> &DenseMatrix {
        &self.blocks[i]
    }

    pub fn to_dense(&self) -> DenseMatrix {
        let n = self.partition.total_dim();
        let mut m = DenseMatrix::zeros(self.row_dim, n);
        for (i, b) in self.blocks.iter().enumerate() {
            let off = self.partition.offset(i);
            for r in 0..self.row_dim {
                for c in 0..b.cols() {
                    m.set(r, off + c, b.get(r, c));
                }
            }
        }
        m
    }

    /// Returns `Σ_i A_i v_i`.
    pub fn apply(&self, v: &BlockVector) -> Result<Vec<f64>> {
        if !v.same_partition(&self.partition) {
            return Err(self.partition_mismatch(v));
        }
        let mut out = vec![0.0; self.row_dim];
        self.apply_acc(v.as_slice(), &mut out);
        Ok(out)
    }

    /// `out += Σ_i A_i v_i` on a flat vector laid out by this map's partition.
    pub fn apply_acc(&self, flat: &[f64], out: &mut [f64]) {
        for (i, b) in self.blocks.iter().enumerate() {
            b.matvec_acc(&flat[self.partition.range(i)], out);
        }
    }

    /// `out += Aᵀ w` on a flat vector laid out by this map's partition.
    pub fn t_apply_acc(&self, w: &[f64], out: &mut [f64]) {
        for (i, b) in self.blocks.iter().enumerate() {
            b.t_matvec_acc(w, &mut out[self.partition.range(i)]);
        }
    }

    /// `out += A_i delta`
    pub fn apply_block_acc(&self, i: usize, delta: &[f64], out: &mut [f64]) {
        self.blocks[i].matvec_acc(delta, out);
    }

    /// Returns `A_iᵀ λ`.
    pub fn apply_adjoint_block(&self, i: usize, lambda: &[f64]) -> Result<Vec<f64>> {
        self.partition.check_index(i)?;
        if lambda.len() != self.row_dim {
            return Err(Error::DimensionMismatch {
                what: "adjoint input",
                block: Some(i),
                expected: self.row_dim,
                found: lambda.len(),
            });
        }
        Ok(self.blocks[i].t_matvec(lambda))
    }

    /// λ_max(A_iᵀ A_i).
    pub fn spectral_norm_sq(&self, i: usize) -> Result<f64> {
        self.partition.check_index(i)?;
        Ok(self.blocks[i].spectral_norm_sq())
    }

    /// λ_max(AᵀA) for the whole map.
    pub fn spectral_norm_sq_full(&self) -> f64 {
        let mut tmp = vec![0.0; self.row_dim];
        largest_eigenvalue_psd(self.partition.total_dim(), |v, out| {
            tmp.iter_mut().for_each(|t| *t = 0.0);
            self.apply_acc(v, &mut tmp);
            for (i, b) in self.blocks.iter().enumerate() {
                let dst = &mut out[self.partition.range(i)];
                dst.iter_mut().for_each(|o| *o = 0.0);
                b.t_matvec_acc(&tmp, dst);
            }
        })
    }

    fn partition_mismatch(&self, v: &BlockVector) -> Error {
        let mine = self.partition.dims();
        let theirs = v.partition().dims();
        let block = mine
            .iter()
            .zip(theirs)
            .position(|(a, b)| a != b)
            .or(Some(mine.len().min(theirs.len())));
        let (expected, found) = match block {
            Some(i) if i < mine.len() && i < theirs.len() => (mine[i], theirs[i]),
            _ => (mine.len(), theirs.len()),
        };
        Error::DimensionMismatch {
            what: "block vector vs map partition",
            block,
            expected,
            found,
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn part(d: &[usize]) -> Arc<BlockPartition> {
        Arc::new(BlockPartition::new(d.to_vec()).unwrap())
    }

    #[test]
    fn partition_rejects_zero_block() {
        assert!(BlockPartition::new(vec![2, 0, 1]).is_err());
        let p = BlockPartition::new(vec![2, 3]).unwrap();
        assert_eq!(p.total_dim(), 5);
        assert_eq!(p.range(1), 2..5);
    }

    #[test]
    fn apply_identity_blocks() {
        let p = part(&[2, 1]);
        // A_0 = first two columns of I_3, A_1 = last column
        let i3 = DenseMatrix::identity(3);
        let map = BlockLinearMap::from_dense(p.clone(), &i3).unwrap();
        let v = BlockVector::from_vec(p, vec![1.0, 2.0, 3.0]).unwrap();
        assert_eq!(map.apply(&v).unwrap(), vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn apply_zero_vector() {
        let p = part(&[2, 2]);
        let m = DenseMatrix::from_rows(&[vec![1.0, -2.0, 3.0, 0.5], vec![0.1, 0.2, 0.3, 0.4]]).unwrap();
        let map = BlockLinearMap::from_dense(p.clone(), &m).unwrap();
        assert_eq!(map.apply(&BlockVector::zeros(p)).unwrap(), vec![0.0, 0.0]);
    }

    #[test]
    fn apply_small_dense_case() {
        let p = part(&[2, 1]);
        let blocks = vec![
            DenseMatrix::from_rows(&[vec![1.0, 2.0]]).unwrap(),
            DenseMatrix::from_rows(&[vec![3.0]]).unwrap(),
        ];
        let map = BlockLinearMap::new(p.clone(), 1, blocks).unwrap();
        let v = BlockVector::from_vec(p, vec![1.0, 1.0, 2.0]).unwrap();
        // dense oracle: [1 2 3]·(1,1,2)
        let dense = map.to_dense();
        let oracle: f64 = (0..3).map(|c| dense.get(0, c) * v.as_slice()[c]).sum();
        assert_eq!(oracle, 9.0);
        assert_eq!(map.apply(&v).unwrap(), vec![oracle]);
    }

    #[test]
    fn apply_reports_offending_block() {
        let map = BlockLinearMap::zeros(part(&[2, 3]), 1);
        let v = BlockVector::zeros(part(&[2, 2]));
        match map.apply(&v) {
            Err(Error::DimensionMismatch { block, .. }) => assert_eq!(block, Some(1)),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn adjoint_block_cases() {
        let p = part(&[1]);
        let map = BlockLinearMap::new(
            p,
            2,
            vec![DenseMatrix::from_rows(&[vec![1.0], vec![2.0]]).unwrap()],
        )
        .unwrap();
        assert_eq!(map.apply_adjoint_block(0, &[1.0, 1.0]).unwrap(), vec![3.0]);
        assert_eq!(map.apply_adjoint_block(0, &[0.0, 0.0]).unwrap(), vec![0.0]);
        assert!(matches!(
            map.apply_adjoint_block(1, &[1.0, 1.0]),
            Err(Error::IndexOutOfRange { .. })
        ));
        assert!(matches!(
            map.apply_adjoint_block(0, &[1.0]),
            Err(Error::DimensionMismatch { .. })
        ));

        let p2 = part(&[3]);
        let id = BlockLinearMap::from_dense(p2, &DenseMatrix::identity(3)).unwrap();
        assert_eq!(
            id.apply_adjoint_block(0, &[1.0, -2.0, 4.0]).unwrap(),
            vec![1.0, -2.0, 4.0]
        );
    }

    #[test]
    fn spectral_norm_cases() {
        let p = part(&[2]);
        let id = BlockLinearMap::from_dense(p.clone(), &DenseMatrix::identity(2)).unwrap();
        assert!((id.spectral_norm_sq(0).unwrap() - 1.0).abs() < 1e-12);
        let z = BlockLinearMap::zeros(p.clone(), 2);
        assert_eq!(z.spectral_norm_sq(0).unwrap(), 0.0);
        let d = BlockLinearMap::from_dense(p, &DenseMatrix::diag(&[3.0, 1.0])).unwrap();
        assert!((d.spectral_norm_sq(0).unwrap() - 9.0).abs() <= 9.0 * 1e-8);
    }

    #[test]
    fn spectral_norm_when_ones_is_orthogonal() {
        // top eigenvector (1,-1)/√2 is orthogonal to the all-ones start
        let m = DenseMatrix::from_rows(&[vec![1.0, -1.0], vec![-1.0, 1.0]]).unwrap();
        assert!((m.spectral_norm_sq() - 4.0).abs() < 1e-7);
    }

    #[test]
    fn empty_row_dim_map() {
        let p = part(&[2, 1]);
        let map = BlockLinearMap::zeros(p.clone(), 0);
        assert!(map.apply(&BlockVector::zeros(p)).unwrap().is_empty());
        assert_eq!(map.spectral_norm_sq(1).unwrap(), 0.0);
        assert_eq!(map.spectral_norm_sq_full(), 0.0);
    }
}
