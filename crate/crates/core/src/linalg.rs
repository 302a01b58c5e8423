//! Small dense linear-algebra helpers shared by the solvers.

use nalgebra::{DMatrix, SymmetricEigen};
use serde::{Deserialize, Serialize};

use crate::error::{GameError, Result};

pub type Mat = DMatrix<f64>;

/// Relative tolerance used by every "is positive semidefinite" test.
pub const PSD_TOL: f64 = 1e-10;

/// Symmetrize in place-free form: `(m + m^T) / 2`.
pub fn sym(m: &Mat) -> Mat {
    (m + m.transpose()) * 0.5
}

/// Smallest eigenvalue of the symmetric part of `m`. Empty matrices report `+inf`.
pub fn lambda_min(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::INFINITY;
    }
    SymmetricEigen::new(sym(m)).eigenvalues.min()
}

/// Largest eigenvalue of the symmetric part of `m`.
pub fn lambda_max(m: &Mat) -> f64 {
    if m.nrows() == 0 {
        return f64::NEG_INFINITY;
    }
    SymmetricEigen::new(sym(m)).eigenvalues.max()
}

/// Spectral norm (largest singular value).
pub fn op_norm(m: &Mat) -> f64 {
    if m.is_empty() {
        return 0.0;
    }
    m.singular_values().max()
}

/// `m ⪰ 0` with tolerance `-PSD_TOL * (1 + |m|_F)`.
pub fn is_psd(m: &Mat) -> bool {
    lambda_min(m) >= -PSD_TOL * (1.0 + m.norm())
}

pub fn is_symmetric(m: &Mat, tol: f64) -> bool {
    m.is_square() && (m - m.transpose()).amax() <= tol * (1.0 + m.amax())
}

/// Solves `X * S = G` for symmetric positive definite `S`, i.e. returns `G S^{-1}`
/// without forming the inverse.
pub fn solve_right_spd(g: &Mat, s: &Mat) -> Option<Mat> {
    let chol = s.clone().cholesky()?;
    // (G S^{-1})^T = S^{-1} G^T
    Some(chol.solve(&g.transpose()).transpose())
}

/// Solves `H X = Y` for symmetric positive definite `H`; `None` when the factorization fails.
pub fn solve_spd(h: &Mat, y: &Mat) -> Option<Mat> {
    Some(h.clone().cholesky()?.solve(y))
}

/// Ratio of extreme singular values; `inf` for singular or non-finite input.
pub fn condition_estimate(m: &Mat) -> f64 {
    // nalgebra's SVD does not terminate on NaN entries
    if m.iter().any(|v| !v.is_finite()) {
        return f64::INFINITY;
    }
    let Some(svd) = m.clone().try_svd(false, false, f64::EPSILON, 1000) else {
        return f64::INFINITY;
    };
    let sv = svd.singular_values;
    let lo = sv.min();
    if lo == 0.0 {
        f64::INFINITY
    } else {
        sv.max() / lo
    }
}

/// Converts a row-major nested array into a matrix.
pub fn from_rows(rows: &[Vec<f64>]) -> Result<Mat> {
    let r = rows.len();
    let c = rows.first().map_or(0, Vec::len);
    if rows.iter().any(|row| row.len() != c) {
        return Err(GameError::Invalid("ragged matrix rows".into()));
    }
    Ok(DMatrix::from_fn(r, c, |i, j| rows[i][j]))
}

pub fn to_rows(m: &Mat) -> Vec<Vec<f64>> {
    (0..m.nrows())
        .map(|i| (0..m.ncols()).map(|j| m[(i, j)]).collect())
        .collect()
}

/// Block-diagonal symmetric matrix stored as its diagonal blocks.
///
/// Value matrices `P`, state covariances `Sigma` and the noise covariance all
/// share this shape, one `m x m` block per stage `0..=N`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct BlockDiag {
    pub blocks: Vec<Mat>,
}

impl BlockDiag {
    pub fn new(blocks: Vec<Mat>) -> Self {
        Self { blocks }
    }

    pub fn zeros(count: usize, dim: usize) -> Self {
        Self {
            blocks: vec![Mat::zeros(dim, dim); count],
        }
    }

    pub fn len(&self) -> usize {
        self.blocks.len()
    }

    pub fn is_empty(&self) -> bool {
        self.blocks.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.blocks.iter().map(Mat::nrows).sum()
    }

    pub fn to_dense(&self) -> Mat {
        let n = self.dim();
        let mut out = Mat::zeros(n, n);
        let mut off = 0;
        for b in &self.blocks {
            out.view_mut((off, off), (b.nrows(), b.ncols())).copy_from(b);
            off += b.nrows();
        }
        out
    }

    pub fn trace(&self) -> f64 {
        self.blocks.iter().map(Mat::trace).sum()
    }

    /// `Tr(self * other)` for two conformal block-diagonal matrices.
    pub fn trace_product(&self, other: &BlockDiag) -> f64 {
        self.blocks
            .iter()
            .zip(&other.blocks)
            .map(|(a, b)| a.component_mul(&b.transpose()).sum())
            .sum()
    }

    pub fn lambda_min(&self) -> f64 {
        self.blocks
            .iter()
            .map(lambda_min)
            .fold(f64::INFINITY, f64::min)
    }

    pub fn norm(&self) -> f64 {
        self.blocks
            .iter()
            .map(|b| b.norm_squared())
            .sum::<f64>()
            .sqrt()
    }

    pub fn sub(&self, other: &BlockDiag) -> BlockDiag {
        BlockDiag::new(
            self.blocks
                .iter()
                .zip(&other.blocks)
                .map(|(a, b)| a - b)
                .collect(),
        )
    }

    pub fn add_identity(&self, shift: f64) -> BlockDiag {
        BlockDiag::new(
            self.blocks
                .iter()
                .map(|b| b + Mat::identity(b.nrows(), b.ncols()) * shift)
                .collect(),
        )
    }

    /// Flattens the blocks in order (column-major per block).
    pub fn flatten(&self) -> Vec<f64> {
        self.blocks
            .iter()
            .flat_map(|b| b.iter().copied())
            .collect()
    }

    pub fn from_flat(flat: &[f64], count: usize, dim: usize) -> Self {
        let size = dim * dim;
        BlockDiag::new(
            (0..count)
                .map(|h| Mat::from_column_slice(dim, dim, &flat[h * size..(h + 1) * size]))
                .collect(),
        )
    }
}

/// Neumaier-compensated running sum over `f64` lanes.
#[derive(Clone, Debug)]
pub struct CompensatedSum {
    sum: Vec<f64>,
    comp: Vec<f64>,
}

impl CompensatedSum {
    pub fn new(len: usize) -> Self {
        Self {
            sum: vec![0.0; len],
            comp: vec![0.0; len],
        }
    }

    pub fn add(&mut self, values: &[f64]) {
        for ((s, c), &v) in self.sum.iter_mut().zip(self.comp.iter_mut()).zip(values) {
            let t = *s + v;
            if s.abs() >= v.abs() {
                *c += (*s - t) + v;
            } else {
                *c += (v - t) + *s;
            }
            *s = t;
        }
    }

    pub fn finish(self) -> Vec<f64> {
        self.sum
            .into_iter()
            .zip(self.comp)
            .map(|(s, c)| s + c)
            .collect()
    }
}

/// Pairwise (tree) summation of equally sized lanes, in index order.
///
/// The tree shape depends only on `parts.len()`, so the result is bit-identical
/// for a fixed input order.
pub fn pairwise_sum(mut parts: Vec<Vec<f64>>, len: usize) -> Vec<f64> {
    if parts.is_empty() {
        return vec![0.0; len];
    }
    while parts.len() > 1 {
        let mut next = Vec::with_capacity(parts.len().div_ceil(2));
        let mut it = parts.into_iter();
        while let Some(mut a) = it.next() {
            if let Some(b) = it.next() {
                for (x, y) in a.iter_mut().zip(&b) {
                    *x += y;
                }
            }
            next.push(a);
        }
        parts = next;
    }
    parts.pop().unwrap()
}
