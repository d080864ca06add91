//! Dense square matrices for small interferometers (up to a few dozen modes).

use alloc::vec;
use alloc::vec::Vec;
use core::ops::{Index, IndexMut};

use num_complex::Complex64;

use crate::{Error, Result};

/// Row-major square complex matrix.
#[derive(Clone, Debug, PartialEq)]
pub struct ComplexMatrix {
    dim: usize,
    data: Vec<Complex64>,
}

impl ComplexMatrix {
    pub fn zeros(dim: usize) -> Self {
        Self { dim, data: vec![Complex64::new(0.0, 0.0); dim * dim] }
    }

    pub fn identity(dim: usize) -> Self {
        let mut m = Self::zeros(dim);
        for i in 0..dim {
            m[(i, i)] = Complex64::new(1.0, 0.0);
        }
        m
    }

    /// Builds a matrix from row-major entries.
    pub fn from_row_major(dim: usize, data: Vec<Complex64>) -> Result<Self> {
        if dim == 0 || data.len() != dim * dim {
            return Err(Error::NotSquare { dim, len: data.len() });
        }
        Ok(Self { dim, data })
    }

    pub fn from_fn(dim: usize, mut f: impl FnMut(usize, usize) -> Complex64) -> Self {
        let mut data = Vec::with_capacity(dim * dim);
        for r in 0..dim {
            for c in 0..dim {
                data.push(f(r, c));
            }
        }
        Self { dim, data }
    }

    /// Builds a matrix from real and imaginary parts given as rows.
    pub fn from_parts(re: &[Vec<f64>], im: &[Vec<f64>]) -> Result<Self> {
        let dim = re.len();
        if im.len() != dim {
            return Err(Error::DimensionMismatch { expected: dim, found: im.len() });
        }
        let mut data = Vec::with_capacity(dim * dim);
        for (re_row, im_row) in re.iter().zip(im) {
            if re_row.len() != dim || im_row.len() != dim {
                return Err(Error::NotSquare { dim, len: re_row.len().max(im_row.len()) * dim });
            }
            data.extend(re_row.iter().zip(im_row).map(|(&a, &b)| Complex64::new(a, b)));
        }
        Self::from_row_major(dim, data)
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    pub fn as_slice(&self) -> &[Complex64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[Complex64] {
        &self.data[r * self.dim..(r + 1) * self.dim]
    }

    pub fn adjoint(&self) -> Self {
        Self::from_fn(self.dim, |r, c| self[(c, r)].conj())
    }

    /// Matrix product `self · rhs`.
    pub fn matmul(&self, rhs: &Self) -> Result<Self> {
        if self.dim != rhs.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: rhs.dim });
        }
        let n = self.dim;
        let mut out = Self::zeros(n);
        for r in 0..n {
            for k in 0..n {
                let a = self[(r, k)];
                if a.re == 0.0 && a.im == 0.0 {
                    continue;
                }
                for c in 0..n {
                    out.data[r * n + c] += a * rhs.data[k * n + c];
                }
            }
        }
        Ok(out)
    }

    pub fn trace(&self) -> Complex64 {
        (0..self.dim).map(|i| self[(i, i)]).sum()
    }

    /// Max-norm of `U·U† − I`.
    pub fn unitarity_deviation(&self) -> f64 {
        let n = self.dim;
        let mut worst: f64 = 0.0;
        for r in 0..n {
            for c in 0..n {
                let mut acc = Complex64::new(0.0, 0.0);
                for k in 0..n {
                    acc += self[(r, k)] * self[(c, k)].conj();
                }
                if r == c {
                    acc -= 1.0;
                }
                worst = worst.max(acc.norm());
            }
        }
        worst
    }

    /// Element-wise squared moduli `|M_jk|²`.
    pub fn squared_moduli(&self) -> RealMatrix {
        RealMatrix { rows: self.dim, cols: self.dim, data: self.data.iter().map(|z| z.norm_sqr()).collect() }
    }

    /// Multiplies row `r` by `factors[r]` (a diagonal matrix applied from the left).
    pub fn scale_rows(&self, factors: &[f64]) -> Result<Self> {
        if factors.len() != self.dim {
            return Err(Error::DimensionMismatch { expected: self.dim, found: factors.len() });
        }
        Ok(Self::from_fn(self.dim, |r, c| self[(r, c)] * factors[r]))
    }

    /// Largest entry-wise modulus of `self − other`.
    pub fn max_abs_diff(&self, other: &Self) -> f64 {
        self.data.iter().zip(&other.data).map(|(a, b)| (a - b).norm()).fold(0.0, f64::max)
    }
}

impl Index<(usize, usize)> for ComplexMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &Complex64 {
        &self.data[r * self.dim + c]
    }
}

impl IndexMut<(usize, usize)> for ComplexMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut Complex64 {
        &mut self.data[r * self.dim + c]
    }
}

/// A [`ComplexMatrix`] known to satisfy `U·U† = I` within [`UnitaryMatrix::TOLERANCE`].
#[derive(Clone, Debug, PartialEq)]
pub struct UnitaryMatrix(ComplexMatrix);

impl UnitaryMatrix {
    pub const TOLERANCE: f64 = 1e-10;

    pub fn new(matrix: ComplexMatrix) -> Result<Self> {
        let deviation = matrix.unitarity_deviation();
        if !(deviation <= Self::TOLERANCE) {
            return Err(Error::NotUnitary { deviation });
        }
        Ok(Self(matrix))
    }

    /// Wraps a matrix that is unitary by construction. Debug builds still check.
    pub(crate) fn from_trusted(matrix: ComplexMatrix) -> Self {
        debug_assert!(matrix.unitarity_deviation() <= Self::TOLERANCE, "{}", matrix.unitarity_deviation());
        Self(matrix)
    }

    pub fn identity(dim: usize) -> Self {
        Self(ComplexMatrix::identity(dim))
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.0.dim
    }

    pub fn matrix(&self) -> &ComplexMatrix {
        &self.0
    }

    pub fn into_inner(self) -> ComplexMatrix {
        self.0
    }

    pub fn adjoint(&self) -> Self {
        Self(self.0.adjoint())
    }

    pub fn max_abs_diff_to(&self, other: &Self) -> f64 {
        self.0.max_abs_diff(&other.0)
    }

    /// `self · rhs`: `rhs` acts first.
    pub fn then_after(&self, rhs: &Self) -> Result<Self> {
        self.0.matmul(&rhs.0).map(Self::from_trusted)
    }

    /// Relabels modes: output and input `k` become `perm[k]`.
    pub fn relabel(&self, perm: &[usize]) -> Result<Self> {
        let n = self.dim();
        if perm.len() != n {
            return Err(Error::DimensionMismatch { expected: n, found: perm.len() });
        }
        let mut seen = vec![false; n];
        for &p in perm {
            if p >= n {
                return Err(Error::ModeOutOfRange { index: p, modes: n });
            }
            if core::mem::replace(&mut seen[p], true) {
                return Err(Error::DuplicateMode(p));
            }
        }
        let mut out = ComplexMatrix::zeros(n);
        for r in 0..n {
            for c in 0..n {
                out[(perm[r], perm[c])] = self.0[(r, c)];
            }
        }
        Ok(Self(out))
    }
}

impl Index<(usize, usize)> for UnitaryMatrix {
    type Output = Complex64;
    #[inline]
    fn index(&self, idx: (usize, usize)) -> &Complex64 {
        &self.0[idx]
    }
}

impl AsRef<ComplexMatrix> for UnitaryMatrix {
    fn as_ref(&self) -> &ComplexMatrix {
        &self.0
    }
}

/// Row-major real matrix (probability tables, error tables).
#[derive(Clone, Debug, PartialEq)]
pub struct RealMatrix {
    rows: usize,
    cols: usize,
    data: Vec<f64>,
}

impl RealMatrix {
    pub fn zeros(rows: usize, cols: usize) -> Self {
        Self { rows, cols, data: vec![0.0; rows * cols] }
    }

    pub fn from_row_major(rows: usize, cols: usize, data: Vec<f64>) -> Result<Self> {
        if data.len() != rows * cols {
            return Err(Error::DimensionMismatch { expected: rows * cols, found: data.len() });
        }
        Ok(Self { rows, cols, data })
    }

    pub fn from_fn(rows: usize, cols: usize, mut f: impl FnMut(usize, usize) -> f64) -> Self {
        let mut data = Vec::with_capacity(rows * cols);
        for r in 0..rows {
            for c in 0..cols {
                data.push(f(r, c));
            }
        }
        Self { rows, cols, data }
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.data
    }

    pub fn row(&self, r: usize) -> &[f64] {
        &self.data[r * self.cols..(r + 1) * self.cols]
    }

    pub fn map(&self, f: impl Fn(f64) -> f64) -> Self {
        Self { rows: self.rows, cols: self.cols, data: self.data.iter().map(|&x| f(x)).collect() }
    }
}

impl Index<(usize, usize)> for RealMatrix {
    type Output = f64;
    #[inline]
    fn index(&self, (r, c): (usize, usize)) -> &f64 {
        &self.data[r * self.cols + c]
    }
}

impl IndexMut<(usize, usize)> for RealMatrix {
    #[inline]
    fn index_mut(&mut self, (r, c): (usize, usize)) -> &mut f64 {
        &mut self.data[r * self.cols + c]
    }
}
