//! Dense and banded complex linear algebra shared by both discretizations.

use dyn_stack::{MemBuffer, MemStack};
use faer::linalg::lu::partial_pivoting::{factor, solve};
use faer::perm::PermRef;
use faer::{Mat, MatRef, Par};

use crate::error::{Error, Result};
use crate::C64;

/// Pivots smaller than this multiple of `max|A|` are treated as breakdown.
pub const PIVOT_GUARD: f64 = 1e-14;

pub fn max_abs(a: MatRef<'_, C64>) -> f64 {
    let mut m = 0.0f64;
    for j in 0..a.ncols() {
        for i in 0..a.nrows() {
            m = m.max(a[(i, j)].norm());
        }
    }
    m
}

pub fn max_abs_slice(v: &[C64]) -> f64 {
    v.iter().fold(0.0f64, |m, z| m.max(z.norm()))
}

pub fn max_abs_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter()
        .zip(b)
        .fold(0.0f64, |m, (x, y)| m.max((x - y).norm()))
}

pub fn matvec(a: MatRef<'_, C64>, x: &[C64]) -> Vec<C64> {
    assert_eq!(a.ncols(), x.len());
    let mut y = vec![C64::new(0.0, 0.0); a.nrows()];
    for (j, &xj) in x.iter().enumerate() {
        if xj == C64::new(0.0, 0.0) {
            continue;
        }
        for (i, yi) in y.iter_mut().enumerate() {
            *yi += a[(i, j)] * xj;
        }
    }
    y
}

pub fn col_to_vec(m: &Mat<C64>) -> Vec<C64> {
    (0..m.nrows()).map(|i| m[(i, 0)]).collect()
}

pub fn vec_to_col(v: &[C64]) -> Mat<C64> {
    Mat::from_fn(v.len(), 1, |i, _| v[i])
}

/// LU factorization with partial pivoting, computed in place on an owned matrix.
pub struct DenseLu {
    lu: Mat<C64>,
    perm_fwd: Vec<usize>,
    perm_bwd: Vec<usize>,
}

impl DenseLu {
    pub fn factor(mut a: Mat<C64>) -> Result<Self> {
        let n = a.nrows();
        if n != a.ncols() {
            return Err(Error::InvalidArgument(format!(
                "LU needs a square matrix, got {}x{}",
                n,
                a.ncols()
            )));
        }
        let scale = max_abs(a.as_ref());
        let mut perm_fwd = vec![0usize; n];
        let mut perm_bwd = vec![0usize; n];
        let par = Par::Seq;
        let mut buf = MemBuffer::new(factor::lu_in_place_scratch::<usize, C64>(
            n,
            n,
            par,
            Default::default(),
        ));
        factor::lu_in_place(
            a.as_mut(),
            &mut perm_fwd,
            &mut perm_bwd,
            par,
            MemStack::new(&mut buf),
            Default::default(),
        );
        let threshold = PIVOT_GUARD * scale;
        for k in 0..n {
            let p = a[(k, k)].norm();
            if !(p > threshold) {
                return Err(Error::SingularSystem {
                    step: k,
                    pivot: p,
                    threshold,
                });
            }
        }
        Ok(Self {
            lu: a,
            perm_fwd,
            perm_bwd,
        })
    }

    pub fn dim(&self) -> usize {
        self.lu.nrows()
    }

    pub fn solve_in_place(&self, rhs: &mut Mat<C64>) {
        let n = self.dim();
        assert_eq!(rhs.nrows(), n);
        let par = Par::Seq;
        let mut buf = MemBuffer::new(solve::solve_in_place_scratch::<usize, C64>(
            n,
            rhs.ncols(),
            par,
        ));
        // SAFETY-free: the permutation arrays come straight from `lu_in_place`.
        let perm = PermRef::new_checked(&self.perm_fwd, &self.perm_bwd, n);
        solve::solve_in_place(
            self.lu.as_ref(),
            self.lu.as_ref(),
            perm,
            rhs.as_mut(),
            par,
            MemStack::new(&mut buf),
        );
    }

    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        let mut b = vec_to_col(rhs);
        self.solve_in_place(&mut b);
        col_to_vec(&b)
    }
}

/// Solves `A x = b` densely; `A` is consumed.
pub fn dense_solve(a: Mat<C64>, b: &[C64]) -> Result<Vec<C64>> {
    Ok(DenseLu::factor(a)?.solve(b))
}

/// Complex matrix with entries confined to a band around the main diagonal.
///
/// Entry `(i, j)` may be nonzero only when `-lower <= j - i <= upper`. Rows
/// are stored contiguously, each holding `lower + upper + 1` slots.
#[derive(Clone, Debug, PartialEq)]
pub struct BandedOperator {
    rows: usize,
    cols: usize,
    lower: usize,
    upper: usize,
    data: Vec<C64>,
}

impl BandedOperator {
    pub fn zeros(rows: usize, cols: usize, lower: usize, upper: usize) -> Self {
        let lower = lower.min(rows.saturating_sub(1));
        let upper = upper.min(cols.saturating_sub(1));
        let width = lower + upper + 1;
        Self {
            rows,
            cols,
            lower,
            upper,
            data: vec![C64::new(0.0, 0.0); rows * width],
        }
    }

    pub fn identity(n: usize) -> Self {
        let mut op = Self::zeros(n, n, 0, 0);
        for i in 0..n {
            op.set(i, i, C64::new(1.0, 0.0));
        }
        op
    }

    pub fn rows(&self) -> usize {
        self.rows
    }

    pub fn cols(&self) -> usize {
        self.cols
    }

    pub fn lower(&self) -> usize {
        self.lower
    }

    pub fn upper(&self) -> usize {
        self.upper
    }

    fn width(&self) -> usize {
        self.lower + self.upper + 1
    }

    pub fn in_band(&self, i: usize, j: usize) -> bool {
        i < self.rows && j < self.cols && j + self.lower >= i && j <= i + self.upper
    }

    /// Column range `[start, end)` that row `i` may occupy.
    pub fn row_span(&self, i: usize) -> (usize, usize) {
        let start = i.saturating_sub(self.lower);
        let end = (i + self.upper + 1).min(self.cols);
        (start.min(end), end)
    }

    pub fn get(&self, i: usize, j: usize) -> C64 {
        if self.in_band(i, j) {
            self.data[i * self.width() + j + self.lower - i]
        } else {
            C64::new(0.0, 0.0)
        }
    }

    pub fn set(&mut self, i: usize, j: usize, v: C64) {
        assert!(
            self.in_band(i, j),
            "entry ({i}, {j}) outside band [-{}, {}]",
            self.lower,
            self.upper
        );
        let w = self.width();
        self.data[i * w + j + self.lower - i] = v;
    }

    pub fn add_to(&mut self, i: usize, j: usize, v: C64) {
        let cur = self.get(i, j);
        self.set(i, j, cur + v);
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let mut m = Mat::zeros(self.rows, self.cols);
        for i in 0..self.rows {
            let (s, e) = self.row_span(i);
            for j in s..e {
                m[(i, j)] = self.get(i, j);
            }
        }
        m
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        assert_eq!(x.len(), self.cols);
        (0..self.rows)
            .map(|i| {
                let (s, e) = self.row_span(i);
                (s..e).map(|j| self.get(i, j) * x[j]).sum()
            })
            .collect()
    }

    /// Leading `rows x cols` block.
    pub fn truncate(&self, rows: usize, cols: usize) -> Self {
        assert!(rows <= self.rows && cols <= self.cols);
        let mut out = Self::zeros(rows, cols, self.lower, self.upper);
        for i in 0..rows {
            let (s, e) = out.row_span(i);
            for j in s..e {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    pub fn scale(&self, s: C64) -> Self {
        let mut out = self.clone();
        out.data.iter_mut().for_each(|z| *z *= s);
        out
    }

    /// `self + s * other`, widening the band as needed.
    pub fn add_scaled(&self, other: &Self, s: C64) -> Self {
        assert_eq!((self.rows, self.cols), (other.rows, other.cols));
        let mut out = Self::zeros(
            self.rows,
            self.cols,
            self.lower.max(other.lower),
            self.upper.max(other.upper),
        );
        for i in 0..self.rows {
            let (s0, e0) = self.row_span(i);
            for j in s0..e0 {
                out.add_to(i, j, self.get(i, j));
            }
            let (s1, e1) = other.row_span(i);
            for j in s1..e1 {
                out.add_to(i, j, s * other.get(i, j));
            }
        }
        out
    }

    /// Matrix product; the band of the result is the sum of the two bands.
    pub fn mul(&self, rhs: &Self) -> Self {
        assert_eq!(self.cols, rhs.rows);
        let mut out = Self::zeros(
            self.rows,
            rhs.cols,
            self.lower + rhs.lower,
            self.upper + rhs.upper,
        );
        for i in 0..self.rows {
            let (s, e) = self.row_span(i);
            for k in s..e {
                let a = self.get(i, k);
                if a == C64::new(0.0, 0.0) {
                    continue;
                }
                let (s2, e2) = rhs.row_span(k);
                for j in s2..e2 {
                    out.add_to(i, j, a * rhs.get(k, j));
                }
            }
        }
        out
    }

    /// Rows `[start, start + count)` as a new operator; bandwidths are
    /// re-expressed relative to the new row indices.
    pub fn row_block(&self, start: usize, count: usize) -> Self {
        assert!(start + count <= self.rows);
        let lower = self.lower.saturating_sub(start);
        let upper = self.upper + start;
        let mut out = Self::zeros(count, self.cols, lower, upper);
        for r in 0..count {
            let (s, e) = self.row_span(start + r);
            for j in s..e {
                out.set(r, j, self.get(start + r, j));
            }
        }
        out
    }

    /// `Y = self * X` for a column-major `cols x ncol` block `x`; returns the
    /// number of multiply-adds performed alongside the result.
    pub fn apply_block(&self, x: &[C64], ncol: usize, out: &mut [C64]) -> u64 {
        assert_eq!(x.len(), self.cols * ncol);
        assert_eq!(out.len(), self.rows * ncol);
        let w = self.width();
        let mut ops = 0u64;
        for c in 0..ncol {
            let xc = &x[c * self.cols..(c + 1) * self.cols];
            let oc = &mut out[c * self.rows..(c + 1) * self.rows];
            for (i, o) in oc.iter_mut().enumerate() {
                let (s, e) = self.row_span(i);
                let base = i * w + self.lower;
                let mut acc = C64::new(0.0, 0.0);
                for j in s..e {
                    acc += self.data[base + j - i] * xc[j];
                }
                ops += (e - s) as u64;
                *o = acc;
            }
        }
        ops
    }

    /// Largest entry magnitude.
    pub fn max_abs(&self) -> f64 {
        max_abs_slice(&self.data)
    }

    /// Copy with bandwidths shrunk to the nonzero pattern.
    pub fn compact(&self) -> Self {
        let (lo, up) = self.effective_bandwidths();
        let mut out = Self::zeros(self.rows, self.cols, lo, up);
        for i in 0..self.rows {
            let (s, e) = out.row_span(i);
            for j in s..e {
                out.set(i, j, self.get(i, j));
            }
        }
        out
    }

    /// Smallest bandwidths that contain every nonzero entry.
    pub fn effective_bandwidths(&self) -> (usize, usize) {
        let mut lo = 0;
        let mut up = 0;
        for i in 0..self.rows {
            let (s, e) = self.row_span(i);
            for j in s..e {
                if self.get(i, j) != C64::new(0.0, 0.0) {
                    if j < i {
                        lo = lo.max(i - j);
                    } else {
                        up = up.max(j - i);
                    }
                }
            }
        }
        (lo, up)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    #[test]
    fn banded_product_matches_dense() {
        let mut a = BandedOperator::zeros(5, 5, 1, 2);
        let mut b = BandedOperator::zeros(5, 5, 2, 0);
        for i in 0..5 {
            for j in 0..5 {
                if a.in_band(i, j) {
                    a.set(i, j, C64::new((i + 2 * j) as f64, 1.0));
                }
                if b.in_band(i, j) {
                    b.set(i, j, C64::new(1.0 + i as f64, -(j as f64)));
                }
            }
        }
        let p = a.mul(&b).to_dense();
        let q = a.to_dense() * b.to_dense();
        for i in 0..5 {
            for j in 0..5 {
                assert!((p[(i, j)] - q[(i, j)]).norm() < 1e-12);
            }
        }
        assert_eq!((a.mul(&b).lower(), a.mul(&b).upper()), (3, 2));
    }

    #[test]
    fn dense_lu_solves_and_flags_singular() {
        let a = Mat::from_fn(3, 3, |i, j| c(if i == j { 4.0 } else { 1.0 }));
        let x = [c(1.0), c(-2.0), c(0.5)];
        let b = matvec(a.as_ref(), &x);
        let got = dense_solve(a, &b).unwrap();
        assert!(max_abs_diff(&got, &x) < 1e-14);

        let s = Mat::from_fn(2, 2, |_, _| c(1.0));
        assert!(matches!(
            DenseLu::factor(s),
            Err(Error::SingularSystem { .. })
        ));
    }

    #[test]
    fn row_block_keeps_entries() {
        let mut a = BandedOperator::zeros(6, 6, 1, 1);
        for i in 0..6 {
            let (s, e) = a.row_span(i);
            for j in s..e {
                a.set(i, j, c((10 * i + j) as f64));
            }
        }
        let blk = a.row_block(2, 3);
        for r in 0..3 {
            for j in 0..6 {
                assert_eq!(blk.get(r, j), a.get(r + 2, j));
            }
        }
    }
}
