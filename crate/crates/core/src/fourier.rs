//! Fourier collocation matrices and coefficient-space operators in the
//! periodic variable `x`.

use std::f64::consts::PI;

use faer::Mat;
use rustfft::FftPlanner;

use crate::error::{Error, Result};
use crate::linalg::BandedOperator;
use crate::C64;

/// Sizes at or below this use a direct dense DFT.
const DIRECT_DFT_MAX: usize = 64;
const RESOLVE_START: usize = 16;
const RESOLVE_MAX: usize = 1 << 16;
/// Coefficients are kept down to this fraction of the acceptance threshold.
pub(crate) const TRIM_FACTOR: f64 = 1e-2;
/// Relative level below which transform rounding dominates.
pub(crate) const NOISE_FLOOR: f64 = 1e-15;

pub(crate) fn trim_threshold(tol: f64, scale: f64) -> f64 {
    (TRIM_FACTOR * tol).max(NOISE_FLOOR) * scale
}

/// Equispaced periodic grid `x_n = 2 pi n / N`, `n = 1..N`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct FourierGrid {
    pub n: usize,
}

impl FourierGrid {
    pub fn new(n: usize) -> Self {
        Self { n }
    }

    pub fn h(&self) -> f64 {
        2.0 * PI / self.n as f64
    }

    /// Zero-based `k` maps to `x_{k+1}`.
    pub fn point(&self, k: usize) -> f64 {
        (k + 1) as f64 * self.h()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..self.n).map(|k| self.point(k)).collect()
    }
}

/// Fourier coefficients `w_j` over the window `j = 1-q .. N-q`.
#[derive(Clone, Debug, PartialEq)]
pub struct TrigCoeffs {
    pub coeffs: Vec<C64>,
    pub q: usize,
}

impl TrigCoeffs {
    pub fn new(coeffs: Vec<C64>, q: usize) -> Self {
        assert!(q >= 1 && q <= coeffs.len(), "offset q out of range");
        Self { coeffs, q }
    }

    /// Coefficients `a_{-d} .. a_d`.
    pub fn symmetric(coeffs: Vec<C64>) -> Self {
        assert!(coeffs.len() % 2 == 1, "symmetric window needs odd length");
        let q = coeffs.len() / 2 + 1;
        Self { coeffs, q }
    }

    pub fn constant(v: C64) -> Self {
        Self::symmetric(vec![v])
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn j_min(&self) -> i64 {
        1 - self.q as i64
    }

    pub fn j_max(&self) -> i64 {
        self.coeffs.len() as i64 - self.q as i64
    }

    pub fn get(&self, j: i64) -> C64 {
        if j < self.j_min() || j > self.j_max() {
            C64::new(0.0, 0.0)
        } else {
            self.coeffs[(j + self.q as i64 - 1) as usize]
        }
    }

    /// Largest `|j|` present in the window.
    pub fn degree(&self) -> usize {
        self.j_min().unsigned_abs().max(self.j_max().unsigned_abs()) as usize
    }

    pub fn eval(&self, x: f64) -> C64 {
        (self.j_min()..=self.j_max())
            .map(|j| self.get(j) * C64::from_polar(1.0, j as f64 * x))
            .sum()
    }
}

/// `X_m = sum_k f_k exp(-2 pi i m k / n)` for `m = 0..n`.
pub fn dft(samples: &[C64]) -> Vec<C64> {
    let n = samples.len();
    if n <= DIRECT_DFT_MAX {
        (0..n)
            .map(|m| {
                samples
                    .iter()
                    .enumerate()
                    .map(|(k, f)| {
                        f * C64::from_polar(1.0, -2.0 * PI * ((m * k) % n) as f64 / n as f64)
                    })
                    .sum()
            })
            .collect()
    } else {
        let mut buf = samples.to_vec();
        FftPlanner::new().plan_fft_forward(n).process(&mut buf);
        buf
    }
}

fn csc(t: f64) -> f64 {
    1.0 / t.sin()
}

fn cot(t: f64) -> f64 {
    t.cos() / t.sin()
}

/// First- and second-order Fourier differentiation matrices on `FourierGrid`.
pub fn fourier_diff_matrices(n: usize) -> (Mat<f64>, Mat<f64>) {
    assert!(n >= 2, "Fourier differentiation needs N >= 2");
    let h = 2.0 * PI / n as f64;
    let odd = n % 2 == 1;
    let dx = Mat::from_fn(n, n, |i, j| {
        if i == j {
            return 0.0;
        }
        let d = i as i64 - j as i64;
        let sign = if d.rem_euclid(2) == 0 { 1.0 } else { -1.0 };
        let t = d as f64 * h / 2.0;
        if odd {
            sign * 0.5 * csc(t)
        } else {
            sign * 0.5 * cot(t)
        }
    });
    let dxx = Mat::from_fn(n, n, |i, j| {
        if i == j {
            let base = -PI * PI / (3.0 * h * h);
            return if odd {
                base + 1.0 / 12.0
            } else {
                base - 1.0 / 6.0
            };
        }
        let d = i as i64 - j as i64;
        let sign = if (d + 1).rem_euclid(2) == 0 {
            1.0
        } else {
            -1.0
        };
        let t = d as f64 * h / 2.0;
        if odd {
            sign * 0.5 * csc(t) * cot(t)
        } else {
            sign * 0.5 * csc(t) * csc(t)
        }
    });
    (dx, dxx)
}

/// Unitary DFT matrices: `F[i][j] = exp(-2 pi i (i-1)(j-1)/N)/sqrt(N)` and
/// `G[i][j] = exp(-2 pi i (i-q) j / N)/sqrt(N)` (one-based indices).
pub fn dft_matrices(n: usize, q: usize) -> (Mat<C64>, Mat<C64>) {
    assert!(q >= 1 && q <= n, "q out of range");
    let s = 1.0 / (n as f64).sqrt();
    let nn = n as i64;
    let f = Mat::from_fn(n, n, |i, j| {
        let e = (i as i64 * j as i64).rem_euclid(nn);
        C64::from_polar(s, -2.0 * PI * e as f64 / n as f64)
    });
    let g = Mat::from_fn(n, n, |i, j| {
        let e = ((i as i64 + 1 - q as i64) * (j as i64 + 1)).rem_euclid(nn);
        C64::from_polar(s, -2.0 * PI * e as f64 / n as f64)
    });
    (f, g)
}

/// Wavenumber attached to FFT-natural position `i` (zero-based).
pub fn natural_wavenumber(n: usize, i: usize) -> i64 {
    if i <= (n - 1) / 2 {
        i as i64
    } else {
        i as i64 - n as i64
    }
}

/// Diagonals of the symbols of `D_x` and `D_xx` in FFT-natural ordering.
pub fn fourier_symbols(n: usize) -> (Vec<C64>, Vec<f64>) {
    assert!(n >= 2);
    let mut lx = Vec::with_capacity(n);
    let mut lxx = Vec::with_capacity(n);
    for i in 0..n {
        if n % 2 == 0 && i == n / 2 {
            lx.push(C64::new(0.0, 0.0));
            lxx.push(-((n / 2) as f64).powi(2));
        } else {
            let k = natural_wavenumber(n, i) as f64;
            lx.push(C64::new(0.0, k));
            lxx.push(-k * k);
        }
    }
    (lx, lxx)
}

/// `N x N` section of the Toeplitz multiplication operator `T[a]` over the
/// window `j = 1-q .. N-q`: entry `(j, k)` is `a_{j-k}`.
pub fn toeplitz_mult(a: &TrigCoeffs, n: usize, q: usize) -> BandedOperator {
    let lower = a.j_max().max(0) as usize;
    let upper = (-a.j_min()).max(0) as usize;
    let mut op = BandedOperator::zeros(n, n, lower, upper);
    let _ = q;
    for r in 0..n {
        let (s, e) = op.row_span(r);
        for c in s..e {
            op.set(r, c, a.get(r as i64 - c as i64));
        }
    }
    op
}

/// Samples `f` on doubling periodic grids until the Fourier tail is below
/// `tol * max|coeff|`, then trims to the smallest symmetric window.
pub fn trig_resolve(f: impl Fn(f64) -> C64, tol: f64) -> Result<TrigCoeffs> {
    let mut n = RESOLVE_START;
    while n <= RESOLVE_MAX {
        let samples: Vec<C64> = (0..n).map(|k| f(2.0 * PI * k as f64 / n as f64)).collect();
        if samples
            .iter()
            .any(|z| !z.re.is_finite() || !z.im.is_finite())
        {
            return Err(Error::Resolution(
                "function returned a non-finite value".into(),
            ));
        }
        let raw = dft(&samples);
        let half = n / 2 - 1;
        let coeff = |m: i64| raw[m.rem_euclid(n as i64) as usize] / n as f64;
        let scale = (-(half as i64)..=half as i64)
            .map(|m| coeff(m).norm())
            .fold(0.0f64, f64::max);
        let tail_start = ((0.9 * half as f64).ceil() as i64).max(1);
        let tail = (tail_start..=half as i64)
            .flat_map(|m| [coeff(m).norm(), coeff(-m).norm()])
            .fold(0.0f64, f64::max);
        if tail <= tol * scale || scale == 0.0 {
            let cut = trim_threshold(tol, scale);
            let degree = (0..=half as i64)
                .rev()
                .find(|&m| coeff(m).norm() > cut || coeff(-m).norm() > cut)
                .unwrap_or(0);
            let coeffs = (-degree..=degree).map(coeff).collect();
            return Ok(TrigCoeffs::symmetric(coeffs));
        }
        n *= 2;
    }
    Err(Error::Resolution(format!(
        "Fourier series not resolved on {RESOLVE_MAX} points"
    )))
}
