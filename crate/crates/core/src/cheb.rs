//! Chebyshev collocation in `y`: grid, differentiation and downsampling
//! matrices, value/coefficient transforms and adaptive resolution.

use std::f64::consts::PI;

use faer::Mat;

use crate::error::{Error, Result};
use crate::fourier::{dft, trim_threshold};
use crate::C64;

const DIRECT_TRANSFORM_MAX: usize = 32;
const RESOLVE_START: usize = 16;
const RESOLVE_MAX: usize = 1 << 16;

/// Chebyshev points of the second kind `y_m = cos(m pi / M)`, `m = 0..M`.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct ChebGrid {
    pub m: usize,
}

impl ChebGrid {
    pub fn new(m: usize) -> Self {
        assert!(m >= 1, "Chebyshev grid needs M >= 1");
        Self { m }
    }

    pub fn point(&self, k: usize) -> f64 {
        // Symmetric evaluation keeps y_{M-k} = -y_k exactly.
        (PI * (self.m as f64 - 2.0 * k as f64) / (2.0 * self.m as f64)).sin()
    }

    pub fn points(&self) -> Vec<f64> {
        (0..=self.m).map(|k| self.point(k)).collect()
    }
}

/// Chebyshev series `sum_i c_i T_i(y)`.
#[derive(Clone, Debug, PartialEq)]
pub struct ChebCoeffs {
    pub coeffs: Vec<C64>,
}

impl ChebCoeffs {
    pub fn new(coeffs: Vec<C64>) -> Self {
        Self { coeffs }
    }

    pub fn constant(v: C64) -> Self {
        Self { coeffs: vec![v] }
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn degree(&self) -> usize {
        self.coeffs.len().saturating_sub(1)
    }

    pub fn get(&self, i: usize) -> C64 {
        self.coeffs.get(i).copied().unwrap_or_default()
    }

    pub fn eval(&self, y: f64) -> C64 {
        clenshaw(&self.coeffs, y)
    }

    /// Zero-padded or truncated copy of length `n`.
    pub fn resized(&self, n: usize) -> Vec<C64> {
        let mut v = self.coeffs.clone();
        v.resize(n, C64::new(0.0, 0.0));
        v
    }
}

/// Evaluates `sum_i c_i T_i(y)` by Clenshaw's recurrence.
pub fn clenshaw(c: &[C64], y: f64) -> C64 {
    let mut b1 = C64::new(0.0, 0.0);
    let mut b2 = C64::new(0.0, 0.0);
    for k in (1..c.len()).rev() {
        let b0 = c[k] + 2.0 * y * b1 - b2;
        b2 = b1;
        b1 = b0;
    }
    match c.first() {
        Some(&c0) => c0 + y * b1 - b2,
        None => C64::new(0.0, 0.0),
    }
}

/// Chebyshev differentiation matrix of size `(M+1) x (M+1)` on `ChebGrid`.
pub fn cheb_diff_matrix(m: usize) -> Mat<f64> {
    assert!(m >= 1, "Chebyshev differentiation needs M >= 1");
    let mf = m as f64;
    let grid = ChebGrid::new(m);
    let weight = |i: usize| if i == 0 || i == m { 2.0 } else { 1.0 };
    let corner = (2.0 * mf * mf + 1.0) / 6.0;
    Mat::from_fn(m + 1, m + 1, |i, j| {
        if i == j {
            if i == 0 {
                corner
            } else if i == m {
                -corner
            } else {
                let s = (PI * i as f64 / mf).sin();
                -grid.point(i) / (2.0 * s * s)
            }
        } else {
            // y_i - y_j = -2 sin((i+j) pi/2M) sin((i-j) pi/2M)
            let diff = -2.0
                * (PI * (i + j) as f64 / (2.0 * mf)).sin()
                * (PI * (i as f64 - j as f64) / (2.0 * mf)).sin();
            let sign = if (i + j) % 2 == 0 { 1.0 } else { -1.0 };
            weight(i) / weight(j) * sign / diff
        }
    })
}

/// `(M-1) x (M+1)` selector dropping the first and last grid rows.
pub fn downsampling_matrix(m: usize) -> Mat<f64> {
    assert!(m >= 2, "downsampling needs M >= 2");
    Mat::from_fn(m - 1, m + 1, |i, j| if j == i + 1 { 1.0 } else { 0.0 })
}

/// `2 sum''_k f_k cos(n k pi / M)` for `n = 0..=M` (endpoint terms halved).
fn cosine_sums(f: &[C64]) -> Vec<C64> {
    let m = f.len() - 1;
    if m <= DIRECT_TRANSFORM_MAX {
        (0..=m)
            .map(|n| {
                let mut s = C64::new(0.0, 0.0);
                for (k, fk) in f.iter().enumerate() {
                    let w = if k == 0 || k == m { 1.0 } else { 2.0 };
                    s += fk * (w * (PI * ((n * k) % (2 * m)) as f64 / m as f64).cos());
                }
                s
            })
            .collect()
    } else {
        let mut ext = Vec::with_capacity(2 * m);
        ext.extend_from_slice(f);
        ext.extend(f[1..m].iter().rev());
        let mut out = dft(&ext);
        out.truncate(m + 1);
        out
    }
}

/// Values on `ChebGrid(M)` (length `M+1`) to Chebyshev coefficients.
pub fn values_to_coeffs(values: &[C64]) -> Vec<C64> {
    assert!(values.len() >= 2, "need at least two grid values");
    let m = values.len() - 1;
    let mut c = cosine_sums(values);
    for (n, cn) in c.iter_mut().enumerate() {
        *cn /= m as f64;
        if n == 0 || n == m {
            *cn *= 0.5;
        }
    }
    c
}

/// Chebyshev coefficients of degree `<= M` to values on `ChebGrid(M)`.
pub fn coeffs_to_values(coeffs: &[C64]) -> Vec<C64> {
    assert!(coeffs.len() >= 2, "need at least two coefficients");
    let m = coeffs.len() - 1;
    let mut a = coeffs.to_vec();
    a[0] *= 2.0;
    a[m] *= 2.0;
    cosine_sums(&a).into_iter().map(|z| z * 0.5).collect()
}

/// Barycentric interpolation of values on `ChebGrid(len - 1)`.
pub fn barycentric_eval(values: &[C64], y: f64) -> C64 {
    let n = values.len();
    assert!(n >= 1);
    if n == 1 {
        return values[0];
    }
    let grid = ChebGrid::new(n - 1);
    let mut num = C64::new(0.0, 0.0);
    let mut den = 0.0;
    for (k, v) in values.iter().enumerate() {
        let d = y - grid.point(k);
        if d == 0.0 {
            return *v;
        }
        let mut w = if k % 2 == 0 { 1.0 } else { -1.0 };
        if k == 0 || k == n - 1 {
            w *= 0.5;
        }
        num += v * (w / d);
        den += w / d;
    }
    num / den
}

/// Samples `f` on doubling Chebyshev grids until the trailing 10% of the
/// coefficients fall below `tol * max|coeff|`, then trims the tail.
pub fn cheb_resolve(f: impl Fn(f64) -> C64, tol: f64) -> Result<ChebCoeffs> {
    let mut m = RESOLVE_START;
    while m <= RESOLVE_MAX {
        let grid = ChebGrid::new(m);
        let vals: Vec<C64> = (0..=m).map(|k| f(grid.point(k))).collect();
        if vals.iter().any(|z| !z.re.is_finite() || !z.im.is_finite()) {
            return Err(Error::Resolution(
                "function returned a non-finite value".into(),
            ));
        }
        let c = values_to_coeffs(&vals);
        let scale = c.iter().fold(0.0f64, |a, z| a.max(z.norm()));
        let tail_start = ((0.9 * (m + 1) as f64).floor() as usize).min(m);
        let tail = c[tail_start..].iter().fold(0.0f64, |a, z| a.max(z.norm()));
        if scale == 0.0 || tail <= tol * scale {
            let keep = c
                .iter()
                .rposition(|z| z.norm() > trim_threshold(tol, scale))
                .unwrap_or(0);
            let mut c = c;
            c.truncate(keep + 1);
            return Ok(ChebCoeffs::new(c));
        }
        m *= 2;
    }
    Err(Error::Resolution(format!(
        "Chebyshev series not resolved at degree {RESOLVE_MAX}"
    )))
}
