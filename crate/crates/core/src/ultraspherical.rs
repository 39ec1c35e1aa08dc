//! Ultraspherical spectral method on `[-1, 1]`: banded differentiation,
//! conversion and multiplication operators, and a QR solver for
//! almost-banded systems (a few dense rows on top of a banded body).

use std::collections::VecDeque;

use faer::Mat;

use crate::cheb::ChebCoeffs;
use crate::error::{Error, Result};
use crate::linalg::{max_abs, BandedOperator, PIVOT_GUARD};
use crate::C64;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// `m x m` section of `D_lambda`, mapping Chebyshev coefficients to
/// `C^(lambda)` coefficients of the `lambda`-th derivative.
pub fn diff_operator(lambda: usize, m: usize) -> BandedOperator {
    assert!(lambda >= 1, "derivative order must be at least 1");
    let mut op = BandedOperator::zeros(m, m, 0, lambda);
    let prefactor = (1..lambda).fold(2f64.powi(lambda as i32 - 1), |p, i| p * i as f64);
    for j in 0..m.saturating_sub(lambda) {
        op.set(
            j,
            j + lambda,
            C64::new(prefactor * (j + lambda) as f64, 0.0),
        );
    }
    op
}

/// `m x m` section of `S_0` (Chebyshev to `C^(1)`) or `S_lambda`
/// (`C^(lambda)` to `C^(lambda+1)`).
pub fn conversion_operator(lambda: usize, m: usize) -> BandedOperator {
    let mut op = BandedOperator::zeros(m, m, 0, 2);
    for j in 0..m {
        let (diag, sup) = if lambda == 0 {
            (if j == 0 { 1.0 } else { 0.5 }, -0.5)
        } else {
            let l = lambda as f64;
            (l / (l + j as f64), -l / (l + j as f64 + 2.0))
        };
        op.set(j, j, C64::new(diag, 0.0));
        if j + 2 < m {
            op.set(j, j + 2, C64::new(sup, 0.0));
        }
    }
    op
}

/// `m x m` section of the Chebyshev multiplication operator `M_0[a]`
/// (Toeplitz plus Hankel, halved).
pub fn mult_operator_cheb(a: &ChebCoeffs, m: usize) -> BandedOperator {
    let n = a.degree();
    let mut op = BandedOperator::zeros(m, m, n, n);
    for j in 0..m {
        let (s, e) = op.row_span(j);
        for k in s..e {
            let d = j.abs_diff(k);
            let mut v = if d == 0 { a.get(0) } else { a.get(d) * 0.5 };
            if j >= 1 && j + k <= n {
                v += a.get(j + k) * 0.5;
            }
            op.set(j, k, v);
        }
    }
    op
}

/// `(lambda)_s / s!` for integer `lambda >= 1`.
fn rising_over_factorial(lambda: usize, s: usize) -> f64 {
    (1..lambda).fold(1.0, |p, i| p * (s + i) as f64 / i as f64)
}

/// `(2 lambda)_p / (lambda)_p`.
fn double_rising_ratio(lambda: usize, p: usize) -> f64 {
    (lambda..2 * lambda).fold(1.0, |acc, i| acc * (p + i) as f64 / i as f64)
}

/// `p! / (2 lambda)_p`.
fn factorial_over_double_rising(lambda: usize, p: usize) -> f64 {
    1.0 / (1..2 * lambda).fold(1.0, |acc, i| acc * (p + i) as f64 / i as f64)
}

/// Coefficient of `C_{s+k-2t}` in the product `C_s C_k` (all `C^(lambda)`).
pub fn linearization_coeff(lambda: usize, s: usize, k: usize, t: usize) -> f64 {
    debug_assert!(t <= s.min(k));
    let l = lambda as f64;
    let total = (s + k) as f64;
    let tf = t as f64;
    (total + l - 2.0 * tf) / (total + l - tf)
        * rising_over_factorial(lambda, t)
        * rising_over_factorial(lambda, s - t)
        * rising_over_factorial(lambda, k - t)
        * double_rising_ratio(lambda, s + k - t)
        * factorial_over_double_rising(lambda, s + k - 2 * t)
}

/// `m x m` section of `M_lambda[a]` for `a` given in the `C^(lambda)` basis.
pub fn mult_operator_ultra(a: &[C64], lambda: usize, m: usize) -> BandedOperator {
    assert!(lambda >= 1, "use mult_operator_cheb for lambda = 0");
    let n = a.len().saturating_sub(1);
    let mut op = BandedOperator::zeros(m, m, n, n);
    for k in 0..m {
        for (s, &as_) in a.iter().enumerate() {
            if as_ == zero() {
                continue;
            }
            for t in 0..=s.min(k) {
                let j = s + k - 2 * t;
                if j < m {
                    op.add_to(j, k, as_ * linearization_coeff(lambda, s, k, t));
                }
            }
        }
    }
    op
}

/// Converts Chebyshev coefficients to the `C^(lambda)` basis (`lambda <= 2`).
pub fn convert_coeffs(c: &[C64], lambda: usize) -> Vec<C64> {
    let n = c.len();
    let mut out = c.to_vec();
    for l in 0..lambda {
        out = conversion_operator(l, n).matvec(&out);
    }
    out
}

/// `C^(lambda)` series value by the three-term recurrence.
pub fn ultraspherical_eval(coeffs: &[C64], lambda: usize, y: f64) -> C64 {
    let l = lambda as f64;
    let mut prev = 1.0;
    let mut cur = if lambda == 0 { y } else { 2.0 * l * y };
    let mut sum = coeffs.first().copied().unwrap_or_default();
    for (n, c) in coeffs.iter().enumerate().skip(1) {
        sum += c * cur;
        let nf = n as f64;
        let next = if lambda == 0 {
            2.0 * y * cur - prev
        } else {
            (2.0 * (nf + l) * y * cur - (nf + 2.0 * l - 1.0) * prev) / (nf + 1.0)
        };
        prev = cur;
        cur = next;
    }
    sum
}

/// Discretized `a(y) w'' + b(y) w' + c(y) w` in coefficient space.
#[derive(Clone, Debug)]
pub struct OdeOperator {
    /// `Q (M_2[a] D_2 + S_1 M_1[b] D_1 + S_1 S_0 M_0[c]) Q^T`, mapping
    /// Chebyshev coefficients to `C^(2)` coefficients.
    pub op: BandedOperator,
    /// `Q S_1 S_0 Q^T`, for converting right-hand sides.
    pub conversion: BandedOperator,
}

pub fn assemble_ode(a: &ChebCoeffs, b: &ChebCoeffs, c: &ChebCoeffs, m: usize) -> OdeOperator {
    // Conversions reach two rows past the section per level, so build padded.
    let p = m + 4;
    let s0 = conversion_operator(0, p);
    let s1 = conversion_operator(1, p);
    let s10 = s1.mul(&s0);
    let a2 = convert_coeffs(&a.coeffs, 2);
    let b1 = convert_coeffs(&b.coeffs, 1);
    let second = mult_operator_ultra(&a2, 2, p).mul(&diff_operator(2, p));
    let first = s1
        .mul(&mult_operator_ultra(&b1, 1, p))
        .mul(&diff_operator(1, p));
    let zeroth = s10.mul(&mult_operator_cheb(c, p));
    let full = second
        .add_scaled(&first, C64::new(1.0, 0.0))
        .add_scaled(&zeroth, C64::new(1.0, 0.0));
    OdeOperator {
        op: full.truncate(m, m).compact(),
        conversion: s10.truncate(m, m).compact(),
    }
}

/// Square system whose first `r` rows are dense and whose remaining rows form
/// a banded body.
#[derive(Clone, Debug)]
pub struct AlmostBandedSystem {
    pub dense_rows: Mat<C64>,
    pub body: BandedOperator,
    pub rhs: Vec<C64>,
}

impl AlmostBandedSystem {
    pub fn new(dense_rows: Mat<C64>, body: BandedOperator, rhs: Vec<C64>) -> Result<Self> {
        let n = body.cols();
        if dense_rows.ncols() != n || dense_rows.nrows() + body.rows() != n || rhs.len() != n {
            return Err(Error::InvalidArgument(format!(
                "almost-banded shapes: dense {}x{}, body {}x{}, rhs {}",
                dense_rows.nrows(),
                dense_rows.ncols(),
                body.rows(),
                body.cols(),
                rhs.len()
            )));
        }
        Ok(Self {
            dense_rows,
            body,
            rhs,
        })
    }

    pub fn dim(&self) -> usize {
        self.body.cols()
    }

    pub fn to_dense(&self) -> Mat<C64> {
        let r = self.dense_rows.nrows();
        let body = self.body.to_dense();
        Mat::from_fn(self.dim(), self.dim(), |i, j| {
            if i < r {
                self.dense_rows[(i, j)]
            } else {
                body[(i - r, j)]
            }
        })
    }

    pub fn matvec(&self, x: &[C64]) -> Vec<C64> {
        let r = self.dense_rows.nrows();
        let mut out = Vec::with_capacity(self.dim());
        for i in 0..r {
            out.push(
                (0..self.dim())
                    .map(|j| self.dense_rows[(i, j)] * x[j])
                    .sum(),
            );
        }
        out.extend(self.body.matvec(x));
        out
    }

    pub fn factor(&self) -> Result<AlmostBandedQr> {
        AlmostBandedQr::factor(&self.dense_rows, &self.body)
    }
}

/// Householder QR of an almost-banded matrix.
///
/// Fill-in to the right of the band is never stored explicitly: every row
/// keeps a window of `w` columns plus `r` coefficients expressing its tail as
/// a combination of the original dense rows.
#[derive(Clone, Debug)]
pub struct AlmostBandedQr {
    n: usize,
    r: usize,
    l: usize,
    w: usize,
    /// Dense rows stored by column: `dense[j * r + i]`.
    dense: Vec<C64>,
    house: Vec<C64>,
    tau: Vec<f64>,
    /// Row `k` of `R`: window entries for columns `k..k+w`, then tail coefficients.
    rrows: Vec<C64>,
}

impl AlmostBandedQr {
    pub fn factor(dense_rows: &Mat<C64>, body: &BandedOperator) -> Result<Self> {
        let n = body.cols();
        let r = dense_rows.nrows();
        assert_eq!(dense_rows.ncols(), n);
        assert_eq!(r + body.rows(), n, "almost-banded system must be square");
        let l = (body.lower() + r).min(n.saturating_sub(1));
        let u = body.upper().saturating_sub(r);
        let w = (l + u + 1).min(n).max(1);
        let stride = w + r;

        let mut dense = vec![zero(); n * r];
        for j in 0..n {
            for i in 0..r {
                dense[j * r + i] = dense_rows[(i, j)];
            }
        }
        let scale = max_abs(dense_rows.as_ref()).max(body.max_abs());
        let threshold = PIVOT_GUARD * scale;

        let load = |g: usize, k: usize| -> Vec<C64> {
            let mut row = vec![zero(); stride];
            for t in 0..w {
                let col = k + t;
                if col >= n {
                    break;
                }
                row[t] = if g < r {
                    dense[col * r + g]
                } else {
                    body.get(g - r, col)
                };
            }
            if g < r {
                row[w + g] = C64::new(1.0, 0.0);
            }
            row
        };
        let tail_entry = |row: &[C64], col: usize| -> C64 {
            if col >= n {
                return zero();
            }
            (0..r).map(|i| row[w + i] * dense[col * r + i]).sum()
        };

        let mut active: VecDeque<Vec<C64>> = (0..=l.min(n - 1)).map(|g| load(g, 0)).collect();
        let mut house = vec![zero(); n * (l + 1)];
        let mut tau = vec![0.0; n];
        let mut rrows = vec![zero(); n * stride];
        let mut proj = vec![zero(); stride];

        for k in 0..n {
            let p = active.len();
            let x: Vec<C64> = active.iter().map(|row| row[0]).collect();
            let (v, t) = householder(&x);
            if t != 0.0 {
                proj.iter_mut().for_each(|z| *z = zero());
                for (vm, row) in v.iter().zip(active.iter()) {
                    let cv = vm.conj();
                    for (s, e) in proj.iter_mut().zip(row.iter()) {
                        *s += cv * e;
                    }
                }
                for (vm, row) in v.iter().zip(active.iter_mut()) {
                    let f = *vm * t;
                    for (e, s) in row.iter_mut().zip(proj.iter()) {
                        *e -= f * s;
                    }
                }
            }
            house[k * (l + 1)..k * (l + 1) + p].copy_from_slice(&v);
            tau[k] = t;

            let top = active.pop_front().expect("active set is never empty");
            let pivot = top[0].norm();
            if !(pivot > threshold) {
                return Err(Error::SingularSystem {
                    step: k,
                    pivot,
                    threshold,
                });
            }
            rrows[k * stride..(k + 1) * stride].copy_from_slice(&top);

            for row in active.iter_mut() {
                row.copy_within(1..w, 0);
                let entry = tail_entry(row, k + w);
                row[w - 1] = entry;
            }
            let g = k + 1 + l;
            if g < n {
                active.push_back(load(g, k + 1));
            }
        }

        Ok(Self {
            n,
            r,
            l,
            w,
            dense,
            house,
            tau,
            rrows,
        })
    }

    pub fn dim(&self) -> usize {
        self.n
    }

    pub fn solve(&self, rhs: &[C64]) -> Vec<C64> {
        let mut b = rhs.to_vec();
        self.solve_in_place(&mut b);
        b
    }

    pub fn solve_in_place(&self, b: &mut [C64]) {
        let (n, r, l, w) = (self.n, self.r, self.l, self.w);
        assert_eq!(b.len(), n);
        for k in 0..n {
            let t = self.tau[k];
            if t == 0.0 {
                continue;
            }
            let p = (l + 1).min(n - k);
            let v = &self.house[k * (l + 1)..k * (l + 1) + p];
            let s: C64 = v
                .iter()
                .zip(&b[k..k + p])
                .map(|(vm, bm)| vm.conj() * bm)
                .sum();
            for (vm, bm) in v.iter().zip(b[k..k + p].iter_mut()) {
                *bm -= vm * (t * s);
            }
        }
        let stride = w + r;
        let mut tail = vec![zero(); r];
        for k in (0..n).rev() {
            if k + w < n {
                let j = k + w;
                for (i, ti) in tail.iter_mut().enumerate() {
                    *ti += self.dense[j * r + i] * b[j];
                }
            }
            let row = &self.rrows[k * stride..(k + 1) * stride];
            let mut acc = b[k];
            for t in 1..w.min(n - k) {
                acc -= row[t] * b[k + t];
            }
            for i in 0..r {
                acc -= row[w + i] * tail[i];
            }
            b[k] = acc / row[0];
        }
    }
}

/// Reflector `I - tau v v^H` mapping `x` to a multiple of `e_0`.
fn householder(x: &[C64]) -> (Vec<C64>, f64) {
    let norm = x.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt();
    let mut v = x.to_vec();
    if norm == 0.0 || (x.len() == 1) {
        return (v, 0.0);
    }
    let a0 = x[0].norm();
    let phase = if a0 > 0.0 {
        x[0] / a0
    } else {
        C64::new(1.0, 0.0)
    };
    v[0] += phase * norm;
    let vn = v.iter().map(|z| z.norm_sqr()).sum::<f64>();
    (v, 2.0 / vn)
}

/// Factors and solves an almost-banded system.
pub fn solve_almost_banded(system: &AlmostBandedSystem) -> Result<Vec<C64>> {
    Ok(system.factor()?.solve(&system.rhs))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::cheb::{coeffs_to_values, ChebGrid};
    use crate::linalg::{dense_solve, max_abs_diff, max_abs_slice};
    use rand::{Rng, SeedableRng};

    fn c(re: f64) -> C64 {
        C64::new(re, 0.0)
    }

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn diff_operator_entries() {
        let d1 = diff_operator(1, 4);
        assert_eq!(
            (d1.get(0, 1), d1.get(1, 2), d1.get(2, 3)),
            (c(1.0), c(2.0), c(3.0))
        );
        let d2 = diff_operator(2, 4);
        assert_eq!((d2.get(0, 2), d2.get(1, 3)), (c(4.0), c(6.0)));
        assert_eq!(
            d1.matvec(&[c(1.0), c(0.0), c(0.0), c(0.0)]),
            vec![c(0.0); 4]
        );
    }

    #[test]
    fn conversion_columns() {
        let s0 = conversion_operator(0, 5).to_dense();
        assert_eq!(s0[(0, 0)], c(1.0));
        assert_eq!(
            (s0[(0, 2)], s0[(1, 2)], s0[(2, 2)]),
            (c(-0.5), c(0.0), c(0.5))
        );
        let s1 = conversion_operator(1, 5);
        for j in 1..5 {
            assert!((s1.get(j, j) - c(1.0 / (j as f64 + 1.0))).norm() < 1e-15);
        }
    }

    #[test]
    fn multiplication_by_y() {
        let m = mult_operator_cheb(&ChebCoeffs::new(vec![c(0.0), c(1.0)]), 6);
        assert_eq!(m.get(1, 0), c(1.0));
        for n in 1..5 {
            assert_eq!(m.get(n - 1, n), c(0.5));
            assert_eq!(m.get(n + 1, n), c(0.5));
        }
        let id = mult_operator_cheb(&ChebCoeffs::constant(c(1.0)), 4);
        assert_eq!(id.to_dense(), BandedOperator::identity(4).to_dense());
    }

    #[test]
    fn chebyshev_u_products_are_plain_sums() {
        // U_s U_k = sum_t U_{s+k-2t}
        for s in 0..5 {
            for k in 0..5 {
                for t in 0..=s.min(k) {
                    assert!((linearization_coeff(1, s, k, t) - 1.0).abs() < 1e-14);
                }
            }
        }
    }

    #[test]
    fn ode_pieces() {
        let one = ChebCoeffs::constant(c(1.0));
        let nil = ChebCoeffs::constant(c(0.0));
        let m = 10;
        let op = assemble_ode(&one, &nil, &nil, m);
        let d2 = diff_operator(2, m).to_dense();
        let got = op.op.to_dense();
        for i in 0..m {
            for j in 0..m {
                assert!((got[(i, j)] - d2[(i, j)]).norm() < 1e-13);
            }
        }
        let op = assemble_ode(&nil, &nil, &one, m);
        let s10 = conversion_operator(1, m).mul(&conversion_operator(0, m));
        assert_eq!(op.op.to_dense(), s10.to_dense());
    }

    fn random_banded_system(
        rng: &mut impl Rng,
        n: usize,
        r: usize,
        lo: usize,
        up: usize,
    ) -> AlmostBandedSystem {
        let dense = Mat::from_fn(r, n, |_, _| {
            C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
        });
        let mut body = BandedOperator::zeros(n - r, n, lo, up);
        for i in 0..n - r {
            let (s, e) = body.row_span(i);
            for j in s..e {
                body.set(
                    i,
                    j,
                    C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)),
                );
            }
            // Diagonal dominance on the shifted diagonal keeps the system well posed.
            if body.in_band(i, i + r) {
                body.add_to(i, i + r, c(4.0 + (lo + up) as f64));
            }
        }
        let rhs = rand_vec(rng, n);
        AlmostBandedSystem::new(dense, body, rhs).unwrap()
    }

    #[test]
    fn almost_banded_matches_dense_solver() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(11);
        for &(n, r, lo, up) in &[
            (10, 2, 1, 4),
            (40, 2, 3, 6),
            (25, 1, 0, 3),
            (30, 3, 2, 2),
            (8, 0, 2, 2),
        ] {
            let sys = random_banded_system(&mut rng, n, r, lo, up);
            let x = solve_almost_banded(&sys).unwrap();
            let oracle = dense_solve(sys.to_dense(), &sys.rhs).unwrap();
            assert!(
                max_abs_diff(&x, &oracle) < 1e-10 * max_abs_slice(&oracle),
                "{n} {r} {lo} {up}"
            );
        }
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(64))]
        #[test]
        fn almost_banded_agrees_with_dense(
            n in 4usize..=64,
            r in 0usize..=3,
            lo in 0usize..=4,
            up in 0usize..=6,
            seed in 0u64..10_000,
        ) {
            proptest::prop_assume!(r < n && r <= up);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let sys = random_banded_system(&mut rng, n, r, lo, up);
            let x = solve_almost_banded(&sys).unwrap();
            let oracle = dense_solve(sys.to_dense(), &sys.rhs).unwrap();
            proptest::prop_assert!(max_abs_diff(&x, &oracle) < 1e-10 * max_abs_slice(&oracle));
        }
    }

    #[test]
    fn diagonal_system_with_boundary_rows() {
        let n = 6;
        let dense = Mat::from_fn(2, n, |i, j| {
            if i == 0 {
                c(1.0)
            } else {
                c(if j % 2 == 0 { 1.0 } else { -1.0 })
            }
        });
        let mut body = BandedOperator::zeros(n - 2, n, 0, 2);
        for i in 0..n - 2 {
            body.set(i, i + 2, c(2.0));
        }
        let x_true: Vec<C64> = (0..n).map(|k| c(k as f64 - 1.5)).collect();
        let mut rhs: Vec<C64> = (0..2)
            .map(|i| (0..n).map(|j| dense[(i, j)] * x_true[j]).sum())
            .collect();
        rhs.extend(body.matvec(&x_true));
        let sys = AlmostBandedSystem::new(dense, body, rhs).unwrap();
        let x = solve_almost_banded(&sys).unwrap();
        assert!(max_abs_diff(&x, &x_true) < 1e-14);
    }

    #[test]
    fn singular_body_is_reported() {
        let dense = Mat::from_fn(1, 3, |_, _| c(1.0));
        let body = BandedOperator::zeros(2, 3, 0, 1);
        let sys = AlmostBandedSystem::new(dense, body, vec![c(1.0); 3]).unwrap();
        assert!(matches!(
            solve_almost_banded(&sys),
            Err(Error::SingularSystem { .. })
        ));
    }

    fn bessel_i(k: usize, z: f64) -> f64 {
        let mut term = (z / 2.0).powi(k as i32) / (1..=k).map(|i| i as f64).product::<f64>();
        let mut sum = term;
        for j in 1..40 {
            term *= (z / 2.0).powi(2) / (j as f64 * (j + k) as f64);
            sum += term;
        }
        sum
    }

    #[test]
    fn exponential_boundary_value_problem() {
        // w'' - w = 0, w(1) = e, w(-1) = 1/e  =>  w = e^y.
        let m = 32;
        let one = ChebCoeffs::constant(c(1.0));
        let nil = ChebCoeffs::constant(c(0.0));
        let minus = ChebCoeffs::constant(c(-1.0));
        let ode = assemble_ode(&one, &nil, &minus, m);
        let dense = Mat::from_fn(2, m, |i, j| {
            c(if i == 0 || j % 2 == 0 { 1.0 } else { -1.0 })
        });
        let body = ode.op.row_block(0, m - 2);
        let mut rhs = vec![c(1f64.exp()), c((-1f64).exp())];
        rhs.extend(vec![c(0.0); m - 2]);
        let sys = AlmostBandedSystem::new(dense, body, rhs).unwrap();
        let x = solve_almost_banded(&sys).unwrap();
        let exact: Vec<C64> = (0..m)
            .map(|k| {
                c(if k == 0 {
                    bessel_i(0, 1.0)
                } else {
                    2.0 * bessel_i(k, 1.0)
                })
            })
            .collect();
        assert!(max_abs_diff(&x, &exact) < 1e-10);
    }

    #[test]
    fn conversion_preserves_function_values() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(5);
        let w = rand_vec(&mut rng, 12);
        let w1 = convert_coeffs(&w, 1);
        let w2 = convert_coeffs(&w, 2);
        let mut padded = w.clone();
        padded.resize(33, c(0.0));
        let vals = coeffs_to_values(&padded);
        let g = ChebGrid::new(32);
        for (k, v) in vals.iter().enumerate() {
            let y = g.point(k);
            assert!((ultraspherical_eval(&w1, 1, y) - v).norm() < 1e-11);
            assert!((ultraspherical_eval(&w2, 2, y) - v).norm() < 1e-11);
        }
    }

    #[test]
    fn declared_bandwidths_follow_degree() {
        let a = ChebCoeffs::new(vec![c(1.0), c(0.5), c(0.25), c(0.125)]);
        let m0 = mult_operator_cheb(&a, 12);
        assert_eq!((m0.lower(), m0.upper()), (3, 3));
        let m2 = mult_operator_ultra(&a.coeffs, 2, 12);
        assert_eq!((m2.lower(), m2.upper()), (3, 3));
        assert_eq!(m2.effective_bandwidths(), (3, 3));
    }
}
