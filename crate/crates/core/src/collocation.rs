//! Fourier x Chebyshev collocation for the periodic problem in `v`.
//!
//! Unknowns are grid values `V` of size `(M+1) x N` stacked by columns, so
//! index `n (M+1) + m` holds `v(x_{n+1}, y_m)`. Rows are ordered: `N` top
//! boundary rows, `N (M-1)` interior rows, `N` bottom boundary rows.

use faer::Mat;

use crate::cheb::{cheb_diff_matrix, ChebGrid};
use crate::dtn::{bc_rows_collocation, incident_datum};
use crate::error::{Error, Result};
use crate::field::SolutionField;
use crate::fourier::{fourier_diff_matrices, fourier_symbols, FourierGrid};
use crate::linalg::{col_to_vec, dense_solve, DenseLu};
use crate::medium::MediumSpec;
use crate::problem::{ModeConstants, ProblemSpec};
use crate::C64;

/// Largest dense system (unknowns) either method will factor.
pub const DENSE_CAP: usize = 10_000;

#[derive(Clone, Debug)]
pub struct CollocationSystem {
    pub a: Mat<C64>,
    pub g: Vec<C64>,
    pub n: usize,
    pub m: usize,
    pub modes: ModeConstants,
}

/// Medium samples `eps(x_{n+1}, y_m)` as an `(M+1) x N` matrix.
pub fn sample_medium(medium: &MediumSpec, n: usize, m: usize) -> Mat<C64> {
    let xs = FourierGrid::new(n).points();
    let ys = ChebGrid::new(m).points();
    Mat::from_fn(m + 1, n, |i, k| medium.eval(xs[k], ys[i]))
}

fn check_sizes(n: usize, m: usize) -> Result<()> {
    if n < 1 || m < 2 {
        return Err(Error::InvalidArgument(format!(
            "collocation needs N >= 1 and M >= 2, got N = {n}, M = {m}"
        )));
    }
    Ok(())
}

pub fn assemble_collocation(
    problem: &ProblemSpec,
    n: usize,
    m: usize,
) -> Result<CollocationSystem> {
    check_sizes(n, m)?;
    let unknowns = n * (m + 1);
    if unknowns > DENSE_CAP {
        return Err(Error::SizeCap {
            unknowns,
            cap: DENSE_CAP,
        });
    }
    let modes = problem.modes(n)?;
    let rows = m + 1;
    let dy = cheb_diff_matrix(m);
    let dyy = &dy * &dy;
    let a0 = modes.alpha0;
    // Dxx + 2i a0 Dx - a0^2 I
    let lx = if n >= 2 {
        let (dx, dxx) = fourier_diff_matrices(n);
        Mat::from_fn(n, n, |i, j| {
            let d = if i == j { -a0 * a0 } else { 0.0 };
            C64::new(dxx[(i, j)] + d, 2.0 * a0 * dx[(i, j)])
        })
    } else {
        Mat::from_fn(1, 1, |_, _| C64::new(-a0 * a0, 0.0))
    };
    let eps = sample_medium(&problem.medium, n, m);
    let k2 = problem.omega2_mu();

    let mut a = Mat::<C64>::zeros(unknowns, unknowns);
    let bc = bc_rows_collocation(&modes, m, &dy);
    for r in 0..n {
        for c in 0..unknowns {
            a[(r, c)] = bc.top[(r, c)];
            a[(n + n * (m - 1) + r, c)] = bc.bottom[(r, c)];
        }
    }
    for xn in 0..n {
        for i in 0..m - 1 {
            let row = n + xn * (m - 1) + i;
            let yi = i + 1;
            for xk in 0..n {
                a[(row, xk * rows + yi)] += lx[(xn, xk)];
            }
            for k in 0..rows {
                a[(row, xn * rows + k)] += C64::new(dyy[(yi, k)], 0.0);
            }
            a[(row, xn * rows + yi)] += eps[(yi, xn)] * k2;
        }
    }
    let mut g = vec![C64::new(0.0, 0.0); unknowns];
    g[..n].copy_from_slice(&bc.rhs_top);
    Ok(CollocationSystem { a, g, n, m, modes })
}

fn reshape_values(v: &[C64], n: usize, m: usize) -> Mat<C64> {
    Mat::from_fn(m + 1, n, |i, k| v[k * (m + 1) + i])
}

/// Dense LU solve of the assembled system; consumes it.
pub fn solve_collocation(system: CollocationSystem) -> Result<SolutionField> {
    let CollocationSystem { a, g, n, m, modes } = system;
    let lu = DenseLu::factor(a)?;
    let v = lu.solve(&g);
    Ok(SolutionField::values(reshape_values(&v, n, m), modes))
}

/// The single `(M+1)`-point ODE system for the mode that carries the
/// incident wave when `eps` depends on `y` only.
pub fn layered_collocation_system(
    problem: &ProblemSpec,
    modes: &ModeConstants,
    m: usize,
) -> Result<(Mat<C64>, Vec<C64>)> {
    let psi = problem.medium.layered_profile().ok_or_else(|| {
        Error::NotApplicable("layered fast path needs a medium independent of x".into())
    })?;
    let rows = m + 1;
    let dy = cheb_diff_matrix(m);
    let dyy = &dy * &dy;
    let ys = ChebGrid::new(m).points();
    // Mode 0 sits at FFT-natural position 0, where both x-symbols vanish.
    let (lx, lxx) = fourier_symbols(modes.n.max(2));
    let (sx, sxx) = (lx[0], lxx[0]);
    let a0 = modes.alpha0;
    let lam_x = C64::new(sxx, 0.0) + C64::new(0.0, 2.0 * a0) * sx - a0 * a0;
    let k2 = problem.omega2_mu();
    let ib0 = C64::i() * modes.beta(0);
    let ig0 = C64::i() * modes.gamma(0);
    let a = Mat::from_fn(rows, rows, |i, k| {
        let d = if i == k { 1.0 } else { 0.0 };
        if i == 0 {
            C64::new(dy[(0, k)], 0.0) - ib0 * d
        } else if i == m {
            C64::new(dy[(m, k)], 0.0) + ig0 * d
        } else {
            C64::new(dyy[(i, k)], 0.0) + (psi(ys[i]) * k2 + lam_x) * d
        }
    });
    let mut rhs = vec![C64::new(0.0, 0.0); rows];
    rhs[0] = incident_datum(modes);
    Ok((a, rhs))
}

/// Layered fast path: every transformed column but one vanishes, and the
/// surviving column (scaled back) is the same for every `x_n`.
pub fn solve_layered_collocation(
    problem: &ProblemSpec,
    n: usize,
    m: usize,
) -> Result<SolutionField> {
    check_sizes(n, m)?;
    let modes = problem.modes(n)?;
    let (a, rhs) = layered_collocation_system(problem, &modes, m)?;
    let col = dense_solve(a, &rhs)?;
    let data = Mat::from_fn(m + 1, n, |i, _| col[i]);
    Ok(SolutionField::values(data, modes))
}

/// `A vec(V)` computed from the assembled matrix (for residual checks).
pub fn apply_assembled(system: &CollocationSystem, v: &[C64]) -> Vec<C64> {
    let x = Mat::from_fn(v.len(), 1, |i, _| v[i]);
    col_to_vec(&(&system.a * &x))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fourier::dft_matrices;
    use crate::linalg::{max_abs, max_abs_diff, max_abs_slice};
    use crate::medium::presets;
    use crate::problem::{IncidentWave, TruncationPolicy};
    use rand::{Rng, SeedableRng};

    fn homogeneous(n: usize) -> ProblemSpec {
        let p = ProblemSpec::new(IncidentWave::standard(), presets::homogeneous());
        if n < 40 {
            p.with_truncation(TruncationPolicy::Permissive)
        } else {
            p
        }
    }

    fn plane_wave(n: usize, m: usize, beta0: f64) -> Vec<C64> {
        let ys = ChebGrid::new(m).points();
        (0..n)
            .flat_map(|_| {
                ys.iter()
                    .map(move |&y| C64::from_polar(1.0, -beta0 * y))
                    .collect::<Vec<_>>()
            })
            .collect()
    }

    #[test]
    fn tiny_system_shape() {
        let s = assemble_collocation(&homogeneous(2), 2, 2).unwrap();
        assert_eq!((s.a.nrows(), s.a.ncols()), (6, 6));
        assert_eq!(s.g.len(), 6);
    }

    #[test]
    fn plane_wave_residual_and_solve() {
        let (n, m) = (8, 24);
        let s = assemble_collocation(&homogeneous(n), n, m).unwrap();
        let exact = plane_wave(n, m, s.modes.beta0);
        let res = apply_assembled(&s, &exact);
        assert!(max_abs_diff(&res, &s.g) < 1e-8);
        let f = solve_collocation(s).unwrap();
        let got: Vec<C64> = (0..n)
            .flat_map(|k| (0..=m).map(move |i| (k, i)))
            .map(|(k, i)| f.data[(i, k)])
            .collect();
        assert!(max_abs_diff(&got, &exact) < 1e-8);
    }

    #[test]
    fn interior_block_matches_matrix_form() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(9);
        let problem = ProblemSpec::new(IncidentWave::standard(), presets::eps1())
            .with_truncation(TruncationPolicy::Permissive);
        for &(n, m) in &[(4usize, 6usize), (5, 8), (8, 7)] {
            let s = assemble_collocation(&problem, n, m).unwrap();
            let v: Vec<C64> = (0..n * (m + 1))
                .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
                .collect();
            let av = apply_assembled(&s, &v);
            // P V Dxx^T + 2i a0 P V Dx^T - a0^2 P V + P Dy^2 V + k2 P (eps o V)
            let vm = reshape_values(&v, n, m);
            let (dx, dxx) = fourier_diff_matrices(n);
            let dy = cheb_diff_matrix(m);
            let dyy = &dy * &dy;
            let to_c =
                |a: &Mat<f64>| Mat::from_fn(a.nrows(), a.ncols(), |i, j| C64::new(a[(i, j)], 0.0));
            let a0 = s.modes.alpha0;
            let eps = sample_medium(&problem.medium, n, m);
            let t1 = &vm * to_c(&dxx).transpose();
            let t2 = &vm * to_c(&dx).transpose();
            let t4 = to_c(&dyy) * &vm;
            for k in 0..n {
                for i in 1..m {
                    let want = t1[(i, k)] + C64::new(0.0, 2.0 * a0) * t2[(i, k)]
                        - vm[(i, k)] * (a0 * a0)
                        + t4[(i, k)]
                        + eps[(i, k)] * vm[(i, k)] * problem.omega2_mu();
                    let got = av[n + k * (m - 1) + (i - 1)];
                    assert!((got - want).norm() < 1e-11 * want.norm().max(1.0));
                }
            }
        }
    }

    #[test]
    fn fourier_conjugation_decouples_layered_system() {
        let problem = ProblemSpec::new(IncidentWave::standard(), presets::eps1())
            .with_truncation(TruncationPolicy::Permissive);
        let (n, m) = (8, 6);
        let s = assemble_collocation(&problem, n, m).unwrap();
        let (f, _) = dft_matrices(n, 1);
        let rows = m + 1;
        let big = n * rows;
        // Row permutation grouping equations by the y index they belong to.
        let row_y = |r: usize| -> (usize, usize) {
            if r < n {
                (r, 0)
            } else if r < n + n * (m - 1) {
                let t = r - n;
                (t / (m - 1), t % (m - 1) + 1)
            } else {
                (r - n - n * (m - 1), m)
            }
        };
        let mut a_perm = Mat::<C64>::zeros(big, big);
        for r in 0..big {
            let (xn, yi) = row_y(r);
            for c in 0..big {
                a_perm[(xn * rows + yi, c)] = s.a[(r, c)];
            }
        }
        let t = Mat::from_fn(big, big, |i, j| {
            if i % rows == j % rows {
                f[(i / rows, j / rows)]
            } else {
                C64::new(0.0, 0.0)
            }
        });
        let conj = &t * &a_perm * t.adjoint();
        let scale = max_abs(conj.as_ref());
        let mut off = 0.0f64;
        for i in 0..big {
            for j in 0..big {
                if i / rows != j / rows {
                    off = off.max(conj[(i, j)].norm());
                }
            }
        }
        assert!(off <= 1e-10 * scale, "off-block {off:e}");
    }

    #[test]
    fn layered_path_matches_dense_and_is_constant_in_x() {
        let problem = ProblemSpec::new(IncidentWave::standard(), presets::eps1())
            .with_truncation(TruncationPolicy::Permissive);
        let (n, m) = (12, 32);
        let fast = solve_layered_collocation(&problem, n, m).unwrap();
        let dense = solve_collocation(assemble_collocation(&problem, n, m).unwrap()).unwrap();
        let mut diff = 0.0f64;
        for i in 0..=m {
            for k in 0..n {
                diff = diff.max((fast.data[(i, k)] - dense.data[(i, k)]).norm());
                assert_eq!(fast.data[(i, k)], fast.data[(i, 0)]);
            }
        }
        assert!(diff < 1e-9, "diff {diff:e}");
    }

    #[test]
    fn layered_homogeneous_recovers_plane_wave() {
        let (n, m) = (8, 24);
        let f = solve_layered_collocation(&homogeneous(n), n, m).unwrap();
        let ys = ChebGrid::new(m).points();
        let col: Vec<C64> = (0..=m).map(|i| f.data[(i, 3)]).collect();
        let want: Vec<C64> = ys
            .iter()
            .map(|&y| C64::from_polar(1.0, -f.modes.beta0 * y))
            .collect();
        assert!(max_abs_diff(&col, &want) < 1e-8);
        assert!(max_abs_slice(&col) > 0.5);
    }

    #[test]
    fn non_layered_medium_rejected_by_fast_path() {
        let problem = ProblemSpec::new(IncidentWave::standard(), presets::eps2());
        assert!(matches!(
            solve_layered_collocation(&problem, 64, 16),
            Err(Error::NotApplicable(_))
        ));
    }

    #[test]
    fn oversized_system_hits_cap() {
        let problem = ProblemSpec::new(IncidentWave::standard(), presets::eps2());
        assert!(matches!(
            assemble_collocation(&problem, 128, 128),
            Err(Error::SizeCap { .. })
        ));
    }
}
