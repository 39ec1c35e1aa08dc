//! Fourier x ultraspherical discretization in coefficient space.
//!
//! Unknowns are the Chebyshev-Fourier coefficients `V` (`M x N`) stacked by
//! columns, so index `p M + i` multiplies `T_i(y) exp(i j x)` for the mode
//! `j` stored at position `p`. Rows are ordered: `N` top boundary rows, `N`
//! bottom boundary rows, then `(M-2) N` interior rows grouped by mode.

use faer::{Col, ColRef, Mat, MatRef};

use crate::cheb::{cheb_resolve, ChebCoeffs};
use crate::collocation::DENSE_CAP;
use crate::dtn::{bc_rows_tensor, TensorBc};
use crate::error::{Error, Result};
use crate::field::SolutionField;
use crate::fourier::{toeplitz_mult, trig_resolve, TrigCoeffs};
use crate::linalg::{BandedOperator, DenseLu};
use crate::lowrank::gecp_lowrank;
use crate::medium::MediumSpec;
use crate::problem::{ModeConstants, ProblemSpec};
use crate::ultraspherical::{
    conversion_operator, diff_operator, mult_operator_cheb, AlmostBandedQr, AlmostBandedSystem,
};
use crate::C64;

/// Relative accuracy used to resolve medium factors.
pub const MEDIUM_TOL: f64 = 1e-14;
/// Truncation tolerance when compressing a bivariate medium.
pub const LOWRANK_TOL: f64 = 1e-13;
/// Default accuracy of the preconditioner's layered profile.
pub const PRECOND_TOL: f64 = 1e-8;
/// Rank budget when compressing a bivariate medium.
pub const DEFAULT_MAX_RANK: usize = 32;

fn zero() -> C64 {
    C64::new(0.0, 0.0)
}

/// One resolved term `phi(x) psi(y)` of a separable medium.
#[derive(Clone, Debug)]
pub struct SeparableFactor {
    pub phi: TrigCoeffs,
    pub psi: ChebCoeffs,
}

/// A medium reduced to finitely many resolved separable terms.
#[derive(Clone, Debug)]
pub struct ResolvedMedium {
    pub factors: Vec<SeparableFactor>,
    /// Max-norm residual of the separable approximation (0 when exact).
    pub residual_estimate: f64,
}

impl ResolvedMedium {
    pub fn rank(&self) -> usize {
        self.factors.len()
    }

    /// `(1/2pi) int eps(x, y) dx` as a Chebyshev series.
    pub fn x_average(&self) -> ChebCoeffs {
        let len = self.factors.iter().map(|f| f.psi.len()).max().unwrap_or(1);
        let mut out = vec![zero(); len];
        for f in &self.factors {
            let w = f.phi.get(0);
            for (o, c) in out.iter_mut().zip(&f.psi.coeffs) {
                *o += w * c;
            }
        }
        ChebCoeffs::new(out)
    }

    /// Largest Chebyshev degree over the `psi` factors.
    pub fn cheb_degree(&self) -> usize {
        self.factors
            .iter()
            .map(|f| f.psi.degree())
            .max()
            .unwrap_or(0)
    }

    /// Largest Fourier degree over the `phi` factors.
    pub fn trig_degree(&self) -> usize {
        self.factors
            .iter()
            .map(|f| f.phi.degree())
            .max()
            .unwrap_or(0)
    }
}

/// Resolves every separable factor of `medium`; bivariate and sampled media
/// are first compressed by complete-pivoting elimination.
pub fn resolve_medium(
    medium: &MediumSpec,
    tol: f64,
    lowrank_tol: f64,
    max_rank: usize,
) -> Result<ResolvedMedium> {
    let exact = |factors| ResolvedMedium {
        factors,
        residual_estimate: 0.0,
    };
    match medium {
        MediumSpec::Homogeneous(v) => Ok(exact(vec![SeparableFactor {
            phi: TrigCoeffs::constant(C64::new(1.0, 0.0)),
            psi: ChebCoeffs::constant(*v),
        }])),
        MediumSpec::Layered(psi) => Ok(exact(vec![SeparableFactor {
            phi: TrigCoeffs::constant(C64::new(1.0, 0.0)),
            psi: cheb_resolve(|y| psi(y), tol)?,
        }])),
        MediumSpec::SeparableSum(terms) => {
            let factors = terms
                .iter()
                .map(|t| {
                    Ok(SeparableFactor {
                        phi: trig_resolve(|x| (t.phi)(x), tol)?,
                        psi: cheb_resolve(|y| (t.psi)(y), tol)?,
                    })
                })
                .collect::<Result<Vec<_>>>()?;
            Ok(exact(factors))
        }
        MediumSpec::SampledGrid(_) | MediumSpec::Bivariate(_) => {
            let m = medium.clone();
            let lr = gecp_lowrank(move |x, y| m.eval(x, y), lowrank_tol, max_rank)?;
            Ok(lr.into_resolved())
        }
    }
}

/// `phi = 1`, `psi` layered: the operators shared by the layered fast path
/// and the preconditioner.
#[derive(Clone, Debug)]
pub struct LayeredOperators {
    pub m: usize,
    pub modes: ModeConstants,
    pub k2: f64,
    /// Leading `M-2` rows of `C = S_1 S_0`, `Y = D_2`, `Psi = S_1 S_0 M_0[psi]`.
    pub qc: BandedOperator,
    pub qy: BandedOperator,
    pub qpsi: BandedOperator,
    pub bc: TensorBc,
}

/// `Q S_1 S_0 Q^T` and `Q D_2 Q^T` (`m x m`).
fn base_operators(m: usize) -> (BandedOperator, BandedOperator) {
    let p = m + 4;
    let c = conversion_operator(1, p)
        .mul(&conversion_operator(0, p))
        .truncate(m, m);
    (c, diff_operator(2, m))
}

/// `Q S_1 S_0 M_0[psi] Q^T`, built with padding before truncation.
fn psi_operator(psi: &ChebCoeffs, m: usize) -> BandedOperator {
    let p = m + 4;
    conversion_operator(1, p)
        .mul(&conversion_operator(0, p))
        .mul(&mult_operator_cheb(psi, p))
        .truncate(m, m)
}

impl LayeredOperators {
    pub fn new(modes: &ModeConstants, k2: f64, m: usize, psi: &ChebCoeffs) -> Self {
        let (c, y) = base_operators(m);
        Self {
            m,
            modes: modes.clone(),
            k2,
            qc: c.row_block(0, m - 2),
            qy: y.row_block(0, m - 2),
            qpsi: psi_operator(psi, m).row_block(0, m - 2),
            bc: bc_rows_tensor(modes, m),
        }
    }

    /// Almost-banded system for the mode at position `p`; the right-hand side
    /// carries the incident datum for mode 0 and is zero otherwise.
    pub fn mode_system(&self, p: usize) -> AlmostBandedSystem {
        let m = self.m;
        let top = self.bc.top_row(p);
        let bottom = self.bc.bottom_row(p);
        let dense = Mat::from_fn(2, m, |i, k| if i == 0 { top[k] } else { bottom[k] });
        let alpha = self.modes.alphas[p];
        let body = self
            .qy
            .add_scaled(&self.qpsi, C64::new(self.k2, 0.0))
            .add_scaled(&self.qc, C64::new(-alpha * alpha, 0.0));
        let mut rhs = vec![zero(); m];
        rhs[0] = self.bc.rhs_top[p];
        AlmostBandedSystem::new(dense, body, rhs).expect("mode system shapes are consistent")
    }
}

fn check_sizes(m: usize, n: usize) -> Result<()> {
    if m < 3 || n < 1 {
        return Err(Error::InvalidArgument(format!(
            "tensor method needs M >= 3 and N >= 1, got M = {m}, N = {n}"
        )));
    }
    Ok(())
}

/// Layered fast path: only the mode carrying the incident wave is excited.
pub fn solve_layered_tensor(problem: &ProblemSpec, m: usize, n: usize) -> Result<SolutionField> {
    check_sizes(m, n)?;
    let psi = problem.medium.layered_profile().ok_or_else(|| {
        Error::NotApplicable("layered fast path needs a medium independent of x".into())
    })?;
    let modes = problem.modes(n)?;
    let psi = cheb_resolve(|y| psi(y), MEDIUM_TOL)?;
    let ops = LayeredOperators::new(&modes, problem.omega2_mu(), m, &psi);
    let p = modes.q - 1;
    let sys = ops.mode_system(p);
    let col = sys.factor()?.solve(&sys.rhs);
    let mut data = Mat::zeros(m, n);
    for (i, v) in col.into_iter().enumerate() {
        data[(i, p)] = v;
    }
    Ok(SolutionField::coefficients(data, modes))
}

/// Block-diagonal inverse of a layered-medium operator: one almost-banded
/// factorization per mode, computed once.
pub struct LayeredPreconditioner {
    m: usize,
    factors: Vec<AlmostBandedQr>,
}

impl LayeredPreconditioner {
    pub fn new(
        problem: &ProblemSpec,
        modes: &ModeConstants,
        m: usize,
        psi: &ChebCoeffs,
    ) -> Result<Self> {
        let ops = LayeredOperators::new(modes, problem.omega2_mu(), m, psi);
        let factors = (0..modes.n)
            .map(|p| ops.mode_system(p).factor())
            .collect::<Result<Vec<_>>>()?;
        Ok(Self { m, factors })
    }

    pub fn factorizations(&self) -> usize {
        self.factors.len()
    }

    pub fn apply(&self, r: &[C64]) -> Vec<C64> {
        let m = self.m;
        let n = self.factors.len();
        assert_eq!(r.len(), m * n);
        let interior = 2 * n;
        let mut out = vec![zero(); m * n];
        let mut local = vec![zero(); m];
        for (p, f) in self.factors.iter().enumerate() {
            local[0] = r[p];
            local[1] = r[n + p];
            local[2..].copy_from_slice(&r[interior + p * (m - 2)..interior + (p + 1) * (m - 2)]);
            f.solve_in_place(&mut local);
            out[p * m..(p + 1) * m].copy_from_slice(&local);
        }
        out
    }
}

/// The assembled coefficient-space system, kept in factored (Kronecker) form.
#[derive(Clone, Debug)]
pub struct TensorSystem {
    pub m: usize,
    pub n: usize,
    pub modes: ModeConstants,
    pub k2: f64,
    /// `Q C Q^T` and `Q Y Q^T`, full `M x M`.
    pub c: BandedOperator,
    pub y: BandedOperator,
    /// Diagonal of `X`: `(ij)^2 + 2i alpha0 (ij) - alpha0^2` per position.
    pub x: Vec<C64>,
    /// `Q Psi_k Q^T` (`M x M`) and `P Phi_k P^T` (`N x N`) per separable term.
    pub psi: Vec<BandedOperator>,
    pub phi: Vec<BandedOperator>,
    pub bc: TensorBc,
    pub rhs: Vec<C64>,
    qc: BandedOperator,
    qy: BandedOperator,
    qpsi: Vec<BandedOperator>,
}

pub fn assemble_tensor(
    problem: &ProblemSpec,
    m: usize,
    n: usize,
    medium: &ResolvedMedium,
) -> Result<TensorSystem> {
    check_sizes(m, n)?;
    let modes = problem.modes(n)?;
    let (c, y) = base_operators(m);
    let a0 = modes.alpha0;
    let x = (0..n)
        .map(|p| {
            let ij = C64::new(0.0, modes.mode_at(p) as f64);
            ij * ij + C64::new(0.0, 2.0 * a0) * ij - a0 * a0
        })
        .collect();
    let psi: Vec<BandedOperator> = medium
        .factors
        .iter()
        .map(|f| psi_operator(&f.psi, m))
        .collect();
    let phi = medium
        .factors
        .iter()
        .map(|f| toeplitz_mult(&f.phi, n, modes.q))
        .collect();
    let bc = bc_rows_tensor(&modes, m);
    let mut rhs = vec![zero(); m * n];
    rhs[..n].copy_from_slice(&bc.rhs_top);
    Ok(TensorSystem {
        m,
        n,
        k2: problem.omega2_mu(),
        qc: c.row_block(0, m - 2),
        qy: y.row_block(0, m - 2),
        qpsi: psi.iter().map(|p| p.row_block(0, m - 2)).collect(),
        c,
        y,
        x,
        psi,
        phi,
        bc,
        rhs,
        modes,
    })
}

impl TensorSystem {
    pub fn unknowns(&self) -> usize {
        self.m * self.n
    }

    pub fn rank(&self) -> usize {
        self.psi.len()
    }

    /// `A v` without forming `A`; also returns the number of scalar
    /// multiply-adds spent.
    pub fn apply_counted(&self, v: &[C64]) -> (Vec<C64>, u64) {
        let (m, n) = (self.m, self.n);
        assert_eq!(v.len(), m * n);
        let mi = m - 2;
        let mut out = vec![zero(); m * n];
        let mut ops = 0u64;
        for p in 0..n {
            let col = &v[p * m..(p + 1) * m];
            let top = self.bc.top_row(p);
            let bottom = self.bc.bottom_row(p);
            out[p] = top.iter().zip(col).map(|(a, b)| a * b).sum();
            out[n + p] = bottom.iter().zip(col).map(|(a, b)| a * b).sum();
            ops += 2 * m as u64;
        }
        let interior = &mut out[2 * n..];
        let mut tmp = vec![zero(); mi * n];
        // (QC) V X
        ops += self.qc.apply_block(v, n, &mut tmp);
        for p in 0..n {
            for i in 0..mi {
                interior[p * mi + i] += tmp[p * mi + i] * self.x[p];
            }
        }
        ops += (mi * n) as u64;
        // (QY) V
        ops += self.qy.apply_block(v, n, &mut tmp);
        for (o, t) in interior.iter_mut().zip(&tmp) {
            *o += t;
        }
        // k2 (Q Psi_k) V Phi_k^T
        for (qpsi, phi) in self.qpsi.iter().zip(&self.phi) {
            ops += qpsi.apply_block(v, n, &mut tmp);
            for p in 0..n {
                let (s, e) = phi.row_span(p);
                for pp in s..e {
                    let w = phi.get(p, pp) * self.k2;
                    if w == zero() {
                        continue;
                    }
                    let src = &tmp[pp * mi..(pp + 1) * mi];
                    let dst = &mut interior[p * mi..(p + 1) * mi];
                    for (d, sv) in dst.iter_mut().zip(src) {
                        *d += w * sv;
                    }
                    ops += mi as u64;
                }
            }
        }
        (out, ops)
    }

    pub fn apply_operator(&self, v: &[C64]) -> Vec<C64> {
        self.apply_counted(v).0
    }

    /// The dense matrix of the system.
    pub fn materialize(&self) -> Result<Mat<C64>> {
        let (m, n) = (self.m, self.n);
        let size = m * n;
        if size > DENSE_CAP {
            return Err(Error::SizeCap {
                unknowns: size,
                cap: DENSE_CAP,
            });
        }
        let mi = m - 2;
        let mut a = Mat::<C64>::zeros(size, size);
        for p in 0..n {
            let top = self.bc.top_row(p);
            let bottom = self.bc.bottom_row(p);
            for i in 0..m {
                a[(p, p * m + i)] = top[i];
                a[(n + p, p * m + i)] = bottom[i];
            }
            for i in 0..mi {
                let row = 2 * n + p * mi + i;
                let (s, e) = self.qc.row_span(i);
                for k in s..e {
                    a[(row, p * m + k)] += self.qc.get(i, k) * self.x[p];
                }
                let (s, e) = self.qy.row_span(i);
                for k in s..e {
                    a[(row, p * m + k)] += self.qy.get(i, k);
                }
                for (qpsi, phi) in self.qpsi.iter().zip(&self.phi) {
                    let (ps, pe) = phi.row_span(p);
                    let (ks, ke) = qpsi.row_span(i);
                    for pp in ps..pe {
                        let w = phi.get(p, pp) * self.k2;
                        if w == zero() {
                            continue;
                        }
                        for k in ks..ke {
                            a[(row, pp * m + k)] += w * qpsi.get(i, k);
                        }
                    }
                }
            }
        }
        Ok(a)
    }

    fn field(&self, v: &[C64]) -> SolutionField {
        let data = Mat::from_fn(self.m, self.n, |i, p| v[p * self.m + i]);
        SolutionField::coefficients(data, self.modes.clone())
    }
}

/// Materializes and factors the full system.
pub fn solve_tensor_dense(system: &TensorSystem) -> Result<SolutionField> {
    let a = system.materialize()?;
    let v = DenseLu::factor(a)?.solve(&system.rhs);
    Ok(system.field(&v))
}

/// Iteration history of a GMRES run.
#[derive(Clone, Debug, PartialEq)]
pub struct KrylovLog {
    pub iterations: usize,
    /// Relative (preconditioned) residual norms, starting with 1 at iteration 0.
    pub residuals: Vec<f64>,
    pub converged: bool,
}

impl KrylovLog {
    pub fn final_residual(&self) -> f64 {
        self.residuals.last().copied().unwrap_or(f64::NAN)
    }
}

/// `sum conj(a_i) b_i`, with independent partial sums so the loop vectorizes.
fn dot(a: &[C64], b: &[C64]) -> C64 {
    let mut re = [0.0f64; 4];
    let mut im = [0.0f64; 4];
    let (ca, ra) = a.as_chunks::<4>();
    let (cb, rb) = b.as_chunks::<4>();
    for (x, y) in ca.iter().zip(cb) {
        for l in 0..4 {
            re[l] += x[l].re * y[l].re + x[l].im * y[l].im;
            im[l] += x[l].re * y[l].im - x[l].im * y[l].re;
        }
    }
    let mut acc = C64::new(re.iter().sum(), im.iter().sum());
    for (x, y) in ra.iter().zip(rb) {
        acc += x.conj() * y;
    }
    acc
}

fn axpy(a: C64, x: &[C64], y: &mut [C64]) {
    for (yi, xi) in y.iter_mut().zip(x) {
        yi.re += a.re * xi.re - a.im * xi.im;
        yi.im += a.re * xi.im + a.im * xi.re;
    }
}

fn norm(v: &[C64]) -> f64 {
    v.iter().map(|z| z.norm_sqr()).sum::<f64>().sqrt()
}

const BREAKDOWN_TOL: f64 = 1e-14;

/// Full (unrestarted) left-preconditioned GMRES from the zero initial guess,
/// with modified Gram-Schmidt Arnoldi.
///
/// Stops when the preconditioned residual drops below `tol` relative to the
/// preconditioned right-hand side, or after `maxit` iterations; the returned
/// log records which.
pub fn gmres(
    apply: impl Fn(&[C64]) -> Vec<C64>,
    precond: Option<&dyn Fn(&[C64]) -> Vec<C64>>,
    rhs: &[C64],
    tol: f64,
    maxit: usize,
) -> Result<(Vec<C64>, KrylovLog)> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "GMRES tolerance must be positive, got {tol}"
        )));
    }
    let n = rhs.len();
    let pre = |v: Vec<C64>| match precond {
        Some(p) => p(&v),
        None => v,
    };
    let r0 = pre(rhs.to_vec());
    let beta = norm(&r0);
    let mut log = KrylovLog {
        iterations: 0,
        residuals: vec![1.0],
        converged: false,
    };
    if beta == 0.0 {
        log.converged = true;
        return Ok((vec![zero(); n], log));
    }
    // Krylov basis, column-major `n x (k+1)`.
    let mut basis: Vec<C64> = r0.iter().map(|z| z / beta).collect();
    let mut h: Vec<Vec<C64>> = Vec::new();
    let mut cs: Vec<f64> = Vec::new();
    let mut sn: Vec<C64> = Vec::new();
    let mut g = vec![C64::new(beta, 0.0)];

    let mut k = 0;
    while k < maxit {
        let mut w = pre(apply(&basis[k * n..(k + 1) * n]));
        let w_norm0 = norm(&w);
        let mut col = vec![zero(); k + 2];
        for j in 0..=k {
            let vj = &basis[j * n..(j + 1) * n];
            let hij = dot(vj, &w);
            col[j] = hij;
            axpy(-hij, vj, &mut w);
        }
        let hn = norm(&w);
        col[k + 1] = C64::new(hn, 0.0);
        for j in 0..k {
            let a = col[j];
            let b = col[j + 1];
            col[j] = cs[j] * a + sn[j] * b;
            col[j + 1] = -sn[j].conj() * a + cs[j] * b;
        }
        let a = col[k];
        let b = col[k + 1];
        let denom = (a.norm_sqr() + b.norm_sqr()).sqrt();
        if denom == 0.0 {
            return Err(Error::Breakdown { iteration: k + 1 });
        }
        let (c, s) = if a.norm() == 0.0 {
            (0.0, C64::new(1.0, 0.0))
        } else {
            (a.norm() / denom, (a / a.norm()) * b.conj() / denom)
        };
        col[k] = c * a + s * b;
        col[k + 1] = zero();
        cs.push(c);
        sn.push(s);
        let gk = g[k];
        g[k] = c * gk;
        g.push(-s.conj() * gk);
        h.push(col);
        k += 1;
        let rel = g[k].norm() / beta;
        log.residuals.push(rel);
        log.iterations = k;
        let lucky = hn <= BREAKDOWN_TOL * w_norm0.max(f64::MIN_POSITIVE);
        if rel <= tol || lucky {
            if lucky && rel > tol && col_is_singular(&h[k - 1], k - 1) {
                return Err(Error::Breakdown { iteration: k });
            }
            log.converged = true;
            break;
        }
        basis.extend(w.iter().map(|z| z / hn));
    }

    // Back-substitution on the triangular Hessenberg factor.
    let mut y = vec![zero(); k];
    for i in (0..k).rev() {
        let mut acc = g[i];
        for j in i + 1..k {
            acc -= h[j][i] * y[j];
        }
        y[i] = acc / h[i][i];
    }
    let v = MatRef::from_column_major_slice(&basis[..n * k], n, k);
    let x: Col<C64> = v * ColRef::from_slice(&y);
    Ok((x.iter().copied().collect(), log))
}

fn col_is_singular(col: &[C64], k: usize) -> bool {
    col[k].norm() == 0.0
}

/// Preconditioner for the iterative path.
#[derive(Clone, Debug)]
pub enum PrecondChoice {
    None,
    /// Layered medium `(1/2pi) int eps dx`.
    XAverage,
    /// A user-chosen layered medium.
    Layered(MediumSpec),
}

#[derive(Clone, Debug)]
pub struct TensorOptions {
    /// Systems with more unknowns than this are solved by GMRES.
    pub dense_cap: usize,
    pub gmres_tol: f64,
    pub maxit: usize,
    pub precond: PrecondChoice,
    pub medium_tol: f64,
    pub lowrank_tol: f64,
    /// Accuracy of the preconditioner's layered profile.
    pub precond_tol: f64,
    pub max_rank: usize,
}

impl Default for TensorOptions {
    fn default() -> Self {
        Self {
            dense_cap: 1024,
            gmres_tol: 1e-8,
            maxit: 500,
            precond: PrecondChoice::XAverage,
            medium_tol: MEDIUM_TOL,
            lowrank_tol: LOWRANK_TOL,
            precond_tol: PRECOND_TOL,
            max_rank: DEFAULT_MAX_RANK,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TensorPath {
    Layered,
    Dense,
    Gmres,
}

#[derive(Clone, Debug)]
pub struct TensorSolution {
    pub field: SolutionField,
    pub path: TensorPath,
    pub log: Option<KrylovLog>,
    pub rank: usize,
    pub preconditioner_factorizations: usize,
}

/// Builds the preconditioner requested by `choice` (if any); the layered
/// profile is resolved and truncated at relative accuracy `tol`.
pub fn build_preconditioner(
    problem: &ProblemSpec,
    modes: &ModeConstants,
    m: usize,
    medium: &ResolvedMedium,
    choice: &PrecondChoice,
    tol: f64,
) -> Result<Option<LayeredPreconditioner>> {
    let psi = match choice {
        PrecondChoice::None => return Ok(None),
        PrecondChoice::XAverage => medium.x_average(),
        PrecondChoice::Layered(spec) => {
            let prof = spec.layered_profile().ok_or_else(|| {
                Error::InvalidArgument("preconditioner medium must be layered".into())
            })?;
            cheb_resolve(|y| prof(y), tol)?
        }
    };
    let cut = psi.coeffs.iter().fold(0.0f64, |a, c| a.max(c.norm())) * tol;
    let keep = psi.coeffs.iter().rposition(|c| c.norm() > cut).unwrap_or(0);
    let psi = ChebCoeffs::new(psi.coeffs[..=keep].to_vec());
    Ok(Some(LayeredPreconditioner::new(problem, modes, m, &psi)?))
}

/// Solves the tensor system by the cheapest applicable path.
pub fn solve_tensor(
    problem: &ProblemSpec,
    m: usize,
    n: usize,
    opts: &TensorOptions,
) -> Result<TensorSolution> {
    if problem.medium.is_layered() {
        return solve_tensor_with(problem, None, m, n, opts);
    }
    let medium = resolve_medium(
        &problem.medium,
        opts.medium_tol,
        opts.lowrank_tol,
        opts.max_rank,
    )?;
    solve_tensor_with(problem, Some(&medium), m, n, opts)
}

/// As [`solve_tensor`] with the medium already resolved (ignored for
/// layered media, which take the fast path).
pub fn solve_tensor_with(
    problem: &ProblemSpec,
    medium: Option<&ResolvedMedium>,
    m: usize,
    n: usize,
    opts: &TensorOptions,
) -> Result<TensorSolution> {
    if problem.medium.is_layered() {
        let field = solve_layered_tensor(problem, m, n)?;
        return Ok(TensorSolution {
            field,
            path: TensorPath::Layered,
            log: None,
            rank: 1,
            preconditioner_factorizations: 0,
        });
    }
    let owned;
    let medium = match medium {
        Some(m) => m,
        None => {
            owned = resolve_medium(
                &problem.medium,
                opts.medium_tol,
                opts.lowrank_tol,
                opts.max_rank,
            )?;
            &owned
        }
    };
    let system = assemble_tensor(problem, m, n, medium)?;
    if system.unknowns() <= opts.dense_cap.min(DENSE_CAP) {
        return Ok(TensorSolution {
            field: solve_tensor_dense(&system)?,
            path: TensorPath::Dense,
            log: None,
            rank: medium.rank(),
            preconditioner_factorizations: 0,
        });
    }
    let pc = build_preconditioner(
        problem,
        &system.modes,
        m,
        medium,
        &opts.precond,
        opts.precond_tol,
    )?;
    let pfn = pc.as_ref().map(|p| move |r: &[C64]| p.apply(r));
    let pref: Option<&dyn Fn(&[C64]) -> Vec<C64>> =
        pfn.as_ref().map(|f| f as &dyn Fn(&[C64]) -> Vec<C64>);
    let (v, log) = gmres(
        |x| system.apply_operator(x),
        pref,
        &system.rhs,
        opts.gmres_tol,
        opts.maxit,
    )?;
    if !log.converged {
        return Err(Error::NotConverged(Box::new(log)));
    }
    Ok(TensorSolution {
        field: system.field(&v),
        path: TensorPath::Gmres,
        log: Some(log),
        rank: medium.rank(),
        preconditioner_factorizations: pc.as_ref().map_or(0, |p| p.factorizations()),
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::linalg::{matvec, max_abs_diff, max_abs_slice};
    use crate::medium::presets;
    use crate::problem::{IncidentWave, QChoice, TruncationPolicy};
    use rand::{Rng, SeedableRng};

    fn relaxed(medium: MediumSpec) -> ProblemSpec {
        ProblemSpec::new(IncidentWave::standard(), medium)
            .with_truncation(TruncationPolicy::Permissive)
    }

    fn rand_vec(rng: &mut impl Rng, n: usize) -> Vec<C64> {
        (0..n)
            .map(|_| C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0)))
            .collect()
    }

    #[test]
    fn x_diagonal_is_minus_alpha_squared() {
        let p = relaxed(presets::homogeneous()).with_q(QChoice::Fixed(5));
        let med = resolve_medium(&p.medium, MEDIUM_TOL, LOWRANK_TOL, 4).unwrap();
        let s = assemble_tensor(&p, 8, 8, &med).unwrap();
        for (pos, x) in s.x.iter().enumerate() {
            let a = s.modes.alphas[pos];
            assert!((x - C64::new(-a * a, 0.0)).norm() < 1e-12);
        }
    }

    #[test]
    fn layered_phi_is_identity() {
        let p = relaxed(presets::eps1());
        let med = resolve_medium(&p.medium, MEDIUM_TOL, LOWRANK_TOL, 4).unwrap();
        let s = assemble_tensor(&p, 16, 8, &med).unwrap();
        assert_eq!(s.phi[0].to_dense(), BandedOperator::identity(8).to_dense());
    }

    #[test]
    fn homogeneous_plane_wave_residual() {
        let p = relaxed(presets::homogeneous());
        let med = resolve_medium(&p.medium, MEDIUM_TOL, LOWRANK_TOL, 4).unwrap();
        let (m, n) = (32, 8);
        let s = assemble_tensor(&p, m, n, &med).unwrap();
        let b0 = s.modes.beta0;
        let w = cheb_resolve(|y| C64::from_polar(1.0, -b0 * y), 1e-15)
            .unwrap()
            .resized(m);
        let mut v = vec![zero(); m * n];
        let q = s.modes.q - 1;
        v[q * m..(q + 1) * m].copy_from_slice(&w);
        let res = s.apply_operator(&v);
        assert!(max_abs_diff(&res, &s.rhs) < 1e-9);
    }

    #[test]
    fn matrix_free_matches_materialized() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(21);
        let p = relaxed(presets::eps2());
        let med = resolve_medium(&p.medium, 1e-10, LOWRANK_TOL, 4).unwrap();
        assert_eq!(med.rank(), 2);
        let s = assemble_tensor(&p, 16, 8, &med).unwrap();
        let a = s.materialize().unwrap();
        let v = rand_vec(&mut rng, 128);
        let dense = matvec(a.as_ref(), &v);
        let free = s.apply_operator(&v);
        assert!(max_abs_diff(&dense, &free) < 1e-11 * max_abs_slice(&dense));
        assert_eq!((a.nrows(), a.ncols()), (128, 128));
    }

    proptest::proptest! {
        #![proptest_config(proptest::prelude::ProptestConfig::with_cases(24))]
        #[test]
        fn apply_matches_materialized(m in 4usize..=32, n in 1usize..=16, seed in 0u64..1000) {
            proptest::prop_assume!(m * n <= 512);
            let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(seed);
            let p = relaxed(presets::eps2());
            let med = resolve_medium(&p.medium, 1e-10, LOWRANK_TOL, 4).unwrap();
            let s = assemble_tensor(&p, m, n, &med).unwrap();
            let a = s.materialize().unwrap();
            let v = rand_vec(&mut rng, m * n);
            let dense = matvec(a.as_ref(), &v);
            let free = s.apply_operator(&v);
            proptest::prop_assert!(max_abs_diff(&dense, &free) <= 1e-11 * max_abs_slice(&dense));
        }
    }

    #[test]
    fn zero_input_gives_zero_interior() {
        let p = relaxed(presets::eps2());
        let med = resolve_medium(&p.medium, 1e-10, LOWRANK_TOL, 4).unwrap();
        let s = assemble_tensor(&p, 12, 8, &med).unwrap();
        assert!(s
            .apply_operator(&vec![zero(); 96])
            .iter()
            .all(|z| *z == zero()));
    }

    #[test]
    fn operation_count_is_linear_in_n() {
        let p = relaxed(presets::eps2());
        let med = resolve_medium(&p.medium, 1e-10, LOWRANK_TOL, 4).unwrap();
        let count = |n: usize| {
            let s = assemble_tensor(&p, 24, n, &med).unwrap();
            s.apply_counted(&vec![C64::new(1.0, 0.0); 24 * n]).1 as f64
        };
        let ratio = count(64) / count(32);
        assert!((1.7..=2.3).contains(&ratio), "ratio {ratio}");
    }

    #[test]
    fn homogeneous_layered_solution_is_the_plane_wave() {
        let p = relaxed(presets::homogeneous());
        let (m, n) = (32, 8);
        let f = solve_layered_tensor(&p, m, n).unwrap();
        let b0 = f.modes.beta0;
        let w = cheb_resolve(|y| C64::from_polar(1.0, -b0 * y), 1e-15)
            .unwrap()
            .resized(m);
        let q = f.modes.q - 1;
        let col: Vec<C64> = (0..m).map(|i| f.data[(i, q)]).collect();
        assert!(max_abs_diff(&col, &w) < 1e-9);
    }

    #[test]
    fn dense_and_layered_agree_for_layered_medium() {
        let p = relaxed(presets::eps1());
        let (m, n) = (40, 8);
        let med = resolve_medium(&p.medium, MEDIUM_TOL, LOWRANK_TOL, 4).unwrap();
        let dense = solve_tensor_dense(&assemble_tensor(&p, m, n, &med).unwrap()).unwrap();
        let fast = solve_layered_tensor(&p, m, n).unwrap();
        let mut diff = 0.0f64;
        let mut other = 0.0f64;
        for i in 0..m {
            for k in 0..n {
                diff = diff.max((dense.data[(i, k)] - fast.data[(i, k)]).norm());
                if k != dense.modes.q - 1 {
                    other = other.max(dense.data[(i, k)].norm());
                }
            }
        }
        assert!(diff < 1e-9, "diff {diff:e}");
        assert!(other < 1e-10);
    }

    #[test]
    fn exact_preconditioner_inverts_layered_operator() {
        let p = relaxed(presets::eps1());
        let (m, n) = (24, 8);
        let med = resolve_medium(&p.medium, MEDIUM_TOL, LOWRANK_TOL, 4).unwrap();
        let s = assemble_tensor(&p, m, n, &med).unwrap();
        let pc = build_preconditioner(&p, &s.modes, m, &med, &PrecondChoice::XAverage, MEDIUM_TOL)
            .unwrap()
            .unwrap();
        assert_eq!(pc.factorizations(), n);
        let x = pc.apply(&s.rhs);
        let want = solve_tensor_dense(&s).unwrap();
        let got = s.field(&x);
        let mut diff = 0.0f64;
        for i in 0..m {
            for k in 0..n {
                diff = diff.max((got.data[(i, k)] - want.data[(i, k)]).norm());
            }
        }
        assert!(diff < 1e-10);
        let (_, log) = gmres(
            |v| s.apply_operator(v),
            Some(&|r: &[C64]| pc.apply(r)),
            &s.rhs,
            1e-12,
            10,
        )
        .unwrap();
        assert_eq!(log.iterations, 1);
    }

    #[test]
    fn gmres_identity_and_dense_oracle() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(2);
        let b = rand_vec(&mut rng, 20);
        let (x, log) = gmres(|v| v.to_vec(), None, &b, 1e-10, 5).unwrap();
        assert_eq!(log.iterations, 1);
        assert!(max_abs_diff(&x, &b) < 1e-14);

        let n = 50;
        let a = Mat::from_fn(n, n, |i, j| {
            let base = C64::new(rng.random_range(-1.0..1.0), rng.random_range(-1.0..1.0))
                / (n as f64).sqrt();
            if i == j {
                base + C64::new(3.0, 0.0)
            } else {
                base
            }
        });
        let b = rand_vec(&mut rng, n);
        let tol = 1e-10;
        let (x, log) = gmres(|v| matvec(a.as_ref(), v), None, &b, tol, 100).unwrap();
        assert!(log.converged);
        assert!(log
            .residuals
            .windows(2)
            .all(|w| w[1] <= w[0] * (1.0 + 1e-12)));
        let oracle = crate::linalg::dense_solve(a.clone(), &b).unwrap();
        assert!(max_abs_diff(&x, &oracle) < tol * 100.0 * max_abs_slice(&oracle));
    }

    #[test]
    fn gmres_reports_non_convergence() {
        let n = 30;
        // Cyclic shift: GMRES makes no progress until the n-th step.
        let apply = |v: &[C64]| (0..n).map(|i| v[(i + 1) % n]).collect::<Vec<_>>();
        let mut b = vec![zero(); n];
        b[0] = C64::new(1.0, 0.0);
        let (_, log) = gmres(apply, None, &b, 1e-8, 10).unwrap();
        assert!(!log.converged);
        assert_eq!(log.iterations, 10);
        assert!(log.final_residual() > 0.9);
    }
}
