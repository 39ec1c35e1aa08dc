//! Separable approximation of bivariate media by Gaussian elimination with
//! complete pivoting on a trig x Chebyshev sample grid.

use std::f64::consts::PI;
use std::sync::Arc;

use crate::cheb::{cheb_resolve, ChebCoeffs, ChebGrid};
use crate::error::{Error, Result};
use crate::fourier::{trig_resolve, TrigCoeffs, TRIM_FACTOR};
use crate::medium::{MediumSpec, SeparableTerm};
use crate::tensor::{ResolvedMedium, SeparableFactor};
use crate::C64;

/// Side of the first pivot-search grid.
pub const INITIAL_GRID: usize = 65;
/// Refinement stops beyond this grid side.
pub const MAX_GRID: usize = 513;
/// Pivots below this fraction of `max|f|` end the elimination.
pub const ZERO_PIVOT: f64 = 1e-15;
/// Refine when the fine-grid residual exceeds this multiple of the estimate.
pub const REFINE_FACTOR: f64 = 3.0;

/// One term `weight * phi(x) * psi(y)`.
#[derive(Clone, Debug)]
pub struct LowRankTerm {
    pub phi: TrigCoeffs,
    pub psi: ChebCoeffs,
    pub weight: C64,
}

impl LowRankTerm {
    pub fn eval(&self, x: f64, y: f64) -> C64 {
        self.weight * self.phi.eval(x) * self.psi.eval(y)
    }
}

#[derive(Clone, Debug)]
pub struct LowRankMedium {
    pub terms: Vec<LowRankTerm>,
    pub achieved_rank: usize,
    /// Max residual on the pivot grid after the last step.
    pub residual_estimate: f64,
    /// Max `|f|` on the pivot grid.
    pub scale: f64,
    /// Pivot magnitudes in selection order.
    pub pivots: Vec<f64>,
    /// Pivot locations `(x*, y*)`.
    pub pivot_points: Vec<(f64, f64)>,
    /// Residual max-norm before the first step and after each step.
    pub residual_history: Vec<f64>,
    /// Side of the pivot grid that was finally used.
    pub grid: usize,
}

impl LowRankMedium {
    pub fn eval(&self, x: f64, y: f64) -> C64 {
        self.terms.iter().map(|t| t.eval(x, y)).sum()
    }

    /// Resolved factors with the weights folded into `phi`.
    pub fn into_resolved(self) -> ResolvedMedium {
        let factors = self
            .terms
            .into_iter()
            .map(|t| SeparableFactor {
                phi: TrigCoeffs::new(t.phi.coeffs.iter().map(|c| c * t.weight).collect(), t.phi.q),
                psi: t.psi,
            })
            .collect();
        ResolvedMedium {
            factors,
            residual_estimate: self.residual_estimate,
        }
    }

    pub fn to_separable_sum(&self) -> MediumSpec {
        let terms = self
            .terms
            .iter()
            .map(|t| {
                let phi = Arc::new(t.phi.clone());
                let psi = Arc::new(t.psi.clone());
                let w = t.weight;
                SeparableTerm::new(move |x| w * phi.eval(x), move |y| psi.eval(y))
            })
            .collect();
        MediumSpec::SeparableSum(terms)
    }
}

struct Grid {
    xs: Vec<f64>,
    ys: Vec<f64>,
}

impl Grid {
    fn new(side: usize) -> Self {
        Self {
            xs: (0..side)
                .map(|i| 2.0 * PI * i as f64 / side as f64)
                .collect(),
            ys: ChebGrid::new(side - 1).points(),
        }
    }
}

fn max_abs(v: &[C64]) -> f64 {
    v.iter().fold(0.0f64, |a, z| a.max(z.norm()))
}

/// Slice tolerance: terms whose slices are already small need only be
/// resolved relative to `max|f|`.
fn slice_tol(tol: f64, scale: f64, pivot: f64) -> f64 {
    (tol * scale / pivot).clamp(tol, 1e-3)
}

/// Drops trailing coefficients whose contribution to the term stays below
/// `cut` in absolute size.
fn trim_term(t: LowRankTerm, cut: f64) -> LowRankTerm {
    let w = t.weight.norm();
    let sphi: f64 = t.phi.coeffs.iter().map(|c| c.norm()).sum();
    let spsi: f64 = t.psi.coeffs.iter().map(|c| c.norm()).sum();
    let keep_psi = t
        .psi
        .coeffs
        .iter()
        .rposition(|c| w * sphi * c.norm() > cut)
        .unwrap_or(0);
    let mut psi = t.psi.coeffs;
    psi.truncate(keep_psi + 1);
    let deg = t.phi.degree() as i64;
    let keep_phi = (0..=deg)
        .rev()
        .find(|&j| w * spsi * t.phi.get(j).norm().max(t.phi.get(-j).norm()) > cut)
        .unwrap_or(0);
    let phi = (-keep_phi..=keep_phi).map(|j| t.phi.get(j)).collect();
    LowRankTerm {
        phi: TrigCoeffs::symmetric(phi),
        psi: ChebCoeffs::new(psi),
        weight: t.weight,
    }
}

/// Elimination on a fixed grid; `Err` carries the best-so-far result.
fn eliminate(
    f: &dyn Fn(f64, f64) -> C64,
    grid: &Grid,
    tol: f64,
    max_rank: usize,
) -> Result<std::result::Result<LowRankMedium, LowRankMedium>> {
    let nx = grid.xs.len();
    let ny = grid.ys.len();
    // Residual, row-major by y.
    let mut e: Vec<C64> = Vec::with_capacity(nx * ny);
    for &y in &grid.ys {
        for &x in &grid.xs {
            let v = f(x, y);
            if !v.re.is_finite() || !v.im.is_finite() {
                return Err(Error::Resolution(format!(
                    "medium is not finite at ({x}, {y})"
                )));
            }
            e.push(v);
        }
    }
    let scale = max_abs(&e);
    let mut out = LowRankMedium {
        terms: Vec::new(),
        achieved_rank: 0,
        residual_estimate: scale,
        scale,
        pivots: Vec::new(),
        pivot_points: Vec::new(),
        residual_history: vec![scale],
        grid: nx,
    };
    if scale == 0.0 {
        return Ok(Ok(out));
    }
    loop {
        let (idx, piv) = e.iter().enumerate().fold((0, 0.0f64), |(bi, bv), (i, z)| {
            if z.norm() > bv {
                (i, z.norm())
            } else {
                (bi, bv)
            }
        });
        out.residual_estimate = piv;
        if piv <= tol * scale || piv < ZERO_PIVOT * scale {
            return Ok(Ok(out));
        }
        if out.terms.len() == max_rank {
            return Ok(Err(out));
        }
        let (ky, ix) = (idx / nx, idx % nx);
        let (xs, ys) = (grid.xs[ix], grid.ys[ky]);
        let d = e[idx];
        let terms = &out.terms;
        let residual = |x: f64, y: f64| f(x, y) - terms.iter().map(|t| t.eval(x, y)).sum::<C64>();
        let stol = slice_tol(tol, scale, piv);
        let psi = cheb_resolve(|y| residual(xs, y), stol)?;
        let phi = trig_resolve(|x| residual(x, ys), stol)?;
        let term = trim_term(
            LowRankTerm {
                phi,
                psi,
                weight: 1.0 / d,
            },
            TRIM_FACTOR * tol * scale,
        );
        // Exact elimination on the samples; the resolved slices only feed
        // the continuous approximant.
        let row: Vec<C64> = e[ky * nx..(ky + 1) * nx].iter().map(|r| r / d).collect();
        for k in 0..ny {
            let c = e[k * nx + ix];
            for (i, r) in row.iter().enumerate() {
                e[k * nx + i] -= c * r;
            }
        }
        out.terms.push(term);
        out.achieved_rank += 1;
        out.pivots.push(piv);
        out.pivot_points.push((xs, ys));
        out.residual_history.push(max_abs(&e));
    }
}

/// Max `|f - approx|` on the grid of side `side` offset from the pivot grid.
fn fine_residual(f: &dyn Fn(f64, f64) -> C64, lr: &LowRankMedium, side: usize) -> f64 {
    let g = Grid::new(side);
    let mut worst = 0.0f64;
    for &y in &g.ys {
        for &x in &g.xs {
            let x = x + PI / side as f64;
            worst = worst.max((f(x, y) - lr.eval(x, y)).norm());
        }
    }
    worst
}

/// Greedy cross approximation: repeatedly subtracts
/// `r(x, y*) r(x*, y) / r(x*, y*)` at the largest residual sample until
/// `max|r| <= tol max|f|` or `max_rank` terms are used.
pub fn gecp_lowrank(
    f: impl Fn(f64, f64) -> C64,
    tol: f64,
    max_rank: usize,
) -> Result<LowRankMedium> {
    if !(tol > 0.0) {
        return Err(Error::InvalidArgument(format!(
            "low-rank tolerance must be positive, got {tol}"
        )));
    }
    let f: &dyn Fn(f64, f64) -> C64 = &f;
    let mut side = INITIAL_GRID;
    loop {
        let res = eliminate(f, &Grid::new(side), tol, max_rank)?;
        let lr = match res {
            Ok(lr) => lr,
            Err(best) => return Err(Error::RankExceeded(Box::new(best))),
        };
        let fine = fine_residual(f, &lr, 2 * side - 1);
        let floor = (tol * lr.scale).max(lr.residual_estimate);
        if fine <= REFINE_FACTOR * floor || 2 * side - 1 > MAX_GRID {
            return Ok(lr);
        }
        side = 2 * side - 1;
    }
}
