//! Rayleigh coefficients, flux balance and field comparison.

use std::collections::BTreeMap;

use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::field::SolutionField;
use crate::problem::{ModeConstants, ProblemSpec};
use crate::tensor::KrylovLog;
use crate::C64;

/// Modes with `Im beta_j > UNDERFLOW_GUARD` (or `Im gamma_j`) are reported as 0.
pub const UNDERFLOW_GUARD: f64 = 30.0;

/// Reflection and transmission coefficients over the mode window.
#[derive(Clone, Debug, PartialEq)]
pub struct RayleighCoefficients {
    pub modes: Vec<i64>,
    pub r: Vec<C64>,
    pub t: Vec<C64>,
    /// Modes whose `r_j` or `t_j` was zeroed by the underflow guard.
    pub guarded: Vec<i64>,
}

impl RayleighCoefficients {
    pub fn r(&self, j: i64) -> Option<C64> {
        self.index(j).map(|i| self.r[i])
    }

    pub fn t(&self, j: i64) -> Option<C64> {
        self.index(j).map(|i| self.t[i])
    }

    fn index(&self, j: i64) -> Option<usize> {
        self.modes.iter().position(|&m| m == j)
    }
}

/// `r_j = (v_j(1) - delta_{j0} e^{-i beta0}) e^{-i beta_j}` and
/// `t_j = v_j(-1) e^{-i gamma_j}` from the traces of `v`.
pub fn rayleigh_coefficients(solution: &SolutionField) -> RayleighCoefficients {
    let modes = &solution.modes;
    let (top, bottom) = solution.traces();
    let mut out = RayleighCoefficients {
        modes: modes.modes().collect(),
        r: Vec::with_capacity(modes.n),
        t: Vec::with_capacity(modes.n),
        guarded: Vec::new(),
    };
    let incident = C64::from_polar(1.0, -modes.beta0);
    for p in 0..modes.n {
        let j = modes.mode_at(p);
        let (b, g) = (modes.betas[p], modes.gammas[p]);
        let mut guarded = false;
        let r = if b.im > UNDERFLOW_GUARD {
            guarded = true;
            C64::new(0.0, 0.0)
        } else {
            let v = if j == 0 { top[p] - incident } else { top[p] };
            v * (-C64::i() * b).exp()
        };
        let t = if g.im > UNDERFLOW_GUARD {
            guarded = true;
            C64::new(0.0, 0.0)
        } else {
            bottom[p] * (-C64::i() * g).exp()
        };
        if guarded {
            out.guarded.push(j);
        }
        out.r.push(r);
        out.t.push(t);
    }
    out
}

/// Propagating flux normalized by the incident flux.
pub fn energy_balance(
    coeffs: &RayleighCoefficients,
    modes: &ModeConstants,
    problem: &ProblemSpec,
) -> Result<f64> {
    if !problem.medium.is_real_valued() || problem.wave.eps_minus.im != 0.0 {
        return Err(Error::NotApplicable(
            "flux balance needs a real-valued medium".into(),
        ));
    }
    let mut e = 0.0;
    for &j in &modes.propagating_up {
        if let Some(r) = coeffs.r(j) {
            e += modes.beta(j).re * r.norm_sqr();
        }
    }
    for &j in &modes.propagating_down {
        if let Some(t) = coeffs.t(j) {
            e += modes.gamma(j).re * t.norm_sqr();
        }
    }
    Ok(e / modes.beta0)
}

/// `v` (or `u` when `reconstruct_u`) on the grid `ys x xs`, one row per `y`.
pub fn evaluate_field(
    solution: &SolutionField,
    xs: &[f64],
    ys: &[f64],
    reconstruct_u: bool,
) -> Mat<C64> {
    solution.eval_grid(xs, ys, reconstruct_u)
}

/// Max-norm difference of the reconstructed `u` over `ys x xs`.
pub fn compare_methods(a: &SolutionField, b: &SolutionField, xs: &[f64], ys: &[f64]) -> f64 {
    let fa = a.eval_grid(xs, ys, true);
    let fb = b.eval_grid(xs, ys, true);
    let mut worst = 0.0f64;
    for i in 0..fa.nrows() {
        for k in 0..fa.ncols() {
            worst = worst.max((fa[(i, k)] - fb[(i, k)]).norm());
        }
    }
    worst
}

/// `count` equispaced points on `[a, b]`, both ends included.
pub fn linspace(a: f64, b: f64, count: usize) -> Vec<f64> {
    match count {
        0 => Vec::new(),
        1 => vec![a],
        _ => (0..count)
            .map(|i| a + (b - a) * i as f64 / (count - 1) as f64)
            .collect(),
    }
}

/// The default output grid: `nx` points on `[0, 2pi]` by `ny` on `[-1, 1]`.
pub fn output_grid(nx: usize, ny: usize) -> (Vec<f64>, Vec<f64>) {
    (
        linspace(0.0, 2.0 * std::f64::consts::PI, nx),
        linspace(-1.0, 1.0, ny),
    )
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Complex {
    pub re: f64,
    pub im: f64,
}

impl From<C64> for Complex {
    fn from(z: C64) -> Self {
        Self { re: z.re, im: z.im }
    }
}

impl From<Complex> for C64 {
    fn from(z: Complex) -> Self {
        C64::new(z.re, z.im)
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct KrylovSummary {
    pub iterations: usize,
    pub final_residual: f64,
    pub converged: bool,
}

impl From<&KrylovLog> for KrylovSummary {
    fn from(log: &KrylovLog) -> Self {
        Self {
            iterations: log.iterations,
            final_residual: log.final_residual(),
            converged: log.converged,
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct DiagnosticsReport {
    pub method: String,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub q: usize,
    pub r: BTreeMap<i64, Complex>,
    pub t: BTreeMap<i64, Complex>,
    /// `|E - 1|`; absent when the flux balance does not apply.
    pub energy_defect: Option<f64>,
    pub propagating_up: Vec<i64>,
    pub propagating_down: Vec<i64>,
    pub underflow_guarded: Vec<i64>,
    pub krylov: Option<KrylovSummary>,
}

impl DiagnosticsReport {
    pub fn new(
        method: &str,
        solution: &SolutionField,
        problem: &ProblemSpec,
        krylov: Option<&KrylovLog>,
    ) -> Self {
        let coeffs = rayleigh_coefficients(solution);
        let modes = &solution.modes;
        let energy_defect = energy_balance(&coeffs, modes, problem)
            .ok()
            .map(|e| (e - 1.0).abs());
        let inside = |v: &[i64]| v.iter().copied().filter(|&j| modes.contains(j)).collect();
        Self {
            method: method.to_string(),
            n: modes.n,
            m: solution.m(),
            q: modes.q,
            r: coeffs
                .modes
                .iter()
                .zip(&coeffs.r)
                .map(|(&j, &z)| (j, z.into()))
                .collect(),
            t: coeffs
                .modes
                .iter()
                .zip(&coeffs.t)
                .map(|(&j, &z)| (j, z.into()))
                .collect(),
            energy_defect,
            propagating_up: inside(&modes.propagating_up),
            propagating_down: inside(&modes.propagating_down),
            underflow_guarded: coeffs.guarded,
            krylov: krylov.map(KrylovSummary::from),
        }
    }
}
