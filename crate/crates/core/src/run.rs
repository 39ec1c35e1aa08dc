//! End-to-end runs: medium setup, adaptive resolution, output files.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::Instant;

use serde::{Deserialize, Serialize};

use crate::cheb::values_to_coeffs;
use crate::collocation::{
    assemble_collocation, solve_collocation, solve_layered_collocation, DENSE_CAP,
};
use crate::diagnostics::{compare_methods, output_grid, DiagnosticsReport};
use crate::error::{Error, Result};
use crate::field::{Representation, SolutionField};
use crate::formats::{parse_medium_file, Method, RunConfig};
use crate::medium::{presets, MediumSpec};
use crate::problem::{validate_medium, ProblemSpec, QChoice};
use crate::tensor::{
    resolve_medium, solve_tensor_with, KrylovLog, PrecondChoice, ResolvedMedium, TensorOptions,
    TensorPath,
};
use crate::C64;

/// Resolution caps of the adaptive loop.
pub const MAX_N: usize = 1024;
pub const MAX_M: usize = 1024;
/// Smallest starting `M`.
pub const MIN_START_M: usize = 32;
/// Tolerances below this cannot be certified in double precision.
pub const MIN_TOL: f64 = 1e-15;
/// Side of the grid on which successive adaptive solutions are compared.
const COMPARE_NX: usize = 64;
const COMPARE_NY: usize = 33;

/// Which discretization produced a solution.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Solver {
    Collocation,
    Tensor,
}

impl Solver {
    pub fn name(self) -> &'static str {
        match self {
            Solver::Collocation => "collocation",
            Solver::Tensor => "tensor",
        }
    }
}

/// A solved discretization and how it was obtained.
#[derive(Clone, Debug)]
pub struct SolveOutput {
    pub solver: Solver,
    pub field: SolutionField,
    pub path: String,
    pub log: Option<KrylovLog>,
}

/// Everything a solve needs besides `(N, M)`.
pub struct SolveContext<'a> {
    pub problem: &'a ProblemSpec,
    pub medium: Option<&'a ResolvedMedium>,
    pub options: &'a TensorOptions,
}

impl SolveContext<'_> {
    pub fn solve(&self, solver: Solver, n: usize, m: usize) -> Result<SolveOutput> {
        match solver {
            Solver::Collocation => {
                let (field, path) = if self.problem.medium.is_layered() {
                    (solve_layered_collocation(self.problem, n, m)?, "layered")
                } else {
                    (
                        solve_collocation(assemble_collocation(self.problem, n, m)?)?,
                        "dense",
                    )
                };
                Ok(SolveOutput {
                    solver,
                    field,
                    path: path.into(),
                    log: None,
                })
            }
            Solver::Tensor => {
                let sol = solve_tensor_with(self.problem, self.medium, m, n, self.options)?;
                let path = match sol.path {
                    TensorPath::Layered => "layered",
                    TensorPath::Dense => "dense",
                    TensorPath::Gmres => "gmres",
                };
                Ok(SolveOutput {
                    solver,
                    field: sol.field,
                    path: path.into(),
                    log: sol.log,
                })
            }
        }
    }
}

/// Relative size of the trailing 10% of the Fourier modes (at both ends of
/// the window) and of the Chebyshev coefficients.
pub fn coefficient_tails(field: &SolutionField) -> (f64, f64) {
    let modes = field.mode_matrix();
    let cheb = match field.repr {
        Representation::Coefficients => modes,
        Representation::Values => {
            let mut out = modes.clone();
            for p in 0..modes.ncols() {
                let col: Vec<C64> = (0..modes.nrows()).map(|r| modes[(r, p)]).collect();
                for (r, c) in values_to_coeffs(&col).into_iter().enumerate() {
                    out[(r, p)] = c;
                }
            }
            out
        }
    };
    let (rows, cols) = (cheb.nrows(), cheb.ncols());
    let scale = (0..rows)
        .flat_map(|r| (0..cols).map(move |c| (r, c)))
        .fold(0.0f64, |a, (r, c)| a.max(cheb[(r, c)].norm()));
    if scale == 0.0 {
        return (0.0, 0.0);
    }
    let nt = cols.div_ceil(10);
    let mt = rows.div_ceil(10);
    let mut tx = 0.0f64;
    let mut ty = 0.0f64;
    for r in 0..rows {
        for c in 0..cols {
            let v = cheb[(r, c)].norm();
            if c < nt || c >= cols - nt {
                tx = tx.max(v);
            }
            if r >= rows - mt {
                ty = ty.max(v);
            }
        }
    }
    (tx / scale, ty / scale)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryStep {
    pub method: Solver,
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "M")]
    pub m: usize,
    pub tail_x: f64,
    pub tail_y: f64,
    pub self_difference: Option<f64>,
}

#[derive(Clone, Debug)]
pub struct AdaptiveResult {
    /// The chosen size: the coarser of the last pair of solutions.
    pub n: usize,
    pub m: usize,
    /// Size of the refinement that confirmed the choice.
    pub verified_by: (usize, usize),
    pub solution: SolveOutput,
    /// The confirming refinement itself.
    pub verification: SolveOutput,
    pub trajectory: Vec<TrajectoryStep>,
}

/// Smallest `N` whose window holds every propagating mode.
pub fn minimal_n(problem: &ProblemSpec) -> Result<usize> {
    let mut last = None;
    for n in 1..=MAX_N {
        match problem.modes(n) {
            Ok(_) => return Ok(n),
            Err(e @ Error::Truncation { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.unwrap_or_else(|| Error::Resolution("no admissible N".into())))
}

/// Starting `(N, M)` implied by the medium's resolution and the propagating
/// window.
pub fn initial_sizes(
    problem: &ProblemSpec,
    trig_degree: usize,
    cheb_degree: usize,
) -> Result<(usize, usize)> {
    let n_min = minimal_n(problem)?;
    let modes = problem.modes(n_min)?;
    let prop: Vec<i64> = modes
        .propagating_up
        .iter()
        .chain(&modes.propagating_down)
        .copied()
        .collect();
    let span = match (prop.iter().min(), prop.iter().max()) {
        (Some(lo), Some(hi)) => (hi - lo + 1) as usize,
        _ => 1,
    };
    let n = (2 * trig_degree + span).max(n_min);
    let m = (cheb_degree + 16).max(MIN_START_M);
    Ok((n, m))
}

/// [`initial_sizes`] for a medium as the solvers see it: the resolved
/// factors, or the layered profile resolved to `medium_tol`.
pub fn start_sizes(
    problem: &ProblemSpec,
    medium: Option<&ResolvedMedium>,
    medium_tol: f64,
) -> Result<(usize, usize)> {
    let (td, cd) = match medium {
        Some(r) => (r.trig_degree(), r.cheb_degree()),
        None => {
            let prof = problem.medium.layered_profile().ok_or_else(|| {
                Error::InvalidArgument("a non-layered medium must be resolved first".into())
            })?;
            (
                0,
                crate::cheb::cheb_resolve(|y| prof(y), medium_tol)?.degree(),
            )
        }
    };
    initial_sizes(problem, td, cd)
}

/// Refines until a solution with both coefficient tails below `tol` differs
/// from its refinement by at most `tol` (max-norm of `u` on a comparison
/// grid); that solution is returned. A failing tail doubles its own
/// dimension; otherwise both are doubled.
pub fn adaptive_loop(
    ctx: &SolveContext<'_>,
    solver: Solver,
    start: (usize, usize),
    tol: f64,
) -> Result<AdaptiveResult> {
    if !(tol >= MIN_TOL) {
        return Err(Error::Resolution(format!(
            "tolerance {tol:e} is below the rounding floor {MIN_TOL:e}"
        )));
    }
    let (xs, ys) = output_grid(COMPARE_NX, COMPARE_NY);
    let (mut n, mut m) = start;
    // Previous solution, its size, and whether its tails passed.
    let mut prev: Option<(SolveOutput, usize, usize, bool)> = None;
    let mut trajectory = Vec::new();
    loop {
        let sol = ctx.solve(solver, n, m)?;
        let (tx, ty) = coefficient_tails(&sol.field);
        let diff = prev
            .as_ref()
            .map(|p| compare_methods(&p.0.field, &sol.field, &xs, &ys));
        trajectory.push(TrajectoryStep {
            method: solver,
            n,
            m,
            tail_x: tx,
            tail_y: ty,
            self_difference: diff,
        });
        let (x_ok, y_ok) = (tx <= tol, ty <= tol);
        if let Some((p, pn, pm, p_ok)) = prev.take() {
            if p_ok && diff.is_some_and(|d| d <= tol) {
                return Ok(AdaptiveResult {
                    n: pn,
                    m: pm,
                    solution: p,
                    verified_by: (n, m),
                    verification: sol,
                    trajectory,
                });
            }
        }
        let (grow_n, grow_m) = if x_ok && y_ok {
            (true, true)
        } else {
            (!x_ok, !y_ok)
        };
        let (nn, nm) = (
            if grow_n { 2 * n } else { n },
            if grow_m { 2 * m } else { m },
        );
        if nn > MAX_N || nm > MAX_M {
            return Err(Error::Resolution(format!(
                "adaptive refinement reached the cap (N = {nn}, M = {nm}) with tails {tx:.2e}, {ty:.2e} and self-difference {}",
                diff.map_or("n/a".into(), |d| format!("{d:.2e}"))
            )));
        }
        prev = Some((sol, n, m, x_ok && y_ok));
        n = nn;
        m = nm;
    }
}

/// Builds the medium named or referenced by the configuration.
pub fn config_medium(cfg: &RunConfig) -> Result<MediumSpec> {
    match (&cfg.medium, &cfg.medium_file) {
        (Some(name), _) => presets::by_name(name)
            .ok_or_else(|| Error::InvalidArgument(format!("unknown medium {name:?}"))),
        (None, Some(path)) => parse_medium_file(&fs::read_to_string(path)?),
        (None, None) => Err(Error::InvalidArgument("no medium given".into())),
    }
}

pub fn config_problem(cfg: &RunConfig) -> Result<ProblemSpec> {
    let wave = cfg.wave()?;
    let medium = config_medium(cfg)?;
    validate_medium(&medium, &wave)?;
    let q = cfg.q.map_or(QChoice::Auto, QChoice::Fixed);
    Ok(ProblemSpec::new(wave, medium).with_q(q))
}

pub fn tensor_options(cfg: &RunConfig) -> TensorOptions {
    let precond = match cfg.precond.as_str() {
        "none" => PrecondChoice::None,
        "average" => PrecondChoice::XAverage,
        name => presets::by_name(name).map_or(PrecondChoice::XAverage, PrecondChoice::Layered),
    };
    TensorOptions {
        dense_cap: cfg.dense_cap,
        gmres_tol: cfg.gmres_tol,
        maxit: cfg.maxit,
        precond,
        lowrank_tol: cfg.lowrank_tol,
        max_rank: cfg.max_rank,
        ..TensorOptions::default()
    }
}

/// Contents of `diagnostics.json`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunReport {
    pub method: Method,
    pub medium: String,
    pub tol: f64,
    pub adaptive: bool,
    pub medium_rank: Option<usize>,
    pub medium_residual: Option<f64>,
    pub solutions: Vec<DiagnosticsReport>,
    pub trajectory: Vec<TrajectoryStep>,
    pub cross_method_difference: Option<f64>,
    /// Wall-clock seconds per stage.
    pub timings: BTreeMap<String, f64>,
}

#[derive(Clone, Debug)]
pub struct RunOutcome {
    pub report: RunReport,
    pub solutions: Vec<SolveOutput>,
}

/// `x,y,re,im` over the output grid, one line per point, `y` outermost.
pub fn field_csv(field: &SolutionField, nx: usize, ny: usize) -> String {
    let (xs, ys) = output_grid(nx, ny);
    let u = field.eval_grid(&xs, &ys, true);
    let mut out = String::from("x,y,re,im\n");
    for (i, y) in ys.iter().enumerate() {
        for (k, x) in xs.iter().enumerate() {
            let z = u[(i, k)];
            let _ = writeln!(out, "{x:.17e},{y:.17e},{:.17e},{:.17e}", z.re, z.im);
        }
    }
    out
}

pub fn history_csv(log: &KrylovLog) -> String {
    let mut out = String::from("iteration,relative_residual\n");
    for (k, r) in log.residuals.iter().enumerate() {
        let _ = writeln!(out, "{k},{r:.17e}");
    }
    out
}

fn medium_label(cfg: &RunConfig) -> String {
    match (&cfg.medium, &cfg.medium_file) {
        (Some(n), _) => n.clone(),
        (None, Some(p)) => p.display().to_string(),
        _ => String::new(),
    }
}

/// Runs the configuration and writes `diagnostics.json`, `field.csv`
/// (plus `field_collocation.csv` for `both`) and `gmres_history.csv` into
/// `cfg.out`. On non-convergence the GMRES history is still written.
pub fn run(cfg: &RunConfig) -> Result<RunOutcome> {
    cfg.validate()?;
    let out = cfg.out.as_path();
    let mut timings = BTreeMap::new();
    let t0 = Instant::now();
    let problem = config_problem(cfg)?;
    let options = tensor_options(cfg);
    let medium = if problem.medium.is_layered() {
        None
    } else {
        Some(resolve_medium(
            &problem.medium,
            options.medium_tol,
            options.lowrank_tol,
            options.max_rank,
        )?)
    };
    timings.insert("setup".into(), t0.elapsed().as_secs_f64());
    let ctx = SolveContext {
        problem: &problem,
        medium: medium.as_ref(),
        options: &options,
    };
    let solvers: Vec<Solver> = match cfg.method {
        Method::Collocation => vec![Solver::Collocation],
        Method::Tensor => vec![Solver::Tensor],
        Method::Both => vec![Solver::Tensor, Solver::Collocation],
    };

    let write_history = |log: &KrylovLog| -> Result<()> {
        fs::create_dir_all(out)?;
        fs::write(out.join("gmres_history.csv"), history_csv(log))?;
        Ok(())
    };
    let guarded = |r: Result<SolveOutput>| -> Result<SolveOutput> {
        if let Err(Error::NotConverged(log)) = &r {
            write_history(log)?;
        }
        r
    };

    let mut trajectory = Vec::new();
    let mut solutions: Vec<SolveOutput> = Vec::new();
    let mut chosen = match (cfg.n, cfg.m) {
        (Some(n), Some(m)) => Some((n, m)),
        _ => None,
    };
    for &solver in &solvers {
        let t = Instant::now();
        let sol = match chosen {
            Some((n, m)) => {
                // Dense collocation of a general medium is capped in size;
                // the cross-check drops Chebyshev points to fit.
                let m = if cfg.method == Method::Both
                    && solver == Solver::Collocation
                    && !problem.medium.is_layered()
                    && n * (m + 1) > DENSE_CAP
                {
                    (DENSE_CAP / n).saturating_sub(1).min(m)
                } else {
                    m
                };
                guarded(ctx.solve(solver, n, m))?
            }
            None => {
                let start = start_sizes(&problem, medium.as_ref(), options.medium_tol)?;
                let res = match adaptive_loop(&ctx, solver, start, cfg.tol) {
                    Err(Error::NotConverged(log)) => {
                        write_history(&log)?;
                        return Err(Error::NotConverged(log));
                    }
                    r => r?,
                };
                trajectory.extend(res.trajectory);
                // The second method of `both` reuses the first one's choice.
                chosen = Some((res.n, res.m));
                res.solution
            }
        };
        timings.insert(solver.name().into(), t.elapsed().as_secs_f64());
        solutions.push(sol);
    }

    let reports: Vec<DiagnosticsReport> = solutions
        .iter()
        .map(|s| DiagnosticsReport::new(s.solver.name(), &s.field, &problem, s.log.as_ref()))
        .collect();
    let (xs, ys) = output_grid(cfg.output_nx, cfg.output_ny);
    let cross = (solutions.len() == 2)
        .then(|| compare_methods(&solutions[0].field, &solutions[1].field, &xs, &ys));
    let report = RunReport {
        method: cfg.method,
        medium: medium_label(cfg),
        tol: cfg.tol,
        adaptive: cfg.n.is_none(),
        medium_rank: medium.as_ref().map(|m| m.rank()),
        medium_residual: medium.as_ref().map(|m| m.residual_estimate),
        solutions: reports,
        trajectory,
        cross_method_difference: cross,
        timings,
    };
    write_outputs(out, &report, &solutions, cfg)?;
    Ok(RunOutcome { report, solutions })
}

fn write_outputs(
    out: &Path,
    report: &RunReport,
    solutions: &[SolveOutput],
    cfg: &RunConfig,
) -> Result<()> {
    fs::create_dir_all(out)?;
    fs::write(
        out.join("diagnostics.json"),
        serde_json::to_string_pretty(report)? + "\n",
    )?;
    for (k, s) in solutions.iter().enumerate() {
        let name = if k == 0 {
            "field.csv".to_string()
        } else {
            format!("field_{}.csv", s.solver.name())
        };
        fs::write(
            out.join(name),
            field_csv(&s.field, cfg.output_nx, cfg.output_ny),
        )?;
        if let Some(log) = &s.log {
            fs::write(out.join("gmres_history.csv"), history_csv(log))?;
        }
    }
    Ok(())
}

/// Process exit status for a run result.
pub fn exit_code(result: &Result<RunOutcome>) -> i32 {
    match result {
        Ok(_) => 0,
        Err(Error::NotConverged(_)) => 2,
        Err(e) if e.is_validation() => 3,
        Err(_) => 1,
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::problem::IncidentWave;

    fn tmp(name: &str) -> std::path::PathBuf {
        let d = std::env::temp_dir().join(format!("qpscatter-run-{name}-{}", std::process::id()));
        let _ = fs::remove_dir_all(&d);
        d
    }

    #[test]
    fn initial_sizes_cover_the_window() {
        let p = ProblemSpec::new(IncidentWave::standard(), presets::homogeneous());
        assert_eq!(minimal_n(&p).unwrap(), 38);
        assert_eq!(initial_sizes(&p, 0, 0).unwrap(), (38, 32));
        assert_eq!(initial_sizes(&p, 20, 40).unwrap(), (60, 56));
    }

    #[test]
    fn homogeneous_adaptive_stops_at_first_refinement() {
        let p = ProblemSpec::new(IncidentWave::standard(), presets::homogeneous());
        let opts = TensorOptions::default();
        let ctx = SolveContext {
            problem: &p,
            medium: None,
            options: &opts,
        };
        let start = initial_sizes(&p, 0, 0).unwrap();
        let res = adaptive_loop(&ctx, Solver::Tensor, start, 1e-8).unwrap();
        assert_eq!(res.trajectory.len(), 2);
        assert_eq!((res.n, res.m), (38, 32));
        assert_eq!(res.verified_by, (76, 64));
        assert!(res.trajectory[1].self_difference.unwrap() <= 1e-8);
    }

    #[test]
    fn unreachable_tolerance_hits_the_cap() {
        let p = ProblemSpec::new(IncidentWave::standard(), presets::eps1());
        let opts = TensorOptions::default();
        let ctx = SolveContext {
            problem: &p,
            medium: None,
            options: &opts,
        };
        let err = adaptive_loop(&ctx, Solver::Tensor, (38, 32), 1e-30).unwrap_err();
        assert!(matches!(err, Error::Resolution(_)), "{err}");
        let err = adaptive_loop(&ctx, Solver::Tensor, (600, 600), 1e-12).unwrap_err();
        assert!(
            matches!(err, Error::Resolution(ref msg) if msg.contains("cap")),
            "{err}"
        );
    }

    #[test]
    fn tails_of_a_plane_wave() {
        let p = ProblemSpec::new(IncidentWave::standard(), presets::homogeneous());
        let opts = TensorOptions::default();
        let ctx = SolveContext {
            problem: &p,
            medium: None,
            options: &opts,
        };
        let (tx, ty) = coefficient_tails(&ctx.solve(Solver::Tensor, 38, 40).unwrap().field);
        assert_eq!(tx, 0.0);
        assert!(ty < 1e-12);
        let (tx, ty) = coefficient_tails(&ctx.solve(Solver::Collocation, 38, 40).unwrap().field);
        assert!(tx < 1e-12 && ty < 1e-12);
    }

    #[test]
    fn run_writes_outputs() {
        let out = tmp("outputs");
        let cfg = RunConfig {
            medium: Some("homogeneous".into()),
            method: Method::Both,
            n: Some(38),
            m: Some(32),
            out: out.clone(),
            output_nx: 16,
            output_ny: 8,
            ..RunConfig::default()
        };
        let res = run(&cfg);
        assert_eq!(exit_code(&res), 0);
        let rep = res.unwrap().report;
        assert!(rep.cross_method_difference.unwrap() < 1e-8);
        let text = fs::read_to_string(out.join("diagnostics.json")).unwrap();
        let back: RunReport = serde_json::from_str(&text).unwrap();
        assert_eq!(back, rep);
        let csv = fs::read_to_string(out.join("field.csv")).unwrap();
        assert_eq!(csv.lines().count(), 1 + 16 * 8);
        assert!(out.join("field_collocation.csv").exists());
        let _ = fs::remove_dir_all(&out);
    }

    #[test]
    fn exit_codes() {
        let cfg = RunConfig {
            medium: Some("eps1".into()),
            eps_plus: 2.0,
            out: tmp("mismatch"),
            ..RunConfig::default()
        };
        assert_eq!(exit_code(&run(&cfg)), 3);
        let cfg = RunConfig {
            medium: Some("eps3".into()),
            n: Some(40),
            m: Some(40),
            precond: "none".into(),
            maxit: 5,
            out: tmp("noconv"),
            ..RunConfig::default()
        };
        assert_eq!(exit_code(&run(&cfg)), 2);
        let hist = fs::read_to_string(cfg.out.join("gmres_history.csv")).unwrap();
        assert_eq!(hist.lines().count(), 1 + 6);
        let _ = fs::remove_dir_all(&cfg.out);
    }
}
