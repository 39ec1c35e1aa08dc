use std::fs;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::Parser;
use qpscatter::formats::{read_config, Method, RunConfig};
use qpscatter::run::{exit_code, run, RunOutcome};
use qpscatter::{Error, Result};

/// Quasi-periodic Helmholtz scattering by a penetrable grating.
#[derive(Debug, Parser)]
#[command(name = "qpscatter", version, allow_negative_numbers = true)]
struct Cli {
    /// JSON run configuration; flags below override its fields.
    #[arg(long, value_name = "PATH")]
    config: Option<PathBuf>,
    /// collocation, tensor or both.
    #[arg(long, value_name = "NAME")]
    method: Option<Method>,
    /// Registry medium: homogeneous, eps1, eps2, eps3.
    #[arg(long, value_name = "NAME")]
    preset: Option<String>,
    /// Layered table or sampled grid file.
    #[arg(long, value_name = "PATH", conflicts_with = "preset")]
    medium_file: Option<PathBuf>,
    /// Output directory.
    #[arg(long, value_name = "DIR")]
    out: Option<PathBuf>,
    /// Adaptive resolution tolerance.
    #[arg(long)]
    tol: Option<f64>,
    /// Fourier modes; fixes the resolution together with --M.
    #[arg(long = "N", value_name = "INT")]
    n: Option<usize>,
    /// Chebyshev points or coefficients.
    #[arg(long = "M", value_name = "INT")]
    m: Option<usize>,
    /// GMRES iteration limit.
    #[arg(long, value_name = "INT")]
    maxit: Option<usize>,
    /// Preconditioner: average, none, or a layered registry medium.
    #[arg(long, value_name = "NAME")]
    precond: Option<String>,
    /// Same as --precond none.
    #[arg(long, conflicts_with = "precond")]
    no_precond: bool,
}

impl Cli {
    fn config(&self) -> Result<RunConfig> {
        let mut cfg = match &self.config {
            Some(path) => read_config(&fs::read_to_string(path)?)?,
            None => RunConfig::default(),
        };
        if let Some(m) = self.method {
            cfg.method = m;
        }
        if let Some(p) = &self.preset {
            cfg.medium = Some(p.clone());
            cfg.medium_file = None;
        }
        if let Some(p) = &self.medium_file {
            cfg.medium_file = Some(p.clone());
            cfg.medium = None;
        }
        if let Some(o) = &self.out {
            cfg.out = o.clone();
        }
        if let Some(t) = self.tol {
            cfg.tol = t;
        }
        if self.n.is_some() || self.m.is_some() {
            cfg.n = self.n.or(cfg.n);
            cfg.m = self.m.or(cfg.m);
        }
        if let Some(k) = self.maxit {
            cfg.maxit = k;
        }
        if let Some(p) = &self.precond {
            cfg.precond = p.clone();
        }
        if self.no_precond {
            cfg.precond = "none".into();
        }
        Ok(cfg)
    }
}

fn summary(cfg: &RunConfig, outcome: &RunOutcome) {
    let rep = &outcome.report;
    for (sol, diag) in outcome.solutions.iter().zip(&rep.solutions) {
        print!(
            "{:<12} N={:<5} M={:<5} path={:<8}",
            diag.method, diag.n, diag.m, sol.path
        );
        match diag.energy_defect {
            Some(e) => print!(" |E-1|={e:.3e}"),
            None => print!(" |E-1|=n/a"),
        }
        if let Some(k) = &diag.krylov {
            print!(
                " gmres_its={} residual={:.3e}",
                k.iterations, k.final_residual
            );
        }
        println!();
    }
    if let Some(d) = rep.cross_method_difference {
        println!("cross-method max |du| = {d:.3e}");
    }
    if let Some(step) = rep.trajectory.last().and_then(|s| s.self_difference) {
        println!("final self-difference = {step:.3e}");
    }
    println!("wrote {}", cfg.out.display());
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            // Usage errors share the validation exit code.
            return ExitCode::from(if e.use_stderr() { 3 } else { 0 });
        }
    };
    let cfg = match cli.config() {
        Ok(c) => c,
        Err(e) => {
            eprintln!("qpscatter: {e}");
            return ExitCode::from(exit_code(&Err(e)) as u8);
        }
    };
    let result = run(&cfg);
    match &result {
        Ok(outcome) => summary(&cfg, outcome),
        Err(Error::NotConverged(log)) => eprintln!(
            "qpscatter: GMRES stopped after {} iterations at residual {:.3e}; history in {}",
            log.iterations,
            log.final_residual(),
            cfg.out.join("gmres_history.csv").display()
        ),
        Err(e) => eprintln!("qpscatter: {e}"),
    }
    ExitCode::from(exit_code(&result) as u8)
}
