//! Run configuration and user-supplied medium files.
//!
//! Layered table: one `y eps` pair per line (whitespace or comma separated),
//! `#` starts a comment. The rows must include `y = -1` and `y = 1`.
//! Permittivities may be complex, written as `1.5+0.2i`.
//!
//! Sampled grid: a header `grid NX NY`, then `NY` rows of `NX` values. Row
//! `k` holds `y_k = cos(k pi / (NY - 1))`, column `i` holds `x_i = 2 pi i / NX`.

use std::path::PathBuf;
use std::str::FromStr;
use std::sync::Arc;

use faer::linalg::solvers::SolveLstsq;
use faer::Mat;
use serde::{Deserialize, Serialize};

use crate::cheb::{values_to_coeffs, ChebCoeffs, ChebGrid};
use crate::error::{Error, Result};
use crate::medium::{presets, MediumSpec, SampledGrid};
use crate::problem::IncidentWave;
use crate::C64;

/// Largest degree of a layered-table fit.
pub const MAX_FIT_DEGREE: usize = 64;
/// Largest accepted sampled grid (`NX * NY`).
pub const MAX_GRID_VALUES: usize = 1 << 20;
/// Largest accepted layered table.
pub const MAX_TABLE_ROWS: usize = 1 << 16;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Method {
    Collocation,
    Tensor,
    Both,
}

impl FromStr for Method {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "collocation" => Ok(Method::Collocation),
            "tensor" => Ok(Method::Tensor),
            "both" => Ok(Method::Both),
            _ => Err(Error::InvalidArgument(format!(
                "unknown method {s:?} (expected collocation, tensor or both)"
            ))),
        }
    }
}

/// Flat run configuration; every key is optional.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub method: Method,
    pub omega: f64,
    pub theta: f64,
    pub eps_plus: f64,
    pub eps_minus: f64,
    pub eps_minus_im: f64,
    pub mu: f64,
    /// Registry name: `homogeneous`, `eps1`, `eps2` or `eps3`.
    pub medium: Option<String>,
    /// Layered table or sampled grid file.
    pub medium_file: Option<PathBuf>,
    #[serde(rename = "N")]
    pub n: Option<usize>,
    #[serde(rename = "M")]
    pub m: Option<usize>,
    pub q: Option<usize>,
    /// Adaptive resolution tolerance.
    pub tol: f64,
    pub dense_cap: usize,
    pub gmres_tol: f64,
    pub maxit: usize,
    /// `average`, `none`, or a layered registry medium.
    pub precond: String,
    pub lowrank_tol: f64,
    pub max_rank: usize,
    pub out: PathBuf,
    pub output_nx: usize,
    pub output_ny: usize,
}

impl Default for RunConfig {
    fn default() -> Self {
        let w = IncidentWave::standard();
        Self {
            method: Method::Tensor,
            omega: w.omega,
            theta: w.theta,
            eps_plus: 1.0,
            eps_minus: 1.0,
            eps_minus_im: 0.0,
            mu: 1.0,
            medium: None,
            medium_file: None,
            n: None,
            m: None,
            q: None,
            tol: 1e-8,
            dense_cap: 1024,
            gmres_tol: 1e-8,
            maxit: 500,
            precond: "average".into(),
            lowrank_tol: 1e-13,
            max_rank: 32,
            out: PathBuf::from("qpscatter-out"),
            output_nx: 256,
            output_ny: 128,
        }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        let bad = |m: String| Err(Error::InvalidArgument(m));
        match (&self.medium, &self.medium_file) {
            (Some(_), Some(_)) => return bad("give either medium or medium_file, not both".into()),
            (None, None) => return bad("no medium given".into()),
            (Some(name), None) if presets::by_name(name).is_none() => {
                return bad(format!(
                    "unknown medium {name:?}; known: {}",
                    presets::NAMES.join(", ")
                ))
            }
            _ => {}
        }
        match (self.n, self.m) {
            (Some(0), _) | (_, Some(0)) => return bad("N and M must be positive".into()),
            (Some(_), None) | (None, Some(_)) => return bad("give both N and M, or neither".into()),
            _ => {}
        }
        if self.q == Some(0) {
            return bad("q must be positive".into());
        }
        for (name, v) in [
            ("tol", self.tol),
            ("gmres_tol", self.gmres_tol),
            ("lowrank_tol", self.lowrank_tol),
        ] {
            if !(v.is_finite() && v > 0.0) {
                return bad(format!("{name} must be positive, got {v}"));
            }
        }
        if self.maxit == 0 || self.max_rank == 0 {
            return bad("maxit and max_rank must be positive".into());
        }
        if self.output_nx == 0 || self.output_ny == 0 {
            return bad("output grid must be non-empty".into());
        }
        if self.precond != "average" && self.precond != "none" {
            match presets::by_name(&self.precond) {
                Some(m) if m.is_layered() => {}
                _ => {
                    return bad(format!(
                        "preconditioner {:?} is not a layered medium",
                        self.precond
                    ))
                }
            }
        }
        self.wave().map(|_| ())
    }

    pub fn wave(&self) -> Result<IncidentWave> {
        IncidentWave::new(
            self.omega,
            self.theta,
            C64::new(self.eps_plus, 0.0),
            C64::new(self.eps_minus, self.eps_minus_im),
            self.mu,
        )
    }
}

/// Reads a JSON run configuration without validating it, so that
/// command-line overrides can still be applied.
pub fn read_config(text: &str) -> Result<RunConfig> {
    Ok(serde_json::from_str(text)?)
}

/// Parses and validates a JSON run configuration.
pub fn parse_config(text: &str) -> Result<RunConfig> {
    let cfg = read_config(text)?;
    cfg.validate()?;
    Ok(cfg)
}

fn parse_value(tok: &str, line: usize) -> Result<C64> {
    let z = C64::from_str(tok).map_err(|_| Error::Parse {
        line,
        msg: format!("not a number: {tok:?}"),
    })?;
    if !z.re.is_finite() || !z.im.is_finite() {
        return Err(Error::Parse {
            line,
            msg: format!("non-finite value {tok:?}"),
        });
    }
    Ok(z)
}

/// Non-empty lines with comments removed, numbered from 1.
fn content_lines(text: &str) -> impl Iterator<Item = (usize, Vec<&str>)> {
    text.lines().enumerate().filter_map(|(i, l)| {
        let l = l.split('#').next().unwrap_or("");
        let toks: Vec<&str> = l
            .split(|c: char| c.is_whitespace() || c == ',')
            .filter(|t| !t.is_empty())
            .collect();
        (!toks.is_empty()).then_some((i + 1, toks))
    })
}

/// Raw `(y, eps)` rows of a layered table, sorted by `y`.
pub fn parse_layered_rows(text: &str) -> Result<Vec<(f64, C64)>> {
    let mut rows = Vec::new();
    for (line, toks) in content_lines(text) {
        if toks.len() != 2 {
            return Err(Error::Parse {
                line,
                msg: format!("expected `y eps`, found {} fields", toks.len()),
            });
        }
        let y = parse_value(toks[0], line)?;
        if y.im != 0.0 || !(-1.0..=1.0).contains(&y.re) {
            return Err(Error::Parse {
                line,
                msg: format!("y = {} outside [-1, 1]", toks[0]),
            });
        }
        rows.push((y.re, parse_value(toks[1], line)?));
        if rows.len() > MAX_TABLE_ROWS {
            return Err(Error::Parse {
                line,
                msg: format!("more than {MAX_TABLE_ROWS} rows"),
            });
        }
    }
    rows.sort_by(|a, b| a.0.total_cmp(&b.0));
    if rows.windows(2).any(|w| w[0].0 == w[1].0) {
        return Err(Error::Parse {
            line: 0,
            msg: "repeated y value".into(),
        });
    }
    if rows.first().map(|r| r.0) != Some(-1.0) || rows.last().map(|r| r.0) != Some(1.0) {
        return Err(Error::Parse {
            line: 0,
            msg: "table must contain the rows y = -1 and y = 1".into(),
        });
    }
    Ok(rows)
}

/// Least-squares Chebyshev fit of degree `min(n - 1, 2 sqrt(n), 64)` that
/// interpolates the end values at `y = -1` and `y = 1`.
pub fn fit_layered(rows: &[(f64, C64)]) -> Result<ChebCoeffs> {
    let n = rows.len();
    if n < 2 {
        return Err(Error::InvalidArgument(
            "layered table needs at least two rows".into(),
        ));
    }
    let degree = (n - 1)
        .min((2.0 * (n as f64).sqrt()) as usize)
        .min(MAX_FIT_DEGREE)
        .max(1);
    let (lo, hi) = (rows[0].1, rows[n - 1].1);
    let line = move |y: f64| lo * (1.0 - y) / 2.0 + hi * (1.0 + y) / 2.0;
    // p = line + (1 - y^2) s, s of degree `degree - 2`.
    let free = degree.saturating_sub(1);
    let s: Vec<C64> = if free == 0 {
        Vec::new()
    } else {
        let a = Mat::<C64>::from_fn(n, free, |i, k| {
            let y = rows[i].0;
            let t = (k as f64 * y.clamp(-1.0, 1.0).acos()).cos();
            C64::new((1.0 - y * y) * t, 0.0)
        });
        let b = Mat::<C64>::from_fn(n, 1, |i, _| rows[i].1 - line(rows[i].0));
        let sol = a.qr().solve_lstsq(&b);
        (0..free).map(|k| sol[(k, 0)]).collect()
    };
    let grid = ChebGrid::new(degree);
    let vals: Vec<C64> = grid
        .points()
        .into_iter()
        .map(|y| {
            let sy: C64 = s
                .iter()
                .enumerate()
                .map(|(k, c)| c * (k as f64 * y.acos()).cos())
                .sum();
            line(y) + sy * (1.0 - y * y)
        })
        .collect();
    let coeffs = values_to_coeffs(&vals);
    if coeffs
        .iter()
        .any(|z| !z.re.is_finite() || !z.im.is_finite())
    {
        return Err(Error::InvalidArgument("layered fit is not finite".into()));
    }
    Ok(ChebCoeffs::new(coeffs))
}

/// Parses a layered table into a layered medium.
pub fn parse_layered_table(text: &str) -> Result<MediumSpec> {
    let fit = Arc::new(fit_layered(&parse_layered_rows(text)?)?);
    Ok(MediumSpec::layered(move |y| fit.eval(y)))
}

/// Parses a sampled grid file.
pub fn parse_sampled_grid(text: &str) -> Result<SampledGrid> {
    let mut lines = content_lines(text);
    let (line, head) = lines.next().ok_or(Error::Parse {
        line: 0,
        msg: "empty grid file".into(),
    })?;
    let dims = |t: &str| {
        t.parse::<usize>().map_err(|_| Error::Parse {
            line,
            msg: format!("bad grid size {t:?}"),
        })
    };
    if head.len() != 3 || head[0] != "grid" {
        return Err(Error::Parse {
            line,
            msg: "expected header `grid NX NY`".into(),
        });
    }
    let (nx, ny) = (dims(head[1])?, dims(head[2])?);
    if nx == 0 || ny < 2 || nx.checked_mul(ny).is_none_or(|s| s > MAX_GRID_VALUES) {
        return Err(Error::Parse {
            line,
            msg: format!("grid {nx}x{ny} outside 1..={MAX_GRID_VALUES} values with NY >= 2"),
        });
    }
    let mut values = Vec::new();
    let mut rows = 0;
    for (line, toks) in lines {
        if rows == ny {
            return Err(Error::Parse {
                line,
                msg: format!("more than {ny} rows"),
            });
        }
        if toks.len() != nx {
            return Err(Error::Parse {
                line,
                msg: format!("expected {nx} values, found {}", toks.len()),
            });
        }
        for t in toks {
            values.push(parse_value(t, line)?);
        }
        rows += 1;
    }
    if rows != ny {
        return Err(Error::Parse {
            line: 0,
            msg: format!("expected {ny} rows, found {rows}"),
        });
    }
    SampledGrid::new(nx, ny, values)
}

/// Sniffs the file kind: sampled grids start with `grid`.
pub fn parse_medium_file(text: &str) -> Result<MediumSpec> {
    match content_lines(text).next() {
        Some((_, toks)) if toks[0] == "grid" => {
            Ok(MediumSpec::SampledGrid(parse_sampled_grid(text)?))
        }
        _ => parse_layered_table(text),
    }
}
