//! Permittivity descriptions `eps(x, y)` on `[0, 2pi] x [-1, 1]`.

use std::f64::consts::PI;
use std::fmt;
use std::sync::Arc;

use crate::cheb;
use crate::error::{Error, Result};
use crate::C64;

pub type Profile = Arc<dyn Fn(f64) -> C64 + Send + Sync>;
pub type Surface = Arc<dyn Fn(f64, f64) -> C64 + Send + Sync>;

/// One separable term `phi(x) psi(y)`; `phi` must be 2pi-periodic.
#[derive(Clone)]
pub struct SeparableTerm {
    pub phi: Profile,
    pub psi: Profile,
}

impl SeparableTerm {
    pub fn new(
        phi: impl Fn(f64) -> C64 + Send + Sync + 'static,
        psi: impl Fn(f64) -> C64 + Send + Sync + 'static,
    ) -> Self {
        Self {
            phi: Arc::new(phi),
            psi: Arc::new(psi),
        }
    }
}

#[derive(Clone)]
pub enum MediumSpec {
    Homogeneous(C64),
    /// `eps(x, y) = psi(y)`.
    Layered(Profile),
    SeparableSum(Vec<SeparableTerm>),
    SampledGrid(SampledGrid),
    /// Arbitrary bivariate function; compressed to a separable sum when the
    /// coefficient-space solver needs it.
    Bivariate(Surface),
}

impl fmt::Debug for MediumSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            MediumSpec::Homogeneous(v) => write!(f, "Homogeneous({v})"),
            MediumSpec::Layered(_) => write!(f, "Layered(..)"),
            MediumSpec::SeparableSum(t) => write!(f, "SeparableSum({} terms)", t.len()),
            MediumSpec::SampledGrid(g) => write!(f, "SampledGrid({}x{})", g.nx, g.ny),
            MediumSpec::Bivariate(_) => write!(f, "Bivariate(..)"),
        }
    }
}

impl MediumSpec {
    pub fn layered(psi: impl Fn(f64) -> C64 + Send + Sync + 'static) -> Self {
        MediumSpec::Layered(Arc::new(psi))
    }

    pub fn bivariate(f: impl Fn(f64, f64) -> C64 + Send + Sync + 'static) -> Self {
        MediumSpec::Bivariate(Arc::new(f))
    }

    pub fn eval(&self, x: f64, y: f64) -> C64 {
        match self {
            MediumSpec::Homogeneous(v) => *v,
            MediumSpec::Layered(psi) => psi(y),
            MediumSpec::SeparableSum(terms) => terms.iter().map(|t| (t.phi)(x) * (t.psi)(y)).sum(),
            MediumSpec::SampledGrid(g) => g.eval(x, y),
            MediumSpec::Bivariate(f) => f(x, y),
        }
    }

    /// True when `eps` does not depend on `x`.
    pub fn is_layered(&self) -> bool {
        matches!(self, MediumSpec::Homogeneous(_) | MediumSpec::Layered(_))
    }

    /// The `y`-profile of a layered medium.
    pub fn layered_profile(&self) -> Option<Profile> {
        match self {
            MediumSpec::Homogeneous(v) => {
                let v = *v;
                Some(Arc::new(move |_| v))
            }
            MediumSpec::Layered(p) => Some(p.clone()),
            _ => None,
        }
    }

    /// Whether every sample on a coarse grid is real.
    pub fn is_real_valued(&self) -> bool {
        for i in 0..32 {
            let x = 2.0 * PI * i as f64 / 32.0;
            for k in 0..=32 {
                let y = (PI * k as f64 / 32.0).cos();
                let e = self.eval(x, y);
                if e.im.abs() > 1e-14 * e.norm().max(1.0) {
                    return false;
                }
            }
        }
        true
    }
}

/// Permittivity sampled on a tensor grid: `x_i = 2 pi i / nx` (`i < nx`) by
/// Chebyshev points `y_k = cos(k pi / (ny - 1))`; interpolated trigonometrically
/// in `x` and barycentrically in `y`.
#[derive(Clone, Debug)]
pub struct SampledGrid {
    pub nx: usize,
    pub ny: usize,
    /// Row-major: `values[k * nx + i] = eps(x_i, y_k)`.
    pub values: Vec<C64>,
    // Trigonometric coefficients of every row, modes -(nx-1)/2 ..= nx/2.
    row_coeffs: Vec<Vec<C64>>,
}

impl SampledGrid {
    pub fn new(nx: usize, ny: usize, values: Vec<C64>) -> Result<Self> {
        if nx < 1 || ny < 2 {
            return Err(Error::InvalidArgument(format!(
                "sampled grid needs nx >= 1 and ny >= 2, got {nx}x{ny}"
            )));
        }
        if values.len() != nx * ny {
            return Err(Error::InvalidArgument(format!(
                "sampled grid {nx}x{ny} needs {} values, got {}",
                nx * ny,
                values.len()
            )));
        }
        if values
            .iter()
            .any(|v| !v.re.is_finite() || !v.im.is_finite())
        {
            return Err(Error::InvalidArgument(
                "sampled grid has non-finite values".into(),
            ));
        }
        let row_coeffs = values
            .chunks(nx)
            .map(|row| {
                crate::fourier::dft(row)
                    .into_iter()
                    .map(|c| c / nx as f64)
                    .collect()
            })
            .collect();
        Ok(Self {
            nx,
            ny,
            values,
            row_coeffs,
        })
    }

    fn freq(nx: usize, m: usize) -> i64 {
        let m = m as i64;
        let nx = nx as i64;
        if m <= nx / 2 {
            m
        } else {
            m - nx
        }
    }

    fn row_value(&self, k: usize, x: f64) -> C64 {
        let nx = self.nx;
        self.row_coeffs[k]
            .iter()
            .enumerate()
            .map(|(m, c)| {
                let f = Self::freq(nx, m);
                if nx % 2 == 0 && f == nx as i64 / 2 {
                    // Split Nyquist mode so real data interpolates to real values.
                    c * (f as f64 * x).cos()
                } else {
                    c * C64::from_polar(1.0, f as f64 * x)
                }
            })
            .sum()
    }

    pub fn eval(&self, x: f64, y: f64) -> C64 {
        let vals: Vec<C64> = (0..self.ny).map(|k| self.row_value(k, x)).collect();
        cheb::barycentric_eval(&vals, y.clamp(-1.0, 1.0))
    }
}

/// Built-in media used by the experiment presets.
pub mod presets {
    use super::*;

    /// `exp(3/(y^2-1) + 4)` inside `|y| < 1`, continuously extended by 0.
    pub fn bump(y: f64) -> f64 {
        if y.abs() >= 1.0 {
            0.0
        } else {
            (3.0 / (y * y - 1.0) + 4.0).exp()
        }
    }

    /// `cos(pi sin(x/2))`; 2pi-periodic.
    pub fn ripple(x: f64) -> f64 {
        (PI * (x / 2.0).sin()).cos()
    }

    /// `1 + exp(3/(y^2-1) + 4)`.
    pub fn eps1_profile(y: f64) -> f64 {
        1.0 + bump(y)
    }

    pub fn eps2_value(x: f64, y: f64) -> f64 {
        if y.abs() >= 1.0 {
            1.0
        } else {
            1.0 + (3.0 / (y * y - 1.0) + 4.0 - ripple(x)).exp()
        }
    }

    pub fn eps3_value(x: f64, y: f64) -> f64 {
        if y.abs() >= 1.0 {
            1.0
        } else {
            1.0 + (3.0 / (y * y - 1.0) + 4.0 - y * ripple(x)).exp()
        }
    }

    pub fn homogeneous() -> MediumSpec {
        MediumSpec::Homogeneous(C64::new(1.0, 0.0))
    }

    /// Layered bump.
    pub fn eps1() -> MediumSpec {
        MediumSpec::layered(|y| C64::new(eps1_profile(y), 0.0))
    }

    /// Rank-two medium `1 + exp(-cos(pi sin(x/2))) bump(y)`.
    pub fn eps2() -> MediumSpec {
        MediumSpec::SeparableSum(vec![
            SeparableTerm::new(|_| C64::new(1.0, 0.0), |_| C64::new(1.0, 0.0)),
            SeparableTerm::new(
                |x| C64::new((-ripple(x)).exp(), 0.0),
                |y| C64::new(bump(y), 0.0),
            ),
        ])
    }

    /// Non-separable medium `1 + exp(3/(y^2-1) + 4 - y cos(pi sin(x/2)))`.
    pub fn eps3() -> MediumSpec {
        MediumSpec::bivariate(|x, y| C64::new(eps3_value(x, y), 0.0))
    }

    pub fn by_name(name: &str) -> Option<MediumSpec> {
        match name {
            "homogeneous" => Some(homogeneous()),
            "eps1" => Some(eps1()),
            "eps2" => Some(eps2()),
            "eps3" => Some(eps3()),
            _ => None,
        }
    }

    pub const NAMES: [&str; 4] = ["homogeneous", "eps1", "eps2", "eps3"];
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn bump_limits_at_boundary() {
        assert_eq!(presets::bump(1.0), 0.0);
        assert_eq!(presets::bump(-1.0), 0.0);
        assert!((presets::bump(0.0) - 1f64.exp()).abs() < 1e-14);
        assert_eq!(presets::eps1_profile(1.0), 1.0);
    }

    #[test]
    fn eps2_separable_form_matches_closed_form() {
        let m = presets::eps2();
        for &(x, y) in &[(0.3, 0.1), (2.0, -0.7), (5.9, 0.95)] {
            let direct = presets::eps2_value(x, y);
            assert!((m.eval(x, y).re - direct).abs() < 1e-13 * direct);
        }
    }

    #[test]
    fn sampled_grid_interpolates_smooth_data() {
        let nx = 24;
        let ny = 25;
        let f = |x: f64, y: f64| C64::new(1.0 + 0.3 * (2.0 * x).cos() * y * y, 0.1 * x.sin());
        let mut values = Vec::new();
        for k in 0..ny {
            let y = (PI * k as f64 / (ny - 1) as f64).cos();
            for i in 0..nx {
                values.push(f(2.0 * PI * i as f64 / nx as f64, y));
            }
        }
        let g = SampledGrid::new(nx, ny, values).unwrap();
        for &(x, y) in &[(0.1, 0.2), (3.3, -0.9), (6.0, 0.77)] {
            assert!((g.eval(x, y) - f(x, y)).norm() < 1e-12);
        }
    }

    #[test]
    fn sampled_grid_rejects_bad_shapes() {
        assert!(SampledGrid::new(2, 2, vec![C64::new(1.0, 0.0); 3]).is_err());
        assert!(SampledGrid::new(2, 1, vec![C64::new(1.0, 0.0); 2]).is_err());
        assert!(SampledGrid::new(1, 2, vec![C64::new(f64::NAN, 0.0); 2]).is_err());
    }
}
