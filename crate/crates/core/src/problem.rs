//! Scattering problem definition: incident wave, mode constants and medium
//! admissibility.

use std::f64::consts::PI;

use crate::error::{Error, Result};
use crate::medium::MediumSpec;
use crate::C64;

/// Relative guard below which `|beta_j|` or `|gamma_j|` counts as resonant.
pub const RESONANCE_GUARD: f64 = 1e-10;

/// Tolerance for the exterior-matching check on the medium.
pub const MEDIUM_MATCH_TOL: f64 = 1e-10;

/// Plane wave `exp(i alpha0 x - i beta0 y)` incident from above.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IncidentWave {
    pub omega: f64,
    pub theta: f64,
    pub eps_plus: C64,
    pub eps_minus: C64,
    pub mu: f64,
}

impl IncidentWave {
    pub fn new(omega: f64, theta: f64, eps_plus: C64, eps_minus: C64, mu: f64) -> Result<Self> {
        let wave = Self {
            omega,
            theta,
            eps_plus,
            eps_minus,
            mu,
        };
        wave.validate()?;
        Ok(wave)
    }

    /// `theta = 3pi/7`, `omega = 10`, unit permittivities and permeability.
    pub fn standard() -> Self {
        Self {
            omega: 10.0,
            theta: 3.0 * PI / 7.0,
            eps_plus: C64::new(1.0, 0.0),
            eps_minus: C64::new(1.0, 0.0),
            mu: 1.0,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.omega > 0.0) || !self.omega.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "omega must be positive, got {}",
                self.omega
            )));
        }
        if !(self.theta.abs() < PI / 2.0) {
            return Err(Error::InvalidArgument(format!(
                "theta must lie in (-pi/2, pi/2), got {}",
                self.theta
            )));
        }
        if !(self.mu > 0.0) || !self.mu.is_finite() {
            return Err(Error::InvalidArgument(format!(
                "mu must be positive, got {}",
                self.mu
            )));
        }
        // The incident plane wave must propagate in the upper half-space.
        if self.eps_plus.im != 0.0 || !(self.eps_plus.re > 0.0) {
            return Err(Error::InvalidArgument(format!(
                "eps_plus must be real and positive, got {}",
                self.eps_plus
            )));
        }
        if !self.eps_minus.re.is_finite()
            || !self.eps_minus.im.is_finite()
            || self.eps_minus == C64::new(0.0, 0.0)
        {
            return Err(Error::InvalidArgument(format!(
                "eps_minus must be finite and nonzero, got {}",
                self.eps_minus
            )));
        }
        Ok(())
    }

    /// `omega^2 eps_plus mu`.
    pub fn k2_plus(&self) -> C64 {
        self.eps_plus * (self.omega * self.omega * self.mu)
    }

    /// `omega^2 eps_minus mu`.
    pub fn k2_minus(&self) -> C64 {
        self.eps_minus * (self.omega * self.omega * self.mu)
    }

    fn k_plus(&self) -> f64 {
        self.omega * (self.eps_plus.re * self.mu).sqrt()
    }

    pub fn alpha0(&self) -> f64 {
        self.k_plus() * self.theta.sin()
    }

    pub fn beta0(&self) -> f64 {
        self.k_plus() * self.theta.cos()
    }
}

/// Square root on the branch `Im >= 0`, with `Re > 0` when the root is real.
pub fn outgoing_sqrt(z: C64) -> C64 {
    let mut s = z.sqrt();
    if s.im < 0.0 || (s.im == 0.0 && s.re < 0.0) {
        s = -s;
    }
    if s.im == 0.0 {
        s.im = 0.0;
    }
    s
}

/// How the offset `q` of the mode window `j = 1-q .. N-q` is chosen.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum QChoice {
    /// `q = floor(N/2) + 1`, centring the window on `j = 0`.
    Auto,
    Fixed(usize),
}

/// Whether propagating modes outside the truncation window are an error.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Default)]
pub enum TruncationPolicy {
    #[default]
    Strict,
    /// Accept windows that cut off propagating modes; used when the incident
    /// field is known to excite only modes inside the window.
    Permissive,
}

/// Quasi-periodic mode data for a truncation window.
#[derive(Clone, Debug, PartialEq)]
pub struct ModeConstants {
    pub n: usize,
    pub q: usize,
    pub omega: f64,
    pub mu: f64,
    pub alpha0: f64,
    pub beta0: f64,
    /// `alpha_j` for `j = 1-q .. N-q`.
    pub alphas: Vec<f64>,
    pub betas: Vec<C64>,
    pub gammas: Vec<C64>,
    /// Modes with real positive `beta_j` (over all integers, sorted).
    pub propagating_up: Vec<i64>,
    /// Modes with real positive `gamma_j`.
    pub propagating_down: Vec<i64>,
}

impl ModeConstants {
    pub fn j_min(&self) -> i64 {
        1 - self.q as i64
    }

    pub fn j_max(&self) -> i64 {
        self.n as i64 - self.q as i64
    }

    pub fn modes(&self) -> impl Iterator<Item = i64> + '_ {
        self.j_min()..=self.j_max()
    }

    pub fn contains(&self, j: i64) -> bool {
        (self.j_min()..=self.j_max()).contains(&j)
    }

    /// Zero-based storage position of mode `j`.
    pub fn position(&self, j: i64) -> usize {
        debug_assert!(self.contains(j));
        (j + self.q as i64 - 1) as usize
    }

    /// Mode index stored at zero-based position `p`.
    pub fn mode_at(&self, p: usize) -> i64 {
        p as i64 + 1 - self.q as i64
    }

    pub fn alpha(&self, j: i64) -> f64 {
        self.alphas[self.position(j)]
    }

    pub fn beta(&self, j: i64) -> C64 {
        self.betas[self.position(j)]
    }

    pub fn gamma(&self, j: i64) -> C64 {
        self.gammas[self.position(j)]
    }

    /// Diagonal `i beta_j` over the window.
    pub fn lambda_beta(&self) -> Vec<C64> {
        self.betas.iter().map(|b| C64::i() * b).collect()
    }

    /// Diagonal `i gamma_j` over the window.
    pub fn lambda_gamma(&self) -> Vec<C64> {
        self.gammas.iter().map(|g| C64::i() * g).collect()
    }
}

fn is_real_positive(z: C64) -> bool {
    z.im == 0.0 && z.re > 0.0
}

/// Mode constants with the strict truncation check.
pub fn mode_constants(wave: &IncidentWave, n: usize, q: QChoice) -> Result<ModeConstants> {
    mode_constants_with(wave, n, q, TruncationPolicy::Strict)
}

pub fn mode_constants_with(
    wave: &IncidentWave,
    n: usize,
    q: QChoice,
    policy: TruncationPolicy,
) -> Result<ModeConstants> {
    wave.validate()?;
    if n == 0 {
        return Err(Error::InvalidArgument("N must be at least 1".into()));
    }
    let q = match q {
        QChoice::Auto => n / 2 + 1,
        QChoice::Fixed(q) => {
            if q < 1 || q > n {
                return Err(Error::InvalidArgument(format!(
                    "q must satisfy 1 <= q <= N = {n}, got {q}"
                )));
            }
            q
        }
    };
    let alpha0 = wave.alpha0();
    let beta0 = wave.beta0();
    let k2p = wave.k2_plus();
    let k2m = wave.k2_minus();
    let guard = RESONANCE_GUARD * wave.omega;

    let root = |k2: C64, j: i64| outgoing_sqrt(k2 - C64::new((alpha0 + j as f64).powi(2), 0.0));
    let check = |j: i64, z: C64, which: &'static str| -> Result<()> {
        if z.norm() < guard {
            Err(Error::Resonance {
                mode: j,
                which,
                magnitude: z.norm(),
            })
        } else {
            Ok(())
        }
    };

    let j_lo = 1 - q as i64;
    let j_hi = n as i64 - q as i64;
    let mut alphas = Vec::with_capacity(n);
    let mut betas = Vec::with_capacity(n);
    let mut gammas = Vec::with_capacity(n);
    for j in j_lo..=j_hi {
        let b = root(k2p, j);
        let g = root(k2m, j);
        check(j, b, "beta")?;
        check(j, g, "gamma")?;
        alphas.push(alpha0 + j as f64);
        betas.push(b);
        gammas.push(g);
    }

    // Propagating modes satisfy |alpha_j| < |k|; scan a range that covers them.
    let kmax = k2p.norm().sqrt().max(k2m.norm().sqrt());
    let scan_lo = (-kmax - alpha0).floor() as i64 - 1;
    let scan_hi = (kmax - alpha0).ceil() as i64 + 1;
    let mut propagating_up = Vec::new();
    let mut propagating_down = Vec::new();
    for j in scan_lo..=scan_hi {
        let b = root(k2p, j);
        let g = root(k2m, j);
        check(j, b, "beta")?;
        check(j, g, "gamma")?;
        if is_real_positive(b) {
            propagating_up.push(j);
        }
        if is_real_positive(g) {
            propagating_down.push(j);
        }
    }

    if policy == TruncationPolicy::Strict {
        for &j in propagating_up.iter().chain(&propagating_down) {
            if j < j_lo || j > j_hi {
                return Err(Error::Truncation {
                    mode: j,
                    lo: j_lo,
                    hi: j_hi,
                });
            }
        }
    }

    Ok(ModeConstants {
        n,
        q,
        omega: wave.omega,
        mu: wave.mu,
        alpha0,
        beta0,
        alphas,
        betas,
        gammas,
        propagating_up,
        propagating_down,
    })
}

/// The full scattering configuration.
#[derive(Clone, Debug)]
pub struct ProblemSpec {
    pub wave: IncidentWave,
    pub medium: MediumSpec,
    pub truncation: TruncationPolicy,
    pub q: QChoice,
}

impl ProblemSpec {
    pub fn new(wave: IncidentWave, medium: MediumSpec) -> Self {
        Self {
            wave,
            medium,
            truncation: TruncationPolicy::Strict,
            q: QChoice::Auto,
        }
    }

    pub fn with_q(mut self, q: QChoice) -> Self {
        self.q = q;
        self
    }

    pub fn with_truncation(mut self, policy: TruncationPolicy) -> Self {
        self.truncation = policy;
        self
    }

    pub fn modes(&self, n: usize) -> Result<ModeConstants> {
        mode_constants_with(&self.wave, n, self.q, self.truncation)
    }

    /// `omega^2 mu`.
    pub fn omega2_mu(&self) -> f64 {
        self.wave.omega * self.wave.omega * self.wave.mu
    }
}

const DELTA_CANDIDATES: usize = 31;
const BOUNDARY_GRID_X: usize = 64;
const BOUNDARY_GRID_Y: usize = 16;

/// Largest `delta` (from `1, 1/2, 1/4, ...`) for which the medium equals the
/// exterior permittivities in the boundary layers of width `delta/2`.
pub fn validate_medium(medium: &MediumSpec, wave: &IncidentWave) -> Result<f64> {
    let close = |z: C64, target: C64| (z - target).norm() <= MEDIUM_MATCH_TOL;
    for i in 0..BOUNDARY_GRID_X {
        let x = 2.0 * PI * i as f64 / BOUNDARY_GRID_X as f64;
        let top = medium.eval(x, 1.0);
        let bottom = medium.eval(x, -1.0);
        if !top.re.is_finite() || !top.im.is_finite() || !close(top, wave.eps_plus) {
            return Err(Error::MediumMismatch(format!(
                "eps({x:.6}, 1) = {top} but eps_plus = {}",
                wave.eps_plus
            )));
        }
        if !bottom.re.is_finite() || !bottom.im.is_finite() || !close(bottom, wave.eps_minus) {
            return Err(Error::MediumMismatch(format!(
                "eps({x:.6}, -1) = {bottom} but eps_minus = {}",
                wave.eps_minus
            )));
        }
    }
    let layer_matches = |delta: f64| -> bool {
        let half = delta / 2.0;
        for i in 0..BOUNDARY_GRID_X {
            let x = 2.0 * PI * i as f64 / BOUNDARY_GRID_X as f64;
            for k in 0..BOUNDARY_GRID_Y {
                let s = half * k as f64 / (BOUNDARY_GRID_Y - 1) as f64;
                if !close(medium.eval(x, 1.0 - s), wave.eps_plus)
                    || !close(medium.eval(x, s - 1.0), wave.eps_minus)
                {
                    return false;
                }
            }
        }
        true
    };
    let mut delta = 1.0;
    for _ in 0..DELTA_CANDIDATES {
        if layer_matches(delta) {
            return Ok(delta);
        }
        delta *= 0.5;
    }
    Err(Error::MediumMismatch(
        "medium is not constant in any boundary layer".into(),
    ))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::medium::presets;

    #[test]
    fn standard_wave_constants() {
        let w = IncidentWave::standard();
        assert!((w.alpha0() - 9.749279121818236).abs() < 1e-12);
        assert!((w.beta0() - 2.225209339563144).abs() < 1e-12);
    }

    #[test]
    fn standard_wave_propagating_set() {
        let m = mode_constants(&IncidentWave::standard(), 64, QChoice::Auto).unwrap();
        let expected: Vec<i64> = (-19..=0).collect();
        assert_eq!(m.propagating_up, expected);
        assert_eq!(m.propagating_down, expected);
        assert_eq!(m.q, 33);
        assert_eq!((m.j_min(), m.j_max()), (-32, 31));
    }

    #[test]
    fn normal_incidence_unit_frequency_is_resonant() {
        let w = IncidentWave::new(1.0, 0.0, C64::new(1.0, 0.0), C64::new(1.0, 0.0), 1.0).unwrap();
        let err = mode_constants(&w, 3, QChoice::Fixed(2)).unwrap_err();
        assert!(matches!(err, Error::Resonance { mode, .. } if mode.abs() == 1));
    }

    #[test]
    fn narrow_window_is_a_truncation_error() {
        let err = mode_constants(&IncidentWave::standard(), 16, QChoice::Auto).unwrap_err();
        assert!(matches!(err, Error::Truncation { .. }));
        let relaxed = mode_constants_with(
            &IncidentWave::standard(),
            16,
            QChoice::Auto,
            TruncationPolicy::Permissive,
        )
        .unwrap();
        assert_eq!(relaxed.alphas.len(), 16);
    }

    #[test]
    fn q_out_of_range_rejected() {
        let w = IncidentWave::standard();
        assert!(mode_constants(&w, 40, QChoice::Fixed(0)).is_err());
        assert!(mode_constants(&w, 40, QChoice::Fixed(41)).is_err());
    }

    #[test]
    fn invalid_wave_rejected() {
        let one = C64::new(1.0, 0.0);
        assert!(IncidentWave::new(-1.0, 0.1, one, one, 1.0).is_err());
        assert!(IncidentWave::new(1.0, PI / 2.0, one, one, 1.0).is_err());
        assert!(IncidentWave::new(1.0, 0.1, one, one, 0.0).is_err());
    }

    #[test]
    fn branch_rule_for_complex_radicands() {
        for z in [
            C64::new(-4.0, 0.0),
            C64::new(-4.0, -0.0),
            C64::new(4.0, -1e-3),
            C64::new(-1.0, -2.0),
        ] {
            let s = outgoing_sqrt(z);
            assert!(s.im >= 0.0);
            assert!((s * s - z).norm() < 1e-14 * z.norm().max(1.0));
        }
        assert_eq!(outgoing_sqrt(C64::new(9.0, 0.0)), C64::new(3.0, 0.0));
    }

    #[test]
    fn lossy_lower_medium_has_no_propagating_down_modes() {
        let w = IncidentWave::new(5.0, 0.3, C64::new(1.0, 0.0), C64::new(2.0, 0.5), 1.0).unwrap();
        let m = mode_constants(&w, 32, QChoice::Auto).unwrap();
        assert!(m.propagating_down.is_empty());
        assert!(m.gammas.iter().all(|g| g.im > 0.0));
    }

    #[test]
    fn validate_constant_medium() {
        let w = IncidentWave::standard();
        let d = validate_medium(&MediumSpec::Homogeneous(C64::new(1.0, 0.0)), &w).unwrap();
        assert_eq!(d, 1.0);
    }

    #[test]
    fn validate_smooth_bump_medium() {
        let w = IncidentWave::standard();
        let d = validate_medium(&presets::eps1(), &w).unwrap();
        assert!(d > 0.0 && d < 1.0);
        assert!(validate_medium(&presets::eps2(), &w).is_ok());
        assert!(validate_medium(&presets::eps3(), &w).is_ok());
    }

    #[test]
    fn validate_mismatched_medium() {
        let w = IncidentWave::standard();
        let err = validate_medium(&MediumSpec::Homogeneous(C64::new(2.0, 0.0)), &w).unwrap_err();
        assert!(matches!(err, Error::MediumMismatch(_)));
    }
}
