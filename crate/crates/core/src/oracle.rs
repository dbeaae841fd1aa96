//! Reference values for zero-mean Gaussian states.
//!
//! For a Gaussian state the characteristic function of the P function is
//! known in closed form, so `P_Omega(alpha)` follows from a deterministic 2D
//! quadrature of its Fourier integral in polar coordinates `beta = b e^{i phi}`:
//!
//! `P_Omega(alpha) = 1/pi^2 int_0^pi dphi int db |b| e^{2i|alpha| b sin(arg alpha - phi)} Phi(b e^{i phi}) Omega_w(b)`.
//!
//! None of this touches the pattern kernel or sampled data.

use std::f64::consts::{FRAC_PI_2, PI};

use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::filter::FilterProfile;
use crate::gaussian_sim::GaussianStateSpec;
use crate::quadrature::Rule;

const GL_ORDER: usize = 16;

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct OracleConfig {
    /// Radial cutoff in units of the width; the filter is zero beyond `4 w`.
    pub b_max_factor: f64,
    /// Minimum number of 16-point Gauss–Legendre panels on `[0, b_max]`.
    pub radial_panels: usize,
    /// Fixed angular node count; `None` chooses `64 (1 + |alpha| b_max)`.
    pub angular_nodes: Option<usize>,
    /// Upper bound on the automatic angular node count.
    pub max_angular_nodes: usize,
    /// Multiplies every node count (convergence studies use 2).
    pub refinement: usize,
    pub tolerance: f64,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            b_max_factor: 4.0,
            radial_panels: 8,
            angular_nodes: None,
            max_angular_nodes: 1 << 20,
            refinement: 1,
            tolerance: 1e-7,
        }
    }
}

impl OracleConfig {
    pub fn refined(mut self, factor: usize) -> Self {
        self.refinement = factor.max(1);
        self
    }
}

/// `Phi(b e^{i phi}) = exp(b^2 (1 - V(phi - pi/2)) / 2)`.
pub fn gaussian_characteristic(state: &GaussianStateSpec, b: f64, phi: f64) -> f64 {
    (0.5 * b * b * (1.0 - state.quadrature_variance(phi - FRAC_PI_2))).exp()
}

/// Wigner function of the Gaussian state, `x` along the ellipse axis
/// carrying `v_x` (rotated by the squeeze angle).
pub fn wigner_squeezed(state: &GaussianStateSpec, x: f64, p: f64) -> f64 {
    let (s, c) = state.squeeze_angle.sin_cos();
    let (u, v) = (c * x + s * p, -s * x + c * p);
    (-(u * u) / (2.0 * state.v_x) - v * v / (2.0 * state.v_p)).exp() / (2.0 * PI * (state.v_x * state.v_p).sqrt())
}

/// Quadrature-based evaluator of `P_Omega` for one filter width.
#[derive(Debug, Clone)]
pub struct Oracle {
    profile: FilterProfile,
    cfg: OracleConfig,
    b_max: f64,
}

impl Oracle {
    pub fn new(profile: FilterProfile, cfg: OracleConfig) -> Result<Self> {
        if cfg.tolerance.is_nan() || cfg.tolerance <= 0.0 {
            return Err(Error::invalid("oracle tolerance must be positive"));
        }
        if cfg.b_max_factor.is_nan() || cfg.b_max_factor <= 0.0 {
            return Err(Error::invalid("b_max_factor must be positive"));
        }
        let b_max = (cfg.b_max_factor * profile.width()).min(profile.b_cut());
        Ok(Oracle { profile, cfg, b_max })
    }

    pub fn with_width(width: f64) -> Result<Self> {
        Self::new(FilterProfile::new(width)?, OracleConfig::default())
    }

    pub fn profile(&self) -> &FilterProfile {
        &self.profile
    }

    pub fn config(&self) -> &OracleConfig {
        &self.cfg
    }

    pub fn width(&self) -> f64 {
        self.profile.width()
    }

    /// Angular node count needed over `[0, pi)` at radius `|alpha|`.
    pub fn required_angular_nodes(&self, alpha_abs: f64) -> usize {
        (64.0 * (1.0 + alpha_abs * self.b_max)).ceil() as usize * self.cfg.refinement
    }

    fn angular_nodes(&self, alpha_abs: f64) -> Result<usize> {
        let required = self.required_angular_nodes(alpha_abs);
        let given = self.cfg.angular_nodes.map(|n| n * self.cfg.refinement).unwrap_or(required);
        if given < required || required > self.cfg.max_angular_nodes * self.cfg.refinement {
            return Err(Error::OscillationResolution {
                scale: alpha_abs * self.b_max,
                given: given.min(self.cfg.max_angular_nodes),
                required,
            });
        }
        Ok(given)
    }

    // Radial rule with weights w_q * 2 b_q / pi * Omega_w(b_q); the factor 2
    // folds the negative half-line onto the positive one.
    fn radial(&self, alpha_abs: f64) -> (Vec<f64>, Vec<f64>) {
        let periods = alpha_abs * self.b_max / PI;
        let panels = (self.cfg.radial_panels + (2.0 * periods).ceil() as usize) * self.cfg.refinement;
        let rule = Rule::composite_gauss_legendre(0.0, self.b_max, panels, GL_ORDER);
        let weights = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&b, &w)| w * 2.0 * b / PI * self.profile.value(b))
            .collect();
        (rule.nodes, weights)
    }

    /// `P_Omega(alpha)` from the polar Fourier integral; trapezoid in the
    /// (periodic) angle, Gauss–Legendre in the radius.
    pub fn quasiprob(&self, state: &GaussianStateSpec, alpha: Complex64) -> Result<f64> {
        let a = alpha.norm();
        let theta = alpha.arg();
        let n_ang = self.angular_nodes(a)?;
        let (b, w) = self.radial(a);
        let b2: Vec<f64> = b.iter().map(|b| 0.5 * b * b).collect();
        let mut total = 0.0;
        for m in 0..n_ang {
            let phi = m as f64 * PI / n_ang as f64;
            let growth = 1.0 - state.quadrature_variance(phi - FRAC_PI_2);
            let k = 2.0 * a * (theta - phi).sin();
            let mut inner = 0.0;
            for q in 0..b.len() {
                inner += w[q] * (b2[q] * growth).exp() * (k * b[q]).cos();
            }
            total += inner;
        }
        // 1/pi^2 * (pi / n_ang) * pi, the last pi taken out of w.
        Ok(total / n_ang as f64)
    }

    /// Discrete-phase approximation: the quadrature distribution is frozen at
    /// the grid phase `phi_k = k pi / N` over its cell, while the pattern
    /// function is averaged over the cell.
    pub fn discrete_phase(&self, state: &GaussianStateSpec, alpha: Complex64, n_phases: usize) -> Result<f64> {
        if n_phases == 0 {
            return Err(Error::invalid("n_phases must be positive"));
        }
        let a = alpha.norm();
        let theta = alpha.arg();
        let total_nodes = self.angular_nodes(a)?;
        let per_cell = total_nodes.div_ceil(n_phases).max(GL_ORDER).div_ceil(GL_ORDER);
        let half = PI / (2.0 * n_phases as f64);
        let cell = Rule::composite_gauss_legendre(-half, half, per_cell, GL_ORDER);
        let (b, w) = self.radial(a);
        let mut total = 0.0;
        for k in 0..n_phases {
            let phi_k = k as f64 * PI / n_phases as f64;
            let growth = 1.0 - state.quadrature_variance(phi_k);
            let frozen: Vec<f64> = b
                .iter()
                .zip(&w)
                .map(|(&b, &w)| w * (0.5 * b * b * growth).exp())
                .collect();
            for (&d, &wd) in cell.nodes.iter().zip(&cell.weights) {
                let k = 2.0 * a * (theta - phi_k - d - FRAC_PI_2).sin();
                let inner: f64 = b.iter().zip(&frozen).map(|(&b, &f)| f * (k * b).cos()).sum();
                total += wd * inner;
            }
        }
        Ok(total / PI)
    }

    /// `|continuous - discrete-phase|`.
    pub fn systematic_error(&self, state: &GaussianStateSpec, alpha: Complex64, n_phases: usize) -> Result<f64> {
        Ok((self.quasiprob(state, alpha)? - self.discrete_phase(state, alpha, n_phases)?).abs())
    }

    /// The naive estimator that replaces the phase integral by a plain average
    /// over the grid phases. It does not decay along measured-phase directions
    /// and is kept only as a negative control.
    pub fn riemann_sum(&self, state: &GaussianStateSpec, alpha: Complex64, n_phases: usize) -> Result<f64> {
        if n_phases == 0 {
            return Err(Error::invalid("n_phases must be positive"));
        }
        let a = alpha.norm();
        let theta = alpha.arg();
        let (b, w) = self.radial(a);
        let mut total = 0.0;
        for k in 0..n_phases {
            let phi_k = k as f64 * PI / n_phases as f64;
            let growth = 1.0 - state.quadrature_variance(phi_k);
            let s = 2.0 * a * (theta - phi_k - FRAC_PI_2).sin();
            total += b
                .iter()
                .zip(&w)
                .map(|(&b, &w)| w * (0.5 * b * b * growth).exp() * (s * b).cos())
                .sum::<f64>();
        }
        Ok(total / n_phases as f64)
    }

    /// `int_{|alpha| <= R} P_Omega(alpha) d^2 alpha`.
    ///
    /// The disc integral of the Fourier kernel is done in closed form,
    /// `int_{|alpha|<=R} e^{2i Im(alpha conj(beta))} d^2 alpha = pi R J_1(2 R |beta|) / |beta|`,
    /// leaving `(2R/pi) int db J_1(2Rb) Omega_w(b) int_0^pi dphi Phi(b e^{i phi})`.
    pub fn normalization(&self, state: &GaussianStateSpec, radius: f64) -> Result<f64> {
        if radius.is_nan() || radius <= 0.0 {
            return Err(Error::invalid("disc radius must be positive"));
        }
        let panels = (self.cfg.radial_panels + (4.0 * radius * self.b_max / PI).ceil() as usize) * self.cfg.refinement;
        let rule = Rule::composite_gauss_legendre(0.0, self.b_max, panels, GL_ORDER);
        let n_ang = self.required_angular_nodes(0.0);
        let mut total = 0.0;
        for (&b, &w) in rule.nodes.iter().zip(&rule.weights) {
            let angular: f64 = (0..n_ang)
                .map(|m| gaussian_characteristic(state, b, m as f64 * PI / n_ang as f64))
                .sum::<f64>()
                * PI
                / n_ang as f64;
            total += w * bessel_j1(2.0 * radius * b) * self.profile.value(b) * angular;
        }
        Ok(2.0 * radius / PI * total)
    }

    /// Disc integral by direct 2D quadrature of [`Oracle::quasiprob`]:
    /// Gauss–Legendre in `|alpha|`, trapezoid in `arg(alpha)` over `[0, pi)`
    /// doubled using `P(alpha) = P(-alpha)`.
    pub fn normalization_direct(
        &self,
        state: &GaussianStateSpec,
        radius: f64,
        radial_panels: usize,
        angular_nodes: usize,
    ) -> Result<f64> {
        let rule = Rule::composite_gauss_legendre(0.0, radius, radial_panels, 8);
        let jobs: Vec<(f64, f64, usize)> = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .flat_map(|(&r, &w)| (0..angular_nodes).map(move |m| (r, w, m)))
            .collect();
        let values: Vec<f64> = jobs
            .par_iter()
            .map(|&(r, w, m)| {
                let t = m as f64 * PI / angular_nodes as f64;
                self.quasiprob(state, Complex64::from_polar(r, t)).map(|p| w * r * p)
            })
            .collect::<Result<_>>()?;
        Ok(values.iter().sum::<f64>() * 2.0 * PI / angular_nodes as f64)
    }

    /// `P_Omega` on many points in parallel, in input order.
    pub fn quasiprob_many(&self, state: &GaussianStateSpec, alphas: &[Complex64]) -> Result<Vec<f64>> {
        alphas.par_iter().map(|&a| self.quasiprob(state, a)).collect()
    }

    /// Value at the configured resolution and at twice the resolution; errors
    /// if they differ by more than the tolerance.
    pub fn check_convergence(&self, state: &GaussianStateSpec, alpha: Complex64) -> Result<(f64, f64)> {
        let coarse = self.quasiprob(state, alpha)?;
        let fine = Oracle {
            cfg: self.cfg.refined(self.cfg.refinement * 2),
            ..self.clone()
        }
        .quasiprob(state, alpha)?;
        if (coarse - fine).abs() > self.cfg.tolerance {
            return Err(Error::Accuracy(format!(
                "oracle not converged at {alpha}: {coarse} vs {fine}"
            )));
        }
        Ok((fine, (coarse - fine).abs()))
    }
}

/// `J_1(z) = (1/pi) int_0^pi cos(t - z sin t) dt`, by the trapezoid rule,
/// which converges geometrically once the node count exceeds `|z|`.
pub fn bessel_j1(z: f64) -> f64 {
    let n = (z.abs().ceil() as usize + 48) * 2;
    let h = PI / n as f64;
    let mut s = 0.5 * ((0.0f64).cos() + (PI - z * PI.sin()).cos());
    for i in 1..n {
        let t = i as f64 * h;
        s += (t - z * t.sin()).cos();
    }
    s * h / PI
}

/// Free-function forms taking the width directly.
pub fn oracle_quasiprob(state: &GaussianStateSpec, alpha: Complex64, width: f64, cfg: OracleConfig) -> Result<f64> {
    Oracle::new(FilterProfile::new(width)?, cfg)?.quasiprob(state, alpha)
}

pub fn oracle_discrete_phase(
    state: &GaussianStateSpec,
    alpha: Complex64,
    width: f64,
    n_phases: usize,
    cfg: OracleConfig,
) -> Result<f64> {
    Oracle::new(FilterProfile::new(width)?, cfg)?.discrete_phase(state, alpha, n_phases)
}

pub fn systematic_error(
    state: &GaussianStateSpec,
    alpha: Complex64,
    width: f64,
    n_phases: usize,
    cfg: OracleConfig,
) -> Result<f64> {
    Oracle::new(FilterProfile::new(width)?, cfg)?.systematic_error(state, alpha, n_phases)
}

pub fn riemann_sum_quasiprob(
    state: &GaussianStateSpec,
    alpha: Complex64,
    width: f64,
    n_phases: usize,
    cfg: OracleConfig,
) -> Result<f64> {
    Oracle::new(FilterProfile::new(width)?, cfg)?.riemann_sum(state, alpha, n_phases)
}

pub fn normalization_check(state: &GaussianStateSpec, width: f64, radius: f64, cfg: OracleConfig) -> Result<f64> {
    Oracle::new(FilterProfile::new(width)?, cfg)?.normalization(state, radius)
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn oracle() -> &'static Oracle {
        static O: OnceLock<Oracle> = OnceLock::new();
        O.get_or_init(|| Oracle::with_width(1.3).unwrap())
    }

    fn squeezed() -> GaussianStateSpec {
        GaussianStateSpec::new(0.36, 5.28).unwrap()
    }

    #[test]
    fn characteristic_function_values() {
        let vac = GaussianStateSpec::vacuum();
        for (b, phi) in [(0.3, 0.1), (2.0, 1.4), (5.0, 3.0)] {
            assert!((gaussian_characteristic(&vac, b, phi) - 1.0).abs() < 1e-13);
        }
        let v = gaussian_characteristic(&squeezed(), 1.0, FRAC_PI_2);
        assert!((v - 0.32f64.exp()).abs() < 1e-14);
        assert!((v - 1.377_127_764).abs() < 1e-9);
        assert_eq!(gaussian_characteristic(&squeezed(), 0.0, 0.7), 1.0);
    }

    #[test]
    fn wigner_values() {
        let s = squeezed();
        let w0 = wigner_squeezed(&s, 0.0, 0.0);
        assert!((w0 - 1.0 / (2.0 * PI * 1.9008f64.sqrt())).abs() < 1e-14);
        assert!((w0 - 0.115_44).abs() < 1e-5);
        assert!(wigner_squeezed(&s, 4.0, -9.0) > 0.0);
        let rule = Rule::composite_gauss_legendre(-20.0, 20.0, 80, 16);
        let total: f64 = rule
            .nodes
            .iter()
            .zip(&rule.weights)
            .map(|(&x, &wx)| wx * rule.integrate(|p| wigner_squeezed(&s, x, p)))
            .sum();
        assert!((total - 1.0).abs() < 1e-6, "{total}");
    }

    #[test]
    fn bessel_j1_reference_values() {
        // Abramowitz & Stegun table 9.1
        assert!((bessel_j1(1.0) - 0.440_050_585_744_933_5).abs() < 1e-14);
        assert!((bessel_j1(5.0) - (-0.327_579_137_591_465_2)).abs() < 1e-14);
        assert!((bessel_j1(10.0) - 0.043_472_746_168_861_44).abs() < 1e-14);
        assert!(bessel_j1(0.0).abs() < 1e-15);
    }

    #[test]
    fn vacuum_is_nonnegative_and_even() {
        let o = oracle();
        let vac = GaussianStateSpec::vacuum();
        for (re, im) in [(0.0, 0.0), (0.5, 0.3), (1.0, -1.2), (2.5, 0.0), (0.0, 3.0)] {
            let a = Complex64::new(re, im);
            let p = o.quasiprob(&vac, a).unwrap();
            assert!(p >= -1e-9, "{a}: {p}");
            assert!((p - o.quasiprob(&vac, -a).unwrap()).abs() < 1e-12);
        }
    }

    #[test]
    fn explicit_angular_grid_too_coarse_is_an_error() {
        let cfg = OracleConfig {
            angular_nodes: Some(100),
            ..OracleConfig::default()
        };
        let o = Oracle::new(FilterProfile::new(1.3).unwrap(), cfg).unwrap();
        assert!(o.quasiprob(&squeezed(), Complex64::new(0.0, 0.0)).is_ok());
        match o.quasiprob(&squeezed(), Complex64::new(0.0, 2.0)) {
            Err(Error::OscillationResolution { required, .. }) => assert_eq!(required, 730),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn converges_under_refinement() {
        let o = oracle();
        for a in [Complex64::new(0.0, 0.0), Complex64::new(0.95, 0.0), Complex64::new(0.3, 2.2)] {
            let (_, diff) = o.check_convergence(&squeezed(), a).unwrap();
            assert!(diff < 1e-10, "{a}: {diff}");
        }
    }

    #[test]
    fn isotropic_state_has_no_discrete_phase_error_at_origin() {
        let o = oracle();
        let zero = Complex64::new(0.0, 0.0);
        for s in [GaussianStateSpec::vacuum(), GaussianStateSpec::thermal(2.0).unwrap()] {
            assert!(o.systematic_error(&s, zero, 21).unwrap() < 1e-12);
        }
    }

    #[test]
    fn vacuum_discrete_phase_independent_of_offset() {
        let o = oracle();
        let vac = GaussianStateSpec::vacuum();
        let a = Complex64::from_polar(1.1, 0.4);
        let b = Complex64::from_polar(1.1, 0.4 + PI / 21.0);
        let (pa, pb) = (o.discrete_phase(&vac, a, 21).unwrap(), o.discrete_phase(&vac, b, 21).unwrap());
        assert!((pa - pb).abs() < 1e-12);
    }

    #[test]
    fn discrete_phase_converges_with_phase_count() {
        let o = oracle();
        let s = squeezed();
        let a = Complex64::new(0.9, 0.0);
        let exact = o.quasiprob(&s, a).unwrap();
        let diffs: Vec<f64> = [21usize, 84, 336]
            .iter()
            .map(|&n| (o.discrete_phase(&s, a, n).unwrap() - exact).abs())
            .collect();
        assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
    }

    #[test]
    fn riemann_sum_does_not_decay_along_measured_phase() {
        let o = oracle();
        let vac = GaussianStateSpec::vacuum();
        // phase aliasing: the sum picks up J_{2mN}(2|alpha| b) terms
        let r10 = o.riemann_sum(&vac, Complex64::new(0.0, 10.0), 21).unwrap();
        let exact = o.quasiprob(&vac, Complex64::new(0.0, 10.0)).unwrap();
        assert!(r10.abs() > 100.0 * exact.abs(), "{r10} vs {exact}");
    }

    #[test]
    fn normalization_routes_agree_for_vacuum() {
        let o = oracle();
        let vac = GaussianStateSpec::vacuum();
        let n6 = o.normalization(&vac, 6.0).unwrap();
        assert!((n6 - 1.0).abs() < 1e-3, "{n6}");
        let bessel = o.normalization(&vac, 2.0).unwrap();
        let direct = o.normalization_direct(&vac, 2.0, 8, 4).unwrap();
        assert!((bessel - direct).abs() < 1e-8, "{bessel} vs {direct}");
    }
}
