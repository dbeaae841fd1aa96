//! The pattern kernel `chi(xi; w)` and the pattern functions built on it.
//!
//! `chi(xi; w) = int db |b|/pi e^{i b xi} e^{b^2/2} Omega_w(b)`. With the
//! filter truncated at `b_c` the kernel is band-limited, so it is stored as
//! its samples at `xi_j = pi j / b_c` and reconstructed anywhere by the
//! Whittaker–Shannon series. Data points enter only through
//! `xi = x + 2|alpha| sin(arg(alpha) - phi - pi/2)`.

use std::f64::consts::{FRAC_PI_2, PI};
use std::io::Write;
use std::path::Path;

use num_complex::Complex64;
use rand::Rng;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::filter::FilterProfile;
use crate::quadrature::{adaptive, Rule};

pub const DEFAULT_COEFFS: usize = 256;
pub const RETRY_COEFFS: usize = 512;
/// Sup-norm reconstruction error allowed on `|xi| <= VERIFY_RANGE`.
pub const ACCURACY_GATE: f64 = 3.5e-5;
pub const VERIFY_RANGE: f64 = 20.0;
/// Allowed deviation of the dense lookup from the sinc series.
pub const LOOKUP_GATE: f64 = 1e-6;
/// The lookup covers `|xi| < LOOKUP_XI_MAX`; beyond it the sinc series is used.
pub const LOOKUP_XI_MAX: f64 = 64.0;
const GL_ORDER: usize = 16;

/// Anything that evaluates `chi(xi; w)`.
pub trait PatternKernel: Sync {
    fn chi(&self, xi: f64) -> f64;
    fn width(&self) -> f64;
}

/// Nyquist samples `chi(pi j / b_c; w)`, `j = 0..n_coeff` (evenness supplies `j < 0`).
#[derive(Debug, Clone)]
pub struct ChiTable {
    width: f64,
    b_cut: f64,
    coeffs: Vec<f64>,
    // 2 (-1)^j c_j for j >= 1, and j as f64
    alt: Vec<f64>,
    js: Vec<f64>,
    accuracy: f64,
    // direct-quadrature rule: nodes b_q and weights w_q * 2 (b_q/pi) e^{b_q^2/2} Omega_w(b_q)
    quad_nodes: Vec<f64>,
    quad_weights: Vec<f64>,
}

/// Builds the table with 256 one-sided coefficients, retrying once with 512
/// if the reconstruction misses the accuracy gate.
pub fn build_chi_table(profile: &FilterProfile) -> Result<ChiTable> {
    match build_chi_table_with(profile, DEFAULT_COEFFS) {
        Err(Error::Accuracy(msg)) => {
            log::warn!("{msg}; retrying with {RETRY_COEFFS} coefficients");
            build_chi_table_with(profile, RETRY_COEFFS)
        }
        other => other,
    }
}

pub fn build_chi_table_with(profile: &FilterProfile, n_coeff: usize) -> Result<ChiTable> {
    if n_coeff < 2 {
        return Err(Error::invalid("chi table needs at least two coefficients"));
    }
    let b_cut = profile.b_cut();
    // 16 nodes per period of the fastest cosine, cos(b pi (n-1) / b_c).
    let panels = (n_coeff - 1).max(16);
    let rule = Rule::composite_gauss_legendre(0.0, b_cut, panels, GL_ORDER);
    let mut quad_nodes = Vec::with_capacity(rule.len());
    let mut quad_weights = Vec::with_capacity(rule.len());
    for (&b, &w) in rule.nodes.iter().zip(&rule.weights) {
        quad_nodes.push(b);
        quad_weights.push(w * 2.0 * (b / PI) * (0.5 * b * b).exp() * profile.value(b));
    }
    let direct = |xi: f64| -> f64 {
        quad_nodes
            .iter()
            .zip(&quad_weights)
            .map(|(&b, &w)| w * (b * xi).cos())
            .sum()
    };

    let spacing = PI / b_cut;
    let mut coeffs = Vec::with_capacity(n_coeff);
    for j in 0..n_coeff {
        let xi = j as f64 * spacing;
        // Sine part over the two-sided rule, summed from -b_c to b_c; it
        // cancels by symmetry of the integrand.
        let half = |(&b, &w): (&f64, &f64)| 0.5 * w * (b * xi).sin();
        let negative: f64 = quad_nodes.iter().zip(&quad_weights).rev().map(|p| -half(p)).sum();
        let imag = quad_nodes.iter().zip(&quad_weights).map(half).fold(negative, |a, s| a + s);
        let scale: f64 = quad_weights.iter().map(|w| w.abs()).sum();
        if imag.abs() > 1e-12 * scale.max(1.0) {
            return Err(Error::Accuracy(format!("chi coefficient {j} has imaginary part {imag:.3e}")));
        }
        coeffs.push(direct(xi));
    }

    let mut table = ChiTable {
        width: profile.width(),
        b_cut,
        alt: coeffs[1..]
            .iter()
            .enumerate()
            .map(|(i, c)| if i % 2 == 0 { -2.0 * c } else { 2.0 * c })
            .collect(),
        js: (1..n_coeff).map(|j| j as f64).collect(),
        coeffs,
        accuracy: f64::INFINITY,
        quad_nodes: Vec::new(),
        quad_weights: Vec::new(),
    };

    // Verification grid: quarter-spacing points strictly between nodes.
    let n_verify = (VERIFY_RANGE / spacing * 4.0).ceil() as usize;
    let accuracy = (0..n_verify)
        .map(|k| (k as f64 + 0.5) * spacing / 4.0)
        .map(|xi| (table.chi(xi) - direct(xi)).abs())
        .fold(0.0, f64::max);
    table.accuracy = accuracy;
    table.quad_nodes = quad_nodes;
    table.quad_weights = quad_weights;
    if accuracy > ACCURACY_GATE {
        return Err(Error::Accuracy(format!(
            "chi reconstruction error {accuracy:.3e} exceeds {ACCURACY_GATE:.1e} with {n_coeff} coefficients"
        )));
    }
    Ok(table)
}

impl ChiTable {
    pub fn new(width: f64) -> Result<Self> {
        build_chi_table(&FilterProfile::new(width)?)
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn b_cut(&self) -> f64 {
        self.b_cut
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn n_coeff(&self) -> usize {
        self.coeffs.len()
    }

    /// Measured sup-norm reconstruction error on the verification grid.
    pub fn accuracy(&self) -> f64 {
        self.accuracy
    }

    /// Node `xi_j = pi j / b_c`.
    pub fn node(&self, j: i64) -> f64 {
        j as f64 * PI / self.b_cut
    }

    /// Sinc-series reconstruction; exactly even in `xi`.
    pub fn chi(&self, xi: f64) -> f64 {
        let t = xi * self.b_cut / PI;
        let n0 = t.round();
        let f = t - n0;
        // within rounding of a node the series equals the coefficient
        if f.abs() < 1e-12 {
            let j = n0.abs() as usize;
            return self.coeffs.get(j).copied().unwrap_or(0.0);
        }
        let mut acc = 0.0;
        for (&a, &j) in self.alt.iter().zip(&self.js) {
            acc += a / ((t - j) * (t + j));
        }
        let series = self.coeffs[0] / t + t * acc;
        let sign = if (n0 as i64) % 2 == 0 { 1.0 } else { -1.0 };
        sign * (PI * f).sin() / PI * series
    }

    /// Derivative of the sinc series with respect to `xi`.
    pub fn chi_derivative(&self, xi: f64) -> f64 {
        let t = xi * self.b_cut / PI;
        let dsinc = |u: f64| {
            if u == 0.0 {
                0.0
            } else {
                let pu = PI * u;
                (pu.cos() - pu.sin() / pu) / u
            }
        };
        let mut acc = self.coeffs[0] * dsinc(t);
        for (j, &c) in self.coeffs.iter().enumerate().skip(1) {
            let j = j as f64;
            acc += c * (dsinc(t - j) + dsinc(t + j));
        }
        acc * self.b_cut / PI
    }

    /// `chi` by direct quadrature of its defining Fourier integral, using the
    /// same rule as the coefficients.
    pub fn chi_direct(&self, xi: f64) -> f64 {
        self.quad_nodes
            .iter()
            .zip(&self.quad_weights)
            .map(|(&b, &w)| w * (b * xi).cos())
            .sum()
    }

    /// Writes `xi,chi` rows on `[-xi_max, xi_max]`.
    pub fn dump_csv(&self, path: &Path, xi_max: f64, step: f64) -> Result<()> {
        use crate::dataset_io::fmt_f64;
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        let n = (2.0 * xi_max / step).round() as i64;
        let mut write = || -> std::io::Result<()> {
            writeln!(f, "xi,chi")?;
            for k in 0..=n {
                let xi = -xi_max + k as f64 * step;
                writeln!(f, "{},{}", fmt_f64(xi), fmt_f64(self.chi(xi)))?;
            }
            f.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

impl PatternKernel for ChiTable {
    fn chi(&self, xi: f64) -> f64 {
        ChiTable::chi(self, xi)
    }

    fn width(&self) -> f64 {
        self.width
    }
}

/// Free-function form of [`ChiTable::chi`].
pub fn chi(table: &ChiTable, xi: f64) -> f64 {
    table.chi(xi)
}

/// Dense cubic-Hermite lookup of `chi`, validated against the sinc series.
#[derive(Debug, Clone)]
pub struct ChiLookup {
    table: ChiTable,
    step: f64,
    inv_step: f64,
    values: Vec<f64>,
    derivs: Vec<f64>,
    max_deviation: f64,
}

impl ChiLookup {
    /// Starts at step `pi / (8 b_c)` and halves it until the deviation from
    /// the sinc series at every cell midpoint is within [`LOOKUP_GATE`].
    pub fn new(table: ChiTable) -> Result<Self> {
        let mut step = PI / (8.0 * table.b_cut);
        for _ in 0..8 {
            let n = (LOOKUP_XI_MAX / step).ceil() as usize + 1;
            let values: Vec<f64> = (0..n).map(|k| table.chi(k as f64 * step)).collect();
            let derivs: Vec<f64> = (0..n).map(|k| table.chi_derivative(k as f64 * step)).collect();
            let mut lookup = ChiLookup {
                table: table.clone(),
                step,
                inv_step: 1.0 / step,
                values,
                derivs,
                max_deviation: 0.0,
            };
            let dev = (0..n - 1)
                .map(|k| (k as f64 + 0.5) * step)
                .filter(|&xi| xi < LOOKUP_XI_MAX)
                .map(|xi| (lookup.eval(xi) - table.chi(xi)).abs())
                .fold(0.0, f64::max);
            lookup.max_deviation = dev;
            if dev <= LOOKUP_GATE {
                return Ok(lookup);
            }
            step *= 0.5;
        }
        Err(Error::Accuracy(format!(
            "dense chi lookup could not reach {LOOKUP_GATE:.0e} (width {})",
            table.width
        )))
    }

    pub fn table(&self) -> &ChiTable {
        &self.table
    }

    pub fn step(&self) -> f64 {
        self.step
    }

    pub fn max_deviation(&self) -> f64 {
        self.max_deviation
    }

    #[inline]
    pub fn eval(&self, xi: f64) -> f64 {
        let a = xi.abs();
        let pos = a * self.inv_step;
        let k = pos as usize;
        if k + 1 >= self.values.len() {
            return self.table.chi(xi);
        }
        let s = pos - k as f64;
        let s2 = s * s;
        let s3 = s2 * s;
        let h00 = 2.0 * s3 - 3.0 * s2 + 1.0;
        let h10 = s3 - 2.0 * s2 + s;
        let h01 = -2.0 * s3 + 3.0 * s2;
        let h11 = s3 - s2;
        h00 * self.values[k]
            + h10 * self.step * self.derivs[k]
            + h01 * self.values[k + 1]
            + h11 * self.step * self.derivs[k + 1]
    }
}

impl PatternKernel for ChiLookup {
    fn chi(&self, xi: f64) -> f64 {
        self.eval(xi)
    }

    fn width(&self) -> f64 {
        self.table.width
    }
}

/// Either evaluation route for the kernel, chosen at run time.
#[derive(Debug, Clone)]
pub enum Kernel {
    Sinc(ChiTable),
    Lookup(ChiLookup),
}

impl Kernel {
    pub fn build(width: f64, fast: bool) -> Result<Self> {
        let table = ChiTable::new(width)?;
        Ok(if fast {
            Kernel::Lookup(ChiLookup::new(table)?)
        } else {
            Kernel::Sinc(table)
        })
    }

    pub fn table(&self) -> &ChiTable {
        match self {
            Kernel::Sinc(t) => t,
            Kernel::Lookup(l) => l.table(),
        }
    }
}

impl PatternKernel for Kernel {
    #[inline]
    fn chi(&self, xi: f64) -> f64 {
        match self {
            Kernel::Sinc(t) => t.chi(xi),
            Kernel::Lookup(l) => l.eval(xi),
        }
    }

    fn width(&self) -> f64 {
        self.table().width
    }
}

/// Kernel argument for quadrature `x` at phase `phi` and phase-space point `alpha`.
#[inline]
pub fn pattern_argument(x: f64, phi: f64, alpha: Complex64) -> f64 {
    x + 2.0 * alpha.norm() * (alpha.arg() - phi - FRAC_PI_2).sin()
}

/// `f_Omega(x, phi; alpha, w)`.
pub fn pattern_value<K: PatternKernel + ?Sized>(kernel: &K, x: f64, phi: f64, alpha: Complex64) -> f64 {
    kernel.chi(pattern_argument(x, phi, alpha))
}

/// Half-width `pi / (2 N)` of the phase cell around each grid phase.
pub fn dither_half_width(n_phases: usize) -> f64 {
    PI / (2.0 * n_phases as f64)
}

/// `phi_k + u` with `u` uniform on `[-pi/(2N), pi/(2N)]`.
pub fn dither_phase<R: Rng + ?Sized>(phi_k: f64, n_phases: usize, rng: &mut R) -> f64 {
    let u: f64 = rng.random();
    phi_k + (2.0 * u - 1.0) * dither_half_width(n_phases)
}

/// Dither stream for phase `k`: draw `i` of this stream belongs to the
/// `i`-th sample recorded at that phase.
pub fn dither_stream(dither_seed: u64, k: usize) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(dither_seed);
    rng.set_stream(k as u64);
    rng
}

/// `f~(x, phi_k; alpha, w)`: the pattern function averaged over the phase
/// cell of width `pi / N` centred on `phi_k`, by adaptive quadrature.
pub fn modified_pattern_value<K: PatternKernel + ?Sized>(
    kernel: &K,
    x: f64,
    phi_k: f64,
    alpha: Complex64,
    n_phases: usize,
) -> Result<f64> {
    if n_phases == 0 {
        return Err(Error::invalid("n_phases must be positive"));
    }
    let h = dither_half_width(n_phases);
    if alpha.norm() == 0.0 {
        return Ok(kernel.chi(x));
    }
    let r = adaptive(|d| pattern_value(kernel, x, phi_k + d, alpha), -h, h, 1e-13, 4000);
    if !r.converged {
        return Err(Error::Accuracy(format!(
            "modified pattern quadrature did not converge (error {:.3e})",
            r.error
        )));
    }
    Ok(r.value / (2.0 * h))
}

#[cfg(test)]
mod tests {
    use super::*;
    use std::sync::OnceLock;

    fn table() -> &'static ChiTable {
        static T: OnceLock<ChiTable> = OnceLock::new();
        T.get_or_init(|| ChiTable::new(1.3).unwrap())
    }

    #[test]
    fn table_meets_gate_with_default_coefficients() {
        let t = table();
        assert_eq!(t.n_coeff(), DEFAULT_COEFFS);
        assert!(t.accuracy() <= ACCURACY_GATE, "{}", t.accuracy());
        assert!((t.b_cut() - 5.2).abs() < 1e-15);
    }

    #[test]
    fn node_reproduction() {
        let t = table();
        for j in [0i64, 1, 2, 17, 100, 255, -3, -255] {
            assert_eq!(t.chi(t.node(j)), t.coeffs()[j.unsigned_abs() as usize]);
        }
        assert_eq!(t.chi(t.node(300)), 0.0);
    }

    #[test]
    fn evenness_is_exact() {
        let t = table();
        for xi in [0.013, 0.5, 1.7, 3.3333, 9.99, 19.2, 47.0] {
            assert_eq!(t.chi(xi), t.chi(-xi));
        }
    }

    #[test]
    fn kernel_decays() {
        let t = table();
        assert!(t.chi(30.0).abs() < 1e-3);
    }

    #[test]
    fn derivative_matches_finite_difference() {
        let t = table();
        for xi in [0.2, 1.1, 4.4, 12.0] {
            let h = 1e-5;
            let fd = (t.chi(xi + h) - t.chi(xi - h)) / (2.0 * h);
            assert!((t.chi_derivative(xi) - fd).abs() < 1e-6 * (1.0 + fd.abs()), "xi={xi}");
        }
    }

    #[test]
    fn lookup_tracks_sinc_series() {
        let l = ChiLookup::new(table().clone()).unwrap();
        assert!(l.max_deviation() <= LOOKUP_GATE);
        for xi in [0.0, 0.37, -2.2, 7.77, 63.9, 70.0, -100.0] {
            assert!((l.eval(xi) - table().chi(xi)).abs() <= LOOKUP_GATE, "xi={xi}");
        }
    }

    #[test]
    fn pattern_value_at_origin_is_chi_of_x() {
        let t = table();
        for phi in [0.0, 0.4, 2.0] {
            assert_eq!(pattern_value(t, 0.8, phi, Complex64::new(0.0, 0.0)), t.chi(0.8));
        }
        // x=0, phi=0, alpha=0.9i: argument 1.8 sin(pi/2 - pi/2) = 0
        let v = pattern_value(t, 0.0, 0.0, Complex64::new(0.0, 0.9));
        assert!((v - t.chi(0.0)).abs() < 1e-15);
    }

    #[test]
    fn pattern_depends_only_on_argument() {
        let t = table();
        let alpha = Complex64::new(0.4, -1.1);
        let (phi, phi2, x) = (0.3, 1.9, 0.25);
        let s = |p: f64| 2.0 * alpha.norm() * (alpha.arg() - p - FRAC_PI_2).sin();
        let x2 = x + s(phi) - s(phi2);
        let a = pattern_value(t, x, phi, alpha);
        let b = pattern_value(t, x2, phi2, alpha);
        assert!((a - b).abs() < 1e-12);
    }

    #[test]
    fn pattern_phase_periodicity_and_reflection() {
        let t = table();
        let alpha = Complex64::new(-0.7, 0.45);
        let (x, phi) = (0.6, 0.8);
        let a = pattern_value(t, x, phi, alpha);
        assert!((a - pattern_value(t, x, phi + 2.0 * PI, alpha)).abs() < 1e-12);
        // alpha -> -alpha flips the shift: f(x, phi, -alpha) = chi(x - shift)
        let shift = pattern_argument(x, phi, alpha) - x;
        let b = pattern_value(t, x, phi, -alpha);
        assert!((b - t.chi(x - shift)).abs() < 1e-12);
        // and by evenness equals f(-x, phi, alpha)
        assert!((b - pattern_value(t, -x, phi, alpha)).abs() < 1e-12);
    }

    #[test]
    fn dither_stays_in_cell_and_is_reproducible() {
        let h = PI / 42.0;
        let mut rng = dither_stream(5, 3);
        let draws: Vec<f64> = (0..10_000).map(|_| dither_phase(1.0, 21, &mut rng) - 1.0).collect();
        assert!(draws.iter().all(|u| u.abs() <= h));
        let mut again = dither_stream(5, 3);
        let redo: Vec<f64> = (0..10_000).map(|_| dither_phase(1.0, 21, &mut again) - 1.0).collect();
        assert_eq!(draws, redo);
    }

    #[test]
    fn dither_mean_within_clt_band() {
        let n = 1_000_000;
        let mut rng = dither_stream(17, 0);
        let mean = (0..n).map(|_| dither_phase(0.0, 21, &mut rng)).sum::<f64>() / n as f64;
        let bound = 4.0 * (PI / 42.0) / (3.0 * n as f64).sqrt();
        assert!(mean.abs() < bound, "{mean} vs {bound}");
    }

    #[test]
    fn modified_pattern_limits() {
        let t = table();
        let zero = Complex64::new(0.0, 0.0);
        assert_eq!(modified_pattern_value(t, 0.3, 0.5, zero, 21).unwrap(), t.chi(0.3));
        let alpha = Complex64::new(0.2, 0.9);
        let fine = modified_pattern_value(t, 0.3, 0.5, alpha, 10_000).unwrap();
        assert!((fine - pattern_value(t, 0.3, 0.5, alpha)).abs() < 1e-6);
    }

    #[test]
    fn modified_pattern_converges_with_phase_count() {
        let t = table();
        let alpha = Complex64::new(0.0, 1.2);
        let (x, phi) = (0.4, 0.7);
        let exact = pattern_value(t, x, phi, alpha);
        let diffs: Vec<f64> = [21usize, 84, 336, 1344]
            .iter()
            .map(|&n| (modified_pattern_value(t, x, phi, alpha, n).unwrap() - exact).abs())
            .collect();
        assert!(diffs.windows(2).all(|w| w[1] < w[0]), "{diffs:?}");
    }

    #[test]
    fn dithered_average_matches_cell_quadrature() {
        let t = table();
        let alpha = Complex64::new(0.3, 0.9);
        let (x, phi_k, n_phases) = (0.2, 1.2, 21);
        let quad = modified_pattern_value(t, x, phi_k, alpha, n_phases).unwrap();
        let mut rng = dither_stream(99, 0);
        let vals: Vec<f64> = (0..100_000)
            .map(|_| pattern_value(t, x, dither_phase(phi_k, n_phases, &mut rng), alpha))
            .collect();
        let m = crate::reduce::blocked_moments(vals.len(), |i| vals[i]);
        assert!((m.mean - quad).abs() <= 5.0 * m.std_err().max(1e-15), "{} vs {quad}", m.mean);
    }
}
