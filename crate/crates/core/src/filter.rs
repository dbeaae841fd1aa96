//! The phase-independent nonclassicality filter.
//!
//! `Omega_1(r)` is the autocorrelation of `omega(beta) = exp(-|beta|^4)`,
//! normalized to `Omega_1(0) = 1`; the width-`w` filter is
//! `Omega_w(b) = Omega_1(b / w)`, truncated at `b_cut = 4 w`.

use std::collections::HashMap;
use std::f64::consts::PI;
use std::io::Write;
use std::path::Path;
use std::sync::{Arc, Mutex, OnceLock};

use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::quadrature::Rule;

/// Truncation radius in units of the width.
pub const CUTOFF_IN_WIDTHS: f64 = 4.0;
pub const DEFAULT_FILTER_NODES: usize = 2048;
pub const MIN_FILTER_NODES: usize = 64;
/// Radial cutoff of the autocorrelation integral; `omega(3) ~ 6.6e-36`.
const RHO_MAX: f64 = 3.0;
const MAX_QUADRATURE_ERROR: f64 = 1e-12;

pub fn omega_base(beta_abs: f64) -> f64 {
    let b2 = beta_abs * beta_abs;
    (-(b2 * b2)).exp()
}

/// Tensor-product polar rule for the autocorrelation integral: radius in
/// `[0, 3]`, angle in `[0, pi]` (doubled by symmetry).
#[derive(Debug, Clone)]
pub struct AutocorrelationRule {
    rho: Vec<f64>,
    rho2: Vec<f64>,
    // rho * w_rho * omega(rho) * 2 (angular doubling folded in)
    radial_weight: Vec<f64>,
    cos_theta: Vec<f64>,
    angular_weight: Vec<f64>,
}

impl AutocorrelationRule {
    pub fn new(radial_panels: usize, angular_panels: usize, order: usize) -> Self {
        let radial = Rule::composite_gauss_legendre(0.0, RHO_MAX, radial_panels, order);
        let angular = Rule::composite_gauss_legendre(0.0, PI, angular_panels, order);
        let rho2: Vec<f64> = radial.nodes.iter().map(|r| r * r).collect();
        let radial_weight = radial
            .nodes
            .iter()
            .zip(&radial.weights)
            .map(|(&r, &w)| 2.0 * r * w * omega_base(r))
            .collect();
        AutocorrelationRule {
            rho: radial.nodes,
            rho2,
            radial_weight,
            cos_theta: angular.nodes.iter().map(|t| t.cos()).collect(),
            angular_weight: angular.weights,
        }
    }

    /// Unnormalized `int d^2 beta' omega(beta') omega(beta' + r)`.
    pub fn autocorrelation(&self, r: f64) -> f64 {
        let r2 = r * r;
        let mut total = 0.0;
        for ((&rho, &rho2), &wr) in self.rho.iter().zip(&self.rho2).zip(&self.radial_weight) {
            let a = rho2 + r2;
            let c = 2.0 * rho * r;
            let inner: f64 = self
                .cos_theta
                .iter()
                .zip(&self.angular_weight)
                .map(|(&ct, &wt)| {
                    let d2 = a + c * ct;
                    wt * (-(d2 * d2)).exp()
                })
                .sum();
            total += wr * inner;
        }
        total
    }
}

struct UnitTable {
    values: Vec<f64>,
    normalization: f64,
    max_error: f64,
}

fn fine_rule() -> &'static AutocorrelationRule {
    static RULE: OnceLock<AutocorrelationRule> = OnceLock::new();
    RULE.get_or_init(|| AutocorrelationRule::new(24, 24, 16))
}

fn coarse_rule() -> &'static AutocorrelationRule {
    static RULE: OnceLock<AutocorrelationRule> = OnceLock::new();
    RULE.get_or_init(|| AutocorrelationRule::new(12, 12, 16))
}

/// `Omega_1(r)` by direct quadrature, with the difference to a half-resolution
/// rule as error estimate.
pub fn omega_unit(r: f64) -> (f64, f64) {
    let norm = unit_normalization();
    let fine = fine_rule().autocorrelation(r) / norm;
    let coarse = coarse_rule().autocorrelation(r) / norm;
    (fine, (fine - coarse).abs())
}

fn unit_normalization() -> f64 {
    static NORM: OnceLock<f64> = OnceLock::new();
    *NORM.get_or_init(|| fine_rule().autocorrelation(0.0))
}

// Omega_1 on uniform nodes of [0, 4] does not depend on the width, so one
// table per node count serves every width.
fn unit_table(n_nodes: usize) -> Arc<UnitTable> {
    static CACHE: OnceLock<Mutex<HashMap<usize, Arc<UnitTable>>>> = OnceLock::new();
    let cache = CACHE.get_or_init(|| Mutex::new(HashMap::new()));
    if let Some(t) = cache.lock().unwrap().get(&n_nodes) {
        return t.clone();
    }
    let norm = unit_normalization();
    let step = CUTOFF_IN_WIDTHS / (n_nodes - 1) as f64;
    let pairs: Vec<(f64, f64)> = (0..n_nodes)
        .into_par_iter()
        .map(|i| if i == 0 { (1.0, 0.0) } else { omega_unit(i as f64 * step) })
        .collect();
    let table = Arc::new(UnitTable {
        values: pairs.iter().map(|p| p.0).collect(),
        normalization: norm,
        max_error: pairs.iter().map(|p| p.1).fold(0.0, f64::max),
    });
    cache.lock().unwrap().insert(n_nodes, table.clone());
    table
}

/// Radial table of `Omega_w(b)` on uniform nodes of `[0, b_cut]`.
#[derive(Debug, Clone)]
pub struct FilterProfile {
    width: f64,
    b_cut: f64,
    step: f64,
    values: Arc<Vec<f64>>,
    normalization: f64,
}

pub fn build_filter_profile(width: f64, n_nodes: usize) -> Result<FilterProfile> {
    if !(width.is_finite() && width > 0.0) {
        return Err(Error::invalid(format!("filter width must be positive, got {width}")));
    }
    if n_nodes < MIN_FILTER_NODES {
        return Err(Error::invalid(format!(
            "filter profile needs at least {MIN_FILTER_NODES} nodes, got {n_nodes}"
        )));
    }
    let table = unit_table(n_nodes);
    if table.max_error > MAX_QUADRATURE_ERROR {
        return Err(Error::Accuracy(format!(
            "autocorrelation quadrature error {:.3e} exceeds {MAX_QUADRATURE_ERROR:.0e}",
            table.max_error
        )));
    }
    let b_cut = CUTOFF_IN_WIDTHS * width;
    Ok(FilterProfile {
        width,
        b_cut,
        step: b_cut / (n_nodes - 1) as f64,
        values: Arc::new(table.values.clone()),
        normalization: table.normalization,
    })
}

impl FilterProfile {
    pub fn new(width: f64) -> Result<Self> {
        build_filter_profile(width, DEFAULT_FILTER_NODES)
    }

    pub fn width(&self) -> f64 {
        self.width
    }

    pub fn b_cut(&self) -> f64 {
        self.b_cut
    }

    pub fn n_nodes(&self) -> usize {
        self.values.len()
    }

    pub fn node(&self, i: usize) -> f64 {
        i as f64 * self.step
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    /// The constant `N = int d^2 beta omega(beta)^2`.
    pub fn normalization(&self) -> f64 {
        self.normalization
    }

    /// `Omega_w(b)`: local cubic interpolation inside the cutoff, zero outside.
    pub fn value(&self, b: f64) -> f64 {
        let b = b.abs();
        if b > self.b_cut {
            return 0.0;
        }
        let n = self.values.len();
        let t = b / self.step;
        let nearest = t.round();
        if (t - nearest).abs() <= 4.0 * f64::EPSILON * t.max(1.0) {
            return self.values[(nearest as usize).min(n - 1)];
        }
        // four-point stencil, shifted inward at the ends
        let i = (t.floor() as usize).min(n - 2);
        let start = i.saturating_sub(1).min(n - 4);
        let s = t - start as f64;
        let y = &self.values[start..start + 4];
        let (s0, s1, s2, s3) = (s, s - 1.0, s - 2.0, s - 3.0);
        -y[0] * s1 * s2 * s3 / 6.0 + y[1] * s0 * s2 * s3 / 2.0 - y[2] * s0 * s1 * s3 / 2.0
            + y[3] * s0 * s1 * s2 / 6.0
    }

    /// Writes `b,omega` rows for plotting.
    pub fn dump_csv(&self, path: &Path) -> Result<()> {
        let mut f = std::io::BufWriter::new(std::fs::File::create(path).map_err(|e| Error::io(path, e))?);
        let mut write = || -> std::io::Result<()> {
            writeln!(f, "b,omega")?;
            for (i, v) in self.values.iter().enumerate() {
                writeln!(f, "{},{}", crate::dataset_io::fmt_f64(self.node(i)), crate::dataset_io::fmt_f64(*v))?;
            }
            f.flush()
        };
        write().map_err(|e| Error::io(path, e))
    }
}

/// Free-function form of [`FilterProfile::value`].
pub fn filter_value(profile: &FilterProfile, b: f64) -> f64 {
    profile.value(b)
}
