//! Zero-mean Gaussian states and synthetic balanced-homodyne datasets.

use std::f64::consts::PI;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, StandardNormal};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};

/// Quadrature variances of a zero-mean Gaussian state, vacuum-normalized
/// (the vacuum has unit variance in every quadrature).
///
/// `v_x` is the variance along the ellipse axis at local-oscillator phase
/// `squeeze_angle`, `v_p` the one a quarter turn later:
///
/// `V(phi) = v_x cos^2(phi - squeeze_angle) + v_p sin^2(phi - squeeze_angle)`.
///
/// With the default `squeeze_angle = 0`, `V(0) = v_x` and `V(pi/2) = v_p`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GaussianStateSpec {
    pub v_x: f64,
    pub v_p: f64,
    #[serde(default)]
    pub squeeze_angle: f64,
}

impl GaussianStateSpec {
    /// Validates positivity. States violating the uncertainty relation
    /// `v_x * v_p >= 1` are accepted with a warning.
    pub fn new(v_x: f64, v_p: f64) -> Result<Self> {
        if !(v_x.is_finite() && v_x > 0.0 && v_p.is_finite() && v_p > 0.0) {
            return Err(Error::invalid(format!(
                "quadrature variances must be positive and finite, got v_x={v_x}, v_p={v_p}"
            )));
        }
        if v_x * v_p < 1.0 - 1e-12 {
            log::warn!("v_x * v_p = {} < 1: state violates the uncertainty relation", v_x * v_p);
        }
        Ok(GaussianStateSpec {
            v_x,
            v_p,
            squeeze_angle: 0.0,
        })
    }

    pub fn vacuum() -> Self {
        GaussianStateSpec {
            v_x: 1.0,
            v_p: 1.0,
            squeeze_angle: 0.0,
        }
    }

    /// Isotropic thermal state with variance `v >= 1`.
    pub fn thermal(v: f64) -> Result<Self> {
        if v < 1.0 {
            return Err(Error::invalid(format!("thermal variance must be >= 1, got {v}")));
        }
        Self::new(v, v)
    }

    /// Rotates the ellipse so that `v_x` is the variance at phase `angle`.
    pub fn with_squeeze_angle(mut self, angle: f64) -> Self {
        self.squeeze_angle = angle;
        self
    }

    pub fn validate(&self) -> Result<()> {
        Self::new(self.v_x, self.v_p)?;
        if !self.squeeze_angle.is_finite() {
            return Err(Error::invalid("squeeze angle must be finite"));
        }
        Ok(())
    }

    pub fn quadrature_variance(&self, phi: f64) -> f64 {
        let (s, c) = (phi - self.squeeze_angle).sin_cos();
        self.v_x * c * c + self.v_p * s * s
    }

    pub fn is_isotropic(&self) -> bool {
        self.v_x == self.v_p
    }
}

/// Variance of the quadrature measured at local-oscillator phase `phi`.
pub fn quadrature_variance(state: &GaussianStateSpec, phi: f64) -> f64 {
    state.quadrature_variance(phi)
}

/// Phase angles at which quadratures were recorded, strictly increasing in `[0, pi)`.
#[derive(Debug, Clone, PartialEq)]
pub struct PhaseGrid {
    phases: Vec<f64>,
    equispaced: bool,
}

const EQUISPACED_TOL: f64 = 1e-12;

impl PhaseGrid {
    /// `phi_k = k pi / n` for `k = 0..n`.
    pub fn equispaced(n: usize) -> Result<Self> {
        if n == 0 {
            return Err(Error::invalid("phase grid needs at least one phase"));
        }
        let phases = (0..n).map(|k| k as f64 * PI / n as f64).collect();
        Ok(PhaseGrid {
            phases,
            equispaced: true,
        })
    }

    pub fn from_phases(phases: Vec<f64>) -> Result<Self> {
        if phases.is_empty() {
            return Err(Error::invalid("phase grid needs at least one phase"));
        }
        for (k, &p) in phases.iter().enumerate() {
            if !(p.is_finite() && (0.0..PI).contains(&p)) {
                return Err(Error::invalid(format!("phase {p} (index {k}) is outside [0, pi)")));
            }
            if k > 0 && p <= phases[k - 1] {
                return Err(Error::invalid("phases must be strictly increasing"));
            }
        }
        let n = phases.len() as f64;
        let equispaced = phases
            .iter()
            .enumerate()
            .all(|(k, &p)| (p - k as f64 * PI / n).abs() <= EQUISPACED_TOL);
        Ok(PhaseGrid { phases, equispaced })
    }

    pub fn n_phases(&self) -> usize {
        self.phases.len()
    }

    pub fn phases(&self) -> &[f64] {
        &self.phases
    }

    pub fn phase(&self, k: usize) -> f64 {
        self.phases[k]
    }

    pub fn is_equispaced(&self) -> bool {
        self.equispaced
    }

    /// Index of the grid phase within `tol` of `phi`, if any.
    pub fn index_of(&self, phi: f64, tol: f64) -> Option<usize> {
        let pos = self.phases.partition_point(|&p| p < phi);
        [pos.checked_sub(1), Some(pos)]
            .into_iter()
            .flatten()
            .filter(|&k| k < self.phases.len())
            .find(|&k| (self.phases[k] - phi).abs() <= tol)
    }
}

/// One recorded quadrature value and the index of its phase in the grid.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Sample {
    pub phase_index: u32,
    pub x: f64,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Source {
    Simulated,
    External,
}

/// Phase-tagged quadrature samples. Immutable once built.
#[derive(Debug, Clone, PartialEq)]
pub struct QuadratureDataset {
    phase_grid: PhaseGrid,
    samples: Vec<Sample>,
    seed: Option<u64>,
    source: Source,
    state: Option<GaussianStateSpec>,
}

impl QuadratureDataset {
    pub fn new(
        phase_grid: PhaseGrid,
        samples: Vec<Sample>,
        seed: Option<u64>,
        source: Source,
        state: Option<GaussianStateSpec>,
    ) -> Result<Self> {
        let n = phase_grid.n_phases();
        if let Some(bad) = samples.iter().find(|s| s.phase_index as usize >= n) {
            return Err(Error::invalid(format!(
                "sample phase index {} out of range for {n} phases",
                bad.phase_index
            )));
        }
        Ok(QuadratureDataset {
            phase_grid,
            samples,
            seed,
            source,
            state,
        })
    }

    pub fn phase_grid(&self) -> &PhaseGrid {
        &self.phase_grid
    }

    pub fn samples(&self) -> &[Sample] {
        &self.samples
    }

    pub fn len(&self) -> usize {
        self.samples.len()
    }

    pub fn is_empty(&self) -> bool {
        self.samples.is_empty()
    }

    pub fn seed(&self) -> Option<u64> {
        self.seed
    }

    pub fn source(&self) -> Source {
        self.source
    }

    pub fn state(&self) -> Option<&GaussianStateSpec> {
        self.state.as_ref()
    }

    pub fn counts_per_phase(&self) -> Vec<usize> {
        let mut counts = vec![0; self.phase_grid.n_phases()];
        for s in &self.samples {
            counts[s.phase_index as usize] += 1;
        }
        counts
    }

    /// Quadrature values recorded at phase `k`, in dataset order.
    pub fn phase_values(&self, k: usize) -> impl Iterator<Item = f64> + '_ {
        self.samples
            .iter()
            .filter(move |s| s.phase_index as usize == k)
            .map(|s| s.x)
    }

    /// Keeps the first `n` samples of every phase, preserving order.
    pub fn take_per_phase(&self, n: usize) -> Self {
        let mut seen = vec![0usize; self.phase_grid.n_phases()];
        let samples = self
            .samples
            .iter()
            .filter(|s| {
                let c = &mut seen[s.phase_index as usize];
                *c += 1;
                *c <= n
            })
            .copied()
            .collect();
        QuadratureDataset {
            samples,
            ..self.clone()
        }
    }

    /// SHA-256 over the phases and the little-endian bits of every sample.
    pub fn content_hash(&self) -> String {
        let mut h = Sha256::new();
        for p in self.phase_grid.phases() {
            h.update(p.to_le_bytes());
        }
        for s in &self.samples {
            h.update(s.phase_index.to_le_bytes());
            h.update(s.x.to_le_bytes());
        }
        hex::encode(h.finalize())
    }
}

/// Draws `n_per_phase` i.i.d. samples from `N(0, V(phi_k))` at every grid phase.
///
/// Phase `k` uses its own ChaCha8 stream (`seed`, stream `k`), so the output
/// does not depend on how phases are scheduled across threads.
pub fn simulate_quadratures(
    state: &GaussianStateSpec,
    grid: &PhaseGrid,
    n_per_phase: usize,
    seed: u64,
) -> Result<QuadratureDataset> {
    state.validate()?;
    if n_per_phase == 0 {
        return Err(Error::invalid("n_per_phase must be at least 1"));
    }
    let blocks: Vec<Vec<Sample>> = (0..grid.n_phases())
        .into_par_iter()
        .map(|k| {
            let sd = state.quadrature_variance(grid.phase(k)).sqrt();
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(k as u64);
            (0..n_per_phase)
                .map(|_| {
                    let z: f64 = StandardNormal.sample(&mut rng);
                    Sample {
                        phase_index: k as u32,
                        x: sd * z,
                    }
                })
                .collect()
        })
        .collect();
    QuadratureDataset::new(
        grid.clone(),
        blocks.concat(),
        Some(seed),
        Source::Simulated,
        Some(*state),
    )
}
