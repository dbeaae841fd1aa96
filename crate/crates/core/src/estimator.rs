//! Sample-mean estimates of `P_Omega(alpha)`, the significance `Sigma(w)`
//! and the filter-width scan.

use std::fmt;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use num_complex::Complex64;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::dataset_io::fmt_f64;
use crate::error::{Error, Result};
use crate::gaussian_sim::QuadratureDataset;
use crate::pattern::{dither_phase, dither_stream, Kernel, PatternKernel};
use crate::reduce::blocked_moments;

/// Inclusive range `start, start + step, ..., stop`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct AxisRange {
    pub start: f64,
    pub stop: f64,
    pub step: f64,
}

impl AxisRange {
    pub fn new(start: f64, stop: f64, step: f64) -> Result<Self> {
        if !(start.is_finite() && stop.is_finite() && step.is_finite()) || step <= 0.0 || stop < start {
            return Err(Error::invalid(format!("bad range {start},{stop},{step}")));
        }
        Ok(AxisRange { start, stop, step })
    }

    pub fn len(&self) -> usize {
        ((self.stop - self.start) / self.step + 1e-9).floor() as usize + 1
    }

    pub fn is_empty(&self) -> bool {
        false
    }

    pub fn values(&self) -> impl Iterator<Item = f64> + '_ {
        (0..self.len()).map(move |i| self.start + i as f64 * self.step)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Axis {
    Re,
    Im,
}

/// Phase-space points to evaluate.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum GridSpec {
    /// Cross-section along one axis through the origin.
    Axis { axis: Axis, range: AxisRange },
    /// Rectangle, row-major: the real part is the outer (row) index.
    Rect { re: AxisRange, im: AxisRange },
    Points(Vec<Complex64Repr>),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Complex64Repr {
    pub re: f64,
    pub im: f64,
}

impl GridSpec {
    /// `Im(alpha)` in `[-3, 3]` with step 0.05 along `Re(alpha) = 0` (121 points).
    pub fn default_axis() -> Self {
        GridSpec::Axis {
            axis: Axis::Im,
            range: AxisRange {
                start: -3.0,
                stop: 3.0,
                step: 0.05,
            },
        }
    }

    /// `Re, Im` in `[-3, 3]` with step 0.1 (3721 points).
    pub fn default_rect() -> Self {
        let r = AxisRange {
            start: -3.0,
            stop: 3.0,
            step: 0.1,
        };
        GridSpec::Rect { re: r, im: r }
    }

    pub fn points(&self) -> Vec<Complex64> {
        match self {
            GridSpec::Axis { axis: Axis::Re, range } => range.values().map(|v| Complex64::new(v, 0.0)).collect(),
            GridSpec::Axis { axis: Axis::Im, range } => range.values().map(|v| Complex64::new(0.0, v)).collect(),
            GridSpec::Rect { re, im } => re
                .values()
                .flat_map(|r| im.values().map(move |i| Complex64::new(r, i)))
                .collect(),
            GridSpec::Points(p) => p.iter().map(|c| Complex64::new(c.re, c.im)).collect(),
        }
    }

    pub fn from_points(points: &[Complex64]) -> Self {
        GridSpec::Points(points.iter().map(|c| Complex64Repr { re: c.re, im: c.im }).collect())
    }
}

fn parse_range(s: &str) -> Result<AxisRange> {
    let v: Vec<f64> = s
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::invalid(format!("range `{s}` must be start,stop,step")))?;
    match v.as_slice() {
        [a, b, c] => AxisRange::new(*a, *b, *c),
        _ => Err(Error::invalid(format!("range `{s}` must be start,stop,step"))),
    }
}

impl FromStr for GridSpec {
    type Err = Error;

    /// `im:a,b,step`, `re:a,b,step`, or `re:a,b,step,im:a,b,step`.
    fn from_str(s: &str) -> Result<Self> {
        let s = s.trim();
        if let Some(rest) = s.strip_prefix("re:") {
            if let Some((re, im)) = rest.split_once(",im:") {
                return Ok(GridSpec::Rect {
                    re: parse_range(re)?,
                    im: parse_range(im)?,
                });
            }
            return Ok(GridSpec::Axis {
                axis: Axis::Re,
                range: parse_range(rest)?,
            });
        }
        if let Some(rest) = s.strip_prefix("im:") {
            return Ok(GridSpec::Axis {
                axis: Axis::Im,
                range: parse_range(rest)?,
            });
        }
        Err(Error::invalid(format!("unrecognised grid spec `{s}`")))
    }
}

impl fmt::Display for GridSpec {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let r = |r: &AxisRange| format!("{},{},{}", r.start, r.stop, r.step);
        match self {
            GridSpec::Axis { axis: Axis::Re, range } => write!(f, "re:{}", r(range)),
            GridSpec::Axis { axis: Axis::Im, range } => write!(f, "im:{}", r(range)),
            GridSpec::Rect { re, im } => write!(f, "re:{},im:{}", r(re), r(im)),
            GridSpec::Points(p) => write!(f, "points[{}]", p.len()),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PointEstimate {
    pub alpha: Complex64,
    pub value: f64,
    pub std_err: f64,
    pub n: usize,
}

/// Quadrature samples with their dithered phases, reused for every `alpha`.
///
/// The `i`-th sample recorded at phase `k` gets the `i`-th draw of the dither
/// stream `(dither_seed, k)`.
#[derive(Debug, Clone)]
pub struct PreparedSamples {
    x: Vec<f64>,
    cos_phi: Vec<f64>,
    sin_phi: Vec<f64>,
    dither_seed: u64,
}

impl PreparedSamples {
    pub fn new(dataset: &QuadratureDataset, dither_seed: u64) -> Result<Self> {
        if dataset.is_empty() {
            return Err(Error::EmptyDataset);
        }
        let grid = dataset.phase_grid();
        if !grid.is_equispaced() {
            return Err(Error::NonEquispacedGrid);
        }
        let n_phases = grid.n_phases();
        let mut streams: Vec<_> = (0..n_phases).map(|k| dither_stream(dither_seed, k)).collect();
        let n = dataset.len();
        let mut prepared = PreparedSamples {
            x: Vec::with_capacity(n),
            cos_phi: Vec::with_capacity(n),
            sin_phi: Vec::with_capacity(n),
            dither_seed,
        };
        for s in dataset.samples() {
            let k = s.phase_index as usize;
            let phi = dither_phase(grid.phase(k), n_phases, &mut streams[k]);
            let (sn, cs) = phi.sin_cos();
            prepared.x.push(s.x);
            prepared.cos_phi.push(cs);
            prepared.sin_phi.push(sn);
        }
        Ok(prepared)
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dither_seed(&self) -> u64 {
        self.dither_seed
    }

    /// Sample mean and standard error of the pattern function at `alpha`.
    ///
    /// `x + 2|alpha| sin(arg(alpha) - phi - pi/2) = x - 2 (Re(alpha) cos(phi) + Im(alpha) sin(phi))`.
    pub fn estimate<K: PatternKernel + ?Sized>(&self, kernel: &K, alpha: Complex64) -> PointEstimate {
        let (ar, ai) = (2.0 * alpha.re, 2.0 * alpha.im);
        let m = blocked_moments(self.x.len(), |i| {
            kernel.chi(self.x[i] - (ar * self.cos_phi[i] + ai * self.sin_phi[i]))
        });
        PointEstimate {
            alpha,
            value: m.mean,
            std_err: m.std_err(),
            n: m.n,
        }
    }
}

pub fn estimate_point<K: PatternKernel + ?Sized>(
    dataset: &QuadratureDataset,
    kernel: &K,
    alpha: Complex64,
    dither_seed: u64,
) -> Result<PointEstimate> {
    Ok(PreparedSamples::new(dataset, dither_seed)?.estimate(kernel, alpha))
}

/// Estimates on a grid; one point per task, results in grid order.
#[derive(Debug, Clone)]
pub struct QuasiprobGrid {
    pub spec: GridSpec,
    pub points: Vec<PointEstimate>,
    pub width: f64,
    pub dither_seed: u64,
}

pub fn estimate_grid<K: PatternKernel + ?Sized>(
    dataset: &QuadratureDataset,
    kernel: &K,
    spec: &GridSpec,
    dither_seed: u64,
) -> Result<QuasiprobGrid> {
    let prepared = PreparedSamples::new(dataset, dither_seed)?;
    Ok(estimate_grid_prepared(&prepared, kernel, spec))
}

pub fn estimate_grid_prepared<K: PatternKernel + ?Sized>(
    prepared: &PreparedSamples,
    kernel: &K,
    spec: &GridSpec,
) -> QuasiprobGrid {
    let points = spec
        .points()
        .into_par_iter()
        .map(|alpha| prepared.estimate(kernel, alpha))
        .collect();
    QuasiprobGrid {
        spec: spec.clone(),
        points,
        width: kernel.width(),
        dither_seed: prepared.dither_seed,
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Significance {
    pub sigma: f64,
    pub argmin: Complex64,
}

/// `Sigma = min_alpha P(alpha) / sigma(P(alpha))`; first point wins ties.
pub fn significance(grid: &QuasiprobGrid) -> Result<Significance> {
    significance_of(&grid.points)
}

pub fn significance_of(points: &[PointEstimate]) -> Result<Significance> {
    let mut best: Option<Significance> = None;
    for p in points {
        if p.std_err <= 0.0 || !p.std_err.is_finite() {
            return Err(Error::ZeroStdErr {
                re: p.alpha.re,
                im: p.alpha.im,
            });
        }
        let z = p.value / p.std_err;
        if best.is_none_or(|b| z < b.sigma) {
            best = Some(Significance {
                sigma: z,
                argmin: p.alpha,
            });
        }
    }
    best.ok_or_else(|| Error::invalid("significance of an empty grid"))
}

impl QuasiprobGrid {
    /// Point with the smallest estimate; first wins ties.
    pub fn minimum(&self) -> Option<&PointEstimate> {
        self.points
            .iter()
            .fold(None, |acc: Option<&PointEstimate>, p| match acc {
                Some(a) if a.value <= p.value => Some(a),
                _ => Some(p),
            })
    }

    pub fn write_csv(&self, path: &Path) -> Result<()> {
        write_grid_csv(path, self.points.iter().map(|p| (p.alpha, p.value, p.std_err)))
    }
}

/// Writes `re_alpha,im_alpha,p,std_err` rows.
pub fn write_grid_csv(path: &Path, rows: impl Iterator<Item = (Complex64, f64, f64)>) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let go = || -> std::io::Result<()> {
        writeln!(w, "re_alpha,im_alpha,p,std_err")?;
        for (a, v, e) in rows {
            writeln!(w, "{},{},{},{}", fmt_f64(a.re), fmt_f64(a.im), fmt_f64(v), fmt_f64(e))?;
        }
        w.flush()
    };
    go().map_err(|e| Error::io(path, e))
}

/// A row of a grid CSV.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GridRow {
    pub alpha: Complex64,
    pub p: f64,
    pub std_err: f64,
}

/// Reads a `re_alpha,im_alpha,p,std_err` file; extra trailing columns are ignored.
pub fn read_grid_csv(path: &Path) -> Result<Vec<GridRow>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let headers = rdr.headers().map_err(|e| Error::io(path, e.into()))?.clone();
    let expected = ["re_alpha", "im_alpha", "p", "std_err"];
    if headers.len() < 4 || headers.iter().zip(expected).any(|(h, e)| h != e) {
        return Err(Error::Parse {
            path: path.to_path_buf(),
            line: 1,
            message: "expected header re_alpha,im_alpha,p,std_err".into(),
        });
    }
    let mut rows = Vec::new();
    for rec in rdr.records() {
        let rec = rec.map_err(|e| Error::io(path, e.into()))?;
        let line = rec.position().map_or(0, |p| p.line());
        let num = |i: usize| {
            rec.get(i).and_then(|s| s.parse::<f64>().ok()).ok_or_else(|| Error::Parse {
                path: path.to_path_buf(),
                line,
                message: format!("column {} is not numeric", i + 1),
            })
        };
        rows.push(GridRow {
            alpha: Complex64::new(num(0)?, num(1)?),
            p: num(2)?,
            std_err: num(3)?,
        });
    }
    Ok(rows)
}

#[derive(Debug, Clone)]
pub struct WidthScanEntry {
    pub width: f64,
    pub result: std::result::Result<Significance, String>,
}

#[derive(Debug, Clone)]
pub struct WidthScanResult {
    pub entries: Vec<WidthScanEntry>,
}

impl WidthScanResult {
    /// Entry with the most negative `Sigma`; the smaller width wins ties.
    pub fn optimum(&self) -> Option<(f64, Significance)> {
        let mut best: Option<(f64, Significance)> = None;
        for e in &self.entries {
            if let Ok(s) = &e.result {
                let better = match best {
                    None => true,
                    Some((w, b)) => s.sigma < b.sigma || (s.sigma == b.sigma && e.width < w),
                };
                if better {
                    best = Some((e.width, *s));
                }
            }
        }
        best
    }

    /// Writes `w,sigma,argmin_re,argmin_im,note`; failed widths get NaN and a note.
    pub fn write_csv(&self, path: &Path) -> Result<()> {
        let file = File::create(path).map_err(|e| Error::io(path, e))?;
        let mut w = BufWriter::new(file);
        let mut go = || -> std::io::Result<()> {
            writeln!(w, "w,sigma,argmin_re,argmin_im,note")?;
            for e in &self.entries {
                match &e.result {
                    Ok(s) => writeln!(
                        w,
                        "{},{},{},{},",
                        fmt_f64(e.width),
                        fmt_f64(s.sigma),
                        fmt_f64(s.argmin.re),
                        fmt_f64(s.argmin.im)
                    )?,
                    Err(msg) => writeln!(w, "{},NaN,NaN,NaN,\"{}\"", fmt_f64(e.width), msg.replace('"', "'"))?,
                }
            }
            w.flush()
        };
        go().map_err(|e| Error::io(path, e))
    }
}

/// `Sigma(w)` for every width; each builds its own filter and kernel.
/// Dataset-level problems abort the scan, per-width failures are recorded.
pub fn scan_width(
    dataset: &QuadratureDataset,
    widths: &[f64],
    spec: &GridSpec,
    dither_seed: u64,
    fast_kernel: bool,
) -> Result<WidthScanResult> {
    let prepared = PreparedSamples::new(dataset, dither_seed)?;
    let entries = widths
        .iter()
        .map(|&w| {
            let result = Kernel::build(w, fast_kernel)
                .and_then(|k| significance(&estimate_grid_prepared(&prepared, &k, spec)))
                .map_err(|e| e.to_string());
            if let Err(msg) = &result {
                log::warn!("width {w}: {msg}");
            }
            WidthScanEntry { width: w, result }
        })
        .collect();
    Ok(WidthScanResult { entries })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::gaussian_sim::{simulate_quadratures, GaussianStateSpec, PhaseGrid, Sample, Source};
    use crate::pattern::ChiTable;
    use std::sync::OnceLock;

    fn kernel() -> &'static ChiTable {
        static T: OnceLock<ChiTable> = OnceLock::new();
        T.get_or_init(|| ChiTable::new(1.3).unwrap())
    }

    fn small_dataset() -> QuadratureDataset {
        let s = GaussianStateSpec::new(0.36, 5.28).unwrap();
        simulate_quadratures(&s, &PhaseGrid::equispaced(21).unwrap(), 200, 3).unwrap()
    }

    #[test]
    fn grid_spec_parsing_and_counts() {
        let g: GridSpec = "im:-3,3,0.05".parse().unwrap();
        assert_eq!(g.points().len(), 121);
        assert_eq!(g.points()[0], Complex64::new(0.0, -3.0));
        let r: GridSpec = "re:-3,3,0.1,im:-3,3,0.1".parse().unwrap();
        assert_eq!(r.points().len(), 3721);
        assert_eq!(r.to_string(), "re:-3,3,0.1,im:-3,3,0.1");
        assert_eq!(GridSpec::default_rect().points().len(), 3721);
        assert!("im:1,0,0.1".parse::<GridSpec>().is_err());
        assert!("xx:1".parse::<GridSpec>().is_err());
        assert!("im:0,1,-0.1".parse::<GridSpec>().is_err());
    }

    #[test]
    fn rect_points_are_unique_and_row_major() {
        let g: GridSpec = "re:0,0.2,0.1,im:0,0.1,0.1".parse().unwrap();
        let p = g.points();
        assert_eq!(p.len(), 6);
        assert_eq!(p[1], Complex64::new(0.0, 0.1));
        assert_eq!(p[2].re, 0.1);
    }

    #[test]
    fn single_point_grid_equals_point_estimate() {
        let d = small_dataset();
        let alpha = Complex64::new(0.2, 0.9);
        let p = estimate_point(&d, kernel(), alpha, 8).unwrap();
        let g = estimate_grid(&d, kernel(), &GridSpec::from_points(&[alpha]), 8).unwrap();
        assert_eq!(g.points, vec![p]);
        assert_eq!(p.n, d.len());
        assert!(p.std_err > 0.0);
    }

    #[test]
    fn estimate_matches_literal_pattern_mean() {
        let d = small_dataset();
        let alpha = Complex64::new(-0.4, 0.7);
        let p = estimate_point(&d, kernel(), alpha, 2).unwrap();
        let grid = d.phase_grid();
        let mut streams: Vec<_> = (0..21).map(|k| dither_stream(2, k)).collect();
        let vals: Vec<f64> = d
            .samples()
            .iter()
            .map(|s| {
                let k = s.phase_index as usize;
                let phi = dither_phase(grid.phase(k), 21, &mut streams[k]);
                crate::pattern::pattern_value(kernel(), s.x, phi, alpha)
            })
            .collect();
        let mean = vals.iter().sum::<f64>() / vals.len() as f64;
        assert!((p.value - mean).abs() < 1e-12);
    }

    #[test]
    fn empty_and_uneven_datasets_are_rejected() {
        let empty = QuadratureDataset::new(PhaseGrid::equispaced(3).unwrap(), vec![], None, Source::External, None)
            .unwrap();
        assert!(matches!(
            estimate_point(&empty, kernel(), Complex64::new(0.0, 0.0), 1),
            Err(Error::EmptyDataset)
        ));
        let uneven = QuadratureDataset::new(
            PhaseGrid::from_phases(vec![0.0, 0.3, 2.0]).unwrap(),
            vec![Sample { phase_index: 1, x: 0.1 }],
            None,
            Source::External,
            None,
        )
        .unwrap();
        assert!(matches!(
            estimate_point(&uneven, kernel(), Complex64::new(0.0, 0.0), 1),
            Err(Error::NonEquispacedGrid)
        ));
    }

    #[test]
    fn significance_rules() {
        let pts = |vals: &[(f64, f64)]| -> Vec<PointEstimate> {
            vals.iter()
                .enumerate()
                .map(|(i, &(v, e))| PointEstimate {
                    alpha: Complex64::new(i as f64, 0.0),
                    value: v,
                    std_err: e,
                    n: 10,
                })
                .collect()
        };
        let s = significance_of(&pts(&[(0.5, 0.1), (0.2, 0.1), (0.9, 0.1)])).unwrap();
        assert!(s.sigma > 0.0);
        assert_eq!(s.argmin.re, 1.0);
        // tie: first in order wins
        let t = significance_of(&pts(&[(0.3, 0.1), (-0.2, 0.1), (-0.2, 0.1)])).unwrap();
        assert_eq!(t.argmin.re, 1.0);
        assert!(matches!(
            significance_of(&pts(&[(0.3, 0.1), (0.1, 0.0)])),
            Err(Error::ZeroStdErr { .. })
        ));
    }

    #[test]
    fn one_sample_gives_zero_std_err() {
        let d = simulate_quadratures(&GaussianStateSpec::vacuum(), &PhaseGrid::equispaced(1).unwrap(), 1, 1).unwrap();
        let g = estimate_grid(&d, kernel(), &"im:0,0.1,0.1".parse().unwrap(), 1).unwrap();
        assert!(matches!(significance(&g), Err(Error::ZeroStdErr { .. })));
    }

    #[test]
    fn scan_singleton_and_failures() {
        let d = small_dataset();
        let spec: GridSpec = "im:0,1,0.5".parse().unwrap();
        let one = scan_width(&d, &[1.3], &spec, 1, true).unwrap();
        assert_eq!(one.optimum().unwrap().0, 1.3);
        let with_bad = scan_width(&d, &[-1.0, 1.3], &spec, 1, true).unwrap();
        assert!(with_bad.entries[0].result.is_err());
        assert_eq!(with_bad.optimum().unwrap().0, 1.3);
    }

    #[test]
    fn optimum_prefers_smaller_width_on_ties() {
        let s = Significance {
            sigma: -5.0,
            argmin: Complex64::new(0.0, 0.0),
        };
        let r = WidthScanResult {
            entries: vec![
                WidthScanEntry { width: 1.4, result: Ok(s) },
                WidthScanEntry { width: 1.2, result: Ok(s) },
            ],
        };
        assert_eq!(r.optimum().unwrap().0, 1.2);
    }

    #[test]
    fn grid_csv_round_trip() {
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("g.csv");
        let d = small_dataset();
        let g = estimate_grid(&d, kernel(), &"im:-1,1,0.5".parse().unwrap(), 4).unwrap();
        g.write_csv(&path).unwrap();
        let rows = read_grid_csv(&path).unwrap();
        assert_eq!(rows.len(), 5);
        for (r, p) in rows.iter().zip(&g.points) {
            assert_eq!(r.alpha, p.alpha);
            assert_eq!(r.p, p.value);
            assert_eq!(r.std_err, p.std_err);
        }
    }
}
