//! Dataset files: a `phi_rad,x` CSV plus a `<name>.meta.json` sidecar.

use std::f64::consts::PI;
use std::fs::File;
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::gaussian_sim::{GaussianStateSpec, PhaseGrid, QuadratureDataset, Sample, Source};

/// Phases in the CSV must match a sidecar phase to this tolerance.
pub const PHASE_MATCH_TOL: f64 = 1e-12;

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct DatasetMeta {
    pub n_phases: usize,
    pub phases: Vec<f64>,
    #[serde(default)]
    pub n_per_phase: Option<usize>,
    #[serde(default)]
    pub per_phase_counts: Option<Vec<usize>>,
    #[serde(default)]
    pub seed: Option<u64>,
    #[serde(default)]
    pub state: Option<GaussianStateSpec>,
    pub source: Source,
}

/// `data/sq.csv` -> `data/sq.meta.json`.
pub fn sidecar_path(path: &Path) -> PathBuf {
    path.with_extension("meta.json")
}

/// Formats with 17 significant digits, enough to round-trip any f64.
pub fn fmt_f64(v: f64) -> String {
    if v.is_nan() {
        "NaN".to_string()
    } else {
        format!("{v:.16e}")
    }
}

pub fn save_dataset(dataset: &QuadratureDataset, path: &Path) -> Result<()> {
    let grid = dataset.phase_grid();
    let counts = dataset.counts_per_phase();
    let uniform = counts.first().copied().filter(|c| counts.iter().all(|x| x == c));
    let meta = DatasetMeta {
        n_phases: grid.n_phases(),
        phases: grid.phases().to_vec(),
        n_per_phase: uniform,
        per_phase_counts: Some(counts),
        seed: dataset.seed(),
        state: dataset.state().copied(),
        source: dataset.source(),
    };

    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = csv::Writer::from_writer(BufWriter::new(file));
    let csv_err = |e: csv::Error| Error::io(path, e.into());
    w.write_record(["phi_rad", "x"]).map_err(csv_err)?;
    let phase_text: Vec<String> = grid.phases().iter().map(|&p| fmt_f64(p)).collect();
    for s in dataset.samples() {
        w.write_record([phase_text[s.phase_index as usize].as_str(), fmt_f64(s.x).as_str()])
            .map_err(csv_err)?;
    }
    w.flush().map_err(|e| Error::io(path, e))?;

    let side = sidecar_path(path);
    let mut f = BufWriter::new(File::create(&side).map_err(|e| Error::io(&side, e))?);
    serde_json::to_writer_pretty(&mut f, &meta).map_err(|e| Error::io(&side, e.into()))?;
    f.write_all(b"\n").map_err(|e| Error::io(&side, e))?;
    f.flush().map_err(|e| Error::io(&side, e))?;
    Ok(())
}

fn parse_err(path: &Path, line: u64, message: impl Into<String>) -> Error {
    Error::Parse {
        path: path.to_path_buf(),
        line,
        message: message.into(),
    }
}

fn read_rows(path: &Path) -> Result<Vec<(u64, f64, f64)>> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(false)
        .trim(csv::Trim::All)
        .from_reader(BufReader::new(file));
    let mut records = rdr.records();
    match records.next() {
        Some(Ok(h)) if h.len() == 2 && &h[0] == "phi_rad" && &h[1] == "x" => {}
        Some(Ok(h)) => {
            return Err(parse_err(
                path,
                1,
                format!("expected header `phi_rad,x`, found `{}`", h.iter().collect::<Vec<_>>().join(",")),
            ))
        }
        Some(Err(e)) => return Err(parse_err(path, 1, e.to_string())),
        None => return Err(parse_err(path, 1, "missing header `phi_rad,x`")),
    }
    let mut rows = Vec::new();
    for rec in records {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(path, line, e.to_string())
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        if rec.len() != 2 {
            return Err(parse_err(path, line, format!("expected 2 fields, found {}", rec.len())));
        }
        let num = |i: usize| {
            rec[i]
                .parse::<f64>()
                .ok()
                .filter(|v| v.is_finite())
                .ok_or_else(|| parse_err(path, line, format!("non-numeric value `{}`", &rec[i])))
        };
        let (phi, x) = (num(0)?, num(1)?);
        if !(0.0..PI).contains(&phi) {
            return Err(parse_err(path, line, format!("phase {phi} outside [0, pi)")));
        }
        rows.push((line, phi, x));
    }
    Ok(rows)
}

/// Loads a dataset. Without a sidecar the phase grid is inferred from the
/// distinct phases in the file and the source is marked external.
pub fn load_dataset(path: &Path) -> Result<QuadratureDataset> {
    let rows = read_rows(path)?;
    let side = sidecar_path(path);
    let meta: Option<DatasetMeta> = if side.exists() {
        let f = File::open(&side).map_err(|e| Error::io(&side, e))?;
        Some(serde_json::from_reader(BufReader::new(f)).map_err(|e| Error::Metadata {
            path: side.clone(),
            message: e.to_string(),
        })?)
    } else {
        log::info!("no sidecar at {}; inferring phase grid from data", side.display());
        None
    };

    let grid = match &meta {
        Some(m) => {
            if m.n_phases != m.phases.len() {
                return Err(Error::Metadata {
                    path: side.clone(),
                    message: format!("n_phases = {} but {} phases listed", m.n_phases, m.phases.len()),
                });
            }
            PhaseGrid::from_phases(m.phases.clone()).map_err(|e| Error::Metadata {
                path: side.clone(),
                message: e.to_string(),
            })?
        }
        None => {
            let mut phases: Vec<f64> = rows.iter().map(|r| r.1).collect();
            phases.sort_by(f64::total_cmp);
            phases.dedup_by(|a, b| (*a - *b).abs() <= PHASE_MATCH_TOL);
            if phases.is_empty() {
                return Err(parse_err(path, 1, "no samples and no sidecar: phase grid unknown"));
            }
            PhaseGrid::from_phases(phases)?
        }
    };

    let mut samples = Vec::with_capacity(rows.len());
    for (line, phi, x) in rows {
        let k = grid
            .index_of(phi, PHASE_MATCH_TOL)
            .ok_or_else(|| parse_err(path, line, format!("phase {phi} does not match any sidecar phase")))?;
        samples.push(Sample {
            phase_index: k as u32,
            x,
        });
    }

    let (seed, source, state) = match &meta {
        Some(m) => (m.seed, m.source, m.state),
        None => (None, Source::External, None),
    };
    let dataset = QuadratureDataset::new(grid, samples, seed, source, state)?;
    if let Some(counts) = meta.as_ref().and_then(|m| m.per_phase_counts.as_ref()) {
        if *counts != dataset.counts_per_phase() {
            return Err(Error::Metadata {
                path: side,
                message: "per_phase_counts do not match the CSV rows".into(),
            });
        }
    }
    Ok(dataset)
}
