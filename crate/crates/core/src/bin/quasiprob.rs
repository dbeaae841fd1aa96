use std::path::PathBuf;
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use quasiprob::dataset_io::{fmt_f64, load_dataset, save_dataset};
use quasiprob::estimator::{
    estimate_grid, read_grid_csv, scan_width, significance, GridRow, GridSpec,
};
use quasiprob::gaussian_sim::simulate_quadratures;
use quasiprob::manifest::RunManifest;
use quasiprob::pattern::Kernel;
use quasiprob::{Complex64, Error, FilterProfile, GaussianStateSpec, Oracle, OracleConfig, PhaseGrid, Result};

#[derive(Parser)]
#[command(name = "quasiprob", version, about = "Directly sampled nonclassicality quasiprobabilities")]
struct Cli {
    /// Worker threads (default: all cores). Results do not depend on it.
    #[arg(long, global = true)]
    threads: Option<usize>,
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Subcommand)]
enum Cmd {
    /// Simulate homodyne data for a zero-mean Gaussian state.
    Simulate(SimulateArgs),
    /// Estimate P_Omega on a grid from a dataset.
    Estimate(EstimateArgs),
    /// Significance Sigma(w) over a range of filter widths.
    Scan(ScanArgs),
    /// Reference values for a Gaussian state by direct quadrature.
    Oracle(OracleArgs),
    /// Per-point z-scores of a sampled grid against an oracle grid.
    Compare(CompareArgs),
    /// Dump the filter profile and the pattern kernel for plotting.
    Kernel(KernelArgs),
}

#[derive(Args)]
struct StateArgs {
    #[arg(long)]
    vx: f64,
    #[arg(long)]
    vp: f64,
    /// Rotation of the variance ellipse; pi/2 puts the squeezed quadrature at phi = pi/2.
    #[arg(long, default_value_t = 0.0)]
    squeeze_angle: f64,
}

impl StateArgs {
    fn state(&self) -> Result<GaussianStateSpec> {
        Ok(GaussianStateSpec::new(self.vx, self.vp)?.with_squeeze_angle(self.squeeze_angle))
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct SimulateArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long)]
    phases: usize,
    #[arg(long)]
    n_per_phase: usize,
    #[arg(long)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[group(required = false, multiple = false)]
struct GridArgs {
    /// `re:a,b,s,im:a,b,s` rectangle or a single axis.
    #[arg(long)]
    grid: Option<GridSpec>,
    /// Axis shorthand `im:a,b,step` or `re:a,b,step`.
    #[arg(long)]
    axis: Option<GridSpec>,
}

impl GridArgs {
    fn spec(&self) -> GridSpec {
        self.grid
            .clone()
            .or_else(|| self.axis.clone())
            .unwrap_or_else(GridSpec::default_axis)
    }
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct EstimateArgs {
    #[arg(long = "in")]
    input: PathBuf,
    #[arg(long)]
    width: f64,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1)]
    dither_seed: u64,
    /// Use the dense cubic lookup instead of the sinc series.
    #[arg(long)]
    fast_kernel: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct ScanArgs {
    #[arg(long = "in")]
    input: PathBuf,
    /// `start:stop:step`, inclusive.
    #[arg(long, default_value = "0.7:2.0:0.1")]
    widths: String,
    #[command(flatten)]
    grid: GridArgs,
    #[arg(long, default_value_t = 1)]
    dither_seed: u64,
    #[arg(long)]
    fast_kernel: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct OracleArgs {
    #[command(flatten)]
    state: StateArgs,
    #[arg(long)]
    width: f64,
    #[command(flatten)]
    grid: GridArgs,
    /// Also evaluate the discrete-phase approximation and its systematic error.
    #[arg(long)]
    phases: Option<usize>,
    /// Also evaluate the plain phase-average (Riemann sum) estimator; needs `--phases`.
    #[arg(long)]
    riemann: bool,
    /// Fixed angular node count instead of the automatic one.
    #[arg(long)]
    angular_nodes: Option<usize>,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct CompareArgs {
    #[arg(long)]
    sampled: PathBuf,
    #[arg(long)]
    oracle: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
#[command(allow_negative_numbers = true)]
struct KernelArgs {
    #[arg(long)]
    width: f64,
    #[arg(long, default_value_t = 20.0)]
    xi_max: f64,
    #[arg(long, default_value_t = 0.01)]
    step: f64,
    /// Kernel dump `xi,chi`.
    #[arg(long)]
    out: PathBuf,
    /// Filter dump `b,omega`.
    #[arg(long)]
    filter_out: Option<PathBuf>,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(n) = cli.threads {
        if n == 0 {
            eprintln!("error: --threads must be positive");
            return ExitCode::from(2);
        }
        rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build_global()
            .expect("global pool is configured once");
    }
    let threads = rayon::current_num_threads();
    let started = Instant::now();
    let result = match cli.cmd {
        Cmd::Simulate(a) => simulate(a),
        Cmd::Estimate(a) => estimate(a),
        Cmd::Scan(a) => scan(a),
        Cmd::Oracle(a) => oracle(a),
        Cmd::Compare(a) => compare(a),
        Cmd::Kernel(a) => kernel(a),
    };
    match result.and_then(|(manifest, out)| {
        let mut m = manifest.arg("threads", threads);
        m.wall_time_s = started.elapsed().as_secs_f64();
        m.write_for(&out).map(|_| ())
    }) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}

type Outcome = Result<(RunManifest, PathBuf)>;

fn simulate(a: SimulateArgs) -> Outcome {
    let state = a.state.state()?;
    let grid = PhaseGrid::equispaced(a.phases)?;
    let d = simulate_quadratures(&state, &grid, a.n_per_phase, a.seed)?;
    save_dataset(&d, &a.out)?;
    let m = RunManifest::new("simulate")
        .arg("vx", a.state.vx)
        .arg("vp", a.state.vp)
        .arg("squeeze_angle", a.state.squeeze_angle)
        .arg("phases", a.phases)
        .arg("n_per_phase", a.n_per_phase)
        .arg("out", a.out.display())
        .seed("seed", a.seed);
    let m = RunManifest {
        dataset_hash: Some(d.content_hash()),
        ..m
    };
    Ok((m, a.out))
}

fn check_width(w: f64) -> Result<()> {
    if w.is_finite() && w > 0.0 {
        Ok(())
    } else {
        Err(Error::invalid(format!("width must be positive, got {w}")))
    }
}

fn estimate(a: EstimateArgs) -> Outcome {
    check_width(a.width)?;
    let spec = a.grid.spec();
    let d = load_dataset(&a.input)?;
    let kernel = Kernel::build(a.width, a.fast_kernel)?;
    let grid = estimate_grid(&d, &kernel, &spec, a.dither_seed)?;
    grid.write_csv(&a.out)?;
    match significance(&grid) {
        Ok(s) => println!("sigma {} argmin {} {}", fmt_f64(s.sigma), fmt_f64(s.argmin.re), fmt_f64(s.argmin.im)),
        Err(e) => println!("sigma undefined: {e}"),
    }
    if let Some(p) = grid.minimum() {
        println!(
            "minimum {} std_err {} at {} {}",
            fmt_f64(p.value),
            fmt_f64(p.std_err),
            fmt_f64(p.alpha.re),
            fmt_f64(p.alpha.im)
        );
    }
    let m = RunManifest {
        dataset_hash: Some(d.content_hash()),
        ..RunManifest::new("estimate")
            .arg("in", a.input.display())
            .arg("width", a.width)
            .arg("grid", &spec)
            .arg("fast_kernel", a.fast_kernel)
            .arg("out", a.out.display())
            .seed("dither_seed", a.dither_seed)
    };
    Ok((m, a.out))
}

fn parse_widths(s: &str) -> Result<Vec<f64>> {
    let parts: Vec<f64> = s
        .split(':')
        .map(|p| p.trim().parse::<f64>())
        .collect::<std::result::Result<_, _>>()
        .map_err(|_| Error::invalid(format!("widths must be start:stop:step, got {s:?}")))?;
    match parts[..] {
        [w] => Ok(vec![w]),
        [a, b, step] if step > 0.0 && b >= a => {
            let n = ((b - a) / step + 1e-9).floor() as usize + 1;
            Ok((0..n).map(|i| a + i as f64 * step).collect())
        }
        _ => Err(Error::invalid(format!("widths must be start:stop:step, got {s:?}"))),
    }
}

fn scan(a: ScanArgs) -> Outcome {
    let widths = parse_widths(&a.widths)?;
    let spec = a.grid.spec();
    let d = load_dataset(&a.input)?;
    let result = scan_width(&d, &widths, &spec, a.dither_seed, a.fast_kernel)?;
    result.write_csv(&a.out)?;
    match result.optimum() {
        Some((w, s)) => println!(
            "optimum width {} sigma {} argmin {} {}",
            fmt_f64(w),
            fmt_f64(s.sigma),
            fmt_f64(s.argmin.re),
            fmt_f64(s.argmin.im)
        ),
        None => println!("no width produced a significance"),
    }
    let m = RunManifest {
        dataset_hash: Some(d.content_hash()),
        ..RunManifest::new("scan")
            .arg("in", a.input.display())
            .arg("widths", &a.widths)
            .arg("grid", &spec)
            .arg("fast_kernel", a.fast_kernel)
            .arg("out", a.out.display())
            .seed("dither_seed", a.dither_seed)
    };
    Ok((m, a.out))
}

fn oracle(a: OracleArgs) -> Outcome {
    check_width(a.width)?;
    let state = a.state.state()?;
    if a.riemann && a.phases.is_none() {
        return Err(Error::invalid("--riemann needs --phases"));
    }
    if a.phases == Some(0) {
        return Err(Error::invalid("--phases must be positive"));
    }
    let cfg = OracleConfig {
        angular_nodes: a.angular_nodes,
        ..OracleConfig::default()
    };
    let o = Oracle::new(FilterProfile::new(a.width)?, cfg)?;
    let spec = a.grid.spec();
    let points = spec.points();
    use rayon::prelude::*;
    let rows: Vec<Vec<f64>> = points
        .par_iter()
        .map(|&alpha| {
            let p = o.quasiprob(&state, alpha)?;
            let mut row = vec![alpha.re, alpha.im, p, 0.0];
            if let Some(n) = a.phases {
                let disc = o.discrete_phase(&state, alpha, n)?;
                row.extend([disc, (p - disc).abs()]);
                if a.riemann {
                    row.push(o.riemann_sum(&state, alpha, n)?);
                }
            }
            Ok(row)
        })
        .collect::<Result<_>>()?;
    let mut header = vec!["re_alpha", "im_alpha", "p", "std_err"];
    if a.phases.is_some() {
        header.extend(["p_discrete", "systematic_error"]);
        if a.riemann {
            header.push("p_riemann");
        }
    }
    let mut out = header.join(",");
    out.push('\n');
    for r in &rows {
        out.push_str(&r.iter().map(|&v| fmt_f64(v)).collect::<Vec<_>>().join(","));
        out.push('\n');
    }
    std::fs::write(&a.out, out).map_err(|e| Error::io(&a.out, e))?;
    if a.phases.is_some() {
        let worst = rows.iter().map(|r| r[5]).fold(0.0, f64::max);
        println!("max systematic error {}", fmt_f64(worst));
    }
    let mut m = RunManifest::new("oracle")
        .arg("vx", a.state.vx)
        .arg("vp", a.state.vp)
        .arg("squeeze_angle", a.state.squeeze_angle)
        .arg("width", a.width)
        .arg("grid", &spec)
        .arg("riemann", a.riemann)
        .arg("out", a.out.display());
    if let Some(n) = a.phases {
        m = m.arg("phases", n);
    }
    if let Some(n) = a.angular_nodes {
        m = m.arg("angular_nodes", n);
    }
    Ok((m, a.out))
}

#[derive(Serialize)]
struct ComparePoint {
    re_alpha: f64,
    im_alpha: f64,
    sampled: f64,
    oracle: f64,
    std_err: f64,
    /// `None` when the combined standard error is zero and the values differ.
    z: Option<f64>,
}

#[derive(Serialize)]
struct CompareReport {
    n_points: usize,
    fraction_within_4: f64,
    max_abs_z: Option<f64>,
    points: Vec<ComparePoint>,
}

const ALPHA_MATCH_TOL: f64 = 1e-9;

fn find(rows: &[GridRow], alpha: Complex64) -> Option<&GridRow> {
    rows.iter().find(|r| (r.alpha - alpha).norm() <= ALPHA_MATCH_TOL)
}

fn compare_grids(sampled: &[GridRow], oracle: &[GridRow]) -> Result<CompareReport> {
    let missing_in = |a: &[GridRow], b: &[GridRow]| -> Vec<String> {
        a.iter()
            .filter(|r| find(b, r.alpha).is_none())
            .map(|r| format!("({}, {})", r.alpha.re, r.alpha.im))
            .collect()
    };
    let (m1, m2) = (missing_in(sampled, oracle), missing_in(oracle, sampled));
    if !m1.is_empty() || !m2.is_empty() {
        let mut msg = String::new();
        if !m1.is_empty() {
            msg.push_str(&format!("missing from oracle: {}", m1.join(" ")));
        }
        if !m2.is_empty() {
            if !msg.is_empty() {
                msg.push_str("; ");
            }
            msg.push_str(&format!("missing from sampled: {}", m2.join(" ")));
        }
        return Err(Error::GridMismatch(msg));
    }
    let points: Vec<ComparePoint> = sampled
        .iter()
        .map(|s| {
            let o = find(oracle, s.alpha).expect("checked above");
            let se = (s.std_err * s.std_err + o.std_err * o.std_err).sqrt();
            let diff = s.p - o.p;
            let z = if se > 0.0 {
                Some(diff / se)
            } else if diff == 0.0 {
                Some(0.0)
            } else {
                None
            };
            ComparePoint {
                re_alpha: s.alpha.re,
                im_alpha: s.alpha.im,
                sampled: s.p,
                oracle: o.p,
                std_err: se,
                z,
            }
        })
        .collect();
    let within = points.iter().filter(|p| p.z.is_some_and(|z| z.abs() <= 4.0)).count();
    let max_abs_z = points
        .iter()
        .filter_map(|p| p.z.map(f64::abs))
        .fold(None, |m: Option<f64>, z| Some(m.map_or(z, |m| m.max(z))));
    Ok(CompareReport {
        n_points: points.len(),
        fraction_within_4: if points.is_empty() { 1.0 } else { within as f64 / points.len() as f64 },
        max_abs_z,
        points,
    })
}

fn compare(a: CompareArgs) -> Outcome {
    let report = compare_grids(&read_grid_csv(&a.sampled)?, &read_grid_csv(&a.oracle)?)?;
    let json = serde_json::to_string_pretty(&report).expect("report serializes");
    std::fs::write(&a.out, json).map_err(|e| Error::io(&a.out, e))?;
    println!(
        "points {} within |z|<=4 {} max |z| {}",
        report.n_points,
        fmt_f64(report.fraction_within_4),
        report.max_abs_z.map_or("undefined".into(), fmt_f64)
    );
    let m = RunManifest::new("compare")
        .arg("sampled", a.sampled.display())
        .arg("oracle", a.oracle.display())
        .arg("out", a.out.display());
    Ok((m, a.out))
}

fn kernel(a: KernelArgs) -> Outcome {
    check_width(a.width)?;
    let k = Kernel::build(a.width, false)?;
    k.table().dump_csv(&a.out, a.xi_max, a.step)?;
    let mut m = RunManifest::new("kernel")
        .arg("width", a.width)
        .arg("xi_max", a.xi_max)
        .arg("step", a.step)
        .arg("out", a.out.display())
        .arg("accuracy", k.table().accuracy());
    if let Some(f) = &a.filter_out {
        FilterProfile::new(a.width)?.dump_csv(f)?;
        m = m.arg("filter_out", f.display());
    }
    println!("kernel accuracy {}", fmt_f64(k.table().accuracy()));
    Ok((m, a.out))
}
