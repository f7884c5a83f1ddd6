use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use serde::Serialize;
use serde_json::Value;

use symnoise_cli::render::{Heatmap, HeatmapScale};
use symnoise_cli::scenario::{run_scenario, LongTime, RunOptions, ScenarioConfig, ScenarioName, ScenarioReport};
use symnoise_cli::tfim::{build_dephasing, build_j_squared, symmetric_eigenvalue, DephasingKind};
use symnoise_core::basis::{build_qbasis, centralizer_dims, sector_decompose};
use symnoise_core::fff::NoiseClass;
use symnoise_core::grid::TimeGrid;
use symnoise_core::noise::{autocorrelation, correlation_length, empirical_psd, trajectory_seed, PsdSpec, SynthesisPlan};
use symnoise_core::{Error, Result};

/// Environment variable overriding the worker count.
const THREADS_ENV: &str = "SYMNOISE_THREADS";
const FAST_TRAJECTORIES: usize = 2_000;

#[derive(Parser, Debug)]
#[command(name = "symnoise", version, about = "Symmetry-resolved noise analysis of transverse-field Ising models")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Build the symmetry-adapted basis for J^2 on n qubits.
    Basis {
        #[arg(long, default_value_t = 3)]
        n: usize,
        /// Write the basis as JSON.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Synthesise noise and compare its empirical spectrum with the target.
    NoiseCheck(NoiseCheckArgs),
    /// Monte Carlo ensemble only.
    Simulate(RunArgs),
    /// Filter-function prediction only.
    Fff(RunArgs),
    /// Monte Carlo, filter-function prediction, bounds and long-time state.
    Scenario(RunArgs),
    /// Render a heatmap CSV to SVG.
    Render {
        csv: PathBuf,
        #[arg(long, default_value = "linear")]
        scale: String,
        /// Output path (defaults to the CSV path with an .svg extension).
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct RunArgs {
    /// figure2a, figure2b, figure3a, figure3b or custom.
    name: String,
    /// JSON configuration merged over the scenario preset.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    seed: Option<u64>,
    /// Number of noise trajectories.
    #[arg(short = 'm', long)]
    trajectories: Option<usize>,
    /// Use 2000 trajectories.
    #[arg(long)]
    fast: bool,
    /// Run the long-time Monte Carlo ensemble.
    #[arg(long)]
    mc_long: bool,
    /// Compute the long-time state.
    #[arg(long)]
    steady_state: bool,
    /// linear or log.
    #[arg(long)]
    scale: Option<String>,
    /// Also write the first-order filter functions.
    #[arg(long)]
    filter_functions: bool,
    #[arg(long)]
    threads: Option<usize>,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

#[derive(Args, Debug)]
struct NoiseCheckArgs {
    /// JSON configuration; only its `psd` field is used.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(short = 'm', long, default_value_t = 1000)]
    trajectories: usize,
    #[arg(long, default_value_t = 1024)]
    steps: usize,
    /// Sampling step (defaults to pi / (2 omega_uv)).
    #[arg(long)]
    dt: Option<f64>,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value = "out")]
    out: PathBuf,
}

fn threads(flag: Option<usize>) -> Result<Option<usize>> {
    if flag.is_some() {
        return Ok(flag);
    }
    match std::env::var(THREADS_ENV) {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(Some)
            .map_err(|_| Error::Config(format!("{THREADS_ENV} must be a positive integer, got {v:?}"))),
        Err(_) => Ok(None),
    }
}

fn merge(base: &mut Value, over: Value) {
    match (base, over) {
        (Value::Object(b), Value::Object(o)) => {
            for (k, v) in o {
                match b.get_mut(&k) {
                    Some(slot) if slot.is_object() && v.is_object() => merge(slot, v),
                    _ => {
                        b.insert(k, v);
                    }
                }
            }
        }
        (slot, v) => *slot = v,
    }
}

fn load_config(args: &RunArgs) -> Result<ScenarioConfig> {
    let name: ScenarioName = args.name.parse()?;
    let mut value = serde_json::to_value(ScenarioConfig::preset(name))?;
    if let Some(path) = &args.config {
        let text = fs::read_to_string(path)?;
        let over: Value = serde_json::from_str(&text)?;
        if !over.is_object() {
            return Err(Error::Config("configuration must be a JSON object".into()));
        }
        merge(&mut value, over);
    }
    let mut cfg: ScenarioConfig = serde_json::from_value(value)?;
    cfg.name = name;
    if let Some(n) = args.n {
        cfg.tfim.n = n;
    }
    if let Some(seed) = args.seed {
        cfg.master_seed = seed;
    }
    if args.fast {
        cfg.trajectories = FAST_TRAJECTORIES;
    }
    if let Some(m) = args.trajectories {
        cfg.trajectories = m;
    }
    if args.steady_state {
        cfg.steady_state = true;
    }
    if args.mc_long {
        cfg.steady_state = true;
        cfg.long_time = LongTime::MonteCarlo;
    }
    if let Some(scale) = &args.scale {
        cfg.scale = scale.parse()?;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text)?;
    println!("wrote {}", path.display());
    Ok(())
}

fn write_heatmap(dir: &Path, stem: &str, map: &Heatmap, scale: HeatmapScale) -> Result<()> {
    write(&dir.join(format!("{stem}.csv")), &map.to_csv())?;
    write(&dir.join(format!("{stem}.svg")), &map.to_svg(scale))
}

/// Structural failures that contradict the model rather than the input.
fn violations(report: &ScenarioReport) -> Vec<String> {
    let mut out = Vec::new();
    if let Some(f) = &report.fff {
        if !f.block_check.passed {
            out.push(format!("control matrix couples different blocks (relative {:e})", f.block_check.relative));
        }
        if f.noise_class == NoiseClass::Preserving && !f.structure.passed {
            out.push(format!("cumulant mixes invariant blocks (relative {:e})", f.structure.relative));
        }
        if f.spectrum.max_sym_eigenvalue > 1e-9 * f.spectrum.sym_norm.max(f64::MIN_POSITIVE) {
            out.push(format!("dissipative part has a positive eigenvalue {:e}", f.spectrum.max_sym_eigenvalue));
        }
    }
    out
}

fn run(args: RunArgs, options: RunOptions) -> Result<Vec<String>> {
    let cfg = load_config(&args)?;
    let options = RunOptions { threads: threads(args.threads)?, ..options };
    let report = run_scenario(&cfg, options)?;
    fs::create_dir_all(&args.out)?;
    write(&args.out.join("config.json"), &cfg.to_json()?)?;
    write(&args.out.join("report.json"), &report.to_json()?)?;
    if let Some(mc) = &report.monte_carlo {
        write_heatmap(&args.out, "heatmap", &mc.heatmap, cfg.scale)?;
    }
    if let Some(f) = &report.fff {
        write_heatmap(&args.out, "heatmap_fff", &f.heatmap, cfg.scale)?;
    }
    if let Some(long) = &report.long_time {
        write_heatmap(&args.out, "heatmap_steady", &long.extrapolated_heatmap, cfg.scale)?;
        if let Some(mc) = &long.monte_carlo {
            write_heatmap(&args.out, "heatmap_long", &mc.heatmap, cfg.scale)?;
        }
    }
    if args.filter_functions && options.fff {
        let prep = symnoise_cli::scenario::prepare(&cfg, false)?;
        let run = symnoise_cli::scenario::run_fff(&prep)?;
        let path = args.out.join("filter_functions.csv");
        let mut buf = Vec::new();
        run.filters.write_csv(&prep.basis, &mut buf)?;
        fs::write(&path, buf)?;
        println!("wrote {}", path.display());
    }
    print_summary(&report);
    Ok(violations(&report))
}

fn print_summary(report: &ScenarioReport) {
    let p = &report.provenance;
    println!(
        "{}: n={} T={:.4} dt={:.4e} steps={} M={} seed={}",
        report.name.as_str(),
        p.n,
        p.duration,
        p.dt,
        p.steps,
        p.trajectories,
        p.master_seed
    );
    if let Some(mc) = &report.monte_carlo {
        println!(
            "  MC: off-SPS population {:.3e}, max off-sector coherence {:.3e}, floor {:.3e}",
            mc.leakage.off_sps_population, mc.leakage.off_sector_coherence_max, mc.statistical_floor
        );
    }
    if let Some(f) = &report.fff {
        println!(
            "  FFF: {:?} noise, off-SPS population {:.3e}, D={:.3e} <= {:.3e} <= {:.3e}",
            f.noise_class, f.leakage.off_sps_population, f.bounds.distance, f.bounds.overlap_bound, f.bounds.white_noise_bound
        );
    }
    if let Some(c) = &report.comparison {
        println!("  trace distance FFF vs MC: {:.3e}", c.trace_distance_fff_mc);
    }
    if let Some(long) = &report.long_time {
        println!("  long-time (exp(sC)): distance to expected {:.3e}", long.extrapolated.distance_to_expected);
        if let Some(mc) = &long.monte_carlo {
            println!("  long-time (MC, T={:.2}): distance to expected {:.3e}", mc.duration, mc.distance_to_expected);
        }
    }
}

fn basis(n: usize, out: Option<PathBuf>) -> Result<()> {
    if n == 0 || n > 6 {
        return Err(Error::Config(format!("basis supports 1..=6 qubits, got {n}")));
    }
    let spec = sector_decompose(&build_j_squared(n), None)?;
    let basis = build_qbasis(&spec);
    let dims = centralizer_dims(&basis);
    println!("J^2 on {n} qubits: {} generators", basis.len());
    for (s, (value, mult)) in spec.eigenvalues.iter().zip(&spec.multiplicities).enumerate() {
        let mark = if s == spec.sector_index(symmetric_eigenvalue(n)) { " (symmetric)" } else { "" };
        println!("  sector {s}: eigenvalue {value:.6}, multiplicity {mult}{mark}");
    }
    println!("  centralizer dimension {}", dims.n_centralizer);
    for w in &spec.warnings {
        println!("  warning: {w}");
    }
    if let Some(path) = out {
        write(&path, &basis.to_json()?)?;
    }
    Ok(())
}

#[derive(Serialize)]
struct NoiseCheckReport {
    psd: PsdSpec,
    trajectories: usize,
    dt: f64,
    steps: usize,
    seed: u64,
    correlation_length: Option<f64>,
    target_variance: f64,
    empirical_variance: f64,
    /// Log-log slope over the central band, for pink spectra.
    loglog_slope: Option<f64>,
    /// Empirical over target band mean in the central band.
    band_ratio: f64,
    band: (f64, f64),
}

fn noise_check(args: NoiseCheckArgs) -> Result<()> {
    let psd = match &args.config {
        Some(path) => {
            let v: Value = serde_json::from_str(&fs::read_to_string(path)?)?;
            match v.get("psd") {
                Some(p) => serde_json::from_value(p.clone())?,
                None => symnoise_cli::scenario::default_psd(),
            }
        }
        None => symnoise_cli::scenario::default_psd(),
    };
    psd.validate()?;
    let dt = args.dt.unwrap_or(std::f64::consts::PI / (2.0 * psd.omega_uv()));
    let grid = TimeGrid::new(dt, args.steps)?;
    let model = build_dephasing(2, DephasingKind::Local, &psd)?;
    let single = symnoise_core::noise::NoiseModel::independent(vec![model.channels[0].clone()])?;
    let plan = SynthesisPlan::new(&single, grid, None)?;
    let trajs: Vec<_> = (0..args.trajectories as u64).map(|i| plan.sample(trajectory_seed(args.seed, i), false)).collect();
    let est = empirical_psd(&trajs)?;
    let (lo, hi) = psd.band();
    let nyquist = std::f64::consts::PI / dt;
    let top = hi.min(nyquist);
    let resolution = 2.0 * std::f64::consts::PI / grid.duration();
    let bottom = lo.max(4.0 * resolution);
    let band = ((bottom * top).sqrt() / (top / bottom).powf(0.25), (bottom * top).sqrt() * (top / bottom).powf(0.25));
    let target_band = {
        let ws: Vec<f64> = est.omega.iter().copied().filter(|w| *w >= band.0 && *w <= band.1).collect();
        ws.iter().map(|w| psd.density(*w)).sum::<f64>() / ws.len().max(1) as f64
    };
    let empirical_variance = trajs.iter().flat_map(|t| t.samples[0].iter()).map(|x| x * x).sum::<f64>()
        / (trajs.len() * (grid.steps + 1)) as f64;
    let report = NoiseCheckReport {
        loglog_slope: matches!(psd, PsdSpec::Pink { .. }).then(|| est.loglog_slope(0, band.0, band.1)),
        band_ratio: est.band_mean(0, band.0, band.1) / target_band,
        correlation_length: correlation_length(&psd).ok(),
        target_variance: autocorrelation(&psd, 0.0),
        empirical_variance,
        psd,
        trajectories: args.trajectories,
        dt,
        steps: args.steps,
        seed: args.seed,
        band,
    };
    fs::create_dir_all(&args.out)?;
    write(&args.out.join("noise_check.json"), &serde_json::to_string_pretty(&report)?)?;
    let mut csv = String::from("omega,target,empirical\n");
    for (w, s) in est.omega.iter().zip(&est.auto[0]) {
        csv.push_str(&format!("{w},{},{s}\n", report.psd.density(*w)));
    }
    write(&args.out.join("psd.csv"), &csv)?;
    println!(
        "variance target {:.4e} empirical {:.4e}; band ratio {:.3}; slope {:?}; tau {:?}",
        report.target_variance, report.empirical_variance, report.band_ratio, report.loglog_slope, report.correlation_length
    );
    Ok(())
}

fn render(csv: PathBuf, scale: String, out: Option<PathBuf>) -> Result<()> {
    let map = Heatmap::from_csv(&fs::read_to_string(&csv)?)?;
    let scale: HeatmapScale = scale.parse()?;
    let out = out.unwrap_or_else(|| csv.with_extension("svg"));
    write(&out, &map.to_svg(scale))
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match cli.command {
        Command::Basis { n, out } => basis(n, out).map(|_| Vec::new()),
        Command::NoiseCheck(args) => noise_check(args).map(|_| Vec::new()),
        Command::Simulate(args) => run(args, RunOptions { monte_carlo: true, fff: false, threads: None }),
        Command::Fff(args) => run(args, RunOptions { monte_carlo: false, fff: true, threads: None }),
        Command::Scenario(args) => run(args, RunOptions::default()),
        Command::Render { csv, scale, out } => render(csv, scale, out).map(|_| Vec::new()),
    };
    match result {
        Ok(v) if v.is_empty() => ExitCode::SUCCESS,
        Ok(v) => {
            for msg in v {
                eprintln!("invariant violation: {msg}");
            }
            ExitCode::from(2)
        }
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_invariant_violation() { 2 } else { 1 })
        }
    }
}
