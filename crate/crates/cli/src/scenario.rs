use std::str::FromStr;

use nalgebra::DVector;
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

use symnoise_core::basis::{block_populations, build_qbasis, classify_operator, sector_decompose, QBasis, SectorSpectrum};
use symnoise_core::fff::{
    assemble_cumulant, check_block_structure, coherence_params, control_matrix, default_omega_grid,
    distance_and_bounds, ladder_amplitude, noise_class, predict_average_state, predict_first_order, spectrum_report,
    steady_state, structure_check, BlockCheck, BoundReport, CovarianceSource, CumulantSuperoperator,
    FilterFunctions, NoiseClass, SpectrumReport, SteadyStateReport, StructureReport,
};
use symnoise_core::grid::TimeGrid;
use symnoise_core::noise::{correlation_length, NoiseModel, PsdSpec, SynthesisPlan, Trajectory};
use symnoise_core::operator::{projector, trace_distance};
use symnoise_core::propagation::{
    default_dt, ensemble_average, noisy_trajectory, spectral_norm, EnsembleConfig, PropagatorCache, Schedule,
    StateEnsemble,
};
use symnoise_core::{CMatrix, Error, Result};

use crate::render::{Heatmap, HeatmapScale};
use crate::tfim::{build_dephasing, build_j_squared, build_tfim, symmetric_eigenvalue, DephasingKind, DurationMode, TfimConfig};

/// Structural tolerance of the cumulant and control-matrix checks.
pub const STRUCTURE_TOL: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ScenarioName {
    /// Global dephasing, `T = 2 tau`.
    #[default]
    Figure2a,
    /// Local dephasing, `T = 2 tau`.
    Figure2b,
    /// Global dephasing, long-time limit.
    Figure3a,
    /// Local dephasing, long-time limit.
    Figure3b,
    /// Everything taken from the configuration.
    Custom,
}

impl ScenarioName {
    pub fn as_str(&self) -> &'static str {
        match self {
            ScenarioName::Figure2a => "figure2a",
            ScenarioName::Figure2b => "figure2b",
            ScenarioName::Figure3a => "figure3a",
            ScenarioName::Figure3b => "figure3b",
            ScenarioName::Custom => "custom",
        }
    }
}

impl FromStr for ScenarioName {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "figure2a" => Ok(ScenarioName::Figure2a),
            "figure2b" => Ok(ScenarioName::Figure2b),
            "figure3a" => Ok(ScenarioName::Figure3a),
            "figure3b" => Ok(ScenarioName::Figure3b),
            "custom" => Ok(ScenarioName::Custom),
            other => Err(Error::Config(format!("unknown scenario {other:?}"))),
        }
    }
}

/// How the long-time state is obtained.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum LongTime {
    /// `exp(s C)` with `s -> infinity`.
    #[default]
    Extrapolate,
    /// Monte Carlo ensemble over `long_factor * tau`, in addition to the
    /// extrapolation.
    MonteCarlo,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum InitialState {
    /// `|+>^n`.
    #[default]
    PlusAll,
    /// Computational basis state `|index>`.
    Computational { index: usize },
    /// `|index>` projected onto the fully symmetric sector and normalised.
    SectorProjected { index: usize },
}

/// Full description of a run. Every field has a default, so a JSON
/// document only needs the fields it changes.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScenarioConfig {
    pub name: ScenarioName,
    pub tfim: TfimConfig,
    pub dephasing: DephasingKind,
    pub psd: PsdSpec,
    pub initial_state: InitialState,
    pub trajectories: usize,
    pub master_seed: u64,
    pub antithetic: bool,
    /// Synthesiser modes (`None` = library default).
    pub modes: Option<usize>,
    /// Compute the long-time state.
    pub steady_state: bool,
    pub long_time: LongTime,
    /// Long-time Monte Carlo duration in units of `tau`.
    pub long_factor: f64,
    pub long_dt: Option<f64>,
    pub long_modes: Option<usize>,
    /// Number of recorded sector-population times.
    pub checkpoints: usize,
    pub scale: HeatmapScale,
}

/// Default pink spectrum `A / omega` on `[0.1, 10]`.
pub fn default_psd() -> PsdSpec {
    PsdSpec::Pink { amplitude: 0.2, omega_ir: 0.1, omega_uv: 10.0 }
}

impl Default for ScenarioConfig {
    fn default() -> Self {
        ScenarioConfig {
            name: ScenarioName::Custom,
            tfim: TfimConfig::default(),
            dephasing: DephasingKind::Global,
            psd: default_psd(),
            initial_state: InitialState::PlusAll,
            trajectories: 20_000,
            master_seed: 42,
            antithetic: false,
            modes: None,
            steady_state: false,
            long_time: LongTime::Extrapolate,
            long_factor: 50.0,
            long_dt: Some(0.05),
            long_modes: Some(256),
            checkpoints: 20,
            scale: HeatmapScale::Linear,
        }
    }
}

impl ScenarioConfig {
    /// Preset for a named scenario.
    pub fn preset(name: ScenarioName) -> Self {
        let base = ScenarioConfig { name, ..Default::default() };
        match name {
            ScenarioName::Figure2a | ScenarioName::Custom => base,
            ScenarioName::Figure2b => ScenarioConfig { dephasing: DephasingKind::Local, ..base },
            ScenarioName::Figure3a => ScenarioConfig { steady_state: true, ..base },
            ScenarioName::Figure3b => ScenarioConfig { dephasing: DephasingKind::Local, steady_state: true, ..base },
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        Ok(serde_json::from_str(text)?)
    }

    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }

    pub fn validate(&self) -> Result<()> {
        self.tfim.validate()?;
        self.psd.validate()?;
        if self.trajectories == 0 {
            return Err(Error::Config("trajectories must be positive".into()));
        }
        if self.antithetic && self.trajectories % 2 == 1 {
            return Err(Error::Config("antithetic sampling needs an even trajectory count".into()));
        }
        if !(self.long_factor > 0.0 && self.long_factor.is_finite()) {
            return Err(Error::Config(format!("long_factor must be positive, got {}", self.long_factor)));
        }
        if let Some(dt) = self.long_dt {
            if !(dt > 0.0 && dt.is_finite()) {
                return Err(Error::Config(format!("long_dt must be positive, got {dt}")));
            }
        }
        if self.modes == Some(0) || self.long_modes == Some(0) {
            return Err(Error::Config("mode counts must be positive".into()));
        }
        Ok(())
    }
}

/// Everything a run needs, built and checked before any heavy computation.
#[derive(Debug, Clone)]
pub struct Prepared {
    pub config: ScenarioConfig,
    pub tau: Option<f64>,
    pub grid: TimeGrid,
    pub modes: usize,
    pub schedule: Schedule,
    pub spectrum: SectorSpectrum,
    pub basis: QBasis,
    pub model: NoiseModel,
    pub sps: usize,
    pub rho0: CMatrix,
}

/// Grid for the main run, or for a long run when `long` is set.
fn make_grid(config: &ScenarioConfig, tau: Option<f64>, h0_norm: f64, long: bool) -> Result<TimeGrid> {
    let omega_uv = config.psd.omega_uv();
    let base = match (config.tfim.duration, tau) {
        (DurationMode::Absolute { t }, _) => t,
        (DurationMode::MultipleOfTau { factor }, Some(tau)) => factor * tau,
        (DurationMode::MultipleOfTau { .. }, None) => {
            return Err(Error::Config("duration is a multiple of tau but the spectrum has no correlation length".into()))
        }
    };
    let (duration, dt) = if long {
        (tau.map_or(config.long_factor * base, |t| config.long_factor * t), config.long_dt.or(config.tfim.dt))
    } else {
        (base, config.tfim.dt)
    };
    let dt = dt.unwrap_or_else(|| default_dt(h0_norm, omega_uv));
    let grid = TimeGrid::covering(duration, dt)?;
    let limit = std::f64::consts::PI / omega_uv;
    if grid.dt >= limit {
        return Err(Error::Nyquist { dt: grid.dt, limit });
    }
    Ok(grid)
}

fn initial_state(state: InitialState, n: usize, spectrum: &SectorSpectrum, sps: usize) -> Result<CMatrix> {
    let dim = 1usize << n;
    let basis_vector = |index: usize| -> Result<DVector<Complex64>> {
        if index >= dim {
            return Err(Error::Config(format!("basis state {index} outside a {dim}-dimensional space")));
        }
        Ok(DVector::from_fn(dim, |k, _| if k == index { Complex64::new(1.0, 0.0) } else { Complex64::new(0.0, 0.0) }))
    };
    let psi = match state {
        InitialState::PlusAll => DVector::from_element(dim, Complex64::new((dim as f64).sqrt().recip(), 0.0)),
        InitialState::Computational { index } => basis_vector(index)?,
        InitialState::SectorProjected { index } => {
            let v = spectrum.projector(sps) * basis_vector(index)?;
            let norm = v.norm();
            if norm < 1e-12 {
                return Err(Error::Config(format!("basis state {index} has no overlap with the symmetric sector")));
            }
            v / Complex64::new(norm, 0.0)
        }
    };
    Ok(projector(&psi))
}

/// Validate the configuration and build the Hamiltonian, basis, noise model
/// and initial state.
pub fn prepare(config: &ScenarioConfig, long: bool) -> Result<Prepared> {
    config.validate()?;
    let n = config.tfim.n;
    let tau = match correlation_length(&config.psd) {
        Ok(t) => Some(t),
        Err(Error::NoCorrelationLength(_)) => None,
        Err(e) => return Err(e),
    };
    let h0 = config.tfim.hamiltonian();
    let grid = make_grid(config, tau, spectral_norm(&h0), long)?;
    let model = build_dephasing(n, config.dephasing, &config.psd)?;
    let modes = if long { config.long_modes.or(config.modes) } else { config.modes };
    let modes = SynthesisPlan::new(&model, grid, modes)?.modes();
    let schedule = build_tfim(&config.tfim, grid)?;
    let spectrum = sector_decompose(&build_j_squared(n), None)?;
    let sps = spectrum.sector_index(symmetric_eigenvalue(n));
    let basis = build_qbasis(&spectrum);
    let rho0 = initial_state(config.initial_state, n, &spectrum, sps)?;
    Ok(Prepared { config: config.clone(), tau, grid, modes, schedule, spectrum, basis, model, sps, rho0 })
}

/// Populations and coherences that matter for leakage out of the symmetric
/// sector.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LeakageMetrics {
    pub sector_populations: Vec<f64>,
    /// Total population outside the symmetric sector.
    pub off_sps_population: f64,
    /// Largest single diagonal entry outside the symmetric sector.
    pub off_sps_diagonal_max: f64,
    /// Largest magnitude in any block between two different sectors.
    pub off_sector_coherence_max: f64,
    /// Largest off-diagonal magnitude inside the other sectors.
    pub off_sps_within_coherence_max: f64,
}

pub fn leakage_metrics(rho: &CMatrix, spectrum: &SectorSpectrum, sps: usize) -> Result<LeakageMetrics> {
    let blocks = block_populations(rho, spectrum)?;
    let r = spectrum.to_eigenbasis(rho);
    let mut diag = 0.0f64;
    for (s, range) in spectrum.ranges().iter().enumerate() {
        if s != sps {
            for k in range.clone() {
                diag = diag.max(r[(k, k)].re);
            }
        }
    }
    Ok(LeakageMetrics {
        off_sps_population: blocks.populations.iter().enumerate().filter(|(s, _)| *s != sps).map(|p| p.1).sum(),
        off_sps_diagonal_max: diag,
        off_sector_coherence_max: blocks.max_off_sector(),
        off_sps_within_coherence_max: blocks
            .within_coherence
            .iter()
            .enumerate()
            .filter(|(s, _)| *s != sps)
            .fold(0.0, |m, (_, v)| m.max(*v)),
        sector_populations: blocks.populations,
    })
}

/// Sector populations of the Monte Carlo mean at one time.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PopulationPoint {
    pub time: f64,
    pub populations: Vec<f64>,
}

/// Grid and noise settings behind a set of numbers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Provenance {
    pub master_seed: u64,
    pub trajectories: usize,
    pub antithetic: bool,
    pub n: usize,
    pub couplings: Vec<Vec<f64>>,
    pub h: f64,
    pub psd: PsdSpec,
    pub tau: Option<f64>,
    pub duration: f64,
    pub dt: f64,
    pub steps: usize,
    pub modes: usize,
    pub version: String,
}

impl Provenance {
    fn of(prep: &Prepared, trajectories: usize) -> Self {
        let j = prep.config.tfim.coupling_matrix();
        Provenance {
            master_seed: prep.config.master_seed,
            trajectories,
            antithetic: prep.config.antithetic,
            n: prep.config.tfim.n,
            couplings: (0..j.nrows()).map(|a| j.row(a).iter().copied().collect()).collect(),
            h: prep.config.tfim.h,
            psd: prep.config.psd.clone(),
            tau: prep.tau,
            duration: prep.grid.duration(),
            dt: prep.grid.dt,
            steps: prep.grid.steps,
            modes: prep.modes,
            version: env!("CARGO_PKG_VERSION").to_string(),
        }
    }
}

/// Monte Carlo side of a run.
#[derive(Debug, Clone)]
pub struct McRun {
    pub ensemble: StateEnsemble,
    pub ideal: CMatrix,
    /// Trace distance between the integrator's noiseless state and the exact
    /// ideal state, or the integrator's own leakage, whichever is larger.
    pub integrator_floor: f64,
}

fn checkpoint_indices(steps: usize, count: usize) -> Vec<usize> {
    if count == 0 {
        return Vec::new();
    }
    let mut idx: Vec<usize> = (0..=count).map(|c| (c * steps + count / 2) / count).collect();
    idx.dedup();
    idx
}

/// Run the ensemble on a prepared scenario.
pub fn run_monte_carlo(prep: &Prepared, trajectories: usize, threads: Option<usize>) -> Result<McRun> {
    let cfg = &prep.config;
    let ensemble_cfg = EnsembleConfig {
        trajectories,
        master_seed: cfg.master_seed,
        antithetic: cfg.antithetic,
        keep_states: false,
        checkpoints: checkpoint_indices(prep.grid.steps, cfg.checkpoints),
        modes: Some(prep.modes),
        threads,
    };
    let ensemble = ensemble_average(&prep.schedule, &prep.model, &ensemble_cfg, &prep.rho0)?;
    let cache = PropagatorCache::build(&prep.schedule)?;
    let ideal = cache.state_at(&prep.rho0, prep.grid.steps);
    let silent = Trajectory {
        grid: prep.grid,
        seed: 0,
        samples: vec![vec![0.0; prep.grid.steps + 1]; prep.model.len()],
        midpoints: vec![vec![0.0; prep.grid.steps]; prep.model.len()],
    };
    let integrated = noisy_trajectory(&prep.schedule, &prep.model, &silent, &prep.rho0)?;
    let own_leak = leakage_metrics(&integrated, &prep.spectrum, prep.sps)?.off_sps_population.abs();
    let integrator_floor = trace_distance(&integrated, &ideal)?.max(own_leak).max(f64::EPSILON);
    Ok(McRun { ensemble, ideal, integrator_floor })
}

/// Filter-function side of a run.
#[derive(Debug, Clone)]
pub struct FffRun {
    pub cache: PropagatorCache,
    pub rho0_t: CMatrix,
    pub noise_class: NoiseClass,
    pub cumulant: CumulantSuperoperator,
    pub filters: FilterFunctions,
    pub block_check: BlockCheck,
    pub ladder_amplitude: f64,
    pub active_generators: usize,
    pub predicted: CMatrix,
    pub first_order: CMatrix,
}

pub fn run_fff(prep: &Prepared) -> Result<FffRun> {
    let cache = PropagatorCache::build(&prep.schedule)?;
    let rho0_t = cache.state_at(&prep.rho0, prep.grid.steps);
    let class = noise_class(&prep.model, &prep.basis, STRUCTURE_TOL)?;
    let cm = control_matrix(&cache, &prep.basis, &prep.model)?;
    let params = coherence_params(&cm, &prep.model, CovarianceSource::Synthesized { modes: Some(prep.modes) })?;
    let cumulant = assemble_cumulant(&params, &prep.basis)?;
    let omega = default_omega_grid(&prep.model, prep.grid.duration());
    let filters = FilterFunctions::compute(&cm, &prep.model, omega)?;
    let block_check = check_block_structure(&cache, &prep.basis, STRUCTURE_TOL);
    let predicted = predict_average_state(&cumulant, &rho0_t, &prep.basis);
    let first_order = predict_first_order(&cumulant, &rho0_t, &prep.basis);
    Ok(FffRun {
        ladder_amplitude: ladder_amplitude(&cm, &prep.basis),
        active_generators: params.active.len(),
        cache,
        rho0_t,
        noise_class: class,
        cumulant,
        filters,
        block_check,
        predicted,
        first_order,
    })
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct SectorInfo {
    pub eigenvalue: f64,
    pub multiplicity: usize,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct MonteCarloSummary {
    pub heatmap: Heatmap,
    pub populations: Vec<PopulationPoint>,
    pub leakage: LeakageMetrics,
    pub ideal_leakage: LeakageMetrics,
    /// `1 / sqrt(M)`.
    pub statistical_floor: f64,
    pub integrator_floor: f64,
    /// Trace distance between the ensemble mean and the ideal state.
    pub trace_distance_ideal: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FffSummary {
    pub heatmap: Heatmap,
    pub leakage: LeakageMetrics,
    pub noise_class: NoiseClass,
    /// No correlation between symmetry-preserving and -breaking channels.
    pub symmetry_split: bool,
    /// Channels carrying both centralizer and ladder components.
    pub mixed_channels: Vec<usize>,
    pub generators: usize,
    pub active_generators: usize,
    pub ladder_amplitude: f64,
    pub spectrum: SpectrumReport,
    pub structure: StructureReport,
    pub block_check: BlockCheck,
    pub bounds: BoundReport,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct Comparison {
    /// `T(exp(C)[rho_0(T)], rho_MC)`.
    pub trace_distance_fff_mc: f64,
    /// `T(rho_0(T) + C[rho_0(T)], rho_MC)`.
    pub trace_distance_first_order_mc: f64,
    pub bound_ordering_holds: bool,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LongMonteCarlo {
    pub duration: f64,
    pub dt: f64,
    pub steps: usize,
    pub modes: usize,
    pub trajectories: usize,
    pub distance_to_expected: f64,
    pub leakage: LeakageMetrics,
    pub heatmap: Heatmap,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LongTimeReport {
    pub extrapolated: SteadyStateReport,
    pub extrapolated_heatmap: Heatmap,
    pub monte_carlo: Option<LongMonteCarlo>,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct ScenarioReport {
    pub name: ScenarioName,
    pub config: ScenarioConfig,
    pub provenance: Provenance,
    pub sectors: Vec<SectorInfo>,
    /// Index of the fully symmetric sector.
    pub sps: usize,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub monte_carlo: Option<MonteCarloSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub fff: Option<FffSummary>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub comparison: Option<Comparison>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub long_time: Option<LongTimeReport>,
}

impl ScenarioReport {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(self)?)
    }
}

/// Which parts of a scenario to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct RunOptions {
    pub monte_carlo: bool,
    pub fff: bool,
    pub threads: Option<usize>,
}

impl Default for RunOptions {
    fn default() -> Self {
        RunOptions { monte_carlo: true, fff: true, threads: None }
    }
}

fn summarize_mc(prep: &Prepared, mc: &McRun) -> Result<MonteCarloSummary> {
    let populations = mc
        .ensemble
        .checkpoints
        .iter()
        .map(|(k, rho)| {
            Ok(PopulationPoint {
                time: prep.grid.time(*k),
                populations: block_populations(rho, &prep.spectrum)?.populations,
            })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(MonteCarloSummary {
        heatmap: Heatmap::from_state(&mc.ensemble.mean_state, &prep.spectrum),
        populations,
        leakage: leakage_metrics(&mc.ensemble.mean_state, &prep.spectrum, prep.sps)?,
        ideal_leakage: leakage_metrics(&mc.ideal, &prep.spectrum, prep.sps)?,
        statistical_floor: mc.ensemble.statistical_floor,
        integrator_floor: mc.integrator_floor,
        trace_distance_ideal: trace_distance(&mc.ensemble.mean_state, &mc.ideal)?,
    })
}

fn summarize_fff(prep: &Prepared, run: &FffRun) -> Result<FffSummary> {
    let mixed_channels = prep
        .model
        .channels
        .iter()
        .enumerate()
        .filter_map(|(mu, ch)| {
            let n = ch.operator.nrows();
            let shift = ch.operator.trace() / Complex64::new(n as f64, 0.0);
            let x = &ch.operator - CMatrix::identity(n, n) * shift;
            let s = classify_operator(&x, &prep.basis, STRUCTURE_TOL).ok()?;
            let ladder = s.ladder_weight();
            (ladder > STRUCTURE_TOL && ladder < 1.0 - STRUCTURE_TOL).then_some(mu)
        })
        .collect();
    Ok(FffSummary {
        heatmap: Heatmap::from_state(&run.predicted, &prep.spectrum),
        leakage: leakage_metrics(&run.predicted, &prep.spectrum, prep.sps)?,
        noise_class: run.noise_class,
        symmetry_split: prep.model.validate_symmetry_split(&prep.basis, STRUCTURE_TOL).is_ok(),
        mixed_channels,
        generators: prep.basis.len(),
        active_generators: run.active_generators,
        ladder_amplitude: run.ladder_amplitude,
        spectrum: spectrum_report(&run.cumulant),
        structure: structure_check(&run.cumulant, &prep.basis, run.noise_class, prep.sps, STRUCTURE_TOL),
        block_check: run.block_check.clone(),
        bounds: distance_and_bounds(&run.cumulant, &run.rho0_t, &run.filters, &prep.model, &prep.basis, prep.sps),
    })
}

/// Run a scenario: Monte Carlo ensemble, filter-function prediction,
/// bounds and (if requested) the long-time state.
pub fn run_scenario(config: &ScenarioConfig, options: RunOptions) -> Result<ScenarioReport> {
    let prep = prepare(config, false)?;
    let long_prep = if config.steady_state && config.long_time == LongTime::MonteCarlo && options.monte_carlo {
        Some(prepare(config, true)?)
    } else {
        None
    };

    let mc = if options.monte_carlo { Some(run_monte_carlo(&prep, config.trajectories, options.threads)?) } else { None };
    let fff = if options.fff || config.steady_state { Some(run_fff(&prep)?) } else { None };

    let monte_carlo = mc.as_ref().map(|m| summarize_mc(&prep, m)).transpose()?;
    let fff_summary = match (&fff, options.fff) {
        (Some(run), true) => Some(summarize_fff(&prep, run)?),
        _ => None,
    };
    let comparison = match (&mc, &fff, &fff_summary) {
        (Some(m), Some(f), Some(s)) => Some(Comparison {
            trace_distance_fff_mc: trace_distance(&f.predicted, &m.ensemble.mean_state)?,
            trace_distance_first_order_mc: trace_distance(&f.first_order, &m.ensemble.mean_state)?,
            bound_ordering_holds: s.bounds.distance <= s.bounds.overlap_bound
                && s.bounds.overlap_bound <= s.bounds.white_noise_bound,
        }),
        _ => None,
    };

    let long_time = match (&fff, config.steady_state) {
        (Some(run), true) => {
            let extrapolated = steady_state(&run.cumulant, &prep.basis, prep.sps, run.noise_class, &run.rho0_t)?;
            let extrapolated_heatmap = Heatmap::from_state(&extrapolated.state, &prep.spectrum);
            let monte_carlo = match &long_prep {
                Some(lp) => {
                    let long = run_monte_carlo(lp, config.trajectories, options.threads)?;
                    let mean = &long.ensemble.mean_state;
                    Some(LongMonteCarlo {
                        duration: lp.grid.duration(),
                        dt: lp.grid.dt,
                        steps: lp.grid.steps,
                        modes: lp.modes,
                        trajectories: config.trajectories,
                        distance_to_expected: trace_distance(mean, &extrapolated.expected)?,
                        leakage: leakage_metrics(mean, &lp.spectrum, lp.sps)?,
                        heatmap: Heatmap::from_state(mean, &lp.spectrum),
                    })
                }
                None => None,
            };
            Some(LongTimeReport { extrapolated, extrapolated_heatmap, monte_carlo })
        }
        _ => None,
    };

    Ok(ScenarioReport {
        name: config.name,
        config: config.clone(),
        provenance: Provenance::of(&prep, config.trajectories),
        sectors: prep
            .spectrum
            .eigenvalues
            .iter()
            .zip(&prep.spectrum.multiplicities)
            .map(|(&eigenvalue, &multiplicity)| SectorInfo { eigenvalue, multiplicity })
            .collect(),
        sps: prep.sps,
        monte_carlo,
        fff: fff_summary,
        comparison,
        long_time,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn presets_round_trip_through_json() {
        for name in [ScenarioName::Figure2a, ScenarioName::Figure2b, ScenarioName::Figure3a, ScenarioName::Figure3b] {
            let cfg = ScenarioConfig::preset(name);
            assert_eq!(ScenarioConfig::from_json(&cfg.to_json().unwrap()).unwrap(), cfg);
            assert_eq!(name.as_str().parse::<ScenarioName>().unwrap(), name);
        }
    }

    #[test]
    fn partial_json_uses_defaults() {
        let cfg = ScenarioConfig::from_json(r#"{"tfim": {"n": 2}, "trajectories": 10}"#).unwrap();
        assert_eq!(cfg.tfim.n, 2);
        assert_eq!(cfg.trajectories, 10);
        assert_eq!(cfg.psd, default_psd());
    }

    #[test]
    fn plus_state_lies_in_the_symmetric_sector() {
        let prep = prepare(&ScenarioConfig { trajectories: 10, ..ScenarioConfig::preset(ScenarioName::Figure2a) }, false).unwrap();
        let leak = leakage_metrics(&prep.rho0, &prep.spectrum, prep.sps).unwrap();
        assert!(leak.off_sps_population < 1e-12);
        assert_eq!(prep.spectrum.multiplicities[prep.sps], 4);
    }

    #[test]
    fn bad_configs_fail_before_computing() {
        let mut cfg = ScenarioConfig::preset(ScenarioName::Figure2a);
        cfg.trajectories = 0;
        assert!(matches!(prepare(&cfg, false), Err(Error::Config(_))));
        let mut cfg = ScenarioConfig::preset(ScenarioName::Figure2a);
        cfg.tfim.dt = Some(1.0);
        assert!(matches!(prepare(&cfg, false), Err(Error::Nyquist { .. })));
        let mut cfg = ScenarioConfig::preset(ScenarioName::Figure2a);
        cfg.psd = PsdSpec::White { s0: 0.1, omega_uv: 10.0 };
        assert!(matches!(prepare(&cfg, false), Err(Error::Config(_))));
    }

    #[test]
    fn sector_projected_state() {
        let cfg = ScenarioConfig {
            initial_state: InitialState::SectorProjected { index: 1 },
            trajectories: 10,
            ..Default::default()
        };
        let prep = prepare(&cfg, false).unwrap();
        let leak = leakage_metrics(&prep.rho0, &prep.spectrum, prep.sps).unwrap();
        assert!(leak.off_sps_population < 1e-12);
        assert!((prep.rho0.trace().re - 1.0).abs() < 1e-12);
    }
}
