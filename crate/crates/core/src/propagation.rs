//! Piecewise-constant time evolution: ideal propagators, single noisy
//! trajectories and deterministic Monte Carlo ensemble averages.

use std::f64::consts::PI;

use nalgebra::DVector;
use num_complex::Complex64;
use rayon::prelude::*;

use crate::error::{Error, Result};
use crate::grid::TimeGrid;
use crate::noise::{trajectory_seed, NoiseModel, SynthesisPlan, Trajectory};
use crate::operator::{
    exp_from_eigen, hermitian_eigen, hermiticity_deviation, is_hermitian, max_abs, unitarity_deviation,
    CMatrix, ONE, ZERO,
};

/// Relative tolerance for the declared symmetry `[Q, H_0(t_k)] = 0`.
pub const SYMMETRY_TOL: f64 = 1e-10;

/// Trajectories per reduction chunk. The chunk partition depends only on
/// the trajectory count, which keeps the ensemble mean independent of the
/// number of worker threads.
pub const CHUNK: usize = 64;

/// Piecewise-constant Hamiltonian `H_0(t_k)` on a uniform grid.
#[derive(Debug, Clone)]
pub struct Schedule {
    pub grid: TimeGrid,
    hamiltonians: Vec<CMatrix>,
    pub symmetry: Option<CMatrix>,
}

impl Schedule {
    /// One Hamiltonian per step (`grid.steps` entries), optionally with a
    /// symmetry operator that must commute with every step.
    pub fn new(grid: TimeGrid, hamiltonians: Vec<CMatrix>, symmetry: Option<CMatrix>) -> Result<Self> {
        if hamiltonians.len() != grid.steps {
            return Err(Error::GridMismatch(format!(
                "{} Hamiltonians for {} steps",
                hamiltonians.len(),
                grid.steps
            )));
        }
        let n = hamiltonians[0].nrows();
        for h in &hamiltonians {
            if !h.is_square() || h.nrows() != n {
                return Err(Error::DimensionMismatch { expected: n, found: h.nrows() });
            }
            if !is_hermitian(h) {
                return Err(Error::NotHermitian { deviation: hermiticity_deviation(h) });
            }
        }
        if let Some(q) = &symmetry {
            if q.nrows() != n || !q.is_square() {
                return Err(Error::DimensionMismatch { expected: n, found: q.nrows() });
            }
            let scale = hamiltonians.iter().fold(0.0f64, |m, h| m.max(max_abs(h))).max(1e-300);
            let mut steps = Vec::new();
            let mut worst = 0.0f64;
            for (k, h) in hamiltonians.iter().enumerate() {
                let dev = max_abs(&(q * h - h * q));
                worst = worst.max(dev);
                if dev > SYMMETRY_TOL * scale {
                    steps.push(k);
                }
            }
            if !steps.is_empty() {
                return Err(Error::SymmetryViolation { steps, max_deviation: worst });
            }
        }
        Ok(Schedule { grid, hamiltonians, symmetry })
    }

    /// Time-independent `H_0` replicated on every step.
    pub fn constant(grid: TimeGrid, h0: CMatrix, symmetry: Option<CMatrix>) -> Result<Self> {
        Schedule::new(grid, vec![h0; grid.steps], symmetry)
    }

    pub fn dim(&self) -> usize {
        self.hamiltonians[0].nrows()
    }

    pub fn hamiltonian(&self, k: usize) -> &CMatrix {
        &self.hamiltonians[k]
    }

    /// Largest spectral norm over the steps.
    pub fn max_norm(&self) -> f64 {
        self.hamiltonians.iter().fold(0.0, |m, h| m.max(spectral_norm(h)))
    }

    /// Same Hamiltonians on a different grid with the same step count.
    pub fn with_grid(&self, grid: TimeGrid) -> Result<Schedule> {
        Schedule::new(grid, self.hamiltonians.clone(), self.symmetry.clone())
    }
}

/// Largest absolute eigenvalue of a Hermitian matrix.
pub fn spectral_norm(h: &CMatrix) -> f64 {
    match hermitian_eigen(h) {
        Ok(e) => e.values.iter().fold(0.0, |m, v| m.max(v.abs())),
        Err(_) => f64::NAN,
    }
}

/// `min(1 / (10 ||H_0||), pi / (4 omega_uv))`.
pub fn default_dt(h0_norm: f64, omega_uv: f64) -> f64 {
    let coherent = if h0_norm > 0.0 { 0.1 / h0_norm } else { f64::INFINITY };
    let band = if omega_uv > 0.0 { PI / (4.0 * omega_uv) } else { f64::INFINITY };
    let dt = coherent.min(band);
    if dt.is_finite() {
        dt
    } else {
        0.01
    }
}

/// Ideal propagators `U_0(t_k, 0)` and `U_0(T, t_k)` on every grid time.
#[derive(Debug, Clone)]
pub struct PropagatorCache {
    pub grid: TimeGrid,
    pub forward: Vec<CMatrix>,
    pub anchored: Vec<CMatrix>,
}

impl PropagatorCache {
    pub fn build(schedule: &Schedule) -> Result<Self> {
        let grid = schedule.grid;
        let n = schedule.dim();
        let mut forward = Vec::with_capacity(grid.steps + 1);
        forward.push(CMatrix::identity(n, n));
        let mut step: Option<(usize, CMatrix)> = None;
        for k in 0..grid.steps {
            let h = schedule.hamiltonian(k);
            let reuse = matches!(&step, Some((j, _)) if schedule.hamiltonian(*j) == h);
            if !reuse {
                step = Some((k, exp_from_eigen(&hermitian_eigen(h)?, grid.dt)));
            }
            let u = &step.as_ref().unwrap().1 * &forward[k];
            forward.push(u);
        }
        let total = forward[grid.steps].clone();
        let anchored: Vec<CMatrix> = forward.iter().map(|u| &total * u.adjoint()).collect();
        let worst = forward.iter().chain(&anchored).fold(0.0f64, |m, u| m.max(unitarity_deviation(u)));
        if worst > 1e-9 {
            return Err(Error::NotUnitary { deviation: worst });
        }
        Ok(PropagatorCache { grid, forward, anchored })
    }

    pub fn total(&self) -> &CMatrix {
        &self.forward[self.grid.steps]
    }

    /// `U_0(t_k, 0) rho U_0(t_k, 0)^dag`.
    pub fn state_at(&self, rho0: &CMatrix, k: usize) -> CMatrix {
        let u = &self.forward[k];
        u * rho0 * u.adjoint()
    }
}

/// Ideal evolution; returns the propagator cache and `rho_0(T)`.
pub fn ideal_propagate(schedule: &Schedule, rho0: &CMatrix) -> Result<(PropagatorCache, CMatrix)> {
    check_state(rho0, schedule.dim())?;
    let cache = PropagatorCache::build(schedule)?;
    let out = cache.state_at(rho0, schedule.grid.steps);
    Ok((cache, out))
}

fn check_state(rho: &CMatrix, n: usize) -> Result<()> {
    if !rho.is_square() || rho.nrows() != n {
        return Err(Error::DimensionMismatch { expected: n, found: rho.nrows() });
    }
    if !is_hermitian(rho) {
        return Err(Error::NotHermitian { deviation: hermiticity_deviation(rho) });
    }
    let tr = rho.trace();
    if (tr.re - 1.0).abs() > 1e-8 || tr.im.abs() > 1e-8 {
        return Err(Error::NonUnitTrace { trace: tr.re });
    }
    Ok(())
}

fn check_trajectory(schedule: &Schedule, model: &NoiseModel, traj: &Trajectory) -> Result<()> {
    if !traj.grid.matches(&schedule.grid) {
        return Err(Error::GridMismatch(format!(
            "trajectory grid (dt={}, steps={}) differs from schedule grid (dt={}, steps={})",
            traj.grid.dt, traj.grid.steps, schedule.grid.dt, schedule.grid.steps
        )));
    }
    if traj.midpoints.len() != model.len() {
        return Err(Error::GridMismatch(format!(
            "trajectory has {} channels, model has {}",
            traj.midpoints.len(),
            model.len()
        )));
    }
    if model.dim() != schedule.dim() {
        return Err(Error::DimensionMismatch { expected: schedule.dim(), found: model.dim() });
    }
    Ok(())
}

/// `H_0(t_k) + sum_mu beta_mu(t_k + dt/2) N_mu` written into `out`.
fn total_hamiltonian(schedule: &Schedule, model: &NoiseModel, traj: &Trajectory, k: usize, out: &mut CMatrix) {
    out.copy_from(schedule.hamiltonian(k));
    for (mu, ch) in model.channels.iter().enumerate() {
        let beta = traj.midpoints[mu][k];
        if beta != 0.0 {
            out.zip_apply(&ch.operator, |o, x| *o += x * beta);
        }
    }
}

/// Full step-by-step unitary `U(T, 0)` of one trajectory, through eigen
/// decompositions of each step Hamiltonian.
pub fn noisy_propagator(schedule: &Schedule, model: &NoiseModel, traj: &Trajectory) -> Result<CMatrix> {
    check_trajectory(schedule, model, traj)?;
    let n = schedule.dim();
    let mut u = CMatrix::identity(n, n);
    let mut h = CMatrix::zeros(n, n);
    for k in 0..schedule.grid.steps {
        total_hamiltonian(schedule, model, traj, k, &mut h);
        u = exp_from_eigen(&hermitian_eigen(&h)?, schedule.grid.dt) * u;
    }
    Ok(u)
}

/// Pure-state decomposition `rho = sum_a p_a |psi_a><psi_a|`, dropping
/// components with negligible weight.
fn pure_components(rho: &CMatrix) -> Result<Vec<(f64, DVector<Complex64>)>> {
    let eig = hermitian_eigen(rho)?;
    let max = eig.values.iter().fold(0.0f64, |m, v| m.max(*v));
    Ok(eig
        .values
        .iter()
        .enumerate()
        .filter(|(_, &p)| p > 1e-15 * max)
        .map(|(j, &p)| (p, eig.vectors.column(j).clone_owned()))
        .collect())
}

/// `v <- exp(-i h dt) v` by a Taylor series truncated at double precision;
/// falls back to the eigen route when `||h|| dt` is large.
fn step_vector(h: &CMatrix, dt: f64, v: &mut DVector<Complex64>, term: &mut DVector<Complex64>) -> Result<()> {
    let bound = h.norm() * dt;
    if bound > 1.0 {
        let u = exp_from_eigen(&hermitian_eigen(h)?, dt);
        *v = &u * &*v;
        return Ok(());
    }
    term.copy_from(v);
    let mut j = 1.0;
    loop {
        let next = h * &*term;
        term.copy_from(&next);
        *term *= Complex64::new(0.0, -dt / j);
        *v += &*term;
        if term.norm() <= 1e-17 * v.norm() || j > 40.0 {
            break;
        }
        j += 1.0;
    }
    Ok(())
}

/// Evolve `rho0` under one noise realisation, recording the states at the
/// requested step indices (sorted ascending, each `<= steps`).
fn evolve(
    schedule: &Schedule,
    model: &NoiseModel,
    traj: &Trajectory,
    components: &[(f64, DVector<Complex64>)],
    checkpoints: &[usize],
) -> Result<(CMatrix, Vec<CMatrix>)> {
    let n = schedule.dim();
    let mut states: Vec<DVector<Complex64>> = components.iter().map(|c| c.1.clone()).collect();
    let mut term = DVector::from_element(n, ZERO);
    let mut h = CMatrix::zeros(n, n);
    let assemble = |states: &[DVector<Complex64>]| -> CMatrix {
        let mut rho = CMatrix::zeros(n, n);
        for ((p, _), psi) in components.iter().zip(states) {
            rho.ger(Complex64::new(*p, 0.0), psi, &psi.conjugate(), ONE);
        }
        rho
    };
    let mut recorded = Vec::with_capacity(checkpoints.len());
    let mut next = 0;
    for k in 0..=schedule.grid.steps {
        while next < checkpoints.len() && checkpoints[next] == k {
            recorded.push(assemble(&states));
            next += 1;
        }
        if k == schedule.grid.steps {
            break;
        }
        total_hamiltonian(schedule, model, traj, k, &mut h);
        for psi in states.iter_mut() {
            step_vector(&h, schedule.grid.dt, psi, &mut term)?;
        }
    }
    Ok((assemble(&states), recorded))
}

/// Final state `U rho0 U^dag` of one noisy trajectory (midpoint sampling).
pub fn noisy_trajectory(schedule: &Schedule, model: &NoiseModel, traj: &Trajectory, rho0: &CMatrix) -> Result<CMatrix> {
    check_trajectory(schedule, model, traj)?;
    check_state(rho0, schedule.dim())?;
    Ok(evolve(schedule, model, traj, &pure_components(rho0)?, &[])?.0)
}

/// Monte Carlo ensemble settings.
#[derive(Debug, Clone)]
pub struct EnsembleConfig {
    pub trajectories: usize,
    pub master_seed: u64,
    /// Pair trajectory `2p + 1` with the sign-flipped draws of `2p`.
    pub antithetic: bool,
    pub keep_states: bool,
    /// Step indices at which the mean state is recorded.
    pub checkpoints: Vec<usize>,
    /// Frequency modes of the synthesiser (`None` = default).
    pub modes: Option<usize>,
    /// Dedicated worker count; `None` uses the ambient rayon pool.
    pub threads: Option<usize>,
}

impl EnsembleConfig {
    pub fn new(trajectories: usize, master_seed: u64) -> Self {
        EnsembleConfig {
            trajectories,
            master_seed,
            antithetic: false,
            keep_states: false,
            checkpoints: Vec::new(),
            modes: None,
            threads: None,
        }
    }

    /// Seed and sign of trajectory `index`.
    pub fn draw(&self, index: usize) -> (u64, bool) {
        if self.antithetic {
            (trajectory_seed(self.master_seed, (index / 2) as u64), index % 2 == 1)
        } else {
            (trajectory_seed(self.master_seed, index as u64), false)
        }
    }
}

/// Noise-averaged final state and diagnostics.
#[derive(Debug, Clone)]
pub struct StateEnsemble {
    pub count: usize,
    pub mean_state: CMatrix,
    pub states: Option<Vec<CMatrix>>,
    /// `1 / sqrt(M)`.
    pub statistical_floor: f64,
    /// `(step index, mean state)` for each requested checkpoint.
    pub checkpoints: Vec<(usize, CMatrix)>,
}

struct Partial {
    final_sum: CMatrix,
    checkpoint_sums: Vec<CMatrix>,
    states: Vec<CMatrix>,
}

fn combine(mut a: Partial, b: Partial) -> Partial {
    a.final_sum += &b.final_sum;
    for (x, y) in a.checkpoint_sums.iter_mut().zip(&b.checkpoint_sums) {
        *x += y;
    }
    a.states.extend(b.states);
    a
}

/// Pairwise tree reduction in a fixed order.
fn tree_reduce(mut items: Vec<Partial>) -> Partial {
    while items.len() > 1 {
        let mut next = Vec::with_capacity(items.len().div_ceil(2));
        let mut it = items.into_iter();
        while let Some(a) = it.next() {
            match it.next() {
                Some(b) => next.push(combine(a, b)),
                None => next.push(a),
            }
        }
        items = next;
    }
    items.pop().expect("at least one chunk")
}

/// Mean of `M` noisy trajectories.
///
/// Trajectory `m` draws its noise from a seed derived from
/// `(master_seed, m)`; chunk sums are combined by a fixed pairwise tree, so
/// the result is bit-identical for any number of workers.
pub fn ensemble_average(
    schedule: &Schedule,
    model: &NoiseModel,
    config: &EnsembleConfig,
    rho0: &CMatrix,
) -> Result<StateEnsemble> {
    if config.trajectories == 0 {
        return Err(Error::Config("ensemble needs at least one trajectory".into()));
    }
    check_state(rho0, schedule.dim())?;
    if model.dim() != schedule.dim() {
        return Err(Error::DimensionMismatch { expected: schedule.dim(), found: model.dim() });
    }
    let mut checkpoints = config.checkpoints.clone();
    checkpoints.sort_unstable();
    checkpoints.dedup();
    if let Some(&last) = checkpoints.last() {
        if last > schedule.grid.steps {
            return Err(Error::Config(format!("checkpoint {last} beyond {} steps", schedule.grid.steps)));
        }
    }
    let plan = SynthesisPlan::new(model, schedule.grid, config.modes)?;
    let components = pure_components(rho0)?;
    let n = schedule.dim();

    let run_chunk = |c: usize| -> Result<Partial> {
        let start = c * CHUNK;
        let end = (start + CHUNK).min(config.trajectories);
        let mut part = Partial {
            final_sum: CMatrix::zeros(n, n),
            checkpoint_sums: vec![CMatrix::zeros(n, n); checkpoints.len()],
            states: Vec::new(),
        };
        for m in start..end {
            let (seed, negate) = config.draw(m);
            let traj = plan.sample(seed, negate);
            let (rho, recorded) = evolve(schedule, model, &traj, &components, &checkpoints)?;
            part.final_sum += &rho;
            for (acc, r) in part.checkpoint_sums.iter_mut().zip(&recorded) {
                *acc += r;
            }
            if config.keep_states {
                part.states.push(rho);
            }
        }
        Ok(part)
    };

    let chunks = config.trajectories.div_ceil(CHUNK);
    let compute = || -> Result<Vec<Partial>> { (0..chunks).into_par_iter().map(run_chunk).collect() };
    let parts = match config.threads {
        Some(t) => rayon::ThreadPoolBuilder::new()
            .num_threads(t.max(1))
            .build()
            .map_err(|e| Error::Config(format!("thread pool: {e}")))?
            .install(compute)?,
        None => compute()?,
    };
    let total = tree_reduce(parts);
    let scale = Complex64::new(1.0 / config.trajectories as f64, 0.0);
    let hermitize = |a: CMatrix| -> CMatrix {
        let s = a * scale;
        (&s + s.adjoint()) * Complex64::new(0.5, 0.0)
    };
    Ok(StateEnsemble {
        count: config.trajectories,
        mean_state: hermitize(total.final_sum),
        states: config.keep_states.then_some(total.states),
        statistical_floor: 1.0 / (config.trajectories as f64).sqrt(),
        checkpoints: checkpoints
            .iter()
            .copied()
            .zip(total.checkpoint_sums.into_iter().map(hermitize))
            .collect(),
    })
}
