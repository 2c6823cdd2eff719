//! Time integration of the coupled bulk-surface system.
//!
//! The spatially discrete problem is an ODE system in the vertex
//! coefficients: two bulk fields in shifted form (`b_t = b - b0`,
//! `q_t = q - q0`, so the top Dirichlet data is zero) and two surface fields
//! (`eta`, `theta`). One IMEX Euler step treats diffusion implicitly and the
//! kinetics explicitly, which keeps the four solves independent and lets the
//! four system matrices be factorized once and reused for every step.
//!
//! The same step routine serves two modes: the full coupled model, and a
//! surface-only mode that freezes the bulk at its far-field values and
//! evolves just `eta`, `theta` (the classical two-variable model on the
//! square). With both coupling constants zero the two modes produce the same
//! surface trajectory bit for bit, which is one of the standing tests.

use std::time::Instant;

use rand::{RngExt, SeedableRng};
use rand_chacha::ChaCha12Rng;
use thiserror::Error;

use crate::kinetics::ModelParameters;
use crate::linalg::{diag_plus_scaled, LinalgError, SpdSolver};
use crate::mesh::PolyhedralMesh;
use crate::vem::{assemble_operators, DiscreteOperators, VemError};

/// Weighted standard deviation at or above this marks a field as patterned;
/// chosen an order of magnitude above where seeded noise settles when it
/// decays, and an order below where it saturates when it grows.
pub const PATTERN_STD_THRESHOLD: f64 = 1e-3;

#[derive(Debug, Error)]
pub enum SolverError {
    #[error("invalid time-stepping config: {0}")]
    InvalidConfig(String),
    #[error("solution diverged at step {step} (t = {time}) in field {field}")]
    NonFinite {
        step: usize,
        time: f64,
        field: &'static str,
    },
    #[error(transparent)]
    Vem(#[from] VemError),
    #[error(transparent)]
    Linalg(#[from] LinalgError),
}

/// Norm used for the per-step increment series.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum IncrementNorm {
    /// Lumped-mass-weighted L2 norm; scales consistently across meshes.
    L2,
    /// Plain max-abs norm.
    Linf,
}

impl IncrementNorm {
    pub fn name(&self) -> &'static str {
        match self {
            IncrementNorm::L2 => "l2",
            IncrementNorm::Linf => "linf",
        }
    }

    fn apply(&self, diff: &[f64], weights: &[f64]) -> f64 {
        match self {
            IncrementNorm::L2 => diff
                .iter()
                .zip(weights)
                .map(|(d, w)| w * d * d)
                .sum::<f64>()
                .sqrt(),
            IncrementNorm::Linf => diff.iter().fold(0.0f64, |acc, d| acc.max(d.abs())),
        }
    }
}

/// Which fields a run evolves.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum SimMode {
    /// Full bulk-surface model on the polyhedral mesh.
    Coupled3d,
    /// Surface fields only, bulk pinned at its far-field values.
    Surface2d,
}

#[derive(Debug, Clone)]
pub struct TimeSteppingConfig {
    pub tau: f64,
    pub t_end: f64,
    pub seed: u64,
    /// Noise amplitude of the initial surface perturbation.
    pub ic_amplitude: f64,
    /// Keep a snapshot every this many steps (0 = final state only).
    pub snapshot_every: usize,
    pub increment_norm: IncrementNorm,
    /// Any field magnitude beyond this aborts as divergence.
    pub max_field: f64,
}

impl TimeSteppingConfig {
    pub fn new(tau: f64, t_end: f64) -> Self {
        TimeSteppingConfig {
            tau,
            t_end,
            seed: 42,
            ic_amplitude: 1e-2,
            snapshot_every: 0,
            increment_norm: IncrementNorm::L2,
            max_field: 1e6,
        }
    }

    pub fn validate(&self) -> Result<(), SolverError> {
        if !(self.tau.is_finite() && self.tau > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "tau must be positive, got {}",
                self.tau
            )));
        }
        if !(self.t_end.is_finite() && self.t_end > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "T must be positive, got {}",
                self.t_end
            )));
        }
        if !(self.ic_amplitude.is_finite() && self.ic_amplitude >= 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "ic_amplitude must be nonnegative, got {}",
                self.ic_amplitude
            )));
        }
        if !(self.max_field.is_finite() && self.max_field > 0.0) {
            return Err(SolverError::InvalidConfig(format!(
                "max_field must be positive, got {}",
                self.max_field
            )));
        }
        Ok(())
    }

    /// Number of steps: ceil(T / tau).
    pub fn n_steps(&self) -> usize {
        ((self.t_end / self.tau).ceil() as usize).max(1)
    }
}

/// Current fields, in shifted bulk variables. Bulk vectors hold the free
/// dofs only (the eliminated top-plane values are zero in shifted form);
/// with surface-first numbering the first `n_surface` entries are the trace.
#[derive(Debug, Clone)]
pub struct SimulationState {
    pub time: f64,
    pub step: usize,
    pub b_t: Vec<f64>,
    pub q_t: Vec<f64>,
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
}

/// The four factorized time-step matrices. Diffusion coefficients and tau
/// are baked in, so each step is four triangular solves.
pub struct FactorizedSystems {
    /// `(M + tau A, M + d_omega tau A)` on the free bulk dofs; absent in
    /// surface-only mode.
    bulk: Option<(SpdSolver, SpdSolver)>,
    /// `(M + tau A, M + d_gamma tau A)` on the surface dofs.
    surface: (SpdSolver, SpdSolver),
    tau: f64,
}

impl FactorizedSystems {
    pub fn tau(&self) -> f64 {
        self.tau
    }
}

pub fn prepare_systems(
    ops: &DiscreteOperators,
    params: &ModelParameters,
    tau: f64,
    mode: SimMode,
) -> Result<FactorizedSystems, SolverError> {
    if !(tau.is_finite() && tau > 0.0) {
        return Err(SolverError::InvalidConfig(format!(
            "tau must be positive, got {tau}"
        )));
    }
    let bulk = match mode {
        SimMode::Coupled3d => {
            let m_b = diag_plus_scaled(&ops.bulk_mass_lumped, &ops.bulk_stiffness, tau);
            let m_q = diag_plus_scaled(
                &ops.bulk_mass_lumped,
                &ops.bulk_stiffness,
                params.d_omega * tau,
            );
            Some((SpdSolver::new(&m_b)?, SpdSolver::new(&m_q)?))
        }
        SimMode::Surface2d => None,
    };
    let s_eta = diag_plus_scaled(&ops.surface_mass_lumped, &ops.surface_stiffness, tau);
    let s_theta = diag_plus_scaled(
        &ops.surface_mass_lumped,
        &ops.surface_stiffness,
        params.d_gamma * tau,
    );
    Ok(FactorizedSystems {
        bulk,
        surface: (SpdSolver::new(&s_eta)?, SpdSolver::new(&s_theta)?),
        tau,
    })
}

/// Random initial state: bulk exactly at the far field (zero in shifted
/// variables), surface noise seeded per node. All `eta` values are drawn
/// before all `theta` values, so the realization is independent of how the
/// fields are later laid out in memory.
pub fn initial_state(
    ops: &DiscreteOperators,
    params: &ModelParameters,
    ts: &TimeSteppingConfig,
    mode: SimMode,
) -> SimulationState {
    let n_surface = ops.reduction.n_surface();
    let n_bulk = match mode {
        SimMode::Coupled3d => ops.reduction.n_free(),
        SimMode::Surface2d => 0,
    };
    let mut rng = ChaCha12Rng::seed_from_u64(ts.seed);
    let amp = ts.ic_amplitude;
    let eta: Vec<f64> = (0..n_surface).map(|_| amp * rng.random::<f64>()).collect();
    let theta: Vec<f64> = (0..n_surface)
        .map(|_| params.alpha + amp * (2.0 * rng.random::<f64>() - 1.0))
        .collect();
    SimulationState {
        time: 0.0,
        step: 0,
        b_t: vec![0.0; n_bulk],
        q_t: vec![0.0; n_bulk],
        eta,
        theta,
    }
}

fn check_finite(
    field: &[f64],
    name: &'static str,
    state: &SimulationState,
    max_field: f64,
) -> Result<(), SolverError> {
    for &v in field {
        if !v.is_finite() || v.abs() > max_field {
            return Err(SolverError::NonFinite {
                step: state.step,
                time: state.time,
                field: name,
            });
        }
    }
    Ok(())
}

/// One IMEX Euler step: explicit kinetics into the right-hand sides, then
/// one pre-factorized solve per field, in the order b, q, eta, theta.
pub fn imex_step(
    state: &mut SimulationState,
    systems: &FactorizedSystems,
    ops: &DiscreteOperators,
    params: &ModelParameters,
    mode: SimMode,
    max_field: f64,
) -> Result<(), SolverError> {
    let tau = systems.tau;
    let n_surface = ops.reduction.n_surface();
    let m_gamma = &ops.surface_mass_lumped;
    debug_assert_eq!(state.eta.len(), n_surface);

    // Surface kinetics use the bulk trace: the first n_surface bulk entries
    // in coupled mode, the far field (zero shifted) in surface-only mode.
    let trace = |bulk: &[f64], k: usize| -> f64 {
        match mode {
            SimMode::Coupled3d => bulk[k],
            SimMode::Surface2d => 0.0,
        }
    };
    let f3: Vec<f64> = (0..n_surface)
        .map(|k| params.f3_tilde(trace(&state.b_t, k), state.eta[k], state.theta[k]))
        .collect();
    let f4: Vec<f64> = (0..n_surface)
        .map(|k| params.f4_tilde(trace(&state.q_t, k), state.eta[k], state.theta[k]))
        .collect();

    if mode == SimMode::Coupled3d {
        let (sys_b, sys_q) = systems.bulk.as_ref().ok_or_else(|| {
            SolverError::InvalidConfig(
                "factorized systems lack the bulk pair for coupled mode".into(),
            )
        })?;
        let m_bulk = &ops.bulk_mass_lumped;
        let n_free = m_bulk.len();
        debug_assert_eq!(state.b_t.len(), n_free);
        let mut rhs_b = Vec::with_capacity(n_free);
        let mut rhs_q = Vec::with_capacity(n_free);
        for i in 0..n_free {
            let mut rb = m_bulk[i] * (state.b_t[i] + tau * params.f1_tilde(state.b_t[i]));
            let mut rq = m_bulk[i] * (state.q_t[i] + tau * params.f2_tilde(state.q_t[i]));
            if i < n_surface {
                // Flux boundary condition on the working surface: deposition
                // consumes b, adsorption consumes q (the latter scaled by the
                // bulk diffusivity from the weak form).
                rb -= tau * params.psi_eta * m_gamma[i] * f3[i];
                rq -= tau * params.d_omega * params.psi_theta * m_gamma[i] * f4[i];
            }
            rhs_b.push(rb);
            rhs_q.push(rq);
        }
        state.b_t = sys_b.solve(&rhs_b);
        state.q_t = sys_q.solve(&rhs_q);
    }

    let rhs_eta: Vec<f64> = (0..n_surface)
        .map(|k| m_gamma[k] * (state.eta[k] + tau * f3[k]))
        .collect();
    let rhs_theta: Vec<f64> = (0..n_surface)
        .map(|k| m_gamma[k] * (state.theta[k] + tau * f4[k]))
        .collect();
    state.eta = systems.surface.0.solve(&rhs_eta);
    state.theta = systems.surface.1.solve(&rhs_theta);

    state.step += 1;
    state.time += tau;
    check_finite(&state.b_t, "b", state, max_field)?;
    check_finite(&state.q_t, "q", state, max_field)?;
    check_finite(&state.eta, "eta", state, max_field)?;
    check_finite(&state.theta, "theta", state, max_field)?;
    Ok(())
}

/// Per-step sizes of the surface field updates.
#[derive(Debug, Clone)]
pub struct IncrementSeries {
    pub norm: IncrementNorm,
    pub times: Vec<f64>,
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
}

impl IncrementSeries {
    fn with_capacity(norm: IncrementNorm, n: usize) -> Self {
        IncrementSeries {
            norm,
            times: Vec::with_capacity(n),
            eta: Vec::with_capacity(n),
            theta: Vec::with_capacity(n),
        }
    }
}

/// Physical (unshifted) fields at one instant. Bulk vectors cover every
/// mesh vertex; they are empty in surface-only mode.
#[derive(Debug, Clone)]
pub struct Snapshot {
    pub step: usize,
    pub time: f64,
    pub b: Vec<f64>,
    pub q: Vec<f64>,
    pub eta: Vec<f64>,
    pub theta: Vec<f64>,
}

/// Wall-clock seconds per stage, for the run metadata.
#[derive(Debug, Clone, Copy, Default)]
pub struct StageTimes {
    pub assembly: f64,
    pub factorization: f64,
    pub stepping: f64,
}

#[derive(Debug)]
pub struct RunResult {
    pub final_state: Snapshot,
    pub increments: IncrementSeries,
    pub snapshots: Vec<Snapshot>,
    /// Set when the final increment exceeds the first one: the run moved
    /// away from where it started and likely has not settled.
    pub growing_increments: bool,
    pub stage_times: StageTimes,
    pub n_steps: usize,
}

fn physical_snapshot(
    state: &SimulationState,
    ops: &DiscreteOperators,
    params: &ModelParameters,
    mode: SimMode,
) -> Snapshot {
    let (b, q) = match mode {
        SimMode::Coupled3d => {
            let mut b = ops.reduction.prolong(&state.b_t);
            let mut q = ops.reduction.prolong(&state.q_t);
            for v in b.iter_mut() {
                *v += params.b0;
            }
            for v in q.iter_mut() {
                *v += params.q0;
            }
            (b, q)
        }
        SimMode::Surface2d => (Vec::new(), Vec::new()),
    };
    Snapshot {
        step: state.step,
        time: state.time,
        b,
        q,
        eta: state.eta.clone(),
        theta: state.theta.clone(),
    }
}

/// Assemble, factorize, and step the model from seeded initial data.
/// Snapshots report the unshifted physical fields.
pub fn run_simulation(
    mesh: &PolyhedralMesh,
    params: &ModelParameters,
    ts: &TimeSteppingConfig,
    mode: SimMode,
) -> Result<RunResult, SolverError> {
    ts.validate()?;
    let n_steps = ts.n_steps();

    let t0 = Instant::now();
    let ops = assemble_operators(mesh)?;
    let assembly = t0.elapsed().as_secs_f64();

    let t1 = Instant::now();
    let systems = prepare_systems(&ops, params, ts.tau, mode)?;
    let factorization = t1.elapsed().as_secs_f64();

    let t2 = Instant::now();
    let mut state = initial_state(&ops, params, ts, mode);
    let mut increments = IncrementSeries::with_capacity(ts.increment_norm, n_steps);
    let mut snapshots = Vec::new();
    if ts.snapshot_every > 0 {
        snapshots.push(physical_snapshot(&state, &ops, params, mode));
    }

    let mut eta_prev = state.eta.clone();
    let mut theta_prev = state.theta.clone();
    let mut diff = vec![0.0f64; state.eta.len()];
    for _ in 0..n_steps {
        imex_step(&mut state, &systems, &ops, params, mode, ts.max_field)?;

        for (d, (new, old)) in diff.iter_mut().zip(state.eta.iter().zip(&eta_prev)) {
            *d = new - old;
        }
        let inc_eta = ts.increment_norm.apply(&diff, &ops.surface_mass_lumped);
        for (d, (new, old)) in diff.iter_mut().zip(state.theta.iter().zip(&theta_prev)) {
            *d = new - old;
        }
        let inc_theta = ts.increment_norm.apply(&diff, &ops.surface_mass_lumped);
        increments.times.push(state.time);
        increments.eta.push(inc_eta);
        increments.theta.push(inc_theta);
        eta_prev.copy_from_slice(&state.eta);
        theta_prev.copy_from_slice(&state.theta);

        if ts.snapshot_every > 0
            && state.step.is_multiple_of(ts.snapshot_every)
            && state.step < n_steps
        {
            snapshots.push(physical_snapshot(&state, &ops, params, mode));
        }
    }
    let final_state = physical_snapshot(&state, &ops, params, mode);
    snapshots.push(final_state.clone());
    let stepping = t2.elapsed().as_secs_f64();

    let growing_increments = match (increments.eta.first(), increments.eta.last()) {
        (Some(first), Some(last)) => last > first,
        _ => false,
    };
    Ok(RunResult {
        final_state,
        increments,
        snapshots,
        growing_increments,
        stage_times: StageTimes {
            assembly,
            factorization,
            stepping,
        },
        n_steps,
    })
}

/// Summary of an increment series.
#[derive(Debug, Clone, Copy)]
pub struct SteadyStateReport {
    pub final_increment: f64,
    pub max_increment: f64,
    /// First time at which the increment dropped to a tenth of its maximum
    /// and stayed at or below from there on; None if it never did.
    pub decade_decay_time: Option<f64>,
    /// True when the series never increases step over step.
    pub monotone_decreasing: bool,
}

pub fn steady_state_diagnostics(series: &IncrementSeries) -> SteadyStateReport {
    let eta = &series.eta;
    assert!(!eta.is_empty(), "diagnostics need at least one step");
    let max_increment = eta.iter().fold(0.0f64, |a, &b| a.max(b));
    let final_increment = *eta.last().unwrap();
    let threshold = max_increment / 10.0;
    let mut decade_decay_time = None;
    for i in (0..eta.len()).rev() {
        if eta[i] > threshold {
            break;
        }
        decade_decay_time = Some(series.times[i]);
    }
    let monotone_decreasing = eta.windows(2).all(|w| w[1] <= w[0]);
    SteadyStateReport {
        final_increment,
        max_increment,
        decade_decay_time,
        monotone_decreasing,
    }
}

/// Basic statistics of a surface field under the lumped surface measure.
#[derive(Debug, Clone, Copy)]
pub struct PatternIndicators {
    pub mean: f64,
    pub weighted_mean: f64,
    /// Weighted standard deviation about the weighted mean.
    pub std: f64,
    pub min: f64,
    pub max: f64,
    /// Weighted third standardized moment; separates spots-up from
    /// spots-down morphologies. Zero for a symmetric field.
    pub skewness: f64,
}

pub fn pattern_indicators(field: &[f64], weights: &[f64]) -> PatternIndicators {
    assert_eq!(field.len(), weights.len());
    assert!(!field.is_empty());
    let n = field.len() as f64;
    let mean = field.iter().sum::<f64>() / n;
    let total_w: f64 = weights.iter().sum();
    let weighted_mean = field.iter().zip(weights).map(|(x, w)| w * x).sum::<f64>() / total_w;
    let var = field
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - weighted_mean) * (x - weighted_mean))
        .sum::<f64>()
        / total_w;
    let std = var.sqrt();
    let m3 = field
        .iter()
        .zip(weights)
        .map(|(x, w)| w * (x - weighted_mean).powi(3))
        .sum::<f64>()
        / total_w;
    let skewness = if std > 0.0 {
        m3 / (std * std * std)
    } else {
        0.0
    };
    let min = field.iter().copied().fold(f64::INFINITY, f64::min);
    let max = field.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    PatternIndicators {
        mean,
        weighted_mean,
        std,
        min,
        max,
        skewness,
    }
}

/// Relative weighted-L2 distance between two fields, normalized by the
/// larger of the two norms (zero only for identical fields).
pub fn rel_l2_distance(a: &[f64], b: &[f64], weights: &[f64]) -> f64 {
    assert_eq!(a.len(), b.len());
    assert_eq!(a.len(), weights.len());
    let mut num = 0.0;
    let mut na = 0.0;
    let mut nb = 0.0;
    for ((&x, &y), &w) in a.iter().zip(b).zip(weights) {
        num += w * (x - y) * (x - y);
        na += w * x * x;
        nb += w * y * y;
    }
    let denom = na.max(nb).sqrt();
    if denom == 0.0 {
        0.0
    } else {
        num.sqrt() / denom
    }
}

/// Standard deviation of a full-mesh vertex field over each horizontal
/// plane of vertices, bottom to top: `(z, std, vertex count)` per plane.
pub fn bulk_plane_profile(mesh: &PolyhedralMesh, field: &[f64]) -> Vec<(f64, f64, usize)> {
    assert_eq!(field.len(), mesh.n_vertices());
    let planes = mesh.plane_z_values();
    let tol = 1e-9 * mesh.domain_edge().max(1.0);
    let mut sums = vec![(0.0f64, 0.0f64, 0usize); planes.len()];
    for v in 0..mesh.n_vertices() {
        let z = mesh.vertex(v)[2];
        let idx = planes
            .iter()
            .position(|&p| (p - z).abs() <= tol)
            .expect("vertex lies on a recorded plane");
        sums[idx].0 += field[v];
        sums[idx].1 += field[v] * field[v];
        sums[idx].2 += 1;
    }
    planes
        .iter()
        .zip(sums)
        .map(|(&z, (s, s2, n))| {
            let nf = n as f64;
            let mean = s / nf;
            let var = (s2 / nf - mean * mean).max(0.0);
            (z, var.sqrt(), n)
        })
        .collect()
}
