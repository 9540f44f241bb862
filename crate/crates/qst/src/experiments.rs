//! End-to-end runs and parameter sweeps.
//!
//! All runs use `T = 1`, so `J_B = J_B_times_T` and `γ = gamma_over_JM · J_M`
//! with `J_M` taken from the synthesized schedule of the chain being run.

use std::collections::BTreeMap;

use nalgebra::DMatrix;
use qst_core::dynamics::{CouplingGenerator, Disorder, ModelKind};
use qst_core::model::{zeno_basis, ChainModel};
use qst_core::propagate::{
    average_fidelity, evolve_density, evolve_state, phase_aligned_distance, phase_aligned_matrix_distance,
    required_steps, unitarity_error, BasisLayout, DensityMatrix, EvolveOptions, FidelitySeries, QuantumState,
    StateTrajectory, States, TimeGrid,
};
use qst_core::pulse::{boundary_couplings, calibrate_mu_with, BoundaryReport, CalibrationBracket, ControlSchedule};
use qst_core::C64;
use rayon::prelude::*;

use crate::config::{ExperimentConfig, NoisyFidelity, PulseConfig};
use crate::error::{Error, Result};

/// Agreement required between a sweep's unperturbed point and a direct run.
pub const REFERENCE_TOLERANCE: f64 = 1e-12;
/// Agreement required between a `γ = 0` density run and the pure-state run.
pub const DENSITY_REFERENCE_TOLERANCE: f64 = 1e-6;

const PROBES: usize = 2001;

/// A calibrated (or explicitly specified) pulse bound to a chain length.
#[derive(Debug, Clone)]
pub struct Design {
    pub n: usize,
    pub schedule: ControlSchedule,
    pub report: BoundaryReport,
}

impl Design {
    pub fn mu(&self) -> f64 {
        self.schedule.params().mu
    }

    pub fn j_m(&self) -> f64 {
        self.schedule.j_max()
    }
}

/// Builds the control schedule for `n` sites. With `mu = null` the amplitude is
/// calibrated and the boundary conditions must then hold; an explicit `mu` is
/// used as given.
pub fn design_for(pulse: &PulseConfig, n: usize) -> Result<Design> {
    let base = pulse.parameters()?;
    let params = match pulse.mu {
        Some(_) => base,
        None => base.with_mu(calibrate_mu_with(&base, n, &CalibrationBracket::default())?),
    };
    let schedule = boundary_couplings(&params, n)?;
    let report = schedule.verify_boundary_conditions();
    if pulse.mu.is_none() && !report.all_passed() {
        return Err(Error::Consistency(format!("calibrated pulse violates boundary conditions:\n{report}")));
    }
    Ok(Design { n, schedule, report })
}

pub fn design(cfg: &ExperimentConfig) -> Result<Design> {
    design_for(&cfg.pulse, cfg.n)
}

/// Step-size regime of a run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum StepRegime {
    /// `step_gate`; enough for states and for the Zeno block of the propagator.
    State,
    /// `propagator_step_gate`; keeps the whole propagator unitary.
    Propagator,
}

#[derive(Debug, Clone, Copy)]
pub struct RunOptions {
    pub convergence_check: bool,
    pub track_propagator: bool,
    pub regime: StepRegime,
    /// Integrate the master equation even when `γ = 0`.
    pub force_density: bool,
}

impl RunOptions {
    pub fn from_config(cfg: &ExperimentConfig) -> Self {
        Self {
            convergence_check: cfg.convergence_check,
            track_propagator: false,
            regime: StepRegime::State,
            force_density: false,
        }
    }
}

#[derive(Debug, Clone)]
pub struct TransferRun {
    /// Configuration with the pulse amplitude filled in.
    pub config: ExperimentConfig,
    pub j_m: f64,
    /// Absolute dephasing rate (units of `1/T`).
    pub gamma: f64,
    pub trajectory: StateTrajectory,
    pub fidelity: FidelitySeries,
    /// `1/2 + |f|/3 + |f|²/6` with `|f| = √(excitation population at N)`.
    pub population_fidelity: Vec<f64>,
    pub steps: usize,
    /// `|F(T; h) − F(T; h/2)|` when the convergence check ran.
    pub halving_change: Option<f64>,
}

impl TransferRun {
    pub fn final_fidelity(&self) -> f64 {
        self.fidelity.final_fidelity()
    }

    pub fn final_population_fidelity(&self) -> f64 {
        *self.population_fidelity.last().expect("empty run")
    }

    pub fn layout(&self) -> BasisLayout {
        self.trajectory.basis.expect("transfer runs carry a basis")
    }
}

/// Full pipeline: calibrate, synthesize couplings, build the generator for
/// `model_kind` and evolve from the sender state.
pub fn run_transfer(cfg: &ExperimentConfig) -> Result<TransferRun> {
    cfg.validate()?;
    let d = design(cfg)?;
    run_with_design(cfg, &d, RunOptions::from_config(cfg))
}

fn resolved(cfg: &ExperimentConfig, d: &Design) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.n = d.n;
    c.pulse.mu = Some(d.mu());
    c
}

/// Runs `cfg` on an existing design (its chain length wins over `cfg.n`).
pub fn run_with_design(cfg: &ExperimentConfig, d: &Design, opts: RunOptions) -> Result<TransferRun> {
    let n = d.n;
    let model = ChainModel::new(n, cfg.j_b_times_t)?;
    let disorder = Disorder {
        sender: cfg.noise.delta_js_rel,
        receiver: cfg.noise.delta_jr_rel,
    };
    let gen = CouplingGenerator::new(cfg.model(), model, &d.schedule, disorder)?;
    let j_m = d.j_m();
    let gamma = cfg.noise.gamma_over_jm * j_m;
    let layout = BasisLayout::Sector { sites: n };
    let layout = if cfg.model() == ModelKind::FullSpin {
        BasisLayout::FullSpin { sites: n }
    } else {
        layout
    };
    let density = gamma > 0.0 || opts.force_density;
    let gate = match opts.regime {
        StepRegime::State => cfg.step_gate,
        StepRegime::Propagator => cfg.propagator_step_gate,
    };
    let max_rate = if density { 2.0 * n as f64 * gamma } else { 0.0 };
    let steps = required_steps(&gen, 0.0, 1.0, max_rate, gate, PROBES);

    let run = |steps: usize| -> Result<StateTrajectory> {
        let grid = TimeGrid::new(0.0, 1.0, steps)?;
        let eo = EvolveOptions {
            record_every: cfg.decimation,
            track_propagator: opts.track_propagator,
            step_gate: gate,
        };
        if density {
            let rho0 = match cfg.noise.noisy_fidelity {
                NoisyFidelity::Channel => {
                    let r = C64::from(std::f64::consts::FRAC_1_SQRT_2);
                    DensityMatrix::from_pure(&QuantumState::encoded(&layout, r, r)?)
                }
                NoisyFidelity::Population => DensityMatrix::from_pure(&QuantumState::basis(layout.dim(), layout.sender())),
            };
            Ok(evolve_density(&gen, &rho0, gamma, grid, eo)?)
        } else {
            Ok(evolve_state(&gen, &QuantumState::basis(layout.dim(), layout.sender()), grid, eo)?)
        }
    };
    let run_gated = |steps: usize| -> Result<(usize, StateTrajectory)> {
        match run(steps) {
            Err(Error::Numerical(qst_core::Error::Resolution { required_steps, .. })) if required_steps > steps => {
                Ok((required_steps, run(required_steps)?))
            }
            other => other.map(|t| (steps, t)),
        }
    };

    let (steps, trajectory) = run_gated(steps)?;
    let fidelity = trajectory
        .fidelity
        .clone()
        .ok_or_else(|| Error::Consistency("trajectory carries no fidelity series".into()))?;
    let population_fidelity = population_fidelity(&trajectory, &layout, cfg.noise.noisy_fidelity);
    let final_f = fidelity.final_fidelity();

    let halving_change = if opts.convergence_check {
        let fine = run(2 * steps)?;
        let fine_f = fine
            .fidelity
            .as_ref()
            .map(FidelitySeries::final_fidelity)
            .unwrap_or(f64::NAN);
        let change = (fine_f - final_f).abs();
        if !(change < cfg.convergence_tolerance) {
            return Err(qst_core::Error::Resolution {
                message: format!(
                    "halving the step changed F(T) by {change:.3e} (tolerance {:.1e})",
                    cfg.convergence_tolerance
                ),
                required_steps: 4 * steps,
            }
            .into());
        }
        Some(change)
    } else {
        None
    };

    Ok(TransferRun {
        config: resolved(cfg, d),
        j_m,
        gamma,
        trajectory,
        fidelity,
        population_fidelity,
        steps,
        halving_change,
    })
}

fn population_fidelity(traj: &StateTrajectory, layout: &BasisLayout, conv: NoisyFidelity) -> Vec<f64> {
    let recv = layout.receiver();
    // From the superposition start the excitation block carries weight 1/2.
    let scale = match (&traj.states, conv) {
        (States::Mixed(_), NoisyFidelity::Channel) => 2.0,
        _ => 1.0,
    };
    (0..traj.states.len())
        .map(|k| average_fidelity((scale * traj.states.population(k, recv)).max(0.0).sqrt()))
        .collect()
}

/// Propagator unitarity drift `‖U†U − I‖_max` for `cfg` in the propagator step regime.
pub fn unitarity_drift(cfg: &ExperimentConfig, d: &Design) -> Result<f64> {
    let mut c = cfg.clone();
    c.noise.gamma_over_jm = 0.0;
    let opts = RunOptions {
        convergence_check: false,
        track_propagator: true,
        regime: StepRegime::Propagator,
        force_density: false,
    };
    let run = run_with_design(&c, d, opts)?;
    Ok(unitarity_error(run.trajectory.propagator.as_ref().expect("tracked")))
}

fn designs_for(pulse: &PulseConfig, ns: &[usize]) -> Result<BTreeMap<usize, Design>> {
    let mut unique: Vec<usize> = ns.to_vec();
    unique.sort_unstable();
    unique.dedup();
    let designs: Vec<Design> = unique.par_iter().map(|&n| design_for(pulse, n)).collect::<Result<_>>()?;
    Ok(unique.into_iter().zip(designs).collect())
}

/// Comparison of a sweep's unperturbed point with a direct [`run_transfer`].
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ReferenceCheck {
    pub sweep_fidelity: f64,
    pub direct_fidelity: f64,
    pub tolerance: f64,
}

impl ReferenceCheck {
    pub fn difference(&self) -> f64 {
        (self.sweep_fidelity - self.direct_fidelity).abs()
    }

    fn enforce(self, what: &str) -> Result<Self> {
        if self.difference() <= self.tolerance {
            Ok(self)
        } else {
            Err(Error::Consistency(format!(
                "{what}: unperturbed sweep point F = {} but direct run gives {} (tolerance {:.0e})",
                self.sweep_fidelity, self.direct_fidelity, self.tolerance
            )))
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BusRow {
    pub n: usize,
    pub j_b_times_t: f64,
    pub j_m: f64,
    pub fidelity: f64,
    pub halving_change: Option<f64>,
}

impl BusRow {
    pub fn infidelity(&self) -> f64 {
        1.0 - self.fidelity
    }

    pub fn ratio(&self) -> f64 {
        self.j_b_times_t / self.j_m
    }
}

#[derive(Debug, Clone)]
pub struct BusSweep {
    pub rows: Vec<BusRow>,
    pub reference: ReferenceCheck,
}

/// `1 − F(T)` against `J_B T` for each chain length (rows ordered by `N`, then
/// by the order of `values`).
pub fn sweep_bus_coupling(cfg: &ExperimentConfig, values: &[f64], ns: &[usize]) -> Result<BusSweep> {
    cfg.validate()?;
    if values.is_empty() || ns.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Config("bus sweep needs nonempty positive J_B_times_T values and chain lengths".into()));
    }
    let mut all_n = ns.to_vec();
    all_n.push(cfg.n);
    let designs = designs_for(&cfg.pulse, &all_n)?;
    let mut jobs: Vec<(usize, f64)> = ns.iter().flat_map(|&n| values.iter().map(move |&v| (n, v))).collect();
    let reference_index = jobs.iter().position(|&(n, v)| n == cfg.n && v == cfg.j_b_times_t);
    if reference_index.is_none() {
        jobs.push((cfg.n, cfg.j_b_times_t));
    }
    let mut rows: Vec<BusRow> = jobs
        .par_iter()
        .map(|&(n, v)| {
            let mut c = cfg.clone();
            c.n = n;
            c.j_b_times_t = v;
            let run = run_with_design(&c, &designs[&n], RunOptions::from_config(&c))?;
            Ok(BusRow {
                n,
                j_b_times_t: v,
                j_m: run.j_m,
                fidelity: run.final_fidelity(),
                halving_change: run.halving_change,
            })
        })
        .collect::<Result<_>>()?;
    let sweep_f = match reference_index {
        Some(i) => rows[i].fidelity,
        None => rows.pop().expect("reference job").fidelity,
    };
    let direct = run_transfer(cfg)?.final_fidelity();
    let reference = ReferenceCheck {
        sweep_fidelity: sweep_f,
        direct_fidelity: direct,
        tolerance: REFERENCE_TOLERANCE,
    }
    .enforce("bus sweep")?;
    Ok(BusSweep { rows, reference })
}

#[derive(Debug, Clone)]
pub struct DisorderSweep {
    pub deltas: Vec<f64>,
    /// `fidelity[i][j]` at `δ_S = deltas[i]`, `δ_R = deltas[j]`.
    pub fidelity: Vec<Vec<f64>>,
    pub reference: ReferenceCheck,
}

impl DisorderSweep {
    /// `max |F(δ_S, δ_R) − F(δ_R, δ_S)|`.
    pub fn max_asymmetry(&self) -> f64 {
        let m = self.deltas.len();
        let mut worst = 0.0f64;
        for i in 0..m {
            for j in 0..m {
                worst = worst.max((self.fidelity[i][j] - self.fidelity[j][i]).abs());
            }
        }
        worst
    }

    pub fn corners(&self) -> [f64; 4] {
        let l = self.deltas.len() - 1;
        [self.fidelity[0][0], self.fidelity[0][l], self.fidelity[l][0], self.fidelity[l][l]]
    }
}

/// `F(T)` over static relative offsets of `J_S` and `J_R`. Only the
/// unperturbed point is rerun on a halved step; the other points share its
/// step count up to the few-percent change in coupling strength.
pub fn sweep_disorder(cfg: &ExperimentConfig, deltas: &[f64]) -> Result<DisorderSweep> {
    cfg.validate()?;
    if deltas.is_empty() || deltas.iter().any(|d| !(d.abs() <= 0.5)) {
        return Err(Error::Config("disorder grid must be nonempty with |delta| <= 0.5".into()));
    }
    let d = design(cfg)?;
    let mut base = cfg.clone();
    base.noise.delta_js_rel = 0.0;
    base.noise.delta_jr_rel = 0.0;
    let m = deltas.len();
    let mut jobs: Vec<(f64, f64)> = deltas.iter().flat_map(|&s| deltas.iter().map(move |&r| (s, r))).collect();
    let zero = jobs.iter().position(|&(s, r)| s == 0.0 && r == 0.0);
    if zero.is_none() {
        jobs.push((0.0, 0.0));
    }
    let values: Vec<f64> = jobs
        .par_iter()
        .map(|&(s, r)| {
            let mut c = base.clone();
            c.noise.delta_js_rel = s;
            c.noise.delta_jr_rel = r;
            let mut opts = RunOptions::from_config(&c);
            opts.convergence_check &= s == 0.0 && r == 0.0;
            Ok(run_with_design(&c, &d, opts)?.final_fidelity())
        })
        .collect::<Result<_>>()?;
    let sweep_f = values[zero.unwrap_or(m * m)];
    let direct = run_transfer(&base)?.final_fidelity();
    let reference = ReferenceCheck {
        sweep_fidelity: sweep_f,
        direct_fidelity: direct,
        tolerance: REFERENCE_TOLERANCE,
    }
    .enforce("disorder sweep")?;
    let fidelity = values[..m * m].chunks(m).map(<[f64]>::to_vec).collect();
    Ok(DisorderSweep {
        deltas: deltas.to_vec(),
        fidelity,
        reference,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct DephasingRow {
    pub gamma_over_jm: f64,
    pub gamma_times_t: f64,
    /// Under the configured noisy-fidelity convention.
    pub fidelity: f64,
    pub population_fidelity: f64,
}

#[derive(Debug, Clone)]
pub struct DephasingSweep {
    pub j_m: f64,
    pub rows: Vec<DephasingRow>,
    /// The `γ = 0` density run against the pure-state run.
    pub reference: ReferenceCheck,
}

impl DephasingSweep {
    pub fn strictly_decreasing(&self) -> bool {
        self.rows.windows(2).all(|w| w[1].fidelity < w[0].fidelity)
    }
}

/// Density-matrix runs over `γ/J_M`. The master equation is integrated at
/// every point, `γ = 0` included.
pub fn sweep_dephasing(cfg: &ExperimentConfig, gammas: &[f64]) -> Result<DephasingSweep> {
    cfg.validate()?;
    if gammas.is_empty() || gammas.iter().any(|g| !(*g >= 0.0) || !g.is_finite()) {
        return Err(Error::Config("dephasing grid must be nonempty with gamma_over_JM >= 0".into()));
    }
    let d = design(cfg)?;
    let mut jobs = gammas.to_vec();
    let zero = jobs.iter().position(|&g| g == 0.0);
    if zero.is_none() {
        jobs.push(0.0);
    }
    let mut rows: Vec<DephasingRow> = jobs
        .par_iter()
        .map(|&g| {
            let mut c = cfg.clone();
            c.noise.gamma_over_jm = g;
            let mut opts = RunOptions::from_config(&c);
            opts.force_density = true;
            let run = run_with_design(&c, &d, opts)?;
            Ok(DephasingRow {
                gamma_over_jm: g,
                gamma_times_t: run.gamma,
                fidelity: run.final_fidelity(),
                population_fidelity: run.final_population_fidelity(),
            })
        })
        .collect::<Result<_>>()?;
    let sweep_f = match zero {
        Some(i) => rows[i].fidelity,
        None => rows.pop().expect("reference job").fidelity,
    };
    let mut pure = cfg.clone();
    pure.noise.gamma_over_jm = 0.0;
    let direct = run_with_design(&pure, &d, RunOptions::from_config(&pure))?.final_fidelity();
    let reference = ReferenceCheck {
        sweep_fidelity: sweep_f,
        direct_fidelity: direct,
        tolerance: DENSITY_REFERENCE_TOLERANCE,
    }
    .enforce("dephasing sweep")?;
    Ok(DephasingSweep {
        j_m: d.j_m(),
        rows,
        reference,
    })
}

#[derive(Debug, Clone, PartialEq)]
pub struct ZenoGapRow {
    pub n: usize,
    pub j_b_times_t: f64,
    /// Phase-aligned Frobenius distance of the propagators restricted to the
    /// Zeno subspace.
    pub propagator_distance: f64,
    /// Phase-aligned distance of the final states started from `|1⟩`.
    pub state_distance: f64,
}

/// Exact (`cfg.model_kind`) against effective dynamics on shared pulses.
pub fn zeno_gap_report(cfg: &ExperimentConfig, values: &[f64]) -> Result<Vec<ZenoGapRow>> {
    zeno_gap_between(cfg, cfg.model(), ModelKind::Effective, values)
}

/// Distance between the dynamics of two model kinds (both in the sector
/// basis) on the same calibrated pulses.
pub fn zeno_gap_between(cfg: &ExperimentConfig, exact: ModelKind, reference: ModelKind, values: &[f64]) -> Result<Vec<ZenoGapRow>> {
    cfg.validate()?;
    if exact == ModelKind::FullSpin || reference == ModelKind::FullSpin {
        return Err(Error::Config("zeno gap compares sector models only (effective or subspace)".into()));
    }
    if values.is_empty() || values.iter().any(|v| !(*v > 0.0)) {
        return Err(Error::Config("zeno gap needs positive J_B_times_T values".into()));
    }
    let d = design(cfg)?;
    let n = cfg.n;
    let v = zeno_basis(n).map(C64::from);
    let opts = RunOptions {
        convergence_check: false,
        track_propagator: true,
        regime: StepRegime::State,
        force_density: false,
    };
    values
        .par_iter()
        .map(|&jbt| {
            let mut c = cfg.clone();
            c.j_b_times_t = jbt;
            c.noise = Default::default();
            c.decimation = usize::MAX;
            c.model_kind = exact.into();
            let a = run_with_design(&c, &d, opts)?;
            c.model_kind = reference.into();
            let b = run_with_design(&c, &d, opts)?;
            let restrict = |u: &DMatrix<C64>| v.transpose() * u * &v;
            let ua = restrict(a.trajectory.propagator.as_ref().expect("tracked"));
            let ub = restrict(b.trajectory.propagator.as_ref().expect("tracked"));
            let sa = a.trajectory.final_pure().expect("pure run").amplitudes();
            let sb = b.trajectory.final_pure().expect("pure run").amplitudes();
            Ok(ZenoGapRow {
                n,
                j_b_times_t: jbt,
                propagator_distance: phase_aligned_matrix_distance(&ua, &ub),
                state_distance: phase_aligned_distance(sa, sb),
            })
        })
        .collect()
}

/// One transfer run per chain length at the configured `J_B T`, in the order of `ns`.
pub fn fidelity_curves(cfg: &ExperimentConfig, ns: &[usize]) -> Result<Vec<TransferRun>> {
    cfg.validate()?;
    let designs = designs_for(&cfg.pulse, ns)?;
    ns.par_iter()
        .map(|&n| {
            let mut c = cfg.clone();
            c.n = n;
            run_with_design(&c, &designs[&n], RunOptions::from_config(&c))
        })
        .collect()
}
