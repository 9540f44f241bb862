//! Inverse-engineered boundary couplings.
//!
//! A two-level Hamiltonian `g_x σ_x + g_z σ_z` is parameterized through the
//! picture transformation `V = exp(-iθσ_y) exp(iβσ_z/2)`: choosing `β(t)` and
//! `δ_x(t) = ∫ θ̇ / sin β` fixes `θ`, `g_x`, `g_z` and the propagator in closed
//! form. The two-level block lives inside the rotated Zeno-subspace
//! Hamiltonian, so `g_x`, `g_z` map one-to-one onto the chain couplings
//! `J_S(t)`, `J_R(t)`.
//!
//! The profiles are the smooth polynomials
//!
//! ```text
//! β(t)   = N_β · 6π (t/T)² (1/2 − t/(3T))
//! δ̇_x(t) = μ · (t/T²)(1 − t/T)(1 − 2t/T)
//! ```
//!
//! With these, `θ(T) = δ_x(T) = 0` for every `μ`, so `μ` is used to satisfy
//! the remaining phase condition `φ_N(T) = β(T)/2 + 2fπ`.

use alloc::vec::Vec;
use alloc::format;
use core::f64::consts::PI;

use nalgebra::Matrix4;

use crate::quadrature::{cumulative_simpson, simpson_panel, uniform_nodes};
use crate::{Error, Result, C64};

/// Resolution floor for schedule grids.
pub const MIN_SAMPLES: usize = 1000;
pub const DEFAULT_SAMPLES: usize = 20001;
pub const DEFAULT_N_BETA: u32 = 3;
/// Phase winding used by default; gives `φ_N(T) = -π/2`.
pub const DEFAULT_F_WINDING: i32 = -1;

/// Tolerance on the change of the integrated profiles under grid doubling.
pub const QUADRATURE_TOLERANCE: f64 = 1e-10;
/// Tolerance used by [`verify_boundary_conditions`] and [`calibrate_mu`].
pub const BOUNDARY_TOLERANCE: f64 = 1e-8;

/// Shape parameters of the control ansatz.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct PulseParameters {
    /// Total duration `T`.
    pub duration: f64,
    /// Odd winding number of `β`: `β(T) = N_β π`.
    pub n_beta: u32,
    /// Amplitude of `δ̇_x` (dimensionless).
    pub mu: f64,
    /// Integer `f` of the phase condition `φ_N(T) = β(T)/2 + 2fπ`.
    pub f_winding: i32,
    /// Number of uniform grid points on `[0, T]`.
    pub samples: usize,
}

impl Default for PulseParameters {
    fn default() -> Self {
        Self {
            duration: 1.0,
            n_beta: DEFAULT_N_BETA,
            mu: 0.0,
            f_winding: DEFAULT_F_WINDING,
            samples: DEFAULT_SAMPLES,
        }
    }
}

impl PulseParameters {
    pub fn new(duration: f64, n_beta: u32, mu: f64, f_winding: i32, samples: usize) -> Result<Self> {
        let p = Self {
            duration,
            n_beta,
            mu,
            f_winding,
            samples,
        };
        p.validate()?;
        Ok(p)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.duration > 0.0) || !self.duration.is_finite() {
            return Err(Error::domain(format!("duration must be positive, got {}", self.duration)));
        }
        if self.n_beta.is_multiple_of(2) {
            return Err(Error::domain(format!("N_beta must be odd and >= 1, got {}", self.n_beta)));
        }
        if self.samples < MIN_SAMPLES {
            return Err(Error::domain(format!(
                "samples must be >= {MIN_SAMPLES}, got {}",
                self.samples
            )));
        }
        if !self.mu.is_finite() {
            return Err(Error::domain("mu must be finite"));
        }
        Ok(())
    }

    pub fn with_mu(self, mu: f64) -> Self {
        Self { mu, ..self }
    }

    pub fn with_samples(self, samples: usize) -> Self {
        Self { samples, ..self }
    }

    /// `β(T)/2 + 2fπ`.
    pub fn target_phase(&self) -> f64 {
        0.5 * self.n_beta as f64 * PI + 2.0 * self.f_winding as f64 * PI
    }
}

/// Values of the closed-form profiles at one instant.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Profile {
    pub beta: f64,
    pub beta_dot: f64,
    pub delta_x_dot: f64,
}

/// Evaluates `β`, `β̇` and `δ̇_x` at `t ∈ [0, T]`.
pub fn schedule_profiles(params: &PulseParameters, t: f64) -> Result<Profile> {
    if !(0.0..=params.duration).contains(&t) {
        return Err(Error::domain(format!(
            "t = {t} outside [0, {}]",
            params.duration
        )));
    }
    Ok(profile_unchecked(params, t))
}

#[inline]
fn profile_unchecked(p: &PulseParameters, t: f64) -> Profile {
    let tt = p.duration;
    let nb = p.n_beta as f64;
    let x = t / tt;
    Profile {
        beta: nb * (6.0 * PI * t * t / (tt * tt)) * (0.5 - x / 3.0),
        beta_dot: nb * (6.0 * PI * t / (tt * tt)) * (1.0 - x),
        delta_x_dot: p.mu * (t / (tt * tt)) * (1.0 - x) * (1.0 - 2.0 * x),
    }
}

/// `θ̇ = δ̇_x sin β`.
#[inline]
fn theta_rate(p: &PulseParameters, t: f64) -> f64 {
    let pr = profile_unchecked(p, t);
    pr.delta_x_dot * pr.beta.sin()
}

/// `(g_x, g_z)` from the profiles and `θ`. `θ̇ cot β` is written as
/// `δ̇_x cos β`, which has no singularity at `sin β = 0`.
#[inline]
fn drive(pr: &Profile, theta: f64) -> (f64, f64) {
    let rate_cot = pr.delta_x_dot * pr.beta.cos();
    let (s2, c2) = (2.0 * theta).sin_cos();
    let gx = rate_cot * c2 - 0.5 * pr.beta_dot * s2;
    let gz = -rate_cot * s2 - 0.5 * pr.beta_dot * c2;
    (gx, gz)
}

/// One point of the integrated control schedule.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct ScheduleSample {
    pub t: f64,
    pub beta: f64,
    pub beta_dot: f64,
    pub delta_x_dot: f64,
    pub theta: f64,
    pub delta_x: f64,
    pub g_x: f64,
    pub g_z: f64,
    /// `θ̇ / sin β`, equal to `δ̇_x` by construction.
    pub f_x: f64,
    /// Accumulated spectator phase; only known once the chain length is bound.
    pub phi_n: Option<f64>,
}

/// The profiles integrated on a uniform grid.
///
/// Values between grid nodes are obtained by one extra Simpson panel from
/// the preceding node, so the schedule can be sampled at any `t ∈ [0, T]`
/// with quadrature accuracy.
#[derive(Debug, Clone)]
pub struct PulseSchedule {
    params: PulseParameters,
    nodes: Vec<f64>,
    theta: Vec<f64>,
    delta_x: Vec<f64>,
    gz_integral: Vec<f64>,
}

impl PulseSchedule {
    fn build(params: PulseParameters) -> Self {
        let nodes = uniform_nodes(params.duration, params.samples);
        let theta = cumulative_simpson(|t| theta_rate(&params, t), &nodes);
        let delta_x = cumulative_simpson(|t| profile_unchecked(&params, t).delta_x_dot, &nodes);
        let mut s = Self {
            params,
            nodes,
            theta,
            delta_x,
            gz_integral: Vec::new(),
        };
        let gz = |t: f64| s.drive_at(t).1;
        let gz_integral = cumulative_simpson(gz, &s.nodes);
        s.gz_integral = gz_integral;
        s
    }

    pub fn params(&self) -> &PulseParameters {
        &self.params
    }

    pub fn nodes(&self) -> &[f64] {
        &self.nodes
    }

    pub fn len(&self) -> usize {
        self.nodes.len()
    }

    pub fn is_empty(&self) -> bool {
        self.nodes.is_empty()
    }

    /// Index of the last node `<= t`.
    fn node_below(&self, t: f64) -> usize {
        let h = self.params.duration / (self.nodes.len() - 1) as f64;
        let k = (t / h).floor();
        let k = if k < 0.0 { 0 } else { k as usize };
        let mut k = k.min(self.nodes.len() - 1);
        // Guard against rounding in t / h.
        while k > 0 && self.nodes[k] > t {
            k -= 1;
        }
        while k + 1 < self.nodes.len() && self.nodes[k + 1] <= t {
            k += 1;
        }
        k
    }

    fn theta_at(&self, t: f64) -> f64 {
        let k = self.node_below(t);
        let t0 = self.nodes[k];
        if t == t0 {
            self.theta[k]
        } else {
            self.theta[k] + simpson_panel(&|s| theta_rate(&self.params, s), t0, t)
        }
    }

    fn delta_x_at(&self, t: f64) -> f64 {
        let k = self.node_below(t);
        let t0 = self.nodes[k];
        if t == t0 {
            self.delta_x[k]
        } else {
            self.delta_x[k]
                + simpson_panel(&|s| profile_unchecked(&self.params, s).delta_x_dot, t0, t)
        }
    }

    fn drive_at(&self, t: f64) -> (f64, f64) {
        drive(&profile_unchecked(&self.params, t), self.theta_at(t))
    }

    /// `∫_0^t g_z`.
    fn gz_integral_at(&self, t: f64) -> f64 {
        let k = self.node_below(t);
        let t0 = self.nodes[k];
        if t == t0 {
            self.gz_integral[k]
        } else {
            self.gz_integral[k] + simpson_panel(&|s| self.drive_at(s).1, t0, t)
        }
    }

    /// Schedule sample at an arbitrary `t ∈ [0, T]` (clamped).
    pub fn sample_at(&self, t: f64) -> ScheduleSample {
        let t = t.clamp(0.0, self.params.duration);
        let pr = profile_unchecked(&self.params, t);
        let theta = self.theta_at(t);
        let (g_x, g_z) = drive(&pr, theta);
        ScheduleSample {
            t,
            beta: pr.beta,
            beta_dot: pr.beta_dot,
            delta_x_dot: pr.delta_x_dot,
            theta,
            delta_x: self.delta_x_at(t),
            g_x,
            g_z,
            f_x: pr.delta_x_dot,
            phi_n: None,
        }
    }

    pub fn sample(&self, k: usize) -> ScheduleSample {
        let t = self.nodes[k];
        let pr = profile_unchecked(&self.params, t);
        let (g_x, g_z) = drive(&pr, self.theta[k]);
        ScheduleSample {
            t,
            beta: pr.beta,
            beta_dot: pr.beta_dot,
            delta_x_dot: pr.delta_x_dot,
            theta: self.theta[k],
            delta_x: self.delta_x[k],
            g_x,
            g_z,
            f_x: pr.delta_x_dot,
            phi_n: None,
        }
    }

    pub fn samples(&self) -> impl Iterator<Item = ScheduleSample> + '_ {
        (0..self.nodes.len()).map(|k| self.sample(k))
    }

    /// `φ_N(T)` for chain length `n`, via `φ_N = (N-1) ∫ g_z`.
    fn final_phase(&self, n: usize) -> f64 {
        (n as f64 - 1.0) * self.gz_integral[self.gz_integral.len() - 1]
    }

    fn endpoint_values(&self) -> [f64; 3] {
        let last = self.nodes.len() - 1;
        [self.theta[last], self.delta_x[last], self.gz_integral[last]]
    }
}

/// Integrates `θ`, `δ_x` and `∫g_z` on the parameter grid and checks that a
/// grid doubling changes the endpoint values by less than
/// [`QUADRATURE_TOLERANCE`].
pub fn integrate_schedules(params: &PulseParameters) -> Result<PulseSchedule> {
    params.validate()?;
    let coarse = PulseSchedule::build(*params);
    let fine_samples = 2 * params.samples - 1;
    let fine = PulseSchedule::build(params.with_samples(fine_samples));
    let drift = coarse
        .endpoint_values()
        .iter()
        .zip(fine.endpoint_values())
        .map(|(a, b)| (a - b).abs())
        .fold(0.0, f64::max);
    if drift >= QUADRATURE_TOLERANCE {
        return Err(Error::Resolution {
            message: format!("schedule quadrature changed by {drift:.3e} under grid doubling"),
            required_steps: fine_samples,
        });
    }
    Ok(coarse)
}

/// Boundary couplings synthesized from a pulse schedule for a chain of `N` sites.
#[derive(Debug, Clone)]
pub struct ControlSchedule {
    schedule: PulseSchedule,
    chain_length: usize,
    j_s: Vec<f64>,
    j_r: Vec<f64>,
    phi_n: Vec<f64>,
    j_max: f64,
}

/// `(J_S, J_R)` from `(g_x, g_z)`.
#[inline]
pub fn couplings_from_drive(n: usize, g_x: f64, g_z: f64) -> (f64, f64) {
    let nf = n as f64;
    let zz = 0.5 * (nf - 2.0) * g_z;
    let xx = (nf - 2.0).sqrt() / (2.0 * nf.sqrt()) * g_x;
    (zz - xx, zz + xx)
}

/// Builds `J_S(t)`, `J_R(t)` and the spectator phase `φ_N(t)` on the schedule grid.
pub fn boundary_couplings(params: &PulseParameters, n: usize) -> Result<ControlSchedule> {
    let schedule = integrate_schedules(params)?;
    ControlSchedule::from_schedule(schedule, n)
}

impl ControlSchedule {
    pub fn from_schedule(schedule: PulseSchedule, n: usize) -> Result<Self> {
        if n < 3 {
            return Err(Error::domain(format!("chain length must be >= 3, got {n}")));
        }
        let mut j_s = Vec::with_capacity(schedule.len());
        let mut j_r = Vec::with_capacity(schedule.len());
        for s in schedule.samples() {
            let (a, b) = couplings_from_drive(n, s.g_x, s.g_z);
            j_s.push(a);
            j_r.push(b);
        }
        let nf = n as f64;
        let sum = |t: f64| {
            let s = schedule.sample_at(t);
            let (a, b) = couplings_from_drive(n, s.g_x, s.g_z);
            a + b
        };
        let phi_n: Vec<f64> = cumulative_simpson(sum, schedule.nodes())
            .into_iter()
            .map(|v| (nf - 1.0) / (nf - 2.0) * v)
            .collect();
        let j_max = j_s
            .iter()
            .chain(j_r.iter())
            .copied()
            .fold(f64::NEG_INFINITY, f64::max);
        Ok(Self {
            schedule,
            chain_length: n,
            j_s,
            j_r,
            phi_n,
            j_max,
        })
    }

    pub fn schedule(&self) -> &PulseSchedule {
        &self.schedule
    }

    pub fn params(&self) -> &PulseParameters {
        self.schedule.params()
    }

    pub fn chain_length(&self) -> usize {
        self.chain_length
    }

    pub fn grid(&self) -> &[f64] {
        self.schedule.nodes()
    }

    pub fn j_s(&self) -> &[f64] {
        &self.j_s
    }

    pub fn j_r(&self) -> &[f64] {
        &self.j_r
    }

    pub fn phi_n(&self) -> &[f64] {
        &self.phi_n
    }

    /// `max_t {J_S(t), J_R(t)}` over the grid (signed).
    pub fn j_max(&self) -> f64 {
        self.j_max
    }

    pub fn duration(&self) -> f64 {
        self.schedule.params.duration
    }

    /// Samples with `phi_n` attached.
    pub fn samples(&self) -> impl Iterator<Item = ScheduleSample> + '_ {
        self.schedule.samples().zip(&self.phi_n).map(|(mut s, &p)| {
            s.phi_n = Some(p);
            s
        })
    }

    /// `(J_S(t), J_R(t))` at an arbitrary time.
    pub fn couplings_at(&self, t: f64) -> (f64, f64) {
        let s = self.schedule.sample_at(t);
        couplings_from_drive(self.chain_length, s.g_x, s.g_z)
    }

    pub fn phi_n_at(&self, t: f64) -> f64 {
        (self.chain_length as f64 - 1.0) * self.schedule.gz_integral_at(t)
    }

    /// Closed-form propagator of the rotated effective Hamiltonian, up to a
    /// global phase: `blockdiag(e^{-iφ_N} I₂, U_O)`.
    pub fn analytic_propagator(&self, t: f64) -> Result<Matrix4<C64>> {
        let tt = self.duration();
        if !(0.0..=tt).contains(&t) {
            return Err(Error::domain(format!("t = {t} outside [0, {tt}]")));
        }
        let s = self.schedule.sample_at(t);
        let phase = C64::from_polar(1.0, -self.phi_n_at(t));
        let u = two_level_propagator(s.theta, s.beta, s.delta_x);
        let z = C64::new(0.0, 0.0);
        Ok(Matrix4::new(
            phase, z, z, z, //
            z, phase, z, z, //
            z, z, u[0][0], u[0][1], //
            z, z, u[1][0], u[1][1],
        ))
    }

    pub fn verify_boundary_conditions(&self) -> BoundaryReport {
        let p = self.params();
        let last = self.schedule.len() - 1;
        let first = self.schedule.sample(0);
        let end = self.schedule.sample(last);
        let phi_end = self.phi_n[last];
        let checks = [
            ("theta(0)", first.theta),
            ("theta(T)", end.theta),
            ("delta_x(0)", first.delta_x),
            ("delta_x(T)", end.delta_x),
            ("beta(0)", first.beta),
            ("beta(T) - N_beta*pi", end.beta - p.n_beta as f64 * PI),
            ("phi_N(T) - (beta(T)/2 + 2f*pi)", phi_end - (0.5 * end.beta + 2.0 * p.f_winding as f64 * PI)),
        ];
        BoundaryReport {
            checks: checks
                .iter()
                .map(|&(name, residual)| BoundaryCheck {
                    name,
                    residual,
                    passed: residual.abs() < BOUNDARY_TOLERANCE,
                })
                .collect(),
        }
    }
}

/// Closed-form two-level propagator `V(t) exp(-iσ_x δ_x) V†(0)` with `V(0) = 1`.
pub fn two_level_propagator(theta: f64, beta: f64, delta_x: f64) -> [[C64; 2]; 2] {
    let i = C64::new(0.0, 1.0);
    let ep = C64::from_polar(1.0, 0.5 * beta);
    let em = C64::from_polar(1.0, -0.5 * beta);
    let (st, ct) = theta.sin_cos();
    let (sd, cd) = delta_x.sin_cos();
    [
        [
            ep * ct * cd + i * em * st * sd,
            -i * ep * ct * sd - em * st * cd,
        ],
        [
            ep * st * cd - i * em * ct * sd,
            -i * ep * st * sd + em * ct * cd,
        ],
    ]
}

/// Convenience wrapper: integrates the schedule for `params` and evaluates
/// the closed-form propagator at `t`.
pub fn analytic_propagator(params: &PulseParameters, n: usize, t: f64) -> Result<Matrix4<C64>> {
    boundary_couplings(params, n)?.analytic_propagator(t)
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BoundaryCheck {
    pub name: &'static str,
    pub residual: f64,
    pub passed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct BoundaryReport {
    pub checks: Vec<BoundaryCheck>,
}

impl BoundaryReport {
    pub fn all_passed(&self) -> bool {
        self.checks.iter().all(|c| c.passed)
    }

    pub fn get(&self, name: &str) -> Option<&BoundaryCheck> {
        self.checks.iter().find(|c| c.name == name)
    }
}

pub fn verify_boundary_conditions(params: &PulseParameters, n: usize) -> Result<BoundaryReport> {
    Ok(boundary_couplings(params, n)?.verify_boundary_conditions())
}

/// Scan range of `|μ|` used to bracket the phase residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CalibrationBracket {
    pub min_magnitude: f64,
    pub max_magnitude: f64,
    pub points: usize,
}

impl Default for CalibrationBracket {
    fn default() -> Self {
        Self {
            min_magnitude: 1e-2,
            max_magnitude: 1e4,
            points: 64,
        }
    }
}

impl CalibrationBracket {
    pub fn magnitudes(&self) -> impl Iterator<Item = f64> + '_ {
        let lo = self.min_magnitude.log10();
        let hi = self.max_magnitude.log10();
        let steps = (self.points.max(2) - 1) as f64;
        (0..self.points).map(move |i| 10f64.powf(lo + (hi - lo) * i as f64 / steps))
    }
}

/// `φ_N(T; μ) − (β(T)/2 + 2fπ)`.
pub fn phase_residual(params: &PulseParameters, n: usize) -> f64 {
    PulseSchedule::build(*params).final_phase(n) - params.target_phase()
}

/// Finds `μ` so that the phase condition holds to [`BOUNDARY_TOLERANCE`].
///
/// `|μ|` is scanned upward on the default bracket (positive sign first) and
/// the first sign change is refined by bisection; the smallest-magnitude root
/// is therefore returned.
pub fn calibrate_mu(n: usize, n_beta: u32, f_winding: i32, duration: f64) -> Result<f64> {
    let base = PulseParameters::new(duration, n_beta, 0.0, f_winding, DEFAULT_SAMPLES)?;
    calibrate_mu_with(&base, n, &CalibrationBracket::default())
}

/// As [`calibrate_mu`], reusing every field of `base` except `mu`.
pub fn calibrate_mu_with(base: &PulseParameters, n: usize, bracket: &CalibrationBracket) -> Result<f64> {
    base.validate()?;
    if n < 3 {
        return Err(Error::domain(format!("chain length must be >= 3, got {n}")));
    }
    let residual = |mu: f64| phase_residual(&base.with_mu(mu), n);

    let r0 = residual(0.0);
    if r0.abs() < BOUNDARY_TOLERANCE {
        return Ok(0.0);
    }

    let mut last_far = r0;
    let mut far_mu = 0.0;
    for sign in [1.0, -1.0] {
        let (mut a, mut ra) = (0.0, r0);
        for m in bracket.magnitudes() {
            let b = sign * m;
            let rb = residual(b);
            if ra.signum() != rb.signum() {
                return bisect(&residual, a, ra, b, rb);
            }
            a = b;
            ra = rb;
        }
        last_far = ra;
        far_mu = a;
    }
    Err(Error::Calibration {
        lower: far_mu,
        upper: bracket.max_magnitude,
        residual_lower: last_far,
        residual_upper: residual(bracket.max_magnitude),
    })
}

fn bisect<F: Fn(f64) -> f64>(f: &F, mut a: f64, mut fa: f64, mut b: f64, fb: f64) -> Result<f64> {
    let (lower, upper, residual_lower, residual_upper) = (a, b, fa, fb);
    for _ in 0..200 {
        let scale = a.abs().max(b.abs()).max(f64::MIN_POSITIVE);
        if (b - a).abs() <= 1e-10 * scale {
            break;
        }
        let m = 0.5 * (a + b);
        let fm = f(m);
        if fm == 0.0 {
            a = m;
            b = m;
            break;
        }
        if fm.signum() == fa.signum() {
            a = m;
            fa = fm;
        } else {
            b = m;
        }
    }
    let root = 0.5 * (a + b);
    let r = f(root);
    if r.abs() < BOUNDARY_TOLERANCE {
        Ok(root)
    } else {
        // A sign change without a zero means the residual jumps inside the bracket.
        Err(Error::Calibration {
            lower,
            upper,
            residual_lower,
            residual_upper,
        })
    }
}

/// Pulse parameters with `μ` calibrated for a chain of `n` sites.
pub fn calibrated_parameters(
    n: usize,
    n_beta: u32,
    f_winding: i32,
    duration: f64,
    samples: usize,
) -> Result<PulseParameters> {
    let base = PulseParameters::new(duration, n_beta, 0.0, f_winding, samples)?;
    let mu = calibrate_mu_with(&base, n, &CalibrationBracket::default())?;
    Ok(base.with_mu(mu))
}

impl core::fmt::Display for BoundaryReport {
    fn fmt(&self, f: &mut core::fmt::Formatter<'_>) -> core::fmt::Result {
        for c in &self.checks {
            writeln!(
                f,
                "{:<34} {:>+.3e}  {}",
                c.name,
                c.residual,
                if c.passed { "PASS" } else { "FAIL" }
            )?;
        }
        Ok(())
    }
}
