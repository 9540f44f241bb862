//! Fixed-step propagation of pure states and density matrices.
//!
//! Both integrators are classical fourth-order Runge–Kutta on a uniform grid.
//! Before a run the generator is probed on every grid node and the step must
//! satisfy `h · ‖H‖ ≤ step_gate`, where `‖H‖` is the Gershgorin bound on the
//! spectral radius (plus the largest dephasing rate for density runs).

use alloc::format;
use alloc::vec::Vec;

use nalgebra::{DMatrix, DVector};

use crate::{Error, Result, C64};

/// Default bound on `h · ‖H‖`.
pub const DEFAULT_STEP_GATE: f64 = 0.05;

/// Time-dependent Hermitian generator.
pub trait Generator {
    fn dim(&self) -> usize;

    /// Writes `H(t)` into `out`, which is `dim × dim`.
    fn hamiltonian(&self, t: f64, out: &mut DMatrix<C64>);

    /// Physical meaning of the basis, if known. Needed for fidelities and
    /// dephasing.
    fn basis(&self) -> Option<BasisLayout> {
        None
    }
}

impl<G: Generator + ?Sized> Generator for &G {
    fn dim(&self) -> usize {
        (**self).dim()
    }
    fn hamiltonian(&self, t: f64, out: &mut DMatrix<C64>) {
        (**self).hamiltonian(t, out)
    }
    fn basis(&self) -> Option<BasisLayout> {
        (**self).basis()
    }
}

/// Generator backed by a closure.
pub struct FnGenerator<F> {
    dim: usize,
    basis: Option<BasisLayout>,
    f: F,
}

impl<F: Fn(f64, &mut DMatrix<C64>)> FnGenerator<F> {
    pub fn new(dim: usize, f: F) -> Self {
        Self { dim, basis: None, f }
    }

    pub fn with_basis(mut self, basis: BasisLayout) -> Self {
        self.basis = Some(basis);
        self
    }
}

impl<F: Fn(f64, &mut DMatrix<C64>)> Generator for FnGenerator<F> {
    fn dim(&self) -> usize {
        self.dim
    }
    fn hamiltonian(&self, t: f64, out: &mut DMatrix<C64>) {
        (self.f)(t, out)
    }
    fn basis(&self) -> Option<BasisLayout> {
        self.basis
    }
}

/// How basis indices map onto spin configurations of an `N`-site chain.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BasisLayout {
    /// `[|0⟩, |1⟩, …, |N⟩]`.
    Sector { sites: usize },
    /// All `2^N` configurations, site `n` on bit `N − n`.
    FullSpin { sites: usize },
}

impl BasisLayout {
    pub fn sites(&self) -> usize {
        match *self {
            BasisLayout::Sector { sites } | BasisLayout::FullSpin { sites } => sites,
        }
    }

    pub fn dim(&self) -> usize {
        match *self {
            BasisLayout::Sector { sites } => sites + 1,
            BasisLayout::FullSpin { sites } => 1 << sites,
        }
    }

    pub fn vacuum(&self) -> usize {
        0
    }

    /// Index of the single-excitation state at `site` (1-based).
    pub fn site(&self, site: usize) -> usize {
        match *self {
            BasisLayout::Sector { .. } => site,
            BasisLayout::FullSpin { sites } => 1 << (sites - site),
        }
    }

    pub fn sender(&self) -> usize {
        self.site(1)
    }

    pub fn receiver(&self) -> usize {
        self.site(self.sites())
    }

    /// Eigenvalue of `σ_site^z` on basis state `index`.
    pub fn z_sign(&self, site: usize, index: usize) -> f64 {
        let up = match *self {
            BasisLayout::Sector { .. } => index == site,
            BasisLayout::FullSpin { sites } => index & (1 << (sites - site)) != 0,
        };
        if up {
            1.0
        } else {
            -1.0
        }
    }
}

/// Element-wise rates of the uniform σ^z dephasing dissipator:
/// `D(ρ)_mn = γ (Σ_l s_l(m) s_l(n) − N) ρ_mn`.
pub fn dephasing_rates(basis: &BasisLayout, gamma: f64) -> DMatrix<f64> {
    let d = basis.dim();
    let n = basis.sites();
    DMatrix::from_fn(d, d, |i, j| {
        let overlap: f64 = (1..=n).map(|l| basis.z_sign(l, i) * basis.z_sign(l, j)).sum();
        gamma * (overlap - n as f64)
    })
}

/// Uniform grid `start + k·h`, `k = 0 … steps`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TimeGrid {
    start: f64,
    end: f64,
    steps: usize,
}

impl TimeGrid {
    pub fn new(start: f64, end: f64, steps: usize) -> Result<Self> {
        if steps == 0 || !(end > start) {
            return Err(Error::domain(format!(
                "time grid needs end > start and steps > 0 (got [{start}, {end}], {steps})"
            )));
        }
        Ok(Self { start, end, steps })
    }

    pub fn start(&self) -> f64 {
        self.start
    }

    pub fn end(&self) -> f64 {
        self.end
    }

    pub fn steps(&self) -> usize {
        self.steps
    }

    pub fn step(&self) -> f64 {
        (self.end - self.start) / self.steps as f64
    }

    pub fn time(&self, k: usize) -> f64 {
        if k == self.steps {
            self.end
        } else {
            self.start + k as f64 * self.step()
        }
    }

    /// Same interval with twice as many steps.
    pub fn refined(&self) -> Self {
        Self {
            steps: 2 * self.steps,
            ..*self
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct QuantumState {
    amplitudes: DVector<C64>,
}

impl QuantumState {
    pub fn new(amplitudes: DVector<C64>) -> Result<Self> {
        let norm = amplitudes.norm();
        if (norm - 1.0).abs() > 1e-9 {
            return Err(Error::domain(format!("state norm {norm} differs from 1")));
        }
        Ok(Self { amplitudes })
    }

    /// `|k⟩` in a `dim`-dimensional space.
    pub fn basis(dim: usize, k: usize) -> Self {
        let mut amplitudes = DVector::zeros(dim);
        amplitudes[k] = C64::new(1.0, 0.0);
        Self { amplitudes }
    }

    /// `a|vacuum⟩ + b|sender⟩` for the given layout.
    pub fn encoded(basis: &BasisLayout, a: C64, b: C64) -> Result<Self> {
        let mut v = DVector::zeros(basis.dim());
        v[basis.vacuum()] = a;
        v[basis.sender()] = b;
        Self::new(v)
    }

    pub fn amplitudes(&self) -> &DVector<C64> {
        &self.amplitudes
    }

    pub fn dim(&self) -> usize {
        self.amplitudes.len()
    }

    pub fn norm(&self) -> f64 {
        self.amplitudes.norm()
    }

    pub fn population(&self, k: usize) -> f64 {
        self.amplitudes[k].norm_sqr()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct DensityMatrix {
    rho: DMatrix<C64>,
}

impl DensityMatrix {
    /// Accepts `rho` if it is Hermitian and has unit trace to `1e-9`.
    pub fn new(rho: DMatrix<C64>) -> Result<Self> {
        if !rho.is_square() {
            return Err(Error::domain("density matrix must be square"));
        }
        let herm = max_abs(&(&rho - rho.adjoint()));
        let tr = rho.trace();
        if herm > 1e-9 || (tr.re - 1.0).abs() > 1e-9 || tr.im.abs() > 1e-9 {
            return Err(Error::domain(format!(
                "not a density matrix (hermiticity error {herm:.2e}, trace {tr})"
            )));
        }
        Ok(Self { rho })
    }

    pub fn from_pure(psi: &QuantumState) -> Self {
        let a = psi.amplitudes();
        Self {
            rho: a * a.adjoint(),
        }
    }

    pub fn matrix(&self) -> &DMatrix<C64> {
        &self.rho
    }

    pub fn dim(&self) -> usize {
        self.rho.nrows()
    }

    pub fn trace(&self) -> C64 {
        self.rho.trace()
    }

    pub fn population(&self, k: usize) -> f64 {
        self.rho[(k, k)].re
    }

    pub fn hermiticity_error(&self) -> f64 {
        max_abs(&(&self.rho - self.rho.adjoint()))
    }

    pub fn min_eigenvalue(&self) -> f64 {
        let eig = nalgebra::SymmetricEigen::new(self.rho.clone());
        eig.eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
    }
}

/// What the trajectory started from, as far as fidelity evaluation is concerned.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum InitialCondition {
    /// `|1⟩` or `|1⟩⟨1|`.
    SenderExcitation,
    /// `(|0⟩ + |1⟩)/√2` or its projector.
    SenderSuperposition,
    Other,
}

#[derive(Debug, Clone, PartialEq)]
pub enum States {
    Pure(Vec<QuantumState>),
    Mixed(Vec<DensityMatrix>),
}

impl States {
    pub fn len(&self) -> usize {
        match self {
            States::Pure(v) => v.len(),
            States::Mixed(v) => v.len(),
        }
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn population(&self, k: usize, index: usize) -> f64 {
        match self {
            States::Pure(v) => v[k].population(index),
            States::Mixed(v) => v[k].population(index),
        }
    }
}

/// Complex transfer amplitude and averaged fidelity per recorded time.
#[derive(Debug, Clone, PartialEq)]
pub struct FidelitySeries {
    pub f: Vec<C64>,
    pub fidelity: Vec<f64>,
}

impl FidelitySeries {
    pub fn final_fidelity(&self) -> f64 {
        *self.fidelity.last().expect("empty fidelity series")
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StateTrajectory {
    pub times: Vec<f64>,
    pub states: States,
    pub basis: Option<BasisLayout>,
    pub initial: InitialCondition,
    /// Accumulated propagator at the final time, if tracked.
    pub propagator: Option<DMatrix<C64>>,
    pub grid: TimeGrid,
    /// Filled when the basis is known and the initial state is a sender state.
    pub fidelity: Option<FidelitySeries>,
}

impl StateTrajectory {
    pub fn final_pure(&self) -> Option<&QuantumState> {
        match &self.states {
            States::Pure(v) => v.last(),
            States::Mixed(_) => None,
        }
    }

    pub fn final_mixed(&self) -> Option<&DensityMatrix> {
        match &self.states {
            States::Mixed(v) => v.last(),
            States::Pure(_) => None,
        }
    }

    pub fn final_fidelity(&self) -> Option<f64> {
        self.fidelity.as_ref().map(FidelitySeries::final_fidelity)
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvolveOptions {
    /// Keep every `record_every`-th step (the final step is always kept).
    pub record_every: usize,
    pub track_propagator: bool,
    pub step_gate: f64,
}

impl Default for EvolveOptions {
    fn default() -> Self {
        Self {
            record_every: 1,
            track_propagator: false,
            step_gate: DEFAULT_STEP_GATE,
        }
    }
}

/// Largest entry modulus.
pub fn max_abs<R: nalgebra::Dim, C: nalgebra::Dim, S: nalgebra::RawStorage<C64, R, C>>(m: &nalgebra::Matrix<C64, R, C, S>) -> f64 {
    m.iter().map(|z| z.norm()).fold(0.0, f64::max)
}

fn add_scaled(dst: &mut DMatrix<C64>, a: C64, x: &DMatrix<C64>) {
    dst.zip_apply(x, |d, s| *d += a * s);
}

/// Gershgorin bound on the spectral radius.
pub fn gershgorin_bound(h: &DMatrix<C64>) -> f64 {
    h.row_iter()
        .map(|row| row.iter().map(|z| z.norm()).sum::<f64>())
        .fold(0.0, f64::max)
}

fn spectral_bound<G: Generator>(gen: &G, grid: &TimeGrid) -> f64 {
    let d = gen.dim();
    let mut h = DMatrix::zeros(d, d);
    let mut bound = 0.0f64;
    for k in 0..=grid.steps() {
        gen.hamiltonian(grid.time(k), &mut h);
        bound = bound.max(gershgorin_bound(&h));
    }
    bound
}

/// Smallest step count on `[start, end]` that passes the spectral gate,
/// estimated from `probes` evenly spaced evaluations of the generator plus an
/// additive rate (dephasing).
pub fn required_steps<G: Generator>(gen: &G, start: f64, end: f64, extra_rate: f64, step_gate: f64, probes: usize) -> usize {
    let d = gen.dim();
    let mut h = DMatrix::zeros(d, d);
    let mut bound = 0.0f64;
    let probes = probes.max(2);
    for k in 0..probes {
        let t = start + (end - start) * k as f64 / (probes - 1) as f64;
        gen.hamiltonian(t, &mut h);
        bound = bound.max(gershgorin_bound(&h));
    }
    let steps = ((end - start) * (bound + extra_rate) / step_gate).ceil();
    (steps as usize).max(1)
}

fn check_gate(bound: f64, grid: &TimeGrid, gate: f64) -> Result<()> {
    let h = grid.step();
    if h * bound > gate {
        let required = ((grid.end() - grid.start()) * bound / gate).ceil() as usize;
        return Err(Error::Resolution {
            message: format!(
                "step {h:.3e} times spectral bound {bound:.3e} exceeds gate {gate}"
            ),
            required_steps: required,
        });
    }
    Ok(())
}

fn check_dims<G: Generator>(gen: &G, dim: usize) -> Result<()> {
    if gen.dim() != dim {
        return Err(Error::domain(format!(
            "generator dimension {} does not match state dimension {dim}",
            gen.dim()
        )));
    }
    if let Some(b) = gen.basis() {
        if b.dim() != dim {
            return Err(Error::domain("basis layout dimension mismatch"));
        }
    }
    Ok(())
}

fn classify_pure(basis: Option<BasisLayout>, psi: &QuantumState) -> InitialCondition {
    let Some(b) = basis else {
        return InitialCondition::Other;
    };
    let excitation = QuantumState::basis(psi.dim(), b.sender());
    if max_abs(&(psi.amplitudes() - excitation.amplitudes())) < 1e-12 {
        return InitialCondition::SenderExcitation;
    }
    let r = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
    if let Ok(sup) = QuantumState::encoded(&b, r, r) {
        if max_abs(&(psi.amplitudes() - sup.amplitudes())) < 1e-12 {
            return InitialCondition::SenderSuperposition;
        }
    }
    InitialCondition::Other
}

fn classify_mixed(basis: Option<BasisLayout>, rho: &DensityMatrix) -> InitialCondition {
    let Some(b) = basis else {
        return InitialCondition::Other;
    };
    let excitation = DensityMatrix::from_pure(&QuantumState::basis(rho.dim(), b.sender()));
    if max_abs(&(rho.matrix() - excitation.matrix())) < 1e-12 {
        return InitialCondition::SenderExcitation;
    }
    let r = C64::new(core::f64::consts::FRAC_1_SQRT_2, 0.0);
    if let Ok(sup) = QuantumState::encoded(&b, r, r) {
        if max_abs(&(rho.matrix() - DensityMatrix::from_pure(&sup).matrix())) < 1e-12 {
            return InitialCondition::SenderSuperposition;
        }
    }
    InitialCondition::Other
}

/// Integrates `i dψ/dt = H(t) ψ` from `psi0` on `grid`.
pub fn evolve_state<G: Generator>(
    gen: &G,
    psi0: &QuantumState,
    grid: TimeGrid,
    opts: EvolveOptions,
) -> Result<StateTrajectory> {
    let d = psi0.dim();
    check_dims(gen, d)?;
    check_gate(spectral_bound(gen, &grid), &grid, opts.step_gate)?;
    let record_every = opts.record_every.max(1);

    let minus_i = C64::new(0.0, -1.0);
    let h = grid.step();
    let hc = C64::from(h);
    let half = C64::from(0.5 * h);

    let mut h_start = DMatrix::zeros(d, d);
    let mut h_mid = DMatrix::zeros(d, d);
    let mut h_end = DMatrix::zeros(d, d);
    gen.hamiltonian(grid.time(0), &mut h_start);

    let mut psi = psi0.amplitudes().clone();
    let (mut k1, mut k2, mut k3, mut k4) = (
        DVector::zeros(d),
        DVector::zeros(d),
        DVector::zeros(d),
        DVector::zeros(d),
    );
    let mut tmp = DVector::zeros(d);

    let mut u = opts.track_propagator.then(|| DMatrix::<C64>::identity(d, d));
    let (mut m1, mut m2, mut m3, mut m4, mut mt) = if opts.track_propagator {
        (
            DMatrix::zeros(d, d),
            DMatrix::zeros(d, d),
            DMatrix::zeros(d, d),
            DMatrix::zeros(d, d),
            DMatrix::zeros(d, d),
        )
    } else {
        Default::default()
    };

    let mut times = Vec::with_capacity(grid.steps() / record_every + 2);
    let mut states = Vec::with_capacity(grid.steps() / record_every + 2);
    times.push(grid.time(0));
    states.push(QuantumState {
        amplitudes: psi.clone(),
    });

    for step in 0..grid.steps() {
        let t = grid.time(step);
        gen.hamiltonian(t + 0.5 * h, &mut h_mid);
        gen.hamiltonian(grid.time(step + 1), &mut h_end);

        k1.gemv(minus_i, &h_start, &psi, C64::from(0.0));
        tmp.copy_from(&psi);
        tmp.axpy(half, &k1, C64::from(1.0));
        k2.gemv(minus_i, &h_mid, &tmp, C64::from(0.0));
        tmp.copy_from(&psi);
        tmp.axpy(half, &k2, C64::from(1.0));
        k3.gemv(minus_i, &h_mid, &tmp, C64::from(0.0));
        tmp.copy_from(&psi);
        tmp.axpy(hc, &k3, C64::from(1.0));
        k4.gemv(minus_i, &h_end, &tmp, C64::from(0.0));

        let w = C64::from(h / 6.0);
        psi.axpy(w, &k1, C64::from(1.0));
        psi.axpy(w * 2.0, &k2, C64::from(1.0));
        psi.axpy(w * 2.0, &k3, C64::from(1.0));
        psi.axpy(w, &k4, C64::from(1.0));

        if let Some(u) = u.as_mut() {
            m1.gemm(minus_i, &h_start, u, C64::from(0.0));
            mt.copy_from(u);
            add_scaled(&mut mt, half, &m1);
            m2.gemm(minus_i, &h_mid, &mt, C64::from(0.0));
            mt.copy_from(u);
            add_scaled(&mut mt, half, &m2);
            m3.gemm(minus_i, &h_mid, &mt, C64::from(0.0));
            mt.copy_from(u);
            add_scaled(&mut mt, hc, &m3);
            m4.gemm(minus_i, &h_end, &mt, C64::from(0.0));
            add_scaled(u, w, &m1);
            add_scaled(u, w * 2.0, &m2);
            add_scaled(u, w * 2.0, &m3);
            add_scaled(u, w, &m4);
        }

        core::mem::swap(&mut h_start, &mut h_end);

        if (step + 1) % record_every == 0 || step + 1 == grid.steps() {
            times.push(grid.time(step + 1));
            states.push(QuantumState {
                amplitudes: psi.clone(),
            });
        }
    }

    let basis = gen.basis();
    let initial = classify_pure(basis, psi0);
    let mut traj = StateTrajectory {
        times,
        states: States::Pure(states),
        basis,
        initial,
        propagator: u,
        grid,
        fidelity: None,
    };
    if let (Some(b), InitialCondition::SenderExcitation) = (basis, initial) {
        traj.fidelity = Some(transfer_fidelity(&traj, b.sites())?);
    }
    Ok(traj)
}

/// Integrates `dρ/dt = i[ρ, H] + γ Σ_l (σ_l^z ρ σ_l^z − ρ)`.
///
/// The generator must report a [`BasisLayout`] so the σ^z operators are known.
pub fn evolve_density<G: Generator>(
    gen: &G,
    rho0: &DensityMatrix,
    gamma: f64,
    grid: TimeGrid,
    opts: EvolveOptions,
) -> Result<StateTrajectory> {
    if !(gamma >= 0.0) || !gamma.is_finite() {
        return Err(Error::domain(format!("dephasing rate must be >= 0, got {gamma}")));
    }
    let d = rho0.dim();
    check_dims(gen, d)?;
    let basis = gen
        .basis()
        .ok_or_else(|| Error::domain("density evolution needs a generator with a basis layout"))?;
    let rates = dephasing_rates(&basis, gamma).map(C64::from);
    let max_rate = rates.iter().map(|z| z.norm()).fold(0.0, f64::max);
    check_gate(spectral_bound(gen, &grid) + max_rate, &grid, opts.step_gate)?;
    let record_every = opts.record_every.max(1);

    let h = grid.step();
    let half = 0.5 * h;

    let rhs = |ham: &DMatrix<C64>, rho: &DMatrix<C64>, out: &mut DMatrix<C64>, scratch: &mut DMatrix<C64>| {
        // i[ρ, H] = iρH − iHρ
        out.gemm(C64::new(0.0, 1.0), rho, ham, C64::from(0.0));
        scratch.gemm(C64::new(0.0, -1.0), ham, rho, C64::from(0.0));
        *out += &*scratch;
        scratch.copy_from(rho);
        scratch.component_mul_assign(&rates);
        *out += &*scratch;
    };

    let mut h_start = DMatrix::zeros(d, d);
    let mut h_mid = DMatrix::zeros(d, d);
    let mut h_end = DMatrix::zeros(d, d);
    gen.hamiltonian(grid.time(0), &mut h_start);

    let mut rho = rho0.matrix().clone();
    let mut k1 = DMatrix::zeros(d, d);
    let mut k2 = DMatrix::zeros(d, d);
    let mut k3 = DMatrix::zeros(d, d);
    let mut k4 = DMatrix::zeros(d, d);
    let mut tmp = DMatrix::zeros(d, d);
    let mut scratch = DMatrix::zeros(d, d);

    let mut times = Vec::with_capacity(grid.steps() / record_every + 2);
    let mut states = Vec::with_capacity(grid.steps() / record_every + 2);
    times.push(grid.time(0));
    states.push(DensityMatrix { rho: rho.clone() });

    for step in 0..grid.steps() {
        let t = grid.time(step);
        gen.hamiltonian(t + half, &mut h_mid);
        gen.hamiltonian(grid.time(step + 1), &mut h_end);

        rhs(&h_start, &rho, &mut k1, &mut scratch);
        tmp.copy_from(&rho);
        add_scaled(&mut tmp, C64::from(half), &k1);
        rhs(&h_mid, &tmp, &mut k2, &mut scratch);
        tmp.copy_from(&rho);
        add_scaled(&mut tmp, C64::from(half), &k2);
        rhs(&h_mid, &tmp, &mut k3, &mut scratch);
        tmp.copy_from(&rho);
        add_scaled(&mut tmp, C64::from(h), &k3);
        rhs(&h_end, &tmp, &mut k4, &mut scratch);

        let w = C64::from(h / 6.0);
        add_scaled(&mut rho, w, &k1);
        add_scaled(&mut rho, w * 2.0, &k2);
        add_scaled(&mut rho, w * 2.0, &k3);
        add_scaled(&mut rho, w, &k4);

        core::mem::swap(&mut h_start, &mut h_end);

        if (step + 1) % record_every == 0 || step + 1 == grid.steps() {
            times.push(grid.time(step + 1));
            states.push(DensityMatrix { rho: rho.clone() });
        }
    }

    let initial = classify_mixed(Some(basis), rho0);
    let mut traj = StateTrajectory {
        times,
        states: States::Mixed(states),
        basis: Some(basis),
        initial,
        propagator: None,
        grid,
        fidelity: None,
    };
    if initial != InitialCondition::Other {
        traj.fidelity = Some(transfer_fidelity(&traj, basis.sites())?);
    }
    Ok(traj)
}

/// `F = 1/2 + |f|/3 + |f|²/6`.
#[inline]
pub fn average_fidelity(abs_f: f64) -> f64 {
    (3.0 + 2.0 * abs_f + abs_f * abs_f) / 6.0
}

/// Input-averaged fidelity of a channel whose receiver coherence is
/// `coherence` and whose excitation survives with probability `population`:
/// `1/2 + |c|/3 + p/6`. Equals [`average_fidelity`] when `p = |c|²`.
#[inline]
pub fn channel_fidelity(coherence: f64, population: f64) -> f64 {
    (3.0 + 2.0 * coherence + population) / 6.0
}

/// Transfer amplitude and fidelity series.
///
/// * pure runs from `|1⟩`: `f = ⟨N|ψ⟩`;
/// * mixed runs from `|1⟩⟨1|`: `|f| = √⟨N|ρ|N⟩`;
/// * mixed runs from `(|0⟩+|1⟩)(⟨0|+⟨1|)/2`: the channel-averaged fidelity
///   `1/2 + |c|/3 + p/6` with `c = 2⟨N|ρ|0⟩` (reported as `f`) and
///   `p = 2⟨N|ρ|N⟩`.
pub fn transfer_fidelity(traj: &StateTrajectory, n: usize) -> Result<FidelitySeries> {
    let basis = traj
        .basis
        .ok_or_else(|| Error::Contract("trajectory has no basis layout".into()))?;
    if basis.sites() != n {
        return Err(Error::Contract(format!(
            "trajectory describes {} sites, asked for {n}",
            basis.sites()
        )));
    }
    let recv = basis.receiver();
    let vac = basis.vacuum();
    let (f, fidelity): (Vec<C64>, Vec<f64>) = match (&traj.states, traj.initial) {
        (States::Pure(states), InitialCondition::SenderExcitation) => states
            .iter()
            .map(|s| {
                let f = s.amplitudes()[recv];
                (f, average_fidelity(f.norm()))
            })
            .unzip(),
        (States::Mixed(states), InitialCondition::SenderExcitation) => states
            .iter()
            .map(|r| {
                let a = r.population(recv).max(0.0).sqrt();
                (C64::from(a), average_fidelity(a))
            })
            .unzip(),
        (States::Mixed(states), InitialCondition::SenderSuperposition) => states
            .iter()
            .map(|r| {
                let c = r.matrix()[(recv, vac)] * 2.0;
                let p = 2.0 * r.population(recv);
                (c, channel_fidelity(c.norm(), p))
            })
            .unzip(),
        (_, other) => {
            return Err(Error::Contract(format!(
                "transfer fidelity needs a run started from the sender state, got {other:?}"
            )))
        }
    };
    Ok(FidelitySeries { f, fidelity })
}

/// Largest element-wise difference between the final states of two runs.
pub fn final_state_difference(a: &StateTrajectory, b: &StateTrajectory) -> Option<f64> {
    match (&a.states, &b.states) {
        (States::Pure(x), States::Pure(y)) => {
            Some(max_abs(&(x.last()?.amplitudes() - y.last()?.amplitudes())))
        }
        (States::Mixed(x), States::Mixed(y)) => Some(max_abs(&(x.last()?.matrix() - y.last()?.matrix()))),
        _ => None,
    }
}

/// `min_α ‖a − e^{iα} b‖`.
pub fn phase_aligned_distance(a: &DVector<C64>, b: &DVector<C64>) -> f64 {
    let phase = alignment_phase(b.dotc(a));
    a.zip_fold(b, 0.0, |acc, x, y| acc + (x - phase * y).norm_sqr()).sqrt()
}

fn alignment_phase(overlap: C64) -> C64 {
    let r = overlap.norm();
    if r > 0.0 {
        overlap / r
    } else {
        C64::from(1.0)
    }
}

/// `min_α ‖A − e^{iα} B‖_F`.
pub fn phase_aligned_matrix_distance(a: &DMatrix<C64>, b: &DMatrix<C64>) -> f64 {
    let phase = alignment_phase(b.dotc(a));
    a.zip_fold(b, 0.0, |acc, x, y| acc + (x - phase * y).norm_sqr()).sqrt()
}

/// `‖U†U − I‖_max`.
pub fn unitarity_error(u: &DMatrix<C64>) -> f64 {
    max_abs(&(u.adjoint() * u - DMatrix::identity(u.nrows(), u.ncols())))
}

#[cfg(test)]
mod tests {
    use super::*;

    fn diag_fn(d: Vec<f64>) -> FnGenerator<impl Fn(f64, &mut DMatrix<C64>)> {
        let n = d.len();
        FnGenerator::new(n, move |_t, out: &mut DMatrix<C64>| {
            out.fill(C64::from(0.0));
            for (k, &v) in d.iter().enumerate() {
                out[(k, k)] = C64::from(v);
            }
        })
    }

    fn diag_gen(d: Vec<f64>) -> impl Generator {
        diag_fn(d)
    }

    /// Diagonal generator on the sector layout of `d.len() - 1` sites.
    fn sector_diag_gen(d: Vec<f64>) -> impl Generator {
        let sites = d.len() - 1;
        diag_fn(d).with_basis(BasisLayout::Sector { sites })
    }

    #[test]
    fn diagonal_generator_only_rotates_phase() {
        let gen = diag_gen(alloc::vec![0.5, -2.0, 3.0]);
        let grid = TimeGrid::new(0.0, 2.0, 400).unwrap();
        let traj = evolve_state(&gen, &QuantumState::basis(3, 1), grid, EvolveOptions::default()).unwrap();
        let last = traj.final_pure().unwrap();
        let expected = C64::from_polar(1.0, 2.0 * 2.0);
        assert!((last.amplitudes()[1] - expected).norm() < 1e-9);
        assert_eq!(last.population(0), 0.0);
    }

    #[test]
    fn zero_generator_keeps_state() {
        let gen = diag_gen(alloc::vec![0.0; 4]);
        let psi = QuantumState::new(DVector::from_vec(alloc::vec![
            C64::new(0.5, 0.0),
            C64::new(0.0, 0.5),
            C64::new(-0.5, 0.0),
            C64::new(0.0, -0.5)
        ]))
        .unwrap();
        let traj = evolve_state(&gen, &psi, TimeGrid::new(0.0, 1.0, 10).unwrap(), EvolveOptions::default()).unwrap();
        if let States::Pure(states) = &traj.states {
            assert_eq!(states.len(), 11);
            assert!(states.iter().all(|s| s == &psi));
        } else {
            panic!("expected pure states");
        }
    }

    #[test]
    fn step_gate_names_required_steps() {
        let gen = diag_gen(alloc::vec![100.0, -100.0]);
        let err = evolve_state(&gen, &QuantumState::basis(2, 0), TimeGrid::new(0.0, 1.0, 100).unwrap(), EvolveOptions::default())
            .unwrap_err();
        assert_eq!(
            err,
            Error::Resolution {
                message: err_message(&err),
                required_steps: 2000
            }
        );
    }

    fn err_message(e: &Error) -> alloc::string::String {
        match e {
            Error::Resolution { message, .. } => message.clone(),
            _ => panic!("unexpected {e:?}"),
        }
    }

    #[test]
    fn negative_dephasing_rate_is_rejected() {
        let gen = sector_diag_gen(alloc::vec![0.0; 4]);
        let rho = DensityMatrix::from_pure(&QuantumState::basis(4, 1));
        let grid = TimeGrid::new(0.0, 1.0, 10).unwrap();
        assert!(matches!(
            evolve_density(&gen, &rho, -0.1, grid, EvolveOptions::default()),
            Err(Error::Domain(_))
        ));
    }

    #[test]
    fn fidelity_formula_identities() {
        assert_eq!(average_fidelity(1.0), 1.0);
        assert_eq!(average_fidelity(0.0), 0.5);
        assert_eq!(average_fidelity(0.5), 17.0 / 24.0);
        assert_eq!(channel_fidelity(0.5, 0.25), average_fidelity(0.5));
        approx::assert_relative_eq!(channel_fidelity(0.8, 0.64), average_fidelity(0.8), epsilon = 1e-15);
    }

    #[test]
    fn fidelity_requires_sender_start() {
        let gen = sector_diag_gen(alloc::vec![0.0; 4]);
        let grid = TimeGrid::new(0.0, 1.0, 4).unwrap();
        let traj = evolve_state(&gen, &QuantumState::basis(4, 2), grid, EvolveOptions::default()).unwrap();
        assert_eq!(traj.initial, InitialCondition::Other);
        assert!(traj.fidelity.is_none());
        assert!(matches!(transfer_fidelity(&traj, 3), Err(Error::Contract(_))));
        let traj = evolve_state(&gen, &QuantumState::basis(4, 1), grid, EvolveOptions::default()).unwrap();
        assert!(matches!(transfer_fidelity(&traj, 5), Err(Error::Contract(_))));
        assert_eq!(transfer_fidelity(&traj, 3).unwrap().fidelity[0], 0.5);
    }

    #[test]
    fn sector_and_full_layout_agree_on_signs() {
        let sector = BasisLayout::Sector { sites: 4 };
        let full = BasisLayout::FullSpin { sites: 4 };
        for site in 1..=4 {
            for n in 1..=4 {
                assert_eq!(sector.z_sign(site, sector.site(n)), full.z_sign(site, full.site(n)));
            }
            assert_eq!(sector.z_sign(site, 0), -1.0);
            assert_eq!(full.z_sign(site, 0), -1.0);
        }
    }

    #[test]
    fn aligned_distance_resolves_small_errors() {
        let b = DVector::from_vec(alloc::vec![C64::new(0.6, 0.0), C64::new(0.0, 0.8)]);
        let mut a = b.map(|z| z * C64::from_polar(1.0, 0.3));
        a[0] += C64::from(1e-11);
        let d = phase_aligned_distance(&a, &b);
        assert!((d - 1e-11).abs() < 2e-12, "{d:e}");
        assert_eq!(phase_aligned_distance(&b, &b), 0.0);
        let m = DMatrix::from_fn(2, 2, |i, j| C64::new(i as f64, j as f64 + 1.0));
        let rotated = m.map(|z| z * C64::from_polar(1.0, -1.1));
        assert!(phase_aligned_matrix_distance(&rotated, &m) < 1e-15);
    }
}
