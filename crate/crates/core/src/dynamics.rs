//! Time-dependent chain Hamiltonians driven by boundary couplings.
//!
//! Every model is affine in `(J_S, J_R)`, so it is stored as
//! `H(t) = F + J_S(t)·A_S + J_R(t)·A_R` with the constant `(N−3) J_B` bus
//! energy removed from `F`.

use alloc::format;

use nalgebra::DMatrix;

use crate::model::{
    embedded_effective_hamiltonian, full_spin_hamiltonian, single_excitation_hamiltonian, to_complex,
    ChainModel,
};
use crate::propagate::{BasisLayout, Generator};
use crate::pulse::ControlSchedule;
use crate::{Error, Result, C64};

/// Anything that yields `(J_S(t), J_R(t))`.
pub trait CouplingSource {
    fn couplings(&self, t: f64) -> (f64, f64);
}

impl CouplingSource for ControlSchedule {
    fn couplings(&self, t: f64) -> (f64, f64) {
        self.couplings_at(t)
    }
}

impl<F: Fn(f64) -> (f64, f64)> CouplingSource for F {
    fn couplings(&self, t: f64) -> (f64, f64) {
        self(t)
    }
}

impl CouplingSource for &ControlSchedule {
    fn couplings(&self, t: f64) -> (f64, f64) {
        self.couplings_at(t)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum ModelKind {
    /// Zeno-subspace Hamiltonian embedded in the `(N+1)`-dimensional sector.
    Effective,
    /// Zero/one-excitation sector with the bus.
    Subspace,
    /// Dense `2^N` spin Hamiltonian.
    FullSpin,
}

impl ModelKind {
    pub fn as_str(&self) -> &'static str {
        match self {
            ModelKind::Effective => "effective",
            ModelKind::Subspace => "subspace",
            ModelKind::FullSpin => "full_spin",
        }
    }
}

impl core::str::FromStr for ModelKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "effective" => Ok(ModelKind::Effective),
            "subspace" => Ok(ModelKind::Subspace),
            "full_spin" => Ok(ModelKind::FullSpin),
            other => Err(Error::domain(format!(
                "unknown model kind {other:?} (expected effective, subspace or full_spin)"
            ))),
        }
    }
}

/// Static relative errors on the boundary couplings: `J → (1 + δ) J`.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Disorder {
    pub sender: f64,
    pub receiver: f64,
}

pub struct CouplingGenerator<C> {
    source: C,
    kind: ModelKind,
    model: ChainModel,
    disorder: Disorder,
    fixed: DMatrix<C64>,
    a_s: DMatrix<C64>,
    a_r: DMatrix<C64>,
    basis: BasisLayout,
}

fn affine_parts(kind: ModelKind, model: &ChainModel) -> Result<(DMatrix<f64>, DMatrix<f64>, DMatrix<f64>)> {
    let build = |js: f64, jr: f64| -> Result<DMatrix<f64>> {
        match kind {
            ModelKind::Effective => Ok(embedded_effective_hamiltonian(model, js, jr)),
            ModelKind::Subspace => Ok(single_excitation_hamiltonian(model, js, jr)?.total()),
            ModelKind::FullSpin => full_spin_hamiltonian(model, js, jr),
        }
    };
    let mut fixed = build(0.0, 0.0)?;
    let a_s = build(1.0, 0.0)? - &fixed;
    let a_r = build(0.0, 1.0)? - &fixed;
    if kind != ModelKind::Effective {
        let e = model.zeno_energy();
        for k in 0..fixed.nrows() {
            fixed[(k, k)] -= e;
        }
    }
    Ok((fixed, a_s, a_r))
}

impl<C: CouplingSource> CouplingGenerator<C> {
    pub fn new(kind: ModelKind, model: ChainModel, source: C, disorder: Disorder) -> Result<Self> {
        if !(disorder.sender > -1.0 && disorder.receiver > -1.0)
            || !disorder.sender.is_finite()
            || !disorder.receiver.is_finite()
        {
            return Err(Error::domain(format!("coupling disorder must exceed -1, got {disorder:?}")));
        }
        let (fixed, a_s, a_r) = affine_parts(kind, &model)?;
        let n = model.sites();
        let basis = match kind {
            ModelKind::FullSpin => BasisLayout::FullSpin { sites: n },
            _ => BasisLayout::Sector { sites: n },
        };
        Ok(Self {
            source,
            kind,
            model,
            disorder,
            fixed: to_complex(&fixed),
            a_s: to_complex(&a_s),
            a_r: to_complex(&a_r),
            basis,
        })
    }

    pub fn kind(&self) -> ModelKind {
        self.kind
    }

    pub fn model(&self) -> &ChainModel {
        &self.model
    }

    pub fn disorder(&self) -> Disorder {
        self.disorder
    }

    pub fn source(&self) -> &C {
        &self.source
    }

    /// Couplings actually applied at `t`, disorder included.
    pub fn applied_couplings(&self, t: f64) -> (f64, f64) {
        let (js, jr) = self.source.couplings(t);
        (js * (1.0 + self.disorder.sender), jr * (1.0 + self.disorder.receiver))
    }
}

impl<C: CouplingSource> Generator for CouplingGenerator<C> {
    fn dim(&self) -> usize {
        self.basis.dim()
    }

    fn hamiltonian(&self, t: f64, out: &mut DMatrix<C64>) {
        let (js, jr) = self.applied_couplings(t);
        out.copy_from(&self.fixed);
        out.zip_zip_apply(&self.a_s, &self.a_r, |h, s, r| *h += s * js + r * jr);
    }

    fn basis(&self) -> Option<BasisLayout> {
        Some(self.basis)
    }
}
