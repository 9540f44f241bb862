//! Strict JSON configuration.
//!
//! Times are in units of the pulse duration `T` and rates in units of `1/T`,
//! so `T` itself never appears. Every field has a default; unknown keys are
//! rejected at every level.

use std::path::Path;

use qst_core::dynamics::ModelKind;
use qst_core::model::MAX_FULL_SPIN_SITES;
use qst_core::pulse::{self, PulseParameters};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};

pub const SCHEMA_VERSION: u32 = 1;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    #[serde(rename = "N")]
    pub n: usize,
    #[serde(rename = "J_B_times_T")]
    pub j_b_times_t: f64,
    pub model_kind: ModelKindName,
    pub pulse: PulseConfig,
    pub noise: NoiseConfig,
    /// Keep every `decimation`-th integrator step in trajectory output.
    pub decimation: usize,
    /// Upper bound on `h · ‖H‖` for state and density runs.
    pub step_gate: f64,
    /// Upper bound on `h · ‖H‖` when the full propagator is accumulated.
    pub propagator_step_gate: f64,
    /// Rerun on a halved step and compare `F(T)`.
    pub convergence_check: bool,
    pub convergence_tolerance: f64,
    pub sweeps: SweepConfig,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            n: 5,
            j_b_times_t: 1000.0,
            model_kind: ModelKindName::Subspace,
            pulse: PulseConfig::default(),
            noise: NoiseConfig::default(),
            decimation: 100,
            step_gate: 0.05,
            propagator_step_gate: 0.01,
            convergence_check: true,
            convergence_tolerance: 1e-8,
            sweeps: SweepConfig::default(),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ModelKindName {
    Effective,
    Subspace,
    FullSpin,
}

impl From<ModelKindName> for ModelKind {
    fn from(k: ModelKindName) -> Self {
        match k {
            ModelKindName::Effective => ModelKind::Effective,
            ModelKindName::Subspace => ModelKind::Subspace,
            ModelKindName::FullSpin => ModelKind::FullSpin,
        }
    }
}

impl From<ModelKind> for ModelKindName {
    fn from(k: ModelKind) -> Self {
        match k {
            ModelKind::Effective => ModelKindName::Effective,
            ModelKind::Subspace => ModelKindName::Subspace,
            ModelKind::FullSpin => ModelKindName::FullSpin,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct PulseConfig {
    #[serde(rename = "N_beta")]
    pub n_beta: u32,
    pub f_winding: i32,
    /// `null` calibrates against the phase condition.
    pub mu: Option<f64>,
    pub samples: usize,
}

impl Default for PulseConfig {
    fn default() -> Self {
        Self {
            n_beta: pulse::DEFAULT_N_BETA,
            f_winding: pulse::DEFAULT_F_WINDING,
            mu: None,
            samples: pulse::DEFAULT_SAMPLES,
        }
    }
}

impl PulseConfig {
    /// Parameters with `T = 1`; `mu` is zero when it still has to be calibrated.
    pub fn parameters(&self) -> Result<PulseParameters> {
        Ok(PulseParameters::new(1.0, self.n_beta, self.mu.unwrap_or(0.0), self.f_winding, self.samples)?)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum NoisyFidelity {
    /// Start from `(|0⟩+|1⟩)/√2`; `F = 1/2 + |c|/3 + p/6`.
    Channel,
    /// Start from `|1⟩⟨1|`; `|f| = √⟨N|ρ|N⟩`.
    Population,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct NoiseConfig {
    #[serde(rename = "gamma_over_JM")]
    pub gamma_over_jm: f64,
    #[serde(rename = "delta_JS_rel")]
    pub delta_js_rel: f64,
    #[serde(rename = "delta_JR_rel")]
    pub delta_jr_rel: f64,
    pub noisy_fidelity: NoisyFidelity,
}

impl Default for NoiseConfig {
    fn default() -> Self {
        Self {
            gamma_over_jm: 0.0,
            delta_js_rel: 0.0,
            delta_jr_rel: 0.0,
            noisy_fidelity: NoisyFidelity::Channel,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct SweepConfig {
    #[serde(rename = "fig2_N")]
    pub fig2_n: Vec<usize>,
    #[serde(rename = "bus_J_B_times_T")]
    pub bus_j_b_times_t: Vec<f64>,
    #[serde(rename = "bus_N")]
    pub bus_n: Vec<usize>,
    pub disorder_points: usize,
    pub disorder_max: f64,
    pub dephasing_points: usize,
    #[serde(rename = "dephasing_max_gamma_over_JM")]
    pub dephasing_max: f64,
    #[serde(rename = "zeno_J_B_times_T")]
    pub zeno_j_b_times_t: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        Self {
            fig2_n: vec![4, 5, 6, 7, 8, 9],
            bus_j_b_times_t: vec![50.0, 100.0, 200.0, 400.0, 700.0, 1000.0, 2000.0, 4000.0],
            bus_n: vec![4, 5, 7],
            disorder_points: 21,
            disorder_max: 0.05,
            dephasing_points: 11,
            dephasing_max: 0.01,
            zeno_j_b_times_t: vec![100.0, 300.0, 1000.0, 3000.0],
        }
    }
}

impl SweepConfig {
    /// `points` evenly spaced values on `[-max, max]`.
    pub fn disorder_grid(&self) -> Vec<f64> {
        symmetric_grid(self.disorder_max, self.disorder_points)
    }

    pub fn dephasing_grid(&self) -> Vec<f64> {
        let n = self.dephasing_points;
        if n == 1 {
            return vec![0.0];
        }
        (0..n).map(|k| self.dephasing_max * k as f64 / (n - 1) as f64).collect()
    }
}

fn symmetric_grid(max: f64, points: usize) -> Vec<f64> {
    if points == 1 {
        return vec![0.0];
    }
    let half = (points - 1) as f64 / 2.0;
    (0..points).map(|k| max * (k as f64 - half) / half).collect()
}

fn bad(msg: impl Into<String>) -> Error {
    Error::Config(msg.into())
}

impl ExperimentConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 3 {
            return Err(bad(format!("N must be >= 3, got {}", self.n)));
        }
        if !(self.j_b_times_t > 0.0) || !self.j_b_times_t.is_finite() {
            return Err(bad(format!("J_B_times_T must be positive, got {}", self.j_b_times_t)));
        }
        if self.model_kind == ModelKindName::FullSpin && self.n > MAX_FULL_SPIN_SITES {
            return Err(bad(format!("model_kind full_spin needs N <= {MAX_FULL_SPIN_SITES}")));
        }
        self.pulse.parameters().map_err(|e| bad(format!("pulse: {e}")))?;
        let nz = &self.noise;
        if !(nz.gamma_over_jm >= 0.0) || !nz.gamma_over_jm.is_finite() {
            return Err(bad(format!("noise.gamma_over_JM must be >= 0, got {}", nz.gamma_over_jm)));
        }
        for (name, d) in [("delta_JS_rel", nz.delta_js_rel), ("delta_JR_rel", nz.delta_jr_rel)] {
            if !(d.abs() <= 0.5) {
                return Err(bad(format!("noise.{name} must lie in [-0.5, 0.5], got {d}")));
            }
        }
        if self.decimation == 0 {
            return Err(bad("decimation must be >= 1"));
        }
        for (name, g) in [("step_gate", self.step_gate), ("propagator_step_gate", self.propagator_step_gate)] {
            if !(g > 0.0 && g <= 0.05) {
                return Err(bad(format!("{name} must lie in (0, 0.05], got {g}")));
            }
        }
        if !(self.convergence_tolerance > 0.0) {
            return Err(bad("convergence_tolerance must be positive"));
        }
        let s = &self.sweeps;
        if s.fig2_n.is_empty() || s.bus_n.is_empty() {
            return Err(bad("sweep chain-length lists must be nonempty"));
        }
        if let Some(&n) = s.fig2_n.iter().chain(&s.bus_n).find(|&&n| n < 3) {
            return Err(bad(format!("sweep chain lengths must be >= 3, got {n}")));
        }
        for (name, list) in [("bus_J_B_times_T", &s.bus_j_b_times_t), ("zeno_J_B_times_T", &s.zeno_j_b_times_t)] {
            if list.is_empty() || list.iter().any(|v| !(*v > 0.0) || !v.is_finite()) {
                return Err(bad(format!("sweeps.{name} must be a nonempty list of positive numbers")));
            }
        }
        if s.disorder_points == 0 || !(s.disorder_max.abs() <= 0.5) {
            return Err(bad("sweeps.disorder_points must be >= 1 and |disorder_max| <= 0.5"));
        }
        if s.dephasing_points == 0 || !(s.dephasing_max >= 0.0) || !s.dephasing_max.is_finite() {
            return Err(bad("sweeps.dephasing_points must be >= 1 and dephasing_max_gamma_over_JM >= 0"));
        }
        Ok(())
    }

    /// Parses a configuration document. A manifest written by this tool is
    /// accepted too; its `config` member is used.
    pub fn from_json_str(text: &str, origin: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text).map_err(|e| Error::Json {
            path: origin.to_string(),
            line: e.line(),
            column: e.column(),
            message: e.to_string(),
        })?;
        Self::from_value(value)
    }

    pub fn from_value(value: Value) -> Result<Self> {
        let value = match value {
            Value::Object(mut map) if map.contains_key("schema_version") => {
                let version = map.get("schema_version").and_then(Value::as_u64);
                if version != Some(SCHEMA_VERSION as u64) {
                    return Err(bad(format!("unsupported manifest schema_version {version:?}")));
                }
                map.remove("config").ok_or_else(|| bad("manifest has no config member"))?
            }
            v => v,
        };
        let cfg: Self = serde_json::from_value(value).map_err(|e| bad(e.to_string()))?;
        cfg.validate()?;
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json_str(&text, &path.display().to_string())
    }

    /// Applies `key=value` overrides. Keys are dotted paths into the document
    /// (`pulse.f_winding`); values are JSON literals, and anything that does not
    /// parse as JSON is taken as a string.
    pub fn with_overrides<S: AsRef<str>>(&self, overrides: &[S]) -> Result<Self> {
        let mut doc = self.to_value();
        for item in overrides {
            let item = item.as_ref();
            let (key, raw) = item
                .split_once('=')
                .ok_or_else(|| bad(format!("override {item:?} is not KEY=VALUE")))?;
            let value = serde_json::from_str(raw).unwrap_or_else(|_| Value::String(raw.to_string()));
            set_path(&mut doc, key.trim(), value)?;
        }
        Self::from_value(doc)
    }

    pub fn to_value(&self) -> Value {
        serde_json::to_value(self).expect("configuration serializes")
    }

    pub fn model(&self) -> ModelKind {
        self.model_kind.into()
    }
}

fn set_path(doc: &mut Value, key: &str, value: Value) -> Result<()> {
    let mut node = doc;
    let parts: Vec<&str> = key.split('.').collect();
    for (i, part) in parts.iter().enumerate() {
        let map = node
            .as_object_mut()
            .ok_or_else(|| bad(format!("override key {key:?}: {} is not an object", parts[..i].join("."))))?;
        let slot = map
            .get_mut(*part)
            .ok_or_else(|| bad(format!("unknown configuration key {key:?}")))?;
        if i + 1 == parts.len() {
            *slot = value;
            return Ok(());
        }
        node = slot;
    }
    Err(bad("empty override key"))
}
