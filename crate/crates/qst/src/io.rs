//! CSV datasets and the run manifest.
//!
//! Numbers are written with Rust's shortest round-trip formatting, so equal
//! results give byte-identical files.

use std::fs;
use std::path::{Path, PathBuf};

use nalgebra::DMatrix;
use qst_core::pulse::ControlSchedule;
use qst_core::C64;
use serde_json::{json, Value};

use crate::config::{ExperimentConfig, SCHEMA_VERSION};
use crate::error::{Error, Result};
use crate::experiments::{BusSweep, DephasingSweep, DisorderSweep, TransferRun, ZenoGapRow};

pub const SCHEDULE_HEADER: [&str; 11] = [
    "t", "beta", "beta_dot", "delta_x_dot", "theta", "delta_x", "g_x", "g_z", "J_S", "J_R", "phi_N",
];

fn num(x: f64) -> String {
    format!("{x}")
}

fn writer(path: &Path) -> Result<csv::Writer<fs::File>> {
    let file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    Ok(csv::Writer::from_writer(file))
}

pub fn ensure_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))
}

/// One row per schedule grid point; `t` in units of `T`, rates in `1/T`.
pub fn write_schedule_csv(path: &Path, schedule: &ControlSchedule) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(SCHEDULE_HEADER)?;
    let tt = schedule.duration();
    for (k, s) in schedule.samples().enumerate() {
        w.write_record([
            num(s.t / tt),
            num(s.beta),
            num(s.beta_dot * tt),
            num(s.delta_x_dot * tt),
            num(s.theta),
            num(s.delta_x),
            num(s.g_x * tt),
            num(s.g_z * tt),
            num(schedule.j_s()[k] * tt),
            num(schedule.j_r()[k] * tt),
            num(s.phi_n.unwrap_or(f64::NAN)),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn trajectory_header(n: usize) -> Vec<String> {
    let mut h: Vec<String> = ["t_over_T", "re_f", "im_f", "abs_f", "F"].iter().map(|s| s.to_string()).collect();
    h.extend((1..=n).map(|k| format!("pop_site_{k}")));
    h.push("pop_vacuum".into());
    h
}

/// `t_over_T,re_f,im_f,abs_f,F,pop_site_1..pop_site_N,pop_vacuum`.
pub fn write_trajectory_csv(path: &Path, run: &TransferRun) -> Result<()> {
    let layout = run.layout();
    let n = layout.sites();
    let traj = &run.trajectory;
    let mut w = writer(path)?;
    w.write_record(trajectory_header(n))?;
    for (k, &t) in traj.times.iter().enumerate() {
        let f = run.fidelity.f[k];
        let mut row = vec![num(t), num(f.re), num(f.im), num(f.norm()), num(run.fidelity.fidelity[k])];
        row.extend((1..=n).map(|s| num(traj.states.population(k, layout.site(s)))));
        row.push(num(traj.states.population(k, layout.vacuum())));
        w.write_record(row)?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Dense complex matrix, row-major, columns `c{j}_re,c{j}_im`.
pub fn write_matrix_csv(path: &Path, m: &DMatrix<C64>) -> Result<()> {
    let mut w = writer(path)?;
    let header: Vec<String> = (0..m.ncols()).flat_map(|j| [format!("c{j}_re"), format!("c{j}_im")]).collect();
    w.write_record(header)?;
    for i in 0..m.nrows() {
        w.write_record((0..m.ncols()).flat_map(|j| [num(m[(i, j)].re), num(m[(i, j)].im)]))?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_bus_csv(path: &Path, sweep: &BusSweep) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["N", "J_B_times_T", "J_M_times_T", "J_B_over_J_M", "F", "infidelity"])?;
    for r in &sweep.rows {
        w.write_record([
            r.n.to_string(),
            num(r.j_b_times_t),
            num(r.j_m),
            num(r.ratio()),
            num(r.fidelity),
            num(r.infidelity()),
        ])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_disorder_csv(path: &Path, sweep: &DisorderSweep) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["delta_JS_rel", "delta_JR_rel", "F"])?;
    for (i, &s) in sweep.deltas.iter().enumerate() {
        for (j, &r) in sweep.deltas.iter().enumerate() {
            w.write_record([num(s), num(r), num(sweep.fidelity[i][j])])?;
        }
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_dephasing_csv(path: &Path, sweep: &DephasingSweep) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["gamma_over_JM", "gamma_times_T", "F", "F_population"])?;
    for r in &sweep.rows {
        w.write_record([num(r.gamma_over_jm), num(r.gamma_times_t), num(r.fidelity), num(r.population_fidelity)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

pub fn write_zeno_gap_csv(path: &Path, rows: &[ZenoGapRow]) -> Result<()> {
    let mut w = writer(path)?;
    w.write_record(["N", "J_B_times_T", "propagator_distance", "state_distance"])?;
    for r in rows {
        w.write_record([r.n.to_string(), num(r.j_b_times_t), num(r.propagator_distance), num(r.state_distance)])?;
    }
    w.flush().map_err(|e| Error::io(path, e))
}

/// Collects dataset entries and writes `manifest.json`.
#[derive(Debug)]
pub struct Manifest {
    command: String,
    config: ExperimentConfig,
    datasets: Vec<Value>,
}

impl Manifest {
    pub fn new(command: &str, config: &ExperimentConfig) -> Self {
        Self {
            command: command.to_string(),
            config: config.clone(),
            datasets: Vec::new(),
        }
    }

    /// Records `file` produced under `config` (fully resolved) with extra facts.
    pub fn add(&mut self, file: &str, config: &ExperimentConfig, extra: Value) {
        let mut entry = json!({ "file": file, "config": config.to_value() });
        if let (Some(e), Value::Object(x)) = (entry.as_object_mut(), extra) {
            e.extend(x);
        }
        self.datasets.push(entry);
    }

    pub fn to_value(&self) -> Value {
        json!({
            "schema_version": SCHEMA_VERSION,
            "command": self.command,
            "config": self.config.to_value(),
            "datasets": self.datasets,
        })
    }

    pub fn write(&self, dir: &Path) -> Result<PathBuf> {
        let path = dir.join("manifest.json");
        let text = serde_json::to_string_pretty(&self.to_value()).expect("manifest serializes");
        fs::write(&path, text + "\n").map_err(|e| Error::io(&path, e))?;
        Ok(path)
    }
}
