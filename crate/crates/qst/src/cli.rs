//! Command-line driver.

use std::ffi::OsString;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand, ValueEnum};
use nalgebra::{DMatrix, SymmetricEigen};
use qst_core::model::{
    bus_spectrum, diagonal_shift, full_spin_hamiltonian, mirror_matrix, restrict_to_sector, rotated_hamiltonian,
    single_excitation_hamiltonian, zeno_effective_hamiltonian, ChainModel,
};
use qst_core::C64;
use serde_json::json;

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::experiments::{self, Design};
use crate::io::{self, Manifest};

#[derive(Debug, Parser)]
#[command(name = "qst", version, about = "Spin-chain state transfer: pulse design, propagation and figure datasets")]
pub struct Cli {
    /// JSON configuration document (a manifest.json is accepted too).
    #[arg(long, global = true, value_name = "PATH")]
    pub config: Option<PathBuf>,

    /// Override a configuration key, e.g. `-o N=7 -o pulse.f_winding=-2`.
    #[arg(short = 'o', value_name = "KEY=VALUE", global = true)]
    pub overrides: Vec<String>,

    #[arg(long, global = true, default_value = "out", value_name = "PATH")]
    pub output_dir: PathBuf,

    /// Worker threads for sweeps (0 = one per core).
    #[arg(long, global = true, default_value_t = 0)]
    pub threads: usize,

    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Calibrate the pulse and write the control schedule.
    Design {
        /// Also write the effective and rotated Hamiltonians at t = T/2.
        #[arg(long)]
        matrices: bool,
    },
    /// Run one transfer and write its trajectory.
    Evolve,
    /// Run one sweep.
    Sweep {
        #[arg(value_enum)]
        kind: SweepKind,
    },
    /// Write every figure dataset plus the Zeno-gap table.
    Figures,
    /// Check boundary conditions and model oracles; print a pass/fail table.
    Validate,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, ValueEnum)]
pub enum SweepKind {
    Bus,
    Disorder,
    Dephasing,
    Zeno,
}

/// Parses `args` (program name first), runs the command and returns the exit status.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let code = if e.use_stderr() { 2 } else { 0 };
            let _ = e.print();
            return code;
        }
    };
    match execute(&cli) {
        Ok(()) => 0,
        Err(e) => {
            eprintln!("error: {e}");
            e.exit_code()
        }
    }
}

pub fn resolve_config(cli: &Cli) -> Result<ExperimentConfig> {
    let base = match &cli.config {
        Some(p) => ExperimentConfig::load(p)?,
        None => ExperimentConfig::default(),
    };
    base.with_overrides(&cli.overrides)
}

pub fn execute(cli: &Cli) -> Result<()> {
    let cfg = resolve_config(cli)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(cli.threads)
        .build()
        .map_err(|e| Error::Config(format!("thread pool: {e}")))?;
    pool.install(|| dispatch(&cli.command, &cfg, &cli.output_dir))
}

fn dispatch(command: &Command, cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    match command {
        Command::Design { matrices } => cmd_design(cfg, out, *matrices),
        Command::Evolve => cmd_evolve(cfg, out),
        Command::Sweep { kind } => {
            io::ensure_dir(out)?;
            let mut manifest = Manifest::new(&format!("sweep {}", sweep_name(*kind)), cfg);
            run_sweep(*kind, cfg, out, &mut manifest)?;
            manifest.write(out)?;
            Ok(())
        }
        Command::Figures => cmd_figures(cfg, out),
        Command::Validate => cmd_validate(cfg),
    }
}

fn sweep_name(kind: SweepKind) -> &'static str {
    match kind {
        SweepKind::Bus => "bus",
        SweepKind::Disorder => "disorder",
        SweepKind::Dephasing => "dephasing",
        SweepKind::Zeno => "zeno",
    }
}

fn resolved_for(cfg: &ExperimentConfig, d: &Design) -> ExperimentConfig {
    let mut c = cfg.clone();
    c.n = d.n;
    c.pulse.mu = Some(d.mu());
    c
}

fn cmd_design(cfg: &ExperimentConfig, out: &Path, matrices: bool) -> Result<()> {
    io::ensure_dir(out)?;
    let d = experiments::design(cfg)?;
    let file = format!("schedule_N{}.csv", d.n);
    io::write_schedule_csv(&out.join(&file), &d.schedule)?;
    println!("N = {}  mu = {}  J_M = {} /T", d.n, d.mu(), d.j_m());
    print!("{}", d.report);
    let mut manifest = Manifest::new("design", cfg);
    manifest.add(&file, &resolved_for(cfg, &d), json!({ "J_M_times_T": d.j_m() }));
    if matrices {
        let model = ChainModel::new(d.n, cfg.j_b_times_t)?;
        let (js, jr) = d.schedule.couplings_at(0.5);
        let to_dyn = |m: nalgebra::Matrix4<f64>| DMatrix::from_fn(4, 4, |i, j| C64::from(m[(i, j)]));
        for (name, m) in [
            (format!("heff_N{}_half.csv", d.n), to_dyn(zeno_effective_hamiltonian(&model, js, jr))),
            (format!("he_N{}_half.csv", d.n), to_dyn(rotated_hamiltonian(&model, js, jr))),
        ] {
            io::write_matrix_csv(&out.join(&name), &m)?;
            manifest.add(&name, &resolved_for(cfg, &d), json!({ "t_over_T": 0.5 }));
        }
    }
    manifest.write(out)?;
    Ok(())
}

fn cmd_evolve(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    io::ensure_dir(out)?;
    let run = experiments::run_transfer(cfg)?;
    let file = format!("trajectory_N{}.csv", run.config.n);
    io::write_trajectory_csv(&out.join(&file), &run)?;
    println!(
        "N = {}  J_B T = {}  model = {}  steps = {}  F(T) = {:.12}",
        run.config.n,
        cfg.j_b_times_t,
        cfg.model().as_str(),
        run.steps,
        run.final_fidelity()
    );
    if let Some(c) = run.halving_change {
        println!("grid halving changed F(T) by {c:.3e}");
    }
    let mut manifest = Manifest::new("evolve", cfg);
    manifest.add(&file, &run.config, json!({ "F_final": run.final_fidelity(), "steps": run.steps }));
    manifest.write(out)?;
    Ok(())
}

fn run_sweep(kind: SweepKind, cfg: &ExperimentConfig, out: &Path, manifest: &mut Manifest) -> Result<()> {
    let s = &cfg.sweeps;
    match kind {
        SweepKind::Bus => {
            let sweep = experiments::sweep_bus_coupling(cfg, &s.bus_j_b_times_t, &s.bus_n)?;
            io::write_bus_csv(&out.join("fig3.csv"), &sweep)?;
            manifest.add("fig3.csv", cfg, json!({ "reference_difference": sweep.reference.difference() }));
            println!("fig3.csv: {} rows", sweep.rows.len());
        }
        SweepKind::Disorder => {
            let sweep = experiments::sweep_disorder(cfg, &s.disorder_grid())?;
            io::write_disorder_csv(&out.join("fig5.csv"), &sweep)?;
            manifest.add(
                "fig5.csv",
                cfg,
                json!({ "reference_difference": sweep.reference.difference(), "max_asymmetry": sweep.max_asymmetry() }),
            );
            println!("fig5.csv: corners F(T) = {:?}", sweep.corners());
        }
        SweepKind::Dephasing => {
            let sweep = experiments::sweep_dephasing(cfg, &s.dephasing_grid())?;
            io::write_dephasing_csv(&out.join("fig6.csv"), &sweep)?;
            manifest.add(
                "fig6.csv",
                cfg,
                json!({
                    "J_M_times_T": sweep.j_m,
                    "reference_difference": sweep.reference.difference(),
                    "strictly_decreasing": sweep.strictly_decreasing(),
                }),
            );
            if let Some(last) = sweep.rows.last() {
                println!("fig6.csv: F(T) = {:.6} at gamma/J_M = {}", last.fidelity, last.gamma_over_jm);
            }
        }
        SweepKind::Zeno => {
            let rows = experiments::zeno_gap_report(cfg, &s.zeno_j_b_times_t)?;
            io::write_zeno_gap_csv(&out.join("zeno_gap.csv"), &rows)?;
            manifest.add("zeno_gap.csv", cfg, json!({}));
            println!("zeno_gap.csv: {} rows", rows.len());
        }
    }
    Ok(())
}

fn cmd_figures(cfg: &ExperimentConfig, out: &Path) -> Result<()> {
    io::ensure_dir(out)?;
    let mut manifest = Manifest::new("figures", cfg);

    for run in experiments::fidelity_curves(cfg, &cfg.sweeps.fig2_n)? {
        let file = format!("fig2_N{}.csv", run.config.n);
        io::write_trajectory_csv(&out.join(&file), &run)?;
        manifest.add(&file, &run.config, json!({ "F_final": run.final_fidelity() }));
        println!("{file}: F(T) = {:.6}", run.final_fidelity());
    }

    let d = experiments::design(cfg)?;
    io::write_schedule_csv(&out.join("fig4.csv"), &d.schedule)?;
    manifest.add("fig4.csv", &resolved_for(cfg, &d), json!({ "J_M_times_T": d.j_m() }));
    println!("fig4.csv: J_M = {:.4} /T", d.j_m());

    for kind in [SweepKind::Bus, SweepKind::Disorder, SweepKind::Dephasing, SweepKind::Zeno] {
        run_sweep(kind, cfg, out, &mut manifest)?;
    }
    manifest.write(out)?;
    Ok(())
}

struct Check {
    name: String,
    value: f64,
    tolerance: f64,
}

impl Check {
    fn passed(&self) -> bool {
        self.value.abs() < self.tolerance
    }
}

/// Boundary-condition residuals and model oracle checks.
pub fn validation_checks(cfg: &ExperimentConfig) -> Result<Vec<(String, f64, f64, bool)>> {
    let mut checks = Vec::new();
    let d = experiments::design(cfg)?;
    for c in &d.report.checks {
        checks.push(Check {
            name: format!("N={} {}", d.n, c.name),
            value: c.residual,
            tolerance: qst_core::pulse::BOUNDARY_TOLERANCE,
        });
    }

    let mut n3 = 0.0f64;
    for k in 0..5 {
        let (js, jr) = probe_couplings(k);
        let m = ChainModel::new(3, 1.0)?;
        let h = single_excitation_hamiltonian(&m, js, jr)?.h0;
        let e = zeno_effective_hamiltonian(&m, js, jr);
        n3 = n3.max(DMatrix::from_fn(4, 4, |i, j| e[(i, j)] - h[(i, j)]).amax());
    }
    checks.push(Check {
        name: "N=3 effective vs three-site matrix".into(),
        value: n3,
        tolerance: 1e-14,
    });

    for n in 4..=12 {
        let size = n - 2;
        let mut numeric: Vec<f64> = SymmetricEigen::new(mirror_matrix(size)).eigenvalues.iter().copied().collect();
        numeric.sort_by(|a, b| b.total_cmp(a));
        let err = numeric
            .iter()
            .enumerate()
            .map(|(p, v)| (v - 2.0 * (p as f64 * std::f64::consts::PI / size as f64).cos()).abs())
            .fold(0.0, f64::max);
        let spec = bus_spectrum(&ChainModel::new(n, 1.0)?)?;
        checks.push(Check {
            name: format!("N={n} bus spectrum"),
            value: err.max((spec.eigenvalues[0] - (n as f64 - 3.0)).abs()),
            tolerance: 1e-10,
        });
    }

    for n in 3..=10 {
        let model = ChainModel::new(n, 1.3)?;
        let mut worst = 0.0f64;
        for k in 0..5 {
            let (js, jr) = probe_couplings(k + n);
            let full = restrict_to_sector(&full_spin_hamiltonian(&model, js, jr)?, n);
            let sub = single_excitation_hamiltonian(&model, js, jr)?.total();
            let (_, r) = diagonal_shift(&full, &sub);
            worst = worst.max(r);
        }
        checks.push(Check {
            name: format!("N={n} full-spin restriction"),
            value: worst,
            tolerance: 1e-10,
        });
    }
    Ok(checks
        .into_iter()
        .map(|c| {
            let p = c.passed();
            (c.name, c.value, c.tolerance, p)
        })
        .collect())
}

fn probe_couplings(k: usize) -> (f64, f64) {
    let x = k as f64 + 1.0;
    (3.0 * (1.7 * x).sin(), 2.5 * (2.3 * x).cos())
}

fn cmd_validate(cfg: &ExperimentConfig) -> Result<()> {
    let checks = validation_checks(cfg)?;
    let mut failed = 0;
    println!("{:<52} {:>12} {:>9}  result", "check", "residual", "tol");
    for (name, value, tol, passed) in &checks {
        println!("{name:<52} {value:>12.3e} {tol:>9.0e}  {}", if *passed { "PASS" } else { "FAIL" });
        failed += usize::from(!passed);
    }
    if failed > 0 {
        return Err(Error::Consistency(format!("{failed} validation check(s) failed")));
    }
    Ok(())
}
