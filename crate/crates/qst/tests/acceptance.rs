//! Acceptance suite: one PASS/FAIL line per criterion, exit status 1 if any fail.
//!
//! Run with `cargo test -p qst --test acceptance`.

use std::time::{Duration, Instant};

use nalgebra::{DMatrix, DVector, SymmetricEigen};
use qst::experiments::{self, design, run_transfer, unitarity_drift};
use qst::ExperimentConfig;
use qst_core::dynamics::{CouplingGenerator, Disorder, ModelKind};
use qst_core::model::*;
use qst_core::propagate::*;
use qst_core::pulse::*;
use qst_core::C64;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

type Outcome = Result<(bool, String), String>;

struct Suite {
    failures: usize,
}

impl Suite {
    fn check(&mut self, name: &str, budget: Option<Duration>, body: impl FnOnce() -> Outcome) {
        let start = Instant::now();
        let result = body();
        let elapsed = start.elapsed();
        let (mut pass, mut detail) = match result {
            Ok(r) => r,
            Err(e) => (false, format!("error: {e}")),
        };
        let timing = match budget {
            Some(b) => {
                if elapsed > b {
                    pass = false;
                    detail.push_str("; over time budget");
                }
                format!("{:.2} s of {} s", elapsed.as_secs_f64(), b.as_secs())
            }
            None => format!("{:.2} s", elapsed.as_secs_f64()),
        };
        if !pass {
            self.failures += 1;
        }
        println!("{} {name:<24} {detail} [{timing}]", if pass { "PASS" } else { "FAIL" });
    }
}

fn cfg(overrides: &[String]) -> Result<ExperimentConfig, String> {
    ExperimentConfig::default().with_overrides(overrides).map_err(|e| e.to_string())
}

fn fidelity_identities() -> Outcome {
    let cases = [(1.0, 1.0), (0.0, 0.5), (0.5, 17.0 / 24.0)];
    let pass = cases.iter().all(|&(f, want)| average_fidelity(f) == want);
    let got: Vec<String> = cases.iter().map(|&(f, _)| format!("F({f})={}", average_fidelity(f))).collect();
    Ok((pass, got.join(" ")))
}

fn three_site_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(3);
    let model = ChainModel::new(3, 1.0).map_err(|e| e.to_string())?;
    let mut worst = 0.0f64;
    for _ in 0..50 {
        let (js, jr) = (rng.gen_range(-5.0..5.0), rng.gen_range(-5.0..5.0));
        let h = single_excitation_hamiltonian(&model, js, jr).map_err(|e| e.to_string())?.h0;
        let e = zeno_effective_hamiltonian(&model, js, jr);
        for i in 0..4 {
            for j in 0..4 {
                worst = worst.max((e[(i, j)] - h[(i, j)]).abs());
            }
        }
    }
    Ok((worst <= 1e-14, format!("max entry difference {worst:.1e}")))
}

fn bus_spectrum_check() -> Outcome {
    let mut worst = 0.0f64;
    let mut top_exact = true;
    for n in 4..=12 {
        let size = n - 2;
        let mut numeric: Vec<f64> = SymmetricEigen::new(mirror_matrix(size)).eigenvalues.iter().copied().collect();
        numeric.sort_by(|a, b| b.total_cmp(a));
        for (p, v) in numeric.iter().enumerate() {
            worst = worst.max((v - 2.0 * (p as f64 * std::f64::consts::PI / size as f64).cos()).abs());
        }
        let j_b = 1.7;
        let spec = bus_spectrum(&ChainModel::new(n, j_b).map_err(|e| e.to_string())?).map_err(|e| e.to_string())?;
        top_exact &= spec.eigenvalues[0] == (n as f64 - 3.0) * j_b;
    }
    Ok((worst < 1e-10 && top_exact, format!("max eigenvalue error {worst:.1e}, top level exact: {top_exact}")))
}

fn oracle_equivalence() -> Outcome {
    let mut rng = ChaCha8Rng::seed_from_u64(17);
    let mut worst = 0.0f64;
    for n in 3..=10 {
        let model = ChainModel::new(n, rng.gen_range(0.5..3.0)).map_err(|e| e.to_string())?;
        for _ in 0..20 {
            let (js, jr) = (rng.gen_range(-4.0..4.0), rng.gen_range(-4.0..4.0));
            let full = full_spin_hamiltonian(&model, js, jr).map_err(|e| e.to_string())?;
            let sub = single_excitation_hamiltonian(&model, js, jr).map_err(|e| e.to_string())?.total();
            worst = worst.max(diagonal_shift(&restrict_to_sector(&full, n), &sub).1);
        }
    }
    Ok((worst < 1e-10, format!("N=3..10 x 20 pairs, max residual {worst:.1e}")))
}

fn fig2() -> Outcome {
    let c = cfg(&["J_B_times_T=1000".into()])?;
    let runs = experiments::fidelity_curves(&c, &[4, 5, 6, 7, 8, 9]).map_err(|e| e.to_string())?;
    let f: Vec<(usize, f64)> = runs.iter().map(|r| (r.config.n, r.final_fidelity())).collect();
    let pass = f.iter().all(|&(_, v)| v > 0.98) && f.iter().filter(|(n, _)| *n <= 5).all(|&(_, v)| v > 0.99);
    let text: Vec<String> = f.iter().map(|(n, v)| format!("N={n}:{v:.5}")).collect();
    Ok((pass, text.join(" ")))
}

fn fig3() -> Outcome {
    let c = cfg(&["N=5".into()])?;
    let j_m = design(&c).map_err(|e| e.to_string())?.j_m();
    let mut text = Vec::new();
    let mut pass = true;
    for (ratio, limit) in [(10.0, 0.015), (40.0, 0.002)] {
        let run = run_transfer(&cfg(&["N=5".into(), format!("J_B_times_T={}", ratio * j_m)])?).map_err(|e| e.to_string())?;
        let inf = 1.0 - run.final_fidelity();
        pass &= inf <= limit;
        text.push(format!("J_B/J_M={ratio}: 1-F={inf:.5} (<= {limit})"));
    }
    Ok((pass, text.join(", ")))
}

fn fig4() -> Outcome {
    let d = design(&cfg(&["N=5".into()])?).map_err(|e| e.to_string())?;
    let s = &d.schedule;
    let ends = [s.j_s()[0], *s.j_s().last().unwrap(), s.j_r()[0], *s.j_r().last().unwrap()];
    let worst = ends.iter().fold(0.0f64, |m, v| m.max(v.abs()));
    let j_m = d.j_m();
    Ok(((8.0..=12.0).contains(&j_m) && worst < 1e-9, format!("J_M = {j_m:.4}/T, endpoint couplings <= {worst:.1e}")))
}

fn fig5() -> Outcome {
    let c = cfg(&["N=5".into(), "J_B_times_T=1000".into()])?;
    let grid = c.sweeps.disorder_grid();
    if grid.len() != 21 || (grid[20] - 0.05).abs() > 1e-15 {
        return Err(format!("unexpected disorder grid {grid:?}"));
    }
    let sweep = experiments::sweep_disorder(&c, &grid).map_err(|e| e.to_string())?;
    let corners = sweep.corners();
    let text: Vec<String> = corners.iter().map(|v| format!("{v:.4}")).collect();
    Ok((corners.iter().all(|&v| v > 0.96), format!("21x21 grid, corners {}", text.join(" "))))
}

fn fig6() -> Outcome {
    let c = cfg(&["N=5".into(), "J_B_times_T=1000".into(), "noise.gamma_over_JM=0.01".into()])?;
    let run = run_transfer(&c).map_err(|e| e.to_string())?;
    let f = run.final_fidelity();
    Ok((
        (f - 0.91).abs() <= 0.03,
        format!("F(T) = {f:.4} at gamma/J_M = 0.01 (population-based {:.4})", run.final_population_fidelity()),
    ))
}

fn dephasing_analytics() -> Outcome {
    let n = 4;
    let sector = BasisLayout::Sector { sites: n };
    let full = BasisLayout::FullSpin { sites: n };
    let d = n + 1;
    let (gamma, t_end): (f64, f64) = (0.3, 1.5);
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let psi = DVector::from_fn(d, |_, _| C64::new(rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0))).normalize();
    let rho0 = DensityMatrix::from_pure(&QuantumState::new(psi).map_err(|e| e.to_string())?);

    // Per-site dephasing channel applied exactly in the 2^N space.
    let idx = sector_indices(n);
    let dim = full.dim();
    let mut rho = DMatrix::<C64>::zeros(dim, dim);
    for i in 0..d {
        for j in 0..d {
            rho[(idx[i], idx[j])] = rho0.matrix()[(i, j)];
        }
    }
    let keep = 0.5 * (1.0 + (-2.0 * gamma * t_end).exp());
    for l in 1..=n {
        let z = DMatrix::from_fn(dim, dim, |i, j| if i == j { C64::from(full.z_sign(l, i)) } else { C64::from(0.0) });
        rho = &rho * C64::from(keep) + &z * &rho * &z * C64::from(1.0 - keep);
    }

    let gen = FnGenerator::new(d, |_t, out: &mut DMatrix<C64>| out.fill(C64::from(0.0))).with_basis(sector);
    let grid = TimeGrid::new(0.0, t_end, 2000).map_err(|e| e.to_string())?;
    let traj = evolve_density(&gen, &rho0, gamma, grid, EvolveOptions::default()).map_err(|e| e.to_string())?;
    let out = traj.final_mixed().ok_or("no final state")?.matrix();
    let mut worst = 0.0f64;
    for i in 0..d {
        for j in 0..d {
            worst = worst.max((out[(i, j)] - rho[(idx[i], idx[j])]).norm());
        }
    }
    let r0 = rho0.matrix();
    let rate = |i: usize, j: usize| -(out[(i, j)] / r0[(i, j)]).re.ln() / t_end;
    let (single, vacuum) = (rate(1, 3) / gamma, rate(0, 2) / gamma);
    let pass = worst < 1e-6 && (single - 4.0).abs() < 1e-5 && (vacuum - 2.0).abs() < 1e-5;
    Ok((pass, format!("channel distance {worst:.1e}, rates {single:.6}g and {vacuum:.6}g")))
}

fn closed_form_oracle() -> Outcome {
    let mut text = Vec::new();
    let mut pass = true;
    for n in [3, 5, 8] {
        let p = calibrated_parameters(n, DEFAULT_N_BETA, DEFAULT_F_WINDING, 1.0, DEFAULT_SAMPLES).map_err(|e| e.to_string())?;
        let sched = boundary_couplings(&p, n).map_err(|e| e.to_string())?;
        let model = ChainModel::new(n, 1000.0).map_err(|e| e.to_string())?;
        let gen = CouplingGenerator::new(ModelKind::Effective, model, &sched, Disorder::default()).map_err(|e| e.to_string())?;
        let steps = required_steps(&gen, 0.0, 1.0, 0.0, 0.01, 2001);
        let grid = TimeGrid::new(0.0, 1.0, steps).map_err(|e| e.to_string())?;
        let opts = EvolveOptions { record_every: steps, ..Default::default() };
        let traj = evolve_state(&gen, &QuantumState::basis(n + 1, 1), grid, opts).map_err(|e| e.to_string())?;
        let psi = traj.final_pure().ok_or("no final state")?.amplitudes();

        let v = zeno_basis(n).map(C64::from);
        let s = sn_transform(n).map(C64::from);
        let s = DMatrix::from_fn(4, 4, |i, j| s[(i, j)]);
        let u = sched.analytic_propagator(1.0).map_err(|e| e.to_string())?;
        let u = DMatrix::from_fn(4, 4, |i, j| u[(i, j)]);
        // Back to the site basis: |ψ(T)⟩ = V Sᵀ U S e₁.
        let e1 = DVector::from_fn(4, |k, _| C64::from(if k == 1 { 1.0 } else { 0.0 }));
        let expected = &v * (s.transpose() * (u * (&s * e1)));
        let dist = phase_aligned_distance(psi, &expected);
        pass &= dist < 1e-6;
        text.push(format!("N={n}:{dist:.1e}"));
    }
    Ok((pass, format!("state distance {}", text.join(" "))))
}

fn hygiene() -> Outcome {
    let c = cfg(&["N=5".into(), "J_B_times_T=1000".into()])?;
    let d = design(&c).map_err(|e| e.to_string())?;
    let drift = unitarity_drift(&c, &d).map_err(|e| e.to_string())?;
    let run = run_transfer(&c).map_err(|e| e.to_string())?;
    let halving = run.halving_change.ok_or("halving check did not run")?;
    Ok((drift < 1e-8 && halving < 1e-8, format!("unitarity drift {drift:.1e}, halving change {halving:.1e}")))
}

fn main() {
    let secs = Duration::from_secs;
    let mut suite = Suite { failures: 0 };
    suite.check("fidelity identities", None, fidelity_identities);
    suite.check("N=3 equivalence", None, three_site_equivalence);
    suite.check("bus spectrum", None, bus_spectrum_check);
    suite.check("oracle equivalence", Some(secs(10)), oracle_equivalence);
    suite.check("fig2 fidelities", Some(secs(120)), fig2);
    suite.check("fig3 anchors", Some(secs(60)), fig3);
    suite.check("fig4 anchor", None, fig4);
    suite.check("fig5 corners", Some(secs(300)), fig5);
    suite.check("fig6 anchor", Some(secs(120)), fig6);
    suite.check("dephasing analytics", None, dephasing_analytics);
    suite.check("closed-form oracle", None, closed_form_oracle);
    suite.check("numerical hygiene", None, hygiene);
    if suite.failures > 0 {
        println!("{} criterion(s) failed", suite.failures);
        std::process::exit(1);
    }
    println!("all criteria passed");
}
