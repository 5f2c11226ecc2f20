//! One function per subcommand. Each writes its files into the output
//! directory and returns the JSON summary it also printed there.

use anyhow::{Context, Result};
use serde_json::{json, Value};

use ifslab_core::df::{self, Invariant, RegimeCase, StationaryDensity};
use ifslab_core::ifs::{self, DEFAULT_PAIR_GRID};
use ifslab_core::mc::{self, ChainOptions, TabulatedCdf, Trajectory};
use ifslab_core::numerics::spectrum::{estimate_spectrum, power_iteration, SpectrumOptions};
use ifslab_core::numerics::ulam::build_ulam;
use ifslab_core::{Error, Execution, WeightFunction};

use crate::config::ExperimentConfig;
use crate::output::{create_dir, file_name, fmt_f64, grid_rows, in_dir, write_csv, write_json};

/// Interior window of the stationarity residual.
pub const RESIDUAL_EPS: f64 = 1e-3;
pub const RESIDUAL_TOL: f64 = 1e-3;
/// Cells of the tabulated CDF used for KS statistics.
pub const CDF_TABLE_CELLS: usize = 4096;

fn weight_of(cfg: &ExperimentConfig) -> Result<WeightFunction> {
    Ok(WeightFunction::parse(&cfg.weight)?.with_alpha(cfg.alpha)?)
}

fn cell_rows(masses: &[f64]) -> impl Iterator<Item = String> + '_ {
    let n = masses.len() as f64;
    masses.iter().enumerate().map(move |(i, m)| {
        format!("{i},{},{},{}", fmt_f64(i as f64 / n), fmt_f64((i + 1) as f64 / n), fmt_f64(*m))
    })
}

/// `density`: closed-form density, Ulam stationary vector and the
/// stationarity residual of the former.
pub fn density(cfg: &ExperimentConfig) -> Result<Value> {
    let weight = weight_of(cfg)?;
    let d = StationaryDensity::new(&weight)?;
    create_dir(&cfg.out)?;
    let f = d.on_grid(cfg.grid)?;
    let density_path = in_dir(&cfg.out, "density.csv");
    write_csv(&density_path, "x,f", grid_rows(f.values()))?;

    let qf = df::apply_q_adjoint(&weight, &f)?;
    let residual = qf.sup_distance_on(&f, RESIDUAL_EPS, 1.0 - RESIDUAL_EPS)?;

    let m = build_ulam(&weight, cfg.cells)?;
    let opts = SpectrumOptions::default();
    let (pi, converged) = match power_iteration(&m, opts.tol, opts.max_iter) {
        Ok(pi) => (pi, true),
        Err(Error::NoConvergence { last, .. }) => (*last, false),
        Err(e) => return Err(e.into()),
    };
    let n = cfg.cells as f64;
    let exact: Vec<f64> = (0..cfg.cells)
        .map(|i| d.cdf((i + 1) as f64 / n) - d.cdf(i as f64 / n))
        .collect();
    let l1: f64 = pi.iter().zip(&exact).map(|(a, b)| (a - b).abs()).sum();
    let stationary_path = in_dir(&cfg.out, "ulam_stationary.csv");
    write_csv(
        &stationary_path,
        "cell,x_left,x_right,mass,density_mass",
        pi.iter().zip(&exact).enumerate().map(|(i, (a, b))| {
            format!("{i},{},{},{},{}", fmt_f64(i as f64 / n), fmt_f64((i + 1) as f64 / n), fmt_f64(*a), fmt_f64(*b))
        }),
    )?;

    let summary = json!({
        "weight": cfg.weight,
        "grid": cfg.grid,
        "interior": [RESIDUAL_EPS, 1.0 - RESIDUAL_EPS],
        "sup_residual": residual,
        "tolerance": RESIDUAL_TOL,
        "residual_below_tolerance": residual < RESIDUAL_TOL,
        "normalization": d.normalization(),
        "exponents": [d.exponents().0, d.exponents().1],
        "density_file": file_name(&density_path),
        "n_cells": cfg.cells,
        "stationary_file": file_name(&stationary_path),
        "stationary_converged": converged,
        "stationary_l1_error": l1,
    });
    write_json(&in_dir(&cfg.out, "residual.json"), &summary)?;
    Ok(summary)
}

/// `classify`: regime report with the density or harmonic function on file.
pub fn classify(cfg: &ExperimentConfig) -> Result<Value> {
    let weight = weight_of(cfg)?;
    let report = df::classify_regime_on(&weight, df::DEFAULT_REGIME_TOL, cfg.grid)?;
    create_dir(&cfg.out)?;
    let (mut density_file, mut h_file, mut harmonic_residual) = (Value::Null, Value::Null, Value::Null);
    match &report.invariant {
        Invariant::Density(f) => {
            let path = in_dir(&cfg.out, "density.csv");
            write_csv(&path, "x,f", grid_rows(f.values()))?;
            density_file = json!(file_name(&path));
        }
        Invariant::BoundaryMix { h } => {
            let path = in_dir(&cfg.out, "h.csv");
            write_csv(&path, "x,h", grid_rows(h.values()))?;
            h_file = json!(file_name(&path));
            harmonic_residual = json!(df::apply_q(&weight, h)?.sub(h)?.sup_norm());
        }
        Invariant::PointMass0 | Invariant::PointMass1 => {}
    }
    let invariant = match report.case {
        RegimeCase::AcUnique => "density",
        RegimeCase::Dirac0 => "point mass at 0",
        RegimeCase::Dirac1 => "point mass at 1",
        RegimeCase::BoundaryMix => "mixtures (1 - h(x)) delta_0 + h(x) delta_1",
    };
    let summary = json!({
        "weight": cfg.weight,
        "p0": report.p0,
        "q1": report.q1,
        "case": report.case,
        "near_threshold": report.near_threshold,
        "invariant": invariant,
        "density_file": density_file,
        "h_file": h_file,
        "harmonic_residual": harmonic_residual,
    });
    write_json(&in_dir(&cfg.out, "regime.json"), &summary)?;
    Ok(summary)
}

fn verdict(ok: bool) -> &'static str {
    if ok {
        "PASS"
    } else {
        "FAIL"
    }
}

/// `verify`: estimates for the contraction, regularity and minorization
/// hypotheses.
pub fn verify(cfg: &ExperimentConfig) -> Result<Value> {
    let weight = weight_of(cfg)?;
    let r = ifs::verify_hypotheses(&weight, cfg.alpha, DEFAULT_PAIR_GRID)?;
    let case = RegimeCase::of(&weight, df::DEFAULT_REGIME_TOL);
    let unique = case != RegimeCase::BoundaryMix;
    let mut note = String::from("H1-H3 are sufficient, not necessary, for a unique invariant measure.");
    if !(r.h1() && r.h2() && r.h3()) && unique {
        note.push_str(&format!(
            " Not all hypotheses hold, yet the boundary values p(0) = {}, q(1) = {} put the chain in regime {case}, \
             which has a unique invariant measure.",
            weight.p(0.0),
            weight.q(1.0)
        ));
    }
    if !r.h3() {
        note.push_str(" H3 fails: inf p = inf q = 0 on the grid, so no uniform minorization by either map family exists.");
    }
    create_dir(&cfg.out)?;
    let summary = json!({
        "weight": cfg.weight,
        "alpha": r.alpha,
        "pair_grid": DEFAULT_PAIR_GRID,
        "r": r.r_estimate,
        "r_alpha": r.r_alpha_estimate,
        "delta": r.delta,
        "minorant_side": r.minorant_side,
        "witness_found": r.witness_found,
        "H1": verdict(r.h1()),
        "H2": verdict(r.h2()),
        "H3": verdict(r.h3()),
        "case": case,
        "unique_invariant_measure": unique,
        "note": note,
    });
    write_json(&in_dir(&cfg.out, "hypotheses.json"), &summary)?;
    Ok(summary)
}

/// `spectrum`: Ulam stationary vector and second-eigenvalue estimate.
pub fn spectrum(cfg: &ExperimentConfig, dump_matrix: bool) -> Result<Value> {
    let weight = weight_of(cfg)?;
    let est = estimate_spectrum(&weight, cfg.cells, &SpectrumOptions::default())?;
    create_dir(&cfg.out)?;
    let stationary_path = in_dir(&cfg.out, "stationary.csv");
    write_csv(&stationary_path, "cell,x_left,x_right,mass", cell_rows(&est.stationary))?;
    let matrix_file = if dump_matrix {
        let m = build_ulam(&weight, cfg.cells)?;
        let path = in_dir(&cfg.out, "ulam_matrix.csv");
        write_csv(&path, "i,j,prob", m.nonzero().map(|(i, j, p)| format!("{i},{j},{}", fmt_f64(p))))?;
        json!(file_name(&path))
    } else {
        Value::Null
    };
    let summary = json!({
        "weight": cfg.weight,
        "n_cells": est.n_cells,
        "case": est.case,
        "lambda2": est.lambda2,
        "decay_fit": est.decay_fit,
        "converged": est.converged,
        "degenerate": est.degenerate,
        "lambda2_two_sided": est.lambda2_two_sided,
        "stationary_converged": est.stationary_converged,
        "stationary_file": file_name(&stationary_path),
        "matrix_file": matrix_file,
    });
    write_json(&in_dir(&cfg.out, "spectrum.json"), &summary)?;
    Ok(summary)
}

/// `simulate`: empirical measure of many chains, a recorded trajectory and a
/// KS comparison with the invariant law when it has a density.
pub fn simulate(cfg: &ExperimentConfig) -> Result<Value> {
    let weight = weight_of(cfg)?;
    if cfg.burn_in >= cfg.steps {
        return Err(crate::config::ConfigError::Value {
            key: "burn_in",
            reason: format!("{} must be smaller than steps = {}", cfg.burn_in, cfg.steps),
        }
        .into());
    }
    let opts = ChainOptions::default();
    let emp = mc::run_chains(&weight, cfg.x0, cfg.steps, cfg.chains, cfg.burn_in, cfg.seed, &opts)?;
    create_dir(&cfg.out)?;
    let empirical_path = in_dir(&cfg.out, "empirical.csv");
    write_csv(
        &empirical_path,
        "bin_left,bin_right,count",
        emp.bins().map(|(a, b, c)| format!("{},{},{c}", fmt_f64(a), fmt_f64(b))),
    )?;
    let traj = Trajectory::simulate(&weight, cfg.x0, cfg.steps, cfg.seed, 0)?;
    let trajectory_path = in_dir(&cfg.out, "trajectory.csv");
    write_csv(
        &trajectory_path,
        "n,z",
        traj.states.iter().enumerate().map(|(n, z)| format!("{n},{}", fmt_f64(*z))),
    )?;

    let case = RegimeCase::of(&weight, df::DEFAULT_REGIME_TOL);
    let ks = if case == RegimeCase::AcUnique {
        let d = StationaryDensity::new(&weight)?;
        let table = TabulatedCdf::from_cdf(&d, CDF_TABLE_CELLS, Execution::default())?;
        serde_json::to_value(mc::ks_test(&emp, &table)?)?
    } else {
        Value::Null
    };
    let total = emp.total as f64;
    let nb = emp.n_bins();
    let summary = json!({
        "weight": cfg.weight,
        "case": case,
        "x0": cfg.x0,
        "seed": cfg.seed,
        "rng": mc::RNG_NAME,
        "n_chains": cfg.chains,
        "n_steps": cfg.steps,
        "burn_in": cfg.burn_in,
        "samples": emp.total,
        "mass_first_bin": emp.counts[0] as f64 / total,
        "mass_last_bin": emp.counts[nb - 1] as f64 / total,
        "empirical_file": file_name(&empirical_path),
        "trajectory_file": file_name(&trajectory_path),
        "ks": ks,
    });
    write_json(&in_dir(&cfg.out, "ks.json"), &summary)?;
    Ok(summary)
}

/// `drift`: Monte Carlo decay of `E[Δ(Z_n)]`.
pub fn drift(cfg: &ExperimentConfig) -> Result<Value> {
    let weight = weight_of(cfg)?;
    let report = df::drift_decay(&weight, cfg.x0, cfg.steps, cfg.chains, cfg.seed, Execution::default())
        .context("drift needs at least 100 chains")?;
    create_dir(&cfg.out)?;
    let drift_path = in_dir(&cfg.out, "drift.csv");
    write_csv(
        &drift_path,
        "n,mean_delta,stderr",
        report
            .curve
            .iter()
            .map(|p| format!("{},{},{}", p.n, fmt_f64(p.mean_delta), fmt_f64(p.stderr))),
    )?;
    let summary = json!({
        "weight": cfg.weight,
        "x0": cfg.x0,
        "seed": cfg.seed,
        "n_chains": cfg.chains,
        "n_max": cfg.steps,
        "fitted_rate": report.fitted_rate,
        "theoretical_rate": report.theoretical_rate,
        "points_used": report.points_used,
        "fit": "least squares slope of log mean over n with mean > 10 stderr",
        "drift_file": file_name(&drift_path),
    });
    write_json(&in_dir(&cfg.out, "drift.json"), &summary)?;
    Ok(summary)
}
