use std::fmt::Write as _;
use std::fs;
use std::path::Path;

use deception_core::sim::{fmt_num, MeanEstimate};
use deception_core::{
    build_slaph, cutoff_state, sender_equilibrium_strategy, simulate, verify_equilibrium, write_trace_csv, GameError,
    GameParams, SimulationConfig, SimulationReport, SlaphEquilibrium,
};
use rayon::prelude::*;

use crate::config::RunConfig;
use crate::{report, CliError};

pub const DEFAULT_GRID: usize = 512;
pub const DEFAULT_SWEEP_POINTS: usize = 200;
pub const DEFAULT_PROFILE_POINTS: usize = 101;

fn game_error(e: GameError) -> CliError {
    match e {
        GameError::InvalidParams(_) | GameError::DegenerateInterval { .. } | GameError::OutOfRange { .. } => {
            CliError::Config(e.to_string())
        }
        other => CliError::NoEquilibrium(other.to_string()),
    }
}

fn equilibrium(cfg: &RunConfig) -> Result<SlaphEquilibrium, CliError> {
    let mut eq = match &cfg.boundaries {
        Some(b) => SlaphEquilibrium::from_boundaries(&cfg.params, b).map_err(|e| CliError::Config(e.to_string()))?,
        None => build_slaph(&cfg.params).map_err(game_error)?,
    };
    eq.off_path = cfg.off_path;
    Ok(eq)
}

fn write_file(dir: &Path, name: &str, bytes: &[u8]) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| CliError::Io(format!("{}: {e}", dir.display())))?;
    let path = dir.join(name);
    fs::write(&path, bytes).map_err(|e| CliError::Io(format!("{}: {e}", path.display())))
}

fn csv_bytes(header: &[&str], rows: impl IntoIterator<Item = Vec<String>>) -> Result<Vec<u8>, CliError> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let err = |e: csv::Error| CliError::Io(e.to_string());
    w.write_record(header).map_err(err)?;
    for row in rows {
        w.write_record(&row).map_err(err)?;
    }
    w.into_inner().map_err(|e| CliError::Io(e.to_string()))
}

fn check_grid(grid: usize) -> Result<(), CliError> {
    if grid < deception_core::verify::MIN_GRID {
        return Err(CliError::Config(format!(
            "grid too coarse: --grid {grid} is below the minimum of {}",
            deception_core::verify::MIN_GRID
        )));
    }
    Ok(())
}

pub fn solve(cfg: &RunConfig, grid: usize) -> Result<String, CliError> {
    check_grid(grid)?;
    let eq = equilibrium(cfg)?;
    let ver = verify_equilibrium(&eq, grid).map_err(game_error)?;
    let text = report::render(&eq, cfg.evidence.as_ref(), &ver);
    write_file(&cfg.output_dir, "equilibrium_report.txt", text.as_bytes())?;
    Ok(text)
}

pub fn sweep_cutoff(cfg: &RunConfig, points: usize) -> Result<String, CliError> {
    if points < 2 {
        return Err(CliError::Config(format!("--points must be at least 2, found {points}")));
    }
    let (lo, hi) = cfg.kb_range;
    let p = &cfg.params;
    let ratios: Vec<f64> = (0..points)
        .map(|i| lo * (hi / lo).powf(i as f64 / (points - 1) as f64))
        .collect();
    let rows = ratios
        .par_iter()
        .map(|&r| {
            let params = GameParams::new(p.theta_min, p.theta_max, p.b, r * p.b, p.prior.clone())
                .map_err(|e| CliError::Config(e.to_string()))?;
            let hat = cutoff_state(&params, p.theta_min).map_err(game_error)?;
            Ok(vec![fmt_num(r), fmt_num(hat)])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let bytes = csv_bytes(&["k_over_b", "theta_hat"], rows)?;
    write_file(&cfg.output_dir, "cutoff_sweep.csv", &bytes)?;
    Ok(format!(
        "wrote {} rows for k/b in [{}, {}] to {}\n",
        points,
        fmt_num(lo),
        fmt_num(hi),
        cfg.output_dir.join("cutoff_sweep.csv").display()
    ))
}

pub fn strategy_profile(cfg: &RunConfig, points: usize) -> Result<String, CliError> {
    if points < 2 {
        return Err(CliError::Config(format!("--points must be at least 2, found {points}")));
    }
    let eq = equilibrium(cfg)?;
    let p = &cfg.params;
    let rows = (0..points)
        .map(|i| {
            let theta = if i + 1 == points {
                p.theta_max
            } else {
                p.theta_min + p.width() * i as f64 / (points - 1) as f64
            };
            let m = sender_equilibrium_strategy(&eq, theta).map_err(game_error)?;
            let regime = if m.is_separating() { "separating" } else { "pooled" };
            Ok(vec![fmt_num(theta), fmt_num(m.report), regime.to_string()])
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    let bytes = csv_bytes(&["theta", "sigma", "regime"], rows)?;
    write_file(&cfg.output_dir, "strategy_profile.csv", &bytes)?;
    Ok(format!(
        "theta_hat = {}, theta_b = {}; wrote {} rows to {}\n",
        fmt_num(eq.theta_hat()),
        fmt_num(eq.theta_b),
        points,
        cfg.output_dir.join("strategy_profile.csv").display()
    ))
}

fn estimate_cells(m: &MeanEstimate) -> [String; 2] {
    [fmt_num(m.mean), m.half_width_95.map(fmt_num).unwrap_or_default()]
}

fn pm(m: &MeanEstimate) -> String {
    match m.half_width_95 {
        Some(h) => format!("{} ± {}", fmt_num(m.mean), fmt_num(h)),
        None => format!("{} (half-width n/a)", fmt_num(m.mean)),
    }
}

pub fn simulate_cmd(cfg: &RunConfig) -> Result<String, CliError> {
    let sim = cfg.simulation.clone().ok_or_else(|| {
        CliError::Config("simulate needs a [simulation] block with n_rounds (or a preset that sets it)".into())
    })?;
    let eq = equilibrium(cfg)?;
    let mut runs: Vec<(&str, SimulationReport)> = Vec::new();
    let without = SimulationConfig {
        evidence: None,
        ..sim.clone()
    };
    runs.push(("without", simulate(&eq, &without).map_err(game_error)?));
    if let Some(model) = sim.evidence {
        let with = SimulationConfig {
            evidence: Some(model),
            ..sim.clone()
        };
        runs.push(("with", simulate(&eq, &with).map_err(game_error)?));
    }

    let header = [
        "evidence",
        "n_rounds",
        "seed",
        "shards",
        "mean_cost_receiver",
        "half_width_receiver",
        "mean_cost_sender",
        "half_width_sender",
        "mean_cost_action",
        "half_width_action",
        "mean_cost_deception",
        "half_width_deception",
        "fraction_pooled",
        "half_width_fraction_pooled",
    ];
    let rows = runs.iter().map(|(label, r)| {
        let mut row = vec![label.to_string(), r.n_rounds.to_string(), r.seed.to_string(), r.shards.to_string()];
        for m in [&r.cost_receiver, &r.cost_sender, &r.cost_action, &r.cost_deception, &r.fraction_pooled] {
            row.extend(estimate_cells(m));
        }
        row
    });
    write_file(&cfg.output_dir, "simulation_summary.csv", &csv_bytes(&header, rows)?)?;

    let pool_rows = runs.iter().flat_map(|(label, r)| {
        r.per_pool.iter().map(move |p| {
            let mut row = vec![label.to_string(), p.tag.to_string(), fmt_num(p.lo), fmt_num(p.hi), p.rounds.to_string()];
            row.extend(estimate_cells(&p.cost_receiver));
            row
        })
    });
    let pool_header = ["evidence", "tag", "lo", "hi", "rounds", "mean_cost_receiver", "half_width_receiver"];
    write_file(&cfg.output_dir, "simulation_pools.csv", &csv_bytes(&pool_header, pool_rows)?)?;

    for (label, r) in &runs {
        if let Some(trace) = &r.trace {
            let mut buf = Vec::new();
            write_trace_csv(trace, &mut buf).map_err(|e| CliError::Io(e.to_string()))?;
            write_file(&cfg.output_dir, &format!("trace_{label}_evidence.csv"), &buf)?;
        }
    }

    let mut out = String::new();
    let first = &runs[0].1;
    writeln!(out, "rng: {}", first.rng).ok();
    writeln!(out, "rounds: {}, seed: {}, shards: {}", first.n_rounds, first.seed, first.shards).ok();
    for (label, r) in &runs {
        writeln!(out, "[{label} evidence]").ok();
        writeln!(out, "  mean C^R = {}", pm(&r.cost_receiver)).ok();
        writeln!(out, "  mean C^S = {}", pm(&r.cost_sender)).ok();
        writeln!(out, "  fraction pooled = {}", pm(&r.fraction_pooled)).ok();
        for p in &r.per_pool {
            writeln!(out, "  pool [{}, {}]: mean C^R = {}", fmt_num(p.lo), fmt_num(p.hi), pm(&p.cost_receiver)).ok();
        }
    }
    if let [(_, without), (_, with)] = runs.as_slice() {
        let verdict = if with.cost_receiver.mean < without.cost_receiver.mean { "<" } else { ">=" };
        writeln!(
            out,
            "with-evidence mean C^R {} {verdict} without-evidence mean C^R {}",
            fmt_num(with.cost_receiver.mean),
            fmt_num(without.cost_receiver.mean)
        )
        .ok();
    }
    write_file(&cfg.output_dir, "simulation_report.txt", out.as_bytes())?;
    Ok(out)
}

pub fn verify(cfg: &RunConfig, grid: usize) -> Result<String, CliError> {
    check_grid(grid)?;
    let eq = equilibrium(cfg)?;
    let ver = verify_equilibrium(&eq, grid).map_err(game_error)?;
    let mut out = String::new();
    writeln!(out, "grid_n = {}", ver.grid_size).ok();
    let bounds: Vec<String> = eq.boundaries().iter().map(|b| fmt_num(*b)).collect();
    writeln!(out, "boundaries = {}", bounds.join(", ")).ok();
    writeln!(out, "max_sender_gain = {}", fmt_num(ver.max_sender_gain)).ok();
    writeln!(out, "worst_sender_state = {}", fmt_num(ver.worst_sender_state)).ok();
    writeln!(out, "max_receiver_gain = {}", fmt_num(ver.max_receiver_gain)).ok();
    writeln!(out, "passed = {}", ver.passed).ok();
    write_file(&cfg.output_dir, "verification.txt", out.as_bytes())?;
    if ver.passed {
        Ok(out)
    } else {
        Err(CliError::VerificationFailed(out))
    }
}
