//! Browser bindings. Every export takes plain numbers and returns a JSON
//! string; failures come back as `{"error": "..."}`.

use deception_core::sim::fmt_num;
use deception_core::{
    build_slaph, cutoff_state, sender_equilibrium_strategy, total_gain, verify_equilibrium, EvidenceModel, GameError,
    GameParams,
};
use serde_json::{json, Value};
use wasm_bindgen::prelude::wasm_bindgen;

const DEMO_GRID: usize = 256;
const MAX_POINTS: usize = 2000;

fn err(e: impl std::fmt::Display) -> Value {
    json!({ "error": e.to_string() })
}

fn points(n: usize) -> Result<usize, GameError> {
    if (2..=MAX_POINTS).contains(&n) {
        Ok(n)
    } else {
        Err(GameError::InvalidParams(format!("points must lie in [2, {MAX_POINTS}], got {n}")))
    }
}

/// θ̂ against k/b on a log grid, for states on [0, 1].
pub fn cutoff_curve_value(b: f64, kb_min: f64, kb_max: f64, n: usize) -> Value {
    let run = || -> Result<Value, GameError> {
        let n = points(n)?;
        if !(kb_min > 0.0 && kb_min < kb_max && kb_max.is_finite()) {
            return Err(GameError::InvalidParams("need 0 < kb_min < kb_max".into()));
        }
        let rows = (0..n)
            .map(|i| {
                let r = kb_min * (kb_max / kb_min).powf(i as f64 / (n - 1) as f64);
                let hat = cutoff_state(&GameParams::uniform(0.0, 1.0, b, r * b)?, 0.0)?;
                Ok(json!([r, hat]))
            })
            .collect::<Result<Vec<_>, GameError>>()?;
        Ok(json!({ "b": b, "rows": rows }))
    };
    run().unwrap_or_else(err)
}

/// Equilibrium report σ(θ) on an even grid of [0, 1].
pub fn strategy_profile_value(b: f64, k: f64, n: usize) -> Value {
    let run = || -> Result<Value, GameError> {
        let n = points(n)?;
        let eq = build_slaph(&GameParams::uniform(0.0, 1.0, b, k)?)?;
        let rows = (0..n)
            .map(|i| {
                let theta = i as f64 / (n - 1) as f64;
                let m = sender_equilibrium_strategy(&eq, theta)?;
                Ok(json!([theta, m.report, m.is_separating()]))
            })
            .collect::<Result<Vec<_>, GameError>>()?;
        Ok(json!({ "theta_hat": eq.theta_hat(), "theta_b": eq.theta_b, "rows": rows }))
    };
    run().unwrap_or_else(err)
}

/// Full solve with evidence gains and a verification pass.
pub fn solve_game_value(b: f64, k: f64, x: f64, y: f64) -> Value {
    let run = || -> Result<Value, GameError> {
        let eq = build_slaph(&GameParams::uniform(0.0, 1.0, b, k)?)?;
        let model = EvidenceModel::new(x, y)?;
        let gains = total_gain(&eq, &model);
        let ver = verify_equilibrium(&eq, DEMO_GRID)?;
        let pools: Vec<Value> = eq
            .pools
            .iter()
            .zip(&gains.pools)
            .map(|(p, g)| {
                json!({
                    "lo": p.lo, "hi": p.hi, "a_bar": p.a_bar,
                    "a_hat_0": p.a_hat_0, "a_hat_1": p.a_hat_1, "gain": g.delta,
                })
            })
            .collect();
        Ok(json!({
            "theta_hat": eq.theta_hat(),
            "theta_b": eq.theta_b,
            "pools": pools,
            "delta_total": gains.delta_total,
            "verification": {
                "passed": ver.passed,
                "max_sender_gain": fmt_num(ver.max_sender_gain),
                "grid_n": ver.grid_size,
            },
        }))
    };
    run().unwrap_or_else(err)
}

#[wasm_bindgen]
pub fn cutoff_curve(b: f64, kb_min: f64, kb_max: f64, n: usize) -> String {
    cutoff_curve_value(b, kb_min, kb_max, n).to_string()
}

#[wasm_bindgen]
pub fn strategy_profile(b: f64, k: f64, n: usize) -> String {
    strategy_profile_value(b, k, n).to_string()
}

#[wasm_bindgen]
pub fn solve_game(b: f64, k: f64, x: f64, y: f64) -> String {
    solve_game_value(b, k, x, y).to_string()
}
