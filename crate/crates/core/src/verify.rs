//! Deviation search over a state grid.
//!
//! For each sampled sender type, the equilibrium message is compared with every
//! pool message and a grid of separating-tag reports, each evaluated at the
//! receiver's equilibrium response (off-path messages included). For each
//! on-path message the receiver's action is compared with a grid of
//! alternatives under the equilibrium belief. Evidence is not drawn here.

use crate::error::{GameError, Result};
use crate::game::{cost_receiver, cost_sender, Message};
use crate::slaph::{receiver_equilibrium_action, sender_equilibrium_strategy, SlaphEquilibrium};

pub const GAIN_TOLERANCE: f64 = 1e-6;
pub const MIN_GRID: usize = 100;

#[derive(Debug, Clone, PartialEq)]
pub struct VerificationReport {
    pub max_sender_gain: f64,
    /// The sender type attaining `max_sender_gain`.
    pub worst_sender_state: f64,
    pub max_receiver_gain: f64,
    pub grid_size: usize,
    pub passed: bool,
}

fn grid(lo: f64, hi: f64, n: usize) -> impl Iterator<Item = f64> + Clone {
    (0..n).map(move |i| lo + (hi - lo) * i as f64 / (n - 1) as f64)
}

pub fn verify_equilibrium(eq: &SlaphEquilibrium, grid_n: usize) -> Result<VerificationReport> {
    if grid_n < MIN_GRID {
        return Err(GameError::InvalidParams(format!(
            "grid too coarse: grid_n = {grid_n} < {MIN_GRID}"
        )));
    }
    let p = &eq.params;

    // Every deviation is (report, action); actions do not depend on the type.
    let mut deviations: Vec<(f64, f64)> = eq
        .pools
        .iter()
        .map(|pool| {
            let m = Message::pooled(eq.pooled_report, pool.tag);
            (m.report, receiver_equilibrium_action(eq, &m, None))
        })
        .collect();
    deviations.extend(grid(p.theta_min, p.theta_max, grid_n).map(|r| {
        let m = Message::separating(r);
        (r, receiver_equilibrium_action(eq, &m, None))
    }));

    let sender_gain = |theta: f64| -> Result<f64> {
        let msg = sender_equilibrium_strategy(eq, theta)?;
        let action = receiver_equilibrium_action(eq, &msg, None);
        let on_path = cost_sender(action, theta, msg.report, p);
        let best = deviations
            .iter()
            .map(|&(r, a)| cost_sender(a, theta, r, p))
            .fold(f64::INFINITY, f64::min);
        Ok(on_path - best)
    };

    let states: Vec<f64> = grid(p.theta_min, p.theta_max, grid_n).collect();
    #[cfg(feature = "parallel")]
    let gains: Vec<Result<f64>> = {
        use rayon::prelude::*;
        states.par_iter().map(|&t| sender_gain(t)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let gains: Vec<Result<f64>> = states.iter().map(|&t| sender_gain(t)).collect();

    let mut max_sender_gain = f64::NEG_INFINITY;
    let mut worst_sender_state = p.theta_min;
    for (t, g) in states.iter().zip(gains) {
        let g = g?;
        if g > max_sender_gain {
            max_sender_gain = g;
            worst_sender_state = *t;
        }
    }
    let max_sender_gain = max_sender_gain.max(0.0);

    // Receiver: pooled messages carry the prior truncated to the pool.
    let prior = &p.prior;
    let alternatives: Vec<f64> = grid(p.theta_min, p.theta_max, grid_n).collect();
    let mut max_receiver_gain: f64 = 0.0;
    for pool in &eq.pools {
        let (mean, var) = prior.conditional_moments(pool.lo, pool.hi);
        let loss = |a: f64| (a - mean) * (a - mean) + var;
        let best = alternatives.iter().copied().chain([mean]).map(loss).fold(f64::INFINITY, f64::min);
        max_receiver_gain = max_receiver_gain.max(loss(pool.a_bar) - best);
    }
    // Separating messages carry a point belief on σ⁻¹(r).
    if eq.theta_b > p.theta_min {
        for theta in grid(p.theta_min, eq.theta_b, grid_n).take(grid_n - 1) {
            let msg = sender_equilibrium_strategy(eq, theta)?;
            let a = receiver_equilibrium_action(eq, &msg, None);
            let believed = eq.separating.invert(msg.report)?;
            let best = alternatives
                .iter()
                .copied()
                .chain([believed])
                .map(|alt| cost_receiver(alt, believed))
                .fold(f64::INFINITY, f64::min);
            max_receiver_gain = max_receiver_gain.max(cost_receiver(a, believed) - best);
        }
    }

    Ok(VerificationReport {
        max_sender_gain,
        worst_sender_state,
        max_receiver_gain,
        grid_size: grid_n,
        passed: max_sender_gain <= GAIN_TOLERANCE && max_receiver_gain <= GAIN_TOLERANCE,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameParams;
    use crate::slaph::build_slaph;

    fn fig4() -> SlaphEquilibrium {
        build_slaph(&GameParams::uniform(0.0, 1.0, 0.125, 1.0 / 64.0).unwrap()).unwrap()
    }

    #[test]
    fn fig4_passes() {
        let rep = verify_equilibrium(&fig4(), 512).unwrap();
        assert!(rep.passed, "{rep:?}");
        assert!(rep.max_sender_gain <= 1e-6);
        assert_eq!(rep.grid_size, 512);
    }

    #[test]
    fn halved_partition_fails() {
        let eq = fig4();
        let bad = SlaphEquilibrium::from_boundaries(&eq.params, &[0.0, 0.5, 1.0]).unwrap();
        let rep = verify_equilibrium(&bad, 512).unwrap();
        assert!(!rep.passed);
        assert!(rep.max_sender_gain > 1e-3);
    }

    #[test]
    fn perturbed_receiver_fails() {
        let mut eq = fig4();
        eq.pools[0].a_bar += 0.05;
        let rep = verify_equilibrium(&eq, 512).unwrap();
        assert!(rep.max_receiver_gain > 0.0);
        assert!((rep.max_receiver_gain - 0.0025).abs() < 1e-12);
        assert!(!rep.passed);
    }

    #[test]
    fn coarse_grid_rejected() {
        assert!(verify_equilibrium(&fig4(), 10).is_err());
    }

    #[test]
    fn interior_boundary_equilibrium_passes() {
        let eq = build_slaph(&GameParams::uniform(0.0, 1.0, 0.125, 0.1).unwrap()).unwrap();
        let rep = verify_equilibrium(&eq, 256).unwrap();
        assert!(rep.passed, "{rep:?}");
    }
}
