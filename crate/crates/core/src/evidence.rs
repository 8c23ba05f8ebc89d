//! Evidence acquisition inside a pool.
//!
//! The receiver splits a pool at θ^c into the regions Θ⁰ = [lo, θ^c] and
//! Θ¹ = [θ^c, hi] and observes a binary signal e whose true positive rates are
//! x = γ(e=0 | Ψ⁰) and y = γ(e=1 | Ψ¹).
//!
//! Gains are reported as (cost without evidence) − (cost with evidence), so a
//! helpful detector has a positive gain. The reliability integrals are also
//! reported as written in the original formulation, where they come out
//! non-positive; see [`PoolGain`].

use crate::error::{GameError, Result};
use crate::prior::PriorDistribution;
use crate::slaph::{Pool, SlaphEquilibrium};

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidenceModel {
    /// γ(e = 0 | Ψ⁰)
    pub x: f64,
    /// γ(e = 1 | Ψ¹)
    pub y: f64,
}

impl EvidenceModel {
    pub fn new(x: f64, y: f64) -> Result<Self> {
        for (name, v) in [("x", x), ("y", y)] {
            if !(0.0..=1.0).contains(&v) {
                return Err(GameError::InvalidParams(format!("{name} = {v} must lie in [0, 1]")));
            }
        }
        Ok(Self { x, y })
    }

    /// γ(e | Ψ^region).
    pub fn likelihood(&self, e: Evidence, region: usize) -> f64 {
        match (region, e) {
            (0, Evidence::Zero) => self.x,
            (0, Evidence::One) => 1.0 - self.x,
            (_, Evidence::One) => self.y,
            (_, Evidence::Zero) => 1.0 - self.y,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash)]
pub enum Evidence {
    Zero,
    One,
}

impl Evidence {
    pub const ALL: [Evidence; 2] = [Evidence::Zero, Evidence::One];

    pub fn as_u8(self) -> u8 {
        match self {
            Evidence::Zero => 0,
            Evidence::One => 1,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EvidencePosterior {
    pub beta_0: f64,
    pub beta_1: f64,
}

/// P(Ψ^i): prior probability of investigation region `i` within the pool.
pub fn event_probability(pool: &Pool, i: usize, prior: &PriorDistribution) -> f64 {
    let m0 = prior.mass(pool.lo, pool.theta_c);
    let m1 = prior.mass(pool.theta_c, pool.hi);
    let p0 = m0 / (m0 + m1);
    if i == 0 {
        p0
    } else {
        1.0 - p0
    }
}

pub fn evidence_posterior(pool: &Pool, model: &EvidenceModel, e: Evidence, prior: &PriorDistribution) -> EvidencePosterior {
    let p0 = event_probability(pool, 0, prior);
    let p1 = 1.0 - p0;
    let w0 = model.likelihood(e, 0) * p0;
    let w1 = model.likelihood(e, 1) * p1;
    let denom = w0 + w1;
    if denom <= 0.0 {
        // the signal has probability zero; fall back to the prior
        return EvidencePosterior { beta_0: p0, beta_1: p1 };
    }
    let beta_0 = w0 / denom;
    EvidencePosterior {
        beta_0,
        beta_1: 1.0 - beta_0,
    }
}

/// Posterior-weighted conditional mean β₀â⁰ + β₁â¹.
pub fn receiver_action_with_evidence(pool: &Pool, posterior: &EvidencePosterior) -> f64 {
    posterior.beta_0 * pool.a_hat_0 + posterior.beta_1 * pool.a_hat_1
}

pub fn expected_receiver_cost_without_evidence(pool: &Pool, prior: &PriorDistribution) -> f64 {
    let (mean, var) = prior.conditional_moments(pool.lo, pool.hi);
    let bias = pool.a_bar - mean;
    bias * bias + var
}

pub fn expected_receiver_cost_with_evidence(pool: &Pool, model: &EvidenceModel, prior: &PriorDistribution) -> f64 {
    let regions = [(pool.lo, pool.theta_c), (pool.theta_c, pool.hi)];
    let moments = regions.map(|(a, b)| prior.conditional_moments(a, b));
    let probs = [event_probability(pool, 0, prior), event_probability(pool, 1, prior)];
    let mut total = 0.0;
    for e in Evidence::ALL {
        let action = receiver_action_with_evidence(pool, &evidence_posterior(pool, model, e, prior));
        for i in 0..2 {
            let joint = model.likelihood(e, i) * probs[i];
            if joint == 0.0 {
                continue;
            }
            let (mean, var) = moments[i];
            total += joint * ((action - mean) * (action - mean) + var);
        }
    }
    total
}

/// Expected reduction of the receiver's cost in this pool from acquiring
/// evidence.
pub fn pool_gain(pool: &Pool, model: &EvidenceModel, prior: &PriorDistribution) -> f64 {
    expected_receiver_cost_without_evidence(pool, prior) - expected_receiver_cost_with_evidence(pool, model, prior)
}

/// (δ⁰, δ¹) in their original orientation:
/// δ⁰ = ∫_{Θ⁰} (C^R(â⁰,θ) − C^R(â¹,θ)) f(θ) dθ and symmetrically for δ¹.
pub fn reliability_deltas(pool: &Pool, prior: &PriorDistribution) -> (f64, f64) {
    let (a0, a1) = (pool.a_hat_0, pool.a_hat_1);
    let diff = |own: f64, other: f64| move |t: f64| (own - t) * (own - t) - (other - t) * (other - t);
    let d0 = prior.integrate(pool.lo, pool.theta_c, diff(a0, a1));
    let d1 = prior.integrate(pool.theta_c, pool.hi, diff(a1, a0));
    (d0, d1)
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolGain {
    pub tag: u32,
    /// Cost without evidence minus cost with evidence.
    pub delta: f64,
    /// The same difference in the original (with − without) orientation.
    pub delta_printed: f64,
    /// Reliability integrals as originally written; never positive when the
    /// region actions are the region means.
    pub delta_0: f64,
    pub delta_1: f64,
    /// Sign-flipped reliability integrals: the benefit of acting on the
    /// correct region.
    pub delta_0_consistent: f64,
    pub delta_1_consistent: f64,
    pub cost_efficient: bool,
    pub reliable: bool,
    pub reliable_printed: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct GainReport {
    pub pools: Vec<PoolGain>,
    pub delta_total: f64,
}

pub fn total_gain(eq: &SlaphEquilibrium, model: &EvidenceModel) -> GainReport {
    let prior = &eq.params.prior;
    let pools: Vec<PoolGain> = eq
        .pools
        .iter()
        .map(|pool| {
            let m = pool.evidence.unwrap_or(*model);
            let delta = pool_gain(pool, &m, prior);
            let (d0, d1) = reliability_deltas(pool, prior);
            PoolGain {
                tag: pool.tag,
                delta,
                delta_printed: -delta,
                delta_0: d0,
                delta_1: d1,
                delta_0_consistent: -d0,
                delta_1_consistent: -d1,
                cost_efficient: delta >= 0.0,
                reliable: -d0 >= 0.0 && -d1 >= 0.0,
                reliable_printed: d0 >= 0.0 && d1 >= 0.0,
            }
        })
        .collect();
    let delta_total = pools.iter().map(|g| g.delta).sum();
    GainReport { pools, delta_total }
}

/// E[C^R] over the whole game at equilibrium: zero on the separating
/// segment, pool-wise expectations above θ_B.
pub fn expected_receiver_cost(eq: &SlaphEquilibrium, model: Option<&EvidenceModel>) -> f64 {
    let prior = &eq.params.prior;
    eq.pools
        .iter()
        .map(|pool| {
            let weight = prior.mass(pool.lo, pool.hi);
            let cost = match pool.evidence.as_ref().or(model) {
                Some(m) => expected_receiver_cost_with_evidence(pool, m, prior),
                None => expected_receiver_cost_without_evidence(pool, prior),
            };
            weight * cost
        })
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::game::GameParams;
    use crate::slaph::build_slaph;
    use proptest::prelude::*;

    fn unit() -> GameParams {
        GameParams::uniform(0.0, 1.0, 0.125, 1.0 / 64.0).unwrap()
    }

    fn pool(lo: f64, hi: f64) -> Pool {
        Pool::new(lo, hi, 0, &unit()).unwrap()
    }

    #[test]
    fn event_probability_examples() {
        let p = unit();
        assert_eq!(event_probability(&pool(0.25, 1.0), 0, &p.prior), 0.5);
        let skew = Pool::with_split(0.0, 1.0, 0.25, 0, &p).unwrap();
        assert!((event_probability(&skew, 0, &p.prior) - 0.25).abs() < 1e-15);
        let s = event_probability(&skew, 0, &p.prior) + event_probability(&skew, 1, &p.prior);
        assert!((s - 1.0).abs() < 1e-15);
    }

    #[test]
    fn posterior_examples() {
        let p = unit();
        let q = pool(0.25, 1.0);
        let post = evidence_posterior(&q, &EvidenceModel::new(0.9, 0.9).unwrap(), Evidence::Zero, &p.prior);
        assert!((post.beta_0 - 0.9).abs() < 1e-12);
        let flat = evidence_posterior(&q, &EvidenceModel::new(0.5, 0.5).unwrap(), Evidence::One, &p.prior);
        assert!((flat.beta_0 - 0.5).abs() < 1e-15);
        let perfect = evidence_posterior(&q, &EvidenceModel::new(1.0, 1.0).unwrap(), Evidence::One, &p.prior);
        assert_eq!(perfect.beta_1, 1.0);
    }

    #[test]
    fn zero_probability_signal_returns_prior() {
        let p = unit();
        let q = Pool::with_split(0.0, 1.0, 0.3, 0, &p).unwrap();
        let post = evidence_posterior(&q, &EvidenceModel::new(0.0, 1.0).unwrap(), Evidence::Zero, &p.prior);
        assert!((post.beta_0 - 0.3).abs() < 1e-15);
    }

    #[test]
    fn evidence_action_examples() {
        let p = unit();
        let q = pool(0.0, 0.25);
        let perfect = EvidenceModel::new(1.0, 1.0).unwrap();
        let a0 = receiver_action_with_evidence(&q, &evidence_posterior(&q, &perfect, Evidence::Zero, &p.prior));
        let a1 = receiver_action_with_evidence(&q, &evidence_posterior(&q, &perfect, Evidence::One, &p.prior));
        assert_eq!(a0, 1.0 / 16.0);
        assert_eq!(a1, 3.0 / 16.0);
        let q = pool(0.25, 1.0);
        let m = EvidenceModel::new(0.9, 0.9).unwrap();
        let a = receiver_action_with_evidence(&q, &evidence_posterior(&q, &m, Evidence::Zero, &p.prior));
        assert!((a - 0.475).abs() < 1e-12);
    }

    #[test]
    fn cost_without_evidence_examples() {
        let p = unit();
        assert!((expected_receiver_cost_without_evidence(&pool(0.25, 1.0), &p.prior) - 0.046875).abs() < 1e-15);
        assert!((expected_receiver_cost_without_evidence(&pool(0.0, 0.25), &p.prior) - 1.0 / 192.0).abs() < 1e-15);
    }

    #[test]
    fn cost_with_evidence_examples() {
        let p = unit();
        let q = pool(0.25, 1.0);
        // hand expansion: 2 [0.45 (0.0375² + 0.375²/12) + 0.05 (0.3375² + 0.375²/12)]
        let c = expected_receiver_cost_with_evidence(&q, &EvidenceModel::new(0.9, 0.9).unwrap(), &p.prior);
        assert!((c - 0.024375).abs() < 1e-12, "{c}");
        let c = expected_receiver_cost_with_evidence(&q, &EvidenceModel::new(0.5, 0.5).unwrap(), &p.prior);
        assert!((c - 0.046875).abs() < 1e-12);
        let c = expected_receiver_cost_with_evidence(&q, &EvidenceModel::new(1.0, 1.0).unwrap(), &p.prior);
        assert!((c - 0.375 * 0.375 / 12.0).abs() < 1e-12);
    }

    #[test]
    fn gain_examples() {
        let p = unit();
        let q = pool(0.25, 1.0);
        assert!((pool_gain(&q, &EvidenceModel::new(0.9, 0.9).unwrap(), &p.prior) - 0.0225).abs() < 1e-12);
        assert!(pool_gain(&q, &EvidenceModel::new(0.5, 0.5).unwrap(), &p.prior).abs() < 1e-15);
    }

    #[test]
    fn perfect_detector_gain_is_between_region_variance() {
        let prior = PriorDistribution::truncated_normal(0.0, 1.0, 0.4, 0.3).unwrap();
        let p = GameParams::new(0.0, 1.0, 0.1, 0.1, prior).unwrap();
        for (lo, hi, c) in [(0.0, 1.0, 0.4), (0.2, 0.9, 0.7), (0.5, 1.0, 0.6)] {
            let q = Pool::with_split(lo, hi, c, 0, &p).unwrap();
            let gain = pool_gain(&q, &EvidenceModel::new(1.0, 1.0).unwrap(), &p.prior);
            let (_, var) = p.prior.conditional_moments(lo, hi);
            let (_, v0) = p.prior.conditional_moments(lo, c);
            let (_, v1) = p.prior.conditional_moments(c, hi);
            let within = q.p_psi_0 * v0 + q.p_psi_1 * v1;
            assert!((gain - (var - within)).abs() < 1e-8);
            assert!(gain > 0.0);
        }
    }

    #[test]
    fn reliability_examples() {
        let p = unit();
        let (d0, d1) = reliability_deltas(&pool(0.0, 0.25), &p.prior);
        assert!((d0 + 1.0 / 512.0).abs() < 1e-15, "{d0}");
        assert!((d0 - d1).abs() < 1e-15);
        let mut q = pool(0.0, 0.25);
        q.a_hat_1 = q.a_hat_0;
        assert_eq!(reliability_deltas(&q, &p.prior), (0.0, 0.0));
    }

    #[test]
    fn total_gain_examples() {
        let eq = build_slaph(&unit()).unwrap();
        let rep = total_gain(&eq, &EvidenceModel::new(0.9, 0.9).unwrap());
        assert_eq!(rep.pools.len(), 2);
        assert!(rep.pools.iter().all(|g| g.delta > 0.0 && g.cost_efficient && g.reliable && !g.reliable_printed));
        let sum: f64 = rep.pools.iter().map(|g| g.delta).sum();
        assert_eq!(rep.delta_total, sum);
        let flat = total_gain(&eq, &EvidenceModel::new(0.5, 0.5).unwrap());
        assert!(flat.delta_total.abs() < 1e-15);

        let single = build_slaph(&GameParams::uniform(0.0, 1.0, 0.25, 0.1).unwrap()).unwrap();
        assert_eq!(single.pools.len(), 1);
        let r = total_gain(&single, &EvidenceModel::new(0.8, 0.7).unwrap());
        assert_eq!(r.delta_total, r.pools[0].delta);
    }

    #[test]
    fn value_of_information_is_monotone() {
        let p = unit();
        let q = pool(0.25, 1.0);
        let n = 20;
        let rate = |i: usize| 0.5 + 0.5 * i as f64 / (n - 1) as f64;
        for i in 0..n {
            for j in 0..n {
                let g = pool_gain(&q, &EvidenceModel::new(rate(i), rate(j)).unwrap(), &p.prior);
                if i + 1 < n {
                    let gx = pool_gain(&q, &EvidenceModel::new(rate(i + 1), rate(j)).unwrap(), &p.prior);
                    assert!(gx >= g - 1e-15);
                }
                if j + 1 < n {
                    let gy = pool_gain(&q, &EvidenceModel::new(rate(i), rate(j + 1)).unwrap(), &p.prior);
                    assert!(gy >= g - 1e-15);
                }
            }
        }
    }

    proptest! {
        #[test]
        fn posterior_normalized(x in 0.0..=1.0f64, y in 0.0..=1.0f64, c in 0.05..0.95f64,
                                mean in 0.0..1.0f64, e in any::<bool>()) {
            let prior = PriorDistribution::truncated_normal(0.0, 1.0, mean, 0.4).unwrap();
            let p = GameParams::new(0.0, 1.0, 0.1, 0.1, prior).unwrap();
            let q = Pool::with_split(0.0, 1.0, c, 0, &p).unwrap();
            let ev = if e { Evidence::One } else { Evidence::Zero };
            let post = evidence_posterior(&q, &EvidenceModel::new(x, y).unwrap(), ev, &p.prior);
            prop_assert!((post.beta_0 + post.beta_1 - 1.0).abs() < 1e-12);
            prop_assert!((0.0..=1.0).contains(&post.beta_0) && (0.0..=1.0).contains(&post.beta_1));
            let a = receiver_action_with_evidence(&q, &post);
            prop_assert!(a >= q.a_hat_0 - 1e-12 && a <= q.a_hat_1 + 1e-12);
        }
    }
}
