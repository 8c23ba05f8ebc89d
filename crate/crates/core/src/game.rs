//! Game primitives: parameters, messages, the quadratic cost family and the
//! receiver's pooled best response.

use crate::error::{GameError, Result};
use crate::prior::PriorDistribution;

/// Relative width below which an interval counts as degenerate.
pub const DEGENERATE_WIDTH: f64 = 1e-9;

/// Tag carried by every message on the separating segment.
pub const SEPARATING_TAG: u32 = u32::MAX;

#[derive(Debug, Clone)]
pub struct GameParams {
    pub theta_min: f64,
    pub theta_max: f64,
    /// Conflict of interest: the sender wants the action θ + b.
    pub b: f64,
    /// Weight on the misreporting cost.
    pub k: f64,
    pub prior: PriorDistribution,
}

impl GameParams {
    pub fn new(theta_min: f64, theta_max: f64, b: f64, k: f64, prior: PriorDistribution) -> Result<Self> {
        if !(theta_min.is_finite() && theta_max.is_finite()) || theta_min >= theta_max {
            return Err(GameError::InvalidParams(format!(
                "state interval [{theta_min}, {theta_max}] must be finite with theta_min < theta_max"
            )));
        }
        if !(b.is_finite() && b > 0.0) {
            return Err(GameError::InvalidParams(format!("b must be > 0 (got {b})")));
        }
        if !(k.is_finite() && k >= 0.0) {
            return Err(GameError::InvalidParams(format!("k must be >= 0 (got {k})")));
        }
        let (lo, hi) = prior.support();
        if lo != theta_min || hi != theta_max {
            return Err(GameError::InvalidParams(format!(
                "prior support [{lo}, {hi}] differs from the state interval [{theta_min}, {theta_max}]"
            )));
        }
        Ok(Self {
            theta_min,
            theta_max,
            b,
            k,
            prior,
        })
    }

    pub fn uniform(theta_min: f64, theta_max: f64, b: f64, k: f64) -> Result<Self> {
        let prior = PriorDistribution::uniform(theta_min, theta_max)?;
        Self::new(theta_min, theta_max, b, k, prior)
    }

    pub fn width(&self) -> f64 {
        self.theta_max - self.theta_min
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.theta_min && theta <= self.theta_max
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Message {
    /// The state value the message claims.
    pub report: f64,
    pub tag: u32,
}

impl Message {
    pub fn separating(report: f64) -> Self {
        Self {
            report,
            tag: SEPARATING_TAG,
        }
    }

    pub fn pooled(report: f64, tag: u32) -> Self {
        Self { report, tag }
    }

    pub fn is_separating(&self) -> bool {
        self.tag == SEPARATING_TAG
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct CostBreakdown {
    pub c_action: f64,
    pub c_deception: f64,
    pub c_sender_total: f64,
    pub c_receiver: f64,
}

impl CostBreakdown {
    pub fn evaluate(action: f64, theta: f64, report: f64, params: &GameParams) -> Self {
        let c_action = cost_action(action, theta, params.b);
        let c_deception = cost_deception(report, theta);
        Self {
            c_action,
            c_deception,
            c_sender_total: c_action + params.k * c_deception,
            c_receiver: cost_receiver(action, theta),
        }
    }
}

/// Sender's action cost (a − θ − b)².
pub fn cost_action(a: f64, theta: f64, b: f64) -> f64 {
    let d = a - theta - b;
    d * d
}

/// Misreporting cost (r − θ)².
pub fn cost_deception(r: f64, theta: f64) -> f64 {
    let d = r - theta;
    d * d
}

pub fn cost_sender(a: f64, theta: f64, r: f64, params: &GameParams) -> f64 {
    cost_action(a, theta, params.b) + params.k * cost_deception(r, theta)
}

pub fn cost_receiver(a: f64, theta: f64) -> f64 {
    let d = a - theta;
    d * d
}

pub(crate) fn check_interval(lo: f64, hi: f64, prior: &PriorDistribution) -> Result<()> {
    let (pmin, pmax) = prior.support();
    let slack = 1e-12 * (pmax - pmin);
    if lo.is_nan() || hi.is_nan() || lo >= hi || hi - lo < DEGENERATE_WIDTH * (pmax - pmin) {
        return Err(GameError::DegenerateInterval { lo, hi });
    }
    if lo < pmin - slack || hi > pmax + slack {
        return Err(GameError::OutOfRange {
            what: "interval",
            value: if lo < pmin { lo } else { hi },
            lo: pmin,
            hi: pmax,
        });
    }
    Ok(())
}

/// The receiver's best response to the belief "θ is somewhere in [lo, hi]":
/// the prior mean of θ conditional on that interval.
pub fn pooled_action(lo: f64, hi: f64, prior: &PriorDistribution) -> Result<f64> {
    check_interval(lo, hi, prior)?;
    Ok(prior.conditional_moments(lo, hi).0)
}

/// True when inducing `a_hat` costs the sender strictly more than being
/// believed truthfully.
pub fn nitd_holds(a_hat: f64, theta: f64, b: f64) -> bool {
    cost_action(a_hat, theta, b) > cost_action(theta, theta, b)
}
