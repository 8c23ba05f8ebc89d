//! The fully revealing segment of the sender's strategy.
//!
//! On a separating segment the sender's report σ(θ) solves
//! `σ'(θ) = b / (k (σ(θ) − θ))` with σ(θ_s) = θ_s. The right-hand side is
//! singular at the start, so the first step uses the local expansion
//! `σ − θ ≈ sqrt(2 (b/k) h) − 2h/3` and the rest is fixed-spacing RK4 on the
//! gap u = σ − θ, graded near the start. Integration stops where σ reaches
//! θ̄; that state is the cutoff θ̂.
//!
//! Internally the state interval is mapped affinely onto [0, 1].

use crate::error::{GameError, Result};
use crate::game::GameParams;

/// Upper bound on the grid spacing, relative to the state interval.
pub const MAX_STEP: f64 = 1e-4;
/// Length of the initial expansion step, relative to the state interval.
pub const START_STEP: f64 = 1e-6;
const INVERT_TOL: f64 = 1e-10;

/// dσ/dθ on a separating segment.
pub fn separating_ode_rhs(theta: f64, sigma: f64, b: f64, k: f64) -> Result<f64> {
    if k <= 0.0 {
        return Err(GameError::CheapTalkRegime);
    }
    let gap = sigma - theta;
    if gap.abs() < 1e-14 {
        return Err(GameError::Singular { theta });
    }
    Ok(b / (k * gap))
}

/// Residual of the closed-form relation satisfied by the separating strategy
/// started at σ(0) = 0 on the unit interval:
/// `exp(−(k/b)σ) + (k/b)(σ − θ) − 1`.
pub fn implicit_residual(sigma: f64, theta: f64, b: f64, k: f64) -> f64 {
    let c = k / b;
    (-c * sigma).exp_m1() + c * (sigma - theta)
}

#[derive(Debug, Clone)]
pub struct SeparatingSolution {
    theta_start: f64,
    theta_cutoff: f64,
    theta_max: f64,
    /// b / k in state units.
    scale: f64,
    grid: Vec<(f64, f64)>,
    slopes: Vec<f64>,
}

/// One step of the gap dynamics u' = c/u − 1 (unit interval, c = b/(kL)).
fn rk4_gap(u: f64, h: f64, c: f64) -> f64 {
    let f = |u: f64| c / u - 1.0;
    let k1 = f(u);
    let k2 = f(u + 0.5 * h * k1);
    let k3 = f(u + 0.5 * h * k2);
    let k4 = f(u + h * k3);
    u + h * (k1 + 2.0 * k2 + 2.0 * k3 + k4) / 6.0
}

fn expansion_gap(h: f64, c: f64) -> f64 {
    (2.0 * c * h).sqrt() - 2.0 * h / 3.0
}

/// Largest h in (0, h_max] with s + h + step(h) <= 1, solved by bisection on
/// the step length so the last node lands on σ = 1.
fn landing_step<F: Fn(f64) -> f64>(s: f64, h_max: f64, step: F) -> f64 {
    let (mut lo, mut hi) = (0.0, h_max);
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if s + mid + step(mid) < 1.0 {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-17 {
            break;
        }
    }
    hi
}

pub fn solve_separating(params: &GameParams, theta_start: f64) -> Result<SeparatingSolution> {
    if params.k == 0.0 {
        return Err(GameError::CheapTalkRegime);
    }
    if !(theta_start >= params.theta_min && theta_start < params.theta_max) {
        return Err(GameError::OutOfRange {
            what: "theta_start",
            value: theta_start,
            lo: params.theta_min,
            hi: params.theta_max,
        });
    }
    let lo = params.theta_min;
    let len = params.width();
    let c = params.b / (params.k * len);
    let s0 = (theta_start - lo) / len;

    // (s, u) nodes on the unit interval
    let mut nodes: Vec<(f64, f64)> = vec![(s0, 0.0)];
    let first = |h: f64| expansion_gap(h, c);
    if s0 + START_STEP + first(START_STEP) >= 1.0 {
        let h = landing_step(s0, START_STEP, first);
        nodes.push((s0 + h, 1.0 - s0 - h));
    } else {
        let mut s = s0 + START_STEP;
        let mut u = first(START_STEP);
        nodes.push((s, u));
        loop {
            // grade the step on the local time scale u²/c of the gap dynamics
            let h = MAX_STEP.min(0.1 * u * u / c).min(1.0 - s);
            let next = rk4_gap(u, h, c);
            if s + h + next >= 1.0 {
                let hl = landing_step(s, h, |hh| rk4_gap(u, hh, c));
                let sl = s + hl;
                nodes.push((sl, 1.0 - sl));
                break;
            }
            s += h;
            u = next;
            nodes.push((s, u));
        }
    }

    let scale = params.b / params.k;
    let mut grid = Vec::with_capacity(nodes.len());
    let mut slopes = Vec::with_capacity(nodes.len());
    for (i, &(s, u)) in nodes.iter().enumerate() {
        let theta = lo + len * s;
        let sigma = if i + 1 == nodes.len() {
            params.theta_max
        } else {
            lo + len * (s + u)
        };
        grid.push((theta, sigma));
        slopes.push(if i == 0 { f64::INFINITY } else { c / u });
    }
    let theta_cutoff = grid.last().unwrap().0;
    Ok(SeparatingSolution {
        theta_start,
        theta_cutoff,
        theta_max: params.theta_max,
        scale,
        grid,
        slopes,
    })
}

impl SeparatingSolution {
    pub fn theta_start(&self) -> f64 {
        self.theta_start
    }

    pub fn theta_cutoff(&self) -> f64 {
        self.theta_cutoff
    }

    pub fn grid(&self) -> &[(f64, f64)] {
        &self.grid
    }

    /// σ(θ) on [θ_s, θ̂]; monotone cubic Hermite through the grid with the ODE
    /// slopes, and the start expansion on the first interval.
    pub fn eval(&self, theta: f64) -> Result<f64> {
        let tol = 1e-12 * (self.theta_max - self.theta_start).max(1.0);
        if theta < self.theta_start - tol || theta > self.theta_cutoff + tol {
            return Err(GameError::OutOfRange {
                what: "theta",
                value: theta,
                lo: self.theta_start,
                hi: self.theta_cutoff,
            });
        }
        let theta = theta.clamp(self.theta_start, self.theta_cutoff);
        Ok(self.eval_clamped(theta))
    }

    fn eval_clamped(&self, theta: f64) -> f64 {
        let g = &self.grid;
        let i = g.partition_point(|&(t, _)| t <= theta).clamp(1, g.len() - 1) - 1;
        let (t0, y0) = g[i];
        let (t1, y1) = g[i + 1];
        if i == 0 {
            let h = theta - t0;
            if h <= 0.0 {
                return y0;
            }
            return (t0 + (2.0 * self.scale * h).sqrt() + h / 3.0).min(y1);
        }
        let dt = t1 - t0;
        if dt <= 0.0 {
            return y1;
        }
        let secant = (y1 - y0) / dt;
        let (mut m0, mut m1) = (self.slopes[i], self.slopes[i + 1]);
        if secant > 0.0 {
            let (a, b) = (m0 / secant, m1 / secant);
            let r = a * a + b * b;
            if r > 9.0 {
                let tau = 3.0 / r.sqrt();
                m0 *= tau;
                m1 *= tau;
            }
        }
        let x = (theta - t0) / dt;
        let x2 = x * x;
        let x3 = x2 * x;
        let h00 = 2.0 * x3 - 3.0 * x2 + 1.0;
        let h10 = x3 - 2.0 * x2 + x;
        let h01 = -2.0 * x3 + 3.0 * x2;
        let h11 = x3 - x2;
        h00 * y0 + h10 * dt * m0 + h01 * y1 + h11 * dt * m1
    }

    /// dσ/dθ at a grid-interior state.
    pub fn slope(&self, theta: f64) -> Result<f64> {
        let sigma = self.eval(theta)?;
        separating_ode_rhs(theta, sigma, self.scale, 1.0)
    }

    /// The state whose separating report is `report`.
    pub fn invert(&self, report: f64) -> Result<f64> {
        let tol = 1e-12 * (self.theta_max - self.theta_start).max(1.0);
        if report < self.theta_start - tol || report > self.theta_max + tol {
            return Err(GameError::OutOfRange {
                what: "report",
                value: report,
                lo: self.theta_start,
                hi: self.theta_max,
            });
        }
        let report = report.clamp(self.theta_start, self.theta_max);
        let g = &self.grid;
        let j = g.partition_point(|&(_, s)| s < report);
        if j == 0 {
            return Ok(g[0].0);
        }
        if j >= g.len() {
            return Ok(self.theta_cutoff);
        }
        let (mut a, mut b) = (g[j - 1].0, g[j].0);
        while b - a > INVERT_TOL * 1e-2 {
            let mid = 0.5 * (a + b);
            if self.eval_clamped(mid) < report {
                a = mid;
            } else {
                b = mid;
            }
        }
        Ok(0.5 * (a + b))
    }
}

/// Free-function form of [`SeparatingSolution::invert`].
pub fn invert_strategy(sol: &SeparatingSolution, report: f64) -> Result<f64> {
    sol.invert(report)
}

/// The state θ̂ at which the separating report started at `theta_start`
/// reaches θ̄.
pub fn cutoff_state(params: &GameParams, theta_start: f64) -> Result<f64> {
    if params.k == 0.0 {
        return Err(GameError::CheapTalkRegime);
    }
    if theta_start == params.theta_min {
        // θ(σ) = σ − (b/k)(1 − exp(−(k/b)(σ − θ_s))) evaluated at σ = θ̄
        let scale = params.b / params.k;
        let span = params.width();
        let hat = params.theta_max + scale * (-span / scale).exp_m1();
        return Ok(hat.clamp(params.theta_min, params.theta_max));
    }
    Ok(solve_separating(params, theta_start)?.theta_cutoff())
}
