//! SLAPH equilibria: separating in low states, pooling in high states.
//!
//! Types below the boundary θ_B report along the separating strategy. Types in
//! [θ_B, θ̄] all report θ̄ but use a distinct message tag per pool, so the
//! receiver learns which pool θ lies in. Adjacent pools must leave the link
//! type indifferent between the two pooled actions, and the boundary type must
//! be indifferent between separating and joining the first pool (or, when
//! θ_B = θ̲, weakly prefer pooling).

use crate::error::{GameError, Result};
use crate::evidence::{receiver_action_with_evidence, evidence_posterior, EvidenceModel, Evidence};
use crate::game::{check_interval, cost_action, cost_sender, pooled_action, GameParams, Message, SEPARATING_TAG};
use crate::prior::PriorKind;
use crate::separating::{solve_separating, SeparatingSolution};

/// Hard cap on the number of pools.
pub const MAX_POOLS: usize = 64;
/// Scan resolution used when searching for an interior boundary state.
pub const BOUNDARY_SCAN_POINTS: usize = 100;
const BOUNDARY_BISECTIONS: usize = 60;

#[derive(Debug, Clone, PartialEq)]
pub struct Pool {
    pub lo: f64,
    pub hi: f64,
    /// Split point between the two investigation regions.
    pub theta_c: f64,
    pub a_hat_0: f64,
    pub a_hat_1: f64,
    /// The receiver's action when the pool's message arrives without evidence.
    pub a_bar: f64,
    pub tag: u32,
    pub p_psi_0: f64,
    pub p_psi_1: f64,
    /// Per-pool override of the run-wide evidence rates.
    pub evidence: Option<EvidenceModel>,
}

impl Pool {
    /// A pool split at its own conditional mean.
    pub fn new(lo: f64, hi: f64, tag: u32, params: &GameParams) -> Result<Self> {
        let theta_c = pooled_action(lo, hi, &params.prior)?;
        Self::with_split(lo, hi, theta_c, tag, params)
    }

    pub fn with_split(lo: f64, hi: f64, theta_c: f64, tag: u32, params: &GameParams) -> Result<Self> {
        check_interval(lo, hi, &params.prior)?;
        if !(theta_c > lo && theta_c < hi) {
            return Err(GameError::OutOfRange {
                what: "theta_c",
                value: theta_c,
                lo,
                hi,
            });
        }
        let prior = &params.prior;
        let a_hat_0 = pooled_action(lo, theta_c, prior)?;
        let a_hat_1 = pooled_action(theta_c, hi, prior)?;
        let m0 = prior.mass(lo, theta_c);
        let m1 = prior.mass(theta_c, hi);
        let p_psi_0 = m0 / (m0 + m1);
        let p_psi_1 = 1.0 - p_psi_0;
        let mut pool = Self {
            lo,
            hi,
            theta_c,
            a_hat_0,
            a_hat_1,
            a_bar: 0.0,
            tag,
            p_psi_0,
            p_psi_1,
            evidence: None,
        };
        pool.a_bar = averaged_action(&pool);
        Ok(pool)
    }

    pub fn width(&self) -> f64 {
        self.hi - self.lo
    }

    pub fn contains(&self, theta: f64) -> bool {
        theta >= self.lo && theta <= self.hi
    }
}

/// P(Ψ⁰)·â⁰ + P(Ψ¹)·â¹.
pub fn averaged_action(pool: &Pool) -> f64 {
    pool.p_psi_0 * pool.a_hat_0 + pool.p_psi_1 * pool.a_hat_1
}

/// How a message that no equilibrium type sends is interpreted, apart from
/// separating-tag reports inside the separating image (those are always read
/// through σ⁻¹).
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum OffPathRule {
    /// Prior truncated to [θ_B, θ̄]: the receiver plays its conditional mean.
    #[default]
    TruncatedPrior,
    /// Point belief on θ̲.
    LowestState,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquilibriumBranch {
    /// θ_B = θ̲ and the bottom type weakly prefers pooling to revealing itself.
    BottomPooling,
    /// θ_B > θ̲ solves the boundary indifference condition.
    InteriorBoundary,
    /// Boundaries supplied by the caller; no equilibrium condition was checked.
    Prescribed,
}

#[derive(Debug, Clone)]
pub struct SlaphEquilibrium {
    pub params: GameParams,
    pub theta_b: f64,
    /// The separating strategy started at θ̲ and run up to θ̂. Only
    /// [θ̲, θ_B) is on path; the rest interprets off-path reports.
    pub separating: SeparatingSolution,
    pub pools: Vec<Pool>,
    pub pooled_report: f64,
    pub branch: EquilibriumBranch,
    pub off_path: OffPathRule,
}

impl SlaphEquilibrium {
    /// Assembles a profile from explicit pool boundaries
    /// `theta_b = boundaries[0] < ... < boundaries[K] = θ̄` without checking
    /// any equilibrium condition.
    pub fn from_boundaries(params: &GameParams, boundaries: &[f64]) -> Result<Self> {
        if boundaries.len() < 2 {
            return Err(GameError::InvalidParams("need at least two pool boundaries".into()));
        }
        let last = *boundaries.last().unwrap();
        if (last - params.theta_max).abs() > 1e-12 * params.width() {
            return Err(GameError::InvalidParams(format!(
                "last pool boundary {last} must equal theta_max {}",
                params.theta_max
            )));
        }
        let separating = solve_separating(params, params.theta_min)?;
        let theta_b = boundaries[0];
        if theta_b < params.theta_min || theta_b > separating.theta_cutoff() + 1e-12 {
            return Err(GameError::OutOfRange {
                what: "theta_B",
                value: theta_b,
                lo: params.theta_min,
                hi: separating.theta_cutoff(),
            });
        }
        let pools = pools_from_boundaries(boundaries, params)?;
        Ok(Self {
            params: params.clone(),
            theta_b,
            separating,
            pools,
            pooled_report: params.theta_max,
            branch: EquilibriumBranch::Prescribed,
            off_path: OffPathRule::default(),
        })
    }

    pub fn boundaries(&self) -> Vec<f64> {
        let mut v: Vec<f64> = self.pools.iter().map(|p| p.lo).collect();
        v.push(self.pools.last().map_or(self.theta_b, |p| p.hi));
        v
    }

    pub fn theta_hat(&self) -> f64 {
        self.separating.theta_cutoff()
    }

    pub fn pool_by_tag(&self, tag: u32) -> Option<&Pool> {
        self.pools.iter().find(|p| p.tag == tag)
    }

    /// Index of the pool containing θ; a state on a shared boundary belongs
    /// to the lower pool.
    pub fn pool_index(&self, theta: f64) -> Option<usize> {
        if theta < self.theta_b || theta > self.params.theta_max {
            return None;
        }
        let i = self.pools.partition_point(|p| p.hi < theta);
        Some(i.min(self.pools.len() - 1))
    }
}

fn pools_from_boundaries(boundaries: &[f64], params: &GameParams) -> Result<Vec<Pool>> {
    let mut pools = Vec::with_capacity(boundaries.len() - 1);
    for (j, w) in boundaries.windows(2).enumerate() {
        if w[1] <= w[0] {
            return Err(GameError::InvalidParams(format!(
                "pool boundaries must be strictly increasing ({} then {})",
                w[0], w[1]
            )));
        }
        pools.push(Pool::new(w[0], w[1], j as u32, params)?);
    }
    Ok(pools)
}

/// The next link state θ_{j+2} given θ_j and θ_{j+1}: the state whose pool
/// action leaves θ_{j+1} indifferent, i.e.
/// ā(θ_{j+1}, θ_{j+2}) = 2(θ_{j+1} + b) − ā(θ_j, θ_{j+1}).
pub fn next_pool_boundary(theta_prev: f64, theta_curr: f64, params: &GameParams) -> Result<f64> {
    if !(theta_prev < theta_curr && theta_curr < params.theta_max) {
        return Err(GameError::InvalidParams(format!(
            "need theta_prev < theta_curr < theta_max (got {theta_prev}, {theta_curr})"
        )));
    }
    let b = params.b;
    let top = params.theta_max;
    if params.prior.kind() == PriorKind::Uniform {
        let next = 2.0 * theta_curr - theta_prev + 4.0 * b;
        if next > top + 1e-13 * params.width() {
            return Err(GameError::NoFeasibleBoundary {
                theta_curr,
                required: 0.5 * (theta_curr + next),
            });
        }
        return Ok(next.min(top));
    }
    let prior = &params.prior;
    let required = 2.0 * (theta_curr + b) - pooled_action(theta_prev, theta_curr, prior)?;
    let reachable = pooled_action(theta_curr, top, prior)?;
    if required > reachable {
        return Err(GameError::NoFeasibleBoundary {
            theta_curr,
            required,
        });
    }
    // conditional mean of [θ_curr, hi] increases in hi
    let mut lo = theta_curr + 2.0 * crate::game::DEGENERATE_WIDTH * params.width();
    let mut hi = top;
    if lo >= hi {
        return Err(GameError::NoFeasibleBoundary { theta_curr, required });
    }
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        if pooled_action(theta_curr, mid, prior)? < required {
            lo = mid;
        } else {
            hi = mid;
        }
        if hi - lo < 1e-15 * params.width() {
            break;
        }
    }
    Ok(hi)
}

enum Shot {
    /// Boundaries reached after K−1 recursion steps, last one below θ̄.
    Short(Vec<f64>),
    Overshoot,
}

fn shoot(theta_b: f64, theta_1: f64, pools: usize, params: &GameParams) -> Result<Shot> {
    let mut b = vec![theta_b, theta_1];
    while b.len() < pools + 1 {
        let n = b.len();
        if b[n - 1] >= params.theta_max {
            return Ok(Shot::Overshoot);
        }
        match next_pool_boundary(b[n - 2], b[n - 1], params) {
            Ok(next) => b.push(next),
            Err(GameError::NoFeasibleBoundary { .. }) => return Ok(Shot::Overshoot),
            Err(e) => return Err(e),
        }
    }
    Ok(Shot::Short(b))
}

/// Partition [θ_B, θ̄] into `pools` pools satisfying the connection condition
/// at every link state, by shooting on the first boundary θ₁.
pub fn build_partition(theta_b: f64, pools: usize, params: &GameParams) -> Result<Vec<Pool>> {
    let top = params.theta_max;
    if pools == 0 {
        return Err(GameError::InvalidParams("pool count must be at least 1".into()));
    }
    if !(theta_b >= params.theta_min && theta_b < top) {
        return Err(GameError::OutOfRange {
            what: "theta_B",
            value: theta_b,
            lo: params.theta_min,
            hi: top,
        });
    }
    if pools == 1 {
        return Ok(vec![Pool::new(theta_b, top, 0, params)?]);
    }
    let infeasible = GameError::Infeasible { theta_b, pools };
    let min_width = 2.0 * crate::game::DEGENERATE_WIDTH * params.width();
    let mut lo = theta_b + min_width;
    let mut hi = top - min_width;
    if lo >= hi {
        return Err(infeasible);
    }
    let mut best = match shoot(theta_b, lo, pools, params)? {
        Shot::Short(b) if *b.last().unwrap() < top => b,
        _ => return Err(infeasible),
    };
    for _ in 0..200 {
        let mid = 0.5 * (lo + hi);
        match shoot(theta_b, mid, pools, params)? {
            Shot::Short(b) if *b.last().unwrap() < top => {
                lo = mid;
                best = b;
            }
            _ => hi = mid,
        }
        if hi - lo < 1e-16 * params.width() {
            break;
        }
    }
    let reach = *best.last().unwrap();
    if (top - reach).abs() > 1e-9 * params.width() {
        return Err(infeasible);
    }
    *best.last_mut().unwrap() = top;
    if best.windows(2).any(|w| w[1] - w[0] < min_width) {
        return Err(infeasible);
    }
    pools_from_boundaries(&best, params).map_err(|_| infeasible)
}

/// Every pool count K ≤ [`MAX_POOLS`] for which [`build_partition`] succeeds.
pub fn feasible_pool_counts(theta_b: f64, params: &GameParams) -> Vec<usize> {
    (1..=MAX_POOLS)
        .take_while(|&k| build_partition(theta_b, k, params).is_ok())
        .collect()
}

pub fn max_feasible_pools(theta_b: f64, params: &GameParams) -> usize {
    let mut k = 1;
    while k < MAX_POOLS && build_partition(theta_b, k + 1, params).is_ok() {
        k += 1;
    }
    k
}

/// Sender cost of pooling in the first pool minus the cost of revealing
/// θ_B along the separating strategy, both evaluated at the boundary type.
pub fn boundary_consistency_gap(
    theta_b: f64,
    partition: &[Pool],
    sol: &SeparatingSolution,
    params: &GameParams,
) -> Result<f64> {
    if theta_b <= params.theta_min {
        return Err(GameError::OutOfRange {
            what: "theta_B",
            value: theta_b,
            lo: params.theta_min,
            hi: params.theta_max,
        });
    }
    let first = partition
        .first()
        .ok_or_else(|| GameError::InvalidParams("empty partition".into()))?;
    let pooling = cost_sender(first.a_bar, theta_b, params.theta_max, params);
    let revealing = cost_sender(theta_b, theta_b, sol.eval(theta_b)?, params);
    Ok(pooling - revealing)
}

/// Pooling cost of the bottom type minus its cost of being believed, both
/// with θ_B = θ̲. A SLAPH with θ_B = θ̲ needs this to be ≤ 0.
pub fn sufficient_condition_gap(partition: &[Pool], sol: &SeparatingSolution, params: &GameParams) -> Result<f64> {
    let first = partition
        .first()
        .ok_or_else(|| GameError::InvalidParams("empty partition".into()))?;
    let bottom = params.theta_min;
    let pooling = cost_sender(first.a_bar, bottom, params.theta_max, params);
    let revealing = cost_sender(bottom, bottom, sol.eval(bottom)?, params);
    Ok(pooling - revealing)
}

/// The bottom type weakly prefers the first pool to revealing itself.
pub fn sufficient_condition_holds(partition: &[Pool], sol: &SeparatingSolution, params: &GameParams) -> bool {
    let tol = 1e-12 * (1.0 + params.b * params.b + params.k * params.width() * params.width());
    sufficient_condition_gap(partition, sol, params).is_ok_and(|g| g <= tol)
}

fn gap_for(theta_b: f64, pools: usize, sol: &SeparatingSolution, params: &GameParams) -> Option<(f64, Vec<Pool>)> {
    let partition = build_partition(theta_b, pools, params).ok()?;
    let gap = boundary_consistency_gap(theta_b, &partition, sol, params).ok()?;
    Some((gap, partition))
}

pub fn build_slaph(params: &GameParams) -> Result<SlaphEquilibrium> {
    let sol = solve_separating(params, params.theta_min)?;
    let assemble = |theta_b: f64, pools: Vec<Pool>, branch| SlaphEquilibrium {
        params: params.clone(),
        theta_b,
        separating: sol.clone(),
        pools,
        pooled_report: params.theta_max,
        branch,
        off_path: OffPathRule::default(),
    };

    let bottom = params.theta_min;
    let k0 = max_feasible_pools(bottom, params);
    let partition = build_partition(bottom, k0, params)?;
    if sufficient_condition_holds(&partition, &sol, params) {
        return Ok(assemble(bottom, partition, EquilibriumBranch::BottomPooling));
    }

    // Scan θ_B over (θ̲, θ̂] for sign changes of the boundary gap, separately
    // for each pool count so jumps in the feasible K do not fake a root.
    let hat = sol.theta_cutoff();
    let start = bottom + 1e-6 * params.width();
    if start >= hat {
        return Err(GameError::NoEquilibriumFound(format!(
            "cutoff state {hat} leaves no room for an interior boundary"
        )));
    }
    let grid: Vec<f64> = (0..BOUNDARY_SCAN_POINTS)
        .map(|i| start + (hat - start) * i as f64 / (BOUNDARY_SCAN_POINTS - 1) as f64)
        .collect();
    let kmax: Vec<usize> = grid.iter().map(|&t| max_feasible_pools(t, params)).collect();
    let top_k = *kmax.iter().max().unwrap();

    let mut found: Option<(usize, f64, Vec<Pool>)> = None;
    for pools in 1..=top_k {
        let gaps: Vec<Option<f64>> = grid
            .iter()
            .zip(&kmax)
            .map(|(&t, &km)| if pools <= km { gap_for(t, pools, &sol, params).map(|g| g.0) } else { None })
            .collect();
        for i in 0..grid.len() - 1 {
            let (Some(g0), Some(g1)) = (gaps[i], gaps[i + 1]) else {
                continue;
            };
            if g0 != 0.0 && g1 != 0.0 && g0.signum() == g1.signum() {
                continue;
            }
            let (mut lo, mut hi) = (grid[i], grid[i + 1]);
            let lo_sign = g0.signum();
            for _ in 0..BOUNDARY_BISECTIONS {
                let mid = 0.5 * (lo + hi);
                match gap_for(mid, pools, &sol, params) {
                    Some((g, _)) if g.signum() == lo_sign && g != 0.0 => lo = mid,
                    Some(_) => hi = mid,
                    None => break,
                }
            }
            let root = if g0 == 0.0 { grid[i] } else { hi };
            if max_feasible_pools(root, params) != pools {
                continue;
            }
            let Some((_, partition)) = gap_for(root, pools, &sol, params) else {
                continue;
            };
            // prefer more pools, then the larger separating segment
            let better = match &found {
                None => true,
                Some((kp, tb, _)) => pools > *kp || (pools == *kp && root > *tb),
            };
            if better {
                found = Some((pools, root, partition));
            }
        }
    }
    match found {
        Some((_, theta_b, partition)) => Ok(assemble(theta_b, partition, EquilibriumBranch::InteriorBoundary)),
        None => Err(GameError::NoEquilibriumFound(format!(
            "bottom type prefers revealing itself (gap {:.3e}) and the boundary condition has no root on (θ̲, θ̂]",
            sufficient_condition_gap(&partition, &sol, params).unwrap_or(f64::NAN)
        ))),
    }
}

pub fn sender_equilibrium_strategy(eq: &SlaphEquilibrium, theta: f64) -> Result<Message> {
    let p = &eq.params;
    if !p.contains(theta) {
        return Err(GameError::OutOfRange {
            what: "theta",
            value: theta,
            lo: p.theta_min,
            hi: p.theta_max,
        });
    }
    if theta < eq.theta_b {
        return Ok(Message::separating(eq.separating.eval(theta)?));
    }
    let j = eq.pool_index(theta).expect("pooled state lies in some pool");
    Ok(Message::pooled(eq.pooled_report, eq.pools[j].tag))
}

/// Evidence observed by the receiver together with the detector that
/// produced it.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Observation {
    pub model: EvidenceModel,
    pub evidence: Evidence,
}

fn off_path_action(eq: &SlaphEquilibrium) -> f64 {
    match eq.off_path {
        OffPathRule::TruncatedPrior => {
            pooled_action(eq.theta_b, eq.params.theta_max, &eq.params.prior).unwrap_or(eq.params.theta_max)
        }
        OffPathRule::LowestState => eq.params.theta_min,
    }
}

pub fn receiver_equilibrium_action(eq: &SlaphEquilibrium, msg: &Message, observation: Option<&Observation>) -> f64 {
    let p = &eq.params;
    if msg.tag == SEPARATING_TAG {
        return match eq.separating.invert(msg.report) {
            Ok(theta) => theta,
            Err(_) => off_path_action(eq),
        };
    }
    let on_path_report = (msg.report - eq.pooled_report).abs() <= 1e-12 * p.width();
    match eq.pool_by_tag(msg.tag) {
        Some(pool) if on_path_report => match observation {
            None => pool.a_bar,
            Some(obs) => {
                let model = pool.evidence.unwrap_or(obs.model);
                let post = evidence_posterior(pool, &model, obs.evidence, &p.prior);
                receiver_action_with_evidence(pool, &post)
            }
        },
        _ => off_path_action(eq),
    }
}

/// |C^A(ā_j, θ_{j+1}) − C^A(ā_{j+1}, θ_{j+1})| at every link state.
pub fn connection_residuals(eq: &SlaphEquilibrium) -> Vec<f64> {
    eq.pools
        .windows(2)
        .map(|w| {
            let link = w[0].hi;
            (cost_action(w[0].a_bar, link, eq.params.b) - cost_action(w[1].a_bar, link, eq.params.b)).abs()
        })
        .collect()
}
