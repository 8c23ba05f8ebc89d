//! End-to-end play of the game by sampling.
//!
//! Each shard owns a ChaCha8 stream: the generator is seeded from the run seed
//! and the shard index selects the stream, so a fixed (seed, shards) pair gives
//! the same draws regardless of thread scheduling. Shard totals are merged in
//! shard order.

use std::io::Write;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{GameError, Result};
use crate::evidence::{Evidence, EvidenceModel};
use crate::game::{CostBreakdown, Message};
use crate::slaph::{receiver_equilibrium_action, sender_equilibrium_strategy, Observation, SlaphEquilibrium};

pub const RNG_ALGORITHM: &str = "ChaCha8 (seed_from_u64(seed), stream = shard index)";
/// Below this many rounds no confidence half-width is reported.
pub const MIN_ROUNDS_FOR_INTERVAL: usize = 30;

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationConfig {
    pub n_rounds: usize,
    pub seed: u64,
    pub evidence: Option<EvidenceModel>,
    pub record_trace: bool,
    pub shards: usize,
}

impl SimulationConfig {
    pub fn new(n_rounds: usize, seed: u64) -> Self {
        Self {
            n_rounds,
            seed,
            evidence: None,
            record_trace: false,
            shards: 1,
        }
    }

    pub fn with_evidence(mut self, model: EvidenceModel) -> Self {
        self.evidence = Some(model);
        self
    }

    fn validate(&self) -> Result<()> {
        if self.n_rounds == 0 {
            return Err(GameError::InvalidParams("n_rounds must be at least 1".into()));
        }
        if self.shards == 0 {
            return Err(GameError::InvalidParams("shards must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct Round {
    pub theta: f64,
    pub message: Message,
    pub evidence: Option<Evidence>,
    pub action: f64,
    pub costs: CostBreakdown,
}

/// Draws a state, plays both equilibrium strategies and evaluates all costs.
pub fn play_round<R: Rng + ?Sized>(eq: &SlaphEquilibrium, evidence: Option<&EvidenceModel>, rng: &mut R) -> Round {
    let p = &eq.params;
    let theta = p.prior.quantile(rng.gen::<f64>());
    let message = sender_equilibrium_strategy(eq, theta).expect("sampled state lies in the state interval");
    let mut observed = None;
    let mut obs = None;
    if !message.is_separating() {
        if let Some(pool) = eq.pool_by_tag(message.tag) {
            if let Some(model) = pool.evidence.as_ref().or(evidence) {
                let region = usize::from(theta > pool.theta_c);
                let u = rng.gen::<f64>();
                let e = match region {
                    0 if u < model.x => Evidence::Zero,
                    0 => Evidence::One,
                    _ if u < model.y => Evidence::One,
                    _ => Evidence::Zero,
                };
                observed = Some(e);
                obs = Some(Observation {
                    model: *model,
                    evidence: e,
                });
            }
        }
    }
    let action = receiver_equilibrium_action(eq, &message, obs.as_ref());
    Round {
        theta,
        message,
        evidence: observed,
        action,
        costs: CostBreakdown::evaluate(action, theta, message.report, p),
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanEstimate {
    pub mean: f64,
    /// 95% normal-approximation half-width; `None` below
    /// [`MIN_ROUNDS_FOR_INTERVAL`] samples.
    pub half_width_95: Option<f64>,
}

#[derive(Debug, Clone, Copy, Default)]
struct Moments {
    n: usize,
    sum: f64,
    sum_sq: f64,
}

impl Moments {
    fn push(&mut self, v: f64) {
        self.n += 1;
        self.sum += v;
        self.sum_sq += v * v;
    }

    fn merge(&mut self, o: &Moments) {
        self.n += o.n;
        self.sum += o.sum;
        self.sum_sq += o.sum_sq;
    }

    fn estimate(&self) -> MeanEstimate {
        if self.n == 0 {
            return MeanEstimate {
                mean: 0.0,
                half_width_95: None,
            };
        }
        let n = self.n as f64;
        let mean = self.sum / n;
        let half_width_95 = (self.n >= MIN_ROUNDS_FOR_INTERVAL).then(|| {
            let var = ((self.sum_sq - n * mean * mean) / (n - 1.0)).max(0.0);
            1.96 * (var / n).sqrt()
        });
        MeanEstimate { mean, half_width_95 }
    }
}

#[derive(Debug, Clone, Default)]
struct Totals {
    receiver: Moments,
    sender: Moments,
    action: Moments,
    deception: Moments,
    pooled: Moments,
    per_pool: Vec<Moments>,
    trace: Vec<Round>,
}

impl Totals {
    fn merge(&mut self, o: Totals) {
        self.receiver.merge(&o.receiver);
        self.sender.merge(&o.sender);
        self.action.merge(&o.action);
        self.deception.merge(&o.deception);
        self.pooled.merge(&o.pooled);
        for (a, b) in self.per_pool.iter_mut().zip(&o.per_pool) {
            a.merge(b);
        }
        self.trace.extend(o.trace);
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PoolCostEstimate {
    pub tag: u32,
    pub lo: f64,
    pub hi: f64,
    pub rounds: usize,
    pub cost_receiver: MeanEstimate,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SimulationReport {
    pub n_rounds: usize,
    pub seed: u64,
    pub shards: usize,
    pub rng: &'static str,
    pub with_evidence: bool,
    pub cost_receiver: MeanEstimate,
    pub cost_sender: MeanEstimate,
    pub cost_action: MeanEstimate,
    pub cost_deception: MeanEstimate,
    /// Share of draws with θ ≥ θ_B.
    pub fraction_pooled: MeanEstimate,
    pub per_pool: Vec<PoolCostEstimate>,
    pub trace: Option<Vec<Round>>,
}

impl SimulationReport {
    pub fn mean_cost_receiver(&self) -> f64 {
        self.cost_receiver.mean
    }

    pub fn mean_cost_sender(&self) -> f64 {
        self.cost_sender.mean
    }
}

fn run_shard(eq: &SlaphEquilibrium, config: &SimulationConfig, shard: usize, rounds: usize) -> Totals {
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    rng.set_stream(shard as u64);
    let mut t = Totals {
        per_pool: vec![Moments::default(); eq.pools.len()],
        ..Default::default()
    };
    let index_of_tag = |tag: u32| eq.pools.iter().position(|p| p.tag == tag);
    for _ in 0..rounds {
        let r = play_round(eq, config.evidence.as_ref(), &mut rng);
        t.receiver.push(r.costs.c_receiver);
        t.sender.push(r.costs.c_sender_total);
        t.action.push(r.costs.c_action);
        t.deception.push(r.costs.c_deception);
        let pooled = !r.message.is_separating();
        t.pooled.push(if pooled { 1.0 } else { 0.0 });
        if pooled {
            if let Some(i) = index_of_tag(r.message.tag) {
                t.per_pool[i].push(r.costs.c_receiver);
            }
        }
        if config.record_trace {
            t.trace.push(r);
        }
    }
    t
}

pub fn simulate(eq: &SlaphEquilibrium, config: &SimulationConfig) -> Result<SimulationReport> {
    config.validate()?;
    let shards = config.shards.min(config.n_rounds);
    let base = config.n_rounds / shards;
    let extra = config.n_rounds % shards;
    let plan: Vec<(usize, usize)> = (0..shards).map(|s| (s, base + usize::from(s < extra))).collect();

    #[cfg(feature = "parallel")]
    let parts: Vec<Totals> = {
        use rayon::prelude::*;
        plan.par_iter().map(|&(s, n)| run_shard(eq, config, s, n)).collect()
    };
    #[cfg(not(feature = "parallel"))]
    let parts: Vec<Totals> = plan.iter().map(|&(s, n)| run_shard(eq, config, s, n)).collect();

    let mut total = Totals {
        per_pool: vec![Moments::default(); eq.pools.len()],
        ..Default::default()
    };
    for part in parts {
        total.merge(part);
    }

    let per_pool = eq
        .pools
        .iter()
        .zip(&total.per_pool)
        .map(|(pool, m)| PoolCostEstimate {
            tag: pool.tag,
            lo: pool.lo,
            hi: pool.hi,
            rounds: m.n,
            cost_receiver: m.estimate(),
        })
        .collect();

    Ok(SimulationReport {
        n_rounds: config.n_rounds,
        seed: config.seed,
        shards,
        rng: RNG_ALGORITHM,
        with_evidence: config.evidence.is_some(),
        cost_receiver: total.receiver.estimate(),
        cost_sender: total.sender.estimate(),
        cost_action: total.action.estimate(),
        cost_deception: total.deception.estimate(),
        fraction_pooled: total.pooled.estimate(),
        per_pool,
        trace: config.record_trace.then_some(total.trace),
    })
}

pub const TRACE_HEADER: [&str; 9] = [
    "theta",
    "report",
    "tag",
    "evidence",
    "action",
    "c_action",
    "c_deception",
    "c_sender",
    "c_receiver",
];

/// Writes a per-round trace as CSV. Separating messages get an empty tag and
/// rounds without evidence an empty evidence cell.
pub fn write_trace_csv<W: Write>(rounds: &[Round], out: W) -> Result<()> {
    let io = |e: csv::Error| GameError::InvalidParams(format!("trace write failed: {e}"));
    let mut w = csv::Writer::from_writer(out);
    w.write_record(TRACE_HEADER).map_err(io)?;
    for r in rounds {
        let tag = if r.message.is_separating() {
            String::new()
        } else {
            r.message.tag.to_string()
        };
        let ev = r.evidence.map(|e| e.as_u8().to_string()).unwrap_or_default();
        w.write_record([
            fmt_num(r.theta),
            fmt_num(r.message.report),
            tag,
            ev,
            fmt_num(r.action),
            fmt_num(r.costs.c_action),
            fmt_num(r.costs.c_deception),
            fmt_num(r.costs.c_sender_total),
            fmt_num(r.costs.c_receiver),
        ])
        .map_err(io)?;
    }
    w.flush().map_err(|e| GameError::InvalidParams(format!("trace write failed: {e}")))?;
    Ok(())
}

/// Formats a number with 12 significant digits, trailing zeros trimmed.
pub fn fmt_num(x: f64) -> String {
    if x == 0.0 {
        return "0".to_string();
    }
    if !x.is_finite() {
        return x.to_string();
    }
    let exp = x.abs().log10().floor() as i32;
    if (-5..15).contains(&exp) {
        let decimals = (11 - exp).max(0) as usize;
        let s = format!("{x:.decimals$}");
        let s = if s.contains('.') {
            s.trim_end_matches('0').trim_end_matches('.').to_string()
        } else {
            s
        };
        if s == "-0" {
            "0".to_string()
        } else {
            s
        }
    } else {
        format!("{x:.11e}")
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::evidence::expected_receiver_cost;
    use crate::game::GameParams;
    use crate::slaph::build_slaph;

    fn fig4() -> SlaphEquilibrium {
        build_slaph(&GameParams::uniform(0.0, 1.0, 0.125, 1.0 / 64.0).unwrap()).unwrap()
    }

    #[test]
    fn separating_draws_are_revealed() {
        let eq = build_slaph(&GameParams::uniform(0.0, 1.0, 0.125, 0.1).unwrap()).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let mut seen = 0;
        for _ in 0..2000 {
            let r = play_round(&eq, None, &mut rng);
            if r.theta < eq.theta_b {
                seen += 1;
                assert!((r.action - r.theta).abs() < 1e-6);
                assert!(r.costs.c_receiver < 1e-11);
            }
        }
        assert!(seen > 100);
    }

    #[test]
    fn pooled_draws_get_pool_action() {
        let eq = fig4();
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        for _ in 0..500 {
            let r = play_round(&eq, None, &mut rng);
            let pool = eq.pool_by_tag(r.message.tag).unwrap();
            let expect = crate::game::pooled_action(pool.lo, pool.hi, &eq.params.prior).unwrap();
            assert!((r.action - expect).abs() < 1e-9);
            assert!(r.evidence.is_none());
        }
    }

    #[test]
    fn perfect_evidence_picks_region_action() {
        let eq = fig4();
        let m = EvidenceModel::new(1.0, 1.0).unwrap();
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        for _ in 0..500 {
            let r = play_round(&eq, Some(&m), &mut rng);
            let pool = eq.pool_by_tag(r.message.tag).unwrap();
            let expect = if r.theta > pool.theta_c { pool.a_hat_1 } else { pool.a_hat_0 };
            assert!((r.action - expect).abs() < 1e-12);
        }
    }

    #[test]
    fn deterministic_for_fixed_seed() {
        let eq = fig4();
        let mut cfg = SimulationConfig::new(20_000, 99).with_evidence(EvidenceModel::new(0.9, 0.9).unwrap());
        cfg.shards = 4;
        let a = simulate(&eq, &cfg).unwrap();
        let b = simulate(&eq, &cfg).unwrap();
        assert_eq!(a, b);
        let one = simulate(&eq, &SimulationConfig { n_rounds: 1, record_trace: true, ..cfg.clone() }).unwrap();
        let again = simulate(&eq, &SimulationConfig { n_rounds: 1, record_trace: true, ..cfg }).unwrap();
        assert_eq!(one.trace, again.trace);
        assert_eq!(one.cost_receiver.half_width_95, None);
    }

    #[test]
    fn sender_mean_decomposes() {
        let eq = fig4();
        let rep = simulate(&eq, &SimulationConfig::new(10_000, 1)).unwrap();
        let k = eq.params.k;
        assert!((rep.cost_sender.mean - (rep.cost_action.mean + k * rep.cost_deception.mean)).abs() < 1e-10);
    }

    #[test]
    fn receiver_cost_converges_to_expectation() {
        let eq = fig4();
        let m = EvidenceModel::new(0.9, 0.9).unwrap();
        for ev in [None, Some(m)] {
            let mut cfg = SimulationConfig::new(100_000, 11);
            cfg.evidence = ev;
            let rep = simulate(&eq, &cfg).unwrap();
            let exact = expected_receiver_cost(&eq, ev.as_ref());
            let se = rep.cost_receiver.half_width_95.unwrap() / 1.96;
            assert!((rep.cost_receiver.mean - exact).abs() < 3.0 * se, "{} vs {exact}", rep.cost_receiver.mean);
        }
    }

    #[test]
    fn zero_rounds_rejected() {
        assert!(simulate(&fig4(), &SimulationConfig::new(0, 1)).is_err());
    }

    #[test]
    fn trace_csv_layout() {
        let eq = fig4();
        let mut cfg = SimulationConfig::new(3, 8).with_evidence(EvidenceModel::new(0.9, 0.9).unwrap());
        cfg.record_trace = true;
        let rep = simulate(&eq, &cfg).unwrap();
        let mut buf = Vec::new();
        write_trace_csv(rep.trace.as_ref().unwrap(), &mut buf).unwrap();
        let text = String::from_utf8(buf).unwrap();
        let lines: Vec<&str> = text.lines().collect();
        assert_eq!(lines[0], "theta,report,tag,evidence,action,c_action,c_deception,c_sender,c_receiver");
        assert_eq!(lines.len(), 4);
        assert!(text.ends_with('\n'));
        assert_eq!(lines[1].split(',').count(), 9);
    }

    #[test]
    fn number_formatting() {
        assert_eq!(fmt_num(0.0), "0");
        assert_eq!(fmt_num(0.125), "0.125");
        assert_eq!(fmt_num(1.0), "1");
        assert_eq!(fmt_num(0.311661205146527), "0.311661205147");
        assert_eq!(fmt_num(-2.5), "-2.5");
        assert_eq!(fmt_num(1.0 / 3.0), "0.333333333333");
        assert_eq!(fmt_num(123456.0), "123456");
    }
}
