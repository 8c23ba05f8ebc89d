//! Equilibrium report document, in the same sectioned format as the config.
//!
//! Numbers use 12 significant digits except `boundaries`, which is written in
//! shortest round-trip form so re-reading reproduces the partition exactly.

use std::fmt::Write as _;

use deception_core::sim::fmt_num;
use deception_core::{
    total_gain, EquilibriumBranch, EvidenceModel, OffPathRule, PriorKind, SlaphEquilibrium, VerificationReport,
};

use crate::config::Document;
use crate::CliError;

fn branch_name(b: EquilibriumBranch) -> &'static str {
    match b {
        EquilibriumBranch::BottomPooling => "bottom_pooling",
        EquilibriumBranch::InteriorBoundary => "interior_boundary",
        EquilibriumBranch::Prescribed => "prescribed",
    }
}

fn off_path_name(r: OffPathRule) -> &'static str {
    match r {
        OffPathRule::TruncatedPrior => "truncated_prior",
        OffPathRule::LowestState => "lowest_state",
    }
}

pub fn render(eq: &SlaphEquilibrium, evidence: Option<&EvidenceModel>, verification: &VerificationReport) -> String {
    let p = &eq.params;
    let mut s = String::new();
    let kv = |s: &mut String, k: &str, v: String| writeln!(s, "{k} = {v}").expect("writing to a String");
    s.push_str("# deception-game equilibrium report\n[game]\n");
    kv(&mut s, "theta_min", fmt_num(p.theta_min));
    kv(&mut s, "theta_max", fmt_num(p.theta_max));
    kv(&mut s, "b", fmt_num(p.b));
    kv(&mut s, "k", fmt_num(p.k));
    let prior = match p.prior.kind() {
        PriorKind::Uniform => "uniform".to_string(),
        PriorKind::TruncatedCustom => p.prior.label().to_string(),
    };
    kv(&mut s, "prior", prior);

    s.push_str("\n[equilibrium]\n");
    kv(&mut s, "branch", branch_name(eq.branch).into());
    kv(&mut s, "off_path", off_path_name(eq.off_path).into());
    kv(&mut s, "theta_hat", fmt_num(eq.theta_hat()));
    kv(&mut s, "theta_b", fmt_num(eq.theta_b));
    kv(&mut s, "pooled_report", fmt_num(eq.pooled_report));
    kv(&mut s, "pools", eq.pools.len().to_string());
    let bounds: Vec<String> = eq.boundaries().iter().map(|b| format!("{b:?}")).collect();
    kv(&mut s, "boundaries", bounds.join(", "));

    for (i, pool) in eq.pools.iter().enumerate() {
        writeln!(s, "\n[pool.{i}]").expect("writing to a String");
        kv(&mut s, "tag", pool.tag.to_string());
        kv(&mut s, "lo", fmt_num(pool.lo));
        kv(&mut s, "hi", fmt_num(pool.hi));
        kv(&mut s, "a_bar", fmt_num(pool.a_bar));
        kv(&mut s, "theta_c", fmt_num(pool.theta_c));
        kv(&mut s, "a_hat_0", fmt_num(pool.a_hat_0));
        kv(&mut s, "a_hat_1", fmt_num(pool.a_hat_1));
    }

    s.push_str("\n[evidence]\n");
    match evidence {
        None => kv(&mut s, "model", "none".into()),
        Some(m) => {
            kv(&mut s, "x", fmt_num(m.x));
            kv(&mut s, "y", fmt_num(m.y));
            let gains = total_gain(eq, m);
            kv(&mut s, "delta_total", fmt_num(gains.delta_total));
            for (i, g) in gains.pools.iter().enumerate() {
                writeln!(s, "\n[gain.{i}]").expect("writing to a String");
                kv(&mut s, "tag", g.tag.to_string());
                kv(&mut s, "delta", fmt_num(g.delta));
                kv(&mut s, "delta_with_minus_without", fmt_num(g.delta_printed));
                kv(&mut s, "delta_0", fmt_num(g.delta_0));
                kv(&mut s, "delta_1", fmt_num(g.delta_1));
                kv(&mut s, "cost_efficient", g.cost_efficient.to_string());
                kv(&mut s, "reliable", g.reliable.to_string());
            }
        }
    }

    s.push_str("\n[verification]\n");
    kv(&mut s, "grid_n", verification.grid_size.to_string());
    kv(&mut s, "max_sender_gain", fmt_num(verification.max_sender_gain));
    kv(&mut s, "worst_sender_state", fmt_num(verification.worst_sender_state));
    kv(&mut s, "max_receiver_gain", fmt_num(verification.max_receiver_gain));
    kv(&mut s, "passed", verification.passed.to_string());
    s
}

#[derive(Debug, Clone, PartialEq)]
#[allow(dead_code)] // fields kept for inspection and tests
pub struct PoolSummary {
    pub tag: u32,
    pub lo: f64,
    pub hi: f64,
    pub a_bar: f64,
    pub a_hat_0: f64,
    pub a_hat_1: f64,
}

/// The parts of a report needed to reconstruct or compare an equilibrium.
#[derive(Debug, Clone, PartialEq)]
pub struct ParsedReport {
    pub theta_hat: f64,
    pub theta_b: f64,
    pub boundaries: Vec<f64>,
    pub pools: Vec<PoolSummary>,
    pub verification_passed: Option<bool>,
}

fn field<T: std::str::FromStr>(doc: &Document, section: &str, key: &str) -> Result<T, CliError> {
    let e = doc
        .get(section, key)
        .ok_or_else(|| CliError::Config(format!("report: missing field `{key}` in [{section}]")))?;
    e.value
        .parse()
        .map_err(|_| CliError::Config(format!("report line {}: cannot parse `{key}` from `{}`", e.line, e.value)))
}

pub fn parse(text: &str) -> Result<ParsedReport, CliError> {
    let doc = Document::parse(text, "report")?;
    let raw: String = field(&doc, "equilibrium", "boundaries")?;
    let boundaries = raw
        .split(',')
        .map(|t| t.trim().parse::<f64>())
        .collect::<Result<Vec<_>, _>>()
        .map_err(|_| CliError::Config(format!("report: malformed boundaries `{raw}`")))?;
    let n: usize = field(&doc, "equilibrium", "pools")?;
    let pools = (0..n)
        .map(|i| {
            let sec = format!("pool.{i}");
            Ok(PoolSummary {
                tag: field(&doc, &sec, "tag")?,
                lo: field(&doc, &sec, "lo")?,
                hi: field(&doc, &sec, "hi")?,
                a_bar: field(&doc, &sec, "a_bar")?,
                a_hat_0: field(&doc, &sec, "a_hat_0")?,
                a_hat_1: field(&doc, &sec, "a_hat_1")?,
            })
        })
        .collect::<Result<Vec<_>, CliError>>()?;
    Ok(ParsedReport {
        theta_hat: field(&doc, "equilibrium", "theta_hat")?,
        theta_b: field(&doc, "equilibrium", "theta_b")?,
        boundaries,
        pools,
        verification_passed: doc.get("verification", "passed").and_then(|e| e.value.parse().ok()),
    })
}
