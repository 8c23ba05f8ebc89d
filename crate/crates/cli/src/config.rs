//! Run configuration: a flat, sectioned `key = value` text format.
//!
//! ```text
//! preset = fig4          # optional; keys below override the preset
//! output_dir = out
//! [game]
//! theta_min = 0
//! theta_max = 1
//! b = 0.125
//! k = 0.015625
//! prior.kind = uniform   # or truncated_normal with prior.mean, prior.sd
//! [evidence]
//! x = 0.9
//! y = 0.9
//! [simulation]
//! n_rounds = 100000
//! seed = 42
//! record_trace = false
//! shards = 8
//! [equilibrium]
//! boundaries = 0, 0.5, 1    # or: from_report = out/equilibrium_report.txt
//! off_path = truncated_prior  # or lowest_state
//! [sweep]
//! kb_min = 0.01
//! kb_max = 100
//! ```

use std::collections::BTreeMap;
use std::path::PathBuf;

use deception_core::{EvidenceModel, GameParams, OffPathRule, PriorDistribution, SimulationConfig};

use crate::CliError;

#[derive(Debug, Clone, PartialEq)]
pub struct Entry {
    pub value: String,
    pub line: usize,
}

/// Parsed document: section name ("" for the preamble) to keys.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct Document {
    pub sections: BTreeMap<String, BTreeMap<String, Entry>>,
}

impl Document {
    pub fn parse(text: &str, source: &str) -> Result<Self, CliError> {
        let mut doc = Document::default();
        let mut current = String::new();
        doc.sections.entry(current.clone()).or_default();
        for (i, raw) in text.lines().enumerate() {
            let line = i + 1;
            let content = raw.split('#').next().unwrap_or("").trim();
            if content.is_empty() {
                continue;
            }
            if let Some(rest) = content.strip_prefix('[') {
                let name = rest
                    .strip_suffix(']')
                    .map(str::trim)
                    .filter(|n| !n.is_empty())
                    .ok_or_else(|| CliError::config(source, line, format!("malformed section header `{content}`")))?;
                current = name.to_string();
                doc.sections.entry(current.clone()).or_default();
                continue;
            }
            let (key, value) = content
                .split_once('=')
                .ok_or_else(|| CliError::config(source, line, format!("expected `key = value`, found `{content}`")))?;
            let key = key.trim();
            if key.is_empty() {
                return Err(CliError::config(source, line, "empty key"));
            }
            let section = doc.sections.get_mut(&current).expect("section inserted on entry");
            let entry = Entry {
                value: value.trim().to_string(),
                line,
            };
            if let Some(prev) = section.insert(key.to_string(), entry) {
                return Err(CliError::config(
                    source,
                    line,
                    format!("duplicate key `{key}` (first set on line {})", prev.line),
                ));
            }
        }
        Ok(doc)
    }

    pub fn get(&self, section: &str, key: &str) -> Option<&Entry> {
        self.sections.get(section).and_then(|s| s.get(key))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorChoice {
    Uniform,
    TruncatedNormal,
}

/// Fields as they accumulate from preset and file, before validation.
#[derive(Debug, Clone, Default)]
struct Raw {
    theta_min: Option<f64>,
    theta_max: Option<f64>,
    b: Option<f64>,
    k: Option<f64>,
    prior: Option<PriorChoice>,
    prior_mean: Option<f64>,
    prior_sd: Option<f64>,
    x: Option<f64>,
    y: Option<f64>,
    n_rounds: Option<usize>,
    seed: Option<u64>,
    record_trace: Option<bool>,
    shards: Option<usize>,
    boundaries: Option<Vec<f64>>,
    from_report: Option<(PathBuf, usize)>,
    off_path: Option<OffPathRule>,
    kb_min: Option<f64>,
    kb_max: Option<f64>,
    output_dir: Option<PathBuf>,
}

pub const PRESETS: [&str; 5] = ["fig3b", "fig4", "fig5", "gps-spoofing-demo", "mitm-demo"];

fn preset(name: &str) -> Option<Raw> {
    let unit = |b: f64, k: f64| Raw {
        theta_min: Some(0.0),
        theta_max: Some(1.0),
        b: Some(b),
        k: Some(k),
        prior: Some(PriorChoice::Uniform),
        ..Raw::default()
    };
    let raw = match name {
        "fig3b" => unit(0.125, 0.1),
        "fig4" => unit(0.125, 1.0 / 64.0),
        "fig5" => Raw {
            x: Some(0.9),
            y: Some(0.9),
            n_rounds: Some(1_000_000),
            seed: Some(42),
            ..unit(0.125, 1.0 / 64.0)
        },
        // Position offset in metres; the spoofer wants the victim 15 m off and
        // faking the signal is cheap relative to the displacement.
        "gps-spoofing-demo" => Raw {
            theta_min: Some(0.0),
            theta_max: Some(100.0),
            b: Some(15.0),
            k: Some(0.05),
            prior: Some(PriorChoice::Uniform),
            x: Some(0.85),
            y: Some(0.8),
            n_rounds: Some(100_000),
            seed: Some(7),
            ..Raw::default()
        },
        // Severity score of intercepted traffic, concentrated on low values.
        "mitm-demo" => Raw {
            theta_min: Some(0.0),
            theta_max: Some(1.0),
            b: Some(0.1),
            k: Some(0.2),
            prior: Some(PriorChoice::TruncatedNormal),
            prior_mean: Some(0.3),
            prior_sd: Some(0.25),
            x: Some(0.8),
            y: Some(0.7),
            n_rounds: Some(100_000),
            seed: Some(11),
            ..Raw::default()
        },
        _ => return None,
    };
    Some(raw)
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub params: GameParams,
    pub evidence: Option<EvidenceModel>,
    /// Present when a simulation block or preset supplies `n_rounds`.
    pub simulation: Option<SimulationConfig>,
    pub boundaries: Option<Vec<f64>>,
    pub off_path: OffPathRule,
    pub kb_range: (f64, f64),
    pub output_dir: PathBuf,
}

/// Command-line values that override file and preset values.
#[derive(Debug, Clone, Default)]
pub struct Overrides {
    pub preset: Option<String>,
    pub output_dir: Option<PathBuf>,
    pub seed: Option<u64>,
}

struct Reader<'a> {
    doc: &'a Document,
    source: &'a str,
}

impl Reader<'_> {
    fn parse<T: std::str::FromStr>(&self, section: &str, key: &str, what: &str) -> Result<Option<T>, CliError> {
        match self.doc.get(section, key) {
            None => Ok(None),
            Some(e) => e
                .value
                .parse()
                .map(Some)
                .map_err(|_| CliError::config(self.source, e.line, format!("`{key}`: expected {what}, found `{}`", e.value))),
        }
    }

    fn real(&self, section: &str, key: &str) -> Result<Option<f64>, CliError> {
        let v: Option<f64> = self.parse(section, key, "a number")?;
        if let (Some(v), Some(e)) = (v, self.doc.get(section, key)) {
            if !v.is_finite() {
                return Err(CliError::config(self.source, e.line, format!("`{key}` must be finite")));
            }
        }
        Ok(v)
    }
}

const KNOWN: [(&str, &[&str]); 7] = [
    ("", &["preset", "output_dir"]),
    ("game", &["theta_min", "theta_max", "b", "k", "prior.kind", "prior.mean", "prior.sd"]),
    ("evidence", &["x", "y"]),
    ("simulation", &["n_rounds", "seed", "record_trace", "shards"]),
    ("equilibrium", &["boundaries", "from_report", "off_path"]),
    ("sweep", &["kb_min", "kb_max"]),
    ("verify", &[]),
];

fn check_known(doc: &Document, source: &str) -> Result<(), CliError> {
    for (section, keys) in &doc.sections {
        let allowed = KNOWN.iter().find(|(s, _)| s == section).map(|(_, k)| *k);
        let Some(allowed) = allowed else {
            let line = keys.values().map(|e| e.line).min().unwrap_or(0);
            return Err(CliError::config(source, line, format!("unknown section [{section}]")));
        };
        for (key, e) in keys {
            if !allowed.contains(&key.as_str()) {
                let place = if section.is_empty() { String::new() } else { format!(" in [{section}]") };
                return Err(CliError::config(source, e.line, format!("unknown key `{key}`{place}")));
            }
        }
    }
    Ok(())
}

fn apply(raw: &mut Raw, doc: &Document, source: &str) -> Result<(), CliError> {
    check_known(doc, source)?;
    let r = Reader { doc, source };
    macro_rules! set {
        ($field:ident, $v:expr) => {
            if let Some(v) = $v {
                raw.$field = Some(v);
            }
        };
    }
    set!(theta_min, r.real("game", "theta_min")?);
    set!(theta_max, r.real("game", "theta_max")?);
    set!(b, r.real("game", "b")?);
    set!(k, r.real("game", "k")?);
    if let Some(e) = doc.get("game", "prior.kind") {
        raw.prior = Some(match e.value.as_str() {
            "uniform" => PriorChoice::Uniform,
            "truncated_normal" => PriorChoice::TruncatedNormal,
            other => {
                return Err(CliError::config(
                    source,
                    e.line,
                    format!("`prior.kind`: expected uniform or truncated_normal, found `{other}`"),
                ))
            }
        });
    }
    set!(prior_mean, r.real("game", "prior.mean")?);
    set!(prior_sd, r.real("game", "prior.sd")?);
    set!(x, r.real("evidence", "x")?);
    set!(y, r.real("evidence", "y")?);
    set!(n_rounds, r.parse("simulation", "n_rounds", "a non-negative integer")?);
    set!(seed, r.parse("simulation", "seed", "an unsigned 64-bit integer")?);
    set!(record_trace, r.parse("simulation", "record_trace", "true or false")?);
    set!(shards, r.parse("simulation", "shards", "a positive integer")?);
    if let Some(e) = doc.get("equilibrium", "boundaries") {
        let parsed: Result<Vec<f64>, _> = e.value.split(',').map(|s| s.trim().parse::<f64>()).collect();
        raw.boundaries = Some(parsed.map_err(|_| {
            CliError::config(source, e.line, format!("`boundaries`: expected comma-separated numbers, found `{}`", e.value))
        })?);
    }
    if let Some(e) = doc.get("equilibrium", "from_report") {
        if doc.get("equilibrium", "boundaries").is_some() {
            return Err(CliError::config(source, e.line, "`from_report` and `boundaries` are mutually exclusive"));
        }
        raw.from_report = Some((PathBuf::from(&e.value), e.line));
    }
    if let Some(e) = doc.get("equilibrium", "off_path") {
        raw.off_path = Some(match e.value.as_str() {
            "truncated_prior" => OffPathRule::TruncatedPrior,
            "lowest_state" => OffPathRule::LowestState,
            other => {
                return Err(CliError::config(
                    source,
                    e.line,
                    format!("`off_path`: expected truncated_prior or lowest_state, found `{other}`"),
                ))
            }
        });
    }
    set!(kb_min, r.real("sweep", "kb_min")?);
    set!(kb_max, r.real("sweep", "kb_max")?);
    if let Some(e) = doc.get("", "output_dir") {
        raw.output_dir = Some(PathBuf::from(&e.value));
    }
    Ok(())
}

fn missing(section: &str, key: &str) -> CliError {
    CliError::Config(format!("missing field `{key}` in [{section}]"))
}

impl RunConfig {
    /// Expands the preset (command line first, then the file's), overlays the
    /// file, then the command-line overrides, and validates the result.
    pub fn load(file: Option<(&str, &str)>, overrides: &Overrides) -> Result<Self, CliError> {
        let doc = match file {
            Some((source, text)) => Some((source, Document::parse(text, source)?)),
            None => None,
        };
        let file_preset = doc.as_ref().and_then(|(_, d)| d.get("", "preset").map(|e| e.value.clone()));
        let preset_name = overrides.preset.clone().or(file_preset);
        let mut raw = match &preset_name {
            Some(name) => preset(name).ok_or_else(|| {
                CliError::Config(format!("unknown preset `{name}` (expected one of {})", PRESETS.join(", ")))
            })?,
            None => Raw::default(),
        };
        if let Some((source, doc)) = &doc {
            apply(&mut raw, doc, source)?;
        }
        if let Some((path, line)) = raw.from_report.take() {
            let source = file.map(|(s, _)| s).unwrap_or_default();
            let text = std::fs::read_to_string(&path)
                .map_err(|e| CliError::config(source, line, format!("{}: {e}", path.display())))?;
            let parsed = crate::report::parse(&text)
                .map_err(|e| CliError::config(source, line, format!("{}: {e}", path.display())))?;
            raw.boundaries = Some(parsed.boundaries);
        }
        if doc.is_none() && preset_name.is_none() {
            return Err(CliError::Config("either --config or --preset is required".into()));
        }
        if let Some(dir) = &overrides.output_dir {
            raw.output_dir = Some(dir.clone());
        }
        if let Some(seed) = overrides.seed {
            raw.seed = Some(seed);
        }
        Self::validate(raw)
    }

    fn validate(raw: Raw) -> Result<Self, CliError> {
        let theta_min = raw.theta_min.unwrap_or(0.0);
        let theta_max = raw.theta_max.unwrap_or(1.0);
        let b = raw.b.ok_or_else(|| missing("game", "b"))?;
        let k = raw.k.ok_or_else(|| missing("game", "k"))?;
        let prior = match raw.prior.unwrap_or(PriorChoice::Uniform) {
            PriorChoice::Uniform => PriorDistribution::uniform(theta_min, theta_max),
            PriorChoice::TruncatedNormal => {
                let mean = raw.prior_mean.ok_or_else(|| missing("game", "prior.mean"))?;
                let sd = raw.prior_sd.ok_or_else(|| missing("game", "prior.sd"))?;
                PriorDistribution::truncated_normal(theta_min, theta_max, mean, sd)
            }
        }
        .map_err(|e| CliError::Config(e.to_string()))?;
        let params = GameParams::new(theta_min, theta_max, b, k, prior).map_err(|e| CliError::Config(e.to_string()))?;

        let evidence = match (raw.x, raw.y) {
            (None, None) => None,
            (Some(x), Some(y)) => Some(EvidenceModel::new(x, y).map_err(|e| CliError::Config(e.to_string()))?),
            (None, Some(_)) => return Err(missing("evidence", "x")),
            (Some(_), None) => return Err(missing("evidence", "y")),
        };

        let simulation = match raw.n_rounds {
            None => None,
            Some(0) => return Err(CliError::Config("`n_rounds` must be at least 1".into())),
            Some(n) => {
                let shards = raw.shards.unwrap_or(1);
                if shards == 0 {
                    return Err(CliError::Config("`shards` must be at least 1".into()));
                }
                Some(SimulationConfig {
                    n_rounds: n,
                    seed: raw.seed.unwrap_or(0),
                    evidence,
                    record_trace: raw.record_trace.unwrap_or(false),
                    shards,
                })
            }
        };

        let kb_range = (raw.kb_min.unwrap_or(0.01), raw.kb_max.unwrap_or(100.0));
        if !(kb_range.0 > 0.0 && kb_range.0 < kb_range.1) {
            return Err(CliError::Config(format!(
                "sweep range must satisfy 0 < kb_min < kb_max, found {} and {}",
                kb_range.0, kb_range.1
            )));
        }

        Ok(RunConfig {
            params,
            evidence,
            simulation,
            boundaries: raw.boundaries,
            off_path: raw.off_path.unwrap_or_default(),
            kb_range,
            output_dir: raw.output_dir.unwrap_or_else(|| PathBuf::from("out")),
        })
    }
}
