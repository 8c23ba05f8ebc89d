//! Prior distributions over the state interval.
//!
//! The uniform prior is handled in closed form. Any other strictly positive
//! density is normalized and integrated with composite Gauss–Legendre
//! quadrature; its CDF is tabulated once so that inverse-CDF sampling stays
//! cheap.

use std::fmt;
use std::sync::Arc;

use crate::error::{GameError, Result};
use crate::quadrature::GaussLegendre;

pub const DEFAULT_QUADRATURE_NODES: usize = 256;

const CDF_CELLS: usize = 1024;
const CELL_NODES: usize = 24;

type Density = Arc<dyn Fn(f64) -> f64 + Send + Sync>;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PriorKind {
    Uniform,
    TruncatedCustom,
}

#[derive(Clone)]
pub struct PriorDistribution {
    kind: PriorKind,
    lo: f64,
    hi: f64,
    /// Unnormalized density; `None` for the uniform prior.
    density: Option<Density>,
    norm: f64,
    rule: Arc<GaussLegendre>,
    cell_rule: Arc<GaussLegendre>,
    /// Normalized CDF at the cell edges `lo + i * (hi - lo) / CDF_CELLS`.
    cdf_table: Arc<Vec<f64>>,
    label: String,
}

impl fmt::Debug for PriorDistribution {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("PriorDistribution")
            .field("kind", &self.kind)
            .field("label", &self.label)
            .field("support", &(self.lo, self.hi))
            .field("quadrature_nodes", &self.rule.len())
            .finish()
    }
}

fn check_support(lo: f64, hi: f64) -> Result<()> {
    if !(lo.is_finite() && hi.is_finite()) || lo >= hi {
        return Err(GameError::InvalidParams(format!(
            "prior support [{lo}, {hi}] must be a finite, non-empty interval"
        )));
    }
    Ok(())
}

impl PriorDistribution {
    pub fn uniform(lo: f64, hi: f64) -> Result<Self> {
        check_support(lo, hi)?;
        Ok(Self {
            kind: PriorKind::Uniform,
            lo,
            hi,
            density: None,
            norm: hi - lo,
            rule: Arc::new(GaussLegendre::new(DEFAULT_QUADRATURE_NODES)),
            cell_rule: Arc::new(GaussLegendre::new(CELL_NODES)),
            cdf_table: Arc::new(Vec::new()),
            label: "uniform".to_string(),
        })
    }

    /// A prior proportional to `density` on `[lo, hi]`.
    ///
    /// The density must be finite and strictly positive on the whole support.
    pub fn from_density<F>(lo: f64, hi: f64, quadrature_nodes: usize, density: F) -> Result<Self>
    where
        F: Fn(f64) -> f64 + Send + Sync + 'static,
    {
        check_support(lo, hi)?;
        if quadrature_nodes < 2 {
            return Err(GameError::InvalidParams(
                "quadrature_nodes must be at least 2".into(),
            ));
        }
        let probe = 4 * CDF_CELLS;
        for i in 0..=probe {
            let x = lo + (hi - lo) * i as f64 / probe as f64;
            let v = density(x);
            if !(v.is_finite() && v > 0.0) {
                return Err(GameError::InvalidParams(format!(
                    "prior density must be strictly positive on the support; f({x}) = {v}"
                )));
            }
        }
        let cell_rule = GaussLegendre::new(CELL_NODES);
        let width = (hi - lo) / CDF_CELLS as f64;
        let mut table = Vec::with_capacity(CDF_CELLS + 1);
        let mut acc = 0.0;
        table.push(0.0);
        for i in 0..CDF_CELLS {
            let a = lo + width * i as f64;
            acc += cell_rule.integrate(a, a + width, &density);
            table.push(acc);
        }
        let norm = acc;
        for v in table.iter_mut() {
            *v /= norm;
        }
        *table.last_mut().unwrap() = 1.0;
        Ok(Self {
            kind: PriorKind::TruncatedCustom,
            lo,
            hi,
            density: Some(Arc::new(density)),
            norm,
            rule: Arc::new(GaussLegendre::new(quadrature_nodes)),
            cell_rule: Arc::new(cell_rule),
            cdf_table: Arc::new(table),
            label: "custom".to_string(),
        })
    }

    /// Normal(mean, sd) truncated to `[lo, hi]`.
    pub fn truncated_normal(lo: f64, hi: f64, mean: f64, sd: f64) -> Result<Self> {
        if !(sd.is_finite() && sd > 0.0 && mean.is_finite()) {
            return Err(GameError::InvalidParams(format!(
                "truncated normal needs finite mean and sd > 0 (got mean={mean}, sd={sd})"
            )));
        }
        let mut p = Self::from_density(lo, hi, DEFAULT_QUADRATURE_NODES, move |x| {
            let z = (x - mean) / sd;
            (-0.5 * z * z).exp()
        })?;
        p.label = format!("truncated_normal(mean={mean}, sd={sd})");
        Ok(p)
    }

    pub fn kind(&self) -> PriorKind {
        self.kind
    }

    pub fn label(&self) -> &str {
        &self.label
    }

    pub fn support(&self) -> (f64, f64) {
        (self.lo, self.hi)
    }

    pub fn quadrature_nodes(&self) -> usize {
        self.rule.len()
    }

    pub fn pdf(&self, x: f64) -> f64 {
        if x < self.lo || x > self.hi {
            return 0.0;
        }
        match &self.density {
            None => 1.0 / self.norm,
            Some(f) => f(x) / self.norm,
        }
    }

    pub fn cdf(&self, x: f64) -> f64 {
        if x <= self.lo {
            return 0.0;
        }
        if x >= self.hi {
            return 1.0;
        }
        match &self.density {
            None => (x - self.lo) / self.norm,
            Some(f) => {
                let width = (self.hi - self.lo) / CDF_CELLS as f64;
                let cell = (((x - self.lo) / width) as usize).min(CDF_CELLS - 1);
                let a = self.lo + width * cell as f64;
                let partial = self.cell_rule.integrate(a, x, |t| f(t)) / self.norm;
                (self.cdf_table[cell] + partial).clamp(0.0, 1.0)
            }
        }
    }

    /// Inverse CDF.
    pub fn quantile(&self, u: f64) -> f64 {
        let u = u.clamp(0.0, 1.0);
        if self.density.is_none() {
            return self.lo + u * (self.hi - self.lo);
        }
        let table = &self.cdf_table;
        let cell = table.partition_point(|&c| c <= u).clamp(1, CDF_CELLS) - 1;
        let width = (self.hi - self.lo) / CDF_CELLS as f64;
        let mut a = self.lo + width * cell as f64;
        let mut b = a + width;
        let mut x = a + width * (u - table[cell]) / (table[cell + 1] - table[cell]).max(1e-300);
        // safeguarded Newton inside the bracketing cell
        for _ in 0..50 {
            let g = self.cdf(x) - u;
            if g.abs() < 1e-14 {
                break;
            }
            if g > 0.0 {
                b = x;
            } else {
                a = x;
            }
            let step = g / self.pdf(x);
            let next = x - step;
            x = if next > a && next < b { next } else { 0.5 * (a + b) };
            if b - a < 1e-15 * (self.hi - self.lo) {
                break;
            }
        }
        x
    }

    /// ∫_a^b g(θ) f(θ) dθ with the normalized density.
    pub fn integrate<G: Fn(f64) -> f64>(&self, a: f64, b: f64, g: G) -> f64 {
        match &self.density {
            None => self.rule.integrate(a, b, g) / self.norm,
            Some(f) => self.rule.integrate(a, b, |t| g(t) * f(t)) / self.norm,
        }
    }

    /// Prior probability of `[a, b]`.
    pub fn mass(&self, a: f64, b: f64) -> f64 {
        match &self.density {
            None => (b - a) / self.norm,
            Some(_) => self.integrate(a, b, |_| 1.0),
        }
    }

    /// Mean and variance of θ conditional on θ ∈ [a, b].
    pub fn conditional_moments(&self, a: f64, b: f64) -> (f64, f64) {
        match &self.density {
            None => (0.5 * (a + b), (b - a) * (b - a) / 12.0),
            Some(_) => {
                let m = self.mass(a, b);
                let mean = self.integrate(a, b, |t| t) / m;
                let var = self.integrate(a, b, |t| (t - mean) * (t - mean)) / m;
                (mean, var)
            }
        }
    }
}
