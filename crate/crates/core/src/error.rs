use thiserror::Error;

#[derive(Debug, Clone, PartialEq, Error)]
pub enum GameError {
    #[error("invalid parameter: {0}")]
    InvalidParams(String),

    #[error("degenerate interval [{lo}, {hi}]")]
    DegenerateInterval { lo: f64, hi: f64 },

    #[error("separating dynamics are singular at sigma = theta = {theta}")]
    Singular { theta: f64 },

    #[error("k = 0 is the cheap-talk regime: no separating strategy exists")]
    CheapTalkRegime,

    #[error("{what} = {value} lies outside [{lo}, {hi}]")]
    OutOfRange {
        what: &'static str,
        value: f64,
        lo: f64,
        hi: f64,
    },

    #[error("no pool boundary after {theta_curr} reaches the required action {required}")]
    NoFeasibleBoundary { theta_curr: f64, required: f64 },

    #[error("no partition of [{theta_b}, theta_max] into {pools} pools satisfies the connection condition")]
    Infeasible { theta_b: f64, pools: usize },

    #[error("no SLAPH equilibrium found: {0}")]
    NoEquilibriumFound(String),
}

pub type Result<T> = std::result::Result<T, GameError>;
