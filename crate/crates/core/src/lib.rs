//! Solver, verifier and simulator for a signaling game with costly deception.
//!
//! A sender observes a state θ and sends a report; a receiver picks an action.
//! Low states separate along an ODE-defined strategy, high states pool into
//! finitely many intervals. Optional binary evidence refines pooled beliefs.

pub mod error;
pub mod evidence;
pub mod game;
pub mod prior;
pub mod quadrature;
pub mod separating;
pub mod sim;
pub mod slaph;
pub mod verify;

pub use error::{GameError, Result};
pub use evidence::{
    evidence_posterior, expected_receiver_cost, pool_gain, reliability_deltas, total_gain, Evidence,
    EvidenceModel, EvidencePosterior, GainReport, PoolGain,
};
pub use game::{
    cost_action, cost_deception, cost_receiver, cost_sender, nitd_holds, pooled_action, CostBreakdown,
    GameParams, Message, SEPARATING_TAG,
};
pub use prior::{PriorDistribution, PriorKind};
pub use separating::{cutoff_state, invert_strategy, solve_separating, SeparatingSolution};
pub use sim::{play_round, simulate, write_trace_csv, Round, SimulationConfig, SimulationReport};
pub use slaph::{
    build_partition, build_slaph, receiver_equilibrium_action, sender_equilibrium_strategy, EquilibriumBranch,
    Observation, OffPathRule, Pool, SlaphEquilibrium,
};
pub use verify::{verify_equilibrium, VerificationReport};
