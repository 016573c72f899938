//! Metropolis-within-Gibbs sampler over the augmented graph.
//!
//! The chain state holds the intercept and interaction, the responses of
//! the augmented nodes, and the augmented graph `G_MC`. Nodes `0..n` of
//! `G_MC` are the participants in enrolment order and nodes `n..` are the
//! augmented (unsampled) neighbours. Edges are recruitment edges, extra edges
//! between participants and augmented nodes, and intra edges between
//! participants of different waves.
//!
//! Responses on `G_MC` follow a wave-ordered probit model. Each node's
//! response has probability `Φ(ψ + ζ s)`, where `s` counts its active
//! neighbours in earlier layers. A participant's layer is its wave, and
//! augmented nodes share the final layer. Edges never join two nodes of the
//! same layer, so the model is a proper directed factorisation. It has the
//! probit conditionals in the sense that matters for recruitment data.

mod chain;
mod context;
mod kernels;
mod likelihood;

pub use chain::{run_chain, write_chain_csv, AcceptanceStats, ChainOutput, ChainSample, RunConfig};
pub use context::{ChainContext, ChainState, ComplexitySpec};
pub use kernels::{
    augmented_response_log_acceptance, extra_edges_log_acceptance, intra_edges_log_acceptance,
    psi_log_acceptance, reflect, reflected_normal_density, update_augmented_responses, update_extra_edges,
    update_intra_edges, update_psi, update_zeta, zeta_log_acceptance, KernelConfig, KernelKind, PivotMarginal,
    ResponseProposal, ScalarProposal,
};
pub use likelihood::{
    log_joint, node_log_factor, parent_activity, response_log_likelihood, sample_responses, ActivityTable,
    LogJointTerms,
};
