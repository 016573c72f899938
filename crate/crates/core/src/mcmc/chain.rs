use std::io::Write;

use rand::Rng;
use serde::{Deserialize, Serialize};

use super::context::{ChainContext, ChainState};
use super::kernels::{
    update_augmented_responses, update_extra_edges, update_intra_edges, update_psi, update_zeta, KernelConfig,
    KernelKind,
};
use super::likelihood::{log_joint, LogJointTerms};
use crate::error::{Error, Result};
use crate::graph::NodeId;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(default)]
pub struct RunConfig {
    pub iterations: usize,
    pub burn_in: usize,
    pub thin: usize,
    /// Keep the non-recruitment edges of every emitted state.
    pub retain_graphs: bool,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig { iterations: 3500, burn_in: 3000, thin: 1, retain_graphs: false }
    }
}

impl RunConfig {
    pub fn validate(&self) -> Result<()> {
        if self.iterations <= self.burn_in {
            return Err(Error::domain(format!(
                "iterations ({}) must exceed burn-in ({})",
                self.iterations, self.burn_in
            )));
        }
        if self.thin == 0 {
            return Err(Error::domain("thinning interval must be at least 1"));
        }
        Ok(())
    }

    pub fn emitted(&self) -> usize {
        (self.iterations - self.burn_in).div_ceil(self.thin)
    }
}

/// One emitted chain state.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainSample {
    pub iteration: usize,
    pub psi: f64,
    pub zeta: f64,
    /// Prevalence over every node of `G_MC`.
    pub q_mc: f64,
    pub terms: LogJointTerms,
    /// Intra and extra edges, when retained.
    pub edges: Option<Vec<(NodeId, NodeId)>>,
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct KernelTally {
    pub proposed: u64,
    pub accepted: u64,
}

impl KernelTally {
    pub fn rate(&self) -> f64 {
        if self.proposed == 0 {
            f64::NAN
        } else {
            self.accepted as f64 / self.proposed as f64
        }
    }

    fn record(&mut self, proposed: u64, accepted: u64) {
        self.proposed += proposed;
        self.accepted += accepted;
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct AcceptanceStats {
    pub psi: KernelTally,
    pub zeta: KernelTally,
    pub augmented_responses: KernelTally,
    pub extra_edges: KernelTally,
    pub intra_edges: KernelTally,
}

#[derive(Clone, Debug)]
pub struct ChainOutput {
    pub samples: Vec<ChainSample>,
    pub acceptance: AcceptanceStats,
    pub final_state: ChainState,
}

impl ChainOutput {
    pub fn prevalence_trace(&self) -> Vec<f64> {
        self.samples.iter().map(|s| s.q_mc).collect()
    }
}

fn sweep<R: Rng + ?Sized>(
    state: &mut ChainState,
    ctx: &ChainContext,
    config: &KernelConfig,
    stats: &mut AcceptanceStats,
    rng: &mut R,
) {
    for kind in &config.schedule {
        match kind {
            KernelKind::Psi => stats.psi.record(1, update_psi(state, ctx, config, rng) as u64),
            KernelKind::Zeta => stats.zeta.record(1, update_zeta(state, ctx, config, rng) as u64),
            KernelKind::AugmentedResponses => {
                if state.spec.augmented_nodes > 0 {
                    let ok = update_augmented_responses(state, ctx, config, rng);
                    stats.augmented_responses.record(1, ok as u64);
                }
            }
            KernelKind::ExtraEdges => {
                let (p, a) = update_extra_edges(state, ctx, rng);
                stats.extra_edges.record(p, a);
            }
            KernelKind::IntraEdges => {
                if state.spec.intra_edges > 0 {
                    let ok = update_intra_edges(state, ctx, rng);
                    stats.intra_edges.record(1, ok as u64);
                }
            }
        }
    }
}

fn snapshot(state: &ChainState, ctx: &ChainContext) -> Vec<(NodeId, NodeId)> {
    state.graph.edges().filter(|&(u, v)| !ctx.is_recruitment_edge(u, v)).collect()
}

/// Run `iterations` sweeps from `init`, emitting every `thin`-th state after
/// `burn_in`.
pub fn run_chain<R: Rng + ?Sized>(
    init: ChainState,
    ctx: &ChainContext,
    config: &KernelConfig,
    run: &RunConfig,
    rng: &mut R,
) -> Result<ChainOutput> {
    run.validate()?;
    config.validate()?;
    ctx.check_state(&init).map_err(Error::InvalidInput)?;
    let mut state = init;
    let mut stats = AcceptanceStats::default();
    let mut samples = Vec::with_capacity(run.emitted());
    for iteration in 0..run.iterations {
        sweep(&mut state, ctx, config, &mut stats, rng);
        if cfg!(debug_assertions) {
            if let Err(msg) = ctx.check_state(&state) {
                panic!("chain invariant violated after sweep {iteration}: {msg}\n{state:?}");
            }
        }
        if iteration >= run.burn_in && (iteration - run.burn_in) % run.thin == 0 {
            samples.push(ChainSample {
                iteration,
                psi: state.params.psi,
                zeta: state.params.zeta,
                q_mc: state.prevalence(),
                terms: log_joint(&state, ctx),
                edges: run.retain_graphs.then(|| snapshot(&state, ctx)),
            });
        }
    }
    Ok(ChainOutput { samples, acceptance: stats, final_state: state })
}

/// Write `iter, psi, zeta, q_mc` followed by the log-joint terms.
pub fn write_chain_csv<W: Write>(samples: &[ChainSample], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "iter",
        "psi",
        "zeta",
        "q_mc",
        "log_alpha_prior",
        "log_graph",
        "log_design",
        "log_param_prior",
        "log_response",
        "log_joint",
    ])?;
    for s in samples {
        let t = &s.terms;
        wtr.write_record(&[
            s.iteration.to_string(),
            s.psi.to_string(),
            s.zeta.to_string(),
            s.q_mc.to_string(),
            t.alpha_prior.to_string(),
            t.graph.to_string(),
            t.design.to_string(),
            t.param_prior.to_string(),
            t.response.to_string(),
            t.total().to_string(),
        ])?;
    }
    wtr.flush()?;
    Ok(())
}
