use rand::Rng;
use serde::{Deserialize, Serialize};

use super::context::{ChainContext, ChainState};
use crate::graph::{erdos_renyi_log_density, Graph, NodeId};
use crate::mrf::{MrfParams, ResponseVector};
use crate::special::{ln_normal_cdf, ln_normal_sf, normal_cdf};

/// Active neighbours of `v` in strictly earlier layers.
pub fn parent_activity(v: NodeId, y: &ResponseVector, graph: &Graph) -> usize {
    let layer = graph.label(v).layer();
    graph.neighbors(v).filter(|&u| graph.label(u).layer() < layer && y.is_active(u)).count()
}

/// `ln P(y_v | s)` under the probit link.
pub fn node_log_factor(active: bool, parents_active: usize, params: &MrfParams) -> f64 {
    let x = params.psi + params.zeta * parents_active as f64;
    if active {
        ln_normal_cdf(x)
    } else {
        ln_normal_sf(x)
    }
}

/// Log-likelihood of all responses on a layered graph, node by node.
pub fn response_log_likelihood(y: &ResponseVector, graph: &Graph, params: &MrfParams) -> f64 {
    (0..graph.node_count())
        .map(|v| node_log_factor(y.is_active(v), parent_activity(v, y, graph), params))
        .sum()
}

/// Draw every response of a layered graph in layer order.
pub fn sample_responses<R: Rng + ?Sized>(graph: &Graph, params: &MrfParams, rng: &mut R) -> ResponseVector {
    let mut order: Vec<NodeId> = (0..graph.node_count()).collect();
    order.sort_by_key(|&v| (graph.label(v).layer(), v));
    let mut y = ResponseVector::zeros(graph.node_count());
    for v in order {
        let p = normal_cdf(params.psi + params.zeta * parent_activity(v, &y, graph) as f64);
        y.set(v, rng.random::<f64>() < p);
    }
    y
}

/// Counts of `(response, active parents)` pairs. The response likelihood
/// depends on the parameters only through this table.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct ActivityTable {
    counts: Vec<[usize; 2]>,
}

impl ActivityTable {
    pub fn from_state(state: &ChainState) -> Self {
        let mut counts: Vec<[usize; 2]> = Vec::new();
        for v in 0..state.graph.node_count() {
            let s = parent_activity(v, &state.y, &state.graph);
            if counts.len() <= s {
                counts.resize(s + 1, [0, 0]);
            }
            counts[s][state.y.get(v) as usize] += 1;
        }
        ActivityTable { counts }
    }

    pub fn log_likelihood(&self, params: &MrfParams) -> f64 {
        self.counts
            .iter()
            .enumerate()
            .map(|(s, &[off, on])| {
                let x = params.psi + params.zeta * s as f64;
                let mut total = 0.0;
                if on > 0 {
                    total += on as f64 * ln_normal_cdf(x);
                }
                if off > 0 {
                    total += off as f64 * ln_normal_sf(x);
                }
                total
            })
            .sum()
    }

    pub fn node_count(&self) -> usize {
        self.counts.iter().map(|c| c[0] + c[1]).sum()
    }
}

/// The additive pieces of the log joint density.
#[derive(Clone, Copy, Debug, Default, PartialEq, Serialize, Deserialize)]
pub struct LogJointTerms {
    pub alpha_prior: f64,
    pub graph: f64,
    pub design: f64,
    pub param_prior: f64,
    pub response: f64,
}

impl LogJointTerms {
    pub fn total(&self) -> f64 {
        self.alpha_prior + self.graph + self.design + self.param_prior + self.response
    }
}

/// `ln p(α) + ln p(G_MC | α) + ln p(trace | G_MC) + ln p(ψ, ζ) + ln p(Y | G_MC, ψ, ζ)`.
pub fn log_joint(state: &ChainState, ctx: &ChainContext) -> LogJointTerms {
    let g = &state.graph;
    LogJointTerms {
        alpha_prior: ctx.alpha_prior.log_density(state.alpha),
        graph: erdos_renyi_log_density(g.edge_count(), g.pair_count(), state.alpha),
        design: ctx.replay().log_likelihood(g),
        param_prior: ctx.hyper.log_prior(&state.params),
        response: response_log_likelihood(&state.y, g, &state.params),
    }
}
