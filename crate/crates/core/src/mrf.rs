//! Binary Markov random field with probit-style conditionals.
//!
//! The model is the probit conditional `P(y_i = 1 | rest) =
//! Φ(ψ + ζ s_i)`, with `s_i` the number of active neighbours. On graphs whose
//! active neighbourhoods are not cliques these conditionals are not
//! mutually compatible, so the joint law is built as an auto-model: the
//! clique negpotential expansion around the all-zero reference
//!
//! ```text
//! ln p(y) - ln p(0) = Σ_{cliques C ⊆ active(y)} D_|C|,   D_c = Δ^{c-1} g(0),
//! g(s) = ln Φ(ψ + ζ s) - ln(1 - Φ(ψ + ζ s)).
//! ```
//!
//! Its exact full conditional reproduces `Φ(ψ + ζ s_i)` whenever the active
//! neighbours of `i` are pairwise adjacent, and is used for Gibbs sampling.

use log::warn;
use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::special::{beta_ln_pdf, choose, log_sum_exp, normal_cdf, probit_log_odds};

/// Components above this size trigger a warning in exact computations.
pub const ENUMERATION_WARN_NODES: usize = 20;
/// Components above this size are refused by exact computations.
pub const ENUMERATION_MAX_NODES: usize = 25;

/// Binary responses, one per node.
#[derive(Clone, Debug, Default, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub struct ResponseVector(Vec<u8>);

impl ResponseVector {
    pub fn zeros(len: usize) -> Self {
        ResponseVector(vec![0; len])
    }

    pub fn from_bits(bits: Vec<u8>) -> Result<Self> {
        if let Some(b) = bits.iter().find(|&&b| b > 1) {
            return Err(Error::InvalidInput(format!("response value {b} is not binary")));
        }
        Ok(ResponseVector(bits))
    }

    /// Bits of the low `len` binary digits of `mask`, node 0 first.
    pub fn from_mask(mask: u64, len: usize) -> Self {
        ResponseVector((0..len).map(|i| ((mask >> i) & 1) as u8).collect())
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }

    pub fn get(&self, i: usize) -> u8 {
        self.0[i]
    }

    pub fn is_active(&self, i: usize) -> bool {
        self.0[i] == 1
    }

    pub fn set(&mut self, i: usize, active: bool) {
        self.0[i] = active as u8;
    }

    pub fn as_slice(&self) -> &[u8] {
        &self.0
    }

    pub fn push(&mut self, active: bool) {
        self.0.push(active as u8);
    }

    pub fn active_count(&self) -> usize {
        self.0.iter().filter(|&&b| b == 1).count()
    }

    pub fn mean(&self) -> f64 {
        self.active_count() as f64 / self.0.len() as f64
    }
}

/// Intercept `psi` and interaction `zeta`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct MrfParams {
    pub psi: f64,
    pub zeta: f64,
}

/// Prior hyperparameters. `(psi + xi) / xi ~ Beta(nu1, nu2)` on
/// `(-xi, 0)` and `zeta / delta ~ Beta(eta1, eta2)` on `(0, delta)`.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct MrfHyper {
    pub xi: f64,
    pub delta: f64,
    pub nu1: f64,
    pub nu2: f64,
    pub eta1: f64,
    pub eta2: f64,
}

impl Default for MrfHyper {
    fn default() -> Self {
        MrfHyper { xi: 3.0, delta: 1.0, nu1: 1.0, nu2: 1.0, eta1: 1.0, eta2: 1.0 }
    }
}

impl MrfHyper {
    pub fn validate(&self) -> Result<()> {
        let all_positive = [self.xi, self.delta, self.nu1, self.nu2, self.eta1, self.eta2]
            .iter()
            .all(|v| *v > 0.0 && v.is_finite());
        if !all_positive {
            return Err(Error::domain(format!("hyperparameters must be positive and finite: {self:?}")));
        }
        Ok(())
    }

    pub fn contains(&self, params: &MrfParams) -> bool {
        params.psi > -self.xi && params.psi < 0.0 && params.zeta > 0.0 && params.zeta < self.delta
    }

    pub fn prior_mean(&self) -> MrfParams {
        MrfParams {
            psi: -self.xi + self.xi * self.nu1 / (self.nu1 + self.nu2),
            zeta: self.delta * self.eta1 / (self.eta1 + self.eta2),
        }
    }

    pub fn log_prior(&self, params: &MrfParams) -> f64 {
        psi_log_prior(params.psi, self) + zeta_log_prior(params.zeta, self)
    }
}

pub fn psi_log_prior(psi: f64, hyper: &MrfHyper) -> f64 {
    beta_ln_pdf((psi + hyper.xi) / hyper.xi, hyper.nu1, hyper.nu2) - hyper.xi.ln()
}

pub fn zeta_log_prior(zeta: f64, hyper: &MrfHyper) -> f64 {
    beta_ln_pdf(zeta / hyper.delta, hyper.eta1, hyper.eta2) - hyper.delta.ln()
}

pub fn sample_psi_prior<R: Rng + ?Sized>(hyper: &MrfHyper, rng: &mut R) -> Result<f64> {
    let beta = Beta::new(hyper.nu1, hyper.nu2).map_err(|e| Error::domain(e.to_string()))?;
    Ok(-hyper.xi + hyper.xi * beta.sample(rng))
}

pub fn sample_zeta_prior<R: Rng + ?Sized>(hyper: &MrfHyper, rng: &mut R) -> Result<f64> {
    let beta = Beta::new(hyper.eta1, hyper.eta2).map_err(|e| Error::domain(e.to_string()))?;
    Ok(hyper.delta * beta.sample(rng))
}

/// Probit conditional `Φ(ψ + ζ s)` for `s` active neighbours.
pub fn probit_conditional(params: &MrfParams, active_neighbors: usize) -> f64 {
    normal_cdf(params.psi + params.zeta * active_neighbors as f64)
}

/// Clique negpotentials `D_c`, computed on demand.
#[derive(Clone, Debug)]
pub struct CliqueWeights {
    params: MrfParams,
    log_odds: Vec<f64>,
    weights: Vec<f64>,
}

impl CliqueWeights {
    pub fn new(params: MrfParams) -> Self {
        CliqueWeights { params, log_odds: Vec::new(), weights: vec![0.0] }
    }

    pub fn params(&self) -> &MrfParams {
        &self.params
    }

    /// `D_c` for a clique of `size` nodes; zero for the empty clique.
    pub fn weight(&mut self, size: usize) -> f64 {
        while self.weights.len() <= size {
            let c = self.weights.len();
            while self.log_odds.len() < c {
                let s = self.log_odds.len();
                self.log_odds.push(probit_log_odds(self.params.psi + self.params.zeta * s as f64));
            }
            // Möbius inversion of the pivot's conditional log-odds over the
            // other c - 1 members of the clique.
            let d: f64 = (0..c)
                .map(|b| {
                    let sign = if (c - 1 - b) % 2 == 0 { 1.0 } else { -1.0 };
                    sign * choose(c - 1, b) * self.log_odds[b]
                })
                .sum();
            self.weights.push(d);
        }
        self.weights[size]
    }
}

/// Number of cliques of each size among `nodes` (index 0 counts the empty
/// clique).
pub fn clique_size_counts(graph: &Graph, nodes: &[NodeId]) -> Vec<usize> {
    fn extend(graph: &Graph, candidates: &[NodeId], depth: usize, counts: &mut Vec<usize>) {
        if counts.len() <= depth {
            counts.push(0);
        }
        counts[depth] += 1;
        for (i, &v) in candidates.iter().enumerate() {
            let next: Vec<NodeId> = candidates[i + 1..].iter().copied().filter(|&w| graph.has_edge(v, w)).collect();
            extend(graph, &next, depth + 1, counts);
        }
    }
    let mut counts = Vec::new();
    extend(graph, nodes, 0, &mut counts);
    counts
}

/// Visit every non-empty clique of `graph` as a bit mask with its size.
/// Requires at most 64 nodes.
fn for_each_clique_mask(graph: &Graph, mut visit: impl FnMut(u64, usize)) {
    fn extend(graph: &Graph, candidates: &[NodeId], mask: u64, size: usize, visit: &mut dyn FnMut(u64, usize)) {
        for (i, &v) in candidates.iter().enumerate() {
            let next: Vec<NodeId> = candidates[i + 1..].iter().copied().filter(|&w| graph.has_edge(v, w)).collect();
            let m = mask | (1 << v);
            visit(m, size + 1);
            extend(graph, &next, m, size + 1, visit);
        }
    }
    let all: Vec<NodeId> = (0..graph.node_count()).collect();
    extend(graph, &all, 0, 0, &mut visit);
}

/// Exact conditional log-odds of the clique-expansion joint.
#[derive(Clone, Debug)]
pub struct ConditionalKernel {
    weights: CliqueWeights,
}

impl ConditionalKernel {
    pub fn new(params: MrfParams) -> Self {
        ConditionalKernel { weights: CliqueWeights::new(params) }
    }

    /// `ln P(y_i = 1 | rest) - ln P(y_i = 0 | rest)`.
    pub fn log_odds(&mut self, i: NodeId, y: &ResponseVector, graph: &Graph) -> f64 {
        let active: Vec<NodeId> = graph.neighbors(i).filter(|&v| y.is_active(v)).collect();
        clique_size_counts(graph, &active)
            .into_iter()
            .enumerate()
            .map(|(size, count)| count as f64 * self.weights.weight(size + 1))
            .sum()
    }

    pub fn prob_active(&mut self, i: NodeId, y: &ResponseVector, graph: &Graph) -> f64 {
        logistic(self.log_odds(i, y, graph))
    }
}

fn logistic(x: f64) -> f64 {
    if x >= 0.0 {
        1.0 / (1.0 + (-x).exp())
    } else {
        let e = x.exp();
        e / (1.0 + e)
    }
}

/// `P(y_i = 1 | y_{-i})` under the joint law.
pub fn full_conditional(i: NodeId, y: &ResponseVector, graph: &Graph, params: &MrfParams) -> f64 {
    ConditionalKernel::new(*params).prob_active(i, y, graph)
}

/// One systematic-scan Gibbs sweep over all nodes, in place.
pub fn gibbs_sweep<R: Rng + ?Sized>(y: &mut ResponseVector, graph: &Graph, params: &MrfParams, rng: &mut R) {
    gibbs_sweeps(y, graph, params, 1, rng);
}

pub fn gibbs_sweeps<R: Rng + ?Sized>(
    y: &mut ResponseVector,
    graph: &Graph,
    params: &MrfParams,
    sweeps: usize,
    rng: &mut R,
) {
    let mut kernel = ConditionalKernel::new(*params);
    for _ in 0..sweeps {
        for i in 0..graph.node_count() {
            let p = kernel.prob_active(i, y, graph);
            y.set(i, rng.random::<f64>() < p);
        }
    }
}

fn check_capacity(size: usize) -> Result<()> {
    if size > ENUMERATION_MAX_NODES {
        return Err(Error::Capacity { size, limit: ENUMERATION_MAX_NODES });
    }
    if size > ENUMERATION_WARN_NODES {
        warn!("exact enumeration over a {size}-node component");
    }
    Ok(())
}

/// Negpotential `Q(ω)` for every configuration `ω` of a small graph, given
/// per-clique contributions.
fn negpotential_table(graph: &Graph, mut contribution: impl FnMut(usize) -> f64) -> Vec<f64> {
    let k = graph.node_count();
    let mut table = vec![0.0; 1 << k];
    for_each_clique_mask(graph, |mask, size| table[mask as usize] = contribution(size));
    // Subset-sum transform: Q(ω) = Σ_{cliques C ⊆ ω} contribution(C).
    for bit in 0..k {
        for mask in 0..table.len() {
            if mask & (1 << bit) != 0 {
                table[mask] += table[mask ^ (1 << bit)];
            }
        }
    }
    table
}

/// Exact `ln p(y)` of the clique-expansion joint, computed component by
/// component. Components may have at most [`ENUMERATION_MAX_NODES`] nodes.
pub fn kc_log_joint(y: &ResponseVector, graph: &Graph, params: &MrfParams) -> Result<f64> {
    if y.len() != graph.node_count() {
        return Err(Error::InvalidInput(format!("{} responses for {} nodes", y.len(), graph.node_count())));
    }
    let mut weights = CliqueWeights::new(*params);
    let mut total = 0.0;
    for comp in graph.connected_components() {
        check_capacity(comp.len())?;
        let sub = graph.induced_subgraph(&comp);
        let table = negpotential_table(&sub, |size| weights.weight(size));
        let state = comp.iter().enumerate().filter(|&(_, &v)| y.is_active(v)).fold(0usize, |m, (i, _)| m | (1 << i));
        total += table[state] - log_sum_exp(&table);
    }
    Ok(total)
}

/// Negpotential function of the node set `nodes` at configuration `y`, by
/// Möbius inversion of the conditional log-probability ratios of the first
/// node. Non-zero only when every node in the set is active and the set is
/// a clique.
pub fn h_function(nodes: &[NodeId], y: &ResponseVector, graph: &Graph, params: &MrfParams) -> f64 {
    let Some((&pivot, rest)) = nodes.split_first() else {
        return 0.0;
    };
    if !y.is_active(pivot) {
        return 0.0;
    }
    assert!(rest.len() < 64, "too many nodes for a negpotential");
    let mut kernel = ConditionalKernel::new(*params);
    // Evaluate at y restricted to the subset, reference elsewhere.
    let mut config = ResponseVector::zeros(graph.node_count());
    let mut total = 0.0;
    for subset in 0u64..(1 << rest.len()) {
        for (b, &v) in rest.iter().enumerate() {
            config.set(v, subset & (1 << b) != 0 && y.is_active(v));
        }
        let sign = if (rest.len() as u32 - subset.count_ones()) % 2 == 0 { 1.0 } else { -1.0 };
        total += sign * kernel.log_odds(pivot, &config, graph);
    }
    total
}

/// `ln p(y_a) - ln p(y_b)` by telescoping single-site conditionals,
/// changing one coordinate at a time from `y_b` towards `y_a`.
pub fn brook_log_ratio(y_a: &ResponseVector, y_b: &ResponseVector, graph: &Graph, params: &MrfParams) -> f64 {
    assert_eq!(y_a.len(), y_b.len());
    let mut kernel = ConditionalKernel::new(*params);
    let mut y = y_b.clone();
    let mut total = 0.0;
    for k in 0..y.len() {
        if y_a.get(k) == y_b.get(k) {
            continue;
        }
        let lo = kernel.log_odds(k, &y, graph);
        total += if y_a.is_active(k) { lo } else { -lo };
        y.set(k, y_a.is_active(k));
    }
    total
}

/// `P(y_i = 0)` under the joint law on the star subgraph induced by `i` and
/// its neighbours.
pub fn star_marginal_zero(i: NodeId, graph: &Graph, params: &MrfParams) -> Result<f64> {
    let neighbors: Vec<NodeId> = graph.neighbors(i).collect();
    let around = graph.induced_subgraph(&neighbors);
    let mut weights = CliqueWeights::new(*params);
    let mut log_z0 = 0.0;
    let mut log_z1 = weights.weight(1);
    for comp in around.connected_components() {
        check_capacity(comp.len() + 1)?;
        let sub = around.induced_subgraph(&comp);
        let off = negpotential_table(&sub, |size| weights.weight(size));
        // With the centre active every clique T of the neighbours also forms
        // the clique T ∪ {i}.
        let on = negpotential_table(&sub, |size| weights.weight(size) + weights.weight(size + 1));
        log_z0 += log_sum_exp(&off);
        log_z1 += log_sum_exp(&on);
    }
    Ok(logistic(log_z0 - log_z1))
}
