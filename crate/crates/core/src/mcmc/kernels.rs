use std::collections::{BTreeMap, BTreeSet};
use std::f64::consts::PI;

use log::warn;
use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use super::context::{ChainContext, ChainState};
use super::likelihood::{node_log_factor, parent_activity, ActivityTable};
use crate::error::{Error, Result};
use crate::graph::NodeId;
use crate::mrf::{psi_log_prior, sample_psi_prior, sample_zeta_prior, star_marginal_zero, zeta_log_prior, MrfParams};
use crate::special::{bernoulli_ln, ln_normal_sf, log_add_exp, normal_cdf};

#[derive(Clone, Copy, Debug, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum KernelKind {
    Psi,
    Zeta,
    AugmentedResponses,
    ExtraEdges,
    IntraEdges,
}

impl KernelKind {
    pub const ALL: [KernelKind; 5] = [
        KernelKind::Psi,
        KernelKind::Zeta,
        KernelKind::AugmentedResponses,
        KernelKind::ExtraEdges,
        KernelKind::IntraEdges,
    ];
}

/// Mixture proposal for a bounded scalar: a reflected Gaussian random walk,
/// an independent draw from the prior, and an independent uniform draw.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ScalarProposal {
    pub random_walk: f64,
    pub prior: f64,
    pub uniform: f64,
    /// Random-walk scale as a fraction of the support width.
    pub step_fraction: f64,
}

impl Default for ScalarProposal {
    fn default() -> Self {
        ScalarProposal { random_walk: 0.5, prior: 0.25, uniform: 0.25, step_fraction: 0.05 }
    }
}

fn check_weights(name: &str, weights: &[f64]) -> Result<()> {
    if weights.iter().any(|w| !(*w > 0.0)) || (weights.iter().sum::<f64>() - 1.0).abs() > 1e-9 {
        return Err(Error::domain(format!("{name} mixture weights {weights:?} must be positive and sum to 1")));
    }
    Ok(())
}

/// Fold `x` into `[lo, hi]` by reflection at both ends.
pub fn reflect(x: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let t = (x - lo).rem_euclid(2.0 * width);
    lo + if t > width { 2.0 * width - t } else { t }
}

/// Density at `to` of a Gaussian step of scale `sigma` from `from`, folded
/// into `[lo, hi]`. Symmetric in `to` and `from`.
pub fn reflected_normal_density(to: f64, from: f64, sigma: f64, lo: f64, hi: f64) -> f64 {
    let width = hi - lo;
    let period = 2.0 * width;
    let reach = (8.0 * sigma / period).ceil() as i64 + 1;
    let phi = |z: f64| (-0.5 * z * z).exp() / (sigma * (2.0 * PI).sqrt());
    (-reach..=reach)
        .map(|k| {
            let shift = k as f64 * period;
            phi((to + shift - from) / sigma) + phi((2.0 * lo - to + shift - from) / sigma)
        })
        .sum()
}

impl ScalarProposal {
    pub fn validate(&self) -> Result<()> {
        check_weights("scalar proposal", &[self.random_walk, self.prior, self.uniform])?;
        if !(self.step_fraction > 0.0) {
            return Err(Error::domain("random-walk step must be positive"));
        }
        Ok(())
    }

    fn sample<R: Rng + ?Sized>(
        &self,
        current: f64,
        lo: f64,
        hi: f64,
        prior_draw: impl FnOnce(&mut R) -> f64,
        rng: &mut R,
    ) -> f64 {
        let u: f64 = rng.random();
        if u < self.random_walk {
            let step: f64 = rng.sample(rand_distr::StandardNormal);
            reflect(current + self.step_fraction * (hi - lo) * step, lo, hi)
        } else if u < self.random_walk + self.prior {
            prior_draw(rng)
        } else {
            lo + (hi - lo) * rng.random::<f64>()
        }
    }

    /// `ln q(to | from)` of the full mixture.
    fn log_density(&self, to: f64, from: f64, lo: f64, hi: f64, prior_log_density: impl Fn(f64) -> f64) -> f64 {
        let sigma = self.step_fraction * (hi - lo);
        (self.random_walk * reflected_normal_density(to, from, sigma, lo, hi)
            + self.prior * prior_log_density(to).exp()
            + self.uniform / (hi - lo))
            .ln()
    }
}

/// Independence proposal for the augmented responses: a mixture of
/// Bernoulli draws at the observed prevalence and draws from each node's
/// exact conditional.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct ResponseProposal {
    pub observed_prevalence: f64,
    pub conditional: f64,
}

impl Default for ResponseProposal {
    fn default() -> Self {
        ResponseProposal { observed_prevalence: 0.5, conditional: 0.5 }
    }
}

/// How the intercept update evaluates the pivot's probability of a zero
/// response.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PivotMarginal {
    /// Exact marginal under the response model. The pivot is a seed, so this
    /// is `1 - Φ(ψ)` and the update is exact.
    #[default]
    Model,
    /// Marginal of the clique-expansion field restricted to the pivot's star.
    /// An approximation, kept for comparison.
    KcStar,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct KernelConfig {
    pub psi: ScalarProposal,
    pub zeta: ScalarProposal,
    pub responses: ResponseProposal,
    pub pivot: PivotMarginal,
    /// Kernels applied, in order, once per sweep.
    pub schedule: Vec<KernelKind>,
}

impl Default for KernelConfig {
    fn default() -> Self {
        KernelConfig {
            psi: ScalarProposal::default(),
            zeta: ScalarProposal::default(),
            responses: ResponseProposal::default(),
            pivot: PivotMarginal::Model,
            schedule: KernelKind::ALL.to_vec(),
        }
    }
}

impl KernelConfig {
    pub fn validate(&self) -> Result<()> {
        self.psi.validate()?;
        self.zeta.validate()?;
        check_weights("response proposal", &[self.responses.observed_prevalence, self.responses.conditional])
    }
}

const PIVOT: NodeId = 0;

/// Log of the pivot's zero-response probability ratio between two parameter
/// values, `ln p(y_1 = 0 | to) - ln p(y_1 = 0 | from)`.
fn log_pivot_ratio(state: &ChainState, pivot: PivotMarginal, to: &MrfParams, from: &MrfParams) -> f64 {
    match pivot {
        PivotMarginal::Model => ln_normal_sf(to.psi) - ln_normal_sf(from.psi),
        PivotMarginal::KcStar => {
            match (star_marginal_zero(PIVOT, &state.graph, to), star_marginal_zero(PIVOT, &state.graph, from)) {
                (Ok(a), Ok(b)) => a.ln() - b.ln(),
                (Err(e), _) | (_, Err(e)) => {
                    warn!("star marginal unavailable ({e}); rejecting the move");
                    f64::NAN
                }
            }
        }
    }
}

/// Response log-ratio between two parameter values assembled from the
/// quotient `ln p(Y) - ln p(0)` and the reference ratio `Λ`.
fn response_ratio(state: &ChainState, config: &KernelConfig, to: &MrfParams, from: &MrfParams) -> f64 {
    let table = ActivityTable::from_state(state);
    let nodes = table.node_count() as f64;
    let quotient = |p: &MrfParams| table.log_likelihood(p) - nodes * ln_normal_sf(p.psi);
    // ln Λ: the reference configuration factorises into N - 1 roots-or-not
    // terms times the pivot's marginal.
    let log_lambda =
        (nodes - 1.0) * (ln_normal_sf(to.psi) - ln_normal_sf(from.psi)) + log_pivot_ratio(state, config.pivot, to, from);
    quotient(to) - quotient(from) + log_lambda
}

/// Log acceptance ratio for moving the intercept to `proposed`.
pub fn psi_log_acceptance(state: &ChainState, ctx: &ChainContext, config: &KernelConfig, proposed: f64) -> f64 {
    let hyper = &ctx.hyper;
    let (lo, hi) = (-hyper.xi, 0.0);
    if !(proposed > lo && proposed < hi) {
        return f64::NEG_INFINITY;
    }
    let current = state.params.psi;
    let prior = |x: f64| psi_log_prior(x, hyper);
    let to = MrfParams { psi: proposed, ..state.params };
    prior(proposed) - prior(current) + config.psi.log_density(current, proposed, lo, hi, prior)
        - config.psi.log_density(proposed, current, lo, hi, prior)
        + response_ratio(state, config, &to, &state.params)
}

/// Log acceptance ratio for moving the interaction to `proposed`.
pub fn zeta_log_acceptance(state: &ChainState, ctx: &ChainContext, config: &KernelConfig, proposed: f64) -> f64 {
    let hyper = &ctx.hyper;
    let (lo, hi) = (0.0, hyper.delta);
    if !(proposed > lo && proposed < hi) {
        return f64::NEG_INFINITY;
    }
    let current = state.params.zeta;
    let prior = |x: f64| zeta_log_prior(x, hyper);
    let to = MrfParams { zeta: proposed, ..state.params };
    prior(proposed) - prior(current) + config.zeta.log_density(current, proposed, lo, hi, prior)
        - config.zeta.log_density(proposed, current, lo, hi, prior)
        + response_ratio(state, config, &to, &state.params)
}

fn accept<R: Rng + ?Sized>(log_ratio: f64, rng: &mut R) -> bool {
    // NaN compares false and is rejected.
    log_ratio >= 0.0 || rng.random::<f64>().ln() < log_ratio
}

pub fn update_psi<R: Rng + ?Sized>(state: &mut ChainState, ctx: &ChainContext, config: &KernelConfig, rng: &mut R) -> bool {
    let hyper = ctx.hyper;
    let proposed = config.psi.sample(
        state.params.psi,
        -hyper.xi,
        0.0,
        |r| sample_psi_prior(&hyper, r).expect("validated hyperparameters"),
        rng,
    );
    let ratio = psi_log_acceptance(state, ctx, config, proposed);
    let accepted = accept(ratio, rng);
    if accepted {
        state.params.psi = proposed;
    }
    accepted
}

pub fn update_zeta<R: Rng + ?Sized>(state: &mut ChainState, ctx: &ChainContext, config: &KernelConfig, rng: &mut R) -> bool {
    let hyper = ctx.hyper;
    let proposed = config.zeta.sample(
        state.params.zeta,
        0.0,
        hyper.delta,
        |r| sample_zeta_prior(&hyper, r).expect("validated hyperparameters"),
        rng,
    );
    let ratio = zeta_log_acceptance(state, ctx, config, proposed);
    let accepted = accept(ratio, rng);
    if accepted {
        state.params.zeta = proposed;
    }
    accepted
}

fn augmented_range(state: &ChainState) -> std::ops::Range<NodeId> {
    let total = state.graph.node_count();
    total - state.spec.augmented_nodes..total
}

/// Conditional probability of an active response for each augmented node.
fn augmented_conditionals(state: &ChainState) -> Vec<f64> {
    augmented_range(state)
        .map(|k| {
            let s = parent_activity(k, &state.y, &state.graph);
            normal_cdf(state.params.psi + state.params.zeta * s as f64)
        })
        .collect()
}

fn response_proposal_log_density(responses: &[u8], conditionals: &[f64], prevalence: f64, weights: &ResponseProposal) -> f64 {
    let flat: f64 = responses.iter().map(|&b| bernoulli_ln(b == 1, prevalence)).sum();
    let exact: f64 = responses.iter().zip(conditionals).map(|(&b, &p)| bernoulli_ln(b == 1, p)).sum();
    log_add_exp(weights.observed_prevalence.ln() + flat, weights.conditional.ln() + exact)
}

/// Log acceptance ratio for replacing the augmented responses.
pub fn augmented_response_log_acceptance(
    state: &ChainState,
    ctx: &ChainContext,
    config: &KernelConfig,
    proposed: &[u8],
) -> f64 {
    let current = state.augmented_responses();
    assert_eq!(proposed.len(), current.len());
    // Augmented nodes are in the last layer: only their own factors change,
    // and their conditionals do not depend on each other.
    let conditionals = augmented_conditionals(state);
    let target: f64 = proposed
        .iter()
        .zip(current)
        .zip(&conditionals)
        .map(|((&new, &old), &p)| bernoulli_ln(new == 1, p) - bernoulli_ln(old == 1, p))
        .sum();
    let prevalence = ctx.observed_mean();
    target + response_proposal_log_density(current, &conditionals, prevalence, &config.responses)
        - response_proposal_log_density(proposed, &conditionals, prevalence, &config.responses)
}

pub fn update_augmented_responses<R: Rng + ?Sized>(
    state: &mut ChainState,
    ctx: &ChainContext,
    config: &KernelConfig,
    rng: &mut R,
) -> bool {
    if state.spec.augmented_nodes == 0 {
        return true;
    }
    let from_conditional = rng.random::<f64>() < config.responses.conditional;
    let proposed: Vec<u8> = if from_conditional {
        augmented_conditionals(state).iter().map(|&p| (rng.random::<f64>() < p) as u8).collect()
    } else {
        let p = ctx.observed_mean();
        (0..state.spec.augmented_nodes).map(|_| (rng.random::<f64>() < p) as u8).collect()
    };
    let ratio = augmented_response_log_acceptance(state, ctx, config, &proposed);
    let accepted = accept(ratio, rng);
    if accepted {
        for (k, b) in augmented_range(state).zip(proposed) {
            state.y.set(k, b == 1);
        }
    }
    accepted
}

/// Design log-ratio for changing the number of unsampled neighbours seen by
/// some allocations.
fn design_delta(state: &ChainState, ctx: &ChainContext, changes: &BTreeMap<NodeId, i64>) -> f64 {
    let replay = ctx.replay();
    changes
        .iter()
        .filter(|(_, &d)| d != 0)
        .filter_map(|(&x, &d)| replay.allocation(x).map(|a| (a, d)))
        .map(|(a, d)| {
            let before = replay.available(a, &state.graph);
            let after = (before as i64 + d) as usize;
            replay.log_factor(a, after) - replay.log_factor(a, before)
        })
        .sum()
}

/// Log acceptance ratio for re-anchoring augmented node `node` to the
/// participants in `proposed`.
pub fn extra_edges_log_acceptance(state: &ChainState, ctx: &ChainContext, node: NodeId, proposed: &[NodeId]) -> f64 {
    let graph = &state.graph;
    let old: BTreeSet<NodeId> = graph.neighbors(node).collect();
    let new: BTreeSet<NodeId> = proposed.iter().copied().collect();
    let active = |set: &BTreeSet<NodeId>| set.iter().filter(|&&v| state.y.is_active(v)).count();
    let y_k = state.y.is_active(node);
    let response = node_log_factor(y_k, active(&new), &state.params) - node_log_factor(y_k, active(&old), &state.params);
    let mut changes: BTreeMap<NodeId, i64> = BTreeMap::new();
    for &v in old.difference(&new) {
        *changes.entry(v).or_default() -= 1;
    }
    for &v in new.difference(&old) {
        *changes.entry(v).or_default() += 1;
    }
    // Same edge count, so the graph prior cancels; the proposal is symmetric.
    response + design_delta(state, ctx, &changes)
}

pub fn update_extra_edges<R: Rng + ?Sized>(state: &mut ChainState, ctx: &ChainContext, rng: &mut R) -> (u64, u64) {
    let anchors = ctx.anchors();
    let mut accepted = 0;
    let range = augmented_range(state);
    let proposals = range.len() as u64;
    for k in range {
        let h = state.graph.degree(k);
        let proposed: Vec<NodeId> = index::sample(rng, anchors.len(), h).into_iter().map(|i| anchors[i]).collect();
        let ratio = extra_edges_log_acceptance(state, ctx, k, &proposed);
        if accept(ratio, rng) {
            accepted += 1;
            let old: Vec<NodeId> = state.graph.neighbors(k).collect();
            for v in old {
                state.graph.remove_edge(k, v);
            }
            for v in proposed {
                state.graph.insert_edge(k, v);
            }
        }
    }
    (proposals, accepted)
}

/// Log acceptance ratio for replacing every intra edge by `proposed`.
pub fn intra_edges_log_acceptance(state: &ChainState, ctx: &ChainContext, proposed: &[(NodeId, NodeId)]) -> f64 {
    let new: BTreeSet<(NodeId, NodeId)> = proposed.iter().map(|&(u, v)| if u < v { (u, v) } else { (v, u) }).collect();
    let removed: Vec<(NodeId, NodeId)> = state.intra.difference(&new).copied().collect();
    let added: Vec<(NodeId, NodeId)> = new.difference(&state.intra).copied().collect();

    // Parent counts change only at the later-wave endpoint of each edge.
    let mut parent_shift: BTreeMap<NodeId, i64> = BTreeMap::new();
    let mut design_changes: BTreeMap<NodeId, i64> = BTreeMap::new();
    let replay = ctx.replay();
    for (edges, sign) in [(&removed, -1i64), (&added, 1i64)] {
        for &(u, v) in edges {
            let (early, late) = if ctx.wave(u) < ctx.wave(v) { (u, v) } else { (v, u) };
            if state.y.is_active(early) {
                *parent_shift.entry(late).or_default() += sign;
            }
            for (a, b) in [(u, v), (v, u)] {
                if replay.unsampled_at_allocation(a, b) {
                    *design_changes.entry(a).or_default() += sign;
                }
            }
        }
    }
    let response: f64 = parent_shift
        .iter()
        .filter(|(_, &d)| d != 0)
        .map(|(&v, &d)| {
            let s = parent_activity(v, &state.y, &state.graph);
            let active = state.y.is_active(v);
            node_log_factor(active, (s as i64 + d) as usize, &state.params) - node_log_factor(active, s, &state.params)
        })
        .sum();
    response + design_delta(state, ctx, &design_changes)
}

pub fn update_intra_edges<R: Rng + ?Sized>(state: &mut ChainState, ctx: &ChainContext, rng: &mut R) -> bool {
    let pairs = ctx.intra_pairs();
    let proposed: Vec<(NodeId, NodeId)> =
        index::sample(rng, pairs.len(), state.spec.intra_edges).into_iter().map(|i| pairs[i]).collect();
    let ratio = intra_edges_log_acceptance(state, ctx, &proposed);
    let accepted = accept(ratio, rng);
    if accepted {
        for &(u, v) in &state.intra {
            state.graph.remove_edge(u, v);
        }
        state.intra = proposed.into_iter().collect();
        for &(u, v) in &state.intra {
            state.graph.insert_edge(u, v);
        }
    }
    accepted
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn reflection_stays_inside() {
        assert_eq!(reflect(0.5, 0.0, 1.0), 0.5);
        assert!((reflect(1.2, 0.0, 1.0) - 0.8).abs() < 1e-15);
        assert!((reflect(-0.3, 0.0, 1.0) - 0.3).abs() < 1e-15);
        assert!((reflect(2.3, 0.0, 1.0) - 0.3).abs() < 1e-12);
        assert!((reflect(-3.5, -3.0, 0.0) + 2.5).abs() < 1e-12);
    }

    #[test]
    fn reflected_density_is_symmetric_and_normalised() {
        for &sigma in &[0.05, 0.3, 2.0] {
            for &from in &[-2.9, -1.5, -0.01] {
                let cells = 20_000;
                let h = 3.0 / cells as f64;
                let mass: f64 = (0..cells)
                    .map(|i| reflected_normal_density(-3.0 + (i as f64 + 0.5) * h, from, sigma, -3.0, 0.0) * h)
                    .sum();
                assert!((mass - 1.0).abs() < 1e-6, "sigma {sigma} from {from}: {mass}");
                let a = reflected_normal_density(-0.7, from, sigma, -3.0, 0.0);
                let b = reflected_normal_density(from, -0.7, sigma, -3.0, 0.0);
                assert!((a - b).abs() < 1e-12 * a.max(1e-300));
            }
        }
    }

    #[test]
    fn weights_are_validated() {
        assert!(KernelConfig::default().validate().is_ok());
        let bad = KernelConfig { psi: ScalarProposal { random_walk: 0.7, ..Default::default() }, ..Default::default() };
        assert!(bad.validate().is_err());
    }
}
