use std::collections::BTreeSet;

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{AlphaPrior, Graph, NodeId, NodeLabel};
use crate::mrf::{MrfHyper, MrfParams, ResponseVector};
use crate::rds::{DesignReplay, RdsTrace};

/// Size of the augmented part of `G_MC`.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct ComplexitySpec {
    /// Unsampled nodes adjacent to the sample.
    pub augmented_nodes: usize,
    /// Non-recruitment edges between participants of different waves.
    pub intra_edges: usize,
    /// Edges between participants and augmented nodes.
    pub extra_edges: usize,
}

/// Everything about a chain that stays fixed: the observed trace and
/// responses, the design replay, admissible edge slots, and the priors.
#[derive(Clone, Debug)]
pub struct ChainContext {
    trace: RdsTrace,
    replay: DesignReplay,
    observed: ResponseVector,
    waves: Vec<u32>,
    anchors: Vec<NodeId>,
    intra_pairs: Vec<(NodeId, NodeId)>,
    recruitment: BTreeSet<(NodeId, NodeId)>,
    observed_mean: f64,
    pub hyper: MrfHyper,
    pub alpha_prior: AlphaPrior,
}

fn ordered(u: NodeId, v: NodeId) -> (NodeId, NodeId) {
    if u < v {
        (u, v)
    } else {
        (v, u)
    }
}

impl ChainContext {
    /// `observed` lists the participants' responses in trace order.
    pub fn new(trace: &RdsTrace, observed: ResponseVector, hyper: MrfHyper, alpha_prior: AlphaPrior) -> Result<Self> {
        hyper.validate()?;
        alpha_prior.validate()?;
        if observed.len() != trace.len() {
            return Err(Error::InvalidInput(format!(
                "{} responses for {} participants",
                observed.len(),
                trace.len()
            )));
        }
        let (trace, _) = trace.relabeled();
        let replay = DesignReplay::new(&trace)?;
        let n = trace.len();
        let waves: Vec<u32> = trace.events().iter().map(|e| e.wave).collect();
        let recruitment: BTreeSet<(NodeId, NodeId)> = trace.recruitment_edges().map(|(a, b)| ordered(a, b)).collect();
        let anchors: Vec<NodeId> = (0..n).filter(|&v| replay.admits_outside_neighbor(v)).collect();
        let mut intra_pairs = Vec::new();
        for u in 0..n {
            for v in u + 1..n {
                if waves[u] != waves[v] && !recruitment.contains(&(u, v)) && replay.admits_inside_edge(u, v) {
                    intra_pairs.push((u, v));
                }
            }
        }
        let observed_mean = observed.mean();
        Ok(ChainContext {
            trace,
            replay,
            observed,
            waves,
            anchors,
            intra_pairs,
            recruitment,
            observed_mean,
            hyper,
            alpha_prior,
        })
    }

    pub fn trace(&self) -> &RdsTrace {
        &self.trace
    }

    pub fn replay(&self) -> &DesignReplay {
        &self.replay
    }

    pub fn sample_size(&self) -> usize {
        self.trace.len()
    }

    pub fn observed(&self) -> &ResponseVector {
        &self.observed
    }

    pub fn observed_mean(&self) -> f64 {
        self.observed_mean
    }

    pub fn wave(&self, participant: NodeId) -> u32 {
        self.waves[participant]
    }

    /// Participants that may receive edges from augmented nodes.
    pub fn anchors(&self) -> &[NodeId] {
        &self.anchors
    }

    /// Participant pairs that may carry an intra edge.
    pub fn intra_pairs(&self) -> &[(NodeId, NodeId)] {
        &self.intra_pairs
    }

    pub fn is_recruitment_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.recruitment.contains(&ordered(u, v))
    }

    /// Clip a complexity specification to what the observed trace can hold.
    /// Returns the clipped specification and a note for every change.
    pub fn clip_spec(&self, spec: ComplexitySpec) -> (ComplexitySpec, Vec<String>) {
        let mut out = spec;
        let mut notes = Vec::new();
        if self.anchors.is_empty() && out.augmented_nodes > 0 {
            notes.push(format!("no participant admits outside neighbours; dropped {} augmented nodes", out.augmented_nodes));
            out.augmented_nodes = 0;
            out.extra_edges = 0;
        }
        let max_extra = out.augmented_nodes * self.anchors.len();
        if out.extra_edges > max_extra {
            notes.push(format!("extra edges clipped from {} to {max_extra}", out.extra_edges));
            out.extra_edges = max_extra;
        }
        if out.extra_edges < out.augmented_nodes {
            notes.push(format!("extra edges raised from {} to {}", out.extra_edges, out.augmented_nodes));
            out.extra_edges = out.augmented_nodes;
        }
        if out.augmented_nodes == 0 && out.extra_edges > 0 {
            notes.push(format!("{} extra edges without augmented nodes dropped", out.extra_edges));
            out.extra_edges = 0;
        }
        if out.intra_edges > self.intra_pairs.len() {
            notes.push(format!("intra edges clipped from {} to {}", out.intra_edges, self.intra_pairs.len()));
            out.intra_edges = self.intra_pairs.len();
        }
        (out, notes)
    }

    /// Graph with the participants and recruitment edges only.
    fn base_graph(&self, augmented: usize) -> Graph {
        let n = self.sample_size();
        let mut g = Graph::new(n);
        for v in 0..n {
            g.set_label(v, NodeLabel::Sampled { wave: self.waves[v] });
        }
        for &(u, v) in &self.recruitment {
            g.insert_edge(u, v);
        }
        for _ in 0..augmented {
            g.add_node(NodeLabel::Augmented);
        }
        g
    }

    /// `G_MC` with `augmented` outside nodes, the recruitment edges, and
    /// the given additional edges.
    pub fn graph_with_edges(&self, augmented: usize, edges: &[(NodeId, NodeId)]) -> Result<Graph> {
        let mut g = self.base_graph(augmented);
        for &(u, v) in edges {
            g.try_add_edge(u, v)?;
        }
        Ok(g)
    }

    /// Check the structural invariants of a chain state.
    pub fn check_state(&self, state: &ChainState) -> std::result::Result<(), String> {
        let n = self.sample_size();
        let g = &state.graph;
        let spec = state.spec;
        if g.node_count() != n + spec.augmented_nodes || state.y.len() != g.node_count() {
            return Err(format!("node count {} does not match {spec:?}", g.node_count()));
        }
        if state.y.as_slice()[..n] != *self.observed.as_slice() {
            return Err("observed responses were modified".into());
        }
        if !state.params.psi.is_finite() || !state.params.zeta.is_finite() || !self.hyper.contains(&state.params) {
            return Err(format!("parameters {:?} outside the prior support", state.params));
        }
        for &(u, v) in &self.recruitment {
            if !g.has_edge(u, v) {
                return Err(format!("recruitment edge ({u}, {v}) missing"));
            }
        }
        let mut intra = 0;
        let mut extra = 0;
        for (u, v) in g.edges() {
            match (u < n, v < n) {
                (true, true) => {
                    if self.waves[u] == self.waves[v] {
                        return Err(format!("edge ({u}, {v}) joins participants of the same wave"));
                    }
                    if !self.is_recruitment_edge(u, v) {
                        intra += 1;
                        if !state.intra.contains(&(u, v)) {
                            return Err(format!("intra edge ({u}, {v}) is not tracked"));
                        }
                    }
                }
                (true, false) => {
                    extra += 1;
                    if !self.replay.admits_outside_neighbor(u) {
                        return Err(format!("participant {u} cannot take an outside neighbour"));
                    }
                }
                (false, _) => return Err(format!("edge ({u}, {v}) joins augmented nodes")),
            }
        }
        if intra != spec.intra_edges || state.intra.len() != intra {
            return Err(format!("{intra} intra edges, specification has {}", spec.intra_edges));
        }
        if extra != spec.extra_edges {
            return Err(format!("{extra} extra edges, specification has {}", spec.extra_edges));
        }
        if let Some(k) = (n..g.node_count()).find(|&k| g.degree(k) == 0) {
            return Err(format!("augmented node {k} is isolated"));
        }
        if !self.replay.log_likelihood(g).is_finite() {
            return Err("design likelihood is zero".into());
        }
        Ok(())
    }
}

/// Current values of every sampled quantity of a chain.
#[derive(Clone, Debug, PartialEq)]
pub struct ChainState {
    pub params: MrfParams,
    pub y: ResponseVector,
    pub graph: Graph,
    pub alpha: f64,
    pub spec: ComplexitySpec,
    pub(crate) intra: BTreeSet<(NodeId, NodeId)>,
}

impl ChainState {
    /// Random starting state for a (clipped) specification: every augmented
    /// node gets one anchor, the remaining extra edges go to uniformly chosen
    /// augmented nodes, intra edges are a uniform subset of admissible pairs,
    /// augmented responses are Bernoulli with the observed prevalence, and
    /// the parameters start at their prior means.
    pub fn initialize<R: Rng + ?Sized>(
        ctx: &ChainContext,
        spec: ComplexitySpec,
        alpha: f64,
        rng: &mut R,
    ) -> Result<(ChainState, Vec<String>)> {
        let (spec, notes) = ctx.clip_spec(spec);
        let n = ctx.sample_size();
        let anchors = ctx.anchors();
        let mut degree = vec![1usize; spec.augmented_nodes];
        let mut remaining = spec.extra_edges.saturating_sub(spec.augmented_nodes);
        while remaining > 0 {
            let k = rng.random_range(0..spec.augmented_nodes);
            if degree[k] < anchors.len() {
                degree[k] += 1;
                remaining -= 1;
            }
        }
        let mut extra = Vec::with_capacity(spec.extra_edges);
        for (k, &h) in degree.iter().enumerate() {
            for i in index::sample(rng, anchors.len(), h) {
                extra.push((n + k, anchors[i]));
            }
        }
        let intra: Vec<(NodeId, NodeId)> = index::sample(rng, ctx.intra_pairs().len(), spec.intra_edges)
            .into_iter()
            .map(|i| ctx.intra_pairs()[i])
            .collect();
        let p = ctx.observed_mean();
        let augmented: Vec<u8> = (0..spec.augmented_nodes).map(|_| (rng.random::<f64>() < p) as u8).collect();
        let state = ChainState::from_parts(ctx, ctx.hyper.prior_mean(), &augmented, &intra, &extra, alpha)?;
        Ok((state, notes))
    }

    /// Assemble a state from explicit components. `extra` lists
    /// `(augmented node, participant)` pairs with augmented ids `n..`.
    pub fn from_parts(
        ctx: &ChainContext,
        params: MrfParams,
        augmented_responses: &[u8],
        intra: &[(NodeId, NodeId)],
        extra: &[(NodeId, NodeId)],
        alpha: f64,
    ) -> Result<ChainState> {
        let n = ctx.sample_size();
        let augmented = augmented_responses.len();
        let mut graph = ctx.base_graph(augmented);
        let mut y = ctx.observed().clone();
        for &b in augmented_responses {
            if b > 1 {
                return Err(Error::InvalidInput(format!("response value {b} is not binary")));
            }
            y.push(b == 1);
        }
        let mut intra_set = BTreeSet::new();
        for &(u, v) in intra {
            if u >= n || v >= n {
                return Err(Error::InvalidInput(format!("intra edge ({u}, {v}) leaves the sample")));
            }
            graph.try_add_edge(u, v)?;
            intra_set.insert(ordered(u, v));
        }
        for &(k, a) in extra {
            if k < n || a >= n {
                return Err(Error::InvalidInput(format!("extra edge ({k}, {a}) must join an augmented node to a participant")));
            }
            graph.try_add_edge(k, a)?;
        }
        let spec = ComplexitySpec { augmented_nodes: augmented, intra_edges: intra.len(), extra_edges: extra.len() };
        let state = ChainState { params, y, graph, alpha, spec, intra: intra_set };
        ctx.check_state(&state).map_err(Error::InvalidInput)?;
        Ok(state)
    }

    pub fn intra_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.intra.iter().copied()
    }

    /// Prevalence over all nodes of `G_MC`.
    pub fn prevalence(&self) -> f64 {
        self.y.mean()
    }

    /// Responses of the augmented nodes.
    pub fn augmented_responses(&self) -> &[u8] {
        &self.y.as_slice()[self.graph.node_count() - self.spec.augmented_nodes..]
    }
}
