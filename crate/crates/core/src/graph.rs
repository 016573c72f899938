//! Undirected simple graphs with node labels, random graph models and their
//! log-densities, and a plain-text edge-list format.

use std::collections::BTreeSet;
use std::io::{BufRead, Write};

use rand::Rng;
use rand_distr::{Beta, Distribution};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::special::{beta_ln_pdf, xlny};

pub type NodeId = usize;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NodeLabel {
    Unlabeled,
    Sampled { wave: u32 },
    Augmented,
}

impl NodeLabel {
    /// Ordering layer used by the wave-ordered response model: sampled nodes
    /// sit at their wave, augmented nodes after every wave.
    pub fn layer(self) -> u32 {
        match self {
            NodeLabel::Sampled { wave } => wave,
            NodeLabel::Augmented | NodeLabel::Unlabeled => u32::MAX,
        }
    }
}

/// Simple undirected graph. Adjacency is kept in ordered sets so that every
/// traversal is deterministic.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Graph {
    adjacency: Vec<BTreeSet<NodeId>>,
    labels: Vec<NodeLabel>,
    edge_count: usize,
}

impl Graph {
    pub fn new(nodes: usize) -> Self {
        Graph {
            adjacency: vec![BTreeSet::new(); nodes],
            labels: vec![NodeLabel::Unlabeled; nodes],
            edge_count: 0,
        }
    }

    pub fn complete(nodes: usize) -> Self {
        let mut g = Graph::new(nodes);
        for u in 0..nodes {
            for v in u + 1..nodes {
                g.insert_edge(u, v);
            }
        }
        g
    }

    /// Build from an edge list, rejecting self-loops, duplicates and
    /// out-of-range endpoints.
    pub fn from_edges(nodes: usize, edges: &[(NodeId, NodeId)]) -> Result<Self> {
        let mut g = Graph::new(nodes);
        for &(u, v) in edges {
            g.try_add_edge(u, v)?;
        }
        Ok(g)
    }

    pub fn node_count(&self) -> usize {
        self.adjacency.len()
    }

    pub fn edge_count(&self) -> usize {
        self.edge_count
    }

    /// Number of unordered node pairs.
    pub fn pair_count(&self) -> usize {
        let n = self.node_count();
        n * n.saturating_sub(1) / 2
    }

    pub fn density(&self) -> f64 {
        match self.pair_count() {
            0 => 0.0,
            m => self.edge_count as f64 / m as f64,
        }
    }

    pub fn add_node(&mut self, label: NodeLabel) -> NodeId {
        self.adjacency.push(BTreeSet::new());
        self.labels.push(label);
        self.adjacency.len() - 1
    }

    /// Checked insertion.
    pub fn try_add_edge(&mut self, u: NodeId, v: NodeId) -> Result<()> {
        let n = self.node_count();
        if u >= n || v >= n {
            return Err(Error::InvalidGraph(format!("edge ({u}, {v}) out of range for {n} nodes")));
        }
        if u == v {
            return Err(Error::InvalidGraph(format!("self-loop at node {u}")));
        }
        if !self.insert_edge(u, v) {
            return Err(Error::InvalidGraph(format!("duplicate edge ({u}, {v})")));
        }
        Ok(())
    }

    /// Insert an edge, returning whether it was new. Endpoints must be
    /// distinct and in range.
    pub fn insert_edge(&mut self, u: NodeId, v: NodeId) -> bool {
        assert_ne!(u, v, "self-loop");
        let fresh = self.adjacency[u].insert(v);
        if fresh {
            self.adjacency[v].insert(u);
            self.edge_count += 1;
        }
        fresh
    }

    pub fn remove_edge(&mut self, u: NodeId, v: NodeId) -> bool {
        let present = self.adjacency[u].remove(&v);
        if present {
            self.adjacency[v].remove(&u);
            self.edge_count -= 1;
        }
        present
    }

    pub fn has_edge(&self, u: NodeId, v: NodeId) -> bool {
        self.adjacency[u].contains(&v)
    }

    pub fn degree(&self, v: NodeId) -> usize {
        self.adjacency[v].len()
    }

    pub fn neighbors(&self, v: NodeId) -> impl Iterator<Item = NodeId> + '_ {
        self.adjacency[v].iter().copied()
    }

    pub fn neighbor_set(&self, v: NodeId) -> &BTreeSet<NodeId> {
        &self.adjacency[v]
    }

    /// Edges as `(u, v)` with `u < v`, in lexicographic order.
    pub fn edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.adjacency
            .iter()
            .enumerate()
            .flat_map(|(u, nb)| nb.range(u + 1..).map(move |&v| (u, v)))
    }

    pub fn label(&self, v: NodeId) -> NodeLabel {
        self.labels[v]
    }

    pub fn set_label(&mut self, v: NodeId, label: NodeLabel) {
        self.labels[v] = label;
    }

    pub fn labels(&self) -> &[NodeLabel] {
        &self.labels
    }

    /// Subgraph induced by `nodes`; node `i` of the result is `nodes[i]`.
    pub fn induced_subgraph(&self, nodes: &[NodeId]) -> Graph {
        let mut position = vec![usize::MAX; self.node_count()];
        for (i, &v) in nodes.iter().enumerate() {
            position[v] = i;
        }
        let mut sub = Graph::new(nodes.len());
        for (i, &v) in nodes.iter().enumerate() {
            sub.labels[i] = self.labels[v];
            for w in self.neighbors(v) {
                let j = position[w];
                if j != usize::MAX && i < j {
                    sub.insert_edge(i, j);
                }
            }
        }
        sub
    }

    /// Connected components, each sorted, ordered by smallest member.
    pub fn connected_components(&self) -> Vec<Vec<NodeId>> {
        let n = self.node_count();
        let mut seen = vec![false; n];
        let mut components = Vec::new();
        for start in 0..n {
            if seen[start] {
                continue;
            }
            seen[start] = true;
            let mut stack = vec![start];
            let mut comp = Vec::new();
            while let Some(v) = stack.pop() {
                comp.push(v);
                for w in self.neighbors(v) {
                    if !seen[w] {
                        seen[w] = true;
                        stack.push(w);
                    }
                }
            }
            comp.sort_unstable();
            components.push(comp);
        }
        components
    }

    /// Read the `N=<count>` header followed by one `u v` pair per line.
    /// Blank lines and lines starting with `#` are ignored.
    pub fn read_edge_list<R: BufRead>(reader: R) -> Result<Graph> {
        let mut graph: Option<Graph> = None;
        for (idx, line) in reader.lines().enumerate() {
            let line_no = idx as u64 + 1;
            let line = line?;
            let text = line.trim();
            if text.is_empty() || text.starts_with('#') {
                continue;
            }
            let parse_err = |message: String| Error::Parse { line: line_no, message };
            match graph.as_mut() {
                None => {
                    let count = text
                        .strip_prefix("N=")
                        .ok_or_else(|| parse_err("expected header `N=<count>`".into()))?;
                    let count: usize = count
                        .trim()
                        .parse()
                        .map_err(|e| parse_err(format!("bad node count: {e}")))?;
                    graph = Some(Graph::new(count));
                }
                Some(g) => {
                    let mut parts = text.split_whitespace();
                    let mut endpoint = || -> Result<NodeId> {
                        parts
                            .next()
                            .ok_or_else(|| parse_err("expected `u v`".into()))?
                            .parse::<NodeId>()
                            .map_err(|e| parse_err(format!("bad node id: {e}")))
                    };
                    let (u, v) = (endpoint()?, endpoint()?);
                    if parts.next().is_some() {
                        return Err(parse_err("trailing tokens".into()));
                    }
                    g.try_add_edge(u, v).map_err(|e| parse_err(e.to_string()))?;
                }
            }
        }
        graph.ok_or(Error::Parse { line: 0, message: "missing `N=<count>` header".into() })
    }

    pub fn write_edge_list<W: Write>(&self, mut writer: W) -> Result<()> {
        writeln!(writer, "N={}", self.node_count())?;
        for (u, v) in self.edges() {
            writeln!(writer, "{u} {v}")?;
        }
        Ok(())
    }
}

/// Random graph families.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphModel {
    /// Independent edges with probability `alpha`.
    ErdosRenyi { alpha: f64 },
    /// Node propensities `phi_i ~ Beta(a1, a2)`, edge `(i, k)` with
    /// probability `phi_i * phi_k`.
    ProductBernoulli { a1: f64, a2: f64 },
    /// Ring lattice of even degree with independent endpoint rewiring.
    SmallWorld { ring_degree: usize, rewire: f64 },
}

impl GraphModel {
    pub fn validate(&self, nodes: usize) -> Result<()> {
        match *self {
            GraphModel::ErdosRenyi { alpha } => {
                if !(0.0..=1.0).contains(&alpha) {
                    return Err(Error::domain(format!("edge probability {alpha} outside [0, 1]")));
                }
            }
            GraphModel::ProductBernoulli { a1, a2 } => {
                if !(a1 > 0.0 && a2 > 0.0 && a1.is_finite() && a2.is_finite()) {
                    return Err(Error::domain(format!("propensity shapes ({a1}, {a2}) must be positive")));
                }
            }
            GraphModel::SmallWorld { ring_degree, rewire } => {
                if ring_degree == 0 || ring_degree % 2 != 0 {
                    return Err(Error::domain(format!("ring degree {ring_degree} must be even and positive")));
                }
                if ring_degree >= nodes {
                    return Err(Error::domain(format!("ring degree {ring_degree} needs more than {nodes} nodes")));
                }
                if !(0.0..=1.0).contains(&rewire) {
                    return Err(Error::domain(format!("rewiring probability {rewire} outside [0, 1]")));
                }
            }
        }
        Ok(())
    }

    /// Expected edge density, used to match priors to regimes.
    pub fn expected_density(&self, nodes: usize) -> f64 {
        match *self {
            GraphModel::ErdosRenyi { alpha } => alpha,
            GraphModel::ProductBernoulli { a1, a2 } => (a1 / (a1 + a2)).powi(2),
            GraphModel::SmallWorld { ring_degree, .. } => ring_degree as f64 / (nodes.max(2) - 1) as f64,
        }
    }
}

pub fn sample_graph<R: Rng + ?Sized>(model: &GraphModel, nodes: usize, rng: &mut R) -> Result<Graph> {
    model.validate(nodes)?;
    let mut g = Graph::new(nodes);
    match *model {
        GraphModel::ErdosRenyi { alpha } => {
            for u in 0..nodes {
                for v in u + 1..nodes {
                    if rng.random::<f64>() < alpha {
                        g.insert_edge(u, v);
                    }
                }
            }
        }
        GraphModel::ProductBernoulli { a1, a2 } => {
            let beta = Beta::new(a1, a2).map_err(|e| Error::domain(e.to_string()))?;
            let phi: Vec<f64> = (0..nodes).map(|_| beta.sample(rng)).collect();
            for u in 0..nodes {
                for v in u + 1..nodes {
                    if rng.random::<f64>() < phi[u] * phi[v] {
                        g.insert_edge(u, v);
                    }
                }
            }
        }
        GraphModel::SmallWorld { ring_degree, rewire } => {
            let half = ring_degree / 2;
            for u in 0..nodes {
                for j in 1..=half {
                    g.insert_edge(u, (u + j) % nodes);
                }
            }
            for j in 1..=half {
                for u in 0..nodes {
                    if rng.random::<f64>() >= rewire {
                        continue;
                    }
                    let old = (u + j) % nodes;
                    if !g.has_edge(u, old) || g.degree(u) + 1 >= nodes {
                        continue;
                    }
                    let target = loop {
                        let w = rng.random_range(0..nodes);
                        if w != u && !g.has_edge(u, w) {
                            break w;
                        }
                    };
                    g.remove_edge(u, old);
                    g.insert_edge(u, target);
                }
            }
        }
    }
    Ok(g)
}

/// Log-probability of `graph` under `model`. Only the Erdős–Rényi family has
/// a closed form; see [`product_bernoulli_log_density`] for the conditional
/// density of the product model given its propensities.
pub fn graph_log_density(graph: &Graph, model: &GraphModel) -> Result<f64> {
    match *model {
        GraphModel::ErdosRenyi { alpha } => {
            model.validate(graph.node_count())?;
            Ok(erdos_renyi_log_density(graph.edge_count(), graph.pair_count(), alpha))
        }
        GraphModel::ProductBernoulli { .. } => Err(Error::UnsupportedDensity("the marginal product-Bernoulli model")),
        GraphModel::SmallWorld { .. } => Err(Error::UnsupportedDensity("the small-world model")),
    }
}

/// `E ln α + (M - E) ln(1 - α)` with `0 ln 0 = 0`.
pub fn erdos_renyi_log_density(edges: usize, pairs: usize, alpha: f64) -> f64 {
    xlny(edges as f64, alpha) + xlny((pairs - edges) as f64, 1.0 - alpha)
}

pub fn product_bernoulli_log_density(graph: &Graph, phi: &[f64]) -> Result<f64> {
    if phi.len() != graph.node_count() {
        return Err(Error::InvalidInput(format!(
            "{} propensities for {} nodes",
            phi.len(),
            graph.node_count()
        )));
    }
    if let Some(p) = phi.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::domain(format!("propensity {p} outside [0, 1]")));
    }
    let n = graph.node_count();
    let mut total = 0.0;
    for u in 0..n {
        for v in u + 1..n {
            let p = phi[u] * phi[v];
            total += if graph.has_edge(u, v) { xlny(1.0, p) } else { xlny(1.0, 1.0 - p) };
        }
    }
    Ok(total)
}

/// Prior on the Erdős–Rényi edge probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum AlphaPrior {
    Beta { omega1: f64, omega2: f64 },
    PointMass { alpha: f64 },
}

impl AlphaPrior {
    /// Beta prior with the given mean and total concentration `omega1 + omega2`.
    pub fn beta_with_mean(mean: f64, concentration: f64) -> Result<Self> {
        if !(mean > 0.0 && mean < 1.0 && concentration > 0.0) {
            return Err(Error::domain(format!("beta prior with mean {mean}, concentration {concentration}")));
        }
        Ok(AlphaPrior::Beta { omega1: mean * concentration, omega2: (1.0 - mean) * concentration })
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            AlphaPrior::Beta { omega1, omega2 } if omega1 > 0.0 && omega2 > 0.0 => Ok(()),
            AlphaPrior::PointMass { alpha } if (0.0..=1.0).contains(&alpha) => Ok(()),
            other => Err(Error::domain(format!("invalid edge-probability prior {other:?}"))),
        }
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> Result<f64> {
        self.validate()?;
        Ok(match *self {
            AlphaPrior::Beta { omega1, omega2 } => sample_alpha_prior(omega1, omega2, rng)?,
            AlphaPrior::PointMass { alpha } => alpha,
        })
    }

    /// Log-density; a point mass contributes zero at its atom.
    pub fn log_density(&self, alpha: f64) -> f64 {
        match *self {
            AlphaPrior::Beta { omega1, omega2 } => alpha_log_prior(alpha, omega1, omega2),
            AlphaPrior::PointMass { alpha: atom } => {
                if alpha == atom {
                    0.0
                } else {
                    f64::NEG_INFINITY
                }
            }
        }
    }
}

pub fn sample_alpha_prior<R: Rng + ?Sized>(omega1: f64, omega2: f64, rng: &mut R) -> Result<f64> {
    let beta = Beta::new(omega1, omega2).map_err(|e| Error::domain(format!("Beta({omega1}, {omega2}): {e}")))?;
    Ok(beta.sample(rng))
}

pub fn alpha_log_prior(alpha: f64, omega1: f64, omega2: f64) -> f64 {
    beta_ln_pdf(alpha, omega1, omega2)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rng::stream;
    use proptest::prelude::*;

    #[test]
    fn extreme_edge_probabilities() {
        let mut rng = stream(1, &[]);
        let empty = sample_graph(&GraphModel::ErdosRenyi { alpha: 0.0 }, 12, &mut rng).unwrap();
        assert_eq!(empty.edge_count(), 0);
        let full = sample_graph(&GraphModel::ErdosRenyi { alpha: 1.0 }, 12, &mut rng).unwrap();
        assert_eq!(full.edge_count(), 66);
        assert_eq!(graph_log_density(&full, &GraphModel::ErdosRenyi { alpha: 1.0 }).unwrap(), 0.0);
        assert_eq!(
            graph_log_density(&full, &GraphModel::ErdosRenyi { alpha: 0.0 }).unwrap(),
            f64::NEG_INFINITY
        );
    }

    #[test]
    fn rejects_bad_parameters() {
        let mut rng = stream(1, &[]);
        assert!(matches!(
            sample_graph(&GraphModel::ErdosRenyi { alpha: 1.5 }, 5, &mut rng),
            Err(Error::ParameterDomain(_))
        ));
        assert!(sample_graph(&GraphModel::SmallWorld { ring_degree: 3, rewire: 0.1 }, 10, &mut rng).is_err());
        assert!(sample_graph(&GraphModel::SmallWorld { ring_degree: 10, rewire: 0.1 }, 10, &mut rng).is_err());
        assert!(matches!(
            graph_log_density(&Graph::new(3), &GraphModel::ProductBernoulli { a1: 1.0, a2: 1.0 }),
            Err(Error::UnsupportedDensity(_))
        ));
    }

    #[test]
    fn unrewired_small_world_is_a_ring_lattice() {
        let mut rng = stream(2, &[]);
        let g = sample_graph(&GraphModel::SmallWorld { ring_degree: 4, rewire: 0.0 }, 10, &mut rng).unwrap();
        assert!((0..10).all(|v| g.degree(v) == 4));
        assert!(g.has_edge(0, 9) && g.has_edge(0, 8) && !g.has_edge(0, 7));
    }

    #[test]
    fn erdos_renyi_density_matches_brute_force() {
        let g = Graph::from_edges(4, &[(0, 1), (2, 3)]).unwrap();
        let a: f64 = 0.3;
        let expected = 2.0 * a.ln() + 4.0 * (1.0 - a).ln();
        let got = graph_log_density(&g, &GraphModel::ErdosRenyi { alpha: a }).unwrap();
        assert!((got - expected).abs() < 1e-14);
        let pb = product_bernoulli_log_density(&g, &[a.sqrt(); 4]).unwrap();
        assert!((pb - expected).abs() < 1e-12);
    }

    #[test]
    fn edge_list_round_trip_and_rejections() {
        let g = Graph::from_edges(5, &[(0, 1), (1, 4), (2, 3)]).unwrap();
        let mut buf = Vec::new();
        g.write_edge_list(&mut buf).unwrap();
        assert_eq!(String::from_utf8(buf.clone()).unwrap(), "N=5\n0 1\n1 4\n2 3\n");
        assert_eq!(Graph::read_edge_list(&buf[..]).unwrap(), g);

        let self_loop = Graph::read_edge_list("N=3\n0 1\n2 2\n".as_bytes()).unwrap_err();
        assert!(matches!(self_loop, Error::Parse { line: 3, .. }));
        let dup = Graph::read_edge_list("N=3\n0 1\n1 0\n".as_bytes()).unwrap_err();
        assert!(matches!(dup, Error::Parse { line: 3, .. }));
        assert!(Graph::read_edge_list("0 1\n".as_bytes()).is_err());
        assert!(Graph::read_edge_list("N=2\n0 5\n".as_bytes()).is_err());
    }

    #[test]
    fn components_and_induced_subgraphs() {
        let g = Graph::from_edges(6, &[(0, 1), (1, 2), (4, 5)]).unwrap();
        assert_eq!(g.connected_components(), vec![vec![0, 1, 2], vec![3], vec![4, 5]]);
        let sub = g.induced_subgraph(&[2, 1, 5]);
        assert_eq!(sub.edges().collect::<Vec<_>>(), vec![(0, 1)]);
    }

    proptest! {
        #[test]
        fn sampled_graphs_are_simple(seed in any::<u64>(), n in 2usize..30, alpha in 0.0f64..1.0) {
            let mut rng = stream(seed, &[]);
            let g = sample_graph(&GraphModel::ErdosRenyi { alpha }, n, &mut rng).unwrap();
            let mut count = 0;
            for v in 0..n {
                prop_assert!(!g.has_edge(v, v));
                for w in g.neighbors(v) {
                    prop_assert!(g.has_edge(w, v));
                    count += 1;
                }
            }
            prop_assert_eq!(count, 2 * g.edge_count());
            let model = GraphModel::ErdosRenyi { alpha };
            prop_assert!(graph_log_density(&g, &model).unwrap() <= 0.0);
        }

        #[test]
        fn rewiring_preserves_edge_count(seed in any::<u64>(), half in 1usize..4, p in 0.0f64..=1.0) {
            let n = 20;
            let mut rng = stream(seed, &[]);
            let g = sample_graph(&GraphModel::SmallWorld { ring_degree: 2 * half, rewire: p }, n, &mut rng).unwrap();
            prop_assert_eq!(g.edge_count(), n * half);
        }
    }
}
