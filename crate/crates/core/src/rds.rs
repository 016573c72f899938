//! Respondent-driven sampling: simulation of the coupon process, traces, the
//! design likelihood, and the trace CSV format.
//!
//! Traces are kept in queue order. Seeds come first; after them, the
//! recruits of each participant form one contiguous run, and runs appear in
//! the order their recruiters were enrolled. This is the order in which the
//! recruitment process hands out coupons, so the design likelihood can be
//! evaluated by replaying the trace front to back.
//!
//! A participant with `d` unsampled neighbours at the time it receives its
//! coupons recruits `min(d, m)` of them, uniformly. The allocation that
//! reaches the target sample size may be cut short. In that case the
//! enrolled recruits are a uniform subset of the available neighbours.

use std::collections::BTreeMap;
use std::io::{Read, Write};

use rand::seq::index;
use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::graph::{Graph, NodeId};
use crate::mrf::ResponseVector;
use crate::special::ln_choose;

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RdsConfig {
    pub seeds: Vec<NodeId>,
    pub coupons: usize,
    pub sample_size: usize,
}

impl RdsConfig {
    /// Seeds are the `seed_count` lowest node ids.
    pub fn with_lowest_seeds(seed_count: usize, coupons: usize, sample_size: usize) -> Self {
        RdsConfig { seeds: (0..seed_count).collect(), coupons, sample_size }
    }

    pub fn validate(&self, nodes: usize) -> Result<()> {
        if self.coupons == 0 {
            return Err(Error::domain("coupon count must be at least 1"));
        }
        if self.seeds.is_empty() {
            return Err(Error::domain("at least one seed is required"));
        }
        let mut sorted = self.seeds.clone();
        sorted.sort_unstable();
        sorted.dedup();
        if sorted.len() != self.seeds.len() {
            return Err(Error::domain("seeds must be distinct"));
        }
        if let Some(s) = self.seeds.iter().find(|&&s| s >= nodes) {
            return Err(Error::domain(format!("seed {s} is not a node of a {nodes}-node graph")));
        }
        if self.sample_size < self.seeds.len() || self.sample_size > nodes {
            return Err(Error::domain(format!(
                "sample size {} must lie between the seed count {} and the population size {nodes}",
                self.sample_size,
                self.seeds.len()
            )));
        }
        Ok(())
    }
}

/// One enrolment. `available` is the number of unsampled neighbours the
/// recruiter had when it received its coupons, when known.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Recruitment {
    pub recruiter: Option<NodeId>,
    pub recruited: NodeId,
    pub wave: u32,
    pub available: Option<usize>,
}

impl Recruitment {
    pub fn seed(node: NodeId) -> Self {
        Recruitment { recruiter: None, recruited: node, wave: 0, available: None }
    }

    pub fn by(recruiter: NodeId, recruited: NodeId, wave: u32) -> Self {
        Recruitment { recruiter: Some(recruiter), recruited, wave, available: None }
    }
}

/// A validated recruitment trace in queue order.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct RdsTrace {
    coupons: usize,
    seed_count: usize,
    events: Vec<Recruitment>,
}

impl RdsTrace {
    /// Validate a trace that is already in queue order.
    pub fn new(coupons: usize, events: Vec<Recruitment>) -> Result<Self> {
        let seed_count = validate_events(coupons, &events)?;
        Ok(RdsTrace { coupons, seed_count, events })
    }

    /// Put an arbitrary listing of recruitments into queue order. Seeds keep
    /// their relative order, as do the recruits of each recruiter.
    pub fn from_unordered(coupons: usize, events: Vec<Recruitment>) -> Result<Self> {
        let mut children: BTreeMap<NodeId, Vec<Recruitment>> = BTreeMap::new();
        let mut ordered: Vec<Recruitment> = Vec::with_capacity(events.len());
        for e in &events {
            match e.recruiter {
                None => ordered.push(*e),
                Some(r) => children.entry(r).or_default().push(*e),
            }
        }
        let mut q = 0;
        while q < ordered.len() {
            if let Some(kids) = children.remove(&ordered[q].recruited) {
                ordered.extend(kids);
            }
            q += 1;
        }
        if ordered.len() != events.len() {
            return Err(Error::InvalidTrace(format!(
                "{} recruitments cannot be traced back to a seed",
                events.len() - ordered.len()
            )));
        }
        RdsTrace::new(coupons, ordered)
    }

    pub fn coupons(&self) -> usize {
        self.coupons
    }

    /// Sample size `n`.
    pub fn len(&self) -> usize {
        self.events.len()
    }

    pub fn is_empty(&self) -> bool {
        self.events.is_empty()
    }

    pub fn seed_count(&self) -> usize {
        self.seed_count
    }

    pub fn events(&self) -> &[Recruitment] {
        &self.events
    }

    pub fn seeds(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.events[..self.seed_count].iter().map(|e| e.recruited)
    }

    /// Participants in enrolment order.
    pub fn participants(&self) -> impl Iterator<Item = NodeId> + '_ {
        self.events.iter().map(|e| e.recruited)
    }

    pub fn recruitment_edges(&self) -> impl Iterator<Item = (NodeId, NodeId)> + '_ {
        self.events.iter().filter_map(|e| e.recruiter.map(|r| (r, e.recruited)))
    }

    pub fn max_wave(&self) -> u32 {
        self.events.iter().map(|e| e.wave).max().unwrap_or(0)
    }

    /// Whether participant `i` of the trace carries node id `i`.
    pub fn is_positionally_labelled(&self) -> bool {
        self.events.iter().enumerate().all(|(i, e)| e.recruited == i)
    }

    /// Relabel participants `0..n` in enrolment order. Returns the relabelled
    /// trace and the original id of each participant.
    pub fn relabeled(&self) -> (RdsTrace, Vec<NodeId>) {
        let original: Vec<NodeId> = self.participants().collect();
        let position: BTreeMap<NodeId, usize> = original.iter().enumerate().map(|(i, &v)| (v, i)).collect();
        let events = self
            .events
            .iter()
            .map(|e| Recruitment {
                recruiter: e.recruiter.map(|r| position[&r]),
                recruited: position[&e.recruited],
                wave: e.wave,
                available: e.available,
            })
            .collect();
        (RdsTrace { coupons: self.coupons, seed_count: self.seed_count, events }, original)
    }
}

fn validate_events(coupons: usize, events: &[Recruitment]) -> Result<usize> {
    if coupons == 0 {
        return Err(Error::InvalidTrace("coupon count must be at least 1".into()));
    }
    if events.is_empty() {
        return Err(Error::InvalidTrace("empty trace".into()));
    }
    let mut position: BTreeMap<NodeId, usize> = BTreeMap::new();
    let mut recruits = vec![0usize; events.len()];
    let mut seed_count = 0;
    let mut last_recruiter = 0;
    for (i, e) in events.iter().enumerate() {
        if position.contains_key(&e.recruited) {
            return Err(Error::InvalidTrace(format!("node {} is recruited twice", e.recruited)));
        }
        match e.recruiter {
            None => {
                if seed_count != i {
                    return Err(Error::InvalidTrace(format!("seed {} listed after recruits", e.recruited)));
                }
                if e.wave != 0 {
                    return Err(Error::InvalidTrace(format!("seed {} has wave {}", e.recruited, e.wave)));
                }
                seed_count += 1;
            }
            Some(r) => {
                let p = *position.get(&r).ok_or_else(|| {
                    Error::InvalidTrace(format!("recruiter {r} of {} is not an earlier participant", e.recruited))
                })?;
                if p < last_recruiter {
                    return Err(Error::InvalidTrace(format!(
                        "recruits of {r} are not in queue order (at {})",
                        e.recruited
                    )));
                }
                last_recruiter = p;
                recruits[p] += 1;
                if recruits[p] > coupons {
                    return Err(Error::InvalidTrace(format!("{r} recruits more than {coupons} participants")));
                }
                if e.wave != events[p].wave + 1 {
                    return Err(Error::InvalidTrace(format!(
                        "{} has wave {} but its recruiter has wave {}",
                        e.recruited, e.wave, events[p].wave
                    )));
                }
            }
        }
        position.insert(e.recruited, i);
    }
    Ok(seed_count)
}

/// Simulate the coupon process on `graph`.
pub fn simulate_rds<R: Rng + ?Sized>(graph: &Graph, config: &RdsConfig, rng: &mut R) -> Result<RdsTrace> {
    config.validate(graph.node_count())?;
    let n = config.sample_size;
    let m = config.coupons;
    let mut sampled = vec![false; graph.node_count()];
    let mut events: Vec<Recruitment> = Vec::with_capacity(n);
    for &s in &config.seeds {
        sampled[s] = true;
        events.push(Recruitment::seed(s));
    }
    let mut q = 0;
    while events.len() < n {
        if q >= events.len() {
            let seed_count = config.seeds.len();
            return Err(Error::TraceExhausted {
                partial: Box::new(RdsTrace { coupons: m, seed_count, events }),
            });
        }
        let recruiter = events[q].recruited;
        let wave = events[q].wave + 1;
        q += 1;
        let open: Vec<NodeId> = graph.neighbors(recruiter).filter(|&v| !sampled[v]).collect();
        let d = open.len();
        // Truncation at the target size enrols a uniform subset of the
        // available neighbours, the same law as a uniform m-subset followed
        // by a uniform cut.
        let take = d.min(m).min(n - events.len());
        let mut chosen: Vec<NodeId> = if take == d {
            open
        } else {
            index::sample(rng, d, take).into_iter().map(|i| open[i]).collect()
        };
        chosen.sort_unstable();
        for v in chosen {
            sampled[v] = true;
            events.push(Recruitment { recruiter: Some(recruiter), recruited: v, wave, available: Some(d) });
        }
    }
    Ok(RdsTrace { coupons: m, seed_count: config.seeds.len(), events })
}

/// Log-probability of one allocation: `recruits` participants enrolled by a
/// recruiter with `available` unsampled neighbours and `coupons` coupons.
/// `completes` marks the allocation that reaches the target sample size.
pub fn allocation_log_factor(recruits: usize, available: usize, coupons: usize, completes: bool) -> f64 {
    let full = available.min(coupons);
    if recruits == full {
        if available > coupons {
            -ln_choose(available, coupons)
        } else {
            0.0
        }
    } else if recruits < full && completes {
        -ln_choose(available, recruits)
    } else {
        f64::NEG_INFINITY
    }
}

/// Design log-likelihood of `trace` on `graph`, by direct replay. Returns
/// `-inf` if the trace is impossible on the graph.
pub fn rds_log_likelihood(trace: &RdsTrace, graph: &Graph) -> f64 {
    let nodes = graph.node_count();
    let events = trace.events();
    if events.iter().any(|e| e.recruited >= nodes) {
        return f64::NEG_INFINITY;
    }
    let n = events.len();
    let m = trace.coupons();
    let mut sampled = vec![false; nodes];
    for s in trace.seeds() {
        sampled[s] = true;
    }
    let mut next = trace.seed_count();
    let mut total = 0.0;
    let mut q = 0;
    while next < n {
        let x = events[q].recruited;
        let start = next;
        while next < n && events[next].recruiter == Some(x) {
            next += 1;
        }
        let available = graph.neighbors(x).filter(|&v| !sampled[v]).count();
        for e in &events[start..next] {
            if sampled[e.recruited] || !graph.has_edge(x, e.recruited) {
                return f64::NEG_INFINITY;
            }
            sampled[e.recruited] = true;
        }
        let recruits = next - start;
        total += allocation_log_factor(recruits, available, m, recruits > 0 && next == n);
        if total == f64::NEG_INFINITY {
            return total;
        }
        q += 1;
    }
    total
}

/// One coupon allocation of a positionally labelled trace. Participants
/// with index `>= cutoff` were still unsampled when `recruiter` received
/// its coupons.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct Allocation {
    pub recruiter: NodeId,
    pub cutoff: usize,
    pub recruits: usize,
    pub completes: bool,
}

/// Precomputed replay of a positionally labelled trace, for graphs whose
/// first `n` nodes are the participants in enrolment order and whose
/// remaining nodes are unsampled. Supports cheap re-evaluation of the
/// design likelihood after edge changes.
#[derive(Clone, Debug)]
pub struct DesignReplay {
    coupons: usize,
    sample_size: usize,
    allocations: Vec<Allocation>,
    allocation_of: Vec<Option<usize>>,
}

impl DesignReplay {
    pub fn new(trace: &RdsTrace) -> Result<Self> {
        if !trace.is_positionally_labelled() {
            return Err(Error::InvalidTrace("replay requires a positionally labelled trace".into()));
        }
        let events = trace.events();
        let n = events.len();
        let mut allocations = Vec::new();
        let mut allocation_of = vec![None; n];
        let mut next = trace.seed_count();
        let mut q = 0;
        while next < n {
            let start = next;
            while next < n && events[next].recruiter == Some(q) {
                next += 1;
            }
            allocation_of[q] = Some(allocations.len());
            allocations.push(Allocation {
                recruiter: q,
                cutoff: start,
                recruits: next - start,
                completes: next > start && next == n,
            });
            q += 1;
        }
        Ok(DesignReplay { coupons: trace.coupons(), sample_size: n, allocations, allocation_of })
    }

    pub fn coupons(&self) -> usize {
        self.coupons
    }

    pub fn sample_size(&self) -> usize {
        self.sample_size
    }

    pub fn allocations(&self) -> &[Allocation] {
        &self.allocations
    }

    pub fn allocation(&self, node: NodeId) -> Option<&Allocation> {
        self.allocation_of.get(node).copied().flatten().map(|i| &self.allocations[i])
    }

    /// Unsampled neighbours of the recruiter at allocation time.
    pub fn available(&self, allocation: &Allocation, graph: &Graph) -> usize {
        graph.neighbor_set(allocation.recruiter).range(allocation.cutoff..).count()
    }

    pub fn log_factor(&self, allocation: &Allocation, available: usize) -> f64 {
        allocation_log_factor(allocation.recruits, available, self.coupons, allocation.completes)
    }

    pub fn log_likelihood(&self, graph: &Graph) -> f64 {
        self.allocations.iter().map(|a| self.log_factor(a, self.available(a, graph))).sum()
    }

    /// Whether `node` was still unsampled when `recruiter` allocated.
    pub fn unsampled_at_allocation(&self, recruiter: NodeId, node: NodeId) -> bool {
        self.allocation(recruiter).is_some_and(|a| node >= a.cutoff)
    }

    /// A participant is blocked if one more unsampled neighbour at its
    /// allocation would contradict the observed number of recruits.
    pub fn is_blocked(&self, node: NodeId) -> bool {
        self.allocation(node)
            .is_some_and(|a| !a.completes && a.recruits < self.coupons)
    }

    /// Whether an extra edge between participant `node` and an unsampled
    /// node keeps the design likelihood positive.
    pub fn admits_outside_neighbor(&self, node: NodeId) -> bool {
        !self.is_blocked(node)
    }

    /// Whether an edge between participants `u` and `v` keeps the design
    /// likelihood positive, independently of the other edges.
    pub fn admits_inside_edge(&self, u: NodeId, v: NodeId) -> bool {
        let affects_blocked = |a: NodeId, b: NodeId| self.unsampled_at_allocation(a, b) && self.is_blocked(a);
        !(affects_blocked(u, v) || affects_blocked(v, u))
    }
}

#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct TraceSummary {
    pub sample_size: usize,
    pub seed_count: usize,
    pub wave_count: u32,
    /// Sizes of waves `1..=wave_count`.
    pub wave_sizes: Vec<usize>,
}

pub fn trace_summary(trace: &RdsTrace) -> TraceSummary {
    let wave_count = trace.max_wave();
    let mut wave_sizes = vec![0; wave_count as usize];
    for e in trace.events().iter().filter(|e| e.wave > 0) {
        wave_sizes[e.wave as usize - 1] += 1;
    }
    TraceSummary { sample_size: trace.len(), seed_count: trace.seed_count(), wave_count, wave_sizes }
}

/// Observed RDS data: the trace plus each participant's reported degree and
/// binary response, both in trace order.
#[derive(Clone, Debug, PartialEq)]
pub struct RdsDataset {
    pub trace: RdsTrace,
    pub reported_degree: Vec<usize>,
    pub response: ResponseVector,
}

#[derive(Debug, Serialize, Deserialize)]
struct TraceRow {
    recruited_id: NodeId,
    recruiter_id: String,
    wave: u32,
    reported_degree: usize,
    response: u8,
}

const SEED_MARKER: &str = "SEED";

impl RdsDataset {
    pub fn new(trace: RdsTrace, reported_degree: Vec<usize>, response: ResponseVector) -> Result<Self> {
        if reported_degree.len() != trace.len() || response.len() != trace.len() {
            return Err(Error::InvalidInput(format!(
                "trace has {} participants but {} degrees and {} responses",
                trace.len(),
                reported_degree.len(),
                response.len()
            )));
        }
        Ok(RdsDataset { trace, reported_degree, response })
    }

    /// Read `recruited_id, recruiter_id|SEED, wave, reported_degree,
    /// response` rows. Rows may be in any order.
    pub fn read_csv<R: Read>(reader: R, coupons: usize) -> Result<Self> {
        let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
        let mut events = Vec::new();
        let mut attributes: BTreeMap<NodeId, (usize, u8)> = BTreeMap::new();
        for row in rdr.deserialize::<TraceRow>() {
            let row = row.map_err(|e| {
                let line = e.position().map(|p| p.line()).unwrap_or(0);
                Error::Parse { line, message: e.to_string() }
            })?;
            let recruiter = if row.recruiter_id == SEED_MARKER {
                None
            } else {
                Some(row.recruiter_id.parse::<NodeId>().map_err(|e| Error::Parse {
                    line: events.len() as u64 + 2,
                    message: format!("recruiter `{}`: {e}", row.recruiter_id),
                })?)
            };
            if row.response > 1 {
                return Err(Error::Parse {
                    line: events.len() as u64 + 2,
                    message: format!("response {} is not binary", row.response),
                });
            }
            attributes.insert(row.recruited_id, (row.reported_degree, row.response));
            events.push(Recruitment { recruiter, recruited: row.recruited_id, wave: row.wave, available: None });
        }
        let trace = RdsTrace::from_unordered(coupons, events)?;
        let (reported_degree, response): (Vec<usize>, Vec<u8>) =
            trace.participants().map(|v| attributes[&v]).unzip();
        RdsDataset::new(trace, reported_degree, ResponseVector::from_bits(response)?)
    }

    pub fn write_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        for (i, e) in self.trace.events().iter().enumerate() {
            wtr.serialize(TraceRow {
                recruited_id: e.recruited,
                recruiter_id: e.recruiter.map_or_else(|| SEED_MARKER.to_string(), |r| r.to_string()),
                wave: e.wave,
                reported_degree: self.reported_degree[i],
                response: self.response.get(i),
            })?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Index of each participant's recruiter within the trace.
    pub fn recruiter_positions(&self) -> Vec<Option<usize>> {
        let position: BTreeMap<NodeId, usize> =
            self.trace.participants().enumerate().map(|(i, v)| (v, i)).collect();
        self.trace.events().iter().map(|e| e.recruiter.map(|r| position[&r])).collect()
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::graph::{sample_graph, GraphModel};
    use crate::rng::stream;
    use proptest::prelude::*;
    use rand::Rng;

    fn path3() -> Graph {
        Graph::from_edges(3, &[(0, 1), (1, 2)]).unwrap()
    }

    #[test]
    fn path_graph_trace_is_certain() {
        let g = path3();
        let mut rng = stream(1, &[]);
        let trace = simulate_rds(&g, &RdsConfig::with_lowest_seeds(1, 1, 3), &mut rng).unwrap();
        assert_eq!(trace.participants().collect::<Vec<_>>(), vec![0, 1, 2]);
        assert_eq!(rds_log_likelihood(&trace, &g), 0.0);
        let s = trace_summary(&trace);
        assert_eq!(s.wave_count, 2);
        assert_eq!(s.wave_sizes, vec![1, 1]);
    }

    #[test]
    fn seeds_only_trace_has_unit_likelihood() {
        let g = Graph::complete(5);
        let mut rng = stream(1, &[]);
        let trace = simulate_rds(&g, &RdsConfig::with_lowest_seeds(2, 2, 2), &mut rng).unwrap();
        assert_eq!(trace.len(), 2);
        assert_eq!(rds_log_likelihood(&trace, &g), 0.0);
    }

    #[test]
    fn exhaustion_is_reported_with_partial_trace() {
        let g = Graph::from_edges(4, &[(0, 1)]).unwrap();
        let mut rng = stream(1, &[]);
        match simulate_rds(&g, &RdsConfig::with_lowest_seeds(1, 2, 3), &mut rng) {
            Err(Error::TraceExhausted { partial }) => assert_eq!(partial.len(), 2),
            other => panic!("expected exhaustion, got {other:?}"),
        }
    }

    #[test]
    fn missing_edges_and_wrong_counts_are_impossible() {
        let trace = RdsTrace::new(2, vec![Recruitment::seed(0), Recruitment::by(0, 1, 1), Recruitment::by(1, 2, 2)]).unwrap();
        assert_eq!(rds_log_likelihood(&trace, &Graph::from_edges(3, &[(0, 1)]).unwrap()), f64::NEG_INFINITY);
        // Node 0 had two unsampled neighbours and two coupons but recruited one.
        let tri = Graph::complete(3);
        assert_eq!(rds_log_likelihood(&trace, &tri), f64::NEG_INFINITY);
        assert_eq!(rds_log_likelihood(&trace, &path3()), 0.0);
    }

    #[test]
    fn truncated_final_allocation() {
        // Star centre 0 with 4 leaves, 3 coupons, sample size 3: the centre
        // enrols a uniform pair of the four leaves.
        let g = Graph::from_edges(5, &[(0, 1), (0, 2), (0, 3), (0, 4)]).unwrap();
        let trace = RdsTrace::new(3, vec![Recruitment::seed(0), Recruitment::by(0, 2, 1), Recruitment::by(0, 4, 1)]).unwrap();
        assert!((rds_log_likelihood(&trace, &g) + 6f64.ln()).abs() < 1e-15);
    }

    #[test]
    fn trace_validation() {
        assert!(RdsTrace::new(1, vec![]).is_err());
        assert!(RdsTrace::new(0, vec![Recruitment::seed(0)]).is_err());
        assert!(RdsTrace::new(1, vec![Recruitment::seed(0), Recruitment::by(0, 1, 1), Recruitment::by(0, 2, 1)]).is_err());
        assert!(RdsTrace::new(2, vec![Recruitment::seed(0), Recruitment::by(0, 1, 2)]).is_err());
        assert!(RdsTrace::new(2, vec![Recruitment::seed(0), Recruitment::by(0, 0, 1)]).is_err());
        // Recruits of a later participant before those of an earlier one.
        let out_of_order = vec![
            Recruitment::seed(0),
            Recruitment::seed(1),
            Recruitment::by(1, 2, 1),
            Recruitment::by(0, 3, 1),
        ];
        assert!(RdsTrace::new(2, out_of_order.clone()).is_err());
        let fixed = RdsTrace::from_unordered(2, out_of_order).unwrap();
        assert_eq!(fixed.participants().collect::<Vec<_>>(), vec![0, 1, 3, 2]);
        assert!(RdsTrace::from_unordered(2, vec![Recruitment::seed(0), Recruitment::by(7, 1, 1)]).is_err());
    }

    #[test]
    fn csv_round_trip_and_errors() {
        let trace = RdsTrace::new(2, vec![Recruitment::seed(10), Recruitment::by(10, 4, 1), Recruitment::by(10, 7, 1)]).unwrap();
        let data = RdsDataset::new(trace, vec![3, 1, 2], ResponseVector::from_bits(vec![1, 0, 1]).unwrap()).unwrap();
        let mut buf = Vec::new();
        data.write_csv(&mut buf).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert_eq!(
            text,
            "recruited_id,recruiter_id,wave,reported_degree,response\n10,SEED,0,3,1\n4,10,1,1,0\n7,10,1,2,1\n"
        );
        assert_eq!(RdsDataset::read_csv(&buf[..], 2).unwrap(), data);
        assert_eq!(data.recruiter_positions(), vec![None, Some(0), Some(0)]);

        let bad = "recruited_id,recruiter_id,wave,reported_degree,response\n1,SEED,0,x,1\n";
        assert!(matches!(RdsDataset::read_csv(bad.as_bytes(), 2), Err(Error::Parse { line: 2, .. })));
        let bad = "recruited_id,recruiter_id,wave,reported_degree,response\n1,SEED,0,2,3\n";
        assert!(RdsDataset::read_csv(bad.as_bytes(), 2).is_err());
    }

    fn random_case(seed: u64) -> Option<(Graph, RdsTrace)> {
        let mut rng = stream(seed, &[]);
        let nodes = rng.random_range(4..14);
        let alpha = rng.random_range(0.15..0.7);
        let g = sample_graph(&GraphModel::ErdosRenyi { alpha }, nodes, &mut rng).unwrap();
        let config = RdsConfig::with_lowest_seeds(rng.random_range(1..3), rng.random_range(1..4), rng.random_range(2..=nodes));
        simulate_rds(&g, &config, &mut rng).ok().map(|t| (g, t))
    }

    proptest! {
        #[test]
        fn simulated_traces_are_valid_and_possible(seed in any::<u64>()) {
            if let Some((g, trace)) = random_case(seed) {
                prop_assert!(RdsTrace::new(trace.coupons(), trace.events().to_vec()).is_ok());
                prop_assert!(rds_log_likelihood(&trace, &g).is_finite());
                for e in trace.events() {
                    if let (Some(r), Some(d)) = (e.recruiter, e.available) {
                        prop_assert!(g.has_edge(r, e.recruited));
                        prop_assert!(d >= 1);
                    }
                }
            }
        }

        #[test]
        fn replay_matches_direct_likelihood(seed in any::<u64>(), extra in 0usize..6) {
            if let Some((g, trace)) = random_case(seed) {
                let (relabeled, original) = trace.relabeled();
                // Move the graph into participant order, then perturb it.
                let mut order = original.clone();
                order.extend((0..g.node_count()).filter(|v| !original.contains(v)));
                let mut h = g.induced_subgraph(&order);
                let mut rng = stream(seed, &[1]);
                for _ in 0..extra {
                    let u = rng.random_range(0..h.node_count());
                    let v = rng.random_range(0..h.node_count());
                    if u != v && !h.has_edge(u, v) {
                        h.insert_edge(u, v);
                    }
                }
                let replay = DesignReplay::new(&relabeled).unwrap();
                let direct = rds_log_likelihood(&relabeled, &h);
                let fast = replay.log_likelihood(&h);
                prop_assert!(direct == fast || (direct - fast).abs() < 1e-12, "{} vs {}", direct, fast);
                prop_assert_eq!(rds_log_likelihood(&trace, &g), replay.log_likelihood(&g.induced_subgraph(&order)));
            }
        }

        #[test]
        fn admissible_edges_keep_likelihood_positive(seed in any::<u64>()) {
            if let Some((g, trace)) = random_case(seed) {
                let (relabeled, original) = trace.relabeled();
                let mut order = original.clone();
                order.extend((0..g.node_count()).filter(|v| !original.contains(v)));
                let base = g.induced_subgraph(&order);
                let replay = DesignReplay::new(&relabeled).unwrap();
                let n = relabeled.len();
                for u in 0..n {
                    for v in u + 1..n {
                        if base.has_edge(u, v) { continue; }
                        let mut h = base.clone();
                        h.insert_edge(u, v);
                        let finite = replay.log_likelihood(&h).is_finite();
                        prop_assert_eq!(finite, replay.admits_inside_edge(u, v));
                    }
                }
                let mut h = base.clone();
                let outside = h.add_node(crate::graph::NodeLabel::Augmented);
                for u in 0..n {
                    let mut k = h.clone();
                    k.insert_edge(u, outside);
                    prop_assert_eq!(replay.log_likelihood(&k).is_finite(), replay.admits_outside_neighbor(u));
                }
            }
        }
    }
}
