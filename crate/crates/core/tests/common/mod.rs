//! Independent oracles shared by the integration and acceptance tests.
#![allow(dead_code)]

use std::collections::BTreeMap;

use rand::Rng;
use rdsinfer::bma::{fit_with_mixing, CalibrationDraw, FitConfig, MixingDistribution};
use rdsinfer::diagnostics::{ess, mc_variance, posterior_predictive_check};
use rdsinfer::graph::{sample_graph, AlphaPrior, Graph, GraphModel, NodeId, NodeLabel};
use rdsinfer::mcmc::{
    augmented_response_log_acceptance, extra_edges_log_acceptance, intra_edges_log_acceptance, log_joint,
    psi_log_acceptance, reflected_normal_density, sample_responses, zeta_log_acceptance, ChainContext, ChainState,
    ComplexitySpec, KernelConfig, RunConfig, ScalarProposal,
};
use rdsinfer::mrf::{
    brook_log_ratio, kc_log_joint, psi_log_prior, zeta_log_prior, MrfHyper, MrfParams, ResponseVector,
};
use rdsinfer::rds::{rds_log_likelihood, simulate_rds, RdsConfig, RdsTrace, Recruitment};
use rdsinfer::rng::{stream, StreamRng};
use rdsinfer::special::normal_cdf;

pub fn random_graph(rng: &mut StreamRng, max_nodes: usize) -> Graph {
    let nodes = rng.random_range(1..=max_nodes);
    let alpha = rng.random_range(0.1..0.9);
    sample_graph(&GraphModel::ErdosRenyi { alpha }, nodes, rng).unwrap()
}

pub fn random_params(rng: &mut StreamRng) -> MrfParams {
    MrfParams { psi: rng.random_range(-3.0..0.0), zeta: rng.random_range(0.0..1.0) }
}

#[derive(Debug)]
pub struct JointReport {
    pub configurations: usize,
    pub max_normalisation_error: f64,
    pub max_brook_error: f64,
}

/// Normalisation of the exact field joint and agreement of the telescoped
/// ratio with differences of exact log-probabilities.
pub fn joint_oracle(configurations: usize, seed: u64) -> JointReport {
    let mut rng = stream(seed, &[]);
    let mut norm = 0.0f64;
    let mut brook = 0.0f64;
    for _ in 0..configurations {
        let g = random_graph(&mut rng, 8);
        let p = random_params(&mut rng);
        let k = g.node_count();
        let logs: Vec<f64> =
            (0u64..1 << k).map(|m| kc_log_joint(&ResponseVector::from_mask(m, k), &g, &p).unwrap()).collect();
        norm = norm.max((logs.iter().map(|l| l.exp()).sum::<f64>() - 1.0).abs());
        for _ in 0..20 {
            let a = rng.random_range(0..1u64 << k);
            let b = rng.random_range(0..1u64 << k);
            let r = brook_log_ratio(&ResponseVector::from_mask(a, k), &ResponseVector::from_mask(b, k), &g, &p);
            brook = brook.max((r - (logs[a as usize] - logs[b as usize])).abs());
        }
    }
    JointReport { configurations, max_normalisation_error: norm, max_brook_error: brook }
}

/// Every outcome of the coupon process with its probability, found by
/// branching over each allocation. Exhausted runs are pooled.
pub struct TraceEnumeration {
    pub traces: BTreeMap<Vec<(Option<NodeId>, NodeId)>, (RdsTrace, f64)>,
    pub exhausted: f64,
}

fn subsets(items: &[NodeId], size: usize) -> Vec<Vec<NodeId>> {
    if size == 0 {
        return vec![Vec::new()];
    }
    if items.len() < size {
        return Vec::new();
    }
    let mut with: Vec<Vec<NodeId>> = subsets(&items[1..], size - 1)
        .into_iter()
        .map(|mut s| {
            s.insert(0, items[0]);
            s
        })
        .collect();
    with.extend(subsets(&items[1..], size));
    with
}

fn binomial(n: usize, k: usize) -> f64 {
    (0..k).fold(1.0, |acc, i| acc * (n - i) as f64 / (i + 1) as f64)
}

pub fn enumerate_traces(graph: &Graph, config: &RdsConfig) -> TraceEnumeration {
    let mut out = TraceEnumeration { traces: BTreeMap::new(), exhausted: 0.0 };
    let mut sampled = vec![false; graph.node_count()];
    let mut events = Vec::new();
    for &s in &config.seeds {
        sampled[s] = true;
        events.push(Recruitment::seed(s));
    }
    branch(graph, config, &mut sampled, &mut events, 0, 1.0, &mut out);
    out
}

fn branch(
    graph: &Graph,
    config: &RdsConfig,
    sampled: &mut Vec<bool>,
    events: &mut Vec<Recruitment>,
    q: usize,
    prob: f64,
    out: &mut TraceEnumeration,
) {
    let n = config.sample_size;
    if events.len() == n {
        let key: Vec<_> = events.iter().map(|e| (e.recruiter, e.recruited)).collect();
        let trace = RdsTrace::new(config.coupons, events.clone()).unwrap();
        out.traces.entry(key).or_insert((trace, 0.0)).1 += prob;
        return;
    }
    if q >= events.len() {
        out.exhausted += prob;
        return;
    }
    let x = events[q].recruited;
    let wave = events[q].wave + 1;
    let open: Vec<NodeId> = graph.neighbors(x).filter(|&v| !sampled[v]).collect();
    let take = open.len().min(config.coupons).min(n - events.len());
    let choices = subsets(&open, take);
    let p = prob / choices.len() as f64;
    debug_assert_eq!(choices.len() as f64, binomial(open.len(), take));
    for chosen in choices {
        for &v in &chosen {
            sampled[v] = true;
            events.push(Recruitment::by(x, v, wave));
        }
        branch(graph, config, sampled, events, q + 1, p, out);
        for &v in &chosen {
            sampled[v] = false;
            events.pop();
        }
    }
}

#[derive(Debug)]
pub struct DesignReport {
    pub graphs: usize,
    pub graphs_without_exhaustion: usize,
    /// Largest `|Σ exp(loglik) + P(exhausted) - 1|`.
    pub max_normalisation_error: f64,
    /// Largest difference between a trace's likelihood and its enumerated
    /// probability.
    pub max_trace_error: f64,
}

pub fn design_oracle(graphs: usize, seed: u64) -> DesignReport {
    let mut rng = stream(seed, &[]);
    let mut report =
        DesignReport { graphs: 0, graphs_without_exhaustion: 0, max_normalisation_error: 0.0, max_trace_error: 0.0 };
    while report.graphs < graphs {
        let nodes = rng.random_range(2..=6);
        let alpha = rng.random_range(0.3..1.0);
        let g = sample_graph(&GraphModel::ErdosRenyi { alpha }, nodes, &mut rng).unwrap();
        let seeds = rng.random_range(1..=2usize.min(nodes - 1));
        let config = RdsConfig::with_lowest_seeds(seeds, rng.random_range(1..=3), rng.random_range(seeds..=nodes));
        let e = enumerate_traces(&g, &config);
        let mut total = e.exhausted;
        for (trace, p) in e.traces.values() {
            let l = rds_log_likelihood(trace, &g).exp();
            report.max_trace_error = report.max_trace_error.max((l - p).abs());
            total += l;
        }
        report.max_normalisation_error = report.max_normalisation_error.max((total - 1.0).abs());
        report.graphs += 1;
        if e.exhausted == 0.0 {
            report.graphs_without_exhaustion += 1;
        }
    }
    report
}

/// A random small chain: a population graph, an RDS trace on it, and a
/// random state of `G_MC` with at most `max_mc_nodes` nodes.
pub fn random_chain(rng: &mut StreamRng, max_mc_nodes: usize) -> Option<(ChainContext, ChainState)> {
    let nodes = rng.random_range(4..=9);
    let g = sample_graph(&GraphModel::ErdosRenyi { alpha: rng.random_range(0.3..0.8) }, nodes, rng).unwrap();
    let n = rng.random_range(2..=5.min(nodes - 1));
    let config = RdsConfig::with_lowest_seeds(1, rng.random_range(1..=3), n);
    let trace = simulate_rds(&g, &config, rng).ok()?;
    let y = ResponseVector::from_bits((0..n).map(|_| rng.random_range(0..2)).collect()).unwrap();
    let ctx = ChainContext::new(&trace, y, MrfHyper::default(), AlphaPrior::Beta { omega1: 2.0, omega2: 3.0 }).unwrap();
    let aug = if ctx.anchors().is_empty() { 0 } else { rng.random_range(0..=(max_mc_nodes - n)) };
    let extra = if aug == 0 { 0 } else { rng.random_range(aug..=aug * ctx.anchors().len()) };
    let spec = ComplexitySpec { augmented_nodes: aug, intra_edges: rng.random_range(0..=ctx.intra_pairs().len()), extra_edges: extra };
    let (mut state, _) = ChainState::initialize(&ctx, spec, rng.random_range(0.05..0.95), rng).unwrap();
    state.params = random_params(rng);
    Some((ctx, state))
}

fn extra_list(state: &ChainState, n: usize) -> Vec<(NodeId, NodeId)> {
    state.graph.edges().filter(|&(_, v)| v >= n).map(|(u, v)| (v, u)).collect()
}

fn rebuild(
    ctx: &ChainContext,
    state: &ChainState,
    params: MrfParams,
    aug: &[u8],
    intra: &[(NodeId, NodeId)],
    extra: &[(NodeId, NodeId)],
) -> ChainState {
    ChainState::from_parts(ctx, params, aug, intra, extra, state.alpha).unwrap()
}

fn scalar_proposal_ln(p: &ScalarProposal, to: f64, from: f64, lo: f64, hi: f64, prior_ln: f64) -> f64 {
    let w = hi - lo;
    (p.random_walk * reflected_normal_density(to, from, p.step_fraction * w, lo, hi)
        + p.prior * prior_ln.exp()
        + p.uniform / w)
        .ln()
}

#[derive(Debug, Default)]
pub struct KernelReport {
    pub models: usize,
    pub comparisons: usize,
    pub max_error: f64,
}

/// Compare each kernel's acceptance ratio with the difference of full log
/// joints plus the proposal correction.
pub fn kernel_oracle(models: usize, seed: u64) -> KernelReport {
    let mut rng = stream(seed, &[]);
    let config = KernelConfig::default();
    let mut report = KernelReport::default();
    let record = |expected: f64, got: f64, what: &str, report: &mut KernelReport| {
        assert!(expected.is_finite(), "{what}: non-finite oracle value {expected}");
        report.max_error = report.max_error.max((expected - got).abs());
        report.comparisons += 1;
    };
    while report.models < models {
        let Some((ctx, state)) = random_chain(&mut rng, 8) else { continue };
        report.models += 1;
        let n = ctx.sample_size();
        let hyper = ctx.hyper;
        let intra: Vec<_> = state.intra_edges().collect();
        let extra = extra_list(&state, n);
        let aug = state.augmented_responses().to_vec();
        let base = log_joint(&state, &ctx).total();

        for _ in 0..5 {
            let psi = rng.random_range(-hyper.xi..0.0);
            let new = rebuild(&ctx, &state, MrfParams { psi, ..state.params }, &aug, &intra, &extra);
            let prior = |x: f64| psi_log_prior(x, &hyper);
            let (lo, hi) = (-hyper.xi, 0.0);
            let cur = state.params.psi;
            let expected = log_joint(&new, &ctx).total() - base
                + scalar_proposal_ln(&config.psi, cur, psi, lo, hi, prior(cur))
                - scalar_proposal_ln(&config.psi, psi, cur, lo, hi, prior(psi));
            record(expected, psi_log_acceptance(&state, &ctx, &config, psi), "psi", &mut report);

            let zeta = rng.random_range(0.0..hyper.delta);
            let new = rebuild(&ctx, &state, MrfParams { zeta, ..state.params }, &aug, &intra, &extra);
            let prior = |x: f64| zeta_log_prior(x, &hyper);
            let cur = state.params.zeta;
            let expected = log_joint(&new, &ctx).total() - base
                + scalar_proposal_ln(&config.zeta, cur, zeta, 0.0, hyper.delta, prior(cur))
                - scalar_proposal_ln(&config.zeta, zeta, cur, 0.0, hyper.delta, prior(zeta));
            record(expected, zeta_log_acceptance(&state, &ctx, &config, zeta), "zeta", &mut report);
        }

        if !aug.is_empty() {
            let q = |ys: &[u8]| {
                let cond: Vec<f64> = (0..ys.len())
                    .map(|k| {
                        let v = n + k;
                        let s = state.graph.neighbors(v).filter(|&u| u < n && state.y.is_active(u)).count();
                        normal_cdf(state.params.psi + state.params.zeta * s as f64)
                    })
                    .collect();
                let pbar = ctx.observed_mean();
                let bern = |b: u8, p: f64| if b == 1 { p } else { 1.0 - p };
                let flat: f64 = ys.iter().map(|&b| bern(b, pbar)).product();
                let exact: f64 = ys.iter().zip(&cond).map(|(&b, &p)| bern(b, p)).product();
                (config.responses.observed_prevalence * flat + config.responses.conditional * exact).ln()
            };
            for _ in 0..5 {
                let proposed: Vec<u8> = (0..aug.len()).map(|_| rng.random_range(0..2)).collect();
                let new = rebuild(&ctx, &state, state.params, &proposed, &intra, &extra);
                let expected = log_joint(&new, &ctx).total() - base + q(&aug) - q(&proposed);
                if expected.is_finite() {
                    let got = augmented_response_log_acceptance(&state, &ctx, &config, &proposed);
                    record(expected, got, "responses", &mut report);
                }
            }
            for k in n..n + aug.len() {
                let h = state.graph.degree(k);
                let anchors = ctx.anchors();
                let pick = rand::seq::index::sample(&mut rng, anchors.len(), h);
                let proposed: Vec<NodeId> = pick.into_iter().map(|i| anchors[i]).collect();
                let mut new_extra: Vec<_> = extra.iter().copied().filter(|&(a, _)| a != k).collect();
                new_extra.extend(proposed.iter().map(|&v| (k, v)));
                let new = rebuild(&ctx, &state, state.params, &aug, &intra, &new_extra);
                let expected = log_joint(&new, &ctx).total() - base;
                record(expected, extra_edges_log_acceptance(&state, &ctx, k, &proposed), "extra", &mut report);
            }
        }

        if !intra.is_empty() {
            let pairs = ctx.intra_pairs();
            for _ in 0..5 {
                let pick = rand::seq::index::sample(&mut rng, pairs.len(), intra.len());
                let proposed: Vec<_> = pick.into_iter().map(|i| pairs[i]).collect();
                let new = rebuild(&ctx, &state, state.params, &aug, &proposed, &extra);
                let expected = log_joint(&new, &ctx).total() - base;
                record(expected, intra_edges_log_acceptance(&state, &ctx, &proposed), "intra", &mut report);
            }
        }
    }
    report
}

/// A fixed enumerable model: four participants, one augmented node with two
/// of four possible anchors, and one of two possible intra edges.
pub fn enumerable_model() -> (RdsTrace, ResponseVector, ComplexitySpec) {
    // Two coupons: the seed recruits 1 and 2, then 1 recruits 3 and the
    // sample is complete.
    let trace = RdsTrace::new(
        2,
        vec![Recruitment::seed(0), Recruitment::by(0, 1, 1), Recruitment::by(0, 2, 1), Recruitment::by(1, 3, 2)],
    )
    .unwrap();
    let y = ResponseVector::from_bits(vec![1, 0, 1, 0]).unwrap();
    (trace, y, ComplexitySpec { augmented_nodes: 1, intra_edges: 1, extra_edges: 2 })
}

#[derive(Debug)]
pub struct PosteriorReport {
    pub exact: f64,
    pub estimate: f64,
    pub mc_se: f64,
    pub states: usize,
}

impl PosteriorReport {
    pub fn z(&self) -> f64 {
        (self.estimate - self.exact).abs() / self.mc_se
    }
}

/// Brute-force posterior mean of the prevalence, summing over every
/// admissible graph and augmented response and integrating the parameters
/// with a midpoint rule.
pub fn exact_posterior_mean(ctx: &ChainContext, spec: ComplexitySpec, alpha: f64, grid: usize) -> (f64, usize) {
    let n = ctx.sample_size();
    let anchors = ctx.anchors().to_vec();
    let pairs = ctx.intra_pairs().to_vec();
    let hyper = ctx.hyper;
    let anchor_sets = subsets(&anchors, spec.extra_edges);
    let pair_idx: Vec<NodeId> = (0..pairs.len()).collect();
    let intra_sets = subsets(&pair_idx, spec.intra_edges);
    let mut states = Vec::new();
    for a in &anchor_sets {
        for i in &intra_sets {
            for yk in 0..2u8 {
                let extra: Vec<_> = a.iter().map(|&v| (n, v)).collect();
                let intra: Vec<_> = i.iter().map(|&j| pairs[j]).collect();
                let s = ChainState::from_parts(ctx, hyper.prior_mean(), &[yk], &intra, &extra, alpha).unwrap();
                states.push(s);
            }
        }
    }
    let total_nodes = (n + 1) as f64;
    let observed = ctx.observed().active_count() as f64;
    let (mut num, mut den) = (0.0, 0.0);
    for gi in 0..grid {
        for gj in 0..grid {
            let psi = -hyper.xi * (gi as f64 + 0.5) / grid as f64;
            let zeta = hyper.delta * (gj as f64 + 0.5) / grid as f64;
            for s in states.iter_mut() {
                s.params = MrfParams { psi, zeta };
                let w = log_joint(s, ctx).total().exp();
                let q = (observed + s.augmented_responses()[0] as f64) / total_nodes;
                num += w * q;
                den += w;
            }
        }
    }
    (num / den, states.len())
}

pub fn posterior_oracle(chains: usize, iterations: usize, seed: u64) -> PosteriorReport {
    let (trace, y, spec) = enumerable_model();
    let alpha = 0.4;
    let config = FitConfig {
        population_size: 6,
        complexity_draws: chains,
        run: RunConfig { iterations, burn_in: 1000, thin: 1, retain_graphs: false },
        ..FitConfig::default()
    };
    let mixing = MixingDistribution::from_draws(vec![CalibrationDraw { spec, alpha, redraws: 0 }]).unwrap();
    let fit = fit_with_mixing(&trace, &y, &config, mixing, seed).unwrap();
    assert!(fit.chains.iter().all(|c| c.spec == spec && c.notes.is_empty()), "spec was clipped");
    let (exact, states) = exact_posterior_mean(&fit.context, spec, alpha, 200);
    let w = fit.chains.len() as f64;
    let var: f64 = fit.chains.iter().map(|c| mc_variance(&c.output.prevalence_trace())).sum::<f64>() / (w * w);
    PosteriorReport { exact, estimate: fit.summary.estimate, mc_se: var.sqrt(), states }
}

/// Draw `(trace, responses)` from the fitted model itself: an Erdős–Rényi
/// population, the coupon process, and layered responses with participants
/// in their waves and everyone else in the final layer.
pub fn model_dataset(rng: &mut StreamRng, nodes: usize, alpha: f64, n: usize, params: &MrfParams) -> (RdsTrace, ResponseVector) {
    loop {
        let mut g = sample_graph(&GraphModel::ErdosRenyi { alpha }, nodes, rng).unwrap();
        let Ok(trace) = simulate_rds(&g, &RdsConfig::with_lowest_seeds(1, 2, n), rng) else { continue };
        for v in 0..nodes {
            g.set_label(v, NodeLabel::Augmented);
        }
        for e in trace.events() {
            g.set_label(e.recruited, NodeLabel::Sampled { wave: e.wave });
        }
        let y = sample_responses(&g, params, rng);
        let obs = ResponseVector::from_bits(trace.participants().map(|v| y.get(v)).collect()).unwrap();
        return (trace, obs);
    }
}

#[derive(Debug)]
pub struct PpcReport {
    pub replications: usize,
    pub rejections: usize,
}

/// Posterior predictive checks on data drawn from the model; counts
/// rejections at the 5% level.
pub fn ppc_calibration(replications: usize, seed: u64) -> PpcReport {
    let params = MrfParams { psi: -0.8, zeta: 0.3 };
    let rejections = rdsinfer::par::map_indices(replications, |r| {
        let mut rng = stream(seed, &[r as u64]);
        let (trace, y) = model_dataset(&mut rng, 30, 0.15, 12, &params);
        let config = FitConfig {
            population_size: 30,
            calibration_draws: 200,
            complexity_draws: 2,
            run: RunConfig { iterations: 1500, burn_in: 1000, thin: 1, retain_graphs: true },
            graph_prior: rdsinfer::bma::GraphPrior::ErdosRenyi { alpha: AlphaPrior::beta_with_mean(0.15, 40.0).unwrap() },
            ..FitConfig::default()
        };
        let fit = rdsinfer::bma::fit(&trace, &y, &config, rng.random()).unwrap();
        let ppc = posterior_predictive_check(&fit, 200, rng.random()).unwrap();
        ppc.tail_probability < 0.05
    })
    .into_iter()
    .filter(|&r| r)
    .count();
    PpcReport { replications, rejections }
}

/// ESS of the prevalence trace at a given regime, averaged over chains.
pub fn ess_at_regime(nodes: usize, density: f64, emitted: usize, chains: usize, seed: u64) -> Vec<f64> {
    use rdsinfer::harness::{calibrate_truth, observe, simulate_population, Regime};
    let mut regime = Regime {
        population_size: nodes,
        truth: GraphModel::ErdosRenyi { alpha: density },
        sample_size: nodes / 4,
        ..Regime::default()
    };
    let params = calibrate_truth(&regime, seed).unwrap();
    regime.field.params = Some(params);
    let mut rng = stream(seed, &[1]);
    let (g, y, trace, _) = simulate_population(&regime, &params, &mut rng).unwrap();
    let data = observe(&g, &y, &trace).unwrap();
    let mut config = regime.fit_config().unwrap();
    config.run = RunConfig { iterations: 3000 + emitted, burn_in: 3000, thin: 1, retain_graphs: false };
    config.complexity_draws = chains;
    let fit = rdsinfer::bma::fit(&trace, &data.response, &config, seed).unwrap();
    fit.chains.iter().map(|c| ess(&c.output.prevalence_trace())).collect()
}
