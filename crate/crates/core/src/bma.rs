//! Model averaging over the size of the unobserved graph.
//!
//! The number of augmented nodes and edges is unknown. A prior over it is
//! calibrated by simulation. Draw a population graph from the graph prior,
//! run the coupon process on it, and measure the sampled neighbourhood.
//! The fit then draws `W` specifications from that distribution, runs one
//! chain per specification, and pools the prevalence draws.

use std::collections::BTreeMap;

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::diagnostics::{ess, mc_variance};
use crate::error::{Error, Result};
use crate::graph::{sample_graph, AlphaPrior, Graph, GraphModel};
use crate::mcmc::{run_chain, AcceptanceStats, ChainContext, ChainOutput, ChainState, KernelConfig, RunConfig};
use crate::mrf::{MrfHyper, ResponseVector};
use crate::par;
use crate::rds::{simulate_rds, RdsConfig, RdsTrace};
use crate::rng::{stream, tag};
use crate::stats::{central_interval, mean};

pub use crate::mcmc::ComplexitySpec;

/// Redraws allowed per calibration draw when the coupon process dies out.
pub const EXHAUSTION_RETRIES: usize = 100;

/// Prior over the population graph used for calibration.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "family", rename_all = "snake_case")]
pub enum GraphPrior {
    ErdosRenyi { alpha: AlphaPrior },
    /// Product-Bernoulli propensities. Chains use the realised density of
    /// each calibration graph as their edge probability.
    ProductBernoulli { a1: f64, a2: f64 },
}

impl Default for GraphPrior {
    fn default() -> Self {
        GraphPrior::ErdosRenyi { alpha: AlphaPrior::Beta { omega1: 1.0, omega2: 1.0 } }
    }
}

impl GraphPrior {
    pub fn validate(&self) -> Result<()> {
        match self {
            GraphPrior::ErdosRenyi { alpha } => alpha.validate(),
            GraphPrior::ProductBernoulli { a1, a2 } => {
                GraphModel::ProductBernoulli { a1: *a1, a2: *a2 }.validate(2)
            }
        }
    }

    fn draw<R: Rng + ?Sized>(&self, nodes: usize, rng: &mut R) -> Result<(Graph, f64)> {
        match *self {
            GraphPrior::ErdosRenyi { alpha } => {
                let a = alpha.sample(rng)?;
                Ok((sample_graph(&GraphModel::ErdosRenyi { alpha: a }, nodes, rng)?, a))
            }
            GraphPrior::ProductBernoulli { a1, a2 } => {
                let g = sample_graph(&GraphModel::ProductBernoulli { a1, a2 }, nodes, rng)?;
                let density = g.density();
                Ok((g, density))
            }
        }
    }

    /// Prior on the edge probability seen by the chains.
    pub fn chain_alpha_prior(&self) -> AlphaPrior {
        match *self {
            GraphPrior::ErdosRenyi { alpha } => alpha,
            GraphPrior::ProductBernoulli { .. } => AlphaPrior::Beta { omega1: 1.0, omega2: 1.0 },
        }
    }
}

/// Shape of the recruitment design: enough to replay it on a simulated graph.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct DesignShape {
    pub seed_count: usize,
    pub coupons: usize,
    pub sample_size: usize,
}

impl DesignShape {
    pub fn of(trace: &RdsTrace) -> Self {
        DesignShape { seed_count: trace.seed_count(), coupons: trace.coupons(), sample_size: trace.len() }
    }
}

/// One calibration draw: the complexity it produced and its edge probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationDraw {
    pub spec: ComplexitySpec,
    pub alpha: f64,
    /// Graphs discarded because recruitment died out.
    pub redraws: usize,
}

/// Empirical distribution of calibration draws, each with equal mass.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MixingDistribution {
    draws: Vec<CalibrationDraw>,
}

impl MixingDistribution {
    pub fn from_draws(draws: Vec<CalibrationDraw>) -> Result<Self> {
        if draws.is_empty() {
            return Err(Error::InvalidInput("a mixing distribution needs at least one draw".into()));
        }
        Ok(MixingDistribution { draws })
    }

    pub fn draws(&self) -> &[CalibrationDraw] {
        &self.draws
    }

    /// Distinct specifications with their counts, in specification order.
    pub fn frequencies(&self) -> Vec<(ComplexitySpec, usize)> {
        let mut counts: BTreeMap<ComplexitySpec, usize> = BTreeMap::new();
        for d in &self.draws {
            *counts.entry(d.spec).or_default() += 1;
        }
        counts.into_iter().collect()
    }

    pub fn redraws(&self) -> usize {
        self.draws.iter().map(|d| d.redraws).sum()
    }

    pub fn sample<R: Rng + ?Sized>(&self, rng: &mut R) -> CalibrationDraw {
        self.draws[rng.random_range(0..self.draws.len())]
    }
}

/// Complexity of the neighbourhood of a sample on a population graph.
pub fn complexity_of(graph: &Graph, trace: &RdsTrace) -> ComplexitySpec {
    let mut wave = vec![None; graph.node_count()];
    for e in trace.events() {
        wave[e.recruited] = Some(e.wave);
    }
    let recruitment: std::collections::BTreeSet<(usize, usize)> =
        trace.recruitment_edges().map(|(a, b)| (a.min(b), a.max(b))).collect();
    let mut spec = ComplexitySpec::default();
    let mut touched = vec![false; graph.node_count()];
    for (u, v) in graph.edges() {
        match (wave[u], wave[v]) {
            (Some(a), Some(b)) => {
                if a != b && !recruitment.contains(&(u, v)) {
                    spec.intra_edges += 1;
                }
            }
            (Some(_), None) => {
                spec.extra_edges += 1;
                touched[v] = true;
            }
            (None, Some(_)) => {
                spec.extra_edges += 1;
                touched[u] = true;
            }
            (None, None) => {}
        }
    }
    spec.augmented_nodes = touched.iter().filter(|&&t| t).count();
    spec
}

/// Simulate `draws` population graphs from `prior` and record the
/// complexity of an RDS sample on each.
pub fn calibrate_mixing(
    prior: &GraphPrior,
    population_size: usize,
    shape: &DesignShape,
    draws: usize,
    seed: u64,
) -> Result<MixingDistribution> {
    prior.validate()?;
    if draws == 0 {
        return Err(Error::domain("at least one calibration draw is required"));
    }
    let config = RdsConfig::with_lowest_seeds(shape.seed_count, shape.coupons, shape.sample_size);
    config.validate(population_size)?;
    let results = par::map_indices(draws, |i| -> Result<CalibrationDraw> {
        let mut rng = stream(seed, &[tag::CALIBRATION, i as u64]);
        let mut last = None;
        for redraws in 0..=EXHAUSTION_RETRIES {
            let (graph, alpha) = prior.draw(population_size, &mut rng)?;
            match simulate_rds(&graph, &config, &mut rng) {
                Ok(trace) => return Ok(CalibrationDraw { spec: complexity_of(&graph, &trace), alpha, redraws }),
                Err(e @ Error::TraceExhausted { .. }) => last = Some(e),
                Err(e) => return Err(e),
            }
        }
        Err(last.expect("at least one attempt"))
    });
    MixingDistribution::from_draws(results.into_iter().collect::<Result<Vec<_>>>()?)
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct FitConfig {
    pub population_size: usize,
    pub graph_prior: GraphPrior,
    pub hyper: MrfHyper,
    pub calibration_draws: usize,
    pub complexity_draws: usize,
    pub run: RunConfig,
    pub kernel: KernelConfig,
    pub level: f64,
}

impl Default for FitConfig {
    fn default() -> Self {
        FitConfig {
            population_size: 0,
            graph_prior: GraphPrior::default(),
            hyper: MrfHyper::default(),
            calibration_draws: 1000,
            complexity_draws: 5,
            run: RunConfig::default(),
            kernel: KernelConfig::default(),
            level: 0.95,
        }
    }
}

impl FitConfig {
    pub fn validate(&self) -> Result<()> {
        self.graph_prior.validate()?;
        self.hyper.validate()?;
        self.run.validate()?;
        self.kernel.validate()?;
        if self.complexity_draws == 0 || self.calibration_draws == 0 {
            return Err(Error::domain("calibration and complexity draws must be positive"));
        }
        if !(self.level > 0.0 && self.level < 1.0) {
            return Err(Error::domain(format!("interval level {} outside (0, 1)", self.level)));
        }
        Ok(())
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SpecWeight {
    pub spec: ComplexitySpec,
    pub weight: f64,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PosteriorSummary {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
    pub level: f64,
    pub draws: usize,
    pub spec_weights: Vec<SpecWeight>,
}

impl PosteriorSummary {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// One chain of a fit.
#[derive(Clone, Debug)]
pub struct ChainRun {
    pub draw: CalibrationDraw,
    /// Specification after clipping to the observed trace.
    pub spec: ComplexitySpec,
    pub notes: Vec<String>,
    pub output: ChainOutput,
}

#[derive(Clone, Debug)]
pub struct FitOutput {
    pub summary: PosteriorSummary,
    pub chains: Vec<ChainRun>,
    pub mixing: MixingDistribution,
    pub context: ChainContext,
    pub seed: u64,
}

impl FitOutput {
    pub fn pooled(&self) -> Vec<f64> {
        self.chains.iter().flat_map(|c| c.output.prevalence_trace()).collect()
    }
}

/// Fit the model to an observed trace and the participants' responses
/// (in trace order).
pub fn fit(trace: &RdsTrace, response: &ResponseVector, config: &FitConfig, seed: u64) -> Result<FitOutput> {
    config.validate()?;
    let mixing = calibrate_mixing(
        &config.graph_prior,
        config.population_size,
        &DesignShape::of(trace),
        config.calibration_draws,
        seed,
    )?;
    fit_with_mixing(trace, response, config, mixing, seed)
}

/// Fit with a given mixing distribution instead of calibrating one.
pub fn fit_with_mixing(
    trace: &RdsTrace,
    response: &ResponseVector,
    config: &FitConfig,
    mixing: MixingDistribution,
    seed: u64,
) -> Result<FitOutput> {
    config.validate()?;
    let ctx = ChainContext::new(trace, response.clone(), config.hyper, config.graph_prior.chain_alpha_prior())?;
    let mut pick = stream(seed, &[tag::COMPLEXITY]);
    let draws: Vec<CalibrationDraw> = (0..config.complexity_draws).map(|_| mixing.sample(&mut pick)).collect();
    let runs = par::map_indices(draws.len(), |w| -> Result<ChainRun> {
        let mut rng = stream(seed, &[tag::CHAIN, w as u64]);
        let draw = draws[w];
        let (init, notes) = ChainState::initialize(&ctx, draw.spec, draw.alpha, &mut rng)?;
        let spec = init.spec;
        let output = run_chain(init, &ctx, &config.kernel, &config.run, &mut rng)?;
        Ok(ChainRun { draw, spec, notes, output })
    });
    let chains = runs.into_iter().collect::<Result<Vec<_>>>()?;
    for (w, c) in chains.iter().enumerate() {
        for note in &c.notes {
            log::warn!("chain {w}: {note}");
        }
    }
    let pooled: Vec<f64> = chains.iter().flat_map(|c| c.output.prevalence_trace()).collect();
    let (lower, upper) = central_interval(&pooled, config.level);
    let mut weights: BTreeMap<ComplexitySpec, usize> = BTreeMap::new();
    for c in &chains {
        *weights.entry(c.spec).or_default() += 1;
    }
    let summary = PosteriorSummary {
        estimate: mean(&pooled),
        lower,
        upper,
        level: config.level,
        draws: pooled.len(),
        spec_weights: weights
            .into_iter()
            .map(|(spec, count)| SpecWeight { spec, weight: count as f64 / chains.len() as f64 })
            .collect(),
    };
    Ok(FitOutput { summary, chains, mixing, context: ctx, seed })
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ChainReport {
    pub chain: usize,
    pub spec: ComplexitySpec,
    pub alpha: f64,
    pub notes: Vec<String>,
    pub mean_q: f64,
    pub ess_q: f64,
    pub mc_se_q: f64,
    pub acceptance: AcceptanceStats,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct CalibrationReport {
    pub draws: usize,
    pub redraws: usize,
    pub distinct_specs: usize,
}

/// Serialisable summary of a fit.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct FitReport {
    pub seed: u64,
    pub estimate: f64,
    pub interval: [f64; 2],
    pub level: f64,
    pub spec_weights: Vec<SpecWeight>,
    pub chains: Vec<ChainReport>,
    pub calibration: CalibrationReport,
}

impl FitReport {
    pub fn from_output(fit: &FitOutput) -> Self {
        let chains = fit
            .chains
            .iter()
            .enumerate()
            .map(|(w, c)| {
                let q = c.output.prevalence_trace();
                ChainReport {
                    chain: w,
                    spec: c.spec,
                    alpha: c.draw.alpha,
                    notes: c.notes.clone(),
                    mean_q: mean(&q),
                    ess_q: ess(&q),
                    mc_se_q: mc_variance(&q).sqrt(),
                    acceptance: c.output.acceptance,
                }
            })
            .collect();
        FitReport {
            seed: fit.seed,
            estimate: fit.summary.estimate,
            interval: [fit.summary.lower, fit.summary.upper],
            level: fit.summary.level,
            spec_weights: fit.summary.spec_weights.clone(),
            chains,
            calibration: CalibrationReport {
                draws: fit.mixing.draws().len(),
                redraws: fit.mixing.redraws(),
                distinct_specs: fit.mixing.frequencies().len(),
            },
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rds::Recruitment;

    #[test]
    fn complexity_counts_neighbourhood() {
        // Participants 0 (seed), 1, 2 (wave 1), 3 (wave 2); outside nodes 4, 5, 6.
        let g = Graph::from_edges(7, &[(0, 1), (0, 2), (1, 3), (2, 3), (1, 2), (3, 4), (0, 4), (2, 5)]).unwrap();
        let trace = RdsTrace::new(
            2,
            vec![Recruitment::seed(0), Recruitment::by(0, 1, 1), Recruitment::by(0, 2, 1), Recruitment::by(1, 3, 2)],
        )
        .unwrap();
        let spec = complexity_of(&g, &trace);
        assert_eq!(spec, ComplexitySpec { augmented_nodes: 2, intra_edges: 1, extra_edges: 3 });
    }

    #[test]
    fn empty_prior_graph_yields_no_augmentation() {
        let prior = GraphPrior::ErdosRenyi { alpha: AlphaPrior::PointMass { alpha: 1.0 } };
        let shape = DesignShape { seed_count: 1, coupons: 2, sample_size: 1 };
        let mixing = calibrate_mixing(&prior, 6, &shape, 4, 1).unwrap();
        // Seed only: every other node of the complete graph is an outside neighbour.
        assert_eq!(mixing.frequencies(), vec![(ComplexitySpec { augmented_nodes: 5, intra_edges: 0, extra_edges: 5 }, 4)]);
    }

    #[test]
    fn exhausted_calibration_reports_error() {
        let prior = GraphPrior::ErdosRenyi { alpha: AlphaPrior::PointMass { alpha: 0.0 } };
        let shape = DesignShape { seed_count: 1, coupons: 2, sample_size: 3 };
        assert!(matches!(calibrate_mixing(&prior, 10, &shape, 2, 3), Err(Error::TraceExhausted { .. })));
    }
}
