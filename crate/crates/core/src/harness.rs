//! Simulation studies: repeated truth generation, sampling, and estimation.
//!
//! A regime fixes a population graph family, the design, and a response
//! field whose long-run prevalence is calibrated to a target. Each replicate
//! draws a population, runs the design on it, and scores every estimator
//! against both the target and the realised population prevalence.

use std::io::Write;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::baselines::{naive, vh_bootstrap_ci, volz_heckathorn, BootstrapScheme, MIN_RESAMPLES};
use crate::bma::{fit, FitConfig, GraphPrior};
use crate::error::{Error, Result};
use crate::graph::{sample_graph, AlphaPrior, Graph, GraphModel};
use crate::mrf::{gibbs_sweeps, MrfParams, ResponseVector};
use crate::par;
use crate::rds::{simulate_rds, RdsConfig, RdsDataset, RdsTrace};
use crate::rng::{stream, tag, StreamRng};
use crate::stats::{central_interval, mean, quantile, std_dev};
use rand::Rng;

/// Replicate count used unless the full-scale flag is set.
pub const DESK_REPLICATES: usize = 30;
/// Replicate count of the full-scale studies.
pub const FULL_REPLICATES: usize = 100;
/// Population redraws allowed when recruitment dies out.
pub const REPLICATE_RETRIES: usize = 100;

/// Response field of the population.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TruthField {
    /// Long-run prevalence the field is calibrated to.
    pub target_prevalence: f64,
    /// `ζ` times the expected degree.
    pub coupling: f64,
    /// Fixed parameters; skips calibration when set.
    pub params: Option<MrfParams>,
    /// Gibbs sweeps discarded before a population response is read.
    pub burn_in_sweeps: usize,
    /// Graphs averaged per calibration step.
    pub calibration_graphs: usize,
    /// Sweeps averaged per calibration graph after burn-in.
    pub calibration_sweeps: usize,
    pub bisection_steps: usize,
}

impl Default for TruthField {
    fn default() -> Self {
        TruthField {
            target_prevalence: 0.2,
            coupling: 0.5,
            params: None,
            burn_in_sweeps: 500,
            calibration_graphs: 8,
            calibration_sweeps: 200,
            bisection_steps: 20,
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Estimators {
    pub bayes: bool,
    pub vh: bool,
}

impl Default for Estimators {
    fn default() -> Self {
        Estimators { bayes: true, vh: true }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Regime {
    pub name: String,
    pub truth: GraphModel,
    pub population_size: usize,
    pub sample_size: usize,
    pub seeds: usize,
    pub coupons: usize,
    pub field: TruthField,
    pub replicates: usize,
    pub estimators: Estimators,
    /// Fit prior on the graph. Defaults to an Erdős–Rényi prior whose Beta
    /// mean is the truth's expected density.
    pub fit_prior: Option<GraphPrior>,
    pub prior_concentration: f64,
    pub fit: FitConfig,
    pub bootstrap_resamples: usize,
    pub bootstrap_scheme: BootstrapScheme,
}

impl Default for Regime {
    fn default() -> Self {
        Regime {
            name: "er-0.1".into(),
            truth: GraphModel::ErdosRenyi { alpha: 0.1 },
            population_size: 200,
            sample_size: 50,
            seeds: 1,
            coupons: 3,
            field: TruthField::default(),
            replicates: DESK_REPLICATES,
            estimators: Estimators::default(),
            fit_prior: None,
            prior_concentration: 40.0,
            fit: FitConfig::default(),
            bootstrap_resamples: 1000,
            bootstrap_scheme: BootstrapScheme::Chain,
        }
    }
}

impl Regime {
    pub fn validate(&self) -> Result<()> {
        self.truth.validate(self.population_size)?;
        let density = self.truth.expected_density(self.population_size);
        if !(density > 0.0 && density < 1.0) {
            return Err(Error::domain(format!("truth density {density} outside (0, 1)")));
        }
        RdsConfig::with_lowest_seeds(self.seeds, self.coupons, self.sample_size).validate(self.population_size)?;
        let f = &self.field;
        if !(f.target_prevalence > 0.0 && f.target_prevalence < 1.0) {
            return Err(Error::domain(format!("target prevalence {} outside (0, 1)", f.target_prevalence)));
        }
        if !f.coupling.is_finite() || f.calibration_graphs == 0 || f.calibration_sweeps == 0 {
            return Err(Error::domain("invalid response-field calibration settings"));
        }
        if self.replicates == 0 {
            return Err(Error::domain("at least one replicate is required"));
        }
        if self.estimators.vh && self.bootstrap_resamples < MIN_RESAMPLES {
            return Err(Error::domain(format!("at least {MIN_RESAMPLES} bootstrap resamples are required")));
        }
        self.fit_config()?.validate()
    }

    pub fn fit_prior(&self) -> Result<GraphPrior> {
        match self.fit_prior {
            Some(p) => Ok(p),
            None => Ok(GraphPrior::ErdosRenyi {
                alpha: AlphaPrior::beta_with_mean(
                    self.truth.expected_density(self.population_size),
                    self.prior_concentration,
                )?,
            }),
        }
    }

    /// Fit configuration with the population size and graph prior filled in.
    pub fn fit_config(&self) -> Result<FitConfig> {
        Ok(FitConfig { population_size: self.population_size, graph_prior: self.fit_prior()?, ..self.fit.clone() })
    }

    fn design(&self) -> RdsConfig {
        RdsConfig::with_lowest_seeds(self.seeds, self.coupons, self.sample_size)
    }
}

/// Mean population prevalence after burn-in, averaged over sweeps and over
/// `graphs` populations drawn from common random numbers.
fn long_run_prevalence(regime: &Regime, params: &MrfParams, seed: u64) -> Result<f64> {
    let f = &regime.field;
    let values = par::map_indices(f.calibration_graphs, |g| -> Result<f64> {
        let mut rng = stream(seed, &[tag::PSI_CALIBRATION, g as u64]);
        let graph = sample_graph(&regime.truth, regime.population_size, &mut rng)?;
        let mut y = ResponseVector::zeros(graph.node_count());
        gibbs_sweeps(&mut y, &graph, params, f.burn_in_sweeps, &mut rng);
        let mut total = 0.0;
        for _ in 0..f.calibration_sweeps {
            gibbs_sweeps(&mut y, &graph, params, 1, &mut rng);
            total += y.mean();
        }
        Ok(total / f.calibration_sweeps as f64)
    });
    Ok(mean(&values.into_iter().collect::<Result<Vec<_>>>()?))
}

/// Response-field parameters of a regime: `ζ` from the coupling and the
/// expected degree, `ψ` by bisection so the long-run prevalence hits the
/// target.
pub fn calibrate_truth(regime: &Regime, seed: u64) -> Result<MrfParams> {
    if let Some(p) = regime.field.params {
        return Ok(p);
    }
    let degree = regime.truth.expected_density(regime.population_size) * (regime.population_size - 1) as f64;
    let zeta = regime.field.coupling / degree.max(1.0);
    let (mut lo, mut hi) = (-4.0f64, 4.0f64);
    for _ in 0..regime.field.bisection_steps {
        let mid = 0.5 * (lo + hi);
        let q = long_run_prevalence(regime, &MrfParams { psi: mid, zeta }, seed)?;
        if q < regime.field.target_prevalence {
            lo = mid;
        } else {
            hi = mid;
        }
    }
    Ok(MrfParams { psi: 0.5 * (lo + hi), zeta })
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Estimate {
    pub estimate: f64,
    pub lower: f64,
    pub upper: f64,
}

impl Estimate {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Outcome of one replicate.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ReplicateRow {
    pub replicate: usize,
    pub q_inf: f64,
    pub q_emp: f64,
    pub realized_density: f64,
    pub naive: f64,
    pub bayes: Option<Estimate>,
    pub vh: Option<Estimate>,
    /// Populations discarded because recruitment died out.
    pub redraws: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Method {
    Bayes,
    Vh,
}

impl Method {
    pub fn name(self) -> &'static str {
        match self {
            Method::Bayes => "bayes",
            Method::Vh => "vh",
        }
    }

    fn pick(self, row: &ReplicateRow) -> Option<Estimate> {
        match self {
            Method::Bayes => row.bayes,
            Method::Vh => row.vh,
        }
    }
}

/// Aggregates of one estimator across replicates. Bias is `Q - Q̂`.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MethodSummary {
    pub method: Method,
    pub replicates: usize,
    pub bias_inf: f64,
    pub bias_emp: f64,
    pub coverage_inf: f64,
    pub coverage_emp: f64,
    pub mean_length: f64,
    /// Mean squared error against the realised prevalence.
    pub mse: f64,
    /// Standard deviation of the squared errors.
    pub mse_sd: f64,
}

impl MethodSummary {
    pub fn from_rows(method: Method, rows: &[ReplicateRow]) -> Option<Self> {
        let pairs: Vec<(&ReplicateRow, Estimate)> = rows.iter().filter_map(|r| method.pick(r).map(|e| (r, e))).collect();
        if pairs.is_empty() {
            return None;
        }
        let k = pairs.len() as f64;
        let avg = |f: &dyn Fn(&ReplicateRow, &Estimate) -> f64| pairs.iter().map(|(r, e)| f(r, e)).sum::<f64>() / k;
        let squared: Vec<f64> = pairs.iter().map(|(r, e)| (r.q_emp - e.estimate).powi(2)).collect();
        Some(MethodSummary {
            method,
            replicates: pairs.len(),
            bias_inf: avg(&|r, e| r.q_inf - e.estimate),
            bias_emp: avg(&|r, e| r.q_emp - e.estimate),
            coverage_inf: avg(&|r, e| e.covers(r.q_inf) as u8 as f64),
            coverage_emp: avg(&|r, e| e.covers(r.q_emp) as u8 as f64),
            mean_length: avg(&|_, e| e.length()),
            mse: mean(&squared),
            mse_sd: if squared.len() > 1 { std_dev(&squared) } else { 0.0 },
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ExcludedReplicate {
    pub replicate: usize,
    pub error: String,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RegimeResult {
    pub regime: Regime,
    pub truth_params: MrfParams,
    pub seed: u64,
    pub rows: Vec<ReplicateRow>,
    pub excluded: Vec<ExcludedReplicate>,
    pub summaries: Vec<MethodSummary>,
}

impl RegimeResult {
    pub fn summary(&self, method: Method) -> Option<&MethodSummary> {
        self.summaries.iter().find(|s| s.method == method)
    }

    /// `replicate, q_inf, q_emp, realized_density, naive, redraws` followed
    /// by estimate and bounds of each estimator (empty when not run).
    pub fn write_replicates_csv<W: Write>(&self, writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "replicate",
            "q_inf",
            "q_emp",
            "realized_density",
            "naive",
            "redraws",
            "bayes",
            "bayes_lower",
            "bayes_upper",
            "vh",
            "vh_lower",
            "vh_upper",
        ])?;
        let cells = |e: Option<Estimate>| match e {
            Some(e) => [e.estimate.to_string(), e.lower.to_string(), e.upper.to_string()],
            None => Default::default(),
        };
        for r in &self.rows {
            let mut rec = vec![
                r.replicate.to_string(),
                r.q_inf.to_string(),
                r.q_emp.to_string(),
                r.realized_density.to_string(),
                r.naive.to_string(),
                r.redraws.to_string(),
            ];
            rec.extend(cells(r.bayes));
            rec.extend(cells(r.vh));
            wtr.write_record(&rec)?;
        }
        wtr.flush()?;
        Ok(())
    }

    /// Header plus the summary rows of every estimator, each prefixed with
    /// `label`.
    pub fn write_summary_csv<W: Write>(results: &[(String, &RegimeResult)], writer: W) -> Result<()> {
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record([
            "label",
            "method",
            "replicates",
            "excluded",
            "bias_inf",
            "bias_emp",
            "coverage_inf",
            "coverage_emp",
            "mean_length",
            "mse",
            "mse_sd",
            "mean_realized_density",
        ])?;
        for (label, res) in results {
            let densities: Vec<f64> = res.rows.iter().map(|r| r.realized_density).collect();
            for s in &res.summaries {
                wtr.write_record(&[
                    label.clone(),
                    s.method.name().to_string(),
                    s.replicates.to_string(),
                    res.excluded.len().to_string(),
                    s.bias_inf.to_string(),
                    s.bias_emp.to_string(),
                    s.coverage_inf.to_string(),
                    s.coverage_emp.to_string(),
                    s.mean_length.to_string(),
                    s.mse.to_string(),
                    s.mse_sd.to_string(),
                    mean(&densities).to_string(),
                ])?;
            }
        }
        wtr.flush()?;
        Ok(())
    }
}

/// Draw a population with responses and run the design on it, redrawing the
/// population while recruitment dies out.
pub fn simulate_population(
    regime: &Regime,
    params: &MrfParams,
    rng: &mut StreamRng,
) -> Result<(Graph, ResponseVector, RdsTrace, usize)> {
    let design = regime.design();
    let mut last = None;
    for redraws in 0..=REPLICATE_RETRIES {
        let graph = sample_graph(&regime.truth, regime.population_size, rng)?;
        match simulate_rds(&graph, &design, rng) {
            Ok(trace) => {
                let mut y = ResponseVector::zeros(graph.node_count());
                gibbs_sweeps(&mut y, &graph, params, regime.field.burn_in_sweeps, rng);
                return Ok((graph, y, trace, redraws));
            }
            Err(e @ Error::TraceExhausted { .. }) => last = Some(e),
            Err(e) => return Err(e),
        }
    }
    Err(last.expect("at least one attempt"))
}

/// Observed data of a trace on a population: responses and true degrees of
/// the participants in trace order.
pub fn observe(graph: &Graph, y: &ResponseVector, trace: &RdsTrace) -> Result<RdsDataset> {
    let ids: Vec<usize> = trace.participants().collect();
    let response = ResponseVector::from_bits(ids.iter().map(|&v| y.get(v)).collect())?;
    let degree = ids.iter().map(|&v| graph.degree(v)).collect();
    RdsDataset::new(trace.clone(), degree, response)
}

fn run_replicate(regime: &Regime, params: &MrfParams, fit_config: &FitConfig, i: usize, seed: u64) -> Result<ReplicateRow> {
    let mut rng = stream(seed, &[tag::REPLICATE, i as u64]);
    let (graph, y, trace, redraws) = simulate_population(regime, params, &mut rng)?;
    let data = observe(&graph, &y, &trace)?;
    let bayes = if regime.estimators.bayes {
        let out = fit(&trace, &data.response, fit_config, rng.random())?;
        Some(Estimate { estimate: out.summary.estimate, lower: out.summary.lower, upper: out.summary.upper })
    } else {
        None
    };
    let vh = if regime.estimators.vh {
        let estimate = volz_heckathorn(data.response.as_slice(), &data.reported_degree)?;
        let mut boot = stream(seed, &[tag::REPLICATE, i as u64, tag::BOOTSTRAP]);
        let ci = vh_bootstrap_ci(
            &data,
            regime.bootstrap_resamples,
            fit_config.level,
            regime.bootstrap_scheme,
            &mut boot,
        )?;
        Some(Estimate { estimate, lower: ci.lower, upper: ci.upper })
    } else {
        None
    };
    Ok(ReplicateRow {
        replicate: i,
        q_inf: regime.field.target_prevalence,
        q_emp: y.mean(),
        realized_density: graph.density(),
        naive: naive(&data.response),
        bayes,
        vh,
        redraws,
    })
}

/// Run every replicate of a regime. Failed replicates are logged, excluded
/// from the aggregates, and listed in the result.
pub fn run_regime(regime: &Regime, seed: u64) -> Result<RegimeResult> {
    regime.validate()?;
    let params = calibrate_truth(regime, seed)?;
    log::info!("regime {}: truth psi {:.4}, zeta {:.4}", regime.name, params.psi, params.zeta);
    let fit_config = regime.fit_config()?;
    let outcomes = par::map_indices(regime.replicates, |i| run_replicate(regime, &params, &fit_config, i, seed));
    let mut rows = Vec::new();
    let mut excluded = Vec::new();
    for (i, o) in outcomes.into_iter().enumerate() {
        match o {
            Ok(r) => rows.push(r),
            Err(e) => {
                log::warn!("regime {}: replicate {i} excluded: {e}", regime.name);
                excluded.push(ExcludedReplicate { replicate: i, error: e.to_string() });
            }
        }
    }
    if rows.is_empty() {
        return Err(Error::NoReplicates(excluded.len()));
    }
    let summaries = [Method::Bayes, Method::Vh].into_iter().filter_map(|m| MethodSummary::from_rows(m, &rows)).collect();
    Ok(RegimeResult { regime: regime.clone(), truth_params: params, seed, rows, excluded, summaries })
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum SweepAxis {
    Coupons,
    Density,
    SampleFraction,
}

impl SweepAxis {
    /// The base regime moved to `value` along this axis.
    pub fn apply(self, base: &Regime, value: f64) -> Result<Regime> {
        let mut r = base.clone();
        match self {
            SweepAxis::Coupons => {
                if value < 1.0 || value.fract() != 0.0 {
                    return Err(Error::domain(format!("coupon count {value} is not a positive integer")));
                }
                r.coupons = value as usize;
            }
            SweepAxis::Density => {
                r.truth = match base.truth {
                    GraphModel::ErdosRenyi { .. } => GraphModel::ErdosRenyi { alpha: value },
                    GraphModel::SmallWorld { rewire, .. } => {
                        let degree = value * (base.population_size - 1) as f64;
                        GraphModel::SmallWorld { ring_degree: ((degree / 2.0).round() as usize).max(1) * 2, rewire }
                    }
                    GraphModel::ProductBernoulli { a1, a2 } => {
                        let m = value.sqrt();
                        let c = a1 + a2;
                        GraphModel::ProductBernoulli { a1: m * c, a2: (1.0 - m) * c }
                    }
                };
            }
            SweepAxis::SampleFraction => {
                r.sample_size = (value * base.population_size as f64).round() as usize;
            }
        }
        r.name = format!("{}-{}-{value}", base.name, self.name());
        Ok(r)
    }

    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::Coupons => "coupons",
            SweepAxis::Density => "density",
            SweepAxis::SampleFraction => "sample_fraction",
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SweepPoint {
    pub value: f64,
    pub result: RegimeResult,
}

/// Run a regime at every grid value along `axis`.
pub fn run_mse_sweep(axis: SweepAxis, grid: &[f64], base: &Regime, seed: u64) -> Result<Vec<SweepPoint>> {
    grid.iter()
        .enumerate()
        .map(|(i, &value)| {
            let regime = axis.apply(base, value)?;
            let result = run_regime(&regime, crate::rng::derive_seed(seed, &[tag::GRID, i as u64]))?;
            Ok(SweepPoint { value, result })
        })
        .collect()
}

/// `axis, value, method, replicates, mse, mse_sd`.
pub fn write_sweep_csv<W: Write>(axis: SweepAxis, points: &[SweepPoint], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["axis", "value", "method", "replicates", "mse", "mse_sd"])?;
    for p in points {
        for s in &p.result.summaries {
            wtr.write_record(&[
                axis.name().to_string(),
                p.value.to_string(),
                s.method.name().to_string(),
                s.replicates.to_string(),
                s.mse.to_string(),
                s.mse_sd.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Small-world truth with a given average degree and rewiring probability.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct SmallWorldTruth {
    pub degree: usize,
    pub rewire: f64,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum FitFamily {
    ErdosRenyi,
    ProductBernoulli,
}

impl FitFamily {
    pub fn name(self) -> &'static str {
        match self {
            FitFamily::ErdosRenyi => "erdos_renyi",
            FitFamily::ProductBernoulli => "product_bernoulli",
        }
    }

    /// Prior of this family whose expected density is `density`.
    pub fn prior(self, density: f64, concentration: f64) -> Result<GraphPrior> {
        Ok(match self {
            FitFamily::ErdosRenyi => GraphPrior::ErdosRenyi { alpha: AlphaPrior::beta_with_mean(density, concentration)? },
            FitFamily::ProductBernoulli => {
                let m = density.sqrt();
                GraphPrior::ProductBernoulli { a1: m * concentration, a2: (1.0 - m) * concentration }
            }
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct MisspecRow {
    pub truth: SmallWorldTruth,
    pub family: FitFamily,
    pub result: RegimeResult,
}

/// Fit every small-world truth with each prior family. The priors are
/// matched to the truth's expected density.
pub fn run_misspec_study(
    truths: &[SmallWorldTruth],
    families: &[FitFamily],
    base: &Regime,
    seed: u64,
) -> Result<Vec<MisspecRow>> {
    let mut rows = Vec::new();
    for (i, &truth) in truths.iter().enumerate() {
        for (j, &family) in families.iter().enumerate() {
            let mut regime = base.clone();
            regime.truth = GraphModel::SmallWorld { ring_degree: truth.degree, rewire: truth.rewire };
            regime.name = format!("sw-{}-{}-{}", truth.degree, truth.rewire, family.name());
            let density = regime.truth.expected_density(regime.population_size);
            regime.fit_prior = Some(family.prior(density, regime.prior_concentration)?);
            // The truth stream depends on the truth only, so both families see the same populations.
            let result = run_regime(&regime, crate::rng::derive_seed(seed, &[tag::GRID, i as u64]))?;
            log::debug!("misspec truth {i} family {j} done");
            rows.push(MisspecRow { truth, family, result });
        }
    }
    Ok(rows)
}

/// `degree, rewire, family, method` followed by the summary columns.
pub fn write_misspec_csv<W: Write>(rows: &[MisspecRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record([
        "degree",
        "rewire",
        "family",
        "method",
        "replicates",
        "excluded",
        "bias_emp",
        "coverage_emp",
        "mean_length",
        "mean_realized_density",
    ])?;
    for r in rows {
        let density = mean(&r.result.rows.iter().map(|x| x.realized_density).collect::<Vec<_>>());
        for s in &r.result.summaries {
            wtr.write_record(&[
                r.truth.degree.to_string(),
                r.truth.rewire.to_string(),
                r.family.name().to_string(),
                s.method.name().to_string(),
                s.replicates.to_string(),
                r.result.excluded.len().to_string(),
                s.bias_emp.to_string(),
                s.coverage_emp.to_string(),
                s.mean_length.to_string(),
                density.to_string(),
            ])?;
        }
    }
    wtr.flush()?;
    Ok(())
}

/// Posterior summary of one prior setting.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SensitivityRow {
    pub population_size: usize,
    pub density: f64,
    pub mean: f64,
    pub sd: f64,
    pub q025: f64,
    pub median: f64,
    pub q975: f64,
}

/// Fit `data` under every `(N, density)` prior setting.
pub fn run_sensitivity(
    data: &RdsDataset,
    population_sizes: &[usize],
    densities: &[f64],
    base: &FitConfig,
    concentration: f64,
    seed: u64,
) -> Result<Vec<SensitivityRow>> {
    let mut rows = Vec::new();
    for (i, &n) in population_sizes.iter().enumerate() {
        for (j, &density) in densities.iter().enumerate() {
            let config = FitConfig {
                population_size: n,
                graph_prior: GraphPrior::ErdosRenyi { alpha: AlphaPrior::beta_with_mean(density, concentration)? },
                ..base.clone()
            };
            let out = fit(&data.trace, &data.response, &config, crate::rng::derive_seed(seed, &[tag::GRID, i as u64, j as u64]))?;
            let pooled = out.pooled();
            let (q025, q975) = central_interval(&pooled, 0.95);
            rows.push(SensitivityRow {
                population_size: n,
                density,
                mean: mean(&pooled),
                sd: std_dev(&pooled),
                q025,
                median: quantile(&pooled, 0.5),
                q975,
            });
        }
    }
    Ok(rows)
}

pub fn write_sensitivity_csv<W: Write>(rows: &[SensitivityRow], writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(["population_size", "density", "mean", "sd", "q025", "median", "q975"])?;
    for r in rows {
        wtr.serialize((r.population_size, r.density, r.mean, r.sd, r.q025, r.median, r.q975))?;
    }
    wtr.flush()?;
    Ok(())
}

/// Run metadata written next to every result table.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct Manifest<C: Serialize> {
    pub command: String,
    pub seed: u64,
    pub version: String,
    pub parallel: bool,
    pub config: C,
    pub outputs: Vec<String>,
    pub excluded_replicates: usize,
}

impl<C: Serialize> Manifest<C> {
    pub fn new(command: &str, seed: u64, config: C) -> Self {
        Manifest {
            command: command.into(),
            seed,
            version: env!("CARGO_PKG_VERSION").into(),
            parallel: par::is_parallel(),
            config,
            outputs: Vec::new(),
            excluded_replicates: 0,
        }
    }

    pub fn write(&self, dir: &Path) -> Result<()> {
        let file = std::fs::File::create(dir.join("manifest.json"))?;
        serde_json::to_writer_pretty(file, self)?;
        Ok(())
    }
}
