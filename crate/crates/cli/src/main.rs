use std::fs::{self, File};
use std::io::{BufWriter, Write};
use std::path::{Path, PathBuf};

use anyhow::{bail, Context, Result};
use clap::{Args, Parser, Subcommand};
use serde::{Deserialize, Serialize};

use rdsinfer::baselines::{vh_bootstrap_ci, volz_heckathorn};
use rdsinfer::bma::{fit, FitConfig, FitOutput, FitReport, GraphPrior};
use rdsinfer::diagnostics::{ess, mc_variance, posterior_predictive_check};
use rdsinfer::graph::AlphaPrior;
use rdsinfer::harness::{
    observe, run_misspec_study, run_mse_sweep, run_regime, run_sensitivity, simulate_population, calibrate_truth,
    write_misspec_csv, write_sensitivity_csv, write_sweep_csv, FitFamily, Manifest, Regime, RegimeResult,
    SmallWorldTruth, SweepAxis, FULL_REPLICATES,
};
use rdsinfer::mcmc::write_chain_csv;
use rdsinfer::rds::RdsDataset;
use rdsinfer::rng::{derive_seed, stream, tag};

#[derive(Parser, Debug)]
#[command(name = "rdsinfer", version, about = "Bayesian prevalence estimation from respondent-driven samples")]
struct Cli {
    /// Master seed; every random stream derives from it.
    #[arg(long, global = true, default_value_t = 1)]
    seed: u64,
    /// Directory for all outputs.
    #[arg(long, global = true, default_value = "rdsinfer-out")]
    out_dir: PathBuf,
    /// Use the full replicate counts instead of the desk-scale defaults.
    #[arg(long, global = true)]
    paper_scale: bool,
    /// Worker threads (defaults to all cores).
    #[arg(long, global = true)]
    threads: Option<usize>,
    /// TOML configuration file.
    #[arg(long, global = true)]
    config: Option<PathBuf>,
    #[command(subcommand)]
    command: Command,
}

#[derive(Args, Debug, Clone)]
struct DataArgs {
    /// Trace CSV: recruited_id,recruiter_id,wave,reported_degree,response.
    #[arg(long)]
    trace: PathBuf,
    /// Coupons per participant.
    #[arg(long)]
    coupons: usize,
    /// Population size assumed by the fit.
    #[arg(long)]
    population_size: Option<usize>,
    /// Prior mean of the edge probability.
    #[arg(long)]
    density: Option<f64>,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Draw one population from the regime and write its graph and trace.
    Simulate,
    /// Fit the model to a trace.
    Fit(DataArgs),
    /// Run the configured regime.
    Regime,
    /// Run the regime along a grid of one factor.
    Sweep {
        #[arg(long, value_enum)]
        axis: Option<AxisArg>,
        #[arg(long, value_delimiter = ',')]
        grid: Vec<f64>,
    },
    /// Small-world truths fitted with each prior family.
    Misspec,
    /// Fit a trace under a grid of population sizes and prior densities.
    Sensitivity {
        #[command(flatten)]
        data: DataArgs,
        #[arg(long, value_delimiter = ',')]
        population_sizes: Vec<usize>,
        #[arg(long, value_delimiter = ',')]
        densities: Vec<f64>,
    },
    /// Fit a trace and write convergence and posterior predictive diagnostics.
    Diagnose(DataArgs),
}

#[derive(clap::ValueEnum, Clone, Copy, Debug)]
enum AxisArg {
    Coupons,
    Density,
    SampleFraction,
}

impl From<AxisArg> for SweepAxis {
    fn from(a: AxisArg) -> Self {
        match a {
            AxisArg::Coupons => SweepAxis::Coupons,
            AxisArg::Density => SweepAxis::Density,
            AxisArg::SampleFraction => SweepAxis::SampleFraction,
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct SweepConfig {
    axis: SweepAxis,
    grid: Vec<f64>,
}

impl Default for SweepConfig {
    fn default() -> Self {
        SweepConfig { axis: SweepAxis::Density, grid: vec![0.01, 0.05, 0.1, 0.2] }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct MisspecConfig {
    truths: Vec<SmallWorldTruth>,
    families: Vec<FitFamily>,
}

impl Default for MisspecConfig {
    fn default() -> Self {
        MisspecConfig {
            truths: [(2, 0.1), (2, 0.95), (10, 0.1), (10, 0.95), (20, 0.1), (20, 0.95), (40, 0.1), (40, 0.95)]
                .into_iter()
                .map(|(degree, rewire)| SmallWorldTruth { degree, rewire })
                .collect(),
            families: vec![FitFamily::ErdosRenyi, FitFamily::ProductBernoulli],
        }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct SensitivityConfig {
    population_sizes: Vec<usize>,
    densities: Vec<f64>,
    concentration: f64,
}

impl Default for SensitivityConfig {
    fn default() -> Self {
        SensitivityConfig { population_sizes: Vec::new(), densities: Vec::new(), concentration: 40.0 }
    }
}

#[derive(Clone, Debug, Serialize, Deserialize)]
#[serde(default)]
struct DiagnoseConfig {
    ppc_replicates: usize,
    histogram_bins: usize,
}

impl Default for DiagnoseConfig {
    fn default() -> Self {
        DiagnoseConfig { ppc_replicates: 500, histogram_bins: 20 }
    }
}

/// Everything a configuration file may set.
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(default)]
struct Config {
    regime: Regime,
    /// Fit settings for the data-driven commands.
    fit: FitConfig,
    sweep: SweepConfig,
    misspec: MisspecConfig,
    sensitivity: SensitivityConfig,
    diagnose: DiagnoseConfig,
    bootstrap_resamples: Option<usize>,
}

fn load_config(path: Option<&Path>, paper_scale: bool) -> Result<Config> {
    let mut config: Config = match path {
        Some(p) => {
            let text = fs::read_to_string(p).with_context(|| format!("reading {}", p.display()))?;
            toml::from_str(&text).with_context(|| format!("parsing {}", p.display()))?
        }
        None => Config::default(),
    };
    if paper_scale {
        config.regime.replicates = FULL_REPLICATES;
    }
    Ok(config)
}

fn create(dir: &Path, name: &str) -> Result<BufWriter<File>> {
    let path = dir.join(name);
    Ok(BufWriter::new(File::create(&path).with_context(|| format!("creating {}", path.display()))?))
}

fn load_data(args: &DataArgs) -> Result<RdsDataset> {
    let file = File::open(&args.trace).with_context(|| format!("opening {}", args.trace.display()))?;
    RdsDataset::read_csv(file, args.coupons).with_context(|| format!("reading {}", args.trace.display()))
}

fn data_fit_config(base: &FitConfig, args: &DataArgs, concentration: f64) -> Result<FitConfig> {
    let mut config = base.clone();
    if let Some(n) = args.population_size {
        config.population_size = n;
    }
    if let Some(d) = args.density {
        config.graph_prior = GraphPrior::ErdosRenyi { alpha: AlphaPrior::beta_with_mean(d, concentration)? };
    }
    if config.population_size == 0 {
        bail!("the population size must be given with --population-size or in the configuration");
    }
    Ok(config)
}

fn write_fit(out: &Path, result: &FitOutput, outputs: &mut Vec<String>) -> Result<()> {
    let report = FitReport::from_output(result);
    serde_json::to_writer_pretty(create(out, "fit_report.json")?, &report)?;
    outputs.push("fit_report.json".into());
    for (w, chain) in result.chains.iter().enumerate() {
        let name = format!("chain_{w}.csv");
        write_chain_csv(&chain.output.samples, create(out, &name)?)?;
        outputs.push(name);
    }
    Ok(())
}

fn write_regime(out: &Path, result: &RegimeResult, outputs: &mut Vec<String>) -> Result<()> {
    result.write_replicates_csv(create(out, "replicates.csv")?)?;
    RegimeResult::write_summary_csv(&[(result.regime.name.clone(), result)], create(out, "summary.csv")?)?;
    outputs.extend(["replicates.csv".to_string(), "summary.csv".to_string()]);
    Ok(())
}

fn main() -> Result<()> {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    if let Some(t) = cli.threads {
        if t == 0 {
            bail!("--threads must be at least 1");
        }
        #[cfg(feature = "parallel")]
        rayon::ThreadPoolBuilder::new().num_threads(t).build_global()?;
    }
    let config = load_config(cli.config.as_deref(), cli.paper_scale)?;
    let out = cli.out_dir.as_path();
    fs::create_dir_all(out).with_context(|| format!("creating {}", out.display()))?;
    let seed = cli.seed;
    let mut outputs = Vec::new();
    let mut excluded = 0;

    let name = match &cli.command {
        Command::Simulate => {
            let regime = &config.regime;
            regime.validate()?;
            let params = calibrate_truth(regime, seed)?;
            let mut rng = stream(seed, &[tag::TRUTH_GRAPH]);
            let (graph, y, trace, _) = simulate_population(regime, &params, &mut rng)?;
            graph.write_edge_list(create(out, "population.edges")?)?;
            observe(&graph, &y, &trace)?.write_csv(create(out, "trace.csv")?)?;
            let mut rows = create(out, "population.csv")?;
            writeln!(rows, "psi,zeta,population_prevalence")?;
            writeln!(rows, "{},{},{}", params.psi, params.zeta, y.mean())?;
            outputs.extend(["population.edges", "trace.csv", "population.csv"].map(String::from));
            "simulate"
        }
        Command::Fit(args) => {
            let data = load_data(args)?;
            let fc = data_fit_config(&config.fit, args, config.sensitivity.concentration)?;
            let result = fit(&data.trace, &data.response, &fc, derive_seed(seed, &[tag::FIT]))?;
            write_fit(out, &result, &mut outputs)?;
            let estimate = volz_heckathorn(data.response.as_slice(), &data.reported_degree)?;
            let resamples = config.bootstrap_resamples.unwrap_or(config.regime.bootstrap_resamples);
            let ci = vh_bootstrap_ci(
                &data,
                resamples,
                fc.level,
                config.regime.bootstrap_scheme,
                &mut stream(seed, &[tag::BOOTSTRAP]),
            )?;
            let mut rows = create(out, "estimates.csv")?;
            writeln!(rows, "method,estimate,lower,upper")?;
            writeln!(rows, "bayes,{},{},{}", result.summary.estimate, result.summary.lower, result.summary.upper)?;
            writeln!(rows, "vh,{estimate},{},{}", ci.lower, ci.upper)?;
            writeln!(rows, "naive,{},,", data.response.mean())?;
            outputs.push("estimates.csv".into());
            "fit"
        }
        Command::Regime => {
            let result = run_regime(&config.regime, seed)?;
            excluded = result.excluded.len();
            write_regime(out, &result, &mut outputs)?;
            "regime"
        }
        Command::Sweep { axis, grid } => {
            let axis = axis.map(SweepAxis::from).unwrap_or(config.sweep.axis);
            let grid = if grid.is_empty() { config.sweep.grid.clone() } else { grid.clone() };
            let points = run_mse_sweep(axis, &grid, &config.regime, seed)?;
            write_sweep_csv(axis, &points, create(out, "sweep.csv")?)?;
            let labelled: Vec<(String, &RegimeResult)> =
                points.iter().map(|p| (format!("{}={}", axis.name(), p.value), &p.result)).collect();
            RegimeResult::write_summary_csv(&labelled, create(out, "summary.csv")?)?;
            excluded = points.iter().map(|p| p.result.excluded.len()).sum();
            outputs.extend(["sweep.csv", "summary.csv"].map(String::from));
            "sweep"
        }
        Command::Misspec => {
            let rows = run_misspec_study(&config.misspec.truths, &config.misspec.families, &config.regime, seed)?;
            write_misspec_csv(&rows, create(out, "misspec.csv")?)?;
            excluded = rows.iter().map(|r| r.result.excluded.len()).sum();
            outputs.push("misspec.csv".into());
            "misspec"
        }
        Command::Sensitivity { data, population_sizes, densities } => {
            let dataset = load_data(data)?;
            let sc = &config.sensitivity;
            let sizes = if population_sizes.is_empty() { sc.population_sizes.clone() } else { population_sizes.clone() };
            let dens = if densities.is_empty() { sc.densities.clone() } else { densities.clone() };
            let rows = run_sensitivity(&dataset, &sizes, &dens, &config.fit, sc.concentration, seed)?;
            write_sensitivity_csv(&rows, create(out, "sensitivity.csv")?)?;
            outputs.push("sensitivity.csv".into());
            "sensitivity"
        }
        Command::Diagnose(args) => {
            let data = load_data(args)?;
            let mut fc = data_fit_config(&config.fit, args, config.sensitivity.concentration)?;
            fc.run.retain_graphs = true;
            let result = fit(&data.trace, &data.response, &fc, derive_seed(seed, &[tag::FIT]))?;
            write_fit(out, &result, &mut outputs)?;
            let mut rows = create(out, "diagnostics.csv")?;
            writeln!(rows, "chain,quantity,mean,ess,mc_variance")?;
            for (w, c) in result.chains.iter().enumerate() {
                let s = &c.output.samples;
                let series: [(&str, Vec<f64>); 3] = [
                    ("psi", s.iter().map(|x| x.psi).collect()),
                    ("zeta", s.iter().map(|x| x.zeta).collect()),
                    ("q_mc", s.iter().map(|x| x.q_mc).collect()),
                ];
                for (q, xs) in series {
                    let mean = xs.iter().sum::<f64>() / xs.len() as f64;
                    writeln!(rows, "{w},{q},{mean},{},{}", ess(&xs), mc_variance(&xs))?;
                }
            }
            let ppc = posterior_predictive_check(&result, config.diagnose.ppc_replicates, seed)?;
            ppc.write_histogram_csv(config.diagnose.histogram_bins, create(out, "ppc.csv")?)?;
            outputs.extend(["diagnostics.csv", "ppc.csv"].map(String::from));
            "diagnose"
        }
    };

    let mut manifest = Manifest::new(name, seed, &config);
    manifest.outputs = outputs;
    manifest.excluded_replicates = excluded;
    manifest.write(out)?;
    Ok(())
}
