//! Convergence and model-checking diagnostics.

use std::io::Write;

use serde::{Deserialize, Serialize};

use crate::bma::FitOutput;
use crate::error::{Error, Result};
use crate::mcmc::sample_responses;
use crate::mrf::MrfParams;
use crate::rng::{stream, tag};
use crate::stats::mean;
use rand::Rng;

/// Integrated autocorrelation time `κ = 1 + 2 Σ ρ_t`, truncated by the
/// initial positive (and monotone) sequence of paired autocorrelations.
/// Returns 1 for a constant series.
pub fn autocorrelation_time(trace: &[f64]) -> f64 {
    let t = trace.len();
    if t < 2 || trace.iter().all(|&x| x == trace[0]) {
        return 1.0;
    }
    let m = mean(trace);
    let centred: Vec<f64> = trace.iter().map(|x| x - m).collect();
    let autocov = |lag: usize| centred[..t - lag].iter().zip(&centred[lag..]).map(|(a, b)| a * b).sum::<f64>() / t as f64;
    let c0 = autocov(0);
    if c0 <= 0.0 {
        return 1.0;
    }
    let mut kappa = -1.0;
    let mut previous = f64::INFINITY;
    let mut k = 0;
    while 2 * k + 1 < t {
        let pair = (autocov(2 * k) + autocov(2 * k + 1)) / c0;
        if pair <= 0.0 {
            break;
        }
        let pair = pair.min(previous);
        kappa += 2.0 * pair;
        previous = pair;
        k += 1;
    }
    kappa.max(1.0 / t as f64)
}

/// Effective sample size `T / κ`, capped at `T`.
pub fn ess(trace: &[f64]) -> f64 {
    let t = trace.len() as f64;
    (t / autocorrelation_time(trace)).min(t)
}

/// Monte Carlo variance of the trace mean, `Σ (h - h̄)² / (T · ESS)`.
pub fn mc_variance(trace: &[f64]) -> f64 {
    if trace.is_empty() {
        return f64::NAN;
    }
    let m = mean(trace);
    let ss: f64 = trace.iter().map(|x| (x - m).powi(2)).sum();
    ss / (trace.len() as f64 * ess(trace))
}

/// Posterior predictive check of the participants' prevalence.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PpcResult {
    pub observed: f64,
    pub replicates: Vec<f64>,
    /// Two-sided tail probability, `2 min(P(T_rep >= T_obs), P(T_rep <= T_obs))`
    /// capped at 1.
    pub tail_probability: f64,
}

impl PpcResult {
    pub fn from_replicates(observed: f64, replicates: Vec<f64>) -> Self {
        let r = replicates.len() as f64;
        let upper = replicates.iter().filter(|&&x| x >= observed).count() as f64 / r;
        let lower = replicates.iter().filter(|&&x| x <= observed).count() as f64 / r;
        PpcResult { observed, replicates, tail_probability: (2.0 * upper.min(lower)).min(1.0) }
    }

    /// Histogram of the replicates over `bins` equal cells of `[0, 1]`, and
    /// the observed statistic as a final row.
    pub fn write_histogram_csv<W: Write>(&self, bins: usize, writer: W) -> Result<()> {
        if bins == 0 {
            return Err(Error::domain("histogram needs at least one bin"));
        }
        let mut counts = vec![0usize; bins];
        for &x in &self.replicates {
            counts[((x * bins as f64) as usize).min(bins - 1)] += 1;
        }
        let mut wtr = csv::Writer::from_writer(writer);
        wtr.write_record(["kind", "lower", "upper", "value"])?;
        for (i, c) in counts.iter().enumerate() {
            let lo = i as f64 / bins as f64;
            let hi = (i + 1) as f64 / bins as f64;
            wtr.write_record(["bin".to_string(), lo.to_string(), hi.to_string(), c.to_string()])?;
        }
        wtr.write_record([
            "observed".to_string(),
            self.observed.to_string(),
            self.observed.to_string(),
            self.tail_probability.to_string(),
        ])?;
        wtr.flush()?;
        Ok(())
    }
}

/// Regenerate the responses `replicates` times from random posterior draws
/// and compare the participants' prevalence with the observed value. The
/// fit must have been run with graph retention.
pub fn posterior_predictive_check(fit: &FitOutput, replicates: usize, seed: u64) -> Result<PpcResult> {
    if replicates == 0 {
        return Err(Error::domain("at least one replicate is required"));
    }
    let pool: Vec<(usize, usize)> = fit
        .chains
        .iter()
        .enumerate()
        .flat_map(|(c, run)| (0..run.output.samples.len()).map(move |s| (c, s)))
        .collect();
    if pool.is_empty() {
        return Err(Error::InvalidInput("the fit has no posterior draws".into()));
    }
    let ctx = &fit.context;
    let n = ctx.sample_size();
    let mut rng = stream(seed, &[tag::PPC]);
    let mut values = Vec::with_capacity(replicates);
    for _ in 0..replicates {
        let (c, s) = pool[rng.random_range(0..pool.len())];
        let run = &fit.chains[c];
        let sample = &run.output.samples[s];
        let edges = sample
            .edges
            .as_ref()
            .ok_or_else(|| Error::InvalidInput("posterior predictive checks need retained graphs".into()))?;
        let graph = ctx.graph_with_edges(run.spec.augmented_nodes, edges)?;
        let y = sample_responses(&graph, &MrfParams { psi: sample.psi, zeta: sample.zeta }, &mut rng);
        values.push(y.as_slice()[..n].iter().map(|&b| b as f64).sum::<f64>() / n as f64);
    }
    Ok(PpcResult::from_replicates(ctx.observed_mean(), values))
}
