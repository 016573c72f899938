//! Design-based comparison estimators.

use rand::Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mrf::ResponseVector;
use crate::rds::RdsDataset;
use crate::stats::central_interval;

/// Minimum number of bootstrap resamples.
pub const MIN_RESAMPLES: usize = 100;

/// Sample prevalence.
pub fn naive(response: &ResponseVector) -> f64 {
    response.mean()
}

/// Degree-weighted estimator `Σ (y_i / d_i) / Σ (1 / d_i)`.
pub fn volz_heckathorn(response: &[u8], degree: &[usize]) -> Result<f64> {
    if response.len() != degree.len() || response.is_empty() {
        return Err(Error::InvalidInput(format!(
            "{} responses and {} degrees",
            response.len(),
            degree.len()
        )));
    }
    if degree.contains(&0) {
        return Err(Error::InvalidInput("reported degree 0 has no inverse weight".into()));
    }
    let (num, den) = response
        .iter()
        .zip(degree)
        .fold((0.0, 0.0), |(n, d), (&y, &k)| (n + y as f64 / k as f64, d + 1.0 / k as f64));
    Ok(num / den)
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BootstrapScheme {
    /// Resample recruitment chains through the recruiter-response
    /// transition structure.
    #[default]
    Chain,
    /// Resample participants independently.
    Iid,
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Interval {
    pub lower: f64,
    pub upper: f64,
}

impl Interval {
    pub fn length(&self) -> f64 {
        self.upper - self.lower
    }

    pub fn covers(&self, value: f64) -> bool {
        self.lower <= value && value <= self.upper
    }
}

/// Percentile bootstrap interval for the degree-weighted estimator.
///
/// The chain scheme starts from a uniformly chosen participant and then
/// repeatedly draws the next participant uniformly among the recruits of
/// participants with the current participant's response. If there are no
/// such recruits it falls back to a uniform draw.
pub fn vh_bootstrap_ci<R: Rng + ?Sized>(
    data: &RdsDataset,
    resamples: usize,
    level: f64,
    scheme: BootstrapScheme,
    rng: &mut R,
) -> Result<Interval> {
    if resamples < MIN_RESAMPLES {
        return Err(Error::domain(format!("at least {MIN_RESAMPLES} bootstrap resamples are required")));
    }
    if !(level > 0.0 && level < 1.0) {
        return Err(Error::domain(format!("interval level {level} outside (0, 1)")));
    }
    let y = data.response.as_slice();
    let d = &data.reported_degree;
    volz_heckathorn(y, d)?;
    let n = y.len();
    let mut pools: [Vec<usize>; 2] = [Vec::new(), Vec::new()];
    for (i, r) in data.recruiter_positions().into_iter().enumerate() {
        if let Some(r) = r {
            pools[y[r] as usize].push(i);
        }
    }
    let mut ys = vec![0u8; n];
    let mut ds = vec![0usize; n];
    let mut estimates = Vec::with_capacity(resamples);
    for _ in 0..resamples {
        let mut current = rng.random_range(0..n);
        for j in 0..n {
            if j > 0 {
                current = match scheme {
                    BootstrapScheme::Iid => rng.random_range(0..n),
                    BootstrapScheme::Chain => {
                        let pool = &pools[y[current] as usize];
                        if pool.is_empty() {
                            rng.random_range(0..n)
                        } else {
                            pool[rng.random_range(0..pool.len())]
                        }
                    }
                };
            }
            ys[j] = y[current];
            ds[j] = d[current];
        }
        estimates.push(volz_heckathorn(&ys, &ds)?);
    }
    let (lower, upper) = central_interval(&estimates, level);
    Ok(Interval { lower, upper })
}
