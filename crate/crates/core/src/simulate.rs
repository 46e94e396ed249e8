//! Synthetic single-item data with known group parameters, and a probit
//! method-of-moments estimator used as an independent cross-check.
//!
//! # Random stream
//!
//! Draws come from SplitMix64 so that tables can be regenerated bit-exactly
//! elsewhere. Group `g` of a run seeded with `seed` uses its own stream whose
//! state starts at `mix(seed ^ mix(g + 1))`; the stream advances the state by
//! `0x9E3779B97F4A7C15` and returns `mix(state)`. A draw `x` becomes the
//! uniform `((x >> 11) + 0.5) * 2^-53` in `(0, 1)`, and the latent response is
//! `mu + sigma * Phi^-1(u)` with the AS 241 quantile function.

use rayon::prelude::*;

use crate::error::{HetopError, Result};
use crate::model::{CategoryCountTable, GroupParams};
use crate::normal;

const GOLDEN_GAMMA: u64 = 0x9E37_79B9_7F4A_7C15;

#[inline]
fn mix(mut z: u64) -> u64 {
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

#[derive(Debug, Clone)]
pub struct SplitMix64 {
    state: u64,
}

impl SplitMix64 {
    pub fn new(state: u64) -> Self {
        Self { state }
    }

    /// Independent stream for group `g` of a run.
    pub fn for_group(seed: u64, g: usize) -> Self {
        Self::new(mix(seed ^ mix(g as u64 + 1)))
    }

    pub fn next_u64(&mut self) -> u64 {
        self.state = self.state.wrapping_add(GOLDEN_GAMMA);
        mix(self.state)
    }

    /// Uniform on the open interval `(0, 1)`.
    pub fn next_open01(&mut self) -> f64 {
        ((self.next_u64() >> 11) as f64 + 0.5) * (1.0 / (1u64 << 53) as f64)
    }

    pub fn next_normal(&mut self) -> f64 {
        normal::inv_cdf(self.next_open01())
    }
}

/// Category of a latent value: the number of thresholds strictly below it.
#[inline]
pub fn categorize(latent: f64, thresholds: &[f64]) -> usize {
    thresholds.partition_point(|t| *t < latent)
}

/// Latent draws for one group, already cut into categories.
pub fn draw_responses(mu: f64, sigma: f64, thresholds: &[f64], n: usize, rng: &mut SplitMix64) -> Vec<usize> {
    (0..n).map(|_| categorize(mu + sigma * rng.next_normal(), thresholds)).collect()
}

fn check_inputs(params: &GroupParams, group_sizes: &[usize]) -> Result<()> {
    params.validate()?;
    if group_sizes.len() != params.n_groups() {
        return Err(HetopError::Dimension { expected: params.n_groups(), actual: group_sizes.len() });
    }
    if group_sizes.contains(&0) {
        return Err(HetopError::Domain("group sizes must be positive".into()));
    }
    Ok(())
}

/// Per-group response vectors, in input order.
pub fn generate_responses(params: &GroupParams, group_sizes: &[usize], seed: u64) -> Result<Vec<Vec<usize>>> {
    check_inputs(params, group_sizes)?;
    Ok((0..params.n_groups())
        .into_par_iter()
        .map(|g| {
            let mut rng = SplitMix64::for_group(seed, g);
            draw_responses(params.mu[g], params.sigma(g), &params.thresholds, group_sizes[g], &mut rng)
        })
        .collect())
}

/// Simulated count table with labels `G1..GG`.
pub fn generate(params: &GroupParams, group_sizes: &[usize], seed: u64) -> Result<CategoryCountTable> {
    let labels = (1..=params.n_groups()).map(|g| format!("G{g}")).collect();
    generate_labeled(params, group_sizes, seed, labels)
}

pub fn generate_labeled(
    params: &GroupParams,
    group_sizes: &[usize],
    seed: u64,
    labels: Vec<String>,
) -> Result<CategoryCountTable> {
    let n_categories = params.n_thresholds() + 1;
    let counts = generate_responses(params, group_sizes, seed)?
        .into_iter()
        .map(|responses| {
            let mut row = vec![0.0; n_categories];
            for k in responses {
                row[k] += 1.0;
            }
            row
        })
        .collect();
    CategoryCountTable::new(labels, counts, None)
}

/// Expected counts `n_g * Pr(Y = k)`, i.e. a noiseless table.
pub fn expected_table(params: &GroupParams, group_sizes: &[f64]) -> Result<CategoryCountTable> {
    let counts = (0..params.n_groups())
        .map(|g| {
            crate::likelihood::all_category_probs(params, g)
                .map(|p| p.into_iter().map(|x| x * group_sizes[g]).collect())
        })
        .collect::<Result<Vec<Vec<f64>>>>()?;
    let labels = (1..=params.n_groups()).map(|g| format!("G{g}")).collect();
    CategoryCountTable::new(labels, counts, None)
}

/// Method-of-moments estimate for one group.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MomentEstimate {
    pub mu: f64,
    pub sigma: f64,
}

/// With thresholds known, `tau_k = mu_g + sigma_g * Phi^-1(Pr(Y < k | g))`
/// is a line in the probit of the cumulative shares; its least-squares
/// intercept and slope estimate `mu_g` and `sigma_g`. Groups with fewer than
/// two cumulative shares strictly inside `(0, 1)` are `None`.
pub fn moment_oracle(table: &CategoryCountTable, thresholds: &[f64]) -> Result<Vec<Option<MomentEstimate>>> {
    if thresholds.len() != table.n_thresholds() {
        return Err(HetopError::Dimension { expected: table.n_thresholds(), actual: thresholds.len() });
    }
    Ok(table
        .rows()
        .map(|row| {
            let n: f64 = row.iter().sum();
            let mut cum = 0.0;
            let mut points = Vec::new();
            for (k, &c) in row[..row.len() - 1].iter().enumerate() {
                cum += c;
                let share = cum / n;
                if share > 0.0 && share < 1.0 {
                    points.push((normal::inv_cdf(share), thresholds[k]));
                }
            }
            if points.len() < 2 {
                return None;
            }
            let m = points.len() as f64;
            let mz = points.iter().map(|p| p.0).sum::<f64>() / m;
            let mt = points.iter().map(|p| p.1).sum::<f64>() / m;
            let szz: f64 = points.iter().map(|(z, _)| (z - mz).powi(2)).sum();
            let szt: f64 = points.iter().map(|(z, t)| (z - mz) * (t - mt)).sum();
            if szz <= 0.0 {
                return None;
            }
            let sigma = szt / szz;
            (sigma > 0.0).then_some(MomentEstimate { mu: mt - sigma * mz, sigma })
        })
        .collect())
}
