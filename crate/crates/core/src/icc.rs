//! Expected-score item characteristic curves.
//!
//! For a respondent at ability `theta` in group `g`, the expected item score is
//! `sum_{k=1..K} Phi(lambda_g (theta + mu_g - tau_k))`, which runs from 0 to
//! `K` as `theta` grows.

use serde::{Deserialize, Serialize};

use crate::error::{HetopError, Result};
use crate::model::GroupParams;
use crate::normal;

pub const DEFAULT_THETA_MIN: f64 = -4.0;
pub const DEFAULT_THETA_MAX: f64 = 4.0;
pub const DEFAULT_THETA_POINTS: usize = 101;

fn check_group(params: &GroupParams, g: usize) -> Result<()> {
    if g >= params.n_groups() {
        return Err(HetopError::Index { index: g, limit: params.n_groups() });
    }
    Ok(())
}

pub fn expected_score(theta: f64, g: usize, params: &GroupParams) -> Result<f64> {
    check_group(params, g)?;
    if !theta.is_finite() {
        return Err(HetopError::Domain("theta must be finite".into()));
    }
    let (mu, lambda) = (params.mu[g], params.lambda(g));
    Ok(params.thresholds.iter().map(|t| normal::cdf(lambda * (theta + mu - t))).sum())
}

/// `d/dtheta` of [`expected_score`].
pub fn expected_score_slope(theta: f64, g: usize, params: &GroupParams) -> Result<f64> {
    check_group(params, g)?;
    let (mu, lambda) = (params.mu[g], params.lambda(g));
    Ok(params.thresholds.iter().map(|t| lambda * normal::pdf(lambda * (theta + mu - t))).sum())
}

/// `n` evenly spaced points from `lo` to `hi` inclusive.
pub fn theta_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo.is_finite() && hi.is_finite() && hi > lo) || n < 2 {
        return Err(HetopError::Domain(format!("invalid theta grid {lo}:{hi}:{n}")));
    }
    Ok((0..n).map(|i| if i == n - 1 { hi } else { lo + (hi - lo) * i as f64 / (n - 1) as f64 }).collect())
}

pub fn default_theta_grid() -> Vec<f64> {
    theta_grid(DEFAULT_THETA_MIN, DEFAULT_THETA_MAX, DEFAULT_THETA_POINTS).expect("static grid")
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct IccCurve {
    pub group: usize,
    pub theta: Vec<f64>,
    pub expected: Vec<f64>,
}

pub fn icc_curve(params: &GroupParams, g: usize, theta: &[f64]) -> Result<IccCurve> {
    let expected = theta.iter().map(|&t| expected_score(t, g, params)).collect::<Result<_>>()?;
    Ok(IccCurve { group: g, theta: theta.to_vec(), expected })
}

pub fn icc_curves(params: &GroupParams, theta: &[f64]) -> Result<Vec<IccCurve>> {
    (0..params.n_groups()).map(|g| icc_curve(params, g, theta)).collect()
}
