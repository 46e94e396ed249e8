//! DIF decision rules for fitted group parameters.
//!
//! A group is a candidate for uniform DIF when its latent mean sits outside
//! `±mean_bound` of the baseline 0, and for non-uniform DIF when its
//! discrimination falls outside `[disc_lower, disc_upper]` around the
//! baseline 1. When standard errors are available, the Wald interval is
//! checked as well (for discrimination on the `ln lambda` scale).

use serde::{Deserialize, Serialize};

use crate::error::{HetopError, Result};
use crate::estimator::{FitResult, PathResult, StandardErrors};
use crate::model::GroupParams;
use crate::normal;

/// Mean bound as published (a rounding of `Phi^-1(0.6)`).
pub const PUBLISHED_MEAN_BOUND: f64 = 0.255;

/// Latent mean `x0 > 0` whose probit shifts a probability of one half by
/// `delta`: `Phi(x0) - Phi(0) = delta`.
pub fn solve_mean_bound(delta: f64) -> Result<f64> {
    if !(0.0..0.5).contains(&delta) {
        return Err(HetopError::Domain(format!("probability shift must lie in [0, 0.5), got {delta}")));
    }
    Ok(normal::inv_cdf(0.5 + delta))
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombineRule {
    /// Bound and interval must both flag (bound alone without SEs).
    #[default]
    All,
    /// Either rule flags.
    Any,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DifThresholds {
    pub mean_bound: f64,
    pub disc_lower: f64,
    pub disc_upper: f64,
    pub alpha: f64,
    pub combine: CombineRule,
}

impl Default for DifThresholds {
    fn default() -> Self {
        Self { mean_bound: PUBLISHED_MEAN_BOUND, disc_lower: 0.90, disc_upper: 1.10, alpha: 0.05, combine: CombineRule::All }
    }
}

impl DifThresholds {
    pub fn validate(&self) -> Result<()> {
        if !(self.mean_bound > 0.0) {
            return Err(HetopError::Domain("mean bound must be positive".into()));
        }
        if !(self.disc_lower > 0.0 && self.disc_lower < 1.0 && self.disc_upper > 1.0) {
            return Err(HetopError::Domain("discrimination bounds must satisfy 0 < lower < 1 < upper".into()));
        }
        if !(self.alpha > 0.0 && self.alpha < 1.0) {
            return Err(HetopError::Domain("alpha must lie in (0, 1)".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum DifClass {
    None,
    Uniform,
    Nonuniform,
    Both,
}

impl DifClass {
    pub fn from_flags(mean: bool, disc: bool) -> Self {
        match (mean, disc) {
            (false, false) => DifClass::None,
            (true, false) => DifClass::Uniform,
            (false, true) => DifClass::Nonuniform,
            (true, true) => DifClass::Both,
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GroupFlags {
    pub mean_flag_bound: bool,
    /// `None` without a standard error.
    pub mean_flag_ci: Option<bool>,
    pub disc_flag_bound: bool,
    pub disc_flag_ci: Option<bool>,
    pub mean_dif: bool,
    pub disc_dif: bool,
    pub classification: DifClass,
}

fn combine(bound: bool, ci: Option<bool>, rule: CombineRule) -> bool {
    match (rule, ci) {
        (_, None) => bound,
        (CombineRule::All, Some(c)) => bound && c,
        (CombineRule::Any, Some(c)) => bound || c,
    }
}

pub fn flag_group(mu: f64, lambda: f64, se_mu: Option<f64>, se_log_lambda: Option<f64>, t: &DifThresholds) -> GroupFlags {
    let z = normal::inv_cdf(1.0 - t.alpha / 2.0);
    let mean_flag_bound = mu.abs() > t.mean_bound;
    let disc_flag_bound = lambda > t.disc_upper || lambda < t.disc_lower;
    let excludes_zero = |centre: f64, se: f64| centre - z * se > 0.0 || centre + z * se < 0.0;
    let mean_flag_ci = se_mu.map(|se| excludes_zero(mu, se));
    let disc_flag_ci = se_log_lambda.map(|se| excludes_zero(lambda.ln(), se));
    let mean_dif = combine(mean_flag_bound, mean_flag_ci, t.combine);
    let disc_dif = combine(disc_flag_bound, disc_flag_ci, t.combine);
    GroupFlags {
        mean_flag_bound,
        mean_flag_ci,
        disc_flag_bound,
        disc_flag_ci,
        mean_dif,
        disc_dif,
        classification: DifClass::from_flags(mean_dif, disc_dif),
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupDif {
    pub group: String,
    pub mean_estimate: f64,
    pub mean_se: Option<f64>,
    pub mean_ci: Option<[f64; 2]>,
    pub disc_estimate: f64,
    pub log_disc_se: Option<f64>,
    pub disc_ci: Option<[f64; 2]>,
    #[serde(flatten)]
    pub flags: GroupFlags,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DifReport {
    pub thresholds: DifThresholds,
    pub groups: Vec<GroupDif>,
}

impl DifReport {
    pub fn flagged(&self) -> impl Iterator<Item = &GroupDif> {
        self.groups.iter().filter(|g| g.flags.classification != DifClass::None)
    }
}

pub fn dif_report(fit: &FitResult, labels: &[String], t: &DifThresholds) -> Result<DifReport> {
    dif_for_params(&fit.params, fit.standard_errors.as_ref(), labels, t)
}

/// Report for fitted parameters held outside a [`FitResult`].
pub fn dif_for_params(
    p: &GroupParams,
    se: Option<&StandardErrors>,
    labels: &[String],
    t: &DifThresholds,
) -> Result<DifReport> {
    t.validate()?;
    if labels.len() != p.n_groups() {
        return Err(HetopError::Dimension { expected: p.n_groups(), actual: labels.len() });
    }
    if let Some(s) = se {
        if s.mu.len() != p.n_groups() || s.log_scale.len() != p.n_groups() {
            return Err(HetopError::Dimension { expected: p.n_groups(), actual: s.mu.len() });
        }
    }
    let groups = (0..p.n_groups())
        .map(|g| {
            let mean_se = se.and_then(|s| s.mu[g]);
            let log_disc_se = se.and_then(|s| s.log_scale[g]);
            let lambda = p.lambda(g);
            GroupDif {
                group: labels[g].clone(),
                mean_estimate: p.mu[g],
                mean_se,
                mean_ci: se.and_then(|s| s.mu_interval(p, g, t.alpha)),
                disc_estimate: lambda,
                log_disc_se,
                disc_ci: se.and_then(|s| s.lambda_interval(p, g, t.alpha)),
                flags: flag_group(p.mu[g], lambda, mean_se, log_disc_se, t),
            }
        })
        .collect();
    Ok(DifReport { thresholds: *t, groups })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDifEntry {
    pub nu: f64,
    /// `None` where the fit at this `nu` failed.
    pub report: Option<DifReport>,
}

/// Share of successful grid points at which each flag was raised.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FlagStability {
    pub group: String,
    pub mean_fraction: f64,
    pub disc_fraction: f64,
    pub any_fraction: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathDifReport {
    pub thresholds: DifThresholds,
    pub entries: Vec<PathDifEntry>,
    pub stability: Vec<FlagStability>,
}

pub fn dif_along_path(path: &PathResult, labels: &[String], t: &DifThresholds) -> Result<PathDifReport> {
    let entries = path
        .nu_grid
        .iter()
        .zip(&path.fits)
        .map(|(&nu, f)| {
            let report = match f {
                Ok(f) => Some(dif_report(f, labels, t)?),
                Err(_) => None,
            };
            Ok(PathDifEntry { nu, report })
        })
        .collect::<Result<Vec<_>>>()?;
    summarize_path(entries, labels, t)
}

/// Attaches flag stability fractions to per-`nu` reports.
pub fn summarize_path(entries: Vec<PathDifEntry>, labels: &[String], t: &DifThresholds) -> Result<PathDifReport> {
    t.validate()?;
    if entries.is_empty() {
        return Err(HetopError::Domain("empty penalty path".into()));
    }
    let reports: Vec<&DifReport> = entries.iter().filter_map(|e| e.report.as_ref()).collect();
    if let Some(bad) = reports.iter().find(|r| r.groups.len() != labels.len()) {
        return Err(HetopError::Dimension { expected: labels.len(), actual: bad.groups.len() });
    }
    let denom = reports.len().max(1) as f64;
    let stability = labels
        .iter()
        .enumerate()
        .map(|(g, label)| {
            let count = |pred: &dyn Fn(&GroupFlags) -> bool| {
                reports.iter().filter(|r| pred(&r.groups[g].flags)).count() as f64 / denom
            };
            FlagStability {
                group: label.clone(),
                mean_fraction: count(&|f| f.mean_dif),
                disc_fraction: count(&|f| f.disc_dif),
                any_fraction: count(&|f| f.mean_dif || f.disc_dif),
            }
        })
        .collect();
    Ok(PathDifReport { thresholds: *t, entries, stability })
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    #[test]
    fn mean_bound_values() {
        assert!((solve_mean_bound(0.10).unwrap() - 0.253_347_103_135_799_7).abs() < 1e-15);
        assert!((solve_mean_bound(0.10).unwrap() - PUBLISHED_MEAN_BOUND).abs() < 0.002);
        assert_eq!(solve_mean_bound(0.0).unwrap(), 0.0);
        assert!(solve_mean_bound(0.5).is_err());
        assert!(solve_mean_bound(-0.1).is_err());
    }

    #[test]
    fn flag_examples() {
        let t = DifThresholds::default();
        assert_eq!(flag_group(0.3, 1.0, None, None, &t).classification, DifClass::Uniform);
        assert_eq!(flag_group(0.0, 0.85, None, None, &t).classification, DifClass::Nonuniform);
        assert_eq!(flag_group(0.1, 1.05, None, None, &t).classification, DifClass::None);
        assert_eq!(flag_group(-0.4, 1.3, None, None, &t).classification, DifClass::Both);
    }

    #[test]
    fn interval_rule_combination() {
        let t = DifThresholds::default();
        // outside the bound but the interval covers zero
        let f = flag_group(0.3, 1.0, Some(0.2), Some(0.05), &t);
        assert_eq!(f.mean_flag_ci, Some(false));
        assert!(!f.mean_dif);
        let any = DifThresholds { combine: CombineRule::Any, ..t };
        assert!(flag_group(0.3, 1.0, Some(0.2), Some(0.05), &any).mean_dif);
        // inside the bound yet precisely non-zero
        let f = flag_group(0.1, 1.0, Some(0.01), Some(0.05), &t);
        assert_eq!(f.mean_flag_ci, Some(true));
        assert!(!f.mean_dif);
        assert!(flag_group(0.1, 1.0, Some(0.01), Some(0.05), &any).mean_dif);
        // discrimination interval on the log scale
        let f = flag_group(0.0, 0.8, Some(0.1), Some(0.05), &t);
        assert_eq!(f.disc_flag_ci, Some(true));
        assert_eq!(f.classification, DifClass::Nonuniform);
    }

    #[test]
    fn threshold_validation() {
        assert!(DifThresholds { disc_lower: 1.0, ..Default::default() }.validate().is_err());
        assert!(DifThresholds { mean_bound: 0.0, ..Default::default() }.validate().is_err());
        assert!(DifThresholds { alpha: 1.0, ..Default::default() }.validate().is_err());
    }

    proptest! {
        #[test]
        fn bound_inverts(delta in 0.0f64..0.49) {
            let x = solve_mean_bound(delta).unwrap();
            prop_assert!((normal::cdf(x) - 0.5 - delta).abs() < 1e-10);
        }

        #[test]
        fn flags_are_monotone(mu in -1.0f64..1.0, extra in 0.0f64..1.0, ln_lambda in -1.0f64..1.0) {
            let t = DifThresholds::default();
            let base = flag_group(mu, ln_lambda.exp(), None, None, &t);
            let further_mu = mu + extra * mu.signum();
            let further_lambda = (ln_lambda + extra * ln_lambda.signum()).exp();
            let moved = flag_group(further_mu, further_lambda, None, None, &t);
            prop_assert!(!base.mean_flag_bound || moved.mean_flag_bound);
            prop_assert!(!base.disc_flag_bound || moved.disc_flag_bound);
            prop_assert_eq!(moved.classification, DifClass::from_flags(moved.mean_dif, moved.disc_dif));
        }
    }
}
