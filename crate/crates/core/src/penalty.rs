//! Pairwise group-difference penalties.
//!
//! For a vector of group values the penalty is
//! `P(theta) = sum_g sum_{h != g} f(theta_g, theta_h) / nu`, summed over
//! ordered pairs, so every unordered pair enters twice. `nu` divides the
//! penalty: larger values regularize less.

use serde::{Deserialize, Serialize};

use crate::error::{HetopError, Result};

pub const DEFAULT_EPSILON: f64 = 1e-4;

/// Penalty proportion above which a fit is flagged as penalty-dominated.
pub const PENALTY_PROPORTION_WARN: f64 = 0.10;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PenaltyKind {
    /// `(a - b)^2`
    Ridge,
    /// `sqrt((a - b)^2 + eps)`
    Lasso,
    /// `sqrt(|a - b| + eps)`
    Alignment,
}

impl std::fmt::Display for PenaltyKind {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            PenaltyKind::Ridge => "ridge",
            PenaltyKind::Lasso => "lasso",
            PenaltyKind::Alignment => "alignment",
        })
    }
}

impl std::str::FromStr for PenaltyKind {
    type Err = HetopError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ridge" => Ok(PenaltyKind::Ridge),
            "lasso" => Ok(PenaltyKind::Lasso),
            "alignment" => Ok(PenaltyKind::Alignment),
            other => Err(HetopError::Domain(format!("unknown penalty kind {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PenaltySpec {
    pub kind: PenaltyKind,
    pub nu: f64,
    pub epsilon: f64,
}

impl PenaltySpec {
    pub fn new(kind: PenaltyKind, nu: f64, epsilon: f64) -> Result<Self> {
        let spec = Self { kind, nu, epsilon };
        spec.validate()?;
        Ok(spec)
    }

    pub fn ridge(nu: f64) -> Result<Self> {
        Self::new(PenaltyKind::Ridge, nu, 0.0)
    }

    pub fn lasso(nu: f64) -> Result<Self> {
        Self::new(PenaltyKind::Lasso, nu, DEFAULT_EPSILON)
    }

    pub fn alignment(nu: f64) -> Result<Self> {
        Self::new(PenaltyKind::Alignment, nu, DEFAULT_EPSILON)
    }

    pub fn with_nu(self, nu: f64) -> Result<Self> {
        Self::new(self.kind, nu, self.epsilon)
    }

    pub fn validate(&self) -> Result<()> {
        if !(self.nu > 0.0) || !self.nu.is_finite() {
            return Err(HetopError::Domain(format!("nu must be positive and finite, got {}", self.nu)));
        }
        if !(self.epsilon >= 0.0) || !self.epsilon.is_finite() {
            return Err(HetopError::Domain(format!("epsilon must be nonnegative, got {}", self.epsilon)));
        }
        if self.kind != PenaltyKind::Ridge && self.epsilon <= 0.0 {
            return Err(HetopError::Domain(format!("{} penalty requires epsilon > 0", self.kind)));
        }
        Ok(())
    }
}

/// `f(a, b)` for a single pair, before division by `nu`.
#[inline]
pub fn pair_penalty(a: f64, b: f64, spec: &PenaltySpec) -> f64 {
    smoothed_pair(a, b, spec, 0.0)
}

// `eta > 0` replaces `|d|` in the alignment penalty by `sqrt(d^2 + eta^2)`.
#[inline]
fn smoothed_pair(a: f64, b: f64, spec: &PenaltySpec, eta: f64) -> f64 {
    let d = a - b;
    match spec.kind {
        PenaltyKind::Ridge => d * d,
        PenaltyKind::Lasso => (d * d + spec.epsilon).sqrt(),
        PenaltyKind::Alignment => (smooth_abs(d, eta) + spec.epsilon).sqrt(),
    }
}

#[inline]
fn smooth_abs(d: f64, eta: f64) -> f64 {
    if eta > 0.0 {
        d.hypot(eta)
    } else {
        d.abs()
    }
}

/// `d f(a, b) / d a`. The alignment penalty has a kink at `a == b`; the
/// symmetric subgradient 0 is returned there.
#[inline]
fn pair_penalty_derivative(a: f64, b: f64, spec: &PenaltySpec, eta: f64) -> f64 {
    let d = a - b;
    match spec.kind {
        PenaltyKind::Ridge => 2.0 * d,
        PenaltyKind::Lasso => d / (d * d + spec.epsilon).sqrt(),
        PenaltyKind::Alignment => {
            if d == 0.0 {
                0.0
            } else {
                let r = smooth_abs(d, eta);
                (d / r) * 0.5 / (r + spec.epsilon).sqrt()
            }
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct PenaltyValue {
    pub value: f64,
    /// `f(theta_g, theta_h) / nu` for every ordered pair; zero on the diagonal.
    pub per_pair_contributions: Option<Vec<Vec<f64>>>,
}

fn check_len(values: &[f64]) -> Result<()> {
    if values.len() < 2 {
        return Err(HetopError::Domain(format!(
            "penalty needs at least 2 groups, got {}",
            values.len()
        )));
    }
    Ok(())
}

pub fn total_penalty(values: &[f64], spec: &PenaltySpec) -> Result<PenaltyValue> {
    check_len(values)?;
    Ok(PenaltyValue { value: smoothed_total(values, spec, 0.0), per_pair_contributions: None })
}

pub(crate) fn smoothed_total(values: &[f64], spec: &PenaltySpec, eta: f64) -> f64 {
    let mut value = 0.0;
    for (g, &a) in values.iter().enumerate() {
        for (h, &b) in values.iter().enumerate() {
            if g != h {
                value += smoothed_pair(a, b, spec, eta);
            }
        }
    }
    value / spec.nu
}

/// Like [`total_penalty`] but also returns the pair matrix.
pub fn total_penalty_with_pairs(values: &[f64], spec: &PenaltySpec) -> Result<PenaltyValue> {
    check_len(values)?;
    let pairs: Vec<Vec<f64>> = values
        .iter()
        .enumerate()
        .map(|(g, &a)| {
            values
                .iter()
                .enumerate()
                .map(|(h, &b)| if g == h { 0.0 } else { pair_penalty(a, b, spec) / spec.nu })
                .collect()
        })
        .collect();
    let value = total_penalty(values, spec)?.value;
    Ok(PenaltyValue { value, per_pair_contributions: Some(pairs) })
}

pub fn penalty_gradient(values: &[f64], spec: &PenaltySpec) -> Result<Vec<f64>> {
    check_len(values)?;
    spec.validate()?;
    Ok(smoothed_gradient(values, spec, 0.0))
}

pub(crate) fn smoothed_gradient(values: &[f64], spec: &PenaltySpec, eta: f64) -> Vec<f64> {
    // each unordered pair appears twice with the same derivative
    let scale = 2.0 / spec.nu;
    values
        .iter()
        .enumerate()
        .map(|(g, &a)| {
            let s: f64 = values
                .iter()
                .enumerate()
                .filter(|(h, _)| *h != g)
                .map(|(_, &b)| pair_penalty_derivative(a, b, spec, eta))
                .sum();
            scale * s
        })
        .collect()
}

/// Share of the penalized objective taken by the penalties,
/// `(p_mu + p_lambda) / |loglik - p_mu - p_lambda|`. `None` when the
/// denominator vanishes.
pub fn penalty_proportion(loglik: f64, p_mu: f64, p_lambda: f64) -> Option<f64> {
    let penalties = p_mu + p_lambda;
    let denom = (loglik - penalties).abs();
    if penalties == 0.0 {
        return Some(0.0);
    }
    if denom == 0.0 || !denom.is_finite() {
        return None;
    }
    Some(penalties / denom)
}

pub fn exceeds_proportion_warning(proportion: Option<f64>) -> bool {
    proportion.is_some_and(|p| p > PENALTY_PROPORTION_WARN)
}

#[cfg(test)]
mod tests {
    use super::*;
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    fn spec(kind: PenaltyKind, nu: f64) -> PenaltySpec {
        PenaltySpec::new(kind, nu, if kind == PenaltyKind::Ridge { 0.0 } else { 1e-4 }).unwrap()
    }

    #[test]
    fn pair_examples() {
        assert_eq!(pair_penalty(1.0, -1.0, &spec(PenaltyKind::Ridge, 1.0)), 4.0);
        assert_abs_diff_eq!(pair_penalty(0.3, 0.3, &spec(PenaltyKind::Lasso, 1.0)), 0.01, epsilon = 1e-15);
        assert_abs_diff_eq!(
            pair_penalty(0.25, 0.0, &spec(PenaltyKind::Alignment, 1.0)),
            0.2501f64.sqrt(),
            epsilon = 1e-15
        );
        assert_abs_diff_eq!(pair_penalty(0.25, 0.0, &spec(PenaltyKind::Alignment, 1.0)), 0.500_10, epsilon = 1e-5);
    }

    #[test]
    fn total_examples() {
        assert_eq!(total_penalty(&[1.0, -1.0], &spec(PenaltyKind::Ridge, 1.0)).unwrap().value, 8.0);
        assert_eq!(total_penalty(&[1.0, -1.0], &spec(PenaltyKind::Ridge, 4.0)).unwrap().value, 2.0);
        let zero_eps = PenaltySpec { kind: PenaltyKind::Alignment, nu: 1.0, epsilon: 0.0 };
        assert_eq!(total_penalty(&[0.4; 5], &zero_eps).unwrap().value, 0.0);
        let zero_eps = PenaltySpec { kind: PenaltyKind::Lasso, nu: 1.0, epsilon: 0.0 };
        assert_eq!(total_penalty(&[0.4; 5], &zero_eps).unwrap().value, 0.0);
        assert!(total_penalty(&[1.0], &spec(PenaltyKind::Ridge, 1.0)).is_err());
        let pv = total_penalty_with_pairs(&[1.0, -1.0, 0.0], &spec(PenaltyKind::Ridge, 2.0)).unwrap();
        let pairs = pv.per_pair_contributions.unwrap();
        assert_eq!(pairs[0][1], 2.0);
        assert_eq!(pairs[1][0], 2.0);
        assert_eq!(pairs.iter().flatten().sum::<f64>(), pv.value);
    }

    #[test]
    fn gradient_examples() {
        assert_eq!(penalty_gradient(&[1.0, -1.0], &spec(PenaltyKind::Ridge, 1.0)).unwrap(), vec![8.0, -8.0]);
        assert_eq!(penalty_gradient(&[0.2; 4], &spec(PenaltyKind::Ridge, 1.0)).unwrap(), vec![0.0; 4]);
        let bad = PenaltySpec { kind: PenaltyKind::Alignment, nu: 1.0, epsilon: 0.0 };
        assert!(penalty_gradient(&[0.0, 0.0], &bad).is_err());
    }

    #[test]
    fn spec_validation() {
        assert!(PenaltySpec::new(PenaltyKind::Ridge, 0.0, 0.0).is_err());
        assert!(PenaltySpec::new(PenaltyKind::Lasso, 1.0, 0.0).is_err());
        assert!(PenaltySpec::new(PenaltyKind::Alignment, 1.0, -1.0).is_err());
        assert!(PenaltySpec::alignment(1.0).is_ok());
        assert_eq!("lasso".parse::<PenaltyKind>().unwrap(), PenaltyKind::Lasso);
    }

    #[test]
    fn proportion_examples() {
        assert_abs_diff_eq!(penalty_proportion(-100.0, 4.0, 1.0).unwrap(), 5.0 / 105.0, epsilon = 1e-15);
        assert_eq!(penalty_proportion(-100.0, 0.0, 0.0), Some(0.0));
        assert_eq!(penalty_proportion(2.0, 1.0, 1.0), None);
        assert!(exceeds_proportion_warning(penalty_proportion(-10.0, 1.0, 1.0)));
        assert!(!exceeds_proportion_warning(penalty_proportion(-100.0, 4.0, 1.0)));
        assert!(!exceeds_proportion_warning(None));
    }

    fn kind_strategy() -> impl Strategy<Value = PenaltyKind> {
        prop_oneof![Just(PenaltyKind::Ridge), Just(PenaltyKind::Lasso), Just(PenaltyKind::Alignment)]
    }

    proptest! {
        #[test]
        fn gradient_matches_finite_differences(
            kind in kind_strategy(),
            values in prop::collection::vec(-2.0f64..2.0, 2..9),
            nu in 0.1f64..10.0,
        ) {
            let s = spec(kind, nu);
            // keep clear of the alignment kink
            for (i, a) in values.iter().enumerate() {
                for b in &values[i + 1..] {
                    prop_assume!((a - b).abs() > 1e-2);
                }
            }
            let g = penalty_gradient(&values, &s).unwrap();
            let h = 1e-6;
            for i in 0..values.len() {
                let mut up = values.clone();
                let mut dn = values.clone();
                up[i] += h;
                dn[i] -= h;
                let fd = (total_penalty(&up, &s).unwrap().value - total_penalty(&dn, &s).unwrap().value) / (2.0 * h);
                prop_assert!((g[i] - fd).abs() / g[i].abs().max(fd.abs()).max(1.0) < 1e-6, "{} vs {}", g[i], fd);
            }
        }

        #[test]
        fn symmetric_and_shift_invariant(
            kind in kind_strategy(),
            values in prop::collection::vec(-2.0f64..2.0, 2..9),
            shift in -5.0f64..5.0,
            nu in 0.1f64..10.0,
        ) {
            let s = spec(kind, nu);
            let base = total_penalty(&values, &s).unwrap().value;
            let mut rev = values.clone();
            rev.reverse();
            prop_assert!((total_penalty(&rev, &s).unwrap().value - base).abs() < 1e-10 * base.max(1.0));
            let shifted: Vec<f64> = values.iter().map(|v| v + shift).collect();
            prop_assert!((total_penalty(&shifted, &s).unwrap().value - base).abs() < 1e-9 * base.max(1.0));
            let doubled = total_penalty(&values, &spec(kind, 2.0 * nu)).unwrap().value;
            prop_assert!((2.0 * doubled - base).abs() < 1e-12 * base.max(1.0));
        }
    }
}
