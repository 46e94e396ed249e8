//! Domain types: the grouped count table, group parameters, identification
//! constraints and the unconstrained parameter vector the optimizer works on.

use serde::{Deserialize, Serialize};

use crate::error::{HetopError, Result};

const CONSTRAINT_TOL: f64 = 1e-10;

/// Weighted category counts `n_gk` for `G` groups and `K + 1` ordered
/// categories. Counts are real-valued so that survey-weighted population
/// counts can be used directly.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CategoryCountTable {
    group_labels: Vec<String>,
    n_categories: usize,
    counts: Vec<f64>,
    group_weights: Vec<f64>,
}

impl CategoryCountTable {
    pub fn new(
        group_labels: Vec<String>,
        counts: Vec<Vec<f64>>,
        group_weights: Option<Vec<f64>>,
    ) -> Result<Self> {
        let n_groups = group_labels.len();
        if n_groups < 2 {
            return Err(HetopError::InvalidData(format!(
                "at least 2 groups are required, got {n_groups}"
            )));
        }
        if counts.len() != n_groups {
            return Err(HetopError::Dimension { expected: n_groups, actual: counts.len() });
        }
        let n_categories = counts[0].len();
        if n_categories < 2 {
            return Err(HetopError::InvalidData(format!(
                "at least 2 categories are required, got {n_categories}"
            )));
        }
        let mut seen = std::collections::HashSet::new();
        for label in &group_labels {
            if !seen.insert(label.as_str()) {
                return Err(HetopError::InvalidData(format!("duplicate group label {label:?}")));
            }
        }
        let mut flat = Vec::with_capacity(n_groups * n_categories);
        for (g, row) in counts.iter().enumerate() {
            if row.len() != n_categories {
                return Err(HetopError::Dimension { expected: n_categories, actual: row.len() });
            }
            if let Some(bad) = row.iter().find(|c| !c.is_finite() || **c < 0.0) {
                return Err(HetopError::InvalidData(format!(
                    "group {:?} has invalid count {bad}",
                    group_labels[g]
                )));
            }
            if row.iter().sum::<f64>() <= 0.0 {
                return Err(HetopError::InvalidData(format!(
                    "group {:?} has zero total count",
                    group_labels[g]
                )));
            }
            flat.extend_from_slice(row);
        }
        let group_weights = match group_weights {
            Some(w) => {
                if w.len() != n_groups {
                    return Err(HetopError::Dimension { expected: n_groups, actual: w.len() });
                }
                if let Some(bad) = w.iter().find(|x| !x.is_finite() || **x < 0.0) {
                    return Err(HetopError::InvalidData(format!("invalid group weight {bad}")));
                }
                w
            }
            None => vec![1.0; n_groups],
        };
        Ok(Self { group_labels, n_categories, counts: flat, group_weights })
    }

    pub fn n_groups(&self) -> usize {
        self.group_labels.len()
    }

    /// Number of categories, `K + 1`.
    pub fn n_categories(&self) -> usize {
        self.n_categories
    }

    /// Number of thresholds, `K`.
    pub fn n_thresholds(&self) -> usize {
        self.n_categories - 1
    }

    pub fn group_labels(&self) -> &[String] {
        &self.group_labels
    }

    pub fn group_index(&self, label: &str) -> Option<usize> {
        self.group_labels.iter().position(|l| l == label)
    }

    pub fn row(&self, g: usize) -> &[f64] {
        &self.counts[g * self.n_categories..(g + 1) * self.n_categories]
    }

    pub fn count(&self, g: usize, k: usize) -> f64 {
        self.counts[g * self.n_categories + k]
    }

    pub fn weight(&self, g: usize) -> f64 {
        self.group_weights[g]
    }

    pub fn group_weights(&self) -> &[f64] {
        &self.group_weights
    }

    pub fn row_total(&self, g: usize) -> f64 {
        self.row(g).iter().sum()
    }

    pub fn rows(&self) -> impl Iterator<Item = &[f64]> {
        self.counts.chunks(self.n_categories)
    }

    /// Category totals pooled over groups (unweighted).
    pub fn pooled_counts(&self) -> Vec<f64> {
        let mut pooled = vec![0.0; self.n_categories];
        for row in self.rows() {
            for (p, c) in pooled.iter_mut().zip(row) {
                *p += c;
            }
        }
        pooled
    }

    /// `(group, category)` pairs whose count is exactly zero.
    pub fn empty_cells(&self) -> Vec<(usize, usize)> {
        let mut out = Vec::new();
        for (g, row) in self.rows().enumerate() {
            for (k, &c) in row.iter().enumerate() {
                if c == 0.0 {
                    out.push((g, k));
                }
            }
        }
        out
    }

    /// Same table with groups reordered so that new group `i` is old group
    /// `order[i]`.
    pub fn permuted(&self, order: &[usize]) -> Result<Self> {
        if order.len() != self.n_groups() {
            return Err(HetopError::Dimension { expected: self.n_groups(), actual: order.len() });
        }
        let labels = order.iter().map(|&g| self.group_labels[g].clone()).collect();
        let counts = order.iter().map(|&g| self.row(g).to_vec()).collect();
        let weights = order.iter().map(|&g| self.group_weights[g]).collect();
        Self::new(labels, counts, Some(weights))
    }

    pub fn apply_empty_cell_policy(&self, policy: EmptyCellPolicy) -> Result<(Self, EmptyCellOutcome)> {
        let empty = self.empty_cells();
        if empty.is_empty() {
            let mapping = (0..self.n_categories).collect();
            return Ok((self.clone(), EmptyCellOutcome { cells_adjusted: 0, category_map: mapping }));
        }
        match policy {
            EmptyCellPolicy::Error => {
                let (g, k) = empty[0];
                Err(HetopError::EmptyCell { group: self.group_labels[g].clone(), category: k })
            }
            EmptyCellPolicy::AddHalf => {
                let counts = self
                    .rows()
                    .map(|row| row.iter().map(|&c| if c == 0.0 { 0.5 } else { c }).collect())
                    .collect();
                let table =
                    Self::new(self.group_labels.clone(), counts, Some(self.group_weights.clone()))?;
                let mapping = (0..self.n_categories).collect();
                Ok((table, EmptyCellOutcome { cells_adjusted: empty.len(), category_map: mapping }))
            }
            EmptyCellPolicy::MergeAdjacent => self.merge_empty_categories(empty.len()),
        }
    }

    // Repeatedly folds the first category column containing an empty cell
    // into its upper neighbour (the lower one for the top category).
    fn merge_empty_categories(&self, n_empty: usize) -> Result<(Self, EmptyCellOutcome)> {
        let mut columns: Vec<Vec<f64>> = (0..self.n_categories)
            .map(|k| (0..self.n_groups()).map(|g| self.count(g, k)).collect())
            .collect();
        let mut members: Vec<Vec<usize>> = (0..self.n_categories).map(|k| vec![k]).collect();
        while let Some(k) = columns.iter().position(|col| col.contains(&0.0)) {
            if columns.len() <= 2 {
                return Err(HetopError::InvalidData(
                    "merging empty categories would leave fewer than 2 categories".into(),
                ));
            }
            let target = if k + 1 < columns.len() { k + 1 } else { k - 1 };
            let col = columns.remove(k);
            let mem = members.remove(k);
            let target = if target > k { target - 1 } else { target };
            for (t, c) in columns[target].iter_mut().zip(col) {
                *t += c;
            }
            members[target].extend(mem);
        }
        let mut category_map = vec![0; self.n_categories];
        for (new_k, mem) in members.iter().enumerate() {
            for &old in mem {
                category_map[old] = new_k;
            }
        }
        let counts = (0..self.n_groups())
            .map(|g| columns.iter().map(|col| col[g]).collect())
            .collect();
        let table = Self::new(self.group_labels.clone(), counts, Some(self.group_weights.clone()))?;
        Ok((table, EmptyCellOutcome { cells_adjusted: n_empty, category_map }))
    }
}

/// What to do with zero cells before estimation.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum EmptyCellPolicy {
    #[default]
    Error,
    MergeAdjacent,
    AddHalf,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EmptyCellOutcome {
    pub cells_adjusted: usize,
    /// Original category index -> category index in the adjusted table.
    pub category_map: Vec<usize>,
}

/// Group latent means, log-scales and shared thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GroupParams {
    pub mu: Vec<f64>,
    /// `ln sigma_g`; discrimination is `exp(-log_scale)`.
    pub log_scale: Vec<f64>,
    pub thresholds: Vec<f64>,
}

impl GroupParams {
    pub fn new(mu: Vec<f64>, log_scale: Vec<f64>, thresholds: Vec<f64>) -> Result<Self> {
        let p = Self { mu, log_scale, thresholds };
        p.validate()?;
        Ok(p)
    }

    /// Builds parameters from discriminations instead of log-scales.
    pub fn from_lambda(mu: Vec<f64>, lambda: &[f64], thresholds: Vec<f64>) -> Result<Self> {
        if let Some(bad) = lambda.iter().find(|l| !(**l > 0.0) || !l.is_finite()) {
            return Err(HetopError::Domain(format!("discrimination must be positive, got {bad}")));
        }
        Self::new(mu, lambda.iter().map(|l| -l.ln()).collect(), thresholds)
    }

    pub fn validate(&self) -> Result<()> {
        if self.mu.len() != self.log_scale.len() {
            return Err(HetopError::Dimension { expected: self.mu.len(), actual: self.log_scale.len() });
        }
        if self.thresholds.is_empty() {
            return Err(HetopError::InvalidData("at least one threshold is required".into()));
        }
        let all = self.mu.iter().chain(&self.log_scale).chain(&self.thresholds);
        if all.clone().any(|x| !x.is_finite()) {
            return Err(HetopError::InvalidData("parameters must be finite".into()));
        }
        if self.thresholds.windows(2).any(|w| !(w[1] > w[0])) {
            return Err(HetopError::ConstraintViolation("thresholds must be strictly increasing".into()));
        }
        Ok(())
    }

    pub fn n_groups(&self) -> usize {
        self.mu.len()
    }

    pub fn n_thresholds(&self) -> usize {
        self.thresholds.len()
    }

    pub fn lambda(&self, g: usize) -> f64 {
        (-self.log_scale[g]).exp()
    }

    pub fn sigma(&self, g: usize) -> f64 {
        self.log_scale[g].exp()
    }

    pub fn lambdas(&self) -> Vec<f64> {
        (0..self.n_groups()).map(|g| self.lambda(g)).collect()
    }

    pub fn sigmas(&self) -> Vec<f64> {
        (0..self.n_groups()).map(|g| self.sigma(g)).collect()
    }

    /// Re-expresses the parameters on the latent scale selected by `scheme`.
    ///
    /// The map `y -> (y - shift) / exp(log_unit)` leaves every category
    /// probability unchanged, so this changes only the identification. A
    /// `FixedZero` constraint cannot in general be reached that way; such
    /// values are set to zero directly, which makes the result suitable only
    /// as a starting point.
    pub fn identified(&self, scheme: &IdentificationScheme) -> Result<Self> {
        let g = self.n_groups();
        scheme.check_groups(g)?;
        let log_unit = match scheme.scale {
            Constraint::SumToZero => mean(&self.log_scale),
            Constraint::Reference(r) => self.log_scale[r],
            Constraint::FixedZero => 0.0,
        };
        let unit = log_unit.exp();
        let scaled_mu: Vec<f64> = self.mu.iter().map(|m| m / unit).collect();
        let shift = match scheme.location {
            Constraint::SumToZero => mean(&scaled_mu),
            Constraint::Reference(r) => scaled_mu[r],
            Constraint::FixedZero => 0.0,
        };
        let mut mu: Vec<f64> = scaled_mu.iter().map(|m| m - shift).collect();
        let mut log_scale: Vec<f64> = self.log_scale.iter().map(|s| s - log_unit).collect();
        let thresholds = self.thresholds.iter().map(|t| t / unit - shift).collect();
        for (values, c) in [(&mut mu, scheme.location), (&mut log_scale, scheme.scale)] {
            match c {
                Constraint::Reference(r) => values[r] = 0.0,
                Constraint::FixedZero => values.iter_mut().for_each(|v| *v = 0.0),
                Constraint::SumToZero => {
                    let s: f64 = values[..g - 1].iter().sum();
                    values[g - 1] = -s;
                }
            }
        }
        GroupParams::new(mu, log_scale, thresholds)
    }
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

/// How one family of group parameters (locations or log-scales) is pinned
/// down.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case", tag = "kind", content = "group")]
pub enum Constraint {
    /// The last group is the negative sum of the others.
    SumToZero,
    /// The given group is fixed at zero.
    Reference(usize),
    /// Every group is fixed at zero (no free parameters).
    FixedZero,
}

impl Constraint {
    fn n_free(self, n_groups: usize) -> usize {
        match self {
            Constraint::SumToZero | Constraint::Reference(_) => n_groups - 1,
            Constraint::FixedZero => 0,
        }
    }

    fn check(self, values: &[f64], what: &str) -> Result<()> {
        let violation = match self {
            Constraint::SumToZero => values.iter().sum::<f64>().abs() > CONSTRAINT_TOL,
            Constraint::Reference(r) => values[r].abs() > CONSTRAINT_TOL,
            Constraint::FixedZero => values.iter().any(|v| v.abs() > CONSTRAINT_TOL),
        };
        if violation {
            return Err(HetopError::ConstraintViolation(format!("{what} violate {self:?}")));
        }
        Ok(())
    }

    fn free_values(self, values: &[f64], out: &mut Vec<f64>) {
        match self {
            Constraint::SumToZero => out.extend_from_slice(&values[..values.len() - 1]),
            Constraint::Reference(r) => {
                out.extend(values.iter().enumerate().filter(|(g, _)| *g != r).map(|(_, v)| *v))
            }
            Constraint::FixedZero => {}
        }
    }

    fn complete(self, free: &[f64], n_groups: usize) -> Vec<f64> {
        match self {
            Constraint::SumToZero => {
                let mut v = free.to_vec();
                v.push(-free.iter().sum::<f64>());
                v
            }
            Constraint::Reference(r) => {
                let mut v = Vec::with_capacity(n_groups);
                let mut it = free.iter();
                for g in 0..n_groups {
                    v.push(if g == r { 0.0 } else { *it.next().unwrap() });
                }
                v
            }
            Constraint::FixedZero => vec![0.0; n_groups],
        }
    }

    // Adjoint of `complete`: maps a gradient over all groups to the free
    // coordinates.
    fn pull_back(self, grad: &[f64], out: &mut Vec<f64>) {
        match self {
            Constraint::SumToZero => {
                let last = grad[grad.len() - 1];
                out.extend(grad[..grad.len() - 1].iter().map(|g| g - last));
            }
            Constraint::Reference(r) => {
                out.extend(grad.iter().enumerate().filter(|(g, _)| *g != r).map(|(_, v)| *v))
            }
            Constraint::FixedZero => {}
        }
    }
}

/// Identification constraints, applied independently to locations and
/// log-scales.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct IdentificationScheme {
    pub location: Constraint,
    pub scale: Constraint,
}

impl Default for IdentificationScheme {
    fn default() -> Self {
        Self::sum_to_zero()
    }
}

impl IdentificationScheme {
    pub fn sum_to_zero() -> Self {
        Self { location: Constraint::SumToZero, scale: Constraint::SumToZero }
    }

    pub fn reference(group: usize) -> Self {
        Self { location: Constraint::Reference(group), scale: Constraint::Reference(group) }
    }

    pub fn check_groups(&self, n_groups: usize) -> Result<()> {
        if n_groups < 2 {
            return Err(HetopError::InvalidData("at least 2 groups are required".into()));
        }
        for c in [self.location, self.scale] {
            if let Constraint::Reference(r) = c {
                if r >= n_groups {
                    return Err(HetopError::Index { index: r, limit: n_groups });
                }
            }
        }
        Ok(())
    }

    /// Length of the free parameter vector for `G` groups and `K` thresholds.
    pub fn n_free(&self, n_groups: usize, n_thresholds: usize) -> usize {
        self.location.n_free(n_groups) + self.scale.n_free(n_groups) + n_thresholds
    }
}

/// Unconstrained coordinates: free locations, free log-scales, the first
/// threshold and `K - 1` log-increments between consecutive thresholds.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FreeParameterVector(pub Vec<f64>);

impl FreeParameterVector {
    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    pub fn len(&self) -> usize {
        self.0.len()
    }

    pub fn is_empty(&self) -> bool {
        self.0.is_empty()
    }
}

pub fn pack(params: &GroupParams, scheme: &IdentificationScheme) -> Result<FreeParameterVector> {
    params.validate()?;
    scheme.check_groups(params.n_groups())?;
    scheme.location.check(&params.mu, "locations")?;
    scheme.scale.check(&params.log_scale, "log-scales")?;
    let mut v = Vec::with_capacity(scheme.n_free(params.n_groups(), params.n_thresholds()));
    scheme.location.free_values(&params.mu, &mut v);
    scheme.scale.free_values(&params.log_scale, &mut v);
    v.push(params.thresholds[0]);
    v.extend(params.thresholds.windows(2).map(|w| (w[1] - w[0]).ln()));
    Ok(FreeParameterVector(v))
}

pub fn unpack(
    v: &FreeParameterVector,
    scheme: &IdentificationScheme,
    n_groups: usize,
    n_thresholds: usize,
) -> Result<GroupParams> {
    scheme.check_groups(n_groups)?;
    if n_thresholds == 0 {
        return Err(HetopError::InvalidData("at least one threshold is required".into()));
    }
    let expected = scheme.n_free(n_groups, n_thresholds);
    if v.len() != expected {
        return Err(HetopError::Dimension { expected, actual: v.len() });
    }
    let n_loc = scheme.location.n_free(n_groups);
    let n_scale = scheme.scale.n_free(n_groups);
    let (loc, rest) = v.0.split_at(n_loc);
    let (scale, thr) = rest.split_at(n_scale);
    let mu = scheme.location.complete(loc, n_groups);
    let log_scale = scheme.scale.complete(scale, n_groups);
    let mut thresholds = Vec::with_capacity(n_thresholds);
    let mut t = thr[0];
    thresholds.push(t);
    for inc in &thr[1..] {
        t += inc.exp();
        thresholds.push(t);
    }
    Ok(GroupParams { mu, log_scale, thresholds })
}

/// Applies the transpose Jacobian of `unpack` at `v` to gradients with
/// respect to the natural parameters.
pub fn pull_back_gradient(
    v: &FreeParameterVector,
    scheme: &IdentificationScheme,
    grad_mu: &[f64],
    grad_log_scale: &[f64],
    grad_thresholds: &[f64],
) -> Vec<f64> {
    let n_groups = grad_mu.len();
    let k = grad_thresholds.len();
    let mut out = Vec::with_capacity(scheme.n_free(n_groups, k));
    scheme.location.pull_back(grad_mu, &mut out);
    scheme.scale.pull_back(grad_log_scale, &mut out);
    let increments = &v.0[v.len() - k..];
    // suffix[j] = sum of threshold gradients from j onward
    let mut suffix = vec![0.0; k + 1];
    for j in (0..k).rev() {
        suffix[j] = suffix[j + 1] + grad_thresholds[j];
    }
    out.push(suffix[0]);
    for j in 1..k {
        out.push(increments[j].exp() * suffix[j]);
    }
    out
}

/// Jacobian of `(mu, log_scale, thresholds)` with respect to the free vector,
/// as a row-major `(2G + K) x n_free` matrix.
pub fn unpack_jacobian(
    v: &FreeParameterVector,
    scheme: &IdentificationScheme,
    n_groups: usize,
    n_thresholds: usize,
) -> Vec<Vec<f64>> {
    let n_natural = 2 * n_groups + n_thresholds;
    (0..n_natural)
        .map(|i| {
            let mut e = vec![0.0; n_natural];
            e[i] = 1.0;
            pull_back_gradient(
                v,
                scheme,
                &e[..n_groups],
                &e[n_groups..2 * n_groups],
                &e[2 * n_groups..],
            )
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    fn labels(n: usize) -> Vec<String> {
        (0..n).map(|g| format!("g{g}")).collect()
    }

    #[test]
    fn pack_sum_to_zero_two_groups() {
        let p = GroupParams::new(vec![0.5, -0.5], vec![0.0, 0.0], vec![0.0]).unwrap();
        let v = pack(&p, &IdentificationScheme::sum_to_zero()).unwrap();
        assert_eq!(v.0, vec![0.5, 0.0, 0.0]);
    }

    #[test]
    fn pack_threshold_increments() {
        let p = GroupParams::new(vec![0.0, 0.0], vec![0.0, 0.0], vec![-1.0, 1.0]).unwrap();
        let v = pack(&p, &IdentificationScheme::sum_to_zero()).unwrap();
        assert_eq!(v.0, vec![0.0, 0.0, -1.0, 2f64.ln()]);
    }

    #[test]
    fn pack_rejects_violations() {
        let p = GroupParams::new(vec![0.5, 0.5], vec![0.0, 0.0], vec![0.0]).unwrap();
        assert!(matches!(
            pack(&p, &IdentificationScheme::sum_to_zero()),
            Err(HetopError::ConstraintViolation(_))
        ));
        assert!(pack(&p, &IdentificationScheme::reference(1)).is_err());
        let p = GroupParams { mu: vec![0.0, 0.0], log_scale: vec![0.0, 0.0], thresholds: vec![1.0, 0.5] };
        assert!(pack(&p, &IdentificationScheme::sum_to_zero()).is_err());
    }

    #[test]
    fn unpack_examples() {
        let s = IdentificationScheme::sum_to_zero();
        let p = unpack(&FreeParameterVector(vec![0.5, 0.0, 0.0]), &s, 2, 1).unwrap();
        assert_eq!(p.mu, vec![0.5, -0.5]);

        let p = unpack(&FreeParameterVector(vec![0.0; 6]), &s, 3, 2).unwrap();
        assert_eq!(p.mu, vec![0.0; 3]);
        assert_eq!(p.log_scale, vec![0.0; 3]);
        assert_eq!(p.thresholds, vec![0.0, 1.0]);

        let r = IdentificationScheme::reference(0);
        let p = unpack(&FreeParameterVector(vec![0.3, -0.2, 0.0, 0.0, 0.0, 0.0]), &r, 3, 2).unwrap();
        assert_eq!(p.mu, vec![0.0, 0.3, -0.2]);
        assert_eq!(p.log_scale[0], 0.0);
    }

    #[test]
    fn unpack_wrong_length() {
        let s = IdentificationScheme::sum_to_zero();
        assert_eq!(
            unpack(&FreeParameterVector(vec![0.0; 4]), &s, 2, 1),
            Err(HetopError::Dimension { expected: 3, actual: 4 })
        );
    }

    #[test]
    fn fixed_scale_has_no_scale_coordinates() {
        let s = IdentificationScheme { location: Constraint::Reference(0), scale: Constraint::FixedZero };
        assert_eq!(s.n_free(2, 1), 2);
        let p = unpack(&FreeParameterVector(vec![0.7, -0.1]), &s, 2, 1).unwrap();
        assert_eq!(p.mu, vec![0.0, 0.7]);
        assert_eq!(p.log_scale, vec![0.0, 0.0]);
    }

    #[test]
    fn identified_preserves_standardized_distances() {
        let p = GroupParams::new(vec![0.4, 1.0, -0.3], vec![0.2, -0.1, 0.3], vec![-0.5, 0.7]).unwrap();
        let q = p.identified(&IdentificationScheme::sum_to_zero()).unwrap();
        assert!(q.mu.iter().sum::<f64>().abs() < 1e-12);
        assert!(q.log_scale.iter().sum::<f64>().abs() < 1e-12);
        for g in 0..3 {
            for k in 0..2 {
                let a = p.lambda(g) * (p.mu[g] - p.thresholds[k]);
                let b = q.lambda(g) * (q.mu[g] - q.thresholds[k]);
                assert!((a - b).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn merge_adjacent_folds_empty_column() {
        let t = CategoryCountTable::new(
            labels(2),
            vec![vec![3.0, 0.0, 2.0, 1.0], vec![1.0, 2.0, 0.0, 4.0]],
            None,
        )
        .unwrap();
        let (m, out) = t.apply_empty_cell_policy(EmptyCellPolicy::MergeAdjacent).unwrap();
        assert_eq!(m.n_categories(), 3);
        assert_eq!(m.row(0), &[3.0, 2.0, 1.0]);
        assert_eq!(m.row(1), &[1.0, 2.0, 4.0]);
        assert_eq!(out.category_map, vec![0, 1, 1, 2]);
        assert!(t.apply_empty_cell_policy(EmptyCellPolicy::Error).is_err());
        let (h, out) = t.apply_empty_cell_policy(EmptyCellPolicy::AddHalf).unwrap();
        assert_eq!(h.row(0), &[3.0, 0.5, 2.0, 1.0]);
        assert_eq!(out.cells_adjusted, 2);
    }

    #[test]
    fn table_validation() {
        assert!(CategoryCountTable::new(labels(1), vec![vec![1.0, 1.0]], None).is_err());
        assert!(CategoryCountTable::new(labels(2), vec![vec![1.0], vec![1.0]], None).is_err());
        assert!(CategoryCountTable::new(labels(2), vec![vec![1.0, -1.0], vec![1.0, 1.0]], None).is_err());
        assert!(CategoryCountTable::new(labels(2), vec![vec![0.0, 0.0], vec![1.0, 1.0]], None).is_err());
        assert!(CategoryCountTable::new(vec!["a".into(), "a".into()], vec![vec![1.0, 1.0]; 2], None).is_err());
    }

    fn scheme_strategy() -> impl Strategy<Value = IdentificationScheme> {
        prop_oneof![
            Just(IdentificationScheme::sum_to_zero()),
            (0usize..2).prop_map(IdentificationScheme::reference),
        ]
    }

    proptest! {
        #[test]
        fn unpack_always_valid(
            g in 2usize..8, k in 1usize..7,
            scheme in scheme_strategy(),
            raw in prop::collection::vec(-10.0f64..10.0, 40),
        ) {
            let n = scheme.n_free(g, k);
            let v = FreeParameterVector(raw[..n].to_vec());
            let p = unpack(&v, &scheme, g, k).unwrap();
            prop_assert!(p.validate().is_ok());
            prop_assert!(p.lambdas().iter().all(|l| *l > 0.0));
            if scheme == IdentificationScheme::sum_to_zero() {
                prop_assert!(p.mu.iter().sum::<f64>().abs() < 1e-10);
                prop_assert!(p.log_scale.iter().sum::<f64>().abs() < 1e-10);
            }
            let back = pack(&p, &scheme).unwrap();
            for (a, b) in back.0.iter().zip(&v.0) {
                prop_assert!((a - b).abs() < 1e-6 * (1.0 + b.abs()));
            }
        }

        #[test]
        fn pack_unpack_round_trip(
            g in 2usize..8, k in 1usize..7,
            raw in prop::collection::vec(-3.0f64..3.0, 40),
            gaps in prop::collection::vec(0.05f64..2.0, 8),
        ) {
            let mu: Vec<f64> = raw[..g].to_vec();
            let ls: Vec<f64> = raw[g..2 * g].iter().map(|x| x / 3.0).collect();
            let mut t = vec![raw[2 * g]];
            for gap in &gaps[..k - 1] {
                t.push(t.last().unwrap() + gap);
            }
            let p = GroupParams::new(mu, ls, t).unwrap()
                .identified(&IdentificationScheme::sum_to_zero()).unwrap();
            let s = IdentificationScheme::sum_to_zero();
            let q = unpack(&pack(&p, &s).unwrap(), &s, g, k).unwrap();
            for (a, b) in p.mu.iter().chain(&p.log_scale).chain(&p.thresholds)
                .zip(q.mu.iter().chain(&q.log_scale).chain(&q.thresholds)) {
                prop_assert!((a - b).abs() < 1e-12);
            }
        }
    }
}
