//! Penalized maximum-likelihood fitting, regularization paths and
//! Hessian-based standard errors.

use nalgebra::DMatrix;
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::error::{HetopError, Result};
use crate::likelihood::{multinomial_constant, natural_gradient};
use crate::model::{pack, pull_back_gradient, unpack, unpack_jacobian, CategoryCountTable, FreeParameterVector, GroupParams, IdentificationScheme};
use crate::normal;
use crate::optim::{self, inf_norm, BfgsOptions, Termination};
use crate::penalty::{self, exceeds_proportion_warning, PenaltyKind, PenaltySpec};

/// Scale on which the discrimination penalty is evaluated.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum DiscriminationScale {
    /// `lambda_g = exp(-log_scale_g)`
    #[default]
    Lambda,
    /// `ln lambda_g = -log_scale_g`
    LogLambda,
}

#[derive(Debug, Clone, PartialEq, Default)]
pub enum Initialization {
    #[default]
    ProbitMoments,
    Zeros,
    WarmStart(GroupParams),
}

#[derive(Debug, Clone, PartialEq)]
pub struct FitConfig {
    pub identification: IdentificationScheme,
    /// `None` fits the unpenalized model.
    pub penalty: Option<PenaltySpec>,
    pub discrimination_scale: DiscriminationScale,
    pub max_iterations: usize,
    pub gradient_tolerance: f64,
    pub objective_tolerance: f64,
    pub initialization: Initialization,
}

impl Default for FitConfig {
    fn default() -> Self {
        let bfgs = BfgsOptions::default();
        Self {
            identification: IdentificationScheme::sum_to_zero(),
            penalty: None,
            discrimination_scale: DiscriminationScale::Lambda,
            max_iterations: bfgs.max_iterations,
            gradient_tolerance: bfgs.gradient_tolerance,
            objective_tolerance: bfgs.objective_tolerance,
            initialization: Initialization::ProbitMoments,
        }
    }
}

impl FitConfig {
    pub fn penalized(penalty: PenaltySpec) -> Self {
        Self { penalty: Some(penalty), ..Self::default() }
    }

    pub fn validate(&self) -> Result<()> {
        if self.max_iterations == 0 {
            return Err(HetopError::Domain("max_iterations must be at least 1".into()));
        }
        if !(self.gradient_tolerance > 0.0) || !(self.objective_tolerance >= 0.0) {
            return Err(HetopError::Domain("tolerances must be positive".into()));
        }
        if let Some(p) = &self.penalty {
            p.validate()?;
        }
        Ok(())
    }

    fn bfgs(&self) -> BfgsOptions {
        BfgsOptions {
            max_iterations: self.max_iterations,
            gradient_tolerance: self.gradient_tolerance,
            objective_tolerance: self.objective_tolerance,
        }
    }
}

/// Per-parameter standard errors from the inverse negative Hessian of the
/// penalized objective. `None` marks a parameter whose variance could not be
/// obtained: a non-invertible or indefinite Hessian, or, under the alignment
/// penalty, a group fused with another group, where the objective has a kink.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardErrors {
    pub free: Vec<Option<f64>>,
    pub mu: Vec<Option<f64>>,
    pub log_scale: Vec<Option<f64>>,
    pub lambda: Vec<Option<f64>>,
    pub thresholds: Vec<Option<f64>>,
    pub hessian_invertible: bool,
}

impl StandardErrors {
    /// Two-sided `(1 - alpha)` Wald interval for `mu_g`.
    pub fn mu_interval(&self, params: &GroupParams, g: usize, alpha: f64) -> Option<[f64; 2]> {
        let z = normal::inv_cdf(1.0 - alpha / 2.0);
        self.mu[g].map(|se| [params.mu[g] - z * se, params.mu[g] + z * se])
    }

    /// Interval for `ln lambda_g`, built on the log scale.
    pub fn log_lambda_interval(&self, params: &GroupParams, g: usize, alpha: f64) -> Option<[f64; 2]> {
        let z = normal::inv_cdf(1.0 - alpha / 2.0);
        let centre = -params.log_scale[g];
        self.log_scale[g].map(|se| [centre - z * se, centre + z * se])
    }

    pub fn lambda_interval(&self, params: &GroupParams, g: usize, alpha: f64) -> Option<[f64; 2]> {
        self.log_lambda_interval(params, g, alpha).map(|[lo, hi]| [lo.exp(), hi.exp()])
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitResult {
    pub params: GroupParams,
    pub free: FreeParameterVector,
    /// Log-likelihood without the multinomial constant.
    pub loglik: f64,
    pub constant_c: f64,
    pub penalty_mu: f64,
    pub penalty_lambda: f64,
    /// `loglik - penalty_mu - penalty_lambda`
    pub penalized_objective: f64,
    /// `None` when the penalized objective is zero.
    pub penalty_proportion: Option<f64>,
    pub penalty_warning: bool,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub standard_errors: Option<StandardErrors>,
}

impl FitResult {
    pub fn total_loglik(&self) -> f64 {
        self.loglik + self.constant_c
    }
}

/// Value and gradient of the penalized objective in free coordinates.
#[derive(Debug, Clone)]
pub struct ObjectiveEvaluation {
    pub loglik: f64,
    pub penalty_mu: f64,
    pub penalty_lambda: f64,
    pub objective: f64,
    pub gradient: Vec<f64>,
}

pub struct PenalizedObjective<'a> {
    pub table: &'a CategoryCountTable,
    pub scheme: IdentificationScheme,
    pub penalty: Option<PenaltySpec>,
    pub discrimination_scale: DiscriminationScale,
    // width of the smoothed alignment kink; 0 is the exact objective
    smoothing: f64,
}

impl<'a> PenalizedObjective<'a> {
    pub fn new(table: &'a CategoryCountTable, config: &FitConfig) -> Self {
        Self {
            table,
            scheme: config.identification,
            penalty: config.penalty,
            discrimination_scale: config.discrimination_scale,
            smoothing: 0.0,
        }
    }

    pub fn evaluate(&self, v: &FreeParameterVector) -> Result<ObjectiveEvaluation> {
        let params = unpack(v, &self.scheme, self.table.n_groups(), self.table.n_thresholds())?;
        let mut ng = natural_gradient(self.table, &params)?;
        let (mut penalty_mu, mut penalty_lambda) = (0.0, 0.0);
        if let Some(spec) = &self.penalty {
            let eta = self.smoothing;
            penalty_mu = penalty::smoothed_total(&params.mu, spec, eta);
            for (g, d) in ng.mu.iter_mut().zip(penalty::smoothed_gradient(&params.mu, spec, eta)) {
                *g -= d;
            }
            let (theta, chain): (Vec<f64>, Vec<f64>) = match self.discrimination_scale {
                DiscriminationScale::Lambda => {
                    let l = params.lambdas();
                    let chain = l.iter().map(|x| -x).collect();
                    (l, chain)
                }
                DiscriminationScale::LogLambda => {
                    (params.log_scale.iter().map(|s| -s).collect(), vec![-1.0; params.n_groups()])
                }
            };
            penalty_lambda = penalty::smoothed_total(&theta, spec, eta);
            let d_theta = penalty::smoothed_gradient(&theta, spec, eta);
            for ((g, d), c) in ng.log_scale.iter_mut().zip(d_theta).zip(chain) {
                *g -= d * c;
            }
        }
        let gradient = pull_back_gradient(v, &self.scheme, &ng.mu, &ng.log_scale, &ng.thresholds);
        Ok(ObjectiveEvaluation {
            loglik: ng.loglik,
            penalty_mu,
            penalty_lambda,
            objective: ng.loglik - penalty_mu - penalty_lambda,
            gradient,
        })
    }

    pub fn gradient(&self, v: &FreeParameterVector) -> Result<Vec<f64>> {
        Ok(self.evaluate(v)?.gradient)
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct StartingValues {
    pub params: GroupParams,
    /// Groups whose responses fall in a single category; started at zero.
    pub degenerate_groups: Vec<usize>,
}

const CUM_CLAMP: f64 = 1e-6;
const MIN_GAP: f64 = 1e-3;

/// Probit method-of-moments starting values, projected onto `scheme`.
///
/// Thresholds come from the pooled cumulative proportions; each group's
/// `(mu, sigma)` from a least-squares line of `Phi^-1(cumulative share)`
/// against those thresholds.
pub fn initial_params(table: &CategoryCountTable, scheme: &IdentificationScheme) -> Result<StartingValues> {
    scheme.check_groups(table.n_groups())?;
    let pooled = table.pooled_counts();
    let total: f64 = pooled.iter().sum();
    let mut thresholds = Vec::with_capacity(table.n_thresholds());
    let mut cum = 0.0;
    for &c in &pooled[..pooled.len() - 1] {
        cum += c;
        let t = normal::inv_cdf((cum / total).clamp(CUM_CLAMP, 1.0 - CUM_CLAMP));
        let t = match thresholds.last() {
            Some(&prev) if t < prev + MIN_GAP => prev + MIN_GAP,
            _ => t,
        };
        thresholds.push(t);
    }
    let mut mu = Vec::with_capacity(table.n_groups());
    let mut log_scale = Vec::with_capacity(table.n_groups());
    let mut degenerate_groups = Vec::new();
    for (g, row) in table.rows().enumerate() {
        let n: f64 = row.iter().sum();
        let mut points = Vec::new();
        let mut c = 0.0;
        for (k, &count) in row[..row.len() - 1].iter().enumerate() {
            c += count;
            let share = c / n;
            if share > 0.0 && share < 1.0 {
                points.push((thresholds[k], normal::inv_cdf(share)));
            }
        }
        let (m, s) = match points.len() {
            0 => {
                degenerate_groups.push(g);
                (0.0, 1.0)
            }
            1 => (points[0].0 - points[0].1, 1.0),
            _ => probit_line(&points).unwrap_or_else(|| {
                let m = points.iter().map(|(t, z)| t - z).sum::<f64>() / points.len() as f64;
                (m, 1.0)
            }),
        };
        mu.push(m);
        log_scale.push(s.clamp(0.05, 20.0).ln());
    }
    let raw = GroupParams::new(mu, log_scale, thresholds)?;
    Ok(StartingValues { params: raw.identified(scheme)?, degenerate_groups })
}

// z = (tau - mu) / sigma fitted by least squares; None for a non-positive slope.
fn probit_line(points: &[(f64, f64)]) -> Option<(f64, f64)> {
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = points.iter().map(|(x, y)| (x - mx) * (y - my)).sum();
    let sxx: f64 = points.iter().map(|(x, _)| (x - mx).powi(2)).sum();
    if sxx <= 0.0 {
        return None;
    }
    let slope = sxy / sxx;
    if !(slope > 0.0) {
        return None;
    }
    let intercept = my - slope * mx;
    Some((-intercept / slope, 1.0 / slope))
}

fn starting_vector(table: &CategoryCountTable, config: &FitConfig) -> Result<FreeParameterVector> {
    let scheme = &config.identification;
    let params = match &config.initialization {
        Initialization::ProbitMoments => initial_params(table, scheme)?.params,
        Initialization::Zeros => {
            let zeros = FreeParameterVector(vec![0.0; scheme.n_free(table.n_groups(), table.n_thresholds())]);
            unpack(&zeros, scheme, table.n_groups(), table.n_thresholds())?
        }
        Initialization::WarmStart(p) => {
            if p.n_groups() != table.n_groups() || p.n_thresholds() != table.n_thresholds() {
                return Err(HetopError::Initialization("warm start has the wrong shape".into()));
            }
            p.identified(scheme)?
        }
    };
    pack(&params, scheme)
}

/// Kink widths for the alignment penalty, from coarse to fine. BFGS jams at
/// near-ties of the exact penalty, so the fit follows these smoothed
/// objectives before a final pass on the exact one.
const ALIGNMENT_SMOOTHING: [f64; 6] = [1e-2, 1e-3, 1e-4, 1e-5, 1e-6, 1e-7];

fn run_bfgs(objective: &PenalizedObjective<'_>, start: &[f64], opts: &BfgsOptions) -> Result<optim::Minimum> {
    optim::minimize(
        |x| match objective.evaluate(&FreeParameterVector(x.to_vec())) {
            Ok(e) => (-e.objective, e.gradient.iter().map(|g| -g).collect()),
            Err(_) => (f64::NAN, vec![f64::NAN; x.len()]),
        },
        start,
        opts,
    )
    .map_err(|_| HetopError::Initialization("objective is not finite at the starting values".into()))
}

pub fn fit(table: &CategoryCountTable, config: &FitConfig) -> Result<FitResult> {
    config.validate()?;
    config.identification.check_groups(table.n_groups())?;
    let mut objective = PenalizedObjective::new(table, config);
    let mut start = starting_vector(table, config)?.0;
    let mut iterations = 0;
    if matches!(config.penalty, Some(p) if p.kind == PenaltyKind::Alignment) {
        for eta in ALIGNMENT_SMOOTHING {
            objective.smoothing = eta;
            let stage = run_bfgs(&objective, &start, &config.bfgs())?;
            iterations += stage.iterations;
            start = stage.x;
        }
        objective.smoothing = 0.0;
    }
    let minimum = run_bfgs(&objective, &start, &config.bfgs())?;
    iterations += minimum.iterations;

    let free = FreeParameterVector(minimum.x);
    let eval = objective.evaluate(&free)?;
    let params = unpack(&free, &config.identification, table.n_groups(), table.n_thresholds())?;
    let proportion = penalty::penalty_proportion(eval.loglik, eval.penalty_mu, eval.penalty_lambda);
    Ok(FitResult {
        params,
        free,
        loglik: eval.loglik,
        constant_c: multinomial_constant(table),
        penalty_mu: eval.penalty_mu,
        penalty_lambda: eval.penalty_lambda,
        penalized_objective: eval.objective,
        penalty_proportion: proportion,
        penalty_warning: exceeds_proportion_warning(proportion),
        converged: minimum.termination.is_converged(),
        termination: minimum.termination,
        iterations,
        gradient_norm: inf_norm(&eval.gradient),
        standard_errors: None,
    })
}

#[derive(Debug, Clone)]
pub struct PathResult {
    /// Ascending penalty magnitudes.
    pub nu_grid: Vec<f64>,
    /// One entry per grid value; failures are kept in place.
    pub fits: Vec<std::result::Result<FitResult, HetopError>>,
}

impl PathResult {
    pub fn penalty_proportions(&self) -> Vec<Option<f64>> {
        self.fits
            .iter()
            .map(|f| f.as_ref().ok().and_then(|f| f.penalty_proportion))
            .collect()
    }

    pub fn successful(&self) -> impl Iterator<Item = (f64, &FitResult)> {
        self.nu_grid.iter().zip(&self.fits).filter_map(|(nu, f)| f.as_ref().ok().map(|f| (*nu, f)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct PathOptions {
    /// Chain fits from the largest `nu` downward, each starting from the
    /// previous solution. When off, every `nu` is fit independently and in
    /// parallel.
    pub warm_start: bool,
}

impl Default for PathOptions {
    fn default() -> Self {
        Self { warm_start: true }
    }
}

/// `n` log-spaced values from `lo` to `hi` inclusive.
pub fn log_grid(lo: f64, hi: f64, n: usize) -> Result<Vec<f64>> {
    if !(lo > 0.0) || !(hi >= lo) || n == 0 || !hi.is_finite() {
        return Err(HetopError::Domain(format!("invalid log grid {lo}:{hi}:{n}")));
    }
    if n == 1 {
        return Ok(vec![lo]);
    }
    let (a, b) = (lo.log10(), hi.log10());
    Ok((0..n)
        .map(|i| {
            if i == n - 1 {
                hi
            } else {
                10f64.powf(a + (b - a) * i as f64 / (n - 1) as f64)
            }
        })
        .collect())
}

/// 25 points from 1e-3 to 1e3.
pub fn default_nu_grid() -> Vec<f64> {
    log_grid(1e-3, 1e3, 25).expect("static grid")
}

pub fn fit_path(table: &CategoryCountTable, config: &FitConfig, nu_grid: &[f64]) -> Result<PathResult> {
    fit_path_with(table, config, nu_grid, PathOptions::default())
}

pub fn fit_path_with(
    table: &CategoryCountTable,
    config: &FitConfig,
    nu_grid: &[f64],
    options: PathOptions,
) -> Result<PathResult> {
    let template = config
        .penalty
        .ok_or_else(|| HetopError::Domain("a penalty path needs a penalty kind".into()))?;
    if nu_grid.is_empty() {
        return Err(HetopError::Domain("nu grid is empty".into()));
    }
    if nu_grid.iter().any(|nu| !(*nu > 0.0) || !nu.is_finite()) {
        return Err(HetopError::Domain("nu values must be positive and finite".into()));
    }
    if nu_grid.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(HetopError::Domain("nu grid must be strictly increasing".into()));
    }
    let config_at = |nu: f64, init: Initialization| -> Result<FitConfig> {
        Ok(FitConfig { penalty: Some(template.with_nu(nu)?), initialization: init, ..config.clone() })
    };
    let fits = if options.warm_start {
        let mut fits = vec![None; nu_grid.len()];
        let mut init = config.initialization.clone();
        for (i, &nu) in nu_grid.iter().enumerate().rev() {
            let result = config_at(nu, init.clone()).and_then(|c| fit(table, &c));
            if let Ok(f) = &result {
                init = Initialization::WarmStart(f.params.clone());
            }
            fits[i] = Some(result);
        }
        fits.into_iter().map(|f| f.expect("every grid point fitted")).collect()
    } else {
        nu_grid
            .par_iter()
            .map(|&nu| config_at(nu, config.initialization.clone()).and_then(|c| fit(table, &c)))
            .collect()
    };
    Ok(PathResult { nu_grid: nu_grid.to_vec(), fits })
}

const HESSIAN_STEP: f64 = 1e-5;

/// Central-difference Hessian of the penalized objective in free
/// coordinates, from the analytic gradient.
pub fn objective_hessian(table: &CategoryCountTable, config: &FitConfig, v: &FreeParameterVector) -> Result<DMatrix<f64>> {
    hessian_at_smoothing(table, config, v, 0.0)
}

/// Under alignment the exact objective has kinks at every tie, so the
/// difference Hessian straddles them; curvature is taken from a smoothed
/// objective whose width is far above the difference step.
const SE_SMOOTHING: f64 = 1e-3;

fn hessian_at_smoothing(
    table: &CategoryCountTable,
    config: &FitConfig,
    v: &FreeParameterVector,
    eta: f64,
) -> Result<DMatrix<f64>> {
    let mut objective = PenalizedObjective::new(table, config);
    objective.smoothing = eta;
    let n = v.len();
    let mut h = DMatrix::zeros(n, n);
    for j in 0..n {
        let step = HESSIAN_STEP * v.0[j].abs().max(1.0);
        let mut up = v.clone();
        let mut dn = v.clone();
        up.0[j] += step;
        dn.0[j] -= step;
        let (gu, gd) = (objective.gradient(&up)?, objective.gradient(&dn)?);
        for i in 0..n {
            h[(i, j)] = (gu[i] - gd[i]) / (2.0 * step);
        }
    }
    Ok((&h + h.transpose()) * 0.5)
}

fn variance_to_se(var: f64) -> Option<f64> {
    // fixed parameters have exactly zero variance
    (var.is_finite() && var >= 0.0).then(|| var.sqrt())
}

const FUSION_TOLERANCE: f64 = 1e-6;

fn fused_groups(values: &[f64]) -> Vec<usize> {
    (0..values.len())
        .filter(|&i| values.iter().enumerate().any(|(j, v)| j != i && (v - values[i]).abs() <= FUSION_TOLERANCE))
        .collect()
}

pub fn standard_errors(table: &CategoryCountTable, fit: &FitResult, config: &FitConfig) -> Result<StandardErrors> {
    if !fit.converged {
        return Err(HetopError::Precondition("standard errors need a converged fit".into()));
    }
    let g = table.n_groups();
    let k = table.n_thresholds();
    let n_natural = 2 * g + k;
    let alignment = matches!(config.penalty, Some(p) if p.kind == PenaltyKind::Alignment);
    let eta = if alignment { SE_SMOOTHING } else { 0.0 };
    let information = -hessian_at_smoothing(table, config, &fit.free, eta)?;
    let covariance = information
        .clone()
        .cholesky()
        .map(|c| c.inverse())
        .or_else(|| information.clone().try_inverse());
    let Some(cov) = covariance else {
        return Ok(StandardErrors {
            free: vec![None; fit.free.len()],
            mu: vec![None; g],
            log_scale: vec![None; g],
            lambda: vec![None; g],
            thresholds: vec![None; k],
            hessian_invertible: false,
        });
    };
    let free = (0..fit.free.len())
        .map(|i| if cov[(i, i)] > 0.0 { variance_to_se(cov[(i, i)]) } else { None })
        .collect();
    let rows = unpack_jacobian(&fit.free, &config.identification, g, k);
    let jac = DMatrix::from_fn(n_natural, fit.free.len(), |r, c| rows[r][c]);
    let natural = &jac * &cov * jac.transpose();
    let se: Vec<Option<f64>> = (0..n_natural).map(|i| variance_to_se(natural[(i, i)])).collect();
    let mut mu = se[..g].to_vec();
    let mut log_scale = se[g..2 * g].to_vec();
    if alignment {
        let disc: Vec<f64> = match config.discrimination_scale {
            DiscriminationScale::Lambda => fit.params.lambdas(),
            DiscriminationScale::LogLambda => fit.params.log_scale.clone(),
        };
        for i in fused_groups(&fit.params.mu) {
            mu[i] = None;
        }
        for i in fused_groups(&disc) {
            log_scale[i] = None;
        }
    }
    let lambda = (0..g).map(|i| log_scale[i].map(|s| s * fit.params.lambda(i))).collect();
    Ok(StandardErrors {
        free,
        mu,
        log_scale,
        lambda,
        thresholds: se[2 * g..].to_vec(),
        hessian_invertible: true,
    })
}

#[cfg(test)]
mod tests {
    use super::*;

    fn table(rows: Vec<Vec<f64>>) -> CategoryCountTable {
        let labels = (0..rows.len()).map(|g| format!("g{g}")).collect();
        CategoryCountTable::new(labels, rows, None).unwrap()
    }

    #[test]
    fn pooled_even_split_gives_zero_threshold() {
        let t = table(vec![vec![20.0, 30.0], vec![30.0, 20.0]]);
        let s = initial_params(&t, &IdentificationScheme::sum_to_zero()).unwrap();
        assert!(s.params.thresholds[0].abs() < 1e-12);
    }

    #[test]
    fn probit_line_recovers_normal_shares() {
        let (a, b) = (normal::cdf(-1.0), normal::cdf(1.0) - normal::cdf(-1.0));
        let t = table(vec![vec![a, b, a], vec![a, b, a]]);
        let s = initial_params(&t, &IdentificationScheme::sum_to_zero()).unwrap();
        assert!((s.params.thresholds[0] + 1.0).abs() < 1e-9);
        assert!((s.params.thresholds[1] - 1.0).abs() < 1e-9);
        for g in 0..2 {
            assert!(s.params.mu[g].abs() < 1e-9);
            assert!(s.params.log_scale[g].abs() < 1e-9);
        }
    }

    #[test]
    fn degenerate_group_starts_at_zero() {
        let t = table(vec![vec![0.0, 10.0, 0.0], vec![3.0, 4.0, 3.0], vec![2.0, 5.0, 3.0]]);
        let s = initial_params(&t, &IdentificationScheme::sum_to_zero()).unwrap();
        assert_eq!(s.degenerate_groups, vec![0]);
    }

    #[test]
    fn identical_groups_fit_to_baseline() {
        let t = table(vec![vec![10.0, 25.0, 15.0]; 2]);
        for penalty in [None, Some(PenaltySpec::alignment(1.0).unwrap()), Some(PenaltySpec::ridge(0.01).unwrap())] {
            let config = FitConfig { penalty, ..FitConfig::default() };
            let f = fit(&t, &config).unwrap();
            assert!(f.converged);
            for g in 0..2 {
                assert!(f.params.mu[g].abs() < 1e-8, "{:?}", f.params);
                assert!(f.params.log_scale[g].abs() < 1e-8);
            }
        }
    }

    #[test]
    fn saturated_binary_fit_matches_closed_form() {
        // two groups, one threshold, fixed scale: saturated model
        let t = table(vec![vec![30.0, 70.0], vec![55.0, 45.0]]);
        let scheme = IdentificationScheme {
            location: crate::model::Constraint::Reference(0),
            scale: crate::model::Constraint::FixedZero,
        };
        let config = FitConfig { identification: scheme, ..FitConfig::default() };
        let f = fit(&t, &config).unwrap();
        let tau = -normal::inv_cdf(0.7);
        let mu1 = normal::inv_cdf(0.45) + tau;
        assert!((f.params.thresholds[0] - tau).abs() < 1e-8);
        assert!((f.params.mu[1] - mu1).abs() < 1e-8);
    }

    #[test]
    fn objective_gradient_matches_finite_differences() {
        let t = table(vec![vec![12.0, 30.0, 25.0], vec![4.0, 18.0, 40.0], vec![22.0, 15.0, 9.0]]);
        let v = FreeParameterVector(vec![0.3, -0.4, 0.1, 0.2, -0.3, 0.1]);
        for kind in [PenaltyKind::Ridge, PenaltyKind::Lasso, PenaltyKind::Alignment] {
            for scale in [DiscriminationScale::Lambda, DiscriminationScale::LogLambda] {
                let config = FitConfig {
                    penalty: Some(PenaltySpec::new(kind, 0.7, 1e-4).unwrap()),
                    discrimination_scale: scale,
                    ..FitConfig::default()
                };
                let obj = PenalizedObjective::new(&t, &config);
                let g = obj.gradient(&v).unwrap();
                for i in 0..v.len() {
                    let h = 1e-5;
                    let mut a = v.clone();
                    let mut b = v.clone();
                    a.0[i] += h;
                    b.0[i] -= h;
                    let fd = (obj.evaluate(&a).unwrap().objective - obj.evaluate(&b).unwrap().objective) / (2.0 * h);
                    assert!((g[i] - fd).abs() / g[i].abs().max(1.0) < 1e-6, "{kind} {i}: {} vs {fd}", g[i]);
                }
            }
        }
    }

    #[test]
    fn path_rejects_bad_grids() {
        let t = table(vec![vec![10.0, 25.0], vec![12.0, 20.0]]);
        let c = FitConfig::penalized(PenaltySpec::ridge(1.0).unwrap());
        assert!(fit_path(&t, &c, &[]).is_err());
        assert!(fit_path(&t, &c, &[1.0, 0.5]).is_err());
        assert!(fit_path(&t, &FitConfig::default(), &[1.0]).is_err());
    }

    #[test]
    fn log_grid_endpoints() {
        let g = default_nu_grid();
        assert_eq!(g.len(), 25);
        assert_eq!(g[0], 1e-3);
        assert_eq!(g[24], 1e3);
        assert!((g[12] - 1.0).abs() < 1e-12);
    }

    #[test]
    fn standard_errors_require_convergence() {
        let t = table(vec![vec![10.0, 25.0, 5.0, 7.0], vec![12.0, 20.0, 9.0, 1.0], vec![3.0, 8.0, 19.0, 30.0]]);
        let config = FitConfig { max_iterations: 1, ..FitConfig::default() };
        let f = fit(&t, &config).unwrap();
        assert!(!f.converged);
        assert!(matches!(standard_errors(&t, &f, &config), Err(HetopError::Precondition(_))));
    }
}
