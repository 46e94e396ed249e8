//! JSON and CSV layouts of fit, path, DIF and ICC results.

use hetop::dif::{DifReport, PathDifReport};
use hetop::estimator::{DiscriminationScale, FitResult, PathResult, StandardErrors};
use hetop::model::EmptyCellOutcome;
use hetop::optim::Termination;
use hetop::{GroupParams, HetopError, PenaltyKind, PenaltySpec};
use serde::{Deserialize, Serialize};

use crate::manifest::RunManifest;
use crate::output::format_number;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StandardErrorOutput {
    pub alpha: f64,
    pub mu: Vec<Option<f64>>,
    pub lambda: Vec<Option<f64>>,
    /// Standard error of `ln lambda`.
    pub log_lambda: Vec<Option<f64>>,
    pub thresholds: Vec<Option<f64>>,
    pub mu_ci: Vec<Option<[f64; 2]>>,
    pub lambda_ci: Vec<Option<[f64; 2]>>,
    pub hessian_invertible: bool,
}

impl StandardErrorOutput {
    pub fn new(se: &StandardErrors, params: &GroupParams, alpha: f64) -> Self {
        let g = params.n_groups();
        Self {
            alpha,
            mu: se.mu.clone(),
            lambda: se.lambda.clone(),
            log_lambda: se.log_scale.clone(),
            thresholds: se.thresholds.clone(),
            mu_ci: (0..g).map(|i| se.mu_interval(params, i, alpha)).collect(),
            lambda_ci: (0..g).map(|i| se.lambda_interval(params, i, alpha)).collect(),
            hessian_invertible: se.hessian_invertible,
        }
    }

    pub fn to_core(&self) -> StandardErrors {
        StandardErrors {
            free: Vec::new(),
            mu: self.mu.clone(),
            log_scale: self.log_lambda.clone(),
            lambda: self.lambda.clone(),
            thresholds: self.thresholds.clone(),
            hessian_invertible: self.hessian_invertible,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FitOutput {
    pub group_labels: Vec<String>,
    pub mu: Vec<f64>,
    pub lambda: Vec<f64>,
    pub sigma: Vec<f64>,
    /// `ln sigma`, stored so the parameters reload exactly.
    pub log_scale: Vec<f64>,
    pub thresholds: Vec<f64>,
    pub loglik: f64,
    pub constant_c: f64,
    pub penalty_mu: f64,
    pub penalty_lambda: f64,
    pub penalized_objective: f64,
    pub penalty_proportion: Option<f64>,
    pub penalty_warning: bool,
    pub nu: Option<f64>,
    pub penalty_kind: Option<PenaltyKind>,
    pub epsilon: Option<f64>,
    pub discrimination_scale: DiscriminationScale,
    pub identification: String,
    pub converged: bool,
    pub termination: Termination,
    pub iterations: usize,
    pub gradient_norm: f64,
    pub empty_cells: EmptyCellOutcome,
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub standard_errors: Option<StandardErrorOutput>,
    pub manifest: RunManifest,
}

pub struct FitContext<'a> {
    pub labels: &'a [String],
    pub penalty: Option<PenaltySpec>,
    pub discrimination_scale: DiscriminationScale,
    pub identification: String,
    pub empty_cells: EmptyCellOutcome,
    pub alpha: f64,
}

impl FitOutput {
    pub fn new(fit: &FitResult, ctx: FitContext<'_>, manifest: RunManifest) -> Self {
        let p = &fit.params;
        Self {
            group_labels: ctx.labels.to_vec(),
            mu: p.mu.clone(),
            lambda: p.lambdas(),
            sigma: p.sigmas(),
            log_scale: p.log_scale.clone(),
            thresholds: p.thresholds.clone(),
            loglik: fit.loglik,
            constant_c: fit.constant_c,
            penalty_mu: fit.penalty_mu,
            penalty_lambda: fit.penalty_lambda,
            penalized_objective: fit.penalized_objective,
            penalty_proportion: fit.penalty_proportion,
            penalty_warning: fit.penalty_warning,
            nu: ctx.penalty.map(|s| s.nu),
            penalty_kind: ctx.penalty.map(|s| s.kind),
            epsilon: ctx.penalty.map(|s| s.epsilon),
            discrimination_scale: ctx.discrimination_scale,
            identification: ctx.identification,
            converged: fit.converged,
            termination: fit.termination,
            iterations: fit.iterations,
            gradient_norm: fit.gradient_norm,
            empty_cells: ctx.empty_cells,
            standard_errors: fit.standard_errors.as_ref().map(|se| StandardErrorOutput::new(se, p, ctx.alpha)),
            manifest,
        }
    }

    pub fn params(&self) -> Result<GroupParams, HetopError> {
        GroupParams::new(self.mu.clone(), self.log_scale.clone(), self.thresholds.clone())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathEntryOutput {
    pub nu: f64,
    /// Present when the fit at this `nu` failed outright.
    #[serde(skip_serializing_if = "Option::is_none", default)]
    pub error: Option<String>,
    pub converged: bool,
    pub penalty_proportion: Option<f64>,
    pub loglik: Option<f64>,
    pub penalty_mu: Option<f64>,
    pub penalty_lambda: Option<f64>,
    pub iterations: Option<usize>,
    pub mu: Option<Vec<f64>>,
    pub lambda: Option<Vec<f64>>,
    pub log_scale: Option<Vec<f64>>,
    pub thresholds: Option<Vec<f64>>,
}

impl PathEntryOutput {
    pub fn params(&self) -> Option<Result<GroupParams, HetopError>> {
        match (&self.mu, &self.log_scale, &self.thresholds) {
            (Some(m), Some(s), Some(t)) => Some(GroupParams::new(m.clone(), s.clone(), t.clone())),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PathOutput {
    pub group_labels: Vec<String>,
    pub penalty_kind: PenaltyKind,
    pub epsilon: f64,
    pub discrimination_scale: DiscriminationScale,
    pub identification: String,
    pub nu_grid: Vec<f64>,
    pub entries: Vec<PathEntryOutput>,
    pub manifest: RunManifest,
}

impl PathOutput {
    pub fn new(path: &PathResult, ctx: FitContext<'_>, manifest: RunManifest) -> Self {
        let spec = ctx.penalty.expect("a path has a penalty");
        let entries = path
            .nu_grid
            .iter()
            .zip(&path.fits)
            .map(|(&nu, f)| match f {
                Ok(f) => PathEntryOutput {
                    nu,
                    error: None,
                    converged: f.converged,
                    penalty_proportion: f.penalty_proportion,
                    loglik: Some(f.loglik),
                    penalty_mu: Some(f.penalty_mu),
                    penalty_lambda: Some(f.penalty_lambda),
                    iterations: Some(f.iterations),
                    mu: Some(f.params.mu.clone()),
                    lambda: Some(f.params.lambdas()),
                    log_scale: Some(f.params.log_scale.clone()),
                    thresholds: Some(f.params.thresholds.clone()),
                },
                Err(e) => PathEntryOutput {
                    nu,
                    error: Some(e.to_string()),
                    converged: false,
                    penalty_proportion: None,
                    loglik: None,
                    penalty_mu: None,
                    penalty_lambda: None,
                    iterations: None,
                    mu: None,
                    lambda: None,
                    log_scale: None,
                    thresholds: None,
                },
            })
            .collect();
        Self {
            group_labels: ctx.labels.to_vec(),
            penalty_kind: spec.kind,
            epsilon: spec.epsilon,
            discrimination_scale: ctx.discrimination_scale,
            identification: ctx.identification,
            nu_grid: path.nu_grid.clone(),
            entries,
            manifest,
        }
    }
}

fn opt_number(x: Option<f64>) -> String {
    x.map(format_number).unwrap_or_default()
}

fn csv_bytes(header: &[&str], rows: Vec<Vec<String>>) -> Result<Vec<u8>, HetopError> {
    let err = |e: csv::Error| HetopError::Io(e.to_string());
    let mut w = csv::Writer::from_writer(Vec::new());
    w.write_record(header).map_err(err)?;
    for r in rows {
        w.write_record(&r).map_err(err)?;
    }
    w.into_inner().map_err(|e| HetopError::Io(e.to_string()))
}

/// One row per (`nu`, group).
pub fn path_csv(path: &PathOutput) -> Result<Vec<u8>, HetopError> {
    let mut rows = Vec::new();
    for e in &path.entries {
        for (g, label) in path.group_labels.iter().enumerate() {
            rows.push(vec![
                format_number(e.nu),
                label.clone(),
                opt_number(e.mu.as_ref().map(|m| m[g])),
                opt_number(e.lambda.as_ref().map(|l| l[g])),
                opt_number(e.penalty_proportion),
                e.converged.to_string(),
            ]);
        }
    }
    csv_bytes(&["nu", "group", "mu", "lambda", "penalty_proportion", "converged"], rows)
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifFitOutput<'a> {
    pub source: &'static str,
    #[serde(flatten)]
    pub report: &'a DifReport,
    pub manifest: RunManifest,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct DifPathOutput<'a> {
    pub source: &'static str,
    #[serde(flatten)]
    pub report: &'a PathDifReport,
    pub manifest: RunManifest,
}

const DIF_COLUMNS: [&str; 12] = [
    "group",
    "mean_estimate",
    "mean_ci_lower",
    "mean_ci_upper",
    "mean_flag_bound",
    "mean_flag_ci",
    "disc_estimate",
    "disc_ci_lower",
    "disc_ci_upper",
    "disc_flag_bound",
    "disc_flag_ci",
    "classification",
];

fn dif_rows(report: &DifReport) -> Vec<Vec<String>> {
    let flag = |f: Option<bool>| f.map(|b| b.to_string()).unwrap_or_default();
    report
        .groups
        .iter()
        .map(|g| {
            let class = serde_json::to_value(g.flags.classification)
                .ok()
                .and_then(|v| v.as_str().map(str::to_string))
                .unwrap_or_default();
            vec![
                g.group.clone(),
                format_number(g.mean_estimate),
                opt_number(g.mean_ci.map(|c| c[0])),
                opt_number(g.mean_ci.map(|c| c[1])),
                g.flags.mean_flag_bound.to_string(),
                flag(g.flags.mean_flag_ci),
                format_number(g.disc_estimate),
                opt_number(g.disc_ci.map(|c| c[0])),
                opt_number(g.disc_ci.map(|c| c[1])),
                g.flags.disc_flag_bound.to_string(),
                flag(g.flags.disc_flag_ci),
                class,
            ]
        })
        .collect()
}

pub fn dif_csv(report: &DifReport) -> Result<Vec<u8>, HetopError> {
    csv_bytes(&DIF_COLUMNS, dif_rows(report))
}

/// Per-(`nu`, group) flags; failed fits contribute no rows.
pub fn dif_path_csv(report: &PathDifReport) -> Result<Vec<u8>, HetopError> {
    let mut header = vec!["nu"];
    header.extend(DIF_COLUMNS);
    let mut rows = Vec::new();
    for e in &report.entries {
        if let Some(r) = &e.report {
            for mut row in dif_rows(r) {
                row.insert(0, format_number(e.nu));
                rows.push(row);
            }
        }
    }
    csv_bytes(&header, rows)
}

pub fn icc_csv(labels: &[String], curves: &[hetop::icc::IccCurve]) -> Result<Vec<u8>, HetopError> {
    let mut rows = Vec::new();
    for c in curves {
        for (t, e) in c.theta.iter().zip(&c.expected) {
            rows.push(vec![format_number(*t), labels[c.group].clone(), format_number(*e)]);
        }
    }
    csv_bytes(&["theta", "group", "expected"], rows)
}
