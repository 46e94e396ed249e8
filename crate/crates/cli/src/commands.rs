//! Subcommand implementations.

use std::fs::File;
use std::io::BufReader;
use std::path::Path;

use anyhow::Context;
use hetop::dif::{dif_for_params, summarize_path, DifThresholds, PathDifEntry};
use hetop::estimator::{fit, fit_path_with, log_grid, standard_errors, FitConfig, PathOptions};
use hetop::icc::{icc_curve, theta_grid};
use hetop::model::Constraint;
use hetop::{simulate, CategoryCountTable, GroupParams, IdentificationScheme, PenaltySpec};
use serde::Deserialize;

use crate::cases::{aggregate, read_cases, CaseReadOptions};
use crate::counts::{read_counts, write_counts};
use crate::manifest::{self, write_sidecar, RunManifest};
use crate::output::{emit, format_number, to_json};
use crate::plot::{render, Chart, Series};
use crate::report::{self, DifFitOutput, DifPathOutput, FitContext, FitOutput, PathOutput};
use crate::{
    AggregateArgs, BoundArgs, CliError, Command, DifArgs, FitArgs, IccArgs, ModelArgs, PathArgs, ReplayArgs, SimFormat,
    SimulateArgs,
};

type Outcome = Result<(), CliError>;

pub fn dispatch(command: Command, args: &[String]) -> Outcome {
    match command {
        Command::Aggregate(a) => run_aggregate(a, args),
        Command::Fit(a) => run_fit(a, args),
        Command::Path(a) => run_path(a, args),
        Command::Dif(a) => run_dif(a, args),
        Command::Icc(a) => run_icc(a, args),
        Command::Simulate(a) => run_simulate(a, args),
        Command::Replay(a) => run_replay(a),
    }
}

fn open(path: &Path) -> Result<BufReader<File>, CliError> {
    let f = File::open(path).with_context(|| format!("opening {}", path.display()))?;
    Ok(BufReader::new(f))
}

fn read_json<T: for<'de> Deserialize<'de>>(path: &Path) -> Result<T, CliError> {
    let value = serde_json::from_reader(open(path)?).with_context(|| format!("parsing {}", path.display()))?;
    Ok(value)
}

/// Writes a CSV or SVG output, with a sidecar manifest when it goes to a file.
fn emit_with_sidecar(path: Option<&Path>, bytes: &[u8], manifest: &RunManifest) -> Outcome {
    emit(path, bytes)?;
    if let Some(p) = path {
        write_sidecar(p, manifest)?;
    }
    Ok(())
}

fn run_aggregate(a: AggregateArgs, args: &[String]) -> Outcome {
    let opts = CaseReadOptions { missing_tokens: vec![a.missing_token.clone()], n_categories: a.categories };
    let cases = read_cases(open(&a.cases)?, &opts).with_context(|| format!("reading {}", a.cases.display()))?;
    let agg = aggregate(&cases, a.missing_as_category, a.categories)?;
    if agg.dropped > 0 {
        eprintln!("hetop: dropped {} case(s) with a missing response", agg.dropped);
    }
    let manifest = RunManifest::new("aggregate", args).input(&a.cases);
    emit_with_sidecar(a.out.as_deref(), &write_counts(&agg.table)?, &manifest)
}

fn parse_identification(spec: &str, labels: &[String]) -> Result<IdentificationScheme, CliError> {
    if spec == "sum-to-zero" {
        return Ok(IdentificationScheme::sum_to_zero());
    }
    let Some(label) = spec.strip_prefix("reference:") else {
        return Err(CliError::Usage(format!("--identification must be sum-to-zero or reference:<label>, got {spec:?}")));
    };
    let g = labels
        .iter()
        .position(|l| l == label)
        .ok_or_else(|| CliError::Usage(format!("reference group {label:?} is not in the data")))?;
    Ok(IdentificationScheme { location: Constraint::Reference(g), scale: Constraint::Reference(g) })
}

pub fn parse_nu_grid(spec: &str) -> Result<Vec<f64>, CliError> {
    let usage = || CliError::Usage(format!("--nu-grid must be log:<lo>:<hi>:<n> or a list, got {spec:?}"));
    if let Some(rest) = spec.strip_prefix("log:") {
        let parts: Vec<&str> = rest.split(':').collect();
        let [lo, hi, n] = parts[..] else { return Err(usage()) };
        let (lo, hi): (f64, f64) = (lo.parse().map_err(|_| usage())?, hi.parse().map_err(|_| usage())?);
        let n: usize = n.parse().map_err(|_| usage())?;
        return log_grid(lo, hi, n).map_err(|e| CliError::Usage(e.to_string()));
    }
    spec.split(',').map(|s| s.trim().parse::<f64>().map_err(|_| usage())).collect()
}

struct Prepared {
    table: CategoryCountTable,
    config: FitConfig,
    empty_cells: hetop::model::EmptyCellOutcome,
}

fn prepare(m: &ModelArgs, penalty: Option<PenaltySpec>) -> Result<Prepared, CliError> {
    let raw = read_counts(open(&m.counts)?).with_context(|| format!("reading {}", m.counts.display()))?;
    let (table, empty_cells) = raw.apply_empty_cell_policy(m.empty_cells.into())?;
    if empty_cells.cells_adjusted > 0 {
        eprintln!("hetop: adjusted {} empty cell(s)", empty_cells.cells_adjusted);
    }
    let config = FitConfig {
        identification: parse_identification(&m.identification, table.group_labels())?,
        penalty,
        discrimination_scale: m.discrimination_scale.into(),
        max_iterations: m.max_iterations,
        gradient_tolerance: m.gradient_tolerance,
        ..FitConfig::default()
    };
    config.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(Prepared { table, config, empty_cells })
}

fn penalty_spec(kind: crate::PenaltyArg, nu: f64, epsilon: f64) -> Result<PenaltySpec, CliError> {
    PenaltySpec::new(kind.into(), nu, epsilon).map_err(|e| CliError::Usage(e.to_string()))
}

fn context<'a>(p: &'a Prepared, m: &ModelArgs, alpha: f64) -> FitContext<'a> {
    FitContext {
        labels: p.table.group_labels(),
        penalty: p.config.penalty,
        discrimination_scale: p.config.discrimination_scale,
        identification: m.identification.clone(),
        empty_cells: p.empty_cells.clone(),
        alpha,
    }
}

fn warn_proportion(nu: Option<f64>, proportion: Option<f64>) {
    if hetop::penalty::exceeds_proportion_warning(proportion) {
        let nu = nu.map(format_number).unwrap_or_default();
        eprintln!("hetop: penalty exceeds 10% of the objective at nu = {nu}");
    }
}

fn run_fit(a: FitArgs, args: &[String]) -> Outcome {
    if !(a.alpha > 0.0 && a.alpha < 1.0) {
        return Err(CliError::Usage("--alpha must lie in (0, 1)".into()));
    }
    let penalty = a.penalty.map(|k| penalty_spec(k, a.nu, a.model.epsilon)).transpose()?;
    let prepared = prepare(&a.model, penalty)?;
    let mut result = fit(&prepared.table, &prepared.config)?;
    warn_proportion(penalty.map(|p| p.nu), result.penalty_proportion);
    if a.se && result.converged {
        result.standard_errors = Some(standard_errors(&prepared.table, &result, &prepared.config)?);
    }
    let mut manifest = RunManifest::new("fit", args).input(&a.model.counts);
    manifest.penalty = penalty;
    manifest.identification = Some(a.model.identification.clone());
    let out = FitOutput::new(&result, context(&prepared, &a.model, a.alpha), manifest);
    emit(a.out.as_deref(), &to_json(&out)?)?;
    if !result.converged {
        return Err(CliError::NotConverged(format!("stopped after {} iterations", result.iterations)));
    }
    Ok(())
}

fn path_chart(out: &PathOutput, title: &str, y_label: &str, pick: impl Fn(&report::PathEntryOutput, usize) -> Option<f64>) -> Chart {
    let series = out
        .group_labels
        .iter()
        .enumerate()
        .map(|(g, label)| Series { label: label.clone(), points: out.entries.iter().map(|e| (e.nu, pick(e, g))).collect() })
        .collect();
    Chart { title: title.into(), x_label: "nu (log scale)".into(), y_label: y_label.into(), x_log: true, series, rules: Vec::new() }
}

fn run_path(a: PathArgs, args: &[String]) -> Outcome {
    let grid = parse_nu_grid(&a.nu_grid)?;
    let template = penalty_spec(a.penalty, 1.0, a.model.epsilon)?;
    let prepared = prepare(&a.model, Some(template))?;
    let options = PathOptions { warm_start: !a.no_warm_start };
    let path = fit_path_with(&prepared.table, &prepared.config, &grid, options).map_err(|e| CliError::Usage(e.to_string()))?;
    for (nu, f) in path.successful() {
        warn_proportion(Some(nu), f.penalty_proportion);
    }
    let mut manifest = RunManifest::new("path", args).input(&a.model.counts);
    manifest.penalty = Some(template);
    manifest.nu_grid = Some(grid.clone());
    manifest.identification = Some(a.model.identification.clone());
    let out = PathOutput::new(&path, context(&prepared, &a.model, 0.05), manifest.clone());
    emit_with_sidecar(a.out.as_deref(), &report::path_csv(&out)?, &manifest)?;
    if let Some(p) = &a.json {
        emit(Some(p), &to_json(&out)?)?;
    }
    if let Some(p) = &a.plot {
        let mut chart = path_chart(&out, "Latent means by penalty", "mu", |e, g| e.mu.as_ref().map(|m| m[g]));
        chart.rules = vec![a.bounds.mean_bound, -a.bounds.mean_bound];
        emit_with_sidecar(Some(p), render(&chart).as_bytes(), &manifest)?;
    }
    if let Some(p) = &a.lambda_plot {
        let mut chart = path_chart(&out, "Discriminations by penalty", "lambda", |e, g| e.lambda.as_ref().map(|l| l[g]));
        chart.rules = vec![a.bounds.disc_lower, a.bounds.disc_upper];
        emit_with_sidecar(Some(p), render(&chart).as_bytes(), &manifest)?;
    }
    if let Some(p) = &a.elbow_plot {
        let series = vec![Series {
            label: "proportion".into(),
            points: out.entries.iter().map(|e| (e.nu, e.penalty_proportion)).collect(),
        }];
        let chart = Chart {
            title: "Penalty proportion by penalty".into(),
            x_label: "nu (log scale)".into(),
            y_label: "penalty proportion".into(),
            x_log: true,
            series,
            rules: vec![hetop::penalty::PENALTY_PROPORTION_WARN],
        };
        emit_with_sidecar(Some(p), render(&chart).as_bytes(), &manifest)?;
    }
    let failed = out.entries.iter().filter(|e| !e.converged).count();
    if failed > 0 {
        return Err(CliError::NotConverged(format!("{failed} of {} grid points did not converge", out.entries.len())));
    }
    Ok(())
}

fn thresholds(b: &BoundArgs, alpha: f64, combine: crate::CombineArg) -> Result<DifThresholds, CliError> {
    let t = DifThresholds {
        mean_bound: b.mean_bound,
        disc_lower: b.disc_lower,
        disc_upper: b.disc_upper,
        alpha,
        combine: combine.into(),
    };
    t.validate().map_err(|e| CliError::Usage(e.to_string()))?;
    Ok(t)
}

fn run_dif(a: DifArgs, args: &[String]) -> Outcome {
    let t = thresholds(&a.bounds, a.alpha, a.combine)?;
    let (bytes, csv, manifest) = if let Some(fit_path) = &a.fit {
        let fit: FitOutput = read_json(fit_path)?;
        let se = fit.standard_errors.as_ref().map(|s| s.to_core());
        let r = dif_for_params(&fit.params()?, se.as_ref(), &fit.group_labels, &t)?;
        let mut manifest = RunManifest::new("dif", args).input(fit_path);
        manifest.thresholds = Some(t);
        let doc = DifFitOutput { source: "fit", report: &r, manifest: manifest.clone() };
        (to_json(&doc)?, report::dif_csv(&r)?, manifest)
    } else {
        let path_file = a.path.as_ref().expect("clap requires --fit or --path");
        let path: PathOutput = read_json(path_file)?;
        let entries = path
            .entries
            .iter()
            .map(|e| {
                let report = match e.params() {
                    Some(p) => Some(dif_for_params(&p?, None, &path.group_labels, &t)?),
                    None => None,
                };
                Ok(PathDifEntry { nu: e.nu, report })
            })
            .collect::<Result<Vec<_>, hetop::HetopError>>()?;
        let r = summarize_path(entries, &path.group_labels, &t)?;
        let mut manifest = RunManifest::new("dif", args).input(path_file);
        manifest.thresholds = Some(t);
        let doc = DifPathOutput { source: "path", report: &r, manifest: manifest.clone() };
        (to_json(&doc)?, report::dif_path_csv(&r)?, manifest)
    };
    emit(a.out.as_deref(), &bytes)?;
    if let Some(p) = &a.csv {
        emit_with_sidecar(Some(p), &csv, &manifest)?;
    }
    Ok(())
}

fn parse_theta(spec: &str) -> Result<Vec<f64>, CliError> {
    let usage = || CliError::Usage(format!("--theta must be <lo>:<hi>:<n>, got {spec:?}"));
    let parts: Vec<&str> = spec.split(':').collect();
    let [lo, hi, n] = parts[..] else { return Err(usage()) };
    let lo: f64 = lo.parse().map_err(|_| usage())?;
    let hi: f64 = hi.parse().map_err(|_| usage())?;
    let n: usize = n.parse().map_err(|_| usage())?;
    theta_grid(lo, hi, n).map_err(|e| CliError::Usage(e.to_string()))
}

fn run_icc(a: IccArgs, args: &[String]) -> Outcome {
    let theta = parse_theta(&a.theta)?;
    let fit: FitOutput = read_json(&a.fit)?;
    let params = fit.params()?;
    let groups: Vec<usize> = if a.groups.is_empty() {
        (0..params.n_groups()).collect()
    } else {
        a.groups
            .iter()
            .map(|label| {
                fit.group_labels
                    .iter()
                    .position(|l| l == label)
                    .ok_or_else(|| CliError::Usage(format!("group {label:?} is not in the fit")))
            })
            .collect::<Result<_, _>>()?
    };
    let curves = groups.iter().map(|&g| icc_curve(&params, g, &theta)).collect::<Result<Vec<_>, _>>()?;
    let manifest = RunManifest::new("icc", args).input(&a.fit);
    emit_with_sidecar(a.out.as_deref(), &report::icc_csv(&fit.group_labels, &curves)?, &manifest)?;
    if let Some(p) = &a.plot {
        let series = curves
            .iter()
            .map(|c| Series {
                label: fit.group_labels[c.group].clone(),
                points: c.theta.iter().zip(&c.expected).map(|(t, e)| (*t, Some(*e))).collect(),
            })
            .collect();
        let chart = Chart {
            title: "Item characteristic curves".into(),
            x_label: "theta".into(),
            y_label: "expected score".into(),
            x_log: false,
            series,
            rules: Vec::new(),
        };
        emit_with_sidecar(Some(p), render(&chart).as_bytes(), &manifest)?;
    }
    Ok(())
}

#[derive(Debug, Deserialize)]
#[serde(deny_unknown_fields)]
struct SimulationParams {
    #[serde(default)]
    group_labels: Option<Vec<String>>,
    mu: Vec<f64>,
    sigma: Vec<f64>,
    thresholds: Vec<f64>,
    group_sizes: Vec<usize>,
}

fn run_simulate(a: SimulateArgs, args: &[String]) -> Outcome {
    let sp: SimulationParams = read_json(&a.params)?;
    if let Some(bad) = sp.sigma.iter().find(|s| !(**s > 0.0) || !s.is_finite()) {
        return Err(hetop::HetopError::Domain(format!("sigma must be positive, got {bad}")).into());
    }
    let params = GroupParams::new(sp.mu.clone(), sp.sigma.iter().map(|s| s.ln()).collect(), sp.thresholds.clone())?;
    let labels = sp
        .group_labels
        .clone()
        .unwrap_or_else(|| (1..=params.n_groups()).map(|g| format!("G{g}")).collect());
    if labels.len() != params.n_groups() {
        return Err(hetop::HetopError::Dimension { expected: params.n_groups(), actual: labels.len() }.into());
    }
    let bytes = match a.format {
        SimFormat::Counts => write_counts(&simulate::generate_labeled(&params, &sp.group_sizes, a.seed, labels)?)?,
        SimFormat::Cases => {
            let responses = simulate::generate_responses(&params, &sp.group_sizes, a.seed)?;
            let mut w = csv::Writer::from_writer(Vec::new());
            w.write_record(["group", "response"])?;
            for (label, rs) in labels.iter().zip(&responses) {
                for r in rs {
                    w.write_record([label.as_str(), &r.to_string()])?;
                }
            }
            w.into_inner().map_err(|e| anyhow::anyhow!(e.to_string()))?
        }
    };
    let mut manifest = RunManifest::new("simulate", args).input(&a.params);
    manifest.seed = Some(a.seed);
    emit_with_sidecar(a.out.as_deref(), &bytes, &manifest)
}

fn run_replay(a: ReplayArgs) -> Outcome {
    let m = manifest::load(&a.manifest)?;
    if m.command == "replay" || m.args.first().map(String::as_str) == Some("replay") {
        return Err(CliError::Usage("a manifest cannot replay another replay".into()));
    }
    let argv = std::iter::once("hetop".to_string()).chain(m.args.iter().cloned());
    match crate::run_cli(argv) {
        0 => Ok(()),
        3 => Err(CliError::NotConverged("replayed run did not converge".into())),
        1 => Err(CliError::Usage("replayed arguments were rejected".into())),
        _ => Err(CliError::Data(anyhow::anyhow!("replayed run failed"))),
    }
}
