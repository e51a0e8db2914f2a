use std::path::{Path, PathBuf};

use anyhow::{anyhow, bail, Context};
use clap::Args;
use log::warn;
use maml_lqr::bounds::{BoundsReport, StepCondition};
use maml_lqr::engine::{run_maml, BetaRule, EtaSchedule, MamlResult};
use maml_lqr::lqr::{closed_loop_radius, evaluate, riccati_optimal};
use maml_lqr::maml::is_maml_stabilizing;
use maml_lqr::matrix::op_norm;
use maml_lqr::oracle::{grid_search, GridOracleResult, GridSpec};
use maml_lqr::tasks::{self, from_rows, to_rows, write_atomic, FamilySpec};
use maml_lqr::{Error, InitStateModel, Mat, TaskSet};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use serde_json::{json, Value};

use crate::config::{apply_override, load_tasks, ExperimentConfig};
use crate::report::{convergence_svg, trace_csv, RunSummary};
use crate::{TaskSource, UsageError};

fn usage(msg: impl Into<String>) -> anyhow::Error {
    anyhow!(UsageError(msg.into()))
}

fn timestamp() -> String {
    chrono::Utc::now().to_rfc3339_opts(chrono::SecondsFormat::Secs, true)
}

fn write_json(path: &Path, value: &impl Serialize) -> anyhow::Result<()> {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_atomic(path, &text).with_context(|| format!("writing {}", path.display()))
}

/// Input-validation failures from the core library are usage errors.
fn classify(err: Error) -> anyhow::Error {
    match err {
        Error::InvalidInput(_) | Error::Dimension(_) | Error::Parse { .. } => usage(err.to_string()),
        other => other.into(),
    }
}

impl TaskSource {
    fn load(&self) -> anyhow::Result<TaskSet> {
        match (&self.tasks, self.paper_family) {
            (Some(path), _) => load_tasks(path),
            (None, true) => Ok(tasks::generate(&FamilySpec::paper(self.seed))?.tasks),
            (None, false) => Err(usage("give --tasks FILE or --paper-family")),
        }
    }
}

pub fn gen_tasks(
    paper_family: bool,
    config: Option<PathBuf>,
    set: &[String],
    seed: Option<u64>,
    count: Option<usize>,
    out: &Path,
) -> anyhow::Result<bool> {
    let mut doc = match (&config, paper_family) {
        (Some(path), _) => ExperimentConfig::load(path)?,
        (None, true) => serde_json::to_value(FamilySpec::paper(7))?,
        (None, false) => return Err(usage("give --paper-family or --config PATH")),
    };
    if config.is_some() && doc.get("seed").is_none() {
        doc["seed"] = json!(0);
    }
    for s in set {
        apply_override(&mut doc, s)?;
    }
    let mut spec: FamilySpec =
        serde_json::from_value(doc).map_err(|e| usage(format!("invalid family spec: {e}")))?;
    if let Some(seed) = seed {
        spec.seed = seed;
    }
    if let Some(count) = count {
        spec.count = count;
    }
    spec.validate().map_err(classify)?;
    let family = tasks::generate(&spec).map_err(classify)?;
    tasks::save_family(&family, out)?;
    println!(
        "wrote {} ({} tasks, seed {}, every Q and R positive definite)",
        out.display(),
        family.tasks.len(),
        spec.seed
    );
    Ok(true)
}

#[derive(Args, Debug)]
pub struct RunArgs {
    /// Experiment configuration JSON; defaults to the built-in four-start setup.
    #[arg(long, value_name = "PATH")]
    pub config: Option<PathBuf>,
    /// Override a config field by dotted path, e.g. `step.beta.beta=2e-6`.
    #[arg(long = "set", value_name = "KEY=VALUE")]
    pub set: Vec<String>,
    /// Task file; replaces the configured family.
    #[arg(long, value_name = "FILE", conflicts_with = "paper_family")]
    pub tasks: Option<PathBuf>,
    /// Use the built-in two-state family regardless of the config.
    #[arg(long)]
    pub paper_family: bool,
    #[arg(long)]
    pub seed: Option<u64>,
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Constant inner step size for every run, or `auto`.
    #[arg(long)]
    pub eta: Option<String>,
    /// Constant outer step size for every run, or `auto`.
    #[arg(long)]
    pub beta: Option<String>,
    #[arg(long)]
    pub epsilon: Option<f64>,
    #[arg(long)]
    pub max_iters: Option<usize>,
    /// Oracle JSON from the `oracle` command, for the optimum distance.
    #[arg(long, value_name = "FILE")]
    pub oracle: Option<PathBuf>,
}

fn parse_rule(raw: &str, what: &str) -> anyhow::Result<Option<f64>> {
    if raw == "auto" {
        return Ok(None);
    }
    raw.parse::<f64>()
        .map(Some)
        .map_err(|_| usage(format!("--{what} expects a number or `auto`, got `{raw}`")))
}

fn resolve_config(args: &RunArgs) -> anyhow::Result<ExperimentConfig> {
    let mut doc = match &args.config {
        Some(path) => ExperimentConfig::load(path)?,
        None => serde_json::to_value(ExperimentConfig::paper_default())?,
    };
    for s in &args.set {
        apply_override(&mut doc, s)?;
    }
    let mut cfg = ExperimentConfig::from_value(doc)?;
    if let Some(seed) = args.seed {
        cfg.seed = seed;
    }
    if args.paper_family {
        cfg.task_file = None;
        cfg.family = None;
    }
    if let Some(path) = &args.tasks {
        cfg.task_file = Some(path.clone());
    }
    if let Some(out) = &args.out {
        cfg.out = out.clone();
    }
    if let Some(raw) = &args.eta {
        cfg.step.eta = match parse_rule(raw, "eta")? {
            Some(eta) => EtaSchedule::Constant { eta },
            None => EtaSchedule::Auto { safety: 0.9 },
        };
        cfg.initial_policies.iter_mut().for_each(|p| p.eta = None);
    }
    if let Some(raw) = &args.beta {
        cfg.step.beta = match parse_rule(raw, "beta")? {
            Some(beta) => BetaRule::Constant { beta },
            None => BetaRule::Auto,
        };
        cfg.initial_policies.iter_mut().for_each(|p| p.beta = None);
    }
    if let Some(eps) = args.epsilon {
        cfg.epsilon = eps;
    }
    if let Some(n) = args.max_iters {
        cfg.max_iters = n;
    }
    cfg.validate()?;
    Ok(cfg)
}

#[derive(Debug, Clone, Serialize, Deserialize)]
struct OracleFile {
    generated_at: String,
    grid: GridSpec,
    results: Vec<GridOracleResult>,
}

fn file_stem(label: &str) -> String {
    label
        .chars()
        .map(|c| if c.is_ascii_alphanumeric() || c == '-' || c == '_' { c } else { '_' })
        .collect()
}

fn oracle_match(oracle: &OracleFile, eta: f64) -> Option<&GridOracleResult> {
    oracle
        .results
        .iter()
        .find(|r| (r.eta - eta).abs() <= 1e-12 * eta.abs().max(f64::MIN_POSITIVE))
}

fn summarize(
    label: &str,
    w0: &Mat,
    result: &MamlResult,
    oracle: Option<&OracleFile>,
) -> RunSummary {
    let last = result.trace.last().expect("trace always holds iterate 0");
    let hit = oracle.and_then(|o| oracle_match(o, last.eta));
    if oracle.is_some() && hit.is_none() {
        warn!("{label}: oracle file has no entry for eta = {}", last.eta);
    }
    RunSummary {
        label: label.to_string(),
        w0: to_rows(w0),
        w_final: to_rows(&result.w_final),
        f_final: last.f,
        final_grad_norm: result.final_grad_norm,
        eta_final: last.eta,
        reached_epsilon: result.reached_epsilon,
        iterations_used: result.iterations_used,
        total_halvings: result.trace.iter().map(|r| r.halvings).sum(),
        oracle_distance: hit.map(|h| (&result.w_final - &h.w_star).norm()),
        oracle_eta: hit.map(|h| h.eta),
        generated_at: timestamp(),
    }
}

pub fn run(args: &RunArgs) -> anyhow::Result<bool> {
    let cfg = resolve_config(args)?;
    let tasks = cfg.tasks().map_err(|e| match e.downcast::<Error>() {
        Ok(core) => classify(core),
        Err(other) => other,
    })?;
    let init = cfg.init_model(tasks.state_dim())?;
    let oracle: Option<OracleFile> = match &args.oracle {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading oracle file {}", path.display()))?;
            Some(serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?)
        }
        None => None,
    };
    for p in &cfg.initial_policies {
        if p.w0.shape() != (tasks.input_dim(), tasks.state_dim()) {
            return Err(usage(format!(
                "{}: initial policy is {}x{}, tasks need {}x{}",
                p.label,
                p.w0.nrows(),
                p.w0.ncols(),
                tasks.input_dim(),
                tasks.state_dim()
            )));
        }
    }
    std::fs::create_dir_all(&cfg.out)
        .with_context(|| format!("creating {}", cfg.out.display()))?;

    let outcomes: Vec<(String, Result<MamlResult, Error>)> = cfg
        .initial_policies
        .par_iter()
        .map(|p| {
            let step = cfg.step_for(p);
            let res = run_maml(&tasks, &p.w0, &step, cfg.epsilon, cfg.max_iters, &init);
            (p.label.clone(), res)
        })
        .collect();

    let mut entries = Vec::new();
    let mut failures = 0;
    for (p, (label, outcome)) in cfg.initial_policies.iter().zip(outcomes) {
        let stem = file_stem(&label);
        match outcome {
            Ok(result) => {
                let summary = summarize(&label, &p.w0, &result, oracle.as_ref());
                write_atomic(&cfg.out.join(format!("{stem}.trace.csv")), &trace_csv(&result))?;
                write_atomic(&cfg.out.join(format!("{stem}.svg")), &convergence_svg(&result))?;
                write_json(&cfg.out.join(format!("{stem}.summary.json")), &summary)?;
                println!(
                    "{label}: {} iterations, W = {:?}, |grad F| = {:.4e}{}",
                    result.iterations_used,
                    result.w_final.as_slice(),
                    result.final_grad_norm,
                    summary
                        .oracle_distance
                        .map(|d| format!(", oracle distance {d:.4}"))
                        .unwrap_or_default()
                );
                entries.push(serde_json::to_value(&summary)?);
            }
            Err(err) => {
                failures += 1;
                eprintln!("{label}: {err}");
                entries.push(json!({ "label": label, "error": err.to_string() }));
            }
        }
    }
    write_json(
        &cfg.out.join("summary.json"),
        &json!({
            "generated_at": timestamp(),
            "config": cfg,
            "runs": entries,
        }),
    )?;
    Ok(failures == 0)
}

pub fn parse_box(raw: &str) -> anyhow::Result<Vec<(f64, f64)>> {
    raw.split(',')
        .map(|pair| {
            let (lo, hi) = pair
                .split_once(':')
                .ok_or_else(|| usage(format!("--box entry `{pair}` is not lo:hi")))?;
            let lo: f64 = lo.trim().parse().map_err(|_| usage(format!("bad bound `{lo}`")))?;
            let hi: f64 = hi.trim().parse().map_err(|_| usage(format!("bad bound `{hi}`")))?;
            Ok((lo, hi))
        })
        .collect()
}

pub fn oracle(
    source: &TaskSource,
    etas: &[f64],
    resolution: f64,
    bounds: Option<&str>,
    out: &Path,
) -> anyhow::Result<bool> {
    let tasks = source.load()?;
    let bounds = match bounds {
        Some(raw) => parse_box(raw)?,
        None if tasks.input_dim() * tasks.state_dim() == 2 => GridSpec::paper_default().bounds,
        None => return Err(usage("--box is required unless policies have two entries")),
    };
    let grid = GridSpec::new(bounds, resolution).map_err(classify)?;
    if let Some(bad) = etas.iter().find(|e| !(**e >= 0.0 && e.is_finite())) {
        return Err(usage(format!("inner step sizes must be >= 0, got {bad}")));
    }
    let init = InitStateModel::identity(tasks.state_dim());
    let mut results = Vec::with_capacity(etas.len());
    for &eta in etas {
        let r = grid_search(&tasks, &grid, eta, &init).map_err(classify)?;
        println!(
            "eta {eta}: W* = {:?}, F* = {}, {} stabilizing of {} points",
            r.w_star.as_slice(),
            r.f_star,
            r.evaluated_points,
            r.evaluated_points + r.skipped_unstable
        );
        results.push(r);
    }
    write_json(
        out,
        &OracleFile {
            generated_at: timestamp(),
            grid,
            results,
        },
    )?;
    Ok(true)
}

pub fn parse_policy(raw: &str) -> anyhow::Result<Mat> {
    let rows: Vec<Vec<f64>> = raw
        .split(';')
        .map(|row| {
            row.split(',')
                .map(|x| {
                    x.trim()
                        .parse::<f64>()
                        .map_err(|_| usage(format!("bad policy entry `{x}`")))
                })
                .collect()
        })
        .collect::<anyhow::Result<_>>()?;
    from_rows(&rows).map_err(usage)
}

pub fn check_bounds(
    source: &TaskSource,
    w_raw: &str,
    eta: f64,
    beta_raw: &str,
    out: &Path,
) -> anyhow::Result<bool> {
    let tasks = source.load()?;
    let w = parse_policy(w_raw)?;
    if w.shape() != (tasks.input_dim(), tasks.state_dim()) {
        return Err(usage(format!(
            "policy is {}x{}, tasks need {}x{}",
            w.nrows(),
            w.ncols(),
            tasks.input_dim(),
            tasks.state_dim()
        )));
    }
    if !(eta >= 0.0 && eta.is_finite()) {
        return Err(usage(format!("--eta must be >= 0, got {eta}")));
    }
    let init = InitStateModel::identity(tasks.state_dim());
    let mut radii = Vec::new();
    for t in tasks.tasks() {
        radii.push((t.id.clone(), closed_loop_radius(t, &w)?));
    }
    if radii.iter().any(|(_, r)| !r.stable) {
        eprintln!("W is not stabilizing:");
        for (id, r) in &radii {
            eprintln!("  {id}: rad(A - BW) = {}", r.radius);
        }
        return Ok(false);
    }
    if !is_maml_stabilizing(&tasks, &w, eta, &init)? {
        eprintln!("W is stabilizing but not MAML-stabilizing at eta = {eta}");
        return Ok(false);
    }
    let cond = StepCondition::default();
    let report = BoundsReport::compute(&tasks, &w, eta, &cond, &init)?;
    let beta = match parse_rule(beta_raw, "beta")? {
        Some(b) => b,
        None => {
            let top = report.beta_window.1.min(report.beta_cap);
            0.5 * (report.beta_window.0 + top)
        }
    };
    if !(beta > 0.0 && beta.is_finite()) {
        return Err(usage(format!("--beta must be positive, got {beta}")));
    }
    let grad_norm = op_norm(&maml_lqr::maml::maml_gradient(&tasks, &w, eta, &init)?);
    let verdict = report.condition1(beta, &cond, grad_norm);
    write_json(
        out,
        &json!({
            "generated_at": timestamp(),
            "w": to_rows(&w),
            "eta": eta,
            "beta": beta,
            "condition": cond,
            "constants": report.to_flat(),
            "verdict": verdict,
        }),
    )?;
    println!(
        "condition {}: binding constraint is the {} (eta {eta:e}, beta {beta:e}, L {:e})",
        if verdict.passed { "holds" } else { "fails" },
        verdict.binding,
        report.lipschitz.lipschitz
    );
    Ok(verdict.passed)
}

pub fn baseline(source: &TaskSource, maml_result: Option<&Path>, out: &Path) -> anyhow::Result<bool> {
    let tasks = source.load()?;
    let init = InitStateModel::identity(tasks.state_dim());
    let w_maml = match maml_result {
        Some(path) => {
            let text = std::fs::read_to_string(path)
                .with_context(|| format!("reading {}", path.display()))?;
            let v: Value = serde_json::from_str(&text).map_err(|e| usage(format!("{}: {e}", path.display())))?;
            let rows: Vec<Vec<f64>> = serde_json::from_value(v["w_final"].clone())
                .map_err(|_| usage(format!("{}: no `w_final` matrix", path.display())))?;
            Some(from_rows(&rows).map_err(usage)?)
        }
        None => None,
    };
    let mut entries = Vec::new();
    let mut ok = true;
    for t in tasks.tasks() {
        match riccati_optimal(t) {
            Ok(w_star) => {
                let cost = evaluate(t, &w_star, &init)?.cost;
                let maml_cost = match &w_maml {
                    Some(w) => match evaluate(t, w, &init) {
                        Ok(ev) => Some(ev.cost),
                        Err(Error::Unstable { .. }) => None,
                        Err(e) => return Err(e.into()),
                    },
                    None => None,
                };
                println!(
                    "{}: W* = {:?}, C(W*) = {cost}{}",
                    t.id,
                    w_star.as_slice(),
                    maml_cost.map(|c| format!(", C(W_maml) = {c}")).unwrap_or_default()
                );
                entries.push(json!({
                    "id": t.id,
                    "w_star": to_rows(&w_star),
                    "cost_at_w_star": cost,
                    "cost_at_w_maml": maml_cost,
                }));
            }
            Err(err) => {
                ok = false;
                eprintln!("{}: {err}", t.id);
                entries.push(json!({ "id": t.id, "error": err.to_string() }));
            }
        }
    }
    let mut doc = json!({ "generated_at": timestamp(), "tasks": entries });
    if let Some(w) = &w_maml {
        doc["w_maml"] = json!(to_rows(w));
    }
    write_json(out, &doc)?;
    if !ok {
        bail!("Riccati iteration failed for at least one task");
    }
    Ok(true)
}
