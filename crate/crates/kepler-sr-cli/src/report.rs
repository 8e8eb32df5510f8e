//! Subcommand implementations: ingestion, the ellipse oracle, experiment
//! runs with their report files, and one-off equation scoring.
//!
//! A run writes into the output directory:
//!   report.json   archive-grade record, byte-identical across reruns
//!   report.txt    human table, constants at six significant digits
//!   runtime.json  wall-clock sidecar, the only file with timestamps
//!   audit.jsonl   one line per scored candidate
//!   plots/eqn_NN.csv   (theta_rad, r_true, r_pred) per front member

use std::fmt::Write as _;
use std::fs;
use std::path::Path;
use std::time::{Instant, SystemTime, UNIX_EPOCH};

use kepler_sr::dataset::{featurize, write_normalized_csv, Dataset, FeatureMatrix, Provenance};
use kepler_sr::decompose::{self, SeparabilityKind};
use kepler_sr::expr::canon::recognize_orbit_family;
use kepler_sr::expr::parse::parse;
use kepler_sr::expr::print::to_text;
use kepler_sr::expr::{complexity_with_snaps, evaluate, Expr};
use kepler_sr::fit::{fit_constants_from, fit_ellipse, EllipseParams};
use kepler_sr::loss::{dl_loss, mse_loss};
use kepler_sr::pareto::{LossKey, ScoredExpr};
use kepler_sr::search::{run_search, snap_rationals, SearchOutcome, StopReason};
use kepler_sr::BiasConfig;

use crate::settings::{parse_custom_bias, resolve_dataset, CliError, Settings};

pub fn cmd_ingest(settings: &Settings, out: Option<&Path>) -> Result<(), CliError> {
    let (dataset, source) = resolve_dataset(settings)?;
    let text = write_normalized_csv(&dataset);
    match out {
        Some(path) => {
            if let Some(dir) = path.parent() {
                if !dir.as_os_str().is_empty() {
                    fs::create_dir_all(dir)?;
                }
            }
            fs::write(path, &text)?;
            eprintln!(
                "normalized {} rows from {source} into {}",
                dataset.len(),
                path.display()
            );
        }
        None => print!("{text}"),
    }
    Ok(())
}

pub fn cmd_fit_ellipse(settings: &Settings) -> Result<(), CliError> {
    let (dataset, source) = resolve_dataset(settings)?;
    let params = fit_ellipse(&dataset)?;
    println!("data: {source} ({} rows)", dataset.len());
    println!("semi-major axis a = {:.6}", params.a);
    println!("eccentricity  eps = {:.6}", params.eccentricity);
    let json = serde_json::json!({
        "schema": 1,
        "a": params.a,
        "eccentricity": params.eccentricity,
        "rows": dataset.len(),
        "source": source,
    });
    println!("{json}");
    Ok(())
}

pub fn cmd_eval(settings: &Settings, equation: &str, refit: bool) -> Result<(), CliError> {
    let (dataset, source) = resolve_dataset(settings)?;
    let (expr, constants) = parse(equation).map_err(|e| CliError::Input(e.to_string()))?;
    if constants.iter().any(|c| c.is_nan()) {
        return Err(CliError::Input(
            "equation has unbound cN slots; use numeric literals".into(),
        ));
    }
    match expr.max_feature_index() {
        Some(i) if i > 1 => {
            return Err(CliError::Input(
                "only x0 (angle) and x1 (sine basis) exist".into(),
            ))
        }
        _ => {}
    }
    // An equation mentioning x1 expects the (cos theta, sin theta) basis;
    // anything else is scored against the raw angle.
    let bias = BiasConfig {
        observational: expr.max_feature_index() == Some(1),
        inductive: false,
    };
    let features = featurize(&dataset, bias);
    let (mse, dl) = score(&expr, &constants, &features);
    println!("data: {source} ({} rows)", dataset.len());
    println!("equation: {}", to_text(&expr, &constants));
    println!("mse = {mse:.6e}");
    println!("dl  = {dl:.6e} bits/sample");

    let mut json = serde_json::json!({
        "schema": 1,
        "equation": to_text(&expr, &constants),
        "mse": mse,
        "dl": dl,
        "rows": dataset.len(),
        "source": source,
    });
    if refit {
        let fitted = fit_constants_from(&expr, &features, &constants);
        let (refit_mse, refit_dl) = score(&expr, &fitted.constants, &features);
        println!("refit equation: {}", to_text(&expr, &fitted.constants));
        println!("refit mse = {refit_mse:.6e}");
        println!("refit dl  = {refit_dl:.6e} bits/sample");
        let map = json.as_object_mut().expect("object literal");
        map.insert(
            "refit_equation".into(),
            to_text(&expr, &fitted.constants).into(),
        );
        map.insert("refit_mse".into(), refit_mse.into());
        map.insert("refit_dl".into(), refit_dl.into());
    }
    println!("{json}");
    Ok(())
}

fn score(expr: &Expr, constants: &[f64], features: &FeatureMatrix) -> (f64, f64) {
    match evaluate(expr, constants, &features.columns) {
        Ok(preds) => (
            mse_loss(&preds, &features.target),
            dl_loss(&preds, &features.target),
        ),
        Err(_) => (f64::INFINITY, f64::INFINITY),
    }
}

#[derive(Debug, serde::Serialize)]
struct ConfigEcho {
    experiment: Option<u8>,
    observational: bool,
    inductive: bool,
    features: Vec<String>,
    max_bits: f64,
    max_candidates: usize,
    max_seconds: f64,
    loss: LossKey,
}

#[derive(Debug, serde::Serialize)]
struct DataEcho {
    source: String,
    rows: usize,
    provenance: Provenance,
    theta_min_deg: f64,
    theta_max_deg: f64,
}

#[derive(Debug, serde::Serialize)]
struct DecompositionEcho {
    kind: SeparabilityKind,
    /// Largest normalized probe violation; absent when nothing was
    /// trustworthy enough to probe.
    score: Option<f64>,
    composed_equation: Option<String>,
    composed_mse: Option<f64>,
}

#[derive(Debug, serde::Serialize)]
struct FrontRow {
    index: usize,
    equation: String,
    complexity_bits: f64,
    mse: f64,
    dl: f64,
    structural_match: bool,
    semi_major: Option<f64>,
    eccentricity: Option<f64>,
}

#[derive(Debug, serde::Serialize)]
struct ReportJson {
    schema: u32,
    config: ConfigEcho,
    data: DataEcho,
    ellipse: Option<EllipseParams>,
    decomposition: Option<DecompositionEcho>,
    stop_reason: StopReason,
    candidates_scored: usize,
    front: Vec<FrontRow>,
}

pub fn cmd_run(
    settings: &Settings,
    experiment: Option<u8>,
    custom: Option<&str>,
) -> Result<(), CliError> {
    let (bias, experiment_echo) = match (experiment, custom) {
        (Some(id), _) => (
            BiasConfig::for_experiment(id).expect("clap range check"),
            Some(id),
        ),
        (None, Some(spec)) => (parse_custom_bias(spec)?, None),
        (None, None) => {
            return Err(CliError::Input(
                "pass --experiment 1..4 or --custom obs=..,ind=..".into(),
            ))
        }
    };
    let (dataset, source) = resolve_dataset(settings)?;
    let features = featurize(&dataset, bias);

    let started_unix = SystemTime::now()
        .duration_since(UNIX_EPOCH)
        .map(|d| d.as_secs_f64())
        .unwrap_or(0.0);
    let wall = Instant::now();

    let (decomposition, composed) = probe_separability(&features, bias, settings);
    let mut outcome = run_search(&features, bias, &settings.budget, settings.loss);
    if let Some(extra) = composed {
        outcome.front.insert(extra);
    }
    let wall_seconds = wall.elapsed().as_secs_f64();
    let ellipse = fit_ellipse(&dataset).ok();

    let (theta_min_deg, theta_max_deg) = dataset.theta_span_degrees();
    let report = ReportJson {
        schema: 1,
        config: ConfigEcho {
            experiment: experiment_echo,
            observational: bias.observational,
            inductive: bias.inductive,
            features: features.names.clone(),
            max_bits: settings.budget.max_bits,
            max_candidates: settings.budget.max_candidates,
            max_seconds: settings.budget.max_seconds,
            loss: settings.loss,
        },
        data: DataEcho {
            source,
            rows: dataset.len(),
            provenance: dataset.provenance,
            theta_min_deg,
            theta_max_deg,
        },
        ellipse,
        decomposition,
        stop_reason: outcome.stop,
        candidates_scored: outcome.candidates_scored,
        front: front_rows(&outcome, bias),
    };

    write_run_files(settings, &report, &outcome, &dataset, started_unix, wall_seconds)?;
    print!("{}", human_table(&report));
    println!("report written to {}", settings.out_dir.display());

    if report.front.is_empty() && outcome.stop != StopReason::StreamComplete {
        return Err(CliError::EmptyFront);
    }
    Ok(())
}

/// Separability probe for two-feature runs. A separable verdict also runs
/// the split searches and returns the composed equation as an extra front
/// candidate, rescored end to end under the run's own grammar.
fn probe_separability(
    features: &FeatureMatrix,
    bias: BiasConfig,
    settings: &Settings,
) -> (Option<DecompositionEcho>, Option<ScoredExpr>) {
    if features.arity() != 2 || features.rows() < decompose::MIN_SAMPLES {
        return (None, None);
    }
    let report = match decompose::test_separability(features) {
        Ok(report) => report,
        Err(_) => return (None, None),
    };
    let mut echo = DecompositionEcho {
        kind: report.kind,
        score: report.score.is_finite().then_some(report.score),
        composed_equation: None,
        composed_mse: None,
    };
    if report.kind == SeparabilityKind::None {
        return (Some(echo), None);
    }
    let composed = match decompose::recurse_split(
        &report,
        features,
        bias.inductive,
        &settings.budget,
        settings.loss,
    ) {
        Ok(composed) => composed,
        Err(_) => return (Some(echo), None),
    };
    let mut constants = composed.constants.clone();
    let snaps = snap_rationals(&mut constants);
    let (mse, dl) = score(&composed.expr, &constants, features);
    let bits =
        complexity_with_snaps(&composed.expr, &bias.grammar(), features.arity(), &snaps).bits;
    echo.composed_equation = Some(to_text(&composed.expr, &constants));
    echo.composed_mse = Some(mse);
    let scored = ScoredExpr {
        expr: composed.expr,
        constants,
        complexity: bits,
        mse,
        dl,
    };
    (Some(echo), Some(scored))
}

fn front_rows(outcome: &SearchOutcome, bias: BiasConfig) -> Vec<FrontRow> {
    outcome
        .front
        .members()
        .iter()
        .enumerate()
        .map(|(index, m)| {
            let family = recognize_orbit_family(&m.expr, &m.constants, bias.observational);
            FrontRow {
                index,
                equation: to_text(&m.expr, &m.constants),
                complexity_bits: m.complexity,
                mse: m.mse,
                dl: m.dl,
                structural_match: family.is_some(),
                semi_major: family.map(|f| f.semi_major()),
                eccentricity: family.map(|f| f.eccentricity()),
            }
        })
        .collect()
}

fn write_run_files(
    settings: &Settings,
    report: &ReportJson,
    outcome: &SearchOutcome,
    dataset: &Dataset,
    started_unix: f64,
    wall_seconds: f64,
) -> Result<(), CliError> {
    let dir = &settings.out_dir;
    let plots = dir.join("plots");
    fs::create_dir_all(&plots)?;

    let mut json = serde_json::to_string_pretty(report).expect("report serializes");
    json.push('\n');
    fs::write(dir.join("report.json"), json)?;

    fs::write(dir.join("report.txt"), human_table(report))?;

    let runtime = serde_json::json!({
        "schema": 1,
        "started_unix": started_unix,
        "wall_seconds": wall_seconds,
    });
    fs::write(dir.join("runtime.json"), format!("{runtime:#}\n"))?;

    let mut audit = String::new();
    for record in &outcome.audit {
        audit.push_str(&serde_json::to_string(record).expect("audit serializes"));
        audit.push('\n');
    }
    fs::write(dir.join("audit.jsonl"), audit)?;

    let thetas = dataset.thetas();
    for (index, member) in outcome.front.members().iter().enumerate() {
        let Ok(preds) = evaluate(&member.expr, &member.constants, &report_columns(dataset, report))
        else {
            continue;
        };
        let mut csv = String::from("theta_rad,r_true,r_pred\n");
        for ((theta, sample), pred) in thetas.iter().zip(&dataset.samples).zip(&preds) {
            let _ = writeln!(csv, "{theta},{},{pred}", sample.r);
        }
        fs::write(plots.join(format!("eqn_{index:02}.csv")), csv)?;
    }
    Ok(())
}

/// Feature columns for plot evaluation, rebuilt to match the run's basis.
fn report_columns(dataset: &Dataset, report: &ReportJson) -> Vec<Vec<f64>> {
    let bias = BiasConfig {
        observational: report.config.observational,
        inductive: report.config.inductive,
    };
    featurize(dataset, bias).columns
}

fn stop_name(stop: StopReason) -> &'static str {
    match stop {
        StopReason::StreamComplete => "stream_complete",
        StopReason::CandidateLimit => "candidate_limit",
        StopReason::TimeLimit => "time_limit",
    }
}

/// Rounds to six significant digits for the human table; the JSON report
/// keeps full precision.
fn round6(v: f64) -> f64 {
    format!("{v:.5e}").parse().unwrap_or(v)
}

fn human_table(report: &ReportJson) -> String {
    let mut out = String::new();
    let bias_text = match (report.config.observational, report.config.inductive) {
        (false, false) => "no bias",
        (true, false) => "observational bias",
        (false, true) => "inductive bias",
        (true, true) => "observational + inductive bias",
    };
    match report.config.experiment {
        Some(id) => {
            let _ = writeln!(out, "experiment {id} ({bias_text})");
        }
        None => {
            let _ = writeln!(out, "custom run ({bias_text})");
        }
    }
    let _ = writeln!(
        out,
        "data: {} ({} rows, theta {:.1}..{:.1} deg)",
        report.data.source, report.data.rows, report.data.theta_min_deg, report.data.theta_max_deg
    );
    let _ = writeln!(
        out,
        "budget: max_bits {}, max_candidates {}, max_seconds {}",
        report.config.max_bits, report.config.max_candidates, report.config.max_seconds
    );
    let _ = writeln!(
        out,
        "stop: {} after {} candidates",
        stop_name(report.stop_reason),
        report.candidates_scored
    );
    match report.ellipse {
        Some(p) => {
            let _ = writeln!(
                out,
                "ellipse oracle: a = {}, eps = {}",
                round6(p.a),
                round6(p.eccentricity)
            );
        }
        None => {
            let _ = writeln!(out, "ellipse oracle: did not converge");
        }
    }
    if let Some(d) = &report.decomposition {
        let kind = match d.kind {
            SeparabilityKind::None => "none",
            SeparabilityKind::Additive => "additive",
            SeparabilityKind::Multiplicative => "multiplicative",
        };
        match d.score {
            Some(score) => {
                let _ = writeln!(out, "separability: {kind} (score {:e})", round6(score));
            }
            None => {
                let _ = writeln!(out, "separability: {kind} (no trusted probes)");
            }
        }
    }
    let _ = writeln!(out);
    let _ = writeln!(
        out,
        "{:>3}  {:>7}  {:>12}  {:>12}  match  equation",
        "#", "bits", "mse", "dl"
    );
    for row in &report.front {
        let (expr, constants) = parse(&row.equation).expect("own report text parses");
        let rounded: Vec<f64> = constants.iter().map(|&c| round6(c)).collect();
        let _ = writeln!(
            out,
            "{:>3}  {:>7.1}  {:>12.5e}  {:>12.5e}  {:>5}  {}",
            row.index,
            row.complexity_bits,
            row.mse,
            row.dl,
            if row.structural_match { "*" } else { "." },
            to_text(&expr, &rounded)
        );
    }
    if let Some(best) = report.front.iter().rev().find(|r| r.structural_match) {
        let _ = writeln!(out);
        let _ = writeln!(
            out,
            "orbit family match: a = {}, eps = {}",
            round6(best.semi_major.unwrap_or(f64::NAN)),
            round6(best.eccentricity.unwrap_or(f64::NAN)),
        );
    }
    out
}
