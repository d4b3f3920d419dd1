//! The five subcommands: simulate, featurize, train, evaluate, report.
//!
//! Each command reads the same run configuration and leaves stamped CSV or
//! JSON artifacts in `paths.out_dir` (see [`crate::reports`]). Progress and
//! result summaries go to the writer handed in (stdout in the binary);
//! warnings about skipped input rows go to stderr.

use crate::config::{hex_sha256, LoadedConfig, RunConfig};
use crate::error::CliError;
use crate::reports::{
    float_field, write_csv_artifact, write_json_artifact, FileNamer, Stamp,
};
use faultcast::eval::{
    labels_for, run_experiment, train_on_rows, AlarmEvaluation, EvalError, ExperimentConfig,
    ExperimentReport,
};
use faultcast::features::{FeatureExtractor, FeatureSet};
use faultcast::model::AdaBoostModel;
use faultcast::simulate::generate_cohort;
use faultcast::telemetry::{
    filter_alarms, prepare, read_cohort, read_exclusions, write_alarms_csv, write_telemetry_csv,
    CohortDataset, RowReject,
};
use faultcast::windowing::{
    apply_labels, enumerate_windows, write_window_manifest, LabeledWindow, WindowSpec,
};
use serde::Serialize;
use std::collections::BTreeMap;
use std::io::Write;
use std::path::Path;

/// Prepared inputs shared by featurize, train, and evaluate: the dataset on
/// the analysis grid plus the provenance stamp for artifacts.
struct PreparedRun {
    dataset: CohortDataset,
    stamp: Stamp,
    alarm_ids: Vec<String>,
    window: WindowSpec,
}

fn read_input(path: &Path) -> Result<Vec<u8>, CliError> {
    std::fs::read(path)
        .map_err(|e| CliError::Data(format!("cannot read input {}: {e}", path.display())))
}

fn warn_rejects(path: &Path, rejects: &[RowReject]) {
    if rejects.is_empty() {
        return;
    }
    eprintln!(
        "warning: skipped {} unusable row(s) in {}",
        rejects.len(),
        path.display()
    );
    for reject in rejects.iter().take(5) {
        eprintln!("warning:   {reject}");
    }
    if rejects.len() > 5 {
        eprintln!("warning:   ... and {} more", rejects.len() - 5);
    }
}

/// Alarm types the run analyzes: the literal list from the config, or every
/// id present in the data when the list is the single wildcard `"*"`.
fn resolve_alarm_ids(config: &RunConfig, dataset: &CohortDataset) -> Result<Vec<String>, CliError> {
    let requested = &config.data.alarm_ids;
    if requested.is_empty() {
        return Err(CliError::Config("data: alarm_ids must not be empty".to_owned()));
    }
    if requested.iter().any(|id| id == "*") {
        if requested.len() > 1 {
            return Err(CliError::Config(
                "data: the wildcard \"*\" cannot be combined with explicit alarm ids".to_owned(),
            ));
        }
        let all = dataset.alarm_ids();
        if all.is_empty() {
            return Err(CliError::Data(
                "the alarm log is empty; no alarm types to analyze".to_owned(),
            ));
        }
        return Ok(all);
    }
    let mut ids = Vec::with_capacity(requested.len());
    for id in requested {
        if ids.contains(id) {
            return Err(CliError::Config(format!("data: alarm id {id:?} listed twice")));
        }
        ids.push(id.clone());
    }
    Ok(ids)
}

/// Loads, filters, and resamples the input data for an analysis command.
fn prepare_run(loaded: &LoadedConfig) -> Result<PreparedRun, CliError> {
    let paths = &loaded.config.paths;
    let telemetry_bytes = read_input(&paths.telemetry)?;
    let alarms_bytes = read_input(&paths.alarms)?;
    let mut stamp = Stamp::new(&loaded.echo);
    stamp.add_input(&paths.telemetry, hex_sha256(&telemetry_bytes));
    stamp.add_input(&paths.alarms, hex_sha256(&alarms_bytes));

    let loaded_cohort = read_cohort(
        telemetry_bytes.as_slice(),
        alarms_bytes.as_slice(),
        &paths.telemetry,
        &paths.alarms,
    )?;
    warn_rejects(&paths.telemetry, &loaded_cohort.telemetry_rejects);
    warn_rejects(&paths.alarms, &loaded_cohort.alarm_rejects);
    let mut dataset = loaded_cohort.dataset;

    if let Some(exclusions_path) = &paths.exclusions {
        let exclusion_bytes = read_input(exclusions_path)?;
        stamp.add_input(exclusions_path, hex_sha256(&exclusion_bytes));
        let (rules, rejects) = read_exclusions(exclusion_bytes.as_slice(), exclusions_path)?;
        warn_rejects(exclusions_path, &rejects);
        let before = dataset.alarms.len();
        dataset.alarms = filter_alarms(&dataset.alarms, &rules);
        let dropped = before - dataset.alarms.len();
        if dropped > 0 {
            eprintln!("note: {dropped} alarm(s) removed by exclusion rules");
        }
    }

    let prepared = prepare(&dataset, loaded.config.resample_interval()?)?;
    if !prepared.dropped_alarms.is_empty() {
        eprintln!(
            "note: {} alarm(s) fell outside the common telemetry extent",
            prepared.dropped_alarms.len()
        );
    }
    let alarm_ids = resolve_alarm_ids(&loaded.config, &prepared.dataset)?;
    let window = loaded.config.window_spec()?;
    Ok(PreparedRun { dataset: prepared.dataset, stamp, alarm_ids, window })
}

/// Window instants with labels for every alarm the run analyzes. Errors
/// when the telemetry extent is shorter than a single window span.
fn labeled_windows(run: &PreparedRun) -> Result<Vec<LabeledWindow>, CliError> {
    let enumeration = enumerate_windows(&run.dataset, &run.window);
    if enumeration.windows.is_empty() {
        return Err(CliError::Data(
            "windowing: the telemetry extent is shorter than one window span; \
             no instants to analyze"
                .to_owned(),
        ));
    }
    let mut windows = enumeration.windows;
    apply_labels(&mut windows, &run.window, &run.dataset.alarms, &run.alarm_ids);
    Ok(windows)
}

// ---------------------------------------------------------------------------
// simulate
// ---------------------------------------------------------------------------

/// Generates the synthetic cohort described by `[simulate]` and writes it
/// as `telemetry.csv` and `alarms.csv`, ready for the other subcommands.
pub fn cmd_simulate(loaded: &LoadedConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let sim = loaded.config.sim_config()?;
    let dataset = generate_cohort(&sim)?;

    let mut stamp = Stamp::new(&loaded.echo);
    stamp.inputs.insert("run config".to_owned(), loaded.file_sha256.clone());

    let out_dir = &loaded.config.paths.out_dir;
    let telemetry_path = out_dir.join("telemetry.csv");
    let mut body = Vec::new();
    write_telemetry_csv(&dataset, &mut body)
        .map_err(|e| CliError::Internal(format!("serializing telemetry: {e}")))?;
    write_csv_artifact(&telemetry_path, &stamp, &body)?;

    let alarms_path = out_dir.join("alarms.csv");
    let mut body = Vec::new();
    write_alarms_csv(&dataset.alarms, &mut body)
        .map_err(|e| CliError::Internal(format!("serializing alarms: {e}")))?;
    write_csv_artifact(&alarms_path, &stamp, &body)?;

    let samples: usize = dataset
        .appliances
        .iter()
        .flat_map(|a| a.series.values())
        .map(|s| s.len())
        .sum();
    writeln!(
        out,
        "simulated {} appliances x {} sensors over {} days ({} samples, {} alarms)",
        sim.appliances,
        sim.sensors,
        sim.days,
        samples,
        dataset.alarms.len()
    )
    .map_err(stdout_err)?;
    writeln!(out, "wrote {}", telemetry_path.display()).map_err(stdout_err)?;
    writeln!(out, "wrote {}", alarms_path.display()).map_err(stdout_err)?;
    Ok(())
}

// ---------------------------------------------------------------------------
// featurize
// ---------------------------------------------------------------------------

/// Extracts every requested feature set and writes one labeled feature
/// matrix per (alarm, feature set), plus a window manifest per alarm.
pub fn cmd_featurize(loaded: &LoadedConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let run = prepare_run(loaded)?;
    let sets = loaded.config.feature_sets()?;
    let windows = labeled_windows(&run)?;
    let extractor = FeatureExtractor::new(&run.dataset, &run.window)?;
    let out_dir = &loaded.config.paths.out_dir;
    let mut namer = FileNamer::new();

    writeln!(
        out,
        "{} windows ({} per appliance) across {} appliances",
        windows.len(),
        windows.len() / run.dataset.appliances.len(),
        run.dataset.appliances.len()
    )
    .map_err(stdout_err)?;

    for alarm_id in &run.alarm_ids {
        let path = out_dir.join(namer.name("windows", &[alarm_id], ".csv"));
        let mut body = Vec::new();
        write_window_manifest(&windows, alarm_id, &mut body)
            .map_err(|e| CliError::Internal(format!("serializing window manifest: {e}")))?;
        write_csv_artifact(&path, &run.stamp, &body)?;
        writeln!(out, "wrote {}", path.display()).map_err(stdout_err)?;
    }

    for &set in &sets {
        let matrix = extractor.extract(&windows, set)?;
        for alarm_id in &run.alarm_ids {
            let path = out_dir.join(namer.name("features", &[alarm_id, set.key()], ".csv"));
            let mut body = Vec::new();
            faultcast::features::write_feature_matrix(&matrix, &windows, alarm_id, &mut body)
                .map_err(|e| CliError::Internal(format!("serializing features: {e}")))?;
            write_csv_artifact(&path, &run.stamp, &body)?;
            writeln!(out, "wrote {}", path.display()).map_err(stdout_err)?;
        }
    }
    Ok(())
}

// ---------------------------------------------------------------------------
// train
// ---------------------------------------------------------------------------

/// Everything a saved model file carries besides the provenance stamp.
#[derive(Serialize)]
struct ModelPayload<'a> {
    alarm_id: &'a str,
    feature_set: &'a str,
    model: &'a AdaBoostModel,
}

/// Trains one final ensemble per (alarm, feature set) on the whole cohort
/// and saves each as a JSON artifact.
pub fn cmd_train(loaded: &LoadedConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let run = prepare_run(loaded)?;
    let sets = loaded.config.feature_sets()?;
    let train_config = loaded.config.train_config()?;
    let windows = labeled_windows(&run)?;
    let extractor = FeatureExtractor::new(&run.dataset, &run.window)?;
    let all_rows: Vec<usize> = (0..windows.len()).collect();
    let out_dir = &loaded.config.paths.out_dir;
    let mut namer = FileNamer::new();

    for &set in &sets {
        let matrix = extractor.extract(&windows, set)?;
        for alarm_id in &run.alarm_ids {
            let labels = labels_for(&windows, alarm_id).map_err(CliError::from)?;
            let model = train_on_rows(&matrix, &all_rows, &labels, &train_config)
                .map_err(|e| amend_training_error(e, alarm_id))?;
            let payload =
                ModelPayload { alarm_id, feature_set: set.key(), model: &model };
            let path = out_dir.join(namer.name("model", &[alarm_id, set.key()], ".json"));
            write_json_artifact(&path, &run.stamp, "adaboost-model", &payload)?;
            writeln!(
                out,
                "trained {} / {} ({} rounds kept), wrote {}",
                alarm_id,
                set,
                model.rounds.len(),
                path.display()
            )
            .map_err(stdout_err)?;
        }
    }
    Ok(())
}

fn amend_training_error(e: EvalError, alarm_id: &str) -> CliError {
    match e {
        EvalError::Model(inner) => {
            let base = CliError::from(inner);
            match base {
                CliError::Data(message) => {
                    CliError::Data(format!("{message} (alarm {alarm_id:?})"))
                }
                other => other,
            }
        }
        other => CliError::from(other),
    }
}

// ---------------------------------------------------------------------------
// evaluate
// ---------------------------------------------------------------------------

/// Cross-validates every (alarm, feature set) pair and writes the report
/// artifacts: AUC summary, per-fold AUCs, averaged ROC curves, and (with a
/// cost section) the per-fold alarm thresholds.
pub fn cmd_evaluate(loaded: &LoadedConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let run = prepare_run(loaded)?;
    let experiment = ExperimentConfig {
        window: run.window,
        feature_sets: loaded.config.feature_sets()?,
        train: loaded.config.train_config()?,
        cost: loaded.config.cost_model()?,
    };
    let report = run_experiment(&run.dataset, &experiment, &run.alarm_ids).map_err(|e| {
        match e {
            EvalError::NoFolds { alarm_id } => CliError::Data(format!(
                "eval: empty fold plan: no appliance has a positive window for \
                 alarm {alarm_id:?}, so there is nothing to cross-validate"
            )),
            other => CliError::from(other),
        }
    })?;

    writeln!(
        out,
        "evaluated {} windows ({} per appliance)",
        report.window_count, report.instants_per_appliance
    )
    .map_err(stdout_err)?;

    let out_dir = &loaded.config.paths.out_dir;
    write_auc_summary(out_dir, &run, &experiment, &report)?;
    writeln!(out, "wrote {}", out_dir.join("auc_summary.csv").display())
        .map_err(stdout_err)?;
    write_fold_aucs(out_dir, &run, &report)?;
    writeln!(out, "wrote {}", out_dir.join("fold_aucs.csv").display()).map_err(stdout_err)?;
    write_roc_curves(out_dir, &run, &report, out)?;
    if experiment.cost.is_some() {
        write_thresholds(out_dir, &run, &report)?;
        writeln!(out, "wrote {}", out_dir.join("thresholds.csv").display())
            .map_err(stdout_err)?;
    }

    let summary = summary_rows(&run.alarm_ids, &experiment.feature_sets, &report)?;
    writeln!(out).map_err(stdout_err)?;
    render_matrix(&summary, out)?;
    Ok(())
}

/// One `alarm,features,mean_auc` line per evaluated pair, alarms outermost
/// in the analyzed order, feature sets in the requested order.
fn summary_rows(
    alarm_ids: &[String],
    sets: &[FeatureSet],
    report: &ExperimentReport,
) -> Result<Vec<(String, String, f64)>, CliError> {
    let mut index: BTreeMap<(&str, &str), &AlarmEvaluation> = BTreeMap::new();
    for evaluation in &report.evaluations {
        index.insert(
            (evaluation.alarm_id.as_str(), evaluation.feature_set.key()),
            evaluation,
        );
    }
    let mut rows = Vec::new();
    for alarm_id in alarm_ids {
        for set in sets {
            let evaluation =
                index.get(&(alarm_id.as_str(), set.key())).ok_or_else(|| {
                    CliError::Internal(format!(
                        "evaluation missing for alarm {alarm_id:?}, features {set}"
                    ))
                })?;
            rows.push((alarm_id.clone(), set.to_string(), evaluation.mean_auc));
        }
    }
    Ok(rows)
}

fn write_auc_summary(
    out_dir: &Path,
    run: &PreparedRun,
    experiment: &ExperimentConfig,
    report: &ExperimentReport,
) -> Result<(), CliError> {
    let rows = summary_rows(&run.alarm_ids, &experiment.feature_sets, report)?;
    let mut body = String::from("alarm,features,mean_auc\n");
    for (alarm, features, mean_auc) in rows {
        body.push_str(&csv_line(&[&alarm, &features, &float_field(mean_auc)]));
    }
    write_csv_artifact(&out_dir.join("auc_summary.csv"), &run.stamp, body.as_bytes())
}

fn write_fold_aucs(
    out_dir: &Path,
    run: &PreparedRun,
    report: &ExperimentReport,
) -> Result<(), CliError> {
    let mut body = String::from("alarm,features,test_appliance,auc,rounds_kept\n");
    for evaluation in &report.evaluations {
        for fold in &evaluation.folds {
            body.push_str(&csv_line(&[
                &evaluation.alarm_id,
                &evaluation.feature_set.to_string(),
                &fold.fold.appliance_id,
                &float_field(fold.auc),
                &fold.rounds_kept.to_string(),
            ]));
        }
    }
    write_csv_artifact(&out_dir.join("fold_aucs.csv"), &run.stamp, body.as_bytes())
}

fn write_roc_curves(
    out_dir: &Path,
    run: &PreparedRun,
    report: &ExperimentReport,
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut namer = FileNamer::new();
    for evaluation in &report.evaluations {
        let path = out_dir.join(namer.name(
            "roc",
            &[&evaluation.alarm_id, evaluation.feature_set.key()],
            ".csv",
        ));
        let mut body = String::from("fpr,tpr\n");
        for point in &evaluation.mean_roc {
            body.push_str(&csv_line(&[&float_field(point.fpr), &float_field(point.tpr)]));
        }
        write_csv_artifact(&path, &run.stamp, body.as_bytes())?;
        writeln!(out, "wrote {}", path.display()).map_err(stdout_err)?;
    }
    Ok(())
}

fn write_thresholds(
    out_dir: &Path,
    run: &PreparedRun,
    report: &ExperimentReport,
) -> Result<(), CliError> {
    let mut body = String::from(
        "alarm,features,test_appliance,threshold,train_cost,test_missed,\
         test_false_alarms,test_cost\n",
    );
    for evaluation in &report.evaluations {
        for fold in &evaluation.folds {
            let choice = fold.threshold.as_ref().ok_or_else(|| {
                CliError::Internal(
                    "cost model present but a fold carries no threshold".to_owned(),
                )
            })?;
            body.push_str(&csv_line(&[
                &evaluation.alarm_id,
                &evaluation.feature_set.to_string(),
                &fold.fold.appliance_id,
                &float_field(choice.threshold),
                &float_field(choice.train_cost),
                &choice.test_missed.to_string(),
                &choice.test_false_alarms.to_string(),
                &float_field(choice.test_cost),
            ]));
        }
    }
    write_csv_artifact(&out_dir.join("thresholds.csv"), &run.stamp, body.as_bytes())
}

/// Quotes a CSV field only when it needs it, so numeric output stays clean.
fn csv_field(field: &str) -> String {
    if field.contains([',', '"', '\n', '\r']) {
        format!("\"{}\"", field.replace('"', "\"\""))
    } else {
        field.to_owned()
    }
}

fn csv_line(fields: &[&str]) -> String {
    let quoted: Vec<String> = fields.iter().map(|f| csv_field(f)).collect();
    format!("{}\n", quoted.join(","))
}

// ---------------------------------------------------------------------------
// report
// ---------------------------------------------------------------------------

/// Renders the AUC summary written by `evaluate` as a feature-set by
/// alarm-type matrix on stdout.
pub fn cmd_report(loaded: &LoadedConfig, out: &mut dyn Write) -> Result<(), CliError> {
    let path = loaded.config.paths.out_dir.join("auc_summary.csv");
    let bytes = std::fs::read(&path).map_err(|e| {
        CliError::Data(format!(
            "cannot read {}: {e}; run the evaluate subcommand first",
            path.display()
        ))
    })?;
    let mut reader = csv::ReaderBuilder::new()
        .comment(Some(b'#'))
        .from_reader(bytes.as_slice());
    let mut rows = Vec::new();
    for record in reader.records() {
        let record = record.map_err(|e| {
            CliError::Data(format!("malformed summary {}: {e}", path.display()))
        })?;
        let field = |i: usize| record.get(i).unwrap_or("").to_owned();
        let mean_auc: f64 = field(2).parse().map_err(|_| {
            CliError::Data(format!(
                "malformed summary {}: bad mean_auc {:?}",
                path.display(),
                field(2)
            ))
        })?;
        rows.push((field(0), field(1), mean_auc));
    }
    if rows.is_empty() {
        return Err(CliError::Data(format!("summary {} holds no rows", path.display())));
    }
    render_matrix(&rows, out)
}

/// Prints `(alarm, features, mean_auc)` rows as a matrix: one row per
/// feature set, one column per alarm, in first-appearance order.
fn render_matrix(
    rows: &[(String, String, f64)],
    out: &mut dyn Write,
) -> Result<(), CliError> {
    let mut alarms: Vec<&str> = Vec::new();
    let mut sets: Vec<&str> = Vec::new();
    let mut cells: BTreeMap<(&str, &str), f64> = BTreeMap::new();
    for (alarm, set, mean_auc) in rows {
        if !alarms.contains(&alarm.as_str()) {
            alarms.push(alarm);
        }
        if !sets.contains(&set.as_str()) {
            sets.push(set);
        }
        cells.insert((set.as_str(), alarm.as_str()), *mean_auc);
    }

    let label_width = sets
        .iter()
        .map(|s| s.len())
        .chain(std::iter::once("features".len()))
        .max()
        .unwrap_or(0);
    let column_widths: Vec<usize> = alarms.iter().map(|a| a.len().max(5)).collect();

    let mut header = format!("{:<label_width$}", "features");
    for (alarm, width) in alarms.iter().zip(&column_widths) {
        header.push_str(&format!("  {alarm:>width$}"));
    }
    writeln!(out, "{}", header.trim_end()).map_err(stdout_err)?;
    for set in &sets {
        let mut line = format!("{set:<label_width$}");
        for (alarm, width) in alarms.iter().zip(&column_widths) {
            match cells.get(&(*set, *alarm)) {
                Some(mean_auc) => line.push_str(&format!("  {:>width$.3}", mean_auc)),
                None => line.push_str(&format!("  {:>width$}", "-")),
            }
        }
        writeln!(out, "{}", line.trim_end()).map_err(stdout_err)?;
    }
    Ok(())
}

fn stdout_err(e: std::io::Error) -> CliError {
    CliError::Internal(format!("cannot write to stdout: {e}"))
}
