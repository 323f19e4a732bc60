//! One function per subcommand. Each writes its artifacts, prints a human
//! summary to `out` and returns an error carrying the exit code on failure.
//!
//! Artifact layout under the output directory:
//!
//! ```text
//! folds.tsv                 fold plan (split)
//! fold<i>/weights.sonn      best weights of test fold i (train, crossval)
//! fold<i>/epochs.tsv        per-epoch losses, accuracies and learning rate
//! fold<i>/report.json       FoldReport on the test fold
//! aggregate.json            CrossvalReport (crossval)
//! eval_report.json          EvalReport (eval)
//! bench_q<q>.json           BenchReport (bench)
//! ```

use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use log::info;
use serde::Serialize;

use selfonn_core::data::{
    load_samples, make_cv_splits, stratified_ordered_kfold, synth_generate, ClassLabel, CvSplit,
    DatasetManifest, FoldPlan, RemainderPlacement,
};
use selfonn_core::metrics::{
    aggregate_folds, bench_inference, confusion, metric_report, table_four_header, table_four_row,
    table_three_header, table_three_row, BenchReport, FoldAggregate, MetricReport, StdConvention,
};
use selfonn_core::seed::{self, Stream};
use selfonn_core::selfonn::{build_model, load_weights, param_count, save_weights, Model, ModelConfig};
use selfonn_core::training::{evaluate, fit, EpochRecord, Sample, TrainConfig};

use crate::config::{FoldSelection, RunConfig};
use crate::exit::CliError;

type CmdResult = Result<(), CliError>;

fn emit(out: &mut dyn Write, text: &str) -> CmdResult {
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::io(format!("cannot write output: {e}")))
}

fn write_file(path: &Path, bytes: &[u8]) -> CmdResult {
    if let Some(dir) = path.parent() {
        fs::create_dir_all(dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::io(format!("cannot write {}: {e}", path.display())))
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> CmdResult {
    let mut text = serde_json::to_string_pretty(value)?;
    text.push('\n');
    write_file(path, text.as_bytes())
}

fn class_titles() -> Vec<&'static str> {
    ClassLabel::ALL.iter().map(|c| c.title()).collect()
}

fn model_label(q: u32) -> String {
    if q == 1 {
        "2D CNN (Q=1)".into()
    } else {
        format!("Self-ONN (Q={q})")
    }
}

fn load_manifest(cfg: &RunConfig) -> Result<DatasetManifest, CliError> {
    if !cfg.manifest.is_file() {
        return Err(CliError::usage(format!(
            "manifest {} not found (set --manifest or paths.manifest)",
            cfg.manifest.display()
        )));
    }
    Ok(DatasetManifest::load(&cfg.manifest)?)
}

fn plan_path(cfg: &RunConfig) -> PathBuf {
    cfg.plan.clone().unwrap_or_else(|| cfg.out.join("folds.tsv"))
}

/// Reads the plan file if one was named, otherwise derives the plan from
/// the manifest.
fn fold_plan(cfg: &RunConfig, manifest: &DatasetManifest) -> Result<FoldPlan, CliError> {
    match &cfg.plan {
        Some(p) => Ok(FoldPlan::load(p, manifest)?),
        None => Ok(stratified_ordered_kfold(manifest, cfg.k, &RemainderPlacement::default_for(cfg.k))?),
    }
}

/// Root seed of the run for 1-based test fold `fold`.
pub fn fold_seed(root: u64, fold: usize) -> u64 {
    seed::derive(root, Stream::Fold, fold as u32)
}

pub fn cmd_synth(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let dir = &cfg.data_dir;
    let (manifest, report) = synth_generate(&cfg.synth, dir)?;
    write_json(&dir.join("synth_report.json"), &report)?;
    let mut text = format!(
        "wrote {} frames ({}x{}) to {}\n{:<14}{:>8}{:>10}{:>10}{:>10}{:>10}\n",
        manifest.len(),
        cfg.synth.width,
        cfg.synth.height,
        dir.display(),
        "class",
        "images",
        "min °C",
        "max °C",
        "mean °C",
        "std °C"
    );
    for c in &report.classes {
        text.push_str(&format!(
            "{:<14}{:>8}{:>10.2}{:>10.2}{:>10.2}{:>10.2}\n",
            c.class.title(),
            c.images,
            c.min_c,
            c.max_c,
            c.mean_c,
            c.std_c
        ));
    }
    emit(out, &text)
}

pub fn cmd_split(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let manifest = load_manifest(cfg)?;
    let plan = stratified_ordered_kfold(&manifest, cfg.k, &RemainderPlacement::default_for(cfg.k))?;
    let path = plan_path(cfg);
    write_file(&path, plan.to_text(&manifest).as_bytes())?;
    emit(out, &format!("fold plan written to {}\n{}", path.display(), plan.summary_table()))
}

pub fn cmd_params(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let mut text = table_four_header() + "\n";
    for q in 1..=5 {
        let n = param_count(&cfg.model.with_q(q))?;
        text.push_str(&table_four_row(&model_label(q), n, None));
        text.push('\n');
    }
    emit(out, &text)
}

/// Result of training and testing on one cross-validation rotation.
#[derive(Clone, Debug, Serialize)]
pub struct FoldReport {
    /// 1-based.
    pub test_fold: usize,
    pub val_fold: usize,
    pub seed: u64,
    pub model: ModelConfig,
    pub train: TrainConfig,
    pub train_size: usize,
    pub val_size: usize,
    pub test_size: usize,
    pub epochs_run: usize,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
    pub test_loss: f64,
    pub report: MetricReport,
}

fn run_fold(
    cfg: &RunConfig,
    samples: &[Sample],
    split: &CvSplit,
    out: &mut dyn Write,
) -> Result<FoldReport, CliError> {
    let fold = split.test_fold + 1;
    let seed = fold_seed(cfg.seed, fold);
    let pick = |idx: &[usize]| idx.iter().map(|&i| &samples[i]).collect::<Vec<_>>();
    let (train, val, test) = (pick(&split.train), pick(&split.val), pick(&split.test));
    emit(
        out,
        &format!(
            "fold {fold}: train {} / val {} (fold {}) / test {}, seed {seed}\n",
            train.len(),
            val.len(),
            split.val_fold + 1,
            test.len()
        ),
    )?;
    let model = build_model(&cfg.model, seed)?;
    let tc = TrainConfig {
        seed,
        ..cfg.train.clone()
    };
    let outcome = fit(&model, &train, &val, &tc)?;
    let (test_loss, preds) = evaluate(&outcome.model, &test)?;
    let truth: Vec<usize> = test.iter().map(|s| s.label).collect();
    let report = metric_report(&confusion(&truth, &preds, cfg.model.classes)?)?;

    let dir = cfg.out.join(format!("fold{fold}"));
    fs::create_dir_all(&dir).map_err(|e| CliError::io(format!("cannot create {}: {e}", dir.display())))?;
    save_weights(&outcome.model, &dir.join("weights.sonn"))?;
    let mut log = String::from(EpochRecord::LOG_HEADER);
    log.push('\n');
    for r in &outcome.records {
        log.push_str(&r.log_line());
        log.push('\n');
    }
    write_file(&dir.join("epochs.tsv"), log.as_bytes())?;
    let fr = FoldReport {
        test_fold: fold,
        val_fold: split.val_fold + 1,
        seed,
        model: cfg.model.clone(),
        train: tc,
        train_size: train.len(),
        val_size: val.len(),
        test_size: test.len(),
        epochs_run: outcome.records.len(),
        best_epoch: outcome.best_epoch,
        stopped_early: outcome.stopped_early,
        test_loss,
        report,
    };
    write_json(&dir.join("report.json"), &fr)?;
    info!("fold {fold} finished after {} epochs", fr.epochs_run);
    emit(
        out,
        &format!(
            "fold {fold}: {} epochs (best {}), test accuracy {:.4}\n",
            fr.epochs_run,
            fr.best_epoch.map_or("-".into(), |e| e.to_string()),
            fr.report.accuracy
        ),
    )?;
    Ok(fr)
}

fn load_all(cfg: &RunConfig) -> Result<(DatasetManifest, FoldPlan, Vec<Sample>), CliError> {
    let manifest = load_manifest(cfg)?;
    let plan = fold_plan(cfg, &manifest)?;
    let samples = load_samples(&manifest, &cfg.data_dir, cfg.model.input_shape, cfg.normalization)?;
    Ok((manifest, plan, samples))
}

fn selected_split(plan: &FoldPlan, fold: usize) -> Result<CvSplit, CliError> {
    make_cv_splits(plan)
        .into_iter()
        .nth(fold.wrapping_sub(1))
        .ok_or_else(|| CliError::usage(format!("fold {fold} is outside 1..={}", plan.k())))
}

pub fn cmd_train(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let fold = match cfg.folds.unwrap_or(FoldSelection::One(1)) {
        FoldSelection::One(i) => i,
        FoldSelection::All => return Err(CliError::usage("train runs one split; use crossval for all folds")),
    };
    let (_, plan, samples) = load_all(cfg)?;
    let split = selected_split(&plan, fold)?;
    let fr = run_fold(cfg, &samples, &split, out)?;
    emit(out, &fr.report.confusion.render(&class_titles()))?;
    emit(out, &fr.report.render(&class_titles()))
}

#[derive(Clone, Debug, Serialize)]
pub struct CrossvalReport {
    pub q_order: u32,
    pub std_convention: StdConvention,
    pub folds: Vec<FoldReport>,
    pub aggregate: FoldAggregate,
}

pub fn cmd_crossval(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let (_, plan, samples) = load_all(cfg)?;
    let splits = match cfg.folds.unwrap_or(FoldSelection::All) {
        FoldSelection::All => make_cv_splits(&plan),
        FoldSelection::One(i) => vec![selected_split(&plan, i)?],
    };
    let mut folds = Vec::with_capacity(splits.len());
    for split in &splits {
        folds.push(run_fold(cfg, &samples, split, out)?);
    }
    let reports: Vec<MetricReport> = folds.iter().map(|f| f.report.clone()).collect();
    let aggregate = aggregate_folds(&reports, cfg.std)?;
    emit(
        out,
        &format!(
            "{}\n{}\n",
            table_three_header(),
            table_three_row(&model_label(cfg.model.q_order), &aggregate)
        ),
    )?;
    let report = CrossvalReport {
        q_order: cfg.model.q_order,
        std_convention: cfg.std,
        folds,
        aggregate,
    };
    write_json(&cfg.out.join("aggregate.json"), &report)
}

#[derive(Clone, Debug, Serialize)]
pub struct EvalReport {
    pub weights: PathBuf,
    /// Test fold evaluated, or `None` for the whole manifest.
    pub fold: Option<usize>,
    pub mean_loss: f64,
    pub report: MetricReport,
}

pub fn cmd_eval(cfg: &RunConfig, out: &mut dyn Write) -> CmdResult {
    let weights = cfg
        .weights
        .clone()
        .ok_or_else(|| CliError::usage("eval needs --weights or paths.weights"))?;
    let model: Model = load_weights(&weights, &cfg.model)?;
    let manifest = load_manifest(cfg)?;
    let (subset, fold) = match cfg.folds {
        Some(FoldSelection::One(i)) => {
            let plan = fold_plan(cfg, &manifest)?;
            if i > plan.k() {
                return Err(CliError::usage(format!("fold {i} is outside 1..={}", plan.k())));
            }
            let records = manifest.records();
            let entries = plan
                .fold_members(i - 1)
                .into_iter()
                .map(|j| (records[j].path.clone(), records[j].label));
            (DatasetManifest::from_entries(entries)?, Some(i))
        }
        _ => (manifest, None),
    };
    let samples = load_samples(&subset, &cfg.data_dir, cfg.model.input_shape, cfg.normalization)?;
    let refs: Vec<&Sample> = samples.iter().collect();
    let (mean_loss, preds) = evaluate(&model, &refs)?;
    let truth: Vec<usize> = samples.iter().map(|s| s.label).collect();
    let report = metric_report(&confusion(&truth, &preds, cfg.model.classes)?)?;
    emit(out, &report.confusion.render(&class_titles()))?;
    emit(out, &report.render(&class_titles()))?;
    write_json(
        &cfg.out.join("eval_report.json"),
        &EvalReport {
            weights,
            fold,
            mean_loss,
            report,
        },
    )
}

pub fn cmd_bench(cfg: &RunConfig, all_q: bool, out: &mut dyn Write) -> CmdResult {
    let qs: Vec<u32> = if all_q { (1..=5).collect() } else { vec![cfg.model.q_order] };
    let mut reports: Vec<BenchReport> = Vec::new();
    for q in qs {
        let model = build_model(&cfg.model.with_q(q), cfg.seed)?;
        let r = bench_inference(&model, &cfg.bench)?;
        emit(out, &r.render())?;
        write_json(&cfg.out.join(format!("bench_q{q}.json")), &r)?;
        reports.push(r);
    }
    if reports.len() > 1 {
        let mut text = table_four_header() + "\n";
        for r in &reports {
            text.push_str(&table_four_row(&model_label(r.q_order), r.params, Some(r.mean_ms)));
            text.push('\n');
        }
        emit(out, &text)?;
    }
    Ok(())
}

