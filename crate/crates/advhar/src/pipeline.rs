//! End-to-end orchestration: dataset preparation, per-fold training with
//! repetition, aggregation, ablation arms, and report emission. Every
//! artifact embeds the digest of the config that produced it, and stages
//! whose artifact already carries the current digest are skipped.

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::config::ExperimentConfig;
use crate::error::{Error, Result};
use crate::eval::{
    aggregate_runs, box_plot_data, evaluate, loocv_splits, per_fold_values, split_dataset,
    BoxPlotData, ConfusionMatrix, FoldMetrics, FoldSplit, MetricsReport,
};
use crate::ingest::{
    apply_minmax, build_labeled_dataset, fit_minmax, read_raw_recording, read_windows_file,
    write_windows_file, DatasetKind, DatasetSchema, LabeledDataset, Window,
};
use crate::model::{
    classifier_spec, discriminator_spec, feature_extractor_spec, identity_discriminator_spec,
    reconstructor_spec, BundleSpec, ModelBundle,
};
use crate::pairset::{enumerate_pair_groups, sample_pairs, sample_pairs_activity_agnostic};
use crate::synth::generate_synthetic;
use crate::trainer::{
    run_training, write_trace_log, DiscriminationTask, FoldInputs, SelectionInfo,
};

fn mix(parts: &[u64]) -> u64 {
    let mut h = 0xcbf2_9ce4_8422_2325u64;
    for &p in parts {
        h ^= p;
        h = h.wrapping_mul(0x0000_0100_0000_01b3);
    }
    h
}

// ---------------------------------------------------------------------------
// Dataset acquisition
// ---------------------------------------------------------------------------

/// Subject id from a raw file name: the first digit run, so `subject101.dat`
/// is subject 101 and `mHealth_subject3.log` subject 3.
fn subject_id_from_name(name: &str) -> Option<u32> {
    let digits: String = name
        .chars()
        .skip_while(|c| !c.is_ascii_digit())
        .take_while(|c| c.is_ascii_digit())
        .collect();
    digits.parse().ok()
}

/// Read every regular file in `raw_dir` as one subject recording and
/// window the result.
pub fn load_raw_dataset(raw_dir: &Path, schema: &DatasetSchema) -> Result<LabeledDataset> {
    let mut entries: Vec<PathBuf> = std::fs::read_dir(raw_dir)
        .map_err(|e| Error::io(raw_dir, e))?
        .filter_map(|e| e.ok())
        .map(|e| e.path())
        .filter(|p| p.is_file())
        .collect();
    entries.sort();
    let mut recordings = Vec::new();
    for path in &entries {
        let name = path.file_name().and_then(|n| n.to_str()).unwrap_or("");
        let Some(subject) = subject_id_from_name(name) else {
            return Err(Error::Data(format!(
                "{}: cannot infer a subject id from the file name",
                path.display()
            )));
        };
        recordings.push(read_raw_recording(path, subject, schema)?);
    }
    build_labeled_dataset(&recordings, schema)
}

pub fn acquire_dataset(cfg: &ExperimentConfig) -> Result<LabeledDataset> {
    match cfg.dataset {
        DatasetKind::Synthetic => {
            let spec = cfg
                .synthetic
                .as_ref()
                .ok_or_else(|| Error::Config("missing synthetic section".into()))?;
            Ok(generate_synthetic(spec))
        }
        kind => {
            let raw_dir = cfg
                .raw_dir
                .as_ref()
                .ok_or_else(|| Error::Config("missing raw_dir".into()))?;
            load_raw_dataset(raw_dir, &DatasetSchema::builtin(kind)?)
        }
    }
}

/// Write the windowed dataset under `out_dir`, skipping the work when an
/// artifact with the current config digest is already present.
pub fn prepare_stage(cfg: &ExperimentConfig, out_dir: &Path) -> Result<PathBuf> {
    let path = out_dir.join("windows.bin");
    let digest = cfg.digest();
    if let Ok((_, sidecar)) = read_windows_file(&path) {
        if sidecar.config_digest.as_deref() == Some(digest.as_str()) {
            return Ok(path);
        }
    }
    let dataset = acquire_dataset(cfg)?;
    std::fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    write_windows_file(&path, &dataset, None, Some(&digest))?;
    Ok(path)
}

// ---------------------------------------------------------------------------
// Per-fold work
// ---------------------------------------------------------------------------

/// One (fold, repeat) result file.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct FoldReport {
    pub fold: usize,
    pub repeat: usize,
    pub test_subject: u32,
    pub accuracy: f64,
    pub f1_macro: f64,
    pub f1_weighted: f64,
    pub confusion: ConfusionMatrix,
    pub selection: SelectionInfo,
    pub config_digest: String,
    pub task: DiscriminationTask,
}

fn normalize_with(train_stats: &crate::ingest::NormStats, set: &LabeledDataset) -> Result<LabeledDataset> {
    let windows: Result<Vec<Window>> = set
        .windows
        .iter()
        .map(|w| apply_minmax(w, train_stats))
        .collect();
    Ok(LabeledDataset {
        windows: windows?,
        subjects: set.subjects.clone(),
        schema: set.schema.clone(),
    })
}

fn bundle_spec_for(
    task: DiscriminationTask,
    schema: &DatasetSchema,
    n_train_subjects: usize,
) -> Result<BundleSpec> {
    let d = match task {
        DiscriminationTask::SubjectIdentity => identity_discriminator_spec(n_train_subjects),
        _ => discriminator_spec(),
    };
    Ok(BundleSpec {
        f: feature_extractor_spec(schema.channels),
        r: reconstructor_spec(schema.window_size, schema.channels)?,
        c: classifier_spec(schema.num_activities()),
        d,
    })
}

/// Train one fold once and evaluate it on the held-out subject.
pub fn run_fold_repeat(
    dataset: &LabeledDataset,
    split: &FoldSplit,
    fold_id: usize,
    repeat: usize,
    cfg: &ExperimentConfig,
    task: DiscriminationTask,
    out_dir: Option<&Path>,
) -> Result<FoldReport> {
    // Repetition r perturbs only the seed.
    let run_seed = cfg.seed.wrapping_add(repeat as u64);
    let (train_raw, val_raw, test_raw) = split_dataset(dataset, split);
    if train_raw.is_empty() || val_raw.is_empty() || test_raw.is_empty() {
        return Err(Error::Data(format!(
            "fold {fold_id}: empty train/validation/test partition"
        )));
    }
    // Normalization is fitted on training subjects only.
    let stats = fit_minmax(&train_raw.windows)?;
    let train = normalize_with(&stats, &train_raw)?;
    let val = normalize_with(&stats, &val_raw)?;
    let test = normalize_with(&stats, &test_raw)?;

    let pair_seed = mix(&[run_seed, fold_id as u64, 0x70]);
    let val_pair_seed = mix(&[run_seed, fold_id as u64, 0x71]);
    let (pairs_train, pairs_val) = match task {
        DiscriminationTask::ActivityAgnosticPairs => (
            sample_pairs_activity_agnostic(&train, cfg.pair_target_train, pair_seed)?,
            sample_pairs_activity_agnostic(&val, cfg.pair_target_val, val_pair_seed)?,
        ),
        _ => (
            sample_pairs(&enumerate_pair_groups(&train), cfg.pair_target_train, pair_seed)?,
            sample_pairs(&enumerate_pair_groups(&val), cfg.pair_target_val, val_pair_seed)?,
        ),
    };

    let training_subjects = split.training_subjects.clone();
    let spec = bundle_spec_for(task, &dataset.schema, training_subjects.len())?;
    // The bundle seed must not depend on the task so all ablation arms
    // start from identical F/R/C parameters.
    let bundle = ModelBundle::new(spec, mix(&[run_seed, fold_id as u64, 0x6d]));

    let num_activities = dataset.schema.num_activities();
    let inputs = FoldInputs {
        fold_id,
        train,
        val,
        pairs_train,
        pairs_val,
        training_subjects,
        num_activities,
    };
    let mut training = cfg.training.clone();
    training.seed = run_seed;
    let mut trained = run_training(&inputs, &training, task, bundle)?;

    let cm = evaluate(
        &mut trained.bundle.f,
        &mut trained.bundle.c,
        &test.windows,
        num_activities,
    )?;
    let metrics = FoldMetrics::from_confusion(&cm);
    let report = FoldReport {
        fold: fold_id,
        repeat,
        test_subject: split.test_subject,
        accuracy: metrics.accuracy,
        f1_macro: metrics.f1_macro,
        f1_weighted: metrics.f1_weighted,
        confusion: cm,
        selection: trained.selection.clone(),
        config_digest: cfg.digest(),
        task,
    };
    if let Some(dir) = out_dir {
        std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
        let path = fold_report_path(dir, fold_id, repeat);
        let json = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::Data(format!("fold report serialization: {e}")))?;
        std::fs::write(&path, json).map_err(|e| Error::io(&path, e))?;
        write_trace_log(&dir.join(format!("fold{fold_id}_rep{repeat}_trace.jsonl")), &trained.traces)?;
    }
    Ok(report)
}

pub fn fold_report_path(dir: &Path, fold: usize, repeat: usize) -> PathBuf {
    dir.join(format!("fold{fold}_rep{repeat}.json"))
}

/// Load a previously written fold report if its config digest matches.
fn cached_fold_report(
    dir: Option<&Path>,
    fold: usize,
    repeat: usize,
    digest: &str,
) -> Option<FoldReport> {
    let dir = dir?;
    let text = std::fs::read_to_string(fold_report_path(dir, fold, repeat)).ok()?;
    let report: FoldReport = serde_json::from_str(&text).ok()?;
    (report.config_digest == digest).then_some(report)
}

// ---------------------------------------------------------------------------
// LOOCV and ablation
// ---------------------------------------------------------------------------

/// Aggregate report plus everything needed to re-emit it.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct AggregateReport {
    pub task: DiscriminationTask,
    pub dataset: String,
    pub report: MetricsReport,
    pub fold_reports: Vec<FoldReport>,
    pub box_plots: Vec<BoxPlotData>,
    pub config_digest: String,
}

/// Full LOOCV over one task arm: every subject tested once, `repeats`
/// runs per fold, folds distributed over `cfg.jobs` worker threads.
pub fn run_loocv(
    dataset: &LabeledDataset,
    cfg: &ExperimentConfig,
    task: DiscriminationTask,
    out_dir: Option<&Path>,
) -> Result<AggregateReport> {
    let splits = loocv_splits(&dataset.subjects)?;
    let digest = cfg.digest();
    let mut jobs: Vec<(usize, usize)> = Vec::new();
    for fold in 0..splits.len() {
        for repeat in 0..cfg.repeats {
            jobs.push((fold, repeat));
        }
    }
    let mut results: Vec<Option<FoldReport>> = vec![None; jobs.len()];
    for (slot, (fold, repeat)) in jobs.iter().copied().enumerate() {
        results[slot] = cached_fold_report(out_dir, fold, repeat, &digest);
    }
    let pending: Vec<(usize, (usize, usize))> = jobs
        .iter()
        .copied()
        .enumerate()
        .filter(|&(slot, _)| results[slot].is_none())
        .collect();

    let workers = cfg.jobs.min(pending.len().max(1));
    if workers <= 1 {
        for &(slot, (fold, repeat)) in &pending {
            results[slot] = Some(run_fold_repeat(
                dataset,
                &splits[fold],
                fold,
                repeat,
                cfg,
                task,
                out_dir,
            )?);
        }
    } else {
        let chunks: Vec<Vec<(usize, (usize, usize))>> = (0..workers)
            .map(|w| {
                pending
                    .iter()
                    .copied()
                    .skip(w)
                    .step_by(workers)
                    .collect()
            })
            .collect();
        let computed: Result<Vec<Vec<(usize, FoldReport)>>> = std::thread::scope(|scope| {
            let handles: Vec<_> = chunks
                .into_iter()
                .map(|chunk| {
                    let splits = &splits;
                    scope.spawn(move || {
                        chunk
                            .into_iter()
                            .map(|(slot, (fold, repeat))| {
                                run_fold_repeat(
                                    dataset,
                                    &splits[fold],
                                    fold,
                                    repeat,
                                    cfg,
                                    task,
                                    out_dir,
                                )
                                .map(|r| (slot, r))
                            })
                            .collect::<Result<Vec<_>>>()
                    })
                })
                .collect();
            handles
                .into_iter()
                .map(|h| h.join().expect("fold worker panicked"))
                .collect()
        });
        for (slot, report) in computed?.into_iter().flatten() {
            results[slot] = Some(report);
        }
    }

    let mut grid: Vec<Vec<FoldMetrics>> = vec![Vec::new(); splits.len()];
    for (slot, (fold, _)) in jobs.iter().copied().enumerate() {
        let r = results[slot].as_ref().expect("all jobs resolved");
        grid[fold].push(FoldMetrics {
            accuracy: r.accuracy,
            f1_macro: r.f1_macro,
            f1_weighted: r.f1_weighted,
        });
    }
    let report = aggregate_runs(&grid)?;
    let box_plots = ["accuracy", "f1_macro", "f1_weighted"]
        .iter()
        .map(|m| box_plot_data(m, &per_fold_values(&report, m)))
        .collect();
    let aggregate = AggregateReport {
        task,
        dataset: cfg.dataset.to_string(),
        report,
        fold_reports: results.into_iter().map(|r| r.unwrap()).collect(),
        box_plots,
        config_digest: digest,
    };
    if let Some(dir) = out_dir {
        write_aggregate(dir, &aggregate)?;
    }
    Ok(aggregate)
}

fn task_tag(task: DiscriminationTask) -> &'static str {
    match task {
        DiscriminationTask::ActivityPairs => "ours",
        DiscriminationTask::SubjectIdentity => "di",
        DiscriminationTask::ActivityAgnosticPairs => "db",
    }
}

pub fn write_aggregate(dir: &Path, aggregate: &AggregateReport) -> Result<()> {
    std::fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;
    let json_path = dir.join("aggregate.json");
    let json = serde_json::to_string_pretty(aggregate)
        .map_err(|e| Error::Data(format!("aggregate serialization: {e}")))?;
    std::fs::write(&json_path, json).map_err(|e| Error::io(&json_path, e))?;
    let csv_path = dir.join("aggregate.csv");
    std::fs::write(&csv_path, aggregate_csv(std::slice::from_ref(aggregate)))
        .map_err(|e| Error::io(&csv_path, e))?;
    Ok(())
}

/// One row per task arm, mean +- std per metric — the reference tables'
/// row shape.
pub fn aggregate_csv(arms: &[AggregateReport]) -> String {
    let mut out = String::from(
        "task,dataset,accuracy_mean,accuracy_std,f1_macro_mean,f1_macro_std,f1_weighted_mean,f1_weighted_std\n",
    );
    for a in arms {
        out.push_str(&format!(
            "{},{},{:.4},{:.4},{:.4},{:.4},{:.4},{:.4}\n",
            task_tag(a.task).to_uppercase(),
            a.dataset,
            a.report.mean.accuracy,
            a.report.std.accuracy,
            a.report.mean.f1_macro,
            a.report.std.f1_macro,
            a.report.mean.f1_weighted,
            a.report.std.f1_weighted,
        ));
    }
    out
}

/// One ablation arm under `out/ablate/<task>/`.
pub fn run_ablation(
    dataset: &LabeledDataset,
    cfg: &ExperimentConfig,
    task: DiscriminationTask,
    out_dir: Option<&Path>,
) -> Result<AggregateReport> {
    let arm_dir = out_dir.map(|d| d.join("ablate").join(task_tag(task)));
    run_loocv(dataset, cfg, task, arm_dir.as_deref())
}

// ---------------------------------------------------------------------------
// Whole pipeline
// ---------------------------------------------------------------------------

pub struct PipelineOutcome {
    pub out_dir: PathBuf,
    pub aggregate: AggregateReport,
}

/// prepare -> loocv -> report, from a validated config.
pub fn run_pipeline(cfg: &ExperimentConfig) -> Result<PipelineOutcome> {
    let out_dir = cfg.out_dir.clone();
    std::fs::create_dir_all(&out_dir).map_err(|e| Error::io(&out_dir, e))?;
    let windows_path = prepare_stage(cfg, &out_dir)?;
    let (dataset, _) = read_windows_file(&windows_path)?;
    let aggregate = run_loocv(&dataset, cfg, cfg.task, Some(&out_dir))?;
    Ok(PipelineOutcome { out_dir, aggregate })
}
