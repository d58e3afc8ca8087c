//! Command-line front end: dataset preparation, pair sampling, training,
//! leave-one-person-out evaluation, the discrimination-task ablation, and
//! report emission, all driven by a declarative JSON config.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};

use advhar::config::ExperimentConfig;
use advhar::error::{Error, Result};
use advhar::ingest::{read_windows_file, write_windows_file, DatasetKind, DatasetSchema};
use advhar::model::hex_digest;
use advhar::pairset::{
    enumerate_pair_groups, sample_pairs, sample_pairs_activity_agnostic, write_pair_file,
};
use advhar::pipeline::{
    acquire_dataset, aggregate_csv, load_raw_dataset, run_ablation, run_fold_repeat,
    run_pipeline, AggregateReport,
};
use advhar::synth::{generate_synthetic, SyntheticSpec};
use advhar::trainer::DiscriminationTask;

#[derive(Parser)]
#[command(
    name = "advhar",
    about = "Adversarial activity recognition from worn inertial sensors"
)]
struct Cli {
    #[command(subcommand)]
    cmd: Cmd,
}

#[derive(Clone, Copy, ValueEnum)]
enum PairModeArg {
    Activity,
    Agnostic,
}

#[derive(Clone, Copy, ValueEnum)]
enum TaskArg {
    Ours,
    Di,
    Db,
}

impl From<TaskArg> for DiscriminationTask {
    fn from(t: TaskArg) -> Self {
        match t {
            TaskArg::Ours => DiscriminationTask::ActivityPairs,
            TaskArg::Di => DiscriminationTask::SubjectIdentity,
            TaskArg::Db => DiscriminationTask::ActivityAgnosticPairs,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ReportFormat {
    Csv,
    Json,
}

#[derive(Subcommand)]
enum Cmd {
    /// Generate a synthetic dataset with a controllable inter-person
    /// variability knob and write it as a windows file.
    Synth {
        #[arg(long)]
        out: PathBuf,
        #[arg(long, default_value_t = 5)]
        subjects: usize,
        #[arg(long, default_value_t = 4)]
        activities: usize,
        #[arg(long, default_value_t = 20)]
        windows_per_cell: usize,
        #[arg(long, default_value_t = 128)]
        window_size: usize,
        #[arg(long, default_value_t = 6)]
        channels: usize,
        #[arg(long, default_value_t = 1.0)]
        variability: f64,
        #[arg(long, default_value_t = 0.05)]
        noise: f64,
        /// Per-window global phase shift amplitude in radians.
        #[arg(long, default_value_t = 0.0)]
        jitter: f64,
        #[arg(long, default_value_t = 0)]
        seed: u64,
    },
    /// Window a directory of raw recordings into a windows file.
    Prepare {
        #[arg(long)]
        dataset: String,
        #[arg(long)]
        raw: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Sample a pair set from a windows file.
    Pairs {
        #[arg(long)]
        windows: PathBuf,
        #[arg(long)]
        n: usize,
        #[arg(long, value_enum, default_value = "activity")]
        mode: PairModeArg,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train a single cross-validation fold.
    Train {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        fold: usize,
        #[arg(long)]
        out: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Full leave-one-person-out pipeline from a config.
    Loocv {
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// One discrimination-task ablation arm.
    Ablate {
        #[arg(long, value_enum)]
        task: TaskArg,
        #[arg(long)]
        config: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
        #[arg(long)]
        jobs: Option<usize>,
        #[arg(long)]
        seed: Option<u64>,
    },
    /// Re-emit aggregate results from a finished output directory.
    Report {
        #[arg(long = "in")]
        in_dir: PathBuf,
        #[arg(long, value_enum, default_value = "csv")]
        format: ReportFormat,
    },
}

fn load_config(
    path: &PathBuf,
    out: Option<PathBuf>,
    jobs: Option<usize>,
    seed: Option<u64>,
) -> Result<ExperimentConfig> {
    let mut cfg = ExperimentConfig::load(path)?;
    if let Some(out) = out {
        cfg.out_dir = out;
    }
    if let Some(jobs) = jobs {
        cfg.jobs = jobs;
    }
    if let Some(seed) = seed {
        cfg.seed = seed;
    }
    cfg.validate()?;
    Ok(cfg)
}

fn collect_aggregates(dir: &std::path::Path) -> Result<Vec<AggregateReport>> {
    let mut found = Vec::new();
    let mut candidates = vec![dir.join("aggregate.json")];
    for tag in ["ours", "di", "db"] {
        candidates.push(dir.join("ablate").join(tag).join("aggregate.json"));
    }
    for path in candidates {
        if let Ok(text) = std::fs::read_to_string(&path) {
            let agg: AggregateReport = serde_json::from_str(&text)
                .map_err(|e| Error::Data(format!("{}: {e}", path.display())))?;
            found.push(agg);
        }
    }
    if found.is_empty() {
        return Err(Error::Data(format!(
            "{}: no aggregate.json found",
            dir.display()
        )));
    }
    Ok(found)
}

fn run(cli: Cli) -> Result<()> {
    match cli.cmd {
        Cmd::Synth {
            out,
            subjects,
            activities,
            windows_per_cell,
            window_size,
            channels,
            variability,
            noise,
            jitter,
            seed,
        } => {
            let spec = SyntheticSpec {
                n_subjects: subjects,
                n_activities: activities,
                windows_per_cell,
                window_size,
                channels,
                subject_variability: variability,
                noise_sigma: noise,
                window_jitter: jitter,
                seed,
            };
            let dataset = generate_synthetic(&spec);
            write_windows_file(&out, &dataset, None, None)?;
            println!(
                "wrote {} windows ({} subjects x {} activities) to {}",
                dataset.len(),
                subjects,
                activities,
                out.display()
            );
        }
        Cmd::Prepare { dataset, raw, out } => {
            let kind: DatasetKind = dataset.parse()?;
            let schema = DatasetSchema::builtin(kind)?;
            let data = load_raw_dataset(&raw, &schema)?;
            write_windows_file(&out, &data, None, None)?;
            println!(
                "wrote {} windows from {} subjects to {}",
                data.len(),
                data.subjects.len(),
                out.display()
            );
        }
        Cmd::Pairs {
            windows,
            n,
            mode,
            seed,
            out,
        } => {
            let (dataset, _) = read_windows_file(&windows)?;
            let pairs = match mode {
                PairModeArg::Activity => {
                    sample_pairs(&enumerate_pair_groups(&dataset), n, seed)?
                }
                PairModeArg::Agnostic => sample_pairs_activity_agnostic(&dataset, n, seed)?,
            };
            let bytes = std::fs::read(&windows).map_err(|e| Error::io(&windows, e))?;
            write_pair_file(&out, &pairs, &hex_digest(&bytes))?;
            println!("wrote {} pairs to {}", pairs.pairs.len(), out.display());
        }
        Cmd::Train {
            config,
            fold,
            out,
            seed,
        } => {
            let cfg = load_config(&config, Some(out.clone()), None, seed)?;
            let dataset = acquire_dataset(&cfg)?;
            let splits = advhar::eval::loocv_splits(&dataset.subjects)?;
            let split = splits.get(fold).ok_or_else(|| {
                Error::Config(format!("fold {fold} out of range 0..{}", splits.len()))
            })?;
            let report = run_fold_repeat(&dataset, split, fold, 0, &cfg, cfg.task, Some(&out))?;
            println!(
                "fold {fold} (test subject {}): accuracy {:.4}, weighted F1 {:.4}",
                report.test_subject, report.accuracy, report.f1_weighted
            );
        }
        Cmd::Loocv {
            config,
            out,
            jobs,
            seed,
        } => {
            let cfg = load_config(&config, out, jobs, seed)?;
            let outcome = run_pipeline(&cfg)?;
            let m = &outcome.aggregate.report;
            println!(
                "{}: accuracy {:.4} +- {:.4}, weighted F1 {:.4} +- {:.4} ({} folds x {} repeats)",
                cfg.dataset,
                m.mean.accuracy,
                m.std.accuracy,
                m.mean.f1_weighted,
                m.std.f1_weighted,
                m.per_fold.len(),
                m.repeats
            );
            println!("artifacts in {}", outcome.out_dir.display());
        }
        Cmd::Ablate {
            task,
            config,
            out,
            jobs,
            seed,
        } => {
            let cfg = load_config(&config, out, jobs, seed)?;
            let dataset = acquire_dataset(&cfg)?;
            let arm: DiscriminationTask = task.into();
            let agg = run_ablation(&dataset, &cfg, arm, Some(&cfg.out_dir))?;
            println!(
                "{:?}: accuracy {:.4} +- {:.4}, weighted F1 {:.4} +- {:.4}",
                arm,
                agg.report.mean.accuracy,
                agg.report.std.accuracy,
                agg.report.mean.f1_weighted,
                agg.report.std.f1_weighted
            );
        }
        Cmd::Report { in_dir, format } => {
            let aggregates = collect_aggregates(&in_dir)?;
            match format {
                ReportFormat::Csv => print!("{}", aggregate_csv(&aggregates)),
                ReportFormat::Json => {
                    let json = serde_json::to_string_pretty(&aggregates)
                        .map_err(|e| Error::Data(format!("report serialization: {e}")))?;
                    println!("{json}");
                }
            }
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
