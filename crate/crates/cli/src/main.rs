//! `clmi`: synthetic data, preprocessing, training and evaluation runs.
//!
//! Exit codes: 0 success, 2 configuration error, 3 data error, 4 numeric
//! failure (non-finite loss or logits).

use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::time::Instant;

use clap::{Args, Parser, Subcommand, ValueEnum};
use clmi::data_io::{read_eegb, write_eegb, EEGDataset};
use clmi::harness::{
    evaluate_trials, export_features, run_ablation, run_cv, run_sweep, sweep_plan, train, CvReport, HarnessError,
    MetricsDoc, ReportDoc, RunConfig, Samples, SweepAxis,
};
use clmi::model::Model;
use clmi::preprocess::{filter_trials, preprocess_pipeline};

#[derive(Parser)]
#[command(name = "clmi", version, about = "Motor-imagery EEG classification pipeline")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Clone, Copy, ValueEnum)]
enum Profile {
    /// Full-size reference configuration.
    Default,
    /// Desk-scale synthetic configuration.
    Ci,
}

#[derive(Args)]
struct ConfigArgs {
    /// JSON run-config.
    #[arg(long, conflicts_with = "profile")]
    config: Option<PathBuf>,
    /// Built-in configuration, used when no --config is given.
    #[arg(long, value_enum, default_value = "ci")]
    profile: Profile,
    /// Dataset overriding the config's data section.
    #[arg(long)]
    data: Option<PathBuf>,
}

impl ConfigArgs {
    fn load(&self) -> Result<RunConfig, HarnessError> {
        let mut cfg = match (&self.config, self.profile) {
            (Some(p), _) => RunConfig::load(p)?,
            (None, Profile::Ci) => RunConfig::ci(),
            (None, Profile::Default) => RunConfig::default(),
        };
        if let Some(d) = &self.data {
            cfg.data.path = Some(d.clone());
            cfg.data.synth = None;
        }
        Ok(cfg)
    }
}

#[derive(Subcommand)]
enum Command {
    /// Print a built-in run-config as JSON.
    Config {
        #[arg(long, value_enum, default_value = "ci")]
        profile: Profile,
    },
    /// Generate the synthetic dataset described by the config's data.synth.
    Synth {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// CAR, bandpass and windowing of an EEGB file.
    Preprocess {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: PathBuf,
    },
    /// Train on the whole dataset; writes a checkpoint and the loss history.
    Train {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        /// Per-epoch loss/accuracy JSON.
        #[arg(long)]
        history: Option<PathBuf>,
    },
    /// Evaluate a checkpoint on the dataset.
    Eval {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Cross-validation (or holdout) run.
    Cv {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// The three ablation variants on identical folds.
    Ablate {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One cross-validation run per value of a hyperparameter.
    Sweep {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long, value_parser = ["lr", "lstm_units", "epochs"])]
        axis: String,
        /// Comma-separated values; defaults to the axis's standard grid.
        #[arg(long, value_delimiter = ',')]
        values: Vec<f64>,
        /// Print the run matrix without running it.
        #[arg(long)]
        plan_only: bool,
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Export penultimate-layer features of every trial as CSV.
    Features {
        #[command(flatten)]
        cfg: ConfigArgs,
        #[arg(long)]
        checkpoint: PathBuf,
        #[arg(long)]
        out: PathBuf,
    },
    /// Print the header and class counts of an EEGB file.
    Inspect { file: PathBuf },
}

fn dataset(cfg: &RunConfig) -> Result<EEGDataset, HarnessError> {
    let d = cfg.dataset()?;
    cfg.validate(&d)?;
    Ok(d)
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), HarnessError> {
    match out {
        Some(p) => std::fs::write(p, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn summarize(name: &str, r: &CvReport) {
    let accs: Vec<String> = r.folds.iter().map(|f| format!("{:.3}", f.metrics.accuracy)).collect();
    eprintln!(
        "{name}: accuracy {:.4} ± {:.4} (folds {}), micro-F1 {:.4}, macro-F1 {:.4}",
        r.mean.accuracy,
        r.std.accuracy,
        accs.join(" "),
        r.mean.f1_micro,
        r.mean.f1_macro
    );
}

fn metrics_doc(command: &str, cfg: &RunConfig, reports: Vec<ReportDoc>, start: Instant) -> MetricsDoc {
    MetricsDoc {
        command: command.to_string(),
        seed: cfg.hyper.seed,
        config: cfg.clone(),
        reports,
        wall_clock_seconds: start.elapsed().as_secs_f64(),
    }
}

fn all_samples(cfg: &RunConfig, d: &EEGDataset, augment: bool) -> Result<Samples, HarnessError> {
    let filtered = filter_trials(d, &cfg.preprocess)?;
    let idx: Vec<usize> = (0..d.len()).collect();
    Samples::build(&filtered, &idx, &cfg.preprocess, augment)
}

fn run(cmd: Command) -> Result<(), HarnessError> {
    let start = Instant::now();
    match cmd {
        Command::Config { profile } => {
            let cfg = match profile {
                Profile::Ci => RunConfig::ci(),
                Profile::Default => RunConfig::default(),
            };
            println!("{}", cfg.to_json());
        }
        Command::Synth { cfg, out } => {
            let cfg = cfg.load()?;
            if cfg.data.synth.is_none() {
                return Err(HarnessError::Config("config has no data.synth section".into()));
            }
            let d = cfg.dataset()?;
            write_eegb(&d, &out)?;
            eprintln!("wrote {} trials to {}", d.len(), out.display());
        }
        Command::Preprocess { cfg, out } => {
            let cfg = cfg.load()?;
            let d = cfg.dataset()?;
            cfg.preprocess.validate(d.n_samples, d.fs)?;
            let p = preprocess_pipeline(&d, &cfg.preprocess, cfg.run.augment)?;
            write_eegb(&p, &out)?;
            eprintln!(
                "wrote {} windows of {} samples to {}",
                p.len(),
                p.n_samples,
                out.display()
            );
        }
        Command::Train {
            cfg,
            checkpoint,
            history,
        } => {
            let cfg = cfg.load()?;
            let d = dataset(&cfg)?;
            let samples = all_samples(&cfg, &d, cfg.run.augment)?;
            let mut model = Model::new(cfg.model.clone())?;
            let h = train(&mut model, &samples, &cfg.hyper)?;
            model.save(&checkpoint).map_err(HarnessError::from)?;
            if let Some(p) = history {
                emit(&serde_json::to_string_pretty(&h).expect("history serializes"), Some(&p))?;
            }
            eprintln!(
                "trained {} epochs on {} samples; final loss {:?}",
                h.loss.len(),
                samples.len(),
                h.loss.last()
            );
        }
        Command::Eval { cfg, checkpoint, out } => {
            let cfg = cfg.load()?;
            let d = dataset(&cfg)?;
            let samples = all_samples(&cfg, &d, cfg.run.augment)?;
            let mut model = Model::load(cfg.model.clone(), &checkpoint)?;
            let (confusion, metrics) = evaluate_trials(&mut model, &samples)?;
            let report = CvReport {
                folds: vec![clmi::harness::FoldResult {
                    fold: 0,
                    train_trials: Vec::new(),
                    test_trials: samples.trials(),
                    confusion,
                    metrics,
                    final_train_loss: None,
                }],
                mean: metrics,
                std: Default::default(),
            };
            summarize("eval", &report);
            let doc = metrics_doc("eval", &cfg, vec![ReportDoc::new("eval", &report)], start);
            emit(&doc.to_json(), out.as_deref())?;
        }
        Command::Cv { cfg, out } => {
            let cfg = cfg.load()?;
            let d = dataset(&cfg)?;
            let r = run_cv(&d, &cfg)?;
            summarize("cv", &r);
            let doc = metrics_doc("cv", &cfg, vec![ReportDoc::new("cv", &r)], start);
            emit(&doc.to_json(), out.as_deref())?;
        }
        Command::Ablate { cfg, out } => {
            let cfg = cfg.load()?;
            let d = dataset(&cfg)?;
            let rows = run_ablation(&d, &cfg)?;
            for (name, r) in &rows {
                summarize(name, r);
            }
            let reports = rows.iter().map(|(n, r)| ReportDoc::new(n.clone(), r)).collect();
            emit(&metrics_doc("ablate", &cfg, reports, start).to_json(), out.as_deref())?;
        }
        Command::Sweep {
            cfg,
            axis,
            values,
            plan_only,
            out,
        } => {
            let cfg = cfg.load()?;
            let axis = SweepAxis::parse(&axis).expect("clap restricts the axis");
            let values = if values.is_empty() { axis.grid() } else { values };
            if plan_only {
                let plan = sweep_plan(&cfg, axis, &values)?;
                let rows: Vec<serde_json::Value> = plan
                    .iter()
                    .map(|(v, c)| {
                        serde_json::json!({
                            "value": v,
                            "lr0": c.hyper.lr0,
                            "lstm_units": c.model.lstm_units,
                            "epochs": c.hyper.epochs,
                        })
                    })
                    .collect();
                let doc = serde_json::json!({ "axis": axis, "runs": rows });
                emit(
                    &format!("{}\n", serde_json::to_string_pretty(&doc).expect("plan serializes")),
                    out.as_deref(),
                )?;
                return Ok(());
            }
            let d = dataset(&cfg)?;
            let rows = run_sweep(&d, &cfg, axis, &values)?;
            for row in &rows {
                summarize(&format!("{axis:?}={}", row.value), &row.report);
            }
            let reports = rows
                .iter()
                .map(|r| ReportDoc::new(format!("{}", r.value), &r.report))
                .collect();
            emit(&metrics_doc("sweep", &cfg, reports, start).to_json(), out.as_deref())?;
        }
        Command::Features { cfg, checkpoint, out } => {
            let cfg = cfg.load()?;
            let d = dataset(&cfg)?;
            let samples = all_samples(&cfg, &d, false)?;
            let mut model = Model::load(cfg.model.clone(), &checkpoint)?;
            export_features(&mut model, &samples, &out)?;
            eprintln!("wrote {} feature rows to {}", samples.len(), out.display());
        }
        Command::Inspect { file } => {
            let d = read_eegb(&file)?;
            println!("format: EEGB v1");
            println!("trials: {}", d.len());
            println!("channels: {}", d.n_channels);
            println!("samples: {}", d.n_samples);
            println!("fs: {}", d.fs);
            println!("classes: {}", d.n_classes);
            println!("class_counts: {:?}", d.class_counts());
        }
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
