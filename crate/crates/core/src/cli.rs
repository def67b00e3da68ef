//! Command-line front end. The binary only parses arguments and maps the
//! result to an exit status; all work happens here so it can be tested.

use std::fmt::Write as _;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use clap::{Parser, Subcommand};
use sha2::{Digest, Sha256};
use thiserror::Error;

use crate::collector::{self, CollectorError, Dataset};
use crate::ml::{self, evaluate, featurize, Classifier, Hyperparams, MlError, ModelKind, Samples};
use crate::model::{ClassLabel, NUM_CLASSES};
use crate::qoe::{self, ImageMatrix, QoeError};
use crate::scenario::{self, Arm, RunOptions, Scenario, ScenarioError};
use crate::traffic::{self, IotProfiles, TrafficError};

pub const EXIT_OK: i32 = 0;
pub const EXIT_INVALID: i32 = 2;
pub const EXIT_RUNTIME: i32 = 3;

#[derive(Debug, Error)]
pub enum CliError {
    /// Bad input: config, dataset, model or flags.
    #[error("{0}")]
    Invalid(String),
    /// The inputs were fine but the work failed.
    #[error("{0}")]
    Runtime(String),
}

impl CliError {
    pub fn exit_code(&self) -> i32 {
        match self {
            CliError::Invalid(_) => EXIT_INVALID,
            CliError::Runtime(_) => EXIT_RUNTIME,
        }
    }
}

impl From<ScenarioError> for CliError {
    fn from(e: ScenarioError) -> Self {
        if e.is_config_error() {
            CliError::Invalid(e.to_string())
        } else {
            CliError::Runtime(e.to_string())
        }
    }
}

impl From<CollectorError> for CliError {
    fn from(e: CollectorError) -> Self {
        match e {
            CollectorError::IoFailure(_) => CliError::Runtime(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

impl From<MlError> for CliError {
    fn from(e: MlError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<QoeError> for CliError {
    fn from(e: QoeError) -> Self {
        CliError::Invalid(e.to_string())
    }
}

impl From<TrafficError> for CliError {
    fn from(e: TrafficError) -> Self {
        match e {
            TrafficError::Io(_) => CliError::Runtime(e.to_string()),
            other => CliError::Invalid(other.to_string()),
        }
    }
}

#[derive(Debug, Parser)]
#[command(name = "netadapt", version, about = "Telemetry-driven flow prioritization on a simulated switch")]
pub struct Cli {
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Run one arm of a scenario and write its artifacts.
    Run {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "adjusted")]
        arm: Arm,
        #[arg(long)]
        seed: Option<u64>,
        /// Output directory; falls back to the config's output.dir, then `out`.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// Train a classifier on a labeled dataset and report held-out metrics.
    Train {
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long, default_value = "dt")]
        kind: ModelKind,
        #[arg(long, default_value_t = 5)]
        k: usize,
        #[arg(long, default_value_t = 50)]
        trees: usize,
        #[arg(long)]
        max_depth: Option<usize>,
        #[arg(long, default_value_t = 0.8)]
        train_fraction: f64,
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long)]
        out: PathBuf,
    },
    /// Classify every row of a trace or dataset.
    Predict {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        /// Write `row,predicted,confidence` lines here instead of stdout.
        #[arg(long)]
        out: Option<PathBuf>,
    },
    /// One-vs-rest ROC curves and AUCs per class.
    Roc {
        #[arg(long)]
        model: PathBuf,
        #[arg(long)]
        dataset: PathBuf,
        #[arg(long)]
        out: PathBuf,
        /// Score only the held-out part of this split.
        #[arg(long)]
        train_fraction: Option<f64>,
        #[arg(long, default_value_t = 42)]
        seed: u64,
    },
    /// MSE and PSNR between two comma-separated grayscale grids.
    Psnr { reference: PathBuf, test: PathBuf },
    /// Write the synthetic six-class device trace.
    GenTrace {
        #[arg(long, default_value_t = 42)]
        seed: u64,
        #[arg(long, default_value_t = 2000)]
        packets_per_class: usize,
        #[arg(long)]
        profiles: Option<PathBuf>,
        #[arg(long)]
        out: PathBuf,
    },
    /// Issue timed control verbs to the switches during a run and print the replies.
    Registers {
        #[arg(long)]
        config: PathBuf,
        #[arg(long, default_value = "baseline")]
        arm: Arm,
        /// Lines of `<time_us> [switch] <verb> [args]`.
        #[arg(long)]
        script: PathBuf,
        #[arg(long)]
        seed: Option<u64>,
    },
}

/// Model file: the trained classifier plus what produced it.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
pub struct ModelFile {
    pub version: String,
    pub dataset_run: String,
    pub dataset_sha256: String,
    pub seed: u64,
    pub train_fraction: f64,
    pub model: Classifier,
}

impl ModelFile {
    pub fn load(path: &Path) -> Result<ModelFile, CliError> {
        let text = read(path)?;
        serde_json::from_str(&text)
            .map_err(|e| CliError::Invalid(format!("{}: not a model file: {e}", path.display())))
    }
}

fn read(path: &Path) -> Result<String, CliError> {
    fs::read_to_string(path).map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", path.display())))
}

fn write(path: &Path, bytes: &[u8]) -> Result<(), CliError> {
    if let Some(dir) = path.parent().filter(|d| !d.as_os_str().is_empty()) {
        fs::create_dir_all(dir).map_err(|e| CliError::Runtime(format!("{}: {e}", dir.display())))?;
    }
    fs::write(path, bytes).map_err(|e| CliError::Runtime(format!("cannot write {}: {e}", path.display())))
}

fn sha_hex(bytes: &[u8]) -> String {
    hex::encode(Sha256::digest(bytes))
}

fn load_scenario(config: &Path, seed: Option<u64>) -> Result<Scenario, CliError> {
    let s = Scenario::load(config)?;
    Ok(match seed {
        Some(seed) => s.with_seed(seed),
        None => s,
    })
}

/// Runs a parsed command, writing human-readable output to `out`.
pub fn execute<W: Write>(cli: Cli, out: &mut W) -> Result<(), CliError> {
    let mut text = String::new();
    match cli.command {
        Command::Run { config, arm, seed, out: dir } => {
            let s = load_scenario(&config, seed)?;
            let dir = dir
                .or_else(|| s.config.output.dir.as_ref().map(|d| s.resolve(d)))
                .unwrap_or_else(|| PathBuf::from("out"));
            let r = scenario::run_scenario(&s, arm, &RunOptions::default())?;
            r.write_artifacts(&s, &dir)?;
            let _ = writeln!(text, "run {}", r.run_id);
            for (name, v) in &r.video {
                let _ = writeln!(
                    text,
                    "video {name}: {}/{} frames, {:.2} fps",
                    v.complete_frames, v.frames, v.delivered_fps
                );
            }
            let _ = writeln!(
                text,
                "records {}  adjustments {}  artifacts in {}",
                r.dataset.len(),
                r.log.len(),
                dir.display()
            );
        }
        Command::Train {
            dataset,
            kind,
            k,
            trees,
            max_depth,
            train_fraction,
            seed,
            out: model_path,
        } => {
            let bytes = fs::read(&dataset)
                .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", dataset.display())))?;
            let ds = Dataset::read_from(bytes.as_slice())?;
            let samples = Samples::from_dataset(&ds);
            let (train_idx, test_idx) = ml::split(&samples.labels, train_fraction, seed)?;
            let params = Hyperparams {
                max_depth,
                k,
                n_trees: trees,
                ..Hyperparams::default()
            };
            let model = Classifier::train(kind, &samples.subset(&train_idx), &params, seed)?;
            let test = samples.subset(&test_idx);
            let preds: Vec<ClassLabel> =
                model.predict_all(&test.features).iter().map(|p| p.label).collect();
            let report = evaluate(&preds, &test.labels)?;
            let file = ModelFile {
                version: env!("CARGO_PKG_VERSION").to_string(),
                dataset_run: ds.run_id().to_string(),
                dataset_sha256: sha_hex(&bytes),
                seed,
                train_fraction,
                model,
            };
            let json = serde_json::to_string_pretty(&file).expect("model serializes") + "\n";
            write(&model_path, json.as_bytes())?;
            let _ = writeln!(text, "model,accuracy,precision,f1_score,mse");
            let _ = writeln!(
                text,
                "{},{:.4},{:.4},{:.4},{:.4}",
                model_name(kind),
                report.accuracy,
                report.macro_precision,
                report.macro_f1,
                report.mse
            );
        }
        Command::Predict { model, dataset, out: dest } => {
            let m = ModelFile::load(&model)?;
            let file = fs::File::open(&dataset)
                .map_err(|e| CliError::Invalid(format!("cannot read {}: {e}", dataset.display())))?;
            let trace = traffic::read_trace(file)?;
            let feats: Vec<_> = trace.rows.iter().map(featurize).collect();
            let preds = m.model.predict_all(&feats);
            let mut rows = String::from("row,predicted,confidence\n");
            for (i, p) in preds.iter().enumerate() {
                let _ = writeln!(rows, "{i},{},{:.6}", p.label, p.confidence());
            }
            match dest {
                Some(path) => write(&path, rows.as_bytes())?,
                None => text.push_str(&rows),
            }
            if trace.rows.iter().all(|r| r.label.is_some()) && !trace.rows.is_empty() {
                let truths: Vec<ClassLabel> = trace.rows.iter().map(|r| r.label.expect("checked")).collect();
                let labels: Vec<ClassLabel> = preds.iter().map(|p| p.label).collect();
                let report = evaluate(&labels, &truths)?;
                let _ = writeln!(text, "accuracy {:.4} over {} rows", report.accuracy, truths.len());
            }
        }
        Command::Roc {
            model,
            dataset,
            out: dir,
            train_fraction,
            seed,
        } => {
            let m = ModelFile::load(&model)?;
            let ds = collector::import(&dataset)?;
            let mut samples = Samples::from_dataset(&ds);
            if let Some(f) = train_fraction {
                let (_, test_idx) = ml::split(&samples.labels, f, seed)?;
                samples = samples.subset(&test_idx);
            }
            let scores: Vec<[f64; NUM_CLASSES]> =
                m.model.predict_all(&samples.features).iter().map(|p| p.scores).collect();
            let header = format!(
                "# model={} dataset={} seed={} v{}\n",
                m.model.kind().as_str(),
                ds.run_id(),
                seed,
                env!("CARGO_PKG_VERSION")
            );
            let mut files: Vec<(PathBuf, Vec<u8>)> = Vec::new();
            let mut summary = header.clone() + "class,name,auc\n";
            for class in ClassLabel::ALL {
                match ml::roc(&scores, &samples.labels, class) {
                    Ok(curve) => {
                        let mut body = header.clone().into_bytes();
                        body.extend_from_slice(b"class,threshold,fpr,tpr\n");
                        curve.write_csv_rows(&mut body).expect("in-memory write");
                        files.push((dir.join(format!("roc_class{}.csv", class.class_no())), body));
                        let _ = writeln!(summary, "{},{class},{:.2}", class.class_no(), curve.auc);
                        let _ = writeln!(text, "class {} ({class}): AUC = {:.2}", class.class_no(), curve.auc);
                    }
                    Err(e) => {
                        let _ = writeln!(summary, "{},{class},", class.class_no());
                        let _ = writeln!(text, "class {} ({class}): {e}", class.class_no());
                    }
                }
            }
            files.push((dir.join("auc.csv"), summary.into_bytes()));
            for (path, body) in files {
                write(&path, &body)?;
            }
        }
        Command::Psnr { reference, test } => {
            let f: ImageMatrix = read(&reference)?.parse()?;
            let g: ImageMatrix = read(&test)?.parse()?;
            let mse = qoe::mse(&f, &g)?;
            let _ = writeln!(text, "mse={} psnr={}", mse, qoe::psnr_from_mse(mse));
        }
        Command::GenTrace {
            seed,
            packets_per_class,
            profiles,
            out: dest,
        } => {
            let (profiles, source) = match &profiles {
                Some(p) => {
                    let t = read(p)?;
                    (IotProfiles::from_toml(&t)?, sha_hex(t.as_bytes())[..12].to_string())
                }
                None => (IotProfiles::shipped(), "shipped".to_string()),
            };
            let trace = traffic::gen_synthetic_iot_trace(&profiles, packets_per_class, seed)?;
            let comments = [format!(
                "gen-trace seed={seed} packets_per_class={packets_per_class} profiles={source} v{}",
                env!("CARGO_PKG_VERSION")
            )];
            let mut body = Vec::new();
            traffic::write_trace(&mut body, &comments, &trace.rows, true)?;
            write(&dest, &body)?;
            let _ = writeln!(text, "wrote {} rows to {}", trace.rows.len(), dest.display());
        }
        Command::Registers {
            config,
            arm,
            script,
            seed,
        } => {
            let s = load_scenario(&config, seed)?;
            let script = scenario::parse_script(&read(&script)?)?;
            let r = scenario::run_scenario(&s, arm, &RunOptions { script })?;
            for reply in &r.replies {
                let _ = writeln!(text, "[{} us] {} {}", reply.time_us, reply.switch, reply.command);
                for line in reply.reply.lines() {
                    let _ = writeln!(text, "  {line}");
                }
            }
        }
    }
    out.write_all(text.as_bytes())
        .map_err(|e| CliError::Runtime(format!("stdout: {e}")))
}

fn model_name(kind: ModelKind) -> &'static str {
    match kind {
        ModelKind::Dt => "Decision Tree",
        ModelKind::Knn => "K-Nearest Neighbors",
        ModelKind::Rf => "Random Forest",
    }
}

/// Parses `args`, runs the command and returns the process exit status.
pub fn main_with<I, T, W, E>(args: I, out: &mut W, err: &mut E) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<std::ffi::OsString> + Clone,
    W: Write,
    E: Write,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(cli) => cli,
        Err(e) => {
            let code = if e.use_stderr() { EXIT_INVALID } else { EXIT_OK };
            let _ = write!(if code == EXIT_OK { out as &mut dyn Write } else { err as &mut dyn Write }, "{e}");
            return code;
        }
    };
    match execute(cli, out) {
        Ok(()) => EXIT_OK,
        Err(e) => {
            let _ = writeln!(err, "error: {e}");
            e.exit_code()
        }
    }
}
