use std::collections::BTreeSet;
use std::net::SocketAddr;
use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

mod commands;

/// Road-asset inspection: detector metrics, sign crops, the damaged-sign
/// classifier and geotagged anomaly reports.
#[derive(Debug, Parser)]
#[command(name = "roadwatch", version)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Debug, Subcommand)]
enum Command {
    /// Score YOLO-format predictions against ground truth (mAP50, mAP50-95, P, R).
    Eval(EvalArgs),
    /// Cut every detection above a confidence out of its frame.
    Crops(CropsArgs),
    /// Cluster ground-truth box shapes into anchor sizes.
    Anchors(AnchorsArgs),
    /// Train the damaged-sign classifier on labeled crops.
    Train(TrainArgs),
    /// Print "path probability verdict" for each image.
    Predict(PredictArgs),
    /// Classify sign detections, geotag everything and write the anomaly report.
    Anomalies(AnomaliesArgs),
    /// Serve the labeling and review HTTP API.
    Serve(ServeArgs),
    /// Label unlabeled crops from the terminal.
    Label(LabelArgs),
}

#[derive(Debug, Args)]
struct EvalArgs {
    /// Ground-truth directory, one `<frame>.txt` per frame.
    #[arg(long)]
    gt: PathBuf,
    /// Prediction directory; a missing file means no predictions.
    #[arg(long)]
    pred: PathBuf,
    /// Confidence cut for precision, recall and the TP/FP/FN counts.
    #[arg(long, default_value_t = 0.25)]
    conf: f64,
    /// Where to write the JSON report.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Debug, Args)]
struct CropsArgs {
    /// Frame manifest CSV (frame,timestamp_ms).
    #[arg(long)]
    manifest: PathBuf,
    /// Prediction directory.
    #[arg(long)]
    pred: PathBuf,
    /// Output directory for `<crop_id>.ppm` and crops.csv.
    #[arg(long)]
    out: PathBuf,
    /// Minimum detection confidence.
    #[arg(long, default_value_t = 0.25)]
    conf: f64,
    /// Each side is pushed out by this fraction of the box side.
    #[arg(long, default_value_t = 0.10)]
    margin: f64,
    /// Only crop these classes (comma separated); all classes when omitted.
    #[arg(long, value_delimiter = ',')]
    classes: Vec<u32>,
}

#[derive(Debug, Args)]
struct AnchorsArgs {
    /// Ground-truth directory.
    #[arg(long)]
    gt: PathBuf,
    /// Number of anchors.
    #[arg(long)]
    k: usize,
    /// Iteration cap for k-means.
    #[arg(long, default_value_t = roadwatch_core::detections::DEFAULT_MAX_ITERS)]
    max_iters: usize,
}

#[derive(Debug, Args)]
struct TrainArgs {
    /// Crop directory written by `crops` (holds crops.csv).
    #[arg(long)]
    data: PathBuf,
    /// Labels CSV.
    #[arg(long)]
    labels: PathBuf,
    /// Training config (`key = value` lines, `preset = tiny` allowed).
    #[arg(long)]
    config: PathBuf,
    /// Model file to write.
    #[arg(long)]
    out: PathBuf,
    /// History CSV; defaults to `<OUT>.history.csv`.
    #[arg(long)]
    history: Option<PathBuf>,
    /// Seed for the split, init, shuffling, augmentation and dropout;
    /// overrides the config's seed (which defaults to 42).
    #[arg(long)]
    seed: Option<u64>,
}

#[derive(Debug, Args)]
struct PredictArgs {
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// Binary PPM images.
    #[arg(long, num_args = 1.., required = true)]
    input: Vec<PathBuf>,
    /// Verdict threshold; defaults to the one the model was trained with.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct AnomaliesArgs {
    /// Frame manifest CSV.
    #[arg(long)]
    manifest: PathBuf,
    /// Prediction directory.
    #[arg(long)]
    pred: PathBuf,
    /// Model file written by `train`.
    #[arg(long)]
    model: PathBuf,
    /// GPS track CSV (t_ms,lat,lon).
    #[arg(long)]
    gps: PathBuf,
    /// Anomaly file to write.
    #[arg(long)]
    out: PathBuf,
    /// Detection classes that are road signs (comma separated).
    #[arg(long, value_delimiter = ',', default_value = "0")]
    sign_classes: Vec<u32>,
    /// Minimum confidence for sign crops and road-damage records.
    #[arg(long, default_value_t = 0.25)]
    conf: f64,
    /// Crop margin, as for `crops`.
    #[arg(long, default_value_t = 0.10)]
    margin: f64,
    /// Damaged-sign probability threshold; defaults to the model's.
    #[arg(long)]
    threshold: Option<f64>,
}

#[derive(Debug, Args)]
struct ServeArgs {
    /// Service root: crops/ (from `crops`), labels.csv, anomalies.txt.
    #[arg(long)]
    root: PathBuf,
    /// TCP port.
    #[arg(long, default_value_t = 8080)]
    port: u16,
    /// Bind address.
    #[arg(long, default_value = "127.0.0.1")]
    host: std::net::IpAddr,
}

#[derive(Debug, Args)]
struct LabelArgs {
    /// Crop directory written by `crops`.
    #[arg(long)]
    data: PathBuf,
    /// Labels CSV, appended to.
    #[arg(long)]
    labels: PathBuf,
    /// Name stored with every label.
    #[arg(long, default_value = "terminal")]
    annotator: String,
}

/// A failed command: usage errors exit 2, everything else 1.
#[derive(Debug)]
pub enum Failure {
    Usage(String),
    Op(String),
}

impl<E: std::fmt::Display> From<E> for Failure {
    fn from(e: E) -> Self {
        Failure::Op(e.to_string())
    }
}

fn classes(v: &[u32]) -> BTreeSet<u32> {
    v.iter().copied().collect()
}

fn run(cli: Cli) -> Result<(), Failure> {
    match cli.command {
        Command::Eval(a) => commands::eval(&a.gt, &a.pred, a.conf, &a.out),
        Command::Crops(a) => {
            let set = (!a.classes.is_empty()).then(|| classes(&a.classes));
            commands::crops(&a.manifest, &a.pred, &a.out, a.conf, a.margin, set.as_ref())
        }
        Command::Anchors(a) => commands::anchors(&a.gt, a.k, a.max_iters),
        Command::Train(a) => {
            let history = a.history.unwrap_or_else(|| {
                let mut s = a.out.clone().into_os_string();
                s.push(".history.csv");
                s.into()
            });
            commands::train(&a.data, &a.labels, &a.config, &a.out, &history, a.seed)
        }
        Command::Predict(a) => commands::predict(&a.model, &a.input, a.threshold),
        Command::Anomalies(a) => commands::anomalies(&commands::AnomalyJob {
            manifest: &a.manifest,
            pred: &a.pred,
            model: &a.model,
            gps: &a.gps,
            out: &a.out,
            sign_classes: classes(&a.sign_classes),
            conf: a.conf,
            margin: a.margin,
            threshold: a.threshold,
        }),
        Command::Serve(a) => commands::serve(&a.root, SocketAddr::new(a.host, a.port)),
        Command::Label(a) => commands::label(&a.data, &a.labels, &a.annotator),
    }
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    match run(cli) {
        Ok(()) => ExitCode::SUCCESS,
        Err(Failure::Usage(msg)) => {
            eprintln!("error: {msg}");
            eprintln!("run with --help for usage");
            ExitCode::from(2)
        }
        Err(Failure::Op(msg)) => {
            eprintln!("error: {msg}");
            ExitCode::from(1)
        }
    }
}
