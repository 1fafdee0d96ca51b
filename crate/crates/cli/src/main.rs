//! `textloc`: localize text in videos and still images, evaluate
//! detections against ground truth, and generate synthetic corpora.

use std::path::PathBuf;
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use textloc_core::corpus::{self, CorpusSpec};
use textloc_core::error::Error;
use textloc_core::eval::{evaluate, import_icdar_ground_truth, read_frame_boxes_jsonl};
use textloc_core::pipeline::{run_image, run_video, PipelineConfig};
use textloc_core::SourceKind;

#[derive(Parser)]
#[command(
    name = "textloc",
    about = "Video and still-image text localization",
    version
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the localization pipeline on a video or image.
    Run(RunArgs),
    /// Score predictions against ground truth at the block level.
    Eval(EvalArgs),
    /// Generate a deterministic synthetic corpus.
    Gen(GenArgs),
    /// Convert ICDAR-2003-style XML ground truth to JSONL.
    Import(ImportArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Mode {
    Video,
    Image,
}

#[derive(Args)]
struct RunArgs {
    /// Input: image file, directory of frames, or .y4m stream.
    #[arg(long)]
    input: PathBuf,
    /// Source handling; video reads a sequence or stream, image a
    /// single file.
    #[arg(long, value_enum, default_value = "video")]
    mode: Mode,
    /// Flat key=value config file; CLI flags override its entries.
    #[arg(long)]
    config: Option<PathBuf>,
    /// Directory for annotated frames, box sidecars, pred.jsonl and
    /// report.json.
    #[arg(long)]
    output_dir: PathBuf,

    /// Cut threshold: a number, "auto", or "auto:k".
    #[arg(long)]
    cut_threshold: Option<String>,
    /// Moments per color component (H).
    #[arg(long)]
    moments: Option<String>,
    /// Component weights as "a,b,c".
    #[arg(long)]
    weights: Option<String>,
    /// Distance exponent q.
    #[arg(long)]
    distance_q: Option<String>,
    /// Luminance bins for the TMOF reference frame.
    #[arg(long)]
    tmof_bins: Option<String>,
    /// Keyframe selection: peaks or middle.
    #[arg(long)]
    keyframe_mode: Option<String>,
    /// Wavelet family: haar or db2.
    #[arg(long)]
    wavelet: Option<String>,
    /// Decomposition levels.
    #[arg(long)]
    levels: Option<String>,
    /// MGD window width (odd).
    #[arg(long)]
    mgd_window: Option<String>,
    /// Rule thresholds: "auto" or "t1,t2".
    #[arg(long)]
    rule_thresholds: Option<String>,
    /// Dilation structuring element as WxH (odd dims).
    #[arg(long)]
    dilate_se: Option<String>,
    /// Height floor for accepted boxes.
    #[arg(long)]
    min_height: Option<String>,
    /// Height ceiling for accepted boxes.
    #[arg(long)]
    max_height: Option<String>,
    /// Width floor for accepted boxes.
    #[arg(long)]
    min_width: Option<String>,
    /// Area floor for accepted boxes.
    #[arg(long)]
    min_area: Option<String>,
    /// Overlap fraction for evaluation matching.
    #[arg(long)]
    overlap_min: Option<String>,
    /// Dump the inter-frame distance series as distances.csv.
    #[arg(long)]
    dump_distances: bool,
    /// Dump per-keyframe subband grids as PNG.
    #[arg(long)]
    dump_subbands: bool,
    /// Dump per-keyframe MGD maps as PNG.
    #[arg(long)]
    dump_mgd: bool,
}

#[derive(Args)]
struct EvalArgs {
    /// Predictions JSONL (one frame per line).
    #[arg(long)]
    pred: PathBuf,
    /// Ground-truth JSONL.
    #[arg(long)]
    gt: PathBuf,
    /// Minimum overlap fraction for a true detection.
    #[arg(long, default_value_t = 0.1)]
    overlap: f64,
    /// Write the aggregate report JSON here.
    #[arg(long)]
    report: Option<PathBuf>,
}

#[derive(Args)]
struct GenArgs {
    /// Corpus spec JSON.
    #[arg(long)]
    spec: PathBuf,
    /// Output directory.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ImportArgs {
    /// ICDAR-style XML file with taggedRectangle ground truth.
    #[arg(long)]
    xml: PathBuf,
    /// Destination JSONL path.
    #[arg(long)]
    out: PathBuf,
}

fn exit_code_for(err: &Error) -> u8 {
    match err.root() {
        Error::Config(_) | Error::Domain(_) => 2,
        Error::Io { .. } | Error::Format(_) => 3,
        Error::Stage { .. } => 2,
    }
}

fn run(args: &RunArgs) -> Result<(), Error> {
    let mut config = PipelineConfig::default();
    let mut config_file_text = None;
    if let Some(path) = &args.config {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        config.apply_file(&text)?;
        config_file_text = Some(text);
    }
    let overrides: [(&str, &Option<String>); 16] = [
        ("cut_threshold", &args.cut_threshold),
        ("moments", &args.moments),
        ("weights", &args.weights),
        ("distance_q", &args.distance_q),
        ("tmof_bins", &args.tmof_bins),
        ("keyframe_mode", &args.keyframe_mode),
        ("wavelet", &args.wavelet),
        ("levels", &args.levels),
        ("mgd_window", &args.mgd_window),
        ("rule_thresholds", &args.rule_thresholds),
        ("dilate_se", &args.dilate_se),
        ("min_height", &args.min_height),
        ("max_height", &args.max_height),
        ("min_width", &args.min_width),
        ("min_area", &args.min_area),
        ("overlap_min", &args.overlap_min),
    ];
    for (key, value) in overrides {
        if let Some(v) = value {
            config.apply_kv(key, v)?;
        }
    }
    config.dump_distances |= args.dump_distances;
    config.dump_subbands |= args.dump_subbands;
    config.dump_mgd |= args.dump_mgd;
    config.validate()?;

    let report = match args.mode {
        Mode::Image => {
            let mut r = run_image(&args.input, &config, &args.output_dir)?;
            r.config.file = config_file_text;
            r
        }
        Mode::Video => {
            let kind = match SourceKind::infer(&args.input) {
                SourceKind::Image => SourceKind::ImageSequence,
                k => k,
            };
            let mut r = run_video(&args.input, kind, &config, &args.output_dir)?;
            r.config.file = config_file_text;
            r
        }
    };
    // Rewrite the report with the config file echoed.
    if report.config.file.is_some() {
        let body = serde_json::to_string_pretty(&report)
            .map_err(|e| Error::format(format!("report: {e}")))?;
        let path = args.output_dir.join("report.json");
        std::fs::write(&path, body).map_err(|e| Error::io(&path, e))?;
    }

    let n_boxes: usize = report.keyframes.iter().map(|k| k.boxes.len()).sum();
    println!(
        "{}: {} frame(s), {} cut(s), {} keyframe(s), {} box(es) -> {}",
        report.mode,
        report.n_frames,
        report.cuts.len(),
        report.keyframes.len(),
        n_boxes,
        args.output_dir.display()
    );
    Ok(())
}

fn eval(args: &EvalArgs) -> Result<(), Error> {
    let predictions = read_frame_boxes_jsonl(&args.pred)?;
    let truths = read_frame_boxes_jsonl(&args.gt)?;
    let (overall, per_frame) = evaluate(&predictions, &truths, args.overlap)?;
    let table = overall.to_table_json();
    println!("{}", serde_json::to_string_pretty(&table).expect("table json"));
    if let Some(path) = &args.report {
        let body = serde_json::json!({
            "overall": table,
            "frames": per_frame
                .iter()
                .map(|(id, r)| serde_json::json!({
                    "frame": id.to_string(),
                    "report": r.to_table_json(),
                }))
                .collect::<Vec<_>>(),
        });
        let text =
            serde_json::to_string_pretty(&body).map_err(|e| Error::format(format!("report: {e}")))?;
        std::fs::write(path, text).map_err(|e| Error::io(path, e))?;
    }
    Ok(())
}

fn gen(args: &GenArgs) -> Result<(), Error> {
    let text = std::fs::read_to_string(&args.spec).map_err(|e| Error::io(&args.spec, e))?;
    let spec = CorpusSpec::from_json(&text)?;
    let files = corpus::generate(&spec, &args.out)?;
    println!(
        "{} frame(s) -> {} (gt: {}, cuts: {})",
        files.n_frames,
        files.frames_dir.display(),
        files.ground_truth.display(),
        files.cuts.display()
    );
    Ok(())
}

fn import(args: &ImportArgs) -> Result<(), Error> {
    let xml = std::fs::read_to_string(&args.xml).map_err(|e| Error::io(&args.xml, e))?;
    let truths = import_icdar_ground_truth(&xml)?;
    let mut body = String::new();
    for gt in &truths {
        let boxes: Vec<[usize; 4]> = gt.boxes.iter().map(|b| [b.x, b.y, b.w, b.h]).collect();
        body.push_str(
            &serde_json::to_string(&serde_json::json!({
                "frame": gt.frame,
                "boxes": boxes,
            }))
            .expect("jsonl line"),
        );
        body.push('\n');
    }
    std::fs::write(&args.out, body).map_err(|e| Error::io(&args.out, e))?;
    println!("{} image(s) -> {}", truths.len(), args.out.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Run(args) => run(args),
        Command::Eval(args) => eval(args),
        Command::Gen(args) => gen(args),
        Command::Import(args) => import(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(exit_code_for(&e))
        }
    }
}
