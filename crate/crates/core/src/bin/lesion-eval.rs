use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use lesion_eval::batch::{evaluate_batch, write_batch_outputs, BatchManifest};
use lesion_eval::morphology::{Connectivity, DilationShape};
use lesion_eval::nifti::save_nifti;
use lesion_eval::overlay::{export_overlay, Axis};
use lesion_eval::phantom::{generate_phantom, PhantomSpec};
use lesion_eval::report::{csv_string, evaluate_scan, scan_id_from_path, to_json, CsvTable};
use lesion_eval::{EvalConfig, Error};

const EXIT_SCAN_ERROR: u8 = 1;
const EXIT_CONFIG_ERROR: u8 = 2;

#[derive(Parser)]
#[command(name = "lesion-eval", version, about = "Voxel-wise and lesion-wise segmentation evaluation")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Evaluate predictions against references.
    #[command(subcommand)]
    Eval(EvalCommand),
    /// Synthetic phantom fixtures.
    #[command(subcommand)]
    Phantom(PhantomCommand),
    /// Render one slice with mask overlays as a PPM image.
    Overlay(OverlayArgs),
}

#[derive(Subcommand)]
enum EvalCommand {
    /// One prediction/reference pair.
    Pair(PairArgs),
    /// Every row of a manifest CSV.
    Batch(BatchArgs),
}

#[derive(Subcommand)]
enum PhantomCommand {
    /// Write gt.nii.gz, pred.nii.gz and expected.json from a JSON spec.
    Generate {
        #[arg(long)]
        spec: PathBuf,
        #[arg(long)]
        out_dir: PathBuf,
    },
}

#[derive(Args)]
struct EvalFlags {
    /// Probability maps are foreground where value >= this.
    #[arg(long, default_value_t = 0.5)]
    prob_threshold: f64,
    /// Lesion dilation radius in voxels before matching.
    #[arg(long, default_value_t = 2)]
    dilation_voxels: usize,
    /// Lesions smaller than this many voxels are ignored.
    #[arg(long, default_value_t = 5)]
    min_lesion_size: usize,
    /// 6, 18 or 26.
    #[arg(long, default_value = "26", value_parser = parse_connectivity)]
    connectivity: Connectivity,
    #[arg(long, default_value_t = 95.0)]
    hd_percentile: f64,
    /// HD (mm) charged for each missed or spurious lesion.
    #[arg(long, default_value_t = 374.0)]
    unmatched_hd_penalty: f64,
    /// chebyshev or euclidean.
    #[arg(long, default_value = "chebyshev")]
    dilation_shape: DilationShape,
}

impl EvalFlags {
    fn config(&self) -> EvalConfig {
        EvalConfig {
            prob_threshold: self.prob_threshold,
            dilation_voxels: self.dilation_voxels,
            min_lesion_size: self.min_lesion_size,
            connectivity: self.connectivity,
            hd_percentile: self.hd_percentile,
            unmatched_hd_penalty: self.unmatched_hd_penalty,
            dilation_shape: self.dilation_shape,
        }
    }
}

fn parse_connectivity(s: &str) -> Result<Connectivity, String> {
    let n: u8 = s.parse().map_err(|_| format!("`{s}` is not 6, 18 or 26"))?;
    Connectivity::try_from(n).map_err(|e| e.to_string())
}

#[derive(Clone, Copy, ValueEnum)]
enum Format {
    Json,
    Csv,
}

#[derive(Args)]
struct PairArgs {
    #[arg(long)]
    pred: PathBuf,
    #[arg(long)]
    gt: PathBuf,
    /// Restrict voxel confusion counts to this mask.
    #[arg(long)]
    brain_mask: Option<PathBuf>,
    /// Defaults to the prediction file name without extension.
    #[arg(long)]
    scan_id: Option<String>,
    #[command(flatten)]
    flags: EvalFlags,
    #[arg(long, value_enum, default_value_t = Format::Json)]
    format: Format,
    /// Write here instead of stdout.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct BatchArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    flags: EvalFlags,
    #[arg(long)]
    out_dir: PathBuf,
}

#[derive(Args)]
struct OverlayArgs {
    #[arg(long)]
    volume: PathBuf,
    #[arg(long = "mask")]
    masks: Vec<PathBuf>,
    #[arg(long, default_value = "z")]
    axis: Axis,
    #[arg(long)]
    slice: usize,
    #[arg(long)]
    out: PathBuf,
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let outcome = match cli.command {
        Command::Eval(EvalCommand::Pair(args)) => run_pair(args),
        Command::Eval(EvalCommand::Batch(args)) => run_batch(args),
        Command::Phantom(PhantomCommand::Generate { spec, out_dir }) => run_phantom(&spec, &out_dir),
        Command::Overlay(args) => export_overlay(&args.volume, &args.masks, args.axis, args.slice, &args.out)
            .map(|()| ExitCode::SUCCESS),
    };
    outcome.unwrap_or_else(|e| {
        eprintln!("error: {e}");
        ExitCode::from(if e.is_config() { EXIT_CONFIG_ERROR } else { EXIT_SCAN_ERROR })
    })
}

fn emit(text: &str, out: Option<&Path>) -> Result<(), Error> {
    match out {
        Some(path) => fs::write(path, text).map_err(|e| Error::io(path, e)),
        None => std::io::stdout()
            .write_all(text.as_bytes())
            .map_err(|e| Error::io("<stdout>", e)),
    }
}

fn run_pair(args: PairArgs) -> Result<ExitCode, Error> {
    let cfg = args.flags.config();
    cfg.validate()?;
    let scan_id = args.scan_id.unwrap_or_else(|| scan_id_from_path(&args.pred));
    let report = evaluate_scan(&scan_id, &args.pred, &args.gt, args.brain_mask.as_deref(), &cfg)?;
    let text = match args.format {
        Format::Json => to_json(&report)?,
        Format::Csv => csv_string(std::slice::from_ref(&report), CsvTable::Combined)?,
    };
    emit(&text, args.out.as_deref())?;
    Ok(ExitCode::SUCCESS)
}

fn run_batch(args: BatchArgs) -> Result<ExitCode, Error> {
    let cfg = args.flags.config();
    let manifest = BatchManifest::from_path(&args.manifest)?;
    let batch = evaluate_batch(&manifest, &cfg, args.jobs)?;
    write_batch_outputs(&batch, &args.out_dir)?;
    for e in &batch.errors {
        eprintln!("scan `{}` failed: {}", e.scan_id, e.message);
    }
    eprintln!(
        "{} of {} scans evaluated; outputs in {}",
        batch.reports.len(),
        manifest.len(),
        args.out_dir.display()
    );
    Ok(if batch.has_errors() {
        ExitCode::from(EXIT_SCAN_ERROR)
    } else {
        ExitCode::SUCCESS
    })
}

fn run_phantom(spec_path: &Path, out_dir: &Path) -> Result<ExitCode, Error> {
    let text = fs::read_to_string(spec_path).map_err(|e| Error::Spec(format!("{}: {e}", spec_path.display())))?;
    let spec: PhantomSpec = serde_json::from_str(&text).map_err(|e| Error::Spec(e.to_string()))?;
    let phantom = generate_phantom(&spec)?;
    fs::create_dir_all(out_dir).map_err(|e| Error::io(out_dir, e))?;
    save_nifti(&phantom.gt, out_dir.join("gt.nii.gz"))?;
    save_nifti(&phantom.pred, out_dir.join("pred.nii.gz"))?;
    emit(&to_json(&phantom.expected)?, Some(&out_dir.join("expected.json")))?;
    Ok(ExitCode::SUCCESS)
}
