use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use refdiff::config::{BiasProfile, Mode, RunConfig};
use refdiff::error::{Error, Result};
use refdiff::evaluation::{emit_report, evaluate_dataset};
use refdiff::fixtures::{gen_dataset, FixtureSpec};
use refdiff::manifest::{Dataset, SampleManifest};
use refdiff::overlay::write_overlay;
use refdiff::pipeline::segment;
use refdiff::refexpr::{resolve_conflicts, DirectionLexicon, DirectionSet};
use refdiff::scoring::build_positional_bias;
use refdiff::tensor::{load_tensor, save_tensor, Tensor};

#[derive(Parser)]
#[command(
    name = "refdiff",
    version,
    about = "Zero-shot referring image segmentation engine"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Select the referring mask for one manifest.
    Segment(SegmentArgs),
    /// Run a dataset and report mIoU / oIoU.
    Evaluate(EvaluateArgs),
    /// Write a synthetic dataset with planted targets.
    GenFixtures(FixtureArgs),
    /// Write the positional bias for a manifest's direction clues.
    EmitPbias(PbiasArgs),
    /// Render a mask over the sample image as binary PPM.
    Overlay(OverlayArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum ModeArg {
    G,
    Gs,
    Ds,
    Full,
}

impl From<ModeArg> for Mode {
    fn from(m: ModeArg) -> Mode {
        match m {
            ModeArg::G => Mode::G,
            ModeArg::Gs => Mode::GS,
            ModeArg::Ds => Mode::DS,
            ModeArg::Full => Mode::FULL,
        }
    }
}

#[derive(Clone, Copy, ValueEnum)]
enum ProfileArg {
    Linear,
    Cosine,
}

#[derive(Args)]
struct ScoringFlags {
    #[arg(long, value_enum)]
    mode: ModeArg,
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long)]
    beta: Option<f64>,
    #[arg(long)]
    epsilon: Option<f64>,
    /// Threshold on quantiles of the correlation map instead of raw values.
    #[arg(long)]
    percentile: bool,
    /// Literal dot product for discriminative scores (no L2 normalization).
    #[arg(long)]
    raw_dot: bool,
}

impl ScoringFlags {
    fn config(&self) -> Result<RunConfig> {
        let mut c = RunConfig::with_mode(self.mode.into());
        if let Some(a) = self.alpha {
            c.alpha = a;
        }
        if let Some(b) = self.beta {
            c.beta = b;
        }
        if let Some(e) = self.epsilon {
            c.epsilon = e;
        }
        if self.percentile {
            c.threshold_mode = refdiff::ThresholdMode::Percentile;
        }
        c.raw_dot = self.raw_dot;
        c.validate()?;
        Ok(c)
    }
}

#[derive(Args)]
struct SegmentArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[command(flatten)]
    scoring: ScoringFlags,
    /// Output mask path (RDTF u8 W×H). Defaults to `selected_mask.rdtf`.
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    dataset: PathBuf,
    #[command(flatten)]
    scoring: ScoringFlags,
    /// Report path; standard output when omitted.
    #[arg(long)]
    report: Option<PathBuf>,
    /// Worker threads; falls back to REFDIFF_THREADS, then 1.
    #[arg(long)]
    jobs: Option<usize>,
}

#[derive(Args)]
struct FixtureArgs {
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = 42)]
    seed: u64,
    #[arg(long, default_value_t = 20)]
    samples: usize,
    #[arg(long, default_value_t = 0.0)]
    noise: f64,
    #[arg(long, default_value_t = 64)]
    width: usize,
    #[arg(long, default_value_t = 64)]
    height: usize,
    #[arg(long, default_value_t = 16)]
    grid_width: usize,
    #[arg(long, default_value_t = 16)]
    grid_height: usize,
    #[arg(long, default_value_t = 6)]
    tokens: usize,
    #[arg(long, default_value_t = 4)]
    heads: usize,
    #[arg(long, default_value_t = 32)]
    dim: usize,
    #[arg(long, default_value_t = 2)]
    distractors: usize,
}

#[derive(Args)]
struct PbiasArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, value_enum, default_value = "linear")]
    profile: ProfileArg,
    /// JSON direction lexicon replacing the built-in table.
    #[arg(long)]
    direction_lexicon_path: Option<PathBuf>,
}

#[derive(Args)]
struct OverlayArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    mask: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

fn jobs_from_env(flag: Option<usize>) -> Result<usize> {
    if let Some(j) = flag {
        return Ok(j.max(1));
    }
    match std::env::var("REFDIFF_THREADS") {
        Ok(v) => v
            .trim()
            .parse::<usize>()
            .map(|j| j.max(1))
            .map_err(|_| Error::InvalidConfig(format!("REFDIFF_THREADS=`{v}` is not a count"))),
        Err(_) => Ok(1),
    }
}

fn fmt_opt(v: Option<f64>) -> serde_json::Value {
    v.map_or(serde_json::Value::Null, |x| serde_json::json!(x))
}

fn run_segment(args: &SegmentArgs) -> Result<()> {
    let config = args.scoring.config()?;
    let manifest = SampleManifest::parse(&args.manifest)?;
    let outcome = segment(&manifest, &config)?;
    let out = args
        .out
        .clone()
        .unwrap_or_else(|| PathBuf::from("selected_mask.rdtf"));
    save_tensor(&Tensor::from(&outcome.selection.selected_mask), &out)?;
    let sel = &outcome.selection;
    let summary = serde_json::json!({
        "mode": config.mode,
        "selected_index": outcome.selected_origin(),
        "s_g": fmt_opt(sel.best_generative()),
        "s_d": fmt_opt(sel.best_discriminative()),
        "s": sel.best_score(),
        "proposals": outcome.proposals.len(),
        "mask_path": out,
    });
    println!("{summary}");
    Ok(())
}

fn run_evaluate(args: &EvaluateArgs) -> Result<()> {
    let config = args.scoring.config()?;
    let jobs = jobs_from_env(args.jobs)?;
    let dataset = Dataset::load(&args.dataset)?;
    let report = evaluate_dataset(&dataset, &config, jobs)?;
    match &args.report {
        Some(p) => {
            emit_report(&report, p)?;
            println!(
                "{}",
                serde_json::json!({"mode": report.mode, "miou": report.miou, "oiou": report.oiou,
                    "samples": report.per_sample.len()})
            );
        }
        None => print!("{}", report.to_json()),
    }
    Ok(())
}

fn run_fixtures(args: &FixtureArgs) -> Result<()> {
    let spec = FixtureSpec {
        seed: args.seed,
        image_width: args.width,
        image_height: args.height,
        grid_width: args.grid_width,
        grid_height: args.grid_height,
        tokens: args.tokens,
        heads: args.heads,
        embedding_dim: args.dim,
        n_samples: args.samples,
        n_distractors: args.distractors,
        noise: args.noise,
    };
    let index = gen_dataset(&spec, &args.out)?;
    println!("{}", index.display());
    Ok(())
}

fn run_pbias(args: &PbiasArgs) -> Result<()> {
    let manifest = SampleManifest::parse(&args.manifest)?;
    let lexicon = match &args.direction_lexicon_path {
        Some(p) => DirectionLexicon::from_json_file(p)?,
        None => DirectionLexicon::default(),
    };
    let directions: DirectionSet = match &manifest.directions {
        Some(d) => resolve_conflicts(d.iter().copied().collect()),
        None => lexicon.detect(&manifest.tokens),
    };
    let profile = match args.profile {
        ProfileArg::Linear => BiasProfile::Linear,
        ProfileArg::Cosine => BiasProfile::Cosine,
    };
    let (w, h) = manifest.dims();
    let bias = build_positional_bias(&directions, w, h, profile);
    save_tensor(&Tensor::from(&bias.0), &args.out)?;
    println!(
        "{}",
        serde_json::json!({"directions": directions, "out": args.out})
    );
    Ok(())
}

fn run_overlay(args: &OverlayArgs) -> Result<()> {
    let manifest = SampleManifest::parse(&args.manifest)?;
    let mask = load_tensor(&args.mask)?.to_mask()?;
    write_overlay(&manifest, &mask, &args.out)
}

fn describe(path: &Path) -> String {
    path.display().to_string()
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Segment(a) => run_segment(a),
        Command::Evaluate(a) => run_evaluate(a),
        Command::GenFixtures(a) => run_fixtures(a),
        Command::EmitPbias(a) => run_pbias(a),
        Command::Overlay(a) => run_overlay(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            let ctx = match &cli.command {
                Command::Segment(a) => describe(&a.manifest),
                Command::Evaluate(a) => describe(&a.dataset),
                Command::GenFixtures(a) => describe(&a.out),
                Command::EmitPbias(a) => describe(&a.manifest),
                Command::Overlay(a) => describe(&a.manifest),
            };
            eprintln!("error[{}]: {e} ({ctx})", e.code());
            ExitCode::from(e.exit_status() as u8)
        }
    }
}
