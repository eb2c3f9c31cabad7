use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::error::ErrorKind;
use clap::{Args, Parser, Subcommand, ValueEnum};

use pointresolve::caption::{Lexicon, Policy};
use pointresolve::eval::{format_table, run_experiment, ExperimentOptions};
use pointresolve::gesture::{train_classifier, CaptionCheck, TrainConfig};
use pointresolve::synth::{generate, write_dataset, Preset, SynthConfig};
use pointresolve::{
    load_manifest, load_scene, resolve_scene, ClassifierModel, Error, FeatureMode, GeometryMode,
    ResolveOptions, Result,
};

#[derive(Parser)]
#[command(
    name = "pointresolve",
    version,
    about = "Resolve which detected object a person is pointing at"
)]
#[command(arg_required_else_help = true)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Resolve the pointing target of one scene and print the result as JSON.
    Resolve(ResolveArgs),
    /// Train the is-pointing classifier on the train split of a manifest.
    Train(TrainArgs),
    /// Evaluate a model on the test split of a manifest.
    Evaluate(EvaluateArgs),
    /// Generate a synthetic dataset with exact ground truth.
    Synth(SynthArgs),
}

#[derive(Clone, Copy, PartialEq, Eq, ValueEnum)]
enum Toggle {
    On,
    Off,
}

#[derive(Args)]
struct CaptionArgs {
    /// Reconcile the chosen label against the scene caption.
    #[arg(long, value_enum, default_value = "off")]
    captions: Toggle,
    /// Lexicon JSON; defaults to the built-in lexicon.
    #[arg(long, env = "POINTRESOLVE_LEXICON")]
    lexicon: Option<PathBuf>,
    /// override or flag-only
    #[arg(long, default_value = "override")]
    policy: Policy,
}

impl CaptionArgs {
    fn load(&self) -> Result<Option<(Lexicon, Policy)>> {
        if self.captions == Toggle::Off {
            return Ok(None);
        }
        let lexicon = match &self.lexicon {
            Some(path) => Lexicon::load(path)?,
            None => Lexicon::builtin(),
        };
        Ok(Some((lexicon, self.policy)))
    }
}

#[derive(Args)]
struct ResolveArgs {
    #[arg(long)]
    scene: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// 2d or 3d
    #[arg(long)]
    mode: GeometryMode,
    /// Minimum cosine score for a target to be reported.
    #[arg(long)]
    min_score: Option<f64>,
    #[command(flatten)]
    captions: CaptionArgs,
}

#[derive(Args)]
struct TrainArgs {
    #[arg(long)]
    manifest: PathBuf,
    /// kponly or full
    #[arg(long)]
    features: FeatureMode,
    /// 2d or 3d
    #[arg(long)]
    mode: GeometryMode,
    #[arg(long)]
    out: PathBuf,
    #[arg(long, default_value_t = TrainConfig::default().iterations)]
    iterations: usize,
    #[arg(long, default_value_t = TrainConfig::default().learning_rate)]
    lr: f64,
    #[arg(long, default_value_t = TrainConfig::default().l2)]
    l2: f64,
}

#[derive(Args)]
struct EvaluateArgs {
    #[arg(long)]
    manifest: PathBuf,
    #[arg(long)]
    model: PathBuf,
    /// 2d or 3d
    #[arg(long)]
    mode: GeometryMode,
    /// Where to write the JSON report (also printed to stdout).
    #[arg(long)]
    report: Option<PathBuf>,
    #[arg(long)]
    min_score: Option<f64>,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
    #[command(flatten)]
    captions: CaptionArgs,
}

#[derive(Args)]
struct SynthArgs {
    /// easy, hard, neutral, both-arms or mixed
    #[arg(long)]
    preset: Preset,
    #[arg(long)]
    count: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: PathBuf,
    /// Keypoint noise standard deviation in pixels.
    #[arg(long, default_value_t = 0.0)]
    keypoint_noise: f64,
    /// Relative depth noise standard deviation.
    #[arg(long, default_value_t = 0.0)]
    depth_noise: f64,
    /// Fraction of scenes assigned to the train split.
    #[arg(long, default_value_t = 0.0)]
    train_fraction: f64,
    #[arg(long, default_value_t = 0.0)]
    mislabel_rate: f64,
    #[arg(long, default_value_t = 1)]
    jobs: usize,
}

fn load_model(path: &Path, mode: GeometryMode) -> Result<ClassifierModel> {
    let model = ClassifierModel::load(path)?;
    match model.geometry {
        Some(trained) if trained != mode => Err(Error::Validation(format!(
            "model was trained in {trained} mode but --mode is {mode}"
        ))),
        _ => Ok(model),
    }
}

fn to_json<T: serde::Serialize>(value: &T) -> String {
    serde_json::to_string_pretty(value).expect("plain data serializes")
}

fn write_text(path: &Path, text: &str) -> Result<()> {
    std::fs::write(path, text).map_err(|source| Error::Io {
        path: path.to_path_buf(),
        source,
    })
}

fn resolve(args: ResolveArgs) -> Result<()> {
    let scene = load_scene(&args.scene)?;
    let model = load_model(&args.model, args.mode)?;
    let captions = args.captions.load()?;
    let options = ResolveOptions {
        geometry: args.mode,
        min_score: args.min_score,
        captions: captions.as_ref().map(|(lexicon, policy)| CaptionCheck {
            lexicon,
            policy: *policy,
        }),
    };
    let result = resolve_scene(&scene, &model, &options)?;
    println!("{}", to_json(&result));
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let config = TrainConfig {
        iterations: args.iterations,
        learning_rate: args.lr,
        l2: args.l2,
    };
    let model = train_classifier(&manifest, args.features, args.mode, &config)?;
    model.save(&args.out)?;
    eprintln!("wrote {}", args.out.display());
    Ok(())
}

fn evaluate(args: EvaluateArgs) -> Result<()> {
    let manifest = load_manifest(&args.manifest)?;
    let model = load_model(&args.model, args.mode)?;
    let options = ExperimentOptions {
        geometry: args.mode,
        min_score: args.min_score,
        captions: args.captions.load()?,
        jobs: args.jobs,
    };
    let outcome = run_experiment(&manifest, &model, &options)?;
    let json = to_json(&outcome.reports);
    if let Some(path) = &args.report {
        write_text(path, &format!("{json}\n"))?;
    }
    println!("{json}");
    eprint!("{}", format_table(&outcome.reports));
    Ok(())
}

fn synth(args: SynthArgs) -> Result<()> {
    let mut config = SynthConfig::new(args.preset, args.count, args.seed)
        .with_noise(args.keypoint_noise, args.depth_noise);
    config.train_fraction = args.train_fraction;
    config.mislabel_rate = args.mislabel_rate;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(args.jobs.max(1))
        .build()
        .map_err(|e| Error::Validation(format!("thread pool: {e}")))?;
    let output = pool.install(|| generate(&config))?;
    let manifest = write_dataset(&output, &args.out)?;
    eprintln!(
        "wrote {} scenes and {}",
        output.scenes.len(),
        manifest.display()
    );
    Ok(())
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(cli) => cli,
        Err(e) => {
            let code = match e.kind() {
                ErrorKind::DisplayHelp | ErrorKind::DisplayVersion => 0,
                _ => 1,
            };
            let _ = e.print();
            return ExitCode::from(code);
        }
    };
    let result = match cli.command {
        Command::Resolve(args) => resolve(args),
        Command::Train(args) => train(args),
        Command::Evaluate(args) => evaluate(args),
        Command::Synth(args) => synth(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_io() { 2 } else { 1 })
        }
    }
}
