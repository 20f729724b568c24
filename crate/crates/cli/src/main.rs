//! Command-line front end for dataset generation, training, evaluation and
//! the scaling sweeps.

use std::fs::{self, File};
use std::io::{BufReader, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Parser, Subcommand, ValueEnum};
use groundstate::harness::{
    self, evaluate, gen_data, scaling_experiment, train_model, Dataset, DatasetConfig, Family, LabelSource, ModelSpec, Sampling, ScalingConfig,
    SystemSpec, TrainSettings, TrainedModel,
};
use groundstate::nn::TrainConfig;
use groundstate::{Error, Result};
use serde::de::DeserializeOwned;

#[derive(Parser)]
#[command(name = "groundstate", version, about = "Learn ground-state properties of parameterized spin models")]
struct Cli {
    /// Worker threads for parallel sections (defaults to all cores).
    #[arg(long, env = "GSL_WORKERS", global = true)]
    workers: Option<usize>,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Solve ground states for sampled couplings and write a labelled dataset.
    GenData(GenArgs),
    /// Fit a model on a range of dataset records.
    Train(TrainArgs),
    /// Report RMSE of a trained model on a range of dataset records.
    Eval(EvalArgs),
    /// Sweep sizes, training-set sizes, delta1 and models from a JSON config.
    Scaling(ScalingArgs),
    /// Star discrepancy of Sobol and uniform points against their bounds.
    QmcDiag(QmcArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum FamilyArg {
    Nearest,
    AllPairs,
}

#[derive(Clone, Copy, ValueEnum)]
enum SamplingArg {
    Sobol,
    Uniform,
}

#[derive(Clone, Copy, ValueEnum)]
enum ModelArg {
    Mean,
    Ridge,
    Lasso,
    Nn,
}

#[derive(clap::Args)]
struct GenArgs {
    /// Full dataset configuration as JSON; overrides the other flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, default_value_t = 2)]
    rows: usize,
    #[arg(long, default_value_t = 3)]
    cols: usize,
    #[arg(long, value_enum, default_value = "nearest")]
    family: FamilyArg,
    #[arg(long, value_enum, default_value = "sobol")]
    sampling: SamplingArg,
    #[arg(short, long, default_value_t = 768)]
    n: usize,
    /// Use classical-shadow labels with this many rounds per record.
    #[arg(long)]
    shadow_rounds: Option<usize>,
    /// Also write the raw shadows next to the dataset.
    #[arg(long)]
    keep_shadows: bool,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct TrainArgs {
    #[arg(long)]
    data: PathBuf,
    /// Training settings as JSON; overrides the model flags.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long, value_enum, default_value = "nn")]
    model: ModelArg,
    #[arg(long, default_value_t = 0.0)]
    delta1: f64,
    /// Grid spacing for the linear models.
    #[arg(long)]
    delta2: Option<f64>,
    /// Fixed regularization for the linear models; cross-validated when absent.
    #[arg(long)]
    reg: Option<f64>,
    #[arg(long)]
    epochs: Option<usize>,
    #[arg(long)]
    width: Option<usize>,
    /// Train each target with its own batch order.
    #[arg(long)]
    independent: bool,
    /// Record range used for training, e.g. `0..512`.
    #[arg(long, value_parser = parse_range)]
    records: std::ops::Range<usize>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct EvalArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    data: PathBuf,
    /// Record range to evaluate, e.g. `512..768`.
    #[arg(long, value_parser = parse_range)]
    records: std::ops::Range<usize>,
    /// Training range; rejected if it overlaps the evaluated range.
    #[arg(long, value_parser = parse_range)]
    train_records: Option<std::ops::Range<usize>>,
}

#[derive(clap::Args)]
struct ScalingArgs {
    #[arg(long)]
    config: PathBuf,
    #[arg(short, long)]
    out: PathBuf,
}

#[derive(clap::Args)]
struct QmcArgs {
    #[arg(long, default_value_t = 2)]
    dim: usize,
    #[arg(long, value_delimiter = ',', default_values_t = [16, 64, 256, 1024])]
    n: Vec<usize>,
    /// Grid cells per axis for the bracket used above dimension 2.
    #[arg(long, default_value_t = 32)]
    resolution: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Failure probability for the random-point bound.
    #[arg(long, default_value_t = 0.05)]
    delta: f64,
}

fn parse_range(s: &str) -> std::result::Result<std::ops::Range<usize>, String> {
    let (a, b) = s.split_once("..").ok_or_else(|| format!("expected START..END, got {s:?}"))?;
    let a: usize = a.parse().map_err(|e| format!("{a:?}: {e}"))?;
    let b: usize = b.parse().map_err(|e| format!("{b:?}: {e}"))?;
    if a >= b {
        return Err(format!("empty range {s}"));
    }
    Ok(a..b)
}

fn read_json<T: DeserializeOwned>(path: &Path) -> Result<T> {
    let file = File::open(path).map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    serde_json::from_reader(BufReader::new(file)).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
}

fn write_json<T: serde::Serialize>(path: &Path, value: &T) -> Result<()> {
    let mut w = BufWriter::new(File::create(path)?);
    serde_json::to_writer(&mut w, value)?;
    writeln!(w)?;
    w.flush()?;
    Ok(())
}

fn gen(args: GenArgs) -> Result<()> {
    let cfg: DatasetConfig = match &args.config {
        Some(p) => read_json(p)?,
        None => DatasetConfig {
            system: SystemSpec {
                rows: args.rows,
                cols: args.cols,
                family: match args.family {
                    FamilyArg::Nearest => Family::Nearest,
                    FamilyArg::AllPairs => Family::AllPairs,
                },
            },
            sampling: match args.sampling {
                SamplingArg::Sobol => Sampling::Sobol,
                SamplingArg::Uniform => Sampling::Uniform { seed: args.seed },
            },
            n_records: args.n,
            labels: match args.shadow_rounds {
                Some(rounds) => LabelSource::Shadow {
                    rounds,
                    seed: args.seed,
                    keep: args.keep_shadows,
                },
                None => LabelSource::Exact,
            },
            solver: Default::default(),
        },
    };
    let s = gen_data(&cfg, &args.out)?;
    eprintln!(
        "wrote {} records to {} (resumed from {})",
        s.completed,
        args.out.display(),
        s.resumed_from
    );
    Ok(())
}

fn train(args: TrainArgs) -> Result<()> {
    let settings: TrainSettings = match &args.config {
        Some(p) => read_json(p)?,
        None => {
            let model = match args.model {
                ModelArg::Mean => ModelSpec::Mean,
                ModelArg::Ridge => ModelSpec::Ridge {
                    delta2: args.delta2.unwrap_or(1.0),
                    lambda: args.reg,
                },
                ModelArg::Lasso => ModelSpec::Lasso {
                    delta2: args.delta2.unwrap_or(0.5),
                    mu: args.reg,
                },
                ModelArg::Nn => {
                    let mut cfg = TrainConfig::default();
                    cfg.epochs = args.epochs.unwrap_or(cfg.epochs);
                    cfg.width = args.width.unwrap_or(cfg.width);
                    ModelSpec::Nn {
                        train: cfg,
                        joint: !args.independent,
                    }
                }
            };
            TrainSettings {
                seed: args.seed,
                ..TrainSettings::new(model, args.delta1)
            }
        }
    };
    let data = Dataset::load(&args.data)?;
    let idx: Vec<usize> = args.records.collect();
    let model = train_model(&data, &idx, &settings)?;
    let ev = evaluate(&model, &data, &idx)?;
    write_json(&args.out, &model)?;
    println!("{}", serde_json::to_string(&ev)?);
    Ok(())
}

fn eval(args: EvalArgs) -> Result<()> {
    let model: TrainedModel = read_json(&args.model)?;
    let data = Dataset::load(&args.data)?;
    let idx: Vec<usize> = args.records.collect();
    if let Some(train) = args.train_records {
        harness::Split::new(train.collect(), idx.clone())?;
    }
    let ev = evaluate(&model, &data, &idx)?;
    println!("{}", serde_json::to_string(&ev)?);
    Ok(())
}

fn scaling(args: ScalingArgs) -> Result<()> {
    let cfg: ScalingConfig = read_json(&args.config)?;
    fs::create_dir_all(&args.out)?;
    let table = scaling_experiment(&cfg, &args.out)?;
    eprintln!("{} result rows in {}", table.rows.len(), args.out.join("results.csv").display());
    Ok(())
}

fn qmc_diag(args: QmcArgs) -> Result<()> {
    let rows = harness::discrepancy_report(args.dim, &args.n, args.resolution, args.seed, args.delta)?;
    let mut out = std::io::stdout().lock();
    writeln!(out, "dim,n,sobol_lower,sobol_upper,sobol_bound,uniform_lower,uniform_upper,uniform_bound")?;
    for r in rows {
        writeln!(
            out,
            "{},{},{},{},{},{},{},{}",
            r.dim, r.n, r.sobol_lower, r.sobol_upper, r.sobol_bound, r.uniform_lower, r.uniform_upper, r.uniform_bound
        )?;
    }
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(n) = cli.workers {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(n).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let result = match cli.command {
        Command::GenData(a) => gen(a),
        Command::Train(a) => train(a),
        Command::Eval(a) => eval(a),
        Command::Scaling(a) => scaling(a),
        Command::QmcDiag(a) => qmc_diag(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(harness::exit_code(&e) as u8)
        }
    }
}
