mod config;
mod report;

use std::fmt;
use std::fs;
use std::io::BufReader;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};

use microhd::data::{load_csv, load_csv_with_classes, load_idx, prepare, Dataset, Splits};
use microhd::model::TrainedModel;
use microhd::model_file::{load_model, save_model};
use microhd::optimizer::{optimize, train_candidate, OptTrace, OptimizerOptions, Workload};
use microhd::Error;

use config::{DataFlags, DataSpec, Format, Manifest, ModelFlags, RunConfig, SearchFlags};
use report::{trace_report, KeyValues};

const EXIT_USAGE: u8 = 2;
const EXIT_DATA: u8 = 3;
const EXIT_INVARIANT: u8 = 4;

#[derive(Debug)]
pub struct CliError {
    code: u8,
    message: String,
}

impl CliError {
    pub fn usage(message: impl Into<String>) -> Self {
        Self { code: EXIT_USAGE, message: message.into() }
    }

    fn data(message: impl Into<String>) -> Self {
        Self { code: EXIT_DATA, message: message.into() }
    }

    fn invariant(message: impl Into<String>) -> Self {
        Self { code: EXIT_INVARIANT, message: message.into() }
    }
}

impl fmt::Display for CliError {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.message)
    }
}

impl From<Error> for CliError {
    fn from(e: Error) -> Self {
        let code = match e {
            Error::InvalidDimension | Error::InvalidBitwidth(_) | Error::InvalidConfig(_) => EXIT_USAGE,
            Error::AccumulatorOverflow | Error::NoActiveClasses | Error::ZeroNorm | Error::OutOfRange { .. } => {
                EXIT_INVARIANT
            }
            _ => EXIT_DATA,
        };
        Self { code, message: e.to_string() }
    }
}

fn io_error(path: &Path, e: std::io::Error) -> CliError {
    CliError::data(format!("{}: {e}", path.display()))
}

#[derive(Parser, Debug)]
#[command(name = "microhd", version, about = "Hyperdimensional classifiers with accuracy-constrained compression")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand, Debug)]
enum Command {
    /// Train a baseline model and report its accuracy and resources.
    Train {
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        model: ModelFlags,
    },
    /// Train a baseline, then shrink d, l and q while accuracy holds.
    Optimize {
        #[command(flatten)]
        data: DataFlags,
        #[command(flatten)]
        model: ModelFlags,
        #[command(flatten)]
        search: SearchFlags,
    },
    /// Score a saved model on the test split of a dataset.
    Evaluate(EvaluateArgs),
    /// Summarize an optimization trace.
    Report {
        /// Trace written by `optimize` (`trace.jsonl`).
        #[arg(long)]
        trace: PathBuf,
        /// Also write `report.csv` here.
        #[arg(long)]
        out: Option<PathBuf>,
    },
}

#[derive(Args, Debug)]
struct EvaluateArgs {
    /// Model file written by `train` or `optimize`.
    #[arg(long)]
    model: PathBuf,
    #[command(flatten)]
    data: DataFlags,
}

fn main() -> ExitCode {
    env_logger::Builder::from_env(env_logger::Env::default().default_filter_or("warn")).init();
    let cli = Cli::parse();
    match run(cli.command) {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.code)
        }
    }
}

fn run(command: Command) -> Result<(), CliError> {
    match command {
        Command::Train { data, model } => {
            let cfg = config::resolve(&data, &model, &SearchFlags::default())?;
            with_threads(cfg.threads, || cmd_train(&cfg))
        }
        Command::Optimize { data, model, search } => {
            let cfg = config::resolve(&data, &model, &search)?;
            with_threads(cfg.threads, || cmd_optimize(&cfg))
        }
        Command::Evaluate(args) => {
            let threads = args.data.threads;
            with_threads(threads, || cmd_evaluate(&args))
        }
        Command::Report { trace, out } => cmd_report(&trace, out.as_deref()),
    }
}

fn with_threads<T>(threads: Option<usize>, f: impl FnOnce() -> Result<T, CliError> + Send) -> Result<T, CliError>
where
    T: Send,
{
    match threads {
        None => f(),
        Some(n) => rayon::ThreadPoolBuilder::new()
            .num_threads(n)
            .build()
            .map_err(|e| CliError::usage(format!("cannot start {n} threads: {e}")))?
            .install(f),
    }
}

const IDX_TRAIN: (&str, &str) = ("train-images-idx3-ubyte", "train-labels-idx1-ubyte");
const IDX_TEST: (&str, &str) = ("t10k-images-idx3-ubyte", "t10k-labels-idx1-ubyte");

fn load_idx_dir(dir: &Path, names: (&str, &str)) -> Result<Dataset, CliError> {
    Ok(load_idx(dir.join(names.0), dir.join(names.1))?)
}

/// Loads the dataset and builds normalized train/eval/test splits.
fn load_splits(spec: &DataSpec, seed: u64) -> Result<Splits, CliError> {
    let (train, test) = match spec.format {
        Format::Csv => {
            let train = load_csv(&spec.dataset, &spec.csv)?;
            let test = match &spec.test {
                Some(p) => Some(load_csv_with_classes(p, &spec.csv, Some(train.classes()))?),
                None => None,
            };
            (train, test)
        }
        Format::Idx => {
            if !spec.dataset.is_dir() {
                return Err(CliError::usage(format!(
                    "idx datasets are directories holding {} and {}",
                    IDX_TRAIN.0, IDX_TRAIN.1
                )));
            }
            let train = load_idx_dir(&spec.dataset, IDX_TRAIN)?;
            let test_dir = spec.test.clone().unwrap_or_else(|| spec.dataset.clone());
            let test = if test_dir.join(IDX_TEST.0).exists() { Some(load_idx_dir(&test_dir, IDX_TEST)?) } else { None };
            (train, test)
        }
    };
    log::info!("loaded {} samples, f={}, c={}", train.len(), train.n_features(), train.n_classes());
    Ok(prepare(&train, test.as_ref(), seed, spec.normalization)?)
}

fn optimizer_options(cfg: &RunConfig) -> OptimizerOptions {
    OptimizerOptions {
        train: cfg.train.clone(),
        threshold: cfg.threshold_percent / 100.0,
        seed: cfg.seed,
        normalization: cfg.data.normalization,
        ..Default::default()
    }
}

fn create_out(dir: &Path) -> Result<(), CliError> {
    fs::create_dir_all(dir).map_err(|e| io_error(dir, e))
}

fn write_file(path: &Path, contents: &str) -> Result<(), CliError> {
    fs::write(path, contents).map_err(|e| io_error(path, e))
}

fn dataset_keys(kv: &mut KeyValues, cfg: &RunConfig, s: &Splits) {
    kv.push("dataset", cfg.data.dataset.display())
        .push("normalization", cfg.data.normalization)
        .push("seed", cfg.seed)
        .push("f", s.train.n_features())
        .push("c", s.train.n_classes())
        .push("train_samples", s.train.len())
        .push("eval_samples", s.eval.len())
        .push("test_samples", s.test.len())
        .push("epochs", cfg.train.epochs)
        .push("lr", cfg.train.lr);
}

fn cmd_train(cfg: &RunConfig) -> Result<(), CliError> {
    let s = load_splits(&cfg.data, cfg.seed)?;
    let config = cfg.baseline(s.train.n_features(), s.train.n_classes());
    config.validate()?;
    let opts = optimizer_options(cfg);
    let candidate = train_candidate(Workload { train: &s.train, eval: &s.eval }, config, &opts)?;
    let model = candidate.model();
    let test_acc = model.evaluate_dataset(&s.test)?;

    let mut kv = KeyValues::default();
    kv.push("command", "train");
    dataset_keys(&mut kv, cfg, &s);
    kv.config("", &config)
        .accuracy("eval_accuracy", candidate.eval_accuracy)
        .accuracy("test_accuracy", test_acc)
        .resources("", &config);
    create_out(&cfg.out)?;
    let model_path = cfg.out.join("model.mhd");
    save_model(model, &model_path)?;
    kv.push("model", model_path.display());
    write_file(&cfg.out.join("report.txt"), &kv.to_string())?;
    print!("{kv}");
    Ok(())
}

fn cmd_optimize(cfg: &RunConfig) -> Result<(), CliError> {
    let s = load_splits(&cfg.data, cfg.seed)?;
    let baseline = cfg.baseline(s.train.n_features(), s.train.n_classes());
    baseline.validate()?;
    let space = if cfg.space == Default::default() { cfg.space.fitted_to(&baseline) } else { cfg.space.clone() };
    space.validate(&baseline)?;
    let opts = optimizer_options(cfg);
    let out = optimize(Workload { train: &s.train, eval: &s.eval }, baseline, &space, &opts)?;

    // The optimizer guarantees these; re-check them on the returned objects.
    let final_eval = out.model.evaluate_dataset(&s.eval)?;
    if final_eval + 1e-12 < out.floor {
        return Err(CliError::invariant(format!(
            "final evaluation accuracy {final_eval:.6} is below the floor {:.6}",
            out.floor
        )));
    }
    if out.trace.records.len() > space.probe_bound(baseline.encoder) {
        return Err(CliError::invariant("probe count exceeds its bound"));
    }

    let base_test = out.baseline_model.evaluate_dataset(&s.test)?;
    let final_test = out.model.evaluate_dataset(&s.test)?;
    let final_config = out.config();
    let factors = microhd::cost::savings(&baseline, &final_config)?;

    let mut kv = KeyValues::default();
    kv.push("command", "optimize");
    dataset_keys(&mut kv, cfg, &s);
    kv.push("threshold_percent", cfg.threshold_percent)
        .config("baseline_", &baseline)
        .config("final_", &final_config)
        .accuracy("baseline_eval_accuracy", out.baseline_accuracy)
        .accuracy("accuracy_floor", out.floor)
        .accuracy("final_eval_accuracy", out.eval_accuracy)
        .accuracy("baseline_test_accuracy", base_test)
        .accuracy("final_test_accuracy", final_test)
        .resources("baseline_", &baseline)
        .resources("final_", &final_config)
        .push("compression_factor", format!("{:.4}", factors.memory_ratio))
        .push("workload_reduction_factor", format!("{:.4}", factors.compute_ratio))
        .push("probes", out.trace.probes())
        .push("accepted_steps", out.trace.accepted_steps().count());

    create_out(&cfg.out)?;
    save_model(&out.baseline_model, cfg.out.join("baseline.mhd"))?;
    let model_path = cfg.out.join("model.mhd");
    save_model(&out.model, &model_path)?;
    let trace_path = cfg.out.join("trace.jsonl");
    let file = fs::File::create(&trace_path).map_err(|e| io_error(&trace_path, e))?;
    out.trace.write_jsonl(std::io::BufWriter::new(file))?;
    kv.push("model", model_path.display()).push("trace", trace_path.display());

    let summary = format!(
        "dataset,encoder,baseline_test_accuracy,final_test_accuracy,d,l,q,baseline_kib,final_kib,compression_factor,workload_reduction_factor\n\
         {},{},{:.4},{:.4},{},{},{},{:.1},{:.1},{:.4},{:.4}\n",
        cfg.data.dataset.display(),
        baseline.encoder,
        100.0 * base_test,
        100.0 * final_test,
        final_config.dims,
        final_config.levels,
        final_config.bitwidth,
        microhd::cost::bits_to_kib(microhd::memory_bits(&baseline)),
        microhd::cost::bits_to_kib(microhd::memory_bits(&final_config)),
        factors.memory_ratio,
        factors.compute_ratio,
    );
    write_file(&cfg.out.join("summary.csv"), &summary)?;
    write_file(&cfg.out.join("report.txt"), &kv.to_string())?;
    print!("{kv}");
    Ok(())
}

fn cmd_evaluate(args: &EvaluateArgs) -> Result<(), CliError> {
    let model: TrainedModel = load_model(&args.model).map_err(|e| match e {
        Error::Io(io) => io_error(&args.model, io),
        other => other.into(),
    })?;
    let manifest = match &args.data.config {
        Some(p) => Manifest::load(p)?,
        None => Manifest::default(),
    };
    let mut spec = config::resolve_data(&args.data, &manifest, model.normalization)?;
    if spec.normalization != model.normalization {
        log::warn!("using the model's normalization ({}) instead of {}", model.normalization, spec.normalization);
        spec.normalization = model.normalization;
    }
    // Same seed, same split: the test set and its normalization match training.
    let s = load_splits(&spec, model.seed)?;
    if s.test.n_features() != model.config.features {
        return Err(CliError::data(format!(
            "model expects {} features, dataset has {}",
            model.config.features,
            s.test.n_features()
        )));
    }
    let acc = model.evaluate_dataset(&s.test)?;
    let mut kv = KeyValues::default();
    kv.push("command", "evaluate")
        .push("model", args.model.display())
        .push("dataset", spec.dataset.display())
        .push("test_samples", s.test.len())
        .config("", &model.config)
        .accuracy("test_accuracy", acc)
        .resources("", &model.config);
    print!("{kv}");
    Ok(())
}

fn cmd_report(trace_path: &Path, out: Option<&Path>) -> Result<(), CliError> {
    let file = fs::File::open(trace_path).map_err(|e| io_error(trace_path, e))?;
    let trace = OptTrace::read_jsonl(BufReader::new(file))?;
    let r = trace_report(&trace);
    log::info!("compression {:.4}, workload reduction {:.4}", r.memory_factor, r.compute_factor);
    print!("{}", r.text);
    println!();
    print!("{}", r.csv);
    if let Some(dir) = out {
        create_out(dir)?;
        write_file(&dir.join("report.csv"), &r.csv)?;
    }
    Ok(())
}
