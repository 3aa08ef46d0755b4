use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};
use nalgebra::DMatrix;

use greedytl::data::{
    load_dataset_csv, load_predictions_csv, load_sources_csv, save_dataset_csv, save_sources_csv,
    synth_transfer_task, SourceEnsemble, SplitCounts, SynthConfig,
};
use greedytl::harness::{
    balanced_accuracy, run_benchmark, timing_profile, ExperimentConfig, Method, TaskSpec,
    TimingConfig,
};
use greedytl::math::DesignMatrix;
use greedytl::oracle::check_norm_bounds;
use greedytl::selector::{greedy_select, SearchStrategy, SelectConfig, TargetModel};
use greedytl::{Error, Result};

#[derive(Parser)]
#[command(
    name = "greedytl",
    version,
    about = "Greedy source and feature selection for transfer learning"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a target model and save it as JSON.
    Fit(FitArgs),
    /// Apply a saved model to a labeled CSV.
    Predict(PredictArgs),
    /// Run the selection and print the chosen columns, weights and diagnostics.
    Select(FitArgs),
    /// Run methods over repeated train/test draws and write a JSON report.
    Benchmark(BenchmarkArgs),
    /// Write a synthetic transfer task as CSV files.
    Synth(SynthCmdArgs),
    /// Time greedytl and greedytl59 over a sweep of candidate counts.
    Timing(TimingArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum Strategy {
    Full,
    Random,
}

#[derive(Args)]
struct SelectArgs {
    /// Selection budget (default: unlimited).
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    #[arg(long, value_enum, default_value_t = Strategy::Full)]
    strategy: Strategy,
    #[arg(long, default_value_t = 59)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
}

impl SelectArgs {
    fn config(&self) -> SelectConfig {
        SelectConfig {
            k: self.k.unwrap_or(usize::MAX),
            lambda: self.lambda,
            delta: self.delta,
            strategy: match self.strategy {
                Strategy::Full => SearchStrategy::Full,
                Strategy::Random => SearchStrategy::Randomized {
                    sample_count: self.samples,
                    seed: self.seed,
                },
            },
        }
    }
}

#[derive(Args)]
struct FitArgs {
    /// Labeled training CSV.
    #[arg(long)]
    data: PathBuf,
    /// Affine source hypotheses CSV.
    #[arg(long, conflicts_with = "preds")]
    sources: Option<PathBuf>,
    /// Precomputed source predictions CSV, row-aligned with --data.
    #[arg(long)]
    preds: Option<PathBuf>,
    #[command(flatten)]
    select: SelectArgs,
    /// Clamp predictions to [-1, 1].
    #[arg(long)]
    truncate: bool,
    /// Output path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct PredictArgs {
    /// Model JSON written by `fit`.
    #[arg(long)]
    model: PathBuf,
    /// Labeled CSV to predict on.
    #[arg(long)]
    data: PathBuf,
    /// Precomputed source predictions, required for models fitted with --preds.
    #[arg(long)]
    preds: Option<PathBuf>,
    /// Output CSV with `prediction,label` columns (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    d: Option<usize>,
    /// Number of sources.
    #[arg(long)]
    n: Option<usize>,
    #[arg(long)]
    n_relevant: Option<usize>,
    #[arg(long)]
    train_pos: Option<usize>,
    #[arg(long)]
    train_neg: Option<usize>,
    #[arg(long)]
    m_test: Option<usize>,
    #[arg(long)]
    noise_std: Option<f64>,
    #[arg(long)]
    max_angle: Option<f64>,
}

impl SynthArgs {
    fn config(&self, seed: u64) -> SynthConfig {
        let d = SynthConfig::default();
        SynthConfig {
            d: self.d.unwrap_or(d.d),
            n: self.n.unwrap_or(d.n),
            n_relevant: self.n_relevant.unwrap_or(d.n_relevant),
            m_train_pos: self.train_pos.unwrap_or(d.m_train_pos),
            m_train_neg: self.train_neg.unwrap_or(d.m_train_neg),
            m_test: self.m_test.unwrap_or(d.m_test),
            noise_std: self.noise_std.unwrap_or(d.noise_std),
            max_angle: self.max_angle.unwrap_or(d.max_angle),
            seed,
        }
    }
}

#[derive(Args)]
struct SynthCmdArgs {
    #[command(flatten)]
    synth: SynthArgs,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output directory for train.csv, test.csv, sources.csv and ground_truth.json.
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct BenchmarkArgs {
    /// Comma-separated method ids (default: all).
    #[arg(long, value_delimiter = ',')]
    methods: Vec<String>,
    #[arg(long)]
    k: Option<usize>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 1e-4)]
    delta: f64,
    #[arg(long, default_value_t = 59)]
    samples: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long, default_value_t = 10)]
    reps: usize,
    /// Standard-normal feature columns appended to every draw.
    #[arg(long, default_value_t = 0)]
    noise_dims: usize,
    /// Compare greedytl with exhaustive search when --k makes it feasible.
    #[arg(long)]
    bound_check: bool,
    /// Labeled pool CSV; repetitions draw stratified train/test splits from it.
    #[arg(long)]
    data: Option<PathBuf>,
    #[arg(long, conflicts_with = "preds", requires = "data")]
    sources: Option<PathBuf>,
    #[arg(long, requires = "data")]
    preds: Option<PathBuf>,
    /// Test positives per draw from --data.
    #[arg(long, default_value_t = 50)]
    test_pos: usize,
    /// Test negatives per draw from --data.
    #[arg(long, default_value_t = 50)]
    test_neg: usize,
    #[command(flatten)]
    synth: SynthArgs,
    /// Report JSON path (stdout when omitted).
    #[arg(long)]
    out: Option<PathBuf>,
    /// Also write a per-method summary CSV.
    #[arg(long)]
    csv: Option<PathBuf>,
}

#[derive(Args)]
struct TimingArgs {
    #[arg(long, default_value_t = 20)]
    m: usize,
    #[arg(long, default_value_t = 10)]
    k: usize,
    /// Comma-separated candidate counts.
    #[arg(long, value_delimiter = ',', default_values_t = [500, 5000])]
    ps: Vec<usize>,
    #[arg(long, default_value_t = 1.0)]
    lambda: f64,
    #[arg(long, default_value_t = 59)]
    samples: usize,
    #[arg(long, default_value_t = 5)]
    repeats: usize,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    #[arg(long)]
    out: Option<PathBuf>,
}

fn emit(out: Option<&Path>, text: &str) -> Result<()> {
    match out {
        Some(path) => fs::write(path, text)?,
        None => print!("{text}"),
    }
    Ok(())
}

fn load_sources(
    sources: Option<&Path>,
    preds: Option<&Path>,
    x: &DMatrix<f64>,
) -> Result<(Option<SourceEnsemble>, DMatrix<f64>)> {
    match (sources, preds) {
        (Some(path), _) => {
            let s = load_sources_csv(path)?;
            if s.dim() > x.ncols() {
                return Err(Error::Dimension(format!(
                    "sources read {} features, data has {}",
                    s.dim(),
                    x.ncols()
                )));
            }
            let h = s.apply(&x.columns(0, s.dim()).into_owned())?;
            Ok((Some(s), h))
        }
        (None, Some(path)) => {
            let p = load_predictions_csv(path)?;
            if p.m() != x.nrows() {
                return Err(Error::Dimension(format!(
                    "predictions file has {} rows, data has {}",
                    p.m(),
                    x.nrows()
                )));
            }
            Ok((None, p.x))
        }
        (None, None) => Ok((None, DMatrix::zeros(x.nrows(), 0))),
    }
}

fn fit(args: &FitArgs, save_model: bool) -> Result<()> {
    let data = load_dataset_csv(&args.data)?;
    let (sources, h) = load_sources(args.sources.as_deref(), args.preds.as_deref(), &data.x)?;
    let design = DesignMatrix::assemble(&data.x, &h, &data.y)?;
    let selection = greedy_select(&design, &args.select.config())?;
    eprintln!(
        "selected {} of {} columns ({:?}), training regularized accuracy {:.6}",
        selection.support.len(),
        design.p(),
        selection.stop_reason,
        selection.accuracy(design.m())
    );
    if save_model {
        let model = TargetModel::new(&design, selection, sources, args.truncate)?;
        return emit(args.out.as_deref(), &serde_json::to_string_pretty(&model)?);
    }
    let diagnostics = check_norm_bounds(&selection, &design, &h)?;
    let selected: Vec<_> = selection
        .weights
        .entries()
        .iter()
        .map(|&(j, w)| {
            serde_json::json!({
                "column": j,
                "origin": design.origin()[j],
                "name": column_name(&data.feature_names, sources.as_ref(), design.raw_index()[j], design.n_features()),
                "weight": w,
            })
        })
        .collect();
    let out = serde_json::json!({
        "selected": selected,
        "score_trace": selection.score_trace,
        "stop_reason": selection.stop_reason,
        "forgone_gain": selection.forgone_gain,
        "dropped_columns": design.scaler().dropped(),
        "diagnostics": diagnostics,
    });
    emit(
        args.out.as_deref(),
        &(serde_json::to_string_pretty(&out)? + "\n"),
    )
}

fn column_name(
    features: &[String],
    sources: Option<&SourceEnsemble>,
    raw: usize,
    d: usize,
) -> String {
    if raw < d {
        return features
            .get(raw)
            .cloned()
            .unwrap_or_else(|| format!("x{raw}"));
    }
    let j = raw - d;
    sources
        .and_then(|s| s.hypotheses().get(j))
        .map_or_else(|| format!("source{j}"), |h| h.name.clone())
}

fn predict(args: &PredictArgs) -> Result<()> {
    let model: TargetModel = serde_json::from_str(&fs::read_to_string(&args.model)?)?;
    let data = load_dataset_csv(&args.data)?;
    let preds = match &args.preds {
        Some(path) => Some(load_predictions_csv(path)?.x),
        None => None,
    };
    let scores = model.predict_matrix(&data.x, preds.as_ref())?;
    let mut text = String::from("prediction,label\n");
    for (s, y) in scores.iter().zip(&data.y) {
        text.push_str(&format!("{s},{y}\n"));
    }
    emit(args.out.as_deref(), &text)?;
    match balanced_accuracy(&scores, &data.y) {
        Ok(acc) => eprintln!("balanced accuracy {acc:.6}"),
        Err(e) => eprintln!("{e}"),
    }
    Ok(())
}

fn synth(args: &SynthCmdArgs) -> Result<()> {
    let task = synth_transfer_task(&args.synth.config(args.seed))?;
    fs::create_dir_all(&args.out)?;
    save_dataset_csv(args.out.join("train.csv"), &task.train)?;
    save_dataset_csv(args.out.join("test.csv"), &task.test)?;
    save_sources_csv(args.out.join("sources.csv"), &task.sources)?;
    fs::write(
        args.out.join("ground_truth.json"),
        serde_json::to_string_pretty(&task.ground_truth)? + "\n",
    )?;
    eprintln!(
        "wrote {} training and {} test rows, {} sources to {}",
        task.train.m(),
        task.test.m(),
        task.sources.len(),
        args.out.display()
    );
    Ok(())
}

fn benchmark(args: &BenchmarkArgs) -> Result<()> {
    let methods = if args.methods.is_empty() {
        Method::ALL.to_vec()
    } else {
        args.methods
            .iter()
            .map(|s| s.parse())
            .collect::<Result<_>>()?
    };
    let task = match &args.data {
        Some(data) => {
            let defaults = SynthConfig::default();
            TaskSpec::Files {
                data: data.clone(),
                sources: args.sources.clone(),
                preds: args.preds.clone(),
                split: SplitCounts {
                    train_pos: args.synth.train_pos.unwrap_or(defaults.m_train_pos),
                    train_neg: args.synth.train_neg.unwrap_or(defaults.m_train_neg),
                    test_pos: args.test_pos,
                    test_neg: args.test_neg,
                },
            }
        }
        None => TaskSpec::Synth(args.synth.config(args.seed)),
    };
    let config = ExperimentConfig {
        methods,
        k: args.k,
        lambda: args.lambda,
        delta: args.delta,
        samples: args.samples,
        seed: args.seed,
        reps: args.reps,
        noise_dims: args.noise_dims,
        bound_check: args.bound_check,
        task,
    };
    let report = run_benchmark(&config)?;
    for s in &report.methods {
        let flag = if s.non_comparable {
            " (uses test labels)"
        } else {
            ""
        };
        match (s.mean, s.std) {
            (Some(m), Some(sd)) => eprintln!(
                "{:<13} {:.4} ± {:.4}  failed {}{flag}",
                s.method.id(),
                m,
                sd,
                s.failed
            ),
            _ => eprintln!("{:<13} no successful runs{flag}", s.method.id()),
        }
    }
    if let Some(path) = &args.csv {
        fs::write(path, report.summary_csv())?;
    }
    emit(args.out.as_deref(), &(report.to_json()? + "\n"))
}

fn timing(args: &TimingArgs) -> Result<()> {
    let record = timing_profile(&TimingConfig {
        m: args.m,
        k: args.k,
        ps: args.ps.clone(),
        lambda: args.lambda,
        samples: args.samples,
        repeats: args.repeats,
        seed: args.seed,
        ..Default::default()
    })?;
    for s in &record.slopes {
        eprintln!(
            "{:<11} ratio {:.2}  slope {:.3e} s/candidate",
            s.method.id(),
            s.ratio,
            s.seconds_per_candidate
        );
    }
    emit(
        args.out.as_deref(),
        &(serde_json::to_string_pretty(&record)? + "\n"),
    )
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Fit(a) => fit(a, true),
        Command::Select(a) => fit(a, false),
        Command::Predict(a) => predict(a),
        Command::Benchmark(a) => benchmark(a),
        Command::Synth(a) => synth(a),
        Command::Timing(a) => timing(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(e.exit_code() as u8)
        }
    }
}
