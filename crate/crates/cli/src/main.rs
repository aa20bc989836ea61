use std::fs::File;
use std::io::{self, BufWriter, Write};
use std::path::{Path, PathBuf};
use std::process::ExitCode;
use std::sync::Arc;
use std::time::Instant;

use clap::builder::TypedValueParser;
use clap::{Args, Parser, Subcommand};
use knnn::data::{load_csv, load_labels, write_column, write_csv, write_labels};
use knnn::eval::{parse_grid, write_sweep_csv, ModelCache};
use knnn::scoring::score_batch;
use knnn::synth::BENCHMARK_MARGIN;
use knnn::{
    auroc, load_model, make_benchmark, render_heatmap, save_model, sweep, BBox, LabeledSet, Method, ModelFile,
    ScoreConfig, Shape, SynthSpec,
};

#[derive(Parser)]
#[command(name = "knnn", version, about = "Nearest-neighbors-of-neighbors anomaly scoring")]
struct Cli {
    /// Worker threads for batch scoring and fitting (default: all cores)
    #[arg(long, global = true)]
    threads: Option<usize>,

    /// Input CSV files start with a header row
    #[arg(long, global = true)]
    header: bool,

    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Fit a model on a training CSV and write it to disk
    Build(BuildArgs),
    /// Score every row of a query CSV
    Score(ScoreArgs),
    /// AUROC of a score column against labels
    Eval(EvalArgs),
    /// Generate a synthetic train/test benchmark
    Synth(SynthArgs),
    /// AUROC for a grid of scorer configurations
    Sweep(SweepArgs),
    /// Evaluate a 2-D model over a grid, writing CSV and PGM
    Heatmap(HeatmapArgs),
}

#[derive(Args)]
struct BuildArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long, default_value = "knnn")]
    method: Method,
    #[arg(long, default_value_t = knnn::scoring::DEFAULT_K, value_parser = clap::value_parser!(u32).range(1..).map(|v| v as usize))]
    k: usize,
    #[arg(long = "k-nnn", default_value_t = knnn::index::DEFAULT_K_NNN)]
    k_nnn: usize,
    /// Features per set (default: min(5, D))
    #[arg(long = "L", value_parser = clap::value_parser!(u32).range(1..).map(|v| v as usize))]
    set_width: Option<usize>,
    /// Eigenpairs kept per set (default: L)
    #[arg(long, value_parser = clap::value_parser!(u32).range(1..).map(|v| v as usize))]
    n: Option<usize>,
    /// Group correlated features into the same set
    #[arg(long)]
    reorder: bool,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct ScoreArgs {
    #[arg(long)]
    model: PathBuf,
    #[arg(long)]
    queries: PathBuf,
    #[arg(long)]
    out: PathBuf,
}

#[derive(Args)]
struct EvalArgs {
    #[arg(long)]
    scores: PathBuf,
    #[arg(long)]
    labels: PathBuf,
}

#[derive(Args)]
struct SynthArgs {
    #[arg(long)]
    shape: Shape,
    #[arg(long = "n-train", default_value_t = 250)]
    n_train: usize,
    #[arg(long = "n-test", default_value_t = 5000)]
    n_test: usize,
    /// Noise std-dev (default depends on the shape)
    #[arg(long)]
    noise: Option<f64>,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Writes <prefix>_train.csv, <prefix>_test.csv and <prefix>_labels.csv
    #[arg(long = "out-prefix")]
    out_prefix: String,
}

#[derive(Args)]
struct SweepArgs {
    #[arg(long)]
    train: PathBuf,
    #[arg(long)]
    test: PathBuf,
    #[arg(long)]
    labels: PathBuf,
    /// e.g. "knn:k=75; knnn:k=3,k_nnn=25"
    #[arg(long)]
    grid: String,
    /// Output CSV (default: stdout)
    #[arg(long)]
    out: Option<PathBuf>,
}

#[derive(Args)]
struct HeatmapArgs {
    #[arg(long)]
    model: PathBuf,
    /// Scorer to render (default: the one stored in the model)
    #[arg(long)]
    method: Option<Method>,
    /// xmin,ymin,xmax,ymax (default: training extent plus margin)
    #[arg(long, allow_hyphen_values = true)]
    bbox: Option<BBox>,
    /// Grid resolution as WxH
    #[arg(long, default_value = "200x200", value_parser = parse_resolution)]
    res: (usize, usize),
    /// Writes <prefix>.csv and <prefix>.pgm
    #[arg(long = "out-prefix")]
    out_prefix: String,
}

fn parse_resolution(s: &str) -> Result<(usize, usize), String> {
    let (w, h) = s.split_once(['x', 'X']).ok_or_else(|| format!("expected WxH, got {s:?}"))?;
    let parse = |v: &str| match v.trim().parse::<usize>() {
        Ok(n) if n > 0 => Ok(n),
        _ => Err(format!("bad resolution component {v:?}")),
    };
    Ok((parse(w)?, parse(h)?))
}

fn with_suffix(prefix: &str, suffix: &str) -> PathBuf {
    PathBuf::from(format!("{prefix}{suffix}"))
}

fn create(path: &Path) -> knnn::Result<BufWriter<File>> {
    Ok(BufWriter::new(File::create(path)?))
}

fn build(args: BuildArgs, header: bool) -> knnn::Result<()> {
    let train = load_csv(&args.train, header)?;
    let config = ScoreConfig {
        method: args.method,
        k: args.k,
        k_nnn: args.k_nnn,
        n: args.n,
        set_width: args.set_width,
        reorder: args.reorder,
    };
    let start = Instant::now();
    let model = ModelCache::new().model_for(&train, &config)?;
    let elapsed = start.elapsed();
    eprintln!(
        "fit {} points in {:.3} s ({:.6} s per point)",
        train.rows(),
        elapsed.as_secs_f64(),
        elapsed.as_secs_f64() / train.rows() as f64
    );
    let file = ModelFile { model: Arc::unwrap_or_clone(model), method: args.method, k: args.k };
    save_model(&file, &args.out)
}

fn score(args: ScoreArgs, header: bool) -> knnn::Result<()> {
    let file = load_model(&args.model)?;
    let queries = load_csv(&args.queries, header)?;
    let start = Instant::now();
    let report = score_batch(&file.model, &queries, &file.config(), false)?;
    let elapsed = start.elapsed();
    eprintln!(
        "scored {} queries, mean latency {:.6} s",
        queries.rows(),
        elapsed.as_secs_f64() / queries.rows() as f64
    );
    write_column(&report.scores, &args.out)
}

fn eval(args: EvalArgs, header: bool) -> knnn::Result<()> {
    let scores = load_csv(&args.scores, header)?;
    if scores.dim() != 1 {
        return Err(knnn::Error::DimensionMismatch { expected: 1, found: scores.dim() });
    }
    let labels = load_labels(&args.labels)?;
    let roc = auroc(scores.as_slice(), &labels)?;
    println!("{:.4}", roc.auroc);
    Ok(())
}

fn synth(args: SynthArgs) -> knnn::Result<()> {
    let mut spec = SynthSpec::new(args.shape, 2 * args.n_train, args.seed);
    if let Some(noise) = args.noise {
        spec = spec.with_noise(noise);
    }
    let (train, test) = make_benchmark(&spec, args.n_train, args.n_test)?;
    write_csv(&train, with_suffix(&args.out_prefix, "_train.csv"))?;
    write_csv(&test.features, with_suffix(&args.out_prefix, "_test.csv"))?;
    write_labels(&test.labels, with_suffix(&args.out_prefix, "_labels.csv"))
}

fn run_sweep(args: SweepArgs, header: bool) -> knnn::Result<()> {
    let train = load_csv(&args.train, header)?;
    let test = LabeledSet::new(load_csv(&args.test, header)?, load_labels(&args.labels)?)?;
    let configs = parse_grid(&args.grid)?;
    let table = sweep(&train, &test, &configs)?;
    match args.out {
        Some(path) => {
            let mut out = create(&path)?;
            write_sweep_csv(&table, &mut out)?;
            out.flush()?;
        }
        None => write_sweep_csv(&table, &mut io::stdout().lock())?,
    }
    Ok(())
}

fn heatmap(args: HeatmapArgs) -> knnn::Result<()> {
    let file = load_model(&args.model)?;
    let mut config = file.config();
    if let Some(method) = args.method {
        config.method = method;
    }
    let bbox = match args.bbox {
        Some(b) => b,
        None => BBox::enclosing(file.model.train())?.expanded(BENCHMARK_MARGIN),
    };
    let grid = render_heatmap(&file.model, &config, &bbox, args.res)?;
    let mut csv = create(&with_suffix(&args.out_prefix, ".csv"))?;
    grid.write_csv(&mut csv)?;
    csv.flush()?;
    let mut pgm = create(&with_suffix(&args.out_prefix, ".pgm"))?;
    grid.write_pgm(&mut pgm)?;
    pgm.flush()?;
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    if let Some(threads) = cli.threads {
        if let Err(e) = rayon::ThreadPoolBuilder::new().num_threads(threads).build_global() {
            eprintln!("error: {e}");
            return ExitCode::from(2);
        }
    }
    let header = cli.header;
    let result = match cli.command {
        Command::Build(args) => build(args, header),
        Command::Score(args) => score(args, header),
        Command::Eval(args) => eval(args, header),
        Command::Synth(args) => synth(args),
        Command::Sweep(args) => run_sweep(args, header),
        Command::Heatmap(args) => heatmap(args),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(1)
        }
    }
}
