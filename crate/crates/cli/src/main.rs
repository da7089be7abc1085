use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand, ValueEnum};

use dualex::blackbox::PredictorKind;
use dualex::data::{load_csv, write_csv, Dataset, SyntheticId, TargetColumn};
use dualex::dual::DualConfig;
use dualex::example::{AleProbe, DEFAULT_ALE_BINS};
use dualex::experiments::{
    compare_test_points, default_alpha, run_examples, run_explain, run_lambda_experiment, BlackboxSpec, CompareOptions,
    DataSource, ExamplesOptions, ExamplesOutcome, ExplainOptions,
};
use dualex::report::{RunConfig, RunReport};
use dualex::surrogate::{LimeConfig, LimeWeighting};
use dualex::{svg, Error, PointSet, Result};

#[derive(Parser)]
#[command(name = "dualex", version, about = "Dual explanations of black-box regressors")]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Dual feature importances for training points (or one global model).
    Explain(ExplainArgs),
    /// Dual surrogate vs LIME: per-point surrogate error at test points.
    Compare(CompareArgs),
    /// ALE, LR and NAM importances of extreme points on lambda data.
    Examples(ExamplesArgs),
    /// Write a synthetic dataset as CSV.
    GenData(GenDataArgs),
}

#[derive(Clone, Copy, ValueEnum)]
enum BlackboxArg {
    Knn,
    Trees,
    Analytic,
    External,
}

#[derive(Clone, Copy, ValueEnum)]
enum WeightingArg {
    Kernel,
    RandomNormal,
}

#[derive(Clone, Copy, ValueEnum)]
enum ProbeArg {
    Independent,
    Renormalized,
}

#[derive(Args)]
struct DataArgs {
    /// Built-in dataset id (feat-ex1, feat-ex2a, feat-ex2b, feat-ex3, ccpp-synthetic, ex-based-1..3).
    #[arg(long, conflicts_with = "data")]
    synthetic: Option<String>,
    /// CSV file with a header row.
    #[arg(long)]
    data: Option<PathBuf>,
    /// Target column of --data, by header name or zero-based index (default: last column).
    #[arg(long = "target-col")]
    target_col: Option<String>,
    /// Z-score the features of --data.
    #[arg(long)]
    zscore: bool,
}

#[derive(Args)]
struct BlackboxArgs {
    #[arg(long, value_enum, default_value = "knn")]
    blackbox: BlackboxArg,
    /// Neighbours of the KNN black box.
    #[arg(long = "bb-k", default_value_t = 6)]
    bb_k: usize,
    /// Trees in the bagged-trees black box.
    #[arg(long = "bb-trees", default_value_t = 100)]
    bb_trees: usize,
    /// Shell command speaking the line protocol (see README).
    #[arg(long = "external-cmd")]
    external_cmd: Option<String>,
}

#[derive(Args)]
struct RunArgs {
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Worker threads (default: available parallelism).
    #[arg(long)]
    jobs: Option<usize>,
    #[arg(long = "out-dir", default_value = "dualex-out")]
    out_dir: PathBuf,
    /// Omit wall-clock fields so reruns are byte-identical.
    #[arg(long = "no-timestamp")]
    no_timestamp: bool,
}

#[derive(Args)]
struct DualArgs {
    /// Nearest neighbours spanning the local hull.
    #[arg(long = "K", default_value_t = 10)]
    k: usize,
    /// Simplex samples per explanation.
    #[arg(long = "n-lambda", default_value_t = 30)]
    n_lambda: usize,
}

#[derive(Args)]
struct ExplainArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    bb: BlackboxArgs,
    #[command(flatten)]
    dual: DualArgs,
    /// Explain the first N rows (default: all).
    #[arg(long)]
    points: Option<usize>,
    /// One explanation over the hull of the whole training set.
    #[arg(long)]
    global: bool,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct CompareArgs {
    #[command(flatten)]
    data: DataArgs,
    #[command(flatten)]
    bb: BlackboxArgs,
    #[command(flatten)]
    dual: DualArgs,
    /// Number of test points (default: 100 for feat-ex3, 200 otherwise).
    #[arg(long)]
    points: Option<usize>,
    /// Per-feature variance of LIME perturbations.
    #[arg(long = "lime-cov", default_value_t = 0.05)]
    lime_cov: f64,
    /// LIME kernel width.
    #[arg(long = "lime-v", default_value_t = 0.01)]
    lime_v: f64,
    #[arg(long = "lime-n", default_value_t = 30)]
    lime_n: usize,
    #[arg(long = "lime-weighting", value_enum, default_value = "kernel")]
    lime_weighting: WeightingArg,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct ExamplesArgs {
    #[command(flatten)]
    data: DataArgs,
    /// Black box fitted to --data for the ALE queries (knn or trees).
    #[command(flatten)]
    bb: BlackboxArgs,
    /// NAM L2 coefficient (default: 1e-4, 1e-6, 0 for ex-based-1..3; 1e-4 for --data).
    #[arg(long)]
    alpha: Option<f64>,
    #[arg(long, default_value_t = 300)]
    epochs: usize,
    #[arg(long = "ale-bins", default_value_t = DEFAULT_ALE_BINS)]
    ale_bins: usize,
    #[arg(long = "ale-probe", value_enum, default_value = "independent")]
    ale_probe: ProbeArg,
    #[command(flatten)]
    run: RunArgs,
}

#[derive(Args)]
struct GenDataArgs {
    /// Dataset id.
    #[arg(long, alias = "synthetic")]
    id: String,
    #[arg(long, default_value_t = 0)]
    seed: u64,
    /// Output file (default: <out-dir>/<id>.csv).
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long = "out-dir", default_value = ".")]
    out_dir: PathBuf,
}

// Writes to stdout, ignoring a closed pipe (e.g. `dualex ... | head`).
macro_rules! out {
    ($($t:tt)*) => {{
        use std::io::Write as _;
        let _ = writeln!(std::io::stdout().lock(), $($t)*);
    }};
}

fn source(args: &DataArgs) -> Result<DataSource> {
    match (&args.synthetic, &args.data) {
        (Some(id), None) => Ok(DataSource::Synthetic(id.parse().map_err(|e: Error| Error::Config(e.to_string()))?)),
        (None, Some(path)) => Ok(DataSource::Csv {
            path: path.clone(),
            target: target_column(args.target_col.as_deref()),
            zscore: args.zscore,
        }),
        _ => Err(Error::Config("give exactly one of --synthetic or --data".into())),
    }
}

fn target_column(arg: Option<&str>) -> TargetColumn {
    match arg {
        None => TargetColumn::Last,
        Some(s) => TargetColumn::Named(s.to_string()),
    }
}

fn blackbox(args: &BlackboxArgs) -> BlackboxSpec {
    BlackboxSpec {
        kind: match args.blackbox {
            BlackboxArg::Knn => PredictorKind::Knn,
            BlackboxArg::Trees => PredictorKind::BaggedTrees,
            BlackboxArg::Analytic => PredictorKind::Analytic,
            BlackboxArg::External => PredictorKind::External,
        },
        knn_k: args.bb_k,
        n_trees: args.bb_trees,
        external_cmd: args.external_cmd.clone(),
    }
}

fn base_config(src: &DataSource, bb: Option<&BlackboxSpec>) -> RunConfig {
    RunConfig { dataset: src.label(), blackbox: bb.map(BlackboxSpec::label), ..Default::default() }
}

fn create_dir(dir: &Path) -> Result<()> {
    fs::create_dir_all(dir).map_err(|e| Error::Io { path: dir.to_path_buf(), source: e })
}

fn write(path: &Path, text: &str) -> Result<()> {
    fs::write(path, text).map_err(|e| Error::Io { path: path.to_path_buf(), source: e })
}

fn csv_line(cells: impl IntoIterator<Item = String>) -> String {
    let mut s = cells.into_iter().collect::<Vec<_>>().join(",");
    s.push('\n');
    s
}

fn finish_report(report: &RunReport, dir: &Path) -> Result<()> {
    report.write(&dir.join("report.json"))?;
    for w in &report.warnings {
        eprintln!("warning: {w}");
    }
    out!("report: {}", dir.join("report.json").display());
    Ok(())
}

fn fmt_vec(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:.4}")).collect();
    format!("({})", cells.join(", "))
}

fn cmd_explain(args: &ExplainArgs) -> Result<()> {
    let src = source(&args.data)?;
    let seed = args.run.seed;
    let (train, closed) = src.load_features(seed)?;
    let bb = blackbox(&args.bb);
    let predictor = bb.build(&train, closed, seed)?;
    let opts = ExplainOptions {
        dual: DualConfig { k: args.dual.k, n_lambda: args.dual.n_lambda, seed, ..Default::default() },
        points: args.points,
        global: args.global,
        jobs: args.run.jobs,
        timestamp: !args.run.no_timestamp,
    };
    let out = run_explain(&train, predictor.as_ref(), &opts, base_config(&src, Some(&bb)))?;
    let dir = &args.run.out_dir;
    create_dir(dir)?;
    let names = &train.feature_names;
    let mut csv = csv_line(std::iter::once("index".to_string()).chain(names.iter().map(|n| format!("a_{n}"))));
    for p in &out.report.points {
        let a = p.a.as_deref().unwrap_or(&[]);
        csv.push_str(&csv_line(std::iter::once(p.index.to_string()).chain(a.iter().map(|v| v.to_string()))));
    }
    write(&dir.join("coefficients.csv"), &csv)?;
    let agg = &out.report.aggregate;
    if let Some(imp) = &agg.mean_normalized_importance {
        let chart = svg::bars(names, &[("importance", imp.clone())], "Mean normalized importance", "|a| share");
        write(&dir.join("importance.svg"), &chart)?;
    }
    if let Some(a) = &agg.mean_a {
        out!("mean a = {}", fmt_vec(a));
    }
    if let Some(imp) = &agg.mean_normalized_importance {
        out!("mean normalized importance = {}", fmt_vec(imp));
    }
    finish_report(&out.report, dir)
}

fn cmd_compare(args: &CompareArgs) -> Result<()> {
    let src = source(&args.data)?;
    let seed = args.run.seed;
    let (train, closed) = src.load_features(seed)?;
    let bb = blackbox(&args.bb);
    let predictor = bb.build(&train, closed, seed)?;
    let l = args.points.unwrap_or(if src.synthetic() == Some(SyntheticId::FeatEx3) { 100 } else { 200 });
    let test = compare_test_points(&src, &train, l, seed)?;
    let mut lime = LimeConfig::new(args.lime_n, args.lime_cov, train.dim(), args.lime_v);
    lime.weighting = match args.lime_weighting {
        WeightingArg::Kernel => LimeWeighting::Kernel,
        WeightingArg::RandomNormal => LimeWeighting::RandomNormal,
    };
    let opts = CompareOptions {
        dual: DualConfig { k: args.dual.k, n_lambda: args.dual.n_lambda, seed, ..Default::default() },
        lime,
        jobs: args.run.jobs,
        timestamp: !args.run.no_timestamp,
    };
    let out = dualex::experiments::run_compare(&train, predictor.as_ref(), &test, &opts, base_config(&src, Some(&bb)))?;
    let dir = &args.run.out_dir;
    create_dir(dir)?;
    let mut csv = csv_line(["index", "mse_dual", "mse_lime"].map(String::from));
    for (i, (d, l)) in out.dual_mse.iter().zip(&out.lime_mse).enumerate() {
        csv.push_str(&csv_line([i.to_string(), d.to_string(), l.to_string()]));
    }
    write(&dir.join("mse.csv"), &csv)?;
    let pts: Vec<(f64, f64)> = out.dual_mse.iter().zip(&out.lime_mse).map(|(d, l)| (*d, *l)).collect();
    write(&dir.join("mse_scatter.svg"), &svg::scatter(&pts, "Per-point surrogate MSE", "dual", "LIME", true))?;
    if let Some(m) = &out.report.aggregate.mse {
        out!(
            "median MSE: dual {:.6}, LIME {:.6} (mean {:.6} vs {:.6}; dual better at {}/{} points)",
            m.dual_median,
            m.lime_median,
            m.dual_mean,
            m.lime_mean,
            m.dual_better,
            m.points
        );
    }
    finish_report(&out.report, dir)
}

/// Rows of a lambda CSV must lie on the unit simplex.
fn check_simplex(x: &PointSet) -> Result<()> {
    for (i, r) in x.rows().enumerate() {
        let s: f64 = r.iter().sum();
        if r.iter().any(|&v| v < -1e-9) || (s - 1.0).abs() > 1e-6 {
            return Err(Error::Config(format!(
                "row {} is not a simplex vector (entries must be >= 0 and sum to 1, sum is {s})",
                i + 1
            )));
        }
    }
    Ok(())
}

fn cmd_examples(args: &ExamplesArgs) -> Result<()> {
    let src = source(&args.data)?;
    let seed = args.run.seed;
    let alpha = args.alpha.unwrap_or(match src.synthetic() {
        Some(id) => default_alpha(id),
        None => 1e-4,
    });
    let mut opts = ExamplesOptions::new(alpha, seed);
    opts.train.epochs = args.epochs;
    opts.ale_bins = args.ale_bins;
    opts.ale_probe = match args.ale_probe {
        ProbeArg::Independent => AleProbe::Independent,
        ProbeArg::Renormalized => AleProbe::Renormalized,
    };
    opts.timestamp = !args.run.no_timestamp;
    let result = match &src {
        DataSource::Synthetic(id) => {
            if !id.is_example_based() {
                return Err(Error::Config(format!(
                    "'{id}' is a feature-based dataset; examples needs ex-based-1, ex-based-2 or ex-based-3"
                )));
            }
            run_lambda_experiment(*id, seed, &opts)
        }
        DataSource::Csv { path, target, .. } => {
            let ds: Dataset = load_csv(path, target, false)?;
            check_simplex(&ds.x)?;
            let bb = blackbox(&args.bb);
            if matches!(bb.kind, PredictorKind::Analytic) {
                return Err(Error::Config("--data examples need a fitted black box (knn, trees or external)".into()));
            }
            let predictor = bb.build(&ds, None, seed)?;
            let f = |l: &PointSet| predictor.predict_batch(l);
            run_examples(&ds.x, ds.targets()?, &f, &opts, base_config(&src, Some(&bb)))
        }
    };
    let out = result.inspect_err(|e| {
        if matches!(e, Error::Training { .. }) {
            eprintln!("NAM training failed with seed {seed}, alpha {alpha}, lr {}", opts.train.lr);
        }
    })?;
    write_examples(&out, &args.run.out_dir)?;
    finish_report(&out.report, &args.run.out_dir)
}

fn write_examples(out: &ExamplesOutcome, dir: &Path) -> Result<()> {
    create_dir(dir)?;
    let d = out.net.d();
    let labels: Vec<String> = (1..=d).map(|k| format!("l{k}")).collect();
    let tables = &out.report.aggregate.importance_tables;
    let mut csv = csv_line(std::iter::once("method".to_string()).chain(labels.iter().cloned()));
    out!("{:<6}{}", "", labels.iter().map(|l| format!("{l:>8}")).collect::<String>());
    for t in tables {
        let name = format!("{:?}", t.method).to_uppercase();
        csv.push_str(&csv_line(std::iter::once(name.clone()).chain(t.normalized.iter().map(|v| v.to_string()))));
        out!("{name:<6}{}", t.normalized.iter().map(|v| format!("{v:>8.3}")).collect::<String>());
    }
    write(&dir.join("importance_table.csv"), &csv)?;
    let series: Vec<(&str, Vec<f64>)> =
        ["ALE", "LR", "NAM"].iter().zip(tables).map(|(n, t)| (*n, t.normalized.clone())).collect();
    write(
        &dir.join("importance.svg"),
        &svg::bars(&labels, &series, "Normalized importance of extreme points", "importance"),
    )?;
    for k in 0..d {
        let grid = &out.shapes.grid;
        let vals = &out.shapes.values[k];
        let mut s = csv_line(["lambda".to_string(), "h".to_string()]);
        for (x, y) in grid.iter().zip(vals) {
            s.push_str(&csv_line([x.to_string(), y.to_string()]));
        }
        write(&dir.join(format!("shape_l{}.csv", k + 1)), &s)?;
        let pts: Vec<(f64, f64)> = grid.iter().copied().zip(vals.iter().copied()).collect();
        let title = format!("Shape function h{}", k + 1);
        write(
            &dir.join(format!("shape_l{}.svg", k + 1)),
            &svg::lines(&[(labels[k].as_str(), pts)], &title, &labels[k], "h (centered)"),
        )?;
        let c = &out.curves[k];
        let mut s = csv_line(["bin_center".to_string(), "effect".to_string(), "count".to_string()]);
        for ((x, y), n) in c.bin_centers().iter().zip(&c.centered_effects).zip(&c.counts) {
            s.push_str(&csv_line([x.to_string(), y.to_string(), n.to_string()]));
        }
        write(&dir.join(format!("ale_l{}.csv", k + 1)), &s)?;
    }
    let ale_series: Vec<(&str, Vec<(f64, f64)>)> = out
        .curves
        .iter()
        .zip(&labels)
        .map(|(c, l)| (l.as_str(), c.bin_centers().into_iter().zip(c.centered_effects.iter().copied()).collect()))
        .collect();
    write(&dir.join("ale.svg"), &svg::lines(&ale_series, "ALE curves", "lambda", "effect"))?;
    out.net.save(&dir.join("nam_model.txt"))
}

fn cmd_gen_data(args: &GenDataArgs) -> Result<()> {
    let id: SyntheticId = args.id.parse().map_err(|e: Error| Error::Config(e.to_string()))?;
    let ds = if id.is_example_based() {
        dualex::data::gen_lambda_experiment(id, args.seed)?.to_dataset()
    } else {
        dualex::data::gen_feature_dataset(id, args.seed)?
    };
    let path = match &args.out {
        Some(p) => p.clone(),
        None => {
            create_dir(&args.out_dir)?;
            args.out_dir.join(format!("{id}.csv"))
        }
    };
    write_csv(&ds, &path)?;
    out!("wrote {} rows x {} features to {}", ds.len(), ds.dim(), path.display());
    Ok(())
}

fn main() -> ExitCode {
    let cli = Cli::parse();
    let result = match &cli.command {
        Command::Explain(a) => cmd_explain(a),
        Command::Compare(a) => cmd_compare(a),
        Command::Examples(a) => cmd_examples(a),
        Command::GenData(a) => cmd_gen_data(a),
    };
    match result {
        Ok(()) => ExitCode::SUCCESS,
        Err(e) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_usage() { 2 } else { 1 })
        }
    }
}
