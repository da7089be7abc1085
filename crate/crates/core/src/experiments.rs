//! End-to-end runs behind the command-line tool: explain, compare and the
//! example-based experiments. Each returns a [`RunReport`] plus the
//! artifacts needed for CSV and SVG output.

use std::time::{Duration, Instant};

use rayon::prelude::*;

use crate::blackbox::{analytic, external_predictor, knn_fit, trees_fit, AnalyticFn, Predictor, PredictorKind};
use crate::data::{
    gen_edge_testset, gen_feature_dataset, gen_lambda_experiment, gen_ring, load_csv, Dataset, LambdaDataset,
    SyntheticId, TargetColumn, RING_TEST,
};
use crate::dual::{explain_global, explain_local, feature_importance, DualConfig, DualExplanation, ImportanceMode};
use crate::error::{Error, Result};
use crate::example::{ale_importance, lr_importance, nam_importance, AleCurve, AleProbe, DEFAULT_ALE_BINS};
use crate::geometry::PointSet;
use crate::nam::{unit_grid, AdditiveNet, ShapeTable, TrainConfig, TrainReport};
use crate::report::{
    mean, median, Aggregate, MseStats, NamConfigEcho, NamTraining, PointResult, RunConfig, RunReport, Timing,
};
use crate::simplex::combine_rows;
use crate::surrogate::{lime_explain, LimeConfig, LinearModel};

/// Where training data comes from.
#[derive(Debug, Clone, PartialEq)]
pub enum DataSource {
    Synthetic(SyntheticId),
    Csv { path: std::path::PathBuf, target: TargetColumn, zscore: bool },
}

impl DataSource {
    pub fn label(&self) -> String {
        match self {
            DataSource::Synthetic(id) => id.name().to_string(),
            DataSource::Csv { path, .. } => path.display().to_string(),
        }
    }

    pub fn synthetic(&self) -> Option<SyntheticId> {
        match self {
            DataSource::Synthetic(id) => Some(*id),
            DataSource::Csv { .. } => None,
        }
    }

    /// Training data for a feature-based run, plus its closed form if known.
    pub fn load_features(&self, seed: u64) -> Result<(Dataset, Option<AnalyticFn>)> {
        match self {
            DataSource::Synthetic(id) => {
                if id.is_example_based() {
                    return Err(Error::Config(format!(
                        "'{id}' is an example-based experiment; use the examples command"
                    )));
                }
                Ok((gen_feature_dataset(*id, seed)?, id.function()))
            }
            DataSource::Csv { path, target, zscore } => Ok((load_csv(path, target, *zscore)?, None)),
        }
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct BlackboxSpec {
    pub kind: PredictorKind,
    pub knn_k: usize,
    pub n_trees: usize,
    pub external_cmd: Option<String>,
}

impl Default for BlackboxSpec {
    fn default() -> Self {
        BlackboxSpec { kind: PredictorKind::Knn, knn_k: 6, n_trees: 100, external_cmd: None }
    }
}

impl BlackboxSpec {
    pub fn label(&self) -> String {
        match self.kind {
            PredictorKind::Knn => format!("knn(k={})", self.knn_k),
            PredictorKind::BaggedTrees => format!("trees(n={})", self.n_trees),
            PredictorKind::Analytic => "analytic".into(),
            PredictorKind::External => format!("external({})", self.external_cmd.as_deref().unwrap_or("")),
        }
    }

    /// Fits (or connects to) the black box for `train`.
    pub fn build(&self, train: &Dataset, closed_form: Option<AnalyticFn>, seed: u64) -> Result<Box<dyn Predictor>> {
        match self.kind {
            PredictorKind::Knn => Ok(Box::new(knn_fit(&train.x, train.targets()?, self.knn_k)?)),
            PredictorKind::BaggedTrees => Ok(Box::new(trees_fit(&train.x, train.targets()?, self.n_trees, seed)?)),
            PredictorKind::Analytic => {
                let f = closed_form.ok_or_else(|| {
                    Error::Config("--blackbox analytic needs a synthetic dataset with a closed-form function".into())
                })?;
                if f.dim() != train.dim() {
                    return Err(Error::Config(format!(
                        "analytic function {f} takes {} inputs, data has {}",
                        f.dim(),
                        train.dim()
                    )));
                }
                Ok(Box::new(analytic(f)))
            }
            PredictorKind::External => {
                let cmd = self
                    .external_cmd
                    .as_deref()
                    .ok_or_else(|| Error::Config("--blackbox external needs --external-cmd".into()))?;
                Ok(Box::new(external_predictor(cmd)?))
            }
        }
    }
}

/// Runs `f` on a pool of `jobs` threads (`None` = available parallelism).
pub fn with_jobs<T: Send>(jobs: Option<usize>, f: impl FnOnce() -> T + Send) -> Result<T> {
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.unwrap_or(0))
        .build()
        .map_err(|e| Error::Config(format!("cannot start worker pool: {e}")))?;
    Ok(pool.install(f))
}

fn timing(start: Instant, enabled: bool) -> Option<Timing> {
    enabled.then(|| Timing {
        unix_time: std::time::SystemTime::now()
            .duration_since(std::time::UNIX_EPOCH)
            .unwrap_or(Duration::ZERO)
            .as_secs(),
        elapsed_seconds: start.elapsed().as_secs_f64(),
    })
}

fn collect_warnings(report: &mut RunReport) {
    let mut all = Vec::new();
    for p in &report.points {
        all.extend(p.warnings.iter().map(|w| format!("point {}: {w}", p.index)));
    }
    report.warnings.extend(all);
}

fn column_stats(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let m = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    let means: Vec<f64> = (0..m).map(|j| rows.iter().map(|r| r[j]).sum::<f64>() / n).collect();
    let sds = (0..m)
        .map(|j| {
            if rows.len() < 2 {
                0.0
            } else {
                (rows.iter().map(|r| (r[j] - means[j]).powi(2)).sum::<f64>() / (n - 1.0)).sqrt()
            }
        })
        .collect();
    (means, sds)
}

#[derive(Debug, Clone)]
pub struct ExplainOptions {
    pub dual: DualConfig,
    /// Number of leading training rows to explain (all when `None`).
    pub points: Option<usize>,
    pub global: bool,
    pub jobs: Option<usize>,
    pub timestamp: bool,
}

pub struct ExplainOutcome {
    pub report: RunReport,
    pub explanations: Vec<DualExplanation>,
}

fn dual_point(index: usize, x0: &[f64], e: &DualExplanation) -> PointResult {
    PointResult {
        index,
        x0: x0.to_vec(),
        a: Some(e.a.clone()),
        b: Some(e.b.clone()),
        d: Some(e.diagnostics.d),
        contains_x0: e.diagnostics.contains_x0,
        warnings: e.diagnostics.warnings.clone(),
        ..Default::default()
    }
}

/// Dual explanations of the first `points` training rows, or one global
/// explanation over the whole training set.
pub fn run_explain(
    train: &Dataset,
    predictor: &dyn Predictor,
    opts: &ExplainOptions,
    mut config: RunConfig,
) -> Result<ExplainOutcome> {
    let start = Instant::now();
    opts.dual.validate()?;
    config.k = Some(opts.dual.k);
    config.n_lambda = Some(opts.dual.n_lambda);
    config.global = opts.global;
    let explanations: Vec<DualExplanation> = if opts.global {
        vec![explain_global(&train.x, predictor, &opts.dual)?]
    } else {
        let n = opts.points.unwrap_or(train.len()).min(train.len());
        config.points = Some(n);
        with_jobs(opts.jobs, || {
            (0..n)
                .into_par_iter()
                .map(|i| {
                    let cfg = DualConfig { stream: i as u64, ..opts.dual.clone() };
                    explain_local(train.x.row(i), &train.x, predictor, &cfg)
                })
                .collect::<Result<Vec<_>>>()
        })??
    };
    let mut report = RunReport::new("explain", opts.dual.seed, config);
    for (i, e) in explanations.iter().enumerate() {
        let x0 = if opts.global { Vec::new() } else { train.x.row(i).to_vec() };
        report.points.push(dual_point(i, &x0, e));
    }
    let a_rows: Vec<Vec<f64>> = explanations.iter().map(|e| e.a.clone()).collect();
    let imp_rows: Vec<Vec<f64>> =
        explanations.iter().map(|e| feature_importance(&e.a, ImportanceMode::Normalized).0).collect();
    let (mean_a, std_a) = column_stats(&a_rows);
    report.aggregate = Aggregate {
        mean_a: Some(mean_a),
        std_a: Some(std_a),
        mean_normalized_importance: Some(column_stats(&imp_rows).0),
        ..Default::default()
    };
    collect_warnings(&mut report);
    report.timing = timing(start, opts.timestamp);
    Ok(ExplainOutcome { report, explanations })
}

#[derive(Debug, Clone)]
pub struct CompareOptions {
    pub dual: DualConfig,
    pub lime: LimeConfig,
    pub jobs: Option<usize>,
    pub timestamp: bool,
}

/// Test points for a comparison run: the outer annulus for the ring
/// experiment, segments between random extreme points otherwise.
pub fn compare_test_points(source: &DataSource, train: &Dataset, l: usize, seed: u64) -> Result<PointSet> {
    if source.synthetic() == Some(SyntheticId::FeatEx3) {
        Ok(gen_ring(l, RING_TEST, 0.05, seed, 1)?.x)
    } else {
        gen_edge_testset(&train.x, l, seed)
    }
}

pub struct CompareOutcome {
    pub report: RunReport,
    pub dual_mse: Vec<f64>,
    pub lime_mse: Vec<f64>,
}

const LIME_STREAM_OFFSET: u64 = 1 << 32;

/// Dual surrogate vs LIME at every test point, scored by the squared error
/// of each surrogate at its own point.
pub fn run_compare(
    train: &Dataset,
    predictor: &dyn Predictor,
    test: &PointSet,
    opts: &CompareOptions,
    mut config: RunConfig,
) -> Result<CompareOutcome> {
    let start = Instant::now();
    opts.dual.validate()?;
    opts.lime.validate()?;
    if test.dim() != train.dim() {
        return Err(Error::invalid("test points and training data differ in dimension"));
    }
    config.k = Some(opts.dual.k);
    config.n_lambda = Some(opts.dual.n_lambda);
    config.points = Some(test.len());
    config.lime_n = Some(opts.lime.n_samples);
    config.lime_cov = opts.lime.cov_diag.first().copied();
    config.lime_v = Some(opts.lime.kernel_width);
    config.lime_weighting = Some(format!("{:?}", opts.lime.weighting).to_lowercase());
    let f = predictor.predict_batch(test)?;
    let results = with_jobs(opts.jobs, || {
        (0..test.len())
            .into_par_iter()
            .map(|i| -> Result<PointResult> {
                let x = test.row(i);
                let cfg = DualConfig { stream: i as u64, ..opts.dual.clone() };
                let dual = explain_local(x, &train.x, predictor, &cfg)?;
                let lime = lime_explain(x, predictor, &opts.lime, opts.dual.seed, LIME_STREAM_OFFSET + i as u64)?;
                let g: LinearModel = dual.surrogate();
                let mut p = dual_point(i, x, &dual);
                p.mse_dual = Some((f[i] - g.predict(x)).powi(2));
                p.mse_lime = Some((f[i] - lime.model.predict(x)).powi(2));
                p.lime_coefficients = Some(lime.model.coefficients.clone());
                p.lime_intercept = Some(lime.model.intercept);
                p.warnings.extend(lime.warnings.iter().map(|w| format!("LIME: {w}")));
                Ok(p)
            })
            .collect::<Result<Vec<_>>>()
    })??;
    let dual_mse: Vec<f64> = results.iter().map(|p| p.mse_dual.unwrap_or(f64::NAN)).collect();
    let lime_mse: Vec<f64> = results.iter().map(|p| p.mse_lime.unwrap_or(f64::NAN)).collect();
    let mut report = RunReport::new("compare", opts.dual.seed, config);
    report.points = results;
    report.aggregate.mse = Some(MseStats {
        dual_mean: mean(&dual_mse),
        dual_median: median(&dual_mse),
        lime_mean: mean(&lime_mse),
        lime_median: median(&lime_mse),
        dual_better: dual_mse.iter().zip(&lime_mse).filter(|(d, l)| d < l).count(),
        points: dual_mse.len(),
    });
    collect_warnings(&mut report);
    report.timing = timing(start, opts.timestamp);
    Ok(CompareOutcome { report, dual_mse, lime_mse })
}

#[derive(Debug, Clone)]
pub struct ExamplesOptions {
    pub train: TrainConfig,
    pub hidden: usize,
    pub ale_bins: usize,
    pub ale_probe: AleProbe,
    pub shape_grid: usize,
    pub timestamp: bool,
}

impl ExamplesOptions {
    pub fn new(alpha: f64, seed: u64) -> Self {
        ExamplesOptions {
            train: TrainConfig::new(alpha, seed),
            hidden: crate::nam::DEFAULT_HIDDEN,
            ale_bins: DEFAULT_ALE_BINS,
            ale_probe: AleProbe::Independent,
            shape_grid: 101,
            timestamp: false,
        }
    }
}

pub struct ExamplesOutcome {
    pub report: RunReport,
    pub curves: Vec<AleCurve>,
    pub shapes: ShapeTable,
    pub net: AdditiveNet,
    pub training: TrainReport,
}

/// The black box of a lambda experiment as a function of `lambda`.
pub fn lambda_function(ds: &LambdaDataset) -> impl Fn(&PointSet) -> Result<Vec<f64>> + '_ {
    move |l: &PointSet| match &ds.vertices {
        Some(v) => l.rows().map(|r| Ok(ds.function.eval(&combine_rows(r, v)?))).collect(),
        None => Ok(l.rows().map(|r| ds.function.eval(r)).collect()),
    }
}

/// ALE, LR and NAM importance rows for samples `lambdas` with targets `z`;
/// `f` is the black box queried by ALE.
pub fn run_examples(
    lambdas: &PointSet,
    z: &[f64],
    f: &dyn Fn(&PointSet) -> Result<Vec<f64>>,
    opts: &ExamplesOptions,
    mut config: RunConfig,
) -> Result<ExamplesOutcome> {
    let start = Instant::now();
    let seed = opts.train.seed;
    config.points = Some(lambdas.len());
    config.ale_bins = Some(opts.ale_bins);
    config.ale_probe = Some(format!("{:?}", opts.ale_probe).to_lowercase());
    config.nam = Some(NamConfigEcho {
        lr: opts.train.lr,
        alpha: opts.train.alpha,
        epochs: opts.train.epochs,
        batch: opts.train.batch,
        hidden: opts.hidden,
    });
    let (ale, curves) = ale_importance(lambdas, f, opts.ale_bins, opts.ale_probe)?;
    let (lr, _) = lr_importance(lambdas, z, 0.0)?;
    let mut net = AdditiveNet::with_hidden(lambdas.dim(), opts.hidden, seed)?;
    let training = net.train(lambdas, z, &opts.train)?;
    let nam = nam_importance(&net, lambdas)?;
    let shapes = net.extract_shapes(&unit_grid(opts.shape_grid))?;
    let mut report = RunReport::new("examples", seed, config);
    report.warnings.extend(ale.warnings.iter().chain(&lr.warnings).chain(&nam.warnings).cloned());
    report.aggregate.importance_tables = vec![ale, lr, nam];
    report.aggregate.nam_training = Some(NamTraining {
        initial_loss: training.history[0],
        final_loss: *training.history.last().expect("history is nonempty"),
        steps: training.steps,
    });
    report.timing = timing(start, opts.timestamp);
    Ok(ExamplesOutcome { report, curves, shapes, net, training })
}

/// `run_examples` on one of the built-in lambda experiments.
pub fn run_lambda_experiment(id: SyntheticId, seed: u64, opts: &ExamplesOptions) -> Result<ExamplesOutcome> {
    let ds = gen_lambda_experiment(id, seed)?;
    let f = lambda_function(&ds);
    let config = RunConfig {
        dataset: id.name().into(),
        blackbox: Some(format!("analytic({})", ds.function)),
        ..Default::default()
    };
    run_examples(&ds.lambdas, &ds.z, &f, opts, config)
}

/// Default NAM regularization per experiment.
pub fn default_alpha(id: SyntheticId) -> f64 {
    match id {
        SyntheticId::ExBased1 => 1e-4,
        SyntheticId::ExBased2 => 1e-6,
        _ => 0.0,
    }
}
