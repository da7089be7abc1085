//! Acceptance run: one PASS/FAIL line per criterion, nonzero exit if any
//! criterion fails. Set `DUALEX_CCPP` to a CSV of the real power-plant data
//! (columns AT,V,AP,RH,PE) to run criterion 4 on it instead of the fixture.

use std::path::PathBuf;
use std::process::ExitCode;
use std::time::{Duration, Instant};

use dualex::blackbox::{analytic, AnalyticFn, PredictorKind};
use dualex::data::{gen_feature_dataset, SyntheticId, TargetColumn};
use dualex::dual::{explain_global, explain_local, DualConfig};
use dualex::example::{deviation_importance, ExampleImportance, ImportanceMethod};
use dualex::experiments::{
    compare_test_points, run_compare, run_explain, run_lambda_experiment, BlackboxSpec, CompareOptions, DataSource,
    ExamplesOptions, ExplainOptions,
};
use dualex::geometry::{find_extreme_points, project_onto_hull, DEFAULT_MAX_ITER};
use dualex::nam::AdditiveNet;
use dualex::report::{median, RunConfig};
use dualex::rng::StreamRng;
use dualex::simplex::SimplexSampler;
use dualex::surrogate::LimeConfig;
use dualex::PointSet;

const SEED: u64 = 0;

type Criterion = fn() -> dualex::Result<Outcome>;

struct Outcome {
    pass: bool,
    detail: String,
}

fn outcome(pass: bool, detail: impl Into<String>) -> Outcome {
    Outcome { pass, detail: detail.into() }
}

fn fmt(v: &[f64]) -> String {
    let cells: Vec<String> = v.iter().map(|x| format!("{x:.3}")).collect();
    format!("({})", cells.join(", "))
}

fn max_abs_diff(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y).abs()).fold(0.0, f64::max)
}

fn within_time(start: Instant, limit: Duration) -> (bool, String) {
    let t = start.elapsed();
    (t <= limit, format!("{:.1}s of {}s", t.as_secs_f64(), limit.as_secs()))
}

fn criterion_1() -> dualex::Result<Outcome> {
    let start = Instant::now();
    let id = SyntheticId::FeatEx1;
    let train = gen_feature_dataset(id, SEED)?;
    let predictor = analytic(id.function().unwrap());
    let opts = ExplainOptions {
        dual: DualConfig { k: 10, n_lambda: 30, seed: SEED, ..Default::default() },
        points: Some(1000),
        global: false,
        jobs: None,
        timestamp: false,
    };
    let out = run_explain(&train, &predictor, &opts, RunConfig::default())?;
    let mean_a = out.report.aggregate.mean_a.unwrap();
    let target = [10.0, -20.0, -2.0, 3.0, 0.0, 0.0, 0.0];
    let dev = max_abs_diff(&mean_a, &target);
    let (fast, t) = within_time(start, Duration::from_secs(120));
    Ok(outcome(
        dev <= 0.5 && fast && out.report.points.len() == 1000,
        format!("mean a = {}, max deviation {dev:.2e} (tol 0.5), {t}", fmt(&mean_a)),
    ))
}

fn normalized_importance(id: SyntheticId) -> dualex::Result<Vec<f64>> {
    let train = gen_feature_dataset(id, SEED)?;
    let predictor = analytic(id.function().unwrap());
    let opts = ExplainOptions {
        dual: DualConfig { k: 6, n_lambda: 30, seed: SEED, ..Default::default() },
        points: None,
        global: false,
        jobs: None,
        timestamp: false,
    };
    let out = run_explain(&train, &predictor, &opts, RunConfig::default())?;
    Ok(out.report.aggregate.mean_normalized_importance.unwrap())
}

fn criterion_2() -> dualex::Result<Outcome> {
    let low = normalized_importance(SyntheticId::FeatEx2a)?;
    let high = normalized_importance(SyntheticId::FeatEx2b)?;
    let ratio = high[0] / high[1];
    Ok(outcome(
        low[1] > low[0] && ratio >= 9.0,
        format!("[0,1]: {} (need x2 > x1); [15,16]: {} ratio x1/x2 = {ratio:.2} (need >= 9)", fmt(&low), fmt(&high)),
    ))
}

fn compare_medians(
    source: &DataSource,
    bb: &BlackboxSpec,
    k: usize,
    l: usize,
    lime_v: f64,
) -> dualex::Result<(f64, f64)> {
    let (train, closed_form) = source.load_features(SEED)?;
    let predictor = bb.build(&train, closed_form, SEED)?;
    let test = compare_test_points(source, &train, l, SEED)?;
    let opts = CompareOptions {
        dual: DualConfig { k, n_lambda: 30, seed: SEED, ..Default::default() },
        lime: LimeConfig::new(30, 0.05, train.dim(), lime_v),
        jobs: None,
        timestamp: false,
    };
    let out = run_compare(&train, predictor.as_ref(), &test, &opts, RunConfig::default())?;
    Ok((median(&out.dual_mse), median(&out.lime_mse)))
}

fn criterion_3() -> dualex::Result<Outcome> {
    let start = Instant::now();
    let source = DataSource::Synthetic(SyntheticId::FeatEx3);
    let knn = BlackboxSpec { kind: PredictorKind::Knn, knn_k: 6, ..Default::default() };
    let trees = BlackboxSpec { kind: PredictorKind::BaggedTrees, n_trees: 100, ..Default::default() };
    let (dk, lk) = compare_medians(&source, &knn, 6, 100, 0.01)?;
    let (dt, lt) = compare_medians(&source, &trees, 6, 100, 0.01)?;
    let (fast, t) = within_time(start, Duration::from_secs(120));
    Ok(outcome(
        dk < lk && dt < lt && fast,
        format!("median MSE dual/LIME: knn {dk:.5}/{lk:.5}, trees {dt:.5}/{lt:.5}; {t}"),
    ))
}

fn criterion_4() -> dualex::Result<Outcome> {
    let (path, l, label) = match std::env::var_os("DUALEX_CCPP") {
        Some(p) => (PathBuf::from(p), 200, "real data, l=200"),
        None => (
            PathBuf::from(env!("CARGO_MANIFEST_DIR")).join("tests/data/ccpp_synthetic_500.csv"),
            50,
            "500-row fixture, l=50",
        ),
    };
    let source = DataSource::Csv { path, target: TargetColumn::Named("PE".into()), zscore: true };
    let knn = BlackboxSpec { kind: PredictorKind::Knn, knn_k: 10, ..Default::default() };
    let trees = BlackboxSpec { kind: PredictorKind::BaggedTrees, n_trees: 100, ..Default::default() };
    let (dk, lk) = compare_medians(&source, &knn, 10, l, 0.5)?;
    let (dt, lt) = compare_medians(&source, &trees, 10, l, 0.5)?;
    Ok(outcome(
        dk < lk && dt < lt,
        format!("{label}; median MSE dual/LIME: knn {dk:.4}/{lk:.4}, trees {dt:.4}/{lt:.4}"),
    ))
}

fn table(tables: &[ExampleImportance], method: ImportanceMethod) -> Vec<f64> {
    tables.iter().find(|t| t.method == method).unwrap().normalized.clone()
}

fn ranks_match(values: &[f64], expected: &[f64]) -> bool {
    let order = |v: &[f64]| {
        let mut idx: Vec<usize> = (0..v.len()).collect();
        idx.sort_by(|&a, &b| v[b].total_cmp(&v[a]));
        idx
    };
    order(values) == order(expected)
}

fn lambda_tables(id: SyntheticId, alpha: f64) -> dualex::Result<Vec<ExampleImportance>> {
    let opts = ExamplesOptions::new(alpha, SEED);
    Ok(run_lambda_experiment(id, SEED, &opts)?.report.aggregate.importance_tables)
}

fn criterion_5() -> dualex::Result<Outcome> {
    let start = Instant::now();
    let t = lambda_tables(SyntheticId::ExBased1, 1e-4)?;
    let ale = table(&t, ImportanceMethod::Ale);
    let lr = table(&t, ImportanceMethod::Lr);
    let nam = table(&t, ImportanceMethod::Nam);
    let ale_dev = max_abs_diff(&ale, &[0.172, 0.259, 0.000, 0.569, 0.000, 0.000]);
    let lr_dev = max_abs_diff(&lr, &[0.182, 0.245, 0.054, 0.405, 0.062, 0.052]);
    let rest = nam[2].max(nam[4]).max(nam[5]);
    let nam_order = nam[3] > nam[1] && nam[1] > nam[0] && nam[0] > rest;
    let nam_l4 = (nam[3] - 0.569).abs();
    let (fast, tm) = within_time(start, Duration::from_secs(600));
    Ok(outcome(
        ale_dev <= 0.05 && lr_dev <= 0.05 && nam_order && nam_l4 <= 0.1 && fast,
        format!(
            "ALE {} (dev {ale_dev:.3}, tol 0.05); LR {} (dev {lr_dev:.3}, tol 0.05); NAM {} (order {}, l4 dev {nam_l4:.3}, tol 0.1); {tm}",
            fmt(&ale),
            fmt(&lr),
            fmt(&nam),
            if nam_order { "ok" } else { "wrong" }
        ),
    ))
}

fn criterion_6() -> dualex::Result<Outcome> {
    let mut pass = true;
    let mut parts = Vec::new();
    let cases: [(SyntheticId, f64, [&[f64]; 3]); 2] = [
        (
            SyntheticId::ExBased2,
            1e-6,
            [&[0.392, 0.087, 0.089, 0.432], &[0.357, 0.081, 0.112, 0.450], &[0.306, 0.134, 0.202, 0.358]],
        ),
        (SyntheticId::ExBased3, 0.0, [&[0.411, 0.395, 0.194], &[0.430, 0.310, 0.260], &[0.499, 0.338, 0.163]]),
    ];
    for (id, alpha, [ale_ref, lr_ref, nam_ref]) in cases {
        let t = lambda_tables(id, alpha)?;
        let ale = table(&t, ImportanceMethod::Ale);
        let lr = table(&t, ImportanceMethod::Lr);
        let nam = table(&t, ImportanceMethod::Nam);
        let ale_dev = max_abs_diff(&ale, ale_ref);
        let lr_dev = max_abs_diff(&lr, lr_ref);
        let rank = ranks_match(&nam, nam_ref);
        pass &= ale_dev <= 0.06 && lr_dev <= 0.06 && rank;
        parts.push(format!(
            "{id}: ALE {} dev {ale_dev:.3}, LR {} dev {lr_dev:.3} (tol 0.06), NAM {} rank {}",
            fmt(&ale),
            fmt(&lr),
            fmt(&nam),
            if rank { "ok" } else { "wrong" }
        ));
    }
    Ok(outcome(pass, parts.join("; ")))
}

/// Vertices of the 2D hull by Andrew's monotone chain; collinear boundary
/// points are dropped.
fn monotone_chain(points: &[[f64; 2]]) -> Vec<usize> {
    let mut idx: Vec<usize> = (0..points.len()).collect();
    idx.sort_by(|&a, &b| points[a][0].total_cmp(&points[b][0]).then(points[a][1].total_cmp(&points[b][1])));
    let cross = |o: usize, a: usize, b: usize| {
        let (o, a, b) = (points[o], points[a], points[b]);
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    };
    let mut hull: Vec<usize> = Vec::new();
    for pass in 0..2 {
        let start = hull.len();
        let seq: Vec<usize> = if pass == 0 { idx.clone() } else { idx.iter().rev().copied().collect() };
        for &p in &seq {
            while hull.len() >= start + 2 && cross(hull[hull.len() - 2], hull[hull.len() - 1], p) <= 0.0 {
                hull.pop();
            }
            hull.push(p);
        }
        hull.pop();
    }
    hull.sort_unstable();
    hull.dedup();
    hull
}

fn check(name: &str, ok: bool, detail: String, failures: &mut Vec<String>) -> String {
    if !ok {
        failures.push(name.to_string());
    }
    format!("({name}) {detail}")
}

fn criterion_7() -> dualex::Result<Outcome> {
    let mut failures = Vec::new();
    let mut parts = Vec::new();

    // (a) linear black box, local and global
    let f = AnalyticFn::Linear7;
    let train = gen_feature_dataset(SyntheticId::FeatEx1, SEED)?;
    let predictor = analytic(f);
    let truth = [10.0, -20.0, -2.0, 3.0, 0.0, 0.0, 0.0];
    let mut worst = 0.0f64;
    let mut explanations = Vec::new();
    for i in 0..50 {
        let cfg = DualConfig { k: 20, n_lambda: 60, seed: SEED, stream: i, ..Default::default() };
        let e = explain_local(train.x.row(i as usize), &train.x, &predictor, &cfg)?;
        worst = worst.max(max_abs_diff(&e.a, &truth));
        explanations.push(e);
    }
    let global =
        explain_global(&train.x, &predictor, &DualConfig { n_lambda: 1000, seed: SEED, ..Default::default() })?;
    worst = worst.max(max_abs_diff(&global.a, &truth));
    parts.push(check("a", worst <= 1e-6, format!("max coefficient error {worst:.1e}"), &mut failures));

    // (b) every primal query lies in the hull of the neighbors and x0
    let mut max_excess = f64::NEG_INFINITY;
    let mut queries = 0;
    for (i, e) in explanations.iter().enumerate() {
        let mut refs = train.x.select(&e.neighbors);
        refs.push(train.x.row(i))?;
        for q in e.primal.rows() {
            let p = project_onto_hull(q, &refs, DEFAULT_MAX_ITER, e.poly.tol())?;
            max_excess = max_excess.max(p.distance - e.poly.tol());
            queries += 1;
        }
    }
    parts.push(check(
        "b",
        max_excess <= 0.0,
        format!("{queries} queries, max distance minus tol {max_excess:.1e}"),
        &mut failures,
    ));

    // (c) 2D extreme points vs monotone chain
    let mut rng = StreamRng::new(SEED, 7);
    let mut mismatches = 0;
    let sets = 120;
    for s in 0..sets {
        let n = 3 + s % 38;
        let pts: Vec<[f64; 2]> = (0..n).map(|_| [rng.normal(), rng.uniform_in(-2.0, 2.0)]).collect();
        let ps = PointSet::from_rows(&pts)?;
        let poly = find_extreme_points(&ps, ps.default_tol())?;
        let mut got = poly.source_indices().to_vec();
        got.sort_unstable();
        if got != monotone_chain(&pts) {
            mismatches += 1;
        }
    }
    parts.push(check("c", mismatches == 0, format!("{mismatches}/{sets} sets differ"), &mut failures));

    // (d) NAM gradient vs central differences
    let mut worst_rel = 0.0f64;
    let mut skipped = 0;
    let mut checked = 0;
    for (d, seed) in [(3usize, 1u64), (4, 2)] {
        let lambdas = SimplexSampler::new(d, seed, 0)?.sample(64)?;
        let z: Vec<f64> = lambdas.rows().map(|r| r[0] * r[0] - r[d - 1] + 0.3).collect();
        let mut net = AdditiveNet::with_hidden(d, 16, seed)?;
        for (j, p) in net.params_mut().iter_mut().enumerate() {
            if j % 7 == 3 {
                *p += 0.01;
            }
        }
        let g = net.check_gradient(&lambdas, &z, 1e-4, 1e-5)?;
        worst_rel = worst_rel.max(g.max_relative_error);
        skipped += g.skipped;
        checked += g.checked;
    }
    parts.push(check(
        "d",
        worst_rel <= 1e-4 && skipped * 100 <= checked + skipped,
        format!("max relative error {worst_rel:.1e} over {checked} params ({skipped} skipped at kinks)"),
        &mut failures,
    ));

    // (e) simplex sampler moments and marginal CDF
    let n = 100_000;
    let s3 = SimplexSampler::new(3, SEED, 0)?.sample(n)?;
    let mean_dev = (0..3).map(|k| (s3.column(k).iter().sum::<f64>() / n as f64 - 1.0 / 3.0).abs()).fold(0.0, f64::max);
    let mut first = SimplexSampler::new(2, SEED, 1)?.sample(n)?.column(0);
    first.sort_by(f64::total_cmp);
    let cdf_dev = (1..10)
        .map(|q| {
            let t = q as f64 / 10.0;
            (first.partition_point(|&v| v <= t) as f64 / n as f64 - t).abs()
        })
        .fold(0.0, f64::max);
    parts.push(check(
        "e",
        mean_dev <= 0.005 && cdf_dev <= 0.01,
        format!("mean deviation {mean_dev:.1e} (tol 5e-3), decile CDF deviation {cdf_dev:.1e} (tol 1e-2)"),
        &mut failures,
    ));

    // (f) deviation importance invariances
    let values: Vec<f64> = (0..200).map(|_| rng.normal() * 3.0 + 1.0).collect();
    let base = deviation_importance(&values)?;
    let shifted: Vec<f64> = values.iter().map(|v| v + 41.5).collect();
    let scaled: Vec<f64> = values.iter().map(|v| v * -2.5).collect();
    let shift_err = (deviation_importance(&shifted)? - base).abs() / base;
    let scale_err = (deviation_importance(&scaled)? - 2.5 * base).abs() / base;
    parts.push(check(
        "f",
        shift_err <= 1e-12 && scale_err <= 1e-12,
        format!("relative errors {shift_err:.1e} (shift), {scale_err:.1e} (scale)"),
        &mut failures,
    ));

    // (g) reruns and thread counts give identical report bytes
    let ring = gen_feature_dataset(SyntheticId::FeatEx3, SEED)?;
    let knn = BlackboxSpec::default().build(&ring, None, SEED)?;
    let mut texts = Vec::new();
    for jobs in [Some(1), Some(4), Some(4)] {
        let opts = ExplainOptions {
            dual: DualConfig { k: 6, n_lambda: 30, seed: SEED, ..Default::default() },
            points: Some(60),
            global: false,
            jobs,
            timestamp: false,
        };
        texts.push(run_explain(&ring, knn.as_ref(), &opts, RunConfig::default())?.report.to_json()?);
        let test = compare_test_points(&DataSource::Synthetic(SyntheticId::FeatEx3), &ring, 20, SEED)?;
        let copts = CompareOptions {
            dual: opts.dual.clone(),
            lime: LimeConfig::new(30, 0.05, 2, 0.01),
            jobs,
            timestamp: false,
        };
        texts.push(run_compare(&ring, knn.as_ref(), &test, &copts, RunConfig::default())?.report.to_json()?);
    }
    let identical = texts[0] == texts[2] && texts[2] == texts[4] && texts[1] == texts[3] && texts[3] == texts[5];
    parts.push(check(
        "g",
        identical,
        format!("explain and compare reports identical across 3 runs (1 and 4 threads): {identical}"),
        &mut failures,
    ));

    Ok(outcome(failures.is_empty(), parts.join("; ")))
}

fn main() -> ExitCode {
    let criteria: [(usize, Criterion); 7] = [
        (1, criterion_1),
        (2, criterion_2),
        (3, criterion_3),
        (4, criterion_4),
        (5, criterion_5),
        (6, criterion_6),
        (7, criterion_7),
    ];
    // `cargo test` passes harness flags such as `--nocapture`; a bare
    // positional argument selects criteria by number.
    let selected: Vec<usize> = std::env::args().skip(1).filter_map(|a| a.parse().ok()).collect();
    let mut failed = 0;
    for (n, run) in criteria {
        if !selected.is_empty() && !selected.contains(&n) {
            continue;
        }
        let line = match run() {
            Ok(o) => {
                failed += usize::from(!o.pass);
                format!("criterion {n}: {} {}", if o.pass { "PASS" } else { "FAIL" }, o.detail)
            }
            Err(e) => {
                failed += 1;
                format!("criterion {n}: FAIL error: {e}")
            }
        };
        println!("{line}");
    }
    if failed == 0 {
        ExitCode::SUCCESS
    } else {
        println!("{failed} criterion(s) failed");
        ExitCode::FAILURE
    }
}
