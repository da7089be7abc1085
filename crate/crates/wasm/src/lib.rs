//! Browser demo: three operations on the built-in synthetic sets, each
//! returning a JSON string. Everything runs on the calling thread.

use serde_json::{json, Value};
use wasm_bindgen::prelude::*;

use dualex::blackbox::{knn_fit, KnnRegressor, Predictor};
use dualex::data::{gen_feature_dataset, Dataset, SyntheticId};
use dualex::dual::{explain_local, DualConfig};
use dualex::example::ImportanceMethod;
use dualex::experiments::{compare_test_points, default_alpha, run_lambda_experiment, DataSource, ExamplesOptions};
use dualex::report::median;
use dualex::surrogate::{lime_explain, LimeConfig};

const LIME_STREAM_OFFSET: u64 = 1 << 32;

fn ring(seed: u64) -> dualex::Result<(Dataset, KnnRegressor)> {
    let train = gen_feature_dataset(SyntheticId::FeatEx3, seed)?;
    let knn = knn_fit(&train.x, train.targets()?, 6)?;
    Ok((train, knn))
}

fn js(r: dualex::Result<Value>) -> Result<String, JsValue> {
    r.map(|v| v.to_string()).map_err(|e| JsValue::from_str(&e.to_string()))
}

/// Dual and LIME explanations of one point on the ring data.
pub fn ring_explain_json(x1: f64, x2: f64, k: usize, seed: u64) -> dualex::Result<Value> {
    let (train, knn) = ring(seed)?;
    let x0 = [x1, x2];
    let cfg = DualConfig { k, seed, ..Default::default() };
    let dual = explain_local(&x0, &train.x, &knn, &cfg)?;
    let lime = lime_explain(&x0, &knn, &LimeConfig::new(30, 0.05, 2, 0.01), seed, LIME_STREAM_OFFSET)?;
    let extremes: Vec<&[f64]> = dual.poly.extremes().rows().collect();
    let queries: Vec<&[f64]> = dual.primal.rows().collect();
    Ok(json!({
        "x0": x0,
        "f": knn.predict(&x0)?,
        "dual": {
            "a": dual.a,
            "b": dual.b,
            "prediction": dual.surrogate().predict(&x0),
            "extremes": extremes,
            "queries": queries,
            "contains_x0": dual.diagnostics.contains_x0,
        },
        "lime": {
            "coefficients": lime.model.coefficients,
            "intercept": lime.model.intercept,
            "prediction": lime.model.predict(&x0),
            "samples": lime.samples.rows().collect::<Vec<_>>(),
        },
        "train": train.x.rows().collect::<Vec<_>>(),
    }))
}

/// Squared surrogate errors of both methods at `points` ring test points.
pub fn ring_compare_json(points: usize, k: usize, seed: u64) -> dualex::Result<Value> {
    let (train, knn) = ring(seed)?;
    let test = compare_test_points(&DataSource::Synthetic(SyntheticId::FeatEx3), &train, points, seed)?;
    let f = knn.predict_batch(&test)?;
    let lime_cfg = LimeConfig::new(30, 0.05, 2, 0.01);
    let mut dual_mse = Vec::with_capacity(points);
    let mut lime_mse = Vec::with_capacity(points);
    for (i, x) in test.rows().enumerate() {
        let cfg = DualConfig { k, seed, stream: i as u64, ..Default::default() };
        let dual = explain_local(x, &train.x, &knn, &cfg)?;
        let lime = lime_explain(x, &knn, &lime_cfg, seed, LIME_STREAM_OFFSET + i as u64)?;
        dual_mse.push((f[i] - dual.surrogate().predict(x)).powi(2));
        lime_mse.push((f[i] - lime.model.predict(x)).powi(2));
    }
    Ok(json!({
        "points": test.rows().collect::<Vec<_>>(),
        "dual_mse": dual_mse,
        "lime_mse": lime_mse,
        "dual_median": median(&dual_mse),
        "lime_median": median(&lime_mse),
    }))
}

/// ALE, LR and NAM importances of the triangle example.
pub fn triangle_importance_json(epochs: usize, seed: u64) -> dualex::Result<Value> {
    let id = SyntheticId::ExBased3;
    let mut opts = ExamplesOptions::new(default_alpha(id), seed);
    opts.train.epochs = epochs;
    let out = run_lambda_experiment(id, seed, &opts)?;
    let rows: Vec<Value> = out
        .report
        .aggregate
        .importance_tables
        .iter()
        .map(|t| {
            let name = match t.method {
                ImportanceMethod::Ale => "ALE",
                ImportanceMethod::Lr => "LR",
                ImportanceMethod::Nam => "NAM",
            };
            json!({ "method": name, "normalized": t.normalized })
        })
        .collect();
    let shapes: Vec<Vec<f64>> = out.shapes.values.clone();
    Ok(json!({
        "tables": rows,
        "grid": out.shapes.grid,
        "shapes": shapes,
        "final_loss": out.training.history.last(),
    }))
}

#[wasm_bindgen]
pub fn ring_explain(x1: f64, x2: f64, k: usize, seed: u32) -> Result<String, JsValue> {
    js(ring_explain_json(x1, x2, k, seed as u64))
}

#[wasm_bindgen]
pub fn ring_compare(points: usize, k: usize, seed: u32) -> Result<String, JsValue> {
    js(ring_compare_json(points, k, seed as u64))
}

#[wasm_bindgen]
pub fn triangle_importance(epochs: usize, seed: u32) -> Result<String, JsValue> {
    js(triangle_importance_json(epochs, seed as u64))
}
