//! Datasets: synthetic generators, CSV ingestion/export, z-scoring and
//! test points on segments between hull vertices.

use std::fmt;
use std::fs::File;
use std::io::{BufWriter, Write};
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::blackbox::AnalyticFn;
use crate::error::{ensure_finite, Error, Result};
use crate::geometry::{find_extreme_points, PointSet};
use crate::rng::StreamRng;
use crate::simplex::{combine_rows, SimplexSampler};

/// Mean and population standard deviation of a standardized column.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ZScore {
    pub mean: f64,
    pub std: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Dataset {
    pub x: PointSet,
    pub y: Option<Vec<f64>>,
    pub feature_names: Vec<String>,
    pub target_name: Option<String>,
    pub normalization: Option<Vec<ZScore>>,
}

impl Dataset {
    pub fn new(x: PointSet, y: Option<Vec<f64>>) -> Result<Self> {
        if let Some(y) = &y {
            if y.len() != x.len() {
                return Err(Error::invalid(format!("{} rows but {} targets", x.len(), y.len())));
            }
            ensure_finite(y, "targets")?;
        }
        let feature_names = (1..=x.dim()).map(|j| format!("x{j}")).collect();
        let target_name = y.as_ref().map(|_| "y".to_string());
        Ok(Self { x, y, feature_names, target_name, normalization: None })
    }

    pub fn with_names(mut self, features: &[&str], target: &str) -> Self {
        self.feature_names = features.iter().map(|s| s.to_string()).collect();
        if self.y.is_some() {
            self.target_name = Some(target.to_string());
        }
        self
    }

    pub fn len(&self) -> usize {
        self.x.len()
    }

    pub fn is_empty(&self) -> bool {
        self.x.is_empty()
    }

    pub fn dim(&self) -> usize {
        self.x.dim()
    }

    pub fn targets(&self) -> Result<&[f64]> {
        self.y.as_deref().ok_or_else(|| Error::Config("dataset has no target column".into()))
    }

    /// Standardizes every feature column in place. Constant columns are
    /// centered and keep scale 1.
    pub fn zscore(&mut self) {
        let n = self.len() as f64;
        let m = self.dim();
        let mut stats = Vec::with_capacity(m);
        for j in 0..m {
            let col = self.x.column(j);
            let mean = col.iter().sum::<f64>() / n;
            let var = col.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
            let std = if var > 0.0 { var.sqrt() } else { 1.0 };
            stats.push(ZScore { mean, std });
        }
        let data: Vec<f64> = self
            .x
            .rows()
            .flat_map(|r| r.iter().zip(&stats).map(|(v, s)| (v - s.mean) / s.std).collect::<Vec<_>>())
            .collect();
        self.x = PointSet::from_flat(m, data).expect("finite by construction");
        self.normalization = Some(stats);
    }

    /// Maps a standardized row back to original units.
    pub fn denormalize(&self, row: &[f64]) -> Vec<f64> {
        match &self.normalization {
            Some(stats) => row.iter().zip(stats).map(|(v, s)| v * s.std + s.mean).collect(),
            None => row.to_vec(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum TargetColumn {
    None,
    Last,
    Named(String),
}

fn ingest(path: &Path, message: impl Into<String>) -> Error {
    Error::Ingestion { path: path.to_path_buf(), message: message.into() }
}

/// Reads a comma-separated table with a header row. `target` selects the
/// response column, either by header name or by zero-based index.
pub fn load_csv(path: &Path, target: &TargetColumn, zscore: bool) -> Result<Dataset> {
    let file = File::open(path).map_err(|e| Error::io(path, e))?;
    let mut reader = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(file);
    let headers: Vec<String> = reader
        .headers()
        .map_err(|e| ingest(path, format!("cannot read header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if headers.is_empty() || headers.iter().all(|h| h.is_empty()) {
        return Err(ingest(path, "empty header row"));
    }
    let target_idx = match target {
        TargetColumn::None => None,
        TargetColumn::Last => Some(headers.len() - 1),
        TargetColumn::Named(name) => Some(
            headers
                .iter()
                .position(|h| h == name)
                .or_else(|| name.parse::<usize>().ok().filter(|&i| i < headers.len()))
                .ok_or_else(|| ingest(path, format!("no column named '{name}' (columns: {})", headers.join(", "))))?,
        ),
    };
    let m = headers.len() - usize::from(target_idx.is_some());
    if m == 0 {
        return Err(ingest(path, "no feature columns"));
    }
    let mut x = PointSet::with_dim(m);
    let mut y = Vec::new();
    for (r, record) in reader.records().enumerate() {
        let line = r + 2;
        let record = record.map_err(|e| match e.kind() {
            csv::ErrorKind::UnequalLengths { expected_len, len, .. } => {
                ingest(path, format!("line {line}: expected {expected_len} fields, found {len}"))
            }
            _ => ingest(path, format!("line {line}: {e}")),
        })?;
        let mut row = Vec::with_capacity(m);
        for (c, cell) in record.iter().enumerate() {
            let v: f64 = cell
                .parse()
                .map_err(|_| ingest(path, format!("line {line}, column '{}': not a number: {cell:?}", headers[c])))?;
            if !v.is_finite() {
                return Err(ingest(path, format!("line {line}, column '{}': non-finite value", headers[c])));
            }
            if Some(c) == target_idx {
                y.push(v);
            } else {
                row.push(v);
            }
        }
        x.push(&row).map_err(|e| ingest(path, format!("line {line}: {e}")))?;
    }
    if x.is_empty() {
        return Err(ingest(path, "no data rows"));
    }
    let feature_names =
        headers.iter().enumerate().filter(|(i, _)| Some(*i) != target_idx).map(|(_, h)| h.clone()).collect();
    let mut ds = Dataset {
        x,
        y: target_idx.map(|_| y),
        feature_names,
        target_name: target_idx.map(|i| headers[i].clone()),
        normalization: None,
    };
    if zscore {
        ds.zscore();
    }
    Ok(ds)
}

/// Writes features then the target (if any), with a header row. Values use
/// the shortest representation that round-trips.
pub fn write_csv(ds: &Dataset, path: &Path) -> Result<()> {
    let file = File::create(path).map_err(|e| Error::io(path, e))?;
    let mut w = BufWriter::new(file);
    let mut header = ds.feature_names.join(",");
    if let Some(t) = &ds.target_name {
        header.push(',');
        header.push_str(t);
    }
    let mut out = header;
    out.push('\n');
    for (i, row) in ds.x.rows().enumerate() {
        let mut cells: Vec<String> = row.iter().map(|v| v.to_string()).collect();
        if let Some(y) = &ds.y {
            cells.push(y[i].to_string());
        }
        out.push_str(&cells.join(","));
        out.push('\n');
    }
    w.write_all(out.as_bytes()).and_then(|_| w.flush()).map_err(|e| Error::io(path, e))
}

const STREAM_X: u64 = 0;
const STREAM_NOISE: u64 = 1;

fn noisy(f: AnalyticFn, x: &PointSet, noise_sd: f64, seed: u64, stream: u64) -> Vec<f64> {
    let mut rng = StreamRng::new(seed, stream);
    x.rows().map(|r| f.eval(r) + noise_sd * rng.normal()).collect()
}

fn uniform_box(n: usize, m: usize, lo: f64, hi: f64, seed: u64, stream: u64) -> PointSet {
    let mut rng = StreamRng::new(seed, stream);
    let data = (0..n * m).map(|_| rng.uniform_in(lo, hi)).collect();
    PointSet::from_flat(m, data).expect("finite")
}

/// `n` points uniform on `[0, 1]^7` with targets from [`AnalyticFn::Linear7`].
pub fn gen_linear7(n: usize, noise_sd: f64, seed: u64) -> Dataset {
    let x = uniform_box(n, 7, 0.0, 1.0, seed, STREAM_X);
    let y = noisy(AnalyticFn::Linear7, &x, noise_sd, seed, STREAM_NOISE);
    Dataset::new(x, Some(y)).expect("consistent")
}

/// `n` points uniform on `[lo, hi]^2` with targets from [`AnalyticFn::Quad2`].
pub fn gen_quad2(n: usize, lo: f64, hi: f64, noise_sd: f64, seed: u64) -> Dataset {
    let x = uniform_box(n, 2, lo, hi, seed, STREAM_X);
    let y = noisy(AnalyticFn::Quad2, &x, noise_sd, seed, STREAM_NOISE);
    Dataset::new(x, Some(y)).expect("consistent")
}

/// Points `rho (cos phi, sin phi)` with `rho^2 ~ U[lo, hi]`, `phi ~ U[0, 2 pi]`
/// and targets `||x||^2 + noise`. `stream` separates independent draws made
/// with the same seed (training vs. test sets).
pub fn gen_ring(n: usize, rho_sq: (f64, f64), noise_sd: f64, seed: u64, stream: u64) -> Result<Dataset> {
    let (lo, hi) = rho_sq;
    if !(0.0 <= lo && lo < hi) {
        return Err(Error::invalid(format!("ring range must satisfy 0 <= lo < hi, got [{lo}, {hi}]")));
    }
    let mut rng = StreamRng::new(seed, 2 * stream);
    let mut x = PointSet::with_dim(2);
    for _ in 0..n {
        let r2 = rng.uniform_in(lo, hi);
        let phi = rng.uniform_in(0.0, std::f64::consts::TAU);
        let rho = r2.sqrt();
        x.push(&[rho * phi.cos(), rho * phi.sin()])?;
    }
    let y = noisy(AnalyticFn::Ring, &x, noise_sd, seed, 2 * stream + 1);
    Dataset::new(x, Some(y))
}

/// Training data for the power-plant experiment when the real table is not
/// available: same columns (AT, V, AP, RH -> PE) and similar ranges, drawn
/// from a smooth made-up response surface. It is *not* the real dataset.
pub fn gen_synthetic_ccpp(n: usize, seed: u64) -> Dataset {
    let mut rng = StreamRng::new(seed, STREAM_X);
    let mut x = PointSet::with_dim(4);
    let mut y = Vec::with_capacity(n);
    for _ in 0..n {
        let at = rng.uniform_in(2.0, 36.0);
        let v = (26.0 + 1.25 * at + 6.0 * rng.normal()).clamp(25.0, 81.5);
        let ap = (1013.0 - 0.3 * (at - 20.0) + 5.0 * rng.normal()).clamp(992.0, 1033.0);
        let rh = (96.0 - 1.2 * at + 10.0 * rng.normal()).clamp(25.0, 100.0);
        let pe = 497.0 - 1.75 * at - 0.28 * v + 0.07 * (ap - 1013.0) - 0.15 * (rh - 70.0) - 0.012 * (at - 20.0).powi(2)
            + 2.5 * (0.2 * v).sin()
            + 3.0 * rng.normal();
        let round = |v: f64, k: f64| (v * k).round() / k;
        x.push(&[round(at, 100.0), round(v, 100.0), round(ap, 100.0), round(rh, 100.0)]).expect("finite");
        y.push(round(pe, 100.0));
    }
    Dataset::new(x, Some(y)).expect("consistent").with_names(&["AT", "V", "AP", "RH"], "PE")
}

/// Dual-coordinate training data for the example-based experiments.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LambdaDataset {
    pub lambdas: PointSet,
    pub z: Vec<f64>,
    /// Primal vertices when the black box is defined in primal space.
    pub vertices: Option<PointSet>,
    pub function: AnalyticFn,
    /// L2 coefficient for the additive model fitted to this data.
    pub alpha: f64,
}

pub fn triangle_vertices() -> PointSet {
    PointSet::from_rows(&[[-1.0, -1.0], [0.0, 2.0], [1.0, 0.0]]).expect("finite")
}

/// `n` uniform simplex samples over `vertices` with the black box evaluated
/// at their primal images.
pub fn gen_polytope_lambdas(
    vertices: &PointSet,
    function: AnalyticFn,
    n: usize,
    seed: u64,
    alpha: f64,
) -> Result<LambdaDataset> {
    let mut s = SimplexSampler::new(vertices.len(), seed, STREAM_X)?;
    let lambdas = s.sample(n)?;
    let z = lambdas.rows().map(|l| combine_rows(l, vertices).map(|x| function.eval(&x))).collect::<Result<_>>()?;
    Ok(LambdaDataset { lambdas, z, vertices: Some(vertices.clone()), function, alpha })
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SyntheticId {
    FeatEx1,
    FeatEx2a,
    FeatEx2b,
    FeatEx3,
    ExBased1,
    ExBased2,
    ExBased3,
    CcppSynthetic,
}

impl SyntheticId {
    pub const ALL: [SyntheticId; 8] = [
        SyntheticId::FeatEx1,
        SyntheticId::FeatEx2a,
        SyntheticId::FeatEx2b,
        SyntheticId::FeatEx3,
        SyntheticId::ExBased1,
        SyntheticId::ExBased2,
        SyntheticId::ExBased3,
        SyntheticId::CcppSynthetic,
    ];

    pub fn name(self) -> &'static str {
        match self {
            SyntheticId::FeatEx1 => "feat-ex1",
            SyntheticId::FeatEx2a => "feat-ex2a",
            SyntheticId::FeatEx2b => "feat-ex2b",
            SyntheticId::FeatEx3 => "feat-ex3",
            SyntheticId::ExBased1 => "ex-based-1",
            SyntheticId::ExBased2 => "ex-based-2",
            SyntheticId::ExBased3 => "ex-based-3",
            SyntheticId::CcppSynthetic => "ccpp-synthetic",
        }
    }

    pub fn is_example_based(self) -> bool {
        matches!(self, SyntheticId::ExBased1 | SyntheticId::ExBased2 | SyntheticId::ExBased3)
    }

    /// The closed-form function behind the experiment, if there is one.
    pub fn function(self) -> Option<AnalyticFn> {
        match self {
            SyntheticId::FeatEx1 => Some(AnalyticFn::Linear7),
            SyntheticId::FeatEx2a | SyntheticId::FeatEx2b => Some(AnalyticFn::Quad2),
            SyntheticId::FeatEx3 => Some(AnalyticFn::Ring),
            SyntheticId::ExBased1 => Some(AnalyticFn::LambdaHump),
            SyntheticId::ExBased2 => Some(AnalyticFn::LambdaPoly),
            SyntheticId::ExBased3 => Some(AnalyticFn::Sign),
            SyntheticId::CcppSynthetic => None,
        }
    }
}

impl fmt::Display for SyntheticId {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SyntheticId {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        SyntheticId::ALL.into_iter().find(|id| id.name() == s).ok_or_else(|| {
            let known: Vec<&str> = SyntheticId::ALL.iter().map(|i| i.name()).collect();
            Error::invalid(format!("unknown dataset id '{s}' (known: {})", known.join(", ")))
        })
    }
}

pub const RING_TRAIN: (f64, f64) = (0.0, 4.0);
pub const RING_TEST: (f64, f64) = (3.61, 4.0);

/// Training set of a feature-based experiment.
pub fn gen_feature_dataset(id: SyntheticId, seed: u64) -> Result<Dataset> {
    match id {
        SyntheticId::FeatEx1 => Ok(gen_linear7(1000, 0.1, seed)),
        SyntheticId::FeatEx2a => Ok(gen_quad2(400, 0.0, 1.0, 0.05, seed)),
        SyntheticId::FeatEx2b => Ok(gen_quad2(400, 15.0, 16.0, 0.05, seed)),
        SyntheticId::FeatEx3 => gen_ring(400, RING_TRAIN, 0.05, seed, 0),
        SyntheticId::CcppSynthetic => Ok(gen_synthetic_ccpp(500, seed)),
        other => Err(Error::Config(format!("'{other}' is an example-based experiment"))),
    }
}

pub fn gen_lambda_experiment(id: SyntheticId, seed: u64) -> Result<LambdaDataset> {
    let on_simplex = |d: usize, n: usize, f: AnalyticFn, alpha: f64| -> Result<LambdaDataset> {
        let lambdas = SimplexSampler::new(d, seed, STREAM_X)?.sample(n)?;
        let z = lambdas.rows().map(|l| f.eval(l)).collect();
        Ok(LambdaDataset { lambdas, z, vertices: None, function: f, alpha })
    };
    match id {
        SyntheticId::ExBased1 => on_simplex(6, 2000, AnalyticFn::LambdaHump, 1e-4),
        SyntheticId::ExBased2 => on_simplex(4, 1000, AnalyticFn::LambdaPoly, 1e-6),
        SyntheticId::ExBased3 => gen_polytope_lambdas(&triangle_vertices(), AnalyticFn::Sign, 1000, seed, 0.0),
        other => Err(Error::Config(format!("'{other}' is not an example-based experiment"))),
    }
}

impl LambdaDataset {
    /// Columns `l1..ld` then `z`.
    pub fn to_dataset(&self) -> Dataset {
        let names: Vec<String> = (1..=self.lambdas.dim()).map(|k| format!("l{k}")).collect();
        let refs: Vec<&str> = names.iter().map(String::as_str).collect();
        Dataset::new(self.lambdas.clone(), Some(self.z.clone())).expect("consistent").with_names(&refs, "z")
    }
}

/// `l` points on segments between random pairs of distinct extreme points
/// of `train`.
pub fn gen_edge_testset(train: &PointSet, l: usize, seed: u64) -> Result<PointSet> {
    let poly = find_extreme_points(train, train.default_tol())?;
    let d = poly.d();
    if d < 2 {
        return Err(Error::DegenerateHull(format!("need at least 2 extreme points for edge test points, found {d}")));
    }
    let ext = poly.extremes();
    let mut rng = StreamRng::new(seed, STREAM_X);
    let mut out = PointSet::with_dim(train.dim());
    for _ in 0..l {
        let j1 = rng.below(d);
        let mut j2 = rng.below(d - 1);
        if j2 >= j1 {
            j2 += 1;
        }
        let lam = rng.uniform();
        let p: Vec<f64> = ext.row(j1).iter().zip(ext.row(j2)).map(|(a, b)| lam * a + (1.0 - lam) * b).collect();
        out.push(&p)?;
    }
    Ok(out)
}
