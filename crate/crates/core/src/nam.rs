//! Neural additive model over dual coordinates: one 1 -> h -> h -> 1 ReLU
//! subnetwork per coordinate, outputs summed, trained with Adam on
//! `sum_i (z_i - sum_k h_k(lambda_ik))^2 + alpha * ||w||^2` (biases excluded).
//!
//! Parameters live in one flat vector. Subnet `k` occupies
//! `[k * P, (k + 1) * P)` with `P = 4h + h^2 + 1`, laid out as
//! `W1 (h) | b1 (h) | W2 (h x h, row-major, W2[i][j] maps unit j to unit i) | b2 (h) | W3 (h) | b3 (1)`.

use std::fmt::Write as _;
use std::path::Path;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};
use crate::geometry::PointSet;
use crate::rng::StreamRng;

pub const DEFAULT_HIDDEN: usize = 64;
const FORMAT_HEADER: &str = "dualex-nam v1";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub lr: f64,
    pub alpha: f64,
    pub epochs: usize,
    pub batch: usize,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
    pub seed: u64,
}

impl TrainConfig {
    pub fn new(alpha: f64, seed: u64) -> Self {
        TrainConfig { lr: 5e-4, alpha, epochs: 300, batch: 128, beta1: 0.9, beta2: 0.999, eps: 1e-8, seed }
    }

    pub fn validate(&self) -> Result<()> {
        let pos = [self.lr, self.beta1, self.beta2, self.eps];
        if pos.iter().any(|v| !(v.is_finite() && *v > 0.0))
            || !(self.alpha.is_finite() && self.alpha >= 0.0)
            || self.beta1 >= 1.0
            || self.beta2 >= 1.0
            || self.epochs == 0
            || self.batch == 0
        {
            return Err(Error::Config(format!("invalid NAM training configuration {self:?}")));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrainReport {
    /// Full-data loss before training, then the loss accumulated over each epoch.
    pub history: Vec<f64>,
    pub steps: usize,
}

/// Per-coordinate shape tables on a shared grid, each shifted to zero mean.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ShapeTable {
    pub grid: Vec<f64>,
    pub values: Vec<Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq)]
pub struct AdditiveNet {
    d: usize,
    hidden: usize,
    params: Vec<f64>,
}

struct Cache {
    a1: DMatrix<f64>,
    z1: DMatrix<f64>,
    a2: DMatrix<f64>,
    z2: DMatrix<f64>,
    out: DVector<f64>,
}

pub fn subnet_param_count(hidden: usize) -> usize {
    4 * hidden + hidden * hidden + 1
}

pub fn param_count(d: usize, hidden: usize) -> usize {
    d * subnet_param_count(hidden)
}

fn relu(m: &DMatrix<f64>) -> DMatrix<f64> {
    m.map(|v| v.max(0.0))
}

impl AdditiveNet {
    /// Fan-in uniform weights `U(-1/sqrt(fan_in), 1/sqrt(fan_in))`, zero biases.
    pub fn new(d: usize, seed: u64) -> Result<Self> {
        Self::with_hidden(d, DEFAULT_HIDDEN, seed)
    }

    pub fn with_hidden(d: usize, hidden: usize, seed: u64) -> Result<Self> {
        if d == 0 || hidden == 0 {
            return Err(Error::invalid("additive net needs d >= 1 and hidden >= 1"));
        }
        let mut net = AdditiveNet { d, hidden, params: vec![0.0; param_count(d, hidden)] };
        let mut rng = StreamRng::new(seed, 0);
        let bound_h = 1.0 / (hidden as f64).sqrt();
        for k in 0..d {
            let o = net.offsets(k);
            let p = &mut net.params;
            for v in &mut p[o.w1..o.w1 + hidden] {
                *v = rng.uniform_in(-1.0, 1.0);
            }
            for v in &mut p[o.w2..o.w2 + hidden * hidden] {
                *v = rng.uniform_in(-bound_h, bound_h);
            }
            for v in &mut p[o.w3..o.w3 + hidden] {
                *v = rng.uniform_in(-bound_h, bound_h);
            }
        }
        Ok(net)
    }

    pub fn from_params(d: usize, hidden: usize, params: Vec<f64>) -> Result<Self> {
        if d == 0 || hidden == 0 || params.len() != param_count(d, hidden) {
            return Err(Error::invalid(format!(
                "expected {} parameters for d = {d}, hidden = {hidden}, got {}",
                param_count(d, hidden),
                params.len()
            )));
        }
        ensure_finite(&params, "network parameters")?;
        Ok(AdditiveNet { d, hidden, params })
    }

    pub fn d(&self) -> usize {
        self.d
    }

    pub fn hidden(&self) -> usize {
        self.hidden
    }

    pub fn params(&self) -> &[f64] {
        &self.params
    }

    pub fn params_mut(&mut self) -> &mut [f64] {
        &mut self.params
    }

    /// Sets every output-layer weight and bias to zero.
    pub fn zero_output_layer(&mut self) {
        for k in 0..self.d {
            let o = self.offsets(k);
            self.params[o.w3..=o.b3].iter_mut().for_each(|v| *v = 0.0);
        }
    }

    fn offsets(&self, k: usize) -> Offsets {
        let h = self.hidden;
        let base = k * subnet_param_count(h);
        Offsets {
            w1: base,
            b1: base + h,
            w2: base + 2 * h,
            b2: base + 2 * h + h * h,
            w3: base + 3 * h + h * h,
            b3: base + 4 * h + h * h,
        }
    }

    /// Whether parameter `i` is a weight (penalized) rather than a bias.
    pub fn is_weight(&self, i: usize) -> bool {
        let h = self.hidden;
        let local = i % subnet_param_count(h);
        local < h || (2 * h..2 * h + h * h).contains(&local) || (3 * h + h * h..4 * h + h * h).contains(&local)
    }

    fn subnet_forward(&self, k: usize, x: &[f64]) -> Cache {
        let h = self.hidden;
        let o = self.offsets(k);
        let p = &self.params;
        let b = x.len();
        let a1 = DMatrix::from_fn(b, h, |r, c| x[r] * p[o.w1 + c] + p[o.b1 + c]);
        let z1 = relu(&a1);
        let w2t = DMatrix::from_column_slice(h, h, &p[o.w2..o.w2 + h * h]);
        let mut a2 = &z1 * &w2t;
        for c in 0..h {
            let bias = p[o.b2 + c];
            a2.column_mut(c).add_scalar_mut(bias);
        }
        let z2 = relu(&a2);
        let w3 = DVector::from_column_slice(&p[o.w3..o.w3 + h]);
        let mut out = &z2 * &w3;
        out.add_scalar_mut(p[o.b3]);
        Cache { a1, z1, a2, z2, out }
    }

    /// `h_k(x)` for every value in `x`.
    pub fn shape(&self, k: usize, x: &[f64]) -> Result<Vec<f64>> {
        if k >= self.d {
            return Err(Error::invalid(format!("shape index {k} out of range for d = {}", self.d)));
        }
        ensure_finite(x, "shape inputs")?;
        Ok(self.subnet_forward(k, x).out.as_slice().to_vec())
    }

    fn check_inputs(&self, lambdas: &PointSet) -> Result<()> {
        if lambdas.dim() != self.d {
            return Err(Error::invalid(format!(
                "input dimension {} does not match the network's d = {}",
                lambdas.dim(),
                self.d
            )));
        }
        ensure_finite(lambdas.as_flat(), "network inputs")
    }

    /// `values[k][i] = h_k(lambda_ik)`.
    pub fn shape_values(&self, lambdas: &PointSet) -> Result<Vec<Vec<f64>>> {
        self.check_inputs(lambdas)?;
        (0..self.d).map(|k| self.shape(k, &lambdas.column(k))).collect()
    }

    /// Total output and the per-coordinate terms; the total is their sum.
    pub fn forward(&self, lambda: &[f64]) -> Result<(f64, Vec<f64>)> {
        if lambda.len() != self.d {
            return Err(Error::invalid(format!(
                "input dimension {} does not match the network's d = {}",
                lambda.len(),
                self.d
            )));
        }
        ensure_finite(lambda, "network input")?;
        let parts: Vec<f64> = (0..self.d).map(|k| self.subnet_forward(k, &lambda[k..=k]).out[0]).collect();
        Ok((parts.iter().sum(), parts))
    }

    pub fn predict_batch(&self, lambdas: &PointSet) -> Result<Vec<f64>> {
        let shapes = self.shape_values(lambdas)?;
        Ok((0..lambdas.len()).map(|i| shapes.iter().map(|s| s[i]).sum()).collect())
    }

    fn weight_penalty(&self) -> f64 {
        self.params.iter().enumerate().filter(|(i, _)| self.is_weight(*i)).map(|(_, v)| v * v).sum()
    }

    fn check_batch(&self, lambdas: &PointSet, z: &[f64]) -> Result<()> {
        self.check_inputs(lambdas)?;
        if lambdas.is_empty() || z.len() != lambdas.len() {
            return Err(Error::invalid(format!(
                "batch needs matching nonempty inputs and targets (got {} and {})",
                lambdas.len(),
                z.len()
            )));
        }
        ensure_finite(z, "targets")
    }

    pub fn loss(&self, lambdas: &PointSet, z: &[f64], alpha: f64) -> Result<f64> {
        self.check_batch(lambdas, z)?;
        let pred = self.predict_batch(lambdas)?;
        let sse: f64 = pred.iter().zip(z).map(|(p, t)| (t - p).powi(2)).sum();
        Ok(sse + alpha * self.weight_penalty())
    }

    pub fn gradient(&self, lambdas: &PointSet, z: &[f64], alpha: f64) -> Result<Vec<f64>> {
        self.check_batch(lambdas, z)?;
        let cols: Vec<Vec<f64>> = (0..self.d).map(|k| lambdas.column(k)).collect();
        let mut grad = vec![0.0; self.params.len()];
        self.accumulate_gradient(&cols, z, alpha, &mut grad);
        Ok(grad)
    }

    /// Writes the loss gradient into `grad`; returns the sum of squared errors.
    fn accumulate_gradient(&self, cols: &[Vec<f64>], z: &[f64], alpha: f64, grad: &mut [f64]) -> f64 {
        let h = self.hidden;
        let caches: Vec<Cache> = (0..self.d).map(|k| self.subnet_forward(k, &cols[k])).collect();
        let mut resid = DVector::from_column_slice(z);
        for c in &caches {
            resid -= &c.out;
        }
        let sse = resid.norm_squared();
        let g = resid * -2.0;
        let p = &self.params;
        for (k, c) in caches.iter().enumerate() {
            let o = self.offsets(k);
            grad[o.b3] = g.sum();
            let dw3 = c.z2.tr_mul(&g);
            grad[o.w3..o.w3 + h].copy_from_slice(dw3.as_slice());
            let w3 = DVector::from_column_slice(&p[o.w3..o.w3 + h]);
            let mut da2 = &g * w3.transpose();
            da2.zip_apply(&c.a2, |d, a| {
                if a <= 0.0 {
                    *d = 0.0
                }
            });
            // row-major dW2 is the column-major storage of z1^T da2
            let dw2 = c.z1.tr_mul(&da2);
            grad[o.w2..o.w2 + h * h].copy_from_slice(dw2.as_slice());
            for i in 0..h {
                grad[o.b2 + i] = da2.column(i).sum();
            }
            let w2 = DMatrix::from_row_slice(h, h, &p[o.w2..o.w2 + h * h]);
            let mut da1 = &da2 * &w2;
            da1.zip_apply(&c.a1, |d, a| {
                if a <= 0.0 {
                    *d = 0.0
                }
            });
            let x = &cols[k];
            for i in 0..h {
                let col = da1.column(i);
                grad[o.b1 + i] = col.sum();
                grad[o.w1 + i] = col.iter().zip(x).map(|(d, xv)| d * xv).sum();
            }
        }
        if alpha != 0.0 {
            for (i, gi) in grad.iter_mut().enumerate() {
                if self.is_weight(i) {
                    *gi += 2.0 * alpha * p[i];
                }
            }
        }
        sse
    }

    /// Adam on shuffled mini-batches; the shuffle uses stream 1 of `cfg.seed`.
    pub fn train(&mut self, lambdas: &PointSet, z: &[f64], cfg: &TrainConfig) -> Result<TrainReport> {
        cfg.validate()?;
        self.check_batch(lambdas, z)?;
        let n = lambdas.len();
        let batch = cfg.batch.min(n);
        let mut history = vec![self.loss(lambdas, z, cfg.alpha)?];
        let mut m = vec![0.0; self.params.len()];
        let mut v = vec![0.0; self.params.len()];
        let mut grad = vec![0.0; self.params.len()];
        let mut order: Vec<usize> = (0..n).collect();
        let mut rng = StreamRng::new(cfg.seed, 1);
        let mut step = 0usize;
        let (mut b1t, mut b2t) = (1.0, 1.0);
        for _ in 0..cfg.epochs {
            rng.shuffle(&mut order);
            let mut epoch_sse = 0.0;
            for chunk in order.chunks(batch) {
                step += 1;
                let cols: Vec<Vec<f64>> =
                    (0..self.d).map(|k| chunk.iter().map(|&i| lambdas.row(i)[k]).collect()).collect();
                let zb: Vec<f64> = chunk.iter().map(|&i| z[i]).collect();
                let sse = self.accumulate_gradient(&cols, &zb, cfg.alpha, &mut grad);
                let loss = sse + cfg.alpha * self.weight_penalty();
                if !loss.is_finite() || grad.iter().any(|g| !g.is_finite()) {
                    return Err(Error::Training { step, loss });
                }
                epoch_sse += sse;
                b1t *= cfg.beta1;
                b2t *= cfg.beta2;
                for i in 0..self.params.len() {
                    m[i] = cfg.beta1 * m[i] + (1.0 - cfg.beta1) * grad[i];
                    v[i] = cfg.beta2 * v[i] + (1.0 - cfg.beta2) * grad[i] * grad[i];
                    let mh = m[i] / (1.0 - b1t);
                    let vh = v[i] / (1.0 - b2t);
                    self.params[i] -= cfg.lr * mh / (vh.sqrt() + cfg.eps);
                }
            }
            let loss = epoch_sse + cfg.alpha * self.weight_penalty();
            if !loss.is_finite() {
                return Err(Error::Training { step, loss });
            }
            history.push(loss);
        }
        Ok(TrainReport { history, steps: step })
    }

    /// Shapes on `grid`, each shifted to zero mean over the grid.
    pub fn extract_shapes(&self, grid: &[f64]) -> Result<ShapeTable> {
        if grid.is_empty() {
            return Err(Error::invalid("shape grid is empty"));
        }
        let mut values = Vec::with_capacity(self.d);
        for k in 0..self.d {
            let mut s = self.shape(k, grid)?;
            let mean = s.iter().sum::<f64>() / s.len() as f64;
            s.iter_mut().for_each(|v| *v -= mean);
            values.push(s);
        }
        Ok(ShapeTable { grid: grid.to_vec(), values })
    }

    pub fn to_text(&self) -> String {
        let mut s = format!("{FORMAT_HEADER}\nd {}\nhidden {}\nparams {}\n", self.d, self.hidden, self.params.len());
        for p in &self.params {
            let _ = writeln!(s, "{p:e}");
        }
        s
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut lines = text.lines();
        if lines.next().map(str::trim) != Some(FORMAT_HEADER) {
            return Err(Error::Format(format!("missing '{FORMAT_HEADER}' header")));
        }
        let mut field = |name: &str| -> Result<usize> {
            let line = lines.next().unwrap_or("");
            line.strip_prefix(name)
                .and_then(|r| r.trim().parse().ok())
                .ok_or_else(|| Error::Format(format!("expected '{name} <count>', found '{line}'")))
        };
        let d = field("d")?;
        let hidden = field("hidden")?;
        let count = field("params")?;
        if d == 0 || hidden == 0 || count != param_count(d, hidden) {
            return Err(Error::Format(format!("parameter count {count} does not match d = {d}, hidden = {hidden}")));
        }
        let params = lines
            .filter(|l| !l.trim().is_empty())
            .map(|l| l.trim().parse::<f64>().map_err(|_| Error::Format(format!("bad parameter '{l}'"))))
            .collect::<Result<Vec<f64>>>()?;
        if params.len() != count {
            return Err(Error::Format(format!("expected {count} parameters, read {}", params.len())));
        }
        Self::from_params(d, hidden, params).map_err(|e| Error::Format(e.to_string()))
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        std::fs::write(path, self.to_text()).map_err(|e| Error::io(path, e))
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_text(&text)
    }
}

struct Offsets {
    w1: usize,
    b1: usize,
    w2: usize,
    b2: usize,
    w3: usize,
    b3: usize,
}

/// One subnet evaluated with scalar loops, recording which hidden units are
/// active. Independent of the matrix path used for training.
fn scalar_subnet(p: &[f64], h: usize, x: f64, active: &mut Vec<bool>) -> f64 {
    let (w1, b1) = (&p[..h], &p[h..2 * h]);
    let w2 = &p[2 * h..2 * h + h * h];
    let b2 = &p[2 * h + h * h..3 * h + h * h];
    let w3 = &p[3 * h + h * h..4 * h + h * h];
    let b3 = p[4 * h + h * h];
    let a1: Vec<f64> = (0..h).map(|j| w1[j] * x + b1[j]).collect();
    active.extend(a1.iter().map(|&a| a > 0.0));
    let z1: Vec<f64> = a1.iter().map(|a| a.max(0.0)).collect();
    let mut out = b3;
    for ((row, bias), w) in w2.chunks_exact(h).zip(b2).zip(w3) {
        let mut acc = [0.0; 4];
        let mut rc = row.chunks_exact(4);
        let mut zc = z1.chunks_exact(4);
        for (r, zz) in (&mut rc).zip(&mut zc) {
            for t in 0..4 {
                acc[t] += r[t] * zz[t];
            }
        }
        let tail: f64 = rc.remainder().iter().zip(zc.remainder()).map(|(r, zz)| r * zz).sum();
        let a = bias + (acc[0] + acc[1]) + (acc[2] + acc[3]) + tail;
        active.push(a > 0.0);
        out += w * a.max(0.0);
    }
    out
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GradientCheck {
    pub max_relative_error: f64,
    pub checked: usize,
    /// Parameters whose `+-step` straddles a ReLU kink on some sample.
    pub skipped: usize,
}

impl AdditiveNet {
    /// Compares [`AdditiveNet::gradient`] with central differences of step
    /// `step` on every parameter, recomputing the loss with scalar loops.
    /// Relative error is `|fd - g| / max(|fd|, |g|, floor)` where
    /// `floor = 1e-5 (1 + loss)` sits above the rounding noise of the
    /// differences.
    pub fn check_gradient(&self, lambdas: &PointSet, z: &[f64], alpha: f64, step: f64) -> Result<GradientCheck> {
        let g = self.gradient(lambdas, z, alpha)?;
        let (d, h) = (self.d, self.hidden);
        let p = subnet_param_count(h);
        let cols: Vec<Vec<f64>> = (0..d).map(|k| lambdas.column(k)).collect();
        let parts: Vec<Vec<f64>> = (0..d).map(|k| self.shape(k, &cols[k])).collect::<Result<_>>()?;
        let floor = 1e-5 * (1.0 + self.loss(lambdas, z, alpha)?);
        let mut out = GradientCheck { max_relative_error: 0.0, checked: 0, skipped: 0 };
        for k in 0..d {
            let others: Vec<f64> =
                (0..z.len()).map(|i| (0..d).filter(|&j| j != k).map(|j| parts[j][i]).sum()).collect();
            let mut local = self.params[k * p..(k + 1) * p].to_vec();
            let base_pen: f64 = (0..p).filter(|&q| self.is_weight(q)).map(|q| local[q] * local[q]).sum();
            let eval = |sub: &[f64], q: usize, orig: f64, active: &mut Vec<bool>| -> f64 {
                active.clear();
                let sse: f64 =
                    (0..z.len()).map(|i| (z[i] - others[i] - scalar_subnet(sub, h, cols[k][i], active)).powi(2)).sum();
                let pen = if self.is_weight(q) { base_pen - orig * orig + sub[q] * sub[q] } else { base_pen };
                sse + alpha * pen
            };
            let (mut up_pattern, mut down_pattern) = (Vec::new(), Vec::new());
            for q in 0..p {
                let orig = local[q];
                local[q] = orig + step;
                let up = eval(&local, q, orig, &mut up_pattern);
                local[q] = orig - step;
                let down = eval(&local, q, orig, &mut down_pattern);
                local[q] = orig;
                if up_pattern != down_pattern {
                    out.skipped += 1;
                    continue;
                }
                let fd = (up - down) / (2.0 * step);
                let an = g[k * p + q];
                let rel = (fd - an).abs() / an.abs().max(fd.abs()).max(floor);
                out.max_relative_error = out.max_relative_error.max(rel);
                out.checked += 1;
            }
        }
        Ok(out)
    }
}

/// `linspace(0, 1, n)`; both endpoints included.
pub fn unit_grid(n: usize) -> Vec<f64> {
    match n {
        0 => Vec::new(),
        1 => vec![0.0],
        _ => (0..n).map(|i| i as f64 / (n - 1) as f64).collect(),
    }
}

fn std_of(values: &[f64]) -> f64 {
    let n = values.len();
    if n < 2 {
        return 0.0;
    }
    let mean = values.iter().sum::<f64>() / n as f64;
    (values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / (n - 1) as f64).sqrt()
}

fn shifted(h: &[f64], lambdas: &PointSet, k: usize, c: f64) -> Vec<f64> {
    h.iter().zip(lambdas.rows()).map(|(v, l)| v + c * l[k]).collect()
}

/// On the simplex, `h_k(l) + c * l` for a shared `c` gives the same total
/// (the extra terms sum to `c`). Returns the `c` minimizing
/// `sum_k std_i(h_k(lambda_ik) + c * lambda_ik)`, which is convex in `c`.
pub fn gauge_slope(shapes: &[Vec<f64>], lambdas: &PointSet) -> f64 {
    let spread = |c: f64| -> f64 { shapes.iter().enumerate().map(|(k, h)| std_of(&shifted(h, lambdas, k, c))).sum() };
    let sh: f64 = shapes.iter().map(|h| std_of(h)).sum();
    let sl: f64 = (0..lambdas.dim()).map(|k| std_of(&lambdas.column(k))).sum();
    if sl <= 0.0 || sh <= 0.0 {
        return 0.0;
    }
    let bound = 2.0 * sh / sl;
    let (mut lo, mut hi) = (-bound, bound);
    for _ in 0..200 {
        let m1 = lo + (hi - lo) / 3.0;
        let m2 = hi - (hi - lo) / 3.0;
        if spread(m1) <= spread(m2) {
            hi = m2;
        } else {
            lo = m1;
        }
        if hi - lo <= 1e-12 * (1.0 + bound) {
            break;
        }
    }
    0.5 * (lo + hi)
}
