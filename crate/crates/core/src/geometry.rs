//! Convex-hull predicates without facet enumeration.
//!
//! Everything here reduces to one primitive: the least-distance projection
//! of a query onto the convex hull of a finite reference set, i.e.
//!
//! ```text
//! minimize || sum_j w_j p_j - q ||^2   subject to  w >= 0, sum_j w_j = 1
//! ```
//!
//! solved by conditional gradient with away steps. After every major step
//! the iterate is refined on its active face (the affine minimizer over the
//! current support, followed back to the simplex boundary when it leaves
//! it), which makes the solver terminate in a handful of iterations on the
//! small hulls used by the explainers.
//!
//! Extreme points are then identified one at a time: a point is extreme iff
//! it is farther than `tol` from the hull of all other points.

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::error::{ensure_finite, Error, Result};

pub const DEFAULT_MAX_ITER: usize = 2000;

/// Row-major set of `m`-dimensional points. Also used as the crate's dense
/// matrix type (datasets, simplex samples, extreme-point matrices).
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct PointSet {
    dim: usize,
    data: Vec<f64>,
}

impl PointSet {
    pub fn with_dim(dim: usize) -> Self {
        Self { dim, data: Vec::new() }
    }

    pub fn from_flat(dim: usize, data: Vec<f64>) -> Result<Self> {
        if dim == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        if data.len() % dim != 0 {
            return Err(Error::invalid(format!(
                "flat buffer of length {} is not a multiple of dimension {dim}",
                data.len()
            )));
        }
        ensure_finite(&data, "point coordinates")?;
        Ok(Self { dim, data })
    }

    pub fn from_rows<R: AsRef<[f64]>>(rows: &[R]) -> Result<Self> {
        let first = rows.first().ok_or_else(|| Error::invalid("point set must contain at least one point"))?;
        let dim = first.as_ref().len();
        let mut set = Self::with_dim(dim);
        for row in rows {
            set.push(row.as_ref())?;
        }
        if dim == 0 {
            return Err(Error::invalid("point dimension must be at least 1"));
        }
        Ok(set)
    }

    pub fn push(&mut self, row: &[f64]) -> Result<()> {
        if row.len() != self.dim {
            return Err(Error::invalid(format!(
                "point {} has {} coordinates, expected {}",
                self.len(),
                row.len(),
                self.dim
            )));
        }
        ensure_finite(row, "point coordinates")?;
        self.data.extend_from_slice(row);
        Ok(())
    }

    #[inline]
    pub fn dim(&self) -> usize {
        self.dim
    }

    #[inline]
    pub fn len(&self) -> usize {
        if self.dim == 0 {
            0
        } else {
            self.data.len() / self.dim
        }
    }

    pub fn is_empty(&self) -> bool {
        self.data.is_empty()
    }

    #[inline]
    pub fn row(&self, i: usize) -> &[f64] {
        &self.data[i * self.dim..(i + 1) * self.dim]
    }

    pub fn rows(&self) -> impl ExactSizeIterator<Item = &[f64]> + '_ {
        self.data.chunks_exact(self.dim.max(1))
    }

    pub fn as_flat(&self) -> &[f64] {
        &self.data
    }

    pub fn column(&self, j: usize) -> Vec<f64> {
        self.rows().map(|r| r[j]).collect()
    }

    pub fn select(&self, indices: &[usize]) -> PointSet {
        let mut out = PointSet::with_dim(self.dim);
        for &i in indices {
            out.data.extend_from_slice(self.row(i));
        }
        out
    }

    /// Length of the bounding-box diagonal; an upper bound on the diameter
    /// that is within a factor `sqrt(m)` of it.
    pub fn extent(&self) -> f64 {
        if self.is_empty() {
            return 0.0;
        }
        (0..self.dim)
            .map(|j| {
                let (lo, hi) =
                    self.rows().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), r| (lo.min(r[j]), hi.max(r[j])));
                (hi - lo).powi(2)
            })
            .sum::<f64>()
            .sqrt()
    }

    /// Geometry tolerance used when the caller does not supply one.
    pub fn default_tol(&self) -> f64 {
        1e-8 * (1.0 + self.extent())
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct HullProjection {
    /// Convex weights over the reference points, in reference order.
    pub weights: Vec<f64>,
    pub image: Vec<f64>,
    pub distance: f64,
    pub iterations: usize,
    /// Whether the distance was certified to be within `tol` of optimal
    /// before `max_iter` ran out.
    pub converged: bool,
}

/// Extreme points of a finite set, in increasing order of their index in
/// the set they were extracted from.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Polytope {
    extremes: PointSet,
    source: Vec<usize>,
    representative: Vec<usize>,
    contains_x0: bool,
    tol: f64,
}

impl Polytope {
    pub fn extremes(&self) -> &PointSet {
        &self.extremes
    }

    /// Number of extreme points.
    pub fn d(&self) -> usize {
        self.extremes.len()
    }

    pub fn dim(&self) -> usize {
        self.extremes.dim()
    }

    /// Index, in the input set, of each extreme point.
    pub fn source_indices(&self) -> &[usize] {
        &self.source
    }

    /// The index that input point `i` collapsed onto during duplicate
    /// removal (itself if it was kept).
    pub fn representative(&self, i: usize) -> usize {
        self.representative[i]
    }

    pub fn contains_x0(&self) -> bool {
        self.contains_x0
    }

    pub fn tol(&self) -> f64 {
        self.tol
    }

    /// Record that input point `index` is the explained point, setting the
    /// flag when it (or the point it was merged with) is a vertex.
    pub fn mark_explained_point(mut self, index: usize) -> Self {
        let rep = self.representative[index];
        self.contains_x0 = self.source.binary_search(&rep).is_ok();
        self
    }
}

#[inline]
fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

#[inline]
fn dist2(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| (x - y) * (x - y)).sum()
}

fn combine(points: &[&[f64]], weights: &[f64], active: &[usize], out: &mut [f64]) {
    out.iter_mut().for_each(|v| *v = 0.0);
    for &j in active {
        let w = weights[j];
        for (o, p) in out.iter_mut().zip(points[j]) {
            *o += w * p;
        }
    }
}

fn renormalize(weights: &mut [f64], active: &[usize]) {
    let s: f64 = active.iter().map(|&j| weights[j]).sum();
    for &j in active {
        weights[j] /= s;
    }
}

/// Affine least-squares minimizer over the points in `active`:
/// `argmin || sum mu_j p_j - q ||` with `sum mu_j = 1`, minimum-norm when the
/// active points are affinely dependent.
fn affine_minimizer(q: &[f64], points: &[&[f64]], active: &[usize]) -> Vec<f64> {
    let m = q.len();
    let s = active.len();
    let base = points[active[0]];
    let b = DMatrix::from_fn(m, s - 1, |i, k| points[active[k + 1]][i] - base[i]);
    let rhs = DVector::from_fn(m, |i, _| q[i] - base[i]);
    let svd = b.svd(true, true);
    let cutoff = svd.singular_values.max() * 1e-12;
    let t = svd.solve(&rhs, cutoff).unwrap_or_else(|_| DVector::zeros(s - 1));
    let mut mu = Vec::with_capacity(s);
    mu.push(1.0 - t.sum());
    mu.extend(t.iter());
    mu
}

/// Moves `weights` toward the affine minimizer of the active face, stopping
/// at the simplex boundary and dropping the vertex that hits it; repeats on
/// the smaller face. Only ever decreases the objective.
fn refine_on_face(
    q: &[f64],
    points: &[&[f64]],
    weights: &mut [f64],
    active: &mut Vec<usize>,
    obj: &mut f64,
    scratch: &mut [f64],
) {
    let mut rounds = active.len();
    while active.len() > 1 && rounds > 0 {
        rounds -= 1;
        let mu = affine_minimizer(q, points, active);
        let current: Vec<f64> = active.iter().map(|&j| weights[j]).collect();
        if mu.iter().all(|&v| v >= 0.0) {
            let saved = current;
            for (k, &j) in active.iter().enumerate() {
                weights[j] = mu[k];
            }
            renormalize(weights, active);
            combine(points, weights, active, scratch);
            let candidate = dist2(scratch, q);
            if candidate <= *obj {
                *obj = candidate;
                active.retain(|&j| weights[j] > 0.0);
            } else {
                for (k, &j) in active.iter().enumerate() {
                    weights[j] = saved[k];
                }
            }
            return;
        }
        // Step toward mu until the first coordinate reaches zero.
        let mut theta = 1.0;
        let mut blocking = 0;
        for (k, (&c, &t)) in current.iter().zip(&mu).enumerate() {
            if t < 0.0 {
                let ratio = c / (c - t);
                if ratio < theta {
                    theta = ratio;
                    blocking = k;
                }
            }
        }
        let saved_active = active.clone();
        for (k, &j) in active.iter().enumerate() {
            weights[j] = (current[k] + theta * (mu[k] - current[k])).max(0.0);
        }
        weights[active[blocking]] = 0.0;
        active.retain(|&j| weights[j] > 0.0);
        renormalize(weights, active);
        combine(points, weights, active, scratch);
        let candidate = dist2(scratch, q);
        if candidate > *obj {
            // Rounding noise only; restore and stop refining.
            for (k, &j) in saved_active.iter().enumerate() {
                weights[j] = current[k];
            }
            *active = saved_active;
            return;
        }
        *obj = candidate;
    }
}

fn project_refs(q: &[f64], points: &[&[f64]], max_iter: usize, tol: f64) -> HullProjection {
    let n = points.len();
    let m = q.len();
    let start =
        (0..n).min_by(|&a, &b| dist2(points[a], q).total_cmp(&dist2(points[b], q))).expect("non-empty reference set");
    let mut weights = vec![0.0; n];
    weights[start] = 1.0;
    let mut active = vec![start];
    let mut x = points[start].to_vec();
    let mut obj = dist2(&x, q);
    let mut scratch = vec![0.0; m];
    let mut residual = vec![0.0; m];
    let mut dots = vec![0.0; n];
    let mut converged = false;
    let mut iterations = 0;

    while iterations < max_iter {
        if obj.sqrt() <= tol {
            converged = true;
            break;
        }
        for i in 0..m {
            residual[i] = x[i] - q[i];
        }
        for (dj, p) in dots.iter_mut().zip(points) {
            *dj = dot(p, &residual);
        }
        let toward = (0..n).min_by(|&a, &b| dots[a].total_cmp(&dots[b])).unwrap();
        let xr = dot(&x, &residual);
        let fw_gap = (xr - dots[toward]).max(0.0);
        // obj - gap lower-bounds the optimal squared distance.
        let lower = (obj - fw_gap).max(0.0).sqrt();
        if obj.sqrt() - lower <= tol {
            converged = true;
            break;
        }
        let away = *active.iter().max_by(|&&a, &&b| dots[a].total_cmp(&dots[b])).unwrap();
        let away_gap = dots[away] - xr;
        let use_away = active.len() > 1 && away_gap > fw_gap;

        let (direction, gamma_max): (Vec<f64>, f64) = if use_away {
            let w = weights[away];
            (x.iter().zip(points[away]).map(|(a, b)| a - b).collect(), w / (1.0 - w))
        } else {
            (points[toward].iter().zip(&x).map(|(a, b)| a - b).collect(), 1.0)
        };
        let dd = dot(&direction, &direction);
        iterations += 1;
        if dd <= 0.0 {
            break;
        }
        let gamma = (-dot(&residual, &direction) / dd).clamp(0.0, gamma_max);
        if gamma <= 0.0 {
            converged = true;
            break;
        }
        let saved_weights = weights.clone();
        if use_away {
            for &j in &active {
                weights[j] *= 1.0 + gamma;
            }
            weights[away] -= gamma;
            if gamma >= gamma_max {
                weights[away] = 0.0;
            }
            active.retain(|&j| weights[j] > 0.0);
        } else if gamma >= 1.0 {
            for &j in &active {
                weights[j] = 0.0;
            }
            weights[toward] = 1.0;
            active.clear();
            active.push(toward);
        } else {
            for &j in &active {
                weights[j] *= 1.0 - gamma;
            }
            weights[toward] += gamma;
            if !active.contains(&toward) {
                active.push(toward);
            }
        }
        renormalize(&mut weights, &active);
        combine(points, &weights, &active, &mut scratch);
        let mut new_obj = dist2(&scratch, q);
        refine_on_face(q, points, &mut weights, &mut active, &mut new_obj, &mut scratch);
        if active.is_empty() || new_obj > obj {
            // Rounding made the step counter-productive; keep the old iterate.
            weights = saved_weights;
            converged = obj.sqrt() - lower <= 4.0 * tol;
            break;
        }
        combine(points, &weights, &active, &mut x);
        obj = dist2(&x, q);
    }

    HullProjection { image: x, distance: obj.sqrt(), weights, iterations, converged }
}

fn check_query(query: &[f64], dim: usize) -> Result<()> {
    if query.len() != dim {
        return Err(Error::invalid(format!("query has {} coordinates, reference points have {dim}", query.len())));
    }
    ensure_finite(query, "query")
}

/// Least-distance projection of `query` onto the convex hull of `refs`.
pub fn project_onto_hull(query: &[f64], refs: &PointSet, max_iter: usize, tol: f64) -> Result<HullProjection> {
    if refs.is_empty() {
        return Err(Error::invalid("reference set is empty"));
    }
    if !(tol > 0.0) {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    check_query(query, refs.dim())?;
    let points: Vec<&[f64]> = refs.rows().collect();
    Ok(project_refs(query, &points, max_iter, tol))
}

fn project_subset(query: &[f64], set: &PointSet, subset: &[usize], tol: f64) -> HullProjection {
    let points: Vec<&[f64]> = subset.iter().map(|&i| set.row(i)).collect();
    project_refs(query, &points, DEFAULT_MAX_ITER, tol)
}

/// Collapses points closer than `tol` onto the lowest-indexed one.
fn representatives(points: &PointSet, tol: f64) -> Vec<usize> {
    let n = points.len();
    let mut order: Vec<usize> = (0..n).collect();
    order.sort_by(|&a, &b| points.row(a)[0].total_cmp(&points.row(b)[0]).then(a.cmp(&b)));
    let mut pos = vec![0; n];
    for (p, &i) in order.iter().enumerate() {
        pos[i] = p;
    }
    let tol2 = tol * tol;
    let mut rep: Vec<usize> = (0..n).collect();
    for i in 0..n {
        let xi = points.row(i);
        let mut best = i;
        let scan = |range: &mut dyn Iterator<Item = usize>, best: &mut usize| {
            for p in range {
                let j = order[p];
                if (points.row(j)[0] - xi[0]).abs() > tol {
                    break;
                }
                if j < *best && rep[j] == j && dist2(points.row(j), xi) <= tol2 {
                    *best = j;
                }
            }
        };
        scan(&mut (pos[i] + 1..n), &mut best);
        scan(&mut (0..pos[i]).rev(), &mut best);
        rep[i] = best;
    }
    rep
}

/// Below this many distinct points every candidate is tested directly
/// against the hull of all the others.
const DIRECT_LIMIT: usize = 48;

fn extreme_direct(points: &PointSet, kept: &[usize], tol: f64) -> Vec<usize> {
    kept.iter()
        .copied()
        .filter(|&i| {
            let others: Vec<usize> = kept.iter().copied().filter(|&j| j != i).collect();
            project_subset(points.row(i), points, &others, tol).distance > tol
        })
        .collect()
}

/// Decides each point against a growing helper set `C` of other points:
/// inside `hull(C)` means not extreme; otherwise the projection residual is
/// a separating direction, and either it certifies the point as extreme or
/// the most extreme point along it joins `C`.
fn extreme_incremental(points: &PointSet, kept: &[usize], tol: f64) -> Vec<usize> {
    let m = points.dim();
    let mut helper: Vec<usize> = Vec::new();
    for j in 0..m {
        let lo = kept.iter().copied().min_by(|&a, &b| points.row(a)[j].total_cmp(&points.row(b)[j])).unwrap();
        let hi = kept
            .iter()
            .copied()
            .max_by(|&a, &b| points.row(a)[j].total_cmp(&points.row(b)[j]).then(b.cmp(&a)))
            .unwrap();
        for c in [lo, hi] {
            if !helper.contains(&c) {
                helper.push(c);
            }
        }
    }

    let mut extremes = Vec::new();
    for &i in kept {
        let p = points.row(i);
        loop {
            let others: Vec<usize> = helper.iter().copied().filter(|&j| j != i).collect();
            if others.is_empty() {
                let far = kept
                    .iter()
                    .copied()
                    .filter(|&j| j != i)
                    .max_by(|&a, &b| dist2(points.row(a), p).total_cmp(&dist2(points.row(b), p)))
                    .unwrap();
                helper.push(far);
                continue;
            }
            let proj = project_subset(p, points, &others, tol);
            if proj.distance <= tol {
                break;
            }
            let w: Vec<f64> = p.iter().zip(&proj.image).map(|(a, b)| (a - b) / proj.distance).collect();
            let (best, best_val) = kept.iter().copied().filter(|&j| j != i).map(|j| (j, dot(&w, points.row(j)))).fold(
                (usize::MAX, f64::NEG_INFINITY),
                |acc, cur| {
                    if cur.1 > acc.1 {
                        cur
                    } else {
                        acc
                    }
                },
            );
            if dot(&w, p) - best_val > tol {
                extremes.push(i);
                break;
            }
            if helper.contains(&best) {
                let all: Vec<usize> = kept.iter().copied().filter(|&j| j != i).collect();
                if project_subset(p, points, &all, tol).distance > tol {
                    extremes.push(i);
                }
                break;
            }
            helper.push(best);
        }
    }
    extremes
}

fn validate_tol(tol: f64) -> Result<()> {
    if !(tol > 0.0) || !tol.is_finite() {
        return Err(Error::invalid(format!("tolerance must be positive, got {tol}")));
    }
    Ok(())
}

/// Extreme points of `points`: those farther than `tol` from the convex hull
/// of the remaining points, after merging near-duplicates.
pub fn find_extreme_points(points: &PointSet, tol: f64) -> Result<Polytope> {
    if points.is_empty() {
        return Err(Error::invalid("point set is empty"));
    }
    validate_tol(tol)?;
    let representative = representatives(points, tol);
    let kept: Vec<usize> = (0..points.len()).filter(|&i| representative[i] == i).collect();
    let mut source = match kept.len() {
        1 => kept.clone(),
        n if n <= DIRECT_LIMIT => extreme_direct(points, &kept, tol),
        _ => extreme_incremental(points, &kept, tol),
    };
    source.sort_unstable();
    Ok(Polytope { extremes: points.select(&source), source, representative, contains_x0: false, tol })
}

/// Hull membership test; the projection is returned as a witness.
pub fn contains(poly: &Polytope, query: &[f64], tol: f64) -> Result<(bool, HullProjection)> {
    validate_tol(tol)?;
    check_query(query, poly.dim())?;
    let proj = project_onto_hull(query, poly.extremes(), DEFAULT_MAX_ITER, tol)?;
    Ok((proj.distance <= tol, proj))
}

#[cfg(test)]
pub(crate) mod tests {
    use super::*;
    use crate::rng::StreamRng;
    use proptest::prelude::*;

    fn cross(o: &[f64], a: &[f64], b: &[f64]) -> f64 {
        (a[0] - o[0]) * (b[1] - o[1]) - (a[1] - o[1]) * (b[0] - o[0])
    }

    /// Andrew's monotone chain; strict turns only, so collinear boundary
    /// points are excluded.
    pub(crate) fn monotone_chain(pts: &[[f64; 2]]) -> Vec<usize> {
        let mut idx: Vec<usize> = (0..pts.len()).collect();
        idx.sort_by(|&a, &b| pts[a][0].total_cmp(&pts[b][0]).then(pts[a][1].total_cmp(&pts[b][1])));
        idx.dedup_by(|a, b| pts[*a] == pts[*b]);
        if idx.len() < 3 {
            return idx;
        }
        let mut hull: Vec<usize> = Vec::new();
        for pass in 0..2 {
            let start = hull.len();
            let seq: Vec<usize> = if pass == 0 { idx.clone() } else { idx.iter().rev().copied().collect() };
            for &i in &seq {
                while hull.len() >= start + 2
                    && cross(&pts[hull[hull.len() - 2]], &pts[hull[hull.len() - 1]], &pts[i]) <= 0.0
                {
                    hull.pop();
                }
                hull.push(i);
            }
            hull.pop();
        }
        hull.sort_unstable();
        hull.dedup();
        hull
    }

    fn seg_dist(p: &[f64], a: &[f64], b: &[f64]) -> f64 {
        let ab = [b[0] - a[0], b[1] - a[1]];
        let t = (((p[0] - a[0]) * ab[0] + (p[1] - a[1]) * ab[1]) / (ab[0] * ab[0] + ab[1] * ab[1])).clamp(0.0, 1.0);
        let c = [a[0] + t * ab[0], a[1] + t * ab[1]];
        ((p[0] - c[0]).powi(2) + (p[1] - c[1]).powi(2)).sqrt()
    }

    fn triangle() -> PointSet {
        PointSet::from_rows(&[[0.0, 0.0], [4.0, 0.0], [1.0, 3.0]]).unwrap()
    }

    fn random_2d(rng: &mut StreamRng, n: usize) -> Vec<[f64; 2]> {
        (0..n).map(|_| [rng.uniform(), rng.uniform()]).collect()
    }

    #[test]
    fn projection_of_a_reference_point_is_itself() {
        let refs = triangle();
        let p = project_onto_hull(refs.row(0), &refs, DEFAULT_MAX_ITER, 1e-10).unwrap();
        assert_eq!(p.distance, 0.0);
        assert_eq!(p.weights, vec![1.0, 0.0, 0.0]);
    }

    #[test]
    fn projection_of_centroid_has_equal_weights() {
        let refs = triangle();
        let c = [5.0 / 3.0, 1.0];
        let p = project_onto_hull(&c, &refs, DEFAULT_MAX_ITER, 1e-12).unwrap();
        assert!(p.distance < 1e-12);
        for w in &p.weights {
            assert!((w - 1.0 / 3.0).abs() < 1e-9, "{:?}", p.weights);
        }
    }

    #[test]
    fn exterior_distance_matches_edge_oracle() {
        let refs = triangle();
        let mut rng = StreamRng::new(11, 0);
        for _ in 0..200 {
            let q = [rng.uniform_in(-3.0, 7.0), rng.uniform_in(-3.0, 6.0)];
            let p = project_onto_hull(&q, &refs, DEFAULT_MAX_ITER, 1e-12).unwrap();
            let inside = {
                let (a, b, c) = (refs.row(0), refs.row(1), refs.row(2));
                let s = [cross(a, b, &q), cross(b, c, &q), cross(c, a, &q)];
                s.iter().all(|&v| v >= 0.0) || s.iter().all(|&v| v <= 0.0)
            };
            let oracle = if inside {
                0.0
            } else {
                (0..3).map(|k| seg_dist(&q, refs.row(k), refs.row((k + 1) % 3))).fold(f64::INFINITY, f64::min)
            };
            assert!((p.distance - oracle).abs() <= 1e-10, "{q:?}: {} vs {oracle}", p.distance);
            assert!(p.converged);
        }
    }

    #[test]
    fn projection_rejects_bad_input() {
        let refs = triangle();
        assert!(project_onto_hull(&[f64::NAN, 0.0], &refs, 10, 1e-9).is_err());
        assert!(project_onto_hull(&[0.0, 0.0, 0.0], &refs, 10, 1e-9).is_err());
        assert!(project_onto_hull(&[0.0, 0.0], &refs, 10, 0.0).is_err());
        assert!(PointSet::from_rows(&[[0.0, f64::INFINITY]]).is_err());
    }

    #[test]
    fn triangle_is_its_own_hull() {
        let poly = find_extreme_points(&triangle(), 1e-9).unwrap();
        assert_eq!(poly.d(), 3);
        assert_eq!(poly.source_indices(), &[0, 1, 2]);
    }

    #[test]
    fn square_center_is_not_extreme() {
        let pts = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.5, 0.5], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let poly = find_extreme_points(&pts, 1e-9).unwrap();
        assert_eq!(poly.source_indices(), &[0, 1, 3, 4]);
    }

    #[test]
    fn duplicates_collapse_to_lowest_index() {
        let pts = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [0.0, 1.0], [1.0, 0.0]]).unwrap();
        let poly = find_extreme_points(&pts, 1e-9).unwrap();
        assert_eq!(poly.source_indices(), &[0, 1, 2]);
        assert_eq!(poly.representative(3), 1);
        let poly = poly.mark_explained_point(3);
        assert!(poly.contains_x0());
    }

    #[test]
    fn collinear_points_keep_only_segment_ends() {
        let pts = PointSet::from_rows(&[[0.0, 0.0], [1.0, 1.0], [3.0, 3.0], [2.0, 2.0]]).unwrap();
        let poly = find_extreme_points(&pts, 1e-9).unwrap();
        assert_eq!(poly.source_indices(), &[0, 2]);
        let single = PointSet::from_rows(&[[1.0, 2.0], [1.0, 2.0]]).unwrap();
        assert_eq!(find_extreme_points(&single, 1e-9).unwrap().d(), 1);
    }

    #[test]
    fn thirty_random_points_match_monotone_chain() {
        let mut rng = StreamRng::new(5, 0);
        let pts = random_2d(&mut rng, 30);
        let set = PointSet::from_rows(&pts).unwrap();
        let poly = find_extreme_points(&set, 1e-10).unwrap();
        assert_eq!(poly.source_indices(), monotone_chain(&pts).as_slice());
    }

    #[test]
    fn incremental_and_direct_strategies_agree() {
        let mut rng = StreamRng::new(9, 0);
        for (m, n) in [(2, 120), (3, 150), (4, 200), (7, 60)] {
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.normal()).collect()).collect();
            let set = PointSet::from_rows(&rows).unwrap();
            let tol = set.default_tol();
            let kept: Vec<usize> = (0..n).collect();
            let direct = extreme_direct(&set, &kept, tol);
            let incremental = extreme_incremental(&set, &kept, tol);
            assert_eq!(direct, incremental, "m={m} n={n}");
        }
    }

    #[test]
    fn contains_extreme_and_exterior_points() {
        let sq = PointSet::from_rows(&[[0.0, 0.0], [1.0, 0.0], [1.0, 1.0], [0.0, 1.0]]).unwrap();
        let poly = find_extreme_points(&sq, 1e-9).unwrap();
        for i in 0..4 {
            let (inside, proj) = contains(&poly, sq.row(i), 1e-9).unwrap();
            assert!(inside);
            assert_eq!(proj.distance, 0.0);
        }
        // extreme 1 pushed along the outward normal of the bottom edge
        let (inside, proj) = contains(&poly, &[1.0, -1.0], 1e-9).unwrap();
        assert!(!inside);
        assert!((proj.distance - 1.0).abs() < 1e-12);
        assert!(contains(&poly, &[0.5], 1e-9).is_err());
    }

    #[test]
    fn contains_agrees_with_ray_casting() {
        let mut rng = StreamRng::new(21, 0);
        let pts = random_2d(&mut rng, 25);
        let set = PointSet::from_rows(&pts).unwrap();
        let tol = 1e-9;
        let poly = find_extreme_points(&set, tol).unwrap();
        // hull vertices in counter-clockwise order for the oracle
        let hull = monotone_chain(&pts);
        let c = hull.iter().fold([0.0, 0.0], |acc, &i| {
            [acc[0] + pts[i][0] / hull.len() as f64, acc[1] + pts[i][1] / hull.len() as f64]
        });
        let mut ring = hull.clone();
        ring.sort_by(|&a, &b| {
            let ta = (pts[a][1] - c[1]).atan2(pts[a][0] - c[0]);
            let tb = (pts[b][1] - c[1]).atan2(pts[b][0] - c[0]);
            ta.total_cmp(&tb)
        });
        let mut checked = 0;
        for _ in 0..500 {
            let q = [rng.uniform_in(-0.3, 1.3), rng.uniform_in(-0.3, 1.3)];
            let boundary = (0..ring.len())
                .map(|k| seg_dist(&q, &pts[ring[k]], &pts[ring[(k + 1) % ring.len()]]))
                .fold(f64::INFINITY, f64::min);
            if boundary <= 1e-6 {
                continue;
            }
            let mut inside = false;
            for k in 0..ring.len() {
                let (a, b) = (pts[ring[k]], pts[ring[(k + 1) % ring.len()]]);
                if (a[1] > q[1]) != (b[1] > q[1]) && q[0] < (b[0] - a[0]) * (q[1] - a[1]) / (b[1] - a[1]) + a[0] {
                    inside = !inside;
                }
            }
            assert_eq!(contains(&poly, &q, tol).unwrap().0, inside, "{q:?}");
            checked += 1;
        }
        assert!(checked > 400);
    }

    proptest! {
        #![proptest_config(ProptestConfig::with_cases(120))]

        #[test]
        fn extreme_sets_match_2d_oracle(seed in any::<u64>(), n in 3usize..=40) {
            let mut rng = StreamRng::new(seed, 0);
            let pts = random_2d(&mut rng, n);
            let set = PointSet::from_rows(&pts).unwrap();
            let poly = find_extreme_points(&set, 1e-10).unwrap();
            let oracle = monotone_chain(&pts);
            prop_assert_eq!(poly.source_indices(), oracle.as_slice());
        }

        #[test]
        fn extremes_are_idempotent_and_cover_the_set(seed in any::<u64>(), n in 4usize..40, m in 2usize..5) {
            let mut rng = StreamRng::new(seed, 1);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.uniform()).collect()).collect();
            let set = PointSet::from_rows(&rows).unwrap();
            let tol = set.default_tol();
            let poly = find_extreme_points(&set, tol).unwrap();
            let again = find_extreme_points(poly.extremes(), tol).unwrap();
            prop_assert_eq!(again.d(), poly.d());
            for r in set.rows() {
                let p = project_onto_hull(r, poly.extremes(), DEFAULT_MAX_ITER, tol).unwrap();
                prop_assert!(p.distance <= tol);
            }
        }

        #[test]
        fn extremeness_is_scale_equivariant(seed in any::<u64>(), n in 4usize..30, c in 0.01f64..100.0) {
            let mut rng = StreamRng::new(seed, 2);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..3).map(|_| rng.uniform()).collect()).collect();
            let set = PointSet::from_rows(&rows).unwrap();
            let scaled = PointSet::from_flat(3, set.as_flat().iter().map(|v| v * c).collect()).unwrap();
            let tol = 1e-9;
            let a = find_extreme_points(&set, tol).unwrap();
            let b = find_extreme_points(&scaled, tol * c).unwrap();
            prop_assert_eq!(a.source_indices(), b.source_indices());
        }

        #[test]
        fn projection_weights_are_on_the_simplex(seed in any::<u64>(), n in 1usize..20, m in 1usize..6) {
            let mut rng = StreamRng::new(seed, 3);
            let rows: Vec<Vec<f64>> = (0..n).map(|_| (0..m).map(|_| rng.normal()).collect()).collect();
            let set = PointSet::from_rows(&rows).unwrap();
            let q: Vec<f64> = (0..m).map(|_| 2.0 * rng.normal()).collect();
            let p = project_onto_hull(&q, &set, DEFAULT_MAX_ITER, 1e-10).unwrap();
            prop_assert!(p.weights.iter().all(|&w| w >= 0.0));
            prop_assert!((p.weights.iter().sum::<f64>() - 1.0).abs() <= 1e-12);
            for i in 0..m {
                let v: f64 = (0..n).map(|j| p.weights[j] * set.row(j)[i]).sum();
                prop_assert!((v - p.image[i]).abs() <= 1e-10);
            }
            let recomputed = p.image.iter().zip(&q).map(|(a, b)| (a - b) * (a - b)).sum::<f64>().sqrt();
            prop_assert!((recomputed - p.distance).abs() <= 1e-12);
        }
    }
}
