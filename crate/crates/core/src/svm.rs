//! One-vs-rest linear SVM trained by dual coordinate descent on the hinge loss.
//!
//! Each binary subproblem minimizes
//!
//! ```text
//! 1/2 ||w||^2 + C * sum_i max(0, 1 - y_i (w.x_i + b))
//! ```
//!
//! with an unregularized bias. Its dual `min 1/2 a'Qa - 1'a` subject to
//! `0 <= a_i <= C` and `sum_i y_i a_i = 0` is solved two coordinates at a
//! time, since the equality constraint pins any single coordinate. An epoch
//! visits every example once in a seeded random order and pairs it with its
//! most violating partner. Training stops when the maximal KKT violation
//! drops below `tol`.
//!
//! After each epoch the bias is set to a minimizer of the primal for the
//! current `w`. Dual steps do not decrease the primal monotonically, so the
//! solver retains the iterate with the lowest primal seen so far and returns
//! it; the per-epoch trace records that retained value.

use std::path::Path;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use crate::binio::{self, ByteReader, ByteWriter};
use crate::error::{Error, Result};

const MODEL_MAGIC: &[u8; 4] = b"TDFM";

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct SvmParams {
    /// Penalty `C` on the hinge term.
    pub penalty: f64,
    pub max_epochs: usize,
    /// Stopping threshold on the maximal KKT violation of the dual.
    pub tol: f64,
    pub seed: u64,
}

impl Default for SvmParams {
    fn default() -> Self {
        SvmParams {
            penalty: 1.0,
            max_epochs: 1000,
            tol: 1e-3,
            seed: 0,
        }
    }
}

/// Weights and biases of one binary classifier per class.
#[derive(Debug, Clone, PartialEq)]
pub struct LinearSvmModel {
    num_classes: usize,
    dims: usize,
    /// `num_classes x dims`, row-major.
    weights: Vec<f64>,
    biases: Vec<f64>,
    penalty: f64,
}

impl LinearSvmModel {
    pub fn new(
        num_classes: usize,
        dims: usize,
        weights: Vec<f64>,
        biases: Vec<f64>,
        penalty: f64,
    ) -> Result<Self> {
        if num_classes < 2 {
            return Err(Error::invalid("an SVM model needs at least 2 classes"));
        }
        if dims == 0 {
            return Err(Error::invalid("an SVM model needs at least one feature"));
        }
        Error::check_dims(num_classes * dims, weights.len())?;
        Error::check_dims(num_classes, biases.len())?;
        if !(penalty > 0.0 && penalty.is_finite()) {
            return Err(Error::invalid("SVM penalty must be positive"));
        }
        if weights.iter().chain(&biases).any(|v| !v.is_finite()) {
            return Err(Error::invalid("SVM parameters must be finite"));
        }
        Ok(LinearSvmModel {
            num_classes,
            dims,
            weights,
            biases,
            penalty,
        })
    }

    pub fn num_classes(&self) -> usize {
        self.num_classes
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn weights(&self, class: usize) -> &[f64] {
        &self.weights[class * self.dims..(class + 1) * self.dims]
    }

    pub fn biases(&self) -> &[f64] {
        &self.biases
    }

    pub fn penalty(&self) -> f64 {
        self.penalty
    }

    /// Per-class scores `w_c.x + b_c`.
    pub fn scores(&self, x: &[f64]) -> Result<Vec<f64>> {
        Error::check_dims(self.dims, x.len())?;
        Ok((0..self.num_classes)
            .map(|c| dot(self.weights(c), x) + self.biases[c])
            .collect())
    }

    /// Highest-scoring class (ties to the lowest index) and all scores.
    pub fn predict(&self, x: &[f64]) -> Result<(usize, Vec<f64>)> {
        let scores = self.scores(x)?;
        let mut best = 0;
        for (c, &s) in scores.iter().enumerate() {
            if s > scores[best] {
                best = c;
            }
        }
        Ok((best, scores))
    }

    /// `TDFM` v1: magic, `u32` version, `num_classes` and `P` as `u32`,
    /// penalty as `f64`, then weights (row-major) and biases as `f64`.
    pub fn to_bytes(&self) -> Result<Vec<u8>> {
        let mut w = ByteWriter::with_header(MODEL_MAGIC);
        w.u32(binio::dim_to_u32(self.num_classes, "class count")?);
        w.u32(binio::dim_to_u32(self.dims, "dimension")?);
        w.f64(self.penalty);
        w.f64s(&self.weights);
        w.f64s(&self.biases);
        Ok(w.into_bytes())
    }

    pub fn from_bytes(bytes: &[u8], origin: &Path) -> Result<Self> {
        let mut r = ByteReader::open(bytes, MODEL_MAGIC, origin)?;
        let classes = r.u32()? as usize;
        let dims = r.u32()? as usize;
        let penalty = r.f64s(1)?[0];
        let weights = r.f64s(classes.saturating_mul(dims))?;
        let biases = r.f64s(classes)?;
        r.finish()?;
        LinearSvmModel::new(classes, dims, weights, biases, penalty).map_err(|e| {
            Error::CorruptFile {
                path: origin.to_path_buf(),
                reason: e.to_string(),
            }
        })
    }

    pub fn write(&self, path: &Path) -> Result<()> {
        binio::write_file(path, &self.to_bytes()?)
    }

    pub fn read(path: &Path) -> Result<Self> {
        Self::from_bytes(&binio::read_file(path)?, path)
    }
}

/// Predicted class and per-class scores for `x`.
pub fn predict(model: &LinearSvmModel, x: &[f64]) -> Result<(usize, Vec<f64>)> {
    model.predict(x)
}

fn dot(a: &[f64], b: &[f64]) -> f64 {
    a.iter().zip(b).map(|(x, y)| x * y).sum()
}

/// `1/2 ||w||^2 + C * sum_i max(0, 1 - y_i (w.x_i + b))` with `y_i` in `{-1, +1}`.
pub fn hinge_objective<V: AsRef<[f64]>>(
    w: &[f64],
    b: f64,
    penalty: f64,
    data: &[(V, f64)],
) -> Result<f64> {
    let mut hinge = 0.0;
    for (x, y) in data {
        let x = x.as_ref();
        Error::check_dims(w.len(), x.len())?;
        hinge += (1.0 - y * (dot(w, x) + b)).max(0.0);
    }
    Ok(0.5 * dot(w, w) + penalty * hinge)
}

/// A trained model with per-class convergence records.
#[derive(Debug, Clone)]
pub struct TrainedSvm {
    pub model: LinearSvmModel,
    /// Primal objective of the retained iterate after every epoch, per class.
    pub objective_traces: Vec<Vec<f64>>,
    /// Primal objective of the current dual iterate after every epoch.
    pub raw_objective_traces: Vec<Vec<f64>>,
    /// Epochs run per class.
    pub epochs: Vec<usize>,
}

impl TrainedSvm {
    pub fn final_objectives(&self) -> Vec<f64> {
        self.objective_traces
            .iter()
            .map(|t| t.last().copied().unwrap_or(f64::NAN))
            .collect()
    }
}

pub fn train_linear_svm<V: AsRef<[f64]> + Sync>(
    examples: &[(V, usize)],
    num_classes: usize,
    params: &SvmParams,
) -> Result<LinearSvmModel> {
    Ok(train_linear_svm_traced(examples, num_classes, params)?.model)
}

pub fn train_linear_svm_traced<V: AsRef<[f64]> + Sync>(
    examples: &[(V, usize)],
    num_classes: usize,
    params: &SvmParams,
) -> Result<TrainedSvm> {
    if num_classes < 2 {
        return Err(Error::invalid("SVM training needs at least 2 classes"));
    }
    if !(params.penalty > 0.0 && params.penalty.is_finite()) {
        return Err(Error::invalid("SVM penalty must be positive"));
    }
    if params.max_epochs == 0 || params.tol.is_nan() || params.tol <= 0.0 {
        return Err(Error::invalid("max_epochs and tol must be positive"));
    }
    let dims = examples
        .first()
        .map(|(x, _)| x.as_ref().len())
        .ok_or_else(|| Error::invalid("no training examples"))?;
    if dims == 0 {
        return Err(Error::invalid("training vectors are empty"));
    }
    let mut counts = vec![0usize; num_classes];
    for (x, label) in examples {
        let x = x.as_ref();
        Error::check_dims(dims, x.len())?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("training vectors must be finite"));
        }
        if *label >= num_classes {
            return Err(Error::invalid(format!(
                "label {label} is not below num_classes {num_classes}"
            )));
        }
        counts[*label] += 1;
    }
    if let Some(missing) = counts.iter().position(|&c| c == 0) {
        return Err(Error::invalid(format!(
            "class {missing} has no training examples"
        )));
    }

    let rows: Vec<&[f64]> = examples.iter().map(|(x, _)| x.as_ref()).collect();
    let n = rows.len();
    let gram: Vec<f64> = (0..n)
        .into_par_iter()
        .flat_map_iter(|i| {
            let rows = &rows;
            (0..n).map(move |j| dot(rows[i], rows[j]))
        })
        .collect();

    let solved: Vec<BinarySolution> = (0..num_classes)
        .into_par_iter()
        .map(|c| {
            let labels: Vec<f64> = examples
                .iter()
                .map(|(_, l)| if *l == c { 1.0 } else { -1.0 })
                .collect();
            solve_binary(&gram, &labels, params, params.seed.wrapping_add(c as u64))
        })
        .collect();

    let mut weights = Vec::with_capacity(num_classes * dims);
    let mut biases = Vec::with_capacity(num_classes);
    let mut traces = Vec::with_capacity(num_classes);
    let mut raw_traces = Vec::with_capacity(num_classes);
    let mut epochs = Vec::with_capacity(num_classes);
    for (c, s) in solved.into_iter().enumerate() {
        let labels = examples
            .iter()
            .map(|(_, l)| if *l == c { 1.0 } else { -1.0 });
        let mut w = vec![0.0; dims];
        for ((x, y), a) in rows.iter().zip(labels).zip(&s.alpha) {
            if *a != 0.0 {
                for (wj, xj) in w.iter_mut().zip(*x) {
                    *wj += a * y * xj;
                }
            }
        }
        weights.extend(w);
        biases.push(s.bias);
        traces.push(s.trace);
        raw_traces.push(s.raw_trace);
        epochs.push(s.epochs);
    }
    Ok(TrainedSvm {
        model: LinearSvmModel::new(num_classes, dims, weights, biases, params.penalty)?,
        objective_traces: traces,
        raw_objective_traces: raw_traces,
        epochs,
    })
}

struct BinarySolution {
    alpha: Vec<f64>,
    bias: f64,
    trace: Vec<f64>,
    raw_trace: Vec<f64>,
    epochs: usize,
}

/// Dual state of one binary subproblem over a shared Gram matrix.
struct Dual<'a> {
    gram: &'a [f64],
    y: &'a [f64],
    c: f64,
    alpha: Vec<f64>,
    /// Gradient of the dual objective, `(Qa)_i - 1`.
    grad: Vec<f64>,
}

impl Dual<'_> {
    fn n(&self) -> usize {
        self.y.len()
    }

    fn k(&self, i: usize, j: usize) -> f64 {
        self.gram[i * self.n() + j]
    }

    fn q(&self, i: usize, j: usize) -> f64 {
        self.y[i] * self.y[j] * self.k(i, j)
    }

    fn in_up(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] < self.c
        } else {
            self.alpha[t] > 0.0
        }
    }

    fn in_low(&self, t: usize) -> bool {
        if self.y[t] > 0.0 {
            self.alpha[t] > 0.0
        } else {
            self.alpha[t] < self.c
        }
    }

    fn score(&self, t: usize) -> f64 {
        -self.y[t] * self.grad[t]
    }

    fn refresh_gradient(&mut self) {
        let n = self.n();
        for i in 0..n {
            let mut g = -1.0;
            for j in 0..n {
                if self.alpha[j] != 0.0 {
                    g += self.q(i, j) * self.alpha[j];
                }
            }
            self.grad[i] = g;
        }
    }

    /// Largest `score(up) - score(low)` over feasible pairs.
    fn max_violation(&self) -> f64 {
        let (mut m, mut big_m) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in 0..self.n() {
            if self.in_up(t) {
                m = m.max(self.score(t));
            }
            if self.in_low(t) {
                big_m = big_m.min(self.score(t));
            }
        }
        m - big_m
    }

    /// Best partner for `i` and the violation of the resulting `(up, low)` pair.
    fn partner(&self, i: usize) -> Option<(usize, usize, f64)> {
        let mut best: Option<(usize, usize, f64)> = None;
        let si = self.score(i);
        for t in 0..self.n() {
            if t == i {
                continue;
            }
            let st = self.score(t);
            let candidate = if self.in_up(i) && self.in_low(t) && si > st {
                Some((i, t, si - st))
            } else if self.in_low(i) && self.in_up(t) && st > si {
                Some((t, i, st - si))
            } else {
                None
            };
            if let Some(cand) = candidate {
                if best.is_none_or(|b| cand.2 > b.2) {
                    best = Some(cand);
                }
            }
        }
        best
    }

    /// Exact minimization of the dual over `(a_i, a_j)` along the constraint.
    fn update_pair(&mut self, i: usize, j: usize) {
        let (c, yi, yj) = (self.c, self.y[i], self.y[j]);
        // direction: a_i += yi * t, a_j -= yj * t keeps sum y a fixed
        let curvature = (self.k(i, i) + self.k(j, j) - 2.0 * self.k(i, j)).max(1e-12);
        let step = (self.score(i) - self.score(j)) / curvature;
        let bound = |a: f64, dir: f64| if dir > 0.0 { c - a } else { a };
        let t = step
            .min(bound(self.alpha[i], yi))
            .min(bound(self.alpha[j], -yj))
            .max(0.0);
        if t == 0.0 {
            return;
        }
        let (di, dj) = (yi * t, -yj * t);
        self.alpha[i] = (self.alpha[i] + di).clamp(0.0, c);
        self.alpha[j] = (self.alpha[j] + dj).clamp(0.0, c);
        for k in 0..self.n() {
            self.grad[k] += self.q(k, i) * di + self.q(k, j) * dj;
        }
    }

    /// Primal value and a minimizing bias for `w = sum_i a_i y_i x_i`.
    ///
    /// The hinge sum is piecewise linear in `b` with breakpoints `y_i - s_i`,
    /// and its slope rises by `C` at each, so the minimizers form the interval
    /// between the `P`-th and `P+1`-th smallest breakpoints (`P` positives).
    /// Within it the bias closest to the dual estimate is taken.
    fn primal(&self) -> (f64, f64) {
        let n = self.n();
        // s_i = w.x_i, recovered from the gradient
        let s: Vec<f64> = (0..n).map(|i| self.y[i] * (self.grad[i] + 1.0)).collect();
        let w_sq: f64 = (0..n).map(|i| self.alpha[i] * self.y[i] * s[i]).sum();
        let mut breaks: Vec<f64> = (0..n).map(|i| self.y[i] - s[i]).collect();
        breaks.sort_by(f64::total_cmp);
        let positives = self.y.iter().filter(|&&v| v > 0.0).count();
        let (lo, hi) = (breaks[positives - 1], breaks[positives]);
        let bias = self.dual_bias().clamp(lo, hi);
        let hinge: f64 = (0..n)
            .map(|i| (1.0 - self.y[i] * (s[i] + bias)).max(0.0))
            .sum();
        (0.5 * w_sq.max(0.0) + self.c * hinge, bias)
    }

    /// Bias implied by the KKT conditions: the average over free coordinates,
    /// or the midpoint of the feasible range when none are free.
    fn dual_bias(&self) -> f64 {
        let (mut sum, mut free) = (0.0, 0usize);
        let (mut up, mut low) = (f64::NEG_INFINITY, f64::INFINITY);
        for t in 0..self.n() {
            let a = self.alpha[t];
            if a > 0.0 && a < self.c {
                sum += self.score(t);
                free += 1;
            }
            if self.in_up(t) {
                up = up.max(self.score(t));
            }
            if self.in_low(t) {
                low = low.min(self.score(t));
            }
        }
        if free > 0 {
            sum / free as f64
        } else if up.is_finite() && low.is_finite() {
            0.5 * (up + low)
        } else if up.is_finite() {
            up
        } else {
            low
        }
    }
}

fn solve_binary(gram: &[f64], y: &[f64], params: &SvmParams, seed: u64) -> BinarySolution {
    let n = y.len();
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut dual = Dual {
        gram,
        y,
        c: params.penalty,
        alpha: vec![0.0; n],
        grad: vec![-1.0; n],
    };
    let (start, start_bias) = dual.primal();
    let mut best = (start, start_bias, dual.alpha.clone());
    let mut order: Vec<usize> = (0..n).collect();
    let mut trace = Vec::new();
    let mut raw_trace = Vec::new();
    let mut epochs = 0;
    while epochs < params.max_epochs && dual.max_violation() >= params.tol {
        epochs += 1;
        order.shuffle(&mut rng);
        for &i in &order {
            if let Some((up, low, violation)) = dual.partner(i) {
                if violation > 0.5 * params.tol {
                    dual.update_pair(up, low);
                }
            }
        }
        dual.refresh_gradient();
        let (objective, bias) = dual.primal();
        raw_trace.push(objective);
        if objective <= best.0 {
            best = (objective, bias, dual.alpha.clone());
        }
        trace.push(best.0);
    }
    if trace.is_empty() {
        trace.push(best.0);
        raw_trace.push(best.0);
    }
    BinarySolution {
        alpha: best.2,
        bias: best.1,
        trace,
        raw_trace,
        epochs,
    }
}
