//! One-dimensional weighted isotonic least squares.
//!
//! [`pava`] is the production solver: a single left-to-right pass that keeps
//! a stack of pooled blocks and merges the top two whenever they violate the
//! order. [`max_min_reference`] evaluates the max-min representation of the
//! same estimator directly and is kept as an independent check.

use serde::Serialize;

use crate::error::{Error, Result};

/// Ordered responses with positive weights.
#[derive(Debug, Clone, PartialEq)]
pub struct WeightedSeries {
    values: Vec<f64>,
    weights: Vec<f64>,
}

impl WeightedSeries {
    pub fn new(values: Vec<f64>, weights: Vec<f64>) -> Result<Self> {
        check_series(&values, &weights)?;
        Ok(Self { values, weights })
    }

    /// Unit weights.
    pub fn unweighted(values: Vec<f64>) -> Result<Self> {
        let weights = vec![1.0; values.len()];
        Self::new(values, weights)
    }

    pub fn values(&self) -> &[f64] {
        &self.values
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn len(&self) -> usize {
        self.values.len()
    }

    pub fn is_empty(&self) -> bool {
        self.values.is_empty()
    }
}

fn check_series(values: &[f64], weights: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::invalid("series is empty"));
    }
    if values.len() != weights.len() {
        return Err(Error::invalid(format!(
            "{} values but {} weights",
            values.len(),
            weights.len()
        )));
    }
    if let Some(i) = values.iter().position(|v| !v.is_finite()) {
        return Err(Error::invalid(format!("value {i} is not finite")));
    }
    if let Some(i) = weights.iter().position(|w| !(w.is_finite() && *w > 0.0)) {
        return Err(Error::invalid(format!(
            "weight {i} must be positive and finite, got {}",
            weights[i]
        )));
    }
    Ok(())
}

/// Pooled block on the PAVA stack.
#[derive(Debug, Clone, Copy)]
struct Block {
    weighted_sum: f64,
    weight: f64,
    // cached so a singleton block reproduces its value exactly
    mean: f64,
    len: usize,
}

/// Reusable stack storage so repeated solves (as in backfitting) do not
/// allocate.
#[derive(Debug, Default, Clone)]
pub struct PavaWorkspace {
    stack: Vec<Block>,
}

impl PavaWorkspace {
    pub fn new() -> Self {
        Self::default()
    }

    /// Weighted isotonic regression of `values` into `out`.
    ///
    /// Inputs are assumed valid (see [`WeightedSeries`]). Two blocks are
    /// pooled only on a strict violation `left > right`, compared exactly.
    pub fn solve_into(&mut self, values: &[f64], weights: &[f64], out: &mut Vec<f64>) {
        debug_assert_eq!(values.len(), weights.len());
        let stack = &mut self.stack;
        stack.clear();
        for (&v, &w) in values.iter().zip(weights) {
            let mut top = Block {
                weighted_sum: w * v,
                weight: w,
                mean: v,
                len: 1,
            };
            while let Some(prev) = stack.last() {
                if prev.mean > top.mean {
                    top.weighted_sum += prev.weighted_sum;
                    top.weight += prev.weight;
                    top.mean = top.weighted_sum / top.weight;
                    top.len += prev.len;
                    stack.pop();
                } else {
                    break;
                }
            }
            stack.push(top);
        }
        out.clear();
        out.reserve(values.len());
        for b in stack.iter() {
            out.extend(std::iter::repeat_n(b.mean, b.len));
        }
    }
}

/// Weighted least-squares projection onto nondecreasing vectors.
pub fn pava(series: &WeightedSeries) -> Vec<f64> {
    let mut out = Vec::with_capacity(series.len());
    PavaWorkspace::new().solve_into(&series.values, &series.weights, &mut out);
    out
}

/// Checked slice variant of [`pava`].
pub fn pava_weighted(values: &[f64], weights: &[f64]) -> Result<Vec<f64>> {
    check_series(values, weights)?;
    let mut out = Vec::with_capacity(values.len());
    PavaWorkspace::new().solve_into(values, weights, &mut out);
    Ok(out)
}

/// `max_{s<=i} min_{t>=i}` of the weighted mean of `values[s..=t]`,
/// evaluated by brute force. Cubic in the length; for testing only.
pub fn max_min_reference(series: &WeightedSeries) -> Vec<f64> {
    let k = series.len();
    let v = &series.values;
    let w = &series.weights;
    // means[s][t - s]
    let mut means: Vec<Vec<f64>> = Vec::with_capacity(k);
    for s in 0..k {
        let mut row = Vec::with_capacity(k - s);
        let (mut sw, mut swy) = (0.0, 0.0);
        for t in s..k {
            sw += w[t];
            swy += w[t] * v[t];
            row.push(swy / sw);
        }
        means.push(row);
    }
    (0..k)
        .map(|i| {
            (0..=i)
                .map(|s| {
                    (i..k)
                        .map(|t| means[s][t - s])
                        .fold(f64::INFINITY, f64::min)
                })
                .fold(f64::NEG_INFINITY, f64::max)
        })
        .collect()
}

/// A nondecreasing step function on one covariate.
#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct IsotonicFit {
    knots: Vec<f64>,
    levels: Vec<f64>,
    block_weights: Vec<f64>,
}

impl IsotonicFit {
    pub fn new(knots: Vec<f64>, levels: Vec<f64>, block_weights: Vec<f64>) -> Result<Self> {
        if knots.is_empty() {
            return Err(Error::invalid("fit has no knots"));
        }
        if knots.len() != levels.len() || knots.len() != block_weights.len() {
            return Err(Error::invalid("knots, levels and weights differ in length"));
        }
        if knots.iter().chain(&levels).any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite knot or level"));
        }
        if knots.windows(2).any(|p| p[0] >= p[1]) {
            return Err(Error::invalid("knots must be strictly increasing"));
        }
        if levels.windows(2).any(|p| p[0] > p[1]) {
            return Err(Error::invalid("levels must be nondecreasing"));
        }
        if block_weights.iter().any(|w| !(w.is_finite() && *w > 0.0)) {
            return Err(Error::invalid("block weights must be positive"));
        }
        Ok(Self {
            knots,
            levels,
            block_weights,
        })
    }

    /// Fits unsorted `(x, y)` pairs with unit weights, pooling tied `x`.
    pub fn fit(x: &[f64], y: &[f64]) -> Result<Self> {
        Self::fit_weighted(x, y, &vec![1.0; y.len()])
    }

    pub fn fit_weighted(x: &[f64], y: &[f64], w: &[f64]) -> Result<Self> {
        if x.len() != y.len() {
            return Err(Error::invalid("x and y differ in length"));
        }
        check_series(y, w)?;
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::invalid("non-finite covariate"));
        }
        let mut idx: Vec<usize> = (0..x.len()).collect();
        idx.sort_by(|&a, &b| x[a].total_cmp(&x[b]));

        let mut knots: Vec<f64> = Vec::new();
        let mut sums: Vec<f64> = Vec::new();
        let mut weights: Vec<f64> = Vec::new();
        for &i in &idx {
            if knots.last() == Some(&x[i]) {
                *sums.last_mut().unwrap() += w[i] * y[i];
                *weights.last_mut().unwrap() += w[i];
            } else {
                knots.push(x[i]);
                sums.push(w[i] * y[i]);
                weights.push(w[i]);
            }
        }
        let means: Vec<f64> = sums.iter().zip(&weights).map(|(s, w)| s / w).collect();
        let levels = pava_weighted(&means, &weights)?;
        Self::new(knots, levels, weights)
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    pub fn levels(&self) -> &[f64] {
        &self.levels
    }

    pub fn block_weights(&self) -> &[f64] {
        &self.block_weights
    }

    pub fn len(&self) -> usize {
        self.knots.len()
    }

    pub fn is_empty(&self) -> bool {
        self.knots.is_empty()
    }

    /// Level of the largest knot `<= x`, extended as a constant on both sides.
    pub fn evaluate(&self, x: f64) -> f64 {
        let idx = self.knots.partition_point(|&k| k <= x);
        self.levels[idx.saturating_sub(1)]
    }

    /// Weighted mean of the levels under the block weights.
    pub fn weighted_mean(&self) -> f64 {
        let (sw, swl) = self
            .block_weights
            .iter()
            .zip(&self.levels)
            .fold((0.0, 0.0), |(sw, swl), (w, l)| (sw + w, swl + w * l));
        swl / sw
    }

    /// Same step function moved vertically by `delta`.
    pub fn shifted(&self, delta: f64) -> Self {
        Self {
            knots: self.knots.clone(),
            levels: self.levels.iter().map(|l| l + delta).collect(),
            block_weights: self.block_weights.clone(),
        }
    }
}

/// Returns the fit with zero weighted mean and the removed constant.
pub fn center(fit: &IsotonicFit) -> (IsotonicFit, f64) {
    let c = fit.weighted_mean();
    (fit.shifted(-c), c)
}

/// Evaluates `fit` at `x`. See [`IsotonicFit::evaluate`].
pub fn evaluate(fit: &IsotonicFit, x: f64) -> f64 {
    fit.evaluate(x)
}
