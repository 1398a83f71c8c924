//! Seeded Monte Carlo experiments comparing backfitting with the oracle
//! estimator on `Y = m1(X1) + m2(X2) + eps`, where `(X1, X2)` is a
//! standard bivariate normal with correlation `rho` truncated to a square
//! and `eps ~ N(0, noise_sd^2)`.
//!
//! # Reproducibility
//!
//! Replication `r` of an experiment with master seed `s` draws from
//! `ChaCha20Rng::seed_from_u64(s)` switched to stream `r`
//! (see [`rep_rng`]). Within a replication the covariate pairs are drawn
//! first (each attempt consumes `z1` then `z2`), followed by the `n` noise
//! values. Experiments that run several settings (tables, rate studies)
//! give setting `k` the master seed [`derive_seed`]`(s, k)`. Reports are
//! reduced in replication order, so they do not depend on how the
//! replications were scheduled.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

use std::fmt;
use std::sync::Arc;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha20Rng;
use rand_distr::{Distribution, Normal, StandardNormal};
use rayon::prelude::*;
use serde::{Serialize, Serializer};

use crate::backfit::{backfit, FitConfig};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::isotonic::IsotonicFit;
use crate::oracle::{oracle_estimator, OracleSpec};

/// Minimum acceptance rate tolerated by the rejection sampler.
pub const MIN_ACCEPTANCE_RATE: f64 = 1e-4;

/// A monotone component function.
#[derive(Clone)]
pub enum ComponentFn {
    /// `x^3`
    Cubic,
    /// `sin(pi x / 2)`
    HalfSine,
    /// Identity outside `[-0.5, 0.5]`, `-0.5` on `[-0.5, 0)` and `0.5` on
    /// `[0, 0.5]`.
    StepPlateau,
    Custom {
        name: String,
        f: Arc<dyn Fn(f64) -> f64 + Send + Sync>,
    },
}

impl ComponentFn {
    pub fn custom(name: impl Into<String>, f: impl Fn(f64) -> f64 + Send + Sync + 'static) -> Self {
        ComponentFn::Custom {
            name: name.into(),
            f: Arc::new(f),
        }
    }

    pub fn eval(&self, x: f64) -> f64 {
        match self {
            ComponentFn::Cubic => x * x * x,
            ComponentFn::HalfSine => (std::f64::consts::FRAC_PI_2 * x).sin(),
            ComponentFn::StepPlateau => {
                if x.abs() > 0.5 {
                    x
                } else if x >= 0.0 {
                    0.5
                } else {
                    -0.5
                }
            }
            ComponentFn::Custom { f, .. } => f(x),
        }
    }

    pub fn name(&self) -> &str {
        match self {
            ComponentFn::Cubic => "cubic",
            ComponentFn::HalfSine => "half_sine",
            ComponentFn::StepPlateau => "step_plateau",
            ComponentFn::Custom { name, .. } => name,
        }
    }

    /// Parses one of the built-in tags.
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "cubic" => Some(ComponentFn::Cubic),
            "half_sine" => Some(ComponentFn::HalfSine),
            "step_plateau" => Some(ComponentFn::StepPlateau),
            _ => None,
        }
    }
}

impl fmt::Debug for ComponentFn {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl Serialize for ComponentFn {
    fn serialize<S: Serializer>(&self, s: S) -> std::result::Result<S::Ok, S::Error> {
        s.serialize_str(self.name())
    }
}

/// Equispaced evaluation grid including both ends.
#[derive(Debug, Clone, Copy, PartialEq, Serialize)]
pub struct Grid {
    pub lo: f64,
    pub hi: f64,
    pub points: usize,
}

impl Grid {
    pub fn new(lo: f64, hi: f64, points: usize) -> Self {
        Self { lo, hi, points }
    }

    pub fn values(&self) -> Vec<f64> {
        if self.points == 1 {
            return vec![0.5 * (self.lo + self.hi)];
        }
        let step = (self.hi - self.lo) / (self.points - 1) as f64;
        (0..self.points)
            .map(|i| self.lo + step * i as f64)
            .collect()
    }

    pub fn length(&self) -> f64 {
        self.hi - self.lo
    }
}

impl Default for Grid {
    fn default() -> Self {
        Grid::new(-0.95, 0.95, 101)
    }
}

/// How squared error over the ISE grid is turned into one number.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "snake_case")]
pub enum IseMeasure {
    /// Grid mean times grid length (Lebesgue measure on the grid range).
    Lebesgue,
    /// Plain grid mean (uniform probability measure on the grid range).
    GridAverage,
}

impl IseMeasure {
    pub fn from_name(name: &str) -> Option<Self> {
        match name {
            "lebesgue" => Some(IseMeasure::Lebesgue),
            "grid_average" => Some(IseMeasure::GridAverage),
            _ => None,
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct SimConfig {
    pub n: usize,
    pub rho: f64,
    pub noise_sd: f64,
    pub m1: ComponentFn,
    /// `None` gives the one-covariate model `Y = m1(X1) + eps`.
    pub m2: Option<ComponentFn>,
    pub reps: usize,
    pub master_seed: u64,
    /// Truncation interval applied to both covariates.
    pub interval: (f64, f64),
    pub ise_grid: Grid,
    pub ise_measure: IseMeasure,
    pub fit: FitConfig,
}

impl Default for SimConfig {
    fn default() -> Self {
        Self {
            n: 200,
            rho: 0.0,
            noise_sd: 0.5,
            m1: ComponentFn::Cubic,
            m2: Some(ComponentFn::HalfSine),
            reps: 1000,
            master_seed: 0,
            interval: (-1.0, 1.0),
            ise_grid: Grid::default(),
            ise_measure: IseMeasure::GridAverage,
            fit: FitConfig::default(),
        }
    }
}

impl SimConfig {
    pub fn validate(&self) -> Result<()> {
        if self.n < 10 {
            return Err(Error::Config(format!(
                "n must be at least 10, got {}",
                self.n
            )));
        }
        if self.reps == 0 {
            return Err(Error::Config("reps must be at least 1".into()));
        }
        if !(self.rho.abs() < 1.0) {
            return Err(Error::Config(format!(
                "|rho| must be < 1, got {}",
                self.rho
            )));
        }
        if !(self.noise_sd.is_finite() && self.noise_sd >= 0.0) {
            return Err(Error::Config(format!(
                "noise_sd must be nonnegative, got {}",
                self.noise_sd
            )));
        }
        let (lo, hi) = self.interval;
        if !(lo.is_finite() && hi.is_finite() && lo < hi) {
            return Err(Error::Config(format!(
                "bad truncation interval [{lo}, {hi}]"
            )));
        }
        let g = self.ise_grid;
        if g.points == 0 || !(g.lo < g.hi) || g.lo < lo || g.hi > hi {
            return Err(Error::Config(format!(
                "ISE grid [{}, {}] x {} must lie inside the truncation interval",
                g.lo, g.hi, g.points
            )));
        }
        self.fit.validate()
    }

    pub fn d(&self) -> usize {
        if self.m2.is_some() {
            2
        } else {
            1
        }
    }

    pub fn components(&self) -> Vec<&ComponentFn> {
        std::iter::once(&self.m1).chain(self.m2.as_ref()).collect()
    }
}

/// SplitMix64 finalizer.
fn mix64(mut z: u64) -> u64 {
    z = z.wrapping_add(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Master seed of sub-experiment `salt`: `mix64(master ^ mix64(salt))`
/// with `mix64` the SplitMix64 output function.
pub fn derive_seed(master: u64, salt: u64) -> u64 {
    mix64(master ^ mix64(salt))
}

/// Generator of replication `rep_index`.
pub fn rep_rng(master_seed: u64, rep_index: u64) -> ChaCha20Rng {
    let mut rng = ChaCha20Rng::seed_from_u64(master_seed);
    rng.set_stream(rep_index);
    rng
}

/// Rejection sampler for a standard bivariate normal with correlation
/// `rho`, truncated to `interval` in both coordinates. Returns the two
/// covariate columns.
pub fn sample_truncated_bvn<R: Rng + ?Sized>(
    n: usize,
    rho: f64,
    interval: (f64, f64),
    rng: &mut R,
) -> Result<(Vec<f64>, Vec<f64>)> {
    if !(rho.abs() < 1.0) {
        return Err(Error::Config(format!("|rho| must be < 1, got {rho}")));
    }
    let (lo, hi) = interval;
    if !(lo < hi) {
        return Err(Error::Config(format!("empty interval [{lo}, {hi}]")));
    }
    let s = (1.0 - rho * rho).sqrt();
    let inside = |v: f64| v >= lo && v <= hi;
    let mut x1 = Vec::with_capacity(n);
    let mut x2 = Vec::with_capacity(n);
    let mut attempts: u64 = 0;
    while x1.len() < n {
        attempts += 1;
        let z1: f64 = StandardNormal.sample(rng);
        let z2: f64 = StandardNormal.sample(rng);
        let a = z1;
        let b = rho * z1 + s * z2;
        if inside(a) && inside(b) {
            x1.push(a);
            x2.push(b);
        }
        if attempts >= 1_000_000 && (x1.len() as f64) < MIN_ACCEPTANCE_RATE * attempts as f64 {
            return Err(Error::Config(format!(
                "acceptance rate below {MIN_ACCEPTANCE_RATE} for interval [{lo}, {hi}]"
            )));
        }
    }
    Ok((x1, x2))
}

/// Draws replication `rep_index` of `config`.
pub fn generate(config: &SimConfig, rep_index: u64) -> Result<Dataset> {
    config.validate()?;
    let mut rng = rep_rng(config.master_seed, rep_index);
    let (x1, x2) = sample_truncated_bvn(config.n, config.rho, config.interval, &mut rng)?;
    let noise = Normal::new(0.0, config.noise_sd)
        .map_err(|e| Error::Config(format!("noise distribution: {e}")))?;
    let mut y = Vec::with_capacity(config.n);
    for i in 0..config.n {
        let mut v = config.m1.eval(x1[i]);
        if let Some(m2) = &config.m2 {
            v += m2.eval(x2[i]);
        }
        let e: f64 = if config.noise_sd > 0.0 {
            noise.sample(&mut rng)
        } else {
            0.0
        };
        y.push(v + e);
    }
    let columns = if config.m2.is_some() {
        vec![x1, x2]
    } else {
        vec![x1]
    };
    Dataset::new(y, columns)
}

/// Integrated squared error of a centered fit against `truth - truth_offset`,
/// approximated by the grid mean times the grid length.
pub fn ise(fit: &IsotonicFit, truth: &ComponentFn, truth_offset: f64, grid: &Grid) -> f64 {
    let xs = grid.values();
    let sq: f64 = xs
        .iter()
        .map(|&x| (fit.evaluate(x) - (truth.eval(x) - truth_offset)).powi(2))
        .sum();
    sq / xs.len() as f64 * grid.length()
}

/// [`ise`] under the chosen measure.
pub fn ise_with(
    fit: &IsotonicFit,
    truth: &ComponentFn,
    truth_offset: f64,
    grid: &Grid,
    measure: IseMeasure,
) -> f64 {
    let v = ise(fit, truth, truth_offset, grid);
    match measure {
        IseMeasure::Lebesgue => v,
        IseMeasure::GridAverage => v / grid.length(),
    }
}

/// Mean of `truth` over the sample, the offset matching empirical centering.
pub fn empirical_offset(truth: &ComponentFn, xs: &[f64]) -> f64 {
    xs.iter().map(|&x| truth.eval(x)).sum::<f64>() / xs.len() as f64
}

/// Both estimators of every component on one replication.
#[derive(Debug, Clone)]
pub struct RepFits {
    pub dataset: Dataset,
    pub backfit: Vec<IsotonicFit>,
    pub oracle: Vec<IsotonicFit>,
    /// Empirical means of the true components.
    pub truth_offsets: Vec<f64>,
    pub converged: bool,
    pub cycles: usize,
}

/// Generates replication `rep_index`, backfits it and computes the oracle
/// estimator of each component (other components known, true constant 0).
pub fn fit_replication(config: &SimConfig, rep_index: u64) -> Result<RepFits> {
    let dataset = generate(config, rep_index)?;
    let fit = backfit(&dataset, &config.fit)?;
    let comps = config.components();
    let mut oracle = Vec::with_capacity(comps.len());
    for target in 0..comps.len() {
        let known: Vec<Box<dyn Fn(f64) -> f64 + Sync>> = comps
            .iter()
            .enumerate()
            .filter(|&(l, _)| l != target)
            .map(|(_, c)| {
                let c = (*c).clone();
                Box::new(move |x: f64| c.eval(x)) as Box<dyn Fn(f64) -> f64 + Sync>
            })
            .collect();
        let spec = OracleSpec {
            target,
            known: known.iter().map(|b| b.as_ref()).collect(),
            true_c: 0.0,
        };
        oracle.push(oracle_estimator(&dataset, &spec)?.component);
    }
    let truth_offsets = comps
        .iter()
        .enumerate()
        .map(|(j, c)| empirical_offset(c, dataset.column(j)))
        .collect();
    Ok(RepFits {
        dataset,
        backfit: fit.components,
        oracle,
        truth_offsets,
        converged: fit.converged,
        cycles: fit.n_cycles,
    })
}

#[derive(Debug, Clone, PartialEq)]
struct RepIse {
    backfit: Vec<f64>,
    oracle: Vec<f64>,
    converged: bool,
    cycles: usize,
}

fn replication_ise(config: &SimConfig, rep_index: u64) -> Result<RepIse> {
    let fits = fit_replication(config, rep_index)?;
    let comps = config.components();
    let score = |est: &[IsotonicFit]| -> Vec<f64> {
        est.iter()
            .zip(&comps)
            .zip(&fits.truth_offsets)
            .map(|((f, c), &off)| ise_with(f, c, off, &config.ise_grid, config.ise_measure))
            .collect()
    };
    Ok(RepIse {
        backfit: score(&fits.backfit),
        oracle: score(&fits.oracle),
        converged: fits.converged,
        cycles: fits.cycles,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ComponentMise {
    pub name: String,
    pub mise_backfit: f64,
    pub mise_oracle: f64,
    /// `mise_backfit / mise_oracle`
    pub ratio: f64,
    pub se_backfit: f64,
    pub se_oracle: f64,
    /// Delta-method standard error of the ratio, using the paired
    /// covariance of the two ISE samples.
    pub se_ratio: f64,
}

#[derive(Debug, Clone, Serialize)]
pub struct MiseReport {
    pub config: SimConfig,
    pub reps_completed: usize,
    pub failures: usize,
    pub nonconverged: usize,
    pub mean_cycles: f64,
    pub components: Vec<ComponentMise>,
}

fn mean(v: &[f64]) -> f64 {
    v.iter().sum::<f64>() / v.len() as f64
}

fn covariance(a: &[f64], b: &[f64]) -> f64 {
    let n = a.len();
    if n < 2 {
        return 0.0;
    }
    let (ma, mb) = (mean(a), mean(b));
    a.iter()
        .zip(b)
        .map(|(x, y)| (x - ma) * (y - mb))
        .sum::<f64>()
        / (n - 1) as f64
}

fn summarize(name: &str, b: &[f64], o: &[f64]) -> ComponentMise {
    let n = b.len() as f64;
    let (mb, mo) = (mean(b), mean(o));
    let var_b = covariance(b, b) / n;
    let var_o = covariance(o, o) / n;
    let cov = covariance(b, o) / n;
    let ratio = mb / mo;
    let var_ratio = (var_b - 2.0 * ratio * cov + ratio * ratio * var_o) / (mo * mo);
    ComponentMise {
        name: name.to_string(),
        mise_backfit: mb,
        mise_oracle: mo,
        ratio,
        se_backfit: var_b.sqrt(),
        se_oracle: var_o.sqrt(),
        se_ratio: var_ratio.max(0.0).sqrt(),
    }
}

/// Runs `config.reps` replications and aggregates MISE per component.
///
/// Replications that fail are excluded and counted; if all fail the
/// experiment fails.
pub fn mise_experiment(config: &SimConfig) -> Result<MiseReport> {
    config.validate()?;
    let outcomes: Vec<Result<RepIse>> = (0..config.reps as u64)
        .into_par_iter()
        .map(|r| replication_ise(config, r))
        .collect();
    let mut ok = Vec::with_capacity(outcomes.len());
    let mut failures = 0;
    let mut first_err = None;
    for o in outcomes {
        match o {
            Ok(v) => ok.push(v),
            Err(e) => {
                failures += 1;
                first_err.get_or_insert(e);
            }
        }
    }
    if ok.is_empty() {
        return Err(first_err.expect("at least one replication ran"));
    }
    let comps = config.components();
    let components = comps
        .iter()
        .enumerate()
        .map(|(j, c)| {
            let b: Vec<f64> = ok.iter().map(|r| r.backfit[j]).collect();
            let o: Vec<f64> = ok.iter().map(|r| r.oracle[j]).collect();
            summarize(c.name(), &b, &o)
        })
        .collect();
    Ok(MiseReport {
        config: config.clone(),
        reps_completed: ok.len(),
        failures,
        nonconverged: ok.iter().filter(|r| !r.converged).count(),
        mean_cycles: ok.iter().map(|r| r.cycles as f64).sum::<f64>() / ok.len() as f64,
        components,
    })
}

/// Interior of the support kept for sup-norm comparisons: the interval
/// with `n^(-1/3)` (in covariate units) removed at each end.
pub fn interior_grid(interval: (f64, f64), n: usize, points: usize) -> Result<Grid> {
    let (lo, hi) = interval;
    let trim = (n as f64).powf(-1.0 / 3.0);
    if lo + trim >= hi - trim {
        return Err(Error::Config(format!(
            "interval [{lo}, {hi}] has no interior left after trimming {trim} at n = {n}"
        )));
    }
    Ok(Grid::new(lo + trim, hi - trim, points))
}

pub const INTERIOR_POINTS: usize = 201;

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct SupDifferenceRow {
    pub n: usize,
    pub reps: usize,
    /// Median over replications of the interior sup-distance, per component.
    pub median_sup: Vec<f64>,
    pub mean_sup: Vec<f64>,
    /// `median_sup / n^(-1/3)`
    pub normalized: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OraclePropertyReport {
    pub rows: Vec<SupDifferenceRow>,
    /// Whether the normalized ratio of each component strictly decreases
    /// along `n`; `None` with fewer than two sample sizes.
    pub strictly_decreasing: Option<Vec<bool>>,
}

fn median(v: &mut [f64]) -> f64 {
    v.sort_by(f64::total_cmp);
    let k = v.len();
    if k % 2 == 1 {
        v[k / 2]
    } else {
        0.5 * (v[k / 2 - 1] + v[k / 2])
    }
}

/// For each sample size, the distribution of
/// `sup |backfit_j - oracle_j|` over the trimmed interior of the support.
/// Sample size `ns[k]` runs with master seed `derive_seed(template.master_seed, k)`.
pub fn oracle_property_experiment(
    ns: &[usize],
    template: &SimConfig,
) -> Result<OraclePropertyReport> {
    if ns.is_empty() {
        return Err(Error::Config("no sample sizes given".into()));
    }
    if ns.windows(2).any(|p| p[0] >= p[1]) {
        return Err(Error::Config(
            "sample sizes must be strictly increasing".into(),
        ));
    }
    let d = template.d();
    let mut rows = Vec::with_capacity(ns.len());
    for (k, &n) in ns.iter().enumerate() {
        let config = SimConfig {
            n,
            master_seed: derive_seed(template.master_seed, k as u64),
            ..template.clone()
        };
        config.validate()?;
        let grid = interior_grid(config.interval, n, INTERIOR_POINTS)?.values();
        let sups: Vec<Result<Vec<f64>>> = (0..config.reps as u64)
            .into_par_iter()
            .map(|r| {
                let fits = fit_replication(&config, r)?;
                Ok(fits
                    .backfit
                    .iter()
                    .zip(&fits.oracle)
                    .map(|(b, o)| {
                        grid.iter()
                            .map(|&x| (b.evaluate(x) - o.evaluate(x)).abs())
                            .fold(0.0, f64::max)
                    })
                    .collect())
            })
            .collect();
        let sups = sups.into_iter().collect::<Result<Vec<_>>>()?;
        let scale = (n as f64).powf(-1.0 / 3.0);
        let mut median_sup = Vec::with_capacity(d);
        let mut mean_sup = Vec::with_capacity(d);
        for j in 0..d {
            let mut col: Vec<f64> = sups.iter().map(|s| s[j]).collect();
            mean_sup.push(mean(&col));
            median_sup.push(median(&mut col));
        }
        rows.push(SupDifferenceRow {
            n,
            reps: sups.len(),
            normalized: median_sup.iter().map(|m| m / scale).collect(),
            median_sup,
            mean_sup,
        });
    }
    let strictly_decreasing = (rows.len() >= 2).then(|| {
        (0..d)
            .map(|j| {
                rows.windows(2)
                    .all(|p| p[1].normalized[j] < p[0].normalized[j])
            })
            .collect()
    });
    Ok(OraclePropertyReport {
        rows,
        strictly_decreasing,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct QuantileCurve {
    pub quantile: f64,
    pub rep_index: u64,
    /// L2 distance between the backfitted and oracle `m1` curves.
    pub l2_distance: f64,
    pub x: Vec<f64>,
    pub backfit: Vec<f64>,
    pub oracle: Vec<f64>,
    pub truth: Vec<f64>,
}

fn l2_distance(a: &IsotonicFit, b: &IsotonicFit, grid: &Grid) -> f64 {
    let xs = grid.values();
    let sq: f64 = xs
        .iter()
        .map(|&x| (a.evaluate(x) - b.evaluate(x)).powi(2))
        .sum();
    (sq / xs.len() as f64 * grid.length()).sqrt()
}

/// Ranks replications by the L2 distance between the backfitted and
/// oracle estimates of `m1` and returns the curves of the replications at
/// the requested quantile ranks (`round(q * (reps - 1))`, ties broken by
/// replication index).
pub fn quantile_curves(config: &SimConfig, quantiles: &[f64]) -> Result<Vec<QuantileCurve>> {
    config.validate()?;
    if let Some(q) = quantiles.iter().find(|q| !(**q > 0.0 && **q < 1.0)) {
        return Err(Error::Config(format!("quantile {q} outside (0, 1)")));
    }
    let grid = config.ise_grid;
    let dists: Vec<f64> = (0..config.reps as u64)
        .into_par_iter()
        .map(|r| {
            let fits = fit_replication(config, r)?;
            Ok(l2_distance(&fits.backfit[0], &fits.oracle[0], &grid))
        })
        .collect::<Result<Vec<_>>>()?;
    let mut ranked: Vec<usize> = (0..dists.len()).collect();
    ranked.sort_by(|&a, &b| dists[a].total_cmp(&dists[b]).then(a.cmp(&b)));

    let xs = grid.values();
    quantiles
        .iter()
        .map(|&q| {
            let pos = (q * (ranked.len() - 1) as f64).round() as usize;
            let rep = ranked[pos] as u64;
            let fits = fit_replication(config, rep)?;
            let off = fits.truth_offsets[0];
            Ok(QuantileCurve {
                quantile: q,
                rep_index: rep,
                l2_distance: dists[rep as usize],
                backfit: xs.iter().map(|&x| fits.backfit[0].evaluate(x)).collect(),
                oracle: xs.iter().map(|&x| fits.oracle[0].evaluate(x)).collect(),
                truth: xs.iter().map(|&x| config.m1.eval(x) - off).collect(),
                x: xs.clone(),
            })
        })
        .collect()
}

/// Long-format CSV (`x,value,series,quantile`) of quantile curves.
pub fn curves_to_csv(curves: &[QuantileCurve]) -> String {
    let mut out = String::from("x,value,series,quantile\n");
    for c in curves {
        for (series, vals) in [
            ("backfit", &c.backfit),
            ("oracle", &c.oracle),
            ("truth", &c.truth),
        ] {
            for (x, v) in c.x.iter().zip(vals.iter()) {
                out.push_str(&format!("{x},{v},{series},{}\n", c.quantile));
            }
        }
    }
    out
}

/// Simulation designs of the two comparison tables.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize)]
#[serde(rename_all = "lowercase")]
pub enum TablePreset {
    /// `m1 = x^3`, `m2 = sin(pi x / 2)`
    Table1,
    /// `m1` = step plateau, `m2 = sin(pi x / 2)`
    Table2,
}

impl TablePreset {
    pub fn from_name(name: &str) -> Result<Self> {
        match name {
            "table1" => Ok(TablePreset::Table1),
            "table2" => Ok(TablePreset::Table2),
            other => Err(Error::Config(format!(
                "unknown table preset {other:?} (expected table1 or table2)"
            ))),
        }
    }

    pub fn sample_sizes(&self) -> [usize; 3] {
        [200, 400, 800]
    }

    pub fn rhos(&self) -> [f64; 5] {
        [0.0, 0.5, -0.5, 0.9, -0.9]
    }

    /// `(n, rho)` in table row order.
    pub fn settings(&self) -> Vec<(usize, f64)> {
        self.sample_sizes()
            .iter()
            .flat_map(|&n| self.rhos().into_iter().map(move |r| (n, r)))
            .collect()
    }

    pub fn m1(&self) -> ComponentFn {
        match self {
            TablePreset::Table1 => ComponentFn::Cubic,
            TablePreset::Table2 => ComponentFn::StepPlateau,
        }
    }

    /// Configuration of setting `(n, rho)`; the seed is derived from the
    /// setting's row index.
    pub fn config(&self, n: usize, rho: f64, reps: usize, master_seed: u64) -> SimConfig {
        let row = self
            .settings()
            .iter()
            .position(|&(sn, sr)| sn == n && sr == rho)
            .unwrap_or(usize::MAX) as u64;
        SimConfig {
            n,
            rho,
            m1: self.m1(),
            m2: Some(ComponentFn::HalfSine),
            reps,
            master_seed: derive_seed(master_seed, row),
            ..SimConfig::default()
        }
    }
}

#[derive(Debug, Clone, Serialize)]
pub struct TableRow {
    pub n: usize,
    pub rho: f64,
    pub report: MiseReport,
}

#[derive(Debug, Clone, Serialize)]
pub struct TableReport {
    pub preset: TablePreset,
    pub reps: usize,
    pub master_seed: u64,
    pub rows: Vec<TableRow>,
}

/// Runs every `(n, rho)` setting of a preset. The preset fixes the settings
/// and the component functions; every other field comes from `template`.
pub fn reproduce_table(preset: TablePreset, template: &SimConfig) -> Result<TableReport> {
    let rows = preset
        .settings()
        .into_iter()
        .map(|(n, rho)| {
            let base = preset.config(n, rho, template.reps, template.master_seed);
            let config = SimConfig {
                m1: base.m1,
                m2: base.m2,
                n,
                rho,
                master_seed: base.master_seed,
                ..template.clone()
            };
            mise_experiment(&config).map(|report| TableRow { n, rho, report })
        })
        .collect::<Result<Vec<_>>>()?;
    Ok(TableReport {
        preset,
        reps: template.reps,
        master_seed: template.master_seed,
        rows,
    })
}

pub const TABLE_CSV_HEADER: &str = "n,rho,m1_backfit,m1_oracle,m1_ratio,m2_backfit,m2_oracle,m2_ratio,\
m1_backfit_se,m1_oracle_se,m1_ratio_se,m2_backfit_se,m2_oracle_se,m2_ratio_se,reps,failures,nonconverged";

impl TableReport {
    /// One line per setting; floats use shortest round-trip formatting.
    pub fn to_csv(&self) -> String {
        let mut out = String::from(TABLE_CSV_HEADER);
        out.push('\n');
        for row in &self.rows {
            let c = &row.report.components;
            let (a, b) = (&c[0], &c[1]);
            out.push_str(&format!(
                "{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{},{}\n",
                row.n,
                row.rho,
                a.mise_backfit,
                a.mise_oracle,
                a.ratio,
                b.mise_backfit,
                b.mise_oracle,
                b.ratio,
                a.se_backfit,
                a.se_oracle,
                a.se_ratio,
                b.se_backfit,
                b.se_oracle,
                b.se_ratio,
                row.report.reps_completed,
                row.report.failures,
                row.report.nonconverged,
            ));
        }
        out
    }
}
