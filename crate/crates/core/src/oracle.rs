//! Reference estimators used to check backfitting.
//!
//! * [`oracle_estimator`] fits one component with all the others known.
//! * [`nnls_reference_fit`] solves the joint least squares projection
//!   without any cyclic projections: each component is written as
//!   nonnegative increments between consecutive knots and the whole problem
//!   goes to an active-set NNLS solver.
//! * [`kkt_fixed_point_check`] certifies a candidate by blockwise
//!   stationarity.

use nalgebra::{DMatrix, DVector};
use serde::Serialize;

use crate::backfit::{fitted_sum, partial_residual};
use crate::dataset::Dataset;
use crate::error::{Error, Result};
use crate::isotonic::{center, pava_weighted, IsotonicFit};
use crate::nnls::nnls;

/// A known component function.
pub type KnownFn<'a> = &'a (dyn Fn(f64) -> f64 + Sync);

/// Everything except component `target` is known.
pub struct OracleSpec<'a> {
    pub target: usize,
    /// True components for the other covariates, in covariate order with
    /// `target` skipped.
    pub known: Vec<KnownFn<'a>>,
    pub true_c: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct OracleFit {
    /// Centered to zero data mean.
    pub component: IsotonicFit,
    pub c: f64,
}

/// Isotonic regression of `y - c - sum_{l != target} m_l(X_l)` on
/// covariate `target`, centered.
pub fn oracle_estimator(dataset: &Dataset, spec: &OracleSpec<'_>) -> Result<OracleFit> {
    let d = dataset.d();
    if spec.target >= d {
        return Err(Error::invalid(format!(
            "target {} out of range for d = {d}",
            spec.target
        )));
    }
    if spec.known.len() + 1 != d {
        return Err(Error::invalid(format!(
            "expected {} known components, got {}",
            d - 1,
            spec.known.len()
        )));
    }
    let mut resid: Vec<f64> = dataset.y().iter().map(|y| y - spec.true_c).collect();
    let others = (0..d).filter(|&l| l != spec.target);
    for (l, f) in others.zip(&spec.known) {
        for (r, &x) in resid.iter_mut().zip(dataset.column(l)) {
            let v = f(x);
            if !v.is_finite() {
                return Err(Error::Evaluation(format!(
                    "known component {l} returned {v} at x = {x}"
                )));
            }
            *r -= v;
        }
    }
    let order = dataset.order(spec.target);
    let means = order.knot_means(&resid);
    let levels = pava_weighted(&means, order.weights())?;
    let raw = IsotonicFit::new(order.knots().to_vec(), levels, order.weights().to_vec())?;
    let (component, c) = center(&raw);
    Ok(OracleFit { component, c })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct ReferenceFit {
    /// The projection of `y` onto the sum of the monotone cones.
    pub fitted: Vec<f64>,
    /// Knot-space components; the intercept is folded into the first.
    pub components: Vec<Vec<f64>>,
    pub objective: f64,
    pub iterations: usize,
}

/// Joint least squares fit by nonnegative least squares on knot increments.
///
/// Component `j` is `sum_{l <= k} delta_{j,l}` at knot `k` with every
/// `delta >= 0`; the base levels collapse into one free intercept, which is
/// profiled out by centering the design. `tol` bounds the dual (gradient)
/// entries of inactive increments relative to `max(1, |A^T y|_inf)`.
///
/// Dense; meant for `n` up to a few hundred.
pub fn nnls_reference_fit(dataset: &Dataset, tol: f64) -> Result<ReferenceFit> {
    if !(tol.is_finite() && tol > 0.0) {
        return Err(Error::invalid(format!("tol must be positive, got {tol}")));
    }
    let n = dataset.n();
    let mut col_owner: Vec<(usize, usize)> = Vec::new();
    for (j, order) in dataset.orders().iter().enumerate() {
        for l in 1..order.n_knots() {
            col_owner.push((j, l));
        }
    }
    let p = col_owner.len();
    let mut a = DMatrix::<f64>::zeros(n, p);
    for (c, &(j, l)) in col_owner.iter().enumerate() {
        let knot_of = dataset.order(j).knot_of();
        for i in 0..n {
            if knot_of[i] >= l {
                a[(i, c)] = 1.0;
            }
        }
    }
    let col_means: Vec<f64> = (0..p).map(|c| a.column(c).mean()).collect();
    for (c, &m) in col_means.iter().enumerate() {
        a.column_mut(c).add_scalar_mut(-m);
    }
    let y_mean = dataset.y().iter().sum::<f64>() / n as f64;
    let b = DVector::from_iterator(n, dataset.y().iter().map(|y| y - y_mean));

    let scale = a.tr_mul(&b).amax().max(1.0);
    let sol = nnls(&a, &b, tol * scale, 10 * p + 100)?;

    let mut components: Vec<Vec<f64>> = dataset
        .orders()
        .iter()
        .map(|o| vec![0.0; o.n_knots()])
        .collect();
    for (c, &(j, l)) in col_owner.iter().enumerate() {
        for v in &mut components[j][l..] {
            *v += sol.x[c];
        }
    }
    let shift: f64 = col_owner
        .iter()
        .enumerate()
        .map(|(c, _)| col_means[c] * sol.x[c])
        .sum();
    let intercept = y_mean - shift;
    for v in &mut components[0] {
        *v += intercept;
    }
    let fitted = fitted_sum(dataset, &components);
    let objective = fitted
        .iter()
        .zip(dataset.y())
        .map(|(g, y)| (y - g).powi(2))
        .sum();
    Ok(ReferenceFit {
        fitted,
        components,
        objective,
        iterations: sol.iterations,
    })
}

#[derive(Debug, Clone, PartialEq, Serialize)]
pub struct KktReport {
    pub passed: bool,
    pub max_violation: f64,
    pub per_component: Vec<f64>,
}

/// Checks that every component equals the isotonic regression of its own
/// partial residuals (pooled per knot). Blockwise stationarity of this
/// convex problem over a product of cones is global optimality.
///
/// Components are knot-space vectors that sum to the fitted values, so any
/// constant must already be folded in.
pub fn kkt_fixed_point_check(
    dataset: &Dataset,
    components: &[Vec<f64>],
    tol: f64,
) -> Result<KktReport> {
    if components.len() != dataset.d() {
        return Err(Error::invalid("one component per covariate required"));
    }
    for (j, (g, order)) in components.iter().zip(dataset.orders()).enumerate() {
        if g.len() != order.n_knots() {
            return Err(Error::invalid(format!(
                "component {j} has {} levels for {} knots",
                g.len(),
                order.n_knots()
            )));
        }
        if g.windows(2).any(|p| p[0] > p[1]) {
            return Err(Error::invalid(format!("component {j} is not monotone")));
        }
    }
    let mut per_component = Vec::with_capacity(components.len());
    for (j, g) in components.iter().enumerate() {
        let order = dataset.order(j);
        let means = order.knot_means(&partial_residual(dataset, components, j));
        let proj = pava_weighted(&means, order.weights())?;
        let dev = proj
            .iter()
            .zip(g)
            .fold(0.0f64, |m, (a, b)| m.max((a - b).abs()));
        per_component.push(dev);
    }
    let max_violation = per_component.iter().copied().fold(0.0, f64::max);
    Ok(KktReport {
        passed: max_violation <= tol,
        max_violation,
        per_component,
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataset::build_dataset;

    #[test]
    fn oracle_with_zero_known_parts_is_pava() {
        let y = vec![3.0, 1.0, 2.0, 0.5];
        let ds = build_dataset(
            y.clone(),
            vec![vec![0.0, 1.0, 2.0, 3.0], vec![1.0, 0.0, 3.0, 2.0]],
        )
        .unwrap();
        let zero = |_: f64| 0.0;
        let spec = OracleSpec {
            target: 0,
            known: vec![&zero],
            true_c: 0.0,
        };
        let fit = oracle_estimator(&ds, &spec).unwrap();
        let p = pava_weighted(&y, &[1.0; 4]).unwrap();
        let mean = p.iter().sum::<f64>() / 4.0;
        assert!((fit.c - mean).abs() < 1e-14);
        for (a, b) in fit.component.levels().iter().zip(&p) {
            assert!((a + fit.c - b).abs() < 1e-14);
        }
    }

    #[test]
    fn oracle_recovers_noiseless_component() {
        let x1 = vec![-0.5, 0.1, 0.7, -0.2, 0.3];
        let x2 = vec![0.9, -0.3, 0.2, 0.4, -0.8];
        let m1 = |x: f64| x * x * x;
        let m2 = |x: f64| 2.0 * x;
        let y: Vec<f64> = x1
            .iter()
            .zip(&x2)
            .map(|(a, b)| m1(*a) + m2(*b) + 1.5)
            .collect();
        let ds = build_dataset(y, vec![x1.clone(), x2]).unwrap();
        let spec = OracleSpec {
            target: 0,
            known: vec![&m2],
            true_c: 1.5,
        };
        let fit = oracle_estimator(&ds, &spec).unwrap();
        for &x in &x1 {
            assert!((fit.component.evaluate(x) + fit.c - m1(x)).abs() < 1e-14);
        }
    }

    #[test]
    fn oracle_errors() {
        let ds = build_dataset(vec![1.0, 2.0], vec![vec![0.0, 1.0], vec![1.0, 0.0]]).unwrap();
        let bad = |_: f64| f64::NAN;
        let spec = OracleSpec {
            target: 0,
            known: vec![&bad],
            true_c: 0.0,
        };
        assert!(matches!(
            oracle_estimator(&ds, &spec),
            Err(Error::Evaluation(_))
        ));
        let spec = OracleSpec {
            target: 0,
            known: vec![],
            true_c: 0.0,
        };
        assert!(oracle_estimator(&ds, &spec).is_err());
    }

    #[test]
    fn reference_hand_example() {
        let ds = build_dataset(vec![0.0, 2.0], vec![vec![1.0, 2.0], vec![2.0, 1.0]]).unwrap();
        let r = nnls_reference_fit(&ds, 1e-12).unwrap();
        assert!((r.fitted[0]).abs() < 1e-12 && (r.fitted[1] - 2.0).abs() < 1e-12);
        assert!(r.objective < 1e-20);
    }

    #[test]
    fn reference_single_covariate_is_pava() {
        let y = vec![0.4, -1.0, 2.0, 1.0, 1.5, 0.0];
        let ds = build_dataset(y.clone(), vec![vec![1.0, 2.0, 3.0, 4.0, 5.0, 6.0]]).unwrap();
        let r = nnls_reference_fit(&ds, 1e-12).unwrap();
        let p = pava_weighted(&y, &[1.0; 6]).unwrap();
        for (a, b) in r.fitted.iter().zip(&p) {
            assert!((a - b).abs() < 1e-10, "{a} vs {b}");
        }
    }

    #[test]
    fn kkt_examples() {
        let y = vec![3.0, 1.0, 2.0, 5.0];
        let ds = build_dataset(y.clone(), vec![vec![0.0, 1.0, 2.0, 3.0]]).unwrap();
        let p = pava_weighted(&y, &[1.0; 4]).unwrap();
        let rep = kkt_fixed_point_check(&ds, std::slice::from_ref(&p), 1e-12).unwrap();
        assert!(rep.passed);
        assert_eq!(rep.max_violation, 0.0);

        // p = [2, 2, 2, 5]; lift the first block
        let mut bumped = p.clone();
        for v in &mut bumped[..3] {
            *v += 0.1;
        }
        let rep = kkt_fixed_point_check(&ds, &[bumped], 1e-6).unwrap();
        assert!(!rep.passed);
        assert!(rep.max_violation > 0.05);

        assert!(kkt_fixed_point_check(&ds, &[vec![1.0, 0.0, 2.0, 3.0]], 1e-6).is_err());
        assert!(kkt_fixed_point_check(&ds, &[vec![1.0]], 1e-6).is_err());
    }
}
