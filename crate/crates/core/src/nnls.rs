//! Lawson-Hanson active-set solver for `min ||A x - b||` subject to `x >= 0`.

use nalgebra::{DMatrix, DVector};

use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct NnlsSolution {
    pub x: DVector<f64>,
    /// Dual vector `A^T (b - A x)` at the solution.
    pub dual: DVector<f64>,
    pub iterations: usize,
}

/// Solves the nonnegative least squares problem.
///
/// A column may enter the passive set only while its dual exceeds `tol`.
/// The unconstrained subproblems are solved by SVD, so duplicated columns
/// (common with additive indicator designs) do not break the solve.
pub fn nnls(a: &DMatrix<f64>, b: &DVector<f64>, tol: f64, max_iter: usize) -> Result<NnlsSolution> {
    let (m, p) = a.shape();
    if b.len() != m {
        return Err(Error::invalid("design and response row counts differ"));
    }
    let mut x = DVector::<f64>::zeros(p);
    let mut passive = vec![false; p];
    // columns whose entry produced a nonpositive step; excluded until the
    // passive set changes again
    let mut blocked = vec![false; p];
    let mut iterations = 0;

    loop {
        let w = a.tr_mul(&(b - a * &x));
        let entering = (0..p)
            .filter(|&j| !passive[j] && !blocked[j])
            .max_by(|&i, &j| w[i].total_cmp(&w[j]));
        let Some(t) = entering.filter(|&j| w[j] > tol) else {
            break;
        };
        iterations += 1;
        if iterations > max_iter {
            return Err(Error::Solver(format!(
                "active-set iteration limit {max_iter} exceeded"
            )));
        }
        passive[t] = true;

        let mut first = true;
        loop {
            let z = solve_passive(a, b, &passive);
            if first && z[t] <= 0.0 {
                passive[t] = false;
                blocked[t] = true;
                break;
            }
            first = false;
            if (0..p).filter(|&j| passive[j]).all(|j| z[j] > 0.0) {
                x = z;
                blocked.iter_mut().for_each(|b| *b = false);
                break;
            }
            let alpha = (0..p)
                .filter(|&j| passive[j] && z[j] <= 0.0)
                .map(|j| x[j] / (x[j] - z[j]))
                .fold(f64::INFINITY, f64::min);
            for j in (0..p).filter(|&j| passive[j]) {
                x[j] += alpha * (z[j] - x[j]);
            }
            let floor = 1e-14 * (1.0 + x.amax());
            let mut dropped = false;
            for j in 0..p {
                if passive[j] && x[j] <= floor {
                    x[j] = 0.0;
                    passive[j] = false;
                    dropped = true;
                }
            }
            if !dropped {
                return Err(Error::Solver(
                    "active-set inner loop made no progress".into(),
                ));
            }
        }
    }

    let resid = b - a * &x;
    let dual = a.tr_mul(&resid);
    Ok(NnlsSolution {
        x,
        dual,
        iterations,
    })
}

fn solve_passive(a: &DMatrix<f64>, b: &DVector<f64>, passive: &[bool]) -> DVector<f64> {
    let cols: Vec<usize> = (0..passive.len()).filter(|&j| passive[j]).collect();
    let sub = DMatrix::from_fn(a.nrows(), cols.len(), |i, k| a[(i, cols[k])]);
    let svd = sub.svd(true, true);
    let eps = 1e-12 * svd.singular_values.max().max(1.0);
    let sol = svd.solve(b, eps).expect("U and V were computed");
    let mut z = DVector::zeros(passive.len());
    for (k, &j) in cols.iter().enumerate() {
        z[j] = sol[k];
    }
    z
}
