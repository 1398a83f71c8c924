use crate::error::{Error, Result};

/// Sorted unique values of one covariate with the observations pooled at
/// each value.
#[derive(Debug, Clone, PartialEq)]
pub struct CovariateOrder {
    knots: Vec<f64>,
    weights: Vec<f64>,
    members: Vec<Vec<usize>>,
    knot_of: Vec<usize>,
}

impl CovariateOrder {
    fn build(column: &[f64]) -> Self {
        let n = column.len();
        let mut idx: Vec<usize> = (0..n).collect();
        // stable, so members stay in observation order
        idx.sort_by(|&a, &b| column[a].total_cmp(&column[b]));

        let mut knots = Vec::new();
        let mut members: Vec<Vec<usize>> = Vec::new();
        let mut knot_of = vec![0; n];
        for &i in &idx {
            if knots.last() != Some(&column[i]) {
                knots.push(column[i]);
                members.push(Vec::new());
            }
            let k = knots.len() - 1;
            members[k].push(i);
            knot_of[i] = k;
        }
        let weights = members.iter().map(|m| m.len() as f64).collect();
        Self {
            knots,
            weights,
            members,
            knot_of,
        }
    }

    pub fn knots(&self) -> &[f64] {
        &self.knots
    }

    /// Multiplicity of each knot.
    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn members(&self) -> &[Vec<usize>] {
        &self.members
    }

    /// Knot index of every observation.
    pub fn knot_of(&self) -> &[usize] {
        &self.knot_of
    }

    pub fn n_knots(&self) -> usize {
        self.knots.len()
    }

    /// Per-knot weighted means of an observation-space vector.
    pub fn knot_means(&self, obs: &[f64]) -> Vec<f64> {
        let mut out = Vec::with_capacity(self.n_knots());
        self.knot_means_into(obs, &mut out);
        out
    }

    pub(crate) fn knot_means_into(&self, obs: &[f64], out: &mut Vec<f64>) {
        out.clear();
        out.resize(self.n_knots(), 0.0);
        for (&k, &v) in self.knot_of.iter().zip(obs) {
            out[k] += v;
        }
        for (o, w) in out.iter_mut().zip(&self.weights) {
            *o /= w;
        }
    }

    /// Broadcasts a knot-space vector back to observations.
    pub fn broadcast(&self, knot_values: &[f64]) -> Vec<f64> {
        self.knot_of.iter().map(|&k| knot_values[k]).collect()
    }
}

/// Responses and covariates of an additive regression problem.
#[derive(Debug, Clone, PartialEq)]
pub struct Dataset {
    y: Vec<f64>,
    columns: Vec<Vec<f64>>,
    orders: Vec<CovariateOrder>,
}

impl Dataset {
    /// Builds a dataset from the response and covariate columns
    /// (`columns[j][i]` is covariate `j` of observation `i`).
    pub fn new(y: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Self> {
        let n = y.len();
        if n == 0 {
            return Err(Error::invalid("dataset has no observations"));
        }
        if columns.is_empty() {
            return Err(Error::invalid("dataset has no covariates"));
        }
        if let Some(i) = y.iter().position(|v| !v.is_finite()) {
            return Err(Error::invalid(format!("response {i} is not finite")));
        }
        for (j, col) in columns.iter().enumerate() {
            if col.len() != n {
                return Err(Error::invalid(format!(
                    "covariate {j} has {} entries, expected {n}",
                    col.len()
                )));
            }
            if let Some(i) = col.iter().position(|v| !v.is_finite()) {
                return Err(Error::invalid(format!(
                    "covariate {j} of observation {i} is not finite"
                )));
            }
        }
        let orders = columns.iter().map(|c| CovariateOrder::build(c)).collect();
        Ok(Self { y, columns, orders })
    }

    /// Row-major construction: `rows[i][j]` is covariate `j` of observation `i`.
    pub fn from_rows(y: Vec<f64>, rows: &[Vec<f64>]) -> Result<Self> {
        if rows.len() != y.len() {
            return Err(Error::invalid(format!(
                "{} covariate rows for {} responses",
                rows.len(),
                y.len()
            )));
        }
        let d = rows.first().map_or(0, Vec::len);
        if let Some(i) = rows.iter().position(|r| r.len() != d) {
            return Err(Error::invalid(format!("row {i} has a different width")));
        }
        let columns = (0..d)
            .map(|j| rows.iter().map(|r| r[j]).collect())
            .collect();
        Self::new(y, columns)
    }

    pub fn y(&self) -> &[f64] {
        &self.y
    }

    pub fn column(&self, j: usize) -> &[f64] {
        &self.columns[j]
    }

    pub fn columns(&self) -> &[Vec<f64>] {
        &self.columns
    }

    pub fn order(&self, j: usize) -> &CovariateOrder {
        &self.orders[j]
    }

    pub fn orders(&self) -> &[CovariateOrder] {
        &self.orders
    }

    pub fn n(&self) -> usize {
        self.y.len()
    }

    pub fn d(&self) -> usize {
        self.columns.len()
    }

    /// Sample standard deviation of the response (0 when `n == 1`).
    pub fn response_sd(&self) -> f64 {
        let n = self.n();
        if n < 2 {
            return 0.0;
        }
        let mean = self.y.iter().sum::<f64>() / n as f64;
        let ss: f64 = self.y.iter().map(|v| (v - mean).powi(2)).sum();
        (ss / (n - 1) as f64).sqrt()
    }
}

/// Sorts and pools every covariate of `(y, columns)`.
pub fn build_dataset(y: Vec<f64>, columns: Vec<Vec<f64>>) -> Result<Dataset> {
    Dataset::new(y, columns)
}
