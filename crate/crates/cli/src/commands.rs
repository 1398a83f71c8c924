use std::path::Path;

use addiso_core::simulation::{
    curves_to_csv, mise_experiment, oracle_property_experiment, quantile_curves, reproduce_table,
};
use addiso_core::{backfit, Dataset, FitConfig};
use serde::Serialize;

use crate::config::{Format, RunConfig};
use crate::error::CliError;

/// Header names plus the parsed columns of a fit input file.
pub struct InputTable {
    pub names: Vec<String>,
    pub y: Vec<f64>,
    pub columns: Vec<Vec<f64>>,
}

/// Reads a CSV whose first column is the response and whose remaining
/// columns are covariates.
pub fn read_input_csv(path: &Path) -> Result<InputTable, CliError> {
    let file = std::fs::File::open(path)
        .map_err(|e| CliError::Input(format!("cannot open {}: {e}", path.display())))?;
    parse_input_csv(file)
}

pub fn parse_input_csv<R: std::io::Read>(reader: R) -> Result<InputTable, CliError> {
    let mut rdr = csv::ReaderBuilder::new()
        .has_headers(true)
        .trim(csv::Trim::All)
        .from_reader(reader);
    let names: Vec<String> = rdr
        .headers()
        .map_err(|e| CliError::Input(format!("cannot read CSV header: {e}")))?
        .iter()
        .map(str::to_string)
        .collect();
    if names.len() < 2 {
        return Err(CliError::Input(
            "CSV needs a response column and at least one covariate column".into(),
        ));
    }
    let mut y = Vec::new();
    let mut columns = vec![Vec::new(); names.len() - 1];
    for rec in rdr.records() {
        let rec = rec.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            CliError::Input(format!("malformed CSV at line {line}: {e}"))
        })?;
        let line = rec.position().map_or(0, |p| p.line());
        for (col, field) in rec.iter().enumerate() {
            let v: f64 = field.parse().map_err(|_| {
                CliError::Input(format!(
                    "line {line}, column {} ({}): non-numeric value {field:?}",
                    col + 1,
                    names[col]
                ))
            })?;
            if !v.is_finite() {
                return Err(CliError::Input(format!(
                    "line {line}, column {} ({}): non-finite value",
                    col + 1,
                    names[col]
                )));
            }
            if col == 0 {
                y.push(v);
            } else {
                columns[col - 1].push(v);
            }
        }
    }
    if y.is_empty() {
        return Err(CliError::Input("CSV has no data rows".into()));
    }
    Ok(InputTable { names, y, columns })
}

#[derive(Debug, Serialize)]
pub struct ComponentOut {
    pub name: String,
    pub knots: Vec<f64>,
    pub levels: Vec<f64>,
    pub block_weights: Vec<f64>,
}

#[derive(Debug, Serialize)]
pub struct FitReport {
    pub c_hat: f64,
    pub components: Vec<ComponentOut>,
    pub n_cycles: usize,
    pub cycles_run: usize,
    pub converged: bool,
    pub final_objective: f64,
    pub last_sum_change: f64,
}

pub fn fit_table(table: &InputTable, fit: &FitConfig) -> Result<FitReport, CliError> {
    let ds = Dataset::new(table.y.clone(), table.columns.clone())?;
    let res = backfit(&ds, fit)?;
    Ok(FitReport {
        c_hat: res.c_hat,
        components: res
            .components
            .iter()
            .zip(&table.names[1..])
            .map(|(c, name)| ComponentOut {
                name: name.clone(),
                knots: c.knots().to_vec(),
                levels: c.levels().to_vec(),
                block_weights: c.block_weights().to_vec(),
            })
            .collect(),
        n_cycles: res.n_cycles,
        cycles_run: res.diagnostics.cycles_run,
        converged: res.converged,
        final_objective: res.final_objective,
        last_sum_change: res.diagnostics.last_sum_change,
    })
}

fn to_json<T: Serialize>(v: &T) -> Result<String, CliError> {
    let mut s = serde_json::to_string_pretty(v)
        .map_err(|e| CliError::Numerical(format!("cannot serialize report: {e}")))?;
    s.push('\n');
    Ok(s)
}

fn fit_report_csv(r: &FitReport) -> String {
    let mut out = String::from("term,knot,level,weight\n");
    out.push_str(&format!("c_hat,,{},\n", r.c_hat));
    for c in &r.components {
        for ((k, l), w) in c.knots.iter().zip(&c.levels).zip(&c.block_weights) {
            out.push_str(&format!("{},{k},{l},{w}\n", c.name));
        }
    }
    out
}

/// Command output plus an optional failure to report after the output is written.
pub struct Outcome {
    pub text: String,
    pub failure: Option<CliError>,
}

impl From<String> for Outcome {
    fn from(text: String) -> Self {
        Self {
            text,
            failure: None,
        }
    }
}

/// Fits the input table. A fit that does not converge within `max_cycles`
/// or ends with a non-finite objective still writes its report but exits
/// as a numerical failure.
pub fn cmd_fit(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let input = cfg
        .input
        .as_deref()
        .ok_or_else(|| CliError::Input("fit needs --input".into()))?;
    let table = read_input_csv(input)?;
    let report = fit_table(&table, &cfg.fit)?;
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Csv => fit_report_csv(&report),
    };
    let failure = if !report.final_objective.is_finite() {
        Some(CliError::Numerical("fit objective is not finite".into()))
    } else if !report.converged {
        Some(CliError::Numerical(format!(
            "fit did not converge within {} cycles (last change {})",
            report.cycles_run, report.last_sum_change
        )))
    } else {
        None
    };
    Ok(Outcome { text, failure })
}

pub fn cmd_simulate(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sim = addiso_core::SimConfig {
        fit: cfg.fit,
        ..cfg.sim.clone()
    };
    let report = mise_experiment(&sim)?;
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut out = String::from(
                "component,mise_backfit,mise_oracle,ratio,se_backfit,se_oracle,se_ratio\n",
            );
            for c in &report.components {
                out.push_str(&format!(
                    "{},{},{},{},{},{},{}\n",
                    c.name,
                    c.mise_backfit,
                    c.mise_oracle,
                    c.ratio,
                    c.se_backfit,
                    c.se_oracle,
                    c.se_ratio
                ));
            }
            out
        }
    };
    Ok(text.into())
}

pub fn cmd_reproduce_table(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let preset = cfg
        .preset
        .ok_or_else(|| CliError::Input("reproduce-table needs `preset = table1|table2`".into()))?;
    let template = addiso_core::SimConfig {
        fit: cfg.fit,
        ..cfg.sim.clone()
    };
    let report = reproduce_table(preset, &template)?;
    let text = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => report.to_csv(),
        Format::Json => to_json(&report)?,
    };
    Ok(text.into())
}

pub fn cmd_oracle_check(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let template = addiso_core::SimConfig {
        fit: cfg.fit,
        ..cfg.sim.clone()
    };
    let report = oracle_property_experiment(&cfg.ns, &template)?;
    let text = match cfg.format.unwrap_or(Format::Json) {
        Format::Json => to_json(&report)?,
        Format::Csv => {
            let mut out = String::from("n,reps,component,median_sup,mean_sup,normalized\n");
            for row in &report.rows {
                for j in 0..row.median_sup.len() {
                    out.push_str(&format!(
                        "{},{},{},{},{},{}\n",
                        row.n,
                        row.reps,
                        j + 1,
                        row.median_sup[j],
                        row.mean_sup[j],
                        row.normalized[j]
                    ));
                }
            }
            out
        }
    };
    Ok(text.into())
}

pub fn cmd_quantile_curves(cfg: &RunConfig) -> Result<Outcome, CliError> {
    let sim = addiso_core::SimConfig {
        fit: cfg.fit,
        ..cfg.sim.clone()
    };
    let curves = quantile_curves(&sim, &cfg.quantiles)?;
    let text = match cfg.format.unwrap_or(Format::Csv) {
        Format::Csv => curves_to_csv(&curves),
        Format::Json => to_json(&curves)?,
    };
    Ok(text.into())
}
