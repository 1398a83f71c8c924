//! Flat `key = value` run configuration files.
//!
//! Blank lines and lines starting with `#` are ignored. Keys are the
//! [`RunConfig`] field names; unknown keys are rejected.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use addiso_core::simulation::{ComponentFn, Grid, IseMeasure, SimConfig, TablePreset};
use addiso_core::FitConfig;

use crate::error::CliError;

#[derive(Debug, Clone, Copy, PartialEq, Eq, clap::ValueEnum)]
pub enum Format {
    Json,
    Csv,
}

#[derive(Debug, Clone)]
pub struct RunConfig {
    pub input: Option<PathBuf>,
    pub output: Option<PathBuf>,
    pub format: Option<Format>,
    pub fit: FitConfig,
    pub sim: SimConfig,
    pub preset: Option<TablePreset>,
    pub ns: Vec<usize>,
    pub quantiles: Vec<f64>,
}

impl Default for RunConfig {
    fn default() -> Self {
        Self {
            input: None,
            output: None,
            format: None,
            fit: FitConfig::default(),
            sim: SimConfig::default(),
            preset: None,
            ns: vec![200, 800, 3200],
            quantiles: vec![0.25, 0.5, 0.75],
        }
    }
}

pub fn parse_pairs(text: &str) -> Result<BTreeMap<String, (usize, String)>, CliError> {
    let mut map = BTreeMap::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line.split_once('=').ok_or_else(|| {
            CliError::Input(format!("config line {}: expected `key = value`", idx + 1))
        })?;
        let key = k.trim().to_string();
        if map
            .insert(key.clone(), (idx + 1, v.trim().to_string()))
            .is_some()
        {
            return Err(CliError::Input(format!(
                "config line {}: duplicate key {key}",
                idx + 1
            )));
        }
    }
    Ok(map)
}

fn parse_num<T: std::str::FromStr>(key: &str, line: usize, v: &str) -> Result<T, CliError> {
    v.parse()
        .map_err(|_| CliError::Input(format!("config line {line}: bad value {v:?} for {key}")))
}

fn parse_list<T: std::str::FromStr>(key: &str, line: usize, v: &str) -> Result<Vec<T>, CliError> {
    v.split(',')
        .map(|s| parse_num(key, line, s.trim()))
        .collect()
}

impl RunConfig {
    pub fn from_file(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Input(format!("cannot read {}: {e}", path.display())))?;
        Self::from_text(&text)
    }

    pub fn from_text(text: &str) -> Result<Self, CliError> {
        let mut cfg = RunConfig::default();
        let pairs = parse_pairs(text)?;
        // the preset fixes the component functions, so apply it first
        if let Some((line, v)) = pairs.get("preset") {
            let preset = TablePreset::from_name(v)
                .map_err(|e| CliError::Input(format!("config line {line}: {e}")))?;
            cfg.preset = Some(preset);
            cfg.sim.m1 = preset.m1();
        }
        for (key, (line, v)) in &pairs {
            let line = *line;
            let k = key.as_str();
            match k {
                "preset" | "command" => {}
                "input" => cfg.input = Some(PathBuf::from(v)),
                "output" => cfg.output = Some(PathBuf::from(v)),
                "format" => {
                    cfg.format = Some(match v.as_str() {
                        "json" => Format::Json,
                        "csv" => Format::Csv,
                        _ => {
                            return Err(CliError::Input(format!(
                                "config line {line}: format must be json or csv"
                            )))
                        }
                    })
                }
                "tol" => cfg.fit.tol = Some(parse_num(k, line, v)?),
                "max_cycles" => cfg.fit.max_cycles = parse_num(k, line, v)?,
                "n" => cfg.sim.n = parse_num(k, line, v)?,
                "rho" => cfg.sim.rho = parse_num(k, line, v)?,
                "noise_sd" => cfg.sim.noise_sd = parse_num(k, line, v)?,
                "reps" => cfg.sim.reps = parse_num(k, line, v)?,
                "master_seed" | "seed" => cfg.sim.master_seed = parse_num(k, line, v)?,
                "m1" => {
                    cfg.sim.m1 = ComponentFn::from_name(v).ok_or_else(|| {
                        CliError::Input(format!("config line {line}: unknown component {v:?}"))
                    })?
                }
                "m2" => {
                    cfg.sim.m2 = if v == "none" {
                        None
                    } else {
                        Some(ComponentFn::from_name(v).ok_or_else(|| {
                            CliError::Input(format!("config line {line}: unknown component {v:?}"))
                        })?)
                    }
                }
                "interval" => {
                    let b: Vec<f64> = parse_list(k, line, v)?;
                    if b.len() != 2 {
                        return Err(CliError::Input(format!(
                            "config line {line}: interval needs two values"
                        )));
                    }
                    cfg.sim.interval = (b[0], b[1]);
                }
                "ise_grid" => {
                    let b: Vec<f64> = parse_list(k, line, v)?;
                    if b.len() != 3 || b[2].fract() != 0.0 || b[2] < 1.0 {
                        return Err(CliError::Input(format!(
                            "config line {line}: ise_grid is `lo, hi, points`"
                        )));
                    }
                    cfg.sim.ise_grid = Grid::new(b[0], b[1], b[2] as usize);
                }
                "ise_measure" => {
                    cfg.sim.ise_measure = IseMeasure::from_name(v).ok_or_else(|| {
                        CliError::Input(format!(
                            "config line {line}: ise_measure must be lebesgue or grid_average"
                        ))
                    })?
                }
                "ns" => cfg.ns = parse_list(k, line, v)?,
                "quantiles" => cfg.quantiles = parse_list(k, line, v)?,
                _ => {
                    return Err(CliError::Input(format!(
                        "config line {line}: unknown key {key:?}"
                    )))
                }
            }
        }
        Ok(cfg)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_flat_file() {
        let cfg = RunConfig::from_text(
            "# comment\npreset = table2\nreps = 12\nseed = 7\nns = 100, 200\ninterval = -2, 2\nm2 = none\n",
        )
        .unwrap();
        assert_eq!(cfg.preset, Some(TablePreset::Table2));
        assert_eq!(cfg.sim.m1.name(), "step_plateau");
        assert_eq!(cfg.sim.reps, 12);
        assert_eq!(cfg.sim.master_seed, 7);
        assert_eq!(cfg.ns, vec![100, 200]);
        assert_eq!(cfg.sim.interval, (-2.0, 2.0));
        assert!(cfg.sim.m2.is_none());
    }

    #[test]
    fn rejects_garbage() {
        assert!(RunConfig::from_text("reps 12").is_err());
        assert!(RunConfig::from_text("reps = twelve").is_err());
        assert!(RunConfig::from_text("colour = red").is_err());
        assert!(RunConfig::from_text("preset = table9").is_err());
        assert!(RunConfig::from_text("reps = 1\nreps = 2").is_err());
    }
}
