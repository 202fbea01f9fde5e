//! Flat key=value configuration files.
//!
//! Format: one `key = value` pair per line; blank lines and lines starting
//! with `#` are ignored; later occurrences of a key override earlier ones.
//! Every key is also exposed as a command-line flag, and flags override the
//! file. Keys that no consumer understands are rejected so typos fail loudly.

use crate::error::{Error, Result};
use crate::metrics::NetBenefitWeight;
use std::path::{Path, PathBuf};

/// Parse a config file into ordered (key, value) pairs.
pub fn parse_kv_file(path: &Path) -> Result<Vec<(String, String)>> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| Error::Config(format!("{}: {e}", path.display())))?;
    let mut out = Vec::new();
    for (i, raw) in text.lines().enumerate() {
        let line = raw.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (key, value) = line.split_once('=').ok_or_else(|| {
            Error::Config(format!(
                "{}: line {}: expected `key = value`, found `{line}`",
                path.display(),
                i + 1
            ))
        })?;
        out.push((key.trim().to_string(), value.trim().to_string()));
    }
    Ok(out)
}

fn parse_as<T: std::str::FromStr>(key: &str, value: &str) -> Result<T> {
    value.parse::<T>().map_err(|_| Error::Config(format!("key `{key}`: cannot parse `{value}`")))
}

pub fn parse_nb_weight(key: &str, value: &str) -> Result<NetBenefitWeight> {
    match value {
        "threshold_odds" => Ok(NetBenefitWeight::ThresholdOdds),
        "inverse_complement" => Ok(NetBenefitWeight::InverseComplement),
        other => Err(Error::Config(format!(
            "key `{key}`: expected threshold_odds or inverse_complement, found `{other}`"
        ))),
    }
}

pub fn parse_bool(key: &str, value: &str) -> Result<bool> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        other => Err(Error::Config(format!("key `{key}`: expected a boolean, found `{other}`"))),
    }
}

/// Scenario filter: `all` or a comma-separated list of grid ids.
pub fn parse_scenarios(value: &str) -> Result<Vec<u32>> {
    if value == "all" {
        return Ok(crate::sim::Scenario::grid().iter().map(|s| s.id).collect());
    }
    let mut out = Vec::new();
    for part in value.split(',') {
        let part = part.trim();
        let id: u32 = part
            .parse()
            .map_err(|_| Error::Config(format!("scenario id `{part}` is not an integer")))?;
        if crate::sim::Scenario::by_id(id).is_none() {
            return Err(Error::Config(format!("scenario id {id} is outside the grid")));
        }
        if !out.contains(&id) {
            out.push(id);
        }
    }
    if out.is_empty() {
        return Err(Error::Config("empty scenario filter".into()));
    }
    Ok(out)
}

/// Settings for the simulation and figure commands. Defaults are the
/// desk-scale settings; the original study design corresponds to
/// `runs = 2000`, `test_n = 100000`.
#[derive(Clone, Debug)]
pub struct SimOptions {
    pub seed: u64,
    pub runs: u32,
    pub test_n: usize,
    pub scenarios: Vec<u32>,
    pub workers: usize,
    pub out_dir: PathBuf,
    /// Coefficient cache produced by the solve command; resolved relative to
    /// `out_dir` when not set explicitly.
    pub coefficients: Option<PathBuf>,
    pub smote_k: usize,
    pub loess_span: f64,
    pub nb_weight: NetBenefitWeight,
    pub bootstrap: usize,
    pub target_auroc: f64,
}

impl Default for SimOptions {
    fn default() -> Self {
        SimOptions {
            seed: 1,
            runs: 200,
            test_n: 20_000,
            scenarios: crate::sim::Scenario::grid().iter().map(|s| s.id).collect(),
            workers: 0,
            out_dir: PathBuf::from("out"),
            coefficients: None,
            smote_k: 5,
            loess_span: 0.75,
            nb_weight: NetBenefitWeight::ThresholdOdds,
            bootstrap: 1000,
            target_auroc: crate::sim::TARGET_AUROC,
        }
    }
}

impl SimOptions {
    /// Apply one configuration key. Unknown keys are an error.
    pub fn apply_kv(&mut self, key: &str, value: &str) -> Result<()> {
        match key {
            "seed" => self.seed = parse_as(key, value)?,
            "runs" => self.runs = parse_as(key, value)?,
            "test_n" => self.test_n = parse_as(key, value)?,
            "scenarios" => self.scenarios = parse_scenarios(value)?,
            "workers" => self.workers = parse_as(key, value)?,
            "out" => self.out_dir = PathBuf::from(value),
            "coefficients" => self.coefficients = Some(PathBuf::from(value)),
            "smote_k" => self.smote_k = parse_as(key, value)?,
            "loess_span" => self.loess_span = parse_as(key, value)?,
            "nb_weight" => self.nb_weight = parse_nb_weight(key, value)?,
            "bootstrap" => self.bootstrap = parse_as(key, value)?,
            "target_auroc" => self.target_auroc = parse_as(key, value)?,
            other => return Err(Error::Config(format!("unknown configuration key `{other}`"))),
        }
        Ok(())
    }

    pub fn apply_file(&mut self, path: &Path) -> Result<()> {
        for (k, v) in parse_kv_file(path)? {
            self.apply_kv(&k, &v)?;
        }
        Ok(())
    }

    pub fn coefficients_path(&self) -> PathBuf {
        self.coefficients.clone().unwrap_or_else(|| self.out_dir.join("coefficients.csv"))
    }

    pub fn run_config(&self) -> crate::sim::RunConfig {
        crate::sim::RunConfig {
            master_seed: self.seed,
            n_runs: self.runs,
            n_test: self.test_n,
            smote_k: self.smote_k,
            workers: self.workers,
            ..crate::sim::RunConfig::default()
        }
    }
}
