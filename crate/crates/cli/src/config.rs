//! Flat key-value experiment configuration with command-line overrides.
//!
//! Config files hold `key = value` lines (`#` comments). Every resolved
//! value, defaults included, is printed into the run manifest so a config
//! hash pins the whole experiment.

use std::collections::BTreeMap;
use std::fmt::Write as _;
use std::path::{Path, PathBuf};

use hopt_core::data::{self, Dataset, SyntheticSpec};
use hopt_core::rcdm::{Sampling, StepRule};

use crate::CliError;

pub const EXPERIMENTS: &[&str] =
    &["tau-profile", "primal-gd", "dual-compare", "rcdm-theorem", "glm-bias", "all-bounds"];

/// Resolved configuration: every key has a value (user-supplied or
/// default).
#[derive(Debug, Clone)]
pub struct ExperimentConfig {
    values: BTreeMap<String, String>,
}

fn defaults() -> BTreeMap<String, String> {
    let mut m = BTreeMap::new();
    for (k, v) in [
        ("experiment", "tau-profile"),
        ("dataset", ""),
        ("synthetic.n", "2000"),
        ("synthetic.d", "20"),
        ("synthetic.tau", "0.25"),
        ("synthetic.cond", "100"),
        ("synthetic.seed", "0"),
        ("mu", "1e-6"),
        ("nu_rule", "quarter-sqrt"),
        ("epochs", "100"),
        ("steps", "200"),
        ("seeds", "0"),
        ("step_rule", "diagonal"),
        ("sampling", "permutation"),
        ("train_fraction", "0.8"),
        ("split_seed", "0"),
        ("trials", "50"),
        ("rho", "auto"),
        ("zeta_grid", "auto"),
        ("zeta_points", "10"),
        ("gamma", "auto"),
        ("outputs_dir", "outputs"),
        ("glm.n", "4000"),
        ("glm.link", "squared"),
        ("glm.seed", "0"),
        ("glm.steps", "60"),
    ] {
        m.insert(k.to_string(), v.to_string());
    }
    m
}

impl ExperimentConfig {
    pub fn load(
        path: Option<&Path>,
        experiment: Option<&str>,
        overrides: &[String],
    ) -> Result<ExperimentConfig, CliError> {
        let mut values = defaults();
        if let Some(path) = path {
            let text = std::fs::read_to_string(path)
                .map_err(|e| CliError::Config(format!("cannot read {}: {e}", path.display())))?;
            for (lineno, line) in text.lines().enumerate() {
                let line = line.split('#').next().unwrap_or("").trim();
                if line.is_empty() {
                    continue;
                }
                let Some((k, v)) = line.split_once('=') else {
                    return Err(CliError::Config(format!(
                        "{}:{}: expected `key = value`",
                        path.display(),
                        lineno + 1
                    )));
                };
                let key = k.trim().to_string();
                if !values.contains_key(&key) {
                    return Err(CliError::Config(format!(
                        "{}:{}: unknown key `{key}`",
                        path.display(),
                        lineno + 1
                    )));
                }
                values.insert(key, v.trim().to_string());
            }
        }
        for item in overrides {
            let Some((k, v)) = item.split_once('=') else {
                return Err(CliError::Config(format!("--set `{item}`: expected key=value")));
            };
            let key = k.trim().to_string();
            if !values.contains_key(&key) {
                return Err(CliError::Config(format!("--set: unknown key `{key}`")));
            }
            values.insert(key, v.trim().to_string());
        }
        if let Some(exp) = experiment {
            values.insert("experiment".into(), exp.to_string());
        }
        let cfg = ExperimentConfig { values };
        cfg.validate()?;
        Ok(cfg)
    }

    fn validate(&self) -> Result<(), CliError> {
        let exp = self.str("experiment");
        if !EXPERIMENTS.contains(&exp) {
            return Err(CliError::Config(format!(
                "unknown experiment `{exp}` (expected one of {EXPERIMENTS:?})"
            )));
        }
        if self.mu()? <= 0.0 {
            return Err(CliError::Config("mu must be positive".into()));
        }
        self.seeds()?;
        self.step_rule()?;
        self.nu()?;
        Ok(())
    }

    pub fn str(&self, key: &str) -> &str {
        self.values.get(key).map(|s| s.as_str()).unwrap_or("")
    }

    pub fn f64(&self, key: &str) -> Result<f64, CliError> {
        self.str(key)
            .parse()
            .map_err(|_| CliError::Config(format!("key `{key}`: expected a number, got `{}`", self.str(key))))
    }

    pub fn usize(&self, key: &str) -> Result<usize, CliError> {
        self.str(key)
            .parse()
            .map_err(|_| CliError::Config(format!("key `{key}`: expected a count, got `{}`", self.str(key))))
    }

    pub fn experiment(&self) -> &str {
        self.str("experiment")
    }

    pub fn mu(&self) -> Result<f64, CliError> {
        self.f64("mu")
    }

    /// `nu_rule` is either `quarter-sqrt` or an explicit positive number.
    pub fn nu(&self) -> Result<f64, CliError> {
        let rule = self.str("nu_rule");
        if rule == "quarter-sqrt" {
            Ok(hopt_core::dual::quarter_sqrt_rule(self.mu()?))
        } else {
            let v: f64 = rule
                .parse()
                .map_err(|_| CliError::Config(format!("nu_rule: expected `quarter-sqrt` or a number, got `{rule}`")))?;
            if v <= 0.0 {
                return Err(CliError::Config("nu_rule: explicit nu must be positive".into()));
            }
            Ok(v)
        }
    }

    pub fn seeds(&self) -> Result<Vec<u64>, CliError> {
        self.str("seeds")
            .split(',')
            .map(|s| {
                s.trim()
                    .parse()
                    .map_err(|_| CliError::Config(format!("seeds: bad entry `{s}`")))
            })
            .collect()
    }

    pub fn step_rule(&self) -> Result<StepRule, CliError> {
        match self.str("step_rule") {
            "diagonal" => Ok(StepRule::Diagonal),
            "theoretical" => Ok(StepRule::Theoretical),
            other => Err(CliError::Config(format!("step_rule: `{other}`"))),
        }
    }

    pub fn sampling(&self) -> Result<Sampling, CliError> {
        match self.str("sampling") {
            "permutation" => Ok(Sampling::PermutationPerEpoch),
            "iid" => Ok(Sampling::IidUniform),
            other => Err(CliError::Config(format!("sampling: `{other}`"))),
        }
    }

    pub fn outputs_dir(&self) -> PathBuf {
        PathBuf::from(self.str("outputs_dir"))
    }

    pub fn synthetic_spec(&self) -> Result<SyntheticSpec, CliError> {
        Ok(SyntheticSpec::tau_regular(
            self.usize("synthetic.n")?,
            self.usize("synthetic.d")?,
            self.f64("synthetic.tau")?,
            self.f64("synthetic.cond")?,
            self.usize("synthetic.seed")? as u64,
        ))
    }

    /// The configured dataset, fully prepared: the LIBSVM path when
    /// `dataset` is set, else the synthetic preset. Returns the dataset
    /// plus the envelope floor when synthetic.
    pub fn load_dataset_all(&self) -> Result<(Dataset, Option<f64>), CliError> {
        let path = self.str("dataset");
        if path.is_empty() {
            let spec = self.synthetic_spec()?;
            let floor = spec.envelope_zeta_floor();
            let ds = data::generate_synthetic(&spec)
                .map_err(|e| CliError::Config(format!("synthetic spec: {e}")))?;
            Ok((ds, Some(floor)))
        } else {
            let raw = data::load_libsvm_path(path)
                .map_err(|e| CliError::Config(format!("dataset `{path}`: {e}")))?;
            if raw.rows.is_empty() {
                return Err(CliError::Config(format!("dataset `{path}` is empty")));
            }
            let ds = data::preprocess_all(&raw, false)
                .map_err(|e| CliError::Config(format!("dataset `{path}`: {e}")))?;
            Ok((ds, None))
        }
    }

    /// As [`Self::load_dataset_all`] but split 80/20 (or per
    /// `train_fraction`) through the standard pipeline.
    pub fn load_dataset_split(&self) -> Result<(Dataset, Dataset), CliError> {
        let path = self.str("dataset");
        let raw = if path.is_empty() {
            let ds = data::generate_synthetic(&self.synthetic_spec()?)
                .map_err(|e| CliError::Config(format!("synthetic spec: {e}")))?;
            ds.to_raw()
        } else {
            let raw = data::load_libsvm_path(path)
                .map_err(|e| CliError::Config(format!("dataset `{path}`: {e}")))?;
            if raw.rows.is_empty() {
                return Err(CliError::Config(format!("dataset `{path}` is empty")));
            }
            raw
        };
        data::preprocess(&raw, self.usize("split_seed")? as u64, self.f64("train_fraction")?)
            .map_err(|e| CliError::Config(format!("split: {e}")))
    }

    /// Threshold grid: `auto` gives `zeta_points` log-spaced values from
    /// the envelope floor (synthetic) or the median variance (real data)
    /// up to the top variance; otherwise a comma list.
    pub fn zeta_grid(&self, sigma1_sq: f64, floor: f64) -> Result<Vec<f64>, CliError> {
        let raw = self.str("zeta_grid");
        if raw == "auto" {
            let count = self.usize("zeta_points")?.max(2);
            let lo = floor.min(sigma1_sq * 0.999);
            let hi = sigma1_sq;
            Ok(hopt_core::glm::log_spaced(lo, hi, count))
        } else {
            raw.split(',')
                .map(|s| {
                    s.trim()
                        .parse()
                        .map_err(|_| CliError::Config(format!("zeta_grid: bad entry `{s}`")))
                })
                .collect()
        }
    }

    /// Canonical `key = value` listing of the full resolved config.
    pub fn canonical(&self) -> String {
        let mut out = String::new();
        for (k, v) in &self.values {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }

    /// Hex SHA-256 of the canonical listing.
    pub fn hash(&self) -> String {
        crate::manifest::sha256_hex(self.canonical().as_bytes())
    }

    /// Short directory-name form of the hash.
    pub fn short_hash(&self) -> String {
        self.hash()[..12].to_string()
    }
}
