//! Experiment configuration: workload defaults, a flat `key = value` file
//! format and per-key overrides.

use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::digits::PIXELS;
use crate::error::{QaeError, Result};
use crate::ising::{Boundary, MAX_DENSE_SITES};
use crate::optimize::OptimizerConfig;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Workload {
    Ising,
    Digits,
}

impl FromStr for Workload {
    type Err = QaeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "ising" => Ok(Workload::Ising),
            "digits" => Ok(Workload::Digits),
            other => Err(QaeError::Config(format!("unknown workload `{other}`"))),
        }
    }
}

impl fmt::Display for Workload {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Workload::Ising => "ising",
            Workload::Digits => "digits",
        })
    }
}

/// Which autoencoder a run trains. `EfQaeStar` is the EF-QAE started from
/// a finished QAE run.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RunMode {
    Qae,
    EfQae,
    EfQaeStar,
}

impl FromStr for RunMode {
    type Err = QaeError;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "qae" => Ok(RunMode::Qae),
            "ef_qae" | "ef-qae" => Ok(RunMode::EfQae),
            "ef_qae_star" | "ef-qae-star" => Ok(RunMode::EfQaeStar),
            other => Err(QaeError::Config(format!("unknown mode `{other}`"))),
        }
    }
}

impl fmt::Display for RunMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            RunMode::Qae => "qae",
            RunMode::EfQae => "ef_qae",
            RunMode::EfQaeStar => "ef_qae_star",
        })
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "snake_case")]
pub enum DatasetConfig {
    /// Ground states on an inclusive training grid of λ and a test grid at
    /// the cell midpoints.
    Ising {
        lambda_min: f64,
        lambda_max: f64,
        n_train: usize,
        n_test: usize,
        boundary: Boundary,
    },
    /// Digit CSV files; `None` selects the bundled fixture.
    Digits {
        train: Option<PathBuf>,
        test: Option<PathBuf>,
    },
}

#[derive(Clone, Debug, PartialEq)]
pub struct ExperimentConfig {
    pub workload: Workload,
    pub n_qubits: usize,
    pub n_trash: usize,
    pub n_layers: usize,
    pub mode: RunMode,
    pub optimizer: OptimizerConfig,
    pub dataset: DatasetConfig,
    pub output_dir: PathBuf,
    /// Seed of the first random start; restart `k` uses `seed + k`.
    pub seed: u64,
    /// Independent random starts; the lowest final cost is kept. Ignored
    /// for `ef_qae_star`, which has a single deterministic start.
    pub restarts: usize,
    /// `theta_opt.json` of a QAE run, or the bundle directory holding it.
    pub warm_start: Option<PathBuf>,
}

/// Random starts per run unless overridden.
pub const DEFAULT_RESTARTS: usize = 8;

impl ExperimentConfig {
    /// Six qubits with two trash qubits; three layers for the Ising chain,
    /// four for digits.
    pub fn defaults(workload: Workload) -> Self {
        let (n_layers, dataset) = match workload {
            Workload::Ising => (
                3,
                DatasetConfig::Ising {
                    lambda_min: 0.5,
                    lambda_max: 1.0,
                    n_train: 20,
                    n_test: 60,
                    boundary: Boundary::Open,
                },
            ),
            Workload::Digits => (
                4,
                DatasetConfig::Digits {
                    train: None,
                    test: None,
                },
            ),
        };
        Self {
            workload,
            n_qubits: 6,
            n_trash: 2,
            n_layers,
            mode: RunMode::EfQae,
            optimizer: OptimizerConfig::default(),
            dataset,
            output_dir: PathBuf::from(format!("runs/{workload}")),
            seed: 0,
            restarts: DEFAULT_RESTARTS,
            warm_start: None,
        }
    }

    /// Defaults for the workload named in `pairs` (Ising if absent), then
    /// every other pair applied in order. Without an `out` key the bundle
    /// goes to `runs/<workload>_<mode>`.
    pub fn from_pairs<K: AsRef<str>, V: AsRef<str>>(pairs: &[(K, V)]) -> Result<Self> {
        let workload = pairs
            .iter()
            .filter(|(k, _)| normalize(k.as_ref()) == "workload")
            .last()
            .map(|(_, v)| v.as_ref().trim().parse())
            .transpose()?
            .unwrap_or(Workload::Ising);
        let mut config = Self::defaults(workload);
        for (k, v) in pairs {
            config.set(k.as_ref(), v.as_ref())?;
        }
        if !pairs
            .iter()
            .any(|(k, _)| matches!(normalize(k.as_ref()).as_str(), "out" | "output_dir"))
        {
            config.output_dir = PathBuf::from(format!("runs/{}_{}", config.workload, config.mode));
        }
        config.validate()?;
        Ok(config)
    }

    /// Applies one setting. Keys accept `-` or `_` as separator.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let key = normalize(key);
        let value = value.trim();
        match key.as_str() {
            "workload" => {
                let w: Workload = value.parse()?;
                if w != self.workload {
                    return Err(QaeError::Config(format!(
                        "workload is `{}`; build a new config to switch to `{w}`",
                        self.workload
                    )));
                }
            }
            "mode" => self.mode = value.parse()?,
            "qubits" | "n_qubits" => self.n_qubits = parse_value(&key, value)?,
            "trash" | "n_trash" => self.n_trash = parse_value(&key, value)?,
            "layers" | "n_layers" => self.n_layers = parse_value(&key, value)?,
            "seed" => self.seed = parse_value(&key, value)?,
            "restarts" => self.restarts = parse_value(&key, value)?,
            "out" | "output_dir" => self.output_dir = PathBuf::from(value),
            "warm_start" => self.warm_start = Some(PathBuf::from(value)),
            "max_evals" | "max_evaluations" => self.optimizer.max_evaluations = parse_value(&key, value)?,
            "gradient_tolerance" => self.optimizer.gradient_tolerance = parse_value(&key, value)?,
            "wolfe_c1" => self.optimizer.wolfe_c1 = parse_value(&key, value)?,
            "wolfe_c2" => self.optimizer.wolfe_c2 = parse_value(&key, value)?,
            "initial_hessian_scale" => self.optimizer.initial_hessian_scale = parse_value(&key, value)?,
            "lambda_min" | "lambda_max" | "n_train" | "n_test" | "boundary" => {
                let DatasetConfig::Ising {
                    lambda_min,
                    lambda_max,
                    n_train,
                    n_test,
                    boundary,
                } = &mut self.dataset
                else {
                    return Err(QaeError::Config(format!("`{key}` only applies to the ising workload")));
                };
                match key.as_str() {
                    "lambda_min" => *lambda_min = parse_value(&key, value)?,
                    "lambda_max" => *lambda_max = parse_value(&key, value)?,
                    "n_train" => *n_train = parse_value(&key, value)?,
                    "n_test" => *n_test = parse_value(&key, value)?,
                    _ => *boundary = value.parse().map_err(|e: QaeError| QaeError::Config(e.to_string()))?,
                }
            }
            "digits_train" | "digits_test" => {
                let DatasetConfig::Digits { train, test } = &mut self.dataset else {
                    return Err(QaeError::Config(format!("`{key}` only applies to the digits workload")));
                };
                let slot = if key == "digits_train" { train } else { test };
                *slot = Some(PathBuf::from(value));
            }
            other => return Err(QaeError::Config(format!("unknown key `{other}`"))),
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(QaeError::Config(msg));
        if self.n_trash == 0 || self.n_trash >= self.n_qubits {
            return bad(format!(
                "need 0 < trash < qubits, got trash={} qubits={}",
                self.n_trash, self.n_qubits
            ));
        }
        if self.n_layers == 0 {
            return bad("layers must be positive".into());
        }
        if self.restarts == 0 {
            return bad("restarts must be positive".into());
        }
        self.optimizer.validate().map_err(|e| QaeError::Config(e.to_string()))?;
        match &self.dataset {
            DatasetConfig::Ising {
                lambda_min,
                lambda_max,
                n_train,
                n_test,
                ..
            } => {
                if self.n_qubits > MAX_DENSE_SITES {
                    return bad(format!("ising chains are limited to {MAX_DENSE_SITES} sites"));
                }
                if !(lambda_min.is_finite() && lambda_max.is_finite() && lambda_min < lambda_max) {
                    return bad(format!(
                        "need lambda_min < lambda_max, got [{lambda_min}, {lambda_max}]"
                    ));
                }
                if *n_train < 2 || *n_test < 1 {
                    return bad(format!("need n_train >= 2 and n_test >= 1, got {n_train} and {n_test}"));
                }
            }
            DatasetConfig::Digits { .. } => {
                if 1usize << self.n_qubits != PIXELS {
                    return bad(format!("digit images need 6 qubits, got {}", self.n_qubits));
                }
            }
        }
        if self.mode == RunMode::EfQaeStar && self.warm_start.is_none() {
            return bad("mode ef_qae_star needs warm_start".into());
        }
        Ok(())
    }
}

fn normalize(key: &str) -> String {
    key.trim().trim_start_matches("--").replace('-', "_")
}

fn parse_value<T: FromStr>(key: &str, value: &str) -> Result<T> {
    value
        .parse()
        .map_err(|_| QaeError::Config(format!("cannot parse `{value}` for `{key}`")))
}

/// Parses `key = value` lines. Blank lines and `#` comments are skipped.
pub fn parse_config_text(text: &str) -> Result<Vec<(String, String)>> {
    let mut pairs = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = raw.split('#').next().unwrap_or("").trim();
        if line.is_empty() {
            continue;
        }
        let Some((key, value)) = line.split_once('=') else {
            return Err(QaeError::Config(format!("line {}: expected `key = value`", idx + 1)));
        };
        let (key, value) = (key.trim(), value.trim());
        if key.is_empty() {
            return Err(QaeError::Config(format!("line {}: empty key", idx + 1)));
        }
        pairs.push((key.to_string(), value.to_string()));
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn workload_defaults() {
        let ising = ExperimentConfig::defaults(Workload::Ising);
        assert_eq!((ising.n_qubits, ising.n_trash, ising.n_layers), (6, 2, 3));
        let digits = ExperimentConfig::defaults(Workload::Digits);
        assert_eq!(digits.n_layers, 4);
        assert!(ising.validate().is_ok() && digits.validate().is_ok());
    }

    #[test]
    fn file_then_overrides() {
        let mut pairs = parse_config_text("# run\nworkload = digits\nlayers=2\n\nseed = 4 # trailing\n").unwrap();
        pairs.push(("--max-evals".into(), "300".into()));
        pairs.push(("layers".into(), "5".into()));
        let c = ExperimentConfig::from_pairs(&pairs).unwrap();
        assert_eq!(c.workload, Workload::Digits);
        assert_eq!((c.n_layers, c.seed, c.optimizer.max_evaluations), (5, 4, 300));
    }

    #[test]
    fn config_errors() {
        assert!(parse_config_text("layers 3").is_err());
        assert!(ExperimentConfig::from_pairs(&[("layers", "x")]).is_err());
        assert!(ExperimentConfig::from_pairs(&[("colour", "red")]).is_err());
        assert!(ExperimentConfig::from_pairs(&[("workload", "digits"), ("lambda_min", "0.1")]).is_err());
        assert!(ExperimentConfig::from_pairs(&[("mode", "ef_qae_star")]).is_err());
        assert!(ExperimentConfig::from_pairs(&[("trash", "6")]).is_err());
        assert!(ExperimentConfig::from_pairs(&[("workload", "digits"), ("qubits", "5")]).is_err());
        let err = ExperimentConfig::from_pairs(&[("lambda_min", "2.0")]).unwrap_err();
        assert_eq!(err.exit_code(), 1);
    }
}
