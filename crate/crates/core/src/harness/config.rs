//! Experiment configuration (JSON, unknown keys rejected).

use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::error::{Error, Result};
use crate::lowerbound::StrategyKind;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum Experiment {
    Erm,
    Lowerbound,
    MixtureGen,
    Natarajan,
    Example1,
    ExtensionCheck,
}

impl Experiment {
    pub const ALL: [Experiment; 6] = [
        Experiment::Erm,
        Experiment::Lowerbound,
        Experiment::MixtureGen,
        Experiment::Natarajan,
        Experiment::Example1,
        Experiment::ExtensionCheck,
    ];

    pub fn name(self) -> &'static str {
        match self {
            Experiment::Erm => "erm",
            Experiment::Lowerbound => "lowerbound",
            Experiment::MixtureGen => "mixture-gen",
            Experiment::Natarajan => "natarajan",
            Experiment::Example1 => "example1",
            Experiment::ExtensionCheck => "extension-check",
        }
    }
}

impl std::str::FromStr for Experiment {
    type Err = Error;
    fn from_str(s: &str) -> Result<Self> {
        Experiment::ALL
            .into_iter()
            .find(|e| e.name() == s)
            .ok_or_else(|| {
                let names: Vec<_> = Experiment::ALL.iter().map(|e| e.name()).collect();
                Error::Config(format!("unknown experiment `{s}` (expected one of {})", names.join(", ")))
            })
    }
}

#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum MixtureMode {
    /// Train/test envy of fitted mixtures across growing sample sizes.
    #[default]
    Sweep,
    /// Uniform convergence check for an explicit finite class.
    FiniteClass,
}

/// All experiment parameters. Fields irrelevant to the chosen experiment are ignored.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    pub experiment: Experiment,
    pub seed: u64,
    /// Confidence parameter.
    pub delta: f64,
    /// Approximation parameter of the generalization experiments.
    pub gamma: f64,
    /// Envy threshold on training pairs.
    pub beta: f64,
    /// Training sample sizes (pairs), strictly increasing.
    pub sizes: Vec<usize>,
    pub out_dir: PathBuf,
    pub plots: bool,

    /// Utility and loss CSVs for `erm`.
    pub utility_path: Option<PathBuf>,
    pub loss_path: Option<PathBuf>,
    /// Also run the exhaustive deterministic solver in `erm`.
    pub deterministic: bool,

    /// Ratios of the two-individual instance in `example1`.
    pub example_gammas: Vec<f64>,

    /// Grid dimension, Lipschitz constant, seed count and extension for `lowerbound`.
    pub q: usize,
    pub lipschitz: f64,
    pub seeds: u64,
    pub strategy: StrategyKind,

    /// `mixture-gen` parameters.
    pub mode: MixtureMode,
    pub input_dim: usize,
    pub outcomes: usize,
    pub m: usize,
    pub restarts: usize,
    pub pool_size: usize,
    /// Largest weight perturbation in the generated pool.
    pub pool_noise: f64,
    /// Optional pool file; a random linear-argmax pool is drawn otherwise.
    pub pool_path: Option<PathBuf>,
    pub holdout_pairs: usize,
    pub trials: usize,
    pub class_size: usize,

    /// `natarajan` parameters: random families of at most these sizes.
    pub families: usize,
    pub max_members: usize,
    pub max_domain: usize,

    /// `extension-check` sample size.
    pub sample_size: usize,
    pub test_pairs: usize,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        Self {
            experiment: Experiment::Example1,
            seed: 0,
            delta: 0.05,
            gamma: 0.0025,
            beta: 0.05,
            sizes: vec![100, 200, 400, 800, 1600, 3200],
            out_dir: PathBuf::from("out"),
            plots: true,
            utility_path: None,
            loss_path: None,
            deterministic: false,
            example_gammas: vec![2.0, 4.0, 8.0],
            q: 5,
            lipschitz: 8.0,
            seeds: 100,
            strategy: StrategyKind::Nn,
            mode: MixtureMode::Sweep,
            input_dim: 2,
            outcomes: 3,
            m: 3,
            restarts: 8,
            pool_size: 30,
            pool_noise: 1.0,
            pool_path: None,
            holdout_pairs: 100_000,
            trials: 20,
            class_size: 20,
            families: 20,
            max_members: 64,
            max_domain: 12,
            sample_size: 400,
            test_pairs: 10_000,
        }
    }
}

impl ExperimentConfig {
    pub fn for_experiment(experiment: Experiment) -> Self {
        Self {
            experiment,
            ..Self::default()
        }
    }

    pub fn from_json(text: &str) -> Result<Self> {
        serde_json::from_str(text).map_err(|e| Error::Config(e.to_string()))
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|source| Error::Io {
            path: path.to_path_buf(),
            source,
        })?;
        Self::from_json(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }

    pub fn validate(&self) -> Result<()> {
        let in_unit = |name: &str, v: f64| {
            if v > 0.0 && v < 1.0 {
                Ok(())
            } else {
                Err(Error::Config(format!("{name} must lie in (0, 1), got {v}")))
            }
        };
        in_unit("delta", self.delta)?;
        in_unit("gamma", self.gamma)?;
        if !(self.beta >= 0.0) {
            return Err(Error::Config(format!("beta must be >= 0, got {}", self.beta)));
        }
        if self.sizes.is_empty() || self.sizes.windows(2).any(|w| w[0] >= w[1]) || self.sizes[0] == 0 {
            return Err(Error::Config("sizes must be positive and strictly increasing".into()));
        }
        if self.example_gammas.iter().any(|g| !(*g >= 1.0)) {
            return Err(Error::Config("example_gammas must be >= 1".into()));
        }
        let positive = [
            ("seeds", self.seeds as usize),
            ("input_dim", self.input_dim),
            ("m", self.m),
            ("restarts", self.restarts),
            ("pool_size", self.pool_size),
            ("holdout_pairs", self.holdout_pairs),
            ("trials", self.trials),
            ("class_size", self.class_size),
            ("families", self.families),
            ("max_members", self.max_members),
            ("max_domain", self.max_domain),
            ("sample_size", self.sample_size),
            ("test_pairs", self.test_pairs),
        ];
        if let Some((name, _)) = positive.iter().find(|(_, v)| *v == 0) {
            return Err(Error::Config(format!("{name} must be positive")));
        }
        if !(self.pool_noise >= 0.0 && self.pool_noise.is_finite()) {
            return Err(Error::Config("pool_noise must be finite and >= 0".into()));
        }
        if self.outcomes < 2 {
            return Err(Error::Config("outcomes must be at least 2".into()));
        }
        Ok(())
    }

    /// SHA-256 of the canonical (key-sorted) JSON of every field except `out_dir`.
    pub fn digest(&self) -> Result<String> {
        let mut value = serde_json::to_value(self)?;
        if let Some(map) = value.as_object_mut() {
            map.remove("out_dir");
        }
        let canonical = serde_json::to_string(&value)?;
        Ok(hex::encode(Sha256::digest(canonical.as_bytes())))
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_rejects_unknown_keys() {
        let c = ExperimentConfig::from_json(r#"{"experiment": "mixture-gen", "seed": 3}"#).unwrap();
        assert_eq!(c.experiment, Experiment::MixtureGen);
        assert_eq!(c.seed, 3);
        assert_eq!(c.m, 3);
        assert!(matches!(
            ExperimentConfig::from_json(r#"{"experiment": "erm", "colour": 1}"#),
            Err(Error::Config(_))
        ));
        assert!(ExperimentConfig::from_json(r#"{"experiment": "nope"}"#).is_err());
    }

    #[test]
    fn validation() {
        let ok = ExperimentConfig::default();
        ok.validate().unwrap();
        for bad in [
            ExperimentConfig { delta: 1.0, ..ok.clone() },
            ExperimentConfig { gamma: 0.0, ..ok.clone() },
            ExperimentConfig { sizes: vec![10, 10], ..ok.clone() },
            ExperimentConfig { sizes: vec![], ..ok.clone() },
            ExperimentConfig { m: 0, ..ok.clone() },
        ] {
            assert!(matches!(bad.validate(), Err(Error::Config(_))));
        }
    }

    #[test]
    fn digest_ignores_key_order_and_output_dir() {
        let a = ExperimentConfig::from_json(r#"{"experiment": "lowerbound", "seed": 1, "q": 2}"#).unwrap();
        let b = ExperimentConfig::from_json(r#"{"q": 2, "seed": 1, "experiment": "lowerbound", "out_dir": "elsewhere"}"#).unwrap();
        assert_eq!(a.digest().unwrap(), b.digest().unwrap());
        let c = ExperimentConfig { seed: 2, ..a.clone() };
        assert_ne!(a.digest().unwrap(), c.digest().unwrap());
        assert_eq!(a.digest().unwrap().len(), 64);
    }

    #[test]
    fn experiment_names_round_trip() {
        for e in Experiment::ALL {
            assert_eq!(e.name().parse::<Experiment>().unwrap(), e);
            let json = serde_json::to_string(&e).unwrap();
            assert_eq!(json, format!("\"{}\"", e.name()));
        }
        assert!(matches!("x".parse::<Experiment>(), Err(Error::Config(_))));
    }
}
