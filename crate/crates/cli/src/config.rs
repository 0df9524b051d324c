//! Experiment configuration: a TOML file merged with command-line overrides.

use serde::{Deserialize, Serialize};
use std::path::{Path, PathBuf};

use crate::CliError;

/// Every field is optional; commands check for the ones they need.
#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ExperimentConfig {
    #[serde(skip_serializing_if = "Option::is_none")]
    pub k: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub m: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub n: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub t_max: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub q: Option<usize>,
    #[serde(default, skip_serializing_if = "Vec::is_empty", deserialize_with = "one_or_many")]
    pub snr_db: Vec<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub sigma: Option<f64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub trials: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub seed: Option<u64>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub threads: Option<usize>,
    #[serde(skip_serializing_if = "Option::is_none")]
    pub out: Option<PathBuf>,
    #[serde(default, skip_serializing_if = "std::ops::Not::not")]
    pub force_n1_equals_m: bool,
}

fn one_or_many<'de, D: serde::Deserializer<'de>>(d: D) -> Result<Vec<f64>, D::Error> {
    #[derive(Deserialize)]
    #[serde(untagged)]
    enum OneOrMany {
        One(f64),
        Many(Vec<f64>),
    }
    Ok(match OneOrMany::deserialize(d)? {
        OneOrMany::One(x) => vec![x],
        OneOrMany::Many(v) => v,
    })
}

impl ExperimentConfig {
    pub fn load(path: &Path) -> Result<Self, CliError> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| CliError::Usage(format!("cannot read {}: {e}", path.display())))?;
        toml::from_str(&text).map_err(|e| CliError::Usage(format!("bad config {}: {e}", path.display())))
    }

    /// Fields set in `over` replace those of `self`.
    pub fn overridden_by(mut self, over: ExperimentConfig) -> Self {
        macro_rules! take {
            ($($f:ident),*) => { $( if over.$f.is_some() { self.$f = over.$f; } )* };
        }
        take!(k, m, n, t_max, q, sigma, trials, seed, threads, out);
        if !over.snr_db.is_empty() {
            self.snr_db = over.snr_db;
        }
        self.force_n1_equals_m |= over.force_n1_equals_m;
        self
    }

    pub fn require<T: Copy>(&self, v: Option<T>, name: &str) -> Result<T, CliError> {
        v.ok_or_else(|| CliError::Usage(format!("missing required parameter --{}", name.replace('_', "-"))))
    }

    pub fn seed(&self) -> u64 {
        self.seed.unwrap_or(0)
    }

    pub fn out_dir(&self) -> PathBuf {
        self.out.clone().unwrap_or_else(|| PathBuf::from("."))
    }

    /// SNR grid; at least one finite point.
    pub fn snr_grid(&self) -> Result<Vec<f64>, CliError> {
        if self.snr_db.is_empty() {
            return Err(CliError::Usage("missing required parameter --snr-db".into()));
        }
        if let Some(x) = self.snr_db.iter().find(|x| !x.is_finite()) {
            return Err(CliError::Usage(format!("non-finite SNR {x}")));
        }
        Ok(self.snr_db.clone())
    }

    pub fn validate_threads(&self) -> Result<(), CliError> {
        match self.threads {
            Some(0) => Err(CliError::Usage("--threads must be at least 1".into())),
            _ => Ok(()),
        }
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toml_with_scalar_or_list_snr() {
        let a: ExperimentConfig = toml::from_str("k = 8\nsnr_db = 1.5\n").unwrap();
        assert_eq!(a.snr_db, vec![1.5]);
        let b: ExperimentConfig = toml::from_str("snr_db = [-3, 0.0, 3.0]\nforce_n1_equals_m = true").unwrap();
        assert_eq!(b.snr_db, vec![-3.0, 0.0, 3.0]);
        assert!(b.force_n1_equals_m);
        assert!(toml::from_str::<ExperimentConfig>("bogus = 1").is_err());
    }

    #[test]
    fn overrides_win() {
        let file = ExperimentConfig { k: Some(8), q: Some(16), snr_db: vec![1.0], seed: Some(3), ..Default::default() };
        let flags = ExperimentConfig { q: Some(20), snr_db: vec![2.0, 3.0], ..Default::default() };
        let c = file.overridden_by(flags);
        assert_eq!((c.k, c.q, c.seed), (Some(8), Some(20), Some(3)));
        assert_eq!(c.snr_db, vec![2.0, 3.0]);
    }

    #[test]
    fn missing_values_are_usage_errors() {
        let c = ExperimentConfig::default();
        assert!(matches!(c.require(c.k, "k"), Err(CliError::Usage(_))));
        assert!(matches!(c.snr_grid(), Err(CliError::Usage(_))));
        let bad = ExperimentConfig { snr_db: vec![f64::NAN], threads: Some(0), ..Default::default() };
        assert!(bad.snr_grid().is_err());
        assert!(bad.validate_threads().is_err());
    }
}
