//! Declarative experiment configuration.
//!
//! One JSON document drives every subcommand. Field names map one-to-one to
//! the quantities of the synthetic experiment: `n`/`m` are the observed and
//! synthetic-negative training sizes, `alpha`/`beta` the radial-law shape of
//! the training negatives, `n_t`/`m_t`/`alpha_t`/`beta_t` the test-side
//! counterparts, `epsilon` the dilation margin. Omitted fields take the
//! experiment defaults below; unknown fields are rejected loudly.

use crate::error::{Error, Result};
use crate::scoregen::ScoreGen;

/// Full description of one experiment.
#[derive(Debug, Clone, PartialEq, serde::Serialize, serde::Deserialize)]
#[serde(deny_unknown_fields, default)]
pub struct ExperimentConfig {
    /// Observed ("normal") training sample size.
    pub n: usize,
    /// Synthetic negative training sample size.
    pub m: usize,
    /// Data dimension.
    pub d: usize,
    /// Variance of the isotropic Gaussian normal class.
    pub variance_scale: f64,
    /// Radial-law shape of the training negatives.
    pub alpha: f64,
    pub beta: f64,
    /// Dilation margin past the largest observed norm.
    pub epsilon: f64,
    /// Test sample sizes: normals and true outliers.
    pub n_t: usize,
    pub m_t: usize,
    /// Radial-law shape of the test outliers.
    pub alpha_t: f64,
    pub beta_t: f64,
    /// Penalty weights to train over; the highest rank statistic wins.
    pub lambda_grid: Vec<f64>,
    /// Score-generating function.
    pub phi: ScoreGen,
    /// Training epochs per run.
    pub epochs: usize,
    /// Flagging budgets reported by the accuracy table.
    pub n_lowest_grid: Vec<usize>,
    /// Number of repetitions of the full pipeline.
    pub repetitions: usize,
    /// Master seed; per-repetition seeds are split from it.
    pub seed: u64,
    /// SGD learning rate (per-sample and batch steps).
    pub learning_rate: f64,
}

impl Default for ExperimentConfig {
    fn default() -> Self {
        ExperimentConfig {
            n: 1000,
            m: 500,
            d: 2,
            variance_scale: 0.1,
            alpha: 3.0,
            beta: 1.0,
            epsilon: 0.01,
            n_t: 400,
            m_t: 100,
            alpha_t: 2.0,
            beta_t: 1.0,
            lambda_grid: vec![0.0, 0.01, 0.1, 1.0, 10.0],
            phi: ScoreGen::mww(),
            epochs: 30,
            n_lowest_grid: vec![25, 50, 75, 100],
            repetitions: 50,
            seed: 1,
            learning_rate: 0.0025,
        }
    }
}

impl ExperimentConfig {
    /// Check every invariant the pipeline relies on.
    pub fn validate(&self) -> Result<()> {
        fn positive_count(name: &str, v: usize) -> Result<()> {
            if v == 0 {
                return Err(Error::Config(format!("{name} must be at least 1")));
            }
            Ok(())
        }
        fn positive_real(name: &str, v: f64) -> Result<()> {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Config(format!("{name} must be positive, got {v}")));
            }
            Ok(())
        }
        positive_count("n", self.n)?;
        positive_count("m", self.m)?;
        positive_count("d", self.d)?;
        positive_count("n_t", self.n_t)?;
        positive_count("m_t", self.m_t)?;
        positive_count("epochs", self.epochs)?;
        positive_count("repetitions", self.repetitions)?;
        positive_real("variance_scale", self.variance_scale)?;
        positive_real("alpha", self.alpha)?;
        positive_real("beta", self.beta)?;
        positive_real("alpha_t", self.alpha_t)?;
        positive_real("beta_t", self.beta_t)?;
        positive_real("learning_rate", self.learning_rate)?;
        if !(self.epsilon >= 0.0 && self.epsilon.is_finite()) {
            return Err(Error::Config(format!(
                "epsilon must be nonnegative, got {}",
                self.epsilon
            )));
        }
        if self.lambda_grid.is_empty() {
            return Err(Error::Config("lambda_grid must be nonempty".into()));
        }
        for &l in &self.lambda_grid {
            if !(l >= 0.0 && l.is_finite()) {
                return Err(Error::Config(format!(
                    "lambda_grid entries must be nonnegative, got {l}"
                )));
            }
        }
        if self.n_lowest_grid.is_empty() {
            return Err(Error::Config("n_lowest_grid must be nonempty".into()));
        }
        let test_size = self.n_t + self.m_t;
        for &k in &self.n_lowest_grid {
            if k == 0 || k > test_size {
                return Err(Error::Config(format!(
                    "n_lowest_grid entries must lie in [1, {test_size}], got {k}"
                )));
            }
        }
        Ok(())
    }

    /// Parse from a JSON string.
    pub fn from_json(json: &str) -> Result<Self> {
        let cfg: ExperimentConfig = serde_json::from_str(json)
            .map_err(|e| Error::Config(format!("invalid experiment config: {e}")))?;
        cfg.validate()?;
        Ok(cfg)
    }

    /// Serialize to pretty JSON (newline-terminated).
    pub fn to_json(&self) -> String {
        let mut s = serde_json::to_string_pretty(self).expect("config serializes");
        s.push('\n');
        s
    }
}
