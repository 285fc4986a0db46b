use std::fmt;
use std::path::PathBuf;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Which branches of the pipeline are active.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Mode {
    /// Generative scoring over weight-free proposals.
    G,
    /// Generative scoring over external segmentor proposals.
    GS,
    /// Discriminative scoring over external segmentor proposals.
    DS,
    /// Fused generative + discriminative scoring over external proposals.
    FULL,
}

impl Mode {
    pub const ALL: [Mode; 4] = [Mode::G, Mode::GS, Mode::DS, Mode::FULL];

    pub fn needs_attention(self) -> bool {
        !matches!(self, Mode::DS)
    }

    pub fn needs_external_proposals(self) -> bool {
        !matches!(self, Mode::G)
    }

    pub fn needs_embeddings(self) -> bool {
        matches!(self, Mode::DS | Mode::FULL)
    }

    /// The fusion weight actually used: generative-only modes force 1,
    /// discriminative-only forces 0.
    pub fn effective_alpha(self, alpha: f64) -> f64 {
        match self {
            Mode::G | Mode::GS => 1.0,
            Mode::DS => 0.0,
            Mode::FULL => alpha,
        }
    }
}

impl fmt::Display for Mode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            Mode::G => "G",
            Mode::GS => "GS",
            Mode::DS => "DS",
            Mode::FULL => "FULL",
        })
    }
}

impl FromStr for Mode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "g" => Ok(Mode::G),
            "gs" => Ok(Mode::GS),
            "ds" => Ok(Mode::DS),
            "full" => Ok(Mode::FULL),
            other => Err(Error::InvalidConfig(format!("unknown mode `{other}`"))),
        }
    }
}

/// How weight-free thresholds are interpreted.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ThresholdMode {
    /// `c ≥ μ` on the normalized map.
    #[default]
    Absolute,
    /// `c ≥ q(μ)` where `q` is the μ-quantile of the map's pixel values.
    Percentile,
}

/// Shape of the 1→0 ramp used by the positional bias.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BiasProfile {
    #[default]
    Linear,
    Cosine,
}

pub const DEFAULT_ALPHA: f64 = 0.1;
pub const DEFAULT_BETA: f64 = 0.3;
pub const DEFAULT_EPSILON: f64 = 1e-8;

/// The 19 thresholds 5%, 10%, …, 95%, computed as `i / 20` so each value is
/// the correctly rounded double.
pub fn default_thresholds() -> Vec<f64> {
    (1..20).map(|i| f64::from(i) / 20.0).collect()
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct RunConfig {
    pub alpha: f64,
    pub beta: f64,
    pub epsilon: f64,
    pub threshold_set: Vec<f64>,
    pub mode: Mode,
    #[serde(default)]
    pub threshold_mode: ThresholdMode,
    /// Use the literal dot product for discriminative scores instead of
    /// cosine similarity.
    #[serde(default)]
    pub raw_dot: bool,
    #[serde(default)]
    pub bias_profile: BiasProfile,
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub direction_lexicon_path: Option<PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        RunConfig {
            alpha: DEFAULT_ALPHA,
            beta: DEFAULT_BETA,
            epsilon: DEFAULT_EPSILON,
            threshold_set: default_thresholds(),
            mode: Mode::FULL,
            threshold_mode: ThresholdMode::Absolute,
            raw_dot: false,
            bias_profile: BiasProfile::Linear,
            direction_lexicon_path: None,
        }
    }
}

impl RunConfig {
    pub fn with_mode(mode: Mode) -> Self {
        RunConfig {
            mode,
            ..RunConfig::default()
        }
    }

    pub fn validate(&self) -> Result<()> {
        let unit = |name: &str, v: f64| {
            if (0.0..=1.0).contains(&v) {
                Ok(())
            } else {
                Err(Error::InvalidConfig(format!(
                    "{name} must lie in [0,1], got {v}"
                )))
            }
        };
        unit("alpha", self.alpha)?;
        unit("beta", self.beta)?;
        if !(self.epsilon > 0.0 && self.epsilon.is_finite()) {
            return Err(Error::InvalidConfig(format!(
                "epsilon must be positive, got {}",
                self.epsilon
            )));
        }
        if self.threshold_set.is_empty() {
            return Err(Error::InvalidConfig("threshold set is empty".into()));
        }
        if self.threshold_set.iter().any(|&t| !(t > 0.0 && t < 1.0)) {
            return Err(Error::InvalidConfig(
                "thresholds must lie strictly inside (0,1)".into(),
            ));
        }
        if self.threshold_set.windows(2).any(|w| w[0] >= w[1]) {
            return Err(Error::InvalidConfig(
                "thresholds must be strictly ascending".into(),
            ));
        }
        Ok(())
    }
}
