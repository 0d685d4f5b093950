use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::layers::{GruConfig, PositionalEncoding, TcnConfig, TransformerConfig};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Direction {
    Forward,
    Backward,
}

impl std::fmt::Display for Direction {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.write_str(match self {
            Direction::Forward => "forward",
            Direction::Backward => "backward",
        })
    }
}

impl std::str::FromStr for Direction {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "forward" | "ffm" => Ok(Direction::Forward),
            "backward" | "brm" => Ok(Direction::Backward),
            other => Err(Error::config(format!("unknown direction {other:?}"))),
        }
    }
}

/// Complete architecture description. Together with a seed it determines
/// every parameter.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ModelSpec {
    pub direction: Direction,
    pub window: usize,
    pub horizon: usize,
    /// Column indices (into the `D` input features) of continuous features.
    pub continuous: Vec<usize>,
    /// Column indices of binary features, predicted as logits.
    pub discrete: Vec<usize>,
    pub tcn: TcnConfig,
    pub gru: GruConfig,
    pub transformer: TransformerConfig,
    /// Dropout rate on the pooled latent during training.
    pub dropout: f64,
    pub alpha: f64,
    pub beta: f64,
    pub huber_delta: f64,
}

impl ModelSpec {
    /// Default architecture: `C = 32`, `H_gru = 32`, two TCN layers with
    /// kernel 3, one two-head Transformer layer with `4 * H_gru` feedforward.
    pub fn new(
        direction: Direction,
        window: usize,
        horizon: usize,
        continuous: Vec<usize>,
        discrete: Vec<usize>,
    ) -> Self {
        ModelSpec::with_sizes(direction, window, horizon, continuous, discrete, 32, 2, 32)
    }

    #[allow(clippy::too_many_arguments)]
    pub fn with_sizes(
        direction: Direction,
        window: usize,
        horizon: usize,
        continuous: Vec<usize>,
        discrete: Vec<usize>,
        channels: usize,
        tcn_layers: usize,
        hidden: usize,
    ) -> Self {
        let d = continuous.len() + discrete.len();
        ModelSpec {
            direction,
            window,
            horizon,
            continuous,
            discrete,
            tcn: TcnConfig::new(d, channels, tcn_layers, 3),
            gru: GruConfig { input_size: channels, hidden_size: hidden },
            transformer: TransformerConfig {
                model_dim: hidden,
                heads: 2,
                feedforward_dim: 4 * hidden,
                layers: 1,
                positional_encoding: PositionalEncoding::Sinusoidal,
            },
            dropout: 0.1,
            alpha: 1.0,
            beta: 1.0,
            huber_delta: 1.0,
        }
    }

    /// All-continuous forward spec over `d` features.
    pub fn continuous_only(direction: Direction, window: usize, horizon: usize, d: usize) -> Self {
        ModelSpec::new(direction, window, horizon, (0..d).collect(), Vec::new())
    }

    pub fn n_features(&self) -> usize {
        self.continuous.len() + self.discrete.len()
    }

    /// Rows the model consumes.
    pub fn input_rows(&self) -> usize {
        match self.direction {
            Direction::Forward => self.window,
            Direction::Backward => self.horizon,
        }
    }

    /// Rows the model emits.
    pub fn output_rows(&self) -> usize {
        match self.direction {
            Direction::Forward => self.horizon,
            Direction::Backward => self.window,
        }
    }

    pub fn validate(&self) -> Result<()> {
        if self.window == 0 || self.horizon == 0 {
            return Err(Error::config("window and horizon must be >= 1"));
        }
        if !(self.alpha >= 0.0 && self.beta >= 0.0 && self.alpha + self.beta > 0.0) {
            return Err(Error::config(format!(
                "loss weights need alpha, beta >= 0 and alpha + beta > 0 (got {}, {})",
                self.alpha, self.beta
            )));
        }
        if !(self.huber_delta > 0.0) {
            return Err(Error::config("huber_delta must be positive"));
        }
        if !(0.0..1.0).contains(&self.dropout) {
            return Err(Error::config(format!("dropout {} not in [0, 1)", self.dropout)));
        }
        let d = self.n_features();
        if d == 0 {
            return Err(Error::config("model needs at least one feature"));
        }
        let mut seen = vec![false; d];
        for &c in self.continuous.iter().chain(&self.discrete) {
            if c >= d || seen[c] {
                return Err(Error::config(format!("continuous/discrete columns must partition 0..{d}")));
            }
            seen[c] = true;
        }
        if self.tcn.in_features != d {
            return Err(Error::config(format!("tcn in_features {} != feature count {d}", self.tcn.in_features)));
        }
        if self.gru.input_size != self.tcn.channels {
            return Err(Error::config("gru input_size must equal tcn channels"));
        }
        if self.transformer.model_dim != self.gru.hidden_size {
            return Err(Error::config("transformer model_dim must equal gru hidden_size"));
        }
        self.tcn.validate()?;
        self.gru.validate()?;
        self.transformer.validate()
    }

    /// Canonical TOML rendering, stored in checkpoints.
    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("model spec serializes")
    }

    pub fn from_toml(text: &str) -> Result<Self> {
        toml::from_str(text).map_err(|e| Error::Checkpoint(format!("bad model spec: {e}")))
    }
}
