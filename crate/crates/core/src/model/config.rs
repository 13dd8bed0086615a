use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use super::ModelError;
use crate::frontend::StatementKind;

/// Whether control and data edges share one propagation stack or get one each.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum Variant {
    /// Edge-unaware: one stack over the union of both edge classes.
    Eu,
    /// Edge-aware: separate data and control stacks, summed per node.
    Ea,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum PoolMode {
    /// Gated sum over nodes.
    Soft,
    /// Mean of the value projection.
    Gap,
}

macro_rules! text_enum {
    ($ty:ident { $($variant:ident => $text:literal),+ }) => {
        impl fmt::Display for $ty {
            fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
                f.write_str(match self { $($ty::$variant => $text),+ })
            }
        }

        impl FromStr for $ty {
            type Err = String;

            fn from_str(s: &str) -> Result<Self, String> {
                match s.to_ascii_lowercase().as_str() {
                    $($text => Ok($ty::$variant),)+
                    other => Err(format!("unknown {} '{other}'", stringify!($ty).to_lowercase())),
                }
            }
        }
    };
}

text_enum!(Variant { Eu => "eu", Ea => "ea" });
text_enum!(PoolMode { Soft => "soft", Gap => "gap" });

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct ModelConfig {
    pub d_in: usize,
    pub d_hidden: usize,
    pub heads1: usize,
    pub head_dim1: usize,
    pub heads2: usize,
    pub out_dim2: usize,
    pub lstm_hidden: usize,
    /// Propagation rounds.
    pub rounds: usize,
    pub graph_dim: usize,
    pub classifier_hidden: usize,
    pub variant: Variant,
    pub no_lstm: bool,
    pub no_jk: bool,
    pub pool: PoolMode,
    pub leaky_slope: f64,
    /// Average the score over both argument orders.
    pub symmetrize: bool,
}

impl Default for ModelConfig {
    fn default() -> Self {
        Self {
            d_in: StatementKind::COUNT,
            d_hidden: 100,
            heads1: 8,
            head_dim1: 16,
            heads2: 6,
            out_dim2: 100,
            lstm_hidden: 100,
            rounds: 4,
            graph_dim: 128,
            classifier_hidden: 64,
            variant: Variant::Ea,
            no_lstm: false,
            no_jk: false,
            pool: PoolMode::Soft,
            leaky_slope: 0.02,
            symmetrize: false,
        }
    }
}

impl ModelConfig {
    pub fn validate(&self) -> Result<(), ModelError> {
        let bad = |m: String| Err(ModelError::Config(m));
        if self.d_in != StatementKind::COUNT {
            return bad(format!("d_in must be {}, got {}", StatementKind::COUNT, self.d_in));
        }
        for (name, v) in [
            ("d_hidden", self.d_hidden),
            ("heads1", self.heads1),
            ("head_dim1", self.head_dim1),
            ("heads2", self.heads2),
            ("out_dim2", self.out_dim2),
            ("lstm_hidden", self.lstm_hidden),
            ("rounds", self.rounds),
            ("graph_dim", self.graph_dim),
            ("classifier_hidden", self.classifier_hidden),
        ] {
            if v == 0 {
                return bad(format!("{name} must be at least 1"));
            }
        }
        // LSTM output re-enters the first attention block.
        if self.lstm_hidden != self.d_hidden {
            return bad(format!(
                "lstm_hidden ({}) must equal d_hidden ({})",
                self.lstm_hidden, self.d_hidden
            ));
        }
        if !(self.leaky_slope.is_finite() && self.leaky_slope >= 0.0) {
            return bad(format!("leaky_slope must be finite and non-negative, got {}", self.leaky_slope));
        }
        Ok(())
    }

    pub fn block1_width(&self) -> usize {
        self.heads1 * self.head_dim1
    }

    /// Width of the per-node representation handed to pooling.
    pub fn node_feature_width(&self) -> usize {
        if self.no_jk {
            self.d_hidden
        } else {
            self.d_hidden * (self.rounds + 1)
        }
    }

    pub fn branches(&self) -> &'static [&'static str] {
        match self.variant {
            Variant::Eu => &["unified"],
            Variant::Ea => &["data", "control"],
        }
    }
}
