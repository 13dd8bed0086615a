//! `key = value` run configuration: training and model settings in one file.

use std::fmt::Write as _;
use std::str::FromStr;

use pdgsim::model::ModelConfig;
use pdgsim::training::TrainConfig;

use crate::CliError;

#[derive(Debug, Clone, PartialEq, Default)]
pub struct CliConfig {
    pub train: TrainConfig,
    pub model: ModelConfig,
}

fn parse<T: FromStr>(key: &str, value: &str) -> Result<T, CliError> {
    value
        .parse()
        .map_err(|_| CliError::Usage(format!("bad value '{value}' for {key}")))
}

fn parse_bool(key: &str, value: &str) -> Result<bool, CliError> {
    match value {
        "true" | "1" | "yes" => Ok(true),
        "false" | "0" | "no" => Ok(false),
        _ => Err(CliError::Usage(format!("bad value '{value}' for {key}"))),
    }
}

impl CliConfig {
    pub const KEYS: [&'static str; 24] = [
        "learning_rate",
        "batch_size",
        "epochs",
        "seed",
        "beta1",
        "beta2",
        "eps",
        "threshold_grid",
        "patience",
        "d_hidden",
        "heads1",
        "head_dim1",
        "heads2",
        "out_dim2",
        "lstm_hidden",
        "rounds",
        "graph_dim",
        "classifier_hidden",
        "variant",
        "no_lstm",
        "no_jk",
        "pool",
        "leaky_slope",
        "symmetrize",
    ];

    pub fn set(&mut self, key: &str, value: &str) -> Result<(), CliError> {
        let (t, m) = (&mut self.train, &mut self.model);
        match key {
            "learning_rate" => t.learning_rate = parse(key, value)?,
            "batch_size" => t.batch_size = parse(key, value)?,
            "epochs" => t.epochs = parse(key, value)?,
            "seed" => t.seed = parse(key, value)?,
            "beta1" => t.beta1 = parse(key, value)?,
            "beta2" => t.beta2 = parse(key, value)?,
            "eps" => t.eps = parse(key, value)?,
            "threshold_grid" => {
                t.threshold_grid = value
                    .split(',')
                    .map(|v| parse(key, v.trim()))
                    .collect::<Result<_, _>>()?
            }
            "patience" => t.patience = parse(key, value)?,
            "d_hidden" => m.d_hidden = parse(key, value)?,
            "heads1" => m.heads1 = parse(key, value)?,
            "head_dim1" => m.head_dim1 = parse(key, value)?,
            "heads2" => m.heads2 = parse(key, value)?,
            "out_dim2" => m.out_dim2 = parse(key, value)?,
            "lstm_hidden" => m.lstm_hidden = parse(key, value)?,
            "rounds" => m.rounds = parse(key, value)?,
            "graph_dim" => m.graph_dim = parse(key, value)?,
            "classifier_hidden" => m.classifier_hidden = parse(key, value)?,
            "variant" => m.variant = parse(key, value)?,
            "no_lstm" => m.no_lstm = parse_bool(key, value)?,
            "no_jk" => m.no_jk = parse_bool(key, value)?,
            "pool" => m.pool = parse(key, value)?,
            "leaky_slope" => m.leaky_slope = parse(key, value)?,
            "symmetrize" => m.symmetrize = parse_bool(key, value)?,
            _ => return Err(CliError::Usage(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a config file on top of the current values. One `key = value` per
    /// line; `#` starts a comment.
    pub fn apply_file(&mut self, text: &str) -> Result<(), CliError> {
        for (n, raw) in text.lines().enumerate() {
            let line = raw.split('#').next().unwrap_or("").trim();
            if line.is_empty() {
                continue;
            }
            let (key, value) = line
                .split_once('=')
                .ok_or_else(|| CliError::Usage(format!("config line {}: expected key = value", n + 1)))?;
            self.set(key.trim(), value.trim())
                .map_err(|e| CliError::Usage(format!("config line {}: {e}", n + 1)))?;
        }
        Ok(())
    }

    pub fn validate(&self) -> Result<(), CliError> {
        self.train.validate().map_err(|e| CliError::Usage(e.to_string()))?;
        self.model.validate().map_err(|e| CliError::Usage(e.to_string()))
    }

    /// Every setting in file syntax, in key order.
    pub fn render(&self) -> String {
        let (t, m) = (&self.train, &self.model);
        let grid: Vec<String> = t.threshold_grid.iter().map(f64::to_string).collect();
        let values = [
            t.learning_rate.to_string(),
            t.batch_size.to_string(),
            t.epochs.to_string(),
            t.seed.to_string(),
            t.beta1.to_string(),
            t.beta2.to_string(),
            t.eps.to_string(),
            grid.join(","),
            t.patience.to_string(),
            m.d_hidden.to_string(),
            m.heads1.to_string(),
            m.head_dim1.to_string(),
            m.heads2.to_string(),
            m.out_dim2.to_string(),
            m.lstm_hidden.to_string(),
            m.rounds.to_string(),
            m.graph_dim.to_string(),
            m.classifier_hidden.to_string(),
            m.variant.to_string(),
            m.no_lstm.to_string(),
            m.no_jk.to_string(),
            m.pool.to_string(),
            m.leaky_slope.to_string(),
            m.symmetrize.to_string(),
        ];
        let mut out = String::new();
        for (k, v) in Self::KEYS.iter().zip(values) {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
