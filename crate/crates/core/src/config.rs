//! JSON run configuration shared by the command-line tool.
//!
//! ```json
//! {
//!   "model": { "g": 2, "gamma": [0.9, 0.1, 0.2, 0.8], "pi1": [0.5, 0.5],
//!              "shapes": [1, 3], "theta": 0.5,
//!              "grid": [0, 1, 2, 3], "exposures": [1, 1, 1] },
//!   "delay": { "family": "exponential", "params": { "rate": 1.0 } },
//!   "valuation": 3.0,
//!   "seed": 42
//! }
//! ```

use std::path::Path;

use serde_json::{Map, Value};

use crate::delay::DelayModel;
use crate::error::{Error, Result};
use crate::intensity::ModelSpec;

const KEYS: [&str; 4] = ["model", "delay", "valuation", "seed"];

#[derive(Debug, Clone, PartialEq)]
pub struct RunConfig {
    pub model: ModelSpec,
    pub delay: DelayModel,
    /// Valuation date; defaults to the last grid point.
    pub valuation: f64,
    pub seed: Option<u64>,
}

impl RunConfig {
    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value =
            serde_json::from_str(text).map_err(|e| Error::field("config", e.to_string()))?;
        let Value::Object(mut obj) = value else {
            return Err(Error::field("config", "expected a JSON object"));
        };
        if let Some(unknown) = obj.keys().find(|k| !KEYS.contains(&k.as_str())) {
            return Err(Error::field(unknown.clone(), "unknown key"));
        }
        let model: ModelSpec = take(&mut obj, "model")?;
        let delay: DelayModel = take(&mut obj, "delay")?;
        let valuation = match obj.remove("valuation") {
            None | Some(Value::Null) => *model.grid().last().unwrap_or(&0.0),
            Some(v) => v
                .as_f64()
                .ok_or_else(|| Error::field("valuation", "expected a number"))?,
        };
        if model.grid_index_of(valuation).is_none() {
            return Err(Error::field(
                "valuation",
                format!("{valuation} is not a grid point"),
            ));
        }
        let seed = match obj.remove("seed") {
            None | Some(Value::Null) => None,
            Some(v) => Some(
                v.as_u64()
                    .ok_or_else(|| Error::field("seed", "expected an unsigned 64-bit integer"))?,
            ),
        };
        Ok(Self {
            model,
            delay,
            valuation,
            seed,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path)
            .map_err(|e| Error::field("config", format!("{}: {e}", path.display())))?;
        Self::from_json(&text)
    }

    /// Seed for stochastic commands: `overridden` if given, else the configured one.
    pub fn require_seed(&self, overridden: Option<u64>) -> Result<u64> {
        overridden
            .or(self.seed)
            .ok_or_else(|| Error::field("seed", "required for stochastic commands (config key or --seed)"))
    }

    /// Grid index `k` with `d_k = valuation`.
    pub fn horizon(&self) -> usize {
        self.model
            .grid_index_of(self.valuation)
            .expect("valuation checked at load time")
    }
}

fn take<T: serde::de::DeserializeOwned>(obj: &mut Map<String, Value>, key: &str) -> Result<T> {
    let v = obj
        .remove(key)
        .ok_or_else(|| Error::field(key, "missing"))?;
    serde_json::from_value(v).map_err(|e| Error::field(key, e.to_string()))
}
