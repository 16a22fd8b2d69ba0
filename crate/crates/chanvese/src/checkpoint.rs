//! Versioned JSON checkpoints for [`MultiphaseModel`].
//!
//! ```json
//! {
//!   "version": 1,
//!   "m": 2, "n1": 3, "epsilon": 0.5,
//!   "levelsets": [{"a": [..], "w": [[wx, wy], ..], "b": [..]}, ..],
//!   "constants": {"++": 0.1, "+-": 0.7, "-+": 0.4, "--": 0.0},
//!   "optimizer": null
//! }
//! ```
//!
//! Numbers are written as shortest round-trip decimals, so loading a saved
//! checkpoint reproduces every value bit for bit. `optimizer` is optional and
//! holds the AdamW configuration, step counter and moment vectors.

use std::collections::BTreeMap;
use std::path::Path;

use chanvese_core::multiphase::pattern_label;
use chanvese_core::optimizer::{AdamWConfig, OptimizerState};
use chanvese_core::{LayerParams, MultiphaseModel, SignPattern, Smoothing};
use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::atomic::write_atomic;
use crate::error::{Error, Result};

pub const CHECKPOINT_VERSION: u32 = 1;

const REQUIRED: [&str; 5] = ["m", "n1", "epsilon", "levelsets", "constants"];

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct LayerJson {
    a: Vec<f64>,
    w: Vec<[f64; 2]>,
    b: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct OptimizerJson {
    learning_rate: f64,
    beta1: f64,
    beta2: f64,
    epsilon: f64,
    weight_decay: f64,
    step: u64,
    first_moment: Vec<f64>,
    second_moment: Vec<f64>,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
struct CheckpointJson {
    version: u32,
    m: usize,
    n1: usize,
    epsilon: f64,
    levelsets: Vec<LayerJson>,
    constants: BTreeMap<String, f64>,
    #[serde(default)]
    optimizer: Option<OptimizerJson>,
}

#[derive(Clone, Debug, PartialEq)]
pub struct Checkpoint {
    pub model: MultiphaseModel,
    pub optimizer: Option<OptimizerState>,
}

impl Checkpoint {
    pub fn new(model: MultiphaseModel) -> Self {
        Self { model, optimizer: None }
    }

    pub fn to_json(&self) -> Result<String> {
        let m = &self.model;
        let doc = CheckpointJson {
            version: CHECKPOINT_VERSION,
            m: m.phases(),
            n1: m.neurons(),
            epsilon: m.smoothing.epsilon(),
            levelsets: m
                .levelsets
                .iter()
                .map(|p| LayerJson { a: p.a.clone(), w: p.w.clone(), b: p.b.clone() })
                .collect(),
            constants: m
                .constants
                .iter()
                .enumerate()
                .map(|(i, &c)| (pattern_label(i, m.phases()), c))
                .collect(),
            optimizer: self.optimizer.as_ref().map(|o| OptimizerJson {
                learning_rate: o.config.learning_rate,
                beta1: o.config.beta1,
                beta2: o.config.beta2,
                epsilon: o.config.epsilon,
                weight_decay: o.config.weight_decay,
                step: o.step,
                first_moment: o.first_moment.clone(),
                second_moment: o.second_moment.clone(),
            }),
        };
        let mut s = serde_json::to_string_pretty(&doc)?;
        s.push('\n');
        Ok(s)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let value: Value = serde_json::from_str(text)?;
        let obj = value.as_object().ok_or_else(|| Error::SchemaError("<root>".into()))?;
        let version = obj
            .get("version")
            .ok_or_else(|| Error::SchemaError("version".into()))?
            .as_u64()
            .ok_or_else(|| Error::SchemaError("version".into()))?;
        if version != u64::from(CHECKPOINT_VERSION) {
            return Err(Error::VersionMismatch { expected: CHECKPOINT_VERSION, found: version });
        }
        if let Some(missing) = REQUIRED.iter().find(|k| !obj.contains_key(**k)) {
            return Err(Error::SchemaError((*missing).into()));
        }
        let doc: CheckpointJson = serde_json::from_value(value).map_err(|e| Error::SchemaError(e.to_string()))?;
        doc.into_checkpoint()
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        write_atomic(path, self.to_json()?.as_bytes())
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_json(&std::fs::read_to_string(path).map_err(Error::io(path))?)
    }
}

impl CheckpointJson {
    fn into_checkpoint(self) -> Result<Checkpoint> {
        let schema = |field: &str| Error::SchemaError(field.into());
        if self.levelsets.len() != self.m || self.m == 0 {
            return Err(schema("levelsets"));
        }
        let levelsets = self
            .levelsets
            .into_iter()
            .map(|l| {
                if l.a.len() != self.n1 {
                    return Err(schema("n1"));
                }
                LayerParams::new(l.a, l.w, l.b).map_err(|_| schema("levelsets"))
            })
            .collect::<Result<Vec<_>>>()?;
        let mut constants = vec![f64::NAN; 1 << self.m];
        for (key, value) in &self.constants {
            let pattern = SignPattern::parse(key).map_err(|_| schema("constants"))?;
            if pattern.len() != self.m {
                return Err(schema("constants"));
            }
            constants[pattern.index()] = *value;
        }
        if constants.iter().any(|c| c.is_nan()) {
            return Err(schema("constants"));
        }
        let smoothing = Smoothing::new(self.epsilon).map_err(|_| schema("epsilon"))?;
        let model = MultiphaseModel::new(levelsets, constants, smoothing)?;
        let optimizer = match self.optimizer {
            None => None,
            Some(o) => {
                let config = AdamWConfig {
                    learning_rate: o.learning_rate,
                    beta1: o.beta1,
                    beta2: o.beta2,
                    epsilon: o.epsilon,
                    weight_decay: o.weight_decay,
                };
                let mut state = OptimizerState::new(config, &model.levelsets);
                if o.first_moment.len() != state.first_moment.len()
                    || o.second_moment.len() != state.second_moment.len()
                {
                    return Err(schema("optimizer"));
                }
                state.step = o.step;
                state.first_moment = o.first_moment;
                state.second_moment = o.second_moment;
                Some(state)
            }
        };
        Ok(Checkpoint { model, optimizer })
    }
}
