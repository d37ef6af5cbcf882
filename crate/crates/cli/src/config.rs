//! Run configuration: flat `key = value` text or a JSON object.
//!
//! Keys (all optional):
//!
//! | key                   | meaning                                                        |
//! |-----------------------|----------------------------------------------------------------|
//! | `preset`              | hyperparameter row: `yeast-iw`, `yeast-hf`, `foodon`, `galen`  |
//! | `model`               | `elem`, `elbe`, `box2el`                                       |
//! | `dim`                 | embedding dimension                                            |
//! | `learning_rate`       | initial Adam step size                                         |
//! | `margin`, `epsilon`, `delta`, `lambda` | loss hyperparameters γ, ε, δ, λ               |
//! | `epochs`, `batch_size`, `seed`          | training loop                                |
//! | `negative_scope`      | `gci2` or `all`                                                |
//! | `negatives_per_axiom` | corruptions drawn per positive                                 |
//! | `sampling`            | `random`, `filtered` or `biased`                               |
//! | `biased_fraction`     | entailed fraction for `biased`                                 |
//! | `slot_policy`         | `rightmost` or `uniform`                                       |
//! | `pool_prefix`         | corrupt only with concepts whose name has this prefix          |
//! | `retry_limit`         | draws per corruption before it is skipped                      |
//! | `patience`, `early_stop`, `lr_factor`, `min_lr` | learning-rate schedule               |
//! | `closure_cap`         | materialization bound (larger theories use oracle queries)     |
//! | `train`, `valid`, `test`, `checkpoint` | input files; must exist                       |
//! | `out_dir`             | output directory (created if missing)                          |
//! | `task`                | name recorded in evaluation reports                            |
//! | `candidate_prefix`    | ranking candidates; all concepts except ⊥ when absent           |
//! | `micro`               | `test-subjects` or `signature`                                 |
//! | `filter_closure`      | also filter ranking candidates entailed by the training theory |

use std::path::{Path, PathBuf};

use geoel::closure::DEFAULT_MATERIALIZE_CAP;
use geoel::model::ModelKind;
use geoel::sampler::{SamplingMode, SlotPolicy};
use geoel::trainer::{preset, NegativeScope, TrainConfig, PRESET_DATASETS};
use serde::{Deserialize, Serialize};
use serde_json::{Map, Value};

use crate::CliError;

#[derive(Clone, Debug, Default, PartialEq, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct RunConfig {
    pub preset: Option<String>,
    pub model: Option<String>,
    pub dim: Option<usize>,
    pub learning_rate: Option<f64>,
    pub margin: Option<f64>,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
    pub epochs: Option<usize>,
    pub batch_size: Option<usize>,
    pub seed: Option<u64>,
    pub negative_scope: Option<String>,
    pub negatives_per_axiom: Option<usize>,
    pub sampling: Option<String>,
    pub biased_fraction: Option<f64>,
    pub slot_policy: Option<String>,
    pub pool_prefix: Option<String>,
    pub retry_limit: Option<usize>,
    pub patience: Option<usize>,
    pub early_stop: Option<usize>,
    pub lr_factor: Option<f64>,
    pub min_lr: Option<f64>,
    pub closure_cap: Option<u64>,
    pub train: Option<PathBuf>,
    pub valid: Option<PathBuf>,
    pub test: Option<PathBuf>,
    pub checkpoint: Option<PathBuf>,
    pub out_dir: Option<PathBuf>,
    pub task: Option<String>,
    pub candidate_prefix: Option<String>,
    pub micro: Option<String>,
    pub filter_closure: Option<bool>,
}

fn scalar(raw: &str) -> Value {
    match serde_json::from_str::<Value>(raw) {
        Ok(v @ (Value::Number(_) | Value::Bool(_) | Value::String(_))) => v,
        _ => Value::String(raw.to_owned()),
    }
}

/// Parses `key = value` lines; `#` starts a comment line.
pub fn parse_flat(text: &str) -> Result<Map<String, Value>, CliError> {
    let mut map = Map::new();
    for (i, line) in text.lines().enumerate() {
        let line = line.trim();
        if line.is_empty() || line.starts_with('#') {
            continue;
        }
        let (k, v) = line
            .split_once('=')
            .ok_or_else(|| CliError::User(format!("config line {}: expected `key = value`", i + 1)))?;
        let key = k.trim().to_owned();
        if map.insert(key.clone(), scalar(v.trim())).is_some() {
            return Err(CliError::User(format!("config line {}: duplicate key `{key}`", i + 1)));
        }
    }
    Ok(map)
}

/// Reads a config file (JSON when it starts with `{`).
pub fn read_config_file(path: &Path) -> Result<Map<String, Value>, CliError> {
    let text = std::fs::read_to_string(path)
        .map_err(|e| CliError::User(format!("cannot read config {}: {e}", path.display())))?;
    if text.trim_start().starts_with('{') {
        match serde_json::from_str::<Value>(&text) {
            Ok(Value::Object(m)) => Ok(m),
            Ok(_) => Err(CliError::User("JSON config must be an object".into())),
            Err(e) => Err(CliError::User(format!("config {}: {e}", path.display()))),
        }
    } else {
        parse_flat(&text)
    }
}

/// `key=value` overrides from the command line.
pub fn apply_overrides(map: &mut Map<String, Value>, sets: &[String]) -> Result<(), CliError> {
    for s in sets {
        let (k, v) = s
            .split_once('=')
            .ok_or_else(|| CliError::User(format!("--set expects key=value, got `{s}`")))?;
        map.insert(k.trim().to_owned(), scalar(v.trim()));
    }
    Ok(())
}

impl RunConfig {
    pub fn from_map(map: Map<String, Value>) -> Result<Self, CliError> {
        let cfg: RunConfig =
            serde_json::from_value(Value::Object(map)).map_err(|e| CliError::User(format!("config: {e}")))?;
        cfg.check_paths()?;
        Ok(cfg)
    }

    fn check_paths(&self) -> Result<(), CliError> {
        let inputs = [
            ("train", &self.train),
            ("valid", &self.valid),
            ("test", &self.test),
            ("checkpoint", &self.checkpoint),
        ];
        for (key, p) in inputs {
            if let Some(p) = p {
                if !p.exists() {
                    return Err(CliError::User(format!("config key `{key}`: {} does not exist", p.display())));
                }
            }
        }
        Ok(())
    }

    pub fn model_kind(&self) -> Result<ModelKind, CliError> {
        match &self.model {
            None => Ok(TrainConfig::default().model),
            Some(m) => m.parse().map_err(CliError::User),
        }
    }

    pub fn closure_cap(&self) -> u128 {
        self.closure_cap.map_or(DEFAULT_MATERIALIZE_CAP, u128::from)
    }

    pub fn sampling_mode(&self, default: SamplingMode) -> Result<SamplingMode, CliError> {
        match self.sampling.as_deref() {
            None => Ok(default),
            Some("random") => Ok(SamplingMode::Random),
            Some("filtered") => Ok(SamplingMode::Filtered),
            Some("biased") => Ok(SamplingMode::Biased(self.biased_fraction.ok_or_else(|| {
                CliError::User("sampling = biased needs biased_fraction".into())
            })?)),
            Some(other) => Err(CliError::User(format!(
                "unknown sampling `{other}` (expected random, filtered or biased)"
            ))),
        }
    }

    /// Training settings: defaults, then the preset row, then explicit keys.
    pub fn train_config(&self, seed: Option<u64>) -> Result<TrainConfig, CliError> {
        let mut cfg = TrainConfig {
            model: self.model_kind()?,
            ..TrainConfig::default()
        };
        cfg.negative_scope = match self.negative_scope.as_deref() {
            None => cfg.negative_scope,
            Some("gci2") => NegativeScope::Gci2Only,
            Some("all") => NegativeScope::AllForms,
            Some(other) => {
                return Err(CliError::User(format!("unknown negative_scope `{other}` (expected gci2 or all)")))
            }
        };
        if let Some(name) = &self.preset {
            let all = cfg.negative_scope == NegativeScope::AllForms;
            let p = preset(name, cfg.model, all).ok_or_else(|| {
                CliError::User(format!("unknown preset `{name}` (expected one of {PRESET_DATASETS:?})"))
            })?;
            p.apply(&mut cfg);
        }
        macro_rules! set {
            ($($field:ident => $target:expr),* $(,)?) => {
                $(if let Some(v) = self.$field { $target = v; })*
            };
        }
        set! {
            dim => cfg.dim,
            learning_rate => cfg.learning_rate,
            margin => cfg.hyper.margin,
            epsilon => cfg.hyper.epsilon,
            delta => cfg.hyper.delta,
            lambda => cfg.hyper.lambda,
            epochs => cfg.epochs,
            batch_size => cfg.batch_size,
            seed => cfg.seed,
            negatives_per_axiom => cfg.negatives_per_axiom,
            retry_limit => cfg.sampler.retry_limit,
            patience => cfg.patience,
            early_stop => cfg.early_stop,
            lr_factor => cfg.lr_factor,
            min_lr => cfg.min_lr,
        }
        if let Some(s) = seed {
            cfg.seed = s;
        }
        cfg.sampler.seed = cfg.seed;
        cfg.sampler.mode = self.sampling_mode(cfg.sampler.mode)?;
        cfg.sampler.slots = match self.slot_policy.as_deref() {
            None => cfg.sampler.slots,
            Some("rightmost") => SlotPolicy::Rightmost,
            Some("uniform") => SlotPolicy::Uniform,
            Some(other) => {
                return Err(CliError::User(format!(
                    "unknown slot_policy `{other}` (expected rightmost or uniform)"
                )))
            }
        };
        cfg.validate().map_err(|e| CliError::User(e.to_string()))?;
        Ok(cfg)
    }
}
