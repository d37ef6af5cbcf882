//! Adam training loop with plateau learning-rate reduction and early stopping.
//!
//! One epoch shuffles the GCI axioms of each variant, cuts them into batches of
//! `batch_size`, and visits the batches round-robin over variants. Each step
//! adds sampled negatives for the variants in the negative scope, evaluates
//! the grouped total loss and its gradient, applies Adam, and clamps radii and
//! offsets at zero.
//!
//! The validation loss is the positives-only total loss on the validation
//! axioms (training axioms when none are given). The parameters with the best
//! validation loss are returned.

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::DeductiveClosure;
use crate::kb::{NormalizedAxiom, Theory, Variant};
use crate::loss::{total_loss, total_loss_grad, LossError, LossRequest};
use crate::model::{GeometricModel, Hyper, ModelKind};
use crate::sampler::{sample_with_rng, SamplerConfig, SamplerError, SamplingMode};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum NegativeScope {
    /// Negatives for A ⊑ ∃r.B only.
    Gci2Only,
    /// Negatives for every GCI normal form.
    AllForms,
}

impl NegativeScope {
    pub fn covers(self, v: Variant) -> bool {
        match self {
            NegativeScope::Gci2Only => v == Variant::Gci2,
            NegativeScope::AllForms => v.is_gci(),
        }
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct TrainConfig {
    pub model: ModelKind,
    pub dim: usize,
    pub learning_rate: f64,
    pub hyper: Hyper,
    pub epochs: usize,
    pub batch_size: usize,
    pub seed: u64,
    pub negative_scope: NegativeScope,
    pub negatives_per_axiom: usize,
    pub sampler: SamplerConfig,
    /// Epochs without improvement before the learning rate is cut.
    pub patience: usize,
    /// Epochs without improvement before training stops.
    pub early_stop: usize,
    pub lr_factor: f64,
    pub min_lr: f64,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            model: ModelKind::Elem,
            dim: 50,
            learning_rate: 0.001,
            hyper: Hyper::default(),
            epochs: 100,
            batch_size: 32_768,
            seed: 42,
            negative_scope: NegativeScope::AllForms,
            negatives_per_axiom: 1,
            sampler: SamplerConfig::default(),
            patience: 10,
            early_stop: 20,
            lr_factor: 0.1,
            min_lr: 1e-6,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self) -> Result<(), TrainError> {
        let bad = |m: &str| Err(TrainError::Config(m.to_string()));
        if self.epochs == 0 {
            return bad("epochs ≥ 1");
        }
        if self.batch_size == 0 {
            return bad("batch size ≥ 1");
        }
        if self.dim < 2 {
            return bad("dimension ≥ 2");
        }
        if !(self.learning_rate > 0.0 && self.learning_rate.is_finite()) {
            return bad("learning rate must be positive");
        }
        if !(self.lr_factor > 0.0 && self.lr_factor < 1.0) {
            return bad("lr factor must lie in (0, 1)");
        }
        self.sampler.validate()?;
        Ok(())
    }
}

/// One row of the hyperparameter table.
#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub struct Preset {
    pub dim: usize,
    pub learning_rate: f64,
    pub margin: f64,
    pub epsilon: Option<f64>,
    pub delta: Option<f64>,
    pub lambda: Option<f64>,
}

#[rustfmt::skip]
const PRESETS: &[(&str, ModelKind, bool, Preset)] = {
    use ModelKind::*;
    const fn p(dim: usize, learning_rate: f64, margin: f64, epsilon: Option<f64>, delta: Option<f64>, lambda: Option<f64>) -> Preset {
        Preset { dim, learning_rate, margin, epsilon, delta, lambda }
    }
    &[
        ("yeast-iw", Elem,   false, p(100, 0.0001, -0.10, None,        None,      None)),
        ("yeast-iw", Elem,   true,  p(50,  0.0001,  0.00, None,        None,      None)),
        ("yeast-iw", Elbe,   false, p(200, 0.0001,  0.00, None,        None,      None)),
        ("yeast-iw", Elbe,   true,  p(200, 0.01,    0.00, Some(0.001), None,      None)),
        ("yeast-iw", Box2El, false, p(200, 0.001,   0.01, None,        Some(1.0), Some(0.05))),
        ("yeast-iw", Box2El, true,  p(200, 0.001,   0.01, Some(0.01),  Some(2.0), Some(0.05))),
        ("yeast-hf", Elem,   false, p(200, 0.0001,  0.01, None,        None,      None)),
        ("yeast-hf", Elem,   true,  p(50,  0.0001, -0.10, None,        None,      None)),
        ("yeast-hf", Elbe,   false, p(200, 0.0001,  0.10, None,        None,      None)),
        ("yeast-hf", Elbe,   true,  p(200, 0.0001,  0.10, Some(0.01),  None,      None)),
        ("yeast-hf", Box2El, false, p(200, 0.01,    0.10, None,        Some(4.0), Some(0.2))),
        ("yeast-hf", Box2El, true,  p(200, 0.01,    0.10, Some(0.01),  Some(4.0), Some(0.05))),
        ("foodon",   Elem,   false, p(400, 0.001,  -0.10, None,        None,      None)),
        ("foodon",   Elem,   true,  p(400, 0.001,  -0.10, None,        None,      None)),
        ("foodon",   Elbe,   false, p(200, 0.01,    0.10, None,        None,      None)),
        ("foodon",   Elbe,   true,  p(200, 0.01,   -0.01, Some(0.001), None,      None)),
        ("foodon",   Box2El, false, p(100, 0.01,    0.10, None,        Some(1.0), Some(0.2))),
        ("foodon",   Box2El, true,  p(200, 0.001,   0.10, Some(0.01),  Some(4.0), Some(0.1))),
        ("galen",    Elem,   false, p(400, 0.001,  -0.10, None,        None,      None)),
        ("galen",    Elem,   true,  p(400, 0.001,  -0.01, None,        None,      None)),
        ("galen",    Elbe,   false, p(100, 0.001,   0.10, None,        None,      None)),
        ("galen",    Elbe,   true,  p(200, 0.001,   0.01, Some(0.01),  None,      None)),
        ("galen",    Box2El, false, p(200, 0.001,   0.00, None,        Some(4.0), Some(0.05))),
        ("galen",    Box2El, true,  p(200, 0.01,    0.00, Some(0.1),   Some(1.0), Some(0.05))),
    ]
};

/// Tuned hyperparameters for `dataset` (`yeast-iw`, `yeast-hf`, `foodon`,
/// `galen`); `all_negatives` selects the rows trained with every negative loss.
pub fn preset(dataset: &str, model: ModelKind, all_negatives: bool) -> Option<Preset> {
    let key = dataset.to_ascii_lowercase().replace('_', "-");
    PRESETS
        .iter()
        .find(|(d, m, l, _)| *d == key && *m == model && *l == all_negatives)
        .map(|&(_, _, _, p)| p)
}

pub const PRESET_DATASETS: [&str; 4] = ["yeast-iw", "yeast-hf", "foodon", "galen"];

impl Preset {
    /// Writes the preset into `cfg`, keeping its current values where the table is blank.
    pub fn apply(&self, cfg: &mut TrainConfig) {
        cfg.dim = self.dim;
        cfg.learning_rate = self.learning_rate;
        cfg.hyper.margin = self.margin;
        if let Some(e) = self.epsilon {
            cfg.hyper.epsilon = e;
        }
        if let Some(d) = self.delta {
            cfg.hyper.delta = d;
        }
        if let Some(l) = self.lambda {
            cfg.hyper.lambda = l;
        }
    }
}

#[derive(Debug, Error)]
pub enum TrainError {
    #[error("invalid training configuration: {0}")]
    Config(String),
    #[error("theory has no GCI axioms to train on")]
    EmptyTheory,
    #[error("non-finite {what} in epoch {epoch}")]
    NonFinite { what: &'static str, epoch: usize },
    #[error(transparent)]
    Loss(#[from] LossError),
    #[error(transparent)]
    Sampler(#[from] SamplerError),
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct EpochLog {
    pub epoch: usize,
    pub train_loss: f64,
    pub validation_loss: f64,
    pub learning_rate: f64,
    pub skipped_negatives: usize,
}

#[derive(Clone, Debug, Default, Serialize, Deserialize, PartialEq)]
pub struct TrainLog {
    pub epochs: Vec<EpochLog>,
    pub best_epoch: usize,
    pub best_validation_loss: f64,
    pub stopped_early: bool,
}

/// Adam with bias correction.
#[derive(Clone, Debug)]
pub struct Adam {
    m: Vec<f64>,
    v: Vec<f64>,
    t: i32,
    pub beta1: f64,
    pub beta2: f64,
    pub eps: f64,
}

impl Adam {
    pub fn new(n: usize) -> Self {
        Adam {
            m: vec![0.0; n],
            v: vec![0.0; n],
            t: 0,
            beta1: 0.9,
            beta2: 0.999,
            eps: 1e-8,
        }
    }

    pub fn step(&mut self, params: &mut [f64], grad: &[f64], lr: f64) {
        self.t += 1;
        let c1 = 1.0 - self.beta1.powi(self.t);
        let c2 = 1.0 - self.beta2.powi(self.t);
        for i in 0..params.len() {
            let g = grad[i];
            self.m[i] = self.beta1 * self.m[i] + (1.0 - self.beta1) * g;
            self.v[i] = self.beta2 * self.v[i] + (1.0 - self.beta2) * g * g;
            let mh = self.m[i] / c1;
            let vh = self.v[i] / c2;
            params[i] -= lr * mh / (vh.sqrt() + self.eps);
        }
    }
}

/// Stream used for shuffling and negative sampling, independent of the init stream.
fn data_rng(seed: u64) -> Xoshiro256PlusPlus {
    Xoshiro256PlusPlus::seed_from_u64(seed ^ 0x9e37_79b9_7f4a_7c15)
}

pub fn init_model(t: &Theory, cfg: &TrainConfig) -> GeometricModel {
    let mut rng = Xoshiro256PlusPlus::seed_from_u64(cfg.seed);
    GeometricModel::init(
        cfg.model,
        cfg.dim,
        t.signature.num_concepts(),
        t.signature.num_roles(),
        cfg.hyper,
        &mut rng,
    )
}

fn positives(axioms: &[NormalizedAxiom]) -> Vec<LossRequest> {
    axioms
        .iter()
        .map(|a| a.canonical())
        .filter(|a| a.variant().is_gci())
        .map(LossRequest::positive)
        .collect()
}

/// Trains from a fresh initialization.
pub fn train(
    t: &Theory,
    cfg: &TrainConfig,
    dc: Option<&DeductiveClosure>,
    validation: &[NormalizedAxiom],
) -> Result<(GeometricModel, TrainLog), TrainError> {
    cfg.validate()?;
    let model = init_model(t, cfg);
    train_from(model, t, cfg, dc, validation)
}

/// Trains starting from `model`.
pub fn train_from(
    mut model: GeometricModel,
    t: &Theory,
    cfg: &TrainConfig,
    dc: Option<&DeductiveClosure>,
    validation: &[NormalizedAxiom],
) -> Result<(GeometricModel, TrainLog), TrainError> {
    cfg.validate()?;
    if cfg.sampler.mode != SamplingMode::Random && dc.is_none() && cfg.negatives_per_axiom > 0 {
        return Err(TrainError::Config("filtered and biased sampling need a deductive closure".into()));
    }
    model.hyper = cfg.hyper;
    model.clamp();
    let nc = t.signature.num_concepts();
    let mut groups: Vec<(Variant, Vec<NormalizedAxiom>)> = Variant::GCIS
        .iter()
        .map(|&v| (v, t.of_variant(v).copied().collect::<Vec<_>>()))
        .filter(|(_, g)| !g.is_empty())
        .collect();
    if groups.is_empty() {
        return Err(TrainError::EmptyTheory);
    }
    let val_reqs = if validation.is_empty() {
        positives(t.axioms())
    } else {
        positives(validation)
    };

    let mut rng = data_rng(cfg.seed);
    let mut adam = Adam::new(model.num_params());
    let mut grad = vec![0.0; model.num_params()];
    let mut lr = cfg.learning_rate;
    let mut best = total_loss(&model, &val_reqs)?;
    if !best.is_finite() {
        return Err(TrainError::NonFinite { what: "validation loss", epoch: 0 });
    }
    let mut best_params = model.params.clone();
    let mut log = TrainLog {
        best_validation_loss: best,
        ..TrainLog::default()
    };
    let mut since_best = 0;
    let mut since_cut = 0;

    for epoch in 1..=cfg.epochs {
        for (_, g) in groups.iter_mut() {
            g.shuffle(&mut rng);
        }
        let mut queues: Vec<(Variant, std::slice::Chunks<'_, NormalizedAxiom>)> =
            groups.iter().map(|(v, g)| (*v, g.chunks(cfg.batch_size))).collect();
        let (mut loss_sum, mut steps, mut skipped) = (0.0, 0usize, 0usize);
        loop {
            let mut progressed = false;
            for (variant, chunks) in queues.iter_mut() {
                let Some(batch) = chunks.next() else { continue };
                progressed = true;
                let mut reqs: Vec<LossRequest> = batch.iter().map(|a| LossRequest::positive(*a)).collect();
                if cfg.negative_scope.covers(*variant) && cfg.negatives_per_axiom > 0 {
                    let neg = sample_with_rng(batch, cfg.negatives_per_axiom, &cfg.sampler, nc, dc, &mut rng)?;
                    skipped += neg.skipped;
                    reqs.extend(neg.negatives.into_iter().map(|(_, n)| LossRequest::negative(n)));
                }
                let loss = total_loss_grad(&model, &reqs, &mut grad)?;
                if !loss.is_finite() {
                    return Err(TrainError::NonFinite { what: "training loss", epoch });
                }
                if grad.iter().any(|g| !g.is_finite()) {
                    return Err(TrainError::NonFinite { what: "gradient", epoch });
                }
                adam.step(&mut model.params, &grad, lr);
                model.clamp();
                loss_sum += loss;
                steps += 1;
            }
            if !progressed {
                break;
            }
        }
        let val = total_loss(&model, &val_reqs)?;
        if !val.is_finite() {
            return Err(TrainError::NonFinite { what: "validation loss", epoch });
        }
        log.epochs.push(EpochLog {
            epoch,
            train_loss: loss_sum / steps.max(1) as f64,
            validation_loss: val,
            learning_rate: lr,
            skipped_negatives: skipped,
        });
        if val < best {
            best = val;
            best_params.copy_from_slice(&model.params);
            log.best_epoch = epoch;
            log.best_validation_loss = val;
            since_best = 0;
            since_cut = 0;
        } else {
            since_best += 1;
            since_cut += 1;
            if since_cut > cfg.patience && lr > cfg.min_lr {
                lr = (lr * cfg.lr_factor).max(cfg.min_lr);
                since_cut = 0;
            }
            if since_best >= cfg.early_stop {
                log.stopped_early = true;
                break;
            }
        }
    }
    model.params = best_params;
    Ok((model, log))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_normalized_str;
    use crate::sampler::SamplingMode;

    fn cfg() -> TrainConfig {
        TrainConfig {
            dim: 4,
            epochs: 30,
            learning_rate: 0.01,
            batch_size: 4,
            sampler: SamplerConfig {
                mode: SamplingMode::Random,
                ..SamplerConfig::default()
            },
            ..TrainConfig::default()
        }
    }

    fn theory() -> Theory {
        parse_normalized_str("GCI0 A B\nGCI0 B C\nGCI2 A r D\nGCI3 r D E\nGCI1_BOT C D\nGCI1 A C F\n").unwrap()
    }

    #[test]
    fn rejects_bad_configs() {
        let t = theory();
        let mut c = cfg();
        c.epochs = 0;
        let err = train(&t, &c, None, &[]).unwrap_err();
        assert!(err.to_string().contains("epochs ≥ 1"));
        let mut c = cfg();
        c.sampler.mode = SamplingMode::Filtered;
        assert!(matches!(train(&t, &c, None, &[]), Err(TrainError::Config(_))));
        let empty = parse_normalized_str("RI0 r s\n").unwrap();
        assert!(matches!(train(&empty, &cfg(), None, &[]), Err(TrainError::EmptyTheory)));
    }

    #[test]
    fn deterministic_and_improving() {
        let t = theory();
        for kind in ModelKind::ALL {
            let mut c = cfg();
            c.model = kind;
            let (a, log) = train(&t, &c, None, &[]).unwrap();
            let (b, _) = train(&t, &c, None, &[]).unwrap();
            assert_eq!(a.params, b.params);
            let first = log.epochs[0].validation_loss;
            assert!(log.best_validation_loss <= first);
            assert!(a.nonneg_indices().iter().all(|&i| a.params[i] >= 0.0));
        }
    }

    #[test]
    fn adam_moves_against_gradient() {
        let mut p = vec![1.0, -1.0];
        let mut adam = Adam::new(2);
        adam.step(&mut p, &[2.0, -3.0], 0.1);
        assert!((p[0] - 0.9).abs() < 1e-6 && (p[1] + 0.9).abs() < 1e-6);
    }

    #[test]
    fn presets_cover_table() {
        for d in PRESET_DATASETS {
            for m in ModelKind::ALL {
                for l in [false, true] {
                    assert!(preset(d, m, l).is_some(), "{d} {m} {l}");
                }
            }
        }
        let p = preset("FoodOn", ModelKind::Box2El, true).unwrap();
        assert_eq!((p.dim, p.learning_rate, p.margin), (200, 0.001, 0.1));
        assert_eq!((p.epsilon, p.delta, p.lambda), (Some(0.01), Some(4.0), Some(0.1)));
    }
}
