//! Negative sampling by corrupting one concept slot of a GCI.
//!
//! Randomness comes from `Xoshiro256PlusPlus` seeded with `seed_from_u64`
//! (SplitMix64 expansion of the 64-bit seed), so batches are reproducible
//! across platforms.
//!
//! Modes:
//! - `Random`: uniform replacement from the pool, rejecting the original axiom.
//! - `Filtered`: additionally rejects candidates entailed by the closure.
//! - `Biased(p)`: with probability `p` a uniform draw among entailed candidates
//!   (other than the axiom itself), otherwise a filtered draw. The entailed
//!   fraction of the output is therefore `p` in expectation.
//!
//! ⊥ never enters a pool.

use rand::seq::IndexedRandom;
use rand::{Rng, SeedableRng};
use rand_xoshiro::Xoshiro256PlusPlus;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::closure::{ClosureError, DeductiveClosure};
use crate::kb::{ConceptId, NormalizedAxiom, Signature, Variant};

pub type SamplerRng = Xoshiro256PlusPlus;

pub fn sampler_rng(seed: u64) -> SamplerRng {
    Xoshiro256PlusPlus::seed_from_u64(seed)
}

#[derive(Clone, Copy, Debug, PartialEq, Serialize, Deserialize)]
pub enum SamplingMode {
    Random,
    Filtered,
    Biased(f64),
}

/// Which slot gets replaced. GCI1 always corrupts E regardless of policy.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum SlotPolicy {
    /// The rightmost concept slot (B, or A for the unary ⊥ forms).
    Rightmost,
    /// A uniformly chosen concept slot.
    Uniform,
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct SamplerConfig {
    pub mode: SamplingMode,
    pub slots: SlotPolicy,
    /// Candidate concepts; `None` means every concept except ⊥.
    pub pool: Option<Vec<ConceptId>>,
    pub retry_limit: usize,
    pub seed: u64,
}

impl Default for SamplerConfig {
    fn default() -> Self {
        SamplerConfig {
            mode: SamplingMode::Filtered,
            slots: SlotPolicy::Rightmost,
            pool: None,
            retry_limit: 100,
            seed: 0,
        }
    }
}

impl SamplerConfig {
    pub fn validate(&self) -> Result<(), SamplerError> {
        if self.retry_limit == 0 {
            return Err(SamplerError::Config("retry limit must be at least 1".into()));
        }
        if let SamplingMode::Biased(p) = self.mode {
            if !(0.0..=1.0).contains(&p) {
                return Err(SamplerError::Config(format!("biased fraction {p} is outside [0, 1]")));
            }
        }
        if matches!(&self.pool, Some(p) if p.is_empty()) {
            return Err(SamplerError::Config("candidate pool is empty".into()));
        }
        Ok(())
    }
}

/// Concepts whose name starts with `prefix` (for example `{GO` for function nominals).
pub fn pool_by_prefix(sig: &Signature, prefix: &str) -> Vec<ConceptId> {
    sig.concept_ids()
        .filter(|&c| c != ConceptId::BOTTOM && sig.concept_name(c).starts_with(prefix))
        .collect()
}

#[derive(Debug, Error, PartialEq)]
pub enum SamplerError {
    #[error("no admissible corruption of the axiom after {0} attempts")]
    PoolExhausted(usize),
    #[error("{0} axioms cannot be corrupted")]
    NotCorruptible(Variant),
    #[error("{0} sampling needs a deductive closure")]
    NeedsClosure(&'static str),
    #[error("sampler configuration: {0}")]
    Config(String),
    #[error(transparent)]
    Closure(#[from] ClosureError),
}

fn slot_for<R: Rng>(ax: &NormalizedAxiom, policy: SlotPolicy, rng: &mut R) -> usize {
    let n = ax.num_concept_slots();
    if ax.variant() == Variant::Gci1 {
        return 2;
    }
    match policy {
        SlotPolicy::Rightmost => n - 1,
        SlotPolicy::Uniform => rng.random_range(0..n),
    }
}

struct Pool<'a> {
    explicit: Option<&'a [ConceptId]>,
    num_concepts: usize,
}

impl Pool<'_> {
    fn len(&self) -> usize {
        match self.explicit {
            Some(p) => p.len(),
            None => self.num_concepts.saturating_sub(1),
        }
    }

    fn get(&self, i: usize) -> ConceptId {
        match self.explicit {
            Some(p) => p[i],
            // skip ⊥ (id 1)
            None => ConceptId(if i == 0 { 0 } else { i as u32 + 1 }),
        }
    }

    fn iter(&self) -> impl Iterator<Item = ConceptId> + '_ {
        (0..self.len()).map(|i| self.get(i)).filter(|&c| c != ConceptId::BOTTOM)
    }

    fn draw<R: Rng>(&self, rng: &mut R) -> ConceptId {
        self.get(rng.random_range(0..self.len()))
    }
}

/// Draws one corruption of `ax`. `num_concepts` bounds the default pool.
pub fn corrupt<R: Rng>(
    ax: &NormalizedAxiom,
    cfg: &SamplerConfig,
    num_concepts: usize,
    dc: Option<&DeductiveClosure>,
    rng: &mut R,
) -> Result<NormalizedAxiom, SamplerError> {
    let ax = ax.canonical();
    if !ax.variant().is_gci() {
        return Err(SamplerError::NotCorruptible(ax.variant()));
    }
    let pool = Pool {
        explicit: cfg.pool.as_deref(),
        num_concepts,
    };
    if pool.len() == 0 {
        return Err(SamplerError::PoolExhausted(0));
    }
    let slot = slot_for(&ax, cfg.slots, rng);
    let replace = |c: ConceptId| ax.with_concept_slot(slot, c).expect("slot exists");
    let filtered = |rng: &mut R, dc: &DeductiveClosure| -> Result<NormalizedAxiom, SamplerError> {
        for _ in 0..cfg.retry_limit {
            let c = pool.draw(rng);
            if c == ConceptId::BOTTOM {
                continue;
            }
            let cand = replace(c);
            if cand != ax && !dc.entails(&cand)? {
                return Ok(cand);
            }
        }
        Err(SamplerError::PoolExhausted(cfg.retry_limit))
    };
    match cfg.mode {
        SamplingMode::Random => {
            for _ in 0..cfg.retry_limit {
                let c = pool.draw(rng);
                if c == ConceptId::BOTTOM {
                    continue;
                }
                let cand = replace(c);
                if cand != ax {
                    return Ok(cand);
                }
            }
            Err(SamplerError::PoolExhausted(cfg.retry_limit))
        }
        SamplingMode::Filtered => filtered(rng, dc.ok_or(SamplerError::NeedsClosure("filtered"))?),
        SamplingMode::Biased(p) => {
            let dc = dc.ok_or(SamplerError::NeedsClosure("biased"))?;
            if rng.random_bool(p) {
                let mut entailed = Vec::new();
                for c in pool.iter() {
                    let cand = replace(c);
                    if cand != ax && dc.entails(&cand)? {
                        entailed.push(cand);
                    }
                }
                entailed.choose(rng).copied().ok_or(SamplerError::PoolExhausted(0))
            } else {
                filtered(rng, dc)
            }
        }
    }
}

/// Negatives drawn for a list of axioms.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct SampleBatch {
    /// (index of the source axiom, negative)
    pub negatives: Vec<(usize, NormalizedAxiom)>,
    /// Draws abandoned because the pool was exhausted.
    pub skipped: usize,
}

/// `count` corruptions per axiom using an existing generator; exhausted draws are skipped.
pub fn sample_with_rng<R: Rng>(
    axioms: &[NormalizedAxiom],
    count: usize,
    cfg: &SamplerConfig,
    num_concepts: usize,
    dc: Option<&DeductiveClosure>,
    rng: &mut R,
) -> Result<SampleBatch, SamplerError> {
    cfg.validate()?;
    let mut out = SampleBatch::default();
    for (i, ax) in axioms.iter().enumerate() {
        for _ in 0..count {
            match corrupt(ax, cfg, num_concepts, dc, rng) {
                Ok(n) => out.negatives.push((i, n)),
                Err(SamplerError::PoolExhausted(_)) => out.skipped += 1,
                Err(e) => return Err(e),
            }
        }
    }
    Ok(out)
}

/// Deterministic batch seeded from `cfg.seed`.
pub fn sample_batch(
    axioms: &[NormalizedAxiom],
    count: usize,
    cfg: &SamplerConfig,
    num_concepts: usize,
    dc: Option<&DeductiveClosure>,
) -> Result<SampleBatch, SamplerError> {
    let mut rng = sampler_rng(cfg.seed);
    sample_with_rng(axioms, count, cfg, num_concepts, dc, &mut rng)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::closure::{compute_closure, ClosureMode};
    use crate::kb::{parse_normalized_str, Theory};
    use crate::reasoner::classify;

    fn closure_of(t: &Theory) -> DeductiveClosure {
        let (s, rh, _) = classify(t);
        compute_closure(t, s, rh, ClosureMode::materialized()).unwrap()
    }

    fn conjunction_theory() -> Theory {
        parse_normalized_str("GCI1 A B E\nGCI0 F B\n").unwrap()
    }

    #[test]
    fn gci1_filtered_always_picks_f() {
        let t = conjunction_theory();
        let dc = closure_of(&t);
        let sig = &t.signature;
        let ax = t.axioms()[0];
        let f = sig.concept("F").unwrap();
        let cfg = SamplerConfig::default();
        let mut rng = sampler_rng(1);
        for _ in 0..500 {
            let n = corrupt(&ax, &cfg, sig.num_concepts(), Some(&dc), &mut rng).unwrap();
            assert_eq!(n.concept_slot(2), Some(f));
            assert_eq!(n.concept_slot(0), ax.concept_slot(0));
        }
    }

    #[test]
    fn singleton_pool_exhausts() {
        let t = conjunction_theory();
        let ax = t.axioms()[1];
        let cfg = SamplerConfig {
            mode: SamplingMode::Random,
            pool: Some(vec![ax.concept_slot(1).unwrap()]),
            ..SamplerConfig::default()
        };
        let err = corrupt(&ax, &cfg, t.signature.num_concepts(), None, &mut sampler_rng(0)).unwrap_err();
        assert_eq!(err, SamplerError::PoolExhausted(100));
        let batch = sample_batch(&[ax], 3, &cfg, t.signature.num_concepts(), None).unwrap();
        assert_eq!(batch.skipped, 3);
        assert!(batch.negatives.is_empty());
    }

    #[test]
    fn config_validation() {
        let bad = SamplerConfig {
            mode: SamplingMode::Biased(1.5),
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
        let bad = SamplerConfig {
            retry_limit: 0,
            ..SamplerConfig::default()
        };
        assert!(bad.validate().is_err());
        let t = conjunction_theory();
        let err = corrupt(&t.axioms()[0], &SamplerConfig::default(), 6, None, &mut sampler_rng(0)).unwrap_err();
        assert_eq!(err, SamplerError::NeedsClosure("filtered"));
    }

    #[test]
    fn default_pool_skips_bottom() {
        let p = Pool {
            explicit: None,
            num_concepts: 5,
        };
        let all: Vec<u32> = p.iter().map(|c| c.0).collect();
        assert_eq!(all, vec![0, 2, 3, 4]);
    }
}
