//! Two-dimensional toy problem: two disjoint functions `{GO1}`, `{GO2}`, two
//! disjoint classes `A`, `B` with `∃has_function.{GO1} ⊑ B` and
//! `∃has_function.{GO2} ⊑ A`, and five proteins per function.
//!
//! [`run_toy`] trains one model under one of four regimes (negatives for GCI2
//! only or for every form, random or filtered) and checks the geometry of the
//! result against the axioms about `{GO2}`.

use serde::{Deserialize, Serialize};

use crate::closure::{compute_closure, ClosureMode};
use crate::geometry::{box_intersection, containment_measure_mu, norm, AABox};
use crate::kb::{parse_normalized_str, ConceptId, RoleId, Signature, Theory};
use crate::loss::{total_loss, LossRequest};
use crate::model::{GeometricModel, Hyper, ModelKind};
use crate::reasoner::classify;
use crate::sampler::{SamplerConfig, SamplingMode};
use crate::trainer::{train, NegativeScope, TrainConfig, TrainError, TrainLog};

pub const TOY_TOLERANCE: f64 = 0.05;

pub fn toy_source() -> String {
    let mut s = String::from(
        "GCI1_BOT {GO1} {GO2}\nGCI1_BOT A B\nGCI3 has_function {GO1} B\nGCI3 has_function {GO2} A\n",
    );
    for i in 1..=5 {
        s.push_str(&format!("GCI2 {{P{i}}} has_function {{GO1}}\n"));
    }
    for i in 1..=5 {
        s.push_str(&format!("GCI2 {{Q{i}}} has_function {{GO2}}\n"));
    }
    s
}

pub fn toy_theory() -> Theory {
    parse_normalized_str(&toy_source()).expect("toy theory parses")
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ToyRegime {
    Gci2Random,
    Gci2Filtered,
    AllRandom,
    AllFiltered,
}

impl ToyRegime {
    pub const ALL: [ToyRegime; 4] = [
        ToyRegime::Gci2Random,
        ToyRegime::Gci2Filtered,
        ToyRegime::AllRandom,
        ToyRegime::AllFiltered,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            ToyRegime::Gci2Random => "gci2-random",
            ToyRegime::Gci2Filtered => "gci2-filtered",
            ToyRegime::AllRandom => "all-random",
            ToyRegime::AllFiltered => "all-filtered",
        }
    }

    pub fn scope(self) -> NegativeScope {
        match self {
            ToyRegime::Gci2Random | ToyRegime::Gci2Filtered => NegativeScope::Gci2Only,
            _ => NegativeScope::AllForms,
        }
    }

    pub fn mode(self) -> SamplingMode {
        match self {
            ToyRegime::Gci2Random | ToyRegime::AllRandom => SamplingMode::Random,
            _ => SamplingMode::Filtered,
        }
    }
}

/// Training settings for the toy runs: n = 2, γ = 0, ε = 0.1, δ = 1, λ = 0,
/// learning rate 0.01, full batches, one negative per axiom.
pub fn toy_config(model: ModelKind, regime: ToyRegime, seed: u64) -> TrainConfig {
    TrainConfig {
        model,
        dim: 2,
        learning_rate: 0.01,
        hyper: Hyper {
            margin: 0.0,
            epsilon: 0.1,
            delta: 1.0,
            lambda: 0.0,
        },
        epochs: 2000,
        batch_size: 64,
        seed,
        negative_scope: regime.scope(),
        negatives_per_axiom: 1,
        sampler: SamplerConfig {
            mode: regime.mode(),
            seed,
            ..SamplerConfig::default()
        },
        patience: 10,
        early_stop: 100,
        ..TrainConfig::default()
    }
}

#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct ToyAssertion {
    pub name: String,
    /// Amount by which the condition is violated (≤ 0 when it holds exactly).
    pub violation: f64,
    pub passed: bool,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ToyOutcome {
    pub model: ModelKind,
    pub regime: ToyRegime,
    pub final_positive_loss: f64,
    pub assertions: Vec<ToyAssertion>,
    pub log: TrainLog,
}

impl ToyOutcome {
    pub fn all_passed(&self) -> bool {
        self.assertions.iter().all(|a| a.passed)
    }
}

fn assertion(name: String, violation: f64) -> ToyAssertion {
    ToyAssertion {
        passed: violation <= TOY_TOLERANCE,
        name,
        violation,
    }
}

fn shifted(b: &AABox, v: &[f64], sign: f64) -> AABox {
    b.translated(v, sign).expect("same dimension")
}

fn mu(inner: &AABox, outer: &AABox) -> f64 {
    containment_measure_mu(inner, outer).expect("same dimension")
}

/// Geometric checks for `{GO1} ⊓ {GO2} ⊑ ⊥`, `{Qi} ⊑ ∃has_function.{GO2}`
/// and `∃has_function.{GO2} ⊑ A`, each with slack [`TOY_TOLERANCE`].
pub fn toy_assertions(m: &GeometricModel, sig: &Signature) -> Vec<ToyAssertion> {
    let c = |n: &str| sig.concept(n).expect("toy concept");
    let hf = sig.role("has_function").expect("toy role");
    let (go1, go2, a) = (c("{GO1}"), c("{GO2}"), c("A"));
    let qs: Vec<ConceptId> = (1..=5).map(|i| c(&format!("{{Q{i}}}"))).collect();
    let mut out = Vec::new();
    match m.kind {
        ModelKind::Elem => {
            let (b1, b2, ba) = (m.ball(go1), m.ball(go2), m.ball(a));
            let v = m.role_vector(hf);
            let dist = |x: &[f64], y: &[f64], s: f64| {
                let d: Vec<f64> = (0..x.len()).map(|i| x[i] + s * v[i] - y[i]).collect();
                norm(&d)
            };
            out.push(assertion(
                "{GO1} ⊓ {GO2} ⊑ ⊥".into(),
                b1.radius + b2.radius - dist(&b1.center, &b2.center, 0.0),
            ));
            for (i, &q) in qs.iter().enumerate() {
                let bq = m.ball(q);
                out.push(assertion(
                    format!("{{Q{}}} ⊑ ∃has_function.{{GO2}}", i + 1),
                    dist(&bq.center, &b2.center, 1.0) + bq.radius - b2.radius,
                ));
            }
            out.push(assertion(
                "∃has_function.{GO2} ⊑ A".into(),
                dist(&b2.center, &ba.center, -1.0) - b2.radius - ba.radius,
            ));
        }
        ModelKind::Elbe | ModelKind::Box2El => {
            let (x1, x2, xa) = (m.concept_box(go1), m.concept_box(go2), m.concept_box(a));
            let inter = box_intersection(&x1, &x2).expect("same dimension");
            // disjoint iff some intersection offset is negative
            let overlap = inter.offset.iter().cloned().fold(f64::INFINITY, f64::min).max(0.0);
            out.push(assertion("{GO1} ⊓ {GO2} ⊑ ⊥".into(), overlap));
            for (i, &q) in qs.iter().enumerate() {
                let xq = m.concept_box(q);
                let viol = if m.kind == ModelKind::Elbe {
                    mu(&shifted(&xq, m.role_vector(hf), 1.0), &x2)
                } else {
                    mu(&shifted(&xq, m.bump(go2), 1.0), &m.head(hf)) + mu(&shifted(&x2, m.bump(q), 1.0), &m.tail(hf))
                };
                out.push(assertion(format!("{{Q{}}} ⊑ ∃has_function.{{GO2}}", i + 1), viol));
            }
            let viol = if m.kind == ModelKind::Elbe {
                mu(&shifted(&x2, m.role_vector(hf), -1.0), &xa)
            } else {
                mu(&shifted(&m.head(hf), m.bump(go2), -1.0), &xa)
            };
            out.push(assertion("∃has_function.{GO2} ⊑ A".into(), viol));
        }
    }
    out
}

pub fn run_toy(model: ModelKind, regime: ToyRegime, seed: u64) -> Result<(GeometricModel, ToyOutcome), TrainError> {
    let t = toy_theory();
    let (s, rh, _) = classify(&t);
    let dc = compute_closure(&t, s, rh, ClosureMode::materialized()).expect("toy closure is small");
    let cfg = toy_config(model, regime, seed);
    let (m, log) = train(&t, &cfg, Some(&dc), &[])?;
    let pos: Vec<LossRequest> = t.axioms().iter().map(|a| LossRequest::positive(*a)).collect();
    let final_positive_loss = total_loss(&m, &pos)?;
    let assertions = toy_assertions(&m, &t.signature);
    Ok((
        m,
        ToyOutcome {
            model,
            regime,
            final_positive_loss,
            assertions,
            log,
        },
    ))
}

/// One row per concept: name, center coordinates, then radius (ELEm) or
/// offsets (and bumps for Box²EL).
pub fn concepts_csv(m: &GeometricModel, sig: &Signature) -> String {
    let n = m.dim;
    let mut header = vec!["concept".to_string()];
    header.extend((0..n).map(|i| format!("c{i}")));
    match m.kind {
        ModelKind::Elem => header.push("radius".into()),
        _ => header.extend((0..n).map(|i| format!("o{i}"))),
    }
    if m.kind == ModelKind::Box2El {
        header.extend((0..n).map(|i| format!("bump{i}")));
    }
    let mut out = header.join(",") + "\n";
    for c in sig.concept_ids() {
        let mut row = vec![csv_field(sig.concept_name(c))];
        let vals: Vec<f64> = match m.kind {
            ModelKind::Elem => {
                let b = m.ball(c);
                b.center.into_iter().chain([b.radius]).collect()
            }
            ModelKind::Elbe => {
                let b = m.concept_box(c);
                b.center.into_iter().chain(b.offset).collect()
            }
            ModelKind::Box2El => {
                let b = m.concept_box(c);
                b.center.into_iter().chain(b.offset).chain(m.bump(c).iter().copied()).collect()
            }
        };
        row.extend(vals.iter().map(|v| v.to_string()));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

/// One row per role: translation vector, or head and tail boxes for Box²EL.
pub fn roles_csv(m: &GeometricModel, sig: &Signature) -> String {
    let n = m.dim;
    let mut header = vec!["role".to_string()];
    match m.kind {
        ModelKind::Box2El => {
            for p in ["head_c", "head_o", "tail_c", "tail_o"] {
                header.extend((0..n).map(|i| format!("{p}{i}")));
            }
        }
        _ => header.extend((0..n).map(|i| format!("v{i}"))),
    }
    let mut out = header.join(",") + "\n";
    for r in sig.role_ids() {
        let mut row = vec![csv_field(sig.role_name(r))];
        let vals: Vec<f64> = match m.kind {
            ModelKind::Box2El => {
                let (h, t) = (m.head(r), m.tail(r));
                h.center.into_iter().chain(h.offset).chain(t.center).chain(t.offset).collect()
            }
            _ => m.role_vector(r).to_vec(),
        };
        row.extend(vals.iter().map(|v| v.to_string()));
        out.push_str(&row.join(","));
        out.push('\n');
    }
    out
}

fn csv_field(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Text report: one PASS/FAIL line per assertion.
pub fn assertion_report(o: &ToyOutcome) -> String {
    let mut s = format!(
        "model {} regime {} final positive loss {:.6}\n",
        o.model,
        o.regime.tag(),
        o.final_positive_loss
    );
    for a in &o.assertions {
        s.push_str(&format!(
            "{} {} (violation {:.4}, tolerance {})\n",
            if a.passed { "PASS" } else { "FAIL" },
            a.name,
            a.violation,
            TOY_TOLERANCE
        ));
    }
    s
}

/// Role id of `has_function` in [`toy_theory`].
pub fn toy_role(sig: &Signature) -> RoleId {
    sig.role("has_function").expect("toy role")
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn toy_theory_shape() {
        let t = toy_theory();
        assert_eq!(t.len(), 14);
        assert_eq!(t.signature.num_concepts(), 16);
        assert_eq!(t.signature.num_roles(), 1);
    }

    #[test]
    fn csv_has_one_row_per_concept() {
        let t = toy_theory();
        for kind in ModelKind::ALL {
            let m = GeometricModel::zeros(kind, 2, 16, 1, Hyper::default());
            assert_eq!(concepts_csv(&m, &t.signature).lines().count(), 17);
            assert_eq!(roles_csv(&m, &t.signature).lines().count(), 2);
        }
    }
}
