//! Positive and negative losses for ELEm, ELBE and Box²EL over every GCI
//! normal form.
//!
//! Notation: `c` centers, `r` ball radii, `o` box offsets, `v` role vectors,
//! `γ` margin, `ε` minimum size. All losses are built on a [`Tape`] so the
//! value and gradient come from the same expression.
//!
//! ELEm (each term plus `|‖c_X‖ − 1|` for every concept slot X, except the
//! negative unary ⊥ forms):
//!
//! | form      | positive                                                   | negative                                                      |
//! |-----------|------------------------------------------------------------|---------------------------------------------------------------|
//! | A ⊑ B     | `[‖cA−cB‖ + rA − rB − γ]₊`                                  | `[rA + rB − ‖cA−cB‖ + γ]₊`                                     |
//! | A⊓B ⊑ E   | `[‖cA−cB‖−rA−rB−γ]₊ + [‖cA−cE‖−rA−γ]₊ + [‖cB−cE‖−rB−γ]₊`    | `[‖cA−cB‖−rA−rB−γ]₊ + [rA−‖cA−cE‖+γ]₊ + [rB−‖cB−cE‖+γ]₊`       |
//! | A ⊑ ∃r.B  | `[‖cA+v−cB‖ + rA − rB − γ]₊`                                | `[rA + rB − ‖cA+v−cB‖ + γ]₊`                                   |
//! | ∃r.A ⊑ B  | `[‖cA−v−cB‖ − rA − rB − γ]₊`                                | `[rA + rB − ‖cA−v−cB‖ + γ]₊`                                   |
//! | A ⊑ ⊥     | `rA`                                                       | `[ε − rA]₊`                                                   |
//! | A⊓B ⊑ ⊥   | `[rA + rB − ‖cA−cB‖ + γ]₊`                                  | `[‖cA−cB‖ − rA − rB − γ]₊`                                     |
//! | ∃r.A ⊑ ⊥  | `rA`                                                       | `[ε − rA]₊`                                                   |
//!
//! ELBE, with `cont(X, Y) = ‖[|cX−cY| + oX − oY + γ]₊‖` and
//! `apart(X, Y) = ‖[−|cX−cY| + oX + oY + γ]₊‖`:
//!
//! | form      | positive          | negative                |
//! |-----------|-------------------|-------------------------|
//! | A ⊑ B     | `cont(A, B)`      | `apart(A, B)`           |
//! | A⊓B ⊑ E   | `cont(A∩B, E)`    | `apart(A∩B, E)`         |
//! | A ⊑ ∃r.B  | `cont(A+v, B)`    | `apart(A+v, B)`         |
//! | ∃r.A ⊑ B  | `cont(A−v, B)`    | `apart(A−v, B)`         |
//! | A ⊑ ⊥     | `‖oA‖`            | `[ε − ‖oA‖]₊`           |
//! | A⊓B ⊑ ⊥   | `apart(A, B)`     | `[ε − ‖[o(A∩B)]₊‖]₊`    |
//! | ∃r.A ⊑ ⊥  | `‖oA‖`            | `[ε − ‖oA‖]₊`           |
//!
//! Box²EL, with `d(X, Y) = |cX−cY| − oX − oY`,
//! `μγ(X, Y) = ‖[|cX−cY| + oX − oY − γ]₊‖`, `μ = μ₀`, `H`/`T` the head and
//! tail boxes of r and `b` the bump vectors:
//!
//! | form      | positive                      | negative                          |
//! |-----------|-------------------------------|-----------------------------------|
//! | A ⊑ B     | `μγ(A, B)`                    | `‖[−(d(A, B) + γ)]₊‖`             |
//! | A⊓B ⊑ E   | `μγ(A∩B, E)`                  | `‖[−(d(A∩B, E) + γ)]₊‖`           |
//! | A ⊑ ∃r.B  | `μγ(A+bB, H) + μγ(B+bA, T)`   | `(δ − μ(A+bB, H))² + (δ − μ(B+bA, T))²` |
//! | ∃r.A ⊑ B  | `μγ(H−bA, B)`                 | `(δ − μ(H−bA, B))²`               |
//! | A ⊑ ⊥     | `‖oA‖`                        | `[ε − ‖oA‖]₊`                     |
//! | A⊓B ⊑ ⊥   | `‖[−(d(A, B) + γ)]₊‖`         | `[ε − ‖[o(A∩B)]₊‖]₊`              |
//! | ∃r.A ⊑ ⊥  | `‖oA‖`                        | `[ε − ‖oA‖]₊`                     |
//!
//! Box²EL batches additionally pay `λ · mean_C ‖b_C‖`.

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::kb::{ConceptId, NormalizedAxiom, RoleId, Variant};
use crate::model::{GeometricModel, ModelKind};
use crate::tape::{Tape, Var};

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Polarity {
    Positive,
    Negative,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash)]
pub struct LossRequest {
    pub axiom: NormalizedAxiom,
    pub polarity: Polarity,
}

impl LossRequest {
    pub fn positive(axiom: NormalizedAxiom) -> Self {
        LossRequest {
            axiom,
            polarity: Polarity::Positive,
        }
    }

    pub fn negative(axiom: NormalizedAxiom) -> Self {
        LossRequest {
            axiom,
            polarity: Polarity::Negative,
        }
    }
}

#[derive(Debug, Error, Clone, PartialEq)]
pub enum LossError {
    #[error("loss for model {expected} called on a {found} model")]
    WrongModel { expected: ModelKind, found: ModelKind },
    #[error("concept id {0} has no parameters")]
    UnknownConcept(u32),
    #[error("role id {0} has no parameters")]
    UnknownRole(u32),
    #[error("{0} axioms have no loss")]
    RoleAxiom(Variant),
}

/// Value of one loss plus the distance to the nearest non-differentiable point.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct LossPoint {
    pub value: f64,
    pub kink: f64,
}

struct Builder<'a> {
    m: &'a GeometricModel,
    t: &'a mut Tape,
}

struct TBox {
    c: Vec<Var>,
    o: Vec<Var>,
}

impl Builder<'_> {
    fn leaves(&mut self, range: std::ops::Range<usize>) -> Vec<Var> {
        range.map(|i| self.t.leaf(i, self.m.params[i])).collect()
    }

    fn center(&mut self, c: ConceptId) -> Vec<Var> {
        let r = self.m.center_range(c);
        self.leaves(r)
    }

    fn radius(&mut self, c: ConceptId) -> Var {
        let i = self.m.radius_index(c);
        self.t.leaf(i, self.m.params[i])
    }

    fn role_vec(&mut self, r: RoleId) -> Vec<Var> {
        let range = self.m.role_vector_range(r);
        self.leaves(range)
    }

    fn cbox(&mut self, c: ConceptId) -> TBox {
        let cr = self.m.center_range(c);
        let or = self.m.offset_range(c);
        TBox {
            c: self.leaves(cr),
            o: self.leaves(or),
        }
    }

    fn bump(&mut self, c: ConceptId) -> Vec<Var> {
        let r = self.m.bump_range(c);
        self.leaves(r)
    }

    fn head(&mut self, r: RoleId) -> TBox {
        let (c, o) = self.m.head_ranges(r);
        TBox {
            c: self.leaves(c),
            o: self.leaves(o),
        }
    }

    fn tail(&mut self, r: RoleId) -> TBox {
        let (c, o) = self.m.tail_ranges(r);
        TBox {
            c: self.leaves(c),
            o: self.leaves(o),
        }
    }

    fn vsub(&mut self, a: &[Var], b: &[Var]) -> Vec<Var> {
        a.iter().zip(b).map(|(&x, &y)| self.t.sub(x, y)).collect()
    }

    fn vadd(&mut self, a: &[Var], b: &[Var]) -> Vec<Var> {
        a.iter().zip(b).map(|(&x, &y)| self.t.add(x, y)).collect()
    }

    /// `‖a + sign·v − b‖` (v optional).
    fn dist(&mut self, a: &[Var], v: Option<(&[Var], f64)>, b: &[Var]) -> Var {
        let shifted = self.shift(a, v);
        let d = self.vsub(&shifted, b);
        self.t.norm(&d)
    }

    fn shift(&mut self, a: &[Var], v: Option<(&[Var], f64)>) -> Vec<Var> {
        match v {
            None => a.to_vec(),
            Some((v, sign)) if sign >= 0.0 => self.vadd(a, v),
            Some((v, _)) => self.vsub(a, v),
        }
    }

    fn shifted_box(&mut self, b: TBox, v: &[Var], sign: f64) -> TBox {
        TBox {
            c: self.shift(&b.c, Some((v, sign))),
            o: b.o,
        }
    }

    fn reg(&mut self, c: &[Var]) -> Var {
        let n = self.t.norm(c);
        let d = self.t.add_const(n, -1.0);
        self.t.abs(d)
    }

    /// `[Σ kᵢ·xᵢ + s]₊`
    fn hinge(&mut self, terms: &[(f64, Var)], s: f64) -> Var {
        let scaled: Vec<Var> = terms.iter().map(|&(k, x)| self.t.scale(x, k)).collect();
        let sum = self.t.sum(&scaled);
        let u = self.t.add_const(sum, s);
        self.t.relu(u)
    }

    fn intersection(&mut self, a: &TBox, b: &TBox) -> TBox {
        let n = a.c.len();
        let mut c = Vec::with_capacity(n);
        let mut o = Vec::with_capacity(n);
        for i in 0..n {
            let la = self.t.sub(a.c[i], a.o[i]);
            let lb = self.t.sub(b.c[i], b.o[i]);
            let ua = self.t.add(a.c[i], a.o[i]);
            let ub = self.t.add(b.c[i], b.o[i]);
            let lo = self.t.max(la, lb);
            let hi = self.t.min(ua, ub);
            let s = self.t.add(lo, hi);
            let d = self.t.sub(hi, lo);
            c.push(self.t.scale(s, 0.5));
            o.push(self.t.scale(d, 0.5));
        }
        TBox { c, o }
    }

    /// `‖[α|cX − cY| + oX + βoY + s]₊‖` coordinate-wise.
    fn box_hinge(&mut self, x: &TBox, y: &TBox, alpha: f64, beta: f64, s: f64) -> Var {
        let n = x.c.len();
        let mut parts = Vec::with_capacity(n);
        for i in 0..n {
            let dc = self.t.sub(x.c[i], y.c[i]);
            let ad = self.t.abs(dc);
            let h = self.hinge(&[(alpha, ad), (1.0, x.o[i]), (beta, y.o[i])], s);
            parts.push(h);
        }
        self.t.norm(&parts)
    }

    /// Containment measure with the coordinate shift `s`: `‖[|cX−cY| + oX − oY + s]₊‖`.
    fn contain(&mut self, inner: &TBox, outer: &TBox, s: f64) -> Var {
        self.box_hinge(inner, outer, 1.0, -1.0, s)
    }

    /// `‖[−|cX−cY| + oX + oY + s]₊‖`, zero iff the boxes are apart by `s` in every coordinate.
    fn apart(&mut self, x: &TBox, y: &TBox, s: f64) -> Var {
        self.box_hinge(x, y, -1.0, 1.0, s)
    }

    fn offset_norm(&mut self, b: &TBox) -> Var {
        self.t.norm(&b.o)
    }

    fn clamped_offset_norm(&mut self, b: &TBox) -> Var {
        let parts: Vec<Var> = b.o.iter().map(|&o| self.t.relu(o)).collect();
        self.t.norm(&parts)
    }

    fn eps_hinge(&mut self, x: Var) -> Var {
        let eps = self.m.hyper.epsilon;
        self.hinge(&[(-1.0, x)], eps)
    }

    /// `(δ − x)²`
    fn delta_sq(&mut self, x: Var) -> Var {
        let dv = self.t.constant(self.m.hyper.delta);
        let d = self.t.sub(dv, x);
        self.t.square(d)
    }
}

fn check_ids(m: &GeometricModel, ax: &NormalizedAxiom) -> Result<(), LossError> {
    if let Some(c) = ax.concepts().into_iter().find(|c| c.index() >= m.num_concepts) {
        return Err(LossError::UnknownConcept(c.0));
    }
    if let Some(r) = ax.roles().into_iter().find(|r| r.index() >= m.num_roles) {
        return Err(LossError::UnknownRole(r.0));
    }
    Ok(())
}

fn build(m: &GeometricModel, req: &LossRequest, t: &mut Tape) -> Result<Var, LossError> {
    use NormalizedAxiom::*;
    check_ids(m, &req.axiom)?;
    let ax = req.axiom.canonical();
    if !ax.variant().is_gci() {
        return Err(LossError::RoleAxiom(ax.variant()));
    }
    let neg = req.polarity == Polarity::Negative;
    let g = m.hyper.margin;
    let mut b = Builder { m, t };
    let out = match m.kind {
        ModelKind::Elem => {
            let mut regs = Vec::new();
            let main = match ax {
                Gci0 { sub, sup } => {
                    let (ca, cb) = (b.center(sub), b.center(sup));
                    let (ra, rb) = (b.radius(sub), b.radius(sup));
                    let d = b.dist(&ca, None, &cb);
                    regs.extend([b.reg(&ca), b.reg(&cb)]);
                    if neg {
                        b.hinge(&[(1.0, ra), (1.0, rb), (-1.0, d)], g)
                    } else {
                        b.hinge(&[(1.0, d), (1.0, ra), (-1.0, rb)], -g)
                    }
                }
                Gci1 { left, right, sup } => {
                    let (ca, cb, ce) = (b.center(left), b.center(right), b.center(sup));
                    let (ra, rb) = (b.radius(left), b.radius(right));
                    let dab = b.dist(&ca, None, &cb);
                    let dae = b.dist(&ca, None, &ce);
                    let dbe = b.dist(&cb, None, &ce);
                    regs.extend([b.reg(&ca), b.reg(&cb), b.reg(&ce)]);
                    let h1 = b.hinge(&[(1.0, dab), (-1.0, ra), (-1.0, rb)], -g);
                    let (h2, h3) = if neg {
                        (b.hinge(&[(1.0, ra), (-1.0, dae)], g), b.hinge(&[(1.0, rb), (-1.0, dbe)], g))
                    } else {
                        (b.hinge(&[(1.0, dae), (-1.0, ra)], -g), b.hinge(&[(1.0, dbe), (-1.0, rb)], -g))
                    };
                    b.t.sum(&[h1, h2, h3])
                }
                Gci2 { sub, role, filler } => {
                    let (ca, cb, v) = (b.center(sub), b.center(filler), b.role_vec(role));
                    let (ra, rb) = (b.radius(sub), b.radius(filler));
                    let d = b.dist(&ca, Some((&v, 1.0)), &cb);
                    regs.extend([b.reg(&ca), b.reg(&cb)]);
                    if neg {
                        b.hinge(&[(1.0, ra), (1.0, rb), (-1.0, d)], g)
                    } else {
                        b.hinge(&[(1.0, d), (1.0, ra), (-1.0, rb)], -g)
                    }
                }
                Gci3 { role, filler, sup } => {
                    let (ca, cb, v) = (b.center(filler), b.center(sup), b.role_vec(role));
                    let (ra, rb) = (b.radius(filler), b.radius(sup));
                    let d = b.dist(&ca, Some((&v, -1.0)), &cb);
                    regs.extend([b.reg(&ca), b.reg(&cb)]);
                    if neg {
                        b.hinge(&[(1.0, ra), (1.0, rb), (-1.0, d)], g)
                    } else {
                        b.hinge(&[(1.0, d), (-1.0, ra), (-1.0, rb)], -g)
                    }
                }
                Gci0Bot { sub: a } | Gci3Bot { filler: a, .. } => {
                    let ra = b.radius(a);
                    if neg {
                        b.eps_hinge(ra)
                    } else {
                        let ca = b.center(a);
                        regs.push(b.reg(&ca));
                        ra
                    }
                }
                Gci1Bot { left, right } => {
                    let (ca, cb) = (b.center(left), b.center(right));
                    let (ra, rb) = (b.radius(left), b.radius(right));
                    let d = b.dist(&ca, None, &cb);
                    regs.extend([b.reg(&ca), b.reg(&cb)]);
                    if neg {
                        b.hinge(&[(1.0, d), (-1.0, ra), (-1.0, rb)], -g)
                    } else {
                        b.hinge(&[(1.0, ra), (1.0, rb), (-1.0, d)], g)
                    }
                }
                Ri0 { .. } | Ri1 { .. } => unreachable!(),
            };
            regs.insert(0, main);
            b.t.sum(&regs)
        }
        ModelKind::Elbe => match ax {
            Gci0 { sub, sup } => {
                let (x, y) = (b.cbox(sub), b.cbox(sup));
                if neg {
                    b.apart(&x, &y, g)
                } else {
                    b.contain(&x, &y, g)
                }
            }
            Gci1 { left, right, sup } => {
                let (x, y, e) = (b.cbox(left), b.cbox(right), b.cbox(sup));
                let i = b.intersection(&x, &y);
                if neg {
                    b.apart(&i, &e, g)
                } else {
                    b.contain(&i, &e, g)
                }
            }
            Gci2 { sub, role, filler } | Gci3 { role, filler: sub, sup: filler } => {
                let sign = if ax.variant() == Variant::Gci2 { 1.0 } else { -1.0 };
                let (x, y, v) = (b.cbox(sub), b.cbox(filler), b.role_vec(role));
                let x = b.shifted_box(x, &v, sign);
                if neg {
                    b.apart(&x, &y, g)
                } else {
                    b.contain(&x, &y, g)
                }
            }
            Gci0Bot { sub: a } | Gci3Bot { filler: a, .. } => {
                let x = b.cbox(a);
                let n = b.offset_norm(&x);
                if neg {
                    b.eps_hinge(n)
                } else {
                    n
                }
            }
            Gci1Bot { left, right } => {
                let (x, y) = (b.cbox(left), b.cbox(right));
                if neg {
                    let i = b.intersection(&x, &y);
                    let n = b.clamped_offset_norm(&i);
                    b.eps_hinge(n)
                } else {
                    b.apart(&x, &y, g)
                }
            }
            Ri0 { .. } | Ri1 { .. } => unreachable!(),
        },
        ModelKind::Box2El => match ax {
            Gci0 { sub, sup } => {
                let (x, y) = (b.cbox(sub), b.cbox(sup));
                if neg {
                    b.apart(&x, &y, -g)
                } else {
                    b.contain(&x, &y, -g)
                }
            }
            Gci1 { left, right, sup } => {
                let (x, y, e) = (b.cbox(left), b.cbox(right), b.cbox(sup));
                let i = b.intersection(&x, &y);
                if neg {
                    b.apart(&i, &e, -g)
                } else {
                    b.contain(&i, &e, -g)
                }
            }
            Gci2 { sub, role, filler } => {
                let (x, y) = (b.cbox(sub), b.cbox(filler));
                let (bx, by) = (b.bump(sub), b.bump(filler));
                let (h, tl) = (b.head(role), b.tail(role));
                let xb = b.shifted_box(x, &by, 1.0);
                let yb = b.shifted_box(y, &bx, 1.0);
                if neg {
                    let mh = b.contain(&xb, &h, 0.0);
                    let mt = b.contain(&yb, &tl, 0.0);
                    let (sh, st) = (b.delta_sq(mh), b.delta_sq(mt));
                    b.t.add(sh, st)
                } else {
                    let mh = b.contain(&xb, &h, -g);
                    let mt = b.contain(&yb, &tl, -g);
                    b.t.add(mh, mt)
                }
            }
            Gci3 { role, filler, sup } => {
                let h = b.head(role);
                let ba = b.bump(filler);
                let y = b.cbox(sup);
                let hb = b.shifted_box(h, &ba, -1.0);
                if neg {
                    let mu = b.contain(&hb, &y, 0.0);
                    b.delta_sq(mu)
                } else {
                    b.contain(&hb, &y, -g)
                }
            }
            Gci0Bot { sub: a } | Gci3Bot { filler: a, .. } => {
                let x = b.cbox(a);
                let n = b.offset_norm(&x);
                if neg {
                    b.eps_hinge(n)
                } else {
                    n
                }
            }
            Gci1Bot { left, right } => {
                let (x, y) = (b.cbox(left), b.cbox(right));
                if neg {
                    let i = b.intersection(&x, &y);
                    let n = b.clamped_offset_norm(&i);
                    b.eps_hinge(n)
                } else {
                    b.apart(&x, &y, -g)
                }
            }
            Ri0 { .. } | Ri1 { .. } => unreachable!(),
        },
    };
    Ok(out)
}

fn evaluate(m: &GeometricModel, req: &LossRequest) -> Result<LossPoint, LossError> {
    let mut t = Tape::new();
    let out = build(m, req, &mut t)?;
    Ok(LossPoint {
        value: t.value(out),
        kink: t.kink_distance(),
    })
}

fn expect(m: &GeometricModel, kind: ModelKind) -> Result<(), LossError> {
    if m.kind == kind {
        Ok(())
    } else {
        Err(LossError::WrongModel {
            expected: kind,
            found: m.kind,
        })
    }
}

pub fn elem_loss(m: &GeometricModel, req: &LossRequest) -> Result<f64, LossError> {
    expect(m, ModelKind::Elem)?;
    axiom_loss(m, req)
}

pub fn elbe_loss(m: &GeometricModel, req: &LossRequest) -> Result<f64, LossError> {
    expect(m, ModelKind::Elbe)?;
    axiom_loss(m, req)
}

pub fn box2el_loss(m: &GeometricModel, req: &LossRequest) -> Result<f64, LossError> {
    expect(m, ModelKind::Box2El)?;
    axiom_loss(m, req)
}

/// Loss of one request under the model's own kind.
pub fn axiom_loss(m: &GeometricModel, req: &LossRequest) -> Result<f64, LossError> {
    evaluate(m, req).map(|p| p.value)
}

/// Loss value together with its distance to the nearest kink.
pub fn axiom_loss_point(m: &GeometricModel, req: &LossRequest) -> Result<LossPoint, LossError> {
    evaluate(m, req)
}

/// Adds `weight · ∇loss` into `grad` and returns the loss value.
pub fn axiom_loss_grad(m: &GeometricModel, req: &LossRequest, grad: &mut [f64], weight: f64) -> Result<f64, LossError> {
    let mut t = Tape::new();
    let out = build(m, req, &mut t)?;
    t.backward(out, weight, grad);
    Ok(t.value(out))
}

fn sparse_grad(m: &GeometricModel, req: &LossRequest, weight: f64) -> Result<(f64, Vec<(usize, f64)>), LossError> {
    let mut t = Tape::new();
    let out = build(m, req, &mut t)?;
    let mut g = Vec::new();
    t.backward_with(out, weight, |i, x| g.push((i, x)));
    Ok((t.value(out), g))
}

/// `λ · mean_C ‖bump_C‖`, zero for models without bumps.
pub fn bump_regularizer(m: &GeometricModel, grad: Option<&mut [f64]>) -> f64 {
    if m.kind != ModelKind::Box2El || m.num_concepts == 0 || m.hyper.lambda == 0.0 {
        return 0.0;
    }
    let k = m.hyper.lambda / m.num_concepts as f64;
    let mut total = 0.0;
    let mut grad = grad;
    for c in 0..m.num_concepts as u32 {
        let r = m.bump_range(ConceptId(c));
        let n = crate::geometry::norm(&m.params[r.clone()]);
        total += n;
        if let Some(g) = grad.as_deref_mut() {
            if n > 0.0 {
                for i in r {
                    g[i] += k * m.params[i] / n;
                }
            }
        }
    }
    k * total
}

fn group_weights(reqs: &[LossRequest]) -> BTreeMap<(usize, Polarity), usize> {
    let mut groups = BTreeMap::new();
    for r in reqs {
        *groups.entry((r.axiom.canonical().variant().index(), r.polarity)).or_insert(0) += 1;
    }
    groups
}

/// Mean loss within each (variant, polarity) group, summed over groups, plus
/// the bump regularizer for Box²EL.
pub fn total_loss(m: &GeometricModel, reqs: &[LossRequest]) -> Result<f64, LossError> {
    let groups = group_weights(reqs);
    let values: Vec<f64> = reqs
        .par_iter()
        .map(|r| {
            let n = groups[&(r.axiom.canonical().variant().index(), r.polarity)];
            axiom_loss(m, r).map(|v| v / n as f64)
        })
        .collect::<Result<_, _>>()?;
    Ok(values.iter().sum::<f64>() + bump_regularizer(m, None))
}

/// [`total_loss`] with its gradient written into `grad` (which is zeroed first).
pub fn total_loss_grad(m: &GeometricModel, reqs: &[LossRequest], grad: &mut [f64]) -> Result<f64, LossError> {
    grad.iter_mut().for_each(|g| *g = 0.0);
    let groups = group_weights(reqs);
    let parts: Vec<(f64, Vec<(usize, f64)>)> = reqs
        .par_iter()
        .map(|r| {
            let w = 1.0 / groups[&(r.axiom.canonical().variant().index(), r.polarity)] as f64;
            sparse_grad(m, r, w).map(|(v, g)| (v * w, g))
        })
        .collect::<Result<_, _>>()?;
    let mut total = 0.0;
    for (v, g) in parts {
        total += v;
        for (i, x) in g {
            grad[i] += x;
        }
    }
    Ok(total + bump_regularizer(m, Some(grad)))
}
