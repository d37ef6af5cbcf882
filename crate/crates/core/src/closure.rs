//! Approximate deductive closure per normal form.
//!
//! Inference rules are applied to the asserted axioms with subsumption and role
//! hierarchy premises taken from the reasoner. Because those premise relations
//! are transitively closed, one application of each rule already yields a set
//! that is closed under the rules; only the GCI2 role-chain rule feeds itself and
//! is iterated (over a generator set, see [`DeductiveClosure::generators`]).
//!
//! Membership can be answered two ways. Oracle mode evaluates rule premises
//! against indexed asserted axioms on demand. Materialized mode additionally
//! enumerates every member into dense bit sets, which is only possible for
//! small signatures (the GCI1 closure alone can hold |C|³ axioms).

use std::collections::{HashMap, HashSet};

use fixedbitset::FixedBitSet;
use thiserror::Error;

use crate::kb::{ConceptId, NormalizedAxiom, RoleId, Theory, Variant};
use crate::reasoner::{RoleHierarchy, SubsumptionIndex};

/// Default bound on |C|³ (and |C|²·|R|) above which materialization is refused.
pub const DEFAULT_MATERIALIZE_CAP: u128 = 100_000_000;

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ClosureMode {
    Materialized { cap: u128 },
    Oracle,
}

impl ClosureMode {
    pub fn materialized() -> Self {
        ClosureMode::Materialized {
            cap: DEFAULT_MATERIALIZE_CAP,
        }
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ClosureError {
    #[error(
        "refusing to materialize: {what} bound is {bound} axioms, above the cap of {cap}; use oracle queries instead"
    )]
    CapExceeded { what: &'static str, bound: u128, cap: u128 },
    #[error("unknown concept id {0}")]
    UnknownConcept(u32),
    #[error("unknown role id {0}")]
    UnknownRole(u32),
    #[error("closure was built in oracle mode; enumeration needs materialized mode")]
    NotMaterialized,
}

#[derive(Debug)]
struct Materialized {
    gci0: FixedBitSet,
    gci1: FixedBitSet,
    gci2: FixedBitSet,
    gci3: FixedBitSet,
}

#[derive(Debug)]
pub struct DeductiveClosure {
    index: SubsumptionIndex,
    roles: RoleHierarchy,
    nc: usize,
    nr: usize,
    /// Asserted GCI1 / GCI1_BOT (target ⊥) by first operand, in both orientations.
    gci1_told: Vec<Vec<(ConceptId, ConceptId)>>,
    /// Asserted GCI3 / GCI3_BOT (target ⊥) by filler: (role, target).
    gci3_told: Vec<Vec<(RoleId, ConceptId)>>,
    /// GCI2 generators by subject: (role, filler).
    generators: Vec<Vec<(RoleId, ConceptId)>>,
    materialized: Option<Materialized>,
}

impl DeductiveClosure {
    pub fn index(&self) -> &SubsumptionIndex {
        &self.index
    }

    pub fn roles(&self) -> &RoleHierarchy {
        &self.roles
    }

    pub fn is_materialized(&self) -> bool {
        self.materialized.is_some()
    }

    pub fn num_concepts(&self) -> usize {
        self.nc
    }

    /// Asserted GCI2 axioms closed under the role-chain rule, as (subject, role, filler).
    pub fn generators(&self) -> Vec<(ConceptId, RoleId, ConceptId)> {
        let mut out = Vec::new();
        for (a, gens) in self.generators.iter().enumerate() {
            for &(r, e) in gens {
                out.push((ConceptId(a as u32), r, e));
            }
        }
        out
    }

    fn check(&self, ax: &NormalizedAxiom) -> Result<(), ClosureError> {
        for c in ax.concepts() {
            if c.index() >= self.nc {
                return Err(ClosureError::UnknownConcept(c.0));
            }
        }
        for r in ax.roles() {
            if r.index() >= self.nr {
                return Err(ClosureError::UnknownRole(r.0));
            }
        }
        Ok(())
    }

    /// Membership test. Materialized closures answer from the stored sets,
    /// oracle closures evaluate rule premises directly.
    pub fn entails(&self, ax: &NormalizedAxiom) -> Result<bool, ClosureError> {
        self.check(ax)?;
        let ax = ax.canonical();
        match &self.materialized {
            Some(m) => Ok(self.lookup(m, &ax)),
            None => Ok(self.derive(&ax)),
        }
    }

    /// Oracle evaluation regardless of mode.
    pub fn entails_by_rules(&self, ax: &NormalizedAxiom) -> Result<bool, ClosureError> {
        self.check(ax)?;
        Ok(self.derive(&ax.canonical()))
    }

    fn lookup(&self, m: &Materialized, ax: &NormalizedAxiom) -> bool {
        let (nc, nr) = (self.nc, self.nr);
        let bot = ConceptId::BOTTOM;
        match *ax {
            NormalizedAxiom::Gci0 { sub, sup } => m.gci0.contains(sub.index() * nc + sup.index()),
            NormalizedAxiom::Gci0Bot { sub } => m.gci0.contains(sub.index() * nc + bot.index()),
            NormalizedAxiom::Gci1 { left, right, sup } => m.gci1.contains(idx3(left.index(), right.index(), sup.index(), nc, nc)),
            NormalizedAxiom::Gci1Bot { left, right } => m.gci1.contains(idx3(left.index(), right.index(), bot.index(), nc, nc)),
            NormalizedAxiom::Gci2 { sub, role, filler } => m.gci2.contains(idx3(sub.index(), role.index(), filler.index(), nr, nc)),
            NormalizedAxiom::Gci3 { role, filler, sup } => m.gci3.contains(idx3(role.index(), filler.index(), sup.index(), nc, nc)),
            NormalizedAxiom::Gci3Bot { role, filler } => m.gci3.contains(idx3(role.index(), filler.index(), bot.index(), nc, nc)),
            NormalizedAxiom::Ri0 { .. } | NormalizedAxiom::Ri1 { .. } => self.derive(ax),
        }
    }

    fn derive(&self, ax: &NormalizedAxiom) -> bool {
        let bot = ConceptId::BOTTOM;
        match *ax {
            NormalizedAxiom::Gci0 { sub, sup } => self.index.holds(sub, sup),
            NormalizedAxiom::Gci0Bot { sub } => self.index.is_unsat(sub),
            NormalizedAxiom::Gci1 { left, right, sup } => self.gci1(left, right, sup),
            NormalizedAxiom::Gci1Bot { left, right } => self.gci1(left, right, bot),
            NormalizedAxiom::Gci2 { sub, role, filler } => self.gci2(sub, role, filler),
            NormalizedAxiom::Gci3 { role, filler, sup } => self.gci3(role, filler, sup),
            NormalizedAxiom::Gci3Bot { role, filler } => self.gci3(role, filler, bot),
            NormalizedAxiom::Ri0 { sub, sup } => self.roles.is_subrole(sub, sup),
            NormalizedAxiom::Ri1 { first, second, sup } => self.roles.chain_entailed(first, second, sup),
        }
    }

    fn gci1(&self, a2: ConceptId, b2: ConceptId, e2: ConceptId) -> bool {
        let s = &self.index;
        if s.holds(a2, e2) || s.holds(b2, e2) {
            return true;
        }
        s.supers(a2).any(|a| {
            self.gci1_told[a.index()]
                .iter()
                .any(|&(b, e)| s.holds(b2, b) && s.holds(e, e2))
        })
    }

    fn gci2(&self, a2: ConceptId, r2: RoleId, b2: ConceptId) -> bool {
        let s = &self.index;
        if s.is_unsat(a2) {
            return true;
        }
        s.supers(a2).any(|a| {
            self.generators[a.index()]
                .iter()
                .any(|&(r, e)| self.roles.is_subrole(r, r2) && s.holds(e, b2))
        })
    }

    fn gci3(&self, r2: RoleId, a2: ConceptId, b2: ConceptId) -> bool {
        let s = &self.index;
        if s.holds(ConceptId::TOP, b2) || s.is_unsat(a2) {
            return true;
        }
        s.supers(a2).any(|a| {
            self.gci3_told[a.index()]
                .iter()
                .any(|&(r, b)| self.roles.is_subrole(r2, r) && s.holds(b, b2))
        })
    }

    /// Number of closure members of a variant (materialized mode only).
    pub fn count(&self, variant: Variant) -> Result<usize, ClosureError> {
        Ok(self.axioms(variant)?.len())
    }

    /// All members of a GCI variant in id order (materialized mode only).
    /// RI variants yield an empty list.
    pub fn axioms(&self, variant: Variant) -> Result<Vec<NormalizedAxiom>, ClosureError> {
        let m = self.materialized.as_ref().ok_or(ClosureError::NotMaterialized)?;
        let (nc, nr) = (self.nc, self.nr);
        let bot = ConceptId::BOTTOM.index();
        let c = |i: usize| ConceptId(i as u32);
        let r = |i: usize| RoleId(i as u32);
        let mut out = Vec::new();
        match variant {
            Variant::Gci0 | Variant::Gci0Bot => {
                for i in m.gci0.ones() {
                    let (a, b) = (i / nc, i % nc);
                    match (variant, b == bot) {
                        (Variant::Gci0, false) => out.push(NormalizedAxiom::Gci0 { sub: c(a), sup: c(b) }),
                        (Variant::Gci0Bot, true) => out.push(NormalizedAxiom::Gci0Bot { sub: c(a) }),
                        _ => {}
                    }
                }
            }
            Variant::Gci1 | Variant::Gci1Bot => {
                for i in m.gci1.ones() {
                    let (a, b, e) = split3(i, nc, nc);
                    match (variant, e == bot) {
                        (Variant::Gci1, false) => out.push(NormalizedAxiom::Gci1 {
                            left: c(a),
                            right: c(b),
                            sup: c(e),
                        }),
                        (Variant::Gci1Bot, true) => out.push(NormalizedAxiom::Gci1Bot {
                            left: c(a),
                            right: c(b),
                        }),
                        _ => {}
                    }
                }
            }
            Variant::Gci2 => {
                for i in m.gci2.ones() {
                    let (a, role, b) = split3(i, nr, nc);
                    out.push(NormalizedAxiom::Gci2 {
                        sub: c(a),
                        role: r(role),
                        filler: c(b),
                    });
                }
            }
            Variant::Gci3 | Variant::Gci3Bot => {
                for i in m.gci3.ones() {
                    let (role, a, b) = split3(i, nc, nc);
                    match (variant, b == bot) {
                        (Variant::Gci3, false) => out.push(NormalizedAxiom::Gci3 {
                            role: r(role),
                            filler: c(a),
                            sup: c(b),
                        }),
                        (Variant::Gci3Bot, true) => out.push(NormalizedAxiom::Gci3Bot {
                            role: r(role),
                            filler: c(a),
                        }),
                        _ => {}
                    }
                }
            }
            Variant::Ri0 | Variant::Ri1 => {}
        }
        Ok(out)
    }
}

#[inline]
fn idx3(i: usize, j: usize, k: usize, nj: usize, nk: usize) -> usize {
    (i * nj + j) * nk + k
}

#[inline]
fn split3(idx: usize, nj: usize, nk: usize) -> (usize, usize, usize) {
    (idx / (nj * nk), (idx / nk) % nj, idx % nk)
}

fn chain_table(rh: &RoleHierarchy) -> HashMap<(RoleId, RoleId), Vec<RoleId>> {
    let mut table: HashMap<(RoleId, RoleId), Vec<RoleId>> = HashMap::new();
    for &(r1, r2, s) in &rh.chains {
        for &a in rh.rsub(r1) {
            for &b in rh.rsub(r2) {
                let entry = table.entry((a, b)).or_default();
                if !entry.contains(&s) {
                    entry.push(s);
                }
            }
        }
    }
    table
}

/// Closes asserted GCI2 axioms under `A⊑∃r.B, X⊑∃r'.E, B⊑X, r∘r'⊑s ⊢ A⊑∃s.E`
/// (with r, r' read up to the role hierarchy).
fn gci2_generators(t: &Theory, s: &SubsumptionIndex, rh: &RoleHierarchy) -> Vec<Vec<(RoleId, ConceptId)>> {
    let nc = t.signature.num_concepts();
    let mut by_subject: Vec<Vec<(RoleId, ConceptId)>> = vec![Vec::new(); nc];
    let mut by_filler: Vec<Vec<(ConceptId, RoleId)>> = vec![Vec::new(); nc];
    let mut seen = HashSet::new();
    let mut queue = Vec::new();
    for ax in t.of_variant(Variant::Gci2) {
        if let NormalizedAxiom::Gci2 { sub, role, filler } = *ax {
            if seen.insert((sub, role, filler)) {
                queue.push((sub, role, filler));
            }
        }
    }
    let table = chain_table(rh);
    let mut head = 0;
    while head < queue.len() {
        let (a, r, b) = queue[head];
        head += 1;
        by_subject[a.index()].push((r, b));
        by_filler[b.index()].push((a, r));
        if table.is_empty() {
            continue;
        }
        let mut fresh = Vec::new();
        // (a, r, b) as the first premise
        for x in s.supers(b) {
            for &(r2, e) in &by_subject[x.index()] {
                if let Some(sups) = table.get(&(r, r2)) {
                    fresh.extend(sups.iter().map(|&sr| (a, sr, e)));
                }
            }
        }
        // (a, r, b) as the second premise, with subject a
        for b0 in s.subs(a) {
            for &(a0, r0) in &by_filler[b0.index()] {
                if let Some(sups) = table.get(&(r0, r)) {
                    fresh.extend(sups.iter().map(|&sr| (a0, sr, b)));
                }
            }
        }
        for g in fresh {
            if seen.insert(g) {
                queue.push(g);
            }
        }
    }
    by_subject
}

/// Builds the closure for a classified theory.
pub fn compute_closure(
    t: &Theory,
    s: SubsumptionIndex,
    rh: RoleHierarchy,
    mode: ClosureMode,
) -> Result<DeductiveClosure, ClosureError> {
    let nc = t.signature.num_concepts();
    let nr = t.signature.num_roles();
    if let ClosureMode::Materialized { cap } = mode {
        let cube = (nc as u128).pow(3);
        if cube > cap {
            return Err(ClosureError::CapExceeded {
                what: "GCI1",
                bound: cube,
                cap,
            });
        }
        let square_roles = (nc as u128).pow(2) * nr as u128;
        if square_roles > cap {
            return Err(ClosureError::CapExceeded {
                what: "GCI2/GCI3",
                bound: square_roles,
                cap,
            });
        }
    }
    let bot = ConceptId::BOTTOM;
    let mut gci1_told = vec![Vec::new(); nc];
    let mut gci3_told = vec![Vec::new(); nc];
    for ax in t.axioms() {
        match *ax {
            NormalizedAxiom::Gci1 { left, right, sup } => {
                gci1_told[left.index()].push((right, sup));
                gci1_told[right.index()].push((left, sup));
            }
            NormalizedAxiom::Gci1Bot { left, right } => {
                gci1_told[left.index()].push((right, bot));
                gci1_told[right.index()].push((left, bot));
            }
            NormalizedAxiom::Gci3 { role, filler, sup } => gci3_told[filler.index()].push((role, sup)),
            NormalizedAxiom::Gci3Bot { role, filler } => gci3_told[filler.index()].push((role, bot)),
            _ => {}
        }
    }
    let generators = gci2_generators(t, &s, &rh);
    let mut dc = DeductiveClosure {
        index: s,
        roles: rh,
        nc,
        nr,
        gci1_told,
        gci3_told,
        generators,
        materialized: None,
    };
    if matches!(mode, ClosureMode::Materialized { .. }) {
        dc.materialized = Some(materialize(&dc));
    }
    Ok(dc)
}

fn materialize(dc: &DeductiveClosure) -> Materialized {
    let (nc, nr) = (dc.nc, dc.nr);
    let s = &dc.index;
    let rh = &dc.roles;
    let all = |n: usize| (0..n as u32).map(ConceptId);

    let mut gci0 = FixedBitSet::with_capacity(nc * nc);
    for a in all(nc) {
        for b in s.supers(a) {
            gci0.insert(a.index() * nc + b.index());
        }
    }

    let mut gci1 = FixedBitSet::with_capacity(nc * nc * nc);
    for a in all(nc) {
        for b in all(nc) {
            for e in s.supers(a).chain(s.supers(b)) {
                gci1.insert(idx3(a.index(), b.index(), e.index(), nc, nc));
            }
        }
    }
    for (a, told) in dc.gci1_told.iter().enumerate() {
        for &(b, e) in told {
            let supers_e: Vec<ConceptId> = s.supers(e).collect();
            for a2 in s.subs(ConceptId(a as u32)) {
                for b2 in s.subs(b) {
                    for &e2 in &supers_e {
                        gci1.insert(idx3(a2.index(), b2.index(), e2.index(), nc, nc));
                    }
                }
            }
        }
    }

    let mut gci2 = FixedBitSet::with_capacity(nc * nr * nc);
    for &a in s.unsat_concepts() {
        for r in 0..nr {
            for b in 0..nc {
                gci2.insert(idx3(a.index(), r, b, nr, nc));
            }
        }
    }
    for (a, gens) in dc.generators.iter().enumerate() {
        for &(r, e) in gens {
            let supers_e: Vec<ConceptId> = s.supers(e).collect();
            for a2 in s.subs(ConceptId(a as u32)) {
                for &r2 in rh.rsup(r) {
                    for &e2 in &supers_e {
                        gci2.insert(idx3(a2.index(), r2.index(), e2.index(), nr, nc));
                    }
                }
            }
        }
    }

    let mut gci3 = FixedBitSet::with_capacity(nr * nc * nc);
    let supers_top: Vec<ConceptId> = s.supers(ConceptId::TOP).collect();
    for r in 0..nr {
        for a in 0..nc {
            for b in &supers_top {
                gci3.insert(idx3(r, a, b.index(), nc, nc));
            }
        }
        for &a in s.unsat_concepts() {
            for b in 0..nc {
                gci3.insert(idx3(r, a.index(), b, nc, nc));
            }
        }
    }
    for (a, told) in dc.gci3_told.iter().enumerate() {
        for &(r, b) in told {
            let supers_b: Vec<ConceptId> = s.supers(b).collect();
            for &r2 in rh.rsub(r) {
                for a2 in s.subs(ConceptId(a as u32)) {
                    for &b2 in &supers_b {
                        gci3.insert(idx3(r2.index(), a2.index(), b2.index(), nc, nc));
                    }
                }
            }
        }
    }

    Materialized { gci0, gci1, gci2, gci3 }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_normalized_str;
    use crate::reasoner::classify;

    fn closure(text: &str, mode: ClosureMode) -> (Theory, DeductiveClosure) {
        let t = parse_normalized_str(text).unwrap();
        let (s, rh, _) = classify(&t);
        let dc = compute_closure(&t, s, rh, mode).unwrap();
        (t, dc)
    }

    #[test]
    fn empty_theory_unconditional_rules() {
        let (t, dc) = closure("#: concept X\n#: role r\n", ClosureMode::materialized());
        let x = t.signature.concept("X").unwrap();
        let r = t.signature.role("r").unwrap();
        assert!(dc
            .entails(&NormalizedAxiom::Gci2 {
                sub: ConceptId::BOTTOM,
                role: r,
                filler: x
            })
            .unwrap());
        assert!(dc
            .entails(&NormalizedAxiom::Gci3 {
                role: r,
                filler: x,
                sup: ConceptId::TOP
            })
            .unwrap());
        assert!(dc.entails(&NormalizedAxiom::Gci0 { sub: x, sup: x }).unwrap());
    }

    #[test]
    fn sampler_example_closure() {
        let (t, dc) = closure("GCI1 A B E\nGCI0 F B\n", ClosureMode::materialized());
        let c = |n: &str| t.signature.concept(n).unwrap();
        let ent = |e: ConceptId| {
            dc.entails(&NormalizedAxiom::Gci1 {
                left: c("A"),
                right: c("B"),
                sup: e,
            })
            .unwrap()
        };
        assert!(ent(c("A")) && ent(c("B")) && ent(c("E")));
        assert!(!ent(c("F")));
    }

    #[test]
    fn cap_refuses_materialization() {
        let t = parse_normalized_str("GCI0 A B\n").unwrap();
        let (s, rh, _) = classify(&t);
        let err = compute_closure(&t, s, rh, ClosureMode::Materialized { cap: 10 }).unwrap_err();
        assert!(matches!(err, ClosureError::CapExceeded { .. }));
    }

    #[test]
    fn oracle_rejects_unknown_ids() {
        let (_, dc) = closure("GCI0 A B\n", ClosureMode::Oracle);
        assert!(dc
            .entails(&NormalizedAxiom::Gci0 {
                sub: ConceptId(40),
                sup: ConceptId::TOP
            })
            .is_err());
        assert_eq!(dc.axioms(Variant::Gci0), Err(ClosureError::NotMaterialized));
    }

    #[test]
    fn chain_rule_iterates() {
        let (t, dc) = closure(
            "GCI2 A r B\nGCI2 B r C\nGCI2 C r D\nRI1 r r r\n",
            ClosureMode::materialized(),
        );
        let c = |n: &str| t.signature.concept(n).unwrap();
        let r = t.signature.role("r").unwrap();
        assert!(dc
            .entails(&NormalizedAxiom::Gci2 {
                sub: c("A"),
                role: r,
                filler: c("D")
            })
            .unwrap());
        assert_eq!(dc.generators().len(), 6);
    }
}
