//! Independent reference implementations used by the integration tests.
//!
//! Everything here is deliberately naive: full rescans until nothing changes,
//! explicit fact sets, and exhaustive finite-model enumeration.

#![allow(dead_code)]

use std::collections::BTreeSet;

use geoel::kb::{parse_normalized_str, ConceptId, NormalizedAxiom, RoleId, Theory};
use rand::Rng;

pub const PROTEIN_NF: &str = include_str!("../fixtures/protein.nf");

pub fn protein_theory() -> Theory {
    parse_normalized_str(PROTEIN_NF).unwrap()
}

/// Random normalized theory over `nc` named concepts (plus ⊤/⊥) and `nr` roles.
pub fn random_theory<R: Rng>(rng: &mut R, nc: usize, nr: usize, max_axioms: usize) -> Theory {
    let mut text = String::new();
    for i in 0..nc {
        text.push_str(&format!("#: concept C{i}\n"));
    }
    for i in 0..nr {
        text.push_str(&format!("#: role r{i}\n"));
    }
    let concept = |rng: &mut R| -> String {
        let k = rng.random_range(0..nc + 2);
        match k {
            k if k == nc => "owl:Thing".to_owned(),
            k if k == nc + 1 => "owl:Nothing".to_owned(),
            k => format!("C{k}"),
        }
    };
    let n = rng.random_range(0..=max_axioms);
    for _ in 0..n {
        let kinds = if nr == 0 { 4 } else { 9 };
        let v = rng.random_range(0..kinds);
        let role = |rng: &mut R| format!("r{}", rng.random_range(0..nr.max(1)));
        // weights favour the concept forms
        let line = match v {
            0 => format!("GCI0 {} {}", concept(rng), concept(rng)),
            1 => format!("GCI1 {} {} {}", concept(rng), concept(rng), concept(rng)),
            2 => format!("GCI0_BOT {}", concept(rng)),
            3 => format!("GCI1_BOT {} {}", concept(rng), concept(rng)),
            4 => format!("GCI2 {} {} {}", concept(rng), role(rng), concept(rng)),
            5 => format!("GCI3 {} {} {}", role(rng), concept(rng), concept(rng)),
            6 => format!("GCI3_BOT {} {}", role(rng), concept(rng)),
            7 => format!("RI0 {} {}", role(rng), role(rng)),
            _ => {
                if rng.random_bool(0.5) {
                    format!("GCI2 {} {} {}", concept(rng), role(rng), concept(rng))
                } else {
                    format!("RI1 {} {} {}", role(rng), role(rng), role(rng))
                }
            }
        };
        text.push_str(&line);
        text.push('\n');
    }
    parse_normalized_str(&text).unwrap()
}

/// Naive saturation: reapplies every completion rule to every fact until fixpoint.
pub struct NaiveSaturation {
    pub n: usize,
    pub s: Vec<Vec<bool>>,
    pub links: BTreeSet<(u32, u32, u32)>,
    pub rsup: Vec<Vec<bool>>,
}

impl NaiveSaturation {
    /// Query semantics: an unsatisfiable concept is below everything.
    pub fn holds(&self, a: usize, b: usize) -> bool {
        self.s[a][1] || self.s[a][b]
    }

    pub fn unsat(&self, a: usize) -> bool {
        self.s[a][1]
    }
}

pub fn naive_saturation(t: &Theory) -> NaiveSaturation {
    let n = t.signature.num_concepts();
    let nr = t.signature.num_roles();
    let bot = 1usize;
    // role hierarchy by repeated composition
    let mut rsup = vec![vec![false; nr]; nr];
    for (r, row) in rsup.iter_mut().enumerate() {
        row[r] = true;
    }
    loop {
        let mut changed = false;
        for ax in t.axioms() {
            if let NormalizedAxiom::Ri0 { sub, sup } = *ax {
                for r in 0..nr {
                    if rsup[r][sub.index()] && !rsup[r][sup.index()] {
                        rsup[r][sup.index()] = true;
                        changed = true;
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    let mut s = vec![vec![false; n]; n];
    for (a, row) in s.iter_mut().enumerate() {
        row[a] = true;
        row[0] = true;
    }
    let mut links: BTreeSet<(u32, u32, u32)> = BTreeSet::new();
    loop {
        let mut changed = false;
        let add = |s: &mut Vec<Vec<bool>>, a: usize, b: usize| {
            if !s[a][b] {
                s[a][b] = true;
                true
            } else {
                false
            }
        };
        for a in 0..n {
            for ax in t.axioms() {
                match *ax {
                    NormalizedAxiom::Gci0 { sub, sup } if s[a][sub.index()] => {
                        changed |= add(&mut s, a, sup.index());
                    }
                    NormalizedAxiom::Gci0Bot { sub } if s[a][sub.index()] => {
                        changed |= add(&mut s, a, bot);
                    }
                    NormalizedAxiom::Gci1 { left, right, sup } if s[a][left.index()] && s[a][right.index()] => {
                        changed |= add(&mut s, a, sup.index());
                    }
                    NormalizedAxiom::Gci1Bot { left, right } if s[a][left.index()] && s[a][right.index()] => {
                        changed |= add(&mut s, a, bot);
                    }
                    NormalizedAxiom::Gci2 { sub, role, filler } if s[a][sub.index()] => {
                        changed |= links.insert((a as u32, role.0, filler.0));
                    }
                    _ => {}
                }
            }
        }
        let current: Vec<(u32, u32, u32)> = links.iter().copied().collect();
        for &(a, r, b) in &current {
            let (a, b) = (a as usize, b as usize);
            if s[b][bot] {
                changed |= add(&mut s, a, bot);
            }
            for ax in t.axioms() {
                match *ax {
                    NormalizedAxiom::Gci3 { role, filler, sup } if role.0 == r && s[b][filler.index()] => {
                        changed |= add(&mut s, a, sup.index());
                    }
                    NormalizedAxiom::Gci3Bot { role, filler } if role.0 == r && s[b][filler.index()] => {
                        changed |= add(&mut s, a, bot);
                    }
                    _ => {}
                }
            }
            for s2 in 0..nr {
                if rsup[r as usize][s2] {
                    changed |= links.insert((a as u32, s2 as u32, b as u32));
                }
            }
            for &(a2, r2, e) in &current {
                if a2 as usize != b {
                    continue;
                }
                for ax in t.axioms() {
                    if let NormalizedAxiom::Ri1 { first, second, sup } = *ax {
                        if first.0 == r && second.0 == r2 {
                            changed |= links.insert((a as u32, sup.0, e));
                        }
                    }
                }
            }
        }
        if !changed {
            break;
        }
    }
    // ⊥ is below everything
    for b in 0..n {
        s[bot][b] = true;
    }
    NaiveSaturation { n, s, links, rsup }
}

/// Closure facts as explicit sets. Targets may be ⊥ (id 1).
#[derive(Default, Debug, Clone, PartialEq, Eq)]
pub struct NaiveClosure {
    pub gci0: BTreeSet<(usize, usize)>,
    pub gci1: BTreeSet<(usize, usize, usize)>,
    pub gci2: BTreeSet<(usize, usize, usize)>,
    pub gci3: BTreeSet<(usize, usize, usize)>,
}

impl NaiveClosure {
    /// Canonical normalized axioms, for comparison with the engine.
    pub fn axioms(&self) -> BTreeSet<NormalizedAxiom> {
        let c = |i: usize| ConceptId(i as u32);
        let r = |i: usize| RoleId(i as u32);
        let mut out = BTreeSet::new();
        for &(a, b) in &self.gci0 {
            out.insert(NormalizedAxiom::Gci0 { sub: c(a), sup: c(b) }.canonical());
        }
        for &(a, b, e) in &self.gci1 {
            out.insert(
                NormalizedAxiom::Gci1 {
                    left: c(a),
                    right: c(b),
                    sup: c(e),
                }
                .canonical(),
            );
        }
        for &(a, rr, b) in &self.gci2 {
            out.insert(NormalizedAxiom::Gci2 {
                sub: c(a),
                role: r(rr),
                filler: c(b),
            });
        }
        for &(rr, a, b) in &self.gci3 {
            out.insert(
                NormalizedAxiom::Gci3 {
                    role: r(rr),
                    filler: c(a),
                    sup: c(b),
                }
                .canonical(),
            );
        }
        out
    }
}

/// Closure rules iterated jointly to a fixpoint over explicit fact sets.
///
/// Includes the inclusion rules over subsumption premises, the unconditional
/// and ⊥ rules, commutativity of conjunction, the role-chain rule, and the
/// unsatisfiable-subject rules (an unsatisfiable A gives A ⊑ ∃r.X and ∃r.A ⊑ X
/// for every X).
pub fn naive_closure(t: &Theory) -> NaiveClosure {
    let sat = naive_saturation(t);
    let n = sat.n;
    let nr = t.signature.num_roles();
    let bot = 1usize;
    let top = 0usize;
    let h = |a: usize, b: usize| sat.holds(a, b);
    let mut cl = NaiveClosure::default();
    for a in 0..n {
        for b in 0..n {
            if h(a, b) {
                cl.gci0.insert((a, b));
            }
        }
    }
    for ax in t.axioms() {
        match *ax {
            NormalizedAxiom::Gci1 { left, right, sup } => {
                cl.gci1.insert((left.index(), right.index(), sup.index()));
            }
            NormalizedAxiom::Gci1Bot { left, right } => {
                cl.gci1.insert((left.index(), right.index(), bot));
            }
            NormalizedAxiom::Gci2 { sub, role, filler } => {
                cl.gci2.insert((sub.index(), role.index(), filler.index()));
            }
            NormalizedAxiom::Gci3 { role, filler, sup } => {
                cl.gci3.insert((role.index(), filler.index(), sup.index()));
            }
            NormalizedAxiom::Gci3Bot { role, filler } => {
                cl.gci3.insert((role.index(), filler.index(), bot));
            }
            _ => {}
        }
    }
    let chains: Vec<(usize, usize, usize)> = t
        .axioms()
        .iter()
        .filter_map(|ax| match *ax {
            NormalizedAxiom::Ri1 { first, second, sup } => Some((first.index(), second.index(), sup.index())),
            _ => None,
        })
        .collect();
    loop {
        let before = (cl.gci1.len(), cl.gci2.len(), cl.gci3.len());
        // GCI1
        let mut new1 = BTreeSet::new();
        for &(a, b, e) in &cl.gci1 {
            new1.insert((b, a, e));
            for a2 in 0..n {
                if !h(a2, a) {
                    continue;
                }
                for b2 in 0..n {
                    if !h(b2, b) {
                        continue;
                    }
                    for e2 in 0..n {
                        if h(e, e2) {
                            new1.insert((a2, b2, e2));
                        }
                    }
                }
            }
        }
        for a in 0..n {
            for b in 0..n {
                for e in 0..n {
                    // A ⊓ ⊥ ⊑ E, B ⊑ ⊥ ⊢ A ⊓ B ⊑ E
                    let unsat_operand = sat.unsat(a) || sat.unsat(b);
                    // E ⊑ E' ⊢ A ⊓ E ⊑ E', A ⊑ A' ⊢ A ⊓ ⊤ ⊑ A' (and commuted)
                    let operand_below = h(a, e) || h(b, e);
                    // common subsumer of both operands
                    let common = (0..n).any(|x| h(a, x) && h(b, x) && h(x, e));
                    if unsat_operand || operand_below || common || (b == top && h(a, e)) {
                        new1.insert((a, b, e));
                    }
                }
            }
        }
        let bot_pairs: Vec<(usize, usize)> = cl
            .gci1
            .iter()
            .filter(|t| t.2 == bot)
            .map(|t| (t.0, t.1))
            .collect();
        for (a, b) in bot_pairs {
            for e in 0..n {
                new1.insert((a, b, e));
            }
        }
        cl.gci1.extend(new1);

        // GCI2
        let mut new2 = BTreeSet::new();
        for &(a, r, b) in &cl.gci2 {
            for a2 in 0..n {
                if !h(a2, a) {
                    continue;
                }
                for r2 in 0..nr {
                    if !sat.rsup[r][r2] {
                        continue;
                    }
                    for b2 in 0..n {
                        if h(b, b2) {
                            new2.insert((a2, r2, b2));
                        }
                    }
                }
            }
            for &(x, r2, e) in &cl.gci2 {
                if x != b {
                    continue;
                }
                for &(c1, c2, s) in &chains {
                    if c1 == r && c2 == r2 {
                        new2.insert((a, s, e));
                    }
                }
            }
        }
        for a in 0..n {
            if sat.unsat(a) {
                for r in 0..nr {
                    for b in 0..n {
                        new2.insert((a, r, b));
                    }
                }
            }
        }
        cl.gci2.extend(new2);

        // GCI3
        let mut new3 = BTreeSet::new();
        for &(r, a, b) in &cl.gci3 {
            for r2 in 0..nr {
                if !sat.rsup[r2][r] {
                    continue;
                }
                for a2 in 0..n {
                    if !h(a2, a) {
                        continue;
                    }
                    for b2 in 0..n {
                        if h(b, b2) {
                            new3.insert((r2, a2, b2));
                        }
                    }
                }
            }
        }
        for r in 0..nr {
            for a in 0..n {
                new3.insert((r, a, top));
                if sat.unsat(a) {
                    for b in 0..n {
                        new3.insert((r, a, b));
                    }
                }
            }
        }
        cl.gci3.extend(new3);

        if before == (cl.gci1.len(), cl.gci2.len(), cl.gci3.len()) {
            break;
        }
    }
    cl
}

/// Finite interpretation with at most 8 domain elements and one bitmask per concept.
pub struct Interpretation {
    pub concepts: Vec<u8>,
    /// Per role, per domain element: bitmask of successors.
    pub roles: Vec<Vec<u8>>,
}

impl Interpretation {
    fn exists(&self, r: usize, filler: u8) -> u8 {
        let mut out = 0u8;
        for (x, succ) in self.roles[r].iter().enumerate() {
            if succ & filler != 0 {
                out |= 1 << x;
            }
        }
        out
    }

    fn role_comp_subset(&self, r1: usize, r2: usize, s: usize) -> bool {
        for (x, &succ1) in self.roles[r1].iter().enumerate() {
            let mut reach = 0u8;
            for y in 0..8 {
                if succ1 & (1 << y) != 0 {
                    reach |= self.roles[r2][y];
                }
            }
            if reach & !self.roles[s][x] != 0 {
                return false;
            }
        }
        true
    }

    pub fn satisfies(&self, ax: &NormalizedAxiom) -> bool {
        let c = |id: ConceptId| self.concepts[id.index()];
        match *ax {
            NormalizedAxiom::Gci0 { sub, sup } => c(sub) & !c(sup) == 0,
            NormalizedAxiom::Gci1 { left, right, sup } => c(left) & c(right) & !c(sup) == 0,
            NormalizedAxiom::Gci2 { sub, role, filler } => c(sub) & !self.exists(role.index(), c(filler)) == 0,
            NormalizedAxiom::Gci3 { role, filler, sup } => self.exists(role.index(), c(filler)) & !c(sup) == 0,
            NormalizedAxiom::Gci0Bot { sub } => c(sub) == 0,
            NormalizedAxiom::Gci1Bot { left, right } => c(left) & c(right) == 0,
            NormalizedAxiom::Gci3Bot { role, filler } => self.exists(role.index(), c(filler)) == 0,
            NormalizedAxiom::Ri0 { sub, sup } => self.roles[sub.index()]
                .iter()
                .zip(&self.roles[sup.index()])
                .all(|(a, b)| a & !b == 0),
            NormalizedAxiom::Ri1 { first, second, sup } => {
                self.role_comp_subset(first.index(), second.index(), sup.index())
            }
        }
    }
}

/// Calls `visit` for every model of `t` with domain size `d` (1..=3).
/// Supports at most one role.
pub fn for_each_model(t: &Theory, d: usize, mut visit: impl FnMut(&Interpretation)) {
    let nc = t.signature.num_concepts();
    let nr = t.signature.num_roles();
    assert!(nr <= 1 && (1..=3).contains(&d));
    let full: u8 = ((1u16 << d) - 1) as u8;
    let named = nc - 2;
    let role_configs: u32 = if nr == 0 { 1 } else { 1 << (d * d) };
    let mut interp = Interpretation {
        concepts: vec![0; nc],
        roles: vec![vec![0; d]; nr],
    };
    interp.concepts[0] = full;
    interp.concepts[1] = 0;
    for rc in 0..role_configs {
        if nr == 1 {
            for x in 0..d {
                interp.roles[0][x] = ((rc >> (x * d)) as u8) & full;
            }
        }
        let total = 1u64 << (d * named);
        for assign in 0..total {
            for i in 0..named {
                interp.concepts[2 + i] = ((assign >> (i * d)) as u8) & full;
            }
            if t.axioms().iter().all(|ax| interp.satisfies(ax)) {
                visit(&interp);
            }
        }
    }
}

/// Every GCI over a signature with `nc` concepts and `nr` roles, canonicalized.
pub fn all_gci_axioms(nc: usize, nr: usize) -> Vec<NormalizedAxiom> {
    let c = |i: usize| ConceptId(i as u32);
    let r = |i: usize| RoleId(i as u32);
    let mut out = BTreeSet::new();
    for a in 0..nc {
        out.insert(NormalizedAxiom::Gci0Bot { sub: c(a) });
        for b in 0..nc {
            out.insert(NormalizedAxiom::Gci0 { sub: c(a), sup: c(b) }.canonical());
            out.insert(NormalizedAxiom::Gci1Bot { left: c(a), right: c(b) });
            for e in 0..nc {
                out.insert(
                    NormalizedAxiom::Gci1 {
                        left: c(a),
                        right: c(b),
                        sup: c(e),
                    }
                    .canonical(),
                );
            }
            for rr in 0..nr {
                out.insert(NormalizedAxiom::Gci2 {
                    sub: c(a),
                    role: r(rr),
                    filler: c(b),
                });
                out.insert(
                    NormalizedAxiom::Gci3 {
                        role: r(rr),
                        filler: c(a),
                        sup: c(b),
                    }
                    .canonical(),
                );
            }
        }
        for rr in 0..nr {
            out.insert(NormalizedAxiom::Gci3Bot {
                role: r(rr),
                filler: c(a),
            });
        }
    }
    out.into_iter().collect()
}
