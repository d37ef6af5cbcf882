//! Worklist saturation classifier for normalized EL++ theories.
//!
//! Implements the usual completion rules: subsumer propagation through GCI0 and
//! GCI1, link creation from GCI2, back-propagation along links through GCI3 and
//! ⊥, role hierarchy lifting and binary role chains. BOT variants act as GCIs
//! with target ⊥.

use std::collections::{HashMap, HashSet, VecDeque};

use thiserror::Error;

use crate::kb::{ConceptId, NormalizedAxiom, RoleId, Theory};

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ReasonerError {
    #[error("unknown concept id {0}")]
    UnknownConcept(u32),
    #[error("unknown role id {0}")]
    UnknownRole(u32),
}

/// Entailed atomic subsumptions.
///
/// The stored sets are the literal saturation result. A concept with ⊥ among its
/// subsumers is unsatisfiable and is subsumed by every concept; all query methods
/// apply that reading.
#[derive(Clone, Debug)]
pub struct SubsumptionIndex {
    supers: Vec<Vec<ConceptId>>,
    subs: Vec<Vec<ConceptId>>,
    unsat: Vec<bool>,
    unsat_list: Vec<ConceptId>,
}

impl SubsumptionIndex {
    pub fn num_concepts(&self) -> usize {
        self.supers.len()
    }

    pub fn is_unsat(&self, a: ConceptId) -> bool {
        self.unsat[a.index()]
    }

    pub fn unsat_concepts(&self) -> &[ConceptId] {
        &self.unsat_list
    }

    /// `b ∈ S(a)`; panics on ids outside the index.
    #[inline]
    pub fn holds(&self, a: ConceptId, b: ConceptId) -> bool {
        self.unsat[a.index()] || self.supers[a.index()].binary_search(&b).is_ok()
    }

    pub fn is_subclass(&self, a: ConceptId, b: ConceptId) -> Result<bool, ReasonerError> {
        for c in [a, b] {
            if c.index() >= self.supers.len() {
                return Err(ReasonerError::UnknownConcept(c.0));
            }
        }
        Ok(self.holds(a, b))
    }

    /// Literal saturation set, sorted by id.
    pub fn literal_supers(&self, a: ConceptId) -> &[ConceptId] {
        &self.supers[a.index()]
    }

    /// All subsumers of `a`, in id order.
    pub fn supers(&self, a: ConceptId) -> Box<dyn Iterator<Item = ConceptId> + '_> {
        if self.unsat[a.index()] {
            Box::new((0..self.supers.len() as u32).map(ConceptId))
        } else {
            Box::new(self.supers[a.index()].iter().copied())
        }
    }

    /// All subsumees of `b`: literal subclasses plus every unsatisfiable concept.
    pub fn subs(&self, b: ConceptId) -> impl Iterator<Item = ConceptId> + '_ {
        self.subs[b.index()]
            .iter()
            .copied()
            .filter(|c| !self.unsat[c.index()])
            .chain(self.unsat_list.iter().copied())
    }

    pub fn num_supers(&self, a: ConceptId) -> usize {
        if self.unsat[a.index()] {
            self.supers.len()
        } else {
            self.supers[a.index()].len()
        }
    }
}

/// Reflexive-transitive closure of role inclusions plus the asserted chains.
#[derive(Clone, Debug)]
pub struct RoleHierarchy {
    rsup: Vec<Vec<RoleId>>,
    rsub: Vec<Vec<RoleId>>,
    pub chains: Vec<(RoleId, RoleId, RoleId)>,
}

impl RoleHierarchy {
    pub fn from_theory(t: &Theory) -> Self {
        let n = t.signature.num_roles();
        let mut direct = vec![Vec::new(); n];
        let mut chains = Vec::new();
        for ax in t.axioms() {
            match *ax {
                NormalizedAxiom::Ri0 { sub, sup } => direct[sub.index()].push(sup),
                NormalizedAxiom::Ri1 { first, second, sup } => chains.push((first, second, sup)),
                _ => {}
            }
        }
        let mut rsup = Vec::with_capacity(n);
        for r in 0..n {
            let mut seen = vec![false; n];
            let mut stack = vec![r];
            seen[r] = true;
            while let Some(x) = stack.pop() {
                for s in &direct[x] {
                    if !seen[s.index()] {
                        seen[s.index()] = true;
                        stack.push(s.index());
                    }
                }
            }
            let sups: Vec<RoleId> = (0..n).filter(|&i| seen[i]).map(|i| RoleId(i as u32)).collect();
            rsup.push(sups);
        }
        let mut rsub = vec![Vec::new(); n];
        for (r, sups) in rsup.iter().enumerate() {
            for s in sups {
                rsub[s.index()].push(RoleId(r as u32));
            }
        }
        RoleHierarchy { rsup, rsub, chains }
    }

    pub fn num_roles(&self) -> usize {
        self.rsup.len()
    }

    /// Roles `s` with `r ⊑* s`, sorted.
    pub fn rsup(&self, r: RoleId) -> &[RoleId] {
        &self.rsup[r.index()]
    }

    /// Roles `s` with `s ⊑* r`, sorted.
    pub fn rsub(&self, r: RoleId) -> &[RoleId] {
        &self.rsub[r.index()]
    }

    #[inline]
    pub fn is_subrole(&self, r: RoleId, s: RoleId) -> bool {
        self.rsup[r.index()].binary_search(&s).is_ok()
    }

    /// Whether `r1 ∘ r2 ⊑ s` follows from an asserted chain and the hierarchy.
    pub fn chain_entailed(&self, r1: RoleId, r2: RoleId, s: RoleId) -> bool {
        self.chains
            .iter()
            .any(|&(t1, t2, t)| self.is_subrole(r1, t1) && self.is_subrole(r2, t2) && self.is_subrole(t, s))
    }
}

/// Role links `(A, B) ∈ R(r)` derived during saturation.
#[derive(Clone, Debug, Default)]
pub struct RoleLinkIndex {
    links: Vec<Vec<(ConceptId, ConceptId)>>,
}

impl RoleLinkIndex {
    /// Sorted pairs for role `r`.
    pub fn pairs(&self, r: RoleId) -> &[(ConceptId, ConceptId)] {
        &self.links[r.index()]
    }

    pub fn contains(&self, r: RoleId, a: ConceptId, b: ConceptId) -> bool {
        self.links[r.index()].binary_search(&(a, b)).is_ok()
    }
}

#[derive(Clone, Copy)]
enum Item {
    Sub(u32, u32),
    Link(u32, u32, u32),
}

struct Told {
    gci0: Vec<Vec<u32>>,
    gci1: Vec<Vec<(u32, u32)>>,
    gci2: Vec<Vec<(u32, u32)>>,
    gci3: HashMap<(u32, u32), Vec<u32>>,
    chain_first: Vec<Vec<(u32, u32)>>,
    chain_second: Vec<Vec<(u32, u32)>>,
}

impl Told {
    fn new(t: &Theory, rh: &RoleHierarchy) -> Self {
        let nc = t.signature.num_concepts();
        let nr = t.signature.num_roles();
        let bot = ConceptId::BOTTOM.0;
        let mut told = Told {
            gci0: vec![Vec::new(); nc],
            gci1: vec![Vec::new(); nc],
            gci2: vec![Vec::new(); nc],
            gci3: HashMap::new(),
            chain_first: vec![Vec::new(); nr],
            chain_second: vec![Vec::new(); nr],
        };
        for ax in t.axioms() {
            match *ax {
                NormalizedAxiom::Gci0 { sub, sup } => told.gci0[sub.index()].push(sup.0),
                NormalizedAxiom::Gci0Bot { sub } => told.gci0[sub.index()].push(bot),
                NormalizedAxiom::Gci1 { left, right, sup } => told.add_gci1(left.0, right.0, sup.0),
                NormalizedAxiom::Gci1Bot { left, right } => told.add_gci1(left.0, right.0, bot),
                NormalizedAxiom::Gci2 { sub, role, filler } => told.gci2[sub.index()].push((role.0, filler.0)),
                NormalizedAxiom::Gci3 { role, filler, sup } => {
                    told.gci3.entry((role.0, filler.0)).or_default().push(sup.0)
                }
                NormalizedAxiom::Gci3Bot { role, filler } => {
                    told.gci3.entry((role.0, filler.0)).or_default().push(bot)
                }
                NormalizedAxiom::Ri0 { .. } | NormalizedAxiom::Ri1 { .. } => {}
            }
        }
        for &(r1, r2, s) in &rh.chains {
            told.chain_first[r1.index()].push((r2.0, s.0));
            told.chain_second[r2.index()].push((r1.0, s.0));
        }
        told
    }

    fn add_gci1(&mut self, a: u32, b: u32, e: u32) {
        self.gci1[a as usize].push((b, e));
        if a != b {
            self.gci1[b as usize].push((a, e));
        }
    }
}

struct Saturation<'a> {
    told: Told,
    rh: &'a RoleHierarchy,
    s: Vec<HashSet<u32>>,
    link_set: HashSet<(u32, u32, u32)>,
    fwd: Vec<HashMap<u32, Vec<u32>>>,
    bwd: Vec<HashMap<u32, Vec<u32>>>,
    queue: VecDeque<Item>,
}

impl Saturation<'_> {
    fn run(&mut self) {
        while let Some(item) = self.queue.pop_front() {
            match item {
                Item::Sub(a, b) => self.add_sub(a, b),
                Item::Link(a, r, b) => self.add_link(a, r, b),
            }
        }
    }

    fn add_sub(&mut self, a: u32, b: u32) {
        if !self.s[a as usize].insert(b) {
            return;
        }
        let q = &mut self.queue;
        for &c in &self.told.gci0[b as usize] {
            q.push_back(Item::Sub(a, c));
        }
        let sa = &self.s[a as usize];
        for &(other, c) in &self.told.gci1[b as usize] {
            if sa.contains(&other) {
                q.push_back(Item::Sub(a, c));
            }
        }
        for &(r, c) in &self.told.gci2[b as usize] {
            q.push_back(Item::Link(a, r, c));
        }
        let is_bot = b == ConceptId::BOTTOM.0;
        for (&r, subjects) in &self.bwd[a as usize] {
            if let Some(sups) = self.told.gci3.get(&(r, b)) {
                for &x in subjects {
                    for &e in sups {
                        q.push_back(Item::Sub(x, e));
                    }
                }
            }
            if is_bot {
                for &x in subjects {
                    q.push_back(Item::Sub(x, ConceptId::BOTTOM.0));
                }
            }
        }
    }

    fn add_link(&mut self, a: u32, r: u32, b: u32) {
        if !self.link_set.insert((a, r, b)) {
            return;
        }
        self.fwd[a as usize].entry(r).or_default().push(b);
        self.bwd[b as usize].entry(r).or_default().push(a);
        let q = &mut self.queue;
        for &b2 in &self.s[b as usize] {
            if let Some(sups) = self.told.gci3.get(&(r, b2)) {
                for &e in sups {
                    q.push_back(Item::Sub(a, e));
                }
            }
        }
        if self.s[b as usize].contains(&ConceptId::BOTTOM.0) {
            q.push_back(Item::Sub(a, ConceptId::BOTTOM.0));
        }
        for s in self.rh.rsup(RoleId(r)) {
            if s.0 != r {
                q.push_back(Item::Link(a, s.0, b));
            }
        }
        // r as the first role of a chain: a -r-> b -r2-> e
        for &(r2, s) in &self.told.chain_first[r as usize] {
            if let Some(targets) = self.fwd[b as usize].get(&r2) {
                for &e in targets {
                    q.push_back(Item::Link(a, s, e));
                }
            }
        }
        // r as the second role: x -r1-> a -r-> b
        for &(r1, s) in &self.told.chain_second[r as usize] {
            if let Some(sources) = self.bwd[a as usize].get(&r1) {
                for &x in sources {
                    q.push_back(Item::Link(x, s, b));
                }
            }
        }
    }
}

/// Saturates `t` and returns the subsumption index, role hierarchy and role links.
pub fn classify(t: &Theory) -> (SubsumptionIndex, RoleHierarchy, RoleLinkIndex) {
    let rh = RoleHierarchy::from_theory(t);
    let nc = t.signature.num_concepts();
    let nr = t.signature.num_roles();
    let told = Told::new(t, &rh);
    let mut sat = Saturation {
        told,
        rh: &rh,
        s: vec![HashSet::new(); nc],
        link_set: HashSet::new(),
        fwd: vec![HashMap::new(); nc],
        bwd: vec![HashMap::new(); nc],
        queue: VecDeque::new(),
    };
    for a in 0..nc as u32 {
        sat.queue.push_back(Item::Sub(a, a));
        sat.queue.push_back(Item::Sub(a, ConceptId::TOP.0));
    }
    sat.run();

    let mut supers: Vec<Vec<ConceptId>> = sat
        .s
        .iter()
        .map(|set| {
            let mut v: Vec<ConceptId> = set.iter().map(|&c| ConceptId(c)).collect();
            v.sort_unstable();
            v
        })
        .collect();
    // ⊥ is subsumed by everything; make that literal so S(⊥) reads as the full set.
    supers[ConceptId::BOTTOM.index()] = (0..nc as u32).map(ConceptId).collect();
    let unsat: Vec<bool> = supers
        .iter()
        .map(|v| v.binary_search(&ConceptId::BOTTOM).is_ok())
        .collect();
    let unsat_list = (0..nc as u32).filter(|&c| unsat[c as usize]).map(ConceptId).collect();
    let mut subs = vec![Vec::new(); nc];
    for (a, sups) in supers.iter().enumerate() {
        for b in sups {
            subs[b.index()].push(ConceptId(a as u32));
        }
    }
    let mut links = vec![Vec::new(); nr];
    for &(a, r, b) in &sat.link_set {
        links[r as usize].push((ConceptId(a), ConceptId(b)));
    }
    for l in &mut links {
        l.sort_unstable();
    }
    (
        SubsumptionIndex {
            supers,
            subs,
            unsat,
            unsat_list,
        },
        rh,
        RoleLinkIndex { links },
    )
}

/// `A<TAB>B` lines for every entailed subsumption, sorted by id.
pub fn dump_hierarchy(t: &Theory, s: &SubsumptionIndex) -> String {
    let mut out = String::new();
    for a in t.signature.concept_ids() {
        for b in s.supers(a) {
            out.push_str(t.signature.concept_name(a));
            out.push('\t');
            out.push_str(t.signature.concept_name(b));
            out.push('\n');
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::parse_normalized_str;

    const PROTEIN: &str = "GCI1_BOT {GO1} {GO2}\nGCI1_BOT A B\nGCI3 has_function {GO1} B\nGCI3 has_function {GO2} A\nGCI2 {P} has_function {GO1}\nGCI2 {Q} has_function {GO2}\n";

    #[test]
    fn protein_hierarchy() {
        let t = parse_normalized_str(PROTEIN).unwrap();
        let (s, _, _) = classify(&t);
        let c = |n: &str| t.signature.concept(n).unwrap();
        let sup: Vec<_> = s.supers(c("{P}")).collect();
        assert_eq!(sup.len(), 3);
        assert!(s.holds(c("{P}"), c("B")));
        assert!(s.holds(c("{Q}"), c("A")));
        assert!(!s.holds(c("A"), c("{P}")));
        assert_eq!(s.supers(ConceptId::BOTTOM).count(), 8);
        assert_eq!(s.supers(ConceptId::TOP).collect::<Vec<_>>(), vec![ConceptId::TOP]);
        assert!(s.is_subclass(c("A"), c("A")).unwrap());
        assert!(s.is_subclass(c("A"), ConceptId(99)).is_err());
    }

    #[test]
    fn chains_and_hierarchy() {
        let t = parse_normalized_str(
            "GCI2 A r B\nGCI2 B s C\nRI1 r s t\nRI0 t u\nGCI3 u C D\n",
        )
        .unwrap();
        let (s, rh, links) = classify(&t);
        let c = |n: &str| t.signature.concept(n).unwrap();
        let r = |n: &str| t.signature.role(n).unwrap();
        assert!(s.holds(c("A"), c("D")));
        assert!(links.contains(r("t"), c("A"), c("C")));
        assert!(rh.is_subrole(r("t"), r("u")));
        assert!(rh.chain_entailed(r("r"), r("s"), r("u")));
    }

    #[test]
    fn bottom_propagates_backwards() {
        let t = parse_normalized_str("GCI2 A r B\nGCI0_BOT B\n").unwrap();
        let (s, _, _) = classify(&t);
        let a = t.signature.concept("A").unwrap();
        assert!(s.is_unsat(a));
        assert_eq!(s.subs(ConceptId::TOP).count(), 4);
    }
}
