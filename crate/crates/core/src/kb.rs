//! Interned signatures, normalized axioms, and the line-based `.nf` theory format.
//!
//! A `.nf` file holds one axiom per line. The first token is the variant tag
//! (`GCI0`, `GCI1`, `GCI2`, `GCI3`, `GCI0_BOT`, `GCI1_BOT`, `GCI3_BOT`, `RI0`,
//! `RI1`) and the remaining tokens are names in slot order:
//!
//! ```text
//! GCI0 A B          # A ⊑ B
//! GCI1 A B E        # A ⊓ B ⊑ E
//! GCI2 A r B        # A ⊑ ∃r.B
//! GCI3 r A B        # ∃r.A ⊑ B
//! GCI0_BOT A        # A ⊑ ⊥
//! GCI1_BOT A B      # A ⊓ B ⊑ ⊥
//! GCI3_BOT r A      # ∃r.A ⊑ ⊥
//! RI0 r s           # r ⊑ s
//! RI1 r1 r2 s       # r1 ∘ r2 ⊑ s
//! ```
//!
//! Lines starting with `#` are comments. Comments of the form `#: concept X`,
//! `#: role r` and `#: individual a` declare signature members that may not
//! occur in any axiom; [`serialize_theory`] emits them so that a round trip
//! preserves the signature and its id assignment exactly.

use std::collections::{HashMap, HashSet};
use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};
use thiserror::Error;

/// Reserved name of ⊤, always concept id 0.
pub const TOP_NAME: &str = "owl:Thing";
/// Reserved name of ⊥, always concept id 1.
pub const BOTTOM_NAME: &str = "owl:Nothing";

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ConceptId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct RoleId(pub u32);

#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct IndividualId(pub u32);

impl ConceptId {
    pub const TOP: ConceptId = ConceptId(0);
    pub const BOTTOM: ConceptId = ConceptId(1);

    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl RoleId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

impl IndividualId {
    #[inline]
    pub fn index(self) -> usize {
        self.0 as usize
    }
}

/// Bijective name <-> dense id table.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct Interner {
    names: Vec<String>,
    ids: HashMap<String, u32>,
}

impl Interner {
    pub fn intern(&mut self, name: &str) -> u32 {
        if let Some(&id) = self.ids.get(name) {
            return id;
        }
        let id = self.names.len() as u32;
        self.names.push(name.to_owned());
        self.ids.insert(name.to_owned(), id);
        id
    }

    pub fn get(&self, name: &str) -> Option<u32> {
        self.ids.get(name).copied()
    }

    pub fn name(&self, id: u32) -> Option<&str> {
        self.names.get(id as usize).map(String::as_str)
    }

    pub fn len(&self) -> usize {
        self.names.len()
    }

    pub fn is_empty(&self) -> bool {
        self.names.is_empty()
    }

    pub fn names(&self) -> &[String] {
        &self.names
    }
}

/// Concept, role and individual names of a theory.
#[derive(Clone, Debug, PartialEq, Eq)]
pub struct Signature {
    concepts: Interner,
    roles: Interner,
    individuals: Interner,
}

impl Default for Signature {
    fn default() -> Self {
        Self::new()
    }
}

impl Signature {
    pub fn new() -> Self {
        let mut concepts = Interner::default();
        concepts.intern(TOP_NAME);
        concepts.intern(BOTTOM_NAME);
        Signature {
            concepts,
            roles: Interner::default(),
            individuals: Interner::default(),
        }
    }

    /// Rebuilds a signature from name lists, e.g. the ones stored in a checkpoint.
    /// The first two concept names must be the reserved ⊤ and ⊥ names.
    pub fn from_names(concepts: &[String], roles: &[String], individuals: &[String]) -> Option<Self> {
        if concepts.len() < 2 || concepts[0] != TOP_NAME || concepts[1] != BOTTOM_NAME {
            return None;
        }
        let mut sig = Signature::new();
        for name in &concepts[2..] {
            if sig.concepts.get(name).is_some() {
                return None;
            }
            sig.concepts.intern(name);
        }
        for name in roles {
            if sig.roles.get(name).is_some() {
                return None;
            }
            sig.roles.intern(name);
        }
        for name in individuals {
            sig.individuals.intern(name);
        }
        Some(sig)
    }

    pub fn intern_concept(&mut self, name: &str) -> ConceptId {
        ConceptId(self.concepts.intern(name))
    }

    pub fn intern_role(&mut self, name: &str) -> RoleId {
        RoleId(self.roles.intern(name))
    }

    pub fn intern_individual(&mut self, name: &str) -> IndividualId {
        IndividualId(self.individuals.intern(name))
    }

    pub fn concept(&self, name: &str) -> Option<ConceptId> {
        self.concepts.get(name).map(ConceptId)
    }

    pub fn role(&self, name: &str) -> Option<RoleId> {
        self.roles.get(name).map(RoleId)
    }

    pub fn individual(&self, name: &str) -> Option<IndividualId> {
        self.individuals.get(name).map(IndividualId)
    }

    /// Panics on an id outside the signature.
    pub fn concept_name(&self, id: ConceptId) -> &str {
        self.concepts.name(id.0).expect("concept id outside signature")
    }

    /// Panics on an id outside the signature.
    pub fn role_name(&self, id: RoleId) -> &str {
        self.roles.name(id.0).expect("role id outside signature")
    }

    pub fn individual_name(&self, id: IndividualId) -> &str {
        self.individuals.name(id.0).expect("individual id outside signature")
    }

    pub fn num_concepts(&self) -> usize {
        self.concepts.len()
    }

    pub fn num_roles(&self) -> usize {
        self.roles.len()
    }

    pub fn num_individuals(&self) -> usize {
        self.individuals.len()
    }

    pub fn concept_ids(&self) -> impl Iterator<Item = ConceptId> {
        (0..self.concepts.len() as u32).map(ConceptId)
    }

    pub fn role_ids(&self) -> impl Iterator<Item = RoleId> {
        (0..self.roles.len() as u32).map(RoleId)
    }

    pub fn concept_names(&self) -> &[String] {
        self.concepts.names()
    }

    pub fn role_names(&self) -> &[String] {
        self.roles.names()
    }

    pub fn individual_names(&self) -> &[String] {
        self.individuals.names()
    }

    pub fn has_concept(&self, id: ConceptId) -> bool {
        id.index() < self.concepts.len()
    }

    pub fn has_role(&self, id: RoleId) -> bool {
        id.index() < self.roles.len()
    }
}

/// The nine normal forms.
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum Variant {
    Gci0,
    Gci1,
    Gci2,
    Gci3,
    Gci0Bot,
    Gci1Bot,
    Gci3Bot,
    Ri0,
    Ri1,
}

impl Variant {
    pub const ALL: [Variant; 9] = [
        Variant::Gci0,
        Variant::Gci1,
        Variant::Gci2,
        Variant::Gci3,
        Variant::Gci0Bot,
        Variant::Gci1Bot,
        Variant::Gci3Bot,
        Variant::Ri0,
        Variant::Ri1,
    ];

    /// The seven concept-inclusion forms, i.e. everything that carries a loss.
    pub const GCIS: [Variant; 7] = [
        Variant::Gci0,
        Variant::Gci1,
        Variant::Gci2,
        Variant::Gci3,
        Variant::Gci0Bot,
        Variant::Gci1Bot,
        Variant::Gci3Bot,
    ];

    pub fn tag(self) -> &'static str {
        match self {
            Variant::Gci0 => "GCI0",
            Variant::Gci1 => "GCI1",
            Variant::Gci2 => "GCI2",
            Variant::Gci3 => "GCI3",
            Variant::Gci0Bot => "GCI0_BOT",
            Variant::Gci1Bot => "GCI1_BOT",
            Variant::Gci3Bot => "GCI3_BOT",
            Variant::Ri0 => "RI0",
            Variant::Ri1 => "RI1",
        }
    }

    /// Number of name tokens after the tag.
    pub fn arity(self) -> usize {
        match self {
            Variant::Gci0Bot => 1,
            Variant::Gci0 | Variant::Gci1Bot | Variant::Gci3Bot | Variant::Ri0 => 2,
            Variant::Gci1 | Variant::Gci2 | Variant::Gci3 | Variant::Ri1 => 3,
        }
    }

    pub fn is_gci(self) -> bool {
        !matches!(self, Variant::Ri0 | Variant::Ri1)
    }

    pub fn index(self) -> usize {
        self as usize
    }
}

impl fmt::Display for Variant {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.tag())
    }
}

impl FromStr for Variant {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        Variant::ALL
            .iter()
            .copied()
            .find(|v| v.tag() == s)
            .ok_or_else(|| s.to_owned())
    }
}

/// An axiom in one of the nine normal forms.
///
/// Concept slots in [`concept_slot`](Self::concept_slot) order:
/// GCI0 (A, B), GCI1 (A, B, E), GCI2 (A, B), GCI3 (A, B), GCI0_BOT (A),
/// GCI1_BOT (A, B), GCI3_BOT (A).
#[derive(Clone, Copy, Debug, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub enum NormalizedAxiom {
    /// A ⊑ B
    Gci0 { sub: ConceptId, sup: ConceptId },
    /// A ⊓ B ⊑ E
    Gci1 { left: ConceptId, right: ConceptId, sup: ConceptId },
    /// A ⊑ ∃r.B
    Gci2 { sub: ConceptId, role: RoleId, filler: ConceptId },
    /// ∃r.A ⊑ B
    Gci3 { role: RoleId, filler: ConceptId, sup: ConceptId },
    /// A ⊑ ⊥
    Gci0Bot { sub: ConceptId },
    /// A ⊓ B ⊑ ⊥
    Gci1Bot { left: ConceptId, right: ConceptId },
    /// ∃r.A ⊑ ⊥
    Gci3Bot { role: RoleId, filler: ConceptId },
    /// r ⊑ s
    Ri0 { sub: RoleId, sup: RoleId },
    /// r1 ∘ r2 ⊑ s
    Ri1 { first: RoleId, second: RoleId, sup: RoleId },
}

impl NormalizedAxiom {
    pub fn variant(&self) -> Variant {
        match self {
            NormalizedAxiom::Gci0 { .. } => Variant::Gci0,
            NormalizedAxiom::Gci1 { .. } => Variant::Gci1,
            NormalizedAxiom::Gci2 { .. } => Variant::Gci2,
            NormalizedAxiom::Gci3 { .. } => Variant::Gci3,
            NormalizedAxiom::Gci0Bot { .. } => Variant::Gci0Bot,
            NormalizedAxiom::Gci1Bot { .. } => Variant::Gci1Bot,
            NormalizedAxiom::Gci3Bot { .. } => Variant::Gci3Bot,
            NormalizedAxiom::Ri0 { .. } => Variant::Ri0,
            NormalizedAxiom::Ri1 { .. } => Variant::Ri1,
        }
    }

    /// Rewrites GCIs whose target is ⊥ into the matching BOT variant.
    pub fn canonical(self) -> Self {
        let bot = ConceptId::BOTTOM;
        match self {
            NormalizedAxiom::Gci0 { sub, sup } if sup == bot => NormalizedAxiom::Gci0Bot { sub },
            NormalizedAxiom::Gci1 { left, right, sup } if sup == bot => {
                NormalizedAxiom::Gci1Bot { left, right }
            }
            NormalizedAxiom::Gci3 { role, filler, sup } if sup == bot => {
                NormalizedAxiom::Gci3Bot { role, filler }
            }
            other => other,
        }
    }

    pub fn num_concept_slots(&self) -> usize {
        match self.variant() {
            Variant::Gci0Bot | Variant::Gci3Bot => 1,
            Variant::Gci0 | Variant::Gci2 | Variant::Gci3 | Variant::Gci1Bot => 2,
            Variant::Gci1 => 3,
            Variant::Ri0 | Variant::Ri1 => 0,
        }
    }

    pub fn concept_slot(&self, slot: usize) -> Option<ConceptId> {
        use NormalizedAxiom::*;
        match (*self, slot) {
            (Gci0 { sub, .. }, 0) => Some(sub),
            (Gci0 { sup, .. }, 1) => Some(sup),
            (Gci1 { left, .. }, 0) => Some(left),
            (Gci1 { right, .. }, 1) => Some(right),
            (Gci1 { sup, .. }, 2) => Some(sup),
            (Gci2 { sub, .. }, 0) => Some(sub),
            (Gci2 { filler, .. }, 1) => Some(filler),
            (Gci3 { filler, .. }, 0) => Some(filler),
            (Gci3 { sup, .. }, 1) => Some(sup),
            (Gci0Bot { sub }, 0) => Some(sub),
            (Gci1Bot { left, .. }, 0) => Some(left),
            (Gci1Bot { right, .. }, 1) => Some(right),
            (Gci3Bot { filler, .. }, 0) => Some(filler),
            _ => None,
        }
    }

    /// Returns a copy with one concept slot replaced, or `None` if the slot does not exist.
    pub fn with_concept_slot(&self, slot: usize, c: ConceptId) -> Option<Self> {
        use NormalizedAxiom::*;
        let out = match (*self, slot) {
            (Gci0 { sup, .. }, 0) => Gci0 { sub: c, sup },
            (Gci0 { sub, .. }, 1) => Gci0 { sub, sup: c },
            (Gci1 { right, sup, .. }, 0) => Gci1 { left: c, right, sup },
            (Gci1 { left, sup, .. }, 1) => Gci1 { left, right: c, sup },
            (Gci1 { left, right, .. }, 2) => Gci1 { left, right, sup: c },
            (Gci2 { role, filler, .. }, 0) => Gci2 { sub: c, role, filler },
            (Gci2 { sub, role, .. }, 1) => Gci2 { sub, role, filler: c },
            (Gci3 { role, sup, .. }, 0) => Gci3 { role, filler: c, sup },
            (Gci3 { role, filler, .. }, 1) => Gci3 { role, filler, sup: c },
            (Gci0Bot { .. }, 0) => Gci0Bot { sub: c },
            (Gci1Bot { right, .. }, 0) => Gci1Bot { left: c, right },
            (Gci1Bot { left, .. }, 1) => Gci1Bot { left, right: c },
            (Gci3Bot { role, .. }, 0) => Gci3Bot { role, filler: c },
            _ => return None,
        };
        Some(out)
    }

    pub fn concepts(&self) -> impl Iterator<Item = ConceptId> + '_ {
        (0..self.num_concept_slots()).filter_map(move |i| self.concept_slot(i))
    }

    pub fn roles(&self) -> Vec<RoleId> {
        match *self {
            NormalizedAxiom::Gci2 { role, .. }
            | NormalizedAxiom::Gci3 { role, .. }
            | NormalizedAxiom::Gci3Bot { role, .. } => vec![role],
            NormalizedAxiom::Ri0 { sub, sup } => vec![sub, sup],
            NormalizedAxiom::Ri1 { first, second, sup } => vec![first, second, sup],
            _ => Vec::new(),
        }
    }

    /// True when every referenced id exists in `sig`.
    pub fn is_within(&self, sig: &Signature) -> bool {
        self.concepts().all(|c| sig.has_concept(c)) && self.roles().iter().all(|&r| sig.has_role(r))
    }

    /// Renders the axiom as a `.nf` line (without newline).
    pub fn to_line(&self, sig: &Signature) -> String {
        let c = |id: ConceptId| sig.concept_name(id);
        let r = |id: RoleId| sig.role_name(id);
        let tag = self.variant().tag();
        match *self {
            NormalizedAxiom::Gci0 { sub, sup } => format!("{tag} {} {}", c(sub), c(sup)),
            NormalizedAxiom::Gci1 { left, right, sup } => {
                format!("{tag} {} {} {}", c(left), c(right), c(sup))
            }
            NormalizedAxiom::Gci2 { sub, role, filler } => {
                format!("{tag} {} {} {}", c(sub), r(role), c(filler))
            }
            NormalizedAxiom::Gci3 { role, filler, sup } => {
                format!("{tag} {} {} {}", r(role), c(filler), c(sup))
            }
            NormalizedAxiom::Gci0Bot { sub } => format!("{tag} {}", c(sub)),
            NormalizedAxiom::Gci1Bot { left, right } => format!("{tag} {} {}", c(left), c(right)),
            NormalizedAxiom::Gci3Bot { role, filler } => format!("{tag} {} {}", r(role), c(filler)),
            NormalizedAxiom::Ri0 { sub, sup } => format!("{tag} {} {}", r(sub), r(sup)),
            NormalizedAxiom::Ri1 { first, second, sup } => {
                format!("{tag} {} {} {}", r(first), r(second), r(sup))
            }
        }
    }
}

/// A signature plus a deduplicated, insertion-ordered list of normalized axioms.
#[derive(Clone, Debug, Default)]
pub struct Theory {
    pub signature: Signature,
    axioms: Vec<NormalizedAxiom>,
    seen: HashSet<NormalizedAxiom>,
}

impl PartialEq for Theory {
    fn eq(&self, other: &Self) -> bool {
        self.signature == other.signature && self.axioms == other.axioms
    }
}

impl Theory {
    pub fn new(signature: Signature) -> Self {
        Theory {
            signature,
            axioms: Vec::new(),
            seen: HashSet::new(),
        }
    }

    /// Adds an axiom (canonicalized); returns false for a duplicate.
    ///
    /// Panics if the axiom references ids outside the signature.
    pub fn push(&mut self, axiom: NormalizedAxiom) -> bool {
        assert!(axiom.is_within(&self.signature), "axiom references ids outside the signature");
        let axiom = axiom.canonical();
        if self.seen.insert(axiom) {
            self.axioms.push(axiom);
            true
        } else {
            false
        }
    }

    pub fn axioms(&self) -> &[NormalizedAxiom] {
        &self.axioms
    }

    pub fn contains(&self, axiom: &NormalizedAxiom) -> bool {
        self.seen.contains(&axiom.canonical())
    }

    pub fn of_variant(&self, variant: Variant) -> impl Iterator<Item = &NormalizedAxiom> {
        self.axioms.iter().filter(move |a| a.variant() == variant)
    }

    pub fn len(&self) -> usize {
        self.axioms.len()
    }

    pub fn is_empty(&self) -> bool {
        self.axioms.is_empty()
    }

    pub fn stats(&self) -> TheoryStats {
        signature_stats(self)
    }
}

/// Per-variant axiom counts and signature sizes.
#[derive(Clone, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct TheoryStats {
    pub counts: [usize; 9],
    pub concepts: usize,
    pub roles: usize,
    pub individuals: usize,
}

impl TheoryStats {
    pub fn count(&self, variant: Variant) -> usize {
        self.counts[variant.index()]
    }
}

pub fn signature_stats(theory: &Theory) -> TheoryStats {
    let mut counts = [0usize; 9];
    for ax in theory.axioms() {
        counts[ax.variant().index()] += 1;
    }
    TheoryStats {
        counts,
        concepts: theory.signature.num_concepts(),
        roles: theory.signature.num_roles(),
        individuals: theory.signature.num_individuals(),
    }
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum NfError {
    #[error("input is not valid UTF-8: {0}")]
    Utf8(String),
    #[error("line {line}: unknown variant tag `{tag}`")]
    UnknownTag { line: usize, tag: String },
    #[error("line {line}: {tag} expects {expected} names, found {found}")]
    Arity {
        line: usize,
        tag: String,
        expected: usize,
        found: usize,
    },
    #[error("line {line}: unknown {kind} `{name}`")]
    UnknownName { line: usize, kind: &'static str, name: String },
    #[error("line {line}: malformed declaration `{text}`")]
    Declaration { line: usize, text: String },
}

/// Whether unseen names may be added to the signature while parsing.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum NameMode {
    Extend,
    Closed,
}

/// Parses a `.nf` document into a fresh theory.
pub fn parse_normalized_file(bytes: &[u8]) -> Result<Theory, NfError> {
    let text = std::str::from_utf8(bytes).map_err(|e| NfError::Utf8(e.to_string()))?;
    parse_normalized_str(text)
}

pub fn parse_normalized_str(text: &str) -> Result<Theory, NfError> {
    let mut sig = Signature::new();
    let axioms = parse_axioms(text, &mut sig, NameMode::Extend)?;
    let mut theory = Theory::new(sig);
    for ax in axioms {
        theory.push(ax);
    }
    Ok(theory)
}

/// Parses axiom lines against an existing signature. Duplicates are kept; callers
/// that want set semantics push the result into a [`Theory`].
pub fn parse_axioms(text: &str, sig: &mut Signature, mode: NameMode) -> Result<Vec<NormalizedAxiom>, NfError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let line = idx + 1;
        let trimmed = raw.trim();
        if trimmed.is_empty() {
            continue;
        }
        if let Some(rest) = trimmed.strip_prefix("#:") {
            parse_declaration(rest, line, sig, mode)?;
            continue;
        }
        if trimmed.starts_with('#') {
            continue;
        }
        out.push(parse_axiom_line(trimmed, line, sig, mode)?);
    }
    Ok(out)
}

fn parse_declaration(rest: &str, line: usize, sig: &mut Signature, mode: NameMode) -> Result<(), NfError> {
    let tokens: Vec<&str> = rest.split_whitespace().collect();
    let bad = || NfError::Declaration {
        line,
        text: rest.trim().to_owned(),
    };
    if tokens.len() != 2 {
        return Err(bad());
    }
    let name = tokens[1];
    let (kind, known) = match tokens[0] {
        "concept" => ("concept", sig.concept(name).is_some()),
        "role" => ("role", sig.role(name).is_some()),
        "individual" => ("individual", sig.individual(name).is_some()),
        _ => return Err(bad()),
    };
    if !known {
        if mode == NameMode::Closed {
            return Err(NfError::UnknownName {
                line,
                kind,
                name: name.to_owned(),
            });
        }
        match kind {
            "concept" => {
                sig.intern_concept(name);
            }
            "role" => {
                sig.intern_role(name);
            }
            _ => {
                sig.intern_individual(name);
            }
        }
    }
    Ok(())
}

/// Parses a single axiom line such as `GCI2 P hf GO1`.
pub fn parse_axiom_line(
    text: &str,
    line: usize,
    sig: &mut Signature,
    mode: NameMode,
) -> Result<NormalizedAxiom, NfError> {
    let tokens: Vec<&str> = text.split_whitespace().collect();
    let Some((&tag, names)) = tokens.split_first() else {
        return Err(NfError::UnknownTag {
            line,
            tag: String::new(),
        });
    };
    let variant: Variant = tag.parse().map_err(|tag| NfError::UnknownTag { line, tag })?;
    if names.len() != variant.arity() {
        return Err(NfError::Arity {
            line,
            tag: tag.to_owned(),
            expected: variant.arity(),
            found: names.len(),
        });
    }
    // Slot order matters for id assignment: names are interned left to right.
    let ax = match variant {
        Variant::Gci0 => {
            let sub = concept_in(sig, names[0], line, mode)?;
            let sup = concept_in(sig, names[1], line, mode)?;
            NormalizedAxiom::Gci0 { sub, sup }
        }
        Variant::Gci1 => {
            let left = concept_in(sig, names[0], line, mode)?;
            let right = concept_in(sig, names[1], line, mode)?;
            let sup = concept_in(sig, names[2], line, mode)?;
            NormalizedAxiom::Gci1 { left, right, sup }
        }
        Variant::Gci2 => {
            let sub = concept_in(sig, names[0], line, mode)?;
            let role = role_id(sig, names[1], line, mode)?;
            let filler = concept_in(sig, names[2], line, mode)?;
            NormalizedAxiom::Gci2 { sub, role, filler }
        }
        Variant::Gci3 => {
            let role = role_id(sig, names[0], line, mode)?;
            let filler = concept_in(sig, names[1], line, mode)?;
            let sup = concept_in(sig, names[2], line, mode)?;
            NormalizedAxiom::Gci3 { role, filler, sup }
        }
        Variant::Gci0Bot => NormalizedAxiom::Gci0Bot {
            sub: concept_in(sig, names[0], line, mode)?,
        },
        Variant::Gci1Bot => {
            let left = concept_in(sig, names[0], line, mode)?;
            let right = concept_in(sig, names[1], line, mode)?;
            NormalizedAxiom::Gci1Bot { left, right }
        }
        Variant::Gci3Bot => {
            let role = role_id(sig, names[0], line, mode)?;
            let filler = concept_in(sig, names[1], line, mode)?;
            NormalizedAxiom::Gci3Bot { role, filler }
        }
        Variant::Ri0 => {
            let sub = role_id(sig, names[0], line, mode)?;
            let sup = role_id(sig, names[1], line, mode)?;
            NormalizedAxiom::Ri0 { sub, sup }
        }
        Variant::Ri1 => {
            let first = role_id(sig, names[0], line, mode)?;
            let second = role_id(sig, names[1], line, mode)?;
            let sup = role_id(sig, names[2], line, mode)?;
            NormalizedAxiom::Ri1 { first, second, sup }
        }
    };
    Ok(ax.canonical())
}

fn concept_in(sig: &mut Signature, name: &str, line: usize, mode: NameMode) -> Result<ConceptId, NfError> {
    match (sig.concept(name), mode) {
        (Some(id), _) => Ok(id),
        (None, NameMode::Extend) => Ok(sig.intern_concept(name)),
        (None, NameMode::Closed) => Err(NfError::UnknownName {
            line,
            kind: "concept",
            name: name.to_owned(),
        }),
    }
}

fn role_id(sig: &mut Signature, name: &str, line: usize, mode: NameMode) -> Result<RoleId, NfError> {
    match (sig.role(name), mode) {
        (Some(id), _) => Ok(id),
        (None, NameMode::Extend) => Ok(sig.intern_role(name)),
        (None, NameMode::Closed) => Err(NfError::UnknownName {
            line,
            kind: "role",
            name: name.to_owned(),
        }),
    }
}

/// Writes the declaration header followed by all axioms in insertion order.
pub fn serialize_theory(theory: &Theory) -> String {
    let mut out = String::from("# geoel normalized theory v1\n");
    serialize_signature(&theory.signature, &mut out);
    for ax in theory.axioms() {
        out.push_str(&ax.to_line(&theory.signature));
        out.push('\n');
    }
    out
}

fn serialize_signature(sig: &Signature, out: &mut String) {
    for name in &sig.concept_names()[2..] {
        out.push_str("#: concept ");
        out.push_str(name);
        out.push('\n');
    }
    for name in sig.role_names() {
        out.push_str("#: role ");
        out.push_str(name);
        out.push('\n');
    }
    for name in sig.individual_names() {
        out.push_str("#: individual ");
        out.push_str(name);
        out.push('\n');
    }
}

/// Serializes a bare axiom list (e.g. one closure variant) without a signature header.
pub fn serialize_axioms<'a>(sig: &Signature, axioms: impl IntoIterator<Item = &'a NormalizedAxiom>) -> String {
    let mut out = String::new();
    for ax in axioms {
        out.push_str(&ax.to_line(sig));
        out.push('\n');
    }
    out
}
