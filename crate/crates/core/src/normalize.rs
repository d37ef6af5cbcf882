//! Parsing of general EL++ axioms and their rewriting into normal forms.
//!
//! Input uses the `.elpp` syntax, one statement per line:
//!
//! ```text
//! sub(C, D)            equiv(C, D)          instance(C, a)
//! role(r, a, b)        rsub(r1 o r2 o r3, s)
//! C ::= bot | top | NAME | and(C, C, ...) | some(r, C) | one(a)
//! ```
//!
//! `and` with more than two arguments associates to the left. Lines starting
//! with `#` are comments.

use std::fmt;

use thiserror::Error;

use crate::kb::{
    ConceptId, IndividualId, NormalizedAxiom, RoleId, Signature, Theory, BOTTOM_NAME, TOP_NAME,
};

#[derive(Clone, Debug, PartialEq, Eq, Hash)]
pub enum ConceptExpr {
    Bot,
    Top,
    Name(ConceptId),
    And(Box<ConceptExpr>, Box<ConceptExpr>),
    Some(RoleId, Box<ConceptExpr>),
    Nominal(IndividualId),
}

impl ConceptExpr {
    pub fn and(a: ConceptExpr, b: ConceptExpr) -> Self {
        ConceptExpr::And(Box::new(a), Box::new(b))
    }

    pub fn some(r: RoleId, c: ConceptExpr) -> Self {
        ConceptExpr::Some(r, Box::new(c))
    }

    fn is_atomic(&self) -> bool {
        matches!(
            self,
            ConceptExpr::Bot | ConceptExpr::Top | ConceptExpr::Name(_) | ConceptExpr::Nominal(_)
        )
    }
}

#[derive(Clone, Debug, PartialEq, Eq)]
pub enum InputAxiom {
    Sub(ConceptExpr, ConceptExpr),
    Equiv(ConceptExpr, ConceptExpr),
    Instance(ConceptExpr, IndividualId),
    RoleAssertion(RoleId, IndividualId, IndividualId),
    RoleChainSub(Vec<RoleId>, RoleId),
}

#[derive(Debug, Error, PartialEq, Eq)]
pub enum ElppError {
    #[error("input is not valid UTF-8: {0}")]
    Utf8(String),
    #[error("line {line}, column {column}: {message}")]
    Syntax {
        line: usize,
        column: usize,
        message: String,
    },
}

/// Fresh names introduced by [`normalize`], each with the expression it stands for.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct FreshLedger {
    pub entries: Vec<(String, String)>,
}

impl FreshLedger {
    /// Tab-separated `name<TAB>expression` lines.
    pub fn to_tsv(&self) -> String {
        let mut out = String::new();
        for (name, expr) in &self.entries {
            out.push_str(name);
            out.push('\t');
            out.push_str(expr);
            out.push('\n');
        }
        out
    }
}

pub fn parse_input_bytes(bytes: &[u8], sig: &mut Signature) -> Result<Vec<InputAxiom>, ElppError> {
    let text = std::str::from_utf8(bytes).map_err(|e| ElppError::Utf8(e.to_string()))?;
    parse_input(text, sig)
}

/// Parses `.elpp` text, interning names into `sig` in order of first occurrence.
pub fn parse_input(text: &str, sig: &mut Signature) -> Result<Vec<InputAxiom>, ElppError> {
    let mut out = Vec::new();
    for (idx, raw) in text.lines().enumerate() {
        let trimmed = raw.trim_start();
        if trimmed.is_empty() || trimmed.starts_with('#') {
            continue;
        }
        let mut p = Parser::new(raw, idx + 1, sig);
        let ax = p.statement()?;
        p.skip_ws();
        if p.pos < p.chars.len() {
            return Err(p.error("trailing input after statement"));
        }
        out.push(ax);
    }
    Ok(out)
}

struct Parser<'a> {
    chars: Vec<char>,
    pos: usize,
    line: usize,
    sig: &'a mut Signature,
}

fn is_name_char(c: char) -> bool {
    !c.is_whitespace() && !matches!(c, '(' | ')' | ',')
}

impl<'a> Parser<'a> {
    fn new(text: &str, line: usize, sig: &'a mut Signature) -> Self {
        Parser {
            chars: text.chars().collect(),
            pos: 0,
            line,
            sig,
        }
    }

    fn error(&self, message: impl Into<String>) -> ElppError {
        ElppError::Syntax {
            line: self.line,
            column: self.pos + 1,
            message: message.into(),
        }
    }

    fn skip_ws(&mut self) {
        while self.pos < self.chars.len() && self.chars[self.pos].is_whitespace() {
            self.pos += 1;
        }
    }

    fn peek(&mut self) -> Option<char> {
        self.skip_ws();
        self.chars.get(self.pos).copied()
    }

    fn expect(&mut self, c: char) -> Result<(), ElppError> {
        if self.peek() == Some(c) {
            self.pos += 1;
            Ok(())
        } else {
            Err(self.error(format!("expected `{c}`")))
        }
    }

    fn ident(&mut self) -> Result<String, ElppError> {
        self.skip_ws();
        let start = self.pos;
        while self.pos < self.chars.len() && is_name_char(self.chars[self.pos]) {
            self.pos += 1;
        }
        if start == self.pos {
            return Err(self.error("expected a name"));
        }
        Ok(self.chars[start..self.pos].iter().collect())
    }

    fn statement(&mut self) -> Result<InputAxiom, ElppError> {
        let start = self.pos;
        let kw = self.ident()?;
        self.expect('(')?;
        let ax = match kw.as_str() {
            "sub" | "equiv" => {
                let c = self.concept()?;
                self.expect(',')?;
                let d = self.concept()?;
                if kw == "sub" {
                    InputAxiom::Sub(c, d)
                } else {
                    InputAxiom::Equiv(c, d)
                }
            }
            "instance" => {
                let c = self.concept()?;
                self.expect(',')?;
                let a = self.individual()?;
                InputAxiom::Instance(c, a)
            }
            "role" => {
                let r = self.role()?;
                self.expect(',')?;
                let a = self.individual()?;
                self.expect(',')?;
                let b = self.individual()?;
                InputAxiom::RoleAssertion(r, a, b)
            }
            "rsub" => {
                let mut chain = vec![self.role()?];
                loop {
                    self.skip_ws();
                    let save = self.pos;
                    let word = self.ident();
                    match word {
                        Ok(w) if w == "o" => chain.push(self.role()?),
                        _ => {
                            self.pos = save;
                            break;
                        }
                    }
                }
                self.expect(',')?;
                let s = self.role()?;
                InputAxiom::RoleChainSub(chain, s)
            }
            _ => {
                self.pos = start;
                return Err(self.error(format!("unknown statement `{kw}`")));
            }
        };
        self.expect(')')?;
        Ok(ax)
    }

    fn role(&mut self) -> Result<RoleId, ElppError> {
        let name = self.ident()?;
        Ok(self.sig.intern_role(&name))
    }

    fn individual(&mut self) -> Result<IndividualId, ElppError> {
        let name = self.ident()?;
        Ok(self.sig.intern_individual(&name))
    }

    fn concept(&mut self) -> Result<ConceptExpr, ElppError> {
        let name = self.ident()?;
        let next_is_paren = self.peek() == Some('(');
        match (name.as_str(), next_is_paren) {
            ("bot", false) => Ok(ConceptExpr::Bot),
            ("top", false) => Ok(ConceptExpr::Top),
            ("and", true) => {
                self.expect('(')?;
                let mut acc = self.concept()?;
                let mut n = 1;
                while self.peek() == Some(',') {
                    self.pos += 1;
                    acc = ConceptExpr::and(acc, self.concept()?);
                    n += 1;
                }
                if n < 2 {
                    return Err(self.error("`and` needs at least two arguments"));
                }
                self.expect(')')?;
                Ok(acc)
            }
            ("some", true) => {
                self.expect('(')?;
                let r = self.role()?;
                self.expect(',')?;
                let c = self.concept()?;
                self.expect(')')?;
                Ok(ConceptExpr::some(r, c))
            }
            ("one", true) => {
                self.expect('(')?;
                let a = self.individual()?;
                self.expect(')')?;
                Ok(ConceptExpr::Nominal(a))
            }
            (_, true) => Err(self.error(format!("unknown constructor `{name}`"))),
            (TOP_NAME, false) => Ok(ConceptExpr::Top),
            (BOTTOM_NAME, false) => Ok(ConceptExpr::Bot),
            (_, false) => Ok(ConceptExpr::Name(self.sig.intern_concept(&name))),
        }
    }
}

/// Renders expressions and axioms back into `.elpp` syntax.
pub struct Printer<'a>(pub &'a Signature);

impl Printer<'_> {
    pub fn concept(&self, c: &ConceptExpr) -> String {
        let mut s = String::new();
        self.write_concept(c, &mut s);
        s
    }

    fn write_concept(&self, c: &ConceptExpr, out: &mut String) {
        match c {
            ConceptExpr::Bot => out.push_str("bot"),
            ConceptExpr::Top => out.push_str("top"),
            ConceptExpr::Name(id) => out.push_str(self.0.concept_name(*id)),
            ConceptExpr::And(a, b) => {
                out.push_str("and(");
                self.write_concept(a, out);
                out.push_str(", ");
                self.write_concept(b, out);
                out.push(')');
            }
            ConceptExpr::Some(r, f) => {
                out.push_str("some(");
                out.push_str(self.0.role_name(*r));
                out.push_str(", ");
                self.write_concept(f, out);
                out.push(')');
            }
            ConceptExpr::Nominal(a) => {
                out.push_str("one(");
                out.push_str(self.0.individual_name(*a));
                out.push(')');
            }
        }
    }

    pub fn axiom(&self, ax: &InputAxiom) -> String {
        match ax {
            InputAxiom::Sub(c, d) => format!("sub({}, {})", self.concept(c), self.concept(d)),
            InputAxiom::Equiv(c, d) => format!("equiv({}, {})", self.concept(c), self.concept(d)),
            InputAxiom::Instance(c, a) => {
                format!("instance({}, {})", self.concept(c), self.0.individual_name(*a))
            }
            InputAxiom::RoleAssertion(r, a, b) => format!(
                "role({}, {}, {})",
                self.0.role_name(*r),
                self.0.individual_name(*a),
                self.0.individual_name(*b)
            ),
            InputAxiom::RoleChainSub(chain, s) => {
                let names: Vec<&str> = chain.iter().map(|r| self.0.role_name(*r)).collect();
                format!("rsub({}, {})", names.join(" o "), self.0.role_name(*s))
            }
        }
    }
}

impl fmt::Display for FreshLedger {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(&self.to_tsv())
    }
}

/// The concept name used for the nominal `{a}`.
pub fn nominal_name(individual: &str) -> String {
    format!("{{{individual}}}")
}

struct Normalizer {
    sig: Signature,
    out: Vec<NormalizedAxiom>,
    ledger: FreshLedger,
    next_concept: usize,
    next_role: usize,
}

impl Normalizer {
    fn fresh_concept(&mut self, describes: String) -> ConceptId {
        loop {
            self.next_concept += 1;
            let name = format!("_N{}", self.next_concept);
            if self.sig.concept(&name).is_none() {
                self.ledger.entries.push((name.clone(), describes));
                return self.sig.intern_concept(&name);
            }
        }
    }

    fn fresh_role(&mut self, describes: String) -> RoleId {
        loop {
            self.next_role += 1;
            let name = format!("_u{}", self.next_role);
            if self.sig.role(&name).is_none() {
                self.ledger.entries.push((name.clone(), describes));
                return self.sig.intern_role(&name);
            }
        }
    }

    fn describe(&self, c: &ConceptExpr) -> String {
        Printer(&self.sig).concept(c)
    }

    fn atom(&mut self, c: &ConceptExpr) -> ConceptId {
        match c {
            ConceptExpr::Bot => ConceptId::BOTTOM,
            ConceptExpr::Top => ConceptId::TOP,
            ConceptExpr::Name(id) => *id,
            ConceptExpr::Nominal(a) => {
                let name = nominal_name(self.sig.individual_name(*a));
                self.sig.intern_concept(&name)
            }
            _ => unreachable!("atom() on a complex expression"),
        }
    }

    /// Names a complex left-hand operand: emits `c ⊑ N` and returns N.
    fn lhs_atom(&mut self, c: &ConceptExpr) -> ConceptId {
        if c.is_atomic() {
            return self.atom(c);
        }
        let text = self.describe(c);
        let n = self.fresh_concept(text);
        self.lhs(c, n);
        n
    }

    /// Names a complex right-hand filler: emits `N ⊑ c` and returns N.
    fn rhs_atom(&mut self, c: &ConceptExpr) -> ConceptId {
        if c.is_atomic() {
            return self.atom(c);
        }
        let text = self.describe(c);
        let n = self.fresh_concept(text);
        self.sub(&ConceptExpr::Name(n), c);
        n
    }

    /// Emits normal forms for `c ⊑ d` where `d` is already atomic.
    fn lhs(&mut self, c: &ConceptExpr, d: ConceptId) {
        match c {
            ConceptExpr::Bot => {}
            c if c.is_atomic() => {
                let sub = self.atom(c);
                self.out.push(NormalizedAxiom::Gci0 { sub, sup: d }.canonical());
            }
            ConceptExpr::And(a, b) => {
                let left = self.lhs_atom(a);
                let right = self.lhs_atom(b);
                self.out.push(NormalizedAxiom::Gci1 { left, right, sup: d }.canonical());
            }
            ConceptExpr::Some(r, f) => {
                let filler = self.lhs_atom(f);
                self.out.push(NormalizedAxiom::Gci3 { role: *r, filler, sup: d }.canonical());
            }
            _ => unreachable!(),
        }
    }

    fn sub(&mut self, c: &ConceptExpr, d: &ConceptExpr) {
        if *c == ConceptExpr::Bot {
            return;
        }
        match d {
            ConceptExpr::And(d1, d2) => {
                // A complex left side is named once and shared by both conjuncts.
                if c.is_atomic() {
                    self.sub(c, d1);
                    self.sub(c, d2);
                } else {
                    let x = self.lhs_atom(c);
                    let xc = ConceptExpr::Name(x);
                    self.sub(&xc, d1);
                    self.sub(&xc, d2);
                }
            }
            ConceptExpr::Some(r, f) => {
                let filler = self.rhs_atom(f);
                let sub = self.lhs_atom(c);
                self.out.push(NormalizedAxiom::Gci2 { sub, role: *r, filler });
            }
            d => {
                let sup = self.atom(d);
                self.lhs(c, sup);
            }
        }
    }

    fn chain(&mut self, chain: &[RoleId], s: RoleId) {
        match chain {
            [] => {}
            [r] => self.out.push(NormalizedAxiom::Ri0 { sub: *r, sup: s }),
            [r1, r2] => self.out.push(NormalizedAxiom::Ri1 {
                first: *r1,
                second: *r2,
                sup: s,
            }),
            _ => {
                let mut acc = chain[0];
                let mut text = self.sig.role_name(acc).to_owned();
                let last = chain.len() - 1;
                for &r in &chain[1..last] {
                    text = format!("{text} o {}", self.sig.role_name(r));
                    let u = self.fresh_role(text.clone());
                    self.out.push(NormalizedAxiom::Ri1 {
                        first: acc,
                        second: r,
                        sup: u,
                    });
                    acc = u;
                }
                self.out.push(NormalizedAxiom::Ri1 {
                    first: acc,
                    second: chain[last],
                    sup: s,
                });
            }
        }
    }
}

/// Reads a normal-form axiom back as an input axiom over the same signature.
pub fn as_input(ax: &NormalizedAxiom) -> InputAxiom {
    let c = |id: ConceptId| match id {
        ConceptId::TOP => ConceptExpr::Top,
        ConceptId::BOTTOM => ConceptExpr::Bot,
        id => ConceptExpr::Name(id),
    };
    match *ax {
        NormalizedAxiom::Gci0 { sub, sup } => InputAxiom::Sub(c(sub), c(sup)),
        NormalizedAxiom::Gci1 { left, right, sup } => InputAxiom::Sub(ConceptExpr::and(c(left), c(right)), c(sup)),
        NormalizedAxiom::Gci2 { sub, role, filler } => InputAxiom::Sub(c(sub), ConceptExpr::some(role, c(filler))),
        NormalizedAxiom::Gci3 { role, filler, sup } => InputAxiom::Sub(ConceptExpr::some(role, c(filler)), c(sup)),
        NormalizedAxiom::Gci0Bot { sub } => InputAxiom::Sub(c(sub), ConceptExpr::Bot),
        NormalizedAxiom::Gci1Bot { left, right } => {
            InputAxiom::Sub(ConceptExpr::and(c(left), c(right)), ConceptExpr::Bot)
        }
        NormalizedAxiom::Gci3Bot { role, filler } => InputAxiom::Sub(ConceptExpr::some(role, c(filler)), ConceptExpr::Bot),
        NormalizedAxiom::Ri0 { sub, sup } => InputAxiom::RoleChainSub(vec![sub], sup),
        NormalizedAxiom::Ri1 { first, second, sup } => InputAxiom::RoleChainSub(vec![first, second], sup),
    }
}

/// Rewrites input axioms into the nine normal forms.
///
/// `sig` must be the signature the axioms were parsed against; it is extended
/// with nominal concepts `{a}` and fresh `_N#` concepts / `_u#` roles.
pub fn normalize(axioms: &[InputAxiom], sig: Signature) -> (Theory, FreshLedger) {
    let mut n = Normalizer {
        sig,
        out: Vec::new(),
        ledger: FreshLedger::default(),
        next_concept: 0,
        next_role: 0,
    };
    for ax in axioms {
        match ax {
            InputAxiom::Sub(c, d) => n.sub(c, d),
            InputAxiom::Equiv(c, d) => {
                n.sub(c, d);
                n.sub(d, c);
            }
            InputAxiom::Instance(c, a) => n.sub(&ConceptExpr::Nominal(*a), c),
            InputAxiom::RoleAssertion(r, a, b) => {
                let sub = n.atom(&ConceptExpr::Nominal(*a));
                let filler = n.atom(&ConceptExpr::Nominal(*b));
                n.out.push(NormalizedAxiom::Gci2 { sub, role: *r, filler });
            }
            InputAxiom::RoleChainSub(chain, s) => n.chain(chain, *s),
        }
    }
    let mut theory = Theory::new(n.sig);
    for ax in n.out {
        theory.push(ax);
    }
    (theory, n.ledger)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::kb::Variant;

    fn run(text: &str) -> (Theory, FreshLedger) {
        let mut sig = Signature::new();
        let axioms = parse_input(text, &mut sig).unwrap();
        normalize(&axioms, sig)
    }

    fn lines(t: &Theory) -> Vec<String> {
        t.axioms().iter().map(|a| a.to_line(&t.signature)).collect()
    }

    #[test]
    fn conjunction_on_right_splits() {
        let (t, _) = run("sub(B, and(C, D))");
        assert_eq!(lines(&t), vec!["GCI0 B C", "GCI0 B D"]);
    }

    #[test]
    fn bottom_left_dropped() {
        let (t, _) = run("sub(bot, D)");
        assert!(t.is_empty());
    }

    #[test]
    fn normal_input_unchanged() {
        let (t, ledger) = run("sub(A, B)");
        assert_eq!(lines(&t), vec!["GCI0 A B"]);
        assert!(ledger.entries.is_empty());
    }

    #[test]
    fn existential_over_conjunction() {
        let (t, ledger) = run("sub(some(r, and(A, B)), C)");
        assert_eq!(lines(&t), vec!["GCI1 A B _N1", "GCI3 r _N1 C"]);
        assert_eq!(ledger.entries, vec![("_N1".to_owned(), "and(A, B)".to_owned())]);
    }

    #[test]
    fn long_chain_uses_fresh_roles() {
        let (t, _) = run("rsub(r1 o r2 o r3, s)");
        assert_eq!(lines(&t), vec!["RI1 r1 r2 _u1", "RI1 _u1 r3 s"]);
    }

    #[test]
    fn abox_conversion() {
        let (t, _) = run("instance(A, a)\nrole(r, a, b)");
        assert_eq!(lines(&t), vec!["GCI0 {a} A", "GCI2 {a} r {b}"]);
    }

    #[test]
    fn disjointness_of_existentials() {
        let (t, _) = run("sub(and(some(hf, one(GO1)), some(hf, one(GO2))), bot)");
        let stats = t.stats();
        assert_eq!(stats.count(Variant::Gci1Bot), 1);
        assert_eq!(stats.count(Variant::Gci3), 2);
    }

    #[test]
    fn fresh_names_avoid_collisions() {
        let (t, _) = run("sub(_N1, X)\nsub(some(r, and(A, B)), C)");
        assert!(t.signature.concept("_N2").is_some());
        assert_eq!(lines(&t)[1], "GCI1 A B _N2");
    }

    #[test]
    fn parse_errors_have_position() {
        let mut sig = Signature::new();
        let err = parse_input("sub(A, B)\nsub(A B)", &mut sig).unwrap_err();
        match err {
            ElppError::Syntax { line, .. } => assert_eq!(line, 2),
            other => panic!("unexpected {other:?}"),
        }
        assert!(parse_input("frob(A)", &mut sig).is_err());
        assert!(parse_input("sub(and(A), B)", &mut sig).is_err());
    }

    #[test]
    fn parse_examples() {
        let mut sig = Signature::new();
        let ax = parse_input("rsub(r o s, t)", &mut sig).unwrap();
        assert_eq!(
            ax,
            vec![InputAxiom::RoleChainSub(
                vec![sig.role("r").unwrap(), sig.role("s").unwrap()],
                sig.role("t").unwrap()
            )]
        );
        let ax = parse_input("sub(and(GO1,GO2), bot)", &mut sig).unwrap();
        let go1 = ConceptExpr::Name(sig.concept("GO1").unwrap());
        let go2 = ConceptExpr::Name(sig.concept("GO2").unwrap());
        assert_eq!(ax, vec![InputAxiom::Sub(ConceptExpr::and(go1, go2), ConceptExpr::Bot)]);
    }

    #[test]
    fn printer_round_trip() {
        let text = "sub(and(and(A, B), C), some(r, one(x)))\nequiv(top, bot)\ninstance(some(hf, GO1), p1)\nrole(r, a, b)\nrsub(r o s o t, u)";
        let mut sig = Signature::new();
        let ax = parse_input(text, &mut sig).unwrap();
        let printed: Vec<String> = ax.iter().map(|a| Printer(&sig).axiom(a)).collect();
        let mut sig2 = Signature::new();
        let again = parse_input(&printed.join("\n"), &mut sig2).unwrap();
        assert_eq!(ax, again);
        assert_eq!(sig, sig2);
    }

    #[test]
    fn normal_forms_are_fixed_points() {
        let text = "GCI0 A B\nGCI1 A B C\nGCI2 A r owl:Thing\nGCI3 r A B\nGCI0_BOT C\nGCI1_BOT A C\nGCI3_BOT r C\nRI0 r s\nRI1 r s t\n";
        let t = crate::kb::parse_normalized_str(text).unwrap();
        let input: Vec<InputAxiom> = t.axioms().iter().map(as_input).collect();
        let (again, ledger) = normalize(&input, t.signature.clone());
        assert!(ledger.entries.is_empty());
        assert_eq!(again.axioms(), t.axioms());
    }
}
