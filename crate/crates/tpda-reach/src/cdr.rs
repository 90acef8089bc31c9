//! Clock difference relations: constraints between the fractional parts of
//! `x0`-anchored differences before and after a run. A CDR over clock set X
//! is a Boolean combination of atoms `u rel t` where `u, t` range over the
//! terms `{x0}`, `{x0 - x}` (pre side) and `{x0'}`, `{x0' - x'}` (post side).
//!
//! The canonical form of a CDR is the set of weak orderings (ordered
//! partitions) of its term space that satisfy it; two CDRs are logically
//! equivalent iff their canonical sets coincide. Quantifier elimination and
//! relational composition work at the level of terms, where each term is an
//! independent variable ranging over `[0, 1)`.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::constraints::{Atom, Clock, ClockConstraint, Rel};
use crate::qelim::{qe_fractional_atoms, FAtom, FTerm};
use crate::{Error, Result};

/// Which configuration a term talks about. `Mid` appears only inside
/// composition, never in a stored CDR.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Side {
    Pre,
    Mid,
    Post,
}

/// A CDR term.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum TermKind {
    /// `{x0}` on the given side.
    Ref,
    /// `{x0 - x}` for a clock `x ≠ x0`.
    Diff(Clock),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct Term {
    pub side: Side,
    pub kind: TermKind,
}

impl Term {
    pub fn reference(side: Side) -> Term {
        Term { side, kind: TermKind::Ref }
    }
    pub fn diff(side: Side, clock: Clock) -> Term {
        Term { side, kind: TermKind::Diff(clock) }
    }
}

impl fmt::Display for Term {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let side = match self.side {
            Side::Pre => "pre",
            Side::Mid => "mid",
            Side::Post => "post",
        };
        match &self.kind {
            TermKind::Ref => write!(f, "(r {side})"),
            TermKind::Diff(c) => write!(f, "(d {side} {c})"),
        }
    }
}

/// Formula layer over CDR atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum CdrF {
    True,
    False,
    Atom(Term, Rel, Term),
    Not(Box<CdrF>),
    And(Vec<CdrF>),
    Or(Vec<CdrF>),
}

impl CdrF {
    pub fn and(mut parts: Vec<CdrF>) -> CdrF {
        parts.retain(|c| !matches!(c, CdrF::True));
        if parts.iter().any(|c| matches!(c, CdrF::False)) {
            return CdrF::False;
        }
        match parts.len() {
            0 => CdrF::True,
            1 => parts.pop().unwrap(),
            _ => CdrF::And(parts),
        }
    }

    pub fn or(mut parts: Vec<CdrF>) -> CdrF {
        parts.retain(|c| !matches!(c, CdrF::False));
        if parts.iter().any(|c| matches!(c, CdrF::True)) {
            return CdrF::True;
        }
        match parts.len() {
            0 => CdrF::False,
            1 => parts.pop().unwrap(),
            _ => CdrF::Or(parts),
        }
    }

    pub fn not(c: CdrF) -> CdrF {
        match c {
            CdrF::True => CdrF::False,
            CdrF::False => CdrF::True,
            other => CdrF::Not(Box::new(other)),
        }
    }

    pub fn atom(u: Term, rel: Rel, t: Term) -> CdrF {
        CdrF::Atom(u, rel, t)
    }

    pub fn eq(u: Term, t: Term) -> CdrF {
        CdrF::Atom(u, Rel::Eq, t)
    }

    pub fn visit_terms(&self, f: &mut impl FnMut(&Term)) {
        match self {
            CdrF::True | CdrF::False => {}
            CdrF::Atom(u, _, t) => {
                f(u);
                f(t);
            }
            CdrF::Not(c) => c.visit_terms(f),
            CdrF::And(cs) | CdrF::Or(cs) => cs.iter().for_each(|c| c.visit_terms(f)),
        }
    }

    /// Evaluate under a rank assignment.
    pub fn eval(&self, value: &impl Fn(&Term) -> u8) -> bool {
        match self {
            CdrF::True => true,
            CdrF::False => false,
            CdrF::Atom(u, rel, t) => rel.eval(&value(u), &value(t)),
            CdrF::Not(c) => !c.eval(value),
            CdrF::And(cs) => cs.iter().all(|c| c.eval(value)),
            CdrF::Or(cs) => cs.iter().any(|c| c.eval(value)),
        }
    }

    /// Evaluate under exact rational term values.
    pub fn eval_exact(&self, value: &impl Fn(&Term) -> crate::rat::Q) -> bool {
        match self {
            CdrF::True => true,
            CdrF::False => false,
            CdrF::Atom(u, rel, t) => rel.eval(&value(u), &value(t)),
            CdrF::Not(c) => !c.eval_exact(value),
            CdrF::And(cs) => cs.iter().all(|c| c.eval_exact(value)),
            CdrF::Or(cs) => cs.iter().any(|c| c.eval_exact(value)),
        }
    }

    pub fn map_sides(&self, f: &impl Fn(Side) -> Side) -> CdrF {
        match self {
            CdrF::True => CdrF::True,
            CdrF::False => CdrF::False,
            CdrF::Atom(u, rel, t) => CdrF::Atom(
                Term { side: f(u.side), kind: u.kind.clone() },
                *rel,
                Term { side: f(t.side), kind: t.kind.clone() },
            ),
            CdrF::Not(c) => CdrF::not(c.map_sides(f)),
            CdrF::And(cs) => CdrF::and(cs.iter().map(|c| c.map_sides(f)).collect()),
            CdrF::Or(cs) => CdrF::or(cs.iter().map(|c| c.map_sides(f)).collect()),
        }
    }

    pub fn rename_clocks(&self, f: &impl Fn(&Clock) -> Clock) -> CdrF {
        match self {
            CdrF::True => CdrF::True,
            CdrF::False => CdrF::False,
            CdrF::Atom(u, rel, t) => {
                let m = |t: &Term| Term {
                    side: t.side,
                    kind: match &t.kind {
                        TermKind::Ref => TermKind::Ref,
                        TermKind::Diff(c) => TermKind::Diff(f(c)),
                    },
                };
                CdrF::Atom(m(u), *rel, m(t))
            }
            CdrF::Not(c) => CdrF::not(c.rename_clocks(f)),
            CdrF::And(cs) => CdrF::and(cs.iter().map(|c| c.rename_clocks(f)).collect()),
            CdrF::Or(cs) => CdrF::or(cs.iter().map(|c| c.rename_clocks(f)).collect()),
        }
    }
}

/// A clock difference relation: a clock set (the reference clock is
/// implicit) plus a formula over pre/post terms of those clocks.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct Cdr {
    /// Clocks other than the reference `x0`.
    pub clocks: BTreeSet<Clock>,
    pub formula: CdrF,
}

impl Cdr {
    pub fn new(clocks: BTreeSet<Clock>, formula: CdrF) -> Cdr {
        Cdr { clocks, formula }
    }

    /// All terms of the CDR's term space, mentioned or not.
    pub fn term_space(&self) -> Vec<Term> {
        let mut out = Vec::new();
        for side in [Side::Pre, Side::Post] {
            out.push(Term::reference(side));
            for c in &self.clocks {
                out.push(Term::diff(side, c.clone()));
            }
        }
        out
    }
}

/// The identity relation: `{x0'} = {x0}` and every difference preserved.
pub fn cdr_identity(clocks: &BTreeSet<Clock>) -> Cdr {
    let mut parts = vec![CdrF::eq(Term::reference(Side::Post), Term::reference(Side::Pre))];
    for c in clocks {
        parts.push(CdrF::eq(Term::diff(Side::Post, c.clone()), Term::diff(Side::Pre, c.clone())));
    }
    Cdr::new(clocks.clone(), CdrF::and(parts))
}

/// Translate a fractional clock constraint into CDR form on one side:
/// `{x} = 0` becomes `{x0-x} = {x0}`, `{x} ≤ {y}` the three-ordering
/// disjunction. If the constraint mentions the reference clock itself, the
/// atom is encoded by enumerating orderings of the involved terms.
pub fn encode_fractional(
    c: &ClockConstraint,
    side: Side,
    x0: &Clock,
    clocks: &BTreeSet<Clock>,
) -> Result<Cdr> {
    let mut err = None;
    let formula = cf_to_cdrf(c, side, x0, &mut err);
    match err {
        Some(e) => Err(e),
        None => Ok(Cdr::new(clocks.clone(), formula)),
    }
}

fn cf_to_cdrf(c: &ClockConstraint, side: Side, x0: &Clock, err: &mut Option<Error>) -> CdrF {
    match c {
        ClockConstraint::True => CdrF::True,
        ClockConstraint::False => CdrF::False,
        ClockConstraint::Not(inner) => CdrF::not(cf_to_cdrf(inner, side, x0, err)),
        ClockConstraint::And(cs) => CdrF::and(cs.iter().map(|c| cf_to_cdrf(c, side, x0, err)).collect()),
        ClockConstraint::Or(cs) => CdrF::or(cs.iter().map(|c| cf_to_cdrf(c, side, x0, err)).collect()),
        ClockConstraint::Atom(a) => match a {
            Atom::FracConst { x, rel } => {
                if x == x0 {
                    // {x0} rel 0: decided by enumerating the reference term
                    // alone ({x0 - x0} = 0 identically).
                    return encode_by_enumeration(x, None, *rel, side, x0);
                }
                let d = Term::diff(side, x.clone());
                let r = Term::reference(side);
                let eqv = CdrF::eq(d, r);
                match rel {
                    Rel::Eq | Rel::Le => eqv,
                    Rel::Lt => CdrF::False,
                    Rel::Ge => CdrF::True,
                    Rel::Gt => CdrF::not(eqv),
                }
            }
            Atom::FracDiag { x, y, rel } => {
                if x == x0 || y == x0 {
                    encode_by_enumeration(x, Some(y), *rel, side, x0)
                } else {
                    encode_frac_diag(x, y, *rel, side)
                }
            }
            other => {
                *err = Some(Error::input(format!(
                    "cannot encode non-fractional atom as a CDR: {other:?}"
                )));
                CdrF::False
            }
        },
    }
}

fn encode_frac_diag(x: &Clock, y: &Clock, rel: Rel, side: Side) -> CdrF {
    let dx = Term::diff(side, x.clone());
    let dy = Term::diff(side, y.clone());
    let r = Term::reference(side);
    match rel {
        // {x} ≤ {y} iff {x0-x} ≤ {x0} < {x0-y} ∨ {x0} < {x0-y} ≤ {x0-x}
        //            ∨ {x0-y} ≤ {x0-x} ≤ {x0}; the comparison against the
        // reference is strict exactly where the difference term has wrapped
        // past it ({x0-y} = {x0} means {y} = 0, which is unwrapped).
        Rel::Le => CdrF::or(vec![
            CdrF::and(vec![
                CdrF::atom(dx.clone(), Rel::Le, r.clone()),
                CdrF::atom(r.clone(), Rel::Lt, dy.clone()),
            ]),
            CdrF::and(vec![
                CdrF::atom(r.clone(), Rel::Lt, dy.clone()),
                CdrF::atom(dy.clone(), Rel::Le, dx.clone()),
            ]),
            CdrF::and(vec![
                CdrF::atom(dy.clone(), Rel::Le, dx.clone()),
                CdrF::atom(dx.clone(), Rel::Le, r.clone()),
            ]),
        ]),
        Rel::Eq => CdrF::eq(dx, dy),
        Rel::Ge => encode_frac_diag(y, x, Rel::Le, side),
        Rel::Lt => CdrF::not(encode_frac_diag(y, x, Rel::Le, side)),
        Rel::Gt => CdrF::not(encode_frac_diag(x, y, Rel::Le, side)),
    }
}

/// Encoding for atoms that touch the reference clock: enumerate weak orders
/// of the involved terms and keep those whose induced fractional valuations
/// satisfy the original atom. `y = None` compares `{x}` against 0.
fn encode_by_enumeration(x: &Clock, y: Option<&Clock>, rel: Rel, side: Side, x0: &Clock) -> CdrF {
    use crate::rat;
    let mut terms: Vec<Term> = vec![Term::reference(side)];
    for c in [Some(x), y].into_iter().flatten() {
        if c != x0 {
            let t = Term::diff(side, c.clone());
            if !terms.contains(&t) {
                terms.push(t);
            }
        }
    }
    let mut good = Vec::new();
    for order in weak_orders(terms.len()) {
        let blocks = order.iter().copied().max().map(|m| m as i64 + 1).unwrap_or(1);
        let value_of = |t: &Term| -> rat::Q {
            let i = terms.iter().position(|u| u == t).unwrap();
            rat::qr(order[i] as i64, blocks + 1)
        };
        let frac_of = |c: &Clock| -> rat::Q {
            let v0 = value_of(&Term::reference(side));
            if c == x0 {
                v0
            } else {
                rat::fract(&(v0 - value_of(&Term::diff(side, c.clone()))))
            }
        };
        let holds = match y {
            Some(y) => rel.eval(&frac_of(x), &frac_of(y)),
            None => rel.eval(&frac_of(x), &rat::zero()),
        };
        if holds {
            good.push(order_to_formula(&terms, &order));
        }
    }
    CdrF::or(good)
}

fn order_to_formula(terms: &[Term], order: &[u8]) -> CdrF {
    let mut parts = Vec::new();
    for i in 0..terms.len() {
        for j in (i + 1)..terms.len() {
            let rel = match order[i].cmp(&order[j]) {
                std::cmp::Ordering::Less => Rel::Lt,
                std::cmp::Ordering::Equal => Rel::Eq,
                std::cmp::Ordering::Greater => Rel::Gt,
            };
            parts.push(CdrF::atom(terms[i].clone(), rel, terms[j].clone()));
        }
    }
    CdrF::and(parts)
}

/// All weak orders of `n` elements as rank vectors: surjections onto
/// `{0..k-1}` for every `k ≤ n`.
pub fn weak_orders(n: usize) -> Vec<Vec<u8>> {
    if n == 0 {
        return vec![vec![]];
    }
    let mut orders = Vec::new();
    let mut v = vec![0u8; n];
    fn gen(i: usize, k: u8, v: &mut Vec<u8>, orders: &mut Vec<Vec<u8>>) {
        if i == v.len() {
            let mut seen = vec![false; k as usize];
            for &r in v.iter() {
                seen[r as usize] = true;
            }
            if seen.iter().all(|&b| b) {
                orders.push(v.clone());
            }
            return;
        }
        for r in 0..k {
            v[i] = r;
            gen(i + 1, k, v, orders);
        }
    }
    for k in 1..=n {
        gen(0, k as u8, &mut v, &mut orders);
    }
    orders
}

/// Canonical form: the set of weak orderings of the term space satisfying
/// the CDR.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct CdrCanonical {
    pub terms: Vec<Term>,
    pub sat: BTreeSet<Vec<u8>>,
}

impl CdrCanonical {
    pub fn is_empty(&self) -> bool {
        self.sat.is_empty()
    }
}

pub fn canonical(cdr: &Cdr) -> CdrCanonical {
    let terms = cdr.term_space();
    let index: BTreeMap<&Term, usize> = terms.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut sat = BTreeSet::new();
    for order in weak_orders(terms.len()) {
        let value = |t: &Term| -> u8 { order[index[t]] };
        if cdr.formula.eval(&value) {
            sat.insert(order);
        }
    }
    CdrCanonical { terms, sat }
}

/// Representative rational values for an ordered partition: rank `r` among
/// `k` blocks maps to `(r+1)/(k+2)`, strictly inside `(0, 1)`.
pub fn order_representative(terms: &[Term], order: &[u8]) -> BTreeMap<Term, crate::rat::Q> {
    let blocks = order.iter().copied().max().map(|m| m as i64 + 1).unwrap_or(1);
    terms
        .iter()
        .zip(order.iter())
        .map(|(t, r)| (t.clone(), crate::rat::qr(*r as i64 + 1, blocks + 2)))
        .collect()
}

fn cdrf_to_dnf(f: &CdrF) -> Vec<Vec<(Term, Rel, Term)>> {
    fn push_neg(f: &CdrF, neg: bool) -> CdrF {
        match f {
            CdrF::True => {
                if neg {
                    CdrF::False
                } else {
                    CdrF::True
                }
            }
            CdrF::False => {
                if neg {
                    CdrF::True
                } else {
                    CdrF::False
                }
            }
            CdrF::Atom(u, rel, t) => {
                if !neg {
                    f.clone()
                } else {
                    match rel.negate() {
                        Some(r) => CdrF::Atom(u.clone(), r, t.clone()),
                        None => CdrF::or(vec![
                            CdrF::Atom(u.clone(), Rel::Lt, t.clone()),
                            CdrF::Atom(u.clone(), Rel::Gt, t.clone()),
                        ]),
                    }
                }
            }
            CdrF::Not(c) => push_neg(c, !neg),
            CdrF::And(cs) => {
                let parts: Vec<_> = cs.iter().map(|c| push_neg(c, neg)).collect();
                if neg {
                    CdrF::or(parts)
                } else {
                    CdrF::and(parts)
                }
            }
            CdrF::Or(cs) => {
                let parts: Vec<_> = cs.iter().map(|c| push_neg(c, neg)).collect();
                if neg {
                    CdrF::and(parts)
                } else {
                    CdrF::or(parts)
                }
            }
        }
    }
    fn distribute(f: &CdrF) -> Vec<Vec<(Term, Rel, Term)>> {
        match f {
            CdrF::True => vec![vec![]],
            CdrF::False => vec![],
            CdrF::Atom(u, rel, t) => vec![vec![(u.clone(), *rel, t.clone())]],
            CdrF::Not(_) => unreachable!("negations pushed to atoms"),
            CdrF::Or(cs) => cs.iter().flat_map(distribute).collect(),
            CdrF::And(cs) => {
                let mut acc: Vec<Vec<(Term, Rel, Term)>> = vec![vec![]];
                for part in cs {
                    let ds = distribute(part);
                    let mut next = Vec::new();
                    for base in &acc {
                        for d in &ds {
                            let mut m = base.clone();
                            m.extend(d.iter().cloned());
                            next.push(m);
                        }
                    }
                    acc = next;
                }
                acc
            }
        }
    }
    distribute(&push_neg(f, false))
}

fn dnf_to_cdrf(dnf: &[Vec<(Term, Rel, Term)>]) -> CdrF {
    CdrF::or(
        dnf.iter()
            .map(|conj| CdrF::and(conj.iter().map(|(u, r, t)| CdrF::Atom(u.clone(), *r, t.clone())).collect()))
            .collect(),
    )
}

/// Eliminate a list of terms from a CDR formula, disjunct by disjunct. Each
/// term is an independent variable over `[0, 1)`.
pub fn eliminate_terms(formula: &CdrF, kill: &[Term]) -> CdrF {
    let mut dnf = cdrf_to_dnf(formula);
    for t in kill {
        let mut next = Vec::new();
        for conj in &dnf {
            let atoms: Vec<FAtom<Term>> = conj
                .iter()
                .map(|(u, r, v)| FAtom::new(FTerm::Var(u.clone()), *r, FTerm::Var(v.clone())))
                .collect();
            if let Some(out) = qe_fractional_atoms(t, &atoms) {
                let conj2: Vec<(Term, Rel, Term)> = out
                    .into_iter()
                    .filter_map(|a| match (a.lhs, a.rhs) {
                        (FTerm::Var(u), FTerm::Var(v)) => Some((u, a.rel, v)),
                        _ => None,
                    })
                    .collect();
                next.push(conj2);
            }
        }
        dnf = next;
    }
    dnf_to_cdrf(&dnf)
}

/// `∃y. φ` for a clock `y` different from the reference: drops the term
/// `{x0 - y}` on the requested side.
pub fn cdr_qe(cdr: &Cdr, y: &Clock, side: Side, x0: &Clock) -> Result<Cdr> {
    if y == x0 {
        return Err(Error::input("cannot eliminate the reference clock from a CDR"));
    }
    let t = Term::diff(side, y.clone());
    let formula = eliminate_terms(&cdr.formula, &[t]);
    Ok(Cdr::new(cdr.clocks.clone(), formula))
}

/// Eliminate a clock from both sides and drop it from the clock set.
pub fn cdr_qe_both(cdr: &Cdr, y: &Clock, x0: &Clock) -> Result<Cdr> {
    if y == x0 {
        return Err(Error::input("cannot eliminate the reference clock from a CDR"));
    }
    let formula = eliminate_terms(
        &cdr.formula,
        &[Term::diff(Side::Pre, y.clone()), Term::diff(Side::Post, y.clone())],
    );
    let mut clocks = cdr.clocks.clone();
    clocks.remove(y);
    Ok(Cdr::new(clocks, formula))
}

/// Relational composition `∃x̄'. φ(x̄, x̄') ∧ ψ(x̄', x̄'')`: the shared middle
/// terms, including the middle reference, are eliminated one at a time.
pub fn cdr_compose(phi: &Cdr, psi: &Cdr) -> Result<Cdr> {
    if phi.clocks != psi.clocks {
        return Err(Error::input("composition requires identical clock sets"));
    }
    let left = phi.formula.map_sides(&|s| match s {
        Side::Pre => Side::Pre,
        Side::Post => Side::Mid,
        Side::Mid => unreachable!("stored CDRs have no middle side"),
    });
    let right = psi.formula.map_sides(&|s| match s {
        Side::Pre => Side::Mid,
        Side::Post => Side::Post,
        Side::Mid => unreachable!("stored CDRs have no middle side"),
    });
    let mut kill: Vec<Term> = phi.clocks.iter().map(|c| Term::diff(Side::Mid, c.clone())).collect();
    kill.push(Term::reference(Side::Mid));
    let formula = eliminate_terms(&CdrF::and(vec![left, right]), &kill);
    Ok(Cdr::new(phi.clocks.clone(), formula))
}

/// One-step operations of a fractional automaton.
#[derive(Debug, Clone)]
pub enum OneStepOp {
    Elapse,
    Read,
    Test(ClockConstraint),
    Reset(BTreeSet<Clock>),
}

/// The CDR of a single non-stack operation: read is the identity, a test
/// conjoins the encoded constraint onto the identity, reset re-anchors the
/// reset clocks at the new reference, elapse preserves all differences.
pub fn cdr_onestep(op: &OneStepOp, x0: &Clock, clocks: &BTreeSet<Clock>) -> Result<Cdr> {
    match op {
        OneStepOp::Read => Ok(cdr_identity(clocks)),
        OneStepOp::Test(psi) => {
            if !psi.is_fractional() {
                return Err(Error::input("test constraint must be fractional"));
            }
            let tested = encode_fractional(psi, Side::Pre, x0, clocks)?;
            let id = cdr_identity(clocks);
            Ok(Cdr::new(clocks.clone(), CdrF::and(vec![id.formula, tested.formula])))
        }
        OneStepOp::Reset(ys) => {
            if ys.contains(x0) {
                return Err(Error::input("the reference clock is never reset"));
            }
            let mut parts = vec![CdrF::eq(Term::reference(Side::Post), Term::reference(Side::Pre))];
            for c in clocks {
                if ys.contains(c) {
                    parts.push(CdrF::eq(Term::diff(Side::Post, c.clone()), Term::reference(Side::Post)));
                } else {
                    parts.push(CdrF::eq(
                        Term::diff(Side::Post, c.clone()),
                        Term::diff(Side::Pre, c.clone()),
                    ));
                }
            }
            Ok(Cdr::new(clocks.clone(), CdrF::and(parts)))
        }
        OneStepOp::Elapse => {
            let parts = clocks
                .iter()
                .map(|c| CdrF::eq(Term::diff(Side::Post, c.clone()), Term::diff(Side::Pre, c.clone())))
                .collect();
            Ok(Cdr::new(clocks.clone(), CdrF::and(parts)))
        }
    }
}

// ---------------------------------------------------------------------------
// Ordered-partition oracle for composition, used by tests and fixtures.

/// Compose two CDRs by brute force: enumerate weak orders over the
/// three-sided term space, keep those satisfying both relations, and project
/// onto the (pre, post) terms.
pub fn compose_oracle(phi: &Cdr, psi: &Cdr) -> CdrCanonical {
    assert_eq!(phi.clocks, psi.clocks);
    let clocks = &phi.clocks;
    let mut terms: Vec<Term> = Vec::new();
    for side in [Side::Pre, Side::Mid, Side::Post] {
        terms.push(Term::reference(side));
        for c in clocks {
            terms.push(Term::diff(side, c.clone()));
        }
    }
    let out_terms: Vec<Term> = Cdr::new(clocks.clone(), CdrF::True).term_space();
    let phi_m = phi.formula.map_sides(&|s| if s == Side::Post { Side::Mid } else { s });
    let psi_m = psi.formula.map_sides(&|s| if s == Side::Pre { Side::Mid } else { s });
    let index: BTreeMap<&Term, usize> = terms.iter().enumerate().map(|(i, t)| (t, i)).collect();
    let mut sat = BTreeSet::new();
    for order in weak_orders(terms.len()) {
        let value = |t: &Term| -> u8 { order[index[t]] };
        if phi_m.eval(&value) && psi_m.eval(&value) {
            let mut ranks: Vec<u8> = out_terms.iter().map(|t| value(t)).collect();
            let mut uniq: Vec<u8> = ranks.clone();
            uniq.sort_unstable();
            uniq.dedup();
            for r in ranks.iter_mut() {
                *r = uniq.iter().position(|u| u == r).unwrap() as u8;
            }
            sat.insert(ranks);
        }
    }
    CdrCanonical { terms: out_terms, sat }
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat;
    use rand::{Rng, SeedableRng};

    fn ck(n: &str) -> Clock {
        Clock::new(n)
    }

    fn x0() -> Clock {
        ck("x0")
    }

    fn set(names: &[&str]) -> BTreeSet<Clock> {
        names.iter().map(|n| ck(n)).collect()
    }

    #[test]
    fn weak_order_counts_are_fubini_numbers() {
        assert_eq!(weak_orders(0).len(), 1);
        assert_eq!(weak_orders(1).len(), 1);
        assert_eq!(weak_orders(2).len(), 3);
        assert_eq!(weak_orders(3).len(), 13);
        assert_eq!(weak_orders(4).len(), 75);
    }

    #[test]
    fn identity_over_reference_only() {
        let id = cdr_identity(&set(&[]));
        let canon = canonical(&id);
        assert_eq!(canon.terms.len(), 2);
        assert_eq!(canon.sat.len(), 1);
        let truth = Cdr::new(set(&[]), CdrF::True);
        assert_eq!(canonical(&truth).sat.len(), 3);
    }

    #[test]
    fn canonical_of_false_is_empty() {
        let f = Cdr::new(set(&["x1"]), CdrF::False);
        assert!(canonical(&f).is_empty());
    }

    #[test]
    fn canonical_of_ref_le_is_two_of_three() {
        let c = Cdr::new(
            set(&[]),
            CdrF::atom(Term::reference(Side::Pre), Rel::Le, Term::reference(Side::Post)),
        );
        assert_eq!(canonical(&c).sat.len(), 2);
    }

    #[test]
    fn canonical_soundness_on_representatives() {
        let clocks = set(&["x1"]);
        let phi = Cdr::new(
            clocks.clone(),
            CdrF::and(vec![
                CdrF::atom(Term::diff(Side::Pre, ck("x1")), Rel::Lt, Term::reference(Side::Pre)),
                CdrF::atom(Term::reference(Side::Post), Rel::Le, Term::diff(Side::Post, ck("x1"))),
            ]),
        );
        let canon = canonical(&phi);
        for order in weak_orders(canon.terms.len()) {
            let rep = order_representative(&canon.terms, &order);
            let holds = phi.formula.eval_exact(&|t| rep[t].clone());
            assert_eq!(holds, canon.sat.contains(&order));
        }
    }

    #[test]
    fn encode_zero_constraint() {
        let c = ClockConstraint::Atom(Atom::frac_zero(ck("x1")));
        let cdr = encode_fractional(&c, Side::Pre, &x0(), &set(&["x1"])).unwrap();
        let expect = Cdr::new(
            set(&["x1"]),
            CdrF::eq(Term::diff(Side::Pre, ck("x1")), Term::reference(Side::Pre)),
        );
        assert_eq!(canonical(&cdr), canonical(&expect));
    }

    #[test]
    fn encode_le_is_three_way_disjunction_and_correct() {
        let c = ClockConstraint::Atom(Atom::FracDiag { x: ck("x1"), y: ck("x2"), rel: Rel::Le });
        let cdr = encode_fractional(&c, Side::Pre, &x0(), &set(&["x1", "x2"])).unwrap();
        match &cdr.formula {
            CdrF::Or(parts) => assert_eq!(parts.len(), 3),
            other => panic!("expected disjunction, got {other:?}"),
        }
        for a in 0..6 {
            for b in 0..6 {
                for r in 0..6 {
                    let fx = rat::qr(a, 6);
                    let fy = rat::qr(b, 6);
                    let f0 = rat::qr(r, 6);
                    let value = |t: &Term| -> rat::Q {
                        match &t.kind {
                            TermKind::Ref => f0.clone(),
                            TermKind::Diff(c) if c == &ck("x1") => rat::fract(&(f0.clone() - fx.clone())),
                            TermKind::Diff(_) => rat::fract(&(f0.clone() - fy.clone())),
                        }
                    };
                    assert_eq!(cdr.formula.eval_exact(&value), fx <= fy, "a={a} b={b} r={r}");
                }
            }
        }
    }

    #[test]
    fn encode_atom_touching_reference() {
        // {x1} ≤ {x0} must still be encodable
        let c = ClockConstraint::Atom(Atom::FracDiag { x: ck("x1"), y: x0(), rel: Rel::Le });
        let cdr = encode_fractional(&c, Side::Pre, &x0(), &set(&["x1"])).unwrap();
        for a in 0..6 {
            for r in 0..6 {
                let fx = rat::qr(a, 6);
                let f0 = rat::qr(r, 6);
                let value = |t: &Term| -> rat::Q {
                    match &t.kind {
                        TermKind::Ref => f0.clone(),
                        TermKind::Diff(_) => rat::fract(&(f0.clone() - fx.clone())),
                    }
                };
                assert_eq!(cdr.formula.eval_exact(&value), fx <= f0, "a={a} r={r}");
            }
        }
    }

    #[test]
    fn encode_rejects_integral_atom() {
        let c = ClockConstraint::Atom(Atom::Integral { x: ck("x1"), y: None, rel: Rel::Le, k: 1 });
        assert!(encode_fractional(&c, Side::Pre, &x0(), &set(&["x1"])).is_err());
    }

    #[test]
    fn qe_drops_unconstrained_variable() {
        let clocks = set(&["x1", "y"]);
        let phi = Cdr::new(
            clocks.clone(),
            CdrF::and(vec![
                CdrF::eq(Term::diff(Side::Pre, ck("y")), Term::reference(Side::Pre)),
                CdrF::eq(Term::diff(Side::Pre, ck("x1")), Term::reference(Side::Pre)),
            ]),
        );
        let out = cdr_qe(&phi, &ck("y"), Side::Pre, &x0()).unwrap();
        let expect = Cdr::new(
            clocks,
            CdrF::eq(Term::diff(Side::Pre, ck("x1")), Term::reference(Side::Pre)),
        );
        assert_eq!(canonical(&out), canonical(&expect));
    }

    #[test]
    fn qe_rejects_reference() {
        let phi = cdr_identity(&set(&["x1"]));
        assert!(cdr_qe(&phi, &x0(), Side::Pre, &x0()).is_err());
    }

    /// Elimination agrees with projecting the satisfying weak orders.
    #[test]
    fn qe_matches_projection_oracle() {
        let clocks = set(&["a", "b"]);
        let a_pre = Term::diff(Side::Pre, ck("a"));
        let b_pre = Term::diff(Side::Pre, ck("b"));
        let r_pre = Term::reference(Side::Pre);
        let candidates = vec![
            CdrF::atom(a_pre.clone(), Rel::Le, b_pre.clone()),
            CdrF::and(vec![
                CdrF::atom(a_pre.clone(), Rel::Lt, r_pre.clone()),
                CdrF::atom(b_pre.clone(), Rel::Le, a_pre.clone()),
            ]),
            CdrF::or(vec![
                CdrF::eq(a_pre.clone(), r_pre.clone()),
                CdrF::not(CdrF::atom(b_pre.clone(), Rel::Ge, a_pre.clone())),
            ]),
        ];
        for f in candidates {
            let phi = Cdr::new(clocks.clone(), f);
            let out = cdr_qe(&phi, &ck("a"), Side::Pre, &x0()).unwrap();
            let full = canonical(&phi);
            let killed = Term::diff(Side::Pre, ck("a"));
            let keep: Vec<usize> = full
                .terms
                .iter()
                .enumerate()
                .filter(|(_, t)| **t != killed)
                .map(|(i, _)| i)
                .collect();
            let mut projected = BTreeSet::new();
            for order in &full.sat {
                let mut ranks: Vec<u8> = keep.iter().map(|&i| order[i]).collect();
                let mut uniq = ranks.clone();
                uniq.sort_unstable();
                uniq.dedup();
                for r in ranks.iter_mut() {
                    *r = uniq.iter().position(|u| u == r).unwrap() as u8;
                }
                projected.insert(ranks);
            }
            let reduced_terms: Vec<Term> = keep.iter().map(|&i| full.terms[i].clone()).collect();
            let index: BTreeMap<&Term, usize> =
                reduced_terms.iter().enumerate().map(|(i, t)| (t, i)).collect();
            let mut out_sat = BTreeSet::new();
            for order in weak_orders(reduced_terms.len()) {
                let value = |t: &Term| -> u8 { order[index[t]] };
                if out.formula.eval(&value) {
                    out_sat.insert(order);
                }
            }
            assert_eq!(out_sat, projected);
        }
    }

    #[test]
    fn identity_is_neutral_for_composition() {
        let clocks = set(&["x1"]);
        let id = cdr_identity(&clocks);
        let phi = Cdr::new(
            clocks.clone(),
            CdrF::and(vec![
                CdrF::atom(Term::reference(Side::Pre), Rel::Le, Term::reference(Side::Post)),
                CdrF::eq(Term::diff(Side::Post, ck("x1")), Term::diff(Side::Pre, ck("x1"))),
            ]),
        );
        let left = cdr_compose(&id, &phi).unwrap();
        let right = cdr_compose(&phi, &id).unwrap();
        assert_eq!(canonical(&left), canonical(&phi));
        assert_eq!(canonical(&right), canonical(&phi));
    }

    #[test]
    fn elapse_composition_is_idempotent() {
        let clocks = set(&["x1"]);
        let elapse = cdr_onestep(&OneStepOp::Elapse, &x0(), &clocks).unwrap();
        let twice = cdr_compose(&elapse, &elapse).unwrap();
        assert_eq!(canonical(&twice), canonical(&elapse));
        let oracle = compose_oracle(&elapse, &elapse);
        assert_eq!(canonical(&twice).sat, oracle.sat);
    }

    #[test]
    fn reset_then_elapse_matches_oracle() {
        let clocks = set(&["x1"]);
        let reset = cdr_onestep(&OneStepOp::Reset(set(&["x1"])), &x0(), &clocks).unwrap();
        let elapse = cdr_onestep(&OneStepOp::Elapse, &x0(), &clocks).unwrap();
        let composed = cdr_compose(&reset, &elapse).unwrap();
        assert_eq!(canonical(&composed).sat, compose_oracle(&reset, &elapse).sat);
    }

    #[test]
    fn example_inner_elimination_gives_ref_le() {
        // ∃y1, y1'. {y1} = 0 ∧ {y1'} ≤ {x0'} ∧ {x0 - y1} = {x0' - y1'}
        // reduces to {x0} ≤ {x0'}.
        let y1 = ck("y1");
        let zero_pre = CdrF::eq(Term::diff(Side::Pre, y1.clone()), Term::reference(Side::Pre));
        let le_post = encode_by_enumeration(&y1, Some(&x0()), Rel::Le, Side::Post, &x0());
        let transport = CdrF::eq(Term::diff(Side::Pre, y1.clone()), Term::diff(Side::Post, y1.clone()));
        let phi = CdrF::and(vec![zero_pre, le_post, transport]);
        let out =
            eliminate_terms(&phi, &[Term::diff(Side::Pre, y1.clone()), Term::diff(Side::Post, y1.clone())]);
        let got = Cdr::new(set(&[]), out);
        let expect = Cdr::new(
            set(&[]),
            CdrF::atom(Term::reference(Side::Pre), Rel::Le, Term::reference(Side::Post)),
        );
        assert_eq!(canonical(&got), canonical(&expect), "got {:?}", got.formula);
    }

    #[test]
    fn composition_matches_oracle_on_random_cdrs() {
        let mut rng = rand_chacha::ChaCha8Rng::seed_from_u64(7);
        let clocks = set(&["a"]);
        let terms: Vec<Term> = Cdr::new(clocks.clone(), CdrF::True).term_space();
        let rels = [Rel::Lt, Rel::Le, Rel::Eq, Rel::Ge, Rel::Gt];
        let random_cdr = |rng: &mut rand_chacha::ChaCha8Rng| -> Cdr {
            let n_atoms = rng.gen_range(1..=3);
            let mut parts = Vec::new();
            for _ in 0..n_atoms {
                let u = terms[rng.gen_range(0..terms.len())].clone();
                let t = terms[rng.gen_range(0..terms.len())].clone();
                let rel = rels[rng.gen_range(0..rels.len())];
                let atom = CdrF::atom(u, rel, t);
                parts.push(if rng.gen_bool(0.25) { CdrF::not(atom) } else { atom });
            }
            let f = if rng.gen_bool(0.5) { CdrF::and(parts) } else { CdrF::or(parts) };
            Cdr::new(clocks.clone(), f)
        };
        for _ in 0..60 {
            let phi = random_cdr(&mut rng);
            let psi = random_cdr(&mut rng);
            let composed = cdr_compose(&phi, &psi).unwrap();
            assert_eq!(canonical(&composed).sat, compose_oracle(&phi, &psi).sat);
        }
    }

    #[test]
    fn associativity_up_to_canonical_equality() {
        let clocks = set(&["a"]);
        let elapse = cdr_onestep(&OneStepOp::Elapse, &x0(), &clocks).unwrap();
        let reset = cdr_onestep(&OneStepOp::Reset(set(&["a"])), &x0(), &clocks).unwrap();
        let test = cdr_onestep(
            &OneStepOp::Test(ClockConstraint::Atom(Atom::FracDiag {
                x: ck("a"),
                y: x0(),
                rel: Rel::Le,
            })),
            &x0(),
            &clocks,
        )
        .unwrap();
        let samples = [&elapse, &reset, &test];
        for a in samples {
            for b in samples {
                for c in samples {
                    let l = cdr_compose(&cdr_compose(a, b).unwrap(), c).unwrap();
                    let r = cdr_compose(a, &cdr_compose(b, c).unwrap()).unwrap();
                    assert_eq!(canonical(&l), canonical(&r));
                }
            }
        }
    }
}
