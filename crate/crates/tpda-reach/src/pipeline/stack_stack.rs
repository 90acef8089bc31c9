//! Removal of pop atoms relating two stack clocks, and of non-diagonal
//! integral-flavoured stack atoms. In push-copy form a stack clock is a
//! control clock frozen at push time, so the elapse-invariant content of a
//! stack-stack atom is checked as a transition constraint at the matching
//! push; the non-invariant wrap bit stays behind as a fractional pop atom.
//! Non-diagonal atoms `y ~ k` become diagonal against an auxiliary control
//! clock that is reset immediately before every pop.

use std::collections::{BTreeMap, BTreeSet};

use crate::constraints::{Atom, Clock, ClockConstraint, Rel};
use crate::tpda::{Op, StackSym, Tpda, TransId};
use crate::{Error, Result};

use super::recipe::StageRecipe;
use super::{conj, conjunct_atoms, copy_partners, expand_transitions, fresh_clock, StageOutput};

/// One expansion alternative of a removable atom: constraints checked at the
/// push, plus residual fractional atoms checked at the pop.
#[derive(Debug, Clone)]
struct Alternative {
    push_tests: Vec<ClockConstraint>,
    pop_residue: Vec<Atom>,
}

/// `⟦{u} < {v}⟧ = bit` as an atom.
fn frac_bit(u: &Clock, v: &Clock, bit: bool) -> Atom {
    Atom::FracDiag { x: u.clone(), y: v.clone(), rel: if bit { Rel::Lt } else { Rel::Ge } }
}

fn ground(b: bool) -> ClockConstraint {
    if b {
        ClockConstraint::True
    } else {
        ClockConstraint::False
    }
}

/// Condition on the push-time floor of a partner difference.
#[derive(Debug, Clone, Copy)]
enum DiffCond {
    /// `⌊p_i - p_j⌋ rel k`
    Order(Rel, i64),
    /// `⌊p_i - p_j⌋ ≡m k` (or its negation)
    Mod(u32, i64, bool),
}

impl DiffCond {
    fn shift(self, delta: i64) -> DiffCond {
        match self {
            DiffCond::Order(rel, k) => DiffCond::Order(rel, k + delta),
            DiffCond::Mod(m, k, n) => DiffCond::Mod(m, k + delta, n),
        }
    }

    fn ground(self, v: i64) -> ClockConstraint {
        match self {
            DiffCond::Order(rel, k) => ground(rel.eval(&v, &k)),
            DiffCond::Mod(m, k, n) => {
                ground((v.rem_euclid(m as i64) == k.rem_euclid(m as i64)) != n)
            }
        }
    }

    /// The condition stated on `⌊a⌋` or `⌊a⌋ - ⌊b⌋`.
    fn atom(self, a: &Clock, b: Option<&Clock>) -> ClockConstraint {
        match self {
            DiffCond::Order(rel, k) => {
                ClockConstraint::Atom(Atom::Integral { x: a.clone(), y: b.cloned(), rel, k })
            }
            DiffCond::Mod(m, k, n) => {
                let mut at = Atom::modular(a.clone(), b.cloned(), m, k);
                if let Atom::Modular { negated, .. } = &mut at {
                    *negated = n;
                }
                ClockConstraint::Atom(at)
            }
        }
    }

    /// The condition stated on `-⌊b⌋`.
    fn atom_negated_var(self, b: &Clock) -> ClockConstraint {
        match self {
            // -⌊b⌋ rel k  ⟺  ⌊b⌋ rel.flip() -k
            DiffCond::Order(rel, k) => {
                ClockConstraint::Atom(Atom::Integral { x: b.clone(), y: None, rel: rel.flip(), k: -k })
            }
            DiffCond::Mod(m, k, n) => {
                let mut at = Atom::modular(b.clone(), None, m, -k);
                if let Atom::Modular { negated, .. } = &mut at {
                    *negated = n;
                }
                ClockConstraint::Atom(at)
            }
        }
    }
}

/// Expand a condition on the push-time value of `⌊p_i - p_j⌋` (partners of
/// `None` read as 0) into cases over the borrow bit, each with fractional
/// pins on the partner clocks:
/// `⌊p_i - p_j⌋ = ⌊p_i⌋ - ⌊p_j⌋ - ⟦{p_i} < {p_j}⟧`.
fn push_diff_cases(
    pi: &Option<Clock>,
    pj: &Option<Clock>,
    cond: DiffCond,
) -> Vec<(Vec<ClockConstraint>, ClockConstraint)> {
    match (pi, pj) {
        (Some(a), Some(b)) if a == b => vec![(vec![], cond.ground(0))],
        (Some(a), Some(b)) => (0..=1i64)
            .map(|c| {
                let pin = ClockConstraint::Atom(frac_bit(a, b, c == 1));
                // ⌊a⌋ - ⌊b⌋ - c satisfies cond  ⟺  ⌊a⌋ - ⌊b⌋ satisfies cond+c
                (vec![pin], cond.shift(c).atom(a, Some(b)))
            })
            .collect(),
        (Some(a), None) => vec![(vec![], cond.atom(a, None))],
        (None, Some(b)) => vec![
            (
                // {b} = 0: ⌊0 - b⌋ = -⌊b⌋
                vec![ClockConstraint::Atom(Atom::FracConst { x: b.clone(), rel: Rel::Eq })],
                cond.atom_negated_var(b),
            ),
            (
                // {b} > 0: ⌊0 - b⌋ = -⌊b⌋ - 1
                vec![ClockConstraint::Atom(Atom::FracConst { x: b.clone(), rel: Rel::Gt })],
                cond.shift(1).atom_negated_var(b),
            ),
        ],
        (None, None) => vec![(vec![], cond.ground(0))],
    }
}

/// Expansion alternatives of one removable stack-stack atom.
fn expand_atom(atom: &Atom, partners: &BTreeMap<Clock, Option<Clock>>) -> Result<Vec<Alternative>> {
    let partner = |y: &Clock| -> Result<Option<Clock>> {
        partners
            .get(y)
            .cloned()
            .ok_or_else(|| Error::input(format!("stack clock {y} has no copy partner")))
    };
    let (yi, yj, pop_cond): (&Clock, &Clock, Box<dyn Fn(i64) -> DiffCond>) = match atom {
        // y_i - y_j is constant over time, equal to p_i - p_j at the push.
        Atom::Classical { x: yi, y: Some(yj), rel, k } => {
            let pi = partner(yi)?;
            let pj = partner(yj)?;
            let test = match (&pi, &pj) {
                (Some(a), Some(b)) if a == b => ground(rel.eval(&0, k)),
                (Some(a), Some(b)) => ClockConstraint::Atom(Atom::Classical {
                    x: a.clone(),
                    y: Some(b.clone()),
                    rel: *rel,
                    k: *k,
                }),
                (Some(a), None) => {
                    ClockConstraint::Atom(Atom::Classical { x: a.clone(), y: None, rel: *rel, k: *k })
                }
                (None, Some(b)) => ClockConstraint::Atom(Atom::Classical {
                    x: b.clone(),
                    y: None,
                    rel: rel.flip(),
                    k: -k,
                }),
                (None, None) => ground(rel.eval(&0, k)),
            };
            return Ok(vec![Alternative { push_tests: vec![test], pop_residue: vec![] }]);
        }
        Atom::Integral { x: yi, y: Some(yj), rel, k } => {
            let (rel, k) = (*rel, *k);
            (yi, yj, Box::new(move |b| DiffCond::Order(rel, k - b)))
        }
        Atom::Modular { x: yi, y: Some(yj), m, k, negated } => {
            let (m, k, n) = (*m, *k as i64, *negated);
            (yi, yj, Box::new(move |b| DiffCond::Mod(m, k - b, n)))
        }
        other => return Err(Error::input(format!("not a removable stack-stack atom: {other:?}"))),
    };
    // ⌊y_i⌋ - ⌊y_j⌋ = ⌊y_i - y_j⌋ + ⟦{y_i} < {y_j}⟧, with the floor of the
    // difference frozen at push time.
    let pi = partner(yi)?;
    let pj = partner(yj)?;
    let mut alts = Vec::new();
    for b in 0..=1i64 {
        for (pins, test) in push_diff_cases(&pi, &pj, pop_cond(b)) {
            let mut push_tests = pins;
            push_tests.push(test);
            alts.push(Alternative { push_tests, pop_residue: vec![frac_bit(yi, yj, b == 1)] });
        }
    }
    Ok(alts)
}

fn is_stack_stack(a: &Atom, stack: &BTreeSet<Clock>) -> bool {
    let cs = a.clocks();
    cs.len() == 2 && cs.iter().all(|c| stack.contains(c)) && !a.is_fractional()
}

fn is_nondiag_stack_integralish(a: &Atom, stack: &BTreeSet<Clock>) -> bool {
    match a {
        Atom::Classical { x, y: None, .. }
        | Atom::Integral { x, y: None, .. }
        | Atom::Modular { x, y: None, .. } => stack.contains(x),
        _ => false,
    }
}

pub fn remove_stack_stack(p: &Tpda) -> Result<StageOutput> {
    // Copy-partner map, shared by all pushes of a push-copy automaton.
    let mut partners: BTreeMap<Clock, Option<Clock>> = BTreeMap::new();
    for t in &p.transitions {
        for op in &t.ops {
            if let Op::Push(_, c) = op {
                let m = copy_partners(c, &p.stack_clocks)?;
                for (y, x) in m {
                    if let Some(prev) = partners.get(&y) {
                        if *prev != x {
                            return Err(Error::input(format!(
                                "stack clock {y} copies different control clocks at different pushes"
                            )));
                        }
                    }
                    partners.insert(y, x);
                }
            }
        }
    }

    // Unique pop site per symbol (established by the push-copy stage's
    // symbol refinement).
    let mut pop_of: BTreeMap<StackSym, (TransId, usize, ClockConstraint)> = BTreeMap::new();
    for (tid, t) in p.transitions.iter().enumerate() {
        for (opix, op) in t.ops.iter().enumerate() {
            if let Op::Pop(sym, c) = op {
                if pop_of.insert(sym.clone(), (tid, opix, c.clone())).is_some() {
                    return Err(Error::input(format!(
                        "stack symbol {sym} has more than one pop site; run the push-copy stage first"
                    )));
                }
            }
        }
    }

    let needs_aux = pop_of.values().any(|(_, _, c)| {
        let mut found = false;
        c.visit_atoms(&mut |a| found |= is_nondiag_stack_integralish(a, &p.stack_clocks));
        found
    });
    let aux = needs_aux.then(|| fresh_clock("xz", &p.all_clocks()));

    struct Variant {
        sym: StackSym,
        push_tests: Vec<ClockConstraint>,
        pop_constraint: ClockConstraint,
    }
    let mut plans: BTreeMap<StackSym, Vec<Variant>> = BTreeMap::new();
    for (sym, (_, _, psi)) in &pop_of {
        let atoms = conjunct_atoms(psi)?;
        let mut kept: Vec<Atom> = Vec::new();
        let mut alts_product: Vec<Alternative> =
            vec![Alternative { push_tests: vec![], pop_residue: vec![] }];
        let mut touched = false;
        for a in &atoms {
            if is_stack_stack(a, &p.stack_clocks) {
                touched = true;
                let alts = expand_atom(a, &partners)?;
                let mut next = Vec::new();
                for base in &alts_product {
                    for alt in &alts {
                        let mut merged = base.clone();
                        merged.push_tests.extend(alt.push_tests.iter().cloned());
                        merged.pop_residue.extend(alt.pop_residue.iter().cloned());
                        next.push(merged);
                    }
                }
                alts_product = next;
            } else if is_nondiag_stack_integralish(a, &p.stack_clocks) {
                touched = true;
                let xz = aux.clone().expect("aux clock allocated");
                let diag = match a {
                    Atom::Classical { x, y: None, rel, k } => {
                        Atom::Classical { x: x.clone(), y: Some(xz), rel: *rel, k: *k }
                    }
                    Atom::Integral { x, y: None, rel, k } => {
                        Atom::Integral { x: x.clone(), y: Some(xz), rel: *rel, k: *k }
                    }
                    Atom::Modular { x, y: None, m, k, negated } => {
                        let mut at = Atom::modular(x.clone(), Some(xz), *m, *k as i64);
                        if let Atom::Modular { negated: n, .. } = &mut at {
                            *n = *negated;
                        }
                        at
                    }
                    _ => unreachable!(),
                };
                kept.push(diag);
            } else {
                kept.push(a.clone());
            }
        }
        if !touched {
            continue;
        }
        let variants = alts_product
            .into_iter()
            .enumerate()
            .map(|(v, alt)| {
                let mut pop_atoms = kept.clone();
                pop_atoms.extend(alt.pop_residue);
                Variant {
                    sym: StackSym(format!("{}|v{}", sym.0, v)),
                    push_tests: alt.push_tests,
                    pop_constraint: conj(&pop_atoms),
                }
            })
            .collect();
        plans.insert(sym.clone(), variants);
    }

    let (transitions, relabel) = expand_transitions(&p.transitions, |_tid, _opix, op| match op {
        Op::Push(sym, cp) => match plans.get(sym) {
            Some(variants) => variants
                .iter()
                .map(|v| {
                    let mut seq: Vec<Op> = v.push_tests.iter().cloned().map(Op::Test).collect();
                    seq.push(Op::Push(v.sym.clone(), cp.clone()));
                    seq
                })
                .collect(),
            None => vec![vec![op.clone()]],
        },
        Op::Pop(sym, _) => match plans.get(sym) {
            Some(variants) => variants
                .iter()
                .map(|v| {
                    let mut seq = Vec::new();
                    if let Some(xz) = &aux {
                        seq.push(Op::Reset([xz.clone()].into()));
                    }
                    seq.push(Op::Pop(v.sym.clone(), v.pop_constraint.clone()));
                    seq
                })
                .collect(),
            None => vec![vec![op.clone()]],
        },
        other => vec![vec![other.clone()]],
    });

    let mut control_clocks = p.control_clocks.clone();
    let mut new_clocks = Vec::new();
    if let Some(xz) = &aux {
        control_clocks.insert(xz.clone());
        new_clocks.push(xz.clone());
    }
    let mut stack_alphabet: BTreeSet<StackSym> = BTreeSet::new();
    for t in &transitions {
        for op in &t.ops {
            if let Op::Push(s, _) | Op::Pop(s, _) = op {
                stack_alphabet.insert(s.clone());
            }
        }
    }
    let tpda = Tpda {
        input_alphabet: p.input_alphabet.clone(),
        stack_alphabet,
        locations: p.locations.clone(),
        control_clocks,
        reference: p.reference.clone(),
        stack_clocks: p.stack_clocks.clone(),
        modulus: p.modulus,
        transitions,
    };
    Ok(StageOutput {
        tpda,
        recipes: vec![StageRecipe::RelabelSum { stage: "stack-stack".into(), relabel, new_clocks }],
    })
}

/// Structural postcondition: no classical, integral, or modular pop atom
/// mentions two stack clocks or a single bare stack clock.
pub fn no_stack_stack_pops(p: &Tpda) -> bool {
    p.transitions.iter().all(|t| {
        t.ops.iter().all(|op| match op {
            Op::Pop(_, c) => {
                let mut ok = true;
                c.visit_atoms(&mut |a| {
                    ok &= !is_stack_stack(a, &p.stack_clocks);
                    ok &= !is_nondiag_stack_integralish(a, &p.stack_clocks);
                });
                ok
            }
            _ => true,
        })
    })
}
