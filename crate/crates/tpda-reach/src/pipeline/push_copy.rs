//! Push-copy normal form: every push copies the control clocks into stack
//! clocks (plus a fresh age clock pinned to zero), and pop constraints are
//! rewritten to talk about those copies. The rewritten pop constraint guesses
//! the final value of the original stack clocks and eliminates them by
//! quantifier elimination; its disjuncts are distributed over separate pop
//! transitions, one stack symbol per (push site, pop site, disjunct) triple.

use std::collections::{BTreeMap, BTreeSet};

use crate::constraints::{desugar, shift, to_dnf, Atom, Clock, ClockConstraint, Conjunct, DesugarMode, Rel};
use crate::qelim::qe_clock_all;
use crate::tpda::{Op, StackSym, Tpda, TransId};
use crate::Result;

use super::recipe::StageRecipe;
use super::{conj, expand_transitions, fresh_clock, StageOutput};

type Site = (TransId, usize);

fn pair_sym(sym: &StackSym, push: Site, pop: Site, disjunct: usize) -> StackSym {
    StackSym(format!("{}|p{}.{}|q{}.{}|d{}", sym.0, push.0, push.1, pop.0, pop.1, disjunct))
}

pub fn to_push_copy(p: &Tpda) -> Result<StageOutput> {
    p.validate()?;
    let mut used = p.all_clocks();
    let age = fresh_clock("y1", &used);
    used.insert(age.clone());
    let mut copies: BTreeMap<Clock, Clock> = BTreeMap::new();
    for x in &p.control_clocks {
        if *x == p.reference {
            continue;
        }
        let y = fresh_clock(&format!("y_{}", x.0), &used);
        used.insert(y.clone());
        copies.insert(x.clone(), y.clone());
    }
    let new_stack_clocks: BTreeSet<Clock> =
        copies.values().cloned().chain([age.clone()]).collect();

    let mut cp_atoms = vec![Atom::Classical { x: age.clone(), y: None, rel: Rel::Eq, k: 0 }];
    for (x, y) in &copies {
        cp_atoms.push(Atom::Classical { x: y.clone(), y: Some(x.clone()), rel: Rel::Eq, k: 0 });
    }
    let psi_cp = conj(&cp_atoms);

    // Push and pop sites per original stack symbol.
    let mut push_sites: BTreeMap<StackSym, Vec<(Site, ClockConstraint)>> = BTreeMap::new();
    let mut pop_sites: BTreeMap<StackSym, Vec<(Site, ClockConstraint)>> = BTreeMap::new();
    for (tid, t) in p.transitions.iter().enumerate() {
        for (opix, op) in t.ops.iter().enumerate() {
            match op {
                Op::Push(sym, c) => push_sites.entry(sym.clone()).or_default().push(((tid, opix), c.clone())),
                Op::Pop(sym, c) => pop_sites.entry(sym.clone()).or_default().push(((tid, opix), c.clone())),
                _ => {}
            }
        }
    }

    // Eliminated pop constraints per (push site, pop site) pair.
    let mut xi: BTreeMap<(Site, Site), Vec<Conjunct>> = BTreeMap::new();
    for (sym, pushes) in &push_sites {
        let Some(pops) = pop_sites.get(sym) else { continue };
        for (push_site, psi_push) in pushes {
            for (pop_site, psi_pop) in pops {
                let disjuncts =
                    eliminate_stack_clocks(p, psi_push, psi_pop, &age, &copies)?;
                xi.insert((*push_site, *pop_site), disjuncts);
            }
        }
    }

    let stack_is_new = |a: &Atom| a.clocks().iter().any(|c| new_stack_clocks.contains(c));

    let mut new_symbols: BTreeSet<StackSym> = BTreeSet::new();
    let (transitions, relabel) = expand_transitions(&p.transitions, |tid, opix, op| match op {
        Op::Push(sym, _) => {
            let mut choices = Vec::new();
            if let Some(pops) = pop_sites.get(sym) {
                for (pop_site, _) in pops {
                    let n = xi.get(&((tid, opix), *pop_site)).map_or(0, Vec::len);
                    for d in 0..n {
                        let ps = pair_sym(sym, (tid, opix), *pop_site, d);
                        new_symbols.insert(ps.clone());
                        choices.push(vec![Op::Push(ps, psi_cp.clone())]);
                    }
                }
            }
            choices
        }
        Op::Pop(sym, _) => {
            let mut choices = Vec::new();
            if let Some(pushes) = push_sites.get(sym) {
                for (push_site, _) in pushes {
                    let Some(disjuncts) = xi.get(&(*push_site, (tid, opix))) else { continue };
                    for (d, atoms) in disjuncts.iter().enumerate() {
                        let ps = pair_sym(sym, *push_site, (tid, opix), d);
                        new_symbols.insert(ps.clone());
                        let (stack_atoms, ctrl_atoms): (Vec<_>, Vec<_>) =
                            atoms.iter().cloned().partition(|a| stack_is_new(a));
                        let mut seq = vec![Op::Pop(ps, conj(&stack_atoms))];
                        if !ctrl_atoms.is_empty() {
                            seq.push(Op::Test(conj(&ctrl_atoms)));
                        }
                        choices.push(seq);
                    }
                }
            }
            choices
        }
        other => vec![vec![other.clone()]],
    });

    let tpda = Tpda {
        input_alphabet: p.input_alphabet.clone(),
        stack_alphabet: new_symbols,
        locations: p.locations.clone(),
        control_clocks: p.control_clocks.clone(),
        reference: p.reference.clone(),
        stack_clocks: new_stack_clocks,
        modulus: p.modulus,
        transitions,
    };
    let recipes = vec![StageRecipe::RelabelSum {
        stage: "push-copy".into(),
        relabel,
        new_clocks: vec![],
    }];
    Ok(StageOutput { tpda, recipes })
}

/// `∃z̄' ≥ 0. ψ_push(ȳ' - age', z̄' - age') ∧ ψ_pop(x̄', z̄')` as a disjunction
/// of conjunctive clock constraints over the pop-time control clocks and the
/// stack copies.
pub fn eliminate_stack_clocks(
    p: &Tpda,
    psi_push: &ClockConstraint,
    psi_pop: &ClockConstraint,
    age: &Clock,
    copies: &BTreeMap<Clock, Clock>,
) -> Result<Vec<Conjunct>> {
    // Rename the push constraint's control clocks to their copies; the
    // reference clock keeps its name (its pop-time value minus the age is
    // its push-time value, exactly like a copy's).
    let renamed = psi_push.rename_clocks(&|c| {
        if let Some(y) = copies.get(c) {
            y.clone()
        } else {
            c.clone()
        }
    });
    let shifted = shift(&renamed, age)?;
    let body = ClockConstraint::and(vec![shifted, psi_pop.clone()]);
    let desugared = desugar(&body, DesugarMode::ToIntFrac);
    let bounds: Vec<Clock> = p.stack_clocks.iter().cloned().collect();
    let mut out: Vec<Conjunct> = Vec::new();
    for conjn in to_dnf(&desugared) {
        out.extend(qe_clock_all(&bounds, &conjn)?);
    }
    Ok(out)
}

/// Structural postcondition: every push uses the copy constraint.
pub fn is_push_copy(p: &Tpda) -> bool {
    p.transitions.iter().all(|t| {
        t.ops.iter().all(|op| match op {
            Op::Push(_, c) => super::copy_partners(c, &p.stack_clocks).is_ok(),
            _ => true,
        })
    })
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::from_dnf;
    use crate::qelim::equiv_constraints;
    use crate::tpda::fixtures::palindromes;

    #[test]
    fn output_is_push_copy_and_relabels_totally() {
        let p = palindromes();
        let out = to_push_copy(&p).unwrap();
        assert!(is_push_copy(&out.tpda));
        match &out.recipes[0] {
            StageRecipe::RelabelSum { relabel, .. } => {
                assert_eq!(relabel.len(), out.tpda.transitions.len());
                for old in relabel.values() {
                    assert!(*old < p.transitions.len());
                }
            }
            other => panic!("unexpected recipe {other:?}"),
        }
    }

    #[test]
    fn no_push_pop_is_identity_modulo_trivial_recipe() {
        let p = crate::tpda::parse(
            "tpda\nclocks x0 x\nlocations p q\nmodulus 2\n\
             trans p -> q : elapse ; reset {x}\ntrans q -> q : test (le (int x) 1)\n",
        )
        .unwrap();
        let out = to_push_copy(&p).unwrap();
        assert_eq!(out.tpda.transitions, p.transitions);
        assert_eq!(out.tpda.locations, p.locations);
    }

    /// The pop constraint of the `b`-pair of the palindrome automaton
    /// eliminates to ⌊age⌋ ≡₂ 1 ∧ {age} ≤ {x0}.
    #[test]
    fn example_pair_pop_constraint() {
        let p = palindromes();
        let age = Clock::new("y1");
        let copies = BTreeMap::new();
        let psi_push = crate::sexpr::parse_constraint("(eq z 1)").unwrap();
        let psi_pop =
            crate::sexpr::parse_constraint("(and (eqm 2 (int z) 0) (le (frac z) (frac x0)))").unwrap();
        let disjuncts = eliminate_stack_clocks(&p, &psi_push, &psi_pop, &age, &copies).unwrap();
        let got = from_dnf(&disjuncts);
        let expect = ClockConstraint::and(vec![
            ClockConstraint::Atom(Atom::modular(age.clone(), None, 2, 1)),
            ClockConstraint::Atom(Atom::FracDiag { x: age.clone(), y: Clock::new("x0"), rel: Rel::Le }),
        ]);
        assert!(
            equiv_constraints(&got, &expect, &BTreeSet::new()),
            "got {}",
            crate::sexpr::constraint_to_string(&got)
        );
    }

    /// Push `z = 0`, pop `z ≤ 3` (within the modulus bound): the pair
    /// constraint is equivalent to `age ≤ 3`.
    #[test]
    fn age_bound_pair() {
        let p = crate::tpda::parse(
            "tpda\nclocks x0\nstackclocks z\nstackalphabet A\nlocations p q r\nmodulus 4\n\
             trans p -> q : push A (eq z 0)\ntrans q -> r : pop A (le z 3)\n",
        )
        .unwrap();
        let age = Clock::new("y1");
        let psi_push = crate::sexpr::parse_constraint("(eq z 0)").unwrap();
        let psi_pop = crate::sexpr::parse_constraint("(le z 3)").unwrap();
        let disjuncts = eliminate_stack_clocks(&p, &psi_push, &psi_pop, &age, &BTreeMap::new()).unwrap();
        let got = from_dnf(&disjuncts);
        let expect =
            ClockConstraint::Atom(Atom::Classical { x: age.clone(), y: None, rel: Rel::Le, k: 3 });
        assert!(
            equiv_constraints(&got, &expect, &BTreeSet::new()),
            "got {}",
            crate::sexpr::constraint_to_string(&got)
        );
    }

    /// Reachability triples agree with the original automaton on a small
    /// grid, after summing counters through the relabel map. The two
    /// explorations are both grid under-approximations whose value caps cut
    /// differently (the original stack clocks start above zero), so each
    /// side is checked against the other run with a slack-enlarged cap.
    #[test]
    fn preserves_oracle_triples_on_palindromes() {
        let p = palindromes();
        let out = to_push_copy(&p).unwrap();
        let relabel = match &out.recipes[0] {
            StageRecipe::RelabelSum { relabel, .. } => relabel.clone(),
            _ => unreachable!(),
        };
        let init = crate::constraints::ClockValuation::from_pairs([(Clock::new("x0"), crate::rat::qi(0))])
            .unwrap();
        let from = crate::tpda::Loc::new("q1");
        let to = crate::tpda::Loc::new("q2");
        let explore = |tpda: &Tpda, cap: u32| {
            let cfg = crate::oracle::OracleConfig::new(2, 5).with_cap(cap);
            crate::oracle::oracle_reach(tpda, &from, &to, &cfg, &init).unwrap().triples
        };
        let map_after = |triples: BTreeSet<(crate::tpda::ParikhVector, crate::constraints::ClockValuation)>| {
            triples
                .into_iter()
                .map(|(pk, nu)| {
                    let mut sum = crate::tpda::ParikhVector::new();
                    for (new_id, n) in pk {
                        *sum.entry(relabel[&new_id]).or_insert(0) += n;
                    }
                    (sum, nu)
                })
                .collect::<BTreeSet<_>>()
        };
        let before = explore(&p, 4);
        let before_slack = explore(&p, 5);
        let after = map_after(explore(&out.tpda, 4));
        let after_slack = map_after(explore(&out.tpda, 5));
        assert!(!before.is_empty());
        assert!(before.is_subset(&after_slack), "an original triple is unreachable after the stage");
        assert!(after.is_subset(&before_slack), "the stage invented a triple");
    }
}

