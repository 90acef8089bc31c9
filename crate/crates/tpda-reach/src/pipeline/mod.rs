//! The reduction chain from a full automaton to a fractional one. Each stage
//! maps an automaton to a simpler automaton plus a reconstruction recipe that
//! the formula layer later folds into the final reachability formula.
//!
//! Stage order is fixed: push-copy, stack-stack removal, pop atomization,
//! integral-pop removal, clock memorization, op splitting, fractionalization.

pub mod atomize;
pub mod fractionalize;
pub mod integral_pop;
pub mod memorize;
pub mod push_copy;
pub mod recipe;
pub mod split_ops;
pub mod stack_stack;

use std::collections::{BTreeMap, BTreeSet};

use crate::constraints::{Atom, Clock, ClockConstraint};
use crate::tpda::{Op, Tpda, TransId, Transition};
use crate::{Error, Result};

pub use recipe::StageRecipe;

/// Result of one pipeline stage.
#[derive(Debug, Clone)]
pub struct StageOutput {
    pub tpda: Tpda,
    pub recipes: Vec<StageRecipe>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum StageName {
    PushCopy,
    StackStack,
    Atomize,
    IntegralPops,
    Memorize,
    SplitOps,
    Fractionalize,
}

impl StageName {
    pub const ALL: [StageName; 7] = [
        StageName::PushCopy,
        StageName::StackStack,
        StageName::Atomize,
        StageName::IntegralPops,
        StageName::Memorize,
        StageName::SplitOps,
        StageName::Fractionalize,
    ];

    pub fn parse(s: &str) -> Result<StageName> {
        match s {
            "push-copy" => Ok(StageName::PushCopy),
            "stack-stack" => Ok(StageName::StackStack),
            "atomize" => Ok(StageName::Atomize),
            "integral-pops" => Ok(StageName::IntegralPops),
            "memorize" => Ok(StageName::Memorize),
            "split" => Ok(StageName::SplitOps),
            "fractionalize" => Ok(StageName::Fractionalize),
            other => Err(Error::input(format!("unknown stage '{other}'"))),
        }
    }

    pub fn name(&self) -> &'static str {
        match self {
            StageName::PushCopy => "push-copy",
            StageName::StackStack => "stack-stack",
            StageName::Atomize => "atomize",
            StageName::IntegralPops => "integral-pops",
            StageName::Memorize => "memorize",
            StageName::SplitOps => "split",
            StageName::Fractionalize => "fractionalize",
        }
    }
}

pub fn run_stage(name: StageName, tpda: &Tpda) -> Result<StageOutput> {
    match name {
        StageName::PushCopy => push_copy::to_push_copy(tpda),
        StageName::StackStack => stack_stack::remove_stack_stack(tpda),
        StageName::Atomize => atomize::atomize_pops(tpda),
        StageName::IntegralPops => integral_pop::remove_integral_pops(tpda),
        StageName::Memorize => memorize::memorize_clocks(tpda),
        StageName::SplitOps => split_ops::split_ops(tpda),
        StageName::Fractionalize => fractionalize::fractionalize(tpda),
    }
}

/// Run the chain up to and including `upto` (the whole chain by default).
pub fn run_pipeline(tpda: &Tpda, upto: Option<StageName>) -> Result<(Tpda, Vec<StageRecipe>)> {
    let mut cur = tpda.clone();
    let mut recipes = Vec::new();
    for stage in StageName::ALL {
        let out = run_stage(stage, &cur)?;
        cur = out.tpda;
        recipes.extend(out.recipes);
        if Some(stage) == upto {
            break;
        }
    }
    Ok((cur, recipes))
}

// ---------------------------------------------------------------------------
// Shared stage machinery.

/// A fresh clock name based on `base` that avoids `used`.
pub(crate) fn fresh_clock(base: &str, used: &BTreeSet<Clock>) -> Clock {
    let c = Clock::new(base);
    if !used.contains(&c) {
        return c;
    }
    for i in 2.. {
        let c = Clock::new(format!("{base}{i}"));
        if !used.contains(&c) {
            return c;
        }
    }
    unreachable!()
}

/// Expand every transition by per-operation alternatives: `f` maps each
/// operation to its replacement sequences, and the variants of a transition
/// are the products of the per-op choices. Returns the new transitions and
/// the relabel map onto originating ids.
pub(crate) fn expand_transitions(
    transitions: &[Transition],
    mut f: impl FnMut(TransId, usize, &Op) -> Vec<Vec<Op>>,
) -> (Vec<Transition>, BTreeMap<TransId, TransId>) {
    let mut out = Vec::new();
    let mut relabel = BTreeMap::new();
    for (tid, t) in transitions.iter().enumerate() {
        let mut variants: Vec<Vec<Op>> = vec![vec![]];
        for (opix, op) in t.ops.iter().enumerate() {
            let choices = f(tid, opix, op);
            let mut next = Vec::new();
            for base in &variants {
                for choice in &choices {
                    let mut seq = base.clone();
                    seq.extend(choice.iter().cloned());
                    next.push(seq);
                }
            }
            variants = next;
        }
        for ops in variants {
            if ops.is_empty() {
                continue;
            }
            let new_id = out.len();
            out.push(Transition { from: t.from.clone(), to: t.to.clone(), ops });
            relabel.insert(new_id, tid);
        }
    }
    (out, relabel)
}

/// The copy-partner map of a push-copy constraint `⋀ y = x ∧ age = 0`:
/// stack clock to the control clock it copies (`None` for the fresh age
/// clock pinned to zero).
pub(crate) fn copy_partners(
    psi: &ClockConstraint,
    stack_clocks: &BTreeSet<Clock>,
) -> Result<BTreeMap<Clock, Option<Clock>>> {
    let mut map = BTreeMap::new();
    let mut atoms = Vec::new();
    psi.visit_atoms(&mut |a| atoms.push(a.clone()));
    let conjunctive = matches!(psi, ClockConstraint::And(_) | ClockConstraint::Atom(_) | ClockConstraint::True);
    if !conjunctive {
        return Err(Error::input("push constraint is not a copy conjunction"));
    }
    for a in &atoms {
        match a {
            Atom::Classical { x, y: Some(y), rel: crate::constraints::Rel::Eq, k: 0 }
                if stack_clocks.contains(x) && !stack_clocks.contains(y) =>
            {
                map.insert(x.clone(), Some(y.clone()));
            }
            Atom::Classical { x, y: None, rel: crate::constraints::Rel::Eq, k: 0 }
                if stack_clocks.contains(x) =>
            {
                map.insert(x.clone(), None);
            }
            other => {
                return Err(Error::input(format!(
                    "push constraint is not in copy form, found atom {other:?}"
                )))
            }
        }
    }
    Ok(map)
}

/// Conjunction of a slice of atoms.
pub(crate) fn conj(atoms: &[Atom]) -> ClockConstraint {
    ClockConstraint::and(atoms.iter().cloned().map(ClockConstraint::Atom).collect())
}

/// The atoms of a conjunctive constraint, or an error if it is not a plain
/// conjunction of atoms.
pub(crate) fn conjunct_atoms(c: &ClockConstraint) -> Result<Vec<Atom>> {
    let dnf = crate::constraints::to_dnf(c);
    match dnf.len() {
        0 => Err(Error::input("constraint is unsatisfiable where a conjunction was expected")),
        1 => Ok(dnf.into_iter().next().unwrap()),
        _ => Err(Error::input("constraint is not conjunctive")),
    }
}

/// True if the atom mentions at least one clock from the set.
pub(crate) fn mentions_any(a: &Atom, set: &BTreeSet<Clock>) -> bool {
    a.clocks().iter().any(|c| set.contains(c))
}
