//! Quantifier elimination for quantified clock constraints: the integral
//! structure `(ℕ, ≤, ≡m, +1, 0)`, the fractional structure `(𝕀, ≤, 0)`, and
//! their combination for full clock constraints. Also houses the finite-grid
//! equivalence oracle used by fixture tests: clock-constraint satisfaction
//! depends only on bounded floors and on the ordering pattern of fractional
//! parts, so exhaustive evaluation over a suitable grid decides equivalence.

use std::collections::{BTreeMap, BTreeSet};

use crate::constraints::{from_dnf, to_dnf, Atom, Clock, ClockConstraint, Conjunct, DesugarMode, Rel};
use crate::rat::{self, Q};
use crate::{Error, Result};

/// Per-clock bound/residue triple for the bound variable `y`:
/// `x + alpha ≤ y ≤ x + beta` and `y ≡m x + gamma`. The map key `None`
/// stands for the constant 0, encoding non-diagonal bounds.
#[derive(Debug, Clone, Default, PartialEq, Eq)]
pub struct IntegralBounds {
    pub alpha: Option<i64>,
    pub beta: Option<i64>,
    pub gammas: BTreeSet<u32>,
}

/// Input to integral quantifier elimination.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct IntegralQeInput {
    pub modulus: u32,
    pub entries: BTreeMap<Option<Clock>, IntegralBounds>,
}

impl IntegralQeInput {
    pub fn new(modulus: u32) -> Self {
        assert!(modulus >= 1);
        IntegralQeInput { modulus, entries: BTreeMap::new() }
    }

    pub fn entry(&mut self, clock: Option<Clock>) -> &mut IntegralBounds {
        self.entries.entry(clock).or_default()
    }

    pub fn add_lower(&mut self, clock: Option<Clock>, alpha: i64) {
        let e = self.entry(clock);
        e.alpha = Some(e.alpha.map_or(alpha, |a| a.max(alpha)));
    }

    pub fn add_upper(&mut self, clock: Option<Clock>, beta: i64) {
        let e = self.entry(clock);
        e.beta = Some(e.beta.map_or(beta, |b| b.min(beta)));
    }

    pub fn add_gamma(&mut self, clock: Option<Clock>, gamma: i64) {
        let m = self.modulus as i64;
        self.entry(clock).gammas.insert(gamma.rem_euclid(m) as u32);
    }
}

/// `⌊a⌋ - ⌊b⌋ rel k` where `None` reads as the constant 0; collapses to a
/// ground truth value or a non-diagonal atom where possible.
fn diff_atom(a: &Option<Clock>, b: &Option<Clock>, rel: Rel, k: i64) -> ClockConstraint {
    match (a, b) {
        (Some(a), Some(b)) if a == b => ground(rel.eval(&0, &k)),
        (Some(a), Some(b)) => {
            ClockConstraint::Atom(Atom::Integral { x: a.clone(), y: Some(b.clone()), rel, k })
        }
        (Some(a), None) => ClockConstraint::Atom(Atom::Integral { x: a.clone(), y: None, rel, k }),
        (None, Some(b)) => ClockConstraint::Atom(Atom::Integral { x: b.clone(), y: None, rel: rel.flip(), k: -k }),
        (None, None) => ground(rel.eval(&0, &k)),
    }
}

/// `⌊a⌋ - ⌊b⌋ ≡m k` with the same conventions.
fn mod_diff_atom(a: &Option<Clock>, b: &Option<Clock>, m: u32, k: i64) -> ClockConstraint {
    let k = k.rem_euclid(m as i64) as u32;
    match (a, b) {
        (Some(a), Some(b)) if a == b => ground(k == 0),
        (Some(a), Some(b)) => ClockConstraint::Atom(Atom::modular(a.clone(), Some(b.clone()), m, k as i64)),
        (Some(a), None) => ClockConstraint::Atom(Atom::modular(a.clone(), None, m, k as i64)),
        (None, Some(b)) => ClockConstraint::Atom(Atom::modular(b.clone(), None, m, -(k as i64))),
        (None, None) => ground(k == 0),
    }
}

fn ground(b: bool) -> ClockConstraint {
    if b {
        ClockConstraint::True
    } else {
        ClockConstraint::False
    }
}

/// Eliminate `∃y` from `⋀_i x_i + α_i ≤ y ≤ x_i + β_i ∧ y ≡m x_i + γ_i`
/// over the naturals. If some lower bound is present, a satisfying `y` has
/// the form `x_j + α_j + δ` for the index attaining the maximum and some
/// `δ ∈ {0..m-1}`; the output disjoins over all candidates. With no lower
/// bounds, a satisfying `y` can be found in `{0..m-1}` directly.
pub fn qe_integral(input: &IntegralQeInput) -> ClockConstraint {
    let m = input.modulus as i64;
    for b in input.entries.values() {
        if b.gammas.len() > 1 {
            return ClockConstraint::False;
        }
    }
    let has_lower = input.entries.values().any(|b| b.alpha.is_some());
    let mut disjuncts = Vec::new();
    if !has_lower {
        for delta in 0..m {
            let mut parts = Vec::new();
            for (clock, b) in &input.entries {
                if let Some(beta) = b.beta {
                    // δ ≤ x + β
                    parts.push(diff_atom(clock, &None, Rel::Ge, delta - beta));
                }
                for g in &b.gammas {
                    // δ ≡m x + γ
                    parts.push(mod_diff_atom(clock, &None, input.modulus, delta - *g as i64));
                }
            }
            disjuncts.push(ClockConstraint::and(parts));
        }
        return ClockConstraint::or(disjuncts);
    }
    // Witness y = x_j + α_j + δ, over ℕ. A pseudo lower bound y ≥ 0 is
    // always included so that candidates below zero are rejected.
    let mut lowers: Vec<(Option<Clock>, i64)> = input
        .entries
        .iter()
        .filter_map(|(c, b)| b.alpha.map(|a| (c.clone(), a)))
        .collect();
    let zero_alpha = input.entries.get(&None).and_then(|b| b.alpha);
    if zero_alpha.map_or(true, |a| a < 0) {
        lowers.push((None, 0));
    }
    for delta in 0..m {
        for (j, alpha_j) in &lowers {
            let mut parts = Vec::new();
            // nonnegativity of the witness itself
            parts.push(diff_atom(j, &None, Rel::Ge, -(alpha_j + delta)));
            for (i, b) in &input.entries {
                if let Some(alpha_i) = b.alpha {
                    // x_i + α_i ≤ x_j + α_j + δ
                    parts.push(diff_atom(j, i, Rel::Ge, alpha_i - alpha_j - delta));
                }
                if let Some(beta_i) = b.beta {
                    // x_j + α_j + δ ≤ x_i + β_i
                    parts.push(diff_atom(j, i, Rel::Le, beta_i - alpha_j - delta));
                }
                for g in &b.gammas {
                    // x_j + α_j + δ ≡m x_i + γ_i
                    parts.push(mod_diff_atom(j, i, input.modulus, *g as i64 - alpha_j - delta));
                }
            }
            disjuncts.push(ClockConstraint::and(parts));
        }
    }
    ClockConstraint::or(disjuncts)
}

/// Terms of the fractional structure `(𝕀, ≤, 0)`.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub enum FTerm<V> {
    Zero,
    Var(V),
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct FAtom<V> {
    pub lhs: FTerm<V>,
    pub rel: Rel,
    pub rhs: FTerm<V>,
}

impl<V: Eq + Clone> FAtom<V> {
    pub fn new(lhs: FTerm<V>, rel: Rel, rhs: FTerm<V>) -> Self {
        FAtom { lhs, rel, rhs }
    }

    fn mentions(&self, v: &V) -> bool {
        matches!(&self.lhs, FTerm::Var(x) if x == v) || matches!(&self.rhs, FTerm::Var(x) if x == v)
    }

    fn subst(&self, v: &V, t: &FTerm<V>) -> FAtom<V> {
        let s = |term: &FTerm<V>| match term {
            FTerm::Var(x) if x == v => t.clone(),
            other => other.clone(),
        };
        FAtom { lhs: s(&self.lhs), rel: self.rel, rhs: s(&self.rhs) }
    }

    /// Truth value decided by syntax alone: both sides equal, or a
    /// comparison against 0 settled by the range `[0, 1)`.
    fn ground(&self) -> Option<bool> {
        match (&self.lhs, &self.rhs) {
            (FTerm::Zero, FTerm::Zero) => Some(self.rel.eval(&0, &0)),
            (FTerm::Var(a), FTerm::Var(b)) if a == b => Some(self.rel.eval(&0, &0)),
            (FTerm::Var(_), FTerm::Zero) => match self.rel {
                Rel::Lt => Some(false),
                Rel::Ge => Some(true),
                _ => None,
            },
            (FTerm::Zero, FTerm::Var(_)) => match self.rel {
                Rel::Gt => Some(false),
                Rel::Le => Some(true),
                _ => None,
            },
            _ => None,
        }
    }
}

/// Eliminate `∃v` from a conjunction of atoms over `(𝕀, ≤, 0)` with the
/// widened relation set. Returns `None` when the conjunction is recognisably
/// unsatisfiable. If a conjunct pins `v` to another term, substitution is
/// used; otherwise all lower bounds are paired against all upper bounds.
pub fn qe_fractional_atoms<V: Clone + Ord>(bound: &V, atoms: &[FAtom<V>]) -> Option<Vec<FAtom<V>>> {
    let mut rest: Vec<FAtom<V>> = Vec::new();
    let mut active: Vec<FAtom<V>> = Vec::new();
    for a in atoms {
        match a.ground() {
            Some(true) => continue,
            Some(false) => return None,
            None => {}
        }
        if a.mentions(bound) {
            active.push(a.clone());
        } else {
            rest.push(a.clone());
        }
    }

    // Normalize so the bound variable sits on the left.
    let bv = FTerm::Var(bound.clone());
    let normalized: Vec<FAtom<V>> = active
        .iter()
        .map(|a| {
            if a.lhs == bv {
                a.clone()
            } else {
                FAtom { lhs: a.rhs.clone(), rel: a.rel.flip(), rhs: a.lhs.clone() }
            }
        })
        .collect();

    // v ≤ 0 and v = t pin the variable.
    let mut pin: Option<FTerm<V>> = None;
    for a in &normalized {
        match (a.rel, &a.rhs) {
            (Rel::Eq, t) => {
                pin = Some(t.clone());
                break;
            }
            (Rel::Le, FTerm::Zero) => {
                pin = Some(FTerm::Zero);
                break;
            }
            (Rel::Lt, FTerm::Zero) => return None,
            _ => {}
        }
    }
    if let Some(t) = pin {
        let mut out = rest;
        for a in &active {
            let s = a.subst(bound, &t);
            match s.ground() {
                Some(true) => {}
                Some(false) => return None,
                None => out.push(s),
            }
        }
        return Some(out);
    }

    let mut lowers: Vec<(FTerm<V>, bool)> = Vec::new();
    let mut uppers: Vec<(FTerm<V>, bool)> = Vec::new();
    for a in &normalized {
        match a.rel {
            Rel::Le => uppers.push((a.rhs.clone(), false)),
            Rel::Lt => uppers.push((a.rhs.clone(), true)),
            Rel::Ge => {
                // v ≥ 0 is vacuous
                if a.rhs != FTerm::Zero {
                    lowers.push((a.rhs.clone(), false));
                }
            }
            Rel::Gt => lowers.push((a.rhs.clone(), true)),
            Rel::Eq => unreachable!("equalities were pinned"),
        }
    }
    let mut out = rest;
    for (lo, ls) in &lowers {
        for (hi, hs) in &uppers {
            let rel = if *ls || *hs { Rel::Lt } else { Rel::Le };
            let atom = FAtom { lhs: lo.clone(), rel, rhs: hi.clone() };
            match atom.ground() {
                Some(true) => {}
                Some(false) => return None,
                None => out.push(atom),
            }
        }
    }
    // A strict lower bound t < v needs room above t inside [0,1); since every
    // term value is < 1, room always exists when no upper bound blocks it.
    Some(out)
}

fn atom_to_fatom(a: &Atom) -> Option<FAtom<Clock>> {
    match a {
        Atom::FracConst { x, rel } => Some(FAtom::new(FTerm::Var(x.clone()), *rel, FTerm::Zero)),
        Atom::FracDiag { x, y, rel } => Some(FAtom::new(FTerm::Var(x.clone()), *rel, FTerm::Var(y.clone()))),
        _ => None,
    }
}

fn fatom_to_atom(a: &FAtom<Clock>) -> Option<Atom> {
    match (&a.lhs, &a.rhs) {
        (FTerm::Var(x), FTerm::Var(y)) if x != y => {
            Some(Atom::FracDiag { x: x.clone(), y: y.clone(), rel: a.rel })
        }
        (FTerm::Var(x), FTerm::Zero) => Some(Atom::FracConst { x: x.clone(), rel: a.rel }),
        (FTerm::Zero, FTerm::Var(y)) => Some(Atom::FracConst { x: y.clone(), rel: a.rel.flip() }),
        _ => None,
    }
}

/// Eliminate `∃bound` from a conjunction of fractional clock constraint
/// atoms. Errors on non-fractional atoms.
pub fn qe_fractional(bound: &Clock, body: &[Atom]) -> Result<Option<Vec<Atom>>> {
    let mut fatoms = Vec::new();
    for a in body {
        match atom_to_fatom(a) {
            Some(f) => fatoms.push(f),
            None => {
                return Err(Error::input(format!(
                    "fractional quantifier elimination got a non-fractional atom: {a:?}"
                )))
            }
        }
    }
    match qe_fractional_atoms(bound, &fatoms) {
        None => Ok(None),
        Some(out) => {
            let mut atoms = Vec::new();
            for f in &out {
                match f.ground() {
                    Some(true) => {}
                    Some(false) => return Ok(None),
                    None => atoms.push(fatom_to_atom(f).expect("non-ground fractional atom")),
                }
            }
            Ok(Some(atoms))
        }
    }
}

/// Eliminate `∃bound` from a conjunctive clock constraint whose classical
/// atoms were already desugared away. The body splits into an integral and a
/// fractional part, which are eliminated independently; the result is a
/// disjunction of conjunctive constraints.
pub fn qe_clock(bound: &Clock, body: &[Atom]) -> Result<Vec<Conjunct>> {
    if body.iter().any(Atom::is_classical) {
        return Err(Error::input(
            "quantifier elimination requires classical atoms to be desugared first",
        ));
    }
    let mentions = |a: &Atom| a.clocks().contains(&bound);

    // Unify the moduli of modular atoms that mention the bound variable.
    let mut big_m: u32 = 1;
    for a in body {
        if let Atom::Modular { m, .. } = a {
            if mentions(a) {
                big_m = num_integer::lcm(big_m, *m);
            }
        }
    }

    // Expand each bound-mentioning modular atom into positive residues mod
    // big_m; negated atoms expand to the complementary residues. Strict and
    // equality integral bounds normalize to non-strict ones over ℤ.
    let mut variants: Vec<Vec<Atom>> = vec![vec![]];
    for a in body {
        let choices: Vec<Vec<Atom>> = if !mentions(a) {
            vec![vec![a.clone()]]
        } else {
            match a {
                Atom::Modular { x, y, m, k, negated } => {
                    let mut alts = Vec::new();
                    for r in 0..big_m {
                        let matches = r % m == *k;
                        if matches != *negated {
                            alts.push(vec![Atom::Modular {
                                x: x.clone(),
                                y: y.clone(),
                                m: big_m,
                                k: r,
                                negated: false,
                            }]);
                        }
                    }
                    alts
                }
                Atom::Integral { x, y, rel, k } => match rel {
                    Rel::Lt => vec![vec![Atom::Integral { x: x.clone(), y: y.clone(), rel: Rel::Le, k: k - 1 }]],
                    Rel::Gt => vec![vec![Atom::Integral { x: x.clone(), y: y.clone(), rel: Rel::Ge, k: k + 1 }]],
                    Rel::Eq => vec![vec![
                        Atom::Integral { x: x.clone(), y: y.clone(), rel: Rel::Le, k: *k },
                        Atom::Integral { x: x.clone(), y: y.clone(), rel: Rel::Ge, k: *k },
                    ]],
                    _ => vec![vec![a.clone()]],
                },
                other => vec![vec![other.clone()]],
            }
        };
        let mut next = Vec::new();
        for base in &variants {
            for choice in &choices {
                let mut v = base.clone();
                v.extend(choice.iter().cloned());
                next.push(v);
            }
        }
        variants = next;
    }

    let mut result: Vec<Conjunct> = Vec::new();
    'variant: for variant in &variants {
        let mut input = IntegralQeInput::new(big_m);
        let mut has_int = false;
        let mut fract_atoms: Vec<Atom> = Vec::new();
        let mut passthrough: Vec<Atom> = Vec::new();
        for a in variant {
            if !mentions(a) {
                passthrough.push(a.clone());
                continue;
            }
            match a {
                Atom::Integral { x, y, rel, k } => {
                    has_int = true;
                    let (other, on_left) = if x == bound {
                        (y.clone(), true)
                    } else {
                        (Some(x.clone()), false)
                    };
                    if on_left && y.as_ref() == Some(bound) {
                        // ⌊y⌋ - ⌊y⌋ rel k
                        if !rel.eval(&0, k) {
                            continue 'variant;
                        }
                        continue;
                    }
                    match (on_left, rel) {
                        (true, Rel::Le) => input.add_upper(other, *k),
                        (true, Rel::Ge) => input.add_lower(other, *k),
                        (false, Rel::Le) => input.add_lower(other, -*k),
                        (false, Rel::Ge) => input.add_upper(other, -*k),
                        _ => unreachable!("strict bounds were normalized"),
                    }
                }
                Atom::Modular { x, y, k, .. } => {
                    has_int = true;
                    if x == bound && y.as_ref() == Some(bound) {
                        if *k != 0 {
                            continue 'variant;
                        }
                        continue;
                    }
                    if x == bound {
                        input.add_gamma(y.clone(), *k as i64);
                    } else {
                        input.add_gamma(Some(x.clone()), -(*k as i64));
                    }
                }
                Atom::FracConst { .. } | Atom::FracDiag { .. } => fract_atoms.push(a.clone()),
                Atom::Classical { .. } => unreachable!("checked above"),
            }
        }

        let int_disjuncts: Vec<Conjunct> = if has_int {
            // the bound variable is a nonnegative integer
            input.add_lower(None, 0);
            to_dnf(&qe_integral(&input))
        } else {
            vec![vec![]]
        };
        let fract_out = match qe_fractional(bound, &fract_atoms)? {
            None => continue 'variant,
            Some(atoms) => atoms,
        };
        for d in &int_disjuncts {
            let mut conj = d.clone();
            conj.extend(fract_out.iter().cloned());
            conj.extend(passthrough.iter().cloned());
            result.push(conj);
        }
    }
    Ok(result)
}

/// Eliminate several variables in sequence from a conjunct.
pub fn qe_clock_all(bounds: &[Clock], body: &[Atom]) -> Result<Vec<Conjunct>> {
    let mut dnf = vec![body.to_vec()];
    for b in bounds {
        let mut next = Vec::new();
        for conj in &dnf {
            next.extend(qe_clock(b, conj)?);
        }
        dnf = next;
    }
    Ok(dnf)
}

// ---------------------------------------------------------------------------
// Finite-grid equivalence oracle.

/// Grid parameters. Floors range over `0..=floor_max` per clock; fractional
/// parts over `{j/(n+1)}` for `n` clocks, which realizes every ordering and
/// zero pattern.
#[derive(Debug, Clone)]
pub struct GridSpec {
    pub floor_max: i64,
}

fn max_const(c: &ClockConstraint) -> i64 {
    let mut k_max = 0i64;
    let mut l: i64 = 1;
    c.visit_atoms(&mut |a| match a {
        Atom::Classical { k, .. } | Atom::Integral { k, .. } => k_max = k_max.max(k.abs()),
        Atom::Modular { m, .. } => l = num_integer::lcm(l, *m as i64),
        _ => {}
    });
    2 * k_max + 2 * l + 2
}

/// A conjunct compiled for fast separated evaluation.
struct CompiledConjunct {
    int_atoms: Vec<Atom>,
    frac_atoms: Vec<Atom>,
}

fn compile_dnf(dnf: &[Conjunct]) -> Vec<CompiledConjunct> {
    dnf.iter()
        .map(|conj| {
            let (frac, int): (Vec<_>, Vec<_>) = conj.iter().cloned().partition(Atom::is_fractional);
            CompiledConjunct { int_atoms: int, frac_atoms: frac }
        })
        .collect()
}

fn eval_atoms_floors(atoms: &[Atom], floors: &BTreeMap<Clock, i64>) -> bool {
    atoms.iter().all(|a| {
        a.eval_views(&|c| floors.get(c).copied(), &|_| Some(rat::zero()))
            .expect("all clocks present in floor view")
    })
}

fn eval_atoms_fracts(atoms: &[Atom], fracts: &BTreeMap<Clock, Q>) -> bool {
    atoms.iter().all(|a| {
        a.eval_views(&|_| Some(0), &|c| fracts.get(c).cloned())
            .expect("all clocks present in fract view")
    })
}

fn floor_tuples(clocks: &[Clock], max: i64) -> Vec<BTreeMap<Clock, i64>> {
    let mut out = vec![BTreeMap::new()];
    for c in clocks {
        let mut next = Vec::new();
        for base in &out {
            for v in 0..=max {
                let mut m = base.clone();
                m.insert(c.clone(), v);
                next.push(m);
            }
        }
        out = next;
    }
    out
}

fn fract_patterns(clocks: &[Clock]) -> Vec<BTreeMap<Clock, Q>> {
    let n = clocks.len();
    let slots = n + 1;
    let mut out = vec![BTreeMap::new()];
    for c in clocks {
        let mut next = Vec::new();
        for base in &out {
            for j in 0..slots {
                let mut m = base.clone();
                m.insert(c.clone(), rat::qr(j as i64, slots as i64));
                next.push(m);
            }
        }
        out = next;
    }
    out
}

/// Decide logical equivalence of two clock constraints by exhaustive
/// evaluation over the finite region grid. Classical atoms are desugared
/// first so that every atom reads either the floor view or the fract view.
pub fn equiv_constraints(c1: &ClockConstraint, c2: &ClockConstraint, clocks: &BTreeSet<Clock>) -> bool {
    let d1 = crate::constraints::desugar(c1, DesugarMode::ToIntFrac);
    let d2 = crate::constraints::desugar(c2, DesugarMode::ToIntFrac);
    let mut all: BTreeSet<Clock> = clocks.clone();
    all.extend(d1.clocks());
    all.extend(d2.clocks());
    let clock_list: Vec<Clock> = all.into_iter().collect();
    let fmax = max_const(&d1).max(max_const(&d2));
    let dnf1 = compile_dnf(&to_dnf(&d1));
    let dnf2 = compile_dnf(&to_dnf(&d2));

    let patterns = fract_patterns(&clock_list);
    // Per conjunct, a bitmask of satisfied fract patterns.
    let mask = |cc: &[CompiledConjunct]| -> Vec<Vec<bool>> {
        cc.iter()
            .map(|c| patterns.iter().map(|p| eval_atoms_fracts(&c.frac_atoms, p)).collect())
            .collect()
    };
    let m1 = mask(&dnf1);
    let m2 = mask(&dnf2);

    for floors in floor_tuples(&clock_list, fmax) {
        let mut row1 = vec![false; patterns.len()];
        for (ci, c) in dnf1.iter().enumerate() {
            if eval_atoms_floors(&c.int_atoms, &floors) {
                for (pi, ok) in m1[ci].iter().enumerate() {
                    row1[pi] |= ok;
                }
            }
        }
        let mut row2 = vec![false; patterns.len()];
        for (ci, c) in dnf2.iter().enumerate() {
            if eval_atoms_floors(&c.int_atoms, &floors) {
                for (pi, ok) in m2[ci].iter().enumerate() {
                    row2[pi] |= ok;
                }
            }
        }
        if row1 != row2 {
            return false;
        }
    }
    true
}

/// Check that `candidate` (in DNF) is equivalent to `∃bound. body` by brute
/// force over the region grid. The witness loop for the bound variable runs
/// over floors up to a derived cap and over a refined fractional grid that
/// hits every gap between free fractional values.
pub fn quantified_equiv(bound: &Clock, body: &[Atom], candidate: &[Conjunct]) -> Result<bool> {
    if body.iter().any(Atom::is_classical) {
        return Err(Error::input("quantified_equiv expects a desugared body"));
    }
    let mut clocks: BTreeSet<Clock> = BTreeSet::new();
    for a in body {
        for c in a.clocks() {
            clocks.insert(c.clone());
        }
    }
    for conj in candidate {
        for a in conj {
            for c in a.clocks() {
                clocks.insert(c.clone());
            }
        }
    }
    clocks.remove(bound);
    let clock_list: Vec<Clock> = clocks.iter().cloned().collect();

    let body_c = from_dnf(&[body.to_vec()]);
    let cand_c = from_dnf(candidate);
    let fmax = max_const(&body_c).max(max_const(&cand_c));
    let y_floor_max = 2 * fmax + 2;

    let (body_frac, body_int): (Vec<_>, Vec<_>) = body.iter().cloned().partition(Atom::is_fractional);
    let cand = compile_dnf(candidate);

    let patterns = fract_patterns(&clock_list);
    let slots = clock_list.len() + 1;
    let y_fracts: Vec<Q> = (0..2 * slots).map(|j| rat::qr(j as i64, 2 * slots as i64)).collect();

    let cand_masks: Vec<Vec<bool>> = cand
        .iter()
        .map(|c| patterns.iter().map(|p| eval_atoms_fracts(&c.frac_atoms, p)).collect())
        .collect();

    // For each fract pattern: does some witness fract for y satisfy the
    // fractional body atoms?
    let frac_exists: Vec<bool> = patterns
        .iter()
        .map(|p| {
            y_fracts.iter().any(|fy| {
                let mut p2 = p.clone();
                p2.insert(bound.clone(), fy.clone());
                eval_atoms_fracts(&body_frac, &p2)
            })
        })
        .collect();

    for floors in floor_tuples(&clock_list, fmax) {
        let int_exists = (0..=y_floor_max).any(|ny| {
            let mut f2 = floors.clone();
            f2.insert(bound.clone(), ny);
            eval_atoms_floors(&body_int, &f2)
        });
        let mut cand_row = vec![false; patterns.len()];
        for (ci, c) in cand.iter().enumerate() {
            if eval_atoms_floors(&c.int_atoms, &floors) {
                for (pi, ok) in cand_masks[ci].iter().enumerate() {
                    cand_row[pi] |= ok;
                }
            }
        }
        for (pi, fe) in frac_exists.iter().enumerate() {
            let lhs = int_exists && *fe;
            if lhs != cand_row[pi] {
                return Ok(false);
            }
        }
    }
    Ok(true)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::constraints::ClockConstraint as CC;

    fn ck(n: &str) -> Clock {
        Clock::new(n)
    }

    #[test]
    fn qe_integral_forced_equal_contradicts_modulus() {
        // ∃y. x ≤ y ≤ x ∧ y ≡₂ x+1 is false (y = x forced, parity clash)
        let mut input = IntegralQeInput::new(2);
        input.add_lower(Some(ck("x")), 0);
        input.add_upper(Some(ck("x")), 0);
        input.add_gamma(Some(ck("x")), 1);
        let out = qe_integral(&input);
        // enumerate x over 0..10: out must be false everywhere, matching
        // brute-force search for y
        for x in 0..=10i64 {
            let floors = BTreeMap::from([(ck("x"), x)]);
            let got = out
                .eval_views(&|c| floors.get(c).copied(), &|_| Some(rat::zero()))
                .unwrap();
            let expect = (0..=12i64).any(|y| y >= x && y <= x && (y - x - 1).rem_euclid(2) == 0);
            assert_eq!(got, expect, "x = {x}");
        }
    }

    #[test]
    fn qe_integral_no_lower_bounds_is_true_for_all_naturals() {
        // ∃y. y ≤ x ∧ y ≡₂ 0: witness y = 0
        let mut input = IntegralQeInput::new(2);
        input.add_upper(Some(ck("x")), 0);
        input.add_gamma(None, 0);
        let out = qe_integral(&input);
        for x in 0..=10i64 {
            let floors = BTreeMap::from([(ck("x"), x)]);
            let got = out
                .eval_views(&|c| floors.get(c).copied(), &|_| Some(rat::zero()))
                .unwrap();
            let expect = (0..=12i64).any(|y| y <= x && y.rem_euclid(2) == 0);
            assert_eq!(got, expect);
        }
    }

    #[test]
    fn qe_integral_interpolation() {
        // ∃y. x1 ≤ y ∧ y ≤ x2 over ℕ reduces to x1 ≤ x2
        let mut input = IntegralQeInput::new(1);
        input.add_lower(Some(ck("x1")), 0);
        input.add_upper(Some(ck("x2")), 0);
        let out = qe_integral(&input);
        for a in 0..=6i64 {
            for b in 0..=6i64 {
                let floors = BTreeMap::from([(ck("x1"), a), (ck("x2"), b)]);
                let got = out
                    .eval_views(&|c| floors.get(c).copied(), &|_| Some(rat::zero()))
                    .unwrap();
                assert_eq!(got, a <= b, "a={a} b={b}");
            }
        }
    }

    #[test]
    fn qe_fractional_bound_interpolation() {
        // ∃y. {x1} ≤ {y} ∧ {y} ≤ {x2}  →  {x1} ≤ {x2}
        let body = vec![
            Atom::FracDiag { x: ck("x1"), y: ck("y"), rel: Rel::Le },
            Atom::FracDiag { x: ck("y"), y: ck("x2"), rel: Rel::Le },
        ];
        let out = qe_fractional(&ck("y"), &body).unwrap().unwrap();
        assert_eq!(out, vec![Atom::FracDiag { x: ck("x1"), y: ck("x2"), rel: Rel::Le }]);
    }

    #[test]
    fn qe_fractional_zero_pin_substitutes() {
        // ∃y. {y} = 0 ∧ {y} ≤ {x}  →  true
        let body = vec![
            Atom::frac_zero(ck("y")),
            Atom::FracDiag { x: ck("y"), y: ck("x"), rel: Rel::Le },
        ];
        let out = qe_fractional(&ck("y"), &body).unwrap().unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn qe_fractional_upper_only_is_true() {
        // ∃y. {y} ≤ {x1}  →  true (witness 0)
        let body = vec![Atom::FracDiag { x: ck("y"), y: ck("x1"), rel: Rel::Le }];
        let out = qe_fractional(&ck("y"), &body).unwrap().unwrap();
        assert!(out.is_empty());
    }

    #[test]
    fn qe_fractional_rejects_integral_atom() {
        let body = vec![Atom::Integral { x: ck("y"), y: None, rel: Rel::Le, k: 1 }];
        assert!(qe_fractional(&ck("y"), &body).is_err());
    }

    #[test]
    fn qe_clock_rejects_classical() {
        let body = vec![Atom::Classical { x: ck("y"), y: None, rel: Rel::Le, k: 1 }];
        assert!(qe_clock(&ck("y"), &body).is_err());
    }

    #[test]
    fn qe_clock_equal_floor_and_fract_is_true() {
        // ∃y. ⌊y⌋-⌊x⌋ = 0 ∧ {y} = {x}: every x admits y = x
        let body = vec![
            Atom::Integral { x: ck("y"), y: Some(ck("x")), rel: Rel::Eq, k: 0 },
            Atom::FracDiag { x: ck("y"), y: ck("x"), rel: Rel::Eq },
        ];
        let out = qe_clock(&ck("y"), &body).unwrap();
        assert!(quantified_equiv(&ck("y"), &body, &out).unwrap());
        // and it should be equivalent to true
        assert!(equiv_constraints(&from_dnf(&out), &CC::True, &BTreeSet::from([ck("x")])));
    }

    #[test]
    fn qe_clock_zero_frac_odd_floor() {
        // ∃y. {y}=0 ∧ ⌊y⌋ ≡₂ 1 ∧ ⌊y⌋ ≤ ⌊x⌋  ≡  ⌊x⌋ ≥ 1
        let body = vec![
            Atom::frac_zero(ck("y")),
            Atom::modular(ck("y"), None, 2, 1),
            Atom::Integral { x: ck("y"), y: Some(ck("x")), rel: Rel::Le, k: 0 },
        ];
        let out = qe_clock(&ck("y"), &body).unwrap();
        assert!(quantified_equiv(&ck("y"), &body, &out).unwrap());
        let expect = CC::Atom(Atom::Integral { x: ck("x"), y: None, rel: Rel::Ge, k: 1 });
        assert!(equiv_constraints(&from_dnf(&out), &expect, &BTreeSet::from([ck("x")])));
    }

    #[test]
    fn qe_clock_example_pop_constraint() {
        // ∃z ≥ 0. z - y1 = 1 ∧ ⌊z⌋ ≡₂ 0 ∧ {z} ≤ {x0}, with the classical
        // equality pre-desugared, eliminates to ⌊y1⌋ ≡₂ 1 ∧ {y1} ≤ {x0}.
        let z = ck("z");
        let classical = CC::Atom(Atom::Classical { x: z.clone(), y: Some(ck("y1")), rel: Rel::Eq, k: 1 });
        let desugared = crate::constraints::desugar(&classical, DesugarMode::ToIntFrac);
        let full = CC::and(vec![
            desugared,
            CC::Atom(Atom::modular(z.clone(), None, 2, 0)),
            CC::Atom(Atom::FracDiag { x: z.clone(), y: ck("x0"), rel: Rel::Le }),
        ]);
        let mut out: Vec<Conjunct> = Vec::new();
        for conj in to_dnf(&full) {
            out.extend(qe_clock(&z, &conj).unwrap());
        }
        let expect = CC::and(vec![
            CC::Atom(Atom::modular(ck("y1"), None, 2, 1)),
            CC::Atom(Atom::FracDiag { x: ck("y1"), y: ck("x0"), rel: Rel::Le }),
        ]);
        assert!(
            equiv_constraints(&from_dnf(&out), &expect, &BTreeSet::from([ck("x0"), ck("y1")])),
            "eliminated constraint differs from the expected pop constraint: {}",
            crate::sexpr::constraint_to_string(&from_dnf(&out))
        );
    }

    #[test]
    fn equiv_distinguishes_inequivalent_constraints() {
        let c1 = CC::Atom(Atom::Integral { x: ck("x"), y: None, rel: Rel::Le, k: 3 });
        let c2 = CC::Atom(Atom::Integral { x: ck("x"), y: None, rel: Rel::Le, k: 4 });
        assert!(!equiv_constraints(&c1, &c2, &BTreeSet::new()));
        assert!(equiv_constraints(&c1, &c1, &BTreeSet::new()));
    }
}
