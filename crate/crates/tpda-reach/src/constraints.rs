//! Clock constraints over rational clock valuations: representation,
//! evaluation, desugaring between classical and integral/fractional atoms,
//! shifting by a reference clock, and DNF normalization.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::rat::{self, Q};
use crate::{Error, Result};

/// A named clock.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct Clock(pub String);

impl Clock {
    pub fn new(name: impl Into<String>) -> Self {
        Clock(name.into())
    }
    pub fn name(&self) -> &str {
        &self.0
    }
}

impl fmt::Display for Clock {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// Comparison operators; atoms are closed under all five so that negation
/// never leaves the atom language.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Rel {
    Lt,
    Le,
    Eq,
    Ge,
    Gt,
}

impl Rel {
    pub fn eval<T: PartialOrd>(self, a: &T, b: &T) -> bool {
        match self {
            Rel::Lt => a < b,
            Rel::Le => a <= b,
            Rel::Eq => a == b,
            Rel::Ge => a >= b,
            Rel::Gt => a > b,
        }
    }

    /// Swap sides: `a rel b` iff `b rel.flip() a`.
    pub fn flip(self) -> Rel {
        match self {
            Rel::Lt => Rel::Gt,
            Rel::Le => Rel::Ge,
            Rel::Eq => Rel::Eq,
            Rel::Ge => Rel::Le,
            Rel::Gt => Rel::Lt,
        }
    }

    /// Complement, when it is again a single relation. `Eq` complements to
    /// a disjunction `Lt ∨ Gt` and is handled by callers.
    pub fn negate(self) -> Option<Rel> {
        match self {
            Rel::Lt => Some(Rel::Ge),
            Rel::Le => Some(Rel::Gt),
            Rel::Ge => Some(Rel::Lt),
            Rel::Gt => Some(Rel::Le),
            Rel::Eq => None,
        }
    }

    pub fn symbol(self) -> &'static str {
        match self {
            Rel::Lt => "lt",
            Rel::Le => "le",
            Rel::Eq => "eq",
            Rel::Ge => "ge",
            Rel::Gt => "gt",
        }
    }
}

/// Atomic clock constraints. `y = None` encodes the non-diagonal form.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum Atom {
    /// `x rel k` or `x - y rel k` over full clock values.
    Classical { x: Clock, y: Option<Clock>, rel: Rel, k: i64 },
    /// `⌊x⌋ rel k` or `⌊x⌋ - ⌊y⌋ rel k`.
    Integral { x: Clock, y: Option<Clock>, rel: Rel, k: i64 },
    /// `⌊x⌋ ≡_m k` or `⌊x⌋ - ⌊y⌋ ≡_m k`, possibly negated.
    Modular { x: Clock, y: Option<Clock>, m: u32, k: u32, negated: bool },
    /// `{x} rel 0`.
    FracConst { x: Clock, rel: Rel },
    /// `{x} rel {y}`.
    FracDiag { x: Clock, y: Clock, rel: Rel },
}

impl Atom {
    pub fn modular(x: Clock, y: Option<Clock>, m: u32, k: i64) -> Atom {
        assert!(m >= 1, "modulus must be at least 1");
        let k = k.rem_euclid(m as i64) as u32;
        Atom::Modular { x, y, m, k, negated: false }
    }

    pub fn frac_zero(x: Clock) -> Atom {
        Atom::FracConst { x, rel: Rel::Eq }
    }

    pub fn clocks(&self) -> Vec<&Clock> {
        match self {
            Atom::Classical { x, y, .. } | Atom::Integral { x, y, .. } | Atom::Modular { x, y, .. } => {
                let mut v = vec![x];
                if let Some(y) = y {
                    v.push(y);
                }
                v
            }
            Atom::FracConst { x, .. } => vec![x],
            Atom::FracDiag { x, y, .. } => vec![x, y],
        }
    }

    pub fn is_classical(&self) -> bool {
        matches!(self, Atom::Classical { .. })
    }

    pub fn is_integral(&self) -> bool {
        matches!(self, Atom::Integral { .. })
    }

    pub fn is_modular(&self) -> bool {
        matches!(self, Atom::Modular { .. })
    }

    pub fn is_fractional(&self) -> bool {
        matches!(self, Atom::FracConst { .. } | Atom::FracDiag { .. })
    }

    /// Complement as a constraint (negated modular atoms stay atoms; `Eq`
    /// order atoms split into a disjunction).
    pub fn negated(&self) -> ClockConstraint {
        fn order_neg(rel: Rel, lt: Atom, gt: Atom, single: impl Fn(Rel) -> Atom) -> ClockConstraint {
            match rel.negate() {
                Some(r) => ClockConstraint::Atom(single(r)),
                None => ClockConstraint::or(vec![ClockConstraint::Atom(lt), ClockConstraint::Atom(gt)]),
            }
        }
        match self {
            Atom::Classical { x, y, rel, k } => order_neg(
                *rel,
                Atom::Classical { x: x.clone(), y: y.clone(), rel: Rel::Lt, k: *k },
                Atom::Classical { x: x.clone(), y: y.clone(), rel: Rel::Gt, k: *k },
                |r| Atom::Classical { x: x.clone(), y: y.clone(), rel: r, k: *k },
            ),
            Atom::Integral { x, y, rel, k } => order_neg(
                *rel,
                Atom::Integral { x: x.clone(), y: y.clone(), rel: Rel::Lt, k: *k },
                Atom::Integral { x: x.clone(), y: y.clone(), rel: Rel::Gt, k: *k },
                |r| Atom::Integral { x: x.clone(), y: y.clone(), rel: r, k: *k },
            ),
            Atom::Modular { x, y, m, k, negated } => ClockConstraint::Atom(Atom::Modular {
                x: x.clone(),
                y: y.clone(),
                m: *m,
                k: *k,
                negated: !negated,
            }),
            Atom::FracConst { x, rel } => order_neg(
                *rel,
                Atom::FracConst { x: x.clone(), rel: Rel::Lt },
                Atom::FracConst { x: x.clone(), rel: Rel::Gt },
                |r| Atom::FracConst { x: x.clone(), rel: r },
            ),
            Atom::FracDiag { x, y, rel } => order_neg(
                *rel,
                Atom::FracDiag { x: x.clone(), y: y.clone(), rel: Rel::Lt },
                Atom::FracDiag { x: x.clone(), y: y.clone(), rel: Rel::Gt },
                |r| Atom::FracDiag { x: x.clone(), y: y.clone(), rel: r },
            ),
        }
    }

    /// Evaluate on explicit floor and fract views. Returns `None` if a clock
    /// is missing from a view.
    pub fn eval_views(
        &self,
        floors: &dyn Fn(&Clock) -> Option<i64>,
        fracts: &dyn Fn(&Clock) -> Option<Q>,
    ) -> Option<bool> {
        match self {
            Atom::Classical { x, y, rel, k } => {
                let fx = floors(x)?;
                let gx = fracts(x)?;
                let vx = rat::qi(fx) + gx;
                let vy = match y {
                    Some(y) => rat::qi(floors(y)?) + fracts(y)?,
                    None => rat::zero(),
                };
                Some(rel.eval(&(vx - vy), &rat::qi(*k)))
            }
            Atom::Integral { x, y, rel, k } => {
                let fx = floors(x)?;
                let fy = match y {
                    Some(y) => floors(y)?,
                    None => 0,
                };
                Some(rel.eval(&(fx - fy), k))
            }
            Atom::Modular { x, y, m, k, negated } => {
                let fx = floors(x)?;
                let fy = match y {
                    Some(y) => floors(y)?,
                    None => 0,
                };
                let holds = (fx - fy).rem_euclid(*m as i64) as u32 == *k;
                Some(holds != *negated)
            }
            Atom::FracConst { x, rel } => {
                let gx = fracts(x)?;
                Some(rel.eval(&gx, &rat::zero()))
            }
            Atom::FracDiag { x, y, rel } => {
                let gx = fracts(x)?;
                let gy = fracts(y)?;
                Some(rel.eval(&gx, &gy))
            }
        }
    }
}

/// Boolean combinations of atoms.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum ClockConstraint {
    True,
    False,
    Atom(Atom),
    Not(Box<ClockConstraint>),
    And(Vec<ClockConstraint>),
    Or(Vec<ClockConstraint>),
}

impl ClockConstraint {
    pub fn and(mut parts: Vec<ClockConstraint>) -> ClockConstraint {
        parts.retain(|c| !matches!(c, ClockConstraint::True));
        if parts.iter().any(|c| matches!(c, ClockConstraint::False)) {
            return ClockConstraint::False;
        }
        match parts.len() {
            0 => ClockConstraint::True,
            1 => parts.pop().unwrap(),
            _ => ClockConstraint::And(parts),
        }
    }

    pub fn or(mut parts: Vec<ClockConstraint>) -> ClockConstraint {
        parts.retain(|c| !matches!(c, ClockConstraint::False));
        if parts.iter().any(|c| matches!(c, ClockConstraint::True)) {
            return ClockConstraint::True;
        }
        match parts.len() {
            0 => ClockConstraint::False,
            1 => parts.pop().unwrap(),
            _ => ClockConstraint::Or(parts),
        }
    }

    pub fn not(c: ClockConstraint) -> ClockConstraint {
        match c {
            ClockConstraint::True => ClockConstraint::False,
            ClockConstraint::False => ClockConstraint::True,
            other => ClockConstraint::Not(Box::new(other)),
        }
    }

    pub fn atom(a: Atom) -> ClockConstraint {
        ClockConstraint::Atom(a)
    }

    /// All clocks mentioned.
    pub fn clocks(&self) -> BTreeSet<Clock> {
        let mut out = BTreeSet::new();
        self.visit_atoms(&mut |a| {
            for c in a.clocks() {
                out.insert(c.clone());
            }
        });
        out
    }

    pub fn visit_atoms(&self, f: &mut impl FnMut(&Atom)) {
        match self {
            ClockConstraint::True | ClockConstraint::False => {}
            ClockConstraint::Atom(a) => f(a),
            ClockConstraint::Not(c) => c.visit_atoms(f),
            ClockConstraint::And(cs) | ClockConstraint::Or(cs) => {
                for c in cs {
                    c.visit_atoms(f)
                }
            }
        }
    }

    /// Rebuild with every atom replaced by a constraint.
    pub fn map_atoms(&self, f: &impl Fn(&Atom) -> ClockConstraint) -> ClockConstraint {
        match self {
            ClockConstraint::True => ClockConstraint::True,
            ClockConstraint::False => ClockConstraint::False,
            ClockConstraint::Atom(a) => f(a),
            ClockConstraint::Not(c) => ClockConstraint::not(c.map_atoms(f)),
            ClockConstraint::And(cs) => ClockConstraint::and(cs.iter().map(|c| c.map_atoms(f)).collect()),
            ClockConstraint::Or(cs) => ClockConstraint::or(cs.iter().map(|c| c.map_atoms(f)).collect()),
        }
    }

    /// Rename clocks everywhere.
    pub fn rename_clocks(&self, f: &impl Fn(&Clock) -> Clock) -> ClockConstraint {
        self.map_atoms(&|a| {
            let g = |c: &Clock| f(c);
            let a2 = match a {
                Atom::Classical { x, y, rel, k } => Atom::Classical { x: g(x), y: y.as_ref().map(g), rel: *rel, k: *k },
                Atom::Integral { x, y, rel, k } => Atom::Integral { x: g(x), y: y.as_ref().map(g), rel: *rel, k: *k },
                Atom::Modular { x, y, m, k, negated } => {
                    Atom::Modular { x: g(x), y: y.as_ref().map(g), m: *m, k: *k, negated: *negated }
                }
                Atom::FracConst { x, rel } => Atom::FracConst { x: g(x), rel: *rel },
                Atom::FracDiag { x, y, rel } => Atom::FracDiag { x: g(x), y: g(y), rel: *rel },
            };
            ClockConstraint::Atom(a2)
        })
    }

    pub fn eval_views(
        &self,
        floors: &dyn Fn(&Clock) -> Option<i64>,
        fracts: &dyn Fn(&Clock) -> Option<Q>,
    ) -> Option<bool> {
        match self {
            ClockConstraint::True => Some(true),
            ClockConstraint::False => Some(false),
            ClockConstraint::Atom(a) => a.eval_views(floors, fracts),
            ClockConstraint::Not(c) => c.eval_views(floors, fracts).map(|b| !b),
            ClockConstraint::And(cs) => {
                for c in cs {
                    if !c.eval_views(floors, fracts)? {
                        return Some(false);
                    }
                }
                Some(true)
            }
            ClockConstraint::Or(cs) => {
                for c in cs {
                    if c.eval_views(floors, fracts)? {
                        return Some(true);
                    }
                }
                Some(false)
            }
        }
    }

    pub fn is_fractional(&self) -> bool {
        let mut ok = true;
        self.visit_atoms(&mut |a| {
            if !a.is_fractional() {
                ok = false;
            }
        });
        ok
    }

    pub fn has_classical(&self) -> bool {
        let mut found = false;
        self.visit_atoms(&mut |a| {
            if a.is_classical() {
                found = true;
            }
        });
        found
    }
}

/// Map clock → nonnegative rational, with derived floor and fract views.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct ClockValuation {
    entries: BTreeMap<Clock, Q>,
}

impl ClockValuation {
    pub fn new() -> Self {
        ClockValuation { entries: BTreeMap::new() }
    }

    pub fn from_pairs(pairs: impl IntoIterator<Item = (Clock, Q)>) -> Result<Self> {
        let mut v = ClockValuation::new();
        for (c, q) in pairs {
            v.set(c, q)?;
        }
        Ok(v)
    }

    /// All listed clocks set to zero.
    pub fn zero(clocks: impl IntoIterator<Item = Clock>) -> Self {
        let entries = clocks.into_iter().map(|c| (c, rat::zero())).collect();
        ClockValuation { entries }
    }

    pub fn set(&mut self, clock: Clock, value: Q) -> Result<()> {
        if !rat::is_nonneg(&value) {
            return Err(Error::input(format!("clock {clock} assigned a negative value")));
        }
        self.entries.insert(clock, value);
        Ok(())
    }

    pub fn get(&self, clock: &Clock) -> Option<&Q> {
        self.entries.get(clock)
    }

    pub fn contains(&self, clock: &Clock) -> bool {
        self.entries.contains_key(clock)
    }

    pub fn clocks(&self) -> impl Iterator<Item = &Clock> {
        self.entries.keys()
    }

    pub fn iter(&self) -> impl Iterator<Item = (&Clock, &Q)> {
        self.entries.iter()
    }

    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    pub fn floor_of(&self, clock: &Clock) -> Option<i64> {
        self.entries.get(clock).map(rat::floor_i64)
    }

    pub fn fract_of(&self, clock: &Clock) -> Option<Q> {
        self.entries.get(clock).map(rat::fract)
    }

    /// Advance every clock by `t ≥ 0`.
    pub fn advance(&self, t: &Q) -> ClockValuation {
        let entries = self.entries.iter().map(|(c, v)| (c.clone(), v + t)).collect();
        ClockValuation { entries }
    }

    /// Reset the clocks in `set` to zero.
    pub fn reset(&self, set: &BTreeSet<Clock>) -> ClockValuation {
        let entries = self
            .entries
            .iter()
            .map(|(c, v)| {
                let nv = if set.contains(c) { rat::zero() } else { v.clone() };
                (c.clone(), nv)
            })
            .collect();
        ClockValuation { entries }
    }

    /// Restrict to the given clock set.
    pub fn restrict(&self, keep: &BTreeSet<Clock>) -> ClockValuation {
        let entries = self
            .entries
            .iter()
            .filter(|(c, _)| keep.contains(*c))
            .map(|(c, v)| (c.clone(), v.clone()))
            .collect();
        ClockValuation { entries }
    }

    /// Union of disjoint valuations.
    pub fn union(&self, other: &ClockValuation) -> ClockValuation {
        let mut entries = self.entries.clone();
        for (c, v) in &other.entries {
            entries.insert(c.clone(), v.clone());
        }
        ClockValuation { entries }
    }

    /// Take the fractional part of every clock.
    pub fn fract_view(&self) -> ClockValuation {
        let entries = self.entries.iter().map(|(c, v)| (c.clone(), rat::fract(v))).collect();
        ClockValuation { entries }
    }
}

impl Default for ClockValuation {
    fn default() -> Self {
        Self::new()
    }
}

impl fmt::Display for ClockValuation {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let parts: Vec<String> = self.entries.iter().map(|(c, v)| format!("{c}={v}")).collect();
        write!(f, "{}", parts.join(","))
    }
}

/// Evaluate a constraint on a valuation. Integral atoms read the floor view,
/// fractional atoms the fract view.
pub fn eval(c: &ClockConstraint, v: &ClockValuation) -> Result<bool> {
    let mut missing: Option<Clock> = None;
    for cl in c.clocks() {
        if !v.contains(&cl) {
            missing = Some(cl);
            break;
        }
    }
    if let Some(cl) = missing {
        return Err(Error::input(format!("valuation is missing clock {cl}")));
    }
    Ok(c
        .eval_views(&|cl| v.floor_of(cl), &|cl| v.fract_of(cl))
        .expect("all clocks present"))
}

/// Conditions of the form `{x} + {y} ≥ 1` or `{x} < {y}` whose truth value
/// contributes a 0/1 correction term. Indicator terms are a constraint-builder
/// device: they are always expanded into case disjunctions before a
/// constraint is stored.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum IndicatorTerm {
    /// `⟦{x} < {y}⟧` where `y = None` reads as `⟦{x} < 0⟧` (always 0).
    FractLt(Clock, Option<Clock>),
}

impl IndicatorTerm {
    /// The pair (condition-holds constraint, condition-fails constraint).
    pub fn cases(&self) -> [(ClockConstraint, i64); 2] {
        match self {
            IndicatorTerm::FractLt(x, Some(y)) => [
                (ClockConstraint::Atom(Atom::FracDiag { x: x.clone(), y: y.clone(), rel: Rel::Lt }), 1),
                (ClockConstraint::Atom(Atom::FracDiag { x: x.clone(), y: y.clone(), rel: Rel::Ge }), 0),
            ],
            IndicatorTerm::FractLt(_, None) => {
                // {x} < 0 never holds
                [(ClockConstraint::False, 1), (ClockConstraint::True, 0)]
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum DesugarMode {
    /// Remove classical atoms in favour of integral + fractional ones.
    ToIntFrac,
    /// Remove integral atoms in favour of classical + fractional ones.
    ToClassicalFrac,
}

/// Rewrite between classical and integral atom vocabularies; the result is
/// logically equivalent on all valuations.
pub fn desugar(c: &ClockConstraint, mode: DesugarMode) -> ClockConstraint {
    c.map_atoms(&|a| match (mode, a) {
        (DesugarMode::ToIntFrac, Atom::Classical { x, y, rel, k }) => classical_to_int_frac(x, y, *rel, *k),
        (DesugarMode::ToClassicalFrac, Atom::Integral { x, y, rel, k }) => {
            integral_to_classical_frac(x, y, *rel, *k)
        }
        _ => ClockConstraint::Atom(a.clone()),
    })
}

fn int_atom(x: &Clock, y: &Option<Clock>, rel: Rel, k: i64) -> ClockConstraint {
    ClockConstraint::Atom(Atom::Integral { x: x.clone(), y: y.clone(), rel, k })
}

fn cls_atom(x: &Clock, y: &Option<Clock>, rel: Rel, k: i64) -> ClockConstraint {
    ClockConstraint::Atom(Atom::Classical { x: x.clone(), y: y.clone(), rel, k })
}

fn frac_le(x: &Clock, y: &Option<Clock>, rel: Rel) -> ClockConstraint {
    // compares {x} to {y}, with y = None read as the constant 0
    match y {
        Some(y) => ClockConstraint::Atom(Atom::FracDiag { x: x.clone(), y: y.clone(), rel }),
        None => ClockConstraint::Atom(Atom::FracConst { x: x.clone(), rel }),
    }
}

fn classical_to_int_frac(x: &Clock, y: &Option<Clock>, rel: Rel, k: i64) -> ClockConstraint {
    match rel {
        // x - y ≤ k  iff  (⌊x⌋-⌊y⌋ ≤ k ∧ {x} ≤ {y}) ∨ ⌊x⌋-⌊y⌋ ≤ k-1
        Rel::Le => ClockConstraint::or(vec![
            ClockConstraint::and(vec![int_atom(x, y, Rel::Le, k), frac_le(x, y, Rel::Le)]),
            int_atom(x, y, Rel::Le, k - 1),
        ]),
        Rel::Lt => ClockConstraint::or(vec![
            ClockConstraint::and(vec![int_atom(x, y, Rel::Le, k), frac_le(x, y, Rel::Lt)]),
            int_atom(x, y, Rel::Le, k - 1),
        ]),
        Rel::Eq => ClockConstraint::and(vec![int_atom(x, y, Rel::Eq, k), frac_le(x, y, Rel::Eq)]),
        Rel::Ge => ClockConstraint::or(vec![
            ClockConstraint::and(vec![int_atom(x, y, Rel::Ge, k), frac_le(x, y, Rel::Ge)]),
            int_atom(x, y, Rel::Ge, k + 1),
        ]),
        Rel::Gt => ClockConstraint::or(vec![
            ClockConstraint::and(vec![int_atom(x, y, Rel::Ge, k), frac_le(x, y, Rel::Gt)]),
            int_atom(x, y, Rel::Ge, k + 1),
        ]),
    }
}

fn integral_to_classical_frac(x: &Clock, y: &Option<Clock>, rel: Rel, k: i64) -> ClockConstraint {
    match rel {
        // ⌊x⌋-⌊y⌋ ≤ k  iff  x - y ≤ k ∨ (x - y ≤ k+1 ∧ {x} > {y})
        Rel::Le => ClockConstraint::or(vec![
            cls_atom(x, y, Rel::Le, k),
            ClockConstraint::and(vec![cls_atom(x, y, Rel::Le, k + 1), frac_le(x, y, Rel::Gt)]),
        ]),
        Rel::Lt => integral_to_classical_frac(x, y, Rel::Le, k - 1),
        Rel::Gt => integral_to_classical_frac(x, y, Rel::Ge, k + 1),
        Rel::Ge => ClockConstraint::or(vec![
            cls_atom(x, y, Rel::Ge, k),
            ClockConstraint::and(vec![cls_atom(x, y, Rel::Ge, k - 1), frac_le(x, y, Rel::Lt)]),
        ]),
        Rel::Eq => ClockConstraint::and(vec![
            integral_to_classical_frac(x, y, Rel::Le, k),
            integral_to_classical_frac(x, y, Rel::Ge, k),
        ]),
    }
}

/// Replace every clock `x` of `c` by `x - reference` and re-express the
/// result as a clock constraint over the original clocks plus `reference`.
/// Classical atoms are invariant; fractional atoms expand into ordering
/// disjunctions; integral and modular atoms pick up indicator corrections.
pub fn shift(c: &ClockConstraint, reference: &Clock) -> Result<ClockConstraint> {
    if c.clocks().contains(reference) {
        return Err(Error::input(format!(
            "shift reference clock {reference} already occurs in the constraint"
        )));
    }
    let r = reference;
    Ok(c.map_atoms(&|a| shift_atom(a, r)))
}

fn shift_atom(a: &Atom, r: &Clock) -> ClockConstraint {
    match a {
        // (x - r) - (y - r) = x - y ; (x - r) rel k becomes diagonal.
        Atom::Classical { x, y, rel, k } => match y {
            Some(_) => ClockConstraint::Atom(a.clone()),
            None => ClockConstraint::Atom(Atom::Classical { x: x.clone(), y: Some(r.clone()), rel: *rel, k: *k }),
        },
        // ⌊x-r⌋ - ⌊y-r⌋ = ⌊x⌋ - ⌊y⌋ + ⟦{y}<{r}⟧ - ⟦{x}<{r}⟧
        Atom::Integral { x, y, rel, k } => {
            let bx = IndicatorTerm::FractLt(x.clone(), Some(r.clone()));
            match y {
                Some(y) => {
                    let by = IndicatorTerm::FractLt(y.clone(), Some(r.clone()));
                    expand_two_indicators(&bx, &by, &|vx, vy| {
                        // ⌊x⌋-⌊y⌋ rel k - vy + vx
                        int_atom(x, &Some(y.clone()), *rel, *k - vy + vx)
                    })
                }
                // ⌊x-r⌋ = ⌊x⌋ - ⌊r⌋ - ⟦{x}<{r}⟧
                None => expand_one_indicator(&bx, &|vx| int_atom(x, &Some(r.clone()), *rel, *k + vx)),
            }
        }
        Atom::Modular { x, y, m, k, negated } => {
            let bx = IndicatorTerm::FractLt(x.clone(), Some(r.clone()));
            let mk = |y: &Option<Clock>, kk: i64| {
                let mut at = Atom::modular(x.clone(), y.clone(), *m, kk);
                if let Atom::Modular { negated: n, .. } = &mut at {
                    *n = *negated;
                }
                ClockConstraint::Atom(at)
            };
            match y {
                Some(y) => {
                    let by = IndicatorTerm::FractLt(y.clone(), Some(r.clone()));
                    expand_two_indicators(&bx, &by, &|vx, vy| mk(&Some(y.clone()), *k as i64 - vy + vx))
                }
                None => expand_one_indicator(&bx, &|vx| mk(&Some(r.clone()), *k as i64 + vx)),
            }
        }
        // {x-r} rel 0 iff {x} rel' {r} (zero iff equal fractional parts)
        Atom::FracConst { x, rel } => {
            let eq = ClockConstraint::Atom(Atom::FracDiag { x: x.clone(), y: r.clone(), rel: Rel::Eq });
            match rel {
                Rel::Eq | Rel::Le => eq,
                Rel::Lt => ClockConstraint::False,
                Rel::Ge => ClockConstraint::True,
                Rel::Gt => ClockConstraint::not(eq),
            }
        }
        // {x-r} rel {y-r}: case analysis on the total orderings of
        // {r}, {x}, {y}; the ≤ case is the three-ordering disjunction.
        Atom::FracDiag { x, y, rel } => shift_frac_diag(x, y, *rel, r),
    }
}

fn expand_one_indicator(b: &IndicatorTerm, body: &impl Fn(i64) -> ClockConstraint) -> ClockConstraint {
    let mut parts = Vec::new();
    for (cond, val) in b.cases() {
        parts.push(ClockConstraint::and(vec![cond, body(val)]));
    }
    ClockConstraint::or(parts)
}

fn expand_two_indicators(
    bx: &IndicatorTerm,
    by: &IndicatorTerm,
    body: &impl Fn(i64, i64) -> ClockConstraint,
) -> ClockConstraint {
    let mut parts = Vec::new();
    for (cx, vx) in bx.cases() {
        for (cy, vy) in by.cases() {
            parts.push(ClockConstraint::and(vec![cx.clone(), cy, body(vx, vy)]));
        }
    }
    ClockConstraint::or(parts)
}

fn fdiag(x: &Clock, y: &Clock, rel: Rel) -> ClockConstraint {
    ClockConstraint::Atom(Atom::FracDiag { x: x.clone(), y: y.clone(), rel })
}

fn shift_frac_diag(x: &Clock, y: &Clock, rel: Rel, r: &Clock) -> ClockConstraint {
    match rel {
        // {x-r} ≤ {y-r} iff {r}≤{x}≤{y} ∨ {x}≤{y}<{r} ∨ {y}<{r}≤{x}
        Rel::Le => ClockConstraint::or(vec![
            ClockConstraint::and(vec![fdiag(r, x, Rel::Le), fdiag(x, y, Rel::Le)]),
            ClockConstraint::and(vec![fdiag(x, y, Rel::Le), fdiag(y, r, Rel::Lt)]),
            ClockConstraint::and(vec![fdiag(y, r, Rel::Lt), fdiag(r, x, Rel::Le)]),
        ]),
        Rel::Ge => shift_frac_diag(y, x, Rel::Le, r),
        Rel::Lt => ClockConstraint::not(shift_frac_diag(y, x, Rel::Le, r)),
        Rel::Gt => ClockConstraint::not(shift_frac_diag(x, y, Rel::Le, r)),
        // {x-r} = {y-r} iff {x} = {y}
        Rel::Eq => fdiag(x, y, Rel::Eq),
    }
}

/// A conjunction of atoms (negations already pushed into the atoms).
pub type Conjunct = Vec<Atom>;

/// Disjunctive normal form by naive distribution. The disjunction of the
/// returned conjuncts is logically equivalent to the input; obviously false
/// conjuncts are pruned syntactically, unsatisfiable ones may remain.
pub fn to_dnf(c: &ClockConstraint) -> Vec<Conjunct> {
    let nnf = push_negations(c, false);
    distribute(&nnf)
}

fn push_negations(c: &ClockConstraint, negate: bool) -> ClockConstraint {
    match c {
        ClockConstraint::True => {
            if negate {
                ClockConstraint::False
            } else {
                ClockConstraint::True
            }
        }
        ClockConstraint::False => {
            if negate {
                ClockConstraint::True
            } else {
                ClockConstraint::False
            }
        }
        ClockConstraint::Atom(a) => {
            if negate {
                a.negated()
            } else {
                ClockConstraint::Atom(a.clone())
            }
        }
        ClockConstraint::Not(inner) => push_negations(inner, !negate),
        ClockConstraint::And(cs) => {
            let parts: Vec<_> = cs.iter().map(|c| push_negations(c, negate)).collect();
            if negate {
                ClockConstraint::or(parts)
            } else {
                ClockConstraint::and(parts)
            }
        }
        ClockConstraint::Or(cs) => {
            let parts: Vec<_> = cs.iter().map(|c| push_negations(c, negate)).collect();
            if negate {
                ClockConstraint::and(parts)
            } else {
                ClockConstraint::or(parts)
            }
        }
    }
}

fn distribute(c: &ClockConstraint) -> Vec<Conjunct> {
    match c {
        ClockConstraint::True => vec![vec![]],
        ClockConstraint::False => vec![],
        ClockConstraint::Atom(a) => vec![vec![a.clone()]],
        ClockConstraint::Not(_) => unreachable!("negations were pushed to atoms"),
        ClockConstraint::Or(cs) => cs.iter().flat_map(distribute).collect(),
        ClockConstraint::And(cs) => {
            let mut acc: Vec<Conjunct> = vec![vec![]];
            for part in cs {
                let ds = distribute(part);
                let mut next = Vec::new();
                for base in &acc {
                    for d in &ds {
                        let mut merged = base.clone();
                        merged.extend(d.iter().cloned());
                        next.push(merged);
                    }
                }
                acc = next;
            }
            acc
        }
    }
}

/// Rebuild a constraint from DNF conjuncts.
pub fn from_dnf(dnf: &[Conjunct]) -> ClockConstraint {
    ClockConstraint::or(
        dnf.iter()
            .map(|conj| ClockConstraint::and(conj.iter().cloned().map(ClockConstraint::Atom).collect()))
            .collect(),
    )
}
