//! The timed pushdown automaton model: syntax, configurations, operational
//! semantics, and the textual file format.

use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use crate::constraints::{eval, Atom, Clock, ClockConstraint, ClockValuation};
use crate::rat::{self, Q};
use crate::sexpr;
use crate::{Error, Result};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct Letter(pub String);

impl fmt::Display for Letter {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct StackSym(pub String);

impl fmt::Display for StackSym {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub struct Loc(pub String);

impl Loc {
    pub fn new(s: impl Into<String>) -> Loc {
        Loc(s.into())
    }
}

impl fmt::Display for Loc {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}", self.0)
    }
}

/// One operation of a transition's operation sequence.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum Op {
    Elapse,
    /// `None` reads the empty word.
    Read(Option<Letter>),
    Test(ClockConstraint),
    Reset(BTreeSet<Clock>),
    Push(StackSym, ClockConstraint),
    Pop(StackSym, ClockConstraint),
}

impl Op {
    pub fn is_push(&self) -> bool {
        matches!(self, Op::Push(..))
    }
    pub fn is_pop(&self) -> bool {
        matches!(self, Op::Pop(..))
    }
}

/// A transition `from --ops--> to`; operations execute in order.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Transition {
    pub from: Loc,
    pub to: Loc,
    pub ops: Vec<Op>,
}

pub type TransId = usize;

/// Count of transition occurrences, finitely supported.
pub type ParikhVector = BTreeMap<TransId, u64>;

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct Tpda {
    pub input_alphabet: BTreeSet<Letter>,
    pub stack_alphabet: BTreeSet<StackSym>,
    pub locations: BTreeSet<Loc>,
    /// Control clocks; `reference` is a member and is never reset.
    pub control_clocks: BTreeSet<Clock>,
    pub reference: Clock,
    pub stack_clocks: BTreeSet<Clock>,
    pub modulus: u32,
    pub transitions: Vec<Transition>,
}

impl Tpda {
    pub fn transition(&self, id: TransId) -> Result<&Transition> {
        self.transitions.get(id).ok_or_else(|| Error::input(format!("no transition with id {id}")))
    }

    pub fn all_clocks(&self) -> BTreeSet<Clock> {
        self.control_clocks.union(&self.stack_clocks).cloned().collect()
    }

    pub fn has_location(&self, l: &Loc) -> bool {
        self.locations.contains(l)
    }

    /// Structural and semantic validation of the model invariants.
    pub fn validate(&self) -> Result<()> {
        if !self.control_clocks.contains(&self.reference) {
            return Err(Error::input(format!(
                "reference clock {} is not a control clock",
                self.reference
            )));
        }
        if self.modulus < 1 {
            return Err(Error::input("modulus must be at least 1"));
        }
        if !self.control_clocks.is_disjoint(&self.stack_clocks) {
            return Err(Error::input("control and stack clocks must be disjoint"));
        }
        if self.input_alphabet.contains(&Letter("eps".into())) {
            return Err(Error::input("'eps' is reserved for the empty input"));
        }
        let check_consts = |c: &ClockConstraint, what: &str| -> Result<()> {
            let mut bad = None;
            c.visit_atoms(&mut |a| match a {
                Atom::Classical { k, .. } | Atom::Integral { k, .. } => {
                    if k.unsigned_abs() >= self.modulus as u64 && bad.is_none() {
                        bad = Some(format!("constant {k} in {what} must satisfy |k| < modulus"));
                    }
                }
                Atom::Modular { m, .. } => {
                    if *m != self.modulus && bad.is_none() {
                        bad = Some(format!(
                            "modular constraint in {what} uses modulus {m}, expected the global {}",
                            self.modulus
                        ));
                    }
                }
                _ => {}
            });
            match bad {
                Some(msg) => Err(Error::input(msg)),
                None => Ok(()),
            }
        };
        for (i, t) in self.transitions.iter().enumerate() {
            let tag = format!("transition {i}");
            if !self.has_location(&t.from) || !self.has_location(&t.to) {
                return Err(Error::input(format!("{tag}: unknown location")));
            }
            for op in &t.ops {
                match op {
                    Op::Elapse => {}
                    Op::Read(Some(a)) => {
                        if !self.input_alphabet.contains(a) {
                            return Err(Error::input(format!("{tag}: unknown letter {a}")));
                        }
                    }
                    Op::Read(None) => {}
                    Op::Test(c) => {
                        for clock in c.clocks() {
                            if !self.control_clocks.contains(&clock) {
                                return Err(Error::input(format!(
                                    "{tag}: test mentions non-control clock {clock}"
                                )));
                            }
                        }
                        check_consts(c, &tag)?;
                    }
                    Op::Reset(ys) => {
                        if ys.contains(&self.reference) {
                            return Err(Error::input(format!(
                                "{tag}: the reference clock {} is never reset",
                                self.reference
                            )));
                        }
                        for y in ys {
                            if !self.control_clocks.contains(y) {
                                return Err(Error::input(format!("{tag}: reset of unknown clock {y}")));
                            }
                        }
                    }
                    Op::Push(sym, c) | Op::Pop(sym, c) => {
                        if !self.stack_alphabet.contains(sym) {
                            return Err(Error::input(format!("{tag}: unknown stack symbol {sym}")));
                        }
                        let all = self.all_clocks();
                        for clock in c.clocks() {
                            if !all.contains(&clock) {
                                return Err(Error::input(format!(
                                    "{tag}: stack constraint mentions unknown clock {clock}"
                                )));
                            }
                        }
                        let mut control_only = None;
                        c.visit_atoms(&mut |a| {
                            if !a.clocks().iter().any(|cl| self.stack_clocks.contains(cl))
                                && control_only.is_none()
                            {
                                control_only = Some(format!("{a:?}"));
                            }
                        });
                        if let Some(atom) = control_only {
                            return Err(Error::input(format!(
                                "{tag}: atomic stack constraint without a stack clock: {atom}"
                            )));
                        }
                        check_consts(c, &tag)?;
                    }
                }
            }
        }
        Ok(())
    }
}

/// A running state: location, control valuation, timed stack (top is last).
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash)]
pub struct Configuration {
    pub loc: Loc,
    pub ctrl: ClockValuation,
    pub stack: Vec<(StackSym, ClockValuation)>,
}

impl Configuration {
    pub fn new(loc: Loc, ctrl: ClockValuation) -> Configuration {
        Configuration { loc, ctrl, stack: Vec::new() }
    }

    /// Total elapsed time against a later configuration, read off the
    /// never-reset reference clock.
    pub fn elapsed_to(&self, later: &Configuration, reference: &Clock) -> Option<Q> {
        let a = self.ctrl.get(reference)?;
        let b = later.ctrl.get(reference)?;
        Some(b - a)
    }
}

/// Choice data for the nondeterministic operations of one transition,
/// aligned with its op sequence.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum OpChoice {
    None,
    Elapse(Q),
    PushVal(ClockValuation),
}

/// Apply one transition. Returns `Ok(None)` when a guard fails (test or pop
/// constraint unsatisfied, wrong top symbol, empty stack on pop).
pub fn step(
    tpda: &Tpda,
    config: &Configuration,
    id: TransId,
    choices: &[OpChoice],
) -> Result<Option<Configuration>> {
    let t = tpda.transition(id)?;
    if config.loc != t.from {
        return Ok(None);
    }
    if choices.len() != t.ops.len() {
        return Err(Error::input(format!(
            "transition {id} has {} operations but {} choices were supplied",
            t.ops.len(),
            choices.len()
        )));
    }
    let mut ctrl = config.ctrl.clone();
    let mut stack = config.stack.clone();
    for (op, choice) in t.ops.iter().zip(choices) {
        match (op, choice) {
            (Op::Elapse, OpChoice::Elapse(dt)) => {
                if !rat::is_nonneg(dt) {
                    return Err(Error::input("elapse amount must be nonnegative"));
                }
                ctrl = ctrl.advance(dt);
                for (_, v) in stack.iter_mut() {
                    *v = v.advance(dt);
                }
            }
            (Op::Elapse, _) => return Err(Error::input("elapse requires an elapse choice")),
            (Op::Read(_), OpChoice::None) => {}
            (Op::Test(c), OpChoice::None) => {
                if !eval(c, &ctrl)? {
                    return Ok(None);
                }
            }
            (Op::Reset(ys), OpChoice::None) => {
                ctrl = ctrl.reset(ys);
            }
            (Op::Push(sym, c), OpChoice::PushVal(v)) => {
                for z in &tpda.stack_clocks {
                    if !v.contains(z) {
                        return Err(Error::input(format!("push valuation missing stack clock {z}")));
                    }
                }
                let joint = ctrl.union(v);
                if !eval(c, &joint)? {
                    return Ok(None);
                }
                stack.push((sym.clone(), v.clone()));
            }
            (Op::Push(..), _) => return Err(Error::input("push requires a stack valuation choice")),
            (Op::Pop(sym, c), OpChoice::None) => match stack.pop() {
                Some((top, v)) => {
                    if top != *sym {
                        return Ok(None);
                    }
                    let joint = ctrl.union(&v);
                    if !eval(c, &joint)? {
                        return Ok(None);
                    }
                }
                None => return Ok(None),
            },
            (op, ch) => {
                return Err(Error::input(format!("operation {op:?} does not accept choice {ch:?}")))
            }
        }
    }
    Ok(Some(Configuration { loc: t.to.clone(), ctrl, stack }))
}

/// Fold of `step`; `None` as soon as any step fails.
pub fn run(
    tpda: &Tpda,
    config: &Configuration,
    script: &[(TransId, Vec<OpChoice>)],
) -> Result<Option<Configuration>> {
    let mut cur = config.clone();
    for (id, choices) in script {
        match step(tpda, &cur, *id, choices)? {
            Some(next) => cur = next,
            None => return Ok(None),
        }
    }
    Ok(Some(cur))
}

/// The word read by a script (ε reads skipped).
pub fn word_of(tpda: &Tpda, script: &[(TransId, Vec<OpChoice>)]) -> Result<Vec<Letter>> {
    let mut out = Vec::new();
    for (id, _) in script {
        for op in &tpda.transition(*id)?.ops {
            if let Op::Read(Some(a)) = op {
                out.push(a.clone());
            }
        }
    }
    Ok(out)
}

/// Parikh image of a script.
pub fn parikh_of(script: &[(TransId, Vec<OpChoice>)]) -> ParikhVector {
    let mut v = ParikhVector::new();
    for (id, _) in script {
        *v.entry(*id).or_insert(0) += 1;
    }
    v
}

// ---------------------------------------------------------------------------
// File format.

fn strip_comment(line: &str) -> &str {
    match line.find('#') {
        Some(i) => &line[..i],
        None => line,
    }
}

fn perr(line: usize, msg: impl Into<String>) -> Error {
    Error::Parse { line, col: 1, msg: msg.into() }
}

/// Parse the line-oriented automaton format.
pub fn parse(text: &str) -> Result<Tpda> {
    let mut header_seen = false;
    let mut clocks: Vec<Clock> = Vec::new();
    let mut stack_clocks: Vec<Clock> = Vec::new();
    let mut alphabet: Vec<Letter> = Vec::new();
    let mut stack_alphabet: Vec<StackSym> = Vec::new();
    let mut locations: Vec<Loc> = Vec::new();
    let mut modulus: Option<u32> = None;
    let mut transitions: Vec<Transition> = Vec::new();

    for (lineno0, raw) in text.lines().enumerate() {
        let lineno = lineno0 + 1;
        let line = strip_comment(raw).trim();
        if line.is_empty() {
            continue;
        }
        if !header_seen {
            if line != "tpda" {
                return Err(perr(lineno, "file must start with the 'tpda' header line"));
            }
            header_seen = true;
            continue;
        }
        let (kw, rest) = match line.split_once(char::is_whitespace) {
            Some((k, r)) => (k, r.trim()),
            None => (line, ""),
        };
        match kw {
            "clocks" => clocks.extend(rest.split_whitespace().map(Clock::new)),
            "stackclocks" => stack_clocks.extend(rest.split_whitespace().map(Clock::new)),
            "alphabet" => alphabet.extend(rest.split_whitespace().map(|s| Letter(s.into()))),
            "stackalphabet" => stack_alphabet.extend(rest.split_whitespace().map(|s| StackSym(s.into()))),
            "locations" => locations.extend(rest.split_whitespace().map(Loc::new)),
            "modulus" => {
                let m: u32 =
                    rest.parse().map_err(|_| perr(lineno, format!("invalid modulus '{rest}'")))?;
                modulus = Some(m);
            }
            "trans" => transitions.push(parse_transition(rest, lineno)?),
            other => return Err(perr(lineno, format!("unknown directive '{other}'"))),
        }
    }
    if !header_seen {
        return Err(perr(1, "empty file; expected 'tpda' header"));
    }
    if clocks.is_empty() {
        return Err(perr(1, "a 'clocks' line naming the reference clock first is required"));
    }
    let reference = clocks[0].clone();
    let tpda = Tpda {
        input_alphabet: alphabet.into_iter().collect(),
        stack_alphabet: stack_alphabet.into_iter().collect(),
        locations: locations.into_iter().collect(),
        control_clocks: clocks.into_iter().collect(),
        reference,
        stack_clocks: stack_clocks.into_iter().collect(),
        modulus: modulus.unwrap_or(1),
        transitions,
    };
    tpda.validate()?;
    Ok(tpda)
}

fn parse_transition(rest: &str, lineno: usize) -> Result<Transition> {
    // p -> q : op ; op ; ...
    let (endpoints, ops_str) =
        rest.split_once(':').ok_or_else(|| perr(lineno, "transition needs 'p -> q : ops'"))?;
    let (from, to) = endpoints
        .split_once("->")
        .ok_or_else(|| perr(lineno, "transition endpoints need 'p -> q'"))?;
    let from = Loc::new(from.trim());
    let to = Loc::new(to.trim());
    if from.0.is_empty() || to.0.is_empty() {
        return Err(perr(lineno, "transition endpoints must be nonempty"));
    }
    let mut ops = Vec::new();
    for op_str in ops_str.split(';') {
        let op_str = op_str.trim();
        if op_str.is_empty() {
            continue;
        }
        ops.push(parse_op(op_str, lineno)?);
    }
    if ops.is_empty() {
        return Err(perr(lineno, "transition has no operations"));
    }
    Ok(Transition { from, to, ops })
}

fn parse_op(op_str: &str, lineno: usize) -> Result<Op> {
    let (kw, rest) = match op_str.split_once(char::is_whitespace) {
        Some((k, r)) => (k, r.trim()),
        None => (op_str, ""),
    };
    match kw {
        "elapse" => Ok(Op::Elapse),
        "read" => {
            if rest.is_empty() {
                return Err(perr(lineno, "read needs a letter or 'eps'"));
            }
            if rest == "eps" {
                Ok(Op::Read(None))
            } else {
                Ok(Op::Read(Some(Letter(rest.into()))))
            }
        }
        "test" => {
            let c = sexpr::parse_constraint(rest)
                .map_err(|e| perr(lineno, format!("test constraint: {e}")))?;
            Ok(Op::Test(c))
        }
        "reset" => {
            let inner = rest
                .strip_prefix('{')
                .and_then(|s| s.strip_suffix('}'))
                .ok_or_else(|| perr(lineno, "reset needs a clock set in braces"))?;
            Ok(Op::Reset(inner.split_whitespace().map(Clock::new).collect()))
        }
        "push" | "pop" => {
            let (sym, cstr) = rest
                .split_once(char::is_whitespace)
                .ok_or_else(|| perr(lineno, format!("{kw} needs a symbol and a constraint")))?;
            let c = sexpr::parse_constraint(cstr.trim())
                .map_err(|e| perr(lineno, format!("{kw} constraint: {e}")))?;
            if kw == "push" {
                Ok(Op::Push(StackSym(sym.into()), c))
            } else {
                Ok(Op::Pop(StackSym(sym.into()), c))
            }
        }
        other => Err(perr(lineno, format!("unknown operation '{other}'"))),
    }
}

/// Canonical textual form; `parse ∘ serialize` is the identity.
pub fn serialize(tpda: &Tpda) -> String {
    let mut out = String::from("tpda\n");
    let mut clocks: Vec<&Clock> = tpda.control_clocks.iter().collect();
    clocks.retain(|c| **c != tpda.reference);
    out.push_str("clocks ");
    out.push_str(&tpda.reference.0);
    for c in clocks {
        out.push(' ');
        out.push_str(&c.0);
    }
    out.push('\n');
    if !tpda.stack_clocks.is_empty() {
        out.push_str("stackclocks");
        for c in &tpda.stack_clocks {
            out.push(' ');
            out.push_str(&c.0);
        }
        out.push('\n');
    }
    if !tpda.input_alphabet.is_empty() {
        out.push_str("alphabet");
        for a in &tpda.input_alphabet {
            out.push(' ');
            out.push_str(&a.0);
        }
        out.push('\n');
    }
    if !tpda.stack_alphabet.is_empty() {
        out.push_str("stackalphabet");
        for a in &tpda.stack_alphabet {
            out.push(' ');
            out.push_str(&a.0);
        }
        out.push('\n');
    }
    out.push_str("locations");
    for l in &tpda.locations {
        out.push(' ');
        out.push_str(&l.0);
    }
    out.push('\n');
    out.push_str(&format!("modulus {}\n", tpda.modulus));
    for t in &tpda.transitions {
        out.push_str(&format!("trans {} -> {} : ", t.from, t.to));
        let ops: Vec<String> = t.ops.iter().map(op_to_string).collect();
        out.push_str(&ops.join(" ; "));
        out.push('\n');
    }
    out
}

fn op_to_string(op: &Op) -> String {
    match op {
        Op::Elapse => "elapse".into(),
        Op::Read(None) => "read eps".into(),
        Op::Read(Some(a)) => format!("read {a}"),
        Op::Test(c) => format!("test {}", sexpr::constraint_to_string(c)),
        Op::Reset(ys) => {
            let names: Vec<&str> = ys.iter().map(|c| c.0.as_str()).collect();
            format!("reset {{{}}}", names.join(" "))
        }
        Op::Push(sym, c) => format!("push {sym} {}", sexpr::constraint_to_string(c)),
        Op::Pop(sym, c) => format!("pop {sym} {}", sexpr::constraint_to_string(c)),
    }
}

/// Parse an initial/final valuation given as `x0=0,x=3/2`.
pub fn parse_valuation(spec: &str) -> Result<ClockValuation> {
    let mut v = ClockValuation::new();
    for part in spec.split(',') {
        let part = part.trim();
        if part.is_empty() {
            continue;
        }
        let (name, value) = part
            .split_once('=')
            .ok_or_else(|| Error::input(format!("valuation entry '{part}' needs clock=value")))?;
        let q = parse_rational(value.trim())?;
        v.set(Clock::new(name.trim()), q)?;
    }
    Ok(v)
}

pub fn parse_rational(s: &str) -> Result<Q> {
    let q = match s.split_once('/') {
        Some((n, d)) => {
            let n: i64 =
                n.trim().parse().map_err(|_| Error::input(format!("bad numerator in '{s}'")))?;
            let d: i64 =
                d.trim().parse().map_err(|_| Error::input(format!("bad denominator in '{s}'")))?;
            if d == 0 {
                return Err(Error::input("zero denominator"));
            }
            rat::qr(n, d)
        }
        None => {
            let n: i64 = s.trim().parse().map_err(|_| Error::input(format!("bad rational '{s}'")))?;
            rat::qi(n)
        }
    };
    Ok(q)
}

#[cfg(test)]
pub mod fixtures {
    use super::*;

    /// The even-length palindrome automaton with the reference clock doubling
    /// as the timestamp clock.
    pub fn palindromes() -> Tpda {
        parse(
            "tpda\n\
             clocks x0\n\
             stackclocks z\n\
             alphabet a b\n\
             stackalphabet A B\n\
             locations q1 q2\n\
             modulus 2\n\
             trans q1 -> q1 : elapse\n\
             trans q1 -> q1 : read a ; push A (eq z 0)\n\
             trans q1 -> q1 : read b ; push B (eq z 1)\n\
             trans q1 -> q2 : read eps\n\
             trans q2 -> q2 : elapse\n\
             trans q2 -> q2 : read a ; pop A (and (eqm 2 (int z) 0) (le (frac z) (frac x0)))\n\
             trans q2 -> q2 : read b ; pop B (and (eqm 2 (int z) 0) (le (frac z) (frac x0)))\n",
        )
        .unwrap()
    }

    /// Variant with a separate timestamp clock reset on entry.
    pub fn palindromes_with_reset() -> Tpda {
        parse(
            "tpda\n\
             clocks x0 x\n\
             stackclocks z\n\
             alphabet a b\n\
             stackalphabet A B\n\
             locations q0 q1 q2\n\
             modulus 2\n\
             trans q0 -> q1 : reset {x}\n\
             trans q1 -> q1 : elapse\n\
             trans q1 -> q1 : read a ; push A (eq z 0)\n\
             trans q1 -> q1 : read b ; push B (eq z 1)\n\
             trans q1 -> q2 : read eps\n\
             trans q2 -> q2 : elapse\n\
             trans q2 -> q2 : read a ; pop A (and (eqm 2 (int z) 0) (le (frac z) (frac x)))\n\
             trans q2 -> q2 : read b ; pop B (and (eqm 2 (int z) 0) (le (frac z) (frac x)))\n",
        )
        .unwrap()
    }
}

#[cfg(test)]
mod tests {
    use super::fixtures::{palindromes, palindromes_with_reset};
    use super::*;
    use crate::rat::{qi, qr};

    #[test]
    fn parse_structure() {
        let p = palindromes_with_reset();
        assert_eq!(p.locations.len(), 3);
        assert_eq!(p.control_clocks.len(), 2);
        assert_eq!(p.stack_clocks.len(), 1);
        assert_eq!(p.transitions.len(), 8);
        assert_eq!(p.reference, Clock::new("x0"));
    }

    #[test]
    fn serialize_round_trips() {
        let p = palindromes_with_reset();
        let text = serialize(&p);
        let q = parse(&text).unwrap();
        assert_eq!(p, q);
        assert_eq!(serialize(&q), text);
    }

    #[test]
    fn empty_transition_set_is_valid() {
        let p = parse("tpda\nclocks x0\nlocations p\nmodulus 1\n").unwrap();
        assert!(p.transitions.is_empty());
    }

    #[test]
    fn resetting_reference_is_rejected() {
        let r = parse("tpda\nclocks x0\nlocations p\nmodulus 1\ntrans p -> p : reset {x0}\n");
        match r {
            Err(Error::Input(msg)) => assert!(msg.contains("never reset"), "{msg}"),
            other => panic!("expected rejection, got {other:?}"),
        }
    }

    #[test]
    fn stack_constraint_needs_stack_clock() {
        let r = parse(
            "tpda\nclocks x0\nstackclocks z\nstackalphabet A\nlocations p\nmodulus 2\n\
             trans p -> p : push A (le (int x0) 1)\n",
        );
        assert!(r.is_err());
    }

    #[test]
    fn push_step_records_valuation() {
        let p = palindromes();
        let init = Configuration::new(
            Loc::new("q1"),
            ClockValuation::from_pairs([(Clock::new("x0"), qi(1))]).unwrap(),
        );
        let zval = ClockValuation::from_pairs([(Clock::new("z"), qi(0))]).unwrap();
        let next = step(&p, &init, 1, &[OpChoice::None, OpChoice::PushVal(zval.clone())])
            .unwrap()
            .unwrap();
        assert_eq!(next.stack, vec![(StackSym("A".into()), zval)]);
        assert_eq!(next.loc, Loc::new("q1"));
    }

    #[test]
    fn zero_elapse_is_identity() {
        let p = palindromes();
        let init = Configuration::new(
            Loc::new("q1"),
            ClockValuation::from_pairs([(Clock::new("x0"), qi(0))]).unwrap(),
        );
        let next = step(&p, &init, 0, &[OpChoice::Elapse(qi(0))]).unwrap().unwrap();
        assert_eq!(next.ctrl, init.ctrl);
        assert_eq!(next.stack, init.stack);
    }

    #[test]
    fn pop_with_wrong_symbol_fails() {
        let p = palindromes();
        let mut cfg = Configuration::new(
            Loc::new("q2"),
            ClockValuation::from_pairs([(Clock::new("x0"), qi(0))]).unwrap(),
        );
        cfg.stack.push((
            StackSym("B".into()),
            ClockValuation::from_pairs([(Clock::new("z"), qi(0))]).unwrap(),
        ));
        // transition 5 pops A
        let r = step(&p, &cfg, 5, &[OpChoice::None, OpChoice::None]).unwrap();
        assert!(r.is_none());
    }

    #[test]
    fn accepting_run_of_the_palindrome_automaton() {
        let p = palindromes();
        let x0 = Clock::new("x0");
        let z = Clock::new("z");
        let init =
            Configuration::new(Loc::new("q1"), ClockValuation::from_pairs([(x0.clone(), qi(0))]).unwrap());
        // read a (push z=0), elapse 2.25, read a
        // (pop: ⌊z⌋ = 2 ≡₂ 0, {z} = 1/4 ≤ {x0} = 1/4)
        let script = vec![
            (
                1usize,
                vec![
                    OpChoice::None,
                    OpChoice::PushVal(ClockValuation::from_pairs([(z.clone(), qi(0))]).unwrap()),
                ],
            ),
            (3usize, vec![OpChoice::None]),
            (4usize, vec![OpChoice::Elapse(qr(9, 4))]),
            (5usize, vec![OpChoice::None, OpChoice::None]),
        ];
        let out = run(&p, &init, &script).unwrap().expect("run should succeed");
        assert_eq!(out.loc, Loc::new("q2"));
        assert!(out.stack.is_empty());
        assert_eq!(word_of(&p, &script).unwrap(), vec![Letter("a".into()), Letter("a".into())]);
        let pk = parikh_of(&script);
        assert_eq!(pk.get(&1), Some(&1));
        assert_eq!(pk.get(&5), Some(&1));
    }

    #[test]
    fn guard_violation_stops_run() {
        let p = palindromes();
        let x0 = Clock::new("x0");
        let z = Clock::new("z");
        let init = Configuration::new(Loc::new("q1"), ClockValuation::from_pairs([(x0, qi(0))]).unwrap());
        // elapse 1.5 between push and pop: ⌊z⌋ = 1 violates ≡₂ 0
        let script = vec![
            (
                1usize,
                vec![
                    OpChoice::None,
                    OpChoice::PushVal(ClockValuation::from_pairs([(z, qi(0))]).unwrap()),
                ],
            ),
            (3usize, vec![OpChoice::None]),
            (4usize, vec![OpChoice::Elapse(qr(3, 2))]),
            (5usize, vec![OpChoice::None, OpChoice::None]),
        ];
        assert!(run(&p, &init, &script).unwrap().is_none());
    }

    #[test]
    fn empty_script_returns_input() {
        let p = palindromes();
        let init = Configuration::new(
            Loc::new("q1"),
            ClockValuation::from_pairs([(Clock::new("x0"), qi(0))]).unwrap(),
        );
        assert_eq!(run(&p, &init, &[]).unwrap().unwrap(), init);
    }
}
