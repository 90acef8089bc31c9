//! Brute-force ground truth: bounded enumeration of automaton runs over a
//! rational time grid, producing reachability triples and fractional
//! reachability relations for property tests. The exploration is an
//! under-approximation by construction (grid-valued elapses and push
//! guesses, bounded run length, capped clock values); enlarging the grid or
//! the bounds never shrinks the result.

use std::collections::{BTreeMap, BTreeSet, HashMap};

use crate::constraints::{Clock, ClockValuation};
use crate::rat;
use crate::tpda::{Loc, Op, OpChoice, ParikhVector, Tpda, TransId};
use crate::{Error, Result};

#[derive(Debug, Clone)]
pub struct OracleConfig {
    /// Time values are restricted to multiples of `1/grid_denominator`.
    pub grid_denominator: u32,
    /// Maximum number of transitions per run.
    pub max_steps: usize,
    /// Maximum elapse per elapse operation, in grid units.
    pub max_elapse_units: u32,
    /// Cap on clock magnitudes; branches exceeding it are pruned.
    pub value_cap: u32,
    /// Worker threads for frontier expansion.
    pub threads: usize,
}

impl OracleConfig {
    pub fn new(grid_denominator: u32, max_steps: usize) -> Self {
        OracleConfig {
            grid_denominator: grid_denominator.max(1),
            max_steps,
            max_elapse_units: 4 * grid_denominator.max(1),
            value_cap: 8,
            threads: 1,
        }
    }

    pub fn with_cap(mut self, cap: u32) -> Self {
        self.value_cap = cap;
        self
    }

    pub fn with_max_elapse_units(mut self, units: u32) -> Self {
        self.max_elapse_units = units;
        self
    }
}

pub type Script = Vec<(TransId, Vec<OpChoice>)>;

/// Everything the bounded exploration discovered from one initial
/// configuration.
#[derive(Debug, Default)]
pub struct OracleResult {
    /// Reachable (Parikh image, final control valuation) pairs at the target
    /// location with empty stack.
    pub triples: BTreeSet<(ParikhVector, ClockValuation)>,
    /// One witnessing script per triple.
    pub scripts: BTreeMap<(ParikhVector, ClockValuation), Script>,
}

#[derive(Clone, PartialEq, Eq, Hash)]
struct StateKey {
    loc: Loc,
    ctrl: ClockValuation,
    stack: Vec<(crate::tpda::StackSym, ClockValuation)>,
    parikh: ParikhVector,
}

#[derive(Clone)]
struct State {
    key: StateKey,
    script: Script,
}

fn on_grid(v: &ClockValuation, d: u32) -> bool {
    v.iter().all(|(_, q)| {
        let scaled = q * rat::qi(d as i64);
        rat::is_integer(&scaled)
    })
}

fn within_cap(v: &ClockValuation, cap: u32) -> bool {
    v.iter().all(|(_, q)| *q <= rat::qi(cap as i64))
}

/// Recursively apply an op sequence, branching on elapse amounts and push
/// valuations.
fn apply_ops(
    tpda: &Tpda,
    cfg: &OracleConfig,
    ctrl: &ClockValuation,
    stack: &[(crate::tpda::StackSym, ClockValuation)],
    ops: &[Op],
    chosen: &mut Vec<OpChoice>,
    out: &mut Vec<(ClockValuation, Vec<(crate::tpda::StackSym, ClockValuation)>, Vec<OpChoice>)>,
) {
    let Some((op, rest)) = ops.split_first() else {
        out.push((ctrl.clone(), stack.to_vec(), chosen.clone()));
        return;
    };
    match op {
        Op::Elapse => {
            for k in 0..=cfg.max_elapse_units {
                let dt = rat::qr(k as i64, cfg.grid_denominator as i64);
                let ctrl2 = ctrl.advance(&dt);
                if !within_cap(&ctrl2, cfg.value_cap) {
                    break;
                }
                let stack2: Vec<_> = stack.iter().map(|(s, v)| (s.clone(), v.advance(&dt))).collect();
                if !stack2.iter().all(|(_, v)| within_cap(v, cfg.value_cap)) {
                    break;
                }
                chosen.push(OpChoice::Elapse(dt));
                apply_ops(tpda, cfg, &ctrl2, &stack2, rest, chosen, out);
                chosen.pop();
            }
        }
        Op::Read(_) => {
            chosen.push(OpChoice::None);
            apply_ops(tpda, cfg, ctrl, stack, rest, chosen, out);
            chosen.pop();
        }
        Op::Test(c) => {
            if crate::constraints::eval(c, ctrl).unwrap_or(false) {
                chosen.push(OpChoice::None);
                apply_ops(tpda, cfg, ctrl, stack, rest, chosen, out);
                chosen.pop();
            }
        }
        Op::Reset(ys) => {
            let ctrl2 = ctrl.reset(ys);
            chosen.push(OpChoice::None);
            apply_ops(tpda, cfg, &ctrl2, stack, rest, chosen, out);
            chosen.pop();
        }
        Op::Push(sym, c) => {
            let zs: Vec<Clock> = tpda.stack_clocks.iter().cloned().collect();
            let max_units = cfg.value_cap as i64 * cfg.grid_denominator as i64;
            let mut vals: Vec<ClockValuation> = vec![ClockValuation::new()];
            for z in &zs {
                let mut next = Vec::new();
                for base in &vals {
                    for k in 0..=max_units {
                        let mut v = base.clone();
                        v.set(z.clone(), rat::qr(k, cfg.grid_denominator as i64)).unwrap();
                        next.push(v);
                    }
                }
                vals = next;
            }
            for v in vals {
                let joint = ctrl.union(&v);
                if crate::constraints::eval(c, &joint).unwrap_or(false) {
                    let mut stack2 = stack.to_vec();
                    stack2.push((sym.clone(), v.clone()));
                    chosen.push(OpChoice::PushVal(v));
                    apply_ops(tpda, cfg, ctrl, &stack2, rest, chosen, out);
                    chosen.pop();
                }
            }
        }
        Op::Pop(sym, c) => {
            if let Some(((top, v), lower)) = stack.split_last() {
                if top == sym {
                    let joint = ctrl.union(v);
                    if crate::constraints::eval(c, &joint).unwrap_or(false) {
                        chosen.push(OpChoice::None);
                        apply_ops(tpda, cfg, ctrl, lower, rest, chosen, out);
                        chosen.pop();
                    }
                }
            }
        }
    }
}

fn expand(tpda: &Tpda, cfg: &OracleConfig, state: &State) -> Vec<State> {
    let mut out = Vec::new();
    for (id, t) in tpda.transitions.iter().enumerate() {
        if t.from != state.key.loc {
            continue;
        }
        let mut branches = Vec::new();
        apply_ops(tpda, cfg, &state.key.ctrl, &state.key.stack, &t.ops, &mut Vec::new(), &mut branches);
        for (ctrl, stack, choices) in branches {
            let mut parikh = state.key.parikh.clone();
            *parikh.entry(id).or_insert(0) += 1;
            let mut script = state.script.clone();
            script.push((id, choices));
            out.push(State {
                key: StateKey { loc: t.to.clone(), ctrl, stack, parikh },
                script,
            });
        }
    }
    out
}

/// All `(Π(w), ν)` with `init ⇝ ν` between `from` and `to`, with empty stack
/// at both ends, realizable with grid-valued elapses and push guesses within
/// the configured bounds.
pub fn oracle_reach(
    tpda: &Tpda,
    from: &Loc,
    to: &Loc,
    cfg: &OracleConfig,
    init: &ClockValuation,
) -> Result<OracleResult> {
    if !tpda.has_location(from) || !tpda.has_location(to) {
        return Err(Error::input("oracle endpoints must be automaton locations"));
    }
    for c in &tpda.control_clocks {
        if !init.contains(c) {
            return Err(Error::input(format!("initial valuation missing control clock {c}")));
        }
    }
    if !on_grid(init, cfg.grid_denominator) {
        return Err(Error::input("initial valuation is not on the grid"));
    }
    if cfg.value_cap < tpda.modulus {
        return Err(Error::input("value cap must be at least the automaton modulus"));
    }

    let mut result = OracleResult::default();
    let mut seen: HashMap<StateKey, usize> = HashMap::new();
    let start = State {
        key: StateKey { loc: from.clone(), ctrl: init.clone(), stack: Vec::new(), parikh: ParikhVector::new() },
        script: Vec::new(),
    };
    let mut frontier = vec![start.clone()];
    seen.insert(start.key.clone(), 0);
    let record = |state: &State, result: &mut OracleResult| {
        if state.key.loc == *to && state.key.stack.is_empty() {
            let triple = (state.key.parikh.clone(), state.key.ctrl.clone());
            if result.triples.insert(triple.clone()) {
                result.scripts.insert(triple, state.script.clone());
            }
        }
    };
    record(&start, &mut result);
    for step in 0..cfg.max_steps {
        if frontier.is_empty() {
            break;
        }
        let expanded: Vec<State> = if cfg.threads > 1 && frontier.len() > 1 {
            let chunk = frontier.len().div_ceil(cfg.threads);
            std::thread::scope(|scope| {
                let handles: Vec<_> = frontier
                    .chunks(chunk)
                    .map(|part| scope.spawn(|| part.iter().flat_map(|s| expand(tpda, cfg, s)).collect::<Vec<_>>()))
                    .collect();
                handles.into_iter().flat_map(|h| h.join().expect("worker panicked")).collect()
            })
        } else {
            frontier.iter().flat_map(|s| expand(tpda, cfg, s)).collect()
        };
        let mut next = Vec::new();
        for state in expanded {
            if seen.contains_key(&state.key) {
                continue;
            }
            seen.insert(state.key.clone(), step + 1);
            record(&state, &mut result);
            next.push(state);
        }
        frontier = next;
    }
    Ok(result)
}

/// The fractional reachability relation of a fractional automaton on the
/// grid: all pairs of fractional valuations `({μ}, {ν})` connected by a run
/// between the two locations with empty stacks.
pub fn oracle_fractional(
    tpda: &Tpda,
    from: &Loc,
    to: &Loc,
    cfg: &OracleConfig,
) -> Result<BTreeSet<(ClockValuation, ClockValuation)>> {
    for t in &tpda.transitions {
        for op in &t.ops {
            let fractional = match op {
                Op::Test(c) | Op::Push(_, c) | Op::Pop(_, c) => c.is_fractional(),
                _ => true,
            };
            if !fractional {
                return Err(Error::input("fractional oracle requires a fractional automaton"));
            }
        }
    }
    let clocks: Vec<Clock> = tpda.control_clocks.iter().cloned().collect();
    let d = cfg.grid_denominator as i64;
    let mut inits = vec![ClockValuation::new()];
    for c in &clocks {
        let mut next = Vec::new();
        for base in &inits {
            for k in 0..d {
                let mut v = base.clone();
                v.set(c.clone(), rat::qr(k, d)).unwrap();
                next.push(v);
            }
        }
        inits = next;
    }
    let mut pairs = BTreeSet::new();
    for init in inits {
        let res = oracle_reach(tpda, from, to, cfg, &init)?;
        for (_, nu) in res.triples {
            pairs.insert((init.fract_view(), nu.fract_view()));
        }
    }
    Ok(pairs)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::rat::qi;
    use crate::tpda::fixtures::palindromes;
    use crate::tpda::{parse, run};

    fn x0_init() -> ClockValuation {
        ClockValuation::from_pairs([(Clock::new("x0"), qi(0))]).unwrap()
    }

    #[test]
    fn zero_steps_only_reflexive() {
        let p = palindromes();
        let cfg = OracleConfig { max_steps: 0, ..OracleConfig::new(2, 0) };
        let r = oracle_reach(&p, &Loc::new("q1"), &Loc::new("q1"), &cfg, &x0_init()).unwrap();
        assert_eq!(r.triples.len(), 1);
        let r2 = oracle_reach(&p, &Loc::new("q1"), &Loc::new("q2"), &cfg, &x0_init()).unwrap();
        assert!(r2.triples.is_empty());
    }

    #[test]
    fn finds_a_two_letter_palindrome() {
        let p = palindromes();
        let cfg = OracleConfig::new(2, 5).with_cap(4);
        let r = oracle_reach(&p, &Loc::new("q1"), &Loc::new("q2"), &cfg, &x0_init()).unwrap();
        // some accepting run reads `aa` with an even integral gap
        let found = r.triples.iter().any(|(pk, _)| pk.get(&1) == Some(&1) && pk.get(&5) == Some(&1));
        assert!(found, "expected an `aa` palindrome witness, got {:?}", r.triples);
    }

    #[test]
    fn every_triple_replays() {
        let p = palindromes();
        let cfg = OracleConfig::new(2, 6).with_cap(4);
        let from = Loc::new("q1");
        let to = Loc::new("q2");
        let r = oracle_reach(&p, &from, &to, &cfg, &x0_init()).unwrap();
        assert!(!r.triples.is_empty());
        for (triple, script) in &r.scripts {
            let cfg0 = crate::tpda::Configuration::new(from.clone(), x0_init());
            let end = run(&p, &cfg0, script).unwrap().expect("script must replay");
            assert_eq!(end.loc, to);
            assert!(end.stack.is_empty());
            assert_eq!(end.ctrl, triple.1);
            assert_eq!(crate::tpda::parikh_of(script), triple.0);
        }
    }

    #[test]
    fn monotone_in_steps_and_grid() {
        let p = palindromes();
        let small = OracleConfig::new(2, 4).with_cap(4);
        let more_steps = OracleConfig::new(2, 6).with_cap(4);
        let finer = OracleConfig::new(4, 4).with_cap(4).with_max_elapse_units(16);
        let from = Loc::new("q1");
        let to = Loc::new("q2");
        let a = oracle_reach(&p, &from, &to, &small, &x0_init()).unwrap().triples;
        let b = oracle_reach(&p, &from, &to, &more_steps, &x0_init()).unwrap().triples;
        let c = oracle_reach(&p, &from, &to, &finer, &x0_init()).unwrap().triples;
        assert!(a.is_subset(&b));
        assert!(a.is_subset(&c));
    }

    #[test]
    fn unsatisfiable_guard_blocks_everything() {
        let p = parse(
            "tpda\nclocks x0\nlocations p q\nmodulus 2\n\
             trans p -> q : test (and (eq (frac x0) 0) (gt (frac x0) 0))\n",
        )
        .unwrap();
        let cfg = OracleConfig::new(2, 4);
        let r = oracle_reach(&p, &Loc::new("p"), &Loc::new("q"), &cfg, &x0_init()).unwrap();
        assert!(r.triples.is_empty());
    }

    #[test]
    fn fractional_oracle_elapse_preserves_differences() {
        let p = parse(
            "tpda\nclocks x0 x\nlocations p q\nmodulus 1\ntrans p -> q : elapse\n",
        )
        .unwrap();
        let cfg = OracleConfig::new(3, 2).with_cap(4);
        let pairs = oracle_fractional(&p, &Loc::new("p"), &Loc::new("q"), &cfg).unwrap();
        assert!(!pairs.is_empty());
        let x0 = Clock::new("x0");
        let x = Clock::new("x");
        for (mu, nu) in &pairs {
            // {x0' - x'} = {x0 - x}
            let d1 = rat::fract(&(mu.get(&x0).unwrap() - mu.get(&x).unwrap()));
            let d2 = rat::fract(&(nu.get(&x0).unwrap() - nu.get(&x).unwrap()));
            assert_eq!(d1, d2);
        }
    }

    #[test]
    fn fractional_oracle_identity_on_no_transitions() {
        let p = parse("tpda\nclocks x0\nlocations p\nmodulus 1\n").unwrap();
        let cfg = OracleConfig::new(2, 3);
        let pairs = oracle_fractional(&p, &Loc::new("p"), &Loc::new("p"), &cfg).unwrap();
        for (mu, nu) in &pairs {
            assert_eq!(mu, nu);
        }
        assert_eq!(pairs.len(), 2); // {x0} ∈ {0, 1/2}
    }

    #[test]
    fn fractional_reachability_is_transitive_on_fixture() {
        // two elapse transitions chained through an intermediate location
        let p = parse(
            "tpda\nclocks x0 x\nlocations p r q\nmodulus 1\n\
             trans p -> r : elapse\ntrans r -> q : reset {x}\n",
        )
        .unwrap();
        let cfg = OracleConfig::new(2, 2).with_cap(4);
        let pr = oracle_fractional(&p, &Loc::new("p"), &Loc::new("r"), &cfg).unwrap();
        let rq = oracle_fractional(&p, &Loc::new("r"), &Loc::new("q"), &cfg).unwrap();
        let pq = oracle_fractional(&p, &Loc::new("p"), &Loc::new("q"), &cfg).unwrap();
        for (a, m1) in &pr {
            for (m2, b) in &rq {
                if m1 == m2 {
                    assert!(
                        pq.contains(&(a.clone(), b.clone())),
                        "composition of grid pairs must be reachable: {a} -> {m1} -> {b}"
                    );
                }
            }
        }
    }

    #[test]
    fn rejects_non_fractional_automaton() {
        let p = parse(
            "tpda\nclocks x0\nlocations p\nmodulus 2\ntrans p -> p : test (le (int x0) 1)\n",
        )
        .unwrap();
        let cfg = OracleConfig::new(2, 2);
        assert!(oracle_fractional(&p, &Loc::new("p"), &Loc::new("p"), &cfg).is_err());
    }
}
