//! Reconstruction recipes: per-stage data that lets the formula layer map a
//! reachability formula family of the transformed automaton back onto the
//! original automaton's locations, clocks, and transition counters.

use std::collections::BTreeMap;

use crate::constraints::Clock;
use crate::tpda::{Letter, TransId};

/// Abstracted integral value of one clock inside the finite control.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum LambdaVal {
    /// Exact floor, below the cap.
    Exact(u32),
    /// Floor at or above the cap; only the residue mod M is known.
    CapResidue(u32),
    /// Only the residue mod M is tracked for this clock.
    ResidueOnly(u32),
}

/// Abstracted `⌊x - y⌋` for a tracked clock pair.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, serde::Serialize, serde::Deserialize)]
pub enum DiffVal {
    Exact(i64),
    /// `⌊x - y⌋ ≥ cap`, residue mod M.
    LargePos(u32),
    /// `⌊x - y⌋ ≤ -cap`, residue mod M.
    LargeNeg(u32),
}

/// Start or end point of the fractionalized product automaton.
#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub struct FracEndpoint {
    pub product: String,
    pub original: String,
    /// Tracked integral abstractions at this endpoint.
    pub lambda: BTreeMap<Clock, LambdaVal>,
    pub pairs: BTreeMap<(Clock, Clock), DiffVal>,
    /// For starts: the set of clocks declared never-reset from the beginning
    /// (always containing the reference). For ends: the full no-more-resets
    /// set reached.
    pub tset: Vec<Clock>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum PopAtomKind {
    /// `y - x ≤ k` or `< k`: checked at the outermost activation.
    UpperBound,
    /// `y - x ≥ k` or `> k`: checked at an innermost nested pair.
    LowerBound,
}

#[derive(Debug, Clone, PartialEq, Eq, serde::Serialize, serde::Deserialize)]
pub enum StageRecipe {
    /// Transitions were split or rewritten in place: counters of new
    /// transitions sum into their originating transition; locations and
    /// clocks are unchanged except for fresh control clocks whose initial
    /// and final values are projected away.
    RelabelSum {
        stage: String,
        relabel: BTreeMap<TransId, TransId>,
        new_clocks: Vec<Clock>,
    },
    /// One integral-pop elimination pass: the product over activation flags
    /// with two copies of the tracked clock.
    IntegralPopPass {
        kind: PopAtomKind,
        tracked: Clock,
        copy0: Clock,
        copy1: Clock,
        relabel: BTreeMap<TransId, TransId>,
        /// original location -> start product location
        start: BTreeMap<String, String>,
        /// per final flag e ∈ {0, 1}: original location -> end location
        ends: [BTreeMap<String, String>; 2],
    },
    /// Clock memorization: a preprocessing phase pins the initial valuation
    /// into never-reset copies.
    Memorize {
        relabel: BTreeMap<TransId, Option<TransId>>,
        /// original clock -> its never-reset copy
        mems: BTreeMap<Clock, Clock>,
        /// copy reset exactly once at the end of preprocessing; exports the
        /// preprocessing duration
        mem_zero: Clock,
        /// original location -> preprocessing entry location
        pre_entry: BTreeMap<String, String>,
    },
    /// Multi-operation transitions were split into single-operation chains.
    SplitOps { relabel: BTreeMap<TransId, Option<TransId>> },
    /// Integral clock values moved into the finite control; floors are
    /// reconstructed from tick counts.
    Fractionalize {
        relabel: BTreeMap<TransId, Option<TransId>>,
        ticks: BTreeMap<Clock, Letter>,
        /// tick-read multiplicities per new transition
        tick_mult: BTreeMap<TransId, BTreeMap<Clock, u64>>,
        starts: Vec<FracEndpoint>,
        ends: Vec<FracEndpoint>,
        /// control clocks of the stage input
        clocks: Vec<Clock>,
        reference: Clock,
        wrap_guard: Clock,
        modulus: u32,
        cap: u32,
        diff_cap: i64,
    },
}

impl StageRecipe {
    pub fn stage_name(&self) -> &str {
        match self {
            StageRecipe::RelabelSum { stage, .. } => stage,
            StageRecipe::IntegralPopPass { .. } => "integral-pops",
            StageRecipe::Memorize { .. } => "memorize",
            StageRecipe::SplitOps { .. } => "split",
            StageRecipe::Fractionalize { .. } => "fractionalize",
        }
    }
}
