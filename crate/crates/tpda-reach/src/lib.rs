//! Timed pushdown automata compiled into existential linear arithmetic.
//!
//! The crate turns a TPDA into a formula family describing its ternary
//! reachability relation (initial clocks, transition counts, final clocks).
//! The translation runs through a chain of automaton simplifications, a
//! context-free grammar labelled with clock difference relations, and a
//! Parikh-image encoding. Every stage is backed by brute-force oracles so
//! that the whole chain can be validated on small instances.

pub mod cdr;
pub mod cli;
pub mod constraints;
pub mod grammar;
pub mod lalogic;
pub mod oracle;
pub mod pipeline;
pub mod qelim;
pub mod rat;
pub mod sexpr;
pub mod tpda;

use thiserror::Error;

/// Crate-wide error type.
#[derive(Debug, Error)]
pub enum Error {
    #[error("input error: {0}")]
    Input(String),
    #[error("parse error at line {line}, column {col}: {msg}")]
    Parse { line: usize, col: usize, msg: String },
    #[error("internal error: {0}")]
    Internal(String),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

pub type Result<T> = std::result::Result<T, Error>;

impl Error {
    pub fn input(msg: impl Into<String>) -> Self {
        Error::Input(msg.into())
    }
}
