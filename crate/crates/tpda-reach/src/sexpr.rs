//! S-expression concrete syntax for clock constraints and clock difference
//! relations, shared by the automaton file format and the debug CLI.
//!
//! Constraint grammar:
//! ```text
//! c    ::= true | false | (and c ...) | (or c ...) | (not c)
//!        | (REL lhs rhs) | (eqm M lhs K) | (neqm M lhs K)
//! REL  ::= lt | le | eq | ge | gt
//! lhs  ::= x | (sub x y) | (int x) | (sub (int x) (int y)) | (frac x)
//! rhs  ::= K | (frac y)            -- (frac y) only when lhs is (frac x)
//! ```
//! `x`, `y` are clock names, `K` an integer, `M ≥ 1` a modulus.

use std::fmt::Write as _;

use crate::constraints::{Atom, Clock, ClockConstraint, Rel};
use crate::{Error, Result};

/// Parsed s-expression tree.
#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Sexpr {
    Sym(String, usize, usize),
    Int(i64, usize, usize),
    List(Vec<Sexpr>, usize, usize),
}

impl Sexpr {
    pub fn pos(&self) -> (usize, usize) {
        match self {
            Sexpr::Sym(_, l, c) | Sexpr::Int(_, l, c) | Sexpr::List(_, l, c) => (*l, *c),
        }
    }
}

struct Lexer<'a> {
    input: &'a str,
    chars: Vec<char>,
    pos: usize,
    line: usize,
    col: usize,
    base_line: usize,
}

impl<'a> Lexer<'a> {
    fn new(input: &'a str, base_line: usize) -> Self {
        Lexer { input, chars: input.chars().collect(), pos: 0, line: base_line, col: 1, base_line }
    }

    fn err(&self, msg: impl Into<String>) -> Error {
        Error::Parse { line: self.line, col: self.col, msg: msg.into() }
    }

    fn peek(&self) -> Option<char> {
        self.chars.get(self.pos).copied()
    }

    fn bump(&mut self) -> Option<char> {
        let c = self.peek()?;
        self.pos += 1;
        if c == '\n' {
            self.line += 1;
            self.col = 1;
        } else {
            self.col += 1;
        }
        Some(c)
    }

    fn skip_ws(&mut self) {
        while let Some(c) = self.peek() {
            if c.is_whitespace() {
                self.bump();
            } else if c == '#' {
                while let Some(c) = self.peek() {
                    if c == '\n' {
                        break;
                    }
                    self.bump();
                }
            } else {
                break;
            }
        }
    }

    fn parse_expr(&mut self) -> Result<Sexpr> {
        self.skip_ws();
        let (line, col) = (self.line, self.col);
        match self.peek() {
            None => Err(self.err("unexpected end of input")),
            Some('(') => {
                self.bump();
                let mut items = Vec::new();
                loop {
                    self.skip_ws();
                    match self.peek() {
                        Some(')') => {
                            self.bump();
                            return Ok(Sexpr::List(items, line, col));
                        }
                        Some(_) => items.push(self.parse_expr()?),
                        None => return Err(self.err("unclosed parenthesis")),
                    }
                }
            }
            Some(')') => Err(self.err("unexpected ')'")),
            Some(_) => {
                let mut tok = String::new();
                while let Some(c) = self.peek() {
                    if c.is_whitespace() || c == '(' || c == ')' || c == '#' {
                        break;
                    }
                    tok.push(c);
                    self.bump();
                }
                if tok.chars().next().map(|c| c == '-' && tok.len() > 1 || c.is_ascii_digit()).unwrap_or(false)
                    && tok.chars().skip(usize::from(tok.starts_with('-'))).all(|c| c.is_ascii_digit())
                {
                    let n = tok
                        .parse::<i64>()
                        .map_err(|_| Error::Parse { line, col, msg: format!("integer out of range: {tok}") })?;
                    Ok(Sexpr::Int(n, line, col))
                } else {
                    Ok(Sexpr::Sym(tok, line, col))
                }
            }
        }
    }

    fn at_end(&mut self) -> bool {
        self.skip_ws();
        self.pos >= self.chars.len()
    }

    fn remainder_offset(&self) -> usize {
        // byte offset of the current char position
        self.input
            .char_indices()
            .nth(self.pos)
            .map(|(i, _)| i)
            .unwrap_or(self.input.len())
    }

    fn reset_to_start(&mut self) {
        self.pos = 0;
        self.line = self.base_line;
        self.col = 1;
    }
}

/// Parse a single s-expression, requiring the whole input to be consumed.
pub fn parse_sexpr(input: &str) -> Result<Sexpr> {
    let mut lx = Lexer::new(input, 1);
    let e = lx.parse_expr()?;
    if !lx.at_end() {
        return Err(lx.err("trailing input after s-expression"));
    }
    Ok(e)
}

/// Parse one s-expression from the front of `input`, returning the byte
/// offset of the remainder. `base_line` seeds error positions.
pub fn parse_sexpr_prefix(input: &str, base_line: usize) -> Result<(Sexpr, usize)> {
    let mut lx = Lexer::new(input, base_line);
    lx.reset_to_start();
    let e = lx.parse_expr()?;
    Ok((e, lx.remainder_offset()))
}

fn expect_clock(e: &Sexpr) -> Result<Clock> {
    match e {
        Sexpr::Sym(s, _, _) => Ok(Clock::new(s.clone())),
        _ => {
            let (line, col) = e.pos();
            Err(Error::Parse { line, col, msg: "expected a clock name".into() })
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
enum Lhs {
    Classical(Clock, Option<Clock>),
    Integral(Clock, Option<Clock>),
    Frac(Clock),
}

fn parse_lhs(e: &Sexpr) -> Result<Lhs> {
    match e {
        Sexpr::Sym(s, _, _) => Ok(Lhs::Classical(Clock::new(s.clone()), None)),
        Sexpr::List(items, line, col) => {
            let head = match items.first() {
                Some(Sexpr::Sym(h, _, _)) => h.as_str(),
                _ => return Err(Error::Parse { line: *line, col: *col, msg: "expected term head".into() }),
            };
            match (head, items.len()) {
                ("int", 2) => Ok(Lhs::Integral(expect_clock(&items[1])?, None)),
                ("frac", 2) => Ok(Lhs::Frac(expect_clock(&items[1])?)),
                ("sub", 3) => match (&items[1], &items[2]) {
                    (Sexpr::Sym(a, _, _), Sexpr::Sym(b, _, _)) => {
                        Ok(Lhs::Classical(Clock::new(a.clone()), Some(Clock::new(b.clone()))))
                    }
                    (Sexpr::List(ia, _, _), Sexpr::List(ib, _, _)) => {
                        let int_arg = |items: &[Sexpr]| -> Option<Clock> {
                            match items {
                                [Sexpr::Sym(h, _, _), Sexpr::Sym(x, _, _)] if h == "int" => {
                                    Some(Clock::new(x.clone()))
                                }
                                _ => None,
                            }
                        };
                        match (int_arg(ia), int_arg(ib)) {
                            (Some(a), Some(b)) => Ok(Lhs::Integral(a, Some(b))),
                            _ => Err(Error::Parse {
                                line: *line,
                                col: *col,
                                msg: "sub of compound terms must be (sub (int x) (int y))".into(),
                            }),
                        }
                    }
                    _ => Err(Error::Parse {
                        line: *line,
                        col: *col,
                        msg: "sub arguments must both be clocks or both be (int _) terms".into(),
                    }),
                },
                _ => Err(Error::Parse { line: *line, col: *col, msg: format!("unknown term head '{head}'") }),
            }
        }
        Sexpr::Int(_, line, col) => {
            Err(Error::Parse { line: *line, col: *col, msg: "integer cannot appear as a left-hand side".into() })
        }
    }
}

fn rel_of(head: &str) -> Option<Rel> {
    match head {
        "lt" => Some(Rel::Lt),
        "le" => Some(Rel::Le),
        "eq" => Some(Rel::Eq),
        "ge" => Some(Rel::Ge),
        "gt" => Some(Rel::Gt),
        _ => None,
    }
}

/// Interpret a parsed s-expression as a clock constraint.
pub fn constraint_from_sexpr(e: &Sexpr) -> Result<ClockConstraint> {
    match e {
        Sexpr::Sym(s, line, col) => match s.as_str() {
            "true" => Ok(ClockConstraint::True),
            "false" => Ok(ClockConstraint::False),
            other => Err(Error::Parse {
                line: *line,
                col: *col,
                msg: format!("expected a constraint, found bare symbol '{other}'"),
            }),
        },
        Sexpr::Int(_, line, col) => {
            Err(Error::Parse { line: *line, col: *col, msg: "expected a constraint, found integer".into() })
        }
        Sexpr::List(items, line, col) => {
            let head = match items.first() {
                Some(Sexpr::Sym(h, _, _)) => h.as_str(),
                _ => return Err(Error::Parse { line: *line, col: *col, msg: "expected constraint head".into() }),
            };
            let perr = |msg: String| Error::Parse { line: *line, col: *col, msg };
            match head {
                "and" => Ok(ClockConstraint::and(
                    items[1..].iter().map(constraint_from_sexpr).collect::<Result<Vec<_>>>()?,
                )),
                "or" => Ok(ClockConstraint::or(
                    items[1..].iter().map(constraint_from_sexpr).collect::<Result<Vec<_>>>()?,
                )),
                "not" => {
                    if items.len() != 2 {
                        return Err(perr("not takes exactly one argument".into()));
                    }
                    Ok(ClockConstraint::not(constraint_from_sexpr(&items[1])?))
                }
                "eqm" | "neqm" => {
                    if items.len() != 4 {
                        return Err(perr(format!("{head} takes (modulus, term, residue)")));
                    }
                    let m = match &items[1] {
                        Sexpr::Int(m, _, _) if *m >= 1 => *m as u32,
                        _ => return Err(perr("modulus must be a positive integer".into())),
                    };
                    let k = match &items[3] {
                        Sexpr::Int(k, _, _) => *k,
                        _ => return Err(perr("residue must be an integer".into())),
                    };
                    let (x, y) = match parse_lhs(&items[2])? {
                        Lhs::Integral(x, y) => (x, y),
                        _ => return Err(perr(format!("{head} applies to (int _) terms"))),
                    };
                    let mut a = Atom::modular(x, y, m, k);
                    if head == "neqm" {
                        if let Atom::Modular { negated, .. } = &mut a {
                            *negated = true;
                        }
                    }
                    Ok(ClockConstraint::Atom(a))
                }
                h => {
                    let rel = rel_of(h).ok_or_else(|| perr(format!("unknown constraint head '{h}'")))?;
                    if items.len() != 3 {
                        return Err(perr(format!("{h} takes two arguments")));
                    }
                    let lhs = parse_lhs(&items[1])?;
                    match (&lhs, &items[2]) {
                        (Lhs::Classical(x, y), Sexpr::Int(k, _, _)) => {
                            Ok(ClockConstraint::Atom(Atom::Classical { x: x.clone(), y: y.clone(), rel, k: *k }))
                        }
                        (Lhs::Integral(x, y), Sexpr::Int(k, _, _)) => {
                            Ok(ClockConstraint::Atom(Atom::Integral { x: x.clone(), y: y.clone(), rel, k: *k }))
                        }
                        (Lhs::Frac(x), Sexpr::Int(0, _, _)) => {
                            Ok(ClockConstraint::Atom(Atom::FracConst { x: x.clone(), rel }))
                        }
                        (Lhs::Frac(_), Sexpr::Int(_, l, c)) => Err(Error::Parse {
                            line: *l,
                            col: *c,
                            msg: "fractional terms compare only against 0 or (frac _)".into(),
                        }),
                        (Lhs::Frac(x), rhs) => match parse_lhs(rhs)? {
                            Lhs::Frac(y) => {
                                Ok(ClockConstraint::Atom(Atom::FracDiag { x: x.clone(), y, rel }))
                            }
                            _ => Err(perr("fractional terms compare only against (frac _) or 0".into())),
                        },
                        _ => Err(perr("right-hand side must be an integer constant".into())),
                    }
                }
            }
        }
    }
}

/// Parse a constraint from text.
pub fn parse_constraint(input: &str) -> Result<ClockConstraint> {
    constraint_from_sexpr(&parse_sexpr(input)?)
}

fn lhs_to_string(x: &Clock, y: &Option<Clock>, wrap: &str) -> String {
    let item = |c: &Clock| {
        if wrap.is_empty() {
            c.to_string()
        } else {
            format!("({wrap} {c})")
        }
    };
    match y {
        None => item(x),
        Some(y) => format!("(sub {} {})", item(x), item(y)),
    }
}

/// Deterministic textual form, re-parseable by `parse_constraint`.
pub fn constraint_to_string(c: &ClockConstraint) -> String {
    let mut out = String::new();
    write_constraint(c, &mut out);
    out
}

fn write_constraint(c: &ClockConstraint, out: &mut String) {
    match c {
        ClockConstraint::True => out.push_str("true"),
        ClockConstraint::False => out.push_str("false"),
        ClockConstraint::Not(inner) => {
            out.push_str("(not ");
            write_constraint(inner, out);
            out.push(')');
        }
        ClockConstraint::And(cs) | ClockConstraint::Or(cs) => {
            out.push('(');
            out.push_str(if matches!(c, ClockConstraint::And(_)) { "and" } else { "or" });
            for part in cs {
                out.push(' ');
                write_constraint(part, out);
            }
            out.push(')');
        }
        ClockConstraint::Atom(a) => match a {
            Atom::Classical { x, y, rel, k } => {
                let _ = write!(out, "({} {} {})", rel.symbol(), lhs_to_string(x, y, ""), k);
            }
            Atom::Integral { x, y, rel, k } => {
                let _ = write!(out, "({} {} {})", rel.symbol(), lhs_to_string(x, y, "int"), k);
            }
            Atom::Modular { x, y, m, k, negated } => {
                let head = if *negated { "neqm" } else { "eqm" };
                let _ = write!(out, "({head} {} {} {})", m, lhs_to_string(x, y, "int"), k);
            }
            Atom::FracConst { x, rel } => {
                let _ = write!(out, "({} (frac {}) 0)", rel.symbol(), x);
            }
            Atom::FracDiag { x, y, rel } => {
                let _ = write!(out, "({} (frac {}) (frac {}))", rel.symbol(), x, y);
            }
        },
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parse_atom_shapes() {
        let cases = [
            "(le (int x) 3)",
            "(eqm 2 (sub (int x) (int y)) 1)",
            "(eq (frac x) 0)",
            "(le (frac x) (frac y))",
            "(le (sub x y) 3)",
            "(gt x -2)",
            "(neqm 3 (int z) 2)",
            "(and (le (int x) 1) (or true (not false)))",
        ];
        for s in cases {
            let c = parse_constraint(s).unwrap_or_else(|e| panic!("{s}: {e}"));
            let printed = constraint_to_string(&c);
            let back = parse_constraint(&printed).unwrap();
            assert_eq!(c, back, "round trip failed for {s}");
        }
    }

    #[test]
    fn residues_normalize_into_range() {
        let c = parse_constraint("(eqm 3 (int x) -1)").unwrap();
        match c {
            ClockConstraint::Atom(Atom::Modular { k, .. }) => assert_eq!(k, 2),
            other => panic!("unexpected {other:?}"),
        }
    }

    #[test]
    fn rejects_malformed_input() {
        for bad in ["(le (frac x) 1)", "(foo x 1)", "(le x)", "(eqm 0 (int x) 0)", "(le (sub (frac x) (frac y)) 1)"] {
            assert!(parse_constraint(bad).is_err(), "{bad} should fail");
        }
    }

    #[test]
    fn reports_positions() {
        match parse_constraint("(and true\n  (bogus x 1))") {
            Err(Error::Parse { line, .. }) => assert_eq!(line, 2),
            other => panic!("expected parse error, got {other:?}"),
        }
    }
}
