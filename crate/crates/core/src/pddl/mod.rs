//! Typed STRIPS with PDDL3 simple preferences: parsing, grounding and
//! serialization.
//!
//! The accepted grammar is documented in `docs/pddl-subset.ebnf`.

mod ast;
mod emit;
mod ground;
mod parse;
pub mod sexpr;

use thiserror::Error;

pub use ast::*;
pub use emit::{emit_domain, emit_problem, format_cost, Dialect};
pub use ground::{ground, GroundOptions};
pub use parse::{parse_decimal, parse_domain, parse_problem};
pub use sexpr::Pos;

#[derive(Debug, Error)]
pub enum PddlError {
    #[error("{pos}: syntax error: {msg}")]
    Syntax { pos: Pos, msg: String },
    #[error("{pos}: {msg}")]
    Semantic { pos: Pos, msg: String },
    #[error("cannot emit: {0}")]
    Unrepresentable(String),
}

impl PddlError {
    pub(crate) fn syntax(pos: Pos, msg: impl Into<String>) -> Self {
        PddlError::Syntax {
            pos,
            msg: msg.into(),
        }
    }

    pub(crate) fn semantic(pos: Pos, msg: impl Into<String>) -> Self {
        PddlError::Semantic {
            pos,
            msg: msg.into(),
        }
    }
}

/// Parses a whitespace/comment separated list of ground atoms such as
/// `(at f1 g2) (operational f1)`, checking them against the problem's
/// objects. Used for perturbed-state files.
pub fn parse_atoms(text: &str, domain: &Domain, problem: &Problem) -> Result<State, PddlError> {
    let wrapped = format!(
        "(define (problem atoms) (:domain {}) (:objects {}) (:init {}) (:goal (and)))",
        domain.name,
        problem
            .objects
            .iter()
            .map(|(o, t)| format!("{o} - {t}"))
            .collect::<Vec<_>>()
            .join(" "),
        text
    );
    parse_problem(&wrapped, domain).map(|p| p.init)
}
