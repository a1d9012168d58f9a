use std::fmt::Write;

use super::ast::*;
use super::PddlError;
use crate::Cost;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Dialect {
    /// Classical STRIPS; soft goals are not representable.
    Plain,
    /// Soft goals become PDDL3 simple preferences scored by `is-violated`.
    Pddl3,
}

/// Writes a cost as a PDDL number. Rationals whose denominator is not of
/// the form 2^a 5^b fall back to a rounded decimal.
pub fn format_cost(c: Cost) -> String {
    if c.is_integer() {
        return c.to_integer().to_string();
    }
    let mut denom = *c.denom();
    let mut digits = 0u32;
    let mut scale = 1i64;
    while denom % 10 == 0 || denom % 2 == 0 || denom % 5 == 0 {
        if denom % 10 == 0 {
            denom /= 10;
        } else if denom % 2 == 0 {
            denom /= 2;
        } else {
            denom /= 5;
        }
        digits += 1;
        scale *= 10;
        if digits > 15 {
            break;
        }
    }
    if denom == 1 {
        let scaled = c * Cost::from_integer(scale);
        let n = scaled.to_integer();
        let sign = if n < 0 { "-" } else { "" };
        let n = n.abs();
        let int = n / scale;
        let frac = n % scale;
        let frac = format!("{frac:0width$}", width = digits as usize);
        format!("{sign}{int}.{}", frac.trim_end_matches('0'))
    } else {
        format!("{:.6}", *c.numer() as f64 / *c.denom() as f64)
    }
}

pub fn emit_domain(d: &Domain) -> String {
    let mut out = String::new();
    writeln!(out, "(define (domain {})", d.name).unwrap();
    if !d.requirements.is_empty() {
        writeln!(out, "  (:requirements {})", d.requirements.join(" ")).unwrap();
    }
    if !d.types.entries().is_empty() {
        out.push_str("  (:types");
        let entries = d.types.entries();
        let mut i = 0;
        while i < entries.len() {
            let parent = &entries[i].1;
            let mut j = i;
            while j < entries.len() && entries[j].1 == *parent {
                write!(out, " {}", entries[j].0).unwrap();
                j += 1;
            }
            write!(out, " - {parent}").unwrap();
            i = j;
        }
        out.push_str(")\n");
    }
    if !d.predicates.is_empty() {
        out.push_str("  (:predicates\n");
        for p in &d.predicates {
            writeln!(out, "    ({}{})", p.name, params(&p.params)).unwrap();
        }
        out.push_str("  )\n");
    }
    for a in &d.actions {
        writeln!(out, "  (:action {}", a.name).unwrap();
        writeln!(out, "    :parameters ({})", params(&a.params).trim_start()).unwrap();
        writeln!(out, "    :precondition {}", conj(a.precondition.iter().map(|t| t.to_string()))).unwrap();
        let effects = a
            .add
            .iter()
            .map(|t| t.to_string())
            .chain(a.del.iter().map(|t| format!("(not {t})")));
        writeln!(out, "    :effect {})", conj(effects)).unwrap();
    }
    out.push_str(")\n");
    out
}

fn params(ps: &[TypedParam]) -> String {
    ps.iter().map(|p| format!(" ?{} - {}", p.name, p.ty)).collect()
}

fn conj(items: impl Iterator<Item = String>) -> String {
    let items: Vec<String> = items.collect();
    format!("(and {})", items.join(" "))
}

/// Serializes a problem. The output parses back to an equal `Problem`.
pub fn emit_problem(p: &Problem, dialect: Dialect) -> Result<String, PddlError> {
    if dialect == Dialect::Plain && !p.soft_goals.is_empty() {
        return Err(PddlError::Unrepresentable(format!(
            "problem `{}` has {} soft goals; the plain dialect cannot express them",
            p.name,
            p.soft_goals.len()
        )));
    }
    let mut out = String::new();
    writeln!(out, "(define (problem {})", p.name).unwrap();
    writeln!(out, "  (:domain {})", p.domain).unwrap();

    out.push_str("  (:objects");
    let mut by_type: Vec<(&str, Vec<&str>)> = Vec::new();
    for (obj, ty) in &p.objects {
        match by_type.iter_mut().find(|(t, _)| t == ty) {
            Some((_, v)) => v.push(obj),
            None => by_type.push((ty, vec![obj])),
        }
    }
    for (ty, objs) in by_type {
        write!(out, "\n    {} - {ty}", objs.join(" ")).unwrap();
    }
    out.push_str(")\n");

    out.push_str("  (:init");
    for a in &p.init {
        write!(out, "\n    {a}").unwrap();
    }
    out.push_str(")\n");

    out.push_str("  (:goal (and");
    for g in &p.hard_goals {
        write!(out, "\n    {g}").unwrap();
    }
    for g in p.soft_goals.values() {
        write!(out, "\n    (preference {} {})", g.name, g.atom).unwrap();
    }
    out.push_str("))\n");

    if let Some(m) = metric(p) {
        writeln!(out, "  (:metric minimize {m})").unwrap();
    }
    out.push_str(")\n");
    Ok(out)
}

fn metric(p: &Problem) -> Option<String> {
    let term = |g: &SoftGoal| {
        if g.penalty == Cost::from_integer(1) {
            format!("(is-violated {})", g.name)
        } else {
            format!("(* {} (is-violated {}))", format_cost(g.penalty), g.name)
        }
    };
    let terms: Vec<String> = p.soft_goals.values().map(term).collect();
    match p.metric {
        Metric::PlanLength => None,
        Metric::PenaltySum => Some(match terms.len() {
            0 => "0".to_string(),
            1 => terms[0].clone(),
            _ => format!("(+ {})", terms.join(" ")),
        }),
        Metric::WeightedSum { length, penalty } => Some(format!(
            "(+ (* {} (total-time)) (* {} (+ {})))",
            format_cost(length),
            format_cost(penalty),
            terms.join(" ")
        )),
    }
}
