//! A replanning laboratory.
//!
//! Three replanning models (restart, plan similarity, commitment
//! preservation) are compiled onto one partial-satisfaction substrate: the
//! constraints a previous plan imposes become soft goals over marker fluents,
//! which an embedded net-benefit planner (or an external PDDL3 planner)
//! then optimizes. The [`harness`] runs all three models on the Warehouses
//! benchmark and measures every replan under all metrics.

pub mod compile;
pub mod harness;
pub mod pddl;
pub mod plan;
pub mod planner;
pub mod warehouses;

/// Exact rational used for penalties, weights and objectives.
pub type Cost = num_rational::Rational64;

/// Serde adapter writing a [`Cost`] as text: an exact decimal such as
/// `"0.01"` where possible, `"n/d"` otherwise.
pub mod cost_text {
    use serde::{de, Deserialize, Deserializer, Serializer};

    use crate::pddl::{format_cost, parse_decimal};
    use crate::Cost;

    pub fn to_text(c: Cost) -> String {
        let text = format_cost(c);
        if parse_decimal(&text) == Some(c) {
            text
        } else {
            format!("{}/{}", c.numer(), c.denom())
        }
    }

    pub fn from_text(s: &str) -> Option<Cost> {
        match s.split_once('/') {
            Some((n, d)) => {
                let n: i64 = n.trim().parse().ok()?;
                let d: i64 = d.trim().parse().ok()?;
                (d != 0).then(|| Cost::new(n, d))
            }
            None => parse_decimal(s.trim()),
        }
    }

    pub fn serialize<S: Serializer>(c: &Cost, s: S) -> Result<S::Ok, S::Error> {
        s.serialize_str(&to_text(*c))
    }

    pub fn deserialize<'de, D: Deserializer<'de>>(d: D) -> Result<Cost, D::Error> {
        let s = String::deserialize(d)?;
        from_text(&s).ok_or_else(|| de::Error::custom(format!("not a number: `{s}`")))
    }

}
