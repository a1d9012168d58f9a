use std::collections::{BTreeMap, BTreeSet};
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::Cost;

/// The implicit root of every type hierarchy.
pub const OBJECT: &str = "object";

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct TypedParam {
    /// Variable name without the leading `?`.
    pub name: String,
    pub ty: String,
}

impl TypedParam {
    pub fn new(name: impl Into<String>, ty: impl Into<String>) -> Self {
        TypedParam {
            name: name.into(),
            ty: ty.into(),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct PredicateSchema {
    pub name: String,
    pub params: Vec<TypedParam>,
}

impl PredicateSchema {
    pub fn arity(&self) -> usize {
        self.params.len()
    }
}

/// A lifted literal inside an action schema; every argument names one of the
/// schema's parameters.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct AtomTemplate {
    pub predicate: String,
    pub args: Vec<String>,
}

impl AtomTemplate {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        AtomTemplate {
            predicate: predicate.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for AtomTemplate {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " ?{a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct ActionSchema {
    pub name: String,
    pub params: Vec<TypedParam>,
    pub precondition: Vec<AtomTemplate>,
    pub add: Vec<AtomTemplate>,
    pub del: Vec<AtomTemplate>,
}

impl ActionSchema {
    /// Binds the schema's parameters to `args` and instantiates every literal.
    /// Arity and typing are the caller's responsibility.
    pub fn instantiate(&self, args: &[String]) -> GroundAction {
        let bind = |t: &AtomTemplate| GroundAtom {
            predicate: t.predicate.clone(),
            args: t
                .args
                .iter()
                .map(|v| {
                    let i = self
                        .params
                        .iter()
                        .position(|p| &p.name == v)
                        .expect("schema literal over an undeclared parameter");
                    args[i].clone()
                })
                .collect(),
        };
        let set = |ts: &[AtomTemplate]| ts.iter().map(bind).collect::<BTreeSet<_>>();
        GroundAction {
            name: self.name.clone(),
            args: args.to_vec(),
            pre: set(&self.precondition),
            add: set(&self.add),
            del: set(&self.del),
        }
    }
}

/// Single-parent type hierarchy. Declaration order is kept so that emitted
/// domains read back identically.
#[derive(Debug, Clone, PartialEq, Eq, Default, Serialize, Deserialize)]
pub struct TypeHierarchy {
    types: Vec<(String, String)>,
}

impl TypeHierarchy {
    pub fn new() -> Self {
        Self::default()
    }

    /// Declares `name` as a subtype of `parent`. Returns false when the name
    /// is already declared.
    pub fn declare(&mut self, name: impl Into<String>, parent: impl Into<String>) -> bool {
        let name = name.into();
        if name == OBJECT || self.types.iter().any(|(n, _)| *n == name) {
            return false;
        }
        self.types.push((name, parent.into()));
        true
    }

    pub fn contains(&self, name: &str) -> bool {
        name == OBJECT || self.types.iter().any(|(n, _)| n == name)
    }

    pub fn parent(&self, name: &str) -> Option<&str> {
        self.types
            .iter()
            .find(|(n, _)| n == name)
            .map(|(_, p)| p.as_str())
    }

    /// Declared (name, parent) pairs in declaration order.
    pub fn entries(&self) -> &[(String, String)] {
        &self.types
    }

    /// True when `sub` equals `sup` or descends from it.
    pub fn is_subtype(&self, sub: &str, sup: &str) -> bool {
        if sup == OBJECT {
            return true;
        }
        let mut cur = sub;
        // a chain longer than the number of types means a cycle
        for _ in 0..=self.types.len() {
            if cur == sup {
                return true;
            }
            match self.parent(cur) {
                Some(p) => cur = p,
                None => return false,
            }
        }
        false
    }

    /// Returns a type that lies on a cycle, if any.
    pub fn find_cycle(&self) -> Option<&str> {
        for (name, _) in &self.types {
            let mut cur = name.as_str();
            for _ in 0..=self.types.len() {
                match self.parent(cur) {
                    Some(p) if p == name => return Some(name),
                    Some(p) => cur = p,
                    None => break,
                }
            }
        }
        None
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Domain {
    pub name: String,
    pub requirements: Vec<String>,
    pub types: TypeHierarchy,
    pub predicates: Vec<PredicateSchema>,
    pub actions: Vec<ActionSchema>,
}

impl Domain {
    pub fn predicate(&self, name: &str) -> Option<&PredicateSchema> {
        self.predicates.iter().find(|p| p.name == name)
    }

    pub fn action(&self, name: &str) -> Option<&ActionSchema> {
        self.actions.iter().find(|a| a.name == name)
    }

    /// Predicates that no action adds or deletes.
    pub fn static_predicates(&self) -> BTreeSet<&str> {
        let mut fluent = BTreeSet::new();
        for a in &self.actions {
            for t in a.add.iter().chain(&a.del) {
                fluent.insert(t.predicate.as_str());
            }
        }
        self.predicates
            .iter()
            .map(|p| p.name.as_str())
            .filter(|p| !fluent.contains(p))
            .collect()
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct GroundAtom {
    pub predicate: String,
    pub args: Vec<String>,
}

impl GroundAtom {
    pub fn new(predicate: impl Into<String>, args: &[&str]) -> Self {
        GroundAtom {
            predicate: predicate.into(),
            args: args.iter().map(|s| s.to_string()).collect(),
        }
    }
}

impl fmt::Display for GroundAtom {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.predicate)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// Name plus ordered arguments; the identity of a ground action when plans
/// are compared as sets.
#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
pub struct ActionSig {
    pub name: String,
    pub args: Vec<String>,
}

impl fmt::Display for ActionSig {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub struct GroundAction {
    pub name: String,
    pub args: Vec<String>,
    pub pre: BTreeSet<GroundAtom>,
    pub add: BTreeSet<GroundAtom>,
    pub del: BTreeSet<GroundAtom>,
}

impl GroundAction {
    pub fn sig(&self) -> ActionSig {
        ActionSig {
            name: self.name.clone(),
            args: self.args.clone(),
        }
    }
}

impl fmt::Display for GroundAction {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "({}", self.name)?;
        for a in &self.args {
            write!(f, " {a}")?;
        }
        write!(f, ")")
    }
}

/// Closed-world state.
pub type State = BTreeSet<GroundAtom>;

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct SoftGoal {
    /// Preference name used in PDDL3 output.
    pub name: String,
    pub atom: GroundAtom,
    pub penalty: Cost,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Default, Serialize, Deserialize)]
pub enum Metric {
    #[default]
    PlanLength,
    PenaltySum,
    WeightedSum { length: Cost, penalty: Cost },
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct Problem {
    pub name: String,
    pub domain: String,
    /// Object name to its declared type.
    pub objects: BTreeMap<String, String>,
    pub init: State,
    pub hard_goals: BTreeSet<GroundAtom>,
    /// Keyed by preference name.
    pub soft_goals: BTreeMap<String, SoftGoal>,
    pub metric: Metric,
}

impl Problem {
    /// Objects whose type is `ty` or a subtype of it, in name order.
    pub fn objects_of<'a>(&'a self, ty: &'a str, types: &'a TypeHierarchy) -> Vec<&'a str> {
        self.objects
            .iter()
            .filter(|(_, t)| types.is_subtype(t, ty))
            .map(|(n, _)| n.as_str())
            .collect()
    }

    /// Sum of the penalties of all soft goals.
    pub fn total_penalty(&self) -> Cost {
        self.soft_goals.values().map(|g| g.penalty).sum()
    }

    pub fn with_init(&self, init: State) -> Problem {
        Problem {
            init,
            ..self.clone()
        }
    }
}
