use std::collections::{BTreeMap, BTreeSet, HashSet};

use super::ast::*;
use super::sexpr::{self, Pos, Sexpr};
use super::PddlError;
use crate::Cost;

type Result<T> = std::result::Result<T, PddlError>;

/// Parses a typed STRIPS domain.
pub fn parse_domain(text: &str) -> Result<Domain> {
    let top = sexpr::read(text)?;
    let items = expect_list(&top, "`(define ...)`")?;
    expect_keyword(items.first(), "define", top.pos())?;
    let header = items
        .get(1)
        .ok_or_else(|| PddlError::syntax(top.pos(), "missing `(domain <name>)`"))?;
    let name = named_header(header, "domain")?;

    let mut domain = Domain {
        name,
        requirements: Vec::new(),
        types: TypeHierarchy::new(),
        predicates: Vec::new(),
        actions: Vec::new(),
    };

    for section in &items[2..] {
        let list = expect_list(section, "a domain section")?;
        match section.head() {
            Some(":requirements") => {
                for r in &list[1..] {
                    domain.requirements.push(expect_atom(r, "requirement")?.to_string());
                }
            }
            Some(":types") => {
                for (ty, parent, pos) in typed_list(&list[1..], false)? {
                    if !domain.types.declare(&ty, &parent) {
                        return Err(PddlError::semantic(pos, format!("duplicate type `{ty}`")));
                    }
                }
            }
            Some(":predicates") => {
                for p in &list[1..] {
                    let pred = predicate_schema(p)?;
                    if domain.predicate(&pred.name).is_some() {
                        return Err(PddlError::semantic(
                            p.pos(),
                            format!("duplicate predicate `{}`", pred.name),
                        ));
                    }
                    domain.predicates.push(pred);
                }
            }
            Some(":action") => {
                let action = action_schema(list, section.pos())?;
                if domain.action(&action.name).is_some() {
                    return Err(PddlError::semantic(
                        section.pos(),
                        format!("duplicate action `{}`", action.name),
                    ));
                }
                domain.actions.push(action);
            }
            Some(other) => {
                return Err(PddlError::syntax(
                    section.pos(),
                    format!("unsupported domain section `{other}`"),
                ))
            }
            None => return Err(PddlError::syntax(section.pos(), "expected a section keyword")),
        }
    }

    check_domain(&domain, &items[2..])?;
    Ok(domain)
}

fn check_domain(domain: &Domain, sections: &[Sexpr]) -> Result<()> {
    let pos_of = |kw: &str| {
        sections
            .iter()
            .find(|s| s.head() == Some(kw))
            .map(Sexpr::pos)
            .unwrap_or_default()
    };
    let types_pos = pos_of(":types");
    for (name, parent) in domain.types.entries() {
        if !domain.types.contains(parent) {
            return Err(PddlError::semantic(
                types_pos,
                format!("type `{name}` has undeclared parent `{parent}`"),
            ));
        }
    }
    if let Some(t) = domain.types.find_cycle() {
        return Err(PddlError::semantic(types_pos, format!("type hierarchy has a cycle through `{t}`")));
    }

    let pred_pos = pos_of(":predicates");
    for p in &domain.predicates {
        check_params(&p.params, &domain.types, pred_pos, &p.name)?;
    }

    for (a, section) in domain
        .actions
        .iter()
        .zip(sections.iter().filter(|s| s.head() == Some(":action")))
    {
        let pos = section.pos();
        check_params(&a.params, &domain.types, pos, &a.name)?;
        for lit in a.precondition.iter().chain(&a.add).chain(&a.del) {
            let pred = domain.predicate(&lit.predicate).ok_or_else(|| {
                PddlError::semantic(
                    pos,
                    format!("action `{}` uses undeclared predicate `{}`", a.name, lit.predicate),
                )
            })?;
            if pred.arity() != lit.args.len() {
                return Err(PddlError::semantic(
                    pos,
                    format!(
                        "arity mismatch in action `{}`: `{}` takes {} arguments, got {}",
                        a.name,
                        pred.name,
                        pred.arity(),
                        lit.args.len()
                    ),
                ));
            }
            for (arg, formal) in lit.args.iter().zip(&pred.params) {
                let param = a.params.iter().find(|p| &p.name == arg).ok_or_else(|| {
                    PddlError::semantic(
                        pos,
                        format!("action `{}` uses unbound variable `?{arg}`", a.name),
                    )
                })?;
                if !domain.types.is_subtype(&param.ty, &formal.ty) {
                    return Err(PddlError::semantic(
                        pos,
                        format!(
                            "type mismatch in action `{}`: `?{arg}` is `{}`, `{}` expects `{}`",
                            a.name, param.ty, pred.name, formal.ty
                        ),
                    ));
                }
            }
        }
        if let Some(both) = a.add.iter().find(|t| a.del.contains(t)) {
            return Err(PddlError::semantic(
                pos,
                format!("action `{}` both adds and deletes {both}", a.name),
            ));
        }
    }
    Ok(())
}

fn check_params(params: &[TypedParam], types: &TypeHierarchy, pos: Pos, owner: &str) -> Result<()> {
    let mut seen = HashSet::new();
    for p in params {
        if !seen.insert(&p.name) {
            return Err(PddlError::semantic(
                pos,
                format!("duplicate parameter `?{}` in `{owner}`", p.name),
            ));
        }
        if !types.contains(&p.ty) {
            return Err(PddlError::semantic(
                pos,
                format!("unknown type `{}` in `{owner}`", p.ty),
            ));
        }
    }
    Ok(())
}

fn predicate_schema(e: &Sexpr) -> Result<PredicateSchema> {
    let list = expect_list(e, "a predicate declaration")?;
    let name = expect_atom(
        list.first()
            .ok_or_else(|| PddlError::syntax(e.pos(), "empty predicate declaration"))?,
        "predicate name",
    )?;
    Ok(PredicateSchema {
        name: name.to_string(),
        params: params(&list[1..])?,
    })
}

fn action_schema(list: &[Sexpr], pos: Pos) -> Result<ActionSchema> {
    let name = expect_atom(
        list.get(1)
            .ok_or_else(|| PddlError::syntax(pos, "missing action name"))?,
        "action name",
    )?
    .to_string();
    let mut action = ActionSchema {
        name,
        params: Vec::new(),
        precondition: Vec::new(),
        add: Vec::new(),
        del: Vec::new(),
    };
    let mut rest = list[2..].iter();
    while let Some(key) = rest.next() {
        let kw = expect_atom(key, "action keyword")?;
        let value = rest
            .next()
            .ok_or_else(|| PddlError::syntax(key.pos(), format!("missing value for `{kw}`")))?;
        match kw {
            ":parameters" => action.params = params(expect_list(value, "parameter list")?)?,
            ":precondition" => {
                for lit in conjunction(value)? {
                    match lit {
                        Literal::Pos(t) => action.precondition.push(t),
                        Literal::Neg(_, p) => {
                            return Err(PddlError::syntax(
                                p,
                                "negative preconditions are not supported",
                            ))
                        }
                    }
                }
            }
            ":effect" => {
                for lit in conjunction(value)? {
                    match lit {
                        Literal::Pos(t) => action.add.push(t),
                        Literal::Neg(t, _) => action.del.push(t),
                    }
                }
            }
            other => {
                return Err(PddlError::syntax(
                    key.pos(),
                    format!("unsupported action keyword `{other}`"),
                ))
            }
        }
    }
    Ok(action)
}

enum Literal {
    Pos(AtomTemplate),
    Neg(AtomTemplate, Pos),
}

/// `()`, a single literal, or `(and lit...)`.
fn conjunction(e: &Sexpr) -> Result<Vec<Literal>> {
    let list = expect_list(e, "a condition")?;
    if list.is_empty() {
        return Ok(Vec::new());
    }
    if e.head() == Some("and") {
        list[1..].iter().map(literal).collect()
    } else {
        Ok(vec![literal(e)?])
    }
}

fn literal(e: &Sexpr) -> Result<Literal> {
    match e.head() {
        Some("not") => {
            let list = e.as_list().unwrap_or_default();
            if list.len() != 2 {
                return Err(PddlError::syntax(e.pos(), "`not` takes exactly one atom"));
            }
            Ok(Literal::Neg(template(&list[1])?, e.pos()))
        }
        Some("and" | "or" | "forall" | "exists" | "when" | "imply" | "preference") => Err(
            PddlError::syntax(e.pos(), format!("`{}` is not supported here", e.head().unwrap())),
        ),
        _ => Ok(Literal::Pos(template(e)?)),
    }
}

fn template(e: &Sexpr) -> Result<AtomTemplate> {
    let list = expect_list(e, "an atom")?;
    let pred = expect_atom(
        list.first()
            .ok_or_else(|| PddlError::syntax(e.pos(), "empty atom"))?,
        "predicate name",
    )?;
    let mut args = Vec::new();
    for a in &list[1..] {
        let tok = expect_atom(a, "variable")?;
        match tok.strip_prefix('?') {
            Some(v) if !v.is_empty() => args.push(v.to_string()),
            _ => {
                return Err(PddlError::syntax(
                    a.pos(),
                    format!("expected a `?variable` in action schema, found `{tok}`"),
                ))
            }
        }
    }
    Ok(AtomTemplate {
        predicate: pred.to_string(),
        args,
    })
}

fn params(items: &[Sexpr]) -> Result<Vec<TypedParam>> {
    typed_list(items, true)?
        .into_iter()
        .map(|(n, ty, _)| Ok(TypedParam::new(n, ty)))
        .collect()
}

/// Parses `a b - t c - u d` into (name, type, pos). Untyped trailing names get
/// `object`. With `variables`, names must carry a `?` which is stripped.
fn typed_list(items: &[Sexpr], variables: bool) -> Result<Vec<(String, String, Pos)>> {
    let mut out = Vec::new();
    let mut pending: Vec<(String, Pos)> = Vec::new();
    let mut i = 0;
    while i < items.len() {
        let tok = expect_atom(&items[i], "name")?;
        if tok == "-" {
            let ty = items
                .get(i + 1)
                .ok_or_else(|| PddlError::syntax(items[i].pos(), "missing type after `-`"))?;
            let ty = expect_atom(ty, "type name")?;
            if ty.starts_with('?') || ty == "-" {
                return Err(PddlError::syntax(items[i + 1].pos(), "expected a type name"));
            }
            if pending.is_empty() {
                return Err(PddlError::syntax(items[i].pos(), "`-` without preceding names"));
            }
            for (n, p) in pending.drain(..) {
                out.push((n, ty.to_string(), p));
            }
            i += 2;
            continue;
        }
        let name = if variables {
            match tok.strip_prefix('?') {
                Some(v) if !v.is_empty() => v.to_string(),
                _ => {
                    return Err(PddlError::syntax(
                        items[i].pos(),
                        format!("expected a `?variable`, found `{tok}`"),
                    ))
                }
            }
        } else {
            tok.to_string()
        };
        pending.push((name, items[i].pos()));
        i += 1;
    }
    for (n, p) in pending {
        out.push((n, OBJECT.to_string(), p));
    }
    Ok(out)
}

/// Parses a problem against an already parsed domain.
pub fn parse_problem(text: &str, domain: &Domain) -> Result<Problem> {
    let top = sexpr::read(text)?;
    let items = expect_list(&top, "`(define ...)`")?;
    expect_keyword(items.first(), "define", top.pos())?;
    let header = items
        .get(1)
        .ok_or_else(|| PddlError::syntax(top.pos(), "missing `(problem <name>)`"))?;
    let name = named_header(header, "problem")?;

    let mut problem = Problem {
        name,
        domain: String::new(),
        objects: BTreeMap::new(),
        init: State::new(),
        hard_goals: BTreeSet::new(),
        soft_goals: BTreeMap::new(),
        metric: Metric::PlanLength,
    };
    let mut preferences: Vec<(String, GroundAtom, Pos)> = Vec::new();
    let mut metric: Option<(LinearMetric, Pos)> = None;

    for section in &items[2..] {
        let list = expect_list(section, "a problem section")?;
        match section.head() {
            Some(":domain") => {
                let d = list
                    .get(1)
                    .ok_or_else(|| PddlError::syntax(section.pos(), "missing domain name"))?;
                problem.domain = expect_atom(d, "domain name")?.to_string();
                if problem.domain != domain.name {
                    return Err(PddlError::semantic(
                        d.pos(),
                        format!(
                            "problem is for domain `{}`, not `{}`",
                            problem.domain, domain.name
                        ),
                    ));
                }
            }
            Some(":objects") => {
                for (obj, ty, pos) in typed_list(&list[1..], false)? {
                    if !domain.types.contains(&ty) {
                        return Err(PddlError::semantic(pos, format!("unknown type `{ty}`")));
                    }
                    if problem.objects.insert(obj.clone(), ty).is_some() {
                        return Err(PddlError::semantic(pos, format!("duplicate object `{obj}`")));
                    }
                }
            }
            Some(":init") => {
                for a in &list[1..] {
                    let atom = ground_atom(a, domain, &problem.objects)?;
                    problem.init.insert(atom);
                }
            }
            Some(":goal") => {
                let goal = list
                    .get(1)
                    .ok_or_else(|| PddlError::syntax(section.pos(), "empty goal"))?;
                let entries = match goal.head() {
                    Some("and") => &goal.as_list().unwrap()[1..],
                    _ => std::slice::from_ref(goal),
                };
                for e in entries {
                    if e.head() == Some("preference") {
                        let l = e.as_list().unwrap();
                        if l.len() != 3 {
                            return Err(PddlError::syntax(
                                e.pos(),
                                "expected `(preference <name> <atom>)`",
                            ));
                        }
                        let pname = expect_atom(&l[1], "preference name")?.to_string();
                        let atom = ground_atom(&l[2], domain, &problem.objects)?;
                        preferences.push((pname, atom, e.pos()));
                    } else {
                        problem
                            .hard_goals
                            .insert(ground_atom(e, domain, &problem.objects)?);
                    }
                }
            }
            Some(":metric") => {
                let dir = list
                    .get(1)
                    .ok_or_else(|| PddlError::syntax(section.pos(), "missing metric direction"))?;
                if expect_atom(dir, "metric direction")? != "minimize" {
                    return Err(PddlError::syntax(dir.pos(), "only `minimize` is supported"));
                }
                let expr = list
                    .get(2)
                    .ok_or_else(|| PddlError::syntax(section.pos(), "missing metric expression"))?;
                metric = Some((metric_expr(expr)?, section.pos()));
            }
            Some(other) => {
                return Err(PddlError::syntax(
                    section.pos(),
                    format!("unsupported problem section `{other}`"),
                ))
            }
            None => return Err(PddlError::syntax(section.pos(), "expected a section keyword")),
        }
    }

    if problem.domain.is_empty() {
        return Err(PddlError::syntax(top.pos(), "missing `(:domain <name>)`"));
    }

    let (linear, metric_pos) = metric.unwrap_or_default();
    let mut seen_atoms = BTreeSet::new();
    for (name, atom, pos) in preferences {
        if !seen_atoms.insert(atom.clone()) {
            return Err(PddlError::semantic(pos, format!("duplicate soft goal on {atom}")));
        }
        let penalty = linear.violations.get(&name).copied().unwrap_or_default();
        let goal = SoftGoal {
            name: name.clone(),
            atom,
            penalty,
        };
        if problem.soft_goals.insert(name.clone(), goal).is_some() {
            return Err(PddlError::semantic(pos, format!("duplicate preference `{name}`")));
        }
    }
    if let Some(unknown) = linear
        .violations
        .keys()
        .find(|n| !problem.soft_goals.contains_key(*n))
    {
        return Err(PddlError::semantic(
            metric_pos,
            format!("metric refers to unknown preference `{unknown}`"),
        ));
    }
    problem.metric = linear.kind;
    Ok(problem)
}

fn ground_atom(e: &Sexpr, domain: &Domain, objects: &BTreeMap<String, String>) -> Result<GroundAtom> {
    let list = expect_list(e, "a ground atom")?;
    let pred = expect_atom(
        list.first()
            .ok_or_else(|| PddlError::syntax(e.pos(), "empty atom"))?,
        "predicate name",
    )?;
    let schema = domain
        .predicate(pred)
        .ok_or_else(|| PddlError::semantic(e.pos(), format!("undeclared predicate `{pred}`")))?;
    if schema.arity() != list.len() - 1 {
        return Err(PddlError::semantic(
            e.pos(),
            format!(
                "arity mismatch: `{pred}` takes {} arguments, got {}",
                schema.arity(),
                list.len() - 1
            ),
        ));
    }
    let mut args = Vec::new();
    for (a, formal) in list[1..].iter().zip(&schema.params) {
        let obj = expect_atom(a, "object name")?;
        let ty = objects
            .get(obj)
            .ok_or_else(|| PddlError::semantic(a.pos(), format!("undeclared object `{obj}`")))?;
        if !domain.types.is_subtype(ty, &formal.ty) {
            return Err(PddlError::semantic(
                a.pos(),
                format!("object `{obj}` of type `{ty}` is not a `{}`", formal.ty),
            ));
        }
        args.push(obj.to_string());
    }
    Ok(GroundAtom {
        predicate: pred.to_string(),
        args,
    })
}

#[derive(Debug, Default)]
struct LinearMetric {
    kind: Metric,
    violations: BTreeMap<String, Cost>,
}

/// Recognised metric shapes: `(total-time)`; a violation sum (a single
/// `(is-violated p)` term, optionally scaled, or a `+` of such terms, or `0`);
/// and `(+ (* wl (total-time)) (* wp (+ <violation terms>)))`.
fn metric_expr(e: &Sexpr) -> Result<LinearMetric> {
    let mut violations = BTreeMap::new();
    if e.head() == Some("total-time") {
        return Ok(LinearMetric {
            kind: Metric::PlanLength,
            violations,
        });
    }
    if e.head() != Some("+") {
        violation_sum(e, &mut violations)?;
        return Ok(LinearMetric {
            kind: Metric::PenaltySum,
            violations,
        });
    }
    let mut length: Option<Cost> = None;
    let mut group: Option<Cost> = None;
    for t in &e.as_list().unwrap()[1..] {
        match scaled(t)? {
            Some((k, inner)) if inner.head() == Some("total-time") => {
                length = Some(length.unwrap_or_default() + k);
            }
            Some((k, inner)) if inner.head() == Some("+") => {
                if group.is_some() {
                    return Err(PddlError::syntax(t.pos(), "more than one scaled violation group"));
                }
                group = Some(k);
                violation_sum(inner, &mut violations)?;
            }
            _ if t.head() == Some("total-time") => {
                length = Some(length.unwrap_or_default() + Cost::from_integer(1));
            }
            _ => violation_term(t, &mut violations)?,
        }
    }
    let kind = match (length, group) {
        (None, None) => Metric::PenaltySum,
        (length, penalty) => Metric::WeightedSum {
            length: length.unwrap_or_default(),
            penalty: penalty.unwrap_or(Cost::from_integer(1)),
        },
    };
    Ok(LinearMetric { kind, violations })
}

/// `(* k x)` → (k, x).
fn scaled(e: &Sexpr) -> Result<Option<(Cost, &Sexpr)>> {
    if e.head() != Some("*") {
        return Ok(None);
    }
    let l = e.as_list().unwrap();
    if l.len() != 3 {
        return Err(PddlError::syntax(e.pos(), "`*` takes exactly two operands"));
    }
    let k = parse_number(&l[1])?;
    Ok(Some((k, &l[2])))
}

fn violation_sum(e: &Sexpr, out: &mut BTreeMap<String, Cost>) -> Result<()> {
    if let Some(a) = e.as_atom() {
        if parse_number(e)? != Cost::from_integer(0) {
            return Err(PddlError::syntax(e.pos(), format!("unexpected constant `{a}` in metric")));
        }
        return Ok(());
    }
    match e.head() {
        Some("+") => {
            for t in &e.as_list().unwrap()[1..] {
                violation_term(t, out)?;
            }
            Ok(())
        }
        _ => violation_term(e, out),
    }
}

fn violation_term(e: &Sexpr, out: &mut BTreeMap<String, Cost>) -> Result<()> {
    let (coef, inner) = match scaled(e)? {
        Some((k, inner)) => (k, inner),
        None => (Cost::from_integer(1), e),
    };
    if inner.head() != Some("is-violated") {
        return Err(PddlError::syntax(
            inner.pos(),
            "expected `(is-violated <preference>)` in metric",
        ));
    }
    let l = inner.as_list().unwrap();
    let name = l
        .get(1)
        .ok_or_else(|| PddlError::syntax(inner.pos(), "`is-violated` needs a preference name"))?;
    *out.entry(expect_atom(name, "preference name")?.to_string())
        .or_default() += coef;
    Ok(())
}

/// Parses an integer or finite decimal into an exact rational.
pub fn parse_number(e: &Sexpr) -> Result<Cost> {
    let s = expect_atom(e, "number")?;
    parse_decimal(s).ok_or_else(|| PddlError::syntax(e.pos(), format!("invalid number `{s}`")))
}

/// Exact value of a decimal literal such as `0.01` or `-2.5`.
pub fn parse_decimal(s: &str) -> Option<Cost> {
    let (neg, body) = match s.strip_prefix('-') {
        Some(b) => (true, b),
        None => (false, s),
    };
    let (int, frac) = body.split_once('.').unwrap_or((body, ""));
    if int.is_empty() && frac.is_empty() {
        return None;
    }
    if !int.chars().chain(frac.chars()).all(|c| c.is_ascii_digit()) || frac.len() > 15 {
        return None;
    }
    let denom = 10i64.checked_pow(frac.len() as u32)?;
    let int_v: i64 = if int.is_empty() { 0 } else { int.parse().ok()? };
    let frac_v: i64 = if frac.is_empty() { 0 } else { frac.parse().ok()? };
    let numer = int_v.checked_mul(denom)?.checked_add(frac_v)?;
    let v = Cost::new(numer, denom);
    Some(if neg { -v } else { v })
}

fn expect_list<'a>(e: &'a Sexpr, what: &str) -> Result<&'a [Sexpr]> {
    e.as_list()
        .ok_or_else(|| PddlError::syntax(e.pos(), format!("expected {what}")))
}

fn expect_atom<'a>(e: &'a Sexpr, what: &str) -> Result<&'a str> {
    e.as_atom()
        .ok_or_else(|| PddlError::syntax(e.pos(), format!("expected {what}")))
}

fn expect_keyword(e: Option<&Sexpr>, kw: &str, fallback: Pos) -> Result<()> {
    match e {
        Some(Sexpr::Atom(a, _)) if a == kw => Ok(()),
        Some(other) => Err(PddlError::syntax(other.pos(), format!("expected `{kw}`"))),
        None => Err(PddlError::syntax(fallback, format!("expected `{kw}`"))),
    }
}

fn named_header(e: &Sexpr, kw: &str) -> Result<String> {
    let l = expect_list(e, &format!("`({kw} <name>)`"))?;
    expect_keyword(l.first(), kw, e.pos())?;
    match l {
        [_, name] => Ok(expect_atom(name, "name")?.to_string()),
        _ => Err(PddlError::syntax(e.pos(), format!("expected `({kw} <name>)`"))),
    }
}
