//! Centralized bottom-up evaluation, used as an independent oracle for the
//! distributed engine.
//!
//! The global policy (union of all principals' clauses) is stratified over
//! predicate symbols; each stratum is saturated with semi-naive iteration.
//! Answers may be non-ground (facts may contain variables), so the model
//! stores atoms up to subsumption. A negation cycle reachable from the
//! queried predicate is reported as an error — the distributed engine
//! flounders on such programs.

use std::collections::{BTreeMap, BTreeSet};

use crate::policy::{rename_atom_apart, subsumes, unify, Atom, Clause, Literal, Policy};

/// The union of every principal's policy.
#[derive(Clone, Debug, Default)]
pub struct GlobalPolicy {
    pub policies: Vec<Policy>,
}

impl GlobalPolicy {
    pub fn clauses(&self) -> impl Iterator<Item = &Clause> {
        self.policies.iter().flat_map(|p| p.clauses.iter())
    }
}

#[derive(Debug, Clone, thiserror::Error)]
pub enum OracleError {
    #[error("negation cycle through predicates {{{}}}", .0.join(", "))]
    NegationCycle(Vec<String>),
    #[error("non-ground negative literal not({0}) during bottom-up evaluation")]
    NonGroundNegation(Atom),
}

fn pred_key(a: &Atom) -> String {
    format!("{}/{}", a.pred, a.args.len())
}

/// Predicate dependency edges: head -> body predicate, with polarity.
fn edges(gp: &GlobalPolicy) -> Vec<(String, String, bool)> {
    let mut out = Vec::new();
    for c in gp.clauses() {
        for l in &c.body {
            out.push((pred_key(&c.head), pred_key(&l.atom), l.negated));
        }
    }
    out
}

/// Predicates reachable from `start` in the dependency graph.
fn reachable(gp: &GlobalPolicy, start: &str) -> BTreeSet<String> {
    let es = edges(gp);
    let mut seen: BTreeSet<String> = [start.to_string()].into();
    let mut stack = vec![start.to_string()];
    while let Some(p) = stack.pop() {
        for (h, b, _) in &es {
            if *h == p && seen.insert(b.clone()) {
                stack.push(b.clone());
            }
        }
    }
    seen
}

/// Assign strata to the given predicates; errors when some negative edge
/// lies inside a cycle (non-stratifiable program).
fn stratify(
    gp: &GlobalPolicy,
    preds: &BTreeSet<String>,
) -> Result<BTreeMap<String, usize>, OracleError> {
    let es: Vec<(String, String, bool)> = edges(gp)
        .into_iter()
        .filter(|(h, b, _)| preds.contains(h) && preds.contains(b))
        .collect();
    let mut stratum: BTreeMap<String, usize> = preds.iter().map(|p| (p.clone(), 0)).collect();
    // Constraint propagation:
    //   stratum(head) >= stratum(body)        for positive edges
    //   stratum(head) >= stratum(body) + 1    for negative edges.
    // In a stratifiable program strata are bounded by the number of
    // predicates, so any value exceeding it exposes a negation cycle.
    loop {
        let mut changed = false;
        for (h, b, neg) in &es {
            let need = stratum[b] + usize::from(*neg);
            if stratum[h] < need {
                if need > preds.len() {
                    let cyclic: Vec<String> = stratum
                        .iter()
                        .filter(|(_, s)| **s > 0)
                        .map(|(p, _)| p.clone())
                        .collect();
                    return Err(OracleError::NegationCycle(cyclic));
                }
                stratum.insert(h.clone(), need);
                changed = true;
            }
        }
        if !changed {
            return Ok(stratum);
        }
    }
}

/// The model: atoms up to subsumption, in derivation order.
#[derive(Clone, Debug, Default)]
struct Model {
    atoms: Vec<Atom>,
}

impl Model {
    /// Insert unless an existing atom subsumes the new one; returns whether
    /// the model grew.
    fn insert(&mut self, a: Atom) -> bool {
        if self.atoms.iter().any(|m| subsumes(m, &a)) {
            false
        } else {
            self.atoms.push(a);
            true
        }
    }
}

/// Instantiations of `head :- body` against the model. `delta_pos`, when
/// set, requires that body position to match an atom of `delta` (the
/// semi-naive restriction); all other positions match the full model.
#[allow(clippy::too_many_arguments)]
fn instantiate(
    head: &Atom,
    body: &[Literal],
    pos: usize,
    delta_pos: Option<usize>,
    model: &Model,
    delta: &Model,
    counter: &mut u64,
    out: &mut Vec<Atom>,
) -> Result<(), OracleError> {
    if pos == body.len() {
        out.push(head.clone());
        return Ok(());
    }
    let lit = &body[pos];
    if lit.negated {
        let b = &lit.atom;
        if !b.is_ground() {
            return Err(OracleError::NonGroundNegation(b.clone()));
        }
        // Stratification puts the negated predicate in a lower, already
        // complete stratum, so membership in the current model is final.
        if !model.atoms.iter().any(|m| subsumes(m, b)) {
            instantiate(head, body, pos + 1, delta_pos, model, delta, counter, out)?;
        }
        return Ok(());
    }
    let source = if delta_pos == Some(pos) { delta } else { model };
    for m in &source.atoms {
        if m.pred != lit.atom.pred || m.args.len() != lit.atom.args.len() {
            continue;
        }
        let mut avoid: BTreeSet<String> = head.vars().into_iter().collect();
        for l in body {
            avoid.extend(l.atom.vars());
        }
        let m_r = rename_atom_apart(m, &avoid, counter);
        if let Some(theta) = unify(&lit.atom, &m_r) {
            let new_head = theta.apply_atom(head);
            let new_body: Vec<Literal> = body.iter().map(|l| theta.apply_literal(l)).collect();
            instantiate(&new_head, &new_body, pos + 1, delta_pos, model, delta, counter, out)?;
        }
    }
    Ok(())
}

fn saturate_stratum(
    clauses: &[&Clause],
    model: &mut Model,
    semi_naive: bool,
    counter: &mut u64,
) -> Result<(), OracleError> {
    // First full pass.
    let mut delta = Model::default();
    let mut produced = Vec::new();
    for c in clauses {
        instantiate(&c.head, &c.body, 0, None, model, &delta, counter, &mut produced)?;
    }
    for a in produced.drain(..) {
        if model.insert(a.clone()) {
            delta.atoms.push(a);
        }
    }
    // Iterate to fixpoint.
    while !delta.atoms.is_empty() {
        let mut next_delta = Model::default();
        for c in clauses {
            if semi_naive {
                // One pass per body position, restricted to the delta.
                for pos in 0..c.body.len() {
                    if c.body[pos].negated {
                        continue;
                    }
                    instantiate(&c.head, &c.body, 0, Some(pos), model, &delta, counter, &mut produced)?;
                }
            } else {
                instantiate(&c.head, &c.body, 0, None, model, &delta, counter, &mut produced)?;
            }
        }
        for a in produced.drain(..) {
            if model.insert(a.clone()) {
                next_delta.atoms.push(a);
            }
        }
        delta = next_delta;
    }
    Ok(())
}

fn least_model(gp: &GlobalPolicy, goal: &Atom, semi_naive: bool) -> Result<Model, OracleError> {
    // Restrict to the part of the program the goal can reach, so an
    // unrelated negation cycle does not block the query.
    let preds = reachable(gp, &pred_key(goal));
    let strata = stratify(gp, &preds)?;
    let max = strata.values().copied().max().unwrap_or(0);
    let mut model = Model::default();
    let mut counter = 0u64;
    for s in 0..=max {
        let clauses: Vec<&Clause> = gp
            .clauses()
            .filter(|c| strata.get(&pred_key(&c.head)) == Some(&s))
            .collect();
        saturate_stratum(&clauses, &mut model, semi_naive, &mut counter)?;
    }
    Ok(model)
}

fn goal_answers(model: &Model, goal: &Atom, counter: &mut u64) -> Vec<Atom> {
    let mut out = Vec::new();
    let avoid: BTreeSet<String> = goal.vars().into_iter().collect();
    for m in &model.atoms {
        let m_r = rename_atom_apart(m, &avoid, counter);
        if let Some(theta) = unify(goal, &m_r) {
            let ans = theta.apply_atom(goal);
            if !out.iter().any(|o| subsumes(o, &ans)) {
                out.push(ans);
            }
        }
    }
    out
}

/// All answers to `goal` under the global policy (semi-naive evaluation).
pub fn answers(gp: &GlobalPolicy, goal: &Atom) -> Result<Vec<Atom>, OracleError> {
    let model = least_model(gp, goal, true)?;
    Ok(goal_answers(&model, goal, &mut 1_000_000))
}

/// Same result computed with naive full-pass iteration; used to cross-check
/// the semi-naive implementation.
pub fn answers_naive(gp: &GlobalPolicy, goal: &Atom) -> Result<Vec<Atom>, OracleError> {
    let model = least_model(gp, goal, false)?;
    Ok(goal_answers(&model, goal, &mut 1_000_000))
}

/// Two answer sets compared up to renaming/subsumption, with witnesses for
/// each direction of failure.
#[derive(Clone, Debug, Default)]
pub struct EquivalenceReport {
    pub missing_from_gem: Vec<Atom>,
    pub unexpected_in_gem: Vec<Atom>,
}

impl EquivalenceReport {
    pub fn equivalent(&self) -> bool {
        self.missing_from_gem.is_empty() && self.unexpected_in_gem.is_empty()
    }
}

/// Compare the distributed engine's answers against the oracle's: every
/// oracle answer must be covered by (an at least as general) engine answer
/// and vice versa.
pub fn check_equivalence(gem: &[Atom], oracle: &[Atom]) -> EquivalenceReport {
    EquivalenceReport {
        missing_from_gem: oracle
            .iter()
            .filter(|o| !gem.iter().any(|g| subsumes(g, o)))
            .cloned()
            .collect(),
        unexpected_in_gem: gem
            .iter()
            .filter(|g| !oracle.iter().any(|o| subsumes(o, g)))
            .cloned()
            .collect(),
    }
}

/// Does any instantiation of `goal` reach a negation cycle? Convenience
/// predicate for tests pairing oracle errors with engine floundering.
pub fn has_reachable_negation_cycle(gp: &GlobalPolicy, goal: &Atom) -> bool {
    matches!(answers(gp, goal), Err(OracleError::NegationCycle(_)))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::policy::{parse_atom, parse_policy};

    fn gp(policies: &[(&str, &str)]) -> GlobalPolicy {
        GlobalPolicy {
            policies: policies
                .iter()
                .map(|(owner, src)| parse_policy(src, owner).unwrap())
                .collect(),
        }
    }

    fn atoms(strs: &[&str]) -> Vec<Atom> {
        strs.iter().map(|s| parse_atom(s).unwrap()).collect()
    }

    #[test]
    fn evaluates_a_cross_principal_loop() {
        let gp = gp(&[
            (
                "c1",
                "memberOfAlpha(c1,X) :- projectPartner(mc,Y), memberOfAlpha(Y,X).",
            ),
            ("mc", "projectPartner(mc,c2). projectPartner(mc,c3)."),
            (
                "c2",
                "memberOfAlpha(c2,X) :- memberOfAlpha(c1,X). memberOfAlpha(c2,alice).",
            ),
            ("c3", "memberOfAlpha(c3,bob)."),
        ]);
        let goal = parse_atom("memberOfAlpha(c1,X)").unwrap();
        let got = answers(&gp, &goal).unwrap();
        let want = atoms(&["memberOfAlpha(c1,alice)", "memberOfAlpha(c1,bob)"]);
        assert!(check_equivalence(&got, &want).equivalent(), "{got:?}");
        let naive = answers_naive(&gp, &goal).unwrap();
        assert!(check_equivalence(&naive, &want).equivalent());
    }

    #[test]
    fn stratified_negation() {
        let gp = gp(&[
            ("a", "p(a,X) :- q(a,X), not(r(a,X)). q(a,1). q(a,2). r(a,2)."),
        ]);
        let got = answers(&gp, &parse_atom("p(a,X)").unwrap()).unwrap();
        assert!(check_equivalence(&got, &atoms(&["p(a,1)"])).equivalent(), "{got:?}");
    }

    #[test]
    fn negation_cycle_is_reported() {
        let gp = gp(&[("a", "p(a,X) :- q(a,X), not(p(a,X)). q(a,1).")]);
        let goal = parse_atom("p(a,X)").unwrap();
        assert!(matches!(answers(&gp, &goal), Err(OracleError::NegationCycle(_))));
        assert!(has_reachable_negation_cycle(&gp, &goal));
    }

    #[test]
    fn unreachable_negation_cycle_is_ignored() {
        let gp = gp(&[(
            "a",
            "p(a,X) :- q(a,X), not(p(a,X)). q(a,1). s(a,2).",
        )]);
        let got = answers(&gp, &parse_atom("s(a,X)").unwrap()).unwrap();
        assert!(check_equivalence(&got, &atoms(&["s(a,2)"])).equivalent());
    }

    #[test]
    fn non_ground_facts_yield_general_answers() {
        let gp = gp(&[("a", "p(a,X). q(a,Y) :- p(a,Y).")]);
        let got = answers(&gp, &parse_atom("q(a,Z)").unwrap()).unwrap();
        assert!(check_equivalence(&got, &atoms(&["q(a,Z)"])).equivalent(), "{got:?}");
    }
}
