//! Generators for the three experiment policy families.
//!
//! Each family is a parametric global policy whose call graph grows with
//! the variant index; fact scaling multiplies the extensional part only.
//!
//! Canonical clause order (message counts depend on it):
//! * within every principal, rules come before facts;
//! * a principal with both a "descend" rule and a loop-back rule lists the
//!   descend rule first (families 2 and 3), except the per-level companies
//!   of family 1, whose only rule is the loop-back;
//! * facts are listed in generated order.
//!
//! Family 1 (chained single loops): level 0 is the four-principal policy
//! with one loop (c1 ← mc1 facts → c2 loops back to c1, c3 a leaf). Each
//! further level k turns the previous leaf c_{2k+1} into a pure hub
//! delegating to mc_{k+1}, adds a looping company c_{2k+2} with two facts,
//! and a new leaf c_{2k+3} with one fact. mc principals always hold
//! exactly two facts and are never scaled.
//!
//! Family 2 (two nested loops plus a growing side chain): the base is the
//! diamond c1 → {c2, c3} → c4 → c2 with loops c2 → c1 and c4 → c2; the
//! c3 arm re-evaluates the c4 subgraph as side requests. Variant m adds m
//! further arms from c1 into a chain of delegating principals that ends
//! at c3 (c1 → c5 → c3, c1 → c6 → c5, and so on).
//!
//! Family 3 (stacked diamonds): variant m stacks m+1 copies of the family
//! 2 base diamond; the join principal of each level is the apex of the
//! next. Index 0 coincides with family 2 index 0.

use crate::ident::IdGenMode;
use crate::policy::{Atom, Clause, Literal, Policy, Term};
use crate::transport::Scheduler;

use super::{PrincipalDecl, Scenario};

#[derive(Debug, thiserror::Error)]
pub enum GenerateError {
    #[error("unknown family {0}; families are 1, 2 and 3")]
    Family(u32),
    #[error("index {0} out of range; indices are 0..=5")]
    Index(u32),
    #[error("fact scale {0} not supported; scales are 1, 10, 50 and 100")]
    Scale(u32),
    #[error("variant {family}.{index} has no scaled row; only 1.0, 1.5, 2.0, 2.5 and 3.2 scale")]
    UnscaledVariant { family: u32, index: u32 },
}

const MEMBER: &str = "memberOfAlpha";
const PARTNER: &str = "projectPartner";

fn c(s: &str) -> Term {
    Term::Const(s.to_string())
}

fn v(s: &str) -> Term {
    Term::Var(s.to_string())
}

fn member(loc: Term, arg: Term) -> Atom {
    Atom::new(MEMBER, vec![loc, arg])
}

/// `memberOfAlpha(owner,X) :- memberOfAlpha(target,X).`
fn delegation(owner: &str, target: &str) -> Clause {
    Clause {
        head: member(c(owner), v("X")),
        body: vec![Literal::pos(member(c(target), v("X")))],
    }
}

/// One membership fact, replicated `scale` times with distinct members.
fn push_facts(policy: &mut Policy, owner: &str, base: &str, scale: u32) {
    for i in 1..=scale {
        let name = if scale == 1 { base.to_string() } else { format!("{base}_{i}") };
        policy.clauses.push(Clause::fact(member(c(owner), Term::Const(name))));
    }
}

/// Generate the scenario for `family` (1..=3), variant `index` (0..=5),
/// with extensional policies multiplied by `fact_scale`.
pub fn generate_variant(family: u32, index: u32, fact_scale: u32) -> Result<Scenario, GenerateError> {
    if !(1..=3).contains(&family) {
        return Err(GenerateError::Family(family));
    }
    if index > 5 {
        return Err(GenerateError::Index(index));
    }
    if ![1, 10, 50, 100].contains(&fact_scale) {
        return Err(GenerateError::Scale(fact_scale));
    }
    if fact_scale > 1 {
        let scaled = [(1, 0), (1, 5), (2, 0), (2, 5), (3, 2)];
        if !scaled.contains(&(family, index)) {
            return Err(GenerateError::UnscaledVariant { family, index });
        }
    }
    let policies = match family {
        1 => family1(index, fact_scale),
        2 => family2(index, fact_scale),
        _ => family3(index, fact_scale),
    };
    let mut principals = vec![PrincipalDecl {
        name: "h".to_string(),
        policy: Policy::new("h"),
        listen: None,
    }];
    principals.extend(policies.into_iter().map(|policy| PrincipalDecl {
        name: policy.owner.clone(),
        policy,
        listen: None,
    }));
    let suffix = match fact_scale {
        10 => "a",
        50 => "b",
        100 => "c",
        _ => "",
    };
    Ok(Scenario {
        name: format!("{family}.{index}{suffix}"),
        principals,
        requester: "h".to_string(),
        goal: member(c("c1"), v("X")),
        id_mode: IdGenMode::default(),
        scheduler: Scheduler::Fifo,
        seed: 0,
        warnings: Vec::new(),
    })
}

fn family1(k: u32, scale: u32) -> Vec<Policy> {
    let mut out = Vec::new();
    // Hubs: c1 and, for deeper variants, every previous leaf c_{2j+1}.
    for j in 0..=k {
        let hub = if j == 0 { "c1".to_string() } else { format!("c{}", 2 * j + 1) };
        let mc = format!("mc{}", j + 1);
        let mut p = Policy::new(&hub);
        p.clauses.push(Clause {
            head: member(c(&hub), v("X")),
            body: vec![
                Literal::pos(Atom::new(PARTNER, vec![c(&mc), v("Y")])),
                Literal::pos(member(v("Y"), v("X"))),
            ],
        });
        out.push(p);

        // The matchmaker holds exactly two facts and is never scaled.
        let looper = format!("c{}", 2 * j + 2);
        let leaf = format!("c{}", 2 * j + 3);
        let mut p = Policy::new(&mc);
        p.clauses.push(Clause::fact(Atom::new(PARTNER, vec![c(&mc), c(&looper)])));
        p.clauses.push(Clause::fact(Atom::new(PARTNER, vec![c(&mc), c(&leaf)])));
        out.push(p);

        // The looping company: loop-back rule, then its facts. Level 0 is
        // the base policy with a single fact (alice); deeper levels carry
        // two facts each.
        let mut p = Policy::new(&looper);
        p.clauses.push(delegation(&looper, &hub));
        if j == 0 {
            push_facts(&mut p, &looper, "alice", scale);
        } else {
            push_facts(&mut p, &looper, &format!("m{}a", 2 * j + 2), scale);
            push_facts(&mut p, &looper, &format!("m{}b", 2 * j + 2), scale);
        }
        out.push(p);
    }
    // The final leaf holds one fact (bob at level 0).
    let leaf = format!("c{}", 2 * k + 3);
    let mut p = Policy::new(&leaf);
    if k == 0 {
        push_facts(&mut p, &leaf, "bob", scale);
    } else {
        push_facts(&mut p, &leaf, &format!("m{}a", 2 * k + 3), scale);
    }
    out.push(p);
    out
}

fn family2(m: u32, scale: u32) -> Vec<Policy> {
    let mut out = Vec::new();
    // Apex: arms to c2, c3, and one extra arm per chain principal.
    let mut p = Policy::new("c1");
    p.clauses.push(delegation("c1", "c2"));
    p.clauses.push(delegation("c1", "c3"));
    for j in 1..=m {
        p.clauses.push(delegation("c1", &format!("c{}", 4 + j)));
    }
    out.push(p);

    // c2: descend to c4, facts, loop back to c1.
    let mut p = Policy::new("c2");
    p.clauses.push(delegation("c2", "c4"));
    push_facts(&mut p, "c2", "alice", scale);
    p.clauses.push(delegation("c2", "c1"));
    out.push(p);

    // c3: facts, then descend to c4 (re-evaluated as side requests).
    let mut p = Policy::new("c3");
    push_facts(&mut p, "c3", "bob", scale);
    p.clauses.push(delegation("c3", "c4"));
    out.push(p);

    // c4: loop back to c2.
    let mut p = Policy::new("c4");
    p.clauses.push(delegation("c4", "c2"));
    out.push(p);

    // Side chain c5..c_{4+m}, each delegating one step down toward c3.
    for j in 1..=m {
        let name = format!("c{}", 4 + j);
        let next = if j == 1 { "c3".to_string() } else { format!("c{}", 4 + j - 1) };
        let mut p = Policy::new(&name);
        p.clauses.push(delegation(&name, &next));
        out.push(p);
    }
    out
}

fn family3(m: u32, scale: u32) -> Vec<Policy> {
    // Level j apex a_j = c_{3j+1}, loop company b_j = c_{3j+2}, side
    // company s_j = c_{3j+3}; the join a_{j+1} = c_{3j+4} is the next
    // level's apex.
    let name = |n: u32| format!("c{n}");
    let mut out = Vec::new();
    for j in 0..=m {
        let a = name(3 * j + 1);
        let b = name(3 * j + 2);
        let s = name(3 * j + 3);
        let join = name(3 * j + 4);

        let mut p = Policy::new(&a);
        if j > 0 {
            // Non-top apexes first close the previous level's loop.
            p.clauses.push(delegation(&a, &name(3 * (j - 1) + 2)));
        }
        p.clauses.push(delegation(&a, &b));
        p.clauses.push(delegation(&a, &s));
        out.push(p);

        let mut p = Policy::new(&b);
        p.clauses.push(delegation(&b, &join));
        if j == 0 {
            push_facts(&mut p, &b, "alice", scale);
        } else {
            push_facts(&mut p, &b, &format!("b{j}m"), scale);
        }
        p.clauses.push(delegation(&b, &a));
        out.push(p);

        let mut p = Policy::new(&s);
        if j == 0 {
            push_facts(&mut p, &s, "bob", scale);
        } else {
            push_facts(&mut p, &s, &format!("s{j}m"), scale);
        }
        p.clauses.push(delegation(&s, &join));
        out.push(p);
    }
    // The terminal join only loops back to the last level's loop company.
    let mut p = Policy::new(&name(3 * m + 4));
    p.clauses.push(delegation(&name(3 * m + 4), &name(3 * m + 2)));
    out.push(p);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn family1_index0_is_the_base_policy() {
        let s = generate_variant(1, 0, 1).unwrap();
        assert_eq!(s.name, "1.0");
        assert_eq!(s.clause_count(), 6);
        assert_eq!(s.principal_names(), ["h", "c1", "mc1", "c2", "c3"]);
    }

    #[test]
    fn family1_clause_counts_grow_by_six() {
        for k in 0..=5u32 {
            let s = generate_variant(1, k, 1).unwrap();
            assert_eq!(s.clause_count() as u32, 6 + 6 * k, "variant 1.{k}");
        }
    }

    #[test]
    fn family2_index0_has_the_published_shape() {
        let s = generate_variant(2, 0, 1).unwrap();
        assert_eq!(s.clause_count(), 8);
        assert_eq!(s.principal_names(), ["h", "c1", "c2", "c3", "c4"]);
    }

    #[test]
    fn family3_index0_matches_family2_index0() {
        let a = generate_variant(2, 0, 1).unwrap();
        let b = generate_variant(3, 0, 1).unwrap();
        let clauses = |s: &Scenario| {
            s.principals
                .iter()
                .flat_map(|p| p.policy.clauses.iter().map(|c| c.to_string()))
                .collect::<Vec<_>>()
        };
        assert_eq!(clauses(&a), clauses(&b));
    }

    #[test]
    fn scaling_multiplies_facts_but_not_matchmakers() {
        let s = generate_variant(1, 0, 10).unwrap();
        assert_eq!(s.name, "1.0a");
        // 1 rule + 2 matchmaker facts + (1 rule + 10 facts) + 10 facts.
        assert_eq!(s.clause_count(), 24);
        let s = generate_variant(2, 0, 100).unwrap();
        assert_eq!(s.clause_count(), 206);
    }

    #[test]
    fn rejects_out_of_range_parameters() {
        assert!(matches!(generate_variant(4, 0, 1), Err(GenerateError::Family(4))));
        assert!(matches!(generate_variant(1, 6, 1), Err(GenerateError::Index(6))));
        assert!(matches!(generate_variant(1, 0, 7), Err(GenerateError::Scale(7))));
        assert!(matches!(
            generate_variant(2, 1, 10),
            Err(GenerateError::UnscaledVariant { .. })
        ));
    }
}
