//! Scenario files: a set of principals with their policies, one initial
//! request, and optional configuration.
//!
//! ```text
//! [config]
//! identifiers = traceable        % traceable | untraceable (default)
//! lengths = variable             % variable (default) | fixed
//! fixed_length = 12
//! scheduler = fifo               % fifo (default) | random
//! seed = 7
//!
//! [principal c1]
//! % listen = 127.0.0.1:7101     (TCP transport only)
//! memberOfAlpha(c1,X) :- projectPartner(mc,Y), memberOfAlpha(Y,X).
//!
//! [request]
//! requester = h
//! goal = memberOfAlpha(c1,X)
//! ```

use std::collections::BTreeSet;
use std::fmt::Write as _;
use std::path::Path;

use crate::ident::{IdGenMode, SegmentLength, Traceability};
use crate::policy::{parse_atom, parse_clauses, Atom, Policy, Term};
use crate::transport::Scheduler;

/// One declared principal.
#[derive(Clone, Debug)]
pub struct PrincipalDecl {
    pub name: String,
    pub policy: Policy,
    /// TCP listen address; simulated transport ignores it.
    pub listen: Option<String>,
}

/// A fully validated scenario.
#[derive(Clone, Debug)]
pub struct Scenario {
    /// Report identifier (file stem or generator variant name).
    pub name: String,
    pub principals: Vec<PrincipalDecl>,
    pub requester: String,
    pub goal: Atom,
    pub id_mode: IdGenMode,
    pub scheduler: Scheduler,
    pub seed: u64,
    /// Load-time warnings (e.g. non-ground facts).
    pub warnings: Vec<String>,
}

#[derive(Debug, thiserror::Error)]
pub enum ScenarioError {
    #[error("{path}: {err}")]
    Io { path: String, err: std::io::Error },
    #[error("line {line}: {msg}")]
    Syntax { line: usize, msg: String },
    #[error("principal `{owner}`, {err}")]
    Clause { owner: String, err: crate::policy::ParseError },
    #[error("{0}")]
    Invalid(String),
}

impl Scenario {
    /// Names of all declared principals.
    pub fn principal_names(&self) -> Vec<&str> {
        self.principals.iter().map(|p| p.name.as_str()).collect()
    }

    /// Total number of clauses over all policies.
    pub fn clause_count(&self) -> usize {
        self.principals.iter().map(|p| p.policy.clauses.len()).sum()
    }
}

/// Load and validate a scenario file.
pub fn load_scenario(path: impl AsRef<Path>) -> Result<Scenario, ScenarioError> {
    let path = path.as_ref();
    let text = std::fs::read_to_string(path).map_err(|err| ScenarioError::Io {
        path: path.display().to_string(),
        err,
    })?;
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_else(|| "scenario".to_string());
    parse_scenario(&text, &name)
}

enum Section {
    None,
    Config,
    Principal(usize),
    Request,
}

/// Parse and validate scenario text.
pub fn parse_scenario(text: &str, name: &str) -> Result<Scenario, ScenarioError> {
    let mut principals: Vec<(String, String, Option<String>)> = Vec::new(); // name, clause text, listen
    let mut requester = None;
    let mut goal_text: Option<String> = None;
    let mut traceability = Traceability::Untraceable;
    let mut lengths = SegmentLength::Variable;
    let mut fixed_length = 12usize;
    let mut scheduler_random = false;
    let mut seed = 0u64;
    let mut section = Section::None;

    let syntax = |line: usize, msg: String| ScenarioError::Syntax { line, msg };

    for (ix, raw) in text.lines().enumerate() {
        let lineno = ix + 1;
        let line = strip_comment(raw).trim().to_string();
        if line.is_empty() {
            continue;
        }
        if let Some(rest) = line.strip_prefix('[') {
            let Some(head) = rest.strip_suffix(']') else {
                return Err(syntax(lineno, "unterminated section header".into()));
            };
            let mut parts = head.split_whitespace();
            match parts.next() {
                Some("config") => section = Section::Config,
                Some("request") => section = Section::Request,
                Some("principal") => {
                    let Some(pname) = parts.next() else {
                        return Err(syntax(lineno, "missing principal name".into()));
                    };
                    if principals.iter().any(|(n, _, _)| n == pname) {
                        return Err(syntax(lineno, format!("principal `{pname}` declared twice")));
                    }
                    principals.push((pname.to_string(), String::new(), None));
                    section = Section::Principal(principals.len() - 1);
                }
                other => {
                    return Err(syntax(lineno, format!("unknown section `{other:?}`")));
                }
            }
            continue;
        }
        match section {
            Section::None => {
                return Err(syntax(lineno, "content before the first section header".into()))
            }
            Section::Config => {
                let (k, v) = key_value(&line).ok_or_else(|| {
                    syntax(lineno, "expected `key = value` in [config]".into())
                })?;
                match k.as_str() {
                    "identifiers" => {
                        traceability = match v.as_str() {
                            "traceable" => Traceability::Traceable,
                            "untraceable" => Traceability::Untraceable,
                            other => {
                                return Err(syntax(lineno, format!("unknown identifiers mode `{other}`")))
                            }
                        }
                    }
                    "lengths" => match v.as_str() {
                        "fixed" => lengths = SegmentLength::Fixed(fixed_length),
                        "variable" => lengths = SegmentLength::Variable,
                        other => {
                            return Err(syntax(lineno, format!("unknown lengths mode `{other}`")))
                        }
                    },
                    "fixed_length" => {
                        fixed_length = v
                            .parse()
                            .map_err(|e| syntax(lineno, format!("bad fixed_length: {e}")))?;
                        if matches!(lengths, SegmentLength::Fixed(_)) {
                            lengths = SegmentLength::Fixed(fixed_length);
                        }
                    }
                    "scheduler" => match v.as_str() {
                        "fifo" => scheduler_random = false,
                        "random" => scheduler_random = true,
                        other => {
                            return Err(syntax(lineno, format!("unknown scheduler `{other}`")))
                        }
                    },
                    "seed" => {
                        seed = v.parse().map_err(|e| syntax(lineno, format!("bad seed: {e}")))?
                    }
                    other => return Err(syntax(lineno, format!("unknown config key `{other}`"))),
                }
            }
            Section::Principal(pix) => {
                if let Some((k, v)) = key_value(&line) {
                    if k == "listen" {
                        principals[pix].2 = Some(v);
                        continue;
                    }
                }
                principals[pix].1.push_str(&line);
                principals[pix].1.push('\n');
            }
            Section::Request => {
                // One `key = value` per line, or the inline form
                // `requester = h, goal = m(c1,X)`; the goal comes last
                // because atoms themselves contain commas.
                let mut pieces = Vec::new();
                if let Some(ix) = find_goal_split(&line) {
                    pieces.push(line[..ix].trim_end().trim_end_matches(',').trim().to_string());
                    pieces.push(line[ix..].trim().to_string());
                } else {
                    pieces.push(line.clone());
                }
                for piece in pieces.iter().filter(|p| !p.is_empty()) {
                    let (k, v) = key_value(piece).ok_or_else(|| {
                        syntax(lineno, "expected `key = value` in [request]".into())
                    })?;
                    match k.as_str() {
                        "requester" => requester = Some(v),
                        "goal" => goal_text = Some(v),
                        other => {
                            return Err(syntax(lineno, format!("unknown request key `{other}`")))
                        }
                    }
                }
            }
        }
    }

    let requester =
        requester.ok_or_else(|| ScenarioError::Invalid("missing requester in [request]".into()))?;
    let goal_text =
        goal_text.ok_or_else(|| ScenarioError::Invalid("missing goal in [request]".into()))?;
    let goal = parse_atom(&goal_text)
        .map_err(|e| ScenarioError::Invalid(format!("bad goal `{goal_text}`: {e}")))?;

    let mut decls = Vec::new();
    let mut warnings = Vec::new();
    for (pname, body, listen) in principals {
        let clauses = parse_clauses(&body)
            .map_err(|err| ScenarioError::Clause { owner: pname.clone(), err })?;
        let mut policy = Policy::new(&pname);
        for c in clauses {
            match c.head.location() {
                Term::Const(l) if *l == pname => {}
                l => {
                    return Err(ScenarioError::Invalid(format!(
                        "clause {} in [principal {pname}] is located at `{l}`",
                        c.head
                    )))
                }
            }
            policy.clauses.push(c);
        }
        for f in policy.non_ground_facts() {
            warnings.push(format!("principal {pname}: non-ground fact {f}"));
        }
        decls.push(PrincipalDecl { name: pname, policy, listen });
    }

    // Every constant location in a body (and the goal) must be declared.
    let declared: BTreeSet<&str> = decls.iter().map(|p| p.name.as_str()).collect();
    for p in &decls {
        for c in &p.policy.clauses {
            for l in &c.body {
                if let Term::Const(loc) = l.atom.location() {
                    if !declared.contains(loc.as_str()) {
                        return Err(ScenarioError::Invalid(format!(
                            "body atom {} in [principal {}] names undeclared principal `{loc}`",
                            l.atom, p.name
                        )));
                    }
                }
            }
        }
    }
    if !declared.contains(requester.as_str()) {
        return Err(ScenarioError::Invalid(format!("requester `{requester}` not declared")));
    }
    if let Term::Const(loc) = goal.location() {
        if !declared.contains(loc.as_str()) {
            return Err(ScenarioError::Invalid(format!(
                "goal {goal} names undeclared principal `{loc}`"
            )));
        }
    }

    Ok(Scenario {
        name: name.to_string(),
        principals: decls,
        requester,
        goal,
        id_mode: IdGenMode { traceability, length: lengths },
        scheduler: if scheduler_random { Scheduler::Random(seed) } else { Scheduler::Fifo },
        seed,
        warnings,
    })
}

/// Byte index where an inline `goal = …` key starts after a comma, if any.
fn find_goal_split(line: &str) -> Option<usize> {
    for (i, _) in line.match_indices(',') {
        let tail = line[i + 1..].trim_start();
        if let Some(after) = tail.strip_prefix("goal") {
            if after.trim_start().starts_with('=') {
                return Some(i + 1 + (line[i + 1..].len() - tail.len()));
            }
        }
    }
    None
}

fn strip_comment(line: &str) -> &str {
    // `%` starts a comment unless inside a quoted constant.
    let mut quoted = false;
    for (i, c) in line.char_indices() {
        match c {
            '\'' => quoted = !quoted,
            '%' if !quoted => return &line[..i],
            _ => {}
        }
    }
    line
}

fn key_value(line: &str) -> Option<(String, String)> {
    let (k, v) = line.split_once('=')?;
    let k = k.trim();
    if k.is_empty() || k.contains(|c: char| c.is_whitespace()) || k.contains('(') {
        return None;
    }
    Some((k.to_string(), v.trim().to_string()))
}

/// Render a scenario back to file syntax.
pub fn format_scenario(s: &Scenario) -> String {
    let mut out = String::new();
    let _ = writeln!(out, "% scenario {}", s.name);
    let mut config = Vec::new();
    if s.id_mode.traceability == Traceability::Traceable {
        config.push("identifiers = traceable".to_string());
    }
    if let SegmentLength::Fixed(n) = s.id_mode.length {
        config.push("lengths = fixed".to_string());
        config.push(format!("fixed_length = {n}"));
    }
    if let Scheduler::Random(seed) = s.scheduler {
        config.push("scheduler = random".to_string());
        config.push(format!("seed = {seed}"));
    }
    if !config.is_empty() {
        let _ = writeln!(out, "\n[config]");
        for line in config {
            let _ = writeln!(out, "{line}");
        }
    }
    for p in &s.principals {
        let _ = writeln!(out, "\n[principal {}]", p.name);
        if let Some(addr) = &p.listen {
            let _ = writeln!(out, "listen = {addr}");
        }
        for c in &p.policy.clauses {
            let _ = writeln!(out, "{c}");
        }
    }
    let _ = writeln!(out, "\n[request]");
    let _ = writeln!(out, "requester = {}", s.requester);
    let _ = writeln!(out, "goal = {}", s.goal);
    out
}

#[cfg(test)]
mod tests {
    use super::*;

    const EXAMPLE: &str = "\
[config]
identifiers = traceable

[principal h]

[principal c1]
memberOfAlpha(c1,X) :- projectPartner(mc,Y), memberOfAlpha(Y,X).

[principal mc]
projectPartner(mc,c2).
projectPartner(mc,c3).

[principal c2]
memberOfAlpha(c2,X) :- memberOfAlpha(c1,X). % loop back to c1
memberOfAlpha(c2,alice).

[principal c3]
memberOfAlpha(c3,bob).

[request]
requester = h
goal = memberOfAlpha(c1,X)
";

    #[test]
    fn parses_and_round_trips() {
        let s = parse_scenario(EXAMPLE, "example").unwrap();
        assert_eq!(s.principal_names(), ["h", "c1", "mc", "c2", "c3"]);
        assert_eq!(s.clause_count(), 6);
        assert_eq!(s.requester, "h");
        assert_eq!(s.goal.to_string(), "memberOfAlpha(c1,X)");
        assert_eq!(s.id_mode.traceability, Traceability::Traceable);
        assert!(s.warnings.is_empty());

        let rendered = format_scenario(&s);
        let s2 = parse_scenario(&rendered, "example").unwrap();
        assert_eq!(s2.clause_count(), 6);
        assert_eq!(s2.goal, s.goal);
        assert_eq!(s2.id_mode, s.id_mode);
    }

    #[test]
    fn rejects_undeclared_body_location() {
        let bad =
            EXAMPLE.replace("memberOfAlpha(c1,X) :- ", "memberOfAlpha(c1,X) :- q(nowhere,Z), ");
        let err = parse_scenario(&bad, "bad").unwrap_err();
        assert!(err.to_string().contains("undeclared principal `nowhere`"), "{err}");
    }

    #[test]
    fn rejects_foreign_clause_in_principal_section() {
        let bad = EXAMPLE.replace("memberOfAlpha(c3,bob).", "memberOfAlpha(c9,bob).");
        let err = parse_scenario(&bad, "bad").unwrap_err();
        assert!(err.to_string().contains("located at `c9`"), "{err}");
    }

    #[test]
    fn warns_on_non_ground_facts() {
        let s = parse_scenario(
            &EXAMPLE.replace("memberOfAlpha(c3,bob).", "memberOfAlpha(c3,Z)."),
            "warned",
        )
        .unwrap();
        assert_eq!(s.warnings.len(), 1);
        assert!(s.warnings[0].contains("non-ground fact"));
    }

    #[test]
    fn inline_request_form_is_accepted() {
        let s = parse_scenario(
            &EXAMPLE.replace(
                "requester = h\ngoal = memberOfAlpha(c1,X)",
                "requester = h, goal = memberOfAlpha(c1,X)",
            ),
            "inline",
        )
        .unwrap();
        assert_eq!(s.requester, "h");
        assert_eq!(s.goal.to_string(), "memberOfAlpha(c1,X)");
    }
}
