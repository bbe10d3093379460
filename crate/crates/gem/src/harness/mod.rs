//! Scenario files, policy-family generators, the run driver, and metrics
//! reporting.

mod generate;
mod scenario;

pub use generate::{generate_variant, GenerateError};
pub use scenario::{
    format_scenario, load_scenario, parse_scenario, PrincipalDecl, Scenario, ScenarioError,
};

use std::fmt::Write as _;
use std::time::Duration;

use crate::engine::{Event, PrincipalEngine};
use crate::ident::IdGen;
use crate::oracle::GlobalPolicy;
use crate::transport::{
    check_order_compatibility, tcp, Outcome, RunError, Scheduler, SimNetwork,
};

/// Default ceiling on deliveries before a run is declared stuck.
pub const DEFAULT_STEP_BUDGET: u64 = 1_000_000;

/// The counters of one run, as reported in the experiment tables.
#[derive(Clone, Debug, Default, PartialEq, Eq)]
pub struct RunMetrics {
    pub id: String,
    /// Principals that evaluated at least one goal.
    pub princ: u64,
    /// Tables created.
    pub tab: u64,
    /// Distinct clauses instantiated in some table.
    pub clauses: u64,
    /// Requests sent (including the initial one).
    pub req: u64,
    /// Lower requests recognized (loops).
    pub loops: u64,
    /// Responses sent.
    pub resp: u64,
    /// Responses carrying at least one answer.
    pub resp_with_answers: u64,
    /// Answers transmitted, summed over all responses.
    pub ans: u64,
    /// Requests answered from a settled table's cache (no new table, no
    /// loop). Zero on the benchmark scenarios; not a reported column.
    pub cached: u64,
}

impl RunMetrics {
    /// The structural identities every run must satisfy.
    pub fn validate(&self) -> Result<(), String> {
        if self.req != self.tab + self.loops + self.cached {
            return Err(format!(
                "{}: req ({}) != tab ({}) + loops ({}) + cached ({})",
                self.id, self.req, self.tab, self.loops, self.cached
            ));
        }
        if self.resp < self.req {
            return Err(format!("{}: resp ({}) < req ({})", self.id, self.resp, self.req));
        }
        if self.resp_with_answers > self.resp {
            return Err(format!(
                "{}: resp_with_answers ({}) > resp ({})",
                self.id, self.resp_with_answers, self.resp
            ));
        }
        if self.ans < self.resp_with_answers {
            return Err(format!(
                "{}: ans ({}) < resp_with_answers ({})",
                self.id, self.ans, self.resp_with_answers
            ));
        }
        Ok(())
    }
}

/// Everything a run produces.
#[derive(Debug)]
pub struct RunReport {
    pub outcome: Outcome,
    pub metrics: RunMetrics,
    pub events: Vec<Event>,
    /// Principals whose engines floundered at least one goal.
    pub floundered_principals: Vec<String>,
}

/// A failed run (distinct from a flounder outcome, which is a result).
#[derive(Debug, thiserror::Error)]
pub enum HarnessError {
    #[error(transparent)]
    Run(#[from] RunError),
    #[error("termination violated: {0}")]
    Termination(String),
    #[error("metrics invariant violated: {0}")]
    Metrics(String),
    #[error("identifier order violated: {0}")]
    IdentOrder(String),
    #[error(transparent)]
    Tcp(#[from] tcp::TcpError),
}

fn build_engines(scenario: &Scenario) -> Vec<PrincipalEngine> {
    scenario
        .principals
        .iter()
        .enumerate()
        .map(|(ix, p)| {
            let gen = IdGen::new(&p.name, ix as u64, scenario.id_mode, scenario.seed);
            PrincipalEngine::new(p.policy.clone(), gen)
        })
        .collect()
}

/// The union of a scenario's policies, for the oracle.
pub fn global_policy(scenario: &Scenario) -> GlobalPolicy {
    GlobalPolicy {
        policies: scenario.principals.iter().map(|p| p.policy.clone()).collect(),
    }
}

/// Run a scenario on the simulated bus with its configured scheduler.
pub fn run(scenario: &Scenario) -> Result<RunReport, HarnessError> {
    run_with(scenario, scenario.scheduler, DEFAULT_STEP_BUDGET)
}

/// Run a scenario on the simulated bus under an explicit scheduler.
pub fn run_with(
    scenario: &Scenario,
    scheduler: Scheduler,
    step_budget: u64,
) -> Result<RunReport, HarnessError> {
    let engines = build_engines(scenario);
    let mut net = SimNetwork::new(engines, scheduler, step_budget);
    let outcome = net.run(&scenario.requester, scenario.goal.clone())?;

    // Termination: every table disposed, higher request cleared, no lower
    // requests or loop counters left (answers are retained).
    for e in net.engines() {
        for t in e.tables() {
            if !t.is_disposed() || t.hr.is_some() || !t.lr.is_empty() || !t.active_goals.is_empty()
            {
                return Err(HarnessError::Termination(format!(
                    "{}: table for {} not quiescent (disposed={}, hr={}, lr={}, counters={})",
                    e.principal(),
                    t.goal,
                    t.is_disposed(),
                    t.hr.is_some(),
                    t.lr.len(),
                    t.active_goals.len()
                )));
            }
        }
    }

    // Identifier order compatibility over every id minted in the run.
    let mut ids = Vec::new();
    let mut orders = crate::ident::SiblingOrders::default();
    for e in net.engines() {
        for t in e.tables() {
            ids.extend(t.nodes.iter().map(|n| n.id.clone()));
        }
        orders.merge_from(e.id_gen().orders());
    }
    check_order_compatibility(&ids, &orders, 40, 100_000).map_err(HarnessError::IdentOrder)?;

    let mut metrics = RunMetrics {
        id: scenario.name.clone(),
        req: net.counts.requests,
        resp: net.counts.responses,
        resp_with_answers: net.counts.responses_with_answers,
        ans: net.counts.answers,
        ..RunMetrics::default()
    };
    let mut floundered_principals = Vec::new();
    for e in net.engines() {
        metrics.tab += e.tables_created();
        metrics.loops += e.loops_detected();
        metrics.cached += e.cached_responses();
        metrics.clauses += e.clauses_used();
        if e.tables_created() > 0 {
            metrics.princ += 1;
        }
        if e.floundered() {
            floundered_principals.push(e.principal().to_string());
        }
    }
    metrics.validate().map_err(HarnessError::Metrics)?;

    Ok(RunReport { outcome, metrics, events: net.events, floundered_principals })
}

/// Run a scenario over the TCP transport (one thread per principal).
pub fn run_tcp(scenario: &Scenario, timeout: Duration) -> Result<RunReport, HarnessError> {
    let engines = build_engines(scenario);
    let listen = scenario
        .principals
        .iter()
        .filter_map(|p| p.listen.clone().map(|a| (p.name.clone(), a)))
        .collect();
    let report = tcp::run(
        engines,
        &scenario.requester,
        scenario.goal.clone(),
        &listen,
        timeout,
    )?;
    let metrics = RunMetrics {
        id: scenario.name.clone(),
        princ: report.principals_with_tables,
        tab: report.tables,
        clauses: report.clauses,
        req: report.counts.requests,
        loops: report.loops,
        resp: report.counts.responses,
        resp_with_answers: report.counts.responses_with_answers,
        ans: report.counts.answers,
        cached: report.cached,
    };
    metrics.validate().map_err(HarnessError::Metrics)?;
    Ok(RunReport {
        outcome: report.outcome,
        metrics,
        events: report.events,
        floundered_principals: report.floundered_engines,
    })
}

/// Report output format.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ReportFormat {
    Table,
    Csv,
}

/// Render metrics rows with the experiment tables' column layout:
/// ID, Princ, Tab, Clauses, Req, Loops, Resp(Resp&Ans), Ans.
pub fn emit_report(rows: &[RunMetrics], format: ReportFormat) -> String {
    match format {
        ReportFormat::Table => {
            let mut cells: Vec<[String; 8]> = vec![[
                "ID".into(),
                "Princ".into(),
                "Tab".into(),
                "Clauses".into(),
                "Req".into(),
                "Loops".into(),
                "Resp(Resp&Ans)".into(),
                "Ans".into(),
            ]];
            for m in rows {
                cells.push([
                    m.id.clone(),
                    m.princ.to_string(),
                    m.tab.to_string(),
                    m.clauses.to_string(),
                    m.req.to_string(),
                    m.loops.to_string(),
                    format!("{} ({})", m.resp, m.resp_with_answers),
                    m.ans.to_string(),
                ]);
            }
            let mut widths = [0usize; 8];
            for row in &cells {
                for (w, c) in widths.iter_mut().zip(row) {
                    *w = (*w).max(c.len());
                }
            }
            let mut out = String::new();
            for row in &cells {
                for (i, (c, w)) in row.iter().zip(widths).enumerate() {
                    if i > 0 {
                        out.push_str("  ");
                    }
                    let _ = write!(out, "{c:<w$}");
                }
                out.push('\n');
            }
            out
        }
        ReportFormat::Csv => {
            let mut out =
                String::from("id,princ,tab,clauses,req,loops,resp,resp_with_answers,ans\n");
            for m in rows {
                let _ = writeln!(
                    out,
                    "{},{},{},{},{},{},{},{},{}",
                    csv_quote(&m.id),
                    m.princ,
                    m.tab,
                    m.clauses,
                    m.req,
                    m.loops,
                    m.resp,
                    m.resp_with_answers,
                    m.ans
                );
            }
            out
        }
    }
}

fn csv_quote(s: &str) -> String {
    if s.contains([',', '"', '\n']) {
        format!("\"{}\"", s.replace('"', "\"\""))
    } else {
        s.to_string()
    }
}

/// Parse back a CSV report produced by [`emit_report`].
pub fn parse_csv_report(input: &str) -> Result<Vec<RunMetrics>, String> {
    let mut rows = Vec::new();
    for (ix, line) in input.lines().enumerate() {
        if ix == 0 || line.trim().is_empty() {
            continue;
        }
        let fields = split_csv_line(line)?;
        if fields.len() != 9 {
            return Err(format!("line {}: expected 9 fields, got {}", ix + 1, fields.len()));
        }
        let num = |i: usize| -> Result<u64, String> {
            fields[i]
                .parse()
                .map_err(|e| format!("line {}: field {}: {e}", ix + 1, i + 1))
        };
        rows.push(RunMetrics {
            id: fields[0].clone(),
            princ: num(1)?,
            tab: num(2)?,
            clauses: num(3)?,
            req: num(4)?,
            loops: num(5)?,
            resp: num(6)?,
            resp_with_answers: num(7)?,
            ans: num(8)?,
            // Not a reported column; reconstructed from the identity
            // req = tab + loops + cached.
            cached: num(4)?.saturating_sub(num(2)? + num(5)?),
        });
    }
    Ok(rows)
}

fn split_csv_line(line: &str) -> Result<Vec<String>, String> {
    let mut out = Vec::new();
    let mut cur = String::new();
    let mut chars = line.chars().peekable();
    let mut quoted = false;
    while let Some(c) = chars.next() {
        match c {
            '"' if cur.is_empty() && !quoted => quoted = true,
            '"' if quoted => {
                if chars.peek() == Some(&'"') {
                    chars.next();
                    cur.push('"');
                } else {
                    quoted = false;
                }
            }
            ',' if !quoted => {
                out.push(std::mem::take(&mut cur));
            }
            c => cur.push(c),
        }
    }
    if quoted {
        return Err("unterminated quoted field".into());
    }
    out.push(cur);
    Ok(out)
}

/// Render the event log as numbered lines in the call-table notation.
pub fn format_event_log(events: &[Event]) -> String {
    let mut out = String::new();
    for (ix, e) in events.iter().enumerate() {
        let _ = writeln!(out, "{:>4}  {:<10}  {}", ix + 1, e.principal, e.detail);
    }
    out
}
