//! The per-principal evaluation engine.
//!
//! Each engine owns one principal's policy and a set of *tables*, one per
//! goal it has been asked to evaluate. A table holds the higher request
//! that created it, the lower requests that looped back into it, a partial
//! derivation tree, the answers derived so far (with the requests each
//! answer was already sent to), and one counter per loop the goal is
//! involved in. Loops are recognized purely from request identifiers: a
//! request whose identifier extends the table's higher request is a lower
//! request closing a loop.
//!
//! Processing is message-driven: [`PrincipalEngine::handle_request`] and
//! [`PrincipalEngine::handle_response`] update one table and queue outgoing
//! messages, which the transport layer drains with
//! [`PrincipalEngine::take_outbox`].

mod messages;

pub use messages::{Outbound, Payload, Request, Response, ResponseStatus};

use std::collections::{BTreeMap, BTreeSet, HashMap};
use std::fmt;

use crate::ident::{IdGen, RequestId};
use crate::policy::{
    rename_atom_apart, rename_clause_apart, subsumes, unify, variant, Atom, Literal, Policy,
};

/// Status of a node in a table's derivation tree.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum NodeStatus {
    New,
    Active,
    /// Frozen: the selected subgoal is involved in the given loops.
    Loop(BTreeSet<RequestId>),
    Answer,
    Disposed,
}

/// One node of a partial derivation tree: the clause instance
/// `head :- body` still to be proved, under a unique identifier.
#[derive(Clone, Debug)]
pub struct Node {
    pub id: RequestId,
    pub head: Atom,
    pub body: Vec<Literal>,
    pub status: NodeStatus,
}

/// The table of one goal evaluation.
#[derive(Clone, Debug)]
pub struct Table {
    /// The goal being evaluated (the higher request's goal).
    pub goal: Atom,
    /// Higher request; `None` once the table has terminated.
    pub hr: Option<Request>,
    /// Lower requests received for this goal (loop closures).
    pub lr: Vec<Request>,
    /// One counter per loop this goal is involved in.
    pub active_goals: BTreeMap<RequestId, i64>,
    /// Answers in derivation order, with the requests already served.
    pub answers: Vec<(Atom, BTreeSet<RequestId>)>,
    /// Derivation tree; `nodes[0]` is the root.
    pub nodes: Vec<Node>,
    /// Set when evaluation of this goal floundered.
    pub floundered: bool,
}

impl Table {
    pub fn root(&self) -> &Node {
        &self.nodes[0]
    }

    pub fn is_disposed(&self) -> bool {
        self.root().status == NodeStatus::Disposed
    }

    pub fn answer_atoms(&self) -> Vec<Atom> {
        self.answers.iter().map(|(a, _)| a.clone()).collect()
    }
}

/// The protocol procedures, as they appear in the event log.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum ProcedureKind {
    ProcessRequest,
    ActivateNode,
    GenerateResponse,
    SendResponse,
    ProcessResponse,
    Terminate,
}

impl fmt::Display for ProcedureKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        let s = match self {
            ProcedureKind::ProcessRequest => "Process Request",
            ProcedureKind::ActivateNode => "Activate Node",
            ProcedureKind::GenerateResponse => "Generate Response",
            ProcedureKind::SendResponse => "Send Response",
            ProcedureKind::ProcessResponse => "Process Response",
            ProcedureKind::Terminate => "Terminate",
        };
        write!(f, "{s}")
    }
}

/// One procedure invocation, for tracing and trace comparison.
#[derive(Clone, Debug)]
pub struct Event {
    pub principal: String,
    pub kind: ProcedureKind,
    /// The goal the procedure works on (argument goal in the trace).
    pub goal: Atom,
    pub detail: String,
}

impl fmt::Display for Event {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        write!(f, "{}: {}", self.principal, self.detail)
    }
}

/// An invariant violation detected by the run-time checks.
#[derive(Debug, Clone, thiserror::Error)]
#[error("invariant violated at {principal}: {msg}")]
pub struct InvariantError {
    pub principal: String,
    pub msg: String,
}

/// The evaluation engine of one principal.
pub struct PrincipalEngine {
    principal: String,
    policy: Policy,
    id_gen: IdGen,
    var_counter: u64,
    tables: Vec<Table>,
    /// Goal variant key -> table indices, in creation order.
    key_index: HashMap<String, Vec<usize>>,
    /// Node identifier -> table index, for routing incoming responses.
    node_route: HashMap<RequestId, usize>,
    outbox: Vec<Outbound>,
    events: Vec<Event>,
    loops_detected: u64,
    cached_responses: u64,
    clauses_used: BTreeSet<usize>,
}

impl PrincipalEngine {
    pub fn new(policy: Policy, id_gen: IdGen) -> Self {
        PrincipalEngine {
            principal: policy.owner.clone(),
            policy,
            id_gen,
            var_counter: 0,
            tables: Vec::new(),
            key_index: HashMap::new(),
            node_route: HashMap::new(),
            outbox: Vec::new(),
            events: Vec::new(),
            loops_detected: 0,
            cached_responses: 0,
            clauses_used: BTreeSet::new(),
        }
    }

    pub fn principal(&self) -> &str {
        &self.principal
    }

    pub fn tables(&self) -> &[Table] {
        &self.tables
    }

    pub fn id_gen(&self) -> &IdGen {
        &self.id_gen
    }

    /// Build the initial request for `goal`, to be delivered to the
    /// principal named by the goal's location.
    pub fn make_initial_request(&mut self, goal: Atom) -> Request {
        Request { id: self.id_gen.root(), requester: self.principal.clone(), goal }
    }

    pub fn take_outbox(&mut self) -> Vec<Outbound> {
        std::mem::take(&mut self.outbox)
    }

    pub fn take_events(&mut self) -> Vec<Event> {
        std::mem::take(&mut self.events)
    }

    /// Does an incoming response with this identifier belong to one of our
    /// tables?
    pub fn routes_response(&self, id: &RequestId) -> bool {
        self.node_route.contains_key(id)
    }

    /// Number of tables created so far.
    pub fn tables_created(&self) -> u64 {
        self.tables.len() as u64
    }

    /// Number of lower requests recognized (loops detected).
    pub fn loops_detected(&self) -> u64 {
        self.loops_detected
    }

    /// Requests answered from an already-settled table (cached answers
    /// of a disposed table, or a recorded flounder) without creating a
    /// table or joining a loop.
    pub fn cached_responses(&self) -> u64 {
        self.cached_responses
    }

    /// Number of distinct local clauses instantiated in some table.
    pub fn clauses_used(&self) -> u64 {
        self.clauses_used.len() as u64
    }

    /// Did any goal evaluated here flounder?
    pub fn floundered(&self) -> bool {
        self.tables.iter().any(|t| t.floundered)
    }

    fn log(&mut self, kind: ProcedureKind, goal: Atom, detail: String) {
        self.events.push(Event { principal: self.principal.clone(), kind, goal, detail });
    }

    /// Run-time invariant checks (termination criteria aside): loop
    /// counters never negative, every node identifier at or below the
    /// table's root.
    pub fn check_invariants(&self) -> Result<(), InvariantError> {
        for t in &self.tables {
            for (l, c) in &t.active_goals {
                if *c < 0 {
                    return Err(InvariantError {
                        principal: self.principal.clone(),
                        msg: format!("counter of loop {l} is negative ({c}) in table {}", t.goal),
                    });
                }
            }
            let root_id = &t.nodes[0].id;
            for n in &t.nodes {
                if !n.id.is_lower_or_equal(root_id) {
                    return Err(InvariantError {
                        principal: self.principal.clone(),
                        msg: format!("node id {} escapes root id {root_id}", n.id),
                    });
                }
            }
        }
        Ok(())
    }

    // ------------------------------------------------------------------
    // Process Request
    // ------------------------------------------------------------------

    /// Handle an incoming request: answer it from a terminated table,
    /// recognize it as a lower request closing a loop, or start a fresh
    /// evaluation (also used for side requests, which are re-evaluated
    /// from scratch).
    pub fn handle_request(&mut self, req: Request) {
        debug_assert_eq!(
            req.goal.location(),
            &crate::policy::Term::Const(self.principal.clone()),
            "request delivered to the wrong principal"
        );
        self.log(
            ProcedureKind::ProcessRequest,
            req.goal.clone(),
            format!("Process Request(⟨{}, {}, {}⟩)", req.id, req.requester, req.goal),
        );
        let key = req.goal.variant_key();
        let candidates: Vec<usize> = self.key_index.get(&key).cloned().unwrap_or_default();

        // A goal that floundered stays floundered: tell the requester.
        if let Some(&tix) = candidates.iter().find(|&&t| self.tables[t].floundered) {
            let reason = format!("goal {} floundered earlier", self.tables[tix].goal);
            self.cached_responses += 1;
            self.send_flounder_response(&req, &reason);
            return;
        }
        // Terminated table: serve the cached answers.
        if let Some(&tix) = candidates.iter().find(|&&t| self.tables[t].is_disposed()) {
            self.cached_responses += 1;
            self.send_response(tix, &req, ResponseStatus::Disposed, BTreeSet::new());
            return;
        }
        // Lower request: the new identifier extends a live table's higher
        // request, so the dependency graph has a loop coordinated here.
        if let Some(&tix) = candidates.iter().find(|&&t| {
            self.tables[t]
                .hr
                .as_ref()
                .is_some_and(|hr| req.id.is_lower_than(&hr.id))
        }) {
            self.loops_detected += 1;
            let loop_id = self.tables[tix].hr.as_ref().unwrap().id.clone();
            self.tables[tix].lr.push(req.clone());
            let mut loops = BTreeSet::new();
            loops.insert(loop_id);
            self.send_response(tix, &req, ResponseStatus::Active, loops);
            return;
        }
        // Fresh evaluation (new goal, or a side request re-evaluated on a
        // fresh table).
        let tix = self.create_table(req);
        self.activate(tix);
    }

    // ------------------------------------------------------------------
    // Create Table
    // ------------------------------------------------------------------

    fn create_table(&mut self, req: Request) -> usize {
        let tix = self.tables.len();
        let goal = req.goal.clone();
        let root = Node {
            id: req.id.clone(),
            head: goal.clone(),
            body: vec![Literal::pos(goal.clone())],
            status: NodeStatus::New,
        };
        let mut table = Table {
            goal: goal.clone(),
            hr: Some(req.clone()),
            lr: Vec::new(),
            active_goals: BTreeMap::new(),
            answers: Vec::new(),
            nodes: vec![root],
            floundered: false,
        };
        // One child per applicable clause, in textual order; clauses are
        // renamed apart from the goal before unification.
        let avoid: BTreeSet<String> = goal.vars().into_iter().collect();
        for cix in 0..self.policy.clauses.len() {
            let clause = self.policy.clauses[cix].clone();
            let renamed = rename_clause_apart(&clause, &avoid, &mut self.var_counter);
            if let Some(theta) = unify(&goal, &renamed.head) {
                self.clauses_used.insert(cix);
                let node = Node {
                    id: self.id_gen.extend(&req.id),
                    head: theta.apply_atom(&renamed.head),
                    body: renamed.body.iter().map(|l| theta.apply_literal(l)).collect(),
                    status: NodeStatus::New,
                };
                self.node_route.insert(node.id.clone(), tix);
                table.nodes.push(node);
            }
        }
        self.key_index.entry(goal.variant_key()).or_default().push(tix);
        self.tables.push(table);
        tix
    }

    // ------------------------------------------------------------------
    // Activate Node
    // ------------------------------------------------------------------

    /// Resume evaluation: activate the leftmost `new` node repeatedly until
    /// a request must be sent or no work is left (then generate a
    /// response). Each iteration is one `Activate Node` invocation.
    fn activate(&mut self, tix: usize) {
        loop {
            let goal = self.tables[tix].goal.clone();
            self.log(
                ProcedureKind::ActivateNode,
                goal.clone(),
                format!("Activate Node({goal})"),
            );
            let done = {
                let t = &self.tables[tix];
                let no_new = !t.nodes[1..].iter().any(|n| n.status == NodeStatus::New);
                let goal_answered = t.answers.iter().any(|(a, _)| variant(a, &goal));
                no_new || goal_answered
            };
            if done {
                self.generate_response(tix);
                return;
            }
            if self.tables[tix].nodes[0].status == NodeStatus::New {
                self.tables[tix].nodes[0].status = NodeStatus::Active;
            }
            // Leftmost `new` node. Answer subnodes receive sibling-level
            // identifiers minted after the clause nodes, so identifier
            // (insertion) order is the activation order.
            let nix = self.tables[tix]
                .nodes
                .iter()
                .skip(1)
                .position(|n| n.status == NodeStatus::New)
                .map(|p| p + 1)
                .unwrap();
            if self.tables[tix].nodes[nix].body.is_empty() {
                // The clause instance is fully proved: its head is an answer.
                let head = self.tables[tix].nodes[nix].head.clone();
                self.tables[tix].nodes[nix].status = NodeStatus::Answer;
                let subsumed = self.tables[tix]
                    .answers
                    .iter()
                    .any(|(a, _)| subsumes(a, &head));
                if !subsumed {
                    self.tables[tix].answers.push((head, BTreeSet::new()));
                }
                continue;
            }
            let lit = self.tables[tix].nodes[nix].body[0].clone();
            if lit.atom.location().is_var() {
                self.flounder(
                    tix,
                    &format!("selected subgoal {} has an unbound location", lit.atom),
                );
                return;
            }
            if lit.negated && !lit.atom.is_ground() {
                self.flounder(
                    tix,
                    &format!("selected negative literal not({}) is not ground", lit.atom),
                );
                return;
            }
            // Send a request for the selected subgoal to its location. The
            // node freezes (active) until the response arrives.
            let node_id = self.tables[tix].nodes[nix].id.clone();
            self.tables[tix].nodes[nix].status = NodeStatus::Active;
            let to = match lit.atom.location() {
                crate::policy::Term::Const(c) => c.clone(),
                crate::policy::Term::Var(_) => unreachable!(),
            };
            self.outbox.push(Outbound {
                to,
                payload: Payload::Request(Request {
                    id: node_id,
                    requester: self.principal.clone(),
                    goal: lit.atom.clone(),
                }),
            });
            return;
        }
    }

    // ------------------------------------------------------------------
    // Process Response
    // ------------------------------------------------------------------

    /// Handle a response to one of our subgoal requests.
    pub fn handle_response(&mut self, resp: Response) {
        let Some(&tix) = self.node_route.get(&resp.id) else {
            debug_assert!(false, "response {} has no routing entry", resp.id);
            return;
        };
        let goal = self.tables[tix].goal.clone();
        self.log(
            ProcedureKind::ProcessResponse,
            goal.clone(),
            format!("Process Response(⟨{}, {:?}, {}, ...⟩)", resp.id, resp.answers.len(), resp.status),
        );
        // Stale response to an already terminated or floundered table.
        if self.tables[tix].is_disposed() {
            return;
        }
        if let ResponseStatus::Floundered(reason) = &resp.status {
            let reason = reason.clone();
            self.flounder(tix, &format!("subgoal floundered: {reason}"));
            return;
        }
        let nix = self.tables[tix]
            .nodes
            .iter()
            .position(|n| n.id == resp.id)
            .expect("routed response must match a node");
        if self.tables[tix].nodes[nix].status == NodeStatus::Disposed {
            return; // e.g. a negation node already failed by an earlier answer
        }

        let negated = self.tables[tix].nodes[nix]
            .body
            .first()
            .is_some_and(|l| l.negated);
        if negated {
            self.process_negation_response(tix, nix, &resp);
        } else {
            self.process_positive_response(tix, nix, &resp);
        }
        let resume = {
            let t = &self.tables[tix];
            match &t.nodes[0].status {
                NodeStatus::Active => true,
                NodeStatus::Loop(ids) => ids
                    .iter()
                    .all(|l| t.active_goals.get(l).copied().unwrap_or(0) == 0),
                _ => false,
            }
        };
        if resume && !self.tables[tix].is_disposed() && !self.tables[tix].floundered {
            self.activate(tix);
        }
    }

    fn process_positive_response(&mut self, tix: usize, nix: usize, resp: &Response) {
        if resp.status == ResponseStatus::Disposed {
            // The subgoal is complete. If this node was frozen in a loop,
            // the whole loop has terminated: dispose every frozen node.
            if matches!(self.tables[tix].nodes[nix].status, NodeStatus::Loop(_)) {
                for n in self.tables[tix].nodes[1..].iter_mut() {
                    if matches!(n.status, NodeStatus::Loop(_)) {
                        n.status = NodeStatus::Disposed;
                    }
                }
            }
            self.tables[tix].nodes[nix].status = NodeStatus::Disposed;
        } else {
            // Record the loops the subgoal is involved in.
            if !resp.loops.is_empty() {
                let node = &mut self.tables[tix].nodes[nix];
                match &mut node.status {
                    NodeStatus::Loop(ids) => ids.extend(resp.loops.iter().cloned()),
                    _ => node.status = NodeStatus::Loop(resp.loops.clone()),
                }
                for l in &resp.loops {
                    self.tables[tix].active_goals.entry(l.clone()).or_insert(0);
                }
            }
            if let ResponseStatus::Loop(id3) = &resp.status {
                // One loop iteration of id3 reached this goal: count it.
                let c = self.tables[tix].active_goals.entry(id3.clone()).or_insert(0);
                *c -= 1;
                if self.tables[tix].nodes[0].status == NodeStatus::Active {
                    let mut ids = BTreeSet::new();
                    ids.insert(id3.clone());
                    self.tables[tix].nodes[0].status = NodeStatus::Loop(ids);
                }
            }
        }
        self.extend_with_answers(tix, nix, &resp.answers);
    }

    /// Resolution of the received answers against the node's selected
    /// subgoal: one new child per answer, carrying the remaining body.
    fn extend_with_answers(&mut self, tix: usize, nix: usize, answers: &[Atom]) {
        for ans in answers {
            let node = self.tables[tix].nodes[nix].clone();
            let mut avoid: BTreeSet<String> = node.head.vars().into_iter().collect();
            for l in &node.body {
                avoid.extend(l.atom.vars());
            }
            let ans_r = rename_atom_apart(ans, &avoid, &mut self.var_counter);
            let Some(theta) = unify(&node.body[0].atom, &ans_r) else {
                continue; // answers are instances of the subgoal; skip defensively
            };
            let root_id = self.tables[tix].nodes[0].id.clone();
            let child = Node {
                id: self.id_gen.extend(&root_id),
                head: theta.apply_atom(&node.head),
                body: node.body[1..].iter().map(|l| theta.apply_literal(l)).collect(),
                status: NodeStatus::New,
            };
            self.node_route.insert(child.id.clone(), tix);
            self.tables[tix].nodes.push(child);
        }
    }

    /// Negation as failure over a remote subgoal `not(B)`:
    /// any answer refutes the node; a complete, answer-free evaluation
    /// proves it; any loop involvement flounders the computation.
    fn process_negation_response(&mut self, tix: usize, nix: usize, resp: &Response) {
        let b = self.tables[tix].nodes[nix].body[0].atom.clone();
        if matches!(resp.status, ResponseStatus::Loop(_)) || !resp.loops.is_empty() {
            self.flounder(tix, &format!("negative literal not({b}) depends on a loop"));
            return;
        }
        if !resp.answers.is_empty() {
            // B holds, so not(B) fails and the clause instance is abandoned.
            self.tables[tix].nodes[nix].status = NodeStatus::Disposed;
            return;
        }
        if resp.status == ResponseStatus::Disposed {
            // B finitely failed: not(B) is proved, continue with the rest.
            let node = self.tables[tix].nodes[nix].clone();
            let root_id = self.tables[tix].nodes[0].id.clone();
            let child = Node {
                id: self.id_gen.extend(&root_id),
                head: node.head.clone(),
                body: node.body[1..].to_vec(),
                status: NodeStatus::New,
            };
            self.node_route.insert(child.id.clone(), tix);
            self.tables[tix].nodes.push(child);
            self.tables[tix].nodes[nix].status = NodeStatus::Disposed;
        }
        // An `active` response without loops or answers carries no
        // information for negation; keep waiting.
    }

    // ------------------------------------------------------------------
    // Generate Response
    // ------------------------------------------------------------------

    fn generate_response(&mut self, tix: usize) {
        let goal = self.tables[tix].goal.clone();
        self.log(
            ProcedureKind::GenerateResponse,
            goal.clone(),
            format!("Generate Response({goal})"),
        );
        let any_loop_node = self.tables[tix].nodes[1..]
            .iter()
            .any(|n| matches!(n.status, NodeStatus::Loop(_)));
        if !any_loop_node {
            self.terminate(tix);
            return;
        }
        let hr = self.tables[tix].hr.clone().expect("live table has a higher request");

        // Coordinator with answers not yet propagated around the loop:
        // start another iteration by answering every lower request.
        let has_unsent_lr = {
            let t = &self.tables[tix];
            t.lr.iter().any(|lr| {
                t.answers.iter().any(|(_, recips)| !recips.contains(&lr.id))
            })
        };
        if !self.tables[tix].lr.is_empty() && has_unsent_lr {
            let involved = self.count_nodes_in_loop(tix, &hr.id);
            self.tables[tix].active_goals.insert(hr.id.clone(), involved);
            {
                let root = &mut self.tables[tix].nodes[0];
                match &mut root.status {
                    NodeStatus::Loop(ids) => {
                        ids.insert(hr.id.clone());
                    }
                    _ => {
                        let mut ids = BTreeSet::new();
                        ids.insert(hr.id.clone());
                        root.status = NodeStatus::Loop(ids);
                    }
                }
            }
            for lr in self.tables[tix].lr.clone() {
                self.send_response(tix, &lr, ResponseStatus::Loop(hr.id.clone()), BTreeSet::new());
            }
            return;
        }

        // Leader: the only loop left is the one this goal coordinates, and
        // it has reached its fixpoint.
        {
            let t = &self.tables[tix];
            let keys: Vec<&RequestId> = t.active_goals.keys().collect();
            if keys.len() == 1 && *keys[0] == hr.id {
                self.terminate(tix);
                return;
            }
        }

        // Otherwise answer the higher request, handing the loops above this
        // goal back to their coordinators and resetting their counters.
        let higher: BTreeSet<RequestId> = self.tables[tix]
            .active_goals
            .keys()
            .filter(|l| hr.id.is_lower_than(l))
            .cloned()
            .collect();
        for l in higher.clone() {
            let involved = self.count_nodes_in_loop(tix, &l);
            self.tables[tix].active_goals.insert(l, involved);
        }
        let status = match &self.tables[tix].nodes[0].status {
            NodeStatus::Loop(ids) => ids
                .iter()
                .find(|id4| hr.id.is_lower_than(id4))
                .map(|id4| ResponseStatus::Loop(id4.clone()))
                .unwrap_or(ResponseStatus::Active),
            _ => ResponseStatus::Active,
        };
        self.send_response(tix, &hr, status, higher);
        self.tables[tix].nodes[0].status = NodeStatus::Active;
    }

    fn count_nodes_in_loop(&self, tix: usize, loop_id: &RequestId) -> i64 {
        self.tables[tix].nodes[1..]
            .iter()
            .filter(|n| matches!(&n.status, NodeStatus::Loop(ids) if ids.contains(loop_id)))
            .count() as i64
    }

    // ------------------------------------------------------------------
    // Send Response
    // ------------------------------------------------------------------

    fn send_response(
        &mut self,
        tix: usize,
        req: &Request,
        status: ResponseStatus,
        loops: BTreeSet<RequestId>,
    ) {
        // Every answer is sent at most once per request: recipients are
        // recorded per answer.
        let mut answers = Vec::new();
        for (a, recips) in &mut self.tables[tix].answers {
            if recips.insert(req.id.clone()) {
                answers.push(a.clone());
            }
        }
        self.log(
            ProcedureKind::SendResponse,
            req.goal.clone(),
            format!(
                "Send Response(⟨{}, {}, {}⟩, {}, {{{}}})",
                req.id,
                req.requester,
                req.goal,
                status,
                loops.iter().map(|l| l.to_string()).collect::<Vec<_>>().join(", ")
            ),
        );
        self.outbox.push(Outbound {
            to: req.requester.clone(),
            payload: Payload::Response(Response { id: req.id.clone(), answers, status, loops }),
        });
    }

    /// A flounder notification is a response too, but is not tied to a
    /// table's answer bookkeeping (floundered tables discard answers).
    fn send_flounder_response(&mut self, req: &Request, reason: &str) {
        self.log(
            ProcedureKind::SendResponse,
            req.goal.clone(),
            format!(
                "Send Response(⟨{}, {}, {}⟩, floundered, {{}})",
                req.id, req.requester, req.goal
            ),
        );
        self.outbox.push(Outbound {
            to: req.requester.clone(),
            payload: Payload::Response(Response {
                id: req.id.clone(),
                answers: Vec::new(),
                status: ResponseStatus::Floundered(reason.to_string()),
                loops: BTreeSet::new(),
            }),
        });
    }

    // ------------------------------------------------------------------
    // Terminate
    // ------------------------------------------------------------------

    /// Dispose the table and send final (`disposed`) responses to the
    /// higher request and every lower request. Answers stay available for
    /// later requests.
    fn terminate(&mut self, tix: usize) {
        let goal = self.tables[tix].goal.clone();
        self.log(ProcedureKind::Terminate, goal.clone(), format!("Terminate({goal})"));
        for n in self.tables[tix].nodes.iter_mut() {
            if n.status != NodeStatus::Answer {
                n.status = NodeStatus::Disposed;
            }
        }
        self.tables[tix].nodes[0].status = NodeStatus::Disposed;
        self.tables[tix].active_goals.clear();
        let hr = self.tables[tix].hr.take();
        let lrs = std::mem::take(&mut self.tables[tix].lr);
        if let Some(hr) = hr {
            self.send_response(tix, &hr, ResponseStatus::Disposed, BTreeSet::new());
        }
        for lr in lrs {
            self.send_response(tix, &lr, ResponseStatus::Disposed, BTreeSet::new());
        }
    }

    // ------------------------------------------------------------------
    // Floundering
    // ------------------------------------------------------------------

    /// Abort this goal's evaluation: discard partial answers, dispose the
    /// tree and notify the higher and all lower requests.
    fn flounder(&mut self, tix: usize, reason: &str) {
        if self.tables[tix].floundered {
            return;
        }
        log::warn!("{}: goal {} floundered: {}", self.principal, self.tables[tix].goal, reason);
        self.tables[tix].floundered = true;
        self.tables[tix].answers.clear();
        self.tables[tix].active_goals.clear();
        for n in self.tables[tix].nodes.iter_mut() {
            n.status = NodeStatus::Disposed;
        }
        let hr = self.tables[tix].hr.take();
        let lrs = std::mem::take(&mut self.tables[tix].lr);
        if let Some(hr) = hr {
            self.send_flounder_response(&hr, reason);
        }
        for lr in lrs {
            self.send_flounder_response(&lr, reason);
        }
    }
}
