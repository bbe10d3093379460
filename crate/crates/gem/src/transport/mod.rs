//! Message transports: a deterministic in-process simulator and a TCP
//! runner, sharing one newline-delimited wire format ([`wire`]).
//!
//! Both transports guarantee exactly-once, per-pair in-order delivery. The
//! simulator additionally offers two schedulers: strict FIFO over a single
//! global queue (the default) and a seeded random scheduler that picks the
//! next (sender, receiver) pair at random while preserving per-pair order.

pub mod tcp;
pub mod wire;

use std::collections::{BTreeMap, BTreeSet, HashSet, VecDeque};

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::engine::{Event, Payload, PrincipalEngine, Response, ResponseStatus};
use crate::ident::RequestId;
use crate::policy::Atom;

/// A message in flight.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Envelope {
    pub from: String,
    pub to: String,
    /// Global emission number; FIFO delivers in this order.
    pub seq: u64,
    pub payload: Payload,
}

/// Delivery scheduling policy of the simulator.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum Scheduler {
    /// Deliver strictly in emission order.
    Fifo,
    /// Pick a random nonempty (sender, receiver) pair each step, seeded.
    Random(u64),
}

/// The simulated message bus: per-pair FIFO queues plus a scheduler.
pub struct SimBus {
    queues: BTreeMap<(String, String), VecDeque<Envelope>>,
    next_seq: u64,
    scheduler: Scheduler,
    rng: ChaCha8Rng,
}

impl SimBus {
    pub fn new(scheduler: Scheduler) -> Self {
        let seed = match scheduler {
            Scheduler::Fifo => 0,
            Scheduler::Random(s) => s,
        };
        SimBus {
            queues: BTreeMap::new(),
            next_seq: 0,
            scheduler,
            rng: ChaCha8Rng::seed_from_u64(seed),
        }
    }

    pub fn push(&mut self, from: String, to: String, payload: Payload) {
        let seq = self.next_seq;
        self.next_seq += 1;
        let env = Envelope { from: from.clone(), to: to.clone(), seq, payload };
        self.queues.entry((from, to)).or_default().push_back(env);
    }

    pub fn is_empty(&self) -> bool {
        self.queues.values().all(|q| q.is_empty())
    }

    /// Deliver the next envelope according to the scheduler; per-pair order
    /// is preserved in both modes.
    pub fn pop(&mut self) -> Option<Envelope> {
        let nonempty: Vec<(String, String)> = self
            .queues
            .iter()
            .filter(|(_, q)| !q.is_empty())
            .map(|(k, _)| k.clone())
            .collect();
        if nonempty.is_empty() {
            return None;
        }
        let key = match self.scheduler {
            Scheduler::Fifo => nonempty
                .iter()
                .min_by_key(|k| self.queues[*k].front().unwrap().seq)
                .unwrap()
                .clone(),
            Scheduler::Random(_) => {
                let ix = self.rng.gen_range(0..nonempty.len());
                nonempty[ix].clone()
            }
        };
        self.queues.get_mut(&key).unwrap().pop_front()
    }
}

/// Raw message counts accumulated while a run drains the bus.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq)]
pub struct MessageCounts {
    pub requests: u64,
    pub responses: u64,
    pub responses_with_answers: u64,
    pub answers: u64,
}

/// Final result of a goal evaluation.
#[derive(Clone, Debug, PartialEq, Eq)]
pub enum Outcome {
    Answers(Vec<Atom>),
    Floundered(String),
}

/// Failures of a run (as opposed to a negative evaluation result).
#[derive(Debug, Clone, thiserror::Error)]
pub enum RunError {
    #[error("message addressed to undeclared principal `{0}`")]
    UnknownPrincipal(String),
    #[error("step budget of {0} deliveries exhausted; evaluation did not quiesce")]
    BudgetExhausted(u64),
    #[error("bus drained without a final response to the initial request")]
    NoOutcome,
    #[error(transparent)]
    Invariant(#[from] crate::engine::InvariantError),
    #[error("answer {answer} sent twice to request {id}")]
    DuplicateAnswer { id: RequestId, answer: Atom },
}

/// A network of engines driven over a [`SimBus`] until quiescence.
pub struct SimNetwork {
    engines: BTreeMap<String, PrincipalEngine>,
    bus: SimBus,
    pub counts: MessageCounts,
    pub events: Vec<Event>,
    /// (request id, answer) pairs seen on the wire, for the
    /// no-duplicate-answer invariant.
    seen_answers: HashSet<(RequestId, String)>,
    step_budget: u64,
}

impl SimNetwork {
    pub fn new(engines: Vec<PrincipalEngine>, scheduler: Scheduler, step_budget: u64) -> Self {
        SimNetwork {
            engines: engines
                .into_iter()
                .map(|e| (e.principal().to_string(), e))
                .collect(),
            bus: SimBus::new(scheduler),
            counts: MessageCounts::default(),
            events: Vec::new(),
            seen_answers: HashSet::new(),
            step_budget,
        }
    }

    pub fn engines(&self) -> impl Iterator<Item = &PrincipalEngine> {
        self.engines.values()
    }

    pub fn engine(&self, principal: &str) -> Option<&PrincipalEngine> {
        self.engines.get(principal)
    }

    fn drain_engine(&mut self, principal: &str) {
        let engine = self.engines.get_mut(principal).unwrap();
        let outbound = engine.take_outbox();
        self.events.extend(engine.take_events());
        for out in outbound {
            self.bus.push(principal.to_string(), out.to, out.payload);
        }
    }

    /// Evaluate `goal` on behalf of `requester`: inject the initial request
    /// and deliver messages until the bus is empty.
    pub fn run(&mut self, requester: &str, goal: Atom) -> Result<Outcome, RunError> {
        let target = match goal.location() {
            crate::policy::Term::Const(c) => c.clone(),
            crate::policy::Term::Var(_) => {
                return Ok(Outcome::Floundered(format!(
                    "initial goal {goal} has an unbound location"
                )))
            }
        };
        let initial = self
            .engines
            .get_mut(requester)
            .ok_or_else(|| RunError::UnknownPrincipal(requester.to_string()))?
            .make_initial_request(goal);
        let initial_id = initial.id.clone();
        self.bus
            .push(requester.to_string(), target, Payload::Request(initial));

        let mut outcome = None;
        let mut steps = 0u64;
        while let Some(env) = self.bus.pop() {
            steps += 1;
            if steps > self.step_budget {
                return Err(RunError::BudgetExhausted(self.step_budget));
            }
            match env.payload {
                Payload::Request(req) => {
                    self.counts.requests += 1;
                    let engine = self
                        .engines
                        .get_mut(&env.to)
                        .ok_or_else(|| RunError::UnknownPrincipal(env.to.clone()))?;
                    engine.handle_request(req);
                    engine.check_invariants()?;
                    self.drain_engine(&env.to);
                }
                Payload::Response(resp) => {
                    self.counts.responses += 1;
                    if !resp.answers.is_empty() {
                        self.counts.responses_with_answers += 1;
                        self.counts.answers += resp.answers.len() as u64;
                    }
                    for a in &resp.answers {
                        let key = (resp.id.clone(), a.variant_key());
                        if !self.seen_answers.insert(key) {
                            return Err(RunError::DuplicateAnswer {
                                id: resp.id.clone(),
                                answer: a.clone(),
                            });
                        }
                    }
                    if env.to == requester && resp.id == initial_id {
                        outcome = Some(final_outcome(&resp));
                        continue;
                    }
                    let engine = self
                        .engines
                        .get_mut(&env.to)
                        .ok_or_else(|| RunError::UnknownPrincipal(env.to.clone()))?;
                    if engine.routes_response(&resp.id) {
                        engine.handle_response(resp);
                        engine.check_invariants()?;
                        self.drain_engine(&env.to);
                    }
                }
            }
        }
        outcome.ok_or(RunError::NoOutcome)
    }
}

pub(crate) fn final_outcome(resp: &Response) -> Outcome {
    match &resp.status {
        ResponseStatus::Floundered(reason) => Outcome::Floundered(reason.clone()),
        _ => Outcome::Answers(resp.answers.clone()),
    }
}

/// Check Def.-3-style order compatibility on a set of identifiers: for all
/// `id1 ⊑ id2` and `id3 ⊑ id4` with `id2 ↪ id4`, also `id1 ↪ id3`.
/// Exhaustive up to `exhaustive_limit` identifiers, sampled (seeded) above.
pub fn check_order_compatibility(
    ids: &[RequestId],
    orders: &crate::ident::SiblingOrders,
    exhaustive_limit: usize,
    sample: usize,
) -> Result<(), String> {
    let uniq: Vec<&RequestId> = {
        let set: BTreeSet<&RequestId> = ids.iter().collect();
        set.into_iter().collect()
    };
    let n = uniq.len();
    let check = |i1: usize, i2: usize, i3: usize, i4: usize| -> Result<(), String> {
        let (id1, id2, id3, id4) = (uniq[i1], uniq[i2], uniq[i3], uniq[i4]);
        if id1.is_lower_or_equal(id2)
            && id3.is_lower_or_equal(id4)
            && orders.precedes(id2, id4).unwrap_or(false)
            && !orders.precedes(id1, id3).unwrap_or(false)
        {
            return Err(format!(
                "order compatibility violated: {id1} ⊑ {id2}, {id3} ⊑ {id4}, {id2} ↪ {id4}, but not {id1} ↪ {id3}"
            ));
        }
        Ok(())
    };
    if n <= exhaustive_limit {
        for i1 in 0..n {
            for i2 in 0..n {
                if !uniq[i1].is_lower_or_equal(uniq[i2]) {
                    continue;
                }
                for i3 in 0..n {
                    for i4 in 0..n {
                        check(i1, i2, i3, i4)?;
                    }
                }
            }
        }
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(0xDEF3);
        for _ in 0..sample {
            let q: Vec<usize> = (0..4).map(|_| rng.gen_range(0..n)).collect();
            check(q[0], q[1], q[2], q[3])?;
        }
    }
    Ok(())
}
