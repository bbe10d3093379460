//! TCP transport: one listener (and thread) per principal, messages framed
//! with the newline-delimited [`wire`](super::wire) format, one connection
//! per message.
//!
//! Sends are sequential per engine and listeners accept in connection
//! order, so per-pair in-order delivery holds. The driver thread plays the
//! initial requester: it injects the initial request, waits for the final
//! response on the requester's listener, then shuts the engine threads
//! down with a control line.

use std::collections::HashMap;
use std::io::{BufRead, BufReader, Write};
use std::net::{SocketAddr, TcpListener, TcpStream};
use std::sync::mpsc;
use std::thread;
use std::time::Duration;

use crate::engine::{Event, Payload, PrincipalEngine};
use crate::policy::{Atom, Term};

use super::wire;
use super::{Envelope, MessageCounts, Outcome};

const SHUTDOWN_LINE: &str = "shutdown";

/// Transport-level failure of a TCP run.
#[derive(Debug, thiserror::Error)]
pub enum TcpError {
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
    #[error(transparent)]
    Wire(#[from] wire::WireError),
    #[error("goal location `{0}` is not a declared principal")]
    UnknownPrincipal(String),
    #[error("initial goal {0} has an unbound location")]
    UnboundLocation(Atom),
    #[error("timed out waiting for the final response")]
    Timeout,
    #[error("engine thread for `{0}` failed: {1}")]
    EngineThread(String, String),
}

/// Result of a TCP run: the outcome plus the counters each engine
/// accumulated locally.
pub struct TcpRunReport {
    pub outcome: Outcome,
    pub counts: MessageCounts,
    pub tables: u64,
    pub loops: u64,
    pub clauses: u64,
    pub cached: u64,
    pub principals_with_tables: u64,
    pub floundered_engines: Vec<String>,
    pub events: Vec<Event>,
}

fn send_line(addr: SocketAddr, line: &str) -> std::io::Result<()> {
    let mut stream = TcpStream::connect(addr)?;
    stream.write_all(line.as_bytes())?;
    stream.write_all(b"\n")?;
    stream.flush()
}

struct EngineThreadResult {
    principal: String,
    counts: MessageCounts,
    tables: u64,
    loops: u64,
    clauses: u64,
    cached: u64,
    floundered: bool,
    events: Vec<Event>,
}

fn engine_loop(
    mut engine: PrincipalEngine,
    listener: TcpListener,
    addrs: HashMap<String, SocketAddr>,
) -> Result<EngineThreadResult, TcpError> {
    let principal = engine.principal().to_string();
    let mut counts = MessageCounts::default();
    let mut events = Vec::new();
    let mut seq = 0u64;
    'accept: loop {
        let (stream, _) = listener.accept()?;
        let reader = BufReader::new(stream);
        for line in reader.lines() {
            let line = line?;
            if line == SHUTDOWN_LINE {
                break 'accept;
            }
            let env = wire::decode_line(&line, 0)?;
            match env.payload {
                Payload::Request(req) => {
                    counts.requests += 1;
                    engine.handle_request(req);
                }
                Payload::Response(resp) => {
                    counts.responses += 1;
                    if !resp.answers.is_empty() {
                        counts.responses_with_answers += 1;
                        counts.answers += resp.answers.len() as u64;
                    }
                    if engine.routes_response(&resp.id) {
                        engine.handle_response(resp);
                    }
                }
            }
            events.extend(engine.take_events());
            for out in engine.take_outbox() {
                let to_addr = *addrs
                    .get(&out.to)
                    .ok_or_else(|| TcpError::UnknownPrincipal(out.to.clone()))?;
                let env = Envelope {
                    from: principal.clone(),
                    to: out.to.clone(),
                    seq,
                    payload: out.payload,
                };
                seq += 1;
                send_line(to_addr, &wire::encode(&env))?;
            }
        }
    }
    Ok(EngineThreadResult {
        principal,
        counts,
        tables: engine.tables_created(),
        loops: engine.loops_detected(),
        clauses: engine.clauses_used(),
        cached: engine.cached_responses(),
        floundered: engine.floundered(),
        events,
    })
}

/// Run one evaluation over TCP. `requester` must be one of the engines and
/// have an empty policy (the driver thread stands in for it). Principals
/// without an entry in `listen` get an ephemeral 127.0.0.1 port.
pub fn run(
    mut engines: Vec<PrincipalEngine>,
    requester: &str,
    goal: Atom,
    listen: &HashMap<String, String>,
    timeout: Duration,
) -> Result<TcpRunReport, TcpError> {
    let target = match goal.location() {
        Term::Const(c) => c.clone(),
        Term::Var(_) => return Err(TcpError::UnboundLocation(goal)),
    };

    // Bind all listeners up front so the address map is complete before any
    // engine starts sending.
    let mut listeners = Vec::new();
    let mut addrs: HashMap<String, SocketAddr> = HashMap::new();
    for e in &engines {
        let bind_to = listen
            .get(e.principal())
            .cloned()
            .unwrap_or_else(|| "127.0.0.1:0".to_string());
        let l = TcpListener::bind(&bind_to)?;
        addrs.insert(e.principal().to_string(), l.local_addr()?);
        listeners.push(l);
    }
    if !addrs.contains_key(&target) {
        return Err(TcpError::UnknownPrincipal(target));
    }

    // The requester's engine stays on the driver thread.
    let rix = engines
        .iter()
        .position(|e| e.principal() == requester)
        .ok_or_else(|| TcpError::UnknownPrincipal(requester.to_string()))?;
    let mut requester_engine = engines.remove(rix);
    let requester_listener = listeners.remove(rix);
    requester_listener.set_nonblocking(false)?;

    let initial = requester_engine.make_initial_request(goal);
    let initial_id = initial.id.clone();

    let (tx, rx) = mpsc::channel::<Result<EngineThreadResult, (String, String)>>();
    let mut handles = Vec::new();
    for (engine, listener) in engines.into_iter().zip(listeners) {
        let addrs = addrs.clone();
        let tx = tx.clone();
        let name = engine.principal().to_string();
        handles.push(thread::spawn(move || {
            let res = engine_loop(engine, listener, addrs).map_err(|e| (name, e.to_string()));
            let _ = tx.send(res);
        }));
    }
    drop(tx);

    send_line(
        addrs[&target],
        &wire::encode(&Envelope {
            from: requester.to_string(),
            to: target.clone(),
            seq: 0,
            payload: Payload::Request(initial),
        }),
    )?;

    // Wait (bounded) for the final response on the requester's listener.
    requester_listener.set_nonblocking(true)?;
    let deadline = std::time::Instant::now() + timeout;
    let mut outcome = None;
    let mut driver_counts = MessageCounts::default();
    'outer: while outcome.is_none() {
        match requester_listener.accept() {
            Ok((stream, _)) => {
                stream.set_nonblocking(false)?;
                let reader = BufReader::new(stream);
                for line in reader.lines() {
                    let env = wire::decode_line(&line?, 0)?;
                    if let Payload::Response(resp) = env.payload {
                        driver_counts.responses += 1;
                        if !resp.answers.is_empty() {
                            driver_counts.responses_with_answers += 1;
                            driver_counts.answers += resp.answers.len() as u64;
                        }
                        if resp.id == initial_id {
                            outcome = Some(super::final_outcome(&resp));
                            continue 'outer;
                        }
                    }
                }
            }
            Err(e) if e.kind() == std::io::ErrorKind::WouldBlock => {
                if std::time::Instant::now() > deadline {
                    break;
                }
                thread::sleep(Duration::from_millis(5));
            }
            Err(e) => return Err(e.into()),
        }
    }

    // The final response can overtake the tail of the disposal cascade
    // (the leader answers its higher request before its lower ones), so
    // give the cascade a moment to drain before shutting engines down.
    thread::sleep(Duration::from_millis(300));
    for (p, addr) in &addrs {
        if p != requester {
            let _ = send_line(*addr, SHUTDOWN_LINE);
        }
    }
    // Requests are counted once each, at their receiver (the initial one
    // at the target engine); the driver only sees responses.
    let mut counts = driver_counts;
    let mut tables = 0;
    let mut loops = 0;
    let mut clauses = 0;
    let mut cached = 0;
    let mut principals_with_tables = 0;
    let mut floundered_engines = Vec::new();
    let mut events = Vec::new();
    for _ in 0..handles.len() {
        match rx.recv_timeout(timeout) {
            Ok(Ok(r)) => {
                counts.requests += r.counts.requests;
                counts.responses += r.counts.responses;
                counts.responses_with_answers += r.counts.responses_with_answers;
                counts.answers += r.counts.answers;
                tables += r.tables;
                loops += r.loops;
                clauses += r.clauses;
                cached += r.cached;
                if r.tables > 0 {
                    principals_with_tables += 1;
                }
                if r.floundered {
                    floundered_engines.push(r.principal);
                }
                events.extend(r.events);
            }
            Ok(Err((p, e))) => return Err(TcpError::EngineThread(p, e)),
            Err(_) => return Err(TcpError::Timeout),
        }
    }
    for h in handles {
        let _ = h.join();
    }
    let outcome = outcome.ok_or(TcpError::Timeout)?;
    Ok(TcpRunReport {
        outcome,
        counts,
        tables,
        loops,
        clauses,
        cached,
        principals_with_tables,
        floundered_engines,
        events,
    })
}
