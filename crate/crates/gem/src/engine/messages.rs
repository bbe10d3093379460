//! The two message kinds exchanged between engines.

use std::collections::BTreeSet;
use std::fmt;

use serde::{Deserialize, Serialize};

use crate::ident::RequestId;
use crate::policy::Atom;

/// A request to evaluate `goal` at its location, under identifier `id`.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Request {
    pub id: RequestId,
    pub requester: String,
    pub goal: Atom,
}

/// Completion status carried by a response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum ResponseStatus {
    /// The goal's evaluation is still in progress (loop processing).
    Active,
    /// One iteration of the named loop has completed at the sender.
    Loop(RequestId),
    /// The goal's evaluation is complete; the answer set is final.
    Disposed,
    /// The evaluation floundered (non-ground negation or negation in a
    /// loop); no answers can be guaranteed.
    Floundered(String),
}

impl fmt::Display for ResponseStatus {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        match self {
            ResponseStatus::Active => write!(f, "active"),
            ResponseStatus::Loop(id) => write!(f, "loop({id})"),
            ResponseStatus::Disposed => write!(f, "disposed"),
            ResponseStatus::Floundered(_) => write!(f, "floundered"),
        }
    }
}

/// A response to the request with identifier `id`: the answers not yet sent
/// to that request, a status, and the loops (identified by their
/// coordinator's higher request) the requester becomes involved in.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub struct Response {
    pub id: RequestId,
    pub answers: Vec<Atom>,
    pub status: ResponseStatus,
    pub loops: BTreeSet<RequestId>,
}

/// Message payload: a request or a response.
#[derive(Clone, Debug, PartialEq, Eq, Serialize, Deserialize)]
pub enum Payload {
    Request(Request),
    Response(Response),
}

/// An outgoing message queued by an engine, to be enveloped by the
/// transport.
#[derive(Clone, Debug)]
pub struct Outbound {
    pub to: String,
    pub payload: Payload,
}
