//! Distributed goal evaluation for function-free logic programs.
//!
//! A *global policy* is a set of clauses partitioned over principals; the
//! first argument of every atom names the principal whose engine evaluates
//! it. Each principal runs a [`engine::PrincipalEngine`] that answers
//! requests for goals over its own clauses, issuing sub-requests to other
//! principals for body atoms located elsewhere. Loops spanning several
//! engines are detected purely from the structure of request identifiers
//! ([`ident`]) and resolved by an iterative fixpoint that needs no central
//! coordinator.
//!
//! The crate also ships:
//!
//! * a deterministic in-process message bus and a TCP transport
//!   ([`transport`]),
//! * a centralized bottom-up evaluator used as a test oracle ([`oracle`]),
//! * a scenario/driver layer with policy-family generators and metrics
//!   reporting ([`harness`]).

pub mod engine;
pub mod harness;
pub mod ident;
pub mod oracle;
pub mod policy;
pub mod transport;
