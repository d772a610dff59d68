//! Reduced ordered BDDs from 3-CNF formulas, classical variable-reordering
//! heuristics, and a message-passing neural network lifted to 3-uniform
//! hypergraphs that learns to predict near-optimal variable orders.
//!
//! The pipeline: parse a 3-CNF ([`cnf`]), build its reduced OBDD under some
//! order ([`bdd`]), minimize it with reordering heuristics ([`reorder`]) or
//! encode the formula as a sign-typed 3-hypergraph ([`hypergraph`]) and ask a
//! trained hyper-GGNN for an order directly ([`hmpnn`]). The [`harness`]
//! module generates labeled datasets, trains, evaluates, and benchmarks.

pub mod bdd;
pub mod cnf;
pub mod harness;
pub mod hmpnn;
pub mod hypergraph;
pub mod reorder;
pub mod timer;
