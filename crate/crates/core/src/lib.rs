//! Circuit-SAT toolkit built around a sequentially decoding DAG network.
//!
//! - [`circuit`]: And-Inverter Graphs, simulation and the circuit text format
//! - [`cnf`]: CNF formulas, DIMACS I/O and conversions in both directions
//! - [`oracle`]: deterministic DPLL and an enumerating reference solver
//! - [`datagen`]: symmetric suite, SR(n) pairs, random AIGs and manifests
//! - [`model`]: message-passing embedding and the two decoder heads
//! - [`training`]: training loop, solution-rate evaluation and sweeps
//! - [`diagnostics`]: finite-difference gradient suite

pub mod circuit;
pub mod cnf;
pub mod datagen;
pub mod diagnostics;
pub mod model;
pub mod oracle;
pub mod training;
