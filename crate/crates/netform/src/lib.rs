//! Network formation over heterogeneous traffic.
//!
//! Nodes contract bilaterally to form links, break contracts unilaterally,
//! and pay for link maintenance, shortest-path routing and disconnection
//! from their traffic partners. This crate implements the cost and utility
//! model, pairwise-Nash stability checkers, the restricted myopic round
//! dynamics with its degree-tuple potential, welfare analysis (optimum,
//! price of stability/anarchy, LOWER SC decision problems), exponential
//! exact best response, and the hardness-reduction instance generators —
//! everything cross-checked against brute-force oracles at desk scale.

pub mod best_response;
pub mod contracting;
pub mod dynamics;
pub mod error;
pub mod gen;
pub mod graphs;
pub mod io;
pub mod model;
pub mod oracles;
pub mod reductions;
pub mod routing;
pub mod stability;
pub mod welfare;

pub use error::{Error, Result};
pub use model::{
    apply_deviation, Beta, Configuration, ContractGraph, Deviation, GameSetting, NodeId,
    PaymentMatrix, Topology, TrafficMatrix,
};
