//! Goal inference for agents that move by randomized path planning.
//!
//! Agents are modeled as following paths produced by an RRT-based planner
//! with local refinement. The planner is treated as a likelihood-free random
//! choice inside small fixed-structure probabilistic programs, and posterior
//! inference over goals (and beliefs) runs through two Metropolis-Hastings
//! variants: Cascading Resimulation MH, which cancels unknown likelihoods by
//! resimulating from the prior, and Nested Inference MH, which plugs in
//! importance-sampled likelihood estimates, optionally proposed by a learned
//! neural network.

pub mod commands;
pub mod eval;
pub mod geom;
pub mod models;
pub mod neural;
pub mod inference;
pub mod planner;
pub mod render;
pub mod rng;
pub mod scenario;
pub mod stats;
pub mod trace;
