//! Deterministic multi-agent simulator of the Megabike scenario.
//!
//! Groups of agents collectively pedal shared vehicles around a gridworld,
//! chasing lootboxes and fleeing an existential threat. Their decisions are
//! governed not by per-decision deliberation but by a mutually agreed
//! contract: a cache of matrix rules evaluated by [`rules`], stratified by
//! the action each rule constrains, and amendable at runtime through
//! majority-approved slack on the constraint bounds.

pub mod agents;
pub mod governance;
pub mod rules;
pub mod sim;
pub mod types;
pub mod world;
