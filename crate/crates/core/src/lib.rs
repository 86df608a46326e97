//! Consistent query answering over spatial databases whose semantic integrity
//! constraints are denials over topological predicates.

pub mod bench;
pub mod constraints;
pub mod cqa_core;
pub mod geometry;
pub mod model;
pub mod query;
pub mod repair;
pub mod synthetic;
