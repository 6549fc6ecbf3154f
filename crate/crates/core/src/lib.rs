//! Timed process algebra for virtualised cloud networks, with a flow security type
//! system and a bounded non-interference checker for cache timing channels.

pub mod cli;
pub mod config;
pub mod hash;
pub mod lattice;
pub mod model;
pub mod syntax;
pub mod semantics;
pub mod typesystem;
pub mod flowcheck;
