//! Slow, obviously-correct reference implementations. They share no code
//! with the engine beyond its data types, so agreement between the two is
//! evidence rather than tautology.

pub mod blur;
pub mod geometry;
pub mod markov;
pub mod stats;
pub mod tree;
