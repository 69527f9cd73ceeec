//! Strategic multi-armed bandits: arms that shape the reward they deliver,
//! principals running UCB or ε-greedy, and a second-price auction mechanism
//! that makes honest reporting optimal for the arms.

pub mod algorithms;
pub mod cli;
pub mod engine;
pub mod mechanism;
pub mod model;
pub mod rng;
pub mod strategies;
