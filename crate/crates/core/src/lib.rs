//! Online learning for repeated Stackelberg games with side information.
//!
//! A leader commits to a mixed strategy each round after seeing a context;
//! a follower of unknown type best-responds. This crate provides the game
//! model, the best-response region geometry, the four learners (full
//! information and bandit feedback, stochastic or adversarial sources), the
//! environments that drive them, and a harness measuring regret against the
//! best fixed context-to-strategy policy in hindsight.

pub mod env;
pub mod error;
pub mod game;
pub mod geometry;
pub mod harness;
pub mod learners;
pub mod par;

pub use error::{Error, Result};
pub use game::{Context, ContextKey, FollowerAction, GameInstance, MixedStrategy, RoundRecord};
pub use par::Exec;
