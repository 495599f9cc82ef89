//! Discriminability-motivated skill discovery with learned goal selection.
//!
//! The crate trains a goal-conditioned policy whose intrinsic reward is the
//! log-probability a discriminator assigns to the pursued goal, and compares
//! three ways of choosing which goal to practise next: uniform sampling, a
//! REINFORCE-learned categorical prior, and Diversity Progress, a bandit that
//! prefers goals whose practice most improves discrimination over all goals.

#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod analysis;
pub mod discriminator;
pub mod envs;
pub mod error;
pub mod goal_select;
pub mod numkit;
pub mod policy;
pub mod runner;

pub use envs::Goal;
pub use error::{Error, Result};
