//! Multi-task reinforcement learning with auxiliary-task distillation on a
//! small rearrangement gridworld.
//!
//! * [`env`]: the MiniRearrange simulator, its tasks, rewards and oracle plan.
//! * [`relevance`]: which auxiliary task applies to a main-task state.
//! * [`nn`]: dense policy/value network with exact gradients and Adam.
//! * [`trainer`]: rollouts, GAE, return normalization, losses and the update loop.
//! * [`checkpoint`]: binary snapshot of a training run.

pub mod checkpoint;
pub mod env;
pub mod nn;
pub mod relevance;
pub mod trainer;
