//! Urban UAV target tracking: a grid-world simulator with wind and
//! obstacles, a piecewise tracking reward, DQN/DDQN learners on a small
//! from-scratch network, a heuristic baseline, and tracking metrics.

// `!(x > 0.0)` style checks are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod baseline;
pub mod config;
pub mod error;
pub mod experiment;
pub mod learner;
pub mod metrics;
pub mod neural;
pub mod observation;
pub mod reward;
pub mod rng;
pub mod rollout;
pub mod scalar;
pub mod sim;
pub mod trajectory;

pub use error::{Error, Result};
pub use scalar::Scalar;

/// Single-precision action-value network used for training.
pub type QNet = neural::QNetwork<f32>;
/// Double-precision network, mainly for gradient checks.
pub type QNet64 = neural::QNetwork<f64>;
