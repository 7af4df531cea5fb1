//! Tabletop environment in which a planner "chats" with the world: it issues
//! `robot.<skill>(<object>)` commands, receives natural-language feedback from
//! sound, touch and weight modules, and must pick the object matching a
//! latent-property instruction.
//!
//! Probability arithmetic is generic over [`scalar::Scalar`]; the aliases
//! below fix the two instantiations used in practice.

pub mod agent;
pub mod bench;
pub mod fixtures;
pub mod grammar;
pub mod perception;
pub mod planner;
pub mod prompt;
pub mod scalar;
pub mod world;

pub use num_rational::BigRational;

/// Exact rational probability.
pub type Rational = BigRational;

pub type ConfusionMatrixF64 = perception::ConfusionMatrix<f64>;
pub type ExactConfusionMatrix = perception::ConfusionMatrix<Rational>;
pub type SoundSensor = perception::SoundSensorModel<f64>;
