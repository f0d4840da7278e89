//! Recursive hierarchical cluster fields.
//!
//! Generates infinite-depth hierarchies from local refinement rules, learns
//! those rules from finite prefixes with a small MLP, and checks the metric
//! bounds that relate the finite truncations to the completed structure.

pub mod error;
pub mod eval;
pub mod generators;
pub mod geom;
pub mod hierarchy;
pub mod kdtree;
pub mod learn;
pub mod linalg;
pub mod metric;
pub mod plot;
pub mod rng;
pub mod scalar;
pub mod util;

pub use rng::SeedStream;
pub use scalar::Scalar;

/// Double-precision aliases for the generic core types; f32 works the same
/// way through the `Scalar` trait.
pub type Generator64 = generators::Generator<f64>;
pub type Hierarchy64 = hierarchy::Hierarchy<f64>;
pub type Mlp64 = learn::MlpParams<f64>;
