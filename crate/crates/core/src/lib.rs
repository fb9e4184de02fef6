//! Lie and Noether point symmetries of ẍⁱ + Γⁱⱼₖẋʲẋᵏ + ω(t)V'ⁱ = 0, read off
//! from the collineations of the metric, with numeric verification and the
//! damped ↔ time-dependent change of parameter.
//!
//! The geometric layer is generic over [`scalar::Scalar`]; the classifiers
//! and the verifier work in `f64` and the aliases below name those types.

pub mod conditions;
pub mod engine;
pub mod error;
pub mod fields;
pub mod geometry;
pub mod lie;
pub mod linalg;
pub mod noether;
pub mod ode;
pub mod poly;
pub mod quad;
pub mod reparam;
pub mod scalar;
pub mod symmetry;
pub mod verifier;

pub use error::{Error, Result};

pub type ScalarField64 = fields::ScalarField<f64>;
pub type OmegaProfile64 = fields::OmegaProfile<f64>;
pub type MetricSpace64 = geometry::MetricSpace<f64>;
pub type Collineation64 = geometry::Collineation<f64>;
pub type Poly64 = poly::Poly<f64>;
