//! Pseudo-spectral solver for the two-dimensional incompressible
//! Navier-Stokes equations with (piecewise-constant) variable density on the
//! periodic square, built around the Lagrangian flow map `X(t, y)`.
//!
//! The numerical core is generic over the scalar type ([`Real`]); the
//! aliases at the crate root fix it to `f64`, which is what the solver and
//! its diagnostics are tuned for.

pub mod density;
pub mod diagnostics;
pub mod error;
pub mod field;
pub mod flow_map;
pub mod grid;
pub mod interp;
pub mod lift;
pub mod scalar;
pub mod scenarios;
pub mod snapshot;
pub mod spectral;
pub mod stokes;

pub use density::{Density, InterfaceMarkers, Region};
pub use error::{Error, Result};
pub use field::{Mat2, MatrixField, ScalarField, VectorField};
pub use flow_map::{FlowMap, InverseJacobian, InverseMethod};
pub use grid::Grid;
pub use interp::Interpolation;
pub use scalar::Real;
pub use snapshot::Snapshot;

pub type Grid64 = Grid<f64>;
pub type ScalarField64 = ScalarField<f64>;
pub type VectorField64 = VectorField<f64>;
pub type MatrixField64 = MatrixField<f64>;

pub type Grid32 = Grid<f32>;
pub type ScalarField32 = ScalarField<f32>;
pub type VectorField32 = VectorField<f32>;
