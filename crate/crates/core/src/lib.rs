//! Diagnostics for periodic incompressible flow fields: mollification
//! commutators, the Duchon–Robert dissipation estimator, structure-function
//! exponents, and Eulerian/Lagrangian covering dimensions of dissipation
//! supports, together with the intermittency bound calculators.

pub mod commutators;
pub mod dissipation;
pub mod error;
pub mod fit;
pub mod flows;
pub mod geometry;
pub mod grid;
pub mod mollify;
pub mod regularity;
mod spectral;
pub mod synth;

pub use error::{Error, Result};
pub use grid::{Field, Grid, ScalarSeries, TimeGrid};
