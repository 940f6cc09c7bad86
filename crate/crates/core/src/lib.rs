//! Steady-state thermodynamics of a heat engine whose working substance is
//! a transmon qubit coupled to a pumped cavity and a cryogenic bath.
//!
//! * [`model`] holds the closed-form reduced-qubit physics.
//! * [`oracle`] rebuilds the same steady states from Lindblad generators.
//! * [`thermo`] integrates work and heat along quasi-static strokes.
//! * [`cycle`] assembles four-stroke cycles and sweeps them over the knob plane.
//! * [`cli`] is the command-line front end.

pub mod cli;
pub mod cycle;
pub mod error;
pub mod linalg;
pub mod model;
pub mod oracle;
pub mod quadrature;
pub mod thermo;

pub use error::{EngineError, Result};
