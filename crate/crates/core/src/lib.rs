//! External-positivity certificates for linear time-invariant systems.
//!
//! A system is certified when an ellipsoidal (second-order) cone exists that
//! contains every input column, whose dual contains every output row, and that
//! is invariant under the state dynamics. The search for the cone is posed as a
//! small semidefinite feasibility problem in coordinates that split off the
//! dominant eigenvalue.

pub mod error;
pub mod lti;
pub mod numkernel;
pub mod cone;
pub mod sdp;
pub mod certify;
pub mod corpus;
pub mod approx;
pub mod synth;
pub mod mor;

pub use error::{Error, Result};
pub use numkernel::{Domain, Matrix, Vector};
