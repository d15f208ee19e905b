//! Numerics for the mean first passage time of Brownian motion escaping a
//! bounded 3-D domain through a small absorbing geodesic-ellipse window on an
//! otherwise reflecting boundary.
//!
//! The crate combines four ingredients:
//! - boundary geometry (curvature frames, geodesics, the window chart),
//! - integral operators on the unit disk tied to the X-ray transform,
//! - a Galerkin/Nyström boundary-element solver for the Neumann Green
//!   function and the auxiliary interior field,
//! - a reflected Euler–Maruyama particle simulator for validation,
//!
//! which feed the asymptotic expansion of the averaged escape time.

pub mod asymptotics;
pub mod bem;
pub mod error;
pub mod geometry;
pub mod quad;
pub mod sim;
pub mod xray;

pub use error::{Error, Result};
