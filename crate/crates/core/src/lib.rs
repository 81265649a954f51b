//! Spacecraft with a single variable-speed control moment gyroscope, treated
//! as a mechanical system on the trivial bundle `SO(3) × S¹ × S¹`.
//!
//! The attitude `R_s` is the group variable; the gimbal angle `β` and wheel
//! angle `γ` are the shape. Modules build up from rotations to the metric and
//! momentum map, the equations of motion, the mechanical connection, and
//! Lie-group integration.

// `!(x <= tol)` is used so that NaN fails the test.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod connection;
pub mod dynamics;
pub mod error;
pub mod integrators;
pub mod liegroup;
pub mod model;
pub mod sampling;
pub mod scenario;
pub mod verify;

pub use error::{Error, Result};

#[cfg(doctest)]
mod book {
    #[doc = include_str!("../../../README.md")]
    pub mod readme {}
    #[doc = include_str!("../../../book/src/introduction.md")]
    pub mod introduction {}
    #[doc = include_str!("../../../book/src/rotations.md")]
    pub mod rotations {}
    #[doc = include_str!("../../../book/src/inertia.md")]
    pub mod inertia {}
    #[doc = include_str!("../../../book/src/momentum.md")]
    pub mod momentum {}
    #[doc = include_str!("../../../book/src/dynamics.md")]
    pub mod dynamics {}
    #[doc = include_str!("../../../book/src/newtonian.md")]
    pub mod newtonian {}
    #[doc = include_str!("../../../book/src/connection.md")]
    pub mod connection {}
    #[doc = include_str!("../../../book/src/reconstruction.md")]
    pub mod reconstruction {}
    #[doc = include_str!("../../../book/src/integrators.md")]
    pub mod integrators {}
    #[doc = include_str!("../../../book/src/cli.md")]
    pub mod cli {}
}
