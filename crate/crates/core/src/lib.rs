//! Minimal dynamic extensions of nonlinear control systems.
//!
//! Systems are described by symbolic expressions, studied through their
//! contact Pfaffian systems, and extended one output at a time until the
//! extended system is static feedback linearizable.

pub mod error;
pub mod expr;
pub mod numeric;

pub use error::{Error, Result};
pub mod exterior;
pub mod linalg;
pub mod pfaff;
pub mod extend;
pub mod foliation;
pub mod system;
pub mod search;
pub mod cli;
