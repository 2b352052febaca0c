//! Exact 1-bit ADC statistics, SINDR evaluation and uplink power control for
//! distributed massive MIMO.

pub mod bussgang;
pub mod error;
pub mod gradients;
pub mod harness;
pub mod linalg;
pub mod scenario;
pub mod solvers;
#[doc(hidden)]
pub mod testing;

pub use error::{Error, Result};
