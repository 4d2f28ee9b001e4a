//! Simulation and power-variation inference for Brownian and Lévy
//! semistationary processes with the gamma kernel.

// `!(x > 0.0)` guards are deliberate: they also reject NaN.
#![allow(clippy::neg_cmp_op_on_partial_ord)]

pub mod approx_error;
pub mod error;
pub mod estimate;
pub mod harness;
pub mod io;
pub mod kernel;
pub mod linalg;
pub mod simulate;
pub mod specfun;
pub mod variation;
pub mod voltest;

pub use approx_error::{C3Form, ErrorBreakdown, ErrorCurvePoint};
pub use error::{Error, Result};
pub use estimate::{AlphaTest, CofEstimate, Lambda2Matrix};
pub use kernel::{GammaKernelParams, Kernel, ProcessMoments};
pub use simulate::{RngSeed, SamplePath, SimGrid, VolatilitySpec};
pub use variation::{PowerVariation, RrvPath};
pub use voltest::{CritvalMethod, Metric, RrvCi, VolTestResult};
