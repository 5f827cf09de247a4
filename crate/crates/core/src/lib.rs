//! Simulation of time-averaged quantum field fluctuations with a prescribed
//! temporal correlation.
//!
//! Each simulated measurement is a Gaussian draw whose centre is shifted by a
//! factor `f` times the previous outcome. The crate provides:
//!
//! * [`kernels`]: closed-form correlation functions, their roots and integrals
//! * [`smearing`]: direct quadrature of the Lorentzian-smeared scalar correlator
//! * [`calibration`]: maps from a target correlation to the shift factor
//! * [`sampler`]: the shifted-Gaussian sampler and correlation sweeps
//! * [`walker`]: correlated random walks and their mean squared displacement
//! * [`io`]: CSV and manifest serialization

#![allow(
    clippy::excessive_precision,
    clippy::neg_cmp_op_on_partial_ord,
    clippy::needless_range_loop
)]

pub mod calibration;
pub mod error;
pub mod io;
pub mod kernels;
pub mod quadrature;
pub mod rng;
pub mod sampler;
pub mod smearing;
pub mod walker;

pub use calibration::{CalibrationMethod, CalibrationModel, CalibrationTable};
pub use error::{Error, Result};
pub use kernels::{CorrelationKernel, KernelKind};
pub use sampler::{ChainConfig, SamplerMode, ShiftChain, SweepConfig, SweepResult};
pub use smearing::{SmearingSpec, VerificationReport};
pub use walker::{WalkConfig, WalkEnsembleResult};
