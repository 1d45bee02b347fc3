//! Superstabilizing state-feedback synthesis from interval-quantized
//! state-transition data, under logarithmically quantized actuation.
//!
//! The crate is organised bottom-up:
//!
//! * [`quantizer`]: logarithmic input quantizer and interval (bin) quantization of data.
//! * [`sysmodel`]: plants, closed-loop metrics, certificates and quantized simulation.
//! * [`consistency`]: datasets and the polytope of data-consistent plants.
//! * [`lp`]: LP modelling layer, solver backend, Farkas containment blocks and
//!   brute-force polytope oracles.
//! * [`nominal`]: known-plant synthesis (M-form and sign-form LPs).
//! * [`synth_sign`]: exact robust sign-enumerated data-driven LP.
//! * [`synth_aarc`]: affinely adjustable robust counterpart.
//! * [`verify`]: solver-independent audit of a candidate controller.
//! * [`experiments`]: built-in systems, minimal-density bisection and sweeps.

pub mod consistency;
pub mod error;
pub mod experiments;
pub mod linalg;
pub mod lp;
pub mod nominal;
mod program;
pub mod quantizer;
pub mod synth_aarc;
pub mod synth_sign;
pub mod sysmodel;
pub mod verify;

pub use consistency::{DataSample, Dataset, Excitation};
pub use error::{Error, Result};
pub use lp::{LpModel, LpSolution, LpStatus, Polytope};
pub use program::{Objective, StabilityMode, SynthesisOutcome};
pub use quantizer::{Interval, Partition, QuantizerSpec};
pub use sysmodel::{LinearSystem, StabCertificate};
pub use verify::VerificationReport;
