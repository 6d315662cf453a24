//! Difference transmit-antenna selection for an underlay cognitive-radio
//! secondary link.
//!
//! The secondary transmitter owns `M` antennas and picks one per fading
//! realization by maximizing `Z_i = δ·γ_{s,i} − (1−δ)·γ_{p,i}`, trading data
//! gain toward its own receiver against interference gain toward the primary
//! receiver. This crate provides:
//!
//! * closed-form distributions of the selected link gains, ergodic mutual
//!   information, outage probability and its small-argument expansion
//!   ([`analytic`]);
//! * the statistics-based transmit power rule under an average-interference
//!   and a peak-power constraint ([`power`]);
//! * joint selection-weight / power optimization ([`optimizer`]);
//! * a reproducible Monte Carlo engine used both as an oracle for the closed
//!   forms and as the only route for ratio-selection baselines
//!   ([`montecarlo`]);
//! * sweep presets and CSV emission for the `diffsel` command-line tool
//!   ([`experiments`]).
//!
//! All powers are linear inside the library; dB conversion happens at the CLI
//! boundary. Mutual information is reported in bits/s/Hz.

pub mod analytic;
pub mod error;
pub mod exec;
pub mod experiments;
pub mod model;
pub mod montecarlo;
pub mod optimizer;
pub mod power;
pub mod selection;
pub mod special_math;

pub use error::{Error, Result};
pub use model::{Constraints, DerivedWeights, GainSample, SelectionWeight, SystemParams};
