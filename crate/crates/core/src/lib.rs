//! Link-level simulation of an FBMC/OQAM massive-MIMO uplink.
//!
//! The crate covers the whole receiver chain:
//!
//! * [`filterbank`]: PHYDYAS prototype design and the SMT synthesis/analysis banks.
//! * [`channel`]: TDL-C and exponential power delay profiles, Rayleigh taps, AWGN.
//! * [`estimation`]: interleaved multiuser pilots and the joint MVU channel estimator.
//! * [`equalizer`]: per-subcarrier combiners, equivalent channels, composite pulses,
//!   fractionally spaced equalizers and imperfect-CSI corrections.
//! * [`cellfree`]: distributed-AP geometry, COST-Hata fading and fractional power control.
//! * [`ofdm`]: the CP-OFDM benchmark chain.
//! * [`harness`]: Monte Carlo experiment runner, metrics and CSV output.

pub mod cellfree;
pub mod channel;
pub mod equalizer;
pub mod error;
pub mod estimation;
pub mod filterbank;
pub mod harness;
pub mod ofdm;
pub mod qam;
pub mod rng;
pub mod signal;

pub use error::{Error, Result};

/// Complex sample type used throughout the crate.
pub type C64 = num_complex::Complex64;
