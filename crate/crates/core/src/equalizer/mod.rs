//! Two-stage receiver: per-subcarrier linear combining followed by a short
//! fractionally spaced equalizer (FSE) per user and subcarrier.
//!
//! The combiner separates users and equalizes the band centers. What remains
//! on each subcarrier is the composite pulse `g[d]` of the equivalent channel
//! seen through the prototype filter; the FSE reshapes it back into a Nyquist
//! pulse. Imperfect channel estimates bias the equivalent channel, which the
//! [`csi`] corrections undo.

pub mod combiner;
pub mod csi;
pub mod equivalent;
pub mod fse;
pub mod pulse;

pub use combiner::{
    build_combiner, combine_stream, subcarrier_gains, CombinerBank, CombinerKind, SubcarrierGains,
};
pub use csi::{apply_csi_correction, correct_pdp, CorrectionContext, CorrectionMode, ErrorStatsView};
pub use equivalent::{equivalent_channel, EquivalentChannel, EquivalentMode};
pub use fse::{approximate_pdp, design_fse, equalize_stream, Fse, FseBank, FseKind};
pub use pulse::{composite_pulse, nyquist_target, pdp_pulse, subcarrier_pulse, CompositePulse, PulseSource};
