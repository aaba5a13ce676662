//! Composite pulses at half-symbol spacing.
//!
//! On subcarrier `m`, a real symbol sent at slot `n'` through an equivalent
//! channel `h` shows up at the combiner output of slot `n` with weight
//! `g[n - n'] (-j)^{n - n'}`, where
//!
//! ```text
//! g[d] = sum_q h[q] e^{-j 2 pi m q / M} R(d M/2 - q)
//! ```
//!
//! and `R` is the autocorrelation of the prototype filter. When `h` is the
//! large-antenna limit `p[q] e^{j 2 pi q m / M}` the modulation cancels and `g`
//! becomes the PDP pulse `(f * p * f)` sampled every `M/2`, the same on every
//! subcarrier. With `h = delta` it reduces to the Nyquist target `R(d M/2)`.

use crate::channel::PdpProfile;
use crate::filterbank::PrototypeFilter;
use crate::signal::twiddle;
use crate::C64;

/// A pulse `g[d]` stored as `samples[j] = g[j - origin]`.
#[derive(Debug, Clone, PartialEq)]
pub struct CompositePulse {
    pub samples: Vec<C64>,
    pub origin: usize,
}

impl CompositePulse {
    /// `g[d]`, zero outside the stored range.
    pub fn at(&self, d: i64) -> C64 {
        let j = d + self.origin as i64;
        if j < 0 {
            return C64::new(0.0, 0.0);
        }
        self.samples.get(j as usize).copied().unwrap_or(C64::new(0.0, 0.0))
    }

    /// Storage index of the largest-magnitude sample; ties go to the smaller index.
    pub fn peak_index(&self) -> usize {
        let mut best = 0;
        for (j, s) in self.samples.iter().enumerate() {
            if s.norm() > self.samples[best].norm() {
                best = j;
            }
        }
        best
    }

    pub fn energy(&self) -> f64 {
        self.samples.iter().map(|s| s.norm_sqr()).sum()
    }
}

/// What a composite pulse is built from.
#[derive(Debug, Clone, Copy)]
pub enum PulseSource<'a> {
    /// A power delay profile; the result does not depend on the subcarrier.
    Pdp(&'a PdpProfile),
    /// Own-user equivalent channel taps on a given subcarrier.
    Equivalent(&'a [C64]),
}

/// Pulse for an already de-rotated channel `h~[q]`.
fn pulse_from_baseband(taps: &[C64], filter: &PrototypeFilter) -> CompositePulse {
    let half = filter.half_symbol() as i64;
    let span = filter.len() as i64 - 1;
    let last = taps.len().max(1) as i64 - 1;
    let d_min = -(span / half);
    let d_max = (span + last) / half;
    let samples = (d_min..=d_max)
        .map(|d| {
            taps.iter()
                .enumerate()
                .map(|(q, &h)| h * filter.autocorrelation(d * half - q as i64))
                .sum()
        })
        .collect();
    CompositePulse {
        samples,
        origin: (-d_min) as usize,
    }
}

/// `g[d] = (f * p * f)` at lag `d M/2`.
pub fn pdp_pulse(pdp: &PdpProfile, filter: &PrototypeFilter) -> CompositePulse {
    let taps: Vec<C64> = pdp.taps().iter().map(|&p| C64::new(p, 0.0)).collect();
    pulse_from_baseband(&taps, filter)
}

/// Per-subcarrier pulse of equivalent channel taps `h` on subcarrier `m`.
pub fn subcarrier_pulse(taps: &[C64], filter: &PrototypeFilter, m: usize) -> CompositePulse {
    let big_m = filter.num_subcarriers();
    let baseband: Vec<C64> = taps
        .iter()
        .enumerate()
        .map(|(q, &h)| h * twiddle(-((m * q) as i64), big_m))
        .collect();
    pulse_from_baseband(&baseband, filter)
}

/// Dispatches to [`pdp_pulse`] or [`subcarrier_pulse`].
pub fn composite_pulse(source: PulseSource<'_>, filter: &PrototypeFilter, m: usize) -> CompositePulse {
    match source {
        PulseSource::Pdp(p) => pdp_pulse(p, filter),
        PulseSource::Equivalent(h) => subcarrier_pulse(h, filter, m),
    }
}

/// The ideal-channel pulse `R(d M/2)`.
pub fn nyquist_target(filter: &PrototypeFilter) -> CompositePulse {
    pdp_pulse(&PdpProfile::delta(), filter)
}
