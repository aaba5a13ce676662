//! SMT (FBMC/OQAM) filter banks built on the PHYDYAS prototype filter.
//!
//! The basis pulse carrying the real symbol `s[m][n]` is
//!
//! ```text
//! f_{m,n}[l] = f[l - n M/2] e^{j 2 pi m l / M} e^{j pi (m + n) / 2}
//! ```
//!
//! Synthesis sums `s[m][n] f_{m,n}` and analysis projects onto `f_{m,n}`:
//! `z[m][n] = sum_l r[l] conj(f_{m,n}[l])`. Because the projection uses the
//! phase-carrying basis, the phase factor is already removed from `z` and
//! `Re{z}` recovers the symbols on an ideal channel. Both directions run as
//! polyphase structures around an `M`-point FFT; [`demodulate_at`] keeps the
//! direct inner-product definition for spot evaluation.

use std::fmt;
use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::signal::{j_pow, twiddle};
use crate::{Error, Result, C64};

const PHYDYAS_K2: [f64; 1] = [std::f64::consts::FRAC_1_SQRT_2];
const PHYDYAS_K3: [f64; 2] = [0.911_438, 0.411_438];
const PHYDYAS_K4: [f64; 3] = [0.971_960, std::f64::consts::FRAC_1_SQRT_2, 0.235_147];

/// Real, unit-energy prototype pulse of length `overlap * num_subcarriers`.
#[derive(Debug, Clone, PartialEq)]
pub struct PrototypeFilter {
    coeffs: Vec<f64>,
    num_subcarriers: usize,
    overlap: usize,
    // autocorrelation r[tau] = sum_u f[u] f[u + tau], stored for tau >= 0
    autocorr: Vec<f64>,
}

/// Designs the PHYDYAS prototype filter for `m` subcarriers and overlap `kappa`.
///
/// `f[0] = 0` and `f[l] = 1 + 2 sum_q (-1)^q H_q cos(2 pi q l / (kappa m))` for
/// `l = 1 .. kappa m - 1`, then scaled to unit energy.
pub fn design_phydyas(m: usize, kappa: usize) -> Result<PrototypeFilter> {
    if m < 2 || m % 2 != 0 {
        return Err(Error::Parameter(format!(
            "subcarrier count must be even and >= 2, got {m}"
        )));
    }
    let weights: &[f64] = match kappa {
        2 => &PHYDYAS_K2,
        3 => &PHYDYAS_K3,
        4 => &PHYDYAS_K4,
        _ => {
            return Err(Error::Parameter(format!(
                "PHYDYAS overlap factor must be 2, 3 or 4, got {kappa}"
            )))
        }
    };
    let len = kappa * m;
    let mut coeffs = vec![0.0; len];
    for (l, c) in coeffs.iter_mut().enumerate().skip(1) {
        let mut acc = 1.0;
        for (q, &h) in weights.iter().enumerate() {
            let q = q + 1;
            let sign = if q % 2 == 1 { -1.0 } else { 1.0 };
            acc += 2.0
                * sign
                * h
                * (2.0 * std::f64::consts::PI * (q * l) as f64 / len as f64).cos();
        }
        *c = acc;
    }
    PrototypeFilter::new(coeffs, m, kappa)
}

impl PrototypeFilter {
    /// Wraps arbitrary coefficients, normalizing them to unit energy.
    pub fn new(mut coeffs: Vec<f64>, num_subcarriers: usize, overlap: usize) -> Result<Self> {
        if num_subcarriers < 2 || num_subcarriers % 2 != 0 {
            return Err(Error::Parameter(format!(
                "subcarrier count must be even and >= 2, got {num_subcarriers}"
            )));
        }
        if coeffs.len() != overlap * num_subcarriers {
            return Err(Error::Parameter(format!(
                "prototype length {} != overlap {} x subcarriers {}",
                coeffs.len(),
                overlap,
                num_subcarriers
            )));
        }
        let energy: f64 = coeffs.iter().map(|c| c * c).sum();
        if !(energy > 0.0 && energy.is_finite()) {
            return Err(Error::Parameter("prototype has no energy".into()));
        }
        let scale = energy.sqrt().recip();
        coeffs.iter_mut().for_each(|c| *c *= scale);
        let autocorr = (0..coeffs.len())
            .map(|tau| {
                coeffs[..coeffs.len() - tau]
                    .iter()
                    .zip(&coeffs[tau..])
                    .map(|(a, b)| a * b)
                    .sum()
            })
            .collect();
        Ok(Self {
            coeffs,
            num_subcarriers,
            overlap,
            autocorr,
        })
    }

    pub fn coeffs(&self) -> &[f64] {
        &self.coeffs
    }

    pub fn len(&self) -> usize {
        self.coeffs.len()
    }

    pub fn is_empty(&self) -> bool {
        self.coeffs.is_empty()
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn overlap(&self) -> usize {
        self.overlap
    }

    /// Samples per half-symbol slot, `M/2`.
    pub fn half_symbol(&self) -> usize {
        self.num_subcarriers / 2
    }

    /// `sum_u f[u] f[u + lag]`; zero outside the filter support.
    pub fn autocorrelation(&self, lag: i64) -> f64 {
        let lag = lag.unsigned_abs() as usize;
        self.autocorr.get(lag).copied().unwrap_or(0.0)
    }

    /// Length of a synthesized burst of `num_slots` half-symbol slots.
    pub fn signal_len(&self, num_slots: usize) -> usize {
        if num_slots == 0 {
            return 0;
        }
        (num_slots - 1) * self.half_symbol() + self.len()
    }
}

/// A finite pulse placed at `start` on the sample axis.
#[derive(Debug, Clone, PartialEq)]
pub struct Pulse {
    pub start: usize,
    pub samples: Vec<C64>,
}

/// Phase-adjusted basis pulse `f_{m,n}[l]` for `l` in `start .. start + len`.
pub fn basis_pulse(filter: &PrototypeFilter, m: usize, n: usize) -> Pulse {
    let big_m = filter.num_subcarriers();
    assert!(m < big_m, "subcarrier index {m} out of range");
    let start = n * filter.half_symbol();
    let phase = j_pow((m + n) as i64);
    let samples = filter
        .coeffs()
        .iter()
        .enumerate()
        .map(|(u, &f)| f * twiddle((m * (start + u)) as i64, big_m) * phase)
        .collect();
    Pulse { start, samples }
}

/// `<signal, pulse> = sum_l signal[l] conj(pulse[l])`, with `signal` zero outside its range.
pub fn inner_product(signal: &[C64], pulse: &Pulse) -> C64 {
    pulse
        .samples
        .iter()
        .enumerate()
        .filter_map(|(u, p)| signal.get(pulse.start + u).map(|x| x * p.conj()))
        .sum()
}

/// Direct single-point analysis `z[m][n] = <r, f_{m,n}>`.
pub fn demodulate_at(signal: &[C64], filter: &PrototypeFilter, m: usize, n: usize) -> C64 {
    inner_product(signal, &basis_pulse(filter, m, n))
}

/// Real data symbols for `K` users on an `M x n_slots` grid, with per-user power scaling.
#[derive(Debug, Clone, PartialEq)]
pub struct SymbolFrame {
    num_users: usize,
    num_subcarriers: usize,
    num_slots: usize,
    symbols: Vec<f64>,
    power: Vec<f64>,
}

impl SymbolFrame {
    pub fn zeros(num_users: usize, num_subcarriers: usize, num_slots: usize) -> Self {
        Self {
            num_users,
            num_subcarriers,
            num_slots,
            symbols: vec![0.0; num_users * num_subcarriers * num_slots],
            power: vec![1.0; num_users],
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    fn index(&self, k: usize, m: usize, n: usize) -> usize {
        debug_assert!(k < self.num_users && m < self.num_subcarriers && n < self.num_slots);
        (k * self.num_subcarriers + m) * self.num_slots + n
    }

    pub fn get(&self, k: usize, m: usize, n: usize) -> f64 {
        self.symbols[self.index(k, m, n)]
    }

    pub fn set(&mut self, k: usize, m: usize, n: usize, value: f64) {
        let idx = self.index(k, m, n);
        self.symbols[idx] = value;
    }

    /// Symbols of user `k` on subcarrier `m`, indexed by slot.
    pub fn row(&self, k: usize, m: usize) -> &[f64] {
        let start = self.index(k, m, 0);
        &self.symbols[start..start + self.num_slots]
    }

    pub fn power_coeffs(&self) -> &[f64] {
        &self.power
    }

    pub fn set_power_coeffs(&mut self, power: Vec<f64>) -> Result<()> {
        if power.len() != self.num_users {
            return Err(Error::Dimension(format!(
                "{} power coefficients for {} users",
                power.len(),
                self.num_users
            )));
        }
        if power.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Parameter("power coefficients must be positive".into()));
        }
        self.power = power;
        Ok(())
    }
}

/// Analyzed samples `z[i][m][n]` for `N` antennas.
#[derive(Debug, Clone, PartialEq)]
pub struct DemodGrid {
    num_antennas: usize,
    num_subcarriers: usize,
    num_slots: usize,
    samples: Vec<C64>,
}

impl DemodGrid {
    pub fn zeros(num_antennas: usize, num_subcarriers: usize, num_slots: usize) -> Self {
        Self {
            num_antennas,
            num_subcarriers,
            num_slots,
            samples: vec![C64::new(0.0, 0.0); num_antennas * num_subcarriers * num_slots],
        }
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_slots(&self) -> usize {
        self.num_slots
    }

    fn index(&self, i: usize, m: usize, n: usize) -> usize {
        debug_assert!(i < self.num_antennas && m < self.num_subcarriers && n < self.num_slots);
        (i * self.num_subcarriers + m) * self.num_slots + n
    }

    pub fn get(&self, i: usize, m: usize, n: usize) -> C64 {
        self.samples[self.index(i, m, n)]
    }

    /// Samples of antenna `i` on subcarrier `m`, indexed by slot.
    pub fn row(&self, i: usize, m: usize) -> &[C64] {
        let start = self.index(i, m, 0);
        &self.samples[start..start + self.num_slots]
    }

    pub fn row_mut(&mut self, i: usize, m: usize) -> &mut [C64] {
        let start = self.index(i, m, 0);
        &mut self.samples[start..start + self.num_slots]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.samples
    }

    /// The first `n` antennas.
    pub fn first_antennas(&self, n: usize) -> DemodGrid {
        let n = n.min(self.num_antennas);
        DemodGrid {
            num_antennas: n,
            num_subcarriers: self.num_subcarriers,
            num_slots: self.num_slots,
            samples: self.samples[..n * self.num_subcarriers * self.num_slots].to_vec(),
        }
    }
}

/// Polyphase SMT transmitter and receiver for one prototype filter.
#[derive(Clone)]
pub struct FilterBank {
    filter: PrototypeFilter,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl fmt::Debug for FilterBank {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.debug_struct("FilterBank")
            .field("num_subcarriers", &self.filter.num_subcarriers)
            .field("overlap", &self.filter.overlap)
            .finish()
    }
}

impl FilterBank {
    pub fn new(filter: PrototypeFilter) -> Self {
        let mut planner = FftPlanner::new();
        let fft = planner.plan_fft_forward(filter.num_subcarriers());
        let ifft = planner.plan_fft_inverse(filter.num_subcarriers());
        Self { filter, fft, ifft }
    }

    pub fn filter(&self) -> &PrototypeFilter {
        &self.filter
    }

    /// Combined OQAM phase `(-1)^{m n} j^{sign (m + n)}` of the polyphase factorization.
    fn slot_phase(m: usize, n: usize, sign: i64) -> C64 {
        j_pow(2 * ((m * n) % 2) as i64 + sign * (m + n) as i64)
    }

    /// `x_k[l] = sqrt(mu_k) sum_{m,n} s[k][m][n] f_{m,n}[l]` for one user.
    pub fn synthesize_user(&self, frame: &SymbolFrame, k: usize) -> Vec<C64> {
        let big_m = self.filter.num_subcarriers();
        let half = self.filter.half_symbol();
        let n_slots = frame.num_slots();
        let mut out = vec![C64::new(0.0, 0.0); self.filter.signal_len(n_slots)];
        let gain = frame.power_coeffs()[k].sqrt();
        let mut buf = vec![C64::new(0.0, 0.0); big_m];
        for n in 0..n_slots {
            let mut any = false;
            for (m, b) in buf.iter_mut().enumerate() {
                let s = frame.get(k, m, n);
                any |= s != 0.0;
                *b = Self::slot_phase(m, n, 1) * (s * gain);
            }
            if !any {
                continue;
            }
            self.ifft.process(&mut buf);
            let base = n * half;
            for (u, &f) in self.filter.coeffs().iter().enumerate() {
                out[base + u] += buf[u % big_m] * f;
            }
        }
        out
    }

    /// Synthesizes every user of the frame.
    pub fn synthesize(&self, frame: &SymbolFrame) -> Result<Vec<Vec<C64>>> {
        if frame.num_subcarriers() != self.filter.num_subcarriers() {
            return Err(Error::Dimension(format!(
                "frame has {} subcarriers, filter bank {}",
                frame.num_subcarriers(),
                self.filter.num_subcarriers()
            )));
        }
        Ok((0..frame.num_users())
            .map(|k| self.synthesize_user(frame, k))
            .collect())
    }

    fn analyze_into(&self, signal: &[C64], n_slots: usize, out: &mut [C64]) -> Result<()> {
        let needed = self.filter.signal_len(n_slots);
        if signal.len() < needed {
            return Err(Error::Length {
                needed,
                actual: signal.len(),
            });
        }
        let big_m = self.filter.num_subcarriers();
        let half = self.filter.half_symbol();
        let mut buf = vec![C64::new(0.0, 0.0); big_m];
        for n in 0..n_slots {
            buf.iter_mut().for_each(|b| *b = C64::new(0.0, 0.0));
            let window = &signal[n * half..n * half + self.filter.len()];
            for (u, (&x, &f)) in window.iter().zip(self.filter.coeffs()).enumerate() {
                buf[u % big_m] += x * f;
            }
            self.fft.process(&mut buf);
            for (m, &b) in buf.iter().enumerate() {
                out[m * n_slots + n] = b * Self::slot_phase(m, n, -1);
            }
        }
        Ok(())
    }

    /// Analyzes a single-antenna signal into `n_slots` slots.
    pub fn analyze(&self, signal: &[C64], n_slots: usize) -> Result<DemodGrid> {
        self.analyze_antennas(std::slice::from_ref(&signal.to_vec()), n_slots)
    }

    /// Analyzes one signal per antenna.
    pub fn analyze_antennas(&self, signals: &[Vec<C64>], n_slots: usize) -> Result<DemodGrid> {
        let big_m = self.filter.num_subcarriers();
        let mut grid = DemodGrid::zeros(signals.len(), big_m, n_slots);
        let per_antenna = big_m * n_slots;
        for (signal, out) in signals.iter().zip(grid.samples.chunks_mut(per_antenna.max(1))) {
            self.analyze_into(signal, n_slots, out)?;
        }
        Ok(grid)
    }
}

/// Convenience wrapper around [`FilterBank::synthesize`].
pub fn synthesize(frame: &SymbolFrame, filter: &PrototypeFilter) -> Result<Vec<Vec<C64>>> {
    FilterBank::new(filter.clone()).synthesize(frame)
}

/// Convenience wrapper around [`FilterBank::analyze`].
pub fn analyze(signal: &[C64], filter: &PrototypeFilter, n_slots: usize) -> Result<DemodGrid> {
    FilterBank::new(filter.clone()).analyze(signal, n_slots)
}

/// Largest deviation from real-field orthogonality over a neighbourhood of
/// `+-freq_span` subcarriers and `+-time_span` slots.
pub fn orthogonality_residual(filter: &PrototypeFilter, freq_span: usize, time_span: usize) -> f64 {
    let big_m = filter.num_subcarriers();
    let m0 = big_m / 2;
    let fs = freq_span.min(big_m / 2) as i64;
    let mut worst: f64 = 0.0;
    // Two reference slots cover both parities of the (-1)^{(m - m') n} term.
    for n0 in [time_span, time_span + 1] {
        let reference = basis_pulse(filter, m0, n0);
        for dm in -fs..=fs {
            let m = (m0 as i64 + dm).rem_euclid(big_m as i64) as usize;
            for dn in -(time_span as i64)..=time_span as i64 {
                let n = (n0 as i64 + dn) as usize;
                let other = basis_pulse(filter, m, n);
                let ip = pulse_inner(&reference, &other).re;
                let dev = if dm == 0 && dn == 0 { (ip - 1.0).abs() } else { ip.abs() };
                worst = worst.max(dev);
            }
        }
    }
    worst
}

fn pulse_inner(a: &Pulse, b: &Pulse) -> C64 {
    let lo = a.start.max(b.start);
    let hi = (a.start + a.samples.len()).min(b.start + b.samples.len());
    (lo..hi)
        .map(|l| a.samples[l - a.start] * b.samples[l - b.start].conj())
        .sum()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn phydyas_is_symmetric_unit_energy() {
        for kappa in [2, 3, 4] {
            let f = design_phydyas(64, kappa).unwrap();
            let c = f.coeffs();
            assert_eq!(c.len(), kappa * 64);
            assert_eq!(c[0], 0.0);
            let e: f64 = c.iter().map(|x| x * x).sum();
            assert!((e - 1.0).abs() < 1e-12);
            for l in 1..c.len() {
                assert!((c[l] - c[c.len() - l]).abs() < 1e-12);
            }
        }
    }

    #[test]
    fn rejects_bad_parameters() {
        assert!(design_phydyas(64, 5).is_err());
        assert!(design_phydyas(63, 4).is_err());
        assert!(design_phydyas(0, 4).is_err());
    }

    #[test]
    fn basis_pulse_identity_and_delay() {
        let f = design_phydyas(16, 4).unwrap();
        let p = basis_pulse(&f, 0, 0);
        assert_eq!(p.start, 0);
        for (s, c) in p.samples.iter().zip(f.coeffs()) {
            assert!((s - C64::new(*c, 0.0)).norm() < 1e-15);
        }
        let p = basis_pulse(&f, 0, 1);
        assert_eq!(p.start, 8);
        for (s, c) in p.samples.iter().zip(f.coeffs()) {
            assert!((s - C64::new(0.0, *c)).norm() < 1e-15);
        }
    }

    #[test]
    fn single_symbol_synthesizes_its_pulse() {
        let f = design_phydyas(16, 4).unwrap();
        let mut frame = SymbolFrame::zeros(1, 16, 3);
        frame.set(0, 0, 0, 1.0);
        let x = synthesize(&frame, &f).unwrap();
        let p = basis_pulse(&f, 0, 0);
        assert_eq!(x[0].len(), f.signal_len(3));
        for (a, b) in x[0].iter().zip(&p.samples) {
            assert!((a - b).norm() < 1e-12);
        }
        assert!(x[0][p.samples.len()..].iter().all(|v| v.norm() < 1e-12));
    }

    #[test]
    fn zero_frame_and_zero_signal() {
        let f = design_phydyas(16, 4).unwrap();
        let frame = SymbolFrame::zeros(2, 16, 5);
        let x = synthesize(&frame, &f).unwrap();
        assert!(x.iter().flatten().all(|v| *v == C64::new(0.0, 0.0)));
        let grid = analyze(&x[0], &f, 5).unwrap();
        assert!(grid.as_slice().iter().all(|v| v.norm() == 0.0));
    }

    #[test]
    fn short_signal_is_a_length_error() {
        let f = design_phydyas(16, 4).unwrap();
        let err = analyze(&vec![C64::new(0.0, 0.0); 70], &f, 2).unwrap_err();
        assert!(matches!(err, Error::Length { needed: 72, actual: 70 }));
    }

    #[test]
    fn lone_symbol_self_gain_is_one() {
        let f = design_phydyas(64, 4).unwrap();
        let bank = FilterBank::new(f.clone());
        let mut frame = SymbolFrame::zeros(1, 64, 12);
        frame.set(0, 17, 6, 1.0);
        let x = bank.synthesize(&frame).unwrap();
        let grid = bank.analyze(&x[0], 12).unwrap();
        assert!((grid.get(0, 17, 6).re - 1.0).abs() < 1e-2);
    }

    #[test]
    fn power_scaling_applies_sqrt_mu() {
        let f = design_phydyas(16, 4).unwrap();
        let mut frame = SymbolFrame::zeros(1, 16, 4);
        frame.set(0, 3, 1, 1.0);
        let base = synthesize(&frame, &f).unwrap();
        frame.set_power_coeffs(vec![4.0]).unwrap();
        let scaled = synthesize(&frame, &f).unwrap();
        for (a, b) in base[0].iter().zip(&scaled[0]) {
            assert!((a * 2.0 - b).norm() < 1e-12);
        }
        assert!(frame.set_power_coeffs(vec![0.0]).is_err());
    }

    #[test]
    fn self_residual_is_zero_for_the_identical_pair() {
        let f = design_phydyas(64, 4).unwrap();
        let p = basis_pulse(&f, 0, 0);
        assert!((pulse_inner(&p, &p).re - 1.0).abs() < 1e-12);
    }
}
