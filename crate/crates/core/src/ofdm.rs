//! CP-OFDM benchmark chain sharing channels, combiners and metrics with the
//! FBMC receiver. Transforms are unitary, so QAM symbols of unit energy give
//! unit average transmit power.

use std::sync::Arc;

use rustfft::{Fft, FftPlanner};

use crate::channel::ChannelRealization;
use crate::equalizer::combiner::{build_combiner, combine_stream, subcarrier_gains, CombinerKind};
use crate::filterbank::DemodGrid;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct OfdmConfig {
    pub num_subcarriers: usize,
    pub cp_length: usize,
}

impl OfdmConfig {
    pub fn new(num_subcarriers: usize, cp_length: usize) -> Result<Self> {
        if num_subcarriers == 0 {
            return Err(Error::Parameter("OFDM needs at least one subcarrier".into()));
        }
        Ok(Self {
            num_subcarriers,
            cp_length,
        })
    }

    pub fn symbol_len(&self) -> usize {
        self.num_subcarriers + self.cp_length
    }

    pub fn signal_len(&self, num_symbols: usize) -> usize {
        num_symbols * self.symbol_len()
    }

    /// Errors unless the cyclic prefix covers a channel of `channel_len` taps.
    pub fn check_channel(&self, channel_len: usize) -> Result<()> {
        if self.cp_length + 1 < channel_len {
            return Err(Error::Parameter(format!(
                "cyclic prefix {} shorter than channel length {} - 1",
                self.cp_length, channel_len
            )));
        }
        Ok(())
    }
}

/// Complex symbols per user, indexed `(user, symbol, subcarrier)`.
#[derive(Debug, Clone, PartialEq)]
pub struct OfdmFrame {
    num_users: usize,
    num_subcarriers: usize,
    num_symbols: usize,
    symbols: Vec<C64>,
    power: Vec<f64>,
}

impl OfdmFrame {
    pub fn zeros(num_users: usize, num_subcarriers: usize, num_symbols: usize) -> Self {
        Self {
            num_users,
            num_subcarriers,
            num_symbols,
            symbols: vec![C64::new(0.0, 0.0); num_users * num_subcarriers * num_symbols],
            power: vec![1.0; num_users],
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn num_symbols(&self) -> usize {
        self.num_symbols
    }

    fn index(&self, k: usize, t: usize, m: usize) -> usize {
        (k * self.num_symbols + t) * self.num_subcarriers + m
    }

    pub fn get(&self, k: usize, t: usize, m: usize) -> C64 {
        self.symbols[self.index(k, t, m)]
    }

    pub fn set(&mut self, k: usize, t: usize, m: usize, value: C64) {
        let idx = self.index(k, t, m);
        self.symbols[idx] = value;
    }

    pub fn power_coeffs(&self) -> &[f64] {
        &self.power
    }

    pub fn set_power_coeffs(&mut self, power: Vec<f64>) -> Result<()> {
        if power.len() != self.num_users || power.iter().any(|&p| !(p > 0.0 && p.is_finite())) {
            return Err(Error::Parameter("need one positive power coefficient per user".into()));
        }
        self.power = power;
        Ok(())
    }
}

/// OFDM transmitter/receiver for one configuration.
#[derive(Clone)]
pub struct OfdmModem {
    config: OfdmConfig,
    fft: Arc<dyn Fft<f64>>,
    ifft: Arc<dyn Fft<f64>>,
}

impl std::fmt::Debug for OfdmModem {
    fn fmt(&self, f: &mut std::fmt::Formatter<'_>) -> std::fmt::Result {
        f.debug_struct("OfdmModem").field("config", &self.config).finish()
    }
}

impl OfdmModem {
    pub fn new(config: OfdmConfig) -> Self {
        let mut planner = FftPlanner::new();
        Self {
            fft: planner.plan_fft_forward(config.num_subcarriers),
            ifft: planner.plan_fft_inverse(config.num_subcarriers),
            config,
        }
    }

    pub fn config(&self) -> &OfdmConfig {
        &self.config
    }

    /// `sqrt(mu_k)` times the unitary IDFT of each symbol, with the cyclic prefix prepended.
    pub fn modulate(&self, frame: &OfdmFrame) -> Result<Vec<Vec<C64>>> {
        let big_m = self.config.num_subcarriers;
        if frame.num_subcarriers() != big_m {
            return Err(Error::Dimension(format!(
                "frame has {} subcarriers, modem {big_m}",
                frame.num_subcarriers()
            )));
        }
        let cp = self.config.cp_length;
        let norm = (big_m as f64).sqrt().recip();
        let mut out = Vec::with_capacity(frame.num_users());
        for k in 0..frame.num_users() {
            let gain = frame.power_coeffs()[k].sqrt() * norm;
            let mut x = Vec::with_capacity(self.config.signal_len(frame.num_symbols()));
            let mut buf = vec![C64::new(0.0, 0.0); big_m];
            for t in 0..frame.num_symbols() {
                for (m, b) in buf.iter_mut().enumerate() {
                    *b = frame.get(k, t, m) * gain;
                }
                self.ifft.process(&mut buf);
                x.extend((0..cp).map(|u| buf[(u + big_m * cp - cp) % big_m]));
                x.extend_from_slice(&buf);
            }
            out.push(x);
        }
        Ok(out)
    }

    /// Strips the prefixes and applies the unitary DFT; indexed `(antenna, subcarrier, symbol)`.
    pub fn demodulate(&self, received: &[Vec<C64>], num_symbols: usize) -> Result<DemodGrid> {
        let big_m = self.config.num_subcarriers;
        let needed = self.config.signal_len(num_symbols);
        let norm = (big_m as f64).sqrt().recip();
        let mut grid = DemodGrid::zeros(received.len(), big_m, num_symbols);
        let mut buf = vec![C64::new(0.0, 0.0); big_m];
        for (i, r) in received.iter().enumerate() {
            if r.len() < needed {
                return Err(Error::Length {
                    needed,
                    actual: r.len(),
                });
            }
            for t in 0..num_symbols {
                let start = t * self.config.symbol_len() + self.config.cp_length;
                buf.copy_from_slice(&r[start..start + big_m]);
                self.fft.process(&mut buf);
                for (m, &v) in buf.iter().enumerate() {
                    grid.row_mut(i, m)[t] = v * norm;
                }
            }
        }
        Ok(grid)
    }
}

/// Convenience wrapper around [`OfdmModem::modulate`].
pub fn ofdm_modulate(frame: &OfdmFrame, config: &OfdmConfig) -> Result<Vec<Vec<C64>>> {
    OfdmModem::new(*config).modulate(frame)
}

/// Demodulates and combines with a combiner built from `csi`; the result is
/// indexed `(user, subcarrier, symbol)`.
pub fn ofdm_detect(
    received: &[Vec<C64>],
    csi: &ChannelRealization,
    kind: CombinerKind,
    noise_var: f64,
    config: &OfdmConfig,
    num_symbols: usize,
) -> Result<DemodGrid> {
    config.check_channel(csi.len())?;
    let modem = OfdmModem::new(*config);
    let grid = modem.demodulate(received, num_symbols)?;
    let bank = build_combiner(&subcarrier_gains(csi, config.num_subcarriers)?, kind, noise_var)?;
    combine_stream(&grid, &bank)
}
