//! Gray-mapped square QAM, handled per real dimension as PAM.
//!
//! FBMC carries the in-phase and quadrature PAM components on alternating
//! half-symbol slots, so most of the crate only ever needs the real PAM view.

use rand::Rng;

use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct Constellation {
    order: usize,
    bits_per_dim: u32,
}

impl Constellation {
    /// Square QAM of the given order (4, 16, 64, 256), unit average energy.
    pub fn qam(order: usize) -> Result<Self> {
        if order < 4 || !order.is_power_of_two() || order.trailing_zeros() % 2 != 0 {
            return Err(Error::Parameter(format!(
                "QAM order must be an even power of two >= 4, got {order}"
            )));
        }
        Ok(Self {
            order,
            bits_per_dim: order.trailing_zeros() / 2,
        })
    }

    pub fn order(&self) -> usize {
        self.order
    }

    pub fn bits_per_dim(&self) -> u32 {
        self.bits_per_dim
    }

    pub fn levels_per_dim(&self) -> usize {
        1 << self.bits_per_dim
    }

    /// Spacing factor that gives each real dimension an average power of 1/2.
    fn scale(&self) -> f64 {
        let q = self.levels_per_dim() as f64;
        (3.0 / (2.0 * (q * q - 1.0))).sqrt()
    }

    /// Amplitude of PAM index `idx`.
    pub fn level(&self, idx: usize) -> f64 {
        let q = self.levels_per_dim() as f64;
        (2.0 * idx as f64 - (q - 1.0)) * self.scale()
    }

    /// Nearest PAM index for a received amplitude.
    pub fn slice(&self, x: f64) -> usize {
        let q = self.levels_per_dim() as f64;
        let idx = ((x / self.scale() + (q - 1.0)) / 2.0).round();
        idx.clamp(0.0, q - 1.0) as usize
    }

    /// Gray label carried by a PAM index.
    pub fn gray(&self, idx: usize) -> usize {
        idx ^ (idx >> 1)
    }

    /// Bit errors between two PAM indices.
    pub fn bit_errors(&self, a: usize, b: usize) -> u32 {
        (self.gray(a) ^ self.gray(b)).count_ones()
    }

    /// Draws `count` random PAM indices.
    pub fn random_indices<R: Rng + ?Sized>(&self, rng: &mut R, count: usize) -> Vec<usize> {
        let q = self.levels_per_dim();
        (0..count).map(|_| rng.random_range(0..q)).collect()
    }

    /// Complex QAM symbol from an (in-phase, quadrature) index pair.
    pub fn symbol(&self, i_idx: usize, q_idx: usize) -> C64 {
        C64::new(self.level(i_idx), self.level(q_idx))
    }
}
