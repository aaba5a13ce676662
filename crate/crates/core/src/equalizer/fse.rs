//! Fractionally spaced equalizers at half-symbol tap spacing.
//!
//! With `c` the taps and `D` the decision delay, an FSE is fitted so that
//! `(c * g)[d] ~ t[d - D]`, where `g` is the composite pulse and `t` the
//! Nyquist target. Applied to the combiner output it gives
//!
//! ```text
//! s_hat[n] = Re{ sum_a c[a] j^{D - a} y[n + D - a] }
//! ```
//!
//! The `j^{D - a}` factor carries the OQAM phase rotation `(-j)^d` that rides
//! on every lag of the in-band response.

use std::fmt;
use std::ops::Range;
use std::str::FromStr;

use nalgebra::{DMatrix, DVector};
use serde::{Deserialize, Serialize};

use crate::channel::{ChannelRealization, PdpProfile};
use crate::equalizer::pulse::CompositePulse;
use crate::signal::j_pow;
use crate::{Error, Result, C64};

/// Pulses with less energy than this cannot be equalized.
pub const MIN_PULSE_ENERGY: f64 = 1e-12;

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum FseKind {
    /// Plain least-squares fit to the target.
    #[serde(rename = "zf-ls")]
    ZfLs,
    /// Ridge-regularized fit, ridge set by the noise level.
    #[serde(rename = "mmse")]
    Mmse,
}

impl fmt::Display for FseKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            FseKind::ZfLs => "zf-ls",
            FseKind::Mmse => "mmse",
        })
    }
}

impl FromStr for FseKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "zf-ls" | "zf" => Ok(FseKind::ZfLs),
            "mmse" => Ok(FseKind::Mmse),
            other => Err(Error::Parameter(format!("unknown FSE kind `{other}`"))),
        }
    }
}

/// One equalizer: taps, decision delay in slots and fit diagnostics.
#[derive(Debug, Clone, PartialEq)]
pub struct Fse {
    pub taps: Vec<C64>,
    pub delay: i64,
    /// `||G c - t_D||`.
    pub residual: f64,
    /// Set when the normal equations needed a fallback ridge.
    pub regularized: bool,
}

impl Fse {
    /// Single unit tap at zero delay: `s_hat[n] = Re{y[n]}`.
    pub fn identity() -> Self {
        Self {
            taps: vec![C64::new(1.0, 0.0)],
            delay: 0,
            residual: 0.0,
            regularized: false,
        }
    }
}

/// Fits `len` taps of kind `kind` to `pulse` against `target`.
///
/// `noise_level` is the ridge of the MMSE design and ignored for ZF-LS.
pub fn design_fse(
    pulse: &CompositePulse,
    target: &CompositePulse,
    len: usize,
    kind: FseKind,
    noise_level: f64,
) -> Result<Fse> {
    if len == 0 || len % 2 == 0 {
        return Err(Error::Parameter(format!("FSE length must be odd, got {len}")));
    }
    if !(noise_level >= 0.0) {
        return Err(Error::Parameter("noise level must be non-negative".into()));
    }
    let energy = pulse.energy();
    if !(energy >= MIN_PULSE_ENERGY) {
        return Err(Error::DegeneratePulse { energy });
    }
    let g = &pulse.samples;
    let rows = g.len() + len - 1;
    let conv = DMatrix::from_fn(rows, len, |r, c| {
        if r >= c && r - c < g.len() {
            g[r - c]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let center = pulse.peak_index() + (len - 1) / 2;
    let desired = DVector::from_fn(rows, |r, _| {
        let j = r as i64 - center as i64 + target.origin as i64;
        if j >= 0 && (j as usize) < target.samples.len() {
            target.samples[j as usize]
        } else {
            C64::new(0.0, 0.0)
        }
    });
    let mut normal = conv.adjoint() * &conv;
    let rhs = conv.adjoint() * &desired;
    if kind == FseKind::Mmse {
        for a in 0..len {
            normal[(a, a)] += C64::new(noise_level, 0.0);
        }
    }
    let mut regularized = false;
    let taps = match normal.clone().cholesky() {
        Some(chol) => chol.solve(&rhs),
        None => {
            regularized = true;
            let ridge = 1e-12 * normal.trace().re.max(f64::MIN_POSITIVE) / len as f64;
            for a in 0..len {
                normal[(a, a)] += C64::new(ridge, 0.0);
            }
            normal
                .cholesky()
                .ok_or_else(|| Error::DegeneratePulse { energy })?
                .solve(&rhs)
        }
    };
    let residual = (&conv * &taps - &desired).norm();
    Ok(Fse {
        taps: taps.as_slice().to_vec(),
        delay: center as i64 - pulse.origin as i64,
        residual,
        regularized,
    })
}

/// Real symbol estimates for the slots in `slots` from one combiner output stream.
pub fn equalize_stream(stream: &[C64], fse: &Fse, slots: Range<usize>) -> Vec<f64> {
    let at = |idx: i64| -> C64 {
        if idx < 0 {
            C64::new(0.0, 0.0)
        } else {
            stream.get(idx as usize).copied().unwrap_or(C64::new(0.0, 0.0))
        }
    };
    let rotated: Vec<C64> = fse
        .taps
        .iter()
        .enumerate()
        .map(|(a, &c)| c * j_pow(fse.delay - a as i64))
        .collect();
    slots
        .map(|n| {
            let base = n as i64 + fse.delay;
            rotated
                .iter()
                .enumerate()
                .map(|(a, &c)| c * at(base - a as i64))
                .sum::<C64>()
                .re
        })
        .collect()
}

/// Equalizers for every `(user, subcarrier)` pair.
#[derive(Debug, Clone, PartialEq)]
pub struct FseBank {
    num_users: usize,
    num_subcarriers: usize,
    filters: Vec<Fse>,
}

impl FseBank {
    /// `filters[k * M + m]` serves user `k` on subcarrier `m`.
    pub fn new(num_users: usize, num_subcarriers: usize, filters: Vec<Fse>) -> Result<Self> {
        if filters.len() != num_users * num_subcarriers {
            return Err(Error::Dimension(format!(
                "{} equalizers for {num_users} users x {num_subcarriers} subcarriers",
                filters.len()
            )));
        }
        Ok(Self {
            num_users,
            num_subcarriers,
            filters,
        })
    }

    /// Unit-tap equalizers everywhere (combining only).
    pub fn identity(num_users: usize, num_subcarriers: usize) -> Self {
        Self {
            num_users,
            num_subcarriers,
            filters: vec![Fse::identity(); num_users * num_subcarriers],
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn get(&self, k: usize, m: usize) -> &Fse {
        &self.filters[k * self.num_subcarriers + m]
    }

    /// Whether any design needed the fallback ridge.
    pub fn any_regularized(&self) -> bool {
        self.filters.iter().any(|f| f.regularized)
    }
}

/// `p_hat_k[l] = (1/N) sum_i |h_{i,k}[l]|^2` for every user.
pub fn approximate_pdp(channel: &ChannelRealization) -> Result<Vec<PdpProfile>> {
    let n = channel.num_antennas();
    if n == 0 {
        return Err(Error::Parameter("need at least one antenna".into()));
    }
    (0..channel.num_users())
        .map(|k| {
            let mut p = vec![0.0; channel.len()];
            for i in 0..n {
                for (acc, h) in p.iter_mut().zip(channel.taps(i, k)) {
                    *acc += h.norm_sqr();
                }
            }
            p.iter_mut().for_each(|v| *v /= n as f64);
            PdpProfile::new(p)
        })
        .collect()
}
