//! Equivalent channels between each user and each combiner output.

use crate::channel::{ChannelRealization, PdpProfile};
use crate::equalizer::combiner::CombinerBank;
use crate::signal::twiddle;
use crate::{Error, Result, C64};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum EquivalentMode {
    /// Computed from a specific realization (or estimate) and combiner.
    Exact,
    /// Large-antenna limit `p_k[l] e^{j 2 pi l m / M}` with no cross-user leakage.
    Asymptotic,
}

/// `h_{k,k',m}[l]`: the response from user `k'` to combiner output `k` on subcarrier `m`.
#[derive(Debug, Clone, PartialEq)]
pub struct EquivalentChannel {
    num_users: usize,
    num_subcarriers: usize,
    len: usize,
    mode: EquivalentMode,
    taps: Vec<C64>,
}

impl EquivalentChannel {
    pub fn zeros(num_users: usize, num_subcarriers: usize, len: usize, mode: EquivalentMode) -> Self {
        Self {
            num_users,
            num_subcarriers,
            len,
            mode,
            taps: vec![C64::new(0.0, 0.0); num_users * num_users * num_subcarriers * len],
        }
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn mode(&self) -> EquivalentMode {
        self.mode
    }

    fn offset(&self, k: usize, k2: usize, m: usize) -> usize {
        ((m * self.num_users + k) * self.num_users + k2) * self.len
    }

    pub fn taps(&self, k: usize, k2: usize, m: usize) -> &[C64] {
        let start = self.offset(k, k2, m);
        &self.taps[start..start + self.len]
    }

    pub fn taps_mut(&mut self, k: usize, k2: usize, m: usize) -> &mut [C64] {
        let start = self.offset(k, k2, m);
        &mut self.taps[start..start + self.len]
    }

    /// Large-antenna limit built from one profile per user.
    pub fn asymptotic(pdps: &[PdpProfile], num_subcarriers: usize) -> Self {
        let len = pdps.iter().map(PdpProfile::len).max().unwrap_or(1);
        let mut out = Self::zeros(pdps.len(), num_subcarriers, len, EquivalentMode::Asymptotic);
        for m in 0..num_subcarriers {
            for (k, pdp) in pdps.iter().enumerate() {
                for (l, (t, &p)) in out.taps_mut(k, k, m).iter_mut().zip(pdp.taps()).enumerate() {
                    *t = twiddle((l * m) as i64, num_subcarriers) * p;
                }
            }
        }
        out
    }
}

/// `h_{k,k',m}[l] = sum_i conj(W_m^{i,k}) sqrt(mu_{k'}) h_{i,k'}[l]`.
///
/// `channel` is whatever the receiver has: the true realization under perfect
/// CSI or the estimates otherwise. `power` holds `mu_k` per user.
pub fn equivalent_channel(
    bank: &CombinerBank,
    channel: &ChannelRealization,
    power: &[f64],
) -> Result<EquivalentChannel> {
    let k_users = bank.num_users();
    if channel.num_antennas() != bank.num_antennas() || channel.num_users() != k_users {
        return Err(Error::Dimension(format!(
            "channel is {}x{}, combiner {}x{}",
            channel.num_antennas(),
            channel.num_users(),
            bank.num_antennas(),
            k_users
        )));
    }
    if power.len() != k_users {
        return Err(Error::Dimension(format!(
            "{} power coefficients for {k_users} users",
            power.len()
        )));
    }
    let amp: Vec<f64> = power.iter().map(|p| p.sqrt()).collect();
    let mut out = EquivalentChannel::zeros(k_users, bank.num_subcarriers(), channel.len(), EquivalentMode::Exact);
    for m in 0..bank.num_subcarriers() {
        let w = bank.weights(m);
        for k in 0..k_users {
            for k2 in 0..k_users {
                let taps = out.taps_mut(k, k2, m);
                for i in 0..bank.num_antennas() {
                    let c = w[(i, k)].conj() * amp[k2];
                    for (t, &h) in taps.iter_mut().zip(channel.taps(i, k2)) {
                        *t += c * h;
                    }
                }
            }
        }
    }
    Ok(out)
}
