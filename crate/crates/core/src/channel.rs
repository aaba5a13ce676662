//! Multipath channel models: power delay profiles, Rayleigh tap draws and
//! the antenna-domain received signal `r_i = sum_k x_k * h_{i,k} + eta_i`.

use std::path::Path;
use std::sync::OnceLock;

use rand::Rng;

use crate::signal::{complex_gaussian, complex_noise, db_to_linear};
use crate::{Error, Result, C64};

/// Per-lag average tap powers `p[l] >= 0`.
#[derive(Debug, Clone, PartialEq)]
pub struct PdpProfile {
    taps: Vec<f64>,
}

impl PdpProfile {
    pub fn new(taps: Vec<f64>) -> Result<Self> {
        if taps.is_empty() {
            return Err(Error::Parameter("power delay profile needs at least one tap".into()));
        }
        if taps.iter().any(|&p| !(p >= 0.0 && p.is_finite())) {
            return Err(Error::Parameter("tap powers must be finite and non-negative".into()));
        }
        Ok(Self { taps })
    }

    /// Single unit tap.
    pub fn delta() -> Self {
        Self { taps: vec![1.0] }
    }

    pub fn taps(&self) -> &[f64] {
        &self.taps
    }

    pub fn len(&self) -> usize {
        self.taps.len()
    }

    pub fn is_empty(&self) -> bool {
        self.taps.is_empty()
    }

    pub fn total_power(&self) -> f64 {
        self.taps.iter().sum()
    }

    /// Same shape rescaled to unit sum.
    pub fn normalized(&self) -> Result<Self> {
        let total = self.total_power();
        if total <= 0.0 {
            return Err(Error::Parameter("cannot normalize an all-zero profile".into()));
        }
        Ok(Self {
            taps: self.taps.iter().map(|p| p / total).collect(),
        })
    }

    /// Every tap multiplied by `factor`.
    pub fn scaled(&self, factor: f64) -> Self {
        Self {
            taps: self.taps.iter().map(|p| p * factor).collect(),
        }
    }
}

/// Unit-sum exponential profile `p[l] ~ exp(-decay l)`, `l = 0 .. len-1`.
pub fn exponential_pdp(len: usize, decay: f64) -> Result<PdpProfile> {
    if len == 0 || !(decay >= 0.0) {
        return Err(Error::Parameter("exponential profile needs len >= 1 and decay >= 0".into()));
    }
    PdpProfile::new((0..len).map(|l| (-decay * l as f64).exp()).collect())?.normalized()
}

/// A tapped-delay-line table: `(delay_ns, power_db)` pairs at a reference RMS delay spread.
#[derive(Debug, Clone, PartialEq)]
pub struct TdlTable {
    pub version: u32,
    pub reference_rms_delay_ns: f64,
    pub taps: Vec<(f64, f64)>,
}

impl TdlTable {
    /// Parses the plain-text table format shipped in `data/`.
    ///
    /// Lines starting with `#` are comments, except `# version: N` and
    /// `# reference_rms_delay_ns: X` headers. Data lines hold a delay in ns and a
    /// power in dB separated by a comma or whitespace.
    pub fn parse(text: &str) -> Result<Self> {
        let mut version = 1;
        let mut reference = 1.0;
        let mut taps = Vec::new();
        for (idx, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() {
                continue;
            }
            if let Some(comment) = line.strip_prefix('#') {
                if let Some((key, value)) = comment.split_once(':') {
                    let bad = |message: String| Error::Table {
                        line: idx + 1,
                        message,
                    };
                    match key.trim() {
                        "version" => {
                            version = value
                                .trim()
                                .parse()
                                .map_err(|e| bad(format!("bad version: {e}")))?
                        }
                        "reference_rms_delay_ns" => {
                            reference = value
                                .trim()
                                .parse()
                                .map_err(|e| bad(format!("bad reference delay: {e}")))?
                        }
                        _ => {}
                    }
                }
                continue;
            }
            let fields: Vec<&str> = line
                .split(|c: char| c == ',' || c.is_whitespace())
                .filter(|s| !s.is_empty())
                .collect();
            if fields.len() != 2 {
                return Err(Error::Table {
                    line: idx + 1,
                    message: format!("expected 2 fields, got {}", fields.len()),
                });
            }
            let parse = |s: &str| {
                s.parse::<f64>().map_err(|e| Error::Table {
                    line: idx + 1,
                    message: format!("`{s}`: {e}"),
                })
            };
            let delay = parse(fields[0])?;
            let power = parse(fields[1])?;
            if delay < 0.0 {
                return Err(Error::Table {
                    line: idx + 1,
                    message: "negative delay".into(),
                });
            }
            taps.push((delay, power));
        }
        if taps.is_empty() {
            return Err(Error::Table {
                line: 0,
                message: "table has no taps".into(),
            });
        }
        if !(reference > 0.0) {
            return Err(Error::Table {
                line: 0,
                message: "reference RMS delay must be positive".into(),
            });
        }
        Ok(Self {
            version,
            reference_rms_delay_ns: reference,
            taps,
        })
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::parse(&std::fs::read_to_string(path)?)
    }

    /// The bundled TDL-C table.
    pub fn tdl_c() -> &'static TdlTable {
        static TABLE: OnceLock<TdlTable> = OnceLock::new();
        TABLE.get_or_init(|| {
            TdlTable::parse(include_str!("../data/tdl_c.txt")).expect("bundled TDL-C table is valid")
        })
    }

    /// Scales the table to `rms_delay_s`, drops taps more than `threshold_db`
    /// below the strongest one, bins tap powers to the nearest sample at
    /// `sample_rate_hz` and normalizes to unit sum.
    pub fn binned_pdp(
        &self,
        rms_delay_s: f64,
        sample_rate_hz: f64,
        threshold_db: f64,
    ) -> Result<PdpProfile> {
        if !(rms_delay_s > 0.0) || !(sample_rate_hz > 0.0) {
            return Err(Error::Parameter(
                "RMS delay and sample rate must be positive".into(),
            ));
        }
        let strongest = self
            .taps
            .iter()
            .map(|&(_, p)| p)
            .fold(f64::NEG_INFINITY, f64::max);
        let floor = strongest - threshold_db.abs();
        let scale = rms_delay_s * 1e9 / self.reference_rms_delay_ns;
        let mut bins: Vec<f64> = Vec::new();
        for &(delay_ns, power_db) in &self.taps {
            if power_db < floor {
                continue;
            }
            let delay_s = delay_ns * scale * 1e-9;
            let bin = (delay_s * sample_rate_hz).round() as usize;
            if bins.len() <= bin {
                bins.resize(bin + 1, 0.0);
            }
            bins[bin] += db_to_linear(power_db);
        }
        PdpProfile::new(bins)?.normalized()
    }
}

/// TDL-C profile for the given RMS delay spread, binned at `sample_rate_hz`.
///
/// `threshold_db` is the power floor below the strongest tap (e.g. `-30.0`).
pub fn tdlc_pdp(rms_delay_s: f64, sample_rate_hz: f64, threshold_db: f64) -> Result<PdpProfile> {
    TdlTable::tdl_c().binned_pdp(rms_delay_s, sample_rate_hz, threshold_db)
}

/// Channel impulse responses `h_{i,k}[l]` for `N` antennas and `K` users,
/// all zero-padded to a common length.
#[derive(Debug, Clone, PartialEq)]
pub struct ChannelRealization {
    num_antennas: usize,
    num_users: usize,
    len: usize,
    taps: Vec<C64>,
}

impl ChannelRealization {
    pub fn zeros(num_antennas: usize, num_users: usize, len: usize) -> Self {
        Self {
            num_antennas,
            num_users,
            len,
            taps: vec![C64::new(0.0, 0.0); num_antennas * num_users * len],
        }
    }

    /// Builds a realization from taps laid out as `[(i * K + k) * len + l]`.
    pub fn from_taps(
        num_antennas: usize,
        num_users: usize,
        len: usize,
        taps: Vec<C64>,
    ) -> Result<Self> {
        if taps.len() != num_antennas * num_users * len {
            return Err(Error::Dimension(format!(
                "{} taps for {num_antennas} antennas x {num_users} users x {len} lags",
                taps.len()
            )));
        }
        Ok(Self {
            num_antennas,
            num_users,
            len,
            taps,
        })
    }

    pub fn num_antennas(&self) -> usize {
        self.num_antennas
    }

    pub fn num_users(&self) -> usize {
        self.num_users
    }

    /// Channel length `L`.
    pub fn len(&self) -> usize {
        self.len
    }

    pub fn is_empty(&self) -> bool {
        self.len == 0
    }

    pub fn taps(&self, i: usize, k: usize) -> &[C64] {
        let start = (i * self.num_users + k) * self.len;
        &self.taps[start..start + self.len]
    }

    pub fn taps_mut(&mut self, i: usize, k: usize) -> &mut [C64] {
        let start = (i * self.num_users + k) * self.len;
        &mut self.taps[start..start + self.len]
    }

    pub fn as_slice(&self) -> &[C64] {
        &self.taps
    }

    /// Same channels, truncated or zero-padded to `len` taps.
    pub fn resized(&self, len: usize) -> Self {
        let mut out = Self::zeros(self.num_antennas, self.num_users, len);
        let copy = len.min(self.len);
        for i in 0..self.num_antennas {
            for k in 0..self.num_users {
                out.taps_mut(i, k)[..copy].copy_from_slice(&self.taps(i, k)[..copy]);
            }
        }
        out
    }

    /// The first `n` antennas.
    pub fn first_antennas(&self, n: usize) -> Self {
        let n = n.min(self.num_antennas);
        Self {
            num_antennas: n,
            num_users: self.num_users,
            len: self.len,
            taps: self.taps[..n * self.num_users * self.len].to_vec(),
        }
    }
}

/// Draws independent `CN(0, gain_{i,k} p_{i,k}[l])` taps.
///
/// `pdps` holds one profile per `(antenna, user)` pair at index `i * K + k`;
/// `gains`, when given, scales each pair's tap variances (large-scale fading).
/// Taps are drawn antenna-major, so the first `n` antennas of a larger draw
/// match a draw with `n` antennas from the same stream.
pub fn draw_realization<R: Rng + ?Sized>(
    pdps: &[PdpProfile],
    gains: Option<&[f64]>,
    num_antennas: usize,
    num_users: usize,
    rng: &mut R,
) -> Result<ChannelRealization> {
    if num_antennas == 0 || num_users == 0 {
        return Err(Error::Parameter("need at least one antenna and one user".into()));
    }
    let pairs = num_antennas * num_users;
    if pdps.len() != pairs {
        return Err(Error::Dimension(format!(
            "{} profiles for {pairs} antenna-user pairs",
            pdps.len()
        )));
    }
    if let Some(g) = gains {
        if g.len() != pairs {
            return Err(Error::Dimension(format!(
                "{} gains for {pairs} antenna-user pairs",
                g.len()
            )));
        }
    }
    let len = pdps.iter().map(PdpProfile::len).max().unwrap_or(1);
    let mut out = ChannelRealization::zeros(num_antennas, num_users, len);
    for i in 0..num_antennas {
        for k in 0..num_users {
            let idx = i * num_users + k;
            let gain = gains.map_or(1.0, |g| g[idx]);
            for (h, &p) in out.taps_mut(i, k).iter_mut().zip(pdps[idx].taps()) {
                *h = complex_gaussian(rng, p * gain);
            }
        }
    }
    Ok(out)
}

/// Noise-free received signals `r_i = sum_k x_k * h_{i,k}`, length `max |x_k| + L - 1`.
pub fn apply_channel(signals: &[Vec<C64>], channel: &ChannelRealization) -> Result<Vec<Vec<C64>>> {
    if signals.len() != channel.num_users() {
        return Err(Error::Dimension(format!(
            "{} user signals for a {}-user channel",
            signals.len(),
            channel.num_users()
        )));
    }
    let longest = signals.iter().map(Vec::len).max().unwrap_or(0);
    let out_len = if longest == 0 { 0 } else { longest + channel.len() - 1 };
    let mut received = Vec::with_capacity(channel.num_antennas());
    for i in 0..channel.num_antennas() {
        let mut r = vec![C64::new(0.0, 0.0); out_len];
        for (k, x) in signals.iter().enumerate() {
            for (l, &h) in channel.taps(i, k).iter().enumerate() {
                if h == C64::new(0.0, 0.0) {
                    continue;
                }
                for (o, &v) in r[l..].iter_mut().zip(x) {
                    *o += h * v;
                }
            }
        }
        received.push(r);
    }
    Ok(received)
}

/// Adds `scale * noise[i]` to each antenna's signal; `noise[i]` must be at least as long.
pub fn add_noise(received: &mut [Vec<C64>], noise: &[Vec<C64>], scale: f64) -> Result<()> {
    if noise.len() < received.len() {
        return Err(Error::Dimension("fewer noise sequences than antennas".into()));
    }
    for (r, eta) in received.iter_mut().zip(noise) {
        if eta.len() < r.len() {
            return Err(Error::Length {
                needed: r.len(),
                actual: eta.len(),
            });
        }
        for (x, e) in r.iter_mut().zip(eta) {
            *x += e * scale;
        }
    }
    Ok(())
}

/// `r_i = sum_k x_k * h_{i,k} + eta_i` with `eta_i ~ CN(0, noise_var)` i.i.d.
pub fn apply_channel_awgn<R: Rng + ?Sized>(
    signals: &[Vec<C64>],
    channel: &ChannelRealization,
    noise_var: f64,
    rng: &mut R,
) -> Result<Vec<Vec<C64>>> {
    if !(noise_var >= 0.0) {
        return Err(Error::Parameter("noise variance must be non-negative".into()));
    }
    let mut received = apply_channel(signals, channel)?;
    if noise_var > 0.0 {
        for r in received.iter_mut() {
            let noise = complex_noise(rng, r.len(), noise_var);
            r.iter_mut().zip(noise).for_each(|(x, e)| *x += e);
        }
    }
    Ok(received)
}
