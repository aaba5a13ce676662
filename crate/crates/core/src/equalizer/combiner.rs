//! Per-subcarrier channel gains and MRC/ZF/MMSE combiners.

use std::fmt;
use std::str::FromStr;

use nalgebra::DMatrix;
use rustfft::FftPlanner;
use serde::{Deserialize, Serialize};

use crate::channel::ChannelRealization;
use crate::filterbank::DemodGrid;
use crate::{Error, Result, C64};

/// Singular values below this fraction of the largest are treated as zero.
pub const PINV_TOLERANCE: f64 = 1e-10;

/// Band-center gains `H_m` (N x K), one matrix per subcarrier.
#[derive(Debug, Clone, PartialEq)]
pub struct SubcarrierGains {
    matrices: Vec<DMatrix<C64>>,
}

impl SubcarrierGains {
    pub fn from_matrices(matrices: Vec<DMatrix<C64>>) -> Result<Self> {
        let shape = matrices
            .first()
            .map(|h| h.shape())
            .ok_or_else(|| Error::Dimension("no subcarriers".into()))?;
        if matrices.iter().any(|h| h.shape() != shape) {
            return Err(Error::Dimension("subcarrier matrices differ in shape".into()));
        }
        Ok(Self { matrices })
    }

    pub fn num_subcarriers(&self) -> usize {
        self.matrices.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.matrices[0].nrows()
    }

    pub fn num_users(&self) -> usize {
        self.matrices[0].ncols()
    }

    pub fn at(&self, m: usize) -> &DMatrix<C64> {
        &self.matrices[m]
    }
}

/// `H_m^{i,k} = sum_l h_{i,k}[l] e^{-j 2 pi m l / M}` for every antenna, user and subcarrier.
pub fn subcarrier_gains(channel: &ChannelRealization, num_subcarriers: usize) -> Result<SubcarrierGains> {
    if channel.len() > num_subcarriers {
        return Err(Error::Parameter(format!(
            "channel length {} exceeds {} subcarriers",
            channel.len(),
            num_subcarriers
        )));
    }
    let n = channel.num_antennas();
    let k_users = channel.num_users();
    let fft = FftPlanner::new().plan_fft_forward(num_subcarriers);
    let mut matrices = vec![DMatrix::<C64>::zeros(n, k_users); num_subcarriers];
    let mut buf = vec![C64::new(0.0, 0.0); num_subcarriers];
    for i in 0..n {
        for k in 0..k_users {
            buf.iter_mut().for_each(|b| *b = C64::new(0.0, 0.0));
            buf[..channel.len()].copy_from_slice(channel.taps(i, k));
            fft.process(&mut buf);
            for (h, &v) in matrices.iter_mut().zip(&buf) {
                h[(i, k)] = v;
            }
        }
    }
    SubcarrierGains::from_matrices(matrices)
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "lowercase")]
pub enum CombinerKind {
    Mrc,
    Zf,
    Mmse,
}

impl fmt::Display for CombinerKind {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CombinerKind::Mrc => "mrc",
            CombinerKind::Zf => "zf",
            CombinerKind::Mmse => "mmse",
        })
    }
}

impl FromStr for CombinerKind {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.to_ascii_lowercase().as_str() {
            "mrc" => Ok(CombinerKind::Mrc),
            "zf" => Ok(CombinerKind::Zf),
            "mmse" => Ok(CombinerKind::Mmse),
            other => Err(Error::Parameter(format!("unknown combiner `{other}`"))),
        }
    }
}

/// Combining matrices `W_m` (N x K); user `k`'s output is `W_m[:, k]^H z`.
#[derive(Debug, Clone, PartialEq)]
pub struct CombinerBank {
    kind: CombinerKind,
    weights: Vec<DMatrix<C64>>,
    mrc_norms: Vec<Vec<f64>>,
    rank_deficient: bool,
}

impl CombinerBank {
    /// Wraps explicit combining matrices.
    pub fn from_weights(kind: CombinerKind, weights: Vec<DMatrix<C64>>) -> Result<Self> {
        if weights.is_empty() {
            return Err(Error::Dimension("no subcarriers".into()));
        }
        let m = weights.len();
        Ok(Self {
            kind,
            weights,
            mrc_norms: vec![Vec::new(); m],
            rank_deficient: false,
        })
    }

    pub fn kind(&self) -> CombinerKind {
        self.kind
    }

    pub fn num_subcarriers(&self) -> usize {
        self.weights.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.weights[0].nrows()
    }

    pub fn num_users(&self) -> usize {
        self.weights[0].ncols()
    }

    pub fn weights(&self, m: usize) -> &DMatrix<C64> {
        &self.weights[m]
    }

    /// `D_m^{k,k} = sum_i |H_m^{i,k}|^2`; empty unless built as MRC.
    pub fn mrc_norms(&self, m: usize) -> &[f64] {
        &self.mrc_norms[m]
    }

    /// Set when a ZF solve fell back to a truncated pseudo-inverse.
    pub fn rank_deficient(&self) -> bool {
        self.rank_deficient
    }

    /// `||w_{m,k}||^2`, the noise gain of user `k` on subcarrier `m`.
    pub fn noise_gain(&self, m: usize, k: usize) -> f64 {
        self.weights[m].column(k).norm_squared()
    }

    /// `tr(W_m^H W_m)`.
    pub fn total_noise_gain(&self, m: usize) -> f64 {
        self.weights[m].norm_squared()
    }
}

/// Pseudo-inverse of a tall or square matrix; the flag reports truncated singular values.
fn pseudo_inverse(h: &DMatrix<C64>) -> (DMatrix<C64>, bool) {
    let svd = h.clone().svd(true, true);
    let u = svd.u.expect("requested U");
    let v_t = svd.v_t.expect("requested V^H");
    let smax = svd.singular_values.max();
    let mut truncated = false;
    let inv: Vec<f64> = svd
        .singular_values
        .iter()
        .map(|&s| {
            if s > PINV_TOLERANCE * smax && s > 0.0 {
                1.0 / s
            } else {
                truncated = true;
                0.0
            }
        })
        .collect();
    let mut v = v_t.adjoint();
    for (j, &s) in inv.iter().enumerate() {
        v.column_mut(j).scale_mut(s);
    }
    (v * u.adjoint(), truncated)
}

/// Builds MRC (`H D^-1`), ZF (`H (H^H H)^-1`) or MMSE (`H (H^H H + noise_var I)^-1`) combiners.
pub fn build_combiner(gains: &SubcarrierGains, kind: CombinerKind, noise_var: f64) -> Result<CombinerBank> {
    if !(noise_var >= 0.0) {
        return Err(Error::Parameter("noise variance must be non-negative".into()));
    }
    let k_users = gains.num_users();
    let mut rank_deficient = false;
    let mut weights = Vec::with_capacity(gains.num_subcarriers());
    let mut mrc_norms = Vec::with_capacity(gains.num_subcarriers());
    for h in &gains.matrices {
        match kind {
            CombinerKind::Mrc => {
                let mut w = h.clone();
                let mut norms = Vec::with_capacity(k_users);
                for k in 0..k_users {
                    let d = h.column(k).norm_squared();
                    norms.push(d);
                    if d > 0.0 {
                        w.column_mut(k).unscale_mut(d);
                    } else {
                        rank_deficient = true;
                    }
                }
                weights.push(w);
                mrc_norms.push(norms);
            }
            CombinerKind::Zf => {
                let (pinv, truncated) = pseudo_inverse(h);
                rank_deficient |= truncated;
                weights.push(pinv.adjoint());
                mrc_norms.push(Vec::new());
            }
            CombinerKind::Mmse => {
                let mut gram = h.adjoint() * h;
                for k in 0..k_users {
                    gram[(k, k)] += C64::new(noise_var, 0.0);
                }
                let w = match gram.clone().cholesky() {
                    Some(chol) => h * chol.inverse(),
                    None => {
                        let (pinv, _) = pseudo_inverse(&gram);
                        rank_deficient = true;
                        h * pinv
                    }
                };
                weights.push(w);
                mrc_norms.push(Vec::new());
            }
        }
    }
    Ok(CombinerBank {
        kind,
        weights,
        mrc_norms,
        rank_deficient,
    })
}

/// `y_{k,m}[n] = w_{m,k}^H z_m[n]`; the result is indexed `(user, subcarrier, slot)`.
pub fn combine_stream(grid: &DemodGrid, bank: &CombinerBank) -> Result<DemodGrid> {
    if grid.num_antennas() != bank.num_antennas() || grid.num_subcarriers() != bank.num_subcarriers() {
        return Err(Error::Dimension(format!(
            "grid is {} antennas x {} subcarriers, combiner {} x {}",
            grid.num_antennas(),
            grid.num_subcarriers(),
            bank.num_antennas(),
            bank.num_subcarriers()
        )));
    }
    let k_users = bank.num_users();
    let mut out = DemodGrid::zeros(k_users, grid.num_subcarriers(), grid.num_slots());
    for m in 0..grid.num_subcarriers() {
        let w = bank.weights(m);
        for k in 0..k_users {
            let row = out.row_mut(k, m);
            for i in 0..grid.num_antennas() {
                let c = w[(i, k)].conj();
                if c == C64::new(0.0, 0.0) {
                    continue;
                }
                for (y, &z) in row.iter_mut().zip(grid.row(i, m)) {
                    *y += c * z;
                }
            }
        }
    }
    Ok(out)
}
