//! Corrections for equivalent channels computed from estimated CSI.
//!
//! Combiners built from estimates correlate with the estimation error, so an
//! equivalent channel evaluated on the same estimates carries a spurious
//! own-user term proportional to the per-tap error variance. The corrections
//! remove that term (or, for PDP-based designs, undo the matching scaling).

use std::fmt;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::channel::PdpProfile;
use crate::equalizer::equivalent::EquivalentChannel;
use crate::estimation::ErrorStats;
use crate::signal::twiddle;
use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum CorrectionMode {
    #[serde(rename = "none")]
    None,
    /// `p / (1 + sigma_ef^2)`.
    #[serde(rename = "colocated-scale")]
    ColocatedScale,
    /// Subtract `sigma_et^2 / (1 + sigma_ef^2) e^{j 2 pi l m / M}` from own-user taps.
    #[serde(rename = "subtract-term-small")]
    SubtractTermSmall,
    /// Subtract `N sigma_et^2 sqrt(mu_k) / (sum_i beta_{i,k} + N sigma_ef^2) e^{j 2 pi l m / M}`.
    #[serde(rename = "subtract-term-cellfree")]
    SubtractTermCellfree,
}

impl fmt::Display for CorrectionMode {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(match self {
            CorrectionMode::None => "none",
            CorrectionMode::ColocatedScale => "colocated-scale",
            CorrectionMode::SubtractTermSmall => "subtract-term-small",
            CorrectionMode::SubtractTermCellfree => "subtract-term-cellfree",
        })
    }
}

impl FromStr for CorrectionMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "none" => Ok(CorrectionMode::None),
            "colocated-scale" => Ok(CorrectionMode::ColocatedScale),
            "subtract-term-small" => Ok(CorrectionMode::SubtractTermSmall),
            "subtract-term-cellfree" => Ok(CorrectionMode::SubtractTermCellfree),
            other => Err(Error::Parameter(format!("unknown correction `{other}`"))),
        }
    }
}

/// Per-user estimation error statistics together with the correction to apply.
#[derive(Debug, Clone, PartialEq)]
pub struct ErrorStatsView {
    pub per_user: Vec<ErrorStats>,
    pub mode: CorrectionMode,
}

impl ErrorStatsView {
    /// Same statistics for every user.
    pub fn uniform(stats: ErrorStats, num_users: usize, mode: CorrectionMode) -> Self {
        Self {
            per_user: vec![stats; num_users],
            mode,
        }
    }

    fn validate(&self) -> Result<()> {
        if self
            .per_user
            .iter()
            .any(|s| !(s.sigma_et2 >= 0.0 && s.sigma_ef2 >= 0.0))
        {
            return Err(Error::Parameter("error variances must be non-negative".into()));
        }
        Ok(())
    }
}

/// Scenario quantities the cell-free correction needs.
#[derive(Debug, Clone, PartialEq, Default)]
pub struct CorrectionContext {
    /// Total receive antennas `N`.
    pub num_antennas: usize,
    /// `mu_k` per user.
    pub power: Vec<f64>,
    /// `sum_i beta_{i,k}` per user.
    pub beta_sums: Vec<f64>,
}

/// Scales a PDP by `1 / (1 + sigma_ef^2)`; other modes return it unchanged.
pub fn correct_pdp(pdp: &PdpProfile, stats: &ErrorStats, mode: CorrectionMode) -> Result<PdpProfile> {
    if !(stats.sigma_et2 >= 0.0 && stats.sigma_ef2 >= 0.0) {
        return Err(Error::Parameter("error variances must be non-negative".into()));
    }
    Ok(match mode {
        CorrectionMode::ColocatedScale => pdp.scaled(1.0 / (1.0 + stats.sigma_ef2)),
        _ => pdp.clone(),
    })
}

/// The own-user term removed by the subtractive corrections, before the
/// `e^{j 2 pi l m / M}` rotation. Zero for the other modes.
pub fn correction_term(view: &ErrorStatsView, ctx: &CorrectionContext, k: usize) -> Result<f64> {
    let s = view
        .per_user
        .get(k)
        .ok_or_else(|| Error::Dimension(format!("no error statistics for user {k}")))?;
    Ok(match view.mode {
        CorrectionMode::SubtractTermSmall => s.sigma_et2 / (1.0 + s.sigma_ef2),
        CorrectionMode::SubtractTermCellfree => {
            let (mu, beta) = match (ctx.power.get(k), ctx.beta_sums.get(k)) {
                (Some(&mu), Some(&beta)) => (mu, beta),
                _ => {
                    return Err(Error::Dimension(format!(
                        "cell-free correction context lacks user {k}"
                    )))
                }
            };
            let n = ctx.num_antennas as f64;
            n * s.sigma_et2 * mu.sqrt() / (beta + n * s.sigma_ef2)
        }
        CorrectionMode::None | CorrectionMode::ColocatedScale => 0.0,
    })
}

/// Applies the correction in `view` to the own-user taps of `eq`.
pub fn apply_csi_correction(
    eq: &EquivalentChannel,
    view: &ErrorStatsView,
    ctx: &CorrectionContext,
) -> Result<EquivalentChannel> {
    view.validate()?;
    let k_users = eq.num_users();
    if view.per_user.len() != k_users {
        return Err(Error::Dimension(format!(
            "{} error statistics for {k_users} users",
            view.per_user.len()
        )));
    }
    let big_m = eq.num_subcarriers();
    let mut out = eq.clone();
    for k in 0..k_users {
        match view.mode {
            CorrectionMode::None => {}
            CorrectionMode::ColocatedScale => {
                let scale = 1.0 / (1.0 + view.per_user[k].sigma_ef2);
                for m in 0..big_m {
                    out.taps_mut(k, k, m).iter_mut().for_each(|t| *t *= scale);
                }
            }
            CorrectionMode::SubtractTermSmall | CorrectionMode::SubtractTermCellfree => {
                let term = correction_term(view, ctx, k)?;
                if term == 0.0 {
                    continue;
                }
                for m in 0..big_m {
                    for (l, t) in out.taps_mut(k, k, m).iter_mut().enumerate() {
                        *t -= twiddle((l * m) as i64, big_m) * term;
                    }
                }
            }
        }
    }
    Ok(out)
}
