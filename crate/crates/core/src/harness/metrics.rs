//! Link-quality estimators.

use crate::qam::Constellation;
use crate::{Error, Result, C64};

/// Reported SINR when the residual distortion vanishes.
pub const SINR_CAP_DB: f64 = 100.0;
/// Smallest sample size accepted by [`measure_sinr`].
pub const MIN_SINR_SYMBOLS: usize = 1000;

/// Regression SINR in dB: with `a = E[s_hat s] / E[s^2]`,
/// `SINR = a^2 E[s^2] / E[(s_hat - a s)^2]`, capped at [`SINR_CAP_DB`].
pub fn measure_sinr(estimates: &[f64], truth: &[f64]) -> Result<f64> {
    if estimates.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} estimates for {} symbols",
            estimates.len(),
            truth.len()
        )));
    }
    if truth.len() < MIN_SINR_SYMBOLS {
        return Err(Error::Parameter(format!(
            "SINR needs at least {MIN_SINR_SYMBOLS} symbols, got {}",
            truth.len()
        )));
    }
    let power: f64 = truth.iter().map(|s| s * s).sum();
    if power == 0.0 {
        return Err(Error::Parameter("reference symbols carry no power".into()));
    }
    let a = estimates.iter().zip(truth).map(|(e, s)| e * s).sum::<f64>() / power;
    let distortion: f64 = estimates
        .iter()
        .zip(truth)
        .map(|(e, s)| (e - a * s).powi(2))
        .sum();
    let signal = a * a * power;
    if distortion <= 0.0 || signal >= distortion * 10f64.powf(SINR_CAP_DB / 10.0) {
        return Ok(SINR_CAP_DB);
    }
    Ok(10.0 * (signal / distortion).log10())
}

/// Hard-decision bit errors and total bits over PAM components.
///
/// `truth` holds the transmitted PAM indices of the constellation's real dimensions.
pub fn count_bit_errors(estimates: &[f64], truth: &[usize], constellation: &Constellation) -> Result<(u64, u64)> {
    if estimates.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} estimates for {} symbols",
            estimates.len(),
            truth.len()
        )));
    }
    let errors = estimates
        .iter()
        .zip(truth)
        .map(|(&e, &t)| constellation.bit_errors(constellation.slice(e), t) as u64)
        .sum();
    Ok((errors, truth.len() as u64 * constellation.bits_per_dim() as u64))
}

/// Bit error rate of hard PAM decisions.
pub fn measure_ber(estimates: &[f64], truth: &[usize], constellation: &Constellation) -> Result<f64> {
    let (errors, bits) = count_bit_errors(estimates, truth, constellation)?;
    if bits == 0 {
        return Err(Error::Parameter("no symbols".into()));
    }
    Ok(errors as f64 / bits as f64)
}

/// `sum |h_hat - h|^2 / sum |h|^2`.
pub fn nmse(estimate: &[C64], truth: &[C64]) -> Result<f64> {
    if estimate.len() != truth.len() {
        return Err(Error::Dimension(format!(
            "{} estimates for {} taps",
            estimate.len(),
            truth.len()
        )));
    }
    let reference: f64 = truth.iter().map(|h| h.norm_sqr()).sum();
    if reference == 0.0 {
        return Err(Error::Parameter("reference channel is zero".into()));
    }
    let err: f64 = estimate.iter().zip(truth).map(|(a, b)| (a - b).norm_sqr()).sum();
    Ok(err / reference)
}

fn sorted(samples: &[f64]) -> Result<Vec<f64>> {
    if samples.is_empty() {
        return Err(Error::Parameter("need at least one sample".into()));
    }
    if samples.iter().any(|x| x.is_nan()) {
        return Err(Error::Parameter("samples contain NaN".into()));
    }
    let mut v = samples.to_vec();
    v.sort_by(f64::total_cmp);
    Ok(v)
}

/// Step CDF `(value, fraction <= value)` at each distinct sample value.
pub fn empirical_cdf(samples: &[f64]) -> Result<Vec<(f64, f64)>> {
    let v = sorted(samples)?;
    let n = v.len() as f64;
    let mut out: Vec<(f64, f64)> = Vec::new();
    for (i, &x) in v.iter().enumerate() {
        let p = (i + 1) as f64 / n;
        match out.last_mut() {
            Some(last) if last.0 == x => last.1 = p,
            _ => out.push((x, p)),
        }
    }
    Ok(out)
}

/// Two-sample Kolmogorov-Smirnov distance `sup |F_a - F_b|`.
pub fn ks_distance(a: &[f64], b: &[f64]) -> Result<f64> {
    let a = sorted(a)?;
    let b = sorted(b)?;
    let (na, nb) = (a.len() as f64, b.len() as f64);
    let (mut i, mut j) = (0, 0);
    let mut worst: f64 = 0.0;
    while i < a.len() && j < b.len() {
        let x = a[i].min(b[j]);
        while i < a.len() && a[i] <= x {
            i += 1;
        }
        while j < b.len() && b[j] <= x {
            j += 1;
        }
        worst = worst.max((i as f64 / na - j as f64 / nb).abs());
    }
    Ok(worst)
}

/// Sample quantile with linear interpolation between order statistics.
pub fn quantile(samples: &[f64], q: f64) -> Result<f64> {
    if !(0.0..=1.0).contains(&q) {
        return Err(Error::Parameter(format!("quantile {q} outside [0, 1]")));
    }
    let v = sorted(samples)?;
    let pos = q * (v.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    Ok(v[lo] + (v[hi] - v[lo]) * (pos - lo as f64))
}

/// Distance between the 75th and 25th percentiles.
pub fn interquartile_range(samples: &[f64]) -> Result<f64> {
    Ok(quantile(samples, 0.75)? - quantile(samples, 0.25)?)
}
