//! Cell-free deployments: APs on a regular grid over a square area, users
//! dropped uniformly, toroidal (wrap-around) distances, COST-Hata path loss
//! with log-normal shadowing, thermal noise and fractional power control.

use std::io::Write;

use rand::Rng;
use rand_distr::{Distribution, Normal};

use crate::{Error, Result};

/// Shadowing standard deviation in dB.
pub const SHADOWING_STD_DB: f64 = 8.0;
/// Users closer than this to any AP image are redrawn.
pub const MIN_DISTANCE_KM: f64 = 0.01;

/// Boltzmann constant as used for the link budget.
pub const BOLTZMANN: f64 = 1.3e-23;

/// `sigma^2 = T k_B B 10^{NF/10}` in watts.
pub fn noise_power(temperature_k: f64, boltzmann: f64, bandwidth_hz: f64, noise_figure_db: f64) -> Result<f64> {
    if !(temperature_k > 0.0 && boltzmann > 0.0 && bandwidth_hz > 0.0) {
        return Err(Error::Parameter(
            "temperature, Boltzmann constant and bandwidth must be positive".into(),
        ));
    }
    Ok(temperature_k * boltzmann * bandwidth_hz * 10f64.powf(noise_figure_db / 10.0))
}

/// COST-Hata large-scale gain in dB: `-135 - 35 log10(d_km) + shadowing_db`.
pub fn path_gain_db(distance_km: f64, shadowing_db: f64) -> f64 {
    -135.0 - 35.0 * distance_km.log10() + shadowing_db
}

/// Distance on a torus of side `side`: the shortest of the 9 image distances.
pub fn wrap_distance(a: (f64, f64), b: (f64, f64), side: f64) -> f64 {
    let mut best = f64::INFINITY;
    for sx in [-1.0, 0.0, 1.0] {
        for sy in [-1.0, 0.0, 1.0] {
            let dx = a.0 - (b.0 + sx * side);
            let dy = a.1 - (b.1 + sy * side);
            best = best.min(dx.hypot(dy));
        }
    }
    best
}

/// Geometry and large-scale fading of one cell-free drop.
#[derive(Debug, Clone, PartialEq)]
pub struct CellFreeLayout {
    pub area_side_km: f64,
    pub antennas_per_ap: usize,
    pub ap_positions: Vec<(f64, f64)>,
    pub user_positions: Vec<(f64, f64)>,
    /// Wrap-around distances, `[ap * K + k]`.
    pub distances_km: Vec<f64>,
    /// Shadowing in dB, `[ap * K + k]`.
    pub shadowing_db: Vec<f64>,
    /// Linear large-scale gains, `[ap * K + k]`.
    pub beta: Vec<f64>,
}

/// Drops `num_users` users in a square of side `area_side_km` served by
/// `num_aps` APs on a `sqrt(num_aps)` grid.
pub fn build_layout<R: Rng + ?Sized>(
    num_aps: usize,
    antennas_per_ap: usize,
    num_users: usize,
    area_side_km: f64,
    rng: &mut R,
) -> Result<CellFreeLayout> {
    let per_side = (num_aps as f64).sqrt().round() as usize;
    if num_aps == 0 || per_side * per_side != num_aps {
        return Err(Error::Parameter(format!(
            "AP count must be a perfect square, got {num_aps}"
        )));
    }
    if antennas_per_ap == 0 || num_users == 0 {
        return Err(Error::Parameter("need at least one antenna per AP and one user".into()));
    }
    if !(area_side_km > 0.0) {
        return Err(Error::Parameter("area side must be positive".into()));
    }
    let spacing = area_side_km / per_side as f64;
    let ap_positions: Vec<(f64, f64)> = (0..num_aps)
        .map(|a| {
            let (row, col) = (a / per_side, a % per_side);
            ((col as f64 + 0.5) * spacing, (row as f64 + 0.5) * spacing)
        })
        .collect();
    let mut user_positions = Vec::with_capacity(num_users);
    while user_positions.len() < num_users {
        let p = (
            rng.random::<f64>() * area_side_km,
            rng.random::<f64>() * area_side_km,
        );
        if ap_positions
            .iter()
            .all(|&ap| wrap_distance(ap, p, area_side_km) >= MIN_DISTANCE_KM)
        {
            user_positions.push(p);
        }
    }
    let shadow = Normal::new(0.0, SHADOWING_STD_DB).expect("finite std");
    let mut distances_km = Vec::with_capacity(num_aps * num_users);
    let mut shadowing_db = Vec::with_capacity(num_aps * num_users);
    let mut beta = Vec::with_capacity(num_aps * num_users);
    for &ap in &ap_positions {
        for &user in &user_positions {
            let d = wrap_distance(ap, user, area_side_km);
            let x = shadow.sample(rng);
            distances_km.push(d);
            shadowing_db.push(x);
            beta.push(10f64.powf(path_gain_db(d, x) / 10.0));
        }
    }
    Ok(CellFreeLayout {
        area_side_km,
        antennas_per_ap,
        ap_positions,
        user_positions,
        distances_km,
        shadowing_db,
        beta,
    })
}

impl CellFreeLayout {
    pub fn num_aps(&self) -> usize {
        self.ap_positions.len()
    }

    pub fn num_users(&self) -> usize {
        self.user_positions.len()
    }

    pub fn num_antennas(&self) -> usize {
        self.num_aps() * self.antennas_per_ap
    }

    /// `beta` between AP `ap` and user `k`.
    pub fn ap_beta(&self, ap: usize, k: usize) -> f64 {
        self.beta[ap * self.num_users() + k]
    }

    /// `beta_{i,k}` for antenna `i`; all antennas of an AP share it.
    pub fn antenna_beta(&self, i: usize, k: usize) -> f64 {
        self.ap_beta(i / self.antennas_per_ap, k)
    }

    /// Per-antenna gains laid out `[i * K + k]`.
    pub fn antenna_betas(&self) -> Vec<f64> {
        let k_users = self.num_users();
        (0..self.num_antennas() * k_users)
            .map(|idx| self.antenna_beta(idx / k_users, idx % k_users))
            .collect()
    }

    /// `sum_i beta_{i,k}` over all antennas, per user.
    pub fn beta_sums(&self) -> Vec<f64> {
        (0..self.num_users())
            .map(|k| {
                (0..self.num_aps()).map(|a| self.ap_beta(a, k)).sum::<f64>()
                    * self.antennas_per_ap as f64
            })
            .collect()
    }

    /// Writes one CSV row per (AP, user) pair; `power` is `mu_k` in watts.
    pub fn write_csv<W: Write>(&self, out: W, power: &[f64]) -> Result<()> {
        let mut w = csv::Writer::from_writer(out);
        w.write_record([
            "ap",
            "ap_x_km",
            "ap_y_km",
            "user",
            "user_x_km",
            "user_y_km",
            "distance_km",
            "shadowing_db",
            "beta_db",
            "mu_mw",
        ])?;
        let k_users = self.num_users();
        for (a, ap) in self.ap_positions.iter().enumerate() {
            for (k, user) in self.user_positions.iter().enumerate() {
                let idx = a * k_users + k;
                let mu = power.get(k).copied().unwrap_or(f64::NAN);
                w.write_record([
                    a.to_string(),
                    ap.0.to_string(),
                    ap.1.to_string(),
                    k.to_string(),
                    user.0.to_string(),
                    user.1.to_string(),
                    self.distances_km[idx].to_string(),
                    self.shadowing_db[idx].to_string(),
                    (10.0 * self.beta[idx].log10()).to_string(),
                    (mu * 1e3).to_string(),
                ])?;
            }
        }
        w.flush()?;
        Ok(())
    }
}

/// Uplink transmit powers of a fractional power-control rule.
#[derive(Debug, Clone, PartialEq)]
pub struct PowerControl {
    pub mu: Vec<f64>,
    pub exponent: f64,
    pub max_power_w: f64,
}

/// `mu_k = P_max (sum_i beta_{i,k})^{-nu} / max_j (sum_i beta_{i,j})^{-nu}`.
pub fn fractional_power_control(beta_sums: &[f64], exponent: f64, max_power_w: f64) -> Result<PowerControl> {
    if !(0.0..=1.0).contains(&exponent) {
        return Err(Error::Parameter(format!(
            "power-control exponent must be in [0, 1], got {exponent}"
        )));
    }
    if !(max_power_w > 0.0) {
        return Err(Error::Parameter("maximum power must be positive".into()));
    }
    if beta_sums.is_empty() || beta_sums.iter().any(|&b| !(b > 0.0 && b.is_finite())) {
        return Err(Error::Parameter("aggregate gains must be positive".into()));
    }
    // Work in logs: the gains are ~1e-13 and their negative powers overflow easily.
    let logs: Vec<f64> = beta_sums.iter().map(|b| -exponent * b.ln()).collect();
    let top = logs.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    Ok(PowerControl {
        mu: logs.iter().map(|l| max_power_w * (l - top).exp()).collect(),
        exponent,
        max_power_w,
    })
}
