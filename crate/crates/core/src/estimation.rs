//! Pilot-based joint multiuser channel estimation.
//!
//! All users send their pilots on slot 0, interleaved in frequency: user `k`
//! owns subcarriers `k + j K` for `j = 0 .. L-1`. The demodulated pilot samples
//! of one antenna, stacked user by user, obey `z = A h + eta` where `h` stacks
//! every user's `L` channel taps. The diagonal blocks of `A` hold each user's
//! own pilot gains and the off-diagonal blocks the intrinsic interference
//! between users. The minimum variance unbiased estimate is
//! `h_hat = (A^H C^-1 A)^-1 A^H C^-1 z`.

use nalgebra::DMatrix;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha12Rng;

use crate::channel::ChannelRealization;
use crate::filterbank::{basis_pulse, DemodGrid, FilterBank, PrototypeFilter, SymbolFrame};
use crate::{Error, Result, C64};

/// Default seed of the pilot sign sequence.
pub const DEFAULT_PILOT_SEED: u64 = 0x5EED;

/// Time-frequency positions and values of every user's pilots.
#[derive(Debug, Clone, PartialEq)]
pub struct PilotPlan {
    num_users: usize,
    taps: usize,
    num_subcarriers: usize,
    guard_slots: usize,
    subcarriers: Vec<Vec<usize>>,
    values: Vec<Vec<f64>>,
}

/// Comb-interleaved plan with `taps` pilots per user on slot 0 and `guard_slots`
/// empty slots after it. Pilot values are `+-1` drawn from `seed`.
pub fn build_pilot_plan(
    num_users: usize,
    taps: usize,
    num_subcarriers: usize,
    guard_slots: usize,
    seed: u64,
) -> Result<PilotPlan> {
    if num_users == 0 || taps == 0 {
        return Err(Error::Parameter("pilot plan needs at least one user and one tap".into()));
    }
    if num_users * taps > num_subcarriers {
        return Err(Error::Capacity {
            users: num_users,
            taps,
            subcarriers: num_subcarriers,
        });
    }
    let mut rng = ChaCha12Rng::seed_from_u64(seed);
    let subcarriers = (0..num_users)
        .map(|k| (0..taps).map(|j| (k + j * num_users) % num_subcarriers).collect())
        .collect();
    let values = (0..num_users)
        .map(|_| {
            (0..taps)
                .map(|_| if rng.random::<bool>() { 1.0 } else { -1.0 })
                .collect()
        })
        .collect();
    Ok(PilotPlan {
        num_users,
        taps,
        num_subcarriers,
        guard_slots,
        subcarriers,
        values,
    })
}

impl PilotPlan {
    pub fn num_users(&self) -> usize {
        self.num_users
    }

    /// Estimated channel length `L`, also the pilot count per user.
    pub fn taps(&self) -> usize {
        self.taps
    }

    pub fn num_subcarriers(&self) -> usize {
        self.num_subcarriers
    }

    pub fn guard_slots(&self) -> usize {
        self.guard_slots
    }

    /// Slots taken by pilots and guards; data starts at this slot.
    pub fn data_start(&self) -> usize {
        1 + self.guard_slots
    }

    pub fn subcarriers(&self, k: usize) -> &[usize] {
        &self.subcarriers[k]
    }

    pub fn values(&self, k: usize) -> &[f64] {
        &self.values[k]
    }

    /// All pilot subcarriers in stacking order (user-major).
    pub fn stacked_subcarriers(&self) -> impl Iterator<Item = usize> + '_ {
        self.subcarriers.iter().flatten().copied()
    }

    /// Writes the pilots into slot 0 of `frame`.
    pub fn write_pilots(&self, frame: &mut SymbolFrame) -> Result<()> {
        if frame.num_users() != self.num_users || frame.num_subcarriers() != self.num_subcarriers {
            return Err(Error::Dimension(format!(
                "frame is {}x{}, pilot plan {}x{}",
                frame.num_users(),
                frame.num_subcarriers(),
                self.num_users,
                self.num_subcarriers
            )));
        }
        if frame.num_slots() == 0 {
            return Err(Error::Dimension("frame has no slots".into()));
        }
        for k in 0..self.num_users {
            for (&m, &v) in self.subcarriers[k].iter().zip(&self.values[k]) {
                frame.set(k, m, 0, v);
            }
        }
        Ok(())
    }
}

/// Per-tap and per-subcarrier estimation error variances.
#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct ErrorStats {
    /// `sigma_et^2`, error variance of one channel tap.
    pub sigma_et2: f64,
    /// `sigma_ef^2 = L sigma_et^2`, error variance of one subcarrier gain.
    pub sigma_ef2: f64,
}

/// The linear pilot model of one antenna and its MVU solve.
#[derive(Debug, Clone)]
pub struct EstimationModel {
    plan: PilotPlan,
    system: DMatrix<C64>,
    unit_noise_cov: DMatrix<C64>,
    operator: DMatrix<C64>,
    unit_mse: f64,
    noise_var: f64,
}

/// Assembles `A` and the noise covariance for `plan` and caches the MVU operator.
pub fn assemble_model(
    plan: &PilotPlan,
    filter: &PrototypeFilter,
    noise_var: f64,
) -> Result<EstimationModel> {
    if plan.num_subcarriers() != filter.num_subcarriers() {
        return Err(Error::Dimension(format!(
            "pilot plan has {} subcarriers, filter {}",
            plan.num_subcarriers(),
            filter.num_subcarriers()
        )));
    }
    let k_users = plan.num_users();
    let taps = plan.taps();
    let rows = k_users * taps;
    let positions: Vec<usize> = plan.stacked_subcarriers().collect();
    let bank = FilterBank::new(filter.clone());
    let span = filter.len();

    let mut system = DMatrix::<C64>::zeros(rows, rows);
    for k in 0..k_users {
        let mut frame = SymbolFrame::zeros(k_users, filter.num_subcarriers(), 1);
        for (&m, &v) in plan.subcarriers(k).iter().zip(plan.values(k)) {
            frame.set(k, m, 0, v);
        }
        let pilot = bank.synthesize_user(&frame, k);
        for l in 0..taps {
            let mut shifted = vec![C64::new(0.0, 0.0); span];
            for (dst, &src) in shifted[l.min(span)..].iter_mut().zip(&pilot) {
                *dst = src;
            }
            let z = bank.analyze(&shifted, 1)?;
            for (row, &m) in positions.iter().enumerate() {
                system[(row, k * taps + l)] = z.get(0, m, 0);
            }
        }
    }

    let pulses: Vec<Vec<C64>> = positions
        .iter()
        .map(|&m| basis_pulse(filter, m, 0).samples)
        .collect();
    let unit_noise_cov = DMatrix::from_fn(rows, rows, |p, q| {
        pulses[q]
            .iter()
            .zip(&pulses[p])
            .map(|(a, b)| a * b.conj())
            .sum::<C64>()
    });
    EstimationModel::from_parts(plan.clone(), system, unit_noise_cov, noise_var)
}

impl EstimationModel {
    /// Builds a model from an explicit system matrix and unit-power noise covariance.
    pub fn from_parts(
        plan: PilotPlan,
        system: DMatrix<C64>,
        unit_noise_cov: DMatrix<C64>,
        noise_var: f64,
    ) -> Result<Self> {
        let rows = plan.num_users() * plan.taps();
        if system.shape() != (rows, rows) || unit_noise_cov.shape() != (rows, rows) {
            return Err(Error::Dimension(format!(
                "model matrices must be {rows}x{rows}"
            )));
        }
        if !(noise_var >= 0.0) {
            return Err(Error::Parameter("noise variance must be non-negative".into()));
        }
        let chol_c = unit_noise_cov
            .clone()
            .cholesky()
            .ok_or_else(|| Error::IllPosed("noise covariance is not positive definite".into()))?;
        let c_inv_a = chol_c.solve(&system);
        let normal = system.adjoint() * &c_inv_a;
        let chol_b = normal
            .cholesky()
            .ok_or_else(|| Error::IllPosed("A^H C^-1 A is singular".into()))?;
        let operator = chol_b.solve(&c_inv_a.adjoint());
        let unit_mse = chol_b.inverse().trace().re;
        Ok(Self {
            plan,
            system,
            unit_noise_cov,
            operator,
            unit_mse,
            noise_var,
        })
    }

    pub fn plan(&self) -> &PilotPlan {
        &self.plan
    }

    /// The block system matrix `A`.
    pub fn system(&self) -> &DMatrix<C64> {
        &self.system
    }

    /// Noise covariance `C` at the model's noise variance.
    pub fn noise_covariance(&self) -> DMatrix<C64> {
        &self.unit_noise_cov * C64::new(self.noise_var, 0.0)
    }

    /// Noise covariance for unit noise variance.
    pub fn unit_noise_covariance(&self) -> &DMatrix<C64> {
        &self.unit_noise_cov
    }

    /// `(A^H C^-1 A)^-1 A^H C^-1`; independent of the noise variance.
    pub fn operator(&self) -> &DMatrix<C64> {
        &self.operator
    }

    pub fn noise_var(&self) -> f64 {
        self.noise_var
    }

    /// Same model at a different noise variance.
    pub fn with_noise_var(&self, noise_var: f64) -> Result<Self> {
        if !(noise_var >= 0.0) {
            return Err(Error::Parameter("noise variance must be non-negative".into()));
        }
        Ok(Self {
            noise_var,
            ..self.clone()
        })
    }

    /// `tr{(A^H C^-1 A)^-1}`, the summed error variance over all `K L` taps.
    pub fn mse_total(&self) -> f64 {
        self.noise_var * self.unit_mse
    }

    pub fn error_stats(&self) -> ErrorStats {
        let sigma_et2 = self.mse_total() / (self.plan.num_users() * self.plan.taps()) as f64;
        ErrorStats {
            sigma_et2,
            sigma_ef2: self.plan.taps() as f64 * sigma_et2,
        }
    }

    /// Stacks antenna `i`'s demodulated pilot samples in model order.
    pub fn gather(&self, grid: &DemodGrid, antenna: usize) -> Vec<C64> {
        self.plan
            .stacked_subcarriers()
            .map(|m| grid.get(antenna, m, 0))
            .collect()
    }

    /// MVU estimate of the stacked taps from stacked pilot samples.
    pub fn estimate(&self, stacked: &[C64]) -> Result<Vec<C64>> {
        if stacked.len() != self.operator.ncols() {
            return Err(Error::Dimension(format!(
                "{} pilot samples for a model with {}",
                stacked.len(),
                self.operator.ncols()
            )));
        }
        let z = DMatrix::from_column_slice(stacked.len(), 1, stacked);
        Ok((&self.operator * z).as_slice().to_vec())
    }

    /// Estimates every antenna's channels from an analyzed grid.
    pub fn estimate_grid(&self, grid: &DemodGrid) -> Result<ChannelRealization> {
        let k_users = self.plan.num_users();
        let taps = self.plan.taps();
        let mut all = Vec::with_capacity(grid.num_antennas() * k_users * taps);
        for i in 0..grid.num_antennas() {
            all.extend(self.estimate(&self.gather(grid, i))?);
        }
        ChannelRealization::from_taps(grid.num_antennas(), k_users, taps, all)
    }
}

/// Convenience wrapper around [`EstimationModel::estimate`].
pub fn estimate_channels(model: &EstimationModel, stacked: &[C64]) -> Result<Vec<C64>> {
    model.estimate(stacked)
}

/// Draws `+-1` with equal probability; used for random real pilots in tests and tools.
pub fn random_sign<R: Rng + ?Sized>(rng: &mut R) -> f64 {
    if rng.random::<bool>() {
        1.0
    } else {
        -1.0
    }
}
