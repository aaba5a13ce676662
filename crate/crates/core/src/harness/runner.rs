//! Trial runner.
//!
//! Each trial draws its channels, data and noise once from streams keyed by
//! `(seed, purpose, trial)` and reuses them across every sweep point and arm,
//! so curves are compared on common random numbers. Antenna sweeps take the
//! first `N` antennas of the largest draw; SNR sweeps rescale one unit-power
//! noise draw. The FBMC and OFDM arms of a trial share channels, data and
//! noise samples.

use std::io::Write;
use std::sync::Arc;

use rand::Rng;
use rayon::prelude::*;

use crate::cellfree::{build_layout, fractional_power_control, noise_power, CellFreeLayout};
use crate::channel::{add_noise, apply_channel, draw_realization, tdlc_pdp, ChannelRealization, PdpProfile};
use crate::equalizer::{
    apply_csi_correction, approximate_pdp, build_combiner, combine_stream, correct_pdp, design_fse,
    equalize_stream, equivalent_channel, nyquist_target, pdp_pulse, subcarrier_gains, subcarrier_pulse,
    CompositePulse, CorrectionContext, CorrectionMode, ErrorStatsView, EquivalentChannel, Fse,
    FseKind,
};
use crate::estimation::{assemble_model, build_pilot_plan, ErrorStats, EstimationModel};
use crate::filterbank::{design_phydyas, DemodGrid, FilterBank, SymbolFrame};
use crate::harness::config::{CsiMode, ExperimentConfig, FseDesign, Scenario, SweepParam};
use crate::harness::metrics::{count_bit_errors, measure_sinr, nmse};
use crate::ofdm::{OfdmConfig, OfdmFrame, OfdmModem};
use crate::qam::Constellation;
use crate::rng::{stream, Purpose};
use crate::signal::{complex_noise, db_to_linear};
use crate::{Error, Result, C64};

/// Output columns, in order.
pub const CSV_HEADER: [&str; 9] = [
    "scenario",
    "waveform",
    "sweep_param",
    "sweep_value",
    "user",
    "metric",
    "value",
    "trials",
    "seed",
];

/// One output row.
#[derive(Debug, Clone, PartialEq)]
pub struct MetricRow {
    pub scenario: String,
    pub waveform: String,
    pub sweep_param: String,
    pub sweep_value: f64,
    pub user: String,
    pub metric: String,
    pub value: f64,
    pub trials: usize,
    pub seed: u64,
}

/// Writes rows under [`CSV_HEADER`].
pub fn write_csv<W: Write>(rows: &[MetricRow], out: W) -> Result<()> {
    let mut w = csv::Writer::from_writer(out);
    w.write_record(CSV_HEADER)?;
    for r in rows {
        w.write_record([
            r.scenario.clone(),
            r.waveform.clone(),
            r.sweep_param.clone(),
            r.sweep_value.to_string(),
            r.user.clone(),
            r.metric.clone(),
            r.value.to_string(),
            r.trials.to_string(),
            r.seed.to_string(),
        ])?;
    }
    w.flush()?;
    Ok(())
}

#[derive(Debug, Clone, Copy, PartialEq)]
enum ArmKind {
    Combining,
    Fse {
        len: usize,
        design: FseDesign,
        corrected: bool,
    },
    Ofdm,
}

#[derive(Debug, Clone)]
struct Arm {
    label: String,
    kind: ArmKind,
}

fn build_arms(cfg: &ExperimentConfig) -> Vec<Arm> {
    let mut arms = Vec::new();
    if cfg.waveform.has_fbmc() {
        for &len in &cfg.fse_lengths {
            if len == 0 {
                if !arms.iter().any(|a: &Arm| a.kind == ArmKind::Combining) {
                    arms.push(Arm {
                        label: "fbmc:none".into(),
                        kind: ArmKind::Combining,
                    });
                }
                continue;
            }
            for &design in &cfg.fse_designs {
                let mut flags: Vec<bool> = if cfg.csi == CsiMode::Estimated {
                    cfg.corrections.clone()
                } else {
                    vec![false]
                };
                flags.dedup();
                for corrected in flags {
                    let suffix = if corrected { ":corrected" } else { "" };
                    let kind = ArmKind::Fse {
                        len,
                        design,
                        corrected,
                    };
                    if !arms.iter().any(|a| a.kind == kind) {
                        arms.push(Arm {
                            label: format!("fbmc:lfse={len}:{design}{suffix}"),
                            kind,
                        });
                    }
                }
            }
        }
    }
    if cfg.waveform.has_ofdm() {
        arms.push(Arm {
            label: "ofdm".into(),
            kind: ArmKind::Ofdm,
        });
    }
    arms
}

/// Everything that is fixed for a run.
struct Setup {
    cfg: ExperimentConfig,
    bank: FilterBank,
    target: CompositePulse,
    constellation: Constellation,
    model: Option<Arc<EstimationModel>>,
    modem: OfdmModem,
    arms: Vec<Arm>,
    data_start: usize,
    num_slots: usize,
}

impl Setup {
    fn new(cfg: &ExperimentConfig) -> Result<Self> {
        cfg.validate()?;
        let filter = design_phydyas(cfg.num_subcarriers, cfg.overlap)?;
        let plan = build_pilot_plan(
            cfg.num_users,
            cfg.estimator_taps(),
            cfg.num_subcarriers,
            cfg.guard_slots(),
            cfg.pilot_seed,
        );
        let model = match cfg.csi {
            CsiMode::Estimated => Some(Arc::new(assemble_model(&plan?, &filter, 1.0)?)),
            CsiMode::Perfect => None,
        };
        let data_start = 1 + cfg.guard_slots();
        let num_slots = data_start + 2 * cfg.data_symbols + 2 * cfg.overlap;
        Ok(Self {
            cfg: cfg.clone(),
            target: nyquist_target(&filter),
            bank: FilterBank::new(filter),
            constellation: Constellation::qam(cfg.constellation)?,
            model,
            modem: OfdmModem::new(OfdmConfig::new(cfg.num_subcarriers, cfg.cp_length)?),
            arms: build_arms(cfg),
            data_start,
            num_slots,
        })
    }

    fn data_slots(&self) -> std::ops::Range<usize> {
        self.data_start..self.data_start + 2 * self.cfg.data_symbols
    }

    fn metric_name(&self) -> &'static str {
        if self.cfg.noiseless {
            "sir_db"
        } else {
            "sinr_db"
        }
    }
}

/// Transmitted data of one trial.
struct TrialData {
    fbmc: SymbolFrame,
    ofdm: OfdmFrame,
    /// PAM levels per user in (subcarrier, symbol, I/Q) order.
    levels: Vec<Vec<f64>>,
    /// PAM indices in the same order.
    indices: Vec<Vec<usize>>,
}

fn draw_data(setup: &Setup, trial: u64) -> Result<TrialData> {
    let cfg = &setup.cfg;
    let (k_users, big_m, d) = (cfg.num_users, cfg.num_subcarriers, cfg.data_symbols);
    let c = &setup.constellation;
    let mut rng = stream(cfg.seed, Purpose::Data, trial);
    let mut fbmc = SymbolFrame::zeros(k_users, big_m, setup.num_slots);
    let mut ofdm = OfdmFrame::zeros(k_users, big_m, d);
    let mut levels = vec![Vec::with_capacity(2 * big_m * d); k_users];
    let mut indices = vec![Vec::with_capacity(2 * big_m * d); k_users];
    for k in 0..k_users {
        for m in 0..big_m {
            let idx = c.random_indices(&mut rng, 2 * d);
            for t in 0..d {
                let (i, q) = (idx[2 * t], idx[2 * t + 1]);
                fbmc.set(k, m, setup.data_start + 2 * t, c.level(i));
                fbmc.set(k, m, setup.data_start + 2 * t + 1, c.level(q));
                ofdm.set(k, t, m, c.symbol(i, q));
                levels[k].extend([c.level(i), c.level(q)]);
                indices[k].extend([i, q]);
            }
        }
    }
    if cfg.csi == CsiMode::Estimated {
        let plan = setup.model.as_ref().expect("estimated CSI has a model").plan();
        plan.write_pilots(&mut fbmc)?;
    }
    Ok(TrialData {
        fbmc,
        ofdm,
        levels,
        indices,
    })
}

/// Received signals of one channel state, before noise.
struct Propagation {
    channel: ChannelRealization,
    fbmc: Vec<Vec<C64>>,
    ofdm: Vec<Vec<C64>>,
    noise: Vec<Vec<C64>>,
}

fn propagate(
    setup: &Setup,
    data: &mut TrialData,
    channel: ChannelRealization,
    power: &[f64],
    noise_stream: &mut impl Rng,
) -> Result<Propagation> {
    data.fbmc.set_power_coeffs(power.to_vec())?;
    data.ofdm.set_power_coeffs(power.to_vec())?;
    let fbmc = if setup.cfg.waveform.has_fbmc() || setup.cfg.csi == CsiMode::Estimated {
        apply_channel(&setup.bank.synthesize(&data.fbmc)?, &channel)?
    } else {
        Vec::new()
    };
    let ofdm = if setup.cfg.waveform.has_ofdm() {
        apply_channel(&setup.modem.modulate(&data.ofdm)?, &channel)?
    } else {
        Vec::new()
    };
    let len = fbmc
        .first()
        .map_or(0, Vec::len)
        .max(ofdm.first().map_or(0, Vec::len));
    let noise = if setup.cfg.noiseless {
        Vec::new()
    } else {
        (0..channel.num_antennas())
            .map(|_| complex_noise(noise_stream, len, 1.0))
            .collect()
    };
    Ok(Propagation {
        channel,
        fbmc,
        ofdm,
        noise,
    })
}

/// Analyzed FBMC and demodulated OFDM grids at one noise level.
struct Grids {
    fbmc: Option<DemodGrid>,
    ofdm: Option<DemodGrid>,
}

fn receive(setup: &Setup, prop: &Propagation, noise_var: f64) -> Result<Grids> {
    let scale = noise_var.sqrt();
    let noisy = |clean: &[Vec<C64>]| -> Result<Vec<Vec<C64>>> {
        let mut r = clean.to_vec();
        if !prop.noise.is_empty() && scale > 0.0 {
            add_noise(&mut r, &prop.noise, scale)?;
        }
        Ok(r)
    };
    let fbmc = if prop.fbmc.is_empty() {
        None
    } else {
        Some(setup.bank.analyze_antennas(&noisy(&prop.fbmc)?, setup.num_slots)?)
    };
    let ofdm = if prop.ofdm.is_empty() {
        None
    } else {
        Some(setup.modem.demodulate(&noisy(&prop.ofdm)?, setup.cfg.data_symbols)?)
    };
    Ok(Grids { fbmc, ofdm })
}

/// What one sweep point hands to the receiver.
struct PointState<'a> {
    grids: &'a Grids,
    channel: &'a ChannelRealization,
    /// Exact profile per user (co-located only).
    pdps: &'a [PdpProfile],
    power: &'a [f64],
    noise_var: f64,
    beta_sums: Vec<f64>,
}

#[derive(Debug, Clone, Default)]
struct UserOutcome {
    sinr_db: f64,
    bit_errors: u64,
    bits: u64,
}

#[derive(Debug, Clone, Default)]
struct PointOutcome {
    /// `[arm][user]`.
    arms: Vec<Vec<UserOutcome>>,
    /// Per-user estimator NMSE (estimated CSI only).
    nmse: Vec<f64>,
}

fn score(setup: &Setup, data: &TrialData, k: usize, estimates: &[f64]) -> Result<UserOutcome> {
    let (bit_errors, bits) = count_bit_errors(estimates, &data.indices[k], &setup.constellation)?;
    Ok(UserOutcome {
        sinr_db: measure_sinr(estimates, &data.levels[k])?,
        bit_errors,
        bits,
    })
}

fn evaluate_point(setup: &Setup, data: &TrialData, st: &PointState<'_>) -> Result<PointOutcome> {
    let cfg = &setup.cfg;
    let k_users = cfg.num_users;
    let big_m = cfg.num_subcarriers;
    let n_antennas = st.channel.num_antennas();
    let amp: Vec<f64> = st.power.iter().map(|p| p.sqrt()).collect();
    let mut outcome = PointOutcome::default();

    // Channel knowledge at the receiver, normalized to unit transmit power.
    let (csi, stats) = match (&setup.model, cfg.csi) {
        (Some(model), CsiMode::Estimated) => {
            let grid = st.grids.fbmc.as_ref().expect("estimation needs the FBMC grid");
            let mut est = model.estimate_grid(grid)?;
            for i in 0..n_antennas {
                for k in 0..k_users {
                    est.taps_mut(i, k).iter_mut().for_each(|h| *h /= amp[k]);
                }
            }
            let base = model.with_noise_var(st.noise_var)?.error_stats();
            let stats: Vec<ErrorStats> = st
                .power
                .iter()
                .map(|&mu| ErrorStats {
                    sigma_et2: base.sigma_et2 / mu,
                    sigma_ef2: base.sigma_ef2 / mu,
                })
                .collect();
            let truth = st.channel.resized(est.len());
            for k in 0..k_users {
                let (mut e, mut t) = (Vec::new(), Vec::new());
                for i in 0..n_antennas {
                    e.extend_from_slice(est.taps(i, k));
                    t.extend_from_slice(truth.taps(i, k));
                }
                outcome.nmse.push(nmse(&e, &t)?);
            }
            (est, stats)
        }
        _ => (st.channel.clone(), vec![ErrorStats::default(); k_users]),
    };

    let gains = subcarrier_gains(&csi, big_m)?;
    let comb = build_combiner(&gains, cfg.combiner, st.noise_var)?;
    let streams = match &st.grids.fbmc {
        Some(grid) if cfg.waveform.has_fbmc() => Some(combine_stream(grid, &comb)?),
        _ => None,
    };
    let mut equivalent: Option<EquivalentChannel> = None;
    let mut approx: Option<Vec<PdpProfile>> = None;
    let slots = setup.data_slots();

    for arm in &setup.arms {
        let mut users = Vec::with_capacity(k_users);
        match arm.kind {
            ArmKind::Combining => {
                let y = streams.as_ref().expect("FBMC arm has streams");
                for k in 0..k_users {
                    let mut est = Vec::with_capacity(2 * big_m * cfg.data_symbols);
                    for m in 0..big_m {
                        est.extend(y.row(k, m)[slots.clone()].iter().map(|v| v.re / amp[k]));
                    }
                    users.push(score(setup, data, k, &est)?);
                }
            }
            ArmKind::Fse {
                len,
                design,
                corrected,
            } => {
                let y = streams.as_ref().expect("FBMC arm has streams");
                let mode = if corrected {
                    match (cfg.scenario, design) {
                        (Scenario::Colocated, FseDesign::Equivalent) => CorrectionMode::SubtractTermSmall,
                        (Scenario::Cellfree, _) => CorrectionMode::SubtractTermCellfree,
                        _ => CorrectionMode::ColocatedScale,
                    }
                } else {
                    CorrectionMode::None
                };
                let eq = match design {
                    FseDesign::Equivalent => {
                        if equivalent.is_none() {
                            equivalent = Some(equivalent_channel(&comb, &csi, st.power)?);
                        }
                        let base = equivalent.as_ref().expect("just computed");
                        Some(if mode == CorrectionMode::None {
                            base.clone()
                        } else {
                            let view = ErrorStatsView {
                                per_user: stats.clone(),
                                mode,
                            };
                            let ctx = CorrectionContext {
                                num_antennas: n_antennas,
                                power: st.power.to_vec(),
                                beta_sums: st.beta_sums.clone(),
                            };
                            apply_csi_correction(base, &view, &ctx)?
                        })
                    }
                    _ => None,
                };
                for k in 0..k_users {
                    let pdp_pulse_k = match design {
                        FseDesign::PdpExact => Some(pdp_pulse(
                            &correct_pdp(&st.pdps[k], &stats[k], mode)?,
                            setup.bank.filter(),
                        )),
                        FseDesign::PdpApprox => {
                            if approx.is_none() {
                                approx = Some(approximate_pdp(&csi)?);
                            }
                            let p = &approx.as_ref().expect("just computed")[k];
                            Some(pdp_pulse(&correct_pdp(p, &stats[k], mode)?, setup.bank.filter()))
                        }
                        FseDesign::Equivalent => None,
                    };
                    let mut shared: Option<Fse> = None;
                    let mut est = Vec::with_capacity(2 * big_m * cfg.data_symbols);
                    for m in 0..big_m {
                        let noise_level = st.noise_var * comb.total_noise_gain(m) / k_users as f64;
                        let fse = match (&pdp_pulse_k, &eq) {
                            (Some(g), _) if cfg.fse_kind == FseKind::ZfLs => {
                                if shared.is_none() {
                                    shared = Some(design_fse(g, &setup.target, len, cfg.fse_kind, 0.0)?);
                                }
                                shared.clone().expect("just designed")
                            }
                            (Some(g), _) => design_fse(g, &setup.target, len, cfg.fse_kind, noise_level)?,
                            (None, Some(eq)) => {
                                let g = subcarrier_pulse(eq.taps(k, k, m), setup.bank.filter(), m);
                                design_fse(&g, &setup.target, len, cfg.fse_kind, noise_level)?
                            }
                            (None, None) => unreachable!("every design yields a pulse"),
                        };
                        let mut s = equalize_stream(y.row(k, m), &fse, slots.clone());
                        if design != FseDesign::Equivalent {
                            s.iter_mut().for_each(|v| *v /= amp[k]);
                        }
                        est.extend(s);
                    }
                    users.push(score(setup, data, k, &est)?);
                }
            }
            ArmKind::Ofdm => {
                let grid = st.grids.ofdm.as_ref().expect("OFDM arm has a grid");
                let y = combine_stream(grid, &comb)?;
                for k in 0..k_users {
                    let mut est = Vec::with_capacity(2 * big_m * cfg.data_symbols);
                    for m in 0..big_m {
                        for v in y.row(k, m) {
                            est.extend([v.re / amp[k], v.im / amp[k]]);
                        }
                    }
                    users.push(score(setup, data, k, &est)?);
                }
            }
        }
        outcome.arms.push(users);
    }
    Ok(outcome)
}

fn uniform_pdp(setup: &Setup, rng: &mut impl Rng) -> Result<PdpProfile> {
    let cfg = &setup.cfg;
    let [lo, hi] = cfg.rms_delay_ns;
    let delay = lo + (hi - lo) * rng.random::<f64>();
    tdlc_pdp(delay * 1e-9, cfg.sample_rate_hz, cfg.tap_threshold_db)
}

fn run_colocated(setup: &Setup, trial: u64) -> Result<Vec<PointOutcome>> {
    let cfg = &setup.cfg;
    let k_users = cfg.num_users;
    let values = &cfg.sweep.values;
    let max_n = match cfg.sweep.param {
        SweepParam::Antennas => values.iter().fold(0.0f64, |a, &b| a.max(b)) as usize,
        _ => cfg.num_antennas,
    };
    let mut ch_rng = stream(cfg.seed, Purpose::Channel, trial);
    let pdps = (0..k_users)
        .map(|_| uniform_pdp(setup, &mut ch_rng))
        .collect::<Result<Vec<_>>>()?;
    let pair_pdps: Vec<PdpProfile> = (0..max_n * k_users).map(|idx| pdps[idx % k_users].clone()).collect();
    let channel = draw_realization(&pair_pdps, None, max_n, k_users, &mut ch_rng)?;
    let mut data = draw_data(setup, trial)?;
    let power = vec![1.0; k_users];
    let mut noise_rng = stream(cfg.seed, Purpose::Noise, trial);
    let prop = propagate(setup, &mut data, channel, &power, &mut noise_rng)?;

    let noise_var_at = |snr_db: f64| if cfg.noiseless { 0.0 } else { db_to_linear(-snr_db) };
    let mut cached: Option<(f64, Grids)> = None;
    let mut out = Vec::with_capacity(values.len());
    for &v in values {
        let (n, snr) = match cfg.sweep.param {
            SweepParam::Antennas => (v as usize, cfg.snr_db),
            _ => (max_n, v),
        };
        let noise_var = noise_var_at(snr);
        if cached.as_ref().map(|(s, _)| *s) != Some(noise_var) {
            cached = Some((noise_var, receive(setup, &prop, noise_var)?));
        }
        let full = &cached.as_ref().expect("just cached").1;
        let sliced = Grids {
            fbmc: full.fbmc.as_ref().map(|g| g.first_antennas(n)),
            ofdm: full.ofdm.as_ref().map(|g| g.first_antennas(n)),
        };
        let channel = prop.channel.first_antennas(n);
        let st = PointState {
            grids: &sliced,
            channel: &channel,
            pdps: &pdps,
            power: &power,
            noise_var,
            beta_sums: vec![n as f64; k_users],
        };
        out.push(evaluate_point(setup, &data, &st)?);
    }
    Ok(out)
}

fn cellfree_channel(
    setup: &Setup,
    layout: &CellFreeLayout,
    rng: &mut impl Rng,
) -> Result<ChannelRealization> {
    let k_users = setup.cfg.num_users;
    let ap_pdps = (0..layout.num_aps() * k_users)
        .map(|_| uniform_pdp(setup, rng))
        .collect::<Result<Vec<_>>>()?;
    let n = layout.num_antennas();
    let pair_pdps: Vec<PdpProfile> = (0..n * k_users)
        .map(|idx| {
            let (i, k) = (idx / k_users, idx % k_users);
            ap_pdps[(i / layout.antennas_per_ap) * k_users + k].clone()
        })
        .collect();
    draw_realization(&pair_pdps, Some(&layout.antenna_betas()), n, k_users, rng)
}

fn run_cellfree(setup: &Setup, trial: u64) -> Result<Vec<PointOutcome>> {
    let cfg = &setup.cfg;
    let k_users = cfg.num_users;
    let noise_var = if cfg.noiseless {
        0.0
    } else {
        noise_power(
            cfg.noise_temperature_k,
            cfg.boltzmann,
            cfg.bandwidth_hz,
            cfg.noise_figure_db,
        )?
    };
    let mut out = Vec::with_capacity(cfg.sweep.values.len());
    let mut fixed: Option<(CellFreeLayout, ChannelRealization)> = None;
    for &v in &cfg.sweep.values {
        let (n_ap, nu) = match cfg.sweep.param {
            SweepParam::Aps => (v as usize, cfg.power_exponent),
            _ => (cfg.num_aps, v),
        };
        if fixed.is_none() || cfg.sweep.param == SweepParam::Aps {
            let mut layout_rng = stream(cfg.seed, Purpose::Layout, trial);
            let layout = build_layout(n_ap, cfg.antennas_per_ap, k_users, cfg.area_side_km, &mut layout_rng)?;
            let mut ch_rng = stream(cfg.seed, Purpose::Channel, trial);
            let channel = cellfree_channel(setup, &layout, &mut ch_rng)?;
            fixed = Some((layout, channel));
        }
        let (layout, channel) = fixed.as_ref().expect("layout drawn");
        let beta_sums = layout.beta_sums();
        let power = fractional_power_control(&beta_sums, nu, cfg.max_power_w)?.mu;
        let mut data = draw_data(setup, trial)?;
        let mut noise_rng = stream(cfg.seed, Purpose::Noise, trial);
        let prop = propagate(setup, &mut data, channel.clone(), &power, &mut noise_rng)?;
        let grids = receive(setup, &prop, noise_var)?;
        let st = PointState {
            grids: &grids,
            channel: &prop.channel,
            pdps: &[],
            power: &power,
            noise_var,
            beta_sums,
        };
        out.push(evaluate_point(setup, &data, &st)?);
    }
    Ok(out)
}

fn run_trial(setup: &Setup, trial: u64) -> Result<Vec<PointOutcome>> {
    match setup.cfg.scenario {
        Scenario::Colocated => run_colocated(setup, trial),
        Scenario::Cellfree => run_cellfree(setup, trial),
    }
}

/// Runs every trial of `cfg` on `threads` worker threads and reduces the
/// results in trial order, so the output does not depend on `threads`.
pub fn run_experiment(cfg: &ExperimentConfig, threads: usize) -> Result<Vec<MetricRow>> {
    let setup = Setup::new(cfg)?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(threads.max(1))
        .build()
        .map_err(|e| Error::Parameter(format!("thread pool: {e}")))?;
    let trials: Vec<Vec<PointOutcome>> = pool.install(|| {
        (0..cfg.trials as u64)
            .into_par_iter()
            .map(|t| run_trial(&setup, t))
            .collect::<Result<Vec<_>>>()
    })?;
    Ok(reduce(&setup, &trials))
}

fn reduce(setup: &Setup, trials: &[Vec<PointOutcome>]) -> Vec<MetricRow> {
    let cfg = &setup.cfg;
    let k_users = cfg.num_users;
    let n_trials = trials.len() as f64;
    let scenario = match cfg.scenario {
        Scenario::Colocated => "colocated",
        Scenario::Cellfree => "cellfree",
    };
    let metric = setup.metric_name();
    let mut rows = Vec::new();
    let mut push = |waveform: &str, value_at: f64, user: String, metric: String, value: f64| {
        rows.push(MetricRow {
            scenario: scenario.into(),
            waveform: waveform.into(),
            sweep_param: cfg.sweep.param.to_string(),
            sweep_value: value_at,
            user,
            metric,
            value,
            trials: cfg.trials,
            seed: cfg.seed,
        });
    };
    for (p, &at) in cfg.sweep.values.iter().enumerate() {
        for (a, arm) in setup.arms.iter().enumerate() {
            let mut sinr_all = 0.0;
            let (mut err_all, mut bits_all) = (0u64, 0u64);
            for k in 0..k_users {
                let mut sinr = 0.0;
                let (mut err, mut bits) = (0u64, 0u64);
                for t in trials {
                    let u = &t[p].arms[a][k];
                    sinr += u.sinr_db;
                    err += u.bit_errors;
                    bits += u.bits;
                }
                sinr_all += sinr;
                err_all += err;
                bits_all += bits;
                push(&arm.label, at, k.to_string(), metric.into(), sinr / n_trials);
                push(&arm.label, at, k.to_string(), "ber".into(), err as f64 / bits as f64);
            }
            push(&arm.label, at, "all".into(), metric.into(), sinr_all / (n_trials * k_users as f64));
            push(&arm.label, at, "all".into(), "ber".into(), err_all as f64 / bits_all as f64);
            if cfg.record_samples {
                for t in trials {
                    for (k, u) in t[p].arms[a].iter().enumerate() {
                        push(&arm.label, at, k.to_string(), format!("{metric}_sample"), u.sinr_db);
                    }
                }
            }
        }
        if cfg.csi == CsiMode::Estimated {
            let mut all = 0.0;
            for k in 0..k_users {
                let v: f64 = trials.iter().map(|t| t[p].nmse[k]).sum::<f64>() / n_trials;
                all += v;
                push("estimator", at, k.to_string(), "nmse".into(), v);
            }
            push("estimator", at, "all".into(), "nmse".into(), all / k_users as f64);
        }
    }
    rows
}
