//! Reference implementations shared by the integration tests. Everything here
//! is written from the defining formulas, without going through the library's
//! fast paths.
#![allow(dead_code)]

use std::f64::consts::PI;

use fbmc_mimo::channel::{apply_channel, draw_realization, exponential_pdp, ChannelRealization};
use fbmc_mimo::estimation::{EstimationModel, PilotPlan};
use fbmc_mimo::filterbank::{FilterBank, PrototypeFilter, SymbolFrame};
use fbmc_mimo::signal::complex_noise;
use fbmc_mimo::C64;
use nalgebra::DMatrix;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

pub const Z: C64 = C64::new(0.0, 0.0);

/// PHYDYAS frequency-sampling coefficients for overlap 2, 3 and 4.
pub fn phydyas_k(kappa: usize) -> Vec<f64> {
    match kappa {
        2 => vec![1.0, 0.5f64.sqrt()],
        3 => vec![1.0, 0.911438, 0.411438],
        4 => vec![1.0, 0.971960, 0.5f64.sqrt(), 0.235147],
        _ => panic!("unsupported overlap"),
    }
}

/// `f[l] = K0 + 2 sum_k (-1)^k K_k cos(2 pi k l / (kappa M))` for `l >= 1`,
/// `f[0] = 0`, unit energy.
pub fn phydyas_formula(m: usize, kappa: usize) -> Vec<f64> {
    let k = phydyas_k(kappa);
    let len = kappa * m;
    let raw: Vec<f64> = (0..len)
        .map(|l| {
            if l == 0 {
                return 0.0;
            }
            let mut v = k[0];
            for (i, &ki) in k.iter().enumerate().skip(1) {
                let sign = if i % 2 == 1 { -1.0 } else { 1.0 };
                v += 2.0 * sign * ki * (2.0 * PI * (i * l) as f64 / len as f64).cos();
            }
            v
        })
        .collect();
    let norm = raw.iter().map(|x| x * x).sum::<f64>().sqrt();
    raw.iter().map(|x| x / norm).collect()
}

/// `f_{m,n}[l] = f[l - n M/2] e^{j 2 pi m l / M} j^{m+n}` over `0 .. total`.
pub fn basis(f: &[f64], big_m: usize, m: usize, n: usize, total: usize) -> Vec<C64> {
    let start = n * big_m / 2;
    let phase = match (m + n) % 4 {
        0 => C64::new(1.0, 0.0),
        1 => C64::new(0.0, 1.0),
        2 => C64::new(-1.0, 0.0),
        _ => C64::new(0.0, -1.0),
    };
    (0..total)
        .map(|l| {
            if l < start || l - start >= f.len() {
                Z
            } else {
                let arg = 2.0 * PI * ((m * l) % big_m) as f64 / big_m as f64;
                C64::from_polar(f[l - start], arg) * phase
            }
        })
        .collect()
}

/// `sum_l a[l] conj(b[l])`.
pub fn dot(a: &[C64], b: &[C64]) -> C64 {
    a.iter().zip(b).map(|(x, y)| x * y.conj()).sum()
}

/// Textbook O(n^2) linear convolution.
pub fn naive_conv(a: &[C64], b: &[C64]) -> Vec<C64> {
    let mut out = vec![Z; a.len() + b.len() - 1];
    for i in 0..a.len() {
        for j in 0..b.len() {
            out[i + j] += a[i] * b[j];
        }
    }
    out
}

pub fn real(v: &[f64]) -> Vec<C64> {
    v.iter().map(|&x| C64::new(x, 0.0)).collect()
}

pub fn max_diff(a: &[C64], b: &[C64]) -> f64 {
    assert_eq!(a.len(), b.len());
    a.iter().zip(b).map(|(x, y)| (x - y).norm()).fold(0.0, f64::max)
}

/// `A` and the unit noise covariance from formula-built basis functions.
pub fn oracle_model(plan: &PilotPlan, big_m: usize, kappa: usize) -> (DMatrix<C64>, DMatrix<C64>) {
    let proto = phydyas_formula(big_m, kappa);
    let k_users = plan.num_users();
    let taps = plan.taps();
    let total = kappa * big_m + taps;
    let rows: Vec<usize> = (0..k_users).flat_map(|k| plan.subcarriers(k).to_vec()).collect();
    let rx: Vec<Vec<C64>> = rows.iter().map(|&m| basis(&proto, big_m, m, 0, total)).collect();
    let mut a = DMatrix::zeros(rows.len(), k_users * taps);
    for k in 0..k_users {
        let mut x = vec![Z; total];
        for (&m, &p) in plan.subcarriers(k).iter().zip(plan.values(k)) {
            for (xv, b) in x.iter_mut().zip(basis(&proto, big_m, m, 0, total)) {
                *xv += b * p;
            }
        }
        for l in 0..taps {
            let mut shifted = vec![Z; total];
            shifted[l..].copy_from_slice(&x[..total - l]);
            for (r, f) in rx.iter().enumerate() {
                a[(r, k * taps + l)] = dot(&shifted, f);
            }
        }
    }
    let c = DMatrix::from_fn(rows.len(), rows.len(), |p, q| dot(&rx[q], &rx[p]));
    (a, c)
}

pub fn pilot_frame(plan: &PilotPlan, big_m: usize) -> SymbolFrame {
    let mut frame = SymbolFrame::zeros(plan.num_users(), big_m, 1 + plan.guard_slots());
    plan.write_pilots(&mut frame).unwrap();
    frame
}

/// Received pilot grid of one antenna.
pub fn pilot_grid(
    bank: &FilterBank,
    frame: &SymbolFrame,
    ch: &ChannelRealization,
    noise_var: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Vec<C64>> {
    let tx = bank.synthesize(frame).unwrap();
    let mut rx = apply_channel(&tx, ch).unwrap();
    for r in rx.iter_mut() {
        r.resize(bank.filter().signal_len(1), Z);
        if noise_var > 0.0 {
            for (v, e) in r.iter_mut().zip(complex_noise(rng, bank.filter().signal_len(1), noise_var)) {
                *v += e;
            }
        }
    }
    rx
}

pub fn estimate_all(model: &EstimationModel, bank: &FilterBank, rx: &[Vec<C64>]) -> ChannelRealization {
    let grid = bank.analyze_antennas(rx, 1).unwrap();
    model.estimate_grid(&grid).unwrap()
}

pub struct McOutcome {
    pub mse_total: f64,
    pub freq_var: f64,
}

pub fn monte_carlo(model: &EstimationModel, filter: &PrototypeFilter, noise_var: f64, trials: usize, seed: u64) -> McOutcome {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let plan = model.plan();
    let (big_m, k_users, taps) = (plan.num_subcarriers(), plan.num_users(), plan.taps());
    let bank = FilterBank::new(filter.clone());
    let frame = pilot_frame(plan, big_m);
    let pdp = exponential_pdp(taps, 0.15).unwrap();
    let (mut sq, mut freq) = (0.0, 0.0);
    for _ in 0..trials {
        let ch = draw_realization(&vec![pdp.clone(); k_users], None, 1, k_users, &mut rng).unwrap();
        let rx = pilot_grid(&bank, &frame, &ch, noise_var, &mut rng);
        let est = estimate_all(model, &bank, &rx);
        for k in 0..k_users {
            let err: Vec<C64> = est.taps(0, k).iter().zip(ch.taps(0, k)).map(|(e, h)| e - h).collect();
            sq += err.iter().map(|e| e.norm_sqr()).sum::<f64>();
            for m in 0..big_m {
                let dft: C64 = err
                    .iter()
                    .enumerate()
                    .map(|(l, e)| e * C64::from_polar(1.0, -2.0 * std::f64::consts::PI * (m * l) as f64 / big_m as f64))
                    .sum();
                freq += dft.norm_sqr();
            }
        }
    }
    McOutcome {
        mse_total: sq / trials as f64,
        freq_var: freq / (trials * k_users * big_m) as f64,
    }
}

