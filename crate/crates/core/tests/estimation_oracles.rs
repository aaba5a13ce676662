mod common;

use common::*;
use fbmc_mimo::channel::{draw_realization, exponential_pdp};
use fbmc_mimo::estimation::{assemble_model, build_pilot_plan, EstimationModel, DEFAULT_PILOT_SEED};
use fbmc_mimo::filterbank::{design_phydyas, FilterBank};
use fbmc_mimo::signal::complex_noise;
use nalgebra::DVector;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

#[test]
fn model_matches_literal_pulse_sums() {
    for (big_m, k_users, taps) in [(8, 1, 2), (16, 2, 3), (16, 4, 4)] {
        let f = design_phydyas(big_m, 4).unwrap();
        let plan = build_pilot_plan(k_users, taps, big_m, 3, DEFAULT_PILOT_SEED).unwrap();
        let model = assemble_model(&plan, &f, 1.0).unwrap();
        let (a, c) = oracle_model(&plan, big_m, 4);
        assert!((model.system() - &a).iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-12, "A for M={big_m}");
        assert!((model.unit_noise_covariance() - &c).iter().map(|v| v.norm()).fold(0.0, f64::max) < 1e-12, "C for M={big_m}");
    }
}

#[test]
fn mvu_matches_independent_gls_solve() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (big_m, k_users, taps) in [(8, 1, 2), (16, 2, 3)] {
        let f = design_phydyas(big_m, 4).unwrap();
        let plan = build_pilot_plan(k_users, taps, big_m, 3, DEFAULT_PILOT_SEED).unwrap();
        let sigma2 = 0.3;
        let model = assemble_model(&plan, &f, sigma2).unwrap();
        let (a, c) = oracle_model(&plan, big_m, 4);
        let c_inv = c.clone().lu().try_inverse().unwrap();
        let b = a.adjoint() * &c_inv * &a;
        let b_inv = b.lu().try_inverse().unwrap();
        let z = DVector::from_vec(complex_noise(&mut rng, a.nrows(), 1.0));
        let want = &b_inv * a.adjoint() * &c_inv * &z;
        let got = model.estimate(z.as_slice()).unwrap();
        for (g, w) in got.iter().zip(want.iter()) {
            assert!((g - w).norm() < 1e-10, "M={big_m}: {g} vs {w}");
        }
        let trace = sigma2 * b_inv.trace().re;
        assert!((model.mse_total() - trace).abs() < 1e-10 * trace.max(1.0));
    }
}

#[test]
fn noiseless_multiuser_recovery_is_exact() {
    let mut rng = ChaCha8Rng::seed_from_u64(32);
    let (big_m, k_users, taps, n) = (64, 4, 16, 3);
    let f = design_phydyas(big_m, 4).unwrap();
    let bank = FilterBank::new(f.clone());
    let plan = build_pilot_plan(k_users, taps, big_m, 3, DEFAULT_PILOT_SEED).unwrap();
    let model = assemble_model(&plan, &f, 0.0).unwrap();
    let pdp = exponential_pdp(taps, 0.2).unwrap();
    let ch = draw_realization(&vec![pdp; n * k_users], None, n, k_users, &mut rng).unwrap();
    let rx = pilot_grid(&bank, &pilot_frame(&plan, big_m), &ch, 0.0, &mut rng);
    let est = estimate_all(&model, &bank, &rx);
    for i in 0..n {
        for k in 0..k_users {
            for (e, h) in est.taps(i, k).iter().zip(ch.taps(i, k)) {
                assert!((e - h).norm() < 1e-9);
            }
        }
    }
}

#[test]
fn empirical_mse_matches_the_trace_formula() {
    let (big_m, k_users, taps) = (64, 4, 16);
    let f = design_phydyas(big_m, 4).unwrap();
    let plan = build_pilot_plan(k_users, taps, big_m, 3, DEFAULT_PILOT_SEED).unwrap();
    let noise_var = 0.1;
    let model = assemble_model(&plan, &f, noise_var).unwrap();
    let mc = monte_carlo(&model, &f, noise_var, 500, 33);
    let theory = model.mse_total();
    assert!((mc.mse_total / theory - 1.0).abs() < 0.1, "{} vs {theory}", mc.mse_total);
    let stats = model.error_stats();
    assert_eq!(stats.sigma_ef2 / stats.sigma_et2, taps as f64);
    assert!((mc.freq_var / stats.sigma_ef2 - 1.0).abs() < 0.15, "{} vs {}", mc.freq_var, stats.sigma_ef2);
}

#[test]
fn ignoring_intrinsic_interference_costs_accuracy() {
    let (big_m, k_users, taps) = (64, 4, 16);
    let f = design_phydyas(big_m, 4).unwrap();
    let plan = build_pilot_plan(k_users, taps, big_m, 3, DEFAULT_PILOT_SEED).unwrap();
    let noise_var = 0.01;
    let full = assemble_model(&plan, &f, noise_var).unwrap();
    let mut diag = full.system().clone();
    for r in 0..k_users {
        for c in 0..k_users {
            if r != c {
                diag.view_mut((r * taps, c * taps), (taps, taps)).fill(Z);
            }
        }
    }
    let blind = EstimationModel::from_parts(plan, diag, full.unit_noise_covariance().clone(), noise_var).unwrap();
    let good = monte_carlo(&full, &f, noise_var, 60, 34).mse_total;
    let bad = monte_carlo(&blind, &f, noise_var, 60, 34).mse_total;
    assert!(bad > 2.0 * good, "blind {bad} vs joint {good}");
}
