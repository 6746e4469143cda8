use std::f64::consts::PI;

use fcofdm::metrics::{
    check_mask, compute_mse, design_measurement_filter, edge_subcarriers, linear_chain_mse, measure_scr, ScrMode,
    ScrProbe, Side, DEFAULT_GUARD_HZ, MEAS_HALF_BAND_HZ, SCR_CAP_DB,
};
use fcofdm::ofdm::{cp_ofdm_modulate, Modulation, SymbolGrid};
use fcofdm::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rustfft::FftPlanner;

fn tone(f: f64, fs: f64, n: usize) -> Vec<Complex64> {
    (0..n).map(|k| Complex64::from_polar(1.0, 2.0 * PI * f * k as f64 / fs)).collect()
}

#[test]
fn mask_holds_on_dense_grid_at_all_rates() {
    for fs in [7.68e6, 30.72e6, 122.88e6] {
        let f = design_measurement_filter(fs).unwrap();
        let r = check_mask(&f, 10_000);
        assert!(r.min_stopband_atten_db >= 100.0, "{fs}: {r:?}");
        assert!(r.passband_ripple_db <= 0.1, "{fs}: {r:?}");
        assert!(r.dc_gain_db.abs() <= 0.01, "{fs}: {r:?}");
    }
}

#[test]
fn order_is_in_sane_range_at_30_72() {
    let f = design_measurement_filter(30.72e6).unwrap();
    assert!((350..=6000).contains(&f.order()), "{}", f.order());
}

#[test]
fn equivalent_response_matches_two_stage_product() {
    let f = design_measurement_filter(7.68e6).unwrap();
    for freq in [0.0, 50e3, 93e3, 150e3, 1.2e6, 3.0e6] {
        let w = 2.0 * PI * freq / f.fs_hz;
        let direct: Complex64 = f
            .coefficients
            .iter()
            .enumerate()
            .map(|(n, &c)| Complex64::from_polar(c, -w * n as f64))
            .sum();
        assert!((direct - f.response(freq)).norm() < 1e-9, "{freq}");
    }
}

#[test]
fn steady_state_tone_power_follows_filter_response() {
    let fs = 7.68e6;
    let f = design_measurement_filter(fs).unwrap();
    let n = 40_000;
    let mut probe = ScrProbe::new(f.clone(), n, ScrMode::SteadyState).unwrap();
    let centers = [0.0, 60e3, -120e3];
    probe.prepare(&centers);
    for ft in [10e3, 85e3, 300e3] {
        let p = probe.band_powers(&tone(ft, fs, n), &centers).unwrap();
        for (c, pv) in centers.iter().zip(p) {
            let expect = f.response(ft - c).norm_sqr();
            assert!((pv - expect).abs() <= 1e-9 + 1e-6 * expect, "tone {ft} center {c}: {pv} vs {expect}");
        }
    }
}

#[test]
fn steady_state_requires_length() {
    let f = design_measurement_filter(7.68e6).unwrap();
    assert!(ScrProbe::new(f.clone(), 10_000, ScrMode::SteadyState).is_err());
    assert!(ScrProbe::new(f, 10_000, ScrMode::Burst).is_ok());
}

/// Periodic noise confined to `band` by zeroing all other bins of a large FFT.
fn confined_noise(band: (f64, f64), fs: f64, n: usize, seed: u64) -> Vec<Complex64> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let mut spec: Vec<Complex64> = (0..n)
        .map(|k| {
            let f = if k < n / 2 { k as f64 } else { k as f64 - n as f64 } * fs / n as f64;
            if f >= band.0 && f <= band.1 {
                Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5)
            } else {
                Complex64::new(0.0, 0.0)
            }
        })
        .collect();
    FftPlanner::new().plan_fft_inverse(n).process(&mut spec);
    spec
}

#[test]
fn confined_noise_scr_is_at_filter_floor() {
    let fs = 7.68e6;
    let band = (-540e3, 540e3);
    let x = confined_noise(band, fs, 1 << 15, 3);
    let f = design_measurement_filter(fs).unwrap();
    for side in [Side::Left, Side::Right] {
        let scr = measure_scr(&x, &f, band, side, DEFAULT_GUARD_HZ, ScrMode::SteadyState).unwrap();
        assert!(scr <= -100.0, "{side:?}: {scr}");
    }
}

#[test]
fn tone_in_leakage_band_only_is_large_positive_and_capped() {
    let fs = 7.68e6;
    let band = (-540e3, 540e3);
    let f = design_measurement_filter(fs).unwrap();
    let x = tone(band.1 + DEFAULT_GUARD_HZ + MEAS_HALF_BAND_HZ, fs, 1 << 15);
    let scr = measure_scr(&x, &f, band, Side::Right, DEFAULT_GUARD_HZ, ScrMode::SteadyState).unwrap();
    assert!((100.0..=SCR_CAP_DB).contains(&scr), "{scr}");
    let zero = vec![Complex64::new(0.0, 0.0); 1 << 15];
    let z = measure_scr(&zero, &f, band, Side::Right, DEFAULT_GUARD_HZ, ScrMode::Burst).unwrap();
    assert!(z <= -300.0);
}

fn ofdm_burst(l_act: usize, n_ofdm: usize, n_symbols: usize, seed: u64) -> Vec<Complex64> {
    let grid = SymbolGrid::random(l_act, n_symbols, Modulation::Qpsk, seed);
    cp_ofdm_modulate(&grid, n_ofdm, n_ofdm * 9 / 128).unwrap()
}

#[test]
fn scr_is_scale_invariant() {
    let fs = 7.68e6;
    let x = ofdm_burst(24, 512, 100, 7);
    let band = (-12.5 * 15e3, 11.5 * 15e3);
    let f = design_measurement_filter(fs).unwrap();
    let mut probe = ScrProbe::new(f, x.len(), ScrMode::SteadyState).unwrap();
    let a = probe.scr(&x, band, Side::Right, DEFAULT_GUARD_HZ).unwrap();
    let y: Vec<Complex64> = x.iter().map(|v| v * 1e3).collect();
    let b = probe.scr(&y, band, Side::Right, DEFAULT_GUARD_HZ).unwrap();
    assert!((a - b).abs() < 1e-9, "{a} {b}");
}

#[test]
fn symmetric_allocation_sides_agree() {
    let fs = 7.68e6;
    let x = ofdm_burst(24, 512, 120, 11);
    let band = (-12.5 * 15e3, 11.5 * 15e3);
    let f = design_measurement_filter(fs).unwrap();
    let mut probe = ScrProbe::new(f, x.len(), ScrMode::SteadyState).unwrap();
    let (lc, li) = fcofdm::metrics::scr_centers(band, Side::Left, DEFAULT_GUARD_HZ);
    let (rc, ri) = fcofdm::metrics::scr_centers(band, Side::Right, DEFAULT_GUARD_HZ);
    probe.prepare(&[lc, li, rc, ri]);
    let (l, r) = probe.scr_both(&x, band, DEFAULT_GUARD_HZ).unwrap();
    assert!((l - r).abs() < 0.5, "{l} {r}");
    assert!(l < -10.0, "{l}");
}

#[test]
fn impulse_oracle_matches_constructed_chain() {
    let (l_act, b) = (24, 3);
    let chain = |g: &SymbolGrid| -> fcofdm::Result<SymbolGrid> {
        let mut out = g.clone();
        for s in 0..g.n_symbols {
            for l in 0..g.l_act - 1 {
                out.set(l, s, g.get(l, s) + 0.1 * g.get(l + 1, s));
            }
        }
        Ok(out)
    };
    let oracle = linear_chain_mse(l_act, b, chain).unwrap();
    let tx = SymbolGrid::random(l_act, b, Modulation::Qpsk, 5);
    let rep = compute_mse(&tx, &chain(&tx).unwrap()).unwrap();
    for l in 0..l_act {
        assert!((oracle[l] - rep.per_subcarrier[l]).abs() < 1e-12, "{l}");
    }
    assert!((oracle[0] - 0.01).abs() < 1e-12);
    assert_eq!(oracle[l_act - 1], 0.0);
}

#[test]
fn impulse_oracle_agrees_with_monte_carlo_on_mixing_chain() {
    let (l_act, b) = (12, 4);
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    let taps: Vec<Complex64> = (0..3).map(|_| Complex64::new(rng.gen::<f64>() * 0.2, rng.gen::<f64>() * 0.2)).collect();
    let chain = |g: &SymbolGrid| -> fcofdm::Result<SymbolGrid> {
        let mut out = g.clone();
        for s in 0..g.n_symbols {
            for l in 0..g.l_act {
                let mut v = g.get(l, s);
                v += taps[0] * g.get((l + 1) % g.l_act, s);
                v += taps[1] * g.get((l + g.l_act - 1) % g.l_act, s);
                if s > 0 {
                    v += taps[2] * g.get(l, s - 1);
                }
                out.set(l, s, v);
            }
        }
        Ok(out)
    };
    let oracle = linear_chain_mse(l_act, b, chain).unwrap();
    let trials = 3000;
    let mut mc = vec![0.0; l_act];
    for t in 0..trials {
        let tx = SymbolGrid::random(l_act, b, Modulation::Qam16, 100 + t);
        let rep = compute_mse(&tx, &chain(&tx).unwrap()).unwrap();
        for (a, v) in mc.iter_mut().zip(rep.per_subcarrier) {
            *a += v / trials as f64;
        }
    }
    for l in 0..l_act {
        assert!((mc[l] / oracle[l] - 1.0).abs() < 0.05, "{l}: {} vs {}", mc[l], oracle[l]);
    }
}

proptest! {
    #[test]
    fn mse_aggregates_are_consistent(l_act in 1usize..60, b in 1usize..6, seed in 0u64..1000, noise in 0.0f64..1.0) {
        let tx = SymbolGrid::random(l_act, b, Modulation::Qpsk, seed);
        let mut rx = tx.clone();
        let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0xabc);
        for v in rx.data.iter_mut() {
            *v += Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5) * noise;
        }
        let r = compute_mse(&tx, &rx).unwrap();
        let lo = r.per_subcarrier.iter().cloned().fold(f64::MAX, f64::min);
        let hi = r.per_subcarrier.iter().cloned().fold(0.0, f64::max);
        prop_assert!(lo <= r.avg * (1.0 + 1e-12) && r.avg <= hi * (1.0 + 1e-12));
        prop_assert!(r.max <= hi * (1.0 + 1e-12));
        prop_assert!(r.max_db() >= r.avg_db() - 60.0);
        for (e, m) in r.evm_pct().iter().zip(&r.per_subcarrier) {
            prop_assert_eq!(*e, 100.0 * m.sqrt());
        }
        let edges = edge_subcarriers(l_act);
        prop_assert_eq!(edges.len(), if l_act >= 24 { 24 } else { l_act });
    }
}
