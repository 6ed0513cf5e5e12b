mod common;

use cemm_precoder::hfit::{build_analog_linearization, DeltaLayout};
use cemm_precoder::wmmse::Mode;
use cemm_precoder::{Link, Matrix};
use common::oracle::*;
use common::*;
use num_complex::Complex64;
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn increments(rng: &mut ChaCha8Rng, n: usize, radius: f64) -> Vec<f64> {
    (0..n).map(|_| rng.gen_range(-radius..=radius)).collect()
}

fn delta_len(scn: &cemm_precoder::Scenario) -> usize {
    scn.errhs() * scn.tx_antennas * scn.rf_chains
}

#[test]
fn zero_increment_is_exact() {
    for (scn, pre, mode) in instances(20) {
        let x = vec![0.0; delta_len(&scn)];
        let err = linearization_error(&scn, &pre, mode, &x);
        assert!(err < 1e-10, "relative error {err}");
    }
}

#[test]
fn zero_increment_reproduces_exact_power_and_weighted_mse() {
    for (scn, pre, mode) in instances(10) {
        let link = Link::from_precoder(&scn, &pre, mode).unwrap();
        let state = cemm_precoder::wmmse::WmmseState::refresh(&scn, &link).unwrap();
        let layout = DeltaLayout { offset: 0, antennas: scn.tx_antennas, rf_chains: scn.rf_chains, errhs: scn.errhs() };
        let factors: Option<Vec<Matrix>> = match mode {
            Mode::Sfit => Some(pre.quant_cov.as_ref().unwrap().iter().map(|m| m.clone().cholesky().unwrap().l()).collect()),
            Mode::Hfit => None,
        };
        let x = vec![0.0; layout.len()];
        for (k, streams) in scn.user_streams.iter().enumerate() {
            for (pos, &s) in streams.iter().enumerate() {
                let (xi, w) = (&state.receivers[k][pos], &state.weights[k][pos]);
                let lin = build_analog_linearization(
                    &scn,
                    &pre.analog.matrices(),
                    &pre.combined_all(&scn),
                    factors.as_deref(),
                    xi,
                    w,
                    k,
                    s,
                    &layout,
                )
                .unwrap();
                let exact = trace(&(w * link.mse(k, s, xi)));
                assert!((lin.trace_weighted_mse(&x) - exact).abs() < 1e-10 * (1.0 + exact));
                let d = scn.stream_dim as f64;
                assert!((lin.weight_term - logdet(w) - d).abs() < 1e-10);
            }
        }
    }
}

#[test]
fn random_increments_match_hadamard_form() {
    let mut rng = ChaCha8Rng::seed_from_u64(31);
    for (scn, pre, mode) in instances(30) {
        for radius in [0.1, 0.01, 1e-4] {
            let x = increments(&mut rng, delta_len(&scn), radius);
            let err = linearization_error(&scn, &pre, mode, &x);
            assert!(err < 1e-10, "relative error {err} at radius {radius}");
        }
    }
}

#[test]
fn fully_digital_layout_matches_too() {
    let cfg = small_config();
    let mut rng = ChaCha8Rng::seed_from_u64(5);
    for (seed, strategy, mode) in
        [(0, cemm_precoder::Strategy::Hfit, Mode::Hfit), (1, cemm_precoder::Strategy::Sfit, Mode::Sfit)]
    {
        let scn = scenario(&cfg, seed, strategy, cemm_precoder::PrecoderMode::FullyDigital);
        let pre = random_precoder(&mut rng, &scn);
        let x = increments(&mut rng, delta_len(&scn), 0.1);
        assert!(linearization_error(&scn, &pre, mode, &x) < 1e-10);
    }
}

#[test]
fn zero_quantization_noise_matches_hfit_linearization() {
    let mut rng = ChaCha8Rng::seed_from_u64(9);
    for (scn, pre, mode) in instances(10) {
        if mode != Mode::Sfit {
            continue;
        }
        let layout = DeltaLayout { offset: 0, antennas: scn.tx_antennas, rf_chains: scn.rf_chains, errhs: scn.errhs() };
        let zeros = vec![Matrix::zeros(scn.rf_chains, scn.rf_chains); scn.errhs()];
        let analog = pre.analog.matrices();
        let ubar = pre.combined_all(&scn);
        let x = increments(&mut rng, layout.len(), 0.1);
        for k in 0..scn.users() {
            for &s in &scn.user_streams[k] {
                let xi = gauss(&mut rng, scn.channel.rx_antennas(), scn.stream_dim);
                let w = random_pd(&mut rng, scn.stream_dim);
                let with = build_analog_linearization(&scn, &analog, &ubar, Some(&zeros), &xi, &w, k, s, &layout).unwrap();
                let without = build_analog_linearization(&scn, &analog, &ubar, None, &xi, &w, k, s, &layout).unwrap();
                let (a, b) = (with.trace_weighted_mse(&x), without.trace_weighted_mse(&x));
                assert!((a - b).abs() < 1e-10 * (1.0 + b.abs()));
            }
        }
    }
}

#[test]
fn arbitrary_receivers_and_weights_match_direct_evaluation() {
    let mut rng = ChaCha8Rng::seed_from_u64(12);
    for (scn, pre, mode) in instances(10) {
        let layout = DeltaLayout { offset: 0, antennas: scn.tx_antennas, rf_chains: scn.rf_chains, errhs: scn.errhs() };
        let analog = pre.analog.matrices();
        let ubar = pre.combined_all(&scn);
        let omega = if mode == Mode::Sfit { pre.quant_cov.clone() } else { None };
        let factors: Option<Vec<Matrix>> = omega.as_ref().map(|q| q.iter().map(|m| m.clone().cholesky().unwrap().l()).collect());
        let x = increments(&mut rng, layout.len(), 0.1);
        let stepped: Vec<Matrix> = (0..scn.errhs()).map(|i| hadamard_step(&analog[i], &layout.matrix(&x, i))).collect();
        for k in 0..scn.users() {
            for &s in &scn.user_streams[k] {
                let xi = gauss(&mut rng, scn.channel.rx_antennas(), scn.stream_dim);
                let w = random_pd(&mut rng, scn.stream_dim);
                let lin = build_analog_linearization(&scn, &analog, &ubar, factors.as_deref(), &xi, &w, k, s, &layout).unwrap();
                let direct = direct_weighted_mse(&scn, &stepped, &ubar, omega.as_deref(), &xi, &w, k, s);
                assert!((lin.trace_weighted_mse(&x) - direct).abs() < 1e-10 * (1.0 + direct.abs()));
            }
        }
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(256))]

    #[test]
    fn taylor_remainder_is_quadratic(delta in -0.1f64..0.1, phase in 0.0f64..std::f64::consts::TAU) {
        let f = Complex64::from_polar(1.0, phase);
        let exact = f * Complex64::from_polar(1.0, delta);
        let linear = f + Complex64::new(0.0, delta) * f;
        prop_assert!((exact - linear).norm() <= delta * delta / 2.0 + 1e-16);
    }
}
