use cemm_precoder::hfit::{build_analog_linearization, power_linearization, DeltaLayout};
use cemm_precoder::scalar::RMat;
use cemm_precoder::wmmse::{Mode, WmmseState};
use cemm_precoder::{Link, Matrix, Precoder, PrecoderMode, Scenario, Strategy};
use num_complex::Complex64;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::*;

/// Block-diagonal F_RF and the stacked Ū_s, built explicitly.
pub fn super_matrices(scn: &Scenario, pre: &Precoder, s: usize) -> (Matrix, Matrix) {
    let (kr, nt, n, d) = (scn.errhs(), scn.tx_antennas, scn.rf_chains, scn.stream_dim);
    let mut f = Matrix::zeros(kr * nt, kr * n);
    let mut u = Matrix::zeros(kr * n, d);
    for i in 0..kr {
        f.view_mut((i * nt, i * n), (nt, n)).copy_from(&pre.analog.matrix(i));
        u.view_mut((i * n, 0), (n, d)).copy_from(&pre.combined(scn, s, i));
    }
    (f, u)
}

pub fn omega_super(scn: &Scenario, pre: &Precoder) -> Matrix {
    let (kr, n) = (scn.errhs(), scn.rf_chains);
    let mut o = Matrix::zeros(kr * n, kr * n);
    for i in 0..kr {
        o.view_mut((i * n, i * n), (n, n)).copy_from(&pre.quant_cov.as_ref().unwrap()[i]);
    }
    o
}

pub fn oracle_hbar(scn: &Scenario, pre: &Precoder, k: usize, s: usize) -> Matrix {
    let (f, u) = super_matrices(scn, pre, s);
    scn.channel.stacked(k) * f * u
}

/// Λ_k from the super-matrix expressions.
pub fn oracle_lambda(scn: &Scenario, pre: &Precoder, k: usize, mode: Mode) -> Matrix {
    let nr = scn.channel.rx_antennas();
    let mut lam = Matrix::identity(nr, nr) * c(scn.noise_var);
    for s in 0..scn.streams.len() {
        let hb = oracle_hbar(scn, pre, k, s);
        lam += &hb * hb.adjoint();
    }
    if mode == Mode::Sfit {
        let (f, _) = super_matrices(scn, pre, 0);
        let hf = scn.channel.stacked(k) * f;
        lam += &hf * omega_super(scn, pre) * hf.adjoint();
    }
    lam
}

/// E^MMSE = I − H̄ᴴ Λ⁻¹ H̄, the MSE expression at Ξ = Λ⁻¹ H̄.
pub fn oracle_mmse(scn: &Scenario, pre: &Precoder, k: usize, s: usize, mode: Mode) -> Matrix {
    let hb = oracle_hbar(scn, pre, k, s);
    let lam = oracle_lambda(scn, pre, k, mode);
    let xi = inverse(&lam) * &hb;
    let d = hb.ncols();
    Matrix::identity(d, d) - hb.adjoint() * &xi - xi.adjoint() * &hb + xi.adjoint() * &lam * &xi
}

pub fn instances(n: u64) -> impl Iterator<Item = (Scenario, Precoder, Mode)> {
    let cfg = small_config();
    (0..n).map(move |seed| {
        let strategy = if seed % 2 == 0 { Strategy::Hfit } else { Strategy::Sfit };
        let mode = if seed % 2 == 0 { Mode::Hfit } else { Mode::Sfit };
        let scn = scenario(&cfg, seed, strategy, PrecoderMode::Hybrid);
        let pre = random_precoder(&mut ChaCha8Rng::seed_from_u64(1000 + seed), &scn);
        (scn, pre, mode)
    })
}


/// F + Δ∘(jF), entry by entry.
pub fn hadamard_step(f: &Matrix, delta: &RMat<f64>) -> Matrix {
    Matrix::from_fn(f.nrows(), f.ncols(), |m, n| f[(m, n)] + Complex64::new(0.0, delta[(m, n)]) * f[(m, n)])
}

/// tr(Υ E_{k,s}) for arbitrary analog matrices, from the covariance expressions.
#[allow(clippy::too_many_arguments)]
pub fn direct_weighted_mse(
    scn: &Scenario,
    analog: &[Matrix],
    ubar: &[Vec<Matrix>],
    omega: Option<&[Matrix]>,
    xi: &Matrix,
    weight: &Matrix,
    k: usize,
    s: usize,
) -> f64 {
    let ch = &scn.channel;
    let nr = ch.rx_antennas();
    let hbar: Vec<Matrix> = ubar
        .iter()
        .map(|blocks| {
            (0..scn.errhs()).fold(Matrix::zeros(nr, scn.stream_dim), |acc, i| acc + ch.block(k, i) * &analog[i] * &blocks[i])
        })
        .collect();
    let mut lam = Matrix::identity(nr, nr) * c(scn.noise_var);
    for hb in &hbar {
        lam += hb * hb.adjoint();
    }
    if let Some(q) = omega {
        for i in 0..scn.errhs() {
            let hf = ch.block(k, i) * &analog[i];
            lam += &hf * &q[i] * hf.adjoint();
        }
    }
    let d = scn.stream_dim;
    let hb = &hbar[s];
    let e = Matrix::identity(d, d) - hb.adjoint() * xi - xi.adjoint() * hb + xi.adjoint() * lam * xi;
    trace(&(weight * e))
}

/// Σ_s ‖A Ū_s‖² + tr(A Ω Aᴴ).
pub fn direct_power(analog_i: &Matrix, blocks: &[Matrix], omega_i: Option<&Matrix>) -> f64 {
    let signal: f64 = blocks.iter().map(|u| (analog_i * u).norm_squared()).sum();
    signal + omega_i.map_or(0.0, |q| trace(&(analog_i * q * analog_i.adjoint())))
}

/// Largest relative mismatch between the vectorized analog linearization
/// (tr(ΥE) and p̂_i) and the Hadamard-form evaluation at increment `x`.
/// Receivers and weights are the MMSE refresh of the current point.
pub fn linearization_error(scn: &Scenario, pre: &Precoder, mode: Mode, x: &[f64]) -> f64 {
    let layout = DeltaLayout { offset: 0, antennas: scn.tx_antennas, rf_chains: scn.rf_chains, errhs: scn.errhs() };
    let analog = pre.analog.matrices();
    let stepped: Vec<Matrix> = (0..scn.errhs()).map(|i| hadamard_step(&analog[i], &layout.matrix(x, i))).collect();
    let ubar = pre.combined_all(scn);
    let omega: Option<Vec<Matrix>> = match mode {
        Mode::Sfit => pre.quant_cov.clone(),
        Mode::Hfit => None,
    };
    let factors: Option<Vec<Matrix>> =
        omega.as_ref().map(|q| q.iter().map(|m| m.clone().cholesky().expect("Ω ≻ 0").l()).collect());
    let link = Link::from_precoder(scn, pre, mode).unwrap();
    let state = WmmseState::refresh(scn, &link).unwrap();
    let rel = |a: f64, b: f64| (a - b).abs() / (1.0 + b.abs());
    let mut worst = 0.0f64;
    for (k, streams) in scn.user_streams.iter().enumerate() {
        for (pos, &s) in streams.iter().enumerate() {
            let (xi, w) = (&state.receivers[k][pos], &state.weights[k][pos]);
            let lin = build_analog_linearization(scn, &analog, &ubar, factors.as_deref(), xi, w, k, s, &layout).unwrap();
            let direct = direct_weighted_mse(scn, &stepped, &ubar, omega.as_deref(), xi, w, k, s);
            worst = worst.max(rel(lin.trace_weighted_mse(x), direct));
        }
    }
    for i in 0..scn.errhs() {
        let blocks: Vec<Matrix> = ubar.iter().map(|row| row[i].clone()).collect();
        let mut refs: Vec<&Matrix> = blocks.iter().collect();
        if let Some(f) = &factors {
            refs.push(&f[i]);
        }
        let entries = power_linearization(&analog[i], &refs, &layout, i);
        let lin: f64 = entries.iter().map(|e| e.eval(x).norm_sqr()).sum();
        let direct = direct_power(&stepped[i], &blocks, omega.as_ref().map(|q| &q[i]));
        worst = worst.max(rel(lin, direct));
    }
    worst
}
