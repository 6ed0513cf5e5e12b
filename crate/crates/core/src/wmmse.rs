//! Effective channels, covariances, MMSE receivers, weights and rates.
//!
//! Rates are in nats inside this module. The BBU permutation of the paper's
//! block structure is never formed: eRRH `i` simply reads block `[s][i]`.

use crate::error::{Error, Result};
use crate::linalg::{cholesky, hermitian_inverse, hermitian_logdet, hermitize, identity, trace_re};
use crate::scalar::{creal, CMat, Real};
use crate::scenario::{HybridPrecoder, Scenario};

/// Which covariance model to evaluate: SFIT adds propagated quantization noise.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Mode {
    Hfit,
    Sfit,
}

/// Cached per-user quantities for one precoder.
#[derive(Debug, Clone)]
pub struct Link<T: Real> {
    /// `H_{k,i} F_i`, indexed `[k][i]`.
    pub hf: Vec<Vec<CMat<T>>>,
    /// H̄_{k,s}, indexed `[k][s]` over all streams.
    pub hbar: Vec<Vec<CMat<T>>>,
    /// Λ_k; identical for every stream of user `k`.
    pub lambda: Vec<CMat<T>>,
    pub noise_var: T,
}

impl<T: Real> Link<T> {
    /// Builds from explicit analog matrices, combined digital blocks `[s][i]`
    /// and optional quantization covariances. Analog matrices need not be
    /// unit modulus.
    pub fn new(scenario: &Scenario<T>, analog: &[CMat<T>], ubar: &[Vec<CMat<T>>], quant: Option<&[CMat<T>]>) -> Self {
        let ch = &scenario.channel;
        let nr = ch.rx_antennas();
        let hf: Vec<Vec<CMat<T>>> =
            (0..ch.users).map(|k| (0..ch.errhs).map(|i| ch.block(k, i) * &analog[i]).collect()).collect();
        let mut hbar = Vec::with_capacity(ch.users);
        let mut lambda = Vec::with_capacity(ch.users);
        for k in 0..ch.users {
            let row: Vec<CMat<T>> = ubar
                .iter()
                .map(|blocks| {
                    let mut acc = CMat::zeros(nr, scenario.stream_dim);
                    for i in 0..ch.errhs {
                        acc += &hf[k][i] * &blocks[i];
                    }
                    acc
                })
                .collect();
            let mut lam = identity::<T>(nr) * creal(scenario.noise_var);
            for hb in &row {
                lam += hb * hb.adjoint();
            }
            if let Some(q) = quant {
                for i in 0..ch.errhs {
                    lam += &hf[k][i] * &q[i] * hf[k][i].adjoint();
                }
            }
            hbar.push(row);
            lambda.push(hermitize(&lam));
        }
        Self { hf, hbar, lambda, noise_var: scenario.noise_var }
    }

    pub fn from_precoder(scenario: &Scenario<T>, precoder: &HybridPrecoder<T>, mode: Mode) -> Result<Self> {
        let quant = match mode {
            Mode::Hfit => None,
            Mode::Sfit => Some(
                precoder
                    .quant_cov
                    .as_deref()
                    .ok_or_else(|| Error::InvalidState("SFIT evaluation needs quantization covariances".into()))?,
            ),
        };
        Ok(Self::new(scenario, &precoder.analog.matrices(), &precoder.combined_all(scenario), quant))
    }

    /// Π_{k,s} = Λ_k − H̄_{k,s} H̄_{k,s}^H.
    pub fn interference(&self, k: usize, s: usize) -> CMat<T> {
        let hb = &self.hbar[k][s];
        hermitize(&(&self.lambda[k] - hb * hb.adjoint()))
    }

    /// `log det(I + H̄^H Π⁻¹ H̄)`.
    pub fn rate(&self, k: usize, s: usize) -> Result<T> {
        let hb = &self.hbar[k][s];
        let chol = cholesky(&self.interference(k, s))?;
        let x = chol.solve(hb);
        let m = identity::<T>(hb.ncols()) + hb.adjoint() * x;
        hermitian_logdet(&m)
    }

    /// Ξ = Λ⁻¹ H̄.
    pub fn receiver(&self, k: usize, s: usize) -> Result<CMat<T>> {
        Ok(cholesky(&self.lambda[k])?.solve(&self.hbar[k][s]))
    }

    /// Like [`receiver`](Self::receiver), retrying with a `1e-10 σ²` diagonal
    /// load if Λ is numerically singular. Returns whether the load was used.
    pub fn receiver_guarded(&self, k: usize, s: usize) -> Result<(CMat<T>, bool)> {
        match self.receiver(k, s) {
            Ok(xi) => Ok((xi, false)),
            Err(_) => {
                let n = self.lambda[k].nrows();
                let loaded = &self.lambda[k] + identity::<T>(n) * creal(T::lit(1e-10) * self.noise_var);
                Ok((cholesky(&loaded)?.solve(&self.hbar[k][s]), true))
            }
        }
    }

    /// E = I − H̄^H Ξ − Ξ^H H̄ + Ξ^H Λ Ξ.
    pub fn mse(&self, k: usize, s: usize, xi: &CMat<T>) -> CMat<T> {
        let hb = &self.hbar[k][s];
        let d = hb.ncols();
        let hx = hb.adjoint() * xi;
        let e = identity::<T>(d) - &hx - hx.adjoint() + xi.adjoint() * &self.lambda[k] * xi;
        hermitize(&e)
    }
}

/// Receivers Ξ_{k,l} and weights Υ_{k,l}, indexed `[k][position in user_streams[k]]`.
#[derive(Debug, Clone)]
pub struct WmmseState<T: Real> {
    pub receivers: Vec<Vec<CMat<T>>>,
    pub weights: Vec<Vec<CMat<T>>>,
    /// Whether any diagonal load was needed.
    pub jittered: bool,
}

impl<T: Real> WmmseState<T> {
    /// MMSE receivers and optimal weights `Υ = (E^MMSE)⁻¹` for the given link.
    pub fn refresh(scenario: &Scenario<T>, link: &Link<T>) -> Result<Self> {
        let mut receivers = Vec::new();
        let mut weights = Vec::new();
        let mut jittered = false;
        for (k, streams) in scenario.user_streams.iter().enumerate() {
            let mut rx = Vec::new();
            let mut w = Vec::new();
            for &s in streams {
                let (xi, j) = link.receiver_guarded(k, s)?;
                jittered |= j;
                let e = link.mse(k, s, &xi);
                let ups = match hermitian_inverse(&e) {
                    Ok(u) => u,
                    Err(_) => {
                        jittered = true;
                        hermitian_inverse(&(&e + identity::<T>(e.nrows()) * creal(T::lit(1e-12))))?
                    }
                };
                rx.push(xi);
                w.push(hermitize(&ups));
            }
            receivers.push(rx);
            weights.push(w);
        }
        Ok(Self { receivers, weights, jittered })
    }
}

pub fn effective_channel<T: Real>(scenario: &Scenario<T>, precoder: &HybridPrecoder<T>, s: usize, k: usize) -> CMat<T> {
    let ch = &scenario.channel;
    let mut acc = CMat::zeros(ch.rx_antennas(), scenario.stream_dim);
    for i in 0..ch.errhs {
        acc += ch.block(k, i) * precoder.analog.matrix(i) * precoder.combined(scenario, s, i);
    }
    acc
}

pub fn interference_covariance<T: Real>(
    scenario: &Scenario<T>,
    precoder: &HybridPrecoder<T>,
    k: usize,
    s: usize,
    mode: Mode,
) -> Result<CMat<T>> {
    Ok(Link::from_precoder(scenario, precoder, mode)?.interference(k, s))
}

/// Achievable rate of stream `s` at user `k`, in nats/symbol.
pub fn achievable_rate<T: Real>(
    scenario: &Scenario<T>,
    precoder: &HybridPrecoder<T>,
    k: usize,
    s: usize,
    mode: Mode,
) -> Result<T> {
    Link::from_precoder(scenario, precoder, mode)?.rate(k, s)
}

pub fn mmse_receiver<T: Real>(
    scenario: &Scenario<T>,
    precoder: &HybridPrecoder<T>,
    k: usize,
    s: usize,
    mode: Mode,
) -> Result<CMat<T>> {
    Link::from_precoder(scenario, precoder, mode)?.receiver(k, s)
}

pub fn mse_matrix<T: Real>(
    scenario: &Scenario<T>,
    precoder: &HybridPrecoder<T>,
    receiver: &CMat<T>,
    k: usize,
    s: usize,
    mode: Mode,
) -> Result<CMat<T>> {
    Ok(Link::from_precoder(scenario, precoder, mode)?.mse(k, s, receiver))
}

/// Υ = (E^MMSE)⁻¹.
pub fn weight_update<T: Real>(e_mmse: &CMat<T>) -> Result<CMat<T>> {
    Ok(hermitize(&hermitian_inverse(e_mmse)?))
}

/// q̃ = log det Υ − tr(Υ E) + d, in nats.
pub fn surrogate_rate<T: Real>(weights: &CMat<T>, mse: &CMat<T>) -> Result<T> {
    let d = T::from_usize(weights.nrows()).expect("dimension");
    Ok(hermitian_logdet(weights)? - trace_re(&(weights * mse)) + d)
}

/// p_i = Σ_s ‖F_i Ū_{s,i}‖², plus tr(F_i Ω_i F_i^H) in SFIT mode.
pub fn transmit_power<T: Real>(scenario: &Scenario<T>, precoder: &HybridPrecoder<T>, i: usize, mode: Mode) -> Result<T> {
    let f = precoder.analog.matrix(i);
    let mut p = T::zero();
    for s in 0..scenario.streams.len() {
        p += (&f * precoder.combined(scenario, s, i)).norm_squared();
    }
    if mode == Mode::Sfit {
        let q = precoder
            .quant_cov
            .as_ref()
            .ok_or_else(|| Error::InvalidState("SFIT power needs quantization covariances".into()))?;
        p += trace_re(&(&f * &q[i] * f.adjoint()));
    }
    Ok(p)
}

/// Bits to nats.
pub fn bits_to_nats<T: Real>(bits: T) -> T {
    bits * T::LN_2()
}

pub fn nats_to_bits<T: Real>(nats: T) -> T {
    nats / T::LN_2()
}
