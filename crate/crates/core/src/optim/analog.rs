//! Analog stage: phase increments δ inside a trust region, with tr(ΥE) and
//! the transmit power linearized through F(δ) = F + Δ∘(jF).

use std::time::Instant;

use num_complex::Complex64;

use super::digital::push_complex;
use super::{mode_of, Certified, Optimizer};
use crate::conic::{ComplexExpr, ConicProblem, LinExpr, SolveStatus, VarBlock};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_factor, frob2, hermitian_logdet, is_zero, psd_factor};
use crate::scalar::{CMat, RMat};
use crate::scenario::{AnalogPrecoder, Scenario, Strategy};
use crate::trace::{SolveTrace, Stage};
use crate::wmmse::{transmit_power, Link, WmmseState};

const LN2: f64 = std::f64::consts::LN_2;
const J: Complex64 = Complex64::new(0.0, 1.0);

/// Index map of the phase increments δ_{i,m,n}, column-major per eRRH.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct DeltaLayout {
    pub offset: usize,
    pub antennas: usize,
    pub rf_chains: usize,
    pub errhs: usize,
}

impl DeltaLayout {
    pub fn len(&self) -> usize {
        self.errhs * self.antennas * self.rf_chains
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    pub fn at(&self, i: usize, m: usize, n: usize) -> usize {
        self.offset + (i * self.rf_chains + n) * self.antennas + m
    }

    /// Δ_i as an `N_t x N_eRF` matrix read from `x`.
    pub fn matrix(&self, x: &[f64], i: usize) -> RMat<f64> {
        RMat::from_fn(self.antennas, self.rf_chains, |m, n| x[self.at(i, m, n)])
    }
}

/// Adds the entries of `C F(δ) Y` (or `F(δ) Y` when `c` is `None`) for eRRH `i`.
fn linearized_product(
    out: &mut [ComplexExpr],
    c: Option<&CMat<f64>>,
    f: &CMat<f64>,
    y: &CMat<f64>,
    layout: &DeltaLayout,
    i: usize,
    sign: f64,
) {
    let cf = match c {
        Some(c) => c * f,
        None => f.clone(),
    };
    let base = &cf * y;
    let rows = base.nrows();
    let cols = y.ncols();
    for a in 0..rows {
        for b in 0..cols {
            let e = &mut out[a * cols + b];
            e.add_constant(base[(a, b)] * sign);
            for n in 0..f.ncols() {
                let ynb = y[(n, b)];
                if ynb == Complex64::new(0.0, 0.0) {
                    continue;
                }
                match c {
                    Some(c) => {
                        for m in 0..f.nrows() {
                            let coef = J * c[(a, m)] * f[(m, n)] * ynb * sign;
                            e.add_scaled_real(coef, layout.at(i, m, n));
                        }
                    }
                    None => {
                        let coef = J * f[(a, n)] * ynb * sign;
                        e.add_scaled_real(coef, layout.at(i, a, n));
                    }
                }
            }
        }
    }
}

/// tr(Υ E) for one (user, stream) pair as `Σ |residual(δ)|² + noise_term`.
#[derive(Debug, Clone)]
pub struct AnalogLinearization {
    pub residual: Vec<ComplexExpr>,
    /// σ² ‖Ξ Ῡ‖², independent of δ.
    pub noise_term: f64,
    /// log det Υ + d.
    pub weight_term: f64,
}

impl AnalogLinearization {
    pub fn trace_weighted_mse(&self, x: &[f64]) -> f64 {
        self.residual.iter().map(|e| e.eval(x).norm_sqr()).sum::<f64>() + self.noise_term
    }
}

/// Linearizes tr(Υ_{k,s} E_{k,s}) around the analog matrices `analog`.
///
/// `ubar` holds the combined digital blocks `[s][i]`; `omega_factors` the
/// factors Ω̃_i (SFIT) whose propagated noise enters E.
#[allow(clippy::too_many_arguments)]
pub fn build_analog_linearization(
    scenario: &Scenario<f64>,
    analog: &[CMat<f64>],
    ubar: &[Vec<CMat<f64>>],
    omega_factors: Option<&[CMat<f64>]>,
    receiver: &CMat<f64>,
    weight: &CMat<f64>,
    k: usize,
    s: usize,
    layout: &DeltaLayout,
) -> Result<AnalogLinearization> {
    let (ns, kr, d) = (scenario.streams.len(), scenario.errhs(), scenario.stream_dim);
    let ul = cholesky_factor(weight)?;
    let ulh = ul.adjoint();
    let c: Vec<CMat<f64>> =
        (0..kr).map(|i| &ulh * receiver.adjoint() * scenario.channel.block(k, i)).collect();
    let mut residual = Vec::new();
    for s2 in 0..ns {
        let mut entries = vec![ComplexExpr::default(); d * d];
        if s2 == s {
            for a in 0..d {
                for b in 0..d {
                    entries[a * d + b].add_constant(ulh[(a, b)]);
                }
            }
        }
        for i in 0..kr {
            linearized_product(&mut entries, Some(&c[i]), &analog[i], &ubar[s2][i], layout, i, -1.0);
        }
        residual.extend(entries);
    }
    if let Some(q) = omega_factors {
        for i in 0..kr {
            let mut entries = vec![ComplexExpr::default(); d * q[i].ncols()];
            linearized_product(&mut entries, Some(&c[i]), &analog[i], &q[i], layout, i, 1.0);
            residual.extend(entries);
        }
    }
    Ok(AnalogLinearization {
        residual,
        noise_term: scenario.noise_var * frob2(&(receiver * &ul)),
        weight_term: hermitian_logdet(weight)? + d as f64,
    })
}

/// Entries of F_i(δ)·[Ū_{·,i}, Ω̃_i]; their squared norms sum to p̂_i(δ).
pub fn power_linearization(
    analog_i: &CMat<f64>,
    blocks: &[&CMat<f64>],
    layout: &DeltaLayout,
    i: usize,
) -> Vec<ComplexExpr> {
    let mut out = Vec::new();
    for y in blocks {
        let mut entries = vec![ComplexExpr::default(); analog_i.nrows() * y.ncols()];
        linearized_product(&mut entries, None, analog_i, y, layout, i, 1.0);
        out.extend(entries);
    }
    out
}

struct AnalogProblem {
    problem: ConicProblem,
    layout: DeltaLayout,
    warm: Vec<f64>,
}

fn omega_factors(current: &Certified) -> Result<Option<Vec<CMat<f64>>>> {
    match &current.precoder.quant_cov {
        Some(q) if q.iter().all(is_zero) => Ok(None),
        Some(q) => Ok(Some(q.iter().map(psd_factor).collect::<Result<Vec<_>>>()?)),
        None => Ok(None),
    }
}

fn build(scenario: &Scenario<f64>, current: &Certified, state: &WmmseState<f64>) -> Result<AnalogProblem> {
    let pre = &current.precoder;
    let (ns, kr) = (scenario.streams.len(), scenario.errhs());
    let analog = pre.analog.matrices();
    let ubar = pre.combined_all(scenario);
    let factors = omega_factors(current)?;
    let mut p = ConicProblem::new();
    let delta: VarBlock = p.variable("delta", scenario.tx_antennas * scenario.rf_chains, kr);
    let layout = DeltaLayout { offset: delta.offset, antennas: scenario.tx_antennas, rf_chains: scenario.rf_chains, errhs: kr };
    let rates = p.variable("R", ns, 1);
    let min_rate = p.scalar("R_min");
    p.maximize(LinExpr::var(min_rate));

    for (k, streams) in scenario.user_streams.iter().enumerate() {
        for (pos, &s) in streams.iter().enumerate() {
            let lin = build_analog_linearization(
                scenario,
                &analog,
                &ubar,
                factors.as_deref(),
                &state.receivers[k][pos],
                &state.weights[k][pos],
                k,
                s,
                &layout,
            )?;
            let mut v = Vec::new();
            for e in lin.residual {
                push_complex(&mut v, e);
            }
            let mut w = LinExpr::constant(lin.weight_term - lin.noise_term);
            w.push(rates.at(s, 0), -LN2);
            p.squared_norm_le(format!("rate[user {k}, stream {s}]"), v, w);
        }
    }
    for i in 0..kr {
        let mut blocks: Vec<&CMat<f64>> = (0..ns).map(|s| &ubar[s][i]).collect();
        if let Some(q) = &factors {
            blocks.push(&q[i]);
        }
        let mut v = Vec::new();
        for e in power_linearization(&analog[i], &blocks, &layout, i) {
            push_complex(&mut v, e);
        }
        p.soc(format!("power[{i}]"), LinExpr::constant(scenario.power.sqrt()), v);
        if scenario.strategy == Strategy::Hfit {
            let mut load = LinExpr::default();
            for s in (0..ns).filter(|&s| scenario.transfer[s][i]) {
                load.push(rates.at(s, 0), 1.0);
            }
            if !load.terms.is_empty() {
                p.le(format!("fronthaul[{i}]"), &load, &LinExpr::constant(scenario.fronthaul));
            }
        }
    }
    for s in 0..ns {
        p.nonneg(format!("R[{s}]>=0"), LinExpr::var(rates.at(s, 0)));
        p.le(format!("R[{s}]<=cap"), &LinExpr::var(rates.at(s, 0)), &LinExpr::constant(scenario.rate_cap));
    }
    for (f, ids) in scenario.file_streams.iter().enumerate() {
        let mut sum = LinExpr::default();
        for &s in ids {
            sum.push(rates.at(s, 0), 1.0);
        }
        p.le(format!("R_min<=file[{f}]"), &LinExpr::var(min_rate), &sum);
    }
    let mut warm = vec![0.0; p.num_vars];
    for s in 0..ns {
        warm[rates.at(s, 0)] = current.allocation.per_subfile[s];
    }
    warm[min_rate] = current.allocation.min_rate;
    Ok(AnalogProblem { problem: p, layout, warm })
}

fn with_trust_region(base: &ConicProblem, layout: &DeltaLayout, radius: f64) -> ConicProblem {
    let mut p = base.clone();
    for idx in layout.offset..layout.offset + layout.len() {
        p.nonneg("trust region", LinExpr::var(idx).offset(radius));
        p.nonneg("trust region", LinExpr::var(idx).scaled(-1.0).offset(radius));
    }
    p
}

/// Smallest trust-region radius tried before giving up on an iteration.
pub const MIN_RADIUS: f64 = 1e-6;

impl Optimizer {
    /// Runs the analog stage from a certified point. Fully digital
    /// precoders have no analog stage and are returned unchanged.
    pub fn analog_stage(&self, scenario: &Scenario<f64>, start: Certified) -> Result<(Certified, SolveTrace)> {
        let mut trace = SolveTrace::default();
        let mut current = start;
        trace.push(self.record(Stage::Init, 0, &current, "start", 0.0));
        let AnalogPrecoder::Phases(_) = &current.precoder.analog else {
            trace.converged = true;
            return Ok((current, trace));
        };
        let mode = mode_of(scenario);
        let budget = scenario.power * (1.0 + 1e-6);
        for it in 1..=self.settings.inner_iters {
            let clock = Instant::now();
            let link = Link::from_precoder(scenario, &current.precoder, mode)?;
            let state = WmmseState::refresh(scenario, &link)?;
            if state.jittered {
                trace.flag("diagonal load applied to a near-singular covariance");
            }
            let base = build(scenario, &current, &state)?;
            let mut radius = self.settings.initial_radius;
            let mut accepted: Option<(Certified, SolveStatus)> = None;
            for _ in 0..=self.settings.backtrack_cap {
                if radius < MIN_RADIUS {
                    break;
                }
                let problem = with_trust_region(&base.problem, &base.layout, radius);
                let sol = self.backend().solve(&problem, self.settings.solver_tolerance)?;
                if !sol.status.usable() {
                    let violated = problem.violated(&base.warm, 1e-6);
                    if sol.status == SolveStatus::Infeasible && !violated.is_empty() {
                        return Err(Error::Infeasible { stage: "analog".into(), violated });
                    }
                    radius *= self.settings.shrink;
                    continue;
                }
                let AnalogPrecoder::Phases(phases) = &current.precoder.analog else { unreachable!() };
                let stepped: Vec<RMat<f64>> =
                    phases.iter().enumerate().map(|(i, ph)| ph + base.layout.matrix(&sol.values, i)).collect();
                let mut candidate = current.precoder.clone();
                candidate.analog = AnalogPrecoder::Phases(stepped);
                let over = (0..scenario.errhs())
                    .map(|i| transmit_power(scenario, &candidate, i, mode))
                    .collect::<Result<Vec<_>>>()?
                    .into_iter()
                    .any(|p| p > budget);
                if over {
                    radius *= self.settings.shrink;
                    continue;
                }
                let cert = self.certify(scenario, candidate)?;
                if cert.allocation.min_rate < current.allocation.min_rate {
                    radius *= self.settings.shrink;
                    continue;
                }
                accepted = Some((cert, sol.status));
                break;
            }
            let Some((cert, status)) = accepted else {
                trace.flag("analog backtracking exhausted; kept zero increment");
                trace.converged = true;
                break;
            };
            let delta = cert.allocation.min_rate - current.allocation.min_rate;
            for f in &cert.flags {
                trace.flag(f.clone());
            }
            current = cert;
            trace.push(self.record(Stage::Analog, it, &current, status.as_str(), clock.elapsed().as_secs_f64()));
            if delta <= self.settings.tolerance {
                trace.converged = true;
                break;
            }
        }
        Ok((current, trace))
    }
}
