//! Digital stage: WMMSE refresh followed by a conic subproblem over the
//! digital blocks (and Ω for SFIT) with the analog stage fixed.

use std::time::Instant;

use super::{mode_of, Certified, Optimizer};
use crate::conic::{CholeskyVar, ComplexExpr, ComplexVar, ConicProblem, LinExpr};
use crate::error::{Error, Result};
use crate::linalg::{cholesky_factor, frob2, hermitian_logdet, trace_re};
use crate::scalar::CMat;
use crate::scenario::{HybridPrecoder, Scenario, Strategy};
use crate::trace::{SolveTrace, Stage};
use crate::wmmse::{Link, WmmseState};

const LN2: f64 = std::f64::consts::LN_2;

pub(crate) enum BlockRef<'a> {
    Var(&'a ComplexVar),
    Const(&'a CMat<f64>),
}

/// Adds `sign · Σ_c a[row, c] X[c, col]`.
pub(crate) fn accumulate(e: &mut ComplexExpr, a: &CMat<f64>, row: usize, block: &BlockRef, col: usize, sign: f64) {
    for c in 0..a.ncols() {
        let coef = a[(row, c)] * sign;
        match block {
            BlockRef::Var(v) => e.add_scaled_var(coef, v.re(c, col), v.im(c, col)),
            BlockRef::Const(m) => e.add_constant(coef * m[(c, col)]),
        }
    }
}

pub(crate) fn push_complex(v: &mut Vec<LinExpr>, e: ComplexExpr) {
    v.push(e.re);
    v.push(e.im);
}

pub(crate) struct DigitalProblem {
    pub problem: ConicProblem,
    /// Decision blocks Ū_{s,i}; `None` means fixed at the current value.
    pub blocks: Vec<Vec<Option<ComplexVar>>>,
    /// Cholesky factors of the Ω_i being optimized.
    pub omega: Vec<Option<CholeskyVar>>,
    /// The current iterate in the problem's variables.
    pub warm: Vec<f64>,
}

fn is_decision(scenario: &Scenario<f64>, s: usize, i: usize) -> bool {
    match scenario.strategy {
        Strategy::Hfit => scenario.available(s, i),
        Strategy::Sfit => scenario.cached[s][i] || scenario.fronthaul > 0.0,
    }
}

/// Ω_i is optimized only on eRRHs that carry fronthaul traffic; elsewhere it is zero.
pub(crate) fn omega_is_decision(scenario: &Scenario<f64>, i: usize) -> bool {
    scenario.strategy == Strategy::Sfit && scenario.fronthaul > 0.0 && scenario.uncached(i).next().is_some()
}

pub(crate) fn build(
    scenario: &Scenario<f64>,
    current: &Certified,
    link: &Link<f64>,
    state: &WmmseState<f64>,
) -> Result<DigitalProblem> {
    let pre = &current.precoder;
    let (ns, kr, nrf, d) = (scenario.streams.len(), scenario.errhs(), scenario.rf_chains, scenario.stream_dim);
    let sfit = scenario.strategy == Strategy::Sfit;
    let ubar = pre.combined_all(scenario);
    let mut p = ConicProblem::new();

    let blocks: Vec<Vec<Option<ComplexVar>>> = (0..ns)
        .map(|s| {
            (0..kr)
                .map(|i| is_decision(scenario, s, i).then(|| p.complex_variable(format!("X[{s},{i}]"), nrf, d)))
                .collect()
        })
        .collect();
    // Ω_i = L_i L_iᴴ keeps every Ω term a squared norm and log det Ω_i = 2 Σ log L_jj
    let omega: Vec<Option<CholeskyVar>> = (0..kr)
        .map(|i| omega_is_decision(scenario, i).then(|| p.cholesky_variable(format!("L_Omega[{i}]"), nrf)))
        .collect();
    let logdet_aux: Vec<Option<usize>> =
        (0..kr).map(|i| omega[i].as_ref().map(|_| p.scalar(format!("t[{i}]")))).collect();
    let rates = p.variable("R", ns, 1);
    let min_rate = p.scalar("R_min");
    p.maximize(LinExpr::var(min_rate));

    let block_ref = |s: usize, i: usize| match &blocks[s][i] {
        Some(v) => BlockRef::Var(v),
        None => BlockRef::Const(&ubar[s][i]),
    };
    let fixed_omega = |i: usize| -> Option<&CMat<f64>> { pre.quant_cov.as_ref().map(|q| &q[i]) };

    for (k, streams) in scenario.user_streams.iter().enumerate() {
        for (pos, &s) in streams.iter().enumerate() {
            let xi = &state.receivers[k][pos];
            let ups = &state.weights[k][pos];
            let ul = cholesky_factor(ups)?;
            let ulh = ul.adjoint();
            let a: Vec<CMat<f64>> = (0..kr).map(|i| &ulh * xi.adjoint() * &link.hf[k][i]).collect();
            let mut v = Vec::new();
            for s2 in 0..ns {
                for row in 0..d {
                    for col in 0..d {
                        let mut e = ComplexExpr::default();
                        if s2 == s {
                            e.add_constant(ulh[(row, col)]);
                        }
                        for i in 0..kr {
                            accumulate(&mut e, &a[i], row, &block_ref(s2, i), col, -1.0);
                        }
                        push_complex(&mut v, e);
                    }
                }
            }
            let mut w = LinExpr::constant(hermitian_logdet(ups)? + d as f64 - link.noise_var * frob2(&(xi * &ul)));
            w.push(rates.at(s, 0), -LN2);
            if sfit {
                for i in 0..kr {
                    match &omega[i] {
                        Some(l) => push_factor_product(&mut v, &a[i], l),
                        None => w.constant -= trace_re(&(fixed_omega(i).expect("SFIT") * a[i].adjoint() * &a[i])),
                    }
                }
            }
            p.squared_norm_le(format!("rate[user {k}, stream {s}]"), v, w);
        }
    }

    for i in 0..kr {
        let f = pre.analog.matrix(i);
        let gram = f.adjoint() * &f;
        let has_var = (0..ns).any(|s| blocks[s][i].is_some()) || omega[i].is_some();
        if !has_var {
            continue;
        }
        // ‖F X‖ = ‖Rᴴ X‖ with F^H F = R Rᴴ
        let factor = cholesky_factor(&gram).map(|r| r.adjoint()).unwrap_or_else(|_| f.clone());
        let mut v = Vec::new();
        for s in 0..ns {
            for row in 0..factor.nrows() {
                for col in 0..d {
                    let mut e = ComplexExpr::default();
                    accumulate(&mut e, &factor, row, &block_ref(s, i), col, 1.0);
                    push_complex(&mut v, e);
                }
            }
        }
        match &omega[i] {
            Some(l) => {
                push_factor_product(&mut v, &factor, l);
                p.squared_norm_le(format!("power[{i}]"), v, LinExpr::constant(scenario.power));
            }
            None => {
                let noise = fixed_omega(i).map_or(0.0, |q| trace_re(&(q * &gram)));
                p.soc(format!("power[{i}]"), LinExpr::constant((scenario.power - noise).max(0.0).sqrt()), v);
            }
        }
    }

    for i in 0..kr {
        match scenario.strategy {
            Strategy::Hfit => {
                let mut load = LinExpr::default();
                for s in (0..ns).filter(|&s| scenario.transfer[s][i]) {
                    load.push(rates.at(s, 0), 1.0);
                }
                if !load.terms.is_empty() {
                    p.le(format!("fronthaul[{i}]"), &load, &LinExpr::constant(scenario.fronthaul));
                }
            }
            Strategy::Sfit => {
                let (Some(h), Some(t)) = (&omega[i], logdet_aux[i]) else { continue };
                let u = pre.digital_bbu.as_ref().expect("SFIT");
                let mut sigma = pre.quant_cov.as_ref().expect("SFIT")[i].clone();
                for s in scenario.uncached(i) {
                    sigma += &u[s][i] * u[s][i].adjoint();
                }
                // ‖L⁻¹U‖² = tr(Uᴴ Σ⁻¹ U) with Σ = L Lᴴ
                let whiten = lower_inverse(&cholesky_factor(&sigma)?)
                    .ok_or_else(|| Error::Conditioning(format!("fronthaul anchor of eRRH {i} is singular")))?;
                let mut v = Vec::new();
                for s in scenario.uncached(i) {
                    for row in 0..nrf {
                        for col in 0..d {
                            let mut e = ComplexExpr::default();
                            accumulate(&mut e, &whiten, row, &block_ref(s, i), col, 1.0);
                            push_complex(&mut v, e);
                        }
                    }
                }
                // tr(Σ⁻¹ Ω) = ‖L_Σ⁻¹ L‖²
                push_factor_product(&mut v, &whiten, h);
                let mut w = LinExpr::constant(LN2 * scenario.fronthaul - hermitian_logdet(&sigma)? + nrf as f64);
                w.push(t, 1.0);
                p.squared_norm_le(format!("fronthaul[{i}]"), v, w);
                p.log_det(format!("logdet Omega[{i}]"), LinExpr::var(t).scaled(0.5), nrf, h.diagonal_matrix());
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
        for i in 0..kr {
            if let Some(v) = &blocks[s][i] {
                v.write(&ubar[s][i], &mut warm);
            }
        }
    }
    for i in 0..kr {
        if let (Some(h), Some(t)) = (&omega[i], logdet_aux[i]) {
            let om = &pre.quant_cov.as_ref().expect("SFIT")[i];
            h.write(&cholesky_factor(om)?, &mut warm);
            warm[t] = hermitian_logdet(om)?;
        }
    }
    for s in 0..ns {
        warm[rates.at(s, 0)] = current.allocation.per_subfile[s];
    }
    warm[min_rate] = current.allocation.min_rate;
    Ok(DigitalProblem { problem: p, blocks, omega, warm })
}

/// Appends the entries of `a · L`.
fn push_factor_product(v: &mut Vec<LinExpr>, a: &CMat<f64>, l: &CholeskyVar) {
    for row in 0..a.nrows() {
        for col in 0..l.n {
            let mut e = ComplexExpr::default();
            for c in col..l.n {
                let entry = l.entry(c, col);
                let z = a[(row, c)];
                e.re.add_scaled(&entry.re, z.re);
                e.re.add_scaled(&entry.im, -z.im);
                e.im.add_scaled(&entry.re, z.im);
                e.im.add_scaled(&entry.im, z.re);
            }
            push_complex(v, e);
        }
    }
}

/// Inverse of a lower-triangular factor.
fn lower_inverse(l: &CMat<f64>) -> Option<CMat<f64>> {
    let mut inv = CMat::identity(l.nrows(), l.ncols());
    l.solve_lower_triangular_mut(&mut inv).then_some(inv)
}

pub(crate) fn extract(scenario: &Scenario<f64>, current: &HybridPrecoder<f64>, dp: &DigitalProblem, x: &[f64]) -> HybridPrecoder<f64> {
    let mut out = current.clone();
    for (s, row) in dp.blocks.iter().enumerate() {
        for (i, v) in row.iter().enumerate() {
            let Some(v) = v else { continue };
            let m = v.reconstruct(x);
            match (&mut out.digital_bbu, scenario.cached[s][i]) {
                (Some(u), false) => u[s][i] = m,
                _ => out.digital_err[s][i] = m,
            }
        }
    }
    if let Some(q) = out.quant_cov.as_mut() {
        for (i, h) in dp.omega.iter().enumerate() {
            if let Some(h) = h {
                q[i] = h.reconstruct(x);
            }
        }
    }
    out
}

impl Optimizer {
    /// Runs the digital stage from a certified point.
    pub fn digital_stage(&self, scenario: &Scenario<f64>, start: Certified) -> Result<(Certified, SolveTrace)> {
        let mut trace = SolveTrace::default();
        let mut current = start;
        trace.push(self.record(Stage::Init, 0, &current, "start", 0.0));
        let mode = mode_of(scenario);
        for it in 1..=self.settings.inner_iters {
            let clock = Instant::now();
            let link = Link::from_precoder(scenario, &current.precoder, mode)?;
            let state = WmmseState::refresh(scenario, &link)?;
            if state.jittered {
                trace.flag("diagonal load applied to a near-singular covariance");
            }
            let dp = build(scenario, &current, &link, &state)?;
            let sol = self.backend().solve(&dp.problem, self.settings.solver_tolerance)?;
            if !sol.status.usable() {
                let violated = dp.problem.violated(&dp.warm, 1e-6);
                if sol.status == crate::conic::SolveStatus::Infeasible && !violated.is_empty() {
                    return Err(Error::Infeasible { stage: "digital".into(), violated });
                }
                trace.flag(format!("digital subproblem {} at iteration {it}", sol.status.as_str()));
                break;
            }
            let candidate = self.certify(scenario, extract(scenario, &current.precoder, &dp, &sol.values))?;
            let delta = candidate.allocation.min_rate - current.allocation.min_rate;
            if delta < 0.0 {
                if -delta <= self.settings.tolerance {
                    trace.converged = true;
                } else {
                    trace.flag(format!("digital step lowered the certified rate by {:.3e}; kept previous point", -delta));
                }
                break;
            }
            for f in &candidate.flags {
                trace.flag(f.clone());
            }
            current = candidate;
            trace.push(self.record(Stage::Digital, it, &current, sol.status.as_str(), clock.elapsed().as_secs_f64()));
            if delta <= self.settings.tolerance {
                trace.converged = true;
                break;
            }
        }
        Ok((current, trace))
    }
}
