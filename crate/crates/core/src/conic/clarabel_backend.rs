//! Interior-point backend on top of Clarabel.

use clarabel::algebra::CscMatrix;
use clarabel::solver::{
    DefaultSettingsBuilder, DefaultSolver, IPSolver, SolverStatus, SupportedConeT,
};

use super::{
    CapabilityTier, ConeKind, ConicBackend, ConicProblem, ConicSolution, Constraint, LinExpr, SolveStatus,
    NEAR_OPTIMAL_RESIDUAL,
};
use crate::error::{Error, Result};

#[derive(Debug, Clone)]
pub struct ClarabelBackend {
    pub tier: CapabilityTier,
    pub max_iter: u32,
}

impl Default for ClarabelBackend {
    fn default() -> Self {
        Self { tier: CapabilityTier::Full, max_iter: 200 }
    }
}

impl ClarabelBackend {
    pub fn with_tier(tier: CapabilityTier) -> Self {
        Self { tier, ..Self::default() }
    }
}

/// Rows `s = b − A x` accumulated cone by cone.
struct Rows {
    i: Vec<usize>,
    j: Vec<usize>,
    v: Vec<f64>,
    b: Vec<f64>,
    cones: Vec<SupportedConeT<f64>>,
}

impl Rows {
    fn push_expr(&mut self, e: &LinExpr) {
        let row = self.b.len();
        for &(idx, c) in &e.terms {
            self.i.push(row);
            self.j.push(idx);
            self.v.push(-c);
        }
        self.b.push(e.constant);
    }

    fn cone(&mut self, cone: SupportedConeT<f64>) {
        use SupportedConeT::*;
        match (self.cones.last_mut(), &cone) {
            (Some(ZeroConeT(n)), ZeroConeT(m)) | (Some(NonnegativeConeT(n)), NonnegativeConeT(m)) => *n += m,
            _ => self.cones.push(cone),
        }
    }

    /// Upper triangle, column by column, off-diagonals scaled by √2.
    fn push_psd(&mut self, dim: usize, entry: impl Fn(usize, usize) -> LinExpr) {
        for c in 0..dim {
            for r in 0..=c {
                let e = entry(r, c);
                if r == c {
                    self.push_expr(&e);
                } else {
                    self.push_expr(&e.scaled(std::f64::consts::SQRT_2));
                }
            }
        }
        self.cone(SupportedConeT::PSDTriangleConeT(dim));
    }
}

impl ConicBackend for ClarabelBackend {
    fn name(&self) -> &str {
        "clarabel"
    }

    fn capabilities(&self) -> Vec<ConeKind> {
        self.tier.cones()
    }

    fn solve(&self, problem: &ConicProblem, tolerance: f64) -> Result<ConicSolution> {
        problem.validate()?;
        self.check_capabilities(problem)?;
        let n_user = problem.num_vars;
        let mut n = n_user;
        let mut rows = Rows { i: Vec::new(), j: Vec::new(), v: Vec::new(), b: Vec::new(), cones: Vec::new() };
        for c in &problem.constraints {
            match &c.constraint {
                Constraint::Zero(e) => {
                    rows.push_expr(e);
                    rows.cone(SupportedConeT::ZeroConeT(1));
                }
                Constraint::Nonneg(e) => {
                    rows.push_expr(e);
                    rows.cone(SupportedConeT::NonnegativeConeT(1));
                }
                Constraint::SecondOrder { bound, vector } => {
                    rows.push_expr(bound);
                    for e in vector {
                        rows.push_expr(e);
                    }
                    rows.cone(SupportedConeT::SecondOrderConeT(vector.len() + 1));
                }
                Constraint::Psd { dim, entries } => {
                    let d = *dim;
                    rows.push_psd(d, |r, c| entries[r * d + c].clone());
                }
                Constraint::LogDet { bound, dim, entries } => {
                    let d = *dim;
                    let u0 = n;
                    n += d;
                    let diagonal = (0..d).all(|r| {
                        (0..d).all(|c| {
                            let e = &entries[r * d + c];
                            r == c || (e.terms.is_empty() && e.constant == 0.0)
                        })
                    });
                    if diagonal {
                        // u_j ≤ log X_jj
                        for j in 0..d {
                            rows.push_expr(&LinExpr::var(u0 + j));
                            rows.push_expr(&LinExpr::constant(1.0));
                            rows.push_expr(&entries[j * d + j]);
                            rows.cone(SupportedConeT::ExponentialConeT());
                        }
                    } else {
                        // [[X, Z], [Zᵀ, diag Z]] ⪰ 0 with Z lower triangular, u_j ≤ log Z_jj
                        let z0 = n;
                        n += d * (d + 1) / 2;
                        let z = |a: usize, b: usize| -> Option<usize> {
                            (b <= a).then(|| z0 + a * (a + 1) / 2 + b)
                        };
                        rows.push_psd(2 * d, |r, c| {
                            if r < d && c < d {
                                entries[r * d + c].clone()
                            } else if r < d {
                                // upper-right block holds Z
                                z(r, c - d).map_or_else(LinExpr::default, LinExpr::var)
                            } else if r == c {
                                LinExpr::var(z(r - d, r - d).expect("diagonal"))
                            } else {
                                LinExpr::default()
                            }
                        });
                        for j in 0..d {
                            rows.push_expr(&LinExpr::var(u0 + j));
                            rows.push_expr(&LinExpr::constant(1.0));
                            rows.push_expr(&LinExpr::var(z(j, j).expect("diagonal")));
                            rows.cone(SupportedConeT::ExponentialConeT());
                        }
                    }
                    // bound ≤ Σ u_j
                    let mut slack = bound.clone().scaled(-1.0);
                    for j in 0..d {
                        slack.push(u0 + j, 1.0);
                    }
                    rows.push_expr(&slack);
                    rows.cone(SupportedConeT::NonnegativeConeT(1));
                }
            }
        }
        let m = rows.b.len();
        let a = CscMatrix::new_from_triplets(m, n, rows.i, rows.j, rows.v);
        let p = CscMatrix::zeros((n, n));
        let mut q = vec![0.0; n];
        for &(idx, c) in &problem.objective.terms {
            q[idx] -= c;
        }
        let settings = DefaultSettingsBuilder::default()
            .verbose(false)
            .max_iter(self.max_iter)
            .tol_feas(tolerance.min(1e-8))
            .tol_gap_abs(tolerance.min(1e-8))
            .tol_gap_rel(tolerance.min(1e-8))
            .build()
            .map_err(|e| Error::Solver { stage: "settings".into(), detail: format!("{e:?}") })?;
        let mut solver = DefaultSolver::new(&p, &q, &a, &rows.b, &rows.cones, settings)
            .map_err(|e| Error::Solver { stage: "setup".into(), detail: format!("{e:?}") })?;
        solver.solve();
        let sol = &solver.solution;
        let values: Vec<f64> = sol.x[..n_user].to_vec();
        let finite = values.iter().all(|v| v.is_finite());
        let max_residual = if finite { problem.max_residual(&values) } else { f64::INFINITY };
        let status = match sol.status {
            SolverStatus::PrimalInfeasible | SolverStatus::AlmostPrimalInfeasible => SolveStatus::Infeasible,
            SolverStatus::Solved if max_residual <= tolerance => SolveStatus::Optimal,
            SolverStatus::Solved
            | SolverStatus::AlmostSolved
            | SolverStatus::MaxIterations
            | SolverStatus::InsufficientProgress
                if max_residual <= NEAR_OPTIMAL_RESIDUAL =>
            {
                SolveStatus::NearOptimal
            }
            _ => SolveStatus::NumericalFailure,
        };
        let objective_value = if finite { problem.objective.eval(&values) } else { f64::NAN };
        Ok(ConicSolution { values, status, objective_value, max_residual })
    }
}
