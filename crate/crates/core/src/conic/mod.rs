//! Declarative convex subproblems and the solver interface behind them.
//!
//! Optimizers describe a problem over real variables with affine expressions
//! and cone memberships; a [`ConicBackend`] turns it into solver input.
//! Complex and Hermitian decision matrices are lifted to real variables here.

mod clarabel_backend;

use std::collections::BTreeSet;
use std::fmt::Write as _;

use nalgebra::{DMatrix, SymmetricEigen};
use num_complex::Complex64;
use serde::{Deserialize, Serialize};

pub use clarabel_backend::ClarabelBackend;

use crate::error::{Error, Result};
use crate::scalar::CMat;

/// Affine expression `Σ coef·x[idx] + constant`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct LinExpr {
    pub terms: Vec<(usize, f64)>,
    pub constant: f64,
}

impl LinExpr {
    pub fn constant(c: f64) -> Self {
        Self { terms: Vec::new(), constant: c }
    }

    pub fn var(idx: usize) -> Self {
        Self { terms: vec![(idx, 1.0)], constant: 0.0 }
    }

    pub fn term(mut self, idx: usize, coef: f64) -> Self {
        self.push(idx, coef);
        self
    }

    pub fn push(&mut self, idx: usize, coef: f64) {
        if coef != 0.0 {
            self.terms.push((idx, coef));
        }
    }

    pub fn add_scaled(&mut self, other: &LinExpr, scale: f64) {
        for &(i, c) in &other.terms {
            self.push(i, c * scale);
        }
        self.constant += other.constant * scale;
    }

    pub fn plus(mut self, other: &LinExpr) -> Self {
        self.add_scaled(other, 1.0);
        self
    }

    pub fn minus(mut self, other: &LinExpr) -> Self {
        self.add_scaled(other, -1.0);
        self
    }

    pub fn scaled(mut self, s: f64) -> Self {
        for t in &mut self.terms {
            t.1 *= s;
        }
        self.constant *= s;
        self
    }

    pub fn offset(mut self, c: f64) -> Self {
        self.constant += c;
        self
    }

    pub fn eval(&self, x: &[f64]) -> f64 {
        self.terms.iter().fold(self.constant, |acc, &(i, c)| acc + c * x[i])
    }

    pub fn max_index(&self) -> Option<usize> {
        self.terms.iter().map(|t| t.0).max()
    }
}

/// Complex affine expression as a pair of real expressions.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ComplexExpr {
    pub re: LinExpr,
    pub im: LinExpr,
}

impl ComplexExpr {
    pub fn constant(z: Complex64) -> Self {
        Self { re: LinExpr::constant(z.re), im: LinExpr::constant(z.im) }
    }

    /// Adds `coef·(x_re + j x_im)`.
    pub fn add_scaled_var(&mut self, coef: Complex64, re_idx: usize, im_idx: usize) {
        self.re.push(re_idx, coef.re);
        self.re.push(im_idx, -coef.im);
        self.im.push(re_idx, coef.im);
        self.im.push(im_idx, coef.re);
    }

    /// Adds `coef·x` for a real variable.
    pub fn add_scaled_real(&mut self, coef: Complex64, idx: usize) {
        self.re.push(idx, coef.re);
        self.im.push(idx, coef.im);
    }

    pub fn add_constant(&mut self, z: Complex64) {
        self.re.constant += z.re;
        self.im.constant += z.im;
    }

    pub fn eval(&self, x: &[f64]) -> Complex64 {
        Complex64::new(self.re.eval(x), self.im.eval(x))
    }
}

/// Real block of variables.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct VarBlock {
    pub name: String,
    pub offset: usize,
    pub rows: usize,
    pub cols: usize,
}

impl VarBlock {
    pub fn len(&self) -> usize {
        self.rows * self.cols
    }

    pub fn is_empty(&self) -> bool {
        self.len() == 0
    }

    /// Column-major index of `(r, c)`.
    pub fn at(&self, r: usize, c: usize) -> usize {
        debug_assert!(r < self.rows && c < self.cols);
        self.offset + c * self.rows + r
    }
}

/// A complex `m x n` variable stored as a real `2m x n` block, real part on top.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct ComplexVar {
    pub block: VarBlock,
    pub rows: usize,
    pub cols: usize,
}

impl ComplexVar {
    pub fn re(&self, r: usize, c: usize) -> usize {
        self.block.at(r, c)
    }

    pub fn im(&self, r: usize, c: usize) -> usize {
        self.block.at(self.rows + r, c)
    }

    pub fn entry(&self, r: usize, c: usize) -> ComplexExpr {
        let mut e = ComplexExpr::default();
        e.add_scaled_var(Complex64::new(1.0, 0.0), self.re(r, c), self.im(r, c));
        e
    }

    pub fn reconstruct(&self, x: &[f64]) -> CMat<f64> {
        CMat::from_fn(self.rows, self.cols, |r, c| Complex64::new(x[self.re(r, c)], x[self.im(r, c)]))
    }

    /// Writes the lifted image of `m` into `x`.
    pub fn write(&self, m: &CMat<f64>, x: &mut [f64]) {
        for r in 0..self.rows {
            for c in 0..self.cols {
                x[self.re(r, c)] = m[(r, c)].re;
                x[self.im(r, c)] = m[(r, c)].im;
            }
        }
    }
}

/// A Hermitian `n x n` variable with `n²` real parameters: the diagonal,
/// then the real and imaginary parts of each strictly upper entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct HermitianVar {
    pub block: VarBlock,
    pub n: usize,
}

impl HermitianVar {
    fn upper_slot(&self, a: usize, b: usize) -> usize {
        // position of (a, b), a < b, among strictly upper entries in row-major order
        let n = self.n;
        a * n - a * (a + 1) / 2 + (b - a - 1)
    }

    pub fn diag(&self, a: usize) -> usize {
        self.block.offset + a
    }

    fn upper_re(&self, a: usize, b: usize) -> usize {
        self.block.offset + self.n + 2 * self.upper_slot(a, b)
    }

    fn upper_im(&self, a: usize, b: usize) -> usize {
        self.upper_re(a, b) + 1
    }

    pub fn entry(&self, a: usize, b: usize) -> ComplexExpr {
        let mut e = ComplexExpr::default();
        match a.cmp(&b) {
            std::cmp::Ordering::Equal => e.re.push(self.diag(a), 1.0),
            std::cmp::Ordering::Less => {
                e.re.push(self.upper_re(a, b), 1.0);
                e.im.push(self.upper_im(a, b), 1.0);
            }
            std::cmp::Ordering::Greater => {
                e.re.push(self.upper_re(b, a), 1.0);
                e.im.push(self.upper_im(b, a), -1.0);
            }
        }
        e
    }

    /// `Re tr(H M)` for a constant matrix `M`, linear in the parameters.
    pub fn trace_with(&self, m: &CMat<f64>) -> LinExpr {
        let mut out = LinExpr::default();
        for a in 0..self.n {
            for b in 0..self.n {
                let h = self.entry(a, b);
                let z = m[(b, a)];
                out.add_scaled(&h.re, z.re);
                out.add_scaled(&h.im, -z.im);
            }
        }
        out
    }

    /// Entries of the real embedding `[[Re, -Im], [Im, Re]]` of `H + shift·I`, row-major `2n x 2n`.
    pub fn embedding(&self, shift: f64) -> Vec<LinExpr> {
        let n = self.n;
        let mut out = vec![LinExpr::default(); 4 * n * n];
        for a in 0..n {
            for b in 0..n {
                let mut h = self.entry(a, b);
                if a == b {
                    h.re.constant += shift;
                }
                out[a * 2 * n + b] = h.re.clone();
                out[(a + n) * 2 * n + (b + n)] = h.re.clone();
                out[a * 2 * n + (b + n)] = h.im.clone().scaled(-1.0);
                out[(a + n) * 2 * n + b] = h.im;
            }
        }
        out
    }

    pub fn reconstruct(&self, x: &[f64]) -> CMat<f64> {
        CMat::from_fn(self.n, self.n, |a, b| self.entry(a, b).eval(x))
    }

    /// Writes the parameters of Hermitian `m` into `x`.
    pub fn write(&self, m: &CMat<f64>, x: &mut [f64]) {
        for a in 0..self.n {
            x[self.diag(a)] = m[(a, a)].re;
            for b in a + 1..self.n {
                x[self.upper_re(a, b)] = m[(a, b)].re;
                x[self.upper_im(a, b)] = m[(a, b)].im;
            }
        }
    }
}

/// A complex lower-triangular `n x n` factor `L` with real diagonal, standing
/// in for a Hermitian PSD matrix `L Lᴴ`. Parameters: the diagonal, then the
/// real and imaginary parts of each strictly lower entry.
#[derive(Debug, Clone, PartialEq, Eq)]
pub struct CholeskyVar {
    pub block: VarBlock,
    pub n: usize,
}

impl CholeskyVar {
    fn lower_slot(&self, a: usize, b: usize) -> usize {
        // position of (a, b), a > b, among strictly lower entries in row-major order
        a * (a - 1) / 2 + b
    }

    pub fn diag(&self, a: usize) -> usize {
        self.block.offset + a
    }

    fn lower_re(&self, a: usize, b: usize) -> usize {
        self.block.offset + self.n + 2 * self.lower_slot(a, b)
    }

    pub fn entry(&self, a: usize, b: usize) -> ComplexExpr {
        let mut e = ComplexExpr::default();
        match a.cmp(&b) {
            std::cmp::Ordering::Equal => e.re.push(self.diag(a), 1.0),
            std::cmp::Ordering::Greater => {
                e.re.push(self.lower_re(a, b), 1.0);
                e.im.push(self.lower_re(a, b) + 1, 1.0);
            }
            std::cmp::Ordering::Less => {}
        }
        e
    }

    /// Row-major `n x n` diagonal matrix of the factor's diagonal; its log
    /// determinant is half that of `L Lᴴ`.
    pub fn diagonal_matrix(&self) -> Vec<LinExpr> {
        let n = self.n;
        let mut out = vec![LinExpr::default(); n * n];
        for a in 0..n {
            out[a * n + a] = LinExpr::var(self.diag(a));
        }
        out
    }

    pub fn factor(&self, x: &[f64]) -> CMat<f64> {
        CMat::from_fn(self.n, self.n, |a, b| self.entry(a, b).eval(x))
    }

    /// `L Lᴴ` at `x`.
    pub fn reconstruct(&self, x: &[f64]) -> CMat<f64> {
        let l = self.factor(x);
        &l * l.adjoint()
    }

    /// Writes the lower-triangular factor `l` into `x`.
    pub fn write(&self, l: &CMat<f64>, x: &mut [f64]) {
        for a in 0..self.n {
            x[self.diag(a)] = l[(a, a)].re;
            for b in 0..a {
                x[self.lower_re(a, b)] = l[(a, b)].re;
                x[self.lower_re(a, b) + 1] = l[(a, b)].im;
            }
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum LiftRole {
    General,
    Hermitian,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub enum Lifted {
    General(ComplexVar),
    Hermitian(HermitianVar),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum ConeKind {
    Zero,
    Nonnegative,
    SecondOrder,
    Psd,
    LogDet,
}

#[derive(Debug, Clone, PartialEq)]
pub enum Constraint {
    /// `expr = 0`
    Zero(LinExpr),
    /// `expr ≥ 0`
    Nonneg(LinExpr),
    /// `‖vector‖₂ ≤ bound`
    SecondOrder { bound: LinExpr, vector: Vec<LinExpr> },
    /// Symmetric `dim x dim` matrix (row-major, upper triangle read) is PSD.
    Psd { dim: usize, entries: Vec<LinExpr> },
    /// `bound ≤ log det(matrix)` with the matrix symmetric positive definite.
    LogDet { bound: LinExpr, dim: usize, entries: Vec<LinExpr> },
}

impl Constraint {
    pub fn kind(&self) -> ConeKind {
        match self {
            Self::Zero(_) => ConeKind::Zero,
            Self::Nonneg(_) => ConeKind::Nonnegative,
            Self::SecondOrder { .. } => ConeKind::SecondOrder,
            Self::Psd { .. } => ConeKind::Psd,
            Self::LogDet { .. } => ConeKind::LogDet,
        }
    }

    fn exprs(&self) -> Box<dyn Iterator<Item = &LinExpr> + '_> {
        match self {
            Self::Zero(e) | Self::Nonneg(e) => Box::new(std::iter::once(e)),
            Self::SecondOrder { bound, vector } => Box::new(std::iter::once(bound).chain(vector)),
            Self::Psd { entries, .. } => Box::new(entries.iter()),
            Self::LogDet { bound, entries, .. } => Box::new(std::iter::once(bound).chain(entries)),
        }
    }

    /// Violation at `x`; zero when satisfied.
    pub fn violation(&self, x: &[f64]) -> f64 {
        match self {
            Self::Zero(e) => e.eval(x).abs(),
            Self::Nonneg(e) => (-e.eval(x)).max(0.0),
            Self::SecondOrder { bound, vector } => {
                let n = vector.iter().map(|v| v.eval(x).powi(2)).sum::<f64>().sqrt();
                (n - bound.eval(x)).max(0.0)
            }
            Self::Psd { dim, entries } => (-min_sym_eigen(*dim, entries, x)).max(0.0),
            Self::LogDet { bound, dim, entries } => {
                let m = symmetric_value(*dim, entries, x);
                match m.clone().cholesky() {
                    Some(ch) => {
                        let ld: f64 = 2.0 * ch.l().diagonal().iter().map(|v| v.ln()).sum::<f64>();
                        (bound.eval(x) - ld).max(0.0)
                    }
                    None => f64::INFINITY,
                }
            }
        }
    }
}

fn symmetric_value(dim: usize, entries: &[LinExpr], x: &[f64]) -> DMatrix<f64> {
    DMatrix::from_fn(dim, dim, |r, c| {
        let (a, b) = if r <= c { (r, c) } else { (c, r) };
        entries[a * dim + b].eval(x)
    })
}

fn min_sym_eigen(dim: usize, entries: &[LinExpr], x: &[f64]) -> f64 {
    let m = symmetric_value(dim, entries, x);
    SymmetricEigen::new(m).eigenvalues.iter().copied().fold(f64::INFINITY, f64::min)
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledConstraint {
    pub label: String,
    pub constraint: Constraint,
}

/// Maximize `objective` over the declared real variables subject to `constraints`.
#[derive(Debug, Clone, Default, PartialEq)]
pub struct ConicProblem {
    pub variables: Vec<VarBlock>,
    pub num_vars: usize,
    pub objective: LinExpr,
    pub constraints: Vec<LabeledConstraint>,
}

impl ConicProblem {
    pub fn new() -> Self {
        Self::default()
    }

    pub fn variable(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> VarBlock {
        let block = VarBlock { name: name.into(), offset: self.num_vars, rows, cols };
        self.num_vars += rows * cols;
        self.variables.push(block.clone());
        block
    }

    pub fn scalar(&mut self, name: impl Into<String>) -> usize {
        self.variable(name, 1, 1).offset
    }

    pub fn complex_variable(&mut self, name: impl Into<String>, rows: usize, cols: usize) -> ComplexVar {
        let block = self.variable(name, 2 * rows, cols);
        ComplexVar { block, rows, cols }
    }

    pub fn hermitian_variable(&mut self, name: impl Into<String>, n: usize) -> HermitianVar {
        let block = self.variable(name, n * n, 1);
        HermitianVar { block, n }
    }

    pub fn cholesky_variable(&mut self, name: impl Into<String>, n: usize) -> CholeskyVar {
        let block = self.variable(name, n * n, 1);
        CholeskyVar { block, n }
    }

    pub fn maximize(&mut self, objective: LinExpr) {
        self.objective = objective;
    }

    pub fn add(&mut self, label: impl Into<String>, constraint: Constraint) {
        self.constraints.push(LabeledConstraint { label: label.into(), constraint });
    }

    pub fn eq_zero(&mut self, label: impl Into<String>, e: LinExpr) {
        self.add(label, Constraint::Zero(e));
    }

    pub fn nonneg(&mut self, label: impl Into<String>, e: LinExpr) {
        self.add(label, Constraint::Nonneg(e));
    }

    /// `lhs ≤ rhs`
    pub fn le(&mut self, label: impl Into<String>, lhs: &LinExpr, rhs: &LinExpr) {
        self.nonneg(label, rhs.clone().minus(lhs));
    }

    pub fn soc(&mut self, label: impl Into<String>, bound: LinExpr, vector: Vec<LinExpr>) {
        self.add(label, Constraint::SecondOrder { bound, vector });
    }

    /// `‖v‖² ≤ w` as the cone `‖(2v, w − 1)‖ ≤ w + 1`.
    pub fn squared_norm_le(&mut self, label: impl Into<String>, v: Vec<LinExpr>, w: LinExpr) {
        let mut vector: Vec<LinExpr> = v.into_iter().map(|e| e.scaled(2.0)).collect();
        vector.push(w.clone().offset(-1.0));
        self.soc(label, w.offset(1.0), vector);
    }

    pub fn psd(&mut self, label: impl Into<String>, dim: usize, entries: Vec<LinExpr>) {
        assert_eq!(entries.len(), dim * dim, "PSD entries must be dim x dim");
        self.add(label, Constraint::Psd { dim, entries });
    }

    pub fn log_det(&mut self, label: impl Into<String>, bound: LinExpr, dim: usize, entries: Vec<LinExpr>) {
        assert_eq!(entries.len(), dim * dim, "log-det entries must be dim x dim");
        self.add(label, Constraint::LogDet { bound, dim, entries });
    }

    pub fn required_cones(&self) -> BTreeSet<ConeKind> {
        self.constraints.iter().map(|c| c.constraint.kind()).collect()
    }

    /// Checks that every expression references a declared variable.
    pub fn validate(&self) -> Result<()> {
        let check = |e: &LinExpr, label: &str| match e.max_index() {
            Some(i) if i >= self.num_vars => {
                Err(Error::InvalidArgument(format!("`{label}` references undeclared variable {i}")))
            }
            _ => Ok(()),
        };
        check(&self.objective, "objective")?;
        for c in &self.constraints {
            for e in c.constraint.exprs() {
                check(e, &c.label)?;
            }
        }
        Ok(())
    }

    pub fn max_residual(&self, x: &[f64]) -> f64 {
        self.constraints.iter().map(|c| c.constraint.violation(x)).fold(0.0, f64::max)
    }

    /// Labels of constraints violated by more than `tol` at `x`.
    pub fn violated(&self, x: &[f64], tol: f64) -> Vec<String> {
        self.constraints.iter().filter(|c| c.constraint.violation(x) > tol).map(|c| c.label.clone()).collect()
    }

    /// Plain-text dump, one record per line:
    ///
    /// ```text
    /// vars <n>
    /// var <name> <offset> <rows> <cols>
    /// maximize <expr>
    /// <kind> <dim> <label>
    ///   <expr>            (one line per affine component)
    /// ```
    ///
    /// where `<expr>` is `<constant> [<index>:<coef> ...]`.
    pub fn dump(&self) -> String {
        fn expr(out: &mut String, e: &LinExpr) {
            write!(out, "{:e}", e.constant).unwrap();
            for (i, c) in &e.terms {
                write!(out, " {i}:{c:e}").unwrap();
            }
        }
        let mut out = String::new();
        writeln!(out, "vars {}", self.num_vars).unwrap();
        for v in &self.variables {
            writeln!(out, "var {} {} {} {}", v.name, v.offset, v.rows, v.cols).unwrap();
        }
        out.push_str("maximize ");
        expr(&mut out, &self.objective);
        out.push('\n');
        for c in &self.constraints {
            let (kind, dim) = match &c.constraint {
                Constraint::Zero(_) => ("zero", 1),
                Constraint::Nonneg(_) => ("nonneg", 1),
                Constraint::SecondOrder { vector, .. } => ("soc", vector.len() + 1),
                Constraint::Psd { dim, .. } => ("psd", *dim),
                Constraint::LogDet { dim, .. } => ("logdet", *dim),
            };
            writeln!(out, "{kind} {dim} {}", c.label).unwrap();
            for e in c.constraint.exprs() {
                out.push_str("  ");
                expr(&mut out, e);
                out.push('\n');
            }
        }
        out
    }
}

/// Declares a lifted complex variable of the given shape.
pub fn lift_complex(problem: &mut ConicProblem, name: &str, shape: (usize, usize), role: LiftRole) -> Result<Lifted> {
    match role {
        LiftRole::General => Ok(Lifted::General(problem.complex_variable(name, shape.0, shape.1))),
        LiftRole::Hermitian if shape.0 == shape.1 => Ok(Lifted::Hermitian(problem.hermitian_variable(name, shape.0))),
        LiftRole::Hermitian => Err(Error::InvalidArgument(format!("Hermitian variable must be square, got {shape:?}"))),
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "kebab-case")]
pub enum SolveStatus {
    Optimal,
    NearOptimal,
    Infeasible,
    NumericalFailure,
}

impl SolveStatus {
    pub fn usable(self) -> bool {
        matches!(self, Self::Optimal | Self::NearOptimal)
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Self::Optimal => "optimal",
            Self::NearOptimal => "near-optimal",
            Self::Infeasible => "infeasible",
            Self::NumericalFailure => "numerical-failure",
        }
    }
}

/// Residual up to which a non-optimal solve is still accepted.
pub const NEAR_OPTIMAL_RESIDUAL: f64 = 1e-5;

#[derive(Debug, Clone, PartialEq)]
pub struct ConicSolution {
    pub values: Vec<f64>,
    pub status: SolveStatus,
    pub objective_value: f64,
    pub max_residual: f64,
}

impl ConicSolution {
    pub fn value(&self, idx: usize) -> f64 {
        self.values[idx]
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum CapabilityTier {
    /// Zero, nonnegative and second-order cones.
    SocOnly,
    /// Adds PSD and log-det cones.
    Full,
}

impl CapabilityTier {
    pub fn cones(self) -> Vec<ConeKind> {
        let mut v = vec![ConeKind::Zero, ConeKind::Nonnegative, ConeKind::SecondOrder];
        if self == Self::Full {
            v.extend([ConeKind::Psd, ConeKind::LogDet]);
        }
        v
    }
}

pub trait ConicBackend: Send + Sync {
    fn name(&self) -> &str;

    fn capabilities(&self) -> Vec<ConeKind>;

    fn solve(&self, problem: &ConicProblem, tolerance: f64) -> Result<ConicSolution>;

    /// Fails with a capability error if the problem needs cones this backend lacks.
    fn check_capabilities(&self, problem: &ConicProblem) -> Result<()> {
        let available = self.capabilities();
        let required: Vec<ConeKind> = problem.required_cones().into_iter().collect();
        if required.iter().all(|k| available.contains(k)) {
            Ok(())
        } else {
            Err(Error::Capability { required, available })
        }
    }
}

#[cfg(test)]
mod tests;
