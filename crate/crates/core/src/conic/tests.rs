use super::*;
use approx::assert_relative_eq;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn solve(p: &ConicProblem) -> ConicSolution {
    ClarabelBackend::default().solve(p, 1e-7).unwrap()
}

#[test]
fn bound_on_scalar() {
    let mut p = ConicProblem::new();
    let t = p.scalar("t");
    p.maximize(LinExpr::var(t));
    p.le("t<=1", &LinExpr::var(t), &LinExpr::constant(1.0));
    let s = solve(&p);
    assert_eq!(s.status, SolveStatus::Optimal);
    assert_relative_eq!(s.value(t), 1.0, epsilon = 1e-7);
}

#[test]
fn norm_ball() {
    let mut p = ConicProblem::new();
    let x = p.scalar("x");
    let t = p.scalar("t");
    p.maximize(LinExpr::var(t));
    p.soc("|x|<=1", LinExpr::constant(1.0), vec![LinExpr::var(x)]);
    p.le("t<=x", &LinExpr::var(t), &LinExpr::var(x));
    let s = solve(&p);
    assert!(s.status.usable());
    assert_relative_eq!(s.value(t), 1.0, epsilon = 1e-6);
}

#[test]
fn log_det_with_trace_budget() {
    let mut p = ConicProblem::new();
    let t = p.scalar("t");
    let om = p.variable("omega", 2, 2);
    let e = |r, c| LinExpr::var(om.at(r, c));
    p.maximize(LinExpr::var(t));
    p.le("trace", &e(0, 0).plus(&e(1, 1)), &LinExpr::constant(2.0));
    p.eq_zero("sym", e(0, 1).minus(&e(1, 0)));
    p.log_det("logdet", LinExpr::var(t), 2, vec![e(0, 0), e(0, 1), e(1, 0), e(1, 1)]);
    let s = solve(&p);
    assert!(s.status.usable(), "{:?}", s.status);
    assert!(s.value(t).abs() < 1e-6);
    assert_relative_eq!(s.value(om.at(0, 0)), 1.0, epsilon = 1e-4);
    assert!(s.value(om.at(0, 1)).abs() < 1e-4);
    // grid over diagonal splits never beats the symmetric point
    let best = (1..200).map(|k| {
        let a = 2.0 * k as f64 / 200.0;
        (a * (2.0 - a)).ln()
    });
    assert!(best.fold(f64::NEG_INFINITY, f64::max) <= s.value(t) + 1e-6);
}

#[test]
fn complex_scalar_lift_preserves_norm() {
    let mut p = ConicProblem::new();
    let Lifted::General(z) = lift_complex(&mut p, "z", (1, 1), LiftRole::General).unwrap() else {
        unreachable!()
    };
    let mut x = vec![0.0; p.num_vars];
    z.write(&CMat::from_element(1, 1, Complex64::new(3.0, 4.0)), &mut x);
    assert_eq!(x, vec![3.0, 4.0]);
    assert_relative_eq!(x.iter().map(|v| v * v).sum::<f64>().sqrt(), 5.0);
}

#[test]
fn hermitian_one_by_one_is_nonnegativity() {
    let mut p = ConicProblem::new();
    let Lifted::Hermitian(h) = lift_complex(&mut p, "w", (1, 1), LiftRole::Hermitian).unwrap() else {
        unreachable!()
    };
    assert_eq!(p.num_vars, 1);
    p.psd("psd", 2, h.embedding(0.0));
    p.maximize(LinExpr::var(h.diag(0)).scaled(-1.0));
    let s = solve(&p);
    assert!(s.value(h.diag(0)).abs() < 1e-6);
    assert!(s.max_residual <= 1e-7);
}

#[test]
fn random_lift_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    for _ in 0..20 {
        let (m, n) = (rng.gen_range(1..5), rng.gen_range(1..5));
        let a = CMat::from_fn(m, n, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let mut p = ConicProblem::new();
        let v = p.complex_variable("a", m, n);
        let mut x = vec![0.0; p.num_vars];
        v.write(&a, &mut x);
        assert!((a.norm() - x.iter().map(|t| t * t).sum::<f64>().sqrt()).abs() < 1e-12);
        assert_eq!(v.reconstruct(&x), a);

        let b = CMat::from_fn(m, m, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
        let herm = &b + b.adjoint();
        let h = p.hermitian_variable("h", m);
        let mut x = vec![0.0; p.num_vars];
        h.write(&herm, &mut x);
        assert!((h.reconstruct(&x) - &herm).norm() < 1e-14);
        let probe = CMat::from_fn(m, m, |_, _| Complex64::new(rng.gen::<f64>(), rng.gen::<f64>()));
        let direct = (&herm * &probe).trace().re;
        assert!((h.trace_with(&probe).eval(&x) - direct).abs() < 1e-12);
    }
}

#[test]
fn capability_tier_is_enforced() {
    let mut p = ConicProblem::new();
    let t = p.scalar("t");
    p.maximize(LinExpr::var(t));
    p.log_det("ld", LinExpr::var(t), 1, vec![LinExpr::constant(1.0)]);
    let err = ClarabelBackend::with_tier(CapabilityTier::SocOnly).solve(&p, 1e-7).unwrap_err();
    assert!(matches!(err, Error::Capability { .. }));
}

#[test]
fn repeat_solves_agree_and_residual_is_reproducible() {
    let mut p = ConicProblem::new();
    let x = p.complex_variable("x", 2, 1);
    let t = p.scalar("t");
    p.maximize(LinExpr::var(t));
    let v: Vec<LinExpr> = (0..2).flat_map(|r| [LinExpr::var(x.re(r, 0)), LinExpr::var(x.im(r, 0))]).collect();
    p.squared_norm_le("power", v, LinExpr::constant(2.0));
    p.le("t", &LinExpr::var(t), &LinExpr::var(x.re(0, 0)).plus(&LinExpr::var(x.im(1, 0))));
    let a = solve(&p);
    let b = solve(&p);
    assert!((a.objective_value - b.objective_value).abs() < 1e-8);
    assert_relative_eq!(a.objective_value, 2.0, epsilon = 1e-6);
    assert!((p.max_residual(&a.values) - a.max_residual).abs() < 1e-9);
}

#[test]
fn infeasible_problem_is_reported() {
    let mut p = ConicProblem::new();
    let x = p.scalar("x");
    p.maximize(LinExpr::var(x));
    p.nonneg("x>=1", LinExpr::var(x).offset(-1.0));
    p.nonneg("x<=0", LinExpr::var(x).scaled(-1.0));
    assert_eq!(solve(&p).status, SolveStatus::Infeasible);
}

#[test]
fn dump_lists_every_constraint() {
    let mut p = ConicProblem::new();
    let t = p.scalar("t");
    p.maximize(LinExpr::var(t));
    p.le("cap", &LinExpr::var(t), &LinExpr::constant(1.0));
    let d = p.dump();
    assert!(d.starts_with("vars 1\n"));
    assert!(d.contains("nonneg 1 cap"));
}

#[test]
fn diagonal_log_det_uses_exponential_cones() {
    let mut p = ConicProblem::new();
    let t = p.scalar("t");
    let x = p.variable("x", 3, 1);
    let mut entries = vec![LinExpr::default(); 9];
    let mut sum = LinExpr::default();
    for j in 0..3 {
        entries[j * 3 + j] = LinExpr::var(x.at(j, 0));
        sum.push(x.at(j, 0), 1.0);
    }
    p.maximize(LinExpr::var(t));
    p.le("budget", &sum, &LinExpr::constant(3.0));
    p.log_det("logdet", LinExpr::var(t), 3, entries);
    let s = solve(&p);
    assert!(s.status.usable(), "{:?}", s.status);
    assert!(s.value(t).abs() < 1e-6);
    for j in 0..3 {
        assert_relative_eq!(s.value(x.at(j, 0)), 1.0, epsilon = 1e-4);
    }
}

#[test]
fn cholesky_variable_round_trip() {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let n = 4;
    let a = CMat::from_fn(n, n, |_, _| Complex64::new(rng.gen::<f64>() - 0.5, rng.gen::<f64>() - 0.5));
    let h = &a * a.adjoint() + CMat::identity(n, n);
    let l = crate::linalg::cholesky_factor(&h).unwrap();
    let mut p = ConicProblem::new();
    let v = p.cholesky_variable("L", n);
    assert_eq!(p.num_vars, n * n);
    let mut x = vec![0.0; p.num_vars];
    v.write(&l, &mut x);
    assert!((v.factor(&x) - &l).norm() < 1e-14);
    assert!((v.reconstruct(&x) - &h).norm() < 1e-12);
    let logdiag: f64 = (0..n).map(|j| x[v.diag(j)].ln()).sum();
    assert_relative_eq!(2.0 * logdiag, crate::linalg::hermitian_logdet(&h).unwrap(), epsilon = 1e-12);
}

#[test]
fn factor_log_det_with_frobenius_budget() {
    // max log det(L Lᴴ) s.t. ‖L‖² ≤ n is attained at L = I
    let n = 3;
    let mut p = ConicProblem::new();
    let t = p.scalar("t");
    let v = p.cholesky_variable("L", n);
    let mut norm = Vec::new();
    for a in 0..n {
        for b in 0..=a {
            let e = v.entry(a, b);
            norm.push(e.re);
            norm.push(e.im);
        }
    }
    p.maximize(LinExpr::var(t));
    p.squared_norm_le("budget", norm, LinExpr::constant(n as f64));
    p.log_det("logdet", LinExpr::var(t).scaled(0.5), n, v.diagonal_matrix());
    let s = solve(&p);
    assert!(s.status.usable(), "{:?}", s.status);
    assert!(s.value(t).abs() < 1e-5);
    assert!((v.reconstruct(&s.values) - CMat::identity(n, n)).norm() < 1e-3);
}
