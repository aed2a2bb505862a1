use noether_core::expr::parse;
use noether_core::fields::{eval_operator, integrate, plateau_check, functional_value, Grid, ScalarField};
use noether_core::lagrangian::{corpus, euler_lagrange, lagrangian, noether};
use noether_core::pde_solver::{pointwise_defect, residual_pair, solve, DirichletProblem, NewtonParams};
use noether_core::Error;
use proptest::prelude::*;
use proptest::test_runner::{Config, RngSeed};

const PI: f64 = std::f64::consts::PI;

fn unit(n: usize) -> Grid {
    Grid::unit_square(n).unwrap()
}

#[test]
fn el_of_helmholtz_on_exact_solution_is_second_order() {
    let op = euler_lagrange(&corpus::nonlinear_poisson("1/2*u^2")).residual;
    let err = |n| {
        let u = ScalarField::from_fn(unit(n), |x, _| x.exp());
        eval_operator(&op, &u, &Default::default()).unwrap().max_abs()
    };
    let (a, b) = (err(33), err(65));
    assert!((a / b).log2() > 1.9);
}

#[test]
fn constant_field_solves_noether_but_not_el() {
    let l = corpus::potential_only("u");
    let u = ScalarField::constant(unit(17), -1.5);
    for c in noether(&l).components {
        let f = eval_operator(&c, &u, &Default::default()).unwrap();
        assert!(f.values().iter().all(|v| *v == 0.0));
    }
    let pair = residual_pair(&corpus::nonlinear_poisson("u"), &u).unwrap();
    assert!(pair.el.values().iter().all(|v| *v == 1.0));
}

#[test]
fn functional_of_constant_potential() {
    let g = Grid::new(33, 17, (0.0, 2.0), (-1.0, 0.5)).unwrap();
    let u = ScalarField::constant(g, 3.0);
    let l = corpus::potential_only("u^2");
    let j = integrate(&ScalarField::constant(g, 9.0));
    assert!((j - 9.0 * g.area()).abs() < 1e-12);
    // the interior quadrature drops the boundary ring, so compare against the nodal rule on the same support
    let interior = functional_value(l.body(), &u, &l.param_binding()).unwrap();
    assert!(interior > 0.0 && interior < j);
}

#[test]
fn identity_defect_converges_and_pointwise_form_is_roundoff() {
    let l = lagrangian(2, "1/2*(1 + x1^2)*(z1^2 + z2^2) + u^3").unwrap();
    let mut norms = Vec::new();
    for n in [33, 65, 129] {
        let u = ScalarField::from_fn(unit(n), |x, y| (PI * x).sin() * (2.0 * PI * y).cos() + x * y);
        norms.push(residual_pair(&l, &u).unwrap().defect_norm());
        assert!(pointwise_defect(&l, &u).unwrap() < 1e-11);
    }
    for w in norms.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.8, "{norms:?}");
    }
}

#[test]
fn helmholtz_solution_converges_at_second_order() {
    let l = corpus::nonlinear_poisson("1/2*u^2");
    let mut errors = Vec::new();
    for n in [17, 33, 65] {
        let p = DirichletProblem::new(l.clone(), unit(n), parse("exp(x1)").unwrap()).unwrap();
        let r = solve(&p).unwrap();
        assert!(r.residual <= p.newton().tol);
        let exact = ScalarField::from_fn(unit(n), |x, _| x.exp());
        errors.push(r.solution.max_abs_diff(&exact));
        assert!(r.residuals.noether_norm() <= 10.0 * (p.newton().tol + unit(n).h().powi(2)));
    }
    for w in errors.windows(2) {
        assert!((w[0] / w[1]).log2() >= 1.9, "{errors:?}");
    }
}

#[test]
fn double_well_converges_from_blend() {
    let l = corpus::nonlinear_poisson("u^3 - u");
    let p = DirichletProblem::new(l, unit(33), parse("x1 - x2").unwrap()).unwrap();
    let r = solve(&p).unwrap();
    assert!(r.converged);
    assert!(r.tail_ratios.iter().all(|q| q.is_finite() && *q < 1e6));
}

#[test]
fn p_laplacian_regularised_solve() {
    let l = corpus::p_laplacian(3.0, 1e-3, "u");
    let p = DirichletProblem::new(l, unit(17), parse("x1 + x2^2").unwrap()).unwrap();
    let r = solve(&p).unwrap();
    assert!(r.residual <= 1e-8);
}

#[test]
fn torsion_solution_has_no_plateau() {
    let g = unit(65);
    let p = DirichletProblem::new(corpus::nonlinear_poisson("u"), g, parse("0").unwrap()).unwrap();
    let r = solve(&p).unwrap();
    assert!(!plateau_check(&r.solution, g.h(), 3).has_interior_point);
    assert!(plateau_check(&ScalarField::constant(g, 1.0), g.h(), 3).has_interior_point);
    // the minimum sits at the centre
    let centre = r.solution.get(32, 32);
    assert!(r.solution.values().iter().all(|v| *v >= centre));
}

#[test]
fn domain_error_in_lagrangian_names_the_node() {
    let l = lagrangian(2, "1/2*(z1^2 + z2^2) + u*log(u)").unwrap();
    let p = DirichletProblem::new(l, unit(9), parse("x1 - 1/2").unwrap()).unwrap();
    assert!(matches!(solve(&p), Err(Error::DomainAtNode { .. })));
}

#[test]
fn invalid_newton_parameters_are_rejected() {
    let p = DirichletProblem::new(corpus::nonlinear_poisson("u"), unit(9), parse("0").unwrap()).unwrap();
    assert!(p.clone().with_newton(NewtonParams { tol: 0.0, ..NewtonParams::default() }).is_err());
    assert!(p.with_newton(NewtonParams { damping: 1.5, ..NewtonParams::default() }).is_err());
}

proptest! {
    #![proptest_config(Config { cases: 24, rng_seed: RngSeed::Fixed(3), ..Config::default() })]

    #[test]
    fn linear_fields_have_exact_jets(a in -3.0f64..3.0, b in -3.0f64..3.0, c in -3.0f64..3.0) {
        let u = ScalarField::from_fn(unit(9), |x, y| a * x + b * y + c);
        for p in noether_core::fields::jet(&u).points() {
            prop_assert!((p.z[0] - a).abs() < 1e-12 && (p.z[1] - b).abs() < 1e-12);
            prop_assert!(p.w.iter().flatten().all(|w| w.abs() < 1e-10));
        }
    }

    #[test]
    fn trapezoid_is_exact_on_bilinear_data(a in -2.0f64..2.0, b in -2.0f64..2.0, c in -2.0f64..2.0, d in -2.0f64..2.0) {
        let g = Grid::new(7, 11, (-1.0, 1.5), (0.0, 2.0)).unwrap();
        let f = ScalarField::from_fn(g, |x, y| a + b * x + c * y + d * x * y);
        let (ix, iy) = ((1.5f64.powi(2) - 1.0) / 2.0, 2.0);
        let exact = a * 2.5 * 2.0 + b * ix * 2.0 + c * 2.5 * iy + d * ix * iy;
        prop_assert!((integrate(&f) - exact).abs() < 1e-12);
    }

    #[test]
    fn converged_solves_satisfy_noether(c in 0.2f64..1.5, k in 0.5f64..2.0) {
        let l = corpus::nonlinear_poisson("u^3/3");
        let g = unit(17);
        let bc = parse(&format!("{c}*x1 + {k}*x2^2")).unwrap();
        let p = DirichletProblem::new(l, g, bc).unwrap();
        let r = solve(&p).unwrap();
        let zmax = r.solution.values().iter().fold(0.0f64, |m, v| m.max(v.abs())) * 10.0;
        prop_assert!(r.residuals.noether_norm() <= p.newton().tol * zmax + 200.0 * g.h().powi(2));
    }
}
