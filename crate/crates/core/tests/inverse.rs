use noether_core::expr::{parse, ZeroTest, DEFAULT_SEED};
use noether_core::inverse_problem::{fit, verify_solution, LagrangianAnsatz, TensorTarget};
use noether_core::lagrangian::{corpus, lagrangian};

#[test]
fn alpha_family_is_recovered() {
    let ansatz = LagrangianAnsatz::default_basis(2);
    for alpha in [1.0, -0.5, 3.0] {
        let r = fit(&ansatz, &TensorTarget::alpha_family(2, alpha), 200, 1e-8, DEFAULT_SEED).unwrap();
        assert!(r.feasible && r.validation_residual <= 1e-8, "{r:?}");
        assert!((r.coefficient("z1^2 + z2^2").unwrap() - 0.5).abs() <= 1e-8);
        assert!((r.coefficient("u^2").unwrap() + alpha / 2.0).abs() <= 1e-8);
        let recovered = ansatz.instantiate(&r.values()).unwrap();
        let test = ZeroTest { tol: 1e-8, ..ZeroTest::default() };
        assert!(verify_solution(&recovered, &TensorTarget::alpha_family(2, alpha), &test).unwrap().holds);
    }
}

#[test]
fn perturbed_off_diagonal_is_infeasible() {
    let target = TensorTarget::alpha_family(2, 1.0).with_entry(1, 2, parse("u*z1").unwrap()).unwrap();
    let r = fit(&LagrangianAnsatz::default_basis(2), &target, 200, 1e-8, DEFAULT_SEED).unwrap();
    assert!(!r.feasible);
    assert!(r.validation_residual > 0.1);
    assert!(r.entry_residuals[0][1] > 0.1);
}

#[test]
fn basis_images_never_contain_u_times_z1() {
    // symbolic oracle: z1 L_{z2} for every basis element is free of the monomial u*z1
    let ansatz = LagrangianAnsatz::default_basis(2);
    for b in ansatz.basis() {
        let image = noether_core::expr::simplify(
            &(parse("z1").unwrap() * noether_core::expr::differentiate(b, &noether_core::expr::Var::Z(2))),
        );
        let coeff = noether_core::expr::differentiate(
            &noether_core::expr::differentiate(&image, &noether_core::expr::Var::U),
            &noether_core::expr::Var::Z(1),
        );
        assert!(coeff.is_zero(), "{b}: {image}");
    }
}

#[test]
fn fit_is_deterministic_for_a_seed() {
    let t = TensorTarget::alpha_family(2, 1.0);
    let a = fit(&LagrangianAnsatz::default_basis(2), &t, 60, 1e-8, 5).unwrap();
    let b = fit(&LagrangianAnsatz::default_basis(2), &t, 60, 1e-8, 5).unwrap();
    assert_eq!(a.values(), b.values());
    assert_eq!(a.validation_residual, b.validation_residual);
}

#[test]
fn round_trip_for_corpus_lagrangians_in_the_basis() {
    let ansatz = LagrangianAnsatz::default_basis(2);
    let cases = [
        (corpus::nonlinear_poisson("u^3 - u"), vec![0.5, 0.0, 0.0, -1.0, 0.0, 1.0, 0.0]),
        (corpus::potential_only("u^2"), vec![0.0, 0.0, 0.0, 0.0, 1.0, 0.0, 0.0]),
        (lagrangian(2, "2*z1^2 - z1*z2 + 1/2*(z1^2 + z2^2) + 3").unwrap(), vec![0.5, 2.0, -1.0, 0.0, 0.0, 0.0, 3.0]),
    ];
    for (l, expected) in cases {
        let target = TensorTarget::from_lagrangian(&l).unwrap();
        let r = fit(&ansatz, &target, 120, 1e-8, DEFAULT_SEED).unwrap();
        assert!(r.feasible);
        for (got, want) in r.values().iter().zip(&expected) {
            assert!((got - want).abs() <= 1e-8, "{l}: {:?}", r.values());
        }
        assert!(verify_solution(&l, &target, &ZeroTest::default()).unwrap().holds);
        assert!(r.condition_number.is_finite() && r.gram_condition.is_finite());
    }
}

#[test]
fn too_few_samples_is_an_input_error() {
    let t = TensorTarget::alpha_family(2, 1.0);
    assert!(fit(&LagrangianAnsatz::default_basis(2), &t, 20, 1e-8, 1).is_err());
}
