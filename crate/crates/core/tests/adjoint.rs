mod common;

use common::{interval, random_control, random_field, rel_diff, rng, square};
use parctrl_core::adjoint::{solve_adjoint_dirichlet, solve_adjoint_robin, solve_adjoint_with_source};
use parctrl_core::fem::{BoundaryControl, MassKind, TimeField};
use parctrl_core::state::{solve_parabolic_dirichlet, solve_parabolic_robin, ParabolicSolver, Variant};
use proptest::prelude::*;
use rand::Rng;

proptest! {
    #![proptest_config(ProptestConfig::with_cases(20))]

    /// `(w_η, r)_scriptH = -(η, p_r|Γ2)_scriptQ` with `w_η` the state driven
    /// by flux `η` alone and `p_r` the adjoint with source `r`.
    #[test]
    fn state_and_adjoint_maps_are_transposes(seed in any::<u64>(), two_d in any::<bool>(), robin in any::<bool>()) {
        let b = if two_d { square(8, 1.0, 15) } else { interval(40, 1.0, 25) };
        let mut r = rng(seed);
        let variant = if robin { Variant::Robin(r.gen_range(0.5..100.0)) } else { Variant::Dirichlet };
        let eta = random_control(&mut r, &b);
        let src = random_field(&mut r, &b);
        let solver = ParabolicSolver::new(&b.ops, variant, &b.grid, MassKind::Consistent).unwrap();
        let w = solver.solve(&vec![0.0; b.ops.num_nodes()], &vec![0.0; b.ops.num_gamma1()], None, Some(&eta)).unwrap();
        let p = solve_adjoint_with_source(&b.ops, &src, &b.grid, variant).unwrap();
        let lhs = b.ops.inner_script_h(&b.grid, &w, &src).unwrap();
        let rhs = -b.ops.inner_script_q(&b.grid, &eta, &b.ops.trace_gamma2_field(&p)).unwrap();
        prop_assert!(rel_diff(lhs, rhs) < 1e-11, "{} vs {}", lhs, rhs);
    }

    /// `‖p1 - p2‖_{L2(V)} ≤ ‖u1 - u2‖_scriptH / λ` for adjoints driven by two states.
    #[test]
    fn adjoint_stability_estimate(seed in any::<u64>(), robin in any::<bool>()) {
        let b = square(8, 1.0, 15);
        let mut r = rng(seed);
        let u1 = random_field(&mut r, &b);
        let u2 = random_field(&mut r, &b);
        let (p1, p2, lambda) = if robin {
            let alpha = r.gen_range(0.2..20.0);
            (
                solve_adjoint_robin(&b.ops, &u1, &b.spec.z_d, alpha, &b.grid).unwrap(),
                solve_adjoint_robin(&b.ops, &u2, &b.spec.z_d, alpha, &b.grid).unwrap(),
                b.ops.lambda_alpha(alpha),
            )
        } else {
            (
                solve_adjoint_dirichlet(&b.ops, &u1, &b.spec.z_d, &b.grid).unwrap(),
                solve_adjoint_dirichlet(&b.ops, &u2, &b.spec.z_d, &b.grid).unwrap(),
                b.ops.lambda0,
            )
        };
        let lhs = b.ops.norm_l2v(&b.grid, &p1.combine(1.0, &p2, -1.0)).unwrap();
        let rhs = b.ops.norm_script_h(&b.grid, &u1.combine(1.0, &u2, -1.0)).unwrap() / lambda;
        prop_assert!(lhs <= rhs * (1.0 + 1e-9), "{} > {}", lhs, rhs);
    }
}

#[test]
fn duality_with_tracking_residual() {
    // C(η) = u_η - u_0 against u_q - z_d, both variants.
    let b = interval(64, 1.0, 40);
    let mut r = rng(7);
    for variant in [Variant::Dirichlet, Variant::Robin(5.0)] {
        let spec = b.spec.with_alpha(variant.alpha());
        for _ in 0..5 {
            let q = random_control(&mut r, &b);
            let eta = random_control(&mut r, &b);
            let solve = |c: &BoundaryControl| match variant {
                Variant::Dirichlet => solve_parabolic_dirichlet(&b.ops, &spec, c, &b.grid).unwrap(),
                Variant::Robin(_) => solve_parabolic_robin(&b.ops, &spec, c, &b.grid).unwrap(),
            };
            let u_q = solve(&q);
            let c_eta = solve(&eta).combine(1.0, &solve(&BoundaryControl::zeros(&b.grid, 1)), -1.0);
            let p = match variant {
                Variant::Dirichlet => solve_adjoint_dirichlet(&b.ops, &u_q, &spec.z_d, &b.grid).unwrap(),
                Variant::Robin(a) => solve_adjoint_robin(&b.ops, &u_q, &spec.z_d, a, &b.grid).unwrap(),
            };
            let lhs = b.ops.inner_script_h(&b.grid, &c_eta, &u_q.combine(1.0, &spec.z_d, -1.0)).unwrap();
            let rhs = -b.ops.inner_script_q(&b.grid, &eta, &b.ops.trace_gamma2_field(&p)).unwrap();
            assert!(rel_diff(lhs, rhs) < 1e-10, "{variant:?}: {lhs} vs {rhs}");
        }
    }
}

#[test]
fn robin_adjoint_approaches_dirichlet() {
    let b = interval(128, 1.0, 50);
    let q = BoundaryControl::constant(&b.grid, &[0.4]);
    let u = solve_parabolic_dirichlet(&b.ops, &b.spec, &q, &b.grid).unwrap();
    let p = solve_adjoint_dirichlet(&b.ops, &u, &b.spec.z_d, &b.grid).unwrap();
    let mut prev = f64::INFINITY;
    for alpha in [10.0, 1e2, 1e3, 1e4] {
        let spec = b.spec.with_alpha(Some(alpha));
        let ua = solve_parabolic_robin(&b.ops, &spec, &q, &b.grid).unwrap();
        let pa = solve_adjoint_robin(&b.ops, &ua, &spec.z_d, alpha, &b.grid).unwrap();
        let err = b.ops.norm_l2v(&b.grid, &pa.combine(1.0, &p, -1.0)).unwrap();
        assert!(err < prev, "alpha {alpha}");
        prev = err;
    }
}

#[test]
fn diagnostic_first_row_is_one_more_homogeneous_step() {
    let b = interval(16, 1.0, 8);
    let src = TimeField::from_fn(&b.grid, 17, |t, i| t * i as f64);
    let solver = ParabolicSolver::new(&b.ops, Variant::Dirichlet, &b.grid, MassKind::Consistent).unwrap();
    let p = solver.solve_adjoint(&src).unwrap();
    // Changing the source at step 0 must not change anything.
    let mut src2 = src.clone();
    src2.row_mut(0).fill(100.0);
    assert_eq!(solver.solve_adjoint(&src2).unwrap(), p);
    assert!(p.row(0).iter().any(|v| *v != 0.0));
}

#[test]
fn grid_mismatch_is_rejected() {
    let b = interval(16, 1.0, 8);
    let u = TimeField::zeros(&parctrl_core::fem::TimeGrid::new(1.0, 9).unwrap(), 17);
    assert!(solve_adjoint_dirichlet(&b.ops, &u, &b.spec.z_d, &b.grid).is_err());
}
