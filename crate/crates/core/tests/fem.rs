mod common;

use parctrl_core::fem::{assemble, build_interval_mesh, build_rect_mesh, linalg, Side};
use proptest::prelude::*;

// (π²/4) / (1 + π²/4): smallest H1-Rayleigh quotient of the Laplacian on
// (0,1) with a Dirichlet end at 0.
const LAMBDA0_ORACLE: f64 = 0.711599560857999;
// coth(1): squared norm of the point trace at x = 1 on H1(0,1).
const TRACE_SQ_ORACLE: f64 = 1.3130352854993315;

#[test]
fn oracles_match_closed_forms() {
    let a = std::f64::consts::PI.powi(2) / 4.0;
    assert!((LAMBDA0_ORACLE - a / (1.0 + a)).abs() < 1e-15);
    assert!((TRACE_SQ_ORACLE - 1.0 / 1f64.tanh()).abs() < 1e-15);
}

#[test]
fn interval_spectral_constants_at_h_1_256() {
    let ops = assemble(&build_interval_mesh(256, 0.0, 1.0, Side::Left).unwrap()).unwrap();
    assert!((ops.lambda0 - LAMBDA0_ORACLE).abs() < 1e-3, "{}", ops.lambda0);
    assert!((ops.trace_norm.powi(2) - TRACE_SQ_ORACLE).abs() < 1e-3, "{}", ops.trace_norm);
    // Robin constant lies in (0, 1] and λ_α saturates at α = 1.
    assert!(ops.lambda1 > 0.0 && ops.lambda1 <= 1.0);
    assert_eq!(ops.lambda_alpha(10.0), ops.lambda1);
    assert!((ops.lambda_alpha(0.5) - 0.5 * ops.lambda1).abs() < 1e-15);
}

#[test]
fn square_constants_are_sane() {
    let ops = assemble(&build_rect_mesh(16, 16, &[Side::Left]).unwrap()).unwrap();
    // Only x-dependence is forced by a Dirichlet left edge, so λ0 sits near
    // the 1D value.
    assert!((ops.lambda0 - LAMBDA0_ORACLE).abs() < 1e-2);
    assert!((ops.domain_measure - 1.0).abs() < 1e-14);
    assert!(ops.stiffness.is_symmetric(1e-14));
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(24))]

    #[test]
    fn mass_totals_and_constant_nullspace(nx in 2usize..12, ny in 2usize..12) {
        let mesh = build_rect_mesh(nx, ny, &[Side::Bottom]).unwrap();
        let ops = assemble(&mesh).unwrap();
        let ones = vec![1.0; ops.num_nodes()];
        prop_assert!((ops.mass.quad_form(&ones) - 1.0).abs() < 1e-12);
        prop_assert!((ops.mass_lumped.quad_form(&ones) - 1.0).abs() < 1e-12);
        prop_assert!(linalg::norm2(&ops.stiffness.mul_vec(&ones)) < 1e-12);
        // Three Gamma2 edges of the unit square.
        prop_assert!((ops.boundary_mass_g2.quad_form(&ones) - 3.0).abs() < 1e-12);
        prop_assert!((ops.boundary_mass_g1.quad_form(&ones) - 1.0).abs() < 1e-12);
    }

    #[test]
    fn trace_inequality_holds(seed in any::<u64>(), cells in 4usize..40) {
        let ops = assemble(&build_interval_mesh(cells, 0.0, 1.0, Side::Left).unwrap()).unwrap();
        let mut rng = common::rng(seed);
        let u: Vec<f64> = (0..ops.num_nodes()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        let tr = ops.trace_gamma2(&u);
        let lhs = ops.inner_q(&tr, &tr).unwrap();
        let rhs = ops.trace_norm.powi(2) * ops.inner_v(&u, &u).unwrap();
        prop_assert!(lhs <= rhs * (1.0 + 1e-9));
    }

    #[test]
    fn coercivity_holds_on_v0(seed in any::<u64>()) {
        let ops = assemble(&build_rect_mesh(6, 5, &[Side::Left, Side::Top]).unwrap()).unwrap();
        let mut rng = common::rng(seed);
        let mut u: Vec<f64> = (0..ops.num_nodes()).map(|_| rand::Rng::gen_range(&mut rng, -1.0..1.0)).collect();
        for &i in &ops.dirichlet_nodes {
            u[i] = 0.0;
        }
        let a = ops.stiffness.quad_form(&u);
        prop_assert!(a >= ops.lambda0 * ops.inner_v(&u, &u).unwrap() * (1.0 - 1e-9));
    }
}
