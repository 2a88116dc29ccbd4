mod common;

use common::{interval, rel_diff, rng, square, Bench};
use parctrl_core::control::optimize_boundary;
use parctrl_core::fem::{BoundaryControl, TimeField};
use parctrl_core::scalar::{
    building_blocks, coefficients, compare_states, lambda_bar, monotonicity_check, restricted_cost, ComparisonSide,
    ScalarVariant,
};
use parctrl_core::state::solve_parabolic;
use parctrl_core::Error;
use proptest::prelude::*;
use rand::Rng;

const VARIANTS: [ScalarVariant; 4] = [
    ScalarVariant::ParabolicDirichlet,
    ScalarVariant::ParabolicRobin(5.0),
    ScalarVariant::Elliptic,
    ScalarVariant::EllipticRobin(5.0),
];

fn unit_q0(b: &Bench) -> BoundaryControl {
    BoundaryControl::constant(&b.grid, &vec![1.0; b.ops.num_gamma2()])
}

/// Vertex of the parabola through three points.
fn vertex(xs: [f64; 3], ys: [f64; 3]) -> f64 {
    let [x0, x1, x2] = xs;
    let [y0, y1, y2] = ys;
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    x1 - 0.5 * num / den
}

#[test]
fn three_point_fit_matches_closed_form() {
    for b in [interval(64, 1.0, 40), square(10, 1.0, 20)] {
        let q0 = unit_q0(&b);
        for v in VARIANTS {
            let c = lambda_bar(&b.ops, &b.spec, &q0, &b.grid, v).unwrap();
            let xs = [-1.0, 0.0, 1.0];
            let ys = xs.map(|l| restricted_cost(&b.ops, &b.spec, &q0, &b.grid, v, l).unwrap());
            assert!(rel_diff(vertex(xs, ys), c.lambda_opt) < 1e-10, "{v:?}");
            let h = |l: f64| restricted_cost(&b.ops, &b.spec, &q0, &b.grid, v, l).unwrap();
            assert!(h(c.lambda_opt) <= h(c.lambda_opt + 0.1) && h(c.lambda_opt) <= h(c.lambda_opt - 0.1));
            assert!(c.discriminant() < 0.0 && c.a > 0.0 && c.c >= 0.0);
        }
    }
}

#[test]
fn restricted_minimum_is_above_full_minimum() {
    let b = interval(64, 1.0, 40);
    let q0 = unit_q0(&b);
    for (v, bv) in [
        (ScalarVariant::ParabolicDirichlet, parctrl_core::state::Variant::Dirichlet),
        (ScalarVariant::ParabolicRobin(5.0), parctrl_core::state::Variant::Robin(5.0)),
    ] {
        let c = lambda_bar(&b.ops, &b.spec, &q0, &b.grid, v).unwrap();
        let full = optimize_boundary(&b.ops, &b.spec, &b.grid, 1e-10, bv).unwrap();
        assert!(c.minimum() >= full.cost);
    }
}

#[test]
fn target_on_free_trajectory_gives_zero() {
    let b = interval(32, 1.0, 20);
    let q0 = unit_q0(&b);
    for v in VARIANTS {
        let blocks = building_blocks(&b.ops, &b.spec, &q0, &b.grid, v).unwrap();
        let free = blocks.recombine(0.0);
        let mut spec = b.spec.clone();
        spec.z_d = if v.is_elliptic() {
            TimeField::constant(&b.grid, free.row(0))
        } else {
            TimeField(free)
        };
        let c = lambda_bar(&b.ops, &spec, &q0, &b.grid, v).unwrap();
        assert!(c.b.abs() < 1e-15 && c.lambda_opt.abs() < 1e-14, "{v:?}: {c:?}");
    }
}

#[test]
fn blocks_recombine_and_scale() {
    let b = square(8, 1.0, 10);
    let q0 = BoundaryControl::from_fn(&b.grid, b.ops.num_gamma2(), |t, i| 1.0 + t + 0.01 * i as f64);
    for v in [ScalarVariant::ParabolicDirichlet, ScalarVariant::ParabolicRobin(3.0)] {
        let blocks = building_blocks(&b.ops, &b.spec, &q0, &b.grid, v).unwrap();
        for lambda in [0.0, 1.0] {
            let direct = solve_parabolic(&b.ops, &b.spec, &q0.scaled(lambda), &b.grid, v.boundary()).unwrap();
            let diff = blocks.recombine(lambda).combine(1.0, &direct, -1.0).max_abs();
            assert!(diff < 1e-12);
        }
        let doubled = building_blocks(&b.ops, &b.spec, &q0.scaled(2.0), &b.grid, v).unwrap();
        assert!(doubled.u_q0.combine(1.0, &blocks.u_q0, -2.0).max_abs() < 1e-14);
    }
}

#[test]
fn zero_q0_is_rejected() {
    let b = interval(16, 1.0, 8);
    let q0 = BoundaryControl::zeros(&b.grid, 1);
    for v in VARIANTS {
        let err = building_blocks(&b.ops, &b.spec, &q0, &b.grid, v).unwrap_err();
        assert!(err.to_string().contains("q0 must be nonzero"));
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn minimizer_scales_contravariantly(seed in any::<u64>()) {
        let b = interval(32, 1.0, 20);
        let mut r = rng(seed);
        let q0 = BoundaryControl::from_fn(&b.grid, 1, |_, _| r.gen_range(0.1..2.0));
        let c: f64 = if r.gen_bool(0.5) { r.gen_range(0.1..10.0) } else { -r.gen_range(0.1..10.0) };
        for v in VARIANTS {
            let base = lambda_bar(&b.ops, &b.spec, &q0, &b.grid, v).unwrap();
            let scaled = lambda_bar(&b.ops, &b.spec, &q0.scaled(c), &b.grid, v).unwrap();
            prop_assert!(rel_diff(scaled.lambda_opt * c, base.lambda_opt) < 1e-12);
            prop_assert!(base.discriminant() < 0.0);
        }
    }
}

#[test]
fn coefficients_trend_with_horizon() {
    // Logged only: the per-unit-time coefficients against the stationary ones.
    let b = interval(32, 1.0, 4);
    let q0 = unit_q0(&b);
    let ell = lambda_bar(&b.ops, &b.spec, &q0, &b.grid, ScalarVariant::Elliptic).unwrap();
    for t in [1.0, 5.0, 25.0] {
        let bt = interval(32, t, (20.0 * t) as usize);
        let q0t = unit_q0(&bt);
        let blocks = building_blocks(&bt.ops, &bt.spec, &q0t, &bt.grid, ScalarVariant::ParabolicDirichlet).unwrap();
        let c = coefficients(&bt.ops, &bt.grid, bt.spec.m, &blocks);
        println!(
            "T = {t}: A/T = {:.6}, B/T = {:.6}, C/T = {:.6}, lambda = {:.6} (stationary {:.6}, {:.6}, {:.6}, {:.6})",
            c.a / t, c.b / t, c.c / t, c.lambda_opt, ell.a, ell.b, ell.c, ell.lambda_opt
        );
    }
}

fn side(b: &Bench, lambda: f64, g: f64, bb: f64) -> ComparisonSide {
    let n = b.ops.num_nodes();
    let mut v_b = b.spec.v_b.clone();
    for &i in &b.ops.dirichlet_nodes {
        v_b[i] = bb;
    }
    ComparisonSide {
        lambda,
        g: TimeField::constant(&b.grid, &vec![g; n]),
        b: vec![bb; b.ops.num_gamma1()],
        v_b,
    }
}

#[test]
fn identical_data_give_identical_states() {
    let b = interval(64, 1.0, 40);
    let q0 = unit_q0(&b);
    let r = monotonicity_check(&b.ops, &b.spec, &b.grid, 0.5, 0.5, &b.spec.g, &b.spec.g, &q0, ScalarVariant::ParabolicDirichlet, true)
        .unwrap();
    assert!(r.max_violation <= 1e-14 && r.holds);
}

#[test]
fn ordered_data_give_ordered_states() {
    for b in [interval(64, 1.0, 40), square(12, 1.0, 30)] {
        let n = b.ops.num_nodes();
        let g1 = TimeField::zeros(&b.grid, n);
        let g2 = TimeField::constant(&b.grid, &vec![1.0; n]);
        for v in VARIANTS {
            let q0 = unit_q0(&b);
            let r = monotonicity_check(&b.ops, &b.spec, &b.grid, 1.0, 0.0, &g1, &g2, &q0, v, true).unwrap();
            assert!(r.holds, "{v:?}: {r:?}");
            // Sign-reversed case: q0 < 0 with λ1 ≤ λ2.
            let neg = q0.scaled(-1.0);
            let r = monotonicity_check(&b.ops, &b.spec, &b.grid, 0.0, 1.0, &g1, &g2, &neg, v, true).unwrap();
            assert!(r.holds, "{v:?} reversed: {r:?}");
        }
        // Robin comparison with ordered boundary data and initial states.
        let q0 = unit_q0(&b);
        let r = compare_states(&b.ops, &b.grid, &side(&b, 2.0, 0.0, -0.5), &side(&b, 1.0, 0.5, 0.5), &q0, ScalarVariant::ParabolicRobin(10.0), true)
            .unwrap();
        assert!(r.holds, "{r:?}");
    }
}

#[test]
fn violated_hypotheses_are_named() {
    let b = interval(16, 1.0, 8);
    let q0 = unit_q0(&b);
    let g = &b.spec.g;
    let check = |l1, l2, g1: &TimeField, g2: &TimeField, q: &BoundaryControl, lumped| {
        monotonicity_check(&b.ops, &b.spec, &b.grid, l1, l2, g1, g2, q, ScalarVariant::ParabolicDirichlet, lumped)
    };
    let msg = |r: parctrl_core::Result<_>| match r {
        Err(Error::Precondition(m)) => m,
        other => panic!("expected a precondition error, got {other:?}"),
    };
    assert!(msg(check(1.0, 1.0, g, g, &q0, false)).contains("lumped"));
    assert!(msg(check(0.0, 1.0, g, g, &q0, true)).contains("lambda2 <= lambda1"));
    assert!(msg(check(1.0, 0.0, g, g, &q0.scaled(-1.0), true)).contains("lambda1 <= lambda2"));
    assert!(msg(check(1.0, 0.0, &g.scaled(2.0), g, &q0, true)).contains("g1 <= g2"));
    let mixed = BoundaryControl::from_fn(&b.grid, 1, |t, _| t - 0.5);
    assert!(msg(check(1.0, 0.0, g, g, &mixed, true)).contains("strictly"));
    let r = compare_states(&b.ops, &b.grid, &side(&b, 1.0, 0.0, 1.0), &side(&b, 1.0, 0.0, 0.0), &q0, ScalarVariant::ParabolicRobin(2.0), true);
    assert!(msg(r).contains("b1 <= b2"));
}
