//! Discrete adjoint states.
//!
//! The adjoint recursion is the algebraic transpose of the forward
//! backward-Euler map under the rectangle-rule pairing, so for a
//! homogeneous state `w = C(η)` and any source `r`
//!
//! ```text
//! Σ_k dt (w^k, r^k)_H = -Σ_k dt (η^k, p^k|Γ2)_Q
//! ```
//!
//! holds up to linear-solver roundoff.

use crate::error::Result;
use crate::fem::{DiscreteOperators, MassKind, TimeField, TimeGrid};
use crate::state::{ParabolicSolver, Variant};

/// Adjoint driven by an arbitrary source `r` (the tracking residual in the
/// optimality system).
pub fn solve_adjoint_with_source(
    ops: &DiscreteOperators,
    source: &TimeField,
    grid: &TimeGrid,
    variant: Variant,
) -> Result<TimeField> {
    ops.check_field("adjoint source", grid, source)?;
    ParabolicSolver::new(ops, variant, grid, MassKind::Consistent)?.solve_adjoint(source)
}

fn residual(ops: &DiscreteOperators, u: &TimeField, z_d: &TimeField, grid: &TimeGrid) -> Result<TimeField> {
    ops.check_field("state", grid, u)?;
    ops.check_field("target z_d", grid, z_d)?;
    Ok(u.combine(1.0, z_d, -1.0))
}

/// Adjoint of the Dirichlet problem for the state `u`.
pub fn solve_adjoint_dirichlet(
    ops: &DiscreteOperators,
    u: &TimeField,
    z_d: &TimeField,
    grid: &TimeGrid,
) -> Result<TimeField> {
    let r = residual(ops, u, z_d, grid)?;
    solve_adjoint_with_source(ops, &r, grid, Variant::Dirichlet)
}

/// Adjoint of the Robin problem for the state `u_alpha`.
pub fn solve_adjoint_robin(
    ops: &DiscreteOperators,
    u_alpha: &TimeField,
    z_d: &TimeField,
    alpha: f64,
    grid: &TimeGrid,
) -> Result<TimeField> {
    let variant = Variant::Robin(alpha);
    variant.validate()?;
    let r = residual(ops, u_alpha, z_d, grid)?;
    solve_adjoint_with_source(ops, &r, grid, variant)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::fem::{assemble, build_interval_mesh, BoundaryControl, Side};

    #[test]
    fn zero_source_gives_zero_adjoint() {
        let mesh = build_interval_mesh(16, 0.0, 1.0, Side::Left).unwrap();
        let ops = assemble(&mesh).unwrap();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let u = TimeField::from_fn(&grid, 17, |t, i| t + i as f64);
        let p = solve_adjoint_dirichlet(&ops, &u, &u, &grid).unwrap();
        assert!(p.as_slice().iter().all(|v| *v == 0.0));
        let p = solve_adjoint_robin(&ops, &u, &u, 4.0, &grid).unwrap();
        assert!(p.as_slice().iter().all(|v| *v == 0.0));
        assert!(solve_adjoint_robin(&ops, &u, &u, 0.0, &grid).is_err());
    }

    #[test]
    fn dirichlet_adjoint_vanishes_on_gamma1() {
        let mesh = build_interval_mesh(16, 0.0, 1.0, Side::Left).unwrap();
        let ops = assemble(&mesh).unwrap();
        let grid = TimeGrid::new(1.0, 8).unwrap();
        let u = TimeField::from_fn(&grid, 17, |t, i| (t * i as f64).cos());
        let z = TimeField::zeros(&grid, 17);
        let p = solve_adjoint_dirichlet(&ops, &u, &z, &grid).unwrap();
        for k in 0..=8 {
            assert_eq!(p.row(k)[0], 0.0);
        }
        assert!(p.row(8).iter().any(|v| *v != 0.0));
    }

    #[test]
    fn transpose_identity_small() {
        let mesh = build_interval_mesh(10, 0.0, 1.0, Side::Left).unwrap();
        let ops = assemble(&mesh).unwrap();
        let grid = TimeGrid::new(0.5, 6).unwrap();
        let eta = BoundaryControl::from_fn(&grid, 1, |t, _| 1.0 + t * t);
        let r = TimeField::from_fn(&grid, 11, |t, i| (i as f64 * 0.3 - t).sin());
        for variant in [Variant::Dirichlet, Variant::Robin(5.0)] {
            let solver = ParabolicSolver::new(&ops, variant, &grid, MassKind::Consistent).unwrap();
            let w = solver.solve(&[0.0; 11], &[0.0], None, Some(&eta)).unwrap();
            let p = solver.solve_adjoint(&r).unwrap();
            let lhs = ops.inner_script_h(&grid, &w, &r).unwrap();
            let rhs = -ops.inner_script_q(&grid, &eta, &ops.trace_gamma2_field(&p)).unwrap();
            assert!((lhs - rhs).abs() <= 1e-12 * lhs.abs().max(1.0), "{lhs} vs {rhs}");
        }
    }
}
