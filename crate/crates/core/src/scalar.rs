//! Scalar boundary control: the flux is restricted to `q = λ q0` and the
//! cost becomes the quadratic `H(λ) = A λ² + B λ + C`, minimized in closed
//! form. Also the comparison (monotonicity) checks for such controls.
//!
//! Elliptic variants use the final time level of `g`, `z_d` and `q0` as
//! their (time-independent) data.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BoundaryControl, DiscreteOperators, Frames, MassKind, TimeField, TimeGrid};
use crate::state::{EllipticSolver, ParabolicSolver, ProblemSpec, Variant};

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub enum ScalarVariant {
    ParabolicDirichlet,
    ParabolicRobin(f64),
    Elliptic,
    EllipticRobin(f64),
}

impl ScalarVariant {
    pub fn boundary(&self) -> Variant {
        match *self {
            ScalarVariant::ParabolicDirichlet | ScalarVariant::Elliptic => Variant::Dirichlet,
            ScalarVariant::ParabolicRobin(a) | ScalarVariant::EllipticRobin(a) => Variant::Robin(a),
        }
    }

    pub fn is_elliptic(&self) -> bool {
        matches!(self, ScalarVariant::Elliptic | ScalarVariant::EllipticRobin(_))
    }

    pub fn name(&self) -> &'static str {
        match self {
            ScalarVariant::ParabolicDirichlet => "parabolic",
            ScalarVariant::ParabolicRobin(_) => "parabolic-robin",
            ScalarVariant::Elliptic => "elliptic",
            ScalarVariant::EllipticRobin(_) => "elliptic-robin",
        }
    }
}

/// Superposition components of the state. Parabolic variants hold one row
/// per time level, elliptic variants a single row.
#[derive(Debug, Clone, PartialEq)]
pub struct BuildingBlocks {
    /// Initial state and `Gamma1` datum only.
    pub u_b: Frames,
    /// Unit flux `q0` only.
    pub u_q0: Frames,
    /// Internal source only.
    pub u_g: Frames,
    /// Target on the same rows.
    pub z_d: Frames,
    /// `q0` on the same rows.
    pub q0: Frames,
}

impl BuildingBlocks {
    /// `u_b + λ u_q0 + u_g`
    pub fn recombine(&self, lambda: f64) -> Frames {
        let mut u = self.u_b.combine(1.0, &self.u_g, 1.0);
        u.axpy(lambda, &self.u_q0);
        u
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadraticCoefficients {
    pub a: f64,
    pub b: f64,
    pub c: f64,
    pub lambda_opt: f64,
}

impl QuadraticCoefficients {
    pub fn value(&self, lambda: f64) -> f64 {
        (self.a * lambda + self.b) * lambda + self.c
    }

    pub fn discriminant(&self) -> f64 {
        self.b * self.b - 4.0 * self.a * self.c
    }

    pub fn minimum(&self) -> f64 {
        self.value(self.lambda_opt)
    }
}

fn last_row(f: &Frames) -> Frames {
    Frames::from_rows(vec![f.row(f.rows() - 1).to_vec()]).expect("single row")
}

fn check_q0(ops: &DiscreteOperators, grid: &TimeGrid, q0: &BoundaryControl, elliptic: bool) -> Result<()> {
    ops.check_control("q0", grid, q0)?;
    let rows = if elliptic { grid.steps()..=grid.steps() } else { 1..=grid.steps() };
    let nonzero = rows.into_iter().any(|k| q0.row(k).iter().any(|v| *v != 0.0));
    if nonzero {
        Ok(())
    } else {
        Err(Error::InvalidInput("q0 must be nonzero".into()))
    }
}

fn blocks_with_kind(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q0: &BoundaryControl,
    grid: &TimeGrid,
    variant: ScalarVariant,
    kind: MassKind,
) -> Result<BuildingBlocks> {
    spec.validate(ops, grid)?;
    check_q0(ops, grid, q0, variant.is_elliptic())?;
    let n = ops.num_nodes();
    let zero_b = vec![0.0; ops.num_gamma1()];
    if variant.is_elliptic() {
        let solver = EllipticSolver::new(ops, variant.boundary(), kind)?;
        let zero_g = vec![0.0; n];
        let zero_q = vec![0.0; ops.num_gamma2()];
        let g = spec.g.row(grid.steps());
        let q = q0.row(grid.steps());
        let single = |v: Vec<f64>| Frames::from_rows(vec![v]).expect("single row");
        Ok(BuildingBlocks {
            u_b: single(solver.solve(&zero_g, &zero_q, &spec.b)?),
            u_q0: single(solver.solve(&zero_g, q, &zero_b)?),
            u_g: single(solver.solve(g, &zero_q, &zero_b)?),
            z_d: last_row(&spec.z_d),
            q0: last_row(q0),
        })
    } else {
        let solver = ParabolicSolver::new(ops, variant.boundary(), grid, kind)?;
        let zero_v = vec![0.0; n];
        Ok(BuildingBlocks {
            u_b: solver.solve(&spec.v_b, &spec.b, None, None)?.0,
            u_q0: solver.solve(&zero_v, &zero_b, None, Some(q0))?.0,
            u_g: solver.solve(&zero_v, &zero_b, Some(&spec.g), None)?.0,
            z_d: spec.z_d.0.clone(),
            q0: q0.0.clone(),
        })
    }
}

/// Solves for the three superposition components.
pub fn building_blocks(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q0: &BoundaryControl,
    grid: &TimeGrid,
    variant: ScalarVariant,
) -> Result<BuildingBlocks> {
    blocks_with_kind(ops, spec, q0, grid, variant, MassKind::Consistent)
}

/// Rectangle rule over rows `1..=N`, or the single row of an elliptic block.
fn quadrature(grid: &TimeGrid, rows: usize, f: impl Fn(usize) -> f64) -> f64 {
    if rows == 1 {
        f(0)
    } else {
        grid.dt() * (1..rows).map(f).sum::<f64>()
    }
}

/// Coefficients of `H(λ)` and its minimizer `-B / (2A)`.
pub fn lambda_bar(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q0: &BoundaryControl,
    grid: &TimeGrid,
    variant: ScalarVariant,
) -> Result<QuadraticCoefficients> {
    let blocks = building_blocks(ops, spec, q0, grid, variant)?;
    let c = coefficients(ops, grid, spec.m, &blocks);
    if !(c.a > 0.0) {
        return Err(Error::Precondition(format!("quadratic coefficient A = {:e} is not positive", c.a)));
    }
    Ok(c)
}

/// `A`, `B`, `C` from precomputed building blocks.
pub fn coefficients(ops: &DiscreteOperators, grid: &TimeGrid, m: f64, blocks: &BuildingBlocks) -> QuadraticCoefficients {
    let rows = blocks.u_b.rows();
    let rest = blocks.u_b.combine(1.0, &blocks.u_g, 1.0).combine(1.0, &blocks.z_d, -1.0);
    let q_sq = quadrature(grid, rows, |k| ops.gamma2_gram.quad_form(blocks.q0.row(k)));
    let uq_sq = quadrature(grid, rows, |k| ops.mass.quad_form(blocks.u_q0.row(k)));
    let cross = quadrature(grid, rows, |k| ops.mass.bilinear(blocks.u_q0.row(k), rest.row(k)));
    let rest_sq = quadrature(grid, rows, |k| ops.mass.quad_form(rest.row(k)));
    let a = 0.5 * m * q_sq + 0.5 * uq_sq;
    QuadraticCoefficients {
        a,
        b: cross,
        c: 0.5 * rest_sq,
        lambda_opt: -cross / (2.0 * a),
    }
}

/// `½‖u - z_d‖²_H + (M/2)‖q‖²_Q` for the stationary problem with flux `q`,
/// using the final time level of `spec.g` and `spec.z_d`.
pub fn elliptic_cost(ops: &DiscreteOperators, spec: &ProblemSpec, q: &[f64], variant: Variant) -> Result<f64> {
    let last = spec.g.rows() - 1;
    let u = EllipticSolver::new(ops, variant, MassKind::Consistent)?.solve(spec.g.row(last), q, &spec.b)?;
    let r: Vec<f64> = u.iter().zip(spec.z_d.row(last)).map(|(a, b)| a - b).collect();
    Ok(0.5 * ops.mass.quad_form(&r) + 0.5 * spec.m * ops.gamma2_gram.quad_form(q))
}

/// `H(λ)` by a direct solve with flux `λ q0`, independent of the
/// building blocks.
pub fn restricted_cost(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q0: &BoundaryControl,
    grid: &TimeGrid,
    variant: ScalarVariant,
    lambda: f64,
) -> Result<f64> {
    if variant.is_elliptic() {
        let q: Vec<f64> = q0.row(grid.steps()).iter().map(|v| lambda * v).collect();
        elliptic_cost(ops, spec, &q, variant.boundary())
    } else {
        crate::control::cost_j_variant(ops, spec, &q0.scaled(lambda), grid, variant.boundary())
    }
}

/// Data of one side of a comparison.
#[derive(Debug, Clone, PartialEq)]
pub struct ComparisonSide {
    pub lambda: f64,
    pub g: TimeField,
    pub b: Vec<f64>,
    pub v_b: Vec<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonotonicityReport {
    /// `max(u1 - u2)` over all time levels and nodes.
    pub max_violation: f64,
    pub holds: bool,
}

pub const MONOTONICITY_TOL: f64 = 1e-12;

fn ordered(what: &str, lo: &[f64], hi: &[f64]) -> Result<()> {
    match lo.iter().zip(hi).position(|(a, b)| a > b) {
        Some(i) => Err(Error::Precondition(format!("{what} fails at index {i}"))),
        None => Ok(()),
    }
}

/// Compares the states of two scalar-control problems sharing `q0`.
/// Requires `(λ1 - λ2) q0 ≥ 0` with `q0` of one strict sign, `g1 ≤ g2`,
/// `b1 ≤ b2` and `v_b1 ≤ v_b2`; expects `u1 ≤ u2` everywhere.
pub fn compare_states(
    ops: &DiscreteOperators,
    grid: &TimeGrid,
    first: &ComparisonSide,
    second: &ComparisonSide,
    q0: &BoundaryControl,
    variant: ScalarVariant,
    use_lumped: bool,
) -> Result<MonotonicityReport> {
    if !use_lumped {
        return Err(Error::Precondition(
            "comparison requires lumped mass; the consistent-mass scheme is not monotone".into(),
        ));
    }
    if let Some((i, j, v)) = ops.stiffness.triplets().find(|&(i, j, v)| i != j && v > 1e-14) {
        return Err(Error::Precondition(format!(
            "mesh has an obtuse angle: stiffness entry ({i},{j}) = {v:e} is positive"
        )));
    }
    ops.check_control("q0", grid, q0)?;
    let rows: Vec<usize> = if variant.is_elliptic() { vec![grid.steps()] } else { (1..=grid.steps()).collect() };
    let values = rows.iter().flat_map(|&k| q0.row(k).iter().copied());
    let (pos, neg) = values.fold((true, true), |(p, n), v| (p && v > 0.0, n && v < 0.0));
    let dl = first.lambda - second.lambda;
    match (pos, neg) {
        (true, _) if dl >= 0.0 => {}
        (_, true) if dl <= 0.0 => {}
        (true, _) => return Err(Error::Precondition("q0 > 0 needs lambda2 <= lambda1".into())),
        (_, true) => return Err(Error::Precondition("q0 < 0 needs lambda1 <= lambda2".into())),
        _ => return Err(Error::Precondition("q0 must be strictly positive or strictly negative on Gamma2".into())),
    }
    for side in [first, second] {
        ops.check_field("source", grid, &side.g)?;
    }
    for &k in &rows {
        ordered("g1 <= g2", first.g.row(k), second.g.row(k))?;
    }
    ordered("b1 <= b2", &first.b, &second.b)?;
    if !variant.is_elliptic() {
        ordered("v_b1 <= v_b2", &first.v_b, &second.v_b)?;
    }
    let solve = |side: &ComparisonSide| -> Result<Frames> {
        let q = q0.scaled(side.lambda);
        if variant.is_elliptic() {
            let solver = EllipticSolver::new(ops, variant.boundary(), MassKind::Lumped)?;
            let u = solver.solve(side.g.row(grid.steps()), q.row(grid.steps()), &side.b)?;
            Frames::from_rows(vec![u])
        } else {
            let solver = ParabolicSolver::new(ops, variant.boundary(), grid, MassKind::Lumped)?;
            Ok(solver.solve(&side.v_b, &side.b, Some(&side.g), Some(&q))?.0)
        }
    };
    let u1 = solve(first)?;
    let u2 = solve(second)?;
    let max_violation = u1
        .as_slice()
        .iter()
        .zip(u2.as_slice())
        .map(|(a, b)| a - b)
        .fold(f64::NEG_INFINITY, f64::max);
    Ok(MonotonicityReport {
        max_violation,
        holds: max_violation <= MONOTONICITY_TOL,
    })
}

/// Comparison with shared `b` and initial state taken from `spec`.
#[allow(clippy::too_many_arguments)]
pub fn monotonicity_check(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    grid: &TimeGrid,
    lambda1: f64,
    lambda2: f64,
    g1: &TimeField,
    g2: &TimeField,
    q0: &BoundaryControl,
    variant: ScalarVariant,
    use_lumped: bool,
) -> Result<MonotonicityReport> {
    let side = |lambda: f64, g: &TimeField| ComparisonSide {
        lambda,
        g: g.clone(),
        b: spec.b.clone(),
        v_b: spec.v_b.clone(),
    };
    compare_states(ops, grid, &side(lambda1, g1), &side(lambda2, g2), q0, variant, use_lumped)
}
