//! Forward solvers for the parabolic problems (Dirichlet or Robin condition
//! on `Gamma1`, prescribed flux on `Gamma2`) and their elliptic
//! counterparts.
//!
//! Time stepping is backward Euler. With `A = M + dt K_α` the step reads
//!
//! ```text
//! A u^k = M u^{k-1} + dt (M g^k - B_G2 q^k [+ α B_G1 b])
//! ```
//!
//! where the Dirichlet variant keeps `u^k = b` on `Gamma1` by eliminating
//! those rows and lifting the known values to the right-hand side.

use crate::error::{shape_check, Error, Result};
use crate::fem::linalg::{CsrMatrix, SpdSolver, DEFAULT_SOLVER_TOL};
use crate::fem::{BoundaryControl, DiscreteOperators, MassKind, TimeField, TimeGrid};

/// Boundary condition on `Gamma1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub enum Variant {
    /// `u = b` (the α → ∞ limit).
    Dirichlet,
    /// `-∂u/∂n = α (u - b)` with finite `α > 0`.
    Robin(f64),
}

impl Variant {
    pub fn from_alpha(alpha: Option<f64>) -> Self {
        match alpha {
            None => Variant::Dirichlet,
            Some(a) if a.is_infinite() => Variant::Dirichlet,
            Some(a) => Variant::Robin(a),
        }
    }

    pub fn validate(&self) -> Result<()> {
        match *self {
            Variant::Robin(a) if !(a > 0.0) || !a.is_finite() => Err(Error::InvalidInput(format!(
                "heat transfer coefficient must be finite and positive, got {a}"
            ))),
            _ => Ok(()),
        }
    }

    pub fn alpha(&self) -> Option<f64> {
        match *self {
            Variant::Dirichlet => None,
            Variant::Robin(a) => Some(a),
        }
    }
}

/// Data of one heat-conduction control problem.
#[derive(Debug, Clone, PartialEq)]
pub struct ProblemSpec {
    /// Internal energy source.
    pub g: TimeField,
    /// Temperature datum on the `Gamma1` nodes.
    pub b: Vec<f64>,
    /// Initial temperature; equals `b` on `Gamma1`.
    pub v_b: Vec<f64>,
    /// Tracking target.
    pub z_d: TimeField,
    /// Boundary control weight.
    pub m: f64,
    /// Distributed control weight.
    pub m1: f64,
    /// Heat transfer coefficient; `None` means the Dirichlet limit.
    pub alpha: Option<f64>,
}

impl ProblemSpec {
    #[allow(clippy::too_many_arguments)]
    pub fn new(
        ops: &DiscreteOperators,
        grid: &TimeGrid,
        g: TimeField,
        b: Vec<f64>,
        v_b: Vec<f64>,
        z_d: TimeField,
        m: f64,
        m1: f64,
        alpha: Option<f64>,
    ) -> Result<Self> {
        let spec = Self {
            g,
            b,
            v_b,
            z_d,
            m,
            m1,
            alpha,
        };
        spec.validate(ops, grid)?;
        Ok(spec)
    }

    pub fn validate(&self, ops: &DiscreteOperators, grid: &TimeGrid) -> Result<()> {
        ops.check_field("source g", grid, &self.g)?;
        ops.check_field("target z_d", grid, &self.z_d)?;
        shape_check("Gamma1 datum b", ops.num_gamma1(), self.b.len(), self.b.len() == ops.num_gamma1())?;
        shape_check("initial state v_b", ops.num_nodes(), self.v_b.len(), self.v_b.len() == ops.num_nodes())?;
        if !(self.m > 0.0) {
            return Err(Error::InvalidInput(format!("control weight M must be positive, got {}", self.m)));
        }
        if !(self.m1 > 0.0) {
            return Err(Error::InvalidInput(format!("distributed weight M1 must be positive, got {}", self.m1)));
        }
        Variant::from_alpha(self.alpha).validate()?;
        let mismatch = ops
            .trace_gamma1(&self.v_b)
            .iter()
            .zip(&self.b)
            .fold(0.0_f64, |m, (v, b)| m.max((v - b).abs()));
        if mismatch != 0.0 {
            return Err(Error::InvalidInput(format!(
                "initial state differs from b on Gamma1 by {mismatch:e}"
            )));
        }
        Ok(())
    }

    pub fn variant(&self) -> Variant {
        Variant::from_alpha(self.alpha)
    }

    pub fn with_alpha(&self, alpha: Option<f64>) -> Self {
        Self {
            alpha,
            ..self.clone()
        }
    }
}

/// Backward-Euler stepper with its system matrix factored once.
#[derive(Debug, Clone)]
pub struct ParabolicSolver<'a> {
    ops: &'a DiscreteOperators,
    variant: Variant,
    kind: MassKind,
    dt: f64,
    steps: usize,
    system: CsrMatrix,
    factor: SpdSolver,
}

impl<'a> ParabolicSolver<'a> {
    pub fn new(ops: &'a DiscreteOperators, variant: Variant, grid: &TimeGrid, kind: MassKind) -> Result<Self> {
        variant.validate()?;
        let dt = grid.dt();
        let mut operator = ops.stiffness.clone();
        if let Variant::Robin(alpha) = variant {
            operator = operator.linear_combination(1.0, ops.gamma1_mass(kind), alpha);
        }
        let system = ops.mass_matrix(kind).linear_combination(1.0, &operator, dt);
        let factor = match variant {
            Variant::Dirichlet => SpdSolver::new(&system.principal_submatrix(&ops.free_nodes), DEFAULT_SOLVER_TOL)?,
            Variant::Robin(_) => SpdSolver::new(&system, DEFAULT_SOLVER_TOL)?,
        };
        Ok(Self {
            ops,
            variant,
            kind,
            dt,
            steps: grid.steps(),
            system,
            factor,
        })
    }

    pub fn variant(&self) -> Variant {
        self.variant
    }

    pub fn ops(&self) -> &DiscreteOperators {
        self.ops
    }

    fn grid_rows(&self) -> usize {
        self.steps + 1
    }

    /// Solves `system * x = rhs` honouring the boundary treatment. For the
    /// Dirichlet variant `fixed` holds the full-length lifting (values on
    /// `Gamma1`, zero elsewhere).
    fn step_solve(&self, rhs: &[f64], fixed: Option<&[f64]>, out: &mut [f64]) -> Result<()> {
        match self.variant {
            Variant::Robin(_) => {
                let x = self.factor.solve(rhs)?;
                out.copy_from_slice(&x);
            }
            Variant::Dirichlet => {
                let free = &self.ops.free_nodes;
                let mut r: Vec<f64> = free.iter().map(|&i| rhs[i]).collect();
                if let Some(lift) = fixed {
                    let al = self.system.mul_vec(lift);
                    for (ri, &i) in r.iter_mut().zip(free) {
                        *ri -= al[i];
                    }
                }
                let x = self.factor.solve(&r)?;
                out.copy_from_slice(fixed.unwrap_or(&vec![0.0; out.len()]));
                for (&i, xi) in free.iter().zip(x) {
                    out[i] = xi;
                }
            }
        }
        Ok(())
    }

    /// Forward solve from `v0` with `Gamma1` datum `b`, optional source and
    /// optional flux. Missing data are treated as zero.
    pub fn solve(
        &self,
        v0: &[f64],
        b: &[f64],
        g: Option<&TimeField>,
        q: Option<&BoundaryControl>,
    ) -> Result<TimeField> {
        let ops = self.ops;
        let n = ops.num_nodes();
        shape_check("initial state", n, v0.len(), v0.len() == n)?;
        shape_check("Gamma1 datum", ops.num_gamma1(), b.len(), b.len() == ops.num_gamma1())?;
        if let Some(g) = g {
            shape_check(
                "source",
                format!("{}x{}", self.grid_rows(), n),
                format!("{}x{}", g.rows(), g.width()),
                g.rows() == self.grid_rows() && g.width() == n,
            )?;
        }
        if let Some(q) = q {
            shape_check(
                "flux",
                format!("{}x{}", self.grid_rows(), ops.num_gamma2()),
                format!("{}x{}", q.rows(), q.width()),
                q.rows() == self.grid_rows() && q.width() == ops.num_gamma2(),
            )?;
        }
        let mass = ops.mass_matrix(self.kind);
        let b2 = ops.gamma2_mass(self.kind);
        let bt = ops.extend_gamma1(b);
        let robin_load = match self.variant {
            Variant::Robin(alpha) => {
                let mut l = ops.gamma1_mass(self.kind).mul_vec(&bt);
                l.iter_mut().for_each(|v| *v *= alpha);
                Some(l)
            }
            Variant::Dirichlet => None,
        };
        let dt = self.dt;
        let mut u = TimeField(crate::fem::Frames::zeros(self.grid_rows(), n));
        u.row_mut(0).copy_from_slice(v0);
        let mut rhs = vec![0.0; n];
        let mut next = vec![0.0; n];
        for k in 1..=self.steps {
            mass.mul_vec_into(u.row(k - 1), &mut rhs);
            if let Some(g) = g {
                mass.mul_vec_add(dt, g.row(k), &mut rhs);
            }
            if let Some(q) = q {
                b2.mul_vec_add(-dt, &ops.embed_gamma2(q.row(k)), &mut rhs);
            }
            if let Some(l) = &robin_load {
                for (r, li) in rhs.iter_mut().zip(l) {
                    *r += dt * li;
                }
            }
            let fixed = match self.variant {
                Variant::Dirichlet => Some(bt.as_slice()),
                Variant::Robin(_) => None,
            };
            self.step_solve(&rhs, fixed, &mut next)?;
            u.row_mut(k).copy_from_slice(&next);
        }
        Ok(u)
    }

    /// Backward recursion `A p^k = M p^{k+1} + dt M_H r^k`, `p^{N+1} = 0`,
    /// for `k = N..1`, with `p = 0` on `Gamma1` in the Dirichlet variant.
    /// Row 0 holds one further homogeneous step and is diagnostic only.
    pub fn solve_adjoint(&self, residual: &TimeField) -> Result<TimeField> {
        let ops = self.ops;
        let n = ops.num_nodes();
        shape_check(
            "adjoint source",
            format!("{}x{}", self.grid_rows(), n),
            format!("{}x{}", residual.rows(), residual.width()),
            residual.rows() == self.grid_rows() && residual.width() == n,
        )?;
        let mass = ops.mass_matrix(self.kind);
        let mut p = TimeField(crate::fem::Frames::zeros(self.grid_rows(), n));
        let mut rhs = vec![0.0; n];
        let mut next = vec![0.0; n];
        let mut later = vec![0.0; n];
        for k in (0..=self.steps).rev() {
            mass.mul_vec_into(&later, &mut rhs);
            if k >= 1 {
                ops.mass.mul_vec_add(self.dt, residual.row(k), &mut rhs);
            }
            self.step_solve(&rhs, None, &mut next)?;
            p.row_mut(k).copy_from_slice(&next);
            later.copy_from_slice(&next);
        }
        Ok(p)
    }
}

/// Solves the parabolic problem selected by `variant` with the data of `spec`.
pub fn solve_parabolic(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q: &BoundaryControl,
    grid: &TimeGrid,
    variant: Variant,
) -> Result<TimeField> {
    spec.validate(ops, grid)?;
    ops.check_control("flux q", grid, q)?;
    ParabolicSolver::new(ops, variant, grid, MassKind::Consistent)?.solve(&spec.v_b, &spec.b, Some(&spec.g), Some(q))
}

pub fn solve_parabolic_dirichlet(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q: &BoundaryControl,
    grid: &TimeGrid,
) -> Result<TimeField> {
    solve_parabolic(ops, spec, q, grid, Variant::Dirichlet)
}

/// Robin problem with the coefficient stored in `spec.alpha`.
pub fn solve_parabolic_robin(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q: &BoundaryControl,
    grid: &TimeGrid,
) -> Result<TimeField> {
    match spec.alpha {
        Some(a) => solve_parabolic(ops, spec, q, grid, Variant::Robin(a)),
        None => Err(Error::InvalidInput("Robin solve needs a finite alpha".into())),
    }
}

/// Factored elliptic operator `K` (on free nodes) or `K + α B_G1`.
#[derive(Debug, Clone)]
pub struct EllipticSolver<'a> {
    ops: &'a DiscreteOperators,
    variant: Variant,
    kind: MassKind,
    system: CsrMatrix,
    factor: SpdSolver,
}

impl<'a> EllipticSolver<'a> {
    pub fn new(ops: &'a DiscreteOperators, variant: Variant, kind: MassKind) -> Result<Self> {
        variant.validate()?;
        let system = match variant {
            Variant::Dirichlet => ops.stiffness.clone(),
            Variant::Robin(alpha) => ops.stiffness.linear_combination(1.0, ops.gamma1_mass(kind), alpha),
        };
        let factor = match variant {
            Variant::Dirichlet => SpdSolver::new(&system.principal_submatrix(&ops.free_nodes), DEFAULT_SOLVER_TOL)?,
            Variant::Robin(_) => SpdSolver::new(&system, DEFAULT_SOLVER_TOL)?,
        };
        Ok(Self {
            ops,
            variant,
            kind,
            system,
            factor,
        })
    }

    pub fn solve(&self, g: &[f64], q: &[f64], b: &[f64]) -> Result<Vec<f64>> {
        let ops = self.ops;
        let n = ops.num_nodes();
        shape_check("elliptic source", n, g.len(), g.len() == n)?;
        shape_check("elliptic flux", ops.num_gamma2(), q.len(), q.len() == ops.num_gamma2())?;
        shape_check("elliptic datum", ops.num_gamma1(), b.len(), b.len() == ops.num_gamma1())?;
        let mut rhs = ops.mass_matrix(self.kind).mul_vec(g);
        ops.gamma2_mass(self.kind).mul_vec_add(-1.0, &ops.embed_gamma2(q), &mut rhs);
        let bt = ops.extend_gamma1(b);
        match self.variant {
            Variant::Robin(alpha) => {
                ops.gamma1_mass(self.kind).mul_vec_add(alpha, &bt, &mut rhs);
                self.factor.solve(&rhs)
            }
            Variant::Dirichlet => {
                let free = &ops.free_nodes;
                let lift = self.system.mul_vec(&bt);
                let r: Vec<f64> = free.iter().map(|&i| rhs[i] - lift[i]).collect();
                let x = self.factor.solve(&r)?;
                let mut u = bt;
                for (&i, xi) in free.iter().zip(x) {
                    u[i] = xi;
                }
                Ok(u)
            }
        }
    }
}

pub fn solve_elliptic_dirichlet(ops: &DiscreteOperators, g: &[f64], q: &[f64], b: &[f64]) -> Result<Vec<f64>> {
    EllipticSolver::new(ops, Variant::Dirichlet, MassKind::Consistent)?.solve(g, q, b)
}

pub fn solve_elliptic_robin(
    ops: &DiscreteOperators,
    g: &[f64],
    q: &[f64],
    b: &[f64],
    alpha: f64,
) -> Result<Vec<f64>> {
    EllipticSolver::new(ops, Variant::Robin(alpha), MassKind::Consistent)?.solve(g, q, b)
}
