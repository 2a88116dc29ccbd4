//! Tracking functionals, their gradients and the reduced-space conjugate
//! gradient solvers for boundary, distributed and simultaneous control.
//!
//! All functionals are instances of
//!
//! ```text
//! J+(g, q) = ½‖u_{gq} - z_d‖² + (M1/2)‖g‖² + (M/2)‖q‖²
//! ```
//!
//! with time integrals by the right-endpoint rectangle rule. The boundary
//! problem drops the (constant) `g` penalty.

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::fem::{BoundaryControl, DiscreteOperators, Frames, MassKind, TimeField, TimeGrid};
use crate::state::{ParabolicSolver, ProblemSpec, Variant};

pub const DEFAULT_MAX_ITER: usize = 500;
const MAX_RESTARTS: usize = 5;

/// Stopping controls for the CG driver. A bare `f64` converts to a
/// tolerance with the default iteration cap.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CgOptions {
    pub tol: f64,
    pub max_iter: usize,
}

impl From<f64> for CgOptions {
    fn from(tol: f64) -> Self {
        Self {
            tol,
            max_iter: DEFAULT_MAX_ITER,
        }
    }
}

impl CgOptions {
    fn validate(&self) -> Result<()> {
        if !(self.tol > 0.0) || !self.tol.is_finite() {
            return Err(Error::InvalidInput(format!("tolerance must be positive, got {}", self.tol)));
        }
        if self.max_iter == 0 {
            return Err(Error::InvalidInput("iteration cap must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct IterationRecord {
    pub iteration: usize,
    pub cost: f64,
    pub residual: f64,
}

/// Outcome of one optimization run. For the boundary problem `g_opt` is the
/// fixed source; for the distributed problem `q_opt` is the fixed flux.
#[derive(Debug, Clone, PartialEq)]
pub struct OptimResult {
    pub q_opt: BoundaryControl,
    pub g_opt: TimeField,
    pub u_opt: TimeField,
    pub p_opt: TimeField,
    /// Value of the functional that was minimized.
    pub cost: f64,
    /// Norm of the true gradient at the returned point.
    pub optimality_residual: f64,
    /// Norm of the gradient at the zero control.
    pub initial_residual: f64,
    pub iterations: usize,
    pub converged: bool,
    pub log: Vec<IterationRecord>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
enum Space {
    Boundary,
    Distributed,
    Both,
}

/// Reduced functional over a flat control vector: `[g frames | q frames]`
/// with the blocks present according to `space`.
struct Reduced<'a> {
    ops: &'a DiscreteOperators,
    grid: TimeGrid,
    spec: &'a ProblemSpec,
    solver: ParabolicSolver<'a>,
    space: Space,
    g_fixed: TimeField,
    q_fixed: BoundaryControl,
    /// State for zero control (fixed data only).
    offset: TimeField,
}

impl<'a> Reduced<'a> {
    fn new(
        ops: &'a DiscreteOperators,
        spec: &'a ProblemSpec,
        grid: &TimeGrid,
        variant: Variant,
        space: Space,
        g_fixed: TimeField,
        q_fixed: BoundaryControl,
    ) -> Result<Self> {
        spec.validate(ops, grid)?;
        ops.check_field("fixed source", grid, &g_fixed)?;
        ops.check_control("fixed flux", grid, &q_fixed)?;
        let solver = ParabolicSolver::new(ops, variant, grid, MassKind::Consistent)?;
        let g0 = (space == Space::Boundary).then_some(&g_fixed);
        let q0 = (space == Space::Distributed).then_some(&q_fixed);
        let offset = solver.solve(&spec.v_b, &spec.b, g0, q0)?;
        Ok(Self {
            ops,
            grid: *grid,
            spec,
            solver,
            space,
            g_fixed,
            q_fixed,
            offset,
        })
    }

    fn rows(&self) -> usize {
        self.grid.steps() + 1
    }

    fn g_len(&self) -> usize {
        match self.space {
            Space::Boundary => 0,
            _ => self.rows() * self.ops.num_nodes(),
        }
    }

    fn len(&self) -> usize {
        self.g_len()
            + match self.space {
                Space::Distributed => 0,
                _ => self.rows() * self.ops.num_gamma2(),
            }
    }

    fn split(&self, x: &[f64]) -> (Option<TimeField>, Option<BoundaryControl>) {
        let (gx, qx) = x.split_at(self.g_len());
        let rows = self.rows();
        let g = (self.space != Space::Boundary).then(|| {
            TimeField(Frames::from_fn(rows, self.ops.num_nodes(), |k, i| gx[k * self.ops.num_nodes() + i]))
        });
        let q = (self.space != Space::Distributed).then(|| {
            let m = self.ops.num_gamma2();
            BoundaryControl(Frames::from_fn(rows, m, |k, i| qx[k * m + i]))
        });
        (g, q)
    }

    fn join(&self, g: Option<&TimeField>, q: Option<&BoundaryControl>) -> Vec<f64> {
        let mut x = Vec::with_capacity(self.len());
        if let Some(g) = g {
            x.extend_from_slice(g.as_slice());
        }
        if let Some(q) = q {
            x.extend_from_slice(q.as_slice());
        }
        x
    }

    /// Control-to-state map without the fixed data.
    fn homogeneous_state(&self, x: &[f64]) -> Result<TimeField> {
        let (g, q) = self.split(x);
        let zeros_b = vec![0.0; self.ops.num_gamma1()];
        let zeros_v = vec![0.0; self.ops.num_nodes()];
        self.solver.solve(&zeros_v, &zeros_b, g.as_ref(), q.as_ref())
    }

    fn state(&self, x: &[f64]) -> Result<TimeField> {
        let mut u = self.homogeneous_state(x)?;
        u.axpy(1.0, &self.offset);
        Ok(u)
    }

    /// Riesz representative of the derivative of the control penalty plus
    /// the adjoint contribution `(M1 g + p, M q - p|Γ2)`.
    fn assemble_gradient(&self, x: &[f64], p: &TimeField) -> Vec<f64> {
        let (g, q) = self.split(x);
        let grad_g = g.map(|g| {
            let mut out = g.combine(self.spec.m1, p, 1.0);
            out.row_mut(0).fill(0.0);
            out
        });
        let grad_q = q.map(|q| {
            let mut out = q.combine(self.spec.m, &self.ops.trace_gamma2_field(p), -1.0);
            out.row_mut(0).fill(0.0);
            out
        });
        self.join(grad_g.as_ref(), grad_q.as_ref())
    }

    fn gradient(&self, x: &[f64]) -> Result<(Vec<f64>, TimeField, TimeField)> {
        let u = self.state(x)?;
        let p = self.solver.solve_adjoint(&u.combine(1.0, &self.spec.z_d, -1.0))?;
        Ok((self.assemble_gradient(x, &p), u, p))
    }

    fn hessian(&self, x: &[f64]) -> Result<Vec<f64>> {
        let w = self.homogeneous_state(x)?;
        let p = self.solver.solve_adjoint(&w)?;
        Ok(self.assemble_gradient(x, &p))
    }

    fn inner(&self, x: &[f64], y: &[f64]) -> f64 {
        let (xg, xq) = x.split_at(self.g_len());
        let (yg, yq) = y.split_at(self.g_len());
        let dt = self.grid.dt();
        let mut s = 0.0;
        if !xg.is_empty() {
            let n = self.ops.num_nodes();
            for k in 1..self.rows() {
                s += self.ops.mass.bilinear(&xg[k * n..(k + 1) * n], &yg[k * n..(k + 1) * n]);
            }
        }
        if !xq.is_empty() {
            let m = self.ops.num_gamma2();
            for k in 1..self.rows() {
                s += self.ops.gamma2_gram.bilinear(&xq[k * m..(k + 1) * m], &yq[k * m..(k + 1) * m]);
            }
        }
        dt * s
    }

    fn norm(&self, x: &[f64]) -> f64 {
        self.inner(x, x).max(0.0).sqrt()
    }

    fn cost_with_state(&self, x: &[f64], u: &TimeField) -> Result<f64> {
        let (g, q) = self.split(x);
        let r = u.combine(1.0, &self.spec.z_d, -1.0);
        let mut j = 0.5 * self.ops.inner_script_h(&self.grid, &r, &r)?;
        let q = q.as_ref().unwrap_or(&self.q_fixed);
        j += 0.5 * self.spec.m * self.ops.inner_script_q(&self.grid, q, q)?;
        if self.space != Space::Boundary {
            let g = g.as_ref().unwrap_or(&self.g_fixed);
            j += 0.5 * self.spec.m1 * self.ops.inner_script_h(&self.grid, g, g)?;
        }
        Ok(j)
    }

    fn finish(&self, x: Vec<f64>, outcome: CgOutcome) -> Result<OptimResult> {
        let (grad, u, p) = self.gradient(&x)?;
        let cost = self.cost_with_state(&x, &u)?;
        let (g, q) = self.split(&x);
        Ok(OptimResult {
            q_opt: q.unwrap_or_else(|| self.q_fixed.clone()),
            g_opt: g.unwrap_or_else(|| self.g_fixed.clone()),
            u_opt: u,
            p_opt: p,
            cost,
            optimality_residual: self.norm(&grad),
            initial_residual: outcome.initial_residual,
            iterations: outcome.iterations,
            converged: outcome.converged,
            log: outcome.log,
        })
    }

    /// Conjugate gradients on `H x = f` in the weighted inner product,
    /// restarted from the true gradient when the recursive residual has
    /// drifted.
    fn minimize(&self, opts: CgOptions) -> Result<OptimResult> {
        opts.validate()?;
        let mut x = vec![0.0; self.len()];
        let (grad0, u0, _) = self.gradient(&x)?;
        let initial_residual = self.norm(&grad0);
        let threshold = opts.tol * initial_residual.max(1.0);
        let mut cost = self.cost_with_state(&x, &u0)?;
        let mut log = vec![IterationRecord {
            iteration: 0,
            cost,
            residual: initial_residual,
        }];
        let mut iterations = 0;
        let mut converged = initial_residual <= threshold;
        let mut r: Vec<f64> = grad0.iter().map(|v| -v).collect();
        let mut restarts = 0;
        while !converged && iterations < opts.max_iter {
            let mut d = r.clone();
            let mut rr = self.inner(&r, &r);
            while iterations < opts.max_iter {
                let hd = self.hessian(&d)?;
                let dhd = self.inner(&d, &hd);
                if !(dhd > 0.0) {
                    break;
                }
                let step = rr / dhd;
                for (xi, di) in x.iter_mut().zip(&d) {
                    *xi += step * di;
                }
                for (ri, hi) in r.iter_mut().zip(&hd) {
                    *ri -= step * hi;
                }
                cost -= 0.5 * step * rr;
                iterations += 1;
                let rr_new = self.inner(&r, &r);
                log.push(IterationRecord {
                    iteration: iterations,
                    cost,
                    residual: rr_new.max(0.0).sqrt(),
                });
                if rr_new.sqrt() <= threshold {
                    break;
                }
                let beta = rr_new / rr;
                for (di, ri) in d.iter_mut().zip(&r) {
                    *di = ri + beta * *di;
                }
                rr = rr_new;
            }
            let (grad, u, _) = self.gradient(&x)?;
            let true_res = self.norm(&grad);
            cost = self.cost_with_state(&x, &u)?;
            converged = true_res <= threshold;
            restarts += 1;
            if converged || restarts > MAX_RESTARTS {
                break;
            }
            r = grad.iter().map(|v| -v).collect();
        }
        self.finish(
            x,
            CgOutcome {
                initial_residual,
                iterations,
                converged,
                log,
            },
        )
    }
}

struct CgOutcome {
    initial_residual: f64,
    iterations: usize,
    converged: bool,
    log: Vec<IterationRecord>,
}

fn boundary_problem<'a>(
    ops: &'a DiscreteOperators,
    spec: &'a ProblemSpec,
    grid: &TimeGrid,
    variant: Variant,
) -> Result<Reduced<'a>> {
    Reduced::new(
        ops,
        spec,
        grid,
        variant,
        Space::Boundary,
        spec.g.clone(),
        BoundaryControl::zeros(grid, ops.num_gamma2()),
    )
}

/// `J(q) = ½‖u_q - z_d‖² + (M/2)‖q‖²` for the given boundary condition.
pub fn cost_j_variant(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q: &BoundaryControl,
    grid: &TimeGrid,
    variant: Variant,
) -> Result<f64> {
    ops.check_control("control q", grid, q)?;
    let red = boundary_problem(ops, spec, grid, variant)?;
    let x = red.join(None, Some(q));
    let u = red.state(&x)?;
    red.cost_with_state(&x, &u)
}

pub fn cost_j(ops: &DiscreteOperators, spec: &ProblemSpec, q: &BoundaryControl, grid: &TimeGrid) -> Result<f64> {
    cost_j_variant(ops, spec, q, grid, Variant::Dirichlet)
}

pub fn cost_j_alpha(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q: &BoundaryControl,
    alpha: f64,
    grid: &TimeGrid,
) -> Result<f64> {
    cost_j_variant(ops, spec, q, grid, Variant::Robin(alpha))
}

/// `J+(g, q)`, the functional of the simultaneous problem. With `g`
/// fixed this is the boundary functional plus a constant; with `q` fixed
/// it is the distributed functional.
pub fn cost_full(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    g: &TimeField,
    q: &BoundaryControl,
    grid: &TimeGrid,
    variant: Variant,
) -> Result<f64> {
    ops.check_field("source g", grid, g)?;
    ops.check_control("control q", grid, q)?;
    let red = Reduced::new(ops, spec, grid, variant, Space::Both, g.clone(), q.clone())?;
    let x = red.join(Some(g), Some(q));
    let u = red.state(&x)?;
    red.cost_with_state(&x, &u)
}

/// `M q - p_q|Γ2`, the representative of `J'(q)` in the discrete
/// `Q` inner product. Row 0 does not enter `J` and is returned as zero.
pub fn gradient_j_variant(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q: &BoundaryControl,
    grid: &TimeGrid,
    variant: Variant,
) -> Result<BoundaryControl> {
    ops.check_control("control q", grid, q)?;
    let red = boundary_problem(ops, spec, grid, variant)?;
    let (grad, _, _) = red.gradient(&red.join(None, Some(q)))?;
    Ok(red.split(&grad).1.expect("boundary block"))
}

pub fn gradient_j(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q: &BoundaryControl,
    grid: &TimeGrid,
) -> Result<BoundaryControl> {
    gradient_j_variant(ops, spec, q, grid, Variant::Dirichlet)
}

pub fn gradient_j_alpha(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q: &BoundaryControl,
    alpha: f64,
    grid: &TimeGrid,
) -> Result<BoundaryControl> {
    gradient_j_variant(ops, spec, q, grid, Variant::Robin(alpha))
}

/// `M1 g + p` for the distributed functional with fixed flux `q`.
pub fn gradient_distributed(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    g: &TimeField,
    q_fixed: &BoundaryControl,
    grid: &TimeGrid,
    variant: Variant,
) -> Result<TimeField> {
    ops.check_field("source g", grid, g)?;
    let red = Reduced::new(
        ops,
        spec,
        grid,
        variant,
        Space::Distributed,
        spec.g.clone(),
        q_fixed.clone(),
    )?;
    let (grad, _, _) = red.gradient(&red.join(Some(g), None))?;
    Ok(red.split(&grad).0.expect("distributed block"))
}

/// Minimizes `J` over the boundary flux, with `spec.g` as fixed source.
pub fn optimize_boundary(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    grid: &TimeGrid,
    opts: impl Into<CgOptions>,
    variant: Variant,
) -> Result<OptimResult> {
    boundary_problem(ops, spec, grid, variant)?.minimize(opts.into())
}

/// Minimizes `J+(·, q_fixed)` over the internal source.
pub fn optimize_distributed(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    grid: &TimeGrid,
    q_fixed: &BoundaryControl,
    opts: impl Into<CgOptions>,
    variant: Variant,
) -> Result<OptimResult> {
    Reduced::new(
        ops,
        spec,
        grid,
        variant,
        Space::Distributed,
        spec.g.clone(),
        q_fixed.clone(),
    )?
    .minimize(opts.into())
}

/// Minimizes `J+` jointly over source and flux.
pub fn optimize_simultaneous(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    grid: &TimeGrid,
    opts: impl Into<CgOptions>,
    variant: Variant,
) -> Result<OptimResult> {
    Reduced::new(
        ops,
        spec,
        grid,
        variant,
        Space::Both,
        spec.g.clone(),
        BoundaryControl::zeros(grid, ops.num_gamma2()),
    )?
    .minimize(opts.into())
}

/// Both sides of the bound
/// `‖q̄ - q̿‖ ≤ ‖γ0‖ / (λ M) · ‖u(g̿, q̿) - u(g, q̄)‖`
/// comparing the boundary optimum at a fixed source `g` with the
/// simultaneous optimum.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GapEstimate {
    pub lhs: f64,
    pub rhs: f64,
    pub holds: bool,
    /// Coercivity constant used (λ0, or λ_α for the Robin problem).
    pub coercivity: f64,
    pub trace_norm: f64,
}

pub fn control_gap_estimate(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    grid: &TimeGrid,
    g_fixed: &TimeField,
    opts: impl Into<CgOptions>,
    variant: Variant,
) -> Result<GapEstimate> {
    let opts = opts.into();
    ops.check_field("fixed source", grid, g_fixed)?;
    let fixed = ProblemSpec {
        g: g_fixed.clone(),
        ..spec.clone()
    };
    let single = optimize_boundary(ops, &fixed, grid, opts, variant)?;
    let joint = optimize_simultaneous(ops, spec, grid, opts, variant)?;
    if !single.converged || !joint.converged {
        return Err(Error::Precondition(format!(
            "gap estimate needs converged optimizers (boundary residual {:e}, joint residual {:e})",
            single.optimality_residual, joint.optimality_residual
        )));
    }
    let coercivity = match variant {
        Variant::Dirichlet => ops.lambda0,
        Variant::Robin(alpha) => ops.lambda_alpha(alpha),
    };
    let lhs = ops.norm_script_q(grid, &single.q_opt.combine(1.0, &joint.q_opt, -1.0))?;
    let du = ops.norm_script_h(grid, &joint.u_opt.combine(1.0, &single.u_opt, -1.0))?;
    let rhs = ops.trace_norm / (coercivity * spec.m) * du;
    Ok(GapEstimate {
        lhs,
        rhs,
        holds: lhs <= rhs * (1.0 + 1e-9),
        coercivity,
        trace_norm: ops.trace_norm,
    })
}
