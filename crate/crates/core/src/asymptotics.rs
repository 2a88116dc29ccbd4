//! Experiment drivers: the Robin to Dirichlet limit in the heat transfer
//! coefficient, and long-time decay towards the stationary state.

use serde::{Deserialize, Serialize};

use crate::control::{optimize_boundary, CgOptions};
use crate::error::{Error, Result};
use crate::fem::{
    assemble, build_interval_mesh, BoundaryControl, DiscreteOperators, Frames, MassKind, Side, TimeField, TimeGrid,
};
use crate::state::{solve_elliptic_dirichlet, ParabolicSolver, ProblemSpec, Variant};

/// Flux used by an α sweep.
#[derive(Debug, Clone, PartialEq)]
pub enum SweepControl {
    /// Compare states and adjoints for one given flux.
    Fixed(BoundaryControl),
    /// Compare the optimal controls of both problems.
    Optimize(CgOptions),
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub alpha: f64,
    /// `‖u_α - u‖` in `L2(0,T;V)`.
    pub err_state: f64,
    /// `‖p_α - p‖` in `L2(0,T;V)`.
    pub err_adjoint: f64,
    /// `‖q̄_α - q̄‖` in the control norm; only for optimized sweeps.
    pub err_control: Option<f64>,
    /// `sqrt(α - 1) ‖u_α - b‖` in `L2(0,T;L2(Gamma1))`.
    pub boundary_mismatch: f64,
    pub converged: bool,
}

pub const SWEEP_CSV_HEADER: &str = "alpha,err_state,err_adjoint,err_control,boundary_mismatch,converged";

pub fn sweep_to_csv(rows: &[SweepRow]) -> String {
    let mut s = String::from(SWEEP_CSV_HEADER);
    s.push('\n');
    for r in rows {
        let control = r.err_control.map(|v| format!("{v:.17e}")).unwrap_or_default();
        s.push_str(&format!(
            "{:.17e},{:.17e},{:.17e},{},{:.17e},{}\n",
            r.alpha, r.err_state, r.err_adjoint, control, r.boundary_mismatch, r.converged
        ));
    }
    s
}

struct Reference {
    u: TimeField,
    p: TimeField,
    q: BoundaryControl,
    converged: bool,
}

fn solve_pair(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    grid: &TimeGrid,
    control: &SweepControl,
    variant: Variant,
) -> Result<Reference> {
    match control {
        SweepControl::Fixed(q) => {
            let solver = ParabolicSolver::new(ops, variant, grid, MassKind::Consistent)?;
            let u = solver.solve(&spec.v_b, &spec.b, Some(&spec.g), Some(q))?;
            let p = solver.solve_adjoint(&u.combine(1.0, &spec.z_d, -1.0))?;
            Ok(Reference {
                u,
                p,
                q: q.clone(),
                converged: true,
            })
        }
        SweepControl::Optimize(opts) => {
            let r = optimize_boundary(ops, spec, grid, *opts, variant)?;
            Ok(Reference {
                u: r.u_opt,
                p: r.p_opt,
                q: r.q_opt,
                converged: r.converged,
            })
        }
    }
}

/// One row per α, computed on up to `threads` worker threads and returned
/// in α order.
pub fn alpha_sweep(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    grid: &TimeGrid,
    control: &SweepControl,
    alphas: &[f64],
    threads: usize,
) -> Result<Vec<SweepRow>> {
    spec.validate(ops, grid)?;
    if alphas.is_empty() {
        return Err(Error::InvalidInput("alpha list is empty".into()));
    }
    if alphas.windows(2).any(|w| !(w[1] > w[0])) {
        return Err(Error::InvalidInput("alphas must be strictly increasing".into()));
    }
    if !(alphas[0] > 1.0) || !alphas[alphas.len() - 1].is_finite() {
        return Err(Error::InvalidInput("alphas must be finite and greater than 1".into()));
    }
    if let SweepControl::Fixed(q) = control {
        ops.check_control("sweep flux", grid, q)?;
    }
    let reference = solve_pair(ops, spec, grid, control, Variant::Dirichlet)?;
    let row = |alpha: f64| -> Result<SweepRow> {
        let robin = solve_pair(ops, spec, grid, control, Variant::Robin(alpha))?;
        let err_control = match control {
            SweepControl::Fixed(_) => None,
            SweepControl::Optimize(_) => Some(ops.norm_script_q(grid, &robin.q.combine(1.0, &reference.q, -1.0))?),
        };
        Ok(SweepRow {
            alpha,
            err_state: ops.norm_l2v(grid, &robin.u.combine(1.0, &reference.u, -1.0))?,
            err_adjoint: ops.norm_l2v(grid, &robin.p.combine(1.0, &reference.p, -1.0))?,
            err_control,
            boundary_mismatch: (alpha - 1.0).sqrt() * ops.gamma1_mismatch(grid, &robin.u, &spec.b)?,
            converged: reference.converged && robin.converged,
        })
    };
    let workers = threads.clamp(1, alphas.len());
    let mut slots: Vec<Option<Result<SweepRow>>> = vec![None; alphas.len()];
    std::thread::scope(|scope| {
        for (w, chunk) in slots.chunks_mut(alphas.len().div_ceil(workers)).enumerate() {
            let start = w * alphas.len().div_ceil(workers);
            let row = &row;
            scope.spawn(move || {
                for (j, slot) in chunk.iter_mut().enumerate() {
                    *slot = Some(row(alphas[start + j]));
                }
            });
        }
    });
    slots.into_iter().map(|s| s.expect("every slot filled")).collect()
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DecayRow {
    pub t: f64,
    /// `‖u(t) - u_∞‖_H`
    pub err_h: f64,
    /// Theoretical bound on `err_h`.
    pub bound: f64,
    /// `err_h / bound`.
    pub ratio: f64,
}

pub const DECAY_CSV_HEADER: &str = "t,err_H,bound,ratio";

pub fn decay_to_csv(rows: &[DecayRow]) -> String {
    let mut s = String::from(DECAY_CSV_HEADER);
    s.push('\n');
    for r in rows {
        s.push_str(&format!("{:.17e},{:.17e},{:.17e},{:.17e}\n", r.t, r.err_h, r.bound, r.ratio));
    }
    s
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DecayStudy {
    pub rows: Vec<DecayRow>,
    pub lambda0: f64,
    /// Negative slope of a least-squares line through `log err_h` over the
    /// first half of the horizon; absent when the error starts at zero.
    pub fitted_rate: Option<f64>,
    /// `∫ e^{λ0 t} ‖g - g_∞‖² dt` over the horizon.
    pub source_forcing: f64,
    /// `∫ e^{λ0 t} ‖γ0‖² ‖q - q_∞‖² dt` over the horizon.
    pub flux_forcing: f64,
}

/// Allowed ratio of observed error to bound.
pub const DECAY_SLACK: f64 = 1.05;

impl DecayStudy {
    pub fn violations(&self) -> usize {
        self.rows.iter().filter(|r| r.err_h > DECAY_SLACK * r.bound).count()
    }
}

fn ratio(err: f64, bound: f64) -> f64 {
    if bound > 0.0 {
        err / bound
    } else if err == 0.0 {
        0.0
    } else {
        f64::INFINITY
    }
}

fn is_constant(f: &Frames) -> bool {
    (1..f.rows()).all(|k| f.row(k) == f.row(0))
}

fn fitted_rate(grid: &TimeGrid, errs: &[f64]) -> Option<f64> {
    let half = grid.steps() / 2;
    let pts: Vec<(f64, f64)> = (0..=half)
        .filter(|&k| errs[k] > 0.0)
        .map(|k| (grid.time(k), errs[k].ln()))
        .collect();
    if pts.len() < 2 {
        return None;
    }
    let n = pts.len() as f64;
    let mt = pts.iter().map(|p| p.0).sum::<f64>() / n;
    let my = pts.iter().map(|p| p.1).sum::<f64>() / n;
    let sxy: f64 = pts.iter().map(|p| (p.0 - mt) * (p.1 - my)).sum();
    let sxx: f64 = pts.iter().map(|p| (p.0 - mt) * (p.0 - mt)).sum();
    Some(-sxy / sxx)
}

fn errors_to(ops: &DiscreteOperators, u: &TimeField, target: &[f64]) -> Vec<f64> {
    let mut w = vec![0.0; target.len()];
    (0..u.rows())
        .map(|k| {
            for ((wi, a), b) in w.iter_mut().zip(u.row(k)).zip(target) {
                *wi = a - b;
            }
            ops.mass.quad_form(&w).max(0.0).sqrt()
        })
        .collect()
}

fn check_step(ops: &DiscreteOperators, grid: &TimeGrid) -> Result<()> {
    if grid.dt() * ops.lambda0 > 0.1 {
        return Err(Error::InvalidInput(format!(
            "time step too coarse for the decay check: dt*lambda0 = {:.4} > 0.1",
            grid.dt() * ops.lambda0
        )));
    }
    Ok(())
}

/// Decay of the Dirichlet state towards the stationary solution for
/// time-constant `g` and `q`, against `err(0) exp(-λ0 t / 2)`.
pub fn decay_study(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q: &BoundaryControl,
    grid: &TimeGrid,
) -> Result<DecayStudy> {
    spec.validate(ops, grid)?;
    ops.check_control("flux", grid, q)?;
    if !is_constant(&spec.g) || !is_constant(q) {
        return Err(Error::InvalidInput("decay study needs time-constant g and q".into()));
    }
    check_step(ops, grid)?;
    let u_inf = solve_elliptic_dirichlet(ops, spec.g.row(0), q.row(0), &spec.b)?;
    let solver = ParabolicSolver::new(ops, Variant::Dirichlet, grid, MassKind::Consistent)?;
    let u = solver.solve(&spec.v_b, &spec.b, Some(&spec.g), Some(q))?;
    let errs = errors_to(ops, &u, &u_inf);
    let lambda0 = ops.lambda0;
    let rows = grid
        .times()
        .zip(&errs)
        .map(|(t, &err_h)| {
            let bound = errs[0] * (-0.5 * lambda0 * t).exp();
            DecayRow {
                t,
                err_h,
                bound,
                ratio: ratio(err_h, bound),
            }
        })
        .collect();
    Ok(DecayStudy {
        rows,
        lambda0,
        fitted_rate: if errs[0] > 0.0 { fitted_rate(grid, &errs) } else { None },
        source_forcing: 0.0,
        flux_forcing: 0.0,
    })
}

/// Decay with sources converging to `g_inf`, `q_inf`. The bound is
///
/// ```text
/// err(t)² ≤ err(0)² e^{-λ0 t} + (2/λ0) e^{-λ0 t} ∫_0^t (F1 + F2)
/// ```
///
/// with the running integrals accumulated in the damped form
/// `S_k = e^{-λ0 dt} S_{k-1} + dt f_k`.
pub fn decay_with_forcing(
    ops: &DiscreteOperators,
    spec: &ProblemSpec,
    q: &BoundaryControl,
    g_inf: &[f64],
    q_inf: &[f64],
    grid: &TimeGrid,
) -> Result<DecayStudy> {
    spec.validate(ops, grid)?;
    ops.check_control("flux", grid, q)?;
    if g_inf.len() != ops.num_nodes() || q_inf.len() != ops.num_gamma2() {
        return Err(Error::InvalidInput("limit data have the wrong length".into()));
    }
    check_step(ops, grid)?;
    let lambda0 = ops.lambda0;
    if lambda0 * grid.t_final() > 500.0 {
        return Err(Error::InvalidInput(format!(
            "horizon too long: lambda0 * t_max = {:.1} exceeds 500",
            lambda0 * grid.t_final()
        )));
    }
    let u_inf = solve_elliptic_dirichlet(ops, g_inf, q_inf, &spec.b)?;
    let solver = ParabolicSolver::new(ops, Variant::Dirichlet, grid, MassKind::Consistent)?;
    let u = solver.solve(&spec.v_b, &spec.b, Some(&spec.g), Some(q))?;
    let errs = errors_to(ops, &u, &u_inf);
    let gamma_sq = ops.trace_norm * ops.trace_norm;
    let dt = grid.dt();
    let damp = (-lambda0 * dt).exp();
    let (mut s1, mut s2) = (0.0, 0.0);
    let (mut f1_total, mut f2_total) = (0.0, 0.0);
    let mut dg = vec![0.0; g_inf.len()];
    let mut dq = vec![0.0; q_inf.len()];
    let mut rows = Vec::with_capacity(grid.steps() + 1);
    for (k, t) in grid.times().enumerate() {
        if k > 0 {
            for ((d, a), b) in dg.iter_mut().zip(spec.g.row(k)).zip(g_inf) {
                *d = a - b;
            }
            for ((d, a), b) in dq.iter_mut().zip(q.row(k)).zip(q_inf) {
                *d = a - b;
            }
            let f1 = ops.mass.quad_form(&dg);
            let f2 = gamma_sq * ops.gamma2_gram.quad_form(&dq);
            s1 = damp * s1 + dt * f1;
            s2 = damp * s2 + dt * f2;
            let weight = lambda0 * t;
            if f1 > 0.0 {
                f1_total += dt * (weight + f1.ln()).exp();
            }
            if f2 > 0.0 {
                f2_total += dt * (weight + f2.ln()).exp();
            }
        }
        let bound_sq = errs[0] * errs[0] * (-lambda0 * t).exp() + 2.0 / lambda0 * (s1 + s2);
        let bound = bound_sq.max(0.0).sqrt();
        rows.push(DecayRow {
            t,
            err_h: errs[k],
            bound,
            ratio: ratio(errs[k], bound),
        });
    }
    Ok(DecayStudy {
        rows,
        lambda0,
        fitted_rate: None,
        source_forcing: f1_total,
        flux_forcing: f2_total,
    })
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct QuadratureReport {
    /// `∫_Ω (g - g_∞)² dx` at the final time.
    pub pointwise_value_at_tmax: f64,
    /// Rectangle-rule time integral of the same quantity up to the final time.
    pub cumulative_integral_at_tmax: f64,
}

/// Source `g = g_∞ + e^{-t}` on the unit interval: the pointwise gap
/// decays while its time integral tends to 1/2.
pub fn counterexample_quadrature(t_max: f64, dt: f64) -> Result<QuadratureReport> {
    if !(t_max >= 10.0) || !t_max.is_finite() {
        return Err(Error::InvalidInput(format!("t_max must be at least 10, got {t_max}")));
    }
    if !(dt > 0.0) || dt > t_max {
        return Err(Error::InvalidInput(format!("invalid time step {dt}")));
    }
    let steps = (t_max / dt).round().max(1.0) as usize;
    let grid = TimeGrid::new(t_max, steps)?;
    let ops = assemble(&build_interval_mesh(8, 0.0, 1.0, Side::Left)?)?;
    let ones = vec![1.0; ops.num_nodes()];
    let area = ops.mass.quad_form(&ones);
    let gap = |t: f64| (-2.0 * t).exp() * area;
    let cumulative = grid.dt() * (1..=steps).map(|k| gap(grid.time(k))).sum::<f64>();
    Ok(QuadratureReport {
        pointwise_value_at_tmax: gap(t_max),
        cumulative_integral_at_tmax: cumulative,
    })
}
