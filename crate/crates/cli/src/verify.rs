//! Property suites run by `parctrl verify` on the configured problem.

use parctrl_core::asymptotics::{counterexample_quadrature, decay_study, DECAY_SLACK};
use parctrl_core::control::{
    control_gap_estimate, cost_j_variant, gradient_j_variant, optimize_boundary, optimize_simultaneous, CgOptions,
};
use parctrl_core::fem::{BoundaryControl, MassKind, TimeField, TimeGrid};
use parctrl_core::scalar::{compare_states, lambda_bar, restricted_cost, ScalarVariant, MONOTONICITY_TOL};
use parctrl_core::state::{ParabolicSolver, ProblemSpec, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::config::{LambdaKind, RunConfig};
use crate::error::{CliError, CliResult};
use crate::manifest::PropertyResult;
use crate::problem::Problem;

pub const SUITES: [&str; 10] = [
    "duality",
    "gradient",
    "convexity",
    "optimality",
    "gap",
    "lambda",
    "monotonicity",
    "spectral",
    "decay",
    "counterexample",
];

const DUALITY_PAIRS: usize = 20;
const GRADIENT_DIRECTIONS: usize = 10;
const CONVEXITY_TRIPLES: usize = 20;
const OPTIMALITY_PROBES: usize = 100;
const OPTIMALITY_MAX_ITER: f64 = 200.0;
const GAP_SOURCES: usize = 5;

fn at_most(property: impl Into<String>, value: f64, threshold: f64) -> PropertyResult {
    PropertyResult {
        property: property.into(),
        status: if value <= threshold { "pass" } else { "fail" }.into(),
        value,
        threshold,
    }
}

fn at_least(property: impl Into<String>, value: f64, threshold: f64) -> PropertyResult {
    PropertyResult {
        property: property.into(),
        status: if value >= threshold { "pass" } else { "fail" }.into(),
        value,
        threshold,
    }
}

fn below(property: impl Into<String>, value: f64, threshold: f64) -> PropertyResult {
    PropertyResult {
        property: property.into(),
        status: if value < threshold { "pass" } else { "fail" }.into(),
        value,
        threshold,
    }
}

/// Random flux built from a few cosine modes in time times affine
/// functions in space, with row 0 zeroed. White-noise directions make
/// `(J'(q), η)` cancel down to where central differences are limited by the
/// rounding of `J` itself, so the gradient check uses these instead.
pub fn smooth_control(rng: &mut impl Rng, grid: &TimeGrid, points: &[Vec<f64>]) -> BoundaryControl {
    let coef: Vec<[f64; 3]> = (0..4)
        .map(|_| [rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0), rng.gen_range(-1.0..1.0)])
        .collect();
    let t_final = grid.t_final();
    let mut q = BoundaryControl::from_fn(grid, points.len(), |t, i| {
        let x = &points[i];
        let y = x.get(1).copied().unwrap_or(0.0);
        coef.iter()
            .enumerate()
            .map(|(m, c)| (m as f64 * std::f64::consts::PI * t / t_final).cos() * (c[0] + c[1] * x[0] + c[2] * y))
            .sum()
    });
    q.row_mut(0).fill(0.0);
    q
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

struct Ctx<'a> {
    cfg: &'a RunConfig,
    p: &'a Problem,
    rng: ChaCha8Rng,
}

impl Ctx<'_> {
    fn control(&mut self) -> BoundaryControl {
        let rng = &mut self.rng;
        let mut q = BoundaryControl::from_fn(&self.p.grid, self.p.ops.num_gamma2(), |_, _| rng.gen_range(-1.0..1.0));
        q.row_mut(0).fill(0.0);
        q
    }

    fn field(&mut self) -> TimeField {
        let rng = &mut self.rng;
        TimeField::from_fn(&self.p.grid, self.p.ops.num_nodes(), |_, _| rng.gen_range(-1.0..1.0))
    }

    fn variant(&self) -> Variant {
        self.p.spec.variant()
    }

    fn opts(&self) -> CgOptions {
        CgOptions {
            tol: self.cfg.tol,
            max_iter: self.cfg.max_iter,
        }
    }

    fn j(&self, q: &BoundaryControl) -> CliResult<f64> {
        Ok(cost_j_variant(&self.p.ops, &self.p.spec, q, &self.p.grid, self.variant())?)
    }
}

fn duality(c: &mut Ctx) -> CliResult<Vec<PropertyResult>> {
    let p = c.p;
    let mut out = Vec::new();
    for variant in [Variant::Dirichlet, Variant::Robin(c.cfg.robin_alpha())] {
        let solver = ParabolicSolver::new(&p.ops, variant, &p.grid, MassKind::Consistent)?;
        let zero_v = vec![0.0; p.ops.num_nodes()];
        let zero_b = vec![0.0; p.ops.num_gamma1()];
        let mut worst: f64 = 0.0;
        for _ in 0..DUALITY_PAIRS {
            let q = c.control();
            let eta = c.control();
            let u = solver.solve(&p.spec.v_b, &p.spec.b, Some(&p.spec.g), Some(&q))?;
            let r = u.combine(1.0, &p.spec.z_d, -1.0);
            let adj = solver.solve_adjoint(&r)?;
            let w = solver.solve(&zero_v, &zero_b, None, Some(&eta))?;
            let lhs = p.ops.inner_script_h(&p.grid, &w, &r)?;
            let rhs = -p.ops.inner_script_q(&p.grid, &eta, &p.ops.trace_gamma2_field(&adj))?;
            worst = worst.max(rel_diff(lhs, rhs));
        }
        let name = match variant {
            Variant::Dirichlet => "duality-dirichlet",
            Variant::Robin(_) => "duality-robin",
        };
        out.push(at_most(name, worst, 1e-10));
    }
    Ok(out)
}

fn gradient(c: &mut Ctx) -> CliResult<Vec<PropertyResult>> {
    let p = c.p;
    let points = p.gamma2_points();
    let mut worst: f64 = 0.0;
    for _ in 0..GRADIENT_DIRECTIONS {
        let q = smooth_control(&mut c.rng, &p.grid, &points);
        let eta = smooth_control(&mut c.rng, &p.grid, &points);
        let grad = gradient_j_variant(&p.ops, &p.spec, &q, &p.grid, c.variant())?;
        let exact = p.ops.inner_script_q(&p.grid, &grad, &eta)?;
        for eps in [1e-2, 1e-4] {
            let fd = (c.j(&q.combine(1.0, &eta, eps))? - c.j(&q.combine(1.0, &eta, -eps))?) / (2.0 * eps);
            worst = worst.max(rel_diff(fd, exact));
        }
    }
    Ok(vec![at_most("gradient-central-difference", worst, 1e-9)])
}

fn convexity(c: &mut Ctx) -> CliResult<Vec<PropertyResult>> {
    let p = c.p;
    let variant = c.variant();
    let solver = ParabolicSolver::new(&p.ops, variant, &p.grid, MassKind::Consistent)?;
    let zero_v = vec![0.0; p.ops.num_nodes()];
    let zero_b = vec![0.0; p.ops.num_gamma1()];
    let mut worst: f64 = 0.0;
    for _ in 0..CONVEXITY_TRIPLES {
        let q1 = c.control();
        let q2 = c.control();
        let t: f64 = c.rng.gen_range(0.0..1.0);
        let mix = q2.combine(1.0 - t, &q1, t);
        let defect = (1.0 - t) * c.j(&q2)? + t * c.j(&q1)? - c.j(&mix)?;
        let dq = q2.combine(1.0, &q1, -1.0);
        // The state difference is the homogeneous response to the flux difference.
        let du = p.ops.norm_script_h(&p.grid, &solver.solve(&zero_v, &zero_b, None, Some(&dq))?)?;
        let nq = p.ops.norm_script_q(&p.grid, &dq)?;
        let expected = 0.5 * t * (1.0 - t) * (du * du + p.spec.m * nq * nq);
        if (defect - expected).abs() >= 1e-15 {
            worst = worst.max(rel_diff(defect, expected));
        }
    }
    Ok(vec![at_most("convexity-identity", worst, 1e-10)])
}

fn optimality(c: &mut Ctx) -> CliResult<Vec<PropertyResult>> {
    let p = c.p;
    let r = optimize_boundary(&p.ops, &p.spec, &p.grid, c.opts(), c.variant())?;
    let mut excess = f64::NEG_INFINITY;
    for _ in 0..OPTIMALITY_PROBES {
        let eta = c.control();
        let s: f64 = c.rng.gen_range(0.001..1.0);
        excess = excess.max(r.cost - c.j(&r.q_opt.combine(1.0, &eta, s))?);
    }
    Ok(vec![
        at_most("optimality-residual", r.optimality_residual, c.cfg.tol),
        at_most("optimality-iterations", r.iterations as f64, OPTIMALITY_MAX_ITER),
        at_most("optimality-probes", excess, 0.0),
    ])
}

fn gap(c: &mut Ctx) -> CliResult<Vec<PropertyResult>> {
    let p = c.p;
    let mut worst: f64 = 0.0;
    for _ in 0..GAP_SOURCES {
        let g = c.field();
        let est = control_gap_estimate(&p.ops, &p.spec, &p.grid, &g, c.opts(), c.variant())?;
        worst = worst.max(est.lhs / est.rhs);
    }
    let joint = optimize_simultaneous(&p.ops, &p.spec, &p.grid, c.opts(), c.variant())?;
    let fixed = control_gap_estimate(&p.ops, &p.spec, &p.grid, &joint.g_opt, c.opts(), c.variant())?;
    Ok(vec![
        at_most("gap-bound", worst, 1.0 + 1e-9),
        at_most("gap-fixed-point", fixed.lhs, 1e-8),
    ])
}

/// Vertex of the parabola through three points.
fn vertex(xs: [f64; 3], ys: [f64; 3]) -> f64 {
    let [x0, x1, x2] = xs;
    let [y0, y1, y2] = ys;
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    x1 - 0.5 * num / den
}

fn lambda(c: &mut Ctx) -> CliResult<Vec<PropertyResult>> {
    let p = c.p;
    let unit;
    let q0 = match &p.q0 {
        Some(q0) => q0,
        None => {
            unit = BoundaryControl::constant(&p.grid, &vec![1.0; p.ops.num_gamma2()]);
            &unit
        }
    };
    let mut out = Vec::new();
    for kind in [
        LambdaKind::Parabolic,
        LambdaKind::ParabolicRobin,
        LambdaKind::Elliptic,
        LambdaKind::EllipticRobin,
    ] {
        let v: ScalarVariant = c.cfg.scalar_variant(kind);
        let coef = lambda_bar(&p.ops, &p.spec, q0, &p.grid, v)?;
        let h = |l: f64| restricted_cost(&p.ops, &p.spec, q0, &p.grid, v, l);
        let xs = [-1.0, 0.0, 1.0];
        let ys = [h(xs[0])?, h(xs[1])?, h(xs[2])?];
        let at = h(coef.lambda_opt)?;
        let nearby = h(coef.lambda_opt - 0.1)?.min(h(coef.lambda_opt + 0.1)?);
        out.push(at_most(
            format!("lambda-vertex-{}", v.name()),
            rel_diff(vertex(xs, ys), coef.lambda_opt),
            1e-10,
        ));
        out.push(at_most(format!("lambda-minimum-{}", v.name()), at - nearby, 0.0));
        out.push(below(format!("lambda-discriminant-{}", v.name()), coef.discriminant(), 0.0));
    }
    Ok(out)
}

fn monotonicity(c: &mut Ctx) -> CliResult<Vec<PropertyResult>> {
    let Some(cmp) = &c.cfg.compare else {
        return Ok(Vec::new());
    };
    let (first, second, q0) = c.p.comparison(cmp)?;
    let rep = compare_states(
        &c.p.ops,
        &c.p.grid,
        &first,
        &second,
        q0,
        c.cfg.scalar_variant(cmp.variant),
        cmp.lumped,
    )?;
    Ok(vec![at_most("monotonicity", rep.max_violation, MONOTONICITY_TOL)])
}

/// Closed forms for the unit interval with one Dirichlet end.
pub fn interval_lambda0() -> f64 {
    let k = std::f64::consts::PI * std::f64::consts::PI / 4.0;
    k / (1.0 + k)
}

pub fn interval_trace_norm_sq() -> f64 {
    1.0 / 1f64.tanh()
}

fn spectral(c: &mut Ctx) -> CliResult<Vec<PropertyResult>> {
    let ops = &c.p.ops;
    if c.cfg.mesh.dim != 1 {
        return Ok(vec![at_least("spectral-lambda0-positive", ops.lambda0, 0.0)]);
    }
    Ok(vec![
        at_most("spectral-lambda0", (ops.lambda0 - interval_lambda0()).abs(), 1e-3),
        at_most(
            "spectral-trace-norm-sq",
            (ops.trace_norm * ops.trace_norm - interval_trace_norm_sq()).abs(),
            1e-3,
        ),
    ])
}

fn decay(c: &mut Ctx) -> CliResult<Vec<PropertyResult>> {
    let p = c.p;
    if p.grid.dt() * p.ops.lambda0 > 0.1 {
        return Ok(Vec::new());
    }
    // Freeze the data at t = 0 so the study's constant-data precondition holds.
    let spec = ProblemSpec {
        g: TimeField::constant(&p.grid, p.spec.g.row(0)),
        ..p.spec.clone()
    };
    let q = BoundaryControl::constant(&p.grid, p.q.row(0));
    let study = decay_study(&p.ops, &spec, &q, &p.grid)?;
    let max_ratio = study.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let mut out = vec![at_most("decay-bound", max_ratio, DECAY_SLACK)];
    if let Some(rate) = study.fitted_rate {
        out.push(at_least("decay-rate", rate, 0.5 * study.lambda0));
    }
    Ok(out)
}

fn counterexample(_: &mut Ctx) -> CliResult<Vec<PropertyResult>> {
    let dt = 1e-3;
    let r = counterexample_quadrature(10.0, dt)?;
    Ok(vec![
        at_most("counterexample-pointwise", r.pointwise_value_at_tmax, 1e-8),
        at_most("counterexample-cumulative", (r.cumulative_integral_at_tmax - 0.5).abs(), 2.0 * dt),
    ])
}

/// Runs the configured suites (all of them by default) in a fixed order.
pub fn run_suites(cfg: &RunConfig, p: &Problem) -> CliResult<Vec<PropertyResult>> {
    let selected: Vec<&str> = match &cfg.suites {
        Some(list) => {
            for s in list {
                if !SUITES.contains(&s.as_str()) {
                    return Err(CliError::config(
                        None,
                        format!("unknown verify suite '{s}' (known: {})", SUITES.join(", ")),
                    ));
                }
            }
            SUITES.iter().copied().filter(|s| list.iter().any(|l| l == s)).collect()
        }
        None => SUITES.to_vec(),
    };
    let mut ctx = Ctx {
        cfg,
        p,
        rng: ChaCha8Rng::seed_from_u64(cfg.seed),
    };
    let mut out = Vec::new();
    for s in selected {
        let rows = match s {
            "duality" => duality(&mut ctx)?,
            "gradient" => gradient(&mut ctx)?,
            "convexity" => convexity(&mut ctx)?,
            "optimality" => optimality(&mut ctx)?,
            "gap" => gap(&mut ctx)?,
            "lambda" => lambda(&mut ctx)?,
            "monotonicity" => monotonicity(&mut ctx)?,
            "spectral" => spectral(&mut ctx)?,
            "decay" => decay(&mut ctx)?,
            "counterexample" => counterexample(&mut ctx)?,
            _ => unreachable!("suite names are validated"),
        };
        out.extend(rows);
    }
    Ok(out)
}
