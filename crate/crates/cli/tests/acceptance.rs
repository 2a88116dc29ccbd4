//! One line per acceptance criterion, on the shipped desk-scale
//! benchmarks. Exits non-zero if any criterion fails.

use std::path::{Path, PathBuf};
use std::time::Instant;

use parctrl::commands::{run, Command};
use parctrl::manifest::Manifest;
use parctrl::problem::Problem;
use parctrl::verify::smooth_control;
use parctrl::RunConfig;
use parctrl_core::asymptotics::{alpha_sweep, counterexample_quadrature, SweepControl};
use parctrl_core::control::{
    control_gap_estimate, cost_j_variant, gradient_j_variant, optimize_boundary, optimize_simultaneous, CgOptions,
};
use parctrl_core::fem::{BoundaryControl, MassKind, TimeField};
use parctrl_core::scalar::{lambda_bar, restricted_cost, ScalarVariant};
use parctrl_core::state::{ParabolicSolver, Variant};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

/// `(π²/4) / (1 + π²/4)`, evaluated offline.
const LAMBDA0_INTERVAL: f64 = 0.711599560857999;
/// `coth(1)`, evaluated offline.
const COTH_1: f64 = 1.3130352854993315;
const TOL: f64 = 1e-10;
const ROBIN: f64 = 5.0;

type Check = Result<String, String>;

fn configs() -> PathBuf {
    Path::new(env!("CARGO_MANIFEST_DIR")).join("../../configs")
}

fn bench(name: &str) -> Problem {
    let cfg = RunConfig::from_file(&configs().join(format!("{name}.cfg"))).unwrap();
    Problem::build(&cfg).unwrap()
}

fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}

fn random_control(rng: &mut ChaCha8Rng, p: &Problem) -> BoundaryControl {
    let mut q = BoundaryControl::from_fn(&p.grid, p.ops.num_gamma2(), |_, _| rng.gen_range(-1.0..1.0));
    q.row_mut(0).fill(0.0);
    q
}

fn random_field(rng: &mut ChaCha8Rng, p: &Problem) -> TimeField {
    TimeField::from_fn(&p.grid, p.ops.num_nodes(), |_, _| rng.gen_range(-1.0..1.0))
}

fn ensure(ok: bool, detail: String) -> Check {
    if ok {
        Ok(detail)
    } else {
        Err(detail)
    }
}

fn duality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(101);
    let mut worst: f64 = 0.0;
    for p in [bench("bench-1d"), bench("bench-2d")] {
        for variant in [Variant::Dirichlet, Variant::Robin(ROBIN)] {
            let solver = ParabolicSolver::new(&p.ops, variant, &p.grid, MassKind::Consistent).unwrap();
            let zero_v = vec![0.0; p.ops.num_nodes()];
            let zero_b = vec![0.0; p.ops.num_gamma1()];
            for _ in 0..20 {
                let q = random_control(&mut rng, &p);
                let eta = random_control(&mut rng, &p);
                let u = solver.solve(&p.spec.v_b, &p.spec.b, Some(&p.spec.g), Some(&q)).unwrap();
                let r = u.combine(1.0, &p.spec.z_d, -1.0);
                let adj = solver.solve_adjoint(&r).unwrap();
                let w = solver.solve(&zero_v, &zero_b, None, Some(&eta)).unwrap();
                let lhs = p.ops.inner_script_h(&p.grid, &w, &r).unwrap();
                let rhs = -p.ops.inner_script_q(&p.grid, &eta, &p.ops.trace_gamma2_field(&adj)).unwrap();
                worst = worst.max(rel_diff(lhs, rhs));
            }
        }
    }
    ensure(worst <= 1e-10, format!("max relative gap {worst:.2e} (limit 1e-10)"))
}

fn gradient() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(202);
    let mut worst: f64 = 0.0;
    for p in [bench("bench-1d"), bench("bench-2d")] {
        let j = |q: &BoundaryControl| cost_j_variant(&p.ops, &p.spec, q, &p.grid, Variant::Dirichlet).unwrap();
        let points = p.gamma2_points();
        for _ in 0..10 {
            let q = smooth_control(&mut rng, &p.grid, &points);
            let eta = smooth_control(&mut rng, &p.grid, &points);
            let grad = gradient_j_variant(&p.ops, &p.spec, &q, &p.grid, Variant::Dirichlet).unwrap();
            let exact = p.ops.inner_script_q(&p.grid, &grad, &eta).unwrap();
            for eps in [1e-2, 1e-4] {
                let fd = (j(&q.combine(1.0, &eta, eps)) - j(&q.combine(1.0, &eta, -eps))) / (2.0 * eps);
                worst = worst.max(rel_diff(fd, exact));
            }
        }
    }
    ensure(worst <= 1e-9, format!("max relative error {worst:.2e} (limit 1e-9)"))
}

fn optimality() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(303);
    let mut notes = Vec::new();
    let mut ok = true;
    for name in ["bench-1d", "bench-2d"] {
        let p = bench(name);
        let r = optimize_boundary(&p.ops, &p.spec, &p.grid, TOL, Variant::Dirichlet).unwrap();
        let mut beaten = 0;
        for _ in 0..100 {
            let eta = random_control(&mut rng, &p);
            let probe = r.q_opt.combine(1.0, &eta, rng.gen_range(0.001..1.0));
            if cost_j_variant(&p.ops, &p.spec, &probe, &p.grid, Variant::Dirichlet).unwrap() < r.cost {
                beaten += 1;
            }
        }
        ok &= r.converged && r.optimality_residual <= TOL && r.iterations <= 200 && beaten == 0;
        notes.push(format!(
            "{name}: residual {:.2e} in {} iterations, {beaten}/100 probes below",
            r.optimality_residual, r.iterations
        ));
    }
    ensure(ok, notes.join("; "))
}

fn convexity() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(404);
    let p = bench("bench-1d");
    let solver = ParabolicSolver::new(&p.ops, Variant::Dirichlet, &p.grid, MassKind::Consistent).unwrap();
    let j = |q: &BoundaryControl| cost_j_variant(&p.ops, &p.spec, q, &p.grid, Variant::Dirichlet).unwrap();
    let zero_v = vec![0.0; p.ops.num_nodes()];
    let zero_b = vec![0.0; p.ops.num_gamma1()];
    let mut worst: f64 = 0.0;
    for _ in 0..20 {
        let q1 = random_control(&mut rng, &p);
        let q2 = random_control(&mut rng, &p);
        let t: f64 = rng.gen_range(0.0..1.0);
        let defect = (1.0 - t) * j(&q2) + t * j(&q1) - j(&q2.combine(1.0 - t, &q1, t));
        let dq = q2.combine(1.0, &q1, -1.0);
        let du = p.ops.norm_script_h(&p.grid, &solver.solve(&zero_v, &zero_b, None, Some(&dq)).unwrap()).unwrap();
        let nq = p.ops.norm_script_q(&p.grid, &dq).unwrap();
        let expected = 0.5 * t * (1.0 - t) * (du * du + p.spec.m * nq * nq);
        worst = worst.max(rel_diff(defect, expected));
    }
    ensure(worst <= 1e-10, format!("max relative defect {worst:.2e} (limit 1e-10)"))
}

fn robin_limit() -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    for name in ["bench-1d", "bench-2d"] {
        let p = bench(name);
        let opts = CgOptions { tol: TOL, max_iter: 500 };
        let rows = alpha_sweep(
            &p.ops,
            &p.spec,
            &p.grid,
            &SweepControl::Optimize(opts),
            &[10.0, 100.0, 1000.0, 10000.0],
            4,
        )
        .unwrap();
        let check = |f: &dyn Fn(usize) -> f64| {
            (1..rows.len()).all(|i| f(i) < f(i - 1)) && f(rows.len() - 1) <= f(0) / 10.0
        };
        let state = check(&|i| rows[i].err_state);
        let adjoint = check(&|i| rows[i].err_adjoint);
        let control = check(&|i| rows[i].err_control.unwrap());
        let mismatch = rows.iter().map(|r| r.boundary_mismatch).fold(0.0, f64::max) <= 2.0 * rows[0].boundary_mismatch;
        let converged = rows.iter().all(|r| r.converged);
        ok &= state && adjoint && control && mismatch && converged;
        let last = rows.len() - 1;
        notes.push(format!(
            "{name}: state x{:.0}, adjoint x{:.0}, control x{:.0} reduction",
            rows[0].err_state / rows[last].err_state,
            rows[0].err_adjoint / rows[last].err_adjoint,
            rows[0].err_control.unwrap() / rows[last].err_control.unwrap()
        ));
    }
    ensure(ok, notes.join("; "))
}

fn gap_estimate() -> Check {
    let mut rng = ChaCha8Rng::seed_from_u64(606);
    let p = bench("bench-1d");
    let mut worst: f64 = 0.0;
    for _ in 0..5 {
        let g = random_field(&mut rng, &p);
        let est = control_gap_estimate(&p.ops, &p.spec, &p.grid, &g, TOL, Variant::Dirichlet).unwrap();
        worst = worst.max(est.lhs / est.rhs);
    }
    let joint = optimize_simultaneous(&p.ops, &p.spec, &p.grid, TOL, Variant::Dirichlet).unwrap();
    let fixed = control_gap_estimate(&p.ops, &p.spec, &p.grid, &joint.g_opt, TOL, Variant::Dirichlet).unwrap();
    ensure(
        worst <= 1.0 + 1e-9 && fixed.lhs <= 1e-8,
        format!("max lhs/rhs {worst:.3}, fixed-point gap {:.2e}", fixed.lhs),
    )
}

fn vertex(xs: [f64; 3], ys: [f64; 3]) -> f64 {
    let [x0, x1, x2] = xs;
    let [y0, y1, y2] = ys;
    let num = (x1 - x0).powi(2) * (y1 - y2) - (x1 - x2).powi(2) * (y1 - y0);
    let den = (x1 - x0) * (y1 - y2) - (x1 - x2) * (y1 - y0);
    x1 - 0.5 * num / den
}

fn scalar_control() -> Check {
    let mut ok = true;
    let mut worst: f64 = 0.0;
    for name in ["bench-1d", "bench-2d"] {
        let p = bench(name);
        let q0 = p.q0.as_ref().unwrap();
        for v in [
            ScalarVariant::ParabolicDirichlet,
            ScalarVariant::ParabolicRobin(ROBIN),
            ScalarVariant::Elliptic,
            ScalarVariant::EllipticRobin(ROBIN),
        ] {
            let c = lambda_bar(&p.ops, &p.spec, q0, &p.grid, v).unwrap();
            let h = |l: f64| restricted_cost(&p.ops, &p.spec, q0, &p.grid, v, l).unwrap();
            let xs = [-1.0, 0.0, 1.0];
            let err = rel_diff(vertex(xs, xs.map(h)), c.lambda_opt);
            worst = worst.max(err);
            let l = c.lambda_opt;
            ok &= err <= 1e-10 && h(l) <= h(l + 0.1) && h(l) <= h(l - 0.1) && c.discriminant() < 0.0;
        }
    }
    ensure(ok, format!("max vertex mismatch {worst:.2e} over 4 variants x 2 meshes"))
}

fn csv_field(path: &Path, column: &str) -> String {
    let text = std::fs::read_to_string(path).unwrap();
    let mut lines = text.lines();
    let head: Vec<&str> = lines.next().unwrap().split(',').collect();
    let row: Vec<&str> = lines.next().unwrap().split(',').collect();
    row[head.iter().position(|h| *h == column).unwrap()].to_string()
}

fn monotonicity(work: &Path) -> Check {
    let mut worst = f64::NEG_INFINITY;
    let mut n = 0;
    for name in ["compare-1d", "compare-1d-negative", "compare-1d-robin", "compare-2d", "compare-1d-elliptic"] {
        let out = work.join(name);
        let r = run(Command::Lambda, &configs().join(format!("{name}.cfg")), Some(&out)).map_err(|e| e.to_string())?;
        if r.exit_code != 0 {
            return Err(format!("{name}: exit {}", r.exit_code));
        }
        worst = worst.max(csv_field(&out.join("compare.csv"), "max_violation").parse::<f64>().unwrap());
        n += 1;
    }
    ensure(worst <= 1e-12, format!("max violation {worst:.2e} over {n} configs (limit 1e-12)"))
}

fn decay(work: &Path) -> Check {
    let mut notes = Vec::new();
    let mut ok = true;
    for name in ["decay-1d", "decay-2d", "decay-forced-1d"] {
        let out = work.join(name);
        let r = run(Command::Decay, &configs().join(format!("{name}.cfg")), Some(&out)).map_err(|e| e.to_string())?;
        let summary = out.join("decay_summary.csv");
        let lambda0: f64 = csv_field(&summary, "lambda0").parse().unwrap();
        let violations: usize = csv_field(&summary, "violations").parse().unwrap();
        let cfg = RunConfig::from_file(&configs().join(format!("{name}.cfg"))).unwrap();
        let dt = cfg.t_final / cfg.steps as f64;
        ok &= r.exit_code == 0 && violations == 0 && dt * lambda0 <= 0.1;
        let fitted = csv_field(&summary, "fitted_rate");
        if !fitted.is_empty() {
            let rate: f64 = fitted.parse().unwrap();
            ok &= rate >= 0.5 * lambda0;
            notes.push(format!("{name}: rate {rate:.3} vs {:.3}", 0.5 * lambda0));
        } else {
            notes.push(format!("{name}: {violations} violations"));
        }
    }
    ensure(ok, notes.join("; "))
}

fn counterexample() -> Check {
    let dt = 1e-3;
    let r = counterexample_quadrature(10.0, dt).unwrap();
    let gap = (r.cumulative_integral_at_tmax - 0.5).abs();
    ensure(
        r.pointwise_value_at_tmax <= 1e-8 && gap <= 2.0 * dt,
        format!("pointwise {:.2e}, cumulative off by {gap:.2e}", r.pointwise_value_at_tmax),
    )
}

fn spectral() -> Check {
    let p = bench("bench-1d");
    let dl = (p.ops.lambda0 - LAMBDA0_INTERVAL).abs();
    let dg = (p.ops.trace_norm * p.ops.trace_norm - COTH_1).abs();
    ensure(dl <= 1e-3 && dg <= 1e-3, format!("lambda0 off by {dl:.2e}, trace norm^2 off by {dg:.2e}"))
}

fn determinism(work: &Path) -> Check {
    let cases = [
        (Command::Solve, "bench-1d"),
        (Command::Optimize, "bench-1d"),
        (Command::Lambda, "compare-1d"),
        (Command::SweepAlpha, "bench-1d"),
        (Command::Decay, "decay-forced-1d"),
        (Command::Verify, "bench-1d"),
    ];
    let mut files = 0;
    for (cmd, name) in cases {
        let first = work.join(format!("det-{}-a", cmd.name()));
        let second = work.join(format!("det-{}-b", cmd.name()));
        run(cmd, &configs().join(format!("{name}.cfg")), Some(&first)).map_err(|e| e.to_string())?;
        run(cmd, &first.join("manifest.json"), Some(&second)).map_err(|e| e.to_string())?;
        let m = Manifest::read(&first.join("manifest.json")).map_err(|e| e.to_string())?;
        for f in m.outputs.iter().filter(|f| f.file.ends_with(".csv")) {
            let a = std::fs::read(first.join(&f.file)).unwrap();
            let b = std::fs::read(second.join(&f.file)).unwrap();
            if a != b {
                return Err(format!("{} {}: {} differs", cmd.name(), name, f.file));
            }
            files += 1;
        }
    }
    Ok(format!("{files} CSV files identical across 6 commands"))
}

type Criterion<'a> = (&'static str, Box<dyn Fn() -> Check + 'a>);

fn main() {
    let work = tempfile::tempdir().unwrap();
    let w = work.path();
    let criteria: Vec<Criterion> = vec![
        ("1 adjoint duality", Box::new(duality)),
        ("2 gradient exactness", Box::new(gradient)),
        ("3 optimality", Box::new(optimality)),
        ("4 convexity identity", Box::new(convexity)),
        ("5 Robin to Dirichlet limit", Box::new(robin_limit)),
        ("6 control gap estimate", Box::new(gap_estimate)),
        ("7 closed-form scalar control", Box::new(scalar_control)),
        ("8 monotonicity", Box::new(|| monotonicity(w))),
        ("9 decay", Box::new(|| decay(w))),
        ("10 counterexample", Box::new(counterexample)),
        ("11 spectral constants", Box::new(spectral)),
        ("12 determinism", Box::new(|| determinism(w))),
    ];
    let mut failed = 0;
    for (name, check) in &criteria {
        let start = Instant::now();
        let result = std::panic::catch_unwind(std::panic::AssertUnwindSafe(check))
            .unwrap_or_else(|_| Err("panicked".to_string()));
        let secs = start.elapsed().as_secs_f64();
        match result {
            Ok(detail) => println!("[PASS] {name}: {detail} ({secs:.1}s)"),
            Err(detail) => {
                failed += 1;
                println!("[FAIL] {name}: {detail} ({secs:.1}s)");
            }
        }
    }
    println!("acceptance: {} passed, {failed} failed", criteria.len() - failed);
    if failed > 0 {
        std::process::exit(1);
    }
}
