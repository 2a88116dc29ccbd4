//! Command dispatch and result persistence.

use std::fmt::Write as _;
use std::path::{Path, PathBuf};
use std::time::Instant;

use parctrl_core::asymptotics::{
    alpha_sweep, decay_study, decay_to_csv, decay_with_forcing, sweep_to_csv, DecayStudy, SweepControl,
};
use parctrl_core::control::{optimize_boundary, optimize_distributed, optimize_simultaneous, CgOptions, OptimResult};
use parctrl_core::fem::{Frames, MassKind, TimeGrid};
use parctrl_core::scalar::{compare_states, lambda_bar, restricted_cost};
use parctrl_core::state::{EllipticSolver, ParabolicSolver, Variant};

use crate::config::{OptimizeProblem, RunConfig, SolveKind, SweepMode};
use crate::error::{CliError, CliResult};
use crate::manifest::{sha256_hex, Manifest, OutputFile, PropertyResult, SpectralConstants};
use crate::problem::{grid_hash, mesh_hash, Problem};
use crate::svg::{line_plot, Series};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Command {
    Solve,
    Optimize,
    Lambda,
    SweepAlpha,
    Decay,
    Verify,
}

impl Command {
    pub const ALL: [Command; 6] = [
        Command::Solve,
        Command::Optimize,
        Command::Lambda,
        Command::SweepAlpha,
        Command::Decay,
        Command::Verify,
    ];

    pub fn name(&self) -> &'static str {
        match self {
            Command::Solve => "solve",
            Command::Optimize => "optimize",
            Command::Lambda => "lambda",
            Command::SweepAlpha => "sweep-alpha",
            Command::Decay => "decay",
            Command::Verify => "verify",
        }
    }

    pub fn from_name(s: &str) -> Option<Self> {
        Self::ALL.into_iter().find(|c| c.name() == s)
    }
}

/// Files produced by a command, before they are written.
#[derive(Debug, Default)]
pub struct Outcome {
    pub files: Vec<(String, String)>,
    /// 0, 1 (failed properties) or 3 (non-convergence).
    pub exit_code: i32,
    pub verify: Vec<PropertyResult>,
    pub message: Option<String>,
}

impl Outcome {
    fn add(&mut self, name: &str, contents: String) {
        self.files.push((name.to_string(), contents));
    }
}

#[derive(Debug)]
pub struct RunReport {
    pub out_dir: PathBuf,
    pub manifest: Manifest,
    pub exit_code: i32,
    pub message: Option<String>,
}

pub const THREADS_ENV: &str = "PARCTRL_THREADS";

/// Worker count for sweeps: `PARCTRL_THREADS` if set, else the number of
/// available cores.
pub fn thread_cap() -> CliResult<usize> {
    match std::env::var(THREADS_ENV) {
        Ok(v) => match v.trim().parse::<usize>() {
            Ok(n) if n >= 1 => Ok(n),
            _ => Err(CliError::config(None, format!("{THREADS_ENV} must be a positive integer, found '{v}'"))),
        },
        Err(_) => Ok(std::thread::available_parallelism().map(|n| n.get()).unwrap_or(1)),
    }
}

fn variant_label(v: Variant) -> (&'static str, String) {
    match v {
        Variant::Dirichlet => ("dirichlet", "inf".to_string()),
        Variant::Robin(a) => ("robin", format!("{a:.17e}")),
    }
}

fn opts(cfg: &RunConfig) -> CgOptions {
    CgOptions {
        tol: cfg.tol,
        max_iter: cfg.max_iter,
    }
}

fn solve(cfg: &RunConfig, p: &Problem) -> CliResult<Outcome> {
    let variant = p.spec.variant();
    let (vname, alpha) = variant_label(variant);
    let mut out = Outcome::default();
    let cost;
    match cfg.solve_kind {
        SolveKind::Parabolic => {
            let solver = ParabolicSolver::new(&p.ops, variant, &p.grid, MassKind::Consistent)?;
            let u = solver.solve(&p.spec.v_b, &p.spec.b, Some(&p.spec.g), Some(&p.q))?;
            let adj = solver.solve_adjoint(&u.combine(1.0, &p.spec.z_d, -1.0))?;
            cost = parctrl_core::control::cost_j_variant(&p.ops, &p.spec, &p.q, &p.grid, variant)?;
            out.add("state.csv", u.to_csv(&p.grid, "u"));
            out.add("adjoint.csv", adj.to_csv(&p.grid, "p"));
        }
        SolveKind::Elliptic => {
            let last = p.grid.steps();
            let q = p.q.row(last);
            let u = EllipticSolver::new(&p.ops, variant, MassKind::Consistent)?.solve(p.spec.g.row(last), q, &p.spec.b)?;
            cost = parctrl_core::scalar::elliptic_cost(&p.ops, &p.spec, q, variant)?;
            let one = TimeGrid::new(p.grid.t_final(), 1)?;
            out.add("state.csv", Frames::from_rows(vec![u])?.to_csv(&one, "u"));
        }
    }
    let kind = match cfg.solve_kind {
        SolveKind::Parabolic => "parabolic",
        SolveKind::Elliptic => "elliptic",
    };
    out.add(
        "summary.csv",
        format!("problem,variant,alpha,cost\n{kind},{vname},{alpha},{cost:.17e}\n"),
    );
    Ok(out)
}

fn history_csv(r: &OptimResult) -> String {
    let mut s = String::from("iteration,cost,residual\n");
    for rec in &r.log {
        writeln!(s, "{},{:.17e},{:.17e}", rec.iteration, rec.cost, rec.residual).unwrap();
    }
    s
}

fn optimize(cfg: &RunConfig, p: &Problem) -> CliResult<Outcome> {
    let variant = p.spec.variant();
    let r = match cfg.problem {
        OptimizeProblem::Boundary => optimize_boundary(&p.ops, &p.spec, &p.grid, opts(cfg), variant)?,
        OptimizeProblem::Distributed => optimize_distributed(&p.ops, &p.spec, &p.grid, &p.q, opts(cfg), variant)?,
        OptimizeProblem::Simultaneous => optimize_simultaneous(&p.ops, &p.spec, &p.grid, opts(cfg), variant)?,
    };
    let mut out = Outcome::default();
    if cfg.problem != OptimizeProblem::Distributed {
        out.add("control.csv", r.q_opt.to_csv(&p.grid, "q"));
    }
    if cfg.problem != OptimizeProblem::Boundary {
        out.add("source.csv", r.g_opt.to_csv(&p.grid, "g"));
    }
    out.add("state.csv", r.u_opt.to_csv(&p.grid, "u"));
    out.add("adjoint.csv", r.p_opt.to_csv(&p.grid, "p"));
    out.add("history.csv", history_csv(&r));
    let (vname, alpha) = variant_label(variant);
    out.add(
        "summary.csv",
        format!(
            "problem,variant,alpha,cost,optimality_residual,initial_residual,iterations,converged\n\
             {},{vname},{alpha},{:.17e},{:.17e},{:.17e},{},{}\n",
            cfg.problem.name(),
            r.cost,
            r.optimality_residual,
            r.initial_residual,
            r.iterations,
            r.converged
        ),
    );
    if !r.converged {
        out.exit_code = 3;
        out.message = Some(format!(
            "optimizer stopped after {} iterations with residual {:e} > {:e}",
            r.iterations, r.optimality_residual, cfg.tol
        ));
    }
    Ok(out)
}

pub const LAMBDA_CSV_HEADER: &str = "variant,A,B,C,lambda_opt,H(lambda_opt)";
pub const COMPARE_CSV_HEADER: &str = "variant,lambda1,lambda2,lumped,max_violation,holds";

fn lambda(cfg: &RunConfig, p: &Problem) -> CliResult<Outcome> {
    let q0 = p.require_q0()?;
    let v = cfg.scalar_variant(cfg.lambda_kind);
    let c = lambda_bar(&p.ops, &p.spec, q0, &p.grid, v)?;
    let h = restricted_cost(&p.ops, &p.spec, q0, &p.grid, v, c.lambda_opt)?;
    let mut out = Outcome::default();
    out.add(
        "lambda.csv",
        format!(
            "{LAMBDA_CSV_HEADER}\n{},{:.17e},{:.17e},{:.17e},{:.17e},{:.17e}\n",
            v.name(),
            c.a,
            c.b,
            c.c,
            c.lambda_opt,
            h
        ),
    );
    if let Some(cmp) = &cfg.compare {
        let (first, second, _) = p.comparison(cmp)?;
        let cv = cfg.scalar_variant(cmp.variant);
        let rep = compare_states(&p.ops, &p.grid, &first, &second, q0, cv, cmp.lumped)?;
        out.add(
            "compare.csv",
            format!(
                "{COMPARE_CSV_HEADER}\n{},{:.17e},{:.17e},{},{:.17e},{}\n",
                cv.name(),
                cmp.lambda1,
                cmp.lambda2,
                cmp.lumped,
                rep.max_violation,
                rep.holds
            ),
        );
    }
    Ok(out)
}

fn sweep(cfg: &RunConfig, p: &Problem) -> CliResult<Outcome> {
    let control = match cfg.sweep_mode {
        SweepMode::Fixed => SweepControl::Fixed(p.q.clone()),
        SweepMode::Optimize => SweepControl::Optimize(opts(cfg)),
    };
    let rows = alpha_sweep(&p.ops, &p.spec, &p.grid, &control, &cfg.alphas, thread_cap()?)?;
    let mut out = Outcome::default();
    out.add("sweep.csv", sweep_to_csv(&rows));
    if cfg.plots {
        let col = |f: &dyn Fn(&parctrl_core::asymptotics::SweepRow) -> Option<f64>| -> Vec<(f64, f64)> {
            rows.iter().filter_map(|r| f(r).map(|v| (r.alpha, v))).collect()
        };
        let mut series = vec![
            Series { label: "err_state", points: col(&|r| Some(r.err_state)) },
            Series { label: "err_adjoint", points: col(&|r| Some(r.err_adjoint)) },
            Series { label: "boundary_mismatch", points: col(&|r| Some(r.boundary_mismatch)) },
        ];
        if cfg.sweep_mode == SweepMode::Optimize {
            series.push(Series { label: "err_control", points: col(&|r| r.err_control) });
        }
        out.add("sweep.svg", line_plot("Robin to Dirichlet limit", "alpha", "error", &series, true, true));
    }
    let bad: Vec<String> = rows.iter().filter(|r| !r.converged).map(|r| format!("{:e}", r.alpha)).collect();
    if !bad.is_empty() {
        out.exit_code = 3;
        out.message = Some(format!("optimizer did not converge at alpha = {}", bad.join(", ")));
    }
    Ok(out)
}

pub const DECAY_SUMMARY_HEADER: &str = "lambda0,half_lambda0,fitted_rate,source_forcing,flux_forcing,max_ratio,violations";

fn decay(cfg: &RunConfig, p: &Problem) -> CliResult<Outcome> {
    let study: DecayStudy = match &cfg.decay {
        None => decay_study(&p.ops, &p.spec, &p.q, &p.grid)?,
        Some(d) => {
            let last = p.grid.steps();
            let g_inf = match &d.g_inf {
                Some(prof) => p.node_vector("g_inf", prof)?,
                None => p.spec.g.row(last).to_vec(),
            };
            let q_inf = match &d.q_inf {
                Some(prof) => p.gamma2_vector("q_inf", prof)?,
                None => p.q.row(last).to_vec(),
            };
            decay_with_forcing(&p.ops, &p.spec, &p.q, &g_inf, &q_inf, &p.grid)?
        }
    };
    let mut out = Outcome::default();
    out.add("decay.csv", decay_to_csv(&study.rows));
    let max_ratio = study.rows.iter().map(|r| r.ratio).fold(0.0, f64::max);
    let fitted = study.fitted_rate.map(|r| format!("{r:.17e}")).unwrap_or_default();
    out.add(
        "decay_summary.csv",
        format!(
            "{DECAY_SUMMARY_HEADER}\n{:.17e},{:.17e},{fitted},{:.17e},{:.17e},{:.17e},{}\n",
            study.lambda0,
            0.5 * study.lambda0,
            study.source_forcing,
            study.flux_forcing,
            max_ratio,
            study.violations()
        ),
    );
    if cfg.plots {
        let series = [
            Series { label: "err_H", points: study.rows.iter().map(|r| (r.t, r.err_h)).collect() },
            Series { label: "bound", points: study.rows.iter().map(|r| (r.t, r.bound)).collect() },
        ];
        out.add("decay.svg", line_plot("Decay to the stationary state", "t", "error", &series, false, true));
    }
    Ok(out)
}

fn verify(cfg: &RunConfig, p: &Problem) -> CliResult<Outcome> {
    let results = crate::verify::run_suites(cfg, p)?;
    let mut csv = String::from("property,status,value,threshold\n");
    for r in &results {
        writeln!(csv, "{},{},{:.17e},{:.17e}", r.property, r.status, r.value, r.threshold).unwrap();
    }
    let failed: Vec<String> = results.iter().filter(|r| r.status != "pass").map(|r| r.property.clone()).collect();
    let mut out = Outcome::default();
    out.add("verify.csv", csv);
    if !failed.is_empty() {
        out.exit_code = 1;
        out.message = Some(format!("failed properties: {}", failed.join(", ")));
    }
    out.verify = results;
    Ok(out)
}

/// Runs `cmd` on a parsed config without touching the filesystem.
pub fn execute(cmd: Command, cfg: &RunConfig, p: &Problem) -> CliResult<Outcome> {
    match cmd {
        Command::Solve => solve(cfg, p),
        Command::Optimize => optimize(cfg, p),
        Command::Lambda => lambda(cfg, p),
        Command::SweepAlpha => sweep(cfg, p),
        Command::Decay => decay(cfg, p),
        Command::Verify => verify(cfg, p),
    }
}

/// Loads a config, or the config echoed in a manifest when the path ends in
/// `.json`.
pub fn load_config(cmd: Command, path: &Path) -> CliResult<RunConfig> {
    if path.extension().is_some_and(|e| e == "json") {
        let m = Manifest::read(path)?;
        if m.command != cmd.name() {
            return Err(CliError::config(
                None,
                format!("manifest records command '{}', not '{}'", m.command, cmd.name()),
            ));
        }
        RunConfig::parse(&m.config, &m.base_dir)
    } else {
        RunConfig::from_file(path)
    }
}

/// Full pipeline: load, build, execute, write outputs and manifest.
pub fn run(cmd: Command, config_path: &Path, out_override: Option<&Path>) -> CliResult<RunReport> {
    let start = Instant::now();
    let mut cfg = load_config(cmd, config_path)?;
    if let Ok(abs) = std::fs::canonicalize(&cfg.base_dir) {
        cfg.base_dir = abs;
    }
    let out_dir = out_override.map(Path::to_path_buf).unwrap_or_else(|| cfg.out_dir.clone());
    let problem = Problem::build(&cfg)?;
    let outcome = execute(cmd, &cfg, &problem)?;
    std::fs::create_dir_all(&out_dir).map_err(|e| CliError::io(&out_dir, e))?;
    let mut outputs = Vec::new();
    for (name, contents) in &outcome.files {
        let path = out_dir.join(name);
        std::fs::write(&path, contents).map_err(|e| CliError::io(&path, e))?;
        outputs.push(OutputFile {
            file: name.clone(),
            sha256: sha256_hex(contents.as_bytes()),
        });
    }
    let manifest = Manifest {
        tool: "parctrl".into(),
        version: env!("CARGO_PKG_VERSION").into(),
        command: cmd.name().into(),
        config: cfg.text.clone(),
        base_dir: cfg.base_dir.clone(),
        mesh_sha256: mesh_hash(&problem.mesh),
        grid_sha256: grid_hash(&problem.grid),
        spectral: SpectralConstants {
            lambda0: problem.ops.lambda0,
            lambda1: problem.ops.lambda1,
            trace_norm: problem.ops.trace_norm,
        },
        outputs,
        wall_time_seconds: start.elapsed().as_secs_f64(),
        exit_code: outcome.exit_code,
        verify: outcome.verify,
    };
    manifest.write(&out_dir)?;
    Ok(RunReport {
        out_dir,
        manifest,
        exit_code: outcome.exit_code,
        message: outcome.message,
    })
}
