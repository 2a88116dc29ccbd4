//! Turns a [`RunConfig`] into meshes, operators and sampled data.

use parctrl_core::fem::{
    assemble, build_interval_mesh, build_rect_mesh, BoundaryControl, DiscreteOperators, Mesh, TimeField,
    TimeGrid,
};
use parctrl_core::scalar::ComparisonSide;
use parctrl_core::state::{solve_elliptic_dirichlet, ProblemSpec};

use crate::config::{CompareConfig, RunConfig};
use crate::error::{CliError, CliResult};
use crate::profile::Profile;

pub struct Problem {
    pub mesh: Mesh,
    pub ops: DiscreteOperators,
    pub grid: TimeGrid,
    pub spec: ProblemSpec,
    /// Flux used by `solve`, `decay` and fixed-control sweeps.
    pub q: BoundaryControl,
    pub q0: Option<BoundaryControl>,
}

fn data_error(key: &str, message: impl std::fmt::Display) -> CliError {
    CliError::config(None, format!("data '{key}': {message}"))
}

pub fn build_mesh(cfg: &RunConfig) -> CliResult<Mesh> {
    let m = &cfg.mesh;
    Ok(if m.dim == 1 {
        build_interval_mesh(m.nx, 0.0, 1.0, m.gamma1[0])?
    } else {
        build_rect_mesh(m.nx, m.ny, &m.gamma1)?
    })
}

/// Node coordinates restricted to `idx`.
fn points(mesh: &Mesh, idx: &[usize]) -> Vec<Vec<f64>> {
    idx.iter().map(|&i| mesh.nodes[i].clone()).collect()
}

impl Problem {
    pub fn build(cfg: &RunConfig) -> CliResult<Self> {
        let mesh = build_mesh(cfg)?;
        let ops = assemble(&mesh)?;
        let grid = TimeGrid::new(cfg.t_final, cfg.steps)?;
        let times: Vec<f64> = grid.times().collect();
        let nodes = &mesh.nodes;
        let g1_pts = points(&mesh, &ops.dirichlet_nodes);
        let g2_pts = points(&mesh, &ops.gamma2_nodes);

        let field = |key: &str, p: &Profile| -> CliResult<TimeField> {
            Ok(TimeField(p.sample(nodes, &times, None).map_err(|e| data_error(key, e))?))
        };
        let control = |key: &str, p: &Profile| -> CliResult<BoundaryControl> {
            Ok(BoundaryControl(p.sample(&g2_pts, &times, None).map_err(|e| data_error(key, e))?))
        };
        let d = &cfg.data;
        let g = field("g", &d.g)?;
        let z_d = field("z_d", &d.z_d)?;
        let q = control("q", &d.q)?;
        let q0 = d.q0.as_ref().map(|p| control("q0", p)).transpose()?;
        let b = d.b.vector(&g1_pts, None).map_err(|e| data_error("b", e))?;
        let steady = if d.v_b.has_steady() {
            let last = grid.steps();
            Some(solve_elliptic_dirichlet(&ops, g.row(last), q.row(last), &b)?)
        } else {
            None
        };
        let v_b = d.v_b.vector(nodes, steady.as_deref()).map_err(|e| data_error("v_b", e))?;
        let spec = ProblemSpec::new(&ops, &grid, g, b, v_b, z_d, cfg.m, cfg.m1, cfg.alpha)?;
        Ok(Problem {
            mesh,
            ops,
            grid,
            spec,
            q,
            q0,
        })
    }

    pub fn points(&self) -> Vec<Vec<f64>> {
        self.mesh.nodes.clone()
    }

    pub fn gamma1_points(&self) -> Vec<Vec<f64>> {
        points(&self.mesh, &self.ops.dirichlet_nodes)
    }

    pub fn gamma2_points(&self) -> Vec<Vec<f64>> {
        points(&self.mesh, &self.ops.gamma2_nodes)
    }

    pub fn times(&self) -> Vec<f64> {
        self.grid.times().collect()
    }

    /// Samples a profile over all nodes and time levels.
    pub fn field(&self, key: &str, p: &Profile) -> CliResult<TimeField> {
        Ok(TimeField(p.sample(&self.mesh.nodes, &self.times(), None).map_err(|e| data_error(key, e))?))
    }

    /// Time-independent values over all nodes; `steady` is resolved against
    /// the final-time data with Gamma1 values `b`.
    pub fn initial(&self, key: &str, p: &Profile, b: &[f64]) -> CliResult<Vec<f64>> {
        let steady = if p.has_steady() {
            let last = self.grid.steps();
            Some(solve_elliptic_dirichlet(&self.ops, self.spec.g.row(last), self.q.row(last), b)?)
        } else {
            None
        };
        p.vector(&self.mesh.nodes, steady.as_deref()).map_err(|e| data_error(key, e))
    }

    pub fn gamma1_vector(&self, key: &str, p: &Profile) -> CliResult<Vec<f64>> {
        p.vector(&self.gamma1_points(), None).map_err(|e| data_error(key, e))
    }

    pub fn gamma2_vector(&self, key: &str, p: &Profile) -> CliResult<Vec<f64>> {
        p.vector(&self.gamma2_points(), None).map_err(|e| data_error(key, e))
    }

    pub fn node_vector(&self, key: &str, p: &Profile) -> CliResult<Vec<f64>> {
        p.vector(&self.mesh.nodes, None).map_err(|e| data_error(key, e))
    }

    /// Both sides of a `[compare]` study, plus the direction `q0`.
    pub fn comparison(&self, cmp: &CompareConfig) -> CliResult<(ComparisonSide, ComparisonSide, &BoundaryControl)> {
        let q0 = self.require_q0()?;
        let side = |lambda: f64, g: &Profile, b: &Profile, v_b: &Profile, tag: &str| -> CliResult<ComparisonSide> {
            let b = self.gamma1_vector(&format!("b{tag}"), b)?;
            let v_b = self.initial(&format!("v_b{tag}"), v_b, &b)?;
            Ok(ComparisonSide {
                lambda,
                g: self.field(&format!("g{tag}"), g)?,
                b,
                v_b,
            })
        };
        Ok((
            side(cmp.lambda1, &cmp.g1, &cmp.b1, &cmp.v_b1, "1")?,
            side(cmp.lambda2, &cmp.g2, &cmp.b2, &cmp.v_b2, "2")?,
            q0,
        ))
    }

    pub fn require_q0(&self) -> CliResult<&BoundaryControl> {
        self.q0
            .as_ref()
            .ok_or_else(|| CliError::config(None, "missing required key 'q0' in [data]"))
    }
}

/// `sha256` of the canonical JSON of the mesh.
pub fn mesh_hash(mesh: &Mesh) -> String {
    crate::manifest::sha256_hex(mesh.to_json().as_bytes())
}

pub fn grid_hash(grid: &TimeGrid) -> String {
    crate::manifest::sha256_hex(format!("{:.17e},{}", grid.t_final(), grid.steps()).as_bytes())
}
