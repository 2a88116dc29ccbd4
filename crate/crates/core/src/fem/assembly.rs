//! P1 assembly of stiffness, mass and boundary-mass matrices, plus the
//! discrete inner products and norms every other module measures with.

use super::fields::{BoundaryControl, TimeField, TimeGrid};
use super::linalg::CsrMatrix;
use super::mesh::{BoundaryTag, Mesh};
use super::spectral::{
    largest_generalized_eigenvalue, smallest_generalized_eigenvalue, EIGEN_MAX_ITER, EIGEN_TOL,
};
use crate::error::{shape_check, Error, Result};

/// Which mass-type matrices a solver should use.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Default)]
pub enum MassKind {
    #[default]
    Consistent,
    /// Row-sum lumped domain and boundary masses (discrete maximum principle).
    Lumped,
}

/// Function space on which a coercivity constant is measured.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum FunctionSpace {
    /// Functions vanishing on `Gamma1`, form `a(u, v)`.
    V0,
    /// All of `H1`, form `a(u, v) + ∫_Γ1 u v`.
    VRobin,
}

#[derive(Debug, Clone)]
pub struct DiscreteOperators {
    pub dim: usize,
    pub stiffness: CsrMatrix,
    pub mass: CsrMatrix,
    pub mass_lumped: CsrMatrix,
    pub boundary_mass_g1: CsrMatrix,
    pub boundary_mass_g1_lumped: CsrMatrix,
    pub boundary_mass_g2: CsrMatrix,
    pub boundary_mass_g2_lumped: CsrMatrix,
    /// `Gamma1` nodes, sorted; `b` data is indexed in this order.
    pub dirichlet_nodes: Vec<usize>,
    /// Complement of `dirichlet_nodes`, sorted.
    pub free_nodes: Vec<usize>,
    /// `Gamma2` nodes, sorted; boundary controls are indexed in this order.
    pub gamma2_nodes: Vec<usize>,
    /// `B_G2` restricted to the `Gamma2` nodes.
    pub gamma2_gram: CsrMatrix,
    /// Coercivity constant of `a` on `V0` relative to the `H1` norm.
    pub lambda0: f64,
    /// Coercivity constant of `a + ∫_Γ1 u v` on `V`.
    pub lambda1: f64,
    /// Norm of the trace map `V -> L2(Gamma2)`.
    pub trace_norm: f64,
    pub domain_measure: f64,
}

fn element_matrices(mesh: &Mesh, e: usize) -> Result<(Vec<f64>, Vec<f64>)> {
    let el = &mesh.elements[e];
    let meas = mesh.element_measure(e);
    if meas.abs() <= 1e-14 {
        return Err(Error::InvalidMesh(format!("element {e} has zero measure")));
    }
    match mesh.dim {
        1 => {
            let h = meas.abs();
            let k = vec![1.0 / h, -1.0 / h, -1.0 / h, 1.0 / h];
            let m = vec![h / 3.0, h / 6.0, h / 6.0, h / 3.0];
            Ok((k, m))
        }
        _ => {
            let area = meas.abs();
            let p: Vec<&Vec<f64>> = el.iter().map(|&i| &mesh.nodes[i]).collect();
            let mut b = [0.0; 3];
            let mut c = [0.0; 3];
            for i in 0..3 {
                let j = (i + 1) % 3;
                let k = (i + 2) % 3;
                b[i] = p[j][1] - p[k][1];
                c[i] = p[k][0] - p[j][0];
            }
            let mut kmat = vec![0.0; 9];
            let mut mmat = vec![0.0; 9];
            for i in 0..3 {
                for j in 0..3 {
                    kmat[3 * i + j] = (b[i] * b[j] + c[i] * c[j]) / (4.0 * area);
                    mmat[3 * i + j] = area / 12.0 * if i == j { 2.0 } else { 1.0 };
                }
            }
            Ok((kmat, mmat))
        }
    }
}

fn boundary_mass(mesh: &Mesh, tag: BoundaryTag) -> CsrMatrix {
    let n = mesh.num_nodes();
    let mut trips = Vec::new();
    for f in mesh.facets.iter().filter(|f| f.tag == tag) {
        match mesh.dim {
            1 => trips.push((f.nodes[0], f.nodes[0], 1.0)),
            _ => {
                let len = mesh.facet_measure(f);
                let (a, b) = (f.nodes[0], f.nodes[1]);
                trips.push((a, a, len / 3.0));
                trips.push((b, b, len / 3.0));
                trips.push((a, b, len / 6.0));
                trips.push((b, a, len / 6.0));
            }
        }
    }
    CsrMatrix::from_triplets(n, &trips)
}

/// Assembles all matrices and computes the spectral constants.
pub fn assemble(mesh: &Mesh) -> Result<DiscreteOperators> {
    mesh.validate()?;
    let n = mesh.num_nodes();
    let mut k_trips = Vec::new();
    let mut m_trips = Vec::new();
    let mut measure = 0.0;
    for (e, el) in mesh.elements.iter().enumerate() {
        let (ke, me) = element_matrices(mesh, e)?;
        measure += mesh.element_measure(e).abs();
        let nl = el.len();
        for a in 0..nl {
            for b in 0..nl {
                k_trips.push((el[a], el[b], ke[nl * a + b]));
                m_trips.push((el[a], el[b], me[nl * a + b]));
            }
        }
    }
    let stiffness = CsrMatrix::from_triplets(n, &k_trips);
    let mass = CsrMatrix::from_triplets(n, &m_trips);
    let boundary_mass_g1 = boundary_mass(mesh, BoundaryTag::Gamma1);
    let boundary_mass_g2 = boundary_mass(mesh, BoundaryTag::Gamma2);
    let dirichlet_nodes = mesh.tagged_nodes(BoundaryTag::Gamma1);
    let gamma2_nodes = mesh.tagged_nodes(BoundaryTag::Gamma2);
    let free_nodes: Vec<usize> = (0..n).filter(|i| dirichlet_nodes.binary_search(i).is_err()).collect();
    if free_nodes.is_empty() {
        return Err(Error::InvalidMesh("every node lies on Gamma1".into()));
    }
    let gamma2_gram = boundary_mass_g2.principal_submatrix(&gamma2_nodes);

    let mut ops = DiscreteOperators {
        dim: mesh.dim,
        mass_lumped: mass.lumped(),
        boundary_mass_g1_lumped: boundary_mass_g1.lumped(),
        boundary_mass_g2_lumped: boundary_mass_g2.lumped(),
        stiffness,
        mass,
        boundary_mass_g1,
        boundary_mass_g2,
        dirichlet_nodes,
        free_nodes,
        gamma2_nodes,
        gamma2_gram,
        lambda0: f64::NAN,
        lambda1: f64::NAN,
        trace_norm: f64::NAN,
        domain_measure: measure,
    };
    ops.lambda0 = coercivity_constant(&ops, FunctionSpace::V0)?;
    ops.lambda1 = coercivity_constant(&ops, FunctionSpace::VRobin)?;
    ops.trace_norm = trace_norm(&ops)?;
    Ok(ops)
}

/// Smallest generalized eigenvalue of the relevant form against `K + M_H`.
pub fn coercivity_constant(ops: &DiscreteOperators, space: FunctionSpace) -> Result<f64> {
    let h1 = ops.h1_matrix();
    let pair = match space {
        FunctionSpace::V0 => smallest_generalized_eigenvalue(
            &ops.stiffness.principal_submatrix(&ops.free_nodes),
            &h1.principal_submatrix(&ops.free_nodes),
            EIGEN_TOL,
            EIGEN_MAX_ITER,
        )?,
        FunctionSpace::VRobin => smallest_generalized_eigenvalue(
            &ops.stiffness.linear_combination(1.0, &ops.boundary_mass_g1, 1.0),
            &h1,
            EIGEN_TOL,
            EIGEN_MAX_ITER,
        )?,
    };
    Ok(pair.value)
}

/// Square root of the largest eigenvalue of `B_G2 x = μ (K + M_H) x`.
pub fn trace_norm(ops: &DiscreteOperators) -> Result<f64> {
    let pair = largest_generalized_eigenvalue(
        &ops.boundary_mass_g2,
        &ops.h1_matrix(),
        EIGEN_TOL,
        EIGEN_MAX_ITER,
    )?;
    Ok(pair.value.sqrt())
}

impl DiscreteOperators {
    pub fn num_nodes(&self) -> usize {
        self.stiffness.dim()
    }

    pub fn num_gamma2(&self) -> usize {
        self.gamma2_nodes.len()
    }

    pub fn num_gamma1(&self) -> usize {
        self.dirichlet_nodes.len()
    }

    /// `K + M_H`, the matrix of the `H1` inner product.
    pub fn h1_matrix(&self) -> CsrMatrix {
        self.stiffness.linear_combination(1.0, &self.mass, 1.0)
    }

    /// Robin coercivity constant `λ1 · min(1, α)`.
    pub fn lambda_alpha(&self, alpha: f64) -> f64 {
        self.lambda1 * alpha.min(1.0)
    }

    pub fn mass_matrix(&self, kind: MassKind) -> &CsrMatrix {
        match kind {
            MassKind::Consistent => &self.mass,
            MassKind::Lumped => &self.mass_lumped,
        }
    }

    pub fn gamma1_mass(&self, kind: MassKind) -> &CsrMatrix {
        match kind {
            MassKind::Consistent => &self.boundary_mass_g1,
            MassKind::Lumped => &self.boundary_mass_g1_lumped,
        }
    }

    pub fn gamma2_mass(&self, kind: MassKind) -> &CsrMatrix {
        match kind {
            MassKind::Consistent => &self.boundary_mass_g2,
            MassKind::Lumped => &self.boundary_mass_g2_lumped,
        }
    }

    /// Embeds `Gamma2` values into a full nodal vector (zero elsewhere).
    pub fn embed_gamma2(&self, q: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes()];
        for (&node, &v) in self.gamma2_nodes.iter().zip(q) {
            out[node] = v;
        }
        out
    }

    pub fn trace_gamma2(&self, u: &[f64]) -> Vec<f64> {
        self.gamma2_nodes.iter().map(|&i| u[i]).collect()
    }

    /// Extends `Gamma1` values by zero to a full nodal vector.
    pub fn extend_gamma1(&self, b: &[f64]) -> Vec<f64> {
        let mut out = vec![0.0; self.num_nodes()];
        for (&node, &v) in self.dirichlet_nodes.iter().zip(b) {
            out[node] = v;
        }
        out
    }

    pub fn trace_gamma1(&self, u: &[f64]) -> Vec<f64> {
        self.dirichlet_nodes.iter().map(|&i| u[i]).collect()
    }

    /// Boundary trace of a whole time field onto `Gamma2`.
    pub fn trace_gamma2_field(&self, u: &TimeField) -> BoundaryControl {
        let mut out = BoundaryControl(super::fields::Frames::zeros(u.rows(), self.num_gamma2()));
        for k in 0..u.rows() {
            let t = self.trace_gamma2(u.row(k));
            out.row_mut(k).copy_from_slice(&t);
        }
        out
    }

    fn check_nodal(&self, what: &'static str, v: &[f64]) -> Result<()> {
        shape_check(what, self.num_nodes(), v.len(), v.len() == self.num_nodes())
    }

    /// `uᵀ M_H v`
    pub fn inner_h(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_nodal("inner_H", u)?;
        self.check_nodal("inner_H", v)?;
        Ok(self.mass.bilinear(u, v))
    }

    /// `qᵀ B_G2 r` on `Gamma2` values.
    pub fn inner_q(&self, q: &[f64], r: &[f64]) -> Result<f64> {
        let m = self.num_gamma2();
        shape_check("inner_Q", m, q.len(), q.len() == m)?;
        shape_check("inner_Q", m, r.len(), r.len() == m)?;
        Ok(self.gamma2_gram.bilinear(q, r))
    }

    /// `uᵀ (K + M_H) v`
    pub fn inner_v(&self, u: &[f64], v: &[f64]) -> Result<f64> {
        self.check_nodal("inner_V", u)?;
        self.check_nodal("inner_V", v)?;
        Ok(self.stiffness.bilinear(u, v) + self.mass.bilinear(u, v))
    }

    /// Right-endpoint rectangle rule `Σ_{k=1..N} dt (U_k, V_k)_H`.
    pub fn inner_script_h(&self, grid: &TimeGrid, u: &TimeField, v: &TimeField) -> Result<f64> {
        self.check_field("inner_scriptH", grid, u)?;
        self.check_field("inner_scriptH", grid, v)?;
        Ok(grid.dt()
            * (1..=grid.steps())
                .map(|k| self.mass.bilinear(u.row(k), v.row(k)))
                .sum::<f64>())
    }

    /// Right-endpoint rectangle rule `Σ_{k=1..N} dt (Q_k, R_k)_Q`.
    pub fn inner_script_q(
        &self,
        grid: &TimeGrid,
        q: &BoundaryControl,
        r: &BoundaryControl,
    ) -> Result<f64> {
        self.check_control("inner_scriptQ", grid, q)?;
        self.check_control("inner_scriptQ", grid, r)?;
        Ok(grid.dt()
            * (1..=grid.steps())
                .map(|k| self.gamma2_gram.bilinear(q.row(k), r.row(k)))
                .sum::<f64>())
    }

    pub fn norm_script_h(&self, grid: &TimeGrid, u: &TimeField) -> Result<f64> {
        Ok(self.inner_script_h(grid, u, u)?.max(0.0).sqrt())
    }

    pub fn norm_script_q(&self, grid: &TimeGrid, q: &BoundaryControl) -> Result<f64> {
        Ok(self.inner_script_q(grid, q, q)?.max(0.0).sqrt())
    }

    /// `L2(0,T;V)` norm with `(K + M_H)` as the `V` inner product.
    pub fn norm_l2v(&self, grid: &TimeGrid, w: &TimeField) -> Result<f64> {
        self.check_field("L2(V) norm", grid, w)?;
        let s: f64 = (1..=grid.steps())
            .map(|k| self.stiffness.quad_form(w.row(k)) + self.mass.quad_form(w.row(k)))
            .sum();
        Ok((grid.dt() * s).max(0.0).sqrt())
    }

    /// `L2(0,T;L2(Gamma1))` norm of `u - b`.
    pub fn gamma1_mismatch(&self, grid: &TimeGrid, u: &TimeField, b: &[f64]) -> Result<f64> {
        self.check_field("Gamma1 mismatch", grid, u)?;
        shape_check("Gamma1 data", self.num_gamma1(), b.len(), b.len() == self.num_gamma1())?;
        let bt = self.extend_gamma1(b);
        let mut s = 0.0;
        let mut w = vec![0.0; self.num_nodes()];
        for k in 1..=grid.steps() {
            for (i, wi) in w.iter_mut().enumerate() {
                *wi = u.row(k)[i] - bt[i];
            }
            s += self.boundary_mass_g1.quad_form(&w);
        }
        Ok((grid.dt() * s).max(0.0).sqrt())
    }

    pub fn check_field(&self, what: &'static str, grid: &TimeGrid, u: &TimeField) -> Result<()> {
        shape_check(
            what,
            format!("{}x{}", grid.steps() + 1, self.num_nodes()),
            format!("{}x{}", u.rows(), u.width()),
            u.matches(grid, self.num_nodes()),
        )
    }

    pub fn check_control(&self, what: &'static str, grid: &TimeGrid, q: &BoundaryControl) -> Result<()> {
        shape_check(
            what,
            format!("{}x{}", grid.steps() + 1, self.num_gamma2()),
            format!("{}x{}", q.rows(), q.width()),
            q.matches(grid, self.num_gamma2()),
        )
    }
}
