//! Interval and unit-square meshes with boundary facets tagged as the
//! Dirichlet/Robin part (`Gamma1`) or the flux-controlled part (`Gamma2`).

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum BoundaryTag {
    Gamma1,
    Gamma2,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
#[serde(rename_all = "SCREAMING_SNAKE_CASE")]
pub enum Side {
    Left,
    Right,
    Top,
    Bottom,
}

impl std::str::FromStr for Side {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s.trim().to_ascii_lowercase().as_str() {
            "left" => Ok(Side::Left),
            "right" => Ok(Side::Right),
            "top" => Ok(Side::Top),
            "bottom" => Ok(Side::Bottom),
            other => Err(Error::InvalidInput(format!("unknown side '{other}'"))),
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Facet {
    pub nodes: Vec<usize>,
    pub tag: BoundaryTag,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Mesh {
    pub dim: usize,
    pub nodes: Vec<Vec<f64>>,
    pub elements: Vec<Vec<usize>>,
    pub facets: Vec<Facet>,
}

impl Mesh {
    /// Validates and wraps raw mesh data.
    pub fn new(
        dim: usize,
        nodes: Vec<Vec<f64>>,
        elements: Vec<Vec<usize>>,
        facets: Vec<Facet>,
    ) -> Result<Self> {
        let mesh = Self {
            dim,
            nodes,
            elements,
            facets,
        };
        mesh.validate()?;
        Ok(mesh)
    }

    pub fn validate(&self) -> Result<()> {
        if self.dim != 1 && self.dim != 2 {
            return Err(Error::InvalidMesh(format!("dimension {} not supported", self.dim)));
        }
        let n = self.nodes.len();
        if let Some(p) = self.nodes.iter().find(|p| p.len() != self.dim) {
            return Err(Error::InvalidMesh(format!(
                "node has {} coordinates in a {}D mesh",
                p.len(),
                self.dim
            )));
        }
        for (e, el) in self.elements.iter().enumerate() {
            if el.len() != self.dim + 1 {
                return Err(Error::InvalidMesh(format!("element {e} has {} nodes", el.len())));
            }
            if el.iter().any(|&i| i >= n) {
                return Err(Error::InvalidMesh(format!("element {e} references a missing node")));
            }
        }
        for (f, facet) in self.facets.iter().enumerate() {
            if facet.nodes.len() != self.dim {
                return Err(Error::InvalidMesh(format!("facet {f} has {} nodes", facet.nodes.len())));
            }
            if facet.nodes.iter().any(|&i| i >= n) {
                return Err(Error::InvalidMesh(format!("facet {f} references a missing node")));
            }
        }
        for tag in [BoundaryTag::Gamma1, BoundaryTag::Gamma2] {
            let m = self.boundary_measure(tag);
            if !(m > 0.0) {
                return Err(Error::InvalidMesh(format!("{tag:?} has zero measure")));
            }
        }
        Ok(())
    }

    pub fn num_nodes(&self) -> usize {
        self.nodes.len()
    }

    /// Length of an edge facet, or 1 for a point facet (counting measure).
    pub fn facet_measure(&self, facet: &Facet) -> f64 {
        match self.dim {
            1 => 1.0,
            _ => {
                let a = &self.nodes[facet.nodes[0]];
                let b = &self.nodes[facet.nodes[1]];
                ((a[0] - b[0]).powi(2) + (a[1] - b[1]).powi(2)).sqrt()
            }
        }
    }

    pub fn boundary_measure(&self, tag: BoundaryTag) -> f64 {
        self.facets
            .iter()
            .filter(|f| f.tag == tag)
            .map(|f| self.facet_measure(f))
            .sum()
    }

    /// Sorted, deduplicated nodes lying on facets with the given tag.
    pub fn tagged_nodes(&self, tag: BoundaryTag) -> Vec<usize> {
        let mut v: Vec<usize> = self
            .facets
            .iter()
            .filter(|f| f.tag == tag)
            .flat_map(|f| f.nodes.iter().copied())
            .collect();
        v.sort_unstable();
        v.dedup();
        v
    }

    /// Signed measure of an element (length or triangle area).
    pub fn element_measure(&self, e: usize) -> f64 {
        let el = &self.elements[e];
        match self.dim {
            1 => self.nodes[el[1]][0] - self.nodes[el[0]][0],
            _ => {
                let (a, b, c) = (&self.nodes[el[0]], &self.nodes[el[1]], &self.nodes[el[2]]);
                0.5 * ((b[0] - a[0]) * (c[1] - a[1]) - (c[0] - a[0]) * (b[1] - a[1]))
            }
        }
    }

    /// Largest interior angle over all triangles, in radians. Zero for 1D meshes.
    pub fn max_angle(&self) -> f64 {
        if self.dim == 1 {
            return 0.0;
        }
        let mut worst = 0.0_f64;
        for el in &self.elements {
            for k in 0..3 {
                let p = &self.nodes[el[k]];
                let q = &self.nodes[el[(k + 1) % 3]];
                let r = &self.nodes[el[(k + 2) % 3]];
                let u = [q[0] - p[0], q[1] - p[1]];
                let v = [r[0] - p[0], r[1] - p[1]];
                let cos = (u[0] * v[0] + u[1] * v[1])
                    / ((u[0] * u[0] + u[1] * u[1]).sqrt() * (v[0] * v[0] + v[1] * v[1]).sqrt());
                worst = worst.max(cos.clamp(-1.0, 1.0).acos());
            }
        }
        worst
    }

    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("mesh serialization cannot fail")
    }

    pub fn from_json(s: &str) -> Result<Self> {
        let mesh: Mesh =
            serde_json::from_str(s).map_err(|e| Error::InvalidMesh(format!("bad mesh JSON: {e}")))?;
        mesh.validate()?;
        Ok(mesh)
    }
}

/// Uniform mesh of `[left, right]`; the endpoint on `gamma1_side` is tagged
/// `Gamma1` and the other endpoint `Gamma2`.
pub fn build_interval_mesh(n_cells: usize, left: f64, right: f64, gamma1_side: Side) -> Result<Mesh> {
    if n_cells < 2 {
        return Err(Error::InvalidMesh(format!("need at least 2 cells, got {n_cells}")));
    }
    if !(left < right) || !left.is_finite() || !right.is_finite() {
        return Err(Error::InvalidMesh(format!("degenerate interval [{left}, {right}]")));
    }
    let (g1, g2) = match gamma1_side {
        Side::Left => (0, n_cells),
        Side::Right => (n_cells, 0),
        other => {
            return Err(Error::InvalidMesh(format!("interval has no {other:?} side")));
        }
    };
    let h = (right - left) / n_cells as f64;
    let nodes = (0..=n_cells)
        .map(|i| vec![if i == n_cells { right } else { left + i as f64 * h }])
        .collect();
    let elements = (0..n_cells).map(|i| vec![i, i + 1]).collect();
    let facets = vec![
        Facet {
            nodes: vec![g1],
            tag: BoundaryTag::Gamma1,
        },
        Facet {
            nodes: vec![g2],
            tag: BoundaryTag::Gamma2,
        },
    ];
    Mesh::new(1, nodes, elements, facets)
}

/// Unit square with `nx * ny` cells, each split into two right triangles
/// along the same diagonal. Edges listed in `gamma1_edges` are `Gamma1`,
/// the rest `Gamma2`.
pub fn build_rect_mesh(nx: usize, ny: usize, gamma1_edges: &[Side]) -> Result<Mesh> {
    if nx < 2 || ny < 2 {
        return Err(Error::InvalidMesh(format!("need nx, ny >= 2, got {nx}x{ny}")));
    }
    let mut g1 = gamma1_edges.to_vec();
    g1.sort_by_key(|s| *s as u8);
    g1.dedup();
    if g1.is_empty() {
        return Err(Error::InvalidMesh("no Gamma1 edge given, |Gamma1| would be 0".into()));
    }
    if g1.len() == 4 {
        return Err(Error::InvalidMesh("all edges in Gamma1, |Gamma2| would be 0".into()));
    }
    let id = |i: usize, j: usize| j * (nx + 1) + i;
    let mut nodes = Vec::with_capacity((nx + 1) * (ny + 1));
    for j in 0..=ny {
        for i in 0..=nx {
            nodes.push(vec![i as f64 / nx as f64, j as f64 / ny as f64]);
        }
    }
    let mut elements = Vec::with_capacity(2 * nx * ny);
    for j in 0..ny {
        for i in 0..nx {
            let (n00, n10, n01, n11) = (id(i, j), id(i + 1, j), id(i, j + 1), id(i + 1, j + 1));
            elements.push(vec![n00, n10, n11]);
            elements.push(vec![n00, n11, n01]);
        }
    }
    let tag_of = |side: Side| {
        if g1.contains(&side) {
            BoundaryTag::Gamma1
        } else {
            BoundaryTag::Gamma2
        }
    };
    let mut facets = Vec::with_capacity(2 * (nx + ny));
    for i in 0..nx {
        facets.push(Facet {
            nodes: vec![id(i, 0), id(i + 1, 0)],
            tag: tag_of(Side::Bottom),
        });
        facets.push(Facet {
            nodes: vec![id(i, ny), id(i + 1, ny)],
            tag: tag_of(Side::Top),
        });
    }
    for j in 0..ny {
        facets.push(Facet {
            nodes: vec![id(0, j), id(0, j + 1)],
            tag: tag_of(Side::Left),
        });
        facets.push(Facet {
            nodes: vec![id(nx, j), id(nx, j + 1)],
            tag: tag_of(Side::Right),
        });
    }
    Mesh::new(2, nodes, elements, facets)
}
