#![allow(dead_code)]

use parctrl_core::fem::{
    assemble, build_interval_mesh, build_rect_mesh, BoundaryControl, DiscreteOperators, Mesh, Side, TimeField,
    TimeGrid,
};
use parctrl_core::state::ProblemSpec;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

pub struct Bench {
    pub mesh: Mesh,
    pub ops: DiscreteOperators,
    pub grid: TimeGrid,
    pub spec: ProblemSpec,
}

pub fn bump(mesh: &Mesh) -> Vec<f64> {
    mesh.nodes
        .iter()
        .map(|p| p.iter().map(|x| (std::f64::consts::PI * x).sin()).product())
        .collect()
}

/// Unit interval with `Gamma1 = {0}`, source 1, target `x/2`, bump initial state.
pub fn interval(cells: usize, t_final: f64, steps: usize) -> Bench {
    with_mesh(build_interval_mesh(cells, 0.0, 1.0, Side::Left).unwrap(), t_final, steps)
}

/// Unit square with `Gamma1` the left edge.
pub fn square(cells: usize, t_final: f64, steps: usize) -> Bench {
    with_mesh(build_rect_mesh(cells, cells, &[Side::Left]).unwrap(), t_final, steps)
}

pub fn with_mesh(mesh: Mesh, t_final: f64, steps: usize) -> Bench {
    let ops = assemble(&mesh).unwrap();
    let grid = TimeGrid::new(t_final, steps).unwrap();
    let n = ops.num_nodes();
    let z: Vec<f64> = mesh.nodes.iter().map(|p| 0.5 * p[0]).collect();
    let spec = ProblemSpec::new(
        &ops,
        &grid,
        TimeField::constant(&grid, &vec![1.0; n]),
        vec![0.0; ops.num_gamma1()],
        bump(&mesh),
        TimeField::constant(&grid, &z),
        1.0,
        1.0,
        None,
    )
    .unwrap();
    Bench { mesh, ops, grid, spec }
}

pub fn rng(seed: u64) -> ChaCha8Rng {
    ChaCha8Rng::seed_from_u64(seed)
}

pub fn random_control(rng: &mut ChaCha8Rng, b: &Bench) -> BoundaryControl {
    let mut q = BoundaryControl::from_fn(&b.grid, b.ops.num_gamma2(), |_, _| rng.gen_range(-1.0..1.0));
    q.row_mut(0).fill(0.0);
    q
}

pub fn random_field(rng: &mut ChaCha8Rng, b: &Bench) -> TimeField {
    TimeField::from_fn(&b.grid, b.ops.num_nodes(), |_, _| rng.gen_range(-1.0..1.0))
}

pub fn rel_diff(a: f64, b: f64) -> f64 {
    (a - b).abs() / a.abs().max(b.abs()).max(f64::MIN_POSITIVE)
}
