//! Small deterministic scenes for tests, the gradient-check command, and the
//! browser demo.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use std::sync::Arc;

use crate::autodiff::ParamStore;
use crate::error::Result;
use crate::mesh::{build, Mesh, NodeType, Point};
use crate::model::{
    target_deltas, Inputs, Model, ModelConfig, Normalizers, RawFeatures, StepInput, Topology,
};
use crate::training::Sample;

/// One frame with its predecessor, scripted targets, and a successor.
#[derive(Debug, Clone)]
pub struct Scene {
    pub mesh: Mesh,
    pub prev: Vec<Point>,
    pub cur: Vec<Point>,
    pub quantities: Vec<Vec<f64>>,
    pub targets: Vec<Option<Point>>,
    pub next: Vec<Point>,
    pub next_quantities: Vec<Vec<f64>>,
}

impl Scene {
    pub fn step(&self) -> StepInput<'_> {
        StepInput {
            prev: &self.prev,
            cur: &self.cur,
            quantities: &self.quantities,
            targets: &self.targets,
        }
    }

    /// Feature statistics fitted on this single frame.
    pub fn normalizers(&self, topo: &Topology, config: &ModelConfig) -> Result<Normalizers> {
        let raw = RawFeatures::compute(topo, &self.step(), config)?;
        let mut norms = Normalizers::new(config);
        norms.observe(topo, &raw, &self.target());
        Ok(norms)
    }

    pub fn target(&self) -> crate::autodiff::Matrix {
        target_deltas(
            &self.cur,
            &self.next,
            &self.quantities,
            &self.next_quantities,
        )
    }

    /// The training sample of this frame under `norms`.
    pub fn sample(
        &self,
        topo: Arc<Topology>,
        norms: &Normalizers,
        config: &ModelConfig,
    ) -> Result<Sample> {
        let raw = RawFeatures::compute(&topo, &self.step(), config)?;
        let inputs = Inputs::new(&topo, &raw, norms, config);
        let target = norms.output.standardize(&self.target());
        Ok(Sample {
            topo,
            inputs,
            target,
        })
    }

    /// Adds `offset` to every position of the scene.
    pub fn translated(&self, offset: Point) -> Scene {
        let shift = |ps: &[Point]| -> Vec<Point> {
            ps.iter()
                .map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]])
                .collect()
        };
        let mut mesh = self.mesh.clone();
        mesh.vertices = shift(&mesh.vertices);
        Scene {
            mesh,
            prev: shift(&self.prev),
            cur: shift(&self.cur),
            quantities: self.quantities.clone(),
            targets: self
                .targets
                .iter()
                .map(|t| t.map(|p| [p[0] + offset[0], p[1] + offset[1], p[2] + offset[2]]))
                .collect(),
            next: shift(&self.next),
            next_quantities: self.next_quantities.clone(),
        }
    }
}

fn jitter(rng: &mut ChaCha8Rng, p: Point, amp: f64) -> Point {
    [
        p[0] + rng.random_range(-amp..amp),
        p[1] + rng.random_range(-amp..amp),
        p[2] + rng.random_range(-amp..amp),
    ]
}

/// Builds a frame around `mesh`: the current state is a small random
/// perturbation of the reference, scripted vertices move down by 0.01, and
/// the successor differs by small random deltas on free vertices.
pub fn scene_from_mesh(mesh: Mesh, quantities: usize, seed: u64) -> Scene {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale = 1e-3;
    let cur: Vec<Point> = mesh
        .vertices
        .iter()
        .map(|&p| jitter(&mut rng, p, scale))
        .collect();
    let prev: Vec<Point> = cur.iter().map(|&p| jitter(&mut rng, p, scale)).collect();
    let q: Vec<Vec<f64>> = (0..cur.len())
        .map(|_| {
            (0..quantities)
                .map(|_| rng.random_range(0.0..1.0))
                .collect()
        })
        .collect();
    let targets: Vec<Option<Point>> = (0..cur.len())
        .map(|v| {
            (mesh.node_type[v] == NodeType::Scripted)
                .then(|| [cur[v][0], cur[v][1], cur[v][2] - 0.01])
        })
        .collect();
    let next: Vec<Point> = (0..cur.len())
        .map(|v| match (mesh.node_type[v], targets[v]) {
            (_, Some(t)) => t,
            (NodeType::Normal, None) => jitter(&mut rng, cur[v], 2.0 * scale),
            _ => cur[v],
        })
        .collect();
    let next_q: Vec<Vec<f64>> = q
        .iter()
        .map(|row| {
            row.iter()
                .map(|x| x + rng.random_range(-0.1..0.1))
                .collect()
        })
        .collect();
    Scene {
        mesh,
        prev,
        cur,
        quantities: q,
        targets,
        next,
        next_quantities: next_q,
    }
}

/// Initial parameters of `model` with every bias and layer-norm offset
/// moved off zero.
///
/// A fresh initialisation has zero biases, so rows with all-zero inputs sit
/// exactly on a ReLU kink, where finite differences are meaningless.
pub fn generic_params(model: &Model, seed: u64) -> ParamStore {
    let mut params = model.init_params(seed);
    let mut rng = ChaCha8Rng::seed_from_u64(seed ^ 0x5eed);
    let names = params.names().to_vec();
    for (name, m) in names.iter().zip(params.values.iter_mut()) {
        if name.contains(".b") || name.ends_with("ln_bias") {
            m.data
                .iter_mut()
                .for_each(|x| *x += rng.random_range(-0.1..0.1));
        }
    }
    params
}

/// A unit hex (free) under a half-size scripted hex, 0.05 apart, so that a
/// contact radius of 0.1 yields exactly one facet pair.
pub fn two_hex_contact_mesh() -> Mesh {
    let mut mesh = build::hex_block([0.0; 3], [1, 1, 1], [1.0; 3], NodeType::Normal, 0);
    let top = build::hex_block(
        [0.25, 0.25, 1.05],
        [1, 1, 1],
        [0.5; 3],
        NodeType::Scripted,
        1,
    );
    mesh.append(&top).expect("same cell type");
    mesh
}

pub const TWO_HEX_CONTACT_RADIUS: f64 = 0.1;

/// A jittered `nx × ny × nz` free block under a jittered scripted plate, both
/// with tie-free element geometry.
pub fn press_block_mesh(dims: [usize; 3], seed: u64) -> Mesh {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let h = 0.1;
    let mut mesh = build::hex_block([0.0; 3], dims, [h; 3], NodeType::Normal, 0);
    let plate_z = dims[2] as f64 * h + 0.03;
    let plate = build::hex_block(
        [0.02, 0.01, plate_z],
        [dims[0].min(2), dims[1].min(2), 1],
        [h; 3],
        NodeType::Scripted,
        1,
    );
    mesh.append(&plate).expect("same cell type");
    for p in &mut mesh.vertices {
        *p = jitter(&mut rng, *p, 0.01 * h);
    }
    mesh
}
