//! Synthetic press-on-beam trajectories: a free hex beam resting on two
//! static supports is pushed down by a scripted rigid press.

use std::collections::BTreeMap;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use super::oracle::{MassSpring, Material, OracleStepper};
use crate::error::{Error, Result};
use crate::mesh::{build, Mesh, NodeType, Point};
use crate::model::StepInput;
use crate::simulate::{Frame, Stepper, Trajectory};

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct OracleConfig {
    /// Beam size in cells along x, y, z.
    pub beam_cells: [usize; 3],
    pub spacing: f64,
    /// Press size in cells.
    pub press_cells: [usize; 3],
    /// Support size in cells; one support sits under each beam end.
    pub support_cells: [usize; 3],
    /// Initial clearance between press and beam beyond the contact gap.
    pub press_clearance: f64,
    /// Range of the total press descent.
    pub descent: [f64; 2],
    /// Range of the press centre's offset along the beam from mid-span.
    pub offset: [f64; 2],
    pub frames: usize,
    pub material: Material,
}

impl Default for OracleConfig {
    fn default() -> Self {
        OracleConfig {
            beam_cells: [12, 2, 2],
            spacing: 0.1,
            press_cells: [2, 2, 1],
            support_cells: [1, 2, 1],
            press_clearance: 0.02,
            descent: [0.05, 0.1],
            offset: [-0.2, 0.2],
            frames: 50,
            material: Material::default(),
        }
    }
}

impl OracleConfig {
    pub fn validate(&self) -> Result<()> {
        self.material.validate()?;
        if self.beam_cells.contains(&0)
            || self.press_cells.contains(&0)
            || self.support_cells.contains(&0)
        {
            return Err(Error::Parameter("block sizes must be positive".into()));
        }
        if !(self.spacing > 0.0) {
            return Err(Error::Parameter("spacing must be positive".into()));
        }
        if self.frames < 2 {
            return Err(Error::Parameter("at least two frames are required".into()));
        }
        if self.descent[0] > self.descent[1]
            || self.offset[0] > self.offset[1]
            || self.descent[0] < 0.0
        {
            return Err(Error::Parameter(
                "descent and offset ranges must be ordered, descent non-negative".into(),
            ));
        }
        Ok(())
    }

    /// Beam (body 0), supports (bodies 1 and 2), press (body 3), with the
    /// press centred `offset` away from mid-span.
    pub fn scene(&self, offset: f64) -> Mesh {
        let h = self.spacing;
        let [bx, by, bz] = self.beam_cells;
        let gap = self.material.contact_gap;
        let mut mesh = build::hex_block([0.0; 3], self.beam_cells, [h; 3], NodeType::Normal, 0);
        let [sx, sy, sz] = self.support_cells;
        let sy0 = 0.5 * (by as f64 - sy as f64) * h;
        let top = -gap;
        for (body, x0) in [(1, 0.0), (2, (bx - sx) as f64 * h)] {
            let support = build::hex_block(
                [x0, sy0, top - sz as f64 * h],
                self.support_cells,
                [h; 3],
                NodeType::Obstacle,
                body,
            );
            mesh.append(&support).expect("same cell type");
        }
        let [px, py, _] = self.press_cells;
        let centre = 0.5 * bx as f64 * h + offset;
        let origin = [
            centre - 0.5 * px as f64 * h,
            0.5 * (by as f64 - py as f64) * h,
            bz as f64 * h + gap + self.press_clearance,
        ];
        let press = build::hex_block(origin, self.press_cells, [h; 3], NodeType::Scripted, 3);
        mesh.append(&press).expect("same cell type");
        mesh
    }
}

/// Smooth descent profile: zero velocity at both ends.
pub fn press_profile(t: usize, frames: usize, descent: f64) -> f64 {
    let u = t as f64 / (frames - 1) as f64;
    descent * 0.5 * (1.0 - (std::f64::consts::PI * u).cos())
}

/// Randomized parameters of one trajectory.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PressPath {
    pub descent: f64,
    pub offset: f64,
}

impl PressPath {
    pub fn sample(config: &OracleConfig, rng: &mut ChaCha8Rng) -> Self {
        let draw = |rng: &mut ChaCha8Rng, [a, b]: [f64; 2]| {
            if a == b {
                a
            } else {
                rng.random_range(a..b)
            }
        };
        PressPath {
            descent: draw(rng, config.descent),
            offset: draw(rng, config.offset),
        }
    }
}

/// Runs the oracle for one press path.
pub fn simulate_press(config: &OracleConfig, path: PressPath) -> Result<Trajectory> {
    config.validate()?;
    let mesh = config.scene(path.offset);
    let n = mesh.num_vertices();
    let pressed: Vec<usize> = (0..n)
        .filter(|&v| mesh.node_type[v] == NodeType::Scripted)
        .collect();
    let scripts: BTreeMap<usize, Vec<Point>> = pressed
        .iter()
        .map(|&v| {
            let p = mesh.vertices[v];
            let path = (0..config.frames)
                .map(|t| {
                    [
                        p[0],
                        p[1],
                        p[2] - press_profile(t, config.frames, path.descent),
                    ]
                })
                .collect();
            (v, path)
        })
        .collect();

    let mut oracle = oracle_for(config, &mesh)?;
    let mut frames = vec![Frame {
        x: mesh.vertices.clone(),
        q: oracle
            .state
            .energy_density()
            .into_iter()
            .map(|e| vec![e])
            .collect(),
    }];
    for t in 0..config.frames - 1 {
        let mut targets = vec![None; n];
        for (&v, p) in &scripts {
            targets[v] = Some(p[t + 1]);
        }
        let cur = frames[t].clone();
        let input = StepInput {
            prev: &cur.x,
            cur: &cur.x,
            quantities: &cur.q,
            targets: &targets,
        };
        let next = oracle.step(t, &input)?;
        frames.push(Frame {
            x: next.positions,
            q: next.quantities,
        });
    }
    Ok(Trajectory {
        mesh,
        frames,
        scripts,
    })
}

/// The oracle started at the first frame of `traj`, ready to roll out.
pub fn oracle_stepper(config: &OracleConfig, traj: &Trajectory) -> Result<OracleStepper> {
    oracle_for(config, &traj.mesh)
}

fn oracle_for(config: &OracleConfig, mesh: &Mesh) -> Result<OracleStepper> {
    let state = MassSpring::new(mesh, config.material.clone())?;
    // Far above any energy a bounded press can inject.
    let scale = config.material.k_edge * config.spacing.powi(2) * mesh.num_cells() as f64;
    Ok(OracleStepper {
        state,
        energy_limit: 1e3 * scale.max(f64::MIN_POSITIVE),
    })
}

/// Independent random stream of trajectory `index` under `seed`.
pub fn trajectory_rng(seed: u64, index: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(index);
    rng
}
