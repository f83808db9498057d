//! Mass-spring reference simulator with penalty contact against rigid
//! kinematic boxes.

use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geometry::{compute_cell_geometry, norm, sub};
use crate::mesh::{CellType, Mesh, Point};
use crate::model::{NextState, StepInput};
use crate::simulate::Stepper;

// Face and body diagonals of a hex, in local slots.
const HEX_FACE_DIAGONALS: [[usize; 2]; 12] = [
    [0, 2],
    [1, 3],
    [4, 6],
    [5, 7],
    [0, 5],
    [1, 4],
    [1, 6],
    [2, 5],
    [2, 7],
    [3, 6],
    [3, 4],
    [0, 7],
];
const HEX_BODY_DIAGONALS: [[usize; 2]; 4] = [[0, 6], [1, 7], [2, 4], [3, 5]];

/// Material and integration parameters.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Material {
    /// Lumped mass of every free vertex.
    pub mass: f64,
    /// Stiffness per cell of edge, face-diagonal and body-diagonal springs;
    /// springs shared by several cells add up.
    pub k_edge: f64,
    pub k_face: f64,
    pub k_body: f64,
    /// Mass-proportional velocity damping rate.
    pub damping: f64,
    pub contact_stiffness: f64,
    /// Distance from a rigid box at which contact engages.
    pub contact_gap: f64,
    /// Time between output frames.
    pub frame_dt: f64,
    /// Substeps per frame; 0 picks the count from the stiffness bound.
    pub substeps: usize,
}

impl Default for Material {
    fn default() -> Self {
        Material {
            mass: 1.0,
            k_edge: 400.0,
            k_face: 200.0,
            k_body: 100.0,
            damping: 1.0,
            contact_stiffness: 4000.0,
            contact_gap: 0.005,
            frame_dt: 1.0,
            substeps: 0,
        }
    }
}

impl Material {
    pub fn validate(&self) -> Result<()> {
        let positive = [
            ("mass", self.mass),
            ("k_edge", self.k_edge),
            ("frame_dt", self.frame_dt),
        ];
        for (name, v) in positive {
            if !(v > 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "{name} must be positive, got {v}"
                )));
            }
        }
        let non_negative = [
            ("k_face", self.k_face),
            ("k_body", self.k_body),
            ("damping", self.damping),
            ("contact_stiffness", self.contact_stiffness),
            ("contact_gap", self.contact_gap),
        ];
        for (name, v) in non_negative {
            if !(v >= 0.0 && v.is_finite()) {
                return Err(Error::Parameter(format!(
                    "{name} must be non-negative, got {v}"
                )));
            }
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
struct Spring {
    a: usize,
    b: usize,
    k: f64,
    rest: f64,
}

/// Simulation state of one mesh: free vertices integrate, kinematic ones
/// follow piecewise-linear paths between frames.
#[derive(Debug, Clone)]
pub struct MassSpring {
    material: Material,
    springs: Vec<Spring>,
    free: Vec<bool>,
    /// Body id of every kinematic box, with its vertex list.
    boxes: Vec<Vec<usize>>,
    lumped_volume: Vec<f64>,
    pub x: Vec<Point>,
    pub v: Vec<Point>,
    accel: Vec<Point>,
    pub substeps: usize,
}

impl MassSpring {
    pub fn new(mesh: &Mesh, material: Material) -> Result<Self> {
        material.validate()?;
        mesh.check()?;
        let n = mesh.num_vertices();
        let free: Vec<bool> = mesh.node_type.iter().map(|t| !t.is_kinematic()).collect();
        let mut stiff: BTreeMap<(usize, usize), f64> = BTreeMap::new();
        let mut lumped_volume = vec![0.0; n];
        for cell in &mesh.cells {
            if !free[cell[0]] {
                continue;
            }
            let pts: Vec<Point> = cell.iter().map(|&v| mesh.vertices[v]).collect();
            let vol = compute_cell_geometry(&pts, mesh.cell_type)?.volume;
            for &v in cell {
                lumped_volume[v] += vol / cell.len() as f64;
            }
            let mut add = |pairs: &[[usize; 2]], k: f64| {
                if k == 0.0 {
                    return;
                }
                for &[i, j] in pairs {
                    let (a, b) = (cell[i].min(cell[j]), cell[i].max(cell[j]));
                    *stiff.entry((a, b)).or_insert(0.0) += k;
                }
            };
            add(mesh.cell_type.local_edges(), material.k_edge);
            if mesh.cell_type == CellType::Hex {
                add(&HEX_FACE_DIAGONALS, material.k_face);
                add(&HEX_BODY_DIAGONALS, material.k_body);
            }
        }
        let springs = stiff
            .into_iter()
            .map(|((a, b), k)| Spring {
                a,
                b,
                k,
                rest: norm(&sub(&mesh.vertices[a], &mesh.vertices[b])),
            })
            .collect::<Vec<_>>();

        let mut by_body: BTreeMap<i64, Vec<usize>> = BTreeMap::new();
        for v in (0..n).filter(|&v| !free[v]) {
            by_body.entry(mesh.body_id[v]).or_default().push(v);
        }

        // Gershgorin bound on the largest eigenvalue of M⁻¹K.
        let mut row = vec![material.contact_stiffness; n];
        for s in &springs {
            row[s.a] += 2.0 * s.k;
            row[s.b] += 2.0 * s.k;
        }
        let omega = (row.iter().cloned().fold(0.0, f64::max) / material.mass).sqrt();
        let substeps = if material.substeps > 0 {
            material.substeps
        } else {
            // Half the velocity Verlet stability limit dt < 2 / ω.
            (material.frame_dt * omega).ceil().max(1.0) as usize
        };

        let mut state = MassSpring {
            material,
            springs,
            free,
            boxes: by_body.into_values().collect(),
            lumped_volume,
            x: mesh.vertices.clone(),
            v: vec![[0.0; 3]; n],
            accel: vec![[0.0; 3]; n],
            substeps,
        };
        state.accel = state.acceleration();
        Ok(state)
    }

    pub fn material(&self) -> &Material {
        &self.material
    }

    pub fn num_springs(&self) -> usize {
        self.springs.len()
    }

    fn box_of(&self, ids: &[usize]) -> (Point, Point) {
        let mut lo = [f64::INFINITY; 3];
        let mut hi = [f64::NEG_INFINITY; 3];
        for &v in ids {
            for k in 0..3 {
                lo[k] = lo[k].min(self.x[v][k]);
                hi[k] = hi[k].max(self.x[v][k]);
            }
        }
        (lo, hi)
    }

    /// Penetration depth and unit push direction of `p` into the box grown
    /// by the contact gap, or `None` outside it.
    fn penetration(p: &Point, lo: &Point, hi: &Point, gap: f64) -> Option<(f64, usize, f64)> {
        let mut best: Option<(f64, usize, f64)> = None;
        for k in 0..3 {
            let below = p[k] - (lo[k] - gap);
            let above = (hi[k] + gap) - p[k];
            if below <= 0.0 || above <= 0.0 {
                return None;
            }
            for (d, sign) in [(below, -1.0), (above, 1.0)] {
                if best.is_none_or(|(b, _, _)| d < b) {
                    best = Some((d, k, sign));
                }
            }
        }
        best
    }

    fn acceleration(&self) -> Vec<Point> {
        let n = self.x.len();
        let mut f = vec![[0.0; 3]; n];
        for s in &self.springs {
            let d = sub(&self.x[s.b], &self.x[s.a]);
            let len = norm(&d);
            let mag = s.k * (len - s.rest) / len;
            for k in 0..3 {
                f[s.a][k] += mag * d[k];
                f[s.b][k] -= mag * d[k];
            }
        }
        let kc = self.material.contact_stiffness;
        if kc > 0.0 {
            for ids in &self.boxes {
                let (lo, hi) = self.box_of(ids);
                for v in (0..n).filter(|&v| self.free[v]) {
                    if let Some((depth, axis, sign)) =
                        Self::penetration(&self.x[v], &lo, &hi, self.material.contact_gap)
                    {
                        f[v][axis] += sign * kc * depth;
                    }
                }
            }
        }
        let inv = 1.0 / self.material.mass;
        for (v, fv) in f.iter_mut().enumerate() {
            if self.free[v] {
                fv.iter_mut().for_each(|c| *c *= inv);
            } else {
                *fv = [0.0; 3];
            }
        }
        f
    }

    /// Integrates one output frame while kinematic vertices move linearly
    /// from their current positions to `targets`.
    pub fn advance(&mut self, targets: &[Option<Point>]) -> Result<()> {
        let n = self.x.len();
        let start = self.x.clone();
        let dt = self.material.frame_dt / self.substeps as f64;
        let decay = (-self.material.damping * dt).exp();
        for s in 1..=self.substeps {
            let w = s as f64 / self.substeps as f64;
            for v in 0..n {
                if self.free[v] {
                    for k in 0..3 {
                        self.v[v][k] += 0.5 * dt * self.accel[v][k];
                        self.x[v][k] += dt * self.v[v][k];
                    }
                } else if let Some(t) = targets[v] {
                    for k in 0..3 {
                        self.x[v][k] = if s == self.substeps {
                            t[k]
                        } else {
                            start[v][k] + w * (t[k] - start[v][k])
                        };
                    }
                }
            }
            self.accel = self.acceleration();
            for v in (0..n).filter(|&v| self.free[v]) {
                for k in 0..3 {
                    self.v[v][k] = (self.v[v][k] + 0.5 * dt * self.accel[v][k]) * decay;
                }
            }
        }
        Ok(())
    }

    pub fn kinetic_energy(&self) -> f64 {
        (0..self.x.len())
            .filter(|&v| self.free[v])
            .map(|v| 0.5 * self.material.mass * self.v[v].iter().map(|c| c * c).sum::<f64>())
            .sum()
    }

    pub fn elastic_energy(&self) -> f64 {
        self.springs
            .iter()
            .map(|s| Self::spring_energy(s, &self.x))
            .sum()
    }

    fn spring_energy(s: &Spring, x: &[Point]) -> f64 {
        let len = norm(&sub(&x[s.b], &x[s.a]));
        0.5 * s.k * (len - s.rest).powi(2)
    }

    /// Elastic energy per unit lumped volume at every vertex, each spring
    /// split evenly between its ends. Kinematic vertices get zero.
    pub fn energy_density(&self) -> Vec<f64> {
        let mut e = vec![0.0; self.x.len()];
        for s in &self.springs {
            let half = 0.5 * Self::spring_energy(s, &self.x);
            e[s.a] += half;
            e[s.b] += half;
        }
        e.iter()
            .zip(&self.lumped_volume)
            .map(|(&u, &vol)| if vol > 0.0 { u / vol } else { 0.0 })
            .collect()
    }
}

/// The reference simulator driven through the one-step interface. It keeps
/// its own velocities, so it reproduces the trajectory it generated.
pub struct OracleStepper {
    pub state: MassSpring,
    /// Energy scale above which the run is declared unstable.
    pub energy_limit: f64,
}

impl Stepper for OracleStepper {
    fn step(&mut self, t: usize, input: &StepInput) -> Result<NextState> {
        self.state.advance(input.targets)?;
        let energy = self.state.kinetic_energy() + self.state.elastic_energy();
        if !energy.is_finite() || energy > self.energy_limit {
            return Err(Error::Unstable {
                frame: t + 1,
                energy,
            });
        }
        Ok(NextState {
            positions: self.state.x.clone(),
            quantities: self
                .state
                .energy_density()
                .into_iter()
                .map(|e| vec![e])
                .collect(),
        })
    }
}
