//! Browser demo: the press-on-beam oracle, facet contacts at an adjustable
//! radius, and per-cell volume change.

use wasm_bindgen::prelude::*;

use cellfacet::contact::detect_contacts;
use cellfacet::dataio::{simulate_press, OracleConfig, PressPath};
use cellfacet::geometry::{compute_cell_geometry, mean_point};
use cellfacet::mesh::{extract_facets, FacetSet, Point};
use cellfacet::simulate::Trajectory;

fn js(e: cellfacet::Error) -> JsError {
    JsError::new(&e.to_string())
}

fn flat(points: &[Point]) -> Vec<f64> {
    points.iter().flatten().copied().collect()
}

/// One simulated press trajectory with its facet structure.
#[wasm_bindgen]
pub struct PressDemo {
    traj: Trajectory,
    facets: FacetSet,
    rest_volumes: Vec<f64>,
}

impl PressDemo {
    pub fn simulate(descent: f64, offset: f64, frames: usize) -> cellfacet::Result<Self> {
        let config = OracleConfig {
            frames,
            ..OracleConfig::default()
        };
        let traj = simulate_press(&config, PressPath { descent, offset })?;
        let facets = extract_facets(&traj.mesh)?;
        let mut demo = PressDemo {
            traj,
            facets,
            rest_volumes: Vec::new(),
        };
        demo.rest_volumes = demo.volumes(0)?;
        Ok(demo)
    }

    fn frame(&self, frame: usize) -> &[Point] {
        &self.traj.frames[frame.min(self.traj.num_frames() - 1)].x
    }

    fn volumes(&self, frame: usize) -> cellfacet::Result<Vec<f64>> {
        let x = self.frame(frame);
        let mesh = &self.traj.mesh;
        mesh.cells
            .iter()
            .map(|cell| {
                let pts: Vec<Point> = cell.iter().map(|&v| x[v]).collect();
                Ok(compute_cell_geometry(&pts, mesh.cell_type)?.volume)
            })
            .collect()
    }

    /// Sender and receiver facet centroids of every contact pair, six
    /// numbers per pair.
    pub fn contact_segments(&self, frame: usize, radius: f64) -> cellfacet::Result<Vec<f64>> {
        let x = self.frame(frame);
        let pairs = detect_contacts(&self.traj.mesh, &self.facets, x, radius, false)?;
        let centroid = |f: usize| {
            let pts: Vec<Point> = self.facets.facets[f].iter().map(|&v| x[v]).collect();
            mean_point(&pts)
        };
        Ok(pairs
            .iter()
            .flat_map(|p| {
                let (a, b) = (centroid(p.sender), centroid(p.receiver));
                [a[0], a[1], a[2], b[0], b[1], b[2]]
            })
            .collect())
    }

    /// Current over rest volume of every cell.
    pub fn volume_ratio(&self, frame: usize) -> cellfacet::Result<Vec<f64>> {
        Ok(self
            .volumes(frame)?
            .iter()
            .zip(&self.rest_volumes)
            .map(|(v, r)| v / r)
            .collect())
    }
}

#[wasm_bindgen]
impl PressDemo {
    #[wasm_bindgen(constructor)]
    pub fn new(descent: f64, offset: f64, frames: usize) -> Result<PressDemo, JsError> {
        PressDemo::simulate(descent, offset, frames).map_err(js)
    }

    pub fn num_frames(&self) -> usize {
        self.traj.num_frames()
    }

    pub fn num_vertices(&self) -> usize {
        self.traj.mesh.num_vertices()
    }

    /// Vertex positions of `frame`, xyz interleaved.
    pub fn positions(&self, frame: usize) -> Vec<f64> {
        flat(self.frame(frame))
    }

    /// Stress proxy (elastic energy density) per vertex.
    pub fn stress(&self, frame: usize) -> Vec<f64> {
        self.traj.frames[frame.min(self.traj.num_frames() - 1)]
            .q
            .iter()
            .map(|q| q[0])
            .collect()
    }

    pub fn node_types(&self) -> Vec<u8> {
        self.traj.mesh.node_type.iter().map(|&t| t.into()).collect()
    }

    /// Mesh edges as vertex index pairs.
    pub fn edges(&self) -> Vec<u32> {
        self.traj
            .mesh
            .edges()
            .iter()
            .flatten()
            .map(|&v| v as u32)
            .collect()
    }

    /// Cell vertex ids, 8 per hex.
    pub fn cells(&self) -> Vec<u32> {
        self.traj
            .mesh
            .cells
            .iter()
            .flatten()
            .map(|&v| v as u32)
            .collect()
    }

    pub fn contacts(&self, frame: usize, radius: f64) -> Result<Vec<f64>, JsError> {
        self.contact_segments(frame, radius).map_err(js)
    }

    pub fn volume_ratios(&self, frame: usize) -> Result<Vec<f64>, JsError> {
        self.volume_ratio(frame).map_err(js)
    }
}
