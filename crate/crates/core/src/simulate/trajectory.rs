use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::mesh::{Mesh, NodeType, Point};
use crate::model::StepInput;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Frame {
    pub x: Vec<Point>,
    pub q: Vec<Vec<f64>>,
}

/// A mesh, its frames at unit time steps, and per-vertex script positions.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Trajectory {
    pub mesh: Mesh,
    pub frames: Vec<Frame>,
    /// Position at every frame of each vertex with prescribed motion.
    pub scripts: BTreeMap<usize, Vec<Point>>,
}

impl Trajectory {
    pub fn num_frames(&self) -> usize {
        self.frames.len()
    }

    pub fn quantities(&self) -> usize {
        self.frames
            .first()
            .and_then(|f| f.q.first())
            .map_or(0, Vec::len)
    }

    pub fn validate(&self) -> Result<()> {
        self.mesh.check()?;
        let nv = self.mesh.num_vertices();
        let t = self.frames.len();
        if t < 2 {
            return Err(Error::Data(format!(
                "trajectory needs at least 2 frames, has {t}"
            )));
        }
        let q = self.quantities();
        for (i, f) in self.frames.iter().enumerate() {
            if f.x.len() != nv || f.q.len() != nv {
                return Err(Error::Data(format!(
                    "frame {i} does not cover the {nv} vertices"
                )));
            }
            if f.q.iter().any(|r| r.len() != q) {
                return Err(Error::Data(format!("frame {i} has ragged quantities")));
            }
            if f.x
                .iter()
                .flatten()
                .chain(f.q.iter().flatten())
                .any(|x| !x.is_finite())
            {
                return Err(Error::Data(format!("frame {i} has non-finite values")));
            }
        }
        for v in 0..nv {
            if self.mesh.node_type[v] == NodeType::Scripted && !self.scripts.contains_key(&v) {
                return Err(Error::Data(format!("scripted vertex {v} has no script")));
            }
        }
        for (&v, path) in &self.scripts {
            if v >= nv || !self.mesh.node_type[v].is_kinematic() {
                return Err(Error::Data(format!(
                    "script for vertex {v}, which is not kinematic"
                )));
            }
            if path.len() != t {
                return Err(Error::Data(format!(
                    "script of vertex {v} has {} steps for {t} frames",
                    path.len()
                )));
            }
            if let Some(i) = (0..t).find(|&i| path[i] != self.frames[i].x[v]) {
                return Err(Error::Data(format!(
                    "vertex {v} departs from its script at frame {i}"
                )));
            }
        }
        Ok(())
    }

    /// Script positions at frame `t`, indexed by vertex.
    pub fn targets(&self, t: usize) -> Vec<Option<Point>> {
        let mut out = vec![None; self.mesh.num_vertices()];
        for (&v, path) in &self.scripts {
            out[v] = path.get(t).copied();
        }
        out
    }

    /// One-step input at frame `t`; the first frame has zero velocity.
    pub fn step_input<'a>(&'a self, t: usize, targets: &'a [Option<Point>]) -> StepInput<'a> {
        let prev = if t == 0 { 0 } else { t - 1 };
        StepInput {
            prev: &self.frames[prev].x,
            cur: &self.frames[t].x,
            quantities: &self.frames[t].q,
            targets,
        }
    }
}
