//! Autoregressive rollout and rollout error metrics.

mod metrics;
mod trajectory;

pub use metrics::{
    aggregate_error, error_from_frames, rmse_frame, rollout_errors, EvalReport, Quantity,
    TrajectoryErrors, SHORT_HORIZON,
};
pub use trajectory::{Frame, Trajectory};

use crate::autodiff::{Matrix, ParamStore};
use crate::error::{Error, Result};
use crate::model::{decode_update, Model, NextState, Normalizers, StepInput, Topology};

/// Advances a state by one frame.
pub trait Stepper {
    /// Predicts frame `t + 1` from the state at frame `t`.
    fn step(&mut self, t: usize, input: &StepInput) -> Result<NextState>;
}

/// Zero motion for free vertices; kinematic vertices follow their scripts.
pub struct Persistence<'a> {
    pub topo: &'a Topology,
    pub norms: Normalizers,
}

impl<'a> Persistence<'a> {
    pub fn new(topo: &'a Topology, quantities: usize) -> Self {
        let config = crate::model::ModelConfig {
            quantities,
            cell_type: topo.mesh.cell_type,
            ..Default::default()
        };
        Persistence {
            topo,
            norms: Normalizers::new(&config),
        }
    }
}

impl Stepper for Persistence<'_> {
    fn step(&mut self, _t: usize, input: &StepInput) -> Result<NextState> {
        let zeros = Matrix::zeros(self.topo.num_vertices(), self.norms.output.dim());
        decode_update(self.topo, &self.norms, input, &zeros)
    }
}

/// A trained network with its parameters and feature statistics.
pub struct Learned<'a> {
    pub model: &'a Model,
    pub params: &'a ParamStore,
    pub norms: &'a Normalizers,
    pub topo: &'a Topology,
}

impl Stepper for Learned<'_> {
    fn step(&mut self, _t: usize, input: &StepInput) -> Result<NextState> {
        let out = self
            .model
            .predict(self.params, self.topo, self.norms, input)?;
        decode_update(self.topo, self.norms, input, &out)
    }
}

/// Rolls `steps` frames forward from the first frame of `traj`, feeding each
/// prediction back in. The result starts with the initial frame.
pub fn rollout(stepper: &mut dyn Stepper, traj: &Trajectory, steps: usize) -> Result<Vec<Frame>> {
    if steps + 1 > traj.num_frames() {
        return Err(Error::Data(format!(
            "scripts cover {} steps, {steps} requested",
            traj.num_frames().saturating_sub(1)
        )));
    }
    let mut frames = Vec::with_capacity(steps + 1);
    frames.push(traj.frames[0].clone());
    for t in 0..steps {
        let targets = traj.targets(t + 1);
        let prev = if t == 0 { &frames[0] } else { &frames[t - 1] };
        let cur = &frames[t];
        let input = StepInput {
            prev: &prev.x,
            cur: &cur.x,
            quantities: &cur.q,
            targets: &targets,
        };
        let next = stepper.step(t, &input)?;
        frames.push(Frame {
            x: next.positions,
            q: next.quantities,
        });
    }
    Ok(frames)
}

/// Rolls every trajectory out over its full length with a stepper for its
/// topology and scores the result.
///
/// `roll` receives the stepper's topology and must return the full rollout,
/// usually `rollout(&mut stepper, traj, traj.num_frames() - 1)`.
pub fn evaluate<F>(trajectories: &[(String, Trajectory)], roll: F) -> Result<EvalReport>
where
    F: Fn(&Topology, &Trajectory) -> Result<Vec<Frame>> + Sync,
{
    let run = |(name, traj): &(String, Trajectory)| -> Result<(String, Vec<Frame>)> {
        let topo = Topology::new(&traj.mesh)?;
        Ok((name.clone(), roll(&topo, traj)?))
    };
    #[cfg(feature = "parallel")]
    let preds: Vec<(String, Vec<Frame>)> = {
        use rayon::prelude::*;
        trajectories.par_iter().map(run).collect::<Result<_>>()?
    };
    #[cfg(not(feature = "parallel"))]
    let preds: Vec<(String, Vec<Frame>)> = trajectories.iter().map(run).collect::<Result<_>>()?;
    let quantities = trajectories.first().map_or(0, |(_, t)| t.quantities());
    let rollouts: Vec<(String, Vec<Frame>, &[Frame])> = preds
        .into_iter()
        .zip(trajectories)
        .map(|((name, p), (_, t))| (name, p, t.frames.as_slice()))
        .collect();
    EvalReport::build(&rollouts, quantities)
}
