use std::path::Path;
use std::sync::Arc;

use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use serde::{Deserialize, Serialize};

use super::loss::tape_loss;
use crate::autodiff::{checkpoint, Adam, GradCheckReport, LrSchedule, Matrix, ParamStore, Tape};
use crate::error::{Error, Result};
use crate::mesh::Point;
use crate::model::{
    target_deltas, Inputs, Model, ModelConfig, Normalizers, RawFeatures, StepInput, Topology,
};
use crate::simulate::Trajectory;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrainingConfig {
    pub steps: u64,
    pub batch_size: usize,
    pub lr_start: f64,
    pub lr_end: f64,
    /// Standard deviation of the position noise added to free vertices.
    pub noise_std: f64,
    /// Also perturb the quantity inputs with the same noise level.
    pub noise_quantities: bool,
    pub seed: u64,
    /// Checkpoint interval in steps; 0 writes only the final one.
    pub checkpoint_every: u64,
}

impl Default for TrainingConfig {
    fn default() -> Self {
        TrainingConfig {
            steps: 5000,
            batch_size: 2,
            lr_start: 1e-4,
            lr_end: 1e-5,
            noise_std: 0.0,
            noise_quantities: false,
            seed: 0,
            checkpoint_every: 0,
        }
    }
}

impl TrainingConfig {
    pub fn validate(&self) -> Result<()> {
        if !(self.noise_std >= 0.0 && self.noise_std.is_finite()) {
            return Err(Error::Parameter(format!(
                "noise std must be non-negative, got {}",
                self.noise_std
            )));
        }
        if self.batch_size == 0 {
            return Err(Error::Parameter("batch size must be positive".into()));
        }
        if !(self.lr_start > 0.0 && self.lr_end > 0.0) {
            return Err(Error::Parameter("learning rates must be positive".into()));
        }
        Ok(())
    }

    pub fn schedule(&self) -> LrSchedule {
        LrSchedule {
            start: self.lr_start,
            end: self.lr_end,
            steps: self.steps,
        }
    }
}

/// Trajectories together with their topologies.
pub struct Dataset {
    pub trajectories: Vec<Trajectory>,
    pub topologies: Vec<Arc<Topology>>,
}

impl Dataset {
    pub fn new(trajectories: Vec<Trajectory>) -> Result<Self> {
        if trajectories.is_empty() {
            return Err(Error::Data("dataset has no trajectories".into()));
        }
        let mut topologies: Vec<Arc<Topology>> = Vec::with_capacity(trajectories.len());
        for t in &trajectories {
            t.validate()?;
            let shared = topologies.iter().find(|p| p.mesh == t.mesh).cloned();
            topologies.push(match shared {
                Some(p) => p,
                None => Arc::new(Topology::new(&t.mesh)?),
            });
        }
        Ok(Dataset {
            trajectories,
            topologies,
        })
    }

    /// Every `(trajectory, frame)` with a successor frame.
    pub fn transitions(&self) -> Vec<(usize, usize)> {
        self.trajectories
            .iter()
            .enumerate()
            .flat_map(|(i, t)| (0..t.num_frames() - 1).map(move |f| (i, f)))
            .collect()
    }
}

/// Statistics over every training transition, without noise.
pub fn fit_normalizers(dataset: &Dataset, config: &ModelConfig) -> Result<Normalizers> {
    let mut norms = Normalizers::new(config);
    for (i, t) in dataset.transitions() {
        let traj = &dataset.trajectories[i];
        let topo = &dataset.topologies[i];
        let targets = traj.targets(t + 1);
        let raw = RawFeatures::compute(topo, &traj.step_input(t, &targets), config)?;
        let (cur, next) = (&traj.frames[t], &traj.frames[t + 1]);
        norms.observe(topo, &raw, &target_deltas(&cur.x, &next.x, &cur.q, &next.q));
    }
    Ok(norms)
}

/// Adds Gaussian noise of standard deviation `sigma` to the positions of the
/// free vertices. With `sigma == 0` the input is returned unchanged.
pub fn inject_noise(
    positions: &[Point],
    free: &[usize],
    sigma: f64,
    rng: &mut ChaCha8Rng,
) -> Vec<Point> {
    let mut out = positions.to_vec();
    if sigma == 0.0 {
        return out;
    }
    let normal = Normal::new(0.0, sigma).expect("valid noise std");
    for &v in free {
        for k in 0..3 {
            out[v][k] += normal.sample(rng);
        }
    }
    out
}

/// A transition turned into network inputs and a standardized target.
pub struct Sample {
    pub topo: Arc<Topology>,
    pub inputs: Inputs,
    pub target: Matrix,
}

/// Builds the sample for frame `t`, optionally with perturbed current
/// positions (and quantities). Targets are taken relative to the perturbed
/// state so the true next frame is unchanged.
pub fn make_sample(
    dataset: &Dataset,
    (i, t): (usize, usize),
    norms: &Normalizers,
    config: &ModelConfig,
    noisy: Option<(&[Point], &[Vec<f64>])>,
) -> Result<Sample> {
    let traj = &dataset.trajectories[i];
    let topo = dataset.topologies[i].clone();
    let targets = traj.targets(t + 1);
    let mut input = traj.step_input(t, &targets);
    if let Some((x, q)) = noisy {
        input = StepInput {
            cur: x,
            quantities: q,
            ..input
        };
    }
    let raw = RawFeatures::compute(&topo, &input, config)?;
    let inputs = Inputs::new(&topo, &raw, norms, config);
    let next = &traj.frames[t + 1];
    let target = norms.output.standardize(&target_deltas(
        input.cur,
        &next.x,
        input.quantities,
        &next.q,
    ));
    Ok(Sample {
        topo,
        inputs,
        target,
    })
}

/// Loss of one sample and its gradient for every parameter.
pub fn loss_and_gradients(
    model: &Model,
    params: &ParamStore,
    sample: &Sample,
) -> Result<(f64, Vec<Matrix>)> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let trace = model.forward(&mut tape, &bound, &sample.topo, &sample.inputs)?;
    let loss = tape_loss(
        &mut tape,
        trace.output,
        &sample.target,
        &sample.topo.normal_vertices,
    )?;
    let grads = tape.backward(loss)?;
    Ok((grads.loss, bound.gradients(&grads)))
}

/// Forward-only loss of one sample.
pub fn sample_loss(model: &Model, params: &ParamStore, sample: &Sample) -> Result<f64> {
    let mut tape = Tape::new();
    let bound = params.bind(&mut tape);
    let trace = model.forward(&mut tape, &bound, &sample.topo, &sample.inputs)?;
    super::compute_loss(
        tape.value(trace.output),
        &sample.target,
        &sample.topo.normal_vertices,
    )
}

/// Central-difference check of the end-to-end gradient on one sample.
pub fn gradient_check(
    model: &Model,
    params: &ParamStore,
    sample: &Sample,
    h: f64,
) -> Result<GradCheckReport> {
    let (_, grads) = loss_and_gradients(model, params, sample)?;
    crate::autodiff::check_gradients(params, &grads, h, |p| sample_loss(model, p, sample))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LossRecord {
    pub step: u64,
    pub loss: f64,
    pub lr: f64,
}

pub fn loss_csv(records: &[LossRecord]) -> String {
    let mut out = String::from("step,loss,lr\n");
    for r in records {
        out.push_str(&format!("{},{:e},{:e}\n", r.step, r.loss, r.lr));
    }
    out
}

pub struct TrainOutput {
    pub params: ParamStore,
    pub norms: Normalizers,
    pub losses: Vec<LossRecord>,
}

fn batch_gradients(
    model: &Model,
    params: &ParamStore,
    batch: &[&Sample],
) -> Result<Vec<(f64, Vec<Matrix>)>> {
    #[cfg(feature = "parallel")]
    {
        use rayon::prelude::*;
        batch
            .par_iter()
            .map(|s| loss_and_gradients(model, params, s))
            .collect()
    }
    #[cfg(not(feature = "parallel"))]
    {
        batch
            .iter()
            .map(|s| loss_and_gradients(model, params, s))
            .collect()
    }
}

/// Trains `params` in place on one-step transitions of `dataset`.
///
/// `on_checkpoint` is called with the step count every
/// `checkpoint_every` steps and once at the end.
pub fn train(
    model: &Model,
    dataset: &Dataset,
    config: &TrainingConfig,
    mut params: ParamStore,
    norms: Normalizers,
    mut on_checkpoint: impl FnMut(u64, &ParamStore) -> Result<()>,
) -> Result<TrainOutput> {
    config.validate()?;
    model.check_params(&params)?;
    let mc = &model.config;
    let transitions = dataset.transitions();
    if transitions.is_empty() {
        return Err(Error::Data("dataset has no transitions".into()));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(config.seed);
    let cached: Option<Vec<Sample>> = if config.noise_std == 0.0 {
        Some(
            transitions
                .iter()
                .map(|&tr| make_sample(dataset, tr, &norms, mc, None))
                .collect::<Result<_>>()?,
        )
    } else {
        None
    };
    let quantity_noise =
        Normal::new(0.0, config.noise_std.max(f64::MIN_POSITIVE)).expect("valid noise std");

    let schedule = config.schedule();
    let adam = Adam::default();
    let mut order: Vec<usize> = Vec::new();
    let mut losses = Vec::with_capacity(config.steps as usize);
    for step in 0..config.steps {
        let mut picks = Vec::with_capacity(config.batch_size);
        while picks.len() < config.batch_size {
            if order.is_empty() {
                order = (0..transitions.len()).collect();
                order.shuffle(&mut rng);
            }
            picks.push(order.pop().unwrap());
        }
        let fresh: Vec<Sample>;
        let batch: Vec<&Sample> = match &cached {
            Some(all) => picks.iter().map(|&k| &all[k]).collect(),
            None => {
                fresh = picks
                    .iter()
                    .map(|&k| {
                        let (i, t) = transitions[k];
                        let traj = &dataset.trajectories[i];
                        let topo = &dataset.topologies[i];
                        let x = inject_noise(
                            &traj.frames[t].x,
                            &topo.normal_vertices,
                            config.noise_std,
                            &mut rng,
                        );
                        let mut q = traj.frames[t].q.clone();
                        if config.noise_quantities {
                            for &v in topo.normal_vertices.iter() {
                                q[v].iter_mut()
                                    .for_each(|c| *c += quantity_noise.sample(&mut rng));
                            }
                        }
                        make_sample(dataset, (i, t), &norms, mc, Some((&x, &q)))
                    })
                    .collect::<Result<_>>()?;
                fresh.iter().collect()
            }
        };

        let results = batch_gradients(model, &params, &batch)?;
        let inv = 1.0 / results.len() as f64;
        let mut loss = 0.0;
        let mut grads: Vec<Matrix> = params
            .values
            .iter()
            .map(|m| Matrix::zeros(m.rows, m.cols))
            .collect();
        for (l, g) in &results {
            loss += l * inv;
            for (acc, gi) in grads.iter_mut().zip(g) {
                for (a, b) in acc.data.iter_mut().zip(&gi.data) {
                    *a += b * inv;
                }
            }
        }
        let lr = schedule.at(step);
        adam.step(&mut params, &grads, lr)?;
        losses.push(LossRecord { step, loss, lr });
        if config.checkpoint_every > 0
            && (step + 1) % config.checkpoint_every == 0
            && step + 1 < config.steps
        {
            on_checkpoint(step + 1, &params)?;
        }
    }
    on_checkpoint(config.steps, &params)?;
    Ok(TrainOutput {
        params,
        norms,
        losses,
    })
}

/// Everything needed to reload a trained model.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct CheckpointMeta {
    pub model: ModelConfig,
    pub normalizers: Normalizers,
    #[serde(default)]
    pub training: Option<TrainingConfig>,
}

pub fn save_checkpoint(path: &Path, params: &ParamStore, meta: &CheckpointMeta) -> Result<()> {
    let value = serde_json::to_value(meta).map_err(|e| Error::Data(e.to_string()))?;
    checkpoint::save(path, params, true, value)
}

pub fn load_checkpoint(path: &Path) -> Result<(Model, ParamStore, CheckpointMeta)> {
    let (params, header) = checkpoint::load(path)?;
    let meta: CheckpointMeta = serde_json::from_value(header.meta).map_err(|e| Error::Parse {
        path: path.display().to_string(),
        msg: format!("checkpoint metadata: {e}"),
    })?;
    let model = Model::new(meta.model.clone())?;
    model.check_params(&params)?;
    Ok((model, params, meta))
}
