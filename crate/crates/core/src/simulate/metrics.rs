use std::collections::BTreeMap;

use serde::{Deserialize, Serialize};

use super::trajectory::Frame;
use crate::error::{Error, Result};

/// A per-vertex quantity compared between frames.
#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord)]
pub enum Quantity {
    /// Euclidean distance between predicted and true positions.
    Position,
    /// Channel `k` of the scalar quantities.
    Scalar(usize),
}

impl Quantity {
    pub fn name(self) -> String {
        match self {
            Quantity::Position => "position".into(),
            Quantity::Scalar(k) => format!("q{k}"),
        }
    }

    pub fn all(quantities: usize) -> Vec<Quantity> {
        std::iter::once(Quantity::Position)
            .chain((0..quantities).map(Quantity::Scalar))
            .collect()
    }
}

/// Root mean square over vertices of the per-vertex error.
pub fn rmse_frame(pred: &Frame, truth: &Frame, quantity: Quantity) -> Result<f64> {
    let n = truth.x.len();
    if pred.x.len() != n || pred.q.len() != truth.q.len() || n == 0 {
        return Err(Error::shape(
            "rmse",
            format!("{} vs {} vertices", pred.x.len(), n),
        ));
    }
    let sum: f64 = match quantity {
        Quantity::Position => pred
            .x
            .iter()
            .zip(&truth.x)
            .map(|(a, b)| (0..3).map(|k| (a[k] - b[k]).powi(2)).sum::<f64>())
            .sum(),
        Quantity::Scalar(c) => {
            if truth.q.iter().chain(&pred.q).any(|r| r.len() <= c) {
                return Err(Error::shape("rmse", format!("no quantity channel {c}")));
            }
            pred.q
                .iter()
                .zip(&truth.q)
                .map(|(a, b)| (a[c] - b[c]).powi(2))
                .sum()
        }
    };
    Ok((sum / n as f64).sqrt())
}

/// Frame-weighted mean of per-frame errors; `horizon` keeps only the first
/// `min(horizon, T_i)` frames of each series.
pub fn aggregate_error(series: &[Vec<f64>], horizon: Option<usize>) -> Result<f64> {
    if series.is_empty() {
        return Err(Error::Data("no trajectories to aggregate".into()));
    }
    let mut total = 0.0;
    let mut frames = 0usize;
    for s in series {
        let n = horizon.map_or(s.len(), |h| h.min(s.len()));
        total += s[..n].iter().sum::<f64>();
        frames += n;
    }
    if frames == 0 {
        return Err(Error::Data("no frames to aggregate".into()));
    }
    Ok(total / frames as f64)
}

/// Per-step errors of a rollout, skipping the given initial frame.
pub fn rollout_errors(pred: &[Frame], truth: &[Frame], quantity: Quantity) -> Result<Vec<f64>> {
    if pred.len() > truth.len() {
        return Err(Error::shape(
            "rollout errors",
            format!("{} predicted frames, {} true", pred.len(), truth.len()),
        ));
    }
    pred.iter()
        .zip(truth)
        .skip(1)
        .map(|(p, t)| rmse_frame(p, t, quantity))
        .collect()
}

/// Aggregate error computed directly from raw frames, without storing
/// per-frame values.
pub fn error_from_frames(
    pairs: &[(&[Frame], &[Frame])],
    quantity: Quantity,
    horizon: Option<usize>,
) -> Result<f64> {
    if pairs.is_empty() {
        return Err(Error::Data("no trajectories to aggregate".into()));
    }
    let mut total = 0.0;
    let mut frames = 0usize;
    for (pred, truth) in pairs {
        let steps = pred.len().saturating_sub(1);
        let n = horizon.map_or(steps, |h| h.min(steps));
        for j in 1..=n {
            total += rmse_frame(&pred[j], &truth[j], quantity)?;
        }
        frames += n;
    }
    if frames == 0 {
        return Err(Error::Data("no frames to aggregate".into()));
    }
    Ok(total / frames as f64)
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct TrajectoryErrors {
    pub name: String,
    /// Quantity name to per-step RMSE, step 1 first.
    pub rmse: BTreeMap<String, Vec<f64>>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct EvalReport {
    pub trajectories: Vec<TrajectoryErrors>,
    /// Quantity name to aggregate error over the first 50 steps.
    pub error_50: BTreeMap<String, f64>,
    pub error_full: BTreeMap<String, f64>,
}

pub const SHORT_HORIZON: usize = 50;

impl EvalReport {
    /// `rollouts` holds `(name, predicted frames, true frames)`.
    pub fn build(rollouts: &[(String, Vec<Frame>, &[Frame])], quantities: usize) -> Result<Self> {
        let mut trajectories = Vec::with_capacity(rollouts.len());
        for (name, pred, truth) in rollouts {
            let mut rmse = BTreeMap::new();
            for q in Quantity::all(quantities) {
                rmse.insert(q.name(), rollout_errors(pred, truth, q)?);
            }
            trajectories.push(TrajectoryErrors {
                name: name.clone(),
                rmse,
            });
        }
        let mut error_50 = BTreeMap::new();
        let mut error_full = BTreeMap::new();
        for q in Quantity::all(quantities) {
            let series: Vec<Vec<f64>> = trajectories
                .iter()
                .map(|t| t.rmse[&q.name()].clone())
                .collect();
            error_50.insert(q.name(), aggregate_error(&series, Some(SHORT_HORIZON))?);
            error_full.insert(q.name(), aggregate_error(&series, None)?);
        }
        Ok(EvalReport {
            trajectories,
            error_50,
            error_full,
        })
    }

    /// Flat `trajectory,frame,quantity,rmse` table.
    pub fn to_csv(&self) -> String {
        let mut out = String::from("trajectory,frame,quantity,rmse\n");
        for t in &self.trajectories {
            for (q, values) in &t.rmse {
                for (j, v) in values.iter().enumerate() {
                    out.push_str(&format!("{},{},{},{:e}\n", t.name, j + 1, q, v));
                }
            }
        }
        out
    }
}
