use std::sync::Arc;

use crate::autodiff::{Matrix, Tape, Var};
use crate::error::{Error, Result};

fn check(pred: (usize, usize), target: (usize, usize), mask: &[usize]) -> Result<()> {
    if pred != target {
        return Err(Error::shape(
            "loss",
            format!("prediction {pred:?} vs target {target:?}"),
        ));
    }
    if mask.is_empty() {
        return Err(Error::Data("loss mask selects no vertices".into()));
    }
    if let Some(&v) = mask.iter().find(|&&v| v >= pred.0) {
        return Err(Error::shape(
            "loss",
            format!("mask vertex {v} of {}", pred.0),
        ));
    }
    Ok(())
}

/// Squared error of the masked rows over all channels, divided by the number
/// of masked rows.
pub fn compute_loss(pred: &Matrix, target: &Matrix, mask: &[usize]) -> Result<f64> {
    check(pred.shape(), target.shape(), mask)?;
    let sum: f64 = mask
        .iter()
        .map(|&v| {
            pred.row(v)
                .iter()
                .zip(target.row(v))
                .map(|(a, b)| (a - b).powi(2))
                .sum::<f64>()
        })
        .sum();
    Ok(sum / mask.len() as f64)
}

/// [`compute_loss`] recorded on a tape.
pub fn tape_loss(tape: &mut Tape, pred: Var, target: &Matrix, mask: &Arc<[usize]>) -> Result<Var> {
    check(tape.shape(pred), target.shape(), mask)?;
    let mut rows = Matrix::zeros(mask.len(), target.cols);
    for (k, &v) in mask.iter().enumerate() {
        rows.row_mut(k).copy_from_slice(target.row(v));
    }
    let p = tape.gather_rows(pred, mask.clone())?;
    let t = tape.constant(rows);
    let d = tape.sub(p, t)?;
    let sq = tape.square(d)?;
    let s = tape.sum(sq)?;
    tape.scale(s, 1.0 / mask.len() as f64)
}
