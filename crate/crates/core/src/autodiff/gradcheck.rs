use super::matrix::Matrix;
use super::params::ParamStore;
use crate::error::Result;

/// Denominator floor of the relative error per unit of loss. Central
/// differences carry roundoff of order eps·|loss|/h, so gradients at that
/// level are compared in absolute terms, scaled by `max(1, |loss|)`.
pub const GRAD_FLOOR: f64 = 1e-6;

#[derive(Debug, Clone, PartialEq)]
pub struct GradCheckReport {
    pub max_rel_error: f64,
    /// Parameter name and flat offset of the worst entry.
    pub worst: Option<(String, usize)>,
    pub checked: usize,
    /// Denominator floor used, `GRAD_FLOOR · max(1, |loss|)`.
    pub floor: f64,
}

pub fn relative_error(analytic: f64, numeric: f64, floor: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(numeric.abs()).max(floor)
}

/// Compares `analytic` against central differences of `loss` with step `h`,
/// entry by entry over every parameter.
pub fn check_gradients<F>(
    store: &ParamStore,
    analytic: &[Matrix],
    h: f64,
    mut loss: F,
) -> Result<GradCheckReport>
where
    F: FnMut(&ParamStore) -> Result<f64>,
{
    let floor = GRAD_FLOOR * loss(store)?.abs().max(1.0);
    let mut probe = store.clone();
    let mut report = GradCheckReport {
        max_rel_error: 0.0,
        worst: None,
        checked: 0,
        floor,
    };
    for (t, grad) in analytic.iter().enumerate() {
        for j in 0..grad.len() {
            let orig = probe.values[t].data[j];
            probe.values[t].data[j] = orig + h;
            let up = loss(&probe)?;
            probe.values[t].data[j] = orig - h;
            let down = loss(&probe)?;
            probe.values[t].data[j] = orig;
            let numeric = (up - down) / (2.0 * h);
            let err = relative_error(grad.data[j], numeric, floor);
            report.checked += 1;
            if err > report.max_rel_error || report.worst.is_none() {
                report.max_rel_error = report.max_rel_error.max(err);
                report.worst = Some((store.names()[t].clone(), j));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::autodiff::Tape;

    #[test]
    fn cubic_loss_checks_clean() {
        let store = ParamStore::from_parts(
            vec!["x".into()],
            vec![Matrix::from_rows(&[[0.3, -1.2, 2.0]])],
        );
        let f = |s: &ParamStore| -> Result<(f64, Vec<Matrix>)> {
            let mut t = Tape::new();
            let p = s.bind(&mut t);
            let x = p.var("x")?;
            let sq = t.square(x)?;
            let cube = t.mul(sq, x)?;
            let l = t.sum(cube)?;
            let g = t.backward(l)?;
            Ok((g.loss, p.gradients(&g)))
        };
        let (_, grads) = f(&store).unwrap();
        let report = check_gradients(&store, &grads, 1e-5, |s| f(s).map(|r| r.0)).unwrap();
        assert_eq!(report.checked, 3);
        assert!(report.max_rel_error < 1e-8);
    }

    #[test]
    fn wrong_gradient_is_flagged() {
        let store = ParamStore::from_parts(vec!["x".into()], vec![Matrix::scalar(2.0)]);
        let report = check_gradients(&store, &[Matrix::scalar(5.0)], 1e-5, |s| {
            Ok(s.values[0].data[0].powi(2))
        })
        .unwrap();
        assert!((report.max_rel_error - 0.2).abs() < 1e-6);
        assert_eq!(report.floor, 4.0 * GRAD_FLOOR);
    }

    #[test]
    fn tiny_gradients_compare_against_the_floor() {
        assert_eq!(relative_error(1e-9, 2e-9, 1e-6), 1e-3);
        assert_eq!(relative_error(1.0, 1.5, 1e-6), 0.5 / 1.5);
    }
}
