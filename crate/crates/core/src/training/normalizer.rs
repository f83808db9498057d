use serde::{Deserialize, Serialize};

use crate::autodiff::Matrix;

pub const STD_FLOOR: f64 = 1e-8;

/// Per-feature Gaussian statistics, accumulated with Welford updates.
///
/// The standard deviation is the population one, floored at [`STD_FLOOR`].
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Normalizer {
    pub count: u64,
    pub mean: Vec<f64>,
    pub m2: Vec<f64>,
}

impl Normalizer {
    pub fn new(dim: usize) -> Self {
        Normalizer {
            count: 0,
            mean: vec![0.0; dim],
            m2: vec![0.0; dim],
        }
    }

    pub fn dim(&self) -> usize {
        self.mean.len()
    }

    pub fn observe(&mut self, row: &[f64]) {
        debug_assert_eq!(row.len(), self.dim());
        self.count += 1;
        let n = self.count as f64;
        for ((m, s), &x) in self.mean.iter_mut().zip(&mut self.m2).zip(row) {
            let d = x - *m;
            *m += d / n;
            *s += d * (x - *m);
        }
    }

    pub fn observe_matrix(&mut self, m: &Matrix) {
        for r in 0..m.rows {
            self.observe(m.row(r));
        }
    }

    /// An empty normalizer is the identity map.
    pub fn std(&self) -> Vec<f64> {
        if self.count == 0 {
            return vec![1.0; self.dim()];
        }
        self.m2
            .iter()
            .map(|&s| (s / self.count as f64).sqrt().max(STD_FLOOR))
            .collect()
    }

    pub fn standardize(&self, m: &Matrix) -> Matrix {
        let std = self.std();
        let mut out = m.clone();
        for r in 0..out.rows {
            for ((x, mu), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&std) {
                *x = (*x - mu) / s;
            }
        }
        out
    }

    pub fn destandardize(&self, m: &Matrix) -> Matrix {
        let std = self.std();
        let mut out = m.clone();
        for r in 0..out.rows {
            for ((x, mu), s) in out.row_mut(r).iter_mut().zip(&self.mean).zip(&std) {
                *x = *x * s + mu;
            }
        }
        out
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn two_sample_population_convention() {
        let mut n = Normalizer::new(1);
        n.observe(&[0.0]);
        n.observe(&[2.0]);
        assert_eq!(n.mean, vec![1.0]);
        assert_eq!(n.std(), vec![1.0]);
    }

    #[test]
    fn constant_feature_is_floored() {
        let mut n = Normalizer::new(2);
        for i in 0..5 {
            n.observe(&[3.0, i as f64]);
        }
        assert_eq!(n.std()[0], STD_FLOOR);
        let z = n.standardize(&Matrix::from_rows(&[[3.0, 2.0]]));
        assert_eq!(z.data[0], 0.0);
    }

    #[test]
    fn standardized_statistics_and_round_trip() {
        let mut s = 11u64;
        let mut next = || {
            s = s
                .wrapping_mul(6364136223846793005)
                .wrapping_add(1442695040888963407);
            (s >> 11) as f64 / (1u64 << 53) as f64
        };
        let rows: Vec<[f64; 3]> = (0..500)
            .map(|_| [next() * 40.0 - 7.0, 1e-3 * next() + 5.0, -next()])
            .collect();
        let m = Matrix::from_rows(&rows);
        let mut n = Normalizer::new(3);
        n.observe_matrix(&m);
        let z = n.standardize(&m);
        let mut check = Normalizer::new(3);
        check.observe_matrix(&z);
        for k in 0..3 {
            assert!(check.mean[k].abs() < 1e-10);
            assert!((check.std()[k] - 1.0).abs() < 1e-10);
        }
        assert!(n.destandardize(&z).max_abs_diff(&m) < 1e-12);
    }

    proptest::proptest! {
        #[test]
        fn welford_matches_two_pass(rows in proptest::collection::vec(proptest::collection::vec(-1e3f64..1e3, 3), 1..200)) {
            let mut n = Normalizer::new(3);
            for r in &rows {
                n.observe(r);
            }
            let count = rows.len() as f64;
            let std = n.std();
            for k in 0..3 {
                let mean = rows.iter().map(|r| r[k]).sum::<f64>() / count;
                let var = rows.iter().map(|r| (r[k] - mean).powi(2)).sum::<f64>() / count;
                proptest::prop_assert!((n.mean[k] - mean).abs() <= 1e-9 * (1.0 + mean.abs()));
                proptest::prop_assert!((std[k] - var.sqrt().max(STD_FLOOR)).abs() <= 1e-9 * (1.0 + var.sqrt()));
                proptest::prop_assert!(std[k] >= STD_FLOOR);
            }
            let m = Matrix::from_vec(rows.len(), 3, rows.concat());
            let back = n.destandardize(&n.standardize(&m));
            proptest::prop_assert!(back.max_abs_diff(&m) <= 1e-12 * 1e3);
        }
    }
}
