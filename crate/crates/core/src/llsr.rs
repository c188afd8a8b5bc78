//! Linear least-squares regression onto one-hot targets, argmax decision.

use nalgebra::DMatrix;

use crate::error::{Error, Result};

pub const DEFAULT_RIDGE: f64 = 1e-4;

/// Weights are `(D + 1) × C`, row-major, bias row first.
#[derive(Debug, Clone, PartialEq)]
pub struct LlsrModel {
    dims: usize,
    weights: Vec<f64>,
    class_labels: Vec<u32>,
}

impl LlsrModel {
    pub fn from_parts(dims: usize, weights: Vec<f64>, class_labels: Vec<u32>) -> Result<Self> {
        if class_labels.is_empty() || weights.len() != (dims + 1) * class_labels.len() {
            return Err(Error::InvalidInput(format!(
                "weight count {} does not match ({dims} + 1) x {}",
                weights.len(),
                class_labels.len()
            )));
        }
        if weights.iter().any(|w| !w.is_finite()) {
            return Err(Error::InvalidInput("non-finite classifier weight".into()));
        }
        Ok(LlsrModel {
            dims,
            weights,
            class_labels,
        })
    }

    pub fn dims(&self) -> usize {
        self.dims
    }

    pub fn classes(&self) -> usize {
        self.class_labels.len()
    }

    pub fn class_labels(&self) -> &[u32] {
        &self.class_labels
    }

    pub fn weights(&self) -> &[f64] {
        &self.weights
    }

    pub fn parameter_count(&self) -> usize {
        self.weights.len()
    }

    /// Fits `argmin ‖[1|X]·W − Y‖² + ridge·‖W_features‖²`; the bias row is
    /// not penalized.
    pub fn fit(features: &[Vec<f64>], labels: &[usize], ridge: f64) -> Result<Self> {
        let n = features.len();
        if n != labels.len() {
            return Err(Error::InvalidInput(format!("{n} samples but {} labels", labels.len())));
        }
        if !(ridge >= 0.0 && ridge.is_finite()) {
            return Err(Error::Config(format!("ridge must be finite and >= 0, got {ridge}")));
        }
        let dims = features.first().map_or(0, Vec::len);
        if features.iter().any(|r| r.len() != dims) {
            return Err(Error::InvalidInput("ragged feature matrix".into()));
        }
        let mut class_labels: Vec<u32> = labels.iter().map(|&l| l as u32).collect();
        class_labels.sort_unstable();
        class_labels.dedup();
        let c = class_labels.len();
        if c < 2 {
            return Err(Error::DegenerateLabels("classifier needs at least 2 classes".into()));
        }
        if n < c {
            return Err(Error::InvalidInput(format!("{n} samples for {c} classes")));
        }

        let x = DMatrix::from_fn(n, dims + 1, |i, j| if j == 0 { 1.0 } else { features[i][j - 1] });
        if x.iter().any(|v| !v.is_finite()) {
            return Err(Error::InvalidInput("non-finite feature value".into()));
        }
        let y = DMatrix::from_fn(n, c, |i, k| {
            if class_labels[k] as usize == labels[i] {
                1.0
            } else {
                0.0
            }
        });
        let xt = x.transpose();
        let mut gram = &xt * &x;
        for j in 1..=dims {
            gram[(j, j)] += ridge;
        }
        let rhs = &xt * &y;

        let chol = gram.clone().cholesky().ok_or(Error::NumericalRank)?;
        if ridge == 0.0 {
            let l = chol.l_dirty();
            let diag: Vec<f64> = (0..=dims).map(|i| l[(i, i)].abs()).collect();
            let hi = diag.iter().copied().fold(0.0, f64::max);
            let lo = diag.iter().copied().fold(f64::INFINITY, f64::min);
            if lo.is_nan() || lo <= hi * 1e-7 {
                return Err(Error::NumericalRank);
            }
        }
        let mut w = chol.solve(&rhs);
        // one step of iterative refinement
        let residual = &rhs - &gram * &w;
        w += chol.solve(&residual);
        if w.iter().any(|v| !v.is_finite()) {
            return Err(Error::NumericalRank);
        }

        let mut weights = Vec::with_capacity((dims + 1) * c);
        for i in 0..=dims {
            for k in 0..c {
                weights.push(w[(i, k)]);
            }
        }
        Ok(LlsrModel {
            dims,
            weights,
            class_labels,
        })
    }

    /// Regression outputs `[1|x]·W`.
    pub fn scores(&self, feature: &[f64]) -> Result<Vec<f64>> {
        if feature.len() != self.dims {
            return Err(Error::InvalidInput(format!(
                "classifier expects {} features, got {}",
                self.dims,
                feature.len()
            )));
        }
        let c = self.classes();
        let mut scores = self.weights[..c].to_vec();
        for (row, &v) in self.weights[c..].chunks_exact(c).zip(feature) {
            for (s, w) in scores.iter_mut().zip(row) {
                *s += v * w;
            }
        }
        Ok(scores)
    }

    /// Predicted class id and the score vector. Ties go to the lowest index.
    pub fn predict(&self, feature: &[f64]) -> Result<(u32, Vec<f64>)> {
        let scores = self.scores(feature)?;
        Ok((self.class_labels[argmax(&scores)], scores))
    }
}

pub fn argmax(scores: &[f64]) -> usize {
    let mut best = 0;
    for (i, &s) in scores.iter().enumerate().skip(1) {
        if s > scores[best] {
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// ‖X̃ᵀ(X̃W − Y) + ridge·P·W‖ and ‖X̃ᵀY‖, computed with plain loops.
    fn normal_equation_residual(m: &LlsrModel, features: &[Vec<f64>], labels: &[usize], ridge: f64) -> (f64, f64) {
        let c = m.classes();
        let d = m.dims();
        let w = |i: usize, k: usize| m.weights()[i * c + k];
        let xt = |s: usize, i: usize| if i == 0 { 1.0 } else { features[s][i - 1] };
        let mut res = 0.0;
        let mut rhs = 0.0;
        for i in 0..=d {
            for k in 0..c {
                let mut g = 0.0;
                let mut b = 0.0;
                for (s, &label) in labels.iter().enumerate() {
                    let pred: f64 = (0..=d).map(|j| xt(s, j) * w(j, k)).sum();
                    let target = if m.class_labels()[k] as usize == label { 1.0 } else { 0.0 };
                    g += xt(s, i) * (pred - target);
                    b += xt(s, i) * target;
                }
                if i > 0 {
                    g += ridge * w(i, k);
                }
                res += g * g;
                rhs += b * b;
            }
        }
        (res.sqrt(), rhs.sqrt())
    }

    #[test]
    fn one_dimensional_threshold_at_half() {
        let mut feats = vec![vec![0.0]; 10];
        feats.extend(vec![vec![1.0]; 10]);
        let labels: Vec<usize> = (0..20).map(|i| usize::from(i >= 10)).collect();
        let m = LlsrModel::fit(&feats, &labels, 0.0).unwrap();
        // hand solution: score_1(x) = x, score_0(x) = 1 - x
        let s = m.scores(&[0.3]).unwrap();
        assert!((s[0] - 0.7).abs() < 1e-12 && (s[1] - 0.3).abs() < 1e-12);
        assert_eq!(m.predict(&[0.49]).unwrap().0, 0);
        assert_eq!(m.predict(&[0.51]).unwrap().0, 1);
        assert_eq!(m.predict(&[0.9]).unwrap().0, 1);
        // exact tie at 0.5 resolves to the lower class
        let tie = m.scores(&[0.5]).unwrap();
        assert!((tie[0] - tie[1]).abs() < 1e-12);
    }

    #[test]
    fn square_system_interpolates() {
        let feats = vec![vec![0.0, 0.0], vec![1.0, 0.0], vec![0.0, 1.0]];
        let labels = vec![0, 1, 2];
        let m = LlsrModel::fit(&feats, &labels, 0.0).unwrap();
        for (f, &l) in feats.iter().zip(&labels) {
            let (class, scores) = m.predict(f).unwrap();
            assert_eq!(class as usize, l);
            for (k, s) in scores.iter().enumerate() {
                let target = if k == l { 1.0 } else { 0.0 };
                assert!((s - target).abs() < 1e-10);
            }
        }
    }

    #[test]
    fn singular_without_ridge() {
        let feats = vec![vec![1.0, 2.0], vec![2.0, 4.0], vec![3.0, 6.0], vec![4.0, 8.0]];
        let labels = vec![0, 1, 0, 1];
        assert!(matches!(LlsrModel::fit(&feats, &labels, 0.0), Err(Error::NumericalRank)));
        assert!(LlsrModel::fit(&feats, &labels, 1e-3).is_ok());
    }

    #[test]
    fn errors() {
        let feats = vec![vec![0.0], vec![1.0]];
        assert!(matches!(LlsrModel::fit(&feats, &[0, 0], 0.1), Err(Error::DegenerateLabels(_))));
        assert!(LlsrModel::fit(&feats, &[0, 1], -1.0).is_err());
        let m = LlsrModel::fit(&feats, &[0, 1], 0.1).unwrap();
        assert!(matches!(m.predict(&[1.0, 2.0]), Err(Error::InvalidInput(_))));
    }

    #[test]
    fn normal_equations_hold() {
        let mut rng = ChaCha8Rng::seed_from_u64(77);
        for trial in 0..10 {
            let n = rng.random_range(20..60);
            let d = rng.random_range(1..15);
            let c = rng.random_range(2..5);
            let ridge = if trial % 2 == 0 { 0.0 } else { rng.random_range(1e-4..1.0) };
            let feats: Vec<Vec<f64>> = (0..n).map(|_| (0..d).map(|_| rng.random_range(-1.0..1.0)).collect()).collect();
            let labels: Vec<usize> = (0..n).map(|i| i % c).collect();
            let m = LlsrModel::fit(&feats, &labels, ridge).unwrap();
            let (res, rhs) = normal_equation_residual(&m, &feats, &labels, ridge);
            assert!(res <= 1e-6 * rhs, "residual {res} vs {rhs}");
        }
    }

    #[test]
    fn scores_sum_to_one_without_ridge() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let feats: Vec<Vec<f64>> = (0..50).map(|_| (0..4).map(|_| rng.random::<f64>()).collect()).collect();
        let labels: Vec<usize> = (0..50).map(|i| i % 3).collect();
        let m = LlsrModel::fit(&feats, &labels, 0.0).unwrap();
        for _ in 0..20 {
            let x: Vec<f64> = (0..4).map(|_| rng.random_range(-5.0..5.0)).collect();
            let s: f64 = m.scores(&x).unwrap().iter().sum();
            assert!((s - 1.0).abs() < 1e-6);
        }
    }

    #[test]
    fn duplicated_training_set_gives_same_predictions() {
        let mut rng = ChaCha8Rng::seed_from_u64(4);
        let feats: Vec<Vec<f64>> = (0..30).map(|_| (0..3).map(|_| rng.random::<f64>()).collect()).collect();
        let labels: Vec<usize> = (0..30).map(|i| i % 2).collect();
        let a = LlsrModel::fit(&feats, &labels, 0.0).unwrap();
        let mut f2 = feats.clone();
        f2.extend(feats.iter().cloned());
        let mut l2 = labels.clone();
        l2.extend(labels.iter().copied());
        let b = LlsrModel::fit(&f2, &l2, 0.0).unwrap();
        for x in &feats {
            let (ca, sa) = a.predict(x).unwrap();
            let (cb, sb) = b.predict(x).unwrap();
            assert_eq!(ca, cb);
            for (p, q) in sa.iter().zip(&sb) {
                assert!((p - q).abs() < 1e-9);
            }
        }
    }

    #[test]
    fn non_contiguous_labels() {
        let feats = vec![vec![0.0], vec![0.1], vec![1.0], vec![1.1]];
        let m = LlsrModel::fit(&feats, &[3, 3, 7, 7], 1e-6).unwrap();
        assert_eq!(m.class_labels(), &[3, 7]);
        assert_eq!(m.predict(&[1.05]).unwrap().0, 7);
    }
}
