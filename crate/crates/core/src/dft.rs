//! Discriminant Feature Test: rank feature dimensions by the best weighted
//! class entropy achievable with a single threshold split.

use crate::error::{Error, Result};
use crate::exec::Execution;

pub const DEFAULT_BINS: usize = 32;

/// Result of scoring one dimension.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct DftLoss {
    /// Minimum weighted entropy over the candidate thresholds, in bits.
    pub bits: f64,
    /// Threshold achieving `bits`; `None` for a constant feature.
    pub threshold: Option<f64>,
    /// Only one class present; `bits` is 0 and carries no information.
    pub degenerate: bool,
}

/// Shannon entropy in bits of a count histogram. Empty histograms give 0.
pub fn entropy_bits(counts: &[usize]) -> f64 {
    let total: usize = counts.iter().sum();
    if total == 0 {
        return 0.0;
    }
    let n = total as f64;
    counts
        .iter()
        .filter(|&&c| c > 0)
        .map(|&c| {
            let p = c as f64 / n;
            -p * p.log2()
        })
        .sum()
}

/// Candidate thresholds `lo + b·(hi−lo)/(B+1)` for `b = 1..=B`.
pub fn thresholds(lo: f64, hi: f64, bins: usize) -> Vec<f64> {
    let step = (hi - lo) / (bins + 1) as f64;
    (1..=bins).map(|b| lo + b as f64 * step).collect()
}

fn validate(values: &[f64], labels: &[usize], bins: usize) -> Result<usize> {
    if values.len() != labels.len() {
        return Err(Error::InvalidInput(format!(
            "{} values but {} labels",
            values.len(),
            labels.len()
        )));
    }
    if values.len() < 2 {
        return Err(Error::InvalidInput("DFT needs at least 2 samples".into()));
    }
    if bins == 0 {
        return Err(Error::Config("dft_bins must be >= 1".into()));
    }
    if let Some(v) = values.iter().find(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("non-finite feature value {v}")));
    }
    Ok(labels.iter().max().map_or(0, |&m| m + 1))
}

/// DFT loss of one feature dimension. Samples with `value <= t` go left.
pub fn dft_loss(values: &[f64], labels: &[usize], bins: usize) -> Result<DftLoss> {
    let classes = validate(values, labels, bins)?;
    Ok(loss_unchecked(values, labels, bins, classes))
}

fn loss_unchecked(values: &[f64], labels: &[usize], bins: usize, classes: usize) -> DftLoss {
    let mut totals = vec![0usize; classes];
    for &l in labels {
        totals[l] += 1;
    }
    if totals.iter().filter(|&&c| c > 0).count() < 2 {
        return DftLoss {
            bits: 0.0,
            threshold: None,
            degenerate: true,
        };
    }
    let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
    let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
    if hi <= lo {
        return DftLoss {
            bits: entropy_bits(&totals),
            threshold: None,
            degenerate: false,
        };
    }

    let ts = thresholds(lo, hi, bins);
    // bucket b holds samples with ts[b-1] < v <= ts[b]; bucket `bins` is above all
    let mut hist = vec![0usize; (bins + 1) * classes];
    for (&v, &l) in values.iter().zip(labels) {
        let b = ts.partition_point(|&t| t < v);
        hist[b * classes + l] += 1;
    }

    let n = values.len() as f64;
    let mut left = vec![0usize; classes];
    let mut right = totals.clone();
    let mut best = f64::INFINITY;
    let mut best_t = ts[0];
    for (b, &t) in ts.iter().enumerate() {
        for c in 0..classes {
            let moved = hist[b * classes + c];
            left[c] += moved;
            right[c] -= moved;
        }
        let nl: usize = left.iter().sum();
        let nr: usize = right.iter().sum();
        let loss = nl as f64 / n * entropy_bits(&left) + nr as f64 / n * entropy_bits(&right);
        if loss < best {
            best = loss;
            best_t = t;
        }
    }
    DftLoss {
        bits: best,
        threshold: Some(best_t),
        degenerate: false,
    }
}

/// Per-dimension losses, ranking, and the chosen subset.
#[derive(Debug, Clone, PartialEq)]
pub struct DftResult {
    pub losses: Vec<f64>,
    /// Dimension indices by ascending loss, ties by index.
    pub order: Vec<usize>,
    /// Prefix of `order`.
    pub selected: Vec<usize>,
    pub bins: usize,
}

/// Scores every column of a row-major `samples × dims` matrix and selects
/// either `n_features` dimensions or, if `None`, everything up to and
/// including the elbow of the sorted loss curve.
pub fn rank_and_select(
    features: &[Vec<f64>],
    labels: &[usize],
    bins: usize,
    n_features: Option<usize>,
    exec: Execution,
) -> Result<DftResult> {
    let dims = features.first().map_or(0, Vec::len);
    if dims < 2 {
        return Err(Error::InvalidInput("DFT selection needs at least 2 dimensions".into()));
    }
    if features.iter().any(|r| r.len() != dims) {
        return Err(Error::InvalidInput("ragged feature matrix".into()));
    }
    if let Some(k) = n_features {
        if k == 0 || k > dims {
            return Err(Error::Config(format!(
                "n_features = {k} but the feature vector has {dims} dimensions"
            )));
        }
    }
    let probe: Vec<f64> = features.iter().map(|r| r[0]).collect();
    let classes = validate(&probe, labels, bins)?;
    let mut present = vec![false; classes];
    labels.iter().for_each(|&l| present[l] = true);
    if present.iter().filter(|&&p| p).count() < 2 {
        return Err(Error::DegenerateLabels("DFT needs at least 2 classes".into()));
    }

    let losses: Vec<f64> = exec.try_map_range(dims, |d| {
        let column: Vec<f64> = features.iter().map(|r| r[d]).collect();
        if let Some(v) = column.iter().find(|v| !v.is_finite()) {
            return Err(Error::InvalidInput(format!("non-finite value {v} in dimension {d}")));
        }
        Ok(loss_unchecked(&column, labels, bins, classes).bits)
    })?;

    let mut order: Vec<usize> = (0..dims).collect();
    order.sort_by(|&a, &b| losses[a].total_cmp(&losses[b]).then(a.cmp(&b)));
    let count = match n_features {
        Some(k) => k,
        None => {
            let curve: Vec<f64> = order.iter().map(|&d| losses[d]).collect();
            elbow_index(&curve) + 1
        }
    };
    let selected = order[..count].to_vec();
    Ok(DftResult {
        losses,
        order,
        selected,
        bins,
    })
}

/// Index of the point farthest from the chord joining the first and last
/// points of `curve`. Both axes are rescaled to [0, 1] first; ties go to the
/// lower index. Flat or short curves return the last index.
pub fn elbow_index(curve: &[f64]) -> usize {
    let n = curve.len();
    if n < 3 {
        return n.saturating_sub(1);
    }
    let (y0, y1) = (curve[0], curve[n - 1]);
    let span = y1 - y0;
    if span.abs() <= f64::EPSILON * y0.abs().max(y1.abs()).max(1.0) {
        return n - 1;
    }
    let last = (n - 1) as f64;
    let mut best = 0;
    let mut best_d = f64::NEG_INFINITY;
    for (i, &y) in curve.iter().enumerate() {
        let x = i as f64 / last;
        let yn = (y - y0) / span;
        // chord is the diagonal yn = x after rescaling
        let d = (x - yn).abs() / std::f64::consts::SQRT_2;
        if d > best_d {
            best_d = d;
            best = i;
        }
    }
    best
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    /// Independent oracle: try every threshold, partition by direct comparison.
    fn brute_force(values: &[f64], labels: &[usize], bins: usize) -> f64 {
        let classes = labels.iter().max().unwrap() + 1;
        let lo = values.iter().copied().fold(f64::INFINITY, f64::min);
        let hi = values.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let h = |idx: &[usize]| -> f64 {
            let mut c = vec![0usize; classes];
            idx.iter().for_each(|&i| c[labels[i]] += 1);
            let n = idx.len() as f64;
            c.iter()
                .filter(|&&k| k > 0)
                .map(|&k| {
                    let p = k as f64 / n;
                    -p * p.ln() / std::f64::consts::LN_2
                })
                .sum()
        };
        let all: Vec<usize> = (0..values.len()).collect();
        if hi == lo {
            return h(&all);
        }
        let mut best = f64::INFINITY;
        for b in 1..=bins {
            let t = lo + b as f64 * (hi - lo) / (bins + 1) as f64;
            let l: Vec<usize> = all.iter().copied().filter(|&i| values[i] <= t).collect();
            let r: Vec<usize> = all.iter().copied().filter(|&i| values[i] > t).collect();
            let n = values.len() as f64;
            let loss = l.len() as f64 / n * h(&l) + r.len() as f64 / n * h(&r);
            best = best.min(loss);
        }
        best
    }

    #[test]
    fn perfect_split_is_zero() {
        let l = dft_loss(&[0.1, 0.2, 0.8, 0.9], &[0, 0, 1, 1], 3).unwrap();
        assert_eq!(l.bits, 0.0);
        assert!(!l.degenerate);
    }

    #[test]
    fn constant_feature_gives_prior_entropy() {
        let l = dft_loss(&[0.5; 6], &[0, 1, 0, 1, 1, 0], 32).unwrap();
        assert!((l.bits - 1.0).abs() < 1e-15);
        assert!((brute_force(&[0.5; 6], &[0, 1, 0, 1, 1, 0], 32) - 1.0).abs() < 1e-15);
        assert_eq!(l.threshold, None);
    }

    #[test]
    fn single_class_is_flagged() {
        let l = dft_loss(&[0.1, 0.5, 0.9], &[2, 2, 2], 8).unwrap();
        assert!(l.degenerate);
        assert_eq!(l.bits, 0.0);
    }

    #[test]
    fn input_errors() {
        assert!(dft_loss(&[0.1], &[0], 4).is_err());
        assert!(dft_loss(&[0.1, 0.2], &[0], 4).is_err());
        assert!(matches!(dft_loss(&[0.1, 0.2], &[0, 1], 0), Err(Error::Config(_))));
    }

    #[test]
    fn matches_brute_force() {
        let mut rng = ChaCha8Rng::seed_from_u64(31);
        for _ in 0..40 {
            let n = rng.random_range(2..80);
            let classes = rng.random_range(2..6);
            let values: Vec<f64> = (0..n).map(|_| rng.random_range(-3.0..3.0)).collect();
            let labels: Vec<usize> = (0..n).map(|_| rng.random_range(0..classes)).collect();
            let got = dft_loss(&values, &labels, 32).unwrap();
            if got.degenerate {
                continue;
            }
            let want = brute_force(&values, &labels, 32);
            assert!((got.bits - want).abs() < 1e-12, "{} vs {}", got.bits, want);
            assert!(got.bits >= 0.0 && got.bits <= (classes as f64).log2() + 1e-12);
        }
    }

    #[test]
    fn separating_dimension_ranks_first() {
        let mut rng = ChaCha8Rng::seed_from_u64(1);
        let labels: Vec<usize> = (0..100).map(|i| i % 2).collect();
        let feats: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| {
                let mut row: Vec<f64> = (0..20).map(|_| rng.random::<f64>()).collect();
                row[13] = l as f64 + 0.1 * rng.random::<f64>();
                row
            })
            .collect();
        let r = rank_and_select(&feats, &labels, 32, Some(5), Execution::Sequential).unwrap();
        assert_eq!(r.order[0], 13);
        assert_eq!(r.selected.len(), 5);
        assert_eq!(&r.selected[..], &r.order[..5]);
        assert!(r.order.windows(2).all(|w| {
            let (a, b) = (r.losses[w[0]], r.losses[w[1]]);
            a < b || (a == b && w[0] < w[1])
        }));
        let par = rank_and_select(&feats, &labels, 32, Some(5), Execution::Parallel).unwrap();
        assert_eq!(r, par);
    }

    #[test]
    fn too_many_features_requested() {
        let feats = vec![vec![0.0, 1.0], vec![1.0, 0.0]];
        assert!(matches!(
            rank_and_select(&feats, &[0, 1], 4, Some(3), Execution::Sequential),
            Err(Error::Config(_))
        ));
        assert!(matches!(
            rank_and_select(&feats, &[0, 0], 4, Some(1), Execution::Sequential),
            Err(Error::DegenerateLabels(_))
        ));
    }

    #[test]
    fn elbow_at_knee_of_piecewise_curve() {
        for (n, k) in [(100usize, 20usize), (1680, 1200), (50, 3)] {
            // steep linear drop to the knee, then shallow linear tail
            let curve: Vec<f64> = (0..n)
                .map(|i| {
                    if i <= k {
                        1.0 + (i as f64) * (2.0 / k as f64)
                    } else {
                        3.0 + (i - k) as f64 * 0.01 / (n - k) as f64
                    }
                })
                .collect();
            assert_eq!(elbow_index(&curve), k);
        }
        assert_eq!(elbow_index(&[1.0, 1.0, 1.0, 1.0]), 3);
        assert_eq!(elbow_index(&[0.2, 0.4]), 1);
    }

    #[test]
    fn elbow_mode_selects_prefix() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let labels: Vec<usize> = (0..60).map(|i| i % 3).collect();
        let feats: Vec<Vec<f64>> = labels
            .iter()
            .map(|&l| {
                (0..30)
                    .map(|d| if d < 6 { l as f64 + rng.random::<f64>() * 0.5 } else { rng.random::<f64>() })
                    .collect()
            })
            .collect();
        let r = rank_and_select(&feats, &labels, 16, None, Execution::Sequential).unwrap();
        assert!(!r.selected.is_empty() && r.selected.len() < 30);
        assert_eq!(&r.selected[..], &r.order[..r.selected.len()]);
    }

    #[test]
    fn duplicating_dataset_keeps_losses() {
        let mut rng = ChaCha8Rng::seed_from_u64(6);
        let labels: Vec<usize> = (0..40).map(|_| rng.random_range(0..3)).collect();
        let feats: Vec<Vec<f64>> = (0..40).map(|_| (0..8).map(|_| rng.random::<f64>()).collect()).collect();
        let a = rank_and_select(&feats, &labels, 32, Some(4), Execution::Sequential).unwrap();
        let mut f2 = feats.clone();
        f2.extend(feats.iter().cloned());
        let mut l2 = labels.clone();
        l2.extend(labels.iter().copied());
        let b = rank_and_select(&f2, &l2, 32, Some(4), Execution::Sequential).unwrap();
        for (x, y) in a.losses.iter().zip(&b.losses) {
            assert!((x - y).abs() < 1e-12);
        }
        assert_eq!(a.order, b.order);
    }

    proptest! {
        #[test]
        fn affine_rescaling_keeps_partitions(
            values in proptest::collection::vec(-10.0f64..10.0, 4..40),
            scale in 0.01f64..100.0,
            shift in -50.0f64..50.0,
            seed in 0u64..100,
        ) {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let labels: Vec<usize> = values.iter().map(|_| rng.random_range(0..3)).collect();
            let a = dft_loss(&values, &labels, 32).unwrap();
            let scaled: Vec<f64> = values.iter().map(|v| v * scale + shift).collect();
            let b = dft_loss(&scaled, &labels, 32).unwrap();
            prop_assert!((a.bits - b.bits).abs() < 1e-12);
        }
    }
}
