//! Point cloud container and the per-object preprocessing steps:
//! normalization, random down-sampling and train-time augmentation.

use rand::seq::index;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};

use crate::error::{Error, Result};

pub type Point = [f64; 3];

/// An ordered list of 3-D points with finite coordinates.
#[derive(Debug, Clone, PartialEq)]
pub struct PointCloud {
    points: Vec<Point>,
}

impl PointCloud {
    /// Builds a cloud, rejecting empty input and non-finite coordinates.
    pub fn new(points: Vec<Point>) -> Result<Self> {
        if points.is_empty() {
            return Err(Error::InvalidInput("point cloud is empty".into()));
        }
        if let Some(i) = points
            .iter()
            .position(|p| p.iter().any(|c| !c.is_finite()))
        {
            return Err(Error::InvalidInput(format!(
                "point {i} has a non-finite coordinate"
            )));
        }
        Ok(PointCloud { points })
    }

    pub fn points(&self) -> &[Point] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    pub fn into_points(self) -> Vec<Point> {
        self.points
    }

    pub fn centroid(&self) -> Point {
        let n = self.points.len() as f64;
        let mut c = [0.0; 3];
        for p in &self.points {
            for a in 0..3 {
                c[a] += p[a];
            }
        }
        c.map(|v| v / n)
    }

    /// Largest Euclidean norm over all points.
    pub fn max_norm(&self) -> f64 {
        self.points.iter().map(|p| norm(*p)).fold(0.0, f64::max)
    }

    /// Centers the cloud at the origin and scales it into the unit ball.
    ///
    /// If every point coincides with the centroid only the centering is
    /// applied.
    pub fn normalize(&self) -> PointCloud {
        let c = self.centroid();
        let mut points: Vec<Point> = self
            .points
            .iter()
            .map(|p| [p[0] - c[0], p[1] - c[1], p[2] - c[2]])
            .collect();
        let scale = points.iter().map(|p| norm(*p)).fold(0.0, f64::max);
        if scale > 0.0 {
            for p in &mut points {
                for v in p.iter_mut() {
                    *v /= scale;
                }
            }
        }
        PointCloud { points }
    }

    /// Samples `m` points uniformly without replacement. The kept points
    /// retain their original relative order. `m == len()` returns a copy.
    pub fn downsample(&self, m: usize, seed: u64) -> Result<PointCloud> {
        let n = self.points.len();
        if m == 0 || m > n {
            return Err(Error::InvalidInput(format!(
                "cannot down-sample {n} points to {m}"
            )));
        }
        if m == n {
            return Ok(self.clone());
        }
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut picked = index::sample(&mut rng, n, m).into_vec();
        picked.sort_unstable();
        Ok(PointCloud {
            points: picked.into_iter().map(|i| self.points[i]).collect(),
        })
    }

    /// Rotates every point by `angle` radians about the z axis.
    pub fn rotate_z(&self, angle: f64) -> PointCloud {
        let (s, c) = angle.sin_cos();
        PointCloud {
            points: self
                .points
                .iter()
                .map(|p| [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]])
                .collect(),
        }
    }

    /// Adds clipped Gaussian noise to every coordinate.
    pub fn jitter<R: Rng>(&self, rng: &mut R, sigma: f64, clip: f64) -> Result<PointCloud> {
        check_jitter(sigma, clip)?;
        if sigma == 0.0 {
            return Ok(self.clone());
        }
        let normal = Normal::new(0.0, sigma)
            .map_err(|e| Error::InvalidInput(format!("jitter sigma: {e}")))?;
        let points = self
            .points
            .iter()
            .map(|p| p.map(|v| v + normal.sample(rng).clamp(-clip, clip)))
            .collect();
        Ok(PointCloud { points })
    }

    /// Random rotation about the up (z) axis, uniform in [0, 2π), followed
    /// by per-point jitter.
    pub fn augment(&self, seed: u64, jitter_sigma: f64, jitter_clip: f64) -> Result<PointCloud> {
        check_jitter(jitter_sigma, jitter_clip)?;
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let angle = rng.random_range(0.0..std::f64::consts::TAU);
        self.rotate_z(angle).jitter(&mut rng, jitter_sigma, jitter_clip)
    }

    /// Applies an index permutation: output point `i` is input point `perm[i]`.
    pub fn permuted(&self, perm: &[usize]) -> PointCloud {
        PointCloud {
            points: perm.iter().map(|&i| self.points[i]).collect(),
        }
    }
}

fn check_jitter(sigma: f64, clip: f64) -> Result<()> {
    if !(sigma >= 0.0 && sigma.is_finite()) || !(clip >= 0.0 && clip.is_finite()) {
        return Err(Error::InvalidInput(format!(
            "jitter sigma ({sigma}) and clip ({clip}) must be finite and nonnegative"
        )));
    }
    Ok(())
}

#[inline]
pub fn norm(p: Point) -> f64 {
    (p[0] * p[0] + p[1] * p[1] + p[2] * p[2]).sqrt()
}

#[inline]
pub fn sub(a: Point, b: Point) -> Point {
    [a[0] - b[0], a[1] - b[1], a[2] - b[2]]
}

#[inline]
pub fn dist2(a: Point, b: Point) -> f64 {
    let d = sub(a, b);
    d[0] * d[0] + d[1] * d[1] + d[2] * d[2]
}
