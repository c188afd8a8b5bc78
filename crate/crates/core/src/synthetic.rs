//! Procedural shape datasets for smoke tests and desk-scale benchmarks.
//!
//! Each object is sampled from a surface with mild random anisotropic
//! scaling, a random rotation about z and small Gaussian noise.

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, StandardNormal};

use crate::cloud::{Point, PointCloud};
use crate::dataset::{Dataset, Sample};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum ShapeKind {
    Sphere,
    /// Elongated box, aspect roughly 2 : 1.2 : 0.9.
    Box,
    /// Upright cylinder with caps.
    Cylinder,
    /// Two overlapping spheres along x.
    TwoLobe,
}

impl ShapeKind {
    pub const ALL: [ShapeKind; 4] = [ShapeKind::Sphere, ShapeKind::Box, ShapeKind::Cylinder, ShapeKind::TwoLobe];

    pub fn name(self) -> &'static str {
        match self {
            ShapeKind::Sphere => "sphere",
            ShapeKind::Box => "box",
            ShapeKind::Cylinder => "cylinder",
            ShapeKind::TwoLobe => "two_lobe",
        }
    }
}

fn unit_vector<R: Rng>(rng: &mut R) -> Point {
    loop {
        let v: Point = [0.0; 3].map(|_: f64| StandardNormal.sample(rng));
        let n = (v[0] * v[0] + v[1] * v[1] + v[2] * v[2]).sqrt();
        if n > 1e-9 {
            return v.map(|c| c / n);
        }
    }
}

fn surface_point<R: Rng>(kind: ShapeKind, rng: &mut R) -> Point {
    match kind {
        ShapeKind::Sphere => unit_vector(rng),
        ShapeKind::Box => {
            let half = [1.0, 0.6, 0.45];
            let areas = [half[1] * half[2], half[0] * half[2], half[0] * half[1]];
            let total: f64 = areas.iter().sum();
            let mut pick = rng.random_range(0.0..total);
            let mut axis = 0;
            while pick > areas[axis] && axis < 2 {
                pick -= areas[axis];
                axis += 1;
            }
            let mut p = [0.0; 3];
            for a in 0..3 {
                p[a] = rng.random_range(-half[a]..half[a]);
            }
            p[axis] = if rng.random_bool(0.5) { half[axis] } else { -half[axis] };
            p
        }
        ShapeKind::Cylinder => {
            let (r, h) = (0.45, 1.0);
            let side = 2.0 * std::f64::consts::PI * r * 2.0 * h;
            let caps = 2.0 * std::f64::consts::PI * r * r;
            let phi = rng.random_range(0.0..std::f64::consts::TAU);
            if rng.random_range(0.0..side + caps) < side {
                [r * phi.cos(), r * phi.sin(), rng.random_range(-h..h)]
            } else {
                let rr = r * rng.random::<f64>().sqrt();
                let z = if rng.random_bool(0.5) { h } else { -h };
                [rr * phi.cos(), rr * phi.sin(), z]
            }
        }
        ShapeKind::TwoLobe => {
            let u = unit_vector(rng);
            let cx = if rng.random_bool(0.5) { 0.55 } else { -0.55 };
            [cx + 0.5 * u[0], 0.5 * u[1], 0.5 * u[2]]
        }
    }
}

/// One sampled object.
pub fn sample_shape(kind: ShapeKind, n_points: usize, seed: u64) -> PointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let scale: [f64; 3] = [0.0; 3].map(|_: f64| rng.random_range(0.85..1.15));
    let angle = rng.random_range(0.0..std::f64::consts::TAU);
    let (s, c) = angle.sin_cos();
    let noise = Normal::new(0.0, 0.01).unwrap();
    let points = (0..n_points)
        .map(|_| {
            let p = surface_point(kind, &mut rng);
            let p = [p[0] * scale[0], p[1] * scale[1], p[2] * scale[2]];
            let r = [c * p[0] - s * p[1], s * p[0] + c * p[1], p[2]];
            r.map(|v| v + noise.sample(&mut rng))
        })
        .collect();
    PointCloud::new(points).expect("generated points are finite")
}

/// `per_class` objects of each kind, interleaved by class.
pub fn shape_dataset(kinds: &[ShapeKind], per_class: usize, n_points: usize, seed: u64) -> Dataset {
    let mut samples = Vec::with_capacity(kinds.len() * per_class);
    for i in 0..per_class {
        for (label, &kind) in kinds.iter().enumerate() {
            let s = seed
                .wrapping_mul(0x2545_F491_4F6C_DD1D)
                .wrapping_add((i * kinds.len() + label) as u64);
            samples.push(Sample {
                name: format!("{}_{i:04}", kind.name()),
                cloud: sample_shape(kind, n_points, s),
                label,
            });
        }
    }
    Dataset {
        class_names: kinds.iter().map(|k| k.name().to_string()).collect(),
        samples,
    }
}
