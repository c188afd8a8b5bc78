//! Model size and inference FLOP accounting.
//!
//! FLOP convention: one multiply-add is two FLOPs; comparisons, abs and
//! sqrt each count as one. Region occupancy is unknown before seeing data,
//! so every region is costed as if it held all `n` points (an upper bound).

use super::{PipelineConfig, PipelineModel};
use crate::descriptor::DIM;
use crate::regions::{Aggregator, RegionSpec};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct ParameterCount {
    pub filter: usize,
    pub classifier: usize,
    pub total: usize,
}

impl ParameterCount {
    /// Counts for `selected` features and `classes` outputs.
    pub fn for_dims(selected: usize, classes: usize) -> Self {
        let filter = DIM * DIM;
        let classifier = (selected + 1) * classes;
        ParameterCount {
            filter,
            classifier,
            total: filter + classifier,
        }
    }

    pub fn of_model(model: &PipelineModel) -> Self {
        let filter = model.saab.parameter_count();
        let classifier = model.classifier.parameter_count();
        ParameterCount {
            filter,
            classifier,
            total: filter + classifier,
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct StageFlops {
    pub name: &'static str,
    pub flops: u64,
    pub formula: &'static str,
    /// Whether the stage counts toward [`FlopReport::headline`].
    pub in_headline: bool,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct FlopReport {
    pub n_points: usize,
    pub stages: Vec<StageFlops>,
}

impl FlopReport {
    /// Transform + aggregation + standardization + classifier.
    pub fn headline(&self) -> u64 {
        self.stages.iter().filter(|s| s.in_headline).map(|s| s.flops).sum()
    }

    pub fn total(&self) -> u64 {
        self.stages.iter().map(|s| s.flops).sum()
    }

    pub fn stage(&self, name: &str) -> Option<u64> {
        self.stages.iter().find(|s| s.name == name).map(|s| s.flops)
    }
}

fn aggregator_flops(agg: Aggregator, n: u64) -> u64 {
    match agg {
        Aggregator::Max | Aggregator::Min => n,
        Aggregator::Mean => n + 1,
        Aggregator::L1 => 2 * n,
        Aggregator::L2 => 2 * n + 1,
        Aggregator::Var => 4 * n + 2,
        Aggregator::Std => 4 * n + 3,
    }
}

fn membership_flops(region: &RegionSpec) -> u64 {
    match region {
        RegionSpec::Global => 0,
        // norm (3 mul, 2 add, sqrt), abs, scale by cos, compare
        RegionSpec::SymmetricCone { .. } => 9,
        // half-space test, offset to vertex (3 sub), norm (6), scale, compare
        RegionSpec::InvertedCone { .. } => 12,
    }
}

/// Per-stage FLOP estimate for one object of `n_points` points.
///
/// `selected` is the classifier input size; `None` falls back to
/// `config.n_features`, then to the full feature length.
pub fn estimate_flops(config: &PipelineConfig, n_points: usize, classes: usize, selected: Option<usize>) -> FlopReport {
    let n = n_points as u64;
    let k = config.k_neighbors as u64;
    let d = selected
        .or(config.n_features)
        .unwrap_or_else(|| config.feature_len()) as u64;
    let c = classes as u64;
    let dim = DIM as u64;

    let regions = config.region_set().map(|r| r.0).unwrap_or_default();
    let per_region_agg: u64 = config
        .aggregators
        .iter()
        .map(|&a| aggregator_flops(a, n))
        .sum::<u64>()
        * dim;
    let aggregation: u64 = regions
        .iter()
        .map(|r| membership_flops(r) * n + per_region_agg)
        .sum();

    let stages = vec![
        StageFlops {
            name: "knn",
            flops: 8 * n * n.saturating_sub(1),
            formula: "8·N·(N−1): 3 sub + 3 mul + 2 add per pair",
            in_headline: false,
        },
        StageFlops {
            name: "descriptor",
            flops: n * (6 * k + dim),
            formula: "N·(6K + 24): local offsets, octant sums, centroid divides",
            in_headline: false,
        },
        StageFlops {
            name: "saab",
            flops: 2 * n * dim * dim,
            formula: "2·N·24²",
            in_headline: true,
        },
        StageFlops {
            name: "aggregation",
            flops: aggregation,
            formula: "Σ_regions [membership·N + 24·Σ_aggregators cost(N)]",
            in_headline: true,
        },
        StageFlops {
            name: "standardize",
            flops: 2 * d,
            formula: "2·D",
            in_headline: true,
        },
        StageFlops {
            name: "classifier",
            flops: 2 * (d + 1) * c,
            formula: "2·(D+1)·C",
            in_headline: true,
        },
    ];
    FlopReport {
        n_points,
        stages,
    }
}
