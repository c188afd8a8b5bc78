//! Single-hop point cloud object classification.
//!
//! Per point: K nearest neighbors, eight-octant centroid descriptor, Saab
//! filtering. Per object: seven symmetric aggregations over a global region,
//! three axis cones and six inverted cones. Then DFT feature selection and a
//! linear least-squares classifier.
//!
//! Batch work (feature extraction, Saab moment accumulation, per-dimension
//! DFT) runs on rayon when the `parallel` feature is on; see [`exec`].

pub mod cloud;
pub mod dataset;
pub mod descriptor;
pub mod dft;
pub mod error;
pub mod exec;
pub mod knn;
pub mod llsr;
pub mod pipeline;
pub mod regions;
pub mod synthetic;

pub use cloud::PointCloud;
pub use dataset::{Dataset, Sample};
pub use descriptor::{RawDescriptor, SaabTransform, SpectralDescriptor};
pub use error::{Error, ModelFormatError, Result};
pub use exec::Execution;
pub use pipeline::{PipelineConfig, PipelineModel};
pub use regions::{Aggregator, RegionGroup, RegionSet, RegionSpec};
