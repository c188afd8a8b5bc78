//! End-to-end training and inference.
//!
//! Stage 1 (octant descriptors + Saab) and stage 2 (region aggregation) are
//! fitted without labels; labels only reach the standardized DFT selection
//! and the least-squares classifier.

mod complexity;
mod config;
mod io;
mod metrics;

use std::time::{Duration, Instant};

pub use complexity::{estimate_flops, FlopReport, ParameterCount, StageFlops};
pub use config::{PipelineConfig, KEYS as CONFIG_KEYS};
pub use io::{decode_model, encode_model, load_model, save_model, FORMAT_VERSION, MAGIC};
pub use metrics::EvalReport;

use crate::cloud::PointCloud;
use crate::dataset::Dataset;
use crate::descriptor::{raw_descriptors, SaabTransform, SecondMoment, SpectralDescriptor};
use crate::dft::{rank_and_select, DftResult};
use crate::error::{Error, Result};
use crate::exec::Execution;
use crate::knn::knn;
use crate::llsr::LlsrModel;
use crate::regions::{build_feature, RegionSet};

/// Everything needed to classify a raw cloud.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineModel {
    pub config: PipelineConfig,
    pub class_names: Vec<String>,
    pub saab: SaabTransform,
    pub regions: RegionSet,
    /// Per-dimension training mean of the full feature vector.
    pub mean: Vec<f64>,
    /// Per-dimension training std; zero-variance dimensions store 1.
    pub std: Vec<f64>,
    /// Selected feature dimensions, in DFT rank order.
    pub selected: Vec<u32>,
    pub classifier: LlsrModel,
}

impl PipelineModel {
    pub fn feature_len(&self) -> usize {
        self.mean.len()
    }

    /// Standardizes a full feature vector and keeps the selected dimensions.
    pub fn select(&self, feature: &[f64]) -> Vec<f64> {
        self.selected
            .iter()
            .map(|&d| {
                let d = d as usize;
                (feature[d] - self.mean[d]) / self.std[d]
            })
            .collect()
    }

    pub fn class_name(&self, id: u32) -> &str {
        self.class_names
            .get(id as usize)
            .map_or("?", String::as_str)
    }

    /// Checks cross-field consistency (used after decoding).
    pub fn validate(&self) -> Result<()> {
        let d = self.feature_len();
        let bad = |m: String| Err(Error::InvalidInput(m));
        if self.std.len() != d {
            return bad(format!("std has {} entries, mean has {d}", self.std.len()));
        }
        if d != crate::regions::feature_len(self.regions.len(), self.config.aggregators.len()) {
            return bad("feature length disagrees with region/aggregator config".into());
        }
        if let Some(&s) = self.selected.iter().find(|&&s| s as usize >= d) {
            return bad(format!("selected index {s} out of range {d}"));
        }
        if self.classifier.dims() != self.selected.len() {
            return bad("classifier dimension differs from selected count".into());
        }
        if let Some(&c) = self
            .classifier
            .class_labels()
            .iter()
            .find(|&&c| c as usize >= self.class_names.len())
        {
            return bad(format!("classifier label {c} has no class name"));
        }
        if self.std.iter().any(|&s| !(s > 0.0 && s.is_finite())) {
            return bad("standardization scale must be positive".into());
        }
        Ok(())
    }

    pub fn parameter_count(&self) -> ParameterCount {
        ParameterCount::of_model(self)
    }
}

/// Seed for the per-sample augmentation stream.
pub fn sample_seed(seed: u64, index: usize) -> u64 {
    // splitmix64 finalizer
    let mut z = seed ^ (index as u64).wrapping_add(1).wrapping_mul(0x9E37_79B9_7F4A_7C15);
    z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
    z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
    z ^ (z >> 31)
}

/// Normalize, optionally augment, then down-sample to `num_points`.
pub fn prepare_cloud(cloud: &PointCloud, config: &PipelineConfig, augment_seed: Option<u64>) -> Result<PointCloud> {
    let mut c = cloud.normalize();
    if let Some(seed) = augment_seed {
        c = c.augment(seed, config.jitter_sigma, config.jitter_clip)?;
    }
    c.downsample(config.num_points, config.seed)
}

/// Saab responses for every point of a prepared cloud.
pub fn point_spectra(prepared: &PointCloud, saab: &SaabTransform, k: usize) -> Result<Vec<SpectralDescriptor>> {
    let nn = knn(prepared, k)?;
    Ok(raw_descriptors(prepared, &nn).iter().map(|d| saab.apply(d)).collect())
}

fn features_of_prepared(prepared: &PointCloud, saab: &SaabTransform, regions: &RegionSet, config: &PipelineConfig) -> Result<Vec<f64>> {
    let spectra = point_spectra(prepared, saab, config.k_neighbors)?;
    Ok(build_feature(prepared, &spectra, regions, &config.aggregators))
}

/// Full (unselected) feature vector of a raw cloud.
pub fn extract_features(cloud: &PointCloud, saab: &SaabTransform, regions: &RegionSet, config: &PipelineConfig) -> Result<Vec<f64>> {
    features_of_prepared(&prepare_cloud(cloud, config, None)?, saab, regions, config)
}

pub fn extract_batch(
    clouds: &[&PointCloud],
    saab: &SaabTransform,
    regions: &RegionSet,
    config: &PipelineConfig,
    exec: Execution,
) -> Result<Vec<Vec<f64>>> {
    exec.try_map(clouds, |c| extract_features(c, saab, regions, config))
}

fn augment_seed(config: &PipelineConfig, index: usize) -> Option<u64> {
    config.augment.then(|| sample_seed(config.seed, index))
}

/// Fits the Saab transform on octant descriptors of the training clouds.
/// Per-cloud moments are merged in input order, so the result does not
/// depend on the execution mode.
pub fn fit_saab_on(clouds: &[&PointCloud], config: &PipelineConfig, exec: Execution) -> Result<SaabTransform> {
    let partials = exec.try_map_range(clouds.len(), |i| -> Result<SecondMoment> {
        let prepared = prepare_cloud(clouds[i], config, augment_seed(config, i))?;
        let nn = knn(&prepared, config.k_neighbors)?;
        let take = config
            .saab_points_per_cloud
            .map_or(prepared.len(), |m| m.min(prepared.len()));
        let descriptors = raw_descriptors(&prepared, &nn);
        Ok(descriptors[..take].iter().collect())
    })?;
    let mut total = SecondMoment::default();
    for p in &partials {
        total.merge(p);
    }
    SaabTransform::from_moments(&total)
}

/// Wall-clock time per training stage.
#[derive(Debug, Clone, Default)]
pub struct StageTimings {
    pub saab: Duration,
    pub features: Duration,
    pub selection: Duration,
    pub classifier: Duration,
}

impl StageTimings {
    pub fn total(&self) -> Duration {
        self.saab + self.features + self.selection + self.classifier
    }
}

/// A trained model plus by-products useful for reporting.
#[derive(Debug, Clone)]
pub struct TrainOutcome {
    pub model: PipelineModel,
    pub dft: DftResult,
    pub train_accuracy: f64,
    pub timings: StageTimings,
}

pub fn train(dataset: &Dataset, config: &PipelineConfig) -> Result<PipelineModel> {
    Ok(train_with(dataset, config, Execution::default())?.model)
}

pub fn train_with(dataset: &Dataset, config: &PipelineConfig, exec: Execution) -> Result<TrainOutcome> {
    config.validate()?;
    let labels = dataset.labels();
    let mut distinct = labels.clone();
    distinct.sort_unstable();
    distinct.dedup();
    if distinct.len() < 2 {
        return Err(Error::DegenerateLabels(format!(
            "training set has {} class(es); need at least 2",
            distinct.len()
        )));
    }
    if let Some(&l) = labels.iter().find(|&&l| l >= dataset.class_names.len()) {
        return Err(Error::InvalidInput(format!("label {l} has no class name")));
    }
    let clouds = dataset.clouds();
    let regions = config.region_set()?;
    let mut timings = StageTimings::default();

    let t = Instant::now();
    let saab = fit_saab_on(&clouds, config, exec)?;
    timings.saab = t.elapsed();

    let t = Instant::now();
    let raw = exec.try_map_range(clouds.len(), |i| {
        let prepared = prepare_cloud(clouds[i], config, augment_seed(config, i))?;
        features_of_prepared(&prepared, &saab, &regions, config)
    })?;
    timings.features = t.elapsed();

    let t = Instant::now();
    let (mean, std) = standardization(&raw);
    let standardized: Vec<Vec<f64>> = raw
        .iter()
        .map(|f| f.iter().zip(&mean).zip(&std).map(|((v, m), s)| (v - m) / s).collect())
        .collect();
    let dft = rank_and_select(&standardized, &labels, config.dft_bins, config.n_features, exec)?;
    timings.selection = t.elapsed();

    let t = Instant::now();
    let selected_rows: Vec<Vec<f64>> = standardized
        .iter()
        .map(|row| dft.selected.iter().map(|&d| row[d]).collect())
        .collect();
    let classifier = LlsrModel::fit(&selected_rows, &labels, config.ridge)?;
    timings.classifier = t.elapsed();

    let correct = selected_rows
        .iter()
        .zip(&labels)
        .filter(|(row, &l)| matches!(classifier.predict(row), Ok((c, _)) if c as usize == l))
        .count();

    let model = PipelineModel {
        config: config.clone(),
        class_names: dataset.class_names.clone(),
        saab,
        regions,
        mean,
        std,
        selected: dft.selected.iter().map(|&d| d as u32).collect(),
        classifier,
    };
    Ok(TrainOutcome {
        model,
        train_accuracy: correct as f64 / labels.len() as f64,
        dft,
        timings,
    })
}

/// Column means and population standard deviations; zero-variance columns
/// get a scale of 1 so they standardize to 0.
fn standardization(rows: &[Vec<f64>]) -> (Vec<f64>, Vec<f64>) {
    let d = rows.first().map_or(0, Vec::len);
    let n = rows.len() as f64;
    let mut mean = vec![0.0; d];
    for r in rows {
        for (m, v) in mean.iter_mut().zip(r) {
            *m += v;
        }
    }
    mean.iter_mut().for_each(|m| *m /= n);
    let mut var = vec![0.0; d];
    for r in rows {
        for ((s, v), m) in var.iter_mut().zip(r).zip(&mean) {
            *s += (v - m) * (v - m);
        }
    }
    let std = var
        .into_iter()
        .map(|s| {
            let sd = (s / n).sqrt();
            if sd > 1e-12 {
                sd
            } else {
                1.0
            }
        })
        .collect();
    (mean, std)
}

/// A single prediction.
#[derive(Debug, Clone, PartialEq)]
pub struct Prediction {
    pub class_id: u32,
    pub scores: Vec<f64>,
}

pub fn classify(model: &PipelineModel, cloud: &PointCloud) -> Result<Prediction> {
    let feature = extract_features(cloud, &model.saab, &model.regions, &model.config)?;
    let (class_id, scores) = model.classifier.predict(&model.select(&feature))?;
    Ok(Prediction { class_id, scores })
}

pub fn classify_batch(model: &PipelineModel, clouds: &[&PointCloud], exec: Execution) -> Result<Vec<Prediction>> {
    exec.try_map(clouds, |c| classify(model, c))
}

pub fn evaluate(model: &PipelineModel, dataset: &Dataset, exec: Execution) -> Result<EvalReport> {
    Ok(evaluate_detailed(model, dataset, exec)?.0)
}

/// Report plus the per-sample predictions behind it.
pub fn evaluate_detailed(model: &PipelineModel, dataset: &Dataset, exec: Execution) -> Result<(EvalReport, Vec<Prediction>)> {
    let preds = classify_batch(model, &dataset.clouds(), exec)?;
    let predicted: Vec<usize> = preds.iter().map(|p| p.class_id as usize).collect();
    let classes = model.class_names.len().max(dataset.class_names.len());
    let report = EvalReport::from_predictions(&dataset.labels(), &predicted, classes);
    Ok((report, preds))
}
