use std::fmt::Write as _;

use crate::error::{Error, Result};
use crate::regions::{Aggregator, RegionGroup, RegionSet};

/// Every tunable of the pipeline. `Default` is the ModelNet40 setup.
#[derive(Debug, Clone, PartialEq)]
pub struct PipelineConfig {
    pub k_neighbors: usize,
    pub theta1_deg: f64,
    pub theta2_deg: f64,
    pub delta: f64,
    pub aggregators: Vec<Aggregator>,
    pub regions: Vec<RegionGroup>,
    pub num_points: usize,
    pub dft_bins: usize,
    /// `None` selects up to the elbow of the DFT loss curve.
    pub n_features: Option<usize>,
    pub ridge: f64,
    pub seed: u64,
    pub augment: bool,
    pub jitter_sigma: f64,
    pub jitter_clip: f64,
    /// Points per training cloud used to fit Saab; `None` uses all.
    pub saab_points_per_cloud: Option<usize>,
}

impl Default for PipelineConfig {
    fn default() -> Self {
        PipelineConfig {
            k_neighbors: 32,
            theta1_deg: 75.0,
            theta2_deg: 45.0,
            delta: 1.0,
            aggregators: Aggregator::ALL.to_vec(),
            regions: RegionGroup::ALL.to_vec(),
            num_points: 1024,
            dft_bins: crate::dft::DEFAULT_BINS,
            n_features: Some(1569),
            ridge: crate::llsr::DEFAULT_RIDGE,
            seed: 0,
            augment: false,
            jitter_sigma: 0.01,
            jitter_clip: 0.05,
            saab_points_per_cloud: None,
        }
    }
}

/// Recognized keys, in serialization order.
pub const KEYS: [&str; 15] = [
    "k_neighbors",
    "theta1_deg",
    "theta2_deg",
    "delta",
    "aggregators",
    "regions",
    "num_points",
    "dft_bins",
    "n_features",
    "ridge",
    "seed",
    "augment",
    "jitter_sigma",
    "jitter_clip",
    "saab_points_per_cloud",
];

impl PipelineConfig {
    pub fn modelnet40() -> Self {
        Self::default()
    }

    /// Real-scan setup: wider neighborhoods, 65° cones, fewer features,
    /// rotation + jitter augmentation.
    pub fn scanobjectnn() -> Self {
        PipelineConfig {
            k_neighbors: 48,
            theta1_deg: 65.0,
            theta2_deg: 65.0,
            n_features: Some(1108),
            augment: true,
            ..Self::default()
        }
    }

    pub fn preset(name: &str) -> Result<Self> {
        match name {
            "modelnet40" => Ok(Self::modelnet40()),
            "scanobjectnn" => Ok(Self::scanobjectnn()),
            _ => Err(Error::Config(format!("unknown preset '{name}'"))),
        }
    }

    pub fn region_set(&self) -> Result<RegionSet> {
        RegionSet::from_groups(&self.regions, self.theta1_deg, self.theta2_deg, self.delta)
    }

    pub fn feature_len(&self) -> usize {
        let regions: usize = self.regions.iter().map(|g| g.region_count()).sum();
        crate::regions::feature_len(regions, self.aggregators.len())
    }

    pub fn validate(&self) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        for (name, v) in [
            ("k_neighbors", self.k_neighbors),
            ("num_points", self.num_points),
            ("dft_bins", self.dft_bins),
        ] {
            if v == 0 {
                return bad(format!("{name} must be >= 1"));
            }
        }
        if self.k_neighbors >= self.num_points {
            return bad(format!(
                "k_neighbors ({}) must be below num_points ({})",
                self.k_neighbors, self.num_points
            ));
        }
        if self.aggregators.is_empty() || self.regions.is_empty() {
            return bad("aggregators and regions must be non-empty".into());
        }
        self.region_set()?;
        if let Some(n) = self.n_features {
            if n == 0 || n > self.feature_len() {
                return bad(format!(
                    "n_features = {n} but the feature vector has {} dimensions",
                    self.feature_len()
                ));
            }
        }
        if !(self.ridge >= 0.0 && self.ridge.is_finite()) {
            return bad(format!("ridge must be finite and >= 0, got {}", self.ridge));
        }
        if !(self.jitter_sigma >= 0.0 && self.jitter_clip >= 0.0) {
            return bad("jitter_sigma and jitter_clip must be >= 0".into());
        }
        if self.saab_points_per_cloud == Some(0) {
            return bad("saab_points_per_cloud must be >= 1 or 'all'".into());
        }
        Ok(())
    }

    /// Sets one key from its text form.
    pub fn set(&mut self, key: &str, value: &str) -> Result<()> {
        let value = value.trim();
        fn num<T: std::str::FromStr>(key: &str, v: &str) -> Result<T> {
            v.parse()
                .map_err(|_| Error::Config(format!("invalid value '{v}' for {key}")))
        }
        let optional = |v: &str, none: &str| -> Result<Option<usize>> {
            if v == none {
                Ok(None)
            } else {
                num(key, v).map(Some)
            }
        };
        match key {
            "k_neighbors" => self.k_neighbors = num(key, value)?,
            "theta1_deg" => self.theta1_deg = num(key, value)?,
            "theta2_deg" => self.theta2_deg = num(key, value)?,
            "delta" => self.delta = num(key, value)?,
            "aggregators" => self.aggregators = Aggregator::parse_list(value)?,
            "regions" => {
                let mut groups = value
                    .split(',')
                    .map(str::trim)
                    .filter(|s| !s.is_empty())
                    .map(str::parse)
                    .collect::<Result<Vec<RegionGroup>>>()?;
                groups.sort_unstable();
                groups.dedup();
                self.regions = groups;
            }
            "num_points" => self.num_points = num(key, value)?,
            "dft_bins" => self.dft_bins = num(key, value)?,
            "n_features" => self.n_features = optional(value, "auto")?,
            "ridge" => self.ridge = num(key, value)?,
            "seed" => self.seed = num(key, value)?,
            "augment" => {
                self.augment = match value {
                    "true" | "1" | "yes" => true,
                    "false" | "0" | "no" => false,
                    _ => return Err(Error::Config(format!("invalid value '{value}' for augment"))),
                }
            }
            "jitter_sigma" => self.jitter_sigma = num(key, value)?,
            "jitter_clip" => self.jitter_clip = num(key, value)?,
            "saab_points_per_cloud" => self.saab_points_per_cloud = optional(value, "all")?,
            _ => return Err(Error::Config(format!("unknown config key '{key}'"))),
        }
        Ok(())
    }

    /// Applies a `key=value` override.
    pub fn apply_override(&mut self, kv: &str) -> Result<()> {
        let (k, v) = kv
            .split_once('=')
            .ok_or_else(|| Error::Config(format!("override '{kv}' is not key=value")))?;
        self.set(k.trim(), v)
    }

    /// Key/value pairs in [`KEYS`] order.
    pub fn to_pairs(&self) -> Vec<(&'static str, String)> {
        let join = |names: Vec<&str>| names.join(",");
        KEYS.iter()
            .map(|&k| {
                let v = match k {
                    "k_neighbors" => self.k_neighbors.to_string(),
                    "theta1_deg" => self.theta1_deg.to_string(),
                    "theta2_deg" => self.theta2_deg.to_string(),
                    "delta" => self.delta.to_string(),
                    "aggregators" => join(self.aggregators.iter().map(|a| a.name()).collect()),
                    "regions" => join(self.regions.iter().map(|g| g.name()).collect()),
                    "num_points" => self.num_points.to_string(),
                    "dft_bins" => self.dft_bins.to_string(),
                    "n_features" => self.n_features.map_or("auto".into(), |n| n.to_string()),
                    "ridge" => self.ridge.to_string(),
                    "seed" => self.seed.to_string(),
                    "augment" => self.augment.to_string(),
                    "jitter_sigma" => self.jitter_sigma.to_string(),
                    "jitter_clip" => self.jitter_clip.to_string(),
                    "saab_points_per_cloud" => self
                        .saab_points_per_cloud
                        .map_or("all".into(), |n| n.to_string()),
                    _ => unreachable!(),
                };
                (k, v)
            })
            .collect()
    }

    /// Parses the flat `key = value` format. `#` starts a comment line.
    /// Keys not mentioned keep the values already in `self`.
    pub fn merge_text(&mut self, text: &str) -> Result<()> {
        for (i, raw) in text.lines().enumerate() {
            let line = raw.trim();
            if line.is_empty() || line.starts_with('#') {
                continue;
            }
            let (k, v) = line
                .split_once('=')
                .ok_or_else(|| Error::Config(format!("line {}: expected 'key = value'", i + 1)))?;
            self.set(k.trim(), v)
                .map_err(|e| Error::Config(format!("line {}: {e}", i + 1)))?;
        }
        Ok(())
    }

    pub fn from_text(text: &str) -> Result<Self> {
        let mut c = Self::default();
        c.merge_text(text)?;
        Ok(c)
    }

    pub fn to_text(&self) -> String {
        let mut out = String::new();
        for (k, v) in self.to_pairs() {
            let _ = writeln!(out, "{k} = {v}");
        }
        out
    }
}
