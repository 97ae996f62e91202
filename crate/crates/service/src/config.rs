//! `key = value` configuration file.
//!
//! Blank lines and lines starting with `#` are ignored. Unknown keys are
//! errors so typos do not pass silently.

use std::path::{Path, PathBuf};

use vinewatch_core::aggregate::SizeRange;
use vinewatch_core::features::DiskSampling;
use vinewatch_core::geo::BoundingBox;
use vinewatch_core::ingest::{CategoryManifest, IngestError, SynthConfig};
use vinewatch_core::learn::{ForestParams, LearnConfig};

pub const LISTEN_ENV: &str = "VINEWATCH_LISTEN";

#[derive(Debug, thiserror::Error)]
pub enum ConfigError {
    #[error("config line {line}: {message}")]
    Line { line: usize, message: String },
    #[error("config: {0}")]
    Invalid(String),
    #[error("cannot read config {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error(transparent)]
    Manifest(#[from] IngestError),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum SynthPreset {
    Default,
    Small,
}

#[derive(Debug, Clone, PartialEq)]
pub struct ServiceConfig {
    /// Observation region and default query window.
    pub region: BoundingBox,
    pub min_cell_size_m: f64,
    pub max_cell_size_m: f64,
    pub default_cell_size_m: f64,
    pub min_radius_px: f64,
    pub max_radius_px: f64,
    pub default_radius_px: f64,
    /// Category manifest; built-in list when absent.
    pub manifest: Option<PathBuf>,
    pub listen: String,
    pub percentile: f64,
    pub folds: usize,
    pub landuse_radius_m: f64,
    pub sampling_divisions: u32,
    pub forest_trees: usize,
    pub synth_preset: SynthPreset,
}

impl Default for ServiceConfig {
    fn default() -> Self {
        Self {
            region: SynthConfig::default().region,
            min_cell_size_m: 500.0,
            max_cell_size_m: 200_000.0,
            default_cell_size_m: 10_000.0,
            min_radius_px: 16.0,
            max_radius_px: 128.0,
            default_radius_px: 32.0,
            manifest: None,
            listen: "127.0.0.1:8080".into(),
            percentile: 0.8,
            folds: 10,
            landuse_radius_m: 5_000.0,
            sampling_divisions: 64,
            forest_trees: 100,
            synth_preset: SynthPreset::Default,
        }
    }
}

impl ServiceConfig {
    pub fn parse(text: &str) -> Result<Self, ConfigError> {
        let mut c = ServiceConfig::default();
        for (n, raw) in text.lines().enumerate() {
            let line = n + 1;
            let t = raw.split('#').next().unwrap_or("").trim();
            if t.is_empty() {
                continue;
            }
            let err = |message: String| ConfigError::Line { line, message };
            let (key, value) = t.split_once('=').ok_or_else(|| err("expected `key = value`".into()))?;
            let (key, value) = (key.trim(), value.trim());
            let num = || value.parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| err(format!("`{key}` needs a number, got `{value}`")));
            let int = || value.parse::<u64>().map_err(|_| err(format!("`{key}` needs a non-negative integer, got `{value}`")));
            match key {
                "region" => c.region = BoundingBox::parse(value).ok_or_else(|| err("region must be min_lon,min_lat,max_lon,max_lat".into()))?,
                "min_cell_size_m" => c.min_cell_size_m = num()?,
                "max_cell_size_m" => c.max_cell_size_m = num()?,
                "default_cell_size_m" => c.default_cell_size_m = num()?,
                "min_radius_px" => c.min_radius_px = num()?,
                "max_radius_px" => c.max_radius_px = num()?,
                "default_radius_px" => c.default_radius_px = num()?,
                "manifest" => c.manifest = Some(PathBuf::from(value)),
                "listen" => c.listen = value.to_string(),
                "percentile" => c.percentile = num()?,
                "folds" => c.folds = int()? as usize,
                "landuse_radius_m" => c.landuse_radius_m = num()?,
                "sampling_divisions" => c.sampling_divisions = int()? as u32,
                "forest_trees" => c.forest_trees = int()? as usize,
                "synth_preset" => {
                    c.synth_preset = match value {
                        "default" => SynthPreset::Default,
                        "small" => SynthPreset::Small,
                        _ => return Err(err(format!("synth_preset must be `default` or `small`, got `{value}`"))),
                    }
                }
                _ => return Err(err(format!("unknown key `{key}`"))),
            }
        }
        c.validate()?;
        Ok(c)
    }

    pub fn load(path: &Path) -> Result<Self, ConfigError> {
        let text = std::fs::read_to_string(path).map_err(|source| ConfigError::Io { path: path.to_path_buf(), source })?;
        let mut c = Self::parse(&text)?;
        // relative manifest paths are taken from the config's directory
        if let (Some(m), Some(dir)) = (&c.manifest, path.parent()) {
            if m.is_relative() {
                c.manifest = Some(dir.join(m));
            }
        }
        Ok(c)
    }

    /// `path` if given, otherwise defaults.
    pub fn load_or_default(path: Option<&Path>) -> Result<Self, ConfigError> {
        path.map_or_else(|| Ok(Self::default()), Self::load)
    }

    pub fn validate(&self) -> Result<(), ConfigError> {
        let bad = |m: &str| Err(ConfigError::Invalid(m.to_string()));
        if !self.region.is_valid() || self.region.min_lon >= self.region.max_lon || self.region.min_lat >= self.region.max_lat {
            return bad("region is empty or inverted");
        }
        if !(self.min_cell_size_m > 0.0 && self.min_cell_size_m <= self.max_cell_size_m) {
            return bad("cell size range must satisfy 0 < min_cell_size_m <= max_cell_size_m");
        }
        if !(self.min_cell_size_m..=self.max_cell_size_m).contains(&self.default_cell_size_m) {
            return bad("default_cell_size_m outside the cell size range");
        }
        if !(self.min_radius_px >= 16.0 && self.min_radius_px <= self.max_radius_px) {
            return bad("radius range must satisfy 16 <= min_radius_px <= max_radius_px");
        }
        if !(self.min_radius_px..=self.max_radius_px).contains(&self.default_radius_px) {
            return bad("default_radius_px outside the radius range");
        }
        if !(self.percentile > 0.0 && self.percentile < 1.0) {
            return bad("percentile must lie in (0, 1)");
        }
        if self.folds < 2 {
            return bad("folds must be at least 2");
        }
        if !(self.landuse_radius_m > 0.0) || self.sampling_divisions == 0 {
            return bad("land-use sampling needs a positive radius and divisions");
        }
        if self.forest_trees == 0 {
            return bad("forest_trees must be positive");
        }
        Ok(())
    }

    pub fn size_range(&self) -> SizeRange {
        SizeRange { min_m: self.min_cell_size_m, max_m: self.max_cell_size_m }
    }

    pub fn sampling(&self) -> DiskSampling {
        DiskSampling { radius_m: self.landuse_radius_m, divisions: self.sampling_divisions }
    }

    pub fn learn_config(&self) -> LearnConfig {
        LearnConfig { forest: ForestParams { n_trees: self.forest_trees, ..ForestParams::default() }, ..LearnConfig::default() }
    }

    pub fn synth_config(&self) -> SynthConfig {
        let base = match self.synth_preset {
            SynthPreset::Default => SynthConfig::default(),
            SynthPreset::Small => SynthConfig::small(),
        };
        SynthConfig { sampling: self.sampling(), ..base }
    }

    pub fn category_manifest(&self) -> Result<CategoryManifest, ConfigError> {
        match &self.manifest {
            Some(p) => Ok(CategoryManifest::load(p)?),
            None => Ok(CategoryManifest::default()),
        }
    }
}
