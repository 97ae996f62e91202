//! Monthly labeled instances: observation scores, percentile labeling, and
//! the 85-dimensional feature vector (month, height, 83 land-use fractions).

mod instances_csv;
mod landuse;
mod scores;

use std::collections::BTreeMap;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::geo::LonLat;
use crate::ingest::{ElevationGrid, IngestError, LandUseMap, StationObservation, CATEGORY_COUNT};

pub use instances_csv::{read_instances, read_instances_from, write_instances, INSTANCE_FIXED_COLUMNS};
pub use landuse::{landuse_fractions, DiskSampling};
pub use scores::{combine_observations, label_instances, nearest_rank, LabeledScore};

/// month + height + land use
pub const FEATURE_DIM: usize = 2 + CATEGORY_COUNT;
pub const MONTH_INDEX: usize = 0;
pub const HEIGHT_INDEX: usize = 1;
pub const LANDUSE_OFFSET: usize = 2;

#[derive(Debug, thiserror::Error)]
pub enum FeatureError {
    #[error("no observations to combine")]
    Empty,
    #[error("percentile must lie strictly between 0 and 1, got {0}")]
    InvalidPercentile(f64),
    #[error("sampling radius must be positive, got {0}")]
    InvalidRadius(f64),
    #[error("location ({lon}, {lat}) lies outside the elevation grid")]
    OutsideExtent { lon: f64, lat: f64 },
    #[error("elevation grid has no data at ({lon}, {lat})")]
    NoData { lon: f64, lat: f64 },
    #[error("feature vector must have {FEATURE_DIM} entries, got {0}")]
    Dimension(usize),
    #[error("land-use fraction {index} = {value} outside [0, 1]")]
    Fraction { index: usize, value: f64 },
    #[error("instance file: {0}")]
    Format(String),
    #[error(transparent)]
    Ingest(#[from] IngestError),
}

/// `[month, height_m, landuse_1 .. landuse_83]`.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(transparent)]
pub struct FeatureVector(Vec<f64>);

impl FeatureVector {
    pub fn new(month: f64, height_m: f64, landuse: &[f64]) -> Result<Self, FeatureError> {
        if landuse.len() != CATEGORY_COUNT {
            return Err(FeatureError::Dimension(landuse.len() + 2));
        }
        let mut v = Vec::with_capacity(FEATURE_DIM);
        v.push(month);
        v.push(height_m);
        v.extend_from_slice(landuse);
        Self::from_vec(v)
    }

    pub fn from_vec(values: Vec<f64>) -> Result<Self, FeatureError> {
        if values.len() != FEATURE_DIM {
            return Err(FeatureError::Dimension(values.len()));
        }
        for (i, &f) in values[LANDUSE_OFFSET..].iter().enumerate() {
            if !(0.0..=1.0).contains(&f) {
                return Err(FeatureError::Fraction { index: i, value: f });
            }
        }
        Ok(Self(values))
    }

    pub fn month(&self) -> f64 {
        self.0[MONTH_INDEX]
    }

    pub fn height_m(&self) -> f64 {
        self.0[HEIGHT_INDEX]
    }

    pub fn landuse(&self) -> &[f64] {
        &self.0[LANDUSE_OFFSET..]
    }

    pub fn as_slice(&self) -> &[f64] {
        &self.0
    }

    /// Same vector with the month component replaced.
    pub fn with_month(&self, month: f64) -> Self {
        let mut v = self.0.clone();
        v[MONTH_INDEX] = month;
        Self(v)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, Serialize, Deserialize)]
pub enum Label {
    /// Severely infested.
    Positive,
    /// Weakly or not infested.
    Negative,
}

impl Label {
    pub fn from_positive(positive: bool) -> Self {
        if positive {
            Label::Positive
        } else {
            Label::Negative
        }
    }

    pub fn is_positive(self) -> bool {
        self == Label::Positive
    }
}

/// Instance key: observations are aggregated per station, year and month.
#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct StationMonth {
    pub station_id: String,
    pub year: i32,
    pub month: u32,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LabeledInstance {
    pub key: StationMonth,
    pub features: FeatureVector,
    pub score: f64,
    pub label: Label,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct LabelingSummary {
    pub percentile: f64,
    pub threshold_value: f64,
    pub n_total: usize,
    pub n_positive: usize,
    pub n_negative: usize,
}

/// Height of the raster cell containing `location` (no interpolation).
pub fn height_at(location: LonLat, grid: &ElevationGrid) -> Result<f64, FeatureError> {
    let (row, col) = grid
        .cell_of(location)
        .ok_or(FeatureError::OutsideExtent { lon: location.lon, lat: location.lat })?;
    let v = grid.value(row, col);
    if grid.is_nodata(v) {
        return Err(FeatureError::NoData { lon: location.lon, lat: location.lat });
    }
    Ok(v)
}

/// Month-invariant part of a feature vector for a location.
pub fn environment_at(
    location: LonLat,
    landuse: &LandUseMap,
    elevation: &ElevationGrid,
    sampling: &DiskSampling,
) -> Result<(f64, Vec<f64>), FeatureError> {
    let height = height_at(location, elevation)?;
    let fractions = landuse_fractions(location, sampling, landuse)?;
    Ok((height, fractions))
}

/// Full pipeline from raw observations to labeled monthly instances.
///
/// Each station is located at its first record. Instances are ordered by
/// `(station_id, year, month)`.
pub fn build_instances(
    observations: &[StationObservation],
    landuse: &LandUseMap,
    elevation: &ElevationGrid,
    percentile: f64,
    sampling: &DiskSampling,
) -> Result<(Vec<LabeledInstance>, LabelingSummary), FeatureError> {
    let scores = combine_observations(observations)?;
    let (labeled, summary) = label_instances(&scores, percentile)?;

    let mut stations: BTreeMap<&str, LonLat> = BTreeMap::new();
    for o in observations {
        stations.entry(o.station_id.as_str()).or_insert(o.location);
    }
    let env: BTreeMap<&str, (f64, Vec<f64>)> = stations
        .par_iter()
        .map(|(id, loc)| environment_at(*loc, landuse, elevation, sampling).map(|e| (*id, e)))
        .collect::<Result<_, _>>()?;

    let instances = labeled
        .into_iter()
        .map(|s| {
            let (height, fractions) = &env[s.key.station_id.as_str()];
            let features = FeatureVector::new(s.key.month as f64, *height, fractions)?;
            Ok(LabeledInstance { key: s.key, features, score: s.score, label: s.label })
        })
        .collect::<Result<Vec<_>, FeatureError>>()?;
    Ok((instances, summary))
}
