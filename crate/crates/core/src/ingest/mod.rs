//! Readers and writers for the four input families (station observations,
//! land use, elevation raster, vineyard areas) plus a seeded synthetic
//! generator that produces all of them.

mod areas;
mod geojson;
mod elevation;
mod landuse;
mod observations;
pub mod synth;

use std::path::{Path, PathBuf};

pub use areas::{parse_areas, parse_areas_from, write_areas, AreaPolygon};
pub use elevation::{parse_elevation, parse_elevation_from, write_elevation, ElevationGrid};
pub use landuse::{
    parse_landuse, parse_landuse_from, write_landuse, CategoryManifest, LandUseMap, LandUsePolygon,
    CATEGORY_COUNT, DEFAULT_CATEGORIES,
};
pub use observations::{
    parse_observations, parse_observations_from, write_observations, StationObservation, OBSERVATION_HEADER,
};
pub use synth::{generate_synthetic, SynthConfig, SyntheticData};

#[derive(Debug, thiserror::Error)]
pub enum IngestError {
    #[error("file not found: {0}")]
    MissingFile(PathBuf),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: PathBuf,
        #[source]
        source: std::io::Error,
    },
    #[error("malformed header: expected `{expected}`, found `{found}`")]
    Header { expected: String, found: String },
    #[error("row {row}, column `{column}`: invalid value `{value}` ({reason})")]
    Field { row: usize, column: String, value: String, reason: String },
    #[error("malformed csv: {0}")]
    Csv(#[from] csv::Error),
    #[error("malformed GeoJSON: {0}")]
    GeoJson(String),
    #[error("feature {feature}: unknown land-use category `{code}`")]
    UnknownCategory { feature: usize, code: String },
    #[error("feature {feature}: polygon ring is not closed or has fewer than 4 vertices")]
    UnclosedRing { feature: usize },
    #[error("category manifest: {0}")]
    Manifest(String),
    #[error("elevation grid dimension mismatch: {0}")]
    Dimension(String),
    #[error("elevation grid line {line}: non-numeric value `{token}`")]
    NonNumeric { line: usize, token: String },
    #[error("invalid synthetic config: {0}")]
    InvalidConfig(String),
}

pub(crate) fn open(path: &Path) -> Result<std::fs::File, IngestError> {
    std::fs::File::open(path).map_err(|e| {
        if e.kind() == std::io::ErrorKind::NotFound {
            IngestError::MissingFile(path.to_path_buf())
        } else {
            IngestError::Io { path: path.to_path_buf(), source: e }
        }
    })
}

pub(crate) fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> IngestError + '_ {
    move |source| IngestError::Io { path: path.to_path_buf(), source }
}
