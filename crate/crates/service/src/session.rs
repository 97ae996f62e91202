//! Read-only view over a loaded prediction catalog.
//!
//! Every endpoint and the `render` command go through [`ApiSession`], so a
//! cell's summary is computed once per cell size and shared from then on.

use std::collections::{BTreeMap, HashMap};
use std::sync::{Arc, Mutex};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};
use vinewatch_core::aggregate::{summarize_catalog, AggregateError, CellIndex, CellSummary, GridSpec};
use vinewatch_core::geo::{BoundingBox, LonLat};
use vinewatch_core::glyph::{render_glyph, GlyphError};
use vinewatch_core::ingest::CategoryManifest;
use vinewatch_core::predict::PredictionCatalog;

use crate::config::ServiceConfig;

pub const MAX_COMPARE_CELLS: usize = 4;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum SessionError {
    #[error(transparent)]
    CellSize(#[from] AggregateError),
    #[error("radius {value} px outside [{min}, {max}] px")]
    Radius { value: f64, min: f64, max: f64 },
    #[error("cell ({i}, {j}) has no vineyards at this cell size")]
    EmptyCell { i: i64, j: i64 },
    #[error("compare takes 1 to {MAX_COMPARE_CELLS} cells, got {0}")]
    CellCount(usize),
    #[error("{0}")]
    BadRequest(String),
    #[error(transparent)]
    Glyph(#[from] GlyphError),
}

impl SessionError {
    pub fn is_not_found(&self) -> bool {
        matches!(self, SessionError::EmptyCell { .. })
    }
}

/// All non-empty cells at one cell size.
#[derive(Debug)]
pub struct SummaryIndex {
    pub spec: GridSpec,
    pub summaries: Vec<CellSummary>,
    by_cell: BTreeMap<CellIndex, usize>,
}

impl SummaryIndex {
    fn build(spec: GridSpec, catalog: &PredictionCatalog) -> Self {
        let summaries = summarize_catalog(&spec, catalog);
        let by_cell = summaries.iter().enumerate().map(|(k, s)| (s.cell, k)).collect();
        Self { spec, summaries, by_cell }
    }

    pub fn get(&self, cell: CellIndex) -> Option<&CellSummary> {
        self.by_cell.get(&cell).map(|&k| &self.summaries[k])
    }

    pub fn in_bbox(&self, bbox: &BoundingBox) -> Vec<&CellSummary> {
        self.summaries.iter().filter(|s| self.spec.cell_intersects(s.cell, bbox)).collect()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridCell {
    pub cell_index: CellIndex,
    pub center: LonLat,
    pub bounds: BoundingBox,
    pub summary: CellSummary,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct GridResponse {
    pub cell_size_m: f64,
    pub cells: Vec<GridCell>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MonthRow {
    pub month: u32,
    pub endangered: u32,
    pub safe: u32,
    pub mean_certainty_endangered: Option<f64>,
    pub mean_certainty_safe: Option<f64>,
    pub stddev_certainty: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellDetail {
    pub cell_index: CellIndex,
    pub cell_size_m: f64,
    pub vineyard_count: u32,
    pub months: Vec<MonthRow>,
    pub member_area_ids: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct FeatureName {
    pub code: String,
    pub name: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub cell_index: CellIndex,
    pub vineyard_count: u32,
    /// Land-use fractions in manifest order, then height.
    pub values: Vec<f64>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Comparison {
    pub cell_size_m: f64,
    pub features: Vec<FeatureName>,
    pub profiles: Vec<Profile>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionInfo {
    pub model_fingerprint: String,
    pub catalog_fingerprint: String,
    pub n_areas: usize,
    pub n_predictions: usize,
    pub n_warnings: usize,
    pub region: BoundingBox,
    pub min_cell_size_m: f64,
    pub max_cell_size_m: f64,
    pub default_cell_size_m: f64,
    pub min_radius_px: f64,
    pub max_radius_px: f64,
    pub default_radius_px: f64,
}

pub struct ApiSession {
    catalog: Arc<PredictionCatalog>,
    manifest: Arc<CategoryManifest>,
    config: ServiceConfig,
    catalog_fingerprint: String,
    cache: Mutex<HashMap<u64, Arc<SummaryIndex>>>,
}

impl ApiSession {
    pub fn new(catalog: PredictionCatalog, manifest: CategoryManifest, config: ServiceConfig) -> Self {
        let catalog_fingerprint = catalog.fingerprint();
        Self {
            catalog: Arc::new(catalog),
            manifest: Arc::new(manifest),
            config,
            catalog_fingerprint,
            cache: Mutex::new(HashMap::new()),
        }
    }

    pub fn catalog(&self) -> &PredictionCatalog {
        &self.catalog
    }

    pub fn config(&self) -> &ServiceConfig {
        &self.config
    }

    /// Recomputed from the catalog on every call.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.catalog.fingerprint().as_bytes());
        h.update(self.manifest.to_text().as_bytes());
        hex::encode(h.finalize())
    }

    pub fn info(&self) -> SessionInfo {
        let c = &self.config;
        SessionInfo {
            model_fingerprint: self.catalog.model_fingerprint().to_string(),
            catalog_fingerprint: self.catalog_fingerprint.clone(),
            n_areas: self.catalog.n_areas(),
            n_predictions: self.catalog.len(),
            n_warnings: self.catalog.warnings().len(),
            region: c.region,
            min_cell_size_m: c.min_cell_size_m,
            max_cell_size_m: c.max_cell_size_m,
            default_cell_size_m: c.default_cell_size_m,
            min_radius_px: c.min_radius_px,
            max_radius_px: c.max_radius_px,
            default_radius_px: c.default_radius_px,
        }
    }

    /// Summaries at `cell_size_m`, computed on first use.
    pub fn index(&self, cell_size_m: f64) -> Result<Arc<SummaryIndex>, SessionError> {
        self.config.size_range().check(cell_size_m)?;
        let key = cell_size_m.to_bits();
        if let Some(hit) = self.cache.lock().expect("cache lock").get(&key) {
            return Ok(hit.clone());
        }
        let built = Arc::new(SummaryIndex::build(GridSpec::new(cell_size_m)?, &self.catalog));
        // first insert wins, so concurrent callers all see the same index
        Ok(self.cache.lock().expect("cache lock").entry(key).or_insert(built).clone())
    }

    pub fn grid(&self, cell_size_m: f64, bbox: Option<BoundingBox>) -> Result<GridResponse, SessionError> {
        let bbox = bbox.unwrap_or(self.config.region);
        if !bbox.is_valid() || bbox.min_lat < -90.0 || bbox.max_lat > 90.0 || bbox.min_lon < -180.0 || bbox.max_lon > 180.0 {
            return Err(SessionError::BadRequest("bbox must be min_lon,min_lat,max_lon,max_lat within lon/lat bounds".into()));
        }
        let index = self.index(cell_size_m)?;
        let cells = index
            .in_bbox(&bbox)
            .into_iter()
            .map(|s| GridCell {
                cell_index: s.cell,
                center: index.spec.cell_center(s.cell),
                bounds: index.spec.cell_bbox(s.cell),
                summary: s.clone(),
            })
            .collect();
        Ok(GridResponse { cell_size_m, cells })
    }

    pub fn summary(&self, cell_size_m: f64, cell: CellIndex) -> Result<CellSummary, SessionError> {
        self.index(cell_size_m)?.get(cell).cloned().ok_or(SessionError::EmptyCell { i: cell.i, j: cell.j })
    }

    pub fn cell(&self, cell_size_m: f64, cell: CellIndex) -> Result<CellDetail, SessionError> {
        let s = self.summary(cell_size_m, cell)?;
        let months = s
            .months
            .iter()
            .enumerate()
            .map(|(k, m)| MonthRow {
                month: k as u32 + 1,
                endangered: m.endangered,
                safe: m.safe,
                mean_certainty_endangered: m.mean_certainty_endangered,
                mean_certainty_safe: m.mean_certainty_safe,
                stddev_certainty: m.stddev_certainty,
            })
            .collect();
        Ok(CellDetail { cell_index: s.cell, cell_size_m: s.cell_size_m, vineyard_count: s.vineyard_count, months, member_area_ids: s.member_area_ids })
    }

    pub fn check_radius(&self, radius_px: f64) -> Result<(), SessionError> {
        let (min, max) = (self.config.min_radius_px, self.config.max_radius_px);
        if !(radius_px.is_finite() && (min..=max).contains(&radius_px)) {
            return Err(SessionError::Radius { value: radius_px, min, max });
        }
        Ok(())
    }

    pub fn glyph(&self, cell_size_m: f64, cell: CellIndex, radius_px: f64) -> Result<String, SessionError> {
        self.check_radius(radius_px)?;
        let index = self.index(cell_size_m)?;
        let s = index.get(cell).ok_or(SessionError::EmptyCell { i: cell.i, j: cell.j })?;
        Ok(render_glyph(s, radius_px)?)
    }

    /// Glyphs for every non-empty cell, in cell order.
    pub fn all_glyphs(&self, cell_size_m: f64, radius_px: f64) -> Result<Vec<(CellIndex, String)>, SessionError> {
        self.check_radius(radius_px)?;
        let index = self.index(cell_size_m)?;
        index.summaries.iter().map(|s| Ok((s.cell, render_glyph(s, radius_px)?))).collect()
    }

    pub fn feature_names(&self) -> Vec<FeatureName> {
        let mut out: Vec<FeatureName> = self
            .manifest
            .codes()
            .iter()
            .enumerate()
            .map(|(k, code)| FeatureName { code: code.clone(), name: self.manifest.display_name(k) })
            .collect();
        out.push(FeatureName { code: "height_m".into(), name: "Height above sea level (m)".into() });
        out
    }

    pub fn compare(&self, cell_size_m: f64, cells: &[CellIndex]) -> Result<Comparison, SessionError> {
        if cells.is_empty() || cells.len() > MAX_COMPARE_CELLS {
            return Err(SessionError::CellCount(cells.len()));
        }
        let index = self.index(cell_size_m)?;
        let n_features = self.manifest.codes().len() + 1;
        let profiles = cells
            .iter()
            .map(|&cell| {
                let s = index.get(cell).ok_or(SessionError::EmptyCell { i: cell.i, j: cell.j })?;
                let mut values = vec![0.0; n_features];
                for id in &s.member_area_ids {
                    let a = self.catalog.area(id).expect("summaries only name catalog areas");
                    for (v, f) in values.iter_mut().zip(a.landuse.iter().chain(std::iter::once(&a.height_m))) {
                        *v += f;
                    }
                }
                values.iter_mut().for_each(|v| *v /= s.vineyard_count as f64);
                Ok(Profile { cell_index: cell, vineyard_count: s.vineyard_count, values })
            })
            .collect::<Result<_, SessionError>>()?;
        Ok(Comparison { cell_size_m, features: self.feature_names(), profiles })
    }
}

/// Parse `i1,j1;i2,j2;...`.
pub fn parse_cells(text: &str) -> Result<Vec<CellIndex>, SessionError> {
    let bad = || SessionError::BadRequest(format!("cells must look like `i1,j1;i2,j2`, got `{text}`"));
    text.split(';')
        .map(|pair| {
            let (i, j) = pair.split_once(',').ok_or_else(bad)?;
            Ok(CellIndex::new(i.trim().parse().map_err(|_| bad())?, j.trim().parse().map_err(|_| bad())?))
        })
        .collect()
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn cell_list_parsing() {
        assert_eq!(parse_cells("1,2;-3,4").unwrap(), vec![CellIndex::new(1, 2), CellIndex::new(-3, 4)]);
        assert!(parse_cells("1;2").is_err());
        assert!(parse_cells("").is_err());
        assert!(parse_cells("a,b").is_err());
    }
}
