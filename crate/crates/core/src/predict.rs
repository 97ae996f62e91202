//! Per-area, per-month prediction catalog.

use std::collections::{BTreeMap, BTreeSet};
use std::io::Write;
use std::path::Path;

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::features::{height_at, landuse_fractions, DiskSampling, FeatureError, FeatureVector};
use crate::geo::LonLat;
use crate::ingest::{AreaPolygon, ElevationGrid, LandUseMap};
use crate::learn::{EnsembleModel, LearnError};

#[derive(Debug, thiserror::Error)]
pub enum PredictError {
    #[error("duplicate area id `{0}`")]
    DuplicateArea(String),
    #[error(transparent)]
    Feature(#[from] FeatureError),
    #[error(transparent)]
    Learn(#[from] LearnError),
    #[error("catalog file: {0}")]
    Format(String),
    #[error("inconsistent catalog: {0}")]
    Integrity(String),
    #[error("i/o error on {path}: {source}")]
    Io {
        path: std::path::PathBuf,
        #[source]
        source: std::io::Error,
    },
}

pub const CATALOG_FILE: &str = "catalog.csv";
pub const AREAS_FILE: &str = "areas.json";
pub const WARNINGS_FILE: &str = "warnings.txt";

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Prediction {
    pub area_id: String,
    pub month: u32,
    pub endangered: bool,
    /// Probability of the predicted class.
    pub certainty: f64,
}

/// Month-invariant inputs of one area.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AreaFeatures {
    pub area_id: String,
    pub centroid: LonLat,
    pub height_m: f64,
    pub landuse: Vec<f64>,
}

impl AreaFeatures {
    pub fn vector(&self, month: u32) -> FeatureVector {
        FeatureVector::new(month as f64, self.height_m, &self.landuse).expect("stored fractions are valid")
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CatalogWarning {
    pub area_id: String,
    pub reason: String,
}

/// Immutable predictions for every (area, month), plus the per-area
/// feature inputs and the areas that had to be skipped.
#[derive(Debug, Clone, PartialEq)]
pub struct PredictionCatalog {
    predictions: BTreeMap<(String, u32), Prediction>,
    areas: BTreeMap<String, AreaFeatures>,
    warnings: Vec<CatalogWarning>,
    model_fingerprint: String,
}

impl PredictionCatalog {
    /// Reassemble a catalog, checking that every area has exactly one
    /// prediction per month and nothing else.
    pub fn from_parts(
        predictions: Vec<Prediction>,
        areas: Vec<AreaFeatures>,
        warnings: Vec<CatalogWarning>,
        model_fingerprint: String,
    ) -> Result<Self, PredictError> {
        let bad = |m: String| Err(PredictError::Integrity(m));
        let mut store = BTreeMap::new();
        for a in areas {
            if a.landuse.len() != crate::ingest::CATEGORY_COUNT {
                return bad(format!("area `{}` has {} land-use fractions", a.area_id, a.landuse.len()));
            }
            if let Some(prev) = store.insert(a.area_id.clone(), a) {
                return Err(PredictError::DuplicateArea(prev.area_id));
            }
        }
        let mut map = BTreeMap::new();
        for p in predictions {
            if !store.contains_key(&p.area_id) {
                return bad(format!("prediction for unknown area `{}`", p.area_id));
            }
            if !(1..=12).contains(&p.month) || !(0.5..=1.0).contains(&p.certainty) {
                return bad(format!("area `{}`: month {} certainty {} out of range", p.area_id, p.month, p.certainty));
            }
            let key = (p.area_id.clone(), p.month);
            if map.insert(key, p).is_some() {
                return bad("duplicate (area, month) prediction".into());
            }
        }
        if map.len() != 12 * store.len() {
            return bad(format!("{} predictions for {} areas", map.len(), store.len()));
        }
        Ok(Self { predictions: map, areas: store, warnings, model_fingerprint })
    }

    pub fn get(&self, area_id: &str, month: u32) -> Option<&Prediction> {
        self.predictions.get(&(area_id.to_string(), month))
    }

    pub fn predictions(&self) -> impl Iterator<Item = &Prediction> {
        self.predictions.values()
    }

    pub fn len(&self) -> usize {
        self.predictions.len()
    }

    pub fn is_empty(&self) -> bool {
        self.predictions.is_empty()
    }

    pub fn area(&self, area_id: &str) -> Option<&AreaFeatures> {
        self.areas.get(area_id)
    }

    pub fn areas(&self) -> impl Iterator<Item = &AreaFeatures> {
        self.areas.values()
    }

    pub fn n_areas(&self) -> usize {
        self.areas.len()
    }

    pub fn warnings(&self) -> &[CatalogWarning] {
        &self.warnings
    }

    pub fn model_fingerprint(&self) -> &str {
        &self.model_fingerprint
    }

    pub fn write_csv<W: Write>(&self, w: W) -> Result<(), PredictError> {
        let mut w = csv::Writer::from_writer(w);
        let err = |e: csv::Error| PredictError::Format(e.to_string());
        w.write_record(["area_id", "month", "endangered", "certainty"]).map_err(err)?;
        for p in self.predictions.values() {
            w.write_record([
                p.area_id.as_str(),
                &p.month.to_string(),
                if p.endangered { "1" } else { "0" },
                &p.certainty.to_string(),
            ])
            .map_err(err)?;
        }
        w.flush().map_err(|e| PredictError::Format(e.to_string()))
    }

    pub fn to_csv_string(&self) -> String {
        let mut buf = Vec::new();
        self.write_csv(&mut buf).expect("writing to memory");
        String::from_utf8(buf).expect("csv is utf-8")
    }

    /// One line per skipped area.
    pub fn warnings_text(&self) -> String {
        self.warnings.iter().map(|w| format!("{}\t{}\n", w.area_id, w.reason)).collect()
    }

    /// Hex SHA-256 over the model fingerprint and the catalog CSV.
    pub fn fingerprint(&self) -> String {
        let mut h = Sha256::new();
        h.update(self.model_fingerprint.as_bytes());
        h.update(self.to_csv_string().as_bytes());
        hex::encode(h.finalize())
    }
}

#[derive(Serialize, Deserialize)]
struct AreaDocument {
    model_fingerprint: String,
    areas: Vec<AreaFeatures>,
    warnings: Vec<CatalogWarning>,
}

fn io_err(path: &Path) -> impl FnOnce(std::io::Error) -> PredictError + '_ {
    move |source| PredictError::Io { path: path.to_path_buf(), source }
}

/// Write catalog CSV, area features and the warnings manifest into `dir`.
pub fn save_catalog(dir: &Path, catalog: &PredictionCatalog) -> Result<(), PredictError> {
    std::fs::create_dir_all(dir).map_err(io_err(dir))?;
    let csv_path = dir.join(CATALOG_FILE);
    catalog.write_csv(std::fs::File::create(&csv_path).map_err(io_err(&csv_path))?)?;
    let doc = AreaDocument {
        model_fingerprint: catalog.model_fingerprint.clone(),
        areas: catalog.areas.values().cloned().collect(),
        warnings: catalog.warnings.clone(),
    };
    let json = serde_json::to_string(&doc).map_err(|e| PredictError::Format(e.to_string()))?;
    let areas_path = dir.join(AREAS_FILE);
    std::fs::write(&areas_path, json).map_err(io_err(&areas_path))?;
    let warn_path = dir.join(WARNINGS_FILE);
    std::fs::write(&warn_path, catalog.warnings_text()).map_err(io_err(&warn_path))
}

pub fn load_catalog(dir: &Path) -> Result<PredictionCatalog, PredictError> {
    let csv_path = dir.join(CATALOG_FILE);
    let predictions = read_predictions_csv(std::fs::File::open(&csv_path).map_err(io_err(&csv_path))?)?;
    let areas_path = dir.join(AREAS_FILE);
    let text = std::fs::read_to_string(&areas_path).map_err(io_err(&areas_path))?;
    let doc: AreaDocument = serde_json::from_str(&text).map_err(|e| PredictError::Format(format!("{}: {e}", areas_path.display())))?;
    PredictionCatalog::from_parts(predictions, doc.areas, doc.warnings, doc.model_fingerprint)
}

/// Read back a catalog CSV as a flat prediction list.
pub fn read_predictions_csv<R: std::io::Read>(r: R) -> Result<Vec<Prediction>, PredictError> {
    let mut rdr = csv::Reader::from_reader(r);
    let err = |m: String| PredictError::Format(m);
    let mut out = Vec::new();
    for (n, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| err(e.to_string()))?;
        let bad = || err(format!("row {}: malformed record", n + 1));
        if rec.len() != 4 {
            return Err(bad());
        }
        out.push(Prediction {
            area_id: rec[0].to_string(),
            month: rec[1].parse().map_err(|_| bad())?,
            endangered: match &rec[2] {
                "1" => true,
                "0" => false,
                _ => return Err(bad()),
            },
            certainty: rec[3].parse().map_err(|_| bad())?,
        });
    }
    Ok(out)
}

/// Predict every month for every area located at its polygon centroid.
/// Areas whose centroid has no elevation value are skipped with a warning.
pub fn build_catalog(
    model: &EnsembleModel,
    areas: &[AreaPolygon],
    landuse: &LandUseMap,
    elevation: &ElevationGrid,
    sampling: &DiskSampling,
) -> Result<PredictionCatalog, PredictError> {
    let mut seen = BTreeSet::new();
    for a in areas {
        if !seen.insert(a.area_id.as_str()) {
            return Err(PredictError::DuplicateArea(a.area_id.clone()));
        }
    }
    enum Outcome {
        Kept(AreaFeatures, Vec<Prediction>),
        Skipped(CatalogWarning),
    }
    let outcomes: Vec<Outcome> = areas
        .par_iter()
        .map(|a| {
            let c = a.centroid();
            let height = match height_at(c, elevation) {
                Ok(h) => h,
                Err(e @ (FeatureError::OutsideExtent { .. } | FeatureError::NoData { .. })) => {
                    return Ok(Outcome::Skipped(CatalogWarning { area_id: a.area_id.clone(), reason: e.to_string() }))
                }
                Err(e) => return Err(e.into()),
            };
            let feats =
                AreaFeatures { area_id: a.area_id.clone(), centroid: c, height_m: height, landuse: landuse_fractions(c, sampling, landuse)? };
            let preds = (1..=12)
                .map(|m| {
                    let p = model.predict(feats.vector(m).as_slice())?;
                    Ok(Prediction { area_id: a.area_id.clone(), month: m, endangered: p.positive, certainty: p.certainty() })
                })
                .collect::<Result<Vec<_>, PredictError>>()?;
            Ok(Outcome::Kept(feats, preds))
        })
        .collect::<Result<_, PredictError>>()?;

    let mut predictions = BTreeMap::new();
    let mut store = BTreeMap::new();
    let mut warnings = Vec::new();
    for o in outcomes {
        match o {
            Outcome::Kept(f, preds) => {
                for p in preds {
                    predictions.insert((p.area_id.clone(), p.month), p);
                }
                store.insert(f.area_id.clone(), f);
            }
            Outcome::Skipped(w) => warnings.push(w),
        }
    }
    Ok(PredictionCatalog { predictions, areas: store, warnings, model_fingerprint: model.fingerprint() })
}
