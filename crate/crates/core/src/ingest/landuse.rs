use std::collections::HashMap;
use std::io::{Read, Write};
use std::path::Path;
use std::sync::Arc;

use serde_json::json;

use super::geojson::{collection, polygon_feature, read_polygons};
use super::{io_err, open, IngestError};
use crate::geo::{ring_contains, BoundingBox, LonLat};

/// Number of land-use group/subgroup combinations in a manifest.
pub const CATEGORY_COUNT: usize = 83;

/// Built-in manifest: code and display name, in feature order.
pub const DEFAULT_CATEGORIES: [(&str, &str); CATEGORY_COUNT] = [
    ("SETTLEMENT_RESIDENTIAL", "Residential area"),
    ("SETTLEMENT_MIXED", "Mixed-use area"),
    ("SETTLEMENT_SPECIAL_FUNCTION", "Special-function area"),
    ("SETTLEMENT_VILLAGE_CORE", "Village core"),
    ("SETTLEMENT_HISTORIC", "Historic site"),
    ("SETTLEMENT_HOSPITAL", "Hospital grounds"),
    ("SETTLEMENT_SCHOOL", "School grounds"),
    ("SETTLEMENT_ADMINISTRATION", "Administration"),
    ("SETTLEMENT_CHURCH", "Church grounds"),
    ("SETTLEMENT_FARMSTEAD", "Farmstead"),
    ("INDUSTRY_COMMERCIAL", "Commercial area"),
    ("INDUSTRY_PLANT", "Industrial plant"),
    ("INDUSTRY_POWER_PLANT", "Power plant"),
    ("INDUSTRY_WASTE_TREATMENT", "Waste treatment"),
    ("INDUSTRY_SEWAGE", "Sewage works"),
    ("INDUSTRY_LANDFILL", "Landfill"),
    ("INDUSTRY_MINING", "Mining"),
    ("INDUSTRY_QUARRY", "Quarry"),
    ("INDUSTRY_GRAVEL_PIT", "Gravel pit"),
    ("INDUSTRY_STORAGE", "Storage yard"),
    ("INDUSTRY_SOLAR_PARK", "Solar park"),
    ("INDUSTRY_WIND_FARM", "Wind farm"),
    ("RECREATION_SPORTS", "Sports ground"),
    ("RECREATION_PARK", "Park"),
    ("RECREATION_CAMPING", "Camping ground"),
    ("RECREATION_ALLOTMENT", "Allotment gardens"),
    ("RECREATION_GOLF", "Golf course"),
    ("RECREATION_ZOO", "Zoo"),
    ("RECREATION_OPEN_AIR_POOL", "Open-air pool"),
    ("CEMETERY", "Cemetery"),
    ("MILITARY_TRAINING_AREA", "Military training area"),
    ("TRAFFIC_ROAD", "Road"),
    ("TRAFFIC_MOTORWAY", "Motorway"),
    ("TRAFFIC_PATH", "Path"),
    ("TRAFFIC_SQUARE", "Square"),
    ("TRAFFIC_PARKING", "Parking"),
    ("TRAFFIC_RAIL", "Railway"),
    ("TRAFFIC_RAIL_YARD", "Rail yard"),
    ("TRAFFIC_AIRFIELD", "Airfield"),
    ("TRAFFIC_HARBOUR", "Harbour"),
    ("TRAFFIC_BRIDGE", "Bridge"),
    ("AGRI_ARABLE", "Arable land"),
    ("AGRI_ARABLE_FODDER", "Fodder crops"),
    ("AGRI_GRASSLAND", "Grassland"),
    ("AGRI_GRASSLAND_PASTURE", "Pasture"),
    ("AGRI_HORTICULTURE", "Horticulture"),
    ("AGRI_GREENHOUSE", "Greenhouses"),
    ("AGRI_NURSERY", "Plant nursery"),
    ("AGRI_TREE_NURSERY", "Tree nursery"),
    ("AGRI_VINEYARD", "Vineyard"),
    ("AGRI_HOP_GARDEN", "Hop garden"),
    ("AGRI_ORCHARD", "Orchard"),
    ("AGRI_ORCHARD_MEADOW", "Orchard meadow"),
    ("AGRI_BERRY_CULTURE", "Berry culture"),
    ("AGRI_FALLOW", "Fallow land"),
    ("AGRI_CHRISTMAS_TREE", "Christmas tree plantation"),
    ("FOREST_DECIDUOUS", "Deciduous forest"),
    ("FOREST_CONIFEROUS", "Coniferous forest"),
    ("FOREST_MIXED", "Mixed forest"),
    ("FOREST_FLOODPLAIN", "Floodplain forest"),
    ("FOREST_PLANTATION", "Forest plantation"),
    ("FOREST_COPPICE", "Coppice"),
    ("FOREST_CLEARING", "Forest clearing"),
    ("WOODY_SHRUBLAND", "Shrubland"),
    ("WOODY_HEDGEROW", "Hedgerow"),
    ("WOODY_GROVE", "Grove"),
    ("HEATH", "Heath"),
    ("MOOR", "Moor"),
    ("SWAMP", "Swamp"),
    ("WETLAND_REED", "Reed bed"),
    ("UNLAND_ROCK", "Rock"),
    ("UNLAND_SCREE", "Scree"),
    ("UNLAND_SAND", "Sand"),
    ("UNLAND_BARE", "Bare ground"),
    ("WATER_RIVER", "River"),
    ("WATER_STREAM", "Stream"),
    ("WATER_CANAL", "Canal"),
    ("WATER_LAKE", "Lake"),
    ("WATER_RESERVOIR", "Reservoir"),
    ("WATER_POND", "Pond"),
    ("WATER_HARBOUR_BASIN", "Harbour basin"),
    ("WATER_FLOODPLAIN", "Floodplain"),
    ("WATER_SPRING", "Spring"),
];

/// Ordered list of exactly [`CATEGORY_COUNT`] land-use codes. The order
/// defines the land-use block of every feature vector.
#[derive(Debug, Clone, PartialEq)]
pub struct CategoryManifest {
    codes: Vec<String>,
    index: HashMap<String, usize>,
}

impl Default for CategoryManifest {
    fn default() -> Self {
        Self::from_codes(DEFAULT_CATEGORIES.iter().map(|(c, _)| c.to_string()).collect()).expect("built-in manifest is valid")
    }
}

impl CategoryManifest {
    pub fn from_codes(codes: Vec<String>) -> Result<Self, IngestError> {
        if codes.len() != CATEGORY_COUNT {
            return Err(IngestError::Manifest(format!(
                "expected exactly {CATEGORY_COUNT} category codes, found {}",
                codes.len()
            )));
        }
        let mut index = HashMap::with_capacity(codes.len());
        for (i, code) in codes.iter().enumerate() {
            if code.is_empty() || code.chars().any(char::is_whitespace) {
                return Err(IngestError::Manifest(format!("line {}: invalid code `{code}`", i + 1)));
            }
            if index.insert(code.clone(), i).is_some() {
                return Err(IngestError::Manifest(format!("duplicate code `{code}`")));
            }
        }
        Ok(Self { codes, index })
    }

    /// One code per line; blank lines are ignored.
    pub fn parse(text: &str) -> Result<Self, IngestError> {
        Self::from_codes(text.lines().map(str::trim).filter(|l| !l.is_empty()).map(String::from).collect())
    }

    pub fn load(path: &Path) -> Result<Self, IngestError> {
        let mut text = String::new();
        open(path)?.read_to_string(&mut text).map_err(io_err(path))?;
        Self::parse(&text)
    }

    pub fn to_text(&self) -> String {
        let mut s = self.codes.join("\n");
        s.push('\n');
        s
    }

    pub fn codes(&self) -> &[String] {
        &self.codes
    }

    pub fn index_of(&self, code: &str) -> Option<usize> {
        self.index.get(code).copied()
    }

    /// Human-readable label for the UI; falls back to the code itself.
    pub fn display_name(&self, idx: usize) -> String {
        let code = &self.codes[idx];
        DEFAULT_CATEGORIES
            .iter()
            .find(|(c, _)| c == code)
            .map(|(_, name)| name.to_string())
            .unwrap_or_else(|| code.clone())
    }

    /// Indices of forest categories (codes starting with `FOREST_`).
    pub fn woodland_indices(&self) -> Vec<usize> {
        self.codes.iter().enumerate().filter(|(_, c)| c.starts_with("FOREST_")).map(|(i, _)| i).collect()
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandUsePolygon {
    pub ring: Vec<LonLat>,
    /// Index into the manifest.
    pub category: usize,
}

/// Land-use polygons in file order plus the manifest they were validated against.
#[derive(Debug, Clone)]
pub struct LandUseMap {
    polygons: Vec<LandUsePolygon>,
    bounds: Vec<BoundingBox>,
    manifest: Arc<CategoryManifest>,
}

impl PartialEq for LandUseMap {
    fn eq(&self, other: &Self) -> bool {
        self.polygons == other.polygons && self.manifest == other.manifest
    }
}

impl LandUseMap {
    pub fn new(polygons: Vec<LandUsePolygon>, manifest: Arc<CategoryManifest>) -> Result<Self, IngestError> {
        for (i, p) in polygons.iter().enumerate() {
            if p.category >= manifest.codes().len() {
                return Err(IngestError::UnknownCategory { feature: i, code: p.category.to_string() });
            }
            if p.ring.len() < 4 || !crate::geo::ring_is_closed(&p.ring) {
                return Err(IngestError::UnclosedRing { feature: i });
            }
        }
        let bounds = polygons.iter().map(|p| BoundingBox::of_points(&p.ring).expect("ring has vertices")).collect();
        Ok(Self { polygons, bounds, manifest })
    }

    pub fn empty(manifest: Arc<CategoryManifest>) -> Self {
        Self { polygons: Vec::new(), bounds: Vec::new(), manifest }
    }

    pub fn polygons(&self) -> &[LandUsePolygon] {
        &self.polygons
    }

    pub fn manifest(&self) -> &Arc<CategoryManifest> {
        &self.manifest
    }

    /// Indices of polygons whose bounding box meets `area`, in file order.
    pub fn candidates(&self, area: &BoundingBox) -> Vec<usize> {
        self.bounds.iter().enumerate().filter(|(_, b)| b.intersects(area)).map(|(i, _)| i).collect()
    }

    /// Category of the first polygon (file order) among `candidates` containing `p`.
    pub fn category_at(&self, candidates: &[usize], p: LonLat) -> Option<usize> {
        candidates
            .iter()
            .find(|&&i| self.bounds[i].contains(p) && ring_contains(&self.polygons[i].ring, p))
            .map(|&i| self.polygons[i].category)
    }
}

pub fn parse_landuse(path: &Path, manifest: Arc<CategoryManifest>) -> Result<LandUseMap, IngestError> {
    parse_landuse_from(open(path)?, manifest)
}

pub fn parse_landuse_from<R: Read>(reader: R, manifest: Arc<CategoryManifest>) -> Result<LandUseMap, IngestError> {
    let doc: serde_json::Value =
        serde_json::from_reader(std::io::BufReader::new(reader)).map_err(|e| IngestError::GeoJson(e.to_string()))?;
    let mut polygons = Vec::new();
    for (i, f) in read_polygons(&doc)?.into_iter().enumerate() {
        let code = f
            .properties
            .get("category")
            .and_then(|v| v.as_str())
            .ok_or_else(|| IngestError::GeoJson(format!("feature {i}: missing string property `category`")))?;
        let category = manifest
            .index_of(code)
            .ok_or_else(|| IngestError::UnknownCategory { feature: i, code: code.to_string() })?;
        polygons.push(LandUsePolygon { ring: f.ring, category });
    }
    LandUseMap::new(polygons, manifest)
}

pub fn write_landuse<W: Write>(writer: W, map: &LandUseMap) -> Result<(), IngestError> {
    let codes = map.manifest().codes();
    let features =
        map.polygons().iter().map(|p| polygon_feature(&p.ring, json!({ "category": codes[p.category] }))).collect();
    serde_json::to_writer(writer, &collection(features)).map_err(|e| IngestError::GeoJson(e.to_string()))
}
