use std::io::{Read, Write};
use std::path::Path;

use serde_json::{json, Value};

use super::geojson::{collection, polygon_feature, read_polygons};
use super::{open, IngestError};
use crate::geo::{ring_is_closed, LonLat};

/// A vineyard (or any prediction target) polygon.
#[derive(Debug, Clone, PartialEq)]
pub struct AreaPolygon {
    pub area_id: String,
    pub ring: Vec<LonLat>,
    centroid: LonLat,
}

impl AreaPolygon {
    pub fn new(area_id: impl Into<String>, ring: Vec<LonLat>) -> Self {
        let centroid = vertex_mean(&ring);
        Self { area_id: area_id.into(), ring, centroid }
    }

    /// Arithmetic mean of the ring's distinct vertices (the closing
    /// duplicate is not counted twice).
    pub fn centroid(&self) -> LonLat {
        self.centroid
    }
}

fn vertex_mean(ring: &[LonLat]) -> LonLat {
    let pts = if ring_is_closed(ring) { &ring[..ring.len() - 1] } else { ring };
    if pts.is_empty() {
        return LonLat::new(f64::NAN, f64::NAN);
    }
    let n = pts.len() as f64;
    LonLat::new(pts.iter().map(|p| p.lon).sum::<f64>() / n, pts.iter().map(|p| p.lat).sum::<f64>() / n)
}

pub fn parse_areas(path: &Path) -> Result<Vec<AreaPolygon>, IngestError> {
    parse_areas_from(open(path)?)
}

pub fn parse_areas_from<R: Read>(reader: R) -> Result<Vec<AreaPolygon>, IngestError> {
    let doc: Value =
        serde_json::from_reader(std::io::BufReader::new(reader)).map_err(|e| IngestError::GeoJson(e.to_string()))?;
    let mut seen = std::collections::HashSet::new();
    read_polygons(&doc)?
        .into_iter()
        .enumerate()
        .map(|(i, f)| {
            let id = match f.properties.get("area_id") {
                Some(Value::String(s)) => s.clone(),
                Some(Value::Number(n)) => n.to_string(),
                _ => return Err(IngestError::GeoJson(format!("feature {i}: missing property `area_id`"))),
            };
            if !seen.insert(id.clone()) {
                return Err(IngestError::GeoJson(format!("feature {i}: duplicate area_id `{id}`")));
            }
            Ok(AreaPolygon::new(id, f.ring))
        })
        .collect()
}

pub fn write_areas<W: Write>(writer: W, areas: &[AreaPolygon]) -> Result<(), IngestError> {
    let features = areas.iter().map(|a| polygon_feature(&a.ring, json!({ "area_id": a.area_id }))).collect();
    serde_json::to_writer(writer, &collection(features)).map_err(|e| IngestError::GeoJson(e.to_string()))
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn centroid_is_vertex_mean_without_closing_duplicate() {
        let ring = vec![
            LonLat::new(0.0, 0.0),
            LonLat::new(4.0, 0.0),
            LonLat::new(4.0, 2.0),
            LonLat::new(0.0, 2.0),
            LonLat::new(0.0, 0.0),
        ];
        assert_eq!(AreaPolygon::new("a", ring).centroid(), LonLat::new(2.0, 1.0));
    }

    #[test]
    fn parse_and_write() {
        let text = r#"{"type":"FeatureCollection","features":[
            {"type":"Feature","properties":{"area_id":"V1"},"geometry":{"type":"Polygon","coordinates":[[[8,48],[8.01,48],[8.01,48.01],[8,48.01],[8,48]]]}},
            {"type":"Feature","properties":{"area_id":7},"geometry":{"type":"Polygon","coordinates":[[[9,48],[9.01,48],[9.01,48.01],[9,48]]]}}
        ]}"#;
        let areas = parse_areas_from(text.as_bytes()).unwrap();
        assert_eq!(areas.len(), 2);
        assert_eq!(areas[1].area_id, "7");
        let mut buf = Vec::new();
        write_areas(&mut buf, &areas).unwrap();
        assert_eq!(parse_areas_from(buf.as_slice()).unwrap(), areas);
    }

    #[test]
    fn duplicate_ids_rejected() {
        let f = r#"{"type":"Feature","properties":{"area_id":"V1"},"geometry":{"type":"Polygon","coordinates":[[[8,48],[8.01,48],[8.01,48.01],[8,48]]]}}"#;
        let text = format!(r#"{{"type":"FeatureCollection","features":[{f},{f}]}}"#);
        assert!(parse_areas_from(text.as_bytes()).is_err());
    }
}
