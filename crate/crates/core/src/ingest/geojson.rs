//! Minimal GeoJSON FeatureCollection-of-Polygons reading and writing.

use serde_json::{json, Map, Value};

use super::IngestError;
use crate::geo::{ring_is_closed, LonLat};

pub(crate) struct PolygonFeature {
    pub properties: Map<String, Value>,
    pub ring: Vec<LonLat>,
}

pub(crate) fn read_polygons(doc: &Value) -> Result<Vec<PolygonFeature>, IngestError> {
    let err = |m: String| IngestError::GeoJson(m);
    if doc.get("type").and_then(Value::as_str) != Some("FeatureCollection") {
        return Err(err("top-level object must be a FeatureCollection".into()));
    }
    let features = doc.get("features").and_then(Value::as_array).ok_or_else(|| err("missing `features` array".into()))?;

    let mut out = Vec::with_capacity(features.len());
    for (i, f) in features.iter().enumerate() {
        let geom = f.get("geometry").ok_or_else(|| err(format!("feature {i}: missing geometry")))?;
        if geom.get("type").and_then(Value::as_str) != Some("Polygon") {
            return Err(err(format!("feature {i}: geometry must be a Polygon")));
        }
        let rings = geom.get("coordinates").and_then(Value::as_array).ok_or_else(|| err(format!("feature {i}: missing coordinates")))?;
        if rings.len() != 1 {
            return Err(err(format!("feature {i}: expected exactly one ring, found {}", rings.len())));
        }
        let ring = rings[0]
            .as_array()
            .ok_or_else(|| err(format!("feature {i}: ring is not an array")))?
            .iter()
            .map(|pos| match pos.as_array().map(Vec::as_slice) {
                Some([lon, lat, ..]) => match (lon.as_f64(), lat.as_f64()) {
                    (Some(lon), Some(lat)) => Ok(LonLat::new(lon, lat)),
                    _ => Err(err(format!("feature {i}: non-numeric position"))),
                },
                _ => Err(err(format!("feature {i}: malformed position"))),
            })
            .collect::<Result<Vec<_>, _>>()?;
        if ring.len() < 4 || !ring_is_closed(&ring) {
            return Err(IngestError::UnclosedRing { feature: i });
        }
        let properties = f.get("properties").and_then(Value::as_object).cloned().unwrap_or_default();
        out.push(PolygonFeature { properties, ring });
    }
    Ok(out)
}

pub(crate) fn polygon_feature(ring: &[LonLat], properties: Value) -> Value {
    let coords: Vec<Value> = ring.iter().map(|p| json!([p.lon, p.lat])).collect();
    json!({
        "type": "Feature",
        "properties": properties,
        "geometry": { "type": "Polygon", "coordinates": [coords] },
    })
}

pub(crate) fn collection(features: Vec<Value>) -> Value {
    json!({ "type": "FeatureCollection", "features": features })
}
