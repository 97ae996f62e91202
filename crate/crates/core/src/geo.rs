//! Small geographic helpers: WGS84 points, bounding boxes, ring tests and
//! the spherical Web-Mercator projection used by the aggregation grid.

use serde::{Deserialize, Serialize};

/// Mean Earth radius in meters, used for local metric offsets.
pub const EARTH_RADIUS_M: f64 = 6_371_008.8;

/// Sphere radius of the Web-Mercator (EPSG:3857) projection.
pub const MERCATOR_RADIUS_M: f64 = 6_378_137.0;

/// Latitude limit of the Web-Mercator projection.
pub const MERCATOR_MAX_LAT: f64 = 85.051_128_779_806_59;

/// A WGS84 position in degrees.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct LonLat {
    pub lon: f64,
    pub lat: f64,
}

impl LonLat {
    pub const fn new(lon: f64, lat: f64) -> Self {
        Self { lon, lat }
    }

    /// Shift this position by a metric offset (east, north) using a local
    /// equirectangular approximation around the point itself.
    pub fn offset_m(&self, east_m: f64, north_m: f64) -> LonLat {
        let (m_lon, m_lat) = meters_per_degree(self.lat);
        LonLat::new(self.lon + east_m / m_lon, self.lat + north_m / m_lat)
    }

    /// Project to Web-Mercator planar coordinates in meters.
    pub fn to_mercator(&self) -> (f64, f64) {
        let lat = self.lat.clamp(-MERCATOR_MAX_LAT, MERCATOR_MAX_LAT);
        let x = MERCATOR_RADIUS_M * self.lon.to_radians();
        let y = MERCATOR_RADIUS_M * lat.to_radians().sin().atanh();
        (x, y)
    }

    pub fn from_mercator(x: f64, y: f64) -> LonLat {
        let lon = (x / MERCATOR_RADIUS_M).to_degrees();
        let lat = (2.0 * (y / MERCATOR_RADIUS_M).exp().atan() - std::f64::consts::FRAC_PI_2).to_degrees();
        LonLat::new(lon, lat)
    }
}

/// Meters per degree of longitude and latitude at the given latitude.
pub fn meters_per_degree(lat: f64) -> (f64, f64) {
    let m_lat = EARTH_RADIUS_M * std::f64::consts::PI / 180.0;
    (m_lat * lat.to_radians().cos(), m_lat)
}

/// Axis-aligned lon/lat box, closed on all sides.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct BoundingBox {
    pub min_lon: f64,
    pub min_lat: f64,
    pub max_lon: f64,
    pub max_lat: f64,
}

impl BoundingBox {
    pub const fn new(min_lon: f64, min_lat: f64, max_lon: f64, max_lat: f64) -> Self {
        Self { min_lon, min_lat, max_lon, max_lat }
    }

    /// True when the box has finite, non-inverted extents.
    pub fn is_valid(&self) -> bool {
        [self.min_lon, self.min_lat, self.max_lon, self.max_lat].iter().all(|v| v.is_finite())
            && self.min_lon <= self.max_lon
            && self.min_lat <= self.max_lat
    }

    pub fn contains(&self, p: LonLat) -> bool {
        p.lon >= self.min_lon && p.lon <= self.max_lon && p.lat >= self.min_lat && p.lat <= self.max_lat
    }

    pub fn intersects(&self, other: &BoundingBox) -> bool {
        self.min_lon <= other.max_lon
            && other.min_lon <= self.max_lon
            && self.min_lat <= other.max_lat
            && other.min_lat <= self.max_lat
    }

    pub fn of_points(points: &[LonLat]) -> Option<BoundingBox> {
        let first = points.first()?;
        let mut b = BoundingBox::new(first.lon, first.lat, first.lon, first.lat);
        for p in &points[1..] {
            b.min_lon = b.min_lon.min(p.lon);
            b.min_lat = b.min_lat.min(p.lat);
            b.max_lon = b.max_lon.max(p.lon);
            b.max_lat = b.max_lat.max(p.lat);
        }
        Some(b)
    }

    pub fn center(&self) -> LonLat {
        LonLat::new((self.min_lon + self.max_lon) / 2.0, (self.min_lat + self.max_lat) / 2.0)
    }

    /// Parse `min_lon,min_lat,max_lon,max_lat`.
    pub fn parse(text: &str) -> Option<BoundingBox> {
        let parts: Vec<f64> = text.split(',').map(|s| s.trim().parse::<f64>()).collect::<Result<_, _>>().ok()?;
        match parts.as_slice() {
            [a, b, c, d] => Some(BoundingBox::new(*a, *b, *c, *d)),
            _ => None,
        }
    }
}

/// Even-odd point-in-polygon test. The ring may be open or closed.
pub fn ring_contains(ring: &[LonLat], p: LonLat) -> bool {
    let n = ring.len();
    if n < 3 {
        return false;
    }
    let mut inside = false;
    let mut j = n - 1;
    for i in 0..n {
        let (a, b) = (ring[i], ring[j]);
        if (a.lat > p.lat) != (b.lat > p.lat) {
            let x = (b.lon - a.lon) * (p.lat - a.lat) / (b.lat - a.lat) + a.lon;
            if p.lon < x {
                inside = !inside;
            }
        }
        j = i;
    }
    inside
}

/// True when the ring's first and last vertices coincide.
pub fn ring_is_closed(ring: &[LonLat]) -> bool {
    match (ring.first(), ring.last()) {
        (Some(a), Some(b)) => ring.len() > 1 && a == b,
        _ => false,
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    fn square(x0: f64, y0: f64, s: f64) -> Vec<LonLat> {
        vec![
            LonLat::new(x0, y0),
            LonLat::new(x0 + s, y0),
            LonLat::new(x0 + s, y0 + s),
            LonLat::new(x0, y0 + s),
            LonLat::new(x0, y0),
        ]
    }

    #[test]
    fn even_odd_square() {
        let sq = square(0.0, 0.0, 1.0);
        assert!(ring_contains(&sq, LonLat::new(0.5, 0.5)));
        assert!(!ring_contains(&sq, LonLat::new(1.5, 0.5)));
        assert!(!ring_contains(&sq, LonLat::new(0.5, -0.1)));
    }

    #[test]
    fn mercator_round_trip() {
        let p = LonLat::new(8.4, 48.9);
        let (x, y) = p.to_mercator();
        let q = LonLat::from_mercator(x, y);
        assert!((p.lon - q.lon).abs() < 1e-9 && (p.lat - q.lat).abs() < 1e-9);
        assert_eq!(LonLat::new(0.0, 0.0).to_mercator(), (0.0, 0.0));
    }

    #[test]
    fn offset_is_metric() {
        let p = LonLat::new(8.0, 48.0);
        let q = p.offset_m(0.0, 1000.0);
        let (_, m_lat) = meters_per_degree(48.0);
        assert!(((q.lat - p.lat) * m_lat - 1000.0).abs() < 1e-6);
    }

    #[test]
    fn bbox_parse() {
        let b = BoundingBox::parse("7.5, 47.5,10,49.8").unwrap();
        assert_eq!(b, BoundingBox::new(7.5, 47.5, 10.0, 49.8));
        assert!(BoundingBox::parse("1,2,3").is_none());
        assert!(!BoundingBox::new(2.0, 0.0, 1.0, 1.0).is_valid());
    }
}
