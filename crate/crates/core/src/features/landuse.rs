use serde::{Deserialize, Serialize};

use super::FeatureError;
use crate::geo::{BoundingBox, LonLat};
use crate::ingest::LandUseMap;

/// Square lattice of step `radius_m / divisions`, clipped to the disk.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DiskSampling {
    pub radius_m: f64,
    pub divisions: u32,
}

impl Default for DiskSampling {
    fn default() -> Self {
        Self { radius_m: 5_000.0, divisions: 64 }
    }
}

impl DiskSampling {
    /// Cheaper lattice for tests and quick previews.
    pub fn coarse() -> Self {
        Self { radius_m: 5_000.0, divisions: 16 }
    }

    /// Metric offsets (east, north) of every lattice point inside the disk.
    pub fn offsets(&self) -> Vec<(f64, f64)> {
        let d = self.divisions as i64;
        let step = self.radius_m / self.divisions as f64;
        let mut out = Vec::new();
        for j in -d..=d {
            for i in -d..=d {
                if i * i + j * j <= d * d {
                    out.push((i as f64 * step, j as f64 * step));
                }
            }
        }
        out
    }
}

/// Fraction of lattice points around `center` falling in each category.
/// Overlaps resolve to the first polygon in file order; uncovered points
/// count toward no category.
pub fn landuse_fractions(center: LonLat, sampling: &DiskSampling, map: &LandUseMap) -> Result<Vec<f64>, FeatureError> {
    if !(sampling.radius_m > 0.0) || sampling.divisions == 0 {
        return Err(FeatureError::InvalidRadius(sampling.radius_m));
    }
    let n_cat = map.manifest().codes().len();
    let mut counts = vec![0usize; n_cat];
    let offsets = sampling.offsets();

    let r = sampling.radius_m;
    let sw = center.offset_m(-r, -r);
    let ne = center.offset_m(r, r);
    let candidates = map.candidates(&BoundingBox::new(sw.lon, sw.lat, ne.lon, ne.lat));
    if !candidates.is_empty() {
        for &(dx, dy) in &offsets {
            if let Some(c) = map.category_at(&candidates, center.offset_m(dx, dy)) {
                counts[c] += 1;
            }
        }
    }
    let total = offsets.len() as f64;
    Ok(counts.into_iter().map(|c| c as f64 / total).collect())
}
