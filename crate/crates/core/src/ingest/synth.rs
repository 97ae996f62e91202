//! Seeded synthetic stand-in for the observation, land-use, elevation and
//! vineyard inputs.
//!
//! Two effects are planted and can be switched off independently:
//!
//! * **season**: every station shows elevated counts from
//!   `season_onset_month` through December;
//! * **woodland**: stations whose 5 km forest fraction exceeds
//!   `wood_threshold` are already elevated `wood_lead_months` earlier.
//!
//! Outside those windows a station-month reads zero apart from a small
//! background rate and rare spurious single-fly detections, which keeps the
//! monthly score distribution zero-heavy.

use std::collections::BTreeSet;
use std::sync::Arc;

use chrono::NaiveDate;
use rand::distr::weighted::WeightedIndex;
use rand::distr::Distribution;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Normal, Poisson};
use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use super::{AreaPolygon, CategoryManifest, ElevationGrid, IngestError, LandUseMap, LandUsePolygon, StationObservation};
use crate::features::{landuse_fractions, DiskSampling};
use crate::geo::{BoundingBox, LonLat};

/// Category used for planted woodland tiles.
pub const WOOD_CODE: &str = "FOREST_MIXED";

/// Non-forest tile mix: (code, weight).
const OPEN_LAND: [(&str, f64); 7] = [
    ("AGRI_ARABLE", 0.33),
    ("AGRI_GRASSLAND", 0.20),
    ("AGRI_VINEYARD", 0.15),
    ("AGRI_ORCHARD", 0.10),
    ("SETTLEMENT_RESIDENTIAL", 0.12),
    ("TRAFFIC_ROAD", 0.06),
    ("WATER_LAKE", 0.04),
];

const PEAK_TRAP: f64 = 25.0;
const PEAK_BERRY: f64 = 30.0;
const PEAK_EGG: f64 = 90.0;
/// Mean of a spurious detection, `1 + Poisson(1)`.
const NOISE_TRAP_MEAN: f64 = 2.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthConfig {
    pub region: BoundingBox,
    pub n_stations: usize,
    pub n_areas: usize,
    /// Number of distinct station-months to generate.
    pub target_instances: usize,
    pub first_year: i32,
    pub last_year: i32,
    /// Land-use tile size in degrees (lon, lat).
    pub tile_deg: (f64, f64),
    pub wood_blobs: usize,
    pub wood_blob_sigma_m: f64,
    pub wood_threshold: f64,
    pub season_onset_month: u32,
    pub wood_lead_months: u32,
    pub season_strength: f64,
    pub wood_strength: f64,
    pub background_trap_rate: f64,
    pub noise_detection_rate: f64,
    /// Relative sampling frequency of each calendar month.
    pub month_weights: [f64; 12],
    /// Share of stations that report a single day only.
    pub single_day_share: f64,
    pub vine_clusters: usize,
    pub vine_cluster_sigma_m: f64,
    pub clustered_area_share: f64,
    pub elevation_cell_deg: f64,
    pub sampling: DiskSampling,
}

impl Default for SynthConfig {
    fn default() -> Self {
        Self {
            region: BoundingBox::new(7.3, 47.5, 8.9, 48.5),
            n_stations: 867,
            n_areas: 1700,
            target_instances: 3860,
            first_year: 2013,
            last_year: 2017,
            tile_deg: (0.05, 0.04),
            wood_blobs: 8,
            wood_blob_sigma_m: 10_000.0,
            wood_threshold: 0.3,
            season_onset_month: 8,
            wood_lead_months: 2,
            season_strength: 1.0,
            wood_strength: 1.0,
            background_trap_rate: 0.0,
            noise_detection_rate: 0.01,
            month_weights: [6.0, 6.0, 6.0, 6.0, 6.0, 2.0, 2.0, 0.8, 0.8, 0.8, 0.8, 0.8],
            single_day_share: 0.3,
            vine_clusters: 14,
            vine_cluster_sigma_m: 6_000.0,
            clustered_area_share: 0.6,
            elevation_cell_deg: 0.01,
            sampling: DiskSampling::default(),
        }
    }
}

impl SynthConfig {
    /// A reduced configuration that generates in well under a second.
    pub fn small() -> Self {
        Self {
            region: BoundingBox::new(8.0, 48.0, 8.6, 48.5),
            n_stations: 60,
            n_areas: 80,
            target_instances: 300,
            wood_blobs: 2,
            vine_clusters: 4,
            sampling: DiskSampling::coarse(),
            ..Self::default()
        }
    }

    fn validate(&self) -> Result<(), IngestError> {
        let bad = |m: &str| Err(IngestError::InvalidConfig(m.to_string()));
        if !self.region.is_valid() || self.region.min_lon >= self.region.max_lon || self.region.min_lat >= self.region.max_lat {
            return bad("region bounding box is inverted or empty");
        }
        if self.n_stations == 0 || self.n_areas == 0 || self.target_instances == 0 {
            return bad("station, area and instance counts must be positive");
        }
        if self.target_instances < self.n_stations {
            return bad("target_instances must be at least n_stations");
        }
        if self.last_year < self.first_year {
            return bad("last_year precedes first_year");
        }
        if !(self.tile_deg.0 > 0.0 && self.tile_deg.1 > 0.0 && self.elevation_cell_deg > 0.0) {
            return bad("tile and elevation cell sizes must be positive");
        }
        if !(1..=12).contains(&self.season_onset_month) || self.wood_lead_months >= self.season_onset_month {
            return bad("season onset must be a month and the woodland lead must stay within the year");
        }
        if self.month_weights.iter().any(|w| *w < 0.0 || !w.is_finite()) || self.month_weights.iter().sum::<f64>() <= 0.0 {
            return bad("month weights must be non-negative with a positive sum");
        }
        for (name, v) in [
            ("season_strength", self.season_strength),
            ("wood_strength", self.wood_strength),
            ("background_trap_rate", self.background_trap_rate),
        ] {
            if v < 0.0 || !v.is_finite() {
                return bad(&format!("{name} must be non-negative"));
            }
        }
        for (name, v) in [
            ("noise_detection_rate", self.noise_detection_rate),
            ("single_day_share", self.single_day_share),
            ("clustered_area_share", self.clustered_area_share),
            ("wood_threshold", self.wood_threshold),
        ] {
            if !(0.0..=1.0).contains(&v) {
                return bad(&format!("{name} must lie in [0, 1]"));
            }
        }
        Ok(())
    }

    /// Intensity multiplier of a station-month; zero outside the planted windows.
    pub fn intensity(&self, month: u32, woody: bool) -> f64 {
        let onset = self.season_onset_month;
        let mut f = 0.0;
        if month >= onset {
            f += self.season_strength;
        } else if woody && month + self.wood_lead_months >= onset {
            f += self.wood_strength;
        }
        f
    }

    /// Expected trap count of a single record.
    pub fn expected_trap_count(&self, month: u32, woody: bool) -> f64 {
        let f = self.intensity(month, woody);
        if f > 0.0 {
            self.background_trap_rate + PEAK_TRAP * f
        } else {
            self.background_trap_rate + self.noise_detection_rate * NOISE_TRAP_MEAN
        }
    }
}

/// Ground truth for a generated station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SynthStation {
    pub station_id: String,
    pub location: LonLat,
    pub woodland_fraction: f64,
    pub woody: bool,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SyntheticData {
    pub manifest: Arc<CategoryManifest>,
    pub observations: Vec<StationObservation>,
    pub landuse: LandUseMap,
    pub elevation: ElevationGrid,
    pub areas: Vec<AreaPolygon>,
    pub stations: Vec<SynthStation>,
    /// Manifest index of the planted woodland category.
    pub wood_category: usize,
}

struct WoodField {
    centers: Vec<LonLat>,
    sigma_m: f64,
}

impl WoodField {
    fn probability(&self, p: LonLat) -> f64 {
        let (m_lon, m_lat) = crate::geo::meters_per_degree(p.lat);
        let peak = self
            .centers
            .iter()
            .map(|c| {
                let dx = (p.lon - c.lon) * m_lon;
                let dy = (p.lat - c.lat) * m_lat;
                (-(dx * dx + dy * dy) / (2.0 * self.sigma_m * self.sigma_m)).exp()
            })
            .fold(0.0, f64::max);
        0.04 + 0.86 * peak
    }
}

fn uniform_in(rng: &mut impl Rng, b: &BoundingBox) -> LonLat {
    LonLat::new(rng.random_range(b.min_lon..b.max_lon), rng.random_range(b.min_lat..b.max_lat))
}

fn poisson(rng: &mut impl Rng, lambda: f64) -> u32 {
    if lambda <= 0.0 {
        0
    } else {
        Poisson::new(lambda).expect("positive rate").sample(rng) as u32
    }
}

fn expand(b: &BoundingBox, by_deg: f64) -> BoundingBox {
    BoundingBox::new(b.min_lon - by_deg, b.min_lat - by_deg, b.max_lon + by_deg, b.max_lat + by_deg)
}

/// Generate a full synthetic dataset. Identical `(config, seed)` pairs yield
/// identical data.
pub fn generate_synthetic(config: &SynthConfig, seed: u64) -> Result<SyntheticData, IngestError> {
    config.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let manifest = Arc::new(CategoryManifest::default());
    let wood_category = manifest.index_of(WOOD_CODE).expect("built-in manifest has the woodland code");
    let region = config.region;
    // cover every 5 km disk around points inside the region
    let outer = expand(&region, 0.15);

    let field = WoodField {
        centers: (0..config.wood_blobs).map(|_| uniform_in(&mut rng, &region)).collect(),
        sigma_m: config.wood_blob_sigma_m,
    };

    let landuse = {
        let open_codes: Vec<usize> = OPEN_LAND.iter().map(|(c, _)| manifest.index_of(c).expect("known code")).collect();
        let open_pick = WeightedIndex::new(OPEN_LAND.iter().map(|(_, w)| *w)).expect("positive weights");
        let (tw, th) = config.tile_deg;
        let nx = ((outer.max_lon - outer.min_lon) / tw).ceil() as usize;
        let ny = ((outer.max_lat - outer.min_lat) / th).ceil() as usize;
        let mut polygons = Vec::with_capacity(nx * ny);
        for j in 0..ny {
            for i in 0..nx {
                let x0 = outer.min_lon + i as f64 * tw;
                let y0 = outer.min_lat + j as f64 * th;
                let center = LonLat::new(x0 + tw / 2.0, y0 + th / 2.0);
                let category = if rng.random::<f64>() < field.probability(center) {
                    wood_category
                } else {
                    open_codes[open_pick.sample(&mut rng)]
                };
                let ring = vec![
                    LonLat::new(x0, y0),
                    LonLat::new(x0 + tw, y0),
                    LonLat::new(x0 + tw, y0 + th),
                    LonLat::new(x0, y0 + th),
                    LonLat::new(x0, y0),
                ];
                polygons.push(LandUsePolygon { ring, category });
            }
        }
        LandUseMap::new(polygons, manifest.clone())?
    };

    let elevation = {
        let cs = config.elevation_cell_deg;
        let ncols = ((outer.max_lon - outer.min_lon) / cs).ceil() as usize;
        let nrows = ((outer.max_lat - outer.min_lat) / cs).ceil() as usize;
        let hills: Vec<(LonLat, f64)> =
            (0..8).map(|_| (uniform_in(&mut rng, &outer), rng.random_range(150.0..700.0))).collect();
        let mut values = Vec::with_capacity(ncols * nrows);
        for row in 0..nrows {
            for col in 0..ncols {
                let lon = outer.min_lon + (col as f64 + 0.5) * cs;
                let lat = outer.max_lat - (row as f64 + 0.5) * cs;
                let mut h = 120.0 + 40.0 * (lon - outer.min_lon);
                for (c, amp) in &hills {
                    let d2 = ((lon - c.lon) / 0.25).powi(2) + ((lat - c.lat) / 0.2).powi(2);
                    h += amp * (-d2).exp();
                }
                values.push((h * 10.0).round() / 10.0);
            }
        }
        ElevationGrid::new(LonLat::new(outer.min_lon, outer.min_lat), cs, ncols, nrows, values, -9999.0)?
    };

    // stations
    let station_locs: Vec<LonLat> = (0..config.n_stations).map(|_| uniform_in(&mut rng, &region)).collect();
    let woodland: Vec<f64> = station_locs
        .par_iter()
        .map(|loc| landuse_fractions(*loc, &config.sampling, &landuse).map(|f| f[wood_category]))
        .collect::<Result<_, _>>()
        .map_err(|e| IngestError::InvalidConfig(e.to_string()))?;
    let stations: Vec<SynthStation> = station_locs
        .iter()
        .zip(&woodland)
        .enumerate()
        .map(|(i, (loc, &w))| SynthStation {
            station_id: format!("WBI-{:04}", i + 1),
            location: *loc,
            woodland_fraction: w,
            woody: w > config.wood_threshold,
        })
        .collect();

    // distinct station-months per station: single-day stations keep one,
    // the rest share the remaining quota with skewed weights
    let n_years = (config.last_year - config.first_year + 1) as usize;
    let cap = (n_years * 12).min(48);
    let mut counts = vec![1usize; config.n_stations];
    let long_term: Vec<usize> = (0..config.n_stations).filter(|_| rng.random::<f64>() >= config.single_day_share).collect();
    if !long_term.is_empty() {
        let weights: Vec<f64> = long_term.iter().map(|_| rng.random::<f64>().powi(2) + 0.05).collect();
        let pick = WeightedIndex::new(&weights).expect("positive weights");
        let capacity = long_term.len() * (cap - 1);
        let mut remaining = (config.target_instances - config.n_stations).min(capacity);
        while remaining > 0 {
            let s = long_term[pick.sample(&mut rng)];
            if counts[s] < cap {
                counts[s] += 1;
                remaining -= 1;
            }
        }
    }

    let month_pick = WeightedIndex::new(config.month_weights).expect("validated weights");
    let mut observations = Vec::new();
    for (station, &n) in stations.iter().zip(&counts) {
        let span = (1 + n / 5).min(n_years);
        let start = config.first_year + rng.random_range(0..=(n_years - span)) as i32;
        let mut keys = BTreeSet::new();
        while keys.len() < n {
            let month = month_pick.sample(&mut rng) as u32 + 1;
            let year = start + rng.random_range(0..span) as i32;
            keys.insert((year, month));
        }
        for (year, month) in keys {
            let n_records = if n == 1 { 1 } else { rng.random_range(1..=3) };
            let mut days = BTreeSet::new();
            while days.len() < n_records {
                days.insert(rng.random_range(1..=28u32));
            }
            for day in days {
                let f = config.intensity(month, station.woody);
                let (trap, berry, egg) = if f > 0.0 {
                    let trap = poisson(&mut rng, config.background_trap_rate + PEAK_TRAP * f);
                    let berry = Normal::new(PEAK_BERRY * f, 10.0).expect("sd").sample(&mut rng).clamp(0.0, 100.0);
                    let egg = Normal::new(PEAK_EGG * f, 35.0).expect("sd").sample(&mut rng).max(0.0);
                    (trap, berry, egg)
                } else {
                    let mut trap = poisson(&mut rng, config.background_trap_rate);
                    if rng.random::<f64>() < config.noise_detection_rate {
                        trap += 1 + poisson(&mut rng, 1.0);
                    }
                    (trap, 0.0, 0.0)
                };
                observations.push(StationObservation {
                    station_id: station.station_id.clone(),
                    location: station.location,
                    date: NaiveDate::from_ymd_opt(year, month, day).expect("valid day"),
                    trap_count: trap,
                    berry_infestation: (berry * 100.0).round() / 100.0,
                    egg_rate: (egg * 100.0).round() / 100.0,
                });
            }
        }
    }

    let cluster_centers: Vec<LonLat> = (0..config.vine_clusters).map(|_| uniform_in(&mut rng, &region)).collect();
    let scatter = Normal::new(0.0, config.vine_cluster_sigma_m).expect("sd");
    let mut areas = Vec::with_capacity(config.n_areas);
    while areas.len() < config.n_areas {
        let center = if !cluster_centers.is_empty() && rng.random::<f64>() < config.clustered_area_share {
            let c = cluster_centers[rng.random_range(0..cluster_centers.len())];
            c.offset_m(scatter.sample(&mut rng), scatter.sample(&mut rng))
        } else {
            uniform_in(&mut rng, &region)
        };
        if !region.contains(center) {
            continue;
        }
        let half = rng.random_range(60.0..200.0);
        let mut ring: Vec<LonLat> = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
            .iter()
            .map(|(sx, sy)| {
                let jx = rng.random_range(0.8..1.2);
                let jy = rng.random_range(0.8..1.2);
                center.offset_m(sx * half * jx, sy * half * jy)
            })
            .collect();
        ring.push(ring[0]);
        areas.push(AreaPolygon::new(format!("V{:05}", areas.len() + 1), ring));
    }

    Ok(SyntheticData { manifest, observations, landuse, elevation, areas, stations, wood_category })
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn deterministic_for_fixed_seed() {
        let c = SynthConfig::small();
        let a = generate_synthetic(&c, 11).unwrap();
        let b = generate_synthetic(&c, 11).unwrap();
        assert_eq!(a, b);
        let other = generate_synthetic(&c, 12).unwrap();
        assert_ne!(a.observations, other.observations);
    }

    #[test]
    fn default_config_has_867_stations() {
        let c = SynthConfig { n_areas: 10, ..SynthConfig::default() };
        let d = generate_synthetic(&c, 1).unwrap();
        let ids: BTreeSet<&str> = d.observations.iter().map(|o| o.station_id.as_str()).collect();
        assert_eq!(d.stations.len(), 867);
        assert_eq!(ids.len(), 867);
    }

    #[test]
    fn rejects_bad_configs() {
        let inverted = SynthConfig { region: BoundingBox::new(9.0, 48.0, 8.0, 49.0), ..SynthConfig::small() };
        assert!(matches!(generate_synthetic(&inverted, 1), Err(IngestError::InvalidConfig(_))));
        let zero = SynthConfig { n_stations: 0, ..SynthConfig::small() };
        assert!(matches!(generate_synthetic(&zero, 1), Err(IngestError::InvalidConfig(_))));
    }

    #[test]
    fn generated_records_satisfy_invariants() {
        let c = SynthConfig::small();
        let d = generate_synthetic(&c, 5).unwrap();
        for o in &d.observations {
            assert!((0.0..=100.0).contains(&o.berry_infestation));
            assert!(o.egg_rate >= 0.0);
            assert!(c.region.contains(o.location));
        }
        assert_eq!(d.areas.len(), c.n_areas);
    }

    #[test]
    fn sampling_is_irregular() {
        let d = generate_synthetic(&SynthConfig::default(), 7).unwrap();
        let mut per_station: std::collections::BTreeMap<&str, Vec<NaiveDate>> = Default::default();
        for o in &d.observations {
            per_station.entry(&o.station_id).or_default().push(o.date);
        }
        let spans: Vec<i64> =
            per_station.values().map(|v| (*v.iter().max().unwrap() - *v.iter().min().unwrap()).num_days()).collect();
        assert!(spans.iter().filter(|&&s| s == 0).count() > 100, "expected many single-day stations");
        assert!(*spans.iter().max().unwrap() > 365, "expected multi-year stations");
    }

    #[test]
    fn planted_effects_shift_intensity() {
        let c = SynthConfig::default();
        assert_eq!(c.intensity(5, true), 0.0);
        assert_eq!(c.intensity(6, true), 1.0);
        assert_eq!(c.intensity(6, false), 0.0);
        assert_eq!(c.intensity(8, false), 1.0);
        assert_eq!(c.intensity(12, true), 1.0);
    }

    /// With both effects disabled the monthly mean trap counts agree with
    /// the (flat) analytic mean within sampling noise.
    #[test]
    fn disabled_effects_give_flat_months() {
        let c = SynthConfig {
            season_strength: 0.0,
            wood_strength: 0.0,
            background_trap_rate: 3.0,
            month_weights: [1.0; 12],
            n_areas: 10,
            ..SynthConfig::default()
        };
        let analytic: Vec<f64> = (1..=12).flat_map(|m| [c.expected_trap_count(m, false), c.expected_trap_count(m, true)]).collect();
        assert!(analytic.windows(2).all(|w| w[0] == w[1]));
        let mean = analytic[0];

        let d = generate_synthetic(&c, 7).unwrap();
        use chrono::Datelike;
        let mut sums = [(0.0f64, 0usize); 12];
        for o in &d.observations {
            let s = &mut sums[o.date.month0() as usize];
            s.0 += o.trap_count as f64;
            s.1 += 1;
        }
        // var of a record's count is about the mean (Poisson) plus a small noise term
        for (m, (s, n)) in sums.iter().enumerate() {
            let empirical = s / *n as f64;
            let se = (mean * 1.1 / *n as f64).sqrt();
            assert!((empirical - mean).abs() < 4.5 * se, "month {} mean {empirical} vs {mean}", m + 1);
        }
    }
}
