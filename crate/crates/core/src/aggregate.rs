//! Regular Web-Mercator grid over prediction catalogs.
//!
//! Cells are anchored at the projection origin: cell `(i, j)` covers
//! `[i*s, (i+1)*s) x [j*s, (j+1)*s)` in projected meters, so boundaries
//! never depend on the queried viewport. Points on a boundary belong to the
//! higher-index cell.

use std::collections::BTreeMap;
use std::fmt::Write as _;

use serde::{Deserialize, Serialize};

use crate::geo::{BoundingBox, LonLat};
use crate::ingest::AreaPolygon;
use crate::predict::PredictionCatalog;

#[derive(Debug, thiserror::Error, PartialEq)]
pub enum AggregateError {
    #[error("cell size {size} m outside the allowed range [{min}, {max}] m")]
    SizeOutOfRange { size: f64, min: f64, max: f64 },
    #[error("splitting would shrink cells to {size} m, below the {min} m minimum")]
    Underflow { size: f64, min: f64 },
    #[error("cell size must be positive and finite, got {0}")]
    InvalidSize(f64),
    #[error("area `{0}` is not in the prediction catalog")]
    MissingArea(String),
    #[error("month {0} outside 1..=12")]
    Month(u32),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub struct CellIndex {
    pub i: i64,
    pub j: i64,
}

impl CellIndex {
    pub const fn new(i: i64, j: i64) -> Self {
        Self { i, j }
    }

    /// The four cells of the next level covering this one.
    pub fn children(&self) -> [CellIndex; 4] {
        let (i, j) = (self.i * 2, self.j * 2);
        [CellIndex::new(i, j), CellIndex::new(i + 1, j), CellIndex::new(i, j + 1), CellIndex::new(i + 1, j + 1)]
    }

    pub fn parent(&self) -> CellIndex {
        CellIndex::new(self.i.div_euclid(2), self.j.div_euclid(2))
    }
}

/// Allowed cell sizes in meters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SizeRange {
    pub min_m: f64,
    pub max_m: f64,
}

impl Default for SizeRange {
    fn default() -> Self {
        Self { min_m: 500.0, max_m: 200_000.0 }
    }
}

impl SizeRange {
    pub fn check(&self, size: f64) -> Result<(), AggregateError> {
        if !(size.is_finite() && size > 0.0) {
            return Err(AggregateError::InvalidSize(size));
        }
        if size < self.min_m || size > self.max_m {
            return Err(AggregateError::SizeOutOfRange { size, min: self.min_m, max: self.max_m });
        }
        Ok(())
    }
}

/// `cell_size_m = base_size_m / 2^level`.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct GridSpec {
    pub base_size_m: f64,
    pub level: u32,
}

impl GridSpec {
    pub fn new(cell_size_m: f64) -> Result<Self, AggregateError> {
        if !(cell_size_m.is_finite() && cell_size_m > 0.0) {
            return Err(AggregateError::InvalidSize(cell_size_m));
        }
        Ok(Self { base_size_m: cell_size_m, level: 0 })
    }

    pub fn cell_size_m(&self) -> f64 {
        self.base_size_m / 2f64.powi(self.level as i32)
    }

    pub fn cell_of_xy(&self, x: f64, y: f64) -> CellIndex {
        let s = self.cell_size_m();
        CellIndex::new((x / s).floor() as i64, (y / s).floor() as i64)
    }

    pub fn cell_of(&self, p: LonLat) -> CellIndex {
        let (x, y) = p.to_mercator();
        self.cell_of_xy(x, y)
    }

    /// `(min_x, min_y, max_x, max_y)` in projected meters.
    pub fn cell_bounds_xy(&self, c: CellIndex) -> (f64, f64, f64, f64) {
        let s = self.cell_size_m();
        (c.i as f64 * s, c.j as f64 * s, (c.i + 1) as f64 * s, (c.j + 1) as f64 * s)
    }

    pub fn cell_bbox(&self, c: CellIndex) -> BoundingBox {
        let (x0, y0, x1, y1) = self.cell_bounds_xy(c);
        let sw = LonLat::from_mercator(x0, y0);
        let ne = LonLat::from_mercator(x1, y1);
        BoundingBox::new(sw.lon, sw.lat, ne.lon, ne.lat)
    }

    pub fn cell_center(&self, c: CellIndex) -> LonLat {
        let (x0, y0, x1, y1) = self.cell_bounds_xy(c);
        LonLat::from_mercator((x0 + x1) / 2.0, (y0 + y1) / 2.0)
    }

    /// Next zoom level: half the cell size.
    pub fn split(&self, range: &SizeRange) -> Result<GridSpec, AggregateError> {
        let next = GridSpec { base_size_m: self.base_size_m, level: self.level + 1 };
        if next.cell_size_m() < range.min_m {
            return Err(AggregateError::Underflow { size: next.cell_size_m(), min: range.min_m });
        }
        Ok(next)
    }

    /// A fresh tiling at another size, same origin.
    pub fn resize(&self, cell_size_m: f64, range: &SizeRange) -> Result<GridSpec, AggregateError> {
        range.check(cell_size_m)?;
        GridSpec::new(cell_size_m)
    }

    /// Whether cell `c` overlaps a lon/lat box (closed intervals).
    pub fn cell_intersects(&self, c: CellIndex, bbox: &BoundingBox) -> bool {
        let (x0, y0, x1, y1) = self.cell_bounds_xy(c);
        let (bx0, by0) = LonLat::new(bbox.min_lon, bbox.min_lat).to_mercator();
        let (bx1, by1) = LonLat::new(bbox.max_lon, bbox.max_lat).to_mercator();
        x0 <= bx1 && bx0 <= x1 && y0 <= by1 && by0 <= y1
    }
}

pub type Assignment = BTreeMap<CellIndex, Vec<String>>;

/// Assign named points to the cells containing them.
pub fn assign_points<'a>(spec: &GridSpec, points: impl IntoIterator<Item = (&'a str, LonLat)>) -> Assignment {
    let mut out: Assignment = BTreeMap::new();
    for (id, p) in points {
        out.entry(spec.cell_of(p)).or_default().push(id.to_string());
    }
    out.values_mut().for_each(|v| v.sort());
    out
}

/// Assign each area to the cell containing its centroid.
pub fn assign_areas(spec: &GridSpec, areas: &[AreaPolygon]) -> Assignment {
    assign_points(spec, areas.iter().map(|a| (a.area_id.as_str(), a.centroid())))
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MonthStats {
    pub endangered: u32,
    pub safe: u32,
    pub mean_certainty_endangered: Option<f64>,
    pub mean_certainty_safe: Option<f64>,
    /// Population standard deviation of certainty over all members.
    pub stddev_certainty: f64,
}

impl MonthStats {
    fn from_certainties(endangered: &[f64], safe: &[f64]) -> Self {
        let mean = |v: &[f64]| if v.is_empty() { None } else { Some(v.iter().sum::<f64>() / v.len() as f64) };
        let n = (endangered.len() + safe.len()) as f64;
        let all_mean = endangered.iter().chain(safe).sum::<f64>() / n;
        let var = endangered.iter().chain(safe).map(|c| (c - all_mean).powi(2)).sum::<f64>() / n;
        Self {
            endangered: endangered.len() as u32,
            safe: safe.len() as u32,
            mean_certainty_endangered: mean(endangered),
            mean_certainty_safe: mean(safe),
            stddev_certainty: var.sqrt(),
        }
    }

    pub fn total(&self) -> u32 {
        self.endangered + self.safe
    }

    pub fn endangered_fraction(&self) -> f64 {
        self.endangered as f64 / self.total() as f64
    }

    /// Mean certainty over all members.
    pub fn mean_certainty(&self) -> f64 {
        let e = self.mean_certainty_endangered.unwrap_or(0.0) * self.endangered as f64;
        let s = self.mean_certainty_safe.unwrap_or(0.0) * self.safe as f64;
        (e + s) / self.total() as f64
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CellSummary {
    pub cell: CellIndex,
    pub cell_size_m: f64,
    pub vineyard_count: u32,
    /// January first.
    pub months: Vec<MonthStats>,
    pub member_area_ids: Vec<String>,
}

impl CellSummary {
    pub fn month(&self, m: u32) -> &MonthStats {
        &self.months[m as usize - 1]
    }

    /// Combine summaries of disjoint member sets into one cell: counts add,
    /// means are count-weighted, and the standard deviation is rebuilt from
    /// per-part sums of squares.
    pub fn merge(cell: CellIndex, cell_size_m: f64, parts: &[&CellSummary]) -> CellSummary {
        let vineyard_count = parts.iter().map(|p| p.vineyard_count).sum();
        let mut member_area_ids: Vec<String> = parts.iter().flat_map(|p| p.member_area_ids.iter().cloned()).collect();
        member_area_ids.sort();
        let months = (0..12)
            .map(|m| {
                let (mut ne, mut ns, mut se, mut ss) = (0u32, 0u32, 0.0, 0.0);
                for p in parts {
                    let st = &p.months[m];
                    ne += st.endangered;
                    ns += st.safe;
                    se += st.mean_certainty_endangered.unwrap_or(0.0) * st.endangered as f64;
                    ss += st.mean_certainty_safe.unwrap_or(0.0) * st.safe as f64;
                }
                let n = (ne + ns) as f64;
                let mu = (se + ss) / n;
                // within-part plus between-part deviations
                let m2: f64 = parts
                    .iter()
                    .map(|p| {
                        let st = &p.months[m];
                        st.total() as f64 * (st.stddev_certainty.powi(2) + (st.mean_certainty() - mu).powi(2))
                    })
                    .sum();
                MonthStats {
                    endangered: ne,
                    safe: ns,
                    mean_certainty_endangered: (ne > 0).then(|| se / ne as f64),
                    mean_certainty_safe: (ns > 0).then(|| ss / ns as f64),
                    stddev_certainty: (m2 / n).sqrt(),
                }
            })
            .collect();
        CellSummary { cell, cell_size_m, vineyard_count, months, member_area_ids }
    }
}

/// Per-cell, per-month statistics for an assignment. Only non-empty cells
/// are produced, ordered by cell index.
pub fn summarize(spec: &GridSpec, assignment: &Assignment, catalog: &PredictionCatalog) -> Result<Vec<CellSummary>, AggregateError> {
    let mut out = Vec::with_capacity(assignment.len());
    for (cell, members) in assignment {
        if members.is_empty() {
            continue;
        }
        let mut months = Vec::with_capacity(12);
        for m in 1..=12 {
            let (mut e, mut s) = (Vec::new(), Vec::new());
            for id in members {
                let p = catalog.get(id, m).ok_or_else(|| AggregateError::MissingArea(id.clone()))?;
                if p.endangered {
                    e.push(p.certainty);
                } else {
                    s.push(p.certainty);
                }
            }
            months.push(MonthStats::from_certainties(&e, &s));
        }
        let mut member_area_ids = members.clone();
        member_area_ids.sort();
        out.push(CellSummary {
            cell: *cell,
            cell_size_m: spec.cell_size_m(),
            vineyard_count: members.len() as u32,
            months,
            member_area_ids,
        });
    }
    Ok(out)
}

/// Assign every catalog area by its stored centroid and summarize.
pub fn summarize_catalog(spec: &GridSpec, catalog: &PredictionCatalog) -> Vec<CellSummary> {
    let assignment = assign_points(spec, catalog.areas().map(|a| (a.area_id.as_str(), a.centroid)));
    summarize(spec, &assignment, catalog).expect("catalog areas are complete")
}

/// Summaries whose cell overlaps `bbox`.
pub fn query_bbox<'a>(spec: &GridSpec, summaries: &'a [CellSummary], bbox: &BoundingBox) -> Vec<&'a CellSummary> {
    summaries.iter().filter(|s| spec.cell_intersects(s.cell, bbox)).collect()
}

fn opt(v: Option<f64>) -> String {
    v.map(|x| x.to_string()).unwrap_or_default()
}

/// One record per cell and month:
/// `i,j,cell_size_m,month,endangered,safe,mean_ce,mean_cs,stddev`.
pub fn summaries_to_csv(summaries: &[CellSummary]) -> String {
    let mut out = String::from("i,j,cell_size_m,month,endangered,safe,mean_ce,mean_cs,stddev\n");
    for s in summaries {
        for (m, st) in s.months.iter().enumerate() {
            let _ = writeln!(
                out,
                "{},{},{},{},{},{},{},{},{}",
                s.cell.i,
                s.cell.j,
                s.cell_size_m,
                m + 1,
                st.endangered,
                st.safe,
                opt(st.mean_certainty_endangered),
                opt(st.mean_certainty_safe),
                st.stddev_certainty
            );
        }
    }
    out
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::geo::MERCATOR_RADIUS_M;

    fn lonlat_of_xy(x: f64, y: f64) -> LonLat {
        LonLat::from_mercator(x, y)
    }

    #[test]
    fn floor_assignment() {
        let spec = GridSpec::new(100.0).unwrap();
        assert_eq!(spec.cell_of_xy(10.0, 10.0), CellIndex::new(0, 0));
        assert_eq!(spec.cell_of_xy(100.0, 0.0), CellIndex::new(1, 0));
        assert_eq!(spec.cell_of_xy(-0.5, 99.999), CellIndex::new(-1, 0));
    }

    #[test]
    fn split_halves_size_and_nests() {
        let spec = GridSpec::new(10_000.0).unwrap();
        let child = spec.split(&SizeRange::default()).unwrap();
        assert_eq!(child.level, 1);
        assert_eq!(child.cell_size_m(), 5_000.0);
        let p = lonlat_of_xy(12_345.0, -67_890.0);
        assert_eq!(child.cell_of(p).parent(), spec.cell_of(p));
        assert!(spec.cell_of(p).children().contains(&child.cell_of(p)));
        let small = GridSpec { base_size_m: 800.0, level: 0 };
        assert!(matches!(small.split(&SizeRange::default()), Err(AggregateError::Underflow { .. })));
    }

    #[test]
    fn resize_checks_range() {
        let spec = GridSpec::new(10_000.0).unwrap();
        assert!(spec.resize(100.0, &SizeRange::default()).is_err());
        assert!(spec.resize(300_000.0, &SizeRange::default()).is_err());
        assert_eq!(spec.resize(20_000.0, &SizeRange::default()).unwrap().cell_size_m(), 20_000.0);
    }

    #[test]
    fn month_stats_worked_example() {
        let st = MonthStats::from_certainties(&[0.6, 0.8], &[]);
        assert_eq!(st.endangered, 2);
        assert!((st.mean_certainty_endangered.unwrap() - 0.7).abs() < 1e-12);
        assert!((st.stddev_certainty - 0.1).abs() < 1e-12);
        assert_eq!(st.mean_certainty_safe, None);
        let one = MonthStats::from_certainties(&[0.9], &[]);
        assert_eq!((one.endangered, one.safe, one.mean_certainty_endangered, one.mean_certainty_safe, one.stddev_certainty), (1, 0, Some(0.9), None, 0.0));
    }

    #[test]
    fn bbox_intersection_is_closed() {
        let spec = GridSpec::new(1000.0).unwrap();
        let c = CellIndex::new(3, 4);
        let bb = spec.cell_bbox(c);
        assert!(spec.cell_intersects(c, &bb));
        let far = BoundingBox::new(100.0, 10.0, 101.0, 11.0);
        assert!(!spec.cell_intersects(c, &far));
        assert!(MERCATOR_RADIUS_M > 0.0);
    }

    #[test]
    fn merge_of_parts_matches_direct_stats() {
        let a = [0.55, 0.9, 0.7];
        let b = [0.6, 0.95];
        let sa = MonthStats::from_certainties(&a[..2], &a[2..]);
        let sb = MonthStats::from_certainties(&b[..1], &b[1..]);
        let mk = |st: MonthStats, ids: &[&str]| CellSummary {
            cell: CellIndex::new(0, 0),
            cell_size_m: 1.0,
            vineyard_count: st.total(),
            months: vec![st; 12],
            member_area_ids: ids.iter().map(|s| s.to_string()).collect(),
        };
        let (ca, cb) = (mk(sa, &["a1", "a2", "a3"]), mk(sb, &["b1", "b2"]));
        let merged = CellSummary::merge(CellIndex::new(0, 0), 2.0, &[&ca, &cb]);
        let direct = MonthStats::from_certainties(&[0.55, 0.9, 0.6], &[0.7, 0.95]);
        let m = merged.month(3);
        assert_eq!((m.endangered, m.safe), (3, 2));
        assert!((m.mean_certainty_endangered.unwrap() - direct.mean_certainty_endangered.unwrap()).abs() < 1e-12);
        assert!((m.mean_certainty_safe.unwrap() - direct.mean_certainty_safe.unwrap()).abs() < 1e-12);
        assert!((m.stddev_certainty - direct.stddev_certainty).abs() < 1e-12);
        assert_eq!(merged.vineyard_count, 5);
    }
}
