use std::io::{BufRead, BufReader, Read, Write};
use std::path::Path;

use super::{open, IngestError};
use crate::geo::{BoundingBox, LonLat};

/// Row-major height raster in the ESRI ASCII grid layout (north row first).
#[derive(Debug, Clone, PartialEq)]
pub struct ElevationGrid {
    /// Lower-left corner of the lower-left cell.
    pub origin: LonLat,
    pub cell_size_deg: f64,
    pub ncols: usize,
    pub nrows: usize,
    pub values: Vec<f64>,
    pub nodata: f64,
}

impl ElevationGrid {
    pub fn new(origin: LonLat, cell_size_deg: f64, ncols: usize, nrows: usize, values: Vec<f64>, nodata: f64) -> Result<Self, IngestError> {
        if !(cell_size_deg > 0.0 && cell_size_deg.is_finite()) {
            return Err(IngestError::Dimension(format!("cellsize must be positive, got {cell_size_deg}")));
        }
        if ncols == 0 || nrows == 0 {
            return Err(IngestError::Dimension("ncols and nrows must be positive".into()));
        }
        if values.len() != ncols * nrows {
            return Err(IngestError::Dimension(format!("expected {} values, found {}", ncols * nrows, values.len())));
        }
        Ok(Self { origin, cell_size_deg, ncols, nrows, values, nodata })
    }

    pub fn extent(&self) -> BoundingBox {
        BoundingBox::new(
            self.origin.lon,
            self.origin.lat,
            self.origin.lon + self.ncols as f64 * self.cell_size_deg,
            self.origin.lat + self.nrows as f64 * self.cell_size_deg,
        )
    }

    /// `(row, col)` of the cell containing `p`, rows counted from the north.
    ///
    /// Indices come from flooring the offset to the lower-left origin, so a
    /// point on a shared horizontal edge falls in the northern cell (lower
    /// row index) and one on a shared vertical edge in the eastern cell.
    /// The outer east/north edges clamp into the grid.
    pub fn cell_of(&self, p: LonLat) -> Option<(usize, usize)> {
        if !self.extent().contains(p) {
            return None;
        }
        let col = (((p.lon - self.origin.lon) / self.cell_size_deg).floor() as usize).min(self.ncols - 1);
        let from_south = (((p.lat - self.origin.lat) / self.cell_size_deg).floor() as usize).min(self.nrows - 1);
        Some((self.nrows - 1 - from_south, col))
    }

    pub fn value(&self, row: usize, col: usize) -> f64 {
        self.values[row * self.ncols + col]
    }

    pub fn is_nodata(&self, v: f64) -> bool {
        v == self.nodata || (v.is_nan() && self.nodata.is_nan())
    }

    /// Center of the cell at `(row, col)`.
    pub fn cell_center(&self, row: usize, col: usize) -> LonLat {
        LonLat::new(
            self.origin.lon + (col as f64 + 0.5) * self.cell_size_deg,
            self.origin.lat + ((self.nrows - 1 - row) as f64 + 0.5) * self.cell_size_deg,
        )
    }
}

pub fn parse_elevation(path: &Path) -> Result<ElevationGrid, IngestError> {
    parse_elevation_from(open(path)?)
}

pub fn parse_elevation_from<R: Read>(reader: R) -> Result<ElevationGrid, IngestError> {
    const KEYS: [&str; 6] = ["ncols", "nrows", "xllcorner", "yllcorner", "cellsize", "nodata_value"];
    let mut header = [f64::NAN; 6];
    let mut values = Vec::new();
    let mut lines = BufReader::new(reader).lines().enumerate();
    let mut header_seen = 0;

    let number = |line: usize, tok: &str| tok.parse::<f64>().map_err(|_| IngestError::NonNumeric { line, token: tok.to_string() });

    while header_seen < KEYS.len() {
        let Some((i, line)) = lines.next() else {
            return Err(IngestError::Dimension(format!("header ended after {header_seen} of 6 lines")));
        };
        let line = line.map_err(|e| IngestError::Io { path: "<elevation>".into(), source: e })?;
        let mut toks = line.split_whitespace();
        let (Some(key), Some(val)) = (toks.next(), toks.next()) else { continue };
        let slot = KEYS
            .iter()
            .position(|k| k.eq_ignore_ascii_case(key))
            .ok_or_else(|| IngestError::Dimension(format!("line {}: unexpected header key `{key}`", i + 1)))?;
        header[slot] = number(i + 1, val)?;
        header_seen += 1;
    }
    let [ncols, nrows, xll, yll, cellsize, nodata] = header;
    if ncols.fract() != 0.0 || nrows.fract() != 0.0 || ncols < 1.0 || nrows < 1.0 {
        return Err(IngestError::Dimension(format!("ncols/nrows must be positive integers, got {ncols}/{nrows}")));
    }
    let (ncols, nrows) = (ncols as usize, nrows as usize);

    for (i, line) in lines {
        let line = line.map_err(|e| IngestError::Io { path: "<elevation>".into(), source: e })?;
        let row: Vec<f64> = line.split_whitespace().map(|t| number(i + 1, t)).collect::<Result<_, _>>()?;
        if row.is_empty() {
            continue;
        }
        if row.len() != ncols {
            return Err(IngestError::Dimension(format!("line {}: expected {ncols} values, found {}", i + 1, row.len())));
        }
        values.extend(row);
    }
    if values.len() != ncols * nrows {
        return Err(IngestError::Dimension(format!("expected {nrows} rows, found {}", values.len() / ncols)));
    }
    ElevationGrid::new(LonLat::new(xll, yll), cellsize, ncols, nrows, values, nodata)
}

pub fn write_elevation<W: Write>(mut w: W, grid: &ElevationGrid) -> std::io::Result<()> {
    writeln!(w, "ncols {}", grid.ncols)?;
    writeln!(w, "nrows {}", grid.nrows)?;
    writeln!(w, "xllcorner {}", grid.origin.lon)?;
    writeln!(w, "yllcorner {}", grid.origin.lat)?;
    writeln!(w, "cellsize {}", grid.cell_size_deg)?;
    writeln!(w, "NODATA_value {}", grid.nodata)?;
    for row in grid.values.chunks(grid.ncols) {
        let line: Vec<String> = row.iter().map(f64::to_string).collect();
        writeln!(w, "{}", line.join(" "))?;
    }
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const GRID_2X2: &str = "ncols 2\nnrows 2\nxllcorner 8.0\nyllcorner 48.0\ncellsize 0.5\nNODATA_value -9999\n100 110\n120 130\n";

    #[test]
    fn parses_2x2() {
        let g = parse_elevation_from(GRID_2X2.as_bytes()).unwrap();
        assert_eq!(g.values, vec![100.0, 110.0, 120.0, 130.0]);
        assert_eq!((g.ncols, g.nrows), (2, 2));
    }

    #[test]
    fn short_rows_are_a_dimension_error() {
        let text = "ncols 3\nnrows 2\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 2\n3 4\n";
        assert!(matches!(parse_elevation_from(text.as_bytes()), Err(IngestError::Dimension(_))));
    }

    #[test]
    fn non_numeric_cell() {
        let text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n1 x\n";
        assert!(matches!(parse_elevation_from(text.as_bytes()), Err(IngestError::NonNumeric { line: 7, .. })));
    }

    #[test]
    fn nodata_is_preserved_through_round_trip() {
        let text = "ncols 2\nnrows 1\nxllcorner 0\nyllcorner 0\ncellsize 1\nNODATA_value -9999\n-9999 12.5\n";
        let g = parse_elevation_from(text.as_bytes()).unwrap();
        assert_eq!(g.values[0], -9999.0);
        let mut buf = Vec::new();
        write_elevation(&mut buf, &g).unwrap();
        assert_eq!(parse_elevation_from(buf.as_slice()).unwrap(), g);
    }

    #[test]
    fn north_row_first_indexing() {
        let g = parse_elevation_from(GRID_2X2.as_bytes()).unwrap();
        // lower-left cell is the second (southern) row
        assert_eq!(g.cell_of(LonLat::new(8.25, 48.25)), Some((1, 0)));
        assert_eq!(g.cell_of(LonLat::new(8.75, 48.75)), Some((0, 1)));
        assert_eq!(g.cell_center(1, 0), LonLat::new(8.25, 48.25));
        assert_eq!(g.cell_of(LonLat::new(7.9, 48.25)), None);
    }

    proptest! {
        #[test]
        fn round_trip(ncols in 1usize..6, nrows in 1usize..6, seed in proptest::collection::vec(-500.0f64..4000.0, 36)) {
            let values = seed[..ncols * nrows].to_vec();
            let g = ElevationGrid::new(LonLat::new(7.25, 47.5), 0.01, ncols, nrows, values, -9999.0).unwrap();
            let mut buf = Vec::new();
            write_elevation(&mut buf, &g).unwrap();
            prop_assert_eq!(parse_elevation_from(buf.as_slice()).unwrap(), g);
        }
    }
}
