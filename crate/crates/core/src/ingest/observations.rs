use std::io::{Read, Write};
use std::path::Path;

use chrono::NaiveDate;
use serde::{Deserialize, Serialize};

use super::{open, IngestError};
use crate::geo::{BoundingBox, LonLat};

pub const OBSERVATION_HEADER: [&str; 7] = ["station_id", "lon", "lat", "date", "trap_count", "berry_pct", "egg_pct"];

/// One dated measurement at a monitoring station.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StationObservation {
    pub station_id: String,
    pub location: LonLat,
    pub date: NaiveDate,
    pub trap_count: u32,
    /// Share of sampled berries found infested, in percent (0..=100).
    pub berry_infestation: f64,
    /// Eggs per sampled berry in percent; exceeds 100 when there are more eggs than berries.
    pub egg_rate: f64,
}

pub fn parse_observations(path: &Path, region: &BoundingBox) -> Result<Vec<StationObservation>, IngestError> {
    parse_observations_from(open(path)?, region)
}

/// Parse observation CSV from any reader. Locations outside `region` are
/// rejected like any other out-of-range field.
pub fn parse_observations_from<R: Read>(reader: R, region: &BoundingBox) -> Result<Vec<StationObservation>, IngestError> {
    let mut rdr = csv::ReaderBuilder::new().has_headers(true).trim(csv::Trim::All).from_reader(reader);
    let header = rdr.headers()?.clone();
    if header.iter().ne(OBSERVATION_HEADER.iter().copied()) {
        return Err(IngestError::Header {
            expected: OBSERVATION_HEADER.join(","),
            found: header.iter().collect::<Vec<_>>().join(","),
        });
    }

    let mut out = Vec::new();
    for (idx, rec) in rdr.records().enumerate() {
        let rec = rec?;
        let row = idx + 1;
        let field = |col: usize| rec.get(col).unwrap_or("");
        let bad = |col: usize, reason: &str| IngestError::Field {
            row,
            column: OBSERVATION_HEADER[col].to_string(),
            value: field(col).to_string(),
            reason: reason.to_string(),
        };
        let num = |col: usize| -> Result<f64, IngestError> {
            field(col).parse::<f64>().ok().filter(|v| v.is_finite()).ok_or_else(|| bad(col, "not a finite number"))
        };

        let station_id = field(0).to_string();
        if station_id.is_empty() {
            return Err(bad(0, "empty station id"));
        }
        let location = LonLat::new(num(1)?, num(2)?);
        if !region.contains(location) {
            let col = if location.lon < region.min_lon || location.lon > region.max_lon { 1 } else { 2 };
            return Err(bad(col, "outside configured region"));
        }
        let date = NaiveDate::parse_from_str(field(3), "%Y-%m-%d").map_err(|_| bad(3, "expected YYYY-MM-DD"))?;
        let trap_count = field(4).parse::<u32>().map_err(|_| bad(4, "expected a non-negative integer count"))?;
        let berry_infestation = num(5)?;
        if !(0.0..=100.0).contains(&berry_infestation) {
            return Err(bad(5, "percentage must lie in [0, 100]"));
        }
        let egg_rate = num(6)?;
        if egg_rate < 0.0 {
            return Err(bad(6, "percentage must be non-negative"));
        }
        out.push(StationObservation { station_id, location, date, trap_count, berry_infestation, egg_rate });
    }
    Ok(out)
}

pub fn write_observations<W: Write>(writer: W, records: &[StationObservation]) -> Result<(), IngestError> {
    let mut wtr = csv::Writer::from_writer(writer);
    wtr.write_record(OBSERVATION_HEADER)?;
    for r in records {
        wtr.write_record([
            r.station_id.clone(),
            r.location.lon.to_string(),
            r.location.lat.to_string(),
            r.date.format("%Y-%m-%d").to_string(),
            r.trap_count.to_string(),
            r.berry_infestation.to_string(),
            r.egg_rate.to_string(),
        ])?;
    }
    wtr.flush().map_err(|e| IngestError::Csv(e.into()))?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use super::*;
    use proptest::prelude::*;

    const REGION: BoundingBox = BoundingBox::new(7.0, 47.0, 11.0, 50.0);
    const HEADER: &str = "station_id,lon,lat,date,trap_count,berry_pct,egg_pct\n";

    fn parse(text: &str) -> Result<Vec<StationObservation>, IngestError> {
        parse_observations_from(text.as_bytes(), &REGION)
    }

    #[test]
    fn header_only_is_empty() {
        assert!(parse(HEADER).unwrap().is_empty());
    }

    #[test]
    fn egg_rate_above_100_is_accepted() {
        let recs = parse(&format!("{HEADER}S1,7.85,48.05,2016-09-14,12,35.0,120.0\n")).unwrap();
        assert_eq!(recs.len(), 1);
        assert_eq!(recs[0].egg_rate, 120.0);
        assert_eq!(recs[0].trap_count, 12);
        assert_eq!(recs[0].date, NaiveDate::from_ymd_opt(2016, 9, 14).unwrap());
    }

    #[test]
    fn berry_over_100_names_row_and_column() {
        let text = format!("{HEADER}S1,7.85,48.05,2016-09-14,12,35.0,120.0\nS2,7.9,48.1,2016-09-15,3,135.0,10\n");
        match parse(&text) {
            Err(IngestError::Field { row, column, value, .. }) => {
                assert_eq!(row, 2);
                assert_eq!(column, "berry_pct");
                assert_eq!(value, "135.0");
            }
            other => panic!("expected field error, got {other:?}"),
        }
    }

    #[test]
    fn malformed_header_rejected() {
        let err = parse("station,lon,lat\n").unwrap_err();
        assert!(matches!(err, IngestError::Header { .. }));
    }

    #[test]
    fn missing_file() {
        let err = parse_observations(Path::new("/nonexistent/obs.csv"), &REGION).unwrap_err();
        assert!(matches!(err, IngestError::MissingFile(_)));
    }

    #[test]
    fn negative_values_and_region() {
        assert!(matches!(
            parse(&format!("{HEADER}S1,7.85,48.05,2016-09-14,-1,35.0,1\n")),
            Err(IngestError::Field { ref column, .. }) if column == "trap_count"
        ));
        assert!(matches!(
            parse(&format!("{HEADER}S1,7.85,48.05,2016-09-14,1,35.0,-0.5\n")),
            Err(IngestError::Field { ref column, .. }) if column == "egg_pct"
        ));
        assert!(matches!(
            parse(&format!("{HEADER}S1,3.0,48.05,2016-09-14,1,35.0,1\n")),
            Err(IngestError::Field { ref column, .. }) if column == "lon"
        ));
        assert!(matches!(
            parse(&format!("{HEADER}S1,8.0,48.05,2016-13-14,1,35.0,1\n")),
            Err(IngestError::Field { ref column, .. }) if column == "date"
        ));
    }

    fn arb_obs() -> impl Strategy<Value = StationObservation> {
        ("[A-Z][0-9]{1,4}", 7.0f64..11.0, 47.0f64..50.0, 0i64..3000, 0u32..5000, 0.0f64..=100.0, 0.0f64..400.0).prop_map(
            |(id, lon, lat, day, trap, berry, egg)| StationObservation {
                station_id: id,
                location: LonLat::new(lon, lat),
                date: NaiveDate::from_ymd_opt(2013, 1, 1).unwrap() + chrono::Days::new(day as u64),
                trap_count: trap,
                berry_infestation: berry,
                egg_rate: egg,
            },
        )
    }

    proptest! {
        #[test]
        fn round_trip(records in proptest::collection::vec(arb_obs(), 0..20)) {
            let mut buf = Vec::new();
            write_observations(&mut buf, &records).unwrap();
            let back = parse_observations_from(buf.as_slice(), &REGION).unwrap();
            prop_assert_eq!(back, records);
        }

        #[test]
        fn parsed_records_satisfy_invariants(berry in -50.0f64..150.0, egg in -50.0f64..500.0, trap in -5i64..50) {
            let text = format!("{HEADER}S1,8.0,48.0,2015-06-01,{trap},{berry},{egg}\n");
            match parse(&text) {
                Ok(recs) => {
                    let r = &recs[0];
                    prop_assert!((0.0..=100.0).contains(&r.berry_infestation));
                    prop_assert!(r.egg_rate >= 0.0);
                }
                Err(IngestError::Field { .. }) => {
                    prop_assert!(!(0.0..=100.0).contains(&berry) || egg < 0.0 || trap < 0);
                }
                Err(e) => prop_assert!(false, "unexpected error {e}"),
            }
        }
    }
}
