use std::io::{Read, Write};
use std::path::Path;

use super::{FeatureError, FeatureVector, Label, LabeledInstance, StationMonth};
use crate::ingest::CATEGORY_COUNT;

pub const INSTANCE_FIXED_COLUMNS: [&str; 6] = ["station_id", "year", "month", "score", "label", "height_m"];

fn header() -> Vec<String> {
    INSTANCE_FIXED_COLUMNS
        .iter()
        .map(|s| s.to_string())
        .chain((1..=CATEGORY_COUNT).map(|i| format!("lu_{i}")))
        .collect()
}

pub fn write_instances<W: Write>(writer: W, instances: &[LabeledInstance]) -> Result<(), FeatureError> {
    let mut w = csv::Writer::from_writer(writer);
    let csv_err = |e: csv::Error| FeatureError::Format(e.to_string());
    w.write_record(header()).map_err(csv_err)?;
    for inst in instances {
        let mut row = vec![
            inst.key.station_id.clone(),
            inst.key.year.to_string(),
            inst.key.month.to_string(),
            inst.score.to_string(),
            if inst.label.is_positive() { "1" } else { "0" }.to_string(),
            inst.features.height_m().to_string(),
        ];
        row.extend(inst.features.landuse().iter().map(f64::to_string));
        w.write_record(&row).map_err(csv_err)?;
    }
    w.flush().map_err(|e| FeatureError::Format(e.to_string()))
}

pub fn read_instances(path: &Path) -> Result<Vec<LabeledInstance>, FeatureError> {
    read_instances_from(crate::ingest::open(path)?)
}

pub fn read_instances_from<R: Read>(reader: R) -> Result<Vec<LabeledInstance>, FeatureError> {
    let mut rdr = csv::Reader::from_reader(reader);
    let fmt = |m: String| FeatureError::Format(m);
    let found = rdr.headers().map_err(|e| fmt(e.to_string()))?.clone();
    if found.iter().ne(header().iter().map(String::as_str)) {
        return Err(fmt("unexpected header; expected station_id,year,month,score,label,height_m,lu_1..lu_83".into()));
    }
    let mut out = Vec::new();
    for (i, rec) in rdr.records().enumerate() {
        let rec = rec.map_err(|e| fmt(e.to_string()))?;
        let row = i + 1;
        let num = |c: usize| -> Result<f64, FeatureError> {
            rec[c].parse::<f64>().map_err(|_| fmt(format!("row {row}, column `{}`: not a number", found.get(c).unwrap_or("?"))))
        };
        let month: u32 = rec[2].parse().ok().filter(|m| (1..=12).contains(m)).ok_or_else(|| fmt(format!("row {row}: bad month")))?;
        let year: i32 = rec[1].parse().map_err(|_| fmt(format!("row {row}: bad year")))?;
        let label = match &rec[4] {
            "1" => Label::Positive,
            "0" => Label::Negative,
            other => return Err(fmt(format!("row {row}: label must be 0 or 1, got `{other}`"))),
        };
        let landuse = (6..6 + CATEGORY_COUNT).map(num).collect::<Result<Vec<_>, _>>()?;
        out.push(LabeledInstance {
            key: StationMonth { station_id: rec[0].to_string(), year, month },
            features: FeatureVector::new(month as f64, num(5)?, &landuse)?,
            score: num(3)?,
            label,
        });
    }
    Ok(out)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn round_trip() {
        let mut lu = vec![0.0; CATEGORY_COUNT];
        lu[0] = 0.25;
        lu[82] = 0.125;
        let inst = LabeledInstance {
            key: StationMonth { station_id: "S9".into(), year: 2015, month: 9 },
            features: FeatureVector::new(9.0, 312.5, &lu).unwrap(),
            score: 1.0 / 3.0,
            label: Label::Positive,
        };
        let mut buf = Vec::new();
        write_instances(&mut buf, std::slice::from_ref(&inst)).unwrap();
        let text = String::from_utf8(buf.clone()).unwrap();
        assert!(text.starts_with("station_id,year,month,score,label,height_m,lu_1,"));
        assert_eq!(read_instances_from(buf.as_slice()).unwrap(), vec![inst]);
    }
}
