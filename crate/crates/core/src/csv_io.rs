//! CSV interchange for [`FeatureTable`]s.
//!
//! Layout: a `timestamp` column (ISO-8601, UTC) followed by numeric columns.
//! Conventional names are `wind_speed_mps`, `power_mw` and `nwp_*`.

use std::fs::File;
use std::io::{Read, Write};
use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};

use crate::error::{Error, Result};
use crate::series::{FeatureTable, SeriesKind, WindSeries, DEFAULT_STEP_S};

pub const TIMESTAMP: &str = "timestamp";
pub const WIND_SPEED: &str = "wind_speed_mps";
pub const POWER: &str = "power_mw";
pub const NWP_PREFIX: &str = "nwp_";

#[derive(Debug, Clone, PartialEq)]
pub struct ColumnSpec {
    pub header: String,
    pub kind: SeriesKind,
}

impl ColumnSpec {
    pub fn new(header: impl Into<String>, kind: SeriesKind) -> Self {
        Self {
            header: header.into(),
            kind,
        }
    }
}

/// Which CSV headers become table columns, and with which kind.
#[derive(Debug, Clone, PartialEq)]
pub struct CsvSchema {
    pub timestamp: String,
    pub columns: Vec<ColumnSpec>,
}

impl CsvSchema {
    pub fn new(columns: Vec<ColumnSpec>) -> Self {
        Self {
            timestamp: TIMESTAMP.to_string(),
            columns,
        }
    }

    /// Kind implied by the naming convention.
    pub fn conventional_kind(header: &str) -> SeriesKind {
        match header {
            WIND_SPEED => SeriesKind::Speed,
            POWER => SeriesKind::Power,
            h if h.starts_with(NWP_PREFIX) => SeriesKind::NwpFeature,
            _ => SeriesKind::Derived,
        }
    }

    /// Every non-timestamp header, typed by naming convention.
    pub fn infer<'a>(headers: impl IntoIterator<Item = &'a str>) -> Self {
        let columns = headers
            .into_iter()
            .filter(|h| *h != TIMESTAMP)
            .map(|h| ColumnSpec::new(h, Self::conventional_kind(h)))
            .collect();
        Self::new(columns)
    }
}

pub fn parse_timestamp(raw: &str) -> Option<DateTime<Utc>> {
    let raw = raw.trim();
    if let Ok(t) = DateTime::parse_from_rfc3339(raw) {
        return Some(t.with_timezone(&Utc));
    }
    ["%Y-%m-%dT%H:%M:%S", "%Y-%m-%d %H:%M:%S", "%Y-%m-%d %H:%M"]
        .iter()
        .find_map(|fmt| NaiveDateTime::parse_from_str(raw, fmt).ok())
        .map(|n| n.and_utc())
}

pub fn format_timestamp(t: DateTime<Utc>) -> String {
    t.format("%Y-%m-%dT%H:%M:%SZ").to_string()
}

pub fn load_csv(path: impl AsRef<Path>, schema: &CsvSchema) -> Result<FeatureTable> {
    read_csv(File::open(path)?, schema)
}

/// Load with a schema inferred from the header row.
pub fn load_csv_inferred(path: impl AsRef<Path>) -> Result<FeatureTable> {
    read_csv_inferred(File::open(path)?)
}

pub fn read_csv_inferred<R: Read>(reader: R) -> Result<FeatureTable> {
    let mut rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    let headers = rdr.headers()?.clone();
    if !headers.iter().any(|h| h == TIMESTAMP) {
        return Err(Error::MissingColumn(TIMESTAMP.to_string()));
    }
    let schema = CsvSchema::infer(headers.iter());
    read_records(rdr, &schema)
}

pub fn read_csv<R: Read>(reader: R, schema: &CsvSchema) -> Result<FeatureTable> {
    let rdr = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(reader);
    read_records(rdr, schema)
}

fn read_records<R: Read>(mut rdr: csv::Reader<R>, schema: &CsvSchema) -> Result<FeatureTable> {
    let headers = rdr.headers()?.clone();
    let position = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| Error::MissingColumn(name.to_string()))
    };
    let ts_col = position(&schema.timestamp)?;
    let cols = schema
        .columns
        .iter()
        .map(|c| position(&c.header))
        .collect::<Result<Vec<_>>>()?;

    let mut times: Vec<DateTime<Utc>> = Vec::new();
    let mut values: Vec<Vec<f64>> = vec![Vec::new(); cols.len()];
    let mut step: Option<i64> = None;

    for (row, record) in rdr.records().enumerate() {
        let record = record?;
        let raw_ts = record.get(ts_col).unwrap_or("");
        let t = parse_timestamp(raw_ts).ok_or_else(|| Error::ParseCell {
            row,
            column: schema.timestamp.clone(),
            value: raw_ts.to_string(),
        })?;
        if let Some(&prev) = times.last() {
            let dt = (t - prev).num_seconds();
            match step {
                None if dt > 0 => step = Some(dt),
                Some(s) if s == dt => {}
                _ => {
                    return Err(Error::NonUniformStep {
                        row,
                        expected_s: step.unwrap_or(DEFAULT_STEP_S),
                        found_s: dt,
                    })
                }
            }
        }
        times.push(t);

        for (slot, (&col, spec)) in cols.iter().zip(&schema.columns).enumerate() {
            let raw = record.get(col).unwrap_or("");
            let v: f64 = raw.parse().map_err(|_| Error::ParseCell {
                row,
                column: spec.header.clone(),
                value: raw.to_string(),
            })?;
            if !v.is_finite() {
                return Err(Error::NonFiniteValue {
                    row,
                    column: spec.header.clone(),
                });
            }
            values[slot].push(v);
        }
    }

    let start = *times.first().ok_or(Error::Empty)?;
    let step = step.unwrap_or(DEFAULT_STEP_S);
    let columns = values
        .into_iter()
        .zip(&schema.columns)
        .map(|(v, spec)| WindSeries::new(v, start, step, spec.kind, spec.header.clone()))
        .collect::<Result<Vec<_>>>()?;
    FeatureTable::new(columns)
}

/// Write a table with shortest round-trip float formatting.
pub fn write_csv<W: Write>(table: &FeatureTable, writer: W) -> Result<()> {
    let mut wtr = csv::Writer::from_writer(writer);
    let mut header = vec![TIMESTAMP.to_string()];
    header.extend(table.names().map(str::to_string));
    wtr.write_record(&header)?;
    let columns = table.columns();
    for i in 0..table.len() {
        let mut row = Vec::with_capacity(columns.len() + 1);
        row.push(format_timestamp(columns[0].time_at(i)));
        row.extend(columns.iter().map(|c| c.values()[i].to_string()));
        wtr.write_record(&row)?;
    }
    wtr.flush()?;
    Ok(())
}

pub fn save_csv(table: &FeatureTable, path: impl AsRef<Path>) -> Result<()> {
    write_csv(table, File::create(path)?)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn schema(cols: &[&str]) -> CsvSchema {
        CsvSchema::new(
            cols.iter()
                .map(|c| ColumnSpec::new(*c, CsvSchema::conventional_kind(c)))
                .collect(),
        )
    }

    #[test]
    fn three_rows_one_column() {
        let csv = "timestamp,wind_speed_mps\n\
                   2024-01-01T00:00:00Z,5.0\n\
                   2024-01-01T00:15:00Z,5.5\n\
                   2024-01-01T00:30:00Z,6.0\n";
        let t = read_csv(csv.as_bytes(), &schema(&[WIND_SPEED])).unwrap();
        assert_eq!(t.columns().len(), 1);
        assert_eq!(t.len(), 3);
        assert_eq!(t.step_s(), Some(900));
        assert_eq!(t.require(WIND_SPEED).unwrap().kind(), SeriesKind::Speed);
    }

    #[test]
    fn missing_row_is_non_uniform() {
        let csv = "timestamp,wind_speed_mps\n\
                   2024-01-01T00:00:00Z,5.0\n\
                   2024-01-01T00:15:00Z,5.5\n\
                   2024-01-01T00:45:00Z,6.0\n";
        let err = read_csv(csv.as_bytes(), &schema(&[WIND_SPEED])).unwrap_err();
        assert!(matches!(err, Error::NonUniformStep { row: 2, .. }));
    }

    #[test]
    fn two_nwp_columns_share_clock() {
        let csv = "timestamp,nwp_speed_70m,nwp_temperature_70m\n\
                   2024-01-01T00:00:00Z,5.0,12.0\n\
                   2024-01-01T00:15:00Z,5.5,12.1\n";
        let t = read_csv_inferred(csv.as_bytes()).unwrap();
        assert_eq!(t.columns().len(), 2);
        assert!(t.columns()[0].same_clock(&t.columns()[1]));
        assert_eq!(t.columns()[1].kind(), SeriesKind::NwpFeature);
    }

    #[test]
    fn error_paths() {
        let csv = "timestamp,wind_speed_mps\n2024-01-01T00:00:00Z,5.0\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &schema(&[POWER])),
            Err(Error::MissingColumn(c)) if c == POWER
        ));

        let csv = "timestamp,wind_speed_mps\n2024-01-01T00:00:00Z,NaN\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &schema(&[WIND_SPEED])),
            Err(Error::NonFiniteValue { .. })
        ));

        let csv = "timestamp,wind_speed_mps\n2024-01-01T00:00:00Z,fast\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &schema(&[WIND_SPEED])),
            Err(Error::ParseCell { .. })
        ));

        let csv = "timestamp,wind_speed_mps\n\
                   2024-01-01T00:15:00Z,5.0\n\
                   2024-01-01T00:00:00Z,5.0\n";
        assert!(matches!(
            read_csv(csv.as_bytes(), &schema(&[WIND_SPEED])),
            Err(Error::NonUniformStep { .. })
        ));
    }

    #[test]
    fn round_trip_keeps_values() {
        let csv = "timestamp,wind_speed_mps,power_mw\n\
                   2024-01-01T00:00:00Z,5.123456789,1.5\n\
                   2024-01-01T00:15:00Z,0.1,2.000000001\n";
        let t = read_csv_inferred(csv.as_bytes()).unwrap();
        let mut out = Vec::new();
        write_csv(&t, &mut out).unwrap();
        let back = read_csv_inferred(out.as_slice()).unwrap();
        assert_eq!(t, back);
        assert_eq!(String::from_utf8(out).unwrap(), csv);
    }

    mod props {
        use super::*;
        use proptest::prelude::*;

        proptest! {
            #[test]
            fn round_trip_nine_significant_digits(
                values in prop::collection::vec(0.0f64..1e4, 1..40)
            ) {
                let s = WindSeries::from_values(values.clone(), SeriesKind::Speed)
                    .unwrap()
                    .relabel(WIND_SPEED);
                let table = FeatureTable::new(vec![s]).unwrap();
                let mut out = Vec::new();
                write_csv(&table, &mut out).unwrap();
                let back = read_csv_inferred(out.as_slice()).unwrap();
                for (a, b) in values.iter().zip(back.columns()[0].values()) {
                    prop_assert!((a - b).abs() <= 1e-9 * a.abs().max(1e-300));
                }
            }
        }
    }
}
