use std::path::Path;

use chrono::{DateTime, NaiveDateTime, Utc};

use crate::error::{Error, Result};

/// Header names of the timestamp and value columns.
#[derive(Clone, Debug)]
pub struct ColumnMap {
    pub timestamp: String,
    pub value: String,
}

impl Default for ColumnMap {
    fn default() -> Self {
        ColumnMap {
            timestamp: "timestamp".into(),
            value: "value".into(),
        }
    }
}

/// One sensor series as read from disk, sorted by timestamp. `None` marks a
/// missing reading (empty field or `NaN`).
#[derive(Clone, Debug, PartialEq)]
pub struct RawSeries {
    pub name: String,
    pub records: Vec<(DateTime<Utc>, Option<f64>)>,
}

pub(crate) fn parse_timestamp(s: &str) -> Option<DateTime<Utc>> {
    let s = s.trim();
    if let Ok(ts) = DateTime::parse_from_rfc3339(s) {
        return Some(ts.with_timezone(&Utc));
    }
    const FORMATS: [&str; 4] = [
        "%Y-%m-%dT%H:%M:%S%.f",
        "%Y-%m-%dT%H:%M",
        "%Y-%m-%d %H:%M:%S%.f",
        "%Y-%m-%d %H:%M",
    ];
    FORMATS
        .iter()
        .find_map(|f| NaiveDateTime::parse_from_str(s, f).ok())
        .map(|n| n.and_utc())
}

pub fn load_csv(path: &Path, columns: &ColumnMap) -> Result<RawSeries> {
    let parse_err = |line: u64, msg: String| Error::Parse {
        path: path.to_path_buf(),
        line,
        msg,
    };
    let mut reader = csv::ReaderBuilder::new()
        .trim(csv::Trim::All)
        .from_path(path)
        .map_err(|e| match e.into_kind() {
            csv::ErrorKind::Io(io) => Error::Io(io),
            other => parse_err(1, format!("{other:?}")),
        })?;
    let headers = reader
        .headers()
        .map_err(|e| parse_err(1, e.to_string()))?
        .clone();
    let find = |name: &str| {
        headers
            .iter()
            .position(|h| h == name)
            .ok_or_else(|| parse_err(1, format!("missing column {name:?}")))
    };
    let ts_col = find(&columns.timestamp)?;
    let val_col = find(&columns.value)?;

    let mut records = Vec::new();
    for row in reader.records() {
        let row = row.map_err(|e| {
            let line = e.position().map_or(0, |p| p.line());
            parse_err(line, e.to_string())
        })?;
        let line = row.position().map_or(0, |p| p.line());
        let ts_raw = row.get(ts_col).unwrap_or("");
        let ts = parse_timestamp(ts_raw)
            .ok_or_else(|| parse_err(line, format!("invalid timestamp {ts_raw:?}")))?;
        let val_raw = row.get(val_col).unwrap_or("");
        let value = if val_raw.is_empty() || val_raw.eq_ignore_ascii_case("nan") {
            None
        } else {
            let v: f64 = val_raw
                .parse()
                .map_err(|_| parse_err(line, format!("invalid value {val_raw:?}")))?;
            if !v.is_finite() {
                return Err(parse_err(line, format!("non-finite value {val_raw:?}")));
            }
            Some(v)
        };
        records.push((ts, value));
    }
    records.sort_by_key(|r| r.0);
    if let Some(w) = records.windows(2).find(|w| w[0].0 == w[1].0) {
        return Err(Error::Data(format!(
            "{}: duplicate timestamp {}",
            path.display(),
            w[0].0.to_rfc3339()
        )));
    }
    let name = path
        .file_stem()
        .map(|s| s.to_string_lossy().into_owned())
        .unwrap_or_default();
    Ok(RawSeries { name, records })
}

/// Writes `timestamp,value` rows with RFC 3339 timestamps.
pub fn write_csv(
    path: &Path,
    start: DateTime<Utc>,
    step: chrono::Duration,
    values: &[f64],
) -> Result<()> {
    let mut w = csv::Writer::from_path(path).map_err(|e| Error::Data(e.to_string()))?;
    w.write_record(["timestamp", "value"])
        .map_err(|e| Error::Data(e.to_string()))?;
    for (i, v) in values.iter().enumerate() {
        let ts = start + step * i as i32;
        w.write_record([
            ts.to_rfc3339_opts(chrono::SecondsFormat::Secs, true),
            format!("{v}"),
        ])
        .map_err(|e| Error::Data(e.to_string()))?;
    }
    w.flush()?;
    Ok(())
}

#[cfg(test)]
mod tests {
    use std::io::Write;

    use super::*;

    fn write(contents: &str) -> tempfile::NamedTempFile {
        let mut f = tempfile::Builder::new().suffix(".csv").tempfile().unwrap();
        f.write_all(contents.as_bytes()).unwrap();
        f
    }

    #[test]
    fn reads_well_formed_file() {
        let f = write(
            "timestamp,value\n2021-09-01T00:00,1.5\n2021-09-01T00:15,2\n2021-09-01T00:30,0\n",
        );
        let s = load_csv(f.path(), &ColumnMap::default()).unwrap();
        assert_eq!(s.records.len(), 3);
        assert_eq!(s.records[1].1, Some(2.0));
    }

    #[test]
    fn invalid_number_reports_line() {
        let f = write("timestamp,value\n2021-09-01T00:00,1\n2021-09-01T00:15,abc\n");
        match load_csv(f.path(), &ColumnMap::default()) {
            Err(Error::Parse { line, msg, .. }) => {
                assert_eq!(line, 3);
                assert!(msg.contains("abc"));
            }
            other => panic!("expected parse error, got {other:?}"),
        }
    }

    #[test]
    fn unsorted_input_is_sorted() {
        let f = write(
            "timestamp,value\n2021-09-01T00:30,3\n2021-09-01T00:00,1\n2021-09-01T00:15,2\n",
        );
        let s = load_csv(f.path(), &ColumnMap::default()).unwrap();
        let mut expected = s.records.clone();
        expected.sort_by_key(|r| r.0);
        assert_eq!(s.records, expected);
        let values: Vec<_> = s.records.iter().map(|r| r.1.unwrap()).collect();
        assert_eq!(values, vec![1.0, 2.0, 3.0]);
    }

    #[test]
    fn duplicate_timestamps_rejected() {
        let f = write("timestamp,value\n2021-09-01T00:00,1\n2021-09-01T00:00,2\n");
        assert!(matches!(
            load_csv(f.path(), &ColumnMap::default()),
            Err(Error::Data(_))
        ));
    }

    #[test]
    fn blank_and_nan_are_missing() {
        let f = write("timestamp,value\n2021-09-01T00:00,\n2021-09-01T00:15,NaN\n");
        let s = load_csv(f.path(), &ColumnMap::default()).unwrap();
        assert!(s.records.iter().all(|r| r.1.is_none()));
    }

    #[test]
    fn custom_column_names() {
        let f = write("time,flow,extra\n2021-09-01 00:00:00,4,x\n");
        let cols = ColumnMap {
            timestamp: "time".into(),
            value: "flow".into(),
        };
        let s = load_csv(f.path(), &cols).unwrap();
        assert_eq!(s.records[0].1, Some(4.0));
    }
}
