use chrono::{DateTime, Duration, TimeZone, Utc};

use super::{AlignedSeries, RawSeries};
use crate::error::{Error, Result};

fn floor_to_grid(ts: DateTime<Utc>, step: Duration) -> DateTime<Utc> {
    let s = step.num_seconds();
    let secs = ts.timestamp().div_euclid(s) * s;
    Utc.timestamp_opt(secs, 0).unwrap()
}

/// Resamples every series onto a shared grid over the intersection of their
/// time ranges. Point `g` takes the latest known reading at or before `g`
/// (forward fill); points before a series' first reading are 0.
///
/// The first series becomes the target.
pub fn align(series: &[RawSeries], step: Duration) -> Result<AlignedSeries> {
    if series.is_empty() {
        return Err(Error::Alignment("no series given".into()));
    }
    if step.num_seconds() <= 0 {
        return Err(Error::Alignment("step must be at least one second".into()));
    }
    let mut start = None;
    let mut end = None;
    for s in series {
        let (Some(first), Some(last)) = (s.records.first(), s.records.last()) else {
            return Err(Error::Alignment(format!("series {:?} is empty", s.name)));
        };
        start = Some(start.map_or(first.0, |v: DateTime<Utc>| v.max(first.0)));
        end = Some(end.map_or(last.0, |v: DateTime<Utc>| v.min(last.0)));
    }
    let start = floor_to_grid(start.unwrap(), step);
    let end = end.unwrap();
    if start > end {
        return Err(Error::Alignment(
            "time ranges of the series do not overlap".into(),
        ));
    }
    let n = ((end - start).num_seconds() / step.num_seconds()) as usize + 1;

    let mut columns = Vec::with_capacity(series.len());
    for s in series {
        let mut out = Vec::with_capacity(n);
        let mut cursor = 0;
        let mut last = None;
        for k in 0..n {
            let g = start + step * k as i32;
            while cursor < s.records.len() && s.records[cursor].0 <= g {
                if let Some(v) = s.records[cursor].1 {
                    last = Some(v);
                }
                cursor += 1;
            }
            out.push(last.unwrap_or(0.0));
        }
        columns.push(out);
    }
    let target = columns.remove(0);
    let names = series.iter().map(|s| s.name.clone()).collect();
    AlignedSeries::new(start, step, target, columns, names)
}

#[cfg(test)]
mod tests {
    use super::*;

    fn raw(name: &str, start_min: i64, values: &[Option<f64>]) -> RawSeries {
        let t0 = Utc.with_ymd_and_hms(2021, 9, 1, 0, 0, 0).unwrap();
        RawSeries {
            name: name.into(),
            records: values
                .iter()
                .enumerate()
                .map(|(i, v)| (t0 + Duration::minutes(start_min + 15 * i as i64), *v))
                .collect(),
        }
    }

    #[test]
    fn aligned_inputs_unchanged() {
        let a = raw("flow", 0, &[Some(1.0), Some(2.0), Some(3.0)]);
        let b = raw("rain", 0, &[Some(0.0), Some(5.0), Some(0.5)]);
        let s = align(&[a, b], Duration::minutes(15)).unwrap();
        assert_eq!(s.target, vec![1.0, 2.0, 3.0]);
        assert_eq!(s.auxiliaries[0], vec![0.0, 5.0, 0.5]);
        assert_eq!(s.names, vec!["flow", "rain"]);
    }

    #[test]
    fn missing_step_is_forward_filled() {
        let mut a = raw("flow", 0, &[Some(1.0), Some(2.0), Some(3.0), Some(4.0)]);
        a.records.remove(2);
        let s = align(&[a], Duration::minutes(15)).unwrap();
        assert_eq!(s.target, vec![1.0, 2.0, 2.0, 4.0]);

        let b = raw("flow", 0, &[Some(1.0), None, Some(3.0)]);
        let s = align(&[b], Duration::minutes(15)).unwrap();
        assert_eq!(s.target, vec![1.0, 1.0, 3.0]);
    }

    #[test]
    fn leading_gap_in_auxiliary_is_zero() {
        let a = raw("flow", 0, &[Some(1.0), Some(2.0), Some(3.0)]);
        let b = raw("rain", 0, &[None, None, Some(7.0)]);
        let s = align(&[a, b], Duration::minutes(15)).unwrap();
        assert_eq!(s.auxiliaries[0], vec![0.0, 0.0, 7.0]);

        // An auxiliary starting between grid points leaves the first point empty.
        let c = raw("rain", 5, &[Some(4.0), Some(6.0)]);
        let a = raw("flow", 0, &[Some(1.0), Some(2.0), Some(3.0)]);
        let s = align(&[a, c], Duration::minutes(15)).unwrap();
        assert_eq!(s.auxiliaries[0][0], 0.0);
        assert_eq!(s.auxiliaries[0][1], 4.0);
    }

    #[test]
    fn disjoint_ranges_fail() {
        let a = raw("flow", 0, &[Some(1.0), Some(2.0)]);
        let b = raw("rain", 600, &[Some(1.0)]);
        assert!(matches!(
            align(&[a, b], Duration::minutes(15)),
            Err(Error::Alignment(_))
        ));
    }
}
