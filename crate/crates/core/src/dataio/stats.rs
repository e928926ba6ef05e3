use std::fmt;

use crate::error::{Error, Result};

/// Moment summary of a series, in series units.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct DatasetStats {
    pub min: f64,
    pub max: f64,
    pub mean: f64,
    pub std_deviation: f64,
    pub skewness: f64,
    pub kurtosis: f64,
}

/// Population moments: `std = sqrt(m2)`, `skewness = m3 / m2^1.5`,
/// `kurtosis = m4 / m2^2` (Pearson, not excess).
pub fn compute_stats(values: &[f64]) -> Result<DatasetStats> {
    if values.len() < 4 {
        return Err(Error::Contract(format!(
            "statistics need at least 4 values, got {}",
            values.len()
        )));
    }
    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let (mut m2, mut m3, mut m4) = (0.0, 0.0, 0.0);
    let (mut min, mut max) = (f64::INFINITY, f64::NEG_INFINITY);
    for &v in values {
        let d = v - mean;
        let d2 = d * d;
        m2 += d2;
        m3 += d2 * d;
        m4 += d2 * d2;
        min = min.min(v);
        max = max.max(v);
    }
    m2 /= n;
    m3 /= n;
    m4 /= n;
    if m2 == 0.0 {
        return Err(Error::Undefined(
            "skewness and kurtosis of a constant series".into(),
        ));
    }
    Ok(DatasetStats {
        min,
        max,
        mean,
        std_deviation: m2.sqrt(),
        skewness: m3 / m2.powf(1.5),
        kurtosis: m4 / (m2 * m2),
    })
}

impl fmt::Display for DatasetStats {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "min\t{:.2}", self.min)?;
        writeln!(f, "max\t{:.2}", self.max)?;
        writeln!(f, "mean\t{:.2}", self.mean)?;
        writeln!(f, "std. deviation\t{:.2}", self.std_deviation)?;
        writeln!(f, "skewness\t{:.2}", self.skewness)?;
        write!(f, "kurtosis\t{:.2}", self.kurtosis)
    }
}
