//! Series ingestion, alignment on a uniform grid, forecasting windows and
//! chronological splits.

mod align;
mod csvio;
mod split;
mod stats;
mod synth;
mod transform;
mod window;

use chrono::{DateTime, Duration, Utc};

pub use align::align;
pub use csvio::{load_csv, write_csv, ColumnMap, RawSeries};
pub use split::{chrono_split, ChronoCutoffs, Split, WindowSpan};
pub use stats::{compute_stats, DatasetStats};
pub use synth::{gen_synthetic, SynthParams};
pub use transform::{Scaler, SeriesScaler, TransformMode};
pub use window::{make_windows, window_count, window_origins, WindowRef, WindowSample};

use crate::error::{Error, Result};

/// Grid spacing of the sensor data.
pub fn default_step() -> Duration {
    Duration::minutes(15)
}

/// Target plus auxiliaries on a shared uniform grid; row 0 is the target.
#[derive(Clone, Debug, PartialEq)]
pub struct AlignedSeries {
    pub start: DateTime<Utc>,
    pub step: Duration,
    pub target: Vec<f64>,
    pub auxiliaries: Vec<Vec<f64>>,
    pub names: Vec<String>,
}

impl AlignedSeries {
    pub fn new(
        start: DateTime<Utc>,
        step: Duration,
        target: Vec<f64>,
        auxiliaries: Vec<Vec<f64>>,
        names: Vec<String>,
    ) -> Result<Self> {
        if auxiliaries.iter().any(|a| a.len() != target.len()) {
            return Err(Error::Data("all series must have equal length".into()));
        }
        if names.len() != auxiliaries.len() + 1 {
            return Err(Error::Data(format!(
                "{} names for {} series",
                names.len(),
                auxiliaries.len() + 1
            )));
        }
        if step <= Duration::zero() {
            return Err(Error::Data("grid step must be positive".into()));
        }
        if target
            .iter()
            .chain(auxiliaries.iter().flatten())
            .any(|v| !v.is_finite())
        {
            return Err(Error::Data("series contain non-finite values".into()));
        }
        Ok(AlignedSeries {
            start,
            step,
            target,
            auxiliaries,
            names,
        })
    }

    pub fn len(&self) -> usize {
        self.target.len()
    }

    pub fn is_empty(&self) -> bool {
        self.target.is_empty()
    }

    /// Number of series `m`, target included.
    pub fn m(&self) -> usize {
        self.auxiliaries.len() + 1
    }

    /// Series `i`, where 0 is the target.
    pub fn series(&self, i: usize) -> &[f64] {
        if i == 0 {
            &self.target
        } else {
            &self.auxiliaries[i - 1]
        }
    }

    pub fn timestamp(&self, index: usize) -> DateTime<Utc> {
        self.start + self.step * index as i32
    }

    /// Grid index of the first point at or after `ts`.
    pub fn index_at_or_after(&self, ts: DateTime<Utc>) -> usize {
        if ts <= self.start {
            return 0;
        }
        let step = self.step.num_seconds();
        let offset = (ts - self.start).num_seconds();
        (((offset + step - 1) / step) as usize).min(self.len())
    }

    /// Sub-range of the grid as a new series.
    pub fn slice(&self, range: std::ops::Range<usize>) -> AlignedSeries {
        AlignedSeries {
            start: self.timestamp(range.start),
            step: self.step,
            target: self.target[range.clone()].to_vec(),
            auxiliaries: self
                .auxiliaries
                .iter()
                .map(|a| a[range.clone()].to_vec())
                .collect(),
            names: self.names.clone(),
        }
    }

    /// The window whose input covers `[origin, origin + t)` and whose target
    /// covers the following `h` points of series 0.
    pub fn window_at(&self, origin: usize, t: usize, h: usize) -> Result<WindowSample> {
        if origin + t + h > self.len() || t == 0 || h == 0 {
            return Err(Error::Windowing {
                len: self.len().saturating_sub(origin),
                needed: t + h,
            });
        }
        let m = self.m();
        let mut input = Vec::with_capacity(m * t);
        for i in 0..m {
            input.extend_from_slice(&self.series(i)[origin..origin + t]);
        }
        Ok(WindowSample {
            input: crate::tensor::Tensor::new(vec![m, t], input)?,
            target: self.target[origin + t..origin + t + h].to_vec(),
            issue_index: origin + t - 1,
            is_oversampled: false,
        })
    }
}
