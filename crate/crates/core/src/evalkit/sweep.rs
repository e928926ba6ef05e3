use std::fmt;
use std::str::FromStr;

use super::EvalReport;
use crate::config::PfConfig;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum SweepAxis {
    OsPct,
    SEfe,
    Alpha,
    EmbeddingMode,
}

impl SweepAxis {
    pub fn name(self) -> &'static str {
        match self {
            SweepAxis::OsPct => "os_pct",
            SweepAxis::SEfe => "s_efe",
            SweepAxis::Alpha => "alpha",
            SweepAxis::EmbeddingMode => "embedding_mode",
        }
    }

    /// Config key the axis writes to.
    pub fn key(self) -> &'static str {
        match self {
            SweepAxis::OsPct => "sampler.os_pct",
            SweepAxis::SEfe => "efe.s",
            SweepAxis::Alpha => "train.alpha",
            SweepAxis::EmbeddingMode => "model.embedding_mode",
        }
    }
}

impl fmt::Display for SweepAxis {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for SweepAxis {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        [SweepAxis::OsPct, SweepAxis::SEfe, SweepAxis::Alpha, SweepAxis::EmbeddingMode]
            .into_iter()
            .find(|a| a.name() == s)
            .ok_or_else(|| {
                Error::Config(format!(
                    "unknown sweep axis {s:?} (expected os_pct, s_efe, alpha or embedding_mode)"
                ))
            })
    }
}

#[derive(Clone, Debug, PartialEq)]
pub struct SweepRow {
    pub x: String,
    pub rmse_3d: f64,
    pub rmse_4h: f64,
}

/// Runs `run` once per value with only the swept key changed. Errors carry
/// the axis value that produced them.
pub fn sweep<F>(axis: SweepAxis, values: &[String], base: &PfConfig, mut run: F) -> Result<Vec<SweepRow>>
where
    F: FnMut(&PfConfig) -> Result<EvalReport>,
{
    if values.is_empty() {
        return Err(Error::Config("sweep needs at least one value".into()));
    }
    let wrap = |value: &str, e: Error| Error::Sweep {
        axis: axis.name().into(),
        value: value.into(),
        source: Box::new(e),
    };
    let mut rows = Vec::with_capacity(values.len());
    for value in values {
        let mut cfg = *base;
        cfg.set(axis.key(), value).map_err(|e| wrap(value, e))?;
        cfg.validate().map_err(|e| wrap(value, e))?;
        let report = run(&cfg).map_err(|e| wrap(value, e))?;
        rows.push(SweepRow {
            x: value.clone(),
            rmse_3d: report.rmse_3d,
            rmse_4h: report.rmse_4h,
        });
    }
    Ok(rows)
}

/// Plot data: `x<TAB>rmse_3d<TAB>rmse_4h` with a header line.
pub fn plot_tsv(rows: &[SweepRow]) -> String {
    let mut s = String::from("x\trmse_3d\trmse_4h\n");
    for r in rows {
        s.push_str(&format!("{}\t{}\t{}\n", r.x, r.rmse_3d, r.rmse_4h));
    }
    s
}
