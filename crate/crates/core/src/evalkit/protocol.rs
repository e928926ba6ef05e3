use std::fmt::Write as _;

use super::metrics::{mape_plus1, rmse};
use crate::dataio::AlignedSeries;
use crate::error::{Error, Result};

/// Anything that issues an `h`-step forecast, in original units, from the
/// data up to and including `issue` (a grid index of the evaluated series).
pub trait Forecaster {
    fn forecast(&self, series: &AlignedSeries, issue: usize) -> Result<Vec<f64>>;
}

impl<F> Forecaster for F
where
    F: Fn(&AlignedSeries, usize) -> Result<Vec<f64>>,
{
    fn forecast(&self, series: &AlignedSeries, issue: usize) -> Result<Vec<f64>> {
        self(series, issue)
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Protocol {
    pub t: usize,
    pub h: usize,
    pub issue_every: usize,
    pub short_steps: usize,
    /// Space issuances a full horizon apart instead of every `issue_every`.
    pub single_shot: bool,
}

impl Protocol {
    pub fn spacing(&self) -> usize {
        if self.single_shot {
            self.h
        } else {
            self.issue_every
        }
    }

    /// Issue indices: `t - 1 + k·spacing` while the horizon fits.
    pub fn issuances(&self, len: usize) -> Result<Vec<usize>> {
        if len < self.t + self.h {
            return Err(Error::Protocol(format!(
                "evaluation series has {len} points, needs t + h = {}",
                self.t + self.h
            )));
        }
        let count = (len - self.t - self.h) / self.spacing() + 1;
        Ok((0..count).map(|k| self.t - 1 + k * self.spacing()).collect())
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct IssuanceErrors {
    pub issue_index: usize,
    pub rmse_3d: f64,
    pub rmse_4h: f64,
}

/// Pooled step-level metrics in original units.
#[derive(Clone, Debug, PartialEq)]
pub struct EvalReport {
    pub rmse_3d: f64,
    pub mape_3d: f64,
    pub rmse_4h: f64,
    pub mape_4h: f64,
    pub issuances: Vec<IssuanceErrors>,
    pub protocol: Protocol,
    /// Free-form `(key, value)` pairs written after the metrics.
    pub metadata: Vec<(String, String)>,
}

impl EvalReport {
    pub fn aggregation(&self) -> &'static str {
        if self.protocol.single_shot {
            "pooled_single_shot"
        } else {
            "pooled_rolling"
        }
    }

    /// `key = value` lines in a fixed order.
    pub fn to_text(&self) -> String {
        let mut s = String::new();
        let p = &self.protocol;
        let _ = writeln!(s, "rmse_3d = {}", self.rmse_3d);
        let _ = writeln!(s, "mape_3d = {}", self.mape_3d);
        let _ = writeln!(s, "rmse_4h = {}", self.rmse_4h);
        let _ = writeln!(s, "mape_4h = {}", self.mape_4h);
        let _ = writeln!(s, "issuances = {}", self.issuances.len());
        let _ = writeln!(s, "aggregation = {}", self.aggregation());
        let _ = writeln!(s, "spacing = {}", p.spacing());
        let _ = writeln!(s, "horizon = {}", p.h);
        let _ = writeln!(s, "short_steps = {}", p.short_steps);
        for (k, v) in &self.metadata {
            let _ = writeln!(s, "{k} = {v}");
        }
        s
    }

    pub fn issuances_tsv(&self) -> String {
        let mut s = String::from("issue_index\trmse_3d\trmse_4h\n");
        for e in &self.issuances {
            let _ = writeln!(s, "{}\t{}\t{}", e.issue_index, e.rmse_3d, e.rmse_4h);
        }
        s
    }
}

/// Issues forecasts over `series` per `protocol` and scores them against
/// its target.
pub fn rolling_eval<F: Forecaster + ?Sized>(
    forecaster: &F,
    series: &AlignedSeries,
    protocol: &Protocol,
) -> Result<EvalReport> {
    let short = protocol.short_steps.min(protocol.h);
    if short == 0 {
        return Err(Error::Protocol("short_steps must be positive".into()));
    }
    let issues = protocol.issuances(series.len())?;
    let (mut p_all, mut t_all, mut p_short, mut t_short) = (vec![], vec![], vec![], vec![]);
    let mut per = Vec::with_capacity(issues.len());
    for issue in issues {
        let pred = forecaster.forecast(series, issue)?;
        if pred.len() != protocol.h {
            return Err(Error::Contract(format!(
                "forecaster returned {} steps, expected {}",
                pred.len(),
                protocol.h
            )));
        }
        let truth = &series.target[issue + 1..issue + 1 + protocol.h];
        per.push(IssuanceErrors {
            issue_index: issue,
            rmse_3d: rmse(&pred, truth)?,
            rmse_4h: rmse(&pred[..short], &truth[..short])?,
        });
        p_all.extend_from_slice(&pred);
        t_all.extend_from_slice(truth);
        p_short.extend_from_slice(&pred[..short]);
        t_short.extend_from_slice(&truth[..short]);
    }
    Ok(EvalReport {
        rmse_3d: rmse(&p_all, &t_all)?,
        mape_3d: mape_plus1(&p_all, &t_all)?,
        rmse_4h: rmse(&p_short, &t_short)?,
        mape_4h: mape_plus1(&p_short, &t_short)?,
        issuances: per,
        protocol: *protocol,
        metadata: Vec::new(),
    })
}
