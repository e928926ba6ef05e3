use std::str::FromStr;

use super::AlignedSeries;
use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformMode {
    /// `(ln(1 + x) - μ) / σ`
    Log1pStandardize,
    Standardize,
    None,
}

impl TransformMode {
    pub fn name(self) -> &'static str {
        match self {
            TransformMode::Log1pStandardize => "log1p_standardize",
            TransformMode::Standardize => "standardize",
            TransformMode::None => "none",
        }
    }
}

impl FromStr for TransformMode {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "log1p_standardize" => Ok(TransformMode::Log1pStandardize),
            "standardize" => Ok(TransformMode::Standardize),
            "none" => Ok(TransformMode::None),
            other => Err(Error::Config(format!(
                "unknown transform {other:?} (expected log1p_standardize, standardize or none)"
            ))),
        }
    }
}

/// Invertible per-series scaling, fitted once on training values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct SeriesScaler {
    pub mode: TransformMode,
    pub mean: f64,
    pub std: f64,
}

impl SeriesScaler {
    pub fn fit(mode: TransformMode, values: &[f64]) -> Result<Self> {
        if mode == TransformMode::None || values.is_empty() {
            return Ok(SeriesScaler {
                mode,
                mean: 0.0,
                std: 1.0,
            });
        }
        let pre = pre_map(mode, values)?;
        let n = pre.len() as f64;
        let mean = pre.iter().sum::<f64>() / n;
        let var = pre.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
        let std = if var > 0.0 { var.sqrt() } else { 1.0 };
        Ok(SeriesScaler { mode, mean, std })
    }

    pub fn transform(&self, values: &[f64]) -> Result<Vec<f64>> {
        if self.mode == TransformMode::None {
            return Ok(values.to_vec());
        }
        Ok(pre_map(self.mode, values)?
            .into_iter()
            .map(|v| (v - self.mean) / self.std)
            .collect())
    }

    pub fn inverse_value(&self, y: f64) -> f64 {
        match self.mode {
            TransformMode::None => y,
            TransformMode::Standardize => y * self.std + self.mean,
            TransformMode::Log1pStandardize => (y * self.std + self.mean).exp_m1(),
        }
    }

    pub fn inverse(&self, values: &[f64]) -> Vec<f64> {
        values.iter().map(|&y| self.inverse_value(y)).collect()
    }
}

fn pre_map(mode: TransformMode, values: &[f64]) -> Result<Vec<f64>> {
    match mode {
        TransformMode::Log1pStandardize => values
            .iter()
            .map(|&v| {
                if v > -1.0 {
                    Ok(v.ln_1p())
                } else {
                    Err(Error::Domain(format!("log1p transform needs values > -1, got {v}")))
                }
            })
            .collect(),
        _ => Ok(values.to_vec()),
    }
}

/// One [`SeriesScaler`] per series of an [`AlignedSeries`], target first.
#[derive(Clone, Debug, PartialEq)]
pub struct Scaler {
    pub series: Vec<SeriesScaler>,
}

impl Scaler {
    /// Fits on grid points `[0, fit_end)`, which must lie inside the
    /// training partition.
    pub fn fit(mode: TransformMode, s: &AlignedSeries, fit_end: usize) -> Result<Self> {
        let end = fit_end.min(s.len());
        let series = (0..s.m())
            .map(|i| SeriesScaler::fit(mode, &s.series(i)[..end]))
            .collect::<Result<_>>()?;
        Ok(Scaler { series })
    }

    pub fn target(&self) -> &SeriesScaler {
        &self.series[0]
    }

    pub fn apply(&self, s: &AlignedSeries) -> Result<AlignedSeries> {
        if s.m() != self.series.len() {
            return Err(Error::Data(format!(
                "scaler fitted on {} series, data has {}",
                self.series.len(),
                s.m()
            )));
        }
        let target = self.series[0].transform(&s.target)?;
        let auxiliaries = s
            .auxiliaries
            .iter()
            .zip(&self.series[1..])
            .map(|(a, sc)| sc.transform(a))
            .collect::<Result<_>>()?;
        AlignedSeries::new(s.start, s.step, target, auxiliaries, s.names.clone())
    }
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn none_is_identity() {
        let v = vec![3.0, -7.5, 0.0];
        let sc = SeriesScaler::fit(TransformMode::None, &v).unwrap();
        assert_eq!(sc.transform(&v).unwrap(), v);
        assert_eq!(sc.inverse(&v), v);
    }

    #[test]
    fn round_trips_on_random_series() {
        for seed in 0..10 {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            let v: Vec<f64> = (0..500).map(|_| rng.gen_range(0.0..50.0f64).powi(2)).collect();
            for mode in [TransformMode::Standardize, TransformMode::Log1pStandardize] {
                let sc = SeriesScaler::fit(mode, &v[..300]).unwrap();
                let back = sc.inverse(&sc.transform(&v).unwrap());
                for (a, b) in v.iter().zip(&back) {
                    assert!((a - b).abs() < 1e-9 * a.abs().max(1.0), "{mode:?}: {a} vs {b}");
                }
            }
        }
    }

    #[test]
    fn log1p_on_nonnegative_is_finite() {
        let v = vec![0.0, 0.0, 1e6, 3.5];
        let sc = SeriesScaler::fit(TransformMode::Log1pStandardize, &v).unwrap();
        assert!(sc.transform(&v).unwrap().iter().all(|x| x.is_finite()));
        assert!(sc.transform(&[-2.0]).is_err());
    }

    #[test]
    fn fitted_statistics_come_from_prefix_only() {
        let v = [1.0, 1.0, 1.0, 100.0];
        let sc = SeriesScaler::fit(TransformMode::Standardize, &v[..3]).unwrap();
        assert_eq!(sc.mean, 1.0);
        assert_eq!(sc.std, 1.0);
    }
}
