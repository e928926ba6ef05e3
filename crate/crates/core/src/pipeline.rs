//! End-to-end driver: scaling, windows and splits, oversampling, training,
//! checkpoints and test-segment evaluation.

use std::path::{Path, PathBuf};

use chrono::Datelike;
use sha2::{Digest, Sha256};

use crate::aee::timestamp_features;
use crate::config::PfConfig;
use crate::dataio::{
    align, chrono_split, default_step, load_csv, window_origins, AlignedSeries, ChronoCutoffs,
    ColumnMap, Scaler, SeriesScaler, WindowRef,
};
use crate::error::{Error, Result};
use crate::evalkit::{rolling_eval, EvalReport, Forecaster, Protocol};
use crate::model::{Checkpoint, PfModel};
use crate::sampler::{cap_oversample, expand_peaks, fit_gmm, mark_important, GmmOptions, GmmParams};
use crate::tensor::{ParamSet, Tensor};
use crate::training::{mix_seed, train, History, SeriesWindows};

/// Loads one CSV per series (target first) and aligns them on the 15-minute grid.
pub fn load_series(target: &Path, auxiliaries: &[PathBuf], columns: &ColumnMap) -> Result<AlignedSeries> {
    let mut raw = vec![load_csv(target, columns)?];
    for p in auxiliaries {
        raw.push(load_csv(p, columns)?);
    }
    align(&raw, default_step())
}

/// `cfg` with the series count taken from the data.
pub fn resolve(cfg: &PfConfig, series: &AlignedSeries) -> Result<PfConfig> {
    let mut out = *cfg;
    out.model.m = series.m();
    out.validate()?;
    Ok(out)
}

/// Short hex digest of the rendered config.
pub fn config_hash(cfg: &PfConfig) -> String {
    let digest = Sha256::digest(cfg.to_text().as_bytes());
    digest.iter().take(8).map(|b| format!("{b:02x}")).collect()
}

fn in_season(series: &AlignedSeries, issue: usize) -> bool {
    !matches!(series.timestamp(issue).month(), 6..=8)
}

/// Windows and fitted statistics ready for training.
#[derive(Clone, Debug)]
pub struct Prepared {
    pub scaled: AlignedSeries,
    pub scaler: Scaler,
    pub cutoffs: ChronoCutoffs,
    pub train: Vec<WindowRef>,
    pub validation: Vec<WindowRef>,
    pub gmm: Option<GmmParams>,
    pub threshold: Option<f64>,
    pub peaks: Vec<usize>,
    pub base_train: usize,
    pub oversampled: usize,
}

pub fn prepare(series: &AlignedSeries, cfg: &PfConfig) -> Result<Prepared> {
    let (t, h) = (cfg.model.t, cfg.model.h);
    let cutoffs = ChronoCutoffs::from_fractions(series.len(), cfg.data.val_fraction, cfg.data.test_fraction);
    if cutoffs.validation_start < t + h {
        return Err(Error::Windowing {
            len: cutoffs.validation_start,
            needed: t + h,
        });
    }
    let scaler = Scaler::fit(cfg.data.transform, series, cutoffs.validation_start)?;
    let scaled = scaler.apply(series)?;

    let keep = |w: &WindowRef| !cfg.data.season_mask || in_season(series, w.issue_index);
    let windows: Vec<WindowRef> = window_origins(series.len(), t, h, cfg.data.stride)?
        .into_iter()
        .map(|o| WindowRef::from_origin(o, t))
        .filter(keep)
        .collect();
    let split = chrono_split(windows, h, cutoffs);
    let base_train = split.train.len();
    // first grid index a training window may not touch
    let train_limit = split
        .validation
        .iter()
        .chain(&split.test)
        .map(|w| w.issue_index + 1)
        .min()
        .unwrap_or(cutoffs.validation_start)
        .min(cutoffs.validation_start);

    let (mut gmm, mut threshold, mut peaks) = (None, None, Vec::new());
    let mut train_windows = split.train;
    if cfg.sampler.enabled {
        let values = &series.target[..train_limit];
        let opts = GmmOptions {
            max_iter: cfg.sampler.max_iter,
            tol: cfg.sampler.tol,
            seed: mix_seed(&[cfg.seed, 2]),
        };
        let fitted = fit_gmm(values, cfg.sampler.components, opts)?;
        let policy = cfg.sampler.policy;
        let z = fitted.highest_mean();
        peaks = mark_important(values, policy.eta, z, policy.nu);
        let extra: Vec<WindowRef> = expand_peaks(&peaks, policy.s_step, policy.nu, series.len(), t, h)
            .into_iter()
            .map(|o| WindowRef::from_origin(o, t))
            .filter(|w| w.issue_index + h < train_limit)
            .filter(keep)
            .collect();
        train_windows = cap_oversample(train_windows, extra, policy.os_pct, mix_seed(&[cfg.seed, 3]));
        threshold = Some(policy.eta * z);
        gmm = Some(fitted);
    }
    let oversampled = train_windows.len() - base_train;
    Ok(Prepared {
        scaled,
        scaler,
        cutoffs,
        train: train_windows,
        validation: split.validation,
        gmm,
        threshold,
        peaks,
        base_train,
        oversampled,
    })
}

/// A trained network with everything needed to forecast in original units.
#[derive(Clone, Debug)]
pub struct TrainedModel {
    pub cfg: PfConfig,
    pub model: PfModel,
    pub params: ParamSet,
    pub scaler: Scaler,
}

#[derive(Clone, Debug)]
pub struct TrainRun {
    pub trained: TrainedModel,
    pub history: History,
    pub prepared: Prepared,
}

pub fn run_training(series: &AlignedSeries, cfg: &PfConfig) -> Result<TrainRun> {
    let cfg = resolve(cfg, series)?;
    let prepared = prepare(series, &cfg)?;
    let (model, params) = PfModel::new(cfg.model, mix_seed(&[cfg.seed, 1]))?;
    let (t, h) = (cfg.model.t, cfg.model.h);
    let view = |w: &[WindowRef]| SeriesWindows {
        series: &prepared.scaled,
        windows: w.to_vec(),
        t,
        h,
    };
    let outcome = train(
        &model,
        params,
        view(&prepared.train),
        view(&prepared.validation),
        &cfg.train,
        cfg.seed,
    )?;
    Ok(TrainRun {
        trained: TrainedModel {
            cfg,
            model,
            params: outcome.params,
            scaler: prepared.scaler.clone(),
        },
        history: outcome.history,
        prepared,
    })
}

impl TrainedModel {
    pub fn to_checkpoint(&self) -> Checkpoint {
        let mut ckpt = Checkpoint::from_params(self.cfg.to_text(), &self.params);
        let stat = |f: fn(&SeriesScaler) -> f64| {
            Tensor::vector(self.scaler.series.iter().map(f).collect())
        };
        ckpt.tensors.push(("scaler.mean".into(), stat(|s| s.mean)));
        ckpt.tensors.push(("scaler.std".into(), stat(|s| s.std)));
        ckpt
    }

    pub fn from_checkpoint(ckpt: &Checkpoint) -> Result<Self> {
        let cfg = PfConfig::parse(&ckpt.config)
            .map_err(|e| Error::Checkpoint(format!("stored config: {e}")))?;
        let (model, mut params) = PfModel::new(cfg.model, mix_seed(&[cfg.seed, 1]))?;
        ckpt.restore_into(&mut params)?;
        let get = |name: &str| {
            ckpt.get(name)
                .ok_or_else(|| Error::Checkpoint(format!("missing {name}")))
        };
        let (mean, std) = (get("scaler.mean")?, get("scaler.std")?);
        if mean.len() != cfg.model.m || std.len() != cfg.model.m {
            return Err(Error::Checkpoint("scaler size does not match model.m".into()));
        }
        let scaler = Scaler {
            series: mean
                .data()
                .iter()
                .zip(std.data())
                .map(|(&mean, &std)| SeriesScaler {
                    mode: cfg.data.transform,
                    mean,
                    std,
                })
                .collect(),
        };
        Ok(TrainedModel {
            cfg,
            model,
            params,
            scaler,
        })
    }

    pub fn save(&self, path: &Path) -> Result<()> {
        self.to_checkpoint().save(path)
    }

    pub fn load(path: &Path) -> Result<Self> {
        Self::from_checkpoint(&Checkpoint::load(path)?)
    }

    /// Forecast issued at grid index `issue` of `series` (original units).
    pub fn forecast_at(&self, series: &AlignedSeries, issue: usize) -> Result<Vec<f64>> {
        let t = self.cfg.model.t;
        if issue + 1 < t {
            return Err(Error::Windowing {
                len: issue + 1,
                needed: t,
            });
        }
        if series.m() != self.cfg.model.m {
            return Err(Error::Data(format!(
                "model expects {} series, data has {}",
                self.cfg.model.m,
                series.m()
            )));
        }
        let origin = issue + 1 - t;
        let mut input = Vec::with_capacity(series.m() * t);
        for i in 0..series.m() {
            let raw = &series.series(i)[origin..=issue];
            input.extend(self.scaler.series[i].transform(raw)?);
        }
        let window = Tensor::new(vec![series.m(), t], input)?;
        let features = timestamp_features(series.timestamp(issue), self.cfg.model.h, series.step);
        let y = self.model.predict(&self.params, &window, &features)?;
        Ok(self.scaler.target().inverse(&y))
    }

    pub fn protocol(&self) -> Protocol {
        Protocol {
            t: self.cfg.model.t,
            h: self.cfg.model.h,
            issue_every: self.cfg.eval.issue_every,
            short_steps: self.cfg.eval.short_steps,
            single_shot: self.cfg.eval.single_shot,
        }
    }
}

impl Forecaster for TrainedModel {
    fn forecast(&self, series: &AlignedSeries, issue: usize) -> Result<Vec<f64>> {
        self.forecast_at(series, issue)
    }
}

/// The test segment with `t` points of history before its first target.
pub fn test_segment(series: &AlignedSeries, cfg: &PfConfig) -> AlignedSeries {
    let cut = ChronoCutoffs::from_fractions(series.len(), cfg.data.val_fraction, cfg.data.test_fraction);
    series.slice(cut.test_start.saturating_sub(cfg.model.t)..series.len())
}

/// Rolling evaluation of `trained` over `series`.
pub fn evaluate(trained: &TrainedModel, series: &AlignedSeries, dataset: &str) -> Result<EvalReport> {
    let mut report = rolling_eval(trained, series, &trained.protocol())?;
    report.metadata = vec![
        ("config_hash".into(), config_hash(&trained.cfg)),
        ("dataset".into(), dataset.into()),
        ("seed".into(), trained.cfg.seed.to_string()),
        ("embedding_mode".into(), trained.cfg.model.embedding_mode.to_string()),
    ];
    Ok(report)
}

/// Trains on `series` and evaluates on its test segment.
pub fn train_and_evaluate(series: &AlignedSeries, cfg: &PfConfig, dataset: &str) -> Result<(TrainRun, EvalReport)> {
    let run = run_training(series, cfg)?;
    let report = evaluate(&run.trained, &test_segment(series, &run.trained.cfg), dataset)?;
    Ok((run, report))
}

#[cfg(test)]
mod tests {
    use super::*;
    use crate::dataio::{gen_synthetic, SynthParams};

    fn small_cfg() -> PfConfig {
        let mut cfg = PfConfig::default();
        cfg.apply_text(
            "model.d_model = 8\nmodel.n_heads = 2\nmodel.n_enc_layers = 1\nmodel.ffn_width = 8\n\
             model.t = 24\nmodel.h = 8\nefe.s = 4\naee.hidden = 4\naee.layers = 1\n\
             train.max_epochs = 2\ntrain.batch_size = 16\ntrain.s_short = 4\ntrain.lr = 0.005\n\
             data.stride = 8\neval.short_steps = 4\neval.issue_every = 8\n",
        )
        .unwrap();
        cfg
    }

    fn data() -> AlignedSeries {
        gen_synthetic(&SynthParams {
            seed: 4,
            length: 1500,
            peak_rate: 0.01,
            ..Default::default()
        })
        .unwrap()
    }

    #[test]
    fn prepared_windows_respect_partitions() {
        let s = data();
        let cfg = resolve(&small_cfg(), &s).unwrap();
        let p = prepare(&s, &cfg).unwrap();
        let limit = p.validation.iter().map(|w| w.issue_index + 1).min().unwrap();
        assert!(p.train.iter().all(|w| w.issue_index + cfg.model.h < limit));
        assert!(p.validation.iter().all(|w| w.issue_index + cfg.model.h < p.cutoffs.test_start));
        assert!(p.oversampled > 0 && p.oversampled <= p.train.len() / 5 + 1);
        assert_eq!(p.train.iter().filter(|w| w.is_oversampled).count(), p.oversampled);
    }

    #[test]
    fn checkpoint_round_trip_predicts_identically() {
        let s = data();
        let (run, report) = train_and_evaluate(&s, &small_cfg(), "synthetic").unwrap();
        assert!(report.rmse_3d.is_finite());
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("model.ckpt");
        run.trained.save(&path).unwrap();
        let back = TrainedModel::load(&path).unwrap();
        assert_eq!(back.cfg, run.trained.cfg);
        let issue = s.len() - 100;
        assert_eq!(back.forecast_at(&s, issue).unwrap(), run.trained.forecast_at(&s, issue).unwrap());
    }

    #[test]
    fn perfect_oracle_is_transform_independent() {
        let s = data();
        for mode in ["none", "standardize", "log1p_standardize"] {
            let mut cfg = small_cfg();
            cfg.set("data.transform", mode).unwrap();
            let cfg = resolve(&cfg, &s).unwrap();
            let p = prepare(&s, &cfg).unwrap();
            let seg = test_segment(&s, &cfg);
            let h = cfg.model.h;
            // the truth, pushed through model space and back
            let oracle = |x: &AlignedSeries, i: usize| {
                let sc = p.scaler.target();
                Ok(sc.inverse(&sc.transform(&x.target[i + 1..i + 1 + h])?))
            };
            let protocol = Protocol {
                t: cfg.model.t,
                h,
                issue_every: 8,
                short_steps: 4,
                single_shot: false,
            };
            let r = rolling_eval(&oracle, &seg, &protocol).unwrap();
            assert!(r.rmse_3d < 1e-9 && r.mape_3d < 1e-9 && r.rmse_4h < 1e-9, "{mode}");
        }
    }
}
