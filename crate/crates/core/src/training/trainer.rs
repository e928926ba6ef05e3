use rand::seq::SliceRandom;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use super::{loss, mix_seed, run_epochs, AdamState, EpochRunner, History, TrainConfig};
use crate::aee::timestamp_features;
use crate::dataio::{AlignedSeries, WindowRef};
use crate::error::{Error, Result};
use crate::model::{Dropout, PfModel};
use crate::tensor::{ParamSet, Tape, Tensor};

/// Windows of a (scaled) series, referenced by issue index.
#[derive(Clone, Debug)]
pub struct SeriesWindows<'a> {
    pub series: &'a AlignedSeries,
    pub windows: Vec<WindowRef>,
    pub t: usize,
    pub h: usize,
}

impl SeriesWindows<'_> {
    pub fn len(&self) -> usize {
        self.windows.len()
    }

    pub fn is_empty(&self) -> bool {
        self.windows.is_empty()
    }

    /// Input matrix, target and forecast time-stamp features of window `i`.
    pub fn sample(&self, i: usize) -> Result<(Tensor, Tensor, Tensor)> {
        let w = &self.windows[i];
        let s = self.series.window_at(w.origin(self.t), self.t, self.h)?;
        let features = timestamp_features(self.series.timestamp(w.issue_index), self.h, self.series.step);
        Ok((s.input, Tensor::vector(s.target), features))
    }
}

#[derive(Clone, Debug)]
pub struct TrainOutcome {
    /// Parameters of the epoch with the lowest validation loss.
    pub params: ParamSet,
    pub history: History,
}

pub struct Trainer<'a> {
    pub model: &'a PfModel,
    pub params: ParamSet,
    pub best: ParamSet,
    pub adam: AdamState,
    pub train: SeriesWindows<'a>,
    pub val: SeriesWindows<'a>,
    pub cfg: TrainConfig,
    pub seed: u64,
}

impl Trainer<'_> {
    /// Loss of one window; with `dropout` set, its gradient is added to the
    /// parameter grads.
    fn window_loss(
        &mut self,
        sample: &(Tensor, Tensor, Tensor),
        lambda: f64,
        dropout: Option<u64>,
    ) -> Result<f64> {
        let (input, target, features) = sample;
        let mut tape = Tape::new();
        let b = tape.bind(&self.params);
        let mut drop = match dropout {
            Some(seed) => Dropout::train(self.model.cfg.dropout, seed),
            None => Dropout::off(),
        };
        let out = self.model.forward(&mut tape, &b, input, features, &mut drop)?;
        let y = tape.constant(target.clone());
        let l = loss(&mut tape, out.y_hat, out.y_aux, y, self.cfg.s_short, lambda)?;
        let value = tape.value(l).item();
        if dropout.is_some() && value.is_finite() {
            tape.backward(l)?.accumulate_into(&tape, &mut self.params);
        }
        Ok(value)
    }

    pub fn validation_loss(&mut self) -> Result<f64> {
        let mut total = 0.0;
        for i in 0..self.val.len() {
            let s = self.val.sample(i)?;
            total += self.window_loss(&s, self.cfg.beta, None)?;
        }
        Ok(total / self.val.len() as f64)
    }
}

impl EpochRunner for Trainer<'_> {
    fn run_epoch(&mut self, epoch: usize, lr: f64, lambda: f64) -> Result<(f64, f64)> {
        let mut order: Vec<usize> = (0..self.train.len()).collect();
        let mut rng = ChaCha8Rng::seed_from_u64(mix_seed(&[self.seed, epoch as u64]));
        order.shuffle(&mut rng);
        let mut total = 0.0;
        for (batch, members) in order.chunks(self.cfg.batch_size).enumerate() {
            self.params.zero_grad();
            for (k, &i) in members.iter().enumerate() {
                let s = self.train.sample(i)?;
                let seed = mix_seed(&[self.seed, epoch as u64, batch as u64, k as u64]);
                let l = self.window_loss(&s, lambda, Some(seed))?;
                if !l.is_finite() {
                    return Err(Error::Divergence { epoch, batch, loss: l });
                }
                total += l;
            }
            self.params.scale_grads(1.0 / members.len() as f64);
            if self.params.iter().any(|p| !p.grad.all_finite()) {
                return Err(Error::Divergence {
                    epoch,
                    batch,
                    loss: f64::NAN,
                });
            }
            self.adam.update(&mut self.params, lr)?;
        }
        let train_loss = total / self.train.len() as f64;
        let val_loss = self.validation_loss()?;
        if !val_loss.is_finite() {
            return Err(Error::Divergence {
                epoch,
                batch: 0,
                loss: val_loss,
            });
        }
        Ok((train_loss, val_loss))
    }

    fn on_improvement(&mut self, _epoch: usize) {
        self.best = self.params.clone();
    }
}

/// Trains from `params` and returns the best-validation parameters.
pub fn train(
    model: &PfModel,
    params: ParamSet,
    train: SeriesWindows<'_>,
    val: SeriesWindows<'_>,
    cfg: &TrainConfig,
    seed: u64,
) -> Result<TrainOutcome> {
    cfg.validate(model.cfg.h)?;
    if train.is_empty() || val.is_empty() {
        return Err(Error::Data(format!(
            "training needs nonempty partitions (train {}, validation {})",
            train.len(),
            val.len()
        )));
    }
    let mut trainer = Trainer {
        model,
        adam: AdamState::new(&params),
        best: params.clone(),
        params,
        train,
        val,
        cfg: *cfg,
        seed,
    };
    let history = run_epochs(cfg, &mut trainer)?;
    Ok(TrainOutcome {
        params: trainer.best,
        history,
    })
}

#[cfg(test)]
mod tests {
    use chrono::{TimeZone, Utc};

    use super::*;
    use crate::aee::AeeConfig;
    use crate::dataio::{default_step, window_origins};
    use crate::efe::EfeConfig;
    use crate::model::{EmbeddingMode, ModelConfig};

    fn series(len: usize) -> AlignedSeries {
        let target = (0..len).map(|i| (i as f64 * 0.3).sin()).collect();
        let aux = (0..len).map(|i| (i as f64 * 0.3 + 0.5).sin()).collect();
        AlignedSeries::new(
            Utc.with_ymd_and_hms(2020, 1, 1, 0, 0, 0).unwrap(),
            default_step(),
            target,
            vec![aux],
            vec!["y".into(), "x".into()],
        )
        .unwrap()
    }

    fn cfg() -> ModelConfig {
        ModelConfig {
            d_model: 8,
            n_heads: 2,
            n_enc_layers: 1,
            n_dec_layers: 1,
            ffn_width: 8,
            t: 12,
            h: 4,
            m: 2,
            efe: EfeConfig { s: 3, ..Default::default() },
            aee: AeeConfig { hidden: 4, layers: 1 },
            embedding_mode: EmbeddingMode::EfeAee,
            dropout: 0.1,
        }
    }

    fn windows(s: &AlignedSeries, range: std::ops::Range<usize>) -> SeriesWindows<'_> {
        let mc = cfg();
        let windows = window_origins(s.len(), mc.t, mc.h, 2)
            .unwrap()
            .into_iter()
            .filter(|o| range.contains(o))
            .map(|o| WindowRef::from_origin(o, mc.t))
            .collect();
        SeriesWindows {
            series: s,
            windows,
            t: mc.t,
            h: mc.h,
        }
    }

    fn run(seed: u64, epochs: usize) -> TrainOutcome {
        let s = series(160);
        let (model, params) = PfModel::new(cfg(), seed).unwrap();
        let tc = TrainConfig {
            lr: 5e-3,
            max_epochs: epochs,
            batch_size: 8,
            s_short: 2,
            patience: epochs,
            ..Default::default()
        };
        train(&model, params, windows(&s, 0..100), windows(&s, 100..150), &tc, seed).unwrap()
    }

    #[test]
    fn loss_decreases_on_tiny_data() {
        let out = run(1, 10);
        let first = out.history.epochs.first().unwrap().train_loss;
        let last = out.history.epochs.last().unwrap().train_loss;
        assert!(last < first, "{first} -> {last}");
    }

    #[test]
    fn seeded_runs_are_identical() {
        let a = run(3, 3);
        let b = run(3, 3);
        assert_eq!(a.history.losses(), b.history.losses());
        assert_eq!(a.params, b.params);
    }

    #[test]
    fn empty_partitions_are_rejected() {
        let s = series(160);
        let (model, params) = PfModel::new(cfg(), 0).unwrap();
        let err = train(
            &model,
            params,
            windows(&s, 0..100),
            windows(&s, 0..0),
            &TrainConfig { s_short: 2, ..Default::default() },
            0,
        );
        assert!(matches!(err, Err(Error::Data(_))));
    }
}
