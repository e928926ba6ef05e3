//! Multi-objective loss, the λ schedule, Adam with per-epoch decay and
//! patience-based early stopping.

mod adam;
mod trainer;

use std::fmt;
use std::str::FromStr;

pub use adam::AdamState;
pub use trainer::{train, SeriesWindows, TrainOutcome, Trainer};

use crate::error::{Error, Result};
use crate::tensor::{Tape, Var};

/// `λ = max(-e^(-epoch/45) + α, β)`.
pub fn lambda_schedule(epoch: usize, alpha: f64, beta: f64) -> f64 {
    (-(-(epoch as f64) / 45.0).exp() + alpha).max(beta)
}

/// Decreasing variant `λ = max(α·e^(-epoch/45), β)`.
pub fn lambda_schedule_decreasing(epoch: usize, alpha: f64, beta: f64) -> f64 {
    (alpha * (-(epoch as f64) / 45.0).exp()).max(beta)
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum LambdaSchedule {
    Formula,
    Prose,
}

impl LambdaSchedule {
    pub fn lambda(self, epoch: usize, alpha: f64, beta: f64) -> f64 {
        match self {
            LambdaSchedule::Formula => lambda_schedule(epoch, alpha, beta),
            LambdaSchedule::Prose => lambda_schedule_decreasing(epoch, alpha, beta),
        }
    }

    pub fn name(self) -> &'static str {
        match self {
            LambdaSchedule::Formula => "formula",
            LambdaSchedule::Prose => "prose",
        }
    }
}

impl fmt::Display for LambdaSchedule {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.name())
    }
}

impl FromStr for LambdaSchedule {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "formula" => Ok(LambdaSchedule::Formula),
            "prose" => Ok(LambdaSchedule::Prose),
            other => Err(Error::Config(format!(
                "unknown schedule {other:?} (expected formula or prose)"
            ))),
        }
    }
}

/// Learning rate used during epoch `epoch` (0-based).
pub fn learning_rate(lr0: f64, decay: f64, epoch: usize) -> f64 {
    lr0 * decay.powi(epoch as i32)
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct TrainConfig {
    pub lr: f64,
    pub lr_decay: f64,
    pub max_epochs: usize,
    pub patience: usize,
    pub batch_size: usize,
    pub alpha: f64,
    pub beta: f64,
    /// Steps scored by the auxiliary term.
    pub s_short: usize,
    pub schedule: LambdaSchedule,
}

impl Default for TrainConfig {
    fn default() -> Self {
        TrainConfig {
            lr: 5e-4,
            lr_decay: 0.9,
            max_epochs: 40,
            patience: 4,
            batch_size: 96,
            alpha: 1.5,
            beta: 0.9,
            s_short: 16,
            schedule: LambdaSchedule::Formula,
        }
    }
}

impl TrainConfig {
    pub fn validate(&self, h: usize) -> Result<()> {
        let bad = |msg: String| Err(Error::Config(msg));
        if self.beta > self.alpha {
            return bad(format!(
                "train.beta ({}) must not exceed train.alpha ({})",
                self.beta, self.alpha
            ));
        }
        if self.s_short == 0 || self.s_short > h {
            return bad(format!("train.s_short must be in 1..={h}, got {}", self.s_short));
        }
        if self.patience == 0 {
            return bad("train.patience must be at least 1".into());
        }
        if self.batch_size == 0 || self.max_epochs == 0 {
            return bad("train.batch_size and train.max_epochs must be positive".into());
        }
        if !(self.lr > 0.0 && self.lr_decay > 0.0) {
            return bad("train.lr and train.lr_decay must be positive".into());
        }
        Ok(())
    }

    pub fn lambda(&self, epoch: usize) -> f64 {
        self.schedule.lambda(epoch, self.alpha, self.beta)
    }
}

/// `λ·RMSE(ŷ_aux[..s], y[..s]) + RMSE(ŷ, y)` on the tape. Without an
/// auxiliary output, or with `λ = 0`, only the second term is built.
pub fn loss(
    tape: &mut Tape,
    y_hat: Var,
    y_aux: Option<Var>,
    y: Var,
    s_short: usize,
    lambda: f64,
) -> Result<Var> {
    let l2 = tape.rmse(y_hat, y)?;
    let Some(aux) = y_aux.filter(|_| lambda != 0.0) else {
        return Ok(l2);
    };
    let h = tape.value(y).len();
    if s_short == 0 || s_short > h {
        return Err(Error::Contract(format!("s_short {s_short} outside 1..={h}")));
    }
    let aux_row = tape.reshape(aux, vec![1, h])?;
    let y_row = tape.reshape(y, vec![1, h])?;
    let aux_short = tape.slice_cols(aux_row, 0, s_short)?;
    let y_short = tape.slice_cols(y_row, 0, s_short)?;
    let l1 = tape.rmse(aux_short, y_short)?;
    let l1 = tape.scale(l1, lambda);
    tape.add(l1, l2)
}

/// Tracks the best validation loss and the run of non-improving epochs.
#[derive(Clone, Debug, PartialEq)]
pub struct EarlyStopping {
    pub patience: usize,
    pub best: f64,
    pub best_epoch: Option<usize>,
    pub since_improvement: usize,
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum StopDecision {
    Improved,
    Continue,
    Stop,
}

impl EarlyStopping {
    pub fn new(patience: usize) -> Self {
        EarlyStopping {
            patience,
            best: f64::INFINITY,
            best_epoch: None,
            since_improvement: 0,
        }
    }

    pub fn observe(&mut self, epoch: usize, val_loss: f64) -> StopDecision {
        if val_loss < self.best {
            self.best = val_loss;
            self.best_epoch = Some(epoch);
            self.since_improvement = 0;
            StopDecision::Improved
        } else {
            self.since_improvement += 1;
            if self.since_improvement >= self.patience {
                StopDecision::Stop
            } else {
                StopDecision::Continue
            }
        }
    }
}

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct EpochRecord {
    pub epoch: usize,
    pub lambda: f64,
    pub lr: f64,
    pub train_loss: f64,
    pub val_loss: f64,
    pub seconds: f64,
}

#[derive(Clone, Debug, Default, PartialEq)]
pub struct History {
    pub epochs: Vec<EpochRecord>,
    pub best_epoch: Option<usize>,
    pub stopped_early: bool,
}

impl History {
    pub const HEADER: &'static str = "epoch\tlambda\tlr\ttrain_loss\tval_loss\tseconds";

    pub fn to_tsv(&self) -> String {
        let mut s = String::from(Self::HEADER);
        s.push('\n');
        for r in &self.epochs {
            s.push_str(&format!(
                "{}\t{}\t{}\t{}\t{}\t{:.3}\n",
                r.epoch, r.lambda, r.lr, r.train_loss, r.val_loss, r.seconds
            ));
        }
        s
    }

    /// Everything except wall-clock time, for reproducibility comparisons.
    pub fn losses(&self) -> Vec<(usize, f64, f64, f64, f64)> {
        self.epochs
            .iter()
            .map(|r| (r.epoch, r.lambda, r.lr, r.train_loss, r.val_loss))
            .collect()
    }
}

/// One epoch of work as seen by [`run_epochs`].
pub trait EpochRunner {
    /// Trains for one epoch and returns `(train_loss, val_loss)`.
    fn run_epoch(&mut self, epoch: usize, lr: f64, lambda: f64) -> Result<(f64, f64)>;

    fn on_improvement(&mut self, _epoch: usize) {}
}

/// Epoch loop: learning-rate decay, λ schedule, early stopping.
pub fn run_epochs<R: EpochRunner>(cfg: &TrainConfig, runner: &mut R) -> Result<History> {
    let mut stopper = EarlyStopping::new(cfg.patience);
    let mut history = History::default();
    for epoch in 0..cfg.max_epochs {
        let started = std::time::Instant::now();
        let lr = learning_rate(cfg.lr, cfg.lr_decay, epoch);
        let lambda = cfg.lambda(epoch);
        let (train_loss, val_loss) = runner.run_epoch(epoch, lr, lambda)?;
        history.epochs.push(EpochRecord {
            epoch,
            lambda,
            lr,
            train_loss,
            val_loss,
            seconds: started.elapsed().as_secs_f64(),
        });
        match stopper.observe(epoch, val_loss) {
            StopDecision::Improved => runner.on_improvement(epoch),
            StopDecision::Continue => {}
            StopDecision::Stop => {
                history.stopped_early = true;
                break;
            }
        }
    }
    history.best_epoch = stopper.best_epoch;
    Ok(history)
}

/// SplitMix64 finaliser over a sequence of words; derives child seeds.
pub fn mix_seed(parts: &[u64]) -> u64 {
    let mut z = 0x9E37_79B9_7F4A_7C15u64;
    for &p in parts {
        z = z.wrapping_add(p).wrapping_add(0x9E37_79B9_7F4A_7C15);
        z = (z ^ (z >> 30)).wrapping_mul(0xBF58_476D_1CE4_E5B9);
        z = (z ^ (z >> 27)).wrapping_mul(0x94D0_49BB_1331_11EB);
        z ^= z >> 31;
    }
    z
}
