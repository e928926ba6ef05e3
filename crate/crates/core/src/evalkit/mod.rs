//! Metrics, the rolling evaluation protocol and parameter sweeps.

mod metrics;
mod protocol;
mod sweep;

pub use metrics::{mape_plus1, rmse};
pub use protocol::{rolling_eval, EvalReport, Forecaster, IssuanceErrors, Protocol};
pub use sweep::{plot_tsv, sweep, SweepAxis, SweepRow};
