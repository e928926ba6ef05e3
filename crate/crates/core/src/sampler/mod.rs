//! Clustering-based oversampling of extreme events.
//!
//! A 1-D Gaussian mixture is fitted to training target values; the highest
//! component mean `z` sets the importance threshold `eta · z`. Each peak above
//! it contributes extra training windows whose issue points sweep a `nu`-wide
//! scope every `s` steps, and the extras are capped at `os%` of the final
//! training set.

mod gmm;
mod oversample;

pub use gmm::{fit_gmm, highest_mean, GmmOptions, GmmParams};
pub use oversample::{
    cap_oversample, expand_peaks, mark_important, oversample_cap, OversamplePolicy, Oversampled,
};
