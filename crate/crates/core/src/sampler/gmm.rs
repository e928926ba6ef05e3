use std::f64::consts::PI;
use std::fmt;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};

#[derive(Clone, Copy, Debug, PartialEq)]
pub struct GmmOptions {
    pub max_iter: usize,
    /// Stop once the mean per-sample log-likelihood improves by less than this.
    pub tol: f64,
    /// Only used to separate initial means that coincide.
    pub seed: u64,
}

impl Default for GmmOptions {
    fn default() -> Self {
        GmmOptions {
            max_iter: 200,
            tol: 1e-6,
            seed: 0,
        }
    }
}

/// A fitted one-dimensional Gaussian mixture.
#[derive(Clone, Debug, PartialEq)]
pub struct GmmParams {
    pub weights: Vec<f64>,
    pub means: Vec<f64>,
    pub variances: Vec<f64>,
    /// Total log-likelihood of the data under the final parameters.
    pub log_likelihood: f64,
    /// Total log-likelihood after each parameter update, initial state first.
    pub history: Vec<f64>,
    pub iterations: usize,
    pub variance_floor: f64,
}

impl GmmParams {
    /// Mean of the highest-mean component.
    pub fn highest_mean(&self) -> f64 {
        highest_mean(self)
    }
}

pub fn highest_mean(g: &GmmParams) -> f64 {
    g.means.iter().copied().fold(f64::NEG_INFINITY, f64::max)
}

fn quantile(sorted: &[f64], q: f64) -> f64 {
    let pos = q * (sorted.len() - 1) as f64;
    let lo = pos.floor() as usize;
    let hi = pos.ceil() as usize;
    sorted[lo] + (sorted[hi] - sorted[lo]) * (pos - lo as f64)
}

fn log_normal_pdf(x: f64, mean: f64, var: f64) -> f64 {
    -0.5 * ((2.0 * PI * var).ln() + (x - mean).powi(2) / var)
}

/// EM for a 1-D mixture of `components` Gaussians.
///
/// Means start at the `(k + 0.5) / M` quantiles with uniform weights and the
/// pooled variance; variances never drop below `1e-6 · var(data)`.
pub fn fit_gmm(values: &[f64], components: usize, opts: GmmOptions) -> Result<GmmParams> {
    if components == 0 {
        return Err(Error::Fit("need at least one component".into()));
    }
    if values.len() < components {
        return Err(Error::Fit(format!(
            "{} values cannot support {components} components",
            values.len()
        )));
    }
    let mut sorted = values.to_vec();
    sorted.sort_by(f64::total_cmp);
    let mut distinct = sorted.clone();
    distinct.dedup();
    if components > distinct.len() {
        return Err(Error::Fit(format!(
            "{components} components but only {} distinct values",
            distinct.len()
        )));
    }

    let n = values.len() as f64;
    let mean = values.iter().sum::<f64>() / n;
    let pooled = values.iter().map(|v| (v - mean).powi(2)).sum::<f64>() / n;
    let floor = if pooled > 0.0 { 1e-6 * pooled } else { 1e-12 };

    let m = components;
    let qs: Vec<f64> = (0..m).map(|k| (k as f64 + 0.5) / m as f64).collect();
    let mut means: Vec<f64> = qs.iter().map(|&q| quantile(&sorted, q)).collect();
    if has_duplicates(&means) {
        means = qs.iter().map(|&q| quantile(&distinct, q)).collect();
    }
    if has_duplicates(&means) {
        let mut rng = ChaCha8Rng::seed_from_u64(opts.seed);
        for mu in means.iter_mut() {
            *mu += rng.gen_range(-1.0..1.0) * pooled.sqrt().max(1e-6);
        }
    }
    let mut weights = vec![1.0 / m as f64; m];
    let mut variances = vec![pooled.max(floor); m];

    let mut resp = vec![0.0; values.len() * m];
    let mut history = Vec::new();
    let mut ll = e_step(values, &weights, &means, &variances, &mut resp);
    history.push(ll);
    let mut iterations = 0;

    for _ in 0..opts.max_iter {
        // M-step
        for k in 0..m {
            let nk: f64 = (0..values.len()).map(|i| resp[i * m + k]).sum();
            if nk <= 0.0 {
                continue;
            }
            let mu = values
                .iter()
                .enumerate()
                .map(|(i, &x)| resp[i * m + k] * x)
                .sum::<f64>()
                / nk;
            let var = values
                .iter()
                .enumerate()
                .map(|(i, &x)| resp[i * m + k] * (x - mu).powi(2))
                .sum::<f64>()
                / nk;
            weights[k] = nk / n;
            means[k] = mu;
            variances[k] = var.max(floor);
        }
        let total: f64 = weights.iter().sum();
        weights.iter_mut().for_each(|w| *w /= total);

        let next = e_step(values, &weights, &means, &variances, &mut resp);
        history.push(next);
        iterations += 1;
        let improvement = (next - ll) / n;
        ll = next;
        if improvement < opts.tol {
            break;
        }
    }

    Ok(GmmParams {
        weights,
        means,
        variances,
        log_likelihood: ll,
        history,
        iterations,
        variance_floor: floor,
    })
}

fn has_duplicates(v: &[f64]) -> bool {
    v.iter()
        .enumerate()
        .any(|(i, a)| v[i + 1..].iter().any(|b| a == b))
}

/// Fills responsibilities and returns the total log-likelihood.
fn e_step(values: &[f64], weights: &[f64], means: &[f64], vars: &[f64], resp: &mut [f64]) -> f64 {
    let m = weights.len();
    let log_w: Vec<f64> = weights.iter().map(|w| w.ln()).collect();
    let mut ll = 0.0;
    let mut buf = vec![0.0; m];
    for (i, &x) in values.iter().enumerate() {
        for k in 0..m {
            buf[k] = log_w[k] + log_normal_pdf(x, means[k], vars[k]);
        }
        let max = buf.iter().copied().fold(f64::NEG_INFINITY, f64::max);
        let sum: f64 = buf.iter().map(|b| (b - max).exp()).sum();
        let lse = max + sum.ln();
        ll += lse;
        for k in 0..m {
            resp[i * m + k] = (buf[k] - lse).exp();
        }
    }
    ll
}

impl fmt::Display for GmmParams {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        writeln!(f, "components\t{}", self.means.len())?;
        for k in 0..self.means.len() {
            writeln!(
                f,
                "component.{k}\tweight={:.6}\tmean={:.6}\tvariance={:.6}",
                self.weights[k], self.means[k], self.variances[k]
            )?;
        }
        writeln!(f, "log_likelihood\t{:.6}", self.log_likelihood)?;
        write!(f, "iterations\t{}", self.iterations)
    }
}
