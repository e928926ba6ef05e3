use std::collections::BTreeSet;

use rand::seq::index::sample;
use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::dataio::{WindowRef, WindowSample};
use crate::error::{Error, Result};

/// Oversampling knobs: threshold multiplier `eta`, step `s_step`, scope `nu`
/// and the cap `os_pct` on the share of oversampled windows.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct OversamplePolicy {
    pub eta: f64,
    pub s_step: usize,
    pub nu: usize,
    pub os_pct: f64,
}

impl Default for OversamplePolicy {
    fn default() -> Self {
        OversamplePolicy {
            eta: 1.2,
            s_step: 1,
            nu: 8,
            os_pct: 20.0,
        }
    }
}

impl OversamplePolicy {
    pub fn validate(&self) -> Result<()> {
        if self.s_step == 0 || self.nu < self.s_step {
            return Err(Error::Config(format!(
                "oversampling needs 1 <= s ({}) <= nu ({})",
                self.s_step, self.nu
            )));
        }
        if !(self.os_pct > 0.0 && self.os_pct <= 100.0) {
            return Err(Error::Config(format!(
                "os_pct must be in (0, 100], got {}",
                self.os_pct
            )));
        }
        Ok(())
    }
}

/// Indices whose value exceeds `eta · z`, thinned so that each survivor is
/// the leftmost maximum of its `[i - nu/2, i + nu/2]` neighbourhood.
pub fn mark_important(values: &[f64], eta: f64, z: f64, nu: usize) -> Vec<usize> {
    let threshold = eta * z;
    let half = nu / 2;
    let n = values.len();
    (0..n)
        .filter(|&i| values[i] > threshold)
        .filter(|&i| {
            let lo = i.saturating_sub(half);
            let hi = (i + half).min(n - 1);
            (lo..=hi).all(|k| {
                values[k] < values[i] || (values[k] == values[i] && k >= i)
            })
        })
        .collect()
}

/// Extra window origins around each peak. For peak `p` the issue points are
/// `p - nu/2 + k·s_step` for `k < floor(nu / s_step)`; origins outside
/// `[0, len - t - h]` are dropped and duplicates removed (ascending order).
pub fn expand_peaks(
    peaks: &[usize],
    s_step: usize,
    nu: usize,
    len: usize,
    t: usize,
    h: usize,
) -> Vec<usize> {
    if s_step == 0 || len < t + h {
        return Vec::new();
    }
    let max_origin = (len - t - h) as i64;
    let count = nu / s_step;
    let mut origins = BTreeSet::new();
    for &p in peaks {
        let first = p as i64 - (nu / 2) as i64;
        for k in 0..count {
            let issue = first + (k * s_step) as i64;
            let origin = issue - (t as i64 - 1);
            if (0..=max_origin).contains(&origin) {
                origins.insert(origin as usize);
            }
        }
    }
    origins.into_iter().collect()
}

/// Largest `k` with `k ≤ floor(os/100 · (base + k))`.
pub fn oversample_cap(base: usize, os_pct: f64) -> usize {
    if os_pct >= 100.0 {
        return usize::MAX;
    }
    let frac = os_pct / 100.0;
    let mut k = (frac * base as f64 / (1.0 - frac)).floor() as usize;
    while k > 0 && (k as f64) > (frac * (base + k) as f64).floor() {
        k -= 1;
    }
    while ((k + 1) as f64) <= (frac * (base + k + 1) as f64).floor() {
        k += 1;
    }
    k
}

pub trait Oversampled {
    fn mark_oversampled(&mut self);
}

impl Oversampled for WindowRef {
    fn mark_oversampled(&mut self) {
        self.is_oversampled = true;
    }
}

impl Oversampled for WindowSample {
    fn mark_oversampled(&mut self) {
        self.is_oversampled = true;
    }
}

/// Appends as many extras as the `os_pct` cap allows, chosen uniformly at
/// random (seeded) when truncation is needed, and flags them.
pub fn cap_oversample<W: Oversampled>(
    mut base: Vec<W>,
    extra: Vec<W>,
    os_pct: f64,
    seed: u64,
) -> Vec<W> {
    let cap = oversample_cap(base.len(), os_pct);
    let mut kept: Vec<W> = if extra.len() <= cap {
        extra
    } else {
        let mut rng = ChaCha8Rng::seed_from_u64(seed);
        let mut chosen = sample(&mut rng, extra.len(), cap).into_vec();
        chosen.sort_unstable();
        let mut slots: Vec<Option<W>> = extra.into_iter().map(Some).collect();
        chosen
            .into_iter()
            .map(|i| slots[i].take().unwrap())
            .collect()
    };
    kept.iter_mut().for_each(Oversampled::mark_oversampled);
    base.extend(kept);
    base
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn refs(n: usize, offset: usize) -> Vec<WindowRef> {
        (0..n)
            .map(|i| WindowRef {
                issue_index: offset + i,
                is_oversampled: false,
            })
            .collect()
    }

    #[test]
    fn nothing_above_threshold() {
        assert!(mark_important(&[1.0, 2.0, 3.0], 1.2, 10.0, 8).is_empty());
    }

    #[test]
    fn single_spike() {
        let mut v = vec![1.0; 50];
        v[20] = 40.0;
        assert_eq!(mark_important(&v, 1.2, 10.0, 8), vec![20]);
    }

    #[test]
    fn plateau_keeps_leftmost() {
        let mut v = vec![1.0; 50];
        v[20..25].fill(30.0);
        assert_eq!(mark_important(&v, 1.2, 10.0, 8), vec![20]);
    }

    #[test]
    fn expansion_examples() {
        let t = 10;
        let h = 5;
        let p = 100;
        let origins = expand_peaks(&[p], 1, 8, 1000, t, h);
        let issues: Vec<usize> = origins.iter().map(|o| o + t - 1).collect();
        assert_eq!(issues, (p - 4..p + 4).collect::<Vec<_>>());

        let origins = expand_peaks(&[p], 2, 16, 1000, t, h);
        let issues: Vec<usize> = origins.iter().map(|o| o + t - 1).collect();
        assert_eq!(issues, (0..8).map(|k| p - 8 + 2 * k).collect::<Vec<_>>());

        assert!(expand_peaks(&[3], 1, 8, 1000, t, h).is_empty());
    }

    #[test]
    fn cap_examples() {
        let out = cap_oversample(refs(800, 0), refs(500, 10_000), 20.0, 7);
        let kept = out.iter().filter(|w| w.is_oversampled).count();
        assert_eq!(kept, 200);
        assert_eq!(out.len(), 1000);

        let out = cap_oversample(refs(800, 0), refs(50, 10_000), 20.0, 7);
        assert_eq!(out.iter().filter(|w| w.is_oversampled).count(), 50);

        let out = cap_oversample(refs(800, 0), Vec::new(), 20.0, 7);
        assert_eq!(out, refs(800, 0));
    }

    #[test]
    fn policy_validation() {
        assert!(OversamplePolicy::default().validate().is_ok());
        let bad = OversamplePolicy { nu: 2, s_step: 4, ..Default::default() };
        assert!(bad.validate().is_err());
        let bad = OversamplePolicy { os_pct: 0.0, ..Default::default() };
        assert!(bad.validate().is_err());
    }

    proptest! {
        #[test]
        fn cap_bound_holds(base in 0usize..2000, extra in 0usize..2000, os in 0.5f64..100.0, seed in any::<u64>()) {
            let out = cap_oversample(refs(base, 0), refs(extra, 5000), os, seed);
            let kept = out.iter().filter(|w| w.is_oversampled).count();
            let total = base + kept;
            prop_assert!(kept <= extra);
            if total > 0 {
                prop_assert!(kept as f64 / total as f64 <= os / 100.0 + 1.0 / total as f64 + 1e-12);
            }
        }

        #[test]
        fn expansion_is_distinct_bounded_and_regular(
            p in 0usize..400, s in 1usize..5, mult in 1usize..5, t in 1usize..30, h in 1usize..10,
        ) {
            let nu = s * mult;
            let len = 500;
            let origins = expand_peaks(&[p], s, nu, len, t, h);
            for w in origins.windows(2) {
                prop_assert_eq!(w[1] - w[0], s);
            }
            for &o in &origins {
                prop_assert!(o + t + h <= len);
            }
        }
    }
}
