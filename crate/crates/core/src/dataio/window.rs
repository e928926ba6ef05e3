use super::AlignedSeries;
use crate::error::{Error, Result};
use crate::tensor::Tensor;

/// One forecasting instance: `m × t` history and the next `h` target values.
#[derive(Clone, Debug, PartialEq)]
pub struct WindowSample {
    pub input: Tensor,
    pub target: Vec<f64>,
    /// Grid index of the last observed point.
    pub issue_index: usize,
    pub is_oversampled: bool,
}

impl WindowSample {
    pub fn t(&self) -> usize {
        self.input.cols()
    }

    pub fn h(&self) -> usize {
        self.target.len()
    }

    pub fn origin(&self) -> usize {
        self.issue_index + 1 - self.t()
    }
}

/// A window identified only by its position; materialised on demand with
/// [`AlignedSeries::window_at`].
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub struct WindowRef {
    pub issue_index: usize,
    pub is_oversampled: bool,
}

impl WindowRef {
    pub fn from_origin(origin: usize, t: usize) -> Self {
        WindowRef {
            issue_index: origin + t - 1,
            is_oversampled: false,
        }
    }

    pub fn origin(&self, t: usize) -> usize {
        self.issue_index + 1 - t
    }
}

/// `floor((len - t - h) / stride) + 1`, or an error when `len < t + h`.
pub fn window_count(len: usize, t: usize, h: usize, stride: usize) -> Result<usize> {
    if len < t + h {
        return Err(Error::Windowing { len, needed: t + h });
    }
    if stride == 0 {
        return Err(Error::Contract("window stride must be positive".into()));
    }
    Ok((len - t - h) / stride + 1)
}

pub fn window_origins(len: usize, t: usize, h: usize, stride: usize) -> Result<Vec<usize>> {
    let n = window_count(len, t, h, stride)?;
    Ok((0..n).map(|k| k * stride).collect())
}

pub fn make_windows(
    s: &AlignedSeries,
    t: usize,
    h: usize,
    stride: usize,
) -> Result<Vec<WindowSample>> {
    window_origins(s.len(), t, h, stride)?
        .into_iter()
        .map(|o| s.window_at(o, t, h))
        .collect()
}

#[cfg(test)]
mod tests {
    use chrono::{TimeZone, Utc};
    use proptest::prelude::*;

    use super::*;
    use crate::dataio::default_step;

    fn ramp(len: usize) -> AlignedSeries {
        let t0 = Utc.with_ymd_and_hms(2021, 1, 1, 0, 0, 0).unwrap();
        let target: Vec<f64> = (0..len).map(|i| i as f64).collect();
        let aux: Vec<f64> = (0..len).map(|i| -(i as f64)).collect();
        AlignedSeries::new(t0, default_step(), target, vec![aux], vec!["x".into(), "a".into()])
            .unwrap()
    }

    #[test]
    fn count_examples() {
        assert_eq!(window_count(1728, 1440, 288, 1).unwrap(), 1);
        assert_eq!(window_origins(1760, 1440, 288, 16).unwrap(), vec![0, 16, 32]);
        assert!(matches!(
            window_count(1727, 1440, 288, 1),
            Err(Error::Windowing { .. })
        ));
    }

    #[test]
    fn window_contents() {
        let s = ramp(20);
        let w = make_windows(&s, 5, 3, 4).unwrap();
        assert_eq!(w.len(), 4);
        let second = &w[1];
        assert_eq!(second.input.row(0), &[4.0, 5.0, 6.0, 7.0, 8.0]);
        assert_eq!(second.input.row(1), &[-4.0, -5.0, -6.0, -7.0, -8.0]);
        assert_eq!(second.target, vec![9.0, 10.0, 11.0]);
        assert_eq!(second.issue_index, 8);
        assert_eq!(second.origin(), 4);
    }

    proptest! {
        #[test]
        fn count_matches_closed_form(len in 1usize..600, t in 1usize..80, h in 1usize..40, stride in 1usize..20) {
            let s = ramp(len);
            match make_windows(&s, t, h, stride) {
                Ok(w) => {
                    prop_assert!(len >= t + h);
                    prop_assert_eq!(w.len(), (len - t - h) / stride + 1);
                    let last = w.last().unwrap();
                    prop_assert!(last.issue_index + h < len);
                }
                Err(_) => prop_assert!(len < t + h),
            }
        }
    }
}
