use super::{ParamSet, Tape, Tensor, Var};
use crate::error::{Error, Result};

fn relative_error(analytic: f64, numeric: f64) -> f64 {
    (analytic - numeric).abs() / analytic.abs().max(1.0)
}

fn check_eps(eps: f64) -> Result<()> {
    if !(1e-7..=1e-3).contains(&eps) {
        return Err(Error::Contract(format!(
            "finite-difference eps must lie in [1e-7, 1e-3], got {eps}"
        )));
    }
    Ok(())
}

/// Compares the tape gradient of the scalar function `f` at `x` with a
/// central difference, returning the max over coordinates of
/// `|analytic - numeric| / max(1, |analytic|)`.
pub fn finite_diff_check<F>(f: F, x: &Tensor, eps: f64) -> Result<f64>
where
    F: Fn(&mut Tape, Var) -> Result<Var>,
{
    check_eps(eps)?;
    let mut tape = Tape::new();
    let xv = tape.leaf(x.clone());
    let root = f(&mut tape, xv)?;
    let grads = tape.backward(root)?;
    let analytic = grads
        .wrt(&tape, xv)
        .unwrap_or_else(|| Tensor::zeros(x.shape()));

    let eval = |probe: Tensor| -> Result<f64> {
        let mut tape = Tape::new();
        let v = tape.leaf(probe);
        let r = f(&mut tape, v)?;
        Ok(tape.value(r).item())
    };

    let mut worst: f64 = 0.0;
    for i in 0..x.len() {
        let mut plus = x.clone();
        plus.data_mut()[i] += eps;
        let mut minus = x.clone();
        minus.data_mut()[i] -= eps;
        let numeric = (eval(plus)? - eval(minus)?) / (2.0 * eps);
        worst = worst.max(relative_error(analytic.data()[i], numeric));
    }
    Ok(worst)
}

#[derive(Clone, Debug)]
pub struct ParamCheckReport {
    pub checked: usize,
    pub passed: usize,
    pub max_relative_error: f64,
    /// `(parameter name, flat index, relative error)` of the worst coordinate.
    pub worst: Option<(String, usize, f64)>,
}

impl ParamCheckReport {
    pub fn pass_fraction(&self) -> f64 {
        if self.checked == 0 {
            1.0
        } else {
            self.passed as f64 / self.checked as f64
        }
    }
}

/// Finite-difference check over every scalar of a parameter set.
///
/// `loss` must return the scalar loss and, when asked, accumulate its
/// analytic gradient into the parameter grads.
pub fn param_gradient_check<F>(
    params: &ParamSet,
    eps: f64,
    tol: f64,
    loss: F,
) -> Result<ParamCheckReport>
where
    F: Fn(&mut ParamSet) -> Result<f64>,
{
    check_eps(eps)?;
    let mut with_grads = params.clone();
    with_grads.zero_grad();
    loss(&mut with_grads)?;

    let mut report = ParamCheckReport {
        checked: 0,
        passed: 0,
        max_relative_error: 0.0,
        worst: None,
    };
    let mut probe = params.clone();
    for id in params.ids() {
        let n = params.value(id).len();
        for i in 0..n {
            let original = params.value(id).data()[i];
            probe.get_mut(id).value.data_mut()[i] = original + eps;
            let up = loss(&mut probe)?;
            probe.get_mut(id).value.data_mut()[i] = original - eps;
            let down = loss(&mut probe)?;
            probe.get_mut(id).value.data_mut()[i] = original;

            let numeric = (up - down) / (2.0 * eps);
            let err = relative_error(with_grads.get(id).grad.data()[i], numeric);
            report.checked += 1;
            if err < tol {
                report.passed += 1;
            }
            if err > report.max_relative_error || report.worst.is_none() {
                report.max_relative_error = err;
                report.worst = Some((params.get(id).name.clone(), i, err));
            }
        }
    }
    Ok(report)
}

#[cfg(test)]
mod tests {
    use rand::{Rng, SeedableRng};
    use rand_chacha::ChaCha8Rng;

    use super::*;

    #[test]
    fn linear_sum_is_exact() {
        let x = Tensor::from_rows(&[vec![1.0, -3.0], vec![0.25, 8.0]]).unwrap();
        let err = finite_diff_check(|t, v| Ok(t.sum(v)), &x, 1e-5).unwrap();
        assert!(err < 1e-9, "{err}");
    }

    #[test]
    fn tanh_sum_within_tolerance() {
        let mut rng = ChaCha8Rng::seed_from_u64(3);
        let x = Tensor::vector((0..5).map(|_| rng.gen_range(-1.0..1.0)).collect());
        let err = finite_diff_check(
            |t, v| {
                let y = t.tanh(v);
                Ok(t.sum(y))
            },
            &x,
            1e-5,
        )
        .unwrap();
        assert!(err < 1e-5, "{err}");
    }

    #[test]
    fn eps_outside_contract_is_rejected() {
        let x = Tensor::vector(vec![1.0]);
        assert!(finite_diff_check(|t, v| Ok(t.sum(v)), &x, 1e-2).is_err());
    }
}
