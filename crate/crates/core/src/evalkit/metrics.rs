use crate::error::{Error, Result};

fn check(pred: &[f64], truth: &[f64]) -> Result<()> {
    if pred.is_empty() || pred.len() != truth.len() {
        return Err(Error::Contract(format!(
            "metrics need equal nonempty lengths, got {} and {}",
            pred.len(),
            truth.len()
        )));
    }
    Ok(())
}

/// Root mean square error.
pub fn rmse(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    let sq: f64 = pred.iter().zip(truth).map(|(p, t)| (p - t) * (p - t)).sum();
    Ok((sq / pred.len() as f64).sqrt())
}

/// Mean of `|p - t| / (t + 1)`, i.e. MAPE after adding 1 to both sides.
pub fn mape_plus1(pred: &[f64], truth: &[f64]) -> Result<f64> {
    check(pred, truth)?;
    let mut total = 0.0;
    for (p, t) in pred.iter().zip(truth) {
        if *t + 1.0 <= 0.0 {
            return Err(Error::Domain(format!(
                "mape_plus1 needs truth > -1, got {t}"
            )));
        }
        total += (p - t).abs() / (t + 1.0);
    }
    Ok(total / pred.len() as f64)
}
