use super::rank::mid_ranks;
use super::{check_sample, student_t_two_sided, StatResult};
use crate::{Error, Result};

/// Spearman's rho as the Pearson correlation of mid-ranks, with a
/// t-distribution (n - 2 df) p-value.
pub fn spearman_rho(x: &[f64], y: &[f64]) -> Result<StatResult> {
    check_sample("spearman_rho x", x)?;
    check_sample("spearman_rho y", y)?;
    if x.len() != y.len() {
        return Err(Error::InvalidInput(format!(
            "spearman_rho: unequal lengths {} and {}",
            x.len(),
            y.len()
        )));
    }
    let n = x.len();
    if n < 3 {
        return Err(Error::InvalidInput("spearman_rho needs at least 3 pairs".into()));
    }
    let (rx, ry) = (mid_ranks(x), mid_ranks(y));
    let centre = (n as f64 + 1.0) / 2.0;
    let (mut sxy, mut sxx, mut syy) = (0.0, 0.0, 0.0);
    for (a, b) in rx.iter().zip(&ry) {
        let (da, db) = (a - centre, b - centre);
        sxy += da * db;
        sxx += da * da;
        syy += db * db;
    }
    if sxx == 0.0 || syy == 0.0 {
        return Err(Error::InvalidInput("spearman_rho: zero rank variance".into()));
    }
    let rho = (sxy / (sxx * syy).sqrt()).clamp(-1.0, 1.0);
    let df = (n - 2) as f64;
    let p = if rho.abs() >= 1.0 {
        0.0
    } else {
        student_t_two_sided(rho * (df / (1.0 - rho * rho)).sqrt(), df)
    };
    Ok(StatResult::new("spearman_rho", rho, p, vec![n]))
}
