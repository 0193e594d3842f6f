//! Non-parametric inference.
//!
//! Conventions: mid-ranks for ties, tie-corrected variances, two-sided
//! p-values throughout. Permutation tests draw from a seeded ChaCha8 stream
//! split into fixed batches, so results do not depend on the thread count.

mod holm;
mod kruskal;
mod mwu;
mod permutation;
mod rank;
mod slope;
mod spearman;

pub use holm::holm_adjust;
pub use kruskal::kruskal_wallis_h;
pub use mwu::{cliffs_delta, mann_whitney_u, mann_whitney_u_with, MwuMode, MwuOptions, EXACT_AUTO_MAX_N, EXACT_MAX_N};
pub use permutation::{permutation_test, PermStatistic, PERM_BATCH};
pub use rank::{mid_ranks, tie_term};
pub use slope::{ols_slope, per_subject_slope, SlopeRecord};
pub use spearman::spearman_rho;

use statrs::distribution::{ChiSquared, ContinuousCDF, Normal, StudentsT};

use crate::{Error, Result};

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Adjustment {
    None,
    Holm,
}

impl Adjustment {
    pub fn as_str(self) -> &'static str {
        match self {
            Adjustment::None => "none",
            Adjustment::Holm => "holm",
        }
    }
}

/// Outcome of one named test.
#[derive(Debug, Clone, PartialEq)]
pub struct StatResult {
    pub test_name: &'static str,
    pub statistic: f64,
    /// Unadjusted two-sided p-value.
    pub p_value: f64,
    /// Family-wise adjusted p-value when `adjustment != None`.
    pub p_adjusted: Option<f64>,
    pub effect_size: Option<f64>,
    pub effect_name: &'static str,
    pub n_per_group: Vec<usize>,
    pub adjustment: Adjustment,
    pub seed: Option<u64>,
}

impl StatResult {
    fn new(test_name: &'static str, statistic: f64, p_value: f64, n_per_group: Vec<usize>) -> Self {
        StatResult {
            test_name,
            statistic,
            p_value: p_value.clamp(0.0, 1.0),
            p_adjusted: None,
            effect_size: None,
            effect_name: "",
            n_per_group,
            adjustment: Adjustment::None,
            seed: None,
        }
    }

    fn with_effect(mut self, name: &'static str, value: f64) -> Self {
        self.effect_name = name;
        self.effect_size = Some(value);
        self
    }
}

/// Holm-adjusts a family of results in place.
pub fn holm_adjust_results(results: &mut [StatResult]) {
    let raw: Vec<f64> = results.iter().map(|r| r.p_value).collect();
    let adjusted = holm_adjust(&raw).expect("p-values of StatResult lie in [0,1]");
    for (r, p) in results.iter_mut().zip(adjusted) {
        r.p_adjusted = Some(p);
        r.adjustment = Adjustment::Holm;
    }
}

pub fn mean(values: &[f64]) -> Option<f64> {
    if values.is_empty() {
        None
    } else {
        Some(values.iter().sum::<f64>() / values.len() as f64)
    }
}

/// Sample variance with the N-1 denominator.
pub fn sample_variance(values: &[f64]) -> Option<f64> {
    if values.len() < 2 {
        return None;
    }
    let m = mean(values)?;
    Some(values.iter().map(|v| (v - m).powi(2)).sum::<f64>() / (values.len() - 1) as f64)
}

pub fn sample_sd(values: &[f64]) -> Option<f64> {
    sample_variance(values).map(f64::sqrt)
}

/// Median; the mean of the two central values for even lengths. Reorders `values`.
pub fn median(values: &mut [f64]) -> Option<f64> {
    if values.is_empty() {
        return None;
    }
    values.sort_by(f64::total_cmp);
    let n = values.len();
    Some(if n % 2 == 1 {
        values[n / 2]
    } else {
        (values[n / 2 - 1] + values[n / 2]) / 2.0
    })
}

fn check_sample(name: &str, values: &[f64]) -> Result<()> {
    if values.is_empty() {
        return Err(Error::InvalidInput(format!("{name}: empty sample")));
    }
    if values.iter().any(|v| !v.is_finite()) {
        return Err(Error::InvalidInput(format!("{name}: non-finite value")));
    }
    Ok(())
}

pub(crate) fn normal_two_sided(z: f64) -> f64 {
    let n = Normal::standard();
    (2.0 * n.sf(z.abs())).min(1.0)
}

pub(crate) fn chi_square_sf(x: f64, df: f64) -> f64 {
    if x <= 0.0 {
        return 1.0;
    }
    ChiSquared::new(df).expect("positive df").sf(x)
}

pub(crate) fn student_t_two_sided(t: f64, df: f64) -> f64 {
    let dist = StudentsT::new(0.0, 1.0, df).expect("positive df");
    (2.0 * dist.sf(t.abs())).min(1.0)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn summary_helpers() {
        assert_eq!(mean(&[1.0, 2.0, 3.0]), Some(2.0));
        assert_eq!(mean(&[]), None);
        assert_eq!(sample_variance(&[1.0, 2.0, 3.0, 4.0]), Some(5.0 / 3.0));
        assert_eq!(sample_variance(&[1.0]), None);
        assert_eq!(median(&mut [3.0, 1.0, 2.0]), Some(2.0));
        assert_eq!(median(&mut [4.0, 1.0, 2.0, 3.0]), Some(2.5));
        assert_eq!(median(&mut []), None);
    }

    #[test]
    fn tail_helpers() {
        assert!((normal_two_sided(1.959963984540054) - 0.05).abs() < 1e-10);
        assert!((chi_square_sf(3.841458820694124, 1.0) - 0.05).abs() < 1e-10);
        assert_eq!(chi_square_sf(0.0, 2.0), 1.0);
        assert!((student_t_two_sided(2.228138851986274, 10.0) - 0.05).abs() < 1e-9);
        assert!(normal_two_sided(9.0) < 1e-18);
    }
}
