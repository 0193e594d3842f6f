use super::rank::{mid_ranks, tie_term};
use super::{check_sample, chi_square_sf, StatResult};
use crate::{Error, Result};

/// Tie-corrected Kruskal-Wallis H with a chi-square(g - 1) p-value.
/// The effect size is epsilon-squared, `H / (N - 1)`.
pub fn kruskal_wallis_h(groups: &[&[f64]]) -> Result<StatResult> {
    if groups.len() < 2 {
        return Err(Error::InvalidInput("kruskal_wallis_h needs at least 2 groups".into()));
    }
    for g in groups {
        check_sample("kruskal_wallis_h group", g)?;
    }
    let sizes: Vec<usize> = groups.iter().map(|g| g.len()).collect();
    let n: usize = sizes.iter().sum();
    if n < 3 {
        return Err(Error::InvalidInput(
            "kruskal_wallis_h needs at least 3 observations".into(),
        ));
    }
    let pooled: Vec<f64> = groups.iter().flat_map(|g| g.iter().copied()).collect();
    let ranks = mid_ranks(&pooled);
    let nf = n as f64;
    let correction = 1.0 - tie_term(&pooled) / (nf * nf * nf - nf);
    if correction <= 0.0 {
        return Ok(StatResult::new("kruskal_wallis_h", 0.0, 1.0, sizes).with_effect("epsilon_squared", 0.0));
    }
    let mut offset = 0;
    let mut sum = 0.0;
    for &size in &sizes {
        let r: f64 = ranks[offset..offset + size].iter().sum();
        sum += r * r / size as f64;
        offset += size;
    }
    let h = ((12.0 / (nf * (nf + 1.0)) * sum - 3.0 * (nf + 1.0)) / correction).max(0.0);
    let p = chi_square_sf(h, (groups.len() - 1) as f64);
    Ok(StatResult::new("kruskal_wallis_h", h, p, sizes).with_effect("epsilon_squared", h / (nf - 1.0)))
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn identical_groups_give_zero() {
        let g = [1.0, 2.0, 3.0];
        let r = kruskal_wallis_h(&[&g, &g, &g]).unwrap();
        assert_abs_diff_eq!(r.statistic, 0.0, epsilon = 1e-12);
        assert_abs_diff_eq!(r.p_value, 1.0, epsilon = 1e-12);
    }

    #[test]
    fn two_groups_reference() {
        // Rank sums 6 and 15: 12/42 * (36/3 + 225/3) - 21 = 27/7.
        let r = kruskal_wallis_h(&[&[1.0, 2.0, 3.0], &[4.0, 5.0, 6.0]]).unwrap();
        assert_abs_diff_eq!(r.statistic, 27.0 / 7.0, epsilon = 1e-12);
        assert_eq!(format!("{:.3}", r.statistic), "3.857");
        // Equals the squared standardized U: (0 - 4.5)^2 / 5.25.
        assert_abs_diff_eq!(r.statistic, 4.5f64.powi(2) / 5.25, epsilon = 1e-12);
    }

    #[test]
    fn all_values_identical() {
        let r = kruskal_wallis_h(&[&[2.0, 2.0], &[2.0, 2.0, 2.0]]).unwrap();
        assert_eq!((r.statistic, r.p_value), (0.0, 1.0));
    }

    #[test]
    fn tie_correction_applied() {
        // Pooled [1,1,2,3,3,3]: mid-ranks 1.5,1.5,3,5,5,5; tie term 6 + 24.
        let r = kruskal_wallis_h(&[&[1.0, 1.0, 2.0], &[3.0, 3.0, 3.0]]).unwrap();
        let uncorrected = 12.0 / 42.0 * (6.0f64.powi(2) / 3.0 + 15.0f64.powi(2) / 3.0) - 21.0;
        let expected = uncorrected / (1.0 - 30.0 / 210.0);
        assert_abs_diff_eq!(r.statistic, expected, epsilon = 1e-12);
    }

    #[test]
    fn argument_checks() {
        assert!(kruskal_wallis_h(&[&[1.0, 2.0]]).is_err());
        assert!(kruskal_wallis_h(&[&[1.0], &[]]).is_err());
        assert!(kruskal_wallis_h(&[&[1.0], &[2.0]]).is_err());
    }

    proptest! {
        #[test]
        fn rank_invariant_under_monotone_maps(
            a in prop::collection::vec(-50.0f64..50.0, 1..8),
            b in prop::collection::vec(-50.0f64..50.0, 1..8),
            c in prop::collection::vec(-50.0f64..50.0, 1..8),
        ) {
            let f = |v: &Vec<f64>| -> Vec<f64> { v.iter().map(|x| (x / 20.0).exp() * 3.0 + 1.0).collect() };
            let (fa, fb, fc) = (f(&a), f(&b), f(&c));
            let h1 = kruskal_wallis_h(&[&a, &b, &c]).unwrap().statistic;
            let h2 = kruskal_wallis_h(&[&fa, &fb, &fc]).unwrap().statistic;
            prop_assert!((h1 - h2).abs() < 1e-9);
        }
    }
}
