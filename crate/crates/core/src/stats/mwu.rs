use super::rank::{mid_ranks, tie_term};
use super::{check_sample, normal_two_sided, StatResult};
use crate::{Error, Result};

/// Auto mode enumerates exactly up to this pooled size (tie-free data only).
pub const EXACT_AUTO_MAX_N: usize = 12;
/// Hard limit for explicitly requested exact p-values.
pub const EXACT_MAX_N: usize = 60;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum MwuMode {
    Exact,
    NormalApprox,
    /// Exact for tie-free samples with `n_x + n_y <= 12`, normal otherwise.
    Auto,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub struct MwuOptions {
    pub mode: MwuMode,
    /// Shift `|U - mean|` by 0.5 in the normal approximation.
    pub continuity: bool,
}

impl Default for MwuOptions {
    fn default() -> Self {
        MwuOptions {
            mode: MwuMode::Auto,
            continuity: true,
        }
    }
}

/// Two-sided Mann-Whitney U test. The statistic is `U_x`, the number of
/// pairs with `x > y` plus half the ties; the effect size is Cliff's delta.
pub fn mann_whitney_u(x: &[f64], y: &[f64], mode: MwuMode) -> Result<StatResult> {
    mann_whitney_u_with(
        x,
        y,
        MwuOptions {
            mode,
            ..MwuOptions::default()
        },
    )
}

pub fn mann_whitney_u_with(x: &[f64], y: &[f64], opts: MwuOptions) -> Result<StatResult> {
    check_sample("mann_whitney_u x", x)?;
    check_sample("mann_whitney_u y", y)?;
    let (nx, ny) = (x.len(), y.len());
    let n = nx + ny;
    let pooled: Vec<f64> = x.iter().chain(y).copied().collect();
    let ranks = mid_ranks(&pooled);
    let rank_sum_x: f64 = ranks[..nx].iter().sum();
    let u_x = rank_sum_x - (nx * (nx + 1)) as f64 / 2.0;
    let ties = tie_term(&pooled);

    let exact = match opts.mode {
        MwuMode::Exact => {
            if n > EXACT_MAX_N {
                return Err(Error::InvalidInput(format!(
                    "exact Mann-Whitney limited to {EXACT_MAX_N} observations, got {n}"
                )));
            }
            true
        }
        MwuMode::NormalApprox => false,
        MwuMode::Auto => n <= EXACT_AUTO_MAX_N && ties == 0.0,
    };

    let (name, p) = if exact {
        ("mann_whitney_u_exact", exact_p(&ranks, nx))
    } else {
        let mean_u = (nx * ny) as f64 / 2.0;
        let nf = n as f64;
        let var_u = (nx * ny) as f64 / 12.0 * ((nf + 1.0) - ties / (nf * (nf - 1.0)));
        let p = if var_u <= 0.0 {
            1.0
        } else {
            let cc = if opts.continuity { 0.5 } else { 0.0 };
            let z = ((u_x - mean_u).abs() - cc).max(0.0) / var_u.sqrt();
            normal_two_sided(z)
        };
        ("mann_whitney_u_normal", p)
    };
    let delta = 2.0 * u_x / (nx * ny) as f64 - 1.0;
    Ok(StatResult::new(name, u_x, p, vec![nx, ny]).with_effect("cliffs_delta", delta))
}

/// Exact two-sided p by counting every size-`nx` subset of the pooled ranks:
/// `min(1, 2 * min(P(R <= r_obs), P(R >= r_obs)))` on the rank sum `R`.
fn exact_p(ranks: &[f64], nx: usize) -> f64 {
    // Doubled mid-ranks are integers.
    let doubled: Vec<usize> = ranks.iter().map(|r| (2.0 * r).round() as usize).collect();
    let observed: usize = doubled[..nx].iter().sum();
    let max_sum: usize = doubled.iter().sum();
    // counts[k][s]: subsets of size k with doubled rank sum s.
    let mut counts = vec![vec![0u128; max_sum + 1]; nx + 1];
    counts[0][0] = 1;
    for &r in &doubled {
        for k in (1..=nx).rev() {
            let (lower, upper) = counts.split_at_mut(k);
            let (prev, cur) = (&lower[k - 1], &mut upper[0]);
            for s in (r..=max_sum).rev() {
                cur[s] += prev[s - r];
            }
        }
    }
    let dist = &counts[nx];
    let total: u128 = dist.iter().sum();
    let le: u128 = dist[..=observed].iter().sum();
    let ge: u128 = dist[observed..].iter().sum();
    ((2 * le.min(ge)) as f64 / total as f64).min(1.0)
}

/// `(#{x_i > y_j} - #{x_i < y_j}) / (n_x n_y)`.
pub fn cliffs_delta(x: &[f64], y: &[f64]) -> Result<f64> {
    check_sample("cliffs_delta x", x)?;
    check_sample("cliffs_delta y", y)?;
    let mut balance: i64 = 0;
    for a in x {
        for b in y {
            balance += match a.partial_cmp(b) {
                Some(std::cmp::Ordering::Greater) => 1,
                Some(std::cmp::Ordering::Less) => -1,
                _ => 0,
            };
        }
    }
    Ok(balance as f64 / (x.len() * y.len()) as f64)
}
