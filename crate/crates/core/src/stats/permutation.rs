use rand::{RngCore, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rayon::prelude::*;

use super::rank::mid_ranks;
use super::{check_sample, StatResult};
use crate::{Error, Result};

/// Permutations per independently seeded batch. Batch `b` draws from ChaCha8
/// stream `b` of the run seed, so the result is the same for any thread count.
pub const PERM_BATCH: usize = 1000;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum PermStatistic {
    /// `|mean(x) - mean(y)|`
    MeanDiff,
    /// `|U_x - n_x n_y / 2|` on pooled mid-ranks.
    UStatistic,
}

impl PermStatistic {
    pub fn as_str(self) -> &'static str {
        match self {
            PermStatistic::MeanDiff => "mean_diff",
            PermStatistic::UStatistic => "u_statistic",
        }
    }
}

/// Uniform integer in `0..n` (Lemire's multiply-and-reject).
fn below(rng: &mut ChaCha8Rng, n: usize) -> usize {
    let n = n as u64;
    let threshold = n.wrapping_neg() % n;
    loop {
        let m = (rng.next_u64() as u128) * (n as u128);
        if (m as u64) >= threshold {
            return (m >> 64) as usize;
        }
    }
}

/// Two-sided Monte Carlo permutation test:
/// `p = (1 + #{T_perm >= T_obs}) / (n_perm + 1)`.
pub fn permutation_test(
    x: &[f64],
    y: &[f64],
    statistic: PermStatistic,
    n_perm: usize,
    seed: u64,
) -> Result<StatResult> {
    check_sample("permutation_test x", x)?;
    check_sample("permutation_test y", y)?;
    if n_perm < 100 {
        return Err(Error::InvalidInput(format!(
            "n_perm must be at least 100, got {n_perm}"
        )));
    }
    let (nx, ny) = (x.len(), y.len());
    let raw: Vec<f64> = x.iter().chain(y).copied().collect();
    // Under U the test works on ranks; the rank sum stands in for the sum.
    let pooled = match statistic {
        PermStatistic::MeanDiff => raw,
        PermStatistic::UStatistic => mid_ranks(&raw),
    };
    let total: f64 = pooled.iter().sum();
    let stat = |sum_x: f64| -> f64 {
        match statistic {
            PermStatistic::MeanDiff => (sum_x / nx as f64 - (total - sum_x) / ny as f64).abs(),
            PermStatistic::UStatistic => (sum_x - (nx * (nx + 1)) as f64 / 2.0 - (nx * ny) as f64 / 2.0).abs(),
        }
    };
    let observed = stat(pooled[..nx].iter().sum());
    let threshold = observed - 1e-12 * observed.abs().max(1.0);

    let batches = n_perm.div_ceil(PERM_BATCH);
    let exceed: usize = (0..batches)
        .into_par_iter()
        .map(|b| {
            let mut rng = ChaCha8Rng::seed_from_u64(seed);
            rng.set_stream(b as u64);
            let count = PERM_BATCH.min(n_perm - b * PERM_BATCH);
            let mut work = pooled.clone();
            let n = work.len();
            let mut hits = 0;
            for _ in 0..count {
                // Partial Fisher-Yates: the first nx slots become the x sample.
                let mut sum_x = 0.0;
                for i in 0..nx {
                    let j = i + below(&mut rng, n - i);
                    work.swap(i, j);
                    sum_x += work[i];
                }
                if stat(sum_x) >= threshold {
                    hits += 1;
                }
            }
            hits
        })
        .sum();

    let p = (1 + exceed) as f64 / (n_perm + 1) as f64;
    let mut result = StatResult::new("permutation_test", observed, p, vec![nx, ny]);
    result.effect_name = statistic.as_str();
    result.seed = Some(seed);
    Ok(result)
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn identical_samples_give_p_one() {
        let x = [1.0, 4.0, 2.0, 8.0, 5.0];
        for s in [PermStatistic::MeanDiff, PermStatistic::UStatistic] {
            let r = permutation_test(&x, &x, s, 2000, 7).unwrap();
            assert!(r.p_value >= 0.99, "{s:?}: {}", r.p_value);
        }
    }

    #[test]
    fn separated_samples_are_extreme() {
        let (x, y) = ([0.0; 10], [100.0; 10]);
        let r = permutation_test(&x, &y, PermStatistic::MeanDiff, 10_000, 11).unwrap();
        assert!(r.p_value <= 0.001, "{}", r.p_value);
        assert_eq!(r.statistic, 100.0);
        assert_eq!(r.seed, Some(11));
    }

    #[test]
    fn deterministic_for_a_seed() {
        let x = [1.0, 3.0, 2.5, 7.0, 4.0, 4.5];
        let y = [2.0, 6.0, 8.0, 9.5, 5.0];
        let a = permutation_test(&x, &y, PermStatistic::UStatistic, 5000, 42).unwrap();
        let b = permutation_test(&x, &y, PermStatistic::UStatistic, 5000, 42).unwrap();
        assert_eq!(a, b);
        let c = permutation_test(&x, &y, PermStatistic::UStatistic, 5000, 43).unwrap();
        assert_ne!(a.p_value, c.p_value);
    }

    #[test]
    fn thread_count_does_not_matter() {
        let x: Vec<f64> = (0..15).map(|i| (i * 7 % 11) as f64).collect();
        let y: Vec<f64> = (0..12).map(|i| (i * 5 % 13) as f64 + 1.5).collect();
        let run = |threads| {
            rayon::ThreadPoolBuilder::new()
                .num_threads(threads)
                .build()
                .unwrap()
                .install(|| permutation_test(&x, &y, PermStatistic::MeanDiff, 7500, 3).unwrap())
        };
        assert_eq!(run(1), run(4));
    }

    #[test]
    fn argument_checks() {
        assert!(permutation_test(&[], &[1.0], PermStatistic::MeanDiff, 1000, 1).is_err());
        assert!(permutation_test(&[1.0], &[2.0], PermStatistic::MeanDiff, 99, 1).is_err());
    }

    #[test]
    fn bounded_draw_is_in_range() {
        let mut rng = ChaCha8Rng::seed_from_u64(5);
        let mut seen = [false; 7];
        for _ in 0..1000 {
            let v = below(&mut rng, 7);
            seen[v] = true;
        }
        assert!(seen.iter().all(|&s| s));
    }
}
