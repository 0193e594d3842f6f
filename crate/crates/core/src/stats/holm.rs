use crate::{Error, Result};

/// Holm step-down adjustment. The output is aligned with the input order.
pub fn holm_adjust(p_values: &[f64]) -> Result<Vec<f64>> {
    if let Some(bad) = p_values.iter().find(|p| !(0.0..=1.0).contains(*p)) {
        return Err(Error::InvalidInput(format!("p-value {bad} outside [0,1]")));
    }
    let m = p_values.len();
    let mut order: Vec<usize> = (0..m).collect();
    order.sort_by(|&a, &b| p_values[a].total_cmp(&p_values[b]));
    let mut adjusted = vec![0.0; m];
    let mut running = 0.0f64;
    for (rank, &i) in order.iter().enumerate() {
        running = running.max(((m - rank) as f64 * p_values[i]).min(1.0));
        adjusted[i] = running;
    }
    Ok(adjusted)
}

#[cfg(test)]
mod tests {
    use approx::assert_abs_diff_eq;
    use proptest::prelude::*;

    use super::*;

    #[test]
    fn worked_example() {
        let adj = holm_adjust(&[0.01, 0.04, 0.03]).unwrap();
        for (a, e) in adj.iter().zip([0.03, 0.06, 0.06]) {
            assert_abs_diff_eq!(*a, e, epsilon = 1e-15);
        }
    }

    #[test]
    fn single_and_equal_values() {
        assert_eq!(holm_adjust(&[0.2]).unwrap(), vec![0.2]);
        assert_eq!(holm_adjust(&[0.05; 4]).unwrap(), vec![0.2; 4]);
        assert!(holm_adjust(&[]).unwrap().is_empty());
    }

    #[test]
    fn caps_at_one_and_rejects_out_of_range() {
        assert_eq!(holm_adjust(&[0.6, 0.7]).unwrap(), vec![1.0, 1.0]);
        assert!(holm_adjust(&[0.1, 1.5]).is_err());
        assert!(holm_adjust(&[-0.1]).is_err());
    }

    proptest! {
        #[test]
        fn adjusted_dominates_raw_and_is_monotone(p in prop::collection::vec(0.0f64..=1.0, 1..30)) {
            let adj = holm_adjust(&p).unwrap();
            let mut pairs: Vec<(f64, f64)> = p.iter().copied().zip(adj.iter().copied()).collect();
            pairs.sort_by(|a, b| a.0.total_cmp(&b.0));
            for w in pairs.windows(2) {
                prop_assert!(w[1].1 >= w[0].1);
            }
            for (raw, a) in p.iter().zip(&adj) {
                prop_assert!(a >= raw && *a <= 1.0);
            }
        }
    }
}
