use crate::trials::{TrialMetrics, Variable};
use crate::{Group, Stimulus};

/// Per-participant trend of one variable across turns.
#[derive(Debug, Clone, PartialEq)]
pub struct SlopeRecord {
    pub participant_id: String,
    pub group: Group,
    pub stimulus: Stimulus,
    pub variable: Variable,
    pub beta1: f64,
    pub n_turns: usize,
}

/// Least-squares slope of `y` on `x`; `None` with fewer than two distinct `x`.
pub fn ols_slope(points: &[(f64, f64)]) -> Option<f64> {
    if points.len() < 2 {
        return None;
    }
    let n = points.len() as f64;
    let mx = points.iter().map(|p| p.0).sum::<f64>() / n;
    let my = points.iter().map(|p| p.1).sum::<f64>() / n;
    let sxx: f64 = points.iter().map(|p| (p.0 - mx).powi(2)).sum();
    if sxx == 0.0 {
        return None;
    }
    let sxy: f64 = points.iter().map(|p| (p.0 - mx) * (p.1 - my)).sum();
    Some(sxy / sxx)
}

/// Slope of `variable` against turn index over one participant's trials of a
/// single stimulus. Turns with an undefined value are skipped.
pub fn per_subject_slope(trials: &[&TrialMetrics], variable: Variable) -> Option<SlopeRecord> {
    let first = trials.first()?;
    debug_assert!(trials
        .iter()
        .all(|t| t.participant_id == first.participant_id && t.stimulus == first.stimulus));
    let points: Vec<(f64, f64)> = trials
        .iter()
        .filter_map(|t| t.value(variable).map(|v| (f64::from(t.turn), v)))
        .collect();
    let beta1 = ols_slope(&points)?;
    Some(SlopeRecord {
        participant_id: first.participant_id.clone(),
        group: first.group,
        stimulus: first.stimulus,
        variable,
        beta1,
        n_turns: points.len(),
    })
}

#[cfg(test)]
mod tests {
    use proptest::prelude::*;

    use super::*;

    fn trial(turn: u8, eop: Option<f64>) -> TrialMetrics {
        TrialMetrics {
            participant_id: "P7".into(),
            group: Group::ASD,
            stimulus: Stimulus::NW,
            turn,
            onset_ms: 0.0,
            end_ms: 1.0,
            latency_s: None,
            duration_s: Some(1.0),
            mean_eop: eop,
            valid_frame_fraction: 1.0,
            responded: false,
        }
    }

    #[test]
    fn two_point_slope() {
        let t = [trial(1, Some(5.0)), trial(2, Some(3.0))];
        let r = per_subject_slope(&[&t[0], &t[1]], Variable::MeanEop).unwrap();
        assert_eq!(r.beta1, -2.0);
        assert_eq!(r.n_turns, 2);
        assert_eq!(ols_slope(&[(1.0, 5.0), (3.0, 3.0)]), Some(-1.0));
    }

    #[test]
    fn constant_values_have_zero_slope() {
        let t = [trial(1, Some(4.0)), trial(2, Some(4.0)), trial(3, Some(4.0))];
        let refs: Vec<&TrialMetrics> = t.iter().collect();
        assert_eq!(per_subject_slope(&refs, Variable::MeanEop).unwrap().beta1, 0.0);
    }

    #[test]
    fn too_few_turns_is_absent() {
        let t = [trial(1, Some(4.0)), trial(2, None), trial(3, None)];
        let refs: Vec<&TrialMetrics> = t.iter().collect();
        assert_eq!(per_subject_slope(&refs, Variable::MeanEop), None);
        // latency is censored everywhere
        assert_eq!(per_subject_slope(&refs, Variable::Latency), None);
        assert_eq!(per_subject_slope(&[], Variable::Duration), None);
    }

    proptest! {
        #[test]
        fn recovers_exact_lines(a in -100.0f64..100.0, b in -50.0f64..50.0) {
            let pts: Vec<(f64, f64)> = [1.0, 2.0, 3.0].iter().map(|&x| (x, a + b * x)).collect();
            let s = ols_slope(&pts).unwrap();
            prop_assert!((s - b).abs() <= 1e-12 * b.abs().max(a.abs()).max(1.0));
        }
    }
}
