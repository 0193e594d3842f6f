//! Statistical battery and its CSV tables.
//!
//! Video metrics are compared at trial level; latency uses responded trials
//! only. Ordinal codes enter the same tests as the variable `response`.

use std::collections::BTreeMap;

use super::format::{num, opt, Table};
use crate::coding::{
    cohens_d, cronbach_alpha, descriptives, group_effect, group_turn_slope, turn_items, Granularity, ResponseRecord,
};
use crate::stats::{
    holm_adjust_results, kruskal_wallis_h, mann_whitney_u, mean, median, ols_slope, per_subject_slope,
    permutation_test, sample_sd, spearman_rho, MwuMode, PermStatistic, StatResult,
};
use crate::trials::{TrialMetrics, Variable};
use crate::types::TURNS;
use crate::{Group, Stimulus};

/// Group and (turn, value) points of one participant and stimulus.
type TurnPoints = (Group, Vec<(f64, f64)>);

pub const VIDEO_VARIABLES: [Variable; 3] = [Variable::Latency, Variable::Duration, Variable::MeanEop];
const RESPONSE: &str = "response";

/// Observations of one source/variable, keyed by group and stimulus.
struct Samples {
    source: &'static str,
    variable: &'static str,
    values: BTreeMap<(Group, Stimulus), Vec<f64>>,
}

impl Samples {
    fn get(&self, g: Group, s: Stimulus) -> &[f64] {
        self.values.get(&(g, s)).map_or(&[], Vec::as_slice)
    }
}

fn video_samples(trials: &[TrialMetrics], variable: Variable) -> Samples {
    let mut values: BTreeMap<(Group, Stimulus), Vec<f64>> = BTreeMap::new();
    for t in trials {
        if let Some(v) = t.value(variable) {
            values.entry((t.group, t.stimulus)).or_default().push(v);
        }
    }
    Samples {
        source: "video",
        variable: variable.as_str(),
        values,
    }
}

fn coding_samples(records: &[ResponseRecord]) -> Samples {
    let mut values: BTreeMap<(Group, Stimulus), Vec<f64>> = BTreeMap::new();
    for r in records {
        values
            .entry((r.group, r.stimulus))
            .or_default()
            .push(f64::from(r.response));
    }
    Samples {
        source: "coding",
        variable: RESPONSE,
        values,
    }
}

/// Inputs of the battery; either side may be absent.
pub struct Analysis<'a> {
    pub trials: Option<&'a [TrialMetrics]>,
    pub records: Option<&'a [ResponseRecord]>,
    pub n_perm: usize,
    pub seed: u64,
}

impl Analysis<'_> {
    fn families(&self) -> Vec<Samples> {
        let mut out = Vec::new();
        if let Some(trials) = self.trials {
            out.extend(VIDEO_VARIABLES.iter().map(|&v| video_samples(trials, v)));
        }
        if let Some(records) = self.records {
            out.push(coding_samples(records));
        }
        out
    }

    /// TD vs ASD per stimulus and variable. Holm runs over the stimuli of
    /// each variable; permutation seeds advance by one per test.
    pub fn between_group(&self) -> Table {
        let mut table = Table::new(&[
            "source",
            "variable",
            "stimulus",
            "test",
            "n_td",
            "n_asd",
            "statistic",
            "p_value",
            "p_holm",
            "cliffs_delta",
            "cohens_d",
            "perm_p",
            "perm_seed",
        ]);
        let mut test_index = 0u64;
        for fam in self.families() {
            let mut results: Vec<(Stimulus, StatResult)> = Vec::new();
            for s in Stimulus::ALL {
                let (td, asd) = (fam.get(Group::TD, s), fam.get(Group::ASD, s));
                if let Ok(r) = mann_whitney_u(td, asd, MwuMode::Auto) {
                    results.push((s, r));
                }
            }
            let mut stats: Vec<StatResult> = results.iter().map(|(_, r)| r.clone()).collect();
            holm_adjust_results(&mut stats);
            for s in Stimulus::ALL {
                let (td, asd) = (fam.get(Group::TD, s), fam.get(Group::ASD, s));
                let seed = self.seed.wrapping_add(test_index);
                test_index += 1;
                let row_prefix = |test: &str| {
                    vec![
                        fam.source.to_owned(),
                        fam.variable.to_owned(),
                        s.to_string(),
                        test.to_owned(),
                        td.len().to_string(),
                        asd.len().to_string(),
                    ]
                };
                let Some(i) = results.iter().position(|(rs, _)| *rs == s) else {
                    let mut row = row_prefix("");
                    row.extend(std::iter::repeat_n(String::new(), 7));
                    table.push(row);
                    continue;
                };
                let r = &stats[i];
                let d = match (mean(td), sample_sd(td), mean(asd), sample_sd(asd)) {
                    (Some(mt), Some(st), Some(ma), Some(sa)) => cohens_d(mt, st, ma, sa).ok(),
                    _ => None,
                };
                let perm = permutation_test(td, asd, PermStatistic::MeanDiff, self.n_perm, seed).ok();
                let mut row = row_prefix(r.test_name);
                row.extend([
                    num(r.statistic),
                    num(r.p_value),
                    opt(r.p_adjusted),
                    opt(r.effect_size),
                    opt(d),
                    opt(perm.as_ref().map(|p| p.p_value)),
                    perm.map(|_| seed.to_string()).unwrap_or_default(),
                ]);
                table.push(row);
            }
        }
        table
    }

    /// Kruskal-Wallis across stimuli within each group, followed by
    /// Holm-adjusted pairwise Mann-Whitney contrasts.
    pub fn within_group(&self) -> Table {
        let mut table = Table::new(&[
            "group",
            "source",
            "variable",
            "test",
            "contrast",
            "n_a",
            "n_b",
            "statistic",
            "p_value",
            "p_holm",
            "effect_name",
            "effect_size",
            "mean_diff",
            "cohens_d",
        ]);
        for fam in self.families() {
            for g in Group::ALL {
                let present: Vec<(Stimulus, &[f64])> = Stimulus::ALL
                    .iter()
                    .map(|&s| (s, fam.get(g, s)))
                    .filter(|(_, v)| !v.is_empty())
                    .collect();
                let slices: Vec<&[f64]> = present.iter().map(|(_, v)| *v).collect();
                let Ok(kw) = kruskal_wallis_h(&slices) else { continue };
                let total: usize = slices.iter().map(|v| v.len()).sum();
                table.push(vec![
                    g.to_string(),
                    fam.source.into(),
                    fam.variable.into(),
                    kw.test_name.into(),
                    "all".into(),
                    total.to_string(),
                    String::new(),
                    num(kw.statistic),
                    num(kw.p_value),
                    String::new(),
                    kw.effect_name.into(),
                    opt(kw.effect_size),
                    String::new(),
                    String::new(),
                ]);

                let mut pairs = Vec::new();
                for i in 0..present.len() {
                    for j in i + 1..present.len() {
                        let (a, b) = (present[i], present[j]);
                        if let Ok(r) = mann_whitney_u(a.1, b.1, MwuMode::Auto) {
                            pairs.push((a, b, r));
                        }
                    }
                }
                let mut stats: Vec<StatResult> = pairs.iter().map(|p| p.2.clone()).collect();
                holm_adjust_results(&mut stats);
                for ((a, b, _), r) in pairs.iter().zip(&stats) {
                    let diff = mean(a.1).zip(mean(b.1)).map(|(x, y)| x - y);
                    let d = match (mean(a.1), sample_sd(a.1), mean(b.1), sample_sd(b.1)) {
                        (Some(ma), Some(sa), Some(mb), Some(sb)) => cohens_d(ma, sa, mb, sb).ok(),
                        _ => None,
                    };
                    table.push(vec![
                        g.to_string(),
                        fam.source.into(),
                        fam.variable.into(),
                        r.test_name.into(),
                        format!("{}-{}", a.0, b.0),
                        a.1.len().to_string(),
                        b.1.len().to_string(),
                        num(r.statistic),
                        num(r.p_value),
                        opt(r.p_adjusted),
                        r.effect_name.into(),
                        opt(r.effect_size),
                        opt(diff),
                        opt(d),
                    ]);
                }
            }
        }
        table
    }

    /// Spearman correlations between the video variables within each group.
    pub fn correlations(&self) -> Table {
        let mut table = Table::new(&["group", "x", "y", "n", "rho", "p_value"]);
        let Some(trials) = self.trials else { return table };
        let pairs = [
            (Variable::Latency, Variable::Duration),
            (Variable::Duration, Variable::MeanEop),
            (Variable::Latency, Variable::MeanEop),
        ];
        for g in Group::ALL {
            for (vx, vy) in pairs {
                let (xs, ys): (Vec<f64>, Vec<f64>) = trials
                    .iter()
                    .filter(|t| t.group == g)
                    .filter_map(|t| t.value(vx).zip(t.value(vy)))
                    .unzip();
                let r = spearman_rho(&xs, &ys).ok();
                table.push(vec![
                    g.to_string(),
                    vx.as_str().into(),
                    vy.as_str().into(),
                    xs.len().to_string(),
                    opt(r.as_ref().map(|r| r.statistic)),
                    opt(r.as_ref().map(|r| r.p_value)),
                ]);
            }
        }
        table
    }

    /// Cronbach's alpha over the three turns of each coded stimulus.
    pub fn reliability(&self) -> Table {
        let mut table = Table::new(&["group", "stimulus", "n", "alpha"]);
        let Some(records) = self.records else { return table };
        for g in Group::ALL {
            for s in Stimulus::ALL {
                let items = turn_items(records, g, s);
                let n = items[0].len();
                let alpha = cronbach_alpha(&items).ok().flatten();
                table.push(vec![g.to_string(), s.to_string(), n.to_string(), opt(alpha)]);
            }
        }
        table
    }

    /// Per-participant OLS slopes across turns.
    pub fn slopes_by_subject(&self) -> Table {
        let mut table = Table::new(&[
            "participant",
            "group",
            "stimulus",
            "source",
            "variable",
            "beta1",
            "n_turns",
        ]);
        for row in self.subject_slopes() {
            table.push(vec![
                row.participant,
                row.group.to_string(),
                row.stimulus.to_string(),
                row.source.into(),
                row.variable.into(),
                num(row.beta1),
                row.n_turns.to_string(),
            ]);
        }
        table
    }

    fn subject_slopes(&self) -> Vec<SubjectSlope> {
        let mut out = Vec::new();
        if let Some(trials) = self.trials {
            let mut by_key: BTreeMap<(&str, Stimulus), Vec<&TrialMetrics>> = BTreeMap::new();
            for t in trials {
                by_key
                    .entry((t.participant_id.as_str(), t.stimulus))
                    .or_default()
                    .push(t);
            }
            for group in by_key.values() {
                for v in VIDEO_VARIABLES {
                    if let Some(r) = per_subject_slope(group, v) {
                        out.push(SubjectSlope {
                            participant: r.participant_id,
                            group: r.group,
                            stimulus: r.stimulus,
                            source: "video",
                            variable: v.as_str(),
                            beta1: r.beta1,
                            n_turns: r.n_turns,
                        });
                    }
                }
            }
        }
        if let Some(records) = self.records {
            let mut by_key: BTreeMap<(&str, Stimulus), TurnPoints> = BTreeMap::new();
            for r in records {
                by_key
                    .entry((r.participant_id.as_str(), r.stimulus))
                    .or_insert((r.group, Vec::new()))
                    .1
                    .push((f64::from(r.turn), f64::from(r.response)));
            }
            for ((p, s), (g, points)) in by_key {
                if let Some(beta1) = ols_slope(&points) {
                    out.push(SubjectSlope {
                        participant: p.to_owned(),
                        group: g,
                        stimulus: s,
                        source: "coding",
                        variable: RESPONSE,
                        beta1,
                        n_turns: points.len(),
                    });
                }
            }
        }
        out.sort_by(|a, b| {
            (&a.participant, a.stimulus, a.source, a.variable).cmp(&(&b.participant, b.stimulus, b.source, b.variable))
        });
        out
    }

    /// Group means of the per-subject slopes; for codes also the group-level
    /// turn slope `(R3 - R1) / 2`.
    pub fn slopes_by_group(&self) -> Table {
        let mut table = Table::new(&[
            "group",
            "stimulus",
            "source",
            "variable",
            "n",
            "mean_beta1",
            "sd_beta1",
            "turn_slope",
        ]);
        let slopes = self.subject_slopes();
        let mut keys: Vec<(&'static str, &'static str)> = Vec::new();
        if self.trials.is_some() {
            keys.extend(VIDEO_VARIABLES.iter().map(|v| ("video", v.as_str())));
        }
        if self.records.is_some() {
            keys.push(("coding", RESPONSE));
        }
        for g in Group::ALL {
            for s in Stimulus::ALL {
                for &(source, variable) in &keys {
                    let betas: Vec<f64> = slopes
                        .iter()
                        .filter(|r| r.group == g && r.stimulus == s && r.source == source && r.variable == variable)
                        .map(|r| r.beta1)
                        .collect();
                    let turn_slope = match (source, self.records) {
                        ("coding", Some(records)) => group_turn_slope(records, g, s),
                        _ => None,
                    };
                    table.push(vec![
                        g.to_string(),
                        s.to_string(),
                        source.into(),
                        variable.into(),
                        betas.len().to_string(),
                        opt(mean(&betas)),
                        opt(sample_sd(&betas)),
                        opt(turn_slope),
                    ]);
                }
            }
        }
        table
    }

    /// Mean, SD and response-type percentages of the codes.
    pub fn coding_descriptives(&self) -> Table {
        let mut table = Table::new(&[
            "group",
            "stimulus",
            "n",
            "mu",
            "sigma",
            "pct_full",
            "pct_partial",
            "pct_none",
        ]);
        let Some(records) = self.records else { return table };
        for g in Group::ALL {
            for s in Stimulus::ALL {
                if let Some(d) = descriptives(records, g, s) {
                    table.push(vec![
                        g.to_string(),
                        s.to_string(),
                        d.n.to_string(),
                        num(d.mu),
                        opt(d.sigma),
                        num(d.pct_full),
                        num(d.pct_partial),
                        num(d.pct_none),
                    ]);
                }
            }
        }
        table
    }

    /// Cohen's d and d' between groups for every stimulus, at trial and
    /// participant granularity.
    pub fn coding_effects(&self) -> Table {
        let mut table = Table::new(&["stimulus", "granularity", "n_td", "n_asd", "cohens_d", "d_prime"]);
        let Some(records) = self.records else { return table };
        for s in Stimulus::ALL {
            for gran in [Granularity::Trial, Granularity::Participant] {
                let e = group_effect(records, s, gran);
                table.push(vec![
                    s.to_string(),
                    gran.as_str().into(),
                    e.n_td.to_string(),
                    e.n_asd.to_string(),
                    opt(e.cohens_d),
                    opt(e.d_prime),
                ]);
            }
        }
        table
    }

    /// Mean, SD and median of each video variable.
    pub fn video_descriptives(&self) -> Table {
        let mut table = Table::new(&["group", "stimulus", "variable", "n", "mean", "sd", "median"]);
        let Some(trials) = self.trials else { return table };
        for g in Group::ALL {
            for s in Stimulus::ALL {
                for v in VIDEO_VARIABLES {
                    let mut values: Vec<f64> = trials
                        .iter()
                        .filter(|t| t.group == g && t.stimulus == s)
                        .filter_map(|t| t.value(v))
                        .collect();
                    if values.is_empty() {
                        continue;
                    }
                    let (m, sd) = (mean(&values), sample_sd(&values));
                    table.push(vec![
                        g.to_string(),
                        s.to_string(),
                        v.as_str().into(),
                        values.len().to_string(),
                        opt(m),
                        opt(sd),
                        opt(median(&mut values)),
                    ]);
                }
            }
        }
        table
    }
}

struct SubjectSlope {
    participant: String,
    group: Group,
    stimulus: Stimulus,
    source: &'static str,
    variable: &'static str,
    beta1: f64,
    n_turns: usize,
}

/// One row per trial.
pub fn trial_table(trials: &[TrialMetrics]) -> Table {
    let mut table = Table::new(&[
        "participant",
        "group",
        "stimulus",
        "turn",
        "onset_ms",
        "latency_s",
        "duration_s",
        "mean_eop",
        "responded",
        "valid_frame_fraction",
    ]);
    for t in trials {
        table.push(vec![
            t.participant_id.clone(),
            t.group.to_string(),
            t.stimulus.to_string(),
            t.turn.to_string(),
            num(t.onset_ms),
            opt(t.latency_s),
            opt(t.duration_s),
            opt(t.mean_eop),
            t.responded.to_string(),
            num(t.valid_frame_fraction),
        ]);
    }
    table
}

/// Mean of `variable` per group, stimulus and turn.
pub fn turn_means(trials: &[TrialMetrics], variable: Variable) -> BTreeMap<(Group, Stimulus, u8), f64> {
    let mut out = BTreeMap::new();
    for g in Group::ALL {
        for s in Stimulus::ALL {
            for t in TURNS {
                let v: Vec<f64> = trials
                    .iter()
                    .filter(|m| m.group == g && m.stimulus == s && m.turn == t)
                    .filter_map(|m| m.value(variable))
                    .collect();
                if let Some(m) = mean(&v) {
                    out.insert((g, s, t), m);
                }
            }
        }
    }
    out
}
