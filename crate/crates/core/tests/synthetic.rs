use orient_lab::coding::{observations, wide_to_long, write_wide_table, Granularity};
use orient_lab::geometry::EyeIndexMap;
use orient_lab::report::svg::strip_medians;
use orient_lab::stats::{mann_whitney_u, mean, MwuMode};
use orient_lab::synth::dataset::participant_script;
use orient_lab::synth::{gen_landmark_stream, gen_ordinal_cohort, CohortProfile, DatasetSpec};
use orient_lab::trials::{analyze_stream, TrialMetrics};
use orient_lab::{Group, Stimulus};

#[test]
fn same_seed_same_cohort_bytes() {
    let a = write_wide_table(&gen_ordinal_cohort(&CohortProfile::reference(8)).unwrap()).unwrap();
    let b = write_wide_table(&gen_ordinal_cohort(&CohortProfile::reference(8)).unwrap()).unwrap();
    let c = write_wide_table(&gen_ordinal_cohort(&CohortProfile::reference(9)).unwrap()).unwrap();
    assert_eq!(a, b);
    assert_ne!(a, c);
}

#[test]
fn identical_profiles_are_rarely_significant() {
    // Two groups drawn from the same TD cells: the test should reject at
    // roughly its nominal rate.
    let reps = 400;
    let mut hits = 0;
    for seed in 0..reps {
        let mut profile = CohortProfile::reference(seed);
        let td: Vec<_> = profile.cells.iter().filter(|c| c.group == Group::TD).cloned().collect();
        for cell in profile.cells.iter_mut().filter(|c| c.group == Group::ASD) {
            let twin = td.iter().find(|t| t.stimulus == cell.stimulus).unwrap();
            cell.dist = twin.dist;
        }
        profile.n_asd = profile.n_td;
        let records = wide_to_long(&gen_ordinal_cohort(&profile).unwrap()).unwrap().records;
        let x = observations(&records, Group::TD, Stimulus::NM, Granularity::Participant);
        let y = observations(&records, Group::ASD, Stimulus::NM, Granularity::Participant);
        hits += usize::from(mann_whitney_u(&x, &y, MwuMode::Auto).unwrap().p_value < 0.05);
    }
    let rate = hits as f64 / reps as f64;
    assert!((0.02..=0.08).contains(&rate), "false-positive rate {rate}");
}

fn dataset_trials(spec: &DatasetSpec) -> Vec<TrialMetrics> {
    spec.participants()
        .iter()
        .enumerate()
        .flat_map(|(i, (group, id))| {
            let script = participant_script(spec, i, *group, id);
            let (stream, manifest, _) = gen_landmark_stream(&script).unwrap();
            let map = EyeIndexMap::for_scheme(script.scheme);
            analyze_stream(&stream, &manifest, &script.profile, &map, &script.params).unwrap()
        })
        .collect()
}

#[test]
fn generated_video_cohort_recovers_its_parameters() {
    let spec = DatasetSpec {
        seed: 2,
        n_td: 40,
        n_asd: 4,
        ..DatasetSpec::default()
    };
    let trials = dataset_trials(&spec);
    let latency: Vec<f64> = trials
        .iter()
        .filter(|t| t.group == Group::TD && t.stimulus == Stimulus::NR)
        .filter_map(|t| t.latency_s)
        .collect();
    // 1.42 s with SD 0.39; allow four standard errors plus one frame.
    let se = 0.39 / (latency.len() as f64).sqrt();
    let m = mean(&latency).unwrap();
    assert!(
        (m - 1.42).abs() < 4.0 * se + 1.0 / 30.0,
        "NR latency mean {m} over {}",
        latency.len()
    );

    let medians: Vec<f64> = strip_medians(&trials, Group::TD)
        .into_iter()
        .map(|(_, m)| m.unwrap())
        .collect();
    assert!(medians.windows(2).all(|w| w[0] > w[1]), "{medians:?}");
}
