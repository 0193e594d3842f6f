//! Property tests over the public API.

use approx::assert_abs_diff_eq;
use proptest::prelude::*;

use orient_lab::coding::{cohens_d, cronbach_alpha, d_prime, descriptives, turn_slope, ResponseRecord};
use orient_lab::geometry::{ear, mean_eop_frame, polygon_area, smooth_series, EyeIndexMap};
use orient_lab::stats::{cliffs_delta, mann_whitney_u, permutation_test, MwuMode, PermStatistic};
use orient_lab::stream::{parse_manifest, parse_stream, serialize_manifest, serialize_stream, validate_stream, Point};
use orient_lab::synth::{gen_landmark_stream, random_script, template_eye};
use orient_lab::trials::analyze_stream;
use orient_lab::{Group, Stimulus};

fn point() -> impl Strategy<Value = Point> {
    (-500.0f64..500.0, -500.0f64..500.0).prop_map(|(x, y)| Point::new(x, y))
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(64))]

    #[test]
    fn ear_is_similarity_invariant(
        open in 0.05f64..0.6,
        scale in 0.1f64..20.0,
        angle in 0.0f64..std::f64::consts::TAU,
        dx in -1000.0f64..1000.0,
        dy in -1000.0f64..1000.0,
    ) {
        let eye = template_eye(open, Point::new(0.0, 0.0));
        let (s, c) = angle.sin_cos();
        let moved = eye.map(|p| Point::new(scale * (c * p.x - s * p.y) + dx, scale * (s * p.x + c * p.y) + dy));
        prop_assert!((ear(&eye).unwrap() - ear(&moved).unwrap()).abs() < 1e-9);
    }

    #[test]
    fn polygon_area_ignores_start_and_direction(pts in prop::collection::vec(point(), 3..12), shift in 0usize..12) {
        let a = polygon_area(&pts).unwrap();
        let mut rotated = pts.clone();
        rotated.rotate_left(shift % pts.len());
        let mut reversed = pts.clone();
        reversed.reverse();
        let tol = 1e-9 * a.max(1.0);
        prop_assert!((polygon_area(&rotated).unwrap() - a).abs() <= tol);
        prop_assert!((polygon_area(&reversed).unwrap() - a).abs() <= tol);
    }

    #[test]
    fn mean_eop_is_symmetric(a in 0.0f64..100.0, b in 0.0f64..100.0) {
        prop_assert_eq!(mean_eop_frame(a, b), mean_eop_frame(b, a));
    }

    #[test]
    fn smoothing_stays_within_window_range(
        values in prop::collection::vec(prop::option::weighted(0.8, 0.0f64..100.0), 1..60),
        half in 0usize..5,
    ) {
        let w = 2 * half + 1;
        let out = smooth_series(&values, w).unwrap();
        for (i, v) in out.iter().enumerate() {
            let Some(v) = v else {
                prop_assert!(values[i].is_none());
                continue;
            };
            let lo = i.saturating_sub(half);
            let hi = (i + half + 1).min(values.len());
            let window: Vec<f64> = values[lo..hi].iter().flatten().copied().collect();
            let min = window.iter().copied().fold(f64::INFINITY, f64::min);
            let max = window.iter().copied().fold(f64::NEG_INFINITY, f64::max);
            prop_assert!(min <= *v && *v <= max);
        }
    }

    #[test]
    fn effect_sizes_are_antisymmetric_and_location_free(
        ma in -3.0f64..3.0, sa in 0.1f64..2.0, mb in -3.0f64..3.0, sb in 0.1f64..2.0, shift in -5.0f64..5.0,
    ) {
        let d = cohens_d(ma, sa, mb, sb).unwrap();
        prop_assert_eq!(d, -cohens_d(mb, sb, ma, sa).unwrap());
        prop_assert_eq!(d_prime(ma, sa, mb, sb).unwrap(), d.abs());
        assert_abs_diff_eq!(cohens_d(ma + shift, sa, mb + shift, sb).unwrap(), d, epsilon = 1e-9);
        assert_abs_diff_eq!(turn_slope(ma + shift, mb + shift), turn_slope(ma, mb), epsilon = 1e-12);
    }

    #[test]
    fn alpha_never_exceeds_one(items in prop::collection::vec(prop::collection::vec(0u8..=2, 12), 2..6)) {
        let items: Vec<Vec<f64>> = items.into_iter().map(|c| c.into_iter().map(f64::from).collect()).collect();
        if let Some(a) = cronbach_alpha(&items).unwrap() {
            prop_assert!(a <= 1.0 + 1e-12);
        }
    }

    #[test]
    fn alpha_is_one_for_shifted_copies(base in prop::collection::vec(0.0f64..2.0, 5..40), shifts in prop::collection::vec(-3.0f64..3.0, 2..5)) {
        prop_assume!(base.iter().any(|v| (v - base[0]).abs() > 1e-6));
        let items: Vec<Vec<f64>> = shifts.iter().map(|s| base.iter().map(|v| v + s).collect()).collect();
        assert_abs_diff_eq!(cronbach_alpha(&items).unwrap().unwrap(), 1.0, epsilon = 1e-12);
    }

    #[test]
    fn percentages_sum_to_one_hundred(codes in prop::collection::vec(0u8..=2, 1..80)) {
        let records: Vec<ResponseRecord> = codes
            .iter()
            .enumerate()
            .map(|(i, &c)| ResponseRecord {
                participant_id: format!("P{}", i / 3),
                group: Group::TD,
                stimulus: Stimulus::NW,
                turn: (i % 3) as u8 + 1,
                response: c,
            })
            .collect();
        let d = descriptives(&records, Group::TD, Stimulus::NW).unwrap();
        prop_assert!((d.pct_full + d.pct_partial + d.pct_none - 100.0).abs() <= 1e-9);
    }

    #[test]
    fn cliffs_delta_identity_with_ties(
        x in prop::collection::vec(0u8..6, 1..25),
        y in prop::collection::vec(0u8..6, 1..25),
    ) {
        let x: Vec<f64> = x.into_iter().map(f64::from).collect();
        let y: Vec<f64> = y.into_iter().map(f64::from).collect();
        let r = mann_whitney_u(&x, &y, MwuMode::Auto).unwrap();
        let via_u = 2.0 * r.statistic / (x.len() * y.len()) as f64 - 1.0;
        prop_assert!((cliffs_delta(&x, &y).unwrap() - via_u).abs() <= 1e-12);
    }
}

proptest! {
    #![proptest_config(ProptestConfig::with_cases(16))]

    #[test]
    fn stream_round_trip_is_byte_exact(seed in any::<u64>()) {
        let (stream, _, _) = gen_landmark_stream(&random_script(seed)).unwrap();
        let text = serialize_stream(&stream);
        let parsed = parse_stream(text.as_bytes()).unwrap();
        prop_assert_eq!(&parsed, &stream);
        prop_assert_eq!(serialize_stream(&parsed), text);
        prop_assert_eq!(validate_stream(&parsed), validate_stream(&stream));
        for f in &parsed.frames {
            let full = f.bbox.is_some() && f.confidence > 0.0 && !f.landmarks.is_empty();
            let empty = f.bbox.is_none() && f.confidence == 0.0 && f.landmarks.is_empty();
            prop_assert!(full || empty);
        }
    }

    #[test]
    fn manifest_order_does_not_matter(seed in any::<u64>(), rot in 0usize..15) {
        let script = random_script(seed);
        let (stream, manifest, _) = gen_landmark_stream(&script).unwrap();
        let text = serialize_manifest(&manifest);
        let mut lines: Vec<&str> = text.lines().collect();
        let events = &mut lines[1..];
        if !events.is_empty() {
            events.rotate_left(rot % events.len());
            events.reverse();
        }
        let shuffled = parse_manifest(lines.join("\n").as_bytes()).unwrap();
        let map = EyeIndexMap::for_scheme(script.scheme);
        let a = analyze_stream(&stream, &manifest, &script.profile, &map, &script.params).unwrap();
        let b = analyze_stream(&stream, &shuffled, &script.profile, &map, &script.params).unwrap();
        prop_assert_eq!(&a, &b);
        for t in &a {
            if !t.responded {
                prop_assert!(t.latency_s.is_none());
                prop_assert!(t.duration_s.unwrap_or(0.0) == 0.0);
            }
        }
    }
}

#[test]
fn permutation_p_is_thread_count_independent() {
    let x: Vec<f64> = (0..30).map(|i| f64::from(i) * 0.37 % 5.0).collect();
    let y: Vec<f64> = (0..25).map(|i| f64::from(i) * 0.53 % 5.5).collect();
    let run = |threads| {
        rayon::ThreadPoolBuilder::new()
            .num_threads(threads)
            .build()
            .unwrap()
            .install(|| permutation_test(&x, &y, PermStatistic::UStatistic, 5000, 99).unwrap())
    };
    assert_eq!(run(1), run(4));
}
