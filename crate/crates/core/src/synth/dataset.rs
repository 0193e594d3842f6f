//! Whole synthetic studies: one scripted stream, manifest and coding row per
//! participant.

use std::fs;
use std::path::{Path, PathBuf};

use rand::seq::SliceRandom;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal};
use rayon::prelude::*;

use super::cohort::{gen_ordinal_cohort, participant_id, CohortProfile};
use super::script::{gen_landmark_stream, Blink, FaceSegment, StreamScript};
use crate::coding::write_wide_table;
use crate::geometry::{EopScale, GateProfile};
use crate::stream::{serialize_manifest, serialize_stream, Scheme, StimulusEvent};
use crate::trials::TrialParams;
use crate::types::TURNS;
use crate::{Error, Group, Result, Stimulus};

/// Mean and SD of one per-trial quantity.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct MeanSd(pub f64, pub f64);

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct VideoParams {
    pub eop: MeanSd,
    pub duration_s: MeanSd,
    pub latency_s: MeanSd,
}

const fn vp(eop: (f64, f64), duration: (f64, f64), latency: (f64, f64)) -> VideoParams {
    VideoParams {
        eop: MeanSd(eop.0, eop.1),
        duration_s: MeanSd(duration.0, duration.1),
        latency_s: MeanSd(latency.0, latency.1),
    }
}

/// Per-stimulus trial parameters of the typical reference group.
pub const TD_VIDEO: [VideoParams; 5] = [
    vp((68.42, 9.14), (5.21, 1.37), (1.74, 0.56)),
    vp((64.87, 10.02), (5.36, 1.28), (1.69, 0.49)),
    vp((52.73, 7.86), (6.02, 1.43), (1.51, 0.47)),
    vp((48.34, 8.15), (6.19, 1.55), (1.47, 0.44)),
    vp((44.65, 7.11), (6.81, 1.68), (1.42, 0.39)),
];

/// Illustrative values for the autistic group: higher openness and longer
/// engagement for the robot voices.
pub const ASD_VIDEO: [VideoParams; 5] = [
    vp((50.0, 9.0), (4.6, 1.5), (1.80, 0.60)),
    vp((52.0, 9.0), (4.8, 1.5), (1.75, 0.60)),
    vp((61.0, 8.0), (5.9, 1.6), (1.55, 0.50)),
    vp((60.0, 8.0), (5.6, 1.6), (1.60, 0.50)),
    vp((66.0, 8.0), (7.6, 1.7), (1.45, 0.45)),
];

#[derive(Debug, Clone, PartialEq)]
pub struct DatasetSpec {
    pub seed: u64,
    pub n_td: usize,
    pub n_asd: usize,
    pub fps: u32,
    pub frames_per_stream: u64,
    pub scheme: Scheme,
    pub first_onset_ms: u64,
    pub onset_spacing_ms: u64,
    /// Probability that a trial shows no gated face at all.
    pub p_no_response: f64,
}

impl Default for DatasetSpec {
    fn default() -> Self {
        DatasetSpec {
            seed: 0,
            n_td: 93,
            n_asd: 23,
            fps: 30,
            frames_per_stream: 10_500,
            scheme: Scheme::Fan68,
            first_onset_ms: 20_000,
            onset_spacing_ms: 20_000,
            p_no_response: 0.1,
        }
    }
}

impl DatasetSpec {
    pub fn participants(&self) -> Vec<(Group, String)> {
        let td = (0..self.n_td).map(|i| (Group::TD, participant_id(Group::TD, i)));
        let asd = (0..self.n_asd).map(|i| (Group::ASD, participant_id(Group::ASD, i)));
        td.chain(asd).collect()
    }

    fn check(&self) -> Result<()> {
        if self.n_td + self.n_asd == 0 || self.fps == 0 || self.frames_per_stream == 0 {
            return Err(Error::Config("dataset needs participants, fps and frames".into()));
        }
        if self.onset_spacing_ms < 10_000 {
            return Err(Error::Config("onset spacing must leave room for a 10 s window".into()));
        }
        if !(0.0..=1.0).contains(&self.p_no_response) {
            return Err(Error::Config("p_no_response must lie in [0, 1]".into()));
        }
        Ok(())
    }
}

fn draw_clipped(rng: &mut ChaCha8Rng, p: MeanSd, lo: f64, hi: f64) -> f64 {
    let d = Normal::new(p.0, p.1).expect("finite SD");
    d.sample(rng).clamp(lo, hi)
}

/// Script for participant `index` of the dataset.
pub fn participant_script(spec: &DatasetSpec, index: usize, group: Group, id: &str) -> StreamScript {
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    rng.set_stream((1 << 32) + index as u64);
    let profile = GateProfile::default_for(group);
    let fps = u64::from(spec.fps);
    let w = profile.smooth_window as u64;
    let scale = EopScale::default();
    let video = match group {
        Group::TD => &TD_VIDEO,
        Group::ASD => &ASD_VIDEO,
    };
    let total_ms = spec.frames_per_stream * 1000 / fps;

    let mut order: Vec<Stimulus> = Stimulus::ALL.iter().flat_map(|&s| [s; 3]).collect();
    order.shuffle(&mut rng);
    let mut seen = [0u8; 5];
    let mut events = Vec::new();
    let mut segments = Vec::new();
    let mut blinks = Vec::new();
    for (i, &stimulus) in order.iter().enumerate() {
        let onset = spec.first_onset_ms + i as u64 * spec.onset_spacing_ms;
        if onset >= total_ms {
            break;
        }
        seen[stimulus.index()] += 1;
        events.push(StimulusEvent {
            stimulus,
            turn: TURNS[usize::from(seen[stimulus.index()] - 1)],
            onset_ms: onset as f64,
        });
        let p = video[stimulus.index()];
        let latency = draw_clipped(&mut rng, p.latency_s, 0.1, 8.0);
        let duration = draw_clipped(&mut rng, p.duration_s, 0.5, 9.5 - latency);
        let eop = draw_clipped(&mut rng, p.eop, 2.0, 98.0);
        // Lid offsets on a 1/16 px grid keep the stream text compact.
        let ear_open = (scale.ear_for(eop) * 800.0).round() / 800.0;
        let start = onset + (latency * 1000.0).round() as u64;
        let end = (start + (duration * 1000.0).round() as u64).min(total_ms);
        let responds = !rng.random_bool(spec.p_no_response);
        let confidence = if responds {
            (rng.random_range(0.75..1.0f64) * 100.0).round() / 100.0
        } else {
            0.45
        };
        segments.push(FaceSegment {
            start_ms: start,
            end_ms: end,
            confidence,
            ear_open: Some(ear_open),
        });
        // A blink roughly every two to four seconds, clear of the edges.
        let (seg_start, seg_end) = (start * fps / 1000 + 1, end * fps / 1000);
        let mut b = seg_start + w + rng.random_range(0..2 * fps);
        loop {
            let len = rng.random_range(w..w + 4);
            if b + len + w + 1 >= seg_end {
                break;
            }
            let (t0, t1) = (b * 1000 / fps, (b + len) * 1000 / fps);
            blinks.push(Blink {
                time_ms: t0,
                duration_ms: t1 - t0,
            });
            b += len + w + rng.random_range(2 * fps..4 * fps);
        }
        // Occasional low-confidence face between trials.
        if rng.random_bool(0.3) {
            let gap_start = end + 1000;
            let gap_end = onset + spec.onset_spacing_ms - 1000;
            if gap_end > gap_start + 500 {
                segments.push(FaceSegment {
                    start_ms: gap_start,
                    end_ms: gap_start + 500,
                    confidence: 0.4,
                    ear_open: Some(ear_open),
                });
            }
        }
    }
    StreamScript {
        participant_id: id.to_owned(),
        group,
        fps: spec.fps,
        total_ms,
        scheme: spec.scheme,
        ear_open: 0.3,
        ear_closed: 0.1,
        jitter_px: 0.0,
        seed: spec.seed,
        profile,
        params: TrialParams::default(),
        segments,
        blinks,
        events,
    }
}

/// Locations of a written dataset.
#[derive(Debug, Clone, PartialEq)]
pub struct DatasetFiles {
    pub streams_dir: PathBuf,
    pub manifests_dir: PathBuf,
    pub coding_table: PathBuf,
}

/// Writes `streams/`, `manifests/` and `coding.csv` under `dir`.
pub fn write_dataset(spec: &DatasetSpec, dir: &Path) -> Result<DatasetFiles> {
    spec.check()?;
    let files = DatasetFiles {
        streams_dir: dir.join("streams"),
        manifests_dir: dir.join("manifests"),
        coding_table: dir.join("coding.csv"),
    };
    for d in [&files.streams_dir, &files.manifests_dir] {
        fs::create_dir_all(d).map_err(|e| Error::io(d, e))?;
    }
    spec.participants()
        .par_iter()
        .enumerate()
        .try_for_each(|(i, (group, id))| -> Result<()> {
            let script = participant_script(spec, i, *group, id);
            let (stream, manifest, _) = gen_landmark_stream(&script)?;
            let sp = files.streams_dir.join(format!("{id}.jsonl"));
            fs::write(&sp, serialize_stream(&stream)).map_err(|e| Error::io(&sp, e))?;
            let mp = files.manifests_dir.join(format!("{id}.jsonl"));
            fs::write(&mp, serialize_manifest(&manifest)).map_err(|e| Error::io(&mp, e))?;
            Ok(())
        })?;
    let cohort = CohortProfile {
        n_td: spec.n_td,
        n_asd: spec.n_asd,
        ..CohortProfile::reference(spec.seed)
    };
    let table = write_wide_table(&gen_ordinal_cohort(&cohort)?)?;
    fs::write(&files.coding_table, table).map_err(|e| Error::io(&files.coding_table, e))?;
    Ok(files)
}
