//! Trial windows and per-trial engagement metrics.
//!
//! Each manifest event opens a window at its onset that closes after
//! `window_len_s`, at the next onset, or at the end of the stream, whichever
//! comes first. Inside a window:
//!
//! * the response onset is the first frame of a run of at least `k_frames`
//!   consecutive valid frames; without such a run the trial is censored,
//! * latency is the time from stimulus onset to that frame,
//! * duration is the longest run of valid frames in which interruptions of at
//!   most `gap_tolerance_frames` invalid frames are bridged (zero for
//!   censored trials),
//! * trial EOP is the median of the smoothed per-frame mean EOP over valid frames.

use std::fmt;

use serde::{Deserialize, Serialize};

use crate::geometry::{frame_metrics, smooth_series, EyeIndexMap, FrameMetrics, GateProfile};
use crate::stats::median;
use crate::stream::{LandmarkStream, SessionManifest};
use crate::{Error, Group, Result, Stimulus};

/// Trial-level variable analysed by the statistics battery.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord)]
pub enum Variable {
    Latency,
    Duration,
    MeanEop,
}

impl Variable {
    pub const ALL: [Variable; 3] = [Variable::Latency, Variable::Duration, Variable::MeanEop];

    pub fn as_str(self) -> &'static str {
        match self {
            Variable::Latency => "latency",
            Variable::Duration => "duration",
            Variable::MeanEop => "mean_eop",
        }
    }
}

impl fmt::Display for Variable {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct TrialParams {
    pub window_len_s: f64,
    /// Consecutive valid frames needed to count as a response.
    pub k_frames: usize,
    pub gap_tolerance_frames: usize,
}

impl Default for TrialParams {
    fn default() -> Self {
        TrialParams {
            window_len_s: 10.0,
            k_frames: 3,
            gap_tolerance_frames: 2,
        }
    }
}

impl TrialParams {
    pub fn check(&self) -> Result<()> {
        if !(self.window_len_s > 0.0 && self.window_len_s.is_finite()) {
            return Err(Error::Config("window_len_s must be positive".into()));
        }
        if self.k_frames == 0 {
            return Err(Error::Config("k_frames must be positive".into()));
        }
        Ok(())
    }
}

/// What closed a trial window.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum WindowEnd {
    Length,
    NextOnset,
    StreamEnd,
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialWindow {
    pub participant_id: String,
    pub group: Group,
    pub stimulus: Stimulus,
    pub turn: u8,
    pub onset_ms: f64,
    /// Exclusive; equals `onset_ms` for onsets at or past the stream end.
    pub end_ms: f64,
    /// Inclusive range of positions into the stream's frame list.
    pub span: Option<(usize, usize)>,
    pub closed_by: WindowEnd,
}

impl TrialWindow {
    pub fn is_empty(&self) -> bool {
        self.span.is_none()
    }

    /// Truncated by the end of the recording.
    pub fn is_short(&self) -> bool {
        self.closed_by == WindowEnd::StreamEnd
    }

    pub fn len_s(&self) -> f64 {
        (self.end_ms - self.onset_ms) / 1000.0
    }

    pub fn frames<'a, T>(&self, all: &'a [T]) -> &'a [T] {
        match self.span {
            Some((a, b)) => &all[a..=b],
            None => &[],
        }
    }
}

pub fn segment_trials(
    stream: &LandmarkStream,
    manifest: &SessionManifest,
    params: &TrialParams,
) -> Result<Vec<TrialWindow>> {
    params.check()?;
    if manifest.participant_id != stream.header.participant_id {
        return Err(Error::InvalidInput(format!(
            "manifest participant {} does not match stream participant {}",
            manifest.participant_id, stream.header.participant_id
        )));
    }
    let stream_end = stream.end_ms();
    let window_ms = params.window_len_s * 1000.0;
    let mut events = manifest.events.clone();
    events.sort_by(|a, b| a.onset_ms.total_cmp(&b.onset_ms));

    let windows = events
        .iter()
        .enumerate()
        .map(|(i, ev)| {
            let mut end = ev.onset_ms + window_ms;
            let mut closed_by = WindowEnd::Length;
            if let Some(next) = events.get(i + 1) {
                if next.onset_ms < end {
                    end = next.onset_ms;
                    closed_by = WindowEnd::NextOnset;
                }
            }
            if stream_end < end {
                end = stream_end.max(ev.onset_ms);
                closed_by = WindowEnd::StreamEnd;
            }
            let first = stream.frames.partition_point(|f| f.timestamp_ms < ev.onset_ms);
            let past = stream.frames.partition_point(|f| f.timestamp_ms < end);
            TrialWindow {
                participant_id: manifest.participant_id.clone(),
                group: manifest.group,
                stimulus: ev.stimulus,
                turn: ev.turn,
                onset_ms: ev.onset_ms,
                end_ms: end,
                span: (past > first).then(|| (first, past - 1)),
                closed_by,
            }
        })
        .collect();
    Ok(windows)
}

/// Position of the first frame that starts a run of `k_frames` consecutive
/// valid frames.
pub fn detect_response(frames: &[FrameMetrics], k_frames: usize) -> Option<usize> {
    let k = k_frames.max(1);
    let mut run = 0;
    for (i, f) in frames.iter().enumerate() {
        if f.valid() {
            run += 1;
            if run == k {
                return Some(i + 1 - k);
            }
        } else {
            run = 0;
        }
    }
    None
}

/// Seconds from stimulus onset to the response frame, floored at zero.
pub fn latency(onset_ms: f64, response_frame: &FrameMetrics) -> f64 {
    ((response_frame.timestamp_ms - onset_ms) / 1000.0).max(0.0)
}

/// Length in frames of the longest bridged run of valid frames.
pub fn longest_bridged_run(valid: impl IntoIterator<Item = bool>, gap_tolerance_frames: usize) -> usize {
    let mut best = 0;
    // (start of current run, end of its last valid frame)
    let mut current: Option<(usize, usize)> = None;
    for (i, v) in valid.into_iter().enumerate() {
        if !v {
            continue;
        }
        current = match current {
            Some((start, last)) if i - last - 1 <= gap_tolerance_frames => Some((start, i)),
            _ => Some((i, i)),
        };
        let (start, last) = current.unwrap();
        best = best.max(last - start + 1);
    }
    best
}

pub fn duration(frames: &[FrameMetrics], fps: f64, gap_tolerance_frames: usize) -> f64 {
    longest_bridged_run(frames.iter().map(FrameMetrics::valid), gap_tolerance_frames) as f64 / fps
}

pub fn trial_mean_eop(frames: &[FrameMetrics]) -> Option<f64> {
    let mut values: Vec<f64> = frames.iter().filter_map(FrameMetrics::mean_eop).collect();
    median(&mut values)
}

#[derive(Debug, Clone, PartialEq)]
pub struct TrialMetrics {
    pub participant_id: String,
    pub group: Group,
    pub stimulus: Stimulus,
    pub turn: u8,
    pub onset_ms: f64,
    pub end_ms: f64,
    /// `None` when censored.
    pub latency_s: Option<f64>,
    /// `None` only for empty windows.
    pub duration_s: Option<f64>,
    pub mean_eop: Option<f64>,
    pub valid_frame_fraction: f64,
    pub responded: bool,
}

impl TrialMetrics {
    pub fn value(&self, variable: Variable) -> Option<f64> {
        match variable {
            Variable::Latency => self.latency_s,
            Variable::Duration => self.duration_s,
            Variable::MeanEop => self.mean_eop,
        }
    }
}

/// Metrics for one window given the frame metrics of the whole stream.
pub fn trial_metrics(window: &TrialWindow, frames: &[FrameMetrics], fps: f64, params: &TrialParams) -> TrialMetrics {
    let in_window = window.frames(frames);
    let onset = detect_response(in_window, params.k_frames);
    let valid = in_window.iter().filter(|f| f.valid()).count();
    TrialMetrics {
        participant_id: window.participant_id.clone(),
        group: window.group,
        stimulus: window.stimulus,
        turn: window.turn,
        onset_ms: window.onset_ms,
        end_ms: window.end_ms,
        latency_s: onset.map(|i| latency(window.onset_ms, &in_window[i])),
        duration_s: (!window.is_empty()).then(|| {
            if onset.is_some() {
                duration(in_window, fps, params.gap_tolerance_frames)
            } else {
                0.0
            }
        }),
        mean_eop: trial_mean_eop(in_window),
        valid_frame_fraction: if in_window.is_empty() {
            0.0
        } else {
            valid as f64 / in_window.len() as f64
        },
        responded: onset.is_some(),
    }
}

/// Gated and smoothed frame metrics of a whole stream. The per-frame mean
/// EOP is replaced by its moving median; per-eye values stay raw.
pub fn stream_frame_metrics(
    stream: &LandmarkStream,
    profile: &GateProfile,
    map: &EyeIndexMap,
) -> Result<Vec<FrameMetrics>> {
    profile.check()?;
    map.check_scheme(stream.header.scheme)?;
    let mut frames = stream
        .frames
        .iter()
        .map(|f| frame_metrics(f, profile, map))
        .collect::<Result<Vec<_>>>()?;
    let series: Vec<Option<f64>> = frames.iter().map(FrameMetrics::mean_eop).collect();
    let smoothed = smooth_series(&series, profile.smooth_window)?;
    for (frame, value) in frames.iter_mut().zip(smoothed) {
        if let (Some(m), Some(v)) = (frame.metrics.as_mut(), value) {
            m.mean_eop = v;
        }
    }
    Ok(frames)
}

/// Full per-stream pass: frame metrics, smoothing, windows, trial metrics.
pub fn analyze_stream(
    stream: &LandmarkStream,
    manifest: &SessionManifest,
    profile: &GateProfile,
    map: &EyeIndexMap,
    params: &TrialParams,
) -> Result<Vec<TrialMetrics>> {
    if manifest.group != stream.header.group {
        return Err(Error::InvalidInput(format!(
            "participant {}: manifest group {} differs from stream group {}",
            manifest.participant_id, manifest.group, stream.header.group
        )));
    }
    let windows = segment_trials(stream, manifest, params)?;
    let frames = stream_frame_metrics(stream, profile, map)?;
    Ok(windows
        .iter()
        .map(|w| trial_metrics(w, &frames, stream.header.fps, params))
        .collect())
}
