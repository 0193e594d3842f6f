//! Landmark streams and session manifests.
//!
//! Both files are UTF-8 and line-delimited: one JSON object per line, a header
//! object first. A landmark stream looks like
//!
//! ```text
//! {"participant_id":"P01","group":"TD","fps":30.0,"scheme":"FAN68","source_video":"P01.mp4"}
//! {"frame_index":0,"timestamp_ms":0.0,"confidence":0.93,"bbox":[10.0,20.0,210.0,260.0],"landmarks":[x0,y0,x1,y1,...]}
//! {"frame_index":1,"timestamp_ms":33.333333333333336,"confidence":0.0,"bbox":null,"landmarks":[]}
//! ```
//!
//! A frame with no detected face is written explicitly (null bbox, zero
//! confidence, no landmarks) so that frame indexing stays contiguous.

use std::fmt;
use std::path::Path;
use std::str::FromStr;

use serde::{Deserialize, Serialize};

use crate::types::check_turn;
use crate::{Error, Group, Result, Stimulus};

/// Default detector confidence gate used when none is supplied.
pub const DEFAULT_TAU_C: f64 = 0.6;
/// Largest tolerated distance between a timestamp and the fps grid.
pub const DRIFT_TOLERANCE_MS: f64 = 1.0;
/// Sessions hold at most five stimuli times three turns.
pub const MAX_EVENTS: usize = 15;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Hash, Serialize, Deserialize)]
pub enum Scheme {
    #[serde(rename = "MESH468")]
    Mesh468,
    #[serde(rename = "FAN68")]
    Fan68,
}

impl Scheme {
    pub fn landmark_count(self) -> usize {
        match self {
            Scheme::Mesh468 => 468,
            Scheme::Fan68 => 68,
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Scheme::Mesh468 => "MESH468",
            Scheme::Fan68 => "FAN68",
        }
    }
}

impl fmt::Display for Scheme {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

impl FromStr for Scheme {
    type Err = Error;

    fn from_str(s: &str) -> Result<Self> {
        match s {
            "MESH468" => Ok(Scheme::Mesh468),
            "FAN68" => Ok(Scheme::Fan68),
            other => Err(Error::InvalidInput(format!("unknown scheme {other:?}"))),
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Default)]
pub struct Point {
    pub x: f64,
    pub y: f64,
}

impl Point {
    pub const fn new(x: f64, y: f64) -> Self {
        Point { x, y }
    }

    pub fn distance(self, other: Point) -> f64 {
        (self.x - other.x).hypot(self.y - other.y)
    }
}

/// Face bounding box in pixels, `x2 > x1` and `y2 > y1`.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct BBox {
    pub x1: f64,
    pub y1: f64,
    pub x2: f64,
    pub y2: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkFrame {
    pub frame_index: u64,
    pub timestamp_ms: f64,
    pub confidence: f64,
    pub bbox: Option<BBox>,
    pub landmarks: Vec<Point>,
}

impl LandmarkFrame {
    pub fn faceless(frame_index: u64, timestamp_ms: f64) -> Self {
        LandmarkFrame {
            frame_index,
            timestamp_ms,
            confidence: 0.0,
            bbox: None,
            landmarks: Vec::new(),
        }
    }

    pub fn is_faceless(&self) -> bool {
        self.bbox.is_none()
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct StreamHeader {
    pub participant_id: String,
    pub group: Group,
    pub fps: f64,
    pub scheme: Scheme,
    pub source_video: String,
}

#[derive(Debug, Clone, PartialEq)]
pub struct LandmarkStream {
    pub header: StreamHeader,
    pub frames: Vec<LandmarkFrame>,
}

impl LandmarkStream {
    /// End of the recording: one frame period past the last frame.
    pub fn end_ms(&self) -> f64 {
        self.frames
            .last()
            .map_or(0.0, |f| f.timestamp_ms + 1000.0 / self.header.fps)
    }
}

#[derive(Serialize, Deserialize)]
struct FrameRecord {
    frame_index: u64,
    timestamp_ms: f64,
    confidence: f64,
    bbox: Option<[f64; 4]>,
    landmarks: Vec<f64>,
}

fn check_header(header: &StreamHeader, line: usize) -> Result<()> {
    if !(header.fps.is_finite() && header.fps > 0.0) {
        return Err(Error::format(line, format!("fps must be positive, got {}", header.fps)));
    }
    Ok(())
}

fn frame_from_record(rec: FrameRecord, scheme: Scheme, line: usize) -> Result<LandmarkFrame> {
    if !(rec.timestamp_ms.is_finite() && rec.timestamp_ms >= 0.0) {
        return Err(Error::format(line, "timestamp_ms must be a non-negative number"));
    }
    if !(0.0..=1.0).contains(&rec.confidence) {
        return Err(Error::format(
            line,
            format!("confidence {} outside [0,1]", rec.confidence),
        ));
    }
    let bbox = match rec.bbox {
        None => {
            if rec.confidence != 0.0 || !rec.landmarks.is_empty() {
                return Err(Error::format(
                    line,
                    "faceless frame must have confidence 0 and no landmarks",
                ));
            }
            None
        }
        Some([x1, y1, x2, y2]) => {
            if !(x2 > x1 && y2 > y1) {
                return Err(Error::format(line, "bbox requires x2 > x1 and y2 > y1"));
            }
            if !rec.landmarks.len().is_multiple_of(2) {
                return Err(Error::format(line, "landmarks must hold x,y pairs"));
            }
            let found = rec.landmarks.len() / 2;
            if found != scheme.landmark_count() {
                return Err(Error::SchemeMismatch {
                    line,
                    scheme: scheme.as_str(),
                    expected: scheme.landmark_count(),
                    found,
                });
            }
            Some(BBox { x1, y1, x2, y2 })
        }
    };
    let landmarks = rec.landmarks.chunks_exact(2).map(|c| Point::new(c[0], c[1])).collect();
    Ok(LandmarkFrame {
        frame_index: rec.frame_index,
        timestamp_ms: rec.timestamp_ms,
        confidence: rec.confidence,
        bbox,
        landmarks,
    })
}

fn non_blank_lines(text: &str) -> impl Iterator<Item = (usize, &str)> {
    text.lines()
        .enumerate()
        .map(|(i, l)| (i + 1, l.trim()))
        .filter(|(_, l)| !l.is_empty())
}

fn decode_utf8(bytes: &[u8]) -> Result<&str> {
    std::str::from_utf8(bytes).map_err(|e| {
        let line = bytes[..e.valid_up_to()].iter().filter(|&&b| b == b'\n').count() + 1;
        Error::format(line, "input is not valid UTF-8")
    })
}

/// Parses and validates a landmark stream. Frames are returned ordered by
/// `frame_index`; timestamps must increase strictly in that order.
pub fn parse_stream(bytes: &[u8]) -> Result<LandmarkStream> {
    let text = decode_utf8(bytes)?;
    let mut lines = non_blank_lines(text);
    let (header_line, raw_header) = lines.next().ok_or_else(|| Error::format(1, "missing header"))?;
    let header: StreamHeader =
        serde_json::from_str(raw_header).map_err(|e| Error::format(header_line, format!("bad header: {e}")))?;
    check_header(&header, header_line)?;

    let mut frames = Vec::new();
    let mut line_of = Vec::new();
    for (line, raw) in lines {
        let rec: FrameRecord =
            serde_json::from_str(raw).map_err(|e| Error::format(line, format!("bad frame record: {e}")))?;
        frames.push(frame_from_record(rec, header.scheme, line)?);
        line_of.push(line);
    }

    let mut order: Vec<usize> = (0..frames.len()).collect();
    order.sort_by_key(|&i| frames[i].frame_index);
    for pair in order.windows(2) {
        let (a, b) = (&frames[pair[0]], &frames[pair[1]]);
        if a.frame_index == b.frame_index {
            return Err(Error::format(
                line_of[pair[1]],
                format!("duplicate frame_index {}", b.frame_index),
            ));
        }
        if b.timestamp_ms <= a.timestamp_ms {
            return Err(Error::NonMonotonicTimestamp {
                line: line_of[pair[1]],
                timestamp_ms: b.timestamp_ms,
                previous_ms: a.timestamp_ms,
            });
        }
    }
    let mut slots: Vec<Option<LandmarkFrame>> = frames.into_iter().map(Some).collect();
    let frames = order.iter().map(|&i| slots[i].take().unwrap()).collect();
    Ok(LandmarkStream { header, frames })
}

/// Canonical serialization; `parse_stream(serialize_stream(s)) == s`.
pub fn serialize_stream(stream: &LandmarkStream) -> String {
    let mut out = String::with_capacity(64 + stream.frames.len() * 64);
    out.push_str(&serde_json::to_string(&stream.header).expect("header serializes"));
    out.push('\n');
    for frame in &stream.frames {
        let rec = FrameRecord {
            frame_index: frame.frame_index,
            timestamp_ms: frame.timestamp_ms,
            confidence: frame.confidence,
            bbox: frame.bbox.map(|b| [b.x1, b.y1, b.x2, b.y2]),
            landmarks: frame.landmarks.iter().flat_map(|p| [p.x, p.y]).collect(),
        };
        out.push_str(&serde_json::to_string(&rec).expect("frame serializes"));
        out.push('\n');
    }
    out
}

pub fn read_stream(path: &Path) -> Result<LandmarkStream> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_stream(&bytes)
}

#[derive(Debug, Clone, PartialEq)]
pub struct ValidationReport {
    pub frame_count: usize,
    pub faceless_count: usize,
    /// Frames with a face whose confidence falls below the gate.
    pub below_gate_count: usize,
    pub max_drift_ms: f64,
    /// Frame indices whose timestamp is off the fps grid by at least
    /// [`DRIFT_TOLERANCE_MS`].
    pub drift_frames: Vec<u64>,
}

impl ValidationReport {
    pub fn is_clean(&self) -> bool {
        self.drift_frames.is_empty()
    }
}

pub fn validate_stream(stream: &LandmarkStream) -> ValidationReport {
    validate_stream_with(stream, DEFAULT_TAU_C)
}

pub fn validate_stream_with(stream: &LandmarkStream, tau_c: f64) -> ValidationReport {
    let mut report = ValidationReport {
        frame_count: stream.frames.len(),
        faceless_count: 0,
        below_gate_count: 0,
        max_drift_ms: 0.0,
        drift_frames: Vec::new(),
    };
    for frame in &stream.frames {
        if frame.is_faceless() {
            report.faceless_count += 1;
        } else if frame.confidence < tau_c {
            report.below_gate_count += 1;
        }
        let drift = (frame.timestamp_ms - frame.frame_index as f64 * 1000.0 / stream.header.fps).abs();
        report.max_drift_ms = report.max_drift_ms.max(drift);
        if drift >= DRIFT_TOLERANCE_MS {
            report.drift_frames.push(frame.frame_index);
        }
    }
    report
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StimulusEvent {
    pub stimulus: Stimulus,
    pub turn: u8,
    pub onset_ms: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct SessionManifest {
    pub participant_id: String,
    pub group: Group,
    /// Sorted by onset.
    pub events: Vec<StimulusEvent>,
}

#[derive(Serialize, Deserialize)]
struct ManifestHeader {
    participant_id: String,
    group: Group,
}

#[derive(Deserialize)]
struct RawEvent {
    stimulus: String,
    turn: i64,
    onset_ms: f64,
}

/// Parses a session manifest; events come back sorted by onset.
pub fn parse_manifest(bytes: &[u8]) -> Result<SessionManifest> {
    let text = decode_utf8(bytes)?;
    let mut lines = non_blank_lines(text);
    let (header_line, raw_header) = lines.next().ok_or_else(|| Error::format(1, "missing header"))?;
    let header: ManifestHeader =
        serde_json::from_str(raw_header).map_err(|e| Error::format(header_line, format!("bad header: {e}")))?;

    let mut events: Vec<StimulusEvent> = Vec::new();
    for (line, raw) in lines {
        let ev: RawEvent =
            serde_json::from_str(raw).map_err(|e| Error::format(line, format!("bad event record: {e}")))?;
        let stimulus: Stimulus = ev
            .stimulus
            .parse()
            .map_err(|e: Error| Error::format(line, e.to_string()))?;
        let turn = check_turn(ev.turn).map_err(|e| Error::format(line, e.to_string()))?;
        if !(ev.onset_ms.is_finite() && ev.onset_ms >= 0.0) {
            return Err(Error::format(line, "onset_ms must be a non-negative number"));
        }
        if events.iter().any(|e| e.stimulus == stimulus && e.turn == turn) {
            return Err(Error::DuplicateEvent {
                stimulus: stimulus.to_string(),
                turn,
            });
        }
        events.push(StimulusEvent {
            stimulus,
            turn,
            onset_ms: ev.onset_ms,
        });
    }
    if events.len() > MAX_EVENTS {
        return Err(Error::InvalidInput(format!(
            "{} events exceed the {MAX_EVENTS}-event session limit",
            events.len()
        )));
    }
    events.sort_by(|a, b| a.onset_ms.total_cmp(&b.onset_ms));
    if let Some(w) = events.windows(2).find(|w| w[1].onset_ms <= w[0].onset_ms) {
        return Err(Error::InvalidInput(format!(
            "onsets must be strictly increasing: {}{} and {}{} share {} ms",
            w[0].stimulus, w[0].turn, w[1].stimulus, w[1].turn, w[1].onset_ms
        )));
    }
    Ok(SessionManifest {
        participant_id: header.participant_id,
        group: header.group,
        events,
    })
}

pub fn serialize_manifest(manifest: &SessionManifest) -> String {
    let header = ManifestHeader {
        participant_id: manifest.participant_id.clone(),
        group: manifest.group,
    };
    let mut out = serde_json::to_string(&header).expect("header serializes");
    out.push('\n');
    for ev in &manifest.events {
        out.push_str(&serde_json::to_string(ev).expect("event serializes"));
        out.push('\n');
    }
    out
}

pub fn read_manifest(path: &Path) -> Result<SessionManifest> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_manifest(&bytes)
}

#[cfg(test)]
mod tests {
    use super::*;

    const HEADER: &str = r#"{"participant_id":"P1","group":"ASD","fps":30.0,"scheme":"FAN68","source_video":"p1.mp4"}"#;

    fn fan68_frame(index: u64, ts: f64, points: usize) -> String {
        let coords: Vec<String> = (0..points * 2).map(|i| format!("{}", i as f64)).collect();
        format!(
            r#"{{"frame_index":{index},"timestamp_ms":{ts},"confidence":0.9,"bbox":[0,0,100,120],"landmarks":[{}]}}"#,
            coords.join(",")
        )
    }

    #[test]
    fn minimal_stream_parses() {
        let text = format!("{HEADER}\n{}\n{}\n", fan68_frame(0, 0.0, 68), fan68_frame(1, 33.3, 68));
        let stream = parse_stream(text.as_bytes()).unwrap();
        assert_eq!(stream.frames.len(), 2);
        assert_eq!(stream.header.scheme, Scheme::Fan68);
        assert_eq!(stream.frames[1].landmarks[3], Point::new(6.0, 7.0));
    }

    #[test]
    fn short_landmark_list_is_a_scheme_mismatch() {
        let text = format!("{HEADER}\n{}\n", fan68_frame(0, 0.0, 67));
        match parse_stream(text.as_bytes()) {
            Err(Error::SchemeMismatch {
                line, expected, found, ..
            }) => {
                assert_eq!((line, expected, found), (2, 68, 67));
            }
            other => panic!("expected scheme mismatch, got {other:?}"),
        }
    }

    #[test]
    fn faceless_frame_is_accepted() {
        let text = format!(
            "{HEADER}\n{}\n",
            r#"{"frame_index":0,"timestamp_ms":0.0,"confidence":0.0,"bbox":null,"landmarks":[]}"#
        );
        let stream = parse_stream(text.as_bytes()).unwrap();
        assert!(stream.frames[0].is_faceless());
    }

    #[test]
    fn half_populated_frames_are_rejected() {
        let no_box_with_conf = r#"{"frame_index":0,"timestamp_ms":0.0,"confidence":0.4,"bbox":null,"landmarks":[]}"#;
        let box_without_points =
            r#"{"frame_index":0,"timestamp_ms":0.0,"confidence":0.4,"bbox":[0,0,1,1],"landmarks":[]}"#;
        for rec in [no_box_with_conf, box_without_points] {
            let text = format!("{HEADER}\n{rec}\n");
            assert!(parse_stream(text.as_bytes()).is_err(), "{rec}");
        }
    }

    #[test]
    fn malformed_record_reports_its_line() {
        let text = format!("{HEADER}\n{}\n{{not json\n", fan68_frame(0, 0.0, 68));
        match parse_stream(text.as_bytes()) {
            Err(Error::Format { line, .. }) => assert_eq!(line, 3),
            other => panic!("{other:?}"),
        }
    }

    #[test]
    fn frames_are_reordered_and_timestamps_checked() {
        let text = format!("{HEADER}\n{}\n{}\n", fan68_frame(1, 33.3, 68), fan68_frame(0, 0.0, 68));
        let stream = parse_stream(text.as_bytes()).unwrap();
        assert_eq!(stream.frames[0].frame_index, 0);

        let text = format!("{HEADER}\n{}\n{}\n", fan68_frame(0, 50.0, 68), fan68_frame(1, 40.0, 68));
        assert!(matches!(
            parse_stream(text.as_bytes()),
            Err(Error::NonMonotonicTimestamp { line: 3, .. })
        ));
    }

    #[test]
    fn bad_fps_rejected() {
        let text = HEADER.replace("30.0", "0.0");
        assert!(parse_stream(text.as_bytes()).is_err());
    }

    fn grid_stream(n: u64, faceless_every: Option<u64>) -> LandmarkStream {
        let header: StreamHeader = serde_json::from_str(HEADER).unwrap();
        let frames = (0..n)
            .map(|k| {
                let ts = k as f64 * 1000.0 / 30.0;
                match faceless_every {
                    Some(m) if k % m == 0 => LandmarkFrame::faceless(k, ts),
                    _ => LandmarkFrame {
                        frame_index: k,
                        timestamp_ms: ts,
                        confidence: 0.8,
                        bbox: Some(BBox {
                            x1: 0.0,
                            y1: 0.0,
                            x2: 10.0,
                            y2: 10.0,
                        }),
                        landmarks: vec![Point::default(); 68],
                    },
                }
            })
            .collect();
        LandmarkStream { header, frames }
    }

    #[test]
    fn grid_aligned_stream_has_no_drift() {
        let report = validate_stream(&grid_stream(300, None));
        assert_eq!(report.max_drift_ms, 0.0);
        assert!(report.is_clean());
    }

    #[test]
    fn drifted_frame_is_flagged() {
        let mut stream = grid_stream(30, None);
        stream.frames[12].timestamp_ms += 5.0;
        let report = validate_stream(&stream);
        assert_eq!(report.drift_frames, vec![12]);
        assert!((report.max_drift_ms - 5.0).abs() < 1e-9);
    }

    #[test]
    fn faceless_frames_counted() {
        let report = validate_stream(&grid_stream(100, Some(10)));
        assert_eq!(report.faceless_count, 10);
        assert_eq!(report.frame_count, 100);
        let gated = validate_stream_with(&grid_stream(100, Some(10)), 0.85);
        assert_eq!(gated.below_gate_count, 90);
    }

    #[test]
    fn canonical_serialization_round_trips() {
        let stream = grid_stream(20, Some(3));
        let text = serialize_stream(&stream);
        let back = parse_stream(text.as_bytes()).unwrap();
        assert_eq!(back, stream);
        assert_eq!(serialize_stream(&back), text);
    }

    const M_HEADER: &str = r#"{"participant_id":"P1","group":"TD"}"#;

    fn full_manifest() -> String {
        let mut text = format!("{M_HEADER}\n");
        let mut onset = 1000.0;
        for s in Stimulus::ALL {
            for t in 1..=3 {
                text.push_str(&format!(r#"{{"stimulus":"{s}","turn":{t},"onset_ms":{onset}}}"#));
                text.push('\n');
                onset += 20000.0;
            }
        }
        text
    }

    #[test]
    fn full_manifest_parses() {
        let m = parse_manifest(full_manifest().as_bytes()).unwrap();
        assert_eq!(m.events.len(), 15);
        assert_eq!(m.events[0].stimulus, Stimulus::SM);
        assert_eq!(m.events[14].stimulus, Stimulus::NR);
        assert_eq!(parse_manifest(serialize_manifest(&m).as_bytes()).unwrap(), m);
    }

    #[test]
    fn duplicate_event_rejected() {
        let text = format!(
            "{M_HEADER}\n{}\n{}\n",
            r#"{"stimulus":"NM","turn":2,"onset_ms":0}"#, r#"{"stimulus":"NM","turn":2,"onset_ms":5000}"#
        );
        assert!(matches!(
            parse_manifest(text.as_bytes()),
            Err(Error::DuplicateEvent { turn: 2, .. })
        ));
    }

    #[test]
    fn bad_turn_and_stimulus_rejected() {
        for ev in [
            r#"{"stimulus":"NM","turn":4,"onset_ms":0}"#,
            r#"{"stimulus":"XX","turn":1,"onset_ms":0}"#,
        ] {
            let text = format!("{M_HEADER}\n{ev}\n");
            assert!(parse_manifest(text.as_bytes()).is_err());
        }
    }

    #[test]
    fn single_event_manifest() {
        let text = format!("{M_HEADER}\n{}\n", r#"{"stimulus":"NR","turn":1,"onset_ms":0}"#);
        let m = parse_manifest(text.as_bytes()).unwrap();
        assert_eq!(m.events.len(), 1);
        assert_eq!(m.events[0].onset_ms, 0.0);
    }

    #[test]
    fn events_sorted_by_onset() {
        let text = format!(
            "{M_HEADER}\n{}\n{}\n",
            r#"{"stimulus":"SW","turn":1,"onset_ms":9000}"#, r#"{"stimulus":"SM","turn":1,"onset_ms":100}"#
        );
        let m = parse_manifest(text.as_bytes()).unwrap();
        assert_eq!(m.events[0].stimulus, Stimulus::SM);
    }
}
