//! Scripted landmark streams with analytically known trial metrics.
//!
//! A script places face segments (piecewise-constant confidence and eye
//! openness) and blinks on a fixed frame grid. Blinks and level changes are
//! kept far enough from each other and from segment edges that the moving
//! median leaves every frame value untouched, so the expected trial metrics
//! follow from interval arithmetic alone.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::geometry::{EyeIndexMap, GateProfile};
use crate::stream::{BBox, LandmarkFrame, LandmarkStream, Point, Scheme, SessionManifest, StimulusEvent, StreamHeader};
use crate::trials::{TrialMetrics, TrialParams};
use crate::{Error, Group, Result};

/// Nominal eye width in pixels.
pub const EYE_WIDTH_PX: f64 = 100.0;

const FACE_CENTER: Point = Point { x: 320.0, y: 300.0 };
const EYE_CENTER_L: Point = Point { x: 390.0, y: 260.0 };
const EYE_CENTER_R: Point = Point { x: 250.0, y: 260.0 };
const FACE_RADIUS: f64 = 170.0;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct FaceSegment {
    pub start_ms: u64,
    pub end_ms: u64,
    pub confidence: f64,
    /// Eye-aspect ratio while open; defaults to the script baseline.
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub ear_open: Option<f64>,
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct Blink {
    pub time_ms: u64,
    pub duration_ms: u64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct StreamScript {
    pub participant_id: String,
    pub group: Group,
    pub fps: u32,
    pub total_ms: u64,
    pub scheme: Scheme,
    pub ear_open: f64,
    pub ear_closed: f64,
    /// Amplitude of a seeded per-frame head translation, in pixels.
    pub jitter_px: f64,
    pub seed: u64,
    pub profile: GateProfile,
    pub params: TrialParams,
    pub segments: Vec<FaceSegment>,
    pub blinks: Vec<Blink>,
    pub events: Vec<StimulusEvent>,
}

#[derive(Serialize, Deserialize)]
struct ScriptHeader {
    participant_id: String,
    group: Group,
    fps: u32,
    total_ms: u64,
    scheme: Scheme,
    ear_open: f64,
    ear_closed: f64,
    #[serde(default)]
    jitter_px: f64,
    #[serde(default)]
    seed: u64,
    #[serde(default)]
    profile: Option<GateProfile>,
    #[serde(default)]
    params: Option<TrialParams>,
}

#[derive(Serialize, Deserialize)]
#[serde(tag = "kind", rename_all = "lowercase")]
enum ScriptEntry {
    Segment(FaceSegment),
    Blink(Blink),
    Onset(StimulusEvent),
}

/// Half-open frame range `[start, end)`.
type Span = (u64, u64);

impl StreamScript {
    pub fn frame_count(&self) -> u64 {
        frames_before(self.total_ms as f64, self.fps, u64::MAX)
    }

    fn span(&self, start_ms: u64, end_ms: u64) -> Span {
        let n = self.frame_count();
        (
            frames_before(start_ms as f64, self.fps, n),
            frames_before(end_ms as f64, self.fps, n),
        )
    }

    fn segment_ear(&self, seg: &FaceSegment) -> f64 {
        seg.ear_open.unwrap_or(self.ear_open)
    }

    fn gated(&self, seg: &FaceSegment) -> bool {
        seg.confidence >= self.profile.tau_c
    }

    pub fn check(&self) -> Result<()> {
        let bad = |m: String| Err(Error::Config(format!("stream script {}: {m}", self.participant_id)));
        if self.fps == 0 || self.fps > 1000 {
            return bad(format!("fps {} outside 1..=1000", self.fps));
        }
        if self.total_ms == 0 {
            return bad("total_ms must be positive".into());
        }
        self.profile.check()?;
        self.params.check()?;
        let ears = [self.ear_open, self.ear_closed]
            .into_iter()
            .chain(self.segments.iter().filter_map(|s| s.ear_open));
        for e in ears {
            if !(e.is_finite() && e >= 0.0) {
                return bad(format!("eye-aspect ratio {e} must be finite and non-negative"));
            }
        }
        if !(self.jitter_px.is_finite() && self.jitter_px >= 0.0) {
            return bad("jitter_px must be non-negative".into());
        }
        let mut segs = self.segments.clone();
        segs.sort_by_key(|s| s.start_ms);
        for s in &segs {
            if s.end_ms <= s.start_ms {
                return bad(format!("segment {}..{} is empty", s.start_ms, s.end_ms));
            }
            if !(s.confidence > 0.0 && s.confidence <= 1.0) {
                return bad(format!("segment confidence {} outside (0, 1]", s.confidence));
            }
        }
        if let Some(w) = segs.windows(2).find(|w| w[1].start_ms < w[0].end_ms) {
            return bad(format!(
                "segments {}..{} and {}..{} overlap",
                w[0].start_ms, w[0].end_ms, w[1].start_ms, w[1].end_ms
            ));
        }

        let w = self.profile.smooth_window as u64;
        // Gated segments that touch another gated segment at a different
        // openness level must be long enough for the step to survive smoothing.
        for pair in segs.windows(2) {
            let (a, b) = (&pair[0], &pair[1]);
            let (sa, sb) = (self.span(a.start_ms, a.end_ms), self.span(b.start_ms, b.end_ms));
            let touching = sa.1 == sb.0 && sa.1 > sa.0 && sb.1 > sb.0;
            if touching
                && self.gated(a)
                && self.gated(b)
                && self.segment_ear(a) != self.segment_ear(b)
                && (sa.1 - sa.0 < w || sb.1 - sb.0 < w)
            {
                return bad(format!(
                    "adjacent segments at {} ms change openness within {w} frames",
                    b.start_ms
                ));
            }
        }

        let mut blinks = self.blinks.clone();
        blinks.sort_by_key(|b| b.time_ms);
        let mut prev_end: Option<u64> = None;
        for b in &blinks {
            if b.duration_ms == 0 {
                return bad(format!("blink at {} ms has zero duration", b.time_ms));
            }
            let (bs, be) = self.span(b.time_ms, b.time_ms + b.duration_ms);
            let inside = segs.iter().any(|s| {
                let (ss, se) = self.span(s.start_ms, s.end_ms);
                bs >= ss + w && be + w <= se
            });
            if be - bs < w || !inside {
                return bad(format!(
                    "blink at {} ms must span at least {w} frames and sit {w} frames inside a segment",
                    b.time_ms
                ));
            }
            if let Some(p) = prev_end {
                if bs < p + w {
                    return bad(format!(
                        "blink at {} ms is within {w} frames of the previous one",
                        b.time_ms
                    ));
                }
            }
            prev_end = Some(be);
        }
        self.manifest_checked()?;
        Ok(())
    }

    /// The manifest that accompanies the generated stream.
    pub fn manifest(&self) -> SessionManifest {
        let mut events = self.events.clone();
        events.sort_by(|a, b| a.onset_ms.total_cmp(&b.onset_ms));
        SessionManifest {
            participant_id: self.participant_id.clone(),
            group: self.group,
            events,
        }
    }

    fn manifest_checked(&self) -> Result<SessionManifest> {
        let m = self.manifest();
        // Reuse the manifest parser's rules.
        crate::stream::parse_manifest(crate::stream::serialize_manifest(&m).as_bytes())
    }

    /// JSON lines: header first, then `segment`, `blink` and `onset` entries
    /// tagged by `kind`.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, raw) = lines.next().ok_or_else(|| Error::format(1, "missing header"))?;
        let h: ScriptHeader = serde_json::from_str(raw).map_err(|e| Error::format(line, format!("bad header: {e}")))?;
        let mut script = StreamScript {
            participant_id: h.participant_id,
            group: h.group,
            fps: h.fps,
            total_ms: h.total_ms,
            scheme: h.scheme,
            ear_open: h.ear_open,
            ear_closed: h.ear_closed,
            jitter_px: h.jitter_px,
            seed: h.seed,
            profile: h.profile.unwrap_or_else(|| GateProfile::default_for(h.group)),
            params: h.params.unwrap_or_default(),
            segments: Vec::new(),
            blinks: Vec::new(),
            events: Vec::new(),
        };
        for (line, raw) in lines {
            let entry: ScriptEntry =
                serde_json::from_str(raw).map_err(|e| Error::format(line, format!("bad entry: {e}")))?;
            match entry {
                ScriptEntry::Segment(s) => script.segments.push(s),
                ScriptEntry::Blink(b) => script.blinks.push(b),
                ScriptEntry::Onset(e) => script.events.push(e),
            }
        }
        script.check()?;
        Ok(script)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_jsonl(&self) -> String {
        let header = ScriptHeader {
            participant_id: self.participant_id.clone(),
            group: self.group,
            fps: self.fps,
            total_ms: self.total_ms,
            scheme: self.scheme,
            ear_open: self.ear_open,
            ear_closed: self.ear_closed,
            jitter_px: self.jitter_px,
            seed: self.seed,
            profile: Some(self.profile),
            params: Some(self.params),
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        let entries = self
            .segments
            .iter()
            .map(|s| ScriptEntry::Segment(*s))
            .chain(self.blinks.iter().map(|b| ScriptEntry::Blink(*b)))
            .chain(self.events.iter().map(|e| ScriptEntry::Onset(*e)));
        for e in entries {
            out.push_str(&serde_json::to_string(&e).expect("entry serializes"));
            out.push('\n');
        }
        out
    }
}

/// Timestamp of frame `k` on the `fps` grid.
pub fn frame_time_ms(k: u64, fps: u32) -> f64 {
    k as f64 * 1000.0 / f64::from(fps)
}

/// Number of grid frames strictly before `t_ms`, capped at `cap`.
fn frames_before(t_ms: f64, fps: u32, cap: u64) -> u64 {
    let mut k = (t_ms * f64::from(fps) / 1000.0).ceil().max(0.0) as u64;
    while k > 0 && frame_time_ms(k - 1, fps) >= t_ms {
        k -= 1;
    }
    while frame_time_ms(k, fps) < t_ms {
        k += 1;
    }
    k.min(cap)
}

/// The six canonical eye points `p1..p6` for an eye of width
/// [`EYE_WIDTH_PX`] centred at `c` with the given aspect ratio.
pub fn template_eye(ear: f64, c: Point) -> [Point; 6] {
    let half = EYE_WIDTH_PX / 2.0;
    let lid = half * ear;
    [
        Point::new(c.x - half, c.y),
        Point::new(c.x - half / 2.0, c.y - lid),
        Point::new(c.x + half / 2.0, c.y - lid),
        Point::new(c.x + half, c.y),
        Point::new(c.x + half / 2.0, c.y + lid),
        Point::new(c.x - half / 2.0, c.y + lid),
    ]
}

fn place_eye(out: &mut [Point], ear_idx: &[usize; 6], contour: &[usize], ear: f64, c: Point) {
    let half = EYE_WIDTH_PX / 2.0;
    let m = contour.len() as f64;
    for (j, &i) in contour.iter().enumerate() {
        let theta = std::f64::consts::PI * (1.0 - 2.0 * j as f64 / m);
        out[i] = Point::new(c.x + half * theta.cos(), c.y - half * ear * theta.sin());
    }
    for (&i, p) in ear_idx.iter().zip(template_eye(ear, c)) {
        out[i] = p;
    }
}

/// Full landmark set for one frame of a static synthetic face.
pub fn face_landmarks(scheme: Scheme, map: &EyeIndexMap, ear: f64, offset: Point) -> Vec<Point> {
    let n = scheme.landmark_count();
    let mut out: Vec<Point> = (0..n)
        .map(|i| {
            let theta = 2.0 * std::f64::consts::PI * i as f64 / n as f64;
            Point::new(
                FACE_CENTER.x + FACE_RADIUS * theta.cos(),
                FACE_CENTER.y + FACE_RADIUS * theta.sin(),
            )
        })
        .collect();
    place_eye(&mut out, &map.ear_points_l, &map.contour_l, ear, EYE_CENTER_L);
    place_eye(&mut out, &map.ear_points_r, &map.contour_r, ear, EYE_CENTER_R);
    if offset.x != 0.0 || offset.y != 0.0 {
        for p in &mut out {
            *p = Point::new(p.x + offset.x, p.y + offset.y);
        }
    }
    out
}

fn face_bbox(offset: Point) -> BBox {
    BBox {
        x1: FACE_CENTER.x - 200.0 + offset.x,
        y1: FACE_CENTER.y - 240.0 + offset.y,
        x2: FACE_CENTER.x + 200.0 + offset.x,
        y2: FACE_CENTER.y + 240.0 + offset.y,
    }
}

/// Renders the script into a stream, its manifest and the expected metrics
/// of every trial (in onset order).
pub fn gen_landmark_stream(script: &StreamScript) -> Result<(LandmarkStream, SessionManifest, Vec<TrialMetrics>)> {
    script.check()?;
    let map = EyeIndexMap::for_scheme(script.scheme);
    let n = script.frame_count();
    let mut rng = ChaCha8Rng::seed_from_u64(script.seed);

    // Per-frame (confidence, ear) assignment.
    let mut state: Vec<Option<(f64, f64)>> = vec![None; n as usize];
    for s in &script.segments {
        let (a, b) = script.span(s.start_ms, s.end_ms);
        for slot in &mut state[a as usize..b as usize] {
            *slot = Some((s.confidence, script.segment_ear(s)));
        }
    }
    for bl in &script.blinks {
        let (a, b) = script.span(bl.time_ms, bl.time_ms + bl.duration_ms);
        for slot in state[a as usize..b as usize].iter_mut().flatten() {
            slot.1 = script.ear_closed;
        }
    }

    let frames = state
        .iter()
        .enumerate()
        .map(|(k, st)| {
            let t = frame_time_ms(k as u64, script.fps);
            match *st {
                None => LandmarkFrame::faceless(k as u64, t),
                Some((confidence, ear)) => {
                    let offset = if script.jitter_px > 0.0 {
                        let j = script.jitter_px;
                        Point::new(rng.random_range(-j..=j), rng.random_range(-j..=j))
                    } else {
                        Point::new(0.0, 0.0)
                    };
                    LandmarkFrame {
                        frame_index: k as u64,
                        timestamp_ms: t,
                        confidence,
                        bbox: Some(face_bbox(offset)),
                        landmarks: face_landmarks(script.scheme, &map, ear, offset),
                    }
                }
            }
        })
        .collect();
    let stream = LandmarkStream {
        header: StreamHeader {
            participant_id: script.participant_id.clone(),
            group: script.group,
            fps: f64::from(script.fps),
            scheme: script.scheme,
            source_video: format!("synthetic:{}", script.participant_id),
        },
        frames,
    };
    let manifest = script.manifest();
    let truth = ground_truth(script, &manifest);
    Ok((stream, manifest, truth))
}

fn intersect(a: Span, b: Span) -> Option<Span> {
    let s = a.0.max(b.0);
    let e = a.1.min(b.1);
    (e > s).then_some((s, e))
}

/// Weighted median of `(value, count)` pairs, averaging the two central
/// values for an even total.
fn weighted_median(mut items: Vec<(f64, u64)>) -> Option<f64> {
    items.retain(|&(_, c)| c > 0);
    items.sort_by(|a, b| a.0.total_cmp(&b.0));
    let total: u64 = items.iter().map(|&(_, c)| c).sum();
    if total == 0 {
        return None;
    }
    let nth = |k: u64| {
        let mut seen = 0;
        for &(v, c) in &items {
            seen += c;
            if k < seen {
                return v;
            }
        }
        unreachable!()
    };
    Some(if total % 2 == 1 {
        nth(total / 2)
    } else {
        (nth(total / 2 - 1) + nth(total / 2)) / 2.0
    })
}

/// Expected trial metrics, derived from the script's intervals.
pub fn ground_truth(script: &StreamScript, manifest: &SessionManifest) -> Vec<TrialMetrics> {
    let n = script.frame_count();
    let fps = f64::from(script.fps);
    let stream_end = if n == 0 {
        0.0
    } else {
        frame_time_ms(n - 1, script.fps) + 1000.0 / fps
    };
    let scale = script.profile.scale();
    let params = &script.params;

    let mut valid: Vec<(Span, f64)> = script
        .segments
        .iter()
        .filter(|s| script.gated(s))
        .map(|s| (script.span(s.start_ms, s.end_ms), script.segment_ear(s)))
        .filter(|(sp, _)| sp.1 > sp.0)
        .collect();
    valid.sort_by_key(|(sp, _)| sp.0);
    let blinks: Vec<Span> = script
        .blinks
        .iter()
        .map(|b| script.span(b.time_ms, b.time_ms + b.duration_ms))
        .collect();

    let events = &manifest.events;
    events
        .iter()
        .enumerate()
        .map(|(i, ev)| {
            let mut end = ev.onset_ms + params.window_len_s * 1000.0;
            if let Some(next) = events.get(i + 1) {
                end = end.min(next.onset_ms);
            }
            if stream_end < end {
                end = stream_end.max(ev.onset_ms);
            }
            let window = (
                frames_before(ev.onset_ms, script.fps, n),
                frames_before(end, script.fps, n),
            );
            let window_len = window.1.saturating_sub(window.0);

            // Valid runs inside the window, with contiguous pieces merged.
            let mut runs: Vec<Span> = Vec::new();
            let mut levels: Vec<(f64, u64)> = Vec::new();
            for &(sp, ear) in &valid {
                let Some(piece) = intersect(sp, window) else { continue };
                let closed: u64 = blinks
                    .iter()
                    .filter_map(|&b| intersect(b, piece))
                    .map(|(a, b)| b - a)
                    .sum();
                levels.push((scale.eop(ear), piece.1 - piece.0 - closed));
                levels.push((scale.eop(script.ear_closed), closed));
                match runs.last_mut() {
                    Some(last) if last.1 == piece.0 => last.1 = piece.1,
                    _ => runs.push(piece),
                }
            }
            let valid_count: u64 = runs.iter().map(|r| r.1 - r.0).sum();
            let k = params.k_frames.max(1) as u64;
            let onset = runs.iter().find(|r| r.1 - r.0 >= k).map(|r| r.0);
            let mut longest = 0;
            let mut current: Option<Span> = None;
            for &r in &runs {
                current = match current {
                    Some(c) if r.0 - c.1 <= params.gap_tolerance_frames as u64 => Some((c.0, r.1)),
                    _ => Some(r),
                };
                let c = current.unwrap();
                longest = longest.max(c.1 - c.0);
            }
            TrialMetrics {
                participant_id: manifest.participant_id.clone(),
                group: manifest.group,
                stimulus: ev.stimulus,
                turn: ev.turn,
                onset_ms: ev.onset_ms,
                end_ms: end,
                latency_s: onset.map(|s| ((frame_time_ms(s, script.fps) - ev.onset_ms) / 1000.0).max(0.0)),
                duration_s: (window_len > 0).then(|| if onset.is_some() { longest as f64 / fps } else { 0.0 }),
                mean_eop: weighted_median(levels),
                valid_frame_fraction: if window_len == 0 {
                    0.0
                } else {
                    valid_count as f64 / window_len as f64
                },
                responded: onset.is_some(),
            }
        })
        .collect()
}

/// First grid time at or after frame `k`, in whole milliseconds, such that
/// the frame range of `[ms_of_frame(a), ms_of_frame(b))` is exactly `[a, b)`.
fn ms_of_frame(k: u64, fps: u32) -> u64 {
    k * 1000 / u64::from(fps)
}

/// A random but valid script exercising gating, adjacency, blinks, clipped
/// windows and censored trials.
pub fn random_script(seed: u64) -> StreamScript {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let group = if rng.random_bool(0.5) { Group::TD } else { Group::ASD };
    let fps: u32 = [25, 30, 30, 60][rng.random_range(0..4)];
    let scheme = if rng.random_bool(0.5) {
        Scheme::Fan68
    } else {
        Scheme::Mesh468
    };
    let profile = GateProfile::default_for(group);
    let w = profile.smooth_window as u64;
    let n_frames = u64::from(fps) * rng.random_range(20..60u64);
    let total_ms = ms_of_frame(n_frames, fps) + 1;

    // Segments on the frame grid, separated by random gaps (sometimes none).
    let mut segments = Vec::new();
    let mut blinks = Vec::new();
    let mut k = rng.random_range(0..3 * u64::from(fps));
    while k < n_frames {
        let len = rng.random_range(1..6 * u64::from(fps));
        let end = (k + len).min(n_frames);
        let confidence = [0.3, 0.5, 0.65, 0.75, 0.9, 1.0][rng.random_range(0..6)];
        let level_change = end - k >= w && rng.random_bool(0.5);
        let ear_open = level_change.then(|| rng.random_range(0.15..0.35));
        // Blinks strictly inside, spaced by at least the smoothing window.
        let mut b = k + w;
        while b + 2 * w <= end {
            b += rng.random_range(0..2 * u64::from(fps));
            let blen = rng.random_range(w..w + 6);
            if b + blen + w > end {
                break;
            }
            if rng.random_bool(0.6) {
                blinks.push(Blink {
                    time_ms: ms_of_frame(b, fps),
                    duration_ms: ms_of_frame(b + blen, fps) - ms_of_frame(b, fps),
                });
            }
            b += blen + w;
        }
        segments.push(FaceSegment {
            start_ms: ms_of_frame(k, fps),
            end_ms: ms_of_frame(end, fps),
            confidence,
            ear_open,
        });
        let gap = if rng.random_bool(0.2) {
            0
        } else {
            rng.random_range(1..2 * u64::from(fps))
        };
        k = end + gap;
    }

    let mut script = StreamScript {
        participant_id: format!("S{seed}"),
        group,
        fps,
        total_ms,
        scheme,
        ear_open: rng.random_range(0.2..0.34),
        ear_closed: rng.random_range(0.0..0.12),
        jitter_px: if rng.random_bool(0.5) { 2.0 } else { 0.0 },
        seed,
        profile,
        params: TrialParams::default(),
        segments,
        blinks,
        events: Vec::new(),
    };
    // Adjacent gated segments with a level change must both be long enough;
    // flatten the level of offenders.
    if script.check().is_err() {
        for s in &mut script.segments {
            s.ear_open = None;
        }
    }
    script.check().expect("random script is valid");

    // Onsets: random gaps, sometimes shorter than the window, sometimes
    // running past the stream end.
    let mut cells: Vec<(crate::Stimulus, u8)> = crate::Stimulus::ALL
        .iter()
        .flat_map(|&s| crate::types::TURNS.map(|t| (s, t)))
        .collect();
    let mut t = rng.random_range(0..5000u64);
    let n_events = rng.random_range(1..=crate::stream::MAX_EVENTS);
    for _ in 0..n_events {
        if t > total_ms + 3000 {
            break;
        }
        let (stimulus, turn) = cells.swap_remove(rng.random_range(0..cells.len()));
        script.events.push(StimulusEvent {
            stimulus,
            turn,
            onset_ms: t as f64,
        });
        t += rng.random_range(1000..14_000u64);
    }
    script
}
