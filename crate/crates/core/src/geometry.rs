//! Per-frame geometric engagement quantities.
//!
//! For every gated frame: face area from the bounding box, eye polygon area
//! by the shoelace formula, eye aspect ratio (EAR) from six eye landmarks,
//! and the eye-openness percentage (EOP) obtained by clipping a linear
//! rescale of EAR to `[0, 100]`.

use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::stats::median;
use crate::stream::{BBox, LandmarkFrame, Point, Scheme};
use crate::{Error, Group, Result};

/// Horizontal eye spans shorter than this mark the frame invalid.
pub const EAR_MIN_SPAN_PX: f64 = 1e-6;

/// Linear EAR to EOP mapping: `floor` maps to 0 %, `floor + range` to 100 %.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct EopScale {
    pub floor: f64,
    pub range: f64,
}

impl Default for EopScale {
    fn default() -> Self {
        EopScale {
            floor: 0.18,
            range: 0.12,
        }
    }
}

impl EopScale {
    pub fn eop(&self, ear_value: f64) -> f64 {
        ((ear_value - self.floor) / self.range * 100.0).clamp(0.0, 100.0)
    }

    /// Inverse of [`EopScale::eop`] on the open interval `(0, 100)`.
    pub fn ear_for(&self, eop_value: f64) -> f64 {
        self.floor + self.range * eop_value / 100.0
    }
}

/// Confidence gate, smoothing window and EOP scale applied to one group.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct GateProfile {
    pub tau_c: f64,
    pub smooth_window: usize,
    pub eop_floor: f64,
    pub eop_range: f64,
}

impl Default for GateProfile {
    fn default() -> Self {
        GateProfile::td_default()
    }
}

impl GateProfile {
    pub fn td_default() -> Self {
        GateProfile {
            tau_c: 0.6,
            smooth_window: 5,
            eop_floor: 0.18,
            eop_range: 0.12,
        }
    }

    /// Stricter gate and wider smoothing used for the autistic group.
    pub fn asd_default() -> Self {
        GateProfile {
            tau_c: 0.7,
            smooth_window: 7,
            ..GateProfile::td_default()
        }
    }

    pub fn default_for(group: Group) -> Self {
        match group {
            Group::TD => GateProfile::td_default(),
            Group::ASD => GateProfile::asd_default(),
        }
    }

    pub fn new(tau_c: f64, smooth_window: usize) -> Result<Self> {
        let profile = GateProfile {
            tau_c,
            smooth_window,
            ..GateProfile::td_default()
        };
        profile.check()?;
        Ok(profile)
    }

    pub fn check(&self) -> Result<()> {
        if !(0.0..=1.0).contains(&self.tau_c) {
            return Err(Error::Config(format!("tau_c {} outside [0,1]", self.tau_c)));
        }
        check_window(self.smooth_window)?;
        if !(self.eop_range > 0.0 && self.eop_range.is_finite() && self.eop_floor.is_finite()) {
            return Err(Error::Config("EOP range must be positive".into()));
        }
        Ok(())
    }

    pub fn scale(&self) -> EopScale {
        EopScale {
            floor: self.eop_floor,
            range: self.eop_range,
        }
    }
}

fn check_window(window: usize) -> Result<()> {
    if window == 0 || window.is_multiple_of(2) {
        return Err(Error::Config(format!(
            "smoothing window must be odd and positive, got {window}"
        )));
    }
    Ok(())
}

/// Landmark indices for the six EAR points (corner, two upper lid, corner,
/// two lower lid) and the closed eye contour of each eye.
#[derive(Debug, Clone, PartialEq, Eq, Serialize, Deserialize)]
pub struct EyeIndexMap {
    #[serde(default, skip_serializing_if = "Option::is_none")]
    pub scheme: Option<Scheme>,
    #[serde(rename = "ear_points_L")]
    pub ear_points_l: [usize; 6],
    #[serde(rename = "ear_points_R")]
    pub ear_points_r: [usize; 6],
    #[serde(rename = "contour_L")]
    pub contour_l: Vec<usize>,
    #[serde(rename = "contour_R")]
    pub contour_r: Vec<usize>,
}

const FAN68_MAP: &str = include_str!("../maps/fan68.json");
const MESH468_MAP: &str = include_str!("../maps/mesh468.json");

impl EyeIndexMap {
    /// The map shipped with the crate for `scheme`.
    pub fn for_scheme(scheme: Scheme) -> Self {
        let raw = match scheme {
            Scheme::Fan68 => FAN68_MAP,
            Scheme::Mesh468 => MESH468_MAP,
        };
        serde_json::from_str(raw).expect("shipped eye map is valid")
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let map: EyeIndexMap = serde_json::from_str(text).map_err(|e| Error::Config(format!("eye map: {e}")))?;
        if map.contour_l.len() < 3 || map.contour_r.len() < 3 {
            return Err(Error::Config("eye contours need at least 3 points".into()));
        }
        Ok(map)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::from_json(&text)
    }

    fn max_index(&self) -> usize {
        self.ear_points_l
            .iter()
            .chain(&self.ear_points_r)
            .chain(&self.contour_l)
            .chain(&self.contour_r)
            .copied()
            .max()
            .unwrap_or(0)
    }

    /// Fails if any index falls outside a landmark list of length `count`.
    pub fn check_count(&self, count: usize) -> Result<()> {
        let max = self.max_index();
        if max >= count {
            return Err(Error::Config(format!(
                "eye map index {max} out of range for {count} landmarks"
            )));
        }
        Ok(())
    }

    pub fn check_scheme(&self, scheme: Scheme) -> Result<()> {
        if let Some(own) = self.scheme {
            if own != scheme {
                return Err(Error::Config(format!("eye map is for {own}, stream uses {scheme}")));
            }
        }
        self.check_count(scheme.landmark_count())
    }
}

pub fn face_area(bbox: &BBox) -> Result<f64> {
    let (w, h) = (bbox.x2 - bbox.x1, bbox.y2 - bbox.y1);
    if !(w > 0.0 && h > 0.0) {
        return Err(Error::Domain(format!("degenerate bounding box {bbox:?}")));
    }
    Ok(w * h)
}

/// Shoelace area of a closed polygon given in vertex order.
pub fn polygon_area(points: &[Point]) -> Result<f64> {
    if points.len() < 3 {
        return Err(Error::Domain(format!(
            "polygon needs at least 3 vertices, got {}",
            points.len()
        )));
    }
    let twice: f64 = points
        .iter()
        .zip(points.iter().cycle().skip(1))
        .map(|(a, b)| a.x * b.y - b.x * a.y)
        .sum();
    Ok(twice.abs() / 2.0)
}

/// Eye aspect ratio `(|p2-p6| + |p3-p5|) / (2 |p1-p4|)`.
pub fn ear(p: &[Point; 6]) -> Result<f64> {
    let span = p[0].distance(p[3]);
    if span.is_nan() || span < EAR_MIN_SPAN_PX {
        return Err(Error::Domain(format!("horizontal eye span {span} px too small")));
    }
    Ok((p[1].distance(p[5]) + p[2].distance(p[4])) / (2.0 * span))
}

/// EOP with the default 0.18 / 0.12 scale.
pub fn eop(ear_value: f64) -> f64 {
    EopScale::default().eop(ear_value)
}

pub fn mean_eop_frame(eop_l: f64, eop_r: f64) -> f64 {
    (eop_l + eop_r) / 2.0
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct EyeMetrics {
    pub face_area_px2: f64,
    pub eye_area_l: f64,
    pub eye_area_r: f64,
    pub ear_l: f64,
    pub ear_r: f64,
    pub eop_l: f64,
    pub eop_r: f64,
    pub mean_eop: f64,
}

/// Metrics of one frame; `metrics` is `None` for frames that failed the gate.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct FrameMetrics {
    pub frame_index: u64,
    pub timestamp_ms: f64,
    pub metrics: Option<EyeMetrics>,
}

impl FrameMetrics {
    pub fn valid(&self) -> bool {
        self.metrics.is_some()
    }

    pub fn mean_eop(&self) -> Option<f64> {
        self.metrics.map(|m| m.mean_eop)
    }
}

fn pick<const N: usize>(landmarks: &[Point], idx: &[usize; N]) -> [Point; N] {
    idx.map(|i| landmarks[i])
}

pub fn frame_metrics(frame: &LandmarkFrame, profile: &GateProfile, map: &EyeIndexMap) -> Result<FrameMetrics> {
    let invalid = FrameMetrics {
        frame_index: frame.frame_index,
        timestamp_ms: frame.timestamp_ms,
        metrics: None,
    };
    let bbox = match &frame.bbox {
        Some(b) if frame.confidence >= profile.tau_c => b,
        _ => return Ok(invalid),
    };
    map.check_count(frame.landmarks.len())?;
    let lm = &frame.landmarks;
    let (ear_l, ear_r) = match (ear(&pick(lm, &map.ear_points_l)), ear(&pick(lm, &map.ear_points_r))) {
        (Ok(l), Ok(r)) => (l, r),
        _ => return Ok(invalid),
    };
    let contour = |idx: &[usize]| -> Result<f64> {
        let pts: Vec<Point> = idx.iter().map(|&i| lm[i]).collect();
        polygon_area(&pts)
    };
    let scale = profile.scale();
    let (eop_l, eop_r) = (scale.eop(ear_l), scale.eop(ear_r));
    Ok(FrameMetrics {
        metrics: Some(EyeMetrics {
            face_area_px2: face_area(bbox)?,
            eye_area_l: contour(&map.contour_l)?,
            eye_area_r: contour(&map.contour_r)?,
            ear_l,
            ear_r,
            eop_l,
            eop_r,
            mean_eop: mean_eop_frame(eop_l, eop_r),
        }),
        ..invalid
    })
}

/// Centered moving median over the present neighbours of each present value.
/// Absent entries stay absent; `window == 1` is the identity.
pub fn smooth_series(values: &[Option<f64>], window: usize) -> Result<Vec<Option<f64>>> {
    check_window(window)?;
    let half = window / 2;
    let mut buf = Vec::with_capacity(window);
    Ok(values
        .iter()
        .enumerate()
        .map(|(i, v)| {
            v.map(|_| {
                buf.clear();
                let lo = i.saturating_sub(half);
                let hi = (i + half).min(values.len() - 1);
                buf.extend(values[lo..=hi].iter().flatten());
                median(&mut buf).expect("window holds the centre value")
            })
        })
        .collect())
}
