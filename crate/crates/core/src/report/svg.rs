//! Static SVG figures. Output depends only on the input values, so the
//! bytes are stable across runs and platforms.

use std::collections::BTreeMap;
use std::fmt::Write;

use super::tables::turn_means;
use crate::stats::{mean, median, per_subject_slope};
use crate::trials::{TrialMetrics, Variable};
use crate::types::TURNS;
use crate::{Group, Stimulus};

const TD_COLOR: &str = "#1f77b4";
const ASD_COLOR: &str = "#d62728";

fn color(g: Group) -> &'static str {
    match g {
        Group::TD => TD_COLOR,
        Group::ASD => ASD_COLOR,
    }
}

fn open(width: u32, height: u32, title: &str) -> String {
    format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" width=\"{width}\" height=\"{height}\" \
         viewBox=\"0 0 {width} {height}\" font-family=\"sans-serif\" font-size=\"12\">\n\
         <rect width=\"{width}\" height=\"{height}\" fill=\"white\"/>\n\
         <text x=\"{}\" y=\"20\" text-anchor=\"middle\" font-size=\"14\">{title}</text>\n",
        width / 2
    )
}

fn legend(out: &mut String, x: f64, y: f64) {
    for (i, g) in Group::ALL.iter().enumerate() {
        let yy = y + 16.0 * i as f64;
        let _ = writeln!(
            out,
            "<rect x=\"{x:.2}\" y=\"{:.2}\" width=\"10\" height=\"10\" fill=\"{}\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\">{g}</text>",
            yy - 9.0,
            color(*g),
            x + 14.0,
            yy
        );
    }
}

/// Deterministic horizontal spread in `[-0.5, 0.5)` for the i-th point.
fn spread(i: usize) -> f64 {
    ((i * 7919) % 101) as f64 / 101.0 - 0.5
}

/// Per-stimulus strips of trial mean EOP by group, with the median marked.
pub fn eop_strips(trials: &[TrialMetrics]) -> String {
    let (w, h) = (760u32, 420u32);
    let (left, right, top, bottom) = (60.0, 700.0, 40.0, 370.0);
    let y_of = |v: f64| bottom - (v.clamp(0.0, 100.0) / 100.0) * (bottom - top);
    let band = (right - left) / Stimulus::ALL.len() as f64;
    let mut out = open(w, h, "Mean eye-openness per trial");
    for tick in (0..=100).step_by(20) {
        let y = y_of(f64::from(tick));
        let _ = writeln!(
            out,
            "<line x1=\"{left}\" y1=\"{y:.2}\" x2=\"{right}\" y2=\"{y:.2}\" stroke=\"#dddddd\"/>\
             <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{tick}</text>",
            left - 6.0,
            y + 4.0
        );
    }
    for (si, s) in Stimulus::ALL.iter().enumerate() {
        let x0 = left + band * si as f64;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{s}</text>",
            x0 + band / 2.0,
            bottom + 20.0
        );
        for (gi, g) in Group::ALL.iter().enumerate() {
            let cx = x0 + band * (0.3 + 0.4 * gi as f64);
            let mut values: Vec<f64> = trials
                .iter()
                .filter(|t| t.group == *g && t.stimulus == *s)
                .filter_map(|t| t.mean_eop)
                .collect();
            for (i, v) in values.iter().enumerate() {
                let _ = writeln!(
                    out,
                    "<circle cx=\"{:.2}\" cy=\"{:.2}\" r=\"2.5\" fill=\"{}\" fill-opacity=\"0.5\"/>",
                    cx + spread(i) * band * 0.3,
                    y_of(*v),
                    color(*g)
                );
            }
            if let Some(m) = median(&mut values) {
                let _ = writeln!(
                    out,
                    "<line x1=\"{:.2}\" y1=\"{:.2}\" x2=\"{:.2}\" y2=\"{:.2}\" stroke=\"black\" stroke-width=\"2\"/>",
                    cx - band * 0.17,
                    y_of(m),
                    cx + band * 0.17,
                    y_of(m)
                );
            }
        }
    }
    legend(&mut out, right + 10.0, top + 10.0);
    out.push_str("</svg>\n");
    out
}

/// Medians of trial mean EOP per stimulus for one group, as drawn in the strips.
pub fn strip_medians(trials: &[TrialMetrics], group: Group) -> Vec<(Stimulus, Option<f64>)> {
    Stimulus::ALL
        .iter()
        .map(|&s| {
            let mut v: Vec<f64> = trials
                .iter()
                .filter(|t| t.group == group && t.stimulus == s)
                .filter_map(|t| t.mean_eop)
                .collect();
            (s, median(&mut v))
        })
        .collect()
}

/// Group mean EOP for every stimulus and turn.
pub fn turn_heatmap(trials: &[TrialMetrics]) -> String {
    let means = turn_means(trials, Variable::MeanEop);
    let (cell_w, cell_h) = (70.0, 26.0);
    let (left, top) = (90.0, 50.0);
    let rows: Vec<(Group, Stimulus)> = Group::ALL
        .iter()
        .flat_map(|&g| Stimulus::ALL.iter().map(move |&s| (g, s)))
        .collect();
    let w = (left + cell_w * 3.0 + 40.0) as u32;
    let h = (top + cell_h * rows.len() as f64 + 20.0) as u32;
    let mut out = open(w, h, "Mean EOP by turn");
    for (ti, t) in TURNS.iter().enumerate() {
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">turn {t}</text>",
            left + cell_w * (ti as f64 + 0.5),
            top - 8.0
        );
    }
    for (ri, (g, s)) in rows.iter().enumerate() {
        let y = top + cell_h * ri as f64;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{g} {s}</text>",
            left - 6.0,
            y + cell_h / 2.0 + 4.0
        );
        for (ti, t) in TURNS.iter().enumerate() {
            let x = left + cell_w * ti as f64;
            let (fill, label) = match means.get(&(*g, *s, *t)) {
                Some(&m) => {
                    // white at 0 to dark blue at 100
                    let f = m.clamp(0.0, 100.0) / 100.0;
                    let c = |hi: f64, lo: f64| (hi + (lo - hi) * f).round() as u8;
                    (
                        format!("#{:02x}{:02x}{:02x}", c(255.0, 8.0), c(255.0, 48.0), c(255.0, 107.0)),
                        format!("{m:.1}"),
                    )
                }
                None => ("#eeeeee".to_owned(), "-".to_owned()),
            };
            let text_fill = if label != "-" && label.parse::<f64>().unwrap_or(0.0) > 55.0 {
                "white"
            } else {
                "black"
            };
            let _ = writeln!(
                out,
                "<rect x=\"{x:.2}\" y=\"{y:.2}\" width=\"{cell_w}\" height=\"{cell_h}\" fill=\"{fill}\" stroke=\"white\"/>\
                 <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\" fill=\"{text_fill}\">{label}</text>",
                x + cell_w / 2.0,
                y + cell_h / 2.0 + 4.0
            );
        }
    }
    out.push_str("</svg>\n");
    out
}

/// Group mean of the per-subject mean-EOP slopes for every stimulus.
pub fn slope_bars(trials: &[TrialMetrics]) -> String {
    let mut by_key: BTreeMap<(&str, Stimulus), Vec<&TrialMetrics>> = BTreeMap::new();
    for t in trials {
        by_key
            .entry((t.participant_id.as_str(), t.stimulus))
            .or_default()
            .push(t);
    }
    let mut slopes: BTreeMap<(Group, Stimulus), Vec<f64>> = BTreeMap::new();
    for group in by_key.values() {
        if let Some(r) = per_subject_slope(group, Variable::MeanEop) {
            slopes.entry((r.group, r.stimulus)).or_default().push(r.beta1);
        }
    }
    let bars: BTreeMap<(Group, Stimulus), f64> = slopes.iter().filter_map(|(k, v)| mean(v).map(|m| (*k, m))).collect();
    let max_abs = bars.values().fold(1.0f64, |a, v| a.max(v.abs()));

    let (w, h) = (760u32, 360u32);
    let (left, right, top, bottom) = (60.0, 700.0, 40.0, 320.0);
    let zero = (top + bottom) / 2.0;
    let scale = (bottom - top) / 2.0 / max_abs;
    let band = (right - left) / Stimulus::ALL.len() as f64;
    let mut out = open(w, h, "Mean per-subject EOP slope across turns");
    let _ = writeln!(
        out,
        "<line x1=\"{left}\" y1=\"{zero:.2}\" x2=\"{right}\" y2=\"{zero:.2}\" stroke=\"black\"/>\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">0</text>\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">{}</text>\
         <text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"end\">-{}</text>",
        left - 6.0,
        zero + 4.0,
        left - 6.0,
        top + 4.0,
        super::format::num(max_abs),
        left - 6.0,
        bottom + 4.0,
        super::format::num(max_abs)
    );
    for (si, s) in Stimulus::ALL.iter().enumerate() {
        let x0 = left + band * si as f64;
        let _ = writeln!(
            out,
            "<text x=\"{:.2}\" y=\"{:.2}\" text-anchor=\"middle\">{s}</text>",
            x0 + band / 2.0,
            bottom + 20.0
        );
        for (gi, g) in Group::ALL.iter().enumerate() {
            let Some(&v) = bars.get(&(*g, *s)) else { continue };
            let bh = v.abs() * scale;
            let y = if v >= 0.0 { zero - bh } else { zero };
            let _ = writeln!(
                out,
                "<rect x=\"{:.2}\" y=\"{y:.2}\" width=\"{:.2}\" height=\"{bh:.2}\" fill=\"{}\"/>",
                x0 + band * (0.15 + 0.35 * gi as f64),
                band * 0.33,
                color(*g)
            );
        }
    }
    legend(&mut out, right + 10.0, top + 10.0);
    out.push_str("</svg>\n");
    out
}

/// All figures as `(file name, svg)`; empty when there are no trials.
pub fn emit_plots(trials: &[TrialMetrics]) -> Vec<(&'static str, String)> {
    if trials.is_empty() {
        return Vec::new();
    }
    vec![
        ("EOP_Strips.svg", eop_strips(trials)),
        ("Turn_Heatmap.svg", turn_heatmap(trials)),
        ("Slope_Bars.svg", slope_bars(trials)),
    ]
}
