//! Ordinal response cohorts drawn from per-cell distributions.

use std::path::Path;

use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::coding::{canonical_columns, WideRow, WideTable};
use crate::types::TURNS;
use crate::{Error, Group, Result, Stimulus};

/// Distribution of one (group, stimulus) cell over the codes 0, 1, 2.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(untagged)]
pub enum ResponseDist {
    /// `[P(0), P(1), P(2)]`.
    Probs { probs: [f64; 3] },
    /// Mean and population SD, converted to the unique matching distribution.
    Moments { mu: f64, sigma: f64 },
}

impl ResponseDist {
    /// Probability vector `[P(0), P(1), P(2)]`.
    pub fn probs(&self) -> Result<[f64; 3]> {
        let p = match *self {
            ResponseDist::Probs { probs } => probs,
            ResponseDist::Moments { mu, sigma } => {
                let p2 = (sigma * sigma + mu * mu - mu) / 2.0;
                let p1 = mu - 2.0 * p2;
                [1.0 - p1 - p2, p1, p2]
            }
        };
        const TOL: f64 = 1e-9;
        if p.iter().any(|v| !v.is_finite() || *v < -TOL) || (p.iter().sum::<f64>() - 1.0).abs() > TOL {
            return Err(Error::Config(format!(
                "response distribution {p:?} is not a probability vector"
            )));
        }
        Ok(p.map(|v| v.max(0.0)))
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CohortCell {
    pub group: Group,
    pub stimulus: Stimulus,
    #[serde(flatten)]
    pub dist: ResponseDist,
    /// Change in expected response per turn, centred on turn 2.
    #[serde(default)]
    pub turn_slope: f64,
}

#[derive(Debug, Clone, PartialEq)]
pub struct CohortProfile {
    pub seed: u64,
    pub n_td: usize,
    pub n_asd: usize,
    pub cells: Vec<CohortCell>,
}

#[derive(Serialize, Deserialize)]
struct ProfileHeader {
    seed: u64,
    n_td: usize,
    n_asd: usize,
}

// Response-type percentages (none, partial, full) of the reference cohort.
const TD_PCT: [[f64; 3]; 5] = [
    [9.40, 22.22, 68.38],
    [20.51, 8.55, 70.94],
    [17.09, 24.79, 58.12],
    [19.66, 35.90, 44.44],
    [23.08, 25.64, 51.28],
];
const ASD_PCT: [[f64; 3]; 5] = [
    [51.39, 19.44, 29.17],
    [37.50, 29.17, 33.33],
    [9.72, 25.00, 65.28],
    [13.89, 16.67, 69.44],
    [5.56, 15.28, 79.17],
];

impl CohortProfile {
    /// Reference cohort: 39 TD and 24 ASD participants with the published
    /// response-type percentages and no turn trend.
    pub fn reference(seed: u64) -> Self {
        let mut cells = Vec::new();
        for (group, table) in [(Group::TD, &TD_PCT), (Group::ASD, &ASD_PCT)] {
            for (s, pct) in Stimulus::ALL.iter().zip(table) {
                let total: f64 = pct.iter().sum();
                cells.push(CohortCell {
                    group,
                    stimulus: *s,
                    dist: ResponseDist::Probs {
                        probs: pct.map(|v| v / total),
                    },
                    turn_slope: 0.0,
                });
            }
        }
        CohortProfile {
            seed,
            n_td: 39,
            n_asd: 24,
            cells,
        }
    }

    pub fn n(&self, group: Group) -> usize {
        match group {
            Group::TD => self.n_td,
            Group::ASD => self.n_asd,
        }
    }

    pub fn cell(&self, group: Group, stimulus: Stimulus) -> Option<&CohortCell> {
        self.cells.iter().find(|c| c.group == group && c.stimulus == stimulus)
    }

    pub fn check(&self) -> Result<()> {
        if self.n_td + self.n_asd == 0 {
            return Err(Error::Config("cohort needs at least one participant".into()));
        }
        for (i, c) in self.cells.iter().enumerate() {
            c.dist.probs()?;
            if self.cells[..i]
                .iter()
                .any(|o| o.group == c.group && o.stimulus == c.stimulus)
            {
                return Err(Error::Config(format!("duplicate cell {} {}", c.group, c.stimulus)));
            }
        }
        for g in Group::ALL {
            if self.n(g) == 0 {
                continue;
            }
            for s in Stimulus::ALL {
                let cell = self
                    .cell(g, s)
                    .ok_or_else(|| Error::Config(format!("no distribution for {g} {s}")))?;
                for t in TURNS {
                    turn_probs(cell, t)?;
                }
            }
        }
        Ok(())
    }

    /// JSON-lines form: a `{seed, n_td, n_asd}` header, then one cell per line.
    pub fn parse(text: &str) -> Result<Self> {
        let mut lines = text
            .lines()
            .enumerate()
            .map(|(i, l)| (i + 1, l.trim()))
            .filter(|(_, l)| !l.is_empty());
        let (line, raw) = lines.next().ok_or_else(|| Error::format(1, "missing header"))?;
        let header: ProfileHeader =
            serde_json::from_str(raw).map_err(|e| Error::format(line, format!("bad header: {e}")))?;
        let cells = lines
            .map(|(line, raw)| serde_json::from_str(raw).map_err(|e| Error::format(line, format!("bad cell: {e}"))))
            .collect::<Result<Vec<CohortCell>>>()?;
        let profile = CohortProfile {
            seed: header.seed,
            n_td: header.n_td,
            n_asd: header.n_asd,
            cells,
        };
        profile.check()?;
        Ok(profile)
    }

    pub fn read(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(&text)
    }

    pub fn to_jsonl(&self) -> String {
        let header = ProfileHeader {
            seed: self.seed,
            n_td: self.n_td,
            n_asd: self.n_asd,
        };
        let mut out = serde_json::to_string(&header).expect("header serializes");
        out.push('\n');
        for c in &self.cells {
            out.push_str(&serde_json::to_string(c).expect("cell serializes"));
            out.push('\n');
        }
        out
    }
}

fn mean_of(p: &[f64; 3]) -> f64 {
    p[1] + 2.0 * p[2]
}

/// Exponentially tilts `p` so that its mean becomes `target`.
fn tilt(p: [f64; 3], target: f64) -> Result<[f64; 3]> {
    let support: Vec<usize> = (0..3).filter(|&i| p[i] > 0.0).collect();
    let (lo, hi) = (support[0] as f64, *support.last().unwrap() as f64);
    if (mean_of(&p) - target).abs() < 1e-15 {
        return Ok(p);
    }
    if !(target > lo && target < hi) {
        return Err(Error::Config(format!(
            "turn mean {target} is out of reach for distribution {p:?}"
        )));
    }
    let tilted = |lambda: f64| {
        let w = [p[0], p[1] * lambda.exp(), p[2] * (2.0 * lambda).exp()];
        let z: f64 = w.iter().sum();
        w.map(|v| v / z)
    };
    let (mut a, mut b) = (-60.0f64, 60.0f64);
    for _ in 0..200 {
        let mid = 0.5 * (a + b);
        if mean_of(&tilted(mid)) < target {
            a = mid;
        } else {
            b = mid;
        }
    }
    Ok(tilted(0.5 * (a + b)))
}

/// Distribution used at `turn`: the cell's distribution tilted so the mean
/// moves by `turn_slope` per turn around turn 2.
pub fn turn_probs(cell: &CohortCell, turn: u8) -> Result<[f64; 3]> {
    let p = cell.dist.probs()?;
    let shift = cell.turn_slope * (f64::from(turn) - 2.0);
    if shift == 0.0 {
        return Ok(p);
    }
    tilt(p, mean_of(&p) + shift)
}

fn draw(rng: &mut ChaCha8Rng, p: &[f64; 3]) -> u8 {
    let u: f64 = rng.random();
    if u < p[0] {
        0
    } else if u < p[0] + p[1] {
        1
    } else {
        2
    }
}

pub fn participant_id(group: Group, index: usize) -> String {
    format!("{group}{:03}", index + 1)
}

/// Draws a full wide coding table. Participant `i` (TD first, then ASD)
/// uses stream `i` of a ChaCha8 generator seeded with the profile seed.
pub fn gen_ordinal_cohort(profile: &CohortProfile) -> Result<WideTable> {
    profile.check()?;
    let mut probs = Vec::new();
    for g in Group::ALL {
        let mut per_group = Vec::new();
        if profile.n(g) > 0 {
            for s in Stimulus::ALL {
                let cell = profile.cell(g, s).expect("checked");
                for t in TURNS {
                    per_group.push(turn_probs(cell, t)?);
                }
            }
        }
        probs.push(per_group);
    }
    let mut rows = Vec::with_capacity(profile.n_td + profile.n_asd);
    let mut stream = 0u64;
    for (gi, g) in Group::ALL.into_iter().enumerate() {
        for i in 0..profile.n(g) {
            let mut rng = ChaCha8Rng::seed_from_u64(profile.seed);
            rng.set_stream(stream);
            stream += 1;
            rows.push(WideRow {
                participant_id: participant_id(g, i),
                group: g,
                cells: probs[gi].iter().map(|p| draw(&mut rng, p).to_string()).collect(),
            });
        }
    }
    Ok(WideTable {
        columns: canonical_columns(),
        rows,
    })
}
