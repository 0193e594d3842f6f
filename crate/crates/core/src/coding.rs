//! Manual three-point response coding.
//!
//! Each trial is coded 0 (no response), 1 (partial) or 2 (full). Coders
//! deliver a wide table, one row per participant and one column per
//! stimulus-turn (`SM1 .. NR3`); analysis works on the long form.

use std::collections::BTreeMap;
use std::path::Path;

use crate::stats::{mean, sample_sd};
use crate::types::TURNS;
use crate::{Error, Group, Result, Stimulus};

#[derive(Debug, Clone, PartialEq, Eq, PartialOrd, Ord)]
pub struct ResponseRecord {
    pub participant_id: String,
    pub group: Group,
    pub stimulus: Stimulus,
    pub turn: u8,
    pub response: u8,
}

/// Wide coding table as read from disk; cells are kept verbatim until
/// [`wide_to_long`] validates them.
#[derive(Debug, Clone, PartialEq, Eq, Default)]
pub struct WideTable {
    /// Stimulus-turn column names, in file order.
    pub columns: Vec<String>,
    pub rows: Vec<WideRow>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct WideRow {
    pub participant_id: String,
    pub group: Group,
    pub cells: Vec<String>,
}

#[derive(Debug, Clone, PartialEq, Eq)]
pub struct LongTable {
    pub records: Vec<ResponseRecord>,
    pub missing_count: usize,
}

pub fn column_name(stimulus: Stimulus, turn: u8) -> String {
    format!("{stimulus}{turn}")
}

/// The fifteen columns in canonical order.
pub fn canonical_columns() -> Vec<String> {
    Stimulus::ALL
        .iter()
        .flat_map(|&s| TURNS.iter().map(move |&t| column_name(s, t)))
        .collect()
}

fn parse_column(name: &str) -> Result<(Stimulus, u8)> {
    let bad = || Error::InvalidInput(format!("unknown column {name:?}"));
    if name.len() != 3 || !name.is_ascii() {
        return Err(bad());
    }
    let stimulus: Stimulus = name[..2].parse().map_err(|_| bad())?;
    match &name[2..] {
        "1" => Ok((stimulus, 1)),
        "2" => Ok((stimulus, 2)),
        "3" => Ok((stimulus, 3)),
        _ => Err(bad()),
    }
}

/// Reads `participant,group,SM1,...,NR3` CSV.
pub fn parse_wide_table(bytes: &[u8]) -> Result<WideTable> {
    let mut reader = csv::ReaderBuilder::new().trim(csv::Trim::All).from_reader(bytes);
    let headers = reader.headers()?.clone();
    if headers.len() < 2 || &headers[0] != "participant" || &headers[1] != "group" {
        return Err(Error::InvalidInput(
            "wide table header must start with participant,group".into(),
        ));
    }
    let columns: Vec<String> = headers.iter().skip(2).map(str::to_owned).collect();
    let mut rows = Vec::new();
    for (i, record) in reader.records().enumerate() {
        let record = record?;
        let line = i + 2;
        let group = record[1]
            .parse()
            .map_err(|e: Error| Error::format(line, e.to_string()))?;
        rows.push(WideRow {
            participant_id: record[0].to_owned(),
            group,
            cells: record.iter().skip(2).map(str::to_owned).collect(),
        });
    }
    Ok(WideTable { columns, rows })
}

pub fn read_wide_table(path: &Path) -> Result<WideTable> {
    let bytes = std::fs::read(path).map_err(|e| Error::io(path, e))?;
    parse_wide_table(&bytes)
}

pub fn write_wide_table(table: &WideTable) -> Result<String> {
    let mut w = csv::Writer::from_writer(Vec::new());
    let mut header = vec!["participant".to_owned(), "group".to_owned()];
    header.extend(table.columns.iter().cloned());
    w.write_record(&header)?;
    for row in &table.rows {
        let mut rec = vec![row.participant_id.clone(), row.group.to_string()];
        rec.extend(row.cells.iter().cloned());
        w.write_record(&rec)?;
    }
    let bytes = w.into_inner().map_err(|e| Error::Internal(e.to_string()))?;
    String::from_utf8(bytes).map_err(|e| Error::Internal(e.to_string()))
}

/// Converts the wide table to one record per filled cell. Empty cells are
/// dropped and counted.
pub fn wide_to_long(table: &WideTable) -> Result<LongTable> {
    let keys = table
        .columns
        .iter()
        .map(|c| parse_column(c))
        .collect::<Result<Vec<_>>>()?;
    let mut records = Vec::new();
    let mut missing_count = 0;
    for row in &table.rows {
        if row.cells.len() != keys.len() {
            return Err(Error::InvalidInput(format!(
                "participant {}: {} cells for {} columns",
                row.participant_id,
                row.cells.len(),
                keys.len()
            )));
        }
        for (&(stimulus, turn), cell) in keys.iter().zip(&row.cells) {
            let response = match cell.trim() {
                "" => {
                    missing_count += 1;
                    continue;
                }
                "0" => 0,
                "1" => 1,
                "2" => 2,
                other => {
                    return Err(Error::InvalidInput(format!(
                        "participant {} {}: response {other:?} not in {{0,1,2}}",
                        row.participant_id,
                        column_name(stimulus, turn)
                    )))
                }
            };
            records.push(ResponseRecord {
                participant_id: row.participant_id.clone(),
                group: row.group,
                stimulus,
                turn,
                response,
            });
        }
    }
    Ok(LongTable { records, missing_count })
}

/// Regroups long records into a canonical wide table (participants in order
/// of first appearance).
pub fn long_to_wide(records: &[ResponseRecord]) -> WideTable {
    let columns = canonical_columns();
    let mut rows: Vec<WideRow> = Vec::new();
    for rec in records {
        let idx = match rows.iter().position(|r| r.participant_id == rec.participant_id) {
            Some(i) => i,
            None => {
                rows.push(WideRow {
                    participant_id: rec.participant_id.clone(),
                    group: rec.group,
                    cells: vec![String::new(); columns.len()],
                });
                rows.len() - 1
            }
        };
        let col = rec.stimulus.index() * 3 + usize::from(rec.turn - 1);
        rows[idx].cells[col] = rec.response.to_string();
    }
    WideTable { columns, rows }
}

#[derive(Debug, Clone, PartialEq)]
pub struct GroupStimulusStats {
    pub group: Group,
    pub stimulus: Stimulus,
    pub n: usize,
    pub mu: f64,
    /// Sample SD; absent with a single record.
    pub sigma: Option<f64>,
    pub pct_full: f64,
    pub pct_partial: f64,
    pub pct_none: f64,
}

fn responses(records: &[ResponseRecord], group: Group, stimulus: Stimulus) -> impl Iterator<Item = &ResponseRecord> {
    records
        .iter()
        .filter(move |r| r.group == group && r.stimulus == stimulus)
}

/// Trial-level mean, SD and response-type percentages; `None` for an empty cell.
pub fn descriptives(records: &[ResponseRecord], group: Group, stimulus: Stimulus) -> Option<GroupStimulusStats> {
    let values: Vec<f64> = responses(records, group, stimulus)
        .map(|r| f64::from(r.response))
        .collect();
    let n = values.len();
    let mu = mean(&values)?;
    let pct = |code: f64| 100.0 * values.iter().filter(|&&v| v == code).count() as f64 / n as f64;
    Some(GroupStimulusStats {
        group,
        stimulus,
        n,
        mu,
        sigma: sample_sd(&values),
        pct_full: pct(2.0),
        pct_partial: pct(1.0),
        pct_none: pct(0.0),
    })
}

/// Cronbach's alpha for `items` (one column per item, one entry per
/// participant). `Ok(None)` when the total score has zero variance.
pub fn cronbach_alpha(items: &[Vec<f64>]) -> Result<Option<f64>> {
    let k = items.len();
    if k < 2 {
        return Err(Error::InvalidInput("cronbach_alpha needs at least 2 items".into()));
    }
    let n = items[0].len();
    if items.iter().any(|c| c.len() != n) {
        return Err(Error::InvalidInput("cronbach_alpha: items differ in length".into()));
    }
    if n < 2 {
        return Err(Error::InvalidInput(
            "cronbach_alpha needs at least 2 participants".into(),
        ));
    }
    // Total variance is the sum of the item covariance matrix, split into
    // the diagonal (item variances) and twice the upper triangle. Written as
    // `k * off / ((k - 1) * (diag + off))`, identical items give exactly 1.
    let centred: Vec<Vec<f64>> = items
        .iter()
        .map(|c| {
            let m = mean(c).expect("n >= 2");
            c.iter().map(|v| v - m).collect()
        })
        .collect();
    let cross = |a: &[f64], b: &[f64]| -> f64 { a.iter().zip(b).map(|(x, y)| x * y).sum() };
    let diag: f64 = centred.iter().map(|c| cross(c, c)).sum();
    let mut upper = 0.0;
    for i in 0..k {
        for j in i + 1..k {
            upper += cross(&centred[i], &centred[j]);
        }
    }
    let off = 2.0 * upper;
    let total = diag + off;
    if total <= 0.0 {
        return Ok(None);
    }
    let kf = k as f64;
    Ok(Some(kf * off / ((kf - 1.0) * total)))
}

fn pooled_sd(sd_t: f64, sd_a: f64) -> Result<f64> {
    if sd_t < 0.0 || sd_a < 0.0 {
        return Err(Error::Domain("standard deviations must be non-negative".into()));
    }
    let pooled = ((sd_t * sd_t + sd_a * sd_a) / 2.0).sqrt();
    if pooled == 0.0 {
        return Err(Error::Domain("both standard deviations are zero".into()));
    }
    Ok(pooled)
}

/// `(mean_T - mean_A) / sqrt((sd_T^2 + sd_A^2) / 2)`; negative when the
/// autistic group responds more strongly.
pub fn cohens_d(mean_t: f64, sd_t: f64, mean_a: f64, sd_a: f64) -> Result<f64> {
    Ok((mean_t - mean_a) / pooled_sd(sd_t, sd_a)?)
}

/// Signal-detection sensitivity, `|mu_T - mu_A| / sqrt(0.5 (sd_T^2 + sd_A^2))`.
pub fn d_prime(mu_t: f64, sd_t: f64, mu_a: f64, sd_a: f64) -> Result<f64> {
    Ok((mu_t - mu_a).abs() / pooled_sd(sd_t, sd_a)?)
}

/// Turn-wise slope `(R3 - R1) / 2`; negative values indicate habituation.
pub fn turn_slope(r1: f64, r3: f64) -> f64 {
    (r3 - r1) / 2.0
}

/// Unit of observation for group summaries.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Granularity {
    /// Every coded trial is one observation.
    Trial,
    /// Each participant contributes the mean of their coded turns.
    Participant,
}

impl Granularity {
    pub fn as_str(self) -> &'static str {
        match self {
            Granularity::Trial => "trial",
            Granularity::Participant => "participant",
        }
    }
}

/// Observations for one group and stimulus at the requested granularity.
pub fn observations(
    records: &[ResponseRecord],
    group: Group,
    stimulus: Stimulus,
    granularity: Granularity,
) -> Vec<f64> {
    match granularity {
        Granularity::Trial => responses(records, group, stimulus)
            .map(|r| f64::from(r.response))
            .collect(),
        Granularity::Participant => {
            let mut by_participant: BTreeMap<&str, Vec<f64>> = BTreeMap::new();
            for r in responses(records, group, stimulus) {
                by_participant
                    .entry(&r.participant_id)
                    .or_default()
                    .push(f64::from(r.response));
            }
            by_participant.values().filter_map(|v| mean(v)).collect()
        }
    }
}

#[derive(Debug, Clone, Copy, PartialEq)]
pub struct GroupEffect {
    pub stimulus: Stimulus,
    pub granularity: Granularity,
    pub n_td: usize,
    pub n_asd: usize,
    pub cohens_d: Option<f64>,
    pub d_prime: Option<f64>,
}

/// Cohen's d and d' between TD and ASD for one stimulus.
pub fn group_effect(records: &[ResponseRecord], stimulus: Stimulus, granularity: Granularity) -> GroupEffect {
    let td = observations(records, Group::TD, stimulus, granularity);
    let asd = observations(records, Group::ASD, stimulus, granularity);
    let summary = |v: &[f64]| Some((mean(v)?, sample_sd(v)?));
    let (d, dp) = match (summary(&td), summary(&asd)) {
        (Some((mt, st)), Some((ma, sa))) => (cohens_d(mt, st, ma, sa).ok(), d_prime(mt, st, ma, sa).ok()),
        _ => (None, None),
    };
    GroupEffect {
        stimulus,
        granularity,
        n_td: td.len(),
        n_asd: asd.len(),
        cohens_d: d,
        d_prime: dp,
    }
}

/// Per-participant turn scores for alpha; participants missing a turn are dropped.
pub fn turn_items(records: &[ResponseRecord], group: Group, stimulus: Stimulus) -> Vec<Vec<f64>> {
    let mut by_participant: BTreeMap<&str, [Option<f64>; 3]> = BTreeMap::new();
    for r in responses(records, group, stimulus) {
        by_participant.entry(&r.participant_id).or_default()[usize::from(r.turn - 1)] = Some(f64::from(r.response));
    }
    let complete: Vec<[f64; 3]> = by_participant
        .values()
        .filter_map(|t| Some([t[0]?, t[1]?, t[2]?]))
        .collect();
    (0..3).map(|t| complete.iter().map(|row| row[t]).collect()).collect()
}

/// Mean response at `turn` for a group and stimulus.
pub fn turn_mean(records: &[ResponseRecord], group: Group, stimulus: Stimulus, turn: u8) -> Option<f64> {
    let v: Vec<f64> = responses(records, group, stimulus)
        .filter(|r| r.turn == turn)
        .map(|r| f64::from(r.response))
        .collect();
    mean(&v)
}

/// Group-level turn slope `S` from the turn-1 and turn-3 means.
pub fn group_turn_slope(records: &[ResponseRecord], group: Group, stimulus: Stimulus) -> Option<f64> {
    Some(turn_slope(
        turn_mean(records, group, stimulus, 1)?,
        turn_mean(records, group, stimulus, 3)?,
    ))
}
