use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};
use std::time::{Duration, Instant};

use rayon::prelude::*;
use serde::Serialize;
use sha2::{Digest, Sha256};

use super::config::RunConfig;
use super::svg::emit_plots;
use super::tables::{trial_table, Analysis};
use crate::coding::{read_wide_table, wide_to_long, ResponseRecord};
use crate::geometry::EyeIndexMap;
use crate::stream::{read_manifest, read_stream, Scheme, SessionManifest};
use crate::trials::{analyze_stream, TrialMetrics};
use crate::{Error, Result};

pub const RUN_MANIFEST: &str = "run_manifest.json";

/// Which part of the analysis to run.
#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum Stage {
    /// Video and coding analyses, all tables and plots.
    Full,
    /// Streams to per-trial metrics only.
    Geometry,
    /// The ordinal coding table only.
    Coding,
}

impl Stage {
    pub fn as_str(self) -> &'static str {
        match self {
            Stage::Full => "analyze",
            Stage::Geometry => "geometry",
            Stage::Coding => "coding",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Eq, Serialize)]
pub struct OutputFile {
    pub name: String,
    pub bytes: usize,
    pub sha256: String,
}

#[derive(Debug, Clone)]
pub struct RunSummary {
    pub participants: usize,
    pub trials: usize,
    pub coded_records: usize,
    pub missing_codes: usize,
    pub output_dir: PathBuf,
    pub files: Vec<OutputFile>,
    /// Non-fatal observations, e.g. skipped outputs.
    pub notices: Vec<String>,
    pub wall_time: Duration,
}

#[derive(Serialize)]
struct RunManifest<'a> {
    tool: &'static str,
    version: &'static str,
    stage: &'static str,
    config_sha256: String,
    seed: u64,
    n_perm: usize,
    participants: usize,
    trials: usize,
    coded_records: usize,
    files: &'a [OutputFile],
}

pub fn run_pipeline(config: &RunConfig) -> Result<RunSummary> {
    run_stage(config, Stage::Full)
}

pub fn run_stage(config: &RunConfig, stage: Stage) -> Result<RunSummary> {
    let started = Instant::now();
    config.check()?;
    match stage {
        Stage::Geometry if config.streams_dir.is_none() => {
            return Err(Error::Config("geometry needs streams_dir and manifests_dir".into()))
        }
        Stage::Coding if config.ordinal_table.is_none() => {
            return Err(Error::Config("coding needs ordinal_table".into()))
        }
        Stage::Full if config.streams_dir.is_none() && config.ordinal_table.is_none() => {
            return Err(Error::Config(
                "nothing to analyze: set streams_dir or ordinal_table".into(),
            ))
        }
        _ => {}
    }
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(config.worker_count())
        .build()
        .map_err(|e| Error::Internal(format!("thread pool: {e}")))?;
    let mut summary = pool.install(|| run_inner(config, stage))?;
    summary.wall_time = started.elapsed();
    Ok(summary)
}

fn run_inner(config: &RunConfig, stage: Stage) -> Result<RunSummary> {
    let mut notices = Vec::new();
    let video = match (stage, &config.streams_dir, &config.manifests_dir) {
        (Stage::Full | Stage::Geometry, Some(s), Some(m)) => Some(load_trials(config, s, m, &mut notices)?),
        _ => None,
    };
    let coding = match (stage, &config.ordinal_table) {
        (Stage::Full | Stage::Coding, Some(path)) => {
            let table = read_wide_table(path).map_err(|e| Error::Inputs(vec![(path.clone(), e.to_string())]))?;
            let long = wide_to_long(&table).map_err(|e| Error::Inputs(vec![(path.clone(), e.to_string())]))?;
            if long.missing_count > 0 {
                notices.push(format!("{} empty cells in the coding table", long.missing_count));
            }
            Some(long)
        }
        _ => None,
    };
    let (participants, trials) = match &video {
        Some((p, t)) => (*p, Some(t.as_slice())),
        None => (0, None),
    };
    let records: Option<&[ResponseRecord]> = coding.as_ref().map(|l| l.records.as_slice());

    let mut files: Vec<(String, Vec<u8>)> = Vec::new();
    let mut add = |name: &str, body: String| files.push((name.to_owned(), body.into_bytes()));
    if let Some(t) = trials {
        add("Trial_Metrics.csv", trial_table(t).to_csv()?);
    }
    if stage != Stage::Geometry {
        let a = Analysis {
            trials: if stage == Stage::Full { trials } else { None },
            records,
            n_perm: config.n_perm,
            seed: config.seed,
        };
        add("Between_Group_Tests.csv", a.between_group().to_csv()?);
        add("Within_Group_Tests.csv", a.within_group().to_csv()?);
        add("Trend_Slopes_BySubject.csv", a.slopes_by_subject().to_csv()?);
        add("Trend_Slopes_ByGroup.csv", a.slopes_by_group().to_csv()?);
        if records.is_some() {
            add("Descriptive_byStimulus.csv", a.coding_descriptives().to_csv()?);
            add("Coding_Effects.csv", a.coding_effects().to_csv()?);
            add("Reliability_Alpha.csv", a.reliability().to_csv()?);
        } else {
            notices.push("no coding table: coding descriptives, effects and reliability skipped".into());
        }
        if let Some(t) = a.trials {
            add("Correlations.csv", a.correlations().to_csv()?);
            add("Video_Descriptive.csv", a.video_descriptives().to_csv()?);
            let plots = emit_plots(t);
            if plots.is_empty() {
                notices.push("no trials: plots skipped".into());
            }
            for (name, svg) in plots {
                add(name, svg);
            }
        }
    }

    files.sort_by(|a, b| a.0.cmp(&b.0));
    let listed: Vec<OutputFile> = files
        .iter()
        .map(|(name, body)| OutputFile {
            name: name.clone(),
            bytes: body.len(),
            sha256: hex::encode(Sha256::digest(body)),
        })
        .collect();
    let manifest = RunManifest {
        tool: "orient-lab",
        version: env!("CARGO_PKG_VERSION"),
        stage: stage.as_str(),
        config_sha256: config.fingerprint(),
        seed: config.seed,
        n_perm: config.n_perm,
        participants,
        trials: trials.map_or(0, <[_]>::len),
        coded_records: records.map_or(0, <[_]>::len),
        files: &listed,
    };
    let mut manifest_json = serde_json::to_string_pretty(&manifest).map_err(|e| Error::Internal(e.to_string()))?;
    manifest_json.push('\n');
    files.push((RUN_MANIFEST.to_owned(), manifest_json.into_bytes()));
    write_atomically(&config.output_dir, &files)?;

    Ok(RunSummary {
        participants,
        trials: manifest.trials,
        coded_records: manifest.coded_records,
        missing_codes: coding.as_ref().map_or(0, |l| l.missing_count),
        output_dir: config.output_dir.clone(),
        files: listed,
        notices,
        wall_time: Duration::ZERO,
    })
}

fn list_inputs(dir: &Path) -> Result<Vec<PathBuf>> {
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    let mut out = Vec::new();
    for entry in entries {
        let path = entry.map_err(|e| Error::io(dir, e))?.path();
        let hidden = path
            .file_name()
            .and_then(|n| n.to_str())
            .is_some_and(|n| n.starts_with('.'));
        let ext = path.extension().and_then(|e| e.to_str());
        if path.is_file() && !hidden && matches!(ext, Some("jsonl" | "ndjson")) {
            out.push(path);
        }
    }
    out.sort();
    Ok(out)
}

/// Reads every stream and manifest and computes trial metrics. Any input
/// problem aborts the run with the full list of offending files.
fn load_trials(
    config: &RunConfig,
    streams_dir: &Path,
    manifests_dir: &Path,
    notices: &mut Vec<String>,
) -> Result<(usize, Vec<TrialMetrics>)> {
    let mut problems: Vec<(PathBuf, String)> = Vec::new();

    let manifest_paths = list_inputs(manifests_dir)?;
    let parsed: Vec<(PathBuf, Result<SessionManifest>)> = manifest_paths
        .par_iter()
        .map(|p| (p.clone(), read_manifest(p)))
        .collect();
    let mut manifests: BTreeMap<String, (PathBuf, SessionManifest)> = BTreeMap::new();
    for (path, m) in parsed {
        match m {
            Ok(m) => {
                if let Some((other, _)) = manifests.get(&m.participant_id) {
                    problems.push((
                        path,
                        format!("duplicate manifest for {} (also {})", m.participant_id, other.display()),
                    ));
                } else {
                    manifests.insert(m.participant_id.clone(), (path, m));
                }
            }
            Err(e) => problems.push((path, e.to_string())),
        }
    }

    let mut maps: BTreeMap<Scheme, EyeIndexMap> = BTreeMap::new();
    for scheme in [Scheme::Fan68, Scheme::Mesh468] {
        match config.eye_map(scheme) {
            Ok(m) => {
                maps.insert(scheme, m);
            }
            Err(e) => problems.push((config.eye_maps.get(&scheme).cloned().unwrap_or_default(), e.to_string())),
        }
    }

    let params = config.trial_params();
    let stream_paths = list_inputs(streams_dir)?;
    type Outcome = std::result::Result<(String, Vec<TrialMetrics>), String>;
    let outcomes: Vec<(PathBuf, Outcome)> = stream_paths
        .par_iter()
        .map(|path| {
            let outcome = (|| {
                let stream = read_stream(path).map_err(|e| e.to_string())?;
                let id = stream.header.participant_id.clone();
                let (_, manifest) = manifests
                    .get(&id)
                    .ok_or_else(|| format!("no manifest for participant {id}"))?;
                let map = maps
                    .get(&stream.header.scheme)
                    .ok_or_else(|| format!("no usable eye map for {}", stream.header.scheme))?;
                let profile = config.profiles.get(stream.header.group);
                let trials = analyze_stream(&stream, manifest, profile, map, &params).map_err(|e| e.to_string())?;
                Ok((id, trials))
            })();
            (path.clone(), outcome)
        })
        .collect();

    let mut seen: BTreeMap<String, PathBuf> = BTreeMap::new();
    let mut per_participant: Vec<(String, Vec<TrialMetrics>)> = Vec::new();
    for (path, outcome) in outcomes {
        match outcome {
            Ok((id, trials)) => {
                if let Some(first) = seen.get(&id) {
                    problems.push((path, format!("duplicate stream for {id} (also {})", first.display())));
                } else {
                    seen.insert(id.clone(), path);
                    per_participant.push((id, trials));
                }
            }
            Err(msg) => problems.push((path, msg)),
        }
    }
    if !problems.is_empty() {
        problems.sort();
        return Err(Error::Inputs(problems));
    }
    let unused: Vec<&str> = manifests
        .keys()
        .filter(|id| !seen.contains_key(*id))
        .map(String::as_str)
        .collect();
    if !unused.is_empty() {
        notices.push(format!("manifests without a stream: {}", unused.join(", ")));
    }
    per_participant.sort_by(|a, b| a.0.cmp(&b.0));
    let participants = per_participant.len();
    Ok((participants, per_participant.into_iter().flat_map(|(_, t)| t).collect()))
}

fn is_previous_output(dir: &Path) -> Result<bool> {
    let mut entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    Ok(entries.next().is_none() || dir.join(RUN_MANIFEST).is_file())
}

/// Writes all files into a fresh sibling directory and renames it into
/// place, so readers see either the previous outputs or the complete new set.
/// An existing output directory is replaced only if it is empty or holds a
/// previous run.
fn write_atomically(dir: &Path, files: &[(String, Vec<u8>)]) -> Result<()> {
    let parent = match dir.parent() {
        Some(p) if !p.as_os_str().is_empty() => p.to_path_buf(),
        _ => PathBuf::from("."),
    };
    fs::create_dir_all(&parent).map_err(|e| Error::io(&parent, e))?;
    if dir.exists() && !(dir.is_dir() && is_previous_output(dir)?) {
        return Err(Error::Inputs(vec![(
            dir.to_path_buf(),
            "output path exists and is not a previous run directory".into(),
        )]));
    }
    let staging = tempfile::Builder::new()
        .prefix(".orient-lab-")
        .tempdir_in(&parent)
        .map_err(|e| Error::io(&parent, e))?;
    for (name, body) in files {
        let p = staging.path().join(name);
        fs::write(&p, body).map_err(|e| Error::io(&p, e))?;
    }
    if dir.exists() {
        let retired = tempfile::Builder::new()
            .prefix(".orient-lab-old-")
            .tempdir_in(&parent)
            .map_err(|e| Error::io(&parent, e))?;
        let old = retired.path().join("previous");
        fs::rename(dir, &old).map_err(|e| Error::io(dir, e))?;
        if let Err(e) = fs::rename(staging.path(), dir) {
            // Put the previous outputs back before reporting.
            let _ = fs::rename(&old, dir);
            return Err(Error::io(dir, e));
        }
        let _ = staging.keep();
        drop(retired);
    } else {
        fs::rename(staging.path(), dir).map_err(|e| Error::io(dir, e))?;
        let _ = staging.keep();
    }
    Ok(())
}
