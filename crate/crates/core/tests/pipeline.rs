use std::collections::BTreeMap;
use std::fs;
use std::path::{Path, PathBuf};

use sha2::{Digest, Sha256};

use orient_lab::report::{run_pipeline, run_stage, RunConfig, Stage, RUN_MANIFEST};
use orient_lab::synth::{write_dataset, DatasetFiles, DatasetSpec};
use orient_lab::Error;

fn small_dataset(dir: &Path) -> DatasetFiles {
    let spec = DatasetSpec {
        seed: 4,
        n_td: 2,
        n_asd: 2,
        frames_per_stream: 3000,
        ..DatasetSpec::default()
    };
    write_dataset(&spec, dir).unwrap()
}

fn config(data: &DatasetFiles, out: PathBuf) -> RunConfig {
    RunConfig {
        streams_dir: Some(data.streams_dir.clone()),
        manifests_dir: Some(data.manifests_dir.clone()),
        ordinal_table: Some(data.coding_table.clone()),
        output_dir: out,
        n_perm: 500,
        seed: 17,
        ..RunConfig::default()
    }
}

fn files(dir: &Path) -> BTreeMap<String, Vec<u8>> {
    fs::read_dir(dir)
        .unwrap()
        .map(|e| {
            let p = e.unwrap().path();
            (
                p.file_name().unwrap().to_string_lossy().into_owned(),
                fs::read(&p).unwrap(),
            )
        })
        .collect()
}

#[test]
fn small_run_writes_tables_and_a_matching_manifest() {
    let root = tempfile::tempdir().unwrap();
    let data = small_dataset(&root.path().join("data"));
    let cfg = config(&data, root.path().join("out"));
    let summary = run_pipeline(&cfg).unwrap();
    assert_eq!(summary.participants, 4);
    let out = files(&cfg.output_dir);
    let csvs = out.keys().filter(|k| k.ends_with(".csv")).count();
    assert!(csvs >= 5, "{:?}", out.keys());
    assert!(out.contains_key("Trial_Metrics.csv"));

    let manifest: serde_json::Value = serde_json::from_slice(&out[RUN_MANIFEST]).unwrap();
    assert_eq!(manifest["seed"], 17);
    assert_eq!(manifest["config_sha256"], cfg.fingerprint());
    let listed = manifest["files"].as_array().unwrap();
    assert_eq!(listed.len(), out.len() - 1);
    for f in listed {
        let body = &out[f["name"].as_str().unwrap()];
        assert_eq!(f["sha256"].as_str().unwrap(), hex::encode(Sha256::digest(body)));
        assert_eq!(f["bytes"].as_u64().unwrap() as usize, body.len());
    }
}

#[test]
fn reruns_are_byte_identical() {
    let root = tempfile::tempdir().unwrap();
    let data = small_dataset(&root.path().join("data"));
    let a = config(&data, root.path().join("a"));
    let b = RunConfig {
        threads: 3,
        ..config(&data, root.path().join("b"))
    };
    run_pipeline(&a).unwrap();
    run_pipeline(&b).unwrap();
    assert_eq!(files(&a.output_dir), files(&b.output_dir));
    // Re-running into an existing output directory replaces it.
    run_pipeline(&a).unwrap();
    assert_eq!(files(&a.output_dir), files(&b.output_dir));
}

#[test]
fn dropping_a_participant_only_touches_their_rows() {
    let root = tempfile::tempdir().unwrap();
    let data = small_dataset(&root.path().join("data"));
    let full = config(&data, root.path().join("full"));
    run_pipeline(&full).unwrap();

    let fewer = root.path().join("fewer");
    fs::create_dir_all(&fewer).unwrap();
    for e in fs::read_dir(&data.streams_dir).unwrap() {
        let p = e.unwrap().path();
        if !p.ends_with("ASD001.jsonl") {
            fs::copy(&p, fewer.join(p.file_name().unwrap())).unwrap();
        }
    }
    let partial = RunConfig {
        streams_dir: Some(fewer),
        ..config(&data, root.path().join("partial"))
    };
    let summary = run_pipeline(&partial).unwrap();
    assert!(summary.notices.iter().any(|n| n.contains("ASD001")));

    let a = files(&full.output_dir);
    let b = files(&partial.output_dir);
    for name in ["Trial_Metrics.csv", "Trend_Slopes_BySubject.csv"] {
        let lines = |m: &BTreeMap<String, Vec<u8>>| -> Vec<String> {
            String::from_utf8(m[name].clone())
                .unwrap()
                .lines()
                .filter(|l| !l.contains("ASD001"))
                .map(str::to_owned)
                .collect()
        };
        assert!(a.contains_key(name) && b.contains_key(name), "{name}");
        assert_eq!(lines(&a), lines(&b), "{name}");
    }
}

#[test]
fn bad_inputs_are_listed_and_leave_no_output() {
    let root = tempfile::tempdir().unwrap();
    let data = small_dataset(&root.path().join("data"));
    fs::write(data.streams_dir.join("broken.jsonl"), "{not json}\n").unwrap();
    fs::write(data.streams_dir.join("also_broken.jsonl"), "").unwrap();
    let cfg = config(&data, root.path().join("out"));
    match run_pipeline(&cfg) {
        Err(Error::Inputs(list)) => {
            let names: Vec<String> = list
                .iter()
                .map(|(p, _)| p.file_name().unwrap().to_string_lossy().into_owned())
                .collect();
            assert_eq!(names, ["also_broken.jsonl", "broken.jsonl"]);
        }
        other => panic!("{other:?}"),
    }
    assert!(!cfg.output_dir.exists());
    // nothing staged is left next to the output either
    let leftovers: Vec<_> = fs::read_dir(root.path())
        .unwrap()
        .map(|e| e.unwrap().file_name().to_string_lossy().into_owned())
        .filter(|n| n.starts_with('.'))
        .collect();
    assert!(leftovers.is_empty(), "{leftovers:?}");
}

#[test]
fn stages_write_their_own_subsets() {
    let root = tempfile::tempdir().unwrap();
    let data = small_dataset(&root.path().join("data"));
    let geo = config(&data, root.path().join("geo"));
    run_stage(&geo, Stage::Geometry).unwrap();
    let names: Vec<String> = files(&geo.output_dir).into_keys().collect();
    assert_eq!(names, ["Trial_Metrics.csv", RUN_MANIFEST]);

    let coding = RunConfig {
        streams_dir: None,
        manifests_dir: None,
        ..config(&data, root.path().join("coding"))
    };
    run_stage(&coding, Stage::Coding).unwrap();
    let out = files(&coding.output_dir);
    assert!(out.contains_key("Reliability_Alpha.csv"));
    assert!(!out.contains_key("Trial_Metrics.csv"));
    assert!(!out.keys().any(|k| k.ends_with(".svg")));
}

#[test]
fn refuses_to_replace_a_foreign_directory() {
    let root = tempfile::tempdir().unwrap();
    let data = small_dataset(&root.path().join("data"));
    let out = root.path().join("mine");
    fs::create_dir(&out).unwrap();
    fs::write(out.join("notes.txt"), "keep").unwrap();
    assert!(run_pipeline(&config(&data, out.clone())).is_err());
    assert_eq!(fs::read_to_string(out.join("notes.txt")).unwrap(), "keep");
}
