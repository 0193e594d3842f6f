use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use sha2::{Digest, Sha256};

use crate::geometry::{EyeIndexMap, GateProfile};
use crate::stream::Scheme;
use crate::trials::TrialParams;
use crate::{Error, Group, Result};

pub const DEFAULT_N_PERM: usize = 10_000;
pub const MIN_N_PERM: usize = 100;
/// Environment variable capping the worker count.
pub const THREADS_ENV: &str = "ORIENT_LAB_THREADS";

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
#[serde(default)]
pub struct Profiles {
    pub td: GateProfile,
    pub asd: GateProfile,
}

impl Default for Profiles {
    fn default() -> Self {
        Profiles {
            td: GateProfile::td_default(),
            asd: GateProfile::asd_default(),
        }
    }
}

impl Profiles {
    pub fn get(&self, group: Group) -> &GateProfile {
        match group {
            Group::TD => &self.td,
            Group::ASD => &self.asd,
        }
    }

    fn get_mut(&mut self, group: Group) -> &mut GateProfile {
        match group {
            Group::TD => &mut self.td,
            Group::ASD => &mut self.asd,
        }
    }
}

/// Everything a run depends on. Relative paths are resolved against the
/// directory of the config file.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
#[serde(default, deny_unknown_fields)]
pub struct RunConfig {
    pub streams_dir: Option<PathBuf>,
    pub manifests_dir: Option<PathBuf>,
    pub ordinal_table: Option<PathBuf>,
    pub output_dir: PathBuf,
    pub window_len_s: f64,
    pub k_frames: usize,
    pub gap_tolerance_frames: usize,
    pub n_perm: usize,
    pub seed: u64,
    /// Worker threads; 0 uses every available core.
    pub threads: usize,
    pub profiles: Profiles,
    /// Optional eye index maps keyed by scheme name.
    pub eye_maps: BTreeMap<Scheme, PathBuf>,
}

impl Default for RunConfig {
    fn default() -> Self {
        let t = TrialParams::default();
        RunConfig {
            streams_dir: None,
            manifests_dir: None,
            ordinal_table: None,
            output_dir: PathBuf::from("out"),
            window_len_s: t.window_len_s,
            k_frames: t.k_frames,
            gap_tolerance_frames: t.gap_tolerance_frames,
            n_perm: DEFAULT_N_PERM,
            seed: 0,
            threads: 0,
            profiles: Profiles::default(),
            eye_maps: BTreeMap::new(),
        }
    }
}

/// The part of the config that determines the output bytes.
#[derive(Serialize)]
struct Fingerprint<'a> {
    streams_dir: &'a Option<PathBuf>,
    manifests_dir: &'a Option<PathBuf>,
    ordinal_table: &'a Option<PathBuf>,
    window_len_s: f64,
    k_frames: usize,
    gap_tolerance_frames: usize,
    n_perm: usize,
    seed: u64,
    profiles: &'a Profiles,
    eye_maps: &'a BTreeMap<Scheme, PathBuf>,
}

impl RunConfig {
    pub fn parse(text: &str, base: &Path) -> Result<Self> {
        let mut cfg: RunConfig = toml::from_str(text).map_err(|e| Error::Config(e.to_string()))?;
        cfg.resolve(base);
        Ok(cfg)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        let base = path.parent().unwrap_or(Path::new("."));
        Self::parse(&text, base)
    }

    pub fn to_toml(&self) -> String {
        toml::to_string(self).expect("config serializes")
    }

    fn resolve(&mut self, base: &Path) {
        let fix = |p: &mut PathBuf| {
            if p.is_relative() {
                *p = base.join(&*p);
            }
        };
        for p in [&mut self.streams_dir, &mut self.manifests_dir, &mut self.ordinal_table]
            .into_iter()
            .flatten()
        {
            fix(p);
        }
        fix(&mut self.output_dir);
        for p in self.eye_maps.values_mut() {
            fix(p);
        }
    }

    pub fn trial_params(&self) -> TrialParams {
        TrialParams {
            window_len_s: self.window_len_s,
            k_frames: self.k_frames,
            gap_tolerance_frames: self.gap_tolerance_frames,
        }
    }

    /// Applies `GROUP.FIELD=VALUE` or `GROUP=td-default|asd-default`.
    pub fn apply_profile_override(&mut self, spec: &str) -> Result<()> {
        let bad = || {
            Error::Config(format!(
                "profile override {spec:?}: expected GROUP.FIELD=VALUE or GROUP=td-default|asd-default"
            ))
        };
        let (key, value) = spec.split_once('=').ok_or_else(bad)?;
        let (group, field) = match key.split_once('.') {
            Some((g, f)) => (g, Some(f)),
            None => (key, None),
        };
        let group: Group = group.trim().to_ascii_uppercase().parse().map_err(|_| bad())?;
        let value = value.trim();
        let profile = self.profiles.get_mut(group);
        match field.map(str::trim) {
            None => {
                *profile = match value {
                    "td-default" => GateProfile::td_default(),
                    "asd-default" => GateProfile::asd_default(),
                    _ => return Err(bad()),
                }
            }
            Some("tau_c") => profile.tau_c = value.parse().map_err(|_| bad())?,
            Some("smooth_window") => profile.smooth_window = value.parse().map_err(|_| bad())?,
            Some("eop_floor") => profile.eop_floor = value.parse().map_err(|_| bad())?,
            Some("eop_range") => profile.eop_range = value.parse().map_err(|_| bad())?,
            Some(_) => return Err(bad()),
        }
        profile.check()
    }

    /// Validates values and that every referenced input exists.
    pub fn check(&self) -> Result<()> {
        if self.n_perm < MIN_N_PERM {
            return Err(Error::Config(format!("n_perm must be at least {MIN_N_PERM}")));
        }
        self.trial_params().check()?;
        self.profiles.td.check()?;
        self.profiles.asd.check()?;
        let mut missing = Vec::new();
        let inputs = [&self.streams_dir, &self.manifests_dir, &self.ordinal_table];
        for p in inputs.into_iter().flatten().chain(self.eye_maps.values()) {
            if !p.exists() {
                missing.push((p.clone(), "does not exist".to_owned()));
            }
        }
        if !missing.is_empty() {
            return Err(Error::Inputs(missing));
        }
        if self.streams_dir.is_some() != self.manifests_dir.is_some() {
            return Err(Error::Config("streams_dir and manifests_dir go together".into()));
        }
        Ok(())
    }

    pub fn eye_map(&self, scheme: Scheme) -> Result<EyeIndexMap> {
        let map = match self.eye_maps.get(&scheme) {
            Some(p) => EyeIndexMap::read(p)?,
            None => EyeIndexMap::for_scheme(scheme),
        };
        map.check_scheme(scheme)?;
        Ok(map)
    }

    /// Hex SHA-256 of the settings that affect output bytes. The output
    /// location and the worker count are left out.
    pub fn fingerprint(&self) -> String {
        let f = Fingerprint {
            streams_dir: &self.streams_dir,
            manifests_dir: &self.manifests_dir,
            ordinal_table: &self.ordinal_table,
            window_len_s: self.window_len_s,
            k_frames: self.k_frames,
            gap_tolerance_frames: self.gap_tolerance_frames,
            n_perm: self.n_perm,
            seed: self.seed,
            profiles: &self.profiles,
            eye_maps: &self.eye_maps,
        };
        let json = serde_json::to_string(&f).expect("fingerprint serializes");
        hex::encode(Sha256::digest(json.as_bytes()))
    }

    /// Worker count after applying the environment cap.
    pub fn worker_count(&self) -> usize {
        let available = std::thread::available_parallelism().map_or(1, |n| n.get());
        let wanted = if self.threads == 0 { available } else { self.threads };
        let cap = std::env::var(THREADS_ENV)
            .ok()
            .and_then(|v| v.trim().parse::<usize>().ok())
            .filter(|&n| n > 0);
        cap.map_or(wanted, |c| wanted.min(c)).max(1)
    }
}

#[cfg(test)]
mod tests {
    use super::*;

    #[test]
    fn parses_and_resolves() {
        let text = r#"
streams_dir = "streams"
manifests_dir = "/abs/manifests"
output_dir = "out"
n_perm = 500
seed = 7

[profiles.asd]
tau_c = 0.75
smooth_window = 9
"#;
        let cfg = RunConfig::parse(text, Path::new("/data")).unwrap();
        assert_eq!(cfg.streams_dir.as_deref(), Some(Path::new("/data/streams")));
        assert_eq!(cfg.manifests_dir.as_deref(), Some(Path::new("/abs/manifests")));
        assert_eq!(cfg.profiles.asd.tau_c, 0.75);
        assert_eq!(cfg.profiles.asd.eop_floor, 0.18);
        assert_eq!(cfg.profiles.td, GateProfile::td_default());
        assert_eq!(cfg.k_frames, 3);
        assert!(RunConfig::parse("bogus = 1", Path::new(".")).is_err());
    }

    #[test]
    fn toml_round_trip() {
        let mut cfg = RunConfig {
            streams_dir: Some("/s".into()),
            manifests_dir: Some("/m".into()),
            output_dir: "/o".into(),
            ..RunConfig::default()
        };
        cfg.eye_maps.insert(Scheme::Fan68, "/maps/fan.json".into());
        assert_eq!(RunConfig::parse(&cfg.to_toml(), Path::new("/")).unwrap(), cfg);
    }

    #[test]
    fn profile_overrides() {
        let mut cfg = RunConfig::default();
        cfg.apply_profile_override("asd.tau_c=0.75").unwrap();
        assert_eq!(cfg.profiles.asd.tau_c, 0.75);
        cfg.apply_profile_override("td=asd-default").unwrap();
        assert_eq!(cfg.profiles.td, GateProfile::asd_default());
        assert!(cfg.apply_profile_override("td.smooth_window=4").is_err());
        assert!(cfg.apply_profile_override("xx.tau_c=0.5").is_err());
        assert!(cfg.apply_profile_override("td.bogus=1").is_err());
        assert!(cfg.apply_profile_override("td").is_err());
    }

    #[test]
    fn fingerprint_ignores_output_and_threads() {
        let a = RunConfig::default();
        let b = RunConfig {
            output_dir: "elsewhere".into(),
            threads: 8,
            ..a.clone()
        };
        assert_eq!(a.fingerprint(), b.fingerprint());
        let c = RunConfig { seed: 1, ..a.clone() };
        assert_ne!(a.fingerprint(), c.fingerprint());
    }

    #[test]
    fn check_reports_missing_inputs() {
        let cfg = RunConfig {
            streams_dir: Some("/definitely/not/here".into()),
            manifests_dir: Some("/nor/here".into()),
            ..RunConfig::default()
        };
        match cfg.check() {
            Err(Error::Inputs(list)) => assert_eq!(list.len(), 2),
            other => panic!("{other:?}"),
        }
        let cfg = RunConfig {
            n_perm: 10,
            ..RunConfig::default()
        };
        assert!(cfg.check().is_err());
    }
}
