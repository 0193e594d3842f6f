use std::fs;
use std::path::{Path, PathBuf};
use std::process::ExitCode;

use clap::{Args, Parser, Subcommand};
use orient_lab::coding::write_wide_table;
use orient_lab::report::tables::trial_table;
use orient_lab::report::{run_stage, RunConfig, RunSummary, Stage};
use orient_lab::stream::{read_manifest, read_stream, serialize_manifest, serialize_stream, validate_stream_with};
use orient_lab::synth::{
    gen_landmark_stream, gen_ordinal_cohort, random_script, write_dataset, CohortProfile, DatasetSpec, StreamScript,
};
use orient_lab::{Error, Result};

#[derive(Parser)]
#[command(
    name = "orient-lab",
    version,
    about = "Engagement metrics and statistics for response-to-name sessions"
)]
struct Cli {
    #[command(subcommand)]
    command: Command,
}

#[derive(Subcommand)]
enum Command {
    /// Run the full pipeline: trial metrics, coding analyses, tests and plots.
    Analyze(RunArgs),
    /// Streams and manifests to Trial_Metrics.csv only.
    Geometry(RunArgs),
    /// Ordinal coding table analyses only.
    Coding(RunArgs),
    /// Generate synthetic inputs with known ground truth.
    #[command(subcommand)]
    Simulate(Simulate),
    /// Check landmark streams (or manifests) for format errors and timestamp drift.
    Validate(ValidateArgs),
}

#[derive(Args)]
struct RunArgs {
    /// TOML run configuration.
    #[arg(long)]
    config: Option<PathBuf>,
    #[arg(long)]
    streams: Option<PathBuf>,
    #[arg(long)]
    manifests: Option<PathBuf>,
    /// Wide ordinal coding table (CSV).
    #[arg(long)]
    table: Option<PathBuf>,
    #[arg(long)]
    out: Option<PathBuf>,
    #[arg(long)]
    seed: Option<u64>,
    #[arg(long)]
    n_perm: Option<usize>,
    /// Worker threads (0 = all cores).
    #[arg(long)]
    threads: Option<usize>,
    /// Gate profile override, e.g. `asd.tau_c=0.75` or `td=asd-default`. Repeatable.
    #[arg(long = "profile", value_name = "OVERRIDE")]
    profiles: Vec<String>,
}

#[derive(Subcommand)]
enum Simulate {
    /// Wide ordinal coding table drawn from a cohort profile.
    Cohort {
        /// Cohort profile (JSONL); defaults to the reference response distributions.
        #[arg(long)]
        cohort: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n_td: Option<usize>,
        #[arg(long)]
        n_asd: Option<usize>,
        /// Output CSV path.
        #[arg(long)]
        out: PathBuf,
    },
    /// One scripted landmark stream, its manifest and ground-truth trial metrics.
    Stream {
        /// Stream script (JSONL); a random script is drawn from --seed otherwise.
        #[arg(long)]
        script: Option<PathBuf>,
        #[arg(long, default_value_t = 0)]
        seed: u64,
        /// Output directory.
        #[arg(long)]
        out: PathBuf,
    },
    /// A full synthetic study: streams, manifests, coding table and config.toml.
    Dataset {
        #[arg(long, default_value_t = 0)]
        seed: u64,
        #[arg(long)]
        n_td: Option<usize>,
        #[arg(long)]
        n_asd: Option<usize>,
        #[arg(long)]
        frames: Option<u64>,
        #[arg(long)]
        out: PathBuf,
    },
}

#[derive(Args)]
struct ValidateArgs {
    #[arg(required = true)]
    files: Vec<PathBuf>,
    /// Treat the files as session manifests.
    #[arg(long)]
    manifest: bool,
    /// Confidence gate used for the below-gate count.
    #[arg(long, default_value_t = 0.6)]
    tau_c: f64,
}

fn build_config(args: &RunArgs) -> Result<RunConfig> {
    let mut cfg = match &args.config {
        Some(p) => RunConfig::load(p)?,
        None => RunConfig::default(),
    };
    if let Some(p) = &args.streams {
        cfg.streams_dir = Some(p.clone());
    }
    if let Some(p) = &args.manifests {
        cfg.manifests_dir = Some(p.clone());
    }
    if let Some(p) = &args.table {
        cfg.ordinal_table = Some(p.clone());
    }
    if let Some(p) = &args.out {
        cfg.output_dir = p.clone();
    }
    if let Some(s) = args.seed {
        cfg.seed = s;
    }
    if let Some(n) = args.n_perm {
        cfg.n_perm = n;
    }
    if let Some(t) = args.threads {
        cfg.threads = t;
    }
    for o in &args.profiles {
        cfg.apply_profile_override(o)?;
    }
    Ok(cfg)
}

fn report(summary: &RunSummary) {
    for n in &summary.notices {
        eprintln!("notice: {n}");
    }
    println!(
        "{} participants, {} trials, {} coded responses ({} missing) -> {}",
        summary.participants,
        summary.trials,
        summary.coded_records,
        summary.missing_codes,
        summary.output_dir.display()
    );
    for f in &summary.files {
        println!("  {} {} bytes sha256:{}", f.name, f.bytes, f.sha256);
    }
    eprintln!("finished in {:.2} s", summary.wall_time.as_secs_f64());
}

fn write(path: &Path, body: &str) -> Result<()> {
    if let Some(parent) = path.parent().filter(|p| !p.as_os_str().is_empty()) {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    fs::write(path, body).map_err(|e| Error::io(path, e))
}

fn simulate(cmd: Simulate) -> Result<()> {
    match cmd {
        Simulate::Cohort {
            cohort,
            seed,
            n_td,
            n_asd,
            out,
        } => {
            let mut profile = match cohort {
                Some(p) => CohortProfile::read(&p)?,
                None => CohortProfile::reference(seed),
            };
            profile.n_td = n_td.unwrap_or(profile.n_td);
            profile.n_asd = n_asd.unwrap_or(profile.n_asd);
            write(&out, &write_wide_table(&gen_ordinal_cohort(&profile)?)?)?;
            println!("wrote {}", out.display());
        }
        Simulate::Stream { script, seed, out } => {
            let script = match script {
                Some(p) => StreamScript::read(&p)?,
                None => random_script(seed),
            };
            let (stream, manifest, truth) = gen_landmark_stream(&script)?;
            let id = &script.participant_id;
            write(&out.join(format!("{id}.script.jsonl")), &script.to_jsonl())?;
            write(
                &out.join("streams").join(format!("{id}.jsonl")),
                &serialize_stream(&stream),
            )?;
            write(
                &out.join("manifests").join(format!("{id}.jsonl")),
                &serialize_manifest(&manifest),
            )?;
            write(&out.join(format!("{id}.truth.csv")), &trial_table(&truth).to_csv()?)?;
            println!(
                "wrote {} frames and {} trials under {}",
                stream.frames.len(),
                truth.len(),
                out.display()
            );
        }
        Simulate::Dataset {
            seed,
            n_td,
            n_asd,
            frames,
            out,
        } => {
            let d = DatasetSpec::default();
            let spec = DatasetSpec {
                seed,
                n_td: n_td.unwrap_or(d.n_td),
                n_asd: n_asd.unwrap_or(d.n_asd),
                frames_per_stream: frames.unwrap_or(d.frames_per_stream),
                ..d
            };
            let files = write_dataset(&spec, &out)?;
            let cfg = RunConfig {
                streams_dir: Some("streams".into()),
                manifests_dir: Some("manifests".into()),
                ordinal_table: Some("coding.csv".into()),
                output_dir: "results".into(),
                seed,
                ..RunConfig::default()
            };
            write(&out.join("config.toml"), &cfg.to_toml())?;
            println!(
                "wrote {} participants to {} (config.toml, {}, {})",
                spec.n_td + spec.n_asd,
                out.display(),
                files.streams_dir.display(),
                files.coding_table.display()
            );
        }
    }
    Ok(())
}

/// Returns the number of files that failed.
fn validate(args: &ValidateArgs) -> usize {
    let mut failed = 0;
    for path in &args.files {
        if args.manifest {
            match read_manifest(path) {
                Ok(m) => println!(
                    "{}: ok, {} events for {}",
                    path.display(),
                    m.events.len(),
                    m.participant_id
                ),
                Err(e) => {
                    failed += 1;
                    println!("{}: error: {e}", path.display());
                }
            }
            continue;
        }
        match read_stream(path) {
            Ok(stream) => {
                let r = validate_stream_with(&stream, args.tau_c);
                let status = if r.is_clean() { "ok" } else { "drift" };
                println!(
                    "{}: {status}, {} frames, {} faceless, {} below gate, max drift {:.3} ms",
                    path.display(),
                    r.frame_count,
                    r.faceless_count,
                    r.below_gate_count,
                    r.max_drift_ms
                );
                if !r.is_clean() {
                    failed += 1;
                    let shown: Vec<String> = r.drift_frames.iter().take(10).map(u64::to_string).collect();
                    println!(
                        "  drifting frames: {}{}",
                        shown.join(", "),
                        if r.drift_frames.len() > 10 { ", ..." } else { "" }
                    );
                }
            }
            Err(e) => {
                failed += 1;
                println!("{}: error: {e}", path.display());
            }
        }
    }
    failed
}

fn run(cli: Cli) -> Result<ExitCode> {
    let stage = match &cli.command {
        Command::Analyze(_) => Some(Stage::Full),
        Command::Geometry(_) => Some(Stage::Geometry),
        Command::Coding(_) => Some(Stage::Coding),
        _ => None,
    };
    match cli.command {
        Command::Analyze(a) | Command::Geometry(a) | Command::Coding(a) => {
            let cfg = build_config(&a)?;
            report(&run_stage(&cfg, stage.expect("run command"))?);
        }
        Command::Simulate(s) => simulate(s)?,
        Command::Validate(v) => {
            if !(0.0..=1.0).contains(&v.tau_c) {
                return Err(Error::Config("--tau-c must lie in [0, 1]".into()));
            }
            if validate(&v) > 0 {
                return Ok(ExitCode::from(1));
            }
        }
    }
    Ok(ExitCode::SUCCESS)
}

fn main() -> ExitCode {
    let cli = match Cli::try_parse() {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() {
                ExitCode::from(1)
            } else {
                ExitCode::SUCCESS
            };
        }
    };
    match std::panic::catch_unwind(|| run(cli)) {
        Ok(Ok(code)) => code,
        Ok(Err(e)) => {
            eprintln!("error: {e}");
            ExitCode::from(if e.is_input_error() { 1 } else { 2 })
        }
        Err(_) => ExitCode::from(2),
    }
}
