//! Command-line front end: corpus synthesis, description round trips,
//! metrics, statistics and validation.
//!
//! Exit codes: 0 success, 1 error, 2 partial quota or flagged records.

use std::collections::BTreeMap;
use std::ffi::OsString;
use std::path::{Path, PathBuf};

use anyhow::{bail, Context};
use clap::{Args, Parser, Subcommand};
use serde::Serialize;

use hsi_forge_core::alignment::SceneContext;
use hsi_forge_core::io::{list_files, load_motion, load_scene_auto, save_motion, save_scene_ply, PlyEncoding};
use hsi_forge_core::language::{generate_description, resolve_description};
use hsi_forge_core::manifest::{self, load_records, write_corpus, Manifest, MANIFEST_FILE};
use hsi_forge_core::metrics::evaluate_corpus;
use hsi_forge_core::seed::{derive_stream, rng_from_seed};
use hsi_forge_core::{fixtures, Action, ForgeConfig, MotionClip};

pub const EXIT_OK: i32 = 0;
pub const EXIT_ERROR: i32 = 1;
pub const EXIT_PARTIAL: i32 = 2;

/// Environment variable holding an `env_logger` filter, e.g. `debug`.
pub const LOG_ENV: &str = "HSI_FORGE_LOG";

#[derive(Debug, Parser)]
#[command(name = "hsi-forge", version, about = "Synthesize language-annotated human-scene interaction corpora")]
pub struct Cli {
    /// Raise log verbosity (-v info, -vv debug); `HSI_FORGE_LOG` overrides.
    #[arg(short, long, action = clap::ArgAction::Count, global = true)]
    pub verbose: u8,
    #[command(subcommand)]
    pub command: Command,
}

#[derive(Debug, Subcommand)]
pub enum Command {
    /// Align clips into scenes until the per-action quotas are met.
    Synth(SynthArgs),
    /// Regenerate and resolve every record's description.
    Describe(CorpusArgs),
    /// Goal distance, collision distance and APD over a corpus.
    Metrics(CorpusArgs),
    /// Corpus statistics (JSON plus a TSV of the histograms).
    Stats(CorpusArgs),
    /// Re-verify every record with the brute-force checker.
    Validate(CorpusArgs),
    /// Write the synthetic demo rooms and clips.
    Fixtures(FixturesArgs),
}

#[derive(Debug, Args)]
pub struct SynthArgs {
    /// Directory of scene files (.ply with labels, or .json).
    #[arg(long)]
    pub scenes: PathBuf,
    /// Directory of motion clip headers (.json with a sibling .bin).
    #[arg(long)]
    pub clips: PathBuf,
    /// Output corpus directory.
    #[arg(long)]
    pub out: PathBuf,
    /// JSON configuration; every field is optional.
    #[arg(long)]
    pub config: Option<PathBuf>,
    /// Master seed; every random choice derives from it.
    #[arg(long, default_value_t = 0)]
    pub seed: u64,
    /// Worker threads. Output bytes do not depend on it.
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
    /// Per-action quotas, e.g. `sit=50,walk=20`.
    #[arg(long)]
    pub quota: String,
}

#[derive(Debug, Args)]
pub struct CorpusArgs {
    /// Corpus directory holding manifest.json.
    #[arg(long)]
    pub corpus: PathBuf,
    /// Report directory; defaults to `<corpus>/reports`.
    #[arg(long)]
    pub out: Option<PathBuf>,
    /// Scene directory, when the manifest's recorded sources moved.
    #[arg(long)]
    pub scenes: Option<PathBuf>,
    /// Clip directory, when the manifest's recorded sources moved.
    #[arg(long)]
    pub clips: Option<PathBuf>,
    #[arg(long, default_value_t = 1)]
    pub jobs: usize,
}

#[derive(Debug, Args)]
pub struct FixturesArgs {
    /// Output directory; receives `scenes/` and `clips/`.
    #[arg(long)]
    pub out: PathBuf,
    #[arg(long, default_value_t = 5)]
    pub rooms: usize,
}

/// Parses `action=count[,action=count…]`.
pub fn parse_quota(spec: &str) -> anyhow::Result<BTreeMap<String, usize>> {
    let mut out = BTreeMap::new();
    for part in spec.split(',').map(str::trim).filter(|p| !p.is_empty()) {
        let (name, count) = part
            .split_once('=')
            .with_context(|| format!("quota entry `{part}` is not action=count"))?;
        let count: usize = count.trim().parse().with_context(|| format!("quota count in `{part}`"))?;
        let action = Action::parse(name).to_string();
        if out.insert(action.clone(), count).is_some() {
            bail!("action `{action}` appears twice in the quota");
        }
    }
    if out.is_empty() {
        bail!("empty quota");
    }
    Ok(out)
}

fn init_logging(verbose: u8) {
    let default = match verbose {
        0 => "warn",
        1 => "info",
        _ => "debug",
    };
    let env = env_logger::Env::new().filter_or(LOG_ENV, default);
    let _ = env_logger::Builder::from_env(env).format_timestamp(None).try_init();
}

/// Runs the CLI on `args` (including the program name) and returns the exit code.
pub fn run<I, T>(args: I) -> i32
where
    I: IntoIterator<Item = T>,
    T: Into<OsString> + Clone,
{
    let cli = match Cli::try_parse_from(args) {
        Ok(c) => c,
        Err(e) => {
            let _ = e.print();
            return if e.use_stderr() { EXIT_ERROR } else { EXIT_OK };
        }
    };
    init_logging(cli.verbose);
    let result = match &cli.command {
        Command::Synth(a) => cmd_synth(a),
        Command::Describe(a) => cmd_describe(a),
        Command::Metrics(a) => cmd_metrics(a),
        Command::Stats(a) => cmd_stats(a),
        Command::Validate(a) => cmd_validate(a),
        Command::Fixtures(a) => cmd_fixtures(a),
    };
    match result {
        Ok(code) => code,
        Err(e) => {
            eprintln!("error: {e:#}");
            EXIT_ERROR
        }
    }
}

fn load_config(path: Option<&Path>) -> anyhow::Result<ForgeConfig> {
    match path {
        Some(p) => ForgeConfig::load(p).with_context(|| format!("loading config {}", p.display())),
        None => Ok(ForgeConfig::default()),
    }
}

fn scene_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let files = list_files(dir, &["ply", "json"]).with_context(|| format!("scene directory {}", dir.display()))?;
    if files.is_empty() {
        bail!("no scene files in {}", dir.display());
    }
    Ok(files)
}

fn clip_files(dir: &Path) -> anyhow::Result<Vec<PathBuf>> {
    let files = list_files(dir, &["json"]).with_context(|| format!("clip directory {}", dir.display()))?;
    if files.is_empty() {
        bail!("no clip headers in {}", dir.display());
    }
    Ok(files)
}

fn load_scenes(files: &[PathBuf], cfg: &ForgeConfig) -> anyhow::Result<Vec<SceneContext>> {
    files
        .iter()
        .map(|p| {
            let scene = load_scene_auto(p).with_context(|| format!("loading scene {}", p.display()))?;
            Ok(SceneContext::build(scene, cfg)?)
        })
        .collect()
}

fn load_clips(files: &[PathBuf]) -> anyhow::Result<Vec<MotionClip>> {
    files
        .iter()
        .map(|p| load_motion(p).with_context(|| format!("loading clip {}", p.display())))
        .collect()
}

fn write_json<T: Serialize>(path: &Path, value: &T) -> anyhow::Result<()> {
    let mut bytes = serde_json::to_vec_pretty(value)?;
    bytes.push(b'\n');
    std::fs::write(path, bytes).with_context(|| format!("writing {}", path.display()))
}

pub fn cmd_synth(args: &SynthArgs) -> anyhow::Result<i32> {
    let cfg = load_config(args.config.as_deref())?;
    let quotas = parse_quota(&args.quota)?;
    let scene_paths = scene_files(&args.scenes)?;
    let clip_paths = clip_files(&args.clips)?;
    let scenes = load_scenes(&scene_paths, &cfg)?;
    let clips = load_clips(&clip_paths)?;
    println!("loaded {} scenes and {} clips", scenes.len(), clips.len());

    let mut corpus = manifest::synthesize_corpus(&scenes, &clips, &quotas, &cfg, args.seed, args.jobs)?;
    let scene_source: BTreeMap<&str, &PathBuf> = scenes
        .iter()
        .zip(&scene_paths)
        .map(|(s, p)| (s.scene.scene_id.as_str(), p))
        .collect();
    for entry in &mut corpus.manifest.scenes {
        entry.source = scene_source.get(entry.scene_id.as_str()).map(|p| p.display().to_string());
    }
    let clip_source: BTreeMap<&str, &PathBuf> =
        clips.iter().zip(&clip_paths).map(|(c, p)| (c.clip_id.as_str(), p)).collect();
    for entry in &mut corpus.manifest.clips {
        entry.source = clip_source.get(entry.clip_id.as_str()).map(|p| p.display().to_string());
    }
    std::fs::create_dir_all(&args.out).with_context(|| format!("creating {}", args.out.display()))?;
    let path = write_corpus(&corpus, &args.out)?;

    for (action, requested) in &corpus.manifest.quotas {
        let produced = corpus.manifest.counts.get(action).copied().unwrap_or(0);
        println!("{action}: {produced}/{requested}");
    }
    for s in &corpus.manifest.shortfalls {
        println!(
            "unreachable {}: {}/{} after {} tasks over {} pairs ({})",
            s.action, s.produced, s.requested, s.tasks_attempted, s.pairs, s.reason
        );
    }
    println!("wrote {} records to {}", corpus.records.len(), path.display());
    Ok(if corpus.manifest.is_complete() { EXIT_OK } else { EXIT_PARTIAL })
}

struct LoadedCorpus {
    manifest: Manifest,
    records: Vec<hsi_forge_core::DatasetRecord>,
    scenes: BTreeMap<String, SceneContext>,
    clips: BTreeMap<String, MotionClip>,
    reports: PathBuf,
}

fn load_manifest(args: &CorpusArgs) -> anyhow::Result<(Manifest, PathBuf)> {
    let path = args.corpus.join(MANIFEST_FILE);
    let manifest = Manifest::load(&path).with_context(|| format!("loading {}", path.display()))?;
    let reports = args.out.clone().unwrap_or_else(|| args.corpus.join("reports"));
    std::fs::create_dir_all(&reports).with_context(|| format!("creating {}", reports.display()))?;
    Ok((manifest, reports))
}

fn load_corpus(args: &CorpusArgs) -> anyhow::Result<LoadedCorpus> {
    let (manifest, reports) = load_manifest(args)?;
    let records = load_records(&manifest, &args.corpus)?;
    let cfg = &manifest.config;

    let scene_paths: Vec<PathBuf> = match &args.scenes {
        Some(dir) => scene_files(dir)?,
        None => manifest
            .scenes
            .iter()
            .map(|s| {
                s.source
                    .as_ref()
                    .map(PathBuf::from)
                    .with_context(|| format!("scene {} has no recorded source; pass --scenes", s.scene_id))
            })
            .collect::<anyhow::Result<_>>()?,
    };
    let clip_paths: Vec<PathBuf> = match &args.clips {
        Some(dir) => clip_files(dir)?,
        None => manifest
            .clips
            .iter()
            .map(|c| {
                c.source
                    .as_ref()
                    .map(PathBuf::from)
                    .with_context(|| format!("clip {} has no recorded source; pass --clips", c.clip_id))
            })
            .collect::<anyhow::Result<_>>()?,
    };
    let scenes = load_scenes(&scene_paths, cfg)?
        .into_iter()
        .map(|s| (s.scene.scene_id.clone(), s))
        .collect();
    let clips = load_clips(&clip_paths)?
        .into_iter()
        .map(|c| (c.clip_id.clone(), c))
        .collect();
    Ok(LoadedCorpus {
        manifest,
        records,
        scenes,
        clips,
        reports,
    })
}

#[derive(Debug, Serialize)]
struct DescriptionCheck {
    record_id: String,
    stored: String,
    regenerated: Option<String>,
    resolved_instance: Option<u32>,
    target_instance: u32,
    passed: bool,
    issue: Option<String>,
}

#[derive(Debug, Serialize)]
struct DescribeReport {
    total: usize,
    passed: usize,
    records: Vec<DescriptionCheck>,
}

pub fn cmd_describe(args: &CorpusArgs) -> anyhow::Result<i32> {
    let (manifest, reports) = load_manifest(args)?;
    let cfg = manifest.config.clone();
    let records = load_records(&manifest, &args.corpus)?;
    let mut scenes: BTreeMap<String, SceneContext> = BTreeMap::new();
    if !records.is_empty() {
        scenes = load_corpus(args)?.scenes;
    }
    let mut checks = Vec::new();
    for r in &records {
        let policy = cfg
            .policy
            .policy(&r.action)
            .with_context(|| format!("record {}", r.record_id))?;
        let ctx = scenes
            .get(&r.scene_id)
            .with_context(|| format!("scene {} of record {} not loaded", r.scene_id, r.record_id))?;
        let mut check = DescriptionCheck {
            record_id: r.record_id.clone(),
            stored: r.description.text.clone(),
            regenerated: None,
            resolved_instance: None,
            target_instance: r.target_instance,
            passed: false,
            issue: None,
        };
        let Some(target) = ctx.object(r.target_instance) else {
            check.issue = Some(format!("target {} not in scene", r.target_instance));
            checks.push(check);
            continue;
        };
        let mut rng = rng_from_seed(derive_stream(r.seed, "describe"));
        match generate_description(&r.action, &policy.verb_phrase, target, &ctx.objects, &cfg.language, &mut rng) {
            Ok(d) => check.regenerated = Some(d.text),
            Err(e) => check.issue = Some(format!("regeneration failed: {e}")),
        }
        match resolve_description(&r.description, &ctx.objects, &cfg.language) {
            Ok(id) => check.resolved_instance = Some(id),
            Err(e) => check.issue = Some(format!("resolution failed: {e}")),
        }
        check.passed = check.regenerated.as_deref() == Some(check.stored.as_str())
            && check.resolved_instance == Some(r.target_instance);
        if !check.passed && check.issue.is_none() {
            check.issue = Some("round trip mismatch".into());
        }
        checks.push(check);
    }
    let passed = checks.iter().filter(|c| c.passed).count();
    let report = DescribeReport {
        total: checks.len(),
        passed,
        records: checks,
    };
    write_json(&reports.join("descriptions.json"), &report)?;
    println!("descriptions: {passed}/{} round trips", report.total);
    for c in report.records.iter().filter(|c| !c.passed) {
        println!("flagged {}: {}", c.record_id, c.issue.as_deref().unwrap_or(""));
    }
    Ok(if passed == report.total { EXIT_OK } else { EXIT_PARTIAL })
}

pub fn cmd_metrics(args: &CorpusArgs) -> anyhow::Result<i32> {
    let c = load_corpus(args)?;
    let pool = rayon_pool(args.jobs)?;
    let report = pool.install(|| evaluate_corpus(&c.records, &c.scenes, &c.clips, &c.manifest.config))?;
    write_json(&c.reports.join("metrics.json"), &report)?;
    println!(
        "goal distance {:.4} m, collision distance {:.4} m over {} records",
        report.goal_distance.mean, report.collision_distance.mean, report.records.len()
    );
    if let Some(apd) = report.apd_mean {
        println!("APD {apd:.4} over {} clip groups", report.apd.len());
    }
    Ok(EXIT_OK)
}

fn rayon_pool(jobs: usize) -> anyhow::Result<rayon::ThreadPool> {
    Ok(rayon::ThreadPoolBuilder::new().num_threads(jobs.max(1)).build()?)
}

pub fn cmd_stats(args: &CorpusArgs) -> anyhow::Result<i32> {
    let (manifest, reports) = load_manifest(args)?;
    let s = manifest::stats(&manifest);
    write_json(&reports.join("stats.json"), &s)?;
    std::fs::write(reports.join("stats.tsv"), manifest::stats_tsv(&s))?;
    println!("{} records", s.total_records);
    for (action, n) in &s.per_action {
        let clips = s.distinct_clips_per_action.get(action).copied().unwrap_or(0);
        println!("{action}: {n} [{clips}]");
    }
    println!("mean description length {:.2} words", s.mean_word_count);
    Ok(EXIT_OK)
}

pub fn cmd_validate(args: &CorpusArgs) -> anyhow::Result<i32> {
    let c = load_corpus(args)?;
    let pool = rayon_pool(args.jobs)?;
    let report = pool.install(|| manifest::validate(&c.manifest, &c.records, &c.scenes, &c.clips, &c.manifest.config));
    write_json(&c.reports.join("validation.json"), &report)?;
    println!("validation: {}/{} records pass ({:.1}%)", report.passed, report.total, 100.0 * report.pass_rate);
    for id in &report.flagged {
        println!("flagged {id}");
    }
    Ok(if report.flagged.is_empty() { EXIT_OK } else { EXIT_PARTIAL })
}

pub fn cmd_fixtures(args: &FixturesArgs) -> anyhow::Result<i32> {
    let scenes = args.out.join("scenes");
    let clips = args.out.join("clips");
    for d in [&scenes, &clips] {
        std::fs::create_dir_all(d).with_context(|| format!("creating {}", d.display()))?;
    }
    for room in fixtures::synthetic_rooms(args.rooms) {
        save_scene_ply(&room, &scenes.join(format!("{}.ply", room.scene_id)), PlyEncoding::BinaryLittleEndian)?;
    }
    for clip in fixtures::standard_clips() {
        save_motion(&clip, &clips)?;
    }
    println!("wrote {} rooms to {} and clips to {}", args.rooms, scenes.display(), clips.display());
    Ok(EXIT_OK)
}
