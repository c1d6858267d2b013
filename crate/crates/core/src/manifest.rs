//! Corpus assembly, statistics and validation.
//!
//! Synthesis walks round-robin over (scene, clip) pairs per action. Task `k`
//! uses pair `k mod P` with attempt counter `k div P`, and its seed is derived
//! from the master seed, both ids and the counter, so every record can be
//! reproduced on its own. Tasks run in fixed-size chunks and are accepted in
//! task order, which makes the output independent of the worker count.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};

use rayon::prelude::*;
use serde::{Deserialize, Serialize};

use crate::alignment::{align_with_seed, eligible_targets, SceneContext};
use crate::config::ForgeConfig;
use crate::error::{Error, Result};
use crate::io::{read_bytes, write_bytes};
use crate::language::word_count;
use crate::motion::{Action, MotionClip};
use crate::record::{load_record, save_record, sidecar_path, DatasetRecord};
use crate::seed::{derive_record_seed, stable_unit};
use crate::verify::{verify_record, VerificationOutcome};

pub const MANIFEST_FILE: &str = "manifest.json";
pub const RECORDS_DIR: &str = "records";
pub const FORMAT_VERSION: u32 = 1;

#[derive(Debug, Clone, Copy, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Split {
    Train,
    Test,
}

impl Split {
    pub fn of_scene(scene_id: &str, test_fraction: f64) -> Split {
        if stable_unit(scene_id) < test_fraction {
            Split::Test
        } else {
            Split::Train
        }
    }

    pub fn as_str(self) -> &'static str {
        match self {
            Split::Train => "train",
            Split::Test => "test",
        }
    }
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SceneEntry {
    pub scene_id: String,
    pub split: Split,
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClipEntry {
    pub clip_id: String,
    pub action: Action,
    pub frame_count: usize,
    pub source: Option<String>,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ManifestEntry {
    pub record_id: String,
    pub scene_id: String,
    pub clip_id: String,
    pub action: Action,
    pub counter: u64,
    pub seed: u64,
    pub target_instance: u32,
    pub target_class: String,
    pub frame_count: usize,
    pub description: String,
    pub word_count: usize,
    pub split: Split,
    /// Sidecar path relative to the corpus directory.
    pub sidecar: String,
}

/// An action whose quota could not be met.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct QuotaUnreachable {
    pub action: String,
    pub requested: usize,
    pub produced: usize,
    pub tasks_attempted: usize,
    pub pairs: usize,
    /// Failed tasks by error kind.
    pub failures: BTreeMap<String, usize>,
    pub reason: String,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct Manifest {
    pub format_version: u32,
    pub master_seed: u64,
    pub config_hash: String,
    pub config: ForgeConfig,
    pub scenes: Vec<SceneEntry>,
    pub clips: Vec<ClipEntry>,
    pub quotas: BTreeMap<String, usize>,
    pub counts: BTreeMap<String, usize>,
    pub shortfalls: Vec<QuotaUnreachable>,
    pub records: Vec<ManifestEntry>,
}

impl Manifest {
    pub fn empty(master_seed: u64, cfg: &ForgeConfig) -> Self {
        Manifest {
            format_version: FORMAT_VERSION,
            master_seed,
            config_hash: cfg.hash(),
            config: cfg.clone(),
            scenes: Vec::new(),
            clips: Vec::new(),
            quotas: BTreeMap::new(),
            counts: BTreeMap::new(),
            shortfalls: Vec::new(),
            records: Vec::new(),
        }
    }

    pub fn is_complete(&self) -> bool {
        self.shortfalls.is_empty()
    }

    pub fn to_json(&self) -> Result<Vec<u8>> {
        let mut bytes = serde_json::to_vec_pretty(self)?;
        bytes.push(b'\n');
        Ok(bytes)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let m: Manifest = serde_json::from_slice(&read_bytes(path)?)?;
        let tally = m.records.iter().fold(BTreeMap::<String, usize>::new(), |mut acc, r| {
            *acc.entry(r.action.to_string()).or_default() += 1;
            acc
        });
        if tally.iter().any(|(a, n)| m.counts.get(a) != Some(n)) || m.counts.values().sum::<usize>() != m.records.len() {
            return Err(Error::Schema("manifest counts disagree with its records".into()));
        }
        Ok(m)
    }
}

#[derive(Debug)]
pub struct Corpus {
    pub manifest: Manifest,
    pub records: Vec<DatasetRecord>,
}

fn error_kind(e: &Error) -> &'static str {
    match e {
        Error::ExhaustedTries { .. } => "exhausted_tries",
        Error::NoInteractableObject(_) => "no_interactable_object",
        Error::NoUniqueReference(_) => "no_unique_reference",
        Error::NoValidTarget { .. } => "no_valid_target",
        Error::EmptySurface => "empty_surface",
        _ => "other",
    }
}

/// Fills `quotas` (action label → record count) from the given scenes and clips.
pub fn synthesize_corpus(
    scenes: &[SceneContext],
    clips: &[MotionClip],
    quotas: &BTreeMap<String, usize>,
    cfg: &ForgeConfig,
    master_seed: u64,
    jobs: usize,
) -> Result<Corpus> {
    if scenes.is_empty() || clips.is_empty() {
        return Err(Error::InvalidInput("synthesis needs at least one scene and one clip".into()));
    }
    cfg.validate()?;
    let pool = rayon::ThreadPoolBuilder::new()
        .num_threads(jobs.max(1))
        .build()
        .map_err(|e| Error::InvalidInput(format!("worker pool: {e}")))?;

    let mut scenes: Vec<&SceneContext> = scenes.iter().collect();
    scenes.sort_by(|a, b| a.scene.scene_id.cmp(&b.scene.scene_id));
    let mut clips: Vec<&MotionClip> = clips.iter().collect();
    clips.sort_by(|a, b| a.clip_id.cmp(&b.clip_id));

    let mut manifest = Manifest::empty(master_seed, cfg);
    manifest.quotas = quotas.clone();
    manifest.scenes = scenes
        .iter()
        .map(|s| SceneEntry {
            scene_id: s.scene.scene_id.clone(),
            split: Split::of_scene(&s.scene.scene_id, cfg.corpus.test_fraction),
            source: None,
        })
        .collect();
    manifest.clips = clips
        .iter()
        .map(|c| ClipEntry {
            clip_id: c.clip_id.clone(),
            action: c.action.clone(),
            frame_count: c.frame_count(),
            source: None,
        })
        .collect();
    let split_of: BTreeMap<&str, Split> = manifest.scenes.iter().map(|s| (s.scene_id.as_str(), s.split)).collect();

    let mut records = Vec::new();
    let mut shortfalls = Vec::new();
    for (label, &quota) in quotas {
        let action = Action::parse(label);
        let mut shortfall = |produced: usize, attempted: usize, pairs: usize, failures: BTreeMap<String, usize>, reason: String| {
            log::warn!("{label}: {produced}/{quota} records ({reason})");
            shortfalls.push(QuotaUnreachable {
                action: action.to_string(),
                requested: quota,
                produced,
                tasks_attempted: attempted,
                pairs,
                failures,
                reason,
            });
        };
        if quota == 0 {
            continue;
        }
        let policy = match cfg.policy.policy(&action) {
            Ok(p) => p,
            Err(e) => {
                shortfall(0, 0, 0, BTreeMap::new(), e.to_string());
                continue;
            }
        };
        let action_clips: Vec<&MotionClip> = clips
            .iter()
            .copied()
            .filter(|c| c.action == action && cfg.corpus.frame_length.admits(c.frame_count()))
            .collect();
        let action_scenes: Vec<&SceneContext> = scenes
            .iter()
            .copied()
            .filter(|s| !eligible_targets(s, &policy, cfg).is_empty())
            .collect();
        let pairs: Vec<(&SceneContext, &MotionClip)> = action_scenes
            .iter()
            .flat_map(|s| action_clips.iter().map(move |c| (*s, *c)))
            .collect();
        if pairs.is_empty() {
            let reason = if action_clips.is_empty() {
                "no admissible clip for this action"
            } else {
                "no scene has an eligible target for this action"
            };
            shortfall(0, 0, 0, BTreeMap::new(), reason.into());
            continue;
        }

        let budget = quota * cfg.corpus.tasks_per_record;
        let mut accepted: Vec<(u64, DatasetRecord)> = Vec::new();
        let mut failures: BTreeMap<String, usize> = BTreeMap::new();
        let mut attempted = 0;
        let mut next = 0;
        while accepted.len() < quota && next < budget {
            let end = (next + cfg.corpus.chunk_size).min(budget);
            let results: Vec<(u64, Result<DatasetRecord>)> = pool.install(|| {
                (next..end)
                    .into_par_iter()
                    .map(|k| {
                        let (ctx, clip) = pairs[k % pairs.len()];
                        let counter = (k / pairs.len()) as u64;
                        let seed = derive_record_seed(master_seed, &ctx.scene.scene_id, &clip.clip_id, counter);
                        (counter, align_with_seed(clip, ctx, &action, None, cfg, seed))
                    })
                    .collect()
            });
            for (counter, result) in results {
                if accepted.len() == quota {
                    break;
                }
                attempted += 1;
                match result {
                    Ok(r) => accepted.push((counter, r)),
                    Err(e) => {
                        log::debug!("{label}: task failed: {e}");
                        *failures.entry(error_kind(&e).to_string()).or_default() += 1;
                    }
                }
            }
            next = end;
        }
        let produced = accepted.len();
        log::info!("{label}: {produced}/{quota} records from {attempted} tasks over {} pairs", pairs.len());
        if produced < quota {
            shortfall(produced, attempted, pairs.len(), failures, "alignment budget exhausted".into());
        }
        for (n, (counter, mut record)) in accepted.into_iter().enumerate() {
            record.record_id = format!("{}-{n:05}", action.as_str());
            manifest.records.push(ManifestEntry {
                record_id: record.record_id.clone(),
                scene_id: record.scene_id.clone(),
                clip_id: record.clip_id.clone(),
                action: record.action.clone(),
                counter,
                seed: record.seed,
                target_instance: record.target_instance,
                target_class: record.target_class.clone(),
                frame_count: record.frame_count(),
                description: record.description.text.clone(),
                word_count: record.description.word_count(),
                split: split_of[record.scene_id.as_str()],
                sidecar: format!("{RECORDS_DIR}/{}.json", record.record_id),
            });
            records.push(record);
        }
        manifest.counts.insert(action.to_string(), produced);
    }
    manifest.shortfalls = shortfalls;
    Ok(Corpus { manifest, records })
}

/// Writes `manifest.json` and every record under `records/`.
pub fn write_corpus(corpus: &Corpus, dir: &Path) -> Result<PathBuf> {
    let records_dir = dir.join(RECORDS_DIR);
    std::fs::create_dir_all(&records_dir).map_err(|e| Error::io(&records_dir, e))?;
    for r in &corpus.records {
        save_record(r, &records_dir)?;
    }
    let path = dir.join(MANIFEST_FILE);
    write_bytes(&path, &corpus.manifest.to_json()?)?;
    Ok(path)
}

/// Loads every record the manifest lists, in manifest order.
pub fn load_records(manifest: &Manifest, dir: &Path) -> Result<Vec<DatasetRecord>> {
    manifest
        .records
        .iter()
        .map(|e| {
            let r = load_record(&dir.join(&e.sidecar))?;
            if r.record_id != e.record_id {
                return Err(Error::Schema(format!("sidecar {} holds record {}", e.sidecar, r.record_id)));
            }
            Ok(r)
        })
        .collect()
}

pub fn record_sidecar(dir: &Path, record_id: &str) -> PathBuf {
    sidecar_path(&dir.join(RECORDS_DIR), record_id)
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct StatsReport {
    pub total_records: usize,
    pub per_action: BTreeMap<String, usize>,
    /// Distinct source clips used per action.
    pub distinct_clips_per_action: BTreeMap<String, usize>,
    pub per_split: BTreeMap<String, usize>,
    /// Frame count → records.
    pub frame_length_histogram: BTreeMap<usize, usize>,
    /// Description word count → records.
    pub word_count_histogram: BTreeMap<usize, usize>,
    pub mean_word_count: f64,
    /// Interacted object class → records.
    pub object_class_frequency: BTreeMap<String, usize>,
}

pub fn stats(manifest: &Manifest) -> StatsReport {
    let mut s = StatsReport {
        total_records: manifest.records.len(),
        ..StatsReport::default()
    };
    let mut clips_per_action: BTreeMap<String, std::collections::BTreeSet<&str>> = BTreeMap::new();
    let mut words = 0usize;
    for e in &manifest.records {
        let action = e.action.to_string();
        *s.per_action.entry(action.clone()).or_default() += 1;
        clips_per_action.entry(action).or_default().insert(&e.clip_id);
        *s.per_split.entry(e.split.as_str().to_string()).or_default() += 1;
        *s.frame_length_histogram.entry(e.frame_count).or_default() += 1;
        let wc = word_count(&e.description);
        words += wc;
        *s.word_count_histogram.entry(wc).or_default() += 1;
        *s.object_class_frequency.entry(e.target_class.clone()).or_default() += 1;
    }
    s.distinct_clips_per_action = clips_per_action.into_iter().map(|(a, c)| (a, c.len())).collect();
    if s.total_records > 0 {
        s.mean_word_count = words as f64 / s.total_records as f64;
    }
    s
}

/// Plot-friendly tab-separated blocks, one per histogram.
pub fn stats_tsv(s: &StatsReport) -> String {
    let mut out = String::new();
    let mut block = |title: &str, rows: Vec<(String, usize)>| {
        out.push_str(&format!("# {title}\n"));
        for (k, v) in rows {
            out.push_str(&format!("{k}\t{v}\n"));
        }
        out.push('\n');
    };
    let rows = |m: &BTreeMap<String, usize>| m.iter().map(|(k, v)| (k.clone(), *v)).collect::<Vec<_>>();
    let num_rows = |m: &BTreeMap<usize, usize>| m.iter().map(|(k, v)| (k.to_string(), *v)).collect::<Vec<_>>();
    block("action\trecords", rows(&s.per_action));
    block("action\tdistinct_clips", rows(&s.distinct_clips_per_action));
    block("frames\trecords", num_rows(&s.frame_length_histogram));
    block("words\trecords", num_rows(&s.word_count_histogram));
    block("object_class\trecords", rows(&s.object_class_frequency));
    out
}

#[derive(Debug, Clone, Default, PartialEq, Serialize, Deserialize)]
pub struct ValidationReport {
    pub total: usize,
    pub passed: usize,
    pub pass_rate: f64,
    pub flagged: Vec<String>,
    pub outcomes: Vec<VerificationOutcome>,
}

/// Re-verifies every record with the brute-force checker and the
/// description resolver, and checks each seed against the manifest.
pub fn validate(
    manifest: &Manifest,
    records: &[DatasetRecord],
    scenes: &BTreeMap<String, SceneContext>,
    clips: &BTreeMap<String, MotionClip>,
    cfg: &ForgeConfig,
) -> ValidationReport {
    let entries: BTreeMap<&str, &ManifestEntry> = manifest.records.iter().map(|e| (e.record_id.as_str(), e)).collect();
    let mut outcomes: Vec<VerificationOutcome> = records
        .par_iter()
        .map(|r| {
            let mut extra = Vec::new();
            match entries.get(r.record_id.as_str()) {
                Some(e) => {
                    let derived = derive_record_seed(manifest.master_seed, &e.scene_id, &e.clip_id, e.counter);
                    if derived != r.seed || e.seed != r.seed {
                        extra.push("seed does not derive from the master seed".to_string());
                    }
                }
                None => extra.push("record is not listed in the manifest".into()),
            }
            let checked = match (scenes.get(&r.scene_id), clips.get(&r.clip_id)) {
                (Some(ctx), Some(clip)) => verify_record(r, clip, &ctx.scene, cfg),
                _ => Err(Error::InvalidInput("scene or clip not available".into())),
            };
            let mut outcome = checked.unwrap_or_else(|e| VerificationOutcome {
                record_id: r.record_id.clone(),
                passed: false,
                frame_error: f64::NAN,
                min_clearance: None,
                support_offset: f64::NAN,
                contact_distance: f64::NAN,
                containment_fraction: None,
                resolved_instance: None,
                isometry_drift: f64::NAN,
                issues: vec![e.to_string()],
            });
            outcome.issues.extend(extra);
            outcome.passed = outcome.issues.is_empty();
            outcome
        })
        .collect();
    outcomes.sort_by(|a, b| a.record_id.cmp(&b.record_id));
    let passed = outcomes.iter().filter(|o| o.passed).count();
    ValidationReport {
        total: outcomes.len(),
        passed,
        pass_rate: if outcomes.is_empty() { 1.0 } else { passed as f64 / outcomes.len() as f64 },
        flagged: outcomes.iter().filter(|o| !o.passed).map(|o| o.record_id.clone()).collect(),
        outcomes,
    }
}
