use std::collections::BTreeMap;

use hsi_forge_core::alignment::SceneContext;
use hsi_forge_core::fixtures::{lie_down_clip, sit_clip, synthetic_room, walk_clip, RoomBuilder};
use hsi_forge_core::manifest::{self, stats, synthesize_corpus, Corpus, ManifestEntry, Split};
use hsi_forge_core::{Action, ForgeConfig, Manifest, MotionClip};

fn quotas(q: &[(&str, usize)]) -> BTreeMap<String, usize> {
    q.iter().map(|(a, n)| (a.to_string(), *n)).collect()
}

fn contexts(cfg: &ForgeConfig, n: usize) -> Vec<SceneContext> {
    (0..n).map(|i| SceneContext::build(synthetic_room(i), cfg).unwrap()).collect()
}

#[test]
fn two_walks_with_distinct_seeds() {
    let cfg = ForgeConfig::default();
    let corpus = synthesize_corpus(&contexts(&cfg, 1), &[walk_clip("walk", 45, 1.2)], &quotas(&[("walk", 2)]), &cfg, 3, 1).unwrap();
    assert_eq!(corpus.records.len(), 2);
    assert_ne!(corpus.records[0].seed, corpus.records[1].seed);
    assert!(corpus.manifest.is_complete());
    assert_eq!(corpus.manifest.counts["walk"], 2);
}

#[test]
fn action_without_eligible_objects_is_reported() {
    let cfg = ForgeConfig::default();
    let mut b = RoomBuilder::new("office", 5.0, 5.0, false);
    b.add_box("desk", (1.0, 2.2), (1.0, 1.6), 0.75);
    let ctx = SceneContext::build(b.build(), &cfg).unwrap();
    let clips = vec![lie_down_clip("lie", 60, 1.25, cfg.alignment.lie_hover()), walk_clip("walk", 45, 1.2)];
    let corpus = synthesize_corpus(&[ctx], &clips, &quotas(&[("lie_down", 3), ("walk", 1)]), &cfg, 0, 1).unwrap();
    assert_eq!(corpus.manifest.shortfalls.len(), 1);
    let s = &corpus.manifest.shortfalls[0];
    assert_eq!((s.action.as_str(), s.requested, s.produced), ("lie_down", 3, 0));
    assert_eq!(corpus.manifest.counts["walk"], 1);
}

fn small_corpus(jobs: usize) -> Corpus {
    let cfg = ForgeConfig::default();
    let clips = vec![sit_clip("sit", 40, 0.3), walk_clip("walk", 36, 0.9)];
    synthesize_corpus(&contexts(&cfg, 2), &clips, &quotas(&[("sit", 3), ("walk", 3)]), &cfg, 42, jobs).unwrap()
}

#[test]
fn worker_count_never_changes_bytes() {
    let a = small_corpus(1);
    let b = small_corpus(3);
    assert_eq!(a.manifest.to_json().unwrap(), b.manifest.to_json().unwrap());
    let dir_a = tempfile::tempdir().unwrap();
    let dir_b = tempfile::tempdir().unwrap();
    manifest::write_corpus(&a, dir_a.path()).unwrap();
    manifest::write_corpus(&b, dir_b.path()).unwrap();
    for e in &a.manifest.records {
        let read = |d: &std::path::Path| std::fs::read(d.join(&e.sidecar)).unwrap();
        assert_eq!(read(dir_a.path()), read(dir_b.path()));
    }
    let loaded = Manifest::load(&dir_a.path().join(manifest::MANIFEST_FILE)).unwrap();
    assert_eq!(loaded, a.manifest);
    assert_eq!(manifest::load_records(&loaded, dir_a.path()).unwrap(), a.records);
}

#[test]
fn corrupted_placement_is_flagged() {
    let cfg = ForgeConfig::default();
    let ctxs = contexts(&cfg, 2);
    let clips = vec![sit_clip("sit", 40, 0.3), walk_clip("walk", 36, 0.9)];
    let mut corpus = synthesize_corpus(&ctxs, &clips, &quotas(&[("sit", 3), ("walk", 3)]), &cfg, 42, 1).unwrap();
    corpus.records[1].placement.translation.z += 0.2;
    let scenes: BTreeMap<String, SceneContext> = ctxs.into_iter().map(|c| (c.scene.scene_id.clone(), c)).collect();
    let clips: BTreeMap<String, MotionClip> = clips.into_iter().map(|c| (c.clip_id.clone(), c)).collect();
    let report = manifest::validate(&corpus.manifest, &corpus.records, &scenes, &clips, &cfg);
    assert_eq!(report.flagged, vec![corpus.records[1].record_id.clone()]);
    assert_eq!(report.passed, 5);
}

fn entry(id: &str, action: Action, clip: &str, class: &str, frames: usize, text: &str) -> ManifestEntry {
    ManifestEntry {
        record_id: id.into(),
        scene_id: "room".into(),
        clip_id: clip.into(),
        action,
        counter: 0,
        seed: 0,
        target_instance: 1,
        target_class: class.into(),
        frame_count: frames,
        description: text.into(),
        word_count: text.split_whitespace().count(),
        split: Split::Train,
        sidecar: format!("records/{id}.json"),
    }
}

#[test]
fn hand_counted_three_record_stats() {
    let mut m = Manifest::empty(0, &ForgeConfig::default());
    m.records = vec![
        entry("a", Action::Sit, "c1", "chair", 40, "sit on the chair near the desk"),
        entry("b", Action::Sit, "c2", "sofa", 50, "sit on the sofa"),
        entry("c", Action::Walk, "c3", "chair", 40, "walk to the chair far from the desk"),
    ];
    let s = stats(&m);
    assert_eq!(s.total_records, 3);
    assert_eq!(s.per_action, BTreeMap::from([("sit".to_string(), 2), ("walk".to_string(), 1)]));
    assert_eq!(s.distinct_clips_per_action["sit"], 2);
    assert_eq!(s.frame_length_histogram, BTreeMap::from([(40, 2), (50, 1)]));
    assert_eq!(s.word_count_histogram, BTreeMap::from([(4, 1), (7, 1), (8, 1)]));
    assert!((s.mean_word_count - 19.0 / 3.0).abs() < 1e-12);
    assert_eq!(s.object_class_frequency["chair"], 2);
}
