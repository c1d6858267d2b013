use std::collections::BTreeMap;

use hsi_forge_core::alignment::{align_with_seed, SceneContext};
use hsi_forge_core::cloud::{ScenePoint, ScenePointCloud};
use hsi_forge_core::fixtures::{synthetic_room, walk_clip, sit_clip};
use hsi_forge_core::io::{load_motion, load_scene_auto, save_motion, save_scene_json, save_scene_ply, PlyEncoding};
use hsi_forge_core::record::{load_record, save_record};
use hsi_forge_core::{Action, ForgeConfig};
use nalgebra::{Point3, Vector2};
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;

fn random_scene(n: usize) -> ScenePointCloud {
    let mut rng = ChaCha8Rng::seed_from_u64(11);
    let class_names: BTreeMap<u32, String> =
        [(1, "floor"), (4, "chair"), (7, "coffee_table")].into_iter().map(|(k, v)| (k, v.to_string())).collect();
    let points = (0..n)
        .map(|i| {
            let class = [1u32, 4, 7][i % 3];
            ScenePoint {
                position: Point3::new(rng.random_range(-3.0..3.0), rng.random_range(-3.0..3.0), rng.random_range(0.0..2.5)),
                color: [rng.random(), rng.random(), rng.random()],
                semantic_class: class,
                instance_id: if class == 1 { 0 } else { class * 10 + (i % 2) as u32 },
            }
        })
        .collect();
    let mut scene = ScenePointCloud::new("random", points, class_names).unwrap();
    scene.orientations.insert(40, Vector2::new(0.0, 1.0));
    scene
}

#[test]
fn ten_thousand_point_scene_survives_every_format() {
    let scene = random_scene(10_000);
    let dir = tempfile::tempdir().unwrap();
    for (name, enc) in [("a.ply", Some(PlyEncoding::Ascii)), ("b.ply", Some(PlyEncoding::BinaryLittleEndian)), ("c.json", None)] {
        let path = dir.path().join(name);
        match enc {
            Some(e) => save_scene_ply(&scene, &path, e).unwrap(),
            None => save_scene_json(&scene, &path).unwrap(),
        }
        let mut back = load_scene_auto(&path).unwrap();
        back.scene_id = scene.scene_id.clone();
        assert_eq!(back, scene, "{name}");
    }
}

#[test]
fn sixty_frame_walk_clip_is_bit_exact() {
    let clip = walk_clip("walk60", 60, 1.5);
    let dir = tempfile::tempdir().unwrap();
    let header = save_motion(&clip, dir.path()).unwrap();
    let back = load_motion(&header).unwrap();
    assert_eq!(back.frame_count(), 60);
    let bits = |c: &hsi_forge_core::MotionClip| -> Vec<u32> { c.frames.iter().flatten().flatten().map(|v| v.to_bits()).collect() };
    assert_eq!(bits(&back), bits(&clip));
    assert_eq!(back, clip);
}

#[test]
fn aligned_record_round_trips() {
    let cfg = ForgeConfig::default();
    let ctx = SceneContext::build(synthetic_room(0), &cfg).unwrap();
    let clip = sit_clip("sit", 40, 0.3);
    let record = align_with_seed(&clip, &ctx, &Action::Sit, None, &cfg, 5).unwrap();
    let dir = tempfile::tempdir().unwrap();
    let path = save_record(&record, dir.path()).unwrap();
    assert_eq!(load_record(&path).unwrap(), record);
}
