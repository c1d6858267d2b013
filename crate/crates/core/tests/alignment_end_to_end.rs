use hsi_forge_core::alignment::{align_with_seed, SceneContext};
use hsi_forge_core::fixtures::{sit_clip, stand_up_clip, walk_clip, RoomBuilder};
use hsi_forge_core::motion::{REGION_FEET, REGION_HIPS};
use hsi_forge_core::verify::verify_record;
use hsi_forge_core::{Action, DatasetRecord, Error, ForgeConfig, MotionClip, ScenePointCloud};
use nalgebra::Point3;

fn chair_room() -> ScenePointCloud {
    let mut b = RoomBuilder::new("chair_room", 4.0, 4.0, false);
    b.add_box("chair", (1.8, 2.25), (1.8, 2.25), 0.44);
    b.build()
}

/// Clearance, support and hip contact recomputed by exhaustive search.
fn brute_force_ok(record: &DatasetRecord, clip: &MotionClip, scene: &ScenePointCloud, anchor: usize, cfg: &ForgeConfig) {
    let a = &cfg.alignment;
    let hips: Vec<Point3<f64>> = clip.region(REGION_HIPS).unwrap().iter().map(|&i| record.frames[anchor][i as usize]).collect();
    for (f, frame) in record.frames.iter().enumerate() {
        for v in frame {
            for p in scene.points.iter().filter(|p| scene.class_name(p.semantic_class) != Some("floor")) {
                let exempt = f == anchor
                    && p.instance_id == record.target_instance
                    && hips.iter().any(|h| (h - p.position).norm() <= 2.0 * a.d_contact);
                assert!(exempt || (v - p.position).norm() >= a.d_collide, "frame {f} collides");
            }
        }
    }
    for frame in &record.frames {
        let low = clip.region(REGION_FEET).unwrap().iter().map(|&i| frame[i as usize].z).fold(f64::INFINITY, f64::min);
        assert!(low.abs() <= a.d_support);
    }
    let c = record.contact_point.unwrap();
    let d = hips.iter().map(|h| (h - c).norm()).fold(f64::INFINITY, f64::min);
    assert!(d <= a.d_contact);
}

#[test]
fn sit_on_box_chair_passes_exhaustive_recheck() {
    let cfg = ForgeConfig::default();
    let scene = chair_room();
    let ctx = SceneContext::build(scene.clone(), &cfg).unwrap();
    let clip = sit_clip("sit", 40, 0.3);
    let record = align_with_seed(&clip, &ctx, &Action::Sit, None, &cfg, 1).unwrap();
    assert!(record.verification.passed());
    assert_eq!(record.target_class, "chair");
    assert_eq!(record.description.text, "sit on the chair");
    brute_force_ok(&record, &clip, &scene, clip.frame_count() - 1, &cfg);
    assert!(verify_record(&record, &clip, &scene, &cfg).unwrap().passed);
}

#[test]
fn stand_up_contact_is_judged_on_the_first_frame() {
    let cfg = ForgeConfig::default();
    let scene = chair_room();
    let ctx = SceneContext::build(scene.clone(), &cfg).unwrap();
    let clip = stand_up_clip("stand_up", 40, 0.3);
    let record = align_with_seed(&clip, &ctx, &Action::StandUp, None, &cfg, 2).unwrap();
    assert_eq!(record.verification.action_contact.anchor_frame, 0);
    brute_force_ok(&record, &clip, &scene, 0, &cfg);
}

#[test]
fn same_seed_same_record() {
    let cfg = ForgeConfig::default();
    let ctx = SceneContext::build(chair_room(), &cfg).unwrap();
    let clip = sit_clip("sit", 40, 0.3);
    let a = align_with_seed(&clip, &ctx, &Action::Sit, None, &cfg, 9).unwrap();
    let b = align_with_seed(&clip, &ctx, &Action::Sit, None, &cfg, 9).unwrap();
    assert_eq!(a, b);
    let c = align_with_seed(&clip, &ctx, &Action::Sit, None, &cfg, 10).unwrap();
    assert_ne!(a.placement, c.placement);
}

#[test]
fn walled_in_target_exhausts_the_budget() {
    let mut cfg = ForgeConfig::default();
    cfg.alignment.max_tries = 30;
    let mut b = RoomBuilder::new("closet", 1.0, 1.0, true);
    b.add_box("chair", (0.3, 0.7), (0.3, 0.7), 0.44);
    let ctx = SceneContext::build(b.build(), &cfg).unwrap();
    let err = align_with_seed(&walk_clip("walk", 45, 1.2), &ctx, &Action::Walk, None, &cfg, 0).unwrap_err();
    assert!(matches!(err, Error::ExhaustedTries { tries: 30, .. }), "{err}");
}

#[test]
fn nothing_to_sit_on() {
    let cfg = ForgeConfig::default();
    let mut b = RoomBuilder::new("office", 4.0, 4.0, false);
    b.add_box("desk", (1.0, 2.2), (1.0, 1.6), 0.75);
    let ctx = SceneContext::build(b.build(), &cfg).unwrap();
    let err = align_with_seed(&sit_clip("sit", 40, 0.3), &ctx, &Action::Sit, None, &cfg, 0).unwrap_err();
    assert!(matches!(err, Error::NoInteractableObject(_)), "{err}");
}

#[test]
fn explicit_target_must_be_interactable() {
    let cfg = ForgeConfig::default();
    let mut b = RoomBuilder::new("office", 4.0, 4.0, false);
    let desk = b.add_box("desk", (1.0, 2.2), (1.0, 1.6), 0.75);
    let ctx = SceneContext::build(b.build(), &cfg).unwrap();
    let err = align_with_seed(&sit_clip("sit", 40, 0.3), &ctx, &Action::Sit, Some(desk), &cfg, 0).unwrap_err();
    assert!(matches!(err, Error::NoInteractableObject(_)), "{err}");
}
