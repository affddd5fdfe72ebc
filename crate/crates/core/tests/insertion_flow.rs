//! End-to-end insertion behavior on synthetic scenes: search success on
//! permissive scenes, collision-bound failure on saturated ones,
//! placement safety, exact motion continuity, and seeded determinism.

use daug_core::extract::build_object_bank;
use daug_core::geom::{points_in_box, transform_cloud, OrientedBox, TransformDirection};
use daug_core::insert::{augment_scene, dynamic_collision, ground_height, AugmentationPlan};
use daug_core::raster::{crop_and_rotate, is_road_valid, pixelize, RasterMap};
use daug_core::scene_io::{Frame, Scene};
use daug_core::synth::{generate, ActorSpec, RoadLayout, SynthSpec};
use nalgebra::Vector2;

fn synth_spec(seed: u64) -> SynthSpec {
    SynthSpec {
        seed,
        layout: RoadLayout::Straight,
        num_frames: 10,
        frame_dt: 0.5,
        actors: vec![
            ActorSpec {
                category: "car".into(),
                size: [2.0, 4.5, 1.6],
                speed: 4.0,
                lane: 0,
            },
            ActorSpec {
                category: "car".into(),
                size: [1.9, 4.2, 1.5],
                speed: 0.0,
                lane: 3,
            },
        ],
        ground_z: -1.8,
        points_per_actor: 350,
        background_density: 3.0,
        road_length: 70.0,
    }
}

fn scene_and_map(seed: u64) -> (Scene, RasterMap) {
    let (scene, layers, _) = generate(&synth_spec(seed)).unwrap();
    let bounds = layers.bounding_rect(daug_core::synth::MAP_MARGIN).unwrap();
    let map = pixelize(&layers, 0.1, bounds).unwrap();
    (scene, map)
}

fn plan() -> AugmentationPlan {
    AugmentationPlan {
        seed: 99,
        crop_half_extent: 60.0,
        ..Default::default()
    }
}

#[test]
fn permissive_scene_takes_all_five_placements() {
    let (scene, map) = scene_and_map(7);
    let (bank_scene, _, _) = generate(&synth_spec(1234)).unwrap();
    let bank = build_object_bank(&[bank_scene], None, 20, true).unwrap();
    assert!(!bank.is_empty());

    let original_counts: Vec<usize> = scene.frames.iter().map(|f| f.cloud.len()).collect();
    let (aug, report) = augment_scene(scene, &bank, &map, &plan()).unwrap();

    assert_eq!(
        report.placements.len(),
        5,
        "rejections: {:?}",
        report.rejections
    );
    assert_eq!(report.failures, 0);
    assert_eq!(report.requested, 5);

    // conservation: each frame grew by the sum of inserted point counts
    let added: usize = report.placements.iter().map(|p| p.num_points).sum();
    for (frame, original) in aug.frames.iter().zip(original_counts.iter()) {
        assert_eq!(frame.cloud.len(), original + added);
    }

    // every placement safe, post-hoc and independently re-checked
    let crop = crop_and_rotate(&map, &aug.frames[0].ego_pose, 60.0).unwrap();
    let timestamps = aug.timestamps_us();
    for rec in &report.placements {
        let placement = rec.to_placement();
        // (1) road validity at the insertion frame
        let probe = OrientedBox::new(
            rec.center0,
            rec.size_wlh,
            rec.yaw,
            rec.velocity,
            rec.category.clone(),
            rec.track_id.clone(),
        )
        .unwrap();
        assert!(is_road_valid(&probe, &crop), "{} not on road", rec.track_id);
        // (2) collision-free over the whole horizon against everything else
        assert!(!dynamic_collision(&aug, &placement, &plan()).unwrap());
        // (3) grounded: bottom within 0.1 m of the local ground estimate
        let frame = &aug.frames[rec.insertion_frame];
        let global = transform_cloud(
            &frame.cloud,
            &frame.sensor_to_global(),
            TransformDirection::ToGlobal,
        )
        .unwrap();
        let est = ground_height(
            &global,
            Vector2::new(rec.center0[0], rec.center0[1]),
            2.0,
            None,
        )
        .unwrap();
        let bottom = rec.center0[2] - rec.size_wlh[2] * 0.5;
        assert!(
            (bottom - est).abs() <= 0.1,
            "{}: bottom {bottom} vs ground {est}",
            rec.track_id
        );
        // continuity: stored per-frame centers advance by exactly dt * v
        let boxes: Vec<&OrientedBox> = aug
            .frames
            .iter()
            .flat_map(|f| f.boxes.iter().filter(|b| b.track_id == rec.track_id))
            .collect();
        assert_eq!(boxes.len(), aug.frames.len() - rec.insertion_frame);
        for (k, pair) in boxes.windows(2).enumerate() {
            let i = rec.insertion_frame + k;
            let dt = (timestamps[i + 1] - timestamps[i]) as f64 / 1e6;
            let dx = pair[1].center.x - pair[0].center.x;
            let dy = pair[1].center.y - pair[0].center.y;
            assert_eq!(dx.to_bits(), (dt * rec.velocity[0]).to_bits());
            assert_eq!(dy.to_bits(), (dt * rec.velocity[1]).to_bits());
            assert_eq!(pair[1].center.z.to_bits(), pair[0].center.z.to_bits());
        }
    }
}

#[test]
fn reextracting_an_inserted_object_recovers_the_bank_points() {
    let (scene, map) = scene_and_map(21);
    let (bank_scene, _, _) = generate(&synth_spec(4321)).unwrap();
    let bank = build_object_bank(&[bank_scene], None, 20, true).unwrap();
    let (aug, report) = augment_scene(scene, &bank, &map, &plan()).unwrap();
    assert!(!report.placements.is_empty());

    for rec in &report.placements {
        let entry = &bank.entries[rec.bank_index];
        for fi in [rec.insertion_frame, aug.frames.len() - 1] {
            let frame = &aug.frames[fi];
            let annotation = frame
                .boxes
                .iter()
                .find(|b| b.track_id == rec.track_id)
                .expect("inserted annotation");
            let global = transform_cloud(
                &frame.cloud,
                &frame.sensor_to_global(),
                TransformDirection::ToGlobal,
            )
            .unwrap();
            let inside = points_in_box(&global, annotation).unwrap();
            assert!(inside.len() >= entry.num_points());
            // the object's own points are the appended ones; match them
            // against the bank entry in box-local coordinates
            let local =
                transform_cloud(&global, &annotation.pose(), TransformDirection::ToLocal).unwrap();
            // locate this record's slice: objects were appended in report order
            let mut offset = frame.cloud.len();
            for r in report.placements.iter().rev() {
                offset -= r.num_points;
                if r.track_id == rec.track_id {
                    break;
                }
            }
            for (k, bank_point) in entry.points.points().iter().enumerate() {
                let got = local.points()[offset + k];
                assert!(
                    (got.position - bank_point.position).norm() < 1e-5,
                    "frame {fi} point {k}"
                );
                assert_eq!(got.intensity, bank_point.intensity);
                assert_eq!(got.ring, bank_point.ring);
            }
        }
    }
}

/// Road fully tiled with parked boxes in every frame: every candidate
/// collides, nothing can be placed.
#[test]
fn saturated_scene_places_nothing_and_blames_collisions() {
    let (base_scene, map) = scene_and_map(33);
    // pack the road with parked boxes on a 5.2 x 2.6 grid
    let mut frames: Vec<Frame> = Vec::new();
    for frame in &base_scene.frames {
        let mut f = Frame {
            timestamp_us: frame.timestamp_us,
            lidar_file: frame.lidar_file.clone(),
            cloud: frame.cloud.clone(),
            ego_pose: frame.ego_pose,
            sensor_calib: frame.sensor_calib,
            boxes: Vec::new(),
            extra: Default::default(),
        };
        let mut k = 0;
        let mut x = -33.0;
        while x < 33.0 {
            let mut y = -6.0;
            while y < 6.5 {
                f.boxes.push(
                    OrientedBox::new(
                        [x, y, -1.0],
                        [2.4, 5.0, 1.6],
                        0.0,
                        [0.0, 0.0],
                        "car",
                        format!("park_{k}"),
                    )
                    .unwrap(),
                );
                k += 1;
                y += 2.6;
            }
            x += 5.2;
        }
        frames.push(f);
    }
    let scene = Scene {
        id: "saturated".into(),
        frames,
        map: None,
        extra: Default::default(),
    };

    let (bank_scene, _, _) = generate(&synth_spec(4321)).unwrap();
    let bank = build_object_bank(&[bank_scene], None, 20, true).unwrap();
    let one = AugmentationPlan {
        num_objects: 1,
        ..plan()
    };
    let (_, report) = augment_scene(scene, &bank, &map, &one).unwrap();
    assert_eq!(report.placements.len(), 0);
    assert_eq!(report.failures, 1);
    assert!(
        report.rejections.collision > 0,
        "rejections: {:?}",
        report.rejections
    );
}

#[test]
fn same_seed_same_output_bytes() {
    let (bank_scene, _, _) = generate(&synth_spec(4321)).unwrap();
    let bank = build_object_bank(&[bank_scene], None, 20, true).unwrap();

    let run = || {
        let (scene, map) = scene_and_map(7);
        let (aug, report) = augment_scene(scene, &bank, &map, &plan()).unwrap();
        let dir = tempfile::tempdir().unwrap();
        let path = dir.path().join("m.json");
        daug_core::scene_io::write_manifest(&aug, &path).unwrap();
        let manifest = std::fs::read(&path).unwrap();
        let sweeps: Vec<Vec<u8>> = aug
            .frames
            .iter()
            .map(|f| std::fs::read(dir.path().join(&f.lidar_file)).unwrap())
            .collect();
        (manifest, sweeps, serde_json::to_string(&report).unwrap())
    };
    let (m1, s1, r1) = run();
    let (m2, s2, r2) = run();
    assert_eq!(m1, m2);
    assert_eq!(s1, s2);
    assert_eq!(r1, r2);
}

#[test]
fn no_reference_frame_yields_no_placement() {
    let (scene, map) = scene_and_map(55);
    let mut empty_scene = scene;
    for f in &mut empty_scene.frames {
        f.boxes.clear();
    }
    let (bank_scene, _, _) = generate(&synth_spec(4321)).unwrap();
    let bank = build_object_bank(&[bank_scene], None, 20, true).unwrap();
    let one = AugmentationPlan {
        num_objects: 1,
        ..plan()
    };
    let (_, report) = augment_scene(empty_scene, &bank, &map, &one).unwrap();
    assert_eq!(report.placements.len(), 0);
    assert_eq!(report.rejections.no_reference, 1);
}

#[test]
fn empty_bank_is_a_configuration_error() {
    let (scene, map) = scene_and_map(55);
    let bank = daug_core::extract::ObjectBank::default();
    assert!(matches!(
        augment_scene(scene, &bank, &map, &plan()),
        Err(daug_core::Error::Config(_))
    ));
}

#[test]
fn search_is_deterministic_given_seed() {
    let (scene, map) = scene_and_map(7);
    let (bank_scene, _, _) = generate(&synth_spec(4321)).unwrap();
    let bank = build_object_bank(&[bank_scene], None, 20, true).unwrap();
    let crop = crop_and_rotate(&map, &scene.frames[0].ego_pose, 60.0).unwrap();
    let p = plan();
    let search = || {
        let mut rng = <rand_chacha::ChaCha8Rng as rand::SeedableRng>::seed_from_u64(777);
        daug_core::insert::search_insertion(&scene, 0, &bank.entries[0], 0, &crop, &p, &mut rng)
            .unwrap()
    };
    let a = search();
    let b = search();
    let (pa, pb) = (a.placement.unwrap(), b.placement.unwrap());
    assert_eq!(pa.center0.x.to_bits(), pb.center0.x.to_bits());
    assert_eq!(pa.center0.y.to_bits(), pb.center0.y.to_bits());
    assert_eq!(pa.center0.z.to_bits(), pb.center0.z.to_bits());
    assert_eq!(pa.velocity.x.to_bits(), pb.velocity.x.to_bits());
    assert_eq!(pa, pb);
}

/// Strict road mode must reject placements whose trajectory leaves the
/// road within the horizon, where the default mode only checks the
/// insertion frame.
#[test]
fn strict_road_rejects_trajectories_that_leave_the_road() {
    use daug_core::extract::{ExtractedObject, SourceRef};
    use daug_core::geom::CloudPoint;
    use daug_core::nalgebra::Point3;
    use daug_core::raster::{Bounds, PolygonLayer, PolygonLayerMap};

    // a lone 16 m road square; anything moving fast runs off it
    let road = PolygonLayerMap::new(vec![PolygonLayer {
        category: "road".into(),
        vertices: vec![
            Vector2::new(-8.0, -8.0),
            Vector2::new(8.0, -8.0),
            Vector2::new(8.0, 8.0),
            Vector2::new(-8.0, 8.0),
        ],
    }])
    .unwrap();
    let map = pixelize(
        &road,
        0.1,
        Bounds::new([-12.0, -12.0], [12.0, 12.0]).unwrap(),
    )
    .unwrap();

    // identity poses: sensor-local equals global
    let ground: Vec<CloudPoint> = (0..2000)
        .map(|i| CloudPoint {
            position: Point3::new(
                -8.0 + (i % 50) as f64 * 0.32,
                -8.0 + (i / 50) as f64 * 0.4,
                -1.6,
            ),
            intensity: 0.1,
            ring: (i % 32) as f32,
        })
        .collect();
    let reference = OrientedBox::new(
        [-5.0, 0.0, -0.8],
        [1.8, 4.2, 1.6],
        0.0,
        [5.0, 0.0],
        "car",
        "ref_0",
    )
    .unwrap();
    let frames: Vec<Frame> = (0..10)
        .map(|i| {
            let mut b = reference.clone();
            b.center.x += i as f64 * 0.5 * 5.0;
            // keep the reference itself from leaving; park it after a while
            b.center.x = b.center.x.min(5.0);
            Frame {
                timestamp_us: 1_700_000_000_000_000 + i * 500_000,
                lidar_file: format!("sweeps/f{i}.bin"),
                cloud: daug_core::PointCloud::new(ground.clone(), daug_core::CloudFrame::Local)
                    .unwrap(),
                ego_pose: daug_core::Pose::identity(),
                sensor_calib: daug_core::Pose::identity(),
                boxes: vec![b],
                extra: Default::default(),
            }
        })
        .collect();
    let scene = Scene {
        id: "strict".into(),
        frames,
        map: None,
        extra: Default::default(),
    };

    // a fast bank object: 10 m/s along the aligned yaw covers 45 m over
    // the horizon, far beyond the road square
    let entry = ExtractedObject {
        points: daug_core::PointCloud::new(
            (0..40)
                .map(|k| CloudPoint {
                    position: Point3::new(
                        (k % 4) as f64 * 0.4 - 0.6,
                        (k / 4) as f64 * 0.3 - 1.2,
                        0.0,
                    ),
                    intensity: 0.5,
                    ring: 0.0,
                })
                .collect(),
            daug_core::CloudFrame::Local,
        )
        .unwrap(),
        template: OrientedBox::new([0.0; 3], [1.6, 3.8, 1.4], 0.0, [0.0, 0.0], "car", "src")
            .unwrap(),
        source: SourceRef {
            scene_id: "s".into(),
            frame_index: 0,
            track_id: "src".into(),
        },
        source_speed: 10.0,
    };
    let bank = daug_core::extract::ObjectBank {
        entries: vec![entry],
    };

    let lax = AugmentationPlan {
        seed: 5,
        num_objects: 1,
        crop_half_extent: 12.0,
        attempts_per_reference: 64,
        ..Default::default()
    };
    let strict = AugmentationPlan {
        strict_road: true,
        ..lax.clone()
    };

    let (_, lax_report) = augment_scene(scene.clone(), &bank, &map, &lax).unwrap();
    assert_eq!(
        lax_report.placements.len(),
        1,
        "rejections: {:?}",
        lax_report.rejections
    );
    assert!(!lax_report.plan.strict_road);

    let (_, strict_report) = augment_scene(scene, &bank, &map, &strict).unwrap();
    assert_eq!(
        strict_report.placements.len(),
        0,
        "strict mode accepted a runaway trajectory"
    );
    assert!(
        strict_report.plan.strict_road,
        "strict flag must be echoed in the report"
    );
    assert!(strict_report.rejections.road > 0);
}

/// Partial-horizon augmentation: a later insertion frame plus a bounded
/// collision horizon confines the object (points and annotations) to
/// exactly that frame window.
#[test]
fn bounded_horizon_inserts_only_within_the_window() {
    let (scene, map) = scene_and_map(61);
    let (bank_scene, _, _) = generate(&synth_spec(4321)).unwrap();
    let bank = build_object_bank(&[bank_scene], None, 20, true).unwrap();
    let original_counts: Vec<usize> = scene.frames.iter().map(|f| f.cloud.len()).collect();

    let windowed = AugmentationPlan {
        num_objects: 1,
        insertion_frame: 2,
        collision_horizon: daug_core::CollisionHorizon::Frames(4),
        ..plan()
    };
    let (aug, report) = augment_scene(scene, &bank, &map, &windowed).unwrap();
    assert_eq!(
        report.placements.len(),
        1,
        "rejections: {:?}",
        report.rejections
    );
    let rec = &report.placements[0];
    assert_eq!(rec.insertion_frame, 2);

    for (i, frame) in aug.frames.iter().enumerate() {
        let has_box = frame.boxes.iter().any(|b| b.track_id == rec.track_id);
        let expected = (2..=5).contains(&i);
        assert_eq!(has_box, expected, "frame {i}");
        let expected_points = original_counts[i] + if expected { rec.num_points } else { 0 };
        assert_eq!(frame.cloud.len(), expected_points, "frame {i}");
    }
}
