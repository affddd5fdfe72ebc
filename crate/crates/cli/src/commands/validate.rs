//! `daug validate`: re-check every post-insertion invariant from the
//! outside — continuity of inserted tracks, road validity, collision
//! freedom over the horizon, grounding — plus the scene-file invariants.

use std::path::{Path, PathBuf};

use daug_core::geom::{transform_cloud, OrientedBox, TransformDirection};
use daug_core::insert::{dynamic_collision, ground_height, AugmentReport};
use daug_core::nalgebra::Vector2;
use daug_core::raster::{crop_and_rotate, is_road_valid};
use daug_core::scene_io::{discover_manifests, read_manifest, read_map, Scene};
use daug_core::{Error, Result};

#[derive(Clone, Debug, clap::Args)]
pub struct ValidateArgs {
    /// Corpus root (holding scenes/) or a directory of scene dirs
    #[arg(long)]
    pub dir: PathBuf,
}

pub fn cmd_validate(args: &ValidateArgs) -> Result<i32> {
    let root = if args.dir.join("scenes").is_dir() {
        args.dir.join("scenes")
    } else {
        args.dir.clone()
    };
    let manifests = discover_manifests(&root)?;
    if manifests.is_empty() {
        return Err(Error::Config(format!(
            "no scenes found under {}",
            root.display()
        )));
    }
    let mut violations: Vec<String> = Vec::new();
    for manifest in &manifests {
        let scene = read_manifest(manifest)?;
        let report_path = manifest.parent().unwrap().join("report.json");
        if report_path.is_file() {
            check_report(manifest, &scene, &report_path, &mut violations)?;
        }
        log::info!("checked {}", scene.id);
    }
    if violations.is_empty() {
        println!(
            "validated {} scene(s): all invariants hold",
            manifests.len()
        );
        Ok(0)
    } else {
        for v in &violations {
            eprintln!("violation: {v}");
        }
        eprintln!("{} violation(s)", violations.len());
        Ok(1)
    }
}

fn check_report(
    manifest: &Path,
    scene: &Scene,
    report_path: &Path,
    violations: &mut Vec<String>,
) -> Result<()> {
    let text = std::fs::read_to_string(report_path).map_err(|e| Error::io(report_path, e))?;
    let report: AugmentReport = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", report_path.display())))?;
    let plan = &report.plan;
    let timestamps = scene.timestamps_us();

    // the map the scene references, cropped at the insertion frame
    let dir = manifest.parent().unwrap_or_else(|| Path::new("."));
    let crop = match &scene.map {
        Some(map_ref) => {
            let map = read_map(&dir.join(&map_ref.grid_file), &dir.join(&map_ref.meta_file))?;
            Some(crop_and_rotate(
                &map,
                &scene.frames[plan.insertion_frame].ego_pose,
                plan.crop_half_extent,
            )?)
        }
        None => None,
    };

    for rec in &report.placements {
        let placement = rec.to_placement();
        let scene_id = &report.scene_id;
        let track = &rec.track_id;
        let end = plan.horizon_end(rec.insertion_frame, scene.frames.len());

        // continuity: annotated centers advance by exactly dt * velocity
        let mut boxes: Vec<(usize, &OrientedBox)> = Vec::new();
        for i in rec.insertion_frame..=end {
            match scene.frames[i].boxes.iter().find(|b| &b.track_id == track) {
                Some(b) => boxes.push((i, b)),
                None => violations.push(format!(
                    "{scene_id}: continuity: track {track} missing from frame {i}"
                )),
            }
        }
        for pair in boxes.windows(2) {
            let (i, a) = pair[0];
            let (j, b) = pair[1];
            let dt = (timestamps[j] - timestamps[i]) as f64 / 1e6;
            let expect = [dt * a.velocity.x, dt * a.velocity.y];
            let got = [b.center.x - a.center.x, b.center.y - a.center.y];
            if got[0].to_bits() != expect[0].to_bits()
                || got[1].to_bits() != expect[1].to_bits()
                || b.center.z.to_bits() != a.center.z.to_bits()
            {
                violations.push(format!(
                    "{scene_id}: continuity: track {track} frames {i}->{j}: center step ({}, {}) != dt*velocity ({}, {})",
                    got[0], got[1], expect[0], expect[1]
                ));
            }
        }

        // road validity of the footprint at the insertion frame
        if let Some(crop) = &crop {
            let probe = OrientedBox::new(
                rec.center0,
                rec.size_wlh,
                rec.yaw,
                rec.velocity,
                rec.category.clone(),
                rec.track_id.clone(),
            )?;
            if !is_road_valid(&probe, crop) {
                violations.push(format!(
                    "{scene_id}: road: track {track} footprint leaves the road"
                ));
            }
        }

        // collision freedom over the whole horizon, against everything else
        if dynamic_collision(scene, &placement, plan)? {
            violations.push(format!(
                "{scene_id}: collision: track {track} intersects another box within the horizon"
            ));
        }

        // grounding: bottom face near the local ground estimate
        let frame = &scene.frames[rec.insertion_frame];
        let global = transform_cloud(
            &frame.cloud,
            &frame.sensor_to_global(),
            TransformDirection::ToGlobal,
        )?;
        if let Ok(est) = ground_height(
            &global,
            Vector2::new(rec.center0[0], rec.center0[1]),
            plan.ground_radius,
            None,
        ) {
            let bottom = rec.center0[2] - rec.size_wlh[2] * 0.5;
            if (bottom - est).abs() > 0.1 {
                violations.push(format!(
                    "{scene_id}: grounding: track {track} bottom {bottom:.3} vs ground {est:.3}"
                ));
            }
        }
    }
    Ok(())
}
