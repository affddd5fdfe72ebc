//! `daug augment`: insert bank objects into every scene of a corpus,
//! writing augmented scenes, per-scene reports, and a run summary.

use std::collections::BTreeMap;
use std::path::{Path, PathBuf};
use std::sync::Arc;

use daug_core::extract::read_bank;
use daug_core::insert::augment_scene;
use daug_core::raster::RasterMap;
use daug_core::scene_io::{discover_manifests, read_manifest, read_map, write_manifest, MapRef};
use daug_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::config::{resolve_plan, PlanFlags};
use crate::seed::derive_scene_seed;
use crate::workers::run_parallel;

#[derive(Clone, Debug, clap::Args)]
pub struct AugmentArgs {
    /// Directory of scene subdirectories
    #[arg(long)]
    pub scenes: PathBuf,
    /// Object bank directory (from `daug extract`)
    #[arg(long)]
    pub bank: PathBuf,
    /// Output directory for the augmented corpus
    #[arg(long)]
    pub out: PathBuf,
    /// Raster grid file overriding the scenes' map reference
    #[arg(long, requires = "map_meta")]
    pub map_grid: Option<PathBuf>,
    /// Metadata sidecar for --map-grid
    #[arg(long, requires = "map_grid")]
    pub map_meta: Option<PathBuf>,
    /// Parallel scene workers (never changes output bytes)
    #[arg(long)]
    pub workers: Option<usize>,
    /// Exit 0 even when some scene received no insertions
    #[arg(long)]
    pub allow_empty: bool,
    #[command(flatten)]
    pub plan: PlanFlags,
}

#[derive(Serialize, Deserialize)]
struct SceneSummary {
    scene_id: String,
    seed: u64,
    placements: usize,
    failures: usize,
}

// the worker count is deliberately not echoed: it can never change
// output bytes, and the summary must be identical across worker counts
#[derive(Serialize, Deserialize)]
struct RunSummary {
    format_version: u32,
    master_seed: u64,
    allow_empty: bool,
    plan: daug_core::insert::AugmentationPlan,
    scenes: Vec<SceneSummary>,
}

fn copy_file(from: &Path, to: &Path) -> Result<()> {
    if let Some(parent) = to.parent() {
        std::fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    std::fs::copy(from, to).map_err(|e| Error::io(from, e))?;
    Ok(())
}

pub fn cmd_augment(args: &AugmentArgs) -> Result<i32> {
    let (plan, file_cfg) = resolve_plan(&args.plan)?;
    let workers = args.workers.or(file_cfg.workers).unwrap_or(1).max(1);
    let allow_empty = args.allow_empty || file_cfg.allow_empty.unwrap_or(false);

    let bank = read_bank(&args.bank)?;
    if bank.is_empty() {
        return Err(Error::Config(format!(
            "object bank at {} is empty",
            args.bank.display()
        )));
    }
    let manifests = discover_manifests(&args.scenes)?;
    if manifests.is_empty() {
        return Err(Error::Config(format!(
            "no scenes found under {}",
            args.scenes.display()
        )));
    }

    // resolve and pre-load every map source once
    let override_map = match (&args.map_grid, &args.map_meta) {
        (Some(g), Some(m)) => Some((g.clone(), m.clone())),
        _ => None,
    };
    let mut map_paths: Vec<(PathBuf, PathBuf)> = Vec::with_capacity(manifests.len());
    for manifest in &manifests {
        let paths = match &override_map {
            Some(pair) => pair.clone(),
            None => {
                let scene = peek_map_ref(manifest)?;
                let dir = manifest.parent().unwrap_or_else(|| Path::new("."));
                match scene {
                    Some(map_ref) => (dir.join(&map_ref.grid_file), dir.join(&map_ref.meta_file)),
                    None => {
                        return Err(Error::Config(format!(
                            "{}: scene has no map reference; pass --map-grid/--map-meta",
                            manifest.display()
                        )))
                    }
                }
            }
        };
        map_paths.push(paths);
    }
    let mut maps: BTreeMap<PathBuf, Arc<RasterMap>> = BTreeMap::new();
    let mut map_slot: BTreeMap<PathBuf, usize> = BTreeMap::new();
    for (grid, meta) in &map_paths {
        if !maps.contains_key(grid) {
            maps.insert(grid.clone(), Arc::new(read_map(grid, meta)?));
            let slot = map_slot.len();
            map_slot.insert(grid.clone(), slot);
            // mirror the map into the output tree so it validates standalone
            let dst = map_dir(&args.out, slot);
            copy_file(grid, &dst.join("grid.bin"))?;
            copy_file(meta, &dst.join("meta.json"))?;
            let layers_src = grid.parent().map(|d| d.join("layers.json"));
            if let Some(src) = layers_src.filter(|p| p.is_file()) {
                copy_file(&src, &dst.join("layers.json"))?;
            }
        }
    }

    let jobs: Vec<Result<SceneSummary>> = run_parallel(manifests.len(), workers, |i| {
        let manifest = &manifests[i];
        let (grid_path, _) = &map_paths[i];
        let map = Arc::clone(&maps[grid_path]);
        let slot = map_slot[grid_path];
        let mut scene = read_manifest(manifest)?;
        let seed = derive_scene_seed(plan.seed, &scene.id);
        let scene_plan = daug_core::insert::AugmentationPlan {
            seed,
            ..plan.clone()
        };
        scene.map = Some(MapRef {
            grid_file: format!("../../map_{slot}/grid.bin"),
            meta_file: format!("../../map_{slot}/meta.json"),
        });
        let scene_id = scene.id.clone();
        let (augmented, report) = augment_scene(scene, &bank, &map, &scene_plan)?;
        let scene_dir = args.out.join("scenes").join(&scene_id);
        write_manifest(&augmented, &scene_dir.join("manifest.json"))?;
        let report_path = scene_dir.join("report.json");
        let report_text = serde_json::to_string_pretty(&report).expect("report json");
        std::fs::write(&report_path, report_text).map_err(|e| Error::io(&report_path, e))?;
        Ok(SceneSummary {
            scene_id,
            seed,
            placements: report.placements.len(),
            failures: report.failures,
        })
    });

    let mut summaries = Vec::with_capacity(jobs.len());
    for (manifest, job) in manifests.iter().zip(jobs) {
        match job {
            Ok(s) => summaries.push(s),
            Err(e) => {
                eprintln!("error: {}: {e}", manifest.display());
                return Err(e);
            }
        }
    }
    let shortfall = summaries.iter().any(|s| s.placements == 0);
    let summary = RunSummary {
        format_version: 1,
        master_seed: plan.seed,
        allow_empty,
        plan: plan.clone(),
        scenes: summaries,
    };
    let summary_path = args.out.join("summary.json");
    let text = serde_json::to_string_pretty(&summary).expect("summary json");
    std::fs::write(&summary_path, text).map_err(|e| Error::io(&summary_path, e))?;

    let total: usize = summary.scenes.iter().map(|s| s.placements).sum();
    println!(
        "augmented {} scene(s): {total} insertion(s), {} scene(s) empty",
        summary.scenes.len(),
        summary.scenes.iter().filter(|s| s.placements == 0).count()
    );
    if shortfall && !allow_empty {
        return Ok(1);
    }
    Ok(0)
}

fn map_dir(out: &Path, slot: usize) -> PathBuf {
    out.join(format!("map_{slot}"))
}

/// Read just the map reference out of a manifest without loading sweeps.
fn peek_map_ref(path: &Path) -> Result<Option<MapRef>> {
    let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let value: serde_json::Value = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;
    match value.get("map") {
        None | Some(serde_json::Value::Null) => Ok(None),
        Some(v) => serde_json::from_value(v.clone())
            .map(Some)
            .map_err(|e| Error::Schema(format!("{}: map: {e}", path.display()))),
    }
}
