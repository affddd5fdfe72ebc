//! `daug gen`: write a synthetic corpus — scenes, raster map, polygon
//! layers, and per-scene ground truth.

use std::path::PathBuf;

use daug_core::raster::pixelize;
use daug_core::scene_io::{write_layers, write_manifest, write_map, MapRef};
use daug_core::synth::{generate, SynthSpec, MAP_MARGIN};
use daug_core::{Error, Result};
use serde::{Deserialize, Serialize};

use crate::seed::derive_scene_seed;

fn default_resolution() -> f64 {
    0.1
}

/// Corpus description: one base scene spec stamped out `num_scenes`
/// times with derived seeds.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct CorpusSpec {
    pub format_version: u32,
    pub num_scenes: usize,
    #[serde(default = "default_resolution")]
    pub map_resolution: f64,
    pub scene: SynthSpec,
}

#[derive(Clone, Debug, clap::Args)]
pub struct GenArgs {
    /// Corpus spec file (JSON)
    #[arg(long)]
    pub spec: PathBuf,
    /// Output directory
    #[arg(long)]
    pub out: PathBuf,
    /// Override the spec's base seed
    #[arg(long)]
    pub seed: Option<u64>,
}

pub fn cmd_gen(args: &GenArgs) -> Result<i32> {
    let text = std::fs::read_to_string(&args.spec).map_err(|e| Error::io(&args.spec, e))?;
    let corpus: CorpusSpec = serde_json::from_str(&text)
        .map_err(|e| Error::Config(format!("{}: {e}", args.spec.display())))?;
    if corpus.format_version != 1 {
        return Err(Error::Config(format!(
            "unsupported corpus format_version {}",
            corpus.format_version
        )));
    }
    if corpus.num_scenes == 0 {
        return Err(Error::Config("num_scenes must be at least 1".into()));
    }
    let base_seed = args.seed.unwrap_or(corpus.scene.seed);

    let mut map_written = false;
    for i in 0..corpus.num_scenes {
        let scene_id = format!("synth_{i:04}");
        let mut spec = corpus.scene.clone();
        spec.seed = derive_scene_seed(base_seed, &scene_id);
        let (mut scene, layers, truth) = generate(&spec)?;
        scene.id = scene_id.clone();
        scene.map = Some(MapRef {
            grid_file: "../../map/grid.bin".into(),
            meta_file: "../../map/meta.json".into(),
        });

        if !map_written {
            // layout geometry is seed-independent, so one map serves the corpus
            let bounds = layers.bounding_rect(MAP_MARGIN)?;
            let map = pixelize(&layers, corpus.map_resolution, bounds)?;
            write_map(
                &map,
                &args.out.join("map/grid.bin"),
                &args.out.join("map/meta.json"),
            )?;
            write_layers(&layers, &args.out.join("map/layers.json"))?;
            map_written = true;
        }

        let scene_dir = args.out.join("scenes").join(&scene_id);
        write_manifest(&scene, &scene_dir.join("manifest.json"))?;
        let truth_path = scene_dir.join("groundtruth.json");
        let truth_text = serde_json::to_string_pretty(&truth).expect("ground truth json");
        std::fs::write(&truth_path, truth_text).map_err(|e| Error::io(&truth_path, e))?;
        log::info!("generated {scene_id}");
    }
    println!(
        "generated {} scene(s) with base seed {base_seed} under {}",
        corpus.num_scenes,
        args.out.display()
    );
    Ok(0)
}
