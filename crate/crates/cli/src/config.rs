//! Effective configuration: command-line flags override config-file
//! values, which override built-in defaults. The resolved values are
//! echoed into every report so a run can be reproduced from its output.

use std::path::{Path, PathBuf};

use daug_core::insert::{AugmentationPlan, CollisionHorizon};
use daug_core::{Error, Result};
use serde::{Deserialize, Serialize};

/// Optional overrides loaded from `--config <path>` (JSON).
#[derive(Clone, Debug, Default, Serialize, Deserialize)]
#[serde(deny_unknown_fields)]
pub struct FileConfig {
    pub seed: Option<u64>,
    pub num_objects: Option<usize>,
    pub search_radius: Option<f64>,
    pub attempts_per_reference: Option<usize>,
    pub horizon: Option<CollisionHorizon>,
    pub margin: Option<f64>,
    pub insertion_frame: Option<usize>,
    pub strict_road: Option<bool>,
    pub crop_half_extent: Option<f64>,
    pub ground_radius: Option<f64>,
    pub workers: Option<usize>,
    pub allow_empty: Option<bool>,
    pub min_points: Option<usize>,
    pub categories: Option<Vec<String>>,
    pub dedup: Option<bool>,
}

impl FileConfig {
    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        serde_json::from_str(&text).map_err(|e| Error::Config(format!("{}: {e}", path.display())))
    }
}

/// Flag-level overrides shared by the augmentation-flavored commands.
#[derive(Clone, Debug, Default, clap::Args)]
pub struct PlanFlags {
    /// Master seed; per-scene seeds are derived from it and the scene id
    #[arg(long)]
    pub seed: Option<u64>,
    /// Objects to insert per scene [default: 5]
    #[arg(long)]
    pub num_objects: Option<usize>,
    /// Candidate search radius around a reference, meters [default: 10]
    #[arg(long)]
    pub search_radius: Option<f64>,
    /// Candidate draws per reference object [default: 32]
    #[arg(long)]
    pub attempts_per_reference: Option<usize>,
    /// Collision horizon: a frame count or "all" [default: all]
    #[arg(long, value_parser = parse_horizon)]
    pub horizon: Option<CollisionHorizon>,
    /// Collision margin, meters [default: 0.5]
    #[arg(long)]
    pub margin: Option<f64>,
    /// Frame index objects are inserted at [default: 0]
    #[arg(long)]
    pub insertion_frame: Option<usize>,
    /// Re-validate road footprints at every horizon frame
    #[arg(long)]
    pub strict_road: bool,
    /// Map crop half extent around the ego, meters [default: 100]
    #[arg(long)]
    pub crop_half_extent: Option<f64>,
    /// Config file supplying any of these values (JSON)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn parse_horizon(s: &str) -> std::result::Result<CollisionHorizon, String> {
    if s == "all" {
        return Ok(CollisionHorizon::All);
    }
    s.parse::<usize>()
        .map(CollisionHorizon::Frames)
        .map_err(|_| format!("horizon must be a frame count or \"all\", got '{s}'"))
}

/// Resolve the effective plan: defaults, then the config file, then flags.
pub fn resolve_plan(flags: &PlanFlags) -> Result<(AugmentationPlan, FileConfig)> {
    let file = match &flags.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let mut plan = AugmentationPlan::default();
    macro_rules! layer {
        ($field:ident, $file_field:ident) => {
            if let Some(v) = file.$file_field.clone() {
                plan.$field = v;
            }
            if let Some(v) = flags.$file_field.clone() {
                plan.$field = v;
            }
        };
    }
    layer!(seed, seed);
    layer!(num_objects, num_objects);
    layer!(search_radius, search_radius);
    layer!(attempts_per_reference, attempts_per_reference);
    layer!(collision_horizon, horizon);
    layer!(collision_margin, margin);
    layer!(insertion_frame, insertion_frame);
    layer!(crop_half_extent, crop_half_extent);
    if let Some(v) = file.strict_road {
        plan.strict_road = v;
    }
    if flags.strict_road {
        plan.strict_road = true;
    }
    if let Some(v) = file.ground_radius {
        plan.ground_radius = v;
    }
    plan.validate()?;
    Ok((plan, file))
}
