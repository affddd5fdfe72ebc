//! `daug extract`: build an object bank from a directory of scenes.

use std::collections::BTreeSet;
use std::path::PathBuf;

use daug_core::extract::{build_object_bank, write_bank, DEFAULT_MIN_POINTS};
use daug_core::scene_io::{discover_manifests, read_manifest, Scene};
use daug_core::Result;

use crate::config::FileConfig;
use crate::workers::run_parallel;

#[derive(Clone, Debug, clap::Args)]
pub struct ExtractArgs {
    /// Directory of scene subdirectories (each holding manifest.json)
    #[arg(long)]
    pub scenes: PathBuf,
    /// Output bank directory
    #[arg(long)]
    pub out: PathBuf,
    /// Minimum interior points per bank entry [default: 20]
    #[arg(long)]
    pub min_points: Option<usize>,
    /// Keep only these categories (repeatable)
    #[arg(long = "category")]
    pub categories: Vec<String>,
    /// Keep every occurrence instead of the densest one per track
    #[arg(long)]
    pub no_dedup: bool,
    /// Parallel scene readers
    #[arg(long, default_value_t = 1)]
    pub workers: usize,
    /// Config file (JSON)
    #[arg(long)]
    pub config: Option<PathBuf>,
}

pub fn cmd_extract(args: &ExtractArgs) -> Result<i32> {
    let file = match &args.config {
        Some(path) => FileConfig::load(path)?,
        None => FileConfig::default(),
    };
    let min_points = args
        .min_points
        .or(file.min_points)
        .unwrap_or(DEFAULT_MIN_POINTS);
    let mut categories: Vec<String> = file.categories.clone().unwrap_or_default();
    if !args.categories.is_empty() {
        categories = args.categories.clone();
    }
    let dedup = if args.no_dedup {
        false
    } else {
        file.dedup.unwrap_or(true)
    };

    let manifests = discover_manifests(&args.scenes)?;
    let results: Vec<Result<Scene>> = run_parallel(manifests.len(), args.workers, |i| {
        read_manifest(&manifests[i])
    });
    let mut scenes = Vec::with_capacity(results.len());
    let mut failures = 0usize;
    for (path, result) in manifests.iter().zip(results) {
        match result {
            Ok(scene) => scenes.push(scene),
            Err(e) => {
                eprintln!("error: {}: {e}", path.display());
                failures += 1;
            }
        }
    }
    if failures > 0 {
        eprintln!("{failures} scene(s) unreadable");
        return Ok(3);
    }

    let filter: Option<BTreeSet<String>> = if categories.is_empty() {
        None
    } else {
        Some(categories.into_iter().collect())
    };
    let bank = build_object_bank(&scenes, filter.as_ref(), min_points, dedup)?;
    write_bank(&bank, &args.out)?;

    println!(
        "bank: {} entr{}",
        bank.len(),
        if bank.len() == 1 { "y" } else { "ies" }
    );
    for (category, count) in bank.category_histogram() {
        println!("  {category:<16} {count}");
    }
    Ok(0)
}
