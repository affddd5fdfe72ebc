//! `daug bench`: time pixel-level road lookup against the polygon
//! layer-filter baseline on identical query boxes.

use std::path::PathBuf;

use daug_core::geom::Pose;
use daug_core::raster::{bench_road_lookup, crop_and_rotate};
use daug_core::scene_io::{read_layers, read_map};
use daug_core::Result;

#[derive(Clone, Debug, clap::Args)]
pub struct BenchArgs {
    /// Raster grid file
    #[arg(long)]
    pub map_grid: PathBuf,
    /// Raster metadata sidecar
    #[arg(long)]
    pub map_meta: PathBuf,
    /// Polygon layer file
    #[arg(long)]
    pub layers: PathBuf,
    /// Queries per method
    #[arg(long, default_value_t = 1000)]
    pub queries: usize,
    /// Query-box seed
    #[arg(long, default_value_t = 1)]
    pub seed: u64,
}

pub fn cmd_bench(args: &BenchArgs) -> Result<i32> {
    let map = read_map(&args.map_grid, &args.map_meta)?;
    let layers = read_layers(&args.layers)?;
    let [ox, oy] = map.origin();
    let ego = Pose::translate(
        ox + map.width() as f64 * map.resolution() * 0.5,
        oy + map.height() as f64 * map.resolution() * 0.5,
        0.0,
    );
    let half_extent = 0.45 * map.width().min(map.height()) as f64 * map.resolution();
    let build_start = std::time::Instant::now();
    let crop = crop_and_rotate(&map, &ego, half_extent)?;
    let build = build_start.elapsed().as_secs_f64();

    let timing = bench_road_lookup(&crop, &layers, args.queries, args.seed)?;
    let roads = layers
        .layers
        .iter()
        .filter(|l| l.category == "road")
        .count();
    println!(
        "road lookup, {} queries against {} polygon(s) ({roads} road) \
         (crop build: {build:.3}s, amortized per scene)",
        timing.n_queries,
        layers.layers.len()
    );
    println!("  method         percall        cumtime");
    println!(
        "  pixel-level    {:>10.6}s   {:>9.3}s",
        timing.pixel_percall,
        timing.pixel_percall * timing.n_queries as f64
    );
    println!(
        "  layer-filter   {:>10.6}s   {:>9.3}s",
        timing.polygon_percall,
        timing.polygon_percall * timing.n_queries as f64
    );
    println!("  ratio: {:.1}x", timing.ratio());
    Ok(0)
}
