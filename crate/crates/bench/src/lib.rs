//! Shared fixtures for the benchmark targets.

use daug_core::geom::{OrientedBox, Pose};
use daug_core::raster::{crop_and_rotate, pixelize, CroppedMap, PolygonLayerMap};
use daug_core::synth::tiled_road_layers;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

/// A 10x10 patchwork of 5 m road tiles (100 road polygons) with a
/// sidewalk ring, pixelized at 0.1 m/px and cropped around the center.
pub fn benchmark_map() -> (CroppedMap, PolygonLayerMap) {
    let layers = tiled_road_layers(10, 10, 5.0);
    let bounds = layers.bounding_rect(4.0).expect("bounds");
    let map = pixelize(&layers, 0.1, bounds).expect("pixelize");
    let crop = crop_and_rotate(&map, &Pose::translate(25.0, 25.0, 0.0), 30.0).expect("crop");
    (crop, layers)
}

/// Seeded car-sized query boxes over the map extent.
pub fn query_boxes(n: usize, seed: u64) -> Vec<OrientedBox> {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    (0..n)
        .map(|i| {
            OrientedBox::new(
                [rng.gen_range(2.0..48.0), rng.gen_range(2.0..48.0), 0.0],
                [rng.gen_range(1.6..2.2), rng.gen_range(3.8..5.2), 1.6],
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                [0.0, 0.0],
                "car",
                format!("q{i}"),
            )
            .expect("query box")
        })
        .collect()
}
