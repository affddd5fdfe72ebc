//! Pixel-level semantic map handling: pixelize polygon layers, crop the
//! raster around the ego vehicle, rotate it into the sensor frame, and
//! validate insertion footprints against road pixels. Also hosts the
//! polygon layer-filtering baseline the pixel path is benchmarked against.

use std::collections::BTreeMap;
use std::time::Instant;

use geo::{Area, BooleanOps};
use nalgebra::Vector2;
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;

use crate::error::{Error, Result};
use crate::geom::OrientedBox;

/// Semantic code assigned to road pixels.
pub const ROAD_CODE: u8 = 128;
/// Semantic code for pixels no layer covers (and for out-of-map lookups).
pub const OUT_OF_MAP_CODE: u8 = 0;

/// Nudge, in pixel units, applied before flooring so that coordinates
/// landing exactly on a pixel boundary are assigned deterministically.
const GRID_EPS: f64 = 1e-9;

/// Axis-aligned rectangle in global meters.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Bounds {
    pub min: Vector2<f64>,
    pub max: Vector2<f64>,
}

impl Bounds {
    pub fn new(min: [f64; 2], max: [f64; 2]) -> Result<Self> {
        let b = Bounds {
            min: Vector2::new(min[0], min[1]),
            max: Vector2::new(max[0], max[1]),
        };
        if !(b.max.x > b.min.x && b.max.y > b.min.y)
            || !(b.min.x.is_finite()
                && b.min.y.is_finite()
                && b.max.x.is_finite()
                && b.max.y.is_finite())
        {
            return Err(Error::InvalidBounds(format!(
                "min ({}, {}) max ({}, {})",
                b.min.x, b.min.y, b.max.x, b.max.y
            )));
        }
        Ok(b)
    }
}

/// A 2D semantic pixel grid. Row-major, row index grows with +Y and
/// column index with +X; `origin` is the global position of the minimum
/// corner of pixel (0, 0).
#[derive(Clone, Debug, PartialEq)]
pub struct RasterMap {
    width: u32,
    height: u32,
    resolution: f64,
    origin: Vector2<f64>,
    cells: Vec<u8>,
    palette: BTreeMap<String, u8>,
}

impl RasterMap {
    pub fn new(
        width: u32,
        height: u32,
        resolution: f64,
        origin: [f64; 2],
        cells: Vec<u8>,
        palette: BTreeMap<String, u8>,
    ) -> Result<Self> {
        if resolution <= 0.0 || !resolution.is_finite() {
            return Err(Error::InvalidBounds(format!("resolution {resolution}")));
        }
        if cells.len() != width as usize * height as usize {
            return Err(Error::Schema(format!(
                "cell count {} does not match {width}x{height}",
                cells.len()
            )));
        }
        for (name, &code) in &palette {
            if code == OUT_OF_MAP_CODE {
                return Err(Error::Schema(format!(
                    "palette entry '{name}' uses reserved code 0"
                )));
            }
            if (code == ROAD_CODE) != (name == "road") {
                return Err(Error::Schema(format!(
                    "palette entry '{name}' -> {code}: code 128 is reserved for 'road'"
                )));
            }
        }
        Ok(RasterMap {
            width,
            height,
            resolution,
            origin: Vector2::new(origin[0], origin[1]),
            cells,
            palette,
        })
    }

    pub fn width(&self) -> u32 {
        self.width
    }

    pub fn height(&self) -> u32 {
        self.height
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn origin(&self) -> [f64; 2] {
        [self.origin.x, self.origin.y]
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn palette(&self) -> &BTreeMap<String, u8> {
        &self.palette
    }

    pub fn code_at(&self, row: u32, col: u32) -> u8 {
        self.cells[row as usize * self.width as usize + col as usize]
    }

    /// Pixel containing a global position, or None outside the grid.
    pub fn pixel_of_global(&self, p: Vector2<f64>) -> Option<(u32, u32)> {
        let col = ((p.x - self.origin.x) / self.resolution + GRID_EPS).floor();
        let row = ((p.y - self.origin.y) / self.resolution + GRID_EPS).floor();
        if col < 0.0 || row < 0.0 || col >= self.width as f64 || row >= self.height as f64 {
            return None;
        }
        Some((row as u32, col as u32))
    }

    pub fn code_at_global(&self, p: Vector2<f64>) -> u8 {
        match self.pixel_of_global(p) {
            Some((r, c)) => self.code_at(r, c),
            None => OUT_OF_MAP_CODE,
        }
    }

    pub fn contains_global(&self, p: Vector2<f64>) -> bool {
        self.pixel_of_global(p).is_some()
    }
}

/// One semantic polygon layer: a simple polygon in global meters.
#[derive(Clone, Debug, PartialEq)]
pub struct PolygonLayer {
    pub category: String,
    pub vertices: Vec<Vector2<f64>>,
}

/// Vector map: layers listed from background to foreground.
#[derive(Clone, Debug, Default, PartialEq)]
pub struct PolygonLayerMap {
    pub layers: Vec<PolygonLayer>,
}

impl PolygonLayerMap {
    pub fn new(layers: Vec<PolygonLayer>) -> Result<Self> {
        for (i, layer) in layers.iter().enumerate() {
            if layer.vertices.len() < 3 {
                return Err(Error::Schema(format!(
                    "layer {i} ('{}') has {} vertices, need at least 3",
                    layer.category,
                    layer.vertices.len()
                )));
            }
            if layer
                .vertices
                .iter()
                .any(|v| !v.x.is_finite() || !v.y.is_finite())
            {
                return Err(Error::Schema(format!(
                    "layer {i} ('{}') has non-finite vertices",
                    layer.category
                )));
            }
        }
        Ok(PolygonLayerMap { layers })
    }

    /// Bounding rectangle of all vertices, grown by `margin` on each side.
    pub fn bounding_rect(&self, margin: f64) -> Result<Bounds> {
        let mut min = Vector2::new(f64::INFINITY, f64::INFINITY);
        let mut max = Vector2::new(f64::NEG_INFINITY, f64::NEG_INFINITY);
        for layer in &self.layers {
            for v in &layer.vertices {
                min.x = min.x.min(v.x);
                min.y = min.y.min(v.y);
                max.x = max.x.max(v.x);
                max.y = max.y.max(v.y);
            }
        }
        Bounds::new(
            [min.x - margin, min.y - margin],
            [max.x + margin, max.y + margin],
        )
    }
}

/// Rasterize the polygon layers onto a grid covering `bounds`.
///
/// Each pixel carries the code of the last-listed layer whose polygon
/// covers the pixel center; uncovered pixels stay 0. Codes come from the
/// palette built here: "road" is always 128, other categories get
/// sequential codes in order of first appearance.
pub fn pixelize(mask: &PolygonLayerMap, resolution: f64, bounds: Bounds) -> Result<RasterMap> {
    if resolution <= 0.0 || !resolution.is_finite() {
        return Err(Error::InvalidBounds(format!("resolution {resolution}")));
    }
    let width = ((bounds.max.x - bounds.min.x) / resolution - GRID_EPS)
        .ceil()
        .max(1.0) as u32;
    let height = ((bounds.max.y - bounds.min.y) / resolution - GRID_EPS)
        .ceil()
        .max(1.0) as u32;

    let mut palette = BTreeMap::new();
    let mut next_code: u8 = 1;
    for layer in &mask.layers {
        if palette.contains_key(&layer.category) {
            continue;
        }
        if layer.category == "road" {
            palette.insert("road".to_string(), ROAD_CODE);
        } else {
            while next_code == ROAD_CODE {
                next_code += 1;
            }
            if next_code == u8::MAX {
                return Err(Error::Schema(
                    "palette exhausted (more than 253 categories)".into(),
                ));
            }
            palette.insert(layer.category.clone(), next_code);
            next_code += 1;
        }
    }

    let mut cells = vec![OUT_OF_MAP_CODE; width as usize * height as usize];
    for layer in &mask.layers {
        let code = palette[&layer.category];
        fill_polygon(
            &layer.vertices,
            code,
            width,
            height,
            resolution,
            bounds.min,
            &mut cells,
        );
    }
    RasterMap::new(
        width,
        height,
        resolution,
        [bounds.min.x, bounds.min.y],
        cells,
        palette,
    )
}

/// Even-odd scanline fill over pixel centers.
fn fill_polygon(
    vertices: &[Vector2<f64>],
    code: u8,
    width: u32,
    height: u32,
    resolution: f64,
    origin: Vector2<f64>,
    cells: &mut [u8],
) {
    let n = vertices.len();
    let mut ymin = f64::INFINITY;
    let mut ymax = f64::NEG_INFINITY;
    for v in vertices {
        ymin = ymin.min(v.y);
        ymax = ymax.max(v.y);
    }
    let row_start = (((ymin - origin.y) / resolution - 0.5).ceil().max(0.0)) as u32;
    let row_end = ((((ymax - origin.y) / resolution - 0.5).floor()) as i64).min(height as i64 - 1);
    if row_end < 0 {
        return;
    }
    let mut xs: Vec<f64> = Vec::new();
    for row in row_start..=row_end as u32 {
        let y = origin.y + (row as f64 + 0.5) * resolution;
        xs.clear();
        for i in 0..n {
            let a = vertices[i];
            let b = vertices[(i + 1) % n];
            // half-open rule on y so shared vertices are counted once
            if (a.y <= y && y < b.y) || (b.y <= y && y < a.y) {
                xs.push(a.x + (y - a.y) * (b.x - a.x) / (b.y - a.y));
            }
        }
        xs.sort_by(|p, q| p.partial_cmp(q).unwrap());
        for pair in xs.chunks_exact(2) {
            let c0 = ((pair[0] - origin.x) / resolution - 0.5 - GRID_EPS)
                .ceil()
                .max(0.0) as i64;
            let c1_excl = ((pair[1] - origin.x) / resolution - 0.5 - GRID_EPS)
                .ceil()
                .min(width as f64) as i64;
            for col in c0..c1_excl {
                cells[row as usize * width as usize + col as usize] = code;
            }
        }
    }
}

/// A square crop of a raster map, re-sampled so its axes align with the
/// ego (sensor) frame of the frame it was cropped for.
#[derive(Clone, Debug)]
pub struct CroppedMap {
    side: u32,
    resolution: f64,
    half_extent: f64,
    ego_xy: Vector2<f64>,
    ego_yaw: f64,
    cells: Vec<u8>,
}

impl CroppedMap {
    pub fn side(&self) -> u32 {
        self.side
    }

    pub fn resolution(&self) -> f64 {
        self.resolution
    }

    pub fn half_extent(&self) -> f64 {
        self.half_extent
    }

    /// Ego pixel coordinates (row, col); lies at the grid center ±1 px.
    pub fn ego_pixel(&self) -> (u32, u32) {
        (self.side / 2, self.side / 2)
    }

    /// Rotation that was applied to the map content (−ego yaw).
    pub fn rotation_applied(&self) -> f64 {
        -self.ego_yaw
    }

    pub fn cells(&self) -> &[u8] {
        &self.cells
    }

    pub fn code_at(&self, row: u32, col: u32) -> u8 {
        self.cells[row as usize * self.side as usize + col as usize]
    }

    /// Map a global XY position into ego-frame coordinates.
    fn global_to_ego(&self, p: Vector2<f64>) -> Vector2<f64> {
        let d = p - self.ego_xy;
        let (sin, cos) = self.ego_yaw.sin_cos();
        Vector2::new(cos * d.x + sin * d.y, -sin * d.x + cos * d.y)
    }

    fn pixel_of_ego(&self, e: Vector2<f64>) -> Option<(u32, u32)> {
        let col = ((e.x + self.half_extent) / self.resolution + GRID_EPS).floor();
        let row = ((e.y + self.half_extent) / self.resolution + GRID_EPS).floor();
        if col < 0.0 || row < 0.0 || col >= self.side as f64 || row >= self.side as f64 {
            return None;
        }
        Some((row as u32, col as u32))
    }

    /// Crop pixel containing a global position, or None when it falls
    /// outside the crop.
    pub fn pixel_of_global(&self, p: Vector2<f64>) -> Option<(u32, u32)> {
        self.pixel_of_ego(self.global_to_ego(p))
    }

    pub fn code_at_global(&self, p: Vector2<f64>) -> u8 {
        match self.pixel_of_ego(self.global_to_ego(p)) {
            Some((r, c)) => self.code_at(r, c),
            None => OUT_OF_MAP_CODE,
        }
    }
}

/// Crop a square window of `2·half_extent` meters around the ego position
/// and rotate it by −ego yaw so the output axes align with the sensor
/// frame. Nearest-neighbor sampling; pixels outside the source map get 0.
pub fn crop_and_rotate(
    map: &RasterMap,
    ego: &crate::geom::Pose,
    half_extent: f64,
) -> Result<CroppedMap> {
    if half_extent <= 0.0 || !half_extent.is_finite() {
        return Err(Error::InvalidBounds(format!("half_extent {half_extent}")));
    }
    let t = ego.translation();
    let ego_xy = Vector2::new(t.x, t.y);
    if !map.contains_global(ego_xy) {
        return Err(Error::OutOfMap(ego_xy.x, ego_xy.y));
    }
    let ego_yaw = ego.yaw();
    let resolution = map.resolution();
    let side = (2.0 * half_extent / resolution).round().max(1.0) as u32;
    let (sin, cos) = ego_yaw.sin_cos();
    let mut cells = vec![OUT_OF_MAP_CODE; side as usize * side as usize];
    for row in 0..side {
        let ey = (row as f64 + 0.5) * resolution - half_extent;
        for col in 0..side {
            let ex = (col as f64 + 0.5) * resolution - half_extent;
            let g = Vector2::new(
                ego_xy.x + cos * ex - sin * ey,
                ego_xy.y + sin * ex + cos * ey,
            );
            cells[row as usize * side as usize + col as usize] = map.code_at_global(g);
        }
    }
    Ok(CroppedMap {
        side,
        resolution,
        half_extent,
        ego_xy,
        ego_yaw,
        cells,
    })
}

/// Conservative pixel cover of a box footprint on a cropped map.
#[derive(Clone, Debug)]
pub struct FootprintCover {
    /// In-crop pixels, (row, col), row-major order.
    pub pixels: Vec<(u32, u32)>,
    /// True when part of the cover falls outside the crop.
    pub clipped: bool,
}

/// The cover geometry shared by [`footprint_pixels`] and
/// [`is_road_valid`]: the box rectangle in crop coordinates, inflated by
/// the pixel half-diagonal, plus the candidate pixel ranges.
struct CoverScan {
    center_e: Vector2<f64>,
    u: Vector2<f64>,
    v: Vector2<f64>,
    hu: f64,
    hv: f64,
    row_range: (i64, i64),
    col_range: (i64, i64),
    clipped: bool,
}

impl CoverScan {
    fn new(obox: &OrientedBox, map: &CroppedMap) -> CoverScan {
        let center_g = Vector2::new(obox.center.x, obox.center.y);
        let center_e = map.global_to_ego(center_g);
        let yaw_e = obox.yaw - map.ego_yaw;
        let (sin, cos) = yaw_e.sin_cos();
        let u = Vector2::new(cos, sin);
        let v = Vector2::new(-sin, cos);
        let (eu, ev) = obox.footprint_half_extents();
        let inflate = map.resolution * std::f64::consts::FRAC_1_SQRT_2;
        let hu = eu + inflate;
        let hv = ev + inflate;

        // AABB of the inflated rectangle, in ego coordinates
        let rx = hu * cos.abs() + hv * sin.abs();
        let ry = hu * sin.abs() + hv * cos.abs();
        let res = map.resolution;
        let half = map.half_extent;
        let col_lo = (((center_e.x - rx + half) / res + GRID_EPS).floor()) as i64;
        let col_hi = (((center_e.x + rx + half) / res + GRID_EPS).floor()) as i64;
        let row_lo = (((center_e.y - ry + half) / res + GRID_EPS).floor()) as i64;
        let row_hi = (((center_e.y + ry + half) / res + GRID_EPS).floor()) as i64;

        let side = map.side as i64;
        // conservative: any chance the cover reaches past the crop counts as clipped
        let clipped = col_lo < 0 || row_lo < 0 || col_hi >= side || row_hi >= side;
        CoverScan {
            center_e,
            u,
            v,
            hu,
            hv,
            row_range: (row_lo.max(0), row_hi.min(side - 1)),
            col_range: (col_lo.max(0), col_hi.min(side - 1)),
            clipped,
        }
    }

    fn contains_pixel(&self, row: i64, col: i64, map: &CroppedMap) -> bool {
        let cx = (col as f64 + 0.5) * map.resolution - map.half_extent;
        let cy = (row as f64 + 0.5) * map.resolution - map.half_extent;
        let d = Vector2::new(cx - self.center_e.x, cy - self.center_e.y);
        d.dot(&self.u).abs() <= self.hu && d.dot(&self.v).abs() <= self.hv
    }
}

/// Pixels whose square may intersect the box's XY rectangle.
///
/// The rectangle is inflated by the pixel half-diagonal so that every
/// pixel whose square touches the exact rectangle is included; the cover
/// errs toward inclusion, never exclusion.
pub fn footprint_pixels(obox: &OrientedBox, map: &CroppedMap) -> Result<FootprintCover> {
    let scan = CoverScan::new(obox, map);
    let mut pixels = Vec::new();
    for row in scan.row_range.0..=scan.row_range.1 {
        for col in scan.col_range.0..=scan.col_range.1 {
            if scan.contains_pixel(row, col, map) {
                pixels.push((row as u32, col as u32));
            }
        }
    }
    if pixels.is_empty() {
        // the cover never vanishes for an in-crop box, so nothing in
        // range means the footprint lies entirely outside
        return Err(Error::OutOfCrop);
    }
    Ok(FootprintCover {
        pixels,
        clipped: scan.clipped,
    })
}

/// True iff the box footprint touches only road pixels. A box whose cover
/// leaves the crop, or that lies fully outside it, is invalid.
///
/// Equivalent to collecting [`footprint_pixels`] and checking every code,
/// but allocation-free and early-exiting — this runs once per candidate
/// position, so it is the hot path of the whole search.
pub fn is_road_valid(obox: &OrientedBox, map: &CroppedMap) -> bool {
    let scan = CoverScan::new(obox, map);
    if scan.clipped {
        return false;
    }
    let mut covered_any = false;
    for row in scan.row_range.0..=scan.row_range.1 {
        let base = row as usize * map.side as usize;
        for col in scan.col_range.0..=scan.col_range.1 {
            if scan.contains_pixel(row, col, map) {
                covered_any = true;
                if map.cells[base + col as usize] != ROAD_CODE {
                    return false;
                }
            }
        }
    }
    // an empty cover means the box lies entirely outside the crop
    covered_any
}

fn rect_polygon(obox: &OrientedBox) -> geo::Polygon<f64> {
    let corners = obox.corners_xy();
    geo::Polygon::new(
        geo::LineString::from(corners.iter().map(|c| (c.x, c.y)).collect::<Vec<_>>()),
        vec![],
    )
}

fn layer_polygon(layer: &PolygonLayer) -> geo::Polygon<f64> {
    geo::Polygon::new(
        geo::LineString::from(
            layer
                .vertices
                .iter()
                .map(|v| (v.x, v.y))
                .collect::<Vec<_>>(),
        ),
        vec![],
    )
}

/// Baseline road query by exact polygon clipping: the box rectangle must
/// be covered by the union of road layers and must not overlap any
/// non-road layer. This is the slow path `is_road_valid` replaces.
pub fn layer_filter_valid(obox: &OrientedBox, layers: &PolygonLayerMap) -> bool {
    let rect = rect_polygon(obox);
    let rect_area = rect.unsigned_area();
    // clipping backends round areas at well below a micro-square-meter;
    // genuine coverage gaps are orders of magnitude larger
    let area_eps = 1e-6 * rect_area.max(1.0);

    let mut covered: Option<geo::MultiPolygon<f64>> = None;
    for layer in &layers.layers {
        let poly = layer_polygon(layer);
        let piece = rect.intersection(&poly);
        let piece_area = piece.unsigned_area();
        if layer.category == "road" {
            if piece_area > 0.0 {
                covered = Some(match covered {
                    None => piece,
                    Some(acc) => acc.union(&piece),
                });
            }
        } else if piece_area > area_eps {
            return false;
        }
    }
    let covered_area = covered.map(|m| m.unsigned_area()).unwrap_or(0.0);
    rect_area - covered_area <= area_eps
}

/// Wall-clock per-call averages of the pixel lookup and the polygon
/// baseline on identical seeded query boxes.
#[derive(Clone, Copy, Debug)]
pub struct RoadLookupTiming {
    pub pixel_percall: f64,
    pub polygon_percall: f64,
    pub n_queries: usize,
}

impl RoadLookupTiming {
    pub fn ratio(&self) -> f64 {
        self.polygon_percall / self.pixel_percall
    }
}

/// Time `is_road_valid` against `layer_filter_valid` on `n_queries`
/// random boxes drawn over the crop extent. Run single-threaded for
/// stable numbers.
pub fn bench_road_lookup(
    map: &CroppedMap,
    layers: &PolygonLayerMap,
    n_queries: usize,
    seed: u64,
) -> Result<RoadLookupTiming> {
    if n_queries < 100 {
        return Err(Error::Config(format!(
            "bench needs at least 100 queries, got {n_queries}"
        )));
    }
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    let span = map.half_extent() * 0.9;
    let queries: Vec<OrientedBox> = (0..n_queries)
        .map(|i| {
            let ex = rng.gen_range(-span..span);
            let ey = rng.gen_range(-span..span);
            let (sin, cos) = map.ego_yaw.sin_cos();
            let g = Vector2::new(
                map.ego_xy.x + cos * ex - sin * ey,
                map.ego_xy.y + sin * ex + cos * ey,
            );
            OrientedBox::new(
                [g.x, g.y, 0.0],
                [rng.gen_range(1.5..2.2), rng.gen_range(3.5..5.5), 1.6],
                rng.gen_range(-std::f64::consts::PI..std::f64::consts::PI),
                [0.0, 0.0],
                "car",
                format!("q{i}"),
            )
            .expect("query box")
        })
        .collect();

    let started = Instant::now();
    let mut pixel_hits = 0usize;
    for q in &queries {
        if is_road_valid(q, map) {
            pixel_hits += 1;
        }
    }
    let pixel_total = started.elapsed().as_secs_f64();

    let started = Instant::now();
    let mut polygon_hits = 0usize;
    for q in &queries {
        if layer_filter_valid(q, layers) {
            polygon_hits += 1;
        }
    }
    let polygon_total = started.elapsed().as_secs_f64();

    // keep the verdict counts observable so the loops cannot be elided
    log::debug!("road-lookup bench: pixel {pixel_hits} valid, polygon {polygon_hits} valid");

    Ok(RoadLookupTiming {
        pixel_percall: pixel_total / n_queries as f64,
        polygon_percall: polygon_total / n_queries as f64,
        n_queries,
    })
}
