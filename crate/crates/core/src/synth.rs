//! Deterministic synthetic scene and map generation: constant-velocity
//! actors on lanes, flat ground returns, box-shell object points, and
//! per-frame annotations that are exactly consistent with the points.
//! Stands in for a real dataset in every property test.

use nalgebra::{Point3, Vector2, Vector3};
use rand::Rng;
use rand_chacha::rand_core::SeedableRng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    normalize_yaw, transform_cloud, CloudFrame, CloudPoint, OrientedBox, PointCloud, Pose,
    TransformDirection,
};
use crate::insert::{boxes_collide, quantize};
use crate::raster::{Bounds, PolygonLayer, PolygonLayerMap};
use crate::scene_io::{Frame, Scene};

pub const LANE_WIDTH: f64 = 3.5;
pub const SIDEWALK_WIDTH: f64 = 2.0;
/// Margin between the road bounding box and the map/ground extent.
pub const MAP_MARGIN: f64 = 10.0;
/// Shell points sit this far inside each face so they survive the f32
/// on-disk representation without leaving the box.
const FACE_INSET: f64 = 0.01;

#[derive(Clone, Copy, Debug, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum RoadLayout {
    Straight,
    Intersection,
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ActorSpec {
    pub category: String,
    /// (width, length, height), meters.
    pub size: [f64; 3],
    /// Speed along the lane, m/s; even lanes head +X, odd lanes −X.
    pub speed: f64,
    pub lane: usize,
}

fn default_road_length() -> f64 {
    120.0
}

#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct SynthSpec {
    pub seed: u64,
    pub layout: RoadLayout,
    pub num_frames: usize,
    /// Seconds between frames. Dyadic values (0.5, 0.25, …) keep the
    /// constant-velocity annotations bit-exact.
    pub frame_dt: f64,
    pub actors: Vec<ActorSpec>,
    pub ground_z: f64,
    pub points_per_actor: usize,
    /// Ground returns per square meter over the map extent.
    pub background_density: f64,
    #[serde(default = "default_road_length")]
    pub road_length: f64,
}

impl SynthSpec {
    // negated comparisons so NaN fails every bound
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    fn validate(&self) -> Result<()> {
        if self.num_frames < 1 {
            return Err(Error::SynthSpec("num_frames must be at least 1".into()));
        }
        if self.num_frames > 1 && !(self.frame_dt > 0.0) {
            return Err(Error::SynthSpec("frame_dt must be positive".into()));
        }
        if self.actors.iter().any(|a| a.speed < 0.0) {
            return Err(Error::SynthSpec("actor speeds must be non-negative".into()));
        }
        if self.background_density < 0.0 {
            return Err(Error::SynthSpec(
                "background_density must be non-negative".into(),
            ));
        }
        if !(self.road_length > 10.0) {
            return Err(Error::SynthSpec("road_length must exceed 10 m".into()));
        }
        Ok(())
    }

    fn lanes(&self) -> usize {
        self.actors
            .iter()
            .map(|a| a.lane + 1)
            .max()
            .unwrap_or(0)
            .max(2)
    }

    fn road_width(&self) -> f64 {
        self.lanes() as f64 * LANE_WIDTH
    }
}

/// Exact per-actor trajectory the generator committed to.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct ActorTruth {
    pub track_id: String,
    pub category: String,
    pub size: [f64; 3],
    pub yaw: f64,
    pub velocity: [f64; 2],
    /// One center per frame.
    pub centers: Vec<[f64; 3]>,
    pub points_per_frame: usize,
}

/// Everything the oracles need: exact trajectories, the ground plane,
/// and the map extent.
#[derive(Clone, Debug, Serialize, Deserialize)]
pub struct GroundTruth {
    pub actors: Vec<ActorTruth>,
    pub ground_z: f64,
    pub map_min: [f64; 2],
    pub map_max: [f64; 2],
}

impl GroundTruth {
    pub fn bounds(&self) -> Bounds {
        Bounds::new(self.map_min, self.map_max).expect("ground-truth bounds")
    }
}

fn rect(category: &str, x0: f64, y0: f64, x1: f64, y1: f64) -> PolygonLayer {
    PolygonLayer {
        category: category.into(),
        vertices: vec![
            Vector2::new(x0, y0),
            Vector2::new(x1, y0),
            Vector2::new(x1, y1),
            Vector2::new(x0, y1),
        ],
    }
}

fn layout_layers(spec: &SynthSpec) -> PolygonLayerMap {
    let w = spec.road_width() * 0.5;
    let l = spec.road_length * 0.5;
    let sw = SIDEWALK_WIDTH;
    let layers = match spec.layout {
        RoadLayout::Straight => vec![
            rect("sidewalk", -l, w, l, w + sw),
            rect("sidewalk", -l, -w - sw, l, -w),
            rect("road", -l, -w, l, w),
        ],
        RoadLayout::Intersection => vec![
            // sidewalk segments flanking the X road, split at the Y road
            rect("sidewalk", -l, w, -w, w + sw),
            rect("sidewalk", w, w, l, w + sw),
            rect("sidewalk", -l, -w - sw, -w, -w),
            rect("sidewalk", w, -w - sw, l, -w),
            rect("road", -l, -w, l, w),
            rect("road", -w, -l, w, l),
        ],
    };
    PolygonLayerMap::new(layers).expect("layout layers")
}

fn ego_pose(spec: &SynthSpec) -> Pose {
    let w = spec.road_width() * 0.5;
    match spec.layout {
        // mid-road on lane 0, facing +X
        RoadLayout::Straight => Pose::translate(0.0, -w + LANE_WIDTH * 0.5, 0.0),
        // on the Y arm south of the crossing, facing +Y
        RoadLayout::Intersection => Pose::translate(0.0, -spec.road_length / 6.0, 0.0)
            .compose(&Pose::from_yaw(std::f64::consts::FRAC_PI_2)),
    }
}

fn sensor_calib() -> Pose {
    Pose::new([0.9, 0.0, 1.7], [0.99997, 0.0, 0.0, 0.0077]).expect("calib pose")
}

/// Sample `n` points on the box shell (both side face pairs and the top;
/// LiDAR never sees the underside), uniformly by face area, inset from
/// faces and edges.
fn shell_points(size: Vector3<f64>, n: usize, rng: &mut ChaCha8Rng) -> Vec<Point3<f64>> {
    // box-local x runs along the heading (length), y across it (width)
    let hx = size.y * 0.5 - FACE_INSET;
    let hy = size.x * 0.5 - FACE_INSET;
    let hz = size.z * 0.5 - FACE_INSET;
    // face areas: front/back, the two sides, and the top
    let areas = [
        size.x * size.z,
        size.x * size.z,
        size.y * size.z,
        size.y * size.z,
        size.x * size.y,
    ];
    let total: f64 = areas.iter().sum();
    let mut out = Vec::with_capacity(n);
    for _ in 0..n {
        let mut pick = rng.gen_range(0.0..total);
        let mut face = 0;
        for (i, a) in areas.iter().enumerate() {
            if pick < *a {
                face = i;
                break;
            }
            pick -= a;
        }
        let u = rng.gen_range(-1.0..1.0);
        let v = rng.gen_range(-1.0..1.0);
        out.push(match face {
            0 => Point3::new(hx, u * hy, v * hz),
            1 => Point3::new(-hx, u * hy, v * hz),
            2 => Point3::new(u * hx, hy, v * hz),
            3 => Point3::new(u * hx, -hy, v * hz),
            _ => Point3::new(u * hx, v * hy, hz),
        });
    }
    out
}

struct ActorState {
    obox: OrientedBox,
    velocity: Vector2<f64>,
    shell: Vec<Point3<f64>>,
    shell_attrs: Vec<(f32, f32)>,
}

/// Generate a scene, its vector map, and the exact ground truth.
/// Fully determined by the spec (including its seed).
pub fn generate(spec: &SynthSpec) -> Result<(Scene, PolygonLayerMap, GroundTruth)> {
    spec.validate()?;
    let mut rng = ChaCha8Rng::seed_from_u64(spec.seed);
    let layers = layout_layers(spec);
    let bounds = layers.bounding_rect(MAP_MARGIN)?;
    let w = spec.road_width() * 0.5;
    let half_len = spec.road_length * 0.5;

    // actor starting states, staggered along their lanes
    let usable = spec.road_length * 0.8;
    let slot = if spec.actors.is_empty() {
        usable
    } else {
        usable / spec.actors.len() as f64
    };
    let mut actors = Vec::with_capacity(spec.actors.len());
    for (i, a) in spec.actors.iter().enumerate() {
        let dir = if a.lane % 2 == 0 { 1.0 } else { -1.0 };
        let yaw = normalize_yaw(if dir > 0.0 { 0.0 } else { std::f64::consts::PI });
        let lane_y = -w + (a.lane as f64 + 0.5) * LANE_WIDTH;
        let x0 = -usable * 0.5 + (i as f64 + 0.5) * slot + rng.gen_range(-0.2..0.2) * slot;
        let x0 = x0.clamp(-half_len + 5.0, half_len - 5.0);
        let velocity = Vector2::new(quantize(a.speed * dir), 0.0);
        let center = Point3::new(
            quantize(x0),
            quantize(lane_y),
            quantize(spec.ground_z + a.size[2] * 0.5),
        );
        let obox = OrientedBox::new(
            [center.x, center.y, center.z],
            a.size,
            yaw,
            [velocity.x, velocity.y],
            a.category.clone(),
            format!("actor_{i:03}"),
        )
        .map_err(|e| Error::SynthSpec(format!("actor {i}: {e}")))?;
        let shell = shell_points(obox.size, spec.points_per_actor, &mut rng);
        let shell_attrs = (0..spec.points_per_actor)
            .map(|k| (rng.gen_range(0.0..1.0f32), (k % 32) as f32))
            .collect();
        actors.push(ActorState {
            obox,
            velocity,
            shell,
            shell_attrs,
        });
    }

    // reject actors that already overlap in the first frame
    for i in 0..actors.len() {
        for j in (i + 1)..actors.len() {
            if boxes_collide(&actors[i].obox, &actors[j].obox, 0.0)? {
                return Err(Error::SynthSpec(format!(
                    "actors {i} and {j} overlap at frame 0"
                )));
            }
        }
    }

    let ego = ego_pose(spec);
    let calib = sensor_calib();
    let sensor_to_global = ego.compose(&calib);
    let dt_us = (spec.frame_dt * 1e6).round() as i64;
    let t0: i64 = 1_700_000_000_000_000;
    let area = (bounds.max.x - bounds.min.x) * (bounds.max.y - bounds.min.y);
    let ground_count = (spec.background_density * area).round() as usize;

    let mut truth_centers: Vec<Vec<[f64; 3]>> = vec![Vec::new(); actors.len()];
    let mut frames = Vec::with_capacity(spec.num_frames);
    let mut centers: Vec<Point3<f64>> = actors.iter().map(|a| a.obox.center).collect();

    for fi in 0..spec.num_frames {
        if fi > 0 {
            let dt = dt_us as f64 / 1e6;
            for (c, a) in centers.iter_mut().zip(actors.iter()) {
                c.x += dt * a.velocity.x;
                c.y += dt * a.velocity.y;
            }
        }
        let frame_boxes: Vec<OrientedBox> = actors
            .iter()
            .zip(centers.iter())
            .map(|(a, c)| {
                let mut b = a.obox.clone();
                b.center = *c;
                b
            })
            .collect();
        for (k, c) in centers.iter().enumerate() {
            truth_centers[k].push([c.x, c.y, c.z]);
        }
        if fi > 0 {
            for i in 0..frame_boxes.len() {
                for j in (i + 1)..frame_boxes.len() {
                    if boxes_collide(&frame_boxes[i], &frame_boxes[j], 0.0)? {
                        log::warn!("synthetic actors {i} and {j} overlap at frame {fi}");
                    }
                }
            }
        }

        let mut points = Vec::with_capacity(ground_count + actors.len() * spec.points_per_actor);
        let mut placed = 0usize;
        while placed < ground_count {
            let x = rng.gen_range(bounds.min.x..bounds.max.x);
            let y = rng.gen_range(bounds.min.y..bounds.max.y);
            // keep ground returns out of actor footprints so each box
            // holds exactly its own shell points
            let covered = frame_boxes.iter().any(|b| {
                let (u, v) = b.axes_xy();
                let (hu, hv) = b.footprint_half_extents();
                let d = Vector2::new(x - b.center.x, y - b.center.y);
                d.dot(&u).abs() <= hu + 0.05 && d.dot(&v).abs() <= hv + 0.05
            });
            if covered {
                continue;
            }
            points.push(CloudPoint {
                position: Point3::new(x, y, spec.ground_z),
                intensity: rng.gen_range(0.0..0.2f32),
                ring: (placed % 32) as f32,
            });
            placed += 1;
        }
        for (a, b) in actors.iter().zip(frame_boxes.iter()) {
            let pose = b.pose();
            for (local, (intensity, ring)) in a.shell.iter().zip(a.shell_attrs.iter()) {
                points.push(CloudPoint {
                    position: pose.apply(*local),
                    intensity: *intensity,
                    ring: *ring,
                });
            }
        }
        let global = PointCloud::new(points, CloudFrame::Global)?;
        let cloud = transform_cloud(&global, &sensor_to_global, TransformDirection::ToLocal)?;
        frames.push(Frame {
            timestamp_us: t0 + fi as i64 * dt_us,
            lidar_file: format!("sweeps/frame_{fi:04}.bin"),
            cloud,
            ego_pose: ego,
            sensor_calib: calib,
            boxes: frame_boxes,
            extra: Default::default(),
        });
    }

    let scene = Scene {
        id: format!("synth_{:08x}", spec.seed),
        frames,
        map: None,
        extra: Default::default(),
    };
    let truth = GroundTruth {
        actors: actors
            .iter()
            .zip(truth_centers)
            .map(|(a, centers)| ActorTruth {
                track_id: a.obox.track_id.clone(),
                category: a.obox.category.clone(),
                size: [a.obox.size.x, a.obox.size.y, a.obox.size.z],
                yaw: a.obox.yaw,
                velocity: [a.velocity.x, a.velocity.y],
                centers,
                points_per_frame: spec.points_per_actor,
            })
            .collect(),
        ground_z: spec.ground_z,
        map_min: [bounds.min.x, bounds.min.y],
        map_max: [bounds.max.x, bounds.max.y],
    };
    Ok((scene, layers, truth))
}

/// A patchwork of `tiles_x × tiles_y` adjacent road tiles (their union is
/// one big rectangle) ringed by sidewalk. Exercises the polygon baseline
/// with a realistic many-polygon road layer.
pub fn tiled_road_layers(tiles_x: usize, tiles_y: usize, tile_size: f64) -> PolygonLayerMap {
    let mut layers = Vec::with_capacity(tiles_x * tiles_y + 4);
    let w = tiles_x as f64 * tile_size;
    let h = tiles_y as f64 * tile_size;
    let sw = SIDEWALK_WIDTH;
    layers.push(rect("sidewalk", -sw, -sw, w + sw, 0.0));
    layers.push(rect("sidewalk", -sw, h, w + sw, h + sw));
    layers.push(rect("sidewalk", -sw, 0.0, 0.0, h));
    layers.push(rect("sidewalk", w, 0.0, w + sw, h));
    for ty in 0..tiles_y {
        for tx in 0..tiles_x {
            layers.push(rect(
                "road",
                tx as f64 * tile_size,
                ty as f64 * tile_size,
                (tx + 1) as f64 * tile_size,
                (ty + 1) as f64 * tile_size,
            ));
        }
    }
    PolygonLayerMap::new(layers).expect("tiled road layers")
}
