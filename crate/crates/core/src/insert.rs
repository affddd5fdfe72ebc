//! Reference-guided insertion into a dynamic scene: reference selection,
//! position search, grounding, traffic-flow yaw alignment, and the
//! dynamic collision predicate that extrapolates the inserted box along
//! its velocity through the frame horizon.

use nalgebra::{Point3, Vector2, Vector3};
use rand::Rng;
use rand_chacha::ChaCha8Rng;
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::extract::{ExtractedObject, ObjectBank, SourceRef};
use crate::geom::{transform_cloud, OrientedBox, PointCloud, Pose, TransformDirection};
use crate::raster::{crop_and_rotate, is_road_valid, CroppedMap, RasterMap};
use crate::scene_io::Scene;

/// Candidate positions are drawn no closer than this to the reference.
pub const ANNULUS_INNER_RADIUS: f64 = 2.0;
/// Inserted-object speed cap, m/s.
pub const VELOCITY_CAP: f64 = 20.0;
/// Below this many neighborhood points the ground estimate falls back to
/// the reference box bottom.
pub const GROUND_MIN_POINTS: usize = 30;
/// Above this reference speed, motion direction overrides annotation yaw.
pub const YAW_SPEED_THRESHOLD: f64 = 0.5;

/// Inserted-object kinematics are snapped to this dyadic grid (2⁻²⁰ m)
/// so per-frame center arithmetic stays exact in f64: grid-aligned
/// centers and steps sum and subtract without rounding for any
/// coordinate below ~8000 km.
pub const KINEMATIC_GRID: f64 = 1.0 / 1_048_576.0;

/// Snap a coordinate to the kinematic grid. Negative zero is
/// canonicalized to +0.0 so quantized values serialize and compare
/// uniformly.
pub fn quantize(x: f64) -> f64 {
    (x * 1_048_576.0).round() * KINEMATIC_GRID + 0.0
}

/// Frame range the collision predicate extrapolates over.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CollisionHorizon {
    /// Through the last frame of the scene.
    All,
    /// A bounded number of frames starting at the insertion frame.
    Frames(usize),
}

impl Serialize for CollisionHorizon {
    fn serialize<S: serde::Serializer>(
        &self,
        serializer: S,
    ) -> std::result::Result<S::Ok, S::Error> {
        match self {
            CollisionHorizon::All => serializer.serialize_str("all"),
            CollisionHorizon::Frames(n) => serializer.serialize_u64(*n as u64),
        }
    }
}

impl<'de> Deserialize<'de> for CollisionHorizon {
    fn deserialize<D: serde::Deserializer<'de>>(
        deserializer: D,
    ) -> std::result::Result<Self, D::Error> {
        use serde::de::Error as _;
        let v = serde_json::Value::deserialize(deserializer)?;
        match &v {
            serde_json::Value::String(s) if s == "all" => Ok(CollisionHorizon::All),
            serde_json::Value::Number(n) => n
                .as_u64()
                .map(|n| CollisionHorizon::Frames(n as usize))
                .ok_or_else(|| D::Error::custom("horizon must be a frame count or \"all\"")),
            _ => Err(D::Error::custom("horizon must be a frame count or \"all\"")),
        }
    }
}

fn default_num_objects() -> usize {
    5
}
fn default_search_radius() -> f64 {
    10.0
}
fn default_attempts() -> usize {
    32
}
fn default_horizon() -> CollisionHorizon {
    CollisionHorizon::All
}
fn default_margin() -> f64 {
    0.5
}
fn default_frame_dt() -> f64 {
    0.5
}
fn default_insertion_frame() -> usize {
    0
}
fn default_strict_road() -> bool {
    false
}
fn default_crop_half_extent() -> f64 {
    100.0
}
fn default_ground_radius() -> f64 {
    2.0
}

/// Free parameters of a scene augmentation run. Defaults: five objects
/// per scene, a 10 m search annulus, the full-scene collision horizon,
/// and a crop sized for typical LiDAR range.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentationPlan {
    pub seed: u64,
    #[serde(default = "default_num_objects")]
    pub num_objects: usize,
    #[serde(default = "default_search_radius")]
    pub search_radius: f64,
    #[serde(default = "default_attempts")]
    pub attempts_per_reference: usize,
    #[serde(default = "default_horizon")]
    pub collision_horizon: CollisionHorizon,
    #[serde(default = "default_margin")]
    pub collision_margin: f64,
    /// Nominal inter-frame spacing, seconds; taken from manifest
    /// timestamps by `augment_scene`. Per-frame math always uses the
    /// actual consecutive timestamp deltas.
    #[serde(default = "default_frame_dt")]
    pub frame_dt: f64,
    #[serde(default = "default_insertion_frame")]
    pub insertion_frame: usize,
    #[serde(default = "default_strict_road")]
    pub strict_road: bool,
    #[serde(default = "default_crop_half_extent")]
    pub crop_half_extent: f64,
    #[serde(default = "default_ground_radius")]
    pub ground_radius: f64,
}

impl Default for AugmentationPlan {
    fn default() -> Self {
        AugmentationPlan {
            seed: 0,
            num_objects: default_num_objects(),
            search_radius: default_search_radius(),
            attempts_per_reference: default_attempts(),
            collision_horizon: default_horizon(),
            collision_margin: default_margin(),
            frame_dt: default_frame_dt(),
            insertion_frame: default_insertion_frame(),
            strict_road: default_strict_road(),
            crop_half_extent: default_crop_half_extent(),
            ground_radius: default_ground_radius(),
        }
    }
}

impl AugmentationPlan {
    // negated comparisons so NaN fails every bound
    #[allow(clippy::neg_cmp_op_on_partial_ord)]
    pub fn validate(&self) -> Result<()> {
        if self.num_objects < 1 {
            return Err(Error::Config("num_objects must be at least 1".into()));
        }
        if !(self.search_radius > 0.0) {
            return Err(Error::Config("search_radius must be positive".into()));
        }
        if self.attempts_per_reference < 1 {
            return Err(Error::Config(
                "attempts_per_reference must be at least 1".into(),
            ));
        }
        if !(self.collision_margin >= 0.0) {
            return Err(Error::Config(
                "collision_margin must be non-negative".into(),
            ));
        }
        if !(self.crop_half_extent > 0.0) {
            return Err(Error::Config("crop_half_extent must be positive".into()));
        }
        if !(self.ground_radius > 0.0) {
            return Err(Error::Config("ground_radius must be positive".into()));
        }
        Ok(())
    }

    /// Last frame index the horizon covers for a scene of `num_frames`.
    pub fn horizon_end(&self, insertion_frame: usize, num_frames: usize) -> usize {
        let last = num_frames.saturating_sub(1);
        match self.collision_horizon {
            CollisionHorizon::All => last,
            CollisionHorizon::Frames(n) => (insertion_frame + n.saturating_sub(1)).min(last),
        }
    }
}

/// A chosen insertion: which bank object, where it starts, and how it
/// moves. Center and velocity are grid-quantized so derived per-frame
/// centers obey the constant-velocity line exactly.
#[derive(Clone, Debug, PartialEq)]
pub struct Placement {
    pub bank_index: usize,
    pub source: SourceRef,
    /// Annotation id the inserted boxes will carry; assigned by the
    /// caller before [`apply_placement`].
    pub track_id: String,
    pub center0: Point3<f64>,
    pub yaw: f64,
    pub velocity: Vector2<f64>,
    pub size: Vector3<f64>,
    pub category: String,
    pub insertion_frame: usize,
}

impl Placement {
    /// Per-frame centers from the insertion frame through `end`
    /// (inclusive), by iterated addition of the per-pair displacement
    /// `dt_i · velocity`.
    pub fn centers(&self, timestamps_us: &[i64], end: usize) -> Vec<(usize, Point3<f64>)> {
        let mut out = Vec::new();
        let mut c = self.center0;
        for i in self.insertion_frame..=end.min(timestamps_us.len().saturating_sub(1)) {
            if i > self.insertion_frame {
                let dt = (timestamps_us[i] - timestamps_us[i - 1]) as f64 / 1e6;
                c = Point3::new(c.x + dt * self.velocity.x, c.y + dt * self.velocity.y, c.z);
            }
            out.push((i, c));
        }
        out
    }

    fn boxed_at(&self, center: Point3<f64>) -> OrientedBox {
        OrientedBox {
            center,
            size: self.size,
            yaw: self.yaw,
            velocity: self.velocity,
            category: self.category.clone(),
            track_id: self.track_id.clone(),
            extra: Default::default(),
        }
    }
}

/// Shift a box in the XY plane; everything else unchanged.
pub fn move_box(obox: &OrientedBox, displacement: Vector2<f64>) -> OrientedBox {
    let mut out = obox.clone();
    out.center.x += displacement.x;
    out.center.y += displacement.y;
    out
}

/// Pairwise collision test: true iff the XY footprint rectangles, each
/// grown by `margin/2` per side, intersect. Separating-axis test over the
/// four edge normals; touching edges count as intersecting.
pub fn boxes_collide(a: &OrientedBox, b: &OrientedBox, margin: f64) -> Result<bool> {
    for bx in [a, b] {
        if !(bx.size.x > 0.0 && bx.size.y > 0.0 && bx.size.z > 0.0) {
            return Err(Error::InvalidBox(bx.size.x, bx.size.y, bx.size.z));
        }
    }
    let inflate = margin * 0.5;
    let corners_a = inflated_corners(a, inflate);
    let corners_b = inflated_corners(b, inflate);
    let (au, av) = a.axes_xy();
    let (bu, bv) = b.axes_xy();
    for axis in [au, av, bu, bv] {
        let (min_a, max_a) = project(&corners_a, axis);
        let (min_b, max_b) = project(&corners_b, axis);
        if max_a < min_b || max_b < min_a {
            return Ok(false);
        }
    }
    Ok(true)
}

fn inflated_corners(obox: &OrientedBox, inflate: f64) -> [Vector2<f64>; 4] {
    let (u, v) = obox.axes_xy();
    let (hu, hv) = obox.footprint_half_extents();
    let c = Vector2::new(obox.center.x, obox.center.y);
    let du = u * (hu + inflate);
    let dv = v * (hv + inflate);
    [c - du - dv, c + du - dv, c + du + dv, c - du + dv]
}

fn project(corners: &[Vector2<f64>; 4], axis: Vector2<f64>) -> (f64, f64) {
    let mut min = f64::INFINITY;
    let mut max = f64::NEG_INFINITY;
    for c in corners {
        let s = c.dot(&axis);
        min = min.min(s);
        max = max.max(s);
    }
    (min, max)
}

/// The dynamic collision predicate: true iff some horizon frame holds an
/// annotated box that collides with the inserted box moved along its
/// velocity to that frame. Scene boxes are taken at their annotated
/// per-frame positions; only the inserted box is extrapolated. Boxes
/// sharing the placement's track id are skipped so an applied placement
/// can be re-checked against everything else.
pub fn dynamic_collision(
    scene: &Scene,
    placement: &Placement,
    plan: &AugmentationPlan,
) -> Result<bool> {
    debug_assert!(placement.insertion_frame < scene.frames.len());
    let timestamps = scene.timestamps_us();
    let end = plan.horizon_end(placement.insertion_frame, scene.frames.len());
    for (i, center) in placement.centers(&timestamps, end) {
        let moved = placement.boxed_at(center);
        for other in &scene.frames[i].boxes {
            if !placement.track_id.is_empty() && other.track_id == placement.track_id {
                continue;
            }
            if boxes_collide(&moved, other, plan.collision_margin)? {
                return Ok(true);
            }
        }
    }
    Ok(false)
}

/// Local ground estimate: the 5th-percentile z of global points within
/// `radius` of `xy`. Falls back to `reference_bottom` when fewer than
/// [`GROUND_MIN_POINTS`] neighbors exist; with no fallback either, the
/// position is rejected. Elevated-only neighborhoods (bridges) yield the
/// percentile of what is there — a documented limitation.
pub fn ground_height(
    cloud_global: &PointCloud,
    xy: Vector2<f64>,
    radius: f64,
    reference_bottom: Option<f64>,
) -> Result<f64> {
    let r2 = radius * radius;
    let mut zs: Vec<f64> = cloud_global
        .points()
        .iter()
        .filter(|p| {
            let dx = p.position.x - xy.x;
            let dy = p.position.y - xy.y;
            dx * dx + dy * dy <= r2
        })
        .map(|p| p.position.z)
        .collect();
    if zs.len() < GROUND_MIN_POINTS {
        return reference_bottom.ok_or(Error::GroundingFailure(xy.x, xy.y));
    }
    zs.sort_by(|a, b| a.partial_cmp(b).unwrap());
    let rank = 0.05 * (zs.len() - 1) as f64;
    let lo = rank.floor() as usize;
    let hi = rank.ceil() as usize;
    let frac = rank - lo as f64;
    Ok(zs[lo] + frac * (zs[hi] - zs[lo]))
}

/// Heading for an inserted object near `reference`: the reference's
/// motion direction when it is moving faster than
/// [`YAW_SPEED_THRESHOLD`], otherwise its annotation yaw.
pub fn align_yaw(reference: &OrientedBox) -> f64 {
    if reference.velocity.norm() > YAW_SPEED_THRESHOLD {
        reference.velocity.y.atan2(reference.velocity.x)
    } else {
        reference.yaw
    }
}

/// Why candidate positions were rejected during search.
#[derive(Clone, Copy, Debug, Default, PartialEq, Eq, Serialize, Deserialize)]
pub struct RejectionTally {
    pub road: usize,
    pub collision: usize,
    pub grounding: usize,
    pub no_reference: usize,
}

impl RejectionTally {
    pub fn absorb(&mut self, other: &RejectionTally) {
        self.road += other.road;
        self.collision += other.collision;
        self.grounding += other.grounding;
        self.no_reference += other.no_reference;
    }
}

/// Result of one position search: the accepted placement, if any, plus
/// the per-reason tally of rejected candidates.
#[derive(Clone, Debug)]
pub struct SearchOutcome {
    pub placement: Option<Placement>,
    pub rejections: RejectionTally,
}

/// Search for an insertion position for `object` in frame `frame_idx`.
///
/// References are visited in seeded random order without replacement;
/// for each, up to `attempts_per_reference` candidate centers are drawn
/// uniformly (by area) in the annulus between [`ANNULUS_INNER_RADIUS`]
/// and `search_radius` around the reference. A candidate is accepted
/// when its footprint is road-valid, the dynamic collision predicate is
/// clear over the horizon, and a ground height can be established.
/// Returns no placement once every reference is exhausted.
pub fn search_insertion(
    scene: &Scene,
    frame_idx: usize,
    object: &ExtractedObject,
    bank_index: usize,
    map: &CroppedMap,
    plan: &AugmentationPlan,
    rng: &mut ChaCha8Rng,
) -> Result<SearchOutcome> {
    let mut rejections = RejectionTally::default();
    let frame = &scene.frames[frame_idx];
    if frame.boxes.is_empty() {
        rejections.no_reference += 1;
        return Ok(SearchOutcome {
            placement: None,
            rejections,
        });
    }

    let global_cloud = transform_cloud(
        &frame.cloud,
        &frame.sensor_to_global(),
        TransformDirection::ToGlobal,
    )?;

    let mut order: Vec<usize> = (0..frame.boxes.len()).collect();
    for i in (1..order.len()).rev() {
        let j = rng.gen_range(0..=i);
        order.swap(i, j);
    }

    let inner = ANNULUS_INNER_RADIUS.min(plan.search_radius * 0.5);
    let half_height = object.template.half_height();
    let timestamps = scene.timestamps_us();
    let end = plan.horizon_end(frame_idx, scene.frames.len());

    for &ref_idx in &order {
        let reference = &frame.boxes[ref_idx];
        let yaw = align_yaw(reference);
        let speed = object.source_speed.min(VELOCITY_CAP);
        let velocity = Vector2::new(quantize(speed * yaw.cos()), quantize(speed * yaw.sin()));
        for _ in 0..plan.attempts_per_reference {
            let r = (rng.gen_range(inner * inner..=plan.search_radius * plan.search_radius)).sqrt();
            let theta = rng.gen_range(0.0..std::f64::consts::TAU);
            let cx = quantize(reference.center.x + r * theta.cos());
            let cy = quantize(reference.center.y + r * theta.sin());

            let mut candidate = Placement {
                bank_index,
                source: object.source.clone(),
                track_id: String::new(),
                center0: Point3::new(cx, cy, 0.0),
                yaw,
                velocity,
                size: object.template.size,
                category: object.template.category.clone(),
                insertion_frame: frame_idx,
            };

            let road_ok = if plan.strict_road {
                candidate
                    .centers(&timestamps, end)
                    .iter()
                    .all(|(_, c)| is_road_valid(&candidate.boxed_at(*c), map))
            } else {
                is_road_valid(&candidate.boxed_at(candidate.center0), map)
            };
            if !road_ok {
                rejections.road += 1;
                continue;
            }

            if dynamic_collision(scene, &candidate, plan)? {
                rejections.collision += 1;
                continue;
            }

            let ground = match ground_height(
                &global_cloud,
                Vector2::new(cx, cy),
                plan.ground_radius,
                Some(reference.bottom_z()),
            ) {
                Ok(z) => z,
                Err(Error::GroundingFailure(..)) => {
                    rejections.grounding += 1;
                    continue;
                }
                Err(e) => return Err(e),
            };
            candidate.center0.z = quantize(ground + half_height);

            return Ok(SearchOutcome {
                placement: Some(candidate),
                rejections,
            });
        }
    }
    Ok(SearchOutcome {
        placement: None,
        rejections,
    })
}

/// Materialize a placement: for every horizon frame, the object's points
/// are posed at that frame's center and appended to the frame's cloud
/// (in sensor coordinates), and a new annotation box is appended to the
/// frame's box list. Point count grows by exactly the object's size in
/// each touched frame.
pub fn apply_placement(
    mut scene: Scene,
    placement: &Placement,
    object: &ExtractedObject,
    plan: &AugmentationPlan,
) -> Result<Scene> {
    debug_assert!(
        !placement.track_id.is_empty(),
        "caller must assign a track id"
    );
    let timestamps = scene.timestamps_us();
    let end = plan.horizon_end(placement.insertion_frame, scene.frames.len());
    for (i, center) in placement.centers(&timestamps, end) {
        let frame = &mut scene.frames[i];
        let pose = Pose::from_parts(
            center.coords,
            nalgebra::UnitQuaternion::from_axis_angle(&Vector3::z_axis(), placement.yaw),
        );
        let global = transform_cloud(&object.points, &pose, TransformDirection::ToGlobal)?;
        let sensor_local = transform_cloud(
            &global,
            &frame.sensor_to_global(),
            TransformDirection::ToLocal,
        )?;
        frame.cloud.extend(&sensor_local)?;
        frame.boxes.push(placement.boxed_at(center));
    }
    Ok(scene)
}

/// One inserted object as recorded in the augmentation report.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct PlacementRecord {
    pub track_id: String,
    pub bank_index: usize,
    pub bank_source: SourceRef,
    pub category: String,
    pub insertion_frame: usize,
    pub center0: [f64; 3],
    pub yaw: f64,
    pub velocity: [f64; 2],
    pub size_wlh: [f64; 3],
    pub num_points: usize,
}

impl PlacementRecord {
    pub fn from_placement(p: &Placement, num_points: usize) -> Self {
        PlacementRecord {
            track_id: p.track_id.clone(),
            bank_index: p.bank_index,
            bank_source: p.source.clone(),
            category: p.category.clone(),
            insertion_frame: p.insertion_frame,
            center0: [p.center0.x, p.center0.y, p.center0.z],
            yaw: p.yaw,
            velocity: [p.velocity.x, p.velocity.y],
            size_wlh: [p.size.x, p.size.y, p.size.z],
            num_points,
        }
    }

    pub fn to_placement(&self) -> Placement {
        Placement {
            bank_index: self.bank_index,
            source: self.bank_source.clone(),
            track_id: self.track_id.clone(),
            center0: Point3::new(self.center0[0], self.center0[1], self.center0[2]),
            yaw: self.yaw,
            velocity: Vector2::new(self.velocity[0], self.velocity[1]),
            size: Vector3::new(self.size_wlh[0], self.size_wlh[1], self.size_wlh[2]),
            category: self.category.clone(),
            insertion_frame: self.insertion_frame,
        }
    }
}

/// Outcome of augmenting one scene, echoing the effective plan for
/// reproducibility.
#[derive(Clone, Debug, PartialEq, Serialize, Deserialize)]
pub struct AugmentReport {
    pub scene_id: String,
    pub requested: usize,
    pub placements: Vec<PlacementRecord>,
    pub failures: usize,
    pub rejections: RejectionTally,
    pub plan: AugmentationPlan,
}

/// Augment one scene: draw `num_objects` bank entries (seeded; without
/// replacement when the bank is large enough), search a position for
/// each at the plan's insertion frame, and apply every successful
/// placement. All randomness flows from one generator seeded with
/// `plan.seed`.
pub fn augment_scene(
    scene: Scene,
    bank: &ObjectBank,
    map_source: &RasterMap,
    plan: &AugmentationPlan,
) -> Result<(Scene, AugmentReport)> {
    plan.validate()?;
    if bank.is_empty() {
        return Err(Error::Config("object bank is empty".into()));
    }
    if plan.insertion_frame >= scene.frames.len() {
        return Err(Error::Config(format!(
            "insertion_frame {} out of range for a {}-frame scene",
            plan.insertion_frame,
            scene.frames.len()
        )));
    }
    let mut effective = plan.clone();
    effective.frame_dt = scene.frame_dt();

    let mut rng = <ChaCha8Rng as rand::SeedableRng>::seed_from_u64(plan.seed);
    let crop = crop_and_rotate(
        map_source,
        &scene.frames[plan.insertion_frame].ego_pose,
        plan.crop_half_extent,
    )?;

    let draws: Vec<usize> = if bank.len() >= plan.num_objects {
        let mut idx: Vec<usize> = (0..bank.len()).collect();
        for i in 0..plan.num_objects {
            let j = rng.gen_range(i..idx.len());
            idx.swap(i, j);
        }
        idx.truncate(plan.num_objects);
        idx
    } else {
        (0..plan.num_objects)
            .map(|_| rng.gen_range(0..bank.len()))
            .collect()
    };

    let mut scene = scene;
    let mut placements = Vec::new();
    let mut rejections = RejectionTally::default();
    let mut failures = 0usize;
    for bank_index in draws {
        let object = &bank.entries[bank_index];
        let outcome = search_insertion(
            &scene,
            plan.insertion_frame,
            object,
            bank_index,
            &crop,
            &effective,
            &mut rng,
        )?;
        rejections.absorb(&outcome.rejections);
        match outcome.placement {
            Some(mut placement) => {
                placement.track_id = fresh_track_id(&scene, placements.len());
                scene = apply_placement(scene, &placement, object, &effective)?;
                placements.push(PlacementRecord::from_placement(
                    &placement,
                    object.num_points(),
                ));
            }
            None => failures += 1,
        }
    }
    let report = AugmentReport {
        scene_id: scene.id.clone(),
        requested: plan.num_objects,
        placements,
        failures,
        rejections,
        plan: effective,
    };
    Ok((scene, report))
}

/// A track id not used anywhere in the scene, derived from the insertion
/// ordinal.
pub fn fresh_track_id(scene: &Scene, ordinal: usize) -> String {
    let mut n = ordinal;
    loop {
        let candidate = format!("ins_{n:03}");
        let taken = scene
            .frames
            .iter()
            .any(|f| f.boxes.iter().any(|b| b.track_id == candidate));
        if !taken {
            return candidate;
        }
        n += 1;
    }
}
