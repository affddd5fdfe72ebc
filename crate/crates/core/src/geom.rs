//! Rigid-body pose algebra, oriented boxes, point clouds, and the
//! point-in-box containment test used to cut object points out of a frame.

use nalgebra::{Point3, Quaternion, UnitQuaternion, Vector2, Vector3};

use crate::error::{Error, Result};

/// Boundary points within this distance of a box face count as inside.
pub const CONTAINMENT_EPS: f64 = 1e-6;

/// A rigid transform: rotation followed by translation.
///
/// Quaternions are stored in (w, x, y, z) order and normalized on
/// construction; annotation files carry rounding noise, so a non-unit
/// input is repaired rather than rejected (only a zero norm is an error).
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct Pose {
    translation: Vector3<f64>,
    rotation: UnitQuaternion<f64>,
}

impl Pose {
    pub fn new(translation: [f64; 3], rotation_wxyz: [f64; 4]) -> Result<Self> {
        let [w, x, y, z] = rotation_wxyz;
        if !(w.is_finite() && x.is_finite() && y.is_finite() && z.is_finite()) {
            return Err(Error::DataIntegrity(
                "non-finite quaternion component".into(),
            ));
        }
        let t = Vector3::new(translation[0], translation[1], translation[2]);
        if !(t.x.is_finite() && t.y.is_finite() && t.z.is_finite()) {
            return Err(Error::DataIntegrity(
                "non-finite translation component".into(),
            ));
        }
        let q = Quaternion::new(w, x, y, z);
        if q.norm() < 1e-12 {
            return Err(Error::DataIntegrity(
                "rotation quaternion has zero norm".into(),
            ));
        }
        Ok(Pose {
            translation: t,
            rotation: UnitQuaternion::from_quaternion(q),
        })
    }

    pub fn from_parts(translation: Vector3<f64>, rotation: UnitQuaternion<f64>) -> Self {
        Pose {
            translation,
            rotation,
        }
    }

    pub fn identity() -> Self {
        Pose {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::identity(),
        }
    }

    /// Pure translation.
    pub fn translate(x: f64, y: f64, z: f64) -> Self {
        Pose {
            translation: Vector3::new(x, y, z),
            rotation: UnitQuaternion::identity(),
        }
    }

    /// Pure rotation about global +Z.
    pub fn from_yaw(yaw: f64) -> Self {
        Pose {
            translation: Vector3::zeros(),
            rotation: UnitQuaternion::from_axis_angle(&Vector3::z_axis(), yaw),
        }
    }

    pub fn translation(&self) -> Vector3<f64> {
        self.translation
    }

    pub fn rotation(&self) -> UnitQuaternion<f64> {
        self.rotation
    }

    pub fn rotation_wxyz(&self) -> [f64; 4] {
        let q = self.rotation.quaternion();
        [q.w, q.i, q.j, q.k]
    }

    /// Heading about +Z extracted from the rotation.
    pub fn yaw(&self) -> f64 {
        self.rotation.euler_angles().2
    }

    /// `self ∘ inner`: applying the result equals applying `inner`, then `self`.
    pub fn compose(&self, inner: &Pose) -> Pose {
        Pose {
            translation: self.rotation * inner.translation + self.translation,
            rotation: self.rotation * inner.rotation,
        }
    }

    pub fn invert(&self) -> Pose {
        let inv_rot = self.rotation.inverse();
        Pose {
            translation: -(inv_rot * self.translation),
            rotation: inv_rot,
        }
    }

    /// R·p + t
    pub fn apply(&self, p: Point3<f64>) -> Point3<f64> {
        self.rotation * p + self.translation
    }

    /// R⁻¹·(p − t)
    pub fn apply_inverse(&self, p: Point3<f64>) -> Point3<f64> {
        self.rotation
            .inverse_transform_point(&Point3::from(p - self.translation))
    }
}

/// Normalize an angle to [-π, π). Values already in range pass through
/// bit-identical.
pub fn normalize_yaw(yaw: f64) -> f64 {
    use std::f64::consts::PI;
    if (-PI..PI).contains(&yaw) {
        return yaw;
    }
    let two_pi = 2.0 * PI;
    let mut y = (yaw + PI).rem_euclid(two_pi) - PI;
    if y >= PI {
        y -= two_pi;
    }
    y
}

/// A yaw-only oriented box in the global frame.
///
/// `size` is (width, length, height); length runs along the heading axis
/// given by `yaw`, width across it. Velocity is the XY ground velocity
/// in m/s. `extra` carries annotation keys outside the schema so
/// manifests round-trip losslessly.
#[derive(Clone, Debug, PartialEq)]
pub struct OrientedBox {
    pub center: Point3<f64>,
    pub size: Vector3<f64>,
    pub yaw: f64,
    pub velocity: Vector2<f64>,
    pub category: String,
    pub track_id: String,
    pub extra: std::collections::BTreeMap<String, serde_json::Value>,
}

impl OrientedBox {
    pub fn new(
        center: [f64; 3],
        size_wlh: [f64; 3],
        yaw: f64,
        velocity: [f64; 2],
        category: impl Into<String>,
        track_id: impl Into<String>,
    ) -> Result<Self> {
        let [w, l, h] = size_wlh;
        if !(w > 0.0 && l > 0.0 && h > 0.0) || !(w.is_finite() && l.is_finite() && h.is_finite()) {
            return Err(Error::InvalidBox(w, l, h));
        }
        let finite = center.iter().all(|v| v.is_finite())
            && velocity.iter().all(|v| v.is_finite())
            && yaw.is_finite();
        if !finite {
            return Err(Error::DataIntegrity("non-finite box field".into()));
        }
        Ok(OrientedBox {
            center: Point3::new(center[0], center[1], center[2]),
            size: Vector3::new(w, l, h),
            yaw: normalize_yaw(yaw),
            velocity: Vector2::new(velocity[0], velocity[1]),
            category: category.into(),
            track_id: track_id.into(),
            extra: Default::default(),
        })
    }

    /// Footprint half extents (along heading, across heading) = (l/2, w/2).
    pub fn footprint_half_extents(&self) -> (f64, f64) {
        (self.size.y * 0.5, self.size.x * 0.5)
    }

    pub fn half_height(&self) -> f64 {
        self.size.z * 0.5
    }

    /// Unit axes of the box footprint in the global XY plane:
    /// the heading axis and its left-hand perpendicular.
    pub fn axes_xy(&self) -> (Vector2<f64>, Vector2<f64>) {
        let (sin, cos) = self.yaw.sin_cos();
        (Vector2::new(cos, sin), Vector2::new(-sin, cos))
    }

    /// The four footprint corners in the global XY plane.
    pub fn corners_xy(&self) -> [Vector2<f64>; 4] {
        let (u, v) = self.axes_xy();
        let (hu, hv) = self.footprint_half_extents();
        let c = Vector2::new(self.center.x, self.center.y);
        let du = u * hu;
        let dv = v * hv;
        [c - du - dv, c + du - dv, c + du + dv, c - du + dv]
    }

    pub fn bottom_z(&self) -> f64 {
        self.center.z - self.size.z * 0.5
    }

    /// Pose mapping box-local coordinates into the global frame.
    pub fn pose(&self) -> Pose {
        Pose::from_parts(
            self.center.coords,
            UnitQuaternion::from_axis_angle(&Vector3::z_axis(), self.yaw),
        )
    }

    fn validate(&self) -> Result<()> {
        if !(self.size.x > 0.0 && self.size.y > 0.0 && self.size.z > 0.0) {
            return Err(Error::InvalidBox(self.size.x, self.size.y, self.size.z));
        }
        Ok(())
    }
}

/// Coordinate frame a cloud currently lives in. `Local` covers both the
/// sensor frame of a sweep and the box frame of an extracted object.
#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum CloudFrame {
    Local,
    Global,
}

impl CloudFrame {
    pub fn name(self) -> &'static str {
        match self {
            CloudFrame::Local => "local",
            CloudFrame::Global => "global",
        }
    }
}

/// One LiDAR return. Positions are kept in f64 so pose chains do not
/// lose precision; intensity and ring carry the on-disk f32 values.
#[derive(Clone, Copy, Debug, PartialEq)]
pub struct CloudPoint {
    pub position: Point3<f64>,
    pub intensity: f32,
    pub ring: f32,
}

#[derive(Clone, Debug, PartialEq)]
pub struct PointCloud {
    points: Vec<CloudPoint>,
    frame: CloudFrame,
}

impl PointCloud {
    pub fn new(points: Vec<CloudPoint>, frame: CloudFrame) -> Result<Self> {
        if let Some(bad) = points.iter().position(|p| !is_finite_point(p)) {
            return Err(Error::DataIntegrity(format!(
                "non-finite coordinates at point index {bad}"
            )));
        }
        Ok(PointCloud { points, frame })
    }

    pub fn empty(frame: CloudFrame) -> Self {
        PointCloud {
            points: Vec::new(),
            frame,
        }
    }

    pub fn frame(&self) -> CloudFrame {
        self.frame
    }

    pub fn points(&self) -> &[CloudPoint] {
        &self.points
    }

    pub fn len(&self) -> usize {
        self.points.len()
    }

    pub fn is_empty(&self) -> bool {
        self.points.is_empty()
    }

    /// Clone of the selected records, same frame tag.
    pub fn select(&self, indices: &[usize]) -> PointCloud {
        PointCloud {
            points: indices.iter().map(|&i| self.points[i]).collect(),
            frame: self.frame,
        }
    }

    pub fn extend(&mut self, other: &PointCloud) -> Result<()> {
        if self.frame != other.frame {
            return Err(Error::FrameMismatch {
                expected: self.frame.name(),
                found: other.frame.name(),
            });
        }
        self.points.extend_from_slice(&other.points);
        Ok(())
    }
}

fn is_finite_point(p: &CloudPoint) -> bool {
    p.position.x.is_finite()
        && p.position.y.is_finite()
        && p.position.z.is_finite()
        && p.intensity.is_finite()
        && p.ring.is_finite()
}

#[derive(Clone, Copy, Debug, PartialEq, Eq)]
pub enum TransformDirection {
    ToGlobal,
    ToLocal,
}

/// Apply `pose` to every point of the cloud, flipping the frame tag.
///
/// `ToGlobal` maps p ↦ R·p + t and requires a local cloud; `ToLocal`
/// maps p ↦ R⁻¹·(p − t) and requires a global one. Intensity and ring
/// pass through untouched.
pub fn transform_cloud(
    cloud: &PointCloud,
    pose: &Pose,
    direction: TransformDirection,
) -> Result<PointCloud> {
    let (expected, target) = match direction {
        TransformDirection::ToGlobal => (CloudFrame::Local, CloudFrame::Global),
        TransformDirection::ToLocal => (CloudFrame::Global, CloudFrame::Local),
    };
    if cloud.frame != expected {
        return Err(Error::FrameMismatch {
            expected: expected.name(),
            found: cloud.frame.name(),
        });
    }
    let bad: Vec<usize> = cloud
        .points
        .iter()
        .enumerate()
        .filter(|(_, p)| !is_finite_point(p))
        .map(|(i, _)| i)
        .collect();
    if !bad.is_empty() {
        return Err(Error::DataIntegrity(format!(
            "non-finite coordinates at point indices {bad:?}"
        )));
    }
    // identity pose: coordinates pass through bytewise (quaternion
    // rotation would still rewrite signed zeros)
    if *pose == Pose::identity() {
        return Ok(PointCloud {
            points: cloud.points.clone(),
            frame: target,
        });
    }
    let points = cloud
        .points
        .iter()
        .map(|p| CloudPoint {
            position: match direction {
                TransformDirection::ToGlobal => pose.apply(p.position),
                TransformDirection::ToLocal => pose.apply_inverse(p.position),
            },
            intensity: p.intensity,
            ring: p.ring,
        })
        .collect();
    Ok(PointCloud {
        points,
        frame: target,
    })
}

/// Containment test against the six faces of an oriented box.
///
/// For each face, the perpendicular direction from `p` to the face plane
/// must point the same way as the direction from the box center — which
/// holds exactly when the point's signed offset along the face's axis has
/// not crossed the face. Points within `eps` of a face count as inside.
pub fn point_in_box(p: Point3<f64>, obox: &OrientedBox, eps: f64) -> Result<bool> {
    obox.validate()?;
    let (u, v) = obox.axes_xy();
    let (hu, hv) = obox.footprint_half_extents();
    let d = p - obox.center;
    let offsets = [
        Vector2::new(d.x, d.y).dot(&u),
        Vector2::new(d.x, d.y).dot(&v),
        d.z,
    ];
    let bounds = [hu, hv, obox.half_height()];
    // Each axis carries a face pair at ±bound; the sign of (bound − s)
    // and (bound + s) is the direction comparison for the two faces.
    for (s, h) in offsets.iter().zip(bounds.iter()) {
        if h - s < -eps || h + s < -eps {
            return Ok(false);
        }
    }
    Ok(true)
}

/// Indices of all cloud points inside the box, in cloud order.
pub fn points_in_box(cloud: &PointCloud, obox: &OrientedBox) -> Result<Vec<usize>> {
    if cloud.frame() != CloudFrame::Global {
        return Err(Error::FrameMismatch {
            expected: "global",
            found: cloud.frame().name(),
        });
    }
    obox.validate()?;
    let mut out = Vec::new();
    for (i, p) in cloud.points().iter().enumerate() {
        if point_in_box(p.position, obox, CONTAINMENT_EPS)? {
            out.push(i);
        }
    }
    Ok(out)
}
