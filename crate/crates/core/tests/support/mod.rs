//! Shared oracle implementations for the integration tests. Everything
//! here is deliberately written from first principles — explicit
//! rotation matrices, face planes, dense sampling — so it shares no code
//! path with the library it checks.

// each test target pulls in its own subset of the oracles
#![allow(dead_code)]

use daug_core::geom::OrientedBox;
use nalgebra::{Point3, Vector2};

/// 3x3 rotation about +Z as an explicit matrix, kept separate from the
/// quaternion machinery under test.
pub fn yaw_matrix(yaw: f64) -> [[f64; 3]; 3] {
    let (s, c) = yaw.sin_cos();
    [[c, -s, 0.0], [s, c, 0.0], [0.0, 0.0, 1.0]]
}

pub fn mat_apply(m: &[[f64; 3]; 3], v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

/// Quaternion (w,x,y,z) to rotation matrix by the textbook formula.
pub fn quat_matrix(q: [f64; 4]) -> [[f64; 3]; 3] {
    let [w, x, y, z] = q;
    [
        [
            1.0 - 2.0 * (y * y + z * z),
            2.0 * (x * y - w * z),
            2.0 * (x * z + w * y),
        ],
        [
            2.0 * (x * y + w * z),
            1.0 - 2.0 * (x * x + z * z),
            2.0 * (y * z - w * x),
        ],
        [
            2.0 * (x * z - w * y),
            2.0 * (y * z + w * x),
            1.0 - 2.0 * (x * x + y * y),
        ],
    ]
}

/// 4x4 homogeneous transform assembled from a rotation matrix and a
/// translation.
pub type Mat4 = [[f64; 4]; 4];

pub fn homogeneous(rot: [[f64; 3]; 3], t: [f64; 3]) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for r in 0..3 {
        for c in 0..3 {
            m[r][c] = rot[r][c];
        }
        m[r][3] = t[r];
    }
    m[3][3] = 1.0;
    m
}

pub fn mat4_mul(a: &Mat4, b: &Mat4) -> Mat4 {
    let mut m = [[0.0; 4]; 4];
    for r in 0..4 {
        for c in 0..4 {
            for k in 0..4 {
                m[r][c] += a[r][k] * b[k][c];
            }
        }
    }
    m
}

pub fn mat4_apply(m: &Mat4, p: [f64; 3]) -> [f64; 3] {
    let h = [p[0], p[1], p[2], 1.0];
    let mut out = [0.0; 3];
    for r in 0..3 {
        out[r] = (0..4).map(|k| m[r][k] * h[k]).sum();
    }
    out
}

/// One face of an oriented box: a point on the face plane plus the
/// outward normal.
pub struct Face {
    pub point: [f64; 3],
    pub normal: [f64; 3],
}

/// The six face planes of a box, built from an explicit yaw matrix.
/// Box-local x runs along the heading (length), y across it (width).
pub fn box_faces(b: &OrientedBox) -> [Face; 6] {
    let rot = yaw_matrix(b.yaw);
    let c = [b.center.x, b.center.y, b.center.z];
    let half = [b.size.y * 0.5, b.size.x * 0.5, b.size.z * 0.5];
    let mut faces = Vec::with_capacity(6);
    for axis in 0..3 {
        for sign in [1.0f64, -1.0] {
            let mut local_n = [0.0; 3];
            local_n[axis] = sign;
            let n = mat_apply(&rot, local_n);
            let mut local_p = [0.0; 3];
            local_p[axis] = sign * half[axis];
            let fp = mat_apply(&rot, local_p);
            faces.push(Face {
                point: [c[0] + fp[0], c[1] + fp[1], c[2] + fp[2]],
                normal: n,
            });
        }
    }
    faces.try_into().map_err(|_| ()).unwrap()
}

/// The direction-vector containment oracle: for each face, the
/// perpendicular direction from the query point to the face plane must
/// match the direction from the box center (which always points along
/// the outward normal). Points within `eps` of a plane count as inside.
pub fn face_oracle_inside(p: Point3<f64>, b: &OrientedBox, eps: f64) -> bool {
    box_faces(b).iter().all(|f| {
        let d = [f.point[0] - p.x, f.point[1] - p.y, f.point[2] - p.z];
        let dist = d[0] * f.normal[0] + d[1] * f.normal[1] + d[2] * f.normal[2];
        dist >= -eps
    })
}

/// Signed distance from the query point to the nearest face plane
/// (positive inside). Used to carve out the boundary band the agreement
/// checks exclude.
pub fn min_face_distance(p: Point3<f64>, b: &OrientedBox) -> f64 {
    box_faces(b)
        .iter()
        .map(|f| {
            let d = [f.point[0] - p.x, f.point[1] - p.y, f.point[2] - p.z];
            d[0] * f.normal[0] + d[1] * f.normal[1] + d[2] * f.normal[2]
        })
        .fold(f64::INFINITY, f64::min)
}

/// XY footprint corners via the explicit yaw matrix.
pub fn rect_corners(b: &OrientedBox) -> [Vector2<f64>; 4] {
    let rot = yaw_matrix(b.yaw);
    let (hl, hw) = (b.size.y * 0.5, b.size.x * 0.5);
    let mut out = [Vector2::zeros(); 4];
    for (i, (su, sv)) in [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
        .iter()
        .enumerate()
    {
        let p = mat_apply(&rot, [su * hl, sv * hw, 0.0]);
        out[i] = Vector2::new(b.center.x + p[0], b.center.y + p[1]);
    }
    out
}

/// Point-in-rectangle for the XY footprint, boundary inclusive.
pub fn rect_contains(b: &OrientedBox, p: Vector2<f64>) -> bool {
    let rot = yaw_matrix(-b.yaw);
    let d = mat_apply(&rot, [p.x - b.center.x, p.y - b.center.y, 0.0]);
    d[0].abs() <= b.size.y * 0.5 && d[1].abs() <= b.size.x * 0.5
}

/// Dense-sampling collision oracle: walk a `step` grid over each
/// rectangle and report a collision when any sample lands inside the
/// other. Far-apart pairs short-circuit through a circumradius bound.
pub fn sampling_collides(a: &OrientedBox, b: &OrientedBox, step: f64) -> bool {
    let ra = (a.size.x * a.size.x + a.size.y * a.size.y).sqrt() * 0.5;
    let rb = (b.size.x * b.size.x + b.size.y * b.size.y).sqrt() * 0.5;
    let d = Vector2::new(a.center.x - b.center.x, a.center.y - b.center.y).norm();
    if d > ra + rb + step {
        return false;
    }
    grid_hits(a, b, step) || grid_hits(b, a, step)
}

fn grid_hits(src: &OrientedBox, dst: &OrientedBox, step: f64) -> bool {
    let rot = yaw_matrix(src.yaw);
    let (hl, hw) = (src.size.y * 0.5, src.size.x * 0.5);
    let nu = (2.0 * hl / step).ceil() as usize + 1;
    let nv = (2.0 * hw / step).ceil() as usize + 1;
    for iu in 0..=nu {
        let u = -hl + (2.0 * hl) * iu as f64 / nu as f64;
        for iv in 0..=nv {
            let v = -hw + (2.0 * hw) * iv as f64 / nv as f64;
            let p = mat_apply(&rot, [u, v, 0.0]);
            if rect_contains(dst, Vector2::new(src.center.x + p[0], src.center.y + p[1])) {
                return true;
            }
        }
    }
    false
}

/// Signed separation between two footprints measured by projection onto
/// the four edge normals: positive = a gap at least that wide exists,
/// negative = every axis overlaps by at least that much.
pub fn projection_gap(a: &OrientedBox, b: &OrientedBox) -> f64 {
    let ca = rect_corners(a);
    let cb = rect_corners(b);
    let mut axes = Vec::with_capacity(4);
    for c in [&ca, &cb] {
        let e0 = c[1] - c[0];
        let e1 = c[3] - c[0];
        axes.push(Vector2::new(-e0.y, e0.x).normalize());
        axes.push(Vector2::new(-e1.y, e1.x).normalize());
    }
    let mut gap = f64::NEG_INFINITY;
    for axis in axes {
        let proj = |cs: &[Vector2<f64>; 4]| {
            let mut lo = f64::INFINITY;
            let mut hi = f64::NEG_INFINITY;
            for p in cs {
                let s = p.dot(&axis);
                lo = lo.min(s);
                hi = hi.max(s);
            }
            (lo, hi)
        };
        let (la, ha) = proj(&ca);
        let (lb, hb) = proj(&cb);
        gap = gap.max((lb - ha).max(la - hb));
    }
    gap
}
