//! Bit-exact persistence: point-cloud binaries, scene manifests, raster
//! maps, and polygon layer files. Readers reject malformed data rather
//! than repairing it.

use std::collections::BTreeMap;
use std::fs;
use std::io::Write;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};
use serde_json::Value;

use crate::error::{Error, Result};
use crate::geom::{CloudFrame, CloudPoint, OrientedBox, PointCloud, Pose};
use crate::raster::{PolygonLayer, PolygonLayerMap, RasterMap};

/// Bytes per point record: five little-endian f32 (x, y, z, intensity, ring).
pub const RECORD_SIZE: usize = 20;

/// One LiDAR sweep with its poses and global-frame annotations.
#[derive(Clone, Debug)]
pub struct Frame {
    pub timestamp_us: i64,
    /// Path of the sweep binary, relative to the manifest.
    pub lidar_file: String,
    /// Sensor-local cloud.
    pub cloud: PointCloud,
    pub ego_pose: Pose,
    pub sensor_calib: Pose,
    pub boxes: Vec<OrientedBox>,
    pub extra: BTreeMap<String, Value>,
}

impl Frame {
    /// Pose mapping sensor-local coordinates to the global frame.
    pub fn sensor_to_global(&self) -> Pose {
        self.ego_pose.compose(&self.sensor_calib)
    }
}

#[derive(Clone, Debug, Serialize, Deserialize, PartialEq)]
pub struct MapRef {
    pub grid_file: String,
    pub meta_file: String,
}

/// An ordered frame sequence with a reference to its semantic map.
#[derive(Clone, Debug)]
pub struct Scene {
    pub id: String,
    pub frames: Vec<Frame>,
    pub map: Option<MapRef>,
    pub extra: BTreeMap<String, Value>,
}

impl Scene {
    pub fn timestamps_us(&self) -> Vec<i64> {
        self.frames.iter().map(|f| f.timestamp_us).collect()
    }

    /// Median inter-frame spacing in seconds; 0.0 for a single frame.
    pub fn frame_dt(&self) -> f64 {
        if self.frames.len() < 2 {
            return 0.0;
        }
        let mut dts: Vec<i64> = self
            .frames
            .windows(2)
            .map(|w| w[1].timestamp_us - w[0].timestamp_us)
            .collect();
        dts.sort_unstable();
        dts[dts.len() / 2] as f64 / 1e6
    }

    pub fn validate(&self) -> Result<()> {
        if self.frames.is_empty() {
            return Err(Error::Schema(format!("scene '{}' has no frames", self.id)));
        }
        for (i, w) in self.frames.windows(2).enumerate() {
            if w[1].timestamp_us <= w[0].timestamp_us {
                return Err(Error::DataIntegrity(format!(
                    "scene '{}': timestamps not strictly increasing at frame {}",
                    self.id,
                    i + 1
                )));
            }
        }
        for (i, frame) in self.frames.iter().enumerate() {
            let mut seen = std::collections::BTreeSet::new();
            for b in &frame.boxes {
                if !seen.insert(b.track_id.as_str()) {
                    return Err(Error::DataIntegrity(format!(
                        "scene '{}': duplicate track_id '{}' in frame {i}",
                        self.id, b.track_id
                    )));
                }
            }
        }
        let dt = self.frame_dt();
        if dt > 0.0 {
            for w in self.frames.windows(2) {
                let d = (w[1].timestamp_us - w[0].timestamp_us) as f64 / 1e6;
                if (d - dt).abs() > 0.1 * dt {
                    log::warn!(
                        "scene '{}': non-uniform frame spacing ({d:.6}s vs median {dt:.6}s)",
                        self.id
                    );
                    break;
                }
            }
        }
        Ok(())
    }
}

/// Read a sweep binary: consecutive 20-byte records of little-endian
/// f32 (x, y, z, intensity, ring). The cloud is tagged local.
pub fn read_cloud(path: &Path) -> Result<PointCloud> {
    let bytes = fs::read(path).map_err(|e| Error::io(path, e))?;
    cloud_from_bytes(&bytes, path)
}

pub fn cloud_from_bytes(bytes: &[u8], path: &Path) -> Result<PointCloud> {
    if !bytes.len().is_multiple_of(RECORD_SIZE) {
        return Err(Error::Format {
            path: path.to_path_buf(),
            offset: (bytes.len() / RECORD_SIZE * RECORD_SIZE) as u64,
            reason: format!(
                "file length {} is not a multiple of the {RECORD_SIZE}-byte record",
                bytes.len()
            ),
        });
    }
    let mut points = Vec::with_capacity(bytes.len() / RECORD_SIZE);
    let mut bad = Vec::new();
    for (i, rec) in bytes.chunks_exact(RECORD_SIZE).enumerate() {
        let f = |k: usize| f32::from_le_bytes(rec[4 * k..4 * k + 4].try_into().unwrap());
        let (x, y, z, intensity, ring) = (f(0), f(1), f(2), f(3), f(4));
        if !(x.is_finite()
            && y.is_finite()
            && z.is_finite()
            && intensity.is_finite()
            && ring.is_finite())
        {
            bad.push(i);
            continue;
        }
        points.push(CloudPoint {
            position: nalgebra::Point3::new(x as f64, y as f64, z as f64),
            intensity,
            ring,
        });
    }
    if !bad.is_empty() {
        return Err(Error::DataIntegrity(format!(
            "{}: non-finite values at record indices {bad:?}",
            path.display()
        )));
    }
    PointCloud::new(points, CloudFrame::Local)
}

pub fn cloud_to_bytes(cloud: &PointCloud) -> Vec<u8> {
    let mut bytes = Vec::with_capacity(cloud.len() * RECORD_SIZE);
    for p in cloud.points() {
        for v in [
            p.position.x as f32,
            p.position.y as f32,
            p.position.z as f32,
            p.intensity,
            p.ring,
        ] {
            bytes.extend_from_slice(&v.to_le_bytes());
        }
    }
    bytes
}

pub fn write_cloud(cloud: &PointCloud, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let mut file = fs::File::create(path).map_err(|e| Error::io(path, e))?;
    file.write_all(&cloud_to_bytes(cloud))
        .map_err(|e| Error::io(path, e))?;
    Ok(())
}

// --- manifest schema -------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct PoseDoc {
    translation: [f64; 3],
    rotation_wxyz: [f64; 4],
}

#[derive(Serialize, Deserialize)]
struct BoxDoc {
    track_id: String,
    category: String,
    center: [f64; 3],
    size_wlh: [f64; 3],
    yaw: f64,
    velocity: [f64; 2],
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct FrameDoc {
    timestamp_us: i64,
    lidar_file: String,
    ego_pose: PoseDoc,
    sensor_calib: PoseDoc,
    boxes: Vec<BoxDoc>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

#[derive(Serialize, Deserialize)]
struct ManifestHeader {
    format_version: u32,
    scene_id: String,
    #[serde(skip_serializing_if = "Option::is_none")]
    map: Option<MapRef>,
    #[serde(flatten)]
    extra: BTreeMap<String, Value>,
}

fn pose_to_doc(pose: &Pose) -> PoseDoc {
    let t = pose.translation();
    PoseDoc {
        translation: [t.x, t.y, t.z],
        rotation_wxyz: pose.rotation_wxyz(),
    }
}

fn box_to_doc(b: &OrientedBox) -> BoxDoc {
    BoxDoc {
        track_id: b.track_id.clone(),
        category: b.category.clone(),
        center: [b.center.x, b.center.y, b.center.z],
        size_wlh: [b.size.x, b.size.y, b.size.z],
        yaw: b.yaw,
        velocity: [b.velocity.x, b.velocity.y],
        extra: b.extra.clone(),
    }
}

/// Read a scene manifest plus the sweep binaries it references. Paths in
/// the manifest are resolved relative to the manifest's directory.
pub fn read_manifest(path: &Path) -> Result<Scene> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let root: Value = serde_json::from_str(&text).map_err(|e| Error::json(path, e))?;

    let mut header_value = root.clone();
    if let Some(obj) = header_value.as_object_mut() {
        obj.remove("frames");
    }
    let header: ManifestHeader = serde_json::from_value(header_value)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    if header.format_version != 1 {
        return Err(Error::Schema(format!(
            "{}: unsupported format_version {}",
            path.display(),
            header.format_version
        )));
    }

    let frames_value = root
        .get("frames")
        .cloned()
        .ok_or_else(|| Error::Schema(format!("{}: missing field `frames`", path.display())))?;
    let frame_values: Vec<Value> = serde_json::from_value(frames_value)
        .map_err(|e| Error::Schema(format!("{}: frames: {e}", path.display())))?;

    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    let mut frames = Vec::with_capacity(frame_values.len());
    for (i, fv) in frame_values.into_iter().enumerate() {
        let doc: FrameDoc =
            serde_json::from_value(fv).map_err(|e| Error::Schema(format!("frame {i}: {e}")))?;
        let ego_pose = Pose::new(doc.ego_pose.translation, doc.ego_pose.rotation_wxyz)
            .map_err(|e| Error::Schema(format!("frame {i}: ego_pose: {e}")))?;
        let sensor_calib = Pose::new(doc.sensor_calib.translation, doc.sensor_calib.rotation_wxyz)
            .map_err(|e| Error::Schema(format!("frame {i}: sensor_calib: {e}")))?;
        let mut boxes = Vec::with_capacity(doc.boxes.len());
        for (j, bd) in doc.boxes.into_iter().enumerate() {
            let mut b = OrientedBox::new(
                bd.center,
                bd.size_wlh,
                bd.yaw,
                bd.velocity,
                bd.category,
                bd.track_id,
            )
            .map_err(|e| Error::Schema(format!("frame {i}: box {j}: {e}")))?;
            b.extra = bd.extra;
            boxes.push(b);
        }
        let cloud = read_cloud(&dir.join(&doc.lidar_file))?;
        frames.push(Frame {
            timestamp_us: doc.timestamp_us,
            lidar_file: doc.lidar_file,
            cloud,
            ego_pose,
            sensor_calib,
            boxes,
            extra: doc.extra,
        });
    }

    let scene = Scene {
        id: header.scene_id,
        frames,
        map: header.map,
        extra: header.extra,
    };
    scene.validate()?;
    Ok(scene)
}

/// Write the manifest and every referenced sweep binary.
pub fn write_manifest(scene: &Scene, path: &Path) -> Result<()> {
    scene.validate()?;
    let dir = path.parent().unwrap_or_else(|| Path::new("."));
    fs::create_dir_all(dir).map_err(|e| Error::io(dir, e))?;

    let mut root = serde_json::Map::new();
    root.insert("format_version".into(), Value::from(1u32));
    root.insert("scene_id".into(), Value::from(scene.id.clone()));
    if let Some(map) = &scene.map {
        root.insert("map".into(), serde_json::to_value(map).expect("map ref"));
    }
    for (k, v) in &scene.extra {
        root.insert(k.clone(), v.clone());
    }
    let mut frames = Vec::with_capacity(scene.frames.len());
    for frame in &scene.frames {
        let doc = FrameDoc {
            timestamp_us: frame.timestamp_us,
            lidar_file: frame.lidar_file.clone(),
            ego_pose: pose_to_doc(&frame.ego_pose),
            sensor_calib: pose_to_doc(&frame.sensor_calib),
            boxes: frame.boxes.iter().map(box_to_doc).collect(),
            extra: frame.extra.clone(),
        };
        frames.push(serde_json::to_value(doc).expect("frame doc"));
        write_cloud(&frame.cloud, &dir.join(&frame.lidar_file))?;
    }
    root.insert("frames".into(), Value::Array(frames));

    let text = serde_json::to_string_pretty(&Value::Object(root)).expect("manifest json");
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

// --- map files --------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct MapMeta {
    format_version: u32,
    width: u32,
    height: u32,
    resolution_m_per_px: f64,
    origin_xy_m: [f64; 2],
    palette: BTreeMap<String, u8>,
}

/// Read a raster map from its raw row-major grid file and sidecar metadata.
pub fn read_map(grid_path: &Path, meta_path: &Path) -> Result<RasterMap> {
    let text = fs::read_to_string(meta_path).map_err(|e| Error::io(meta_path, e))?;
    let meta: MapMeta = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", meta_path.display())))?;
    if meta.format_version != 1 {
        return Err(Error::Schema(format!(
            "{}: unsupported format_version {}",
            meta_path.display(),
            meta.format_version
        )));
    }
    let cells = fs::read(grid_path).map_err(|e| Error::io(grid_path, e))?;
    let expected = meta.width as usize * meta.height as usize;
    if cells.len() != expected {
        return Err(Error::Format {
            path: grid_path.to_path_buf(),
            offset: cells.len().min(expected) as u64,
            reason: format!("grid holds {} cells, metadata says {expected}", cells.len()),
        });
    }
    RasterMap::new(
        meta.width,
        meta.height,
        meta.resolution_m_per_px,
        meta.origin_xy_m,
        cells,
        meta.palette,
    )
}

pub fn write_map(map: &RasterMap, grid_path: &Path, meta_path: &Path) -> Result<()> {
    for p in [grid_path, meta_path] {
        if let Some(parent) = p.parent() {
            fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
        }
    }
    fs::write(grid_path, map.cells()).map_err(|e| Error::io(grid_path, e))?;
    let meta = MapMeta {
        format_version: 1,
        width: map.width(),
        height: map.height(),
        resolution_m_per_px: map.resolution(),
        origin_xy_m: map.origin(),
        palette: map.palette().clone(),
    };
    let text = serde_json::to_string_pretty(&meta).expect("map meta json");
    fs::write(meta_path, text).map_err(|e| Error::io(meta_path, e))?;
    Ok(())
}

// --- polygon layer files ------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct LayerDoc {
    category: String,
    vertices: Vec<[f64; 2]>,
}

#[derive(Serialize, Deserialize)]
struct LayersFile {
    format_version: u32,
    layers: Vec<LayerDoc>,
}

pub fn read_layers(path: &Path) -> Result<PolygonLayerMap> {
    let text = fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
    let file: LayersFile = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    if file.format_version != 1 {
        return Err(Error::Schema(format!(
            "{}: unsupported format_version {}",
            path.display(),
            file.format_version
        )));
    }
    PolygonLayerMap::new(
        file.layers
            .into_iter()
            .map(|l| PolygonLayer {
                category: l.category,
                vertices: l
                    .vertices
                    .iter()
                    .map(|v| nalgebra::Vector2::new(v[0], v[1]))
                    .collect(),
            })
            .collect(),
    )
}

pub fn write_layers(layers: &PolygonLayerMap, path: &Path) -> Result<()> {
    if let Some(parent) = path.parent() {
        fs::create_dir_all(parent).map_err(|e| Error::io(parent, e))?;
    }
    let file = LayersFile {
        format_version: 1,
        layers: layers
            .layers
            .iter()
            .map(|l| LayerDoc {
                category: l.category.clone(),
                vertices: l.vertices.iter().map(|v| [v.x, v.y]).collect(),
            })
            .collect(),
    };
    let text = serde_json::to_string_pretty(&file).expect("layers json");
    fs::write(path, text).map_err(|e| Error::io(path, e))?;
    Ok(())
}

/// Manifests found directly under `dir` (scene subdirectories holding a
/// `manifest.json`), sorted by path for deterministic traversal.
pub fn discover_manifests(dir: &Path) -> Result<Vec<PathBuf>> {
    let mut out = Vec::new();
    let entries = fs::read_dir(dir).map_err(|e| Error::io(dir, e))?;
    for entry in entries {
        let entry = entry.map_err(|e| Error::io(dir, e))?;
        let candidate = entry.path().join("manifest.json");
        if candidate.is_file() {
            out.push(candidate);
        }
    }
    out.sort();
    Ok(out)
}
