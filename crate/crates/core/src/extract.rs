//! Object bank construction: cut the interior points of every annotated
//! box out of its frame and store them in box-local coordinates, ready
//! for insertion elsewhere.

use std::collections::{BTreeMap, BTreeSet};
use std::fs;
use std::path::Path;

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::geom::{
    point_in_box, points_in_box, transform_cloud, OrientedBox, PointCloud, TransformDirection,
};
use crate::scene_io::{self, Frame, Scene};

/// Tolerance for re-validating box-local containment after points have
/// been through the f32 on-disk representation.
pub const BANK_CONTAINMENT_EPS: f64 = 1e-5;

/// Minimum interior points for a bank entry; sparser objects insert as
/// unrecognizable speckle.
pub const DEFAULT_MIN_POINTS: usize = 20;

/// Identifies the (scene, frame, box) occurrence an object came from.
#[derive(Clone, Debug, PartialEq, Eq, PartialOrd, Ord, Serialize, Deserialize)]
pub struct SourceRef {
    pub scene_id: String,
    pub frame_index: usize,
    pub track_id: String,
}

/// An object cut out of a frame: its points in box-local coordinates
/// (origin at the box center, axes along the box axes) plus the box
/// template with center and yaw zeroed.
#[derive(Clone, Debug)]
pub struct ExtractedObject {
    pub points: PointCloud,
    pub template: OrientedBox,
    pub source: SourceRef,
    /// Magnitude of the source box velocity, m/s.
    pub source_speed: f64,
}

impl ExtractedObject {
    pub fn num_points(&self) -> usize {
        self.points.len()
    }

    /// Check every stored point against the template half extents.
    pub fn validate_containment(&self, eps: f64) -> Result<()> {
        for (i, p) in self.points.points().iter().enumerate() {
            if !point_in_box(p.position, &self.template, eps)? {
                return Err(Error::DataIntegrity(format!(
                    "bank entry {}/{}/{}: point {i} falls outside the template box",
                    self.source.scene_id, self.source.frame_index, self.source.track_id
                )));
            }
        }
        Ok(())
    }
}

/// Extract the interior points of `obox` from `frame`, re-expressed in
/// box-local axes. Errors with `EmptyObject` when nothing falls inside.
pub fn extract_object(
    frame: &Frame,
    obox: &OrientedBox,
    frame_index: usize,
    scene_id: &str,
) -> Result<ExtractedObject> {
    let global = transform_cloud(
        &frame.cloud,
        &frame.sensor_to_global(),
        TransformDirection::ToGlobal,
    )?;
    extract_object_from_global(&global, obox, frame_index, scene_id)
}

/// Same as [`extract_object`] but takes the frame's cloud already in the
/// global frame, so callers iterating many boxes transform only once.
pub fn extract_object_from_global(
    global: &PointCloud,
    obox: &OrientedBox,
    frame_index: usize,
    scene_id: &str,
) -> Result<ExtractedObject> {
    let indices = points_in_box(global, obox)?;
    if indices.is_empty() {
        return Err(Error::EmptyObject);
    }
    let selected = global.select(&indices);
    let local = transform_cloud(&selected, &obox.pose(), TransformDirection::ToLocal)?;
    let mut template = obox.clone();
    template.center = nalgebra::Point3::origin();
    template.yaw = 0.0;
    template.velocity = nalgebra::Vector2::zeros();
    template.extra.clear();
    Ok(ExtractedObject {
        points: local,
        template,
        source: SourceRef {
            scene_id: scene_id.to_string(),
            frame_index,
            track_id: obox.track_id.clone(),
        },
        source_speed: obox.velocity.norm(),
    })
}

/// A finished object bank: entries in deterministic
/// (scene id, frame index, track_id) order.
#[derive(Clone, Debug, Default)]
pub struct ObjectBank {
    pub entries: Vec<ExtractedObject>,
}

impl ObjectBank {
    pub fn len(&self) -> usize {
        self.entries.len()
    }

    pub fn is_empty(&self) -> bool {
        self.entries.is_empty()
    }

    /// Entry count per category, name-sorted.
    pub fn category_histogram(&self) -> BTreeMap<String, usize> {
        let mut hist = BTreeMap::new();
        for e in &self.entries {
            *hist.entry(e.template.category.clone()).or_insert(0) += 1;
        }
        hist
    }
}

/// Build an object bank over every (frame, box) occurrence in `scenes`.
///
/// Occurrences below `min_points` interior points or outside the category
/// `filter` (when one is given) are skipped. With `dedup` on, only the
/// densest occurrence of each (scene, track) survives — near occurrences
/// carry more points and insert better. An empty scene list yields an
/// empty bank with a warning rather than an error.
pub fn build_object_bank(
    scenes: &[Scene],
    filter: Option<&BTreeSet<String>>,
    min_points: usize,
    dedup: bool,
) -> Result<ObjectBank> {
    if min_points == 0 {
        return Err(Error::Config("min_points must be at least 1".into()));
    }
    if scenes.is_empty() {
        log::warn!("building an object bank from zero scenes");
    }
    let mut entries: Vec<ExtractedObject> = Vec::new();
    for scene in scenes {
        for (frame_index, frame) in scene.frames.iter().enumerate() {
            if frame.boxes.is_empty() {
                continue;
            }
            let global = transform_cloud(
                &frame.cloud,
                &frame.sensor_to_global(),
                TransformDirection::ToGlobal,
            )?;
            for obox in &frame.boxes {
                if let Some(categories) = filter {
                    if !categories.contains(&obox.category) {
                        continue;
                    }
                }
                match extract_object_from_global(&global, obox, frame_index, &scene.id) {
                    Ok(obj) if obj.num_points() >= min_points => entries.push(obj),
                    Ok(_) | Err(Error::EmptyObject) => {}
                    Err(e) => return Err(e),
                }
            }
        }
    }
    if dedup {
        let mut best: BTreeMap<(String, String), ExtractedObject> = BTreeMap::new();
        for obj in entries {
            let key = (obj.source.scene_id.clone(), obj.source.track_id.clone());
            match best.get(&key) {
                Some(held)
                    if held.num_points() > obj.num_points()
                        || (held.num_points() == obj.num_points()
                            && held.source.frame_index <= obj.source.frame_index) => {}
                _ => {
                    best.insert(key, obj);
                }
            }
        }
        entries = best.into_values().collect();
    }
    entries.sort_by(|a, b| a.source.cmp(&b.source));
    Ok(ObjectBank { entries })
}

// --- bank files ---------------------------------------------------------------

#[derive(Serialize, Deserialize)]
struct BankEntryDoc {
    file: String,
    size_wlh: [f64; 3],
    category: String,
    source: SourceRef,
    source_speed: f64,
    num_points: usize,
}

#[derive(Serialize, Deserialize)]
struct BankIndex {
    format_version: u32,
    entries: Vec<BankEntryDoc>,
}

/// Write the bank as a directory: one point binary per object (same
/// record layout as scene sweeps) plus a JSON index.
pub fn write_bank(bank: &ObjectBank, dir: &Path) -> Result<()> {
    fs::create_dir_all(dir.join("objects")).map_err(|e| Error::io(dir, e))?;
    let mut docs = Vec::with_capacity(bank.entries.len());
    for (i, entry) in bank.entries.iter().enumerate() {
        let file = format!("objects/obj_{i:05}.bin");
        scene_io::write_cloud(&entry.points, &dir.join(&file))?;
        docs.push(BankEntryDoc {
            file,
            size_wlh: [
                entry.template.size.x,
                entry.template.size.y,
                entry.template.size.z,
            ],
            category: entry.template.category.clone(),
            source: entry.source.clone(),
            source_speed: entry.source_speed,
            num_points: entry.num_points(),
        });
    }
    let index = BankIndex {
        format_version: 1,
        entries: docs,
    };
    let path = dir.join("index.json");
    let text = serde_json::to_string_pretty(&index).expect("bank index json");
    fs::write(&path, text).map_err(|e| Error::io(&path, e))?;
    Ok(())
}

/// Load a bank directory, re-validating template containment and point
/// counts for every entry.
pub fn read_bank(dir: &Path) -> Result<ObjectBank> {
    let path = dir.join("index.json");
    let text = fs::read_to_string(&path).map_err(|e| Error::io(&path, e))?;
    let index: BankIndex = serde_json::from_str(&text)
        .map_err(|e| Error::Schema(format!("{}: {e}", path.display())))?;
    if index.format_version != 1 {
        return Err(Error::Schema(format!(
            "{}: unsupported format_version {}",
            path.display(),
            index.format_version
        )));
    }
    let mut entries = Vec::with_capacity(index.entries.len());
    for doc in index.entries {
        let points = scene_io::read_cloud(&dir.join(&doc.file))?;
        if points.len() != doc.num_points {
            return Err(Error::DataIntegrity(format!(
                "{}: holds {} points, index says {}",
                doc.file,
                points.len(),
                doc.num_points
            )));
        }
        if points.is_empty() {
            return Err(Error::DataIntegrity(format!(
                "{}: bank entry is empty",
                doc.file
            )));
        }
        let template = OrientedBox::new(
            [0.0, 0.0, 0.0],
            doc.size_wlh,
            0.0,
            [0.0, 0.0],
            doc.category,
            doc.source.track_id.clone(),
        )?;
        let entry = ExtractedObject {
            points,
            template,
            source: doc.source,
            source_speed: doc.source_speed,
        };
        entry.validate_containment(BANK_CONTAINMENT_EPS)?;
        entries.push(entry);
    }
    Ok(ObjectBank { entries })
}
