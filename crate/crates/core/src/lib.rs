//! Dynamic LiDAR scene augmentation: extract annotated objects from
//! source frames and insert them into target scenes with frame-to-frame
//! motion continuity, road-validated placement, and dynamic collision
//! avoidance.

pub use nalgebra;

pub mod error;
pub mod extract;
pub mod geom;
pub mod insert;
pub mod raster;
pub mod scene_io;
pub mod synth;

pub use error::{Error, Result};
pub use extract::{build_object_bank, extract_object, ExtractedObject, ObjectBank, SourceRef};
pub use geom::{
    point_in_box, points_in_box, transform_cloud, CloudFrame, CloudPoint, OrientedBox, PointCloud,
    Pose, TransformDirection,
};
pub use insert::{
    align_yaw, apply_placement, augment_scene, boxes_collide, dynamic_collision, ground_height,
    move_box, search_insertion, AugmentReport, AugmentationPlan, CollisionHorizon, Placement,
    PlacementRecord, RejectionTally,
};
pub use raster::{
    bench_road_lookup, crop_and_rotate, footprint_pixels, is_road_valid, layer_filter_valid,
    pixelize, Bounds, CroppedMap, PolygonLayer, PolygonLayerMap, RasterMap, ROAD_CODE,
};
pub use scene_io::{read_manifest, write_manifest, Frame, MapRef, Scene};
pub use synth::{generate, GroundTruth, RoadLayout, SynthSpec};
