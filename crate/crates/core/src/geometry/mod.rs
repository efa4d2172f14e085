//! Core pose algebra, beam geometry, and marker layout generation.

mod beam;
mod pose;
mod presets;

pub use beam::{
    beam_frame, generate_layout, marker_corners, BeamKind, BeamSpec, GeometryError, MarkerAnchor,
    MarkerLayout, PlacementMode,
};
pub use pose::{Pose, UnitQuat, Vec3};
pub use presets::{
    BeamPreset, DEFAULT_HEIGHT, DEFAULT_MARKER_SIZE, DEFAULT_TWIST, DEFAULT_WIDTH, FOOT,
};
