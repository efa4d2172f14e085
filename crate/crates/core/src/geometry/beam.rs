//! Beam geometry and marker layout generation.
//!
//! The beam model frame has its centerline along +x from the origin,
//! +y to the side and +z up. Cross-section width spans y, height spans z.
//! A twisted beam rotates its cross-section linearly about the beam axis,
//! reaching `total_twist` at `s = length`.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use super::pose::{Pose, UnitQuat, Vec3};

#[derive(Debug, Error, PartialEq)]
pub enum GeometryError {
    #[error("arclength {s} m outside beam range [0, {length}] m")]
    ArclengthOutOfRange { s: f64, length: f64 },
    #[error("layout requires at least 2 markers (got {0})")]
    TooFewMarkers(u32),
    #[error("spacing must be positive (got {0} m)")]
    NonPositiveSpacing(f64),
    #[error("marker size must be positive (got {0} m)")]
    NonPositiveMarkerSize(f64),
    #[error("invalid beam: {0}")]
    InvalidBeam(String),
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum BeamKind {
    Straight,
    Twisted,
    Chamfered,
}

/// Geometry of one glulam beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct BeamSpec {
    pub id: String,
    /// Centerline length in meters.
    pub length: f64,
    pub kind: BeamKind,
    /// Cross-section rotation over the full length, radians. Zero unless twisted.
    pub total_twist: f64,
    /// Cross-section width (y extent), meters.
    pub width: f64,
    /// Cross-section height (z extent), meters.
    pub height: f64,
}

impl BeamSpec {
    pub fn validate(&self) -> Result<(), GeometryError> {
        if !(self.length > 0.0 && self.length.is_finite()) {
            return Err(GeometryError::InvalidBeam(format!(
                "length must be positive (got {})",
                self.length
            )));
        }
        if !(self.width > 0.0 && self.height > 0.0) {
            return Err(GeometryError::InvalidBeam(format!(
                "cross-section must be positive (got {} x {})",
                self.width, self.height
            )));
        }
        if self.kind != BeamKind::Twisted && self.total_twist != 0.0 {
            return Err(GeometryError::InvalidBeam(format!(
                "{:?} beams must have zero twist (got {} rad)",
                self.kind, self.total_twist
            )));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum PlacementMode {
    /// Markers flat on the top face, normal +z.
    EdgeTop,
    /// Markers on the near side face, normal +y.
    EdgeSide,
    /// Faces cycle by anchor index: top, near side, bottom, near side.
    Around,
}

/// One marker bound to a known point on the beam.
///
/// The marker frame has +z as the outward face normal and +x along the beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct MarkerAnchor {
    pub marker_id: u16,
    /// Distance along the beam centerline, meters.
    pub arclength: f64,
    pub pose_in_model: Pose,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct MarkerLayout {
    pub beam: BeamSpec,
    pub placement: PlacementMode,
    /// Square marker side length, meters.
    pub marker_size: f64,
    /// Sorted by strictly ascending arclength.
    pub anchors: Vec<MarkerAnchor>,
    /// The requested spacing, meters (actual spacing may differ when infeasible).
    pub spacing_nominal: f64,
    /// Set when (count-1) * spacing exceeds the beam length and anchors were
    /// evenly distributed instead.
    pub infeasible_spacing: bool,
}

impl MarkerLayout {
    pub fn validate(&self) -> Result<(), GeometryError> {
        self.beam.validate()?;
        if self.marker_size <= 0.0 {
            return Err(GeometryError::NonPositiveMarkerSize(self.marker_size));
        }
        if self.anchors.len() < 2 {
            return Err(GeometryError::TooFewMarkers(self.anchors.len() as u32));
        }
        for pair in self.anchors.windows(2) {
            if pair[1].arclength <= pair[0].arclength {
                return Err(GeometryError::InvalidBeam(format!(
                    "anchor arclengths not strictly increasing ({} then {})",
                    pair[0].arclength, pair[1].arclength
                )));
            }
        }
        let mut ids: Vec<u16> = self.anchors.iter().map(|a| a.marker_id).collect();
        ids.sort_unstable();
        ids.dedup();
        if ids.len() != self.anchors.len() {
            return Err(GeometryError::InvalidBeam("duplicate marker ids".into()));
        }
        Ok(())
    }

    pub fn anchor_for(&self, marker_id: u16) -> Option<&MarkerAnchor> {
        self.anchors.iter().find(|a| a.marker_id == marker_id)
    }

    /// Re-number anchors to the contiguous id block starting at `first_id`,
    /// in arclength order.
    pub fn renumbered(mut self, first_id: u16) -> Self {
        for (k, anchor) in self.anchors.iter_mut().enumerate() {
            anchor.marker_id = first_id + k as u16;
        }
        self
    }
}

/// Frame on the beam centerline at arclength `s`: origin at (s, 0, 0), axes
/// rotated about the beam axis by the accumulated twist.
pub fn beam_frame(beam: &BeamSpec, s: f64) -> Result<Pose, GeometryError> {
    if !(0.0..=beam.length).contains(&s) {
        return Err(GeometryError::ArclengthOutOfRange { s, length: beam.length });
    }
    let twist = beam.total_twist * s / beam.length;
    Ok(Pose::new(
        UnitQuat::from_axis_angle(Vec3::X, twist),
        Vec3::new(s, 0.0, 0.0),
    ))
}

/// Which face of the cross-section a marker sits on.
#[derive(Debug, Clone, Copy)]
enum Face {
    Top,
    SideNear,
    Bottom,
}

impl Face {
    fn for_anchor(placement: PlacementMode, index: usize) -> Face {
        match placement {
            PlacementMode::EdgeTop => Face::Top,
            PlacementMode::EdgeSide => Face::SideNear,
            PlacementMode::Around => match index % 4 {
                0 => Face::Top,
                2 => Face::Bottom,
                _ => Face::SideNear,
            },
        }
    }

    /// Marker pose relative to the local beam frame: offset to the face
    /// surface, +z rotated onto the outward normal, +x kept along the beam.
    fn local_pose(self, beam: &BeamSpec) -> Pose {
        use std::f64::consts::{FRAC_PI_2, PI};
        let (angle, offset) = match self {
            Face::Top => (0.0, Vec3::new(0.0, 0.0, beam.height / 2.0)),
            Face::SideNear => (-FRAC_PI_2, Vec3::new(0.0, beam.width / 2.0, 0.0)),
            Face::Bottom => (PI, Vec3::new(0.0, 0.0, -beam.height / 2.0)),
        };
        Pose::new(UnitQuat::from_axis_angle(Vec3::X, angle), offset)
    }
}

/// Generate `count` marker anchors along the beam.
///
/// When the requested spacing fits, anchors are centered: the first sits at
/// `(length - (count-1)*spacing) / 2`. When it does not fit, anchors are
/// spread evenly from 0 to `length` and `infeasible_spacing` is set.
pub fn generate_layout(
    beam: &BeamSpec,
    count: u32,
    spacing: f64,
    placement: PlacementMode,
    marker_size: f64,
) -> Result<MarkerLayout, GeometryError> {
    beam.validate()?;
    if count < 2 {
        return Err(GeometryError::TooFewMarkers(count));
    }
    if !(spacing > 0.0) {
        return Err(GeometryError::NonPositiveSpacing(spacing));
    }
    if !(marker_size > 0.0) {
        return Err(GeometryError::NonPositiveMarkerSize(marker_size));
    }

    let span = (count - 1) as f64 * spacing;
    let infeasible = span > beam.length;
    let mut anchors = Vec::with_capacity(count as usize);
    for k in 0..count {
        let s = if infeasible {
            k as f64 * beam.length / (count - 1) as f64
        } else {
            (beam.length - span) / 2.0 + k as f64 * spacing
        };
        // clamp away end-of-range rounding so beam_frame's bound check holds
        let s = s.min(beam.length);
        let frame = beam_frame(beam, s)?;
        let face = Face::for_anchor(placement, k as usize);
        anchors.push(MarkerAnchor {
            marker_id: k as u16,
            arclength: s,
            pose_in_model: frame.compose(&face.local_pose(beam)),
        });
    }

    Ok(MarkerLayout {
        beam: beam.clone(),
        placement,
        marker_size,
        anchors,
        spacing_nominal: spacing,
        infeasible_spacing: infeasible,
    })
}

/// The four marker corners in the model frame, counterclockwise starting
/// from (-h, -h, 0) in the marker's local frame, h = marker_size / 2.
pub fn marker_corners(anchor: &MarkerAnchor, marker_size: f64) -> [Vec3; 4] {
    let h = marker_size / 2.0;
    [
        anchor.pose_in_model.apply(Vec3::new(-h, -h, 0.0)),
        anchor.pose_in_model.apply(Vec3::new(h, -h, 0.0)),
        anchor.pose_in_model.apply(Vec3::new(h, h, 0.0)),
        anchor.pose_in_model.apply(Vec3::new(-h, h, 0.0)),
    ]
}
