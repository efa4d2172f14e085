//! Rigid alignment of the beam model to the perceived world from marker
//! observations, plus the interpolated per-marker correction field.
//!
//! Each observed marker contributes its four corners as weighted point
//! correspondences, so orientation information enters the fit and a single
//! marker is handled by the same machinery as ten. The global fit is a
//! weighted least-squares point-set alignment solved by SVD; residual
//! per-marker transforms are then interpolated along the beam arclength to
//! refine the alignment locally.

use std::collections::{BTreeMap, BTreeSet};

use nalgebra::{Matrix3, Vector3};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driftsim::DetectionParams;
use crate::geometry::{marker_corners, MarkerLayout, Pose, Vec3};

/// Outlier rejection threshold: drop residuals above k times the median.
pub const OUTLIER_REJECTION_K: f64 = 3.0;

/// Never let a correspondence weight blow up when a noise-free profile
/// reports zero measurement sigma.
const SIGMA_FLOOR: f64 = 1e-6;

#[derive(Debug, Error, PartialEq)]
pub enum RegistrationError {
    #[error("need at least 3 correspondences with positive total weight (got {got})")]
    TooFewPoints { got: usize },
    #[error("degenerate correspondence geometry (collinear or coincident points)")]
    DegenerateGeometry,
    #[error("no usable observations")]
    NoObservations,
    #[error("alignment result carries no per-marker residuals")]
    EmptyResult,
    #[error("correction field has no knots")]
    EmptyField,
}

/// One noisy sighting of a marker, as perceived through drifted tracking.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Observation {
    pub marker_id: u16,
    /// Marker pose in the perceived world frame.
    pub measured_pose: Pose,
    /// Sighting time, seconds.
    pub time: f64,
    /// Detection confidence in (0, 1].
    pub confidence: f64,
}

/// An observation paired with the observer distance recorded alongside it;
/// the distance feeds the measurement-noise weighting.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct RangedObservation {
    pub observation: Observation,
    /// Distance from observer to marker at sighting time, meters.
    pub distance: f64,
}

/// A weighted model-point/world-point pair.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Correspondence {
    pub model_point: Vec3,
    pub world_point: Vec3,
    pub weight: f64,
}

/// Result of a rigid fit: the model-to-world transform and its weighted
/// root-mean-square residual.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RigidFit {
    pub transform: Pose,
    pub rmse: f64,
}

/// Full fusion output across markers.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct AlignmentResult {
    /// Model-to-world transform (world as perceived by the tracking system).
    pub transform: Pose,
    /// Weighted RMS residual of the accepted correspondences, meters.
    pub rmse: f64,
    /// Small residual transform at each used marker, expressed in the
    /// marker's predicted frame: `(transform ∘ anchor)⁻¹ ∘ mean_observed`.
    pub per_marker_residual: BTreeMap<u16, Pose>,
    pub used_markers: BTreeSet<u16>,
    pub rejected_markers: BTreeSet<u16>,
    /// Set when the fit came from a single marker (exactly determined).
    pub single_marker: bool,
}

/// Residual corrections anchored at marker arclengths, interpolated along
/// the beam.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CorrectionField {
    /// Strictly increasing by arclength. Corrections compose on the left of
    /// the global transform: corrected(s) = knot(s) ∘ transform.
    pub knots: Vec<CorrectionKnot>,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CorrectionKnot {
    pub arclength: f64,
    pub correction: Pose,
}

/// Weighted least-squares rigid alignment (weighted centroids, weighted
/// cross-covariance, SVD with reflection guard).
pub fn weighted_rigid_align(
    correspondences: &[Correspondence],
) -> Result<RigidFit, RegistrationError> {
    let total_weight: f64 = correspondences.iter().map(|c| c.weight).sum();
    if correspondences.len() < 3 || !(total_weight > 0.0) {
        return Err(RegistrationError::TooFewPoints { got: correspondences.len() });
    }

    let inv_w = 1.0 / total_weight;
    let mut model_centroid = Vec3::ZERO;
    let mut world_centroid = Vec3::ZERO;
    for c in correspondences {
        model_centroid = model_centroid + c.model_point * (c.weight * inv_w);
        world_centroid = world_centroid + c.world_point * (c.weight * inv_w);
    }

    // cross-covariance H = sum w * (world - w̄)(model - m̄)^T
    let mut h = Matrix3::<f64>::zeros();
    for c in correspondences {
        let m = c.model_point - model_centroid;
        let w = c.world_point - world_centroid;
        let wv = Vector3::new(w.x, w.y, w.z);
        let mv = Vector3::new(m.x, m.y, m.z);
        h += c.weight * wv * mv.transpose();
    }

    let svd = h.svd(true, true);
    let u = svd.u.expect("svd with u");
    let v_t = svd.v_t.expect("svd with v_t");
    let s = svd.singular_values;
    // rotations are only determined when the points span at least a plane
    if s[1] <= s[0].max(1e-300) * 1e-9 {
        return Err(RegistrationError::DegenerateGeometry);
    }

    let mut d = Matrix3::<f64>::identity();
    if (u * v_t).determinant() < 0.0 {
        d[(2, 2)] = -1.0;
    }
    let r = u * d * v_t;
    let rotation = crate::geometry::UnitQuat::from_matrix(&[
        [r[(0, 0)], r[(0, 1)], r[(0, 2)]],
        [r[(1, 0)], r[(1, 1)], r[(1, 2)]],
        [r[(2, 0)], r[(2, 1)], r[(2, 2)]],
    ]);
    let translation = world_centroid - rotation.rotate(model_centroid);
    let transform = Pose::new(rotation, translation);

    let mut sq_sum = 0.0;
    for c in correspondences {
        let r = transform.apply(c.model_point) - c.world_point;
        sq_sum += c.weight * r.norm_squared();
    }
    let rmse = (sq_sum * inv_w).sqrt();

    Ok(RigidFit { transform, rmse })
}

/// Correspondence construction output; unknown marker ids are skipped and
/// reported rather than failing the whole batch.
#[derive(Debug, Clone, Default)]
pub struct CorrespondenceSet {
    pub correspondences: Vec<Correspondence>,
    /// Marker id of the observation each correspondence came from.
    pub marker_of: Vec<u16>,
    pub skipped_marker_ids: Vec<u16>,
}

/// Expand observations into per-corner correspondences. Each observation
/// yields 4 pairs weighted by `confidence / sigma_t(distance)^2`.
pub fn observations_to_correspondences(
    observations: &[RangedObservation],
    layout: &MarkerLayout,
    detection: &DetectionParams,
) -> CorrespondenceSet {
    let mut set = CorrespondenceSet::default();
    let h = layout.marker_size / 2.0;
    let local_corners = [
        Vec3::new(-h, -h, 0.0),
        Vec3::new(h, -h, 0.0),
        Vec3::new(h, h, 0.0),
        Vec3::new(-h, h, 0.0),
    ];
    for ranged in observations {
        let obs = &ranged.observation;
        let Some(anchor) = layout.anchor_for(obs.marker_id) else {
            if !set.skipped_marker_ids.contains(&obs.marker_id) {
                set.skipped_marker_ids.push(obs.marker_id);
            }
            continue;
        };
        let sigma = detection.translation_sigma(ranged.distance).max(SIGMA_FLOOR);
        let weight = obs.confidence / (sigma * sigma);
        let model_points = marker_corners(anchor, layout.marker_size);
        for (model_point, local) in model_points.into_iter().zip(local_corners) {
            set.correspondences.push(Correspondence {
                model_point,
                world_point: obs.measured_pose.apply(local),
                weight,
            });
        }
        for _ in 0..4 {
            set.marker_of.push(obs.marker_id);
        }
    }
    set
}

/// Indices of correspondences that survive one median-based rejection pass.
/// Residuals above `k` times the (lower) median residual are dropped, but
/// never below 3 survivors: if the filter would go lower, the 3 smallest
/// residuals are kept instead.
pub fn reject_outlier_indices(
    correspondences: &[Correspondence],
    transform: &Pose,
    k: f64,
) -> Vec<usize> {
    assert!(k > 0.0, "rejection multiplier must be positive");
    let residuals: Vec<f64> = correspondences
        .iter()
        .map(|c| (transform.apply(c.model_point) - c.world_point).norm())
        .collect();

    let mut sorted = residuals.clone();
    sorted.sort_by(|a, b| a.partial_cmp(b).expect("finite residuals"));
    if sorted.is_empty() {
        return Vec::new();
    }
    let median = sorted[(sorted.len() - 1) / 2]; // lower median
    let threshold = k * median;

    let kept: Vec<usize> = (0..correspondences.len())
        .filter(|&i| residuals[i] <= threshold)
        .collect();
    if kept.len() >= 3 || kept.len() == correspondences.len() {
        return kept;
    }

    // floor rule: keep the 3 smallest residuals (ties broken by index)
    let mut order: Vec<usize> = (0..correspondences.len()).collect();
    order.sort_by(|&a, &b| {
        residuals[a]
            .partial_cmp(&residuals[b])
            .expect("finite residuals")
            .then(a.cmp(&b))
    });
    let mut floor: Vec<usize> = order.into_iter().take(3.min(correspondences.len())).collect();
    floor.sort_unstable();
    floor
}

/// Filtered copy of the correspondences (see [`reject_outlier_indices`]).
pub fn reject_outliers(
    correspondences: &[Correspondence],
    transform: &Pose,
    k: f64,
) -> Vec<Correspondence> {
    reject_outlier_indices(correspondences, transform, k)
        .into_iter()
        .map(|i| correspondences[i])
        .collect()
}

/// Chordal mean of poses: component mean of sign-aligned quaternions
/// (renormalized) and arithmetic mean of translations. Adequate for the
/// tight clusters produced by repeated sightings of one marker.
fn mean_pose(poses: &[Pose]) -> Pose {
    assert!(!poses.is_empty());
    let reference = poses[0].rotation;
    let mut qw = 0.0;
    let mut qx = 0.0;
    let mut qy = 0.0;
    let mut qz = 0.0;
    let mut t = Vec3::ZERO;
    for pose in poses {
        let mut q = pose.rotation;
        if q.dot(reference) < 0.0 {
            q = crate::geometry::UnitQuat::new(-q.w, -q.x, -q.y, -q.z);
        }
        qw += q.w;
        qx += q.x;
        qy += q.y;
        qz += q.z;
        t = t + pose.translation;
    }
    let n = poses.len() as f64;
    Pose::new(
        crate::geometry::UnitQuat::new(qw, qx, qy, qz),
        t * (1.0 / n),
    )
}

/// Fuse marker observations into a model-to-world alignment: build
/// correspondences, fit, reject outliers once, refit, and compute
/// per-marker residuals.
pub fn fuse(
    observations: &[RangedObservation],
    layout: &MarkerLayout,
    detection: &DetectionParams,
) -> Result<AlignmentResult, RegistrationError> {
    let set = observations_to_correspondences(observations, layout, detection);
    if set.correspondences.is_empty() {
        return Err(RegistrationError::NoObservations);
    }

    let mut observed_ids: BTreeSet<u16> = set.marker_of.iter().copied().collect();

    if observed_ids.len() == 1 {
        let marker_id = *observed_ids.iter().next().expect("one marker");
        let anchor = layout.anchor_for(marker_id).expect("known marker");
        let poses: Vec<Pose> = observations
            .iter()
            .filter(|r| r.observation.marker_id == marker_id)
            .map(|r| r.observation.measured_pose)
            .collect();
        let mean = mean_pose(&poses);
        let transform = mean.compose(&anchor.pose_in_model.inverse());
        let mut per_marker_residual = BTreeMap::new();
        per_marker_residual.insert(marker_id, Pose::identity());
        return Ok(AlignmentResult {
            transform,
            rmse: 0.0,
            per_marker_residual,
            used_markers: observed_ids.clone(),
            rejected_markers: BTreeSet::new(),
            single_marker: true,
        });
    }

    let initial = weighted_rigid_align(&set.correspondences)?;
    let kept = reject_outlier_indices(&set.correspondences, &initial.transform, OUTLIER_REJECTION_K);
    let survivors: Vec<Correspondence> = kept.iter().map(|&i| set.correspondences[i]).collect();
    let fit = weighted_rigid_align(&survivors)?;

    let used_markers: BTreeSet<u16> = kept.iter().map(|&i| set.marker_of[i]).collect();
    let rejected_markers: BTreeSet<u16> = observed_ids
        .iter()
        .copied()
        .filter(|id| !used_markers.contains(id))
        .collect();
    observed_ids.clear();

    let mut per_marker_residual = BTreeMap::new();
    for &marker_id in &used_markers {
        let anchor = layout.anchor_for(marker_id).expect("known marker");
        let poses: Vec<Pose> = observations
            .iter()
            .filter(|r| r.observation.marker_id == marker_id)
            .map(|r| r.observation.measured_pose)
            .collect();
        let mean = mean_pose(&poses);
        let predicted = fit.transform.compose(&anchor.pose_in_model);
        per_marker_residual.insert(marker_id, predicted.inverse().compose(&mean));
    }

    Ok(AlignmentResult {
        transform: fit.transform,
        rmse: fit.rmse,
        per_marker_residual,
        used_markers,
        rejected_markers,
        single_marker: false,
    })
}

/// Build the interpolated correction field from per-marker residuals.
///
/// Residuals are stored in each marker's predicted frame; a knot carries the
/// equivalent world-frame correction `G ∘ residual ∘ G⁻¹` (G = transform ∘
/// anchor pose) so that `knot ∘ transform` pins the prediction to the
/// observation at that marker.
pub fn build_correction_field(
    result: &AlignmentResult,
    layout: &MarkerLayout,
) -> Result<CorrectionField, RegistrationError> {
    if result.per_marker_residual.is_empty() {
        return Err(RegistrationError::EmptyResult);
    }
    let mut knots: Vec<CorrectionKnot> = result
        .per_marker_residual
        .iter()
        .filter_map(|(&marker_id, residual)| {
            let anchor = layout.anchor_for(marker_id)?;
            let g = result.transform.compose(&anchor.pose_in_model);
            let correction = g.compose(residual).compose(&g.inverse());
            Some(CorrectionKnot { arclength: anchor.arclength, correction })
        })
        .collect();
    if knots.is_empty() {
        return Err(RegistrationError::EmptyResult);
    }
    knots.sort_by(|a, b| a.arclength.partial_cmp(&b.arclength).expect("finite arclengths"));
    Ok(CorrectionField { knots })
}

/// Interpolate the correction at arclength `s`: clamped at the ends,
/// translation linear and rotation spherical between knots.
pub fn query_correction(field: &CorrectionField, s: f64) -> Result<Pose, RegistrationError> {
    let knots = &field.knots;
    let Some(first) = knots.first() else {
        return Err(RegistrationError::EmptyField);
    };
    if s <= first.arclength {
        return Ok(first.correction);
    }
    let last = knots.last().expect("non-empty");
    if s >= last.arclength {
        return Ok(last.correction);
    }
    let i = knots
        .partition_point(|k| k.arclength <= s)
        .saturating_sub(1);
    let (a, b) = (&knots[i], &knots[i + 1]);
    let u = (s - a.arclength) / (b.arclength - a.arclength);
    Ok(Pose::new(
        a.correction.rotation.slerp(b.correction.rotation, u),
        a.correction.translation + (b.correction.translation - a.correction.translation) * u,
    ))
}
