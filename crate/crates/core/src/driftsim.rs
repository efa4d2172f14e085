//! Deterministic seeded simulation of headset tracking drift, marker
//! visibility, and noisy marker detection during a fabrication walk-along.
//!
//! # Conventions
//!
//! - The headset frame has +x forward; only the forward axis matters for the
//!   field-of-view test.
//! - Drift is the error of the headset's self-tracking: perception of a
//!   physical pose `W` is `drift⁻¹ ∘ W`, so a hologram displayed at perceived
//!   coordinates `p` lands physically at `drift ∘ p`.
//! - RNG: ChaCha8 with 64-bit seed and explicit stream splitting — stream 0
//!   drives drift, stream `1 + marker_id` drives that marker's detection
//!   noise. Adding or removing markers never perturbs the drift trajectory
//!   or other markers' draws.

use std::collections::BTreeMap;

use rand::SeedableRng;
use rand_chacha::ChaCha8Rng;
use rand_distr::{Distribution, Normal, UnitSphere};
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::{MarkerAnchor, MarkerLayout, Pose, UnitQuat, Vec3};
use crate::registration::Observation;

#[derive(Debug, Error)]
pub enum SimError {
    #[error("invalid session config: {0}")]
    InvalidConfig(String),
}

/// Random-walk and bias intensities for headset tracking drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftParams {
    /// Translation random-walk intensity per axis, m/√s.
    pub q_trans: f64,
    /// Rotation random-walk intensity per axis, rad/√s.
    pub q_rot: f64,
    /// Systematic translation drift per axis, m/s.
    pub bias_trans: f64,
    /// Systematic rotation drift per axis, rad/s.
    pub bias_rot: f64,
}

impl DriftParams {
    pub fn zero() -> Self {
        Self { q_trans: 0.0, q_rot: 0.0, bias_trans: 0.0, bias_rot: 0.0 }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        let ok = self.q_trans >= 0.0
            && self.q_rot >= 0.0
            && self.bias_trans >= 0.0
            && self.bias_rot >= 0.0;
        if ok {
            Ok(())
        } else {
            Err(SimError::InvalidConfig("drift intensities must be non-negative".into()))
        }
    }
}

/// Geometric visibility limits and measurement noise of marker detection.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DetectionParams {
    /// Maximum detection distance, meters.
    pub max_range: f64,
    /// Maximum angle between the reverse view ray and the marker normal, rad.
    pub max_incidence: f64,
    /// Half-angle of the detection cone around the headset forward axis, rad.
    pub fov_half_angle: f64,
    /// Translation noise floor, meters.
    pub sigma0_trans: f64,
    /// Translation noise growth per meter of distance, m/m.
    pub kappa_trans: f64,
    /// Rotation noise, radians.
    pub sigma_rot: f64,
    /// Detection tick rate, Hz.
    pub detect_rate: f64,
    /// Environment multiplier on all measurement noise (1 = lab conditions).
    pub env_factor: f64,
}

impl DetectionParams {
    /// Translation noise std at observer distance `d`.
    pub fn translation_sigma(&self, d: f64) -> f64 {
        self.env_factor * (self.sigma0_trans + self.kappa_trans * d)
    }

    /// Rotation noise std.
    pub fn rotation_sigma(&self) -> f64 {
        self.env_factor * self.sigma_rot
    }

    pub fn validate(&self) -> Result<(), SimError> {
        if !(self.max_range > 0.0) {
            return Err(SimError::InvalidConfig("max_range must be positive".into()));
        }
        if !(self.max_incidence > 0.0 && self.max_incidence <= std::f64::consts::FRAC_PI_2) {
            return Err(SimError::InvalidConfig("max_incidence must be in (0, pi/2]".into()));
        }
        if !(self.fov_half_angle > 0.0) {
            return Err(SimError::InvalidConfig("fov_half_angle must be positive".into()));
        }
        if self.sigma0_trans < 0.0 || self.kappa_trans < 0.0 || self.sigma_rot < 0.0 {
            return Err(SimError::InvalidConfig("noise sigmas must be non-negative".into()));
        }
        if !(self.detect_rate > 0.0) {
            return Err(SimError::InvalidConfig("detect_rate must be positive".into()));
        }
        if self.env_factor < 1.0 {
            return Err(SimError::InvalidConfig("env_factor must be at least 1".into()));
        }
        Ok(())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum ProfileName {
    Lab,
    Factory,
}

impl std::str::FromStr for ProfileName {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "lab" => Ok(ProfileName::Lab),
            "factory" => Ok(ProfileName::Factory),
            other => Err(format!("unknown profile '{other}' (expected lab or factory)")),
        }
    }
}

/// A named environment profile: drift plus detection parameters.
///
/// The numbers are calibration results, frozen once the bundled presets
/// reproduce the deviations measured on the shop floor; none of them is
/// ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct Profile {
    pub name: ProfileName,
    pub drift: DriftParams,
    pub detection: DetectionParams,
}

impl Profile {
    pub fn lab() -> Self {
        Self {
            name: ProfileName::Lab,
            drift: DriftParams {
                q_trans: 0.0005,
                q_rot: 0.0012,
                bias_trans: 0.0,
                bias_rot: 0.0,
            },
            detection: DetectionParams {
                max_range: 3.0,
                max_incidence: 60.0_f64.to_radians(),
                fov_half_angle: 45.0_f64.to_radians(),
                sigma0_trans: 0.0005,
                kappa_trans: 0.0005,
                sigma_rot: 0.2_f64.to_radians(),
                detect_rate: 10.0,
                env_factor: 1.0,
            },
        }
    }

    pub fn factory() -> Self {
        let lab = Self::lab();
        Self {
            name: ProfileName::Factory,
            drift: DriftParams {
                q_trans: 0.0007,
                q_rot: 0.0016,
                ..lab.drift
            },
            detection: DetectionParams { env_factor: 1.5, ..lab.detection },
        }
    }

    pub fn named(name: ProfileName) -> Self {
        match name {
            ProfileName::Lab => Self::lab(),
            ProfileName::Factory => Self::factory(),
        }
    }

    /// The profile with all stochastic terms removed; useful as a control.
    pub fn noiseless(mut self) -> Self {
        self.drift = DriftParams::zero();
        self.detection.sigma0_trans = 0.0;
        self.detection.kappa_trans = 0.0;
        self.detection.sigma_rot = 0.0;
        self
    }
}

/// Default walk-along parameters. The operator paces the beam at a steady
/// speed, offset to the +y side, eyes above the beam top, always facing the
/// nearest point on the beam edge.
pub const DEFAULT_WALK_SPEED: f64 = 0.3;
pub const DEFAULT_LATERAL_OFFSET: f64 = 1.0;
pub const DEFAULT_EYE_HEIGHT: f64 = 0.8;
pub const DEFAULT_DURATION: f64 = 120.0;

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionConfig {
    pub layout: MarkerLayout,
    pub drift: DriftParams,
    pub detection: DetectionParams,
    /// Walking speed along the beam, m/s.
    pub walk_speed: f64,
    /// Sideways offset of the walk path from the beam centerline, meters.
    pub lateral_offset: f64,
    /// Eye height above the beam top face, meters.
    pub eye_height: f64,
    /// Session duration, seconds.
    pub duration: f64,
    pub seed: u64,
    /// Placement of the beam model in the world frame.
    #[serde(default = "Pose::identity")]
    pub model_pose: Pose,
}

impl SessionConfig {
    pub fn from_profile(layout: MarkerLayout, profile: &Profile, seed: u64) -> Self {
        Self {
            layout,
            drift: profile.drift,
            detection: profile.detection,
            walk_speed: DEFAULT_WALK_SPEED,
            lateral_offset: DEFAULT_LATERAL_OFFSET,
            eye_height: DEFAULT_EYE_HEIGHT,
            duration: DEFAULT_DURATION,
            seed,
            model_pose: Pose::identity(),
        }
    }

    pub fn validate(&self) -> Result<(), SimError> {
        self.layout
            .validate()
            .map_err(|e| SimError::InvalidConfig(e.to_string()))?;
        self.drift.validate()?;
        self.detection.validate()?;
        if !(self.walk_speed > 0.0) {
            return Err(SimError::InvalidConfig("walk_speed must be positive".into()));
        }
        if !(self.duration > 0.0) {
            return Err(SimError::InvalidConfig("duration must be positive".into()));
        }
        if self.lateral_offset < 0.0 || self.eye_height < 0.0 {
            return Err(SimError::InvalidConfig(
                "lateral_offset and eye_height must be non-negative".into(),
            ));
        }
        Ok(())
    }
}

/// One simulation tick: the operator's true pose and the tracking drift.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct DriftSample {
    pub time: f64,
    pub headset: Pose,
    pub drift: Pose,
}

/// One marker sighting together with simulation ground truth.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ObservationRecord {
    pub observation: Observation,
    /// True distance from headset to marker center at sighting time, meters.
    pub observer_distance: f64,
    /// True marker pose in the world frame.
    pub true_marker_world: Pose,
}

/// Complete simulated fabrication session with ground truth.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SessionLog {
    pub config: SessionConfig,
    pub samples: Vec<DriftSample>,
    pub observations: Vec<ObservationRecord>,
}

impl SessionLog {
    pub fn to_json(&self) -> String {
        serde_json::to_string(self).expect("session log serializes")
    }

    pub fn from_json(s: &str) -> Result<Self, serde_json::Error> {
        serde_json::from_str(s)
    }
}

fn drift_rng(seed: u64) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(0);
    rng
}

fn marker_rng(seed: u64, marker_id: u16) -> ChaCha8Rng {
    let mut rng = ChaCha8Rng::seed_from_u64(seed);
    rng.set_stream(1 + marker_id as u64);
    rng
}

fn sample_normal(rng: &mut ChaCha8Rng, mean: f64, std: f64) -> f64 {
    Normal::new(mean, std).expect("valid normal parameters").sample(rng)
}

/// Draw the per-step drift increments: translation per axis
/// Normal(bias_trans·dt, q_trans²·dt), rotation-vector component per axis
/// Normal(bias_rot·dt, q_rot²·dt). Deterministic given the seed.
fn drift_increments(params: &DriftParams, steps: usize, dt: f64, seed: u64) -> Vec<Pose> {
    let mut rng = drift_rng(seed);
    let sqrt_dt = dt.sqrt();
    (0..steps)
        .map(|_| {
            let t = Vec3::new(
                sample_normal(&mut rng, params.bias_trans * dt, params.q_trans * sqrt_dt),
                sample_normal(&mut rng, params.bias_trans * dt, params.q_trans * sqrt_dt),
                sample_normal(&mut rng, params.bias_trans * dt, params.q_trans * sqrt_dt),
            );
            let rv = Vec3::new(
                sample_normal(&mut rng, params.bias_rot * dt, params.q_rot * sqrt_dt),
                sample_normal(&mut rng, params.bias_rot * dt, params.q_rot * sqrt_dt),
                sample_normal(&mut rng, params.bias_rot * dt, params.q_rot * sqrt_dt),
            );
            Pose::new(UnitQuat::from_rotvec(rv), t)
        })
        .collect()
}

/// Simulate the drift random walk at step `dt`, starting from identity.
/// Returns `floor(duration/dt) + 1` poses, one per tick including t = 0.
pub fn simulate_drift(params: &DriftParams, duration: f64, dt: f64, seed: u64) -> Vec<Pose> {
    assert!(dt > 0.0, "dt must be positive");
    let steps = (duration / dt).floor() as usize;
    let mut series = Vec::with_capacity(steps + 1);
    let mut current = Pose::identity();
    series.push(current);
    for increment in drift_increments(params, steps, dt, seed) {
        current = current.compose(&increment);
        series.push(current);
    }
    series
}

fn marker_visible(
    headset: &Pose,
    model_to_world: &Pose,
    anchor: &MarkerAnchor,
    detection: &DetectionParams,
) -> bool {
    let marker_world = model_to_world.compose(&anchor.pose_in_model);
    let normal = marker_world.rotation.rotate(Vec3::Z);
    let view_ray = marker_world.translation - headset.translation;
    let distance = view_ray.norm();
    if distance > detection.max_range || distance < 1e-9 {
        return false;
    }
    let forward = headset.rotation.rotate(Vec3::X);
    if view_ray.angle_to(forward) > detection.fov_half_angle {
        return false;
    }
    (-view_ray).angle_to(normal) <= detection.max_incidence
}

/// Marker ids visible from the given true headset pose (drift plays no role
/// in visibility; it only corrupts the measurement).
pub fn visible_markers(
    headset: &Pose,
    model_to_world: &Pose,
    layout: &MarkerLayout,
    detection: &DetectionParams,
) -> Vec<u16> {
    layout
        .anchors
        .iter()
        .filter(|a| marker_visible(headset, model_to_world, a, detection))
        .map(|a| a.marker_id)
        .collect()
}

/// Produce one noisy observation of a visible marker.
///
/// The perceived pose is `drift⁻¹ ∘ true_pose` with additive per-axis
/// translation noise and a small rotation about a uniformly random axis.
/// Confidence decays linearly with distance, floored at 0.05.
pub fn observe(
    headset: &Pose,
    drift: &Pose,
    anchor: &MarkerAnchor,
    model_to_world: &Pose,
    detection: &DetectionParams,
    time: f64,
    rng: &mut ChaCha8Rng,
) -> ObservationRecord {
    let true_world = model_to_world.compose(&anchor.pose_in_model);
    let distance = (true_world.translation - headset.translation).norm();
    let base = drift.inverse().compose(&true_world);

    let sigma_t = detection.translation_sigma(distance);
    let noise = Vec3::new(
        sample_normal(rng, 0.0, sigma_t),
        sample_normal(rng, 0.0, sigma_t),
        sample_normal(rng, 0.0, sigma_t),
    );
    let angle = sample_normal(rng, 0.0, detection.rotation_sigma());
    let axis: [f64; 3] = UnitSphere.sample(rng);
    let rotation_noise = UnitQuat::from_axis_angle(Vec3::new(axis[0], axis[1], axis[2]), angle);

    let measured_pose = Pose::new(
        rotation_noise * base.rotation,
        base.translation + noise,
    );
    let confidence = (1.0 - distance / detection.max_range).clamp(0.05, 1.0);

    ObservationRecord {
        observation: Observation {
            marker_id: anchor.marker_id,
            measured_pose,
            time,
            confidence,
        },
        observer_distance: distance,
        true_marker_world: true_world,
    }
}

/// True operator pose at time `t`: a triangle-wave walk along the beam,
/// facing the nearest point on the beam's top edge.
pub fn walk_pose(config: &SessionConfig, t: f64) -> Pose {
    let beam = &config.layout.beam;
    let cycle = 2.0 * beam.length; // out and back, in meters
    let phase = (config.walk_speed * t) % cycle;
    let s = if phase <= beam.length { phase } else { cycle - phase };

    let eye = Vec3::new(s, config.lateral_offset, beam.height / 2.0 + config.eye_height);
    let target = Vec3::new(s, 0.0, beam.height / 2.0);

    let position = config.model_pose.apply(eye);
    let forward = (config.model_pose.apply(target) - position)
        .normalized()
        .unwrap_or(Vec3::X);
    let up_hint = config.model_pose.rotation.rotate(Vec3::Z);
    let mut side = up_hint.cross(forward);
    if side.norm() < 1e-9 {
        side = config.model_pose.rotation.rotate(Vec3::Y).cross(forward);
    }
    let side = side.normalized().unwrap_or(Vec3::Y);
    let up = forward.cross(side);

    // rows of the rotation matrix are the world axes expressed per headset
    // axis: columns x=forward, y=side, z=up
    let rotation = UnitQuat::from_matrix(&[
        [forward.x, side.x, up.x],
        [forward.y, side.y, up.y],
        [forward.z, side.z, up.z],
    ]);
    Pose::new(rotation, position)
}

/// Run a full deterministic session.
///
/// The headset walks back and forth for `duration` seconds; drift advances
/// at the detection tick rate; every visible marker yields one observation
/// per tick.
pub fn run_session(config: &SessionConfig) -> SessionLog {
    config.validate().expect("session config must be valid");
    let detection = config.detection;
    let dt = 1.0 / detection.detect_rate;
    let ticks = (config.duration * detection.detect_rate).floor() as usize;

    let increments = drift_increments(&config.drift, ticks, dt, config.seed);
    let mut marker_rngs: BTreeMap<u16, ChaCha8Rng> = config
        .layout
        .anchors
        .iter()
        .map(|a| (a.marker_id, marker_rng(config.seed, a.marker_id)))
        .collect();

    let mut samples = Vec::with_capacity(ticks + 1);
    let mut observations = Vec::new();
    let mut drift = Pose::identity();
    for k in 0..=ticks {
        let t = k as f64 * dt;
        let headset = walk_pose(config, t);
        if k > 0 {
            // tracking error accrues about the operator, not the map origin:
            // conjugate the raw increment so its rotation pivots at the
            // perceived headset position of the previous tick
            let previous = walk_pose(config, (k - 1) as f64 * dt);
            let pivot = Pose::from_translation(drift.inverse().apply(previous.translation));
            let centered = pivot.compose(&increments[k - 1]).compose(&pivot.inverse());
            drift = drift.compose(&centered);
        }
        samples.push(DriftSample { time: t, headset, drift });

        for anchor in &config.layout.anchors {
            if marker_visible(&headset, &config.model_pose, anchor, &detection) {
                let rng = marker_rngs
                    .get_mut(&anchor.marker_id)
                    .expect("rng exists for every anchor");
                observations.push(observe(
                    &headset,
                    &drift,
                    anchor,
                    &config.model_pose,
                    &detection,
                    t,
                    rng,
                ));
            }
        }
    }

    SessionLog { config: config.clone(), samples, observations }
}
