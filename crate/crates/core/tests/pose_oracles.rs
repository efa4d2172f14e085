//! Cross-checks of the pose algebra against an independent matrix route:
//! rotations built with Rodrigues' formula, composed by plain 3x3 matrix
//! multiplication, applied through 4x4 homogeneous matrices.

use arglulam_core::geometry::{
    beam_frame, generate_layout, BeamKind, BeamSpec, PlacementMode, Pose, UnitQuat, Vec3,
};
use proptest::prelude::*;
use rand::{Rng, SeedableRng};
use rand_chacha::ChaCha8Rng;
use std::f64::consts::{FRAC_PI_2, PI};

type Mat3 = [[f64; 3]; 3];

/// Rodrigues' rotation formula: R = I + sin(a) K + (1 - cos(a)) K^2.
fn rodrigues(axis: [f64; 3], angle: f64) -> Mat3 {
    let n = (axis[0] * axis[0] + axis[1] * axis[1] + axis[2] * axis[2]).sqrt();
    let (ux, uy, uz) = (axis[0] / n, axis[1] / n, axis[2] / n);
    let k: Mat3 = [[0.0, -uz, uy], [uz, 0.0, -ux], [-uy, ux, 0.0]];
    let (s, c) = (angle.sin(), 1.0 - angle.cos());
    let mut r: Mat3 = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            let kk = (0..3).map(|l| k[i][l] * k[l][j]).sum::<f64>();
            r[i][j] = f64::from(i == j) + s * k[i][j] + c * kk;
        }
    }
    r
}

fn mat_mul(a: &Mat3, b: &Mat3) -> Mat3 {
    let mut out = [[0.0; 3]; 3];
    for i in 0..3 {
        for j in 0..3 {
            out[i][j] = (0..3).map(|l| a[i][l] * b[l][j]).sum();
        }
    }
    out
}

fn mat_apply(m: &Mat3, v: [f64; 3]) -> [f64; 3] {
    [
        m[0][0] * v[0] + m[0][1] * v[1] + m[0][2] * v[2],
        m[1][0] * v[0] + m[1][1] * v[1] + m[1][2] * v[2],
        m[2][0] * v[0] + m[2][1] * v[1] + m[2][2] * v[2],
    ]
}

fn random_pose(rng: &mut ChaCha8Rng) -> (Pose, [f64; 3], f64, [f64; 3]) {
    let axis = [
        rng.random_range(-1.0..1.0f64),
        rng.random_range(-1.0..1.0f64),
        rng.random_range(-1.0..1.0f64) + 1.5, // keep away from zero vector
    ];
    let angle = rng.random_range(-PI..PI);
    let t = [
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
        rng.random_range(-5.0..5.0),
    ];
    let pose = Pose::new(
        UnitQuat::from_axis_angle(Vec3::new(axis[0], axis[1], axis[2]), angle),
        Vec3::new(t[0], t[1], t[2]),
    );
    (pose, axis, angle, t)
}

#[test]
fn compose_matches_rotation_matrix_multiplication() {
    // the spec example first: Rz(90) twice is Rz(180)
    let rz90 = Pose::from_rotation(UnitQuat::from_axis_angle(Vec3::Z, FRAC_PI_2));
    let composed = rz90.compose(&rz90);
    let oracle = mat_mul(&rodrigues([0.0, 0.0, 1.0], FRAC_PI_2), &rodrigues([0.0, 0.0, 1.0], FRAC_PI_2));
    for probe in [[1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.3, -0.7, 2.0]] {
        let got = composed.apply(Vec3::new(probe[0], probe[1], probe[2]));
        let want = mat_apply(&oracle, probe);
        assert!((got.x - want[0]).abs() < 1e-9);
        assert!((got.y - want[1]).abs() < 1e-9);
        assert!((got.z - want[2]).abs() < 1e-9);
    }

    // then random rotation pairs
    let mut rng = ChaCha8Rng::seed_from_u64(0xC0);
    for _ in 0..250 {
        let (pa, axa, anga, _) = random_pose(&mut rng);
        let (pb, axb, angb, _) = random_pose(&mut rng);
        let a = Pose::from_rotation(pa.rotation);
        let b = Pose::from_rotation(pb.rotation);
        let composed = a.compose(&b);
        let oracle = mat_mul(&rodrigues(axa, anga), &rodrigues(axb, angb));
        let probe = [0.8, -1.2, 0.5];
        let got = composed.apply(Vec3::new(probe[0], probe[1], probe[2]));
        let want = mat_apply(&oracle, probe);
        let err = ((got.x - want[0]).powi(2) + (got.y - want[1]).powi(2) + (got.z - want[2]).powi(2))
            .sqrt();
        assert!(err < 1e-9, "compose disagrees with matrix oracle by {err}");
    }
}

#[test]
fn apply_matches_homogeneous_matrix_oracle() {
    let mut rng = ChaCha8Rng::seed_from_u64(0xA11);
    for _ in 0..500 {
        let (pose, axis, angle, t) = random_pose(&mut rng);
        let r = rodrigues(axis, angle);
        let point = [
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
            rng.random_range(-3.0..3.0),
        ];
        // homogeneous [R t; 0 1] acting on [p; 1]
        let rotated = mat_apply(&r, point);
        let want = [rotated[0] + t[0], rotated[1] + t[1], rotated[2] + t[2]];
        let got = pose.apply(Vec3::new(point[0], point[1], point[2]));
        let err = ((got.x - want[0]).powi(2) + (got.y - want[1]).powi(2) + (got.z - want[2]).powi(2))
            .sqrt();
        assert!(err < 1e-12, "apply disagrees with homogeneous oracle by {err}");
    }
}

#[test]
fn thousand_random_poses_invert_to_identity() {
    let mut rng = ChaCha8Rng::seed_from_u64(0x1D);
    for _ in 0..1000 {
        let (pose, ..) = random_pose(&mut rng);
        let roundtrip = pose.compose(&pose.inverse());
        assert!(roundtrip.deviation_from(&Pose::identity()) < 1e-9);
    }
}

fn arb_pose() -> impl Strategy<Value = Pose> {
    (
        (-1.0..1.0f64, -1.0..1.0f64, 0.2..1.0f64),
        -PI..PI,
        (-5.0..5.0f64, -5.0..5.0f64, -5.0..5.0f64),
    )
        .prop_map(|(axis, angle, t)| {
            Pose::new(
                UnitQuat::from_axis_angle(Vec3::new(axis.0, axis.1, axis.2), angle),
                Vec3::new(t.0, t.1, t.2),
            )
        })
}

proptest! {
    #[test]
    fn compose_is_associative(a in arb_pose(), b in arb_pose(), c in arb_pose()) {
        let left = a.compose(&b).compose(&c);
        let right = a.compose(&b.compose(&c));
        prop_assert!(left.deviation_from(&right) < 1e-9);
    }

    #[test]
    fn apply_distributes_over_compose(a in arb_pose(), b in arb_pose(),
                                      x in (-3.0..3.0f64, -3.0..3.0f64, -3.0..3.0f64)) {
        let p = Vec3::new(x.0, x.1, x.2);
        let via_compose = a.compose(&b).apply(p);
        let via_sequence = a.apply(b.apply(p));
        prop_assert!((via_compose - via_sequence).norm() < 1e-9);
    }

    #[test]
    fn layout_anchors_sorted_and_symmetric(count in 2u32..12, spacing in 0.05..3.0f64) {
        let beam = BeamSpec {
            id: "prop".into(),
            length: 8.0,
            kind: BeamKind::Straight,
            total_twist: 0.0,
            width: 0.15,
            height: 0.40,
        };
        let layout = generate_layout(&beam, count, spacing, PlacementMode::EdgeTop, 0.1).unwrap();
        for pair in layout.anchors.windows(2) {
            prop_assert!(pair[1].arclength > pair[0].arclength);
        }
        if !layout.infeasible_spacing {
            let first = layout.anchors.first().unwrap().arclength;
            let last = layout.anchors.last().unwrap().arclength;
            prop_assert!((first + last - beam.length).abs() < 1e-9);
        }
    }

    #[test]
    fn untwisted_frames_have_identity_rotation(s in 0.0..6.0f64) {
        let beam = BeamSpec {
            id: "prop".into(),
            length: 6.0,
            kind: BeamKind::Chamfered,
            total_twist: 0.0,
            width: 0.15,
            height: 0.40,
        };
        let frame = beam_frame(&beam, s).unwrap();
        prop_assert!(frame.rotation.angle() < 1e-15);
        prop_assert!((frame.translation.x - s).abs() < 1e-15);
    }
}
