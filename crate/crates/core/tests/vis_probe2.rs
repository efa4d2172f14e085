use arglulam_core::driftsim::{run_session, DetectionParams, DriftParams, Profile, ProfileName, SessionConfig};
use arglulam_core::evaluation::{deviation_report, Strategy};
use arglulam_core::geometry::{generate_layout, BeamPreset, PlacementMode, DEFAULT_MARKER_SIZE};

fn factory(ds: f64, env: f64) -> Profile {
    Profile {
        name: ProfileName::Factory,
        drift: DriftParams { q_trans: 0.0003 * ds, q_rot: 0.0002 * ds, bias_trans: 0.0, bias_rot: 0.0 },
        detection: DetectionParams {
            max_range: 3.0, max_incidence: 70.0_f64.to_radians(), fov_half_angle: 42.0_f64.to_radians(),
            sigma0_trans: 0.0003, kappa_trans: 0.001, sigma_rot: 0.65_f64.to_radians(),
            detect_rate: 10.0, env_factor: env,
        },
    }
}

#[test]
fn final_check() {
    let runs = 50u64;
    let fact = factory(1.25, 1.5);
    let lab = { let mut p = factory(1.0, 1.0); p.name = ProfileName::Lab; p };
    for (name, profile) in [("factory", &fact), ("lab", &lab)] {
        for preset in BeamPreset::ALL {
            let mut means = vec![];
            for seed in 0..runs {
                let config = SessionConfig::from_profile(preset.layout(), profile, seed);
                means.push(deviation_report(&run_session(&config), Strategy::Interpolated).unwrap().mean_mm);
            }
            let m = means.iter().sum::<f64>() / runs as f64;
            let sd = (means.iter().map(|x| (x - m).powi(2)).sum::<f64>() / runs as f64).sqrt();
            println!("{name} {:>12}: {m:.3} ± {sd:.3}", preset.name());
        }
    }
    // criterion 4 sweep: fixed beam, 3 spacings, strict monotonicity
    let beam = BeamPreset::Chamfered40.beam();
    for (count, spacing) in [(17u32, 0.762), (11, 1.2192), (7, 1.8288)] {
        let layout = generate_layout(&beam, count, spacing, PlacementMode::EdgeTop, DEFAULT_MARKER_SIZE).unwrap();
        let m: f64 = (0..runs).map(|seed| {
            let config = SessionConfig::from_profile(layout.clone(), &fact, seed);
            deviation_report(&run_session(&config), Strategy::Interpolated).unwrap().mean_mm
        }).sum::<f64>() / runs as f64;
        println!("sweep {count}@{spacing}: {m:.3}");
    }
    // interpolated vs global paired
    for preset in BeamPreset::ALL {
        let (mut gi, mut gg) = (0.0, 0.0);
        for seed in 0..20u64 {
            let config = SessionConfig::from_profile(preset.layout(), &fact, seed);
            let log = run_session(&config);
            gi += deviation_report(&log, Strategy::Interpolated).unwrap().mean_mm;
            gg += deviation_report(&log, Strategy::GlobalFit).unwrap().mean_mm;
        }
        println!("{}: interp {:.3} vs global {:.3} ratio {:.3}", preset.name(), gi/20.0, gg/20.0, gi/gg);
    }
}
