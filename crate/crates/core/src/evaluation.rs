//! Overlay-deviation measurement against simulation ground truth, tolerance
//! checks, and marker-spacing sweeps.
//!
//! The measurement procedure mimics a worker marking layout lines while
//! pacing the beam: sample points every 0.1 m along the top edge are each
//! evaluated at the instant the operator passes closest to them, fusing the
//! trailing 2 s of marker observations at that instant.

use rayon::prelude::*;
use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::driftsim::{run_session, Profile, SessionConfig, SessionLog};
use crate::geometry::{
    beam_frame, generate_layout, BeamSpec, GeometryError, PlacementMode, Vec3, DEFAULT_MARKER_SIZE,
};
use crate::registration::{
    build_correction_field, fuse, query_correction, AlignmentResult, CorrectionField,
    RangedObservation,
};

/// Evaluation sample pitch along the beam, meters.
pub const SAMPLE_STEP_M: f64 = 0.1;

/// Observations fused per evaluation instant: the trailing window, seconds.
pub const FUSION_WINDOW_SECS: f64 = 2.0;

/// A window needs this many observations before its fit is trusted;
/// thinner windows fall back to the previous fit like empty ones do.
pub const MIN_WINDOW_OBSERVATIONS: usize = 10;

#[derive(Debug, Error)]
pub enum EvaluationError {
    #[error("session log contains no observations")]
    NoObservations,
    #[error(transparent)]
    Geometry(#[from] GeometryError),
    #[error("io error: {0}")]
    Io(#[from] std::io::Error),
}

/// Fabrication tolerance on the mean overlay deviation, millimeters.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct ToleranceSpec {
    pub limit_mm: f64,
}

impl Default for ToleranceSpec {
    fn default() -> Self {
        Self { limit_mm: 2.0 }
    }
}

/// How the fused alignment is applied to a sample point.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
#[serde(rename_all = "snake_case")]
pub enum Strategy {
    /// The global rigid fit alone.
    GlobalFit,
    /// Global fit refined by the interpolated per-marker correction field.
    Interpolated,
}

impl std::str::FromStr for Strategy {
    type Err = String;
    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "global_fit" | "global-fit" | "global" => Ok(Strategy::GlobalFit),
            "interpolated" => Ok(Strategy::Interpolated),
            other => Err(format!(
                "unknown strategy '{other}' (expected global_fit or interpolated)"
            )),
        }
    }
}

/// Deviation at one sample point.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SampleDeviation {
    /// Sample arclength along the beam, meters.
    pub arclength: f64,
    /// Distance between displayed and true point, millimeters.
    pub deviation_mm: f64,
    /// Simulation time at which the sample was evaluated, seconds.
    pub time: f64,
    /// Set when no marker was visible in the fusion window and the most
    /// recent earlier fit had to be reused.
    pub stale: bool,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct DeviationReport {
    pub per_sample: Vec<SampleDeviation>,
    pub mean_mm: f64,
    pub max_mm: f64,
    pub std_mm: f64,
    pub strategy: Strategy,
    /// Mean against the default 2 mm fabrication tolerance.
    pub pass_tolerance: bool,
}

/// True iff the report's mean deviation is within tolerance (inclusive).
pub fn tolerance_check(report: &DeviationReport, tol: &ToleranceSpec) -> bool {
    report.mean_mm <= tol.limit_mm
}

struct WindowFit {
    result: AlignmentResult,
    field: CorrectionField,
}

fn fit_window(log: &SessionLog, t_end: f64, min_obs: usize) -> Option<WindowFit> {
    let t_start = t_end - FUSION_WINDOW_SECS;
    let window: Vec<RangedObservation> = log
        .observations
        .iter()
        .filter(|r| r.observation.time >= t_start && r.observation.time <= t_end)
        .map(|r| RangedObservation {
            observation: r.observation,
            distance: r.observer_distance,
        })
        .collect();
    if window.len() < min_obs {
        return None;
    }
    let result = fuse(&window, &log.config.layout, &log.config.detection).ok()?;
    let field = build_correction_field(&result, &log.config.layout).ok()?;
    Some(WindowFit { result, field })
}

/// Compute the overlay deviation report for a simulated session.
pub fn deviation_report(
    log: &SessionLog,
    strategy: Strategy,
) -> Result<DeviationReport, EvaluationError> {
    if log.observations.is_empty() {
        return Err(EvaluationError::NoObservations);
    }
    let beam = &log.config.layout.beam;
    let model_pose = log.config.model_pose;

    // sample points along the top edge of the beam
    let count = (beam.length / SAMPLE_STEP_M).floor() as usize + 1;
    let mut samples = Vec::with_capacity(count);
    // A back-and-forth walk passes each point many times at essentially the
    // same closest distance; tick quantization would otherwise pick an
    // arbitrary (often late) pass. The worker marks a point the first time
    // they reach it, so take the earliest tick within a millimeter of the
    // closest approach.
    const APPROACH_SLACK_M: f64 = 1e-3;
    for i in 0..count {
        let s = (i as f64 * SAMPLE_STEP_M).min(beam.length);
        let model_point = beam_frame(beam, s)?.apply(Vec3::new(0.0, 0.0, beam.height / 2.0));
        let world_point = model_pose.apply(model_point);
        let mut best_dist = f64::INFINITY;
        for tick in &log.samples {
            let d = (tick.headset.translation - world_point).norm();
            if d < best_dist {
                best_dist = d;
            }
        }
        let best_tick = log
            .samples
            .iter()
            .position(|tick| {
                (tick.headset.translation - world_point).norm() <= best_dist + APPROACH_SLACK_M
            })
            .expect("some tick is nearest");
        samples.push((s, model_point, best_tick));
    }

    // evaluate in time order so stale samples reuse the most recent fit
    let mut order: Vec<usize> = (0..samples.len()).collect();
    order.sort_by_key(|&i| samples[i].2);

    let mut fits: Vec<Option<(usize, bool)>> = vec![None; samples.len()]; // (fit idx, stale)
    let mut cache: Vec<WindowFit> = Vec::new();
    // a sparse log may never fill a window to the evidence floor; accept
    // thinner windows then rather than failing the whole report
    for min_obs in [MIN_WINDOW_OBSERVATIONS, 1] {
        cache.clear();
        fits.iter_mut().for_each(|f| *f = None);
        let mut last_fit: Option<usize> = None;
        let mut pending: Vec<usize> = Vec::new(); // samples before the first fit
        for &i in &order {
            let (_, _, tick) = samples[i];
            let t_end = log.samples[tick].time;
            match fit_window(log, t_end, min_obs) {
                Some(fit) => {
                    cache.push(fit);
                    let idx = cache.len() - 1;
                    last_fit = Some(idx);
                    fits[i] = Some((idx, false));
                    for &p in &pending {
                        fits[p] = Some((idx, true));
                    }
                    pending.clear();
                }
                None => match last_fit {
                    Some(idx) => fits[i] = Some((idx, true)),
                    None => pending.push(i),
                },
            }
        }
        if pending.is_empty() && !cache.is_empty() {
            break;
        }
    }
    if fits.iter().any(|f| f.is_none()) {
        return Err(EvaluationError::NoObservations);
    }

    let mut per_sample = Vec::with_capacity(samples.len());
    for (i, &(s, model_point, tick)) in samples.iter().enumerate() {
        let (fit_idx, stale) = fits[i].expect("every sample resolved");
        let fit = &cache[fit_idx];
        let aligned = match strategy {
            Strategy::GlobalFit => fit.result.transform,
            Strategy::Interpolated => {
                let correction =
                    query_correction(&fit.field, s).expect("field built from >= 1 residual");
                correction.compose(&fit.result.transform)
            }
        };
        // the hologram is placed in perceived coordinates; the tracking drift
        // at evaluation time re-expresses it in the physical world
        let drift = log.samples[tick].drift;
        let displayed = drift.apply(aligned.apply(model_point));
        let truth = model_pose.apply(model_point);
        per_sample.push(SampleDeviation {
            arclength: s,
            deviation_mm: (displayed - truth).norm() * 1000.0,
            time: log.samples[tick].time,
            stale,
        });
    }

    let n = per_sample.len() as f64;
    let mean_mm = per_sample.iter().map(|d| d.deviation_mm).sum::<f64>() / n;
    let max_mm = per_sample.iter().map(|d| d.deviation_mm).fold(0.0, f64::max);
    let var = per_sample
        .iter()
        .map(|d| (d.deviation_mm - mean_mm).powi(2))
        .sum::<f64>()
        / n;
    let report = DeviationReport {
        per_sample,
        mean_mm,
        max_mm,
        std_mm: var.sqrt(),
        strategy,
        pass_tolerance: mean_mm <= ToleranceSpec::default().limit_mm,
    };
    Ok(report)
}

/// One sweep configuration: marker count and spacing on the fixed beam.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepConfig {
    pub count: u32,
    pub spacing: f64,
    pub placement: PlacementMode,
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct SweepRow {
    pub spacing_m: f64,
    pub count: u32,
    pub runs: u32,
    /// Mean over runs of the per-run mean deviation, mm.
    pub mean_mm: f64,
    /// Std over runs of the per-run mean deviation, mm.
    pub std_mm: f64,
    /// Max over runs of the per-run max deviation, mm.
    pub max_mm: f64,
    /// Fraction of runs whose mean passed the tolerance.
    pub pass_rate: f64,
}

#[derive(Debug, Clone, PartialEq, Default, Serialize, Deserialize)]
pub struct SweepResult {
    pub rows: Vec<SweepRow>,
}

/// Run `runs` seeded sessions per configuration and aggregate deviation
/// statistics. Sessions run in parallel; seeds are `base_seed + run index`,
/// so results are independent of thread scheduling.
pub fn sweep_spacing(
    beam: &BeamSpec,
    configs: &[SweepConfig],
    runs: u32,
    base_seed: u64,
    profile: &Profile,
    strategy: Strategy,
    tol: &ToleranceSpec,
) -> Result<SweepResult, EvaluationError> {
    assert!(runs >= 1, "sweep needs at least one run");
    let mut rows = Vec::with_capacity(configs.len());
    for config in configs {
        let layout = generate_layout(
            beam,
            config.count,
            config.spacing,
            config.placement,
            DEFAULT_MARKER_SIZE,
        )?;
        let reports: Vec<DeviationReport> = (0..runs)
            .into_par_iter()
            .map(|run| {
                let session =
                    SessionConfig::from_profile(layout.clone(), profile, base_seed + run as u64);
                let log = run_session(&session);
                deviation_report(&log, strategy)
            })
            .collect::<Result<_, _>>()?;

        let n = reports.len() as f64;
        let mean_mm = reports.iter().map(|r| r.mean_mm).sum::<f64>() / n;
        let var = reports.iter().map(|r| (r.mean_mm - mean_mm).powi(2)).sum::<f64>() / n;
        let max_mm = reports.iter().map(|r| r.max_mm).fold(0.0, f64::max);
        let passes = reports.iter().filter(|r| tolerance_check(r, tol)).count();
        rows.push(SweepRow {
            spacing_m: config.spacing,
            count: config.count,
            runs,
            mean_mm,
            std_mm: var.sqrt(),
            max_mm,
            pass_rate: passes as f64 / n,
        });
    }
    rows.sort_by(|a, b| a.spacing_m.partial_cmp(&b.spacing_m).expect("finite spacing"));
    Ok(SweepResult { rows })
}

/// CSV with fixed header `arclength_m,deviation_mm,time_s,stale`,
/// floats at 4 decimal places.
pub fn report_to_csv(report: &DeviationReport) -> String {
    let mut out = String::from("arclength_m,deviation_mm,time_s,stale\n");
    for s in &report.per_sample {
        out.push_str(&format!(
            "{:.4},{:.4},{:.4},{}\n",
            s.arclength, s.deviation_mm, s.time, s.stale
        ));
    }
    out
}

/// CSV with fixed header `spacing_m,count,runs,mean_mm,std_mm,max_mm,pass_rate`,
/// floats at 4 decimal places.
pub fn sweep_to_csv(result: &SweepResult) -> String {
    let mut out = String::from("spacing_m,count,runs,mean_mm,std_mm,max_mm,pass_rate\n");
    for r in &result.rows {
        out.push_str(&format!(
            "{:.4},{},{},{:.4},{:.4},{:.4},{:.4}\n",
            r.spacing_m, r.count, r.runs, r.mean_mm, r.std_mm, r.max_mm, r.pass_rate
        ));
    }
    out
}

pub fn write_report_csv(report: &DeviationReport, path: &std::path::Path) -> Result<(), EvaluationError> {
    std::fs::write(path, report_to_csv(report))?;
    Ok(())
}

pub fn write_sweep_csv(result: &SweepResult, path: &std::path::Path) -> Result<(), EvaluationError> {
    std::fs::write(path, sweep_to_csv(result))?;
    Ok(())
}
