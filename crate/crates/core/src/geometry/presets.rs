//! The three bundled beam presets used throughout the evaluation tooling.

use std::f64::consts::FRAC_PI_2;
use std::str::FromStr;

use super::beam::{generate_layout, BeamKind, BeamSpec, MarkerLayout, PlacementMode};

/// Exact feet-to-meters conversion.
pub const FOOT: f64 = 0.3048;

/// Default square marker side, meters.
pub const DEFAULT_MARKER_SIZE: f64 = 0.100;

/// Default cross-section, meters.
pub const DEFAULT_WIDTH: f64 = 0.15;
pub const DEFAULT_HEIGHT: f64 = 0.40;

/// Default total twist for the twisted preset, radians (configurable at the CLI).
pub const DEFAULT_TWIST: f64 = FRAC_PI_2;

#[derive(Debug, Clone, Copy, PartialEq, Eq)]
pub enum BeamPreset {
    /// 14 ft straight beam, 5 markers at 2.5 ft spacing on the top edge.
    Straight14,
    /// 24 ft twisted beam, 6 markers around the beam at 6 ft nominal spacing.
    Twisted24,
    /// 40 ft chamfered beam, 10 markers at 4 ft spacing on the top edge.
    Chamfered40,
}

impl BeamPreset {
    pub const ALL: [BeamPreset; 3] =
        [BeamPreset::Straight14, BeamPreset::Twisted24, BeamPreset::Chamfered40];

    pub fn name(self) -> &'static str {
        match self {
            BeamPreset::Straight14 => "straight-14",
            BeamPreset::Twisted24 => "twisted-24",
            BeamPreset::Chamfered40 => "chamfered-40",
        }
    }

    pub fn beam(self) -> BeamSpec {
        // lengths written out in meters so the stored value is the correctly
        // rounded conversion (a runtime `ft * 0.3048` lands one ulp off)
        let (length, kind, twist) = match self {
            BeamPreset::Straight14 => (4.2672, BeamKind::Straight, 0.0),
            BeamPreset::Twisted24 => (7.3152, BeamKind::Twisted, DEFAULT_TWIST),
            BeamPreset::Chamfered40 => (12.192, BeamKind::Chamfered, 0.0),
        };
        BeamSpec {
            id: self.name().to_string(),
            length,
            kind,
            total_twist: twist,
            width: DEFAULT_WIDTH,
            height: DEFAULT_HEIGHT,
        }
    }

    pub fn marker_count(self) -> u32 {
        match self {
            BeamPreset::Straight14 => 5,
            BeamPreset::Twisted24 => 6,
            BeamPreset::Chamfered40 => 10,
        }
    }

    /// Nominal marker spacing in meters (2.5 ft / 6 ft / 4 ft).
    pub fn spacing(self) -> f64 {
        match self {
            BeamPreset::Straight14 => 0.762,
            BeamPreset::Twisted24 => 1.8288,
            BeamPreset::Chamfered40 => 1.2192,
        }
    }

    pub fn placement(self) -> PlacementMode {
        match self {
            BeamPreset::Twisted24 => PlacementMode::Around,
            _ => PlacementMode::EdgeTop,
        }
    }

    pub fn layout(self) -> MarkerLayout {
        generate_layout(
            &self.beam(),
            self.marker_count(),
            self.spacing(),
            self.placement(),
            DEFAULT_MARKER_SIZE,
        )
        .expect("preset layouts are always valid")
    }
}

impl FromStr for BeamPreset {
    type Err = String;

    fn from_str(s: &str) -> Result<Self, Self::Err> {
        match s {
            "straight-14" => Ok(BeamPreset::Straight14),
            "twisted-24" => Ok(BeamPreset::Twisted24),
            "chamfered-40" => Ok(BeamPreset::Chamfered40),
            other => Err(format!(
                "unknown preset '{other}' (expected straight-14, twisted-24 or chamfered-40)"
            )),
        }
    }
}
