//! FMC-16: a printable 8x8 matrix fiducial code carrying a 16-bit id.
//!
//! Layout (row, col), black = true = binary 1:
//! - the outer border (row 0, row 7, col 0, col 7) is all black;
//! - inner corner (1,1) is black, the other three inner corners white —
//!   this pins the orientation uniquely under 90-degree rotations;
//! - the remaining 32 inner cells carry, row-major and MSB-first, the
//!   16-bit id followed by its CRC-16/CCITT-FALSE over the two big-endian
//!   id bytes (poly 0x1021, init 0xFFFF, no reflection, no final xor).
//!
//! The code detects errors (any single flipped cell) but does not correct
//! them; a damaged marker is simply not read.

use serde::{Deserialize, Serialize};
use thiserror::Error;

use crate::geometry::MarkerLayout;

pub const GRID_SIZE: usize = 8;

/// The four inner corner cells; (1,1) is the orientation corner.
const INNER_CORNERS: [(usize, usize); 4] = [(1, 1), (1, 6), (6, 1), (6, 6)];

#[derive(Debug, Error, PartialEq, Eq)]
pub enum FiducialError {
    #[error("border is not fully black")]
    BadBorder,
    #[error("no rotation has a valid orientation corner pattern")]
    BadOrientation,
    #[error("payload checksum mismatch")]
    BadChecksum,
}

/// CRC-16/CCITT-FALSE: poly 0x1021, init 0xFFFF, unreflected, no final xor.
/// Check value over ASCII "123456789" is 0x29B1.
pub fn crc16_ccitt_false(data: &[u8]) -> u16 {
    let mut crc: u16 = 0xFFFF;
    for &byte in data {
        crc ^= (byte as u16) << 8;
        for _ in 0..8 {
            crc = if crc & 0x8000 != 0 { (crc << 1) ^ 0x1021 } else { crc << 1 };
        }
    }
    crc
}

/// Quarter-turn rotations, counted clockwise when viewing the printed face.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub enum Rotation {
    R0,
    R90,
    R180,
    R270,
}

impl Rotation {
    pub const ALL: [Rotation; 4] = [Rotation::R0, Rotation::R90, Rotation::R180, Rotation::R270];

    pub fn quarter_turns(self) -> usize {
        match self {
            Rotation::R0 => 0,
            Rotation::R90 => 1,
            Rotation::R180 => 2,
            Rotation::R270 => 3,
        }
    }

    pub fn from_quarter_turns(turns: usize) -> Self {
        match turns % 4 {
            0 => Rotation::R0,
            1 => Rotation::R90,
            2 => Rotation::R180,
            _ => Rotation::R270,
        }
    }

    pub fn degrees(self) -> u16 {
        90 * self.quarter_turns() as u16
    }
}

/// An 8x8 module grid; `true` is a black module.
#[derive(Debug, Clone, Copy, PartialEq, Eq, Serialize, Deserialize)]
pub struct MarkerGrid {
    pub cells: [[bool; GRID_SIZE]; GRID_SIZE],
}

impl MarkerGrid {
    pub fn blank() -> Self {
        Self { cells: [[false; GRID_SIZE]; GRID_SIZE] }
    }

    /// Rotate clockwise by the given quarter turns.
    pub fn rotated(&self, rotation: Rotation) -> Self {
        let mut out = *self;
        for _ in 0..rotation.quarter_turns() {
            let src = out.cells;
            for (r, row) in out.cells.iter_mut().enumerate() {
                for (c, cell) in row.iter_mut().enumerate() {
                    *cell = src[GRID_SIZE - 1 - c][r];
                }
            }
        }
        out
    }

    fn border_is_black(&self) -> bool {
        (0..GRID_SIZE).all(|i| {
            self.cells[0][i]
                && self.cells[GRID_SIZE - 1][i]
                && self.cells[i][0]
                && self.cells[i][GRID_SIZE - 1]
        })
    }

    fn corner_pattern_canonical(&self) -> bool {
        INNER_CORNERS
            .iter()
            .all(|&(r, c)| self.cells[r][c] == ((r, c) == (1, 1)))
    }
}

/// Row-major order of the 32 payload cells (inner 6x6 minus the corners).
pub fn payload_cells() -> [(usize, usize); 32] {
    let mut cells = [(0usize, 0usize); 32];
    let mut i = 0;
    for r in 1..GRID_SIZE - 1 {
        for c in 1..GRID_SIZE - 1 {
            if INNER_CORNERS.contains(&(r, c)) {
                continue;
            }
            cells[i] = (r, c);
            i += 1;
        }
    }
    debug_assert_eq!(i, 32);
    cells
}

/// Encode an id into its canonical (unrotated) grid.
pub fn encode_fmc(id: u16) -> MarkerGrid {
    let mut grid = MarkerGrid::blank();
    for i in 0..GRID_SIZE {
        grid.cells[0][i] = true;
        grid.cells[GRID_SIZE - 1][i] = true;
        grid.cells[i][0] = true;
        grid.cells[i][GRID_SIZE - 1] = true;
    }
    grid.cells[1][1] = true;

    let crc = crc16_ccitt_false(&id.to_be_bytes());
    let word = ((id as u32) << 16) | crc as u32;
    for (i, (r, c)) in payload_cells().into_iter().enumerate() {
        grid.cells[r][c] = (word >> (31 - i)) & 1 == 1;
    }
    grid
}

/// Decode a grid in any of the four rotations.
///
/// Returns the id and the rotation that was applied to the canonical grid
/// (i.e. `decode_fmc(&encode_fmc(id).rotated(r))` yields `(id, r)`).
pub fn decode_fmc(grid: &MarkerGrid) -> Result<(u16, Rotation), FiducialError> {
    if !grid.border_is_black() {
        return Err(FiducialError::BadBorder);
    }
    for turns in 0..4 {
        let candidate = grid.rotated(Rotation::from_quarter_turns(turns));
        if !candidate.corner_pattern_canonical() {
            continue;
        }
        let mut word: u32 = 0;
        for (r, c) in payload_cells() {
            word = (word << 1) | candidate.cells[r][c] as u32;
        }
        let id = (word >> 16) as u16;
        let stored_crc = word as u16;
        return if crc16_ccitt_false(&id.to_be_bytes()) == stored_crc {
            Ok((id, Rotation::from_quarter_turns((4 - turns) % 4)))
        } else {
            Err(FiducialError::BadChecksum)
        };
    }
    Err(FiducialError::BadOrientation)
}

/// Physical parameters for a printable marker sheet.
#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct SheetSpec {
    /// Side of one module, millimeters (a marker is 8 modules across).
    pub module_size: f64,
    /// White margin around each marker, millimeters.
    pub quiet_zone: f64,
    /// Markers per row.
    pub columns: u32,
    /// Print "beam / marker / arclength" under each marker.
    pub label: bool,
}

impl SheetSpec {
    /// Quiet zone defaults to two modules.
    pub fn with_module_size(module_size: f64) -> Self {
        Self { module_size, quiet_zone: 2.0 * module_size, columns: 4, label: true }
    }

    pub fn validate(&self) -> Result<(), String> {
        if !(self.module_size > 0.0) {
            return Err(format!("module size must be positive (got {} mm)", self.module_size));
        }
        if self.quiet_zone < 0.0 {
            return Err(format!("quiet zone must be non-negative (got {} mm)", self.quiet_zone));
        }
        if self.columns < 1 {
            return Err("columns must be at least 1".into());
        }
        Ok(())
    }
}

impl Default for SheetSpec {
    fn default() -> Self {
        Self::with_module_size(12.5)
    }
}

/// An axis-aligned rectangle on the sheet, millimeters.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct RectMm {
    pub x: f64,
    pub y: f64,
    pub w: f64,
    pub h: f64,
}

impl RectMm {
    pub fn contains(&self, px: f64, py: f64) -> bool {
        px >= self.x && px < self.x + self.w && py >= self.y && py < self.y + self.h
    }
}

/// One marker placed on the sheet.
#[derive(Debug, Clone)]
pub struct PlacedMarker {
    pub marker_id: u16,
    pub grid: MarkerGrid,
    /// Top-left of the marker tile (including quiet zone), millimeters.
    pub origin: (f64, f64),
    /// Black module rectangles in absolute sheet coordinates.
    pub black_cells: Vec<RectMm>,
    pub label: Option<String>,
}

/// Sheet geometry prior to serialization; exposed so the placement can be
/// checked against the decoder without parsing SVG.
#[derive(Debug, Clone)]
pub struct SheetGeometry {
    pub width_mm: f64,
    pub height_mm: f64,
    /// Marker side length excluding the quiet zone, millimeters.
    pub marker_side_mm: f64,
    pub markers: Vec<PlacedMarker>,
}

impl SheetGeometry {
    /// Re-sample the 8x8 grid of a placed marker from its rectangle list
    /// by probing module centers. This is the decoder-facing view of the
    /// rendered output.
    pub fn resample_grid(&self, marker: &PlacedMarker, spec: &SheetSpec) -> MarkerGrid {
        let mut grid = MarkerGrid::blank();
        let (ox, oy) = marker.origin;
        for (r, row) in grid.cells.iter_mut().enumerate() {
            for (c, cell) in row.iter_mut().enumerate() {
                let px = ox + spec.quiet_zone + (c as f64 + 0.5) * spec.module_size;
                let py = oy + spec.quiet_zone + (r as f64 + 0.5) * spec.module_size;
                *cell = marker.black_cells.iter().any(|rect| rect.contains(px, py));
            }
        }
        grid
    }
}

/// Compute the sheet geometry for a layout: one marker per anchor, tiled in
/// `spec.columns` columns, each at exact physical size.
pub fn sheet_geometry(layout: &MarkerLayout, spec: &SheetSpec) -> SheetGeometry {
    let marker_side = GRID_SIZE as f64 * spec.module_size;
    let tile = marker_side + 2.0 * spec.quiet_zone;
    let label_band = if spec.label { 6.0 } else { 0.0 };
    let columns = spec.columns.max(1) as usize;

    let mut markers = Vec::with_capacity(layout.anchors.len());
    for (k, anchor) in layout.anchors.iter().enumerate() {
        let col = k % columns;
        let row = k / columns;
        let ox = col as f64 * tile;
        let oy = row as f64 * (tile + label_band);
        let grid = encode_fmc(anchor.marker_id);
        let mut black_cells = Vec::new();
        for (r, grid_row) in grid.cells.iter().enumerate() {
            for (c, &black) in grid_row.iter().enumerate() {
                if black {
                    black_cells.push(RectMm {
                        x: ox + spec.quiet_zone + c as f64 * spec.module_size,
                        y: oy + spec.quiet_zone + r as f64 * spec.module_size,
                        w: spec.module_size,
                        h: spec.module_size,
                    });
                }
            }
        }
        let label = spec.label.then(|| {
            format!(
                "{} / {} / {:.3} m",
                layout.beam.id, anchor.marker_id, anchor.arclength
            )
        });
        markers.push(PlacedMarker {
            marker_id: anchor.marker_id,
            grid,
            origin: (ox, oy),
            black_cells,
            label,
        });
    }

    let used_cols = layout.anchors.len().min(columns).max(1);
    let rows = layout.anchors.len().div_ceil(columns).max(1);
    SheetGeometry {
        width_mm: used_cols as f64 * tile,
        height_mm: rows as f64 * (tile + label_band),
        marker_side_mm: marker_side,
        markers,
    }
}

/// Render the layout as an SVG 1.1 document with physical millimeter units.
/// Each marker is wrapped in a `<g data-marker-id="...">` group.
pub fn render_sheet(layout: &MarkerLayout, spec: &SheetSpec) -> String {
    let geometry = sheet_geometry(layout, spec);
    let marker_side = geometry.marker_side_mm;
    let tile = marker_side + 2.0 * spec.quiet_zone;

    let mut svg = String::new();
    svg.push_str("<?xml version=\"1.0\" encoding=\"UTF-8\"?>\n");
    svg.push_str(&format!(
        "<svg xmlns=\"http://www.w3.org/2000/svg\" version=\"1.1\" \
         width=\"{w}mm\" height=\"{h}mm\" viewBox=\"0 0 {w} {h}\">\n",
        w = fmt_mm(geometry.width_mm),
        h = fmt_mm(geometry.height_mm),
    ));
    for marker in &geometry.markers {
        let (ox, oy) = marker.origin;
        svg.push_str(&format!("  <g data-marker-id=\"{}\">\n", marker.marker_id));
        svg.push_str(&format!(
            "    <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#ffffff\"/>\n",
            fmt_mm(ox),
            fmt_mm(oy),
            fmt_mm(tile),
            fmt_mm(tile),
        ));
        for rect in &marker.black_cells {
            svg.push_str(&format!(
                "    <rect x=\"{}\" y=\"{}\" width=\"{}\" height=\"{}\" fill=\"#000000\"/>\n",
                fmt_mm(rect.x),
                fmt_mm(rect.y),
                fmt_mm(rect.w),
                fmt_mm(rect.h),
            ));
        }
        if let Some(label) = &marker.label {
            svg.push_str(&format!(
                "    <text x=\"{}\" y=\"{}\" font-size=\"4\" font-family=\"monospace\" \
                 text-anchor=\"middle\">{}</text>\n",
                fmt_mm(ox + tile / 2.0),
                fmt_mm(oy + tile + 4.5),
                label,
            ));
        }
        svg.push_str("  </g>\n");
    }
    svg.push_str("</svg>\n");
    svg
}

fn fmt_mm(v: f64) -> String {
    // trim trailing zeros but keep sub-millimeter precision
    let s = format!("{v:.4}");
    let s = s.trim_end_matches('0').trim_end_matches('.');
    if s.is_empty() { "0".into() } else { s.to_string() }
}
