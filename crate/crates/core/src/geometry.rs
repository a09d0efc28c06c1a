//! Element / tile / panel array geometry.
//!
//! The array lies in the y–z plane (x = 0). Each panel is driven by one RF
//! chain and holds `N_T` rigid tiles; every tile carries the same `s × s`
//! element grid. Tiles translate inside the closed square region of their
//! panel and keep a minimum center spacing `D_min` from each other.
//!
//! Canonical element order is lexicographic in (panel, tile, element), with
//! panels ordered by (m, n). Every vector and matrix in the crate uses it.

use std::fmt;

use nalgebra::{Vector2, Vector3};
use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};

/// Speed of light in vacuum, m/s.
pub const SPEED_OF_LIGHT: f64 = 299_792_458.0;

/// Tolerance applied by [`validate_layout`], meters.
pub const LAYOUT_TOLERANCE: f64 = 1e-12;

pub fn wavelength(frequency_hz: f64) -> f64 {
    SPEED_OF_LIGHT / frequency_hz
}

/// Tile center pitch that keeps elements of neighbouring `s × s` tiles at
/// least `λ/2` apart: `(√2 (s − 1) + 1) / 2 · λ`.
///
/// This is twice the circumradius of a tile with `λ/2` element spacing plus
/// `λ/2`, so any two tiles whose centers are this far apart keep the bound
/// regardless of their relative direction.
pub fn tile_pitch(side_count: usize, wavelength: f64) -> f64 {
    (std::f64::consts::SQRT_2 * (side_count as f64 - 1.0) + 1.0) / 2.0 * wavelength
}

/// Default panel side `2 √(N_T N_E) λ`.
pub fn panel_side(tiles_per_panel: usize, elements_per_tile: usize, wavelength: f64) -> f64 {
    2.0 * ((tiles_per_panel * elements_per_tile) as f64).sqrt() * wavelength
}

/// Fixed element grid shared by every tile.
#[derive(Debug, Clone, PartialEq)]
pub struct IntraTileLayout {
    side_count: usize,
    spacing: f64,
    offsets: Vec<Vector2<f64>>,
}

impl IntraTileLayout {
    /// Centered `s × s` grid with the given pitch. Offsets are ordered with
    /// the y index major.
    pub fn square(side_count: usize, spacing: f64) -> Result<Self> {
        if side_count == 0 {
            return Err(Error::Config("tile side count must be positive".into()));
        }
        if !(spacing > 0.0) || !spacing.is_finite() {
            return Err(Error::Config(format!("invalid element spacing {spacing}")));
        }
        let half = (side_count as f64 - 1.0) / 2.0;
        let mut offsets = Vec::with_capacity(side_count * side_count);
        for a in 0..side_count {
            for b in 0..side_count {
                offsets.push(Vector2::new(
                    (a as f64 - half) * spacing,
                    (b as f64 - half) * spacing,
                ));
            }
        }
        Ok(Self {
            side_count,
            spacing,
            offsets,
        })
    }

    pub fn side_count(&self) -> usize {
        self.side_count
    }

    pub fn spacing(&self) -> f64 {
        self.spacing
    }

    pub fn offsets(&self) -> &[Vector2<f64>] {
        &self.offsets
    }

    pub fn len(&self) -> usize {
        self.offsets.len()
    }

    pub fn is_empty(&self) -> bool {
        self.offsets.is_empty()
    }

    /// Largest distance from the tile center to one of its elements.
    pub fn circumradius(&self) -> f64 {
        self.offsets.iter().map(|o| o.norm()).fold(0.0, f64::max)
    }

    /// Per-axis extent `(min, max)` of the offsets along y (axis 0) or z (axis 1).
    fn extent(&self, axis: usize) -> (f64, f64) {
        self.offsets.iter().fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), o| {
            (lo.min(o[axis]), hi.max(o[axis]))
        })
    }
}

/// One RF-chain panel: grid index, center in the y–z plane and square side.
#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct PanelSpec {
    pub m: usize,
    pub n: usize,
    /// Center `(y, z)`; the x coordinate is always zero.
    pub center_yz: [f64; 2],
    pub side: f64,
}

impl PanelSpec {
    pub fn center(&self) -> Vector3<f64> {
        Vector3::new(0.0, self.center_yz[0], self.center_yz[1])
    }

    fn center2(&self) -> Vector2<f64> {
        Vector2::new(self.center_yz[0], self.center_yz[1])
    }
}

/// Axis-aligned bounds on a tile translation, relative to its panel center.
#[derive(Debug, Clone, Copy, PartialEq)]
pub struct TranslationBox {
    pub lo: Vector2<f64>,
    pub hi: Vector2<f64>,
}

impl TranslationBox {
    pub fn contains(&self, delta: &Vector2<f64>) -> bool {
        (0..2).all(|k| delta[k] >= self.lo[k] && delta[k] <= self.hi[k])
    }

    /// Intersection with the square of half-width `radius` around `center`.
    pub fn intersect_square(&self, center: &Vector2<f64>, radius: f64) -> TranslationBox {
        let lo = Vector2::new(
            self.lo.x.max(center.x - radius),
            self.lo.y.max(center.y - radius),
        );
        let hi = Vector2::new(
            self.hi.x.min(center.x + radius),
            self.hi.y.min(center.y + radius),
        );
        TranslationBox { lo, hi }
    }
}

/// Complete array description: panels, tile translations and the shared tile.
#[derive(Debug, Clone, PartialEq)]
pub struct ArrayLayout {
    panels_h: usize,
    panels_v: usize,
    panels: Vec<PanelSpec>,
    tiles_per_panel: usize,
    translations: Vec<Vec<Vector2<f64>>>,
    intra_tile: IntraTileLayout,
    d_min: f64,
}

impl ArrayLayout {
    /// Assemble a layout from parts. Shapes are checked here, feasibility is
    /// left to [`validate_layout`].
    pub fn new(
        panels_h: usize,
        panels_v: usize,
        panels: Vec<PanelSpec>,
        translations: Vec<Vec<Vector2<f64>>>,
        intra_tile: IntraTileLayout,
        d_min: f64,
    ) -> Result<Self> {
        if panels_h == 0 || panels_v == 0 {
            return Err(Error::Config("panel grid must be non-empty".into()));
        }
        if panels.len() != panels_h * panels_v {
            return Err(Error::DimensionMismatch {
                expected: panels_h * panels_v,
                got: panels.len(),
            });
        }
        if translations.len() != panels.len() {
            return Err(Error::DimensionMismatch {
                expected: panels.len(),
                got: translations.len(),
            });
        }
        let tiles_per_panel = translations[0].len();
        if tiles_per_panel == 0 {
            return Err(Error::Config("panels must hold at least one tile".into()));
        }
        if let Some(bad) = translations.iter().find(|t| t.len() != tiles_per_panel) {
            return Err(Error::Config(format!(
                "heterogeneous panels: {} tiles vs {}",
                bad.len(),
                tiles_per_panel
            )));
        }
        if !(d_min >= 0.0) {
            return Err(Error::Config(format!("invalid D_min {d_min}")));
        }
        Ok(Self {
            panels_h,
            panels_v,
            panels,
            tiles_per_panel,
            translations,
            intra_tile,
            d_min,
        })
    }

    pub fn panels(&self) -> &[PanelSpec] {
        &self.panels
    }

    pub fn panel_grid(&self) -> (usize, usize) {
        (self.panels_h, self.panels_v)
    }

    /// Number of panels, i.e. RF chains.
    pub fn num_panels(&self) -> usize {
        self.panels.len()
    }

    pub fn tiles_per_panel(&self) -> usize {
        self.tiles_per_panel
    }

    pub fn elements_per_tile(&self) -> usize {
        self.intra_tile.len()
    }

    /// `N_sub = N_T · N_E`.
    pub fn elements_per_panel(&self) -> usize {
        self.tiles_per_panel * self.intra_tile.len()
    }

    pub fn num_elements(&self) -> usize {
        self.num_panels() * self.elements_per_panel()
    }

    pub fn intra_tile(&self) -> &IntraTileLayout {
        &self.intra_tile
    }

    pub fn d_min(&self) -> f64 {
        self.d_min
    }

    pub fn with_d_min(mut self, d_min: f64) -> Self {
        self.d_min = d_min;
        self
    }

    pub fn translations(&self, panel: usize) -> &[Vector2<f64>] {
        &self.translations[panel]
    }

    pub fn translation(&self, panel: usize, tile: usize) -> Vector2<f64> {
        self.translations[panel][tile]
    }

    pub fn set_translation(&mut self, panel: usize, tile: usize, delta: Vector2<f64>) {
        self.translations[panel][tile] = delta;
    }

    /// Canonical index of element `i` of tile `t` on panel `p`.
    pub fn element_index(&self, panel: usize, tile: usize, element: usize) -> usize {
        (panel * self.tiles_per_panel + tile) * self.intra_tile.len() + element
    }

    /// `(y, z)` of one element.
    pub fn element_yz(&self, panel: usize, tile: usize, element: usize) -> Vector2<f64> {
        self.panels[panel].center2() + self.translations[panel][tile] + self.intra_tile.offsets[element]
    }

    /// `(y, z)` of the elements of one tile placed at translation `delta`.
    pub fn tile_elements_at(&self, panel: usize, delta: &Vector2<f64>) -> Vec<Vector2<f64>> {
        let base = self.panels[panel].center2() + delta;
        self.intra_tile.offsets.iter().map(|o| base + o).collect()
    }

    /// `(y, z)` of every element of one panel, in canonical order.
    pub fn panel_elements_yz(&self, panel: usize) -> Vec<Vector2<f64>> {
        let mut out = Vec::with_capacity(self.elements_per_panel());
        for t in 0..self.tiles_per_panel {
            for i in 0..self.intra_tile.len() {
                out.push(self.element_yz(panel, t, i));
            }
        }
        out
    }

    /// `(y, z)` of every element without feasibility checks.
    pub fn elements_yz(&self) -> Vec<Vector2<f64>> {
        (0..self.num_panels())
            .flat_map(|p| self.panel_elements_yz(p))
            .collect()
    }
}

/// Absolute 3-D element positions in canonical order.
pub fn element_positions(layout: &ArrayLayout) -> Result<Vec<Vector3<f64>>> {
    let report = validate_layout(layout);
    if !report.is_ok() {
        return Err(Error::InvalidLayout(report));
    }
    Ok(layout
        .elements_yz()
        .into_iter()
        .map(|p| Vector3::new(0.0, p.x, p.y))
        .collect())
}

#[derive(Debug, Clone, PartialEq)]
pub enum Violation {
    /// Element outside its panel; `margin` is the signed distance to the
    /// nearest panel edge (negative outside).
    Containment {
        panel: usize,
        tile: usize,
        element: usize,
        margin: f64,
    },
    /// Tile translations closer than `D_min`; `margin = ‖Δ_a − Δ_b‖ − D_min`.
    Spacing {
        panel: usize,
        tile_a: usize,
        tile_b: usize,
        margin: f64,
    },
}

#[derive(Debug, Clone, PartialEq, Default)]
pub struct ValidationReport {
    pub violations: Vec<Violation>,
}

impl ValidationReport {
    pub fn is_ok(&self) -> bool {
        self.violations.is_empty()
    }
}

impl fmt::Display for ValidationReport {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        if self.is_ok() {
            return write!(f, "ok");
        }
        write!(f, "{} violation(s)", self.violations.len())?;
        for v in self.violations.iter().take(8) {
            match v {
                Violation::Containment {
                    panel,
                    tile,
                    element,
                    margin,
                } => write!(
                    f,
                    "; element (panel {panel}, tile {tile}, elem {element}) outside panel by {:.3e} m",
                    -margin
                )?,
                Violation::Spacing {
                    panel,
                    tile_a,
                    tile_b,
                    margin,
                } => write!(
                    f,
                    "; tiles {tile_a},{tile_b} on panel {panel} closer than D_min by {:.3e} m",
                    -margin
                )?,
            }
        }
        if self.violations.len() > 8 {
            write!(f, "; ...")?;
        }
        Ok(())
    }
}

/// Signed distance of a panel-relative point to the edge of a centered square
/// of side `side` (positive inside, zero on the boundary).
fn containment_margin(relative: &Vector2<f64>, side: f64) -> f64 {
    let half = side / 2.0;
    (half - relative.x.abs()).min(half - relative.y.abs())
}

/// Check element containment and tile spacing for every panel.
pub fn validate_layout(layout: &ArrayLayout) -> ValidationReport {
    let mut violations = Vec::new();
    for (p, panel) in layout.panels.iter().enumerate() {
        let deltas = &layout.translations[p];
        for (t, delta) in deltas.iter().enumerate() {
            for (i, offset) in layout.intra_tile.offsets.iter().enumerate() {
                let margin = containment_margin(&(delta + offset), panel.side);
                if margin < -LAYOUT_TOLERANCE || !margin.is_finite() {
                    violations.push(Violation::Containment {
                        panel: p,
                        tile: t,
                        element: i,
                        margin,
                    });
                }
            }
        }
        for a in 0..deltas.len() {
            for b in (a + 1)..deltas.len() {
                let margin = (deltas[a] - deltas[b]).norm() - layout.d_min;
                if margin < -LAYOUT_TOLERANCE {
                    violations.push(Violation::Spacing {
                        panel: p,
                        tile_a: a,
                        tile_b: b,
                        margin,
                    });
                }
            }
        }
    }
    ValidationReport { violations }
}

/// Bounds on `Δ_t` such that every element of the tile stays inside the
/// panel: `Δ ∈ [−A/2 − min δ, A/2 − max δ]` per axis. The box is the same
/// for every tile of a homogeneous panel.
pub fn feasible_translation_box(
    layout: &ArrayLayout,
    panel: usize,
    tile: usize,
) -> Result<TranslationBox> {
    if panel >= layout.num_panels() {
        return Err(Error::IndexOutOfRange {
            index: panel,
            max: layout.num_panels().saturating_sub(1),
        });
    }
    if tile >= layout.tiles_per_panel {
        return Err(Error::IndexOutOfRange {
            index: tile,
            max: layout.tiles_per_panel - 1,
        });
    }
    translation_box(&layout.intra_tile, layout.panels[panel].side)
}

pub(crate) fn translation_box(intra: &IntraTileLayout, side: f64) -> Result<TranslationBox> {
    let half = side / 2.0;
    let (ylo, yhi) = intra.extent(0);
    let (zlo, zhi) = intra.extent(1);
    let footprint = (yhi - ylo).max(zhi - zlo);
    if footprint > side {
        return Err(Error::InfeasibleBox { footprint, side });
    }
    Ok(TranslationBox {
        lo: Vector2::new(-half - ylo, -half - zlo),
        hi: Vector2::new(half - yhi, half - zhi),
    })
}

/// Most-square `(along_y, along_z)` factorization of `n` with `along_y ≥ along_z`.
fn grid_shape(n: usize) -> (usize, usize) {
    let mut rows = (n as f64).sqrt().floor() as usize;
    while rows > 1 && !n.is_multiple_of(rows) {
        rows -= 1;
    }
    let rows = rows.max(1);
    (n / rows, rows)
}

/// Centered offsets of a `cols × rows` grid with the given pitch, y index major.
fn centered_grid(cols: usize, rows: usize, pitch: f64) -> Vec<Vector2<f64>> {
    let cy = (cols as f64 - 1.0) / 2.0;
    let cz = (rows as f64 - 1.0) / 2.0;
    let mut out = Vec::with_capacity(cols * rows);
    for a in 0..cols {
        for b in 0..rows {
            out.push(Vector2::new((a as f64 - cy) * pitch, (b as f64 - cz) * pitch));
        }
    }
    out
}

/// Fixed-position reference layout, also the starting point of layout
/// optimization.
///
/// Tiles sit on a centered grid with pitch [`tile_pitch`]; `N_T` is factored
/// into the most square grid available (8 tiles → 4 × 2). Elements inside a
/// tile are spaced `λ/2`, panels are `2 √(N_T N_E) λ` wide and abut on a
/// centered grid, and `D_min` equals the tile pitch.
pub fn nominal_layout(
    panels_h: usize,
    panels_v: usize,
    tiles_per_panel: usize,
    elements_per_tile: usize,
    wavelength: f64,
) -> Result<ArrayLayout> {
    if panels_h == 0 || panels_v == 0 || tiles_per_panel == 0 || elements_per_tile == 0 {
        return Err(Error::Config("array dimensions must be positive".into()));
    }
    let s = (elements_per_tile as f64).sqrt().round() as usize;
    if s * s != elements_per_tile {
        return Err(Error::Config(format!(
            "elements per tile ({elements_per_tile}) must be a perfect square"
        )));
    }
    if !(wavelength > 0.0) {
        return Err(Error::Config(format!("invalid wavelength {wavelength}")));
    }
    let intra = IntraTileLayout::square(s, wavelength / 2.0)?;
    let pitch = tile_pitch(s, wavelength);
    let side = panel_side(tiles_per_panel, elements_per_tile, wavelength);
    let (cols, rows) = grid_shape(tiles_per_panel);
    let tiles = centered_grid(cols, rows, pitch);

    let mut panels = Vec::with_capacity(panels_h * panels_v);
    let cm = (panels_h as f64 - 1.0) / 2.0;
    let cn = (panels_v as f64 - 1.0) / 2.0;
    for m in 0..panels_h {
        for n in 0..panels_v {
            panels.push(PanelSpec {
                m,
                n,
                center_yz: [(m as f64 - cm) * side, (n as f64 - cn) * side],
                side,
            });
        }
    }
    let translations = vec![tiles; panels.len()];
    let layout = ArrayLayout::new(panels_h, panels_v, panels, translations, intra, pitch)?;
    let report = validate_layout(&layout);
    if !report.is_ok() {
        return Err(Error::InvalidLayout(report));
    }
    Ok(layout)
}

/// Smallest distance between an element of a tile at the origin and an
/// element of a second tile whose center sits at `separation`.
pub fn min_cross_tile_distance(intra: &IntraTileLayout, separation: &Vector2<f64>) -> f64 {
    let mut best = f64::INFINITY;
    for a in intra.offsets() {
        for b in intra.offsets() {
            best = best.min((separation + b - a).norm());
        }
    }
    best
}

/// Serialized form of an [`ArrayLayout`]; units are meters.
#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct LayoutFile {
    pub panels: Vec<PanelSpec>,
    pub tile_translations: Vec<Vec<[f64; 2]>>,
    pub intra_tile: IntraTileFile,
    pub d_min: f64,
}

#[derive(Debug, Clone, Serialize, Deserialize)]
pub struct IntraTileFile {
    pub s: usize,
    pub spacing: f64,
}

impl From<&ArrayLayout> for LayoutFile {
    fn from(layout: &ArrayLayout) -> Self {
        LayoutFile {
            panels: layout.panels.clone(),
            tile_translations: layout
                .translations
                .iter()
                .map(|tiles| tiles.iter().map(|d| [d.x, d.y]).collect())
                .collect(),
            intra_tile: IntraTileFile {
                s: layout.intra_tile.side_count,
                spacing: layout.intra_tile.spacing,
            },
            d_min: layout.d_min,
        }
    }
}

impl TryFrom<LayoutFile> for ArrayLayout {
    type Error = Error;

    fn try_from(file: LayoutFile) -> Result<Self> {
        let panels_h = file.panels.iter().map(|p| p.m + 1).max().unwrap_or(0);
        let panels_v = file.panels.iter().map(|p| p.n + 1).max().unwrap_or(0);
        if file.tile_translations.len() != file.panels.len() {
            return Err(Error::DimensionMismatch {
                expected: file.panels.len(),
                got: file.tile_translations.len(),
            });
        }
        let mut entries: Vec<_> = file.panels.into_iter().zip(file.tile_translations).collect();
        entries.sort_by_key(|(p, _)| (p.m, p.n));
        let intra = IntraTileLayout::square(file.intra_tile.s, file.intra_tile.spacing)?;
        let (panels, translations) = entries
            .into_iter()
            .map(|(p, tiles)| (p, tiles.into_iter().map(|[y, z]| Vector2::new(y, z)).collect()))
            .unzip();
        ArrayLayout::new(panels_h, panels_v, panels, translations, intra, file.d_min)
    }
}

impl ArrayLayout {
    pub fn to_json(&self) -> Result<String> {
        Ok(serde_json::to_string_pretty(&LayoutFile::from(self))?)
    }

    pub fn from_json(text: &str) -> Result<Self> {
        let file: LayoutFile = serde_json::from_str(text)?;
        ArrayLayout::try_from(file)
    }
}
