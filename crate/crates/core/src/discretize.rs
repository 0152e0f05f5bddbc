//! Quantisation of the continuous profile into a stack of pixelated boards.
//!
//! Layer `i` (0-based) of an `n`-layer stack has its mid-plane at
//! `z_i = (i - (n-1)/2) t` and is evaluated at `min(|z_i|, b)`. Pixel
//! `(ix, iy)` is centred at `p (ix - c, iy - c)` with `c = (N-1)/2` and takes
//! the profile value at radius `rho` from the stack axis, so each layer is
//! rotationally symmetric. Targets are then mapped to the nearest row of a
//! calibration table of unit cells.

use std::fmt;
use std::path::{Path, PathBuf};

use serde::{Deserialize, Serialize};

use crate::error::{Error, Result};
use crate::io::{sig9, write_text};
use crate::lens::{Grid2, LensProfile, LensSpec, MapData, MapMetadata, MaterialMap};

/// Shipped placeholder table, identical to [`CalibrationTable::placeholder`].
pub const PLACEHOLDER_CSV: &str = include_str!("../data/calibration_placeholder.csv");

/// Relative tolerance for deciding that two candidate cells are equally close.
const TIE_TOLERANCE: f64 = 1e-9;

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct StackGeometry {
    pub n_layers: usize,
    pub layer_thickness_mm: f64,
    pub pixel_pitch_mm: f64,
    pub pixels_per_side: usize,
}

impl Default for StackGeometry {
    fn default() -> Self {
        Self {
            n_layers: 17,
            layer_thickness_mm: 0.508,
            pixel_pitch_mm: 1.6,
            pixels_per_side: 41,
        }
    }
}

impl StackGeometry {
    pub fn new(n_layers: usize, layer_thickness_mm: f64, pixel_pitch_mm: f64, pixels_per_side: usize) -> Result<Self> {
        let g = Self {
            n_layers,
            layer_thickness_mm,
            pixel_pitch_mm,
            pixels_per_side,
        };
        g.validate()?;
        Ok(g)
    }

    pub fn validate(&self) -> Result<()> {
        if self.n_layers == 0 || self.n_layers % 2 == 0 {
            return Err(Error::Config(format!(
                "n_layers must be odd and at least 1, got {}",
                self.n_layers
            )));
        }
        if self.pixels_per_side == 0 || self.pixels_per_side % 2 == 0 {
            return Err(Error::Config(format!(
                "pixels_per_side must be odd so the stack has a centre row, got {}",
                self.pixels_per_side
            )));
        }
        if !(self.layer_thickness_mm > 0.0 && self.layer_thickness_mm.is_finite()) {
            return Err(Error::Config(format!(
                "layer thickness must be positive, got {}",
                self.layer_thickness_mm
            )));
        }
        if !(self.pixel_pitch_mm > 0.0 && self.pixel_pitch_mm.is_finite()) {
            return Err(Error::Config(format!(
                "pixel pitch must be positive, got {}",
                self.pixel_pitch_mm
            )));
        }
        Ok(())
    }

    /// The stack has to cover the lens to within one pixel / one layer, and
    /// must not overhang it by more than two.
    pub fn check_against(&self, spec: &LensSpec) -> Result<()> {
        self.validate()?;
        let eps = 1e-9;
        let width = self.pixels_per_side as f64 * self.pixel_pitch_mm;
        let (d, p) = (2.0 * spec.radius(), self.pixel_pitch_mm);
        if width < d - p - eps || width > d + 2.0 * p + eps {
            return Err(Error::Config(format!(
                "stack width {width} mm does not match the lens diameter {d} mm within one pitch"
            )));
        }
        let height = self.n_layers as f64 * self.layer_thickness_mm;
        let (h, t) = (2.0 * spec.half_thickness(), self.layer_thickness_mm);
        if height < h - t - eps || height > h + 2.0 * t + eps {
            return Err(Error::Config(format!(
                "stack height {height} mm does not match the lens thickness {h} mm within one layer"
            )));
        }
        Ok(())
    }

    pub fn layer_z(&self, layer: usize) -> f64 {
        (layer as f64 - (self.n_layers - 1) as f64 / 2.0) * self.layer_thickness_mm
    }

    fn centre(&self) -> f64 {
        (self.pixels_per_side - 1) as f64 / 2.0
    }

    pub fn pixel_radius(&self, ix: usize, iy: usize) -> f64 {
        let c = self.centre();
        self.pixel_pitch_mm * (ix as f64 - c).hypot(iy as f64 - c)
    }

    pub fn pixels_per_layer(&self) -> usize {
        self.pixels_per_side * self.pixels_per_side
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Eq, Hash, PartialOrd, Ord, Serialize, Deserialize)]
#[serde(rename_all = "UPPERCASE")]
pub enum CellFamily {
    Patch,
    Perforated,
    Air,
}

impl CellFamily {
    pub fn as_str(self) -> &'static str {
        match self {
            Self::Patch => "PATCH",
            Self::Perforated => "PERFORATED",
            Self::Air => "AIR",
        }
    }

    fn parse(s: &str) -> Option<Self> {
        match s {
            "PATCH" => Some(Self::Patch),
            "PERFORATED" => Some(Self::Perforated),
            "AIR" => Some(Self::Air),
            _ => None,
        }
    }
}

impl fmt::Display for CellFamily {
    fn fmt(&self, f: &mut fmt::Formatter<'_>) -> fmt::Result {
        f.write_str(self.as_str())
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CalibrationRow {
    pub family: CellFamily,
    /// Geometric parameter of the cell (patch side or hole diameter), mm.
    pub param: f64,
    pub eps_eff: f64,
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct CalibrationTable {
    rows: Vec<CalibrationRow>,
}

impl CalibrationTable {
    pub fn new(mut rows: Vec<CalibrationRow>) -> Result<Self> {
        if rows.is_empty() {
            return Err(Error::Config("calibration table is empty".into()));
        }
        if let Some(r) = rows.iter().find(|r| r.family == CellFamily::Air) {
            return Err(Error::Config(format!(
                "calibration rows cannot use the AIR family (param {})",
                r.param
            )));
        }
        if rows.iter().any(|r| !(r.param.is_finite() && r.eps_eff >= 1.0)) {
            return Err(Error::Config("calibration entries must be finite with eps_eff >= 1".into()));
        }
        rows.sort_by(|a, b| a.family.cmp(&b.family).then(a.param.total_cmp(&b.param)));
        for w in rows.windows(2) {
            if w[0].family != w[1].family {
                continue;
            }
            if w[1].param == w[0].param || w[1].eps_eff == w[0].eps_eff {
                return Err(Error::Config(format!(
                    "{} calibration is not strictly monotone at param {}",
                    w[0].family, w[0].param
                )));
            }
        }
        for fam in [CellFamily::Patch, CellFamily::Perforated] {
            let f: Vec<_> = rows.iter().filter(|r| r.family == fam).collect();
            if f.len() >= 3 {
                let s0 = (f[1].eps_eff - f[0].eps_eff).signum();
                if f.windows(2).any(|w| (w[1].eps_eff - w[0].eps_eff).signum() != s0) {
                    return Err(Error::Config(format!(
                        "{fam} calibration is not strictly monotone in its parameter"
                    )));
                }
            }
        }
        Ok(Self { rows })
    }

    /// Parse `family,param,eps_eff`; lines starting with `#` are comments.
    pub fn parse(path: &Path, text: &str) -> Result<Self> {
        let bad = |m: String| Error::Parse {
            path: path.to_path_buf(),
            message: m,
        };
        let mut rdr = csv::ReaderBuilder::new()
            .comment(Some(b'#'))
            .trim(csv::Trim::All)
            .from_reader(text.as_bytes());
        let headers = rdr.headers().map_err(|e| bad(e.to_string()))?.clone();
        if headers.iter().collect::<Vec<_>>() != ["family", "param", "eps_eff"] {
            return Err(bad("expected header family,param,eps_eff".into()));
        }
        let mut rows = Vec::new();
        for rec in rdr.records() {
            let rec = rec.map_err(|e| bad(e.to_string()))?;
            let line = rec.position().map_or(0, |p| p.line());
            let family = CellFamily::parse(&rec[0])
                .ok_or_else(|| bad(format!("line {line}: unknown family {:?}", &rec[0])))?;
            let num = |k: usize| {
                rec[k]
                    .parse::<f64>()
                    .map_err(|e| bad(format!("line {line}: {e}")))
            };
            rows.push(CalibrationRow {
                family,
                param: num(1)?,
                eps_eff: num(2)?,
            });
        }
        Self::new(rows)
    }

    pub fn load(path: &Path) -> Result<Self> {
        let text = std::fs::read_to_string(path).map_err(|e| Error::io(path, e))?;
        Self::parse(path, &text)
    }

    /// Synthetic, non-physical table: PATCH cells every 0.25 over [3.5, 16]
    /// (param = patch side), PERFORATED every 0.05 over [1.45, 3.4]
    /// (param = hole diameter).
    pub fn placeholder() -> Self {
        let mut rows = Vec::new();
        for k in 0..51 {
            rows.push(CalibrationRow {
                family: CellFamily::Patch,
                param: (200 + 24 * k) as f64 / 1000.0,
                eps_eff: (350 + 25 * k) as f64 / 100.0,
            });
        }
        for k in 0..40 {
            rows.push(CalibrationRow {
                family: CellFamily::Perforated,
                param: (30 * k) as f64 / 1000.0,
                eps_eff: (340 - 5 * k) as f64 / 100.0,
            });
        }
        Self::new(rows).expect("placeholder table is valid")
    }

    /// Same layout `parse` reads; shortest round-tripping number formatting.
    pub fn to_csv(&self) -> String {
        let mut s = String::from("family,param,eps_eff\n");
        for r in &self.rows {
            s.push_str(&format!("{},{},{}\n", r.family, r.param, r.eps_eff));
        }
        s
    }

    pub fn rows(&self) -> &[CalibrationRow] {
        &self.rows
    }

    /// Lowest and highest permittivity realised by a family.
    pub fn range(&self, family: CellFamily) -> Option<(f64, f64)> {
        self.rows
            .iter()
            .filter(|r| r.family == family)
            .fold(None, |acc, r| match acc {
                None => Some((r.eps_eff, r.eps_eff)),
                Some((lo, hi)) => Some((lo.min(r.eps_eff), hi.max(r.eps_eff))),
            })
    }

    fn nearest_in(&self, family: CellFamily, target: f64) -> Option<usize> {
        let mut best: Option<(usize, f64)> = None;
        for (k, r) in self.rows.iter().enumerate() {
            if r.family != family {
                continue;
            }
            let d = (r.eps_eff - target).abs();
            if best.is_none_or(|(_, bd)| d < bd) {
                best = Some((k, d));
            }
        }
        best.map(|(k, _)| k)
    }
}

#[derive(Debug, Clone, Copy, PartialEq, Serialize, Deserialize)]
pub struct CellAssignment {
    pub family: CellFamily,
    /// Row of the calibration table; `None` for air.
    pub calibration_index: Option<usize>,
    pub param: f64,
    pub achieved_eps: f64,
    pub clamped: bool,
}

impl CellAssignment {
    const AIR: Self = Self {
        family: CellFamily::Air,
        calibration_index: None,
        param: 0.0,
        achieved_eps: 1.0,
        clamped: false,
    };
}

/// Pick the cell for one target permittivity.
pub fn assign_cell(target: f64, table: &CalibrationTable) -> CellAssignment {
    if (target - 1.0).abs() <= 1e-12 {
        return CellAssignment::AIR;
    }
    let from_row = |k: usize, clamped: bool| {
        let r = table.rows[k];
        CellAssignment {
            family: r.family,
            calibration_index: Some(k),
            param: r.param,
            achieved_eps: r.eps_eff,
            clamped,
        }
    };
    // Inside a family's range: nearest row of that family, perforated first on overlap.
    let mut inside: Option<(usize, f64)> = None;
    for fam in [CellFamily::Perforated, CellFamily::Patch] {
        if let Some((lo, hi)) = table.range(fam) {
            if target >= lo && target <= hi {
                let k = table.nearest_in(fam, target).unwrap();
                let d = (table.rows[k].eps_eff - target).abs();
                if inside.is_none_or(|(_, bd)| d < bd - TIE_TOLERANCE) {
                    inside = Some((k, d));
                }
            }
        }
    }
    if let Some((k, _)) = inside {
        return from_row(k, false);
    }
    // Outside every range: nearest achievable value, ties towards perforated cells.
    let mut best: (Option<usize>, f64) = (None, (target - 1.0).abs());
    let mut best_family = CellFamily::Air;
    for fam in [CellFamily::Perforated, CellFamily::Patch] {
        if let Some(k) = table.nearest_in(fam, target) {
            let d = (table.rows[k].eps_eff - target).abs();
            let tie = (d - best.1).abs() <= TIE_TOLERANCE;
            let better = d < best.1 - TIE_TOLERANCE
                || (tie && fam == CellFamily::Perforated && best_family != CellFamily::Perforated);
            if better {
                best = (Some(k), d);
                best_family = fam;
            }
        }
    }
    match best.0 {
        Some(k) => from_row(k, true),
        None => CellAssignment {
            clamped: true,
            ..CellAssignment::AIR
        },
    }
}

#[derive(Debug, Clone, PartialEq)]
pub struct LayerStack {
    pub geometry: StackGeometry,
    pub spec: LensSpec,
    pub weighted: bool,
    /// Target permittivity per layer, row-major over `(ix, iy)`.
    pub targets: Vec<Vec<f64>>,
    pub assignments: Option<Vec<Vec<CellAssignment>>>,
}

/// Sample the profile at every pixel centre of every layer.
pub fn build_layer_stack(profile: &LensProfile, geometry: &StackGeometry) -> Result<LayerStack> {
    let spec = *profile.spec();
    geometry.check_against(&spec)?;
    if !profile.options().reduce {
        return Err(Error::Config(
            "the layer stack needs a reduced (scalar) profile".into(),
        ));
    }
    let n = geometry.pixels_per_side;
    let mut targets = Vec::with_capacity(geometry.n_layers);
    for layer in 0..geometry.n_layers {
        let z = geometry.layer_z(layer).abs().min(spec.half_thickness());
        let mut t = vec![1.0; n * n];
        for ix in 0..n {
            for iy in 0..n {
                let rho = geometry.pixel_radius(ix, iy);
                if rho < spec.radius() {
                    t[ix * n + iy] = profile.eval_scalar(rho, z);
                }
            }
        }
        targets.push(t);
    }
    Ok(LayerStack {
        geometry: *geometry,
        spec,
        weighted: profile.options().weight,
        targets,
        assignments: None,
    })
}

/// Map every pixel to a unit cell. Repeating the call changes nothing.
pub fn assign_unit_cells(stack: &LayerStack, table: &CalibrationTable) -> Result<LayerStack> {
    if table.rows.is_empty() {
        return Err(Error::Config("calibration table is empty".into()));
    }
    let assignments = stack
        .targets
        .iter()
        .map(|layer| layer.iter().map(|&t| assign_cell(t, table)).collect())
        .collect();
    Ok(LayerStack {
        assignments: Some(assignments),
        ..stack.clone()
    })
}

#[derive(Debug, Clone, PartialEq, Serialize, Deserialize)]
pub struct ClampReport {
    /// Pixels with centre radius below R, summed over layers.
    pub in_footprint: usize,
    pub clamped: usize,
    pub fraction: f64,
    pub clamped_per_layer: Vec<usize>,
}

fn require_assignments(stack: &LayerStack) -> Result<&Vec<Vec<CellAssignment>>> {
    stack
        .assignments
        .as_ref()
        .ok_or_else(|| Error::Config("stack has no unit-cell assignments yet".into()))
}

pub fn clamp_report(stack: &LayerStack) -> Result<ClampReport> {
    let asg = require_assignments(stack)?;
    let g = &stack.geometry;
    let n = g.pixels_per_side;
    let mut in_footprint = 0;
    let mut per_layer = vec![0; g.n_layers];
    for (l, layer) in asg.iter().enumerate() {
        for ix in 0..n {
            for iy in 0..n {
                if g.pixel_radius(ix, iy) < stack.spec.radius() {
                    in_footprint += 1;
                    if layer[ix * n + iy].clamped {
                        per_layer[l] += 1;
                    }
                }
            }
        }
    }
    let clamped: usize = per_layer.iter().sum();
    Ok(ClampReport {
        in_footprint,
        clamped,
        fraction: if in_footprint == 0 {
            0.0
        } else {
            clamped as f64 / in_footprint as f64
        },
        clamped_per_layer: per_layer,
    })
}

/// Sub-cells per pixel along y and per layer along z.
pub const SUBCELLS_PER_PIXEL: usize = 16;
pub const SUBCELLS_PER_LAYER: usize = 8;

/// Piecewise-constant y–z cross-section through the centre row of pixels.
pub fn reconstruct_map(stack: &LayerStack) -> Result<MaterialMap> {
    let asg = require_assignments(stack)?;
    let g = &stack.geometry;
    let n = g.pixels_per_side;
    let dy = g.pixel_pitch_mm / SUBCELLS_PER_PIXEL as f64;
    let dz = g.layer_thickness_mm / SUBCELLS_PER_LAYER as f64;
    let ny = n * SUBCELLS_PER_PIXEL;
    let nz = g.n_layers * SUBCELLS_PER_LAYER;
    let grid = Grid2 {
        y0: -(n as f64) * g.pixel_pitch_mm / 2.0 + dy / 2.0,
        z0: -(g.n_layers as f64) * g.layer_thickness_mm / 2.0 + dz / 2.0,
        dy,
        dz,
        ny,
        nz,
    };
    let row = (n - 1) / 2;
    let mut data = vec![1.0; ny * nz];
    for i in 0..ny {
        let iy = i / SUBCELLS_PER_PIXEL;
        for j in 0..nz {
            let layer = j / SUBCELLS_PER_LAYER;
            data[i * nz + j] = asg[layer][row * n + iy].achieved_eps;
        }
    }
    MaterialMap::new(
        grid,
        MapData::Scalar(data),
        MapMetadata {
            spec: Some(stack.spec),
            reduced: true,
            weighted: stack.weighted,
        },
    )
}

#[derive(Debug, Clone, Serialize)]
struct LayerSummary {
    layer: usize,
    z_mm: f64,
    target_min: f64,
    target_max: f64,
    achieved_min: f64,
    achieved_max: f64,
    clamped: usize,
}

#[derive(Debug, Clone, Serialize)]
struct StackSummary {
    geometry: StackGeometry,
    radius_mm: f64,
    half_thickness_mm: f64,
    weighted: bool,
    clamp: ClampReport,
    family_counts: std::collections::BTreeMap<String, usize>,
    layers: Vec<LayerSummary>,
}

/// `layer_NN.csv` per layer plus `stack_summary.json`; returns the paths written.
pub fn export_stack(stack: &LayerStack, dir: &Path) -> Result<Vec<PathBuf>> {
    let asg = require_assignments(stack)?;
    let report = clamp_report(stack)?;
    let g = &stack.geometry;
    let n = g.pixels_per_side;
    let width = g.n_layers.to_string().len().max(2);
    let mut written = Vec::new();
    let mut layers = Vec::new();
    let mut family_counts = std::collections::BTreeMap::new();
    for (l, (targets, cells)) in stack.targets.iter().zip(asg).enumerate() {
        let mut s = String::from("ix,iy,target_eps,family,param,achieved_eps,clamped\n");
        for ix in 0..n {
            for iy in 0..n {
                let k = ix * n + iy;
                let c = cells[k];
                *family_counts.entry(c.family.as_str().to_string()).or_insert(0) += 1;
                s.push_str(&format!(
                    "{ix},{iy},{},{},{},{},{}\n",
                    sig9(targets[k]),
                    c.family,
                    sig9(c.param),
                    sig9(c.achieved_eps),
                    c.clamped
                ));
            }
        }
        let path = dir.join(format!("layer_{:0width$}.csv", l + 1));
        write_text(&path, &s)?;
        written.push(path);
        let fold = |v: &mut dyn Iterator<Item = f64>| {
            v.fold((f64::INFINITY, f64::NEG_INFINITY), |(lo, hi), x| (lo.min(x), hi.max(x)))
        };
        let (tmin, tmax) = fold(&mut targets.iter().copied());
        let (amin, amax) = fold(&mut cells.iter().map(|c| c.achieved_eps));
        layers.push(LayerSummary {
            layer: l + 1,
            z_mm: g.layer_z(l),
            target_min: tmin,
            target_max: tmax,
            achieved_min: amin,
            achieved_max: amax,
            clamped: report.clamped_per_layer[l],
        });
    }
    let summary = StackSummary {
        geometry: *g,
        radius_mm: stack.spec.radius(),
        half_thickness_mm: stack.spec.half_thickness(),
        weighted: stack.weighted,
        clamp: report,
        family_counts,
        layers,
    };
    let path = dir.join("stack_summary.json");
    let json = serde_json::to_string_pretty(&summary).expect("summary serializes");
    write_text(&path, &(json + "\n"))?;
    written.push(path);
    Ok(written)
}
